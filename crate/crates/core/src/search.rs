use crate::scalar::Scalar;

/// Inverse golden ratio, `(sqrt(5) - 1) / 2`.
const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for the maximum of `f` on `[lo, hi]`.
///
/// Stops after `max_iterations` or once the bracket is narrower than `xtol`.
/// Returns the best point seen together with its value.
pub fn golden_section_max<T, F>(mut f: F, lo: T, hi: T, max_iterations: usize, xtol: T) -> (T, T)
where
    T: Scalar,
    F: FnMut(T) -> T,
{
    let ratio = T::lit(INV_PHI);
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    let mut best = if fd >= fc { (d, fd) } else { (c, fc) };

    for _ in 0..max_iterations {
        if b - a <= xtol {
            break;
        }
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
            if fc > best.1 {
                best = (c, fc);
            }
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
            if fd >= best.1 {
                best = (d, fd);
            }
        }
    }
    for x in [a, b] {
        let fx = f(x);
        if fx > best.1 {
            best = (x, fx);
        }
    }
    best
}
