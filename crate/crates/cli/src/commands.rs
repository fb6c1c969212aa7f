use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use pab_core::analysis::{
    dominance_transform, grid_quadruples, increasing_differences_check, increasing_differences_sides, k_sweep,
    kink_improvement, random_quadruples, same_regime, Quadruple,
};
use pab_core::equilibrium::multi_start;
use pab_core::{
    clear_market_general, find_equilibrium, pab_utility_general, verify_nash, KinkedOffer, MarketOutcome, Scenario,
    SolverOptions, SupplyCurve,
};
use serde_json::json;

use crate::error::{CliError, CliResult};
use crate::record::{Inputs, KinkedAlternative, Outputs, ResultRecord, TransformedCurve};
use crate::scenario::ScenarioFile;
use crate::table::{render, s6};
use crate::{Format, ScenarioArgs, SolverArgs};

struct Loaded {
    source: String,
    file: ScenarioFile,
    scenario: Scenario<f64>,
}

fn load(args: &ScenarioArgs) -> CliResult<Loaded> {
    let (source, file) = args.load()?;
    let scenario = file.to_scenario()?;
    Ok(Loaded { source, file, scenario })
}

impl Loaded {
    fn inputs(&self, args: BTreeMap<String, serde_json::Value>) -> Inputs {
        Inputs {
            source: self.source.clone(),
            scenario: self.file.clone(),
            args,
        }
    }
}

fn emit(record: &ResultRecord, format: Format, table: String) -> CliResult<()> {
    // the record is validated even when only the table is shown
    let json = record.to_json()?;
    let text = match format {
        Format::Json => json + "\n",
        Format::Table => {
            let mut text = table;
            for d in &record.diagnostics {
                text.push_str(&format!("note: {d}\n"));
            }
            text
        }
    };
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        Err(e) => Err(CliError::Io(format!("cannot write to stdout: {e}"))),
    }
}

fn solver_options(file: &ScenarioFile, args: &SolverArgs) -> CliResult<SolverOptions<f64>> {
    let from_file = file.solver.clone().unwrap_or_default();
    let defaults = SolverOptions::<f64>::default();
    let options = SolverOptions {
        tolerance: args.tolerance.or(from_file.tolerance).unwrap_or(defaults.tolerance),
        max_iterations: args
            .max_iterations
            .or(from_file.max_iterations)
            .unwrap_or(defaults.max_iterations),
        damping: args.damping.or(from_file.damping).unwrap_or(defaults.damping),
    };
    if options.max_iterations == 0 {
        return Err(CliError::Validation("max_iterations must be at least 1".into()));
    }
    options.validate()?;
    Ok(options)
}

fn check_profile_len(scenario: &Scenario<f64>, breakpoints: &[f64]) -> CliResult<()> {
    if breakpoints.len() != scenario.n_firms() {
        return Err(CliError::Validation(format!(
            "expected {} breakpoints, got {}",
            scenario.n_firms(),
            breakpoints.len()
        )));
    }
    Ok(())
}

fn firm_index(scenario: &Scenario<f64>, one_based: usize) -> CliResult<usize> {
    if one_based == 0 || one_based > scenario.n_firms() {
        return Err(CliError::Validation(format!(
            "firm {one_based} does not exist (scenario has {} firms)",
            scenario.n_firms()
        )));
    }
    Ok(one_based - 1)
}

fn firm_table(scenario: &Scenario<f64>, breakpoints: &[f64], quantities: &[f64], utilities: &[f64], gains: Option<&[f64]>) -> String {
    let mut header = vec!["firm", "c", "breakpoint", "quantity", "utility"];
    if gains.is_some() {
        header.push("max gain");
    }
    let rows: Vec<Vec<String>> = scenario
        .firms
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let mut row = vec![
                f.id.to_string(),
                s6(f.cost_coeff()),
                s6(breakpoints[i]),
                s6(quantities[i]),
                s6(utilities[i]),
            ];
            if let Some(g) = gains {
                row.push(s6(g[i]));
            }
            row
        })
        .collect();
    render(&header, &rows)
}

pub fn clear(args: &ScenarioArgs, breakpoints: Vec<f64>, all_at_cap: bool, format: Format) -> CliResult<()> {
    let loaded = load(args)?;
    let scenario = &loaded.scenario;
    let breakpoints = if all_at_cap {
        vec![scenario.price_cap(); scenario.n_firms()]
    } else {
        breakpoints
    };
    check_profile_len(scenario, &breakpoints)?;
    let outcome = MarketOutcome::from_kinked(scenario, &breakpoints)?;
    let total_supply: f64 = outcome.quantities.iter().sum();
    let demand_at_price = scenario.demand.demand_at(outcome.clearing_price);

    let mut table = format!("clearing price p* = {}\n\n", s6(outcome.clearing_price));
    table.push_str(&firm_table(scenario, &breakpoints, &outcome.quantities, &outcome.utilities, None));
    table.push_str(&format!(
        "\ntotal supply = {}, demand D(p*) = {}\n",
        s6(total_supply),
        s6(demand_at_price)
    ));

    let inputs = loaded.inputs(BTreeMap::from([
        ("breakpoints".to_string(), json!(breakpoints)),
        ("all_at_cap".to_string(), json!(all_at_cap)),
    ]));
    let record = ResultRecord::new(
        "clear",
        inputs,
        Outputs::Clear {
            breakpoints,
            clearing_price: outcome.clearing_price,
            quantities: outcome.quantities,
            utilities: outcome.utilities,
            total_supply,
            demand_at_price,
        },
        vec![],
    );
    emit(&record, format, table)
}

pub fn solve(
    args: &ScenarioArgs,
    solver: &SolverArgs,
    starts: usize,
    seed: Option<u64>,
    epsilon: f64,
    grid: usize,
    format: Format,
) -> CliResult<()> {
    let loaded = load(args)?;
    let scenario = &loaded.scenario;
    let options = solver_options(&loaded.file, solver)?;
    let seed = seed
        .or(loaded.file.solver.as_ref().and_then(|s| s.seed))
        .unwrap_or(0);

    let eq = find_equilibrium(scenario, &options)?;
    let certificate = verify_nash(&eq.breakpoints, scenario, epsilon, grid)?;
    let multi = if starts > 0 {
        Some(multi_start(scenario, &options, starts, seed)?)
    } else {
        None
    };

    let mut diagnostics = Vec::new();
    if !eq.converged {
        diagnostics.push(format!(
            "best-response dynamics did not converge within {} iterations (residual {:e}, tolerance {:e}, damping {})",
            eq.iterations, eq.residual, options.tolerance, options.damping
        ));
    }
    if let Some(m) = &multi {
        let converged = m.runs.iter().filter(|r| r.converged).count();
        diagnostics.push(format!(
            "multi-start: {converged} of {} runs converged; {} disagree with the first converged run beyond {:e}",
            m.runs.len(),
            m.disagreeing_runs.len(),
            m.agreement_tolerance
        ));
    }

    let mut table = format!(
        "K = {}, {} iterations, converged = {}, residual = {}\nclearing price p* = {}\n\n",
        s6(scenario.lipschitz),
        eq.iterations,
        eq.converged,
        s6(eq.residual),
        s6(eq.clearing_price)
    );
    table.push_str(&firm_table(
        scenario,
        &eq.breakpoints,
        &eq.quantities,
        &eq.utilities,
        Some(&certificate.per_firm_max_gain),
    ));
    table.push_str(&format!(
        "\nNash certificate (epsilon = {}, grid = {}): {}\n",
        s6(epsilon),
        grid,
        if certificate.passed { "PASSED" } else { "FAILED" }
    ));

    let inputs = loaded.inputs(BTreeMap::from([
        ("tolerance".to_string(), json!(options.tolerance)),
        ("max_iterations".to_string(), json!(options.max_iterations)),
        ("damping".to_string(), json!(options.damping)),
        ("multi_start".to_string(), json!(starts)),
        ("seed".to_string(), json!(seed)),
        ("epsilon".to_string(), json!(epsilon)),
        ("grid".to_string(), json!(grid)),
    ]));
    let record = ResultRecord::new(
        "solve",
        inputs,
        Outputs::Solve {
            equilibrium: eq,
            certificate,
            multi_start: multi,
        },
        diagnostics,
    );
    emit(&record, format, table)
}

pub fn sweep(args: &ScenarioArgs, solver: &SolverArgs, k_values: &[f64], output: &Path, format: Format) -> CliResult<()> {
    let loaded = load(args)?;
    let scenario = &loaded.scenario;
    let options = solver_options(&loaded.file, solver)?;
    if k_values.is_empty() {
        return Err(CliError::Validation("K list is empty".into()));
    }
    let rows = k_sweep(scenario, k_values, &options)?;

    let n = scenario.n_firms();
    let io = |e: csv::Error| CliError::Io(format!("cannot write {}: {e}", output.display()));
    let mut writer = csv::Writer::from_path(output).map_err(io)?;
    let mut header = vec!["K".to_string(), "converged".into(), "iterations".into(), "p_star".into()];
    header.extend((1..=n).map(|i| format!("p_{i}")));
    header.extend((1..=n).map(|i| format!("u_{i}")));
    writer.write_record(&header).map_err(io)?;
    for row in &rows {
        let mut fields = vec![
            row.k.to_string(),
            row.converged.to_string(),
            row.iterations.to_string(),
            row.clearing_price.to_string(),
        ];
        fields.extend(row.breakpoints.iter().map(f64::to_string));
        fields.extend(row.utilities.iter().map(f64::to_string));
        writer.write_record(&fields).map_err(io)?;
    }
    writer
        .flush()
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", output.display())))?;

    let mut head = vec!["K".to_string(), "converged".into(), "p*".into()];
    head.extend((1..=n).map(|i| format!("p_{i}")));
    head.extend((1..=n).map(|i| format!("u_{i}")));
    let head_refs: Vec<&str> = head.iter().map(String::as_str).collect();
    let table_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            let mut v = vec![s6(r.k), r.converged.to_string(), s6(r.clearing_price)];
            v.extend(r.breakpoints.iter().map(|&x| s6(x)));
            v.extend(r.utilities.iter().map(|&x| s6(x)));
            v
        })
        .collect();
    let mut table = render(&head_refs, &table_rows);
    table.push_str(&format!("\nwrote {} rows to {}\n", rows.len(), output.display()));

    let diagnostics = rows
        .iter()
        .filter(|r| !r.converged)
        .map(|r| format!("K = {} did not converge within {} iterations", r.k, r.iterations))
        .collect();
    let inputs = loaded.inputs(BTreeMap::from([
        ("k_values".to_string(), json!(k_values)),
        ("output".to_string(), json!(output.display().to_string())),
    ]));
    let record = ResultRecord::new(
        "sweep",
        inputs,
        Outputs::Sweep {
            rows,
            table_path: output.display().to_string(),
        },
        diagnostics,
    );
    emit(&record, format, table)
}

pub struct SupermodArgs {
    pub firm: Option<usize>,
    pub quadruple: Option<String>,
    pub grid: Option<usize>,
    pub random: Option<usize>,
    pub seed: u64,
    pub same_regime: bool,
}

fn parse_list(text: &str) -> CliResult<Vec<f64>> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| CliError::Validation(format!("bad number {t:?}: {e}")))
        })
        .collect()
}

fn parse_quadruple(text: &str) -> CliResult<Quadruple<f64>> {
    let parts: Vec<&str> = text.split(';').collect();
    if parts.len() != 3 {
        return Err(CliError::Validation(format!(
            "quadruple must look like `own_low,own_high;others_low...;others_high...`, got {text:?}"
        )));
    }
    let own = parse_list(parts[0])?;
    if own.len() != 2 {
        return Err(CliError::Validation(format!(
            "expected two own breakpoints, got {}",
            own.len()
        )));
    }
    Ok(Quadruple {
        own_low: own[0],
        own_high: own[1],
        others_low: parse_list(parts[1])?,
        others_high: parse_list(parts[2])?,
    })
}

pub fn supermod(args: &ScenarioArgs, opts: SupermodArgs, format: Format) -> CliResult<()> {
    let loaded = load(args)?;
    let scenario = &loaded.scenario;
    let preset = loaded.file.quadruple.as_ref();
    let firm_one_based = opts.firm.or(preset.map(|q| q.firm)).unwrap_or(1);
    let firm = firm_index(scenario, firm_one_based)?;

    let mut quadruples = if let Some(text) = &opts.quadruple {
        vec![parse_quadruple(text)?]
    } else if let Some(points) = opts.grid {
        if points < 2 {
            return Err(CliError::Validation("grid needs at least 2 points".into()));
        }
        grid_quadruples(scenario, points)
    } else if let Some(count) = opts.random {
        random_quadruples(scenario, count, opts.seed)
    } else if let Some(q) = preset {
        vec![q.to_quadruple()]
    } else {
        return Err(CliError::Validation(
            "no quadruple: pass --quadruple, --grid or --random, or add a [quadruple] section".into(),
        ));
    };
    if opts.same_regime {
        let mut kept = Vec::with_capacity(quadruples.len());
        for q in quadruples {
            if same_regime(scenario, firm, &q)? {
                kept.push(q);
            }
        }
        quadruples = kept;
    }
    let report = increasing_differences_check(scenario, firm, &quadruples)?;

    let mut table = format!(
        "firm {firm_one_based}: tested {} quadruples, {} violations of increasing differences\n",
        report.tested_quadruples,
        report.violations.len()
    );
    let shown: Vec<(Quadruple<f64>, f64, f64)> = if quadruples.len() <= 10 {
        quadruples
            .iter()
            .map(|q| increasing_differences_sides(scenario, firm, q).map(|(l, r)| (q.clone(), l, r)))
            .collect::<Result<_, _>>()?
    } else {
        report
            .violations
            .iter()
            .take(10)
            .map(|v| (v.quadruple.clone(), v.lhs, v.rhs))
            .collect()
    };
    if !shown.is_empty() {
        let list = |v: &[f64]| v.iter().map(|&x| s6(x)).collect::<Vec<_>>().join(",");
        let rows: Vec<Vec<String>> = shown
            .iter()
            .map(|(q, lhs, rhs)| {
                let violated = *lhs < *rhs - pab_core::analysis::INCREASING_DIFFERENCES_SLACK;
                vec![
                    s6(q.own_low),
                    s6(q.own_high),
                    list(&q.others_low),
                    list(&q.others_high),
                    s6(*lhs),
                    s6(*rhs),
                    if violated { "VIOLATION".into() } else { "ok".into() },
                ]
            })
            .collect();
        table.push('\n');
        table.push_str(&render(
            &["own", "own'", "others", "others'", "lhs", "rhs", "status"],
            &rows,
        ));
    }
    table.push_str(&format!(
        "\nincreasing differences on sample: {}\n",
        if report.is_supermodular_on_sample { "holds" } else { "VIOLATED" }
    ));

    let mut echo = BTreeMap::from([
        ("firm".to_string(), json!(firm_one_based)),
        ("seed".to_string(), json!(opts.seed)),
        ("same_regime".to_string(), json!(opts.same_regime)),
    ]);
    if let Some(q) = &opts.quadruple {
        echo.insert("quadruple".into(), json!(q));
    }
    if let Some(g) = opts.grid {
        echo.insert("grid".into(), json!(g));
    }
    if let Some(r) = opts.random {
        echo.insert("random".into(), json!(r));
    }
    let record = ResultRecord::new(
        "supermod",
        loaded.inputs(echo),
        Outputs::Supermod {
            firm: firm_one_based,
            report,
            regime_filtered: opts.same_regime,
        },
        vec![],
    );
    emit(&record, format, table)
}

pub fn verify(args: &ScenarioArgs, breakpoints: &[f64], epsilon: f64, grid: usize, format: Format) -> CliResult<()> {
    let loaded = load(args)?;
    let scenario = &loaded.scenario;
    check_profile_len(scenario, breakpoints)?;
    let outcome = MarketOutcome::from_kinked(scenario, breakpoints)?;
    let certificate = verify_nash(breakpoints, scenario, epsilon, grid)?;

    let mut table = format!("clearing price p* = {}\n\n", s6(outcome.clearing_price));
    table.push_str(&firm_table(
        scenario,
        breakpoints,
        &outcome.quantities,
        &outcome.utilities,
        Some(&certificate.per_firm_max_gain),
    ));
    table.push_str(&format!(
        "\nNash certificate (epsilon = {}, grid = {grid}): {}\n",
        s6(epsilon),
        if certificate.passed { "PASSED" } else { "FAILED" }
    ));
    let record = ResultRecord::new(
        "verify",
        loaded.inputs(BTreeMap::from([
            ("breakpoints".to_string(), json!(breakpoints)),
            ("epsilon".to_string(), json!(epsilon)),
            ("grid".to_string(), json!(grid)),
        ])),
        Outputs::Verify {
            breakpoints: breakpoints.to_vec(),
            clearing_price: outcome.clearing_price,
            utilities: outcome.utilities,
            certificate,
        },
        vec![],
    );
    emit(&record, format, table)
}

fn parse_curve(text: &str) -> CliResult<SupplyCurve<f64>> {
    let nodes = text
        .split(',')
        .map(|pair| {
            let (p, q) = pair
                .split_once(':')
                .ok_or_else(|| CliError::Validation(format!("curve node {pair:?} is not `price:quantity`")))?;
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| CliError::Validation(format!("bad number {s:?} in curve: {e}")))
            };
            Ok((parse(p)?, parse(q)?))
        })
        .collect::<CliResult<Vec<_>>>()?;
    Ok(SupplyCurve::new(nodes)?)
}

pub fn dominate(
    args: &ScenarioArgs,
    curve_text: &str,
    firm_one_based: usize,
    opponents: &[f64],
    clearing_price: Option<f64>,
    format: Format,
) -> CliResult<()> {
    let loaded = load(args)?;
    let scenario = &loaded.scenario;
    let firm = scenario.firms[firm_index(scenario, firm_one_based)?];
    let curve = parse_curve(curve_text)?;
    curve.check_domain(&scenario.demand)?;
    let cap = scenario.price_cap();
    let k = scenario.lipschitz;
    let opponent_curves = opponents
        .iter()
        .map(|&b| KinkedOffer::new(b, k, &scenario.demand).map(|o| o.to_supply_curve(cap)))
        .collect::<Result<Vec<_>, _>>()?;
    let clear_with = |own: &SupplyCurve<f64>| {
        let mut curves = vec![own.clone()];
        curves.extend(opponent_curves.iter().cloned());
        clear_market_general(&curves, &scenario.demand)
    };

    let mut diagnostics = Vec::new();
    let p_star = match clearing_price {
        Some(p) => {
            diagnostics.push("clearing price given explicitly; re-clearing uses only the listed opponents".into());
            p
        }
        None => clear_with(&curve)?,
    };
    let original = pab_utility_general(&curve, p_star, &firm)?;
    let original_integral = curve.integral_to(p_star);

    let transformed_curve = dominance_transform(&curve, p_star)?;
    let transformed = TransformedCurve {
        integral: transformed_curve.integral_to(p_star),
        utility: pab_utility_general(&transformed_curve, p_star, &firm)?,
        clearing_price_after: clear_with(&transformed_curve)?,
        curve: transformed_curve,
    };

    let kinked = match kink_improvement(&curve, p_star, k) {
        Ok(offer) => {
            let kinked_curve = offer.to_supply_curve(cap);
            let after = clear_with(&kinked_curve)?;
            Some(KinkedAlternative {
                offer,
                utility: pab_utility_general(&kinked_curve, after, &firm)?,
                clearing_price_after: after,
            })
        }
        Err(e @ pab_core::Error::LipschitzViolation { .. }) => {
            diagnostics.push(format!("no kinked improvement: {e}"));
            None
        }
        Err(e) => return Err(e.into()),
    };

    let mut rows = vec![vec![
        "original".to_string(),
        s6(p_star),
        s6(original_integral),
        s6(original.revenue),
        s6(original.cost),
        s6(original.utility),
    ]];
    rows.push(vec![
        "S(p^2/p*)".to_string(),
        s6(transformed.clearing_price_after),
        s6(transformed.integral),
        s6(transformed.utility.revenue),
        s6(transformed.utility.cost),
        s6(transformed.utility.utility),
    ]);
    if let Some(kk) = &kinked {
        let kinked_curve = kk.offer.to_supply_curve(cap);
        rows.push(vec![
            format!("K[p-{}]+", s6(kk.offer.breakpoint)),
            s6(kk.clearing_price_after),
            s6(kinked_curve.integral_to(kk.clearing_price_after)),
            s6(kk.utility.revenue),
            s6(kk.utility.cost),
            s6(kk.utility.utility),
        ]);
    }
    let mut table = format!("firm {firm_one_based}, clearing price p* = {}\n\n", s6(p_star));
    table.push_str(&render(
        &["strategy", "p*", "integral", "revenue", "cost", "utility"],
        &rows,
    ));

    let record = ResultRecord::new(
        "dominate",
        loaded.inputs(BTreeMap::from([
            ("curve".to_string(), json!(curve_text)),
            ("firm".to_string(), json!(firm_one_based)),
            ("opponents".to_string(), json!(opponents)),
            ("clearing_price".to_string(), json!(clearing_price)),
        ])),
        Outputs::Dominate {
            firm: firm_one_based,
            clearing_price: p_star,
            original,
            original_integral,
            transformed,
            kinked,
        },
        diagnostics,
    );
    emit(&record, format, table)
}
