//! The four subcommands. Each writes its files into the configured output
//! directory and prints a short summary on stdout.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use excouple::analysis::{
    empirical_tail_curve, exact_tv_values, fit_decay, hitting_time_tail, tail_sup_distance,
    verify_coupling_inequality, write_curve_csv, write_tail_csv, CurveRow, DecayKind, HittingTimeLaw,
    InequalityReport, TvPoint, WalkOrder, DEFAULT_FIT_LO,
};
use excouple::coupling::{simulate_runs, RunRecord, DEFAULT_HORIZON};
use excouple::solver::{
    difference_generators, free_group_tail_separation, generate_subgroup, gs_membership, MembershipVerdict,
    DEFAULT_SEPARATION_HORIZON,
};
use excouple::{
    build_plan, AtomGuard, AtomicMeasure, CouplingPlan, CouplingTime, ElementOrder, GroupCtx, GroupElement,
    Mass, Rational, RunOptions, RunSeed,
};
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, MassMode};
use crate::exit::InvariantViolation;

pub const DEFAULT_RUNS: u64 = 10_000;
pub const DEFAULT_DEMO_RUNS: u64 = 100_000;
pub const DEFAULT_OVERLAP_N_MAX: usize = 64;
pub const DEFAULT_TV_N_MAX: usize = 256;
pub const DEFAULT_DEMO_TV_N_MAX: usize = 12;
/// Default `tail.csv` length, in blocks.
pub const DEFAULT_TAIL_BLOCKS: u64 = 64;

fn parse_mu<M: Mass>(cfg: &ExperimentConfig) -> Result<AtomicMeasure<M>> {
    let mu = AtomicMeasure::parse_literal(cfg.group.clone(), &cfg.measure)
        .with_context(|| format!("measure `{}`", cfg.measure))?;
    if !mu.is_probability(1e-9) {
        bail!("measure `{}` has total mass {}, not 1", cfg.measure, mu.total());
    }
    Ok(mu)
}

fn parse_x(cfg: &ExperimentConfig) -> Result<GroupElement> {
    cfg.group
        .parse_element(&cfg.x)
        .with_context(|| format!("element `{}` of {}", cfg.x, cfg.group))
}

fn create_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn write_json(dir: &Path, name: &str, value: &Value) -> Result<()> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// CSV files start with a `#` comment carrying the wall-clock time unless
/// timestamps are disabled.
fn csv_writer(cfg: &ExperimentConfig, name: &str) -> Result<BufWriter<File>> {
    let mut w = create(&cfg.out, name)?;
    if cfg.timestamp {
        let secs = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        writeln!(w, "# generated by excouple {} at unix time {secs}", env!("CARGO_PKG_VERSION"))?;
    }
    Ok(w)
}

fn measure_json(m: &AtomicMeasure<f64>) -> Value {
    let ctx = m.ctx();
    Value::Array(
        m.sorted_atoms()
            .into_iter()
            .map(|(g, w)| json!([ctx.format_element(&g), w]))
            .collect(),
    )
}

fn order_json(o: ElementOrder) -> Value {
    match o {
        ElementOrder::Finite(d) => json!(d),
        ElementOrder::InfiniteOrBeyondCap => json!("infinite"),
    }
}

fn plan_json(plan: &CouplingPlan) -> Value {
    let ctx = &plan.ctx;
    json!({
        "x": ctx.format_element(&plan.x),
        "n0": plan.n0,
        "nu_mass": plan.nu_mass,
        "nu_mass_exact": plan.nu_mass_text,
        "laziness": plan.laziness,
        "xi": measure_json(&plan.xi),
        "U": plan.u.iter().map(|g| ctx.format_element(g)).collect::<Vec<_>>(),
        "nu": measure_json(&plan.nu),
        "x_commutes_with_supp_mu_n0": plan.commuting,
        "x_order": order_json(plan.x_order),
    })
}

/// Law of `T/n0` when the block differences stay powers of `x`.
fn hitting_law(plan: &CouplingPlan, blocks: usize) -> Result<Option<HittingTimeLaw>> {
    if !plan.commuting {
        return Ok(None);
    }
    Ok(Some(hitting_time_tail(WalkOrder::from(plan.x_order), plan.laziness, blocks.max(1))?))
}

fn build<M: Mass>(cfg: &ExperimentConfig, x: &GroupElement, n_max: usize, guard: AtomGuard) -> Result<CouplingPlan> {
    let mu = parse_mu::<M>(cfg)?;
    Ok(build_plan(&mu, x, n_max, cfg.nu_strategy, guard)?)
}

fn exact_masses(cfg: &ExperimentConfig, default_exact: bool) -> bool {
    match cfg.mass {
        MassMode::Exact => true,
        MassMode::Float => false,
        MassMode::Auto => default_exact,
    }
}

/// Simulates seeded couplings and writes `runs.jsonl`, `tail.csv` and
/// `plan.json`.
pub fn couple(cfg: &ExperimentConfig) -> Result<()> {
    let guard = AtomGuard::from_env();
    let x = parse_x(cfg)?;
    let runs = cfg.runs.unwrap_or(DEFAULT_RUNS);
    let horizon = cfg.horizon.unwrap_or(DEFAULT_HORIZON);
    let n_max = cfg.n_max.unwrap_or(DEFAULT_OVERLAP_N_MAX);
    // Validates the measure even for the identity shift.
    parse_mu::<Rational>(cfg)?;
    create_out(&cfg.out)?;

    if cfg.group.is_identity(&x) {
        let mut w = create(&cfg.out, "runs.jsonl")?;
        for i in 0..runs {
            let rec = RunRecord {
                x: cfg.group.format_element(&x),
                n0: 0,
                nu_mass: 0.0,
                t_or_censored: CouplingTime::Finite(0),
                blocks_executed: 0,
                seed: RunSeed::new(cfg.seed, i).derived(),
            };
            serde_json::to_writer(&mut w, &rec)?;
            writeln!(w)?;
        }
        w.flush()?;
        let mut w = csv_writer(cfg, "tail.csv")?;
        writeln!(w, "{}", excouple::analysis::TAIL_CSV_HEADER)?;
        writeln!(w, "0,0,0,0")?;
        w.flush()?;
        write_json(
            &cfg.out,
            "plan.json",
            &json!({
                "x": cfg.group.format_element(&x),
                "identity": true,
                "n0": 0,
                "T": 0,
                "runs": runs,
                "seed": cfg.seed,
            }),
        )?;
        println!("x is the identity: T = 0 for every run");
        return Ok(());
    }

    let plan = if exact_masses(cfg, true) {
        build::<Rational>(cfg, &x, n_max, guard)?
    } else {
        build::<f64>(cfg, &x, n_max, guard)?
    };
    let opts = RunOptions::with_horizon(horizon);
    let out = simulate_runs(&plan, &opts, cfg.seed, runs)?;
    let used_horizon = out.first().map(|r| r.horizon).unwrap_or(horizon);

    let mut w = create(&cfg.out, "runs.jsonl")?;
    for r in &out {
        serde_json::to_writer(&mut w, &r.record(&cfg.group, plan.nu_mass))?;
        writeln!(w)?;
    }
    w.flush()?;

    let tail_max = cfg
        .tail_max
        .unwrap_or(DEFAULT_TAIL_BLOCKS * plan.n0 as u64)
        .min(used_horizon);
    let tails = empirical_tail_curve(&out, tail_max)?;
    let mut w = csv_writer(cfg, "tail.csv")?;
    write_tail_csv(&mut w, &tails)?;
    w.flush()?;

    let coupled = out.iter().filter(|r| r.time.finite().is_some()).count();
    let law = hitting_law(&plan, tail_max as usize / plan.n0 + 1)?;
    let distance = law.as_ref().map(|l| tail_sup_distance(&tails, l, plan.n0));
    let mut summary = plan_json(&plan);
    let extra = json!({
        "runs": runs,
        "seed": cfg.seed,
        "horizon": used_horizon,
        "horizon_rounded_to_blocks": used_horizon != horizon,
        "coupled_runs": coupled,
        "censored_runs": out.len() - coupled,
        "mass": if exact_masses(cfg, true) { "exact" } else { "float" },
        "tail_sup_distance_to_hitting_law": distance,
    });
    merge(&mut summary, extra);
    write_json(&cfg.out, "plan.json", &summary)?;

    println!(
        "n0 = {}, nu(G) = {}, laziness = {}; {coupled}/{runs} runs coupled before {used_horizon}",
        plan.n0, plan.nu_mass_text, plan.laziness
    );
    if let Some(d) = distance {
        println!("sup |empirical P(T > n) - hitting law| = {d:.4}");
    }
    Ok(())
}

fn merge(into: &mut Value, from: Value) {
    if let (Value::Object(a), Value::Object(b)) = (into, from) {
        a.extend(b);
    }
}

struct TvOutcome {
    verdict: MembershipVerdict,
    values: Vec<f64>,
    plan: Option<CouplingPlan>,
}

fn tv_outcome<M: Mass>(
    cfg: &ExperimentConfig,
    x: &GroupElement,
    n_max: usize,
    guard: AtomGuard,
) -> Result<TvOutcome> {
    let mu = parse_mu::<M>(cfg)?;
    let verdict = gs_membership(&mu, x, n_max, guard)?;
    let values = exact_tv_values(&mu, x, n_max, guard)?
        .iter()
        .map(Mass::to_f64)
        .collect();
    let plan = if verdict.gp_yes() && !cfg.group.is_identity(x) {
        Some(build_plan(&mu, x, n_max, cfg.nu_strategy, guard)?)
    } else {
        None
    };
    Ok(TvOutcome { verdict, values, plan })
}

fn curve_points(values: &[f64]) -> Vec<TvPoint> {
    values
        .iter()
        .enumerate()
        .map(|(i, &tv)| TvPoint { n: i + 1, tv })
        .collect()
}

/// Writes the exact total variation curve with its coupling bound to
/// `tv.csv`, and the decay fit and inequality check to `fit.json`.
pub fn tv(cfg: &ExperimentConfig) -> Result<()> {
    let guard = AtomGuard::from_env();
    let x = parse_x(cfg)?;
    let n_max = cfg.n_max.unwrap_or(DEFAULT_TV_N_MAX);
    let exact = exact_masses(cfg, cfg.group.is_finite());
    create_out(&cfg.out)?;
    let outcome = if exact {
        tv_outcome::<Rational>(cfg, &x, n_max, guard)?
    } else {
        tv_outcome::<f64>(cfg, &x, n_max, guard)?
    };
    let curve = curve_points(&outcome.values);

    let identity = cfg.group.is_identity(&x);
    let (law, n0) = match &outcome.plan {
        Some(p) => (hitting_law(p, n_max / p.n0 + 1)?, p.n0),
        None => (None, 0),
    };
    let (report, inequality_note): (Option<InequalityReport>, Option<&str>) = if identity {
        (Some(verify_coupling_inequality(&curve, None, 0)?), None)
    } else if law.is_some() {
        (Some(verify_coupling_inequality(&curve, law.as_ref(), n0)?), None)
    } else if outcome.plan.is_some() {
        (None, Some("x does not commute with supp mu^n0; P(T > n) has no closed form here"))
    } else {
        (None, Some("no coupling plan: no overlap up to n_max"))
    };

    let rows: Vec<CurveRow> = curve
        .iter()
        .map(|p| CurveRow {
            n: p.n,
            tv: Some(p.tv),
            bound: if identity {
                Some(0.0)
            } else {
                law.as_ref().and_then(|l| l.coupling_tail(p.n, n0)).map(|t| 2.0 * t)
            },
            empirical: None,
        })
        .collect();
    let mut w = csv_writer(cfg, "tv.csv")?;
    write_curve_csv(&mut w, &rows)?;
    w.flush()?;

    let (fit, refused) = if identity {
        (None, Some("x is the identity: tv_n = 0".to_string()))
    } else if !outcome.verdict.gs_yes() {
        (
            None,
            Some("x is not certified in G_s, so no decay is asserted and the fit is refused".to_string()),
        )
    } else {
        let finite = matches!(outcome.plan.as_ref().map(|p| p.x_order), Some(ElementOrder::Finite(_)));
        let kind = if finite { DecayKind::Geometric } else { DecayKind::PowerLaw };
        let lo = cfg.fit_lo.unwrap_or(DEFAULT_FIT_LO);
        let hi = cfg.fit_hi.unwrap_or(n_max);
        match fit_decay(&curve, kind, (lo, hi)) {
            Ok(f) => (Some(f), None),
            Err(e) => (None, Some(e.to_string())),
        }
    };
    let min_tv = outcome.values.iter().copied().fold(f64::INFINITY, f64::min);
    let doc = json!({
        "x": cfg.group.format_element(&x),
        "n_max": n_max,
        "mass": if exact { "exact" } else { "float" },
        "verdict": outcome.verdict.to_json(&cfg.group),
        "n0": outcome.plan.as_ref().map(|p| p.n0),
        "min_tv": min_tv,
        "fit": fit,
        "fit_refused": refused,
        "inequality": report,
        "inequality_note": inequality_note,
    });
    write_json(&cfg.out, "fit.json", &doc)?;

    match (&fit, &refused) {
        (Some(f), _) => println!("fit: {:?} over {:?}, max log-residual {:.3e}", f.model, f.fit_range, f.residual),
        (None, Some(r)) => println!("fit refused: {r}"),
        (None, None) => {}
    }
    if let Some(r) = &report {
        println!("coupling inequality: worst slack {:.3e} at n = {}", r.worst_slack, r.worst_n);
        if !r.holds {
            let v = &r.violations[0];
            return Err(InvariantViolation(format!(
                "tv_{} = {} exceeds 2 P(T > n) = {} ({} violations)",
                v.n,
                v.tv,
                v.bound,
                r.violations.len()
            ))
            .into());
        }
    }
    Ok(())
}

fn verdict_of<M: Mass>(cfg: &ExperimentConfig, x: &GroupElement, n_max: usize) -> Result<(MembershipVerdict, Vec<GroupElement>)> {
    let mu = parse_mu::<M>(cfg)?;
    let atoms = mu.sorted_atoms().into_iter().map(|(g, _)| g).collect();
    Ok((gs_membership(&mu, x, n_max, AtomGuard::from_env())?, atoms))
}

/// Writes `verdict.json` and, for Abelian groups (or on request), the
/// difference subgroup listing `closure.txt`.
pub fn solve(cfg: &ExperimentConfig) -> Result<()> {
    let x = parse_x(cfg)?;
    let n_max = cfg.n_max.unwrap_or(DEFAULT_OVERLAP_N_MAX);
    create_out(&cfg.out)?;
    let (verdict, atoms) = if exact_masses(cfg, true) {
        verdict_of::<Rational>(cfg, &x, n_max)?
    } else {
        verdict_of::<f64>(cfg, &x, n_max)?
    };
    write_json(&cfg.out, "verdict.json", &verdict.to_json(&cfg.group))?;
    println!("{}", serde_json::to_string(&verdict.to_json(&cfg.group))?);

    if cfg.group.is_abelian() || cfg.closure_radius.is_some() {
        let radius = cfg.closure_radius.unwrap_or(n_max);
        let gens = difference_generators(&cfg.group, &atoms)?;
        let closure = generate_subgroup(&cfg.group, &gens, radius)?;
        let mut w = create(&cfg.out, "closure.txt")?;
        writeln!(w, "# subgroup generated by A-A, word length <= {radius}, complete = {}", closure.complete)?;
        for line in closure.listing(&cfg.group) {
            writeln!(w, "{line}")?;
        }
        w.flush()?;
        println!(
            "x {} the difference subgroup listing ({} elements, complete = {})",
            if closure.contains(&x) { "is in" } else { "is not in" },
            closure.elements.len(),
            closure.complete
        );
    }
    Ok(())
}

fn is_free2_uniform(cfg: &ExperimentConfig) -> Result<bool> {
    let f2 = GroupCtx::free(2)?;
    if cfg.group != f2 {
        return Ok(false);
    }
    let gens: Vec<_> = ["a", "A", "b", "B"]
        .iter()
        .map(|s| f2.parse_element(s))
        .collect::<Result<_, _>>()?;
    let uniform = AtomicMeasure::<Rational>::uniform(f2, &gens)?;
    Ok(parse_mu::<Rational>(cfg)? == uniform)
}

/// The free-group experiment: Monte Carlo first-letter probabilities of `S`
/// and `S^{ab}`, the exact total variation curve and the membership verdict.
pub fn demo_freegroup(cfg: &ExperimentConfig) -> Result<()> {
    if !is_free2_uniform(cfg)? {
        bail!("demo-freegroup needs group F2 with the uniform law on a, A, b, B (use --preset free2)");
    }
    let x = parse_x(cfg)?;
    if cfg.group.format_element(&x) != "ab" {
        bail!("demo-freegroup compares the walks started at e and at ab; got x = {}", cfg.x);
    }
    create_out(&cfg.out)?;
    let horizon = cfg.horizon.unwrap_or(DEFAULT_SEPARATION_HORIZON);
    let runs = cfg.runs.unwrap_or(DEFAULT_DEMO_RUNS);
    let report = free_group_tail_separation(horizon, runs, cfg.seed);
    if let Some(w) = &report.warning {
        eprintln!("warning: {w}");
    }
    write_json(&cfg.out, "separation.json", &serde_json::to_value(&report)?)?;

    let n_max = cfg.n_max.unwrap_or(DEFAULT_DEMO_TV_N_MAX);
    let tv_cfg = ExperimentConfig {
        n_max: Some(n_max),
        ..cfg.clone()
    };
    let outcome = tv_outcome::<f64>(&tv_cfg, &x, n_max, AtomGuard::from_env())?;
    let rows: Vec<CurveRow> = curve_points(&outcome.values)
        .into_iter()
        .map(|p| CurveRow {
            n: p.n,
            tv: Some(p.tv),
            ..Default::default()
        })
        .collect();
    let mut w = csv_writer(cfg, "tv.csv")?;
    write_curve_csv(&mut w, &rows)?;
    w.flush()?;
    write_json(&cfg.out, "verdict.json", &outcome.verdict.to_json(&cfg.group))?;

    let min_tv = outcome.values.iter().copied().fold(f64::INFINITY, f64::min);
    println!(
        "P(first letter of S_{horizon} = b) = {:.4} [{:.4}, {:.4}] (target {:.4})",
        report.s_first_b.estimate, report.s_first_b.ci_low, report.s_first_b.ci_high, report.target_s
    );
    println!(
        "P(first letter of S^ab_{horizon} = b) = {:.4} [{:.4}, {:.4}] (target {:.4})",
        report.sab_first_b.estimate, report.sab_first_b.ci_low, report.sab_first_b.ci_high, report.target_sab
    );
    println!("min tv_n over n <= {n_max}: {min_tv:.4}; fit refused: in_Gs is unknown for x = ab");
    Ok(())
}
