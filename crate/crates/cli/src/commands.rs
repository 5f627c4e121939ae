use std::collections::BTreeMap;

use dirac_core::bounds::{check_lemma2_r, check_prop1_r};
use dirac_core::projections::default_global_nodes;
use dirac_core::resolvent::circle_maxima;
use dirac_core::{
    build, check_t_lemma1, check_t_lemma2, classify_bc, deviation_report_with, eigen, eigenvalues, find_threshold_n,
    localization_counts, reconstruction_sweep, run_battery, select_cutoff, unconditionality_test, BcClassification,
    BoundCheck, BoundaryCondition, Complex64, DecompositionParams, FunctionVector, Lattice, PotentialSpec,
    ProjectionEngine,
};
use serde::Serialize;
use serde_json::json;

use crate::config::{RunConfig, DEFAULT_FUNCTION_MAX_N};
use crate::error::{CliError, CliResult};
use crate::report::{float, write_json, OutputDir, Table, Timer};

/// Checks that hold with no constant: every ratio must stay below one.
const HARD_FAMILIES: [&str; 3] = ["t1", "t0", "t00"];

/// Tolerance for "nonincreasing" on reconstruction sweeps.
const MONOTONE_SLACK: f64 = 1e-12;

struct Run {
    config: RunConfig,
    spec: PotentialSpec,
    out: OutputDir,
    timer: Timer,
    files: Vec<&'static str>,
}

impl Run {
    fn prepare(config: RunConfig) -> CliResult<Self> {
        config.validate()?;
        config.function.validate()?;
        let mut timer = Timer::start();
        let spec = config.potential.resolve(&mut config.rng(0))?;
        let out = OutputDir::create(&config.outputs)?;
        timer.lap("potential");
        Ok(Run {
            config,
            spec,
            out,
            timer,
            files: Vec::new(),
        })
    }

    fn table(&mut self, name: &'static str, table: &Table) -> CliResult<()> {
        table.write(&self.out.path(name))?;
        self.files.push(name);
        Ok(())
    }

    fn summary<T: Serialize>(&mut self, value: &T) -> CliResult<()> {
        write_json(&self.out.path("summary.json"), value)?;
        self.files.push("summary.json");
        Ok(())
    }

    fn finish(mut self, command: &str) -> CliResult<()> {
        self.files.push("run.json");
        self.out.write_metadata(command, &self.config, &self.timer, &self.files)
    }

    fn engine(&mut self) -> CliResult<ProjectionEngine> {
        let engine = ProjectionEngine::new(build(&self.spec, self.config.bc, self.config.k))?;
        self.timer.lap("factorization");
        Ok(engine)
    }
}

/// Lattice point whose disc of the given radius holds `z`.
fn disc_of(z: Complex64, lattice: Lattice, radius: f64) -> Option<i64> {
    let guess = z.re.round() as i64;
    (guess - 1..=guess + 1)
        .filter(|&n| lattice.contains(n))
        .find(|&n| (z - n as f64).norm() <= radius)
}

pub fn spectrum(config: RunConfig, export_matrix: bool) -> CliResult<()> {
    let mut run = Run::prepare(config)?;
    let (bc, k, radius) = (run.config.bc, run.config.k, run.config.radius);
    let op = build(&run.spec, bc, k);
    let values = eigenvalues(&op)?;
    run.timer.lap("eigenvalues");

    let mut table = Table::new(&["index", "re", "im", "disc"]);
    let mut unassigned = 0usize;
    for (i, z) in values.iter().enumerate() {
        let disc = disc_of(*z, bc.spectral_lattice(), radius);
        unassigned += usize::from(disc.is_none());
        table.push(vec![
            i.to_string(),
            float(z.re),
            float(z.im),
            disc.map(|n| n.to_string()).unwrap_or_default(),
        ]);
    }
    run.table("eigenvalues.csv", &table)?;

    let counts = localization_counts(&values, bc, radius, k as i64);
    let expected = bc.free_multiplicity();
    let mut table = Table::new(&["n", "count", "expected"]);
    for (&n, &count) in &counts {
        table.push(vec![n.to_string(), count.to_string(), expected.to_string()]);
    }
    run.table("localization.csv", &table)?;
    let window = run.config.window();
    let mismatched: Vec<i64> = counts
        .iter()
        .filter(|&(&n, &c)| n.abs() <= window && c != expected)
        .map(|(&n, _)| n)
        .collect();

    if export_matrix {
        let mut table = Table::new(&["row", "col", "re", "im"]);
        for j in 0..op.dim() {
            for i in 0..op.dim() {
                let z = op.entries[(i, j)];
                if z != Complex64::default() {
                    table.push(vec![i.to_string(), j.to_string(), float(z.re), float(z.im)]);
                }
            }
        }
        run.table("matrix.csv", &table)?;
    }

    let max_imag = values.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    run.summary(&json!({
        "bc": bc,
        "K": k,
        "dimension": op.dim(),
        "eigenvalues": values.len(),
        "radius": radius,
        "unassigned_eigenvalues": unassigned,
        "trusted_window": window,
        "mismatched_discs_in_window": mismatched,
        "max_abs_imag": max_imag,
    }))?;
    run.finish("spectrum")
}

pub fn deviations(config: RunConfig) -> CliResult<()> {
    let mut run = Run::prepare(config)?;
    let engine = run.engine()?;
    let (radius, nodes) = (run.config.radius, run.config.nodes);
    let report = deviation_report_with(&run.spec, &engine, run.config.n, radius, nodes)?;
    run.timer.lap("projections");

    let expected = run.config.bc.free_multiplicity();
    let mut table = Table::new(&["n", "rank", "expected_rank", "deviation_hs", "cumulative"]);
    for e in &report.entries {
        table.push(vec![
            e.n.to_string(),
            e.rank.to_string(),
            expected.to_string(),
            float(e.deviation_hs),
            float(e.cumulative),
        ]);
    }
    run.table("deviations.csv", &table)?;

    let window = run.config.window();
    let middle = window / 2;
    run.summary(&json!({
        "bc": report.bc,
        "K": report.k_used,
        "radius": radius,
        "nodes": nodes,
        "cutoff": report.cutoff,
        "discs": report.entries.len(),
        "rank_mismatches": report.entries.iter().filter(|e| e.rank != expected).count(),
        "max_deviation_hs": report.entries.iter().map(|e| e.deviation_hs).fold(0.0, f64::max),
        "squared_sum_total": report.entries.last().map_or(0.0, |e| e.cumulative),
        "squared_sum_first_half": report.squared_sum(report.n_used, middle),
        "squared_sum_second_half": report.squared_sum(middle, window),
    }))?;
    run.finish("deviations")
}

fn input_vector(run: &Run, engine: &ProjectionEngine) -> CliResult<FunctionVector> {
    let basis = &engine.op.basis;
    let input = &run.config.function;
    if let Some(rows) = &input.coefficients {
        let entries = rows.iter().map(|&(n, ch, re, im)| (n, ch, Complex64::new(re, im)));
        return FunctionVector::from_coefficients(basis, entries).map_err(|e| CliError::Config(format!("function: {e}")));
    }
    if let Some(target) = input.eigenvector {
        let eig = eigen(&engine.op)?;
        let nearest = (0..eig.values.len())
            .min_by(|&a, &b| {
                let da = (eig.values[a] - target as f64).norm();
                let db = (eig.values[b] - target as f64).norm();
                da.total_cmp(&db).then(a.cmp(&b))
            })
            .expect("nonempty spectrum");
        let v = eig.vectors.column(nearest).into_owned();
        let norm = v.norm();
        return Ok(FunctionVector {
            basis: basis.clone(),
            coeffs: v / Complex64::new(norm, 0.0),
        });
    }
    let max_n = input.random_max_n.unwrap_or(DEFAULT_FUNCTION_MAX_N);
    if max_n < 0 {
        return Err(CliError::Config(format!("function: random_max_n must be nonnegative, got {max_n}")));
    }
    Ok(FunctionVector::random(basis, max_n, &mut run.config.rng(1)))
}

pub fn reconstruct(config: RunConfig) -> CliResult<()> {
    let mut run = Run::prepare(config)?;
    let engine = run.engine()?;
    let f = input_vector(&run, &engine)?;
    let (radius, nodes, window) = (run.config.radius, run.config.nodes, run.config.window());
    let cutoff = match run.config.n {
        Some(n) => n,
        None => select_cutoff(&run.spec, &engine, run.config.k, radius)?.n,
    };
    let params = DecompositionParams {
        n: cutoff,
        radius,
        nodes,
        global_nodes: default_global_nodes(cutoff + 1),
    };
    let sweep = reconstruction_sweep(&f, &engine, &params, window)?;
    run.timer.lap("sweep");
    let report = unconditionality_test(&f, &engine, &params, window, run.config.trials, run.config.seed)?;
    run.timer.lap("reorderings");

    let mut table = Table::new(&["M", "error"]);
    for &(m, e) in &sweep {
        table.push(vec![m.to_string(), float(e)]);
    }
    run.table("reconstruction.csv", &table)?;
    let mut table = Table::new(&["trial", "terminal_error", "max_excursion"]);
    for t in &report.per_trial {
        table.push(vec![t.trial.to_string(), float(t.terminal_error), float(t.max_excursion)]);
    }
    run.table("trials.csv", &table)?;

    let nonincreasing = sweep.windows(2).all(|w| w[1].1 <= w[0].1 + MONOTONE_SLACK * f.norm());
    run.summary(&json!({
        "params": params,
        "function_norm": f.norm(),
        "final_error": sweep.last().map(|&(_, e)| e),
        "error_nonincreasing": nonincreasing,
        "unconditionality": report,
    }))?;
    run.finish("reconstruct")
}

fn tag(check: BoundCheck, source: &str) -> (String, BoundCheck) {
    (source.to_string(), check)
}

fn is_violation(check: &BoundCheck) -> bool {
    HARD_FAMILIES.contains(&check.name.as_str()) && !(check.ratio < 1.0 || check.lhs == 0.0)
}

/// Corrupts the first hard check so that its ratio exceeds one.
fn inject_violation(checks: &mut [(String, BoundCheck)]) -> Option<String> {
    let (_, c) = checks.iter_mut().find(|(_, c)| c.name == "t1")?;
    c.lhs = 2.0 * c.rhs_without_constant + 1.0;
    c.ratio = if c.rhs_without_constant > 0.0 {
        c.lhs / c.rhs_without_constant
    } else {
        f64::INFINITY
    };
    Some(c.name.clone())
}

fn potential_checks(run: &Run) -> CliResult<Vec<BoundCheck>> {
    let bc = run.config.bc;
    let r = run.spec.r_sequence(bc);
    let window = run.config.k as i64;
    let samples = run.config.battery.samples;
    let cutoffs = match run.config.n {
        Some(n) => vec![n],
        None => run.config.battery.cutoffs.clone(),
    };
    let mut checks = Vec::new();
    for n in bc.shell(0, window / 2) {
        let (t1, t2) = check_t_lemma1(&r, n, window)?;
        checks.push(t1);
        checks.push(t2);
    }
    for n in bc.shell(7, window / 2) {
        checks.push(check_lemma2_r(&r, n, window as usize, samples)?);
    }
    for &cutoff in &cutoffs {
        checks.extend(check_t_lemma2(&r, cutoff, window)?);
        for s in [0, 1] {
            checks.extend(check_prop1_r(&r, s, cutoff, window, samples)?.into_iter().map(|mut c| {
                c.name = format!("prop1.{}", c.name);
                c
            }));
        }
    }
    Ok(checks)
}

#[derive(Debug, Serialize)]
struct FamilyMax {
    family: String,
    checks: usize,
    max_ratio: f64,
    hard: bool,
    violations: usize,
}

fn family_maxima(checks: &[(String, BoundCheck)], source: &str) -> Vec<FamilyMax> {
    let mut out: BTreeMap<&str, FamilyMax> = BTreeMap::new();
    for (_, c) in checks.iter().filter(|(s, _)| s == source) {
        let entry = out.entry(c.name.as_str()).or_insert_with(|| FamilyMax {
            family: c.name.clone(),
            checks: 0,
            max_ratio: 0.0,
            hard: HARD_FAMILIES.contains(&c.name.as_str()),
            violations: 0,
        });
        entry.checks += 1;
        entry.max_ratio = entry.max_ratio.max(c.ratio);
        entry.violations += usize::from(is_violation(c));
    }
    out.into_values().collect()
}

fn parameter_string(c: &BoundCheck) -> String {
    c.parameters
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(";")
}

pub fn verify_bounds(config: RunConfig, inject: bool) -> CliResult<()> {
    let mut run = Run::prepare(config)?;
    let battery = run_battery(&run.config.battery)?;
    run.timer.lap("battery");
    let own = potential_checks(&run)?;
    run.timer.lap("potential_checks");

    let mut checks: Vec<(String, BoundCheck)> = battery
        .checks
        .iter()
        .cloned()
        .map(|c| tag(c, "battery"))
        .chain(own.into_iter().map(|c| tag(c, "potential")))
        .collect();
    let injected = if inject { inject_violation(&mut checks) } else { None };

    let mut table = Table::new(&["source", "check", "parameters", "lhs", "rhs", "ratio"]);
    for (source, c) in &checks {
        table.push(vec![
            source.clone(),
            c.name.clone(),
            parameter_string(c),
            float(c.lhs),
            float(c.rhs_without_constant),
            float(c.ratio),
        ]);
    }
    run.table("bounds.csv", &table)?;

    let violations = checks.iter().filter(|(_, c)| is_violation(c)).count();
    run.summary(&json!({
        "bc": run.config.bc,
        "battery_config": battery.config,
        "battery_families": battery.families,
        "battery_family_maxima": family_maxima(&checks, "battery"),
        "potential_family_maxima": family_maxima(&checks, "potential"),
        "b2_b3_gap": battery.b2_b3_gap,
        "b1_zero_closed_form_gap": battery.b1_zero_closed_form_gap,
        "b1_zero_tail_gap": battery.b1_zero_tail_gap,
        "constants_stable": battery.constants_stable(),
        "hard_violations": violations,
        "injected_violation": injected,
    }))?;
    run.finish("verify-bounds")?;
    if violations > 0 {
        return Err(CliError::Violation(format!(
            "{violations} constant-free inequality check(s) exceed ratio 1; see bounds.csv"
        )));
    }
    Ok(())
}

pub fn threshold(config: RunConfig) -> CliResult<()> {
    let mut run = Run::prepare(config)?;
    let (bc, k, samples) = (run.config.bc, run.config.k, run.config.samples);
    let base = circle_maxima(&run.spec, bc, k, samples);
    let doubled = circle_maxima(&run.spec, bc, k, 2 * samples);
    run.timer.lap("circles");

    let mut table = Table::new(&["n", "max_kvk_hs", "max_kvk_hs_doubled_samples"]);
    for (&(n, a), &(_, b)) in base.iter().zip(&doubled) {
        table.push(vec![n.to_string(), float(a), float(b)]);
    }
    run.table("threshold.csv", &table)?;

    let found = find_threshold_n(&run.spec, bc, k, samples);
    let found_doubled = find_threshold_n(&run.spec, bc, k, 2 * samples);
    run.summary(&json!({
        "bc": bc,
        "K": k,
        "samples": samples,
        "bound": 0.5,
        "N": found.as_ref().ok(),
        "N_doubled_samples": found_doubled.as_ref().ok(),
        "stable_under_doubling": found.as_ref().ok() == found_doubled.as_ref().ok(),
        "error": found.as_ref().err().map(|e| e.to_string()),
    }))?;
    run.finish("threshold")?;
    found?;
    Ok(())
}

pub fn classify(
    bc: Option<BoundaryCondition>,
    coefficients: [Option<Complex64>; 4],
) -> CliResult<BcClassification> {
    let [a, b, c, d] = match (bc, coefficients) {
        (Some(bc), [None, None, None, None]) => dirac_core::operator::bc_quadruple(bc),
        (None, [Some(a), Some(b), Some(c), Some(d)]) => [a, b, c, d],
        _ => {
            return Err(CliError::Config(
                "classify-bc needs either --bc or all four of --a --b --c --d".into(),
            ))
        }
    };
    Ok(classify_bc(a, b, c, d))
}

/// `re` or `re,im`.
pub fn parse_complex(text: &str) -> Result<Complex64, String> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    let num = |s: &str| s.parse::<f64>().map_err(|e| format!("'{s}': {e}"));
    let z = match parts.as_slice() {
        [re] => Complex64::new(num(re)?, 0.0),
        [re, im] => Complex64::new(num(re)?, num(im)?),
        _ => return Err(format!("expected RE or RE,IM, got '{text}'")),
    };
    if z.re.is_finite() && z.im.is_finite() {
        Ok(z)
    } else {
        Err(format!("non-finite value '{text}'"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disc_assignment() {
        let z = Complex64::new(2.1, 0.2);
        assert_eq!(disc_of(z, Lattice::Even, 0.5), Some(2));
        assert_eq!(disc_of(z, Lattice::Odd, 0.5), None);
        assert_eq!(disc_of(Complex64::new(-0.9, 0.0), Lattice::All, 0.25), Some(-1));
    }

    #[test]
    fn complex_arguments() {
        assert_eq!(parse_complex("1.5").unwrap(), Complex64::new(1.5, 0.0));
        assert_eq!(parse_complex("-1, 2").unwrap(), Complex64::new(-1.0, 2.0));
        assert!(parse_complex("1,2,3").is_err());
        assert!(parse_complex("x").is_err());
        assert!(parse_complex("nan").is_err());
    }

    #[test]
    fn injection_breaks_a_hard_check() {
        let mut checks = vec![tag(BoundCheck::new("t1", 0.5, 1.0, &[]), "battery")];
        assert!(!is_violation(&checks[0].1));
        assert_eq!(inject_violation(&mut checks).as_deref(), Some("t1"));
        assert!(is_violation(&checks[0].1));
    }

    #[test]
    fn classification_sources() {
        let per = classify(Some(BoundaryCondition::PeriodicPlus), [None; 4]).unwrap();
        assert!(per.regular && !per.strictly_regular);
        let one = Some(Complex64::new(1.0, 0.0));
        assert!(!classify(None, [one, one, one, one]).unwrap().regular);
        assert!(classify(None, [one, None, one, one]).is_err());
    }
}
