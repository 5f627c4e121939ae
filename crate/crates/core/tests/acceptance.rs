//! Acceptance suite. Every test writes one `PASS`/`FAIL` line for its
//! criterion to stderr before asserting it; run with `--test-threads=1` to
//! see the lines in order.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use dirac_core::bounds::{run_battery, BatteryConfig, REFINEMENT_TOL};
use dirac_core::decomposition::{reconstruction_sweep, unconditionality_test};
use dirac_core::operator::bc_quadruple;
use dirac_core::projections::{default_global_nodes, deviation_report_with, localization_counts};
use dirac_core::resolvent::{circle_maxima, find_threshold_n, CIRCLE_SAMPLES};
use dirac_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const NODES: usize = 64;
const RADIUS: f64 = 0.5;

fn line(id: usize, title: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr().lock(), "[criterion {id:2}] {verdict} {title}: {detail}");
}

fn random_potential(seed: u64) -> PotentialSpec {
    PotentialSpec::random_trig(&mut ChaCha8Rng::seed_from_u64(seed), 8, 1.0)
}

fn engine(spec: &PotentialSpec, bc: BoundaryCondition, k: usize) -> ProjectionEngine {
    ProjectionEngine::new(build(spec, bc, k)).expect("engine")
}

fn params(n: i64) -> DecompositionParams {
    DecompositionParams {
        n,
        radius: RADIUS,
        nodes: NODES,
        global_nodes: default_global_nodes(n + 1),
    }
}

#[test]
fn free_operator_projections_are_exact() {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut rank_failures = Vec::new();
    for bc in BoundaryCondition::ALL {
        let eng = ProjectionEngine::new(build_free(bc, 64)).unwrap();
        for n in bc.spectral_lattice().range(-32, 32) {
            let p = eng.disc_projection(n, RADIUS, NODES).unwrap();
            let p0 = free_projection(bc, n, 64).unwrap();
            worst = worst.max(deviation(&p, &p0).unwrap());
            if p.rank != bc.free_multiplicity() {
                rank_failures.push((bc, n, p.rank));
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let pass = worst <= 1e-10 && rank_failures.is_empty() && elapsed < 30.0;
    line(
        1,
        "free-operator exactness",
        pass,
        &format!("max deviation {worst:.3e} (<= 1e-10), rank mismatches {rank_failures:?}, {elapsed:.1} s (< 30 s)"),
    );
    assert!(pass);
}

#[test]
fn constant_potential_matches_closed_form() {
    let k = 64;
    let ones = vec![Complex64::new(1.0, 0.0); 64];
    let spec = PotentialSpec::from_samples(&ones, &ones, 8).unwrap();
    let bc = BoundaryCondition::PeriodicPlus;
    let eng = engine(&spec, bc, k);
    let oracle: Vec<f64> = (-40i64..=40)
        .filter(|n| n % 2 == 0)
        .flat_map(|n| {
            let v = ((n * n + 1) as f64).sqrt();
            [v, -v]
        })
        .collect();
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for z in eng.eigenvalues().iter().filter(|z| z.norm() <= 16.0) {
        let d = oracle
            .iter()
            .map(|&v| (Complex64::new(v, 0.0) - z).norm())
            .fold(f64::INFINITY, f64::min);
        worst = worst.max(d);
        checked += 1;
    }
    let counts = localization_counts(eng.eigenvalues(), bc, RADIUS, 32);
    let bad: Vec<(i64, usize)> = counts
        .iter()
        .filter(|(&n, &c)| n.abs() >= 2 && c != 2)
        .map(|(&n, &c)| (n, c))
        .collect();
    let discs = counts.keys().filter(|n| n.abs() >= 2).count();
    let pass = worst <= 1e-8 && bad.is_empty() && discs == 32 && checked > 0;
    line(
        2,
        "constant-potential oracle",
        pass,
        &format!("{checked} eigenvalues, max error {worst:.3e} (<= 1e-8), {discs} discs, count mismatches {bad:?}"),
    );
    assert!(pass);
}

#[test]
fn deviations_decay_and_are_refinement_stable() {
    let mut worst_ratio: f64 = 0.0;
    let mut worst_change: f64 = 0.0;
    let mut details = Vec::new();
    for seed in 0..5 {
        let spec = random_potential(seed);
        for bc in BoundaryCondition::ALL {
            let coarse = deviation_report_with(&spec, &engine(&spec, bc, 64), None, RADIUS, NODES).unwrap();
            let n = coarse.n_used;
            let first = coarse.squared_sum(n, 16);
            let second = coarse.squared_sum(16, 32);
            let ratio = second / first;
            let fine = deviation_report_with(&spec, &engine(&spec, bc, 128), Some(n), RADIUS, NODES).unwrap();
            let fine_map = fine.per_n();
            let change = coarse
                .entries
                .iter()
                .map(|e| (e.deviation_hs - fine_map[&e.n]).abs())
                .fold(0.0, f64::max);
            worst_ratio = worst_ratio.max(ratio);
            worst_change = worst_change.max(change);
            details.push(format!("{bc}/{seed}: N={n} ratio={ratio:.3} change={change:.1e}"));
        }
    }
    let pass = worst_ratio <= 0.5 && worst_change <= 1e-6;
    line(
        3,
        "quadratic decay of deviations",
        pass,
        &format!("max tail ratio {worst_ratio:.3} (<= 0.5), max change K 64->128 {worst_change:.2e} (<= 1e-6)"),
    );
    for d in details {
        println!("    {d}");
    }
    assert!(pass);
}

#[test]
fn threshold_meets_resolvent_bound_and_is_sampling_stable() {
    let k = 64;
    let mut failures = Vec::new();
    let mut summary = Vec::new();
    for seed in 0..5 {
        let spec = random_potential(seed);
        for bc in BoundaryCondition::ALL {
            let n = find_threshold_n(&spec, bc, k, CIRCLE_SAMPLES).unwrap();
            let n2 = find_threshold_n(&spec, bc, k, 2 * CIRCLE_SAMPLES).unwrap();
            let outer_max = circle_maxima(&spec, bc, k, CIRCLE_SAMPLES)
                .into_iter()
                .filter(|&(m, _)| m.abs() > n)
                .map(|(_, v)| v)
                .fold(0.0, f64::max);
            if outer_max > 0.5 || n != n2 {
                failures.push(format!("{bc}/{seed}: N={n} N(2x)={n2} max={outer_max:.3}"));
            }
            summary.push(n);
        }
    }
    let pass = failures.is_empty();
    line(
        4,
        "resolvent threshold",
        pass,
        &format!("N values {summary:?}, failures {failures:?}"),
    );
    assert!(pass);
}

#[test]
fn quadrature_converges_geometrically() {
    let spec = random_potential(0);
    let bc = BoundaryCondition::Dirichlet;
    let eng = engine(&spec, bc, 64);
    let n = find_threshold_n(&spec, bc, 64, CIRCLE_SAMPLES).unwrap() + 1;
    let p = |nodes| eng.raw_quadrature(&ContourSpec::disc(n, RADIUS, nodes).unwrap());
    let (p16, p32, p64) = (p(16), p(32), p(64));
    let d1 = (&p16 - &p32).norm();
    let d2 = (&p32 - &p64).norm();
    let pass = d2 <= 0.1 * d1;
    line(
        5,
        "quadrature convergence",
        pass,
        &format!("disc {n}: |P16-P32| = {d1:.3e}, |P32-P64| = {d2:.3e} (ratio <= 0.1)"),
    );
    assert!(pass);
}

#[test]
fn projections_form_a_disjoint_family() {
    let mut idem: f64 = 0.0;
    let mut cross: f64 = 0.0;
    let mut identity: f64 = 0.0;
    for bc in BoundaryCondition::ALL {
        let spec = random_potential(0);
        let eng = engine(&spec, bc, 64);
        let n = select_cutoff(&spec, &eng, 64, RADIUS).unwrap().n;
        let s = eng.global_projection(n + 1, default_global_nodes(n + 1)).unwrap();
        idem = idem.max(s.idempotency_residual);
        let mut discs = BTreeMap::new();
        for m in bc.shell(n, 32) {
            let p = eng.disc_projection(m, RADIUS, NODES).unwrap();
            idem = idem.max(p.idempotency_residual);
            discs.insert(m, p.matrix);
        }
        for (&a, pa) in discs.iter().filter(|(m, _)| m.abs() <= 16) {
            cross = cross.max((pa * &s.matrix).norm()).max((&s.matrix * pa).norm());
            for (&b, pb) in discs.iter().filter(|(m, _)| m.abs() <= 16) {
                if a != b {
                    cross = cross.max((pa * pb).norm());
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..3 {
            let f = decomposition::FunctionVector::random(&eng.op.basis, 16, &mut rng);
            let mut acc = &s.matrix * &f.coeffs;
            for p in discs.values() {
                acc += p * &f.coeffs;
            }
            identity = identity.max((&f.coeffs - acc).norm() / f.norm());
        }
    }
    let pass = idem <= 1e-6 && cross <= 1e-6 && identity <= 1e-5;
    line(
        6,
        "projection algebra",
        pass,
        &format!("idempotency {idem:.2e} (<= 1e-6), products {cross:.2e} (<= 1e-6), identity {identity:.2e} (<= 1e-5)"),
    );
    assert!(pass);
}

#[test]
fn decomposition_reconstructs_band_limited_and_eigen_inputs() {
    let mut monotone = true;
    let mut worst_final: f64 = 0.0;
    let mut worst_eigen: f64 = 0.0;
    for seed in 0..5 {
        let spec = random_potential(seed);
        for bc in BoundaryCondition::ALL {
            let eng = engine(&spec, bc, 64);
            let n = select_cutoff(&spec, &eng, 64, RADIUS).unwrap().n;
            let f = FunctionVector::random(&eng.op.basis, 8, &mut ChaCha8Rng::seed_from_u64(100 + seed));
            let sweep = reconstruction_sweep(&f, &eng, &params(n), 32).unwrap();
            monotone &= sweep.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12);
            worst_final = worst_final.max(sweep.last().unwrap().1);

            let e = eigen(&eng.op).unwrap();
            let n0 = bc.shell(n, 32)[2];
            let idx = e
                .values
                .iter()
                .position(|z| (z - n0 as f64).norm() < RADIUS)
                .expect("eigenvalue in disc");
            let v = e.vectors.column(idx).into_owned();
            let g = FunctionVector {
                basis: eng.op.basis.clone(),
                coeffs: &v / Complex64::new(v.norm(), 0.0),
            };
            let r = reconstruct(&g, &eng, &params(n), 32).unwrap();
            worst_eigen = worst_eigen.max(r.error);
        }
    }
    let pass = monotone && worst_final <= 1e-4 && worst_eigen <= 1e-6;
    line(
        7,
        "reconstruction",
        pass,
        &format!(
            "nonincreasing in M: {monotone}, max error at M=32 {worst_final:.2e} (<= 1e-4), eigenvectors {worst_eigen:.2e} (<= 1e-6)"
        ),
    );
    assert!(pass);
}

#[test]
fn reordered_partial_sums_stay_controlled() {
    let spec = random_potential(0);
    let bc = BoundaryCondition::PeriodicPlus;
    let eng = engine(&spec, bc, 64);
    let n = select_cutoff(&spec, &eng, 64, RADIUS).unwrap().n;
    let f = FunctionVector::random(&eng.op.basis, 8, &mut ChaCha8Rng::seed_from_u64(100));
    let mut spread: f64 = 0.0;
    let mut constants = Vec::new();
    for seed in 0..10 {
        let report = unconditionality_test(&f, &eng, &params(n), 32, 10, seed).unwrap();
        spread = spread.max(report.max_terminal_spread);
        constants.push(report.excursion_constant);
    }
    let mean = constants.iter().sum::<f64>() / constants.len() as f64;
    let deviation = constants
        .iter()
        .map(|c| (c - mean).abs() / mean)
        .fold(0.0, f64::max);
    let pass = spread <= 1e-10 && mean > 0.0 && deviation <= 0.5;
    line(
        8,
        "unconditional convergence",
        pass,
        &format!("terminal spread {spread:.2e} (<= 1e-10), excursion constant mean {mean:.3}, max relative deviation {deviation:.3} (<= 0.5)"),
    );
    assert!(pass);
}

#[test]
fn estimate_battery() {
    let report = run_battery(&BatteryConfig::default()).unwrap();
    let t1 = report.family("t1").unwrap();
    let t1_pass = t1.passed && t1.checks == 1000;
    let mut unstable = Vec::new();
    for f in &report.families {
        if let Some(change) = f.refinement_change {
            if change > REFINEMENT_TOL {
                unstable.push(format!("{} {:.3}", f.family, change));
            }
        }
    }
    let symmetric = report.b2_b3_gap <= 1e-12;
    let b1_tail = report.b1_zero_tail_gap <= 1e-12;
    let pass = t1_pass && unstable.is_empty() && symmetric && b1_tail;
    line(
        9,
        "estimate battery",
        pass,
        &format!(
            "t1 max ratio {:.4} over {} cases (< 1): {t1_pass}; unstable constants {unstable:?}; B2(1)-B3(1) gap {:.1e} (<= 1e-12); B1(0) - 4 E_N(r)^2 gap {:.3e} (<= 1e-12), closed form 16 sum r(2n)^2 gap {:.1e}",
            t1.max_ratio, t1.checks, report.b2_b3_gap, report.b1_zero_tail_gap, report.b1_zero_closed_form_gap
        ),
    );
    for f in &report.families {
        println!(
            "    {:12} max ratio {:.4e} refined {:?} change {:?}",
            f.family, f.max_ratio, f.max_ratio_refined, f.refinement_change
        );
    }
    assert!(pass);
}

#[test]
fn boundary_conditions_classify() {
    let classify = |q: [Complex64; 4]| classify_bc(q[0], q[1], q[2], q[3]);
    let plus = classify(bc_quadruple(BoundaryCondition::PeriodicPlus));
    let minus = classify(bc_quadruple(BoundaryCondition::PeriodicMinus));
    let dir = classify(bc_quadruple(BoundaryCondition::Dirichlet));
    let named = [plus, minus]
        .iter()
        .all(|c| c.regular && !c.strictly_regular && c.discriminant.norm() == 0.0)
        && dir.strictly_regular;

    let mut quadruples = Vec::new();
    let grid = [-2.0, -1.0, 0.0, 1.0, 2.0];
    for &a in &grid {
        for &b in &grid {
            for &c in &grid {
                for &d in &grid {
                    quadruples.push([a, b, c, d].map(|x| Complex64::new(x, 0.0)));
                }
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..20_000 {
        quadruples.push(std::array::from_fn(|_| {
            Complex64::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0))
        }));
    }
    let mut violations = 0;
    let mut strict = 0;
    for q in &quadruples {
        let c = classify(*q);
        if c.strictly_regular {
            strict += 1;
            if (c.roots[0] - c.roots[1]).norm() <= 1e-10 {
                violations += 1;
            }
        }
    }
    let pass = named && violations == 0 && strict > 0;
    line(
        10,
        "boundary-condition classification",
        pass,
        &format!("named quadruples ok: {named}; {strict} strictly regular of {}, {violations} with coincident roots", quadruples.len()),
    );
    assert!(pass);
}
