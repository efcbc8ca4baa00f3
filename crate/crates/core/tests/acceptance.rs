//! Acceptance checks.
//!
//! Every test writes one `PASS`/`FAIL` line with the measured quantity and
//! its pinned tolerance to stderr (bypassing the test harness capture), then
//! asserts. Tolerances live in the constants below and are not adjusted to
//! make a check pass.

mod common;

use std::io::Write;
use std::sync::OnceLock;
use std::time::Instant;

use common::*;
use nonlocal_work::model::{CMatrix, ModelSpec, Partition, Protocol, Reservoir, C64};
use nonlocal_work::oracle::{fock_build, fock_globals, fock_partitioned, grand_density, two_level_closed_form};
use nonlocal_work::partition_thermo::{subsystem_state, WeightTable};
use nonlocal_work::runner::{run_lever_scan, run_path_dependence, run_protocol, run_sweep, SweepResult};
use nonlocal_work::spectral::{eigh, max_abs, prob_rates, prob_weights, SpectralFrame};
use nonlocal_work::thermo::global_state;
use nonlocal_work::work::{commutator_flow, perturbative_eta};
use rand::Rng;

const SUM_RULE_TOL: f64 = 1e-11;
const SUM_RULE_RUNTIME_S: f64 = 1.0;

const FIRST_LAW_TOL: f64 = 1e-8;
const FIRST_LAW_GRID: usize = 1 << 11;
const FIRST_LAW_MUS: [f64; 5] = [-2.0, -1.4, 0.0, 1.0, 2.0];

const MU_SWEEP_STEP: f64 = 0.05;
const MU_SWEEP_GRID: usize = 1 << 11;
const W1_EMPTY_TOL: f64 = 0.05;
const W1_SATURATION: f64 = 2.0;
const W1_SATURATION_TOL: f64 = 0.05;
const W1_SATURATION_MU: f64 = 1.4;
const DN1_NEGATIVE_BELOW: f64 = -1.4;
const DN1_POSITIVE_ABOVE: f64 = 1.1;
const DN1_LOCATION_TOL: f64 = 0.1;

const LOCAL_POWER_TOL: f64 = 1e-12;
const LOCAL_MIN_WORK: f64 = 0.01;
// driven e1 range half-width (0.5) plus the hopping w = 1: the hybridization window
const LOCAL_PEAK_WINDOW: f64 = 1.5;
const LOCAL_GRID: usize = 1 << 11;

const PATH_WORK_TOL: f64 = 1e-6;
const PATH_POWER_MIN_DIFF: f64 = 0.01;
const PATH_SPLIT_TOL: f64 = 1e-8;
const PATH_GRID: usize = 1 << 11;

const LEVER_GRID: usize = 1 << 14;
const LEVER_T: f64 = 1e-4;
const LEVER_TWO_LEVEL_RANGE: (f64, f64) = (1.90, 2.02);
const LEVER_FORMULA_TOL: f64 = 0.05;
const LEVER_WEAK_COUPLING: f64 = 0.05;
const LEVER_LATTICE_RANGE: (f64, f64) = (1.80, 2.05);

const ORACLE_TOL: f64 = 1e-10;
const ORACLE_RUNTIME_S: f64 = 5.0;

const FD_STEP: f64 = 1e-5;
const FD_REL_TOL: f64 = 1e-6;
const FD_MIN_GAP: f64 = 1e-3;

const COMMUTATOR_TOL: f64 = 1e-12;
const CLOSED_FORM_TOL: f64 = 1e-12;

fn verdict(name: &str, pass: bool, detail: &str) {
    let line = format!("[{}] {name}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "{name}: {detail}");
}

#[test]
fn sum_rule_and_nonlocal_conservation_pointwise() {
    let start = Instant::now();
    let runs = [
        ("protocol 1", two_level(protocol_one(0.0), 0.2, 0.0, 1 << 11)),
        ("protocol 2", two_level(protocol_two(1.0, 0.1), 0.2, 0.0, 1 << 11)),
        ("2x2 lattice", lattice(Protocol::linear(lattice_point(-1.0), lattice_point(1.0)).unwrap(), 0.2, 0.0, 1 << 11)),
    ];
    let mut worst_sum: f64 = 0.0;
    let mut worst_nonlocal: f64 = 0.0;
    let mut points = 0;
    for (_, exp) in &runs {
        let r = run_protocol(exp).unwrap();
        for p in &r.points {
            let w = &p.work;
            let scale_ext = w.external_power.abs().max(1.0);
            let scale = w
                .subsystems
                .iter()
                .map(|s| s.work_rate.abs().max(s.power.abs()).max(s.nonlocal_rate.abs()))
                .fold(scale_ext, f64::max);
            let ws: f64 = w.subsystems.iter().map(|s| s.work_rate).sum();
            worst_sum = worst_sum.max((w.external_power - ws).abs() / scale_ext);
            worst_nonlocal = worst_nonlocal.max(w.nonlocal_total().abs() / scale);
            points += 1;
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let pass = worst_sum <= SUM_RULE_TOL && worst_nonlocal <= SUM_RULE_TOL && elapsed < SUM_RULE_RUNTIME_S;
    verdict(
        "sum rule pointwise",
        pass,
        &format!(
            "{points} points, max scaled sum-rule residual {worst_sum:.2e}, max scaled sum of nonlocal rates \
             {worst_nonlocal:.2e} (tol {SUM_RULE_TOL:e}), runtime {elapsed:.3} s (limit {SUM_RULE_RUNTIME_S} s)"
        ),
    );
}

#[test]
fn first_law_per_subsystem_integrated() {
    let mut worst: f64 = 0.0;
    for mu in FIRST_LAW_MUS {
        let exp = two_level(protocol_two(1.0, 0.1), 0.2, mu, FIRST_LAW_GRID);
        let r = run_protocol(&exp).unwrap();
        let t = r.summary.get("1").unwrap();
        worst = worst.max(t.first_law_residual(&exp.reservoir).abs());
    }
    verdict(
        "first law subsystem 1",
        worst <= FIRST_LAW_TOL,
        &format!("max |dU1 - T dS1 - mu dN1 - W1| over mu = {FIRST_LAW_MUS:?}: {worst:.2e} (tol {FIRST_LAW_TOL:e})"),
    );
}

fn mu_sweep() -> &'static SweepResult {
    static SWEEP: OnceLock<SweepResult> = OnceLock::new();
    SWEEP.get_or_init(|| {
        let exp = two_level(protocol_two(1.0, 0.1), 0.2, 0.0, MU_SWEEP_GRID);
        run_sweep(&exp, "mu", &stepped(-2.0, 2.0, MU_SWEEP_STEP)).unwrap()
    })
}

#[test]
fn subsystem_work_versus_mu() {
    let sw = mu_sweep();
    let w1: Vec<f64> = sw.summaries.iter().map(|s| s.get("1").unwrap().work.value).collect();
    let monotone = w1.windows(2).all(|p| p[1] >= p[0]);
    let empty = w1[0].abs();
    let saturated: Vec<(f64, f64)> =
        sw.values.iter().zip(&w1).filter(|(&mu, _)| mu > W1_SATURATION_MU).map(|(&mu, &w)| (mu, w)).collect();
    let worst_sat = saturated.iter().map(|(_, w)| (w - W1_SATURATION).abs()).fold(0.0, f64::max);
    let pass = monotone && empty <= W1_EMPTY_TOL && !saturated.is_empty() && worst_sat <= W1_SATURATION_TOL;
    verdict(
        "W1(mu) features",
        pass,
        &format!(
            "monotone increasing: {monotone}; |W1(-2)| = {empty:.4} (tol {W1_EMPTY_TOL}); \
             max |W1 - 2| for mu > {W1_SATURATION_MU}: {worst_sat:.4} over {} points (tol {W1_SATURATION_TOL})",
            saturated.len()
        ),
    );
}

#[test]
fn subsystem_occupancy_sign_structure() {
    let sw = mu_sweep();
    let dn1: Vec<(f64, f64)> =
        sw.values.iter().zip(&sw.summaries).map(|(&mu, s)| (mu, s.get("1").unwrap().delta_n.value)).collect();
    let negative_region: Vec<&(f64, f64)> =
        dn1.iter().filter(|(mu, _)| *mu < DN1_NEGATIVE_BELOW - DN1_LOCATION_TOL).collect();
    let positive_region: Vec<&(f64, f64)> =
        dn1.iter().filter(|(mu, _)| *mu > DN1_POSITIVE_ABOVE + DN1_LOCATION_TOL).collect();
    let negative_ok = negative_region.iter().all(|(_, d)| *d < 0.0);
    let positive_ok = positive_region.iter().all(|(_, d)| *d > 0.0);
    let max_upper = positive_region.iter().map(|(_, d)| *d).fold(f64::NEG_INFINITY, f64::max);
    let at = |m: f64| dn1.iter().find(|(mu, _)| (mu - m).abs() < 1e-9).map_or(f64::NAN, |p| p.1);
    verdict(
        "dN1(mu) sign structure",
        negative_ok && positive_ok,
        &format!(
            "dN1 < 0 for all mu < {:.1}: {negative_ok}; dN1 > 0 for all mu > {:.1}: {positive_ok} \
             (largest dN1 there {max_upper:.4e}; dN1(-1.8) = {:.4}, dN1(1.3) = {:.4}, dN1(2.0) = {:.3e})",
            DN1_NEGATIVE_BELOW - DN1_LOCATION_TOL,
            DN1_POSITIVE_ABOVE + DN1_LOCATION_TOL,
            at(-1.8),
            at(1.3),
            at(2.0)
        ),
    );
}

#[test]
fn nonlocal_work_under_local_driving() {
    let e2s = stepped(-3.0, 3.0, 0.1);
    let exp = two_level(protocol_one(0.0), 0.2, 0.0, LOCAL_GRID);
    let sw = run_sweep(&exp, "e2", &e2s).unwrap();
    let mut worst_power: f64 = 0.0;
    let mut peak = (0.0, 0.0);
    for (&e2, s) in sw.values.iter().zip(&sw.summaries) {
        let t2 = s.get("2").unwrap();
        worst_power = worst_power.max(t2.power.value.abs());
        if t2.work.value.abs() > peak.1 {
            peak = (e2, t2.work.value.abs());
        }
    }
    let pass = worst_power <= LOCAL_POWER_TOL && peak.1 >= LOCAL_MIN_WORK && peak.0.abs() <= LOCAL_PEAK_WINDOW;
    verdict(
        "nonlocal work on undriven site",
        pass,
        &format!(
            "max |int power_2| = {worst_power:.2e} (tol {LOCAL_POWER_TOL:e}); max |W2| = {:.4} at e2 = {:.1} \
             (need >= {LOCAL_MIN_WORK}, peak within +/-{LOCAL_PEAK_WINDOW} of 0)",
            peak.1, peak.0
        ),
    );
}

#[test]
fn path_independence_of_work() {
    let (a, b) = l_paths(0.4, 0.04);
    let cmp = run_path_dependence(&two_level(a, 0.2, 0.0, PATH_GRID), &two_level(b, 0.2, 0.0, PATH_GRID)).unwrap();
    let dw = cmp.find("1", "W").unwrap().difference();
    let dp = cmp.find("1", "power").unwrap().difference();
    let dn = cmp.find("1", "nonlocal").unwrap().difference();
    let pass = dw.abs() <= PATH_WORK_TOL && dp.abs() >= PATH_POWER_MIN_DIFF && (dp + dn).abs() <= PATH_SPLIT_TOL;
    verdict(
        "path (in)dependence",
        pass,
        &format!(
            "|dW1| = {:.2e} (tol {PATH_WORK_TOL:e}); |d int power_1| = {:.4} (need >= {PATH_POWER_MIN_DIFF}); \
             |d power + d nonlocal| = {:.2e} (tol {PATH_SPLIT_TOL:e})",
            dw.abs(),
            dp.abs(),
            (dp + dn).abs()
        ),
    );
}

fn two_level_lever(e1_from: f64, e1_to: f64) -> nonlocal_work::config::Experiment {
    let p = Protocol::linear(two_level_point(e1_from, -10.0, 1.0), two_level_point(e1_to, -10.0, 1.0)).unwrap();
    two_level(p, LEVER_T, 0.0, LEVER_GRID)
}

#[test]
fn lever_bound_two_level() {
    let scan = run_lever_scan(&two_level_lever(5.0, 0.1)).unwrap();
    let etas: Vec<f64> = scan.points.iter().filter_map(|p| p.eta).collect();
    let max = etas.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = LEVER_TWO_LEVEL_RANGE;
    let mut qualifying = 0;
    let mut worst: f64 = 0.0;
    for p in &scan.points {
        let w_over_delta = 1.0 / (p.value + 10.0);
        if let (Some(eta), true) = (p.eta, w_over_delta <= LEVER_WEAK_COUPLING) {
            qualifying += 1;
            worst = worst.max((eta - perturbative_eta(p.value, -10.0, 0.0).unwrap()).abs());
        }
    }
    let pass = (lo..=hi).contains(&max) && etas.iter().all(|&e| e <= hi) && worst <= LEVER_FORMULA_TOL;
    verdict(
        "lever two-level",
        pass,
        &format!(
            "max eta = {max:.5} (need [{lo}, {hi}], never above {hi}); {} undefined points; \
             formula deviation {worst:.2e} over {qualifying} points with w/delta <= {LEVER_WEAK_COUPLING} \
             (tol {LEVER_FORMULA_TOL})",
            scan.points.len() - etas.len()
        ),
    );
}

#[test]
fn lever_formula_in_weak_coupling_regime() {
    // e1 from 40 to 10 keeps w/delta <= 0.05 on the whole scan
    let scan = run_lever_scan(&two_level_lever(40.0, 10.0)).unwrap();
    let mut worst: f64 = 0.0;
    let mut n = 0;
    for p in &scan.points {
        assert!(1.0 / (p.value + 10.0) <= LEVER_WEAK_COUPLING);
        let eta = p.eta.expect("external power is nonzero on this scan");
        worst = worst.max((eta - perturbative_eta(p.value, -10.0, 0.0).unwrap()).abs());
        n += 1;
    }
    verdict(
        "lever weak-coupling formula",
        worst <= LEVER_FORMULA_TOL,
        &format!("max |eta - 2(mu - e2)/(e1 - e2)| = {worst:.2e} over {n} points (tol {LEVER_FORMULA_TOL})"),
    );
}

#[test]
fn lever_bound_lattice() {
    let p = Protocol::linear(lattice_point(5.0), lattice_point(0.1)).unwrap();
    let scan = run_lever_scan(&lattice(p, LEVER_T, 0.0, LEVER_GRID)).unwrap();
    let max = scan.max_eta().unwrap();
    let (lo, hi) = LEVER_LATTICE_RANGE;
    verdict("lever 2x2 lattice", (lo..=hi).contains(&max), &format!("max eta = {max:.5} (need [{lo}, {hi}])"));
}

struct OracleCase {
    h: CMatrix,
    partition: Partition,
    res: Reservoir,
}

fn oracle_cases() -> Vec<OracleCase> {
    let mut rng = rng(20240611);
    let mut cases: Vec<OracleCase> = (0..10)
        .map(|i| {
            let n = 2 + i % 3;
            OracleCase {
                h: random_hermitian(&mut rng, n, 2.0),
                partition: random_partition(&mut rng, n),
                res: Reservoir::new(rng.gen_range(0.05..1.5), rng.gen_range(-2.0..2.0)).unwrap(),
            }
        })
        .collect();
    let two = ModelSpec::two_level();
    cases.push(OracleCase {
        h: two.build_hamiltonian(&two_level_point(-1.0, 1.0, 1.0)).unwrap(),
        partition: Partition::singletons(&two),
        res: Reservoir::new(0.2, 0.0).unwrap(),
    });
    let lat = ModelSpec::lattice_2x2();
    cases.push(OracleCase {
        h: lat.build_hamiltonian(&lattice_point(0.5)).unwrap(),
        partition: Partition::isolate(&lat, "1", "rest").unwrap(),
        res: Reservoir::new(0.2, -2.0).unwrap(),
    });
    cases
}

#[test]
fn oracle_equivalence() {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut worst_entropy: f64 = 0.0;
    let cases = oracle_cases();
    for c in &cases {
        let n = c.h.nrows();
        let frame = SpectralFrame::new(0.0, c.h.clone(), &CMatrix::zeros(n, n)).unwrap();
        let g = global_state(&frame.energies, &c.res).unwrap();
        let sys = fock_build(&c.h).unwrap();
        let rho = grand_density(&sys, &c.res);
        let f = fock_globals(&sys, &rho).unwrap();
        let scale = max_abs(&c.h).max(1.0) * n as f64;
        for (x, y) in [
            (g.internal_energy, f.internal_energy),
            (g.entropy, f.entropy),
            (g.particles, f.particles),
            (g.grand_potential, f.grand_potential),
        ] {
            worst = worst.max((x - y).abs() / scale);
        }
        let states = subsystem_state(&frame, &WeightTable::weights(&frame, &c.partition), &c.res).unwrap();
        for (st, proj) in states.iter().zip(c.partition.projectors()) {
            let (u, num) = fock_partitioned(&c.h, &proj, &rho).unwrap();
            worst = worst.max((st.internal_energy - u).abs() / scale);
            worst = worst.max((st.particles - num).abs() / scale);
        }
        let s_sum: f64 = states.iter().map(|s| s.entropy).sum();
        worst_entropy = worst_entropy.max((s_sum - f.entropy).abs());
    }
    let elapsed = start.elapsed().as_secs_f64();
    let pass = worst <= ORACLE_TOL && worst_entropy <= ORACLE_TOL && elapsed < ORACLE_RUNTIME_S;
    verdict(
        "oracle equivalence",
        pass,
        &format!(
            "{} models, max scaled deviation {worst:.2e}, max |sum S_g - S_vN| {worst_entropy:.2e} \
             (tol {ORACLE_TOL:e}), runtime {elapsed:.3} s (limit {ORACLE_RUNTIME_S} s)",
            cases.len()
        ),
    );
}

#[test]
fn analytic_rates_match_finite_differences() {
    let mut rng = rng(77);
    let mut samples = 0;
    let mut worst: f64 = 0.0;
    while samples < 50 {
        let n = rng.gen_range(2..=4);
        let h0 = random_hermitian(&mut rng, n, 1.5);
        let h1 = random_hermitian(&mut rng, n, 1.0);
        let partition = random_partition(&mut rng, n);
        let s: f64 = rng.gen_range(0.0..1.0);
        let h_at = |x: f64| &h0 + &h1 * C64::new(x, 0.0);
        let frame = SpectralFrame::new(s, h_at(s), &h1).unwrap();
        let (lo, _) = eigh(&h_at(s - FD_STEP)).unwrap();
        let (hi, _) = eigh(&h_at(s + FD_STEP)).unwrap();
        let gap = |e: &[f64]| e.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        if frame.min_gap <= FD_MIN_GAP || gap(&lo) <= FD_MIN_GAP || gap(&hi) <= FD_MIN_GAP {
            continue;
        }
        samples += 1;
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
        for nu in 0..n {
            worst = worst.max(rel(frame.energy_rates[nu], (hi[nu] - lo[nu]) / (2.0 * FD_STEP)));
        }
        let frame_lo = SpectralFrame::new(s - FD_STEP, h_at(s - FD_STEP), &h1).unwrap();
        let frame_hi = SpectralFrame::new(s + FD_STEP, h_at(s + FD_STEP), &h1).unwrap();
        for proj in partition.projectors() {
            let analytic = prob_rates(&frame, &proj).unwrap();
            let (pl, ph) = (prob_weights(&frame_lo, &proj), prob_weights(&frame_hi, &proj));
            for nu in 0..n {
                worst = worst.max(rel(analytic[nu], (ph[nu] - pl[nu]) / (2.0 * FD_STEP)));
            }
        }
    }
    verdict(
        "derivative consistency",
        worst <= FD_REL_TOL,
        &format!("max relative deviation over {samples} samples {worst:.2e} (tol {FD_REL_TOL:e})"),
    );
}

#[test]
fn commutator_flow_vanishes() {
    let mut rng = rng(4242);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.gen_range(2..=4);
        let h = random_hermitian(&mut rng, n, 2.0);
        let partition = random_partition(&mut rng, n);
        let res = Reservoir::new(rng.gen_range(0.05..2.0), rng.gen_range(-2.0..2.0)).unwrap();
        let frame = SpectralFrame::new(0.0, h.clone(), &CMatrix::zeros(n, n)).unwrap();
        let scale = max_abs(&h).max(1.0).powi(2);
        for label in partition.labels() {
            worst = worst.max(commutator_flow(&frame, &partition, label, &res).unwrap() / scale);
        }
    }
    verdict(
        "commutator flow",
        worst <= COMMUTATOR_TOL,
        &format!("max scaled |<[h, h|_g]>| over 100 models {worst:.2e} (tol {COMMUTATOR_TOL:e})"),
    );
}

#[test]
fn two_level_closed_forms() {
    let spec = ModelSpec::two_level();
    let site1 = Partition::singletons(&spec).projector("1").unwrap();
    let mut worst_e: f64 = 0.0;
    let mut worst_p: f64 = 0.0;
    let mut count = 0;
    for &e1 in &linspace(-3.0, 3.0, 20) {
        for &e2 in &linspace(-3.0, 3.0, 20) {
            for &w in &linspace(0.1, 2.0, 10) {
                let h = spec.build_hamiltonian(&two_level_point(e1, e2, w)).unwrap();
                let frame = SpectralFrame::new(0.0, h, &CMatrix::zeros(2, 2)).unwrap();
                let cf = two_level_closed_form(e1, e2, w);
                let p = prob_weights(&frame, &site1);
                worst_e =
                    worst_e.max((frame.energies[0] - cf.e_minus).abs()).max((frame.energies[1] - cf.e_plus).abs());
                worst_p = worst_p.max((p[0] - cf.p_minus).abs()).max((p[1] - cf.p_plus).abs());
                count += 1;
            }
        }
    }
    verdict(
        "two-level closed forms",
        worst_e <= CLOSED_FORM_TOL && worst_p <= CLOSED_FORM_TOL,
        &format!(
            "{count} points, max eigenvalue deviation {worst_e:.2e}, max weight deviation {worst_p:.2e} \
             (tol {CLOSED_FORM_TOL:e})"
        ),
    );
}
