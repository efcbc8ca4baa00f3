#![allow(dead_code)]

use nonlocal_work::config::Experiment;
use nonlocal_work::model::{params, CMatrix, ModelSpec, Params, Partition, Protocol, Reservoir, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn two_level_point(e1: f64, e2: f64, w: f64) -> Params {
    params([("e1", e1), ("e2", e2), ("w", w)])
}

pub fn two_level(protocol: Protocol, t: f64, mu: f64, grid: usize) -> Experiment {
    let spec = ModelSpec::two_level();
    let partition = Partition::singletons(&spec);
    Experiment::new(spec, partition, Reservoir::new(t, mu).unwrap(), protocol, grid).unwrap()
}

/// Only `e1` moves, from -0.5 to 0.5, at `w = 1`.
pub fn protocol_one(e2: f64) -> Protocol {
    Protocol::linear(two_level_point(-0.5, e2, 1.0), two_level_point(0.5, e2, 1.0)).unwrap()
}

/// `e1` from -1 to 1 and `w` from `w0` to `w1` together, `e2 = 1`.
pub fn protocol_two(w0: f64, w1: f64) -> Protocol {
    Protocol::linear(two_level_point(-1.0, 1.0, w0), two_level_point(1.0, 1.0, w1)).unwrap()
}

/// L-shaped paths between the corners of protocol two:
/// `e1` first then `w` (A), or `w` first then `e1` (B).
pub fn l_paths(w0: f64, w1: f64) -> (Protocol, Protocol) {
    let p = two_level_point;
    let a = Protocol::through(vec![p(-1.0, 1.0, w0), p(1.0, 1.0, w0), p(1.0, 1.0, w1)]).unwrap();
    let b = Protocol::through(vec![p(-1.0, 1.0, w0), p(-1.0, 1.0, w1), p(1.0, 1.0, w1)]).unwrap();
    (a, b)
}

pub fn lattice_point(e1: f64) -> Params {
    params([("e1", e1), ("e2", -10.0), ("e3", -2.0), ("e4", -10.0), ("w", 1.0)])
}

/// 2x2 ring with site 1 driven, partitioned into site 1 and the rest.
pub fn lattice(protocol: Protocol, t: f64, mu: f64, grid: usize) -> Experiment {
    let spec = ModelSpec::lattice_2x2();
    let partition = Partition::isolate(&spec, "1", "rest").unwrap();
    Experiment::new(spec, partition, Reservoir::new(t, mu).unwrap(), protocol, grid).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Dense Hermitian matrix with entries uniform in [-scale, scale].
pub fn random_hermitian(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> CMatrix {
    let mut h = CMatrix::zeros(n, n);
    for i in 0..n {
        h[(i, i)] = C64::new(rng.gen_range(-scale..scale), 0.0);
        for j in i + 1..n {
            let z = C64::new(rng.gen_range(-scale..scale), rng.gen_range(-scale..scale));
            h[(i, j)] = z;
            h[(j, i)] = z.conj();
        }
    }
    h
}

/// Two or three labels, every label used at least once when possible.
pub fn random_partition(rng: &mut ChaCha8Rng, n: usize) -> Partition {
    let k = if n > 2 { rng.gen_range(2..=3) } else { 2 };
    let mut members: Vec<usize> = (0..n).map(|i| i % k).collect();
    for i in (1..n).rev() {
        members.swap(i, rng.gen_range(0..=i));
    }
    Partition::new((0..k).map(|g| format!("g{g}")).collect(), members).unwrap()
}

pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| if i == n - 1 { b } else { a + (b - a) * i as f64 / (n - 1) as f64 }).collect()
}

/// `a + k * step` for k = 0.. up to `b`, rounded to the step's decimals.
pub fn stepped(a: f64, b: f64, step: f64) -> Vec<f64> {
    let n = ((b - a) / step).round() as usize;
    (0..=n).map(|k| ((a + k as f64 * step) / step).round() * step).collect()
}
