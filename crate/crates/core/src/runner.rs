//! Protocol integration, lever scans, path comparisons, sweeps and the
//! oracle cross-check.
//!
//! A run evaluates one spectral frame per grid point. Every segment of the
//! protocol has its own uniform subgrid, so breakpoints are sampled twice:
//! once with the left segment's drive and once with the right one's.

use rayon::prelude::*;

use crate::config::Experiment;
use crate::error::{Error, Result};
use crate::model::{build_drive_derivative, Params, Reservoir};
use crate::oracle;
use crate::partition_thermo::{
    first_law_residual, subsystem_rates, subsystem_state, SubsystemRates, SubsystemState, WeightTable,
};
use crate::quadrature::{integrate, segment_grids, Integrated, SegmentGrid};
use crate::spectral::SpectralFrame;
use crate::thermo::global_state;
use crate::work::{mechanical_advantage, work_record, WorkRecord};

/// Everything computed at one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointRecord {
    pub s: f64,
    pub segment: usize,
    /// Driven parameter values, in the order of [`RunResult::driven`].
    pub driven: Vec<f64>,
    pub states: Vec<SubsystemState>,
    pub rates: Vec<SubsystemRates>,
    pub work: WorkRecord,
    pub first_law: Vec<f64>,
    pub eta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubsystemTotals {
    pub label: String,
    pub delta_u: Integrated,
    pub delta_s: Integrated,
    pub delta_n: Integrated,
    pub work: Integrated,
    pub power: Integrated,
    pub nonlocal: Integrated,
    /// `Ω_γ(1) − Ω_γ(0)` from the endpoint states alone.
    pub delta_omega: f64,
}

impl SubsystemTotals {
    /// `ΔU − TΔS − μΔN − W` from the integrated totals.
    pub fn first_law_residual(&self, res: &Reservoir) -> f64 {
        self.delta_u.value - res.temperature() * self.delta_s.value - res.mu() * self.delta_n.value - self.work.value
    }

    /// Integrated total by output name.
    pub fn quantity(&self, name: &str) -> Option<Integrated> {
        match name {
            "dU" => Some(self.delta_u),
            "dS" => Some(self.delta_s),
            "dN" => Some(self.delta_n),
            "W" => Some(self.work),
            "power" => Some(self.power),
            "nonlocal" => Some(self.nonlocal),
            "dOmega" => Some(Integrated { value: self.delta_omega, error: 0.0 }),
            _ => None,
        }
    }
}

/// Integrated results of one protocol run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub reservoir: Reservoir,
    pub grid: usize,
    pub subsystems: Vec<SubsystemTotals>,
    pub external_work: Integrated,
    /// Global `Ω(1) − Ω(0)`.
    pub delta_omega: f64,
    /// `W_ext − ΔΩ`.
    pub endpoint_residual: f64,
    pub endpoint_tolerance: f64,
    pub warnings: Vec<String>,
}

impl RunSummary {
    pub fn get(&self, label: &str) -> Option<&SubsystemTotals> {
        self.subsystems.iter().find(|t| t.label == label)
    }

    pub fn endpoint_ok(&self) -> bool {
        self.endpoint_residual.abs() <= self.endpoint_tolerance
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub labels: Vec<String>,
    pub driven: Vec<String>,
    pub drive_label: String,
    pub points: Vec<PointRecord>,
    pub summary: RunSummary,
}

impl RunResult {
    pub fn undefined_eta_count(&self) -> usize {
        self.points.iter().filter(|p| p.eta.is_none()).count()
    }
}

fn frame_at(exp: &Experiment, segment: usize, s: f64) -> Result<SpectralFrame> {
    let params = exp.protocol.params_on(segment, s);
    let h = exp.model.build_hamiltonian(&params)?;
    let hdot = exp.model.hamiltonian_rate(&exp.protocol.rates_on(segment))?;
    SpectralFrame::new(s, h, &hdot)
}

fn point_record(exp: &Experiment, segment: usize, frame: &SpectralFrame) -> Result<PointRecord> {
    let res = &exp.reservoir;
    let weights = WeightTable::weights(frame, &exp.partition);
    let rates_table = WeightTable::rates(frame, &exp.partition).map_err(|e| match e {
        Error::Degeneracy { gap, threshold, .. } => Error::Degeneracy { s: frame.s, gap, threshold },
        other => other,
    })?;
    let states = subsystem_state(frame, &weights, res)?;
    let rates = subsystem_rates(frame, &weights, &rates_table, res)?;
    let work = work_record(frame, &exp.partition, res)?;

    let mut first_law = Vec::with_capacity(rates.len());
    for (r, w) in rates.iter().zip(&work.subsystems) {
        let scale = 1f64
            .max(r.energy_rate.abs())
            .max(r.heat_rate.abs())
            .max((res.mu() * r.particle_rate).abs())
            .max(r.grand_rate.abs());
        let residual = first_law_residual(r, res);
        if residual.abs() > 1e-10 * scale {
            return Err(Error::Consistency(format!(
                "first law violated for `{}` at s = {}: residual {residual:e}",
                r.label, frame.s
            )));
        }
        if (r.grand_rate - w.work_rate).abs() > 1e-11 * scale.max(w.power.abs()) {
            return Err(Error::Consistency(format!(
                "work rate of `{}` at s = {} disagrees between modules: {} vs {}",
                r.label, frame.s, r.grand_rate, w.work_rate
            )));
        }
        first_law.push(residual);
    }

    let params = exp.protocol.params_on(segment, frame.s);
    Ok(PointRecord {
        s: frame.s,
        segment,
        driven: exp.protocol.driven().iter().map(|d| params[d]).collect(),
        eta: mechanical_advantage(&work, exp.drive_label())?,
        states,
        rates,
        work,
        first_law,
    })
}

fn grids(exp: &Experiment) -> Vec<SegmentGrid> {
    let bounds: Vec<(f64, f64)> = (0..exp.protocol.segment_count()).map(|k| exp.protocol.segment_bounds(k)).collect();
    segment_grids(&bounds, exp.grid)
}

/// Frames on every segment grid, gauge-aligned sequentially along `s`.
fn evaluate(exp: &Experiment, grids: &[SegmentGrid]) -> Result<(Vec<Vec<PointRecord>>, Vec<String>)> {
    let mut frames: Vec<Vec<SpectralFrame>> = grids
        .iter()
        .enumerate()
        .map(|(k, g)| {
            let pts: Vec<f64> = g.points().collect();
            pts.par_iter().map(|&s| frame_at(exp, k, s)).collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;

    let mut warnings = Vec::new();
    let mut prev: Option<SpectralFrame> = None;
    for seg in frames.iter_mut() {
        for f in seg.iter_mut() {
            if let Some(p) = &prev {
                f.align_to(p);
            }
            warnings.append(&mut f.warnings);
            prev = Some(f.clone());
        }
    }

    let records = frames
        .iter()
        .enumerate()
        .map(|(k, seg)| seg.par_iter().map(|f| point_record(exp, k, f)).collect::<Result<Vec<_>>>())
        .collect::<Result<Vec<_>>>()?;
    Ok((records, warnings))
}

fn integrate_by(grids: &[SegmentGrid], records: &[Vec<PointRecord>], f: impl Fn(&PointRecord) -> f64) -> Integrated {
    let samples: Vec<Vec<f64>> = records.iter().map(|seg| seg.iter().map(&f).collect()).collect();
    integrate(grids, &samples)
}

/// Evaluate the protocol on the grid and integrate all rates.
pub fn run_protocol(exp: &Experiment) -> Result<RunResult> {
    let grids = grids(exp);
    let (records, mut warnings) = evaluate(exp, &grids)?;
    let labels = exp.partition.labels().to_vec();
    let t = exp.reservoir.temperature();

    let first = &records[0][0];
    let last = records.last().and_then(|seg| seg.last()).expect("non-empty grid");
    let subsystems: Vec<SubsystemTotals> = labels
        .iter()
        .enumerate()
        .map(|(g, label)| {
            let ds = integrate_by(&grids, &records, |p| p.rates[g].heat_rate / t);
            SubsystemTotals {
                label: label.clone(),
                delta_u: integrate_by(&grids, &records, |p| p.rates[g].energy_rate),
                delta_s: ds,
                delta_n: integrate_by(&grids, &records, |p| p.rates[g].particle_rate),
                work: integrate_by(&grids, &records, |p| p.work.subsystems[g].work_rate),
                power: integrate_by(&grids, &records, |p| p.work.subsystems[g].power),
                nonlocal: integrate_by(&grids, &records, |p| p.work.subsystems[g].nonlocal_rate),
                delta_omega: last.states[g].grand_potential - first.states[g].grand_potential,
            }
        })
        .collect();

    let external_work = integrate_by(&grids, &records, |p| p.work.external_power);
    let omega = |s: f64| -> Result<f64> {
        let h = exp.model.build_hamiltonian(&exp.protocol.params_at(s))?;
        let frame = SpectralFrame::new(s, h, &build_drive_derivative(&exp.model, &exp.protocol, s)?)?;
        Ok(global_state(&frame.energies, &exp.reservoir)?.grand_potential)
    };
    let delta_omega = omega(1.0)? - omega(0.0)?;
    let endpoint_residual = external_work.value - delta_omega;
    let scale = 1f64.max(delta_omega.abs()).max(external_work.value.abs());
    let endpoint_tolerance = 10.0 * external_work.error + 1e-10 * scale;
    if endpoint_residual.abs() > endpoint_tolerance {
        warnings.push(format!(
            "integrated external work differs from the endpoint grand potential change by {endpoint_residual:e} \
             (tolerance {endpoint_tolerance:e}); refine the grid"
        ));
    }

    let points: Vec<PointRecord> = records.into_iter().flatten().collect();
    let undefined = points.iter().filter(|p| p.eta.is_none()).count();
    if undefined > 0 {
        warnings.push(format!("mechanical advantage undefined at {undefined} grid points (external power ~ 0)"));
    }
    Ok(RunResult {
        labels,
        driven: exp.protocol.driven().iter().cloned().collect(),
        drive_label: exp.drive_label().to_string(),
        points,
        summary: RunSummary {
            reservoir: exp.reservoir,
            grid: exp.grid,
            subsystems,
            external_work,
            delta_omega,
            endpoint_residual,
            endpoint_tolerance,
            warnings,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeverPoint {
    pub s: f64,
    /// Value of the driven parameter.
    pub value: f64,
    pub eta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeverScan {
    pub parameter: String,
    pub drive_label: String,
    pub points: Vec<LeverPoint>,
    pub warnings: Vec<String>,
}

impl LeverScan {
    pub fn max_eta(&self) -> Option<f64> {
        self.points.iter().filter_map(|p| p.eta).fold(None, |m, e| Some(m.map_or(e, |m: f64| m.max(e))))
    }
}

/// Mechanical advantage of the first partition label along the protocol.
pub fn run_lever_scan(exp: &Experiment) -> Result<LeverScan> {
    if exp.protocol.driven().len() != 1 {
        return Err(Error::Config(format!(
            "lever scan needs exactly one driven parameter, got {}",
            exp.protocol.driven().len()
        )));
    }
    let parameter = exp.protocol.driven().iter().next().cloned().unwrap_or_default();
    let grids = grids(exp);
    let (records, mut warnings) = evaluate(exp, &grids)?;
    let points: Vec<LeverPoint> =
        records.into_iter().flatten().map(|p| LeverPoint { s: p.s, value: p.driven[0], eta: p.eta }).collect();
    let undefined = points.iter().filter(|p| p.eta.is_none()).count();
    if undefined > 0 {
        warnings.push(format!("mechanical advantage undefined at {undefined} grid points (external power ~ 0)"));
    }
    Ok(LeverScan { parameter, drive_label: exp.drive_label().to_string(), points, warnings })
}

/// One integrated quantity on both paths.
#[derive(Debug, Clone, PartialEq)]
pub struct PathDifference {
    pub label: String,
    pub quantity: String,
    pub a: Integrated,
    pub b: Integrated,
}

impl PathDifference {
    pub fn difference(&self) -> f64 {
        self.a.value - self.b.value
    }

    pub fn combined_error(&self) -> f64 {
        self.a.error + self.b.error
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathComparison {
    pub rows: Vec<PathDifference>,
    pub summary_a: RunSummary,
    pub summary_b: RunSummary,
}

impl PathComparison {
    pub fn find(&self, label: &str, quantity: &str) -> Option<&PathDifference> {
        self.rows.iter().find(|r| r.label == label && r.quantity == quantity)
    }
}

fn same_params(a: &Params, b: &Params) -> bool {
    a.len() == b.len() && a.iter().all(|(k, &v)| b.get(k).is_some_and(|&w| (v - w).abs() <= 1e-12 * v.abs().max(1.0)))
}

/// Run two protocols with shared endpoints and compare W, ∫power and
/// ∫nonlocal per subsystem. Work is a state function, so its difference must
/// stay within the combined quadrature error.
pub fn run_path_dependence(a: &Experiment, b: &Experiment) -> Result<PathComparison> {
    if !same_params(a.protocol.start(), b.protocol.start()) || !same_params(a.protocol.end(), b.protocol.end()) {
        return Err(Error::Validation("paths do not share their endpoints".into()));
    }
    if a.model != b.model || a.partition != b.partition || a.reservoir != b.reservoir {
        return Err(Error::Validation("paths must share model, partition and reservoir".into()));
    }
    let (ra, rb) = rayon::join(|| run_protocol(a), || run_protocol(b));
    let (sa, sb) = (ra?.summary, rb?.summary);
    let mut rows = Vec::new();
    for (ta, tb) in sa.subsystems.iter().zip(&sb.subsystems) {
        for (q, x, y) in
            [("W", ta.work, tb.work), ("power", ta.power, tb.power), ("nonlocal", ta.nonlocal, tb.nonlocal)]
        {
            rows.push(PathDifference { label: ta.label.clone(), quantity: q.into(), a: x, b: y });
        }
    }
    for r in rows.iter().filter(|r| r.quantity == "W") {
        let tol = 10.0 * r.combined_error() + 1e-10 * r.a.value.abs().max(1.0);
        if r.difference().abs() > tol {
            return Err(Error::Consistency(format!(
                "work on `{}` depends on the path: difference {:e} exceeds {tol:e}",
                r.label,
                r.difference()
            )));
        }
    }
    Ok(PathComparison { rows, summary_a: sa, summary_b: sb })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub parameter: String,
    pub values: Vec<f64>,
    pub summaries: Vec<RunSummary>,
}

/// Independent runs, one per value; results are returned in sweep order.
pub fn run_sweep(exp: &Experiment, parameter: &str, values: &[f64]) -> Result<SweepResult> {
    let summaries = values
        .par_iter()
        .map(|&v| run_protocol(&exp.with_parameter(parameter, v)?).map(|r| r.summary))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult { parameter: parameter.to_string(), values: values.to_vec(), summaries })
}

/// One comparison against the Fock-space reference.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleComparison {
    pub s: f64,
    pub quantity: String,
    pub value: f64,
    pub reference: f64,
    pub tolerance: f64,
}

impl OracleComparison {
    pub fn passed(&self) -> bool {
        (self.value - self.reference).abs() <= self.tolerance
    }
}

/// Compare U, S, N, Ω and partitioned (U_γ, N_γ) with the many-body
/// reference at the given path points.
pub fn oracle_check(exp: &Experiment, samples: &[f64]) -> Result<Vec<OracleComparison>> {
    let res = &exp.reservoir;
    let mut out = Vec::new();
    for &s in samples {
        let h = exp.model.build_hamiltonian(&exp.protocol.params_at(s))?;
        let frame = SpectralFrame::new(s, h.clone(), &build_drive_derivative(&exp.model, &exp.protocol, s)?)?;
        let ours = global_state(&frame.energies, res)?;
        let sys = oracle::fock_build(&h)?;
        let rho = oracle::grand_density(&sys, res);
        let fock = oracle::fock_globals(&sys, &rho)?;
        let scale = frame.h_scale() * frame.dim() as f64;
        let tol = 1e-10 * scale;
        let mut push = |quantity: String, value: f64, reference: f64, tolerance: f64| {
            out.push(OracleComparison { s, quantity, value, reference, tolerance })
        };
        push("U".into(), ours.internal_energy, fock.internal_energy, tol);
        push("S".into(), ours.entropy, fock.entropy, 1e-10 * frame.dim() as f64);
        push("N".into(), ours.particles, fock.particles, 1e-10 * frame.dim() as f64);
        push("Omega".into(), ours.grand_potential, fock.grand_potential, tol);

        let weights = WeightTable::weights(&frame, &exp.partition);
        let states = subsystem_state(&frame, &weights, res)?;
        let entropy_sum: f64 = states.iter().map(|st| st.entropy).sum();
        push("sum S_g".into(), entropy_sum, fock.entropy, 1e-10);
        for (st, proj) in states.iter().zip(exp.partition.projectors()) {
            let (u, n) = oracle::fock_partitioned(&h, &proj, &rho)?;
            push(format!("U_{}", st.label), st.internal_energy, u, tol);
            push(format!("N_{}", st.label), st.particles, n, 1e-10 * frame.dim() as f64);
        }
    }
    Ok(out)
}
