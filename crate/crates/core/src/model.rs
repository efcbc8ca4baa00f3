//! Hamiltonian family, driving protocols, subsystem partitions and the
//! reservoir.
//!
//! A [`ModelSpec`] is a labelled tight-binding graph whose onsite energies
//! and (real) bond amplitudes are either constants or named parameters. A
//! [`Protocol`] is a piecewise-linear path `s ∈ [0, 1] ↦ params(s)`, so the
//! drive derivative `dh/ds` is piecewise constant and known exactly.
//! Units: ħ = k_B = 1; all rates are per unit of the path parameter `s`.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
/// Dense complex matrix; every operator in the crate uses this storage.
pub type CMatrix = DMatrix<C64>;
/// Assignment of values (or rates) to named parameters.
pub type Params = BTreeMap<String, f64>;

/// Onsite energy or bond amplitude: a literal or the name of a parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamExpr {
    Const(f64),
    Named(String),
}

impl ParamExpr {
    fn value(&self, params: &Params) -> Result<f64> {
        match self {
            ParamExpr::Const(v) => Ok(*v),
            ParamExpr::Named(name) => {
                params.get(name).copied().ok_or_else(|| Error::Config(format!("unresolved parameter `{name}`")))
            }
        }
    }

    /// d(expr)/ds given parameter slopes; constants do not move.
    fn rate(&self, rates: &Params) -> Result<f64> {
        match self {
            ParamExpr::Const(_) => Ok(0.0),
            ParamExpr::Named(_) => self.value(rates),
        }
    }

    fn name(&self) -> Option<&str> {
        match self {
            ParamExpr::Named(n) => Some(n),
            ParamExpr::Const(_) => None,
        }
    }
}

impl From<f64> for ParamExpr {
    fn from(v: f64) -> Self {
        ParamExpr::Const(v)
    }
}

impl From<&str> for ParamExpr {
    fn from(name: &str) -> Self {
        ParamExpr::Named(name.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bond {
    pub a: String,
    pub b: String,
    pub amplitude: ParamExpr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, try_from = "RawModelSpec", into = "RawModelSpec")]
pub struct ModelSpec {
    sites: Vec<String>,
    onsite: Vec<ParamExpr>,
    bonds: Vec<(usize, usize, ParamExpr)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModelSpec {
    sites: Vec<String>,
    onsite: BTreeMap<String, ParamExpr>,
    #[serde(default)]
    bonds: Vec<Bond>,
}

impl TryFrom<RawModelSpec> for ModelSpec {
    type Error = Error;

    fn try_from(raw: RawModelSpec) -> Result<Self> {
        ModelSpec::new(raw.sites, raw.onsite, raw.bonds)
    }
}

impl From<ModelSpec> for RawModelSpec {
    fn from(spec: ModelSpec) -> Self {
        let onsite = spec.sites.iter().cloned().zip(spec.onsite.iter().cloned()).collect();
        let bonds = spec
            .bonds
            .iter()
            .map(|(a, b, amp)| Bond { a: spec.sites[*a].clone(), b: spec.sites[*b].clone(), amplitude: amp.clone() })
            .collect();
        RawModelSpec { sites: spec.sites, onsite, bonds }
    }
}

impl ModelSpec {
    pub fn new(sites: Vec<String>, mut onsite: BTreeMap<String, ParamExpr>, bonds: Vec<Bond>) -> Result<Self> {
        if sites.is_empty() {
            return Err(Error::Config("model has no sites".into()));
        }
        let mut index = BTreeMap::new();
        for (i, site) in sites.iter().enumerate() {
            if index.insert(site.clone(), i).is_some() {
                return Err(Error::Config(format!("duplicate site `{site}`")));
            }
        }
        if let Some(extra) = onsite.keys().find(|k| !index.contains_key(*k)) {
            return Err(Error::Config(format!("onsite energy given for unknown site `{extra}`")));
        }
        let onsite = sites
            .iter()
            .map(|site| onsite.remove(site).ok_or_else(|| Error::Config(format!("no onsite energy for site `{site}`"))))
            .collect::<Result<Vec<_>>>()?;

        let mut seen = BTreeSet::new();
        let mut resolved = Vec::with_capacity(bonds.len());
        for bond in bonds {
            let lookup = |s: &str| {
                index.get(s).copied().ok_or_else(|| Error::Config(format!("bond references unknown site `{s}`")))
            };
            let (a, b) = (lookup(&bond.a)?, lookup(&bond.b)?);
            if a == b {
                return Err(Error::Config(format!("bond from site `{}` to itself", bond.a)));
            }
            if !seen.insert((a.min(b), a.max(b))) {
                return Err(Error::Config(format!("duplicate bond {}-{}", bond.a, bond.b)));
            }
            resolved.push((a, b, bond.amplitude));
        }
        Ok(ModelSpec { sites, onsite, bonds: resolved })
    }

    /// Two sites with onsite energies `e1`, `e2` coupled by `w`.
    pub fn two_level() -> Self {
        let sites = vec!["1".to_string(), "2".to_string()];
        let onsite = [("1", "e1"), ("2", "e2")].into_iter().map(|(s, p)| (s.to_string(), ParamExpr::from(p))).collect();
        let bonds = vec![Bond { a: "1".into(), b: "2".into(), amplitude: "w".into() }];
        ModelSpec::new(sites, onsite, bonds).expect("static model is valid")
    }

    /// Four-site ring 1-2-3-4-1 with onsite energies `e1..e4` and a common hopping `w`.
    pub fn lattice_2x2() -> Self {
        let sites: Vec<String> = (1..=4).map(|i| i.to_string()).collect();
        let onsite = sites.iter().map(|s| (s.clone(), ParamExpr::Named(format!("e{s}")))).collect();
        let bonds = [("1", "2"), ("2", "3"), ("3", "4"), ("4", "1")]
            .into_iter()
            .map(|(a, b)| Bond { a: a.into(), b: b.into(), amplitude: "w".into() })
            .collect();
        ModelSpec::new(sites, onsite, bonds).expect("static model is valid")
    }

    pub fn dim(&self) -> usize {
        self.sites.len()
    }

    pub fn sites(&self) -> &[String] {
        &self.sites
    }

    pub fn site_index(&self, site: &str) -> Option<usize> {
        self.sites.iter().position(|s| s == site)
    }

    /// Names of all parameters referenced by onsite energies or bonds.
    pub fn parameter_names(&self) -> BTreeSet<String> {
        self.onsite
            .iter()
            .chain(self.bonds.iter().map(|(_, _, amp)| amp))
            .filter_map(|e| e.name().map(str::to_string))
            .collect()
    }

    /// Single-particle Hamiltonian for a parameter assignment.
    pub fn build_hamiltonian(&self, params: &Params) -> Result<CMatrix> {
        self.assemble(|e| e.value(params))
    }

    /// `dh/ds` for given parameter slopes. Every entry of `h` is a single
    /// parameter (or constant), so this is exact.
    pub fn hamiltonian_rate(&self, rates: &Params) -> Result<CMatrix> {
        self.assemble(|e| e.rate(rates))
    }

    fn assemble(&self, eval: impl Fn(&ParamExpr) -> Result<f64>) -> Result<CMatrix> {
        let n = self.dim();
        let mut h = CMatrix::zeros(n, n);
        for (i, e) in self.onsite.iter().enumerate() {
            h[(i, i)] = C64::new(eval(e)?, 0.0);
        }
        for (a, b, amp) in &self.bonds {
            let v = C64::new(eval(amp)?, 0.0);
            h[(*a, *b)] = v;
            h[(*b, *a)] = v;
        }
        Ok(h)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Waypoint {
    pub s: f64,
    pub params: Params,
}

/// Piecewise-linear path through parameter space over `s ∈ [0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, try_from = "RawProtocol", into = "RawProtocol")]
pub struct Protocol {
    waypoints: Vec<Waypoint>,
    driven: BTreeSet<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProtocol {
    waypoints: Vec<Waypoint>,
    driven: BTreeSet<String>,
}

impl TryFrom<RawProtocol> for Protocol {
    type Error = Error;

    fn try_from(raw: RawProtocol) -> Result<Self> {
        Protocol::new(raw.waypoints, raw.driven)
    }
}

impl From<Protocol> for RawProtocol {
    fn from(p: Protocol) -> Self {
        RawProtocol { waypoints: p.waypoints, driven: p.driven }
    }
}

impl Protocol {
    pub fn new(waypoints: Vec<Waypoint>, driven: BTreeSet<String>) -> Result<Self> {
        if waypoints.len() < 2 {
            return Err(Error::Config("protocol needs at least two waypoints".into()));
        }
        let first = &waypoints[0];
        let last = &waypoints[waypoints.len() - 1];
        if first.s != 0.0 || last.s != 1.0 {
            return Err(Error::Config(format!("protocol must span s = 0 to s = 1, got {} to {}", first.s, last.s)));
        }
        for pair in waypoints.windows(2) {
            if !(pair[1].s > pair[0].s) {
                return Err(Error::Config(format!(
                    "waypoint s-values must strictly increase ({} then {})",
                    pair[0].s, pair[1].s
                )));
            }
        }
        let keys: BTreeSet<&String> = first.params.keys().collect();
        for wp in &waypoints {
            if wp.params.keys().collect::<BTreeSet<_>>() != keys {
                return Err(Error::Config(format!(
                    "waypoint at s = {} does not set the same parameters as s = 0",
                    wp.s
                )));
            }
            if let Some((k, v)) = wp.params.iter().find(|(_, v)| !v.is_finite()) {
                return Err(Error::Config(format!("parameter `{k}` = {v} at s = {}", wp.s)));
            }
        }
        if let Some(name) = driven.iter().find(|d| !keys.contains(d)) {
            return Err(Error::Config(format!("driven parameter `{name}` is not set by the protocol")));
        }
        for name in keys {
            let varies = waypoints.iter().any(|wp| wp.params[name] != first.params[name]);
            if varies && !driven.contains(name) {
                return Err(Error::Config(format!(
                    "parameter `{name}` varies along the protocol but is not listed as driven"
                )));
            }
        }
        Ok(Protocol { waypoints, driven })
    }

    /// Evenly spaced waypoints; the driven set is inferred from which parameters move.
    pub fn through(points: Vec<Params>) -> Result<Self> {
        let m = points.len().max(2) - 1;
        let waypoints: Vec<Waypoint> = points
            .into_iter()
            .enumerate()
            .map(|(i, params)| Waypoint { s: if i == m { 1.0 } else { i as f64 / m as f64 }, params })
            .collect();
        let driven = match waypoints.first() {
            Some(first) => first
                .params
                .keys()
                .filter(|k| waypoints.iter().any(|wp| wp.params.get(*k) != first.params.get(*k)))
                .cloned()
                .collect(),
            None => BTreeSet::new(),
        };
        Protocol::new(waypoints, driven)
    }

    /// Straight line from `from` to `to`.
    pub fn linear(from: Params, to: Params) -> Result<Self> {
        Protocol::through(vec![from, to])
    }

    pub fn waypoints(&self) -> &[Waypoint] {
        &self.waypoints
    }

    pub fn driven(&self) -> &BTreeSet<String> {
        &self.driven
    }

    pub fn segment_count(&self) -> usize {
        self.waypoints.len() - 1
    }

    /// `[s_start, s_end]` of segment `k`.
    pub fn segment_bounds(&self, k: usize) -> (f64, f64) {
        (self.waypoints[k].s, self.waypoints[k + 1].s)
    }

    /// Segment containing `s`; breakpoints belong to the segment on their
    /// right, except `s = 1` which belongs to the last segment.
    pub fn segment_at(&self, s: f64) -> usize {
        let last = self.segment_count() - 1;
        (0..last).find(|&k| s < self.waypoints[k + 1].s).unwrap_or(last)
    }

    /// Parameters at `s` evaluated on segment `k` (may extrapolate slightly
    /// outside the segment for round-off at its ends).
    pub fn params_on(&self, k: usize, s: f64) -> Params {
        let (a, b) = (&self.waypoints[k], &self.waypoints[k + 1]);
        let t = (s - a.s) / (b.s - a.s);
        a.params
            .iter()
            .map(|(name, &v0)| {
                let v1 = b.params[name];
                let v = if t == 1.0 { v1 } else { v0 + (v1 - v0) * t };
                (name.clone(), v)
            })
            .collect()
    }

    pub fn params_at(&self, s: f64) -> Params {
        self.params_on(self.segment_at(s), s)
    }

    /// Constant slopes `dparams/ds` on segment `k`.
    pub fn rates_on(&self, k: usize) -> Params {
        let (a, b) = (&self.waypoints[k], &self.waypoints[k + 1]);
        let ds = b.s - a.s;
        a.params.iter().map(|(name, &v0)| (name.clone(), (b.params[name] - v0) / ds)).collect()
    }

    pub fn rates_at(&self, s: f64) -> Params {
        self.rates_on(self.segment_at(s))
    }

    pub fn start(&self) -> &Params {
        &self.waypoints[0].params
    }

    pub fn end(&self) -> &Params {
        &self.waypoints[self.waypoints.len() - 1].params
    }

    /// Pin a non-driven parameter to `value` along the whole path.
    pub fn with_fixed(&self, name: &str, value: f64) -> Result<Self> {
        if self.driven.contains(name) {
            return Err(Error::Config(format!("cannot pin driven parameter `{name}`")));
        }
        let mut out = self.clone();
        for wp in &mut out.waypoints {
            wp.params.insert(name.to_string(), value);
        }
        Ok(out)
    }

    /// Check that every parameter the model references is supplied.
    pub fn check_covers(&self, spec: &ModelSpec) -> Result<()> {
        match spec.parameter_names().into_iter().find(|n| !self.start().contains_key(n)) {
            Some(name) => Err(Error::Config(format!("model parameter `{name}` is not set by the protocol"))),
            None => Ok(()),
        }
    }
}

/// `dh/ds` at `s`: right-derivative at breakpoints, left-derivative at `s = 1`.
pub fn build_drive_derivative(spec: &ModelSpec, protocol: &Protocol, s: f64) -> Result<CMatrix> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::Validation(format!("path parameter s = {s} outside [0, 1]")));
    }
    protocol.check_covers(spec)?;
    spec.hamiltonian_rate(&protocol.rates_at(s))
}

/// Site-to-subsystem assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    labels: Vec<String>,
    members: Vec<usize>,
}

/// Serialized form of a partition: label list plus `site -> label` map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionConfig {
    pub labels: Vec<String>,
    pub assignment: BTreeMap<String, String>,
}

impl Partition {
    /// `members[i]` is the index into `labels` of site `i`.
    pub fn new(labels: Vec<String>, members: Vec<usize>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Config("partition has no labels".into()));
        }
        let unique: BTreeSet<&String> = labels.iter().collect();
        if unique.len() != labels.len() {
            return Err(Error::Config("partition labels must be distinct".into()));
        }
        if let Some(bad) = members.iter().find(|&&m| m >= labels.len()) {
            return Err(Error::Config(format!("site assigned to label index {bad} out of range")));
        }
        Ok(Partition { labels, members })
    }

    pub fn from_config(spec: &ModelSpec, cfg: &PartitionConfig) -> Result<Self> {
        let members = spec
            .sites()
            .iter()
            .map(|site| {
                let label = cfg
                    .assignment
                    .get(site)
                    .ok_or_else(|| Error::Config(format!("site `{site}` has no subsystem label")))?;
                cfg.labels
                    .iter()
                    .position(|l| l == label)
                    .ok_or_else(|| Error::Config(format!("site `{site}` assigned to unknown label `{label}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(extra) = cfg.assignment.keys().find(|k| spec.site_index(k).is_none()) {
            return Err(Error::Config(format!("partition assigns unknown site `{extra}`")));
        }
        Partition::new(cfg.labels.clone(), members)
    }

    pub fn to_config(&self, spec: &ModelSpec) -> PartitionConfig {
        PartitionConfig {
            labels: self.labels.clone(),
            assignment: spec
                .sites()
                .iter()
                .zip(&self.members)
                .map(|(site, &m)| (site.clone(), self.labels[m].clone()))
                .collect(),
        }
    }

    /// Every site is its own subsystem, labelled by the site name.
    pub fn singletons(spec: &ModelSpec) -> Self {
        Partition { labels: spec.sites().to_vec(), members: (0..spec.dim()).collect() }
    }

    /// `site` alone versus everything else (labelled `rest`).
    pub fn isolate(spec: &ModelSpec, site: &str, rest: &str) -> Result<Self> {
        let idx = spec.site_index(site).ok_or_else(|| Error::Config(format!("unknown site `{site}`")))?;
        let members = (0..spec.dim()).map(|i| usize::from(i != idx)).collect();
        Partition::new(vec![site.to_string(), rest.to_string()], members)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn dim(&self) -> usize {
        self.members.len()
    }

    pub fn label_index(&self, gamma: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == gamma)
            .ok_or_else(|| Error::Config(format!("unknown subsystem label `{gamma}`")))
    }

    /// Diagonal 0/1 projector onto the sites of `gamma`.
    pub fn projector(&self, gamma: &str) -> Result<CMatrix> {
        let g = self.label_index(gamma)?;
        Ok(self.projector_at(g))
    }

    pub fn projector_at(&self, g: usize) -> CMatrix {
        let n = self.dim();
        CMatrix::from_fn(
            n,
            n,
            |i, j| {
                if i == j && self.members[i] == g {
                    C64::new(1.0, 0.0)
                } else {
                    C64::new(0.0, 0.0)
                }
            },
        )
    }

    pub fn projectors(&self) -> Vec<CMatrix> {
        (0..self.labels.len()).map(|g| self.projector_at(g)).collect()
    }
}

/// Heat and particle bath at temperature `T > 0` and chemical potential `μ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, try_from = "RawReservoir", into = "RawReservoir")]
pub struct Reservoir {
    temperature: f64,
    chemical_potential: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawReservoir {
    temperature: f64,
    chemical_potential: f64,
}

impl TryFrom<RawReservoir> for Reservoir {
    type Error = Error;

    fn try_from(raw: RawReservoir) -> Result<Self> {
        Reservoir::new(raw.temperature, raw.chemical_potential)
    }
}

impl From<Reservoir> for RawReservoir {
    fn from(r: Reservoir) -> Self {
        RawReservoir { temperature: r.temperature, chemical_potential: r.chemical_potential }
    }
}

impl Reservoir {
    pub fn new(temperature: f64, chemical_potential: f64) -> Result<Self> {
        if !(temperature > 0.0 && temperature.is_finite()) {
            return Err(Error::Validation(format!("temperature must be positive and finite, got {temperature}")));
        }
        if !chemical_potential.is_finite() {
            return Err(Error::Validation(format!("chemical potential must be finite, got {chemical_potential}")));
        }
        Ok(Reservoir { temperature, chemical_potential })
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn mu(&self) -> f64 {
        self.chemical_potential
    }

    pub fn beta(&self) -> f64 {
        1.0 / self.temperature
    }

    pub fn with_mu(&self, mu: f64) -> Result<Self> {
        Reservoir::new(self.temperature, mu)
    }

    pub fn with_temperature(&self, t: f64) -> Result<Self> {
        Reservoir::new(t, self.chemical_potential)
    }
}

/// Shorthand for building parameter maps in code and tests.
pub fn params<const N: usize>(pairs: [(&str, f64); N]) -> Params {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}
