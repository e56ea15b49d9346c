//! JSON experiment configuration.
//!
//! A run file has optional global settings and exactly one section named after
//! the subcommand (`verify_algebra`, `verify_lemmas`, `cone`, `cauchy`,
//! `growth`, `radius`). Scans also need a `system` block; the suites build
//! their own small systems and reject one. Unknown keys are errors.
//!
//! Lattices:
//! - `{"kind": "chain", "length": 10}`
//! - `{"kind": "grid", "side": 4, "dim": 2}`
//! - `{"kind": "table", "labels": [..], "distances": [[..], ..], "dimension": 1}`
//! - `{"kind": "coordinates", "coords": [[..], ..], "metric": "l1", "dimension": 2}`
//!   (`labels` optional)
//! - `{"kind": "file", "path": "graph.json"}`, where the file holds one of the
//!   `table` or `coordinates` objects; relative paths resolve against the run file.
//!
//! Operator strings are whitespace-separated site factors multiplied left to
//! right. Spin-½: `X3`, `Y3`, `Z3`, `I3`. Fermions: `c+3` (creation), `c3`
//! (annihilation), `n3` (site number); `.f` selects flavor `f`, e.g. `c+3.1`.
//! Probe templates drop the site index (`"Z"`, `"n"`).

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::engine::EngineKind;
use super::suites::{AlgebraSuite, LemmaSuite};
use super::{linspace, mu_of, tau_of, DEFAULT_DELTA};
use crate::algebra::{car_generators, number_operator, AlgebraContext, Backend, LatticeOperator, DEFAULT_DENSE_CAP};
use crate::error::{invalid, Error, Result};
use crate::lattice::{make_chain_capped, make_grid_capped, MetricGraph, MetricRule, DEFAULT_SITE_CAP};
use crate::linalg::CMat;
use crate::localization::DecayFunction;
use crate::zero_chain::{self, CoefficientFn, ZeroChain};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Required by the scans; the suites build their own systems.
    #[serde(default)]
    pub system: Option<SystemConfig>,
    /// Integrator tolerance.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub engine: EngineKind,
    #[serde(default = "default_formats")]
    pub formats: Vec<PlotFormat>,
    /// Re-run the scan at `tolerance/10` and compare.
    #[serde(default)]
    pub refine: bool,
    #[serde(default)]
    pub verify_algebra: Option<AlgebraSuite>,
    #[serde(default)]
    pub verify_lemmas: Option<LemmaSuite>,
    #[serde(default)]
    pub cone: Option<ConeSection>,
    #[serde(default)]
    pub cauchy: Option<CauchySection>,
    #[serde(default)]
    pub growth: Option<GrowthSection>,
    #[serde(default)]
    pub radius: Option<RadiusSection>,
}

fn default_tolerance() -> f64 {
    1e-8
}

fn default_formats() -> Vec<PlotFormat> {
    vec![PlotFormat::Csv, PlotFormat::Svg]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotFormat {
    Csv,
    #[serde(rename = "svg-lineplot", alias = "svg")]
    Svg,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Subcommand {
    VerifyAlgebra,
    VerifyLemmas,
    Cone,
    Cauchy,
    Growth,
    Radius,
}

impl Subcommand {
    pub fn section(self) -> &'static str {
        match self {
            Subcommand::VerifyAlgebra => "verify_algebra",
            Subcommand::VerifyLemmas => "verify_lemmas",
            Subcommand::Cone => "cone",
            Subcommand::Cauchy => "cauchy",
            Subcommand::Growth => "growth",
            Subcommand::Radius => "radius",
        }
    }
}

impl RunConfig {
    /// Configuration with every optional block absent.
    pub fn empty() -> Self {
        RunConfig {
            system: None,
            tolerance: default_tolerance(),
            seed: 0,
            engine: EngineKind::Auto,
            formats: default_formats(),
            refine: false,
            verify_algebra: None,
            verify_lemmas: None,
            cone: None,
            cauchy: None,
            growth: None,
            radius: None,
        }
    }

    /// Rejects sections that belong to other subcommands. Suites fall back to
    /// their defaults; scans require their section.
    pub fn check_sections(&self, cmd: Subcommand) -> Result<()> {
        let present = [
            (Subcommand::VerifyAlgebra, self.verify_algebra.is_some()),
            (Subcommand::VerifyLemmas, self.verify_lemmas.is_some()),
            (Subcommand::Cone, self.cone.is_some()),
            (Subcommand::Cauchy, self.cauchy.is_some()),
            (Subcommand::Growth, self.growth.is_some()),
            (Subcommand::Radius, self.radius.is_some()),
        ];
        for (other, there) in present {
            if there && other != cmd {
                return invalid(format!("section `{}` is not consumed by `{}`", other.section(), cmd.section()));
            }
        }
        let scan = matches!(cmd, Subcommand::Cone | Subcommand::Cauchy | Subcommand::Growth | Subcommand::Radius);
        if scan && !present.iter().any(|&(c, there)| c == cmd && there) {
            return invalid(format!("missing section `{}`", cmd.section()));
        }
        match (scan, self.system.is_some()) {
            (true, false) => return invalid(format!("`{}` needs a `system` block", cmd.section())),
            (false, true) => return invalid(format!("`system` is not consumed by `{}`", cmd.section())),
            _ => {}
        }
        if self.refine && !scan {
            return invalid(format!("`refine` is not consumed by `{}`", cmd.section()));
        }
        if !(self.tolerance > 0.0) {
            return invalid(format!("tolerance must be positive, got {}", self.tolerance));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub lattice: LatticeConfig,
    #[serde(default = "default_site_cap")]
    pub site_cap: usize,
    #[serde(default = "default_backend")]
    pub backend: Backend,
    #[serde(default = "default_dense_cap")]
    pub dense_cap: usize,
    /// Defaults to the lattice centre.
    #[serde(default)]
    pub x0: Option<usize>,
    pub interval: (f64, f64),
    pub model: ModelConfig,
    #[serde(default = "default_decay")]
    pub g: DecayFunction,
    #[serde(default = "default_decay")]
    pub f: DecayFunction,
    /// Defaults to `Z` (spin) or `n` (fermion) at `x0`.
    #[serde(default)]
    pub observable: Option<String>,
}

fn default_site_cap() -> usize {
    DEFAULT_SITE_CAP
}

fn default_backend() -> Backend {
    Backend::Spin { local_dim: 2 }
}

fn default_dense_cap() -> usize {
    DEFAULT_DENSE_CAP
}

fn default_decay() -> DecayFunction {
    DecayFunction::power_law(8.0)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LatticeConfig {
    Chain { length: usize },
    Grid { side: usize, dim: usize },
    Table(TableGraph),
    Coordinates(CoordinateGraph),
    File { path: PathBuf },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableGraph {
    pub labels: Vec<String>,
    pub distances: Vec<Vec<f64>>,
    pub dimension: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoordinateGraph {
    #[serde(default)]
    pub labels: Option<Vec<String>>,
    pub coords: Vec<Vec<f64>>,
    pub metric: MetricRule,
    pub dimension: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum GraphFile {
    Table(TableGraph),
    Coordinates(CoordinateGraph),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    UniformTfim {
        j: f64,
        h: f64,
    },
    LinearGrowthTfim {
        j: f64,
        h: f64,
        slope: f64,
        /// Growth centre; defaults to `x0`.
        #[serde(default)]
        center: Option<usize>,
    },
    TimeModulatedTfim {
        j: f64,
        h: f64,
        omega: f64,
    },
    Zero,
    Terms {
        terms: Vec<TermConfig>,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermConfig {
    pub site: usize,
    pub op: String,
    #[serde(default = "CoefficientFn::one")]
    pub coefficient: CoefficientFn,
    /// Adds the adjoint, for hopping terms such as `c+0 c1`.
    #[serde(default)]
    pub add_adjoint: bool,
}

/// A time given directly or as a multiple of `τ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TimeValue {
    Absolute(f64),
    Tau { tau: f64 },
}

impl Default for TimeValue {
    fn default() -> Self {
        TimeValue::Absolute(0.0)
    }
}

impl TimeValue {
    pub fn resolve(self, tau: Option<f64>) -> Result<f64> {
        match (self, tau) {
            (TimeValue::Absolute(t), _) => Ok(t),
            (TimeValue::Tau { tau: m }, Some(tau)) => Ok(m * tau),
            (TimeValue::Tau { .. }, None) => invalid("time given in units of τ but no `tau` block is configured"),
        }
    }

    fn uses_tau(self) -> bool {
        matches!(self, TimeValue::Tau { .. })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TimeGrid {
    /// `[start, stop, points]`
    Linspace(TimeValue, TimeValue, usize),
    Values(Vec<TimeValue>),
}

impl TimeGrid {
    pub fn resolve(&self, tau: Option<f64>) -> Result<Vec<f64>> {
        match self {
            TimeGrid::Linspace(a, b, n) => {
                if *n == 0 {
                    return invalid("time grid needs at least one point");
                }
                Ok(linspace(a.resolve(tau)?, b.resolve(tau)?, *n))
            }
            TimeGrid::Values(vs) => vs.iter().map(|v| v.resolve(tau)).collect(),
        }
    }

    pub fn uses_tau(&self) -> bool {
        match self {
            TimeGrid::Linspace(a, b, _) => a.uses_tau() || b.uses_tau(),
            TimeGrid::Values(vs) => vs.iter().any(|v| v.uses_tau()),
        }
    }
}

/// Source of `c_LR` for `τ = 1/(4 c_LR C_Φ)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ClrSource {
    Value(f64),
    /// `summary.json` of a cone run; its `c_lr` field is used.
    FromSummary(PathBuf),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TauConfig {
    pub c_lr: ClrSource,
    /// Defaults to the growth coefficient of the configured chain with `G`.
    #[serde(default)]
    pub c_phi: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConeSection {
    pub times: TimeGrid,
    #[serde(default)]
    pub s: f64,
    #[serde(default)]
    pub k: Option<f64>,
    #[serde(default)]
    pub distances: Option<Vec<f64>>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_probe")]
    pub probe: String,
    /// Chain lengths to rerun the same scan on for velocity stability.
    #[serde(default)]
    pub compare_lengths: Vec<usize>,
    #[serde(default)]
    pub expect: Option<ConeExpect>,
}

fn default_delta() -> f64 {
    DEFAULT_DELTA
}

fn default_probe() -> String {
    "Z".into()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConeExpect {
    /// Linear residual must not exceed this multiple of the exponential one.
    pub max_residual_ratio: f64,
    /// Largest relative spread of velocities across `compare_lengths`.
    pub max_velocity_spread: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CauchySection {
    #[serde(default)]
    pub s: TimeValue,
    pub t: TimeValue,
    pub k_list: Vec<f64>,
    #[serde(default)]
    pub l_ref: Option<f64>,
    pub nu: f64,
    pub tau: TauConfig,
    /// The slope must not exceed `−ν + slope_margin`.
    #[serde(default = "default_slope_margin")]
    pub slope_margin: f64,
}

fn default_slope_margin() -> f64 {
    0.5
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrowthSection {
    #[serde(default)]
    pub s: TimeValue,
    pub times: TimeGrid,
    pub nu: f64,
    #[serde(default)]
    pub tau: Option<TauConfig>,
    #[serde(default = "default_anchor_tol")]
    pub anchor_tolerance: f64,
    /// Bound on the RMS residual of the `ln N` fit.
    #[serde(default = "default_envelope_tol")]
    pub max_envelope_residual: f64,
}

fn default_anchor_tol() -> f64 {
    1e-10
}

fn default_envelope_tol() -> f64 {
    0.1
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadiusExpect {
    Linear,
    Superlinear,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadiusSection {
    pub times: TimeGrid,
    #[serde(default)]
    pub s: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub trend_window: Option<(f64, f64)>,
    #[serde(default)]
    pub expect: Option<RadiusExpect>,
}

/// A configured lattice system, ready for scans.
pub struct System {
    pub ctx: Arc<AlgebraContext>,
    pub chain: ZeroChain,
    pub x0: usize,
    pub observable: LatticeOperator,
    pub g: DecayFunction,
    pub f: DecayFunction,
}

impl System {
    pub fn graph(&self) -> &MetricGraph {
        self.ctx.graph()
    }

    /// `μ = min(ν_F − (2D+2), ν_G − (D+2))`.
    pub fn mu(&self) -> Result<f64> {
        mu_of(&self.f, &self.g, self.graph().dimension())
    }

    pub fn c_phi(&self) -> Result<f64> {
        let times = self.chain.sample_times(zero_chain::SAMPLES_PER_UNIT_TIME);
        Ok(self.chain.growth_coefficient(&self.g, self.x0, &times)?.c_phi)
    }

    /// `⦀Φ⦀_G` over the sampled interval.
    pub fn uniform_norm(&self) -> Result<f64> {
        let times = self.chain.sample_times(zero_chain::SAMPLES_PER_UNIT_TIME);
        self.chain.uniform_norm(&self.g, &times)
    }

    /// Resolves `τ`, reading summaries relative to `base`.
    pub fn tau(&self, cfg: &TauConfig, base: &Path) -> Result<TauValue> {
        let c_lr = match &cfg.c_lr {
            ClrSource::Value(v) => *v,
            ClrSource::FromSummary(p) => read_c_lr(&resolve_path(base, p))?,
        };
        let c_phi = match cfg.c_phi {
            Some(c) => c,
            None => self.c_phi()?,
        };
        Ok(TauValue { c_lr, c_phi, tau: tau_of(c_lr, c_phi)? })
    }

    /// Single-site matrix for a probe template such as `"Z"` or `"n"`.
    pub fn probe_matrix(&self, template: &str) -> Result<CMat> {
        let tokens: Vec<String> = template
            .split_whitespace()
            .map(|tok| match tok.split_once('.') {
                Some((head, flavor)) => format!("{head}0.{flavor}"),
                None => format!("{tok}0"),
            })
            .collect();
        let op = parse_operator(&self.ctx, &tokens.join(" "))?;
        let op = if op.support().is_empty() { op.embed(&[0])? } else { op };
        if op.support() != [0] {
            return invalid(format!("probe {template:?} is not a single-site template"));
        }
        Ok(op.into_block())
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct TauValue {
    pub c_lr: f64,
    pub c_phi: f64,
    pub tau: f64,
}

pub fn resolve_path(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn read_c_lr(path: &Path) -> Result<f64> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?;
    value
        .get("c_lr")
        .and_then(|v| v.as_f64())
        .ok_or_else(|| Error::InvalidArgument(format!("{}: no numeric `c_lr` field", path.display())))
}

impl SystemConfig {
    pub fn graph(&self, base: &Path) -> Result<MetricGraph> {
        let graph = match &self.lattice {
            LatticeConfig::Chain { length } => make_chain_capped(*length, self.site_cap)?,
            LatticeConfig::Grid { side, dim } => make_grid_capped(*side, *dim, self.site_cap)?,
            LatticeConfig::Table(t) => table_graph(t, self.site_cap)?,
            LatticeConfig::Coordinates(c) => coordinate_graph(c, self.site_cap)?,
            LatticeConfig::File { path } => {
                let path = resolve_path(base, path);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?;
                let file: GraphFile = serde_json::from_str(&text)
                    .map_err(|e| Error::InvalidArgument(format!("{}: {e}", path.display())))?;
                match file {
                    GraphFile::Table(t) => table_graph(&t, self.site_cap)?,
                    GraphFile::Coordinates(c) => coordinate_graph(&c, self.site_cap)?,
                }
            }
        };
        match self.x0 {
            Some(x0) => graph.with_x0(x0),
            None => Ok(graph),
        }
    }

    /// Builds the context, the zero-chain and the observable.
    pub fn build(&self, base: &Path) -> Result<System> {
        self.build_with_graph(self.graph(base)?)
    }

    /// Same system on a chain of another length; `x0` is kept when configured.
    pub fn build_chain(&self, length: usize) -> Result<System> {
        if !matches!(self.lattice, LatticeConfig::Chain { .. }) {
            return invalid("length comparisons need a chain lattice");
        }
        let mut other = self.clone();
        other.lattice = LatticeConfig::Chain { length };
        other.build(Path::new("."))
    }

    fn build_with_graph(&self, graph: MetricGraph) -> Result<System> {
        let x0 = graph.x0();
        let ctx = AlgebraContext::new(graph, self.backend, self.dense_cap)?;
        let (a, b) = self.interval;
        if !(a <= b) {
            return invalid(format!("interval ({a}, {b}) is reversed"));
        }
        let chain = build_model(&ctx, &self.model, x0, self.interval)?;
        let observable = match &self.observable {
            Some(s) => parse_operator(&ctx, s)?,
            None if ctx.is_fermion() => number_operator(&ctx, x0)?,
            None => LatticeOperator::pauli(&ctx, &[(x0, 'Z')])?,
        };
        self.g.validate()?;
        self.f.validate()?;
        Ok(System { ctx, chain, x0, observable, g: self.g.clone(), f: self.f.clone() })
    }
}

fn table_graph(t: &TableGraph, site_cap: usize) -> Result<MetricGraph> {
    if t.labels.len() > site_cap {
        return Err(Error::ResourceLimit(format!("{} sites exceed the site cap {site_cap}", t.labels.len())));
    }
    let x0 = t.labels.len() / 2;
    MetricGraph::from_distance_table(t.labels.clone(), t.distances.clone(), t.dimension, x0)
}

fn coordinate_graph(c: &CoordinateGraph, site_cap: usize) -> Result<MetricGraph> {
    let labels = c.labels.clone().unwrap_or_else(|| (0..c.coords.len()).map(|i| i.to_string()).collect());
    MetricGraph::from_coordinates(labels, c.coords.clone(), c.metric, c.dimension, c.coords.len() / 2, site_cap)
}

pub fn build_model(
    ctx: &Arc<AlgebraContext>,
    model: &ModelConfig,
    x0: usize,
    interval: (f64, f64),
) -> Result<ZeroChain> {
    match model {
        ModelConfig::UniformTfim { j, h } => zero_chain::uniform_tfim(ctx, *j, *h, interval),
        ModelConfig::LinearGrowthTfim { j, h, slope, center } => {
            let base = zero_chain::uniform_tfim(ctx, *j, *h, interval)?;
            zero_chain::linear_growth(&base, center.unwrap_or(x0), *slope)
        }
        ModelConfig::TimeModulatedTfim { j, h, omega } => {
            zero_chain::time_modulated_tfim(ctx, *j, *h, *omega, interval)
        }
        ModelConfig::Zero => zero_chain::zero(ctx, interval),
        ModelConfig::Terms { terms } => {
            let mut chain = ZeroChain::new(ctx, interval)?;
            for term in terms {
                let mut op = parse_operator(ctx, &term.op)?;
                if term.add_adjoint {
                    op = op.add(&op.adjoint())?;
                }
                chain.add_piece(term.site, op, term.coefficient.clone())?;
            }
            Ok(chain)
        }
    }
}

/// Parses an operator string; see the module docs for the grammar.
pub fn parse_operator(ctx: &Arc<AlgebraContext>, text: &str) -> Result<LatticeOperator> {
    let mut out = LatticeOperator::identity(ctx);
    let mut any = false;
    for tok in text.split_whitespace() {
        out = out.mul(&parse_factor(ctx, tok)?)?;
        any = true;
    }
    if !any {
        return invalid("empty operator string");
    }
    Ok(out)
}

fn parse_factor(ctx: &Arc<AlgebraContext>, tok: &str) -> Result<LatticeOperator> {
    let bad = || Error::InvalidArgument(format!("cannot parse operator factor {tok:?}"));
    let site_of = |s: &str| -> Result<usize> {
        let x: usize = s.parse().map_err(|_| bad())?;
        ctx.graph().check_site(x)?;
        Ok(x)
    };
    if ctx.is_fermion() {
        let (head, flavor) = match tok.split_once('.') {
            Some((h, f)) => (h, f.parse::<usize>().map_err(|_| bad())?),
            None => (tok, 0),
        };
        if let Some(rest) = head.strip_prefix("c+") {
            return Ok(car_generators(ctx, site_of(rest)?, flavor)?.0);
        }
        if let Some(rest) = head.strip_prefix('c') {
            return Ok(car_generators(ctx, site_of(rest)?, flavor)?.1);
        }
        if let Some(rest) = head.strip_prefix('n') {
            let x = site_of(rest)?;
            if tok.contains('.') {
                let (cr, an) = car_generators(ctx, x, flavor)?;
                return cr.mul(&an);
            }
            return number_operator(ctx, x);
        }
        return Err(bad());
    }
    let mut chars = tok.chars();
    let label = chars.next().ok_or_else(bad)?;
    if !"IXYZixyz".contains(label) {
        return Err(bad());
    }
    LatticeOperator::pauli(ctx, &[(site_of(chars.as_str())?, label)])
}
