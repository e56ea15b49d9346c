//! Property suites behind `verify-algebra` and `verify-lemmas`.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::algebra::{car_generators, intersection, AlgebraContext, LatticeOperator};
use crate::error::Result;
use crate::lattice::{
    make_chain, make_chain_capped, regularity_constant, summability_bound, summability_partial_sums, zeta_upper_bound,
    MetricGraph,
};
use crate::localization::{lemma_a2_sup_check, nu_lower_bound, DecayFunction, NuEstimate};
use crate::propagator::{Propagator, PropagatorPlan};
use crate::zero_chain::{linear_growth, time_modulated_tfim, uniform_tfim, ZeroChain};

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Measured quantity (an error, a ratio, a count, ...).
    pub value: f64,
    pub detail: String,
}

impl Check {
    /// Passes when `value ≤ bound`.
    pub fn at_most(name: &str, value: f64, bound: f64) -> Self {
        Check { name: name.into(), passed: value <= bound, value, detail: format!("{value:.3e} ≤ {bound:.3e}") }
    }

    pub fn within(name: &str, value: f64, lo: f64, hi: f64) -> Self {
        Check {
            name: name.into(),
            passed: (lo..=hi).contains(&value),
            value,
            detail: format!("{value:.6} in [{lo}, {hi}]"),
        }
    }

    pub fn flag(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Check { name: name.into(), passed, value: if passed { 1.0 } else { 0.0 }, detail: detail.into() }
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct SuiteReport {
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    fn push(&mut self, c: Check) {
        self.checks.push(c);
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AlgebraSuite {
    pub spin_sites: usize,
    /// Random operator pairs per region.
    pub samples: usize,
    pub regions: usize,
    pub fermion_sites: usize,
    pub flavors: usize,
    pub dynamics_sites: usize,
    pub j: f64,
    pub h: f64,
    /// Integrator tolerance; set from the run configuration.
    #[serde(skip)]
    pub tolerance: f64,
    pub dynamics_samples: usize,
    /// `(s, t, u)` for the cocycle identity.
    pub cocycle_times: [f64; 3],
    pub generator_sites: usize,
    pub omega: f64,
    pub generator_time: f64,
    /// Largest finite-difference step; the suite also uses `h/2`, `h/4`, `h/8`.
    pub generator_step: f64,
}

impl Default for AlgebraSuite {
    fn default() -> Self {
        AlgebraSuite {
            spin_sites: 6,
            samples: 100,
            regions: 10,
            fermion_sites: 3,
            flavors: 1,
            dynamics_sites: 8,
            j: 1.0,
            h: 1.0,
            tolerance: 1e-8,
            dynamics_samples: 10,
            cocycle_times: [0.0, 0.5, 1.0],
            generator_sites: 6,
            omega: 2.0,
            generator_time: 0.5,
            generator_step: 1e-2,
        }
    }
}

fn random_region<R: Rng>(n: usize, rng: &mut R) -> Vec<usize> {
    let size = rng.gen_range(1..n);
    let mut sites: Vec<usize> = (0..n).collect();
    sites.shuffle(rng);
    let mut m = sites[..size].to_vec();
    m.sort_unstable();
    m
}

/// Conditional-expectation axioms on a spin chain and on a fermion chain.
pub fn conditional_expectation_checks(cfg: &AlgebraSuite, seed: u64) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ctx = AlgebraContext::spin(make_chain(cfg.spin_sites)?, 2)?;
    let all: Vec<usize> = (0..cfg.spin_sites).collect();
    let (mut defining, mut module, mut composition, mut contraction, mut embed) = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
    for _ in 0..cfg.regions {
        let m = random_region(cfg.spin_sites, &mut rng);
        let m2 = random_region(cfg.spin_sites, &mut rng);
        for _ in 0..cfg.samples {
            let a = LatticeOperator::random(&ctx, &all, &mut rng)?;
            let b = LatticeOperator::random(&ctx, &m, &mut rng)?;
            let ea = a.conditional_expectation(&m)?;
            let lhs = a.mul(&b)?.tracial_state();
            let rhs = ea.mul(&b)?.tracial_state();
            defining = defining.max((lhs - rhs).norm());
            let c = LatticeOperator::random(&ctx, &m, &mut rng)?;
            let abc = b.mul(&a)?.mul(&c)?.conditional_expectation(&m)?;
            module = module.max(abc.distance(&b.mul(&ea)?.mul(&c)?)?);
            let nested = a.conditional_expectation(&m2)?.conditional_expectation(&m)?;
            composition = composition.max(nested.distance(&a.conditional_expectation(&intersection(&m, &m2))?)?);
            contraction = contraction.max(ea.op_norm() - a.op_norm());
            embed = embed.max((b.embed(&all)?.op_norm() - b.op_norm()).abs());
        }
    }
    let mut out = vec![
        Check::at_most("defining_property", defining, 1e-10),
        Check::at_most("module_property", module, 1e-10),
        Check::at_most("composition", composition, 1e-10),
        Check::at_most("contraction", contraction, 1e-12),
        Check::at_most("embedding_norm", embed, 1e-12),
    ];

    let fctx = AlgebraContext::fermion(make_chain(cfg.fermion_sites)?, cfg.flavors)?;
    let fall: Vec<usize> = (0..cfg.fermion_sites).collect();
    let (mut parity_ok, mut fdefining) = (true, 0.0_f64);
    for _ in 0..cfg.regions {
        let m = random_region(cfg.fermion_sites, &mut rng);
        let raw = LatticeOperator::random(&fctx, &fall, &mut rng)?;
        let even = raw.add(&raw.grading(std::f64::consts::PI))?.scale_re(0.5);
        parity_ok &= even.is_even(1e-12) && even.conditional_expectation(&m)?.is_even(1e-12);
        let b = LatticeOperator::random(&fctx, &m, &mut rng)?;
        let e = raw.conditional_expectation(&m)?;
        fdefining = fdefining.max((raw.mul(&b)?.tracial_state() - e.mul(&b)?.tracial_state()).norm());
    }
    out.push(Check::flag("parity_preservation", parity_ok, "even inputs stay even under E_M"));
    out.push(Check::at_most("fermion_defining_property", fdefining, 1e-10));
    Ok(out)
}

/// Canonical anticommutation relations and even/disjoint commutation.
pub fn car_checks(cfg: &AlgebraSuite, seed: u64) -> Result<Vec<Check>> {
    let ctx = AlgebraContext::fermion(make_chain(cfg.fermion_sites)?, cfg.flavors)?;
    let mut gens = Vec::new();
    for x in 0..cfg.fermion_sites {
        for i in 0..cfg.flavors {
            gens.push(car_generators(&ctx, x, i)?);
        }
    }
    let one = LatticeOperator::identity(&ctx);
    let mut car = 0.0_f64;
    for (p, (_, ap)) in gens.iter().enumerate() {
        for (q, (cq, aq)) in gens.iter().enumerate() {
            let want = if p == q { one.clone() } else { LatticeOperator::zero(&ctx) };
            car = car.max(ap.anticommutator(cq)?.distance(&want)?);
            car = car.max(ap.anticommutator(aq)?.op_norm());
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut disjoint = 0.0_f64;
    for _ in 0..cfg.samples {
        let m = random_region(cfg.fermion_sites, &mut rng);
        let rest: Vec<usize> = (0..cfg.fermion_sites).filter(|s| !m.contains(s)).collect();
        let raw = LatticeOperator::random(&ctx, &m, &mut rng)?;
        let even = raw.add(&raw.grading(std::f64::consts::PI))?.scale_re(0.5);
        let other = LatticeOperator::random(&ctx, &rest, &mut rng)?;
        disjoint = disjoint.max(even.commutator(&other)?.op_norm());
    }
    Ok(vec![
        Check::at_most("car_relations", car, 1e-12),
        Check::at_most("even_disjoint_commutation", disjoint, 1e-12),
    ])
}

/// Automorphism and cocycle properties of the uniform TFIM dynamics.
pub fn dynamics_checks(cfg: &AlgebraSuite, seed: u64) -> Result<Vec<Check>> {
    let ctx = AlgebraContext::spin(make_chain(cfg.dynamics_sites)?, 2)?;
    let [s, t, u] = cfg.cocycle_times;
    let lo = s.min(t).min(u);
    let hi = s.max(t).max(u);
    let chain = uniform_tfim(&ctx, cfg.j, cfg.h, (lo, hi))?;
    let prop = Propagator::new(&chain)?;
    let plan = |a: f64, b: f64| PropagatorPlan::new(&chain, a, b, cfg.tolerance);
    let (p_su, p_st, p_tu) = (plan(s, u)?, plan(s, t)?, plan(t, u)?);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut iso, mut mult, mut star, mut cocycle) = (0.0_f64, 0.0_f64, 0.0_f64, 0.0_f64);
    for _ in 0..cfg.dynamics_samples {
        let width = rng.gen_range(1..=3.min(cfg.dynamics_sites));
        let start = rng.gen_range(0..=cfg.dynamics_sites - width);
        let supp: Vec<usize> = (start..start + width).collect();
        let a = LatticeOperator::random(&ctx, &supp, &mut rng)?;
        let b = LatticeOperator::random(&ctx, &supp, &mut rng)?;
        let ea = prop.evolve(&p_su, &a)?;
        let eb = prop.evolve(&p_su, &b)?;
        iso = iso.max((ea.op_norm() - a.op_norm()).abs());
        mult = mult.max(prop.evolve(&p_su, &a.mul(&b)?)?.distance(&ea.mul(&eb)?)?);
        star = star.max(prop.evolve(&p_su, &a.adjoint())?.distance(&ea.adjoint())?);
        cocycle = cocycle.max(prop.compose(&p_st, &p_tu, &a)?.distance(&ea)?);
    }
    Ok(vec![
        Check::at_most("isometry", iso, 1e-6),
        Check::at_most("multiplicativity", mult, 1e-6),
        Check::at_most("star_compatibility", star, 1e-6),
        Check::at_most("cocycle_identity", cocycle, 1e-6),
    ])
}

/// Second-order convergence of the centered generator residual.
pub fn generator_checks(cfg: &AlgebraSuite, seed: u64) -> Result<(Vec<Check>, Vec<(f64, f64)>)> {
    let ctx = AlgebraContext::spin(make_chain(cfg.generator_sites)?, 2)?;
    let chain = time_modulated_tfim(&ctx, cfg.j, cfg.h, cfg.omega, (0.0, 2.0 * cfg.generator_time.max(0.5)))?;
    let prop = Propagator::new(&chain)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mid = cfg.generator_sites / 2;
    let supp: Vec<usize> = (mid.saturating_sub(1)..(mid + 1).min(cfg.generator_sites)).collect();
    let a = LatticeOperator::random_hermitian(&ctx, &supp, &mut rng)?;
    let steps: Vec<f64> = (0..4).map(|i| cfg.generator_step / 2f64.powi(i)).collect();
    let residuals: Vec<(f64, f64)> = steps
        .iter()
        .map(|&h| Ok((h, prop.generator_residual(cfg.generator_time, &a, h)?)))
        .collect::<Result<_>>()?;
    let checks = residuals
        .windows(2)
        .map(|w| Check::within(&format!("residual_order_h{:.2e}", w[0].0), w[0].1 / w[1].1, 3.5, 4.5))
        .collect();
    Ok((checks, residuals))
}

pub fn run_algebra_suite(cfg: &AlgebraSuite, seed: u64) -> Result<SuiteReport> {
    let mut report = SuiteReport::default();
    report.checks.extend(conditional_expectation_checks(cfg, seed)?);
    report.checks.extend(car_checks(cfg, seed.wrapping_add(1))?);
    report.checks.extend(dynamics_checks(cfg, seed.wrapping_add(2))?);
    report.checks.extend(generator_checks(cfg, seed.wrapping_add(3))?.0);
    Ok(report)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LemmaSuite {
    pub epsilon: f64,
    /// Radius of the synthetic chain for the partial sums.
    pub r_max: usize,
    /// Radius of the chain on which `C_vol` is measured for the bound.
    pub regularity_radius: usize,
    pub a2_nu_f: f64,
    pub a2_nu: f64,
    pub a2_k_max: f64,
    pub a2_density: f64,
    pub a2_max_change: f64,
    pub truncation_sites: usize,
    pub truncation_slope: f64,
    pub truncation_g_nu: f64,
    pub nu_grid: Vec<f64>,
    pub nu_true: f64,
}

impl Default for LemmaSuite {
    fn default() -> Self {
        LemmaSuite {
            epsilon: 1.0,
            r_max: 1_000_000,
            regularity_radius: 1000,
            a2_nu_f: 6.0,
            a2_nu: 4.0,
            a2_k_max: 100.0,
            a2_density: 4.0,
            a2_max_change: 0.01,
            truncation_sites: 9,
            truncation_slope: 1.0,
            truncation_g_nu: 8.0,
            nu_grid: (0..=16).map(|i| i as f64 * 0.5).collect(),
            nu_true: 3.0,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SummabilityReport {
    pub radii: Vec<f64>,
    pub sums: Vec<f64>,
    pub limit: f64,
    pub c_vol: f64,
    pub bound: f64,
}

/// Partial sums on a `(2 r_max + 1)`-site chain centred at `x0`.
pub fn summability(cfg: &LemmaSuite) -> Result<SummabilityReport> {
    let n = 2 * cfg.r_max + 1;
    let graph = make_chain_capped(n, n)?;
    let x0 = cfg.r_max;
    let mut radii = vec![0.0];
    let mut r = 1.0;
    while r <= cfg.r_max as f64 {
        radii.push(r);
        r *= 10.0;
    }
    let sums = summability_partial_sums(&graph, x0, cfg.epsilon, &radii)?;
    // 1 + 2 Σ_{k≥1} (1+k)^{−(2+ε)} on the infinite chain
    let p = 2.0 + cfg.epsilon;
    let limit = 1.0 + 2.0 * (zeta_upper_bound(p, 1_000_000) - 1.0);
    let small = make_chain(2 * cfg.regularity_radius + 1).or_else(|_| {
        let m = 2 * cfg.regularity_radius + 1;
        make_chain_capped(m, m)
    })?;
    let c_vol = regularity_constant(&small, 1, small.diameter()).c_vol;
    Ok(SummabilityReport { radii, sums, limit, c_vol, bound: summability_bound(c_vol, 1, cfg.epsilon) })
}

/// Support containment, the uniform-norm bound and the Liouvillian gap for each `k`.
pub fn truncation_contract(
    chain: &ZeroChain,
    x0: usize,
    g: &DecayFunction,
    ks: &[f64],
    a: &LatticeOperator,
) -> Result<Vec<Check>> {
    let graph = chain.context().graph();
    let times = chain.sample_times(crate::zero_chain::SAMPLES_PER_UNIT_TIME);
    let c_phi = chain.growth_coefficient(g, x0, &times)?.c_phi;
    let mut ks = ks.to_vec();
    ks.sort_by(f64::total_cmp);
    let covering = 2.0 * graph.diameter();
    if ks.last().map_or(true, |&k| k < covering) {
        ks.push(covering);
    }
    let (mut contained, mut norm_excess, mut gaps) = (true, f64::NEG_INFINITY, Vec::new());
    for &k in &ks {
        let trunc = chain.truncate(k, x0)?;
        let ball = graph.ball(x0, k)?;
        contained &= trunc.all_pieces().all(|(_, p)| p.op.support().iter().all(|s| ball.binary_search(s).is_ok()));
        let norm = if trunc.is_zero() { 0.0 } else { trunc.uniform_norm(g, &times)? };
        norm_excess = norm_excess.max(norm - c_phi * (1.0 + k / 2.0));
        gaps.push(chain.liouvillian_truncation_gap(k, x0, a, &times)?);
    }
    let monotone = gaps.windows(2).all(|w| w[1] <= w[0]);
    let last = *gaps.last().unwrap_or(&0.0);
    Ok(vec![
        Check::flag("support_containment", contained, format!("{} truncations inside B_k(x0)", ks.len())),
        Check::at_most("truncation_norm_bound", norm_excess, 1e-9),
        Check::flag("gap_monotone", monotone, format!("{} gaps, last {:.3e}", gaps.len(), last)),
        Check::at_most("gap_zero_at_cover", last, 0.0),
    ])
}

pub fn run_lemma_suite(cfg: &LemmaSuite, seed: u64) -> Result<SuiteReport> {
    let mut report = SuiteReport::default();
    let sum = summability(cfg)?;
    report.push(Check::flag(
        "summability_monotone",
        sum.sums.windows(2).all(|w| w[1] >= w[0]),
        format!("{} radii", sum.radii.len()),
    ));
    let last = *sum.sums.last().unwrap_or(&0.0);
    report.push(Check::at_most("summability_limit", (last - sum.limit).abs(), 1e-6));
    report.push(Check::at_most("summability_bound", last - sum.bound, 0.0));

    let f = DecayFunction::power_law(cfg.a2_nu_f);
    let lo = lemma_a2_sup_check(&f, cfg.a2_nu, cfg.a2_k_max, cfg.a2_density)?;
    let hi = lemma_a2_sup_check(&f, cfg.a2_nu, 2.0 * cfg.a2_k_max, cfg.a2_density)?;
    report.push(Check::at_most("lemma_a2_stability", (hi.sup - lo.sup).abs() / lo.sup, cfg.a2_max_change));

    let ctx = AlgebraContext::spin(make_chain(cfg.truncation_sites)?, 2)?;
    let x0 = cfg.truncation_sites / 2;
    let base = uniform_tfim(&ctx, 1.0, 1.0, (0.0, 1.0))?;
    let chain = linear_growth(&base, x0, cfg.truncation_slope)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let supp: Vec<usize> = (x0.saturating_sub(1)..=(x0 + 1).min(cfg.truncation_sites - 1)).collect();
    let a = LatticeOperator::random_hermitian(&ctx, &supp, &mut rng)?;
    let ks: Vec<f64> = (0..=2 * cfg.truncation_sites).map(|k| k as f64).collect();
    report.checks.extend(truncation_contract(&chain, x0, &DecayFunction::power_law(cfg.truncation_g_nu), &ks, &a)?);

    report.push(regularity_check(ctx.graph()));
    let est = nu_lower_bound(&DecayFunction::power_law(cfg.nu_true), &cfg.nu_grid, 1e4)?;
    let value = match est {
        NuEstimate::Value(v) | NuEstimate::AtLeast(v) => v,
        NuEstimate::None => f64::NAN,
    };
    let step = cfg.nu_grid.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max);
    report.push(Check::at_most("nu_lower_bound", (value - cfg.nu_true).abs(), step));
    Ok(report)
}

/// `|B_r(x)| ≤ C_vol (1+r)^D` at every site and realized radius.
pub fn regularity_check(graph: &MetricGraph) -> Check {
    let d = graph.dimension();
    let rep = regularity_constant(graph, d, graph.diameter());
    let mut worst = f64::NEG_INFINITY;
    for x in 0..graph.len() {
        for r in graph.realized_distances_from(x) {
            let count = graph.ball(x, r).map(|b| b.len()).unwrap_or(usize::MAX) as f64;
            worst = worst.max(count - rep.c_vol * (1.0 + r).powi(d as i32));
        }
    }
    Check::at_most("regularity", worst, 1e-9 * rep.c_vol)
}
