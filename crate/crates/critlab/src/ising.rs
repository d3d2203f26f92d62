//! Ising dynamics and observables: Glauber heat-bath sweeps, Wolff
//! cluster steps, correlation functions, susceptibility scans, and
//! rescaled linear statistics.
//!
//! Small systems are validated against exact enumeration from
//! [`crate::gibbs`]; larger runs use the samplers here. The critical
//! inverse temperature of the square lattice is exposed as [`beta_c`],
//! always computed at runtime from its defining identity.

use crate::error::{Error, Result};
use crate::gibbs::{BoundaryCondition, ExactMeasure, StateSpace};
use crate::lattice::{Lattice, LatticeKind, Site};
use crate::rng::{root_rng, stream_rng, Rng};
use crate::util::{batch_stats, mean_stderr, ols_fit, BatchStat, Fit};
use rand::Rng as _;
use rayon::prelude::*;

/// Critical inverse temperature of the square-lattice nearest-neighbor
/// model: the unique β > 0 with sinh(2β) = 1, i.e. β = ln(1 + √2) / 2.
pub fn beta_c() -> f64 {
    0.5 * (1.0 + std::f64::consts::SQRT_2).ln()
}

/// Parameters of a nearest-neighbor ferromagnet on a finite lattice.
pub struct IsingParams<'a> {
    /// Inverse temperature β ≥ 0.
    pub beta: f64,
    /// Underlying lattice (grid, torus, or box).
    pub lat: &'a Lattice,
    /// Boundary condition for sites with outside neighbors.
    pub bc: BoundaryCondition,
}

impl<'a> IsingParams<'a> {
    /// Validated constructor.
    pub fn new(beta: f64, lat: &'a Lattice, bc: BoundaryCondition) -> Result<Self> {
        if !beta.is_finite() || beta < 0.0 {
            return Err(Error::invalid(format!(
                "inverse temperature must be finite and ≥ 0, got {beta}"
            )));
        }
        Ok(IsingParams { beta, lat, bc })
    }

    /// Per-site sum of fixed boundary spins adjacent to each site.
    fn ghost_field(&self) -> Result<Vec<f64>> {
        let space = StateSpace::ising();
        let mut field = vec![0.0; self.lat.n_sites()];
        for (i, slot) in field.iter_mut().enumerate() {
            for t in self.lat.outside_neighbors(i) {
                if let Some(v) = self.bc.value_at(t, &space)? {
                    *slot += v;
                }
            }
        }
        Ok(field)
    }

    /// Whether any site couples to the outside under this boundary
    /// condition.
    fn couples_to_boundary(&self) -> bool {
        if matches!(self.bc, BoundaryCondition::Free) {
            return false;
        }
        !matches!(
            self.lat.kind(),
            LatticeKind::Torus2D { .. }
                | LatticeKind::Box2D {
                    even_only: true,
                    ..
                }
        )
    }
}

/// A ±1 spin configuration aligned with a lattice's site order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpinState {
    spins: Vec<i8>,
}

impl SpinState {
    /// All spins +1.
    pub fn all_plus(n: usize) -> Self {
        SpinState { spins: vec![1; n] }
    }

    /// All spins −1.
    pub fn all_minus(n: usize) -> Self {
        SpinState { spins: vec![-1; n] }
    }

    /// Independent uniform spins.
    pub fn random(n: usize, rng: &mut Rng) -> Self {
        SpinState {
            spins: (0..n).map(|_| if rng.gen::<bool>() { 1 } else { -1 }).collect(),
        }
    }

    /// Wrap an explicit configuration; entries must be ±1.
    pub fn from_spins(spins: Vec<i8>) -> Result<Self> {
        if let Some(&bad) = spins.iter().find(|s| s.abs() != 1) {
            return Err(Error::invalid(format!("spin value must be ±1, got {bad}")));
        }
        Ok(SpinState { spins })
    }

    /// Spin vector, aligned with `lat.sites()`.
    pub fn spins(&self) -> &[i8] {
        &self.spins
    }

    /// Number of spins.
    pub fn len(&self) -> usize {
        self.spins.len()
    }

    /// Whether the configuration is empty.
    pub fn is_empty(&self) -> bool {
        self.spins.is_empty()
    }

    /// Flip spin `i` in place.
    pub fn flip(&mut self, i: usize) {
        self.spins[i] = -self.spins[i];
    }
}

/// Mean spin (Σ σ_u) / |Λ|.
pub fn magnetization(state: &SpinState) -> f64 {
    if state.spins.is_empty() {
        return 0.0;
    }
    state.spins.iter().map(|&s| s as f64).sum::<f64>() / state.spins.len() as f64
}

/// One heat-bath sweep: each site is resampled once, in site order,
/// from its conditional distribution given its neighbors and the
/// boundary field.
pub fn glauber_sweep(state: &mut SpinState, params: &IsingParams, rng: &mut Rng) -> Result<()> {
    if state.len() != params.lat.n_sites() {
        return Err(Error::invalid(format!(
            "state has {} spins but lattice has {} sites",
            state.len(),
            params.lat.n_sites()
        )));
    }
    let ghost = params.ghost_field()?;
    for i in 0..state.len() {
        let mut h = ghost[i];
        for &(j, _) in params.lat.neighbors(i) {
            h += state.spins[j] as f64;
        }
        // P(σ_i = +1 | rest) = 1 / (1 + e^{−2βh}).
        let p_plus = 1.0 / (1.0 + (-2.0 * params.beta * h).exp());
        state.spins[i] = if rng.gen::<f64>() < p_plus { 1 } else { -1 };
    }
    Ok(())
}

/// One Wolff cluster step: grow a same-spin cluster from a uniform
/// seed site, activating each boundary bond with probability
/// 1 − e^{−2β}, then flip the whole cluster. Returns the cluster size.
///
/// Only valid when no site couples to a fixed outside spin (free
/// boundary, tori, or independent-site boxes); flipping a cluster
/// against a frozen ghost would not preserve the measure.
pub fn wolff_step(state: &mut SpinState, params: &IsingParams, rng: &mut Rng) -> Result<usize> {
    if state.len() != params.lat.n_sites() {
        return Err(Error::invalid(format!(
            "state has {} spins but lattice has {} sites",
            state.len(),
            params.lat.n_sites()
        )));
    }
    if params.couples_to_boundary() {
        return Err(Error::invalid(
            "wolff_step requires a boundary-free setup (free bc or a torus)",
        ));
    }
    if state.is_empty() {
        return Err(Error::invalid("wolff_step on an empty lattice"));
    }
    let p_add = 1.0 - (-2.0 * params.beta).exp();
    let seed = rng.gen_range(0..state.len());
    let mut in_cluster = vec![false; state.len()];
    let mut stack = vec![seed];
    let mut members = vec![seed];
    in_cluster[seed] = true;
    while let Some(i) = stack.pop() {
        let si = state.spins[i];
        for &(j, _) in params.lat.neighbors(i) {
            if !in_cluster[j] && state.spins[j] == si && rng.gen::<f64>() < p_add {
                in_cluster[j] = true;
                stack.push(j);
                members.push(j);
            }
        }
    }
    for &i in &members {
        state.spins[i] = -state.spins[i];
    }
    Ok(members.len())
}

/// Which sampler drives a Monte Carlo chain.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dynamics {
    /// Systematic heat-bath sweeps.
    Glauber,
    /// Wolff cluster flips.
    Wolff,
}

/// Chain controls: `burn_in` steps are discarded, then `samples`
/// observations are recorded every `stride` steps. A step is one full
/// Glauber sweep or one Wolff cluster flip.
#[derive(Clone, Copy, Debug)]
pub struct McOptions {
    /// Steps discarded before recording.
    pub burn_in: usize,
    /// Number of recorded observations.
    pub samples: usize,
    /// Steps between consecutive observations (≥ 1).
    pub stride: usize,
    /// RNG seed for the chain.
    pub seed: u64,
}

impl Default for McOptions {
    fn default() -> Self {
        McOptions {
            burn_in: 500,
            samples: 4000,
            stride: 1,
            seed: 1,
        }
    }
}

/// Run a single chain and record an observable.
pub fn sample_chain<F>(
    params: &IsingParams,
    dynamics: Dynamics,
    mut state: SpinState,
    opts: McOptions,
    mut obs: F,
) -> Result<Vec<f64>>
where
    F: FnMut(&SpinState) -> f64,
{
    if opts.stride == 0 {
        return Err(Error::invalid("stride must be ≥ 1"));
    }
    let mut rng = root_rng(opts.seed);
    let step = |state: &mut SpinState, rng: &mut Rng| -> Result<()> {
        match dynamics {
            Dynamics::Glauber => glauber_sweep(state, params, rng)?,
            Dynamics::Wolff => {
                wolff_step(state, params, rng)?;
            }
        }
        Ok(())
    };
    for _ in 0..opts.burn_in {
        step(&mut state, &mut rng)?;
    }
    let mut out = Vec::with_capacity(opts.samples);
    for _ in 0..opts.samples {
        for _ in 0..opts.stride {
            step(&mut state, &mut rng)?;
        }
        out.push(obs(&state));
    }
    Ok(out)
}

/// ⟨σ_u σ_v⟩ under an exact enumerated measure.
pub fn two_point_exact(m: &ExactMeasure, lat: &Lattice, u: Site, v: Site) -> Result<f64> {
    let iu = lat
        .site_index(u)
        .ok_or_else(|| Error::invalid(format!("{u} is not a lattice site")))?;
    let iv = lat
        .site_index(v)
        .ok_or_else(|| Error::invalid(format!("{v} is not a lattice site")))?;
    if iu == iv {
        // σ_u² ≡ 1 identically.
        return Ok(1.0);
    }
    Ok(m.expectation(|s| s[iu] * s[iv]))
}

/// Monte Carlo ⟨σ_u σ_v⟩ with a batched-means error bar.
pub fn two_point_mc(
    params: &IsingParams,
    dynamics: Dynamics,
    opts: McOptions,
    u: Site,
    v: Site,
) -> Result<BatchStat> {
    let iu = params
        .lat
        .site_index(u)
        .ok_or_else(|| Error::invalid(format!("{u} is not a lattice site")))?;
    let iv = params
        .lat
        .site_index(v)
        .ok_or_else(|| Error::invalid(format!("{v} is not a lattice site")))?;
    let init = SpinState::all_plus(params.lat.n_sites());
    let vals = sample_chain(params, dynamics, init, opts, |s| {
        (s.spins()[iu] * s.spins()[iv]) as f64
    })?;
    batch_stats(&vals, 32.min(vals.len() / 2).max(2), |b| mean_stderr(b).0)
}

/// Axis-averaged torus correlation profile C(r) = ⟨σ_x σ_{x+r e}⟩ at
/// the given radii, sampled with Wolff steps from an all-plus start.
/// Returns (r, estimate, batched stderr) per radius.
pub fn torus_correlation_profile(
    l: i64,
    beta: f64,
    rs: &[usize],
    opts: McOptions,
) -> Result<Vec<(usize, f64, f64)>> {
    let lat = Lattice::torus(l)?;
    let params = IsingParams::new(beta, &lat, BoundaryCondition::Free)?;
    for &r in rs {
        if r == 0 || r as i64 >= l {
            return Err(Error::invalid(format!("radius {r} outside 1..{l}")));
        }
    }
    // Shift permutations: perms[k][i] = site index of site i translated
    // by rs[k] along e1, then along e2 (second half).
    let n = lat.n_sites();
    let mut perms = Vec::with_capacity(rs.len());
    for &r in rs {
        let mut p1 = vec![0usize; n];
        let mut p2 = vec![0usize; n];
        for (i, s) in lat.sites().iter().enumerate() {
            let a = Site::new((s.u1 + r as i64).rem_euclid(l), s.u2);
            let b = Site::new(s.u1, (s.u2 + r as i64).rem_euclid(l));
            p1[i] = lat
                .site_index(a)
                .ok_or_else(|| Error::invalid(format!("translated site {a} missing")))?;
            p2[i] = lat
                .site_index(b)
                .ok_or_else(|| Error::invalid(format!("translated site {b} missing")))?;
        }
        perms.push((p1, p2));
    }
    // One pass records every radius per sample; sample_chain's single
    // observable slot would force separate chains, so run the chain
    // inline here.
    let mut rng = root_rng(opts.seed);
    if opts.stride == 0 {
        return Err(Error::invalid("stride must be ≥ 1"));
    }
    let mut state = SpinState::all_plus(n);
    for _ in 0..opts.burn_in {
        wolff_step(&mut state, &params, &mut rng)?;
    }
    let mut series: Vec<Vec<f64>> = vec![Vec::with_capacity(opts.samples); rs.len()];
    for _ in 0..opts.samples {
        for _ in 0..opts.stride {
            wolff_step(&mut state, &params, &mut rng)?;
        }
        let spins = state.spins();
        for (k, (p1, p2)) in perms.iter().enumerate() {
            let mut acc = 0i64;
            for i in 0..n {
                acc += (spins[i] * spins[p1[i]]) as i64;
                acc += (spins[i] * spins[p2[i]]) as i64;
            }
            series[k].push(acc as f64 / (2 * n) as f64);
        }
    }
    let mut out = Vec::with_capacity(rs.len());
    for (k, &r) in rs.iter().enumerate() {
        let bs = batch_stats(&series[k], 32.min(opts.samples / 2).max(2), |b| {
            mean_stderr(b).0
        })?;
        out.push((r, bs.value, bs.stderr));
    }
    Ok(out)
}

/// Fit log C = intercept + slope · log r over radii in
/// `window = (r_min, r_max)` inclusive. The decay exponent is −slope.
pub fn decay_fit(profile: &[(usize, f64, f64)], window: (usize, usize)) -> Result<Fit> {
    let (lo, hi) = window;
    if lo == 0 || hi < lo {
        return Err(Error::invalid(format!("bad fit window [{lo}, {hi}]")));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for &(r, c, _) in profile {
        if r < lo || r > hi {
            continue;
        }
        if c <= 0.0 {
            return Err(Error::DegenerateStatistic(format!(
                "correlation at r = {r} is {c}; cannot take log"
            )));
        }
        xs.push((r as f64).ln());
        ys.push(c.ln());
    }
    if xs.len() < 2 {
        return Err(Error::invalid(format!(
            "fit window [{lo}, {hi}] covers {} profile points; need ≥ 2",
            xs.len()
        )));
    }
    ols_fit(&xs, &ys)
}

/// Default fit window [4, N/4] for a system of linear size N.
pub fn default_fit_window(n: usize) -> (usize, usize) {
    (4, (n / 4).max(5))
}

/// χ = |Λ| (⟨m²⟩ − ⟨|m|⟩²) from magnetization samples.
pub fn susceptibility_from_samples(ms: &[f64], n_sites: usize) -> f64 {
    let msq = ms.iter().map(|m| m * m).sum::<f64>() / ms.len().max(1) as f64;
    let mabs = ms.iter().map(|m| m.abs()).sum::<f64>() / ms.len().max(1) as f64;
    n_sites as f64 * (msq - mabs * mabs)
}

/// Finite-volume susceptibility on an l×l torus at each β, sampled
/// with Wolff dynamics. Returns (β, χ, batched stderr) per point;
/// chains for different β run in parallel with per-point seeds.
pub fn susceptibility_scan(
    l: i64,
    betas: &[f64],
    opts: McOptions,
) -> Result<Vec<(f64, f64, f64)>> {
    betas
        .par_iter()
        .enumerate()
        .map(|(k, &beta)| {
            let lat = Lattice::torus(l)?;
            let params = IsingParams::new(beta, &lat, BoundaryCondition::Free)?;
            let mut point_opts = opts;
            point_opts.seed = opts.seed.wrapping_add(k as u64);
            let init = SpinState::all_plus(lat.n_sites());
            let ms = sample_chain(&params, Dynamics::Wolff, init, point_opts, magnetization)?;
            let n_sites = lat.n_sites();
            let bs = batch_stats(&ms, 32.min(ms.len() / 2).max(2), |b| {
                susceptibility_from_samples(b, n_sites)
            })?;
            Ok((beta, susceptibility_from_samples(&ms, n_sites), bs.stderr))
        })
        .collect()
}

/// A rescaled linear statistic N^{−α} Σ_u σ_u φ(u / N).
pub struct LinearStatistic {
    /// Test function evaluated at u / N.
    pub phi: Box<dyn Fn(f64, f64) -> f64 + Sync + Send>,
    /// Rescaling exponent α.
    pub alpha: f64,
}

impl LinearStatistic {
    /// General constructor.
    pub fn new<F>(alpha: f64, phi: F) -> Self
    where
        F: Fn(f64, f64) -> f64 + Sync + Send + 'static,
    {
        LinearStatistic {
            phi: Box::new(phi),
            alpha,
        }
    }

    /// φ ≡ 1 with the given exponent.
    pub fn constant(alpha: f64) -> Self {
        LinearStatistic::new(alpha, |_, _| 1.0)
    }
}

/// The linear size N a statistic is rescaled by: box radius, torus
/// side, or the larger grid dimension.
pub fn lattice_scale(lat: &Lattice) -> f64 {
    match lat.kind() {
        LatticeKind::Box2D { n, .. } => n as f64,
        LatticeKind::Torus2D { l } => l as f64,
        LatticeKind::Grid { w, h } => w.max(h) as f64,
    }
}

/// Evaluate N^{−α} Σ_u σ_u φ(u / N) on a configuration.
pub fn linear_statistic(state: &SpinState, lat: &Lattice, stat: &LinearStatistic) -> f64 {
    let n = lattice_scale(lat);
    let sum: f64 = lat
        .sites()
        .iter()
        .zip(state.spins())
        .map(|(s, &sp)| sp as f64 * (stat.phi)(s.u1 as f64 / n, s.u2 as f64 / n))
        .sum();
    n.powf(-stat.alpha) * sum
}

/// Replica samples of a linear statistic under independent symmetric
/// spins (the infinite-temperature measure). Deterministic per
/// (seed, replica index); replicas run in parallel.
pub fn iid_linear_statistic_samples(
    lat: &Lattice,
    stat: &LinearStatistic,
    replicas: usize,
    seed: u64,
) -> Vec<f64> {
    let n = lattice_scale(lat);
    let phis: Vec<f64> = lat
        .sites()
        .iter()
        .map(|s| (stat.phi)(s.u1 as f64 / n, s.u2 as f64 / n))
        .collect();
    let scale = n.powf(-stat.alpha);
    (0..replicas)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream_rng(seed, r as u64);
            let mut acc = 0.0;
            for &phi in &phis {
                if rng.gen::<bool>() {
                    acc += phi;
                } else {
                    acc -= phi;
                }
            }
            scale * acc
        })
        .collect()
}
