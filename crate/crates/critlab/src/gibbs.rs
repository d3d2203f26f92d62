//! Generic Gibbs measures: energy models with single-site and pair
//! terms, boundary conditions, an exact enumeration oracle, joint
//! cumulants, and a single-site Metropolis sampler.
//!
//! An energy model assigns a configuration σ : sites → S the energy
//!
//! ```text
//! H(σ) = Σ_u H_u(σ_u) + Σ_{u~v} H_{uv}(σ_u, σ_v),
//! ```
//!
//! where only singleton and pair interaction terms are supported. The
//! Gibbs measure weights σ by exp(−β H(σ)) times the reference mass of
//! each spin value (1 for discrete spins, a quadrature weight for
//! real-valued ones). Boundary conditions contribute pair terms across
//! the boundary: each edge with exactly one endpoint inside couples to
//! the fixed outside value; edges with both endpoints outside are
//! dropped.
//!
//! [`enumerate`] walks every configuration and is the exactness oracle
//! the samplers in other modules are tested against. Partition
//! functions go through log-sum-exp, so steep potentials cannot
//! underflow Z.

use rand::Rng as _;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::{Edge, Lattice, Site};
use crate::rng::Rng;
use crate::util::gauss_legendre;

/// Discrete state spaces may not exceed 2^24 joint configurations.
pub const DISCRETE_CAPACITY: u128 = 1 << 24;
/// Quadrature grids may not exceed 10^7 joint grid points.
pub const QUADRATURE_CAPACITY: u128 = 10_000_000;

/// Single-site state space: either a finite list of spin values or a
/// quadrature rule discretizing a real-line reference measure.
#[derive(Clone, Debug, PartialEq)]
pub enum StateSpace {
    /// Finite spin values, each with reference mass 1.
    Discrete(Vec<f64>),
    /// Quadrature nodes with their (positive) weights as reference mass.
    Quadrature { nodes: Vec<f64>, weights: Vec<f64> },
}

impl StateSpace {
    /// The ±1 Ising spins.
    pub fn ising() -> Self {
        StateSpace::Discrete(vec![-1.0, 1.0])
    }

    /// Potts colors 0, 1, …, q−1.
    pub fn potts(q: usize) -> Result<Self> {
        if q < 2 {
            return Err(Error::invalid(format!("Potts needs q ≥ 2, got {q}")));
        }
        Ok(StateSpace::Discrete((0..q).map(|c| c as f64).collect()))
    }

    /// Gauss–Legendre rule with `n` nodes on [−r, r].
    pub fn gauss_legendre(n: usize, r: f64) -> Result<Self> {
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::invalid(format!("quadrature radius {r} must be positive")));
        }
        if n == 0 {
            return Err(Error::invalid("quadrature order must be positive"));
        }
        let (nodes, weights) = gauss_legendre(n, -r, r);
        Ok(StateSpace::Quadrature { nodes, weights })
    }

    /// Number of single-site values.
    pub fn len(&self) -> usize {
        match self {
            StateSpace::Discrete(v) => v.len(),
            StateSpace::Quadrature { nodes, .. } => nodes.len(),
        }
    }

    /// Whether the space is empty.
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Spin values in index order.
    pub fn values(&self) -> &[f64] {
        match self {
            StateSpace::Discrete(v) => v,
            StateSpace::Quadrature { nodes, .. } => nodes,
        }
    }

    /// Reference mass of value `k`.
    pub fn mass(&self, k: usize) -> f64 {
        match self {
            StateSpace::Discrete(_) => 1.0,
            StateSpace::Quadrature { weights, .. } => weights[k],
        }
    }

    /// Index of a value, matched within 1e−9.
    pub fn index_of(&self, v: f64) -> Option<usize> {
        self.values().iter().position(|&s| (s - v).abs() < 1e-9)
    }
}

/// Boundary condition: what spins live just outside the box.
#[derive(Clone, Debug)]
pub enum BoundaryCondition {
    /// No boundary coupling.
    Free,
    /// All outside spins +1.
    Plus,
    /// All outside spins −1.
    Minus,
    /// Prescribed outside values σ̄; every outside neighbor actually
    /// touched must be present.
    Fixed(std::collections::HashMap<Site, f64>),
}

impl BoundaryCondition {
    /// The fixed value at an outside site, or `None` for free.
    pub fn value_at(&self, site: Site, space: &StateSpace) -> Result<Option<f64>> {
        let v = match self {
            BoundaryCondition::Free => return Ok(None),
            BoundaryCondition::Plus => 1.0,
            BoundaryCondition::Minus => -1.0,
            BoundaryCondition::Fixed(map) => *map.get(&site).ok_or_else(|| {
                Error::invalid(format!("fixed boundary condition missing a value at {site}"))
            })?,
        };
        if let StateSpace::Discrete(_) = space {
            if space.index_of(v).is_none() {
                return Err(Error::invalid(format!(
                    "boundary value {v} at {site} is not in the state space"
                )));
            }
        }
        Ok(Some(v))
    }
}

type SiteTerm = Box<dyn Fn(Site, f64) -> f64 + Sync + Send>;
type PairTerm = Box<dyn Fn(Edge, f64, f64) -> f64 + Sync + Send>;

/// An energy function with singleton and pair terms plus a state space.
pub struct EnergyModel {
    /// Inverse temperature multiplying the whole energy.
    pub beta: f64,
    /// Single-site state space.
    pub state_space: StateSpace,
    single_site: SiteTerm,
    pair: PairTerm,
}

impl EnergyModel {
    /// Assemble a model from raw parts. The pair term must be symmetric
    /// under endpoint exchange.
    pub fn new(
        beta: f64,
        state_space: StateSpace,
        single_site: SiteTerm,
        pair: PairTerm,
    ) -> Result<Self> {
        if !beta.is_finite() || beta < 0.0 {
            return Err(Error::invalid(format!("beta must be finite and ≥ 0, got {beta}")));
        }
        if state_space.is_empty() {
            return Err(Error::invalid("state space must be nonempty"));
        }
        Ok(EnergyModel {
            beta,
            state_space,
            single_site,
            pair,
        })
    }

    /// Ferromagnetic Ising model: H = −Σ σ_u σ_v on ±1 spins.
    pub fn ising(beta: f64) -> Result<Self> {
        EnergyModel::new(
            beta,
            StateSpace::ising(),
            Box::new(|_, _| 0.0),
            Box::new(|_, s, t| -s * t),
        )
    }

    /// Ferromagnetic q-state Potts model: H = −Σ 1{σ_u = σ_v}.
    pub fn potts(beta: f64, q: usize) -> Result<Self> {
        EnergyModel::new(
            beta,
            StateSpace::potts(q)?,
            Box::new(|_, _| 0.0),
            Box::new(|_, s, t| if s == t { -1.0 } else { 0.0 }),
        )
    }

    /// Lattice Φ⁴ model at β = 1 with site potential
    /// V(φ) = (g/4)φ⁴ + (ν/2)φ² and pair term |φ_u − φ_v|², on the
    /// given quadrature space.
    pub fn phi4_with_space(g: f64, nu: f64, space: StateSpace) -> Result<Self> {
        if !(g.is_finite() && g > 0.0) || !nu.is_finite() {
            return Err(Error::invalid(format!("need g > 0 and finite ν, got g={g}, ν={nu}")));
        }
        EnergyModel::new(
            1.0,
            space,
            Box::new(move |_, p| 0.25 * g * p.powi(4) + 0.5 * nu * p * p),
            Box::new(|_, s, t| (s - t) * (s - t)),
        )
    }

    /// Φ⁴ with a Gauss–Legendre space (default 32 nodes) on an adaptive
    /// range that covers everything within e⁻⁴⁶ of the potential minimum.
    pub fn phi4(g: f64, nu: f64, nodes: usize) -> Result<Self> {
        let r = phi4_range(g, nu)?;
        EnergyModel::phi4_with_space(g, nu, StateSpace::gauss_legendre(nodes, r)?)
    }

    /// Φ⁴ in the single-parameter form V(σ) = σ⁴ − ασ², i.e. g = 4 and
    /// ν = −2α.
    pub fn phi4_alpha(alpha: f64, nodes: usize) -> Result<Self> {
        EnergyModel::phi4(4.0, -2.0 * alpha, nodes)
    }

    /// Single-site energy term.
    pub fn site_energy(&self, u: Site, s: f64) -> f64 {
        (self.single_site)(u, s)
    }

    /// Pair energy term.
    pub fn pair_energy(&self, e: Edge, s: f64, t: f64) -> f64 {
        (self.pair)(e, s, t)
    }
}

/// Half-width of a quadrature range for the Φ⁴ potential: extends past
/// the double-well minima until the Boltzmann factor is below e⁻⁴⁶
/// relative to the minimum.
pub fn phi4_range(g: f64, nu: f64) -> Result<f64> {
    if !(g.is_finite() && g > 0.0) || !nu.is_finite() {
        return Err(Error::invalid(format!("need g > 0 and finite ν, got g={g}, ν={nu}")));
    }
    let v = |p: f64| 0.25 * g * p.powi(4) + 0.5 * nu * p * p;
    let well = if nu < 0.0 { (-nu / g).sqrt() } else { 0.0 };
    let v_min = v(well);
    let mut r = (well + 1.0).max(1.0);
    while v(r) - v_min < 46.0 {
        r *= 1.25;
    }
    Ok(r)
}

/// Exact Gibbs measure over all |S|^n configurations.
///
/// States are indexed 0 .. |S|^n − 1 in mixed radix: digit i (the value
/// index at the lattice's i-th site) is `(idx / |S|^i) % |S|`.
pub struct ExactMeasure {
    values: Vec<f64>,
    n_sites: usize,
    probs: Vec<f64>,
    log_z: f64,
}

impl std::fmt::Debug for ExactMeasure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExactMeasure")
            .field("n_sites", &self.n_sites)
            .field("n_states", &self.probs.len())
            .field("log_z", &self.log_z)
            .finish()
    }
}

/// Edges with both endpoints among the lattice sites, as index pairs.
fn coupling_edges(lat: &Lattice) -> Vec<(usize, usize, Edge)> {
    lat.edges()
        .iter()
        .filter_map(|&e| match (lat.site_index(e.a), lat.site_index(e.b)) {
            (Some(ia), Some(ib)) => Some((ia, ib, e)),
            _ => None,
        })
        .collect()
}

/// Boundary ghost couplings as (inside site index, edge, fixed value).
fn ghost_edges(
    lat: &Lattice,
    bc: &BoundaryCondition,
    space: &StateSpace,
) -> Result<Vec<(usize, Edge, f64)>> {
    let mut out = Vec::new();
    for i in 0..lat.n_sites() {
        for t in lat.outside_neighbors(i) {
            if let Some(v) = bc.value_at(t, space)? {
                out.push((i, Edge::new(lat.sites()[i], t), v));
            }
        }
    }
    Ok(out)
}

fn joint_capacity(s: usize, n: usize, cap: u128) -> Result<usize> {
    let mut total: u128 = 1;
    for _ in 0..n {
        total = total
            .checked_mul(s as u128)
            .ok_or_else(|| Error::capacity("joint state space overflows"))?;
        if total > cap {
            return Err(Error::capacity(format!(
                "joint state space {s}^{n} exceeds the capacity of {cap}"
            )));
        }
    }
    Ok(total as usize)
}

/// Enumerate the exact Gibbs measure of `model` on `lat` under `bc`.
pub fn enumerate(model: &EnergyModel, lat: &Lattice, bc: &BoundaryCondition) -> Result<ExactMeasure> {
    let space = &model.state_space;
    let vals = space.values().to_vec();
    let s = vals.len();
    let cap = match space {
        StateSpace::Discrete(_) => DISCRETE_CAPACITY,
        StateSpace::Quadrature { .. } => QUADRATURE_CAPACITY,
    };
    let n = lat.n_sites();
    let total = joint_capacity(s, n, cap)?;
    let couplings = coupling_edges(lat);
    let ghosts = ghost_edges(lat, bc, space)?;
    let log_mass: Vec<f64> = (0..s).map(|k| space.mass(k).ln()).collect();
    let sites = lat.sites();
    let beta = model.beta;

    let log_w: Vec<f64> = (0..total)
        .into_par_iter()
        .map_init(
            || vec![0usize; n],
            |digits, idx| {
                let mut rest = idx;
                for d in digits.iter_mut() {
                    *d = rest % s;
                    rest /= s;
                }
                let mut h = 0.0;
                let mut lm = 0.0;
                for i in 0..n {
                    h += model.site_energy(sites[i], vals[digits[i]]);
                    lm += log_mass[digits[i]];
                }
                for &(ia, ib, e) in &couplings {
                    h += model.pair_energy(e, vals[digits[ia]], vals[digits[ib]]);
                }
                for &(i, e, v) in &ghosts {
                    h += model.pair_energy(e, vals[digits[i]], v);
                }
                lm - beta * h
            },
        )
        .collect();

    measure_from_log_weights(vals, n, log_w)
}

/// Normalize unnormalized log-weights into an [`ExactMeasure`].
///
/// Slot `i` of a joint state is digit `i` of the state index in base
/// `values.len()` (little-endian), matching [`ExactMeasure::decode`].
/// This is the shared back end of Gibbs enumeration and of other exact
/// measures (e.g. random-cluster weights over edge occupations).
pub fn measure_from_log_weights(
    values: Vec<f64>,
    n_slots: usize,
    log_w: Vec<f64>,
) -> Result<ExactMeasure> {
    let s = values.len();
    if s == 0 {
        return Err(Error::invalid("measure needs a nonempty value set"));
    }
    let expected = (s as u128)
        .checked_pow(n_slots as u32)
        .ok_or_else(|| Error::capacity("joint state space overflows"))?;
    if log_w.len() as u128 != expected {
        return Err(Error::invalid(format!(
            "{} log-weights for a {s}^{n_slots} state space",
            log_w.len()
        )));
    }
    let max_lw = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max_lw.is_finite() {
        return Err(Error::NumericRange(
            "all weights vanished or diverged; Z is not representable".into(),
        ));
    }
    let z_scaled: f64 = log_w.iter().map(|lw| (lw - max_lw).exp()).sum();
    let log_z = max_lw + z_scaled.ln();
    let probs: Vec<f64> = log_w.iter().map(|lw| (lw - log_z).exp()).collect();
    Ok(ExactMeasure {
        values,
        n_sites: n_slots,
        probs,
        log_z,
    })
}

impl ExactMeasure {
    /// Number of joint states.
    pub fn n_states(&self) -> usize {
        self.probs.len()
    }

    /// Number of sites.
    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    /// log Z (in the reference-mass normalization).
    pub fn log_z(&self) -> f64 {
        self.log_z
    }

    /// Probability of joint state `idx`.
    pub fn prob(&self, idx: usize) -> f64 {
        self.probs[idx]
    }

    /// Decode state `idx` into per-site spin values.
    pub fn decode(&self, idx: usize, out: &mut [f64]) {
        let s = self.values.len();
        let mut rest = idx;
        for slot in out.iter_mut() {
            *slot = self.values[rest % s];
            rest /= s;
        }
    }

    /// E[obs(σ)].
    pub fn expectation<F>(&self, obs: F) -> f64
    where
        F: Fn(&[f64]) -> f64 + Sync,
    {
        (0..self.probs.len())
            .into_par_iter()
            .map_init(
                || vec![0.0; self.n_sites],
                |buf, idx| {
                    self.decode(idx, buf);
                    obs(buf) * self.probs[idx]
                },
            )
            .sum()
    }

    /// Joint cumulant κ(f₁, …, f_k) for 1 ≤ k ≤ 4 functionals, via the
    /// Möbius sum over set partitions of the joint moments.
    pub fn joint_cumulant(&self, obs: &[&(dyn Fn(&[f64]) -> f64 + Sync)]) -> Result<f64> {
        let k = obs.len();
        if k == 0 || k > 4 {
            return Err(Error::invalid(format!("joint cumulant needs 1–4 observables, got {k}")));
        }
        // One pass computes every nonempty-subset moment E[∏_{i∈T} f_i].
        let n_masks = (1usize << k) - 1;
        let moments: Vec<f64> = (0..self.probs.len())
            .into_par_iter()
            .map_init(
                || (vec![0.0; self.n_sites], vec![0.0; k]),
                |(buf, fv), idx| {
                    self.decode(idx, buf);
                    for (i, f) in obs.iter().enumerate() {
                        fv[i] = f(buf);
                    }
                    let p = self.probs[idx];
                    let mut row = vec![0.0; n_masks];
                    for (m, slot) in row.iter_mut().enumerate() {
                        let mask = m + 1;
                        let mut prod = 1.0;
                        for (i, &v) in fv.iter().enumerate() {
                            if mask & (1 << i) != 0 {
                                prod *= v;
                            }
                        }
                        *slot = p * prod;
                    }
                    row
                },
            )
            .reduce(
                || vec![0.0; n_masks],
                |mut a, b| {
                    for (x, y) in a.iter_mut().zip(b) {
                        *x += y;
                    }
                    a
                },
            );
        Ok(cumulant_from_moments(k, |mask| moments[mask as usize - 1]))
    }
}

/// All set partitions of {0, …, k−1}, each block as a bitmask.
pub fn set_partitions(k: usize) -> Vec<Vec<u32>> {
    assert!(k >= 1 && k <= 8, "partition enumeration is for small k");
    // Restricted growth strings: a[0] = 0, a[i] ≤ max(a[0..i]) + 1.
    let mut out = Vec::new();
    let mut a = vec![0usize; k];
    loop {
        let blocks = a.iter().copied().max().unwrap() + 1;
        let mut masks = vec![0u32; blocks];
        for (i, &b) in a.iter().enumerate() {
            masks[b] |= 1 << i;
        }
        out.push(masks);
        // Next restricted growth string.
        let mut i = k;
        loop {
            if i == 1 {
                return out;
            }
            i -= 1;
            let cap = a[..i].iter().copied().max().unwrap() + 1;
            if a[i] < cap {
                a[i] += 1;
                for slot in a.iter_mut().skip(i + 1) {
                    *slot = 0;
                }
                break;
            }
            a[i] = 0;
        }
    }
}

/// κ(f₁,…,f_k) from a subset-moment oracle: `moment(mask)` must return
/// E[∏_{i∈mask} f_i] for every nonempty mask ⊆ {0,…,k−1}.
pub fn cumulant_from_moments(k: usize, moment: impl Fn(u32) -> f64) -> f64 {
    const FACT: [f64; 8] = [1.0, 1.0, 2.0, 6.0, 24.0, 120.0, 720.0, 5040.0];
    let mut kappa = 0.0;
    for partition in set_partitions(k) {
        let b = partition.len();
        let sign = if (b - 1) % 2 == 0 { 1.0 } else { -1.0 };
        let mut prod = 1.0;
        for &mask in &partition {
            prod *= moment(mask);
        }
        kappa += sign * FACT[b - 1] * prod;
    }
    kappa
}

/// Joint cumulant of ≤ 4 functionals from samples: `rows[r]` holds the
/// k functional values of replica r. Moments are empirical.
pub fn joint_cumulant_from_samples(rows: &[Vec<f64>]) -> Result<f64> {
    if rows.is_empty() {
        return Err(Error::invalid("no samples"));
    }
    let k = rows[0].len();
    if k == 0 || k > 4 {
        return Err(Error::invalid(format!("joint cumulant needs 1–4 observables, got {k}")));
    }
    if rows.iter().any(|r| r.len() != k) {
        return Err(Error::invalid("ragged sample rows"));
    }
    let n = rows.len() as f64;
    let n_masks = (1usize << k) - 1;
    let mut moments = vec![0.0; n_masks];
    for row in rows {
        for (m, slot) in moments.iter_mut().enumerate() {
            let mask = m + 1;
            let mut prod = 1.0;
            for (i, &v) in row.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    prod *= v;
                }
            }
            *slot += prod;
        }
    }
    for slot in &mut moments {
        *slot /= n;
    }
    Ok(cumulant_from_moments(k, |mask| moments[mask as usize - 1]))
}

/// Single-site Metropolis chain targeting the Gibbs measure.
///
/// Each elementary step picks a uniform site and a uniform candidate
/// value and accepts with probability min(1, target ratio), where the
/// target includes the reference mass. Moves within the state space
/// only; deterministic given the seed.
pub struct MetropolisChain<'a> {
    model: &'a EnergyModel,
    lat: &'a Lattice,
    idx: Vec<usize>,
    ghosts_by_site: Vec<Vec<(Edge, f64)>>,
    rng: Rng,
    accepted: u64,
    proposed: u64,
}

impl<'a> MetropolisChain<'a> {
    /// Start a chain at `init` (validated against the state space).
    pub fn new(
        model: &'a EnergyModel,
        lat: &'a Lattice,
        bc: &BoundaryCondition,
        init: &[f64],
        seed: u64,
    ) -> Result<Self> {
        if init.len() != lat.n_sites() {
            return Err(Error::invalid(format!(
                "init has {} values for {} sites",
                init.len(),
                lat.n_sites()
            )));
        }
        let idx = init
            .iter()
            .map(|&v| {
                model.state_space.index_of(v).ok_or_else(|| {
                    Error::invalid(format!("initial value {v} is not in the state space"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut ghosts_by_site = vec![Vec::new(); lat.n_sites()];
        for (i, e, v) in ghost_edges(lat, bc, &model.state_space)? {
            ghosts_by_site[i].push((e, v));
        }
        Ok(MetropolisChain {
            model,
            lat,
            idx,
            ghosts_by_site,
            rng: crate::rng::root_rng(seed),
            accepted: 0,
            proposed: 0,
        })
    }

    /// Current spin values per site.
    pub fn state_values(&self) -> Vec<f64> {
        let vals = self.model.state_space.values();
        self.idx.iter().map(|&k| vals[k]).collect()
    }

    /// Current value indices per site.
    pub fn state_indices(&self) -> &[usize] {
        &self.idx
    }

    /// Force the chain into a given state (for tests and restarts).
    pub fn set_state(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.idx.len() {
            return Err(Error::invalid("state length mismatch"));
        }
        self.idx = values
            .iter()
            .map(|&v| {
                self.model.state_space.index_of(v).ok_or_else(|| {
                    Error::invalid(format!("value {v} is not in the state space"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(())
    }

    /// Log of the target-density ratio for moving site `i` to value
    /// index `new`: log w(σ') − log w(σ). This is the quantity the
    /// acceptance rule exponentiates; exposed so tests can compare it
    /// against the enumeration oracle.
    pub fn log_weight_delta(&self, i: usize, new: usize) -> f64 {
        let space = &self.model.state_space;
        let vals = space.values();
        let old = self.idx[i];
        let site = self.lat.sites()[i];
        let (vo, vn) = (vals[old], vals[new]);
        let mut dh = self.model.site_energy(site, vn) - self.model.site_energy(site, vo);
        for &(j, ei) in self.lat.neighbors(i) {
            let e = self.lat.edges()[ei];
            let vj = vals[self.idx[j]];
            // Respect the edge's endpoint order when calling the term.
            let (new_term, old_term) = if e.a == site {
                (
                    self.model.pair_energy(e, vn, vj),
                    self.model.pair_energy(e, vo, vj),
                )
            } else {
                (
                    self.model.pair_energy(e, vj, vn),
                    self.model.pair_energy(e, vj, vo),
                )
            };
            dh += new_term - old_term;
        }
        for &(e, v) in &self.ghosts_by_site[i] {
            dh += self.model.pair_energy(e, vn, v) - self.model.pair_energy(e, vo, v);
        }
        let dmass = (space.mass(new) / space.mass(old)).ln();
        -self.model.beta * dh + dmass
    }

    /// One elementary Metropolis step.
    pub fn step(&mut self) {
        let n = self.idx.len();
        let s = self.model.state_space.len();
        let i = self.rng.gen_range(0..n);
        let new = self.rng.gen_range(0..s);
        self.proposed += 1;
        let log_ratio = self.log_weight_delta(i, new);
        if log_ratio >= 0.0 || self.rng.gen::<f64>() < log_ratio.exp() {
            self.idx[i] = new;
            self.accepted += 1;
        }
    }

    /// One sweep = one elementary step per site.
    pub fn sweep(&mut self) {
        for _ in 0..self.idx.len() {
            self.step();
        }
    }

    /// Fraction of proposals accepted so far.
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            return 0.0;
        }
        self.accepted as f64 / self.proposed as f64
    }
}

/// Convenience driver: run `sweeps` sweeps after `burn_in`, recording
/// `obs` once per sweep.
pub fn metropolis_chain(
    model: &EnergyModel,
    lat: &Lattice,
    bc: &BoundaryCondition,
    init: &[f64],
    burn_in: usize,
    sweeps: usize,
    seed: u64,
    obs: impl Fn(&[f64]) -> f64,
) -> Result<Vec<f64>> {
    if sweeps == 0 {
        return Err(Error::invalid("need at least one sweep"));
    }
    let mut chain = MetropolisChain::new(model, lat, bc, init, seed)?;
    for _ in 0..burn_in {
        chain.sweep();
    }
    let mut out = Vec::with_capacity(sweeps);
    for _ in 0..sweeps {
        chain.sweep();
        out.push(obs(&chain.state_values()));
    }
    Ok(out)
}
