//! Real-field Φ⁴ workbench: a width-tuned Metropolis sampler, exact
//! block-spin laws, mesoscopic field statistics, Gaussianity
//! diagnostics, and the lattice Gaussian free field.
//!
//! # Conventions
//!
//! A field attaches a real value φ_u to every lattice site. The energy
//! at inverse temperature β = 1 is
//!
//! ```text
//! H(φ) = Σ_u [ (g/4)·φ_u⁴ + (ν/2)·φ_u² ]  +  J·Σ_{u~v} (φ_u − φ_v)²
//! ```
//!
//! with gradient coupling J ≥ 0 (default 1). These are exactly the
//! site/pair terms of [`crate::gibbs::EnergyModel::phi4`], so the
//! quadrature enumeration there is the exactness oracle for the
//! sampler here. Boundary conditions contribute ghost pair terms
//! (φ_u − v̄)² for every outside neighbor with a fixed value v̄.
//!
//! The equivalent single-site form V(σ) = σ⁴ − ασ² used in
//! renormalization arguments is the point (g, ν) = (4, −2α); both
//! parametrizations are provided and [`Phi4Params::from_alpha`]
//! documents the conversion.
//!
//! # What lives here
//!
//! * [`Phi4Chain`] — site-sweep Metropolis with a symmetric uniform
//!   proposal whose width is auto-tuned into a 30–50% acceptance
//!   window during warm-up and then frozen.
//! * [`block_spin_law`] — the exact law of δ·Σᵢsᵢ for K coupled ±1
//!   spins, by enumeration of all 2^K patterns (Gray-code sweep, so
//!   K = [`BLOCK_SPIN_CAPACITY`] stays cheap).
//! * [`xi_statistic`] — mesoscopic linear statistics Σ_u φ_u f(u/M),
//!   optionally normalized to unit sample variance.
//! * [`gaussianity_report`] — cumulant-based normality diagnostics
//!   with batched-means error bars.
//! * [`gff_sample`] — the discrete Gaussian free field on a torus by
//!   spectral synthesis in the real Fourier eigenbasis, with exact
//!   spectral variance/covariance companions.

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::gibbs::BoundaryCondition;
use crate::lattice::{Lattice, Site};
use crate::rng::{root_rng, standard_normal, Rng};
use crate::util::{batch_stats, composite_midpoint, BatchStat};

/// Block-spin laws enumerate 2^K spin patterns; K may not exceed this.
pub const BLOCK_SPIN_CAPACITY: usize = 22;
/// Minimum sample count accepted by [`gaussianity_report`].
pub const GAUSSIANITY_MIN_SAMPLES: usize = 1_000;
/// Batch count for batched-means error bars in reports.
pub const GAUSSIANITY_BATCHES: usize = 32;
/// Free-field synthesis is O(L⁴) per sample; the torus side is capped.
pub const GFF_SIDE_CAPACITY: usize = 64;
/// Acceptance window targeted when tuning the proposal width.
pub const TUNE_ACCEPTANCE_WINDOW: (f64, f64) = (0.30, 0.50);

// ---------------------------------------------------------------------------
// Parameters
// ---------------------------------------------------------------------------

/// Parameters of a Φ⁴ field on a finite lattice.
///
/// Validity: g ≥ 0 and finite; ν finite; J ≥ 0 and finite; and the
/// single-site potential must confine (g > 0, or g = 0 with ν > 0 —
/// the free massive field). The g = 0, ν ≤ 0 combination has no
/// normalizable Gibbs measure and is rejected.
pub struct Phi4Params<'a> {
    /// Quartic coupling g ≥ 0 (site term (g/4)·φ⁴).
    pub g: f64,
    /// Mass-like coefficient ν (site term (ν/2)·φ²).
    pub nu: f64,
    /// Gradient coupling J ≥ 0 multiplying Σ (φ_u − φ_v)².
    pub pair_coupling: f64,
    /// The lattice carrying the field.
    pub lat: &'a Lattice,
    /// Boundary condition; `Plus`/`Minus` pin outside values to ±1.
    pub bc: BoundaryCondition,
}

impl<'a> Phi4Params<'a> {
    /// Standard parameters with gradient coupling J = 1.
    pub fn new(g: f64, nu: f64, lat: &'a Lattice, bc: BoundaryCondition) -> Result<Self> {
        Phi4Params::with_pair_coupling(g, nu, 1.0, lat, bc)
    }

    /// Parameters with an explicit gradient coupling (J = 0 decouples
    /// the sites, which is how the exact-Gaussian marginal is tested).
    pub fn with_pair_coupling(
        g: f64,
        nu: f64,
        pair_coupling: f64,
        lat: &'a Lattice,
        bc: BoundaryCondition,
    ) -> Result<Self> {
        if !g.is_finite() || g < 0.0 {
            return Err(Error::invalid(format!("quartic coupling must be finite and ≥ 0, got {g}")));
        }
        if !nu.is_finite() {
            return Err(Error::invalid(format!("mass coefficient must be finite, got {nu}")));
        }
        if !pair_coupling.is_finite() || pair_coupling < 0.0 {
            return Err(Error::invalid(format!(
                "gradient coupling must be finite and ≥ 0, got {pair_coupling}"
            )));
        }
        if g == 0.0 && nu <= 0.0 {
            return Err(Error::invalid(format!(
                "g = 0 needs ν > 0 for a normalizable field, got ν = {nu}"
            )));
        }
        Ok(Phi4Params { g, nu, pair_coupling, lat, bc })
    }

    /// The α-parametrization V(σ) = σ⁴ − ασ², i.e. (g, ν) = (4, −2α).
    pub fn from_alpha(alpha: f64, lat: &'a Lattice, bc: BoundaryCondition) -> Result<Self> {
        if !alpha.is_finite() {
            return Err(Error::invalid(format!("alpha must be finite, got {alpha}")));
        }
        Phi4Params::new(4.0, -2.0 * alpha, lat, bc)
    }

    /// The α such that the site potential is σ⁴ − ασ², if the quartic
    /// coefficient matches that normalization (g = 4); `None` otherwise.
    pub fn alpha_form(&self) -> Option<f64> {
        if self.g == 4.0 {
            Some(-0.5 * self.nu)
        } else {
            None
        }
    }

    /// Single-site potential (g/4)·φ⁴ + (ν/2)·φ².
    pub fn site_potential(&self, phi: f64) -> f64 {
        0.25 * self.g * phi.powi(4) + 0.5 * self.nu * phi * phi
    }

    /// Total energy of a field (site-indexed values), including ghost
    /// pair terms from the boundary condition.
    pub fn energy(&self, values: &[f64]) -> Result<f64> {
        if values.len() != self.lat.n_sites() {
            return Err(Error::invalid(format!(
                "field has {} values for {} sites",
                values.len(),
                self.lat.n_sites()
            )));
        }
        let mut h = values.iter().map(|&v| self.site_potential(v)).sum::<f64>();
        for e in self.lat.edges() {
            let a = self.lat.site_index(e.a).expect("edge endpoint indexed");
            let b = self.lat.site_index(e.b).expect("edge endpoint indexed");
            let d = values[a] - values[b];
            h += self.pair_coupling * d * d;
        }
        for (i, ghosts) in boundary_ghosts(self.lat, &self.bc)?.iter().enumerate() {
            for &v in ghosts {
                let d = values[i] - v;
                h += self.pair_coupling * d * d;
            }
        }
        Ok(h)
    }
}

/// Fixed outside values seen by each site: `out[i]` lists the ghost
/// values of the outside neighbors of site `i` (empty under `Free`).
///
/// `Plus`/`Minus` pin ghosts at ±1 — for a real field any finite value
/// is admissible, so no state-space membership check applies.
fn boundary_ghosts(lat: &Lattice, bc: &BoundaryCondition) -> Result<Vec<Vec<f64>>> {
    let mut out = vec![Vec::new(); lat.n_sites()];
    for (i, slot) in out.iter_mut().enumerate() {
        for t in lat.outside_neighbors(i) {
            let v = match bc {
                BoundaryCondition::Free => continue,
                BoundaryCondition::Plus => 1.0,
                BoundaryCondition::Minus => -1.0,
                BoundaryCondition::Fixed(map) => *map.get(&t).ok_or_else(|| {
                    Error::invalid(format!("fixed boundary condition missing a value at {t}"))
                })?,
            };
            if !v.is_finite() {
                return Err(Error::invalid(format!("boundary value at {t} is not finite")));
            }
            slot.push(v);
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Metropolis chain
// ---------------------------------------------------------------------------

/// Site-sweep Metropolis chain for a Φ⁴ field.
///
/// A sweep proposes, at every site in index order, the move
/// φ ↦ φ + U(−w, w) and accepts with probability min(1, e^{−ΔH}).
/// The proposal is symmetric, so this is plain Metropolis and the
/// invariant law is the Gibbs measure of [`Phi4Params`]. The width w
/// is either supplied or tuned with [`Phi4Chain::tune_width`].
pub struct Phi4Chain<'a> {
    params: &'a Phi4Params<'a>,
    ghosts: Vec<Vec<f64>>,
    values: Vec<f64>,
    width: f64,
    rng: Rng,
    accepted: u64,
    proposed: u64,
}

impl<'a> Phi4Chain<'a> {
    /// Start a chain from the zero field with proposal width `width`.
    pub fn new(params: &'a Phi4Params<'a>, width: f64, seed: u64) -> Result<Self> {
        if !width.is_finite() || width <= 0.0 {
            return Err(Error::invalid(format!("proposal width must be > 0, got {width}")));
        }
        Ok(Phi4Chain {
            ghosts: boundary_ghosts(params.lat, &params.bc)?,
            values: vec![0.0; params.lat.n_sites()],
            params,
            width,
            rng: root_rng(seed),
            accepted: 0,
            proposed: 0,
        })
    }

    /// Current field values, site-indexed.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Current proposal width.
    pub fn width(&self) -> f64 {
        self.width
    }

    /// Fraction of all proposals accepted so far.
    pub fn acceptance_rate(&self) -> f64 {
        if self.proposed == 0 {
            return 0.0;
        }
        self.accepted as f64 / self.proposed as f64
    }

    /// Energy change of moving site `i` to `new`: H(φ') − H(φ).
    ///
    /// Only the site potential at `i` and the pair terms touching `i`
    /// (lattice edges and boundary ghosts) move; everything else
    /// cancels, which is what makes the sweep O(degree) per site.
    pub fn energy_delta(&self, i: usize, new: f64) -> f64 {
        let old = self.values[i];
        let mut dh = self.params.site_potential(new) - self.params.site_potential(old);
        let j = self.params.pair_coupling;
        for &(nbr, _) in self.params.lat.neighbors(i) {
            let v = self.values[nbr];
            dh += j * ((new - v) * (new - v) - (old - v) * (old - v));
        }
        for &v in &self.ghosts[i] {
            dh += j * ((new - v) * (new - v) - (old - v) * (old - v));
        }
        dh
    }

    /// One sweep (one proposal per site, in site order). Returns the
    /// number of accepted moves this sweep.
    pub fn sweep(&mut self) -> usize {
        let mut acc = 0;
        for i in 0..self.values.len() {
            let old = self.values[i];
            let new = old + self.rng.gen_range(-self.width..self.width);
            self.proposed += 1;
            let dh = self.energy_delta(i, new);
            if dh <= 0.0 || self.rng.gen::<f64>() < (-dh).exp() {
                self.values[i] = new;
                self.accepted += 1;
                acc += 1;
            }
        }
        acc
    }

    /// Tune the proposal width into [`TUNE_ACCEPTANCE_WINDOW`].
    ///
    /// Runs rounds of `sweeps_per_round` sweeps; after each round the
    /// width is multiplied by 1.25 if acceptance was above the window
    /// (moves too timid) or divided by 1.25 if below. Stops as soon as
    /// a round lands inside the window and returns the frozen width.
    /// Fails with a convergence error if `max_rounds` rounds never
    /// land (acceptance is monotone in the width for these densities,
    /// so this only happens with absurd inputs).
    pub fn tune_width(&mut self, sweeps_per_round: usize, max_rounds: usize) -> Result<f64> {
        if sweeps_per_round == 0 || max_rounds == 0 {
            return Err(Error::invalid("tuning needs ≥ 1 sweep per round and ≥ 1 round"));
        }
        let (lo, hi) = TUNE_ACCEPTANCE_WINDOW;
        let proposals = (sweeps_per_round * self.values.len()) as f64;
        for _ in 0..max_rounds {
            let mut acc = 0usize;
            for _ in 0..sweeps_per_round {
                acc += self.sweep();
            }
            let rate = acc as f64 / proposals;
            if rate > hi {
                self.width *= 1.25;
            } else if rate < lo {
                self.width /= 1.25;
            } else {
                return Ok(self.width);
            }
        }
        Err(Error::ConvergenceFailure(format!(
            "proposal width tuning left the {:?} acceptance window after {} rounds (width {})",
            TUNE_ACCEPTANCE_WINDOW, max_rounds, self.width
        )))
    }
}

/// Options for a sampling run of [`phi4_samples`].
#[derive(Debug, Clone, Copy)]
pub struct Phi4RunOptions {
    /// Sweeps discarded after tuning and before recording.
    pub burn_in: usize,
    /// Number of recorded field snapshots.
    pub samples: usize,
    /// Sweeps between consecutive snapshots (≥ 1).
    pub stride: usize,
    /// RNG seed for the chain.
    pub seed: u64,
    /// Proposal width; `None` auto-tunes during warm-up, then freezes.
    pub width: Option<f64>,
}

impl Default for Phi4RunOptions {
    fn default() -> Self {
        Phi4RunOptions { burn_in: 500, samples: 2_000, stride: 1, seed: 0, width: None }
    }
}

/// Run a tuned Metropolis chain and record full field snapshots.
///
/// With `width: None` the chain first runs tuning rounds (10 sweeps
/// each, up to 80 rounds) from an initial width of 1, freezes the
/// width, then burns in and records; tuning sweeps are extra warm-up
/// on top of `burn_in`. Deterministic given the seed.
pub fn phi4_samples(params: &Phi4Params, opts: &Phi4RunOptions) -> Result<Vec<Vec<f64>>> {
    if opts.samples == 0 || opts.stride == 0 {
        return Err(Error::invalid("need ≥ 1 sample and stride ≥ 1"));
    }
    let mut chain = Phi4Chain::new(params, opts.width.unwrap_or(1.0), opts.seed)?;
    if opts.width.is_none() {
        chain.tune_width(10, 80)?;
    }
    for _ in 0..opts.burn_in {
        chain.sweep();
    }
    let mut out = Vec::with_capacity(opts.samples);
    for _ in 0..opts.samples {
        for _ in 0..opts.stride {
            chain.sweep();
        }
        out.push(chain.values().to_vec());
    }
    Ok(out)
}

/// Like [`phi4_samples`] but records a scalar observable per snapshot.
pub fn phi4_observable(
    params: &Phi4Params,
    opts: &Phi4RunOptions,
    mut obs: impl FnMut(&[f64]) -> f64,
) -> Result<Vec<f64>> {
    if opts.samples == 0 || opts.stride == 0 {
        return Err(Error::invalid("need ≥ 1 sample and stride ≥ 1"));
    }
    let mut chain = Phi4Chain::new(params, opts.width.unwrap_or(1.0), opts.seed)?;
    if opts.width.is_none() {
        chain.tune_width(10, 80)?;
    }
    for _ in 0..opts.burn_in {
        chain.sweep();
    }
    let mut out = Vec::with_capacity(opts.samples);
    for _ in 0..opts.samples {
        for _ in 0..opts.stride {
            chain.sweep();
        }
        out.push(obs(chain.values()));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Block-spin laws
// ---------------------------------------------------------------------------

/// Sign convention of the block-spin kernel exp(±Σᵢⱼ aᵢⱼ sᵢ sⱼ).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockSpinSign {
    /// exp(+Σ aᵢⱼ sᵢ sⱼ): nonnegative couplings *favor* aligned blocks.
    /// This is the attractive convention and the default.
    Ferromagnetic,
    /// exp(−Σ aᵢⱼ sᵢ sⱼ), the kernel as sometimes written with a
    /// leading minus sign. With nonnegative couplings this choice is
    /// antiferromagnetic; it is kept selectable so the two conventions
    /// can be compared side by side.
    Literal,
}

/// A block of K coupled ±1 spins whose sum is reported on the grid δ·ℤ.
#[derive(Debug, Clone)]
pub struct BlockSpinSpec {
    /// Number of spins in the block (1 ≤ K ≤ [`BLOCK_SPIN_CAPACITY`]).
    pub k: usize,
    /// Row-major K×K coupling matrix, entries finite and ≥ 0.
    pub coupling: Vec<f64>,
    /// Grid step δ > 0 for the rescaled sum δ·Σᵢsᵢ.
    pub delta: f64,
    /// Kernel sign convention.
    pub sign: BlockSpinSign,
}

impl BlockSpinSpec {
    /// Ferromagnetic block with an explicit coupling matrix.
    pub fn new(k: usize, coupling: Vec<f64>, delta: f64) -> Result<Self> {
        BlockSpinSpec::with_sign(k, coupling, delta, BlockSpinSign::Ferromagnetic)
    }

    /// Block with constant coupling `a` on every off-diagonal pair.
    pub fn uniform(k: usize, a: f64, delta: f64) -> Result<Self> {
        let mut coupling = vec![a; k * k];
        for i in 0..k {
            coupling[i * k + i] = 0.0;
        }
        BlockSpinSpec::new(k, coupling, delta)
    }

    /// Fully explicit constructor.
    pub fn with_sign(
        k: usize,
        coupling: Vec<f64>,
        delta: f64,
        sign: BlockSpinSign,
    ) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("a block needs at least one spin"));
        }
        if k > BLOCK_SPIN_CAPACITY {
            return Err(Error::capacity(format!(
                "block-spin enumeration covers 2^K patterns; K = {k} exceeds the cap {BLOCK_SPIN_CAPACITY}"
            )));
        }
        if coupling.len() != k * k {
            return Err(Error::invalid(format!(
                "coupling matrix must be K×K = {} entries, got {}",
                k * k,
                coupling.len()
            )));
        }
        if coupling.iter().any(|a| !a.is_finite() || *a < 0.0) {
            return Err(Error::invalid("coupling entries must be finite and ≥ 0"));
        }
        if !delta.is_finite() || delta <= 0.0 {
            return Err(Error::invalid(format!("grid step δ must be > 0, got {delta}")));
        }
        Ok(BlockSpinSpec { k, coupling, delta, sign })
    }
}

/// The exact law of δ·Σᵢsᵢ for a [`BlockSpinSpec`].
///
/// The pmf lives on the 2K+1 grid points δ·m, m ∈ {−K, …, K}; entries
/// with m ≢ K (mod 2) are exactly zero (a sum of K signs has the
/// parity of K). The law is symmetric under negation *bitwise*: the
/// enumeration fixes s₁ = +1 and credits each pattern to both ±m, so
/// `pmf[K+m] == pmf[K−m]` exactly, not merely up to rounding.
#[derive(Debug, Clone)]
pub struct BlockSpinLaw {
    delta: f64,
    k: usize,
    pmf: Vec<f64>,
}

impl BlockSpinLaw {
    /// Grid step δ.
    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Block size K.
    pub fn k(&self) -> usize {
        self.k
    }

    /// Probabilities indexed by m + K for m ∈ {−K, …, K}.
    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    /// The support points δ·m in the same order as [`BlockSpinLaw::pmf`].
    pub fn support(&self) -> Vec<f64> {
        (-(self.k as i64)..=self.k as i64).map(|m| self.delta * m as f64).collect()
    }

    /// P(Σᵢsᵢ = m).
    pub fn prob_of_sum(&self, m: i64) -> f64 {
        if m.unsigned_abs() as usize > self.k {
            return 0.0;
        }
        self.pmf[(m + self.k as i64) as usize]
    }

    /// Mean of δ·Σᵢsᵢ (zero by symmetry, kept for report plumbing).
    pub fn mean(&self) -> f64 {
        self.support().iter().zip(&self.pmf).map(|(x, p)| x * p).sum()
    }

    /// Variance of δ·Σᵢsᵢ.
    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        self.support().iter().zip(&self.pmf).map(|(x, p)| (x - mu) * (x - mu) * p).sum()
    }
}

/// Exact block-spin law by Gray-code enumeration of all 2^K patterns.
///
/// The energy E(s) = Σᵢⱼ aᵢⱼ sᵢ sⱼ (full double sum; diagonal terms
/// are constant on ±1 spins and cancel in the normalization) is
/// updated in O(K) per visited pattern. Two passes keep the
/// exponentials safe: the first finds the maximum signed energy, the
/// second accumulates exp(E − E_max) into the sum buckets.
pub fn block_spin_law(spec: &BlockSpinSpec) -> Result<BlockSpinLaw> {
    let k = spec.k;
    // Symmetrized couplings b[f][j] = a[f][j] + a[j][f] drive the
    // Gray-code energy update ΔE = −2·s_f·Σ_{j≠f} b[f][j]·s_j.
    let mut b = vec![0.0; k * k];
    for i in 0..k {
        for j in 0..k {
            if i != j {
                b[i * k + j] = spec.coupling[i * k + j] + spec.coupling[j * k + i];
            }
        }
    }
    let signed = |e: f64| match spec.sign {
        BlockSpinSign::Ferromagnetic => e,
        BlockSpinSign::Literal => -e,
    };
    // Enumerate only patterns with s₁ = +1; the global flip s ↦ −s is
    // an energy-preserving bijection onto the other half, so each
    // visited pattern is credited to both +m and −m below.
    let free = k - 1;
    let total: u64 = 1 << free;
    let sweep = |mut on_pattern: Box<dyn FnMut(i64, f64) + '_>| {
        let mut s = vec![1i8; k];
        let mut e: f64 = (0..k)
            .map(|i| (0..k).map(|j| spec.coupling[i * k + j] * (s[i] * s[j]) as f64).sum::<f64>())
            .sum();
        let mut m = k as i64;
        on_pattern(m, signed(e));
        for t in 1..total {
            let f = t.trailing_zeros() as usize + 1; // spin flipped by the Gray step
            let dot: f64 = (0..k).filter(|&j| j != f).map(|j| b[f * k + j] * s[j] as f64).sum();
            e -= 2.0 * s[f] as f64 * dot;
            m -= 2 * s[f] as i64;
            s[f] = -s[f];
            on_pattern(m, signed(e));
        }
    };
    let mut e_max = f64::NEG_INFINITY;
    sweep(Box::new(|_, e| e_max = e_max.max(e)));
    let mut pmf = vec![0.0; 2 * k + 1];
    {
        let pmf = &mut pmf;
        sweep(Box::new(move |m, e| {
            let w = (e - e_max).exp();
            pmf[(k as i64 + m) as usize] += w;
            pmf[(k as i64 - m) as usize] += w;
        }));
    }
    let z: f64 = pmf.iter().sum();
    for p in &mut pmf {
        *p /= z;
    }
    Ok(BlockSpinLaw { delta: spec.delta, k, pmf })
}

// ---------------------------------------------------------------------------
// Mesoscopic statistics
// ---------------------------------------------------------------------------

/// A linear field statistic ξ = Σ_u φ_u · f(u/M).
pub struct FieldStatistic {
    profile: Box<dyn Fn(f64, f64) -> f64 + Sync + Send>,
    scale: f64,
    normalize: bool,
}

impl FieldStatistic {
    /// Statistic with profile `f`, mesoscopic scale M > 0, and an
    /// optional normalization to unit sample variance.
    pub fn new(
        scale: f64,
        normalize: bool,
        profile: impl Fn(f64, f64) -> f64 + Sync + Send + 'static,
    ) -> Result<Self> {
        if !scale.is_finite() || scale <= 0.0 {
            return Err(Error::invalid(format!("mesoscopic scale must be > 0, got {scale}")));
        }
        Ok(FieldStatistic { profile: Box::new(profile), scale, normalize })
    }

    /// Evaluate the raw (unnormalized) statistic on one field.
    pub fn raw(&self, lat: &Lattice, values: &[f64]) -> f64 {
        lat.sites()
            .iter()
            .zip(values)
            .map(|(s, &v)| v * (self.profile)(s.u1 as f64 / self.scale, s.u2 as f64 / self.scale))
            .sum()
    }
}

/// Evaluate a [`FieldStatistic`] on a batch of field samples.
///
/// With `normalize` set, the raw values are divided by their sample
/// standard deviation (population convention, no centering — the sign
/// of ξ is meaningful for symmetric fields). A statistic with zero
/// sample variance — for instance a profile vanishing on the whole
/// lattice — cannot be normalized and is reported as degenerate.
pub fn xi_statistic(
    lat: &Lattice,
    samples: &[Vec<f64>],
    stat: &FieldStatistic,
) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::invalid("xi_statistic needs at least one field sample"));
    }
    if let Some(bad) = samples.iter().find(|s| s.len() != lat.n_sites()) {
        return Err(Error::invalid(format!(
            "field sample has {} values for {} sites",
            bad.len(),
            lat.n_sites()
        )));
    }
    let raw: Vec<f64> = samples.iter().map(|s| stat.raw(lat, s)).collect();
    if !stat.normalize {
        return Ok(raw);
    }
    if raw.len() < 2 {
        return Err(Error::invalid("normalization needs at least two samples"));
    }
    let n = raw.len() as f64;
    let mean = raw.iter().sum::<f64>() / n;
    let var = raw.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    if !(var.is_finite() && var > 0.0) {
        return Err(Error::DegenerateStatistic(format!(
            "statistic has sample variance {var}; cannot normalize"
        )));
    }
    let sd = var.sqrt();
    Ok(raw.iter().map(|x| x / sd).collect())
}

// ---------------------------------------------------------------------------
// Gaussianity diagnostics
// ---------------------------------------------------------------------------

/// Cumulant diagnostics for a scalar sample, with batched-means error
/// bars ([`GAUSSIANITY_BATCHES`] batches).
#[derive(Debug, Clone)]
pub struct GaussianityReport {
    /// Sample size.
    pub n: usize,
    /// First cumulant (mean).
    pub mean: BatchStat,
    /// Second cumulant (population variance).
    pub variance: BatchStat,
    /// Third central moment.
    pub third_cumulant: BatchStat,
    /// Fourth cumulant m₄ − 3m₂².
    pub fourth_cumulant: BatchStat,
    /// Excess kurtosis m₄/m₂² − 3 (zero for a Gaussian).
    pub excess_kurtosis: BatchStat,
    /// Whether the fourth cumulant is within 3 error bars of zero.
    pub gaussian_verdict: bool,
}

/// Estimate the first four cumulants of `values` and flag Gaussianity.
///
/// Requires at least [`GAUSSIANITY_MIN_SAMPLES`] values; cumulant
/// estimators are too noisy below that to mean anything. The verdict
/// is |κ₄| < 3·stderr(κ₄) — a flag, not a hypothesis test.
pub fn gaussianity_report(values: &[f64]) -> Result<GaussianityReport> {
    if values.len() < GAUSSIANITY_MIN_SAMPLES {
        return Err(Error::invalid(format!(
            "gaussianity diagnostics need ≥ {GAUSSIANITY_MIN_SAMPLES} values, got {}",
            values.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("gaussianity diagnostics need finite values"));
    }
    let pick = |i: usize| {
        move |xs: &[f64]| {
            let c = crate::util::sample_cumulants(xs);
            [c.0, c.1, c.2, c.3, c.4][i]
        }
    };
    let b = GAUSSIANITY_BATCHES;
    let report = GaussianityReport {
        n: values.len(),
        mean: batch_stats(values, b, pick(0))?,
        variance: batch_stats(values, b, pick(1))?,
        third_cumulant: batch_stats(values, b, pick(2))?,
        fourth_cumulant: batch_stats(values, b, pick(3))?,
        excess_kurtosis: batch_stats(values, b, pick(4))?,
        gaussian_verdict: false,
    };
    let k4 = report.fourth_cumulant;
    Ok(GaussianityReport { gaussian_verdict: k4.value.abs() < 3.0 * k4.stderr, ..report })
}

// ---------------------------------------------------------------------------
// Gaussian free field on the torus
// ---------------------------------------------------------------------------

/// The discrete Gaussian free field on an L×L torus with mass m ≥ 0.
///
/// Covariance (m² − Δ)⁻¹ for the lattice Laplacian Δ. At m = 0 the
/// constant mode has eigenvalue 0 and the covariance is singular;
/// the field only exists with that mode projected out.
#[derive(Debug, Clone, Copy)]
pub struct GffSpec {
    /// Torus side L ≥ 2 (capped at [`GFF_SIDE_CAPACITY`]).
    pub l: usize,
    /// Mass m ≥ 0.
    pub mass: f64,
    /// Drop the k = 0 mode (mandatory when m = 0).
    pub project_zero_mode: bool,
}

impl GffSpec {
    /// Massive free field (m > 0), all modes kept.
    pub fn new(l: usize, mass: f64) -> Result<Self> {
        GffSpec::build(l, mass, false)
    }

    /// Massless free field with the zero mode projected out.
    pub fn massless(l: usize) -> Result<Self> {
        GffSpec::build(l, 0.0, true)
    }

    /// Fully explicit constructor.
    pub fn build(l: usize, mass: f64, project_zero_mode: bool) -> Result<Self> {
        if l < 2 {
            return Err(Error::invalid(format!("free field needs torus side ≥ 2, got {l}")));
        }
        if l > GFF_SIDE_CAPACITY {
            return Err(Error::capacity(format!(
                "free-field synthesis is O(L⁴); side {l} exceeds the cap {GFF_SIDE_CAPACITY}"
            )));
        }
        if !mass.is_finite() || mass < 0.0 {
            return Err(Error::invalid(format!("mass must be finite and ≥ 0, got {mass}")));
        }
        if mass == 0.0 && !project_zero_mode {
            return Err(Error::invalid(
                "m = 0 makes the covariance (m² − Δ)⁻¹ singular on the constant mode; \
                 project the zero mode out or take m > 0",
            ));
        }
        Ok(GffSpec { l, mass, project_zero_mode })
    }

    /// −Δ eigenvalue of mode k = (k₁, k₂).
    fn eigenvalue(&self, k1: usize, k2: usize) -> f64 {
        let l = self.l as f64;
        let s1 = (std::f64::consts::PI * k1 as f64 / l).sin();
        let s2 = (std::f64::consts::PI * k2 as f64 / l).sin();
        4.0 * (s1 * s1 + s2 * s2)
    }

    fn skip(&self, k1: usize, k2: usize) -> bool {
        self.project_zero_mode && k1 == 0 && k2 == 0
    }
}

/// One free-field sample by spectral synthesis, site-indexed as
/// `values[x + L·y]` for x, y ∈ {0, …, L−1}.
///
/// The synthesis runs over the *real* orthonormal eigenbasis of −Δ:
/// self-paired modes (k ≡ −k mod L) contribute cos(2πk·x/L)/L, and
/// each pair {k, −k} contributes √2·cos/L and √2·sin/L. Each basis
/// function gets an independent standard normal scaled by
/// (m² + λ_k)^{−1/2}, which is exactly sampling N(0, (m² − Δ)⁻¹).
pub fn gff_sample(spec: &GffSpec, rng: &mut Rng) -> Vec<f64> {
    let l = spec.l;
    let tau = 2.0 * std::f64::consts::PI / l as f64;
    let mut values = vec![0.0; l * l];
    for k1 in 0..l {
        for k2 in 0..l {
            let (p1, p2) = ((l - k1) % l, (l - k2) % l);
            if (k1, k2) > (p1, p2) || spec.skip(k1, k2) {
                continue; // the partner mode handles this pair
            }
            let scale = 1.0 / (spec.mass * spec.mass + spec.eigenvalue(k1, k2)).sqrt();
            let self_paired = (k1, k2) == (p1, p2);
            let (gc, gs) = if self_paired {
                (standard_normal(rng), 0.0)
            } else {
                (standard_normal(rng), standard_normal(rng))
            };
            let amp = scale / l as f64 * if self_paired { 1.0 } else { std::f64::consts::SQRT_2 };
            for y in 0..l {
                for x in 0..l {
                    let arg = tau * (k1 * x + k2 * y) as f64;
                    values[x + l * y] += amp * (gc * arg.cos() + gs * arg.sin());
                }
            }
        }
    }
    values
}

/// Exact covariance Cov(φ_0, φ_d) for displacement d = (dx, dy):
/// the spectral sum (1/L²) Σ_k cos(2π k·d / L) / (m² + λ_k).
pub fn gff_covariance(spec: &GffSpec, dx: i64, dy: i64) -> f64 {
    let l = spec.l;
    let tau = 2.0 * std::f64::consts::PI / l as f64;
    let mut c = 0.0;
    for k1 in 0..l {
        for k2 in 0..l {
            if spec.skip(k1, k2) {
                continue;
            }
            let arg = tau * (k1 as f64 * dx as f64 + k2 as f64 * dy as f64);
            c += arg.cos() / (spec.mass * spec.mass + spec.eigenvalue(k1, k2));
        }
    }
    c / (l * l) as f64
}

/// Exact single-site variance: the d = 0 spectral sum.
pub fn gff_variance(spec: &GffSpec) -> f64 {
    gff_covariance(spec, 0, 0)
}

// ---------------------------------------------------------------------------
// Exact small-system diagnostics
// ---------------------------------------------------------------------------

/// Fourth cumulant of the total field Σ_u φ_u on a free-boundary chain
/// of `len` sites, by quadrature-exact enumeration (`nodes` quadrature
/// points per site). For the Φ⁴ family this cumulant is ≤ 0.
pub fn chain_sum_fourth_cumulant(g: f64, nu: f64, len: i64, nodes: usize) -> Result<f64> {
    let model = crate::gibbs::EnergyModel::phi4(g, nu, nodes)?;
    let lat = Lattice::chain(len)?;
    let measure = crate::gibbs::enumerate(&model, &lat, &BoundaryCondition::Free)?;
    let total = |s: &[f64]| s.iter().sum::<f64>();
    measure.joint_cumulant(&[&total, &total, &total, &total])
}

/// Mass the single-site density ∝ exp(−(σ⁴ − ασ²)) puts within
/// `radius` of the two potential minima ±√(α/2).
///
/// As α grows the wells sharpen (curvature 4α) and this mass tends to
/// 1: the two-valued caricature of the low-temperature field. The
/// integral is a composite-midpoint sum over a range where the density
/// has decayed below e⁻⁶⁰, with 400 000 cells — far finer than the
/// well width 1/√(4α) for any α this is called with.
pub fn double_well_concentration(alpha: f64, radius: f64) -> Result<f64> {
    if !alpha.is_finite() || alpha <= 0.0 {
        return Err(Error::invalid(format!("well depth α must be > 0, got {alpha}")));
    }
    if !radius.is_finite() || radius <= 0.0 {
        return Err(Error::invalid(format!("radius must be > 0, got {radius}")));
    }
    let well = (alpha / 2.0).sqrt();
    // V − V_min = (σ² − α/2)² ≥ 60 outside the integration range.
    let reach = (alpha / 2.0 + 60.0f64.sqrt()).sqrt() + 1.0;
    let v_min = -alpha * alpha / 4.0;
    let (nodes, weights) = composite_midpoint(400_000, -reach, reach);
    let mut total = 0.0;
    let mut near = 0.0;
    for (x, w) in nodes.iter().zip(&weights) {
        let v = x * x * x * x - alpha * x * x;
        let mass = w * (-(v - v_min)).exp();
        total += mass;
        if (x - well).abs() <= radius || (x + well).abs() <= radius {
            near += mass;
        }
    }
    Ok(near / total)
}

/// Convenience: sites of a lattice as (u1, u2) pairs, for profile
/// functions that want raw coordinates.
pub fn site_coords(lat: &Lattice) -> Vec<(i64, i64)> {
    lat.sites().iter().map(|s: &Site| (s.u1, s.u2)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gibbs::{enumerate, EnergyModel};
    use crate::rng::stream_rng;
    use crate::util::{mean_stderr, ols_fit};

    fn exit_code(e: Error) -> i32 {
        e.exit_code()
    }

    #[test]
    fn params_validation_and_alpha_form() {
        let lat = Lattice::chain(3).unwrap();
        assert!(Phi4Params::new(-1.0, 0.0, &lat, BoundaryCondition::Free).is_err());
        assert!(Phi4Params::new(0.0, 0.0, &lat, BoundaryCondition::Free).is_err());
        assert!(Phi4Params::new(0.0, -1.0, &lat, BoundaryCondition::Free).is_err());
        assert!(Phi4Params::with_pair_coupling(1.0, 0.0, -0.5, &lat, BoundaryCondition::Free)
            .is_err());
        let p = Phi4Params::from_alpha(1.5, &lat, BoundaryCondition::Free).unwrap();
        assert_eq!(p.g, 4.0);
        assert_eq!(p.nu, -3.0);
        assert_eq!(p.alpha_form(), Some(1.5));
        // σ⁴ − ασ² at σ = 1.25 equals the (g/4, ν/2) form exactly.
        let s: f64 = 1.25;
        assert!((p.site_potential(s) - (s.powi(4) - 1.5 * s * s)).abs() < 1e-15);
        let q = Phi4Params::new(2.0, 0.3, &lat, BoundaryCondition::Free).unwrap();
        assert_eq!(q.alpha_form(), None);
    }

    #[test]
    fn energy_counts_ghost_terms() {
        // Two sites, Plus boundary: H = Σ V(φ) + (φ0−φ1)² + ghosts.
        let lat = Lattice::chain(2).unwrap();
        let p = Phi4Params::new(1.0, 0.5, &lat, BoundaryCondition::Plus).unwrap();
        let vals = [0.0, 0.0];
        // Each site has 3 outside neighbors on a 2×1 grid (one end,
        // two vertical), each contributing (0−1)² = 1.
        let h = p.energy(&vals).unwrap();
        assert!((h - 6.0).abs() < 1e-12, "H = {h}");
        let free = Phi4Params::new(1.0, 0.5, &lat, BoundaryCondition::Free).unwrap();
        assert!((free.energy(&vals).unwrap() - 0.0).abs() < 1e-12);
    }

    #[test]
    fn sweep_is_deterministic_per_seed() {
        let lat = Lattice::grid(3, 3).unwrap();
        let p = Phi4Params::new(1.0, -1.0, &lat, BoundaryCondition::Free).unwrap();
        let run = |seed: u64| {
            let mut c = Phi4Chain::new(&p, 0.8, seed).unwrap();
            for _ in 0..40 {
                c.sweep();
            }
            c.values().to_vec()
        };
        assert_eq!(run(5), run(5));
        assert_ne!(run(5), run(6));
    }

    #[test]
    fn width_tuning_reaches_the_window() {
        let lat = Lattice::grid(3, 3).unwrap();
        let p = Phi4Params::new(1.0, -1.0, &lat, BoundaryCondition::Free).unwrap();
        // Start far too bold: almost everything is rejected at w = 40.
        let mut c = Phi4Chain::new(&p, 40.0, 11).unwrap();
        let w = c.tune_width(10, 80).unwrap();
        assert!(w < 40.0);
        // Measure acceptance at the frozen width on a fresh window.
        let mut acc = 0;
        for _ in 0..200 {
            acc += c.sweep();
        }
        let rate = acc as f64 / (200.0 * 9.0);
        assert!((0.22..=0.58).contains(&rate), "post-tune acceptance {rate}");
    }

    #[test]
    fn decoupled_sites_reproduce_the_gaussian_marginal() {
        // g = 0, ν > 0, J = 0: each site is an independent N(0, 1/ν).
        let nu = 1.5;
        let lat = Lattice::chain(4).unwrap();
        let p =
            Phi4Params::with_pair_coupling(0.0, nu, 0.0, &lat, BoundaryCondition::Free).unwrap();
        let opts = Phi4RunOptions { burn_in: 300, samples: 4_000, stride: 2, seed: 31, width: None };
        let sq = phi4_observable(&p, &opts, |v| {
            v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64
        })
        .unwrap();
        let stat = batch_stats(&sq, 20, |xs| xs.iter().sum::<f64>() / xs.len() as f64).unwrap();
        let want = 1.0 / nu;
        assert!(
            (stat.value - want).abs() < 4.0 * stat.stderr,
            "E[φ²] = {} ± {}, want {want}",
            stat.value,
            stat.stderr
        );
    }

    #[test]
    fn chain_matches_the_quadrature_oracle() {
        // 3-site chain, double-well potential, free boundary. The
        // enumeration over 20³ quadrature states is exact to machine
        // precision for this smooth, fast-decaying density.
        let (g, nu) = (1.0, -1.0);
        let lat = Lattice::chain(3).unwrap();
        let model = EnergyModel::phi4(g, nu, 20).unwrap();
        let exact = enumerate(&model, &lat, &BoundaryCondition::Free).unwrap();
        let want_sq = exact.expectation(|s| s[0] * s[0]);
        let want_cross = exact.expectation(|s| s[0] * s[2]);
        let want_total = exact.expectation(|s| {
            let t: f64 = s.iter().sum();
            t * t
        });

        let p = Phi4Params::new(g, nu, &lat, BoundaryCondition::Free).unwrap();
        let opts =
            Phi4RunOptions { burn_in: 500, samples: 8_000, stride: 2, seed: 92, width: None };
        let fields = phi4_samples(&p, &opts).unwrap();
        let check = |name: &str, want: f64, obs: &dyn Fn(&[f64]) -> f64| {
            let xs: Vec<f64> = fields.iter().map(|f| obs(f)).collect();
            let stat = batch_stats(&xs, 20, |b| b.iter().sum::<f64>() / b.len() as f64).unwrap();
            assert!(
                (stat.value - want).abs() < 4.0 * stat.stderr,
                "{name}: {} ± {}, want {want}",
                stat.value,
                stat.stderr
            );
        };
        check("E[φ0²]", want_sq, &|s| s[0] * s[0]);
        check("E[φ0φ2]", want_cross, &|s| s[0] * s[2]);
        check("E[(Σφ)²]", want_total, &|s| {
            let t: f64 = s.iter().sum();
            t * t
        });
    }

    #[test]
    fn plus_boundary_matches_oracle_and_breaks_symmetry() {
        let (g, nu) = (1.0, 0.0);
        let lat = Lattice::chain(2).unwrap();
        let model = EnergyModel::phi4(g, nu, 24).unwrap();
        let exact = enumerate(&model, &lat, &BoundaryCondition::Plus).unwrap();
        let want = exact.expectation(|s| s.iter().sum::<f64>());
        assert!(want > 0.05, "plus boundary should pull the field up, got {want}");

        let p = Phi4Params::new(g, nu, &lat, BoundaryCondition::Plus).unwrap();
        let opts =
            Phi4RunOptions { burn_in: 400, samples: 6_000, stride: 2, seed: 17, width: None };
        let xs = phi4_observable(&p, &opts, |v| v.iter().sum::<f64>()).unwrap();
        let stat = batch_stats(&xs, 20, |b| b.iter().sum::<f64>() / b.len() as f64).unwrap();
        assert!(
            (stat.value - want).abs() < 4.0 * stat.stderr,
            "E[Σφ] = {} ± {}, want {want}",
            stat.value,
            stat.stderr
        );
    }

    #[test]
    fn block_spin_pinned_examples() {
        // K = 1, no coupling: the sum is a fair sign.
        let law = block_spin_law(&BlockSpinSpec::uniform(1, 0.0, 1.0).unwrap()).unwrap();
        assert_eq!(law.pmf(), &[0.5, 0.0, 0.5]);
        assert_eq!(law.support(), vec![-1.0, 0.0, 1.0]);

        // K = 2, coupling a₁₂ = a₂₁ = ½: E(±±) = ±1, so
        // P(Σ = ±2) = e/(2e + 2/e) and P(0) = (2/e)/(2e + 2/e).
        let mut coupling = vec![0.0; 4];
        coupling[1] = 0.5;
        coupling[2] = 0.5;
        let spec = BlockSpinSpec::new(2, coupling.clone(), 0.25).unwrap();
        let law = block_spin_law(&spec).unwrap();
        let z = 2.0 * 1.0f64.exp() + 2.0 * (-1.0f64).exp();
        assert!((law.prob_of_sum(2) - 1.0f64.exp() / z).abs() < 1e-14);
        assert!((law.prob_of_sum(0) - 2.0 * (-1.0f64).exp() / z).abs() < 1e-14);
        assert!((law.prob_of_sum(-2) - law.prob_of_sum(2)).abs() == 0.0);
        assert_eq!(law.prob_of_sum(1), 0.0); // parity
        assert_eq!(law.support(), vec![-0.5, -0.25, 0.0, 0.25, 0.5]);

        // The literal (antiferromagnetic) sign flips the odds.
        let lit =
            BlockSpinSpec::with_sign(2, coupling, 0.25, BlockSpinSign::Literal).unwrap();
        let law = block_spin_law(&lit).unwrap();
        let z = 2.0 * (-1.0f64).exp() + 2.0 * 1.0f64.exp();
        assert!((law.prob_of_sum(2) - (-1.0f64).exp() / z).abs() < 1e-14);
        assert!(law.prob_of_sum(0) > law.prob_of_sum(2));
    }

    #[test]
    fn block_spin_symmetry_normalization_and_caps() {
        // An asymmetric-looking but valid coupling matrix.
        let k = 6;
        let coupling: Vec<f64> =
            (0..k * k).map(|t| ((t % 5) as f64) / 10.0).collect();
        let law = block_spin_law(&BlockSpinSpec::new(k, coupling, 0.5).unwrap()).unwrap();
        let total: f64 = law.pmf().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        for m in 0..=k as i64 {
            // Bitwise symmetry, not approximate symmetry.
            assert!(law.prob_of_sum(m) == law.prob_of_sum(-m), "asymmetry at {m}");
        }
        for m in (-(k as i64)..=k as i64).filter(|m| (m - k as i64) % 2 != 0) {
            assert_eq!(law.prob_of_sum(m), 0.0);
        }
        assert!((law.mean()).abs() < 1e-15);
        assert!(law.variance() > 0.0);

        // A larger block still enumerates promptly.
        let big = block_spin_law(&BlockSpinSpec::uniform(18, 0.01, 1.0).unwrap()).unwrap();
        assert!((big.pmf().iter().sum::<f64>() - 1.0).abs() < 1e-12);

        assert!(BlockSpinSpec::uniform(0, 0.0, 1.0).is_err());
        let too_big = BlockSpinSpec::uniform(23, 0.0, 1.0).unwrap_err();
        assert_eq!(exit_code(too_big), 3);
        assert!(BlockSpinSpec::uniform(2, -0.1, 1.0).is_err());
        assert!(BlockSpinSpec::uniform(2, 0.1, 0.0).is_err());
    }

    #[test]
    fn xi_statistic_normalizes_and_rejects_degenerate_profiles() {
        let lat = Lattice::chain(8).unwrap();
        let mut rng = root_rng(88);
        let samples: Vec<Vec<f64>> = (0..400)
            .map(|_| (0..8).map(|_| standard_normal(&mut rng)).collect())
            .collect();

        let flat = FieldStatistic::new(1.0, true, |_, _| 1.0).unwrap();
        let xs = xi_statistic(&lat, &samples, &flat).unwrap();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        assert!((var - 1.0).abs() < 1e-12, "normalized variance {var}");

        let zero = FieldStatistic::new(1.0, true, |_, _| 0.0).unwrap();
        match xi_statistic(&lat, &samples, &zero) {
            Err(Error::DegenerateStatistic(_)) => {}
            other => panic!("wanted degenerate-statistic error, got {other:?}"),
        }
        assert!(FieldStatistic::new(0.0, true, |_, _| 1.0).is_err());
    }

    #[test]
    fn xi_variance_scales_linearly_for_iid_fields() {
        // For iid site variables and f ≡ 1, Var(ξ) = n·Var(φ): slope 1
        // on a log-log plot across chain lengths.
        let mut logs_n = Vec::new();
        let mut logs_v = Vec::new();
        for (i, &len) in [16i64, 64, 256].iter().enumerate() {
            let lat = Lattice::chain(len).unwrap();
            let mut rng = stream_rng(404, i as u64);
            let samples: Vec<Vec<f64>> = (0..4_000)
                .map(|_| (0..len).map(|_| standard_normal(&mut rng)).collect())
                .collect();
            let flat = FieldStatistic::new(1.0, false, |_, _| 1.0).unwrap();
            let xs = xi_statistic(&lat, &samples, &flat).unwrap();
            let m = xs.iter().sum::<f64>() / xs.len() as f64;
            let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64;
            logs_n.push((len as f64).ln());
            logs_v.push(v.ln());
        }
        let fit = ols_fit(&logs_n, &logs_v).unwrap();
        assert!((fit.slope - 1.0).abs() < 0.05, "scaling exponent {}", fit.slope);
    }

    #[test]
    fn gaussianity_report_separates_normal_from_rademacher() {
        let n = 100_000;
        let mut rng = root_rng(2_024);
        let normals: Vec<f64> = (0..n).map(|_| standard_normal(&mut rng)).collect();
        let r = gaussianity_report(&normals).unwrap();
        assert!(r.excess_kurtosis.value.abs() < 0.05, "kurtosis {}", r.excess_kurtosis.value);
        assert!(r.gaussian_verdict, "verdict on genuine normals");
        assert!(r.mean.value.abs() < 4.0 * r.mean.stderr + 0.02);

        let mut rng = root_rng(2_025);
        let signs: Vec<f64> =
            (0..n).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect();
        let r = gaussianity_report(&signs).unwrap();
        assert!((r.excess_kurtosis.value + 2.0).abs() < 0.05, "kurtosis {}", r.excess_kurtosis.value);
        assert!((r.fourth_cumulant.value + 2.0).abs() < 0.05);
        assert!(!r.gaussian_verdict, "±1 signs are maximally platykurtic");

        assert!(gaussianity_report(&normals[..999]).is_err());
    }

    #[test]
    fn gff_empirical_moments_match_the_spectral_sums() {
        let spec = GffSpec::new(8, 0.7).unwrap();
        let want_var = gff_variance(&spec);
        let want_cov = gff_covariance(&spec, 1, 0);
        assert!(want_var > want_cov && want_cov > 0.0);

        let mut rng = root_rng(606);
        let n = 6_000;
        let mut at0 = Vec::with_capacity(n);
        let mut at10 = Vec::with_capacity(n);
        for _ in 0..n {
            let f = gff_sample(&spec, &mut rng);
            at0.push(f[0]);
            at10.push(f[1]);
        }
        let var = batch_stats(&at0, 20, |xs| {
            let m = xs.iter().sum::<f64>() / xs.len() as f64;
            xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64
        })
        .unwrap();
        assert!(
            (var.value - want_var).abs() < 4.0 * var.stderr,
            "Var(φ0) = {} ± {}, want {want_var}",
            var.value,
            var.stderr
        );
        let prods: Vec<f64> = at0.iter().zip(&at10).map(|(a, b)| a * b).collect();
        let cov = batch_stats(&prods, 20, |xs| xs.iter().sum::<f64>() / xs.len() as f64).unwrap();
        assert!(
            (cov.value - want_cov).abs() < 4.0 * cov.stderr,
            "Cov(φ0, φ_(1,0)) = {} ± {}, want {want_cov}",
            cov.value,
            cov.stderr
        );
        // Mean is exactly zero in law; check it is statistically so.
        let (m, se) = mean_stderr(&at0);
        assert!(m.abs() < 4.0 * se + 1e-12);
    }

    #[test]
    fn gff_zero_mode_rules() {
        // Massless without projection: singular covariance.
        assert!(GffSpec::build(8, 0.0, false).is_err());
        assert!(GffSpec::new(1, 1.0).is_err());
        assert_eq!(exit_code(GffSpec::new(65, 1.0).unwrap_err()), 3);

        // Massless with projection: every sample sums to zero.
        let spec = GffSpec::massless(6).unwrap();
        let mut rng = root_rng(7_777);
        for _ in 0..20 {
            let f = gff_sample(&spec, &mut rng);
            let total: f64 = f.iter().sum();
            assert!(total.abs() < 1e-9, "projected field sums to {total}");
        }
        // Covariance symmetry under d ↦ −d, exactly.
        let c1 = gff_covariance(&spec, 2, 1);
        let c2 = gff_covariance(&spec, -2, -1);
        assert!((c1 - c2).abs() < 1e-15);
        assert_eq!(gff_variance(&spec), gff_covariance(&spec, 0, 0));
    }

    #[test]
    fn quartic_total_field_cumulant_is_nonpositive() {
        for &(g, nu) in &[(0.5, -1.0), (1.0, 0.0), (2.0, 1.0)] {
            let k4 = chain_sum_fourth_cumulant(g, nu, 4, 14).unwrap();
            assert!(k4 <= 1e-10, "κ₄ = {k4} at g = {g}, ν = {nu}");
        }
    }

    #[test]
    fn double_well_mass_concentrates_as_the_well_deepens() {
        let shallow = double_well_concentration(10.0, 0.1).unwrap();
        let deep = double_well_concentration(100.0, 0.1).unwrap();
        assert!(shallow > 0.3 && shallow < 1.0, "α = 10 mass {shallow}");
        assert!(deep > 0.9, "α = 100 mass {deep}");
        assert!(deep > shallow, "concentration must grow with α: {shallow} vs {deep}");
        assert!(double_well_concentration(0.0, 0.1).is_err());
        assert!(double_well_concentration(10.0, 0.0).is_err());
    }
}
