//! Transfer-matrix evaluation of the annealed (Haar-averaged) purities as a
//! single Ising domain wall pinned by the noisy boundary.
//!
//! The wall position `x` counts the up spins, so `x = 0` means no wall
//! (all down), `1 <= x < L` is a wall between sites `x` and `x + 1`, and
//! `x = L` is the all-up state reached by absorption at the clean edge.
//! The lattice is contracted from the top boundary, i.e. backwards in
//! circuit time. One step applies the odd-bond gate layer, the even-bond
//! layer and then the boundary dissipation. A wall annihilated at the left
//! edge spends the following dissipation event in a refractory slot that
//! neither pays the no-wall weight `(1-p)^2` nor can nucleate a new wall;
//! with this alignment the no-wall and first-return sums are exactly
//! `Z_a(t) = (1-p)^{2t}` and `Z_f(t) = [p(2-p)/q] g^{2t-3} N_{2t-4}` with
//! `g = q/(q^2+1)`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::ops::{Add, Mul};

use crate::error::{Error, Result};
use crate::rng::StreamKey;

/// Arithmetic used by the transfer matrix (floating point or exact).
pub trait Weight: Clone + Zero + One + Add<Output = Self> + Mul<Output = Self> {}
impl<T: Clone + Zero + One + Add<Output = T> + Mul<Output = T>> Weight for T {}

/// Local Boltzmann weights of the wall model.
#[derive(Clone, Debug, PartialEq)]
pub struct WallWeights<W> {
    /// Hop weight `q/(q^2+1)` per branch per gate.
    pub hop: W,
    /// No-wall weight per dissipation event, `(1-p)^2`.
    pub stay: W,
    /// Nucleation weight at the boundary, `p(2-p)/q`.
    pub create: W,
}

impl WallWeights<f64> {
    pub fn new(q: f64, p: f64) -> Self {
        Self {
            hop: q / (q * q + 1.0),
            stay: (1.0 - p) * (1.0 - p),
            create: p * (2.0 - p) / q,
        }
    }
}

impl WallWeights<BigRational> {
    pub fn exact(q: &BigRational, p: &BigRational) -> Self {
        let one = BigRational::one();
        let two = &one + &one;
        let omp = &one - p;
        Self {
            hop: q / (q * q + &one),
            stay: &omp * &omp,
            create: p * (&two - p) / q,
        }
    }

    pub fn exact_from_ints(q: i64, p_num: i64, p_den: i64) -> Self {
        let q = BigRational::from_integer(BigInt::from(q));
        let p = BigRational::new(BigInt::from(p_num), BigInt::from(p_den));
        Self::exact(&q, &p)
    }
}

/// How the boundary channel acts during one step.
#[derive(Clone, Debug, PartialEq)]
pub enum StepNoise<W> {
    Off,
    /// Dissipation with the lattice's own weights.
    On,
    /// Dissipation with explicit `(stay, create)` weights.
    With {
        stay: W,
        create: W,
    },
}

/// Wall weight vector `z(x, t)` with accumulated log normalization.
#[derive(Clone, Debug, PartialEq)]
pub struct WalkLattice<W = f64> {
    weights: WallWeights<W>,
    /// `Some(L)` with an absorbing clean edge, `None` for a semi-infinite chain.
    size: Option<usize>,
    pin: W,
    refractory: W,
    /// `walls[x]` for `1 <= x`; index 0 unused.
    walls: Vec<W>,
    right: W,
    /// Largest `x` that may carry weight.
    reach: usize,
    steps: usize,
    log_norm: f64,
}

impl<W: Weight> WalkLattice<W> {
    /// All-down top boundary on a chain of `l` sites with an absorbing
    /// right edge.
    pub fn finite(weights: WallWeights<W>, l: usize) -> Result<Self> {
        if l < 2 || !l.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!("L = {l} must be even and at least 2")));
        }
        Ok(Self::build(weights, Some(l), l))
    }

    /// All-down top boundary on a half-infinite chain, sized for up to
    /// `max_steps` steps.
    pub fn semi_infinite(weights: WallWeights<W>, max_steps: usize) -> Self {
        Self::build(weights, None, 2 * max_steps + 4)
    }

    fn build(weights: WallWeights<W>, size: Option<usize>, slots: usize) -> Self {
        Self {
            weights,
            size,
            pin: W::one(),
            refractory: W::zero(),
            walls: vec![W::zero(); slots],
            right: W::zero(),
            reach: 0,
            steps: 0,
            log_norm: 0.0,
        }
    }

    pub fn size(&self) -> Option<usize> {
        self.size
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn log_norm(&self) -> f64 {
        self.log_norm
    }

    /// Weight of histories without a wall (pinned or just annihilated).
    pub fn no_wall(&self) -> W {
        self.pin.clone() + self.refractory.clone()
    }

    pub fn pinned(&self) -> &W {
        &self.pin
    }

    pub fn refractory(&self) -> &W {
        &self.refractory
    }

    /// Weight absorbed at the clean edge (always zero when semi-infinite).
    pub fn right(&self) -> &W {
        &self.right
    }

    /// `z(x)` for a bulk wall position `x >= 1`.
    pub fn wall(&self, x: usize) -> W {
        self.walls.get(x).cloned().unwrap_or_else(W::zero)
    }

    /// Bulk wall weights as `(x, z)` pairs with `x >= 1`.
    pub fn walls(&self) -> impl Iterator<Item = (usize, &W)> {
        self.walls.iter().enumerate().take(self.reach + 1).skip(1)
    }

    /// Sum of all (normalized) weights.
    pub fn total(&self) -> W {
        self.walls()
            .fold(self.no_wall() + self.right.clone(), |acc, (_, w)| acc + w.clone())
    }

    /// Sum of weights whose wall sits at `x >= x0` (site `x0` is up).
    pub fn weight_at_or_beyond(&self, x0: usize) -> W {
        let mut acc = self.right.clone();
        if x0 == 0 {
            acc = acc + self.no_wall();
        }
        for (x, w) in self.walls() {
            if x >= x0 {
                acc = acc + w.clone();
            }
        }
        acc
    }

    /// Advances one step: odd-bond layer, even-bond layer, boundary noise.
    pub fn step(&mut self, dissipation_on: bool) {
        let noise = if dissipation_on { StepNoise::On } else { StepNoise::Off };
        self.step_with(noise);
    }

    pub fn step_with(&mut self, noise: StepNoise<W>) {
        let g = self.weights.hop.clone();
        let last = self.walls.len() - 1;
        let edge = self.size;
        // Odd layer: walls at odd x hop by one; x = 1 may annihilate.
        let mut fresh = W::zero();
        let reach = self.reach;
        let mut next = vec![W::zero(); self.walls.len()];
        let mut new_reach = 0;
        let mut right_gain = W::zero();
        for x in (1..=reach).step_by(2) {
            let w = std::mem::replace(&mut self.walls[x], W::zero());
            if w.is_zero() {
                continue;
            }
            let hop = g.clone() * w;
            if x == 1 {
                fresh = fresh + hop.clone();
            } else {
                next[x - 1] = next[x - 1].clone() + hop.clone();
            }
            if Some(x + 1) == edge {
                right_gain = right_gain + hop;
            } else {
                assert!(x < last, "wall left the allocated lattice");
                next[x + 1] = next[x + 1].clone() + hop;
                new_reach = new_reach.max(x + 1);
            }
        }
        // Even layer: walls now sit on even x and stay in the bulk.
        for x in (2..=new_reach).step_by(2) {
            let w = std::mem::replace(&mut next[x], W::zero());
            if w.is_zero() {
                continue;
            }
            let hop = g.clone() * w;
            self.walls[x - 1] = self.walls[x - 1].clone() + hop.clone();
            self.walls[x + 1] = self.walls[x + 1].clone() + hop;
        }
        self.reach = (new_reach + 1).min(last);
        self.right = self.right.clone() + right_gain;
        // Boundary channel.
        let pin = std::mem::replace(&mut self.pin, W::zero());
        let refractory = std::mem::replace(&mut self.refractory, fresh);
        let (stay, create) = match noise {
            StepNoise::Off => (W::one(), W::zero()),
            StepNoise::On => (self.weights.stay.clone(), self.weights.create.clone()),
            StepNoise::With { stay, create } => (stay, create),
        };
        if !create.is_zero() {
            self.walls[1] = self.walls[1].clone() + pin.clone() * create;
            self.reach = self.reach.max(1);
        }
        self.pin = stay * (pin + refractory);
        self.steps += 1;
    }
}

impl WalkLattice<f64> {
    /// Rescales weights to sum to one, accumulating the log of the norm.
    pub fn renormalize(&mut self) {
        let total = self.total();
        if total > 0.0 && total.is_finite() {
            let inv = 1.0 / total;
            self.pin *= inv;
            self.refractory *= inv;
            self.right *= inv;
            for w in &mut self.walls[..=self.reach] {
                *w *= inv;
            }
            self.log_norm += total.ln();
        }
    }

    /// Step followed by renormalization.
    pub fn advance(&mut self, noise: StepNoise<f64>) {
        self.step_with(noise);
        self.renormalize();
    }

    /// `ln Z` of the unnormalized partition sum.
    pub fn log_partition(&self) -> f64 {
        self.log_norm + self.total().ln()
    }

    /// Probability that site `x0` ends up (wall at `x >= x0`).
    pub fn survival_probability(&self, x0: usize) -> f64 {
        (self.weight_at_or_beyond(x0) / self.total()).clamp(0.0, 1.0)
    }

    /// `(x, ln z(x))` over every occupied position, with the no-wall slots
    /// at `x = 0` and absorption at `x = L`.
    fn log_weights(&self) -> Vec<(usize, f64)> {
        let mut out = vec![(0, self.no_wall())];
        out.extend(self.walls().map(|(x, w)| (x, *w)));
        if let Some(l) = self.size {
            out.push((l, self.right));
        }
        out.into_iter()
            .filter(|&(_, w)| w > 0.0)
            .map(|(x, w)| (x, w.ln()))
            .collect()
    }

    /// Finite-rate mutual information, in units of `log_q`.
    ///
    /// Each Bell site contributes `q^2` to `Z_down` when its spin is down
    /// and `q` when up, and the reverse for `Z_up`; `I = N_R +
    /// log_q(Z_down / Z_up)`.
    pub fn finite_rate_mi(&self, q: f64, bell_sites: &[usize]) -> f64 {
        let mut sites = bell_sites.to_vec();
        sites.sort_unstable();
        let lnq = q.ln();
        let n = sites.len() as f64;
        let (mut down, mut up) = (Vec::new(), Vec::new());
        for (x, lw) in self.log_weights() {
            let n_up = sites.partition_point(|&s| s <= x) as f64;
            let n_down = n - n_up;
            down.push(lw + lnq * (2.0 * n_down + n_up));
            up.push(lw + lnq * (2.0 * n_up + n_down));
        }
        let i = n + (log_sum_exp(&down) - log_sum_exp(&up)) / lnq;
        i.clamp(0.0, 2.0 * n)
    }
}

pub fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + values.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// `I = log_q[(q^2 - q(q-1)P) / (1 + (q-1)P)]`, in units of `log_q`.
pub fn annealed_mi(p_survive: f64, q: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p_survive) {
        return Err(Error::InvalidArgument(format!(
            "probability {p_survive} outside [0, 1]"
        )));
    }
    if q < 2.0 {
        return Err(Error::InvalidArgument(format!("q = {q} must be at least 2")));
    }
    let num = q * q - q * (q - 1.0) * p_survive;
    let den = 1.0 + (q - 1.0) * p_survive;
    Ok(((num / den).ln() / q.ln()).max(0.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RightBoundary {
    Absorbing,
    SemiInfinite,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnnealedEncoding {
    SinglePair {
        x0: usize,
    },
    /// Bell pairs at explicit 1-based sites; when empty, `C L` evenly
    /// spaced sites are used.
    FiniteRate {
        c: f64,
        #[serde(default)]
        sites: Vec<usize>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnnealedNoise {
    /// Depolarization of strength `p` every step.
    Deterministic,
    /// Full depolarization on steps drawn with probability `p`, averaged
    /// over `realizations` masks.
    RandomTimes { realizations: usize, seed: u64 },
}

/// One annealed computation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnealedConfig {
    pub q: f64,
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub p: f64,
    #[serde(default)]
    pub prescramble_depth: usize,
    pub right_boundary: RightBoundary,
    pub encoding: AnnealedEncoding,
    #[serde(default = "deterministic")]
    pub noise: AnnealedNoise,
}

fn deterministic() -> AnnealedNoise {
    AnnealedNoise::Deterministic
}

impl AnnealedConfig {
    pub fn single_pair(q: f64, l: usize, t: usize, p: f64) -> Self {
        Self {
            q,
            l,
            t,
            p,
            prescramble_depth: 0,
            right_boundary: RightBoundary::SemiInfinite,
            encoding: AnnealedEncoding::SinglePair { x0: 1 },
            noise: AnnealedNoise::Deterministic,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.q >= 2.0 && self.q.is_finite()) {
            return bad(format!("q = {} must be at least 2", self.q));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return bad(format!("p = {} outside [0, 1]", self.p));
        }
        if self.l < 2 || !self.l.is_multiple_of(2) {
            return bad(format!("L = {} must be even and at least 2", self.l));
        }
        match &self.encoding {
            AnnealedEncoding::SinglePair { x0 } => {
                if *x0 < 1 || *x0 > self.l {
                    return bad(format!("x0 = {x0} outside [1, {}]", self.l));
                }
            }
            AnnealedEncoding::FiniteRate { c, sites } => {
                if !(*c > 0.0 && *c < 1.0) {
                    return bad(format!("code rate {c} outside (0, 1)"));
                }
                if sites.is_empty() {
                    let cl = c * self.l as f64;
                    if (cl - cl.round()).abs() > 1e-9 || cl < 0.5 {
                        return bad(format!("C L = {cl} is not a positive integer"));
                    }
                } else if sites.iter().any(|&s| s < 1 || s > self.l) {
                    return bad("Bell site outside [1, L]".into());
                }
            }
        }
        if let AnnealedNoise::RandomTimes { realizations, .. } = self.noise {
            if realizations == 0 {
                return bad("random-time noise needs at least one realization".into());
            }
        }
        Ok(())
    }

    pub fn bell_sites(&self) -> Vec<usize> {
        match &self.encoding {
            AnnealedEncoding::SinglePair { x0 } => vec![*x0],
            AnnealedEncoding::FiniteRate { c, sites } if sites.is_empty() => {
                crate::protocols::bell_sites(self.l, (c * self.l as f64).round() as usize)
            }
            AnnealedEncoding::FiniteRate { sites, .. } => sites.clone(),
        }
    }

    fn lattice(&self, p: f64) -> WalkLattice<f64> {
        let w = WallWeights::new(self.q, p);
        match self.right_boundary {
            RightBoundary::Absorbing => WalkLattice::finite(w, self.l).expect("validated size"),
            RightBoundary::SemiInfinite => WalkLattice::semi_infinite(w, self.t + self.prescramble_depth),
        }
    }

    fn observe(&self, lattice: &WalkLattice<f64>) -> f64 {
        match &self.encoding {
            AnnealedEncoding::SinglePair { x0 } => {
                annealed_mi(lattice.survival_probability(*x0), self.q).expect("probability in range")
            }
            AnnealedEncoding::FiniteRate { .. } => lattice.finite_rate_mi(self.q, &self.bell_sites()),
        }
    }
}

/// Result of one annealed run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnealedOutcome {
    /// Mutual information in units of `log_q`.
    pub mi: f64,
    /// Survival probability `P(x0)` (single pair; NaN for finite rate).
    pub survival: f64,
    /// `ln Z` (deterministic noise; mean over masks otherwise).
    pub log_partition: f64,
}

/// Runs `T` dissipative steps followed by the trailing pre-scrambling
/// window (the contraction runs backwards in circuit time).
pub fn run_annealed(config: &AnnealedConfig) -> Result<AnnealedOutcome> {
    let outs = annealed_realizations(config)?;
    let n = outs.len() as f64;
    Ok(AnnealedOutcome {
        mi: outs.iter().map(|o| o.mi).sum::<f64>() / n,
        survival: outs.iter().map(|o| o.survival).sum::<f64>() / n,
        log_partition: outs.iter().map(|o| o.log_partition).sum::<f64>() / n,
    })
}

/// One outcome per noise realization (a single one for deterministic
/// noise), in realization order.
pub fn annealed_realizations(config: &AnnealedConfig) -> Result<Vec<AnnealedOutcome>> {
    config.validate()?;
    match config.noise {
        AnnealedNoise::Deterministic => {
            let mask = vec![true; config.t];
            Ok(vec![run_masked(config, &mask, StepNoise::On)])
        }
        AnnealedNoise::RandomTimes { realizations, seed } => {
            let q = config.q;
            Ok((0..realizations as u64)
                .into_par_iter()
                .map(|r| {
                    let mut rng = StreamKey::new(seed).with(r).rng();
                    let mask: Vec<bool> = (0..config.t).map(|_| rng.bernoulli(config.p)).collect();
                    let full = StepNoise::With {
                        stay: 0.0,
                        create: 1.0 / q,
                    };
                    run_masked(config, &mask, full)
                })
                .collect())
        }
    }
}

fn run_masked(config: &AnnealedConfig, mask: &[bool], fired: StepNoise<f64>) -> AnnealedOutcome {
    let mut lattice = config.lattice(config.p);
    for &on in mask {
        lattice.advance(if on { fired.clone() } else { StepNoise::Off });
    }
    for _ in 0..config.prescramble_depth {
        lattice.advance(StepNoise::Off);
    }
    let survival = match config.encoding {
        AnnealedEncoding::SinglePair { x0 } => lattice.survival_probability(x0),
        AnnealedEncoding::FiniteRate { .. } => f64::NAN,
    };
    AnnealedOutcome {
        mi: config.observe(&lattice),
        survival,
        log_partition: lattice.log_partition(),
    }
}

/// `(p, I)` for each grid point, computed in parallel.
pub fn annealed_mi_curve(config: &AnnealedConfig, p_grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    config.validate()?;
    p_grid
        .par_iter()
        .map(|&p| {
            let mut c = config.clone();
            c.p = p;
            run_annealed(&c).map(|o| (p, o.mi))
        })
        .collect()
}

/// Single-pair mutual information of a deterministic run without
/// pre-scrambling, observed after each depth in `times` from one sweep.
pub fn annealed_mi_series(config: &AnnealedConfig, times: &[usize]) -> Result<Vec<(usize, AnnealedOutcome)>> {
    config.validate()?;
    if config.prescramble_depth != 0 || config.noise != AnnealedNoise::Deterministic {
        return Err(Error::Config(
            "depth series need deterministic noise and no pre-scrambling".into(),
        ));
    }
    let t_max = times.iter().copied().max().unwrap_or(0);
    let mut c = config.clone();
    c.t = t_max;
    let mut lattice = c.lattice(c.p);
    let mut out = Vec::with_capacity(times.len());
    let mut sorted = times.to_vec();
    sorted.sort_unstable();
    let mut next = 0;
    while next < sorted.len() && sorted[next] == 0 {
        out.push((0, outcome_of(&c, &lattice)));
        next += 1;
    }
    for t in 1..=t_max {
        lattice.advance(StepNoise::On);
        while next < sorted.len() && sorted[next] == t {
            out.push((t, outcome_of(&c, &lattice)));
            next += 1;
        }
    }
    Ok(out)
}

fn outcome_of(config: &AnnealedConfig, lattice: &WalkLattice<f64>) -> AnnealedOutcome {
    let survival = match config.encoding {
        AnnealedEncoding::SinglePair { x0 } => lattice.survival_probability(x0),
        AnnealedEncoding::FiniteRate { .. } => f64::NAN,
    };
    AnnealedOutcome {
        mi: config.observe(lattice),
        survival,
        log_partition: lattice.log_partition(),
    }
}

/// Finite-rate mutual information for a finite-rate configuration.
pub fn finite_rate_mi(config: &AnnealedConfig) -> Result<f64> {
    if !matches!(config.encoding, AnnealedEncoding::FiniteRate { .. }) {
        return Err(Error::Config("finite_rate_mi needs a finite-rate encoding".into()));
    }
    run_annealed(config).map(|o| o.mi)
}

/// Exact (rational) totals after `t` steps from the all-down state.
pub fn exact_partition(weights: &WallWeights<BigRational>, t: usize) -> BigRational {
    let mut lattice = WalkLattice::semi_infinite(weights.clone(), t);
    for _ in 0..t {
        lattice.step(true);
    }
    lattice.total()
}

/// Exact no-wall weights `Z_a(t)`, t = 1..=t_max: nucleation disabled.
pub fn exact_no_wall_series(weights: &WallWeights<BigRational>, t_max: usize) -> Vec<BigRational> {
    let mut w = weights.clone();
    w.create = BigRational::zero();
    let mut lattice = WalkLattice::semi_infinite(w, t_max);
    (0..t_max)
        .map(|_| {
            lattice.step(true);
            lattice.pinned().clone()
        })
        .collect()
}

/// Exact first-return weights `Z_f(t)`, t = 1..=t_max: a single wall is
/// nucleated in the first step and the weight of histories that complete
/// their excursion (annihilation plus refractory slot) in step `t` is
/// recorded; no further nucleation is allowed.
pub fn exact_first_return_series(weights: &WallWeights<BigRational>, t_max: usize) -> Vec<BigRational> {
    let mut lattice = WalkLattice::semi_infinite(weights.clone(), t_max);
    let mut out = Vec::with_capacity(t_max);
    for t in 0..t_max {
        let noise = if t == 0 {
            StepNoise::With {
                stay: BigRational::zero(),
                create: weights.create.clone(),
            }
        } else {
            StepNoise::With {
                stay: BigRational::zero(),
                create: BigRational::zero(),
            }
        };
        lattice.step_with(noise);
        // The excursion closes when its weight enters the refractory slot.
        out.push(lattice.refractory().clone());
    }
    out
}
