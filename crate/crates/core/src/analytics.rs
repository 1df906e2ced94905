//! Closed-form results for the pinned domain wall: generating functions of
//! the no-wall and first-return sums, the critical dissipation strength,
//! free energy, excursion scales, and the scaling estimates built on them.
//!
//! Logs are natural unless stated otherwise.

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::domainwall::{annealed_mi, AnnealedConfig, RightBoundary, StepNoise, WalkLattice, WallWeights};
use crate::error::{Error, Result};
use crate::stats::{bisect, linear_fit};

/// Number of excursions of length `2k` that stay strictly positive between
/// their endpoints: `C(2k,k) - C(2k,k+1)`.
pub fn walk_count(k: usize) -> BigUint {
    binomial(2 * k, k) - binomial(2 * k, k + 1)
}

fn binomial(n: usize, k: usize) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}

/// Closed-form first-return weight `Z_f(t) = [p(2-p)/q] g^{2t-3} N_{2t-4}`
/// in exact arithmetic (zero for `t < 2`).
pub fn exact_first_return(q: &BigRational, p: &BigRational, t: usize) -> BigRational {
    if t < 2 {
        return BigRational::zero();
    }
    let one = BigRational::one();
    let g = q / (q * q + &one);
    let create = p * (&one + &one - p) / q;
    let n = BigRational::from_integer(walk_count(t - 2).into());
    create * pow(&g, 2 * t - 3) * n
}

/// `Z_a(t) = (1-p)^{2t}` in exact arithmetic.
pub fn exact_no_wall(p: &BigRational, t: usize) -> BigRational {
    pow(&(BigRational::one() - p), 2 * t)
}

fn pow(x: &BigRational, e: usize) -> BigRational {
    (0..e).fold(BigRational::one(), |acc, _| acc * x)
}

/// Critical point and the residual of the defining equation at the root.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub p_c: f64,
    /// `1 - p_c`, kept separately for large `q` where it underflows `p_c`.
    pub one_minus_p_c: f64,
    /// `z_a(w_1) z_f(w_1) - 1` at the returned root.
    pub residual: f64,
}

/// Closed-form machinery for a given on-site dimension `q` (real `q >= 2`
/// allowed).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyticModel {
    pub q: f64,
}

impl AnalyticModel {
    pub fn new(q: f64) -> Result<Self> {
        if !(q >= 2.0 && q.is_finite()) {
            return Err(Error::InvalidArgument(format!("q = {q} must be a finite number >= 2")));
        }
        Ok(Self { q })
    }

    /// Branch point `w_1 = (q^2+1)^2 / (4 q^2)`.
    pub fn w1(&self) -> f64 {
        let q2 = self.q * self.q;
        (q2 + 1.0).powi(2) / (4.0 * q2)
    }

    /// Hop weight `q/(q^2+1)`.
    pub fn hop(&self) -> f64 {
        self.q / (self.q * self.q + 1.0)
    }

    /// `z_a(w) = w(1-p)^2 / (1 - w(1-p)^2)`.
    pub fn laplace_za(&self, w: f64, p: f64) -> Result<f64> {
        laplace_za(w, p)
    }

    /// `z_f(w) = [p(2-p)/2q] [w(q^2+1)/q] [1 - sqrt(1 - w/w_1)]`.
    pub fn laplace_zf(&self, w: f64, p: f64) -> Result<f64> {
        let w1 = self.w1();
        if w > w1 {
            return Err(Error::Numerical(format!("w = {w} beyond the branch point w1 = {w1}")));
        }
        Ok(self.zf_prefactor(p) * w * (1.0 - (1.0 - w / w1).max(0.0).sqrt()))
    }

    fn zf_prefactor(&self, p: f64) -> f64 {
        let q = self.q;
        p * (2.0 - p) / (2.0 * q) * (q * q + 1.0) / q
    }

    /// Closed-form `Z_f(t)` in floating point.
    pub fn first_return_weight(&self, t: usize, p: f64) -> f64 {
        if t < 2 {
            return 0.0;
        }
        let n: f64 = walk_count(t - 2).to_string().parse().unwrap_or(f64::INFINITY);
        p * (2.0 - p) / self.q * self.hop().powi(2 * t as i32 - 3) * n
    }

    /// `h(u) = z_a(w_1) z_f(w_1) - 1` as a function of `u = 1 - p`.
    fn pinning_balance(&self, u: f64) -> f64 {
        let w1 = self.w1();
        let su = w1 * u * u;
        let za = su / (1.0 - su);
        let q = self.q;
        let zf_w1 = (1.0 - u * u) * (q * q + 1.0).powi(3) / (8.0 * q.powi(4));
        za * zf_w1 - 1.0
    }

    /// Root of `z_f(w_1) z_a(w_1) = 1` in `p`, by bisection on `u = 1 - p`
    /// between 0 and the pole of `z_a(w_1)`.
    pub fn critical_p(&self) -> Result<CriticalPoint> {
        let q = self.q;
        let u_pole = 2.0 * q / (q * q + 1.0);
        // The balance rises from -1 to the pole; check it is monotone on a
        // grid before trusting the bisection root to be unique.
        let grid: Vec<f64> = (0..64).map(|i| u_pole * i as f64 / 64.0).collect();
        let values: Vec<f64> = grid.iter().map(|&u| self.pinning_balance(u)).collect();
        if values.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Numerical(format!(
                "pinning balance is not monotone in p for q = {q}"
            )));
        }
        let hi = u_pole * (1.0 - 1e-15);
        let u = bisect(0.0, hi, 0.0, |u| self.pinning_balance(u))
            .ok_or_else(|| Error::Numerical(format!("no sign change of the pinning balance for q = {q}")))?;
        Ok(CriticalPoint {
            p_c: 1.0 - u,
            one_minus_p_c: u,
            residual: self.pinning_balance(u),
        })
    }

    /// Pole parameter `r` with `w_2 = w_1 (1 - r^2)` solving
    /// `z_a(w) z_f(w) = 1` on the physical sheet; `Ok(None)` when there is
    /// no pole before the branch point (`p >= p_c`).
    fn pole_r(&self, p: f64) -> Result<Option<f64>> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidArgument(format!("p = {p} outside (0, 1)")));
        }
        let w1 = self.w1();
        let s = (1.0 - p) * (1.0 - p);
        let k = self.zf_prefactor(p);
        let h = |r: f64| {
            let w = w1 * (1.0 - r * r);
            let sw = s * w;
            sw / (1.0 - sw) * k * w * (1.0 - r) - 1.0
        };
        let r_min = (1.0 - 1.0 / (s * w1)).max(0.0).sqrt();
        let mut lo = r_min;
        if r_min > 0.0 {
            // Step off the z_a pole until the balance is finite and positive.
            let mut d = 1e-15;
            lo = r_min + d;
            while !(h(lo) > 0.0) && d < 1.0 {
                d *= 2.0;
                lo = (r_min + d).min(1.0);
            }
        }
        if r_min == 0.0 && h(0.0) <= 0.0 {
            return Ok(None);
        }
        bisect(lo, 1.0, 0.0, h)
            .map(Some)
            .ok_or_else(|| Error::Numerical(format!("could not bracket the pinned pole at p = {p}")))
    }

    /// Pinned-phase pole `w_2 < w_1`, or `None` when depinned.
    pub fn w2(&self, p: f64) -> Result<Option<f64>> {
        Ok(self.pole_r(p)?.map(|r| self.w1() * (1.0 - r * r)))
    }

    /// Free energy per timestep `f = -lim ln Z(T) / T`: `ln w_1` above the
    /// transition, `ln w_2` below.
    pub fn free_energy(&self, p: f64) -> Result<f64> {
        let lw1 = self.w1().ln();
        Ok(match self.pole_r(p)? {
            Some(r) => lw1 + (-r * r).ln_1p(),
            None => lw1,
        })
    }

    /// `f(p_c) - f(p)`, accurate close to the transition.
    pub fn free_energy_gap(&self, p: f64) -> Result<f64> {
        Ok(match self.pole_r(p)? {
            Some(r) => -(-r * r).ln_1p(),
            None => 0.0,
        })
    }

    /// Typical excursion duration `tau = d ln z_f / d ln w` at `w_2`.
    pub fn excursion_duration(&self, p: f64) -> Result<f64> {
        match self.pole_r(p)? {
            // With w = w1 (1 - r^2): tau = 1 + (1 + r) / (2 r).
            Some(r) => Ok(1.0 + (1.0 + r) / (2.0 * r)),
            None => Err(Error::InvalidArgument(format!("p = {p} is not in the pinned phase"))),
        }
    }

    /// Transverse excursion length `l_perp = tau^{1/2}`.
    pub fn excursion_length(&self, p: f64) -> Result<f64> {
        self.excursion_duration(p).map(f64::sqrt)
    }
}

/// `z_a(w) = w(1-p)^2 / (1 - w(1-p)^2)`.
pub fn laplace_za(w: f64, p: f64) -> Result<f64> {
    let sw = w * (1.0 - p) * (1.0 - p);
    if (1.0 - sw).abs() < 1e-15 {
        return Err(Error::Numerical(format!("z_a diverges at w = {w}, p = {p}")));
    }
    Ok(sw / (1.0 - sw))
}

/// `t_c = L ln(1/q) / ln(1-p)`, in timesteps.
pub fn thermalization_time(p: f64, q: f64, l: usize) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument(format!("p = {p} outside (0, 1)")));
    }
    Ok(l as f64 * (1.0 / q).ln() / (1.0 - p).ln())
}

/// Scaling estimates for finite-rate encoding.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdEstimates {
    pub q: f64,
    pub c: f64,
    pub l: usize,
    pub t: usize,
    /// `1 - q^{-(1-C)L/(2T)}`.
    pub p_th1: f64,
    /// `1 - q^{-(1+C)L/(2T)}`.
    pub p_th2: f64,
    /// Thermalization time at `p`, when one was supplied.
    pub t_c: Option<f64>,
}

impl ThresholdEstimates {
    /// Two-trajectory prediction of the mutual information (units of
    /// `log_q`).
    pub fn piecewise_mi(&self, p: f64) -> f64 {
        let max = 2.0 * self.c * self.l as f64;
        if p <= self.p_th1 {
            max
        } else if p >= self.p_th2 {
            0.0
        } else {
            let lq = self.q.ln();
            (max - 2.0 * self.t as f64 * ((1.0 - self.p_th1) / (1.0 - p)).ln() / lq).max(0.0)
        }
    }
}

pub fn finite_rate_thresholds(q: f64, c: f64, l: usize, t: usize, p: Option<f64>) -> Result<ThresholdEstimates> {
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::InvalidArgument(format!("code rate {c} outside (0, 1)")));
    }
    if t == 0 || l == 0 {
        return Err(Error::InvalidArgument("L and T must be positive".into()));
    }
    let ratio = l as f64 / (2.0 * t as f64);
    let t_c = p.map(|p| thermalization_time(p, q, l)).transpose()?;
    Ok(ThresholdEstimates {
        q,
        c,
        l,
        t,
        p_th1: 1.0 - q.powf(-(1.0 - c) * ratio),
        p_th2: 1.0 - q.powf(-(1.0 + c) * ratio),
        t_c,
    })
}

/// Information deficit after `t` clean steps, in nats:
/// `[(q^2-1)/q] P0 / (P0 + (1-P0) e^{gamma t})`.
pub fn prescramble_prediction(p0: f64, gamma: f64, t: f64, q: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p0) || t < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "need P0 in [0,1] and t >= 0, got {p0}, {t}"
        )));
    }
    let denom = p0 + (1.0 - p0) * (gamma * t).exp();
    if p0 == 0.0 {
        return Ok(0.0);
    }
    Ok((q * q - 1.0) / q * p0 / denom)
}

/// Fitted phenomenology of pre-scrambling.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrescrambleFit {
    /// Decay rate of the surviving-wall odds per clean step.
    pub gamma: f64,
    /// `1 - P(T) ~ T^{-a}` at the largest fitted depths.
    pub a: f64,
    /// Coefficient of determination of the gamma and `a` fits.
    pub gamma_r2: f64,
    pub a_r2: f64,
    /// Largest relative deviation between predicted and DP deficits over
    /// the fitted window.
    pub max_relative_error: f64,
}

/// Fits `(gamma, a)` from semi-infinite DP runs at dissipation `p`:
/// `a` from the survival `P(T)` over `depths`, `gamma` from the log-odds of
/// survival after `t` clean steps (`windows`) at the largest depth.
pub fn fit_prescramble(q: f64, p: f64, depths: &[usize], windows: &[usize]) -> Result<PrescrambleFit> {
    if depths.len() < 2 || windows.len() < 2 {
        return Err(Error::Estimation("need at least two depths and two windows".into()));
    }
    let t_big = *depths.iter().max().expect("non-empty");
    let w = WallWeights::new(q, p);
    let survival_after = |t_noise: usize, t_clean: usize| {
        let mut l = WalkLattice::semi_infinite(w.clone(), t_noise + t_clean);
        for _ in 0..t_noise {
            l.advance(StepNoise::On);
        }
        for _ in 0..t_clean {
            l.advance(StepNoise::Off);
        }
        l.survival_probability(1)
    };
    let lx: Vec<f64> = depths.iter().map(|&t| (t as f64).ln()).collect();
    let ly: Vec<f64> = depths
        .iter()
        .map(|&t| (1.0 - survival_after(t, 0)).max(1e-300).ln())
        .collect();
    let a_fit = linear_fit(&lx, &ly, None).ok_or_else(|| Error::Estimation("degenerate depth grid".into()))?;
    let p0 = survival_after(t_big, 0);
    let ts: Vec<f64> = windows.iter().map(|&t| t as f64).collect();
    let surv: Vec<f64> = windows.iter().map(|&t| survival_after(t_big, t)).collect();
    let odds: Vec<f64> = surv.iter().map(|&s| (s / (1.0 - s)).ln()).collect();
    let g_fit = linear_fit(&ts, &odds, None).ok_or_else(|| Error::Estimation("degenerate window grid".into()))?;
    let gamma = -g_fit.slope;
    let mut max_rel: f64 = 0.0;
    for (&t, &s) in ts.iter().zip(&surv) {
        let dp = (2.0 - annealed_mi(s, q)?) * q.ln();
        let pred = prescramble_prediction(p0, gamma, t, q)?;
        max_rel = max_rel.max(((pred - dp) / dp).abs());
    }
    Ok(PrescrambleFit {
        gamma,
        a: -a_fit.slope,
        gamma_r2: g_fit.r2,
        a_r2: a_fit.r2,
        max_relative_error: max_rel,
    })
}

/// Transition located from the transfer matrix alone: the no-wall
/// fraction (the derivative of `ln Z` with respect to the boundary weight)
/// scales as `T^{-1/2}` at criticality, so `sqrt(T) (1 - P)` curves of two
/// depths cross at `p_c`. Bisection on `bracket`.
pub fn dp_critical_point(q: f64, t_small: usize, t_large: usize, bracket: (f64, f64), tol: f64) -> Result<f64> {
    if t_small >= t_large {
        return Err(Error::InvalidArgument("need t_small < t_large".into()));
    }
    let diff = |p: f64| {
        let config = AnnealedConfig {
            right_boundary: RightBoundary::SemiInfinite,
            ..AnnealedConfig::single_pair(q, 2, t_large, p)
        };
        let series = crate::domainwall::annealed_mi_series(&config, &[t_small, t_large]).expect("valid config");
        let scaled = |(t, o): &(usize, crate::domainwall::AnnealedOutcome)| (1.0 - o.survival) * (*t as f64).sqrt();
        scaled(&series[1]) - scaled(&series[0])
    };
    bisect(bracket.0, bracket.1, tol, diff)
        .ok_or_else(|| Error::Estimation(format!("no crossing of scaled no-wall fractions in {bracket:?}")))
}
