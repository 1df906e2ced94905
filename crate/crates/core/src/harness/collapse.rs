//! Finite-size scaling collapse with a Houdayer–Hartmann quality function.
//!
//! Each point is compared with a weighted line through the bracketing
//! points of every other size at the same rescaled abscissa; `Q` is the
//! mean squared deviation in units of the combined error. Parameters are
//! found by a grid search that repeatedly zooms onto the best cell, and
//! errors come from a parametric bootstrap of the input data.

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dataset::{Curve, Dataset};
use crate::error::{Error, Result};
use crate::rng::StreamKey;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Param {
    Free { lo: f64, hi: f64 },
    Fixed(f64),
}

impl Param {
    fn lo(self) -> f64 {
        match self {
            Param::Free { lo, .. } => lo,
            Param::Fixed(v) => v,
        }
    }

    fn hi(self) -> f64 {
        match self {
            Param::Free { hi, .. } => hi,
            Param::Fixed(v) => v,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CollapseModel {
    /// `x = (p - p_c) T^{1/nu}`, `y = I T^{beta/nu}`.
    PowerLaw { p_c: Param, beta_over_nu: Param, nu: Param },
    /// `x = (p - p_d) L^omega`, `y = I`.
    Step { p_d: Param, omega: Param },
}

impl CollapseModel {
    pub fn kind(&self) -> &'static str {
        match self {
            CollapseModel::PowerLaw { .. } => "power_law",
            CollapseModel::Step { .. } => "step",
        }
    }

    pub fn names(&self) -> &'static [&'static str] {
        match self {
            CollapseModel::PowerLaw { .. } => &["p_c", "beta_over_nu", "nu"],
            CollapseModel::Step { .. } => &["p_d", "omega"],
        }
    }

    fn params(&self) -> Vec<Param> {
        match *self {
            CollapseModel::PowerLaw { p_c, beta_over_nu, nu } => vec![p_c, beta_over_nu, nu],
            CollapseModel::Step { p_d, omega } => vec![p_d, omega],
        }
    }

    fn validate(&self) -> Result<()> {
        let params = self.params();
        for (name, p) in self.names().iter().zip(&params) {
            let (lo, hi) = (p.lo(), p.hi());
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(Error::Config(format!("{name}: bad range [{lo}, {hi}]")));
            }
        }
        let critical = params[0];
        if critical.lo() <= 0.0 || critical.hi() >= 1.0 {
            return Err(Error::Config(format!(
                "{} range must lie inside (0, 1)",
                self.names()[0]
            )));
        }
        if let CollapseModel::PowerLaw { nu, .. } = self {
            if nu.lo() <= 0.0 {
                return Err(Error::Config("nu must be positive".into()));
            }
        }
        Ok(())
    }

    /// Rescaled `(x, y, dy)` of one point.
    fn rescale(&self, v: &[f64], l: usize, t: usize, p: f64, y: f64, dy: f64) -> (f64, f64, f64) {
        match self {
            CollapseModel::PowerLaw { .. } => {
                let lt = (t as f64).ln();
                let s = (v[1] * lt).exp();
                ((p - v[0]) * (lt / v[2]).exp(), y * s, dy * s)
            }
            CollapseModel::Step { .. } => ((p - v[0]) * (l as f64).powf(v[1]), y, dy),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Grid points per free parameter at each zoom level; 0 picks 41, 21
    /// or 13 for one, two or three free parameters.
    pub grid: usize,
    pub refinements: usize,
    pub bootstrap: usize,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            grid: 0,
            refinements: 10,
            bootstrap: 32,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedParam {
    pub name: String,
    pub value: f64,
    /// Bootstrap standard deviation.
    pub error: f64,
    /// Bootstrap 2.5% and 97.5% quantiles.
    pub ci: (f64, f64),
    pub fixed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CollapseFit {
    pub model: String,
    pub params: Vec<FittedParam>,
    pub quality: f64,
    pub n_points: usize,
    pub n_sizes: usize,
    pub bootstrap: usize,
}

impl CollapseFit {
    pub fn param(&self, name: &str) -> Option<&FittedParam> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.param(name).map(|p| p.value)
    }
}

struct Prepared {
    curves: Vec<Curve>,
    floor: f64,
}

fn prepare(data: &Dataset) -> Result<Prepared> {
    let curves = data.curves();
    if curves.len() < 3 {
        return Err(Error::Estimation(format!(
            "collapse needs at least 3 sizes, got {}",
            curves.len()
        )));
    }
    if let Some(c) = curves.iter().find(|c| c.points.len() < 5) {
        return Err(Error::Estimation(format!(
            "size L={} T={} has {} points; need at least 5",
            c.l,
            c.t,
            c.points.len()
        )));
    }
    if data
        .points
        .iter()
        .any(|d| !(d.y.is_finite() && d.err.is_finite() && d.err >= 0.0))
    {
        return Err(Error::Estimation("non-finite value or error in data".into()));
    }
    // Points without an error bar get the smallest reported one; if none
    // is reported, a small fraction of the data scale.
    let min_err = data
        .points
        .iter()
        .map(|d| d.err)
        .filter(|&e| e > 0.0)
        .fold(f64::INFINITY, f64::min);
    let floor = if min_err.is_finite() {
        min_err
    } else {
        let scale = data.points.iter().map(|d| d.y.abs()).fold(0.0, f64::max);
        if scale > 0.0 {
            1e-3 * scale
        } else {
            1.0
        }
    };
    Ok(Prepared { curves, floor })
}

/// Collapse quality `Q` of `data` under `model` at parameter `values`
/// (in [`CollapseModel::names`] order). Infinite when too few points
/// overlap another size.
pub fn collapse_quality(data: &Dataset, model: &CollapseModel, values: &[f64]) -> Result<f64> {
    let prep = prepare(data)?;
    if values.len() != model.names().len() {
        return Err(Error::InvalidArgument("wrong number of parameter values".into()));
    }
    Ok(quality(&prep, model, values))
}

fn quality(prep: &Prepared, model: &CollapseModel, v: &[f64]) -> f64 {
    let scaled: Vec<Vec<(f64, f64, f64)>> = prep
        .curves
        .iter()
        .map(|c| {
            let mut pts: Vec<(f64, f64, f64)> = c
                .points
                .iter()
                .map(|d| {
                    let e = if d.err > 0.0 { d.err } else { prep.floor };
                    model.rescale(v, c.l, c.t, d.p, d.y, e)
                })
                .collect();
            pts.sort_by(|a, b| a.0.total_cmp(&b.0));
            pts
        })
        .collect();
    let total: usize = scaled.iter().map(Vec::len).sum();
    let mut sum = 0.0;
    let mut n = 0usize;
    for (j, curve) in scaled.iter().enumerate() {
        for &(x, y, dy) in curve {
            let mut acc = [0.0f64; 5];
            let mut used = 0;
            for (k, other) in scaled.iter().enumerate() {
                if k == j || other.len() < 2 {
                    continue;
                }
                let i = other.partition_point(|o| o.0 < x);
                let pair = if i == 0 {
                    // Only an exact hit on the first point brackets.
                    if other[0].0 != x {
                        continue;
                    }
                    [other[0], other[1]]
                } else if i == other.len() {
                    continue;
                } else {
                    [other[i - 1], other[i]]
                };
                for (px, py, pe) in pair {
                    let w = 1.0 / (pe * pe);
                    acc[0] += w;
                    acc[1] += w * px;
                    acc[2] += w * py;
                    acc[3] += w * px * px;
                    acc[4] += w * px * py;
                }
                used += 1;
            }
            let [k0, kx, ky, kxx, kxy] = acc;
            if used == 0 {
                continue;
            }
            let det = k0 * kxx - kx * kx;
            if !(det > 1e-300 * k0 * kxx.max(1.0)) || !det.is_finite() {
                continue;
            }
            let fit = (kxx * ky - kx * kxy) / det + x * (k0 * kxy - kx * ky) / det;
            let var = ((kxx - 2.0 * x * kx + x * x * k0) / det).max(0.0);
            sum += (y - fit).powi(2) / (dy * dy + var);
            n += 1;
        }
    }
    if n < 3 || 3 * n < total {
        return f64::INFINITY;
    }
    sum / n as f64
}

type Eval<'a> = dyn Fn(&[f64]) -> (f64, Vec<f64>) + 'a;

/// Nested-interval search over `free`, starting from `start`. `eval`
/// returns the quality and the full parameter vector it stands for.
fn zoom(
    bounds: &[(f64, f64)],
    start: &[f64],
    free: &[usize],
    g: usize,
    refinements: usize,
    eval: &Eval,
) -> (Vec<f64>, f64) {
    let mut lo: Vec<f64> = bounds.iter().map(|b| b.0).collect();
    let mut hi: Vec<f64> = bounds.iter().map(|b| b.1).collect();
    let (mut best_q, mut best) = eval(start);
    for level in 0..=refinements {
        // After the first pass the search is local; a coarser grid suffices.
        let g = if level == 0 { g } else { g.min(11) };
        let cells = g.pow(free.len() as u32);
        let mut v = best.clone();
        for cell in 0..cells {
            let mut c = cell;
            for &i in free {
                let k = c % g;
                c /= g;
                v[i] = lo[i] + (hi[i] - lo[i]) * k as f64 / (g - 1) as f64;
            }
            let (q, full) = eval(&v);
            if q < best_q {
                best_q = q;
                best = full;
            }
        }
        if free.is_empty()
            || free
                .iter()
                .all(|&i| hi[i] - lo[i] <= 1e-6 * (bounds[i].1 - bounds[i].0))
        {
            break;
        }
        // Zoom to one grid step either side of the current best.
        for &i in free {
            let step = (hi[i] - lo[i]) / (g - 1) as f64;
            lo[i] = (best[i] - step).max(bounds[i].0);
            hi[i] = (best[i] + step).min(bounds[i].1);
        }
    }
    (best, best_q)
}

/// With several free parameters the last one (the exponent) is profiled:
/// every trial exponent gets its own search over the others. A joint grid
/// can step over the narrow valley of a sharp collapse and zoom onto a
/// broad, wrong minimum.
fn grid_search(prep: &Prepared, model: &CollapseModel, grid: usize, refinements: usize) -> (Vec<f64>, f64) {
    let params = model.params();
    let bounds: Vec<(f64, f64)> = params.iter().map(|p| (p.lo(), p.hi())).collect();
    let free: Vec<usize> = (0..params.len())
        .filter(|&i| matches!(params[i], Param::Free { .. }))
        .collect();
    let g = |n: usize| match (grid, n) {
        (0, 0 | 1) => 41,
        (0, 2) => 21,
        (0, _) => 13,
        (g, _) => g.max(3),
    };
    let plain = |v: &[f64]| (quality(prep, model, v), v.to_vec());
    let start: Vec<f64> = bounds.iter().map(|b| b.0).collect();
    match free.split_last() {
        Some((&outer, inner)) if !inner.is_empty() => {
            let profile = |v: &[f64]| {
                let (best, q) = zoom(&bounds, v, inner, g(inner.len()), refinements, &plain);
                (q, best)
            };
            zoom(&bounds, &start, &[outer], g(1), refinements, &profile)
        }
        _ => zoom(&bounds, &start, &free, g(free.len()), refinements, &plain),
    }
}

/// Fits `model` to `data`. Needs at least 3 sizes with 5 points each.
pub fn fit_collapse(data: &Dataset, model: &CollapseModel, options: &FitOptions) -> Result<CollapseFit> {
    model.validate()?;
    let prep = prepare(data)?;
    let (best, q) = grid_search(&prep, model, options.grid, options.refinements);
    if !q.is_finite() {
        return Err(Error::Estimation(
            "no parameter values in range give overlapping rescaled curves".into(),
        ));
    }
    let replicas: Vec<Vec<f64>> = (0..options.bootstrap as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = StreamKey::new(options.seed).with(b).rng();
            let resampled = Dataset::new(
                data.points
                    .iter()
                    .map(|d| {
                        let mut d = *d;
                        if d.err > 0.0 {
                            d.y += Normal::new(0.0, d.err).expect("positive sigma").sample(&mut rng);
                        }
                        d
                    })
                    .collect(),
            );
            let prep = prepare(&resampled).expect("same shape as the original");
            grid_search(&prep, model, options.grid, options.refinements).0
        })
        .collect();
    let params = model.params();
    let fitted = model
        .names()
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let mut vals: Vec<f64> = replicas.iter().map(|r| r[i]).collect();
            vals.sort_by(f64::total_cmp);
            let (error, ci) = if vals.len() >= 2 {
                let (_, sem) = crate::stats::mean_sem(&vals);
                let sd = sem * (vals.len() as f64).sqrt();
                let at = |f: f64| vals[((vals.len() - 1) as f64 * f).round() as usize];
                (sd, (at(0.025), at(0.975)))
            } else {
                (0.0, (best[i], best[i]))
            };
            FittedParam {
                name: name.to_string(),
                value: best[i],
                error,
                ci,
                fixed: matches!(params[i], Param::Fixed(_)),
            }
        })
        .collect();
    Ok(CollapseFit {
        model: model.kind().into(),
        params: fitted,
        quality: q,
        n_points: prep.curves.iter().map(|c| c.points.len()).sum(),
        n_sizes: prep.curves.len(),
        bootstrap: options.bootstrap,
    })
}
