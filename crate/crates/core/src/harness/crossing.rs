//! Crossing points of `I(p)` families and the algebraic-decay threshold.

use serde::{Deserialize, Serialize};

use super::dataset::{Curve, DataPoint, Dataset};
use crate::error::{Error, Result};
use crate::stats::{linear_fit, quadratic_curvature, LineFit};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairCrossing {
    /// `(L, T)` of the two curves.
    pub a: (usize, usize),
    pub b: (usize, usize),
    /// Median of the pair's sign changes.
    pub p: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossingEstimate {
    /// Median over pairs.
    pub p: f64,
    /// Max minus min over pairs.
    pub spread: f64,
    pub pairs: Vec<PairCrossing>,
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

enum PairOutcome {
    Crossings(Vec<f64>),
    Identical,
    /// No sign change; carries the smallest `|difference|` seen.
    Miss(f64),
    NoOverlap,
}

fn pair_crossings(a: &Curve, b: &Curve) -> PairOutcome {
    let lo = a.points[0].p.max(b.points[0].p);
    let hi = a.points.last().unwrap().p.min(b.points.last().unwrap().p);
    if !(lo < hi) {
        return PairOutcome::NoOverlap;
    }
    let mut nodes: Vec<f64> = a.ps().chain(b.ps()).filter(|&p| p >= lo && p <= hi).collect();
    nodes.sort_by(f64::total_cmp);
    nodes.dedup();
    let diffs: Vec<(f64, f64)> = nodes
        .iter()
        .map(|&p| (p, a.interpolate(p).unwrap() - b.interpolate(p).unwrap()))
        .collect();
    let scale = a.points.iter().chain(&b.points).map(|d| d.y.abs()).fold(0.0, f64::max);
    let tiny = 1e-12 * scale.max(f64::MIN_POSITIVE);
    // Touching points carry no sign; the root is interpolated between the
    // neighbouring nodes that do.
    let signed: Vec<(f64, f64)> = diffs.iter().copied().filter(|d| d.1.abs() > tiny).collect();
    if signed.is_empty() {
        return PairOutcome::Identical;
    }
    let roots: Vec<f64> = signed
        .windows(2)
        .filter(|w| w[0].1.signum() != w[1].1.signum())
        .map(|w| {
            let ((p0, d0), (p1, d1)) = (w[0], w[1]);
            p0 + (p1 - p0) * d0 / (d0 - d1)
        })
        .collect();
    if roots.is_empty() {
        PairOutcome::Miss(diffs.iter().map(|d| d.1.abs()).fold(f64::INFINITY, f64::min))
    } else {
        PairOutcome::Crossings(roots)
    }
}

/// Pairwise intersections of piecewise-linear curves, one per size pair.
pub fn crossing_point(data: &Dataset) -> Result<CrossingEstimate> {
    let curves: Vec<Curve> = data.curves().into_iter().filter(|c| c.points.len() >= 2).collect();
    if curves.len() < 2 {
        return Err(Error::Estimation(
            "crossing needs at least two sizes with two points each".into(),
        ));
    }
    let mut pairs = Vec::new();
    let mut diagnostics = Vec::new();
    for i in 0..curves.len() {
        for j in i + 1..curves.len() {
            let (a, b) = (&curves[i], &curves[j]);
            let tag = format!("(L={},T={}) vs (L={},T={})", a.l, a.t, b.l, b.t);
            match pair_crossings(a, b) {
                PairOutcome::Crossings(mut roots) => pairs.push(PairCrossing {
                    a: (a.l, a.t),
                    b: (b.l, b.t),
                    count: roots.len(),
                    p: median(&mut roots),
                }),
                PairOutcome::Identical => {
                    return Err(Error::Estimation(format!(
                        "{tag}: identical curves, no unique crossing"
                    )));
                }
                PairOutcome::Miss(gap) => diagnostics.push(format!("{tag}: no sign change, min |dI| = {gap:.3e}")),
                PairOutcome::NoOverlap => diagnostics.push(format!("{tag}: p ranges do not overlap")),
            }
        }
    }
    if pairs.is_empty() {
        return Err(Error::Estimation(format!(
            "no crossing in range; {}",
            diagnostics.join("; ")
        )));
    }
    let mut ps: Vec<f64> = pairs.iter().map(|c| c.p).collect();
    let spread =
        ps.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - ps.iter().cloned().fold(f64::INFINITY, f64::min);
    Ok(CrossingEstimate {
        p: median(&mut ps),
        spread,
        pairs,
    })
}

/// Log-log fit of `I(T)` at one `p`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayTest {
    pub p: f64,
    pub n_times: usize,
    /// `None` when fewer than three usable depths exist.
    pub fit: Option<LineFit>,
    pub p_value: f64,
    /// Quadratic coefficient in `ln T` and its error; positive means the
    /// decay is flattening out.
    pub curvature: Option<(f64, f64)>,
    pub algebraic: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayEstimate {
    pub p_c: f64,
    /// Minus the log-log slope at `p_c`.
    pub beta_over_nu: f64,
    pub beta_over_nu_err: f64,
    pub tests: Vec<DecayTest>,
}

/// Smallest `p` whose `I(T)` is consistent with a power-law decay to zero:
/// a weighted straight line in `ln I` vs `ln T` with chi-square p-value
/// above `alpha`, a slope more than two standard errors below zero, and
/// no significant (two-sigma) flattening in a quadratic fit.
///
/// Depths below `min_t` are ignored; when several sizes share a depth the
/// largest `L` is used.
pub fn algebraic_decay_threshold(data: &Dataset, alpha: f64, min_t: usize) -> Result<DecayEstimate> {
    let mut ps: Vec<f64> = data.points.iter().map(|d| d.p).collect();
    ps.sort_by(f64::total_cmp);
    ps.dedup();
    let mut tests = Vec::new();
    for &p in &ps {
        let mut at_p: Vec<DataPoint> = data
            .points
            .iter()
            .copied()
            .filter(|d| d.p == p && d.t >= min_t)
            .collect();
        at_p.sort_by_key(|d| (d.t, std::cmp::Reverse(d.l)));
        at_p.dedup_by(|a, b| a.t == b.t);
        let n_times = at_p.len();
        let usable = n_times >= 3 && at_p.iter().all(|d| d.y > 0.0 && d.err > 0.0);
        let (fit, curvature) = if usable {
            let x: Vec<f64> = at_p.iter().map(|d| (d.t as f64).ln()).collect();
            let y: Vec<f64> = at_p.iter().map(|d| d.y.ln()).collect();
            let w: Vec<f64> = at_p.iter().map(|d| (d.y / d.err).powi(2)).collect();
            (linear_fit(&x, &y, Some(&w)), quadratic_curvature(&x, &y, &w))
        } else {
            (None, None)
        };
        let p_value = fit.as_ref().map_or(0.0, |f| f.p_value());
        let flattening = curvature.is_some_and(|(c, err)| c > 2.0 * err);
        let algebraic = !flattening
            && fit
                .as_ref()
                .is_some_and(|f| p_value > alpha && f.slope + 2.0 * f.slope_err < 0.0);
        tests.push(DecayTest {
            p,
            n_times,
            fit,
            p_value,
            curvature,
            algebraic,
        });
    }
    match tests.iter().find(|t| t.algebraic) {
        Some(t) => {
            let f = t.fit.unwrap();
            Ok(DecayEstimate {
                p_c: t.p,
                beta_over_nu: -f.slope,
                beta_over_nu_err: f.slope_err,
                tests,
            })
        }
        None => Err(Error::Estimation(format!(
            "no p in [{:?}, {:?}] shows algebraic decay over {} tested values",
            ps.first(),
            ps.last(),
            tests.len()
        ))),
    }
}
