//! Sweep recipes for the standard figures and their analyses.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::collapse::{fit_collapse, CollapseModel, FitOptions, Param};
use super::crossing::{algebraic_decay_threshold, crossing_point};
use super::dataset::Dataset;
use super::sweep::{Size, SweepBase, SweepRow, SweepSpec};
use crate::analytics::{dp_critical_point, finite_rate_thresholds, AnalyticModel};
use crate::domainwall::{AnnealedConfig, AnnealedEncoding, AnnealedNoise, RightBoundary};
use crate::error::{Error, Result};
use crate::protocols::{Checkpoints, Encoding, Prescramble, ProtocolConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Figure {
    /// Annealed single-boundary transition, semi-infinite chain.
    Fig2,
    /// Clifford single-boundary transition, `T/L = 1/2`.
    Fig4,
    /// Clifford with logarithmic pre-scrambling, `k = 1` and `k = 4`.
    Fig6,
    /// First-order transition, `T/L = 4`, `t_scr = L`.
    Fig8,
    /// Annealed finite-rate encoding, `C = 1/2`, `T = 7L`.
    Fig9,
    /// Clifford finite-rate encoding, `C = 1/2`, `T = 4L`.
    Fig10,
}

impl Figure {
    pub fn name(self) -> &'static str {
        match self {
            Figure::Fig2 => "fig2",
            Figure::Fig4 => "fig4",
            Figure::Fig6 => "fig6",
            Figure::Fig8 => "fig8",
            Figure::Fig9 => "fig9",
            Figure::Fig10 => "fig10",
        }
    }
}

/// `Desk` caps `L` at 512 and samples at 1000.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Desk,
    Paper,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FigureSweep {
    pub name: String,
    pub spec: SweepSpec,
}

fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as usize;
    (0..=n).map(|k| ((lo + step * k as f64) * 1e9).round() / 1e9).collect()
}

fn pick<T>(scale: Scale, desk: T, paper: T) -> T {
    match scale {
        Scale::Desk => desk,
        Scale::Paper => paper,
    }
}

fn sweep(
    name: &str,
    dir: &Path,
    base: SweepBase,
    p_grid: Vec<f64>,
    sizes: Vec<Size>,
    samples: usize,
    seed: u64,
) -> FigureSweep {
    FigureSweep {
        name: name.into(),
        spec: SweepSpec {
            name: Some(name.into()),
            base,
            p_grid,
            sizes,
            samples,
            out_dir: dir.join(name),
            seed,
        },
    }
}

fn clifford(encoding: Encoding, prescramble: Prescramble, checkpoints: Checkpoints) -> SweepBase {
    let mut c = ProtocolConfig::erasure(2, 1, 0.0);
    c.encoding = encoding;
    c.prescramble = prescramble;
    c.checkpoints = checkpoints;
    SweepBase::Clifford(c)
}

fn annealed(boundary: RightBoundary, encoding: AnnealedEncoding, noise: AnnealedNoise) -> SweepBase {
    let mut c = AnnealedConfig::single_pair(2.0, 2, 1, 0.0);
    c.right_boundary = boundary;
    c.encoding = encoding;
    c.noise = noise;
    SweepBase::Annealed(c)
}

/// Sweep specs for `figure`, writing under `dir/<sweep name>/`.
pub fn figure_sweeps(figure: Figure, scale: Scale, dir: &Path, seed: u64) -> Result<Vec<FigureSweep>> {
    let pair = Encoding::SinglePair { x0: 1 };
    let out = match figure {
        Figure::Fig2 => {
            let exps = pick(scale, 6..=12, 6..=14);
            let sizes = exps.map(|e| Size::new(2 << e, 1 << e)).collect();
            let base = annealed(
                RightBoundary::SemiInfinite,
                AnnealedEncoding::SinglePair { x0: 1 },
                AnnealedNoise::Deterministic,
            );
            // Fine grid: at large T the curves bend sharply near p_c.
            vec![sweep(
                "semi_infinite",
                dir,
                base,
                grid(0.24, 0.49, 0.0025),
                sizes,
                1,
                seed,
            )]
        }
        Figure::Fig4 => {
            let ls: Vec<usize> = pick(scale, vec![128, 256, 512], vec![128, 256, 512, 1024]);
            let sizes = ls.iter().map(|&l| Size::new(l, l / 2)).collect();
            let base = clifford(pair, Prescramble::None, Checkpoints::PowersOfTwo);
            vec![sweep(
                "erasure",
                dir,
                base,
                grid(0.3, 0.7, 0.05),
                sizes,
                pick(scale, 1000, 4000),
                seed,
            )]
        }
        Figure::Fig6 => {
            let ls: Vec<usize> = pick(scale, vec![64, 128, 256], vec![64, 128, 256, 512]);
            let sizes: Vec<Size> = ls.iter().map(|&l| Size::new(l, l / 2)).collect();
            let samples = pick(scale, 1000, 4000);
            vec![
                sweep(
                    "log_k1",
                    dir,
                    clifford(pair, Prescramble::Log { k: 1.0 }, Checkpoints::Final),
                    grid(0.3, 1.0, 0.05),
                    sizes.clone(),
                    samples,
                    seed,
                ),
                sweep(
                    "log_k4",
                    dir,
                    clifford(pair, Prescramble::Log { k: 4.0 }, Checkpoints::Final),
                    grid(0.0, 1.0, 0.1),
                    sizes,
                    samples,
                    seed,
                ),
            ]
        }
        Figure::Fig8 => {
            let ls: Vec<usize> = pick(scale, vec![32, 64, 128], vec![32, 64, 128, 256]);
            let sizes: Vec<Size> = ls.iter().map(|&l| Size::new(l, 4 * l).with_t_scr(l)).collect();
            let als: Vec<usize> = pick(scale, vec![16, 32, 64, 128], vec![16, 32, 64, 128, 256, 512]);
            let asizes: Vec<Size> = als.iter().map(|&l| Size::new(l, 4 * l).with_t_scr(l)).collect();
            let single = AnnealedEncoding::SinglePair { x0: 1 };
            vec![
                sweep(
                    "clifford",
                    dir,
                    clifford(pair, Prescramble::None, Checkpoints::Final),
                    grid(0.0, 0.3, 0.02),
                    sizes,
                    pick(scale, 1000, 4000),
                    seed,
                ),
                sweep(
                    "annealed_deterministic",
                    dir,
                    annealed(RightBoundary::Absorbing, single.clone(), AnnealedNoise::Deterministic),
                    // The step narrows as 1/L; resolve it at the largest size.
                    grid(0.08, 0.16, 0.0005),
                    asizes.clone(),
                    1,
                    seed,
                ),
                sweep(
                    "annealed_random_times",
                    dir,
                    annealed(
                        RightBoundary::Absorbing,
                        single,
                        AnnealedNoise::RandomTimes { realizations: 1, seed },
                    ),
                    grid(0.0, 0.4, 0.01),
                    asizes,
                    pick(scale, 1000, 4000),
                    seed,
                ),
            ]
        }
        Figure::Fig9 => {
            let ls: Vec<usize> = pick(scale, vec![16, 32, 64, 128], vec![16, 32, 64, 128, 256, 512]);
            let sizes = ls.iter().map(|&l| Size::new(l, 7 * l).with_t_scr(l)).collect();
            let base = annealed(
                RightBoundary::Absorbing,
                AnnealedEncoding::FiniteRate { c: 0.5, sites: vec![] },
                AnnealedNoise::Deterministic,
            );
            vec![sweep("finite_rate", dir, base, grid(0.0, 0.4, 0.005), sizes, 1, seed)]
        }
        Figure::Fig10 => {
            let ls: Vec<usize> = pick(scale, vec![16, 32, 64], vec![16, 32, 64, 128]);
            let sizes = ls.iter().map(|&l| Size::new(l, 4 * l).with_t_scr(l)).collect();
            let base = clifford(Encoding::FiniteRate { c: 0.5 }, Prescramble::None, Checkpoints::Final);
            vec![sweep(
                "finite_rate",
                dir,
                base,
                grid(0.0, 0.5, 0.025),
                sizes,
                pick(scale, 200, 1000),
                seed,
            )]
        }
    };
    for s in &out {
        s.spec.validate()?;
        // A semi-infinite chain never reaches its right end; L is a label.
        let finite = !matches!(&s.spec.base, SweepBase::Annealed(c) if c.right_boundary == RightBoundary::SemiInfinite);
        if scale == Scale::Desk && (s.spec.samples > 1000 || (finite && s.spec.sizes.iter().any(|z| z.l > 512))) {
            return Err(Error::Config(format!("{}: exceeds desk scale", s.name)));
        }
    }
    Ok(out)
}

fn rows_named<'a>(results: &'a [(String, Vec<SweepRow>)], name: &str) -> Result<&'a [SweepRow]> {
    results
        .iter()
        .find(|(n, _)| n == name)
        .map(|(_, r)| r.as_slice())
        .ok_or_else(|| Error::Config(format!("missing sweep `{name}`")))
}

/// Rows at each size's final depth.
pub fn final_rows(rows: &[SweepRow]) -> Vec<SweepRow> {
    rows.iter()
        .filter(|r| !rows.iter().any(|o| o.l == r.l && o.t > r.t))
        .cloned()
        .collect()
}

fn fit_json(r: Result<impl Serialize>) -> Value {
    match r {
        Ok(v) => serde_json::to_value(v).unwrap_or(Value::Null),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

/// Power-law collapse at the analytic `p_c(2)` with free exponents.
pub fn annealed_collapse(rows: &[SweepRow], options: &FitOptions) -> Result<super::collapse::CollapseFit> {
    let p_c = AnalyticModel::new(2.0)?.critical_p()?.p_c;
    let model = CollapseModel::PowerLaw {
        p_c: Param::Fixed(p_c),
        beta_over_nu: Param::Free { lo: 0.0, hi: 1.0 },
        nu: Param::Free { lo: 0.5, hi: 5.0 },
    };
    fit_collapse(&Dataset::from_rows(rows), &model, options)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DpKink {
    pub p_c: f64,
    pub t_small: usize,
    pub t_large: usize,
}

/// Transfer-matrix critical point from the two deepest sweep depths.
pub fn annealed_kink(rows: &[SweepRow]) -> Result<DpKink> {
    let mut ts: Vec<usize> = rows.iter().map(|r| r.t).collect();
    ts.sort_unstable();
    ts.dedup();
    let [.., a, b] = ts[..] else {
        return Err(Error::Estimation("kink needs two depths".into()));
    };
    let p_c = dp_critical_point(2.0, a, b, (0.2, 0.5), 1e-7)?;
    Ok(DpKink {
        p_c,
        t_small: a,
        t_large: b,
    })
}

/// Step collapse `I((p - p_d) L^omega)`.
pub fn step_collapse(rows: &[SweepRow], omega: Param, options: &FitOptions) -> Result<super::collapse::CollapseFit> {
    let model = CollapseModel::Step {
        p_d: Param::Free { lo: 0.01, hi: 0.5 },
        omega,
    };
    fit_collapse(&Dataset::from_rows(rows), &model, options)
}

/// Significance level and smallest depth of the Clifford decay test.
pub const DECAY_ALPHA: f64 = 0.05;
pub const DECAY_MIN_T: usize = 4;

/// Summary numbers for a finished figure sweep.
pub fn analyze_figure(figure: Figure, results: &[(String, Vec<SweepRow>)]) -> Result<Value> {
    let options = FitOptions::default();
    let value = match figure {
        Figure::Fig2 => {
            let rows = rows_named(results, "semi_infinite")?;
            let p_c = AnalyticModel::new(2.0)?.critical_p()?;
            json!({
                "analytic_p_c": p_c.p_c,
                "dp_kink": fit_json(annealed_kink(rows)),
                "collapse_at_analytic_p_c": fit_json(annealed_collapse(rows, &options)),
                "crossing": fit_json(crossing_point(&Dataset::from_rows(rows))),
            })
        }
        Figure::Fig4 => {
            let rows = rows_named(results, "erasure")?;
            let all = Dataset::from_rows(rows);
            let decay = algebraic_decay_threshold(&all, DECAY_ALPHA, DECAY_MIN_T);
            let finals = Dataset::from_rows(&final_rows(rows));
            let (nu2, free) = match &decay {
                Ok(d) => {
                    let fixed = |nu: Param| CollapseModel::PowerLaw {
                        p_c: Param::Fixed(d.p_c),
                        beta_over_nu: Param::Fixed(d.beta_over_nu),
                        nu,
                    };
                    (
                        fit_json(fit_collapse(&finals, &fixed(Param::Fixed(2.0)), &options)),
                        fit_json(fit_collapse(
                            &finals,
                            &fixed(Param::Free { lo: 1.0, hi: 4.0 }),
                            &options,
                        )),
                    )
                }
                Err(e) => (json!({ "error": e.to_string() }), Value::Null),
            };
            json!({
                "decay_threshold": fit_json(decay),
                "collapse_nu_2": nu2,
                "collapse_nu_free": free,
            })
        }
        Figure::Fig6 => {
            let k1 = rows_named(results, "log_k1")?;
            let k4 = rows_named(results, "log_k4")?;
            let l_max = k4.iter().map(|r| r.l).max().unwrap_or(0);
            let min_k4 = k4
                .iter()
                .filter(|r| r.l == l_max)
                .map(|r| r.mean_i)
                .fold(f64::INFINITY, f64::min);
            json!({
                "k1_crossing": fit_json(crossing_point(&Dataset::from_rows(k1))),
                "k4_largest_L": l_max,
                "k4_min_I": min_k4,
            })
        }
        Figure::Fig8 => {
            let cl = rows_named(results, "clifford")?;
            let det = rows_named(results, "annealed_deterministic")?;
            let rnd = rows_named(results, "annealed_random_times")?;
            let free = Param::Free { lo: 0.1, hi: 1.5 };
            json!({
                "clifford_step": fit_json(step_collapse(cl, free, &options)),
                "clifford_step_omega_half": fit_json(step_collapse(cl, Param::Fixed(0.5), &options)),
                "clifford_crossing": fit_json(crossing_point(&Dataset::from_rows(cl))),
                "annealed_deterministic_step": fit_json(step_collapse(det, free, &options)),
                "annealed_deterministic_step_omega_1": fit_json(step_collapse(det, Param::Fixed(1.0), &options)),
                "annealed_random_times_step": fit_json(step_collapse(rnd, free, &options)),
                "annealed_random_times_step_omega_half": fit_json(step_collapse(rnd, Param::Fixed(0.5), &options)),
            })
        }
        Figure::Fig9 => {
            let rows = rows_named(results, "finite_rate")?;
            let regimes = finite_rate_regimes(rows);
            let analytic: Vec<Value> = regimes
                .iter()
                .map(|r| fit_json(finite_rate_thresholds(2.0, 0.5, r.l, r.t, None)))
                .collect();
            json!({ "regimes": regimes, "analytic_estimates": analytic })
        }
        Figure::Fig10 => {
            let rows = rows_named(results, "finite_rate")?;
            json!({ "regimes": finite_rate_regimes(rows) })
        }
    };
    Ok(value)
}

/// Plateau / decay / zero structure of one finite-rate curve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiniteRateRegimes {
    pub l: usize,
    pub t: usize,
    /// `2 C L` (units of `log_q`; bits for Clifford rows).
    pub maximum: f64,
    /// `maximum - I` at the smallest `p`.
    pub plateau_deficit: f64,
    /// Last `p` with `I >= (1 - tol) maximum`.
    pub p_th1: Option<f64>,
    /// First `p` with `I <= tol maximum`.
    pub p_th2: Option<f64>,
    /// Slope of `I` against `log_q (1 - p)` across the intermediate
    /// regime (`0.2 < I / maximum < 0.8`), and its ratio to `2 T`.
    pub log_slope: Option<f64>,
    pub log_slope_over_2t: Option<f64>,
}

const REGIME_TOL: f64 = 0.02;

pub fn finite_rate_regimes(rows: &[SweepRow]) -> Vec<FiniteRateRegimes> {
    Dataset::from_rows(rows)
        .curves()
        .into_iter()
        .map(|c| {
            let row = rows.iter().find(|r| r.l == c.l && r.t == c.t).expect("curve from rows");
            let maximum = 2.0 * (row.c * row.l as f64).round();
            let first = c.points.first().map_or(f64::NAN, |d| d.y);
            let p_th1 = c
                .points
                .iter()
                .take_while(|d| d.y >= (1.0 - REGIME_TOL) * maximum)
                .last()
                .map(|d| d.p);
            let p_th2 = c.points.iter().find(|d| d.y <= REGIME_TOL * maximum).map(|d| d.p);
            let mid: Vec<(f64, f64)> = c
                .points
                .iter()
                .filter(|d| d.y > 0.2 * maximum && d.y < 0.8 * maximum && d.p < 1.0)
                .map(|d| ((1.0 - d.p).ln() / 2f64.ln(), d.y))
                .collect();
            let log_slope = if mid.len() >= 2 {
                let (x, y): (Vec<f64>, Vec<f64>) = mid.into_iter().unzip();
                crate::stats::linear_fit(&x, &y, None).map(|f| f.slope)
            } else {
                None
            };
            FiniteRateRegimes {
                l: c.l,
                t: c.t,
                maximum,
                plateau_deficit: maximum - first,
                p_th1,
                p_th2,
                log_slope,
                log_slope_over_2t: log_slope.map(|s| s / (2.0 * c.t as f64)),
            }
        })
        .collect()
}
