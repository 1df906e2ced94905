use serde::{Deserialize, Serialize};

use super::sweep::SweepRow;

/// One aggregated measurement `I(p; L, T) = y ± err`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataPoint {
    pub l: usize,
    pub t: usize,
    pub p: f64,
    pub y: f64,
    pub err: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub points: Vec<DataPoint>,
}

/// Points of one `(L, T)` size, sorted by `p`.
#[derive(Clone, Debug, PartialEq)]
pub struct Curve {
    pub l: usize,
    pub t: usize,
    pub points: Vec<DataPoint>,
}

impl Curve {
    pub fn ps(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|d| d.p)
    }

    /// Piecewise-linear value at `p`, `None` outside the sampled range.
    pub fn interpolate(&self, p: f64) -> Option<f64> {
        let pts = &self.points;
        let first = pts.first()?;
        let last = pts.last()?;
        if p < first.p || p > last.p {
            return None;
        }
        let k = pts.partition_point(|d| d.p < p);
        if k < pts.len() && pts[k].p == p {
            return Some(pts[k].y);
        }
        let (a, b) = (pts[k - 1], pts[k]);
        Some(a.y + (b.y - a.y) * (p - a.p) / (b.p - a.p))
    }
}

impl Dataset {
    pub fn new(points: Vec<DataPoint>) -> Self {
        Self { points }
    }

    pub fn from_rows(rows: &[SweepRow]) -> Self {
        Self::new(
            rows.iter()
                .map(|r| DataPoint {
                    l: r.l,
                    t: r.t,
                    p: r.p,
                    y: r.mean_i,
                    err: r.sem_i,
                })
                .collect(),
        )
    }

    pub fn filter(&self, keep: impl Fn(&DataPoint) -> bool) -> Self {
        Self::new(self.points.iter().copied().filter(|d| keep(d)).collect())
    }

    /// One curve per distinct `(L, T)`, ordered by `(L, T)`. Repeated `p`
    /// values within a size keep the first occurrence.
    pub fn curves(&self) -> Vec<Curve> {
        let mut keys: Vec<(usize, usize)> = self.points.iter().map(|d| (d.l, d.t)).collect();
        keys.sort_unstable();
        keys.dedup();
        keys.into_iter()
            .map(|(l, t)| {
                let mut points: Vec<DataPoint> = self.points.iter().copied().filter(|d| d.l == l && d.t == t).collect();
                points.sort_by(|a, b| a.p.total_cmp(&b.p));
                points.dedup_by(|a, b| a.p == b.p);
                Curve { l, t, points }
            })
            .collect()
    }
}
