//! Config-driven sweeps over `(p, L, T)` grids with CSV + manifest output.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};

use crate::analytics::AnalyticModel;
use crate::domainwall::{annealed_realizations, AnnealedConfig, AnnealedEncoding, AnnealedNoise};
use crate::error::{Error, Result};
use crate::protocols::{run_sample, Channel, Encoding, Prescramble, ProtocolConfig, Schedule, Scrambling};
use crate::stats::mean_sem;

/// Engine plus its base configuration; `L`, `T`, `p`, seed and sample
/// count are overridden per grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "engine", rename_all = "snake_case")]
pub enum SweepBase {
    Clifford(ProtocolConfig),
    Annealed(AnnealedConfig),
}

impl SweepBase {
    pub fn engine(&self) -> &'static str {
        match self {
            SweepBase::Clifford(_) => "clifford",
            SweepBase::Annealed(_) => "annealed",
        }
    }
}

/// One system size. `t_scr` overrides the pre-scrambling depth.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Size {
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "T")]
    pub t: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_scr: Option<usize>,
}

impl Size {
    pub fn new(l: usize, t: usize) -> Self {
        Self { l, t, t_scr: None }
    }

    pub fn with_t_scr(mut self, t_scr: usize) -> Self {
        self.t_scr = Some(t_scr);
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    /// Label for the `protocol` column; derived from the encoding if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub base: SweepBase,
    pub p_grid: Vec<f64>,
    pub sizes: Vec<Size>,
    /// Circuit samples (Clifford) or noise realizations (random-time
    /// annealed); ignored for deterministic annealed runs.
    pub samples: usize,
    pub out_dir: PathBuf,
    pub seed: u64,
}

/// One aggregated CSV row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub engine: String,
    pub protocol: String,
    pub channel: String,
    pub schedule: String,
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "T")]
    pub t: usize,
    #[serde(serialize_with = "sci")]
    pub p: f64,
    #[serde(rename = "p_U", serialize_with = "sci")]
    pub p_u: f64,
    pub t_scr: usize,
    #[serde(rename = "C", serialize_with = "sci")]
    pub c: f64,
    pub n_samples: usize,
    #[serde(rename = "mean_I", serialize_with = "sci")]
    pub mean_i: f64,
    #[serde(rename = "sem_I", serialize_with = "sci")]
    pub sem_i: f64,
    pub seed: u64,
}

fn sci<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&format!("{v:.16e}"))
}

/// Files written by [`run_sweep`].
#[derive(Clone, Debug)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub csv: PathBuf,
    pub manifest: PathBuf,
    pub plot: PathBuf,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub spec: SweepSpec,
    pub seed: u64,
    pub version: String,
    pub started_unix: u64,
    pub wall_clock_seconds: f64,
    pub rows: usize,
    pub csv: String,
    /// Bisection root of the annealed pinning balance at the run's `q`
    /// (qubits for the Clifford engine).
    pub analytic_p_c: Option<f64>,
}

enum Point {
    Clifford(ProtocolConfig),
    Annealed(AnnealedConfig),
}

impl SweepSpec {
    /// Checks the grid and every derived configuration without running.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.p_grid.is_empty() {
            return bad("empty p grid".into());
        }
        if self.sizes.is_empty() {
            return bad("empty size list".into());
        }
        if self.samples == 0 {
            return bad("samples must be positive".into());
        }
        if let Some(p) = self.p_grid.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return bad(format!("p = {p} outside [0, 1]"));
        }
        self.points().map(|_| ())
    }

    fn points(&self) -> Result<Vec<Point>> {
        let mut out = Vec::with_capacity(self.sizes.len() * self.p_grid.len());
        for size in &self.sizes {
            for &p in &self.p_grid {
                let point = match &self.base {
                    SweepBase::Clifford(base) => {
                        let mut c = base.clone();
                        c.l = size.l;
                        c.t = size.t;
                        c.p = p;
                        c.seed = self.seed;
                        c.n_samples = self.samples;
                        if let Some(d) = size.t_scr {
                            c.prescramble = Prescramble::Linear {
                                multiple: d as f64 / size.l as f64,
                            };
                        }
                        c.validate()
                            .map_err(|e| Error::Config(format!("size L={} T={}: {e}", size.l, size.t)))?;
                        Point::Clifford(c)
                    }
                    SweepBase::Annealed(base) => {
                        let mut c = base.clone();
                        c.l = size.l;
                        c.t = size.t;
                        c.p = p;
                        if let Some(d) = size.t_scr {
                            c.prescramble_depth = d;
                        }
                        if let AnnealedNoise::RandomTimes { realizations, .. } = &mut c.noise {
                            *realizations = self.samples;
                        }
                        if let AnnealedNoise::RandomTimes { seed, .. } = &mut c.noise {
                            *seed = self.seed;
                        }
                        c.validate()
                            .map_err(|e| Error::Config(format!("size L={} T={}: {e}", size.l, size.t)))?;
                        Point::Annealed(c)
                    }
                };
                out.push(point);
            }
        }
        Ok(out)
    }

    fn protocol_label(&self) -> String {
        if let Some(n) = &self.name {
            return n.clone();
        }
        let finite = match &self.base {
            SweepBase::Clifford(c) => matches!(c.encoding, Encoding::FiniteRate { .. }),
            SweepBase::Annealed(c) => matches!(c.encoding, AnnealedEncoding::FiniteRate { .. }),
        };
        if finite { "finite_rate" } else { "single_pair" }.into()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: SweepSpec = serde_json::from_str(text)?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

/// Runs every grid point and returns the aggregated rows in spec order
/// (sizes outer, `p` inner; Clifford checkpoints expand into extra rows).
/// Output does not depend on the size of the rayon pool.
pub fn compute_rows(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let points = spec.points()?;
    let label = spec.protocol_label();
    let mut rows = Vec::new();
    // Flatten (point, sample) so small grids still fill the pool.
    let jobs: Vec<(usize, u64)> = points
        .iter()
        .enumerate()
        .flat_map(|(i, pt)| {
            let n = match pt {
                Point::Clifford(c) => c.n_samples as u64,
                Point::Annealed(_) => 1,
            };
            (0..n).map(move |s| (i, s))
        })
        .collect();
    let results: Vec<Vec<(usize, f64)>> = jobs
        .par_iter()
        .map(|&(i, s)| match &points[i] {
            Point::Clifford(c) => run_sample(c, s).map(|r| r.checkpoints.iter().map(|k| (k.t, k.mi as f64)).collect()),
            Point::Annealed(c) => annealed_realizations(c).map(|o| o.iter().map(|o| (c.t, o.mi)).collect()),
        })
        .collect::<Result<_>>()?;

    let mut cursor = 0;
    for pt in &points {
        match pt {
            Point::Clifford(c) => {
                let chunk = &results[cursor..cursor + c.n_samples];
                cursor += c.n_samples;
                for (k, &t) in c.checkpoint_times().iter().enumerate() {
                    let values: Vec<f64> = chunk.iter().map(|r| r[k].1).collect();
                    let (mean, sem) = mean_sem(&values);
                    rows.push(clifford_row(&label, c, t, values.len(), mean, sem));
                }
            }
            Point::Annealed(c) => {
                let values: Vec<f64> = results[cursor].iter().map(|v| v.1).collect();
                cursor += 1;
                let (mean, sem) = mean_sem(&values);
                rows.push(annealed_row(&label, c, values.len(), mean, sem, spec.seed));
            }
        }
    }
    Ok(rows)
}

fn clifford_row(label: &str, c: &ProtocolConfig, t: usize, n: usize, mean: f64, sem: f64) -> SweepRow {
    SweepRow {
        engine: "clifford".into(),
        protocol: label.into(),
        channel: match c.channel {
            Channel::Erasure => "erasure",
            Channel::CnotAncilla => "cnot_ancilla",
        }
        .into(),
        schedule: match c.schedule {
            Schedule::Random => "random".into(),
            Schedule::Periodic { period } => format!("periodic_{period}"),
        },
        l: c.l,
        t,
        p: c.p,
        p_u: match c.scrambling {
            Scrambling::Full => 1.0,
            Scrambling::Sparse { p_u } => p_u,
        },
        t_scr: c.prescramble_depth(),
        c: c.n_references() as f64 / c.l as f64,
        n_samples: n,
        mean_i: mean,
        sem_i: sem,
        seed: c.seed,
    }
}

fn annealed_row(label: &str, c: &AnnealedConfig, n: usize, mean: f64, sem: f64, seed: u64) -> SweepRow {
    let random = matches!(c.noise, AnnealedNoise::RandomTimes { .. });
    SweepRow {
        engine: "annealed".into(),
        protocol: label.into(),
        channel: "depolarizing".into(),
        schedule: if random { "random_times" } else { "every_step" }.into(),
        l: c.l,
        t: c.t,
        p: c.p,
        p_u: 1.0,
        t_scr: c.prescramble_depth,
        c: c.bell_sites().len() as f64 / c.l as f64,
        n_samples: n,
        mean_i: mean,
        sem_i: sem,
        seed,
    }
}

pub fn write_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_csv(path: &Path) -> Result<Vec<SweepRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| csv_err(path, e))).collect()
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            _ => unreachable!(),
        }
    } else {
        Error::Config(format!("{}: {e}", path.display()))
    }
}

/// Gnuplot script plotting `mean_I` against `p`, one series per size.
pub fn gnuplot_script(csv_name: &str, rows: &[SweepRow], title: &str) -> String {
    let mut sizes: Vec<(usize, usize)> = rows.iter().map(|r| (r.l, r.t)).collect();
    sizes.sort_unstable();
    sizes.dedup();
    let mut s = String::new();
    s.push_str("set datafile separator ','\n");
    s.push_str(&format!("set title '{title}'\n"));
    s.push_str("set xlabel 'p'\nset ylabel 'I_{A,R}'\nset key outside right\n");
    let series: Vec<String> = sizes
        .iter()
        .map(|(l, t)| {
            format!("'{csv_name}' every ::1 using (($5=={l} && $6=={t}) ? $7 : 1/0):12:13 with yerrorlines title 'L={l} T={t}'")
        })
        .collect();
    s.push_str("plot ");
    s.push_str(&series.join(", \\\n     "));
    s.push('\n');
    s
}

/// Validates, creates the output files, runs the sweep and writes
/// `sweep.csv`, `manifest.json` and `plot.gp` into `spec.out_dir`.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let dir = &spec.out_dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv_path = dir.join("sweep.csv");
    let manifest_path = dir.join("manifest.json");
    let plot_path = dir.join("plot.gp");
    // Fail on an unwritable directory before any computation.
    for p in [&csv_path, &manifest_path, &plot_path] {
        fs::File::create(p).map_err(|e| Error::io(p, e))?;
    }
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let clock = Instant::now();
    let rows = compute_rows(spec)?;
    write_csv(&csv_path, &rows)?;

    let q = match &spec.base {
        SweepBase::Clifford(_) => 2.0,
        SweepBase::Annealed(c) => c.q,
    };
    let analytic_p_c = AnalyticModel::new(q).and_then(|m| m.critical_p()).ok().map(|c| c.p_c);
    let manifest = Manifest {
        spec: spec.clone(),
        seed: spec.seed,
        version: env!("CARGO_PKG_VERSION").into(),
        started_unix: started,
        wall_clock_seconds: clock.elapsed().as_secs_f64(),
        rows: rows.len(),
        csv: "sweep.csv".into(),
        analytic_p_c,
    };
    let mut f = fs::File::create(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    serde_json::to_writer_pretty(&mut f, &manifest)?;
    writeln!(f).map_err(|e| Error::io(&manifest_path, e))?;

    let title = spec.name.clone().unwrap_or_else(|| spec.base.engine().to_string());
    fs::write(&plot_path, gnuplot_script("sweep.csv", &rows, &title)).map_err(|e| Error::io(&plot_path, e))?;
    Ok(SweepResult {
        rows,
        csv: csv_path,
        manifest: manifest_path,
        plot: plot_path,
    })
}
