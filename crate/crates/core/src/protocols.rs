//! Circuit protocols on the stabilizer engine: Bell-pair encodings, brickwork
//! scrambling, boundary dissipation and optional unitary pre-scrambling.
//!
//! Sites are 1-based in configuration (`x0 = 1` is the noisy boundary) and
//! 0-based in the tableau. The `N_R` reference qubits follow the `L`
//! system qubits.

use num_rational::Ratio;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{StreamKey, StreamRng};
use crate::stabilizer::{
    sample_clifford2_ref, sample_uniform_clifford1, CliffordGate1, CliffordGate2, Pauli, PauliString, QubitRole,
    Region, StabilizerState,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Schedule {
    /// Channel fires independently with probability `p` each timestep.
    Random,
    /// Channel fires on timesteps `t` with `t % period == 0`.
    Periodic { period: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Erasure,
    CnotAncilla,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Scrambling {
    Full,
    /// Each brickwork gate is a random Clifford with probability `p_u`,
    /// otherwise the identity.
    Sparse {
        p_u: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Prescramble {
    None,
    /// `t_scr = round(k log2 L)`.
    Log {
        k: f64,
    },
    /// `t_scr = round(multiple * L)`.
    Linear {
        multiple: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Encoding {
    SinglePair {
        x0: usize,
    },
    /// `C L` Bell pairs at evenly spaced sites.
    FiniteRate {
        c: f64,
    },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Checkpoints {
    /// Only `t = T`.
    #[default]
    Final,
    /// `t = 1, 2, 4, ...` and `t = T`.
    PowersOfTwo,
    /// Every timestep.
    Every,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerOrder {
    /// Bonds (1,2),(3,4),... before (2,3),(4,5),...
    #[default]
    OddFirst,
    EvenFirst,
}

/// One circuit experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "T")]
    pub t: usize,
    pub p: f64,
    pub schedule: Schedule,
    pub channel: Channel,
    pub scrambling: Scrambling,
    pub prescramble: Prescramble,
    pub encoding: Encoding,
    pub seed: u64,
    pub n_samples: usize,
    #[serde(default)]
    pub checkpoints: Checkpoints,
    #[serde(default)]
    pub layer_order: LayerOrder,
}

impl ProtocolConfig {
    /// Random erasure at the boundary, full scrambling, single pair at the
    /// noisy edge, no pre-scrambling.
    pub fn erasure(l: usize, t: usize, p: f64) -> Self {
        Self {
            l,
            t,
            p,
            schedule: Schedule::Random,
            channel: Channel::Erasure,
            scrambling: Scrambling::Full,
            prescramble: Prescramble::None,
            encoding: Encoding::SinglePair { x0: 1 },
            seed: 0,
            n_samples: 1,
            checkpoints: Checkpoints::Final,
            layer_order: LayerOrder::OddFirst,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.l < 2 || !self.l.is_multiple_of(2) {
            return bad(format!("L = {} must be even and at least 2", self.l));
        }
        if self.t < 1 {
            return bad("T must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.p) {
            return bad(format!("p = {} outside [0, 1]", self.p));
        }
        if self.n_samples == 0 {
            return bad("n_samples must be positive".into());
        }
        if let Schedule::Periodic { period } = self.schedule {
            if period == 0 {
                return bad("dissipation period must be positive".into());
            }
        }
        if let Scrambling::Sparse { p_u } = self.scrambling {
            if !(0.0..=1.0).contains(&p_u) {
                return bad(format!("p_U = {p_u} outside [0, 1]"));
            }
        }
        match self.prescramble {
            Prescramble::None => {}
            Prescramble::Log { k } if !(k.is_finite() && k > 0.0) => {
                return bad(format!("log pre-scrambling coefficient {k} must be positive"))
            }
            Prescramble::Linear { multiple } if !(multiple.is_finite() && multiple >= 0.0) => {
                return bad(format!(
                    "linear pre-scrambling multiple {multiple} must be non-negative"
                ))
            }
            _ => {}
        }
        match self.encoding {
            Encoding::SinglePair { x0 } => {
                if x0 < 1 || x0 > self.l {
                    return bad(format!("x0 = {x0} outside [1, {}]", self.l));
                }
            }
            Encoding::FiniteRate { c } => {
                if !(c > 0.0 && c < 1.0) {
                    return bad(format!("code rate {c} outside (0, 1)"));
                }
                let cl = c * self.l as f64;
                if (cl - cl.round()).abs() > 1e-9 || cl.round() < 1.0 {
                    return bad(format!("C L = {cl} is not a positive integer"));
                }
            }
        }
        Ok(())
    }

    /// `T / L`.
    pub fn aspect(&self) -> Ratio<usize> {
        Ratio::new(self.t, self.l)
    }

    /// Number of reference qubits `N_R`.
    pub fn n_references(&self) -> usize {
        match self.encoding {
            Encoding::SinglePair { .. } => 1,
            Encoding::FiniteRate { c } => (c * self.l as f64).round() as usize,
        }
    }

    /// 1-based system sites entangled with references.
    pub fn bell_sites(&self) -> Vec<usize> {
        match self.encoding {
            Encoding::SinglePair { x0 } => vec![x0],
            Encoding::FiniteRate { .. } => bell_sites(self.l, self.n_references()),
        }
    }

    /// Pre-scrambling depth in timesteps.
    pub fn prescramble_depth(&self) -> usize {
        prescramble_depth(self.prescramble, self.l)
    }

    /// Timesteps (counted after pre-scrambling) at which I is recorded.
    pub fn checkpoint_times(&self) -> Vec<usize> {
        match self.checkpoints {
            Checkpoints::Final => vec![self.t],
            Checkpoints::Every => (1..=self.t).collect(),
            Checkpoints::PowersOfTwo => {
                let mut ts: Vec<usize> = std::iter::successors(Some(1usize), |&t| t.checked_mul(2))
                    .take_while(|&t| t < self.t)
                    .collect();
                ts.push(self.t);
                ts
            }
        }
    }

    /// Stable 64-bit digest of the configuration.
    pub fn config_hash(&self) -> u64 {
        let json = serde_json::to_string(self).expect("config serializes");
        fnv1a(json.as_bytes())
    }

    fn fires(&self, t: usize, rng: &mut StreamRng) -> bool {
        match self.schedule {
            Schedule::Random => rng.bernoulli(self.p),
            Schedule::Periodic { period } => t.is_multiple_of(period),
        }
    }

    fn gate_probability(&self) -> f64 {
        match self.scrambling {
            Scrambling::Full => 1.0,
            Scrambling::Sparse { p_u } => p_u,
        }
    }
}

/// `n` evenly spaced 1-based sites in `1..=l` starting at the boundary.
pub fn bell_sites(l: usize, n: usize) -> Vec<usize> {
    (0..n).map(|i| i * l / n + 1).collect()
}

pub fn prescramble_depth(prescramble: Prescramble, l: usize) -> usize {
    match prescramble {
        Prescramble::None => 0,
        Prescramble::Log { k } => (k * (l as f64).log2()).round() as usize,
        Prescramble::Linear { multiple } => (multiple * l as f64).round() as usize,
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

const STAGE_INIT: u64 = 0;
const STAGE_PRESCRAMBLE: u64 = 1;
const STAGE_DISSIPATIVE: u64 = 2;
const DISSIPATION_SLOT: u64 = u64::MAX;

/// Stream key of one sample.
pub fn sample_key(config: &ProtocolConfig, sample: u64) -> StreamKey {
    StreamKey::new(config.seed).with(sample)
}

/// Initial encoding: Bell pairs between the configured sites and the
/// reference qubits, all other system sites in uniformly random
/// single-qubit stabilizer states.
pub fn build_initial_state(config: &ProtocolConfig, key: StreamKey) -> Result<StabilizerState> {
    config.validate()?;
    let l = config.l;
    let sites = config.bell_sites();
    let n = l + sites.len();
    let mut paired = vec![false; l];
    let mut gens = Vec::with_capacity(n);
    for (r, &site) in sites.iter().enumerate() {
        let (s, r) = (site - 1, l + r);
        paired[s] = true;
        for p in [Pauli::X, Pauli::Z] {
            let mut g = PauliString::identity(n);
            g.set(s, p);
            g.set(r, p);
            gens.push(g);
        }
    }
    let init = key.with(STAGE_INIT);
    for q in (0..l).filter(|&q| !paired[q]) {
        let mut rng = init.with(q as u64).rng();
        let choice = rng.below(6);
        let pauli = [Pauli::X, Pauli::Y, Pauli::Z][(choice / 2) as usize];
        let mut g = PauliString::single(n, q, pauli);
        g.set_negative(choice % 2 == 1);
        gens.push(g);
    }
    let mut state = StabilizerState::from_trusted_generators(n, &gens);
    for r in l..n {
        state.set_role(r, QubitRole::Reference);
    }
    Ok(state)
}

/// One elementary operation of a protocol.
#[derive(Clone, Debug)]
pub enum Event {
    Gate {
        gate: &'static CliffordGate2,
        a: usize,
        b: usize,
    },
    Erase {
        site: usize,
    },
    Dephase {
        site: usize,
        rotation: CliffordGate1,
    },
}

impl Event {
    pub fn apply(&self, state: &mut StabilizerState) -> Result<()> {
        match self {
            Event::Gate { gate, a, b } => state.apply_clifford2(gate, *a, *b),
            Event::Erase { site } => state.erase_qubit(*site).map(|_| ()),
            Event::Dephase { site, rotation } => state.dephase_with_rotation(*site, rotation).map(|_| ()),
        }
    }
}

/// Emits the events of one timestep: two brickwork layers, then (if
/// `dissipative`) the boundary channel on system site 1.
pub fn timestep_events(
    config: &ProtocolConfig,
    step_key: StreamKey,
    t: usize,
    dissipative: bool,
    mut emit: impl FnMut(Event),
) {
    let l = config.l;
    let p_gate = config.gate_probability();
    let offsets = match config.layer_order {
        LayerOrder::OddFirst => [0, 1],
        LayerOrder::EvenFirst => [1, 0],
    };
    let mut position = 0u64;
    for offset in offsets {
        let mut a = offset;
        while a + 1 < l {
            let mut rng = step_key.with(position).rng();
            // Always draw the gate coin so sparse and full modes share streams.
            let keep = rng.bernoulli(p_gate);
            if keep {
                emit(Event::Gate {
                    gate: sample_clifford2_ref(&mut rng),
                    a,
                    b: a + 1,
                });
            }
            position += 1;
            a += 2;
        }
    }
    if dissipative {
        let mut rng = step_key.with(DISSIPATION_SLOT).rng();
        if config.fires(t, &mut rng) {
            emit(match config.channel {
                Channel::Erasure => Event::Erase { site: 0 },
                Channel::CnotAncilla => Event::Dephase {
                    site: 0,
                    rotation: sample_uniform_clifford1(&mut rng),
                },
            });
        }
    }
}

/// Applies dissipative timestep `t` (0-based, counted after pre-scrambling).
pub fn run_timestep(state: &mut StabilizerState, config: &ProtocolConfig, key: StreamKey, t: usize) -> Result<()> {
    if t >= config.t {
        return Err(Error::InvalidArgument(format!("timestep {t} beyond T = {}", config.t)));
    }
    let step_key = key.with(STAGE_DISSIPATIVE).with(t as u64);
    let mut result = Ok(());
    timestep_events(config, step_key, t, true, |ev| {
        if result.is_ok() {
            result = ev.apply(state);
        }
    });
    result
}

/// Pre-scrambling timestep `t`: brickwork only.
pub fn run_prescramble_step(
    state: &mut StabilizerState,
    config: &ProtocolConfig,
    key: StreamKey,
    t: usize,
) -> Result<()> {
    let step_key = key.with(STAGE_PRESCRAMBLE).with(t as u64);
    let mut result = Ok(());
    timestep_events(config, step_key, t, false, |ev| {
        if result.is_ok() {
            result = ev.apply(state);
        }
    });
    result
}

/// Item of a replayable sample trace.
#[derive(Clone, Debug)]
pub enum TraceItem {
    Event(Event),
    /// I is recorded here, after `t` dissipative timesteps.
    Checkpoint(usize),
}

/// Full event sequence of one sample, in application order.
pub fn sample_trace(config: &ProtocolConfig, sample: u64) -> Result<Vec<TraceItem>> {
    config.validate()?;
    let key = sample_key(config, sample);
    let mut items = Vec::new();
    for t in 0..config.prescramble_depth() {
        timestep_events(config, key.with(STAGE_PRESCRAMBLE).with(t as u64), t, false, |e| {
            items.push(TraceItem::Event(e))
        });
    }
    let checkpoints = config.checkpoint_times();
    let mut next = 0;
    for t in 0..config.t {
        timestep_events(config, key.with(STAGE_DISSIPATIVE).with(t as u64), t, true, |e| {
            items.push(TraceItem::Event(e))
        });
        if checkpoints.get(next) == Some(&(t + 1)) {
            items.push(TraceItem::Checkpoint(t + 1));
            next += 1;
        }
    }
    Ok(items)
}

/// Mutual information (bits) between the system and the references.
pub fn system_reference_mi(state: &StabilizerState) -> u32 {
    let a = state.region_with_role(QubitRole::System);
    let r = state.region_with_role(QubitRole::Reference);
    mi_of(state, &a, &r)
}

fn mi_of(state: &StabilizerState, a: &Region, r: &Region) -> u32 {
    state.mutual_information(a, r).expect("roles partition the register") as u32
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub t: usize,
    /// `I_{A,R}` in bits.
    pub mi: u32,
}

/// Result of one sample.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub config_hash: u64,
    pub sample: u64,
    pub checkpoints: Vec<Checkpoint>,
    pub stream_id: u64,
}

impl TrajectoryRecord {
    pub fn final_mi(&self) -> u32 {
        self.checkpoints.last().map_or(0, |c| c.mi)
    }

    pub fn mi_at(&self, t: usize) -> Option<u32> {
        self.checkpoints.iter().find(|c| c.t == t).map(|c| c.mi)
    }
}

/// Runs one sample: encoding, pre-scrambling, then `T` dissipative steps.
pub fn run_sample(config: &ProtocolConfig, sample: u64) -> Result<TrajectoryRecord> {
    let key = sample_key(config, sample);
    let mut state = build_initial_state(config, key)?;
    let a = state.region_with_role(QubitRole::System);
    let r = state.region_with_role(QubitRole::Reference);
    for t in 0..config.prescramble_depth() {
        run_prescramble_step(&mut state, config, key, t)?;
    }
    let times = config.checkpoint_times();
    let mut checkpoints = Vec::with_capacity(times.len());
    let mut next = 0;
    let mut lost = false;
    for t in 0..config.t {
        if lost {
            // I = 0 cannot recover; skip the remaining work.
            while next < times.len() {
                checkpoints.push(Checkpoint { t: times[next], mi: 0 });
                next += 1;
            }
            break;
        }
        run_timestep(&mut state, config, key, t)?;
        if times.get(next) == Some(&(t + 1)) {
            let mi = mi_of(&state, &a, &r);
            lost = mi == 0;
            checkpoints.push(Checkpoint { t: t + 1, mi });
            next += 1;
        }
    }
    Ok(TrajectoryRecord {
        config_hash: config.config_hash(),
        sample,
        checkpoints,
        stream_id: key.raw(),
    })
}

/// Runs all samples in parallel; output is ordered by sample index.
pub fn run_protocol(config: &ProtocolConfig) -> Result<Vec<TrajectoryRecord>> {
    config.validate()?;
    (0..config.n_samples as u64)
        .into_par_iter()
        .map(|s| run_sample(config, s))
        .collect()
}
