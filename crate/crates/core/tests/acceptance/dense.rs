//! Tableau entropies against a dense density-matrix simulation of the same
//! event traces.

use dcl_core::protocols::{
    build_initial_state, run_sample, sample_key, sample_trace, Channel, Checkpoints, Encoding, Event, Prescramble,
    ProtocolConfig, Schedule, Scrambling, TraceItem,
};
use dcl_core::rng::StreamKey;
use dcl_core::stabilizer::{CliffordGate1, CliffordGate2, Pauli, PauliString, QubitRole, Region, StabilizerState};
use nalgebra::DMatrix;
use num_complex::Complex64;

type M = DMatrix<Complex64>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

fn pauli1(p: Pauli) -> M {
    match p {
        Pauli::I => M::from_row_slice(2, 2, &[ONE, ZERO, ZERO, ONE]),
        Pauli::X => M::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]),
        Pauli::Y => M::from_row_slice(2, 2, &[ZERO, -I, I, ZERO]),
        Pauli::Z => M::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]),
    }
}

/// Qubit `q` is bit `q` of the basis index, so the kron runs from the
/// highest qubit down.
fn kron_all(ops: &[M]) -> M {
    ops.iter()
        .rev()
        .fold(M::from_element(1, 1, ONE), |acc, m| acc.kronecker(m))
}

fn dense_pauli(p: &PauliString) -> M {
    let ops: Vec<M> = (0..p.num_qubits()).map(|q| pauli1(p.get(q))).collect();
    let m = kron_all(&ops);
    if p.is_negative() {
        -m
    } else {
        m
    }
}

/// Local Pauli from a packed `(x_0, z_0, x_1, z_1, ...)` pattern with the
/// Hermitian phase convention.
fn local_pauli(bits: u8, qubits: usize, negative: bool) -> M {
    let ops: Vec<M> = (0..qubits)
        .map(|q| {
            pauli1(Pauli::from_bits(
                (bits >> (2 * q)) & 1 == 1,
                (bits >> (2 * q + 1)) & 1 == 1,
            ))
        })
        .collect();
    let m = kron_all(&ops);
    if negative {
        -m
    } else {
        m
    }
}

/// Unitary (up to phase) realizing the generator images, recovered from
/// `sum_P g(P) M P^dagger = d Tr(U^dagger M) U`.
fn unitary_from_images(images: &[u8], signs: u8, qubits: usize) -> M {
    let d = 1usize << qubits;
    let gens: Vec<M> = (0..2 * qubits).map(|g| local_pauli(1 << g, qubits, false)).collect();
    let imgs: Vec<M> = images
        .iter()
        .enumerate()
        .map(|(g, &b)| local_pauli(b, qubits, (signs >> g) & 1 == 1))
        .collect();
    let mut pairs = Vec::new();
    for mask in 0..(1u32 << (2 * qubits)) {
        let mut p = M::identity(d, d);
        let mut gp = M::identity(d, d);
        for g in 0..2 * qubits {
            if (mask >> g) & 1 == 1 {
                p = &p * &gens[g];
                gp = &gp * &imgs[g];
            }
        }
        pairs.push((p, gp));
    }
    for k in 0..d * d {
        let mut seed = M::zeros(d, d);
        seed[(k / d, k % d)] = ONE;
        let mut u = M::zeros(d, d);
        for (p, gp) in &pairs {
            u += gp * &seed * p.adjoint();
        }
        let norm2 = (u.adjoint() * &u)[(0, 0)].re;
        if norm2 > 1e-9 {
            let u = u / Complex64::new(norm2.sqrt(), 0.0);
            assert!((u.adjoint() * &u - M::identity(d, d)).norm() < 1e-9, "not unitary");
            for (g, img) in gens.iter().zip(&imgs) {
                assert!((&u * g * u.adjoint() - img).norm() < 1e-9, "images not reproduced");
            }
            return u;
        }
    }
    unreachable!("some matrix unit has nonzero overlap with U")
}

/// Embeds a `2^k`-dimensional operator acting on `sites` (local qubit `i`
/// is `sites[i]`) into `n` qubits.
fn embed(op: &M, sites: &[usize], n: usize) -> M {
    let dim = 1usize << n;
    let mut out = M::zeros(dim, dim);
    let local = |i: usize| {
        sites
            .iter()
            .enumerate()
            .fold(0usize, |acc, (k, &s)| acc | (((i >> s) & 1) << k))
    };
    let rest_mask = !sites.iter().fold(0usize, |acc, &s| acc | (1 << s));
    for i in 0..dim {
        for j in 0..dim {
            if i & rest_mask == j & rest_mask {
                out[(i, j)] = op[(local(i), local(j))];
            }
        }
    }
    out
}

fn partial_trace(rho: &M, keep: &[usize], n: usize) -> M {
    let dim = 1usize << n;
    let k = keep.len();
    let mut out = M::zeros(1 << k, 1 << k);
    let local = |i: usize| {
        keep.iter()
            .enumerate()
            .fold(0usize, |acc, (b, &s)| acc | (((i >> s) & 1) << b))
    };
    let keep_mask = keep.iter().fold(0usize, |acc, &s| acc | (1 << s));
    for i in 0..dim {
        for j in 0..dim {
            if i & !keep_mask == j & !keep_mask {
                out[(local(i), local(j))] += rho[(i, j)];
            }
        }
    }
    out
}

fn entropy_bits(rho: &M) -> f64 {
    if rho.nrows() == 1 {
        return 0.0;
    }
    let eig = rho.clone().symmetric_eigen();
    eig.eigenvalues
        .iter()
        .filter(|&&l| l > 1e-12)
        .map(|&l| -l * l.log2())
        .sum()
}

struct Dense {
    n: usize,
    rho: M,
}

impl Dense {
    fn from_state(state: &StabilizerState) -> Self {
        let n = state.num_qubits();
        let dim = 1usize << n;
        let mut rho = M::identity(dim, dim);
        for g in state.generators() {
            rho = &rho * (M::identity(dim, dim) + dense_pauli(&g)) / Complex64::new(2.0, 0.0);
        }
        let tr = rho.trace();
        Self { n, rho: rho / tr }
    }

    fn conjugate(&mut self, u: &M) {
        self.rho = u * &self.rho * u.adjoint();
    }

    fn gate(&mut self, gate: &CliffordGate2, a: usize, b: usize) {
        let u = unitary_from_images(&gate.images(), gate.signs(), 2);
        self.conjugate(&embed(&u, &[a, b], self.n));
    }

    fn gate1(&mut self, gate: &CliffordGate1, q: usize) {
        let u = unitary_from_images(&gate.images(), gate.signs(), 1);
        self.conjugate(&embed(&u, &[q], self.n));
    }

    /// `rho -> Tr_site(rho) (x) I/2`.
    fn erase(&mut self, site: usize) {
        let mut out = M::zeros(self.rho.nrows(), self.rho.ncols());
        for p in [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z] {
            let e = embed(&pauli1(p), &[site], self.n);
            out += &e * &self.rho * &e;
        }
        self.rho = out / Complex64::new(4.0, 0.0);
    }

    /// CNOT from `site` onto a fresh `|0>` ancilla, then trace the ancilla.
    fn cnot_to_ancilla(&mut self, site: usize) {
        let n = self.n + 1;
        let dim = 1usize << n;
        let anc = self.n;
        let mut big = M::zeros(dim, dim);
        let half = 1usize << self.n;
        for i in 0..half {
            for j in 0..half {
                big[(i, j)] = self.rho[(i, j)];
            }
        }
        let cnot = M::from_fn(dim, dim, |r, c| {
            let flipped = if (c >> site) & 1 == 1 { c ^ (1 << anc) } else { c };
            if r == flipped {
                ONE
            } else {
                ZERO
            }
        });
        big = &cnot * big * cnot.adjoint();
        let keep: Vec<usize> = (0..self.n).collect();
        self.rho = partial_trace(&big, &keep, n);
    }

    fn apply(&mut self, event: &Event) {
        match event {
            Event::Gate { gate, a, b } => self.gate(gate, *a, *b),
            Event::Erase { site } => self.erase(*site),
            Event::Dephase { site, rotation } => {
                self.gate1(rotation, *site);
                self.cnot_to_ancilla(*site);
            }
        }
    }

    fn entropy(&self, region: &[usize]) -> f64 {
        entropy_bits(&partial_trace(&self.rho, region, self.n))
    }
}

fn integer(x: f64) -> usize {
    let r = x.round();
    assert!((x - r).abs() < 1e-8, "non-integer entropy {x}");
    r as usize
}

fn random_config(key: StreamKey) -> ProtocolConfig {
    let mut rng = key.rng();
    let l = if rng.bernoulli(0.5) { 2 } else { 4 };
    let mut c = ProtocolConfig::erasure(l, 1 + rng.below(4) as usize, rng.uniform());
    c.seed = rng.below(1 << 32);
    c.channel = if rng.bernoulli(0.5) {
        Channel::Erasure
    } else {
        Channel::CnotAncilla
    };
    if rng.bernoulli(0.3) {
        c.schedule = Schedule::Periodic {
            period: 1 + rng.below(3) as usize,
        };
    }
    if rng.bernoulli(0.3) {
        c.scrambling = Scrambling::Sparse { p_u: rng.uniform() };
    }
    if rng.bernoulli(0.3) {
        c.prescramble = Prescramble::Linear { multiple: 0.5 };
    }
    c.encoding = if rng.bernoulli(0.5) {
        Encoding::SinglePair {
            x0: 1 + rng.below(l as u64) as usize,
        }
    } else {
        Encoding::FiniteRate { c: 0.5 }
    };
    c.checkpoints = Checkpoints::Every;
    c
}

pub struct OracleReport {
    pub protocols: u64,
    pub gates: usize,
    pub erasures: usize,
    pub dephasings: usize,
    pub comparisons: usize,
    pub mismatches: Vec<String>,
}

/// Replays `count` random protocols on both simulators and compares every
/// entropy the tableau reports at every checkpoint.
pub fn compare_random_protocols(count: u64, seed: u64) -> OracleReport {
    let root = StreamKey::new(seed);
    let mut report = OracleReport {
        protocols: count,
        gates: 0,
        erasures: 0,
        dephasings: 0,
        comparisons: 0,
        mismatches: Vec::new(),
    };
    let check = |report: &mut OracleReport, what: String, tableau: usize, dense: f64| {
        report.comparisons += 1;
        let r = dense.round();
        if (dense - r).abs() > 1e-8 || tableau as f64 != r {
            report
                .mismatches
                .push(format!("{what}: tableau {tableau}, dense {dense}"));
        }
    };
    for trial in 0..count {
        let config = random_config(root.with(trial));
        let mut state = build_initial_state(&config, sample_key(&config, 0)).unwrap();
        let mut dense = Dense::from_state(&state);
        let n = state.num_qubits();
        assert!(n <= 6);
        let sys: Vec<usize> = (0..n).filter(|&q| state.roles()[q] == QubitRole::System).collect();
        let refs: Vec<usize> = (0..n).filter(|&q| state.roles()[q] == QubitRole::Reference).collect();
        let all: Vec<usize> = (0..n).collect();
        let a = Region::new(sys.clone(), n).unwrap();
        let r = Region::new(refs.clone(), n).unwrap();
        let record = run_sample(&config, 0).unwrap();
        let mut extra = root.with(trial).with(1).rng();
        for item in sample_trace(&config, 0).unwrap() {
            match item {
                TraceItem::Event(e) => {
                    match &e {
                        Event::Gate { .. } => report.gates += 1,
                        Event::Erase { .. } => report.erasures += 1,
                        Event::Dephase { .. } => report.dephasings += 1,
                    }
                    e.apply(&mut state).unwrap();
                    dense.apply(&e);
                }
                TraceItem::Checkpoint(t) => {
                    let tag = |what: &str| format!("protocol {trial} t={t} {what}");
                    let (s_a, s_r, s_ar) = (dense.entropy(&sys), dense.entropy(&refs), dense.entropy(&all));
                    check(&mut report, tag("S_A"), state.entropy(&a), s_a);
                    check(&mut report, tag("S_R"), state.entropy(&r), s_r);
                    check(&mut report, tag("S_AR"), state.entropy(&a.union(&r)), s_ar);
                    let mi = s_a + s_r - s_ar;
                    check(&mut report, tag("I_AR"), state.mutual_information(&a, &r).unwrap(), mi);
                    let recorded = record.mi_at(t).unwrap_or(u32::MAX) as usize;
                    check(&mut report, tag("recorded I_AR"), recorded, mi);
                    let mask = extra.below(1 << n);
                    let region: Vec<usize> = (0..n).filter(|q| (mask >> q) & 1 == 1).collect();
                    let s = dense.entropy(&region);
                    check(
                        &mut report,
                        tag("random region"),
                        state.entropy(&Region::new(region, n).unwrap()),
                        s,
                    );
                }
            }
        }
    }
    report
}

#[test]
fn random_protocols_agree_with_dense_oracle() {
    let report = compare_random_protocols(60, 99);
    assert!(
        report.mismatches.is_empty(),
        "{:?}",
        &report.mismatches[..report.mismatches.len().min(5)]
    );
    assert!(report.erasures > 0 && report.dephasings > 0);
}

#[test]
fn dense_erasure_of_bell_half_loses_one_bit() {
    let n = 2;
    let gens = [
        PauliString::from_paulis(&[Pauli::X, Pauli::X], false),
        PauliString::from_paulis(&[Pauli::Z, Pauli::Z], false),
    ];
    let mut state = StabilizerState::from_generators(n, &gens).unwrap();
    let mut dense = Dense::from_state(&state);
    assert!((dense.entropy(&[0]) - 1.0).abs() < 1e-12);
    assert!(dense.entropy(&[0, 1]).abs() < 1e-12);
    state.erase_qubit(0).unwrap();
    dense.erase(0);
    assert_eq!(integer(dense.entropy(&[0, 1])), 2);
    assert_eq!(state.entropy(&Region::new([0, 1], 2).unwrap()), 2);
}
