use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::gf2::{first_one, get_bit, rank_of, words_for, BitMatrix};
use crate::rng::StreamRng;

use super::clifford::{sample_uniform_clifford1, CliffordGate1, CliffordGate2, SlicedAction};
use super::pauli::{Pauli, PauliString};

/// Role of a qubit within an encoding experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum QubitRole {
    System,
    Reference,
}

/// A set of qubit indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Region {
    qubits: Vec<usize>,
}

impl Region {
    /// Validates that every index is below `n_qubits` and appears once.
    pub fn new(qubits: impl IntoIterator<Item = usize>, n_qubits: usize) -> Result<Self> {
        let mut seen = BTreeSet::new();
        let mut list = Vec::new();
        for q in qubits {
            if q >= n_qubits {
                return Err(Error::InvalidArgument(format!(
                    "qubit {q} outside a {n_qubits}-qubit register"
                )));
            }
            if !seen.insert(q) {
                return Err(Error::InvalidArgument(format!("qubit {q} listed twice in region")));
            }
            list.push(q);
        }
        list.sort_unstable();
        Ok(Self { qubits: list })
    }

    pub fn qubits(&self) -> &[usize] {
        &self.qubits
    }

    pub fn len(&self) -> usize {
        self.qubits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.qubits.is_empty()
    }

    pub fn contains(&self, q: usize) -> bool {
        self.qubits.binary_search(&q).is_ok()
    }

    pub fn is_disjoint(&self, other: &Region) -> bool {
        self.qubits.iter().all(|q| !other.contains(*q))
    }

    pub fn union(&self, other: &Region) -> Region {
        let mut qubits: Vec<usize> = self.qubits.iter().chain(&other.qubits).copied().collect();
        qubits.sort_unstable();
        qubits.dedup();
        Region { qubits }
    }

    pub fn complement(&self, n_qubits: usize) -> Region {
        Region {
            qubits: (0..n_qubits).filter(|q| !self.contains(*q)).collect(),
        }
    }
}

/// Mixed stabilizer state on `n` qubits described by `k <= n` independent,
/// commuting signed Pauli generators.
///
/// The tableau is stored column-major: for every qubit there is one packed
/// column of x bits and one of z bits, indexed by generator. Local gates
/// then touch only a handful of columns, and row operations are applied to
/// whole sets of generators at once through bit masks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StabilizerState {
    n: usize,
    k: usize,
    words: usize,
    x: Vec<u64>,
    z: Vec<u64>,
    sign: Vec<u64>,
    roles: Vec<QubitRole>,
}

impl StabilizerState {
    /// Maximally mixed state (no generators).
    pub fn maximally_mixed(n: usize) -> Self {
        let words = words_for(n.max(1));
        Self {
            n,
            k: 0,
            words,
            x: vec![0; n * words],
            z: vec![0; n * words],
            sign: vec![0; words],
            roles: vec![QubitRole::System; n],
        }
    }

    /// `|0...0>`.
    pub fn zero_state(n: usize) -> Self {
        let mut s = Self::maximally_mixed(n);
        for q in 0..n {
            s.push_generator_unchecked(&PauliString::single(n, q, Pauli::Z));
        }
        s
    }

    /// Builds a state from explicit generators, checking commutation and
    /// independence.
    pub fn from_generators(n: usize, generators: &[PauliString]) -> Result<Self> {
        if generators.len() > n {
            return Err(Error::InvalidArgument(format!(
                "{} generators exceed {n} qubits",
                generators.len()
            )));
        }
        let mut s = Self::maximally_mixed(n);
        for g in generators {
            s.push_generator(g)?;
        }
        Ok(s)
    }

    /// Builds a state from generators the caller guarantees to be commuting
    /// and independent (checked only in debug builds).
    pub(crate) fn from_trusted_generators(n: usize, generators: &[PauliString]) -> Self {
        let mut s = Self::maximally_mixed(n);
        for g in generators {
            s.push_generator_unchecked(g);
        }
        debug_assert!(n > 64 || s.check_invariants().is_ok());
        s
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    /// Number of generators `k`.
    pub fn num_generators(&self) -> usize {
        self.k
    }

    pub fn is_pure(&self) -> bool {
        self.k == self.n
    }

    pub fn roles(&self) -> &[QubitRole] {
        &self.roles
    }

    pub fn set_role(&mut self, qubit: usize, role: QubitRole) {
        self.roles[qubit] = role;
    }

    pub fn region_with_role(&self, role: QubitRole) -> Region {
        Region {
            qubits: (0..self.n).filter(|&q| self.roles[q] == role).collect(),
        }
    }

    #[inline]
    fn col(&self, v: &[u64], q: usize) -> std::ops::Range<usize> {
        debug_assert_eq!(v.len(), self.n * self.words);
        q * self.words..(q + 1) * self.words
    }

    #[inline]
    fn active_words(&self) -> usize {
        words_for(self.k)
    }

    fn check_qubit(&self, q: usize) -> Result<()> {
        if q >= self.n {
            return Err(Error::InvalidArgument(format!(
                "qubit {q} outside a {}-qubit register",
                self.n
            )));
        }
        Ok(())
    }

    /// Generator `r` as a signed Pauli string.
    pub fn generator(&self, r: usize) -> PauliString {
        assert!(r < self.k);
        let mut p = PauliString::identity(self.n);
        for q in 0..self.n {
            let xr = get_bit(&self.x[self.col(&self.x, q)], r);
            let zr = get_bit(&self.z[self.col(&self.z, q)], r);
            p.set(q, Pauli::from_bits(xr, zr));
        }
        p.set_negative(get_bit(&self.sign, r));
        p
    }

    pub fn generators(&self) -> Vec<PauliString> {
        (0..self.k).map(|r| self.generator(r)).collect()
    }

    fn push_generator_unchecked(&mut self, g: &PauliString) {
        assert_eq!(g.num_qubits(), self.n);
        let r = self.k;
        assert!(r < self.n, "tableau already holds a full set of generators");
        let (w, bit) = (r / 64, 1u64 << (r % 64));
        for q in 0..self.n {
            let (xq, zq) = g.get(q).bits();
            if xq {
                self.x[q * self.words + w] |= bit;
            }
            if zq {
                self.z[q * self.words + w] |= bit;
            }
        }
        if g.is_negative() {
            self.sign[w] |= bit;
        }
        self.k += 1;
    }

    /// Appends a generator after checking it commutes with, and is
    /// independent of, the existing ones.
    pub fn push_generator(&mut self, g: &PauliString) -> Result<()> {
        if g.num_qubits() != self.n {
            return Err(Error::InvalidArgument("generator width mismatch".into()));
        }
        if self.k == self.n {
            return Err(Error::InvalidArgument("state is already pure".into()));
        }
        if let Some(r) = (0..self.k).find(|&r| !self.generator(r).commutes_with(g)) {
            return Err(Error::InvalidArgument(format!(
                "generator {g} anticommutes with existing generator {r}"
            )));
        }
        self.push_generator_unchecked(g);
        if self.symplectic_rank() != self.k {
            self.delete_row(self.k - 1);
            return Err(Error::InvalidArgument(format!("generator {g} is not independent")));
        }
        Ok(())
    }

    /// GF(2) rank of the full k x 2n generator matrix.
    fn symplectic_rank(&self) -> usize {
        let cols = (0..self.n).flat_map(|q| {
            [
                &self.x[q * self.words..(q + 1) * self.words],
                &self.z[q * self.words..(q + 1) * self.words],
            ]
        });
        // The transpose has the same rank; columns are k-bit vectors.
        rank_of(self.k, cols)
    }

    /// Verifies generator commutation and independence. O(k^2 n).
    pub fn check_invariants(&self) -> Result<()> {
        let gens = self.generators();
        for (i, a) in gens.iter().enumerate() {
            for (j, b) in gens.iter().enumerate().skip(i + 1) {
                if !a.commutes_with(b) {
                    return Err(Error::Validation(format!("generators {i} and {j} anticommute")));
                }
            }
        }
        let mut m = BitMatrix::zeros(self.k, 2 * self.n);
        for (r, g) in gens.iter().enumerate() {
            for q in 0..self.n {
                let (xq, zq) = g.get(q).bits();
                m.set(r, 2 * q, xq);
                m.set(r, 2 * q + 1, zq);
            }
        }
        if m.rank_in_place() != self.k {
            return Err(Error::Validation("generators are not independent".into()));
        }
        let tail = self.k % 64;
        for q in 0..self.n {
            for col in [&self.x, &self.z] {
                let c = &col[q * self.words..(q + 1) * self.words];
                for (w, &word) in c.iter().enumerate() {
                    let live = if w < self.k / 64 {
                        u64::MAX
                    } else if w == self.k / 64 && tail != 0 {
                        (1u64 << tail) - 1
                    } else {
                        0
                    };
                    if word & !live != 0 {
                        return Err(Error::Validation("stale bits beyond the last generator".into()));
                    }
                }
            }
        }
        Ok(())
    }

    // -- gates -----------------------------------------------------------

    fn apply_sliced(&mut self, action: &SlicedAction, qubits: &[usize]) {
        let nbits = 2 * qubits.len();
        let aw = self.active_words();
        let words = self.words;
        let mut input = [0u64; 4];
        let mut output = [0u64; 4];
        for w in 0..aw {
            for (i, &q) in qubits.iter().enumerate() {
                input[2 * i] = self.x[q * words + w];
                input[2 * i + 1] = self.z[q * words + w];
            }
            let mut flip = 0u64;
            for &m in &action.sign_monomials {
                let mut term = u64::MAX;
                for (b, inp) in input.iter().enumerate().take(nbits) {
                    if (m >> b) & 1 == 1 {
                        term &= inp;
                    }
                }
                flip ^= term;
            }
            for (o, out) in output.iter_mut().enumerate().take(nbits) {
                let lin = action.linear[o];
                let mut acc = 0u64;
                for (b, inp) in input.iter().enumerate().take(nbits) {
                    if (lin >> b) & 1 == 1 {
                        acc ^= inp;
                    }
                }
                *out = acc;
            }
            for (i, &q) in qubits.iter().enumerate() {
                self.x[q * words + w] = output[2 * i];
                self.z[q * words + w] = output[2 * i + 1];
            }
            self.sign[w] ^= flip;
        }
    }

    /// Conjugates every generator by `gate` acting on `(a, b)`.
    pub fn apply_clifford2(&mut self, gate: &CliffordGate2, a: usize, b: usize) -> Result<()> {
        self.check_qubit(a)?;
        self.check_qubit(b)?;
        if a == b {
            return Err(Error::InvalidArgument(format!("two-qubit gate on repeated qubit {a}")));
        }
        self.apply_sliced(&gate.action, &[a, b]);
        Ok(())
    }

    pub fn apply_clifford1(&mut self, gate: &CliffordGate1, q: usize) -> Result<()> {
        self.check_qubit(q)?;
        self.apply_sliced(&gate.action, &[q]);
        Ok(())
    }

    // -- row operations --------------------------------------------------

    /// Multiplies generator `pivot` into every generator selected by `mask`
    /// (which must not contain `pivot`), keeping signs exact.
    fn multiply_into(&mut self, pivot: usize, mask: &[u64]) {
        let aw = self.active_words();
        let words = self.words;
        let (pw, pbit) = (pivot / 64, 1u64 << (pivot % 64));
        debug_assert_eq!(mask[pw] & pbit, 0);
        // Bit-sliced mod-4 phase counters, one per masked row.
        let mut lo = vec![0u64; aw];
        let mut hi = vec![0u64; aw];
        for q in 0..self.n {
            let base = q * words;
            let px = self.x[base + pw] & pbit != 0;
            let pz = self.z[base + pw] & pbit != 0;
            if !px && !pz {
                continue;
            }
            for w in 0..aw {
                let m = mask[w];
                if m == 0 {
                    continue;
                }
                let xa = self.x[base + w] & m;
                let za = self.z[base + w] & m;
                // Power of i from (pivot Pauli) * (row Pauli) on this qubit.
                let (plus, minus) = match (px, pz) {
                    (true, false) => (za & xa, za & !xa),
                    (false, true) => (xa & !za, xa & za),
                    _ => (za & !xa, xa & !za),
                };
                // += 1
                hi[w] ^= lo[w] & plus;
                lo[w] ^= plus;
                // -= 1
                hi[w] ^= !lo[w] & minus;
                lo[w] ^= minus;
                if px {
                    self.x[base + w] ^= m;
                }
                if pz {
                    self.z[base + w] ^= m;
                }
            }
        }
        let pivot_negative = self.sign[pw] & pbit != 0;
        for w in 0..aw {
            let m = mask[w];
            debug_assert_eq!(lo[w] & m, 0, "product of commuting generators must be Hermitian");
            let flip = (hi[w] & m) ^ if pivot_negative { m } else { 0 };
            self.sign[w] ^= flip;
        }
    }

    /// Removes generator `r`, moving the last generator into its slot.
    fn delete_row(&mut self, r: usize) {
        assert!(r < self.k);
        let last = self.k - 1;
        let words = self.words;
        let (rw, rb) = (r / 64, r % 64);
        let (lw, lb) = (last / 64, last % 64);
        let move_bit = |v: &mut [u64]| {
            let bit = (v[lw] >> lb) & 1;
            v[rw] = (v[rw] & !(1u64 << rb)) | (bit << rb);
            v[lw] &= !(1u64 << lb);
        };
        for q in 0..self.n {
            move_bit(&mut self.x[q * words..(q + 1) * words]);
            move_bit(&mut self.z[q * words..(q + 1) * words]);
        }
        move_bit(&mut self.sign);
        self.k -= 1;
    }

    /// Column of qubit `q` restricted to live generators, as a fresh mask.
    fn column_mask(&self, col: &[u64], q: usize) -> Vec<u64> {
        let aw = self.active_words();
        col[q * self.words..q * self.words + aw].to_vec()
    }

    /// Row-reduces so that at most one generator has an x (or y) component
    /// on `q`, returning that generator.
    fn isolate_x(&mut self, q: usize) -> Option<usize> {
        let mut mask = self.column_mask(&self.x, q);
        let pivot = first_one(&mask)?;
        mask[pivot / 64] &= !(1u64 << (pivot % 64));
        if mask.iter().any(|&w| w != 0) {
            self.multiply_into(pivot, &mask);
        }
        Some(pivot)
    }

    /// Erasure channel on `site`: `rho -> Tr_site(rho) (x) I/2`.
    ///
    /// Returns the number of generators removed (0, 1 or 2).
    pub fn erase_qubit(&mut self, site: usize) -> Result<usize> {
        self.check_qubit(site)?;
        let x_pivot = self.isolate_x(site);
        let mut zmask = self.column_mask(&self.z, site);
        if let Some(a) = x_pivot {
            zmask[a / 64] &= !(1u64 << (a % 64));
        }
        let z_pivot = first_one(&zmask);
        if let Some(b) = z_pivot {
            zmask[b / 64] &= !(1u64 << (b % 64));
            if zmask.iter().any(|&w| w != 0) {
                self.multiply_into(b, &zmask);
            }
        }
        let mut doomed: Vec<usize> = x_pivot.into_iter().chain(z_pivot).collect();
        doomed.sort_unstable_by(|a, b| b.cmp(a));
        for &r in &doomed {
            self.delete_row(r);
        }
        Ok(doomed.len())
    }

    /// Z-basis dephasing of `site`: removes the (row-reduced) generator
    /// that anticommutes with `Z_site`. Equivalent to a CNOT onto a fresh
    /// `|0>` ancilla that is then traced out.
    pub fn dephase_z(&mut self, site: usize) -> Result<usize> {
        self.check_qubit(site)?;
        match self.isolate_x(site) {
            Some(r) => {
                self.delete_row(r);
                Ok(1)
            }
            None => Ok(0),
        }
    }

    /// Ancilla-coupling channel with a fixed pre-rotation: apply `rotation`
    /// on `site`, then Z-dephase it.
    pub fn dephase_with_rotation(&mut self, site: usize, rotation: &CliffordGate1) -> Result<usize> {
        self.apply_clifford1(rotation, site)?;
        self.dephase_z(site)
    }

    /// Ancilla-coupling channel with a uniformly random single-qubit
    /// Clifford applied first.
    pub fn dephase_via_ancilla(&mut self, site: usize, rng: &mut StreamRng) -> Result<usize> {
        let rotation = sample_uniform_clifford1(rng);
        self.dephase_with_rotation(site, &rotation)
    }

    // -- entropies -------------------------------------------------------

    /// Entropy of `region` in bits: `|A| - k + rank(G restricted to the
    /// complement)`.
    pub fn entropy(&self, region: &Region) -> usize {
        let complement = region.complement(self.n);
        let k = self.k;
        let cols = complement.qubits().iter().flat_map(|&q| {
            [
                &self.x[q * self.words..(q + 1) * self.words],
                &self.z[q * self.words..(q + 1) * self.words],
            ]
        });
        let rank = if k == 0 { 0 } else { rank_of(k, cols) };
        region.len() + rank - k
    }

    /// `S_A + S_R - S_{A u R}` in bits.
    pub fn mutual_information(&self, a: &Region, r: &Region) -> Result<usize> {
        if !a.is_disjoint(r) {
            return Err(Error::InvalidArgument("mutual information regions overlap".into()));
        }
        let sa = self.entropy(a);
        let sr = self.entropy(r);
        let sar = self.entropy(&a.union(r));
        Ok(sa + sr - sar)
    }
}
