use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::gf2::{get_bit, set_bit, words_for};

/// Single-qubit Pauli factor in the Hermitian convention (`Y` has bits x=z=1).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    pub fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    fn symbol(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// Signed Hermitian Pauli operator on `n` qubits, stored as packed x/z bits.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct PauliString {
    n: usize,
    x: Vec<u64>,
    z: Vec<u64>,
    negative: bool,
}

impl PauliString {
    pub fn identity(n: usize) -> Self {
        let w = words_for(n);
        Self {
            n,
            x: vec![0; w],
            z: vec![0; w],
            negative: false,
        }
    }

    /// `P` acting on `qubit`, identity elsewhere.
    pub fn single(n: usize, qubit: usize, p: Pauli) -> Self {
        let mut s = Self::identity(n);
        s.set(qubit, p);
        s
    }

    pub fn from_paulis(paulis: &[Pauli], negative: bool) -> Self {
        let mut s = Self::identity(paulis.len());
        for (q, &p) in paulis.iter().enumerate() {
            s.set(q, p);
        }
        s.negative = negative;
        s
    }

    pub fn num_qubits(&self) -> usize {
        self.n
    }

    pub fn get(&self, qubit: usize) -> Pauli {
        Pauli::from_bits(get_bit(&self.x, qubit), get_bit(&self.z, qubit))
    }

    pub fn set(&mut self, qubit: usize, p: Pauli) {
        assert!(qubit < self.n, "qubit {qubit} out of range for {} qubits", self.n);
        let (x, z) = p.bits();
        set_bit(&mut self.x, qubit, x);
        set_bit(&mut self.z, qubit, z);
    }

    pub fn is_negative(&self) -> bool {
        self.negative
    }

    pub fn set_negative(&mut self, negative: bool) {
        self.negative = negative;
    }

    pub fn x_bits(&self) -> &[u64] {
        &self.x
    }

    pub fn z_bits(&self) -> &[u64] {
        &self.z
    }

    pub fn support(&self) -> Vec<usize> {
        (0..self.n)
            .filter(|&q| get_bit(&self.x, q) || get_bit(&self.z, q))
            .collect()
    }

    pub fn is_identity(&self) -> bool {
        self.x.iter().chain(&self.z).all(|&w| w == 0)
    }

    /// Symplectic inner product is zero.
    pub fn commutes_with(&self, other: &PauliString) -> bool {
        assert_eq!(self.n, other.n);
        let parity = self
            .x
            .iter()
            .zip(&self.z)
            .zip(other.x.iter().zip(&other.z))
            .map(|((ax, az), (bx, bz))| ((ax & bz) ^ (az & bx)).count_ones())
            .sum::<u32>();
        parity % 2 == 0
    }

    /// Product `self * other`, returned together with the residual power of
    /// `i` (0..4) that is not absorbed into the sign. For commuting
    /// operands the residual is always 0.
    pub fn mul_with_phase(&self, other: &PauliString) -> (PauliString, u8) {
        assert_eq!(self.n, other.n);
        // Track i^e X^x Z^z. Hermitian Pauli with bits (x,z) equals
        // i^{x.z} X^x Z^z.
        let mut e: i64 = 0;
        let mut out = PauliString::identity(self.n);
        for q in 0..self.n {
            let (x1, z1) = self.get(q).bits();
            let (x2, z2) = other.get(q).bits();
            e += (x1 & z1) as i64 + (x2 & z2) as i64;
            // Z^z1 X^x2 = (-1)^{z1 x2} X^x2 Z^z1
            e += 2 * (z1 & x2) as i64;
            let (x, z) = (x1 ^ x2, z1 ^ z2);
            e -= (x & z) as i64;
            out.set(q, Pauli::from_bits(x, z));
        }
        e += 2 * (self.negative as i64 + other.negative as i64);
        let e = e.rem_euclid(4) as u8;
        out.negative = e >= 2;
        (out, e % 2)
    }
}

impl fmt::Debug for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(if self.negative { "-" } else { "+" })?;
        for q in 0..self.n {
            write!(f, "{}", self.get(q).symbol())?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    /// Parses strings such as `"+XIZ"`, `"-YY"` or `"ZZ"`.
    fn from_str(s: &str) -> Result<Self> {
        let (negative, body) = match s.as_bytes().first() {
            Some(b'-') => (true, &s[1..]),
            Some(b'+') => (false, &s[1..]),
            _ => (false, s),
        };
        let paulis = body
            .chars()
            .map(|c| match c {
                'I' | '_' => Ok(Pauli::I),
                'X' => Ok(Pauli::X),
                'Y' => Ok(Pauli::Y),
                'Z' => Ok(Pauli::Z),
                other => Err(Error::InvalidArgument(format!(
                    "unexpected Pauli symbol {other:?} in {s:?}"
                ))),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::from_paulis(&paulis, negative))
    }
}
