//! Local Clifford gates described by their action on Pauli generators.
//!
//! A gate on `m` qubits is stored as the images of the `2m` generators
//! `X_0, Z_0, X_1, Z_1, ...`. Each image is a Hermitian Pauli packed into
//! `2m` bits (`x_0, z_0, x_1, z_1, ...`) with its own sign. Any symplectic
//! matrix together with any choice of the `2m` signs defines a Clifford
//! unitary up to global phase.

use std::sync::OnceLock;

use rand::RngCore;

use crate::error::{Error, Result};
use crate::rng::StreamRng;

/// Number of 2-qubit symplectic matrices over GF(2).
pub const SYMPLECTIC2_ORDER: usize = 720;
/// Number of 2-qubit Cliffords modulo global phase.
pub const CLIFFORD2_ORDER: usize = SYMPLECTIC2_ORDER * 16;
/// Number of single-qubit symplectic matrices.
pub const SYMPLECTIC1_ORDER: usize = 6;

/// Symplectic form on `2m`-bit local Pauli vectors (pairs `(x_q, z_q)`).
#[inline]
fn omega(u: u8, v: u8, qubits: usize) -> u8 {
    (0..qubits)
        .map(|q| {
            let (ux, uz) = ((u >> (2 * q)) & 1, (u >> (2 * q + 1)) & 1);
            let (vx, vz) = ((v >> (2 * q)) & 1, (v >> (2 * q + 1)) & 1);
            (ux & vz) ^ (uz & vx)
        })
        .fold(0, |a, b| a ^ b)
}

fn is_symplectic(images: &[u8], qubits: usize) -> bool {
    let n = 2 * qubits;
    for i in 0..n {
        for j in 0..n {
            // ω(e_i, e_j) = 1 iff {i, j} = {2q, 2q+1}
            let expected = u8::from(i / 2 == j / 2 && i != j);
            if omega(images[i], images[j], qubits) != expected {
                return false;
            }
        }
    }
    true
}

/// Splits a packed local Pauli into per-qubit x and z masks.
#[inline]
fn split_xz(bits: u8, qubits: usize) -> (u8, u8) {
    let mut x = 0;
    let mut z = 0;
    for q in 0..qubits {
        x |= ((bits >> (2 * q)) & 1) << q;
        z |= ((bits >> (2 * q + 1)) & 1) << q;
    }
    (x, z)
}

/// Image of an input Pauli pattern: output pattern and whether the
/// Hermitian image picks up a minus sign.
fn conjugate_pattern(images: &[u8], signs: u8, qubits: usize, input: u8) -> (u8, bool) {
    // Accumulate i^e X^x Z^z, starting from the input's Hermitian phase.
    let (ix, iz) = split_xz(input, qubits);
    let mut e = (ix & iz).count_ones() as i32;
    let (mut ax, mut az) = (0u8, 0u8);
    let mut out = 0u8;
    for (g, &img) in images.iter().enumerate().take(2 * qubits) {
        if (input >> g) & 1 == 0 {
            continue;
        }
        let (gx, gz) = split_xz(img, qubits);
        e += (gx & gz).count_ones() as i32;
        if (signs >> g) & 1 == 1 {
            e += 2;
        }
        // (X^ax Z^az)(X^gx Z^gz) = (-1)^{az.gx} X^{ax+gx} Z^{az+gz}
        e += 2 * (az & gx).count_ones() as i32;
        ax ^= gx;
        az ^= gz;
        out ^= img;
    }
    e -= (ax & az).count_ones() as i32;
    let e = e.rem_euclid(4);
    debug_assert!(e % 2 == 0, "conjugated Hermitian Pauli must stay Hermitian");
    (out, e == 2)
}

/// Bit-sliced action shared by 1- and 2-qubit gates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) struct SlicedAction {
    /// For each output bit, the mask of input bits XORed into it.
    pub linear: [u8; 4],
    /// Monomials (as input-bit masks) of the sign-flip function's algebraic
    /// normal form.
    pub sign_monomials: Vec<u8>,
}

impl SlicedAction {
    fn build(images: &[u8], signs: u8, qubits: usize) -> Self {
        let n = 2 * qubits;
        let mut linear = [0u8; 4];
        for (out_bit, lin) in linear.iter_mut().enumerate().take(n) {
            for (g, &img) in images.iter().enumerate().take(n) {
                if (img >> out_bit) & 1 == 1 {
                    *lin |= 1 << g;
                }
            }
        }
        let size = 1usize << n;
        let mut anf: Vec<u8> = (0..size)
            .map(|input| u8::from(conjugate_pattern(images, signs, qubits, input as u8).1))
            .collect();
        // Möbius transform: truth table -> ANF coefficients.
        for bit in 0..n {
            for m in 0..size {
                if m & (1 << bit) != 0 {
                    anf[m] ^= anf[m ^ (1 << bit)];
                }
            }
        }
        debug_assert_eq!(anf[0], 0, "identity must map to +identity");
        let sign_monomials = (0..size).filter(|&m| anf[m] == 1).map(|m| m as u8).collect();
        Self { linear, sign_monomials }
    }
}

/// Two-qubit Clifford gate (modulo global phase).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CliffordGate2 {
    images: [u8; 4],
    signs: u8,
    pub(crate) action: SlicedAction,
}

impl CliffordGate2 {
    /// Builds a gate from the images of `X_a, Z_a, X_b, Z_b` (4-bit packed
    /// as `x_a, z_a, x_b, z_b`) and the four image signs (bit `g` set means
    /// image `g` is negated).
    pub fn new(images: [u8; 4], signs: u8) -> Result<Self> {
        if images.iter().any(|&m| m > 0xf) || signs > 0xf {
            return Err(Error::Validation("2-qubit gate tables use 4-bit entries".into()));
        }
        if !is_symplectic(&images, 2) {
            return Err(Error::Validation(format!(
                "gate images {images:?} do not preserve the symplectic form"
            )));
        }
        Ok(Self {
            images,
            signs,
            action: SlicedAction::build(&images, signs, 2),
        })
    }

    pub fn identity() -> Self {
        Self::new([0b0001, 0b0010, 0b0100, 0b1000], 0).expect("identity is symplectic")
    }

    /// CNOT with control on the first qubit and target on the second.
    pub fn cnot() -> Self {
        // X_a -> X_a X_b, Z_a -> Z_a, X_b -> X_b, Z_b -> Z_a Z_b
        Self::new([0b0101, 0b0010, 0b0100, 0b1010], 0).expect("CNOT is symplectic")
    }

    pub fn swap() -> Self {
        Self::new([0b0100, 0b1000, 0b0001, 0b0010], 0).expect("SWAP is symplectic")
    }

    /// Tensor product of two single-qubit gates.
    pub fn product(a: &CliffordGate1, b: &CliffordGate1) -> Self {
        let [ax, az] = a.images;
        let [bx, bz] = b.images;
        let signs = a.signs | (b.signs << 2);
        Self::new([ax, az, bx << 2, bz << 2], signs).expect("tensor product is symplectic")
    }

    /// The `index`-th element (0..11520) in a fixed enumeration.
    pub fn from_index(index: usize) -> Self {
        assert!(index < CLIFFORD2_ORDER);
        let sym = symplectic_from_index(index / 16, 2);
        let images = [sym[0], sym[1], sym[2], sym[3]];
        Self::new(images, (index % 16) as u8).expect("enumerated matrix is symplectic")
    }

    pub fn images(&self) -> [u8; 4] {
        self.images
    }

    pub fn signs(&self) -> u8 {
        self.signs
    }

    /// Index of the underlying symplectic matrix in 0..720.
    pub fn symplectic_class(&self) -> usize {
        symplectic_index(&self.images, 2)
    }

    /// Conjugates a local 4-bit Pauli pattern, returning the image pattern
    /// and whether it acquired a minus sign.
    pub fn conjugate(&self, pattern: u8) -> (u8, bool) {
        conjugate_pattern(&self.images, self.signs, 2, pattern & 0xf)
    }
}

/// Single-qubit Clifford gate (modulo global phase).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CliffordGate1 {
    images: [u8; 2],
    signs: u8,
    pub(crate) action: SlicedAction,
}

impl CliffordGate1 {
    pub fn new(images: [u8; 2], signs: u8) -> Result<Self> {
        if images.iter().any(|&m| m > 0b11) || signs > 0b11 {
            return Err(Error::Validation("1-qubit gate tables use 2-bit entries".into()));
        }
        if !is_symplectic(&images, 1) {
            return Err(Error::Validation(format!(
                "gate images {images:?} do not preserve the symplectic form"
            )));
        }
        Ok(Self {
            images,
            signs,
            action: SlicedAction::build(&images, signs, 1),
        })
    }

    pub fn identity() -> Self {
        Self::new([0b01, 0b10], 0).expect("identity is symplectic")
    }

    pub fn hadamard() -> Self {
        Self::new([0b10, 0b01], 0).expect("H is symplectic")
    }

    /// Phase gate: X -> Y, Z -> Z.
    pub fn phase() -> Self {
        Self::new([0b11, 0b10], 0).expect("S is symplectic")
    }

    /// The `index`-th element (0..24).
    pub fn from_index(index: usize) -> Self {
        assert!(index < SYMPLECTIC1_ORDER * 4);
        let sym = symplectic_from_index(index / 4, 1);
        Self::new([sym[0], sym[1]], (index % 4) as u8).expect("enumerated matrix is symplectic")
    }

    pub fn images(&self) -> [u8; 2] {
        self.images
    }

    pub fn signs(&self) -> u8 {
        self.signs
    }

    pub fn conjugate(&self, pattern: u8) -> (u8, bool) {
        conjugate_pattern(&self.images, self.signs, 1, pattern & 0b11)
    }
}

/// Draws one of the 11520 two-qubit Cliffords uniformly: a uniform
/// symplectic matrix from the transvection enumeration plus uniform signs.
pub fn sample_uniform_clifford2(rng: &mut StreamRng) -> CliffordGate2 {
    sample_clifford2_ref(rng).clone()
}

/// Same draw as [`sample_uniform_clifford2`], borrowed from the shared table.
pub fn sample_clifford2_ref(rng: &mut StreamRng) -> &'static CliffordGate2 {
    let class = rng.below(SYMPLECTIC2_ORDER as u64) as usize;
    let signs = (rng.next_u32() & 0xf) as usize;
    &clifford2_table()[class * 16 + signs]
}

/// All 11520 two-qubit Cliffords in [`CliffordGate2::from_index`] order,
/// built once.
pub fn clifford2_table() -> &'static [CliffordGate2] {
    static TABLE: OnceLock<Vec<CliffordGate2>> = OnceLock::new();
    TABLE.get_or_init(|| (0..CLIFFORD2_ORDER).map(CliffordGate2::from_index).collect())
}

/// Uniform single-qubit Clifford.
pub fn sample_uniform_clifford1(rng: &mut StreamRng) -> CliffordGate1 {
    CliffordGate1::from_index(rng.below(24) as usize)
}

// ---------------------------------------------------------------------------
// Transvection enumeration of Sp(2n, 2).
//
// Vectors are `2n`-bit masks with bit 2q = x_q and bit 2q+1 = z_q. The
// construction maps an integer in 0..|Sp(2n,2)| bijectively to a symplectic
// matrix, returned as the list of images of the basis vectors.

fn inner(v: u8, w: u8, n: usize) -> u8 {
    omega(v, w, n)
}

fn transvection(k: u8, v: u8, n: usize) -> u8 {
    if inner(k, v, n) == 1 {
        v ^ k
    } else {
        v
    }
}

fn pair(v: u8, q: usize) -> u8 {
    (v >> (2 * q)) & 0b11
}

/// Finds `h1, h2` with `y = T_h1 T_h2 x` (`0` means "no transvection").
fn find_transvection(x: u8, y: u8, n: usize) -> (u8, u8) {
    if x == y {
        return (0, 0);
    }
    if inner(x, y, n) == 1 {
        return (x ^ y, 0);
    }
    let mut z = 0u8;
    for q in 0..n {
        let (xp, yp) = (pair(x, q), pair(y, q));
        if xp != 0 && yp != 0 {
            let mut zp = xp ^ yp;
            if zp == 0 {
                // Same non-zero pair: pick one that has inner product 1 with it.
                let (x0, x1) = (xp & 1, (xp >> 1) & 1);
                zp = 0b10;
                if x0 != x1 {
                    zp |= 0b01;
                }
            }
            z |= zp << (2 * q);
            return (x ^ z, y ^ z);
        }
    }
    for q in 0..n {
        let (xp, yp) = (pair(x, q), pair(y, q));
        if xp != 0 && yp == 0 {
            let (x0, x1) = (xp & 1, (xp >> 1) & 1);
            let zp = if x0 == x1 { 0b10 } else { (x0 << 1) | x1 };
            z |= zp << (2 * q);
            break;
        }
    }
    for q in 0..n {
        let (xp, yp) = (pair(x, q), pair(y, q));
        if xp == 0 && yp != 0 {
            let (y0, y1) = (yp & 1, (yp >> 1) & 1);
            let zp = if y0 == y1 { 0b10 } else { (y0 << 1) | y1 };
            z |= zp << (2 * q);
            break;
        }
    }
    (x ^ z, y ^ z)
}

fn symplectic_order(n: usize) -> usize {
    let mut order = 1usize;
    for j in 1..=n {
        order *= ((1usize << (2 * j)) - 1) * (1usize << (2 * j - 1));
    }
    order
}

/// Maps `index` in `0..|Sp(2n,2)|` to a symplectic matrix (images of the
/// basis vectors `e_0..e_{2n-1}`). Supports `n <= 2`.
pub fn symplectic_from_index(index: usize, n: usize) -> Vec<u8> {
    assert!((1..=2).contains(&n), "only 1- and 2-qubit groups are enumerated");
    assert!(index < symplectic_order(n));
    let nn = 2 * n;
    let s = (1usize << nn) - 1;
    let k = (index % s) + 1;
    let mut i = index / s;

    let f1 = k as u8;
    let e1 = 1u8;
    let (t0, t1) = find_transvection(e1, f1, n);
    let bits = (i % (1 << (nn - 1))) as u8;
    i >>= nn - 1;

    // e' = e1 + sum_{j>=2} bits[j-1] e_j
    let mut eprime = e1;
    for j in 2..nn {
        if (bits >> (j - 1)) & 1 == 1 {
            eprime |= 1 << j;
        }
    }
    let h0 = transvection(t1, transvection(t0, eprime, n), n);
    let f1 = if bits & 1 == 1 { 0 } else { f1 };

    // Embed the recursive (n-1)-qubit element on the trailing qubits.
    let mut g: Vec<u8> = (0..nn).map(|j| 1u8 << j).collect();
    if n > 1 {
        let inner_images = symplectic_from_index(i, n - 1);
        for (j, img) in inner_images.into_iter().enumerate() {
            g[j + 2] = img << 2;
        }
    }
    for img in g.iter_mut() {
        let mut v = *img;
        v = transvection(t0, v, n);
        v = transvection(t1, v, n);
        v = transvection(h0, v, n);
        v = transvection(f1, v, n);
        *img = v;
    }
    g
}

/// Inverse of [`symplectic_from_index`] by search (used for class
/// statistics; 720 entries at most).
pub fn symplectic_index(images: &[u8], n: usize) -> usize {
    (0..symplectic_order(n))
        .find(|&i| symplectic_from_index(i, n)[..] == images[..2 * n])
        .expect("images form a symplectic matrix")
}
