//! Bit-packed linear algebra over GF(2).
//!
//! Vectors are little-endian in both word and bit order: bit `i` lives in
//! word `i / 64` at position `i % 64`.

pub const WORD_BITS: usize = 64;

#[inline]
pub fn words_for(bits: usize) -> usize {
    bits.div_ceil(WORD_BITS)
}

#[inline]
pub fn get_bit(words: &[u64], i: usize) -> bool {
    (words[i / WORD_BITS] >> (i % WORD_BITS)) & 1 == 1
}

#[inline]
pub fn set_bit(words: &mut [u64], i: usize, value: bool) {
    let mask = 1u64 << (i % WORD_BITS);
    if value {
        words[i / WORD_BITS] |= mask;
    } else {
        words[i / WORD_BITS] &= !mask;
    }
}

#[inline]
pub fn flip_bit(words: &mut [u64], i: usize) {
    words[i / WORD_BITS] ^= 1u64 << (i % WORD_BITS);
}

/// Index of the lowest set bit, if any.
pub fn first_one(words: &[u64]) -> Option<usize> {
    words
        .iter()
        .enumerate()
        .find(|(_, w)| **w != 0)
        .map(|(i, w)| i * WORD_BITS + w.trailing_zeros() as usize)
}

/// Dense row-major bit matrix with `cols` columns packed into words.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BitMatrix {
    rows: usize,
    cols: usize,
    stride: usize,
    data: Vec<u64>,
}

impl BitMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let stride = words_for(cols);
        Self {
            rows,
            cols,
            stride,
            data: vec![0; rows * stride],
        }
    }

    /// Builds a matrix whose rows are the given packed vectors. Every row
    /// must carry at least `words_for(cols)` words; extra words are ignored.
    pub fn from_rows<'a, I>(cols: usize, rows: I) -> Self
    where
        I: IntoIterator<Item = &'a [u64]>,
    {
        let stride = words_for(cols);
        let mut data = Vec::new();
        let mut n = 0;
        for row in rows {
            data.extend_from_slice(&row[..stride]);
            n += 1;
        }
        // Clear any stray bits past `cols` in the last word.
        let tail = cols % WORD_BITS;
        if tail != 0 && stride > 0 {
            let mask = (1u64 << tail) - 1;
            for r in 0..n {
                data[r * stride + stride - 1] &= mask;
            }
        }
        Self {
            rows: n,
            cols,
            stride,
            data,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[u64] {
        &self.data[r * self.stride..(r + 1) * self.stride]
    }

    pub fn get(&self, r: usize, c: usize) -> bool {
        get_bit(self.row(r), c)
    }

    pub fn set(&mut self, r: usize, c: usize, value: bool) {
        let s = self.stride;
        set_bit(&mut self.data[r * s..(r + 1) * s], c, value);
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        let s = self.stride;
        for w in 0..s {
            self.data.swap(a * s + w, b * s + w);
        }
    }

    /// `row[dst] ^= row[src]`, touching only words from `from_word` on.
    fn xor_row_from(&mut self, dst: usize, src: usize, from_word: usize) {
        let s = self.stride;
        let (d, sr) = (dst * s, src * s);
        for w in from_word..s {
            let v = self.data[sr + w];
            self.data[d + w] ^= v;
        }
    }

    /// Row-reduces in place to echelon form and returns the rank.
    pub fn rank_in_place(&mut self) -> usize {
        let mut rank = 0;
        for c in 0..self.cols {
            if rank == self.rows {
                break;
            }
            let w = c / WORD_BITS;
            let mask = 1u64 << (c % WORD_BITS);
            let Some(pivot) = (rank..self.rows).find(|&r| self.data[r * self.stride + w] & mask != 0) else {
                continue;
            };
            self.swap_rows(rank, pivot);
            for r in rank + 1..self.rows {
                if self.data[r * self.stride + w] & mask != 0 {
                    self.xor_row_from(r, rank, w);
                }
            }
            rank += 1;
        }
        rank
    }

    pub fn rank(&self) -> usize {
        self.clone().rank_in_place()
    }
}

/// Rank over GF(2) of a family of packed vectors of `bits` bits each.
pub fn rank_of<'a, I>(bits: usize, vectors: I) -> usize
where
    I: IntoIterator<Item = &'a [u64]>,
{
    BitMatrix::from_rows(bits, vectors).rank_in_place()
}
