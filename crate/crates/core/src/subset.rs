//! Set functions on the subset lattice `Bool^n` and their zeta/Möbius transforms.
//!
//! Index convention, used throughout the crate: bit `j` of a [`BitString`]
//! sits at the `2^j` place of its decimal index. Textual bit strings are
//! written most-significant bit first, so `"011"` has `x_0 = 1, x_1 = 1,
//! x_2 = 0` and decimal value 3.

use std::fmt;
use std::ops::{AddAssign, SubAssign};
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported lattice dimension. Keeps `2^n` well inside `usize`.
pub const MAX_BITS: usize = 30;

/// An `n`-bit assignment `x^n`, stored as its decimal value.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitString {
    len: usize,
    value: usize,
}

impl BitString {
    pub fn new(len: usize, value: usize) -> Result<Self> {
        if len == 0 || len > MAX_BITS || value >> len != 0 {
            return Err(Error::ValueOutOfRange { len, value });
        }
        Ok(Self { len, value })
    }

    pub fn zeros(len: usize) -> Result<Self> {
        Self::new(len, 0)
    }

    pub fn ones(len: usize) -> Result<Self> {
        Self::new(len, (1usize << len) - 1)
    }

    /// Builds from bits listed as `x_0, x_1, ...`.
    pub fn from_bits(bits: &[bool]) -> Result<Self> {
        let value = bits
            .iter()
            .enumerate()
            .fold(0usize, |acc, (j, &b)| acc | (usize::from(b) << j));
        Self::new(bits.len(), value)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `dec(x^n) = sum_j x_j 2^j`.
    pub fn value(&self) -> usize {
        self.value
    }

    pub fn bit(&self, j: usize) -> bool {
        j < self.len && (self.value >> j) & 1 == 1
    }

    pub fn bits(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |j| self.bit(j))
    }

    pub fn count_ones(&self) -> u32 {
        self.value.count_ones()
    }

    pub fn with_bit(self, j: usize, bit: bool) -> Self {
        assert!(j < self.len, "bit {j} out of range for length {}", self.len);
        let value = if bit {
            self.value | (1 << j)
        } else {
            self.value & !(1 << j)
        };
        Self { len: self.len, value }
    }

    /// Every bit string of length `len`, in decimal order.
    pub fn all(len: usize) -> Result<impl Iterator<Item = BitString>> {
        Self::zeros(len)?;
        Ok((0..1usize << len).map(move |value| BitString { len, value }))
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for j in (0..self.len).rev() {
            f.write_str(if self.bit(j) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for BitString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() || !s.chars().all(|c| c == '0' || c == '1') {
            return Err(Error::InvalidBitString(s.to_string()));
        }
        let bits: Vec<bool> = s.chars().rev().map(|c| c == '1').collect();
        Self::from_bits(&bits).map_err(|_| Error::InvalidBitString(s.to_string()))
    }
}

impl Serialize for BitString {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BitString {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// `θ(x^n ≥ y^n)`: true iff every bit of `y` is at most the matching bit of `x`.
pub fn theta_geq(x: &BitString, y: &BitString) -> Result<bool> {
    if x.len != y.len {
        return Err(Error::LengthMismatch { left: x.len, right: y.len });
    }
    Ok(y.value & !x.value == 0)
}

/// Entry `(x, xm)` of the `n`-fold tensor power of `M = [[1, 0], [1, 1]]`.
pub fn m_tensor_entry(n: usize, x: &BitString, xm: &BitString) -> Result<f64> {
    if x.len != n {
        return Err(Error::LengthMismatch { left: n, right: x.len });
    }
    if xm.len != n {
        return Err(Error::LengthMismatch { left: n, right: xm.len });
    }
    Ok(if theta_geq(x, xm)? { 1.0 } else { 0.0 })
}

/// Scalars a [`SubsetTable`] can hold.
pub trait Scalar: Copy + Default + AddAssign + SubAssign + Send + Sync + 'static {}

impl Scalar for f64 {}
impl Scalar for Complex64 {}

/// A function `Bool^n -> T` stored in decimal-index order.
///
/// JSON form is `{"n": n, "values": [...]}`; complex values serialize as
/// `[re, im]` pairs.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SubsetTable<T = f64> {
    n: usize,
    values: Vec<T>,
}

#[derive(Deserialize)]
struct RawTable<T> {
    n: usize,
    values: Vec<T>,
}

impl<'de, T: Scalar + Deserialize<'de>> Deserialize<'de> for SubsetTable<T> {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = RawTable::<T>::deserialize(deserializer)?;
        SubsetTable::new(raw.n, raw.values).map_err(serde::de::Error::custom)
    }
}

impl<T: Scalar> SubsetTable<T> {
    pub fn new(n: usize, values: Vec<T>) -> Result<Self> {
        if n == 0 || n > MAX_BITS || values.len() != 1usize << n {
            return Err(Error::TableLength { n, len: values.len() });
        }
        Ok(Self { n, values })
    }

    /// Infers `n` from the length, which must be a power of two `>= 2`.
    pub fn from_values(values: Vec<T>) -> Result<Self> {
        let len = values.len();
        if !len.is_power_of_two() || len < 2 {
            return Err(Error::TableLength { n: 0, len });
        }
        Self::new(len.trailing_zeros() as usize, values)
    }

    pub fn zeros(n: usize) -> Result<Self> {
        if n == 0 || n > MAX_BITS {
            return Err(Error::TableLength { n, len: 0 });
        }
        Ok(Self { n, values: vec![T::default(); 1 << n] })
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(BitString) -> T) -> Result<Self> {
        let values = BitString::all(n)?.map(&mut f).collect();
        Self::new(n, values)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn get(&self, x: &BitString) -> Result<T> {
        if x.len != self.n {
            return Err(Error::LengthMismatch { left: self.n, right: x.len });
        }
        Ok(self.values[x.value])
    }
}

impl SubsetTable<f64> {
    /// Checks that entries are nonnegative and sum to one within `1e-9`.
    pub fn validate_probability(&self) -> Result<()> {
        if let Some((i, v)) = self.values.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::NotProbability(format!("entry {i} is {v}")));
        }
        let total: f64 = self.values.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::NotProbability(format!("entries sum to {total}")));
        }
        Ok(())
    }

    /// Probability table `|A(x)|^2` of an amplitude vector.
    pub fn from_amplitudes(amplitudes: &[Complex64]) -> Result<Self> {
        Self::from_values(amplitudes.iter().map(|a| a.norm_sqr()).collect())
    }

    /// Marginal over the low `n0` bits: `P(x^{n0}) = sum of P(y)` over `y`
    /// whose low `n0` bits equal `x^{n0}`.
    pub fn marginal_low(&self, n0: usize) -> Result<SubsetTable<f64>> {
        if n0 == 0 || n0 > self.n {
            return Err(Error::InvalidArgument(format!("cannot marginalize {} bits onto {n0}", self.n)));
        }
        let mask = (1usize << n0) - 1;
        let mut out = vec![0.0; 1 << n0];
        for (i, v) in self.values.iter().enumerate() {
            out[i & mask] += v;
        }
        SubsetTable::new(n0, out)
    }
}

/// `f(x) = sum_{xm <= x} fm(xm)` by direct enumeration over all pairs.
pub fn zeta_naive<T: Scalar>(fm: &SubsetTable<T>) -> SubsetTable<T> {
    let size = fm.values.len();
    let values = (0..size)
        .map(|x| {
            let mut acc = T::default();
            for xm in 0..size {
                if xm & !x == 0 {
                    acc += fm.values[xm];
                }
            }
            acc
        })
        .collect();
    SubsetTable { n: fm.n, values }
}

fn butterfly<T: Scalar>(values: &mut [T], mut combine: impl FnMut(&T, &mut T)) {
    let mut half = 1;
    while half < values.len() {
        for block in values.chunks_exact_mut(2 * half) {
            let (low, high) = block.split_at_mut(half);
            for (lo, hi) in low.iter().zip(high) {
                combine(lo, hi);
            }
        }
        half <<= 1;
    }
}

/// In-place subset-sum butterfly, `n 2^(n-1)` additions.
pub fn zeta_fast_in_place<T: Scalar>(table: &mut SubsetTable<T>) {
    butterfly(&mut table.values, |lo, hi| *hi += *lo);
}

pub fn zeta_fast<T: Scalar>(fm: &SubsetTable<T>) -> SubsetTable<T> {
    let mut out = fm.clone();
    zeta_fast_in_place(&mut out);
    out
}

/// Inverts [`zeta_fast_in_place`] with the signed butterfly.
pub fn mobius_inverse_in_place<T: Scalar>(table: &mut SubsetTable<T>) {
    butterfly(&mut table.values, |lo, hi| *hi -= *lo);
}

pub fn mobius_inverse<T: Scalar>(f: &SubsetTable<T>) -> SubsetTable<T> {
    let mut out = f.clone();
    mobius_inverse_in_place(&mut out);
    out
}
