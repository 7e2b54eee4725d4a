use std::fmt;

use crate::data::MAX_PHENOTYPES;
use crate::error::{Error, Result};

/// A non-zero 0/1 weight over K phenotypes; bit `k` of the mask selects
/// phenotype `k` (0-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WeightVector {
    mask: u32,
    k: u8,
}

impl WeightVector {
    pub fn new(mask: u32, k: usize) -> Result<WeightVector> {
        if k == 0 || k > MAX_PHENOTYPES {
            return Err(Error::TooManyPhenotypes(k));
        }
        if mask == 0 || mask >= (1u32 << k) {
            return Err(Error::Precondition(format!("weight mask {mask} outside [1, 2^{k} - 1]")));
        }
        Ok(WeightVector { mask, k: k as u8 })
    }

    pub fn from_bits(bits: &[u8]) -> Result<WeightVector> {
        let mask = bits.iter().enumerate().try_fold(0u32, |m, (i, &b)| match b {
            0 => Ok(m),
            1 => Ok(m | (1 << i)),
            _ => Err(Error::Precondition(format!("weight bit {b} is not 0/1"))),
        })?;
        WeightVector::new(mask, bits.len())
    }

    pub fn all(k: usize) -> WeightVector {
        WeightVector { mask: (1u32 << k) - 1, k: k as u8 }
    }

    pub fn single(index: usize, k: usize) -> WeightVector {
        WeightVector { mask: 1u32 << index, k: k as u8 }
    }

    pub fn mask(&self) -> u32 {
        self.mask
    }
    pub fn k(&self) -> usize {
        self.k as usize
    }
    pub fn is_set(&self, index: usize) -> bool {
        self.mask >> index & 1 == 1
    }
    pub fn bits(&self) -> Vec<u8> {
        (0..self.k()).map(|i| u8::from(self.is_set(i))).collect()
    }
    pub fn count(&self) -> u32 {
        self.mask.count_ones()
    }
}

/// Phenotype-ordered 0/1 string, e.g. `101`.
impl fmt::Display for WeightVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.k() {
            f.write_str(if self.is_set(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// All 2^K - 1 weights in reflected Gray-code order, so consecutive masks
/// differ in exactly one phenotype.
pub fn enumerate_weights(k: usize) -> Result<Vec<WeightVector>> {
    if k == 0 || k > MAX_PHENOTYPES {
        return Err(Error::TooManyPhenotypes(k));
    }
    Ok((1u32..1 << k).map(|i| WeightVector { mask: i ^ (i >> 1), k: k as u8 }).collect())
}

/// U(w) = sum of the selected -ln p entries, in phenotype order.
pub fn weighted_stat(logp_row: &[f64], w: WeightVector) -> f64 {
    logp_row.iter().enumerate().filter(|(i, _)| w.is_set(*i)).map(|(_, v)| v).sum()
}
