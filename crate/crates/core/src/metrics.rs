//! Agreement metrics: Dice overlap and Bland-Altman statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// `2|a ∩ b| / (|a| + |b|)`, defined as 1 when both sets are empty.
pub fn dice(a: &[bool], b: &[bool]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::ShapeMismatch { left: a.len(), right: b.len() });
    }
    let (mut inter, mut na, mut nb) = (0usize, 0usize, 0usize);
    for (&x, &y) in a.iter().zip(b) {
        na += x as usize;
        nb += y as usize;
        inter += (x && y) as usize;
    }
    if na + nb == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / (na + nb) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlandAltman<T> {
    pub mean_diff: T,
    pub sd_diff: T,
    pub loa_low: T,
    pub loa_high: T,
}

pub const LOA_Z: f64 = 1.96;

/// Differences are `auto - manual`; SD uses the `n - 1` denominator.
pub fn bland_altman<T: Real>(pairs: &[(T, T)]) -> Result<BlandAltman<T>> {
    if pairs.len() < 2 {
        return Err(Error::TooFewPairs { found: pairs.len() });
    }
    let n = T::from_count(pairs.len());
    let diffs: Vec<T> = pairs.iter().map(|&(a, m)| a - m).collect();
    let mean = diffs.iter().copied().sum::<T>() / n;
    let var = diffs.iter().map(|&d| (d - mean) * (d - mean)).sum::<T>() / (n - T::one());
    let sd = var.sqrt();
    let half = T::lit(LOA_Z) * sd;
    Ok(BlandAltman { mean_diff: mean, sd_diff: sd, loa_low: mean - half, loa_high: mean + half })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dice_examples() {
        let a = [true, true, true, true, false, false];
        let b = [true, true, false, false, true, true];
        assert_eq!(dice(&a, &a).unwrap(), 1.0);
        assert_eq!(dice(&a, &b).unwrap(), 0.5);
        assert_eq!(dice(&[true, false], &[false, true]).unwrap(), 0.0);
        assert_eq!(dice(&[false; 3], &[false; 3]).unwrap(), 1.0);
        assert!(dice(&a, &a[..2]).is_err());
    }

    #[test]
    fn bland_altman_examples() {
        let p = bland_altman(&[(1.0, 1.0), (2.0, 2.0)]).unwrap();
        assert_eq!((p.mean_diff, p.sd_diff, p.loa_low, p.loa_high), (0.0, 0.0, 0.0, 0.0));
        let q = bland_altman(&[(0.0f64, 2.0), (2.0, 0.0)]).unwrap();
        let sd = 8.0f64.sqrt();
        assert!(q.mean_diff.abs() < 1e-12);
        assert!((q.sd_diff - sd).abs() < 1e-12);
        assert!((q.loa_high - 1.96 * sd).abs() < 1e-12 && (q.loa_low + 1.96 * sd).abs() < 1e-12);
        assert!(bland_altman(&[(1.0f64, 2.0)]).is_err());
    }
}
