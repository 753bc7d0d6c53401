use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Default relative tolerance for matching a length against a pair.
pub const DEFAULT_PAIR_TOL: f64 = 1e-9;

/// Integer pair (l, k), l >= k >= 1, generating one critical length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CriticalPair {
    pub l: u32,
    pub k: u32,
}

impl CriticalPair {
    pub fn new(l: u32, k: u32) -> Self {
        assert!(l >= k && k >= 1, "critical pairs need l >= k >= 1");
        Self { l, k }
    }

    fn quad_form(&self) -> f64 {
        let (l, k) = (self.l as f64, self.k as f64);
        l * l + l * k + k * k
    }

    /// The critical length 2*pi*sqrt((l^2 + lk + k^2)/3).
    pub fn length(&self) -> f64 {
        2.0 * PI * (self.quad_form() / 3.0).sqrt()
    }

    /// Angular frequency of the rotation on the plane spanned by this pair.
    pub fn omega(&self) -> f64 {
        let (l, k) = (self.l as f64, self.k as f64);
        (2.0 * l + k) * (l - k) * (2.0 * k + l) / (3.0 * 3f64.sqrt() * self.quad_form().powf(1.5))
    }

    /// Rotation period, `None` when l = k.
    pub fn period(&self) -> Option<f64> {
        (self.l != self.k).then(|| 2.0 * PI / self.omega())
    }

    pub fn is_diagonal(&self) -> bool {
        self.l == self.k
    }

    /// Number of real basis functions contributed (1 when l = k, else 2).
    pub fn dim(&self) -> usize {
        if self.is_diagonal() {
            1
        } else {
            2
        }
    }
}

impl fmt::Display for CriticalPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.l, self.k)
    }
}

/// All pairs whose critical length is within `tol * length` of `length`.
///
/// Pairs are ordered by increasing rotation period; the stationary pair
/// (l = k), if any, comes last.
pub fn enumerate_pairs(length: f64, tol: f64) -> Vec<CriticalPair> {
    if !(length > 0.0) || !(tol > 0.0) {
        return Vec::new();
    }
    let bound = length.ceil() as u32 + 2;
    let mut out = Vec::new();
    for l in 1..=bound {
        for k in 1..=l {
            let p = CriticalPair::new(l, k);
            if (p.length() - length).abs() <= tol * length {
                out.push(p);
            }
        }
    }
    out.sort_by(|a, b| b.omega().total_cmp(&a.omega()));
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ClassTag {
    C,
    N1,
    N2,
    N3,
    N4,
}

impl fmt::Display for ClassTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ClassTag::C => "C",
            ClassTag::N1 => "N1",
            ClassTag::N2 => "N2",
            ClassTag::N3 => "N3",
            ClassTag::N4 => "N4",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthClass {
    pub tag: ClassTag,
    pub pairs: Vec<CriticalPair>,
    pub dim_m: usize,
}

impl LengthClass {
    /// True for the classes the feedback construction supports.
    pub fn is_stabilizable(&self) -> bool {
        matches!(self.tag, ClassTag::N2 | ClassTag::N3)
    }
}

pub fn classify_length(length: f64, tol: f64) -> LengthClass {
    let pairs = enumerate_pairs(length, tol);
    let dim_m = pairs.iter().map(CriticalPair::dim).sum();
    let has_diag = pairs.iter().any(CriticalPair::is_diagonal);
    let tag = match (pairs.len(), has_diag) {
        (0, _) => ClassTag::C,
        (1, true) => ClassTag::N1,
        (1, false) => ClassTag::N2,
        (_, false) => ClassTag::N3,
        (_, true) => ClassTag::N4,
    };
    LengthClass { tag, pairs, dim_m }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seven_thirds_frequency() {
        let p = CriticalPair::new(2, 1);
        let expected = 441.0 * PI / (10.0 * 21f64.sqrt());
        assert!((p.period().unwrap() - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn diagonal_pair_is_stationary() {
        let p = CriticalPair::new(3, 3);
        assert_eq!(p.omega(), 0.0);
        assert!(p.period().is_none());
        assert!((p.length() - 6.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn n3_and_n4_examples() {
        let l3 = 2.0 * PI * (91.0f64 / 3.0).sqrt();
        let c = classify_length(l3, DEFAULT_PAIR_TOL);
        assert_eq!(c.tag, ClassTag::N3);
        assert_eq!(c.dim_m, 4);
        assert!(c.pairs.iter().all(|p| !p.is_diagonal()));
        let periods: Vec<f64> = c.pairs.iter().map(|p| p.period().unwrap()).collect();
        assert!(periods.windows(2).all(|w| w[0] < w[1]));

        let c = classify_length(14.0 * PI, DEFAULT_PAIR_TOL);
        assert_eq!(c.tag, ClassTag::N4);
        assert_eq!(c.dim_m, 3);
    }
}
