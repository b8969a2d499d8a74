use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Closed interval for one parameter; either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bound {
    pub lo: f64,
    pub hi: f64,
}

// starting values sitting on a finite bound are moved this fraction inside
const EDGE: f64 = 1e-12;

impl Bound {
    pub const FREE: Bound = Bound {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo >= hi {
            return Err(Error::InvalidInput(format!("invalid bound [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn lower(lo: f64) -> Self {
        Self { lo, hi: f64::INFINITY }
    }

    pub fn upper(hi: f64) -> Self {
        Self {
            lo: f64::NEG_INFINITY,
            hi,
        }
    }

    pub fn contains(&self, p: f64) -> bool {
        p >= self.lo && p <= self.hi
    }

    /// Maps an external value to the unconstrained coordinate.
    ///
    /// Two-sided bounds use the logistic map, one-sided bounds an
    /// exponential offset from the finite end.
    pub(crate) fn to_internal(&self, p: f64) -> f64 {
        match (self.lo.is_finite(), self.hi.is_finite()) {
            (true, true) => {
                let t = ((p - self.lo) / (self.hi - self.lo)).clamp(EDGE, 1.0 - EDGE);
                (t / (1.0 - t)).ln()
            }
            (true, false) => (p - self.lo).max(EDGE * p.abs().max(f64::MIN_POSITIVE)).ln(),
            (false, true) => (self.hi - p).max(EDGE * p.abs().max(f64::MIN_POSITIVE)).ln(),
            (false, false) => p,
        }
    }

    pub(crate) fn to_external(&self, u: f64) -> f64 {
        let p = match (self.lo.is_finite(), self.hi.is_finite()) {
            (true, true) => self.lo + (self.hi - self.lo) / (1.0 + (-u).exp()),
            (true, false) => self.lo + u.exp(),
            (false, true) => self.hi - u.exp(),
            (false, false) => u,
        };
        p.clamp(self.lo, self.hi)
    }

    /// `dp/du` at internal coordinate `u`.
    pub(crate) fn derivative(&self, u: f64) -> f64 {
        match (self.lo.is_finite(), self.hi.is_finite()) {
            (true, true) => {
                let s = 1.0 / (1.0 + (-u).exp());
                (self.hi - self.lo) * s * (1.0 - s)
            }
            (true, false) => u.exp(),
            (false, true) => -u.exp(),
            (false, false) => 1.0,
        }
    }
}

impl Default for Bound {
    fn default() -> Self {
        Bound::FREE
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_empty_interval() {
        assert!(Bound::new(1.0, 1.0).is_err());
        assert!(Bound::new(2.0, 1.0).is_err());
    }

    #[test]
    fn start_on_bound_moves_inside() {
        let b = Bound::new(0.0, 1.0).unwrap();
        let u = b.to_internal(1.0);
        assert!(u.is_finite());
        assert!(b.to_external(u) <= 1.0);
        let l = Bound::lower(2.0);
        assert!(l.to_internal(2.0).is_finite());
    }

    proptest! {
        #[test]
        fn roundtrip_and_containment(lo in -1e3f64..1e3, w in 1e-3f64..1e3, t in 0.01f64..0.99, u in -800.0f64..800.0) {
            let hi = lo + w;
            for b in [Bound::new(lo, hi).unwrap(), Bound::lower(lo), Bound::upper(hi), Bound::FREE] {
                let p = lo + t * w;
                let back = b.to_external(b.to_internal(p));
                prop_assert!((back - p).abs() <= 1e-9 * (1.0 + p.abs()));
                prop_assert!(b.contains(b.to_external(u)));
            }
        }

        #[test]
        fn derivative_matches_difference(u in -20.0f64..20.0) {
            let b = Bound::new(-3.0, 5.0).unwrap();
            let h = 1e-6;
            let fd = (b.to_external(u + h) - b.to_external(u - h)) / (2.0 * h);
            prop_assert!((fd - b.derivative(u)).abs() < 1e-7);
        }
    }
}
