//! Double-double arithmetic (~31 significant digits).
//!
//! Used only where a residual must be certified far below the f64 round-off
//! of the operator application: the final conformal-scalar residual of the
//! neck fixed point is amplified by a large inverse power of the conformal
//! factor, so the defect is evaluated and refined in this extended precision.

/// An unevaluated sum `hi + lo` with `|lo| <= ulp(hi)/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let err = b - (s - a);
    (s, err)
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let err = f64::mul_add(a, b, -p);
    (p, err)
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

    #[inline]
    pub fn from(a: f64) -> Dd {
        Dd { hi: a, lo: 0.0 }
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    #[inline]
    pub fn add(self, other: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, other.hi);
        let e = e + self.lo + other.lo;
        let (hi, lo) = quick_two_sum(s, e);
        Dd { hi, lo }
    }

    #[inline]
    pub fn add_f64(self, b: f64) -> Dd {
        let (s, e) = two_sum(self.hi, b);
        let e = e + self.lo;
        let (hi, lo) = quick_two_sum(s, e);
        Dd { hi, lo }
    }

    #[inline]
    pub fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }

    #[inline]
    pub fn sub(self, other: Dd) -> Dd {
        self.add(other.neg())
    }

    #[inline]
    pub fn mul(self, other: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, other.hi);
        let e = e + self.hi * other.lo + self.lo * other.hi;
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }

    #[inline]
    pub fn mul_f64(self, b: f64) -> Dd {
        let (p, e) = two_prod(self.hi, b);
        let e = e + self.lo * b;
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }

    /// Integer power by repeated multiplication (exponents stay small here).
    pub fn powi(self, mut k: u32) -> Dd {
        let mut base = self;
        let mut acc = Dd::from(1.0);
        while k > 0 {
            if k & 1 == 1 {
                acc = acc.mul(base);
            }
            base = base.mul(base);
            k >>= 1;
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catastrophic_cancellation_survives() {
        // (1 + 1e-20) - 1 == 1e-20 in dd, == 0 in f64
        let a = Dd::from(1.0).add_f64(1e-20);
        let d = a.add_f64(-1.0);
        assert_eq!(d.to_f64(), 1e-20);
    }

    #[test]
    fn product_error_term_captured() {
        let a = Dd::from(1.0 + 2f64.powi(-30));
        let sq = a.mul(a);
        // exact: 1 + 2^-29 + 2^-60
        let err = sq.add_f64(-(1.0 + 2f64.powi(-29)));
        assert!((err.to_f64() - 2f64.powi(-60)).abs() < 1e-25);
    }

    #[test]
    fn powi_matches_f64_scale() {
        let x = Dd::from(1.1);
        let p = x.powi(5);
        assert!((p.to_f64() - 1.1f64.powi(5)).abs() < 1e-15);
    }
}
