//! Exact dyadic rationals `m · 2^e` for flow amounts.
//!
//! Push quanta are a total supply halved some number of times, so every
//! flow value and imbalance is representable exactly. Arithmetic panics on
//! `i128` overflow; callers bound the exponent range beforehand.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign, Neg, Sub, SubAssign};

#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Dyadic {
    // Odd unless zero; zero is stored as (0, 0).
    m: i128,
    e: i32,
}

impl Dyadic {
    pub const ZERO: Dyadic = Dyadic { m: 0, e: 0 };

    pub fn new(m: i128, e: i32) -> Self {
        if m == 0 {
            return Dyadic::ZERO;
        }
        let tz = m.trailing_zeros() as i32;
        Dyadic {
            m: m >> tz,
            e: e.checked_add(tz).expect("dyadic exponent overflow"),
        }
    }

    pub fn from_int(v: i64) -> Self {
        Dyadic::new(v as i128, 0)
    }

    /// Exact conversion; `None` for non-finite input.
    pub fn from_f64(x: f64) -> Option<Self> {
        if !x.is_finite() {
            return None;
        }
        if x == 0.0 {
            return Some(Dyadic::ZERO);
        }
        let bits = x.to_bits();
        let sign = if bits >> 63 == 1 { -1 } else { 1 };
        let exp = ((bits >> 52) & 0x7ff) as i32;
        let frac = (bits & ((1u64 << 52) - 1)) as i128;
        let (m, e) = if exp == 0 {
            (frac, -1074)
        } else {
            (frac | (1i128 << 52), exp - 1075)
        };
        Some(Dyadic::new(sign * m, e))
    }

    pub fn mantissa(&self) -> i128 {
        self.m
    }

    pub fn exponent(&self) -> i32 {
        self.e
    }

    pub fn is_zero(&self) -> bool {
        self.m == 0
    }

    pub fn signum(&self) -> i32 {
        self.m.signum() as i32
    }

    pub fn abs(self) -> Self {
        Dyadic {
            m: self.m.abs(),
            e: self.e,
        }
    }

    pub fn half(self) -> Self {
        if self.m == 0 {
            return self;
        }
        Dyadic {
            m: self.m,
            e: self.e - 1,
        }
    }

    pub fn mul_int(self, k: i64) -> Self {
        Dyadic::new(
            self.m.checked_mul(k as i128).expect("dyadic mantissa overflow"),
            self.e,
        )
    }

    /// Exact product; used for the scaling parameter `α`.
    pub fn mul(self, other: Dyadic) -> Self {
        Dyadic::new(
            self.m.checked_mul(other.m).expect("dyadic mantissa overflow"),
            self.e + other.e,
        )
    }

    /// Integral value, if this is an integer that fits.
    pub fn to_i64(self) -> Option<i64> {
        if self.m == 0 {
            return Some(0);
        }
        if self.e < 0 {
            return None;
        }
        let v = self.m.checked_shl(self.e as u32)?;
        if v >> self.e != self.m {
            return None;
        }
        i64::try_from(v).ok()
    }

    pub fn to_f64(self) -> f64 {
        (self.m as f64) * 2f64.powi(self.e)
    }

    // Both mantissas at the smaller exponent.
    fn aligned(self, other: Dyadic) -> (i128, i128, i32) {
        if self.m == 0 {
            return (0, other.m, other.e);
        }
        if other.m == 0 {
            return (self.m, 0, self.e);
        }
        let e = self.e.min(other.e);
        (shift_up(self.m, self.e - e), shift_up(other.m, other.e - e), e)
    }
}

fn shift_up(m: i128, by: i32) -> i128 {
    let by = by as u32;
    assert!(
        by < 127 && (m.unsigned_abs().leading_zeros() > by + 1),
        "dyadic mantissa overflow"
    );
    m << by
}

impl Add for Dyadic {
    type Output = Dyadic;
    fn add(self, rhs: Dyadic) -> Dyadic {
        let (x, y, e) = self.aligned(rhs);
        Dyadic::new(x.checked_add(y).expect("dyadic mantissa overflow"), e)
    }
}

impl Sub for Dyadic {
    type Output = Dyadic;
    fn sub(self, rhs: Dyadic) -> Dyadic {
        self + (-rhs)
    }
}

impl Neg for Dyadic {
    type Output = Dyadic;
    fn neg(self) -> Dyadic {
        Dyadic {
            m: -self.m,
            e: self.e,
        }
    }
}

impl AddAssign for Dyadic {
    fn add_assign(&mut self, rhs: Dyadic) {
        *self = *self + rhs;
    }
}

impl SubAssign for Dyadic {
    fn sub_assign(&mut self, rhs: Dyadic) {
        *self = *self - rhs;
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        match self.signum().cmp(&other.signum()) {
            Ordering::Equal => {}
            ord => return ord,
        }
        if self.m == 0 {
            return Ordering::Equal;
        }
        // Same sign: compare magnitudes by bit length first.
        let bits = |d: &Dyadic| 128 - d.m.unsigned_abs().leading_zeros() as i64 + d.e as i64;
        let ord = match bits(self).cmp(&bits(other)) {
            Ordering::Equal => {
                let (x, y, _) = self.abs().aligned(other.abs());
                x.cmp(&y)
            }
            ord => ord,
        };
        if self.m < 0 {
            ord.reverse()
        } else {
            ord
        }
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}·2^{}", self.m, self.e)
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.to_i64() {
            Some(v) => write!(f, "{v}"),
            None => write!(f, "{}", self.to_f64()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(x: f64) -> Dyadic {
        Dyadic::from_f64(x).unwrap()
    }

    #[test]
    fn arithmetic_is_exact() {
        assert_eq!(d(0.75) + d(0.25), Dyadic::from_int(1));
        assert_eq!(d(3.0).half().half(), d(0.75));
        assert_eq!(d(1.0) - d(2f64.powi(-60)) + d(2f64.powi(-60)), d(1.0));
        assert_eq!(d(-1.5).mul_int(4), Dyadic::from_int(-6));
        assert_eq!(d(0.5).mul(d(6.0)), Dyadic::from_int(3));
        assert_eq!(Dyadic::from_int(12).to_i64(), Some(12));
        assert_eq!(d(2.5).to_i64(), None);
        assert_eq!(d(-0.375).to_f64(), -0.375);
    }

    #[test]
    fn ordering_matches_floats() {
        let xs = [-3.0, -1.5, -0.001, 0.0, 1e-9, 0.25, 1.0, 7.5, 1e12];
        for &x in &xs {
            for &y in &xs {
                assert_eq!(d(x).cmp(&d(y)), x.partial_cmp(&y).unwrap(), "{x} vs {y}");
            }
        }
    }
}
