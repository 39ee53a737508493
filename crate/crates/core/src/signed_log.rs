//! Signed values carried in log space.
//!
//! Density estimates built from telescoping differences can be negative and
//! span hundreds of orders of magnitude, so they are stored as
//! `(log |x|, sign(x))`. The zero value is canonical: sign `Zero` with
//! `log_abs = -inf`.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};

/// Sign of a [`SignedLog`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sign {
    Negative,
    Zero,
    Positive,
}

impl Sign {
    pub fn as_i8(self) -> i8 {
        match self {
            Sign::Negative => -1,
            Sign::Zero => 0,
            Sign::Positive => 1,
        }
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.as_i8())
    }

    pub fn from_i8(s: i8) -> Option<Sign> {
        match s {
            -1 => Some(Sign::Negative),
            0 => Some(Sign::Zero),
            1 => Some(Sign::Positive),
            _ => None,
        }
    }
}

impl Mul for Sign {
    type Output = Sign;
    fn mul(self, rhs: Sign) -> Sign {
        match self.as_i8() * rhs.as_i8() {
            -1 => Sign::Negative,
            0 => Sign::Zero,
            _ => Sign::Positive,
        }
    }
}

impl Neg for Sign {
    type Output = Sign;
    fn neg(self) -> Sign {
        match self {
            Sign::Negative => Sign::Positive,
            Sign::Zero => Sign::Zero,
            Sign::Positive => Sign::Negative,
        }
    }
}

/// A real number stored as `(log |x|, sign x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignedLog {
    log_abs: f64,
    sign: Sign,
}

impl SignedLog {
    pub const ZERO: SignedLog = SignedLog {
        log_abs: f64::NEG_INFINITY,
        sign: Sign::Zero,
    };

    pub const ONE: SignedLog = SignedLog {
        log_abs: 0.0,
        sign: Sign::Positive,
    };

    /// Builds a value from its parts. A `-inf` magnitude or a zero sign both
    /// collapse to the canonical zero.
    pub fn new(log_abs: f64, sign: Sign) -> SignedLog {
        if sign == Sign::Zero || log_abs == f64::NEG_INFINITY {
            SignedLog::ZERO
        } else {
            SignedLog { log_abs, sign }
        }
    }

    /// The positive number `exp(log_value)`; `-inf` gives zero.
    pub fn from_log(log_value: f64) -> SignedLog {
        SignedLog::new(log_value, Sign::Positive)
    }

    pub fn from_real(x: f64) -> Result<SignedLog> {
        if !x.is_finite() {
            return Err(Error::NonFinite {
                what: "signed-log input".into(),
                value: x,
            });
        }
        Ok(match x.partial_cmp(&0.0) {
            Some(Ordering::Greater) => SignedLog::new(x.ln(), Sign::Positive),
            Some(Ordering::Less) => SignedLog::new((-x).ln(), Sign::Negative),
            _ => SignedLog::ZERO,
        })
    }

    pub fn to_real(self) -> f64 {
        self.sign.as_f64() * self.log_abs.exp()
    }

    pub fn log_abs(self) -> f64 {
        self.log_abs
    }

    pub fn sign(self) -> Sign {
        self.sign
    }

    pub fn is_zero(self) -> bool {
        self.sign == Sign::Zero
    }

    pub fn abs(self) -> SignedLog {
        SignedLog::new(self.log_abs, Sign::Positive)
    }

    /// Multiplies by the positive number `exp(log_factor)`.
    pub fn scale_log(self, log_factor: f64) -> SignedLog {
        if self.is_zero() {
            return self;
        }
        SignedLog::new(self.log_abs + log_factor, self.sign)
    }

    pub fn add(self, other: SignedLog) -> SignedLog {
        if self.is_zero() {
            return other;
        }
        if other.is_zero() {
            return self;
        }
        let (big, small) = if self.log_abs >= other.log_abs {
            (self, other)
        } else {
            (other, self)
        };
        if big.log_abs == f64::INFINITY {
            if small.log_abs == f64::INFINITY && small.sign != big.sign {
                return SignedLog::new(f64::NAN, Sign::Positive);
            }
            return big;
        }
        let ratio = (small.log_abs - big.log_abs).exp();
        if big.sign == small.sign {
            SignedLog::new(big.log_abs + ratio.ln_1p(), big.sign)
        } else if small.log_abs == big.log_abs {
            SignedLog::ZERO
        } else {
            SignedLog::new(big.log_abs + (-ratio).ln_1p(), big.sign)
        }
    }

    pub fn mul(self, other: SignedLog) -> SignedLog {
        SignedLog::new(self.log_abs + other.log_abs, self.sign * other.sign)
    }
}

impl Default for SignedLog {
    fn default() -> Self {
        SignedLog::ZERO
    }
}

impl fmt::Display for SignedLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.sign {
            Sign::Zero => write!(f, "0"),
            Sign::Positive => write!(f, "exp({})", self.log_abs),
            Sign::Negative => write!(f, "-exp({})", self.log_abs),
        }
    }
}

impl Add for SignedLog {
    type Output = SignedLog;
    fn add(self, rhs: SignedLog) -> SignedLog {
        SignedLog::add(self, rhs)
    }
}

impl Sub for SignedLog {
    type Output = SignedLog;
    fn sub(self, rhs: SignedLog) -> SignedLog {
        SignedLog::add(self, -rhs)
    }
}

impl Mul for SignedLog {
    type Output = SignedLog;
    fn mul(self, rhs: SignedLog) -> SignedLog {
        SignedLog::mul(self, rhs)
    }
}

impl Neg for SignedLog {
    type Output = SignedLog;
    fn neg(self) -> SignedLog {
        SignedLog {
            log_abs: self.log_abs,
            sign: -self.sign,
        }
    }
}

impl Sum for SignedLog {
    fn sum<I: Iterator<Item = SignedLog>>(iter: I) -> SignedLog {
        iter.fold(SignedLog::ZERO, SignedLog::add)
    }
}
