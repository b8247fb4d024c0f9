//! The rank-2 weight lattice `P = Z e1 + Z e2`, its root sublattice
//! `Q = Z a0` with `a0 = e1 - e2`, the bilinear form and the 2-cocycle.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qscalar::{QScalar, ScalarError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LatticeError {
    #[error("valuation base must be nonzero")]
    ZeroBase,
}

/// Folds any integer index onto the internal colour set `{1, 2}`
/// (`e_{i+2} = e_i`, so even indices are `e2`).
pub fn fold_index(i: i64) -> u8 {
    if i.rem_euclid(2) == 1 {
        1
    } else {
        2
    }
}

/// `c1 e1 + c2 e2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct Weight {
    pub c1: i64,
    pub c2: i64,
}

impl Weight {
    pub const ZERO: Weight = Weight { c1: 0, c2: 0 };

    pub fn new(c1: i64, c2: i64) -> Self {
        Weight { c1, c2 }
    }

    /// `e_i` with the index folded mod 2.
    pub fn basis(i: i64) -> Self {
        match fold_index(i) {
            1 => Weight::new(1, 0),
            _ => Weight::new(0, 1),
        }
    }

    /// Coefficient on the folded colour `1` or `2`.
    pub fn coord(&self, colour: u8) -> i64 {
        if colour == 1 {
            self.c1
        } else {
            self.c2
        }
    }

    pub fn is_zero(&self) -> bool {
        self.c1 == 0 && self.c2 == 0
    }

    /// The root-lattice element with this weight, if it lies in `Q`.
    pub fn as_root(&self) -> Option<RootElt> {
        (self.c1 == -self.c2).then_some(RootElt(self.c1))
    }
}

impl Add for Weight {
    type Output = Weight;
    fn add(self, o: Weight) -> Weight {
        Weight::new(self.c1 + o.c1, self.c2 + o.c2)
    }
}

impl Sub for Weight {
    type Output = Weight;
    fn sub(self, o: Weight) -> Weight {
        Weight::new(self.c1 - o.c1, self.c2 - o.c2)
    }
}

impl Neg for Weight {
    type Output = Weight;
    fn neg(self) -> Weight {
        Weight::new(-self.c1, -self.c2)
    }
}

impl Mul<Weight> for i64 {
    type Output = Weight;
    fn mul(self, w: Weight) -> Weight {
        Weight::new(self * w.c1, self * w.c2)
    }
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.c1, self.c2) {
            (0, 0) => write!(f, "0"),
            (a, 0) => write!(f, "{}e1", coeff_prefix(a)),
            (0, b) => write!(f, "{}e2", coeff_prefix(b)),
            (a, b) => {
                let sign = if b < 0 { "-" } else { "+" };
                write!(f, "{}e1{}{}e2", coeff_prefix(a), sign, coeff_prefix(b.abs()))
            }
        }
    }
}

fn coeff_prefix(a: i64) -> String {
    match a {
        1 => String::new(),
        -1 => "-".to_string(),
        _ => a.to_string(),
    }
}

/// `m a0` in the root lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct RootElt(pub i64);

impl RootElt {
    pub const ZERO: RootElt = RootElt(0);

    pub fn m(&self) -> i64 {
        self.0
    }

    pub fn weight(&self) -> Weight {
        Weight::new(self.0, -self.0)
    }

    /// The root `e_i - e_j` (indices folded).
    pub fn difference(i: i64, j: i64) -> RootElt {
        (Weight::basis(i) - Weight::basis(j))
            .as_root()
            .expect("difference of basis weights lies in the root lattice")
    }
}

impl Add for RootElt {
    type Output = RootElt;
    fn add(self, o: RootElt) -> RootElt {
        RootElt(self.0 + o.0)
    }
}

impl Neg for RootElt {
    type Output = RootElt;
    fn neg(self) -> RootElt {
        RootElt(-self.0)
    }
}

impl fmt::Display for RootElt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub fn bilinear(a: Weight, b: Weight) -> i64 {
    a.c1 * b.c1 + a.c2 * b.c2
}

/// Bilinear form on folded basis indices.
pub fn basis_pairing(i: i64, j: i64) -> i64 {
    i64::from(fold_index(i) == fold_index(j))
}

/// `eps(m a0, n a0) = (-1)^{mn}`.
pub fn cocycle(a: RootElt, b: RootElt) -> i64 {
    if (a.0 * b.0).rem_euclid(2) == 0 {
        1
    } else {
        -1
    }
}

/// Eigenvalue `(b, beta)` of `b(0)` on `e^beta`.
pub fn zero_mode(b: Weight, lattice: RootElt) -> i64 {
    bilinear(b, lattice.weight())
}

/// `mu^{(a, beta)}`.
pub fn valuation(mu: &QScalar, a: Weight, lattice: RootElt) -> Result<QScalar, LatticeError> {
    if mu.is_zero() {
        return Err(LatticeError::ZeroBase);
    }
    mu.pow(zero_mode(a, lattice)).map_err(|e| match e {
        ScalarError::DivisionByZero | ScalarError::NonInvertibleSeries => LatticeError::ZeroBase,
    })
}
