//! Exact rationals for closeness values and superiority margins.

use core::cmp::Ordering;
use core::fmt;

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Closeness centrality `(n - 1) / sum of delays`, kept as an exact fraction.
///
/// The unit is 1/µs. A zero delay sum with a non-zero numerator is treated
/// as infinitely central; a zero numerator (single-node system) is zero.
#[derive(Clone, Copy, Debug, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Closeness {
    num: u64,
    den: u64,
}

impl Closeness {
    pub const ZERO: Closeness = Closeness { num: 0, den: 1 };
    pub const INFINITE: Closeness = Closeness { num: 1, den: 0 };

    pub fn new(peers: u64, delay_sum: u64) -> Self {
        if peers == 0 {
            return Self::ZERO;
        }
        if delay_sum == 0 {
            return Self::INFINITE;
        }
        let g = gcd(peers as u128, delay_sum as u128) as u64;
        Closeness { num: peers / g, den: delay_sum / g }
    }

    pub fn numerator(&self) -> u64 {
        self.num
    }

    pub fn denominator(&self) -> u64 {
        self.den
    }

    pub fn is_infinite(&self) -> bool {
        self.den == 0
    }

    pub fn to_f64(&self) -> f64 {
        if self.den == 0 {
            f64::INFINITY
        } else {
            self.num as f64 / self.den as f64
        }
    }
}

impl PartialEq for Closeness {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Ord for Closeness {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self.den == 0, other.den == 0) {
            (true, true) => Ordering::Equal,
            (true, false) => Ordering::Greater,
            (false, true) => Ordering::Less,
            (false, false) => {
                let lhs = self.num as u128 * other.den as u128;
                let rhs = other.num as u128 * self.den as u128;
                lhs.cmp(&rhs)
            }
        }
    }
}

impl PartialOrd for Closeness {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Closeness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 0 {
            write!(f, "inf")
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

/// Signed superiority margin `delta_xy`, reduced to lowest terms.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Delta {
    num: i128,
    den: u128,
}

impl Delta {
    pub fn new(num: i128, den: u128) -> Self {
        assert!(den > 0, "delta denominator must be positive");
        let g = gcd(num.unsigned_abs(), den).max(1);
        Delta { num: num / g as i128, den: den / g }
    }

    pub fn integer(v: i128) -> Self {
        Delta { num: v, den: 1 }
    }

    pub fn numerator(&self) -> i128 {
        self.num
    }

    pub fn denominator(&self) -> u128 {
        self.den
    }

    pub fn signum(&self) -> i32 {
        self.num.signum() as i32
    }
}

impl fmt::Display for Delta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closeness_reduces_and_compares_exactly() {
        assert_eq!(Closeness::new(4, 4), Closeness::new(1, 1));
        assert_eq!(Closeness::new(4, 7).numerator(), 4);
        assert!(Closeness::new(2, 2) > Closeness::new(2, 3));
        assert!(Closeness::new(3, 5) > Closeness::new(1, 2));
        assert!(Closeness::INFINITE > Closeness::new(1000, 1));
        assert_eq!(Closeness::new(0, 0), Closeness::ZERO);
    }

    #[test]
    fn delta_sign_and_reduction() {
        let d = Delta::new(-6, 4);
        assert_eq!(d.numerator(), -3);
        assert_eq!(d.denominator(), 2);
        assert_eq!(d.signum(), -1);
        assert_eq!(Delta::new(0, 7), Delta::integer(0));
    }
}
