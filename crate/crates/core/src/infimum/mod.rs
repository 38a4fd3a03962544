//! Infimum operators (associative, commutative, idempotent, with a greatest
//! identity) and the ρ-ball infimum computed on top of the wave stream.

mod verify;
mod wave;

pub use verify::{verifiable_phases, verify_phase, Mismatch, PhaseError, PhaseVerdict, Register};
pub use wave::{
    analyze_infimum, attach_infimum, verify_ball_infimum, InfState, InfimumError, InfimumHooks, InfimumReport,
    InputSource,
};

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Carrier values of the shipped operators.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Datum {
    Int(i64),
    /// Bit set over 64 elements.
    Set(u64),
    Pair(i64, i64),
}

impl fmt::Display for Datum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Datum::Int(x) => write!(f, "{x}"),
            Datum::Set(s) => write!(f, "{s:#x}"),
            Datum::Pair(a, b) => write!(f, "({a},{b})"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfimumKind {
    MinInt,
    MaxInt,
    SetIntersection,
    LexPair,
}

impl InfimumKind {
    pub const ALL: [InfimumKind; 4] = [Self::MinInt, Self::MaxInt, Self::SetIntersection, Self::LexPair];

    pub fn name(self) -> &'static str {
        match self {
            Self::MinInt => "min_int",
            Self::MaxInt => "max_int",
            Self::SetIntersection => "set_intersection",
            Self::LexPair => "lex_pair",
        }
    }
}

impl fmt::Display for InfimumKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InfimumKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| format!("unknown infimum kind `{s}`"))
    }
}

type Combine = Arc<dyn Fn(&Datum, &Datum) -> Datum + Send + Sync>;
type Sampler = Arc<dyn Fn(&mut dyn RngCore) -> Datum + Send + Sync>;

/// Which axiom a candidate operator broke, with the witnesses.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum AxiomError {
    #[error("not associative: ({0} + {1}) + {2} differs from {0} + ({1} + {2})")]
    Associativity(Datum, Datum, Datum),
    #[error("not commutative: {0} + {1} differs from {1} + {0}")]
    Commutativity(Datum, Datum),
    #[error("not idempotent: {0} + {0} differs from {0}")]
    Idempotence(Datum),
    #[error("identity {identity} is not neutral for {x}")]
    Identity { identity: Datum, x: Datum },
}

#[derive(Clone)]
pub struct InfimumOp {
    name: String,
    identity: Datum,
    combine: Combine,
    sample: Sampler,
}

impl fmt::Debug for InfimumOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("InfimumOp")
            .field("name", &self.name)
            .field("identity", &self.identity)
            .finish_non_exhaustive()
    }
}

/// Number of random triples tried when an operator is constructed.
pub const AXIOM_SAMPLES: usize = 1000;

fn carrier_mismatch(a: &Datum, b: &Datum) -> ! {
    panic!("operands {a:?} and {b:?} are outside the operator's carrier")
}

pub fn make_infimum(kind: InfimumKind) -> InfimumOp {
    let (identity, combine, sample): (Datum, Combine, Sampler) = match kind {
        InfimumKind::MinInt => (
            Datum::Int(i64::MAX),
            Arc::new(|a, b| match (a, b) {
                (Datum::Int(x), Datum::Int(y)) => Datum::Int(*x.min(y)),
                _ => carrier_mismatch(a, b),
            }),
            Arc::new(|rng| Datum::Int(rng.random_range(-1000..1000))),
        ),
        InfimumKind::MaxInt => (
            Datum::Int(i64::MIN),
            Arc::new(|a, b| match (a, b) {
                (Datum::Int(x), Datum::Int(y)) => Datum::Int(*x.max(y)),
                _ => carrier_mismatch(a, b),
            }),
            Arc::new(|rng| Datum::Int(rng.random_range(-1000..1000))),
        ),
        InfimumKind::SetIntersection => (
            Datum::Set(u64::MAX),
            Arc::new(|a, b| match (a, b) {
                (Datum::Set(x), Datum::Set(y)) => Datum::Set(x & y),
                _ => carrier_mismatch(a, b),
            }),
            // dense sets so that intersections over small balls stay non-empty
            Arc::new(|rng| Datum::Set(rng.next_u64() | rng.next_u64())),
        ),
        InfimumKind::LexPair => (
            Datum::Pair(i64::MAX, i64::MAX),
            Arc::new(|a, b| match (a, b) {
                (Datum::Pair(x0, x1), Datum::Pair(y0, y1)) => {
                    if (x0, x1) <= (y0, y1) {
                        *a
                    } else {
                        *b
                    }
                }
                _ => carrier_mismatch(a, b),
            }),
            Arc::new(|rng| Datum::Pair(rng.random_range(0..8), rng.random_range(-100..100))),
        ),
    };
    InfimumOp {
        name: kind.name().to_string(),
        identity,
        combine,
        sample,
    }
}

impl InfimumOp {
    /// A user-supplied operator, accepted only if a randomized search finds
    /// no axiom counterexample.
    pub fn custom(
        name: impl Into<String>,
        identity: Datum,
        combine: impl Fn(&Datum, &Datum) -> Datum + Send + Sync + 'static,
        sample: impl Fn(&mut dyn RngCore) -> Datum + Send + Sync + 'static,
        seed: u64,
    ) -> Result<Self, AxiomError> {
        let op = Self {
            name: name.into(),
            identity,
            combine: Arc::new(combine),
            sample: Arc::new(sample),
        };
        op.check_axioms(AXIOM_SAMPLES, seed)?;
        Ok(op)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn identity(&self) -> Datum {
        self.identity
    }

    pub fn combine(&self, a: &Datum, b: &Datum) -> Datum {
        (self.combine)(a, b)
    }

    pub fn sample(&self, rng: &mut dyn RngCore) -> Datum {
        (self.sample)(rng)
    }

    /// `⊕` over a non-empty or empty collection (the identity for empty).
    pub fn fold<'a>(&self, items: impl IntoIterator<Item = &'a Datum>) -> Datum {
        items.into_iter().fold(self.identity, |acc, x| self.combine(&acc, x))
    }

    /// `a ≤ b` in the induced order.
    pub fn le(&self, a: &Datum, b: &Datum) -> bool {
        self.combine(a, b) == *a
    }

    pub fn check_axioms(&self, samples: usize, seed: u64) -> Result<(), AxiomError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..samples {
            let x = self.sample(&mut rng);
            let y = self.sample(&mut rng);
            let z = self.sample(&mut rng);
            if self.combine(&x, &x) != x {
                return Err(AxiomError::Idempotence(x));
            }
            if self.combine(&x, &y) != self.combine(&y, &x) {
                return Err(AxiomError::Commutativity(x, y));
            }
            if self.combine(&self.combine(&x, &y), &z) != self.combine(&x, &self.combine(&y, &z)) {
                return Err(AxiomError::Associativity(x, y, z));
            }
            if self.combine(&x, &self.identity) != x {
                return Err(AxiomError::Identity {
                    identity: self.identity,
                    x,
                });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_operators_pass_axioms() {
        for kind in InfimumKind::ALL {
            make_infimum(kind).check_axioms(AXIOM_SAMPLES, 3).unwrap();
        }
    }

    #[test]
    fn min_identity_is_top() {
        let op = make_infimum(InfimumKind::MinInt);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..1000 {
            let x = op.sample(&mut rng);
            assert_eq!(op.combine(&x, &x), x);
            assert!(op.le(&x, &op.identity()));
        }
        assert_eq!(op.fold(&[Datum::Int(4), Datum::Int(-2), Datum::Int(9)]), Datum::Int(-2));
        assert_eq!(op.fold(&[]), Datum::Int(i64::MAX));
    }

    #[test]
    fn subtraction_is_refused() {
        let err = InfimumOp::custom(
            "sub",
            Datum::Int(0),
            |a, b| match (a, b) {
                (Datum::Int(x), Datum::Int(y)) => Datum::Int(x - y),
                _ => unreachable!(),
            },
            |rng| Datum::Int(rng.random_range(-50..50)),
            1,
        )
        .unwrap_err();
        match err {
            // x - x = 0 breaks idempotence for any non-zero x
            AxiomError::Idempotence(Datum::Int(x)) => assert_ne!(x, 0),
            AxiomError::Commutativity(Datum::Int(x), Datum::Int(y)) => assert_ne!(x, y),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn gcd_is_accepted_and_lcm_of_max_identity_is_not() {
        fn gcd(a: i64, b: i64) -> i64 {
            if b == 0 { a.abs() } else { gcd(b, a % b) }
        }
        let ok = InfimumOp::custom(
            "gcd",
            Datum::Int(0),
            |a, b| match (a, b) {
                (Datum::Int(x), Datum::Int(y)) => Datum::Int(gcd(*x, *y)),
                _ => unreachable!(),
            },
            |rng| Datum::Int(rng.random_range(1..200)),
            2,
        );
        assert!(ok.is_ok());
        let bad = InfimumOp::custom(
            "min_with_zero_identity",
            Datum::Int(0),
            |a, b| match (a, b) {
                (Datum::Int(x), Datum::Int(y)) => Datum::Int(*x.min(y)),
                _ => unreachable!(),
            },
            |rng| Datum::Int(rng.random_range(1..200)),
            2,
        );
        assert!(matches!(bad, Err(AxiomError::Identity { .. })));
    }

    #[test]
    fn kind_names_round_trip() {
        for kind in InfimumKind::ALL {
            assert_eq!(kind.name().parse::<InfimumKind>().unwrap(), kind);
        }
        assert!("sum".parse::<InfimumKind>().is_err());
    }
}
