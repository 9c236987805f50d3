use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rng::{SeedSpec, Stream};

/// Leftmost site an environment will materialize.
pub const LEFT_GUARD: i64 = -1_000_000;

/// Law of the right-jump probability `omega_x(1)` at a single site.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SiteLaw {
    /// Every site has right-jump probability `p`; `p = 1` is allowed for the
    /// monotone walk.
    Fixed {
        p: f64,
    },
    /// `p1` with probability `q`, else `p2`.
    TwoPoint {
        p1: f64,
        p2: f64,
        q: f64,
    },
    Uniform {
        a: f64,
        b: f64,
    },
    /// Beta(alpha, beta) conditioned on `(eps, 1 - eps)`.
    Beta {
        alpha: f64,
        beta: f64,
        #[serde(default = "default_eps")]
        eps: f64,
    },
}

fn default_eps() -> f64 {
    1e-6
}

fn open_unit(p: f64) -> bool {
    p > 0.0 && p < 1.0
}

impl SiteLaw {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SiteLaw::Fixed { p } if p > 0.0 && p <= 1.0 => Ok(()),
            SiteLaw::Fixed { p } => invalid(format!("fixed site probability {p} not in (0, 1]")),
            SiteLaw::TwoPoint { p1, p2, q } => {
                if !(open_unit(p1) && open_unit(p2)) {
                    return invalid("two-point site probabilities must lie in (0, 1)");
                }
                if !(0.0..=1.0).contains(&q) {
                    return invalid(format!("two-point weight {q} not in [0, 1]"));
                }
                Ok(())
            }
            SiteLaw::Uniform { a, b } if 0.0 < a && a < b && b < 1.0 => Ok(()),
            SiteLaw::Uniform { a, b } => invalid(format!("uniform({a}, {b}) needs 0 < a < b < 1")),
            SiteLaw::Beta { alpha, beta, eps } => {
                if !(alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()) {
                    return invalid("beta parameters must be positive");
                }
                if !(eps > 0.0 && eps < 0.5) {
                    return invalid(format!("beta truncation eps = {eps} not in (0, 1/2)"));
                }
                Ok(())
            }
        }
    }

    pub fn sample(&self, rng: &mut Stream) -> f64 {
        match *self {
            SiteLaw::Fixed { p } => p,
            SiteLaw::TwoPoint { p1, p2, q } => {
                if rng.random::<f64>() < q {
                    p1
                } else {
                    p2
                }
            }
            SiteLaw::Uniform { a, b } => a + (b - a) * rng.random::<f64>(),
            SiteLaw::Beta { alpha, beta, eps } => {
                let d = Beta::new(alpha, beta).expect("validated parameters");
                loop {
                    let p = d.sample(rng);
                    if p > eps && p < 1.0 - eps {
                        return p;
                    }
                }
            }
        }
    }

    /// True when every site carries the same value.
    pub fn is_deterministic(&self) -> bool {
        match *self {
            SiteLaw::Fixed { .. } => true,
            SiteLaw::TwoPoint { p1, p2, q } => p1 == p2 || q == 0.0 || q == 1.0,
            _ => false,
        }
    }
}

/// A quenched one-dimensional environment. Sites are drawn on first access,
/// growing outward from the origin, so a nearest-neighbor walk sees them in
/// first-visit order.
#[derive(Debug, Clone)]
pub struct Environment1d {
    law: SiteLaw,
    seed: SeedSpec,
    rng: Stream,
    /// Sites `0, 1, 2, ...`.
    right: Vec<f64>,
    /// Sites `-1, -2, ...`.
    left: Vec<f64>,
}

impl Environment1d {
    pub fn new(law: SiteLaw, seed: SeedSpec) -> Result<Self> {
        law.validate()?;
        Ok(Self {
            law,
            seed,
            rng: seed.stream(),
            right: Vec::new(),
            left: Vec::new(),
        })
    }

    pub fn seed(&self) -> SeedSpec {
        self.seed
    }

    pub fn law(&self) -> &SiteLaw {
        &self.law
    }

    /// Right-jump probability at site `x`.
    #[inline]
    pub fn get(&mut self, x: i64) -> Result<f64> {
        if x >= 0 {
            let i = x as usize;
            while self.right.len() <= i {
                let p = self.law.sample(&mut self.rng);
                self.right.push(p);
            }
            Ok(self.right[i])
        } else {
            if x < LEFT_GUARD {
                return Err(Error::ResourceLimit(format!(
                    "walk reached site {x}, beyond the left guard {LEFT_GUARD}"
                )));
            }
            let i = (-x - 1) as usize;
            while self.left.len() <= i {
                let p = self.law.sample(&mut self.rng);
                self.left.push(p);
            }
            Ok(self.left[i])
        }
    }

    /// `rho_x = (1 - omega_x(1)) / omega_x(1)`.
    pub fn rho(&mut self, x: i64) -> Result<f64> {
        let p = self.get(x)?;
        Ok((1.0 - p) / p)
    }

    pub fn n_realized(&self) -> usize {
        self.right.len() + self.left.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn validation() {
        assert!(SiteLaw::Fixed { p: 1.0 }.validate().is_ok());
        assert!(SiteLaw::Fixed { p: 0.0 }.validate().is_err());
        assert!(SiteLaw::Uniform { a: 0.6, b: 0.4 }.validate().is_err());
        assert!(SiteLaw::TwoPoint {
            p1: 1.0,
            p2: 0.5,
            q: 0.5
        }
        .validate()
        .is_err());
        assert!(SiteLaw::Beta {
            alpha: 2.0,
            beta: 1.0,
            eps: 1e-6
        }
        .validate()
        .is_ok());
    }

    #[test]
    fn beta_samples_respect_truncation() {
        let law = SiteLaw::Beta {
            alpha: 0.05,
            beta: 0.05,
            eps: 1e-3,
        };
        let mut rng = SeedSpec::new(4, 0).stream();
        for _ in 0..2000 {
            let p = law.sample(&mut rng);
            assert!(p > 1e-3 && p < 1.0 - 1e-3);
        }
    }

    #[test]
    fn deserializes_tagged() {
        let law: SiteLaw =
            serde_json::from_str(r#"{"kind":"beta","alpha":2.0,"beta":3.0}"#).unwrap();
        assert_eq!(
            law,
            SiteLaw::Beta {
                alpha: 2.0,
                beta: 3.0,
                eps: 1e-6
            }
        );
    }

    #[test]
    fn guard_is_enforced() {
        let mut env = Environment1d::new(SiteLaw::Fixed { p: 0.5 }, SeedSpec::new(0, 0)).unwrap();
        assert!(env.get(LEFT_GUARD - 1).is_err());
        assert_eq!(env.get(-3).unwrap(), 0.5);
    }

    proptest! {
        #[test]
        fn sites_are_stable(seed in any::<u64>(), xs in proptest::collection::vec(-50i64..50, 1..40)) {
            let law = SiteLaw::Uniform { a: 0.2, b: 0.9 };
            let mut env = Environment1d::new(law, SeedSpec::new(seed, 0)).unwrap();
            let first: Vec<f64> = xs.iter().map(|&x| env.get(x).unwrap()).collect();
            let again: Vec<f64> = xs.iter().map(|&x| env.get(x).unwrap()).collect();
            prop_assert_eq!(&first, &again);
            for p in first {
                prop_assert!(p > 0.2 && p < 0.9);
            }
        }
    }
}
