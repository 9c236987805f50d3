//! Analytics for one-dimensional random walks in i.i.d. random environments:
//! transience and ballisticity, the exponent `kappa` solving
//! `E[rho^kappa] = 1`, the speed, quenched mean hitting times and the
//! hitting-time CLT variance.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::models::{Environment1d, SiteLaw};
use crate::quad::integrate;
use crate::rng::{domain, SeedSpec, Stream};

const QUAD_TOL: f64 = 1e-12;

/// Law of `rho = omega_0(-1) / omega_0(1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RhoLaw {
    /// Atoms `(rho, prob)`. `rho = 0` encodes a site that always steps right.
    Discrete(Vec<(f64, f64)>),
    /// A continuous site law, integrated through `p -> (1 - p) / p`.
    Continuous(SiteLaw),
}

impl RhoLaw {
    pub fn discrete(atoms: Vec<(f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::EmptyInput);
        }
        if atoms
            .iter()
            .any(|&(r, p)| !(r >= 0.0) || !r.is_finite() || !(p >= 0.0))
        {
            return invalid("rho atoms need finite rho >= 0 and non-negative mass");
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if (total - 1.0).abs() > 1e-12 {
            return invalid(format!("rho pmf sums to {total}"));
        }
        Ok(RhoLaw::Discrete(atoms))
    }

    pub fn from_site_law(law: &SiteLaw) -> Result<Self> {
        law.validate()?;
        let rho = |p: f64| (1.0 - p) / p;
        match *law {
            SiteLaw::Fixed { p } => Self::discrete(vec![(rho(p), 1.0)]),
            SiteLaw::TwoPoint { p1, p2, q } => {
                Self::discrete(vec![(rho(p1), q), (rho(p2), 1.0 - q)])
            }
            SiteLaw::Uniform { .. } | SiteLaw::Beta { .. } => Ok(RhoLaw::Continuous(law.clone())),
        }
    }

    /// `E[g(rho)]`.
    pub fn expect(&self, g: impl Fn(f64) -> f64) -> Result<f64> {
        match self {
            RhoLaw::Discrete(atoms) => Ok(atoms
                .iter()
                .filter(|a| a.1 > 0.0)
                .map(|&(r, p)| p * g(r))
                .sum()),
            RhoLaw::Continuous(law) => {
                let (lo, hi, density): (f64, f64, Box<dyn Fn(f64) -> f64>) = match *law {
                    SiteLaw::Uniform { a, b } => (a, b, Box::new(move |_| 1.0 / (b - a))),
                    SiteLaw::Beta { alpha, beta, eps } => {
                        let kernel = move |p: f64| p.powf(alpha - 1.0) * (1.0 - p).powf(beta - 1.0);
                        let z = integrate_scaled(kernel, eps, 1.0 - eps)?;
                        (eps, 1.0 - eps, Box::new(move |p| kernel(p) / z))
                    }
                    _ => unreachable!("discrete site laws map to RhoLaw::Discrete"),
                };
                integrate_scaled(|p| density(p) * g((1.0 - p) / p), lo, hi)
            }
        }
    }

    pub fn e_rho(&self) -> Result<f64> {
        self.expect(|r| r)
    }

    pub fn e_log_rho(&self) -> Result<f64> {
        self.expect(f64::ln)
    }

    /// `E[rho^k] - 1`.
    fn g(&self, k: f64) -> Result<f64> {
        Ok(self.expect(|r| r.powf(k))? - 1.0)
    }

    fn mass_above_one(&self) -> bool {
        match self {
            RhoLaw::Discrete(atoms) => atoms.iter().any(|&(r, p)| r > 1.0 && p > 0.0),
            // rho > 1 iff p < 1/2
            RhoLaw::Continuous(SiteLaw::Uniform { a, .. }) => *a < 0.5,
            RhoLaw::Continuous(SiteLaw::Beta { eps, .. }) => *eps < 0.5,
            RhoLaw::Continuous(_) => true,
        }
    }

    /// `(1 - E[rho]) / (1 + E[rho])` when `E[rho] < 1`, else 0.
    pub fn speed(&self) -> Result<f64> {
        let m = self.e_rho()?;
        Ok(if m < 1.0 { (1.0 - m) / (1.0 + m) } else { 0.0 })
    }
}

/// Integrates to absolute tolerance `QUAD_TOL`, relaxed to relative when
/// the integral is large.
fn integrate_scaled(f: impl Fn(f64) -> f64, a: f64, b: f64) -> Result<f64> {
    let rough = integrate(&f, a, b, 1e-6)?;
    integrate(&f, a, b, QUAD_TOL * rough.abs().max(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaVerdict {
    /// `+inf` when `rho <= 1` almost surely.
    #[serde(with = "crate::types::ext_f64")]
    pub kappa: f64,
    #[serde(with = "crate::types::ext_f64")]
    pub e_log_rho: f64,
    pub e_rho: f64,
    pub transient_right: bool,
    pub ballistic: bool,
    pub clt_regime: bool,
}

/// Transience, ballisticity and `kappa`. Fails with `NotTransient` unless
/// `E[log rho] < 0`.
pub fn classify(law: &RhoLaw) -> Result<KappaVerdict> {
    let e_log_rho = law.e_log_rho()?;
    let e_rho = law.e_rho()?;
    if !(e_log_rho < 0.0) {
        return Err(Error::NotTransient { e_log_rho, e_rho });
    }
    let kappa = if law.mass_above_one() {
        solve_kappa(law)?
    } else {
        f64::INFINITY
    };
    Ok(KappaVerdict {
        kappa,
        e_log_rho,
        e_rho,
        transient_right: true,
        ballistic: e_rho < 1.0,
        clt_regime: kappa > 2.0,
    })
}

/// Root of the convex `g(k) = E[rho^k] - 1` past 0: doubling scan for a
/// positive value, then bisection down to adjacent floats.
fn solve_kappa(law: &RhoLaw) -> Result<f64> {
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut g_hi = law.g(hi)?;
    while g_hi <= 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::Quadrature(
                "no sign change of E[rho^k] - 1 below k = 1e6".into(),
            ));
        }
        g_hi = law.g(hi)?;
    }
    let mut g_lo = if lo == 0.0 { 0.0 } else { law.g(lo)? };
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let g_mid = law.g(mid)?;
        if g_mid > 0.0 {
            hi = mid;
            g_hi = g_mid;
        } else {
            lo = mid;
            g_lo = g_mid;
        }
    }
    // g(0) = 0 is the trivial root, never the answer
    if lo == 0.0 || g_hi.abs() <= g_lo.abs() {
        Ok(hi)
    } else {
        Ok(lo)
    }
}

/// Moment finiteness of hitting and regeneration times at order `gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentVerdict {
    Finite,
    Infinite,
    /// `gamma = kappa < 1`, which the moment criterion leaves open.
    Boundary,
}

pub fn moment_verdict(verdict: &KappaVerdict, gamma: f64) -> MomentVerdict {
    if gamma < verdict.kappa {
        MomentVerdict::Finite
    } else if gamma > verdict.kappa || gamma >= 1.0 {
        MomentVerdict::Infinite
    } else {
        MomentVerdict::Boundary
    }
}

/// Safety margin applied below the admissible upper end for `delta`.
pub const DELTA_MARGIN: f64 = 0.05;

/// Largest usable rate parameter for the hitting-time and position CLTs:
/// 1 when `kappa > 3`, else `(kappa - 2)` shrunk by [`DELTA_MARGIN`].
pub fn delta_recommendation(verdict: &KappaVerdict) -> Option<f64> {
    if !verdict.clt_regime {
        return None;
    }
    if verdict.kappa > 3.0 {
        Some(1.0)
    } else {
        Some((verdict.kappa - 2.0).min(1.0) * (1.0 - DELTA_MARGIN))
    }
}

/// Truncated series for `E_omega[T_1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuenchedMean {
    pub value: f64,
    /// Last series term included, as a truncation-error proxy.
    pub last_term: f64,
}

/// `E_omega[T_1] = 1 + 2 sum_{k>=1} prod_{x=-k+1}^{0} rho_x`, summed to
/// `truncation` terms.
pub fn quenched_t1_mean(env: &mut Environment1d, truncation: usize) -> Result<QuenchedMean> {
    if truncation == 0 {
        return invalid("truncation must be at least 1");
    }
    let mut prod = 1.0;
    let mut sum = 0.0;
    let mut last = 0.0;
    for k in 1..=truncation as i64 {
        prod *= env.rho(1 - k)?;
        sum += prod;
        last = prod;
        if prod == 0.0 {
            break;
        }
    }
    if !sum.is_finite() || last > 1e-10 * sum {
        return Err(Error::TruncationUnreliable {
            last_term: last,
            partial_sum: sum,
        });
    }
    Ok(QuenchedMean {
        value: 1.0 + 2.0 * sum,
        last_term: last,
    })
}

/// Steps a walk in `env` from the origin until it first reaches site 1.
pub fn simulate_t1(env: &mut Environment1d, rng: &mut Stream) -> Result<u64> {
    let mut x = 0i64;
    let mut t = 0u64;
    while x < 1 {
        let p = env.get(x)?;
        x += if rng.random::<f64>() < p { 1 } else { -1 };
        t += 1;
    }
    Ok(t)
}

/// Position after `n` steps from the origin of `env`.
pub fn simulate_position(env: &mut Environment1d, rng: &mut Stream, n: u64) -> Result<i64> {
    let mut x = 0i64;
    for _ in 0..n {
        let p = env.get(x)?;
        x += if rng.random::<f64>() < p { 1 } else { -1 };
    }
    Ok(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sigma0Estimate {
    pub value: f64,
    pub se: f64,
    /// Average over environments of the simulated quenched variance of `T_1`.
    pub mean_quenched_var: f64,
    /// Variance across environments of `E_omega[T_1]`.
    pub var_quenched_mean: f64,
}

/// Settings for [`sigma0_sq`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sigma0Plan {
    pub n_envs: usize,
    pub truncation: usize,
    /// Simulated `T_1` per environment.
    pub replicas: usize,
}

/// Monte Carlo estimate of `E[Var_omega(T_1)] + Var(E_omega[T_1]) / v_P`
/// with a leave-one-environment-out jackknife standard error.
pub fn sigma0_sq(law: &SiteLaw, master_seed: u64, plan: Sigma0Plan) -> Result<Sigma0Estimate> {
    if plan.n_envs < 2 || plan.replicas < 2 {
        return invalid("sigma0_sq needs at least 2 environments and 2 replicas");
    }
    let v = RhoLaw::from_site_law(law)?.speed()?;
    if !(v > 0.0) {
        return invalid("sigma0_sq needs a ballistic environment law");
    }
    let per_env: Vec<(f64, f64)> = (0..plan.n_envs as u64)
        .into_par_iter()
        .map(|i| {
            let mut env = Environment1d::new(
                law.clone(),
                SeedSpec::for_domain(master_seed, domain::ENVIRONMENTS, i),
            )?;
            let mean = quenched_t1_mean(&mut env, plan.truncation)?.value;
            let mut rng = SeedSpec::for_domain(master_seed, domain::QUENCHED_WALKS, i).stream();
            let mut s = 0.0;
            let mut s2 = 0.0;
            for _ in 0..plan.replicas {
                let t = simulate_t1(&mut env, &mut rng)? as f64;
                s += t;
                s2 += t * t;
            }
            let r = plan.replicas as f64;
            let var = (s2 - s * s / r) / (r - 1.0);
            Ok((mean, var.max(0.0)))
        })
        .collect::<Result<_>>()?;
    let combine = |rows: &mut dyn Iterator<Item = &(f64, f64)>| -> (f64, f64, f64) {
        let rows: Vec<&(f64, f64)> = rows.collect();
        let n = rows.len() as f64;
        // shifted so that a deterministic environment gives exactly zero
        let x0 = rows[0].0;
        let m = rows.iter().map(|r| r.0 - x0).sum::<f64>() / n;
        let var_mean = rows.iter().map(|r| (r.0 - x0 - m).powi(2)).sum::<f64>() / (n - 1.0);
        let mean_var = rows.iter().map(|r| r.1).sum::<f64>() / n;
        (mean_var + var_mean / v, mean_var, var_mean)
    };
    let (value, mean_quenched_var, var_quenched_mean) = combine(&mut per_env.iter());
    let n = per_env.len();
    let se = if n > 2 {
        let loo: Vec<f64> = (0..n)
            .map(|j| {
                combine(
                    &mut per_env
                        .iter()
                        .enumerate()
                        .filter(|(i, _)| *i != j)
                        .map(|(_, r)| r),
                )
                .0
            })
            .collect();
        let mbar = loo.iter().sum::<f64>() / n as f64;
        ((n as f64 - 1.0) / n as f64 * loo.iter().map(|x| (x - mbar).powi(2)).sum::<f64>()).sqrt()
    } else {
        f64::NAN
    };
    Ok(Sigma0Estimate {
        value,
        se,
        mean_quenched_var,
        var_quenched_mean,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_point(a: f64, b: f64) -> RhoLaw {
        RhoLaw::discrete(vec![(a, 0.5), (b, 0.5)]).unwrap()
    }

    #[test]
    fn deterministic_third() {
        let v = classify(&RhoLaw::discrete(vec![(1.0 / 3.0, 1.0)]).unwrap()).unwrap();
        assert!(v.kappa.is_infinite() && v.ballistic && v.transient_right && v.clt_regime);
    }

    #[test]
    fn kappa_roots() {
        let law = two_point(2.0, 0.25);
        let v = classify(&law).unwrap();
        // 2^k + 4^-k = 2 reduces to a^2 - a - 1 = 0 in a = 2^k
        let golden = (1.0 + 5f64.sqrt()) / 2.0;
        assert!((v.kappa - golden.log2()).abs() < 1e-13, "{}", v.kappa);
        assert!(law.g(v.kappa).unwrap().abs() <= 1e-12);
        let law = two_point(1.25, 0.5);
        let v = classify(&law).unwrap();
        assert!(v.kappa > 2.75 && v.kappa < 2.8);
        assert!(law.g(v.kappa).unwrap().abs() <= 1e-12);
        assert!(v.clt_regime);
    }

    #[test]
    fn recurrent_is_rejected() {
        assert!(matches!(
            classify(&two_point(2.0, 0.5)),
            Err(Error::NotTransient { .. })
        ));
    }

    #[test]
    fn speeds() {
        let v = RhoLaw::from_site_law(&SiteLaw::Fixed { p: 0.75 })
            .unwrap()
            .speed()
            .unwrap();
        assert!((v - 0.5).abs() < 1e-15);
        let law = RhoLaw::from_site_law(&SiteLaw::TwoPoint {
            p1: 0.7,
            p2: 0.8,
            q: 0.5,
        })
        .unwrap();
        assert!((law.e_rho().unwrap() - 0.339_285_714_285_714_3).abs() < 1e-15);
        assert!((law.speed().unwrap() - 37.0 / 75.0).abs() < 1e-15);
        let near = RhoLaw::discrete(vec![(1.0 - 1e-15, 1.0)]).unwrap();
        assert!(near.speed().unwrap() < 1e-15);
    }

    #[test]
    fn uniform_law_quadrature() {
        // E[(1-p)/p] for p ~ U(a, b) is (ln(b/a) - (b - a)) / (b - a)
        let (a, b) = (0.4, 0.9);
        let law = RhoLaw::from_site_law(&SiteLaw::Uniform { a, b }).unwrap();
        let exact = ((b / a).ln() - (b - a)) / (b - a);
        assert!((law.e_rho().unwrap() - exact).abs() < 1e-12);
        let v = classify(&law).unwrap();
        assert!(law.g(v.kappa).unwrap().abs() < 1e-10);
    }

    #[test]
    fn verdicts_and_delta() {
        let mk = |kappa: f64| KappaVerdict {
            kappa,
            e_log_rho: -1.0,
            e_rho: 0.5,
            transient_right: true,
            ballistic: true,
            clt_regime: kappa > 2.0,
        };
        assert_eq!(moment_verdict(&mk(2.77), 2.5), MomentVerdict::Finite);
        assert_eq!(moment_verdict(&mk(2.77), 3.0), MomentVerdict::Infinite);
        assert_eq!(
            moment_verdict(&mk(f64::INFINITY), 50.0),
            MomentVerdict::Finite
        );
        assert_eq!(moment_verdict(&mk(0.5), 0.5), MomentVerdict::Boundary);
        assert_eq!(moment_verdict(&mk(1.5), 1.5), MomentVerdict::Infinite);
        assert_eq!(delta_recommendation(&mk(3.5)), Some(1.0));
        assert!((delta_recommendation(&mk(2.5)).unwrap() - 0.475).abs() < 1e-15);
        assert_eq!(delta_recommendation(&mk(2.0)), None);
    }

    #[test]
    fn quenched_means() {
        for (p, expect) in [(0.75, 2.0), (1.0, 1.0), (0.6, 5.0)] {
            let mut env = Environment1d::new(SiteLaw::Fixed { p }, SeedSpec::new(0, 0)).unwrap();
            let m = quenched_t1_mean(&mut env, 200).unwrap();
            assert!((m.value - expect).abs() < 1e-9, "p = {p}: {}", m.value);
        }
        let mut env = Environment1d::new(SiteLaw::Fixed { p: 0.6 }, SeedSpec::new(0, 0)).unwrap();
        assert!(matches!(
            quenched_t1_mean(&mut env, 10),
            Err(Error::TruncationUnreliable { .. })
        ));
    }

    #[test]
    fn sigma0_deterministic_walk() {
        let plan = Sigma0Plan {
            n_envs: 4,
            truncation: 10,
            replicas: 5,
        };
        let s = sigma0_sq(&SiteLaw::Fixed { p: 1.0 }, 1, plan).unwrap();
        assert_eq!(s.value, 0.0);
        let s = sigma0_sq(
            &SiteLaw::Fixed { p: 0.75 },
            1,
            Sigma0Plan {
                replicas: 50,
                truncation: 100,
                ..plan
            },
        )
        .unwrap();
        assert_eq!(s.var_quenched_mean, 0.0);
    }
}
