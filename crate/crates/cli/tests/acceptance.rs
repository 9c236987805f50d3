//! Acceptance suite: one line per criterion, then a single verdict.

mod common;

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use regen_core::gaussian::{psi_kernel, CovarianceMatrix2};
use regen_core::llt::{
    convolve_n, semilocal_discrepancy, weighted_llt_discrepancy, LatticeJointLaw,
};
use regen_core::mixing::{alpha_exact, thm22_exponent};
use regen_core::models::{Environment1d, FiniteMarkovChain, SiteLaw, WalkLimits};
use regen_core::rates::{fit_rate, rate_sweep, DistanceMode, RateOptions};
use regen_core::rwre::{classify, delta_recommendation, simulate_position, simulate_t1, RhoLaw};
use regen_core::{estimate, harvest, phi_cdf, BlockSample, HarvestPlan, ModelSpec, SeedSpec};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rademacher() -> ModelSpec {
    ModelSpec::Iid {
        values: vec![-1.0, 1.0],
        probs: vec![0.5, 0.5],
    }
}

fn rademacher_estimates() -> regen_core::BlockEstimates {
    let b = |s: f64| BlockSample {
        length: 1,
        sum: s,
        abs_sum: 1.0,
    };
    estimate(&[b(1.0), b(-1.0)], 1.0).unwrap()
}

fn classical_berry_esseen() -> Outcome {
    let ns: Vec<u64> = (4..=14).map(|k| 1u64 << k).collect();
    let opts = RateOptions::new(DistanceMode::Exact, 0);
    let series = rate_sweep(&rademacher(), &rademacher_estimates(), &ns, &opts, 1.0)
        .map_err(|e| e.to_string())?;
    for p in &series.points {
        let want = common::rademacher_distance(p.n, phi_cdf);
        check((p.distance - want).abs() < 1e-12, || {
            format!(
                "n = {}: engine {} vs binomial oracle {want}",
                p.n, p.distance
            )
        })?;
    }
    let fit = fit_rate(&series).map_err(|e| e.to_string())?;
    check((fit.slope + 0.5).abs() <= 0.05 && fit.r2 >= 0.99, || {
        format!("slope {} r2 {}", fit.slope, fit.r2)
    })?;
    Ok(format!("slope {:.4}, r2 {:.5}", fit.slope, fit.r2))
}

fn block_estimation_oracle() -> Outcome {
    let chain = FiniteMarkovChain::two_state(0.3, 0.5, [0.0, 1.0], 0).unwrap();
    let (law, tail) = common::excursion_law(&[vec![0.7, 0.3], vec![0.5, 0.5]], &[0, 1], 0, 60);
    check(tail < 1e-14, || format!("oracle tail mass {tail}"))?;
    let (_, _, sigma2) = common::block_moments(&law);
    let plan = HarvestPlan {
        n_blocks: 100_000,
        n_streams: 8,
        delta: 1.0,
        include_first_block: false,
    };
    let h = harvest(&ModelSpec::Markov(chain), &plan, 2024).map_err(|e| e.to_string())?;
    let est = estimate(&h.samples(), 1.0).map_err(|e| e.to_string())?;
    let zmu = (est.mu_hat - 0.375) / est.mu_se;
    let ztau = (est.tau_bar - 1.6) / est.tau_bar_se;
    let rel = (est.sigma2_hat - sigma2).abs() / sigma2;
    check(zmu.abs() <= 3.0 && ztau.abs() <= 3.0 && rel <= 0.05, || {
        format!("z(mu) {zmu:.2}, z(tau) {ztau:.2}, sigma2 rel err {rel:.4}")
    })?;
    Ok(format!(
        "z(mu) {zmu:.2}, z(tau) {ztau:.2}, sigma2 {:.5} vs oracle {sigma2:.7}",
        est.sigma2_hat
    ))
}

fn bernoulli_pair() -> LatticeJointLaw {
    LatticeJointLaw::from_table(&[
        (0.0, 0.0, 0.25),
        (0.0, 1.0, 0.25),
        (1.0, 0.0, 0.25),
        (1.0, 1.0, 0.25),
    ])
    .unwrap()
}

const LLT_NS: [u64; 4] = [16, 64, 256, 1024];

fn ratio(xs: &[f64]) -> f64 {
    let max = xs.iter().cloned().fold(f64::MIN, f64::max);
    let min = xs.iter().cloned().fold(f64::MAX, f64::min);
    max / min
}

fn semilocal_bounded() -> Outcome {
    let law = bernoulli_pair();
    for n in 1..=12u32 {
        let brute = common::brute_force_pairs([0.25; 4], n);
        let pmf = convolve_n(&law, n as u64).map_err(|e| e.to_string())?;
        for a in 0..=n as usize {
            for b in 0..=n as usize {
                check((pmf.get(a, b) - brute[a][b]).abs() <= 1e-12, || {
                    format!("n = {n}: pmf mismatch at ({a}, {b})")
                })?;
            }
        }
        let engine = semilocal_discrepancy(&law, n as u64, &[]).map_err(|e| e.to_string())?;
        let oracle = common::bernoulli_semilocal(&brute, n as u64, phi_cdf, 200);
        check(
            (engine.sup_weighted_semilocal - oracle).abs() <= 1e-12,
            || {
                format!(
                    "n = {n}: sup {} vs brute force {oracle}",
                    engine.sup_weighted_semilocal
                )
            },
        )?;
    }
    let sups: Vec<f64> = LLT_NS
        .iter()
        .map(|&n| semilocal_discrepancy(&law, n, &[]).map(|r| r.sup_weighted_semilocal))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let scaled: Vec<f64> = LLT_NS
        .iter()
        .zip(&sups)
        .map(|(&n, s)| n as f64 * s)
        .collect();
    check(sups.windows(2).all(|w| w[1] < w[0]), || {
        format!("sups not decreasing: {sups:?}")
    })?;
    check(ratio(&scaled) <= 10.0, || format!("n * sup = {scaled:?}"))?;
    Ok(format!(
        "n * sup = {scaled:.4?}, ratio {:.3}",
        ratio(&scaled)
    ))
}

fn weighted_llt_bounded() -> Outcome {
    let law = bernoulli_pair();
    let scaled: Vec<f64> = LLT_NS
        .iter()
        .map(|&n| weighted_llt_discrepancy(&law, n).map(|p| n as f64 * p.sup))
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    check(ratio(&scaled) <= 10.0, || format!("n * sup = {scaled:?}"))?;
    Ok(format!(
        "n * sup = {scaled:.5?}, ratio {:.3}",
        ratio(&scaled)
    ))
}

fn psi_against_quadrature() -> Outcome {
    let mats = [(1.0, 0.0, 1.0), (4.0, 0.0, 1.0), (2.0, 0.9, 1.0)];
    let mut worst = 0.0f64;
    for &(s11, s12, s22) in &mats {
        let a = CovarianceMatrix2::new(s11, s12, s22).unwrap();
        for i in 0..21 {
            for j in 0..21 {
                let x = -5.0 + 0.5 * i as f64;
                let y = -5.0 + 0.5 * j as f64;
                let quad = common::simpson(
                    |t| common::bivariate_density(s11, s12, s22, t, y),
                    -40.0,
                    x,
                    20_000,
                );
                let closed = psi_kernel(&a, x, y).unwrap();
                worst = worst.max((closed - quad).abs());
            }
        }
        let alpha = s11.sqrt();
        for x in [-2.0, 0.0, 1.5] {
            let half = 12.0 * s22.sqrt();
            let m = 24_000;
            let h = 2.0 * half / m as f64;
            let integral: f64 = (0..=m)
                .map(|k| {
                    let y = -half + k as f64 * h;
                    let w = if k == 0 || k == m { 0.5 } else { 1.0 };
                    w * psi_kernel(&a, alpha * x, y).unwrap()
                })
                .sum::<f64>()
                * h;
            check((integral - phi_cdf(x)).abs() <= 1e-8, || {
                format!(
                    "A = ({s11}, {s12}, {s22}), x = {x}: {integral} vs {}",
                    phi_cdf(x)
                )
            })?;
        }
    }
    check(worst <= 1e-9, || format!("max deviation {worst:e}"))?;
    Ok(format!("max |closed form - quadrature| = {worst:.2e}"))
}

fn rwre_analytics() -> Outcome {
    let mut residuals = Vec::new();
    for (r1, r2) in [(2.0f64, 0.25f64), (1.25, 0.5)] {
        let law = RhoLaw::discrete(vec![(r1, 0.5), (r2, 0.5)]).unwrap();
        let k = classify(&law).map_err(|e| e.to_string())?.kappa;
        let res = (0.5 * (r1.powf(k) + r2.powf(k)) - 1.0).abs();
        check(res <= 1e-12, || {
            format!("rho in {{{r1}, {r2}}}: residual {res:e}")
        })?;
        residuals.push(res);
    }
    let homogeneous = SiteLaw::Fixed { p: 0.75 };
    let n = 1u64 << 16;
    let mut speeds = Vec::with_capacity(1000);
    for i in 0..1000 {
        let mut env = Environment1d::new(homogeneous.clone(), SeedSpec::new(1, i)).unwrap();
        let mut rng = SeedSpec::new(2, i).stream();
        speeds.push(simulate_position(&mut env, &mut rng, n).unwrap() as f64 / n as f64);
    }
    let (v, v_se) = mean_se(&speeds);
    let mut env = Environment1d::new(homogeneous, SeedSpec::new(3, 0)).unwrap();
    let mut rng = SeedSpec::new(4, 0).stream();
    let t1: Vec<f64> = (0..100_000)
        .map(|_| simulate_t1(&mut env, &mut rng).unwrap() as f64)
        .collect();
    let (t, t_se) = mean_se(&t1);
    check(
        (v - 0.5).abs() <= 4.0 * v_se && (t - 2.0).abs() <= 4.0 * t_se,
        || format!("speed {v} +- {v_se}, E[T1] {t} +- {t_se}"),
    )?;
    Ok(format!(
        "residuals {:.1e} {:.1e}, speed z {:.2}, E[T1] z {:.2}",
        residuals[0],
        residuals[1],
        (v - 0.5) / v_se,
        (t - 2.0) / t_se
    ))
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let m = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / m;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, (var / m).sqrt())
}

fn hitting_time_rates() -> Outcome {
    // rho = (1 - p) / p in {5/4, 1/2}
    let law = SiteLaw::TwoPoint {
        p1: 4.0 / 9.0,
        p2: 2.0 / 3.0,
        q: 0.5,
    };
    let verdict = classify(&RhoLaw::from_site_law(&law).unwrap()).map_err(|e| e.to_string())?;
    let delta = delta_recommendation(&verdict).ok_or("no delta recommendation")?;
    let model = ModelSpec::Rwre1dHitting {
        law,
        limits: WalkLimits {
            horizon: 1 << 22,
            confirmation: 512,
        },
    };
    let plan = HarvestPlan {
        n_blocks: 200_000,
        n_streams: 8,
        delta,
        include_first_block: false,
    };
    let h = harvest(&model, &plan, 77).map_err(|e| e.to_string())?;
    let est = estimate(&h.samples(), delta).map_err(|e| e.to_string())?;
    let opts = RateOptions::new(DistanceMode::MonteCarlo { n_paths: 100_000 }, 78);
    let series =
        rate_sweep(&model, &est, &[256, 1024, 4096], &opts, delta).map_err(|e| e.to_string())?;
    let stats: Vec<f64> = series
        .points
        .iter()
        .map(|p| (p.n as f64).powf(delta / 2.0) * (p.distance - p.dkw_bound))
        .collect();
    check(
        stats.iter().all(|&s| s > 0.0) && ratio(&stats) <= 10.0,
        || format!("n^(delta/2) (d - dkw) = {stats:?}"),
    )?;
    let ds: Vec<f64> = series.points.iter().map(|p| p.distance).collect();
    Ok(format!(
        "kappa {:.4}, delta {delta:.4}, distances {ds:.4?}, statistic {stats:.3?}, ratio {:.3}",
        verdict.kappa,
        ratio(&stats)
    ))
}

fn mixing_coefficients() -> Outcome {
    let chain = FiniteMarkovChain::two_state(0.3, 0.5, [0.0, 1.0], 0).unwrap();
    for n in 1..=5 {
        let r = alpha_exact(&chain, n + 1).unwrap() / alpha_exact(&chain, n).unwrap();
        check((r - 0.2).abs() <= 1e-12, || {
            format!("alpha({})/alpha({n}) = {r}", n + 1)
        })?;
    }
    let e = thm22_exponent(4.0, 3.0).ok_or("no exponent")?.exponent;
    check(e == 0.25, || format!("exponent {e}"))?;
    Ok("alpha ratios 0.2, exponent(4, 3) = 0.25".into())
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

const REPRO_CONFIG: &str = r#"
master_seed = 5

[model]
kind = "markov"
transition = [[0.7, 0.3], [0.5, 0.5]]
f = [0.0, 1.0]
anchor = 0
initial = [1.0, 0.0]

[plan]
n_blocks = 5000
n_streams = 4
delta = 1.0

[sweep]
ns = [8, 16, 32]
mode = "monte_carlo"
n_paths = 3000

[llt]
table = [[0.0, 0.0, 0.25], [0.0, 1.0, 0.25], [1.0, 0.0, 0.25], [1.0, 1.0, 0.25]]
ns = [4, 16]

[mixing]
n_max = 8
p = 4.0

[mixing.chain]
transition = [[0.7, 0.3], [0.5, 0.5]]
f = [0.0, 1.0]
anchor = 0
initial = [1.0, 0.0]

[rwre.law]
kind = "two_point"
p1 = 0.7
p2 = 0.8
q = 0.5

[rwre.sigma0]
n_envs = 20
truncation = 10000
replicas = 50
"#;

fn reproducibility() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("exp.toml");
    fs::write(&cfg, REPRO_CONFIG).unwrap();
    let mut checked = 0;
    for cmd in ["simulate", "rates", "llt", "mixing", "rwre"] {
        let runs: Vec<_> = [("a", "1"), ("b", "2")]
            .iter()
            .map(|(tag, threads)| {
                let out = tmp.path().join(format!("{cmd}-{tag}"));
                let o = common::run(cmd, &cfg, &out, &["--threads", threads]);
                (o, out)
            })
            .collect();
        for (o, _) in &runs {
            check(o.status.success(), || {
                format!("{cmd}: {}", String::from_utf8_lossy(&o.stderr))
            })?;
        }
        let (a, b) = (dir_bytes(&runs[0].1), dir_bytes(&runs[1].1));
        check(!a.is_empty() && a == b, || format!("{cmd}: outputs differ"))?;
        checked += a.len();
    }
    Ok(format!("{checked} artifacts byte-identical across reruns"))
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome, Duration); 9] = [
        (
            "1 classical Berry-Esseen",
            classical_berry_esseen,
            Duration::from_secs(10),
        ),
        (
            "2 block estimation oracle",
            block_estimation_oracle,
            Duration::from_secs(30),
        ),
        (
            "3 semi-local LLT bounded",
            semilocal_bounded,
            Duration::from_secs(120),
        ),
        (
            "4 weighted LLT bounded",
            weighted_llt_bounded,
            Duration::from_secs(120),
        ),
        (
            "5 psi closed form",
            psi_against_quadrature,
            Duration::from_secs(5),
        ),
        ("6 RWRE analytics", rwre_analytics, Duration::from_secs(60)),
        (
            "7 hitting-time rates",
            hitting_time_rates,
            Duration::from_secs(600),
        ),
        (
            "8 mixing coefficients",
            mixing_coefficients,
            Duration::from_secs(1),
        ),
        (
            "9 reproducibility",
            reproducibility,
            Duration::from_secs(60),
        ),
    ];
    let mut failed = Vec::new();
    for (name, f, limit) in criteria {
        let start = Instant::now();
        let outcome = f();
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(msg) if elapsed > limit => {
                Err(format!("{msg}; took {elapsed:.1?}, limit {limit:?}"))
            }
            o => o,
        };
        match outcome {
            Ok(msg) => println!("[PASS] {name} ({elapsed:.1?}): {msg}"),
            Err(msg) => {
                println!("[FAIL] {name} ({elapsed:.1?}): {msg}");
                failed.push(name);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
