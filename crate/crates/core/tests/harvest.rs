mod common;

use regen_core::models::{FiniteMarkovChain, ProcessModel, SiteLaw, WalkLimits};
use regen_core::{estimate, harvest, HarvestPlan, ModelSpec};

fn plan(n_blocks: usize) -> HarvestPlan {
    HarvestPlan {
        n_blocks,
        n_streams: 4,
        delta: 1.0,
        include_first_block: false,
    }
}

fn three_state() -> (Vec<Vec<f64>>, Vec<i64>) {
    (
        vec![
            vec![0.2, 0.5, 0.3],
            vec![0.4, 0.4, 0.2],
            vec![0.6, 0.1, 0.3],
        ],
        vec![1, -2, 3],
    )
}

#[test]
fn exact_block_law_matches_enumeration() {
    let (p, f) = three_state();
    let fs: Vec<f64> = f.iter().map(|&x| x as f64).collect();
    let chain = FiniteMarkovChain::new(p.clone(), fs, 0, vec![1.0, 0.0, 0.0]).unwrap();
    let model = regen_core::models::MarkovAdditiveModel::new(chain).unwrap();
    let law = model.exact_block_law().unwrap();
    let (oracle, _) = common::excursion_law(&p, &f, 0, 200);
    let mut seen = 0.0;
    for a in &law.atoms {
        let want = oracle
            .get(&(a.length, a.sum as i64))
            .copied()
            .unwrap_or(0.0);
        assert!((a.prob - want).abs() < 1e-14, "{a:?} vs {want}");
        seen += want;
    }
    let total: f64 = oracle.values().sum();
    assert!(total - seen < 1e-13);
}

#[test]
fn estimates_near_oracle_moments() {
    let (p, f) = three_state();
    let fs: Vec<f64> = f.iter().map(|&x| x as f64).collect();
    let chain = FiniteMarkovChain::new(p.clone(), fs, 0, vec![1.0, 0.0, 0.0]).unwrap();
    let pi = chain.stationary();
    let (law, tail) = common::excursion_law(&p, &f, 0, 300);
    assert!(tail < 1e-14);
    let (tau, mu, sigma2) = common::block_moments(&law);
    // renewal identities
    assert!((tau - 1.0 / pi[0]).abs() < 1e-10);
    let pif: f64 = pi.iter().zip(&f).map(|(a, b)| a * *b as f64).sum();
    assert!((mu - pif).abs() < 1e-10);
    let h = harvest(&ModelSpec::Markov(chain), &plan(50_000), 8).unwrap();
    let est = estimate(&h.samples(), 1.0).unwrap();
    assert!((est.mu_hat - mu).abs() < 4.0 * est.mu_se);
    assert!((est.tau_bar - tau).abs() < 4.0 * est.tau_bar_se);
    assert!((est.sigma2_hat - sigma2).abs() < 4.0 * est.sigma2_se);
}

#[test]
fn first_block_follows_initial_law() {
    // from state 1 the first return to 0 takes Geometric(b) steps
    let chain = FiniteMarkovChain::new(
        vec![vec![0.7, 0.3], vec![0.5, 0.5]],
        vec![0.0, 1.0],
        0,
        vec![0.0, 1.0],
    )
    .unwrap();
    let spec = ModelSpec::Markov(chain);
    let mut lengths = Vec::new();
    for seed in 0..2000 {
        let p = HarvestPlan {
            include_first_block: true,
            n_blocks: 2,
            n_streams: 1,
            delta: 1.0,
        };
        let h = harvest(&spec, &p, seed).unwrap();
        lengths.push(h.first_block.unwrap().length as f64);
    }
    let (m, se) = common::mean_se(&lengths);
    assert!((m - 2.0).abs() < 4.0 * se, "{m} +- {se}");
}

fn walk(horizon: u64) -> ModelSpec {
    ModelSpec::Rwre1dPosition {
        law: SiteLaw::TwoPoint {
            p1: 0.55,
            p2: 0.8,
            q: 0.5,
        },
        limits: WalkLimits {
            horizon,
            confirmation: 64,
        },
    }
}

#[test]
fn censoring_shrinks_with_horizon() {
    let mut rates = Vec::new();
    for h in [1u64 << 9, 1 << 11, 1 << 13] {
        let out = harvest(&walk(h), &plan(20_000), 3).unwrap();
        rates.push(out.censored_candidates as f64 / out.blocks.len() as f64);
    }
    assert!(rates.windows(2).all(|w| w[1] < w[0]), "{rates:?}");
}

#[test]
fn blocks_are_identically_distributed() {
    let out = harvest(&walk(1 << 14), &plan(20_000), 9).unwrap();
    let lengths: Vec<f64> = out.blocks.iter().map(|b| b.sample.length as f64).collect();
    let (a, b) = lengths.split_at(lengths.len() / 2);
    let d = common::ks_two_sample(a, b);
    let crit = 1.95 * ((a.len() + b.len()) as f64 / (a.len() * b.len()) as f64).sqrt();
    assert!(d < crit, "KS {d} vs {crit}");
}

#[test]
fn position_blocks_recover_speed() {
    let law = SiteLaw::TwoPoint {
        p1: 0.55,
        p2: 0.8,
        q: 0.5,
    };
    let v = regen_core::rwre::RhoLaw::from_site_law(&law)
        .unwrap()
        .speed()
        .unwrap();
    let out = harvest(&walk(1 << 14), &plan(40_000), 4).unwrap();
    let est = estimate(&out.samples(), 1.0).unwrap();
    assert!(
        (est.mu_hat - v).abs() < 4.0 * est.mu_se,
        "{} vs {v}",
        est.mu_hat
    );
}

#[test]
fn reproducible_across_thread_pools() {
    let spec = walk(1 << 12);
    let a = harvest(&spec, &plan(5_000), 1).unwrap();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(3)
        .build()
        .unwrap();
    let b = pool.install(|| harvest(&spec, &plan(5_000), 1).unwrap());
    assert_eq!(a, b);
}
