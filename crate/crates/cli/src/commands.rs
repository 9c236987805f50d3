use std::fs;
use std::path::Path;

use regen_core::artifacts::{
    to_file, write_blocks_csv, write_json, write_llt_csv, write_mixing_csv, write_rates_csv,
};
use regen_core::llt::{semilocal_discrepancy, LatticeJointLaw};
use regen_core::mixing::{mixing_profile, thm22_exponent, RateExponent, LAMBDA_FIT_MAX};
use regen_core::rates::{fit_rate, rate_sweep};
use regen_core::regen::moment_gate;
use regen_core::rwre::{classify, delta_recommendation, sigma0_sq, RhoLaw};
use regen_core::{estimate, harvest, HarvestPlan, ModelSpec};
use serde::Serialize;

use crate::config::{ExperimentConfig, RwreView, SweepConfig};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Compute(regen_core::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Compute(_) => 3,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "ConfigError: {msg}"),
            CliError::Compute(e) => write!(f, "{}: {e}", e.name()),
        }
    }
}

impl From<regen_core::Error> for CliError {
    fn from(e: regen_core::Error) -> Self {
        match e {
            regen_core::Error::InvalidInput(msg) => CliError::Config(msg),
            e => CliError::Compute(e),
        }
    }
}

impl From<String> for CliError {
    fn from(msg: String) -> Self {
        CliError::Config(msg)
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn json(out: &Path, name: &str, value: &impl Serialize) -> Result<()> {
    Ok(to_file(&out.join(name), |w| write_json(w, value))?)
}

pub fn simulate(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let model = ExperimentConfig::require(&cfg.model, "model")?;
    let plan = ExperimentConfig::require(&cfg.plan, "plan")?;
    let h = harvest(model, plan, cfg.master_seed)?;
    let est = estimate(&h.samples(), plan.delta)?;
    report_gate(&est, plan.delta);
    log::info!(
        "{} blocks, {} censored attempts, {} censored candidates",
        h.blocks.len(),
        h.censored_attempts,
        h.censored_candidates
    );
    to_file(&out.join("blocks.csv"), |w| write_blocks_csv(w, &h.blocks))?;
    json(out, "estimates.json", &est)
}

fn report_gate(est: &regen_core::BlockEstimates, delta: f64) {
    let gate = moment_gate(est, delta);
    if gate.flagged {
        log::warn!(
            "block-length tail index {:?} is below 2 + delta = {}",
            gate.tail_index,
            2.0 + delta
        );
    }
}

fn sweep_and_fit(
    model: &ModelSpec,
    plan: &HarvestPlan,
    sweep: &SweepConfig,
    master_seed: u64,
    delta: f64,
    out: &Path,
) -> Result<()> {
    let opts = sweep.options(master_seed)?;
    let h = harvest(model, plan, master_seed)?;
    let est = estimate(&h.samples(), delta)?;
    report_gate(&est, delta);
    let series = rate_sweep(model, &est, &sweep.ns, &opts, delta)?;
    let fit = fit_rate(&series)?;
    to_file(&out.join("rates.csv"), |w| write_rates_csv(w, &series))?;
    json(out, "fit.json", &fit)
}

pub fn rates(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let model = ExperimentConfig::require(&cfg.model, "model")?;
    let plan = ExperimentConfig::require(&cfg.plan, "plan")?;
    let sweep = ExperimentConfig::require(&cfg.sweep, "sweep")?;
    sweep_and_fit(model, plan, sweep, cfg.master_seed, plan.delta, out)
}

pub fn llt(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let l = ExperimentConfig::require(&cfg.llt, "llt")?;
    let rows: Vec<(f64, f64, f64)> = l.table.iter().map(|r| (r[0], r[1], r[2])).collect();
    let law = LatticeJointLaw::from_table(&rows)?;
    let reports =
        l.ns.iter()
            .map(|&n| semilocal_discrepancy(&law, n, &l.x_grid))
            .collect::<regen_core::Result<Vec<_>>>()?;
    Ok(to_file(&out.join("llt.csv"), |w| {
        write_llt_csv(w, &reports, l.delta)
    })?)
}

#[derive(Debug, Serialize)]
struct RwreAnalytics {
    #[serde(rename = "E_log_rho", with = "regen_core::types::ext_f64")]
    e_log_rho: f64,
    #[serde(rename = "E_rho")]
    e_rho: f64,
    #[serde(with = "regen_core::types::ext_f64")]
    kappa: f64,
    #[serde(rename = "v_P")]
    v_p: f64,
    transient_right: bool,
    ballistic: bool,
    clt_regime: bool,
    sigma0_sq: Option<f64>,
    sigma0_se: Option<f64>,
    delta_recommended: Option<f64>,
}

pub fn rwre(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let r = ExperimentConfig::require(&cfg.rwre, "rwre")?;
    let rho = RhoLaw::from_site_law(&r.law)?;
    let verdict = classify(&rho)?;
    let delta = delta_recommendation(&verdict);
    let sigma0 = match (r.sigma0, verdict.clt_regime) {
        (Some(plan), true) => Some(sigma0_sq(&r.law, cfg.master_seed, plan.into())?),
        (Some(_), false) => {
            log::warn!("kappa <= 2: sigma0^2 is not defined, skipping");
            None
        }
        (None, _) => None,
    };
    let analytics = RwreAnalytics {
        e_log_rho: verdict.e_log_rho,
        e_rho: verdict.e_rho,
        kappa: verdict.kappa,
        v_p: rho.speed()?,
        transient_right: verdict.transient_right,
        ballistic: verdict.ballistic,
        clt_regime: verdict.clt_regime,
        sigma0_sq: sigma0.map(|s| s.value),
        sigma0_se: sigma0.map(|s| s.se),
        delta_recommended: delta,
    };
    json(out, "analytics.json", &analytics)?;
    if let Some(view) = r.view {
        let plan = ExperimentConfig::require(&cfg.plan, "plan")?;
        let sweep = ExperimentConfig::require(&cfg.sweep, "sweep")?;
        let delta =
            delta.ok_or_else(|| CliError::Config("a walk rate sweep needs kappa > 2".into()))?;
        let model = match view {
            RwreView::Position => ModelSpec::Rwre1dPosition {
                law: r.law.clone(),
                limits: r.limits,
            },
            RwreView::Hitting => ModelSpec::Rwre1dHitting {
                law: r.law.clone(),
                limits: r.limits,
            },
        };
        let plan = HarvestPlan { delta, ..*plan };
        sweep_and_fit(&model, &plan, sweep, cfg.master_seed, delta, out)?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct MixingSummary {
    #[serde(with = "regen_core::types::ext_f64")]
    lambda_fit: f64,
    p: Option<f64>,
    rate: Option<RateExponent>,
}

pub fn mixing(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let m = ExperimentConfig::require(&cfg.mixing, "mixing")?;
    let profile = mixing_profile(&m.chain, m.n_max, m.cap)?;
    let rate =
        m.p.and_then(|p| thm22_exponent(p, profile.lambda_fit.min(LAMBDA_FIT_MAX)));
    to_file(&out.join("mixing.csv"), |w| {
        write_mixing_csv(w, &profile.alphas)
    })?;
    json(
        out,
        "mixing.json",
        &MixingSummary {
            lambda_fit: profile.lambda_fit,
            p: m.p.filter(|p| p.is_finite()),
            rate,
        },
    )
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::Compute(e.into()))
}
