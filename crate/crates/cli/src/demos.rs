//! Canned scenarios that tie empirical behavior to the theory predictors.

use asyncnet_core::linalg::Mat;
use asyncnet_core::sim::{equalization_check, ExperimentSpec, NetworkModel};
use asyncnet_core::stepsize::StepSizeProcess;
use asyncnet_core::strategies::{FusionSampler, StrategyConfig};
use asyncnet_core::theory::{mean_error_stability, MeanErrorKind};
use asyncnet_core::topology::{CombinationMatrix, RandomCombinationPolicy};
use asyncnet_core::Result;

use crate::runner::run_parallel;

pub const DEMO_NAMES: &[&str] =
    &["nfold", "consensus-instability", "async-vs-sync", "equalization"];

/// Outcome of one demo: human-readable lines plus an overall verdict.
pub struct DemoReport {
    pub name: &'static str,
    pub lines: Vec<String>,
    pub pass: bool,
}

pub fn run_demo(name: &str) -> Option<Result<DemoReport>> {
    match name {
        "nfold" => Some(nfold()),
        "consensus-instability" => Some(consensus_instability()),
        "async-vs-sync" => Some(async_vs_sync()),
        "equalization" => Some(equalization()),
        _ => None,
    }
}

fn check(lines: &mut Vec<String>, pass: &mut bool, ok: bool, label: String) {
    lines.push(format!("  [{}] {label}", if ok { "pass" } else { "FAIL" }));
    *pass &= ok;
}

fn unit_optimum(dim: usize) -> Vec<f64> {
    vec![1.0 / (dim as f64).sqrt(); dim]
}

/// Fusing N equally noisy agents at a center divides the average
/// non-cooperative MSD by N.
fn nfold() -> Result<DemoReport> {
    let n = 5;
    let dim = 5;
    let sigma_v2 = 0.01;
    let mu = 0.002;
    let model = || {
        NetworkModel::uniform_regression(unit_optimum(dim), Mat::identity(dim), &[sigma_v2; 5])
    };

    let ncop = ExperimentSpec::new(
        model()?,
        StrategyConfig::non_cooperative(vec![StepSizeProcess::constant(mu); 5])?,
        60,
        12_000,
        101,
    );
    let cent = ExperimentSpec::new(
        model()?,
        StrategyConfig::centralized(StepSizeProcess::constant(mu), FusionSampler::uniform(n))?,
        60,
        12_000,
        102,
    );
    let (_, ncop_report) = run_parallel(&ncop)?;
    let (_, cent_report) = run_parallel(&cent)?;

    let ratio = cent_report.network_msd / ncop_report.network_msd;
    let mut lines = vec![
        format!("non-cooperative average MSD : {:.4e}", ncop_report.network_msd),
        format!("centralized MSD             : {:.4e}", cent_report.network_msd),
        format!("ratio                       : {ratio:.4} (theory 1/N = {:.4})", 1.0 / n as f64),
    ];
    let mut pass = true;
    check(
        &mut lines,
        &mut pass,
        (ratio * n as f64 - 1.0).abs() <= 0.2,
        format!("MSD ratio within 20% of 1/{n}"),
    );
    Ok(DemoReport { name: "nfold", lines, pass })
}

/// Individually stable agents do not make a stable consensus network: the
/// additive coupling pushes an eigenvalue outside the unit circle while
/// diffusion stays strictly inside.
fn consensus_instability() -> Result<DemoReport> {
    let dim = 2;
    let mu = 0.15;
    let sigma_v2 = 0.01;
    let a = Mat::from_rows(&[vec![0.05, 0.95], vec![0.95, 0.05]]).unwrap();
    let covs = vec![Mat::identity(dim); 2];
    let mus = [mu; 2];

    let rho_cons =
        mean_error_stability(MeanErrorKind::Consensus, &a, &mus, &covs)?.spectral_radius;
    let rho_atc =
        mean_error_stability(MeanErrorKind::AtcDiffusion, &a, &mus, &covs)?.spectral_radius;
    let rho_ncop =
        mean_error_stability(MeanErrorKind::NonCooperative, &a, &mus, &covs)?.spectral_radius;

    let mut lines = vec![
        format!("spectral radius, consensus       : {rho_cons:.4}"),
        format!("spectral radius, ATC diffusion   : {rho_atc:.4}"),
        format!("spectral radius, non-cooperative : {rho_ncop:.4}"),
    ];
    let mut pass = true;
    check(&mut lines, &mut pass, rho_cons > 1.0, format!("consensus radius {rho_cons:.3} > 1"));
    check(&mut lines, &mut pass, rho_atc < 1.0, format!("diffusion radius {rho_atc:.3} < 1"));

    let policy = || {
        RandomCombinationPolicy::deterministic(CombinationMatrix::new(a.clone()).unwrap())
    };
    let model = || {
        NetworkModel::uniform_regression(
            vec![0.6, -0.8],
            Mat::identity(dim),
            &[sigma_v2; 2],
        )
    };
    let steps = vec![StepSizeProcess::constant(mu); 2];

    let spec_cons = ExperimentSpec::new(
        model()?,
        StrategyConfig::consensus(policy(), steps.clone())?,
        5,
        2_000,
        201,
    );
    let (_, cons_report) = run_parallel(&spec_cons)?;
    check(
        &mut lines,
        &mut pass,
        cons_report.diverged.is_some(),
        match cons_report.diverged {
            Some(info) => format!("consensus run diverges (iteration {})", info.iteration),
            None => "consensus run diverges".to_string(),
        },
    );

    let spec_atc =
        ExperimentSpec::new(model()?, StrategyConfig::atc(policy(), steps.clone())?, 5, 2_000, 202);
    let (_, atc_report) = run_parallel(&spec_atc)?;
    check(
        &mut lines,
        &mut pass,
        atc_report.diverged.is_none(),
        format!("ATC run converges (MSD {:.3e})", atc_report.network_msd),
    );

    let spec_ncop =
        ExperimentSpec::new(model()?, StrategyConfig::non_cooperative(steps)?, 5, 2_000, 203);
    let (_, ncop_report) = run_parallel(&spec_ncop)?;
    check(
        &mut lines,
        &mut pass,
        ncop_report.diverged.is_none(),
        format!("non-cooperative run converges (MSD {:.3e})", ncop_report.network_msd),
    );

    Ok(DemoReport { name: "consensus-instability", lines, pass })
}

/// Bernoulli random updates reach the same steady state as synchronous
/// updates with the same step value, at half the speed when p = 1/2.
fn async_vs_sync() -> Result<DemoReport> {
    let dim = 5;
    let mu = 0.002;
    let p = 0.5;
    let sigma_v2 = 0.01;
    let model = || {
        NetworkModel::uniform_regression(unit_optimum(dim), Mat::identity(dim), &[sigma_v2])
    };

    let sync = ExperimentSpec::new(
        model()?,
        StrategyConfig::non_cooperative(vec![StepSizeProcess::constant(mu)])?,
        60,
        30_000,
        301,
    );
    let asyn = ExperimentSpec::new(
        model()?,
        StrategyConfig::non_cooperative(vec![StepSizeProcess::bernoulli(mu, p)])?,
        60,
        30_000,
        302,
    );
    let (_, sync_report) = run_parallel(&sync)?;
    let (_, asyn_report) = run_parallel(&asyn)?;

    let msd_ratio = asyn_report.network_msd / sync_report.network_msd;
    let mut lines = vec![
        format!("synchronous MSD      : {:.4e}", sync_report.network_msd),
        format!("asynchronous MSD     : {:.4e}", asyn_report.network_msd),
        format!("MSD ratio            : {msd_ratio:.4} (theory 1)"),
    ];
    let mut pass = true;
    check(
        &mut lines,
        &mut pass,
        (msd_ratio - 1.0).abs() <= 0.15,
        "steady-state levels agree within 15%".to_string(),
    );

    match (sync_report.iterations_to_twice_msd, asyn_report.iterations_to_twice_msd) {
        (Some(ts), Some(ta)) => {
            let ratio = ta as f64 / ts as f64;
            lines.push(format!(
                "iterations to 2×MSD  : sync {ts}, async {ta} (ratio {ratio:.3}, theory 1/p = {:.1})",
                1.0 / p
            ));
            check(
                &mut lines,
                &mut pass,
                (ratio * p - 1.0).abs() <= 0.25,
                "convergence slowdown within 25% of 1/p".to_string(),
            );
        }
        _ => check(&mut lines, &mut pass, false, "transient measurable".to_string()),
    }
    Ok(DemoReport { name: "async-vs-sync", lines, pass })
}

/// Diffusion equalizes steady-state MSD across agents even under a five-fold
/// spread in noise power; non-cooperative agents do not.
fn equalization() -> Result<DemoReport> {
    let n = 5;
    let dim = 5;
    let mu = 0.002;
    let sigmas = [0.002, 0.004, 0.006, 0.008, 0.010];
    let ring_edges: Vec<(usize, usize)> = (0..n).map(|k| (k, (k + 1) % n)).collect();
    let policy = RandomCombinationPolicy::deterministic(
        CombinationMatrix::metropolis(n, &ring_edges)?,
    );
    let model =
        || NetworkModel::uniform_regression(unit_optimum(dim), Mat::identity(dim), &sigmas);

    let atc = ExperimentSpec::new(
        model()?,
        StrategyConfig::atc(policy, vec![StepSizeProcess::constant(mu); 5])?,
        60,
        8_000,
        401,
    );
    let (_, atc_report) = run_parallel(&atc)?;
    let atc_spread = equalization_check(&atc_report)?;

    let ncop = ExperimentSpec::new(
        model()?,
        StrategyConfig::non_cooperative(vec![StepSizeProcess::constant(mu); 5])?,
        60,
        8_000,
        402,
    );
    let (_, ncop_report) = run_parallel(&ncop)?;
    let ncop_spread = equalization_check(&ncop_report)?;

    let fmt_msds = |msds: &[f64]| {
        msds.iter().map(|m| format!("{m:.3e}")).collect::<Vec<_>>().join(", ")
    };
    let mut lines = vec![
        format!("noise powers        : {:?} (5× spread)", sigmas),
        format!("ATC per-agent MSD   : [{}]", fmt_msds(&atc_report.per_agent_msd)),
        format!("ATC spread          : {:.3}", atc_spread),
        format!("ncop per-agent MSD  : [{}]", fmt_msds(&ncop_report.per_agent_msd)),
        format!("ncop spread         : {:.3}", ncop_spread),
    ];
    let mut pass = true;
    check(&mut lines, &mut pass, atc_spread < 0.15, "diffusion spread below 15%".to_string());
    check(
        &mut lines,
        &mut pass,
        ncop_spread > 0.5,
        "non-cooperative spread above 50%".to_string(),
    );
    Ok(DemoReport { name: "equalization", lines, pass })
}
