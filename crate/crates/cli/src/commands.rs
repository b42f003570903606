use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::Serialize;
use voshm_core::deterioration::{sample_scenario, DeteriorationScenario};
use voshm_core::env::{
    learn_env_posterior, synthesize_undamaged_dataset, theta_relative_rmse, EnvModelParams, EnvPosterior,
};
use voshm_core::lifecycle::{
    log_grid, optimize_heuristics, simulate_episode, threshold_grid, voi_estimate, voshm_estimate, CostBreakdown,
    EpisodeRecord, Mode, PairedEstimate, PolicyHeuristics, StudyContext,
};
use voshm_core::rng::{stream_rng, Stream};
use voshm_core::structure::{
    default_capacity_curve, max_relative_error, AssembledModel, CapacityCurve, ModalPredictor, ModalSurrogate,
};

use crate::config::{CaseConfig, RunConfig};
use crate::error::CliError;
use crate::report::{self, CostSummary, Stat};

pub const SURROGATE_FILE: &str = "surrogate.json";
pub const ENV_FILE: &str = "env_posterior.json";

fn artifact(cfg: &RunConfig, name: &str) -> PathBuf {
    cfg.output.artifacts.join(name)
}

fn out(cfg: &RunConfig, name: &str) -> PathBuf {
    cfg.output.dir.join(name)
}

fn read_artifact(path: &Path, hint: &str) -> Result<String, CliError> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Prerequisite(format!("{} ({e}); run `voshm {hint}` first", path.display())))
}

fn load_surrogate(cfg: &RunConfig) -> Result<ModalSurrogate, CliError> {
    let text = read_artifact(&artifact(cfg, SURROGATE_FILE), "fit-surrogate")?;
    ModalSurrogate::from_json(&text).map_err(|e| CliError::Prerequisite(format!("unreadable surrogate: {e}")))
}

fn load_env(cfg: &RunConfig) -> Result<EnvPosterior, CliError> {
    let text = read_artifact(&artifact(cfg, ENV_FILE), "learn-env")?;
    EnvPosterior::from_json(&text).map_err(|e| CliError::Prerequisite(format!("unreadable environmental model: {e}")))
}

/// Structural model, capacity curve, surrogate and θ″ of a study.
pub struct Setup {
    model: AssembledModel,
    capacity: CapacityCurve,
    surrogate: ModalSurrogate,
    env_estimate: EnvModelParams,
}

impl Setup {
    pub fn load(cfg: &RunConfig) -> Result<Self, CliError> {
        let surrogate = load_surrogate(cfg)?;
        let env_estimate = load_env(cfg)?.theta_curve();
        let model = AssembledModel::new(cfg.model.bridge.clone())?;
        let capacity = default_capacity_curve(&model)?;
        Ok(Self { model, capacity, surrogate, env_estimate })
    }

    pub fn context<'a>(&'a self, cfg: &RunConfig) -> StudyContext<'a> {
        StudyContext {
            predictor: &self.surrogate,
            capacity: &self.capacity,
            demand: cfg.reliability.demand(),
            hazard_convention: cfg.reliability.hazard_convention,
            nominal_youngs_modulus: self.model.config().nominal_youngs_modulus,
            env_truth: cfg.env.truth,
            env_estimate: self.env_estimate,
            temperature: cfg.env.temperature,
            deterioration: cfg.deterioration,
            observation: cfg.observation,
            filter: cfg.filter,
            costs: cfg.lifecycle.costs,
            max_degenerate_fraction: cfg.lifecycle.mc.max_degenerate_fraction,
        }
    }
}

#[derive(Serialize)]
struct SurrogateReport {
    n_modes: usize,
    n_branches: usize,
    held_out_x: usize,
    held_out_e: usize,
    max_relative_error: f64,
}

pub fn fit_surrogate(cfg: &RunConfig) -> Result<(), CliError> {
    let model = AssembledModel::new(cfg.model.bridge.clone())?;
    let settings = &cfg.model.surrogate;
    let surrogate = ModalSurrogate::fit_default(&model, settings)?;
    let (xs, es) = settings.held_out_grids(model.config().nominal_youngs_modulus);
    let err = max_relative_error(&surrogate, &model, &xs, &es)?;
    let dir = &cfg.output.artifacts;
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    report::write_text(&artifact(cfg, SURROGATE_FILE), &surrogate.to_json()?)?;
    report::write_json(
        &out(cfg, "surrogate_report.json"),
        &SurrogateReport {
            n_modes: surrogate.n_modes(),
            n_branches: surrogate.n_branches(),
            held_out_x: xs.len(),
            held_out_e: es.len(),
            max_relative_error: err,
        },
    )
}

#[derive(Serialize)]
struct EnvReport {
    n_t: usize,
    truth: EnvModelParams,
    posterior_mean: EnvModelParams,
    posterior_sd: [f64; 5],
    sd_ratio_to_prior: [f64; 5],
    theta_relative_rmse: f64,
    tempering_stages: usize,
    log_evidence: f64,
}

pub fn learn_env(cfg: &RunConfig) -> Result<(), CliError> {
    let surrogate = load_surrogate(cfg)?;
    let e0 = cfg.model.bridge.nominal_youngs_modulus;
    let env = &cfg.env;
    let mut data_rng = stream_rng(cfg.seed, 0, Stream::EnvData);
    let dataset = synthesize_undamaged_dataset(
        &env.truth,
        &surrogate,
        e0,
        &env.temperature,
        env.n_t,
        cfg.observation.c_lambda,
        &mut data_rng,
    )?;
    let mut rng = stream_rng(cfg.seed, 0, Stream::EnvSampler);
    let posterior =
        learn_env_posterior(&dataset, &env.prior, &surrogate, e0, cfg.observation.c_lambda, &env.tmcmc, &mut rng)?;
    let dir = &cfg.output.artifacts;
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    report::write_text(&artifact(cfg, ENV_FILE), &posterior.to_json()?)?;
    report::write_json(&out(cfg, "env_dataset.json"), &dataset)?;
    report::write_json(
        &out(cfg, "env_summary.json"),
        &EnvReport {
            n_t: env.n_t,
            truth: env.truth,
            posterior_mean: posterior.mean,
            posterior_sd: posterior.sd,
            sd_ratio_to_prior: posterior.sd_ratios(&env.prior),
            theta_relative_rmse: theta_relative_rmse(&posterior.mean, &env.truth, -15.0, 35.0, 101),
            tempering_stages: posterior.tempering.len(),
            log_evidence: posterior.log_evidence,
        },
    )
}

fn branch_policy(cfg: &RunConfig, mode: Mode) -> PolicyHeuristics {
    match mode {
        Mode::Shm => cfg.shm_policy(),
        _ => cfg.lifecycle.policy,
    }
}

#[derive(Serialize)]
struct ReplayReport<'a> {
    scenario: u64,
    mode: &'static str,
    policy: PolicyHeuristics,
    case: CaseConfig,
    total: f64,
    costs: &'a CostBreakdown,
    degenerate_updates: usize,
}

pub fn replay(cfg: &RunConfig, scenario_path: Option<&Path>, index: u64) -> Result<(), CliError> {
    let setup = Setup::load(cfg)?;
    let ctx = setup.context(cfg);
    ctx.validate()?;
    let scenario = match scenario_path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            DeteriorationScenario::from_json(&text)?
        }
        None => sample_scenario(&cfg.deterioration, &mut stream_rng(cfg.seed, index, Stream::Scenario))?,
    };
    let case = cfg.lifecycle.case;
    let policy = branch_policy(cfg, case.mode).with_case(&case.study());
    let outcome = simulate_episode(&ctx, &scenario, cfg.seed, index, case.mode, &policy, &case.study(), true)?;
    report::write_text(&out(cfg, &format!("scenario_{index}.json")), &scenario.to_json()?)?;
    report::write_text(&out(cfg, &format!("trace_{index}.csv")), &report::trace_csv(&outcome.trace))?;
    let mut long = format!("{}\n", report::TRAJECTORY_HEADER);
    report::append_trajectories(&mut long, index, case.mode.label(), &outcome.trace);
    report::write_text(&out(cfg, "trajectories.csv"), &long)?;
    report::write_json(
        &out(cfg, "replay.json"),
        &ReplayReport {
            scenario: index,
            mode: case.mode.label(),
            policy,
            case,
            total: outcome.costs.total(),
            costs: &outcome.costs,
            degenerate_updates: outcome.degenerate_updates,
        },
    )
}

#[derive(Serialize)]
struct PairedSummary {
    command: &'static str,
    seed: u64,
    n_mcs: usize,
    n: usize,
    excluded: usize,
    case: CaseConfig,
    baseline_policy: PolicyHeuristics,
    alternative_policy: PolicyHeuristics,
    value: Stat,
    unpaired_std_error: Option<f64>,
    baseline: BranchSummary,
    alternative: BranchSummary,
}

#[derive(Serialize)]
struct BranchSummary {
    branch: String,
    #[serde(flatten)]
    cost: CostSummary,
}

/// Writes the summary, the kept episodes and the requested traces of a paired study.
fn write_paired(
    cfg: &RunConfig,
    ctx: &StudyContext,
    command: &'static str,
    est: &PairedEstimate,
    branches: [(Mode, PolicyHeuristics); 2],
) -> Result<(), CliError> {
    let excluded: BTreeSet<u64> = est.records.iter().filter(|r| r.degenerate).map(|r| r.scenario).collect();
    let kept: Vec<EpisodeRecord> = est.records.iter().filter(|r| !excluded.contains(&r.scenario)).cloned().collect();
    report::write_text(&out(cfg, "episodes.csv"), &report::episodes_csv(&kept))?;
    let label = |m: Mode| m.label().to_string();
    let summary = PairedSummary {
        command,
        seed: cfg.seed,
        n_mcs: cfg.lifecycle.mc.n_mcs,
        n: est.baseline.n,
        excluded: excluded.len(),
        case: cfg.lifecycle.case,
        baseline_policy: branches[0].1,
        alternative_policy: branches[1].1,
        value: Stat::new(est.value.mean, est.value.std_error),
        unpaired_std_error: est.unpaired_std_error.is_finite().then_some(est.unpaired_std_error),
        baseline: BranchSummary { branch: label(branches[0].0), cost: (&est.baseline).into() },
        alternative: BranchSummary { branch: label(branches[1].0), cost: (&est.alternative).into() },
    };
    report::write_json(&out(cfg, "summary.json"), &summary)?;
    write_traces(cfg, ctx, &branches)
}

fn write_traces(cfg: &RunConfig, ctx: &StudyContext, branches: &[(Mode, PolicyHeuristics)]) -> Result<(), CliError> {
    let ids = &cfg.lifecycle.mc.trace_episodes;
    if ids.is_empty() {
        return Ok(());
    }
    let case = cfg.lifecycle.case.study();
    let mut long = format!("{}\n", report::TRAJECTORY_HEADER);
    for &i in ids {
        let scenario = sample_scenario(&ctx.deterioration, &mut stream_rng(cfg.seed, i, Stream::Scenario))?;
        for (mode, policy) in branches {
            let o = simulate_episode(ctx, &scenario, cfg.seed, i, *mode, policy, &case, true)?;
            report::write_text(&out(cfg, &format!("trace_{i}_{}.csv", mode.label())), &report::trace_csv(&o.trace))?;
            report::append_trajectories(&mut long, i, mode.label(), &o.trace);
        }
    }
    report::write_text(&out(cfg, "trajectories.csv"), &long)
}

pub fn voshm(cfg: &RunConfig) -> Result<(), CliError> {
    let setup = Setup::load(cfg)?;
    let ctx = setup.context(cfg);
    let case = cfg.lifecycle.case.study();
    let (w1, w2) = (cfg.lifecycle.policy, cfg.shm_policy());
    let est = voshm_estimate(&ctx, &w1, &w2, &case, cfg.lifecycle.mc.n_mcs, cfg.seed)?;
    let branches = [(Mode::InspectionOnly, w1.with_case(&case)), (Mode::Shm, w2.with_case(&case))];
    write_paired(cfg, &ctx, "voshm", &est, branches)
}

pub fn voi(cfg: &RunConfig) -> Result<(), CliError> {
    let mode = cfg.lifecycle.case.mode;
    if mode == Mode::Prior {
        return Err(CliError::Config("voi needs a data mode (inspection-only or shm), got prior".into()));
    }
    let setup = Setup::load(cfg)?;
    let ctx = setup.context(cfg);
    let case = cfg.lifecycle.case.study();
    let (w0, w1) = (cfg.lifecycle.policy, branch_policy(cfg, mode));
    let est = voi_estimate(&ctx, &w0, &w1, mode, &case, cfg.lifecycle.mc.n_mcs, cfg.seed)?;
    let branches = [(Mode::Prior, w0.with_case(&case)), (mode, w1.with_case(&case))];
    write_paired(cfg, &ctx, "voi", &est, branches)
}

#[derive(Serialize)]
struct OptimizeSummary {
    seed: u64,
    n_mcs: usize,
    mode: &'static str,
    case: CaseConfig,
    grid_points: usize,
    best: PolicyHeuristics,
    best_cost: CostSummary,
}

/// Candidate policies: the log grid on both thresholds (inspection only under an imposed
/// repair threshold) plus the configured extra points, without duplicates.
pub fn candidate_grid(cfg: &RunConfig) -> Vec<PolicyHeuristics> {
    let o = &cfg.lifecycle.optimize;
    let case = &cfg.lifecycle.case;
    let dt_i = o.dt_i.unwrap_or(match case.mode {
        Mode::Shm => f64::INFINITY,
        _ => cfg.lifecycle.policy.dt_i,
    });
    let axis = log_grid(o.threshold_min, o.threshold_max, o.points_per_axis);
    let repair = match case.imposed_repair_threshold {
        Some(p) => vec![p],
        None => axis.clone(),
    };
    let mut grid = threshold_grid(&axis, &repair, dt_i);
    for [p_i, p_r] in &o.extra_candidates {
        let p = PolicyHeuristics { p_th_i: *p_i, p_th_r: case.imposed_repair_threshold.unwrap_or(*p_r), dt_i };
        if !grid.contains(&p) {
            grid.push(p);
        }
    }
    grid
}

pub fn optimize(cfg: &RunConfig) -> Result<(), CliError> {
    let setup = Setup::load(cfg)?;
    let ctx = setup.context(cfg);
    let case = cfg.lifecycle.case;
    let grid = candidate_grid(cfg);
    let res = optimize_heuristics(&ctx, case.mode, &grid, &case.study(), cfg.lifecycle.mc.n_mcs, cfg.seed)?;
    report::write_text(&out(cfg, "cost_surface.csv"), &report::surface_csv(&res.surface))?;
    report::write_json(
        &out(cfg, "summary.json"),
        &OptimizeSummary {
            seed: cfg.seed,
            n_mcs: cfg.lifecycle.mc.n_mcs,
            mode: case.mode.label(),
            case,
            grid_points: grid.len(),
            best: res.best,
            best_cost: (&res.best_cost).into(),
        },
    )
}
