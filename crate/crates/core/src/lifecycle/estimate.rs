use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{simulate_episode, CaseStudyConfig, CostBreakdown, Mode, PolicyHeuristics, StudyContext};
use crate::deterioration::sample_scenario;
use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

/// Costs of one scenario on one branch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub scenario: u64,
    pub branch: String,
    pub inspection: f64,
    pub repair: f64,
    pub closedown: f64,
    pub risk: f64,
    pub total: f64,
    pub degenerate: bool,
}

impl EpisodeRecord {
    pub const CSV_HEADER: &'static str = "scenario,branch,C_I,C_R,C_clsdn,R_F,total";

    fn new(scenario: u64, branch: &str, c: &CostBreakdown, degenerate: bool) -> Self {
        Self {
            scenario,
            branch: branch.to_string(),
            inspection: c.inspection,
            repair: c.repair,
            closedown: c.closedown,
            risk: c.risk,
            total: c.total(),
            degenerate,
        }
    }

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.scenario, self.branch, self.inspection, self.repair, self.closedown, self.risk, self.total
        )
    }
}

/// Sample mean and its standard error; `NaN` where undefined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    pub std_error: f64,
}

impl MeanSe {
    pub fn of(values: impl Iterator<Item = f64> + Clone) -> Self {
        let n = values.clone().count();
        if n == 0 {
            return Self { mean: f64::NAN, std_error: f64::NAN };
        }
        let mean = values.clone().sum::<f64>() / n as f64;
        let std_error = if n < 2 {
            f64::NAN
        } else {
            let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        };
        Self { mean, std_error }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostEstimate {
    pub n: usize,
    pub excluded: usize,
    pub total: MeanSe,
    pub inspection: MeanSe,
    pub repair: MeanSe,
    pub closedown: MeanSe,
    pub risk: MeanSe,
}

impl CostEstimate {
    fn from_records<'a>(records: impl Iterator<Item = &'a EpisodeRecord> + Clone, excluded: usize) -> Self {
        Self {
            n: records.clone().count(),
            excluded,
            total: MeanSe::of(records.clone().map(|r| r.total)),
            inspection: MeanSe::of(records.clone().map(|r| r.inspection)),
            repair: MeanSe::of(records.clone().map(|r| r.repair)),
            closedown: MeanSe::of(records.clone().map(|r| r.closedown)),
            risk: MeanSe::of(records.map(|r| r.risk)),
        }
    }
}

/// Difference `E[C_baseline] − E[C_alternative]` over common scenarios.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedEstimate {
    pub value: MeanSe,
    /// Standard error the same difference would have with independent samples.
    pub unpaired_std_error: f64,
    pub baseline: CostEstimate,
    pub alternative: CostEstimate,
    /// Baseline and alternative records, interleaved per scenario; degenerate scenarios included.
    pub records: Vec<EpisodeRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint {
    pub policy: PolicyHeuristics,
    pub cost: CostEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizationResult {
    pub best: PolicyHeuristics,
    pub best_cost: CostEstimate,
    pub surface: Vec<SurfacePoint>,
}

/// `n` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n)
            .map(|i| {
                let f = i as f64 / (n - 1) as f64;
                if i == 0 {
                    lo
                } else if i == n - 1 {
                    hi
                } else {
                    (lo.ln() + f * (hi.ln() - lo.ln())).exp()
                }
            })
            .collect(),
    }
}

/// Runs every branch on the same `n` scenarios; result `[scenario][branch]`.
fn run_branches(
    ctx: &StudyContext,
    branches: &[(Mode, PolicyHeuristics)],
    case: &CaseStudyConfig,
    n: usize,
    seed: u64,
) -> Result<Vec<Vec<(CostBreakdown, bool)>>> {
    ctx.validate()?;
    case.validate()?;
    for (_, p) in branches {
        p.validate()?;
    }
    (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let scenario = sample_scenario(&ctx.deterioration, &mut stream_rng(seed, i, Stream::Scenario))?;
            branches
                .iter()
                .map(|(mode, policy)| {
                    let out = simulate_episode(ctx, &scenario, seed, i, *mode, policy, case, false)?;
                    let degenerate = out.is_degenerate();
                    Ok((out.costs, degenerate))
                })
                .collect()
        })
        .collect()
}

fn check_degenerate(ctx: &StudyContext, excluded: usize, n: usize) -> Result<()> {
    if n > 0 && excluded as f64 > ctx.max_degenerate_fraction * n as f64 {
        return Err(Error::Estimation(format!(
            "{excluded} of {n} episodes hit filter degeneracy (limit {:.1}%)",
            100.0 * ctx.max_degenerate_fraction
        )));
    }
    Ok(())
}

/// Monte Carlo estimate of the expected discounted life-cycle cost of one policy.
pub fn expected_cost(
    ctx: &StudyContext,
    mode: Mode,
    policy: &PolicyHeuristics,
    case: &CaseStudyConfig,
    n_mcs: usize,
    seed: u64,
) -> Result<(CostEstimate, Vec<EpisodeRecord>)> {
    let runs = run_branches(ctx, &[(mode, *policy)], case, n_mcs, seed)?;
    let records: Vec<EpisodeRecord> = runs
        .iter()
        .enumerate()
        .map(|(i, r)| EpisodeRecord::new(i as u64, mode.label(), &r[0].0, r[0].1))
        .collect();
    let excluded = records.iter().filter(|r| r.degenerate).count();
    check_degenerate(ctx, excluded, n_mcs)?;
    let est = CostEstimate::from_records(records.iter().filter(|r| !r.degenerate), excluded);
    Ok((est, records))
}

/// Paired difference of two arbitrary `(mode, policy, label)` branches on common scenarios.
pub fn paired_estimate(
    ctx: &StudyContext,
    baseline: (Mode, PolicyHeuristics, &str),
    alternative: (Mode, PolicyHeuristics, &str),
    case: &CaseStudyConfig,
    n_mcs: usize,
    seed: u64,
) -> Result<PairedEstimate> {
    let runs = run_branches(ctx, &[(baseline.0, baseline.1), (alternative.0, alternative.1)], case, n_mcs, seed)?;
    let mut records = Vec::with_capacity(2 * n_mcs);
    let mut kept = Vec::with_capacity(n_mcs);
    for (i, r) in runs.iter().enumerate() {
        let a = EpisodeRecord::new(i as u64, baseline.2, &r[0].0, r[0].1);
        let b = EpisodeRecord::new(i as u64, alternative.2, &r[1].0, r[1].1);
        if !(a.degenerate || b.degenerate) {
            kept.push((a.clone(), b.clone()));
        }
        records.push(a);
        records.push(b);
    }
    let excluded = n_mcs - kept.len();
    check_degenerate(ctx, excluded, n_mcs)?;
    let base = CostEstimate::from_records(kept.iter().map(|p| &p.0), excluded);
    let alt = CostEstimate::from_records(kept.iter().map(|p| &p.1), excluded);
    let value = MeanSe::of(kept.iter().map(|(a, b)| a.total - b.total));
    let unpaired_std_error = (base.total.std_error.powi(2) + alt.total.std_error.powi(2)).sqrt();
    Ok(PairedEstimate { value, unpaired_std_error, baseline: base, alternative: alt, records })
}

/// Paired estimate of the value of SHM: inspection-only cost minus SHM cost.
pub fn voshm_estimate(
    ctx: &StudyContext,
    policy_inspection: &PolicyHeuristics,
    policy_shm: &PolicyHeuristics,
    case: &CaseStudyConfig,
    n_mcs: usize,
    seed: u64,
) -> Result<PairedEstimate> {
    paired_estimate(
        ctx,
        (Mode::InspectionOnly, policy_inspection.with_case(case), Mode::InspectionOnly.label()),
        (Mode::Shm, policy_shm.with_case(case), Mode::Shm.label()),
        case,
        n_mcs,
        seed,
    )
}

/// Paired estimate of the value of information: prior-analysis cost minus the cost with data of `mode`.
pub fn voi_estimate(
    ctx: &StudyContext,
    policy_prior: &PolicyHeuristics,
    policy_posterior: &PolicyHeuristics,
    mode: Mode,
    case: &CaseStudyConfig,
    n_mcs: usize,
    seed: u64,
) -> Result<PairedEstimate> {
    paired_estimate(
        ctx,
        (Mode::Prior, policy_prior.with_case(case), Mode::Prior.label()),
        (mode, policy_posterior.with_case(case), mode.label()),
        case,
        n_mcs,
        seed,
    )
}

/// Exhaustive search over `candidates` with common random numbers; ties keep the earlier candidate.
///
/// An imposed repair threshold replaces the candidates' own; an imposed inspection threshold is ignored.
pub fn optimize_heuristics(
    ctx: &StudyContext,
    mode: Mode,
    candidates: &[PolicyHeuristics],
    case: &CaseStudyConfig,
    n_mcs: usize,
    seed: u64,
) -> Result<OptimizationResult> {
    if candidates.is_empty() {
        return Err(Error::Config("optimization grid is empty".into()));
    }
    let branches: Vec<_> = candidates
        .iter()
        .map(|p| (mode, PolicyHeuristics { p_th_r: case.imposed_repair_threshold.unwrap_or(p.p_th_r), ..*p }))
        .collect();
    let runs = run_branches(ctx, &branches, case, n_mcs, seed)?;
    let degenerate: Vec<bool> = runs.iter().map(|r| r.iter().any(|b| b.1)).collect();
    let excluded = degenerate.iter().filter(|d| **d).count();
    check_degenerate(ctx, excluded, n_mcs)?;
    let surface: Vec<SurfacePoint> = branches
        .iter()
        .enumerate()
        .map(|(j, (_, policy))| {
            let records: Vec<EpisodeRecord> = runs
                .iter()
                .enumerate()
                .filter(|(i, _)| !degenerate[*i])
                .map(|(i, r)| EpisodeRecord::new(i as u64, mode.label(), &r[j].0, false))
                .collect();
            SurfacePoint { policy: *policy, cost: CostEstimate::from_records(records.iter(), excluded) }
        })
        .collect();
    let best = surface
        .iter()
        .fold(None::<&SurfacePoint>, |acc, p| match acc {
            Some(b) if !(p.cost.total.mean < b.cost.total.mean) => Some(b),
            _ => Some(p),
        })
        .expect("nonempty grid");
    Ok(OptimizationResult { best: best.policy, best_cost: best.cost.clone(), surface })
}

/// Threshold grid with `p_th_I` over `inspection` and `p_th_R` over `repair`.
pub fn threshold_grid(inspection: &[f64], repair: &[f64], dt_i: f64) -> Vec<PolicyHeuristics> {
    repair
        .iter()
        .flat_map(|&p_th_r| inspection.iter().map(move |&p_th_i| PolicyHeuristics { p_th_i, p_th_r, dt_i }))
        .collect()
}
