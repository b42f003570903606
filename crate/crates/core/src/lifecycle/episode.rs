use serde::{Deserialize, Serialize};

use super::{CaseStudyConfig, CostConstants, Mode, PolicyHeuristics, StudyContext};
use crate::deterioration::DeteriorationScenario;
use crate::error::{Error, Result};
use crate::filter::{ParticleEnsemble, ShockKnowledge, TraceRow};
use crate::observation::{inspection_log_likelihood, inspection_outcome, perturb_eigenvalues, shm_log_likelihood};
use crate::rng::{stream_rng, Stream};
use crate::stats::standard_normal;
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActionKind {
    PeriodicInspection,
    HazardInspection,
    ShockInspection,
    Repair,
    Closedown,
    Shock,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub time: f64,
    pub kind: ActionKind,
}

/// Discounted costs of one episode with the log they were summed from.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub inspection: f64,
    pub repair: f64,
    pub closedown: f64,
    pub risk: f64,
    pub actions: Vec<Action>,
    /// `(t_k, Pr[F(t_k)] − Pr[F(t_{k−1})])` on the ground-truth path.
    pub risk_increments: Vec<(f64, f64)>,
}

impl CostBreakdown {
    pub fn total(&self) -> f64 {
        self.inspection + self.repair + self.closedown + self.risk
    }

    pub fn count(&self, kinds: &[ActionKind]) -> usize {
        self.actions.iter().filter(|a| kinds.contains(&a.kind)).count()
    }

    pub fn inspection_times(&self) -> Vec<f64> {
        self.actions.iter().filter(|a| a.kind.is_inspection()).map(|a| a.time).collect()
    }

    /// Recomputes `[C_I, C_R, C_clsdn, R_F]` from the action and risk logs.
    pub fn rederive(&self, c: &CostConstants) -> [f64; 4] {
        let mut out = [0.0; 4];
        for a in &self.actions {
            let g = c.discount(a.time);
            match a.kind {
                k if k.is_inspection() => out[0] += g * c.c_i,
                ActionKind::Repair => out[1] += g * c.c_r,
                ActionKind::Closedown => out[2] += g * c.c_clsdn * c.delay_days,
                _ => {}
            }
        }
        out[3] = self.risk_increments.iter().map(|(t, d)| c.discount(*t) * c.c_f * d).sum();
        out
    }
}

impl ActionKind {
    pub fn is_inspection(self) -> bool {
        matches!(self, ActionKind::PeriodicInspection | ActionKind::HazardInspection | ActionKind::ShockInspection)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTraceRow {
    pub filter: TraceRow,
    pub x_true: f64,
    pub hazard: f64,
    pub pr_filtered: f64,
    pub pr_true: f64,
    pub inspected: bool,
    pub repaired: bool,
}

impl EpisodeTraceRow {
    pub const CSV_HEADER: &'static str =
        "time,mean_x,sd_x,mean_a,sd_a,mean_b,sd_b,ess,resampled,x_true,hazard,pr_filtered,pr_true,inspected,repaired";

    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.filter.to_csv(),
            self.x_true,
            self.hazard,
            self.pr_filtered,
            self.pr_true,
            self.inspected as u8,
            self.repaired as u8
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeOutcome {
    pub costs: CostBreakdown,
    pub trace: Vec<EpisodeTraceRow>,
    pub degenerate_updates: usize,
}

impl EpisodeOutcome {
    pub fn is_degenerate(&self) -> bool {
        self.degenerate_updates > 0
    }
}

/// Per-epoch random draws shared by every branch run on the same scenario.
struct EpochNoise {
    temperature: Vec<f64>,
    inspection: Vec<f64>,
    shm: Vec<[f64; 8]>,
    n_modes: Vec<usize>,
}

impl EpochNoise {
    fn generate(ctx: &StudyContext, epochs: &[f64], seed: u64, index: u64) -> Self {
        let mut t_rng = stream_rng(seed, index, Stream::Temperature);
        let mut i_rng = stream_rng(seed, index, Stream::InspectionNoise);
        let mut s_rng = stream_rng(seed, index, Stream::ShmNoise);
        let mut m_rng = stream_rng(seed, index, Stream::ModeDrop);
        let (lo, hi) = (ctx.observation.modes_min, ctx.observation.modes_max);
        Self {
            temperature: epochs.iter().map(|&t| ctx.temperature.sample(t, &mut t_rng)).collect(),
            inspection: epochs.iter().map(|_| standard_normal(&mut i_rng)).collect(),
            shm: epochs.iter().map(|_| std::array::from_fn(|_| standard_normal(&mut s_rng))).collect(),
            n_modes: epochs.iter().map(|_| if lo == hi { lo } else { m_rng.random_range(lo..=hi) }).collect(),
        }
    }
}

fn is_yearly(t: f64) -> bool {
    (t - t.round()).abs() < 1e-9
}

/// Runs the yearly (plus shock-instant) decision loop for one ground-truth scenario.
///
/// `seed` and `index` select the common random streams of the scenario, so the
/// branches of a paired comparison see identical noise.
#[allow(clippy::too_many_arguments)]
pub fn simulate_episode(
    ctx: &StudyContext,
    scenario: &DeteriorationScenario,
    seed: u64,
    index: u64,
    mode: Mode,
    policy: &PolicyHeuristics,
    case: &CaseStudyConfig,
    record_trace: bool,
) -> Result<EpisodeOutcome> {
    scenario.validate()?;
    policy.validate()?;
    let costs_c = &ctx.costs;
    let observes_shocks = case.shocks_observed() && mode != Mode::Prior;
    let epochs = scenario.epoch_grid(observes_shocks);
    let noise = EpochNoise::generate(ctx, &epochs, seed, index);
    let mut f_rng = stream_rng(seed, index, Stream::Filter);
    let mut pf = ParticleEnsemble::init(&ctx.deterioration, ctx.filter.n_particles, &mut f_rng)?;
    let e0 = ctx.nominal_youngs_modulus;
    let horizon = scenario.horizon;
    let conv = ctx.hazard_convention;

    let mut costs = CostBreakdown::default();
    let mut trace = Vec::new();
    let mut degenerate = 0usize;
    let (mut x_true, mut tau_true, mut log_surv_true) = (0.0f64, 0.0f64, 0.0f64);
    let mut t_prev = 0.0;
    let mut model = [0.0; 8];
    // Yearly epochs since the last inspection or repair.
    let mut years_unchecked = 0u32;

    for (k, &t) in epochs.iter().enumerate() {
        let dt = t - t_prev;
        if is_yearly(t) {
            years_unchecked += 1;
        }
        let shocks_now = scenario.shocks.iter().filter(|s| s.time > t_prev && s.time <= t).count() as u32;
        x_true += scenario.gradual(tau_true, t_prev, t) + scenario.shocks_in(t_prev, t);
        tau_true += dt;
        if shocks_now > 0 {
            costs.actions.push(Action { time: t, kind: ActionKind::Shock });
        }

        let knowledge = if observes_shocks { ShockKnowledge::Observed(shocks_now) } else { ShockKnowledge::Unobserved };
        pf.predict(t, &ctx.deterioration, knowledge, &mut f_rng)?;
        let step = pf.advance_reliability(|x| ctx.interval_failure(x, dt), conv);

        let p_true = ctx.interval_failure(x_true, dt);
        let increment = log_surv_true.exp() * p_true;
        log_surv_true += (-p_true).ln_1p();
        costs.risk_increments.push((t, increment));
        costs.risk += costs_c.discount(t) * costs_c.c_f * increment;

        let decisions_open = t < horizon - 1e-9;
        let mut inspected = false;
        let mut repaired = false;
        let mut resampled = false;

        if decisions_open && step.hazard > policy.p_th_r {
            repaired = true;
            years_unchecked = 0;
            costs.repair += costs_c.discount(t) * costs_c.c_r;
            costs.actions.push(Action { time: t, kind: ActionKind::Repair });
            x_true = 0.0;
            tau_true = 0.0;
            pf.repair();
        } else if decisions_open || mode == Mode::Shm {
            let shock_epoch = observes_shocks && shocks_now > 0;
            let inspection_kind = if !decisions_open {
                None
            } else if shock_epoch {
                Some(ActionKind::ShockInspection)
            } else if step.hazard > policy.p_th_i {
                Some(ActionKind::HazardInspection)
            } else if years_unchecked as f64 >= policy.dt_i - 1e-9 {
                Some(ActionKind::PeriodicInspection)
            } else {
                None
            };

            if mode == Mode::Shm {
                let m = noise.n_modes[k];
                let e_true = ctx.env_truth.theta(noise.temperature[k]) * e0;
                ctx.predictor.eigenvalues_into(x_true, e_true, &mut model[..m])?;
                let obs = perturb_eigenvalues(&model[..m], &noise.shm[k][..m], ctx.observation.c_lambda)?;
                let e_est = ctx.env_estimate.theta(noise.temperature[k]) * e0;
                let c = ctx.observation.c_lambda;
                let mut pred = [0.0; 8];
                let predictor = ctx.predictor;
                let lls: Vec<f64> = pf
                    .x
                    .iter()
                    .map(|&x| match predictor.eigenvalues_into(x, e_est, &mut pred[..m]) {
                        Ok(()) => shm_log_likelihood(&obs, &pred[..m], c),
                        Err(_) => f64::NEG_INFINITY,
                    })
                    .collect();
                if let Err(Error::Degeneracy { .. }) = pf.update(|j, _| lls[j]) {
                    degenerate += 1;
                }
            }

            if case.closedown && shock_epoch && decisions_open {
                let close = match mode {
                    Mode::Shm => pf.filtered_hazard(conv) > policy.p_th_i,
                    Mode::InspectionOnly => true,
                    Mode::Prior => false,
                };
                if close {
                    costs.closedown += costs_c.discount(t) * costs_c.c_clsdn * costs_c.delay_days;
                    costs.actions.push(Action { time: t, kind: ActionKind::Closedown });
                }
            }

            if let Some(kind) = inspection_kind {
                inspected = true;
                years_unchecked = 0;
                costs.inspection += costs_c.discount(t) * costs_c.c_i;
                costs.actions.push(Action { time: t, kind });
                let (cv, floor) = (ctx.observation.cv_insp, ctx.observation.sigma_floor);
                let z = inspection_outcome(x_true, noise.inspection[k], cv, floor);
                if mode != Mode::Prior {
                    if let Err(Error::Degeneracy { .. }) = pf.update(|_, x| inspection_log_likelihood(z, x, cv, floor)) {
                        degenerate += 1;
                    }
                }
            }

            if pf.needs_resampling(&ctx.filter) {
                pf.gm_resample(&ctx.filter, &mut f_rng);
                resampled = true;
            }
        }

        if record_trace {
            trace.push(EpisodeTraceRow {
                filter: pf.trace_row(resampled),
                x_true,
                hazard: step.hazard,
                pr_filtered: pf.failure_probability(),
                pr_true: -log_surv_true.exp_m1(),
                inspected,
                repaired,
            });
        }
        t_prev = t;
    }
    Ok(EpisodeOutcome { costs, trace, degenerate_updates: degenerate })
}
