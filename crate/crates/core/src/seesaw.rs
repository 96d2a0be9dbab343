//! The alternating step-2 / step-3 iteration and its stopping rule.
//!
//! Starting from `ρ^1 = ρ`, each round computes the smallest `λ^i` with
//! `λ^i·ρ_A⊗ρ^i_B ⪰ ρ^i` (step 2), then searches the smoothing ball for the
//! state with the largest spectral margin `μ^i` at that `λ^i` (step 3). A
//! positive margin means the next round can lower `λ`; the loop stops when
//! the margin vanishes, when `λ` stalls, or after `max_iters` rounds.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize, Serializer};

use crate::conic::{self, ConicProblem, SolverSettings};
use crate::error::{Error, Result};
use crate::linalg;
use crate::measures;
use crate::programs::{self, GapCertificate, MuDomain, RankCondition, RankReport};
use crate::state::{check_epsilon, BipartiteState, Tolerances};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeesawConfig {
    pub epsilon: f64,
    pub max_iters: usize,
    pub mu_tol: f64,
    pub lambda_rel_tol: f64,
    pub tolerances: Tolerances<f64>,
    /// Solve the step-3 dual every round and check the gap.
    pub certify: bool,
    /// Run the programs even at `ε = 0` instead of the closed form.
    pub sdp_at_zero_epsilon: bool,
}

impl SeesawConfig {
    pub fn new(epsilon: f64) -> Self {
        let tolerances = Tolerances::default();
        Self {
            epsilon,
            max_iters: 100,
            mu_tol: tolerances.mu_tol,
            lambda_rel_tol: 1e-8,
            tolerances,
            certify: true,
            sdp_at_zero_epsilon: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_epsilon(self.epsilon)?;
        self.tolerances.validate()?;
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be at least 1".into()));
        }
        if !(self.mu_tol > 0.0 && self.mu_tol.is_finite()) {
            return Err(Error::InvalidParameter("mu_tol must be positive".into()));
        }
        if !(self.lambda_rel_tol > 0.0 && self.lambda_rel_tol.is_finite()) {
            return Err(Error::InvalidParameter("lambda_rel_tol must be positive".into()));
        }
        Ok(())
    }

    pub fn solver_settings(&self) -> SolverSettings {
        SolverSettings {
            solver_tol: self.tolerances.solver_tol,
            gap_tol: self.tolerances.gap_tol,
            ..SolverSettings::default()
        }
    }
}

fn seconds<S: Serializer>(d: &Duration, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_f64(d.as_secs_f64())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IterationRecord {
    pub index: usize,
    pub lambda_i: f64,
    pub mu_i: f64,
    /// `|p − d|` of the step-3 pair, when the dual was solved.
    pub duality_gap: Option<f64>,
    /// `F(ρ, ρ^i)` for the state step 2 ran on.
    pub fidelity_of_iterate: f64,
    #[serde(serialize_with = "seconds")]
    pub wall_time: Duration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeesawStatus {
    ConvergedCertified,
    ConvergedUncertified,
    UpperBoundOnly,
    MaxItersReached,
}

#[derive(Debug, Clone)]
pub struct SeesawResult {
    /// `log₂ λ_min`.
    pub imax: f64,
    pub lambda_min: f64,
    pub status: SeesawStatus,
    pub rank_condition: RankCondition,
    pub rank_report: RankReport,
    pub trace: Vec<IterationRecord>,
    /// The state whose step-2 value is `lambda_min`.
    pub final_state: BipartiteState<f64>,
    pub certificates: Vec<GapCertificate>,
}

/// A failed run together with the rounds completed before the failure.
#[derive(Debug, thiserror::Error)]
#[error("{source} (after {} completed iterations)", trace.len())]
pub struct SeesawError {
    pub source: Error,
    pub trace: Vec<IterationRecord>,
}

impl From<Error> for SeesawError {
    fn from(source: Error) -> Self {
        Self { source, trace: Vec::new() }
    }
}

/// Hooks into a running seesaw. Both methods default to no-ops.
pub trait SeesawObserver {
    fn on_iteration(&mut self, _record: &IterationRecord) {}

    /// Called with every program before it is solved; `label` is unique
    /// within a run (e.g. `iter003_step3_dual`).
    fn on_problem(&mut self, _label: &str, _problem: &ConicProblem) {}
}

struct NoObserver;

impl SeesawObserver for NoObserver {}

pub fn run_seesaw(rho_ab: &BipartiteState<f64>, config: &SeesawConfig) -> std::result::Result<SeesawResult, SeesawError> {
    run_seesaw_observed(rho_ab, config, &mut NoObserver)
}

/// `I^ε_max(ρ)` with the default configuration.
pub fn imax_eps(rho_ab: &BipartiteState<f64>, epsilon: f64) -> Result<f64> {
    run_seesaw(rho_ab, &SeesawConfig::new(epsilon))
        .map(|r| r.imax)
        .map_err(|e| e.source)
}

pub fn run_seesaw_observed(
    rho_ab: &BipartiteState<f64>,
    config: &SeesawConfig,
    observer: &mut dyn SeesawObserver,
) -> std::result::Result<SeesawResult, SeesawError> {
    config.validate()?;
    let tol = &config.tolerances;
    let rank_report = programs::rank_condition(rho_ab, config.epsilon, tol)?;
    if config.epsilon == 0.0 && !config.sdp_at_zero_epsilon {
        return closed_form(rho_ab, config, rank_report, observer);
    }

    let mut run = Run {
        rho_ab,
        config,
        settings: config.solver_settings(),
        observer,
        trace: Vec::new(),
        certificates: Vec::new(),
    };
    match run.iterate() {
        Ok((lambda_min, final_state, converged)) => {
            let certified = config.certify && run.certificates.iter().all(|c| c.passed)
                || config.epsilon == 0.0;
            let status = if !converged {
                SeesawStatus::MaxItersReached
            } else if rank_report.condition != RankCondition::Holds {
                SeesawStatus::UpperBoundOnly
            } else if certified {
                SeesawStatus::ConvergedCertified
            } else {
                SeesawStatus::ConvergedUncertified
            };
            Ok(SeesawResult {
                imax: lambda_min.log2(),
                lambda_min,
                status,
                rank_condition: rank_report.condition,
                rank_report,
                trace: run.trace,
                final_state,
                certificates: run.certificates,
            })
        }
        Err(source) => Err(SeesawError { source, trace: run.trace }),
    }
}

fn closed_form(
    rho_ab: &BipartiteState<f64>,
    config: &SeesawConfig,
    rank_report: RankReport,
    observer: &mut dyn SeesawObserver,
) -> std::result::Result<SeesawResult, SeesawError> {
    let started = Instant::now();
    let tol = &config.tolerances;
    let imax = measures::dmax_closed_form(rho_ab.matrix(), &rho_ab.marginal_product(), tol)?.max(0.0);
    let lambda_min = imax.exp2();
    let record = IterationRecord {
        index: 1,
        lambda_i: lambda_min,
        mu_i: 0.0,
        duality_gap: None,
        fidelity_of_iterate: 1.0,
        wall_time: started.elapsed(),
    };
    observer.on_iteration(&record);
    // The closed form is exact at ε = 0 whatever the marginals' rank.
    let status = if rank_report.condition == RankCondition::Holds {
        SeesawStatus::ConvergedCertified
    } else {
        SeesawStatus::ConvergedUncertified
    };
    Ok(SeesawResult {
        imax,
        lambda_min,
        status,
        rank_condition: rank_report.condition,
        rank_report,
        trace: vec![record],
        final_state: rho_ab.clone(),
        certificates: Vec::new(),
    })
}

struct Run<'a> {
    rho_ab: &'a BipartiteState<f64>,
    config: &'a SeesawConfig,
    settings: SolverSettings,
    observer: &'a mut dyn SeesawObserver,
    trace: Vec<IterationRecord>,
    certificates: Vec<GapCertificate>,
}

struct Step3Outcome {
    mu: f64,
    next: BipartiteState<f64>,
    gap: Option<f64>,
}

impl Run<'_> {
    /// Returns `(λ_min, state attaining it, converged)`.
    fn iterate(&mut self) -> Result<(f64, BipartiteState<f64>, bool)> {
        let tol = self.config.tolerances;
        let mut current = self.rho_ab.clone();
        let mut best: Option<(f64, BipartiteState<f64>)> = None;
        let mut previous_lambda: Option<f64> = None;
        let mut stalled = 0;

        for index in 1..=self.config.max_iters {
            let started = Instant::now();
            let lambda = self.step2(index, &current)?;
            if best.as_ref().is_none_or(|(b, _)| lambda <= *b) {
                best = Some((lambda, current.clone()));
            }
            if let Some(prev) = previous_lambda {
                if (prev - lambda) / prev < self.config.lambda_rel_tol {
                    stalled += 1;
                } else {
                    stalled = 0;
                }
            }
            previous_lambda = Some(lambda);

            let outcome = self.step3(index, lambda)?;
            let record = IterationRecord {
                index,
                lambda_i: lambda,
                mu_i: outcome.mu,
                duality_gap: outcome.gap,
                fidelity_of_iterate: measures::fidelity(self.rho_ab.matrix(), current.matrix(), &tol)?,
                wall_time: started.elapsed(),
            };
            self.observer.on_iteration(&record);
            self.trace.push(record);

            let (lambda_min, state) = best.clone().expect("set in the first round");
            if outcome.mu <= self.config.mu_tol || stalled >= 2 {
                return Ok((lambda_min, state, true));
            }
            current = outcome.next;
        }
        let (lambda_min, state) = best.expect("max_iters >= 1");
        Ok((lambda_min, state, false))
    }

    /// Step-2 value, nudged up if the solver's λ leaves a small negative
    /// eigenvalue, and floored at 1. When the solve fails on a full-rank
    /// marginal product the generalized-eigenvalue closed form stands in;
    /// this happens when the optimal slack is the zero matrix.
    fn step2(&mut self, index: usize, iterate: &BipartiteState<f64>) -> Result<f64> {
        let tol = self.config.tolerances;
        let prog = programs::build_step2(self.rho_ab, iterate)?;
        self.observer.on_problem(&format!("iter{index:03}_step2"), &prog.problem);
        let sol = conic::solve(&prog.problem, &self.settings);
        let floor = linalg::min_eigenvalue(&prog.marginal_product)?;
        let s2 = match prog.extract(&sol) {
            Ok(s2) => s2,
            Err(_) if floor > tol.psd_tol => {
                let lambda = measures::dmax_ratio(&prog.iterate, &prog.marginal_product, tol.support_tol)?;
                return Ok(lambda.max(1.0));
            }
            Err(e) => return Err(e),
        };
        let mut lambda = s2.lambda_i;
        if s2.slack_spectrum_min < 0.0 && floor > tol.psd_tol {
            lambda += -s2.slack_spectrum_min / floor;
        }
        Ok(lambda.max(1.0))
    }

    fn step3(&mut self, index: usize, lambda: f64) -> Result<Step3Outcome> {
        let eps = self.config.epsilon;
        if eps == 0.0 {
            // The ball is the single point ρ.
            let slack = self.rho_ab.marginal_product().scale(lambda) - self.rho_ab.matrix();
            let mu = linalg::min_eigenvalue(&slack)?;
            return Ok(Step3Outcome { mu, next: self.rho_ab.clone(), gap: None });
        }

        let mut domain = MuDomain::NonNegative;
        let mut prog = programs::build_step3_primal_with(self.rho_ab, lambda, eps, domain)?;
        self.observer.on_problem(&format!("iter{index:03}_step3_primal"), &prog.problem);
        let mut sol = conic::solve(&prog.problem, &self.settings);
        if !sol.is_optimal() {
            domain = MuDomain::Free;
            prog = programs::build_step3_primal_with(self.rho_ab, lambda, eps, domain)?;
            self.observer.on_problem(&format!("iter{index:03}_step3_primal_free"), &prog.problem);
            sol = conic::solve(&prog.problem, &self.settings);
        }
        let s3 = prog.extract(&sol, self.rho_ab, eps)?;

        let gap = if self.config.certify {
            let dual = programs::build_step3_dual_with(self.rho_ab, lambda, eps, domain)?;
            self.observer.on_problem(&format!("iter{index:03}_step3_dual"), &dual.problem);
            let dsol = conic::solve(&dual.problem, &self.settings);
            let cert = programs::certify_gap(&sol, &dsol, self.config.tolerances.gap_tol);
            let gap = cert.gap;
            self.certificates.push(cert);
            Some(gap)
        } else {
            None
        };
        Ok(Step3Outcome { mu: s3.mu_i, next: s3.rho_next, gap })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators;

    #[test]
    fn config_validation() {
        assert!(SeesawConfig::new(0.1).validate().is_ok());
        let mut c = SeesawConfig::new(0.1);
        c.mu_tol = 0.0;
        assert!(c.validate().is_err());
        let mut c = SeesawConfig::new(0.1);
        c.lambda_rel_tol = f64::NAN;
        assert!(c.validate().is_err());
        assert!(SeesawConfig::new(-0.1).validate().is_err());
    }

    #[test]
    fn bell_closed_form_short_circuit() {
        let phi = generators::bell::<f64>(2).unwrap();
        let r = run_seesaw(&phi, &SeesawConfig::new(0.0)).unwrap();
        assert!((r.imax - 2.0).abs() < 1e-12);
        assert_eq!(r.status, SeesawStatus::ConvergedCertified);
        assert_eq!(r.trace.len(), 1);
        assert!(r.certificates.is_empty());
    }

    #[test]
    fn bell_two_rounds_at_positive_epsilon() {
        let phi = generators::bell::<f64>(2).unwrap();
        let eps = 0.1;
        let r = run_seesaw(&phi, &SeesawConfig::new(eps)).unwrap();
        assert_eq!(r.status, SeesawStatus::ConvergedCertified);
        assert!((r.trace[0].lambda_i - 4.0).abs() < 1e-6);
        assert!(r.imax < 2.0 && r.imax > 1.5);
        assert!(r.trace.last().unwrap().mu_i <= 1e-7);
        assert_eq!(r.certificates.len(), r.trace.len());
    }

    #[test]
    fn max_iters_status_and_partial_trace() {
        let rho = generators::generate_state(&generators::StateKind::RandomMixed { dim_a: 2, dim_b: 2, rank: 4, seed: 3 })
            .unwrap();
        let mut c = SeesawConfig::new(0.1);
        c.max_iters = 1;
        let r = run_seesaw(&rho, &c).unwrap();
        assert_eq!(r.status, SeesawStatus::MaxItersReached);
        assert_eq!(r.trace.len(), 1);
    }

    #[test]
    fn uncertified_without_dual() {
        let phi = generators::bell::<f64>(2).unwrap();
        let mut c = SeesawConfig::new(0.05);
        c.certify = false;
        let r = run_seesaw(&phi, &c).unwrap();
        assert_eq!(r.status, SeesawStatus::ConvergedUncertified);
        assert!(r.trace.iter().all(|t| t.duality_gap.is_none()));
    }

    #[test]
    fn record_serializes_wall_time_in_seconds() {
        let rec = IterationRecord {
            index: 1,
            lambda_i: 2.0,
            mu_i: 0.0,
            duality_gap: None,
            fidelity_of_iterate: 1.0,
            wall_time: Duration::from_millis(1500),
        };
        let v = serde_json::to_value(&rec).unwrap();
        assert_eq!(v["wall_time"], 1.5);
        assert!(v["duality_gap"].is_null());
    }
}
