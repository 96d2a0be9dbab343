//! Report documents emitted by `compute` and `check-rank`.
//!
//! Floats are written at 17 significant digits, so parsing a report and
//! writing it again reproduces the same bytes. `started_at`, `finished_at`
//! and the per-iteration `wall_time_seconds` are the only fields that vary
//! between identical invocations.

use imax_core::programs::{GapCertificate, RankCondition, RankReport};
use imax_core::seesaw::{IterationRecord, SeesawConfig, SeesawResult, SeesawStatus};
use imax_core::state::StateDocument;
use serde::{Deserialize, Serialize};

pub const SOFTWARE_NAME: &str = "imax";
pub const SOFTWARE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Software {
    pub name: String,
    pub version: String,
}

impl Software {
    pub fn current() -> Self {
        Self { name: SOFTWARE_NAME.into(), version: SOFTWARE_VERSION.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InputDescription {
    File { path: String },
    Generator { spec: String, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceEntry {
    pub index: usize,
    pub lambda_i: f64,
    pub mu_i: f64,
    pub duality_gap: Option<f64>,
    pub fidelity_of_iterate: f64,
    pub wall_time_seconds: f64,
}

impl From<&IterationRecord> for TraceEntry {
    fn from(r: &IterationRecord) -> Self {
        Self {
            index: r.index,
            lambda_i: r.lambda_i,
            mu_i: r.mu_i,
            duality_gap: r.duality_gap,
            fidelity_of_iterate: r.fidelity_of_iterate,
            wall_time_seconds: r.wall_time.as_secs_f64(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleComparison {
    pub lambda_star: f64,
    pub imax: f64,
    pub bracket_width: f64,
    pub feasibility_calls: usize,
    pub precision: f64,
    /// Seesaw `imax` minus oracle `imax`.
    pub difference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunReport {
    pub software: Software,
    pub input: InputDescription,
    pub dim_a: usize,
    pub dim_b: usize,
    pub epsilon: f64,
    pub config: SeesawConfig,
    pub imax: f64,
    pub lambda_min: f64,
    pub status: SeesawStatus,
    pub rank_condition: RankCondition,
    pub rank_report: RankReport,
    pub trace: Vec<TraceEntry>,
    pub certificates: Vec<GapCertificate>,
    pub final_state: StateDocument,
    pub oracle: Option<OracleComparison>,
    pub started_at: String,
    pub finished_at: String,
}

impl RunReport {
    pub fn new(
        input: InputDescription,
        config: &SeesawConfig,
        result: &SeesawResult,
        oracle: Option<OracleComparison>,
        started_at: String,
    ) -> Self {
        Self {
            software: Software::current(),
            input,
            dim_a: result.final_state.dim_a(),
            dim_b: result.final_state.dim_b(),
            epsilon: config.epsilon,
            config: config.clone(),
            imax: result.imax,
            lambda_min: result.lambda_min,
            status: result.status,
            rank_condition: result.rank_condition,
            rank_report: result.rank_report,
            trace: result.trace.iter().map(TraceEntry::from).collect(),
            certificates: result.certificates.clone(),
            final_state: StateDocument::from_state(&result.final_state),
            oracle,
            started_at,
            finished_at: now(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "imax           {:.12}\nlambda_min     {:.12}\nstatus         {}\nrank_condition {}\nepsilon        {}\niterations     {}\n",
            self.imax,
            self.lambda_min,
            tag(&self.status),
            tag(&self.rank_condition),
            self.epsilon,
            self.trace.len(),
        );
        for t in &self.trace {
            out += &format!(
                "  iter {:>3}  lambda {:.12}  mu {:+.3e}  gap {}\n",
                t.index,
                t.lambda_i,
                t.mu_i,
                t.duality_gap.map_or("-".to_string(), |g| format!("{g:.2e}")),
            );
        }
        if let Some(o) = &self.oracle {
            out += &format!(
                "oracle imax    {:.12}  (difference {:+.3e}, {} feasibility calls)\n",
                o.imax, o.difference, o.feasibility_calls
            );
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RankCheckReport {
    pub software: Software,
    pub input: InputDescription,
    pub dim_a: usize,
    pub dim_b: usize,
    pub epsilon: f64,
    pub condition: RankCondition,
    pub min_eig_rho_a: f64,
    pub min_eig_rho_b: f64,
    pub perturbation_bound: f64,
    pub psd_tol: f64,
    pub started_at: String,
    pub finished_at: String,
}

impl RankCheckReport {
    pub fn new(input: InputDescription, dims: (usize, usize), epsilon: f64, r: &RankReport, started_at: String) -> Self {
        Self {
            software: Software::current(),
            input,
            dim_a: dims.0,
            dim_b: dims.1,
            epsilon,
            condition: r.condition,
            min_eig_rho_a: r.min_eig_rho_a,
            min_eig_rho_b: r.min_eig_rho_b,
            perturbation_bound: r.perturbation_bound,
            psd_tol: r.psd_tol,
            started_at,
            finished_at: now(),
        }
    }

    pub fn to_text(&self) -> String {
        format!(
            "{}\nmin_eig(rho_A)  {:.6e}\nmin_eig(rho_B)  {:.6e}\n2*epsilon       {:.6e}\npsd_tol         {:.1e}\n",
            tag(&self.condition),
            self.min_eig_rho_a,
            self.min_eig_rho_b,
            self.perturbation_bound,
            self.psd_tol,
        )
    }
}

pub fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// The serde name of a unit variant.
fn tag<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|v| v.as_str().map(str::to_string))
        .unwrap_or_default()
}
