//! Campaigns that evaluate both sides of the equivalences and inequalities
//! between moduli, norms and approximation errors over parameter sweeps, and
//! summarise the observed ratios as empirical constants.

mod campaigns;
mod report;
mod suite;

pub use campaigns::{
    nonincreasing, run_campaign, run_cor34, run_jackson_corollaries, run_rmk216, run_spline_equivalence, run_thm16_chain, run_thm31, run_thm33,
    run_thm41_chains,
};
pub use report::{emit_report, render_csv, render_json, Format};
pub use suite::{core_suite, default_suite, SuiteFn};

use serde::Serialize;
use thiserror::Error;

use crate::approx::{ApproxOptions, Ratio};
use crate::fnspace::format_p;

/// Bound on pairwise ratios of equivalent quantities.
pub const C_MAX: f64 = 1e3;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error("unknown claim id '{0}'; valid ids: {list}", list = ClaimId::ALL.iter().map(|c| c.as_str()).collect::<Vec<_>>().join(", "))]
    UnknownClaim(String),
    #[error("invalid campaign configuration: {0}")]
    Config(String),
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ClaimId {
    Thm16,
    Eq1,
    Rmk216,
    Thm31,
    Cor32,
    Thm33,
    Cor34,
    Thm41A,
    Thm41B,
    Thm210,
    Thm211,
    Thm213,
    Cor42,
    Cor43,
}

impl ClaimId {
    pub const ALL: [ClaimId; 14] = [
        ClaimId::Thm16,
        ClaimId::Eq1,
        ClaimId::Rmk216,
        ClaimId::Thm31,
        ClaimId::Cor32,
        ClaimId::Thm33,
        ClaimId::Cor34,
        ClaimId::Thm41A,
        ClaimId::Thm41B,
        ClaimId::Thm210,
        ClaimId::Thm211,
        ClaimId::Thm213,
        ClaimId::Cor42,
        ClaimId::Cor43,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ClaimId::Thm16 => "THM1.6",
            ClaimId::Eq1 => "EQ1",
            ClaimId::Rmk216 => "RMK2.16",
            ClaimId::Thm31 => "THM3.1",
            ClaimId::Cor32 => "COR3.2",
            ClaimId::Thm33 => "THM3.3",
            ClaimId::Cor34 => "COR3.4",
            ClaimId::Thm41A => "THM4.1-chainA",
            ClaimId::Thm41B => "THM4.1-chainB",
            ClaimId::Thm210 => "THM2.10",
            ClaimId::Thm211 => "THM2.11",
            ClaimId::Thm213 => "THM2.13",
            ClaimId::Cor42 => "COR4.2",
            ClaimId::Cor43 => "COR4.3",
        }
    }

    pub fn parse(s: &str) -> Result<ClaimId, HarnessError> {
        ClaimId::ALL.into_iter().find(|c| c.as_str().eq_ignore_ascii_case(s.trim())).ok_or_else(|| HarnessError::UnknownClaim(s.to_string()))
    }
}

impl std::fmt::Display for ClaimId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How a record's ratio is judged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relation {
    /// Two-sided: the ratio must lie in `[1/C_MAX, C_MAX]`.
    Equivalence,
    /// `lhs <= c rhs`: only a zero right side with a positive left side fails.
    OneSided,
    /// Reported without assertion.
    Unasserted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Resolution {
    pub hgrid: usize,
    pub xgrid: usize,
    pub panels: usize,
}

impl Default for Resolution {
    fn default() -> Self {
        Resolution { hgrid: 24, xgrid: 1024, panels: 64 }
    }
}

/// Parameter columns of a record; unused entries stay `None`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Params {
    pub f: String,
    pub k: Option<usize>,
    pub r: Option<usize>,
    pub i: Option<usize>,
    pub eta: Option<usize>,
    pub alpha: f64,
    pub beta: f64,
    pub p: f64,
    pub t: f64,
    pub a: Option<f64>,
    pub sigma: Option<u32>,
    pub s: usize,
}

impl Params {
    fn key(&self) -> Vec<String> {
        let o = |v: Option<usize>| v.map_or(String::new(), |v| format!("{v:04}"));
        vec![
            self.f.clone(),
            o(self.k),
            o(self.r),
            o(self.i),
            o(self.eta),
            sortable(self.alpha),
            sortable(self.beta),
            sortable(self.p),
            sortable(self.t),
            self.a.map_or(String::new(), sortable),
            o(self.sigma.map(|s| s as usize)),
            format!("{:04}", self.s),
        ]
    }
}

/// Fixed-width rendering whose string order matches numeric order for the
/// nonnegative values used as parameters.
fn sortable(v: f64) -> String {
    if v.is_infinite() {
        "~inf".to_string()
    } else {
        format!("{:+025.12}", v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseRecord {
    pub claim: ClaimId,
    /// Which pair of quantities the record compares.
    pub relation: String,
    pub kind: Relation,
    pub case_index: usize,
    pub params: Params,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: Ratio,
    pub resolution: Resolution,
    pub seed: u64,
    /// `key=value` pairs.
    pub flags: Vec<(String, String)>,
}

impl CaseRecord {
    pub fn new(claim: ClaimId, relation: &str, kind: Relation, params: Params, lhs: f64, rhs: f64) -> Self {
        CaseRecord {
            claim,
            relation: relation.to_string(),
            kind,
            case_index: 0,
            params,
            lhs,
            rhs,
            ratio: Ratio::of(lhs, rhs),
            resolution: Resolution::default(),
            seed: 0,
            flags: Vec::new(),
        }
    }

    pub fn flag(mut self, key: &str, value: impl ToString) -> Self {
        self.flags.push((key.to_string(), value.to_string()));
        self
    }

    pub fn flags_string(&self) -> String {
        self.flags.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(";")
    }

    /// True when the record breaks the invariant of its relation kind.
    pub fn violates(&self) -> bool {
        match (self.kind, self.ratio) {
            (Relation::Unasserted, _) | (_, Ratio::BothZero) => false,
            (_, Ratio::Unbounded) => true,
            (Relation::OneSided, Ratio::Value(v)) => !v.is_finite(),
            (Relation::Equivalence, Ratio::Value(v)) => !(v.is_finite() && (1.0 / C_MAX..=C_MAX).contains(&v)),
        }
    }

    fn sort_key(&self) -> (String, Vec<String>, String) {
        (self.relation.clone(), self.params.key(), self.flags_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub claim: String,
    pub records: usize,
    pub both_zero: usize,
    pub min_ratio: Option<f64>,
    pub max_ratio: Option<f64>,
    pub median_ratio: Option<f64>,
    /// Empirical constant: the largest finite ratio over asserted records.
    pub c_hat: Option<f64>,
    pub violations: usize,
    pub skipped: Vec<String>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignReport {
    pub claim: ClaimId,
    pub records: Vec<CaseRecord>,
    pub summary: Summary,
    /// Extra tables (ratio matrices, per-cell constants) for the JSON output.
    pub detail: serde_json::Value,
}

impl CampaignReport {
    /// Sorts records by parameter tuple, numbers them and builds the summary.
    pub fn assemble(claim: ClaimId, mut records: Vec<CaseRecord>, skipped: Vec<String>, notes: Vec<String>, detail: serde_json::Value) -> Self {
        records.sort_by_key(|a| a.sort_key());
        for (i, r) in records.iter_mut().enumerate() {
            r.case_index = i;
        }
        let mut ratios: Vec<f64> = records.iter().filter_map(|r| r.ratio.value()).filter(|v| v.is_finite()).collect();
        ratios.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = if ratios.is_empty() {
            None
        } else if ratios.len() % 2 == 1 {
            Some(ratios[ratios.len() / 2])
        } else {
            Some(0.5 * (ratios[ratios.len() / 2 - 1] + ratios[ratios.len() / 2]))
        };
        let c_hat = records
            .iter()
            .filter(|r| r.kind != Relation::Unasserted)
            .filter_map(|r| r.ratio.value())
            .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))));
        let summary = Summary {
            claim: claim.as_str().to_string(),
            records: records.len(),
            both_zero: records.iter().filter(|r| r.ratio == Ratio::BothZero).count(),
            min_ratio: ratios.first().copied(),
            max_ratio: ratios.last().copied(),
            median_ratio: median,
            c_hat,
            violations: records.iter().filter(|r| r.violates()).count(),
            skipped,
            notes,
        };
        CampaignReport { claim, records, summary, detail }
    }

    pub fn passes(&self) -> bool {
        self.summary.violations == 0
    }

    /// Ratios of the asserted records for one relation.
    pub fn ratios(&self, relation: &str) -> Vec<Ratio> {
        self.records.iter().filter(|r| r.relation == relation).map(|r| r.ratio).collect()
    }

    /// One line: record count, spread, constant and violations.
    pub fn summary_line(&self) -> String {
        let s = &self.summary;
        let f = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4e}"));
        format!(
            "{}: {} records ({} both-zero), ratio min {} median {} max {}, c_hat {}, violations {}, skipped {}",
            s.claim,
            s.records,
            s.both_zero,
            f(s.min_ratio),
            f(s.median_ratio),
            f(s.max_ratio),
            f(s.c_hat),
            s.violations,
            s.skipped.len()
        )
    }
}

/// Inputs of a campaign. List-valued fields left as `None` take the
/// campaign's defaults.
#[derive(Debug, Clone)]
pub struct CampaignSpec {
    pub claim: ClaimId,
    pub seed: u64,
    pub resolution: Resolution,
    pub functions: Option<Vec<SuiteFn>>,
    /// Number of random polynomial cases (THM1.6).
    pub cases: usize,
    pub ps: Option<Vec<f64>>,
    pub weights: Option<Vec<(f64, f64)>>,
    pub ts: Option<Vec<f64>>,
    pub sigmas: Option<Vec<u32>>,
    pub n_max: usize,
    /// `A` of the restricted domain.
    pub a: f64,
    /// `ϱ` in `t = ϱ / n` for the polynomial chain.
    pub rho: f64,
    /// `|𝔻|`, the evaluation window length.
    pub window: f64,
    /// Window length at which the two-branch estimate switches branch.
    pub threshold: f64,
    pub override_hypotheses: bool,
    pub approx: ApproxOptions,
}

impl CampaignSpec {
    pub fn new(claim: ClaimId) -> Self {
        CampaignSpec {
            claim,
            seed: 0,
            resolution: Resolution::default(),
            functions: None,
            cases: 216,
            ps: None,
            weights: None,
            ts: None,
            sigmas: None,
            n_max: 12,
            a: 1.0,
            rho: 0.05,
            window: 2.0,
            threshold: 1.0,
            override_hypotheses: false,
            approx: ApproxOptions { sup_samples: 2048, panels: 128, ..ApproxOptions::default() },
        }
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub(crate) fn fmt_p(p: f64) -> String {
        format_p(p)
    }
}
