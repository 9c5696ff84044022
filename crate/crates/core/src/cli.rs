//! The `dtmod` command line.
//!
//! Exit codes: 0 success, 1 a campaign invariant failed, 2 usage or
//! configuration error, 3 a mathematical hypothesis was violated.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::approx::{best_coconvex, best_unconstrained, ApproxOptions};
use crate::config::Config;
use crate::error::Error;
use crate::fnspace::{format_p, parse_function, parse_p, JacobiWeight, PartitionSet};
use crate::harness::{emit_report, render_csv, render_json, run_campaign, CampaignSpec, ClaimId, Format, HarnessError, Resolution};
use crate::moduli::{modulus_report, Kernel, ModulusQuery, Variant};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVARIANT: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_HYPOTHESIS: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "dtmod", about = "Weighted Ditzian-Totik moduli, shape-preserving approximation and equivalence campaigns")]
pub struct Cli {
    /// JSON config file (dotted or nested keys); flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Seed; falls back to DTMOD_SEED, then to approx.seed from the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate one modulus of smoothness.
    Modulus(ModulusArgs),
    /// Best polynomial approximation, unconstrained or (co)convex.
    Approx(ApproxArgs),
    /// Run a campaign, write its report and exit 1 if an invariant fails.
    Verify(VerifyArgs),
    /// Run a campaign and print its report.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[arg(long)]
    pub hgrid: Option<usize>,
    #[arg(long)]
    pub xgrid: Option<usize>,
    #[arg(long)]
    pub panels: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ModulusArgs {
    /// Function: `kind:params` terms joined by `+`, inline JSON, or a JSON file.
    #[arg(long = "fn")]
    pub function: String,
    #[arg(long, default_value = "weighted-dt")]
    pub variant: String,
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub r: usize,
    #[arg(long)]
    pub t: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub beta: f64,
    #[arg(long, default_value = "inf")]
    pub p: String,
    #[arg(long = "A", default_value_t = 1.0)]
    pub a: f64,
    #[arg(long, default_value = "difference")]
    pub kernel: String,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Print JSON instead of text.
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ConstraintArg {
    None,
    Convex,
    Coconvex,
}

#[derive(Debug, Args)]
pub struct ApproxArgs {
    #[arg(long = "fn")]
    pub function: String,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value = "inf")]
    pub p: String,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub beta: f64,
    #[arg(long, value_enum, default_value_t = ConstraintArg::None)]
    pub constraint: ConstraintArg,
    /// Comma-separated inflection points for `--constraint coconvex`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub inflections: Vec<f64>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct CampaignArgs {
    /// Claim id, e.g. THM3.1 or THM4.1-chainA.
    #[arg(long)]
    pub claim: String,
    /// Comma-separated σ values (tail and s >= 1 estimates).
    #[arg(long, value_delimiter = ',')]
    pub sigma: Vec<u32>,
    /// Run σ = 4 anyway, flagging the records.
    #[arg(long)]
    pub override_hypotheses: bool,
    #[command(flatten)]
    pub grid: GridArgs,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub campaign: CampaignArgs,
    /// Report path; `-` prints to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    pub format: String,
    /// Additional JSON report path.
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[command(flatten)]
    pub campaign: CampaignArgs,
    #[arg(long, default_value = "csv")]
    pub format: String,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// A failure with its exit code.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure { code: EXIT_USAGE, message: message.into() }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_hypothesis_violation() { EXIT_HYPOTHESIS } else { EXIT_USAGE };
        Failure { code, message: e.to_string() }
    }
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        Error::from(e).into()
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::usage(e.to_string())
    }
}

struct Ctx {
    config: Config,
    seed: u64,
}

impl Ctx {
    fn header(&self, what: &str) -> Vec<String> {
        let mut h = vec![format!("dtmod {what}"), format!("seed = {}", self.seed)];
        h.extend(self.config.echo());
        h
    }

    fn resolution(&self, g: &GridArgs) -> Resolution {
        Resolution {
            hgrid: g.hgrid.unwrap_or(self.config.mod_hgrid),
            xgrid: g.xgrid.unwrap_or(self.config.mod_xgrid),
            panels: g.panels.unwrap_or(self.config.quad_panels),
        }
    }
}

/// Runs the CLI on `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I, seed_env: Option<String>, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = if code == 0 { write!(out, "{}", e.render()) } else { write!(err, "{}", e.render()) };
            return code;
        }
    };
    match dispatch(cli, seed_env, out) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn dispatch(cli: Cli, seed_env: Option<String>, out: &mut dyn Write) -> Result<i32, Failure> {
    let mut config = Config::default();
    if let Some(path) = &cli.config {
        config.merge_file(path).map_err(|e| Failure::usage(e.to_string()))?;
    }
    let seed = match (cli.seed, seed_env) {
        (Some(s), _) => s,
        (None, Some(s)) => s.trim().parse().map_err(|_| Failure::usage(format!("DTMOD_SEED = '{s}' is not an unsigned integer")))?,
        (None, None) => config.approx_seed,
    };
    let ctx = Ctx { config, seed };
    match cli.command {
        Command::Modulus(a) => cmd_modulus(&ctx, a, out),
        Command::Approx(a) => cmd_approx(&ctx, a, out),
        Command::Verify(a) => cmd_verify(&ctx, a, out),
        Command::Report(a) => cmd_report(&ctx, a, out),
    }
}

fn parse_fn(s: &str) -> Result<crate::FunctionExpr, Failure> {
    parse_function(s).map_err(|e| Failure::usage(e.to_string()))
}

fn parse_exponent(s: &str) -> Result<f64, Failure> {
    parse_p(s).map_err(|e| Failure::usage(e.to_string()))
}

fn cmd_modulus(ctx: &Ctx, a: ModulusArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let f = parse_fn(&a.function)?.prepare();
    let variant = Variant::parse(&a.variant)
        .ok_or_else(|| Failure::usage(format!("unknown variant '{}'; expected one of {}", a.variant, Variant::ALL.map(|v| v.name()).join(", "))))?;
    let kernel = Kernel::parse(&a.kernel).ok_or_else(|| Failure::usage(format!("unknown kernel '{}'; expected difference or stieltjes", a.kernel)))?;
    let p = parse_exponent(&a.p)?;
    let res = ctx.resolution(&a.grid);
    let mut q = ModulusQuery::new(variant, a.k, a.r, a.t)
        .weight(JacobiWeight { alpha: a.alpha, beta: a.beta })
        .p(p)
        .a(a.a)
        .kernel(kernel)
        .resolution(res.hgrid, res.xgrid, res.panels);
    q.kernel_depth = ctx.config.mod_kernel_depth;
    let rep = modulus_report(&q, &f).map_err(|e| Failure::from(Error::from(e)))?;
    if a.json {
        let v = serde_json::json!({
            "header": ctx.header("modulus"),
            "value": rep.value,
            "argmax_h": rep.argmax_h,
            "variant": variant.name(),
            "k": a.k, "r": a.r, "t": a.t, "p": format_p(p), "alpha": a.alpha, "beta": a.beta, "A": a.a,
            "kernel": kernel.name(),
            "hgrid": res.hgrid, "xgrid": res.xgrid, "panels": res.panels,
            "h_samples": rep.grid.len(),
        });
        writeln!(out, "{}", serde_json::to_string_pretty(&v).expect("serialisable"))?;
    } else {
        for line in ctx.header("modulus") {
            writeln!(out, "# {line}")?;
        }
        writeln!(out, "value = {}", rep.value)?;
        writeln!(out, "argmax_h = {}", rep.argmax_h)?;
        writeln!(
            out,
            "variant = {} k = {} r = {} t = {} p = {} alpha = {} beta = {} A = {} kernel = {}",
            variant.name(),
            a.k,
            a.r,
            a.t,
            format_p(p),
            a.alpha,
            a.beta,
            a.a,
            kernel.name()
        )?;
        writeln!(out, "hgrid = {} xgrid = {} panels = {} h_samples = {}", res.hgrid, res.xgrid, res.panels, rep.grid.len())?;
    }
    Ok(EXIT_OK)
}

fn cmd_approx(ctx: &Ctx, a: ApproxArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let f = parse_fn(&a.function)?.prepare();
    let p = parse_exponent(&a.p)?;
    let w = JacobiWeight::new(a.alpha, a.beta, p).map_err(|e| Failure::from(Error::from(e)))?;
    let opts = ApproxOptions { iters: ctx.config.approx_iters, restarts: ctx.config.approx_restarts, ..ApproxOptions::default() }.weight(w).p(p).seed(ctx.seed);
    if a.constraint != ConstraintArg::Coconvex && !a.inflections.is_empty() {
        return Err(Failure::usage("--inflections requires --constraint coconvex"));
    }
    let cand = match a.constraint {
        ConstraintArg::None => best_unconstrained(&f, a.n, &opts),
        ConstraintArg::Convex => best_coconvex(&f, a.n, &PartitionSet::inflection(vec![]).expect("empty set"), &opts),
        ConstraintArg::Coconvex => {
            let y = PartitionSet::inflection(a.inflections.clone()).map_err(|e| Failure::usage(e.to_string()))?;
            best_coconvex(&f, a.n, &y, &opts)
        }
    }
    .map_err(|e| Failure::from(Error::from(e)))?;
    let constraint = format!("{:?}", a.constraint).to_ascii_lowercase();
    if a.json {
        let v = serde_json::json!({
            "header": ctx.header("approx"),
            "n": a.n,
            "p": format_p(p),
            "alpha": a.alpha,
            "beta": a.beta,
            "constraint": constraint,
            "inflections": a.inflections,
            "error": cand.error,
            "monomial_coefficients": cand.monomial(),
            "chebyshev_coefficients": cand.coeffs,
            "converged": cand.converged,
            "binding": cand.binding,
            "heuristic": cand.heuristic,
            "max_violation": cand.max_violation,
        });
        writeln!(out, "{}", serde_json::to_string_pretty(&v).expect("serialisable"))?;
    } else {
        for line in ctx.header("approx") {
            writeln!(out, "# {line}")?;
        }
        writeln!(out, "error = {}", cand.error)?;
        writeln!(out, "n = {} p = {} alpha = {} beta = {} constraint = {}", a.n, format_p(p), a.alpha, a.beta, constraint)?;
        let join = |v: &[f64]| v.iter().map(|c| format!("{c}")).collect::<Vec<_>>().join(",");
        writeln!(out, "monomial = {}", join(&cand.monomial()))?;
        writeln!(out, "chebyshev = {}", join(&cand.coeffs))?;
        writeln!(out, "converged = {} binding = {} heuristic = {} max_violation = {}", cand.converged, cand.binding, cand.heuristic, cand.max_violation)?;
    }
    Ok(EXIT_OK)
}

fn campaign_spec(ctx: &Ctx, a: &CampaignArgs) -> Result<CampaignSpec, Failure> {
    let claim = ClaimId::parse(&a.claim)?;
    let mut spec = CampaignSpec::new(claim).seed(ctx.seed);
    spec.resolution = ctx.resolution(&a.grid);
    spec.cases = ctx.config.campaign_cases;
    spec.rho = ctx.config.campaign_rho;
    spec.window = ctx.config.campaign_window;
    spec.threshold = ctx.config.campaign_threshold;
    spec.n_max = ctx.config.campaign_n_max;
    spec.override_hypotheses = a.override_hypotheses;
    spec.approx.iters = ctx.config.approx_iters;
    spec.approx.restarts = ctx.config.approx_restarts;
    if !a.sigma.is_empty() {
        if !matches!(claim, ClaimId::Thm213 | ClaimId::Cor43) {
            return Err(Failure::usage(format!("--sigma applies to THM2.13 and COR4.3, not {claim}")));
        }
        spec.sigmas = Some(a.sigma.clone());
    }
    Ok(spec)
}

fn parse_format(s: &str) -> Result<Format, Failure> {
    Format::parse(s).ok_or_else(|| Failure::usage(format!("unknown format '{s}'; expected csv or json")))
}

fn cmd_verify(ctx: &Ctx, a: VerifyArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let format = parse_format(&a.format)?;
    let spec = campaign_spec(ctx, &a.campaign)?;
    let header = ctx.header(&format!("verify --claim {}", spec.claim));
    let report = run_campaign(&spec)?;
    match &a.out {
        Some(p) if p.as_os_str() == "-" => {
            let body = match format {
                Format::Csv => render_csv(&report, &header),
                Format::Json => render_json(&report, &header),
            };
            out.write_all(body.as_bytes())?;
        }
        Some(p) => {
            let path = emit_report(&report, format, p, &header)?;
            writeln!(out, "wrote {}", path.display())?;
        }
        None => {}
    }
    if let Some(p) = &a.json {
        let path = emit_report(&report, Format::Json, p, &header)?;
        writeln!(out, "wrote {}", path.display())?;
    }
    writeln!(out, "{}", report.summary_line())?;
    if report.passes() {
        Ok(EXIT_OK)
    } else {
        writeln!(out, "invariant failed: {} record(s) violate their relation", report.summary.violations)?;
        Ok(EXIT_INVARIANT)
    }
}

fn cmd_report(ctx: &Ctx, a: ReportArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let format = parse_format(&a.format)?;
    let spec = campaign_spec(ctx, &a.campaign)?;
    let header = ctx.header(&format!("report --claim {}", spec.claim));
    let report = run_campaign(&spec)?;
    match a.out.as_ref().filter(|p| p.as_os_str() != "-") {
        Some(p) => {
            let path = emit_report(&report, format, p, &header)?;
            writeln!(out, "wrote {}", path.display())?;
        }
        None => {
            let body = match format {
                Format::Csv => render_csv(&report, &header),
                Format::Json => render_json(&report, &header),
            };
            out.write_all(body.as_bytes())?;
        }
    }
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let mut full = vec!["dtmod"];
        full.extend_from_slice(args);
        let code = run(full, None, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn unknown_claim_lists_valid_ids() {
        let (code, _, err) = call(&["verify", "--claim", "THM9.9"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("THM4.1-chainA") && err.contains("COR4.3"), "{err}");
    }

    #[test]
    fn sigma_four_is_a_usage_error() {
        let (code, _, err) = call(&["verify", "--claim", "THM2.13", "--sigma", "4"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("σ ≠ 4"), "{err}");
    }

    #[test]
    fn negative_alpha_in_sup_norm_is_a_hypothesis_violation() {
        let (code, _, err) = call(&["modulus", "--fn", "poly:0,0,1", "--variant", "weighted-dt", "--k", "2", "--t", "0.5", "--alpha", "-1", "--p", "inf"]);
        assert_eq!(code, EXIT_HYPOTHESIS);
        assert!(err.contains("[0, inf)"), "{err}");
    }

    #[test]
    fn bad_flags_exit_two() {
        assert_eq!(call(&["modulus", "--fn", "poly:0,0,1"]).0, EXIT_USAGE);
        assert_eq!(call(&["modulus", "--fn", "nope:1", "--k", "1", "--t", "0.1"]).0, EXIT_USAGE);
        assert_eq!(call(&["modulus", "--fn", "poly:1", "--k", "1", "--t", "0.1", "--variant", "zeta"]).0, EXIT_USAGE);
    }

    #[test]
    fn seed_precedence() {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let args = ["dtmod", "modulus", "--fn", "poly:1", "--k", "1", "--t", "0.1"];
        run(args, Some("11".into()), &mut out, &mut err);
        assert!(String::from_utf8(out).unwrap().contains("# seed = 11"));
        let mut out = Vec::new();
        let args = ["dtmod", "--seed", "5", "modulus", "--fn", "poly:1", "--k", "1", "--t", "0.1"];
        run(args, Some("11".into()), &mut out, &mut err);
        assert!(String::from_utf8(out).unwrap().contains("# seed = 5"));
    }
}
