//! Command-line front end. Every command prints one JSON document on
//! standard output; diagnostics go to standard error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::charts::{ChartError, ChartMap};
use crate::density::{DensityError, DensitySpec};
use crate::estimation::{estimate_with, read_data, EstimateConfig, EstimationError, ParametricModel};
use crate::expr::{parse, ExprError, QFunction, ZeroTestConfig};
use crate::operators::{apply_c, homogeneity_degree, identity_suite};
use crate::propriety::{check_concavity, divergence_report, ProprietyError};
use crate::rules::{catalogue, generate, RuleError, ScoringRule};
use crate::selftest;

#[derive(Parser, Debug)]
#[command(name = "localscore", version, about = "Homogeneous proper local scoring rules and score matching")]
pub struct Cli {
    /// Indent the JSON output.
    #[arg(long, global = true)]
    pub pretty: bool,
    /// Seed for random suites and multi-start optimization.
    #[arg(long, global = true, env = "LOCALSCORE_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Write the JSON to this file instead of standard output.
    #[arg(long, short, global = true)]
    pub output: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate the scoring rule `s = Λφ` of a 1-homogeneous generator.
    Generate {
        /// Generator expression in x, q0, q1, ...
        #[arg(long, allow_hyphen_values = true)]
        phi: String,
    },
    /// Run the operator identity suite on an expression.
    Verify {
        /// Expression in x, q0, q1, ...
        #[arg(long = "expr", alias = "f", allow_hyphen_values = true)]
        expr: String,
    },
    /// Decompose the divergence of two densities under a generator.
    Divergence {
        #[arg(long, allow_hyphen_values = true)]
        phi: String,
        /// Density specification JSON for P.
        #[arg(long)]
        p: PathBuf,
        /// Density specification JSON for Q.
        #[arg(long)]
        q: PathBuf,
    },
    /// Fit a parametric model by minimizing the total empirical score.
    Estimate {
        #[command(flatten)]
        rule: RuleArg,
        /// Model JSON: {"logdensity", "domain", "params"}.
        #[arg(long)]
        model: PathBuf,
        /// Data file: one value per line, or CSV.
        #[arg(long)]
        data: PathBuf,
        /// CSV column, by header name or zero-based index.
        #[arg(long)]
        column: Option<String>,
    },
    /// Pull a generator back through the chart x̄ = γ(x).
    Transform {
        #[arg(long, allow_hyphen_values = true)]
        gamma: String,
        /// Inverse chart, checked against gamma when given.
        #[arg(long, allow_hyphen_values = true)]
        delta: Option<String>,
        /// Generator in chart variables.
        #[arg(long, allow_hyphen_values = true)]
        phi: String,
    },
    /// Run the acceptance suite.
    Selftest,
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
pub struct RuleArg {
    /// Catalogued rule: log, hyvarinen, modified_hyvarinen or power:<k>.
    #[arg(long)]
    rule: Option<String>,
    /// Generator expression; the rule is `Λφ`.
    #[arg(long, allow_hyphen_values = true)]
    phi: Option<String>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("cannot read {path}: {msg}")]
    Io { path: String, msg: String },
    #[error(transparent)]
    Rule(#[from] RuleError),
    #[error(transparent)]
    Propriety(#[from] ProprietyError),
    #[error(transparent)]
    Estimation(#[from] EstimationError),
    #[error(transparent)]
    Chart(#[from] ChartError),
    #[error(transparent)]
    Density(#[from] DensityError),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

impl CliError {
    /// 2 for malformed input, 1 for everything the library rejects.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io { .. } => 2,
            CliError::Estimation(EstimationError::Model(_) | EstimationError::Data(_)) => 2,
            CliError::Density(DensityError::Json(_)) => 2,
            CliError::Expr(ExprError::Parse(_)) => 2,
            _ => 1,
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        msg: e.to_string(),
    })
}

fn expr(text: &str) -> Result<QFunction, CliError> {
    parse(text).map_err(|e| CliError::Usage(format!("bad expression `{text}`: {e}")))
}

fn density(path: &Path) -> Result<DensitySpec, CliError> {
    DensitySpec::from_json(&read(path)?).map_err(|e| match e {
        DensityError::Json(m) => CliError::Usage(format!("{}: {m}", path.display())),
        DensityError::Expr(ExprError::Parse(m)) => CliError::Usage(format!("{}: {m}", path.display())),
        other => other.into(),
    })
}

fn rule_from(arg: &RuleArg) -> Result<ScoringRule, CliError> {
    match (&arg.rule, &arg.phi) {
        (Some(name), _) => catalogue::by_name(name).map_err(|e| match e {
            RuleError::UnknownRule(_) => CliError::Usage(e.to_string()),
            other => other.into(),
        }),
        (None, Some(phi)) => Ok(generate(&expr(phi)?)?),
        (None, None) => Err(CliError::Usage("one of --rule or --phi is required".into())),
    }
}

/// Execute a parsed command and return its JSON document.
pub fn execute(cli: &Cli) -> Result<Value, CliError> {
    let value = match &cli.command {
        Command::Generate { phi } => {
            let phi = expr(phi)?;
            let rule = generate(&phi)?;
            let standard = &QFunction::q(0) * &rule.s;
            let entropy_free = apply_c(&standard).vanishes();
            json!({
                "phi": phi.to_string(),
                "s": rule.s.to_string(),
                "order": rule.order(),
                "checks": rule.checks,
                "standard_gauge": standard.to_string(),
                "standard_gauge_boundary_entropy_vanishes": entropy_free,
                "concavity": check_concavity(&phi, 200)?.verdict,
            })
        }
        Command::Verify { expr: text } => {
            let f = expr(text)?;
            let cfg = ZeroTestConfig {
                seed: cli.seed,
                ..ZeroTestConfig::default()
            };
            let mut rows = Vec::new();
            for id in identity_suite() {
                let z = id.residual(&f).is_zero_with(&cfg)?;
                rows.push(json!({
                    "identity": id.name,
                    "passed": z.is_zero,
                    "method": z.method,
                    "agreeing": z.agreeing,
                    "sampled": z.sampled,
                }));
            }
            let all = rows.iter().all(|r| r["passed"] == json!(true));
            json!({
                "expr": f.to_string(),
                "order": f.order(),
                "homogeneity_degree": homogeneity_degree(&f).map(|h| h.to_string()),
                "identities": rows,
                "all_passed": all,
            })
        }
        Command::Divergence { phi, p, q } => {
            let phi = expr(phi)?;
            serde_json::to_value(divergence_report(&phi, &density(p)?, &density(q)?)?).expect("json")
        }
        Command::Estimate {
            rule,
            model,
            data,
            column,
        } => {
            let rule = rule_from(rule)?;
            let model = ParametricModel::from_json(&read(model)?)?;
            let xs = read_data(&read(data)?, column.as_deref())?;
            let cfg = EstimateConfig {
                seed: cli.seed,
                ..EstimateConfig::default()
            };
            serde_json::to_value(estimate_with(&rule, &model, &xs, &cfg)?).expect("json")
        }
        Command::Transform { gamma, delta, phi } => {
            let chart = ChartMap::new(expr(gamma)?, delta.as_deref().map(expr).transpose()?)?;
            let phi_bar = expr(phi)?;
            let generator = chart.pull_back(&phi_bar)?.try_div(&chart.alpha)?;
            let rule = generate(&generator)?;
            let s_bar = generate(&phi_bar)?.s;
            let invariant = (&chart.pull_back(&s_bar)? - &rule.s).vanishes();
            let condition = chart.transport_boundary_condition(&phi_bar)?;
            let transport = chart.verify_operator_transport(&phi_bar).ok();
            json!({
                "gamma": chart.gamma.to_string(),
                "delta": chart.delta.as_ref().map(|d| d.to_string()),
                "alpha": chart.alpha.to_string(),
                "domain": chart.domain,
                "generator": generator.to_string(),
                "s": rule.s.to_string(),
                "checks": rule.checks,
                "score_invariant": invariant,
                "boundary_condition": condition.to_string(),
                "transport": transport,
            })
        }
        Command::Selftest => serde_json::to_value(selftest::run(cli.seed)).expect("json"),
    };
    Ok(value)
}

fn render<T: Serialize>(v: &T, pretty: bool) -> String {
    let mut s = if pretty {
        serde_json::to_string_pretty(v)
    } else {
        serde_json::to_string(v)
    }
    .expect("json");
    s.push('\n');
    s
}

/// Parse arguments, run, write output; returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let text = e.render().to_string();
            let _ = if code == 0 { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    let result = execute(&cli);
    let (code, text) = match result {
        Ok(v) => {
            let failed = v.get("all_passed") == Some(&json!(false));
            (if failed { 1 } else { 0 }, render(&v, cli.pretty))
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return e.exit_code();
        }
    };
    let written = match &cli.output {
        Some(path) => fs::write(path, &text).map_err(|e| e.to_string()),
        None => out.write_all(text.as_bytes()).map_err(|e| e.to_string()),
    };
    if let Err(msg) = written {
        let _ = writeln!(err, "error: cannot write output: {msg}");
        return 2;
    }
    code
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run(std::iter::once("localscore").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn generate_hyvarinen() {
        let (code, out, _) = call(&["generate", "--phi", "-(1/2)*q1^2/q0"]);
        assert_eq!(code, 0);
        let v: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["s"], "q2/q0 - (1/2)*q1^2/q0^2");
        assert_eq!(v["order"], 2);
        assert_eq!(v["checks"]["key_equation"]["passed"], true);
        assert_eq!(v["checks"]["homogeneity"]["passed"], true);
        assert_eq!(v["concavity"], "strictly_concave");
    }

    #[test]
    fn usage_and_domain_errors() {
        assert_eq!(call(&["generate"]).0, 2);
        assert_eq!(call(&["generate", "--phi", "q1 +"]).0, 2);
        let (code, _, err) = call(&["generate", "--phi", "q1^2"]);
        assert_eq!(code, 1);
        assert!(err.contains("error"));
        assert_eq!(call(&["divergence", "--phi", "q0", "--p", "/nonexistent", "--q", "/nonexistent"]).0, 2);
        assert_eq!(call(&["--help"]).0, 0);
    }

    #[test]
    fn verify_reports_identities() {
        let (code, out, _) = call(&["verify", "--expr", "x*q1^2/q0 + q2"]);
        assert_eq!(code, 0);
        let v: Value = serde_json::from_str(&out).unwrap();
        assert_eq!(v["all_passed"], true);
        assert_eq!(v["homogeneity_degree"], "1");
    }

    #[test]
    fn transform_log_chart() {
        let (code, out, _) = call(&["transform", "--gamma", "ln(x)", "--delta", "exp(x)", "--phi", "-(1/2)*q1^2/q0"]);
        assert_eq!(code, 0, "{out}");
        let v: Value = serde_json::from_str(&out).unwrap();
        let s = parse(v["s"].as_str().unwrap()).unwrap();
        assert_eq!(s, catalogue::modified_hyvarinen().s);
        assert_eq!(v["transport"]["all_passed"], true);
        assert_eq!(v["score_invariant"], true);
        assert_eq!(v["boundary_condition"], "-q1*p0*x^2/q0 + p1*x^2");
    }

    #[test]
    fn output_is_deterministic() {
        let a = call(&["--seed", "3", "verify", "--expr", "ln(q1/q0)*x"]);
        let b = call(&["--seed", "3", "verify", "--expr", "ln(q1/q0)*x"]);
        assert_eq!(a, b);
    }
}
