use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use hdiv::avoid::{self, AvoidanceScaffold};
use hdiv::constants::{self, Frozen};
use hdiv::harness::{self, CalibrationPlan, ExperimentConfig, Field, VerifyScope};
use hdiv::rational;
use hdiv::{fill, PLChain};

#[derive(Parser)]
#[command(name = "hdiv", version, about = "Multiscale fillings of cycles that avoid the origin")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Fill a cycle with the multiscale construction.
    Fill(Opts),
    /// Fill a cycle while keeping away from the origin, with a certificate.
    AvoidFill(Opts),
    /// Run the divergence experiment over a list of radii.
    Experiment(Opts),
    /// Build and check the replacement tables around the origin.
    Scaffold(Opts),
    /// Bracket the dilation constant of a group.
    Carnot(Opts),
    /// Run the invariant battery.
    Verify(Opts),
    /// Fit a growth exponent to experiment output.
    Fit(Opts),
    /// Measure the empirical constants and print a manifest.
    Calibrate(Opts),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Clone, Debug, Default)]
struct Opts {
    /// key=value file; explicit flags win.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    /// Avoidance radius, a rational such as `13` or `25/2`.
    #[arg(long)]
    r: Option<String>,
    #[arg(long)]
    eps: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated radii.
    #[arg(long)]
    radii: Option<String>,
    /// `abelian:<n>` or `heisenberg:1`.
    #[arg(long)]
    group: Option<String>,
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long)]
    no_timestamp: bool,
    /// Where `experiment` writes its JSON summary next to the CSV.
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Random inputs per dimension pair for `calibrate`.
    #[arg(long, default_value_t = 1000)]
    deformations: usize,
    /// Record field for `fit`.
    #[arg(long, default_value = "mass_b")]
    field: String,
}

/// Flags merged over the config file, as key=value settings.
fn settings(o: &Opts) -> Result<BTreeMap<String, String>> {
    let mut kv = match &o.config {
        Some(p) => constants::parse_key_values(&read(p)?)?,
        None => BTreeMap::new(),
    };
    let mut put = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            kv.insert(k.to_string(), v);
        }
    };
    put("n", o.n.map(|x| x.to_string()));
    put("k", o.k.map(|x| x.to_string()));
    put("r", o.r.clone());
    put("eps", o.eps.clone());
    put("alpha", o.alpha.map(|x| x.to_string()));
    put("samples", o.samples.map(|x| x.to_string()));
    put("seed", o.seed.map(|x| x.to_string()));
    put("radii", o.radii.clone());
    put("group", o.group.clone());
    put("format", o.format.map(|f| format!("{f:?}").to_lowercase()));
    put("out", o.out.as_ref().map(|p| p.display().to_string()));
    put("in", o.input.as_ref().map(|p| p.display().to_string()));
    if o.no_timestamp {
        put("no_timestamp", Some("true".into()));
    }
    Ok(kv)
}

fn read(p: &Path) -> Result<String> {
    fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))
}

fn emit(out: Option<&str>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {p}")),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn timestamp(kv: &BTreeMap<String, String>) -> Option<u64> {
    if kv.get("no_timestamp").is_some_and(|v| v == "true" || v == "1") {
        None
    } else {
        SystemTime::now().duration_since(UNIX_EPOCH).ok().map(|d| d.as_secs())
    }
}

fn format_of(kv: &BTreeMap<String, String>, default: Format) -> Result<Format> {
    match kv.get("format").map(String::as_str) {
        None => Ok(default),
        Some("csv") => Ok(Format::Csv),
        Some("json") => Ok(Format::Json),
        Some(f) => bail!("unknown format `{f}`"),
    }
}

fn get<T: std::str::FromStr>(kv: &BTreeMap<String, String>, key: &str, default: T) -> Result<T> {
    match kv.get(key) {
        Some(v) => v.parse().map_err(|_| anyhow::anyhow!("bad value `{v}` for {key}")),
        None => Ok(default),
    }
}

/// The cycle from `--in`, or a generated one.
fn cycle(kv: &BTreeMap<String, String>) -> Result<(PLChain, rational::Q)> {
    let r = rational::parse_q(kv.get("r").map_or("16", String::as_str))?;
    let a = match kv.get("in") {
        Some(p) => PLChain::from_text(&read(Path::new(p))?)?,
        None => harness::gen_avoidant_cycle(
            get(kv, "k", 0)?,
            get(kv, "n", 2)?,
            &r,
            get(kv, "alpha", 8.0)?,
            get(kv, "seed", 1)?,
        )?,
    };
    Ok((a, r))
}

fn run_fill(kv: &BTreeMap<String, String>) -> Result<()> {
    let (a, _) = cycle(kv)?;
    let f = fill(&a)?;
    if !hdiv::multiscale::verify_filling(&a, &f.b) {
        bail!("filling does not bound the cycle");
    }
    match format_of(kv, Format::Json)? {
        Format::Json => {
            let doc = serde_json::json!({
                "estimator": harness::ESTIMATOR_LABEL,
                "mass_a": a.mass(),
                "mass_b": f.b.mass(),
                "ledger": f.ledger,
            });
            println!("{}", serde_json::to_string_pretty(&doc)?);
            if let Some(p) = kv.get("out") {
                fs::write(p, f.b.to_text())?;
            }
        }
        Format::Csv => emit(kv.get("out").map(String::as_str), &f.b.to_text())?,
    }
    Ok(())
}

fn run_avoid_fill(kv: &BTreeMap<String, String>) -> Result<()> {
    let (a, r) = cycle(kv)?;
    let eps = rational::parse_q(kv.get("eps").map_or("1", String::as_str))?;
    let k = a.dim().context("empty cycle")?;
    let s = AvoidanceScaffold::build(a.ambient(), k, &eps)?;
    let c = avoid::avoidant_fill(&a, &r, &s)?;
    let check = avoid::verify_certificate(&a, &c);
    if !check.ok() {
        bail!("certificate check failed: {check:?}");
    }
    let doc = serde_json::json!({
        "estimator": harness::ESTIMATOR_LABEL,
        "check": check,
        "certificate": c,
    });
    println!("{}", serde_json::to_string_pretty(&doc)?);
    if let Some(p) = kv.get("out") {
        fs::write(p, c.b_tilde.to_text())?;
    }
    Ok(())
}

fn run_experiment(kv: &BTreeMap<String, String>, summary: Option<&Path>) -> Result<()> {
    let cfg = ExperimentConfig::from_key_values(kv)?;
    let ts = timestamp(kv);
    let (s, records) = harness::run_experiment(&cfg)?;
    let sum = harness::summarize(&cfg, &s, &records, ts);
    let json = serde_json::to_string_pretty(&sum)? + "\n";
    let out = kv.get("out").map(String::as_str);
    match format_of(kv, Format::Csv)? {
        Format::Csv => emit(out, &harness::to_csv(&records, ts))?,
        Format::Json => emit(out, &json)?,
    }
    if let Some(p) = summary {
        fs::write(p, json)?;
    }
    Ok(())
}

fn run_scaffold(kv: &BTreeMap<String, String>) -> Result<()> {
    let n = get(kv, "n", 3)?;
    let k = get(kv, "k", 1)?;
    let eps = rational::parse_q(kv.get("eps").map_or("1", String::as_str))?;
    let s = AvoidanceScaffold::build(n, k, &eps)?;
    let rep = avoid::verify_scaffold(&s);
    let doc = serde_json::json!({
        "n": n,
        "k": k,
        "eps": rational::format_q(&eps),
        "N": s.big_n,
        "x_o": s.x_o,
        "M": s.m,
        "M_prime": s.m_prime,
        "D_tilde": s.d_tilde(),
        "D_Q": s.d_q(),
        "r_min": s.r_min(),
        "guarantee_threshold": s.guarantee_threshold(),
        "rho_star": s.rho_guarantee(),
        "report": rep,
    });
    println!("{}", serde_json::to_string_pretty(&doc)?);
    if let Some(p) = kv.get("out") {
        fs::write(p, s.to_text())?;
    }
    if !rep.ok() {
        bail!("scaffold check failed");
    }
    Ok(())
}

fn run_carnot(kv: &BTreeMap<String, String>) -> Result<()> {
    let group = kv.get("group").map_or("heisenberg:1", String::as_str);
    let r: f64 = rational::to_f64(&rational::parse_q(kv.get("r").map_or("1", String::as_str))?);
    let samples = get(kv, "samples", 10_000)?;
    let c = harness::carnot_constant(group, r, samples, get(kv, "seed", 1)?)?;
    let doc = serde_json::json!({ "group": group, "r": r, "samples": samples, "lower": c.lower, "upper": c.upper });
    println!("{}", serde_json::to_string_pretty(&doc)?);
    Ok(())
}

fn run_verify(kv: &BTreeMap<String, String>) -> Result<bool> {
    let rep = harness::verify_suite(&VerifyScope {
        cases: get(kv, "samples", 20)?,
        seed: get(kv, "seed", 7)?,
        mutations: true,
    });
    let text = serde_json::to_string_pretty(&rep)? + "\n";
    emit(kv.get("out").map(String::as_str), &text)?;
    for c in &rep.checks {
        eprintln!("{} {}", if c.passed { "PASS" } else { "FAIL" }, c.name);
    }
    Ok(rep.ok())
}

fn run_fit(kv: &BTreeMap<String, String>, field: &str) -> Result<()> {
    let p = kv.get("in").context("fit needs --in <csv>")?;
    let records = harness::parse_csv(&read(Path::new(p))?)?;
    let field = Field::parse(field)?;
    let fit = harness::fit_exponent(&records, field)?;
    let doc = serde_json::json!({
        "estimator": harness::ESTIMATOR_LABEL,
        "points": harness::max_by_radius(&records, field),
        "slope": fit.slope,
        "intercept": fit.intercept,
        "residual": fit.residual,
    });
    println!("{}", serde_json::to_string_pretty(&doc)?);
    Ok(())
}

fn run_calibrate(kv: &BTreeMap<String, String>, deformations: usize) -> Result<()> {
    let plan = CalibrationPlan {
        deformations,
        samples: get(kv, "samples", 6)?,
        seed: get(kv, "seed", 2024)?,
    };
    let cal = harness::calibrate(&plan)?;
    eprintln!("{}", serde_json::to_string_pretty(&cal)?);
    let frozen: Frozen = cal.frozen();
    emit(kv.get("out").map(String::as_str), &frozen.to_manifest())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = (|| -> Result<bool> {
        match &cli.cmd {
            Cmd::Fill(o) => run_fill(&settings(o)?).map(|_| true),
            Cmd::AvoidFill(o) => run_avoid_fill(&settings(o)?).map(|_| true),
            Cmd::Experiment(o) => run_experiment(&settings(o)?, o.summary.as_deref()).map(|_| true),
            Cmd::Scaffold(o) => run_scaffold(&settings(o)?).map(|_| true),
            Cmd::Carnot(o) => run_carnot(&settings(o)?).map(|_| true),
            Cmd::Verify(o) => run_verify(&settings(o)?),
            Cmd::Fit(o) => run_fit(&settings(o)?, &o.field).map(|_| true),
            Cmd::Calibrate(o) => run_calibrate(&settings(o)?, o.deformations).map(|_| true),
        }
    })();
    match res {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
