//! Experiment driver for the trace-weight laboratory.
//!
//! Every subcommand validates its configuration (exit 1 on a bad or missing
//! field, naming it), runs the experiment through the library, and emits CSV
//! data, a JSON summary tagged with the measured claim, and a line in
//! `report.txt`. Identical configuration and seeds produce byte-identical
//! outputs regardless of `--threads`.

mod config;

use anyhow::{anyhow, bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use config::{parse_seeds, parse_theta, Config};
use num_complex::Complex64;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use tracelab::averages::{convergence_run, maximal_estimate};
use tracelab::bounds::{
    correlation_boundary_bound, correlation_sum, frequency_sup, interval_sum_scan,
    max_over_largest_decade, moment_exceedance, sarnak_run, weyl_sum, BoundReport, ShiftTuple,
};
use tracelab::dynamics::{
    adversarial_sequence, exp_observable_for, sequence_shift, DynSystem, Observable, State,
};
use tracelab::modular::{parse_prime_set, Prime, PrimeSet};
use tracelab::spectral::{
    approx_search, coverage_experiment, emphatic_check, rotation_norm_exact, skew_counterexample,
    ApproxRecord, Theta,
};
use tracelab::weights::{make_weight, weight_stats, WeightFamily, WeightPlan};
use tracelab::{Error as LabError, SCHEMA};

#[derive(Parser)]
#[command(
    name = "tracelab",
    about = "Weight tables modulo primes and the ergodic averages they drive",
    version
)]
struct Cli {
    /// Config file of key=value lines supplying defaults for any flag.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (0 = library default).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Data table format.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

impl std::str::FromStr for Format {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> anyhow::Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(anyhow!("expected csv or json, got '{s}'")),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Emit one weight table with its metadata and moments.
    Weight {
        #[arg(long)]
        family: Option<WeightFamily>,
        #[arg(long)]
        p: Option<u64>,
        /// Alias for --format on this subcommand.
        #[arg(long, value_enum)]
        emit: Option<Format>,
    },
    /// Weighted averages along a prime set with convergence diagnostics.
    Average {
        #[arg(long)]
        system: Option<String>,
        #[arg(long)]
        obs: Option<String>,
        #[arg(long)]
        weight: Option<String>,
        #[arg(long)]
        primes: Option<String>,
        #[arg(long)]
        seeds: Option<String>,
    },
    /// Monte-Carlo L2 estimate of the maximal function over the prime set.
    Maximal {
        #[arg(long)]
        system: Option<String>,
        #[arg(long)]
        obs: Option<String>,
        #[arg(long)]
        weight: Option<String>,
        #[arg(long)]
        primes: Option<String>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        seed_base: Option<u64>,
    },
    /// Envelope scans: interval sums, phased sums, frequency sup,
    /// correlations, moment exceedance.
    Bounds {
        #[arg(long)]
        scan: Option<String>,
        #[arg(long)]
        family: Option<WeightFamily>,
        #[arg(long)]
        p: Option<u64>,
        #[arg(long)]
        stride: Option<usize>,
        /// Real polynomial coefficients, lowest order first.
        #[arg(long)]
        poly: Option<String>,
        #[arg(long)]
        lo: Option<i64>,
        #[arg(long)]
        hi: Option<i64>,
        #[arg(long)]
        oversample: Option<usize>,
        /// Shift tuple "a1,a2;b1,b2".
        #[arg(long)]
        shifts: Option<String>,
        /// Enumerate all tuples "arity:maxshift" instead of one tuple.
        #[arg(long)]
        enumerate: Option<String>,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        eps: Option<f64>,
        /// Window sequence: "ones" or "rotation:<theta>".
        #[arg(long)]
        alpha: Option<String>,
    },
    /// Zero-entropy orbit averages along the primes from a fixed start.
    Sarnak {
        #[arg(long)]
        system: Option<String>,
        #[arg(long)]
        obs: Option<String>,
        #[arg(long)]
        weight: Option<String>,
        #[arg(long)]
        primes: Option<String>,
        /// Starting point: scalar, or "x,y" for pair systems.
        #[arg(long)]
        x0: Option<String>,
    },
    /// Prime-denominator approximations of theta and their scaled-gap
    /// diagnostics.
    Spectral {
        #[arg(long)]
        theta: Option<String>,
        #[arg(long)]
        x: Option<u64>,
        #[arg(long)]
        delta: Option<f64>,
    },
    /// Random-interval coverage of the circle by primes up to X.
    Coverage {
        #[arg(long)]
        c: Option<f64>,
        #[arg(long)]
        x: Option<u64>,
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        seeds: Option<String>,
    },
    /// The convergence counterexamples: block-residue sequence or the
    /// skew-product two-branch run.
    Counterexample {
        /// "adversarial" or "skew".
        #[arg(long)]
        kind: Option<String>,
        #[arg(long)]
        primes: Option<String>,
        /// Control seeds for the adversarial random baseline.
        #[arg(long)]
        seeds: Option<String>,
        #[arg(long)]
        y: Option<f64>,
        #[arg(long)]
        x0: Option<f64>,
        #[arg(long)]
        x_full: Option<u64>,
        #[arg(long)]
        c: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Fast invariant suite (transform kernel, Kloosterman tables, Fejér
    /// identities, transfer relation).
    Selftest,
}

struct Emitter {
    out: PathBuf,
    format: Format,
    report: String,
}

impl Emitter {
    fn new(out: &Path, format: Format) -> anyhow::Result<Self> {
        std::fs::create_dir_all(out)
            .with_context(|| format!("creating output directory {}", out.display()))?;
        Ok(Emitter {
            out: out.to_path_buf(),
            format,
            report: String::new(),
        })
    }

    fn write_raw(&self, name: &str, contents: &str) -> anyhow::Result<PathBuf> {
        let path = self.out.join(name);
        std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    /// Writes a data table as CSV or as a JSON array of row objects.
    fn write_table(
        &self,
        base: &str,
        csv: &str,
        json_rows: serde_json::Value,
    ) -> anyhow::Result<PathBuf> {
        match self.format {
            Format::Csv => self.write_raw(&format!("{base}.csv"), csv),
            Format::Json => self.write_raw(
                &format!("{base}.json"),
                &serde_json::to_string_pretty(&json_rows)?,
            ),
        }
    }

    fn write_summary(&self, base: &str, summary: &serde_json::Value) -> anyhow::Result<PathBuf> {
        self.write_raw(
            &format!("{base}_summary.json"),
            &serde_json::to_string_pretty(summary)?,
        )
    }

    fn note(&mut self, line: &str) {
        println!("{line}");
        self.report.push_str(line);
        self.report.push('\n');
    }

    fn finish(&self) -> anyhow::Result<()> {
        if !self.report.is_empty() {
            self.write_raw("report.txt", &self.report)?;
        }
        Ok(())
    }
}

fn slug(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_alphanumeric() || c == '.' { c } else { '-' })
        .collect()
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(err) => {
            eprintln!("error: {err:#}");
            let budget = err
                .chain()
                .any(|c| matches!(c.downcast_ref::<LabError>(), Some(LabError::BudgetExceeded(_))));
            std::process::exit(if budget { 2 } else { 1 });
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = Config::load(cli.config.as_deref())?;
    let threads: usize = cfg.resolve("threads", cli.threads, Some(0))?;
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("thread pool")?;
    }
    let out: PathBuf = cfg.resolve("out", cli.out, Some(PathBuf::from("out")))?;
    let format: Format = cfg.resolve("format", cli.format, Some(Format::Csv))?;
    let mut em = Emitter::new(&out, format)?;
    match cli.command {
        Command::Weight { family, p, emit } => cmd_weight(&cfg, &mut em, family, p, emit)?,
        Command::Average {
            system,
            obs,
            weight,
            primes,
            seeds,
        } => cmd_average(&cfg, &mut em, system, obs, weight, primes, seeds)?,
        Command::Maximal {
            system,
            obs,
            weight,
            primes,
            samples,
            seed_base,
        } => cmd_maximal(&cfg, &mut em, system, obs, weight, primes, samples, seed_base)?,
        Command::Bounds {
            scan,
            family,
            p,
            stride,
            poly,
            lo,
            hi,
            oversample,
            shifts,
            enumerate,
            m,
            eps,
            alpha,
        } => cmd_bounds(
            &cfg, &mut em, scan, family, p, stride, poly, lo, hi, oversample, shifts, enumerate,
            m, eps, alpha,
        )?,
        Command::Sarnak {
            system,
            obs,
            weight,
            primes,
            x0,
        } => cmd_sarnak(&cfg, &mut em, system, obs, weight, primes, x0)?,
        Command::Spectral { theta, x, delta } => cmd_spectral(&cfg, &mut em, theta, x, delta)?,
        Command::Coverage { c, x, grid, seeds } => cmd_coverage(&cfg, &mut em, c, x, grid, seeds)?,
        Command::Counterexample {
            kind,
            primes,
            seeds,
            y,
            x0,
            x_full,
            c,
            seed,
        } => cmd_counterexample(&cfg, &mut em, kind, primes, seeds, y, x0, x_full, c, seed)?,
        Command::Selftest => cmd_selftest(&mut em)?,
    }
    em.finish()
}

fn resolve_prime_set(cfg: &Config, flag: Option<String>) -> anyhow::Result<PrimeSet> {
    let spec: String = cfg.resolve("primes", flag, None)?;
    parse_prime_set(&spec).map_err(|e| anyhow!("invalid value for field 'primes': {e}"))
}

fn resolve_system(cfg: &Config, flag: Option<String>) -> anyhow::Result<DynSystem> {
    let raw: String = cfg.resolve("system", flag, None)?;
    let raw = if let Some(rest) = raw.strip_prefix("rotation:") {
        format!("rotation:{}", parse_theta(rest)?)
    } else {
        raw
    };
    raw.parse::<DynSystem>()
        .map_err(|e| anyhow!("invalid value for field 'system': {e}"))
}

fn resolve_observable(cfg: &Config, flag: Option<String>, system: &DynSystem) -> anyhow::Result<Observable> {
    let raw: String = cfg.resolve("obs", flag, None)?;
    if raw == "expx" {
        return Ok(exp_observable_for(system));
    }
    raw.parse::<Observable>()
        .map_err(|e| anyhow!("invalid value for field 'obs': {e}"))
}

fn resolve_plan(cfg: &Config, flag: Option<String>) -> anyhow::Result<WeightPlan> {
    let raw: String = cfg.resolve("weight", flag, None)?;
    raw.parse::<WeightPlan>()
        .map_err(|e| anyhow!("invalid value for field 'weight': {e}"))
}

fn rows_json(report: &tracelab::averages::AverageReport) -> serde_json::Value {
    serde_json::json!(report.rows)
}

fn cmd_weight(
    cfg: &Config,
    em: &mut Emitter,
    family: Option<WeightFamily>,
    p: Option<u64>,
    emit: Option<Format>,
) -> anyhow::Result<()> {
    let family: WeightFamily = cfg.resolve("family", family, None)?;
    let pv: u64 = cfg.resolve("p", p, None)?;
    if let Some(f) = emit {
        em.format = f;
    }
    let prime = Prime::new(pv).map_err(|e| anyhow!("invalid value for field 'p': {e}"))?;
    let w = make_weight(&family, prime)?;
    let stats = weight_stats(&w);
    let base = format!("weight_{}_{}", slug(&family.to_string()), pv);
    let json_rows = serde_json::json!(w
        .values()
        .iter()
        .enumerate()
        .map(|(n, v)| serde_json::json!({"n": n, "re": v.re, "im": v.im}))
        .collect::<Vec<_>>());
    let path = em.write_table(&base, &w.to_csv(), json_rows)?;
    let mut summary = w.metadata_json();
    summary["claim"] = "weight table of the declared family with bounded complexity proxy".into();
    summary["mean"] = serde_json::json!({"re": stats.mean.re, "im": stats.mean.im});
    summary["sup_norm"] = stats.sup_norm.into();
    summary["mean_square"] = stats.mean_square.into();
    em.write_summary(&base, &summary)?;
    em.note(&format!(
        "weight {family} p={pv}: wrote {}, mean=({:.6},{:.6}), sup={:.6}, mean_square={:.6}",
        path.display(),
        stats.mean.re,
        stats.mean.im,
        stats.sup_norm,
        stats.mean_square
    ));
    Ok(())
}

fn cmd_average(
    cfg: &Config,
    em: &mut Emitter,
    system: Option<String>,
    obs: Option<String>,
    weight: Option<String>,
    primes: Option<String>,
    seeds: Option<String>,
) -> anyhow::Result<()> {
    let system = resolve_system(cfg, system)?;
    let obs = resolve_observable(cfg, obs, &system)?;
    let plan = resolve_plan(cfg, weight)?;
    let pset = resolve_prime_set(cfg, primes)?;
    let seeds = parse_seeds(&cfg.resolve::<String>("seeds", seeds, None)?)?;
    let report = convergence_run(&system, &obs, &plan, &pset, &seeds)?;
    let base = format!(
        "average_{}_{}_{}",
        slug(&system.name()),
        slug(&obs.name()),
        slug(&plan.label())
    );
    em.write_table(&base, &report.to_csv(), rows_json(&report))?;
    let claim = "per-prime weighted orbit averages approach alpha_p times the ergodic projection";
    em.write_summary(&base, &report.summary_json(claim))?;
    em.note(&format!(
        "average {} / {} / {}: {} rows, fit exponent {:?}, limit estimate ({:.6},{:.6})",
        system.name(),
        obs.name(),
        plan.label(),
        report.rows.len(),
        report.fit_exponent,
        report.limit_estimate[0],
        report.limit_estimate[1]
    ));
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_maximal(
    cfg: &Config,
    em: &mut Emitter,
    system: Option<String>,
    obs: Option<String>,
    weight: Option<String>,
    primes: Option<String>,
    samples: Option<usize>,
    seed_base: Option<u64>,
) -> anyhow::Result<()> {
    let system = resolve_system(cfg, system)?;
    let obs = resolve_observable(cfg, obs, &system)?;
    let plan = resolve_plan(cfg, weight)?;
    let pset = resolve_prime_set(cfg, primes)?;
    let samples: usize = cfg.resolve("samples", samples, Some(200))?;
    if samples < 100 {
        bail!("invalid value for field 'samples': need at least 100");
    }
    let seed_base: u64 = cfg.resolve("seed_base", seed_base, Some(0))?;
    let report = maximal_estimate(&system, &obs, &plan, &pset, samples, seed_base)?;
    let base = format!("maximal_{}_{}", slug(&system.name()), slug(&plan.label()));
    let mut csv = String::from("k,p,truncated_norm\n");
    for (k, (p, v)) in pset.iter().zip(&report.truncation_norms).enumerate() {
        let _ = writeln!(csv, "{k},{},{v}", p.value());
    }
    em.write_table(&base, &csv, serde_json::json!(report.truncation_norms))?;
    let claim = "the L2 norm of the running maximal function stays bounded along nested prime truncations";
    em.write_summary(&base, &report.summary_json(claim))?;
    em.note(&format!(
        "maximal {} / {}: ratio {:.4} (stderr {:.4}) over {} samples",
        system.name(),
        plan.label(),
        report.ratio,
        report.m_stderr,
        samples
    ));
    Ok(())
}

fn parse_shift_tuple(s: &str) -> anyhow::Result<ShiftTuple> {
    let (a, b) = s
        .split_once(';')
        .ok_or_else(|| anyhow!("invalid value for field 'shifts': need 'a1,..;b1,..'"))?;
    let parse = |t: &str| -> anyhow::Result<Vec<u64>> {
        t.split(',')
            .map(|v| {
                v.trim()
                    .parse::<u64>()
                    .map_err(|_| anyhow!("invalid value for field 'shifts': bad entry '{v}'"))
            })
            .collect()
    };
    ShiftTuple::new(parse(a)?, parse(b)?).map_err(|e| anyhow!("invalid value for field 'shifts': {e}"))
}

fn alpha_window(spec: &str, m: usize) -> anyhow::Result<Vec<Complex64>> {
    if spec == "ones" {
        return Ok(vec![Complex64::new(1.0, 0.0); m]);
    }
    if let Some(t) = spec.strip_prefix("rotation:") {
        let theta = parse_theta(t)?;
        return Ok((0..m)
            .map(|i| {
                let (s, c) = (2.0 * std::f64::consts::PI * ((i as f64 * theta) % 1.0)).sin_cos();
                Complex64::new(c, s)
            })
            .collect());
    }
    bail!("invalid value for field 'alpha': expected 'ones' or 'rotation:<theta>'")
}

#[allow(clippy::too_many_arguments)]
fn cmd_bounds(
    cfg: &Config,
    em: &mut Emitter,
    scan: Option<String>,
    family: Option<WeightFamily>,
    p: Option<u64>,
    stride: Option<usize>,
    poly: Option<String>,
    lo: Option<i64>,
    hi: Option<i64>,
    oversample: Option<usize>,
    shifts: Option<String>,
    enumerate: Option<String>,
    m: Option<usize>,
    eps: Option<f64>,
    alpha: Option<String>,
) -> anyhow::Result<()> {
    let scan: String = cfg.resolve("scan", scan, None)?;
    let family: WeightFamily = cfg.resolve("family", family, None)?;
    let pv: u64 = cfg.resolve("p", p, None)?;
    let prime = Prime::new(pv).map_err(|e| anyhow!("invalid value for field 'p': {e}"))?;
    let w = make_weight(&family, prime)?;
    let base = format!("bounds_{}_{}_{}", slug(&scan), slug(&family.to_string()), pv);

    let mut reports: Vec<BoundReport> = Vec::new();
    let claim: &str = match scan.as_str() {
        "interval" => {
            let stride: usize = cfg.resolve("stride", stride, Some(1))?;
            reports.push(interval_sum_scan(&w, stride)?);
            "every interval sum stays within the sqrt(p) log p envelope"
        }
        "weyl" => {
            let poly: String = cfg.resolve("poly", poly, Some("0,1".into()))?;
            let coeffs: Vec<f64> = poly
                .split(',')
                .map(|c| c.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| anyhow!("invalid value for field 'poly'"))?;
            let lo: i64 = cfg.resolve("lo", lo, Some(0))?;
            let hi: i64 = cfg.resolve("hi", hi, Some(pv as i64))?;
            reports.push(weyl_sum(&w, &coeffs, (lo, hi))?);
            "the phased interval sum obeys the degree-k differencing envelope"
        }
        "frequency" => {
            let k: usize = cfg.resolve("oversample", oversample, Some(8))?;
            reports.push(frequency_sup(&w, k)?);
            "the sup over frequencies of the twisted sum obeys sqrt(p) log p"
        }
        "correlation" => {
            if let Some(spec) = enumerate.or_else(|| cfg.get("enumerate").map(String::from)) {
                let (k, h) = spec
                    .split_once(':')
                    .ok_or_else(|| anyhow!("invalid value for field 'enumerate': need k:H"))?;
                let k: usize = k.parse().map_err(|_| anyhow!("invalid value for field 'enumerate'"))?;
                let h: u64 = h.parse().map_err(|_| anyhow!("invalid value for field 'enumerate'"))?;
                reports.extend(enumerate_correlations(&w, k, h));
            } else {
                let spec: String = cfg.resolve("shifts", shifts, None)?;
                let tuple = parse_shift_tuple(&spec)?;
                let s = correlation_sum(&w, &tuple);
                let matched = tuple.predicts_correlation(w.family());
                let envelope = if matched {
                    pv as f64
                } else {
                    (pv as f64).sqrt()
                };
                reports.push(BoundReport {
                    p: pv,
                    family: family.to_string(),
                    scan: format!("correlation:{spec}"),
                    measured: s.norm(),
                    envelope,
                    ratio: s.norm() / envelope,
                    detail: serde_json::json!({
                        "matched": matched,
                        "re": s.re,
                        "im": s.im,
                        "cyclic_boundary_bound": correlation_boundary_bound(&w, &tuple),
                    }),
                });
            }
            "shifted-product sums cancel to sqrt(p) scale except on structurally matched tuples"
        }
        "moment" => {
            let m: usize = cfg.resolve("m", m, None)?;
            let eps: f64 = cfg.resolve("eps", eps, None)?;
            let alpha_spec: String = cfg.resolve("alpha", alpha, Some("ones".into()))?;
            let window = alpha_window(&alpha_spec, m)?;
            let frac = moment_exceedance(&w, &window, m, eps)?;
            reports.push(BoundReport {
                p: pv,
                family: family.to_string(),
                scan: format!("moment:m={m}:eps={eps}"),
                measured: frac,
                envelope: 1.0,
                ratio: frac,
                detail: serde_json::json!({ "m": m, "eps": eps, "alpha": alpha_spec }),
            });
            "the fraction of long windows with large weighted sums decays in the window length"
        }
        other => bail!("invalid value for field 'scan': unknown scan '{other}'"),
    };

    let mut csv = String::from(BoundReport::CSV_HEADER);
    for r in &reports {
        csv.push_str(&r.csv_row());
    }
    em.write_table(&base, &csv, serde_json::json!(reports))?;
    let summary = serde_json::json!({
        "schema": SCHEMA,
        "claim": claim,
        "reports": reports,
    });
    em.write_summary(&base, &summary)?;
    for r in &reports {
        em.note(&format!(
            "bounds {} {} p={}: measured {:.6e}, envelope {:.6e}, ratio {:.4}",
            r.scan, r.family, r.p, r.measured, r.envelope, r.ratio
        ));
    }
    Ok(())
}

fn enumerate_correlations(w: &tracelab::Weight, k: usize, h: u64) -> Vec<BoundReport> {
    let pv = w.p().value();
    let mut out = Vec::new();
    let side = (h + 1).pow(k as u32);
    for ai in 0..side {
        for bi in 0..side {
            let decode = |mut v: u64| -> Vec<u64> {
                (0..k)
                    .map(|_| {
                        let d = v % (h + 1);
                        v /= h + 1;
                        d
                    })
                    .collect()
            };
            let tuple = ShiftTuple::new(decode(ai), decode(bi)).expect("arity >= 1");
            let s = correlation_sum(w, &tuple);
            let matched = tuple.predicts_correlation(w.family());
            let envelope = if matched { pv as f64 } else { (pv as f64).sqrt() };
            out.push(BoundReport {
                p: pv,
                family: w.family().to_string(),
                scan: format!("correlation:{:?};{:?}", tuple.a, tuple.b),
                measured: s.norm(),
                envelope,
                ratio: s.norm() / envelope,
                detail: serde_json::json!({ "matched": matched }),
            });
        }
    }
    out
}

fn cmd_sarnak(
    cfg: &Config,
    em: &mut Emitter,
    system: Option<String>,
    obs: Option<String>,
    weight: Option<String>,
    primes: Option<String>,
    x0: Option<String>,
) -> anyhow::Result<()> {
    let system = resolve_system(cfg, system)?;
    let obs = resolve_observable(cfg, obs, &system)?;
    let plan = resolve_plan(cfg, weight)?;
    let pset = resolve_prime_set(cfg, primes)?;
    let x0_raw: String = cfg.resolve("x0", x0, Some("0".into()))?;
    let state = match &system {
        DynSystem::Skew => {
            let (a, b) = x0_raw
                .split_once(',')
                .ok_or_else(|| anyhow!("invalid value for field 'x0': pair system needs 'x,y'"))?;
            State::Pair(
                a.trim().parse().map_err(|_| anyhow!("invalid value for field 'x0'"))?,
                b.trim().parse().map_err(|_| anyhow!("invalid value for field 'x0'"))?,
            )
        }
        _ => State::Unit(
            x0_raw
                .parse()
                .map_err(|_| anyhow!("invalid value for field 'x0'"))?,
        ),
    };
    let report = sarnak_run(&system, &obs, &plan, &state, &pset)?;
    let base = format!("sarnak_{}_{}", slug(&system.name()), slug(&plan.label()));
    em.write_table(&base, &report.to_csv(), rows_json(&report))?;
    let claim = "weighted averages of a deterministic (zero-entropy) orbit decay to zero";
    em.write_summary(&base, &report.summary_json(claim))?;
    em.note(&format!(
        "sarnak {} / {}: max |A_p| over largest decade = {:.6}",
        system.name(),
        plan.label(),
        max_over_largest_decade(&report)
    ));
    Ok(())
}

fn cmd_spectral(
    cfg: &Config,
    em: &mut Emitter,
    theta: Option<String>,
    x: Option<u64>,
    delta: Option<f64>,
) -> anyhow::Result<()> {
    let theta_raw: String = cfg.resolve("theta", theta, None)?;
    let theta_val = parse_theta(&theta_raw)?;
    let x: u64 = cfg.resolve("x", x, Some(10_000))?;
    let delta: f64 = cfg.resolve("delta", delta, Some(0.0))?;
    let records = approx_search(&Theta::Float(theta_val), x, delta)?;
    let base = format!("spectral_{}", slug(&theta_raw));
    let mut csv = String::from("p,a_p,gap,scaled_gap,rotation_norm\n");
    for r in &records {
        let norm = rotation_norm_exact(theta_val, r.a_p, Prime::new(r.p).expect("search yields primes"));
        let _ = writeln!(csv, "{},{},{},{},{}", r.p, r.a_p, r.gap, r.scaled_gap, norm);
    }
    em.write_table(&base, &csv, serde_json::json!(records))?;
    let diagnostic = if records.len() >= 10 {
        Some(emphatic_check(&records)?)
    } else {
        None
    };
    let summary = serde_json::json!({
        "schema": SCHEMA,
        "claim": "scaled approximation gaps control the norm of the twisted rotation average",
        "theta": theta_val,
        "x": x,
        "delta": delta,
        "records": records.len(),
        "diagnostic": diagnostic.as_ref().map(|d| serde_json::json!({
            "max_scaled_gap": d.max_scaled_gap,
            "clusters": d.clusters,
            "consistent": d.consistent,
        })),
    });
    em.write_summary(&base, &summary)?;
    em.note(&format!(
        "spectral theta={theta_raw}: {} approximations below p^-(1+{delta}) up to {x}{}",
        records.len(),
        diagnostic
            .map(|d| format!(", max scaled gap {:.4}, consistent={}", d.max_scaled_gap, d.consistent))
            .unwrap_or_default()
    ));
    Ok(())
}

fn cmd_coverage(
    cfg: &Config,
    em: &mut Emitter,
    c: Option<f64>,
    x: Option<u64>,
    grid: Option<usize>,
    seeds: Option<String>,
) -> anyhow::Result<()> {
    let c: f64 = cfg.resolve("c", c, Some(0.01))?;
    let x: u64 = cfg.resolve("x", x, Some(100_000))?;
    let grid: usize = cfg.resolve("grid", grid, Some(10_000))?;
    let seeds = parse_seeds(&cfg.resolve::<String>("seeds", seeds, Some("10".into()))?)?;
    let mut csv = String::from("seed,covered_fraction\n");
    let mut results = Vec::new();
    for &seed in &seeds {
        let r = coverage_experiment(c, x, grid, seed)?;
        let _ = writeln!(csv, "{seed},{}", r.covered_fraction);
        results.push(r.to_json());
    }
    let base = format!("coverage_c{}_x{x}", slug(&c.to_string()));
    em.write_table(&base, &csv, serde_json::json!(results))?;
    let mean: f64 = results
        .iter()
        .map(|r| r["covered_fraction"].as_f64().unwrap_or(0.0))
        .sum::<f64>()
        / results.len().max(1) as f64;
    let summary = serde_json::json!({
        "schema": SCHEMA,
        "claim": "random prime-denominator intervals of width c/p cover a circle fraction that grows with the prime bound",
        "c": c, "x": x, "grid": grid,
        "seeds": seeds,
        "mean_covered_fraction": mean,
        "results": results,
    });
    em.write_summary(&base, &summary)?;
    em.note(&format!(
        "coverage c={c} x={x} grid={grid}: mean covered fraction {mean:.4} over {} seeds",
        seeds.len()
    ));
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_counterexample(
    cfg: &Config,
    em: &mut Emitter,
    kind: Option<String>,
    primes: Option<String>,
    seeds: Option<String>,
    y: Option<f64>,
    x0: Option<f64>,
    x_full: Option<u64>,
    c: Option<f64>,
    seed: Option<u64>,
) -> anyhow::Result<()> {
    let kind: String = cfg.resolve("kind", kind, None)?;
    match kind.as_str() {
        "adversarial" => {
            let pset = resolve_prime_set(cfg, primes)?;
            let seq = adversarial_sequence(&pset);
            let system = sequence_shift(seq);
            let plan = WeightPlan::Scaled {
                base: WeightFamily::Legendre,
                factor: 2.0,
            };
            let report =
                convergence_run(&system, &Observable::Coordinate, &plan, &pset, &[0])?;
            em.write_table("counterexample_adversarial", &report.to_csv(), rows_json(&report))?;
            let claim = "the block-residue sequence keeps the matched weighted averages near 1 along its prime blocks";
            em.write_summary("counterexample_adversarial", &report.summary_json(claim))?;

            // random 0/1 control with the same weights
            let control_seeds =
                parse_seeds(&cfg.resolve::<String>("seeds", seeds, Some("5".into()))?)?;
            let mut csv = String::from("p,seed,abs_a\n");
            let mut worst: f64 = 0.0;
            for &s in &control_seeds {
                let mut rng = tracelab::rng::keyed_rng(&[0xc0_1d, s]);
                let vals: Vec<f64> = (0..pset.max().as_usize())
                    .map(|_| {
                        if rand::Rng::gen::<bool>(&mut rng) {
                            1.0
                        } else {
                            0.0
                        }
                    })
                    .collect();
                let control = sequence_shift(vals);
                let rep = convergence_run(&control, &Observable::Coordinate, &plan, &pset, &[s])?;
                for row in &rep.rows {
                    let _ = writeln!(csv, "{},{},{}", row.p, row.seed, row.a_p().norm());
                    worst = worst.max(row.a_p().norm());
                }
            }
            em.write_raw("counterexample_adversarial_control.csv", &csv)?;
            let last = report.rows.last().expect("non-empty prime set");
            em.note(&format!(
                "counterexample adversarial: A at largest block = {:.4}; random control max |A| = {worst:.4}",
                last.a_p().re
            ));
        }
        "skew" => {
            let y: f64 = cfg.resolve("y", y, Some(0.6180339887498949))?;
            let x0: f64 = cfg.resolve("x0", x0, Some(0.25))?;
            let x_full: u64 = cfg.resolve("x_full", x_full, Some(100_000))?;
            let c: f64 = cfg.resolve("c", c, Some(0.01))?;
            let seed: u64 = cfg.resolve("seed", seed, Some(1))?;
            let pset = resolve_prime_set(cfg, primes)?;
            let reports = skew_counterexample(y, x0, &pset, x_full, c, seed)?;
            em.write_table(
                "counterexample_skew_sparse",
                &reports.sparse.to_csv(),
                rows_json(&reports.sparse),
            )?;
            em.write_table(
                "counterexample_skew_coincident",
                &reports.coincident.to_csv(),
                rows_json(&reports.coincident),
            )?;
            let claim = "skew-product averages vanish on the sparse branch but persist above 0.9 when a_p/p meets y";
            let summary = serde_json::json!({
                "schema": SCHEMA,
                "claim": claim,
                "y": y, "x0": x0, "x_full": x_full, "c": c, "seed": seed,
                "sparse_rows": reports.sparse.rows.len(),
                "coincident_rows": reports.coincident.rows.len(),
            });
            em.write_summary("counterexample_skew", &summary)?;
            em.note(&format!(
                "counterexample skew: {} sparse-branch rows (max |A| {:.4}), {} coincidence rows (min |A| {:.4})",
                reports.sparse.rows.len(),
                reports.sparse.rows.iter().map(|r| r.a_p().norm()).fold(0.0, f64::max),
                reports.coincident.rows.len(),
                reports
                    .coincident
                    .rows
                    .iter()
                    .map(|r| r.a_p().norm())
                    .fold(f64::INFINITY, f64::min),
            ));
        }
        other => bail!("invalid value for field 'kind': unknown counterexample '{other}'"),
    }
    Ok(())
}

fn cmd_selftest(em: &mut Emitter) -> anyhow::Result<()> {
    let start = std::time::Instant::now();
    let checks = tracelab::selftest::run_all();
    let mut failed = Vec::new();
    for c in &checks {
        em.note(&format!(
            "selftest {:<28} {}  margin {:+.3e}  ({})",
            c.name,
            if c.pass { "pass" } else { "FAIL" },
            c.margin,
            c.detail
        ));
        if !c.pass {
            failed.push(c.name);
        }
    }
    em.note(&format!(
        "selftest finished in {:.2?} ({} checks)",
        start.elapsed(),
        checks.len()
    ));
    if !failed.is_empty() {
        bail!("selftest failures: {}", failed.join(", "));
    }
    Ok(())
}
