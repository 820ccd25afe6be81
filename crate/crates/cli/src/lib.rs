//! Scenario runner: every subcommand reads one TOML scenario, runs the
//! matching analysis and writes CSV artifacts into an output directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use y00lab::breach::{time_to_threshold, uniform_log2_prior, BreachParams, ItsClass};
use y00lab::channel::{bob_receive, decide_all, eve_regions, pattern_dist, tap_and_measure};
use y00lab::config::{parse_grid, parse_scenario, ScenarioConfig};
use y00lab::fca::{derive_parity_checks, run_trial, s_generator, word_bit_crossovers};
use y00lab::keyfresh::{
    guess_probability_bound, hinf_estimate, optimal_tau, refresh_roundtrip, BreachBudget, ExtractorParams, HinfMode,
    KeyPair, RefreshParams,
};
use y00lab::prng::{bits_to_hex, expand_running_key, GeneratorSpec};
use y00lab::qdetect::{
    antipodal_overlap_sqr, helstrom_pure, min_cutoff, optimality_residuals, psk_region_povm, quantized_success, srm,
    PureStateEnsemble, MAX_HYPOTHESES,
};
use y00lab::y00::{demodulate_bob, dsr_words, transmit, DsrMode, MappingKind, Y00Config};
use y00lab::Error;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(name = "y00lab", version, about = "Y00 cipher simulation and security analytics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Modulate random plaintext, record the trace and both receivers' error rates.
    Simulate(Common),
    /// Upper bound on Eve's success against the number of key periods.
    BreachCurve(Common),
    /// Correlation-attack trials against the basis generator.
    Fca(Common),
    /// Quantum detection figures for Eve's tapped states.
    Qdetect(Common),
    /// One key-refresh round with its security budget.
    Keyfresh(Common),
    /// One-page classification summary.
    Report(Common),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory; defaults to `[output] dir` or `out`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub pth: Option<f64>,
    /// `START:STOP:STEP` grid over key periods.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long, value_enum, default_value_t = HinfArg::Exact)]
    pub hinf_mode: HinfArg,
    /// `auto` or an explicit sacrifice length.
    #[arg(long, default_value = "auto")]
    pub tau: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum HinfArg {
    Exact,
    Bound,
}

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;
pub const EXIT_NEGATIVE: i32 = 4;

#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) | Error::InvalidInput(_) => EXIT_CONFIG,
            Error::Infeasible(_) | Error::Unsupported(_) | Error::PeriodUnknown { .. } => EXIT_INFEASIBLE,
            Error::NoLeakyBits(_) | Error::DecodeFailure(_) | Error::RefreshRefused(_) => EXIT_NEGATIVE,
            Error::Quadrature(_) => 1,
        };
        Failure { code, message: e.to_string() }
    }
}

/// Artifacts of one run plus its exit status. Files are written only after
/// the analysis finishes.
#[derive(Debug, Default)]
pub struct Outcome {
    pub code: i32,
    pub files: Vec<(String, String)>,
    pub summary: String,
}

struct Ctx {
    scenario: ScenarioConfig,
    header: String,
    common: Common,
}

fn load(common: &Common, name: &str) -> Result<Ctx, Failure> {
    let bytes = fs::read(&common.config)
        .map_err(|e| Failure { code: EXIT_CONFIG, message: format!("{}: {e}", common.config.display()) })?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| Failure { code: EXIT_CONFIG, message: "config is not UTF-8".into() })?;
    let scenario = parse_scenario(&text)?;
    let digest: String = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
    let header = format!("# y00lab {VERSION} {name} config_sha256={digest} seed={}\n", common.seed);
    Ok(Ctx { scenario, header, common: common.clone() })
}

/// Runs a parsed command and writes its artifacts.
pub fn run(cli: &Cli) -> Result<Outcome, Failure> {
    let (common, outcome) = match &cli.command {
        Command::Simulate(c) => (c, simulate(&load(c, "simulate")?)?),
        Command::BreachCurve(c) => (c, breach_curve(&load(c, "breach-curve")?)?),
        Command::Fca(c) => (c, fca(&load(c, "fca")?)?),
        Command::Qdetect(c) => (c, qdetect(&load(c, "qdetect")?)?),
        Command::Keyfresh(c) => (c, keyfresh(&load(c, "keyfresh")?)?),
        Command::Report(c) => (c, report(&load(c, "report")?)?),
    };
    let dir = out_dir(common)?;
    write_all(&dir, &outcome.files)?;
    Ok(outcome)
}

fn out_dir(common: &Common) -> Result<PathBuf, Failure> {
    if let Some(d) = &common.out {
        return Ok(d.clone());
    }
    let text = fs::read_to_string(&common.config).unwrap_or_default();
    let dir = parse_scenario(&text).ok().and_then(|s| s.output.dir).unwrap_or_else(|| "out".into());
    Ok(PathBuf::from(dir))
}

fn write_all(dir: &Path, files: &[(String, String)]) -> Result<(), Failure> {
    let io = |e: std::io::Error| Failure { code: 1, message: format!("{}: {e}", dir.display()) };
    fs::create_dir_all(dir).map_err(io)?;
    for (name, body) in files {
        fs::write(dir.join(name), body).map_err(io)?;
    }
    Ok(())
}

fn p_th(ctx: &Ctx) -> f64 {
    ctx.common.pth.unwrap_or(ctx.scenario.breach.p_th)
}

fn mapping_name(cfg: &Y00Config) -> &'static str {
    match cfg.mapping.kind {
        MappingKind::Regular => "regular",
        MappingKind::Irregular => "irregular",
        MappingKind::Scrambled(_) => "scrambled",
    }
}

fn dsr_name(cfg: &Y00Config) -> &'static str {
    match cfg.dsr {
        DsrMode::None => "none",
        DsrMode::Keyed(_) => "keyed",
        DsrMode::TrueRandom => "true-random",
    }
}

fn key_widths(cfg: &Y00Config) -> Vec<u32> {
    let mut w = vec![cfg.prng_s.seed_width() as u32, cfg.prng_dx.seed_width() as u32];
    if let DsrMode::Keyed(g) = &cfg.dsr {
        w.push(g.seed_width() as u32);
    }
    w
}

/// `1/N_Breach` of the configured system, from its own keys and an all-zero
/// plaintext period.
fn system_breach(cfg: &Y00Config, log2_prior: f64, p_th: f64) -> Result<(BreachParams, u64), Failure> {
    let k = cfg.prng_s.seed_bits();
    let dk = cfg.prng_dx.seed_bits();
    let probe = expand_running_key(k, dk, cfg, 0)?;
    let key_dependent = cfg.dsr == DsrMode::TrueRandom || cfg.geometry == y00lab::y00::Geometry::Isk;
    let r = if key_dependent && probe.t_lcm <= y00lab::channel::SLOT_ENUMERATION_CAP {
        expand_running_key(k, dk, cfg, probe.t_lcm as usize)?
    } else {
        probe
    };
    let dist = pattern_dist(cfg, &r, &[])?;
    Ok((BreachParams::from_dist(&dist, log2_prior, p_th)?, r.t_lcm))
}

fn simulate(ctx: &Ctx) -> Result<Outcome, Failure> {
    let cfg = &ctx.scenario.system;
    let horizon = ctx.common.horizon.unwrap_or(ctx.scenario.attack.horizon);
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.common.seed);
    let x: Vec<u8> = (0..horizon).map(|_| rng.random_range(0..2u8)).collect();
    let r = expand_running_key(cfg.prng_s.seed_bits(), cfg.prng_dx.seed_bits(), cfg, horizon)?;
    let keyed = match cfg.dsr {
        DsrMode::Keyed(_) => Some(dsr_words(cfg, horizon, &mut rng)),
        _ => None,
    };
    let trace = transmit(&r, &x, cfg, &mut rng)?;
    let bob = bob_receive(&trace, cfg, rng.random());
    let decoded = demodulate_bob(&bob, &r, cfg, keyed.as_deref(), Some(&x))?;
    let eve = decide_all(&tap_and_measure(&trace, cfg, rng.random())?, &eve_regions(cfg));
    let eve_errors = eve.iter().zip(trace.indices()).filter(|(a, b)| **a != *b).count();
    let bob_errors = decoded.errors.unwrap_or(0);
    let n = horizon.max(1) as f64;
    let mut summary = ctx.header.clone();
    summary.push_str("slots,bob_bit_errors,bob_ber,eve_symbol_errors,eve_ser\n");
    let _ = writeln!(summary, "{horizon},{bob_errors},{:.6e},{eve_errors},{:.6e}", bob_errors as f64 / n, eve_errors as f64 / n);
    let mut trace_csv = ctx.header.clone();
    trace_csv.push_str(&trace.to_csv());
    Ok(Outcome {
        code: EXIT_OK,
        files: vec![("trace.csv".into(), trace_csv), ("simulate.csv".into(), summary)],
        summary: format!("simulate: {horizon} slots, Bob BER {:.3e}, Eve SER {:.3e}", bob_errors as f64 / n, eve_errors as f64 / n),
    })
}

fn breach_curve(ctx: &Ctx) -> Result<Outcome, Failure> {
    let cfg = &ctx.scenario.system;
    let b = &ctx.scenario.breach;
    let grid = parse_grid(ctx.common.grid.as_deref().unwrap_or(&b.grid))?;
    let pth = p_th(ctx);
    let log2_prior = b.log2_prior.unwrap_or_else(|| uniform_log2_prior(&key_widths(cfg)));
    let params: Vec<BreachParams> = if b.inv_n_breach.is_empty() {
        vec![system_breach(cfg, log2_prior, pth)?.0]
    } else {
        b.inv_n_breach.iter().map(|v| BreachParams::new(log2_prior, v.value(), pth)).collect::<Result<_, _>>()?
    };
    let curves: Vec<Vec<(f64, f64)>> =
        params.iter().map(|p| y00lab::breach::breach_curve(p, &grid)).collect::<Result<_, _>>()?;
    let mut out = ctx.header.clone();
    let _ = writeln!(out, "# prior=2^{:.17e}, p_th={pth}", log2_prior);
    for (i, p) in params.iter().enumerate() {
        let _ = writeln!(out, "# curve_{i}: inv_n_breach={:.17e} class={}", p.inv_n_breach, p.classification());
    }
    out.push('N');
    for i in 0..params.len() {
        let _ = write!(out, ",upper_bound_{i}");
    }
    out.push('\n');
    for (j, n) in grid.iter().enumerate() {
        let _ = write!(out, "{n}");
        for c in &curves {
            let _ = write!(out, ",{:.17e}", c[j].1);
        }
        out.push('\n');
    }
    Ok(Outcome {
        code: EXIT_OK,
        files: vec![("breach_curve.csv".into(), out)],
        summary: format!("breach-curve: {} curve(s) over {} grid points", params.len(), grid.len()),
    })
}

fn fca(ctx: &Ctx) -> Result<Outcome, Failure> {
    let cfg = &ctx.scenario.system;
    let a = &ctx.scenario.attack;
    let trials = ctx.common.trials.unwrap_or(a.trials);
    let horizon = ctx.common.horizon.unwrap_or(a.horizon);
    let spec = s_generator(cfg)?;
    let w = cfg.word_bits() as usize;
    let checks = derive_parity_checks(&y00lab::fca::decimated_recurrence(spec, w)?, a.max_weight, horizon)?;
    let mut master = ChaCha8Rng::seed_from_u64(ctx.common.seed);
    let seeds: Vec<u64> = (0..trials).map(|_| master.random()).collect();
    let mut out = ctx.header.clone();
    out.push_str("trial,recovered,attempted,iterations,confidence,agreement,mean_crossover\n");
    let results: Vec<_> = seeds.par_iter().map(|&s| run_trial(cfg, horizon, &checks, s)).collect();
    let mut recovered = 0;
    for (i, t) in results.into_iter().enumerate() {
        let t = t?;
        recovered += t.recovered as usize;
        let _ = writeln!(
            out,
            "{i},{},{},{},{:.6},{:.6},{:.6}",
            t.recovered as u8, t.attempted as u8, t.iterations, t.confidence, t.agreement, t.mean_crossover
        );
    }
    Ok(Outcome {
        code: if recovered == 0 { EXIT_NEGATIVE } else { EXIT_OK },
        files: vec![("fca.csv".into(), out)],
        summary: format!("fca: recovered {recovered}/{trials}"),
    })
}

fn qdetect(ctx: &Ctx) -> Result<Outcome, Failure> {
    let cfg = &ctx.scenario.system;
    let a = num_complex::Complex64::new(cfg.eta * cfg.alpha0, 0.0);
    let mut rows: Vec<(String, String)> = Vec::new();
    let overlap = antipodal_overlap_sqr(a)?;
    rows.push(("antipodal_overlap_sqr".into(), format!("{overlap:.15e}")));
    rows.push(("helstrom_antipodal".into(), format!("{:.15e}", helstrom_pure(overlap, 0.5))));
    let two_m = 2 * cfg.m;
    if two_m <= MAX_HYPOTHESES {
        let states: Vec<Vec<_>> = (0..two_m).map(|k| vec![cfg.amplitude(k) * cfg.eta]).collect();
        let ens = PureStateEnsemble::uniform(states.clone())?.to_density();
        let s = srm(&ens);
        let lag = optimality_residuals(&ens, &s.measurement);
        rows.push(("srm_success".into(), format!("{:.15e}", s.success)));
        rows.push(("srm_max_residual".into(), format!("{:.3e}", lag.max_residual())));
        let n_max = min_cutoff(a);
        let cells = psk_region_povm(cfg.m, n_max);
        let flat: Vec<_> = states.iter().map(|s| s[0]).collect();
        let q = quantized_success(&flat, &vec![1.0 / two_m as f64; two_m], &cells)?;
        rows.push(("region_povm_success".into(), format!("{q:.15e}")));
    } else {
        rows.push(("srm_success".into(), format!("skipped: 2M = {two_m} exceeds {MAX_HYPOTHESES} hypotheses")));
    }
    let mut out = ctx.header.clone();
    out.push_str("quantity,value\n");
    for (k, v) in &rows {
        let _ = writeln!(out, "{k},{v}");
    }
    Ok(Outcome { code: EXIT_OK, files: vec![("qdetect.csv".into(), out)], summary: format!("qdetect: {} rows", rows.len()) })
}

fn keyfresh(ctx: &Ctx) -> Result<Outcome, Failure> {
    let cfg = &ctx.scenario.system;
    let rf = &ctx.scenario.refresh;
    let pth = p_th(ctx);
    let mode = match ctx.common.hinf_mode {
        HinfArg::Exact => HinfMode::Exact,
        HinfArg::Bound => HinfMode::Bound,
    };
    let key_bits = cfg.prng_s.seed_width() + cfg.prng_dx.seed_width();
    let est = hinf_estimate(cfg, rf.kr_bits, rf.repetition, mode)?;
    let mut rows: Vec<(&str, String)> = vec![
        ("hinf_mode", format!("{mode:?}").to_lowercase()),
        ("hinf_per_bit", format!("{:.12e}", est.per_bit)),
        ("hinf_total", format!("{:.12e}", est.total)),
        ("hinf_certified", est.certified.to_string()),
    ];
    let mut out = ctx.header.clone();
    out.push_str("field,value\n");
    let finish = |rows: &[(&str, String)], mut out: String| {
        for (k, v) in rows {
            let _ = writeln!(out, "{k},{v}");
        }
        out
    };
    let refuse = |rows: &mut Vec<(&str, String)>, why: String| {
        rows.push(("outcome", "refused".into()));
        rows.push(("reason", why.replace(',', ";")));
    };
    let choice = match optimal_tau(est.total) {
        Ok(c) => c,
        Err(e) => {
            refuse(&mut rows, e.to_string());
            return Ok(Outcome {
                code: EXIT_NEGATIVE,
                files: vec![("keyfresh.csv".into(), finish(&rows, out))],
                summary: format!("keyfresh: {e}"),
            });
        }
    };
    let tau_allowed = if ctx.common.tau == "auto" {
        choice.tau
    } else {
        ctx.common
            .tau
            .parse::<usize>()
            .map_err(|_| Failure { code: EXIT_CONFIG, message: format!("--tau {:?} is not auto or an integer", ctx.common.tau) })?
    };
    rows.push(("tau_optimal", format!("{:.6}", choice.tau_real)));
    rows.push(("tau_allowed", tau_allowed.to_string()));
    rows.push(("tau_used", key_bits.to_string()));
    if tau_allowed < key_bits {
        let why = format!("entropy supports {tau_allowed} key bits; {key_bits} needed");
        refuse(&mut rows, why.clone());
        return Ok(Outcome {
            code: EXIT_NEGATIVE,
            files: vec![("keyfresh.csv".into(), finish(&rows, out))],
            summary: format!("keyfresh: refused, {why}"),
        });
    }
    let ext = ExtractorParams::new(est.total, key_bits as f64, est.total, pth)?;
    let g = guess_probability_bound(&ext, rf.margin);
    rows.push(("epsilon", format!("{:.12e}", ext.epsilon)));
    rows.push(("guess_bound", format!("{:.12e}", g.bound)));
    rows.push(("p_th", format!("{pth}")));
    rows.push(("margin", format!("{:.6e}", g.margin)));
    rows.push(("margin_satisfied", g.satisfied.to_string()));

    let budget = {
        let log2_prior = uniform_log2_prior(&key_widths(cfg));
        system_breach(cfg, log2_prior, pth)
            .ok()
            .map(|(params, _)| BreachBudget { params, elapsed_periods: rf.elapsed_periods })
    };
    let keys = KeyPair { k: cfg.prng_s.seed_bits().to_vec(), dk: cfg.prng_dx.seed_bits().to_vec() };
    let (mut alice, mut bob) = (keys.clone(), keys);
    let params = RefreshParams {
        kr_bits: rf.kr_bits,
        repetition: rf.repetition,
        bob_crossover: rf.bob_crossover,
        tamper: vec![],
        seed: ctx.common.seed,
    };
    let mut files = Vec::new();
    let (code, summary) = match refresh_roundtrip(cfg, &mut alice, &mut bob, &params, budget.as_ref()) {
        Ok(t) => {
            rows.push(("outcome", "refreshed".into()));
            rows.push(("coded_bits", t.layout.coded_bits.to_string()));
            rows.push(("bob_slot_errors", t.bob_slot_errors.to_string()));
            rows.push(("new_k_hex", bits_to_hex(&t.new_keys.k)));
            rows.push(("new_dk_hex", bits_to_hex(&t.new_keys.dk)));
            let mut eve = ctx.header.clone();
            eve.push_str("t,eve_symbol\n");
            for (i, s) in t.eve_symbols.iter().enumerate() {
                let _ = writeln!(eve, "{i},{s}");
            }
            files.push(("keyfresh_eve.csv".to_string(), eve));
            (EXIT_OK, format!("keyfresh: refreshed, guess bound {:.3e}", g.bound))
        }
        Err(e) => {
            let f = Failure::from(e.clone());
            if f.code != EXIT_NEGATIVE {
                return Err(f);
            }
            refuse(&mut rows, e.to_string());
            (EXIT_NEGATIVE, format!("keyfresh: {e}"))
        }
    };
    files.insert(0, ("keyfresh.csv".into(), finish(&rows, out)));
    Ok(Outcome { code, files, summary })
}

fn report(ctx: &Ctx) -> Result<Outcome, Failure> {
    let cfg = &ctx.scenario.system;
    let pth = p_th(ctx);
    let log2_prior = ctx.scenario.breach.log2_prior.unwrap_or_else(|| uniform_log2_prior(&key_widths(cfg)));
    let (params, t_lcm) = system_breach(cfg, log2_prior, pth)?;
    let class = params.classification();
    let ttt = time_to_threshold(&params);
    let leak = word_bit_crossovers(cfg)?;
    let best = leak.iter().copied().fold(0.5, f64::min);
    let fmt_inf = |v: f64| if v.is_infinite() { "inf".to_string() } else { format!("{v:.12e}") };
    let bt = params.breach_time();
    let generator_kind = |g: &GeneratorSpec| match g {
        GeneratorSpec::Lfsr(l) => format!("lfsr-{}", l.degree()),
        GeneratorSpec::KeyedCounter { key, .. } => format!("keyed-counter-{}", key.len()),
    };
    let rows: Vec<(&str, String)> = vec![
        ("m", cfg.m.to_string()),
        ("alpha0", cfg.alpha0.to_string()),
        ("eta", cfg.eta.to_string()),
        ("mapping", mapping_name(cfg).into()),
        ("dsr", dsr_name(cfg).into()),
        ("prng_s", generator_kind(&cfg.prng_s)),
        ("prng_dx", generator_kind(&cfg.prng_dx)),
        ("t_lcm", t_lcm.to_string()),
        ("log2_prior", format!("{log2_prior:.12e}")),
        ("inv_n_breach", format!("{:.12e}", bt.inv_n_breach)),
        ("n_breach", fmt_inf(bt.n_breach)),
        ("classification", class.to_string()),
        ("p_th", pth.to_string()),
        ("time_to_threshold_periods", fmt_inf(ttt)),
        ("recommended_refresh_slots", fmt_inf(if ttt.is_finite() { (ttt * t_lcm as f64).floor() } else { ttt })),
        ("best_word_bit_crossover", format!("{best:.6}")),
    ];
    let mut out = ctx.header.clone();
    out.push_str("field,value\n");
    for (k, v) in &rows {
        let _ = writeln!(out, "{k},{v}");
    }
    let refresh = if class == ItsClass::Ideal { "never".to_string() } else { format!("every {} slots", fmt_inf((ttt * t_lcm as f64).floor())) };
    Ok(Outcome {
        code: EXIT_OK,
        files: vec![("report.csv".into(), out)],
        summary: format!("report: {class}, 1/N_Breach = {:.6e}, refresh {refresh}", bt.inv_n_breach),
    })
}
