//! Sub-command implementations.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;
use macex_core::code::{
    audit_lemma4, expurgate, generate_codebooks, packing_averages, per_pair_maxima, single_user_packing_check,
    time_sharing_sequence, CodebookPair, Lemma4Audit, PackingReport, SingleUserReport,
};
use macex_core::exponent::RegionSearch;
use macex_core::prob::axis;
use macex_core::sim::{bound_curve, error_prob_exact, error_prob_mc, ErrorEstimate, SimulationRow};
use macex_core::{region_search, Branch, Channel, ExponentSolver, InputLaw, RatePair, SolverSpec};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{read, LawSpec, SweepConfig};
use crate::output::{emit, float, json, sha256_hex, write_file, write_manifest};
use crate::{threads_from_env, Cli, CliError, Command, GlobalArgs};

pub fn dispatch(cli: &Cli) -> Result<(), CliError> {
    let g = &cli.global;
    match &cli.command {
        Command::Exponent(a) => cmd_exponent(g, a),
        Command::VerifyPacking(a) => cmd_verify_packing(g, a),
        Command::Expurgate(a) => cmd_expurgate(g, a),
        Command::Simulate(a) => cmd_simulate(g, a),
        Command::Region(a) => cmd_region(g, a),
    }
}

fn load_channel(path: Option<&Path>) -> Result<(Channel, Value), CliError> {
    let path = path.ok_or_else(|| CliError::Validation("a channel file is required (--channel)".into()))?;
    let text = read(path)?;
    let w = Channel::from_json(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    let echo = serde_json::to_value(w.to_file()).expect("channel serializes");
    Ok((w, echo))
}

fn rates_or(rx: Option<f64>, ry: Option<f64>, nominal: RatePair) -> Result<RatePair, CliError> {
    Ok(RatePair::new(rx.unwrap_or(nominal.r_x), ry.unwrap_or(nominal.r_y))?)
}

#[derive(Debug, Args)]
pub struct ExponentArgs {
    /// TOML sweep configuration (channel, input_law, rates.r_x/r_y, solver, delta, output).
    #[arg(long)]
    pub config: PathBuf,
}

/// CSV header of `exponent`.
pub const EXPONENT_HEADER: &str = "rate_x,rate_y,e_x,e_y,e_xy,e_ex,baseline,branch,lattice_d";

fn cmd_exponent(g: &GlobalArgs, a: &ExponentArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let cfg = SweepConfig::load(&a.config)?;
    let channel_path = g.channel.clone().unwrap_or_else(|| cfg.channel.clone());
    let (w, channel_echo) = load_channel(Some(&channel_path))?;
    let law = cfg.input_law.build(w.x_size(), w.y_size())?;
    let threads = threads_from_env(&g.threads_env)?;
    let solver = ExponentSolver::new(law, cfg.solver.clone().with_threads(threads))?;
    let mut csv = format!("{EXPONENT_HEADER}\n");
    for &rx in &cfg.rates.r_x {
        for &ry in &cfg.rates.r_y {
            let rates = RatePair::new(rx, ry)?;
            let b = solver.breakdown(&w, rates, cfg.delta)?;
            let ex = b.combined();
            let base = solver.baseline(&w, rates, cfg.delta)?;
            csv.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                float(rx),
                float(ry),
                float(b.get(Branch::X).value),
                float(b.get(Branch::Y).value),
                float(b.get(Branch::XY).value),
                float(ex.value),
                float(base.value),
                ex.branch.name(),
                cfg.solver.lattice_denominator
            ));
        }
    }
    let out = g.out.clone().or(cfg.output.clone());
    let params = json!({
        "channel": channel_echo,
        "input_law": cfg.input_law,
        "rates": cfg.rates,
        "solver": cfg.solver,
        "delta": cfg.delta,
        "seed": g.seed.unwrap_or(cfg.seed),
    });
    emit(out.as_deref(), &csv, "exponent", params, started)
}

/// How the codebook pair is obtained.
#[derive(Debug, Clone, Args)]
pub struct CodeSource {
    /// Codebook JSON file; otherwise a pair is generated from --n/--mx/--my/--seed.
    #[arg(long)]
    pub codebook: Option<PathBuf>,
    /// Blocklength of generated codewords.
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of X codewords to generate.
    #[arg(long)]
    pub mx: Option<usize>,
    /// Number of Y codewords to generate.
    #[arg(long)]
    pub my: Option<usize>,
    /// Input law JSON (`{uniform, u_size}` or `{p_u, x_given_u, y_given_u}`); default uniform.
    #[arg(long)]
    pub law: Option<PathBuf>,
    /// |U| of the default uniform law.
    #[arg(long, default_value_t = 1)]
    pub u_size: usize,
    /// Input alphabet sizes when no channel is given.
    #[arg(long, default_value_t = 2)]
    pub x_size: usize,
    #[arg(long, default_value_t = 2)]
    pub y_size: usize,
}

impl CodeSource {
    fn load(&self, g: &GlobalArgs) -> Result<(CodebookPair, Value), CliError> {
        if let Some(path) = &self.codebook {
            if self.n.is_some() || self.mx.is_some() || self.my.is_some() {
                return Err(CliError::Validation("give either --codebook or --n/--mx/--my, not both".into()));
            }
            let text = read(path)?;
            let c = CodebookPair::from_json(&text).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
            return Ok((c, json!({ "codebook_sha256": sha256_hex(text.as_bytes()) })));
        }
        let (Some(n), Some(mx), Some(my)) = (self.n, self.mx, self.my) else {
            return Err(CliError::Validation("give --codebook or all of --n, --mx, --my".into()));
        };
        let seed = g.seed.ok_or_else(|| CliError::Validation("--seed is required to generate codebooks".into()))?;
        let (kx, ky) = match &g.channel {
            Some(p) => {
                let (w, _) = load_channel(Some(p))?;
                (w.x_size(), w.y_size())
            }
            None => (self.x_size, self.y_size),
        };
        let (law, law_echo) = match &self.law {
            Some(p) => (LawSpec::load_json(p, kx, ky)?, json!({ "law_sha256": sha256_hex(read(p)?.as_bytes()) })),
            None => (LawSpec::uniform(self.u_size).build(kx, ky)?, json!(LawSpec::uniform(self.u_size))),
        };
        let u = time_sharing_sequence(&law, n)?;
        let c = generate_codebooks(&law, &u, mx, my, seed)?;
        let echo = json!({ "n": n, "m_x": mx, "m_y": my, "seed": seed, "law": law_echo, "x_size": kx, "y_size": ky });
        Ok((c, echo))
    }
}

#[derive(Debug, Args)]
pub struct PackingArgs {
    #[command(flatten)]
    pub source: CodeSource,
    /// Rate R_X in the packing functions (default: log2 M_X / n).
    #[arg(long)]
    pub rx: Option<f64>,
    /// Rate R_Y (default: log2 M_Y / n).
    #[arg(long)]
    pub ry: Option<f64>,
    /// δ against which each inequality is checked.
    #[arg(long, default_value_t = 0.0)]
    pub delta: f64,
}

#[derive(Serialize)]
struct PackingDocument {
    n: usize,
    m_x: usize,
    m_y: usize,
    rates: RatePair,
    delta: f64,
    averages: PackingReport,
    per_pair: PackingReport,
    single_user_x: SingleUserReport,
    single_user_y: SingleUserReport,
}

fn cmd_verify_packing(g: &GlobalArgs, a: &PackingArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let (c, echo) = a.source.load(g)?;
    let rates = rates_or(a.rx, a.ry, c.nominal_rates())?;
    let doc = PackingDocument {
        n: c.n(),
        m_x: c.m_x(),
        m_y: c.m_y(),
        rates,
        delta: a.delta,
        averages: packing_averages(&c, rates, a.delta)?,
        per_pair: per_pair_maxima(&c, rates, a.delta)?,
        single_user_x: single_user_packing_check(c.cx(), rates.r_x, c.n())?,
        single_user_y: single_user_packing_check(c.cy(), rates.r_y, c.n())?,
    };
    let params = json!({ "code": echo, "rates": rates, "delta": a.delta });
    emit(g.out.as_deref(), &json(&doc), "verify-packing", params, started)
}

#[derive(Debug, Args)]
pub struct ExpurgateArgs {
    #[command(flatten)]
    pub source: CodeSource,
    /// Rate R_X deciding the expurgated book and thresholds (default: log2 M_X / n).
    #[arg(long)]
    pub rx: Option<f64>,
    /// Rate R_Y (default: log2 M_Y / n).
    #[arg(long)]
    pub ry: Option<f64>,
    /// δ used to decide which codewords already meet their per-pair bounds.
    #[arg(long, default_value_t = 0.0)]
    pub delta: f64,
}

#[derive(Serialize)]
struct ExpurgationDocument {
    book: String,
    input_sizes: (usize, usize),
    output_sizes: (usize, usize),
    product_bound_holds: bool,
    achieved_delta: f64,
    kept_x: Vec<usize>,
    kept_y: Vec<usize>,
    steps: Vec<macex_core::code::ExpurgationStep>,
    notes: Vec<String>,
    per_pair: PackingReport,
    audit: Lemma4Audit,
}

pub fn report_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".report.json");
    PathBuf::from(s)
}

fn cmd_expurgate(g: &GlobalArgs, a: &ExpurgateArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let (c, echo) = a.source.load(g)?;
    let rates = rates_or(a.rx, a.ry, c.nominal_rates())?;
    let e = expurgate(&c, rates, a.delta)?;
    let audit = audit_lemma4(&e.code, rates, e.achieved_delta)?;
    let doc = ExpurgationDocument {
        book: format!("{:?}", e.book),
        input_sizes: (c.m_x(), c.m_y()),
        output_sizes: (e.code.m_x(), e.code.m_y()),
        product_bound_holds: e.product_bound_holds,
        achieved_delta: e.achieved_delta,
        kept_x: e.kept_x.clone(),
        kept_y: e.kept_y.clone(),
        steps: e.steps.clone(),
        notes: e.notes.clone(),
        per_pair: e.report.clone(),
        audit,
    };
    let params = json!({ "code": echo, "rates": rates, "delta": a.delta });
    match &g.out {
        None => {
            print!("{}", json(&json!({ "codebook": e.code.to_file(), "report": doc })));
            Ok(())
        }
        Some(out) => {
            write_file(out, &e.code.to_json())?;
            write_file(&report_path(out), &json(&doc))?;
            write_manifest(out, "expurgate", params, started)
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Codebook JSON file.
    #[arg(long)]
    pub codebook: PathBuf,
    /// Add a row from exhaustive evaluation over all |Z|^n outputs.
    #[arg(long)]
    pub exact: bool,
    /// Add a Monte Carlo row with this many trials.
    #[arg(long)]
    pub trials: Option<u64>,
    /// Rate R_X for the exponent and bound columns (default: log2 M_X / n).
    #[arg(long)]
    pub rx: Option<f64>,
    /// Rate R_Y (default: log2 M_Y / n).
    #[arg(long)]
    pub ry: Option<f64>,
    /// Lattice denominator for the exponent column.
    #[arg(long, default_value_t = 6)]
    pub lattice: u32,
    #[arg(long, default_value_t = 0.0)]
    pub delta: f64,
    /// Leave the exponent, bound and branch columns empty.
    #[arg(long)]
    pub skip_exponent: bool,
}

fn cmd_simulate(g: &GlobalArgs, a: &SimulateArgs) -> Result<(), CliError> {
    let started = Instant::now();
    if !a.exact && a.trials.is_none() {
        return Err(CliError::Validation("give --exact, --trials N, or both".into()));
    }
    let (w, channel_echo) = load_channel(g.channel.as_deref())?;
    let text = read(&a.codebook)?;
    let c = CodebookPair::from_json(&text).map_err(|e| CliError::Validation(format!("{}: {e}", a.codebook.display())))?;
    let threads = threads_from_env(&g.threads_env)?;
    let rates = rates_or(a.rx, a.ry, c.nominal_rates())?;
    let (exponent, bound, branch) = if a.skip_exponent {
        (f64::NAN, f64::NAN, String::new())
    } else {
        let solver = ExponentSolver::new(c.law().clone(), SolverSpec::lattice(a.lattice).with_threads(threads))?;
        let e = solver.expurgated(&w, rates, a.delta)?;
        let bound = bound_curve(&e, &[c.n()], a.delta)[0].1;
        (e.value, bound, e.branch.name().to_string())
    };
    let mut estimates: Vec<ErrorEstimate> = Vec::new();
    if a.exact {
        estimates.push(error_prob_exact(&c, &w, threads)?);
    }
    if let Some(trials) = a.trials {
        let seed = g.seed.ok_or_else(|| CliError::Validation("--seed is required for Monte Carlo".into()))?;
        estimates.push(error_prob_mc(&c, &w, trials, seed, threads)?);
    }
    let mut csv = format!("{}\n", SimulationRow::HEADER);
    for est in estimates {
        let row = SimulationRow {
            n: c.n(),
            m_x: c.m_x(),
            m_y: c.m_y(),
            rate_x: rates.r_x,
            rate_y: rates.r_y,
            trials: est.trials,
            error: est.value,
            stderr: est.stderr,
            bound,
            exponent,
            branch: branch.clone(),
        };
        csv.push_str(&row.to_csv());
        csv.push('\n');
    }
    let params = json!({
        "channel": channel_echo,
        "codebook_sha256": sha256_hex(text.as_bytes()),
        "exact": a.exact,
        "trials": a.trials,
        "seed": g.seed,
        "rates": rates,
        "lattice": a.lattice,
        "delta": a.delta,
        "skip_exponent": a.skip_exponent,
    });
    emit(g.out.as_deref(), &csv, "simulate", params, started)
}

#[derive(Debug, Args)]
pub struct RegionArgs {
    /// Rate R_X of the pair to test.
    #[arg(long)]
    pub rx: f64,
    /// Rate R_Y of the pair to test.
    #[arg(long)]
    pub ry: f64,
    /// Grid resolution for time-sharing weights and per-u input distributions.
    #[arg(long, default_value_t = 8)]
    pub u_grid: u32,
}

#[derive(Serialize)]
struct RegionDocument {
    rates: RatePair,
    contains: bool,
    verdict: &'static str,
    slack: f64,
    truncated: bool,
    pentagon: macex_core::Pentagon,
    witness: LawSpec,
}

fn law_spec(law: &InputLaw) -> LawSpec {
    let pu: Vec<f64> = law.joint().marginalize(&[axis::U]).expect("U axis").probs().to_vec();
    let cond = |size: usize, f: &dyn Fn(usize, usize) -> f64| -> Vec<Vec<f64>> {
        (0..law.u_size())
            .map(|u| (0..size).map(|a| if pu[u] > 0.0 { f(u, a) / pu[u] } else { 1.0 / size as f64 }).collect())
            .collect()
    };
    LawSpec {
        p_u: Some(pu.clone()),
        x_given_u: Some(cond(law.x_size(), &|u, x| law.p_ux(u, x))),
        y_given_u: Some(cond(law.y_size(), &|u, y| law.p_uy(u, y))),
        ..LawSpec::default()
    }
}

fn cmd_region(g: &GlobalArgs, a: &RegionArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let (w, channel_echo) = load_channel(g.channel.as_deref())?;
    let rates = RatePair::new(a.rx, a.ry)?;
    let r: RegionSearch = region_search(rates, &w, a.u_grid)?;
    let doc = RegionDocument {
        rates,
        contains: r.contains,
        verdict: if r.contains { "contains" } else { "not found on grid" },
        slack: r.slack,
        truncated: r.truncated,
        pentagon: r.pentagon,
        witness: law_spec(&r.law),
    };
    let params = json!({ "channel": channel_echo, "rates": rates, "u_grid": a.u_grid });
    emit(g.out.as_deref(), &json(&doc), "region", params, started)
}
