use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use indeltree::harness::lemmas::{verify, write_verdicts, Lemma, VerifyConfig};
use indeltree::harness::report::{emit_report, summarize};
use indeltree::harness::{run_experiment, CellStatus, ExperimentSpec};
use indeltree::io::{read_leaves, to_json_string, write_json, write_tree};
use indeltree::recon::{
    reconstruct_root, unclamped_anchor_length, ReconConfig, UnresolvedChild, DEFAULT_ANCHOR_CONSTANT,
};
use indeltree::{evolution, Error, ModelParams, Result, TieCoins, TreeShape};

#[derive(Parser)]
#[command(name = "indeltree", version, about = "Simulate, reconstruct and verify trace reconstruction on trees")]
struct Cli {
    /// Worker threads; all cores when absent.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Broadcast a random root down a tree and write every sequence.
    Simulate(SimulateArgs),
    /// Rebuild the root from leaf sequences.
    Reconstruct(ReconstructArgs),
    /// Monte-Carlo and pathwise checks, one verdict per lemma.
    Verify(VerifyArgs),
    /// Run an experiment grid and write its report.
    Sweep(SweepArgs),
}

#[derive(Args, Serialize, Deserialize)]
struct SimulateArgs {
    #[arg(long)]
    d: Option<usize>,
    #[arg(long = "H")]
    #[serde(rename = "H")]
    height: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    ps: Option<f64>,
    /// Total indel rate, split evenly.
    #[arg(long)]
    pid: Option<f64>,
    #[arg(long)]
    pi: Option<f64>,
    #[arg(long)]
    pd: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Sequences as TSV, or one JSON document when the name ends in `.json`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Edge-map sidecar for TSV output.
    #[arg(long)]
    maps: Option<PathBuf>,
    #[arg(long)]
    node_budget: Option<usize>,
    /// JSON object whose keys override the flags above.
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize)]
struct ReconstructArgs {
    #[arg(long)]
    leaves: Option<PathBuf>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long = "H")]
    #[serde(rename = "H")]
    height: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    ps: Option<f64>,
    /// Anchor-length constant.
    #[arg(long = "C")]
    #[serde(rename = "C")]
    anchor_constant: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// Seed of the tie-breaking coins.
    #[arg(long)]
    seed: Option<u64>,
    /// Island length replacing the derived one.
    #[arg(long)]
    island: Option<usize>,
    #[arg(long)]
    anchor: Option<usize>,
    /// `skip` or `abort`.
    #[arg(long)]
    unresolved: Option<UnresolvedChild>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    diagnostics: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Repeatable; `all` selects every lemma.
    #[arg(long, default_value = "all")]
    lemma: Vec<String>,
    /// Trials for every Monte-Carlo cell.
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Verdict bundle; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Verify settings merged over the bundled defaults.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Experiment spec; its keys override the flags below.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
    /// Report directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn read_config(path: &Path) -> Result<Value> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let v: Value = serde_json::from_str(&text)?;
    if !v.is_object() {
        return Err(Error::InvalidConfig(format!("{}: config must be a JSON object", path.display())));
    }
    Ok(v)
}

/// Objects merge key by key; anything else in `top` replaces `base`.
fn merge(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                merge(b.entry(k).or_insert(Value::Null), v);
            }
        }
        (b, t) => *b = t,
    }
}

fn overlay<T: Serialize + DeserializeOwned>(flags: &T, config: Option<&Path>) -> Result<T> {
    let mut v = serde_json::to_value(flags)?;
    if let Some(path) = config {
        merge(&mut v, read_config(path)?);
    }
    Ok(serde_json::from_value(v)?)
}

fn need<T>(x: Option<T>, name: &str) -> Result<T> {
    x.ok_or_else(|| Error::InvalidConfig(format!("missing --{name}")))
}

fn simulate(args: SimulateArgs) -> Result<bool> {
    let a = overlay(&args, args.config.as_deref())?;
    let (d, h, k) = (need(a.d, "d")?, need(a.height, "H")?, need(a.k, "k")?);
    let p_s = a.ps.unwrap_or(0.0);
    let (p_i, p_d) = match (a.pid, a.pi, a.pd) {
        (Some(p), None, None) => (p / 2.0, p / 2.0),
        (None, pi, pd) => (pi.unwrap_or(0.0), pd.unwrap_or(0.0)),
        _ => return Err(Error::InvalidConfig("give either --pid or --pi/--pd".into())),
    };
    let params = ModelParams::new(d, h, k, p_s, p_d, p_i)?;
    let tree = evolution::evolve_tree_with_budget(
        &params,
        a.seed.unwrap_or(0),
        a.node_budget.unwrap_or(evolution::DEFAULT_NODE_BUDGET),
    )?;
    let out = need(a.out, "out")?;
    write_tree(&out, a.maps.as_deref(), &tree)?;
    let stats = tree.length_stats(0.1);
    log::info!("wrote {} nodes; lengths in [{}, {}]", tree.sequences.len(), stats.min_len, stats.max_len);
    Ok(true)
}

fn reconstruct(args: ReconstructArgs) -> Result<bool> {
    let a = overlay(&args, args.config.as_deref())?;
    let (d, h, k) = (need(a.d, "d")?, need(a.height, "H")?, need(a.k, "k")?);
    let params = ModelParams::new(d, h, k, a.ps.unwrap_or(0.0), 0.0, 0.0)?;
    let mut config = ReconConfig::derive(&params, a.anchor_constant.unwrap_or(DEFAULT_ANCHOR_CONSTANT), a.beta)?
        .with_unresolved(a.unresolved.unwrap_or_default());
    if let Some(island) = a.island {
        let wanted = unclamped_anchor_length(config.anchor_constant, config.n);
        let anchor = a.anchor.unwrap_or(wanted.min(island.saturating_sub(1)));
        config = config.with_layout(island, anchor)?;
    } else if a.anchor.is_some() {
        return Err(Error::InvalidConfig("--anchor needs --island".into()));
    } else if config.anchor_clamped {
        log::warn!("anchor length cut to {} to fit islands of length {}", config.a, config.ell);
    }
    let shape = TreeShape::new(d, h);
    let leaves = read_leaves(&need(a.leaves, "leaves")?, &shape)?;
    let rec = reconstruct_root(&leaves, shape, &config, &TieCoins::new(a.seed.unwrap_or(0)))?;
    let bits = indeltree::io::bits_to_string(&rec.bits) + "\n";
    match &a.out {
        Some(p) => std::fs::write(p, bits).map_err(|e| Error::Io {
            path: p.clone(),
            source: e,
        })?,
        None => print!("{bits}"),
    }
    if let Some(p) = &a.diagnostics {
        #[derive(Serialize)]
        struct Bundle<'a> {
            config: &'a ReconConfig,
            #[serde(flatten)]
            diagnostics: indeltree::recon::Diagnostics,
        }
        write_json(
            p,
            &Bundle {
                config: &config,
                diagnostics: rec.diagnostics(),
            },
        )?;
    }
    if rec.failed {
        log::warn!("the root was declared radioactive; output is all zeros");
    }
    Ok(!rec.failed)
}

fn lemmas(names: &[String]) -> Result<Vec<Lemma>> {
    let mut out = Vec::new();
    for n in names.iter().flat_map(|n| n.split(',')) {
        if n == "all" {
            out.extend(Lemma::ALL);
        } else {
            out.push(n.parse()?);
        }
    }
    out.sort();
    out.dedup();
    Ok(out)
}

fn verify_cmd(args: VerifyArgs, threads: Option<usize>) -> Result<bool> {
    let mut config = VerifyConfig::default_config();
    if let Some(t) = args.trials {
        config = config.with_trials(t);
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    let config: VerifyConfig = overlay(&config, args.config.as_deref())?;
    let verdicts = verify(&config, &lemmas(&args.lemma)?, threads)?;
    for v in &verdicts {
        eprintln!(
            "{:<14} {}  n={} estimate={:.6} target={:.6}",
            serde_json::to_value(v.lemma)?.as_str().unwrap_or_default(),
            if v.pass { "PASS" } else { "FAIL" },
            v.samples,
            v.estimate,
            v.target
        );
    }
    match &args.out {
        Some(p) => write_verdicts(p, &verdicts)?,
        None => print!("{}", to_json_string(&verdicts)?),
    }
    Ok(verdicts.iter().all(|v| v.pass))
}

fn sweep(args: SweepArgs, threads: Option<usize>) -> Result<bool> {
    let mut base = serde_json::json!({});
    if let Some(s) = args.seed {
        base["seed"] = s.into();
    }
    if let Some(t) = args.trials {
        base["trials"] = t.into();
    }
    if let Some(t) = threads {
        base["threads"] = t.into();
    }
    if let Some(o) = &args.out {
        base["output"] = serde_json::to_value(o)?;
    }
    merge(&mut base, read_config(&args.config)?);
    let spec: ExperimentSpec = serde_json::from_value(base)?;
    spec.validate()?;
    let outcome = run_experiment(&spec)?;
    let dir = spec.output.clone().unwrap_or_else(|| PathBuf::from(format!("reports/{}", spec.name)));
    let paths = emit_report(&outcome, &dir)?;
    let summary = summarize(&outcome);
    for c in &summary.cells {
        let agreement = c.agreement.map_or(f64::NAN, |m| m.mean);
        eprintln!("cell {:>3}: {:?}, {} trials, mean agreement {agreement:.6}", c.index, c.status, c.trials);
    }
    eprintln!("report written to {}", paths.summary.parent().unwrap_or(&dir).display());
    Ok(outcome.cells.iter().all(|c| c.status == CellStatus::Complete))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Reconstruct(a) => reconstruct(a),
        Command::Verify(a) => verify_cmd(a, cli.threads),
        Command::Sweep(a) => sweep(a, cli.threads),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
