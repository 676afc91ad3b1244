mod config;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use csbm::netdata::{load_label_map, load_multiplex, write_edge_list};
use csbm::report::{self, Psm};
use csbm::sampler::SweepMode;
use csbm::synthgen::{generate, read_truth, write_truth};
use csbm::{run, select_k, DyadData, FamilySpec, Init, PartitionPrior, SamplerConfig};
use serde::Serialize;
use serde_json::json;

use config::{InitChoice, RunConfig};

#[derive(Parser)]
#[command(
    name = "csbm",
    version,
    about = "Collapsed Bayesian stochastic block models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a planted-partition network from the [generate] section.
    Generate(Args),
    /// Run the collapsed Gibbs sampler and report at the MAP partition.
    Fit(Args),
    /// Compare the best collapsed log posterior over a grid of K.
    SelectK(Args),
    /// Block summaries (and degree-corrected rates) at given labels.
    Report(Args),
}

#[derive(clap::Args)]
struct Args {
    /// TOML run configuration.
    config: PathBuf,
    /// Sampler seed (generator seed for `generate`).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    sweeps: Option<usize>,
    /// Number of communities (generator K for `generate`).
    #[arg(long)]
    k: Option<usize>,
    /// Output directory, overriding `out` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Exit code 1 for bad input, 2 for numeric failure.
enum Failure {
    Input(String),
    Numeric(String),
}

impl From<csbm::Error> for Failure {
    fn from(e: csbm::Error) -> Self {
        if e.is_numeric() {
            Failure::Numeric(e.to_string())
        } else {
            Failure::Input(e.to_string())
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Input(m) | Failure::Numeric(m) => f.write_str(m),
        }
    }
}

fn input(msg: impl Into<String>) -> Failure {
    Failure::Input(msg.into())
}

type Outcome<T> = std::result::Result<T, Failure>;

#[derive(Serialize)]
struct DataInfo {
    source: &'static str,
    n: usize,
    kind: csbm::Kind,
    modality: csbm::Modality,
    layers: usize,
    dyads: u64,
    nonzero: Vec<usize>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    config: &'a RunConfig,
    data: Option<DataInfo>,
    result: serde_json::Value,
    outputs: Vec<String>,
}

struct Ctx {
    cfg: RunConfig,
    base: PathBuf,
    out: PathBuf,
    outputs: Vec<String>,
}

impl Ctx {
    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    /// Path of an artifact in the output directory, recorded for the manifest.
    fn artifact(&mut self, name: &str) -> PathBuf {
        self.outputs.push(name.to_string());
        self.out.join(name)
    }
}

struct Loaded {
    data: DyadData,
    truth: Option<Vec<usize>>,
    source: &'static str,
}

fn info(l: &Loaded) -> DataInfo {
    DataInfo {
        source: l.source,
        n: l.data.n(),
        kind: l.data.kind(),
        modality: l.data.modality(),
        layers: l.data.n_layers(),
        dyads: l.data.dyad_count(),
        nonzero: l
            .data
            .layers()
            .iter()
            .map(|x| x.entries().values().filter(|&&v| v != 0.0).count())
            .collect(),
    }
}

/// Data from `[data]` when present, otherwise generated from `[generate]`.
fn load_data(ctx: &Ctx) -> Outcome<Loaded> {
    if let Some(d) = &ctx.cfg.data {
        let paths: Vec<PathBuf> = d.layers.iter().map(|p| ctx.resolve(p)).collect();
        let mut data = load_multiplex(&paths, d.kind, d.modality, d.n)?;
        if let Some(names) = &d.names {
            let ids = load_label_map(ctx.resolve(names), data.n())?;
            data = data.with_node_ids(ids)?;
        }
        let truth = match &d.truth {
            Some(t) => {
                let z = read_truth(ctx.resolve(t))?;
                if z.len() != data.n() {
                    return Err(input(format!(
                        "truth file covers {} nodes but the data has {}",
                        z.len(),
                        data.n()
                    )));
                }
                Some(z)
            }
            None => None,
        };
        return Ok(Loaded {
            data,
            truth,
            source: "files",
        });
    }
    if let Some(g) = &ctx.cfg.generate {
        let (data, z) = generate(g)?;
        return Ok(Loaded {
            data,
            truth: Some(z),
            source: "generated",
        });
    }
    Err(input("the config needs a [data] or a [generate] section"))
}

fn family_for(cfg: &RunConfig, data: &DyadData) -> FamilySpec {
    cfg.model
        .clone()
        .unwrap_or_else(|| FamilySpec::default_for(data.modality()))
}

fn sampler_config(ctx: &Ctx, loaded: &Loaded, prior: PartitionPrior) -> Outcome<SamplerConfig> {
    let s = &ctx.cfg.sampler;
    let mut c = SamplerConfig::new(family_for(&ctx.cfg, &loaded.data), prior);
    c.sweeps = s.sweeps;
    c.burn_in = s.burn_in;
    c.thin = s.thin;
    c.seed = s.seed;
    c.n_chains = s.n_chains;
    c.allow_new_cluster = s.allow_new_cluster;
    c.sweep_mode = if s.argmax {
        SweepMode::Argmax
    } else {
        SweepMode::Sample
    };
    c.check_every = s.check_every;
    c.execution = s.execution;
    c.level = s.level;
    c.init = match s.init {
        None => None,
        Some(InitChoice::Random) => Some(Init::Random),
        Some(InitChoice::Singleton) => Some(Init::Singleton),
        Some(InitChoice::Truth) => match &loaded.truth {
            Some(t) => Some(Init::Given(t.clone())),
            None => return Err(input("init = \"truth\" needs truth labels")),
        },
    };
    Ok(c)
}

fn cmd_generate(ctx: &mut Ctx) -> Outcome<(Option<DataInfo>, serde_json::Value)> {
    let g = ctx
        .cfg
        .generate
        .clone()
        .ok_or_else(|| input("`generate` needs a [generate] section"))?;
    let (data, z) = generate(&g)?;
    for l in 0..data.n_layers() {
        let p = ctx.artifact(&format!("layer{}.txt", l + 1));
        write_edge_list(&data, l, p)?;
    }
    let p = ctx.artifact("truth.tsv");
    write_truth(p, &z)?;
    let mut sizes = vec![0usize; g.k];
    for &k in &z {
        sizes[k] += 1;
    }
    let loaded = Loaded {
        data,
        truth: Some(z),
        source: "generated",
    };
    Ok((Some(info(&loaded)), json!({ "truth_sizes": sizes })))
}

fn write_psm_order(path: &Path, psm: &Psm, z: &[usize]) -> Outcome<()> {
    let mut w =
        csv::Writer::from_path(path).map_err(|e| input(format!("{}: {e}", path.display())))?;
    let rows = psm
        .order
        .iter()
        .enumerate()
        .map(|(pos, &i)| [pos.to_string(), i.to_string(), (z[i] + 1).to_string()]);
    let res: Result<(), csv::Error> = (|| {
        w.write_record(["position", "node", "cluster"])?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    })();
    res.map_err(|e| input(format!("{}: {e}", path.display())))
}

fn cmd_fit(ctx: &mut Ctx) -> Outcome<(Option<DataInfo>, serde_json::Value)> {
    let loaded = load_data(ctx)?;
    let prior = ctx
        .cfg
        .prior
        .clone()
        .ok_or_else(|| input("`fit` needs a [prior] section or --k"))?;
    let sc = sampler_config(ctx, &loaded, prior)?;
    let r = run(&sc, &loaded.data, loaded.truth.as_deref())?;
    let ids = loaded.data.node_ids();
    report::write_labels(ctx.artifact("labels.csv"), &r.z_map, ids)?;
    report::write_trace(ctx.artifact("trace.csv"), &r.traces)?;
    report::write_psm(ctx.artifact("psm.csv"), &r.psm)?;
    let p = ctx.artifact("psm_order.csv");
    write_psm_order(&p, &r.psm, &r.z_map)?;
    report::write_block_summary(ctx.artifact("blocks.csv"), &r.blocks)?;
    if let Some(t) = &loaded.truth {
        let c = report::confusion(t, &r.z_map)?;
        report::write_confusion(ctx.artifact("confusion.csv"), &c)?;
    }
    let result = json!({
        "map_log_posterior": r.map_log_posterior,
        "map_chain": r.map_chain,
        "map_sweep": r.map_sweep,
        "chain_seeds": r.chain_seeds,
        "retained_samples": r.retained,
        "k_active": r.sizes.iter().filter(|&&s| s > 0).count(),
        "cluster_sizes": r.sizes,
        "ari": r.ari,
        "max_drift": r.max_drift,
    });
    Ok((Some(info(&loaded)), result))
}

fn cmd_select_k(ctx: &mut Ctx) -> Outcome<(Option<DataInfo>, serde_json::Value)> {
    let loaded = load_data(ctx)?;
    let ks = ctx
        .cfg
        .select_k
        .as_ref()
        .ok_or_else(|| input("`select-k` needs a [select_k] section"))?
        .ks
        .clone();
    let alpha = ctx.cfg.prior.as_ref().map_or(1.0, |p| p.alpha());
    let k0 = ks.first().copied().unwrap_or(1);
    let sc = sampler_config(
        ctx,
        &loaded,
        PartitionPrior::DirichletMultinomial { alpha, k: k0 },
    )?;
    let rows = select_k(&loaded.data, &ks, &sc)?;
    report::write_select_k(ctx.artifact("select_k.csv"), &rows)?;
    let best = rows
        .iter()
        .fold(rows[0], |b, &r| if r.1 > b.1 { r } else { b });
    let table: Vec<_> = rows
        .iter()
        .map(|&(k, v)| json!({ "k": k, "log_posterior": v }))
        .collect();
    Ok((
        Some(info(&loaded)),
        json!({ "table": table, "best_k": best.0 }),
    ))
}

/// Reads a `node,cluster` CSV (rows in node order, 1-based clusters).
fn read_labels(path: &Path, n: usize) -> Outcome<Vec<usize>> {
    let bad = |m: String| input(format!("{}: {m}", path.display()));
    let mut rd = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let mut z = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let c: usize = rec
            .get(1)
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| bad(format!("bad cluster in row {}", z.len() + 1)))?;
        if c == 0 {
            return Err(bad("clusters are 1-based".into()));
        }
        z.push(c - 1);
    }
    if z.len() != n {
        return Err(bad(format!("{} labels for {n} nodes", z.len())));
    }
    Ok(z)
}

fn cmd_report(ctx: &mut Ctx) -> Outcome<(Option<DataInfo>, serde_json::Value)> {
    let loaded = load_data(ctx)?;
    let rep = ctx
        .cfg
        .report
        .clone()
        .ok_or_else(|| input("`report` needs a [report] section"))?;
    let z = match &rep.labels {
        Some(p) => read_labels(&ctx.resolve(p), loaded.data.n())?,
        None => loaded
            .truth
            .clone()
            .ok_or_else(|| input("`report` needs [report].labels or truth labels"))?,
    };
    let spec = family_for(&ctx.cfg, &loaded.data);
    let table = report::block_summary(&loaded.data, &z, &spec, ctx.cfg.sampler.level)?;
    report::write_block_summary(ctx.artifact("blocks.csv"), &table)?;
    let mut result = json!({ "blocks": table.entries.len() });
    if let Some(t) = &loaded.truth {
        let c = report::confusion(t, &z)?;
        report::write_confusion(ctx.artifact("confusion.csv"), &c)?;
        result["ari"] = json!(report::ari(t, &z)?);
    }
    if let Some(g) = rep.degree_corrected {
        let theta = csbm::netdata::estimate_propensities(&loaded.data)?.theta;
        let rows = report::degree_corrected_summary(
            &loaded.data,
            &z,
            &theta,
            g.a,
            g.b,
            ctx.cfg.sampler.level,
        )?;
        let (mut diag, mut off, mut nd, mut no) = (0.0, 0.0, 0usize, 0usize);
        for r in &rows {
            if r.r == r.s {
                diag += r.mean;
                nd += 1;
            } else {
                off += r.mean;
                no += 1;
            }
        }
        report::write_omega(ctx.artifact("omega.csv"), &rows)?;
        if nd > 0 && no > 0 {
            result["omega_diag_mean"] = json!(diag / nd as f64);
            result["omega_offdiag_mean"] = json!(off / no as f64);
        }
    }
    Ok((Some(info(&loaded)), result))
}

fn apply_overrides(cmd: &str, cfg: &mut RunConfig, a: &Args) -> Outcome<()> {
    let reject = |flag: &str| Err(input(format!("--{flag} does not apply to `{cmd}`")));
    match cmd {
        "generate" => {
            let g = cfg
                .generate
                .as_mut()
                .ok_or_else(|| input("`generate` needs a [generate] section"))?;
            if a.sweeps.is_some() {
                return reject("sweeps");
            }
            if let Some(s) = a.seed {
                g.seed = s;
            }
            if let Some(k) = a.k {
                g.k = k;
            }
        }
        "report" => {
            for (flag, set) in [
                ("seed", a.seed.is_some()),
                ("sweeps", a.sweeps.is_some()),
                ("k", a.k.is_some()),
            ] {
                if set {
                    return reject(flag);
                }
            }
        }
        _ => {
            if let Some(s) = a.seed {
                cfg.sampler.seed = s;
            }
            if let Some(s) = a.sweeps {
                cfg.sampler.sweeps = s;
            }
            if let Some(k) = a.k {
                if cmd == "select-k" {
                    return reject("k");
                }
                let alpha = cfg.prior.as_ref().map_or(1.0, |p| p.alpha());
                cfg.prior = Some(PartitionPrior::DirichletMultinomial { alpha, k });
            }
            if cmd == "fit" && cfg.prior.is_none() {
                if let Some(g) = &cfg.generate {
                    cfg.prior = Some(PartitionPrior::DirichletMultinomial { alpha: 1.0, k: g.k });
                }
            }
        }
    }
    Ok(())
}

fn execute(cmd: &str, a: &Args) -> Outcome<()> {
    let mut cfg = RunConfig::load(&a.config).map_err(Failure::Input)?;
    apply_overrides(cmd, &mut cfg, a)?;
    let base = a.config.parent().map(Path::to_path_buf).unwrap_or_default();
    let out = match (&a.out, &cfg.out) {
        (Some(o), _) => o.clone(),
        (None, Some(o)) if o.is_absolute() => o.clone(),
        (None, Some(o)) => base.join(o),
        (None, None) => {
            return Err(input(
                "no output directory: set `out` in the config or pass --out",
            ))
        }
    };
    std::fs::create_dir_all(&out).map_err(|e| input(format!("{}: {e}", out.display())))?;
    let mut ctx = Ctx {
        cfg,
        base,
        out,
        outputs: Vec::new(),
    };
    let (data, result) = match cmd {
        "generate" => cmd_generate(&mut ctx)?,
        "fit" => cmd_fit(&mut ctx)?,
        "select-k" => cmd_select_k(&mut ctx)?,
        _ => cmd_report(&mut ctx)?,
    };
    ctx.outputs.push("manifest.json".into());
    let manifest = Manifest {
        tool: "csbm",
        version: env!("CARGO_PKG_VERSION"),
        command: cmd,
        config: &ctx.cfg,
        data,
        result,
        outputs: ctx.outputs.clone(),
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| input(e.to_string()))?;
    let path = ctx.out.join("manifest.json");
    std::fs::write(&path, text + "\n").map_err(|e| input(format!("{}: {e}", path.display())))?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let (cmd, args) = match &cli.command {
        Command::Generate(a) => ("generate", a),
        Command::Fit(a) => ("fit", a),
        Command::SelectK(a) => ("select-k", a),
        Command::Report(a) => ("report", a),
    };
    match execute(cmd, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("csbm {cmd}: {f}");
            match f {
                Failure::Input(_) => ExitCode::from(1),
                Failure::Numeric(_) => ExitCode::from(2),
            }
        }
    }
}
