use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use dpaudit::auditors::{
    AuditorConfig, DeltaSiegeConfig, DpSniperConfig, DpsgdAuditConfig, MplConfig, SurrogateFn, Tool,
};
use dpaudit::fp_analyzer::{
    construct_attack_with_margin, regions_for, write_regions_csv, Verdict, DEFAULT_MARGIN,
};
use dpaudit::harness::{
    run_audit, run_sample, AuditRecord, ExperimentConfig, FigurePlan, Grid, RunKey, SampleCache,
    FIGURES,
};
use dpaudit::mechanisms::{collision_free_seed, DpsgdConfig, Family, MechanismSpec, Pattern};
use dpaudit::Error;

const EXIT_UNAVAILABLE: u8 = 2;
const EXIT_INTEGRITY: u8 = 3;
const EXIT_REFUTED: u8 = 4;

/// Blackbox differential-privacy auditing.
#[derive(Parser)]
#[command(name = "dpaudit", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw sample batches for every grid point and seed into the cache.
    Sample(SampleArgs),
    /// Audit every grid point and seed and classify the claims.
    Audit(AuditArgs),
    /// Solve the false-positive regions for a family against an auditor.
    Region(RegionArgs),
    /// Construct a curator attack and confirm it with an audit.
    Attack(AttackArgs),
    /// Emit the data series behind a published figure.
    Reproduce(ReproduceArgs),
}

#[derive(Args)]
struct MechanismArgs {
    /// Experiment config (TOML). Flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Mechanism spec file (TOML).
    #[arg(long, conflicts_with = "family")]
    mechanism: Option<PathBuf>,
    /// Mechanism family, e.g. laplace, adapted_svt, rappor.
    #[arg(long)]
    family: Option<Family>,
    /// Mechanism parameters, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    params: Vec<f64>,
    /// Sweep this many values of one parameter, comma separated.
    #[arg(long, value_delimiter = ',')]
    grid: Vec<f64>,
    /// Index of the swept parameter.
    #[arg(long, default_value_t = 0)]
    grid_param: usize,
}

#[derive(Args)]
struct AuditorArgs {
    /// dp_sniper, mpl, delta_siege or dpsgd_audit.
    #[arg(long)]
    auditor: Option<Tool>,
    /// Probability floor (DP-Sniper) or smallest tail probability (Delta-Siege, DPSGD-Audit).
    #[arg(long)]
    c: Option<f64>,
    /// Density floor (MPL).
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    delta_c: Option<f64>,
    /// Privacy surrogate: inv-exp-delta, delta-over-eps[:SENS] or exp-k:K.
    #[arg(long)]
    rho: Option<SurrogateFn>,
    /// Per-input sample budget.
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Args)]
struct SampleArgs {
    #[command(flatten)]
    mechanism: MechanismArgs,
    #[command(flatten)]
    auditor: AuditorArgs,
    /// Seeds, comma separated.
    #[arg(long, value_delimiter = ',')]
    seed: Vec<u64>,
    /// Input pattern by its display name, e.g. "One Above".
    #[arg(long)]
    pattern: Option<Pattern>,
    /// Cache directory.
    #[arg(long)]
    cache: Option<PathBuf>,
}

#[derive(Args)]
struct AuditArgs {
    #[command(flatten)]
    mechanism: MechanismArgs,
    #[command(flatten)]
    auditor: AuditorArgs,
    #[arg(long, value_delimiter = ',')]
    seed: Vec<u64>,
    #[arg(long)]
    pattern: Option<Pattern>,
    /// Claimed epsilons, comma separated.
    #[arg(long, value_delimiter = ',')]
    claims: Vec<f64>,
    /// Multiplies the auditor's sample budget.
    #[arg(long)]
    scale: Option<f64>,
    /// CSV output; standard output when absent.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Line-delimited JSON report.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct RegionArgs {
    #[arg(long)]
    family: Family,
    #[command(flatten)]
    auditor: AuditorArgs,
    #[arg(long)]
    eps_c: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AttackArgs {
    #[arg(long)]
    family: Family,
    #[command(flatten)]
    auditor: AuditorArgs,
    #[arg(long)]
    eps_c: f64,
    /// Relative distance kept from every region boundary.
    #[arg(long, default_value_t = DEFAULT_MARGIN)]
    margin: f64,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    seed: Vec<u64>,
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    /// Skip the confirming audit.
    #[arg(long)]
    no_confirm: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReproduceArgs {
    /// Figure id (fig5 to fig13, table6); `list` prints them.
    figure: String,
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    seed: Vec<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Sample(a) => sample(a),
        Command::Audit(a) => audit(a),
        Command::Region(a) => region(a),
        Command::Attack(a) => attack(a),
        Command::Reproduce(a) => reproduce(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            let integrity = e
                .chain()
                .any(|c| matches!(c.downcast_ref::<Error>(), Some(Error::Integrity(_))));
            ExitCode::from(if integrity { EXIT_INTEGRITY } else { 1 })
        }
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(io::stdout().lock()),
    })
}

/// Builds an auditor from flags alone; `base` supplies values for unset flags.
fn auditor_from(args: &AuditorArgs, base: Option<&AuditorConfig>) -> Result<AuditorConfig> {
    let tool = match (args.auditor, base) {
        (Some(t), _) => t,
        (None, Some(b)) => b.tool(),
        (None, None) => bail!("--auditor is required"),
    };
    auditor_for(tool, args, base)
}

fn auditor_for(
    tool: Tool,
    args: &AuditorArgs,
    base: Option<&AuditorConfig>,
) -> Result<AuditorConfig> {
    let base = base.filter(|b| b.tool() == tool);
    let mut cfg = match base {
        Some(b) => b.clone(),
        None => match tool {
            Tool::DpSniper => AuditorConfig::DpSniper(DpSniperConfig::new(args.c.unwrap_or(0.01))),
            Tool::Mpl => AuditorConfig::Mpl(MplConfig::new(args.tau.unwrap_or(1e-4))),
            Tool::DeltaSiege => AuditorConfig::DeltaSiege(DeltaSiegeConfig::new(
                SurrogateFn::default(),
                args.delta_c
                    .context("--delta-c is required for delta_siege")?,
            )),
            Tool::DpsgdAudit => AuditorConfig::DpsgdAudit(DpsgdAuditConfig::new(
                args.delta_c
                    .context("--delta-c is required for dpsgd_audit")?,
            )),
        },
    };
    match &mut cfg {
        AuditorConfig::DpSniper(c) => {
            if let Some(v) = args.c {
                c.c = v;
            }
        }
        AuditorConfig::Mpl(c) => {
            if let Some(v) = args.tau {
                c.tau = v;
            }
        }
        AuditorConfig::DeltaSiege(c) => {
            if let Some(v) = args.c {
                c.min_probability = v;
            }
            if let Some(v) = args.delta_c {
                c.delta_c = v;
            }
            if let Some(v) = &args.rho {
                c.surrogate = v.clone();
            }
        }
        AuditorConfig::DpsgdAudit(c) => {
            if let Some(v) = args.c {
                c.min_probability = v;
            }
            if let Some(v) = args.delta_c {
                c.delta_c = v;
            }
        }
    }
    Ok(match args.samples {
        Some(n) => cfg.with_samples(n),
        None => cfg,
    })
}

/// A spec from a family name and parameters, with default structure.
fn spec_from(family: Family, params: &[f64]) -> Result<MechanismSpec> {
    let p = |i: usize| {
        params
            .get(i)
            .copied()
            .with_context(|| format!("{family} needs parameter {}", i + 1))
    };
    let spec = match family {
        Family::Laplace => MechanismSpec::laplace(p(0)?),
        Family::AdaptedLaplace => MechanismSpec::adapted_laplace(p(0)?, p(1)?),
        Family::Gaussian => MechanismSpec::gaussian(p(0)?),
        Family::Svt => MechanismSpec::svt(p(0)?, vec![1.0], 1),
        Family::AdaptedSvt => MechanismSpec::adapted_svt(p(0)?, p(1)?, vec![1.0], 1),
        Family::RapporOneTime => {
            MechanismSpec::rappor(p(0)?, 8, 2, collision_free_seed(8, 2, 1.0, 0.0, 0)?)
        }
        Family::DpsgdOneStep => MechanismSpec::dpsgd(p(0)?, DpsgdConfig::default()),
    };
    spec.validate()?;
    Ok(spec)
}

/// Loads the config file if any and applies the command-line overrides.
fn experiment(
    m: &MechanismArgs,
    a: &AuditorArgs,
    seeds: &[u64],
    pattern: Option<Pattern>,
) -> Result<ExperimentConfig> {
    let file = m
        .config
        .as_deref()
        .map(|p| ExperimentConfig::load(p).with_context(|| format!("reading {}", p.display())))
        .transpose()?;
    let spec = match (&m.mechanism, m.family, &file) {
        (Some(path), _, _) => MechanismSpec::from_toml(&std::fs::read_to_string(path)?)?,
        (None, Some(f), _) => spec_from(f, &m.params)?,
        (None, None, Some(cfg)) => cfg.mechanism.clone(),
        (None, None, None) => bail!("give --config, --mechanism or --family"),
    };
    let base = file.as_ref().and_then(|c| c.auditor.as_ref());
    let auditor = match (a.auditor, base) {
        (None, None) => None,
        (tool, _) => Some(auditor_for(
            tool.or(base.map(AuditorConfig::tool)).expect("one is set"),
            a,
            base,
        )?),
    };
    let mut cfg = match file {
        Some(mut c) => {
            c.mechanism = spec;
            c.auditor = auditor;
            c
        }
        None => ExperimentConfig::new(spec, auditor, vec![0]),
    };
    if !seeds.is_empty() {
        cfg.seeds = seeds.to_vec();
    }
    if !m.grid.is_empty() {
        cfg.grid = Some(Grid {
            param: m.grid_param,
            values: m.grid.clone(),
        });
    }
    if pattern.is_some() {
        cfg.pattern = pattern;
    }
    if let Some(n) = a.samples {
        cfg.samples = Some(n);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn sample(args: SampleArgs) -> Result<ExitCode> {
    let cfg = experiment(&args.mechanism, &args.auditor, &args.seed, args.pattern)?;
    let dir = args
        .cache
        .or_else(|| cfg.output.cache.clone())
        .unwrap_or_else(|| PathBuf::from("dpaudit-cache"));
    let cache = SampleCache::open(dir)?;
    let entries = run_sample(&cfg, &cache)?;
    let mut out = io::stdout().lock();
    for e in entries {
        writeln!(out, "{}", serde_json::to_string(&e)?)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn audit(args: AuditArgs) -> Result<ExitCode> {
    let mut cfg = experiment(&args.mechanism, &args.auditor, &args.seed, args.pattern)?;
    if !args.claims.is_empty() {
        cfg.claims = args.claims;
    }
    if let Some(s) = args.scale {
        cfg.scale = s;
    }
    let report = run_audit(&cfg)?;
    report.write_csv(output(args.csv.as_deref().or(cfg.output.csv.as_deref()))?)?;
    if let Some(p) = args.report.as_deref().or(cfg.output.report.as_deref()) {
        report.write_jsonl(File::create(p)?)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn region(args: RegionArgs) -> Result<ExitCode> {
    let auditor = auditor_from(&args.auditor, None)?;
    let regions = regions_for(args.family, args.eps_c, &auditor)?;
    for (solver, r) in &regions {
        eprintln!("{solver}: {r}");
    }
    write_regions_csv(&regions, output(args.out.as_deref())?)?;
    Ok(ExitCode::SUCCESS)
}

fn attack(args: AttackArgs) -> Result<ExitCode> {
    let auditor = auditor_from(&args.auditor, None)?;
    let manifest =
        match construct_attack_with_margin(args.family, args.eps_c, &auditor, args.margin) {
            Ok(m) => m,
            Err(e @ (Error::Unsupported(_) | Error::NoSolution(_))) => {
                eprintln!("attack unavailable: {e}");
                return Ok(ExitCode::from(EXIT_UNAVAILABLE));
            }
            Err(e) => return Err(e.into()),
        };
    let audit_cfg = if args.scale == 1.0 {
        auditor.clone()
    } else {
        auditor.scaled(args.scale)
    };
    let records = if args.no_confirm {
        Vec::new()
    } else {
        args.seed
            .iter()
            .map(|&seed| {
                let key = RunKey {
                    spec: manifest.spec.clone(),
                    pair: manifest.pair.clone(),
                    auditor: audit_cfg.clone(),
                    seed,
                };
                AuditRecord::execute("attack", key, &[args.eps_c])
            })
            .collect::<dpaudit::Result<Vec<_>>>()?
    };
    let confirmed = records.iter().all(|r| {
        r.verdicts
            .iter()
            .all(|v| v.verdict == Verdict::FalsePositive)
    });
    let doc = serde_json::json!({
        "manifest": manifest,
        "confirmed": !args.no_confirm && confirmed,
        "records": records,
    });
    let mut out = output(args.out.as_deref())?;
    serde_json::to_writer_pretty(&mut out, &doc)?;
    writeln!(out)?;
    for r in &records {
        let v = r.verdicts.first().map(|v| v.verdict.code()).unwrap_or("?");
        eprintln!(
            "seed {}: xi* {:.4} (lower {:.4}) vs claim {} -> {v}",
            r.key.seed, r.estimate.xi_star, r.estimate.ci_low, args.eps_c
        );
    }
    Ok(if confirmed {
        ExitCode::SUCCESS
    } else {
        eprintln!("attack refuted by the confirming audit");
        ExitCode::from(EXIT_REFUTED)
    })
}

fn reproduce(args: ReproduceArgs) -> Result<ExitCode> {
    if args.figure == "list" {
        println!("{}", FIGURES.join("\n"));
        return Ok(ExitCode::SUCCESS);
    }
    let plan = FigurePlan::new(&args.figure)?;
    let data = plan.run(args.scale, &args.seed)?;
    data.write_csv(output(args.out.as_deref())?)?;
    Ok(ExitCode::SUCCESS)
}
