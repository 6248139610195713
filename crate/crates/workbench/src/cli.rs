//! The `basinplan` command line.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Mutex;

use chrono::Utc;
use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use basinplan_core::engineering::{CapacityOutcome, ProjectVariant, SiteGeometry, UnitPriceBook};
use basinplan_core::hydrology::write_gauge_csv;
use basinplan_core::optimizer::{audit, solve, what_if, Overrides};
use basinplan_core::synthetic::{synth_dataset, SyntheticBasinSpec};

use crate::api::{router, Service};
use crate::config::PlanningConfig;
use crate::error::WbError;
use crate::stages::{read_json, write_json, write_text, Context, CANDIDATES_FILE, DESIGNS_FILE, SITES_FILE};
use crate::store::{read_pool, read_problem, RunRecord, RunStore};

pub const EXIT_ERROR: u8 = 1;
pub const EXIT_AUDIT_FAILED: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "basinplan", version, about = "Basin-scale hydropower portfolio planning")]
#[command(after_help = "Any config key can be overridden with --<dotted.key> <value>, e.g. --prices.energy_price 0.05")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, clap::Args)]
pub struct ConfigArgs {
    /// Planning config (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Directory for artifacts and the log.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a seeded synthetic basin: network, gauge, impacts and prices.
    Synth {
        /// Spec (TOML); defaults apply to missing keys.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Candidate sites from the network and screening criteria.
    Screen {
        #[command(flatten)]
        args: ConfigArgs,
    },
    /// Engineering design and costing of every site and head.
    Design {
        #[command(flatten)]
        args: ConfigArgs,
        /// Sites from `screen`; screened afresh when absent.
        #[arg(long)]
        sites: Option<PathBuf>,
    },
    /// Ex-ante cost and power density filters.
    Filter {
        #[command(flatten)]
        args: ConfigArgs,
        /// Designs from `design`.
        #[arg(long)]
        designs: Option<PathBuf>,
    },
    /// Assemble the selection problem, solve it and export the pool.
    Optimize {
        #[command(flatten)]
        args: ConfigArgs,
        /// Candidates from `filter`.
        #[arg(long)]
        candidates: Option<PathBuf>,
    },
    /// Re-solve a finished run with changed prices or constraints.
    Whatif {
        /// Directory of the run to start from.
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides document (JSON); the flags below are applied on top.
        #[arg(long)]
        overrides: Option<PathBuf>,
        #[arg(long)]
        energy_price: Option<f64>,
        #[arg(long)]
        capacity_price: Option<f64>,
        #[arg(long)]
        min_free_flowing: Option<f64>,
        #[arg(long)]
        force: Vec<String>,
        #[arg(long)]
        forbid: Vec<String>,
    },
    /// Re-check every alternative of a stored pool. Exits 3 when any check fails.
    Audit {
        /// Directory holding problem.json and pool.json.
        #[arg(long)]
        run: PathBuf,
    },
    /// Serve the /v1/ API over a run store.
    Serve {
        /// Used to create the base run when the store is empty.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        store: PathBuf,
        /// Base run id; the first run in the store by default.
        #[arg(long)]
        base: Option<String>,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
    },
}

/// Remaining arguments and (dotted key, raw value) pairs.
pub type SplitArgs = (Vec<OsString>, Vec<(String, String)>);

/// Splits `--a.b value` and `--a.b=value` config overrides off the argument list.
pub fn split_overrides(args: Vec<OsString>) -> Result<SplitArgs, WbError> {
    let mut rest = Vec::new();
    let mut overrides = Vec::new();
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        let key = a.to_str().and_then(|s| s.strip_prefix("--")).filter(|k| k.split('=').next().is_some_and(|k| k.contains('.')));
        match key {
            Some(k) => {
                let (k, v) = match k.split_once('=') {
                    Some((k, v)) => (k.to_string(), v.to_string()),
                    None => {
                        let v = it.next().and_then(|v| v.into_string().ok());
                        (k.to_string(), v.ok_or_else(|| WbError::Config(format!("override --{k} needs a value")))?)
                    }
                };
                overrides.push((k, v));
            }
            None => rest.push(a),
        }
    }
    Ok((rest, overrides))
}

struct Tee(Option<std::fs::File>);

impl Write for Tee {
    fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
        if let Some(f) = &mut self.0 {
            f.write_all(buf)?;
        }
        std::io::stderr().write_all(buf)?;
        Ok(buf.len())
    }

    fn flush(&mut self) -> std::io::Result<()> {
        if let Some(f) = &mut self.0 {
            f.flush()?;
        }
        Ok(())
    }
}

static LOG_INIT: Mutex<bool> = Mutex::new(false);

fn init_log(dir: &Path, name: &str) -> Result<(), WbError> {
    std::fs::create_dir_all(dir).map_err(|e| WbError::io(dir, e))?;
    let path = dir.join(format!("{name}.log"));
    let file = std::fs::File::create(&path).map_err(|e| WbError::io(&path, e))?;
    let mut done = LOG_INIT.lock().unwrap();
    if !*done {
        *done = env_logger::Builder::new()
            .filter_level(log::LevelFilter::Info)
            .parse_default_env()
            .target(env_logger::Target::Pipe(Box::new(Tee(Some(file)))))
            .try_init()
            .is_ok();
    }
    Ok(())
}

fn print<T: Serialize>(v: &T) {
    println!("{}", serde_json::to_string(v).unwrap_or_default());
}

fn load_config(path: &Path, overrides: &[(String, String)]) -> Result<PlanningConfig, WbError> {
    let cfg = PlanningConfig::load(path, overrides)?;
    log::info!("config {} with {} override(s)", path.display(), overrides.len());
    Ok(cfg)
}

/// Parses `args` (program name first) and runs the command.
pub fn main_with(args: Vec<OsString>) -> ExitCode {
    let (rest, overrides) = match split_overrides(args) {
        Ok(v) => v,
        Err(e) => return fail(&e, None),
    };
    let cli = match Cli::try_parse_from(rest) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    let out = out_dir(&cli.command);
    match run(cli.command, &overrides) {
        Ok(code) => code,
        Err(e) => fail(&e, out.as_deref()),
    }
}

fn out_dir(c: &Command) -> Option<PathBuf> {
    match c {
        Command::Synth { out, .. } | Command::Whatif { out, .. } => Some(out.clone()),
        Command::Screen { args } | Command::Design { args, .. } | Command::Filter { args, .. } | Command::Optimize { args, .. } => {
            Some(args.out.clone())
        }
        Command::Audit { run } => Some(run.clone()),
        Command::Serve { store, .. } => Some(store.clone()),
    }
}

fn fail(e: &WbError, out: Option<&Path>) -> ExitCode {
    log::error!("{e}");
    let doc = e.doc();
    if let Some(dir) = out.filter(|d| d.is_dir()) {
        let _ = write_json(&dir.join("error.json"), &doc);
    }
    print(&doc);
    ExitCode::from(EXIT_ERROR)
}

fn no_overrides(overrides: &[(String, String)], cmd: &str) -> Result<(), WbError> {
    match overrides.first() {
        Some((k, _)) => Err(WbError::Config(format!("{cmd} takes no config overrides (got --{k})"))),
        None => Ok(()),
    }
}

pub fn run(cmd: Command, overrides: &[(String, String)]) -> Result<ExitCode, WbError> {
    match cmd {
        Command::Synth { spec, out } => {
            no_overrides(overrides, "synth")?;
            init_log(&out, "synth")?;
            let spec: SyntheticBasinSpec = match spec {
                Some(p) => {
                    let text = std::fs::read_to_string(&p).map_err(|e| WbError::io(&p, e))?;
                    toml::from_str(&text).map_err(|e| WbError::Config(e.to_string()))?
                }
                None => SyntheticBasinSpec::default(),
            };
            let basin = synth_dataset(&spec)?;
            write_text(&out.join("network.jsonl"), &basin.network.to_jsonl())?;
            write_text(&out.join("gauge.csv"), &write_gauge_csv(&basin.gauge))?;
            write_text(&out.join("impacts.csv"), &basin.impacts.to_csv())?;
            write_text(&out.join("prices.txt"), &UnitPriceBook::default().to_text())?;
            log::info!("{} segments, {} gauge days", basin.network.len(), basin.gauge.samples.len());
            print(&json!({ "status": "ok", "segments": basin.network.len(), "out": out }));
        }
        Command::Screen { args } => {
            init_log(&args.out, "screen")?;
            let ctx = Context::new(load_config(&args.config, overrides)?)?;
            let sites = ctx.screen()?;
            log::info!("{} of {} segments pass screening", sites.len(), ctx.inputs.network.len());
            write_json(&args.out.join(SITES_FILE), &sites)?;
            print(&json!({ "status": "ok", "sites": sites.len() }));
        }
        Command::Design { args, sites } => {
            init_log(&args.out, "design")?;
            let ctx = Context::new(load_config(&args.config, overrides)?)?;
            let sites: Vec<SiteGeometry> = match sites {
                Some(p) => read_json(&p)?,
                None => ctx.screen()?,
            };
            let outcomes = ctx.design(&sites)?;
            let designed = outcomes.iter().filter(|o| o.variant().is_some()).count();
            log::info!("{designed} designed, {} uneconomic", outcomes.len() - designed);
            write_json(&args.out.join(DESIGNS_FILE), &outcomes)?;
            write_text(&args.out.join("costing.csv"), &costing_csv(&outcomes))?;
            print(&json!({ "status": "ok", "designed": designed, "uneconomic": outcomes.len() - designed }));
        }
        Command::Filter { args, designs } => {
            init_log(&args.out, "filter")?;
            let ctx = Context::new(load_config(&args.config, overrides)?)?;
            let outcomes: Vec<CapacityOutcome> = match designs {
                Some(p) => read_json(&p)?,
                None => ctx.design(&ctx.screen()?)?,
            };
            let kept = ctx.filter(&outcomes)?;
            log::info!("{} candidates pass the ex-ante filters", kept.len());
            write_json(&args.out.join(CANDIDATES_FILE), &kept)?;
            print(&json!({ "status": "ok", "candidates": kept.len() }));
        }
        Command::Optimize { args, candidates } => {
            init_log(&args.out, "optimize")?;
            let created = Utc::now();
            let cfg = load_config(&args.config, overrides)?;
            let ctx = Context::new(cfg.clone())?;
            let candidates: Vec<ProjectVariant> = match candidates {
                Some(p) => read_json(&p)?,
                None => ctx.filter(&ctx.design(&ctx.screen()?)?)?,
            };
            let problem = ctx.assemble(candidates)?;
            log::info!("{} candidates, {} conflicts", problem.variants.len(), problem.conflicts.len());
            let pool = solve(&problem, &cfg.solver, Some(&|p| log::debug!("{p:?}")))?;
            log::info!("{:?} after {} nodes, {} alternatives", pool.status, pool.nodes, pool.alternatives.len());
            let id = run_id(&args.out);
            let rec = RunRecord::base(&id, cfg.snapshot()?, problem, pool, created);
            rec.write_to(&args.out)?;
            print(&json!({
                "status": "ok",
                "run_id": id,
                "solve_status": rec.pool.status,
                "alternatives": rec.pool.alternatives.len(),
                "objective": rec.meta.incumbent_objective,
            }));
        }
        Command::Whatif { run, out, overrides: doc, energy_price, capacity_price, min_free_flowing, force, forbid } => {
            no_overrides(overrides, "whatif")?;
            init_log(&out, "whatif")?;
            let created = Utc::now();
            let parent = RunRecord::read_from(&run)?;
            let mut o: Overrides = match doc {
                Some(p) => read_json(&p)?,
                None => Overrides::default(),
            };
            o.energy_price = energy_price.or(o.energy_price);
            o.capacity_price = capacity_price.or(o.capacity_price);
            o.min_free_flowing = min_free_flowing.or(o.min_free_flowing);
            o.force.extend(force);
            o.forbid.extend(forbid);
            let outcome = what_if(&parent.problem, parent.meta.incumbent_objective, &o, &parent.meta.config.solver)?;
            let problem = basinplan_core::optimizer::apply_overrides(&parent.problem, &o)?;
            let id = run_id(&out);
            let rec = RunRecord::derived(&parent, &id, o, problem, outcome.pool, created);
            log::info!("revenue delta {:?}", outcome.revenue_delta);
            rec.write_to(&out)?;
            print(&json!({
                "status": "ok",
                "run_id": id,
                "parent": parent.meta.id,
                "solve_status": rec.pool.status,
                "objective": rec.meta.incumbent_objective,
                "revenue_delta": outcome.revenue_delta,
            }));
        }
        Command::Audit { run } => {
            no_overrides(overrides, "audit")?;
            init_log(&run, "audit")?;
            let problem = read_problem(&run.join(crate::stages::PROBLEM_FILE))?;
            let pool = read_pool(&run.join(crate::stages::POOL_FILE))?;
            let reports: Vec<_> = pool.alternatives.iter().map(|a| audit(&problem, a)).collect();
            let passed = reports.iter().all(|r| r.passed);
            for (k, r) in reports.iter().enumerate() {
                for v in &r.violations {
                    log::warn!("alternative {k}: {v}");
                }
            }
            let doc = json!({ "status": if passed { "ok" } else { "failed" }, "alternatives": reports.len(), "reports": reports });
            write_json(&run.join("audit.json"), &doc)?;
            print(&doc);
            if !passed {
                return Ok(ExitCode::from(EXIT_AUDIT_FAILED));
            }
        }
        Command::Serve { config, store, base, addr } => {
            init_log(&store, "serve")?;
            let st = RunStore::open(&store)?;
            let base = match base {
                Some(b) => b,
                None => match st.list()?.into_iter().next() {
                    Some(b) => b,
                    None => {
                        let path = config.ok_or_else(|| WbError::Config("empty store needs --config for the base run".into()))?;
                        let created = Utc::now();
                        let cfg = load_config(&path, overrides)?;
                        let problem = Context::new(cfg.clone())?.problem()?;
                        let pool = solve(&problem, &cfg.solver, None)?;
                        let id = st.next_id()?;
                        st.commit(&RunRecord::base(&id, cfg.snapshot()?, problem, pool, created))?;
                        log::info!("base run {id} created");
                        id
                    }
                },
            };
            let options = st.load(&base)?.meta.config.solver.clone();
            let svc = Service::start(st, &base, options)?;
            let rt = tokio::runtime::Runtime::new().map_err(|e| WbError::Store(e.to_string()))?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind(&addr).await.map_err(|e| WbError::Store(format!("bind {addr}: {e}")))?;
                let local = listener.local_addr().map_err(|e| WbError::Store(e.to_string()))?;
                log::info!("serving base run {base} on http://{local}/v1/");
                print(&json!({ "status": "listening", "addr": local.to_string(), "base_run": base }));
                axum::serve(listener, router(svc))
                    .with_graceful_shutdown(async {
                        let _ = tokio::signal::ctrl_c().await;
                    })
                    .await
                    .map_err(|e| WbError::Store(e.to_string()))
            })?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn run_id(dir: &Path) -> String {
    dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into())
}

/// One row per cost line of every designed variant.
fn costing_csv(outcomes: &[CapacityOutcome]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let _ = w.write_record(["variant", "item", "amount_usd"]);
    for v in outcomes.iter().filter_map(CapacityOutcome::variant) {
        for line in &v.breakdown.lines {
            let _ = w.write_record([v.id.as_str(), line.item.as_str(), &line.cost.to_string()]);
        }
        for o in &v.breakdown.overheads {
            let _ = w.write_record([v.id.as_str(), o.item.as_str(), &o.cost.to_string()]);
        }
        let _ = w.write_record([v.id.as_str(), "capex", &v.capex.to_string()]);
    }
    String::from_utf8(w.into_inner().unwrap_or_default()).unwrap_or_default()
}
