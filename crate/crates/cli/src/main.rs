use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use trackanneal::event::trackml::{event_paths, ingest_trackml, write_trackml};
use trackanneal::event::{dedup_hits, generate_event, Event};
use trackanneal::pipeline::{
    build_subproblems, finish, load_solutions, preprocess_event, run_staged_sparse, save_solutions, scaling_benchmark,
    solve_subproblems, tune_params, write_bin_csv, Manifest, Objective, PipelineConfig, Preprocessed, Report,
    SubProblem,
};
use trackanneal::preprocess::Calibration;

const EVENT_STEM: &str = "event";
const CALIBRATION: &str = "calibration.json";
const PREPROCESSED: &str = "preprocessed.json";
const QUBO_DIR: &str = "qubo";
const SOLUTIONS: &str = "solutions.json";
const REPORT: &str = "report.json";

/// Track reconstruction as QUBO edge selection solved by simulated annealing.
#[derive(Parser)]
#[command(name = "trackanneal", version)]
struct Cli {
    /// TOML configuration; defaults apply to anything it omits.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run directory (overrides `output` in the config).
    #[arg(long, global = true)]
    run_dir: Option<PathBuf>,
    /// Top-level seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads, 0 for all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate an event into the run directory.
    Generate {
        #[arg(long)]
        particles: Option<usize>,
        #[arg(long)]
        noise: Option<f64>,
    },
    /// Copy a TrackML-style hits/truth pair into the run directory.
    Ingest {
        #[arg(long)]
        hits: PathBuf,
        #[arg(long)]
        truth: PathBuf,
    },
    /// Train the segment KDE on calibration events and fix the cut.
    CalibrateKde,
    /// Sectorize, select candidates and split into sub-graphs.
    Preprocess,
    /// Write one QUBO per sub-graph.
    BuildQubo,
    /// Anneal every QUBO in the run directory.
    Solve,
    /// Merge, assemble and score solutions into a report.
    Report,
    /// All stages in one go.
    Reconstruct,
    /// Three-stage sparse reconstruction.
    Staged,
    /// Convergence-time scaling over event sizes.
    BenchScaling {
        #[arg(long, value_delimiter = ',', default_value = "50,100,200,350,500")]
        tracks: Vec<usize>,
        #[arg(long, default_value_t = 1)]
        events: usize,
    },
    /// Random search over QUBO weights.
    Tune {
        /// `name=lo:hi`, repeatable.
        #[arg(long = "space", required = true)]
        space: Vec<String>,
        #[arg(long, default_value_t = 10)]
        budget: usize,
    },
}

struct Ctx {
    config: PipelineConfig,
    dir: PathBuf,
}

impl Ctx {
    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn event(&self) -> Result<Event> {
        let (hits, truth) = match &self.config.input {
            Some(dir) => event_paths(dir, EVENT_STEM),
            None => event_paths(&self.dir, EVENT_STEM),
        };
        ingest_trackml(&hits, &truth).with_context(|| format!("reading event {}", hits.display()))
    }

    fn calibration(&self) -> Result<Calibration> {
        let p = self.path(CALIBRATION);
        if self.config.calibration.path.is_none() && p.exists() {
            return Ok(Calibration::load(&p)?);
        }
        Ok(self.config.calibration()?)
    }

    fn record(&self, command: &str, files: &[String]) -> Result<()> {
        let mut m = Manifest::new(command, &self.config)?;
        for f in files {
            m.add_file(&self.dir, f)?;
        }
        m.save(&self.dir)?;
        Ok(())
    }

    fn write(&self, name: &str, text: &str) -> Result<String> {
        fs::write(self.path(name), text).with_context(|| format!("writing {name}"))?;
        Ok(name.to_string())
    }

    fn write_report(&self, report: &Report) -> Result<Vec<String>> {
        let mut files = vec![self.write(REPORT, &report.to_json()?)?];
        for (var, rows) in &report.bins {
            let name = format!("bins_{var}.csv");
            let mut buf = Vec::new();
            write_bin_csv(rows, &mut buf)?;
            files.push(self.write(&name, &String::from_utf8(buf)?)?);
        }
        Ok(files)
    }
}

fn parse_space(items: &[String]) -> Result<BTreeMap<String, (f64, f64)>> {
    let mut out = BTreeMap::new();
    for item in items {
        let (name, range) = item.split_once('=').with_context(|| format!("expected name=lo:hi, got {item:?}"))?;
        let (lo, hi) = range.split_once(':').with_context(|| format!("expected lo:hi, got {range:?}"))?;
        out.insert(name.to_string(), (lo.trim().parse()?, hi.trim().parse()?));
    }
    Ok(out)
}

fn summary(report: &Report) {
    let f = |v: Option<f64>| v.map(|x| format!("{x:.3}")).unwrap_or_else(|| "n/a".into());
    println!(
        "purity {} efficiency {} (baseline {} / {}), {} tracks from {} sub-graphs",
        f(report.metrics.purity),
        f(report.metrics.efficiency),
        f(report.baseline.purity),
        f(report.baseline.efficiency),
        report.n_tracks,
        report.subgraphs.count
    );
}

fn run(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(p) => PipelineConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    if let Some(t) = cli.threads {
        config.threads = t;
    }
    let dir = cli.run_dir.clone().unwrap_or_else(|| config.output.clone());
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let ctx = Ctx { config, dir };
    let config = &ctx.config;

    match cli.command {
        Command::Generate { particles, noise } => {
            let mut g = config.generator.clone().with_seed(config.seed);
            if let Some(n) = particles {
                g.n_particles = n;
            }
            if let Some(f) = noise {
                g.noise_fraction = f;
            }
            let event = generate_event(&g)?;
            let (h, t) = event_paths(&ctx.dir, EVENT_STEM);
            write_trackml(&event, &h, &t)?;
            println!("{} hits, {} particles", event.hits().len(), event.particles().len());
            ctx.record("generate", &[format!("{EVENT_STEM}-hits.csv"), format!("{EVENT_STEM}-truth.csv")])?;
        }
        Command::Ingest { hits, truth } => {
            let event = ingest_trackml(&hits, &truth)?;
            let clean = dedup_hits(&event);
            let (h, t) = event_paths(&ctx.dir, EVENT_STEM);
            write_trackml(&clean, &h, &t)?;
            println!("{} hits ({} after dedup)", event.hits().len(), clean.hits().len());
            ctx.record("ingest", &[format!("{EVENT_STEM}-hits.csv"), format!("{EVENT_STEM}-truth.csv")])?;
        }
        Command::CalibrateKde => {
            let cal = config.calibration()?;
            cal.save(&ctx.path(CALIBRATION))?;
            println!("threshold {:.6e}, recall {:.4}", cal.threshold, cal.recall);
            ctx.record("calibrate-kde", &[CALIBRATION.into()])?;
        }
        Command::Preprocess => {
            let event = dedup_hits(&ctx.event()?);
            let pre = preprocess_event(&event, &ctx.calibration()?, config)?;
            pre.save(&ctx.path(PREPROCESSED))?;
            let n: usize = pre.sectors.iter().map(|s| s.edges.len()).sum();
            let k: usize = pre.sectors.iter().map(|s| s.subgraphs.len()).sum();
            println!("{n} candidate edges in {k} sub-graphs");
            ctx.record("preprocess", &[PREPROCESSED.into()])?;
        }
        Command::BuildQubo => {
            let event = dedup_hits(&ctx.event()?);
            let pre = Preprocessed::load(&ctx.path(PREPROCESSED))?;
            let problems = build_subproblems(&pre, &event, config)?;
            let qdir = ctx.path(QUBO_DIR);
            if qdir.exists() {
                fs::remove_dir_all(&qdir)?;
            }
            let names = SubProblem::save_all(&problems, &qdir)?;
            println!("{} QUBOs", names.len());
            let files: Vec<String> = names.iter().map(|n| format!("{QUBO_DIR}/{n}")).collect();
            ctx.record("build-qubo", &files)?;
        }
        Command::Solve => {
            let problems = SubProblem::load_all(&ctx.path(QUBO_DIR))?;
            if problems.is_empty() {
                bail!("no QUBOs under {}", ctx.path(QUBO_DIR).display());
            }
            let solutions = solve_subproblems(&problems, config)?;
            save_solutions(&solutions, &ctx.path(SOLUTIONS))?;
            println!("solved {} QUBOs", solutions.len());
            ctx.record("solve", &[SOLUTIONS.into()])?;
        }
        Command::Report => {
            let event = dedup_hits(&ctx.event()?);
            let pre = Preprocessed::load(&ctx.path(PREPROCESSED))?;
            let solutions = load_solutions(&ctx.path(SOLUTIONS))?;
            let report = finish(&pre, &solutions, &event, config)?;
            summary(&report);
            let files = ctx.write_report(&report)?;
            ctx.record("report", &files)?;
        }
        Command::Reconstruct => {
            let event = dedup_hits(&ctx.event()?);
            let cal = ctx.calibration()?;
            let pre = preprocess_event(&event, &cal, config)?;
            pre.save(&ctx.path(PREPROCESSED))?;
            let problems = build_subproblems(&pre, &event, config)?;
            let solutions = solve_subproblems(&problems, config)?;
            save_solutions(&solutions, &ctx.path(SOLUTIONS))?;
            let report = finish(&pre, &solutions, &event, config)?;
            summary(&report);
            let mut files = vec![PREPROCESSED.to_string(), SOLUTIONS.to_string()];
            files.extend(ctx.write_report(&report)?);
            ctx.record("reconstruct", &files)?;
        }
        Command::Staged => {
            let event = ctx.event()?;
            let report = run_staged_sparse(&event, &ctx.calibration()?, config)?;
            for s in &report.stages {
                let f = |v: Option<f64>| v.map(|x| format!("{x:.3}")).unwrap_or_else(|| "n/a".into());
                println!(
                    "stage {}: {} sub-graphs, {} -> {} edges, purity {} efficiency {}",
                    s.stage,
                    s.n_subgraphs,
                    s.n_input,
                    s.n_selected,
                    f(s.metrics.purity),
                    f(s.metrics.efficiency)
                );
            }
            let f = ctx.write("staged.json", &report.to_json()?)?;
            ctx.record("staged", &[f])?;
        }
        Command::BenchScaling { tracks, events } => {
            let fit = scaling_benchmark(&tracks, config, events)?;
            for p in &fit.points {
                println!(
                    "{:>5} tracks: {} sub-graphs, mean {:.4e} sweep-variables [{:.4e}, {:.4e}], {:.1} s",
                    p.track_count, p.n_subgraphs, p.mean_time, p.ci_low, p.ci_high, p.wall_seconds
                );
            }
            println!("{}", fit.fit);
            let f = ctx.write("scaling.json", &(serde_json::to_string_pretty(&fit)? + "\n"))?;
            ctx.record("bench-scaling", &[f])?;
        }
        Command::Tune { space, budget } => {
            let space = parse_space(&space)?;
            let result = tune_params(&space, Objective::F1, budget, config.seed, config)?;
            for t in &result.trials {
                println!("trial {:>3}: f1 {:.4} {:?}", t.index, t.score, t.values);
            }
            println!("best f1 {:.4}", result.best_score);
            let f = ctx.write("tune.json", &(serde_json::to_string_pretty(&result)? + "\n"))?;
            ctx.record("tune", &[f])?;
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let start = Instant::now();
    let out = run(cli);
    eprintln!("wall-clock {:.2} s", start.elapsed().as_secs_f64());
    out
}
