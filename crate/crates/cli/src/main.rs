//! Batch command-line front end: single training runs, seed/grid sweeps with
//! aggregate statistics, metric recomputation from checkpoints, and
//! threshold-curve exports. No interactive mode: the workflow is batch
//! training plus post-hoc analysis of the written files.

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use selfgan::config::RunConfig;
use selfgan::trainer::{train, StageTimings, TrainState};
use std::collections::VecDeque;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Mutex;

/// Threshold grid used for the default purity-curve export.
const CURVE_THRESHOLDS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 0.95];

#[derive(Parser)]
#[command(name = "selfgan", version, about = "Train and analyze self-labeling GANs on mixture data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one seeded training run and write its outputs
    Train(TrainArgs),
    /// Recompute metrics from a checkpoint
    Eval(EvalArgs),
    /// Run a grid of configurations across several seeds and aggregate
    Sweep(SweepArgs),
    /// Write threshold-curve CSVs from a checkpoint
    ExportCurves(ExportArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Configuration file (key = value lines); defaults apply when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the training seed
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (overrides out_dir from the config)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Additional key=value configuration overrides
    #[arg(value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct EvalArgs {
    /// Checkpoint to evaluate
    #[arg(long)]
    checkpoint: PathBuf,
    /// Directory to write eval.json into (stdout only when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Base configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Grid as key=v1,v2,...; seeds-only sweep when omitted
    #[arg(long)]
    grid: Option<String>,
    /// Number of seeds per grid point (seed, seed+1, ...)
    #[arg(long, default_value_t = 5)]
    seeds: u64,
    /// Concurrent runs
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Output directory for per-run folders and sweep.csv
    #[arg(long)]
    out: Option<PathBuf>,
    /// Additional key=value configuration overrides applied to every run
    #[arg(value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Args)]
struct ExportArgs {
    /// Checkpoint to analyze
    #[arg(long)]
    checkpoint: PathBuf,
    /// Output directory (defaults to the checkpoint's directory)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Artificial label for the class-distribution export
    /// (defaults to the most populated one)
    #[arg(long)]
    label: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::ExportCurves(a) => cmd_export(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn build_config(
    path: Option<&Path>,
    seed: Option<u64>,
    out: Option<&Path>,
    overrides: &[String],
) -> anyhow::Result<RunConfig> {
    let mut cfg = match path {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    for pair in overrides {
        let (key, value) = pair
            .split_once('=')
            .with_context(|| format!("override {pair:?} is not of the form key=value"))?;
        cfg.set(key.trim(), value.trim())?;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(o) = out {
        cfg.out_dir = o.display().to_string();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn timings_text(t: &StageTimings) -> String {
    format!(
        "teacher_s = {:.3}\nself_label_s = {:.3}\ndisc_s = {:.3}\ngen_s = {:.3}\neval_s = {:.3}\ntotal_s = {:.3}\n",
        t.teacher_s,
        t.self_label_s,
        t.disc_s,
        t.gen_s,
        t.eval_s,
        t.total()
    )
}

/// Standard per-run output files. `report.json` and the CSVs are pure
/// functions of the configuration; wall-clock numbers go to `timings.txt`.
fn write_run_outputs(dir: &Path, st: &TrainState) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    std::fs::write(dir.join("config.echo"), st.config.echo())?;
    std::fs::write(dir.join("report.json"), st.report.to_json())?;
    std::fs::write(dir.join("losses.csv"), st.report.losses_csv())?;
    std::fs::write(dir.join("evals.csv"), st.report.evals_csv())?;
    std::fs::write(dir.join("curves.csv"), st.threshold_curve(&CURVE_THRESHOLDS)?.to_csv())?;
    st.save(&dir.join("final.ckpt"))?;
    std::fs::write(dir.join("timings.txt"), timings_text(&st.timings))?;
    Ok(())
}

fn cmd_train(a: TrainArgs) -> anyhow::Result<()> {
    let cfg = build_config(a.config.as_deref(), a.seed, a.out.as_deref(), &a.overrides)?;
    let st = train(&cfg)?;
    let dir = PathBuf::from(&cfg.out_dir);
    write_run_outputs(&dir, &st)?;
    let f = st.report.final_eval().expect("run always evaluates at least once");
    println!("run complete: {} iterations, outputs in {}", st.iteration, dir.display());
    println!(
        "final: frechet={:.4} alignment={:.4} coverage={} selected={:.3}",
        f.frechet, f.alignment, f.mode_coverage, f.selected_fraction
    );
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> anyhow::Result<()> {
    let st = TrainState::load(&a.checkpoint)
        .with_context(|| format!("loading checkpoint {}", a.checkpoint.display()))?;
    let record = st.compute_eval()?;
    let json = serde_json::to_string_pretty(&record).expect("record serializes");
    println!("{json}");
    if let Some(out) = a.out {
        std::fs::create_dir_all(&out)?;
        std::fs::write(out.join("eval.json"), &json)?;
    }
    Ok(())
}

fn parse_grid(grid: &str) -> anyhow::Result<(String, Vec<String>)> {
    let (key, values) = grid
        .split_once('=')
        .with_context(|| format!("grid {grid:?} is not of the form key=v1,v2,..."))?;
    let values: Vec<String> = values.split(',').map(|v| v.trim().to_string()).collect();
    if values.is_empty() || values.iter().any(|v| v.is_empty()) {
        bail!("grid {grid:?} has empty values");
    }
    Ok((key.trim().to_string(), values))
}

/// Run all configurations with at most `workers` in flight, preserving order.
fn run_pool(configs: Vec<RunConfig>, workers: usize) -> Vec<anyhow::Result<TrainState>> {
    let n = configs.len();
    let queue: Mutex<VecDeque<(usize, RunConfig)>> =
        Mutex::new(configs.into_iter().enumerate().collect());
    let results: Vec<Mutex<Option<anyhow::Result<TrainState>>>> =
        (0..n).map(|_| Mutex::new(None)).collect();
    let workers = workers.max(1).min(n.max(1));
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let job = queue.lock().expect("queue lock").pop_front();
                match job {
                    Some((i, cfg)) => {
                        let r = train(&cfg).map_err(anyhow::Error::from);
                        *results[i].lock().expect("result lock") = Some(r);
                    }
                    None => break,
                }
            });
        }
    });
    results
        .into_iter()
        .map(|m| m.into_inner().expect("result lock").expect("every job ran"))
        .collect()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

fn cmd_sweep(a: SweepArgs) -> anyhow::Result<()> {
    if a.seeds == 0 {
        bail!("--seeds must be at least 1");
    }
    let base = build_config(a.config.as_deref(), None, None, &a.overrides)?;
    let (grid_key, grid_values) = match &a.grid {
        Some(g) => parse_grid(g)?,
        None => (String::new(), vec![String::new()]),
    };
    let out_root = a.out.clone().unwrap_or_else(|| PathBuf::from(&base.out_dir));

    let mut labels = Vec::new();
    let mut configs = Vec::new();
    for value in &grid_values {
        let mut variant = base.clone();
        if !grid_key.is_empty() {
            variant.set(&grid_key, value)?;
        }
        for s in 0..a.seeds {
            let mut run_cfg = variant.clone();
            run_cfg.seed = base.seed + s;
            let name = if grid_key.is_empty() {
                format!("seed-{}", run_cfg.seed)
            } else {
                format!("{grid_key}-{value}-seed-{}", run_cfg.seed)
            };
            run_cfg.out_dir = out_root.join(&name).display().to_string();
            run_cfg.validate()?;
            labels.push((value.clone(), name));
            configs.push(run_cfg);
        }
    }

    let total = configs.len();
    println!("sweep: {total} runs ({} grid points x {} seeds, {} jobs)", grid_values.len(), a.seeds, a.jobs);
    let results = run_pool(configs, a.jobs);

    let mut states = Vec::with_capacity(total);
    for ((value, name), result) in labels.iter().zip(results) {
        let st = result.with_context(|| format!("run {name} (grid value {value:?})"))?;
        write_run_outputs(Path::new(&st.config.out_dir), &st)?;
        states.push((value.clone(), st));
    }

    // aggregate across seeds per grid value: last and best distances tell
    // different stories when training oscillates, so report both
    let mut csv = String::from(
        "key,value,seeds,frechet_last_mean,frechet_last_std,frechet_best_mean,frechet_best_std,\
         alignment_mean,mode_coverage_mean,selected_fraction_mean\n",
    );
    for value in &grid_values {
        let group: Vec<&TrainState> =
            states.iter().filter(|(v, _)| v == value).map(|(_, st)| st).collect();
        let last: Vec<f64> =
            group.iter().map(|st| st.report.final_eval().expect("evaluated").frechet).collect();
        let best: Vec<f64> =
            group.iter().map(|st| st.report.best_frechet().expect("evaluated")).collect();
        let align: Vec<f64> =
            group.iter().map(|st| st.report.final_eval().expect("evaluated").alignment).collect();
        let cover: Vec<f64> = group
            .iter()
            .map(|st| st.report.final_eval().expect("evaluated").mode_coverage as f64)
            .collect();
        let sel: Vec<f64> = group
            .iter()
            .map(|st| st.report.final_eval().expect("evaluated").selected_fraction)
            .collect();
        let row_key = if grid_key.is_empty() { "seed_only" } else { grid_key.as_str() };
        let row_value = if value.is_empty() { "-" } else { value.as_str() };
        csv.push_str(&format!(
            "{row_key},{row_value},{},{},{},{},{},{},{},{}\n",
            group.len(),
            mean(&last),
            sample_std(&last),
            mean(&best),
            sample_std(&best),
            mean(&align),
            mean(&cover),
            mean(&sel)
        ));
        println!(
            "{row_key}={row_value}: frechet last {:.4} +/- {:.4}, best {:.4} +/- {:.4} over {} seeds",
            mean(&last),
            sample_std(&last),
            mean(&best),
            sample_std(&best),
            group.len()
        );
    }
    std::fs::create_dir_all(&out_root)?;
    let csv_path = out_root.join("sweep.csv");
    std::fs::write(&csv_path, csv)?;
    println!("aggregate written to {}", csv_path.display());
    Ok(())
}

fn class_distribution_csv(thresholds: &[f64], rows: &[Option<Vec<f64>>], classes: usize) -> String {
    let mut s = String::from("threshold");
    for c in 0..classes {
        s.push_str(&format!(",class{c}"));
    }
    s.push('\n');
    for (th, row) in thresholds.iter().zip(rows) {
        s.push_str(&format!("{th}"));
        match row {
            Some(hist) => {
                for v in hist {
                    s.push_str(&format!(",{v}"));
                }
            }
            None => {
                for _ in 0..classes {
                    s.push_str(",NA");
                }
            }
        }
        s.push('\n');
    }
    s
}

fn cmd_export(a: ExportArgs) -> anyhow::Result<()> {
    let st = TrainState::load(&a.checkpoint)
        .with_context(|| format!("loading checkpoint {}", a.checkpoint.display()))?;
    let out = a
        .out
        .clone()
        .or_else(|| a.checkpoint.parent().map(Path::to_path_buf))
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&out)?;

    // finer grid than the headline thresholds: curve shape is the point here
    let thresholds: Vec<f64> = (0..20).map(|i| i as f64 * 0.05).collect();
    let curve = st.threshold_curve(&thresholds)?;
    let curve_path = out.join("curves.csv");
    std::fs::write(&curve_path, curve.to_csv())?;

    let label = match a.label {
        Some(l) => l,
        None => {
            let (labels, _) = st.eval_real_labels()?;
            let mut counts = vec![0usize; st.config.k];
            for &l in &labels {
                counts[l] += 1;
            }
            counts
                .iter()
                .enumerate()
                .max_by(|(i, a), (j, b)| a.cmp(b).then(j.cmp(i)))
                .map(|(i, _)| i)
                .expect("k >= 2")
        }
    };
    let rows = st.class_distribution(label, &thresholds)?;
    let dist_path = out.join(format!("class_dist_label{label}.csv"));
    std::fs::write(&dist_path, class_distribution_csv(&thresholds, &rows, st.config.true_classes))?;
    println!("wrote {} and {}", curve_path.display(), dist_path.display());
    Ok(())
}
