//! `trajtax`: extract features, run selection experiments and regenerate reports.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use trajtax::config::{sidecar_path, ExperimentConfig};
use trajtax::experiment::{
    plan_fit_counts, read_results_jsonl, run_experiment, write_failures_jsonl, write_results_jsonl, write_timings_jsonl,
};
use trajtax::features::FeatureMatrix;
use trajtax::report::{format_median_table, write_reports};
use trajtax::taxonomy::Taxonomy;
use trajtax::{Error, Result};

#[derive(Parser)]
#[command(name = "trajtax", version, about = "Taxonomy-based feature selection for movement trajectories")]
struct Cli {
    /// Worker threads (defaults to the number of CPUs).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the configured one.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Extract the feature matrix and its sidecar.
    Extract {
        #[command(flatten)]
        common: Common,
    },
    /// Run the cross-validated comparison and write results and reports.
    Run {
        #[command(flatten)]
        common: Common,
        /// Print the validated plan and expected fit counts without fitting anything.
        #[arg(long)]
        dry_run: bool,
        /// Comma-separated seeds replacing the configured ones.
        #[arg(long, value_delimiter = ',')]
        seed_override: Option<Vec<u64>>,
    },
    /// Regenerate report artifacts from a results file.
    Report {
        results: PathBuf,
        /// Configuration supplying the taxonomy (built-in when omitted).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory (defaults to the results file's directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let outcome = match cli.command {
        Command::Extract { common } => extract(&common),
        Command::Run {
            common,
            dry_run,
            seed_override,
        } => run(&common, dry_run, seed_override),
        Command::Report { results, config, out } => report(&results, config.as_deref(), out.as_deref()),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 2 } else { 1 })
        }
    }
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::from_path(&common.config)?;
    if let Some(out) = &common.out {
        cfg.output_dir = out.clone();
    }
    Ok(cfg)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn flush(mut w: BufWriter<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

fn print_matrix_stats(m: &FeatureMatrix) {
    println!("rows: {}, columns: {}", m.n_rows(), m.n_cols());
    let missing = m.missing_by_column();
    let total: usize = missing.iter().sum();
    println!(
        "missing values: {total} ({:.2}% of cells) in {} columns",
        100.0 * total as f64 / (m.n_rows() * m.n_cols()).max(1) as f64,
        missing.iter().filter(|&&n| n > 0).count()
    );
    for (col, n) in m.columns().iter().zip(&missing).filter(|(_, &n)| n > 0) {
        println!("  {:<16} {n}", col.name);
    }
}

fn extract(common: &Common) -> Result<ExitCode> {
    let cfg = load_config(common)?;
    if cfg.dataset.path.is_none() {
        return Err(Error::Config("extract needs `dataset.path`".into()));
    }
    let mut raw = cfg.clone();
    raw.dataset.features = None;
    let loaded = raw.load_data()?;
    if let Some(r) = &loaded.parse_report {
        println!(
            "rows read: {}, rejected: {} (coordinates {}, timestamps {}, malformed {}, label conflicts {}), duplicate timestamps dropped: {}, short trajectories dropped: {}",
            r.rows_read,
            r.rows_rejected,
            r.bad_coordinates,
            r.bad_timestamps,
            r.malformed,
            r.label_conflicts,
            r.duplicate_timestamps,
            r.short_trajectories.len()
        );
    }
    print_matrix_stats(&loaded.matrix);
    fs::create_dir_all(&cfg.output_dir).map_err(|e| Error::io(&cfg.output_dir, e))?;
    let csv_path = cfg.output_dir.join("features.csv");
    let w = create(&csv_path)?;
    loaded.matrix.write_csv(w)?;
    let side = sidecar_path(&csv_path);
    let mut w = create(&side)?;
    loaded.matrix.write_sidecar(&mut w)?;
    flush(w, &side)?;
    println!("wrote {} and {}", csv_path.display(), side.display());
    Ok(ExitCode::SUCCESS)
}

fn run(common: &Common, dry_run: bool, seed_override: Option<Vec<u64>>) -> Result<ExitCode> {
    let mut cfg = load_config(common)?;
    if let Some(seeds) = seed_override {
        cfg.experiment.seeds = seeds;
    }
    let plan = cfg.plan()?;
    plan.validate()?;
    let data = cfg.load_data()?.matrix;

    if dry_run {
        let cells = plan_fit_counts(&plan, data.n_cols());
        println!(
            "dataset `{}`: {} rows x {} columns, {} classes",
            plan.dataset,
            data.n_rows(),
            data.n_cols(),
            data.classes().len()
        );
        println!(
            "{} cells x {} iterations (seeds {:?}, {} folds)",
            cells.len(),
            plan.protocol.iterations(),
            plan.protocol.seeds,
            plan.protocol.folds
        );
        println!("{}", serde_json::to_string_pretty(&cells).map_err(Error::from)?);
        return Ok(ExitCode::SUCCESS);
    }

    let out = run_experiment(&data, &plan)?;
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join("results.jsonl");
    let mut w = create(&path)?;
    write_results_jsonl(&mut w, &out.results)?;
    flush(w, &path)?;
    let path = dir.join("timings.jsonl");
    let mut w = create(&path)?;
    write_timings_jsonl(&mut w, &out.results)?;
    flush(w, &path)?;
    let path = dir.join("failures.jsonl");
    let mut w = create(&path)?;
    write_failures_jsonl(&mut w, &out.failures)?;
    flush(w, &path)?;

    if !out.results.is_empty() {
        let written = write_reports(&out.results, &plan.taxonomy, dir)?;
        for d in &written.diagnostics {
            log::warn!("{d}");
        }
        print!("{}", format_median_table(&out.results));
    }
    println!("{} iterations completed, {} failed; outputs in {}", out.results.len(), out.failures.len(), dir.display());
    if out.failures.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        for f in &out.failures {
            eprintln!("iteration failed: {}", f.error);
        }
        Ok(ExitCode::from(1))
    }
}

fn report(results: &Path, config: Option<&Path>, out: Option<&Path>) -> Result<ExitCode> {
    let taxonomy = match config {
        Some(p) => ExperimentConfig::from_path(p)?.taxonomy()?,
        None => Taxonomy::builtin(),
    };
    let file = File::open(results).map_err(|e| Error::io(results, e))?;
    let (parsed, skipped) = read_results_jsonl(BufReader::new(file)).map_err(|e| e.context(results.display().to_string()))?;
    if skipped > 0 {
        eprintln!("warning: skipped {skipped} unreadable line(s) in {}", results.display());
    }
    let dir = match out {
        Some(d) => d.to_path_buf(),
        None => results.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    let written = write_reports(&parsed, &taxonomy, &dir)?;
    for d in &written.diagnostics {
        log::warn!("{d}");
    }
    print!("{}", format_median_table(&parsed));
    println!("{} results, report files in {}", parsed.len(), dir.display());
    Ok(ExitCode::SUCCESS)
}
