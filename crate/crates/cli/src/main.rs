use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use riskforge::experiment::{emit_report, run_all, write_atomic, ExperimentConfig, Format, ModelBundle, RunReport};
use riskforge::pfi::{importance_table, rank_features, LossMetric, Mode, PfiOptions};
use riskforge::{Error, Predictor};

const EXIT_CONFIG: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_FAILED_CELLS: u8 = 3;

#[derive(Parser)]
#[command(
    name = "riskforge",
    version,
    about = "Multiclass credit-risk classification experiments"
)]
struct Cli {
    /// Log progress (RUST_LOG overrides).
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (variant, classifier) cell of a config and write the reports.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides `output_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comma-separated subset of csv, json, svg.
        #[arg(long, value_delimiter = ',', value_parser = parse_format)]
        formats: Option<Vec<Format>>,
    },
    /// Permutation importance of a saved model on a CSV.
    Pfi {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 30)]
        repeats: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = ModeArg::Difference)]
        mode: ModeArg,
        #[arg(long, value_enum, default_value_t = MetricArg::ErrorRate)]
        metric: MetricArg,
        /// Write importance.csv, importance.json and per-class SVGs here
        /// instead of printing the CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Pretty-print the tables of a report.json.
    Inspect {
        #[arg(long)]
        report: PathBuf,
    },
    /// Parse and validate a config without running it.
    ValidateConfig { path: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Difference,
    Ratio,
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricArg {
    ErrorRate,
    OneMinusF1,
}

fn parse_format(s: &str) -> Result<Format, String> {
    Format::parse(s).ok_or_else(|| format!("unknown format `{s}` (expected csv, json or svg)"))
}

/// Config and hyperparameter problems exit 1; everything else is a data problem.
fn classify(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Hyperparameter { .. } => EXIT_CONFIG,
        _ => EXIT_DATA,
    }
}

fn fail(code: u8, e: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match cli.command {
        Command::Run { config, out, formats } => run(&config, out, formats),
        Command::Pfi {
            model,
            data,
            repeats,
            seed,
            mode,
            metric,
            out,
        } => {
            let options = PfiOptions {
                repeats,
                seed,
                mode: match mode {
                    ModeArg::Difference => Mode::Difference,
                    ModeArg::Ratio => Mode::Ratio,
                },
                metric: match metric {
                    MetricArg::ErrorRate => LossMetric::ErrorRate,
                    MetricArg::OneMinusF1 => LossMetric::OneMinusF1,
                },
            };
            pfi(&model, &data, &options, out.as_deref())
        }
        Command::Inspect { report } => match RunReport::load(&report) {
            Ok(r) => {
                print!("{}", render(&r));
                ExitCode::SUCCESS
            }
            Err(e) => fail(EXIT_DATA, e),
        },
        Command::ValidateConfig { path } => match ExperimentConfig::load(&path) {
            Ok(c) => {
                println!(
                    "ok: {} variants x {} classifiers = {} cells, {}-fold CV, seed {}, config hash {}",
                    c.variants.len(),
                    c.classifiers.len(),
                    c.variants.len() * c.classifiers.len(),
                    c.k_folds,
                    c.seed,
                    &c.hash()[..12]
                );
                ExitCode::SUCCESS
            }
            Err(e) => fail(EXIT_CONFIG, e),
        },
    }
}

fn run(path: &Path, out: Option<PathBuf>, formats: Option<Vec<Format>>) -> ExitCode {
    let mut config = match ExperimentConfig::load(path) {
        Ok(c) => c,
        Err(e) => return fail(EXIT_CONFIG, e),
    };
    if let Some(dir) = out {
        config.output_dir = dir;
    }
    if let Some(f) = formats {
        config.formats = f;
    }
    let output = match run_all(&config) {
        Ok(o) => o,
        Err(e) => return fail(classify(&e), e),
    };
    let formats: BTreeSet<Format> = config.formats.iter().copied().collect();
    let mut written = match emit_report(&output.report, &config.output_dir, &formats) {
        Ok(w) => w,
        Err(e) => return fail(EXIT_DATA, e),
    };
    if let Some(bundle) = &output.pfi_model {
        let path = config.output_dir.join("model.json");
        match bundle.save(&path) {
            Ok(()) => written.push(path),
            Err(e) => log::warn!("could not save model bundle: {e}"),
        }
    }
    for p in &written {
        println!("wrote {}", p.display());
    }
    let failed = output.report.failed_cells();
    if failed > 0 {
        for cell in output.report.cells.iter().filter(|c| c.error.is_some()) {
            eprintln!(
                "failed cell {}/{}: {}",
                cell.variant,
                cell.classifier,
                cell.error.as_deref().unwrap_or_default()
            );
        }
        eprintln!("{failed} of {} cells failed", output.report.cells.len());
        return ExitCode::from(EXIT_FAILED_CELLS);
    }
    ExitCode::SUCCESS
}

fn pfi(model: &Path, data: &Path, options: &PfiOptions, out: Option<&Path>) -> ExitCode {
    let result = ModelBundle::load(model).and_then(|bundle| {
        let raw = bundle.load_dataset(data)?;
        let ready = bundle.prepare(&raw)?;
        let table = importance_table(
            &bundle.model,
            ready.features(),
            ready.labels(),
            ready.feature_names(),
            ready.class_names(),
            options,
        )?;
        log::info!(
            "{} rows, {} features, {} classes",
            ready.n(),
            bundle.model.n_features(),
            bundle.model.n_classes()
        );
        Ok(table)
    });
    let table = match result {
        Ok(t) => t,
        Err(e) => return fail(EXIT_DATA, e),
    };
    let Some(dir) = out else {
        return match table.to_csv() {
            Ok(csv) => {
                print!("{csv}");
                ExitCode::SUCCESS
            }
            Err(e) => fail(EXIT_DATA, e),
        };
    };
    let written = std::fs::create_dir_all(dir).map_err(|e| e.to_string()).and_then(|()| {
        let mut files = vec![
            ("importance.csv".to_string(), table.to_csv()),
            ("importance.json".to_string(), table.to_json()),
        ];
        for (c, class) in table.class_names.iter().enumerate() {
            let safe: String = class
                .chars()
                .map(|ch| {
                    if ch.is_ascii_alphanumeric() || ch == '-' || ch == '_' {
                        ch
                    } else {
                        '_'
                    }
                })
                .collect();
            files.push((format!("importance_{safe}.svg"), table.to_svg(c)));
        }
        files
            .into_iter()
            .map(|(name, body)| {
                let path = dir.join(name);
                body.and_then(|b| write_atomic(&path, b.as_bytes()))
                    .map(|()| path)
                    .map_err(|e| e.to_string())
            })
            .collect::<Result<Vec<_>, _>>()
    });
    match written {
        Ok(paths) => {
            for p in paths {
                println!("wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => fail(EXIT_DATA, e),
    }
}

/// Left-aligned first column, right-aligned rest.
fn table(header: &[String], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.len());
        }
    }
    let line = |cells: &[String]| {
        let parts: Vec<String> = cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, &w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        parts.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(header);
    out += &line(&widths.iter().map(|&w| "-".repeat(w)).collect::<Vec<_>>());
    for row in rows {
        out += &line(row);
    }
    out
}

fn csv_table(text: &str) -> String {
    let mut reader = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map(|h| h.iter().map(String::from).collect())
        .unwrap_or_default();
    let rows: Vec<Vec<String>> = reader
        .records()
        .filter_map(|r| r.ok())
        .map(|r| r.iter().map(String::from).collect())
        .collect();
    table(&header, &rows)
}

fn render(r: &RunReport) -> String {
    let mut out = String::new();
    let d = &r.dataset;
    out += &format!(
        "seed {}  config {}  riskforge {}\n",
        r.provenance.seed,
        &r.provenance.config_hash[..r.provenance.config_hash.len().min(12)],
        r.provenance.tool_version
    );
    out += &format!(
        "{} rows x {} features, classes {}, train {} / test {}, {}-fold CV\n",
        d.rows,
        d.features,
        d.class_names
            .iter()
            .zip(&d.class_counts)
            .map(|(c, n)| format!("{c}={n}"))
            .collect::<Vec<_>>()
            .join(" "),
        d.train_rows,
        d.test_rows,
        d.k_folds
    );
    if let Some(s) = &r.selection {
        out += &format!(
            "LASSO kept {} of {} features (lambda {:.4e}): {}\n",
            s.feature_count,
            d.features,
            s.lambda_used,
            s.selected.join(", ")
        );
    } else if let Some(e) = &r.selection_error {
        out += &format!("LASSO selection failed: {e}\n");
    }
    for v in r.variants() {
        out += &format!("\n[{v}] cross-validated metrics\n");
        match r.metrics_csv(v) {
            Ok(csv) => out += &csv_table(&csv),
            Err(e) => out += &format!("unavailable: {e}\n"),
        }
    }
    out += "\ncost\n";
    match r.cost_csv() {
        Ok(csv) => out += &csv_table(&csv),
        Err(e) => out += &format!("unavailable: {e}\n"),
    }
    if let Some(imp) = &r.importance {
        let t = &imp.table;
        out += &format!(
            "\nimportance of {}/{} on the {} split ({} repeats)\n",
            imp.variant, imp.classifier, imp.evaluated_on, t.repeats
        );
        let mut header = vec!["Rank".to_string(), "Global".to_string()];
        header.extend(t.class_names.iter().cloned());
        let global = rank_features(t, None).unwrap_or_default();
        let per_class: Vec<Vec<usize>> = (0..t.class_names.len())
            .map(|c| rank_features(t, Some(c)).unwrap_or_default())
            .collect();
        let rows: Vec<Vec<String>> = (0..t.feature_names.len().min(10))
            .map(|i| {
                let mut row = vec![(i + 1).to_string(), t.feature_names[global[i]].clone()];
                row.extend(per_class.iter().map(|order| t.feature_names[order[i]].clone()));
                row
            })
            .collect();
        out += &table(&header, &rows);
    } else if let Some(e) = &r.importance_error {
        out += &format!("\nimportance unavailable: {e}\n");
    }
    let failed = r.failed_cells();
    if failed > 0 {
        out += &format!("\n{failed} failed cells\n");
        for c in r.cells.iter().filter(|c| c.error.is_some()) {
            out += &format!(
                "  {}/{}: {}\n",
                c.variant,
                c.classifier,
                c.error.as_deref().unwrap_or_default()
            );
        }
    }
    out
}
