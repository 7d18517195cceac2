//! The `smartsvm` command line.
//!
//! Every command computes its outputs in memory and writes them only once
//! it has succeeded, so a failing run leaves nothing behind. Failures are
//! reported on stderr as one JSON line and mapped to exit codes: 1 for
//! usage errors, 2 for data errors, 3 for internal failures.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::ber::{ovr_ber_estimates, pairwise_ber_matrix, BerReport, DEFAULT_TREES};
use crate::dataset::{load_csv, read_feature_csv, stratified_split, LabelColumn, LabeledDataset};
use crate::multiclass::metrics::{adjusted_rand_index, confusion_rates};
use crate::multiclass::selection::{forward_feature_select, SelectionObjective, SelectionStep};
use crate::multiclass::{Classifier, ModelDocument, Strategy, TrainConfig};
use crate::oracle::sweeps::{run_all, SweepReport};
use crate::oracle::{gaussian_ber, gaussian_bhattacharyya, sample_gaussian_mixture, GaussianSpec};
use crate::svm::GridPreset;
use crate::tree::{build_class_graph, build_hierarchy, TreeJson};
use crate::{Error, ErrorKind, Result};

/// Bayes error estimation and hierarchical linear SVMs.
#[derive(Debug, Parser)]
#[command(name = "smartsvm", version)]
pub struct Cli {
    /// Worker threads for parallel stages [default: available parallelism]
    #[arg(long, global = true, env = "SMARTSVM_WORKERS")]
    pub workers: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

/// Labeled CSV input.
#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// Input CSV file
    #[arg(short, long)]
    pub input: PathBuf,

    /// Label column, by header name or 0-based index
    #[arg(long, default_value = "label")]
    pub label: LabelColumn,
}

#[derive(Debug, Clone, Args)]
pub struct TreesArg {
    /// Orthogonal spanning trees averaged per estimate
    #[arg(long, default_value_t = DEFAULT_TREES)]
    pub n_trees: usize,
}

#[derive(Debug, Clone, Args)]
pub struct SeedArg {
    /// Random seed
    #[arg(long, env = "SMARTSVM_SEED", default_value_t = 42)]
    pub seed: u64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Pairwise Bayes error estimates for every class pair
    Ber {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        trees: TreesArg,
        /// Output JSON file
        #[arg(short, long)]
        output: PathBuf,
        /// Also write the normalized estimates as a CSV grid
        #[arg(long)]
        heatmap: Option<PathBuf>,
        /// Include one-vs-rest estimates in the report
        #[arg(long)]
        ovr: bool,
    },
    /// One-vs-rest Bayes error estimates for every class
    Ovr {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        trees: TreesArg,
        /// Output JSON file
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Min-cut class hierarchy
    Tree {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        trees: TreesArg,
        /// Output JSON file
        #[arg(short, long)]
        output: PathBuf,
        /// Write the text rendering here instead of stdout
        #[arg(long)]
        text: Option<PathBuf>,
    },
    /// Train a multiclass model
    Train {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        trees: TreesArg,
        #[command(flatten)]
        seed: SeedArg,
        /// Output model JSON file
        #[arg(short, long)]
        output: PathBuf,
        /// Multiclass construction: smartsvm, ovo or ovr
        #[arg(long, default_value_t = Strategy::SmartSvm)]
        strategy: Strategy,
        /// Cross-validation folds for choosing C
        #[arg(long, default_value_t = 10)]
        cv_folds: usize,
        /// Candidate C values: desk (2^-6..2^6) or wide (2^-18..2^18)
        #[arg(long, default_value_t = GridPreset::Desk)]
        c_grid: GridPreset,
        /// Standardize features with training means and deviations
        #[arg(long)]
        standardize: bool,
    },
    /// Predict labels with a trained model
    Predict {
        /// Model JSON file
        #[arg(short, long)]
        model: PathBuf,
        /// Feature CSV file
        #[arg(short, long)]
        input: PathBuf,
        /// Column to ignore, for inputs that still carry labels [default: label, if present]
        #[arg(long)]
        label: Option<LabelColumn>,
        /// Output CSV with one label column
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Score predictions against true labels
    Eval {
        #[command(flatten)]
        data: DataArgs,
        /// Prediction CSV as written by `predict`
        #[arg(short, long)]
        predictions: PathBuf,
        /// Output JSON file
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Sample a Gaussian mixture and write its exact pairwise errors
    Synth {
        #[command(flatten)]
        seed: SeedArg,
        /// JSON list of {"mean", "sigma", "prior"} class specs; overrides
        /// the two-class flags
        #[arg(long)]
        specs: Option<PathBuf>,
        /// Two-class mean separation in units of sigma
        #[arg(long, default_value_t = 2.0)]
        delta: f64,
        /// Two-class prior of the first class
        #[arg(long, default_value_t = 0.5)]
        prior: f64,
        /// Two-class dimension
        #[arg(long, default_value_t = 2)]
        dim: usize,
        /// Two-class common standard deviation
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        /// Sample count
        #[arg(short, long, default_value_t = 1000)]
        n: usize,
        /// Output CSV file
        #[arg(short, long)]
        output: PathBuf,
        /// Output JSON file with exact Bayes errors and Bhattacharyya bounds
        #[arg(long)]
        truth: PathBuf,
    },
    /// Run the exact property sweeps
    Props {
        #[command(flatten)]
        seed: SeedArg,
        /// Output JSON report
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Stratified train/test split
    Split {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        seed: SeedArg,
        /// Fraction of each class in the training part
        #[arg(long, default_value_t = 0.7)]
        fraction: f64,
        /// Training CSV output
        #[arg(long)]
        train: PathBuf,
        /// Test CSV output
        #[arg(long)]
        test: PathBuf,
    },
    /// Greedy forward feature selection by estimated Bayes error
    Select {
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        trees: TreesArg,
        /// Number of features to select [default: all]
        #[arg(long)]
        max_features: Option<usize>,
        /// Score aggregate over class pairs: mean or worst
        #[arg(long, default_value_t = SelectionObjective::Mean)]
        objective: SelectionObjective,
        /// Output JSON file
        #[arg(short, long)]
        output: PathBuf,
    },
}

/// Files to write once a command has succeeded.
#[derive(Default)]
struct Artifacts {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Artifacts {
    fn add(&mut self, path: &Path, bytes: Vec<u8>) {
        self.files.push((path.to_path_buf(), bytes));
    }

    fn add_json<T: Serialize>(&mut self, path: &Path, value: &T) {
        let mut bytes = serde_json::to_vec_pretty(value).expect("reports serialize");
        bytes.push(b'\n');
        self.add(path, bytes);
    }

    /// Writes every file, removing the ones already written if any fails.
    fn commit(self) -> Result<()> {
        let mut written: Vec<&Path> = Vec::new();
        for (path, bytes) in &self.files {
            if let Err(source) = fs::write(path, bytes) {
                for p in written {
                    let _ = fs::remove_file(p);
                }
                let _ = fs::remove_file(path);
                return Err(Error::Io {
                    path: path.clone(),
                    source,
                });
            }
            written.push(path);
        }
        Ok(())
    }
}

fn check_trees(trees: &TreesArg) -> Result<usize> {
    if trees.n_trees == 0 {
        return Err(Error::InvalidArgument("--n-trees must be at least 1".into()));
    }
    Ok(trees.n_trees)
}

fn heatmap_csv(report_classes: &[String], grid: &[Vec<Option<f64>>]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let to_err = |e: csv::Error| Error::Invariant(format!("csv encoding failed: {e}"));
    let mut header = vec!["class".to_string()];
    header.extend(report_classes.iter().cloned());
    w.write_record(&header).map_err(to_err)?;
    for (name, row) in report_classes.iter().zip(grid) {
        let mut record = vec![name.clone()];
        record.extend(row.iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()));
        w.write_record(&record).map_err(to_err)?;
    }
    w.into_inner().map_err(|e| Error::Invariant(format!("csv encoding failed: {e}")))
}

#[derive(Serialize)]
struct TreeReport {
    classes: Vec<String>,
    n_trees: usize,
    tree: TreeJson,
}

#[derive(Serialize)]
struct ClassRate {
    class: String,
    rate: f64,
}

#[derive(Serialize)]
struct EvalReport {
    n: usize,
    accuracy: f64,
    ari: f64,
    confusion_rates: Vec<ClassRate>,
}

#[derive(Serialize)]
struct PairTruth {
    a: String,
    b: String,
    ber: f64,
    bhattacharyya: f64,
}

#[derive(Serialize)]
struct SynthTruth {
    n: usize,
    seed: u64,
    classes: Vec<String>,
    specs: Vec<GaussianSpec>,
    /// Priors of each pair are renormalized to sum to 1.
    pairs: Vec<PairTruth>,
}

#[derive(Serialize)]
struct PropsReport {
    seed: u64,
    passed: bool,
    sweeps: Vec<SweepReport>,
}

#[derive(Serialize)]
struct SelectReport {
    features: Vec<usize>,
    steps: Vec<SelectionStep>,
    objective: String,
    n_trees: usize,
}

fn read_predictions(path: &Path) -> Result<Vec<String>> {
    let to_err = |e: csv::Error| Error::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(source) => Error::Io {
                path: path.to_path_buf(),
                source,
            },
            other => Error::Csv {
                path: path.to_path_buf(),
                message: format!("{other:?}"),
            },
        })?;
    let headers = reader.headers().map_err(to_err)?.clone();
    let column = match headers.iter().position(|h| h == "label") {
        Some(c) => c,
        None if headers.len() == 1 => 0,
        None => return Err(Error::MissingLabelColumn("label".into())),
    };
    reader
        .records()
        .map(|r| r.map(|r| r.get(column).unwrap_or_default().to_string()).map_err(to_err))
        .collect()
}

fn evaluate(ds: &LabeledDataset, predicted: &[String]) -> Result<EvalReport> {
    if predicted.len() != ds.n_samples() {
        return Err(Error::LengthMismatch {
            left: ds.n_samples(),
            right: predicted.len(),
        });
    }
    let mut names = ds.class_names().to_vec();
    let y_hat: Vec<usize> = predicted
        .iter()
        .map(|p| match names.iter().position(|n| n == p) {
            Some(i) => i,
            None => {
                names.push(p.clone());
                names.len() - 1
            }
        })
        .collect();
    let y = ds.labels();
    let correct = y.iter().zip(&y_hat).filter(|(a, b)| a == b).count();
    let rates = confusion_rates(y, &y_hat, names.len())?;
    Ok(EvalReport {
        n: y.len(),
        accuracy: correct as f64 / y.len() as f64,
        ari: adjusted_rand_index(y, &y_hat)?,
        confusion_rates: names
            .into_iter()
            .zip(rates)
            .map(|(class, rate)| ClassRate { class, rate })
            .collect(),
    })
}

/// Whether the first row of a CSV file has a cell equal to `name`.
fn header_has(path: &Path, name: &str) -> bool {
    csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .ok()
        .and_then(|mut r| r.records().next())
        .and_then(|r| r.ok())
        .is_some_and(|r| r.iter().any(|cell| cell == name))
}

fn synth_specs(
    specs: Option<&Path>,
    delta: f64,
    prior: f64,
    dim: usize,
    sigma: f64,
) -> Result<Vec<GaussianSpec>> {
    if let Some(path) = specs {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        return serde_json::from_str(&text).map_err(|e| Error::InvalidArgument(format!("bad specs file: {e}")));
    }
    if dim == 0 || !(delta >= 0.0) || !(prior > 0.0 && prior < 1.0) || !(sigma > 0.0) {
        return Err(Error::InvalidArgument(
            "need --dim >= 1, --delta >= 0, 0 < --prior < 1 and --sigma > 0".into(),
        ));
    }
    let mut far = vec![0.0; dim];
    far[0] = delta * sigma;
    Ok(vec![
        GaussianSpec::new(vec![0.0; dim], sigma, prior),
        GaussianSpec::new(far, sigma, 1.0 - prior),
    ])
}

fn pair_truths(specs: &[GaussianSpec], names: &[String]) -> Result<Vec<PairTruth>> {
    let mut pairs = Vec::new();
    for a in 0..specs.len() {
        for b in a + 1..specs.len() {
            let total = specs[a].prior + specs[b].prior;
            let sa = GaussianSpec {
                prior: specs[a].prior / total,
                ..specs[a].clone()
            };
            let sb = GaussianSpec {
                prior: specs[b].prior / total,
                ..specs[b].clone()
            };
            pairs.push(PairTruth {
                a: names[a].clone(),
                b: names[b].clone(),
                ber: gaussian_ber(&sa, &sb)?,
                bhattacharyya: gaussian_bhattacharyya(&sa, &sb)?,
            });
        }
    }
    Ok(pairs)
}

/// Runs one parsed command; returns the exit code on success.
fn execute(command: Command) -> Result<i32> {
    let mut out = Artifacts::default();
    let mut code = 0;
    match command {
        Command::Ber {
            data,
            trees,
            output,
            heatmap,
            ovr,
        } => {
            let n_trees = check_trees(&trees)?;
            let ds = load_csv(&data.input, &data.label)?;
            let matrix = pairwise_ber_matrix(&ds, n_trees)?;
            let ovr = if ovr { Some(ovr_ber_estimates(&ds, n_trees)?) } else { None };
            out.add_json(&output, &BerReport::new(ds.class_names().to_vec(), n_trees, Some(&matrix), ovr));
            if let Some(path) = heatmap {
                out.add(&path, heatmap_csv(matrix.classes(), &matrix.normalized_grid())?);
            }
        }
        Command::Ovr { data, trees, output } => {
            let n_trees = check_trees(&trees)?;
            let ds = load_csv(&data.input, &data.label)?;
            let ovr = ovr_ber_estimates(&ds, n_trees)?;
            out.add_json(&output, &BerReport::new(ds.class_names().to_vec(), n_trees, None, Some(ovr)));
        }
        Command::Tree {
            data,
            trees,
            output,
            text,
        } => {
            let n_trees = check_trees(&trees)?;
            let ds = load_csv(&data.input, &data.label)?;
            let tree = build_hierarchy(&build_class_graph(&pairwise_ber_matrix(&ds, n_trees)?)?)?;
            let names = ds.class_names();
            out.add_json(
                &output,
                &TreeReport {
                    classes: names.to_vec(),
                    n_trees,
                    tree: tree.to_json(names),
                },
            );
            let rendering = tree.render_text(names);
            match text {
                Some(path) => out.add(&path, rendering.into_bytes()),
                None => print!("{rendering}"),
            }
        }
        Command::Train {
            data,
            trees,
            seed,
            output,
            strategy,
            cv_folds,
            c_grid,
            standardize,
        } => {
            let cfg = TrainConfig {
                n_trees: check_trees(&trees)?,
                c_grid: c_grid.values(),
                cv_folds,
                seed: seed.seed,
                standardize,
                ..TrainConfig::default()
            };
            let ds = load_csv(&data.input, &data.label)?;
            let (model, timings) = ModelDocument::train(&ds, strategy, &cfg)?;
            eprintln!(
                "trained {} binary models ({strategy}): preprocessing {:.3}s, fitting {:.3}s, total {:.3}s",
                model.n_models(),
                timings.preprocessing.as_secs_f64(),
                timings.fitting.as_secs_f64(),
                timings.total().as_secs_f64()
            );
            let mut bytes = model.to_json().into_bytes();
            bytes.push(b'\n');
            out.add(&output, bytes);
        }
        Command::Predict {
            model,
            input,
            label,
            output,
        } => {
            let text = fs::read_to_string(&model).map_err(|source| Error::Io { path: model, source })?;
            let doc = ModelDocument::from_json(&text)?;
            let label = label.or_else(|| header_has(&input, "label").then(|| LabelColumn::Name("label".into())));
            let table = read_feature_csv(&input, label.as_ref())?;
            if table.n_features != doc.n_features() {
                return Err(Error::DimensionMismatch {
                    expected: doc.n_features(),
                    actual: table.n_features,
                });
            }
            let predicted = doc.predict(&table.features)?;
            let mut bytes = b"label\n".to_vec();
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
            for p in predicted {
                w.write_record([&doc.classes()[p]])
                    .map_err(|e| Error::Invariant(format!("csv encoding failed: {e}")))?;
            }
            bytes.extend(w.into_inner().map_err(|e| Error::Invariant(format!("csv encoding failed: {e}")))?);
            out.add(&output, bytes);
        }
        Command::Eval {
            data,
            predictions,
            output,
        } => {
            let ds = load_csv(&data.input, &data.label)?;
            let predicted = read_predictions(&predictions)?;
            out.add_json(&output, &evaluate(&ds, &predicted)?);
        }
        Command::Synth {
            seed,
            specs,
            delta,
            prior,
            dim,
            sigma,
            n,
            output,
            truth,
        } => {
            let specs = synth_specs(specs.as_deref(), delta, prior, dim, sigma)?;
            let ds = sample_gaussian_mixture(&specs, n, seed.seed)?;
            let pairs = pair_truths(&specs, ds.class_names())?;
            let mut csv = Vec::new();
            ds.write_csv(&mut csv)?;
            out.add(&output, csv);
            out.add_json(
                &truth,
                &SynthTruth {
                    n,
                    seed: seed.seed,
                    classes: ds.class_names().to_vec(),
                    specs,
                    pairs,
                },
            );
        }
        Command::Props { seed, output } => {
            let sweeps = run_all(seed.seed);
            let passed = sweeps.iter().all(|s| s.passed);
            for s in &sweeps {
                eprintln!(
                    "{} {}: {} instances, {} violations",
                    if s.passed { "PASS" } else { "FAIL" },
                    s.name,
                    s.instances,
                    s.violations
                );
            }
            out.add_json(
                &output,
                &PropsReport {
                    seed: seed.seed,
                    passed,
                    sweeps,
                },
            );
            if !passed {
                code = 3;
            }
        }
        Command::Split {
            data,
            seed,
            fraction,
            train,
            test,
        } => {
            if !(fraction > 0.0 && fraction < 1.0) {
                return Err(Error::InvalidArgument(format!("--fraction must be in (0, 1), got {fraction}")));
            }
            let ds = load_csv(&data.input, &data.label)?;
            let (a, b) = stratified_split(&ds, fraction, seed.seed)?;
            let (mut ta, mut tb) = (Vec::new(), Vec::new());
            a.write_csv(&mut ta)?;
            b.write_csv(&mut tb)?;
            out.add(&train, ta);
            out.add(&test, tb);
        }
        Command::Select {
            data,
            trees,
            max_features,
            objective,
            output,
        } => {
            let n_trees = check_trees(&trees)?;
            let ds = load_csv(&data.input, &data.label)?;
            let steps = forward_feature_select(&ds, max_features.unwrap_or(ds.n_features()), n_trees, objective)?;
            out.add_json(
                &output,
                &SelectReport {
                    features: steps.iter().map(|s| s.feature).collect(),
                    steps,
                    objective: objective.to_string(),
                    n_trees,
                },
            );
        }
    }
    out.commit()?;
    Ok(code)
}

fn exit_code(kind: ErrorKind) -> i32 {
    match kind {
        ErrorKind::Usage => 1,
        ErrorKind::Data => 2,
        ErrorKind::Internal => 3,
    }
}

fn report(kind: &str, message: &str) {
    eprintln!("{}", serde_json::json!({ "error": kind, "message": message }));
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind as Clap;
            if matches!(e.kind(), Clap::DisplayHelp | Clap::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            let message = e.to_string();
            let message: Vec<&str> = message.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
            report("usage", &message.join(" "));
            return 1;
        }
    };
    let pool = match cli.workers {
        Some(0) => {
            report("usage", "--workers must be at least 1");
            return 1;
        }
        workers => rayon::ThreadPoolBuilder::new().num_threads(workers.unwrap_or(0)).build(),
    };
    let result = match pool {
        Ok(pool) => pool.install(|| execute(cli.command)),
        Err(e) => Err(Error::Invariant(format!("cannot start worker pool: {e}"))),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let kind = e.kind();
            let name = match kind {
                ErrorKind::Usage => "usage",
                ErrorKind::Data => "data",
                ErrorKind::Internal => "internal",
            };
            report(name, &e.to_string());
            exit_code(kind)
        }
    }
}
