//! `rtm` — train, score, and evaluate dropout-marginalized linear
//! classifiers from the command line.
//!
//! Every run echoes its fully resolved configuration to standard error, all
//! randomness flows from the single `--seed`, and output files are written
//! atomically (temp file + rename), so a fixed command line reproduces its
//! outputs byte for byte.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use rtm::dataset::{self, DomainPair, FeatureMatrix, LabelSet};
use rtm::eval::{self, SweepReport};
use rtm::model::{predict, train_rtm, LinearModel, RtmConfig};
use rtm::oracle::convergence_table;
use rtm::{Result, RtmError};

const EXIT_CODE_HELP: &str = "\
Exit codes:
  0   success
  2   usage error (unknown flag or subcommand, missing required flag)
  3   invalid flag value
  4   file I/O failure (missing, unreadable, or unwritable file)
  5   malformed file content (ragged row, bad token, bad index order)
  6   dimension mismatch between inputs
  7   invalid data or hyper-parameter (non-finite value, out-of-range id)
  8   evaluation protocol violation (e.g. sweep without target labels)
  9   numerical failure (regularized scatter not positive definite)
  10  capacity exceeded (exact-enumeration feature limit)";

#[derive(Parser)]
#[command(
    name = "rtm",
    version,
    about = "Closed-form linear classifiers trained on marginalized dropout corruptions",
    after_help = EXIT_CODE_HELP
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Seed for all randomness (64-bit). Commands without randomness ignore
    /// it silently [default: 42]
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Optional key=value file supplying defaults for p, alpha, seed, J,
    /// and grid; explicit flags always override it
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model on labeled features and write it to a model file
    Train(TrainArgs),
    /// Score features with a trained model
    Predict(PredictArgs),
    /// Compare predicted class ids against ground-truth labels
    Eval(EvalArgs),
    /// Sweep the dropout probability on one source/target task
    Sweep(SweepArgs),
    /// Merge sweep report JSONs into a comparison table
    Compare(CompareArgs),
    /// Monte-Carlo corruption self-check against the closed form
    McCheck(McCheckArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Dense feature file, one comma-separated sample per line (or a sparse
    /// file carrying labels, with --sparse)
    #[arg(long)]
    features: PathBuf,

    /// Label file, one class id per line (omit with --sparse)
    #[arg(long, required_unless_present = "sparse", conflicts_with = "sparse")]
    labels: Option<PathBuf>,

    /// Dropout probability, in [0, 1) [default: 0.5]
    #[arg(long, value_parser = parse_probability)]
    p: Option<f64>,

    /// Ridge coefficient, > 0 [default: 1.0]
    #[arg(long, value_parser = parse_alpha)]
    alpha: Option<f64>,

    /// Read --features as the sparse "<label> <index>:<value>" format
    #[arg(long)]
    sparse: bool,

    /// Append a constant all-ones feature row before training
    #[arg(long = "append-constant")]
    append_constant: bool,

    /// Output model path
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    /// Trained model file
    #[arg(long)]
    model: PathBuf,

    /// Feature file to score (dense, or sparse with --sparse; sparse labels
    /// are ignored)
    #[arg(long)]
    features: PathBuf,

    /// Read --features as the sparse format; short feature vectors are
    /// zero-padded to the model dimensionality
    #[arg(long)]
    sparse: bool,

    /// Append the constant all-ones feature row before scoring (use when
    /// the model was trained with --append-constant)
    #[arg(long = "append-constant")]
    append_constant: bool,

    /// Output path for predicted class ids, one per line
    #[arg(long)]
    out: PathBuf,

    /// Optional output CSV of per-class scores, one row per sample
    #[arg(long)]
    scores: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Predicted class ids, one per line
    #[arg(long)]
    pred: PathBuf,

    /// Ground-truth labels, one class id per line
    #[arg(long)]
    labels: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    /// Source feature file (sparse with --sparse)
    #[arg(long = "src-features")]
    src_features: PathBuf,

    /// Source labels, one class id per line (omit with --sparse)
    #[arg(
        long = "src-labels",
        required_unless_present = "sparse",
        conflicts_with = "sparse"
    )]
    src_labels: Option<PathBuf>,

    /// Target feature file (sparse with --sparse)
    #[arg(long = "tgt-features")]
    tgt_features: PathBuf,

    /// Target labels used for evaluation only (omit with --sparse)
    #[arg(
        long = "tgt-labels",
        required_unless_present = "sparse",
        conflicts_with = "sparse"
    )]
    tgt_labels: Option<PathBuf>,

    /// Ridge coefficient, > 0 [default: 1.0]
    #[arg(long, value_parser = parse_alpha)]
    alpha: Option<f64>,

    /// Comma-separated dropout probabilities in [0, 1), strictly
    /// increasing, or "default" for 0.05..=0.95 step 0.05
    #[arg(long)]
    grid: Option<String>,

    /// Task name used in reports [default: derived from the file stems]
    #[arg(long)]
    task: Option<String>,

    /// Standardize features using statistics fitted on the source domain
    #[arg(long)]
    standardize: bool,

    /// Append a constant all-ones feature row to both domains
    #[arg(long = "append-constant")]
    append_constant: bool,

    /// Read both feature files as the sparse format; feature spaces are
    /// zero-padded to a common dimensionality and target labels are mapped
    /// through the source label table
    #[arg(long)]
    sparse: bool,

    /// Output path prefix; writes <out>.csv and <out>.json
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    /// Sweep report JSON files, one per task
    #[arg(long, num_args = 1.., required = true)]
    reports: Vec<PathBuf>,

    /// Optional grouping file with one "task,group" line per task; must
    /// cover every task when given
    #[arg(long)]
    groups: Option<PathBuf>,

    /// Output path prefix; writes <out>.csv and <out>.txt
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct McCheckArgs {
    /// Feature file (sparse with --sparse)
    #[arg(long)]
    features: PathBuf,

    /// Label file, one class id per line (omit with --sparse)
    #[arg(long, required_unless_present = "sparse", conflicts_with = "sparse")]
    labels: Option<PathBuf>,

    /// Dropout probability, in [0, 1) [default: 0.5]
    #[arg(long, value_parser = parse_probability)]
    p: Option<f64>,

    /// Ridge coefficient, > 0 [default: 1.0]
    #[arg(long, value_parser = parse_alpha)]
    alpha: Option<f64>,

    /// Comma-separated corrupted-copy counts, strictly increasing, each >= 1
    /// [default: 10,100,1000,10000]
    #[arg(long = "J-list")]
    j_list: Option<String>,

    /// Read --features as the sparse format
    #[arg(long)]
    sparse: bool,

    /// Output CSV path for the (J, relative_error) table
    #[arg(long)]
    out: PathBuf,
}

fn parse_probability(raw: &str) -> std::result::Result<f64, String> {
    let v: f64 = raw
        .parse()
        .map_err(|_| format!("{raw:?} is not a number"))?;
    if (0.0..1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is outside [0, 1)"))
    }
}

fn parse_alpha(raw: &str) -> std::result::Result<f64, String> {
    let v: f64 = raw
        .parse()
        .map_err(|_| format!("{raw:?} is not a number"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{v} is not a positive real"))
    }
}

fn parse_grid(raw: &str) -> Result<Vec<f64>> {
    if raw == "default" {
        return Ok(eval::default_grid());
    }
    raw.split(',')
        .map(|tok| {
            parse_probability(tok.trim())
                .map_err(|e| RtmError::Validation(format!("grid value {tok:?}: {e}")))
        })
        .collect()
}

fn parse_copy_list(raw: &str) -> Result<Vec<u64>> {
    raw.split(',')
        .map(|tok| {
            let v: u64 = tok.trim().parse().map_err(|_| {
                RtmError::Validation(format!("copy count {tok:?} is not an integer"))
            })?;
            if v == 0 {
                return Err(RtmError::Validation(
                    "copy counts must be at least 1".into(),
                ));
            }
            Ok(v)
        })
        .collect()
}

/// Defaults loaded from the optional key=value config file. Flags override.
struct Defaults {
    values: HashMap<String, String>,
}

impl Defaults {
    const KEYS: [&'static str; 5] = ["p", "alpha", "seed", "J", "grid"];

    fn load(path: Option<&Path>) -> Result<Self> {
        let mut values = HashMap::new();
        if let Some(path) = path {
            let text =
                std::fs::read_to_string(path).map_err(|e| RtmError::io(path.to_path_buf(), e))?;
            for (idx, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (key, value) = line.split_once('=').ok_or_else(|| {
                    RtmError::Validation(format!(
                        "{}: line {}: expected key=value",
                        path.display(),
                        idx + 1
                    ))
                })?;
                let key = key.trim();
                if !Self::KEYS.contains(&key) {
                    return Err(RtmError::Validation(format!(
                        "{}: line {}: unknown key {key:?} (known: {})",
                        path.display(),
                        idx + 1,
                        Self::KEYS.join(", ")
                    )));
                }
                values.insert(key.to_string(), value.trim().to_string());
            }
        }
        Ok(Defaults { values })
    }

    fn resolve<T>(
        &self,
        key: &str,
        flag: Option<T>,
        parse: impl Fn(&str) -> std::result::Result<T, String>,
        builtin: T,
    ) -> Result<T> {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.values.get(key) {
            Some(raw) => {
                parse(raw).map_err(|e| RtmError::Validation(format!("config key {key}: {e}")))
            }
            None => Ok(builtin),
        }
    }

    fn resolve_string(&self, key: &str, flag: Option<String>, builtin: &str) -> String {
        flag.or_else(|| self.values.get(key).cloned())
            .unwrap_or_else(|| builtin.to_string())
    }

    fn seed(&self, flag: Option<u64>) -> Result<u64> {
        self.resolve(
            "seed",
            flag,
            |raw| {
                raw.parse()
                    .map_err(|_| format!("{raw:?} is not a 64-bit seed"))
            },
            42,
        )
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => match e.kind() {
            ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                e.exit();
            }
            ErrorKind::InvalidValue | ErrorKind::ValueValidation | ErrorKind::InvalidUtf8 => {
                let _ = e.print();
                return ExitCode::from(3);
            }
            _ => {
                let _ = e.print();
                return ExitCode::from(2);
            }
        },
    };

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("rtm: error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn exit_code(err: &RtmError) -> u8 {
    match err {
        RtmError::Io { .. } => 4,
        RtmError::Format { .. } | RtmError::Parse { .. } => 5,
        RtmError::Dimension(_) => 6,
        RtmError::Validation(_) => 7,
        RtmError::Protocol(_) => 8,
        RtmError::Numeric { .. } => 9,
        RtmError::Capacity(_) => 10,
    }
}

fn run(cli: Cli) -> Result<()> {
    let defaults = Defaults::load(cli.config.as_deref())?;
    match cli.command {
        Command::Train(args) => run_train(args, &defaults),
        Command::Predict(args) => run_predict(args),
        Command::Eval(args) => run_eval(args),
        Command::Sweep(args) => run_sweep(args, &defaults),
        Command::Compare(args) => run_compare(args),
        Command::McCheck(args) => run_mc_check(args, &defaults, cli.seed),
    }
}

/// Loads a labeled dataset from either format. Sparse label remapping is
/// echoed to standard error.
fn load_labeled(
    features_path: &Path,
    labels_path: Option<&Path>,
    sparse: bool,
) -> Result<(FeatureMatrix, LabelSet)> {
    if sparse {
        let ds = dataset::load_sparse(features_path)?;
        eprintln!(
            "rtm: sparse label map ({}): {}",
            features_path.display(),
            describe_label_map(&ds.original_labels)
        );
        Ok((ds.features, ds.labels))
    } else {
        let labels_path = labels_path.ok_or_else(|| {
            RtmError::Validation("a labels file is required for dense input".into())
        })?;
        let (features, labels) = dataset::load_dense(features_path, Some(labels_path))?;
        Ok((features, labels.expect("labels were requested")))
    }
}

fn describe_label_map(original: &[i64]) -> String {
    original
        .iter()
        .enumerate()
        .map(|(id, orig)| format!("{id}<-{orig}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn run_train(args: TrainArgs, defaults: &Defaults) -> Result<()> {
    let p = defaults.resolve("p", args.p, parse_probability, 0.5)?;
    let alpha = defaults.resolve("alpha", args.alpha, parse_alpha, 1.0)?;

    eprintln!(
        "rtm: config: command=train features={} labels={} sparse={} append-constant={} p={p} alpha={alpha} out={}",
        args.features.display(),
        args.labels.as_deref().map_or("-".into(), |l| l.display().to_string()),
        args.sparse,
        args.append_constant,
        args.out.display()
    );

    let (mut features, labels) = load_labeled(&args.features, args.labels.as_deref(), args.sparse)?;
    if args.append_constant {
        features = features.with_constant_row();
    }
    let model = train_rtm(&features, &labels, RtmConfig::new(p, alpha)?)?;
    write_atomic(&args.out, &model.to_text())
}

fn run_predict(args: PredictArgs) -> Result<()> {
    eprintln!(
        "rtm: config: command=predict model={} features={} sparse={} append-constant={} out={} scores={}",
        args.model.display(),
        args.features.display(),
        args.sparse,
        args.append_constant,
        args.out.display(),
        args.scores.as_deref().map_or("-".into(), |s| s.display().to_string())
    );

    let model = LinearModel::load(&args.model)?;
    let mut features = if args.sparse {
        let ds = dataset::load_sparse(&args.features)?;
        ds.features
    } else {
        dataset::load_dense(&args.features, None)?.0
    };
    if args.append_constant {
        features = features.with_constant_row();
    }
    if args.sparse && features.n_features() < model.n_features() {
        features = features.padded_to(model.n_features())?;
    }

    let prediction = predict(&model, &features)?;

    let mut ids = String::new();
    for id in &prediction.class_ids {
        let _ = writeln!(ids, "{id}");
    }
    write_atomic(&args.out, &ids)?;

    if let Some(scores_path) = &args.scores {
        let mut csv = String::new();
        let header: Vec<String> = (0..model.n_classes())
            .map(|c| format!("score_{c}"))
            .collect();
        csv.push_str(&header.join(","));
        csv.push('\n');
        for sample in prediction.scores.columns() {
            let row: Vec<String> = sample.iter().map(|v| format!("{v}")).collect();
            csv.push_str(&row.join(","));
            csv.push('\n');
        }
        write_atomic(scores_path, &csv)?;
    }
    Ok(())
}

fn run_eval(args: EvalArgs) -> Result<()> {
    eprintln!(
        "rtm: config: command=eval pred={} labels={}",
        args.pred.display(),
        args.labels.display()
    );
    let predicted = dataset::load_labels(&args.pred)?;
    let truth = dataset::load_labels(&args.labels)?;
    let accuracy = eval::accuracy(predicted.class_ids(), &truth)?;
    println!("{accuracy}");
    Ok(())
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Loads the source/target pair for `sweep`. In sparse mode both files are
/// zero-padded to a common feature count, and target labels are translated
/// through the source file's label table so class ids agree across domains.
fn load_pair(args: &SweepArgs, task: &str) -> Result<DomainPair> {
    if args.sparse {
        let source = dataset::load_sparse(&args.src_features)?;
        let target = dataset::load_sparse(&args.tgt_features)?;
        eprintln!(
            "rtm: sparse label map ({}): {}",
            args.src_features.display(),
            describe_label_map(&source.original_labels)
        );

        let k = source
            .features
            .n_features()
            .max(target.features.n_features());
        let src_features = source.features.padded_to(k)?;
        let tgt_features = target.features.padded_to(k)?;

        let tgt_ids: Vec<usize> = target
            .labels
            .class_ids()
            .iter()
            .map(|&local_id| {
                let original = target.original_labels[local_id];
                source
                    .original_labels
                    .iter()
                    .position(|&l| l == original)
                    .ok_or_else(|| {
                        RtmError::Validation(format!(
                            "target label {original} does not occur in the source domain"
                        ))
                    })
            })
            .collect::<Result<_>>()?;
        let tgt_labels = LabelSet::new(tgt_ids, source.labels.n_classes())?;

        DomainPair::new(
            src_features,
            source.labels,
            tgt_features,
            Some(tgt_labels),
            task,
        )
    } else {
        let (src_features, src_labels) =
            dataset::load_dense(&args.src_features, args.src_labels.as_deref())?;
        let (tgt_features, tgt_labels) =
            dataset::load_dense(&args.tgt_features, args.tgt_labels.as_deref())?;
        DomainPair::new(
            src_features,
            src_labels.expect("source labels are required by the parser"),
            tgt_features,
            tgt_labels,
            task,
        )
    }
}

fn run_sweep(args: SweepArgs, defaults: &Defaults) -> Result<()> {
    let alpha = defaults.resolve("alpha", args.alpha, parse_alpha, 1.0)?;
    let grid_spec = defaults.resolve_string("grid", args.grid.clone(), "default");
    let grid = parse_grid(&grid_spec)?;
    let task = args.task.clone().unwrap_or_else(|| {
        format!(
            "{}-{}",
            file_stem(&args.src_features),
            file_stem(&args.tgt_features)
        )
    });

    eprintln!(
        "rtm: config: command=sweep task={task} src-features={} src-labels={} tgt-features={} tgt-labels={} sparse={} standardize={} append-constant={} alpha={alpha} grid={grid_spec} out={}",
        args.src_features.display(),
        args.src_labels.as_deref().map_or("-".into(), |l| l.display().to_string()),
        args.tgt_features.display(),
        args.tgt_labels.as_deref().map_or("-".into(), |l| l.display().to_string()),
        args.sparse,
        args.standardize,
        args.append_constant,
        args.out.display()
    );

    let mut pair = load_pair(&args, &task)?;
    if args.standardize {
        pair = pair.standardized()?;
    }
    if args.append_constant {
        pair = pair.with_constant_row();
    }

    let report = eval::sweep_p(&pair, alpha, &grid)?;
    eprintln!(
        "rtm: sweep {task}: baseline={} best_p={} best_acc={}",
        report.baseline_acc, report.best_p, report.best_acc
    );

    write_atomic(&with_suffix(&args.out, "csv"), &report.to_csv())?;
    write_atomic(&with_suffix(&args.out, "json"), &report.to_json())?;
    Ok(())
}

fn run_compare(args: CompareArgs) -> Result<()> {
    eprintln!(
        "rtm: config: command=compare reports={} groups={} out={}",
        args.reports.len(),
        args.groups
            .as_deref()
            .map_or("-".into(), |g| g.display().to_string()),
        args.out.display()
    );

    let mut reports = Vec::with_capacity(args.reports.len());
    for path in &args.reports {
        let text = std::fs::read_to_string(path).map_err(|e| RtmError::io(path.clone(), e))?;
        reports.push(SweepReport::from_json(&text)?);
    }

    let grouping = match &args.groups {
        Some(path) => load_groups(path, &reports)?,
        None => HashMap::new(),
    };

    let table = eval::compare(&reports, &grouping)?;
    write_atomic(&with_suffix(&args.out, "csv"), &table.to_csv())?;
    write_atomic(&with_suffix(&args.out, "txt"), &table.to_text())?;
    Ok(())
}

/// Parses "task,group" lines and checks that every report task is covered.
fn load_groups(path: &Path, reports: &[SweepReport]) -> Result<HashMap<String, String>> {
    let text = std::fs::read_to_string(path).map_err(|e| RtmError::io(path.to_path_buf(), e))?;
    let mut grouping = HashMap::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (task, group) = line.split_once(',').ok_or_else(|| {
            RtmError::Validation(format!(
                "{}: line {}: expected task,group",
                path.display(),
                idx + 1
            ))
        })?;
        grouping.insert(task.trim().to_string(), group.trim().to_string());
    }
    for report in reports {
        if !grouping.contains_key(&report.task) {
            return Err(RtmError::Validation(format!(
                "{}: no group for task {:?}",
                path.display(),
                report.task
            )));
        }
    }
    Ok(grouping)
}

fn run_mc_check(args: McCheckArgs, defaults: &Defaults, seed_flag: Option<u64>) -> Result<()> {
    let p = defaults.resolve("p", args.p, parse_probability, 0.5)?;
    let alpha = defaults.resolve("alpha", args.alpha, parse_alpha, 1.0)?;
    let seed = defaults.seed(seed_flag)?;
    let list_spec = defaults.resolve_string("J", args.j_list.clone(), "10,100,1000,10000");
    let copy_counts = parse_copy_list(&list_spec)?;

    eprintln!(
        "rtm: config: command=mc-check features={} labels={} sparse={} p={p} alpha={alpha} seed={seed} J-list={list_spec} out={}",
        args.features.display(),
        args.labels.as_deref().map_or("-".into(), |l| l.display().to_string()),
        args.sparse,
        args.out.display()
    );

    let (features, labels) = load_labeled(&args.features, args.labels.as_deref(), args.sparse)?;
    let config = RtmConfig::new(p, alpha)?;
    let table = convergence_table(&features, &labels, config, seed, &copy_counts)?;

    let mut csv = String::from("J,relative_error\n");
    for point in &table {
        let _ = writeln!(csv, "{},{}", point.copies, point.relative_error);
    }
    write_atomic(&args.out, &csv)
}

/// `prefix.ext` next to the given path prefix.
fn with_suffix(prefix: &Path, ext: &str) -> PathBuf {
    let mut name = prefix.as_os_str().to_os_string();
    name.push(".");
    name.push(ext);
    PathBuf::from(name)
}

/// Writes via a temp file in the destination directory plus a rename, so
/// concurrent readers never observe a partial file.
fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(parent) if !parent.as_os_str().is_empty() => parent,
        _ => Path::new("."),
    };
    let mut tmp =
        tempfile::NamedTempFile::new_in(dir).map_err(|e| RtmError::io(dir.to_path_buf(), e))?;
    tmp.write_all(contents.as_bytes())
        .map_err(|e| RtmError::io(path.to_path_buf(), e))?;
    tmp.persist(path)
        .map_err(|e| RtmError::io(path.to_path_buf(), e.error))?;
    Ok(())
}
