use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;

use clasmk::bounds::{separability_report, SubspaceProjections};
use clasmk::classifier::{confusion_matrix, error_rate};
use clasmk::config::RunConfig;
use clasmk::data::{load_dataset, write_csv, DataFormat, Dataset};
use clasmk::experiment::{
    all_variants, cross_validate_hierarchy, cross_validate_variants, mean_std, run_sweep, sweep_csv, train_model,
    ClassifierOptions, SweepAxis,
};
use clasmk::hierarchy::HierarchicalModel;
use clasmk::metric::ProjectionCache;
use clasmk::model_io::{load_model, save_model};
use clasmk::synth::{gaussian_blobs, moons, synth_class_specific, synth_subspace, SubspaceParams};

const MODEL_FILE: &str = "model.clasmk";
const CELL: usize = 16;

#[derive(Parser)]
#[command(name = "clasmk", version, about = "Class-specific subspace multiple-kernel metric learning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a layered model and write it with per-layer weight CSVs.
    Train(ConfigArgs),
    /// Test error of a saved model, or k-fold error with retraining.
    Eval(EvalArgs),
    /// Separability statistics and bounds for a model or explicit features.
    Bounds(BoundsArgs),
    /// Write embeddings of a data file as label-first CSV.
    Embed(EmbedArgs),
    /// Per-layer weight CSVs and PPM heat maps.
    Heatmap(HeatmapArgs),
    /// Accuracy, optimization time and feature dimension over a grid.
    Sweep(SweepArgs),
    /// Generate synthetic data.
    Synth(SynthArgs),
}

#[derive(Args, Clone, Default)]
struct ConfigArgs {
    /// `key = value` config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    format: Option<DataFormat>,
    /// Kernel such as `rbf:0.5` or `poly:12`; repeat to build the set.
    #[arg(long = "kernel")]
    kernels: Vec<String>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    t_kappa: Option<f64>,
    #[arg(long)]
    l_max: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    split_fraction: Option<f64>,
    #[arg(long)]
    ridge: Option<f64>,
    #[arg(long)]
    tune_ridge: bool,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_rank: Option<usize>,
    #[arg(long)]
    f_tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    no_standardize: bool,
    /// Output directory.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Saved model; requires --test.
    #[arg(long, conflicts_with = "kfold")]
    model: Option<PathBuf>,
    #[arg(long, requires = "model")]
    test: Option<PathBuf>,
    /// Retrain on k folds of the configured data.
    #[arg(long)]
    kfold: Option<usize>,
    /// In k-fold mode, also score single-layer variants and every single kernel.
    #[arg(long, requires = "kfold")]
    variants: bool,
}

#[derive(Args)]
struct BoundsArgs {
    #[arg(long, requires = "data")]
    model: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value = "csv")]
    format: DataFormat,
    /// Layer whose weighted subspaces are measured.
    #[arg(long, default_value_t = 1)]
    layer: usize,
    /// Feature-space samples, label first; use with --bases instead of a model.
    #[arg(long, conflicts_with = "model", requires = "bases")]
    features: Option<PathBuf>,
    /// One basis column per line: class label, then the column entries.
    #[arg(long, requires = "features")]
    bases: Option<PathBuf>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct EmbedArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = "csv")]
    format: DataFormat,
    /// Number of layers to concatenate; all by default.
    #[arg(long)]
    through: Option<usize>,
    /// Output file; stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct HeatmapArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value = ".")]
    output: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// `layers=1,2,3`, `kernels=4,8,16` or `train_size=0.25,0.5,1`.
    #[arg(long)]
    grid: String,
    #[arg(long, default_value_t = 0.2)]
    test_fraction: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthKind {
    Subspace,
    ClassSpecific,
    Moons,
    Blobs,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_enum)]
    kind: SynthKind,
    #[arg(long, default_value_t = 3)]
    classes: usize,
    #[arg(long, default_value_t = 4)]
    rank: usize,
    /// Ambient dimension, or block dimension for class-specific data.
    #[arg(long, default_value_t = 32)]
    dim: usize,
    #[arg(long, default_value_t = 0.1)]
    sigma_e_sq: f64,
    #[arg(long, default_value_t = 0.0)]
    lambda: f64,
    #[arg(long, default_value_t = 200)]
    n_per_class: usize,
    /// Noise level for moons and blobs.
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    output: PathBuf,
    /// Where to write the generating bases (subspace kinds only).
    #[arg(long)]
    bases_output: Option<PathBuf>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<clasmk::Error> for Failure {
    fn from(e: clasmk::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type CmdResult = Result<(), Failure>;

fn runtime<E: std::fmt::Display>(context: impl std::fmt::Display) -> impl FnOnce(E) -> Failure {
    move |e| Failure::Runtime(format!("{context}: {e}"))
}

fn load(path: &Path, format: DataFormat) -> Result<Dataset, Failure> {
    load_dataset(path, format).map_err(runtime(path.display()))
}

fn open_model(path: &Path) -> Result<HierarchicalModel, Failure> {
    load_model(path).map_err(runtime(path.display()))
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> CmdResult {
    fs::write(path, bytes).map_err(runtime(path.display()))
}

fn ensure_dir(dir: &Path) -> CmdResult {
    fs::create_dir_all(dir).map_err(runtime(dir.display()))
}

impl ConfigArgs {
    fn resolve(&self) -> Result<RunConfig, Failure> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(runtime(path.display()))?;
                RunConfig::parse(&text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?
            }
            None => RunConfig::default(),
        };
        let mut set = |key: &str, value: String| cfg.set(key, &value).map_err(Failure::Usage);
        if let Some(v) = &self.data {
            set("data", v.display().to_string())?;
        }
        if let Some(v) = self.format {
            set("format", v.to_string())?;
        }
        if let Some(v) = self.eta {
            set("eta", v.to_string())?;
        }
        if let Some(v) = self.t {
            set("t", v.to_string())?;
        }
        if let Some(v) = self.t_kappa {
            set("t_kappa", v.to_string())?;
        }
        if let Some(v) = self.l_max {
            set("l_max", v.to_string())?;
        }
        if let Some(v) = self.epsilon {
            set("epsilon", v.to_string())?;
        }
        if let Some(v) = self.split_fraction {
            set("split_fraction", v.to_string())?;
        }
        if let Some(v) = self.ridge {
            set("ridge", v.to_string())?;
        }
        if let Some(v) = self.tol {
            set("tol", v.to_string())?;
        }
        if let Some(v) = self.max_rank {
            set("max_rank", v.to_string())?;
        }
        if let Some(v) = self.f_tol {
            set("f_tol", v.to_string())?;
        }
        if let Some(v) = self.max_iters {
            set("max_iters", v.to_string())?;
        }
        if let Some(v) = self.seed {
            set("seed", v.to_string())?;
        }
        if let Some(v) = &self.output {
            set("output", v.display().to_string())?;
        }
        if self.tune_ridge {
            set("tune_ridge", "true".into())?;
        }
        if self.no_standardize {
            set("standardize", "false".into())?;
        }
        if !self.kernels.is_empty() {
            cfg.kernels.clear();
            for k in &self.kernels {
                cfg.set("kernel", k).map_err(Failure::Usage)?;
            }
        }
        cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
        Ok(cfg)
    }
}

fn config_data(cfg: &RunConfig) -> Result<Dataset, Failure> {
    let path = cfg
        .data
        .as_ref()
        .ok_or_else(|| Failure::Usage("no dataset given (--data or `data =` in the config)".into()))?;
    load(path, cfg.format)
}

fn output_dir(cfg: &RunConfig) -> PathBuf {
    cfg.output.clone().unwrap_or_else(|| PathBuf::from("."))
}

fn cmd_train(args: &ConfigArgs) -> CmdResult {
    let cfg = args.resolve()?;
    let ds = config_data(&cfg)?;
    let kernels = cfg.kernel_set()?;
    let model = train_model(&ds, &kernels, &cfg.hierarchy_hyper(), cfg.standardize)?;
    let dir = output_dir(&cfg);
    ensure_dir(&dir)?;
    for (i, layer) in model.layers.iter().enumerate() {
        let obj = layer.objective.map_or(f64::NAN, |o| o.h);
        let d_nu = if i == 0 { "-".to_string() } else { format!("{:.6e}", model.d_nu[i - 1]) };
        println!(
            "layer {}: h = {obj:.6}, d_nu = {d_nu}, fitted on {} points, dim {}",
            layer.index,
            layer.subset_size,
            model.dim_through(i + 1)
        );
        write_file(&dir.join(format!("nu_layer{}.csv", layer.index)), layer.nu.to_csv(&kernels))?;
    }
    println!("stopped: {:?}", model.stop);
    if let Some(w) = model.warning() {
        eprintln!("warning: {w}");
    }
    let path = dir.join(MODEL_FILE);
    save_model(&model, &path).map_err(runtime(path.display()))?;
    write_file(&dir.join("config.txt"), cfg.to_text())?;
    println!("model written to {}", path.display());
    Ok(())
}

fn confusion_csv(confusion: &[Vec<usize>]) -> String {
    let mut out = String::from("# true,predicted counts by class\n");
    for (c, row) in confusion.iter().enumerate() {
        let cells: Vec<String> = row.iter().map(usize::to_string).collect();
        out.push_str(&format!("{c},{}\n", cells.join(",")));
    }
    out
}

fn cmd_eval(args: &EvalArgs) -> CmdResult {
    if let (Some(model_path), Some(test_path)) = (&args.model, &args.test) {
        let model = open_model(model_path)?;
        let format = args.config.format.unwrap_or(DataFormat::Csv);
        let test = load(test_path, format)?;
        let preds = model.predict(&test.x)?;
        let err = error_rate(&preds, &test.y);
        println!("error {:.4} % +- 0.0000 % over 1 test set", 100.0 * err);
        let csv = confusion_csv(&confusion_matrix(&preds, &test.y, model.n_classes.max(test.n_classes())));
        match &args.config.output {
            Some(dir) => {
                ensure_dir(dir)?;
                write_file(&dir.join("confusion.csv"), csv)?;
            }
            None => print!("{csv}"),
        }
        return Ok(());
    }
    let Some(k) = args.kfold else {
        return Err(Failure::Usage("eval needs --model with --test, or --kfold".into()));
    };
    let cfg = args.config.resolve()?;
    let ds = config_data(&cfg)?;
    let kernels = cfg.kernel_set()?;
    let hyper = cfg.hierarchy_hyper();
    if args.variants {
        let variants = all_variants(kernels.len());
        let classifier = ClassifierOptions {
            ridge: cfg.ridge,
            tune: cfg.tune_ridge,
        };
        let report = cross_validate_variants(&ds, &kernels, &hyper, &variants, &classifier, k, cfg.seed, cfg.standardize)?;
        for (f, errs) in report.fold_errors.iter().enumerate() {
            let cells: Vec<String> = errs.iter().map(|e| format!("{:.4}", 100.0 * e)).collect();
            println!("fold {} {}", f + 1, cells.join(" "));
        }
        print!("{}", report.to_text());
        return Ok(());
    }
    let errors = cross_validate_hierarchy(&ds, &kernels, &hyper, k, cfg.seed, cfg.standardize)?;
    for (f, e) in errors.iter().enumerate() {
        println!("fold {} error {:.4} %", f + 1, 100.0 * e);
    }
    let (m, s) = mean_std(&errors);
    println!("error {:.4} % +- {:.4} % over {k} folds", 100.0 * m, 100.0 * s);
    Ok(())
}

/// Basis columns grouped by class label.
fn read_bases(path: &Path) -> Result<Vec<DMatrix<f64>>, Failure> {
    let ds = load(path, DataFormat::Csv)?;
    Ok(ds.per_class().into_iter().map(|m| m.transpose()).collect())
}

fn cmd_bounds(args: &BoundsArgs) -> CmdResult {
    let (proj, embeddings, labels) = if let (Some(feat), Some(bases)) = (&args.features, &args.bases) {
        let ds = load(feat, args.format)?;
        let bases = read_bases(bases)?;
        let proj = SubspaceProjections::from_features(&ds.per_class(), &bases)?;
        (proj, ds.x, ds.y)
    } else if let (Some(model_path), Some(data)) = (&args.model, &args.data) {
        let model = open_model(model_path)?;
        if args.layer == 0 || args.layer > model.n_layers() {
            return Err(Failure::Usage(format!(
                "layer {} requested from a {}-layer model",
                args.layer,
                model.n_layers()
            )));
        }
        let ds = load(data, args.format)?;
        let x = match &model.standardizer {
            Some(s) => s.transform(&ds.x)?,
            None => ds.x.clone(),
        };
        let layer = &model.layers[args.layer - 1];
        let prepared = Dataset::new(x.clone(), ds.y.clone(), ds.n_classes())?;
        let cache = ProjectionCache::compute(&layer.bank, &model.kernels, &prepared.per_class(), &layer.nu.support())?;
        let proj = SubspaceProjections::from_cache_weighted(&cache, &layer.nu)?;
        let emb = clasmk::hierarchy::embed_layer_many(&x, layer, &model.kernels)?;
        (proj, emb, ds.y)
    } else {
        return Err(Failure::Usage("bounds needs --model with --data, or --features with --bases".into()));
    };
    let report = separability_report(&proj, &embeddings, &labels)?;
    print!("{}", report.to_text());
    if let Some(dir) = &args.output {
        ensure_dir(dir)?;
        write_file(&dir.join("bounds.txt"), report.to_text())?;
        write_file(&dir.join("bounds.csv"), report.to_csv())?;
    }
    Ok(())
}

fn cmd_embed(args: &EmbedArgs) -> CmdResult {
    let model = open_model(&args.model)?;
    let through = args.through.unwrap_or(model.n_layers());
    let ds = load(&args.data, args.format)?;
    let mut out: Box<dyn Write> = match &args.output {
        Some(p) => Box::new(BufWriter::new(fs::File::create(p).map_err(runtime(p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    const CHUNK: usize = 1024;
    let io_err = runtime("writing embeddings");
    let mut start = 0;
    while start < ds.len() {
        let rows: Vec<usize> = (start..(start + CHUNK).min(ds.len())).collect();
        let part = ds.subset(&rows);
        let emb = model.embed(&part.x, through)?;
        let mut text = String::new();
        for (i, row) in emb.row_iter().enumerate() {
            text.push_str(&part.label_names[part.y[i]].to_string());
            for v in row.iter() {
                text.push(',');
                text.push_str(&v.to_string());
            }
            text.push('\n');
        }
        if let Err(e) = out.write_all(text.as_bytes()) {
            return Err(io_err(e));
        }
        start += CHUNK;
    }
    out.flush().map_err(runtime("writing embeddings"))?;
    Ok(())
}

/// Binary P6 image: one `CELL x CELL` gray block per weight, brighter = larger.
fn ppm(nu: &DMatrix<f64>) -> Vec<u8> {
    let (rows, cols) = nu.shape();
    let (w, h) = (cols * CELL, rows * CELL);
    let mut img = format!("P6\n{w} {h}\n255\n").into_bytes();
    for y in 0..h {
        for x in 0..w {
            let v = (nu[(y / CELL, x / CELL)].clamp(0.0, 1.0) * 255.0).round() as u8;
            img.extend_from_slice(&[v, v, v]);
        }
    }
    img
}

fn cmd_heatmap(args: &HeatmapArgs) -> CmdResult {
    let model = open_model(&args.model)?;
    ensure_dir(&args.output)?;
    for layer in &model.layers {
        let base = args.output.join(format!("nu_layer{}", layer.index));
        write_file(&base.with_extension("csv"), layer.nu.to_csv(&model.kernels))?;
        write_file(&base.with_extension("ppm"), ppm(layer.nu.as_matrix()))?;
    }
    println!("{} layer(s) written to {}", model.n_layers(), args.output.display());
    Ok(())
}

fn cmd_sweep(args: &SweepArgs) -> CmdResult {
    let cfg = args.config.resolve()?;
    let axis = SweepAxis::parse(&args.grid).map_err(|e| Failure::Usage(e.to_string()))?;
    let ds = config_data(&cfg)?;
    let kernels = cfg.kernel_set()?;
    let rows = run_sweep(&ds, &kernels, &cfg.hierarchy_hyper(), &axis, args.test_fraction, cfg.seed, cfg.standardize)?;
    let csv = sweep_csv(&axis, &rows);
    match &cfg.output {
        Some(dir) => {
            ensure_dir(dir)?;
            write_file(&dir.join("sweep.csv"), csv)?;
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn bases_csv(bases: &[DMatrix<f64>]) -> String {
    let mut out = String::new();
    for (c, u) in bases.iter().enumerate() {
        for col in u.column_iter() {
            out.push_str(&c.to_string());
            for v in col.iter() {
                out.push(',');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
    }
    out
}

fn cmd_synth(args: &SynthArgs) -> CmdResult {
    let params = SubspaceParams {
        n_classes: args.classes,
        rank: args.rank,
        ambient_dim: args.dim,
        sigma_e_sq: args.sigma_e_sq,
        overlap_lambda: args.lambda,
        n_per_class: args.n_per_class,
        seed: args.seed,
    };
    let (ds, bases) = match args.kind {
        SynthKind::Subspace => {
            let s = synth_subspace(&params)?;
            (s.data, Some(s.bases))
        }
        SynthKind::ClassSpecific => {
            let s = synth_class_specific(&params)?;
            (s.data, Some(s.bases))
        }
        SynthKind::Moons => (moons(args.n_per_class, args.noise, args.seed), None),
        SynthKind::Blobs => {
            let centers: Vec<Vec<f64>> = (0..args.classes)
                .map(|c| {
                    let a = std::f64::consts::TAU * c as f64 / args.classes as f64;
                    vec![3.0 * a.cos(), 3.0 * a.sin()]
                })
                .collect();
            (gaussian_blobs(&centers, args.noise, args.n_per_class, args.seed)?, None)
        }
    };
    let file = fs::File::create(&args.output).map_err(runtime(args.output.display()))?;
    write_csv(&ds, BufWriter::new(file)).map_err(runtime(args.output.display()))?;
    match (&args.bases_output, bases) {
        (Some(path), Some(b)) => write_file(path, bases_csv(&b))?,
        (Some(_), None) => return Err(Failure::Usage("--bases-output applies to subspace kinds only".into())),
        _ => {}
    }
    Ok(())
}

fn configure_threads() -> CmdResult {
    let Ok(value) = std::env::var("CLASK_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Failure::Usage(format!("CLASK_THREADS must be a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(runtime("thread pool"))
}

fn run(cli: Cli) -> CmdResult {
    configure_threads()?;
    match &cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Bounds(a) => cmd_bounds(a),
        Command::Embed(a) => cmd_embed(a),
        Command::Heatmap(a) => cmd_heatmap(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Synth(a) => cmd_synth(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
