//! Command-line front end. `dispatch` parses argv, runs one subcommand and
//! maps the outcome to an exit code: 0 success, 1 bad input, 2 internal
//! invariant failure.

use std::ffi::OsString;
use std::io::{BufRead, IsTerminal, Write};
use std::path::{Path, PathBuf};

use clap::{Args, ColorChoice, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::clustering::{self, BoundaryQuery, Clustering, ScriptedResponder, ThresholdStrategy};
use crate::confmat::{self, ConfusionMatrix};
use crate::datagen::{self, netpbm, Boundary, CropParams, ImageRaster};
use crate::error::{bail, Error, Result};
use crate::netarch::parse_arch_with;
use crate::netcalc::{cost_report, CostOptions, Optimizer, DEFAULT_ACT_COST};
use crate::ordering::{self, AcceptRule, OrdererConfig, Permutation};
use crate::predops::{self, activation, FilterTensor, PredictionSet, SnapshotSeries};
use crate::render::{self, HeatmapOptions};
use crate::tensor::{parse_tensors, write_tensors, Tensor};

#[derive(Debug, Parser)]
#[command(
    name = "convlens",
    version,
    about = "Confusion-matrix analysis and CNN cost accounting"
)]
struct Cli {
    /// Output file; stdout when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Accuracy, sensitivities and confusability of a confusion matrix.
    Metrics(MetricsArgs),
    /// Order classes by simulated annealing.
    Order(OrderArgs),
    /// Exhaustive ordering for K ≤ 10.
    OrderExact(MatrixArg),
    /// Split an ordered matrix into clusters of neighbouring classes.
    Cluster(ClusterArgs),
    /// Score a clustering against ground-truth coarse classes.
    ClusterScore(ClusterScoreArgs),
    /// SVG heatmap of a (reordered) confusion matrix.
    Render(RenderArgs),
    /// Count the block matrices needed to display a large matrix.
    Tile(TileArgs),
    /// Network cost accounting.
    Netcalc {
        #[command(subcommand)]
        command: NetcalcCommand,
    },
    /// Evaluate an activation function.
    Act(ActArgs),
    /// k-translation correlation of filters.
    Filtercorr(FiltercorrArgs),
    /// Average several prediction CSVs.
    Ensemble(EnsembleArgs),
    /// Blend one-hot targets with ensemble predictions.
    Smooth(SmoothArgs),
    /// Cross-entropy loss with weight penalties.
    Loss(LossArgs),
    /// Weight-update statistics between snapshots.
    Updates(UpdatesArgs),
    /// Linear filtering of an image.
    Filter2d(Filter2dArgs),
    /// Classification crops from a segmentation pair.
    Crops(CropsArgs),
}

#[derive(Debug, Args)]
struct MatrixArg {
    /// Confusion matrix (CSV or JSON).
    #[arg(long = "in", value_name = "PATH")]
    input: PathBuf,
}

#[derive(Debug, Args)]
struct MetricsArgs {
    /// Confusion matrix (CSV or JSON).
    #[arg(
        long = "in",
        value_name = "PATH",
        required_unless_present = "predictions"
    )]
    input: Option<PathBuf>,
    /// Prediction CSV to tally instead of a matrix.
    #[arg(long, requires = "truth", conflicts_with = "input")]
    predictions: Option<PathBuf>,
    /// True class index per prediction row, one per line.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Comma-separated class names for --predictions.
    #[arg(long)]
    names: Option<String>,
    /// Also write the tallied matrix as CSV.
    #[arg(long, value_name = "PATH")]
    matrix_out: Option<PathBuf>,
    #[arg(long, default_value_t = confmat::DEFAULT_SKEW_EPSILON)]
    epsilon: f64,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AcceptArg {
    Best,
    Current,
}

#[derive(Debug, Args)]
struct OrderArgs {
    #[command(flatten)]
    matrix: MatrixArg,
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    t0: Option<f64>,
    #[arg(long)]
    cooling: Option<f64>,
    #[arg(long)]
    restarts: Option<u32>,
    #[arg(long, value_enum, default_value = "best")]
    accept: AcceptArg,
    /// Record the best objective every N steps.
    #[arg(long, value_name = "N")]
    trace_every: Option<u64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ClusterMethod {
    Fixed,
    Percentile,
    Interactive,
}

#[derive(Debug, Args)]
struct ClusterArgs {
    #[command(flatten)]
    matrix: MatrixArg,
    /// Ordering result or bare index array; identity when omitted.
    #[arg(long, value_name = "PATH")]
    order: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "percentile")]
    method: ClusterMethod,
    #[arg(long)]
    theta: Option<u64>,
    /// Share of boundaries kept as cuts (percentile method).
    #[arg(long, default_value_t = 0.5)]
    fraction: f64,
    /// Scripted y/n answers for the interactive method.
    #[arg(long)]
    answers: Option<String>,
    /// Write the clusters as an array of class-name arrays.
    #[arg(long, value_name = "PATH")]
    clusters_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ClusterScoreArgs {
    #[arg(long, value_name = "PATH")]
    candidate: PathBuf,
    #[arg(long, value_name = "PATH")]
    coarse: PathBuf,
}

#[derive(Debug, Args)]
struct RenderArgs {
    #[command(flatten)]
    matrix: MatrixArg,
    #[arg(long, value_name = "PATH")]
    order: Option<PathBuf>,
    #[arg(long)]
    zero_diagonal: bool,
    #[arg(long)]
    row_normalize: bool,
    /// Map log(1 + v) instead of v.
    #[arg(long)]
    log: bool,
    #[arg(long, default_value_t = 12.0)]
    cell_px: f64,
    #[arg(long)]
    labels: bool,
}

#[derive(Debug, Args)]
struct TileArgs {
    #[command(flatten)]
    matrix: MatrixArg,
    #[arg(long, value_name = "PATH")]
    order: Option<PathBuf>,
    #[arg(long, default_value_t = 50)]
    max_block: usize,
    /// Off-diagonal blocks need a matrix when their mass exceeds this.
    #[arg(long, default_value_t = 0)]
    threshold: u64,
}

#[derive(Debug, Subcommand)]
enum NetcalcCommand {
    /// Per-layer parameters, FLOPs and memory footprint.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum OptimizerArg {
    Sgd,
    Adam,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Architecture file.
    arch: PathBuf,
    /// Value substituted for a symbolic `K`.
    #[arg(long)]
    classes: Option<u64>,
    #[arg(long, default_value_t = 1)]
    batch: u64,
    #[arg(long, value_enum, default_value = "sgd")]
    optimizer: OptimizerArg,
    #[arg(long, default_value_t = 4)]
    bytes: u64,
    #[arg(long, default_value_t = DEFAULT_ACT_COST)]
    act_cost: u64,
    /// Also write the structured report.
    #[arg(long, value_name = "PATH")]
    json: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ActArgs {
    /// Activation, optionally with a parameter: `elu(0.5)`. Also `softmax`, `maxout`.
    #[arg(long)]
    name: String,
    /// Input values, repeatable or comma-separated.
    #[arg(
        long,
        required = true,
        value_delimiter = ',',
        allow_hyphen_values = true
    )]
    x: Vec<f64>,
}

#[derive(Debug, Args)]
struct FiltercorrArgs {
    /// Tensor file.
    #[arg(long = "in", value_name = "PATH")]
    input: PathBuf,
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Name of the first filter; with --b computes a single pair.
    #[arg(long, requires = "b")]
    a: Option<String>,
    #[arg(long, requires = "a")]
    b: Option<String>,
}

#[derive(Debug, Args)]
struct EnsembleArgs {
    /// Prediction CSVs, one per member.
    #[arg(long = "in", value_name = "PATH", required = true)]
    inputs: Vec<PathBuf>,
}

#[derive(Debug, Args)]
struct SmoothArgs {
    #[arg(long, value_name = "PATH")]
    targets: PathBuf,
    #[arg(long, value_name = "PATH")]
    ensemble: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
}

#[derive(Debug, Args)]
struct LossArgs {
    #[arg(long, value_name = "PATH")]
    outputs: PathBuf,
    #[arg(long, value_name = "PATH")]
    targets: PathBuf,
    /// Tensor file whose values are all penalized.
    #[arg(long, value_name = "PATH")]
    weights: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0)]
    l1: f64,
    #[arg(long, default_value_t = 0.0)]
    l2: f64,
    #[arg(long, default_value_t = confmat::DEFAULT_CLAMP_EPS)]
    clamp_eps: f64,
}

#[derive(Debug, Args)]
struct UpdatesArgs {
    /// Snapshot tensor files in epoch order.
    #[arg(long = "in", value_name = "PATH", required = true)]
    inputs: Vec<PathBuf>,
}

#[derive(Debug, Args)]
struct Filter2dArgs {
    /// PGM/PPM or tensor file.
    #[arg(long, value_name = "PATH")]
    image: PathBuf,
    /// Tensor file holding a [w, h] or [w, h, d] kernel.
    #[arg(long, value_name = "PATH")]
    kernel: PathBuf,
    /// Which tensor in the kernel file; the first when omitted.
    #[arg(long)]
    kernel_name: Option<String>,
    #[arg(long, default_value = "zero")]
    boundary: Boundary,
}

#[derive(Debug, Args)]
struct CropsArgs {
    #[arg(long, value_name = "PATH")]
    image: PathBuf,
    /// Grayscale label map.
    #[arg(long, value_name = "PATH")]
    labels: PathBuf,
    #[arg(long)]
    width: usize,
    #[arg(long)]
    height: usize,
    #[arg(long)]
    count: usize,
    #[arg(long, default_value_t = 0.5)]
    majority: f64,
    /// Write accepted crops here as netpbm files.
    #[arg(long, value_name = "DIR")]
    dir: Option<PathBuf>,
}

fn styled() -> bool {
    std::env::var_os("CONVLENS_NO_COLOR").is_none() && std::io::stderr().is_terminal()
}

/// Runs the tool on `args` (including the program name) and returns the
/// process exit code.
pub fn dispatch<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let color = if std::env::var_os("CONVLENS_NO_COLOR").is_some() {
        ColorChoice::Never
    } else {
        ColorChoice::Auto
    };
    let matches = <Cli as clap::CommandFactory>::command()
        .color(color)
        .try_get_matches_from(args);
    let cli = match matches.and_then(|m| <Cli as clap::FromArgMatches>::from_arg_matches(&m)) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            let tag = if styled() {
                "\x1b[1;31merror\x1b[0m"
            } else {
                "error"
            };
            eprintln!("{tag}: {e}");
            if matches!(e, Error::Invariant(_)) {
                2
            } else {
                1
            }
        }
    }
}

fn read_bytes(p: &Path) -> Result<Vec<u8>> {
    std::fs::read(p).map_err(|e| Error::io(p.display().to_string(), e))
}

fn read_text(p: &Path) -> Result<String> {
    std::fs::read_to_string(p).map_err(|e| Error::io(p.display().to_string(), e))
}

fn write_file(p: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(p, bytes).map_err(|e| Error::io(p.display().to_string(), e))
}

fn with_path<T>(r: Result<T>, p: &Path) -> Result<T> {
    r.map_err(|e| e.with_path(&p.display().to_string()))
}

fn emit(out: &Option<PathBuf>, bytes: &[u8]) -> Result<()> {
    match out {
        Some(p) => write_file(p, bytes),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(bytes)
                .and_then(|()| stdout.flush())
                .map_err(|e| Error::io("<stdout>", e))
        }
    }
}

fn json<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut s = serde_json::to_vec_pretty(v)?;
    s.push(b'\n');
    Ok(s)
}

fn load_matrix(p: &Path) -> Result<ConfusionMatrix> {
    with_path(ConfusionMatrix::parse(&read_text(p)?), p)
}

/// Accepts an ordering result object or a bare array of 0-based indices.
fn load_order(p: Option<&PathBuf>, k: usize) -> Result<Permutation> {
    let Some(p) = p else {
        return Ok(Permutation::identity(k));
    };
    let value: serde_json::Value = serde_json::from_str(&read_text(p)?)?;
    let order = match value {
        serde_json::Value::Object(mut m) => m
            .remove("order")
            .ok_or_else(|| Error::invalid(format!("{}: no `order` field", p.display())))?,
        v => v,
    };
    let perm: Permutation = serde_json::from_value(order)?;
    if perm.len() != k {
        bail!(
            "{}: order has {} entries for {k} classes",
            p.display(),
            perm.len()
        );
    }
    Ok(perm)
}

fn load_predictions(p: &Path) -> Result<Vec<Vec<f64>>> {
    with_path(predops::parse_real_csv(&read_text(p)?), p)
}

fn load_prediction_set(p: &Path) -> Result<PredictionSet> {
    PredictionSet::new(load_predictions(p)?).map_err(|e| match e {
        Error::Invalid(m) => Error::Invalid(format!("{}: {m}", p.display())),
        e => e,
    })
}

fn load_tensors(p: &Path) -> Result<Vec<Tensor>> {
    with_path(parse_tensors(&read_text(p)?), p)
}

fn load_image(p: &Path) -> Result<ImageRaster> {
    let bytes = read_bytes(p)?;
    if bytes.first() == Some(&b'P') {
        netpbm::read_image(&bytes)
    } else {
        let text = String::from_utf8(bytes)
            .map_err(|_| Error::invalid(format!("{}: not a netpbm or tensor file", p.display())))?;
        let ts = with_path(parse_tensors(&text), p)?;
        match ts.as_slice() {
            [t] => ImageRaster::from_tensor(t),
            _ => bail!(
                "{}: expected exactly one image tensor, found {}",
                p.display(),
                ts.len()
            ),
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    let out = &cli.out;
    match &cli.command {
        Command::Metrics(a) => metrics(a, out),
        Command::Order(a) => {
            let c = load_matrix(&a.matrix.input)?;
            if let Some(t) = a.t0 {
                if !(t.is_finite() && t > 0.0) {
                    bail!("--t0 must be positive");
                }
            }
            let cfg = OrdererConfig {
                steps: a.steps,
                t0: a.t0,
                cooling: a.cooling,
                restarts: a.restarts,
                seed: cli.seed,
                accept: match a.accept {
                    AcceptArg::Best => AcceptRule::Best,
                    AcceptArg::Current => AcceptRule::Current,
                },
                trace_every: a.trace_every,
            };
            let result = ordering::registry().build("anneal", &cfg)?.order(&c)?;
            emit(out, &json(&result)?)
        }
        Command::OrderExact(a) => {
            let c = load_matrix(&a.input)?;
            let cfg = OrdererConfig {
                seed: cli.seed,
                ..Default::default()
            };
            let result = ordering::registry().build("exact", &cfg)?.order(&c)?;
            emit(out, &json(&result)?)
        }
        Command::Cluster(a) => cluster(a, out),
        Command::ClusterScore(a) => {
            let load =
                |p: &PathBuf| -> Result<Clustering> { Ok(serde_json::from_str(&read_text(p)?)?) };
            let score = clustering::cluster_error(&load(&a.candidate)?, &load(&a.coarse)?)?;
            emit(out, &json(&score)?)
        }
        Command::Render(a) => {
            let c = load_matrix(&a.matrix.input)?;
            let order = load_order(a.order.as_ref(), c.k())?;
            let opts = HeatmapOptions {
                zero_diagonal: a.zero_diagonal,
                row_normalize: a.row_normalize,
                log_scale: a.log,
                cell_px: a.cell_px,
                show_labels: a.labels,
            };
            let h = render::heatmap(&c, &order, &opts)?;
            if h.blank {
                eprintln!("warning: every displayed value is zero; the heatmap is blank");
            }
            emit(out, h.svg.as_bytes())
        }
        Command::Tile(a) => {
            let c = load_matrix(&a.matrix.input)?;
            let order = load_order(a.order.as_ref(), c.k())?;
            emit(
                out,
                &json(&render::tile_blocks(&c, &order, a.max_block, a.threshold)?)?,
            )
        }
        Command::Netcalc {
            command: NetcalcCommand::Report(a),
        } => {
            if a.bytes == 0 || a.batch == 0 {
                bail!("--bytes and --batch must be positive");
            }
            let arch = with_path(parse_arch_with(&read_text(&a.arch)?, a.classes), &a.arch)?;
            let optimizer = match a.optimizer {
                OptimizerArg::Sgd => Optimizer::Sgd,
                OptimizerArg::Adam => Optimizer::Adam,
            };
            let report = cost_report(
                &arch,
                CostOptions {
                    act_cost: a.act_cost,
                    batch: a.batch,
                    bytes_per_value: a.bytes,
                    optimizer_factor: optimizer.factor(),
                },
            )?;
            let table = report.to_table();
            if let Some(p) = &a.json {
                write_file(p, &json(&report)?)?;
            }
            emit(out, table.as_bytes())
        }
        Command::Act(a) => act(a, out),
        Command::Filtercorr(a) => filtercorr(a, out),
        Command::Ensemble(a) => {
            let members = a
                .inputs
                .iter()
                .map(|p| load_prediction_set(p))
                .collect::<Result<Vec<_>>>()?;
            emit(
                out,
                predops::ensemble_average(&members)?.to_csv().as_bytes(),
            )
        }
        Command::Smooth(a) => {
            let t = load_prediction_set(&a.targets)?;
            let y = load_prediction_set(&a.ensemble)?;
            emit(
                out,
                predops::smooth_labels(&t, &y, a.alpha)?.to_csv().as_bytes(),
            )
        }
        Command::Loss(a) => {
            let o = load_predictions(&a.outputs)?;
            let t = load_predictions(&a.targets)?;
            let w: Vec<f64> = match &a.weights {
                Some(p) => load_tensors(p)?
                    .into_iter()
                    .flat_map(|t| t.values)
                    .collect(),
                None => Vec::new(),
            };
            let loss = confmat::cross_entropy_loss(&o, &t, &w, a.l1, a.l2, a.clamp_eps)?;
            emit(out, &json(&serde_json::json!({ "loss": loss }))?)
        }
        Command::Updates(a) => {
            let epochs = a
                .inputs
                .iter()
                .map(|p| load_tensors(p))
                .collect::<Result<Vec<_>>>()?;
            let series = SnapshotSeries::from_tensors(epochs)?;
            emit(out, &json(&predops::weight_update_stats(&series))?)
        }
        Command::Filter2d(a) => {
            let image = load_image(&a.image)?;
            let ts = load_tensors(&a.kernel)?;
            let t = match &a.kernel_name {
                Some(n) => ts
                    .iter()
                    .find(|t| &t.name == n)
                    .ok_or_else(|| Error::Unknown {
                        kind: "tensor",
                        name: n.clone(),
                    })?,
                None => ts
                    .first()
                    .ok_or_else(|| Error::invalid("kernel file holds no tensors"))?,
            };
            let kernel = FilterTensor::from_tensor(t)?;
            let filtered = datagen::filter2d(&image, &kernel, a.boundary)?;
            emit(
                out,
                write_tensors(&[filtered.to_tensor("filtered")])?.as_bytes(),
            )
        }
        Command::Crops(a) => crops(a, cli.seed, out),
    }
}

fn metrics(a: &MetricsArgs, out: &Option<PathBuf>) -> Result<()> {
    if !(0.0..1.0).contains(&a.epsilon) {
        bail!("--epsilon must be in [0, 1)");
    }
    let c = match (&a.input, &a.predictions, &a.truth) {
        (Some(p), _, _) => load_matrix(p)?,
        (None, Some(pred), Some(truth)) => {
            let rows = load_predictions(pred)?;
            let truth = load_predictions(truth)?
                .into_iter()
                .flatten()
                .map(|v| {
                    if v >= 0.0 && v.fract() == 0.0 {
                        Ok(v as usize)
                    } else {
                        Err(Error::invalid(format!(
                            "true label {v} is not a class index"
                        )))
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            let k = rows.first().map_or(0, Vec::len);
            let names = match &a.names {
                Some(s) => s.split(',').map(|n| n.trim().to_string()).collect(),
                None => (0..k).map(|i| i.to_string()).collect(),
            };
            confmat::build_confusion(&rows, &truth, names)?
        }
        _ => bail!("pass --in, or --predictions with --truth"),
    };
    let report = confmat::metrics(&c, a.epsilon)?;
    if let Some(p) = &a.matrix_out {
        write_file(p, c.to_csv().as_bytes())?;
    }
    emit(out, &json(&report)?)
}

fn ask_terminal(q: &BoundaryQuery) -> Result<bool> {
    let stdin = std::io::stdin();
    loop {
        eprint!(
            "boundary {} ({} | {}), strength {}: same cluster? [y/n] ",
            q.position + 1,
            q.left,
            q.right,
            q.strength
        );
        let mut line = String::new();
        let n = stdin
            .lock()
            .read_line(&mut line)
            .map_err(|e| Error::io("<stdin>", e))?;
        if n == 0 {
            return Err(Error::Aborted(
                "input closed before the session finished".into(),
            ));
        }
        match line.trim() {
            "y" | "Y" | "yes" => return Ok(true),
            "n" | "N" | "no" => return Ok(false),
            _ => eprintln!("please answer y or n"),
        }
    }
}

fn cluster(a: &ClusterArgs, out: &Option<PathBuf>) -> Result<()> {
    let c = load_matrix(&a.matrix.input)?;
    let order = load_order(a.order.as_ref(), c.k())?;
    let mut scripted;
    let mut terminal = ask_terminal;
    let strategy = match a.method {
        ClusterMethod::Fixed => ThresholdStrategy::Fixed(
            a.theta
                .ok_or_else(|| Error::invalid("--method fixed needs --theta"))?,
        ),
        ClusterMethod::Percentile => ThresholdStrategy::Percentile(a.fraction),
        ClusterMethod::Interactive => match &a.answers {
            Some(s) => {
                scripted = ScriptedResponder::parse(s)?;
                ThresholdStrategy::Interactive(&mut scripted)
            }
            None => ThresholdStrategy::Interactive(&mut terminal),
        },
    };
    let plan = clustering::cluster(&c, &order, strategy)?;
    if let Some(p) = &a.clusters_out {
        write_file(p, &json(&plan.to_clustering(&c))?)?;
    }
    emit(out, &json(&plan)?)
}

#[derive(Serialize)]
struct VectorEvaluation {
    name: &'static str,
    x: Vec<f64>,
    value: Vec<f64>,
    derivative: Vec<f64>,
}

fn act(a: &ActArgs, out: &Option<PathBuf>) -> Result<()> {
    let bytes = match a.name.as_str() {
        "softmax" => json(&VectorEvaluation {
            name: "softmax",
            x: a.x.clone(),
            value: activation::softmax(&a.x),
            derivative: activation::softmax_derivative(&a.x),
        })?,
        "maxout" => {
            let (value, mask) = activation::maxout(&a.x)?;
            json(&VectorEvaluation {
                name: "maxout",
                x: a.x.clone(),
                value: vec![value],
                derivative: mask,
            })?
        }
        name => {
            let f = activation::registry().get(name)?;
            let evals: Vec<activation::Evaluation> =
                a.x.iter()
                    .map(|&x| activation::Evaluation {
                        x,
                        value: f.value(x),
                        derivative: f.derivative(x),
                    })
                    .collect();
            json(
                &serde_json::json!({ "name": f.name(), "properties": f.properties(), "points": evals }),
            )?
        }
    };
    emit(out, &bytes)
}

fn filtercorr(a: &FiltercorrArgs, out: &Option<PathBuf>) -> Result<()> {
    let ts = load_tensors(&a.input)?;
    let find = |n: &String| {
        ts.iter()
            .find(|t| &t.name == n)
            .ok_or_else(|| Error::Unknown {
                kind: "tensor",
                name: n.clone(),
            })
    };
    let bytes = if let (Some(na), Some(nb)) = (&a.a, &a.b) {
        let fa = FilterTensor::from_tensor(find(na)?)?;
        let fb = FilterTensor::from_tensor(find(nb)?)?;
        let rho = predops::k_translation_correlation(&fa, &fb, a.k)?;
        json(&serde_json::json!({ "a": na, "b": nb, "k": a.k, "rho": rho }))?
    } else {
        let mut layers = Vec::with_capacity(ts.len());
        for t in &ts {
            let filters = FilterTensor::layer_from_tensor(t)?;
            let rho = predops::avg_max_translation_correlation(&filters, a.k)?;
            layers.push(
                serde_json::json!({ "layer": t.name, "filters": filters.len(), "rho_bar": rho }),
            );
        }
        json(&serde_json::json!({ "k": a.k, "layers": layers }))?
    };
    emit(out, &bytes)
}

#[derive(Serialize)]
struct CropRecord {
    index: usize,
    x: usize,
    y: usize,
    accepted: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    class: Option<u32>,
}

fn crops(a: &CropsArgs, seed: u64, out: &Option<PathBuf>) -> Result<()> {
    let image = load_image(&a.image)?;
    let labels = netpbm::read_labels(&read_bytes(&a.labels)?)?;
    let params = CropParams {
        width: a.width,
        height: a.height,
        count: a.count,
        majority: a.majority,
        seed,
    };
    let draws = datagen::crop_dataset(&image, &labels, &params)?;
    if let Some(dir) = &a.dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;
        for (i, d) in draws.iter().enumerate().filter(|(_, d)| d.accepted()) {
            let ext = if d.image.channels() == 1 {
                "pgm"
            } else {
                "ppm"
            };
            if d.image.channels() == 1 || d.image.channels() == 3 {
                let maxval = d
                    .image
                    .values()
                    .iter()
                    .copied()
                    .fold(255.0, f64::max)
                    .min(65535.0) as u32;
                write_file(
                    &dir.join(format!("crop{i:05}.{ext}")),
                    &netpbm::write_image(&d.image, maxval)?,
                )?;
            } else {
                write_file(
                    &dir.join(format!("crop{i:05}.json")),
                    write_tensors(&[d.image.to_tensor("crop")])?.as_bytes(),
                )?;
            }
            write_file(
                &dir.join(format!("crop{i:05}_labels.pgm")),
                &netpbm::write_labels(&d.labels)?,
            )?;
        }
    }
    let records: Vec<CropRecord> = draws
        .iter()
        .enumerate()
        .map(|(index, d)| CropRecord {
            index,
            x: d.x,
            y: d.y,
            accepted: d.accepted(),
            class: d.majority,
        })
        .collect();
    emit(out, &json(&records)?)
}
