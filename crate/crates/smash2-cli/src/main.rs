//! `smash2` command line: sample PFSA models, measure entropy / divergence /
//! log-likelihood, infer models from data, quantize CSV series, and build
//! distance matrices with optional heatmaps.
//!
//! Exit codes: 0 success, 2 usage or parse problems, 3 data problems.

mod io;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

use smash2::genesess::{infer, InferError, InferParams};
use smash2::measures::{entropy_rate, kl_divergence, log_likelihood, MeasureError};
use smash2::metric::{
    default_base_set, distance_matrix, BaseSet, CoordNorm, DistMatrix, MetricError,
};
use smash2::pfsa::{Pfsa, PfsaError, Start, SymbolSeq};
use smash2::quantize::{
    apply_scheme, class_separation, parse_scheme, scheme_search, LabeledDataset, QuantError,
    SearchGrid,
};

#[derive(Debug)]
pub enum AppError {
    Usage(String),
    Data(String),
}

impl AppError {
    fn exit_code(&self) -> u8 {
        match self {
            AppError::Usage(_) => 2,
            AppError::Data(_) => 3,
        }
    }
}

impl fmt::Display for AppError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AppError::Usage(m) | AppError::Data(m) => write!(f, "{m}"),
        }
    }
}

impl From<PfsaError> for AppError {
    fn from(e: PfsaError) -> Self {
        AppError::Usage(e.to_string())
    }
}

impl From<MeasureError> for AppError {
    fn from(e: MeasureError) -> Self {
        match e {
            MeasureError::AlphabetMismatch(..) | MeasureError::SymbolOutOfRange { .. } => {
                AppError::Usage(e.to_string())
            }
            _ => AppError::Data(e.to_string()),
        }
    }
}

impl From<InferError> for AppError {
    fn from(e: InferError) -> Self {
        match e {
            InferError::BadParams(_) | InferError::SymbolOutOfRange { .. } => {
                AppError::Usage(e.to_string())
            }
            _ => AppError::Data(e.to_string()),
        }
    }
}

impl From<QuantError> for AppError {
    fn from(e: QuantError) -> Self {
        match e {
            QuantError::Parse(_) | QuantError::BadCutoffs(_) | QuantError::BadLabels => {
                AppError::Usage(e.to_string())
            }
            QuantError::Metric(m) => m.into(),
            _ => AppError::Data(e.to_string()),
        }
    }
}

impl From<MetricError> for AppError {
    fn from(e: MetricError) -> Self {
        match e {
            MetricError::EmptySequence => AppError::Data(e.to_string()),
            MetricError::Measure(m) => m.into(),
            _ => AppError::Usage(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "smash2",
    version,
    about = "PFSA sequence-likelihood toolkit: sampling, inference, information measures, quantization, and sequence distance matrices"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample symbol sequences from a model file
    Gen(GenArgs),
    /// Print entropy rate, KL divergence, or log-likelihood
    #[command(subcommand)]
    Measure(MeasureCmd),
    /// Infer a model from a symbol-sequence file
    Infer(InferArgs),
    /// Quantize CSV series into symbols, or search quantization schemes
    Quantize(QuantizeArgs),
    /// Pairwise distance matrix over symbol sequences
    Dist(DistArgs),
}

#[derive(Clone, Copy, Debug)]
struct StartArg(Start);

impl FromStr for StartArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("stationary") {
            Ok(StartArg(Start::Stationary))
        } else {
            s.parse::<usize>()
                .map(|i| StartArg(Start::State(i)))
                .map_err(|_| format!("expected \"stationary\" or a state index, got {s:?}"))
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum NormArg {
    L1,
    L2,
    Linf,
}

impl From<NormArg> for CoordNorm {
    fn from(n: NormArg) -> Self {
        match n {
            NormArg::L1 => CoordNorm::L1,
            NormArg::L2 => CoordNorm::L2,
            NormArg::Linf => CoordNorm::Linf,
        }
    }
}

#[derive(Args)]
struct GenArgs {
    /// Model JSON file
    model: PathBuf,
    /// Symbols per sequence
    #[arg(long)]
    length: usize,
    /// Number of sequences; sequence i uses seed + i
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// "stationary" or a fixed start-state index
    #[arg(long, default_value = "stationary")]
    start: StartArg,
    /// Output file (stdout when absent)
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum MeasureCmd {
    /// Entropy rate of a model, bits per symbol
    Entropy { model: PathBuf },
    /// KL divergence of the second model from the first, bits per symbol
    Kldiv { model_a: PathBuf, model_b: PathBuf },
    /// Log-likelihood of each sequence in a file under a model
    Loglik { model: PathBuf, seq_file: PathBuf },
}

#[derive(Args)]
struct InferArgs {
    /// Symbol-sequence file; all lines are concatenated into one sample
    seq_file: PathBuf,
    /// Matching radius for state discovery
    #[arg(long, default_value_t = 0.05)]
    epsilon: f64,
    /// Minimum occurrences before a context may spawn a state
    #[arg(long, default_value_t = 5)]
    min_count: usize,
    #[arg(long, default_value_t = 64)]
    max_states: usize,
    #[arg(long, default_value_t = 0.5)]
    smoothing_alpha: f64,
    /// Alphabet size (largest observed symbol + 1 when absent)
    #[arg(long)]
    alphabet: Option<usize>,
    /// Where to write the inferred model JSON
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct QuantizeArgs {
    /// CSV file, one real-valued series per row (ragged rows allowed)
    csv: PathBuf,
    /// Apply one scheme, e.g. "D1N1[3.]"
    #[arg(long, conflicts_with = "search")]
    scheme: Option<String>,
    /// Search a scheme grid instead of applying one scheme
    #[arg(long, requires = "labels")]
    search: bool,
    /// Detrend depths for the search grid
    #[arg(long, value_delimiter = ',', default_value = "0,1")]
    detrend: Vec<usize>,
    /// Normalization choices for the search grid (0 and/or 1)
    #[arg(long, value_delimiter = ',', default_value = "0,1")]
    normalize: Vec<u8>,
    /// Alphabet sizes for the search grid
    #[arg(long, value_delimiter = ',', default_value = "2")]
    alphabet_sizes: Vec<usize>,
    /// Also score cut-offs shifted half a quantile step each way
    #[arg(long)]
    perturb: bool,
    /// Label file, one label per CSV row (required by --search)
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Base model JSON files for search scoring (built-in set when absent)
    #[arg(long, value_delimiter = ',')]
    bases: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = NormArg::L1)]
    coord_norm: NormArg,
    /// Symbol-file output (for --search: symbols under the best scheme)
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct DistArgs {
    /// Symbol-sequence files; their lines are concatenated in order
    seq_files: Vec<PathBuf>,
    /// Quantize this CSV instead of reading symbol files
    #[arg(long, requires = "scheme", conflicts_with = "seq_files")]
    csv: Option<PathBuf>,
    /// Scheme for --csv
    #[arg(long)]
    scheme: Option<String>,
    /// Base model JSON files (built-in set when absent)
    #[arg(long, value_delimiter = ',')]
    bases: Vec<PathBuf>,
    /// Label file; when present the class-separation scores are printed
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = NormArg::L1)]
    coord_norm: NormArg,
    /// Matrix CSV output
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// ASCII PGM heatmap output
    #[arg(long)]
    heatmap: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(command: Command) -> Result<(), AppError> {
    match command {
        Command::Gen(args) => cmd_gen(args),
        Command::Measure(cmd) => cmd_measure(cmd),
        Command::Infer(args) => cmd_infer(args),
        Command::Quantize(args) => cmd_quantize(args),
        Command::Dist(args) => cmd_dist(args),
    }
}

fn load_model(path: &Path) -> Result<Pfsa, AppError> {
    Pfsa::load(path).map_err(|e| AppError::Usage(format!("{}: {e}", path.display())))
}

fn cmd_gen(args: GenArgs) -> Result<(), AppError> {
    let model = load_model(&args.model)?;
    if model.alphabet_size() > io::MAX_CLI_ALPHABET {
        return Err(AppError::Usage(format!(
            "model alphabet {} exceeds the digit file format's limit of {}",
            model.alphabet_size(),
            io::MAX_CLI_ALPHABET
        )));
    }
    let mut seqs = Vec::with_capacity(args.count);
    for i in 0..args.count {
        let seq = model.sample(args.length, args.seed + i as u64, args.start.0)?;
        seqs.push(seq);
    }
    io::write_output(args.output.as_deref(), &io::format_sequences(&seqs)?)
}

fn cmd_measure(cmd: MeasureCmd) -> Result<(), AppError> {
    match cmd {
        MeasureCmd::Entropy { model } => {
            let m = load_model(&model)?;
            println!("{:.6}", entropy_rate(&m)?);
        }
        MeasureCmd::Kldiv { model_a, model_b } => {
            let a = load_model(&model_a)?;
            let b = load_model(&model_b)?;
            let d = kl_divergence(&a, &b)?;
            if d.smoothed_pairs > 0 {
                eprintln!(
                    "note: {} state pairs needed probability flooring; the exact divergence is infinite",
                    d.smoothed_pairs
                );
            }
            println!("{:.6}", d.bits);
        }
        MeasureCmd::Loglik { model, seq_file } => {
            let m = load_model(&model)?;
            let seqs = io::read_sequences(&seq_file)?;
            for seq in &seqs {
                let l = log_likelihood(seq, &m)?;
                if l.clamp_events > 0 {
                    eprintln!(
                        "note: {} filter resets (model forbids observed symbols)",
                        l.clamp_events
                    );
                }
                println!("{:.6}", l.bits);
            }
        }
    }
    Ok(())
}

fn cmd_infer(args: InferArgs) -> Result<(), AppError> {
    let seqs = io::read_sequences(&args.seq_file)?;
    if seqs.len() > 1 {
        eprintln!(
            "note: {} sequences concatenated into one sample; contexts spanning line \
             boundaries are artifacts",
            seqs.len()
        );
    }
    let symbols: Vec<usize> = seqs.iter().flat_map(|s| s.iter().copied()).collect();
    let x = SymbolSeq::new(symbols);
    let alphabet = match args.alphabet {
        Some(k) => k,
        None => x.max_symbol().map_or(2, |m| (m + 1).max(2)),
    };
    let params = InferParams {
        epsilon: args.epsilon,
        min_count: args.min_count,
        max_states: args.max_states,
        smoothing_alpha: args.smoothing_alpha,
    };
    let out = infer(&x, alphabet, &params)?;
    out.machine
        .save(&args.output)
        .map_err(|e| AppError::Usage(format!("{}: {e}", args.output.display())))?;
    let r = &out.report;
    println!("states = {}", r.state_count);
    println!("sync context length = {}", r.sync_sequence.len());
    println!("low-support edges = {}", r.low_support_edges);
    println!("zero-support edges = {}", r.zero_support_edges);
    println!("max match distance = {:.4}", r.max_match_distance);
    if r.max_states_hit {
        println!("note: state cap reached; structure was truncated");
    }
    Ok(())
}

fn load_bases(paths: &[PathBuf]) -> Result<BaseSet, AppError> {
    if paths.is_empty() {
        return Ok(default_base_set());
    }
    let machines = paths
        .iter()
        .map(|p| load_model(p))
        .collect::<Result<Vec<_>, _>>()?;
    BaseSet::new(machines).map_err(AppError::from)
}

fn cmd_quantize(args: QuantizeArgs) -> Result<(), AppError> {
    let rows = io::read_csv(&args.csv)?;
    if args.search {
        let labels_path = args.labels.as_ref().expect("clap enforces --labels");
        let labels = io::read_labels(labels_path, rows.len())?;
        let data = LabeledDataset::labeled(rows, labels)?;
        let grid = SearchGrid {
            detrend: args.detrend.clone(),
            normalize: args.normalize.iter().map(|&v| v != 0).collect(),
            alphabet_sizes: args.alphabet_sizes.clone(),
            perturb: args.perturb,
        };
        let base = load_bases(&args.bases)?;
        let outcome = scheme_search(&data, &grid, &base, args.coord_norm.into())?;
        for fail in &outcome.failed {
            eprintln!(
                "skipped D{}N{} k={}: {}",
                fail.detrend,
                if fail.normalize { 1 } else { 0 },
                fail.alphabet_size,
                fail.error
            );
        }
        for score in &outcome.ranked {
            println!("{}\t{:.6}", score.scheme, score.separation.ratio);
            if score.skipped_series > 0 {
                eprintln!(
                    "note: {} skipped {} series",
                    score.scheme, score.skipped_series
                );
            }
        }
        if let Some(out) = &args.output {
            let best = &outcome.ranked[0].scheme;
            let seqs: Vec<SymbolSeq> = data
                .series
                .iter()
                .filter_map(|row| apply_scheme(row, best).ok())
                .collect();
            io::write_output(Some(out), &io::format_sequences(&seqs)?)?;
        }
        Ok(())
    } else {
        let scheme_text = args
            .scheme
            .as_ref()
            .ok_or_else(|| AppError::Usage("either --scheme or --search is required".into()))?;
        let scheme = parse_scheme(scheme_text)?;
        let mut seqs = Vec::new();
        let mut skipped = 0usize;
        for (i, row) in rows.iter().enumerate() {
            match apply_scheme(row, &scheme) {
                Ok(seq) => seqs.push(seq),
                Err(e) => {
                    eprintln!("warning: row {} skipped: {e}", i + 1);
                    skipped += 1;
                }
            }
        }
        if seqs.is_empty() {
            return Err(AppError::Data(format!("all {skipped} rows were skipped")));
        }
        io::write_output(args.output.as_deref(), &io::format_sequences(&seqs)?)
    }
}

fn cmd_dist(args: DistArgs) -> Result<(), AppError> {
    let seqs: Vec<SymbolSeq> = if let Some(csv) = &args.csv {
        let scheme = parse_scheme(args.scheme.as_ref().expect("clap enforces --scheme"))?;
        let rows = io::read_csv(csv)?;
        rows.iter()
            .map(|row| apply_scheme(row, &scheme).map_err(AppError::from))
            .collect::<Result<Vec<_>, _>>()?
    } else {
        let mut all = Vec::new();
        for path in &args.seq_files {
            all.extend(io::read_sequences(path)?);
        }
        all
    };
    if seqs.is_empty() {
        return Err(AppError::Data(
            "empty dataset: no sequences to compare".into(),
        ));
    }
    let base = load_bases(&args.bases)?;
    let dm: DistMatrix = distance_matrix(&seqs, &base, args.coord_norm.into())?;

    if let Some(out) = &args.output {
        io::write_output(Some(out), &io::format_matrix_csv(&dm))?;
    }
    if let Some(out) = &args.heatmap {
        io::write_output(Some(out), &io::format_pgm(&dm))?;
    }
    if let Some(labels_path) = &args.labels {
        let labels = io::read_labels(labels_path, seqs.len())?;
        let sep = class_separation(&dm, &labels)?;
        println!("s = {:.6}", sep.same_class_avg);
        println!("d = {:.6}", sep.cross_class_avg);
        println!("r = {:.6}", sep.ratio);
    } else if args.output.is_none() && args.heatmap.is_none() {
        io::write_output(None, &io::format_matrix_csv(&dm))?;
    }
    Ok(())
}
