//! Command-line front end: pronunciation graphs, losses, oracle error rates,
//! greedy decoding and the synthetic training comparison.
//!
//! Exit codes: 0 on success, 2 on input errors, 3 when a loss is infinite
//! because no alignment of the given length fits the target graph.

mod posterior;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use gtc_core::{
    brute_force_loss, ctc_loss_reference, enumerate_collapsed, greedy_decode, gtc_loss,
    oracle_ler_report, parse_lexicon, parse_transcripts, run_experiment, ExperimentOutcome,
    LabelGraph, Lexicon, LossMode, NBest, SynthConfig, TargetSequence,
};

const EXIT_INPUT_ERROR: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "gtc",
    version,
    about = "Temporal classification losses over pronunciation graphs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build and inspect the pronunciation graph of a word sequence
    Graph(GraphArgs),
    /// Score a posterior file against the graph of a word sequence
    Loss(LossArgs),
    /// Oracle label error rates at several n-best depths
    OracleLer(OracleLerArgs),
    /// Greedy decoding: per-frame argmax, collapsed
    Decode(DecodeArgs),
    /// Synthetic training comparison of the 1-best and graph objectives
    TrainToy(TrainToyArgs),
}

#[derive(Args)]
struct GraphArgs {
    /// Lexicon file: `word<TAB>[score<TAB>]phonemes` lines
    lexicon: PathBuf,
    /// Whitespace-separated word sequence
    words: String,
    /// Pronunciation variants per word: a count or "all"
    #[arg(long, default_value = "all")]
    n: String,
    /// Write a Graphviz rendering here
    #[arg(long)]
    dot: Option<PathBuf>,
    /// Write the textual node/arc dump here
    #[arg(long)]
    dump: Option<PathBuf>,
}

#[derive(Args)]
struct LossArgs {
    lexicon: PathBuf,
    /// Whitespace-separated word sequence
    words: String,
    /// Posterior file, text or binary
    posteriors: PathBuf,
    /// Pronunciation variants per word: a count or "all"
    #[arg(long, default_value = "all")]
    n: String,
    /// gtc: graph loss; ctc-ref: independent single-sequence recursion
    /// (requires --n 1); brute: exhaustive oracle (small inputs only)
    #[arg(long, default_value = "gtc")]
    mode: String,
    /// Write the gradient as a text posterior file
    #[arg(long)]
    grad: Option<PathBuf>,
    /// Decimal places for the printed loss
    #[arg(long, default_value_t = 6)]
    precision: usize,
    /// Renormalize rows by log-softmax instead of rejecting them
    #[arg(long)]
    normalize: bool,
}

#[derive(Args)]
struct OracleLerArgs {
    lexicon: PathBuf,
    /// Transcript file: `words<TAB>reference phonemes`, one per line
    transcripts: PathBuf,
    /// Comma-separated depths, each a count or "all"
    #[arg(long, default_value = "1,2,3,all")]
    n: String,
    /// Worker threads for per-utterance scoring
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct DecodeArgs {
    /// Posterior file, text or binary
    posteriors: PathBuf,
    /// Lexicon used to print phoneme symbols; indices are printed without it
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Renormalize rows by log-softmax instead of rejecting them
    #[arg(long)]
    normalize: bool,
}

#[derive(Args)]
struct TrainToyArgs {
    /// TOML file mirroring the flags below; explicit flags win
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write result lines here in addition to stdout
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    vocab_size: Option<usize>,
    #[arg(long)]
    num_words: Option<usize>,
    #[arg(long)]
    variants_per_word: Option<usize>,
    #[arg(long)]
    template_dim: Option<usize>,
    #[arg(long)]
    frames_min: Option<usize>,
    #[arg(long)]
    frames_max: Option<usize>,
    #[arg(long)]
    noise_sigma: Option<f64>,
    #[arg(long)]
    variant_prob: Option<f64>,
    #[arg(long)]
    train_utterances: Option<usize>,
    #[arg(long)]
    test_utterances: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    /// Depth of the graph objective: a count or "all"
    #[arg(long)]
    gtc_n: Option<String>,
    /// Worker threads for per-utterance loss evaluation
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(EXIT_INPUT_ERROR)
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Graph(args) => cmd_graph(args),
        Command::Loss(args) => cmd_loss(args),
        Command::OracleLer(args) => cmd_oracle_ler(args),
        Command::Decode(args) => cmd_decode(args),
        Command::TrainToy(args) => cmd_train_toy(args),
    }
}

fn read_lexicon(path: &Path) -> Result<Lexicon> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading lexicon {}", path.display()))?;
    parse_lexicon(text.as_bytes()).with_context(|| format!("lexicon {}", path.display()))
}

fn parse_n(s: &str) -> Result<NBest> {
    s.parse::<NBest>().map_err(Into::into)
}

fn split_words(words: &str) -> Result<Vec<String>> {
    let words: Vec<String> = words.split_whitespace().map(String::from).collect();
    if words.is_empty() {
        bail!("empty word sequence");
    }
    Ok(words)
}

fn build_graph(lexicon: &Lexicon, words: &str, n: NBest) -> Result<LabelGraph> {
    let words = split_words(words)?;
    Ok(lexicon.words_to_graph(&words, n)?)
}

fn cmd_graph(args: GraphArgs) -> Result<u8> {
    let lexicon = read_lexicon(&args.lexicon)?;
    let graph = build_graph(&lexicon, &args.words, parse_n(&args.n)?)?;
    println!("nodes={} arcs={}", graph.num_nodes(), graph.num_arcs());
    if let Ok(accepted) = enumerate_collapsed(&graph, 1000) {
        println!("accepted={}", accepted.len());
    }
    if let Some(path) = &args.dot {
        fs::write(path, graph.to_dot(lexicon.vocab()))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    if let Some(path) = &args.dump {
        fs::write(path, graph.dump(lexicon.vocab()))
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(0)
}

fn cmd_loss(args: LossArgs) -> Result<u8> {
    let lexicon = read_lexicon(&args.lexicon)?;
    let emissions = posterior::read_posteriors(&args.posteriors, args.normalize)?;
    if emissions.vocab_size() != lexicon.vocab().size() {
        bail!(
            "posterior vocabulary {} does not match lexicon vocabulary {}",
            emissions.vocab_size(),
            lexicon.vocab().size()
        );
    }
    let n = parse_n(&args.n)?;

    let (loss, grad) = match args.mode.as_str() {
        "gtc" => {
            let graph = build_graph(&lexicon, &args.words, n)?;
            let result = gtc_loss(&graph, &emissions)?;
            (result.loss, Some(result))
        }
        "ctc-ref" => {
            if n != NBest::Top(1) {
                bail!("--mode ctc-ref scores the single 1-best sequence; use --n 1");
            }
            let words = split_words(&args.words)?;
            let mut phonemes = Vec::new();
            for word in &words {
                phonemes.extend_from_slice(lexicon.n_best(word, NBest::Top(1))?[0].phonemes());
            }
            let target = TargetSequence::new(phonemes)?;
            let result = ctc_loss_reference(&target, &emissions)?;
            (result.loss, Some(result))
        }
        "brute" => {
            if args.grad.is_some() {
                bail!("--mode brute computes no gradient");
            }
            let graph = build_graph(&lexicon, &args.words, n)?;
            (brute_force_loss(&graph, &emissions)?, None)
        }
        other => bail!("unknown mode {other:?} (expected gtc, ctc-ref or brute)"),
    };

    println!("loss={loss:.prec$}", prec = args.precision);
    if let (Some(path), Some(result)) = (&args.grad, &grad) {
        let text = posterior::format_matrix_text(
            result.num_frames(),
            result.vocab_size(),
            result.grad_matrix(),
        );
        fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(if loss.is_infinite() { EXIT_INFEASIBLE } else { 0 })
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    if jobs == 0 {
        bail!("--jobs must be at least 1");
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .context("building worker pool")
}

fn cmd_oracle_ler(args: OracleLerArgs) -> Result<u8> {
    let lexicon = read_lexicon(&args.lexicon)?;
    let text = fs::read_to_string(&args.transcripts)
        .with_context(|| format!("reading transcripts {}", args.transcripts.display()))?;
    let transcripts = parse_transcripts(&text, lexicon.vocab())
        .with_context(|| format!("transcripts {}", args.transcripts.display()))?;
    let depths = args
        .n
        .split(',')
        .map(|tok| parse_n(tok.trim()))
        .collect::<Result<Vec<NBest>>>()?;
    let pool = thread_pool(args.jobs)?;
    for n in depths {
        let report = pool.install(|| oracle_ler_report(&lexicon, &transcripts, n))?;
        println!("{}", report.report_line());
    }
    Ok(0)
}

fn cmd_decode(args: DecodeArgs) -> Result<u8> {
    let emissions = posterior::read_posteriors(&args.posteriors, args.normalize)?;
    let decoded = greedy_decode(&emissions);
    let rendered: Vec<String> = match &args.lexicon {
        Some(path) => {
            let lexicon = read_lexicon(path)?;
            if lexicon.vocab().size() != emissions.vocab_size() {
                bail!(
                    "lexicon vocabulary {} does not match posterior vocabulary {}",
                    lexicon.vocab().size(),
                    emissions.vocab_size()
                );
            }
            decoded
                .phonemes()
                .iter()
                .map(|&p| lexicon.vocab().symbol(p).to_string())
                .collect()
        }
        None => decoded.phonemes().iter().map(|p| p.to_string()).collect(),
    };
    println!("{}", rendered.join(" "));
    Ok(0)
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct ExperimentFile {
    vocab_size: Option<usize>,
    num_words: Option<usize>,
    variants_per_word: Option<usize>,
    template_dim: Option<usize>,
    frames_min: Option<usize>,
    frames_max: Option<usize>,
    noise_sigma: Option<f64>,
    variant_prob: Option<f64>,
    train_utterances: Option<usize>,
    test_utterances: Option<usize>,
    seed: Option<u64>,
    epochs: Option<usize>,
    learning_rate: Option<f64>,
    gtc_n: Option<String>,
}

fn cmd_train_toy(args: TrainToyArgs) -> Result<u8> {
    let file: ExperimentFile = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            toml::from_str(&text).with_context(|| format!("config {}", path.display()))?
        }
        None => ExperimentFile::default(),
    };

    let defaults = SynthConfig::default();
    let config = SynthConfig {
        vocab_size: args.vocab_size.or(file.vocab_size).unwrap_or(defaults.vocab_size),
        num_words: args.num_words.or(file.num_words).unwrap_or(defaults.num_words),
        variants_per_word: args
            .variants_per_word
            .or(file.variants_per_word)
            .unwrap_or(defaults.variants_per_word),
        template_dim: args
            .template_dim
            .or(file.template_dim)
            .unwrap_or(defaults.template_dim),
        frames_per_phoneme: (
            args.frames_min.or(file.frames_min).unwrap_or(defaults.frames_per_phoneme.0),
            args.frames_max.or(file.frames_max).unwrap_or(defaults.frames_per_phoneme.1),
        ),
        noise_sigma: args.noise_sigma.or(file.noise_sigma).unwrap_or(defaults.noise_sigma),
        variant_prob: args
            .variant_prob
            .or(file.variant_prob)
            .unwrap_or(defaults.variant_prob),
        train_utterances: args
            .train_utterances
            .or(file.train_utterances)
            .unwrap_or(defaults.train_utterances),
        test_utterances: args
            .test_utterances
            .or(file.test_utterances)
            .unwrap_or(defaults.test_utterances),
        seed: args.seed.or(file.seed).unwrap_or(defaults.seed),
    };
    let epochs = args.epochs.or(file.epochs).unwrap_or(40);
    let learning_rate = args.lr.or(file.learning_rate).unwrap_or(0.5);
    let gtc_n = parse_n(args.gtc_n.or(file.gtc_n).as_deref().unwrap_or("all"))?;

    let modes = [LossMode::CtcOneBest, LossMode::GtcNBest(gtc_n)];
    let pool = thread_pool(args.jobs)?;
    let outcomes: Vec<ExperimentOutcome> =
        pool.install(|| run_experiment(&config, &modes, epochs, learning_rate))?;

    let mut lines = String::new();
    for outcome in &outcomes {
        let line = outcome.result_line();
        println!("{line}");
        lines.push_str(&line);
        lines.push('\n');
    }
    if let Some(path) = &args.out {
        fs::write(path, lines).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(0)
}
