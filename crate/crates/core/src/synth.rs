//! Synthetic corpus generation and a minimal trainable frame classifier.
//!
//! Each phoneme gets a random template vector; utterances emit noisy template
//! frames for a pronunciation sampled from the word's variants. Training a
//! linear frame classifier with either the single-pronunciation loss or the
//! full pronunciation-graph loss isolates the effect of the objective: when
//! the data actually uses alternative variants, the graph loss can credit the
//! variant that was said while the 1-best loss is stuck with mislabeled
//! supervision.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::acceptor::LabelGraph;
use crate::emissions::EmissionMatrix;
use crate::error::{Error, Result};
use crate::lexicon::{parse_lexicon, Lexicon, NBest};
use crate::loss::{greedy_decode, gtc_loss, TargetSequence};
use crate::metrics::{error_rate, parse_transcripts};
use crate::topology::Pronunciation;
use crate::vocab::Vocabulary;

/// Words per generated utterance (inclusive range).
const WORDS_PER_UTTERANCE: (usize, usize) = (2, 4);
/// Phonemes per generated pronunciation (inclusive range).
const PRONUNCIATION_LEN: (usize, usize) = (2, 4);
/// Utterances per gradient step.
const BATCH_SIZE: usize = 8;

/// Knobs of the synthetic corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    /// Symbols including the blank; at least 3 (blank plus two phonemes).
    pub vocab_size: usize,
    /// Distinct words in the lexicon.
    pub num_words: usize,
    /// Pronunciation variants per word.
    pub variants_per_word: usize,
    /// Feature dimension of the phoneme templates.
    pub template_dim: usize,
    /// Frames emitted per phoneme (inclusive range).
    pub frames_per_phoneme: (usize, usize),
    /// Standard deviation of the Gaussian noise added to template frames.
    pub noise_sigma: f64,
    /// Probability that an utterance uses a non-first variant of a word.
    pub variant_prob: f64,
    pub train_utterances: usize,
    pub test_utterances: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            vocab_size: 7,
            num_words: 5,
            variants_per_word: 2,
            template_dim: 8,
            frames_per_phoneme: (2, 4),
            noise_sigma: 0.3,
            variant_prob: 0.5,
            train_utterances: 40,
            test_utterances: 24,
            seed: 7,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Config(m));
        if self.vocab_size < 3 {
            return err(format!("vocab_size must be >= 3, got {}", self.vocab_size));
        }
        if self.num_words == 0 || self.variants_per_word == 0 {
            return err("num_words and variants_per_word must be >= 1".into());
        }
        if self.template_dim == 0 {
            return err("template_dim must be >= 1".into());
        }
        let (lo, hi) = self.frames_per_phoneme;
        if lo == 0 || lo > hi {
            return err(format!("invalid frames_per_phoneme range ({lo}, {hi})"));
        }
        if !self.noise_sigma.is_finite() || self.noise_sigma < 0.0 {
            return err(format!("noise_sigma must be >= 0, got {}", self.noise_sigma));
        }
        if !(0.0..=1.0).contains(&self.variant_prob) {
            return err(format!(
                "variant_prob must be in [0, 1], got {}",
                self.variant_prob
            ));
        }
        if self.train_utterances == 0 || self.test_utterances == 0 {
            return err("corpus sizes must be >= 1".into());
        }
        Ok(())
    }
}

/// Row-major `num_frames x dim` feature matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Features {
    pub num_frames: usize,
    pub dim: usize,
    pub data: Vec<f64>,
}

impl Features {
    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub words: Vec<String>,
    pub reference: TargetSequence,
    pub features: Features,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub lexicon: Lexicon,
    pub train: Vec<Utterance>,
    pub test: Vec<Utterance>,
    /// Template vector of phoneme `k + 1` (the blank has none).
    pub templates: Vec<Vec<f64>>,
}

/// Deterministic under the config seed.
pub fn generate_corpus(config: &SynthConfig) -> Result<Corpus> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let num_phonemes = config.vocab_size - 1;
    let vocab = Vocabulary::new((1..=num_phonemes).map(|i| format!("p{i}")))?;

    let templates: Vec<Vec<f64>> = (0..num_phonemes)
        .map(|_| {
            (0..config.template_dim)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();

    let mut entries: Vec<(String, Vec<Pronunciation>)> = Vec::with_capacity(config.num_words);
    for w in 0..config.num_words {
        let mut variants: Vec<Vec<usize>> = Vec::with_capacity(config.variants_per_word);
        while variants.len() < config.variants_per_word {
            let len = rng.random_range(PRONUNCIATION_LEN.0..=PRONUNCIATION_LEN.1);
            let mut cand: Vec<usize> = (0..len)
                .map(|_| rng.random_range(1..config.vocab_size))
                .collect();
            // Grow until distinct so tiny vocabularies cannot stall.
            while variants.contains(&cand) {
                cand.push(rng.random_range(1..config.vocab_size));
            }
            variants.push(cand);
        }
        let prons = variants
            .into_iter()
            .map(Pronunciation::new)
            .collect::<Result<Vec<_>>>()?;
        entries.push((format!("w{w}"), prons));
    }
    let lexicon = Lexicon::from_entries(entries, vocab)?;
    let word_names: Vec<String> = lexicon.words().map(String::from).collect();

    let sample_split = |rng: &mut ChaCha8Rng, count: usize| -> Result<Vec<Utterance>> {
        (0..count)
            .map(|_| {
                let num_words = rng.random_range(WORDS_PER_UTTERANCE.0..=WORDS_PER_UTTERANCE.1);
                let mut words = Vec::with_capacity(num_words);
                let mut reference = Vec::new();
                let mut frames = Vec::new();
                for _ in 0..num_words {
                    let word = &word_names[rng.random_range(0..word_names.len())];
                    let variants = lexicon.variants(word).expect("generated word");
                    let vi = if variants.len() > 1 && rng.random::<f64>() < config.variant_prob {
                        rng.random_range(1..variants.len())
                    } else {
                        0
                    };
                    let pron = &variants[vi].pronunciation;
                    reference.extend_from_slice(pron.phonemes());
                    for &ph in pron.phonemes() {
                        let duration = rng
                            .random_range(config.frames_per_phoneme.0..=config.frames_per_phoneme.1);
                        for _ in 0..duration {
                            for d in 0..config.template_dim {
                                let noise: f64 = rng.sample(StandardNormal);
                                frames.push(templates[ph - 1][d] + config.noise_sigma * noise);
                            }
                        }
                    }
                    words.push(word.clone());
                }
                Ok(Utterance {
                    words,
                    reference: TargetSequence::new(reference)?,
                    features: Features {
                        num_frames: frames.len() / config.template_dim,
                        dim: config.template_dim,
                        data: frames,
                    },
                })
            })
            .collect()
    };
    let train = sample_split(&mut rng, config.train_utterances)?;
    let test = sample_split(&mut rng, config.test_utterances)?;

    Ok(Corpus {
        lexicon,
        train,
        test,
        templates,
    })
}

/// Linear frame classifier emitting log-softmax posteriors.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameModel {
    vocab_size: usize,
    dim: usize,
    /// Row-major `vocab_size x dim`.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl FrameModel {
    pub fn new_random(vocab_size: usize, dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights = (0..vocab_size * dim)
            .map(|_| 0.1 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let bias = vec![0.0; vocab_size];
        FrameModel {
            vocab_size,
            dim,
            weights,
            bias,
        }
    }

    /// Builds a model directly from per-class weight rows and biases.
    pub fn from_parameters(weights: Vec<Vec<f64>>, bias: Vec<f64>) -> Result<Self> {
        let vocab_size = weights.len();
        if vocab_size < 2 || bias.len() != vocab_size {
            return Err(Error::Config("weights/bias shapes disagree".into()));
        }
        let dim = weights[0].len();
        if weights.iter().any(|row| row.len() != dim) {
            return Err(Error::Config("ragged weight rows".into()));
        }
        Ok(FrameModel {
            vocab_size,
            dim,
            weights: weights.into_iter().flatten().collect(),
            bias,
        })
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn emissions(&self, features: &Features) -> Result<EmissionMatrix> {
        if features.dim != self.dim {
            return Err(Error::Mismatch(format!(
                "feature dim {} vs model dim {}",
                features.dim, self.dim
            )));
        }
        let t_max = features.num_frames;
        let mut logits = vec![0.0; t_max * self.vocab_size];
        for t in 0..t_max {
            let x = features.row(t);
            for k in 0..self.vocab_size {
                let w = &self.weights[k * self.dim..(k + 1) * self.dim];
                let mut z = self.bias[k];
                for d in 0..self.dim {
                    z += w[d] * x[d];
                }
                logits[t * self.vocab_size + k] = z;
            }
        }
        EmissionMatrix::from_logits(t_max, self.vocab_size, logits)
    }
}

/// Training objective: the 1-best single-pronunciation loss or the graph loss
/// over the top-n variants. `GtcNBest(Top(1))` and `CtcOneBest` build the
/// same graph and train identically.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossMode {
    CtcOneBest,
    GtcNBest(NBest),
}

impl LossMode {
    pub fn n_best(&self) -> NBest {
        match self {
            LossMode::CtcOneBest => NBest::Top(1),
            LossMode::GtcNBest(n) => *n,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            LossMode::CtcOneBest => "ctc-1best",
            LossMode::GtcNBest(_) => "gtc-nbest",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainStats {
    /// Mean finite loss per epoch.
    pub loss_history: Vec<f64>,
    /// Utterance evaluations skipped because the target was infeasible.
    pub skipped: usize,
}

/// Mini-batch gradient descent on the frame classifier. Per-utterance losses
/// and gradients inside a batch are computed in parallel and reduced in
/// utterance order, so results do not depend on the thread count.
pub fn train(
    model: &FrameModel,
    corpus: &Corpus,
    mode: LossMode,
    epochs: usize,
    learning_rate: f64,
) -> Result<(FrameModel, TrainStats)> {
    if corpus.train.is_empty() {
        return Err(Error::Config("empty training corpus".into()));
    }
    let graphs: Vec<LabelGraph> = corpus
        .train
        .iter()
        .map(|u| corpus.lexicon.words_to_graph(&u.words, mode.n_best()))
        .collect::<Result<_>>()?;

    let v = model.vocab_size;
    let dim = model.dim;
    let mut model = model.clone();
    let mut stats = TrainStats::default();

    for _epoch in 0..epochs {
        let mut epoch_loss = 0.0;
        let mut epoch_finite = 0usize;
        let mut batch = 0;
        while batch < corpus.train.len() {
            let idxs: Vec<usize> =
                (batch..(batch + BATCH_SIZE).min(corpus.train.len())).collect();
            batch += BATCH_SIZE;

            // loss and d(loss)/d(logits) per utterance; logit gradient is
            // softmax minus occupancy.
            let results: Vec<Result<Option<(f64, Vec<f64>)>>> = idxs
                .par_iter()
                .map(|&i| {
                    let em = model.emissions(&corpus.train[i].features).map_err(|e| {
                        Error::Divergence(format!("non-finite model outputs: {e}"))
                    })?;
                    let r = gtc_loss(&graphs[i], &em)?;
                    if r.loss.is_nan() {
                        return Err(Error::Divergence("loss is NaN".into()));
                    }
                    if r.loss.is_infinite() {
                        return Ok(None);
                    }
                    let t_max = em.num_frames();
                    let mut gz = vec![0.0; t_max * v];
                    for t in 0..t_max {
                        for k in 0..v {
                            gz[t * v + k] = em.get(t, k).exp() - r.occupancy(t, k);
                        }
                    }
                    Ok(Some((r.loss, gz)))
                })
                .collect();

            let mut grad_w = vec![0.0; v * dim];
            let mut grad_b = vec![0.0; v];
            let mut contributing = 0usize;
            for (&i, result) in idxs.iter().zip(results) {
                match result? {
                    None => stats.skipped += 1,
                    Some((loss, gz)) => {
                        let feats = &corpus.train[i].features;
                        for t in 0..feats.num_frames {
                            let x = feats.row(t);
                            for k in 0..v {
                                let g = gz[t * v + k];
                                if g == 0.0 {
                                    continue;
                                }
                                grad_b[k] += g;
                                let row = &mut grad_w[k * dim..(k + 1) * dim];
                                for d in 0..dim {
                                    row[d] += g * x[d];
                                }
                            }
                        }
                        epoch_loss += loss;
                        epoch_finite += 1;
                        contributing += 1;
                    }
                }
            }
            if contributing > 0 {
                let scale = learning_rate / contributing as f64;
                for (w, g) in model.weights.iter_mut().zip(&grad_w) {
                    *w -= scale * g;
                }
                for (b, g) in model.bias.iter_mut().zip(&grad_b) {
                    *b -= scale * g;
                }
            }
        }
        stats.loss_history.push(if epoch_finite > 0 {
            epoch_loss / epoch_finite as f64
        } else {
            f64::INFINITY
        });
    }
    Ok((model, stats))
}

/// Pooled phoneme error rate of greedy decoding against the references.
pub fn evaluate(model: &FrameModel, utterances: &[Utterance]) -> Result<f64> {
    let decoded: Vec<TargetSequence> = utterances
        .iter()
        .map(|u| Ok(greedy_decode(&model.emissions(&u.features)?)))
        .collect::<Result<_>>()?;
    error_rate(
        utterances
            .iter()
            .map(|u| &u.reference)
            .zip(decoded.iter().map(|d| d as &TargetSequence)),
    )
}

/// One trained configuration of the toy experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub mode: LossMode,
    pub seed: u64,
    pub per: f64,
}

impl ExperimentOutcome {
    /// `mode=<m> n=<k> seed=<s> per=<x.x>`
    pub fn result_line(&self) -> String {
        format!(
            "mode={} n={} seed={} per={:.1}",
            self.mode.label(),
            self.mode.n_best(),
            self.seed,
            self.per
        )
    }
}

/// Generates one corpus and trains every mode from a shared random
/// initialization.
pub fn run_experiment(
    config: &SynthConfig,
    modes: &[LossMode],
    epochs: usize,
    learning_rate: f64,
) -> Result<Vec<ExperimentOutcome>> {
    let corpus = generate_corpus(config)?;
    let init = FrameModel::new_random(
        config.vocab_size,
        config.template_dim,
        config.seed.wrapping_add(0x5eed),
    );
    modes
        .iter()
        .map(|&mode| {
            let (trained, _) = train(&init, &corpus, mode, epochs, learning_rate)?;
            Ok(ExperimentOutcome {
                mode,
                seed: config.seed,
                per: evaluate(&trained, &corpus.test)?,
            })
        })
        .collect()
}

/// Text serialization of a corpus: the lexicon file, a transcript file
/// (`words<TAB>ref phonemes`) and a frames file (`id T D` header plus `T`
/// rows of `D` floats per utterance).
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusDump {
    pub lexicon_tsv: String,
    pub transcripts: String,
    pub frames: String,
}

pub fn dump_corpus(lexicon: &Lexicon, utterances: &[Utterance]) -> CorpusDump {
    let vocab = lexicon.vocab();
    let mut transcripts = String::new();
    let mut frames = String::new();
    for (i, u) in utterances.iter().enumerate() {
        transcripts.push_str(&u.words.join(" "));
        transcripts.push('\t');
        let syms: Vec<&str> = u
            .reference
            .phonemes()
            .iter()
            .map(|&p| vocab.symbol(p))
            .collect();
        transcripts.push_str(&syms.join(" "));
        transcripts.push('\n');

        frames.push_str(&format!(
            "u{i} {} {}\n",
            u.features.num_frames, u.features.dim
        ));
        for t in 0..u.features.num_frames {
            let row: Vec<String> = u.features.row(t).iter().map(|x| x.to_string()).collect();
            frames.push_str(&row.join(" "));
            frames.push('\n');
        }
    }
    CorpusDump {
        lexicon_tsv: lexicon.to_tsv(),
        transcripts,
        frames,
    }
}

pub fn load_corpus(dump: &CorpusDump) -> Result<(Lexicon, Vec<Utterance>)> {
    let lexicon = parse_lexicon(dump.lexicon_tsv.as_bytes())?;
    let transcripts = parse_transcripts(&dump.transcripts, lexicon.vocab())?;

    let mut features = Vec::new();
    let mut lines = dump.frames.lines().enumerate();
    while let Some((lineno, header)) = lines.next() {
        if header.trim().is_empty() {
            continue;
        }
        let parse_err = |line: usize, message: String| Error::Parse { line: line + 1, message };
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(parse_err(lineno, "expected `id T D` header".into()));
        }
        let t_max: usize = parts[1]
            .parse()
            .map_err(|_| parse_err(lineno, format!("bad frame count {:?}", parts[1])))?;
        let dim: usize = parts[2]
            .parse()
            .map_err(|_| parse_err(lineno, format!("bad dimension {:?}", parts[2])))?;
        let mut data = Vec::with_capacity(t_max * dim);
        for _ in 0..t_max {
            let (rowno, row) = lines
                .next()
                .ok_or_else(|| parse_err(lineno, "truncated frames block".into()))?;
            let values = row
                .split_whitespace()
                .map(|v| v.parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| parse_err(rowno, format!("bad float: {e}")))?;
            if values.len() != dim {
                return Err(parse_err(
                    rowno,
                    format!("expected {dim} values, got {}", values.len()),
                ));
            }
            data.extend(values);
        }
        features.push(Features {
            num_frames: t_max,
            dim,
            data,
        });
    }
    if features.len() != transcripts.len() {
        return Err(Error::Mismatch(format!(
            "{} transcripts vs {} frame blocks",
            transcripts.len(),
            features.len()
        )));
    }
    let utterances = transcripts
        .into_iter()
        .zip(features)
        .map(|(t, features)| Utterance {
            words: t.words,
            reference: t.reference,
            features,
        })
        .collect();
    Ok((lexicon, utterances))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::enumerate_collapsed;
    use crate::vocab::BLANK;

    fn quick_config() -> SynthConfig {
        SynthConfig {
            vocab_size: 5,
            num_words: 4,
            variants_per_word: 2,
            template_dim: 6,
            frames_per_phoneme: (2, 3),
            noise_sigma: 0.2,
            variant_prob: 0.5,
            train_utterances: 6,
            test_utterances: 4,
            seed: 11,
        }
    }

    #[test]
    fn config_validation_catches_bad_fields() {
        let mut c = quick_config();
        c.vocab_size = 2;
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let mut c = quick_config();
        c.variant_prob = 1.5;
        assert!(c.validate().is_err());
        let mut c = quick_config();
        c.frames_per_phoneme = (3, 2);
        assert!(c.validate().is_err());
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = quick_config();
        let a = generate_corpus(&cfg).unwrap();
        let b = generate_corpus(&cfg).unwrap();
        assert_eq!(a, b);
        let mut other = cfg.clone();
        other.seed = 12;
        assert_ne!(generate_corpus(&other).unwrap(), a);
    }

    #[test]
    fn zero_variant_prob_uses_first_variants() {
        let mut cfg = quick_config();
        cfg.variant_prob = 0.0;
        let corpus = generate_corpus(&cfg).unwrap();
        for u in corpus.train.iter().chain(&corpus.test) {
            let expected: Vec<usize> = u
                .words
                .iter()
                .flat_map(|w| {
                    corpus.lexicon.variants(w).unwrap()[0]
                        .pronunciation
                        .phonemes()
                        .to_vec()
                })
                .collect();
            assert_eq!(u.reference.phonemes(), expected.as_slice());
        }
    }

    #[test]
    fn noiseless_frames_are_linearly_separable() {
        let mut cfg = quick_config();
        cfg.noise_sigma = 0.0;
        let corpus = generate_corpus(&cfg).unwrap();
        // Nearest-centroid weights classify exact template frames perfectly.
        let mut weights = vec![vec![0.0; cfg.template_dim]];
        let mut bias = vec![-1e9];
        for t in &corpus.templates {
            weights.push(t.clone());
            bias.push(-0.5 * t.iter().map(|x| x * x).sum::<f64>());
        }
        let model = FrameModel::from_parameters(weights, bias).unwrap();
        for u in corpus.train.iter().chain(&corpus.test) {
            let em = model.emissions(&u.features).unwrap();
            for t in 0..u.features.num_frames {
                let truth = corpus
                    .templates
                    .iter()
                    .position(|tpl| tpl.as_slice() == u.features.row(t))
                    .expect("noiseless frame equals its template")
                    + 1;
                let row = em.row(t);
                let argmax = (0..row.len()).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap();
                assert_eq!(argmax, truth);
            }
        }
    }

    #[test]
    fn zero_epochs_leaves_model_unchanged() {
        let cfg = quick_config();
        let corpus = generate_corpus(&cfg).unwrap();
        let model = FrameModel::new_random(cfg.vocab_size, cfg.template_dim, 3);
        let (trained, stats) = train(&model, &corpus, LossMode::CtcOneBest, 0, 0.5).unwrap();
        assert_eq!(trained, model);
        assert!(stats.loss_history.is_empty());
    }

    #[test]
    fn one_best_and_gtc_top1_train_identically() {
        let cfg = quick_config();
        let corpus = generate_corpus(&cfg).unwrap();
        let model = FrameModel::new_random(cfg.vocab_size, cfg.template_dim, 3);
        let (a, sa) = train(&model, &corpus, LossMode::CtcOneBest, 4, 0.3).unwrap();
        let (b, sb) = train(&model, &corpus, LossMode::GtcNBest(NBest::Top(1)), 4, 0.3).unwrap();
        assert_eq!(a, b);
        assert_eq!(sa, sb);
    }

    #[test]
    fn overfits_one_utterance() {
        let mut cfg = quick_config();
        cfg.train_utterances = 1;
        cfg.test_utterances = 1;
        cfg.variant_prob = 0.0;
        let corpus = generate_corpus(&cfg).unwrap();
        let model = FrameModel::new_random(cfg.vocab_size, cfg.template_dim, 3);
        let (trained, stats) =
            train(&model, &corpus, LossMode::GtcNBest(NBest::All), 150, 0.5).unwrap();
        let first = stats.loss_history[0];
        let last = *stats.loss_history.last().unwrap();
        assert!(last < first, "loss did not decrease: {first} -> {last}");
        // Greedy decode lands on a sequence the training graph accepts.
        let u = &corpus.train[0];
        let graph = corpus.lexicon.words_to_graph(&u.words, NBest::All).unwrap();
        let accepted = enumerate_collapsed(&graph, 1000).unwrap();
        let decoded = greedy_decode(&trained.emissions(&u.features).unwrap());
        assert!(
            accepted.contains(&decoded.phonemes().to_vec()),
            "decode {:?} not accepted",
            decoded.phonemes()
        );
    }

    #[test]
    fn untrained_model_is_near_chance() {
        let mut cfg = quick_config();
        cfg.vocab_size = 4;
        cfg.test_utterances = 20;
        let corpus = generate_corpus(&cfg).unwrap();
        let model = FrameModel::new_random(cfg.vocab_size, cfg.template_dim, 999);
        let per = evaluate(&model, &corpus.test).unwrap();
        assert!(per > 50.0, "untrained PER unexpectedly low: {per}");
    }

    #[test]
    fn perfect_model_scores_zero() {
        let mut cfg = quick_config();
        cfg.noise_sigma = 0.0;
        // Distinct adjacent phonemes decode cleanly without blanks; repeated
        // phonemes inside a pronunciation would merge under collapse, so keep
        // the check to utterances without adjacent repeats.
        let corpus = generate_corpus(&cfg).unwrap();
        let mut weights = vec![vec![0.0; cfg.template_dim]];
        let mut bias = vec![-1e9];
        for t in &corpus.templates {
            weights.push(t.iter().map(|x| 50.0 * x).collect());
            bias.push(-25.0 * t.iter().map(|x| x * x).sum::<f64>());
        }
        let model = FrameModel::from_parameters(weights, bias).unwrap();
        let no_repeats: Vec<Utterance> = corpus
            .test
            .iter()
            .filter(|u| u.reference.phonemes().windows(2).all(|w| w[0] != w[1]))
            .cloned()
            .collect();
        assert!(!no_repeats.is_empty());
        let per = evaluate(&model, &no_repeats).unwrap();
        assert_eq!(per, 0.0);
    }

    #[test]
    fn exploding_learning_rate_reports_divergence() {
        let cfg = quick_config();
        let corpus = generate_corpus(&cfg).unwrap();
        let model = FrameModel::new_random(cfg.vocab_size, cfg.template_dim, 3);
        let result = train(&model, &corpus, LossMode::CtcOneBest, 3, 1e300);
        assert!(matches!(result, Err(Error::Divergence(_))), "{result:?}");
    }

    #[test]
    fn infeasible_utterances_are_skipped_and_counted() {
        let cfg = quick_config();
        let mut corpus = generate_corpus(&cfg).unwrap();
        // One frame cannot carry a multi-phoneme reference.
        let victim = &mut corpus.train[0];
        victim.features = Features {
            num_frames: 1,
            dim: cfg.template_dim,
            data: vec![0.0; cfg.template_dim],
        };
        assert!(victim.reference.len() > 1);
        let model = FrameModel::new_random(cfg.vocab_size, cfg.template_dim, 3);
        let (_, stats) = train(&model, &corpus, LossMode::GtcNBest(NBest::All), 2, 0.3).unwrap();
        assert_eq!(stats.skipped, 2, "one skip per epoch");
        assert!(stats.loss_history.iter().all(|l| l.is_finite()));
    }

    #[test]
    fn corpus_dump_round_trips() {
        let cfg = quick_config();
        let corpus = generate_corpus(&cfg).unwrap();
        let dump = dump_corpus(&corpus.lexicon, &corpus.train);
        let (lexicon, utterances) = load_corpus(&dump).unwrap();
        let again = dump_corpus(&lexicon, &utterances);
        assert_eq!(dump, again);
        assert_eq!(utterances.len(), corpus.train.len());
        // Same data under the reloaded vocabulary.
        for (orig, loaded) in corpus.train.iter().zip(&utterances) {
            assert_eq!(orig.words, loaded.words);
            assert_eq!(orig.features, loaded.features);
            let orig_syms: Vec<&str> = orig
                .reference
                .phonemes()
                .iter()
                .map(|&p| corpus.lexicon.vocab().symbol(p))
                .collect();
            let loaded_syms: Vec<&str> = loaded
                .reference
                .phonemes()
                .iter()
                .map(|&p| lexicon.vocab().symbol(p))
                .collect();
            assert_eq!(orig_syms, loaded_syms);
        }
    }

    #[test]
    fn result_line_format() {
        let outcome = ExperimentOutcome {
            mode: LossMode::GtcNBest(NBest::All),
            seed: 3,
            per: 12.34,
        };
        assert_eq!(outcome.result_line(), "mode=gtc-nbest n=all seed=3 per=12.3");
        let outcome = ExperimentOutcome {
            mode: LossMode::CtcOneBest,
            seed: 3,
            per: 0.0,
        };
        assert_eq!(outcome.result_line(), "mode=ctc-1best n=1 seed=3 per=0.0");
    }

    #[test]
    fn blank_index_is_reserved_in_model_outputs() {
        let cfg = quick_config();
        let corpus = generate_corpus(&cfg).unwrap();
        let model = FrameModel::new_random(cfg.vocab_size, cfg.template_dim, 1);
        let em = model.emissions(&corpus.train[0].features).unwrap();
        assert_eq!(em.vocab_size(), corpus.lexicon.vocab().size());
        assert_eq!(BLANK, 0);
    }
}
