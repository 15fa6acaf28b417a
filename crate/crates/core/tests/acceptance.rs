//! End-to-end acceptance suite. Each test prints one `[acceptance] ... PASS`
//! line (visible with `--nocapture`) and enforces its tolerance and runtime
//! budget.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use gtc_core::{
    brute_force_loss, build_gtc_graph, ctc_loss_reference, enumerate_collapsed,
    generate_corpus, gtc_loss, oracle_ler, parse_lexicon, parse_transcripts, run_experiment,
    train, EmissionMatrix, FrameModel, LossMode, NBest, Pronunciation, SynthConfig,
    TargetSequence, WordAlternatives,
};

fn rand_pronunciation(rng: &mut ChaCha8Rng, vocab_size: usize, max_len: usize) -> Pronunciation {
    let len = rng.random_range(1..=max_len);
    Pronunciation::new((0..len).map(|_| rng.random_range(1..vocab_size)).collect()).unwrap()
}

fn rand_words(
    rng: &mut ChaCha8Rng,
    vocab_size: usize,
    max_words: usize,
    max_variants: usize,
    max_len: usize,
) -> Vec<WordAlternatives> {
    let num_words = rng.random_range(1..=max_words);
    (0..num_words)
        .map(|w| {
            let num_variants = rng.random_range(1..=max_variants);
            let mut variants: Vec<Pronunciation> = Vec::new();
            while variants.len() < num_variants {
                let cand = rand_pronunciation(rng, vocab_size, max_len);
                if !variants.contains(&cand) {
                    variants.push(cand);
                }
            }
            WordAlternatives::new(format!("w{w}"), variants).unwrap()
        })
        .collect()
}

/// Every concatenation of one variant per word.
fn cross_product(words: &[WordAlternatives]) -> BTreeSet<Vec<usize>> {
    let mut acc: Vec<Vec<usize>> = vec![Vec::new()];
    for word in words {
        let mut next = Vec::new();
        for prefix in &acc {
            for variant in word.variants() {
                let mut seq = prefix.clone();
                seq.extend_from_slice(variant.phonemes());
                next.push(seq);
            }
        }
        acc = next;
    }
    acc.into_iter().collect()
}

/// True when all variant concatenations are distinct. When two different
/// variant choices spell the same sequence, the graph carries one accepting
/// path per choice while the exhaustive oracle counts each alignment string
/// once, so the two computations legitimately diverge; equivalence is
/// asserted on the unambiguous cases.
fn collision_free(words: &[WordAlternatives]) -> bool {
    let choices: usize = words.iter().map(|w| w.variants().len()).product();
    cross_product(words).len() == choices
}

fn rand_emissions(rng: &mut ChaCha8Rng, num_frames: usize, vocab_size: usize) -> EmissionMatrix {
    let logits: Vec<f64> = (0..num_frames * vocab_size)
        .map(|_| rng.random_range(-2.0..2.0))
        .collect();
    EmissionMatrix::from_logits(num_frames, vocab_size, logits).unwrap()
}

fn rel_diff(a: f64, b: f64) -> f64 {
    if a.is_infinite() && b.is_infinite() {
        return 0.0;
    }
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

fn budget(name: &str, elapsed: Duration, limit: Duration) {
    assert!(elapsed < limit, "{name} took {elapsed:?}, budget {limit:?}");
}

#[test]
fn brute_force_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let cases = 1000;
    let mut checked = 0;
    while checked < cases {
        let vocab_size = rng.random_range(3..=4);
        let words = rand_words(&mut rng, vocab_size, 3, 3, 3);
        if !collision_free(&words) {
            continue;
        }
        let num_frames = rng.random_range(1..=6);
        let graph = build_gtc_graph(&words, vocab_size).unwrap();
        let emissions = rand_emissions(&mut rng, num_frames, vocab_size);
        let fast = gtc_loss(&graph, &emissions).unwrap().loss;
        let slow = brute_force_loss(&graph, &emissions).unwrap();
        assert!(
            rel_diff(fast, slow) <= 1e-10,
            "case {checked}: graph loss {fast} vs brute force {slow}"
        );
        checked += 1;
    }
    let elapsed = start.elapsed();
    budget("brute-force oracle equivalence", elapsed, Duration::from_secs(30));
    println!("[acceptance] brute-force oracle equivalence: PASS ({cases} cases in {elapsed:?})");
}

#[test]
fn single_sequence_degeneracy() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let cases = 500;
    for case in 0..cases {
        let vocab_size = rng.random_range(3..=5);
        let words = rand_words(&mut rng, vocab_size, 3, 1, 3);
        let num_frames = rng.random_range(1..=8);
        let graph = build_gtc_graph(&words, vocab_size).unwrap();
        let emissions = rand_emissions(&mut rng, num_frames, vocab_size);

        let target: Vec<usize> = words
            .iter()
            .flat_map(|w| w.variants()[0].phonemes().to_vec())
            .collect();
        let reference = ctc_loss_reference(&TargetSequence::new(target).unwrap(), &emissions)
            .unwrap();
        let graph_loss = gtc_loss(&graph, &emissions).unwrap();
        let diff = if graph_loss.loss.is_infinite() && reference.loss.is_infinite() {
            0.0
        } else {
            (graph_loss.loss - reference.loss).abs()
        };
        assert!(
            diff <= 1e-12,
            "case {case}: graph {} vs reference recursion {}",
            graph_loss.loss,
            reference.loss
        );
    }
    let elapsed = start.elapsed();
    budget("single-sequence degeneracy", elapsed, Duration::from_secs(10));
    println!("[acceptance] single-sequence degeneracy vs independent recursion: PASS ({cases} cases in {elapsed:?})");
}

#[test]
fn gradient_matches_finite_differences() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let cases = 100;
    let h = 1e-5;
    let mut checked = 0;
    let mut entries_checked = 0usize;
    while checked < cases {
        let vocab_size = rng.random_range(3..=4);
        let words = rand_words(&mut rng, vocab_size, 3, 3, 3);
        let num_frames = rng.random_range(1..=6);
        let graph = build_gtc_graph(&words, vocab_size).unwrap();
        let emissions = rand_emissions(&mut rng, num_frames, vocab_size);
        let result = gtc_loss(&graph, &emissions).unwrap();
        if result.loss.is_infinite() {
            continue;
        }
        // Per-frame occupancies are a distribution.
        for t in 0..num_frames {
            let total: f64 = (0..vocab_size).map(|k| result.occupancy(t, k)).sum();
            assert!(
                (total - 1.0).abs() <= 1e-9,
                "case {checked} frame {t}: occupancy sums to {total}"
            );
        }
        // Central differences on the raw log-posterior entries, with no
        // renormalization.
        for t in 0..num_frames {
            for k in 0..vocab_size {
                let grad = result.grad(t, k);
                if grad.abs() <= 1e-8 {
                    continue;
                }
                let plus = gtc_loss(&graph, &emissions.perturbed(t, k, h)).unwrap().loss;
                let minus = gtc_loss(&graph, &emissions.perturbed(t, k, -h)).unwrap().loss;
                let numeric = (plus - minus) / (2.0 * h);
                let rel = (numeric - grad).abs() / grad.abs().max(numeric.abs());
                assert!(
                    rel <= 1e-6,
                    "case {checked} entry ({t},{k}): analytic {grad} vs numeric {numeric} (rel {rel})"
                );
                entries_checked += 1;
            }
        }
        checked += 1;
    }
    let elapsed = start.elapsed();
    budget("gradient finite differences", elapsed, Duration::from_secs(60));
    println!("[acceptance] gradient vs central finite differences: PASS ({cases} cases, {entries_checked} entries in {elapsed:?})");
}

#[test]
fn adding_variants_never_hurts() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let cases = 500;
    for case in 0..cases {
        let vocab_size = rng.random_range(3..=4);
        let words = rand_words(&mut rng, vocab_size, 3, 2, 3);
        let num_frames = rng.random_range(1..=6);
        let emissions = rand_emissions(&mut rng, num_frames, vocab_size);
        let base_loss = gtc_loss(&build_gtc_graph(&words, vocab_size).unwrap(), &emissions)
            .unwrap()
            .loss;

        // Append a fresh variant to one word.
        let target_word = rng.random_range(0..words.len());
        let extended: Vec<WordAlternatives> = words
            .iter()
            .enumerate()
            .map(|(i, w)| {
                if i != target_word {
                    return w.clone();
                }
                let mut variants = w.variants().to_vec();
                loop {
                    let cand = rand_pronunciation(&mut rng, vocab_size, 3);
                    if !variants.contains(&cand) {
                        variants.push(cand);
                        break;
                    }
                }
                WordAlternatives::new(w.word(), variants).unwrap()
            })
            .collect();
        let extended_loss =
            gtc_loss(&build_gtc_graph(&extended, vocab_size).unwrap(), &emissions)
                .unwrap()
                .loss;
        assert!(
            extended_loss <= base_loss + 1e-12 || base_loss.is_infinite(),
            "case {case}: adding a variant raised the loss {base_loss} -> {extended_loss}"
        );
    }

    // Oracle error rates are non-increasing in n on fixture corpora.
    let fixtures = [
        // References always match the second-ranked variant.
        (
            "w1\t0.9\ta b\nw1\t0.1\ta c\nw2\t0.8\td\nw2\t0.2\te d\n",
            "w1 w2\ta c e d\nw2 w1\td a c\n",
        ),
        // References equal the 1-best concatenations: all depths are 0%.
        (
            "w1\ta b\nw1\tc\nw2\td e\nw2\tf\n",
            "w1 w2\ta b d e\nw2\td e\n",
        ),
        // Mixed: some references need deep variants, some match none.
        (
            "w1\ta\nw1\tb\nw1\tc\nw1\td\nw2\ta b\nw2\tc d\n",
            "w1\tc\nw1 w2\td c d\nw2 w1\tb a d\n",
        ),
    ];
    for (i, (lex_text, transcript_text)) in fixtures.iter().enumerate() {
        let lexicon = parse_lexicon(lex_text.as_bytes()).unwrap();
        let transcripts = parse_transcripts(transcript_text, lexicon.vocab()).unwrap();
        let depths = [
            NBest::Top(1),
            NBest::Top(2),
            NBest::Top(3),
            NBest::All,
        ];
        let rates: Vec<f64> = depths
            .iter()
            .map(|&n| oracle_ler(&lexicon, &transcripts, n).unwrap())
            .collect();
        for pair in rates.windows(2) {
            assert!(
                pair[1] <= pair[0] + 1e-12,
                "fixture {i}: oracle rates not monotone: {rates:?}"
            );
        }
        if i == 1 {
            assert!(rates.iter().all(|&r| r == 0.0), "fixture 1 should be exact: {rates:?}");
        }
    }
    let elapsed = start.elapsed();
    println!("[acceptance] variant monotonicity (loss and oracle error rates): PASS ({cases} cases in {elapsed:?})");
}

#[test]
fn closed_form_spot_values() {
    let start = Instant::now();
    let word = |name: &str, variants: &[&[usize]]| {
        WordAlternatives::new(
            name,
            variants
                .iter()
                .map(|v| Pronunciation::new(v.to_vec()).unwrap())
                .collect(),
        )
        .unwrap()
    };

    // Single "a" over two uniform 1/3 frames: ln 3.
    let g = build_gtc_graph(&[word("w", &[&[1]])], 3).unwrap();
    let loss = gtc_loss(&g, &EmissionMatrix::uniform(2, 3).unwrap()).unwrap().loss;
    assert_eq!(format!("{loss:.6}"), "1.098612");
    let brute = brute_force_loss(&g, &EmissionMatrix::uniform(2, 3).unwrap()).unwrap();
    assert!(rel_diff(loss, brute) <= 1e-10);

    // Word {a, b} over one uniform 1/3 frame: ln 1.5.
    let g = build_gtc_graph(&[word("w", &[&[1], &[2]])], 3).unwrap();
    let loss = gtc_loss(&g, &EmissionMatrix::uniform(1, 3).unwrap()).unwrap().loss;
    assert_eq!(format!("{loss:.6}"), "0.405465");
    let brute = brute_force_loss(&g, &EmissionMatrix::uniform(1, 3).unwrap()).unwrap();
    assert!(rel_diff(loss, brute) <= 1e-10);

    // [{a}, {a}] over three uniform 1/3 frames: only "a . a", ln 27.
    let g = build_gtc_graph(&[word("w", &[&[1]]), word("w", &[&[1]])], 3).unwrap();
    let loss = gtc_loss(&g, &EmissionMatrix::uniform(3, 3).unwrap()).unwrap().loss;
    assert_eq!(format!("{loss:.6}"), "3.295837");
    let brute = brute_force_loss(&g, &EmissionMatrix::uniform(3, 3).unwrap()).unwrap();
    assert!(rel_diff(loss, brute) <= 1e-10);

    println!(
        "[acceptance] closed-form spot values (ln 3, ln 1.5, ln 27): PASS (in {:?})",
        start.elapsed()
    );
}

#[test]
fn multi_variant_training_beats_one_best() {
    let start = Instant::now();
    let epochs = 40;
    let learning_rate = 0.5;

    // Pronunciation variation in the data: the graph objective should win.
    let seeds = [1u64, 2, 3, 4, 5];
    let mut ctc_per = Vec::new();
    let mut gtc_per = Vec::new();
    for &seed in &seeds {
        let config = SynthConfig {
            variant_prob: 0.5,
            seed,
            ..SynthConfig::default()
        };
        let outcomes = run_experiment(
            &config,
            &[LossMode::CtcOneBest, LossMode::GtcNBest(NBest::All)],
            epochs,
            learning_rate,
        )
        .unwrap();
        ctc_per.push(outcomes[0].per);
        gtc_per.push(outcomes[1].per);
    }
    let median = |xs: &[f64]| {
        let mut s = xs.to_vec();
        s.sort_by(f64::total_cmp);
        s[s.len() / 2]
    };
    let (m_ctc, m_gtc) = (median(&ctc_per), median(&gtc_per));
    assert!(
        m_gtc < m_ctc,
        "median PER with variants {m_gtc} not below 1-best {m_ctc} (ctc {ctc_per:?}, gtc {gtc_per:?})"
    );

    // Without variation in the data, the 1-best objective and the graph
    // objective restricted to one variant are the same computation and train
    // identical models from a shared seed.
    let config = SynthConfig {
        variant_prob: 0.0,
        seed: 9,
        ..SynthConfig::default()
    };
    let corpus = generate_corpus(&config).unwrap();
    let init = FrameModel::new_random(config.vocab_size, config.template_dim, 42);
    let (a, _) = train(&init, &corpus, LossMode::CtcOneBest, 5, learning_rate).unwrap();
    let (b, _) = train(&init, &corpus, LossMode::GtcNBest(NBest::Top(1)), 5, learning_rate)
        .unwrap();
    assert_eq!(a, b, "modes diverged without pronunciation variation");

    let elapsed = start.elapsed();
    budget("directional training comparison", elapsed, Duration::from_secs(600));
    println!(
        "[acceptance] multi-variant training beats 1-best (median PER {m_gtc:.1} < {m_ctc:.1} over {} seeds): PASS (in {elapsed:?})",
        seeds.len()
    );
}

#[test]
fn graph_accepts_exactly_the_variant_concatenations() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    let cases = 500;
    for case in 0..cases {
        let vocab_size = rng.random_range(3..=4);
        let words = rand_words(&mut rng, vocab_size, 3, 3, 3);
        let graph = build_gtc_graph(&words, vocab_size).unwrap();
        let accepted = enumerate_collapsed(&graph, 10_000).unwrap();
        assert_eq!(
            accepted,
            cross_product(&words),
            "case {case}: accepted set differs from variant concatenations"
        );
    }

    // The two-word, two-variant example: {ab, ac} x {de, fe}.
    let word = |name: &str, variants: &[&[usize]]| {
        WordAlternatives::new(
            name,
            variants
                .iter()
                .map(|v| Pronunciation::new(v.to_vec()).unwrap())
                .collect(),
        )
        .unwrap()
    };
    let words = [
        word("w1", &[&[1, 2], &[1, 3]]),
        word("w2", &[&[4, 5], &[6, 5]]),
    ];
    let graph = build_gtc_graph(&words, 7).unwrap();
    let accepted = enumerate_collapsed(&graph, 100).unwrap();
    assert_eq!(accepted.len(), 4);
    assert_eq!(accepted, cross_product(&words));

    let elapsed = start.elapsed();
    println!("[acceptance] graph accepts exactly the variant concatenations: PASS ({cases} cases in {elapsed:?})");
}
