//! Synthetic corpus and dataset generators shared by the integration and
//! acceptance tests. Everything is a pure function of its seed.
#![allow(dead_code)] // each test binary uses a different subset

use rand::prelude::*;
use rand_chacha::ChaCha12Rng;

use optavail::corpus::{McqItem, Passage};

/// A pseudo-random word from a closed vocabulary.
fn vocab_word(rng: &mut ChaCha12Rng, vocab_size: usize) -> String {
    format!("word{:04}", rng.random_range(0..vocab_size))
}

/// Generic corpus: `n` passages of 6..=12 vocabulary words each.
pub fn random_corpus(n: usize, seed: u64) -> Vec<Passage> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let len = rng.random_range(6..=12);
            let words: Vec<String> = (0..len).map(|_| vocab_word(&mut rng, 2000)).collect();
            Passage {
                id: format!("p{i:05}"),
                text: words.join(" "),
            }
        })
        .collect()
}

/// Generic MCQ dataset: `n` items alternating between 3 and 4 options,
/// each option two vocabulary words, correct index rotating.
pub fn random_mcqs(n: usize, seed: u64) -> Vec<McqItem> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let option_count = if i % 2 == 0 { 3 } else { 4 };
            let options: Vec<String> = (0..option_count)
                .map(|j| {
                    format!(
                        "{} {} q{i}o{j}",
                        vocab_word(&mut rng, 2000),
                        vocab_word(&mut rng, 2000)
                    )
                })
                .collect();
            McqItem {
                id: format!("q{i:04}"),
                stem: format!(
                    "Question {i} about {} and {}?",
                    vocab_word(&mut rng, 2000),
                    vocab_word(&mut rng, 2000)
                ),
                options,
                correct_index: i % option_count,
                selection_rates: None,
            }
        })
        .collect()
}

/// Planted-frequency world: per item, 60 passages carry its three option
/// concepts in ratio 6:3:1 (36 / 18 / 6, interleaved, one unique filler
/// token per passage), so ground-truth availability at k = 60 is
/// (0.6, 0.3, 0.1) in stored option order. Option tokens are unique per
/// item, keeping retrieval per-item.
pub fn planted_ratio_world(item_count: usize) -> (Vec<Passage>, Vec<McqItem>) {
    let mut passages = Vec::with_capacity(item_count * 60);
    let mut items = Vec::with_capacity(item_count);
    for i in 0..item_count {
        let options = [
            format!("alpha{i} bravo{i} casa{i}"),
            format!("delta{i} echo{i} fira{i}"),
            format!("golf{i} hotel{i} inka{i}"),
        ];
        for p in 0..60 {
            let concept = match p % 10 {
                0..=5 => &options[0],
                6..=8 => &options[1],
                _ => &options[2],
            };
            passages.push(Passage {
                id: format!("i{i:04}p{p:03}"),
                text: format!("{concept} filler{i}x{p}"),
            });
        }
        items.push(McqItem {
            id: format!("q{i:04}"),
            stem: format!("Which concept belongs to slot {i}?"),
            options: options.to_vec(),
            correct_index: 0,
            selection_rates: None,
        });
    }
    (passages, items)
}

/// Stem-coupled world: per item, 60 passages (20 per option) where the
/// stem tokens co-occur only with correct-answer passages. Distractor
/// passages are lexically tighter, so an options-only query prefers them;
/// prepending the stem flips retrieval toward the correct answer.
pub fn stem_coupled_world(item_count: usize) -> (Vec<Passage>, Vec<McqItem>) {
    let mut passages = Vec::with_capacity(item_count * 60);
    let mut items = Vec::with_capacity(item_count);
    for i in 0..item_count {
        let stem_tokens = format!("stemtok{i} quiz{i}");
        let options = [
            format!("corr{i} one{i}"),
            format!("distb{i} two{i}"),
            format!("distc{i} three{i}"),
        ];
        for p in 0..20 {
            passages.push(Passage {
                id: format!("i{i:04}a{p:02}"),
                text: format!("{} {}", options[0], stem_tokens),
            });
            passages.push(Passage {
                id: format!("i{i:04}b{p:02}"),
                text: format!("{} fillb{i}", options[1]),
            });
            passages.push(Passage {
                id: format!("i{i:04}c{p:02}"),
                text: format!("{} fillc{i}", options[2]),
            });
        }
        items.push(McqItem {
            id: format!("q{i:04}"),
            stem: format!("As asked by {stem_tokens}, which is right?"),
            options: options.to_vec(),
            correct_index: 0,
            selection_rates: None,
        });
    }
    (passages, items)
}
