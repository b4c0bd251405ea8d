//! Synthetic bitext for demos, tests and benchmarks.

use rand::Rng;

use crate::rng::rng_for;

const TAG_TOY: u64 = 0x746f79;

/// Roughly Zipfian token index in `0..vocab`: `floor(vocab^u) - 1`.
fn zipfish<R: Rng>(rng: &mut R, vocab: usize) -> usize {
    let u: f64 = rng.random();
    ((vocab as f64).powf(u).floor() as usize).saturating_sub(1).min(vocab - 1)
}

/// `n` sentence pairs as (source text, target text), one sentence per line.
/// Source lengths are uniform in 3..=40; targets track the source length.
pub fn toy_bitext(n: usize, vocab: usize, seed: u64) -> (String, String) {
    let mut rng = rng_for(seed, &[TAG_TOY]);
    let mut src = String::new();
    let mut tgt = String::new();
    for _ in 0..n {
        let len = rng.random_range(3..=40usize);
        let tlen = (len as i64 + rng.random_range(-3..=3i64)).max(1) as usize;
        let s: Vec<String> = (0..len).map(|_| format!("s{}", zipfish(&mut rng, vocab))).collect();
        let t: Vec<String> = (0..tlen).map(|_| format!("t{}", zipfish(&mut rng, vocab))).collect();
        src.push_str(&s.join(" "));
        src.push('\n');
        tgt.push_str(&t.join(" "));
        tgt.push('\n');
    }
    (src, tgt)
}

/// Fake one-best probabilities for a toy corpus: longer sentences get lower
/// confidence. Values lie in `(0, 1]`.
pub fn toy_one_best(src_lens: &[usize], seed: u64) -> Vec<f64> {
    let mut rng = rng_for(seed, &[TAG_TOY, 1]);
    src_lens
        .iter()
        .map(|&len| {
            let noise: f64 = rng.random_range(0.5..1.5);
            (-(len as f64) * 0.15 * noise).exp()
        })
        .collect()
}
