//! Corpus-level BLEU with brevity penalty, ROUGE-2 F1, and selection
//! accuracy bucketed by turn position.

use std::collections::HashMap;

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts: HashMap<&[String], usize> = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Corpus-level BLEU-N: geometric mean of modified n-gram precisions with
/// corpus-level clipping, times the brevity penalty exp(1 - r/c) when the
/// candidates are shorter overall. An order with zero matches contributes
/// an epsilon of 1e-9 instead (no sentence-level smoothing).
pub fn corpus_bleu(candidates: &[Vec<String>], references: &[Vec<String>], max_n: usize) -> f64 {
    assert!(!candidates.is_empty(), "corpus_bleu: empty corpus");
    assert_eq!(candidates.len(), references.len(), "corpus_bleu: candidate/reference mismatch");
    assert!(max_n >= 1, "corpus_bleu: max_n must be at least 1");
    const EPSILON: f64 = 1e-9;

    let cand_len: usize = candidates.iter().map(Vec::len).sum();
    let ref_len: usize = references.iter().map(Vec::len).sum();
    if cand_len == 0 {
        return 0.0;
    }

    let mut log_precision_sum = 0.0;
    for n in 1..=max_n {
        let mut matched = 0usize;
        let mut total = 0usize;
        for (cand, reference) in candidates.iter().zip(references) {
            let cand_counts = ngram_counts(cand, n);
            let ref_counts = ngram_counts(reference, n);
            for (gram, &count) in &cand_counts {
                matched += count.min(ref_counts.get(gram).copied().unwrap_or(0));
            }
            total += cand.len().saturating_sub(n - 1);
        }
        let p = if total == 0 || matched == 0 { EPSILON } else { matched as f64 / total as f64 };
        log_precision_sum += p.ln();
    }
    let brevity = if cand_len < ref_len { (1.0 - ref_len as f64 / cand_len as f64).exp() } else { 1.0 };
    brevity * (log_precision_sum / max_n as f64).exp()
}

/// ROUGE-2 F1 for one candidate/reference pair, with clipped bigram counts.
/// Either side shorter than two tokens scores zero.
pub fn rouge2(candidate: &[String], reference: &[String]) -> f64 {
    if candidate.len() < 2 || reference.len() < 2 {
        return 0.0;
    }
    let cand_counts = ngram_counts(candidate, 2);
    let ref_counts = ngram_counts(reference, 2);
    let mut overlap = 0usize;
    for (gram, &count) in &cand_counts {
        overlap += count.min(ref_counts.get(gram).copied().unwrap_or(0));
    }
    if overlap == 0 {
        return 0.0;
    }
    let precision = overlap as f64 / (candidate.len() - 1) as f64;
    let recall = overlap as f64 / (reference.len() - 1) as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Mean pairwise ROUGE-2 over a corpus.
pub fn corpus_rouge2(candidates: &[Vec<String>], references: &[Vec<String>]) -> f64 {
    assert!(!candidates.is_empty(), "corpus_rouge2: empty corpus");
    assert_eq!(candidates.len(), references.len(), "corpus_rouge2: candidate/reference mismatch");
    let sum: f64 = candidates.iter().zip(references).map(|(c, r)| rouge2(c, r)).sum();
    sum / candidates.len() as f64
}

#[derive(Debug, Clone)]
pub struct AccuracyReport {
    pub overall: f64,
    /// accuracy at turn positions 1..=max, aligned with `counts`.
    pub by_turn: Vec<f64>,
    pub counts: Vec<usize>,
}

impl AccuracyReport {
    /// Accuracy over turn positions >= `min_turn` (1-based).
    pub fn from_turn(&self, min_turn: usize) -> f64 {
        let mut hit = 0.0;
        let mut n = 0usize;
        for (idx, (&acc, &count)) in self.by_turn.iter().zip(&self.counts).enumerate() {
            if idx + 1 >= min_turn {
                hit += acc * count as f64;
                n += count;
            }
        }
        if n == 0 {
            0.0
        } else {
            hit / n as f64
        }
    }
}

/// Exact-match selection accuracy, overall and bucketed by turn position.
/// The two lists must be aligned pair by pair.
pub fn selection_accuracy(pred: &[(usize, usize)], gold: &[(usize, usize)]) -> AccuracyReport {
    assert_eq!(pred.len(), gold.len(), "selection_accuracy: misaligned lists");
    assert!(!pred.is_empty(), "selection_accuracy: no turns");
    let max_turn = pred.iter().map(|&(t, _)| t).max().unwrap();
    let mut hits = vec![0usize; max_turn];
    let mut counts = vec![0usize; max_turn];
    let mut total_hits = 0usize;
    for (&(tp, p), &(tg, g)) in pred.iter().zip(gold) {
        assert_eq!(tp, tg, "selection_accuracy: misaligned turn positions");
        assert!(tp >= 1, "turn positions are 1-based");
        counts[tp - 1] += 1;
        if p == g {
            hits[tp - 1] += 1;
            total_hits += 1;
        }
    }
    let by_turn = hits
        .iter()
        .zip(&counts)
        .map(|(&h, &c)| if c == 0 { 0.0 } else { h as f64 / c as f64 })
        .collect();
    AccuracyReport { overall: total_hits as f64 / pred.len() as f64, by_turn, counts }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        s.split(' ').map(str::to_string).collect()
    }

    #[test]
    fn identical_corpus_scores_one() {
        let c = vec![toks("the cat sat down"), toks("a dog barked loudly")];
        assert!((corpus_bleu(&c, &c, 2) - 1.0).abs() < 1e-12);
        assert!((corpus_bleu(&c, &c, 4) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_overlap_is_epsilon_floored() {
        let c = vec![toks("aa bb cc")];
        let r = vec![toks("xx yy zz")];
        let b = corpus_bleu(&c, &r, 2);
        assert!(b < 1e-8, "{b}");
        assert!(b > 0.0);
    }

    #[test]
    fn worked_bleu2_example() {
        // candidate "the cat sat" vs reference "the cat sat down":
        // p1 = 3/3, p2 = 2/2, BP = exp(1 - 4/3) => BLEU-2 = exp(-1/3).
        let c = vec![toks("the cat sat")];
        let r = vec![toks("the cat sat down")];
        let b = corpus_bleu(&c, &r, 2);
        assert!((b - (-1.0f64 / 3.0).exp()).abs() < 1e-12);
        assert!((b - 0.7165).abs() < 1e-4);
    }

    #[test]
    fn clipping_limits_repeated_ngrams() {
        // "the the the" vs "the cat": only one "the" may match.
        let c = vec![toks("the the the")];
        let r = vec![toks("the cat")];
        let mut log_p1 = ((1.0f64) / 3.0).ln(); // clipped unigram precision
        let p2: f64 = 1e-9; // no bigram overlap
        log_p1 += p2.ln();
        let bp = (1.0f64 - 2.0 / 3.0).exp().min(1.0); // c=3 > r=2, so BP=1
        assert!(bp <= 1.0);
        let want = (log_p1 / 2.0).exp();
        let got = corpus_bleu(&c, &r, 2);
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }

    #[test]
    fn rouge_identical_is_one() {
        let s = toks("a b c d");
        assert_eq!(rouge2(&s, &s), 1.0);
    }

    #[test]
    fn rouge_disjoint_is_zero() {
        assert_eq!(rouge2(&toks("a b c"), &toks("x y z")), 0.0);
    }

    #[test]
    fn worked_rouge_example() {
        // "a b c d" vs "a b x d": 1 shared bigram of 3 each side.
        let f1 = rouge2(&toks("a b c d"), &toks("a b x d"));
        assert!((f1 - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn short_sides_score_zero() {
        assert_eq!(rouge2(&toks("a"), &toks("a b c")), 0.0);
        assert_eq!(rouge2(&toks("a b c"), &toks("a")), 0.0);
    }

    #[test]
    fn accuracy_all_match() {
        let pairs: Vec<(usize, usize)> = vec![(1, 0), (2, 3), (3, 1)];
        let rep = selection_accuracy(&pairs, &pairs);
        assert_eq!(rep.overall, 1.0);
        assert_eq!(rep.by_turn, vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn accuracy_fraction_matches_hand_count() {
        // 51 of 200 correct -> 0.255
        let pred: Vec<(usize, usize)> = (0..200).map(|i| (1, if i < 51 { 1 } else { 2 })).collect();
        let gold: Vec<(usize, usize)> = (0..200).map(|_| (1, 1)).collect();
        let rep = selection_accuracy(&pred, &gold);
        assert!((rep.overall - 0.255).abs() < 1e-12);
    }

    #[test]
    fn per_turn_buckets_aggregate_to_overall() {
        // turn 1 all correct, turn 2 all wrong, equal counts
        let pred: Vec<(usize, usize)> = vec![(1, 0), (1, 1), (2, 5), (2, 5)];
        let gold: Vec<(usize, usize)> = vec![(1, 0), (1, 1), (2, 0), (2, 1)];
        let rep = selection_accuracy(&pred, &gold);
        assert_eq!(rep.by_turn, vec![1.0, 0.0]);
        assert_eq!(rep.overall, 0.5);
        // weighted aggregation reproduces the overall number
        let weighted: f64 = rep
            .by_turn
            .iter()
            .zip(&rep.counts)
            .map(|(a, &c)| a * c as f64)
            .sum::<f64>()
            / rep.counts.iter().sum::<usize>() as f64;
        assert!((weighted - rep.overall).abs() < 1e-12);
        assert_eq!(rep.from_turn(2), 0.0);
        assert_eq!(rep.from_turn(1), 0.5);
    }

    #[test]
    #[should_panic(expected = "misaligned")]
    fn misaligned_lists_are_rejected() {
        let _ = selection_accuracy(&[(1, 0)], &[(2, 0)]);
    }

    #[test]
    #[should_panic(expected = "empty corpus")]
    fn empty_corpus_is_rejected() {
        let _ = corpus_bleu(&[], &[], 2);
    }
}
