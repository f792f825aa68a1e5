//! Controlled synthetic tasks for probing the two selection pathways.
//!
//! Both corpora reuse one fixed pool of K distinct three-token sentences per
//! turn and verbatim-copy the gold sentence as the response. They differ in
//! where the selection signal lives:
//!
//! * transition: posts are pure noise; the gold index rotates by one each
//!   turn, so only the previously selected knowledge predicts the next gold.
//! * context: golds are drawn independently each turn; a keyword planted in
//!   the post names the gold, so only the context predicts it.

use rand::Rng;

use super::corpus::{Dialogue, Turn};
use crate::rng::{stream, Purpose};

const NOISE_WORDS: usize = 20;
const POST_LEN: usize = 4;

// Four tokens per sentence so 4-gram metrics are meaningful on the copied
// responses.
fn pool(k: usize) -> Vec<Vec<String>> {
    (0..k)
        .map(|i| {
            vec![format!("topic{i}"), format!("fact{i}a"), format!("fact{i}b"), format!("fact{i}c")]
        })
        .collect()
}

fn noise_token<R: Rng>(rng: &mut R) -> String {
    format!("blah{}", rng.random_range(0..NOISE_WORDS))
}

fn noise_post<R: Rng>(rng: &mut R) -> Vec<String> {
    (0..POST_LEN).map(|_| noise_token(rng)).collect()
}

/// Gold at turn 1 is uniform random; afterwards it steps to the next pool
/// index. Posts carry no information about the gold.
pub fn make_synthetic_transition_corpus(k: usize, n: usize, t: usize, seed: u64) -> Vec<Dialogue> {
    assert!(k >= 2, "transition corpus needs at least 2 knowledge sentences");
    assert!(t >= 2, "transition corpus needs at least 2 turns");
    let sentences = pool(k);
    let mut rng = stream(seed, Purpose::Synthetic, 0);
    (0..n)
        .map(|d| {
            let mut gold = rng.random_range(0..k);
            let turns = (0..t)
                .map(|turn| {
                    if turn > 0 {
                        gold = (gold + 1) % k;
                    }
                    Turn {
                        post: noise_post(&mut rng),
                        response: sentences[gold].clone(),
                        knowledge: sentences.clone(),
                        gold_index: Some(gold),
                    }
                })
                .collect();
            Dialogue { id: format!("transition-{d}"), turns }
        })
        .collect()
}

/// Golds are independent across turns; the post contains the token
/// "topic{gold}" at a random position among noise. Selection history carries
/// no information.
pub fn make_synthetic_context_corpus(k: usize, n: usize, t: usize, seed: u64) -> Vec<Dialogue> {
    assert!(k >= 2, "context corpus needs at least 2 knowledge sentences");
    assert!(t >= 2, "context corpus needs at least 2 turns");
    let sentences = pool(k);
    let mut rng = stream(seed, Purpose::Synthetic, 1);
    (0..n)
        .map(|d| {
            let turns = (0..t)
                .map(|_| {
                    let gold = rng.random_range(0..k);
                    let mut post = noise_post(&mut rng);
                    let slot = rng.random_range(0..=post.len());
                    post.insert(slot, format!("topic{gold}"));
                    Turn {
                        post,
                        response: sentences[gold].clone(),
                        knowledge: sentences.clone(),
                        gold_index: Some(gold),
                    }
                })
                .collect();
            Dialogue { id: format!("context-{d}"), turns }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::corpus::save_corpus;

    #[test]
    fn transition_golds_rotate() {
        let corpus = make_synthetic_transition_corpus(5, 20, 4, 3);
        for d in &corpus {
            let golds: Vec<usize> = d.turns.iter().map(|t| t.gold_index.unwrap()).collect();
            for w in golds.windows(2) {
                assert_eq!(w[1], (w[0] + 1) % 5);
            }
        }
        // e.g. a dialogue starting at 3 runs 3,4,0,1
        let from3: Vec<usize> = {
            let mut g = 3;
            (0..4)
                .map(|i| {
                    if i > 0 {
                        g = (g + 1) % 5;
                    }
                    g
                })
                .collect()
        };
        assert_eq!(from3, vec![3, 4, 0, 1]);
    }

    #[test]
    fn transition_counts() {
        let corpus = make_synthetic_transition_corpus(5, 200, 4, 7);
        assert_eq!(corpus.len(), 200);
        let turns: usize = corpus.iter().map(|d| d.turns.len()).sum();
        assert_eq!(turns, 800);
    }

    #[test]
    fn transition_posts_are_noise_only() {
        let corpus = make_synthetic_transition_corpus(4, 50, 3, 9);
        for d in &corpus {
            for t in &d.turns {
                assert!(t.post.iter().all(|tok| tok.starts_with("blah")));
            }
        }
    }

    #[test]
    fn context_keyword_names_gold() {
        let corpus = make_synthetic_context_corpus(5, 50, 4, 11);
        for d in &corpus {
            for t in &d.turns {
                let gold = t.gold_index.unwrap();
                let keyword = format!("topic{gold}");
                assert_eq!(t.post.iter().filter(|tok| tok.starts_with("topic")).count(), 1);
                assert!(t.post.contains(&keyword));
                assert_eq!(t.response, t.knowledge[gold]);
            }
        }
        let turns: usize = corpus.iter().map(|d| d.turns.len()).sum();
        assert_eq!(turns, 200 * 0 + 50 * 4);
    }

    #[test]
    fn same_seed_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let (p1, p2) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
        save_corpus(&p1, &make_synthetic_transition_corpus(5, 30, 4, 42)).unwrap();
        save_corpus(&p2, &make_synthetic_transition_corpus(5, 30, 4, 42)).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
        save_corpus(&p2, &make_synthetic_transition_corpus(5, 30, 4, 43)).unwrap();
        assert_ne!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }

    #[test]
    #[should_panic(expected = "at least 2 knowledge")]
    fn k1_is_rejected() {
        let _ = make_synthetic_transition_corpus(1, 5, 3, 0);
    }
}
