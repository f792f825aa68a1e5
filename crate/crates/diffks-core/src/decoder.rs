//! Knowledge-conditioned GRU decoder with generation and copy paths.
//!
//! The state starts from an affine map of [context; selected knowledge] and
//! is updated by a GRU fed [previous word embedding; selected knowledge].
//! Each step scores the whole vocabulary (generation) and every token of the
//! selected sentence (copy); the two exponential families share one
//! normalization.

use rand::Rng;

use crate::data::{EOS, SOS};
use crate::encoder::{glorot, gru_cell, zeros_param, GruParams};
use crate::tensor::{concat, copy_softmax, dropout, Tensor};

#[derive(Debug, Clone)]
pub struct DecoderParams {
    /// Maps [context; knowledge] (4H) to the initial state (D), no activation.
    pub init_weight: Tensor,
    pub init_bias: Tensor,
    /// Input dim E + 2H, hidden D.
    pub gru: GruParams,
    /// Generation projection [vocab, D].
    pub out_weight: Tensor,
    pub out_bias: Tensor,
    /// Copy projection [D, 2H], tanh-activated.
    pub copy_weight: Tensor,
}

impl DecoderParams {
    pub fn init<R: Rng>(
        vocab: usize,
        embedding_dim: usize,
        hidden: usize,
        decoder_hidden: usize,
        rng: &mut R,
    ) -> DecoderParams {
        let h2 = 2 * hidden;
        DecoderParams {
            init_weight: glorot(decoder_hidden, 2 * h2, rng),
            init_bias: zeros_param(&[decoder_hidden]),
            gru: GruParams::init(embedding_dim + h2, decoder_hidden, rng),
            out_weight: glorot(vocab, decoder_hidden, rng),
            out_bias: zeros_param(&[vocab]),
            copy_weight: glorot(decoder_hidden, h2, rng),
        }
    }

    pub fn named(&self) -> Vec<(String, Tensor)> {
        let mut v = vec![
            ("decoder.init_weight".to_string(), self.init_weight.clone()),
            ("decoder.init_bias".to_string(), self.init_bias.clone()),
            ("decoder.out_weight".to_string(), self.out_weight.clone()),
            ("decoder.out_bias".to_string(), self.out_bias.clone()),
            ("decoder.copy_weight".to_string(), self.copy_weight.clone()),
        ];
        v.extend(self.gru.named("decoder.gru"));
        v
    }

    fn vocab(&self) -> usize {
        self.out_weight.shape()[0]
    }
}

/// s_0 = W_D [context; knowledge] + b_D.
pub fn init_state(p: &DecoderParams, context: &Tensor, knowledge: &Tensor) -> Tensor {
    p.init_weight.matvec(&concat(&[context.clone(), knowledge.clone()], 0)).add(&p.init_bias)
}

#[derive(Debug, Clone)]
pub struct StepOutput {
    pub state: Tensor,
    /// Unnormalized generation scores over the vocabulary.
    pub gen_scores: Tensor,
    /// Per-occurrence copy scores, aligned with the selected sentence.
    pub copy_scores: Tensor,
    /// Combined probability distribution over the vocabulary.
    pub probs: Tensor,
    token_ids: Vec<usize>,
}

impl StepOutput {
    /// Copy scores summed per distinct vocabulary word (duplicate
    /// occurrences add up), as (word id, score) in first-occurrence order.
    pub fn copy_scores_by_word(&self) -> Vec<(usize, f64)> {
        let q = self.copy_scores.to_vec();
        let mut out: Vec<(usize, f64)> = Vec::new();
        for (j, &tok) in self.token_ids.iter().enumerate() {
            match out.iter_mut().find(|(w, _)| *w == tok) {
                Some((_, s)) => *s += q[j],
                None => out.push((tok, q[j])),
            }
        }
        out
    }
}

/// The copy+generation distribution for a given state. Split out so eval
/// paths can probe distributions while holding the state fixed.
pub fn output_distribution(
    p: &DecoderParams,
    state: &Tensor,
    knowledge_token_states: &[Tensor],
    knowledge_ids: &[usize],
) -> (Tensor, Tensor, Tensor) {
    assert_eq!(knowledge_token_states.len(), knowledge_ids.len(), "one state per knowledge token");
    let gen_scores = p.out_weight.matvec(state).add(&p.out_bias);
    let per_token: Vec<Tensor> = knowledge_token_states
        .iter()
        .map(|h| state.dot(&p.copy_weight.matvec(h).tanh()))
        .collect();
    let copy_scores = concat(&per_token, 0);
    let probs = copy_softmax(&gen_scores, &copy_scores, knowledge_ids);
    (gen_scores, copy_scores, probs)
}

/// One teacher-forced or free-running step.
#[allow(clippy::too_many_arguments)]
pub fn decode_step<R: Rng>(
    p: &DecoderParams,
    s_prev: &Tensor,
    y_prev: usize,
    embedding: &Tensor,
    knowledge: &Tensor,
    knowledge_token_states: &[Tensor],
    knowledge_ids: &[usize],
    dropout_rate: f64,
    train: bool,
    rng: &mut R,
) -> StepOutput {
    assert!(y_prev < p.vocab(), "decode_step: token id {y_prev} outside vocabulary");
    let emb = dropout(&embedding.row(y_prev), dropout_rate, train, rng);
    let input = concat(&[emb, knowledge.clone()], 0);
    let state = gru_cell(&input, s_prev, &p.gru);
    let (gen_scores, copy_scores, probs) = output_distribution(p, &state, knowledge_token_states, knowledge_ids);
    StepOutput { state, gen_scores, copy_scores, probs, token_ids: knowledge_ids.to_vec() }
}

/// Greedy decoding from SOS; stops at EOS or `max_len` emitted tokens. The
/// returned sequence contains neither SOS nor EOS. Ties in the argmax break
/// to the lowest token id.
#[allow(clippy::too_many_arguments)]
pub fn greedy_decode(
    p: &DecoderParams,
    embedding: &Tensor,
    context: &Tensor,
    knowledge: &Tensor,
    knowledge_token_states: &[Tensor],
    knowledge_ids: &[usize],
    max_len: usize,
) -> Vec<usize> {
    assert!(max_len >= 1, "greedy_decode: max_len must be at least 1");
    let mut rng = crate::rng::stream(0, crate::rng::Purpose::Dropout, 0); // unused: inference
    let mut state = init_state(p, context, knowledge);
    let mut prev = SOS;
    let mut out = Vec::new();
    for _ in 0..max_len {
        let step = decode_step(
            p,
            &state,
            prev,
            embedding,
            knowledge,
            knowledge_token_states,
            knowledge_ids,
            0.0,
            false,
            &mut rng,
        );
        let probs = step.probs.values();
        let mut best = 0;
        let mut best_p = f64::NEG_INFINITY;
        for (w, &pw) in probs.iter().enumerate() {
            if pw > best_p {
                best = w;
                best_p = pw;
            }
        }
        drop(probs);
        if best == EOS {
            break;
        }
        out.push(best);
        state = step.state;
        prev = best;
    }
    out
}

/// Teacher-forced negative log likelihood: the step distributions must line
/// up with the gold tokens plus a final EOS target.
pub fn sequence_nll(gold: &[usize], step_probs: &[Tensor]) -> Tensor {
    assert_eq!(
        step_probs.len(),
        gold.len() + 1,
        "sequence_nll: {} distributions cannot cover {} gold tokens plus EOS",
        step_probs.len(),
        gold.len()
    );
    let mut loss = Tensor::scalar(0.0);
    for (t, dist) in step_probs.iter().enumerate() {
        let target = if t < gold.len() { gold[t] } else { EOS };
        loss = loss.add(&dist.pick(target).log().scale(-1.0));
    }
    loss
}
