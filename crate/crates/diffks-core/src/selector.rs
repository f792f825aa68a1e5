//! Difference-aware knowledge selection.
//!
//! Each candidate is compared against the knowledge chosen in previous turns
//! through Diff(x, y) = tanh(F([x - y; x .* y])), accumulated over up to M
//! turns of history. The fused variant folds that differential signal into
//! one attention score; the disentangled variant keeps two independent
//! scorers (a parameter-free contextual dot product and a differential
//! attention) and sums their scores, which is what makes the ablations
//! meaningful.

use rand::Rng;

use crate::config::{Ablation, SelectorVariant};
use crate::encoder::{glorot, glorot_vec, zeros_param, TurnEncoding};
use crate::tensor::{concat, masked_softmax, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Additive attention: v . tanh(Wq q + Wk k).
#[derive(Debug, Clone)]
pub struct AttentionParams {
    pub v: Tensor,       // [2H]
    pub w_query: Tensor, // [2H, 2H]
    pub w_key: Tensor,   // [2H, 4H]
}

impl AttentionParams {
    fn init<R: Rng>(h2: usize, rng: &mut R) -> AttentionParams {
        AttentionParams {
            v: glorot_vec(h2, rng),
            w_query: glorot(h2, h2, rng),
            w_key: glorot(h2, 2 * h2, rng),
        }
    }

    fn score(&self, query: &Tensor, key: &Tensor) -> Tensor {
        self.v.dot(&self.w_query.matvec(query).add(&self.w_key.matvec(key)).tanh())
    }

    fn named(&self, prefix: &str) -> Vec<(String, Tensor)> {
        vec![
            (format!("{prefix}.v"), self.v.clone()),
            (format!("{prefix}.w_query"), self.w_query.clone()),
            (format!("{prefix}.w_key"), self.w_key.clone()),
        ]
    }
}

#[derive(Debug, Clone)]
pub struct SelectorParams {
    /// Projection F of [x - y; x .* y] back to 2H, tanh-activated.
    pub diff_weight: Tensor, // [2H, 4H]
    pub diff_bias: Tensor, // [2H]
    /// Scorer of the fused variant; queries with the context.
    pub fused: AttentionParams,
    /// Scorer of the disentangled variant; queries with the previous
    /// selection. Never shares parameters with the fused scorer.
    pub differential: AttentionParams,
}

impl SelectorParams {
    pub fn init<R: Rng>(hidden: usize, rng: &mut R) -> SelectorParams {
        let h2 = 2 * hidden;
        SelectorParams {
            diff_weight: glorot(h2, 2 * h2, rng),
            diff_bias: zeros_param(&[h2]),
            fused: AttentionParams::init(h2, rng),
            differential: AttentionParams::init(h2, rng),
        }
    }

    pub fn named(&self) -> Vec<(String, Tensor)> {
        let mut v = vec![
            ("selector.diff_weight".to_string(), self.diff_weight.clone()),
            ("selector.diff_bias".to_string(), self.diff_bias.clone()),
        ];
        v.extend(self.fused.named("selector.fused"));
        v.extend(self.differential.named("selector.differential"));
        v
    }
}

/// Diff(x, y) = tanh(F [x - y; x .* y] + b).
pub fn diff(x: &Tensor, y: &Tensor, weight: &Tensor, bias: &Tensor) -> Tensor {
    assert_eq!(x.shape(), y.shape(), "diff: operand shapes differ");
    let features = concat(&[x.sub(y), x.mul(y)], 0);
    weight.matvec(&features).add(bias).tanh()
}

/// Rolling selection history for one dialogue.
#[derive(Debug, Clone)]
pub struct SelectionState {
    /// Selected-knowledge representations, newest first, at most M.
    history: Vec<Tensor>,
    /// Mixing weights over M history slots, newest first.
    weights: Vec<f64>,
    turn: usize,
}

impl SelectionState {
    pub fn new(m: usize, weights: Vec<f64>) -> SelectionState {
        assert!(m >= 1, "selection history depth must be at least 1");
        assert_eq!(weights.len(), m, "one weight per history slot");
        SelectionState { history: Vec::with_capacity(m), weights, turn: 1 }
    }

    /// 1-based index of the upcoming turn.
    pub fn turn(&self) -> usize {
        self.turn
    }

    pub fn history_len(&self) -> usize {
        self.history.len()
    }

    /// Most recent selection, if any.
    pub fn previous(&self) -> Option<&Tensor> {
        self.history.first()
    }

    pub fn advance(&mut self, representation: Tensor) {
        self.history.insert(0, representation);
        self.history.truncate(self.weights.len());
        self.turn += 1;
    }
}

/// Weighted difference of a candidate from the selection history. The first
/// turn has no history and yields an exact zero vector. With fewer than M
/// entries the weights of the available ones are renormalized to sum to 1;
/// if they sum to zero the result is the zero vector again.
pub fn accumulate_difference(
    state: &SelectionState,
    correlated: &Tensor,
    weight: &Tensor,
    bias: &Tensor,
) -> Tensor {
    if state.history.is_empty() {
        return Tensor::zeros(correlated.shape());
    }
    let avail = state.history.len();
    let total: f64 = state.weights[..avail].iter().sum();
    if total == 0.0 {
        return Tensor::zeros(correlated.shape());
    }
    let mut acc: Option<Tensor> = None;
    for (h, &w) in state.history.iter().zip(&state.weights) {
        if w == 0.0 {
            continue;
        }
        let term = diff(h, correlated, weight, bias).scale(w / total);
        acc = Some(match acc {
            Some(a) => a.add(&term),
            None => term,
        });
    }
    acc.expect("at least one positive weight")
}

/// Fused score: the context queries the difference-enhanced candidate.
pub fn score_fused(p: &SelectorParams, context: &Tensor, candidate: &Tensor, difference: &Tensor) -> Tensor {
    p.fused.score(context, &concat(&[candidate.clone(), difference.clone()], 0))
}

/// Contextual score: plain dot product, no parameters.
pub fn score_contextual(context: &Tensor, candidate: &Tensor) -> Tensor {
    context.dot(candidate)
}

/// Differential score: the previous selection queries the correlated
/// candidate and its difference. Exactly zero on the first turn.
pub fn score_differential(
    p: &SelectorParams,
    previous: Option<&Tensor>,
    correlated: &Tensor,
    difference: &Tensor,
) -> Tensor {
    match previous {
        None => Tensor::scalar(0.0),
        Some(prev) => p
            .differential
            .score(prev, &concat(&[correlated.clone(), difference.clone()], 0)),
    }
}

#[derive(Debug, Clone)]
pub struct SelectionOutput {
    /// Final scores, one per candidate.
    pub scores: Tensor,
    /// Contextual component (disentangled variant only).
    pub ctx_scores: Option<Tensor>,
    /// Differential component (disentangled variant only).
    pub diff_scores: Option<Tensor>,
    /// Selection distribution over candidates.
    pub alpha: Tensor,
    /// Argmax of alpha, ties to the lowest index.
    pub chosen: usize,
    /// Encoder summary of the chosen candidate.
    pub chosen_repr: Tensor,
    /// What was pushed into the history for the next turn (the gold
    /// candidate under teacher forcing, the chosen one otherwise).
    pub history_repr: Tensor,
}

/// Score all candidates, pick one, and advance the dialogue state. In train
/// mode the gold candidate's representation (when given) feeds the history
/// and the decoder, while alpha and the argmax are still produced for the
/// loss and metrics.
#[allow(clippy::too_many_arguments)]
pub fn select(
    params: &SelectorParams,
    encoding: &TurnEncoding,
    state: &mut SelectionState,
    valid: &[bool],
    variant: SelectorVariant,
    ablation: Ablation,
    gold: Option<usize>,
    mode: Mode,
) -> SelectionOutput {
    let n = encoding.candidates.len();
    assert!(n > 0, "select: empty candidate set");
    assert_eq!(valid.len(), n, "select: one validity flag per candidate");
    if ablation != Ablation::None {
        assert_eq!(
            variant,
            SelectorVariant::Disentangled,
            "ablations are defined on the disentangled variant"
        );
    }

    let need_difference = match (variant, ablation) {
        (SelectorVariant::Fused, _) => true,
        (SelectorVariant::Disentangled, Ablation::NoDiffsel) => false,
        (SelectorVariant::Disentangled, _) => true,
    };

    let mut fused_scores = Vec::new();
    let mut ctx_scores = Vec::new();
    let mut diff_scores = Vec::new();
    for i in 0..n {
        let difference = if need_difference {
            Some(accumulate_difference(state, &encoding.correlated[i], &params.diff_weight, &params.diff_bias))
        } else {
            None
        };
        match variant {
            SelectorVariant::Fused => {
                fused_scores.push(score_fused(
                    params,
                    &encoding.context,
                    &encoding.candidates[i],
                    difference.as_ref().unwrap(),
                ));
            }
            SelectorVariant::Disentangled => {
                if ablation != Ablation::NoCtxsel {
                    ctx_scores.push(score_contextual(&encoding.context, &encoding.candidates[i]));
                }
                if ablation != Ablation::NoDiffsel {
                    diff_scores.push(score_differential(
                        params,
                        state.previous(),
                        &encoding.correlated[i],
                        difference.as_ref().unwrap(),
                    ));
                }
            }
        }
    }

    let (scores, ctx_out, diff_out) = match variant {
        SelectorVariant::Fused => (concat(&fused_scores, 0), None, None),
        SelectorVariant::Disentangled => {
            let ctx = (!ctx_scores.is_empty()).then(|| concat(&ctx_scores, 0));
            let dif = (!diff_scores.is_empty()).then(|| concat(&diff_scores, 0));
            let combined = match (&ctx, &dif) {
                (Some(c), Some(d)) => c.add(d),
                (Some(c), None) => c.clone(),
                (None, Some(d)) => d.clone(),
                (None, None) => unreachable!("some scorer is always active"),
            };
            (combined, ctx, dif)
        }
    };

    let alpha = masked_softmax(&scores, valid);
    let chosen = argmax_valid(&alpha.values(), valid);
    let chosen_repr = encoding.candidates[chosen].clone();
    let history_repr = match (mode, gold) {
        (Mode::Train, Some(g)) => encoding.candidates[g].clone(),
        _ => chosen_repr.clone(),
    };
    state.advance(history_repr.clone());

    SelectionOutput {
        scores,
        ctx_scores: ctx_out,
        diff_scores: diff_out,
        alpha,
        chosen,
        chosen_repr,
        history_repr,
    }
}

fn argmax_valid(values: &[f64], valid: &[bool]) -> usize {
    let mut best = usize::MAX;
    let mut best_v = f64::NEG_INFINITY;
    for (i, (&v, &ok)) in values.iter().zip(valid).enumerate() {
        if ok && v > best_v {
            best = i;
            best_v = v;
        }
    }
    assert!(best != usize::MAX, "argmax: no valid candidate");
    best
}
