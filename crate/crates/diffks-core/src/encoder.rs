//! Word embeddings, GRU/BiGRU cells, and the per-turn encoder stack: one
//! BiGRU for the context, one (shared) for knowledge sentences, and a third
//! scanned across the candidate summaries to expose their correlations.

use rand::Rng;

use crate::data::PAD;
use crate::tensor::{concat, dropout, Tensor};

/// Glorot-uniform matrix.
pub fn glorot<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Tensor {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    let values: Vec<f64> = (0..rows * cols).map(|_| rng.random_range(-limit..limit)).collect();
    Tensor::param(values, &[rows, cols])
}

/// Glorot-uniform vector (treated as a single-column map).
pub fn glorot_vec<R: Rng>(n: usize, rng: &mut R) -> Tensor {
    let limit = (6.0 / (n + 1) as f64).sqrt();
    Tensor::param((0..n).map(|_| rng.random_range(-limit..limit)).collect(), &[n])
}

pub fn zeros_param(shape: &[usize]) -> Tensor {
    Tensor::param(vec![0.0; shape.iter().product()], shape)
}

/// Gate parameters for one GRU direction.
#[derive(Debug, Clone)]
pub struct GruParams {
    pub w_update: Tensor,
    pub u_update: Tensor,
    pub b_update: Tensor,
    pub w_reset: Tensor,
    pub u_reset: Tensor,
    pub b_reset: Tensor,
    pub w_cand: Tensor,
    pub u_cand: Tensor,
    pub b_cand: Tensor,
}

impl GruParams {
    pub fn init<R: Rng>(input_dim: usize, hidden_dim: usize, rng: &mut R) -> GruParams {
        GruParams {
            w_update: glorot(hidden_dim, input_dim, rng),
            u_update: glorot(hidden_dim, hidden_dim, rng),
            b_update: zeros_param(&[hidden_dim]),
            w_reset: glorot(hidden_dim, input_dim, rng),
            u_reset: glorot(hidden_dim, hidden_dim, rng),
            b_reset: zeros_param(&[hidden_dim]),
            w_cand: glorot(hidden_dim, input_dim, rng),
            u_cand: glorot(hidden_dim, hidden_dim, rng),
            b_cand: zeros_param(&[hidden_dim]),
        }
    }

    pub fn hidden_dim(&self) -> usize {
        self.b_update.shape()[0]
    }

    /// Named tensors for the parameter registry, in a fixed order.
    pub fn named(&self, prefix: &str) -> Vec<(String, Tensor)> {
        [
            ("w_update", &self.w_update),
            ("u_update", &self.u_update),
            ("b_update", &self.b_update),
            ("w_reset", &self.w_reset),
            ("u_reset", &self.u_reset),
            ("b_reset", &self.b_reset),
            ("w_cand", &self.w_cand),
            ("u_cand", &self.u_cand),
            ("b_cand", &self.b_cand),
        ]
        .into_iter()
        .map(|(n, t)| (format!("{prefix}.{n}"), t.clone()))
        .collect()
    }
}

/// One GRU step:
///   z = sigmoid(Wz x + Uz h + bz)
///   r = sigmoid(Wr x + Ur h + br)
///   c = tanh(Wh x + Uh (r .* h) + bh)
///   h' = (1 - z) .* h + z .* c
pub fn gru_cell(x: &Tensor, h_prev: &Tensor, p: &GruParams) -> Tensor {
    let z = p.w_update.matvec(x).add(&p.u_update.matvec(h_prev)).add(&p.b_update).sigmoid();
    let r = p.w_reset.matvec(x).add(&p.u_reset.matvec(h_prev)).add(&p.b_reset).sigmoid();
    let cand = p.w_cand.matvec(x).add(&p.u_cand.matvec(&r.mul(h_prev))).add(&p.b_cand).tanh();
    let ones = Tensor::ones(z.shape());
    ones.sub(&z).mul(h_prev).add(&z.mul(&cand))
}

#[derive(Debug, Clone)]
pub struct BiGruParams {
    pub fwd: GruParams,
    pub bwd: GruParams,
}

impl BiGruParams {
    pub fn init<R: Rng>(input_dim: usize, hidden_dim: usize, rng: &mut R) -> BiGruParams {
        BiGruParams {
            fwd: GruParams::init(input_dim, hidden_dim, rng),
            bwd: GruParams::init(input_dim, hidden_dim, rng),
        }
    }

    pub fn named(&self, prefix: &str) -> Vec<(String, Tensor)> {
        let mut v = self.fwd.named(&format!("{prefix}.fwd"));
        v.extend(self.bwd.named(&format!("{prefix}.bwd")));
        v
    }
}

/// Bidirectional scan from zero initial states. Returns the per-position
/// states [fwd_i; bwd_i] and the summary [fwd_last; bwd_first].
pub fn bigru_encode(seq: &[Tensor], p: &BiGruParams) -> (Vec<Tensor>, Tensor) {
    assert!(!seq.is_empty(), "bigru_encode: empty sequence");
    let hidden = p.fwd.hidden_dim();
    let mut fwd_states = Vec::with_capacity(seq.len());
    let mut h = Tensor::zeros(&[hidden]);
    for x in seq {
        h = gru_cell(x, &h, &p.fwd);
        fwd_states.push(h.clone());
    }
    let mut bwd_states = vec![Tensor::zeros(&[0]); seq.len()];
    let mut h = Tensor::zeros(&[hidden]);
    for (i, x) in seq.iter().enumerate().rev() {
        h = gru_cell(x, &h, &p.bwd);
        bwd_states[i] = h.clone();
    }
    let summary = concat(&[fwd_states[seq.len() - 1].clone(), bwd_states[0].clone()], 0);
    let states = fwd_states
        .into_iter()
        .zip(bwd_states)
        .map(|(f, b)| concat(&[f, b], 0))
        .collect();
    (states, summary)
}

/// All encoder-side parameters, including the shared embedding table.
#[derive(Debug, Clone)]
pub struct EncoderParams {
    /// [vocab, embedding_dim]; shared by context, knowledge and decoder input.
    pub embedding: Tensor,
    pub context: BiGruParams,
    pub knowledge: BiGruParams,
    /// Scans the candidate summaries (input dim 2H).
    pub correlation: BiGruParams,
}

impl EncoderParams {
    pub fn embedding_dim(&self) -> usize {
        self.embedding.shape()[1]
    }

    pub fn named(&self) -> Vec<(String, Tensor)> {
        let mut v = vec![("embedding".to_string(), self.embedding.clone())];
        v.extend(self.context.named("encoder.context"));
        v.extend(self.knowledge.named("encoder.knowledge"));
        v.extend(self.correlation.named("encoder.correlation"));
        v
    }
}

/// Everything the selector and decoder need from one turn's encoders.
#[derive(Debug, Clone)]
pub struct TurnEncoding {
    /// Context summary, 2H.
    pub context: Tensor,
    /// Per-candidate sentence summaries (index 0 is the empty sentence), 2H.
    pub candidates: Vec<Tensor>,
    /// Per-candidate token states, 2H each; feed the copy mechanism.
    pub candidate_tokens: Vec<Vec<Tensor>>,
    /// Vocabulary ids per candidate, aligned with `candidate_tokens`.
    pub candidate_ids: Vec<Vec<usize>>,
    /// Correlated candidate representations from the third BiGRU, 2H.
    pub correlated: Vec<Tensor>,
}

/// Trailing padding never reaches the recurrences.
fn strip_padding(ids: &[usize]) -> &[usize] {
    let mut end = ids.len();
    while end > 0 && ids[end - 1] == PAD {
        end -= 1;
    }
    &ids[..end]
}

/// Embed a token sequence; dropout applies to embeddings only, and only in
/// training mode.
pub fn embed_sequence<R: Rng>(
    table: &Tensor,
    ids: &[usize],
    rate: f64,
    train: bool,
    rng: &mut R,
) -> Vec<Tensor> {
    ids.iter().map(|&id| dropout(&table.row(id), rate, train, rng)).collect()
}

pub fn encode_turn<R: Rng>(
    params: &EncoderParams,
    context_ids: &[usize],
    candidate_ids: &[Vec<usize>],
    dropout_rate: f64,
    train: bool,
    rng: &mut R,
) -> TurnEncoding {
    assert!(!candidate_ids.is_empty(), "encode_turn: candidate pool is empty");
    let ctx_ids = strip_padding(context_ids);
    let ctx_emb = embed_sequence(&params.embedding, ctx_ids, dropout_rate, train, rng);
    let (_, context) = bigru_encode(&ctx_emb, &params.context);

    let mut candidates = Vec::with_capacity(candidate_ids.len());
    let mut candidate_tokens = Vec::with_capacity(candidate_ids.len());
    let mut kept_ids = Vec::with_capacity(candidate_ids.len());
    for ids in candidate_ids {
        let ids = strip_padding(ids);
        let emb = embed_sequence(&params.embedding, ids, dropout_rate, train, rng);
        let (states, summary) = bigru_encode(&emb, &params.knowledge);
        candidates.push(summary);
        candidate_tokens.push(states);
        kept_ids.push(ids.to_vec());
    }
    let (correlated, _) = bigru_encode(&candidates, &params.correlation);

    TurnEncoding {
        context,
        candidates,
        candidate_tokens,
        candidate_ids: kept_ids,
        correlated,
    }
}
