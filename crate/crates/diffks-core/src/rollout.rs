//! Per-dialogue forward pass: encode each turn, select knowledge while
//! threading the selection history, and either teacher-force the decoder
//! (training) or greedy-decode a reply (evaluation).

use rand::Rng;

use crate::config::{Config, HistorySource};
use crate::data::{assemble_context, prepare_candidates, Dialogue, LengthCaps, Vocabulary};
use crate::decoder::{decode_step, greedy_decode, init_state, sequence_nll};
use crate::encoder::encode_turn;
use crate::model::ModelParams;
use crate::selector::{select, Mode, SelectionState};
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct TurnRecord {
    /// 1-based turn position.
    pub turn: usize,
    /// Gold candidate index (shifted; 0 is the empty sentence).
    pub gold: usize,
    /// Model's argmax candidate.
    pub chosen: usize,
    /// Selection distribution values.
    pub alpha: Vec<f64>,
    /// Teacher-forced response loss (train mode).
    pub nll: Option<Tensor>,
    /// -log alpha[gold] (train mode).
    pub ks: Option<Tensor>,
    /// Number of NLL targets, the final EOS included.
    pub n_targets: usize,
    /// Greedy-decoded reply token ids (eval mode).
    pub generated: Option<Vec<usize>>,
}

pub fn caps_of(config: &Config) -> LengthCaps {
    LengthCaps {
        context: config.data.context_cap,
        response: config.data.response_cap,
        knowledge: config.data.knowledge_len_cap,
        pool: config.data.pool_cap,
    }
}

/// Run one dialogue through the model. Training teacher-forces both the
/// decoder inputs and the knowledge fed to the decoder and the history;
/// evaluation rolls forward on the model's own selections unless the
/// history source says otherwise.
pub fn forward_dialogue<R: Rng>(
    model: &ModelParams,
    vocab: &Vocabulary,
    dialogue: &Dialogue,
    config: &Config,
    mode: Mode,
    history: HistorySource,
    rng: &mut R,
) -> Vec<TurnRecord> {
    let caps = caps_of(config);
    let train = mode == Mode::Train;
    let weights = config.selector.weights();
    let mut state = SelectionState::new(config.selector.m, weights);
    // The history is teacher-forced in train mode and, on request, at eval
    // time too; select() keys that decision off its mode argument.
    let select_mode = if train || history == HistorySource::Gold { Mode::Train } else { Mode::Eval };
    let mut records = Vec::with_capacity(dialogue.turns.len());

    for turn_idx in 1..=dialogue.turns.len() {
        let turn = &dialogue.turns[turn_idx - 1];
        let context = assemble_context(dialogue, turn_idx, &caps);
        let candidates = prepare_candidates(turn, &caps);
        let context_ids = vocab.encode(&context.tokens);
        let candidate_ids: Vec<Vec<usize>> =
            candidates.sentences.iter().map(|s| vocab.encode(s)).collect();

        let encoding = encode_turn(
            &model.encoder,
            &context_ids,
            &candidate_ids,
            config.train.dropout,
            train,
            rng,
        );
        let gold = candidates.shifted_gold;
        let out = select(
            &model.selector,
            &encoding,
            &mut state,
            &candidates.valid,
            config.selector.variant,
            config.selector.ablation,
            Some(gold),
            select_mode,
        );

        let mut record = TurnRecord {
            turn: turn_idx,
            gold,
            chosen: out.chosen,
            alpha: out.alpha.to_vec(),
            nll: None,
            ks: None,
            n_targets: 0,
            generated: None,
        };

        if train {
            // Teacher forcing end to end: the decoder conditions on the gold
            // knowledge sentence and the gold previous words.
            let knowledge = &encoding.candidates[gold];
            let token_states = &encoding.candidate_tokens[gold];
            let token_ids = &encoding.candidate_ids[gold];
            let mut response_ids = vocab.encode(&turn.response);
            response_ids.truncate(caps.response);

            let mut s = init_state(&model.decoder, &encoding.context, knowledge);
            let mut prev = crate::data::SOS;
            let mut dists = Vec::with_capacity(response_ids.len() + 1);
            for t in 0..=response_ids.len() {
                let step = decode_step(
                    &model.decoder,
                    &s,
                    prev,
                    &model.encoder.embedding,
                    knowledge,
                    token_states,
                    token_ids,
                    config.train.dropout,
                    true,
                    rng,
                );
                dists.push(step.probs.clone());
                s = step.state;
                if t < response_ids.len() {
                    prev = response_ids[t];
                }
            }
            record.n_targets = dists.len();
            record.nll = Some(sequence_nll(&response_ids, &dists));
            record.ks = Some(out.alpha.pick(gold).log().scale(-1.0));
        } else {
            let knowledge = &encoding.candidates[out.chosen];
            let token_states = &encoding.candidate_tokens[out.chosen];
            let token_ids = &encoding.candidate_ids[out.chosen];
            record.generated = Some(greedy_decode(
                &model.decoder,
                &model.encoder.embedding,
                &encoding.context,
                knowledge,
                token_states,
                token_ids,
                config.eval.max_decode_len,
            ));
        }
        records.push(record);
    }
    records
}

/// Sum the per-turn losses of one dialogue: (L_nll, L_ks, L_nll + w * L_ks).
pub fn compute_total_loss(records: &[TurnRecord], ks_weight: f64) -> (Tensor, Tensor, Tensor) {
    assert!(!records.is_empty(), "no records to sum");
    let mut nll = Tensor::scalar(0.0);
    let mut ks = Tensor::scalar(0.0);
    for r in records {
        if let Some(t) = &r.nll {
            nll = nll.add(t);
        }
        if let Some(t) = &r.ks {
            ks = ks.add(t);
        }
    }
    let total = nll.add(&ks.scale(ks_weight));
    (nll, ks, total)
}
