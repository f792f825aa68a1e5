//! Central finite-difference gradient verification.
//!
//! `grad_check` compares the engine's reverse-mode gradient of a scalar loss
//! against two-sided finite differences, coordinate by coordinate. The probe
//! re-evaluates the loss from scratch at perturbed inputs, so it is
//! independent of every backward rule it checks. The three suites cover
//! single ops, composed modules, and the full dialogue loss at toy
//! dimensions.

use rand::Rng;

use crate::config::{Config, HistorySource, SelectorVariant};
use crate::data::corpus::{Dialogue, Turn};
use crate::data::Vocabulary;
use crate::decoder::{decode_step, init_state, sequence_nll, DecoderParams};
use crate::encoder::{bigru_encode, encode_turn, gru_cell, BiGruParams, EncoderParams, GruParams};
use crate::model::ModelParams;
use crate::rng::{stream, Purpose};
use crate::rollout::{compute_total_loss, forward_dialogue};
use crate::selector::{select, Mode, SelectionState, SelectorParams};
use crate::tensor::{concat, copy_softmax, dropout, masked_softmax, Tensor};

/// Max relative error between analytic and central-difference gradients of
/// `f` with respect to `x`. `f` must rebuild its graph from the current
/// values of `x` on every call. Returns infinity if anything non-finite
/// shows up.
pub fn grad_check<F: Fn() -> Tensor>(f: F, x: &Tensor, eps: f64) -> f64 {
    let loss = f();
    assert_eq!(loss.len(), 1, "grad_check: f must produce a scalar");
    // clear anything an earlier check of a shared graph left behind
    x.zero_grad();
    loss.backward();
    let analytic = x.grad().unwrap_or_else(|| vec![0.0; x.len()]);
    x.zero_grad();
    drop(loss);

    let mut worst = 0.0f64;
    for i in 0..x.len() {
        x.nudge(i, eps);
        let up = f().value();
        x.nudge(i, -2.0 * eps);
        let down = f().value();
        x.nudge(i, eps);
        let fd = (up - down) / (2.0 * eps);
        let a = analytic[i];
        if !fd.is_finite() || !a.is_finite() {
            return f64::INFINITY;
        }
        let rel = (a - fd).abs() / f64::max(1e-8, a.abs() + fd.abs());
        if rel > worst {
            worst = rel;
        }
    }
    worst
}

/// One named check and its outcome.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub scale: &'static str,
    pub name: String,
    pub max_rel_err: f64,
    pub tol: f64,
}

impl CheckResult {
    pub fn passed(&self) -> bool {
        self.max_rel_err < self.tol
    }
}

const EPS: f64 = 1e-5;
const TOL: f64 = 1e-4;

fn rand_vec<R: Rng>(n: usize, lo: f64, hi: f64, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

fn param<R: Rng>(shape: &[usize], rng: &mut R) -> Tensor {
    let n: usize = shape.iter().product();
    Tensor::param(rand_vec(n, -1.0, 1.0, rng), shape)
}

/// Check `f` against every tensor in `inputs`; report the worst coordinate.
fn check_all<F: Fn() -> Tensor>(
    scale: &'static str,
    name: &str,
    tol: f64,
    f: F,
    inputs: &[(String, Tensor)],
) -> CheckResult {
    let mut worst = 0.0f64;
    let mut worst_in = String::new();
    for (n, t) in inputs {
        let err = grad_check(&f, t, EPS);
        if err > worst {
            worst = err;
            worst_in = n.clone();
        }
    }
    let name = if worst_in.is_empty() { name.to_string() } else { format!("{name} (worst: {worst_in})") };
    CheckResult { scale, name, max_rel_err: worst, tol }
}

fn named(pairs: Vec<(&str, &Tensor)>) -> Vec<(String, Tensor)> {
    pairs.into_iter().map(|(n, t)| (n.to_string(), t.clone())).collect()
}

/// Single-op gradients on random inputs.
pub fn op_checks(seed: u64) -> Vec<CheckResult> {
    let mut rng = stream(seed, Purpose::Init, 100);
    let mut out = Vec::new();

    {
        let a = param(&[3, 4], &mut rng);
        let b = param(&[4, 2], &mut rng);
        let w = Tensor::constant(rand_vec(6, -1.0, 1.0, &mut rng), &[3, 2]);
        out.push(check_all(
            "op",
            "matmul 3x4 . 4x2",
            1e-6,
            || a.matmul(&b).mul(&w).sum(),
            &named(vec![("a", &a), ("b", &b)]),
        ));
    }
    {
        let m = param(&[4, 3], &mut rng);
        let x = param(&[3], &mut rng);
        let w = Tensor::constant(rand_vec(4, -1.0, 1.0, &mut rng), &[4]);
        out.push(check_all(
            "op",
            "matvec",
            TOL,
            || m.matvec(&x).mul(&w).sum(),
            &named(vec![("m", &m), ("x", &x)]),
        ));
    }
    {
        let a = param(&[5], &mut rng);
        let b = param(&[5], &mut rng);
        out.push(check_all("op", "dot", TOL, || a.dot(&b), &named(vec![("a", &a), ("b", &b)])));
    }
    for (op_name, f_idx) in [("add", 0usize), ("sub", 1), ("mul", 2)] {
        let a = param(&[6], &mut rng);
        let b = param(&[6], &mut rng);
        let w = Tensor::constant(rand_vec(6, -1.0, 1.0, &mut rng), &[6]);
        let (ac, bc, wc) = (a.clone(), b.clone(), w.clone());
        out.push(check_all(
            "op",
            op_name,
            TOL,
            move || {
                let y = match f_idx {
                    0 => ac.add(&bc),
                    1 => ac.sub(&bc),
                    _ => ac.mul(&bc),
                };
                y.mul(&wc).sum()
            },
            &named(vec![("a", &a), ("b", &b)]),
        ));
    }
    for (op_name, f_idx) in [("tanh", 0usize), ("sigmoid", 1), ("exp", 2)] {
        let x = param(&[6], &mut rng);
        let w = Tensor::constant(rand_vec(6, -1.0, 1.0, &mut rng), &[6]);
        let (xc, wc) = (x.clone(), w.clone());
        let tol = if f_idx == 1 { 1e-6 } else { TOL };
        out.push(check_all(
            "op",
            op_name,
            tol,
            move || {
                let y = match f_idx {
                    0 => xc.tanh(),
                    1 => xc.sigmoid(),
                    _ => xc.exp(),
                };
                y.mul(&wc).sum()
            },
            &named(vec![("x", &x)]),
        ));
    }
    {
        let x = Tensor::param(rand_vec(6, 0.2, 2.0, &mut rng), &[6]);
        let w = Tensor::constant(rand_vec(6, -1.0, 1.0, &mut rng), &[6]);
        out.push(check_all("op", "log", TOL, || x.log().mul(&w).sum(), &named(vec![("x", &x)])));
    }
    {
        let a = param(&[3], &mut rng);
        let b = param(&[4], &mut rng);
        let w = Tensor::constant(rand_vec(7, -1.0, 1.0, &mut rng), &[7]);
        out.push(check_all(
            "op",
            "concat",
            TOL,
            || concat(&[a.clone(), b.clone()], 0).mul(&w).sum(),
            &named(vec![("a", &a), ("b", &b)]),
        ));
    }
    {
        let s = param(&[5], &mut rng);
        let w = Tensor::constant(rand_vec(5, -1.0, 1.0, &mut rng), &[5]);
        let valid = [true, true, false, true, true];
        out.push(check_all(
            "op",
            "masked_softmax",
            TOL,
            || masked_softmax(&s, &valid).mul(&w).sum(),
            &named(vec![("scores", &s)]),
        ));
    }
    {
        // the mask is redrawn identically on every probe, so the check sees
        // one fixed linear map
        let x = param(&[8], &mut rng);
        let mask_seed = rng.random::<u64>();
        let xc = x.clone();
        out.push(check_all(
            "op",
            "dropout (fixed mask)",
            TOL,
            move || {
                let mut mask_rng = stream(mask_seed, Purpose::Dropout, 9);
                dropout(&xc, 0.3, true, &mut mask_rng).sum()
            },
            &named(vec![("x", &x)]),
        ));
    }
    {
        let x = param(&[6], &mut rng);
        out.push(check_all("op", "pick", TOL, || x.pick(2).scale(3.0), &named(vec![("x", &x)])));
    }
    {
        let m = param(&[4, 3], &mut rng);
        let w = Tensor::constant(rand_vec(3, -1.0, 1.0, &mut rng), &[3]);
        out.push(check_all("op", "row", TOL, || m.row(1).mul(&w).sum(), &named(vec![("m", &m)])));
    }
    {
        let g = param(&[8], &mut rng);
        let q = param(&[4], &mut rng);
        let ids = [2usize, 5, 2, 7]; // duplicate occurrence of word 2
        out.push(check_all(
            "op",
            "copy_softmax",
            TOL,
            || copy_softmax(&g, &q, &ids).pick(2).log().scale(-1.0),
            &named(vec![("phi_g", &g), ("copy_scores", &q)]),
        ));
    }
    out
}

/// Composed-module gradients: recurrent cells, encoders, selection, decoding.
pub fn module_checks(seed: u64) -> Vec<CheckResult> {
    let mut rng = stream(seed, Purpose::Init, 200);
    let mut out = Vec::new();

    {
        let p = GruParams::init(4, 3, &mut rng);
        let x = param(&[4], &mut rng);
        let h = param(&[3], &mut rng);
        let w = Tensor::constant(rand_vec(3, -1.0, 1.0, &mut rng), &[3]);
        let mut inputs = p.named("gru");
        inputs.push(("x".into(), x.clone()));
        inputs.push(("h".into(), h.clone()));
        out.push(check_all("module", "gru_cell", TOL, || gru_cell(&x, &h, &p).mul(&w).sum(), &inputs));
    }
    {
        let p = BiGruParams::init(3, 2, &mut rng);
        let seq: Vec<Tensor> = (0..3).map(|_| param(&[3], &mut rng)).collect();
        let w = Tensor::constant(rand_vec(4, -1.0, 1.0, &mut rng), &[4]);
        let mut inputs = p.named("bigru");
        for (i, s) in seq.iter().enumerate() {
            inputs.push((format!("x{i}"), s.clone()));
        }
        let (pc, seqc, wc) = (p.clone(), seq.clone(), w.clone());
        out.push(check_all(
            "module",
            "bigru_encode",
            TOL,
            move || {
                let (states, summary) = bigru_encode(&seqc, &pc);
                let mut loss = summary.mul(&wc).sum();
                for s in &states {
                    loss = loss.add(&s.mul(&wc).sum());
                }
                loss
            },
            &inputs,
        ));
    }
    {
        // encode_turn composed with a scalar head over everything it emits
        let mut irng = stream(seed, Purpose::Init, 201);
        let vocab_n = 10;
        let e = 4;
        let h = 3;
        let enc = EncoderParams {
            embedding: param(&[vocab_n, e], &mut irng),
            context: BiGruParams::init(e, h, &mut irng),
            knowledge: BiGruParams::init(e, h, &mut irng),
            correlation: BiGruParams::init(2 * h, h, &mut irng),
        };
        let head = Tensor::constant(rand_vec(2 * h, -1.0, 1.0, &mut irng), &[2 * h]);
        let ctx_ids = vec![4usize, 5, 6];
        let cand_ids = vec![vec![crate::data::EOS], vec![7, 8], vec![9, 4]];
        let inputs = enc.named();
        let (encc, headc) = (enc.clone(), head.clone());
        out.push(check_all(
            "module",
            "encode_turn + head",
            TOL,
            move || {
                let mut drng = stream(0, Purpose::Dropout, 0);
                let t = encode_turn(&encc, &ctx_ids, &cand_ids, 0.0, false, &mut drng);
                let mut loss = t.context.mul(&headc).sum();
                for c in &t.candidates {
                    loss = loss.add(&c.mul(&headc).sum());
                }
                for r in &t.correlated {
                    loss = loss.add(&r.mul(&headc).sum());
                }
                for s in &t.candidate_tokens[1] {
                    loss = loss.add(&s.mul(&headc).sum());
                }
                loss
            },
            &inputs,
        ));
    }
    {
        // difference computation and its accumulation over partial history
        let h2 = 4;
        let sp = SelectorParams::init(2, &mut rng);
        let hist1 = param(&[h2], &mut rng);
        let hist2 = param(&[h2], &mut rng);
        let r = param(&[h2], &mut rng);
        let w = Tensor::constant(rand_vec(h2, -1.0, 1.0, &mut rng), &[h2]);
        let inputs = named(vec![
            ("diff_weight", &sp.diff_weight),
            ("diff_bias", &sp.diff_bias),
            ("hist1", &hist1),
            ("hist2", &hist2),
            ("r", &r),
        ]);
        let (spc, h1c, h2c, rc, wc) = (sp.clone(), hist1.clone(), hist2.clone(), r.clone(), w.clone());
        out.push(check_all(
            "module",
            "accumulate_difference (M=3, two entries)",
            TOL,
            move || {
                let mut state = SelectionState::new(3, vec![0.5, 0.3, 0.2]);
                state.advance(h2c.clone());
                state.advance(h1c.clone());
                crate::selector::accumulate_difference(&state, &rc, &spc.diff_weight, &spc.diff_bias)
                    .mul(&wc)
                    .sum()
            },
            &inputs,
        ));
    }
    {
        // fused and differential scorers
        let sp = SelectorParams::init(2, &mut rng);
        let ctx = param(&[4], &mut rng);
        let cand = param(&[4], &mut rng);
        let o = param(&[4], &mut rng);
        let mut inputs = sp.named();
        inputs.retain(|(n, _)| n.starts_with("selector.fused"));
        inputs.extend(named(vec![("ctx", &ctx), ("cand", &cand), ("o", &o)]));
        let (spc, cc, kc, oc) = (sp.clone(), ctx.clone(), cand.clone(), o.clone());
        out.push(check_all(
            "module",
            "score_fused",
            TOL,
            move || crate::selector::score_fused(&spc, &cc, &kc, &oc),
            &inputs,
        ));
        let prev = param(&[4], &mut rng);
        let mut inputs = sp.named();
        inputs.retain(|(n, _)| n.starts_with("selector.differential"));
        inputs.extend(named(vec![("prev", &prev), ("cand", &cand), ("o", &o)]));
        let (spc, pc, kc, oc) = (sp.clone(), prev.clone(), cand.clone(), o.clone());
        out.push(check_all(
            "module",
            "score_differential",
            TOL,
            move || crate::selector::score_differential(&spc, Some(&pc), &kc, &oc),
            &inputs,
        ));
    }
    {
        // select + selection loss on a 3-candidate turn with history
        let h = 2;
        let h2 = 2 * h;
        let sp = SelectorParams::init(h, &mut rng);
        let ctx = param(&[h2], &mut rng);
        let cands: Vec<Tensor> = (0..3).map(|_| param(&[h2], &mut rng)).collect();
        let corr: Vec<Tensor> = (0..3).map(|_| param(&[h2], &mut rng)).collect();
        let hist = param(&[h2], &mut rng);
        let mut inputs = sp.named();
        inputs.push(("ctx".into(), ctx.clone()));
        inputs.push(("hist".into(), hist.clone()));
        for (i, c) in cands.iter().enumerate() {
            inputs.push((format!("cand{i}"), c.clone()));
        }
        for (i, c) in corr.iter().enumerate() {
            inputs.push((format!("corr{i}"), c.clone()));
        }
        let (spc, cc, kc, rc, hc) = (sp.clone(), ctx.clone(), cands.clone(), corr.clone(), hist.clone());
        out.push(check_all(
            "module",
            "select + selection loss",
            TOL,
            move || {
                let encoding = crate::encoder::TurnEncoding {
                    context: cc.clone(),
                    candidates: kc.clone(),
                    candidate_tokens: vec![vec![], vec![], vec![]],
                    candidate_ids: vec![vec![], vec![], vec![]],
                    correlated: rc.clone(),
                };
                let mut state = SelectionState::new(1, vec![1.0]);
                state.advance(hc.clone());
                let o = select(
                    &spc,
                    &encoding,
                    &mut state,
                    &[true; 3],
                    SelectorVariant::Disentangled,
                    crate::config::Ablation::None,
                    Some(1),
                    Mode::Train,
                );
                o.alpha.pick(1).log().scale(-1.0)
            },
            &inputs,
        ));
    }
    {
        // init_state affine map
        let mut irng = stream(seed, Purpose::Init, 202);
        let dp = DecoderParams::init(10, 4, 2, 5, &mut irng);
        let ctx = param(&[4], &mut irng);
        let know = param(&[4], &mut irng);
        let w = Tensor::constant(rand_vec(5, -1.0, 1.0, &mut irng), &[5]);
        let inputs = named(vec![
            ("init_weight", &dp.init_weight),
            ("init_bias", &dp.init_bias),
            ("ctx", &ctx),
            ("know", &know),
        ]);
        let (dpc, cc, kc, wc) = (dp.clone(), ctx.clone(), know.clone(), w.clone());
        out.push(check_all(
            "module",
            "init_state",
            TOL,
            move || init_state(&dpc, &cc, &kc).mul(&wc).sum(),
            &inputs,
        ));
    }
    {
        // teacher-forced decoding + NLL on a 10-word vocabulary
        let mut irng = stream(seed, Purpose::Init, 203);
        let vocab_n = 10;
        let (e, h, d) = (3, 2, 4);
        let dp = DecoderParams::init(vocab_n, e, h, d, &mut irng);
        let emb = param(&[vocab_n, e], &mut irng);
        let ctx = param(&[2 * h], &mut irng);
        let know = param(&[2 * h], &mut irng);
        let tok_states: Vec<Tensor> = (0..2).map(|_| param(&[2 * h], &mut irng)).collect();
        let tok_ids = vec![6usize, 8];
        let gold = vec![6usize, 8, 4];
        let mut inputs = dp.named();
        inputs.push(("embedding".into(), emb.clone()));
        inputs.push(("ctx".into(), ctx.clone()));
        inputs.push(("know".into(), know.clone()));
        for (i, t) in tok_states.iter().enumerate() {
            inputs.push((format!("tok_state{i}"), t.clone()));
        }
        let (dpc, ec, cc, kc, tsc) = (dp.clone(), emb.clone(), ctx.clone(), know.clone(), tok_states.clone());
        out.push(check_all(
            "module",
            "decode_step + sequence_nll",
            TOL,
            move || {
                let mut drng = stream(0, Purpose::Dropout, 0);
                let mut s = init_state(&dpc, &cc, &kc);
                let mut prev = crate::data::SOS;
                let mut dists = Vec::new();
                for t in 0..=gold.len() {
                    let step = decode_step(&dpc, &s, prev, &ec, &kc, &tsc, &tok_ids, 0.0, false, &mut drng);
                    dists.push(step.probs.clone());
                    s = step.state;
                    if t < gold.len() {
                        prev = gold[t];
                    }
                }
                sequence_nll(&gold, &dists)
            },
            &inputs,
        ));
    }
    out
}

fn toy_dialogue() -> Dialogue {
    let toks = |s: &str| s.split(' ').map(str::to_string).collect::<Vec<_>>();
    Dialogue {
        id: "toy".into(),
        turns: vec![
            Turn {
                post: toks("alpha beta"),
                response: toks("gamma delta"),
                knowledge: vec![toks("epsilon zeta"), toks("eta theta")],
                gold_index: Some(0),
            },
            Turn {
                post: toks("beta gamma alpha"),
                response: toks("eta theta"),
                knowledge: vec![toks("epsilon zeta"), toks("eta theta")],
                gold_index: Some(1),
            },
        ],
    }
}

/// Toy configuration pinned by the acceptance gate: |V| = 12, E = 8, H = 6,
/// D = 12, 3 candidates, sequences of at most 4 tokens.
pub fn toy_config() -> Config {
    let mut c = Config::default();
    c.model.embedding_dim = 8;
    c.model.hidden_size = 6;
    c.model.decoder_hidden = 12;
    c.train.dropout = 0.0;
    c.data.vocab_cap = 8;
    c
}

/// Full-dialogue loss gradients for both selector variants, one result per
/// parameter group.
pub fn end2end_checks(seed: u64) -> Vec<CheckResult> {
    let mut out = Vec::new();
    let dialogue = toy_dialogue();
    let vocab = Vocabulary::build(&[dialogue.clone()], 8);
    assert_eq!(vocab.len(), 12);
    for variant in [SelectorVariant::Fused, SelectorVariant::Disentangled] {
        let mut config = toy_config();
        config.selector.variant = variant;
        let model = ModelParams::init(&config, &vocab, &mut stream(seed, Purpose::Init, 300));
        let label = match variant {
            SelectorVariant::Fused => "fused",
            SelectorVariant::Disentangled => "disentangled",
        };
        let groups: Vec<(&str, Vec<(String, Tensor)>)> = {
            let mut embedding = Vec::new();
            let mut encoder = Vec::new();
            let mut selector = Vec::new();
            let mut decoder = Vec::new();
            for (name, t) in model.named() {
                if name == "embedding" {
                    embedding.push((name, t));
                } else if name.starts_with("encoder.") {
                    encoder.push((name, t));
                } else if name.starts_with("selector.") {
                    selector.push((name, t));
                } else {
                    decoder.push((name, t));
                }
            }
            vec![
                ("embedding", embedding),
                ("encoder", encoder),
                ("selector", selector),
                ("decoder", decoder),
            ]
        };
        for (group_name, tensors) in groups {
            let (m, v, d, c) = (model.clone(), vocab.clone(), dialogue.clone(), config.clone());
            out.push(check_all(
                "end2end",
                &format!("dialogue loss / {label} / {group_name}"),
                TOL,
                move || {
                    let mut drng = stream(0, Purpose::Dropout, 0);
                    let records =
                        forward_dialogue(&m, &v, &d, &c, Mode::Train, HistorySource::Predicted, &mut drng);
                    compute_total_loss(&records, c.train.ks_weight).2
                },
                &tensors,
            ));
        }
    }
    out
}

pub fn run_scale(scale: &str, seed: u64) -> Vec<CheckResult> {
    match scale {
        "op" => op_checks(seed),
        "module" => module_checks(seed),
        "end2end" => end2end_checks(seed),
        _ => {
            let mut all = op_checks(seed);
            all.extend(module_checks(seed));
            all.extend(end2end_checks(seed));
            all
        }
    }
}
