//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured numbers. Training-based criteria run at small dimensions on
//! the synthetic tasks and are budgeted for a single laptop core.

use std::path::Path;
use std::time::Instant;

use diffks_core::config::{Ablation, Config, HistorySource, SelectorVariant, StopMetric};
use diffks_core::data::{
    make_synthetic_context_corpus, make_synthetic_transition_corpus, Dialogue, Vocabulary,
};
use diffks_core::decoder::{decode_step, init_state};
use diffks_core::encoder::encode_turn;
use diffks_core::eval::evaluate_model;
use diffks_core::gradcheck::run_scale;
use diffks_core::metrics::{corpus_bleu, rouge2};
use diffks_core::model::{build_groups, ModelParams};
use diffks_core::optim::Adam;
use diffks_core::rng::{stream, Purpose};
use diffks_core::rollout::{compute_total_loss, forward_dialogue};
use diffks_core::selector::{accumulate_difference, select, Mode, SelectionState};
use diffks_core::tensor::{copy_softmax, masked_softmax, Tensor};
use diffks_core::train::train;
use rand::Rng;

/// Small-dimension configuration shared by the synthetic-task criteria.
fn synth_config(variant: SelectorVariant) -> Config {
    let mut c = Config::default();
    c.model.embedding_dim = 32;
    c.model.hidden_size = 32;
    c.model.decoder_hidden = 64;
    c.selector.variant = variant;
    c.train.learning_rate = 0.003;
    c.train.batch_size = 8;
    c.train.dropout = 0.0;
    c.train.seed = 7;
    c.train.checkpoint_every = 1000;
    c.data.vocab_cap = 200;
    c.eval.max_decode_len = 8;
    c.eval.history = HistorySource::Gold;
    c
}

/// Posts in the synthetic corpora are 4 noise tokens (5 with the planted
/// keyword); capping the context at the post length keeps the previous
/// response out of the window, which is what makes "context-only is chance"
/// true on the transition task.
fn cap_context(c: &mut Config, post_len: usize) {
    c.data.context_cap = post_len;
}

fn pass(criterion: &str, detail: String) {
    println!("[acceptance] {criterion}: PASS - {detail}");
}

#[test]
fn criterion_01_gradient_integrity() {
    let t0 = Instant::now();
    let results = run_scale("all", 7);
    let mut worst = 0.0f64;
    for r in &results {
        assert!(
            r.passed(),
            "criterion 1 FAIL: {} ({}) rel err {} >= {}",
            r.name,
            r.scale,
            r.max_rel_err,
            r.tol
        );
        worst = worst.max(r.max_rel_err);
    }
    let secs = t0.elapsed().as_secs_f64();
    assert!(secs < 120.0, "criterion 1 FAIL: gradcheck took {secs:.1}s (budget 120s)");
    pass(
        "criterion 1 (gradient integrity)",
        format!("{} checks at op/module/end2end, worst rel err {worst:.2e}, {secs:.1}s", results.len()),
    );
}

#[test]
fn criterion_02_distribution_contracts() {
    let mut rng = stream(99, Purpose::Init, 0);
    for trial in 0..1000 {
        let n = 2 + (rng.random::<u32>() % 39) as usize;
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(-30.0..30.0)).collect();
        let mut valid: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < 0.7).collect();
        if !valid.iter().any(|&v| v) {
            valid[rng.random_range(0..n)] = true;
        }
        let alpha = masked_softmax(&Tensor::constant(scores, &[n]), &valid).to_vec();
        let sum: f64 = alpha.iter().sum();
        assert!((sum - 1.0).abs() <= 1e-9, "trial {trial}: alpha sums to {sum}");
        for (a, &ok) in alpha.iter().zip(&valid) {
            if ok {
                assert!(*a >= 0.0);
            } else {
                assert_eq!(*a, 0.0, "masked candidate got probability");
            }
        }

        let vocab = 5 + (rng.random::<u32>() % 30) as usize;
        let phi_g: Vec<f64> = (0..vocab).map(|_| rng.random_range(-15.0..15.0)).collect();
        let n_tok = 1 + (rng.random::<u32>() % 6) as usize;
        let q: Vec<f64> = (0..n_tok).map(|_| rng.random_range(-15.0..15.0)).collect();
        let ids: Vec<usize> = (0..n_tok).map(|_| (rng.random::<u32>() as usize) % vocab).collect();
        let p = copy_softmax(
            &Tensor::constant(phi_g, &[vocab]),
            &Tensor::constant(q, &[n_tok]),
            &ids,
        )
        .to_vec();
        let sum: f64 = p.iter().sum();
        assert!((sum - 1.0).abs() <= 1e-9, "trial {trial}: P sums to {sum}");
        assert!(p.iter().all(|&x| x > 0.0), "trial {trial}: P not strictly positive");
    }
    pass("criterion 2 (distribution contracts)", "1000 random alpha and P instances".into());
}

#[test]
fn criterion_03_first_turn_invariants() {
    let corpus = make_synthetic_transition_corpus(4, 2, 2, 3);
    let vocab = Vocabulary::build(&corpus, 100);
    for variant in [SelectorVariant::Fused, SelectorVariant::Disentangled] {
        let config = synth_config(variant);
        let model = ModelParams::init(&config, &vocab, &mut stream(5, Purpose::Init, 0));
        let caps = diffks_core::rollout::caps_of(&config);
        let d = &corpus[0];
        let context = diffks_core::data::assemble_context(d, 1, &caps);
        let cands = diffks_core::data::prepare_candidates(&d.turns[0], &caps);
        let ids: Vec<Vec<usize>> = cands.sentences.iter().map(|s| vocab.encode(s)).collect();
        let mut rng = stream(0, Purpose::Dropout, 0);
        let enc = encode_turn(&model.encoder, &vocab.encode(&context.tokens), &ids, 0.0, false, &mut rng);

        // o_i at the first turn: exact zero vector for every candidate
        let state = SelectionState::new(config.selector.m, config.selector.weights());
        for r in &enc.correlated {
            let o = accumulate_difference(&state, r, &model.selector.diff_weight, &model.selector.diff_bias);
            assert!(
                o.to_vec().iter().all(|v| v.to_bits() == 0.0f64.to_bits()),
                "criterion 3 FAIL: first-turn difference not bitwise zero"
            );
        }

        // beta_diff at the first turn: exact zero for every candidate
        if variant == SelectorVariant::Disentangled {
            let mut state = SelectionState::new(config.selector.m, config.selector.weights());
            let out = select(
                &model.selector,
                &enc,
                &mut state,
                &cands.valid,
                variant,
                Ablation::None,
                Some(cands.shifted_gold),
                Mode::Train,
            );
            let diff_scores = out.diff_scores.expect("disentangled emits components").to_vec();
            assert!(
                diff_scores.iter().all(|v| v.to_bits() == 0.0f64.to_bits()),
                "criterion 3 FAIL: first-turn differential scores not bitwise zero"
            );
        }
    }
    pass("criterion 3 (first-turn invariants)", "o and beta_diff bitwise zero in both variants".into());
}

fn transition_corpora() -> (Vec<Dialogue>, Vec<Dialogue>) {
    (
        make_synthetic_transition_corpus(5, 400, 4, 11),
        make_synthetic_transition_corpus(5, 100, 4, 12),
    )
}

#[test]
fn criterion_04_differential_selector_efficacy() {
    let t0 = Instant::now();
    let (corpus, heldout) = transition_corpora();
    let dir = tempfile::tempdir().unwrap();

    // full disentangled model: early-stop at 0.90 later-turn accuracy
    let mut full = synth_config(SelectorVariant::Disentangled);
    cap_context(&mut full, 4);
    full.train.epochs = 100;
    full.train.stop_at_dev_acc = Some(0.90);
    full.train.stop_metric = StopMetric::AccLaterTurns;
    let outcome = train(&full, &corpus, &heldout, &dir.path().join("full"), None).unwrap();
    assert!(
        outcome.best_dev_acc_later_turns >= 0.90,
        "criterion 4 FAIL: full model reached only {:.3} on turns >= 2 within {} epochs",
        outcome.best_dev_acc_later_turns,
        outcome.epochs_run
    );
    assert!(outcome.epochs_run <= 100);

    // ablation without the differential selector: stays at chance
    let mut ablated = synth_config(SelectorVariant::Disentangled);
    cap_context(&mut ablated, 4);
    ablated.selector.ablation = Ablation::NoDiffsel;
    ablated.train.epochs = 25;
    let ab = train(&ablated, &corpus, &heldout, &dir.path().join("ablated"), None).unwrap();
    let worst = ab
        .epoch_logs
        .iter()
        .map(|e| e.dev_acc_later_turns)
        .fold(0.0f64, f64::max);
    assert!(
        worst <= 0.35,
        "criterion 4 FAIL: no_diffsel ablation reached {worst:.3} on turns >= 2 (bound 0.35)"
    );

    let secs = t0.elapsed().as_secs_f64();
    assert!(secs < 900.0, "criterion 4 FAIL: runtime {secs:.0}s exceeds the 15-minute target");
    pass(
        "criterion 4 (differential-selector efficacy)",
        format!(
            "full model {:.3} in {} epoch(s); no_diffsel peak {:.3} over 25 epochs; {:.0}s",
            outcome.best_dev_acc_later_turns, outcome.epochs_run, worst, secs
        ),
    );
}

#[test]
fn criterion_05_contextual_selector_efficacy() {
    let corpus = make_synthetic_context_corpus(5, 400, 4, 21);
    let heldout = make_synthetic_context_corpus(5, 100, 4, 22);
    let dir = tempfile::tempdir().unwrap();

    let mut full = synth_config(SelectorVariant::Disentangled);
    cap_context(&mut full, 5); // posts carry 4 noise tokens + the keyword
    full.train.epochs = 100;
    full.train.stop_at_dev_acc = Some(0.90);
    full.train.stop_metric = StopMetric::Acc;
    let outcome = train(&full, &corpus, &heldout, &dir.path().join("full"), None).unwrap();
    assert!(
        outcome.best_dev_acc >= 0.90,
        "criterion 5 FAIL: full model reached only {:.3} within {} epochs",
        outcome.best_dev_acc,
        outcome.epochs_run
    );

    let mut ablated = synth_config(SelectorVariant::Disentangled);
    cap_context(&mut ablated, 5);
    ablated.selector.ablation = Ablation::NoCtxsel;
    ablated.train.epochs = 25;
    let ab = train(&ablated, &corpus, &heldout, &dir.path().join("ablated"), None).unwrap();
    let worst = ab.epoch_logs.iter().map(|e| e.dev_acc).fold(0.0f64, f64::max);
    assert!(
        worst <= 0.35,
        "criterion 5 FAIL: no_ctxsel ablation reached {worst:.3} (bound 0.35)"
    );
    pass(
        "criterion 5 (contextual-selector efficacy)",
        format!(
            "full model {:.3} in {} epoch(s); no_ctxsel peak {:.3} over 25 epochs",
            outcome.best_dev_acc, outcome.epochs_run, worst
        ),
    );
}

#[test]
fn criterion_06_history_depth_plumbing() {
    let (corpus, heldout) = transition_corpora();
    let dir = tempfile::tempdir().unwrap();
    let mut logs = Vec::new();
    let mut summary = Vec::new();
    for m in 1..=3usize {
        let mut config = synth_config(SelectorVariant::Disentangled);
        cap_context(&mut config, 4);
        config.selector.m = m;
        config.train.epochs = 100;
        config.train.stop_at_dev_acc = Some(0.90);
        config.train.stop_metric = StopMetric::AccLaterTurns;
        let run = dir.path().join(format!("m{m}"));
        let outcome = train(&config, &corpus, &heldout, &run, None).unwrap();
        assert!(
            outcome.best_dev_acc_later_turns >= 0.90,
            "criterion 6 FAIL: M={m} reached only {:.3}",
            outcome.best_dev_acc_later_turns
        );
        let log = std::fs::read_to_string(run.join("log")).unwrap();
        // M is observable in the config echo, with the parameter count
        let first: serde_json::Value = serde_json::from_str(log.lines().next().unwrap()).unwrap();
        assert_eq!(first["config"]["selector"]["M"], m as u64);
        assert!(first["n_params"].as_u64().unwrap() > 0);
        summary.push(format!("M={m}: {:.3} in {} ep", outcome.best_dev_acc_later_turns, outcome.epochs_run));
        logs.push(log);
    }
    assert_ne!(logs[0], logs[1], "criterion 6 FAIL: M=1 and M=2 logs identical");
    assert_ne!(logs[1], logs[2], "criterion 6 FAIL: M=2 and M=3 logs identical");
    assert_ne!(logs[0], logs[2], "criterion 6 FAIL: M=1 and M=3 logs identical");
    pass("criterion 6 (M-sensitivity plumbing)", summary.join("; "));
}

#[test]
fn criterion_07_overfit_oracle() {
    let corpus = make_synthetic_transition_corpus(3, 10, 3, 31);
    let dir = tempfile::tempdir().unwrap();
    let mut config = synth_config(SelectorVariant::Fused);
    config.train.epochs = 500;
    config.train.learning_rate = 0.003;
    config.train.batch_size = 10;
    config.train.stop_at_dev_acc = Some(1.0);
    config.train.stop_metric = StopMetric::Acc;
    config.train.stop_at_token_nll = Some(0.1);
    config.eval.history = HistorySource::Predicted;
    let run = dir.path().join("overfit");
    let outcome = train(&config, &corpus, &corpus, &run, None).unwrap();
    let last = outcome.epoch_logs.last().unwrap();
    assert!(
        outcome.stopped_early && last.dev_acc == 1.0 && last.token_nll < 0.1,
        "criterion 7 FAIL: after {} epochs acc {:.3}, token NLL {:.4}",
        outcome.epochs_run,
        last.dev_acc,
        last.token_nll
    );

    // greedy decoding reproduces every gold response exactly
    let ckpt = run.join(format!("epoch-{}.ckpt", last.epoch));
    let loaded = diffks_core::checkpoint::load_checkpoint(&ckpt).unwrap();
    let report = evaluate_model(&loaded.model, &loaded.vocab, &corpus, &loaded.config, HistorySource::Predicted);
    assert_eq!(report.acc, 1.0, "criterion 7 FAIL: checkpoint eval acc {}", report.acc);
    assert!(
        report.bleu4 > 0.99,
        "criterion 7 FAIL: checkpoint eval BLEU-4 {:.4} (exact reproduction should give 1.0)",
        report.bleu4
    );
    let mut rng = stream(0, Purpose::Dropout, 0);
    for d in &corpus {
        let records = forward_dialogue(
            &loaded.model,
            &loaded.vocab,
            d,
            &loaded.config,
            Mode::Eval,
            HistorySource::Predicted,
            &mut rng,
        );
        for (r, turn) in records.iter().zip(&d.turns) {
            let text = loaded.vocab.decode(r.generated.as_ref().unwrap());
            assert_eq!(
                &text, &turn.response,
                "criterion 7 FAIL: dialogue {} turn {} decoded {:?}",
                d.id, r.turn, text
            );
        }
    }
    pass(
        "criterion 7 (overfit oracle)",
        format!(
            "10 dialogues memorized in {} epochs (token NLL {:.4}, acc 1.0, all responses reproduced)",
            outcome.epochs_run, last.token_nll
        ),
    );
}

#[test]
fn criterion_08_metric_oracles() {
    // worked examples
    let toks = |s: &str| -> Vec<String> { s.split(' ').map(str::to_string).collect() };
    let bleu = corpus_bleu(&[toks("the cat sat")], &[toks("the cat sat down")], 2);
    assert!(
        (bleu - 0.7165).abs() <= 1e-4,
        "criterion 8 FAIL: worked BLEU-2 example gave {bleu}"
    );
    let f1 = rouge2(&toks("a b c d"), &toks("a b x d"));
    assert_eq!(f1, 1.0 / 3.0, "criterion 8 FAIL: worked ROUGE-2 example gave {f1}");

    // brute-force equivalence on 50 random pairs (lengths 1-20, vocab 10)
    let mut rng = stream(88, Purpose::Init, 0);
    let sentence = |rng: &mut rand_chacha::ChaCha12Rng| -> Vec<String> {
        let len = 1 + (rng.random::<u32>() % 20) as usize;
        (0..len).map(|_| format!("w{}", rng.random::<u32>() % 10)).collect()
    };
    for trial in 0..50 {
        let cand = sentence(&mut rng);
        let reference = sentence(&mut rng);
        for max_n in [2usize, 4] {
            let got = corpus_bleu(&[cand.clone()], &[reference.clone()], max_n);
            let want = brute_force_bleu(&cand, &reference, max_n);
            assert!(
                (got - want).abs() <= 1e-9,
                "criterion 8 FAIL: trial {trial} BLEU-{max_n} {got} vs brute force {want}"
            );
        }
        let got = rouge2(&cand, &reference);
        let want = brute_force_rouge2(&cand, &reference);
        assert!(
            (got - want).abs() <= 1e-9,
            "criterion 8 FAIL: trial {trial} ROUGE-2 {got} vs brute force {want}"
        );
    }
    pass("criterion 8 (metric oracles)", "worked examples and 50 brute-force pairs within 1e-9".into());
}

/// Position-matching BLEU: each candidate n-gram greedily consumes one
/// unused reference position; precision counters never rely on hash-count
/// clipping.
fn brute_force_bleu(cand: &[String], reference: &[String], max_n: usize) -> f64 {
    let c = cand.len() as f64;
    let r = reference.len() as f64;
    if cand.is_empty() {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 1..=max_n {
        let cand_grams: Vec<&[String]> = cand.windows(n).collect();
        let ref_grams: Vec<&[String]> = reference.windows(n).collect();
        let mut used = vec![false; ref_grams.len()];
        let mut matched = 0usize;
        for g in &cand_grams {
            if let Some(j) = ref_grams
                .iter()
                .enumerate()
                .position(|(j, rg)| !used[j] && rg == g)
            {
                used[j] = true;
                matched += 1;
            }
        }
        let total = cand_grams.len();
        let p = if total == 0 || matched == 0 { 1e-9 } else { matched as f64 / total as f64 };
        log_sum += p.ln();
    }
    let bp = if c < r { (1.0 - r / c).exp() } else { 1.0 };
    bp * (log_sum / max_n as f64).exp()
}

fn brute_force_rouge2(cand: &[String], reference: &[String]) -> f64 {
    if cand.len() < 2 || reference.len() < 2 {
        return 0.0;
    }
    let cand_grams: Vec<&[String]> = cand.windows(2).collect();
    let ref_grams: Vec<&[String]> = reference.windows(2).collect();
    let mut used = vec![false; ref_grams.len()];
    let mut overlap = 0usize;
    for g in &cand_grams {
        if let Some(j) = ref_grams.iter().enumerate().position(|(j, rg)| !used[j] && rg == g) {
            used[j] = true;
            overlap += 1;
        }
    }
    if overlap == 0 {
        return 0.0;
    }
    let p = overlap as f64 / cand_grams.len() as f64;
    let r = overlap as f64 / ref_grams.len() as f64;
    2.0 * p * r / (p + r)
}

#[test]
fn criterion_09_copy_mechanism() {
    // Fixture: the gold response copies the only knowledge sentence, and the
    // middle token's generation score is pinned at -20 (its output row is
    // zeroed and the whole generation projection frozen), so any probability
    // it earns must flow through the copy path.
    let toks = |s: &str| -> Vec<String> { s.split(' ').map(str::to_string).collect() };
    let dialogue = Dialogue {
        id: "copy-fixture".into(),
        turns: vec![diffks_core::data::Turn {
            post: toks("say the fact"),
            response: toks("alpha ztok beta"),
            knowledge: vec![toks("alpha ztok beta")],
            gold_index: Some(0),
        }],
    };
    let corpus = vec![dialogue.clone()];
    let vocab = Vocabulary::build(&corpus, 50);
    let z = vocab.id("ztok");

    let mut config = synth_config(SelectorVariant::Fused);
    config.model.embedding_dim = 16;
    config.model.hidden_size = 16;
    config.model.decoder_hidden = 32;
    let model = ModelParams::init(&config, &vocab, &mut stream(41, Purpose::Init, 0));

    // force phi_g(ztok) = -20 whatever the state
    let mut w_g = model.decoder.out_weight.to_vec();
    let d = config.model.decoder_hidden;
    for j in 0..d {
        w_g[z * d + j] = 0.0;
    }
    model.decoder.out_weight.set_values(&w_g);
    let mut b_g = model.decoder.out_bias.to_vec();
    b_g[z] = -20.0;
    model.decoder.out_bias.set_values(&b_g);

    let mut groups = build_groups(&model);
    for g in groups.iter_mut() {
        for e in g.entries.iter_mut() {
            if e.name == "decoder.out_weight" || e.name == "decoder.out_bias" {
                e.frozen = true;
            }
        }
    }

    let mut adam = Adam::new(0.003);
    let mut reached = None;
    for epoch in 1..=200 {
        let mut rng = stream(7, Purpose::Dropout, epoch);
        let records = forward_dialogue(
            &model,
            &vocab,
            &dialogue,
            &config,
            Mode::Train,
            HistorySource::Predicted,
            &mut rng,
        );
        let (_, _, loss) = compute_total_loss(&records, 1.0);
        loss.backward();
        Adam::clip_global_norm(&groups, 5.0);
        adam.step(&mut groups).unwrap();

        // teacher-forced probe of P(ztok) at its position (step 2)
        let p_z = probe_token_probability(&model, &vocab, &dialogue, &config, z, 1);
        if p_z > 0.5 {
            reached = Some((epoch, p_z));
            break;
        }
    }
    let (epoch, p_z) = reached.expect("criterion 9 FAIL: copy path never lifted P above 0.5 in 200 epochs");

    // the generation path is still pinned: the mass must come from copying
    let (phi_g_z, copy_by_word) = probe_scores(&model, &vocab, &dialogue, &config, z, 1);
    assert_eq!(phi_g_z, -20.0, "criterion 9 FAIL: frozen generation score drifted");
    assert!(copy_by_word > 0.0, "criterion 9 FAIL: copy score not positive at convergence");
    pass(
        "criterion 9 (copy mechanism)",
        format!("P(pinned token) = {p_z:.3} at epoch {epoch} with phi_g fixed at -20"),
    );
}

/// Teacher-forced probability of `token` at step index `step` of turn 1.
fn probe_token_probability(
    model: &ModelParams,
    vocab: &Vocabulary,
    dialogue: &Dialogue,
    config: &Config,
    token: usize,
    step: usize,
) -> f64 {
    let (probs, _, _) = teacher_forced_steps(model, vocab, dialogue, config);
    probs[step].to_vec()[token]
}

fn probe_scores(
    model: &ModelParams,
    vocab: &Vocabulary,
    dialogue: &Dialogue,
    config: &Config,
    token: usize,
    step: usize,
) -> (f64, f64) {
    let (_, gen, copy) = teacher_forced_steps(model, vocab, dialogue, config);
    let phi_g = gen[step].to_vec()[token];
    let copy_sum = copy[step]
        .iter()
        .filter(|(w, _)| *w == token)
        .map(|(_, s)| *s)
        .sum::<f64>();
    (phi_g, copy_sum)
}

#[allow(clippy::type_complexity)]
fn teacher_forced_steps(
    model: &ModelParams,
    vocab: &Vocabulary,
    dialogue: &Dialogue,
    config: &Config,
) -> (Vec<Tensor>, Vec<Tensor>, Vec<Vec<(usize, f64)>>) {
    let caps = diffks_core::rollout::caps_of(config);
    let turn = &dialogue.turns[0];
    let context = diffks_core::data::assemble_context(dialogue, 1, &caps);
    let cands = diffks_core::data::prepare_candidates(turn, &caps);
    let ids: Vec<Vec<usize>> = cands.sentences.iter().map(|s| vocab.encode(s)).collect();
    let mut rng = stream(0, Purpose::Dropout, 0);
    let enc = encode_turn(&model.encoder, &vocab.encode(&context.tokens), &ids, 0.0, false, &mut rng);
    let gold = cands.shifted_gold;
    let knowledge = &enc.candidates[gold];
    let response_ids = vocab.encode(&turn.response);
    let mut s = init_state(&model.decoder, &enc.context, knowledge);
    let mut prev = diffks_core::data::SOS;
    let mut probs = Vec::new();
    let mut gen = Vec::new();
    let mut copy = Vec::new();
    for t in 0..=response_ids.len() {
        let step = decode_step(
            &model.decoder,
            &s,
            prev,
            &model.encoder.embedding,
            knowledge,
            &enc.candidate_tokens[gold],
            &enc.candidate_ids[gold],
            0.0,
            false,
            &mut rng,
        );
        probs.push(step.probs.clone());
        gen.push(step.gen_scores.clone());
        copy.push(step.copy_scores_by_word());
        s = step.state.clone();
        if t < response_ids.len() {
            prev = response_ids[t];
        }
    }
    (probs, gen, copy)
}

#[test]
fn criterion_10_determinism_and_persistence() {
    let corpus = make_synthetic_transition_corpus(3, 12, 2, 51);
    let dev = make_synthetic_transition_corpus(3, 6, 2, 52);
    let dir = tempfile::tempdir().unwrap();
    let mut config = synth_config(SelectorVariant::Disentangled);
    config.train.epochs = 3;
    config.train.checkpoint_every = 1;

    let full = train(&config, &corpus, &dev, &dir.path().join("full"), None).unwrap();

    let mut partial_cfg = config.clone();
    partial_cfg.train.epochs = 2;
    train(&partial_cfg, &corpus, &dev, &dir.path().join("partial"), None).unwrap();
    let loaded = diffks_core::checkpoint::load_checkpoint(&dir.path().join("partial/epoch-2.ckpt")).unwrap();
    let mut extended = loaded.config.clone();
    extended.train.epochs = 3;
    let mut adam = Adam::new(loaded.config.train.learning_rate);
    adam.step = loaded.adam_step;
    let amended = dir.path().join("partial/epoch-2-ext.ckpt");
    diffks_core::checkpoint::save_checkpoint(&amended, &extended, &loaded.vocab, &loaded.groups, &adam, 2)
        .unwrap();
    let resumed = train(&extended, &corpus, &dev, &dir.path().join("resumed"), Some(&amended)).unwrap();

    let a = &full.epoch_logs[2];
    let b = &resumed.epoch_logs[0];
    assert_eq!(
        a.train_loss.to_bits(),
        b.train_loss.to_bits(),
        "criterion 10 FAIL: resumed epoch-3 loss differs: {} vs {}",
        a.train_loss,
        b.train_loss
    );
    assert_eq!(a.train_nll.to_bits(), b.train_nll.to_bits());
    assert_eq!(a.train_ks.to_bits(), b.train_ks.to_bits());
    assert_eq!(a.dev_acc.to_bits(), b.dev_acc.to_bits());

    // evaluating one checkpoint twice is byte-identical
    let loaded = diffks_core::checkpoint::load_checkpoint(&dir.path().join("full/best.ckpt")).unwrap();
    let r1 = evaluate_model(&loaded.model, &loaded.vocab, &dev, &loaded.config, HistorySource::Predicted);
    let r2 = evaluate_model(&loaded.model, &loaded.vocab, &dev, &loaded.config, HistorySource::Predicted);
    assert_eq!(
        serde_json::to_vec(&r1).unwrap(),
        serde_json::to_vec(&r2).unwrap(),
        "criterion 10 FAIL: repeat evaluation differs"
    );
    pass(
        "criterion 10 (determinism & persistence)",
        "resume reproduces epoch 3 bit-identically; repeat eval identical".into(),
    );
}

#[test]
fn criterion_11_scale_readiness() {
    // Full reference hyperparameters, one epoch, small synthetic data. The
    // converted benchmark corpora are exercised by the ignored test below
    // when present; reproducing published numbers is out of scope at desk
    // scale.
    let corpus = make_synthetic_transition_corpus(4, 4, 2, 61);
    let dev = make_synthetic_transition_corpus(4, 2, 2, 62);
    let dir = tempfile::tempdir().unwrap();
    let mut config = Config::default(); // vocab 20k, 300-d, H=200, D=400, dropout 0.5, lr 5e-4, batch 8
    config.train.epochs = 1;
    config.eval.max_decode_len = 8;
    assert_eq!(config.data.vocab_cap, 20_000);
    assert_eq!(config.model.embedding_dim, 300);
    assert_eq!(config.model.hidden_size, 200);
    assert_eq!(config.model.decoder_hidden, 400);
    assert_eq!(config.train.dropout, 0.5);
    assert_eq!(config.train.learning_rate, 0.0005);
    assert_eq!(config.train.batch_size, 8);
    let outcome = train(&config, &corpus, &dev, &dir.path().join("run"), None).unwrap();
    assert_eq!(outcome.epochs_run, 1);
    let log = std::fs::read_to_string(dir.path().join("run/log")).unwrap();
    let first: serde_json::Value = serde_json::from_str(log.lines().next().unwrap()).unwrap();
    assert_eq!(first["config"]["data"]["vocab_cap"], 20_000);
    assert_eq!(first["config"]["model"]["hidden_size"], 200);
    let e1 = &outcome.epoch_logs[0];
    assert!(e1.train_loss.is_finite() && e1.dev_bleu4.is_finite());
    pass(
        "criterion 11 (scale readiness)",
        format!("1 epoch at reference hyperparameters, {} parameters", outcome.n_params),
    );
}

/// Full-corpus scale readiness on converted benchmark data; runs only when
/// DIFFKS_WOW_DIR points at a directory with train.jsonl / dev.jsonl
/// produced by scripts/convert_wow.py.
#[test]
#[ignore = "needs converted benchmark corpora (set DIFFKS_WOW_DIR)"]
fn criterion_11_full_corpus_one_epoch() {
    let dir = std::env::var("DIFFKS_WOW_DIR").expect("set DIFFKS_WOW_DIR");
    let base = Path::new(&dir);
    let corpus = diffks_core::data::load_corpus(&base.join("train.jsonl")).unwrap();
    let dev = diffks_core::data::load_corpus(&base.join("dev.jsonl")).unwrap();
    let run = tempfile::tempdir().unwrap();
    let mut config = Config::default();
    config.train.epochs = 1;
    let outcome = train(&config, &corpus, &dev, run.path(), None).unwrap();
    assert_eq!(outcome.epochs_run, 1);
}
