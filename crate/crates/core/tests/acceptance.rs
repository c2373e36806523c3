//! Acceptance suite: every release criterion with its tolerance pinned,
//! one pass/fail line per criterion (visible with `--nocapture`).
//!
//! Run with `cargo test --test acceptance -- --nocapture`.

use std::time::{Duration, Instant};

use spider_core::controller::{
    load_checkpoint, save_checkpoint, BatchItem, Controller, ControllerConfig,
};
use spider_core::forge::{
    build_dataset, build_instance, build_travel_guide, builtin_pool, concat_multi_sample,
    emit_pseudo_dataset, synth_captions, synth_gallery, verify_instance, CaptionRecord, Flavor,
    SourceKind, SourceModality, StageMix,
};
use spider_core::numerics::{AdamState, Tensor};
use spider_core::pipeline::{
    pilot_items_from_gallery, run_pipeline, train_loop, Gallery, MockEncoders, Planner,
};
use spider_core::rng::Rng;
use spider_core::template::{
    parse_answer, parse_question, serialize_answer, serialize_question,
    validate_answer_against_task, AnswerMessage, InputAsset, Modality, ModalityGroup,
    QuestionMessage, TaskPrompt,
};

fn criterion(number: u32, name: &str, f: impl FnOnce() -> Result<String, String>) {
    match f() {
        Ok(detail) => println!("PASS [criterion {number}] {name}: {detail}"),
        Err(detail) => {
            println!("FAIL [criterion {number}] {name}: {detail}");
            panic!("criterion {number} ({name}) failed: {detail}");
        }
    }
}

fn budget(started: Instant, limit: Duration, what: &str) -> Result<Duration, String> {
    let elapsed = started.elapsed();
    if elapsed > limit {
        return Err(format!("{what} took {elapsed:.2?}, budget {limit:.2?}"));
    }
    Ok(elapsed)
}

// --- random message generation for the round-trip criterion ---------

const WORDS: [&str; 16] = [
    "cat", "couch", "red", "bus", "quiet", "garden", "storm", "violin", "harbor", "night",
    "train", "blue", "robot", "sitting", "near", "gate",
];

fn random_text(rng: &mut Rng, min_words: usize, max_words: usize) -> String {
    let n = min_words + rng.below(max_words - min_words + 1);
    (0..n)
        .map(|_| *rng.choice(&WORDS))
        .collect::<Vec<_>>()
        .join(" ")
}

fn random_question(rng: &mut Rng) -> QuestionMessage {
    let task_prompt = *rng.choice(&TaskPrompt::ALL);
    let input_asset = if rng.below(2) == 0 {
        Some(InputAsset {
            modality: *rng.choice(&Modality::ALL),
            asset_ref: format!("asset_{:04}", rng.below(10_000)),
        })
    } else {
        None
    };
    QuestionMessage {
        task_prompt,
        input_asset,
        instruction: random_text(rng, 1, 10),
    }
}

fn random_answer(rng: &mut Rng) -> AnswerMessage {
    let group_count = 1 + rng.below(5);
    let groups = (0..group_count)
        .map(|i| ModalityGroup {
            text_response: match rng.below(4) {
                0 => String::new(),
                1 => ".".to_string(),
                _ => format!("{}.", random_text(rng, 1, 6)),
            },
            modality: *rng.choice(&Modality::ALL),
            t_prompt: random_text(rng, 1, 8),
            m_prompt_index: if i == 0 { 0 } else { rng.below(3) as u32 },
        })
        .collect();
    let tail_text = if rng.below(3) == 0 {
        random_text(rng, 1, 5)
    } else {
        String::new()
    };
    AnswerMessage { groups, tail_text }
}

const REFERENCE_QUESTION: &str = "[INPUT] [SMARTMULTIMODAL] Please generate an image and a video based on the following text: A cat is sitting on a couch";
const REFERENCE_ANSWER: &str = "[OUT] A cat is sitting on a couch. <IMAGE> A cat is sitting on a couch [IMAGE_0] </IMAGE>. <VIDEO> A cat is sitting on a couch [VIDEO_0] </VIDEO> [END]";
const SIGNAL_FRAGMENT: &str = "[OUT] <IMAGE> Forbidden City [IMAGE_0] </IMAGE>. <AUDIO> Peking Opera [AUDIO_0] </AUDIO>. [END]";

#[test]
fn acceptance_01_grammar_round_trip() {
    criterion(1, "grammar round trip", || {
        let started = Instant::now();
        let mut rng = Rng::new(0xA11CE).substream("roundtrip");
        for i in 0..10_000 {
            let q = random_question(&mut rng);
            let qs = serialize_question(&q);
            let back = parse_question(&qs).map_err(|e| format!("case {i}: {e} in `{qs}`"))?;
            if back != q {
                return Err(format!("question case {i} diverged: `{qs}`"));
            }
            let a = random_answer(&mut rng);
            let as_ = serialize_answer(&a).map_err(|e| format!("case {i}: {e}"))?;
            let back = parse_answer(&as_).map_err(|e| format!("case {i}: {e} in `{as_}`"))?;
            if back != a {
                return Err(format!("answer case {i} diverged: `{as_}`"));
            }
        }

        // Reference strings parse into the documented structures.
        let q = parse_question(REFERENCE_QUESTION).map_err(|e| e.to_string())?;
        if q.task_prompt != TaskPrompt::SmartMultimodal
            || q.input_asset.is_some()
            || q.instruction
                != "Please generate an image and a video based on the following text: A cat is sitting on a couch"
        {
            return Err("reference question structure mismatch".into());
        }
        let a = parse_answer(REFERENCE_ANSWER).map_err(|e| e.to_string())?;
        let expected_groups = [
            ("A cat is sitting on a couch.", Modality::Image),
            (".", Modality::Video),
        ];
        if a.groups.len() != 2 || !a.tail_text.is_empty() {
            return Err("reference answer shape mismatch".into());
        }
        for (g, (text, modality)) in a.groups.iter().zip(expected_groups) {
            if g.text_response != text
                || g.modality != modality
                || g.t_prompt != "A cat is sitting on a couch"
                || g.m_prompt_index != 0
            {
                return Err(format!("reference group mismatch: {g:?}"));
            }
        }
        if serialize_answer(&a).unwrap() != REFERENCE_ANSWER {
            return Err("reference answer does not re-serialize exactly".into());
        }
        let frag = parse_answer(SIGNAL_FRAGMENT).map_err(|e| e.to_string())?;
        if frag.groups.len() != 2
            || frag.groups[0].t_prompt != "Forbidden City"
            || frag.groups[1].t_prompt != "Peking Opera"
            || frag.groups[1].modality != Modality::Audio
        {
            return Err("signal fragment structure mismatch".into());
        }

        let elapsed = budget(started, Duration::from_secs(5), "10k round trips")?;
        Ok(format!("10,000 question+answer pairs and both reference strings in {elapsed:.2?}"))
    });
}

fn gradcheck_config() -> ControllerConfig {
    ControllerConfig {
        d: 16,
        d_c: 8,
        k: 2,
        router_hidden: 8,
        ..ControllerConfig::default()
    }
}

fn random_items(config: &ControllerConfig, seed: u64, count: usize) -> Vec<BatchItem> {
    let encoders = MockEncoders::new(config.d, config.d_c);
    let mut rng = Rng::new(seed).substream("items");
    (0..count)
        .map(|i| {
            let modality = Modality::ALL[i % Modality::ALL.len()];
            let context = encoders.encode_modality(&format!("item_{}", rng.next_u64()), modality);
            BatchItem {
                modality,
                m_e: encoders.llm_hidden(&context, modality, config.l),
                t_e: encoders
                    .encode_text(&format!("caption {}", rng.next_u64()))
                    .expect("non-empty"),
                e: context,
            }
        })
        .collect()
}

#[test]
fn acceptance_02_gradient_fidelity() {
    criterion(2, "gradient fidelity", || {
        let started = Instant::now();
        let config = gradcheck_config();
        let mut worst = 0.0f64;
        for seed in 0..10u64 {
            let controller =
                Controller::init(config.clone(), seed).map_err(|e| e.to_string())?;
            let items = random_items(&config, seed, 2);
            let report = controller
                .grad_check(&items, 1e-5, false)
                .map_err(|e| e.to_string())?;
            if report.max_rel_err > 1e-4 {
                return Err(format!(
                    "seed {seed}: max rel err {:.3e} at `{}` exceeds 1e-4",
                    report.max_rel_err, report.worst_param
                ));
            }
            worst = worst.max(report.max_rel_err);
        }
        let elapsed = budget(started, Duration::from_secs(30), "10-seed gradcheck")?;
        Ok(format!("worst relative error {worst:.3e} over 10 seeds at D=16 in {elapsed:.2?}"))
    });
}

#[test]
fn acceptance_03_router_simplex() {
    criterion(3, "router simplex", || {
        let config = ControllerConfig::default();
        let controller = Controller::init(config.clone(), 7).map_err(|e| e.to_string())?;
        let mut rng = Rng::new(31).substream("router");
        for i in 0..1000 {
            let data: Vec<f64> = (0..config.l * config.d)
                .map(|_| rng.uniform(-5.0, 5.0))
                .collect();
            let m_e = Tensor::new(config.l, config.d, data).unwrap();
            let w = controller.route(&m_e).map_err(|e| e.to_string())?;
            if !w.data().iter().all(|&v| v > 0.0) {
                return Err(format!("input {i}: non-positive weight {:?}", w.data()));
            }
            let sum: f64 = w.data().iter().sum();
            if (sum - 1.0).abs() > 1e-12 {
                return Err(format!("input {i}: weights sum to {sum}"));
            }
        }
        Ok("1000 random inputs: weights positive, sums within 1e-12".into())
    });
}

#[test]
fn acceptance_04_fusion_exactness_at_alpha_zero() {
    criterion(4, "alpha=0 fusion exactness", || {
        let config = ControllerConfig {
            alpha: 0.0,
            ..ControllerConfig::default()
        };
        let encoders = MockEncoders::new(config.d, config.d_c);
        let gallery = Gallery::from_records(synth_gallery(200, 8).unwrap(), &encoders)
            .map_err(|e| e.to_string())?;
        let controller = Controller::init(config.clone(), 1).map_err(|e| e.to_string())?;
        let reinit = Controller::init(config.clone(), 0xDEAD).map_err(|e| e.to_string())?;
        let mut rng = Rng::new(77).substream("alpha0");
        for trial in 0..500 {
            let asset = &gallery.assets()[rng.below(gallery.len())];
            let m_e = encoders.llm_hidden(&asset.encoder_embedding, asset.modality, config.l);
            let t_e = asset.target_embedding.clone();
            let out = controller
                .infer_group(asset.modality, &m_e, &t_e)
                .map_err(|e| e.to_string())?;
            if out.s != t_e {
                return Err(format!("trial {trial}: S differs from T_e at alpha=0"));
            }
            let (hit, score) = gallery
                .decode(asset.modality, &out.s)
                .map_err(|e| e.to_string())?;
            if hit.asset_ref != asset.asset_ref {
                return Err(format!(
                    "trial {trial}: retrieved {} for caption of {}",
                    hit.asset_ref, asset.asset_ref
                ));
            }
            if (score - 1.0).abs() > 1e-12 {
                return Err(format!("trial {trial}: score {score} != 1.0"));
            }
            // Retrieval must not depend on the controller parameters.
            let out2 = reinit
                .infer_group(asset.modality, &m_e, &t_e)
                .map_err(|e| e.to_string())?;
            let (hit2, _) = gallery
                .decode(asset.modality, &out2.s)
                .map_err(|e| e.to_string())?;
            if hit2.asset_ref != hit.asset_ref {
                return Err(format!("trial {trial}: retrieval changed under re-init"));
            }
        }
        Ok("500/500 trials: S == T_e bitwise, matching asset at score 1.0, re-init invariant".into())
    });
}

/// The shared pilot run: default configuration, 200-asset gallery,
/// 500 steps of batch 4.
fn pilot(k: usize, seed: u64) -> Result<(f64, f64, f64, f64), String> {
    let config = ControllerConfig {
        k,
        ..ControllerConfig::default()
    };
    let encoders = MockEncoders::new(config.d, config.d_c);
    let gallery = Gallery::from_records(
        synth_gallery(200, seed).map_err(|e| e.to_string())?,
        &encoders,
    )
    .map_err(|e| e.to_string())?;
    let items = pilot_items_from_gallery(&gallery, &encoders, config.l);
    let mut controller = Controller::init(config, seed).map_err(|e| e.to_string())?;
    let mut adam = AdamState::with_defaults();
    let initial = controller.evaluate(&items).map_err(|e| e.to_string())?;
    train_loop(&mut controller, &mut adam, &items, 500, 4, seed, |_, _| {})
        .map_err(|e| e.to_string())?;
    let fin = controller.evaluate(&items).map_err(|e| e.to_string())?;
    for (name, t) in controller.params.named() {
        if !t.all_finite() {
            return Err(format!("non-finite parameter `{name}` after training"));
        }
    }
    Ok((
        initial.loss_total,
        fin.loss_total,
        fin.mean_cos_align,
        fin.mean_cos_recon,
    ))
}

#[test]
fn acceptance_05_pilot_training() {
    criterion(5, "pilot training", || {
        let started = Instant::now();
        let optimizer = AdamState::with_defaults();
        if optimizer.learning_rate != 1e-4 || optimizer.weight_decay != 1e-3 {
            return Err("optimizer defaults drifted from lr 1e-4 / wd 1e-3".into());
        }
        let config = ControllerConfig::default();
        if (config.d, config.d_c, config.k) != (64, 32, 2) || config.alpha != 0.2 {
            return Err("controller defaults drifted from D=64, D_c=32, K=2, alpha=0.2".into());
        }
        let (initial, fin, cos_align, cos_recon) = pilot(2, 42)?;
        if fin >= initial {
            return Err(format!("final loss {fin:.4} not below initial {initial:.4}"));
        }
        if cos_align < 0.99 {
            return Err(format!("mean cos(S, T_e) {cos_align:.4} < 0.99"));
        }
        if cos_recon < 0.90 {
            return Err(format!("mean cos(pooled Qbar, E) {cos_recon:.4} < 0.90"));
        }
        let elapsed = budget(started, Duration::from_secs(60), "500-step pilot")?;
        Ok(format!(
            "loss {initial:.3} -> {fin:.4}, cos(S,T_e)={cos_align:.4}, cos(Qbar,E)={cos_recon:.4} in {elapsed:.2?}"
        ))
    });
}

#[test]
fn acceptance_06_expert_count_ablation_echo() {
    criterion(6, "K=2 vs K=1 ablation echo", || {
        let seed = 42;
        let (_, _, _, recon_k2) = pilot(2, seed)?;
        let (_, _, _, recon_k1) = pilot(1, seed)?;
        if recon_k2 < recon_k1 {
            return Err(format!(
                "K=2 reconstruction cosine {recon_k2:.4} below K=1 {recon_k1:.4}"
            ));
        }
        Ok(format!(
            "final reconstruction cosine: K=2 {recon_k2:.4} >= K=1 {recon_k1:.4} (seed {seed})"
        ))
    });
}

#[test]
fn acceptance_07_stage_mixing() {
    criterion(7, "stage mixing", || {
        for stage in 1..=3u8 {
            let mix = StageMix::for_stage(stage).map_err(|e| e.to_string())?;
            let total: f64 = mix.proportions().iter().map(|(_, p)| p).sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(format!("stage {stage} proportions sum to {total}"));
            }
            let mut rng = Rng::new(1000 + stage as u64).substream("mix");
            let draws = 100_000usize;
            let mut counts: std::collections::BTreeMap<&str, usize> = Default::default();
            for _ in 0..draws {
                *counts.entry(mix.sample(&mut rng)).or_default() += 1;
            }
            for (name, p) in mix.proportions() {
                let freq = *counts.get(name).unwrap_or(&0) as f64 / draws as f64;
                if (freq - p).abs() > 0.01 {
                    return Err(format!(
                        "stage {stage} `{name}`: frequency {freq:.4} vs proportion {p:.4}"
                    ));
                }
            }
        }
        let stage3 = StageMix::for_stage(3).unwrap();
        if stage3.mass_milli(&["smmi", "spmi", "tgi"]) != 700 {
            return Err("stage-3 instruction mass is not exactly 0.70".into());
        }
        Ok("3 stages x 100,000 draws within +/-0.01; sums exact; instruction mass 0.70".into())
    });
}

fn caption_sources() -> std::collections::BTreeMap<SourceKind, Vec<CaptionRecord>> {
    let mut out = std::collections::BTreeMap::new();
    for kind in SourceKind::ALL {
        let count = if kind == SourceKind::Cities { 1000 } else { 120 };
        out.insert(kind, synth_captions(kind, count, 2026));
    }
    out
}

#[test]
fn acceptance_08_forge_soundness() {
    criterion(8, "forge soundness", || {
        let sources = caption_sources();
        let per_flavor = 10_000usize.div_ceil(Flavor::ALL.len());
        let mut total = 0usize;
        for flavor in Flavor::ALL {
            let records = &sources[&SourceKind::for_flavor(flavor)];
            let pool = builtin_pool(flavor);
            let forged = build_dataset(flavor, per_flavor, 99, records, &pool)
                .map_err(|e| format!("{flavor}: {e}"))?;
            let again = build_dataset(flavor, per_flavor, 99, records, &pool)
                .map_err(|e| format!("{flavor}: {e}"))?;
            if forged != again {
                return Err(format!("{flavor}: re-forge with the same seed diverged"));
            }
            for (i, instance) in forged.iter().enumerate() {
                let question = parse_question(&instance.question)
                    .map_err(|e| format!("{flavor} #{i}: question: {e}"))?;
                let answer = parse_answer(&instance.answer)
                    .map_err(|e| format!("{flavor} #{i}: answer: {e}"))?;
                let violations = validate_answer_against_task(question.task_prompt, &answer);
                if !violations.is_empty() {
                    return Err(format!("{flavor} #{i}: {}", violations[0]));
                }
            }
            total += forged.len();
        }

        // Template-target multiset equality, checked per template over
        // every pool entry.
        for flavor in Flavor::ALL {
            let records = &sources[&SourceKind::for_flavor(flavor)];
            let usable: Vec<&CaptionRecord> = records
                .iter()
                .filter(|r| match flavor.input_modality() {
                    Some(m) => r.source_modality.as_modality() == Some(m),
                    None => true,
                })
                .collect();
            for (ti, template) in builtin_pool(flavor).iter().enumerate() {
                let instance = match flavor {
                    Flavor::Tgi => build_travel_guide(usable[ti % usable.len()], template),
                    Flavor::SmMi | Flavor::SpMi => {
                        let k = template.target_modalities.len();
                        let chosen: Vec<&CaptionRecord> =
                            (0..k).map(|j| usable[(ti + j) % usable.len()]).collect();
                        concat_multi_sample(&chosen, &template.target_modalities, template, flavor)
                    }
                    _ => build_instance(usable[ti % usable.len()], template, flavor),
                }
                .map_err(|e| format!("{flavor} template {ti}: {e}"))?;
                verify_instance(&instance, template)
                    .map_err(|e| format!("{flavor} template {ti}: {e}"))?;
                let answer = parse_answer(&instance.answer).unwrap();
                let mut got = answer.modalities();
                let mut want = template.target_modalities.clone();
                got.sort();
                want.sort();
                if got != want {
                    return Err(format!(
                        "{flavor} template {ti}: modalities {got:?} != {want:?}"
                    ));
                }
            }
        }
        Ok(format!(
            "{total} bulk instances across 11 flavors parse+validate; every template multiset-matches; re-forge byte-identical"
        ))
    });
}

#[test]
fn acceptance_09_pseudo_dataset() {
    criterion(9, "pseudo dataset emission", || {
        let started = Instant::now();
        let config = ControllerConfig::default();
        let encoders = MockEncoders::new(config.d, config.d_c);
        let gallery = Gallery::from_records(
            synth_gallery(200, 42).map_err(|e| e.to_string())?,
            &encoders,
        )
        .map_err(|e| e.to_string())?;
        // Train briefly and round-trip through a checkpoint file so the
        // emitter consumes a loadable artifact.
        let items = pilot_items_from_gallery(&gallery, &encoders, config.l);
        let mut controller = Controller::init(config, 42).map_err(|e| e.to_string())?;
        let mut adam = AdamState::with_defaults();
        train_loop(&mut controller, &mut adam, &items, 100, 4, 42, |_, _| {})
            .map_err(|e| e.to_string())?;
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let ckpt = dir.path().join("pilot.ckpt");
        save_checkpoint(&ckpt, &controller).map_err(|e| e.to_string())?;
        let trained = load_checkpoint(&ckpt).map_err(|e| e.to_string())?;
        let planner = Planner::with_builtin_pools();

        let mut total = 0usize;
        for flavor in Flavor::ALL {
            let count = spider_core::forge::default_count(flavor);
            let records = emit_pseudo_dataset(
                flavor, count, 7, &trained, &gallery, &encoders, &planner,
            )
            .map_err(|e| format!("{flavor}: {e}"))?;
            if records.len() != count {
                return Err(format!("{flavor}: {} records, wanted {count}", records.len()));
            }
            for (i, record) in records.iter().enumerate() {
                let question = parse_question(&record.question)
                    .map_err(|e| format!("{flavor} #{i}: question: {e}"))?;
                let answer = parse_answer(&record.answer)
                    .map_err(|e| format!("{flavor} #{i}: answer: {e}"))?;
                if !validate_answer_against_task(question.task_prompt, &answer).is_empty() {
                    return Err(format!("{flavor} #{i}: task validation failed"));
                }
                if record.realized_assets.len() != answer.groups.len() {
                    return Err(format!("{flavor} #{i}: realized count mismatch"));
                }
                for asset in &record.realized_assets {
                    let found = gallery
                        .get(&asset.asset_ref)
                        .ok_or_else(|| format!("{flavor} #{i}: {} not in gallery", asset.asset_ref))?;
                    if found.modality != asset.modality {
                        return Err(format!("{flavor} #{i}: modality mismatch"));
                    }
                }
            }
            total += records.len();
        }
        let elapsed = budget(started, Duration::from_secs(300), "pseudo emission")?;
        Ok(format!(
            "{total} records (2000 x 10 flavors + 1000 travel guides) all parse/validate, assets in gallery, in {elapsed:.2?}"
        ))
    });
}

#[test]
fn acceptance_10_decoder_oracle_equivalence() {
    criterion(10, "decoder oracle equivalence", || {
        let config = ControllerConfig::default();
        let encoders = MockEncoders::new(config.d, config.d_c);
        let gallery = Gallery::from_records(
            synth_gallery(200, 5).map_err(|e| e.to_string())?,
            &encoders,
        )
        .map_err(|e| e.to_string())?;
        let mut rng = Rng::new(606).substream("controls");
        for i in 0..1000 {
            let data: Vec<f64> = (0..config.d_c).map(|_| rng.uniform(-1.0, 1.0)).collect();
            let control = Tensor::new(1, config.d_c, data).unwrap();
            let modality = Modality::ALL[i % Modality::ALL.len()];
            let (fast, fast_score) = gallery
                .decode(modality, &control)
                .map_err(|e| e.to_string())?;
            // Brute-force oracle scan.
            let mut best_ref: Option<&str> = None;
            let mut best_score = f64::NEG_INFINITY;
            for asset in gallery.of_modality(modality) {
                let score = control.dot(&asset.target_embedding).unwrap()
                    / (control.l2_norm() * asset.target_embedding.l2_norm());
                if score > best_score
                    || (score == best_score
                        && best_ref.is_some_and(|r| asset.asset_ref.as_str() < r))
                {
                    best_score = score;
                    best_ref = Some(&asset.asset_ref);
                }
            }
            if best_ref != Some(fast.asset_ref.as_str()) || fast_score != best_score {
                return Err(format!(
                    "control {i}: decode gave {} ({fast_score}), oracle {} ({best_score})",
                    fast.asset_ref,
                    best_ref.unwrap_or("none")
                ));
            }
        }
        Ok("1000 random control embeddings: argmax agrees with the brute-force scan".into())
    });
}
