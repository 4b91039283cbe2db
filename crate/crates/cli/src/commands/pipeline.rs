use std::io::Write;

use distemb::embio::{
    default_tokens, read_corpus, write_corpus, write_curve_csv, write_embedding_text, write_factorized,
    write_report_json,
};
use distemb::report::Report;
use distemb::trainer::{
    distill_finetune, run_algorithm1, Arms, FreezeMode, ModelEmbedding, PipelineConfig, ToyTiedModel, TrainConfig,
};
use distemb::AnyEmbedding;
use serde_json::{json, Value};

use crate::args::{ArmName, PipelineArgs};
use crate::error::{at, config, CliResult};
use crate::source::generate_corpus;
use crate::table::{num, opt_num, render, thousands};

fn check(a: &PipelineArgs, alphas: &[f64]) -> CliResult<()> {
    if a.dim == 0 || a.rank == 0 || a.rank > a.dim {
        return Err(config(format!("--rank {} must be in 1..=--dim ({})", a.rank, a.dim)));
    }
    if let Some(x) = alphas.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(config(format!("--alpha {x} outside [0, 1]")));
    }
    if !(a.heldout_fraction > 0.0 && a.heldout_fraction < 1.0) {
        return Err(config(format!(
            "--heldout-fraction {} outside (0, 1)",
            a.heldout_fraction
        )));
    }
    Ok(())
}

pub fn run(a: &PipelineArgs, out: &mut dyn Write) -> CliResult<()> {
    let alphas = if a.alpha.is_empty() {
        vec![0.01]
    } else {
        a.alpha.clone()
    };
    check(a, &alphas)?;
    let base = TrainConfig {
        batch_size: a.batch_size,
        ..a.train.config()
    };
    let stage = |steps: Option<usize>| TrainConfig {
        steps: steps.unwrap_or(base.steps),
        ..base.clone()
    };
    let cfg = PipelineConfig {
        pretrain: stage(a.pretrain_steps),
        reconstruct: TrainConfig {
            init: a.init,
            ..stage(a.recon_steps)
        },
        finetune: TrainConfig {
            alpha: alphas[0],
            ..stage(a.finetune_steps)
        },
        heldout_fraction: a.heldout_fraction,
        arms: Arms {
            random_init: a.all_arms || a.arm.contains(&ArmName::RandomInit),
            no_distill: a.all_arms || a.arm.contains(&ArmName::NoDistill),
            freeze_emb: a.all_arms || a.freeze.contains(&FreezeMode::NonEmbeddingOnlyTrainable),
            freeze_non_emb: a.all_arms || a.freeze.contains(&FreezeMode::EmbeddingOnlyTrainable),
        },
    };
    for c in [&cfg.pretrain, &cfg.reconstruct, &cfg.finetune] {
        c.validate().map_err(|e| config(e.to_string()))?;
    }

    let corpus = match &a.corpus {
        Some(p) => read_corpus(p).map_err(at(p))?,
        None => generate_corpus(&a.gen, a.train.seed)?,
    };
    let result = run_algorithm1(&corpus, a.dim, a.rank, a.activation, &cfg)?;
    let mut reports = result.reports.clone();
    let (train, held) = corpus.split(a.heldout_fraction)?;

    // Further alphas rerun Step 3 from the same Step-2 start.
    let teacher = &result.pretrained.e;
    for &alpha in &alphas[1..] {
        let start = ToyTiedModel::new(
            ModelEmbedding::LowRank(result.step2.embedding.clone()),
            result.pretrained.w.clone(),
            corpus.context_size,
        )?;
        let ft = TrainConfig {
            alpha,
            ..cfg.finetune.clone()
        };
        let done = distill_finetune(start, Some(teacher), &train.examples, &ft)?;
        let mut rc = reports[2].config.clone();
        rc.insert("alpha".into(), json!(alpha));
        rc.insert(
            "embedding_unchanged".into(),
            json!(done.model.emb == ModelEmbedding::LowRank(result.step2.embedding.clone())),
        );
        rc.insert("w_unchanged".into(), json!(done.model.w == result.pretrained.w));
        let name = format!("step3_alpha_{alpha}");
        rc.insert("stage".into(), json!(name));
        let h = Some((&done.model.w, &held.examples[..]));
        reports.push(Report::evaluate(name, &done.model.emb, teacher, h, ft.seed, rc)?);
    }

    let flag = |r: &Report, key: &str, label: &str| match r.config.get(key) {
        Some(Value::Bool(true)) => Some(label.to_string()),
        _ => None,
    };
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            let notes: Vec<String> = [
                flag(r, "embedding_unchanged", "emb unchanged"),
                flag(r, "w_unchanged", "W unchanged"),
            ]
            .into_iter()
            .flatten()
            .collect();
            vec![
                r.method.clone(),
                thousands(r.emb_params),
                r.rate_label(),
                num(r.recon_loss_l2),
                opt_num(r.heldout_ce),
                r.config.get("alpha").map_or("-".into(), |v| v.to_string()),
                notes.join(", "),
            ]
        })
        .collect();
    writeln!(
        out,
        "corpus: vocab {}, {} train / {} held-out examples, context {}",
        corpus.vocab_size,
        train.examples.len(),
        held.examples.len(),
        corpus.context_size
    )?;
    let headers = [
        "report",
        "emb params",
        "rate",
        "recon l2",
        "heldout ce",
        "alpha",
        "<flags",
    ];
    write!(out, "{}", render(&headers, &rows))?;

    if let Some(p) = &a.json {
        write_report_json(p, &reports)?;
    }
    if let Some(p) = &a.curve {
        write_curve_csv(p, &result.step3.curve)?;
    }
    if let Some(dir) = &a.save_dir {
        std::fs::create_dir_all(dir)?;
        write_embedding_text(dir.join("teacher.txt"), teacher, &default_tokens(teacher.rows()))?;
        let w = &result.pretrained.w;
        let rows: Vec<String> = (0..w.rows()).map(|i| format!("h{i}")).collect();
        write_embedding_text(dir.join("mixing.txt"), w, &rows)?;
        write_corpus(dir.join("heldout.json"), &held)?;
        write_factorized(
            dir.join("step2.demb"),
            &AnyEmbedding::LowRank(result.step2.embedding.clone()),
        )?;
        if let ModelEmbedding::LowRank(l) = &result.step3.model.emb {
            write_factorized(dir.join("step3.demb"), &AnyEmbedding::LowRank(l.clone()))?;
            let rows: Vec<String> = (0..w.rows()).map(|i| format!("h{i}")).collect();
            write_embedding_text(dir.join("step3_mixing.txt"), &result.step3.model.w, &rows)?;
        }
    }
    Ok(())
}
