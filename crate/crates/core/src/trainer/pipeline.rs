//! Steps 1 → 2 → 3 chained, with optional ablation arms.

use serde_json::{json, Map, Value};

use super::{
    distill_finetune, fit_reconstruction, pretrain_full, Corpus, Finetuned, FreezeMode, InitMode, ModelEmbedding,
    Pretrained, ReconFit, ToyTiedModel, TrainConfig,
};
use crate::error::{Error, Result};
use crate::factorizations::Activation;
use crate::report::Report;

/// Ablation arms run alongside the main pipeline.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Arms {
    /// Step 2 from a Gaussian initialization instead of the SVD.
    pub random_init: bool,
    /// Step 3 with `alpha = 0`.
    pub no_distill: bool,
    /// Step 3 with the embedding frozen.
    pub freeze_emb: bool,
    /// Step 3 with `W` frozen.
    pub freeze_non_emb: bool,
}

impl Arms {
    pub fn all() -> Self {
        Self {
            random_init: true,
            no_distill: true,
            freeze_emb: true,
            freeze_non_emb: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub pretrain: TrainConfig,
    pub reconstruct: TrainConfig,
    pub finetune: TrainConfig,
    /// Trailing share of the corpus held out for evaluation.
    pub heldout_fraction: f64,
    pub arms: Arms,
}

impl PipelineConfig {
    /// Same hyper-parameters for every step.
    pub fn uniform(base: TrainConfig) -> Self {
        Self {
            pretrain: base.clone(),
            reconstruct: base.clone(),
            finetune: base,
            heldout_fraction: 0.2,
            arms: Arms::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub pretrained: Pretrained,
    pub step2: ReconFit,
    pub step3: Finetuned,
    /// `(arm name, Step-2 fit if the arm refits, Step-3 result)`
    pub arms: Vec<(String, Option<ReconFit>, Finetuned)>,
    /// baseline, step2, step3, then one entry per arm.
    pub reports: Vec<Report>,
}

impl PipelineOutput {
    pub fn report(&self, method: &str) -> Option<&Report> {
        self.reports.iter().find(|r| r.method == method)
    }

    pub fn arm(&self, name: &str) -> Option<&Finetuned> {
        self.arms.iter().find(|a| a.0 == name).map(|a| &a.2)
    }
}

/// Run the three steps on `corpus` and every requested arm.
pub fn run_algorithm1(
    corpus: &Corpus,
    d: usize,
    r: usize,
    activation: Activation,
    config: &PipelineConfig,
) -> Result<PipelineOutput> {
    if r == 0 || r > d {
        return Err(Error::arg(format!("rank {r} outside [1, {d}]")));
    }
    let (train, held) = corpus.split(config.heldout_fraction)?;
    if train.examples.is_empty() || held.examples.is_empty() {
        return Err(Error::arg("corpus too small to split into train and held-out parts"));
    }
    let heldout = &held.examples[..];

    let pretrained = pretrain_full(&train, d, &config.pretrain)?;
    let teacher = &pretrained.e;
    let step2 = fit_reconstruction(teacher, r, activation, &config.reconstruct)?;
    let start = ToyTiedModel::new(
        ModelEmbedding::LowRank(step2.embedding.clone()),
        pretrained.w.clone(),
        corpus.context_size,
    )?;
    let step3 = distill_finetune(start.clone(), Some(teacher), &train.examples, &config.finetune)?;

    let base_cfg = |stage: &str, ft: Option<&TrainConfig>| {
        let mut m = Map::new();
        m.insert("stage".into(), json!(stage));
        m.insert("rank".into(), json!(r));
        m.insert("activation".into(), json!(activation.name()));
        if let Some(ft) = ft {
            m.insert("alpha".into(), json!(ft.alpha));
            m.insert("freeze".into(), json!(ft.freeze.name()));
            m.insert("steps".into(), json!(ft.steps));
        }
        m
    };
    let step3_cfg = |stage: &str, ft: &TrainConfig, init: InitMode, out: &Finetuned| {
        let mut m = base_cfg(stage, Some(ft));
        m.insert("init".into(), json!(init_name(init)));
        m.insert("embedding_unchanged".into(), Value::Bool(out.model.emb == start.emb));
        m.insert("w_unchanged".into(), Value::Bool(out.model.w == start.w));
        m
    };

    let seed = config.finetune.seed;
    let mut reports = vec![
        Report::evaluate(
            "baseline",
            teacher,
            teacher,
            Some((&pretrained.w, heldout)),
            config.pretrain.seed,
            base_cfg("baseline", None),
        )?,
        Report::evaluate(
            "step2",
            &step2.embedding,
            teacher,
            Some((&pretrained.w, heldout)),
            config.reconstruct.seed,
            {
                let mut m = base_cfg("step2", None);
                m.insert("init".into(), json!(init_name(config.reconstruct.init)));
                m.insert("steps".into(), json!(config.reconstruct.steps));
                m
            },
        )?,
        Report::evaluate(
            "step3",
            &step3.model.emb,
            teacher,
            Some((&step3.model.w, heldout)),
            seed,
            step3_cfg("step3", &config.finetune, config.reconstruct.init, &step3),
        )?,
    ];

    let mut arms = Vec::new();
    let mut run_arm = |name: &str, refit: Option<TrainConfig>, ft: TrainConfig| -> Result<()> {
        let (fit, model) = match &refit {
            Some(rc) => {
                let fit = fit_reconstruction(teacher, r, activation, rc)?;
                let m = ToyTiedModel::new(
                    ModelEmbedding::LowRank(fit.embedding.clone()),
                    pretrained.w.clone(),
                    corpus.context_size,
                )?;
                (Some(fit), m)
            }
            None => (None, start.clone()),
        };
        let out = distill_finetune(model, Some(teacher), &train.examples, &ft)?;
        let init = refit.as_ref().map_or(config.reconstruct.init, |rc| rc.init);
        let stage = format!("step3_{name}");
        let mut cfg = step3_cfg(&stage, &ft, init, &out);
        if refit.is_some() {
            // A refitted arm starts from a different embedding.
            cfg.remove("embedding_unchanged");
        }
        reports.push(Report::evaluate(
            stage,
            &out.model.emb,
            teacher,
            Some((&out.model.w, heldout)),
            ft.seed,
            cfg,
        )?);
        arms.push((name.to_string(), fit, out));
        Ok(())
    };

    if config.arms.random_init {
        let rc = TrainConfig {
            init: InitMode::Random,
            ..config.reconstruct.clone()
        };
        run_arm("random_init", Some(rc), config.finetune.clone())?;
    }
    if config.arms.no_distill {
        run_arm(
            "no_distill",
            None,
            TrainConfig {
                alpha: 0.0,
                ..config.finetune.clone()
            },
        )?;
    }
    if config.arms.freeze_emb {
        let ft = TrainConfig {
            freeze: FreezeMode::NonEmbeddingOnlyTrainable,
            ..config.finetune.clone()
        };
        run_arm("freeze_emb", None, ft)?;
    }
    if config.arms.freeze_non_emb {
        let ft = TrainConfig {
            freeze: FreezeMode::EmbeddingOnlyTrainable,
            ..config.finetune.clone()
        };
        run_arm("freeze_non_emb", None, ft)?;
    }

    Ok(PipelineOutput {
        pretrained,
        step2,
        step3,
        arms,
        reports,
    })
}

fn init_name(init: InitMode) -> &'static str {
    match init {
        InitMode::Svd => "svd",
        InitMode::Random => "random",
    }
}
