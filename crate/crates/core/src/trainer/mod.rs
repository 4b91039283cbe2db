//! Three-step training on the toy tied model: full pre-training,
//! reconstruction fitting of the factorized embedding, and distillation
//! fine-tuning.

mod adam;
mod corpus;
mod model;
mod pipeline;

use serde::{Deserialize, Serialize};

pub use adam::{adam_step, AdamParams, AdamState};
pub use corpus::{gen_corpus, Corpus, PLANTED_DIM, PLANTED_SHARPNESS};
pub use model::{mean_cross_entropy, Example, ModelEmbedding, ToyTiedModel};
pub use pipeline::{run_algorithm1, Arms, PipelineConfig, PipelineOutput};

use crate::error::{Error, Result};
use crate::factorizations::{init_from_svd, Activation, LowRankEmbedding};
use crate::losses::{grads_recon, grads_toy, recon_loss, toy_loss, EmbeddingGrad, LossBreakdown};
use crate::matrix::DenseMatrix;
use crate::rng::SplitMix64;

/// Evaluation curves use a fixed prefix of this many training examples.
pub const EVAL_SUBSET: usize = 512;

const STREAM_INIT: u64 = 1;
const STREAM_BATCH: u64 = 2;

/// Which tensors receive updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FreezeMode {
    None,
    /// Only the embedding trains; `W` is frozen.
    EmbeddingOnlyTrainable,
    /// Only `W` trains; the embedding factors are frozen.
    NonEmbeddingOnlyTrainable,
}

impl FreezeMode {
    pub fn name(self) -> &'static str {
        match self {
            FreezeMode::None => "none",
            FreezeMode::EmbeddingOnlyTrainable => "embedding_only_trainable",
            FreezeMode::NonEmbeddingOnlyTrainable => "non_embedding_only_trainable",
        }
    }

    fn embedding_trains(self) -> bool {
        self != FreezeMode::NonEmbeddingOnlyTrainable
    }

    fn w_trains(self) -> bool {
        self != FreezeMode::EmbeddingOnlyTrainable
    }
}

impl std::str::FromStr for FreezeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(FreezeMode::None),
            "non-emb" | "non_emb" | "embedding_only_trainable" => Ok(FreezeMode::EmbeddingOnlyTrainable),
            "emb" | "non_embedding_only_trainable" => Ok(FreezeMode::NonEmbeddingOnlyTrainable),
            other => Err(Error::arg(format!("unknown freeze mode {other:?}"))),
        }
    }
}

/// Initialization of the factorized embedding before reconstruction fitting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitMode {
    Svd,
    Random,
}

impl std::str::FromStr for InitMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "svd" | "model" => Ok(InitMode::Svd),
            "random" | "rand" => Ok(InitMode::Random),
            other => Err(Error::arg(format!("unknown init mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
    pub alpha: f64,
    pub label_smoothing: f64,
    pub freeze: FreezeMode,
    pub init: InitMode,
    /// Curve sampling period in steps.
    pub log_every: usize,
    /// Learning rate at the last step as a fraction of `learning_rate`,
    /// reached by linear decay. `1.0` keeps it constant.
    #[serde(default = "one")]
    pub final_lr_fraction: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 2000,
            batch_size: 32,
            learning_rate: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
            alpha: 0.01,
            label_smoothing: 0.0,
            freeze: FreezeMode::None,
            init: InitMode::Svd,
            log_every: 100,
            final_lr_fraction: 1.0,
        }
    }
}

impl TrainConfig {
    /// Range checks shared by every training entry point.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::arg(msg));
        if self.batch_size == 0 {
            return bad("batch size must be at least 1".into());
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate {} must be finite and >= 0", self.learning_rate));
        }
        for (name, b) in [("beta1", self.adam_beta1), ("beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&b) {
                return bad(format!("Adam {name} {b} outside [0, 1)"));
            }
        }
        if !(self.adam_eps > 0.0) {
            return bad(format!("Adam eps {} must be > 0", self.adam_eps));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad(format!("alpha {} outside [0, 1]", self.alpha));
        }
        if !(0.0..1.0).contains(&self.label_smoothing) {
            return bad(format!("label smoothing {} outside [0, 1)", self.label_smoothing));
        }
        if !(0.0..=1.0).contains(&self.final_lr_fraction) {
            return bad(format!("final lr fraction {} outside [0, 1]", self.final_lr_fraction));
        }
        if self.log_every == 0 {
            return bad("log_every must be at least 1".into());
        }
        Ok(())
    }

    fn validate_with_steps(&self) -> Result<()> {
        if self.steps == 0 {
            return Err(Error::arg("steps must be at least 1"));
        }
        self.validate()
    }

    pub fn adam(&self) -> AdamParams {
        AdamParams {
            learning_rate: self.learning_rate,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
        }
    }

    /// Adam hyper-parameters for 0-based update `step`.
    fn adam_at(&self, step: usize) -> AdamParams {
        let mut hp = self.adam();
        if self.final_lr_fraction < 1.0 && self.steps > 1 {
            let t = step as f64 / (self.steps - 1) as f64;
            hp.learning_rate *= 1.0 - (1.0 - self.final_lr_fraction) * t;
        }
        hp
    }

    fn logs_at(&self, step: usize) -> bool {
        step.is_multiple_of(self.log_every) || step == self.steps
    }
}

/// Step 1 output.
#[derive(Debug, Clone, PartialEq)]
pub struct Pretrained {
    pub e: DenseMatrix,
    pub w: DenseMatrix,
    /// `(step, mean CE on the evaluation subset)`
    pub ce_curve: Vec<(usize, f64)>,
}

/// Step 2 output.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconFit {
    pub embedding: LowRankEmbedding,
    pub initial_loss: f64,
    pub final_loss: f64,
    /// `(step, recon loss)`
    pub curve: Vec<(usize, f64)>,
}

/// Step 3 output.
#[derive(Debug, Clone, PartialEq)]
pub struct Finetuned {
    pub model: ToyTiedModel,
    pub curve: Vec<(usize, LossBreakdown)>,
}

fn eval_subset(examples: &[Example]) -> &[Example] {
    &examples[..examples.len().min(EVAL_SUBSET)]
}

fn sample_batch(rng: &mut SplitMix64, examples: &[Example], size: usize) -> Vec<Example> {
    (0..size).map(|_| examples[rng.below(examples.len())].clone()).collect()
}

fn diverged(what: &'static str, step: usize) -> Error {
    Error::Diverged { what, step }
}

/// Step 1: train a full `|V|×d` embedding and `W` on cross-entropy.
///
/// `E` starts Gaussian with standard deviation `d^{-1/2}`, `W` at identity.
pub fn pretrain_full(corpus: &Corpus, d: usize, config: &TrainConfig) -> Result<Pretrained> {
    config.validate_with_steps()?;
    if d == 0 {
        return Err(Error::arg("embedding dimension must be at least 1"));
    }
    if corpus.examples.is_empty() {
        return Err(Error::arg("corpus has no examples"));
    }
    let mut init = SplitMix64::derive(config.seed, STREAM_INIT);
    let std = 1.0 / (d as f64).sqrt();
    let e = DenseMatrix::from_fn(corpus.vocab_size, d, |_, _| std * init.normal());
    let mut model = ToyTiedModel::new(ModelEmbedding::Full(e), DenseMatrix::identity(d), corpus.context_size)?;

    let eval = eval_subset(&corpus.examples);
    let mut rng = SplitMix64::derive(config.seed, STREAM_BATCH);
    let mut adam = AdamState::new(&[corpus.vocab_size * d, d * d]);
    let mut ce_curve = Vec::new();
    for step in 0..=config.steps {
        if config.logs_at(step) {
            let ce = toy_loss(&model, eval, None, 0.0, 0.0)?.ce;
            if !ce.is_finite() {
                return Err(diverged("pretraining cross-entropy", step));
            }
            ce_curve.push((step, ce));
        }
        if step == config.steps {
            break;
        }
        let batch = sample_batch(&mut rng, &corpus.examples, config.batch_size);
        let (loss, grads) = grads_toy(&model, &batch, None, 0.0, config.label_smoothing)?;
        if !loss.total.is_finite() || !grads.is_finite() {
            return Err(diverged("pretraining cross-entropy", step));
        }
        let EmbeddingGrad::Full(de) = &grads.emb else {
            unreachable!("full model yields a full gradient")
        };
        let ModelEmbedding::Full(e) = &mut model.emb else {
            unreachable!()
        };
        adam.update(
            &mut [e.as_mut_slice(), model.w.as_mut_slice()],
            &[Some(de.as_slice()), Some(grads.dw.as_slice())],
            &config.adam_at(step),
        )?;
    }
    let ModelEmbedding::Full(e) = model.emb else {
        unreachable!()
    };
    Ok(Pretrained {
        e,
        w: model.w,
        ce_curve,
    })
}

/// Gaussian factors scaled so `f(U)·Vᵀ` starts at roughly the teacher's magnitude.
fn random_low_rank(e: &DenseMatrix, r: usize, activation: Activation, seed: u64) -> Result<LowRankEmbedding> {
    let (n, d) = e.shape();
    let rms = e.frobenius_norm() / ((n * d) as f64).sqrt();
    let v_std = if rms > 0.0 {
        rms / (r as f64).sqrt()
    } else {
        1.0 / (r as f64).sqrt()
    };
    let mut rng = SplitMix64::derive(seed, STREAM_INIT);
    let u = DenseMatrix::from_fn(n, r, |_, _| rng.normal());
    let v = DenseMatrix::from_fn(d, r, |_, _| v_std * rng.normal());
    LowRankEmbedding::new(u, v, activation)
}

/// Step 2: fit `f(U)·Vᵀ ≈ E` by full-batch Adam on the reconstruction loss.
///
/// Returns the lowest-loss iterate seen, so `final_loss ≤ initial_loss`.
/// `config.steps == 0` returns the initialization untouched.
pub fn fit_reconstruction(e: &DenseMatrix, r: usize, activation: Activation, config: &TrainConfig) -> Result<ReconFit> {
    config.validate()?;
    if !e.is_finite() {
        return Err(Error::InvalidInput(
            "teacher embedding contains non-finite values".into(),
        ));
    }
    let mut emb = match config.init {
        InitMode::Svd => init_from_svd(e, r, activation)?,
        InitMode::Random => {
            if r == 0 || r > e.cols() {
                return Err(Error::arg(format!("rank {r} outside [1, {}]", e.cols())));
            }
            random_low_rank(e, r, activation, config.seed)?
        }
    };
    let initial_loss = recon_loss(&emb, e)?;
    let mut best = (initial_loss, emb.clone());
    let mut curve = vec![(0, initial_loss)];
    let mut adam = AdamState::new(&[emb.u().rows() * r, emb.v().rows() * r]);
    for step in 1..=config.steps {
        let g = grads_recon(&emb, e)?;
        if !(g.du.is_finite() && g.dv.is_finite()) {
            return Err(diverged("reconstruction gradient", step));
        }
        let (u, v) = emb.factors_mut();
        adam.update(
            &mut [u.as_mut_slice(), v.as_mut_slice()],
            &[Some(g.du.as_slice()), Some(g.dv.as_slice())],
            &config.adam_at(step - 1),
        )?;
        let loss = recon_loss(&emb, e)?;
        if !loss.is_finite() {
            return Err(diverged("reconstruction loss", step));
        }
        if loss < best.0 {
            best = (loss, emb.clone());
        }
        if config.logs_at(step) {
            curve.push((step, loss));
        }
    }
    let (final_loss, embedding) = best;
    Ok(ReconFit {
        embedding,
        initial_loss,
        final_loss,
        curve,
    })
}

/// Step 3: train the whole model on `α·recon + (1 − α)·CE` against a frozen
/// teacher. Frozen tensors (per `config.freeze`) are never written.
///
/// With `teacher == None` the run is CE-only and the recorded recon loss is 0.
pub fn distill_finetune(
    mut model: ToyTiedModel,
    teacher: Option<&DenseMatrix>,
    examples: &[Example],
    config: &TrainConfig,
) -> Result<Finetuned> {
    config.validate_with_steps()?;
    if examples.is_empty() {
        return Err(Error::arg("no training examples"));
    }
    let eval = eval_subset(examples);
    let mut rng = SplitMix64::derive(config.seed, STREAM_BATCH);
    let emb_sizes: Vec<usize> = match &model.emb {
        ModelEmbedding::Full(e) => vec![e.as_slice().len()],
        ModelEmbedding::LowRank(l) => vec![l.u().as_slice().len(), l.v().as_slice().len()],
    };
    let mut sizes = emb_sizes;
    sizes.push(model.w.as_slice().len());
    let mut adam = AdamState::new(&sizes);
    let (emb_on, w_on) = (config.freeze.embedding_trains(), config.freeze.w_trains());

    let mut curve = Vec::new();
    for step in 0..=config.steps {
        if config.logs_at(step) {
            let loss = toy_loss(&model, eval, teacher, config.alpha, 0.0)?;
            if !loss.total.is_finite() {
                return Err(diverged("fine-tuning loss", step));
            }
            curve.push((step, loss));
        }
        if step == config.steps {
            break;
        }
        let batch = sample_batch(&mut rng, examples, config.batch_size);
        let (loss, grads) = grads_toy(&model, &batch, teacher, config.alpha, config.label_smoothing)?;
        if !loss.total.is_finite() || !grads.is_finite() {
            return Err(diverged("fine-tuning loss", step));
        }
        let w_grad = w_on.then_some(grads.dw.as_slice());
        let hp = config.adam_at(step);
        match (&mut model.emb, &grads.emb) {
            (ModelEmbedding::Full(e), EmbeddingGrad::Full(de)) => adam.update(
                &mut [e.as_mut_slice(), model.w.as_mut_slice()],
                &[emb_on.then_some(de.as_slice()), w_grad],
                &hp,
            )?,
            (ModelEmbedding::LowRank(l), EmbeddingGrad::LowRank(g)) => {
                let (u, v) = l.factors_mut();
                adam.update(
                    &mut [u.as_mut_slice(), v.as_mut_slice(), model.w.as_mut_slice()],
                    &[
                        emb_on.then_some(g.du.as_slice()),
                        emb_on.then_some(g.dv.as_slice()),
                        w_grad,
                    ],
                    &hp,
                )?
            }
            _ => unreachable!("gradient kind follows the embedding kind"),
        }
    }
    Ok(Finetuned { model, curve })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::gaussian_matrix;

    fn small_corpus() -> Corpus {
        gen_corpus(16, 300, 2, 1.0, 3).unwrap()
    }

    fn cfg(steps: usize) -> TrainConfig {
        TrainConfig {
            steps,
            batch_size: 8,
            log_every: 10,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn pretrain_rejects_zero_steps() {
        assert!(matches!(
            pretrain_full(&small_corpus(), 4, &cfg(0)),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn zero_learning_rate_leaves_parameters() {
        let c = small_corpus();
        let a = pretrain_full(
            &c,
            4,
            &TrainConfig {
                learning_rate: 0.0,
                ..cfg(20)
            },
        )
        .unwrap();
        let b = pretrain_full(
            &c,
            4,
            &TrainConfig {
                learning_rate: 0.0,
                ..cfg(1)
            },
        )
        .unwrap();
        assert_eq!(a.e, b.e);
        assert_eq!(a.w, DenseMatrix::identity(4));
    }

    #[test]
    fn curves_include_endpoints() {
        let p = pretrain_full(&small_corpus(), 4, &cfg(25)).unwrap();
        let steps: Vec<usize> = p.ce_curve.iter().map(|c| c.0).collect();
        assert_eq!(steps, vec![0, 10, 20, 25]);
    }

    #[test]
    fn recon_fit_zero_steps_is_init() {
        let e = gaussian_matrix(12, 6, 1, 1.0);
        let fit = fit_reconstruction(&e, 3, Activation::Relu, &cfg(0)).unwrap();
        let init = init_from_svd(&e, 3, Activation::Relu).unwrap();
        assert_eq!(fit.embedding, init);
        assert_eq!(fit.final_loss, recon_loss(&init, &e).unwrap());
    }

    #[test]
    fn recon_fit_never_worsens() {
        let e = gaussian_matrix(12, 6, 2, 1.0);
        for init in [InitMode::Svd, InitMode::Random] {
            let fit = fit_reconstruction(&e, 2, Activation::Relu, &TrainConfig { init, ..cfg(50) }).unwrap();
            assert!(fit.final_loss <= fit.initial_loss);
            assert_eq!(fit.final_loss, recon_loss(&fit.embedding, &e).unwrap());
        }
    }

    #[test]
    fn freeze_modes_leave_tensors_untouched() {
        let c = small_corpus();
        let p = pretrain_full(&c, 4, &cfg(20)).unwrap();
        let low = init_from_svd(&p.e, 2, Activation::Relu).unwrap();
        let model = ToyTiedModel::new(ModelEmbedding::LowRank(low.clone()), p.w.clone(), 2).unwrap();

        let frozen_emb = TrainConfig {
            freeze: FreezeMode::NonEmbeddingOnlyTrainable,
            ..cfg(15)
        };
        let out = distill_finetune(model.clone(), Some(&p.e), &c.examples, &frozen_emb).unwrap();
        assert_eq!(out.model.emb.as_low_rank().unwrap(), &low);
        assert_ne!(out.model.w, p.w);

        let frozen_w = TrainConfig {
            freeze: FreezeMode::EmbeddingOnlyTrainable,
            ..cfg(15)
        };
        let out = distill_finetune(model, Some(&p.e), &c.examples, &frozen_w).unwrap();
        assert_eq!(out.model.w, p.w);
        assert_ne!(out.model.emb.as_low_rank().unwrap(), &low);
    }

    #[test]
    fn alpha_zero_matches_ce_only() {
        let c = small_corpus();
        let p = pretrain_full(&c, 4, &cfg(20)).unwrap();
        let low = init_from_svd(&p.e, 2, Activation::Relu).unwrap();
        let model = ToyTiedModel::new(ModelEmbedding::LowRank(low), p.w.clone(), 2).unwrap();
        let conf = TrainConfig { alpha: 0.0, ..cfg(30) };
        let a = distill_finetune(model.clone(), Some(&p.e), &c.examples, &conf).unwrap();
        let b = distill_finetune(model, None, &c.examples, &conf).unwrap();
        assert_eq!(a.model, b.model);
    }

    #[test]
    fn alpha_one_never_changes_w() {
        let c = small_corpus();
        let p = pretrain_full(&c, 4, &cfg(20)).unwrap();
        let low = init_from_svd(&p.e, 2, Activation::Relu).unwrap();
        let model = ToyTiedModel::new(ModelEmbedding::LowRank(low), p.w.clone(), 2).unwrap();
        let out = distill_finetune(model, Some(&p.e), &c.examples, &TrainConfig { alpha: 1.0, ..cfg(20) }).unwrap();
        assert_eq!(out.model.w, p.w);
        for (_, l) in &out.curve {
            assert!((l.total - l.recon).abs() <= 1e-12);
        }
    }

    #[test]
    fn parsing() {
        assert_eq!(
            "emb".parse::<FreezeMode>().unwrap(),
            FreezeMode::NonEmbeddingOnlyTrainable
        );
        assert_eq!(
            "non-emb".parse::<FreezeMode>().unwrap(),
            FreezeMode::EmbeddingOnlyTrainable
        );
        assert_eq!("random".parse::<InitMode>().unwrap(), InitMode::Random);
        assert!("sometimes".parse::<FreezeMode>().is_err());
    }
}
