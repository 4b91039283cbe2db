//! Finite-difference audit of the toy-model gradients over a fixed matrix of
//! sizes, activations and mixing weights.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::factorizations::{Activation, LowRankEmbedding};
use crate::linalg::gaussian_matrix;
use crate::losses::{finite_diff_check, grads_toy, toy_loss, FdOptions, FdReport};
use crate::matrix::DenseMatrix;
use crate::rng::SplitMix64;
use crate::trainer::{Example, ModelEmbedding, ToyTiedModel};

/// Relative-error threshold a tensor must meet.
pub const GRADCHECK_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradcheckCase {
    pub vocab: usize,
    pub dim: usize,
    pub rank: usize,
    pub activation: Activation,
    pub alpha: f64,
    pub seed: u64,
}

/// Parameter tensor of the factorized toy model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Tensor {
    U,
    V,
    W,
}

impl Tensor {
    pub fn name(self) -> &'static str {
        match self {
            Tensor::U => "dU",
            Tensor::V => "dV",
            Tensor::W => "dW",
        }
    }
}

impl std::str::FromStr for Tensor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim_start_matches('d').to_ascii_uppercase().as_str() {
            "U" => Ok(Tensor::U),
            "V" => Ok(Tensor::V),
            "W" => Ok(Tensor::W),
            _ => Err(Error::arg(format!("unknown tensor {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TensorReport {
    pub tensor: Tensor,
    #[serde(flatten)]
    pub fd: FdReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseReport {
    pub case: GradcheckCase,
    pub tensors: Vec<TensorReport>,
}

impl CaseReport {
    pub fn max_rel_error(&self) -> f64 {
        self.tensors.iter().map(|t| t.fd.max_rel_error).fold(0.0, f64::max)
    }

    pub fn worst(&self) -> &TensorReport {
        self.tensors
            .iter()
            .max_by(|a, b| a.fd.max_rel_error.total_cmp(&b.fd.max_rel_error))
            .expect("three tensors")
    }

    pub fn passed(&self) -> bool {
        self.max_rel_error() <= GRADCHECK_TOL
    }
}

/// 3 sizes × {identity, relu} × α ∈ {0, 0.01, 1}.
pub fn standard_matrix() -> Vec<GradcheckCase> {
    let sizes = [(12, 5, 2), (16, 8, 3), (32, 12, 5)];
    let mut cases = Vec::new();
    for (n, &(vocab, dim, rank)) in sizes.iter().enumerate() {
        for activation in [Activation::Identity, Activation::Relu] {
            for alpha in [0.0, 0.01, 1.0] {
                cases.push(GradcheckCase {
                    vocab,
                    dim,
                    rank,
                    activation,
                    alpha,
                    seed: 100 + n as u64,
                });
            }
        }
    }
    cases
}

const CONTEXT: usize = 3;
const BATCH: usize = 6;

fn setup(case: &GradcheckCase) -> Result<(ToyTiedModel, DenseMatrix, Vec<Example>)> {
    let GradcheckCase {
        vocab,
        dim,
        rank,
        activation,
        seed,
        ..
    } = *case;
    let u = gaussian_matrix(vocab, rank, seed, 1.0);
    let v = gaussian_matrix(dim, rank, seed + 1, 0.5);
    let w = gaussian_matrix(dim, dim, seed + 2, 0.5);
    let teacher = gaussian_matrix(vocab, dim, seed + 3, 1.0);
    let emb = LowRankEmbedding::new(u, v, activation)?;
    let model = ToyTiedModel::new(ModelEmbedding::LowRank(emb), w, CONTEXT)?;
    let mut rng = SplitMix64::new(seed + 4);
    let batch = (0..BATCH)
        .map(|_| Example {
            context: (0..CONTEXT).map(|_| rng.below(vocab) as u32).collect(),
            target: rng.below(vocab) as u32,
        })
        .collect();
    Ok((model, teacher, batch))
}

fn with_tensor(model: &ToyTiedModel, t: Tensor, x: &[f64]) -> ToyTiedModel {
    let mut m = model.clone();
    match t {
        Tensor::W => m.w.as_mut_slice().copy_from_slice(x),
        Tensor::U | Tensor::V => {
            let ModelEmbedding::LowRank(l) = &mut m.emb else {
                unreachable!("gradcheck models are low-rank")
            };
            let (u, v) = l.factors_mut();
            let target = if t == Tensor::U { u } else { v };
            target.as_mut_slice().copy_from_slice(x);
        }
    }
    m
}

/// Check every tensor of one case. `flip_sign` negates that tensor's
/// analytic gradient first, which must make the check fail.
pub fn run_case(case: &GradcheckCase, opts: &FdOptions, flip_sign: Option<Tensor>) -> Result<CaseReport> {
    let (model, teacher, batch) = setup(case)?;
    let (_, grads) = grads_toy(&model, &batch, Some(&teacher), case.alpha, 0.0)?;
    let g = grads.low_rank().expect("low-rank model");
    let ModelEmbedding::LowRank(l) = &model.emb else {
        unreachable!()
    };
    let mut tensors = Vec::new();
    for t in [Tensor::U, Tensor::V, Tensor::W] {
        let (params, analytic) = match t {
            Tensor::U => (l.u().as_slice(), g.du.as_slice()),
            Tensor::V => (l.v().as_slice(), g.dv.as_slice()),
            Tensor::W => (model.w.as_slice(), grads.dw.as_slice()),
        };
        let mut analytic = analytic.to_vec();
        if flip_sign == Some(t) {
            analytic.iter_mut().for_each(|x| *x = -*x);
        }
        let f = |x: &[f64]| {
            toy_loss(&with_tensor(&model, t, x), &batch, Some(&teacher), case.alpha, 0.0)
                .map(|l| l.total)
                .unwrap_or(f64::NAN)
        };
        let relu = case.activation == Activation::Relu && t == Tensor::U;
        let kink = |i: usize| relu.then(|| params[i]);
        let fd = finite_diff_check(f, params, &analytic, kink, opts)?;
        tensors.push(TensorReport { tensor: t, fd });
    }
    Ok(CaseReport { case: *case, tensors })
}

/// Run [`standard_matrix`].
pub fn run_standard(opts: &FdOptions, flip_sign: Option<Tensor>) -> Result<Vec<CaseReport>> {
    standard_matrix().iter().map(|c| run_case(c, opts, flip_sign)).collect()
}
