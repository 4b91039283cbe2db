//! Reconstruction, cross-entropy and combined losses with analytic gradients,
//! plus a central-difference gradient checker.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factorizations::{CompressedEmbedding, LowRankEmbedding};
use crate::matrix::{axpy, dot, DenseMatrix};
use crate::rng::SplitMix64;
use crate::trainer::{Example, ModelEmbedding, ToyTiedModel};

/// Added to each residual norm in the reconstruction-loss gradient.
pub const NORM_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    /// Mean row-wise L2 reconstruction loss.
    pub recon: f64,
    /// Mean cross-entropy in nats.
    pub ce: f64,
    /// `alpha·recon + (1 − alpha)·ce`
    pub total: f64,
    pub alpha: f64,
}

impl LossBreakdown {
    pub fn new(alpha: f64, recon: f64, ce: f64) -> Result<Self> {
        Ok(Self {
            recon,
            ce,
            total: total_loss(alpha, recon, ce)?,
            alpha,
        })
    }
}

/// `alpha·recon + (1 − alpha)·ce` for `alpha ∈ [0, 1]`.
pub fn total_loss(alpha: f64, recon: f64, ce: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::arg(format!("alpha {alpha} outside [0, 1]")));
    }
    Ok(alpha * recon + (1.0 - alpha) * ce)
}

/// `(1/|V|)·Σᵢ ‖eᵢ − f(uᵢ)Vᵀ‖₂` (unsquared row norms).
pub fn recon_loss(emb: &dyn CompressedEmbedding, teacher: &DenseMatrix) -> Result<f64> {
    Ok(recon_losses(emb, teacher)?.0)
}

/// Both the mean row L2 norm and the mean squared row norm of the residual.
pub fn recon_losses(emb: &dyn CompressedEmbedding, teacher: &DenseMatrix) -> Result<(f64, f64)> {
    if (emb.vocab(), emb.dim()) != teacher.shape() {
        return Err(Error::arg(format!(
            "embedding is {}x{}, teacher is {:?}",
            emb.vocab(),
            emb.dim(),
            teacher.shape()
        )));
    }
    let mut buf = vec![0.0; emb.dim()];
    let (mut l2, mut sq) = (0.0, 0.0);
    for i in 0..emb.vocab() {
        emb.write_row(i, &mut buf);
        let s: f64 = teacher.row(i).iter().zip(&buf).map(|(a, b)| (a - b) * (a - b)).sum();
        l2 += s.sqrt();
        sq += s;
    }
    let n = emb.vocab() as f64;
    Ok((l2 / n, sq / n))
}

/// Numerically stable `log softmax`.
pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    logits.iter().map(|z| z - lse).collect()
}

/// Label-smoothed cross-entropy `−Σᵥ qᵥ·log softmax(z)ᵥ` with
/// `q = (1 − ε)·onehot(target) + ε/|V|`.
pub fn cross_entropy(logits: &[f64], target: usize, label_smoothing: f64) -> Result<f64> {
    Ok(cross_entropy_grad(logits, target, label_smoothing)?.0)
}

/// Cross-entropy and its gradient `softmax(z) − q` with respect to the logits.
pub fn cross_entropy_grad(logits: &[f64], target: usize, label_smoothing: f64) -> Result<(f64, Vec<f64>)> {
    let n = logits.len();
    if target >= n {
        return Err(Error::arg(format!("target {target} out of range for {n} logits")));
    }
    if !(0.0..1.0).contains(&label_smoothing) {
        return Err(Error::arg(format!("label smoothing {label_smoothing} outside [0, 1)")));
    }
    if logits.iter().any(|z| !z.is_finite()) {
        return Err(Error::InvalidInput("non-finite logits".into()));
    }
    let logp = log_softmax(logits);
    let off = label_smoothing / n as f64;
    let on = 1.0 - label_smoothing + off;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(n);
    for (v, lp) in logp.iter().enumerate() {
        let q = if v == target { on } else { off };
        if q != 0.0 {
            loss -= q * lp;
        }
        grad.push(lp.exp() - q);
    }
    Ok((loss, grad))
}

/// Gradients of a low-rank embedding's factors.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconGrads {
    /// `|V|×r`
    pub du: DenseMatrix,
    /// `d×r`
    pub dv: DenseMatrix,
}

/// `∂L/∂Ẽ` of the mean row-norm loss: row `i` is `(ẽᵢ − eᵢ) / (|V|·(‖ẽᵢ − eᵢ‖ + guard))`.
fn recon_dense_grad(approx: &DenseMatrix, teacher: &DenseMatrix, scale: f64) -> DenseMatrix {
    let n = approx.rows() as f64;
    let mut g = approx.sub(teacher).expect("same shape");
    for i in 0..g.rows() {
        let row = g.row_mut(i);
        let norm = dot(row, row).sqrt();
        let c = scale / (n * (norm + NORM_GUARD));
        row.iter_mut().for_each(|x| *x *= c);
    }
    g
}

/// Chain a dense `∂L/∂Ẽ` through `Ẽ = f(U)·Vᵀ`.
fn chain_low_rank(emb: &LowRankEmbedding, d_dense: &DenseMatrix) -> ReconGrads {
    let act = emb.activation();
    let a = emb.activated_u();
    let mut du = d_dense.matmul(emb.v()).expect("conformant");
    for i in 0..du.rows() {
        for j in 0..du.cols() {
            du[(i, j)] *= act.derivative(emb.u()[(i, j)]);
        }
    }
    let dv = d_dense.t_matmul(&a).expect("conformant");
    ReconGrads { du, dv }
}

/// Analytic gradient of [`recon_loss`] with respect to `U` and `V`.
///
/// The ReLU derivative at exactly zero is 0 and each residual norm in the
/// denominator carries a `1e-12` guard, so rows with zero residual contribute
/// (near-)zero gradient instead of NaN.
pub fn grads_recon(emb: &LowRankEmbedding, teacher: &DenseMatrix) -> Result<ReconGrads> {
    if (emb.vocab(), emb.dim()) != teacher.shape() {
        return Err(Error::arg("embedding and teacher shapes differ"));
    }
    let approx = emb.reconstruct();
    Ok(chain_low_rank(emb, &recon_dense_grad(&approx, teacher, 1.0)))
}

/// Gradient of the embedding part of the toy model.
#[derive(Debug, Clone, PartialEq)]
pub enum EmbeddingGrad {
    Full(DenseMatrix),
    LowRank(ReconGrads),
}

/// Gradients of the toy model's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub emb: EmbeddingGrad,
    /// `d×d`
    pub dw: DenseMatrix,
}

impl GradientSet {
    pub fn is_finite(&self) -> bool {
        let emb_ok = match &self.emb {
            EmbeddingGrad::Full(m) => m.is_finite(),
            EmbeddingGrad::LowRank(g) => g.du.is_finite() && g.dv.is_finite(),
        };
        emb_ok && self.dw.is_finite()
    }

    pub fn low_rank(&self) -> Option<&ReconGrads> {
        match &self.emb {
            EmbeddingGrad::LowRank(g) => Some(g),
            EmbeddingGrad::Full(_) => None,
        }
    }
}

/// Loss of the toy model on `batch`: mean label-smoothed cross-entropy mixed
/// with the reconstruction loss against `teacher` (skipped when `None`).
pub fn toy_loss(
    model: &ToyTiedModel,
    batch: &[Example],
    teacher: Option<&DenseMatrix>,
    alpha: f64,
    label_smoothing: f64,
) -> Result<LossBreakdown> {
    Ok(toy_forward_backward(model, batch, teacher, alpha, label_smoothing, false)?.0)
}

/// Analytic gradient of the mean total loss over `batch`.
///
/// Backpropagates through the context-mean lookup, the mixing matrix, the
/// tied projection and the softmax; the reconstruction term is computed over
/// the full vocabulary. With `alpha == 0` or no teacher the reconstruction
/// term is skipped entirely.
pub fn grads_toy(
    model: &ToyTiedModel,
    batch: &[Example],
    teacher: Option<&DenseMatrix>,
    alpha: f64,
    label_smoothing: f64,
) -> Result<(LossBreakdown, GradientSet)> {
    let (loss, grads) = toy_forward_backward(model, batch, teacher, alpha, label_smoothing, true)?;
    Ok((loss, grads.expect("gradients requested")))
}

fn toy_forward_backward(
    model: &ToyTiedModel,
    batch: &[Example],
    teacher: Option<&DenseMatrix>,
    alpha: f64,
    label_smoothing: f64,
    with_grads: bool,
) -> Result<(LossBreakdown, Option<GradientSet>)> {
    if batch.is_empty() {
        return Err(Error::arg("batch must be non-empty"));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::arg(format!("alpha {alpha} outside [0, 1]")));
    }
    let (vocab, d) = (model.vocab(), model.dim());
    if let Some(t) = teacher {
        if t.shape() != (vocab, d) {
            return Err(Error::arg("teacher shape differs from the model embedding"));
        }
    }
    let e_tilde = model.emb.reconstruct();
    let ce_scale = (1.0 - alpha) / batch.len() as f64;
    let mut d_dense = DenseMatrix::zeros(vocab, d);
    let mut dw = DenseMatrix::zeros(d, d);
    let mut ce_sum = 0.0;

    for ex in batch {
        if ex.context.is_empty() {
            return Err(Error::arg("empty context"));
        }
        let k = ex.context.len() as f64;
        let mut x = vec![0.0; d];
        for &c in &ex.context {
            let c = c as usize;
            if c >= vocab {
                return Err(Error::arg(format!("context word {c} >= vocab {vocab}")));
            }
            axpy(1.0 / k, e_tilde.row(c), &mut x);
        }
        let h = model.w.matvec(&x)?;
        let logits = e_tilde.matvec(&h)?;
        let (ce, dz) = cross_entropy_grad(&logits, ex.target as usize, label_smoothing)?;
        ce_sum += ce;
        if !with_grads || ce_scale == 0.0 {
            continue;
        }
        // logits_v = ẽ_v·h
        let mut dh = vec![0.0; d];
        for (v, &g) in dz.iter().enumerate() {
            let g = g * ce_scale;
            axpy(g, &h, d_dense.row_mut(v));
            axpy(g, e_tilde.row(v), &mut dh);
        }
        // h = W·x
        for (i, &dhi) in dh.iter().enumerate() {
            axpy(dhi, &x, dw.row_mut(i));
        }
        let dx = model.w.t_matvec(&dh)?;
        for &c in &ex.context {
            axpy(1.0 / k, &dx, d_dense.row_mut(c as usize));
        }
    }
    let ce = ce_sum / batch.len() as f64;

    let recon = match teacher {
        Some(t) => {
            let r = recon_loss(&e_tilde, t)?;
            if with_grads && alpha > 0.0 {
                let g = recon_dense_grad(&e_tilde, t, alpha);
                d_dense = d_dense.add(&g)?;
            }
            r
        }
        None => 0.0,
    };
    let loss = LossBreakdown::new(alpha, recon, ce)?;
    if !with_grads {
        return Ok((loss, None));
    }
    let emb = match &model.emb {
        ModelEmbedding::Full(_) => EmbeddingGrad::Full(d_dense),
        ModelEmbedding::LowRank(e) => EmbeddingGrad::LowRank(chain_low_rank(e, &d_dense)),
    };
    Ok((loss, Some(GradientSet { emb, dw })))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdOptions {
    pub eps: f64,
    /// Check at most this many coordinates (deterministic sample when exceeded).
    pub max_coords: usize,
    pub seed: u64,
    /// Lower bound of the relative-error denominator `max(|analytic|, |numeric|, floor)`.
    pub denominator_floor: f64,
}

impl Default for FdOptions {
    fn default() -> Self {
        Self {
            eps: 1e-5,
            max_coords: 400,
            seed: 0,
            denominator_floor: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FdReport {
    pub max_rel_error: f64,
    /// Coordinate with the largest relative error, if any was checked.
    pub worst_coord: Option<usize>,
    pub analytic_at_worst: f64,
    pub numeric_at_worst: f64,
    pub checked: usize,
    /// Coordinates skipped by the kink filter.
    pub skipped: Vec<usize>,
}

/// Compare `analytic` against central differences `(f(x+ε) − f(x−ε)) / 2ε`.
///
/// `kink(i)` returns the ReLU pre-activation that coordinate `i` feeds (if
/// any); coordinates within `10·ε` of a kink are skipped and listed in the
/// report.
pub fn finite_diff_check(
    mut f: impl FnMut(&[f64]) -> f64,
    params: &[f64],
    analytic: &[f64],
    kink: impl Fn(usize) -> Option<f64>,
    opts: &FdOptions,
) -> Result<FdReport> {
    if !(opts.eps > 0.0) {
        return Err(Error::arg(format!("eps must be positive, got {}", opts.eps)));
    }
    if params.len() != analytic.len() {
        return Err(Error::arg("params and analytic gradient differ in length"));
    }
    let coords: Vec<usize> = if params.len() <= opts.max_coords {
        (0..params.len()).collect()
    } else {
        let mut rng = SplitMix64::new(opts.seed);
        let mut all: Vec<usize> = (0..params.len()).collect();
        // partial Fisher-Yates
        for i in 0..opts.max_coords {
            let j = i + rng.below(all.len() - i);
            all.swap(i, j);
        }
        let mut picked = all[..opts.max_coords].to_vec();
        picked.sort_unstable();
        picked
    };

    let mut x = params.to_vec();
    let mut report = FdReport {
        max_rel_error: 0.0,
        worst_coord: None,
        analytic_at_worst: 0.0,
        numeric_at_worst: 0.0,
        checked: 0,
        skipped: Vec::new(),
    };
    for i in coords {
        if let Some(pre) = kink(i) {
            if pre.abs() < 10.0 * opts.eps {
                report.skipped.push(i);
                continue;
            }
        }
        let orig = x[i];
        x[i] = orig + opts.eps;
        let plus = f(&x);
        x[i] = orig - opts.eps;
        let minus = f(&x);
        x[i] = orig;
        let numeric = (plus - minus) / (2.0 * opts.eps);
        let a = analytic[i];
        let denom = a.abs().max(numeric.abs()).max(opts.denominator_floor);
        let rel = (a - numeric).abs() / denom;
        report.checked += 1;
        if rel > report.max_rel_error || report.worst_coord.is_none() {
            report.max_rel_error = rel;
            report.worst_coord = Some(i);
            report.analytic_at_worst = a;
            report.numeric_at_worst = numeric;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factorizations::Activation;
    use crate::linalg::gaussian_matrix;

    #[test]
    fn cross_entropy_examples() {
        let ce = cross_entropy(&[0.5; 4], 2, 0.0).unwrap();
        assert!((ce - 4f64.ln()).abs() < 1e-12);
        let ce = cross_entropy(&[0.0, 1000.0, 0.0], 1, 0.0).unwrap();
        assert!(ce <= 1e-9);
        assert!(cross_entropy(&[0.0; 3], 3, 0.0).is_err());
        assert!(cross_entropy(&[0.0; 3], 0, 1.0).is_err());
    }

    #[test]
    fn cross_entropy_shift_invariant() {
        let z = [0.3, -1.2, 2.5, 0.0, 4.1];
        for eps in [0.0, 0.1] {
            let a = cross_entropy(&z, 3, eps).unwrap();
            let shifted: Vec<f64> = z.iter().map(|x| x + 123.4).collect();
            let b = cross_entropy(&shifted, 3, eps).unwrap();
            assert!((a - b).abs() <= 1e-10);
        }
    }

    #[test]
    fn total_loss_endpoints() {
        assert_eq!(total_loss(0.0, 2.0, 3.0).unwrap(), 3.0);
        assert_eq!(total_loss(1.0, 2.0, 3.0).unwrap(), 2.0);
        assert!((total_loss(0.01, 2.0, 3.0).unwrap() - 2.99).abs() < 1e-12);
        assert!(total_loss(1.5, 2.0, 3.0).is_err());
        assert!(total_loss(-0.1, 2.0, 3.0).is_err());
    }

    #[test]
    fn recon_loss_examples() {
        let e = gaussian_matrix(6, 4, 1, 1.0);
        assert_eq!(recon_loss(&e, &e).unwrap(), 0.0);
        let mut shifted = e.clone();
        for i in 0..6 {
            shifted[(i, i % 4)] += 1.0;
        }
        assert!((recon_loss(&shifted, &e).unwrap() - 1.0).abs() < 1e-12);
        assert!(recon_loss(&e, &DenseMatrix::zeros(6, 3)).is_err());
    }

    #[test]
    fn finite_diff_scalar() {
        let r = finite_diff_check(|x| x[0] * x[0], &[3.0], &[6.0], |_| None, &FdOptions::default()).unwrap();
        assert!(r.max_rel_error <= 1e-9, "{r:?}");
        let r = finite_diff_check(
            |x| x[0].abs(),
            &[0.0],
            &[0.0],
            |i| Some([0.0][i]),
            &FdOptions::default(),
        )
        .unwrap();
        assert_eq!(r.skipped, vec![0]);
        assert_eq!(r.checked, 0);
        assert!(finite_diff_check(
            |x| x[0],
            &[1.0],
            &[1.0],
            |_| None,
            &FdOptions {
                eps: 0.0,
                ..Default::default()
            }
        )
        .is_err());
    }

    #[test]
    fn exact_reconstruction_is_stationary() {
        let emb = LowRankEmbedding::new(
            gaussian_matrix(8, 3, 2, 1.0),
            gaussian_matrix(5, 3, 3, 1.0),
            Activation::Relu,
        )
        .unwrap();
        let teacher = emb.reconstruct();
        let g = grads_recon(&emb, &teacher).unwrap();
        assert!(g.du.max_abs() <= 1e-6 && g.dv.max_abs() <= 1e-6);
    }
}
