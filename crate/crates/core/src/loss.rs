//! Reference loss kernels: partial and label-smoothed cross-entropy, class
//! activation maps, the localization-rectification forward pass and the
//! distance-perception entropy loss, plus analytic logit gradients and a
//! finite-difference checker.
//!
//! Inputs may be stored as `f32` or `f64`; every reduction accumulates in
//! `f64`.

use alloc::vec;
use alloc::vec::Vec;
use core::str::FromStr;

use num_traits::Float;

use crate::distmap::DistanceMap;
use crate::error::{Error, Result};
use crate::label::{LabelMask, IGNORE};
use crate::tensor::{to_f64, ProbabilityMap, Tensor};

/// Floor applied to probabilities before taking a logarithm.
pub const LOG_CLAMP: f64 = 1e-12;
/// Floor applied to feature norms in the cosine similarity.
pub const NORM_CLAMP: f64 = 1e-8;
/// Step used by [`grad_check`].
pub const GRAD_STEP: f64 = 1e-4;

#[inline]
fn clamped_ln(p: f64) -> f64 {
    libm::log(p.max(LOG_CLAMP))
}

fn check_label_dims<T: Float>(pred: &ProbabilityMap<T>, labels: &LabelMask) -> Result<()> {
    let expected = (pred.width(), pred.height());
    if labels.dims() != expected {
        return Err(Error::DimensionMismatch { expected, found: labels.dims() });
    }
    Ok(())
}

/// Labeled pixels as `(pixel, class)`, rejecting class ids outside `0..K`.
fn labeled_pixels<T: Float>(pred: &ProbabilityMap<T>, labels: &LabelMask) -> Result<Vec<(usize, usize)>> {
    check_label_dims(pred, labels)?;
    let k = pred.classes();
    let mut out = Vec::new();
    for (i, &v) in labels.values().iter().enumerate() {
        if v == IGNORE {
            continue;
        }
        if usize::from(v) >= k {
            return Err(Error::InvalidClass(u32::from(v)));
        }
        out.push((i, usize::from(v)));
    }
    if out.is_empty() {
        return Err(Error::NoLabeledPixels);
    }
    Ok(out)
}

/// Mean of `-log p[y]` over pixels not marked [`IGNORE`].
pub fn partial_ce<T: Float>(pred: &ProbabilityMap<T>, scribble: &LabelMask) -> Result<f64> {
    let pixels = labeled_pixels(pred, scribble)?;
    let sum: f64 = pixels.iter().map(|&(i, y)| -clamped_ln(to_f64(pred.prob(y, i)))).sum();
    Ok(sum / pixels.len() as f64)
}

/// Cross-entropy against `(1 - ε)·onehot + ε·uniform`, averaged over labeled
/// pixels.
pub fn smoothed_ce<T: Float>(pred: &ProbabilityMap<T>, pseudo: &LabelMask, epsilon: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&epsilon) {
        return Err(Error::InvalidConfig("epsilon must lie in [0, 1)"));
    }
    let pixels = labeled_pixels(pred, pseudo)?;
    let k = pred.classes();
    let mut sum = 0.0;
    for &(i, y) in &pixels {
        let hard = -clamped_ln(to_f64(pred.prob(y, i)));
        let soft: f64 = (0..k).map(|c| -clamped_ln(to_f64(pred.prob(c, i)))).sum::<f64>() / k as f64;
        sum += (1.0 - epsilon) * hard + epsilon * soft;
    }
    Ok(sum / pixels.len() as f64)
}

/// `ReLU(Σ_c W[c, k] · F[c])` for features `C x H x W` and weights `C x K`.
pub fn cam<T: Float>(features: &Tensor<T>, weights: &Tensor<T>, class: usize) -> Result<Tensor<T>> {
    let &[c, h, w] = features.shape() else {
        return Err(Error::ShapeMismatch("features must be C x H x W"));
    };
    let &[wc, k] = weights.shape() else {
        return Err(Error::ShapeMismatch("weights must be C x K"));
    };
    if wc != c {
        return Err(Error::ShapeMismatch("feature and weight channel counts differ"));
    }
    if class >= k {
        return Err(Error::InvalidClass(class as u32));
    }
    let hw = h * w;
    let f = features.data();
    let mut out = vec![0.0f64; hw];
    for ch in 0..c {
        let wk = to_f64(weights.data()[ch * k + class]);
        for (o, &v) in out.iter_mut().zip(&f[ch * hw..(ch + 1) * hw]) {
            *o += wk * to_f64(v);
        }
    }
    for o in &mut out {
        *o = o.max(0.0);
    }
    Ok(Tensor::from_f64(&[h, w], &out))
}

fn column_norms(m: &[f64], c: usize, n: usize) -> Vec<f64> {
    (0..n)
        .map(|j| {
            let s: f64 = (0..c).map(|r| m[r * n + j] * m[r * n + j]).sum();
            libm::sqrt(s).max(NORM_CLAMP)
        })
        .collect()
}

fn similarity(q: &[f64], k: &[f64], c: usize, n: usize) -> Vec<f64> {
    let qn = column_norms(q, c, n);
    let kn = column_norms(k, c, n);
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        let row = &mut a[i * n..(i + 1) * n];
        for (j, r) in row.iter_mut().enumerate() {
            let dot: f64 = (0..c).map(|ch| q[ch * n + i] * k[ch * n + j]).sum();
            *r = dot / (qn[i] * kn[j]);
        }
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for r in row.iter_mut() {
            *r = libm::exp(*r - m);
            sum += *r;
        }
        for r in row.iter_mut() {
            *r /= sum;
        }
    }
    a
}

/// Row-wise softmax of the cosine similarity `QᵀK`, for `Q`, `K` of shape
/// `C x N`. Returns `N x N`; row `i` compares query column `i` with every key.
pub fn lorm_similarity<T: Float>(q: &Tensor<T>, k: &Tensor<T>) -> Result<Tensor<T>> {
    let &[c, n] = q.shape() else {
        return Err(Error::ShapeMismatch("Q must be C x N"));
    };
    if k.shape() != q.shape() {
        return Err(Error::ShapeMismatch("Q and K shapes differ"));
    }
    let a = similarity(&q.to_f64_vec(), &k.to_f64_vec(), c, n);
    Ok(Tensor::from_f64(&[n, n], &a))
}

/// Channel-mixing projections producing `Q` and `K`.
#[derive(Debug, Clone, Copy)]
pub enum Projection<'a, T = f32> {
    Separate { query: &'a Tensor<T>, key: &'a Tensor<T> },
    Shared(&'a Tensor<T>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Reduction {
    #[default]
    Mean,
    Sum,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LormOutput<T = f32> {
    /// Rectified features, `C x H x W`.
    pub refined: Tensor<T>,
    /// Squared error between the input and rectified features.
    pub loss: f64,
}

fn project(p: &[f64], f: &[f64], c: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; c * n];
    for r in 0..c {
        for d in 0..c {
            let w = p[r * c + d];
            if w == 0.0 {
                continue;
            }
            for j in 0..n {
                out[r * n + j] += w * f[d * n + j];
            }
        }
    }
    out
}

/// Localization-rectification forward pass.
///
/// `Q = P_q F'`, `K = P_k F'`, `A' = A` with column `j` scaled by the flattened
/// mask value `M'_j`, `F̂ = δ · F' A'`. The loss compares `F` with `F̂`.
pub fn lorm_forward<T: Float>(
    features: &Tensor<T>,
    foreground: &Tensor<T>,
    projection: Projection<'_, T>,
    delta: f64,
    reduction: Reduction,
) -> Result<LormOutput<T>> {
    let &[c, h, w] = features.shape() else {
        return Err(Error::ShapeMismatch("features must be C x H x W"));
    };
    if foreground.shape() != [h, w] {
        return Err(Error::ShapeMismatch("foreground mask must be H x W"));
    }
    if !delta.is_finite() {
        return Err(Error::InvalidValue("delta must be finite"));
    }
    let (pq, pk) = match projection {
        Projection::Separate { query, key } => (query, key),
        Projection::Shared(p) => (p, p),
    };
    if pq.shape() != [c, c] || pk.shape() != [c, c] {
        return Err(Error::ShapeMismatch("projections must be C x C"));
    }
    let mask = foreground.to_f64_vec();
    if mask.iter().any(|&m| m != 0.0 && m != 1.0) {
        return Err(Error::InvalidValue("foreground mask must hold 0 or 1"));
    }
    let n = h * w;
    let f = features.to_f64_vec();
    let q = project(&pq.to_f64_vec(), &f, c, n);
    let k = project(&pk.to_f64_vec(), &f, c, n);
    let mut a = similarity(&q, &k, c, n);
    for row in a.chunks_exact_mut(n) {
        for (v, &m) in row.iter_mut().zip(&mask) {
            *v *= m;
        }
    }
    let mut refined = vec![0.0; c * n];
    for ch in 0..c {
        let fr = &f[ch * n..(ch + 1) * n];
        let out = &mut refined[ch * n..(ch + 1) * n];
        for (i, &fv) in fr.iter().enumerate() {
            if fv == 0.0 {
                continue;
            }
            for (o, &av) in out.iter_mut().zip(&a[i * n..(i + 1) * n]) {
                *o += fv * av;
            }
        }
        for o in out.iter_mut() {
            *o *= delta;
        }
    }
    let sq: f64 = f.iter().zip(&refined).map(|(a, b)| (a - b) * (a - b)).sum();
    let loss = match reduction {
        Reduction::Mean => sq / (c * n) as f64,
        Reduction::Sum => sq,
    };
    Ok(LormOutput { refined: Tensor::from_f64(&[c, h, w], &refined), loss })
}

/// Sign convention for the distance-perception loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EntropySign {
    /// `d · Σ p log p`, non-positive.
    #[default]
    AsPrinted,
    /// `-d · Σ p log p`, the weighted entropy.
    Negated,
}

impl EntropySign {
    fn factor(self) -> f64 {
        match self {
            EntropySign::AsPrinted => 1.0,
            EntropySign::Negated => -1.0,
        }
    }
}

fn check_map_dims<T: Float>(pred: &ProbabilityMap<T>, dmap: &DistanceMap) -> Result<()> {
    let expected = (pred.width(), pred.height());
    let found = (dmap.width(), dmap.height());
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Distance-weighted `Σ_k p_k log p_k`, averaged over pixels with a nonzero
/// decoded weight.
pub fn dp_loss<T: Float>(pred: &ProbabilityMap<T>, dmap: &DistanceMap, sign: EntropySign) -> Result<f64> {
    check_map_dims(pred, dmap)?;
    let k = pred.classes();
    let mut sum = 0.0;
    let mut count = 0usize;
    for i in 0..pred.pixels() {
        let d = dmap.value_at(i);
        if d == 0.0 {
            continue;
        }
        count += 1;
        let neg_entropy: f64 = (0..k)
            .map(|c| {
                let p = to_f64(pred.prob(c, i));
                p * clamped_ln(p)
            })
            .sum();
        sum += d * neg_entropy;
    }
    if count == 0 {
        return Err(Error::AllZeroDistanceMap);
    }
    Ok(sign.factor() * sum / count as f64)
}

/// Named kernels known to the checker and the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossKind {
    PartialCe,
    SmoothedCe,
    DpLoss,
    Cam,
    Lorm,
}

impl LossKind {
    pub const ALL: [LossKind; 5] =
        [LossKind::PartialCe, LossKind::SmoothedCe, LossKind::DpLoss, LossKind::Cam, LossKind::Lorm];

    pub fn name(self) -> &'static str {
        match self {
            LossKind::PartialCe => "partial_ce",
            LossKind::SmoothedCe => "smoothed_ce",
            LossKind::DpLoss => "dp_loss",
            LossKind::Cam => "cam",
            LossKind::Lorm => "lorm",
        }
    }

    /// Whether an analytic logit gradient is provided.
    pub fn is_differentiable(self) -> bool {
        matches!(self, LossKind::PartialCe | LossKind::SmoothedCe | LossKind::DpLoss)
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LossKind::ALL.into_iter().find(|k| k.name() == s).ok_or(Error::UnsupportedLoss)
    }
}

/// Everything a differentiable loss may need besides the prediction.
#[derive(Debug, Clone, Copy)]
pub struct LossInputs<'a> {
    pub labels: Option<&'a LabelMask>,
    pub epsilon: f64,
    pub dmap: Option<&'a DistanceMap>,
    pub sign: EntropySign,
}

impl<'a> LossInputs<'a> {
    pub fn labels(labels: &'a LabelMask) -> Self {
        Self { labels: Some(labels), epsilon: 0.0, dmap: None, sign: EntropySign::AsPrinted }
    }

    pub fn smoothed(labels: &'a LabelMask, epsilon: f64) -> Self {
        Self { epsilon, ..Self::labels(labels) }
    }

    pub fn distance(dmap: &'a DistanceMap, sign: EntropySign) -> Self {
        Self { labels: None, epsilon: 0.0, dmap: Some(dmap), sign }
    }

    fn need_labels(&self) -> Result<&'a LabelMask> {
        self.labels.ok_or(Error::InvalidConfig("loss needs a label mask"))
    }

    fn need_dmap(&self) -> Result<&'a DistanceMap> {
        self.dmap.ok_or(Error::InvalidConfig("loss needs a distance map"))
    }
}

/// Value of a differentiable loss on `pred`.
pub fn evaluate<T: Float>(kind: LossKind, inputs: &LossInputs<'_>, pred: &ProbabilityMap<T>) -> Result<f64> {
    match kind {
        LossKind::PartialCe => partial_ce(pred, inputs.need_labels()?),
        LossKind::SmoothedCe => smoothed_ce(pred, inputs.need_labels()?, inputs.epsilon),
        LossKind::DpLoss => dp_loss(pred, inputs.need_dmap()?, inputs.sign),
        LossKind::Cam | LossKind::Lorm => Err(Error::UnsupportedLoss),
    }
}

/// Analytic gradient of a differentiable loss with respect to the logits,
/// where `p = softmax(logits)` per pixel. Assumes no probability sits on the
/// log clamp.
pub fn logit_gradient(kind: LossKind, inputs: &LossInputs<'_>, logits: &Tensor<f64>) -> Result<Tensor<f64>> {
    let pred = ProbabilityMap::from_logits(logits)?;
    let (k, n) = (pred.classes(), pred.pixels());
    let mut grad = vec![0.0; k * n];
    match kind {
        LossKind::PartialCe | LossKind::SmoothedCe => {
            let labels = inputs.need_labels()?;
            let eps = if kind == LossKind::SmoothedCe {
                if !(0.0..1.0).contains(&inputs.epsilon) {
                    return Err(Error::InvalidConfig("epsilon must lie in [0, 1)"));
                }
                inputs.epsilon
            } else {
                0.0
            };
            let pixels = labeled_pixels(&pred, labels)?;
            let scale = 1.0 / pixels.len() as f64;
            for &(i, y) in &pixels {
                for c in 0..k {
                    let target = eps / k as f64 + if c == y { 1.0 - eps } else { 0.0 };
                    grad[c * n + i] = (pred.prob(c, i) - target) * scale;
                }
            }
        }
        LossKind::DpLoss => {
            let dmap = inputs.need_dmap()?;
            check_map_dims(&pred, dmap)?;
            let count = (0..n).filter(|&i| dmap.value_at(i) != 0.0).count();
            if count == 0 {
                return Err(Error::AllZeroDistanceMap);
            }
            let scale = inputs.sign.factor() / count as f64;
            for i in 0..n {
                let d = dmap.value_at(i);
                if d == 0.0 {
                    continue;
                }
                let h: f64 = (0..k).map(|c| pred.prob(c, i) * clamped_ln(pred.prob(c, i))).sum();
                for c in 0..k {
                    let p = pred.prob(c, i);
                    grad[c * n + i] = scale * d * p * (clamped_ln(p) - h);
                }
            }
        }
        LossKind::Cam | LossKind::Lorm => return Err(Error::UnsupportedLoss),
    }
    Tensor::new(logits.shape(), grad)
}

/// Largest `|analytic - numeric| / max(1, |numeric|)` over all logits, with
/// the numeric gradient from central differences of step [`GRAD_STEP`].
pub fn grad_check(
    kind: LossKind,
    inputs: &LossInputs<'_>,
    logits: &Tensor<f64>,
    analytic: &Tensor<f64>,
) -> Result<f64> {
    if !kind.is_differentiable() {
        return Err(Error::UnsupportedLoss);
    }
    if analytic.shape() != logits.shape() {
        return Err(Error::ShapeMismatch("gradient and logits shapes differ"));
    }
    let mut z = logits.data().to_vec();
    let mut worst = 0.0f64;
    for j in 0..z.len() {
        let orig = z[j];
        z[j] = orig + GRAD_STEP;
        let up = evaluate(kind, inputs, &ProbabilityMap::from_logits(&Tensor::new(logits.shape(), z.clone())?)?)?;
        z[j] = orig - GRAD_STEP;
        let down = evaluate(kind, inputs, &ProbabilityMap::from_logits(&Tensor::new(logits.shape(), z.clone())?)?)?;
        z[j] = orig;
        let numeric = (up - down) / (2.0 * GRAD_STEP);
        let err = libm::fabs(analytic.data()[j] - numeric) / libm::fabs(numeric).max(1.0);
        worst = worst.max(err);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distmap::DistanceKind;
    use crate::rng::SplitMix64;

    fn probs(k: usize, h: usize, w: usize, data: &[f64]) -> ProbabilityMap<f64> {
        ProbabilityMap::new(Tensor::new(&[k, h, w], data.to_vec()).unwrap()).unwrap()
    }

    fn random_logits(rng: &mut SplitMix64, shape: &[usize]) -> Tensor<f64> {
        Tensor::from_fn(shape, |_| rng.symmetric(2.0)).unwrap()
    }

    #[test]
    fn uniform_partial_ce_is_log_k() {
        let pred = ProbabilityMap::<f64>::uniform(21, 3, 3).unwrap();
        let labels = LabelMask::from_fn(3, 3, |x, y| ((x + 2 * y) % 21) as u8);
        let v = partial_ce(&pred, &labels).unwrap();
        assert!((v - 3.04452).abs() < 1e-5);
        assert!((v - 21f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn perfect_prediction_has_zero_ce() {
        let pred = probs(2, 1, 2, &[1.0, 0.0, 0.0, 1.0]);
        let labels = LabelMask::from_values(2, 1, vec![0, 1]).unwrap();
        assert!(partial_ce(&pred, &labels).unwrap() <= 1e-6);
    }

    #[test]
    fn partial_ce_hand_value() {
        // Third pixel is ignored.
        let pred = probs(2, 1, 3, &[0.5, 0.75, 0.1, 0.5, 0.25, 0.9]);
        let labels = LabelMask::from_values(3, 1, vec![0, 1, IGNORE]).unwrap();
        let v = partial_ce(&pred, &labels).unwrap();
        assert!((v - 1.5 * core::f64::consts::LN_2).abs() < 1e-12);
        assert!((v - 1.03972).abs() < 1e-5);
    }

    #[test]
    fn partial_ce_errors() {
        let pred = ProbabilityMap::<f64>::uniform(2, 1, 2).unwrap();
        let none = LabelMask::unlabeled(2, 1);
        assert_eq!(partial_ce(&pred, &none), Err(Error::NoLabeledPixels));
        let bad = LabelMask::from_values(2, 1, vec![0, 2]).unwrap();
        assert_eq!(partial_ce(&pred, &bad), Err(Error::InvalidClass(2)));
        let wrong = LabelMask::unlabeled(3, 1);
        assert!(matches!(partial_ce(&pred, &wrong), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn smoothed_ce_hand_value() {
        let pred = probs(2, 1, 1, &[0.8, 0.2]);
        let labels = LabelMask::from_values(1, 1, vec![0]).unwrap();
        let v = smoothed_ce(&pred, &labels, 0.2).unwrap();
        let want = 0.8 * -(0.8f64.ln()) + 0.2 * (-0.5 * 0.8f64.ln() - 0.5 * 0.2f64.ln());
        assert!((v - want).abs() < 1e-15);
        assert!((v - 0.36177).abs() < 1e-5, "{v}");
    }

    #[test]
    fn smoothed_ce_reduces_to_partial() {
        let mut rng = SplitMix64::new(3);
        let pred = ProbabilityMap::from_logits(&random_logits(&mut rng, &[4, 3, 3])).unwrap();
        let labels = LabelMask::from_fn(3, 3, |x, y| if x == y { IGNORE } else { ((x + y) % 4) as u8 });
        let a = partial_ce(&pred, &labels).unwrap();
        let b = smoothed_ce(&pred, &labels, 0.0).unwrap();
        assert!((a - b).abs() < 1e-15);
        let u = ProbabilityMap::<f64>::uniform(21, 3, 3).unwrap();
        assert!((smoothed_ce(&u, &labels, 0.7).unwrap() - 21f64.ln()).abs() < 1e-12);
        assert!(smoothed_ce(&u, &labels, 1.0).is_err());
    }

    #[test]
    fn cam_selects_and_rectifies() {
        let mut rng = SplitMix64::new(9);
        let f = random_logits(&mut rng, &[4, 2, 2]);
        let zero = Tensor::<f64>::zeros(&[4, 3]);
        assert!(cam(&f, &zero, 1).unwrap().data().iter().all(|&v| v == 0.0));
        let onehot = Tensor::from_fn(&[4, 3], |i| if i == 3 * 3 + 2 { 1.0 } else { 0.0 }).unwrap();
        let m = cam(&f, &onehot, 2).unwrap();
        for i in 0..4 {
            assert_eq!(m.data()[i], f.data()[12 + i].max(0.0));
        }
        let wrong = Tensor::<f64>::zeros(&[3, 3]);
        assert!(matches!(cam(&f, &wrong, 0), Err(Error::ShapeMismatch(_))));
        assert_eq!(cam(&f, &zero, 3), Err(Error::InvalidClass(3)));
    }

    #[test]
    fn cam_matches_scalar_loop() {
        let mut rng = SplitMix64::new(17);
        let f = random_logits(&mut rng, &[4, 2, 2]);
        let wts = random_logits(&mut rng, &[4, 3]);
        for k in 0..3 {
            let m = cam(&f, &wts, k).unwrap();
            for y in 0..2 {
                for x in 0..2 {
                    let mut s = 0.0;
                    for c in 0..4 {
                        s += wts.get(&[c, k]) * f.get(&[c, y, x]);
                    }
                    assert!((m.get(&[y, x]) - s.max(0.0)).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn similarity_examples() {
        let one = Tensor::<f64>::new(&[3, 1], vec![0.3, -1.0, 2.0]).unwrap();
        assert_eq!(lorm_similarity(&one, &one).unwrap().data(), &[1.0]);
        let eye = Tensor::<f64>::new(&[2, 2], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let a = lorm_similarity(&eye, &eye).unwrap();
        let e = core::f64::consts::E;
        let expect = [e / (e + 1.0), 1.0 / (e + 1.0), 1.0 / (e + 1.0), e / (e + 1.0)];
        for (got, want) in a.data().iter().zip(expect) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!((a.data()[0] - 0.73106).abs() < 1e-5);
        assert!((a.data()[1] - 0.26894).abs() < 1e-5);
    }

    #[test]
    fn similarity_handles_zero_columns() {
        let q = Tensor::<f64>::new(&[2, 3], vec![0.0, 1.0, 2.0, 0.0, -1.0, 0.5]).unwrap();
        let a = lorm_similarity(&q, &q).unwrap();
        for row in a.data().chunks(3) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(row.iter().all(|&v| v > 0.0 && v < 1.0));
        }
    }

    /// Triple-loop evaluation straight from the definitions.
    #[allow(clippy::needless_range_loop)]
    fn lorm_oracle(f: &Tensor<f64>, m: &Tensor<f64>, pq: &Tensor<f64>, pk: &Tensor<f64>, delta: f64) -> (Vec<f64>, f64) {
        let (c, h, w) = (f.shape()[0], f.shape()[1], f.shape()[2]);
        let n = h * w;
        let fp = |ch: usize, j: usize| f.get(&[ch, j / w, j % w]);
        let q = |r: usize, j: usize| (0..c).map(|d| pq.get(&[r, d]) * fp(d, j)).sum::<f64>();
        let k = |r: usize, j: usize| (0..c).map(|d| pk.get(&[r, d]) * fp(d, j)).sum::<f64>();
        let mut a = vec![vec![0.0; n]; n];
        for i in 0..n {
            let qn = (0..c).map(|r| q(r, i).powi(2)).sum::<f64>().sqrt().max(1e-8);
            let mut row = vec![0.0; n];
            for j in 0..n {
                let kn = (0..c).map(|r| k(r, j).powi(2)).sum::<f64>().sqrt().max(1e-8);
                row[j] = (0..c).map(|r| q(r, i) * k(r, j)).sum::<f64>() / (qn * kn);
            }
            let z: f64 = row.iter().map(|v| v.exp()).sum();
            for j in 0..n {
                a[i][j] = row[j].exp() / z * m.data()[j];
            }
        }
        let mut out = vec![0.0; c * n];
        let mut loss = 0.0;
        for ch in 0..c {
            for j in 0..n {
                let v = delta * (0..n).map(|i| fp(ch, i) * a[i][j]).sum::<f64>();
                out[ch * n + j] = v;
                loss += (fp(ch, j) - v).powi(2);
            }
        }
        (out, loss / (c * n) as f64)
    }

    #[test]
    fn lorm_matches_oracle() {
        let mut rng = SplitMix64::new(23);
        for trial in 0..20 {
            let c = 1 + trial % 4;
            let (h, w) = (1 + trial % 3, 1 + (trial / 3) % 3);
            let f = random_logits(&mut rng, &[c, h, w]);
            let m = Tensor::from_fn(&[h, w], |_| if rng.next_f64() < 0.6 { 1.0 } else { 0.0 }).unwrap();
            let pq = random_logits(&mut rng, &[c, c]);
            let pk = random_logits(&mut rng, &[c, c]);
            let delta = 0.5 + rng.next_f64();
            let got = lorm_forward(&f, &m, Projection::Separate { query: &pq, key: &pk }, delta, Reduction::Mean).unwrap();
            let (want, loss) = lorm_oracle(&f, &m, &pq, &pk, delta);
            for (a, b) in got.refined.data().iter().zip(&want) {
                assert!((a - b).abs() < 1e-10);
            }
            assert!((got.loss - loss).abs() < 1e-10);
            let shared = lorm_forward(&f, &m, Projection::Shared(&pq), delta, Reduction::Sum).unwrap();
            let (_, shared_mean) = lorm_oracle(&f, &m, &pq, &pq, delta);
            assert!((shared.loss - shared_mean * f.len() as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn lorm_suppression_cases() {
        let mut rng = SplitMix64::new(31);
        let f = random_logits(&mut rng, &[2, 2, 2]);
        let p = random_logits(&mut rng, &[2, 2]);
        let mean_sq = f.data().iter().map(|v| v * v).sum::<f64>() / 8.0;
        let ones = Tensor::from_fn(&[2, 2], |_| 1.0).unwrap();
        let zero_delta = lorm_forward(&f, &ones, Projection::Shared(&p), 0.0, Reduction::Mean).unwrap();
        assert!(zero_delta.refined.data().iter().all(|&v| v == 0.0));
        assert!((zero_delta.loss - mean_sq).abs() < 1e-12);
        let empty = Tensor::<f64>::zeros(&[2, 2]);
        let masked = lorm_forward(&f, &empty, Projection::Shared(&p), 1.0, Reduction::Mean).unwrap();
        assert!(masked.refined.data().iter().all(|&v| v == 0.0));
        assert!((masked.loss - mean_sq).abs() < 1e-12);
        let half = Tensor::from_fn(&[2, 2], |_| 0.5).unwrap();
        assert!(lorm_forward(&f, &half, Projection::Shared(&p), 1.0, Reduction::Mean).is_err());
        assert!(lorm_forward(&f, &ones, Projection::Shared(&p), f64::NAN, Reduction::Mean).is_err());
    }

    fn dmap(w: usize, h: usize, raw: Vec<u8>) -> DistanceMap {
        DistanceMap::from_raw(w, h, raw, DistanceKind::PseudoBoundary).unwrap()
    }

    #[test]
    fn dp_loss_examples() {
        let ones = dmap(2, 2, vec![255; 4]);
        let onehot = probs(2, 2, 2, &[1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0]);
        assert_eq!(dp_loss(&onehot, &ones, EntropySign::AsPrinted).unwrap(), 0.0);
        let u = ProbabilityMap::<f64>::uniform(2, 2, 2).unwrap();
        let v = dp_loss(&u, &ones, EntropySign::AsPrinted).unwrap();
        assert!((v + core::f64::consts::LN_2).abs() < 1e-12);
        let n = dp_loss(&u, &ones, EntropySign::Negated).unwrap();
        assert!((n - core::f64::consts::LN_2).abs() < 1e-12);
        assert_eq!(dp_loss(&u, &dmap(2, 2, vec![0; 4]), EntropySign::AsPrinted), Err(Error::AllZeroDistanceMap));
        assert!(dp_loss(&u, &dmap(1, 4, vec![9; 4]), EntropySign::AsPrinted).is_err());
    }

    #[test]
    fn dp_loss_matches_scalar_loop() {
        let mut rng = SplitMix64::new(41);
        let pred = ProbabilityMap::from_logits(&random_logits(&mut rng, &[3, 2, 2])).unwrap();
        let map = dmap(2, 2, vec![0, 40, 200, 255]);
        let mut s = 0.0;
        for i in 1..4 {
            let d = map.raw()[i] as f64 / 255.0;
            let e: f64 = (0..3).map(|c| pred.prob(c, i) * pred.prob(c, i).ln()).sum();
            s += d * e;
        }
        let got = dp_loss(&pred, &map, EntropySign::AsPrinted).unwrap();
        assert!((got - s / 3.0).abs() < 1e-12);
        assert!(got <= 0.0);
    }

    #[test]
    fn gradients_agree_with_finite_differences() {
        let mut rng = SplitMix64::new(53);
        let logits = random_logits(&mut rng, &[3, 2, 2]);
        let labels = LabelMask::from_values(2, 2, vec![0, 2, IGNORE, 1]).unwrap();
        let map = dmap(2, 2, vec![0, 30, 128, 255]);
        let cases = [
            (LossKind::PartialCe, LossInputs::labels(&labels)),
            (LossKind::SmoothedCe, LossInputs::smoothed(&labels, 0.2)),
            (LossKind::DpLoss, LossInputs::distance(&map, EntropySign::AsPrinted)),
            (LossKind::DpLoss, LossInputs::distance(&map, EntropySign::Negated)),
        ];
        for (kind, inputs) in cases {
            let g = logit_gradient(kind, &inputs, &logits).unwrap();
            let err = grad_check(kind, &inputs, &logits, &g).unwrap();
            assert!(err <= 1e-4, "{kind:?}: {err}");
        }
    }

    #[test]
    fn grad_check_detects_wrong_gradient() {
        let mut rng = SplitMix64::new(59);
        let logits = random_logits(&mut rng, &[3, 2, 2]);
        let labels = LabelMask::from_values(2, 2, vec![0, 2, 1, 1]).unwrap();
        let inputs = LossInputs::labels(&labels);
        let zeros = Tensor::<f64>::zeros(&[3, 2, 2]);
        assert!(grad_check(LossKind::PartialCe, &inputs, &logits, &zeros).unwrap() > 1e-2);
    }

    #[test]
    fn loss_names() {
        assert_eq!("partial_ce".parse::<LossKind>(), Ok(LossKind::PartialCe));
        assert_eq!("dp_loss".parse::<LossKind>(), Ok(LossKind::DpLoss));
        assert_eq!("focal".parse::<LossKind>(), Err(Error::UnsupportedLoss));
        let labels = LabelMask::from_values(1, 1, vec![0]).unwrap();
        let logits = Tensor::<f64>::zeros(&[2, 1, 1]);
        let inputs = LossInputs::labels(&labels);
        assert_eq!(grad_check(LossKind::Cam, &inputs, &logits, &logits), Err(Error::UnsupportedLoss));
        assert_eq!(logit_gradient(LossKind::Lorm, &inputs, &logits), Err(Error::UnsupportedLoss));
    }
}
