//! Open-set classification losses for box heads.
//!
//! The label space is the known thing classes, one background entry and any
//! number of internal unknown classes. Cross-entropy trains all of them;
//! proposals lying in void regions additionally get a suppression term that
//! pushes probability mass away from every known thing class.

use thiserror::Error;

/// Largest probability fed to `−log(1 − p)`.
pub const MAX_PROB: f64 = 1.0 - 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    KnownThing(u32),
    Background,
    Unknown(u32),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LossError {
    #[error("{logits} logits for a label space of {labels}")]
    LengthMismatch { logits: usize, labels: usize },
    #[error("label space needs exactly one background entry, found {0}")]
    Background(usize),
    #[error("non-finite logit at index {0}")]
    NonFinite(usize),
    #[error("target {target} outside label space of {len}")]
    TargetOutOfRange { target: usize, len: usize },
    #[error("index {0} is not a known thing class")]
    NotKnownThing(usize),
}

/// Logits over an ordered label space.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassScores {
    logits: Vec<f64>,
    labels: Vec<Label>,
}

impl ClassScores {
    pub fn new(logits: Vec<f64>, labels: Vec<Label>) -> Result<Self, LossError> {
        if logits.len() != labels.len() {
            return Err(LossError::LengthMismatch {
                logits: logits.len(),
                labels: labels.len(),
            });
        }
        let bg = labels.iter().filter(|l| **l == Label::Background).count();
        if bg != 1 {
            return Err(LossError::Background(bg));
        }
        if let Some(i) = logits.iter().position(|z| !z.is_finite()) {
            return Err(LossError::NonFinite(i));
        }
        Ok(Self { logits, labels })
    }

    pub fn logits(&self) -> &[f64] {
        &self.logits
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    /// Indices of the known thing classes.
    pub fn known_thing_indices(&self) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, l)| matches!(l, Label::KnownThing(_)))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn with_logits(&self, logits: Vec<f64>) -> Result<Self, LossError> {
        Self::new(logits, self.labels.clone())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput {
    pub value: f64,
    /// Derivative with respect to each logit.
    pub gradient: Vec<f64>,
}

fn log_sum_exp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Max-shifted softmax.
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>, LossError> {
    if let Some(i) = logits.iter().position(|z| !z.is_finite()) {
        return Err(LossError::NonFinite(i));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

/// `−log p_target`, gradient `p − onehot(target)`.
pub fn ce_loss(scores: &ClassScores, target: usize) -> Result<LossOutput, LossError> {
    let z = &scores.logits;
    if target >= z.len() {
        return Err(LossError::TargetOutOfRange {
            target,
            len: z.len(),
        });
    }
    let lse = log_sum_exp(z.iter().copied());
    let mut gradient = softmax(z)?;
    gradient[target] -= 1.0;
    Ok(LossOutput {
        value: lse - z[target],
        gradient,
    })
}

/// `Σ_{c ∈ known things} −log(1 − p_c)`, with `p_c` capped at [`MAX_PROB`].
///
/// Each term is evaluated as `lse(z) − lse(z without c)`, which stays accurate
/// when `p_c` is close to one. A capped term is constant and contributes no
/// gradient.
pub fn void_suppression_loss(
    scores: &ClassScores,
    known_thing_indices: &[usize],
) -> Result<LossOutput, LossError> {
    let z = &scores.logits;
    for &c in known_thing_indices {
        if !matches!(scores.labels.get(c), Some(Label::KnownThing(_))) {
            return Err(LossError::NotKnownThing(c));
        }
    }
    let p = softmax(z)?;
    let lse = log_sum_exp(z.iter().copied());
    let cap = -(1.0 - MAX_PROB).ln();
    let mut value = 0.0;
    let mut gradient = vec![0.0; z.len()];
    for &c in known_thing_indices {
        let others = z.iter().enumerate().filter(|&(j, _)| j != c).map(|(_, &v)| v);
        let lse_others = log_sum_exp(others);
        let term = lse - lse_others;
        if term >= cap {
            value += cap;
            continue;
        }
        value += term;
        for (j, g) in gradient.iter_mut().enumerate() {
            *g += p[j];
            if j != c {
                *g -= (z[j] - lse_others).exp();
            }
        }
    }
    Ok(LossOutput { value, gradient })
}

/// Cross-entropy plus, for void proposals, `void_weight` times the
/// suppression term.
pub fn total_cls_loss(
    scores: &ClassScores,
    target: usize,
    is_void: bool,
    known_thing_indices: &[usize],
    void_weight: f64,
) -> Result<LossOutput, LossError> {
    let mut out = ce_loss(scores, target)?;
    if is_void {
        let v = void_suppression_loss(scores, known_thing_indices)?;
        out.value += void_weight * v.value;
        out.gradient
            .iter_mut()
            .zip(&v.gradient)
            .for_each(|(g, dv)| *g += void_weight * dv);
    }
    Ok(out)
}

/// One box in a batch.
#[derive(Debug, Clone, Copy)]
pub struct BoxSample<'a> {
    pub scores: &'a ClassScores,
    pub target: usize,
    pub is_void: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchLoss {
    pub value: f64,
    /// Per-sample gradients of the mean.
    pub gradients: Vec<Vec<f64>>,
}

/// Mean of [`total_cls_loss`] over a batch. Each sample uses its own
/// known-thing indices; an empty batch has value 0.
pub fn batch_mean_cls_loss(samples: &[BoxSample<'_>], void_weight: f64) -> Result<BatchLoss, LossError> {
    let n = samples.len().max(1) as f64;
    let mut value = 0.0;
    let mut gradients = Vec::with_capacity(samples.len());
    for s in samples {
        let known = s.scores.known_thing_indices();
        let out = total_cls_loss(s.scores, s.target, s.is_void, &known, void_weight)?;
        value += out.value;
        gradients.push(out.gradient.into_iter().map(|g| g / n).collect());
    }
    Ok(BatchLoss { value: value / n, gradients })
}
