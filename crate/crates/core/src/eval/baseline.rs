use serde::{Deserialize, Serialize};

use crate::channel::Dataset;
use crate::error::{Error, Result};
use crate::model::{forward, ModelConfig, ModelParams};
use crate::numerics::{ComplexTensor, Tensor};

pub const AR_RIDGE: f64 = 1e-6;
const PIVOT_FLOOR: f64 = 1e-10;

/// Maps a `T x K x A` history to an `L x K x A` prediction.
pub trait Predictor: Sync {
    fn predict(&self, history: &ComplexTensor, horizon: usize) -> Result<ComplexTensor>;
    fn name(&self) -> String;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Hold,
    Ar,
}

/// Classical predictors used as reference points.
#[derive(Debug, Clone, PartialEq)]
pub enum BaselinePredictor {
    /// Repeats the last observed frame.
    Hold,
    /// Per-feature complex autoregression rolled forward on its own output.
    LinearAr {
        order: usize,
        /// `coeffs[f][j]` multiplies lag `j + 1` of feature `f`.
        coeffs: Vec<Vec<(f64, f64)>>,
        /// Features whose normal equations were rank deficient and fell
        /// back to holding the last value.
        fallback: Vec<bool>,
    },
}

impl BaselinePredictor {
    pub fn fallback_count(&self) -> usize {
        match self {
            Self::Hold => 0,
            Self::LinearAr { fallback, .. } => fallback.iter().filter(|&&f| f).count(),
        }
    }
}

fn frame_split(history: &ComplexTensor) -> Result<(usize, usize)> {
    match history.shape() {
        [t, k, a] if *t > 0 => Ok((*t, k * a)),
        s => Err(Error::Dimension(format!("history must be T x K x A, found {s:?}"))),
    }
}

impl Predictor for BaselinePredictor {
    fn predict(&self, history: &ComplexTensor, horizon: usize) -> Result<ComplexTensor> {
        let (t, width) = frame_split(history)?;
        let mut shape = history.shape().to_vec();
        shape[0] = horizon;
        let mut out = ComplexTensor::zeros(&shape);
        match self {
            Self::Hold => {
                for l in 0..horizon {
                    for f in 0..width {
                        let (r, i) = history.get((t - 1) * width + f);
                        out.set(l * width + f, r, i);
                    }
                }
            }
            Self::LinearAr { order, coeffs, fallback } => {
                if coeffs.len() != width {
                    return Err(Error::Dimension(format!(
                        "AR model has {} features, history has {width}",
                        coeffs.len()
                    )));
                }
                if *order > t {
                    return Err(Error::Dimension(format!("AR order {order} exceeds history {t}")));
                }
                for f in 0..width {
                    let mut seq: Vec<(f64, f64)> =
                        (0..t).map(|s| history.get(s * width + f)).collect();
                    for l in 0..horizon {
                        let next = if fallback[f] {
                            *seq.last().expect("non-empty history")
                        } else {
                            let n = seq.len();
                            coeffs[f].iter().enumerate().fold((0.0, 0.0), |acc, (j, c)| {
                                let x = seq[n - 1 - j];
                                (acc.0 + c.0 * x.0 - c.1 * x.1, acc.1 + c.0 * x.1 + c.1 * x.0)
                            })
                        };
                        seq.push(next);
                        out.set(l * width + f, next.0, next.1);
                    }
                }
            }
        }
        Ok(out)
    }

    fn name(&self) -> String {
        match self {
            Self::Hold => "hold".into(),
            Self::LinearAr { order, .. } => format!("ar{order}"),
        }
    }
}

/// The trained network as a [`Predictor`].
#[derive(Debug, Clone)]
pub struct ModelPredictor {
    pub config: ModelConfig,
    pub params: ModelParams,
}

impl Predictor for ModelPredictor {
    fn predict(&self, history: &ComplexTensor, horizon: usize) -> Result<ComplexTensor> {
        if horizon != self.config.horizon {
            return Err(Error::Dimension(format!(
                "model predicts {} steps, {horizon} requested",
                self.config.horizon
            )));
        }
        forward(history, &self.params, &self.config)
    }

    fn name(&self) -> String {
        "channelkan".into()
    }
}

/// Fits a complex AR(`order`) model per feature by ridge least squares over
/// every lag window inside the training histories.
pub fn fit_linear_ar(train: &Dataset, order: usize) -> Result<BaselinePredictor> {
    if order == 0 {
        return Err(Error::Precondition("AR order must be >= 1".into()));
    }
    if order >= train.history_len {
        return Err(Error::Precondition(format!(
            "AR order {order} must be below the history length {}",
            train.history_len
        )));
    }
    if train.is_empty() {
        return Err(Error::EmptyDataset("cannot fit AR on an empty dataset".into()));
    }
    let (t, width) = frame_split(&train.samples[0].history)?;
    let equations = train.len() * (t - order);
    if equations < order {
        return Err(Error::Precondition(format!(
            "{equations} equations for {order} unknowns"
        )));
    }

    let mut coeffs = Vec::with_capacity(width);
    let mut fallback = Vec::with_capacity(width);
    for f in 0..width {
        // Mean normal equations: (E[conj(phi) phi^T] + lambda I) c = E[conj(phi) y].
        let mut gram = vec![vec![(0.0, 0.0); order]; order];
        let mut rhs = vec![(0.0, 0.0); order];
        for s in &train.samples {
            let x = |i: usize| s.history.get(i * width + f);
            for n in order..t {
                let y = x(n);
                for a in 0..order {
                    let pa = x(n - 1 - a);
                    rhs[a] = cadd(rhs[a], cmul(conj(pa), y));
                    for b in 0..order {
                        gram[a][b] = cadd(gram[a][b], cmul(conj(pa), x(n - 1 - b)));
                    }
                }
            }
        }
        let scale = 1.0 / equations as f64;
        let mut data_scale: f64 = 0.0;
        for a in 0..order {
            rhs[a] = (rhs[a].0 * scale, rhs[a].1 * scale);
            for b in 0..order {
                gram[a][b] = (gram[a][b].0 * scale, gram[a][b].1 * scale);
            }
            data_scale = data_scale.max(gram[a][a].0);
            gram[a][a].0 += AR_RIDGE;
        }
        match solve_complex(gram, rhs, data_scale) {
            Some(c) => {
                coeffs.push(c);
                fallback.push(false);
            }
            None => {
                coeffs.push(vec![(0.0, 0.0); order]);
                fallback.push(true);
            }
        }
    }
    Ok(BaselinePredictor::LinearAr {
        order,
        coeffs,
        fallback,
    })
}

fn cadd(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    (a.0 + b.0, a.1 + b.1)
}

fn cmul(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    (a.0 * b.0 - a.1 * b.1, a.0 * b.1 + a.1 * b.0)
}

fn conj(a: (f64, f64)) -> (f64, f64) {
    (a.0, -a.1)
}

fn cabs2(a: (f64, f64)) -> f64 {
    a.0 * a.0 + a.1 * a.1
}

/// Gaussian elimination with partial pivoting. `None` when a pivot falls
/// below `PIVOT_FLOOR` relative to `scale`, the largest diagonal entry of
/// the unregularised system.
fn solve_complex(
    mut m: Vec<Vec<(f64, f64)>>,
    mut rhs: Vec<(f64, f64)>,
    scale: f64,
) -> Option<Vec<(f64, f64)>> {
    let n = rhs.len();
    if scale <= 0.0 || !scale.is_finite() {
        return None;
    }
    for col in 0..n {
        let piv = (col..n).max_by(|&a, &b| cabs2(m[a][col]).total_cmp(&cabs2(m[b][col])))?;
        if cabs2(m[piv][col]).sqrt() < PIVOT_FLOOR * scale {
            return None;
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        let p = m[col][col];
        let inv = (p.0 / cabs2(p), -p.1 / cabs2(p));
        for row in col + 1..n {
            let factor = cmul(m[row][col], inv);
            for k in col..n {
                let d = cmul(factor, m[col][k]);
                m[row][k] = (m[row][k].0 - d.0, m[row][k].1 - d.1);
            }
            let d = cmul(factor, rhs[col]);
            rhs[row] = (rhs[row].0 - d.0, rhs[row].1 - d.1);
        }
    }
    let mut x = vec![(0.0, 0.0); n];
    for row in (0..n).rev() {
        let mut acc = rhs[row];
        for k in row + 1..n {
            let d = cmul(m[row][k], x[k]);
            acc = (acc.0 - d.0, acc.1 - d.1);
        }
        let p = m[row][row];
        x[row] = cmul(acc, (p.0 / cabs2(p), -p.1 / cabs2(p)));
    }
    Some(x)
}

/// Shapes a flat `(re, im)` list into a `T x 1 x 1` history.
pub fn series_history(values: &[(f64, f64)]) -> ComplexTensor {
    let t = values.len();
    ComplexTensor::new(
        Tensor::from_fn(&[t, 1, 1], |i| values[i].0),
        Tensor::from_fn(&[t, 1, 1], |i| values[i].1),
    )
    .expect("matching shapes")
}
