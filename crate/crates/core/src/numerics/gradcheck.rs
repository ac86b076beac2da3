//! Central finite-difference checks for tape gradients.

use rand::Rng;

use super::tape::{ParamId, Tape, Var};
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct GradCheckOptions {
    pub eps: f64,
    pub rel_tol: f64,
    /// Magnitudes below this count as this in the relative-error denominator.
    pub abs_floor: f64,
    /// Coordinates probed per input; smaller tensors are checked exhaustively.
    pub max_coords: usize,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            eps: 1e-4,
            rel_tol: 1e-3,
            abs_floor: 1e-5,
            max_coords: 24,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradMismatch {
    pub input: usize,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

#[derive(Debug, Clone, Default)]
pub struct GradCheckReport {
    pub checked: usize,
    pub worst_rel: f64,
    pub failures: Vec<GradMismatch>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

fn evaluate<F>(inputs: &[Tensor], f: &F) -> Result<(Tape, Var)>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs
        .iter()
        .enumerate()
        .map(|(i, t)| tape.param(ParamId(i), t.clone()))
        .collect();
    let loss = f(&mut tape, &vars)?;
    Ok((tape, loss))
}

fn scalar(tape: &Tape, loss: Var) -> Result<f64> {
    let v = tape.value(loss);
    if !v.is_scalar() {
        return Err(Error::Gradient(format!("loss has shape {:?}", v.shape())));
    }
    Ok(v.data()[0])
}

/// Compares the reverse-mode gradient of the scalar built by `f` against
/// central differences. Input `i` is recorded as `ParamId(i)`.
pub fn check_gradients<F, R>(
    inputs: &[Tensor],
    f: F,
    opts: GradCheckOptions,
    rng: &mut R,
) -> Result<GradCheckReport>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
    R: Rng + ?Sized,
{
    let (tape, loss) = evaluate(inputs, &f)?;
    let grads = tape.backward(loss)?;
    let mut report = GradCheckReport::default();
    let mut probe = inputs.to_vec();

    for (i, input) in inputs.iter().enumerate() {
        let analytic = grads
            .get(ParamId(i))
            .ok_or_else(|| Error::Gradient(format!("input {i} was not recorded")))?;
        let coords: Vec<usize> = if input.len() <= opts.max_coords {
            (0..input.len()).collect()
        } else {
            (0..opts.max_coords).map(|_| rng.gen_range(0..input.len())).collect()
        };
        for idx in coords {
            let x = input.data()[idx];
            probe[i].data_mut()[idx] = x + opts.eps;
            let (t, l) = evaluate(&probe, &f)?;
            let plus = scalar(&t, l)?;
            probe[i].data_mut()[idx] = x - opts.eps;
            let (t, l) = evaluate(&probe, &f)?;
            let minus = scalar(&t, l)?;
            probe[i].data_mut()[idx] = x;

            let numeric = (plus - minus) / (2.0 * opts.eps);
            let a = analytic.data()[idx];
            let denom = a.abs().max(numeric.abs()).max(opts.abs_floor);
            let rel = (a - numeric).abs() / denom;
            report.checked += 1;
            report.worst_rel = report.worst_rel.max(rel);
            if rel > opts.rel_tol || !rel.is_finite() {
                report.failures.push(GradMismatch {
                    input: i,
                    index: idx,
                    analytic: a,
                    numeric,
                });
            }
        }
    }
    Ok(report)
}
