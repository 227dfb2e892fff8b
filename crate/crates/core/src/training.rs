//! Random Fourier targets, datasets, Adam on the full-batch MSE loss and R².

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::circuit::{forward_unchecked, ArchitectureSpec};
use crate::error::{Error, Result};
use crate::fourier::{diag_grid, TrigInterpolator};
use crate::gradients::{data_jacobian, shift_grad_unchecked};
use crate::linalg::RealMatrix;

/// `f*(x) = a_0 + Σ_{k=1}^{d} a_k cos(kx) + b_k sin(kx)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetFunction {
    pub a0: f64,
    /// `a_1..a_d`.
    pub a: Vec<f64>,
    /// `b_1..b_d`.
    pub b: Vec<f64>,
}

impl TargetFunction {
    pub fn new(a0: f64, a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if a.len() != b.len() || a.is_empty() {
            return Err(Error::InvalidInput(format!(
                "target needs equal, nonempty cosine/sine lists (got {} and {})",
                a.len(),
                b.len()
            )));
        }
        Ok(Self { a0, a, b })
    }

    pub fn degree(&self) -> usize {
        self.a.len()
    }

    /// Variance over a period, `Σ_k (a_k² + b_k²)/2`.
    pub fn variance(&self) -> f64 {
        self.a.iter().zip(&self.b).map(|(a, b)| a * a + b * b).sum::<f64>() / 2.0
    }

    /// Every coefficient (including `a_0`) divided by the standard deviation.
    pub fn normalized(&self) -> Result<Self> {
        let var = self.variance();
        if var <= 0.0 {
            return Err(Error::InvalidInput("target has zero variance".into()));
        }
        let s = 1.0 / var.sqrt();
        Ok(Self {
            a0: self.a0 * s,
            a: self.a.iter().map(|v| v * s).collect(),
            b: self.b.iter().map(|v| v * s).collect(),
        })
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.a0
            + self
                .a
                .iter()
                .zip(&self.b)
                .enumerate()
                .map(|(i, (a, b))| {
                    let (s, c) = ((i + 1) as f64 * x).sin_cos();
                    a * c + b * s
                })
                .sum::<f64>()
    }
}

/// Draws `a_0, (a_1, b_1), …` from N(0,1) and rescales to unit variance.
pub fn sample_target<R: Rng + ?Sized>(degree: usize, rng: &mut R) -> Result<TargetFunction> {
    if degree == 0 {
        return Err(Error::InvalidInput("target degree must be >= 1".into()));
    }
    loop {
        let a0: f64 = rng.sample(StandardNormal);
        let mut a = Vec::with_capacity(degree);
        let mut b = Vec::with_capacity(degree);
        for _ in 0..degree {
            a.push(rng.sample(StandardNormal));
            b.push(rng.sample(StandardNormal));
        }
        let t = TargetFunction { a0, a, b };
        if t.variance() > 0.0 {
            return t.normalized();
        }
    }
}

pub fn eval_target(t: &TargetFunction, x: f64) -> f64 {
    t.eval(x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub train_x: Vec<f64>,
    pub train_y: Vec<f64>,
    pub test_x: Vec<f64>,
    pub test_y: Vec<f64>,
}

impl Dataset {
    pub fn new(train_x: Vec<f64>, train_y: Vec<f64>, test_x: Vec<f64>, test_y: Vec<f64>) -> Result<Self> {
        if train_x.len() != train_y.len() || test_x.len() != test_y.len() {
            return Err(Error::InvalidInput("dataset x/y lengths differ".into()));
        }
        if train_x.is_empty() {
            return Err(Error::InvalidInput("dataset needs training points".into()));
        }
        Ok(Self {
            train_x,
            train_y,
            test_x,
            test_y,
        })
    }
}

/// Uniform inputs on `[0, 2π)` labelled by `t`. Train and test points come
/// from separate ChaCha streams of the same seed.
pub fn sample_dataset(t: &TargetFunction, n_train: usize, n_test: usize, seed: u64) -> Result<Dataset> {
    if n_train == 0 || n_test == 0 {
        return Err(Error::InvalidInput("dataset sizes must be >= 1".into()));
    }
    let draw = |stream: u64, n: usize| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        (0..n).map(|_| rng.random_range(0.0..2.0 * PI)).collect::<Vec<f64>>()
    };
    let train_x = draw(1, n_train);
    let test_x = draw(2, n_test);
    let train_y = train_x.iter().map(|&x| t.eval(x)).collect();
    let test_y = test_x.iter().map(|&x| t.eval(x)).collect();
    Dataset::new(train_x, train_y, test_x, test_y)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub steps: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            steps: 5000,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || self.steps == 0 {
            return Err(Error::InvalidInput(format!(
                "learning rate must be > 0 and steps >= 1 (got {} / {})",
                self.learning_rate, self.steps
            )));
        }
        Ok(())
    }
}

/// First/second moment estimates and step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u32,
}

impl AdamState {
    pub fn new(p: usize) -> Self {
        Self {
            m: vec![0.0; p],
            v: vec![0.0; p],
            t: 0,
        }
    }
}

/// One bias-corrected Adam update of `theta` in place.
pub fn adam_step(state: &mut AdamState, grad: &[f64], theta: &mut [f64], config: &TrainConfig) {
    assert_eq!(grad.len(), theta.len(), "gradient/parameter length mismatch");
    assert_eq!(state.m.len(), theta.len(), "optimizer state length mismatch");
    state.t += 1;
    let bc1 = 1.0 - config.beta1.powi(state.t as i32);
    let bc2 = 1.0 - config.beta2.powi(state.t as i32);
    for ((th, g), (m, v)) in theta
        .iter_mut()
        .zip(grad)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        *m = config.beta1 * *m + (1.0 - config.beta1) * g;
        *v = config.beta2 * *v + (1.0 - config.beta2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *th -= config.learning_rate * m_hat / (v_hat.sqrt() + config.epsilon);
    }
}

/// Full-batch MSE and its gradient for one architecture and point set.
///
/// Circuit outputs and parameter-shift gradients are evaluated on the
/// diagnostic grid and interpolated to the data points; both are
/// trigonometric polynomials of degree `E`, so this is exact and costs
/// `n_diag` rather than `n` circuit sweeps per step.
pub struct MseObjective<'a> {
    spec: ArchitectureSpec,
    grid: Vec<f64>,
    interp: TrigInterpolator,
    ys: &'a [f64],
}

impl<'a> MseObjective<'a> {
    pub fn new(spec: &ArchitectureSpec, xs: &[f64], ys: &'a [f64]) -> Result<Self> {
        if xs.len() != ys.len() || xs.is_empty() {
            return Err(Error::InvalidInput("MSE needs equal, nonempty x/y".into()));
        }
        Ok(Self {
            spec: *spec,
            grid: diag_grid(spec),
            interp: TrigInterpolator::for_spec(spec, xs)?,
            ys,
        })
    }

    fn check(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.spec.parameter_count() {
            return Err(Error::LengthMismatch {
                expected: self.spec.parameter_count(),
                actual: theta.len(),
            });
        }
        Ok(())
    }

    pub fn predictions(&self, theta: &[f64]) -> Result<Vec<f64>> {
        self.check(theta)?;
        let values: Vec<f64> = self
            .grid
            .par_iter()
            .map(|&x| forward_unchecked(&self.spec, theta, x))
            .collect();
        Ok(self.interp.interpolate(&values))
    }

    /// `n × P` data Jacobian at the objective's points.
    pub fn data_jacobian(&self, theta: &[f64]) -> Result<RealMatrix> {
        self.check(theta)?;
        let rows: Vec<Vec<f64>> = self
            .grid
            .par_iter()
            .map(|&x| shift_grad_unchecked(&self.spec, theta, x))
            .collect();
        Ok(self.interp.interpolate_columns(&RealMatrix::from_rows(&rows)?))
    }

    pub fn loss(&self, theta: &[f64]) -> Result<f64> {
        let preds = self.predictions(theta)?;
        Ok(mse(&preds, self.ys))
    }

    /// `(L, ∇L)` with `∇L = (2/n)·J_dataᵀ(pred − y)`.
    pub fn loss_and_grad(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        let preds = self.predictions(theta)?;
        let jac = self.data_jacobian(theta)?;
        Ok(loss_and_grad_from(&preds, self.ys, &jac))
    }
}

fn mse(preds: &[f64], ys: &[f64]) -> f64 {
    preds.iter().zip(ys).map(|(p, y)| (p - y).powi(2)).sum::<f64>() / ys.len() as f64
}

fn loss_and_grad_from(preds: &[f64], ys: &[f64], jac: &RealMatrix) -> (f64, Vec<f64>) {
    let n = ys.len() as f64;
    let mut grad = vec![0.0; jac.cols()];
    for (i, (p, y)) in preds.iter().zip(ys).enumerate() {
        let r = 2.0 * (p - y) / n;
        for (g, d) in grad.iter_mut().zip(jac.row(i)) {
            *g += r * d;
        }
    }
    (mse(preds, ys), grad)
}

/// MSE gradient via the direct per-point [`data_jacobian`]; the reference
/// path for [`MseObjective`].
pub fn mse_loss_and_grad_direct(
    spec: &ArchitectureSpec,
    theta: &[f64],
    xs: &[f64],
    ys: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let jac = data_jacobian(spec, theta, xs)?;
    let preds: Vec<f64> = xs.iter().map(|&x| forward_unchecked(spec, theta, x)).collect();
    Ok(loss_and_grad_from(&preds, ys, &jac))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainResult {
    pub final_theta: Vec<f64>,
    /// Loss before each update; entry 0 is the initial loss.
    pub loss_curve: Vec<f64>,
    pub final_loss: f64,
    pub r2_train: f64,
    pub r2_test: f64,
    pub steps: usize,
}

/// Parameters drawn uniformly from `[0, 2π)`.
pub fn init_parameters(spec: &ArchitectureSpec, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..spec.parameter_count())
        .map(|_| rng.random_range(0.0..2.0 * PI))
        .collect()
}

/// Trains from a uniform random initialization derived from `seed`.
pub fn train(spec: &ArchitectureSpec, data: &Dataset, config: &TrainConfig, seed: u64) -> Result<TrainResult> {
    train_from(spec, data, config, init_parameters(spec, seed))
}

/// Full-batch Adam from a given starting point.
pub fn train_from(
    spec: &ArchitectureSpec,
    data: &Dataset,
    config: &TrainConfig,
    mut theta: Vec<f64>,
) -> Result<TrainResult> {
    config.validate()?;
    let objective = MseObjective::new(spec, &data.train_x, &data.train_y)?;
    let mut adam = AdamState::new(theta.len());
    let mut loss_curve = Vec::with_capacity(config.steps);
    for step in 0..config.steps {
        let (loss, grad) = objective.loss_and_grad(&theta)?;
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!("loss {loss} at step {step} for {spec}")));
        }
        loss_curve.push(loss);
        adam_step(&mut adam, &grad, &mut theta, config);
    }
    let train_pred = objective.predictions(&theta)?;
    let final_loss = mse(&train_pred, &data.train_y);
    if !final_loss.is_finite() {
        return Err(Error::NonFinite(format!("final loss {final_loss} for {spec}")));
    }
    let r2_train = r_squared(&train_pred, &data.train_y)?;
    let r2_test = if data.test_x.is_empty() {
        f64::NAN
    } else {
        let test_pred: Vec<f64> = data
            .test_x
            .par_iter()
            .map(|&x| forward_unchecked(spec, &theta, x))
            .collect();
        r_squared(&test_pred, &data.test_y)?
    };
    Ok(TrainResult {
        final_theta: theta,
        loss_curve,
        final_loss,
        r2_train,
        r2_test,
        steps: config.steps,
    })
}

/// Coefficient of determination `1 − SS_res/SS_tot`.
pub fn r_squared(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch {
            expected: truth.len(),
            actual: pred.len(),
        });
    }
    if truth.len() < 2 {
        return Err(Error::UndefinedMetric("R² needs at least two points".into()));
    }
    let mean = truth.iter().sum::<f64>() / truth.len() as f64;
    let ss_tot: f64 = truth.iter().map(|t| (t - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return Err(Error::UndefinedMetric("R² of a constant target".into()));
    }
    let ss_res: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t).powi(2)).sum();
    Ok(1.0 - ss_res / ss_tot)
}

/// `⌈degree / N⌉`.
pub fn l_min(degree: usize, n_qubits: usize) -> usize {
    degree.div_ceil(n_qubits)
}
