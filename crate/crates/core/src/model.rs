//! Incremental regressors trained on proxy entities.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    RlsLinear {
        #[serde(default = "default_lambda")]
        lambda: f64,
    },
    SgdMlp {
        #[serde(default = "default_hidden")]
        hidden: usize,
        #[serde(default = "default_learning_rate")]
        learning_rate: f64,
        #[serde(default = "default_epochs")]
        epochs: usize,
    },
}

fn default_lambda() -> f64 {
    1e-3
}
fn default_hidden() -> usize {
    16
}
fn default_learning_rate() -> f64 {
    0.01
}
fn default_epochs() -> usize {
    5
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec::RlsLinear { lambda: default_lambda() }
    }
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ModelSpec::RlsLinear { lambda } if !(lambda > 0.0 && lambda.is_finite()) => {
                Err(Error::InvalidArgument(format!("lambda must be positive, got {lambda}")))
            }
            ModelSpec::SgdMlp { hidden: 0, .. } => Err(Error::InvalidArgument("hidden width must be at least 1".into())),
            ModelSpec::SgdMlp { learning_rate, .. } if !(learning_rate > 0.0 && learning_rate.is_finite()) => {
                Err(Error::InvalidArgument(format!("learning_rate must be positive, got {learning_rate}")))
            }
            ModelSpec::SgdMlp { epochs: 0, .. } => Err(Error::InvalidArgument("epochs must be at least 1".into())),
            _ => Ok(()),
        }
    }
}

/// Contract the pipeline relies on.
pub trait IncrementalModel: Send + Sync {
    fn input_width(&self) -> usize;
    /// Number of batches absorbed so far.
    fn updates(&self) -> u64;
    fn update(&mut self, xs: &[Vec<f64>], ys: &[f64]) -> Result<()>;
    fn predict(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>>;
}

pub fn init_model(spec: &ModelSpec, input_width: usize, seed: u64) -> Result<Box<dyn IncrementalModel>> {
    spec.validate()?;
    if input_width == 0 {
        return Err(Error::InvalidArgument("input width must be positive".into()));
    }
    Ok(match *spec {
        ModelSpec::RlsLinear { lambda } => Box::new(RlsLinear::new(input_width, lambda)?),
        ModelSpec::SgdMlp { hidden, learning_rate, epochs } => Box::new(SgdMlp::new(input_width, hidden, learning_rate, epochs, seed)?),
    })
}

fn check_batch(width: usize, xs: &[Vec<f64>], ys: &[f64]) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::InvalidArgument("update with an empty batch".into()));
    }
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch { expected: xs.len(), got: ys.len() });
    }
    check_inputs(width, xs)
}

fn check_inputs(width: usize, xs: &[Vec<f64>]) -> Result<()> {
    match xs.iter().find(|x| x.len() != width) {
        Some(x) => Err(Error::DimensionMismatch { expected: width, got: x.len() }),
        None => Ok(()),
    }
}

/// Ridge regression kept in information form: `A = λI + Σ z zᵀ`,
/// `b = Σ z y` with `z = [x, 1]`. Absorbing a batch is exact and does not
/// depend on batch boundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct RlsLinear {
    width: usize,
    info: DMatrix<f64>,
    moment: DVector<f64>,
    weights: DVector<f64>,
    updates: u64,
}

impl RlsLinear {
    pub fn new(width: usize, lambda: f64) -> Result<Self> {
        ModelSpec::RlsLinear { lambda }.validate()?;
        let d = width + 1;
        Ok(Self {
            width,
            info: DMatrix::identity(d, d) * lambda,
            moment: DVector::zeros(d),
            weights: DVector::zeros(d),
            updates: 0,
        })
    }

    /// Input weights followed by the intercept.
    pub fn weights(&self) -> &[f64] {
        self.weights.as_slice()
    }

    fn solve(&mut self) -> Result<()> {
        self.weights = match self.info.clone().cholesky() {
            Some(chol) => chol.solve(&self.moment),
            None => {
                // positive definite in exact arithmetic; rounding can break
                // the factorization when inputs are collinear and large
                let svd = self.info.clone().svd(true, true);
                let eps = svd.singular_values.max() * 1e-13;
                svd.solve(&self.moment, eps).map_err(|e| Error::InvalidArgument(format!("least-squares solve failed: {e}")))?
            }
        };
        Ok(())
    }
}

impl IncrementalModel for RlsLinear {
    fn input_width(&self) -> usize {
        self.width
    }

    fn updates(&self) -> u64 {
        self.updates
    }

    fn update(&mut self, xs: &[Vec<f64>], ys: &[f64]) -> Result<()> {
        check_batch(self.width, xs, ys)?;
        let d = self.width + 1;
        let mut z = DVector::zeros(d);
        for (x, &y) in xs.iter().zip(ys) {
            z.as_mut_slice()[..self.width].copy_from_slice(x);
            z[self.width] = 1.0;
            self.info.ger(1.0, &z, &z, 1.0);
            self.moment.axpy(y, &z, 1.0);
        }
        self.solve()?;
        self.updates += 1;
        Ok(())
    }

    fn predict(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        if self.updates == 0 {
            return Err(Error::ColdStart);
        }
        check_inputs(self.width, xs)?;
        let w = self.weights.as_slice();
        Ok(xs.iter().map(|x| x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() + w[self.width]).collect())
    }
}

/// One tanh hidden layer trained by per-sample SGD on squared error.
/// Inputs and targets are standardized with statistics frozen from the
/// first batch.
#[derive(Debug, Clone, PartialEq)]
pub struct SgdMlp {
    width: usize,
    hidden: usize,
    learning_rate: f64,
    epochs: usize,
    seed: u64,
    /// `[W1 (hidden × width, row-major), b1, w2, b2]`
    params: Vec<f64>,
    x_mean: Vec<f64>,
    x_scale: Vec<f64>,
    y_mean: f64,
    y_scale: f64,
    updates: u64,
}

impl SgdMlp {
    pub fn new(width: usize, hidden: usize, learning_rate: f64, epochs: usize, seed: u64) -> Result<Self> {
        ModelSpec::SgdMlp { hidden, learning_rate, epochs }.validate()?;
        let mut rng = crate::seed::rng(seed, &[0x6d6c70]);
        let s1 = 1.0 / (width as f64).sqrt();
        let s2 = 1.0 / (hidden as f64).sqrt();
        let mut params = Vec::with_capacity(hidden * width + 2 * hidden + 1);
        params.extend((0..hidden * width).map(|_| rng.random_range(-s1..s1)));
        params.extend(std::iter::repeat_n(0.0, hidden));
        params.extend((0..hidden).map(|_| rng.random_range(-s2..s2)));
        params.push(0.0);
        Ok(Self {
            width,
            hidden,
            learning_rate,
            epochs,
            seed,
            params,
            x_mean: vec![0.0; width],
            x_scale: vec![1.0; width],
            y_mean: 0.0,
            y_scale: 1.0,
            updates: 0,
        })
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn set_params(&mut self, params: Vec<f64>) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::DimensionMismatch { expected: self.params.len(), got: params.len() });
        }
        self.params = params;
        Ok(())
    }

    fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.x_mean).zip(&self.x_scale).map(|((v, m), s)| (v - m) / s).collect()
    }

    /// Forward pass on a normalized input: hidden activations and output.
    fn forward(&self, x: &[f64]) -> (Vec<f64>, f64) {
        let (h, d) = (self.hidden, self.width);
        let (w1, rest) = self.params.split_at(h * d);
        let (b1, rest) = rest.split_at(h);
        let (w2, b2) = rest.split_at(h);
        let act: Vec<f64> = (0..h)
            .map(|i| (w1[i * d..(i + 1) * d].iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + b1[i]).tanh())
            .collect();
        let out = act.iter().zip(w2).map(|(a, b)| a * b).sum::<f64>() + b2[0];
        (act, out)
    }

    /// Loss `½ Σ (f(x) − y)² / n` over normalized samples and its gradient
    /// with respect to the parameter vector.
    pub fn loss_and_gradient(&self, xs: &[Vec<f64>], ys: &[f64]) -> (f64, Vec<f64>) {
        let (h, d) = (self.hidden, self.width);
        let n = xs.len() as f64;
        let mut grad = vec![0.0; self.params.len()];
        let mut loss = 0.0;
        let w2 = &self.params[h * d + h..h * d + 2 * h];
        for (x, &y) in xs.iter().zip(ys) {
            let (act, out) = self.forward(x);
            let err = out - y;
            loss += 0.5 * err * err / n;
            let g = err / n;
            for i in 0..h {
                let dz = g * w2[i] * (1.0 - act[i] * act[i]);
                for j in 0..d {
                    grad[i * d + j] += dz * x[j];
                }
                grad[h * d + i] += dz;
                grad[h * d + h + i] += g * act[i];
            }
            grad[h * d + 2 * h] += g;
        }
        (loss, grad)
    }

    fn freeze_normalizer(&mut self, xs: &[Vec<f64>], ys: &[f64]) {
        let n = xs.len() as f64;
        for j in 0..self.width {
            let mean = xs.iter().map(|x| x[j]).sum::<f64>() / n;
            let var = xs.iter().map(|x| (x[j] - mean).powi(2)).sum::<f64>() / n;
            self.x_mean[j] = mean;
            self.x_scale[j] = if var > 0.0 { var.sqrt() } else { 1.0 };
        }
        self.y_mean = ys.iter().sum::<f64>() / n;
        let var = ys.iter().map(|y| (y - self.y_mean).powi(2)).sum::<f64>() / n;
        self.y_scale = if var > 0.0 { var.sqrt() } else { 1.0 };
    }
}

impl IncrementalModel for SgdMlp {
    fn input_width(&self) -> usize {
        self.width
    }

    fn updates(&self) -> u64 {
        self.updates
    }

    fn update(&mut self, xs: &[Vec<f64>], ys: &[f64]) -> Result<()> {
        check_batch(self.width, xs, ys)?;
        if self.updates == 0 {
            self.freeze_normalizer(xs, ys);
        }
        let nx: Vec<Vec<f64>> = xs.iter().map(|x| self.normalize(x)).collect();
        let ny: Vec<f64> = ys.iter().map(|y| (y - self.y_mean) / self.y_scale).collect();
        let mut rng = crate::seed::rng(self.seed, &[0x736764, self.updates]);
        let mut order: Vec<usize> = (0..nx.len()).collect();
        for _ in 0..self.epochs {
            order.shuffle(&mut rng);
            for &i in &order {
                let (_, g) = self.loss_and_gradient(std::slice::from_ref(&nx[i]), &ny[i..=i]);
                for (p, gi) in self.params.iter_mut().zip(&g) {
                    *p -= self.learning_rate * gi;
                }
            }
        }
        self.updates += 1;
        Ok(())
    }

    fn predict(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        if self.updates == 0 {
            return Err(Error::ColdStart);
        }
        check_inputs(self.width, xs)?;
        Ok(xs.iter().map(|x| self.forward(&self.normalize(x)).1 * self.y_scale + self.y_mean).collect())
    }
}
