//! Single-hidden-layer feedforward network trained by a least-squares
//! output-weight solve.
//!
//! Hidden parameters (input weights and biases) are set externally, either at
//! random or by an optimizer; only the linear output layer is fitted here.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Sigmoid,
    Tanh,
    Linear,
}

impl Activation {
    pub fn apply(self, z: f64) -> f64 {
        match self {
            // Clamp keeps exp() from overflowing for extreme pre-activations.
            Activation::Sigmoid => {
                let z = z.clamp(-500.0, 500.0);
                1.0 / (1.0 + (-z).exp())
            }
            Activation::Tanh => z.tanh(),
            Activation::Linear => z,
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sigmoid" => Ok(Activation::Sigmoid),
            "tanh" => Ok(Activation::Tanh),
            "linear" => Ok(Activation::Linear),
            other => Err(Error::InvalidConfig(format!(
                "unknown activation '{other}' (expected sigmoid, tanh or linear)"
            ))),
        }
    }
}

/// SLFN parameters: `M` hidden nodes over `N` inputs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ElmModel {
    /// M x N, one row per hidden node.
    pub input_weights: DMatrix<f64>,
    /// Length M.
    pub hidden_biases: DVector<f64>,
    /// Length M; zeros until solved.
    pub output_weights: DVector<f64>,
    pub activation: Activation,
    pub regularization_penalty: f64,
}

impl ElmModel {
    pub fn new(
        input_weights: DMatrix<f64>,
        hidden_biases: DVector<f64>,
        activation: Activation,
        regularization_penalty: f64,
    ) -> Result<Self> {
        let m = input_weights.nrows();
        if hidden_biases.len() != m {
            return Err(Error::dim("hidden biases vs weight rows", hidden_biases.len(), m));
        }
        if regularization_penalty < 0.0 || !regularization_penalty.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "regularization penalty must be finite and >= 0, got {regularization_penalty}"
            )));
        }
        Ok(ElmModel {
            input_weights,
            hidden_biases,
            output_weights: DVector::zeros(m),
            activation,
            regularization_penalty,
        })
    }

    pub fn hidden_nodes(&self) -> usize {
        self.input_weights.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.input_weights.ncols()
    }
}

/// P x M matrix of hidden-node activations, one row per sample.
#[derive(Debug, Clone)]
pub struct HiddenMatrix(DMatrix<f64>);

impl HiddenMatrix {
    pub fn from_matrix(values: DMatrix<f64>) -> Self {
        HiddenMatrix(values)
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn samples(&self) -> usize {
        self.0.nrows()
    }
}

/// Supervised samples: P x N inputs with P scalar targets.
#[derive(Debug, Clone)]
pub struct RegressionData {
    pub inputs: DMatrix<f64>,
    pub targets: DVector<f64>,
}

impl RegressionData {
    pub fn new(inputs: DMatrix<f64>, targets: DVector<f64>) -> Result<Self> {
        if inputs.nrows() != targets.len() {
            return Err(Error::dim("input rows vs targets", inputs.nrows(), targets.len()));
        }
        if inputs.nrows() == 0 || inputs.ncols() == 0 {
            return Err(Error::InvalidConfig(
                "regression data needs at least one sample and one feature".into(),
            ));
        }
        Ok(RegressionData { inputs, targets })
    }

    pub fn samples(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn features(&self) -> usize {
        self.inputs.ncols()
    }

    /// Row subset in the given index order.
    pub fn select(&self, indices: &[usize]) -> RegressionData {
        let inputs = self.inputs.select_rows(indices.iter());
        let targets = DVector::from_iterator(indices.len(), indices.iter().map(|&i| self.targets[i]));
        RegressionData { inputs, targets }
    }
}

/// Entry (p, k) = activation(w_k . x_p + b_k).
pub fn build_hidden_matrix(model: &ElmModel, inputs: &DMatrix<f64>) -> Result<HiddenMatrix> {
    if inputs.ncols() != model.input_dim() {
        return Err(Error::dim(
            "input columns vs model input dimension",
            inputs.ncols(),
            model.input_dim(),
        ));
    }
    let mut h = inputs * model.input_weights.transpose();
    for p in 0..h.nrows() {
        for k in 0..h.ncols() {
            h[(p, k)] = model.activation.apply(h[(p, k)] + model.hidden_biases[k]);
        }
    }
    Ok(HiddenMatrix(h))
}

/// Least-squares output weights for `H beta = T`.
///
/// With `penalty > 0` this is ridge regression; with `penalty = 0` and a
/// rank-deficient system the minimum-norm solution is returned. Normal
/// equations (Cholesky) are used when the sample count covers the hidden
/// nodes, with an SVD fallback on degeneracy.
pub fn solve_output_weights(
    hidden: &HiddenMatrix,
    targets: &DVector<f64>,
    penalty: f64,
) -> Result<DVector<f64>> {
    let h = &hidden.0;
    let (p, m) = (h.nrows(), h.ncols());
    if p != targets.len() {
        return Err(Error::dim("hidden rows vs targets", p, targets.len()));
    }
    if penalty < 0.0 || !penalty.is_finite() {
        return Err(Error::InvalidConfig(format!("penalty must be finite and >= 0, got {penalty}")));
    }
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("hidden matrix".into()));
    }
    if targets.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("targets".into()));
    }

    if p >= m {
        // Primal normal equations: (H^T H + penalty I)^-1 H^T T.
        let mut gram = h.transpose() * h;
        for k in 0..m {
            gram[(k, k)] += penalty;
        }
        let rhs = h.transpose() * targets;
        if let Some(chol) = gram.cholesky() {
            if factor_is_well_conditioned(&chol) {
                return Ok(chol.solve(&rhs));
            }
        }
    } else if penalty > 0.0 {
        // Dual route: H^T (H H^T + penalty I)^-1 T.
        let mut gram = h * h.transpose();
        for k in 0..p {
            gram[(k, k)] += penalty;
        }
        if let Some(chol) = gram.cholesky() {
            if factor_is_well_conditioned(&chol) {
                return Ok(h.transpose() * chol.solve(targets));
            }
        }
    }

    svd_solve(h, targets, penalty)
}

/// SVD route: minimum-norm solution at penalty 0, shrunk singular values
/// otherwise. Handles rank deficiency that the Cholesky path rejects.
/// nalgebra's Cholesky can "succeed" on a numerically singular Gram matrix
/// with a near-zero pivot, yielding a solution that is not minimum-norm.
/// Reject factors whose pivot spread indicates rank deficiency.
fn factor_is_well_conditioned(chol: &nalgebra::Cholesky<f64, nalgebra::Dyn>) -> bool {
    let l = chol.l_dirty();
    let n = l.nrows();
    let mut min_d = f64::INFINITY;
    let mut max_d = 0.0_f64;
    for k in 0..n {
        let d = l[(k, k)];
        min_d = min_d.min(d);
        max_d = max_d.max(d);
    }
    min_d > max_d * (n as f64) * f64::EPSILON.sqrt()
}

fn svd_solve(h: &DMatrix<f64>, targets: &DVector<f64>, penalty: f64) -> Result<DVector<f64>> {
    let (p, m) = (h.nrows(), h.ncols());
    let svd = h.clone().svd(true, true);
    let u = svd.u.as_ref().ok_or_else(|| Error::SolveFailed("SVD produced no U".into()))?;
    let v_t = svd.v_t.as_ref().ok_or_else(|| Error::SolveFailed("SVD produced no V^T".into()))?;
    let sigma = &svd.singular_values;
    let max_sv = sigma.iter().cloned().fold(0.0_f64, f64::max);
    let tol = max_sv * (p.max(m) as f64) * f64::EPSILON;

    let mut beta = DVector::zeros(m);
    for k in 0..sigma.len() {
        let s = sigma[k];
        if s <= tol {
            continue;
        }
        let coeff = if penalty > 0.0 { s / (s * s + penalty) } else { 1.0 / s };
        let proj = u.column(k).dot(targets) * coeff;
        beta += v_t.row(k).transpose() * proj;
    }
    Ok(beta)
}

/// Predictions `H(model, inputs) . outputWeights`.
pub fn predict(model: &ElmModel, inputs: &DMatrix<f64>) -> Result<DVector<f64>> {
    let hidden = build_hidden_matrix(model, inputs)?;
    Ok(hidden.0 * &model.output_weights)
}
