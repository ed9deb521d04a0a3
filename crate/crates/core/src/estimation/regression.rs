//! Geodesic regression `C_i ≈ exp_P(Σ_k x_ik V_k)`.
//!
//! The fit is parametrized as `Ĉ_i = G exp(Σ_k x_ik S_k) Gᵀ` with `G` invertible
//! and `S_k` symmetric, so `P = G Gᵀ` and `V_k = G S_k Gᵀ`. By affine
//! invariance `d(Ĉ_i, C_i) = d(exp(X_i), G⁻¹ C_i G⁻ᵀ)`, and exact gradients
//! follow from the Fréchet derivative of the matrix exponential. Steps are preconditioned by the inverse design Gram matrix and
//! accepted under an Armijo rule.

use nalgebra::{DMatrix, DVector};

use super::{frechet_mean, DispersionEstimate, FitDiagnostics};
use crate::error::{Error, Result};
use crate::geometry::{
    exp_map, spectral_apply, sym_eigen, sym_fn, symmetrize, tangent_dim,
    vec_identity_unchecked, whitened_log, SpdMatrix, TangentVector,
};
use crate::tolerances::{ARMIJO, MEAN_MAX_ITER, MEAN_TOL, MIN_EIGEN_RATIO};

/// Fitted base point and one tangent coefficient per predictor.
#[derive(Clone, Debug)]
pub struct RegressionModel {
    base: SpdMatrix,
    coefficients: Vec<TangentVector>,
}

impl RegressionModel {
    pub fn base(&self) -> &SpdMatrix {
        &self.base
    }

    pub fn coefficients(&self) -> &[TangentVector] {
        &self.coefficients
    }

    pub fn predictor_dim(&self) -> usize {
        self.coefficients.len()
    }

    /// `exp_P(Σ_k x_k V_k)`.
    pub fn predict(&self, x: &[f64]) -> Result<SpdMatrix> {
        if x.len() != self.predictor_dim() {
            return Err(Error::usage(format!(
                "expected {} predictors, got {}",
                self.predictor_dim(),
                x.len()
            )));
        }
        let p = self.base.dim();
        let mut v = DMatrix::zeros(p, p);
        for (xk, vk) in x.iter().zip(&self.coefficients) {
            v += vk.matrix() * *xk;
        }
        exp_map(&self.base, &TangentVector::from_parts(self.base.clone(), v))
    }

    /// Fitted values for each predictor row.
    pub fn fitted(&self, xs: &[Vec<f64>]) -> Result<Vec<SpdMatrix>> {
        xs.iter().map(|x| self.predict(x)).collect()
    }
}

struct State {
    g: DMatrix<f64>,
    slopes: Vec<DMatrix<f64>>,
}

struct Evaluation {
    objective: f64,
    grad_base: DMatrix<f64>,
    grad_slopes: Vec<DMatrix<f64>>,
}

impl Evaluation {
    fn norm(&self) -> f64 {
        let mut s = self.grad_base.norm_squared();
        for g in &self.grad_slopes {
            s += g.norm_squared();
        }
        s.sqrt()
    }
}

/// Fréchet derivative of `exp` at symmetric `X = Q diag(λ) Qᵀ` applied to `H`.
fn dexp(q: &DMatrix<f64>, lambda: &DVector<f64>, h: &DMatrix<f64>) -> DMatrix<f64> {
    let p = lambda.len();
    let mut m = q.transpose() * h * q;
    for i in 0..p {
        for j in 0..p {
            let (a, b) = (lambda[i], lambda[j]);
            let diff = a - b;
            let f = if diff == 0.0 {
                b.exp()
            } else {
                b.exp() * diff.exp_m1() / diff
            };
            m[(i, j)] *= f;
        }
    }
    q * m * q.transpose()
}

fn linear_predictor(slopes: &[DMatrix<f64>], x: &[f64], p: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(p, p);
    for (s, xk) in slopes.iter().zip(x) {
        out += s * *xk;
    }
    out
}

/// `G⁻¹ C G⁻ᵀ` for each observation.
fn pulled_back(g: &DMatrix<f64>, cs: &[SpdMatrix]) -> Option<Vec<DMatrix<f64>>> {
    let g_inv = g.clone().try_inverse()?;
    Some(cs.iter().map(|c| symmetrize(&(&g_inv * c.matrix() * g_inv.transpose()))).collect())
}

fn objective(state: &State, xs: &[Vec<f64>], cs: &[SpdMatrix]) -> Option<f64> {
    let p = state.g.nrows();
    let ds = pulled_back(&state.g, cs)?;
    let mut total = 0.0;
    for (x, d) in xs.iter().zip(&ds) {
        let (lambda, q) = sym_eigen(&linear_predictor(&state.slopes, x, p));
        let y_isqrt = spectral_apply(&lambda, &q, |l| (-0.5 * l).exp());
        let inner = symmetrize(&(&y_isqrt * d * &y_isqrt));
        let (mu, _) = sym_eigen(&inner);
        if mu.iter().any(|m| !(*m > 0.0)) {
            return None;
        }
        total += mu.iter().map(|m| m.ln().powi(2)).sum::<f64>();
    }
    Some(total / cs.len() as f64)
}

fn evaluate(state: &State, xs: &[Vec<f64>], cs: &[SpdMatrix]) -> Result<Evaluation> {
    let p = state.g.nrows();
    let n = cs.len() as f64;
    let ds = pulled_back(&state.g, cs).ok_or_else(|| Error::numeric("regression base became singular"))?;
    let mut objective = 0.0;
    let mut grad_base = DMatrix::zeros(p, p);
    let mut grad_slopes = vec![DMatrix::zeros(p, p); state.slopes.len()];
    for (x, d) in xs.iter().zip(&ds) {
        let (lambda, q) = sym_eigen(&linear_predictor(&state.slopes, x, p));
        let y_sqrt = spectral_apply(&lambda, &q, |l| (0.5 * l).exp());
        let y_isqrt = spectral_apply(&lambda, &q, |l| (-0.5 * l).exp());
        let inner = symmetrize(&(&y_isqrt * d * &y_isqrt));
        let (mu, w) = sym_eigen(&inner);
        if mu.iter().any(|m| !(*m > 0.0)) {
            return Err(Error::numeric("regression residual left the manifold"));
        }
        objective += mu.iter().map(|m| m.ln().powi(2)).sum::<f64>();
        let l = spectral_apply(&mu, &w, f64::ln);
        let base_term = &y_sqrt * &l * &y_isqrt;
        grad_base -= &base_term + base_term.transpose();
        if !state.slopes.is_empty() {
            let gx = dexp(&q, &lambda, &(&y_isqrt * &l * &y_isqrt)) * -2.0;
            let gx = symmetrize(&gx);
            for (gk, xk) in grad_slopes.iter_mut().zip(x) {
                *gk += &gx * *xk;
            }
        }
    }
    grad_base /= n;
    for gk in &mut grad_slopes {
        *gk /= n;
    }
    Ok(Evaluation {
        objective: objective / n,
        grad_base: symmetrize(&grad_base),
        grad_slopes,
    })
}

fn validate(xs: &[Vec<f64>], cs: &[SpdMatrix]) -> Result<(usize, usize)> {
    let n = cs.len();
    if xs.len() != n {
        return Err(Error::usage(format!("{} predictor rows for {n} responses", xs.len())));
    }
    let first = cs.first().ok_or_else(|| Error::usage("regression on an empty sample"))?;
    let p = first.dim();
    if cs.iter().any(|c| c.dim() != p) {
        return Err(Error::usage("responses of different dimensions"));
    }
    let k = xs[0].len();
    if xs.iter().any(|x| x.len() != k) {
        return Err(Error::usage("predictor rows of different lengths"));
    }
    if xs.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::usage("non-finite predictor value"));
    }
    if n < k + 1 {
        return Err(Error::usage(format!("{n} observations cannot identify {k} slopes and a base point")));
    }
    Ok((p, k))
}

/// `(1/n) Φᵀ Φ` for the design with an intercept column.
fn design_gram(xs: &[Vec<f64>], k: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(k + 1, k + 1);
    for x in xs {
        let row = DVector::from_iterator(k + 1, std::iter::once(1.0).chain(x.iter().copied()));
        m.ger(1.0, &row, &row, 1.0);
    }
    m / xs.len() as f64
}

/// Least-squares geodesic regression of `cs` on `xs`.
///
/// Predictors are used as given, so the base point is the fitted value at
/// `x = 0`. Starts from ordinary least squares in the tangent space at the
/// Fréchet mean, then descends until the gradient norm is at most `tol`.
/// A rank-deficient design (intercept included) is a usage error.
pub fn geodesic_regression(
    xs: &[Vec<f64>],
    cs: &[SpdMatrix],
    tol: f64,
    max_iter: usize,
) -> Result<(RegressionModel, FitDiagnostics)> {
    let (p, k) = validate(xs, cs)?;
    if !(tol > 0.0) {
        return Err(Error::usage(format!("tolerance must be positive, got {tol}")));
    }
    let gram = design_gram(xs, k);
    let (gram_vals, _) = sym_eigen(&gram);
    if !(gram_vals.min() > MIN_EIGEN_RATIO * gram_vals.max()) {
        return Err(Error::usage("rank-deficient design matrix"));
    }
    let gram_inv = gram
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::usage("rank-deficient design matrix"))?;

    let (mean, _) = frechet_mean(cs, MEAN_TOL, MEAN_MAX_ITER)?;
    let logs: Vec<DMatrix<f64>> = cs.iter().map(|c| whitened_log(&mean, c)).collect();
    // tangent least squares: coefficient a of design column a is Σ_b (M⁻¹)_ab mean(Φ_b U)
    let mut moments = vec![DMatrix::zeros(p, p); k + 1];
    for (x, u) in xs.iter().zip(&logs) {
        moments[0] += u;
        for (j, xj) in x.iter().enumerate() {
            moments[j + 1] += u * *xj;
        }
    }
    let nf = cs.len() as f64;
    let ols: Vec<DMatrix<f64>> = (0..=k)
        .map(|a| {
            let mut acc = DMatrix::zeros(p, p);
            for (b, m) in moments.iter().enumerate() {
                acc += m * (gram_inv[(a, b)] / nf);
            }
            symmetrize(&acc)
        })
        .collect();
    let mut state = State {
        g: mean.sqrt_matrix() * sym_fn(&ols[0], |v| (0.5 * v).exp()),
        slopes: ols[1..].to_vec(),
    };

    let mut diag = FitDiagnostics {
        iterations: 0,
        final_gradient_norm: f64::INFINITY,
        converged: false,
    };
    loop {
        let eval = evaluate(&state, xs, cs)?;
        diag.final_gradient_norm = eval.norm();
        if diag.final_gradient_norm <= tol {
            diag.converged = true;
            break;
        }
        if diag.iterations >= max_iter {
            break;
        }
        let grads: Vec<&DMatrix<f64>> = std::iter::once(&eval.grad_base).chain(&eval.grad_slopes).collect();
        let dirs: Vec<DMatrix<f64>> = (0..=k)
            .map(|a| {
                let mut acc = DMatrix::zeros(p, p);
                for (b, g) in grads.iter().enumerate() {
                    acc -= *g * (0.5 * gram_inv[(a, b)]);
                }
                acc
            })
            .collect();
        let slope: f64 = grads.iter().zip(&dirs).map(|(g, d)| g.dot(d)).sum();
        if !(slope < 0.0) {
            break;
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial = State {
                g: &state.g * sym_fn(&(&dirs[0] * t), |v| (0.5 * v).exp()),
                slopes: state.slopes.iter().zip(&dirs[1..]).map(|(s, d)| s + d * t).collect(),
            };
            if let Some(f) = objective(&trial, xs, cs) {
                if f <= eval.objective + ARMIJO * t * slope {
                    accepted = Some(trial);
                    break;
                }
            }
            t *= 0.5;
        }
        match accepted {
            Some(next) => state = next,
            None => break,
        }
        diag.iterations += 1;
    }

    let base = SpdMatrix::from_computed(&state.g * state.g.transpose())?;
    let coefficients = state
        .slopes
        .iter()
        .map(|s| TangentVector::from_parts(base.clone(), &state.g * s * state.g.transpose()))
        .collect();
    Ok((RegressionModel { base, coefficients }, diag))
}

/// `(1/(n−1)) Σ Vec_{Ĉ_i}(log_{Ĉ_i}(C_i)) Vec_{Ĉ_i}(log_{Ĉ_i}(C_i))ᵀ` with
/// `Ĉ_i` the fitted values.
pub fn regression_dispersion(
    model: &RegressionModel,
    xs: &[Vec<f64>],
    cs: &[SpdMatrix],
) -> Result<DispersionEstimate> {
    let (p, k) = validate(xs, cs)?;
    if p != model.base.dim() || k != model.predictor_dim() {
        return Err(Error::usage("data do not match the fitted model"));
    }
    let coords: Vec<DVector<f64>> = xs
        .iter()
        .zip(cs)
        .map(|(x, c)| Ok(vec_identity_unchecked(&whitened_log(&model.predict(x)?, c))))
        .collect::<Result<_>>()?;
    DispersionEstimate::from_coords(&coords, tangent_dim(p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{max_abs, squared_distance_unchecked, vec_at};
    use crate::normal::{Dispersion, RiemannianNormal};

    fn objective_of(model: &RegressionModel, xs: &[Vec<f64>], cs: &[SpdMatrix]) -> f64 {
        xs.iter()
            .zip(cs)
            .map(|(x, c)| squared_distance_unchecked(&model.predict(x).unwrap(), c))
            .sum::<f64>()
            / cs.len() as f64
    }

    #[test]
    fn dexp_matches_finite_difference() {
        let x = DMatrix::from_row_slice(3, 3, &[0.5, 0.2, -0.1, 0.2, -0.3, 0.4, -0.1, 0.4, 1.0]);
        let h = DMatrix::from_row_slice(3, 3, &[0.1, -0.3, 0.2, -0.3, 0.7, 0.05, 0.2, 0.05, -0.4]);
        let (lambda, q) = sym_eigen(&x);
        let exact = dexp(&q, &lambda, &h);
        let t = 1e-5;
        let fd = (sym_fn(&(&x + &h * t), f64::exp) - sym_fn(&(&x - &h * t), f64::exp)) / (2.0 * t);
        assert!(max_abs(&(exact - fd)) < 1e-8);
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let cs: Vec<SpdMatrix> = [
            [2.0, 0.3, 1.0],
            [1.0, -0.2, 0.7],
            [3.0, 0.5, 2.5],
            [0.8, 0.1, 1.4],
        ]
        .iter()
        .map(|v| SpdMatrix::from_row_slice(2, &[v[0], v[1], v[1], v[2]]).unwrap())
        .collect();
        let xs = vec![vec![0.0, 1.0], vec![1.0, 0.5], vec![-1.0, 0.2], vec![0.4, -0.7]];
        let state = State {
            g: DMatrix::from_row_slice(2, 2, &[1.2, 0.1, -0.3, 0.9]),
            slopes: vec![
                DMatrix::from_row_slice(2, 2, &[0.2, 0.1, 0.1, -0.3]),
                DMatrix::from_row_slice(2, 2, &[-0.1, 0.05, 0.05, 0.4]),
            ],
        };
        let eval = evaluate(&state, &xs, &cs).unwrap();
        let dir = DMatrix::from_row_slice(2, 2, &[0.3, -0.2, -0.2, 0.1]);
        let t = 1e-6;
        let shift = |tt: f64| State {
            g: &state.g * sym_fn(&(&dir * tt), |v| (0.5 * v).exp()),
            slopes: state.slopes.clone(),
        };
        let fd = (objective(&shift(t), &xs, &cs).unwrap() - objective(&shift(-t), &xs, &cs).unwrap()) / (2.0 * t);
        assert!((fd - eval.grad_base.dot(&dir)).abs() < 1e-7);
        for k in 0..2 {
            let bump = |tt: f64| {
                let mut s = State { g: state.g.clone(), slopes: state.slopes.clone() };
                s.slopes[k] += &dir * tt;
                s
            };
            let fd = (objective(&bump(t), &xs, &cs).unwrap() - objective(&bump(-t), &xs, &cs).unwrap()) / (2.0 * t);
            assert!((fd - eval.grad_slopes[k].dot(&dir)).abs() < 1e-7, "slope {k}");
        }
    }

    #[test]
    fn scalar_regression_is_log_ols() {
        let xs: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64 * 0.3 - 1.0]).collect();
        let ys = [0.4, 0.9, 1.1, 1.8, 2.0, 2.9, 3.1, 3.3];
        let cs: Vec<SpdMatrix> = ys.iter().map(|y: &f64| SpdMatrix::scalar(y.exp()).unwrap()).collect();
        let (model, diag) = geodesic_regression(&xs, &cs, 1e-10, 500).unwrap();
        assert!(diag.converged);
        let n = xs.len() as f64;
        let xbar = xs.iter().map(|x| x[0]).sum::<f64>() / n;
        let ybar = ys.iter().sum::<f64>() / n;
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x[0] - xbar) * (y - ybar)).sum();
        let sxx: f64 = xs.iter().map(|x| (x[0] - xbar).powi(2)).sum();
        let beta = sxy / sxx;
        let alpha = ybar - beta * xbar;
        let base = model.base().matrix()[(0, 0)];
        assert!((base.ln() - alpha).abs() < 1e-6);
        let coord = vec_at(model.base(), &model.coefficients()[0]).unwrap().coords()[0];
        assert!((coord - beta).abs() < 1e-6);
    }

    #[test]
    fn noiseless_recovery() {
        let base = SpdMatrix::from_row_slice(2, &[2.0, 0.4, 0.4, 1.0]).unwrap();
        let v1 = TangentVector::new(base.clone(), DMatrix::from_row_slice(2, 2, &[0.5, 0.2, 0.2, -0.3])).unwrap();
        let v2 = TangentVector::new(base.clone(), DMatrix::from_row_slice(2, 2, &[-0.2, 0.3, 0.3, 0.4])).unwrap();
        let truth = RegressionModel { base: base.clone(), coefficients: vec![v1.clone(), v2.clone()] };
        let xs: Vec<Vec<f64>> = (0..12)
            .map(|i| vec![(i as f64 * 0.7).sin(), (i as f64 * 1.3).cos() * 0.8])
            .collect();
        let cs = truth.fitted(&xs).unwrap();
        let (model, diag) = geodesic_regression(&xs, &cs, 1e-8, 1000).unwrap();
        assert!(diag.converged, "{diag:?}");
        assert!(max_abs(&(model.base().matrix() - base.matrix())) < 1e-6);
        for (fit, want) in model.coefficients().iter().zip([&v1, &v2]) {
            assert!(max_abs(&(fit.matrix() - want.matrix())) < 1e-6);
        }
        assert!(objective_of(&model, &xs, &cs) < 1e-14);
    }

    #[test]
    fn intercept_only_is_frechet_mean() {
        let model = RiemannianNormal::new(
            SpdMatrix::from_row_slice(2, &[1.5, 0.2, 0.2, 0.8]).unwrap(),
            Dispersion::isotropic(3, 0.2).unwrap(),
        )
        .unwrap();
        let cs = model.sample(15, 5).unwrap();
        let xs = vec![Vec::new(); cs.len()];
        let (fit, diag) = geodesic_regression(&xs, &cs, 1e-10, 100).unwrap();
        assert!(diag.converged);
        let (mean, _) = frechet_mean(&cs, 1e-12, 200).unwrap();
        assert!(max_abs(&(fit.base().matrix() - mean.matrix())) < 1e-9);
        assert_eq!(fit.predictor_dim(), 0);
    }

    #[test]
    fn rank_deficient_design_is_rejected() {
        let cs: Vec<SpdMatrix> = (1..=4).map(|i| SpdMatrix::scalar(i as f64).unwrap()).collect();
        let xs = vec![vec![1.0, 2.0]; 4];
        assert!(geodesic_regression(&xs, &cs, 1e-8, 10).unwrap_err().is_usage());
        let collinear: Vec<Vec<f64>> = (0..4).map(|i| vec![i as f64, 2.0 * i as f64]).collect();
        assert!(geodesic_regression(&collinear, &cs, 1e-8, 10).unwrap_err().is_usage());
        assert!(geodesic_regression(&xs[..3], &cs, 1e-8, 10).unwrap_err().is_usage());
    }

    #[test]
    fn dispersion_after_fit() {
        let model = RiemannianNormal::new(SpdMatrix::identity(2), Dispersion::isotropic(3, 0.1).unwrap()).unwrap();
        let cs = model.sample(30, 9).unwrap();
        let xs: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64 / 30.0]).collect();
        let (fit, _) = geodesic_regression(&xs, &cs, 1e-9, 500).unwrap();
        let disp = regression_dispersion(&fit, &xs, &cs).unwrap();
        assert_eq!(disp.matrix.shape(), (3, 3));
        assert!(!disp.singular);
        // residual coordinates have norm d(Ĉ_i, C_i), so the trace is (n/(n−1)) times the objective
        let tr = disp.matrix.trace();
        assert!((tr - objective_of(&fit, &xs, &cs) * 30.0 / 29.0).abs() < 1e-10);
    }
}
