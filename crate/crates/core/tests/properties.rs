use nalgebra::DMatrix;
use proptest::prelude::*;
use spd_manova::estimation::{
    dispersion_estimate, frechet_mean, geodesic_regression, regression_dispersion, spherical_variance, GroupedSample,
};
use spd_manova::geometry::{
    distance, exp_map, inner, log_map, parallel_transport, unvec_at, vec_at, SpdMatrix, TangentVector,
};
use spd_manova::inference::{noncentrality_novel, riemannian_manova, wilks_lambda};
use spd_manova::normal::{Dispersion, RiemannianNormal};

fn symmetric(p: usize, entries: &[f64]) -> DMatrix<f64> {
    let m = DMatrix::from_fn(p, p, |i, j| entries[i * p + j]);
    (&m + m.transpose()) * 0.5
}

fn spd(p: usize, entries: &[f64]) -> SpdMatrix {
    let id = SpdMatrix::identity(p);
    exp_map(&id, &TangentVector::new(id.clone(), symmetric(p, entries)).unwrap()).unwrap()
}

fn tangent(c: &SpdMatrix, entries: &[f64]) -> TangentVector {
    let s = symmetric(c.dim(), entries);
    TangentVector::new(c.clone(), c.sqrt_matrix() * s * c.sqrt_matrix()).unwrap()
}

fn entries(p: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-0.8..0.8f64, p * p)
}

fn invertible(p: usize, e: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(p, p, |i, j| 0.4 * e[i * p + j]).exp()
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.abs().max()
}

fn sample_groups(p: usize, sizes: &[usize], seed: u64) -> GroupedSample {
    let center = SpdMatrix::identity(p);
    let d = p * (p + 1) / 2;
    let model = RiemannianNormal::new(center, Dispersion::isotropic(d, 0.2).unwrap()).unwrap();
    GroupedSample::from_groups(
        sizes
            .iter()
            .enumerate()
            .map(|(l, n)| model.sample(*n, seed.wrapping_add(l as u64 * 7919)).unwrap())
            .collect(),
    )
    .unwrap()
}

fn congruent(sample: &GroupedSample, m: &DMatrix<f64>) -> GroupedSample {
    GroupedSample::from_groups(
        sample
            .groups()
            .iter()
            .map(|gr| gr.observations.iter().map(|c| c.congruence(m).unwrap()).collect())
            .collect(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exp_log_roundtrip(p in 1usize..5, a in entries(4), b in entries(4), v in entries(4)) {
        let (c, x) = (spd(p, &a), spd(p, &b));
        let back = exp_map(&c, &log_map(&c, &x).unwrap()).unwrap();
        prop_assert!(max_abs(&(back.matrix() - x.matrix())) < 1e-9);
        let w = tangent(&c, &v);
        let again = log_map(&c, &exp_map(&c, &w).unwrap()).unwrap();
        prop_assert!(max_abs(&(again.matrix() - w.matrix())) < 1e-9);
    }

    #[test]
    fn vec_is_an_isometry(p in 1usize..5, a in entries(4), v in entries(4), w in entries(4)) {
        let c = spd(p, &a);
        let (x, y) = (tangent(&c, &v), tangent(&c, &w));
        let (vx, vy) = (vec_at(&c, &x).unwrap(), vec_at(&c, &y).unwrap());
        prop_assert!((inner(&c, &x, &y).unwrap() - vx.coords().dot(vy.coords())).abs() < 1e-9);
        prop_assert!(max_abs(&(unvec_at(&c, &vx).unwrap().matrix() - x.matrix())) < 1e-9);
    }

    #[test]
    fn transport_preserves_inner_products(p in 1usize..5, a in entries(4), b in entries(4), v in entries(4), w in entries(4)) {
        let (c, t) = (spd(p, &a), spd(p, &b));
        let (x, y) = (tangent(&c, &v), tangent(&c, &w));
        let (px, py) = (parallel_transport(&c, &t, &x).unwrap(), parallel_transport(&c, &t, &y).unwrap());
        prop_assert!((inner(&t, &px, &py).unwrap() - inner(&c, &x, &y).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn distance_is_affine_invariant(p in 1usize..5, a in entries(4), b in entries(4), g in entries(4)) {
        let (x, y) = (spd(p, &a), spd(p, &b));
        let m = invertible(p, &g);
        let moved = distance(&x.congruence(&m).unwrap(), &y.congruence(&m).unwrap()).unwrap();
        prop_assert!((moved - distance(&x, &y).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn frechet_mean_is_equivariant_and_centered(seed in 0u64..1000, n in 2usize..12, g in entries(3)) {
        let sample = sample_groups(3, &[n], seed).pooled();
        let (mean, diag) = frechet_mean(&sample, 1e-12, 200).unwrap();
        prop_assert!(diag.converged);
        let m = invertible(3, &g);
        let moved: Vec<SpdMatrix> = sample.iter().map(|c| c.congruence(&m).unwrap()).collect();
        let (moved_mean, _) = frechet_mean(&moved, 1e-12, 200).unwrap();
        let expect = &m * mean.matrix() * m.transpose();
        prop_assert!(max_abs(&(moved_mean.matrix() - expect)) < 1e-8);

        let mut total = nalgebra::DVector::zeros(6);
        for c in &sample {
            total += vec_at(&mean, &log_map(&mean, c).unwrap()).unwrap().coords();
        }
        prop_assert!(total.norm() <= 1e-12 * n as f64);

        let var = spherical_variance(&sample, &mean).unwrap();
        prop_assert!((spherical_variance(&moved, &moved_mean).unwrap() - var).abs() < 1e-8);
        if n >= 2 {
            let disp = dispersion_estimate(&sample, &mean).unwrap();
            prop_assert!((disp.matrix.trace() - var * n as f64 / (n as f64 - 1.0)).abs() < 1e-10);
        }
    }

    #[test]
    fn wilks_decomposition_properties(seed in 0u64..1000, k in entries(2), scale in 0.2..5.0f64) {
        let sample = sample_groups(2, &[6, 7, 5], seed);
        let w = wilks_lambda(&sample, 1e-12).unwrap();
        prop_assert!(max_abs(&(&w.total - &w.between - &w.within)) <= 1e-9);
        prop_assert!(w.lambda_star > 0.0 && w.lambda_star <= 1.0);

        // a scaled rotation moves every group frame by the same orthogonal map
        let skew = DMatrix::from_fn(2, 2, |i, j| k[i * 2 + j] - k[j * 2 + i]);
        let m = skew.exp() * scale;
        let a = riemannian_manova(&sample).unwrap().statistic;
        let b = riemannian_manova(&congruent(&sample, &m)).unwrap().statistic;
        prop_assert!((a - b).abs() < 1e-8);
    }

    #[test]
    fn scalar_manova_matches_textbook_anova(logs in prop::collection::vec(prop::collection::vec(-2.0..2.0f64, 2..6), 2..4)) {
        let sample = GroupedSample::from_groups(
            logs.iter().map(|g| g.iter().map(|l| SpdMatrix::scalar(l.exp()).unwrap()).collect()).collect(),
        )
        .unwrap();
        let all: Vec<f64> = logs.iter().flatten().copied().collect();
        let n = all.len() as f64;
        let grand = all.iter().sum::<f64>() / n;
        let sst: f64 = all.iter().map(|x| (x - grand).powi(2)).sum();
        let ssw: f64 = logs
            .iter()
            .map(|g| {
                let m = g.iter().sum::<f64>() / g.len() as f64;
                g.iter().map(|x| (x - m).powi(2)).sum::<f64>()
            })
            .sum();
        prop_assume!(ssw > 1e-3 * sst && sst > 1e-6);
        let r = riemannian_manova(&sample).unwrap();
        prop_assert!((r.statistic - (-n * (ssw / sst).ln())).abs() < 1e-8);
    }

    #[test]
    fn novel_noncentrality_is_nonnegative(a in entries(2), b in entries(2), w in 0.05..0.95f64) {
        let center = SpdMatrix::identity(2);
        let means = [spd(2, &a), spd(2, &b)];
        let gamma = Dispersion::isotropic(3, 0.7).unwrap();
        prop_assert!(noncentrality_novel(&means, &[w, 1.0 - w], &gamma, &center, 10).unwrap() >= 0.0);
    }
}

#[test]
fn intercept_only_regression_dispersion_matches_estimate() {
    let sample = sample_groups(2, &[15], 3).pooled();
    let xs = vec![Vec::new(); sample.len()];
    let (model, _) = geodesic_regression(&xs, &sample, 1e-10, 200).unwrap();
    let from_fit = regression_dispersion(&model, &xs, &sample).unwrap();
    let from_mean = dispersion_estimate(&sample, model.base()).unwrap();
    assert!(max_abs(&(from_fit.matrix - from_mean.matrix)) < 1e-12);
}

#[test]
fn scalar_regression_dispersion_is_residual_variance() {
    let xs: Vec<Vec<f64>> = (0..9).map(|i| vec![i as f64 / 4.0]).collect();
    let ys = [0.2, 0.9, 0.4, 1.3, 1.0, 1.9, 1.5, 2.4, 2.0];
    let cs: Vec<SpdMatrix> = ys.iter().map(|y: &f64| SpdMatrix::scalar(y.exp()).unwrap()).collect();
    let (model, _) = geodesic_regression(&xs, &cs, 1e-11, 500).unwrap();
    let n = ys.len() as f64;
    let xbar = xs.iter().map(|x| x[0]).sum::<f64>() / n;
    let ybar = ys.iter().sum::<f64>() / n;
    let beta = xs.iter().zip(&ys).map(|(x, y)| (x[0] - xbar) * (y - ybar)).sum::<f64>()
        / xs.iter().map(|x| (x[0] - xbar).powi(2)).sum::<f64>();
    let alpha = ybar - beta * xbar;
    let rss: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - alpha - beta * x[0]).powi(2)).sum();
    let disp = regression_dispersion(&model, &xs, &cs).unwrap();
    assert!((disp.matrix[(0, 0)] - rss / (n - 1.0)).abs() < 1e-10);
}

#[test]
fn manova_is_not_invariant_under_general_congruence() {
    // each group is vectorized in the frame of its own mean; a non-orthogonal
    // congruence rotates those frames differently, so only the null limit is invariant
    let sample = sample_groups(2, &[6, 6, 6], 10);
    let stretch = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.5]);
    let a = riemannian_manova(&sample).unwrap().statistic;
    let b = riemannian_manova(&congruent(&sample, &stretch)).unwrap().statistic;
    assert!((a - b).abs() > 1e-6);
}
