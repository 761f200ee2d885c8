mod common;

use common::*;
use ndarray::{Array2, Axis};
use proptest::prelude::*;
use seed_core::linalg::cholesky;
use seed_core::netinfer::{lag_embed, scores_from_coefficient, unstack_lags, VarSpec};
use seed_core::simgen::{ar1_cov, evaluate, gen_coefficient, gen_dataset, rng_for, support_auc, SimSpec};
use seed_core::Matrix;

fn small_spec(seed: u64) -> SimSpec {
    SimSpec {
        n: 30,
        p: 20,
        q: 25,
        r: 2,
        density: 0.2,
        seed,
        ..SimSpec::default()
    }
}

fn permute_rows(a: &Matrix, perm: &[usize]) -> Matrix {
    Matrix::from_array(a.as_array().select(Axis(0), perm)).unwrap()
}

#[test]
fn largest_ar1_covariance_is_positive_definite() {
    assert!(cholesky(&ar1_cov(2000, 0.95).unwrap()).is_ok());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn ar1_covariance_is_positive_definite(d in 1usize..300, rho in 0.0f64..=0.95) {
        prop_assert!(cholesky(&ar1_cov(d, rho).unwrap()).is_ok());
    }

    #[test]
    fn metrics_ignore_test_row_order(seed in any::<u64>(), shuffle in any::<u64>()) {
        let spec = small_spec(seed);
        let mut rng = rng_for(seed, 0);
        let truth = gen_coefficient(&spec, &mut rng).unwrap();
        let test = gen_dataset(&spec, &truth, &mut rng).unwrap();
        let c_hat = Matrix::from_array(truth.c.as_array() + &(normal_matrix(spec.p, spec.q, &mut rng) * 0.1)).unwrap();
        let mut perm: Vec<usize> = (0..spec.n).collect();
        let mut prng = rng_for(shuffle, 1);
        rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut prng);
        let a = evaluate(&c_hat, &truth, &test.x, &test.y).unwrap();
        let b = evaluate(&c_hat, &truth, &permute_rows(&test.x, &perm), &permute_rows(&test.y, &perm)).unwrap();
        prop_assert!((a.pred_error - b.pred_error).abs() <= 1e-12 * a.pred_error.max(1e-300));
        prop_assert_eq!(a.est_error, b.est_error);
        prop_assert_eq!(a.rank_error, b.rank_error);
        prop_assert_eq!(a.support_auc, b.support_auc);
    }

    #[test]
    fn planted_coefficient_has_exact_rank(seed in any::<u64>(), r in 1usize..5) {
        let spec = SimSpec { p: 30, q: 40, r, uv_zero_threshold: 0.0, ..small_spec(seed) };
        let truth = gen_coefficient(&spec, &mut rng_for(seed, 2)).unwrap();
        let s = singular_values(truth.c.as_array());
        prop_assert!(s[r - 1] > 1e-8 * s[0]);
        prop_assert!(s.get(r).map_or(true, |v| *v <= 1e-10 * s[0]));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn auc_ignores_monotone_transforms(
        cells in prop::collection::vec((-10.0f64..10.0, any::<bool>()), 2..60),
        scale in 0.1f64..2.0,
        shift in -5.0f64..5.0,
    ) {
        let (scores, truth): (Vec<f64>, Vec<bool>) = cells.into_iter().unzip();
        prop_assume!(truth.iter().any(|t| *t) && truth.iter().any(|t| !*t));
        let a = support_auc(&scores, &truth).unwrap();
        let affine: Vec<f64> = scores.iter().map(|s| scale * s + shift).collect();
        let exp: Vec<f64> = scores.iter().map(|s| (scale * s).exp()).collect();
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!((support_auc(&affine, &truth).unwrap() - a).abs() <= 1e-12);
        prop_assert!((support_auc(&exp, &truth).unwrap() - a).abs() <= 1e-12);
    }
}

/// `x(t) = Σ_ℓ A_ℓ·x(t−ℓ)` from random initial values, no noise.
fn noiseless_var(lags: &[Array2<f64>], steps: usize, seed: u64) -> Array2<f64> {
    let d = lags[0].nrows();
    let l = lags.len();
    let mut rng = rng_for(seed, 3);
    let mut x = Array2::<f64>::zeros((steps, d));
    x.slice_mut(ndarray::s![..l, ..]).assign(&normal_matrix(l, d, &mut rng));
    for t in l..steps {
        let mut next = ndarray::Array1::<f64>::zeros(d);
        for (k, a) in lags.iter().enumerate() {
            next += &a.dot(&x.row(t - 1 - k));
        }
        x.row_mut(t).assign(&next);
    }
    x
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn least_squares_on_embedding_recovers_lags(seed in any::<u64>(), d in 1usize..4, l in 1usize..3) {
        let mut rng = rng_for(seed, 4);
        let scale = 0.6 / ((d * l) as f64).sqrt();
        let lags: Vec<Array2<f64>> = (0..l).map(|_| normal_matrix(d, d, &mut rng) * scale).collect();
        let steps = l + l * d + 6;
        let series = Matrix::from_array(noiseless_var(&lags, steps, seed)).unwrap();
        let (x, y) = lag_embed(&series, l).unwrap();
        let s = singular_values(x.as_array());
        prop_assume!(s[s.len() - 1] > 1e-6 * s[0]);
        let c = Matrix::from_array(lstsq(x.as_array(), y.as_array())).unwrap();
        let got = unstack_lags(&c, &VarSpec::new(l, d).unwrap()).unwrap();
        for (g, a) in got.iter().zip(&lags) {
            prop_assert!(frob(&(g - a)) <= 1e-6, "{g:?} vs {a:?}");
        }
    }

    #[test]
    fn scores_follow_node_relabeling(seed in any::<u64>(), d in 2usize..7, l in 1usize..4, shuffle in any::<u64>()) {
        let mut rng = rng_for(seed, 5);
        let spec = VarSpec::new(l, d).unwrap();
        let c = normal_matrix(l * d, d, &mut rng);
        let mut perm: Vec<usize> = (0..d).collect();
        rand::seq::SliceRandom::shuffle(perm.as_mut_slice(), &mut rng_for(shuffle, 6));
        // Node k is renamed perm[k].
        let mut c2 = Array2::<f64>::zeros((l * d, d));
        for lag in 0..l {
            for j in 0..d {
                for i in 0..d {
                    c2[[lag * d + perm[j], perm[i]]] = c[[lag * d + j, i]];
                }
            }
        }
        let a = scores_from_coefficient(&Matrix::from_array(c.clone()).unwrap(), &spec).unwrap().scores;
        let b = scores_from_coefficient(&Matrix::from_array(c2).unwrap(), &spec).unwrap().scores;
        for i in 0..d {
            for j in 0..d {
                prop_assert_eq!(b[[perm[i], perm[j]]], a[[i, j]]);
            }
        }
        let doubled = scores_from_coefficient(&Matrix::from_array(&c * 2.0).unwrap(), &spec).unwrap().scores;
        prop_assert!(doubled.iter().zip(a.iter()).all(|(x, y)| (x - 2.0 * y).abs() <= 1e-12 * y.abs().max(1.0)));
    }
}
