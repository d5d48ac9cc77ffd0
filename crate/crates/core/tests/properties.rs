//! Property checks across random parameters: Rosenblatt round trips,
//! Shapley normalization, the closed-form decomposition identities and the
//! Monte-Carlo convergence rate.

mod common;

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;
use shapley_gsa::input_model::*;
use shapley_gsa::rng::substream;
use shapley_gsa::shapley::{shapley_effects, ShapleyConfig};
use shapley_gsa::test_models::*;

fn all_orderings(d: usize) -> Vec<Vec<usize>> {
    if d == 1 {
        return vec![vec![0]];
    }
    let mut out = Vec::new();
    for p in all_orderings(d - 1) {
        for pos in 0..d {
            let mut q = p.clone();
            q.insert(pos, d - 1);
            out.push(q);
        }
    }
    out
}

/// Random correlation matrix from a random factor with unit-norm rows.
fn correlation(d: usize, seed: u64, strength: f64) -> CorrelationMatrix {
    let mut rng = substream(seed, &[]);
    let mut f = DMatrix::from_fn(d, d + 1, |_, _| rng.random_range(-1.0..1.0));
    for i in 0..d {
        f[(i, i)] += 1.0 / strength.max(1e-3);
        let n = f.row(i).norm();
        f.row_mut(i).scale_mut(1.0 / n);
    }
    let mut c = &f * f.transpose();
    for i in 0..d {
        c[(i, i)] = 1.0;
    }
    CorrelationMatrix::new(c).unwrap()
}

fn margins(d: usize, seed: u64) -> Vec<MarginSpec> {
    let mut rng = substream(seed, &[1]);
    (0..d)
        .map(|_| {
            if rng.random_bool(0.5) {
                let lo = rng.random_range(-3.0..1.0);
                MarginSpec::uniform(lo, lo + rng.random_range(0.5..4.0)).unwrap()
            } else {
                MarginSpec::normal(rng.random_range(-2.0..2.0), rng.random_range(0.3..3.0)).unwrap()
            }
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rosenblatt_round_trips_for_every_ordering(d in 1usize..=4, seed in any::<u64>(), strength in 0.05f64..0.9) {
        let dist = InputDistribution::new(margins(d, seed), correlation(d, seed, strength)).unwrap();
        let mut rng = substream(seed, &[2]);
        for ord in all_orderings(d) {
            let ord = Ordering::new(ord).unwrap();
            for _ in 0..5 {
                let u: Vec<f64> = (0..d).map(|_| rng.random_range(0.001..0.999)).collect();
                let x = dist.inverse_rosenblatt(&u, &ord).unwrap();
                let back = dist.rosenblatt(&x, &ord).unwrap();
                for k in 0..d {
                    prop_assert!((back[k] - u[k]).abs() < 1e-10, "{:?}: {:?} vs {:?}", ord, back, u);
                }
                let again = dist.inverse_rosenblatt(&back, &ord).unwrap();
                for k in 0..d {
                    prop_assert!((again[k] - x[k]).abs() < 1e-10 * x[k].abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn shapley_estimates_sum_to_one(seed in any::<u64>(), beta in prop::array::uniform4(-2.0f64..2.0), random in any::<bool>()) {
        prop_assume!(beta.iter().any(|b| b.abs() > 0.2));
        let dist = InputDistribution::gaussian(&[0.0; 4], &[1.0, 0.5, 2.0, 1.5], correlation(4, seed, 0.5)).unwrap();
        let model = move |x: &[f64]| beta[0] * x[0] + beta[1] * x[1] * x[2] + beta[2] * x[3].sin() + beta[3] * x[2];
        let cfg = if random { ShapleyConfig::random(200, 1, 3, 40) } else { ShapleyConfig::exact(200, 5, 3) };
        let res = shapley_effects(&model, &dist, &cfg, seed).unwrap();
        prop_assert!((res.sh.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn identity_and_telescoping_form(
        beta in prop::array::uniform3(-2.0f64..2.0),
        sigma in prop::array::uniform3(0.2f64..2.0),
        a in -0.9f64..0.9, r in -0.9f64..0.9, g in -0.9f64..0.9,
    ) {
        prop_assume!(beta.iter().any(|b| b.abs() > 0.1));
        let p = LinearGaussianParams::new(beta, sigma, a, r, g);
        prop_assume!(p.is_ok());
        let p = p.unwrap();
        let idx = analytic_indices_linear(&p);
        prop_assume!(idx.is_ok());
        let idx = idx.unwrap();
        prop_assert!((idx.sh.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        let tele = common::telescoping_sh(&p);
        for i in 0..3 {
            let others: Vec<usize> = (0..3).filter(|&j| j != i).collect();
            let form = (idx.s_full[i]
                + 0.5 * idx.st_cond(i, &[others[0]]).unwrap()
                + 0.5 * idx.st_cond(i, &[others[1]]).unwrap()
                + idx.st_ind[i]) / 3.0;
            prop_assert!((idx.sh[i] - form).abs() < 1e-10);
            prop_assert!((idx.sh[i] - tele[i]).abs() < 1e-10);
            prop_assert!((idx.s_full[i] - idx.st_full[i]).abs() < 1e-12);
        }
    }
}

/// Largest gap between the empirical CDF of `v` and the uniform one.
fn ks_uniform(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter()
        .enumerate()
        .map(|(i, &x)| (x - i as f64 / n).abs().max(((i + 1) as f64 / n - x).abs()))
        .fold(0.0, f64::max)
}

#[test]
fn rosenblatt_output_is_independent_uniform() {
    let dist = InputDistribution::new(margins(3, 9), correlation(3, 9, 0.8)).unwrap();
    let mut rng = substream(10, &[]);
    let n = 20_000;
    let x = dist.sample(n, &mut rng);
    for ord in all_orderings(3) {
        let ord = Ordering::new(ord).unwrap();
        let u: Vec<Vec<f64>> = x.rows().map(|row| dist.rosenblatt(row, &ord).unwrap()).collect();
        for k in 0..3 {
            let mut col: Vec<f64> = u.iter().map(|r| r[k]).collect();
            // 1% critical value of the one-sample KS statistic
            assert!(ks_uniform(&mut col) < 1.63 / (n as f64).sqrt());
        }
        for a in 0..3 {
            for b in 0..a {
                let c: f64 = u.iter().map(|r| (r[a] - 0.5) * (r[b] - 0.5)).sum::<f64>() / n as f64 * 12.0;
                assert!(c.abs() < 4.0 / (n as f64).sqrt(), "corr({a},{b}) = {c}");
            }
        }
    }
}

#[test]
fn conditional_sampling_matches_gaussian_conditioning() {
    let corr = correlation(3, 4, 0.8);
    let stds = [1.0, 2.0, 0.5];
    let dist = InputDistribution::gaussian(&[1.0, -1.0, 0.0], &stds, corr.clone()).unwrap();
    let cov = DMatrix::from_fn(3, 3, |i, j| corr.matrix()[(i, j)] * stds[i] * stds[j]);
    let fixed = [2usize];
    let value = 0.7;
    let free = [1usize, 0];
    let n = 40_000;
    let s = dist.conditional_sample(&fixed, &[value], &free, n, &mut substream(3, &[])).unwrap();
    let means = [1.0, -1.0, 0.0];
    for (col, &i) in free.iter().enumerate() {
        let want_mean = means[i] + cov[(i, 2)] / cov[(2, 2)] * (value - means[2]);
        let want_var = cov[(i, i)] - cov[(i, 2)].powi(2) / cov[(2, 2)];
        let v = s.column(col);
        let m = v.iter().sum::<f64>() / n as f64;
        let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((m - want_mean).abs() < 4.0 * (want_var / n as f64).sqrt());
        assert!((var / want_var - 1.0).abs() < 4.0 * (2.0 / n as f64).sqrt());
    }
}

#[test]
fn rt_error_decays_at_root_n() {
    let ns = [100, 1000, 10_000];
    let err = common::rt_errors(&ns, 50, 1);
    let slope = common::log_log_slope(&ns.map(|n| n as f64), &err);
    assert!((slope + 0.5).abs() <= 0.15, "slope {slope}, errors {err:?}");
}

#[test]
fn shapley_error_decays_at_root_n() {
    let nos = [20, 200, 2000];
    let err = common::shapley_errors(&nos, 50, 2);
    let slope = common::log_log_slope(&nos.map(|n| n as f64), &err);
    assert!((slope + 0.5).abs() <= 0.15, "slope {slope}, errors {err:?}");
}
