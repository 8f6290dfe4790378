mod common;

use bcmf::effects::*;
use bcmf::mediation::{DrawMatrix, FunctionDraws};
use bcmf::stats::norm_cdf;
use bcmf::ResponseKind;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use common::mean_se;

fn random_matrix(rng: &mut ChaCha8Rng, draws: usize, n: usize) -> DrawMatrix {
    let v: Vec<f64> = (0..draws * n).map(|_| rng.random_range(-2.0..2.0)).collect();
    DrawMatrix::from_vec(n, v).unwrap()
}

fn random_functions(rng: &mut ChaCha8Rng, draws: usize, n: usize) -> FunctionDraws {
    FunctionDraws {
        mu: random_matrix(rng, draws, n),
        zeta: random_matrix(rng, draws, n),
        d: random_matrix(rng, draws, n),
        mu_m: random_matrix(rng, draws, n),
        tau_m: random_matrix(rng, draws, n),
    }
}

fn continuous(f: &FunctionDraws) -> EffectDraws {
    let ones = vec![1.0; f.n_draws()];
    effects_from_functions(f, &ones, ResponseKind::Continuous, ResponseKind::Continuous).unwrap()
}

#[test]
fn continuous_delta_is_elementwise_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let f = random_functions(&mut rng, 30, 17);
    let e = continuous(&f);
    for s in 0..30 {
        for i in 0..17 {
            let want = f.tau_m.row(s)[i] * f.d.row(s)[i];
            assert_eq!(e.delta.get(s, i), want);
            assert_eq!(e.zeta.get(s, i), f.zeta.get(s, i));
            assert!((e.tau.get(s, i) - e.zeta.get(s, i) - e.delta.get(s, i)).abs() <= 1e-12);
        }
    }
}

#[test]
fn zero_d_annihilates_delta() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut f = random_functions(&mut rng, 5, 8);
    f.d = DrawMatrix::from_vec(8, vec![0.0; 40]).unwrap();
    assert!(continuous(&f).delta.as_slice().iter().all(|&v| v == 0.0));
}

#[test]
fn negating_tau_m_and_d_keeps_delta() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let f = random_functions(&mut rng, 10, 12);
    let neg = |m: &DrawMatrix| DrawMatrix::from_vec(m.n_cols(), m.as_slice().iter().map(|v| -v).collect()).unwrap();
    let g = FunctionDraws {
        d: neg(&f.d),
        tau_m: neg(&f.tau_m),
        ..f.clone()
    };
    assert_eq!(continuous(&f).delta, continuous(&g).delta);
}

#[test]
fn binary_mediator_delta_is_bounded_by_d() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let f = random_functions(&mut rng, 20, 25);
    let ones = vec![1.0; 20];
    let e = effects_from_functions(&f, &ones, ResponseKind::Continuous, ResponseKind::Binary).unwrap();
    for s in 0..20 {
        for i in 0..25 {
            assert!(e.delta.get(s, i).abs() <= f.d.get(s, i).abs());
        }
    }
}

#[test]
fn binary_mediator_limits() {
    let d = 0.7;
    let big = d * (norm_cdf(0.0 + 40.0) - norm_cdf(0.0));
    assert!((big - 0.5 * d).abs() < 1e-12);
    let none = d * (norm_cdf(0.3) - norm_cdf(0.3));
    assert_eq!(none, 0.0);
}

#[test]
fn counterfactual_mean_special_cases() {
    let v = counterfactual_mean_binary_outcome(0.2, 0.3, 0.0, 5.0, -2.0, 4.0, 1, 1);
    assert!((v - norm_cdf(0.5)).abs() < 1e-15);
    let v = counterfactual_mean_binary_outcome(0.0, 0.0, 1.0, 0.0, 0.0, 3f64.sqrt(), 1, 0);
    assert!((v - 0.5).abs() < 1e-15);
}

#[test]
fn counterfactual_mean_matches_simulation() {
    let (mu, zeta, d, mu_m, tau_m, sigma_m) = (0.2, 0.3, 0.5, -0.1, 0.4, 1.0);
    let closed = counterfactual_mean_binary_outcome(mu, zeta, d, mu_m, tau_m, sigma_m, 1, 1);
    assert!((closed - 0.7195).abs() < 1e-4, "{closed}");
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 1_000_000;
    let hits = (0..n)
        .filter(|_| {
            let eps: f64 = rng.sample(StandardNormal);
            let nu: f64 = rng.sample(StandardNormal);
            let m = mu_m + tau_m + sigma_m * nu;
            eps <= mu + zeta + d * m
        })
        .count();
    let p = hits as f64 / n as f64;
    let se = (p * (1.0 - p) / n as f64).sqrt();
    assert!((p - closed).abs() < 3.0 * se, "{p} vs {closed}");
}

#[test]
fn counterfactual_mean_is_monotone() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..500 {
        let mu = rng.random_range(-2.0..2.0);
        let zeta = rng.random_range(-1.0..1.0);
        let d = rng.random_range(0.01..2.0);
        let mu_m = rng.random_range(-1.0..1.0);
        let tau_m = rng.random_range(-1.0..1.0);
        let sm = rng.random_range(0.1..2.0);
        let h = rng.random_range(0.01..0.5);
        let f = |mu: f64, tau_m: f64| counterfactual_mean_binary_outcome(mu, zeta, d, mu_m, tau_m, sm, 1, 1);
        assert!(f(mu + h, tau_m) > f(mu, tau_m));
        assert!(f(mu, tau_m + h) > f(mu, tau_m));
    }
}

#[test]
fn dirichlet_rows_sum_to_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let w = bayesian_bootstrap_weights(200, 37, &mut rng).unwrap();
    for r in w.rows() {
        assert!(r.iter().all(|&v| v >= 0.0));
        assert!((r.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }
}

#[test]
fn constant_effect_survives_any_weights() {
    let c = 0.37;
    let z = DrawMatrix::from_vec(9, vec![0.1; 90]).unwrap();
    let d = DrawMatrix::from_vec(9, vec![c; 90]).unwrap();
    let e = EffectDraws::from_components(z, d).unwrap();
    let avg = bayesian_bootstrap_averages(&e, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
    assert!(avg.delta.iter().all(|v| (v - c).abs() < 1e-14));
}

#[test]
fn bootstrap_mean_equals_equal_weight_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let row: Vec<f64> = (0..15).map(|_| rng.random_range(-1.0..1.0)).collect();
    let draws = 100_000;
    let rows: Vec<f64> = (0..draws).flat_map(|_| row.iter().copied()).collect();
    let m = DrawMatrix::from_vec(15, rows).unwrap();
    let e = EffectDraws::from_components(m.clone(), m).unwrap();
    let avg = bayesian_bootstrap_averages(&e, &mut rng).unwrap();
    let (mean, se) = mean_se(&avg.delta);
    let target = row.iter().sum::<f64>() / 15.0;
    assert!((mean - target).abs() < 3.0 * se, "{mean} vs {target}");
    assert!((equal_weight_averages(&e).delta[0] - target).abs() < 1e-14);
}

#[test]
fn subgroup_means_match_recomputation() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let (k, n, g) = (12, 40, 4);
    let e = EffectDraws::from_components(random_matrix(&mut rng, k, n), random_matrix(&mut rng, k, n)).unwrap();
    let mut labels: Vec<usize> = (0..n).map(|i| i % g).collect();
    for i in (1..n).rev() {
        labels.swap(i, rng.random_range(0..=i));
    }
    let out = subgroup_averages(&e, &Grouping::Fixed(labels.clone()), g).unwrap();
    for s in 0..k {
        for grp in 0..g {
            let (mut sum, mut cnt) = (0.0, 0.0);
            for i in 0..n {
                if labels[i] == grp {
                    sum += e.delta.get(s, i);
                    cnt += 1.0;
                }
            }
            assert!((out.delta[grp][s] - sum / cnt).abs() < 1e-12);
        }
    }
}

#[test]
fn per_draw_groups_and_whole_sample() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let e = EffectDraws::from_components(random_matrix(&mut rng, 6, 10), random_matrix(&mut rng, 6, 10)).unwrap();
    let all = subgroup_averages(&e, &Grouping::Fixed(vec![0; 10]), 1).unwrap();
    let eq = equal_weight_averages(&e);
    for s in 0..6 {
        assert!((all.delta[0][s] - eq.delta[s]).abs() < 1e-12);
        assert!((all.zeta[0][s] - eq.zeta[s]).abs() < 1e-12);
    }
    let per: Vec<Vec<usize>> = (0..6).map(|s| (0..10).map(|i| usize::from(i < 3 + s % 2)).collect()).collect();
    let out = subgroup_averages(&e, &Grouping::PerDraw(per.clone()), 2).unwrap();
    for s in 0..6 {
        let members: Vec<usize> = (0..10).filter(|&i| per[s][i] == 1).collect();
        let want = members.iter().map(|&i| e.delta.get(s, i)).sum::<f64>() / members.len() as f64;
        assert!((out.delta[1][s] - want).abs() < 1e-12);
    }
}

#[test]
fn two_constant_groups() {
    let d: Vec<f64> = (0..3).flat_map(|_| [1.5, 1.5, -0.5, -0.5, -0.5]).collect();
    let e = EffectDraws::from_components(DrawMatrix::from_vec(5, vec![0.0; 15]).unwrap(), DrawMatrix::from_vec(5, d).unwrap())
        .unwrap();
    let out = subgroup_averages(&e, &Grouping::Fixed(vec![0, 0, 1, 1, 1]), 2).unwrap();
    assert!(out.delta[0].iter().all(|&v| v == 1.5));
    assert!(out.delta[1].iter().all(|&v| v == -0.5));
}
