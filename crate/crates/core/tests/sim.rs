use bcmf::sim::*;
use bcmf::tree::ForestSpec;
use bcmf::{BcmfConfig, Covariates, MediationData};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn lsem_truth(kind: TruthKind, profile: Profile, sigma: f64, sigma_m: f64) -> GroundTruth {
    GroundTruth::linear(kind, profile, LinearBlocks::reference(), CovariateSpec::default(), sigma, sigma_m).unwrap()
}

#[test]
fn noiseless_generation_follows_the_linear_formulas() {
    let t = lsem_truth(TruthKind::Lsem, Profile::Heterogeneous, 0.0, 0.0);
    let b = LinearBlocks::reference();
    let ds = generate_dataset(&t, 200, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let d = &ds.data;
    for i in 0..d.n() {
        let x = d.x.row(i);
        let m = b.beta0_m + dot(&x, &b.beta_m) + d.a[i] * (b.gamma0_m + dot(&x, &b.gamma_m));
        let y = b.beta0_y + dot(&x, &b.beta_y) + d.a[i] * (b.gamma0_y + dot(&x, &b.gamma_y)) + m * (b.xi0 + dot(&x, &b.xi));
        assert!((d.m[i] - m).abs() < 1e-12);
        assert!((d.y[i] - y).abs() < 1e-12);
        let delta = (b.gamma0_m + dot(&x, &b.gamma_m)) * (b.xi0 + dot(&x, &b.xi));
        assert!((ds.delta[i] - delta).abs() < 1e-12);
    }
}

#[test]
fn null_profile_has_no_mediated_path() {
    for kind in [TruthKind::Lsem, TruthKind::BcmfLike] {
        let t = GroundTruth::from_kind(kind, Profile::Null, CovariateSpec::default(), 1.0, 1.0, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let ds = generate_dataset(&t, 100, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert!(ds.delta.iter().all(|&v| v == 0.0));
        assert!(ds.zeta.iter().all(|&v| v == 0.0));
    }
}

#[test]
fn outcome_noise_has_the_requested_sd() {
    let sigma = 1.3;
    let t = lsem_truth(TruthKind::Lsem, Profile::Heterogeneous, sigma, 0.7);
    let ds = generate_dataset(&t, 10_000, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
    let d = &ds.data;
    let resid: Vec<f64> = (0..d.n())
        .map(|i| {
            let x = d.x.row(i);
            d.y[i] - (t.mu.eval(&x) + d.a[i] * t.zeta.eval(&x) + d.m[i] * t.d.eval(&x))
        })
        .collect();
    let m = resid.iter().sum::<f64>() / resid.len() as f64;
    let sd = (resid.iter().map(|r| (r - m).powi(2)).sum::<f64>() / (resid.len() - 1) as f64).sqrt();
    assert!((sd / sigma - 1.0).abs() < 0.05, "{sd}");
}

#[test]
fn small_datasets_are_rejected() {
    let t = lsem_truth(TruthKind::Lsem, Profile::Heterogeneous, 1.0, 1.0);
    assert!(generate_dataset(&t, 49, &mut ChaCha8Rng::seed_from_u64(5)).is_err());
}

#[test]
fn sparse_truth_keeps_a_fifth_of_the_moderators() {
    let b = LinearBlocks::reference().sparsified();
    let kept = [&b.gamma_y, &b.xi, &b.gamma_m].iter().flat_map(|v| v.iter()).filter(|&&c| c != 0.0).count();
    assert_eq!(kept, 5);
    assert_eq!(b.beta_y, LinearBlocks::reference().beta_y);
}

// With both noise sds at zero the mediator is an exact linear function of
// the mediator design, so the outcome design is collinear. Each equation is
// checked on data that is noiseless in that equation only.
#[test]
fn noiseless_lsem_is_recovered() {
    let b = LinearBlocks::reference();
    let close = |a: &[f64], b: &[f64]| a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-8);

    let t = lsem_truth(TruthKind::Lsem, Profile::Heterogeneous, 0.0, 1.0);
    let f = fit_lsem(&generate_dataset(&t, 300, &mut ChaCha8Rng::seed_from_u64(6)).unwrap().data).unwrap();
    assert!(!f.ridge);
    assert!(close(&f.beta_y.slope, &b.beta_y) && (f.beta_y.intercept - b.beta0_y).abs() < 1e-8);
    assert!(close(&f.gamma_y.slope, &b.gamma_y) && (f.gamma_y.intercept - b.gamma0_y).abs() < 1e-8);
    assert!(close(&f.xi.slope, &b.xi) && (f.xi.intercept - b.xi0).abs() < 1e-8);

    let t = lsem_truth(TruthKind::Lsem, Profile::Heterogeneous, 1.0, 0.0);
    let data = generate_dataset(&t, 300, &mut ChaCha8Rng::seed_from_u64(6)).unwrap().data;
    let f = fit_lsem(&data).unwrap();
    assert!(close(&f.beta_m.slope, &b.beta_m) && (f.beta_m.intercept - b.beta0_m).abs() < 1e-8);
    assert!(close(&f.gamma_m.slope, &b.gamma_m) && (f.gamma_m.intercept - b.gamma0_m).abs() < 1e-8);
}

#[test]
fn homogeneous_noiseless_lsem_has_constant_direct_effect() {
    let t = lsem_truth(TruthKind::Lsem, Profile::Homogeneous, 0.0, 1.0);
    let ds = generate_dataset(&t, 300, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
    let f = fit_lsem(&ds.data).unwrap();
    let (z, _) = f.effects(&ds.data.x);
    assert!(z.iter().all(|v| (v - 0.3).abs() < 1e-8));
}

#[test]
fn lsem_effects_match_the_product_formula() {
    let t = lsem_truth(TruthKind::Lsem, Profile::Heterogeneous, 1.0, 1.0);
    let ds = generate_dataset(&t, 300, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
    let f = fit_lsem(&ds.data).unwrap();
    let (z, d) = f.effects(&ds.data.x);
    for i in 0..ds.data.n() {
        let x = ds.data.x.row(i);
        let gm = f.gamma_m.intercept + dot(&x, &f.gamma_m.slope);
        let xi = f.xi.intercept + dot(&x, &f.xi.slope);
        assert!((d[i] - gm * xi).abs() < 1e-12);
        assert!((z[i] - f.gamma_y.intercept - dot(&x, &f.gamma_y.slope)).abs() < 1e-12);
    }
}

#[test]
fn noiseless_bootstrap_has_zero_width() {
    // Residuals are at rounding level and the outcome design is collinear,
    // so replicates agree to the precision of the ridge solve.
    let t = lsem_truth(TruthKind::Lsem, Profile::Heterogeneous, 0.0, 0.0);
    let ds = generate_dataset(&t, 150, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    let bs = lsem_residual_bootstrap(&ds.data, &ds.data.x, 100, &mut ChaCha8Rng::seed_from_u64(10)).unwrap();
    for i in 0..ds.data.n() {
        let c = bs.delta_rows.column(i);
        assert!(c.iter().all(|v| (v - c[0]).abs() < 1e-6));
        let z = bs.zeta_rows.column(i);
        assert!(z.iter().all(|v| (v - z[0]).abs() < 1e-6));
    }
    assert!(bs.delta_bar.iter().all(|v| (v - bs.delta_bar[0]).abs() < 1e-6));
}

#[test]
fn bootstrap_intervals_contain_point_estimates() {
    let t = lsem_truth(TruthKind::Lsem, Profile::Heterogeneous, 1.0, 1.0);
    let ds = generate_dataset(&t, 300, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
    let bs = lsem_residual_bootstrap(&ds.data, &ds.data.x, 200, &mut ChaCha8Rng::seed_from_u64(12)).unwrap();
    let (z, d) = bs.point.effects(&ds.data.x);
    let q = |mut v: Vec<f64>| {
        v.sort_by(f64::total_cmp);
        (bcmf::stats::quantile_sorted(&v, 0.025), bcmf::stats::quantile_sorted(&v, 0.975))
    };
    let mut inside = 0;
    let n = ds.data.n();
    for i in 0..n {
        let (lo, hi) = q(bs.delta_rows.column(i));
        inside += usize::from(lo <= d[i] && d[i] <= hi);
        let (lo, hi) = q(bs.zeta_rows.column(i));
        inside += usize::from(lo <= z[i] && z[i] <= hi);
    }
    assert!(inside as f64 >= 0.99 * (2 * n) as f64, "{inside} of {}", 2 * n);
}

#[test]
fn bootstrap_needs_enough_replicates() {
    let t = lsem_truth(TruthKind::Lsem, Profile::Heterogeneous, 1.0, 1.0);
    let ds = generate_dataset(&t, 100, &mut ChaCha8Rng::seed_from_u64(13)).unwrap();
    assert!(lsem_residual_bootstrap(&ds.data, &ds.data.x, 99, &mut ChaCha8Rng::seed_from_u64(14)).is_err());
}

fn record(target: Target, estimate: f64, lo: f64, hi: f64, true_value: f64) -> Record {
    Record {
        truth: TruthKind::Lsem,
        method: Method::Lsem,
        replication: 0,
        target,
        unit: 0,
        estimate,
        lo,
        hi,
        true_value,
        covered: lo <= true_value && true_value <= hi,
        length: hi - lo,
    }
}

#[test]
fn all_covering_records_score_full_coverage() {
    let recs: Vec<Record> = (0..20).map(|i| record(Target::DeltaRow, i as f64, -100.0, 100.0, 0.5)).collect();
    let agg = aggregate(&recs);
    assert_eq!(agg.len(), 1);
    assert_eq!(agg[0].coverage, 1.0);
    assert_eq!(agg[0].length, 200.0);
}

#[test]
fn aggregates_match_single_pass_recomputation() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let targets = [Target::DeltaRow, Target::ZetaBar, Target::DeltaGroup];
    let recs: Vec<Record> = (0..600)
        .map(|i| {
            let e: f64 = rng.random_range(-1.0..1.0);
            let w: f64 = rng.random_range(0.0..0.8);
            record(targets[i % 3], e, e - w, e + w, rng.random_range(-1.0..1.0))
        })
        .collect();
    let agg = aggregate(&recs);
    for a in &agg {
        let (mut n, mut cov, mut s, mut sq, mut len) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for r in recs.iter().filter(|r| r.target == a.target) {
            n += 1.0;
            cov += if r.covered { 1.0 } else { 0.0 };
            s += r.estimate - r.true_value;
            sq += (r.estimate - r.true_value) * (r.estimate - r.true_value);
            len += r.hi - r.lo;
        }
        assert!((a.coverage - cov / n).abs() < 1e-12);
        assert!((a.bias - (s / n).abs()).abs() < 1e-12);
        assert!((a.rmse - (sq / n).sqrt()).abs() < 1e-12);
        assert!((a.length - len / n).abs() < 1e-12);
        assert!(a.rmse >= a.bias && (0.0..=1.0).contains(&a.coverage));
    }
}

fn quick_bcmf() -> BcmfConfig {
    let mut cfg = desk_bcmf_config();
    cfg.mu = ForestSpec::new(10, 0.95, 2.0, 2.0);
    cfg.mu_m = cfg.mu;
    cfg.burn_in = 40;
    cfg.n_samples = 40;
    cfg.clever.burn_in = 20;
    cfg.clever.n_samples = 20;
    cfg
}

fn small_spec() -> StudySpec {
    StudySpec {
        truths: vec![TruthKind::Lsem, TruthKind::BcmfLike],
        n_train: 120,
        n_test: 60,
        replications: 2,
        bootstrap: 100,
        seed: 21,
        bcmf: quick_bcmf(),
        ..StudySpec::default()
    }
}

#[test]
fn study_is_deterministic_and_labelled() {
    let spec = small_spec();
    let a = run_study(&spec).unwrap();
    let b = run_study(&spec).unwrap();
    let bytes = |r: &SimReport| {
        let mut v = Vec::new();
        r.write_records(&mut v).unwrap();
        r.write_aggregates(&mut v).unwrap();
        r.write_heldout(&mut v).unwrap();
        v
    };
    assert_eq!(bytes(&a), bytes(&b));
    assert!(a.failures.is_empty());
    assert_eq!(a.label, REPORT_LABEL);
    let mut head = Vec::new();
    a.write_aggregates(&mut head).unwrap();
    assert!(String::from_utf8(head).unwrap().starts_with(&format!("# {REPORT_LABEL}\n")));
    for truth in [TruthKind::Lsem, TruthKind::BcmfLike] {
        for method in [Method::Bcmf, Method::Lsem] {
            assert_eq!(a.records_for(truth, method, Target::DeltaRow).count(), 2 * 60);
            assert_eq!(a.records_for(truth, method, Target::ZetaBar).count(), 2);
            assert!(a.records_for(truth, method, Target::DeltaGroup).count() >= 2 * 2);
            assert!(a.records_for(truth, method, Target::DeltaDynamic).count() >= 2);
        }
    }
    assert_eq!(a.aggregates, aggregate(&a.records));
    assert_eq!(a.heldout.len(), 2 * 2 * 2);
}

#[test]
fn replications_do_not_depend_on_the_study_size() {
    let spec = StudySpec {
        truths: vec![TruthKind::Lsem],
        methods: vec![Method::Lsem],
        ..small_spec()
    };
    let longer = StudySpec { replications: 3, ..spec.clone() };
    let a = run_study(&spec).unwrap();
    let b = run_study(&longer).unwrap();
    let first = |r: &SimReport| r.records.iter().filter(|x| x.replication < 2).cloned().collect::<Vec<_>>();
    assert_eq!(first(&a), first(&b));
}

#[test]
fn fixed_groups_use_levels_or_the_median() {
    let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64, (i % 3) as f64]).collect();
    let x = Covariates::from_rows(&rows).unwrap();
    let (l, k) = fixed_groups(&x, 1);
    assert_eq!(k, 3);
    assert!(l.iter().enumerate().all(|(i, &g)| g == i % 3));
    let (l, k) = fixed_groups(&x, 0);
    assert_eq!(k, 2);
    assert_eq!(l.iter().filter(|&&g| g == 1).count(), 20);
}

#[test]
fn bcmf_like_truth_is_mildly_heterogeneous() {
    let t = GroundTruth::from_kind(TruthKind::BcmfLike, Profile::Heterogeneous, CovariateSpec::default(), 1.0, 1.0, &mut ChaCha8Rng::seed_from_u64(16)).unwrap();
    let x = CovariateSpec::default().sample(500, &mut ChaCha8Rng::seed_from_u64(17)).unwrap();
    let (z, d) = t.true_effects(&x);
    for v in [&z, &d] {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert!(hi - lo <= 0.4 + 1e-12);
    }
    let _: &MediationData = &generate_dataset(&t, 60, &mut ChaCha8Rng::seed_from_u64(18)).unwrap().data;
}
