//! Replicated comparison of the mediation forest and the linear baseline.

use std::collections::BTreeMap;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::lsem::lsem_residual_bootstrap;
use super::truth::{CovariateSpec, GroundTruth, Profile, TruthKind};
use crate::data::{Covariates, MediationData};
use crate::effects::{bayesian_bootstrap_averages, conditional_effects, effects_from_functions};
use crate::error::{Error, Result};
use crate::mediation::{fit_bcmf_with_test, BcmfConfig, CleverConfig, DrawMatrix, ResponseKind};
use crate::stats::{correlation, quantile_sorted};
use crate::summaries::{fit_cart, CartConfig};
use crate::tree::ForestSpec;

/// Printed with every report: these studies are small synthetic stand-ins,
/// not reproductions of any published table.
pub const REPORT_LABEL: &str = "desk-scale synthetic analogue";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Bcmf,
    Lsem,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    DeltaRow,
    ZetaRow,
    DeltaBar,
    ZetaBar,
    DeltaGroup,
    ZetaGroup,
    DeltaDynamic,
    ZetaDynamic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StudySpec {
    pub truths: Vec<TruthKind>,
    pub profile: Profile,
    pub methods: Vec<Method>,
    pub n_train: usize,
    pub n_test: usize,
    pub replications: usize,
    pub seed: u64,
    /// Residual-bootstrap replicates for the linear baseline.
    pub bootstrap: usize,
    pub sigma: f64,
    pub sigma_m: f64,
    pub covariates: CovariateSpec,
    /// Column whose levels (or median split, for many-valued columns)
    /// define the fixed subgroups of the test rows.
    pub subgroup_column: Option<usize>,
    /// Also score subgroups given by a CART summary of each fit's point
    /// estimates of `delta(x)`.
    pub dynamic_subgroups: bool,
    pub bcmf: BcmfConfig,
}

impl Default for StudySpec {
    fn default() -> Self {
        Self {
            truths: vec![TruthKind::Lsem],
            profile: Profile::Heterogeneous,
            methods: vec![Method::Bcmf, Method::Lsem],
            n_train: 500,
            n_test: 500,
            replications: 100,
            seed: 0,
            bootstrap: 200,
            sigma: 1.0,
            sigma_m: 1.0,
            covariates: CovariateSpec::default(),
            subgroup_column: Some(5),
            dynamic_subgroups: true,
            bcmf: desk_bcmf_config(),
        }
    }
}

/// Smaller forests and chains than the package defaults, sized for studies
/// with hundreds of fits. Effect forests use `alpha = 0.25, beta = 3`.
pub fn desk_bcmf_config() -> BcmfConfig {
    let effect = ForestSpec::new(20, 0.25, 3.0, 2.0);
    BcmfConfig {
        mu: ForestSpec::new(50, 0.95, 2.0, 2.0),
        mu_m: ForestSpec::new(50, 0.95, 2.0, 2.0),
        zeta: effect,
        d: effect,
        tau_m: effect,
        burn_in: 400,
        n_samples: 400,
        n_chains: 1,
        clever: CleverConfig {
            forest: ForestSpec::new(50, 0.95, 2.0, 2.0),
            burn_in: 100,
            n_samples: 100,
            thin: 4,
        },
        ..BcmfConfig::default()
    }
}

impl StudySpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("study: {m}")));
        if self.truths.is_empty() || self.methods.is_empty() {
            return bad("at least one truth and one method are required");
        }
        if self.n_train < 50 || self.n_test == 0 {
            return bad("n_train must be at least 50 and n_test positive");
        }
        if self.replications == 0 {
            return bad("replications must be positive");
        }
        if self.methods.contains(&Method::Lsem) && self.bootstrap < 100 {
            return bad("bootstrap must be at least 100");
        }
        if !(self.sigma >= 0.0 && self.sigma_m >= 0.0) {
            return bad("noise sds must be non-negative");
        }
        if self.subgroup_column.is_some_and(|j| j >= self.covariates.n_cols()) {
            return bad("subgroup_column is out of range");
        }
        if self.bcmf.outcome_kind != ResponseKind::Continuous || self.bcmf.mediator_kind != ResponseKind::Continuous {
            return bad("simulated responses are continuous");
        }
        self.bcmf.validate()
    }
}

/// One scored interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub truth: TruthKind,
    pub method: Method,
    pub replication: usize,
    pub target: Target,
    /// Test row, subgroup index or 0 for averages.
    pub unit: usize,
    pub estimate: f64,
    pub lo: f64,
    pub hi: f64,
    pub true_value: f64,
    pub covered: bool,
    pub length: f64,
}

impl Record {
    fn new(key: (TruthKind, Method, usize), target: Target, unit: usize, estimate: f64, draws: &mut [f64], true_value: f64) -> Self {
        draws.sort_by(f64::total_cmp);
        let (lo, hi) = (quantile_sorted(draws, 0.025), quantile_sorted(draws, 0.975));
        Self {
            truth: key.0,
            method: key.1,
            replication: key.2,
            target,
            unit,
            estimate,
            lo,
            hi,
            true_value,
            covered: lo <= true_value && true_value <= hi,
            length: hi - lo,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub truth: TruthKind,
    pub method: Method,
    pub target: Target,
    pub count: usize,
    pub coverage: f64,
    pub rmse: f64,
    pub bias: f64,
    pub length: f64,
}

/// Pools every record of a `(truth, method, target)` cell:
/// coverage = mean(covered), bias = |mean(est - truth)|,
/// RMSE = sqrt(mean((est - truth)²)), length = mean(hi - lo).
pub fn aggregate(records: &[Record]) -> Vec<Aggregate> {
    let mut cells: BTreeMap<(TruthKind, Method, Target), (usize, f64, f64, f64, f64)> = BTreeMap::new();
    for r in records {
        let e = cells.entry((r.truth, r.method, r.target)).or_default();
        let err = r.estimate - r.true_value;
        e.0 += 1;
        e.1 += f64::from(u8::from(r.covered));
        e.2 += err;
        e.3 += err * err;
        e.4 += r.length;
    }
    cells
        .into_iter()
        .map(|((truth, method, target), (c, cov, s, sq, len))| {
            let n = c as f64;
            Aggregate {
                truth,
                method,
                target,
                count: c,
                coverage: cov / n,
                rmse: (sq / n).sqrt(),
                bias: (s / n).abs(),
                length: len / n,
            }
        })
        .collect()
}

/// Held-out prediction quality on the test rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Heldout {
    pub truth: TruthKind,
    pub method: Method,
    pub replication: usize,
    pub rmse_m: f64,
    pub rmse_y: f64,
    pub cor_m: f64,
    pub cor_y: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub truth: TruthKind,
    pub method: Option<Method>,
    pub replication: usize,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub label: String,
    pub spec: StudySpec,
    pub records: Vec<Record>,
    pub aggregates: Vec<Aggregate>,
    pub heldout: Vec<Heldout>,
    pub failures: Vec<Failure>,
}

impl SimReport {
    pub fn aggregate_for(&self, truth: TruthKind, method: Method, target: Target) -> Option<&Aggregate> {
        self.aggregates
            .iter()
            .find(|a| a.truth == truth && a.method == method && a.target == target)
    }

    pub fn records_for(&self, truth: TruthKind, method: Method, target: Target) -> impl Iterator<Item = &Record> {
        self.records
            .iter()
            .filter(move |r| r.truth == truth && r.method == method && r.target == target)
    }

    pub fn write_records<W: Write>(&self, w: W) -> Result<()> {
        write_csv(w, &self.records)
    }

    pub fn write_heldout<W: Write>(&self, w: W) -> Result<()> {
        write_csv(w, &self.heldout)
    }

    /// Aggregate table with the label as a leading comment line.
    pub fn write_aggregates<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# {}", self.label)?;
        write_csv(w, &self.aggregates)
    }
}

fn write_csv<W: Write, T: Serialize>(w: W, rows: &[T]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

/// Effect draws of one method, all on the same layout.
struct MethodDraws {
    zeta_rows: DrawMatrix,
    delta_rows: DrawMatrix,
    zeta_bar: Vec<f64>,
    delta_bar: Vec<f64>,
    zeta_point: Vec<f64>,
    delta_point: Vec<f64>,
    zeta_bar_point: f64,
    delta_bar_point: f64,
    pred_m: Vec<f64>,
    pred_y: Vec<f64>,
}

/// Exact effects of one truth on the shared covariates.
struct TruthValues {
    zeta_test: Vec<f64>,
    delta_test: Vec<f64>,
    zeta_bar: f64,
    delta_bar: f64,
}

fn bcmf_draws<R: Rng + ?Sized>(
    spec: &StudySpec,
    train: &MediationData,
    test: &MediationData,
    rng: &mut R,
) -> Result<MethodDraws> {
    let cfg = BcmfConfig {
        seed: rng.random(),
        ..spec.bcmf.clone()
    };
    let fit = fit_bcmf_with_test(train, &cfg, Some(&test.x))?;
    let f = fit.test.as_ref().ok_or(Error::MissingForests)?;
    let eff = effects_from_functions(f, &fit.sigma_m2, ResponseKind::Continuous, ResponseKind::Continuous)?;
    let avg = bayesian_bootstrap_averages(&conditional_effects(&fit)?, rng)?;
    let n = test.n();
    let (mut pred_m, mut pred_y) = (vec![0.0; n], vec![0.0; n]);
    let k = f.n_draws() as f64;
    for s in 0..f.n_draws() {
        let (mu, ze, d, mm, tm) = (f.mu.row(s), f.zeta.row(s), f.d.row(s), f.mu_m.row(s), f.tau_m.row(s));
        for i in 0..n {
            pred_m[i] += (mm[i] + test.a[i] * tm[i]) / k;
            pred_y[i] += (mu[i] + test.a[i] * ze[i] + test.m[i] * d[i]) / k;
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(MethodDraws {
        zeta_point: eff.zeta.column_means(),
        delta_point: eff.delta.column_means(),
        zeta_bar_point: mean(&avg.zeta),
        delta_bar_point: mean(&avg.delta),
        zeta_rows: eff.zeta,
        delta_rows: eff.delta,
        zeta_bar: avg.zeta,
        delta_bar: avg.delta,
        pred_m,
        pred_y,
    })
}

fn lsem_draws<R: Rng + ?Sized>(spec: &StudySpec, train: &MediationData, test: &MediationData, rng: &mut R) -> Result<MethodDraws> {
    let bs = lsem_residual_bootstrap(train, &test.x, spec.bootstrap, rng)?;
    let p = &bs.point;
    let (zeta_point, delta_point) = p.effects(&test.x);
    let (zt, dt) = p.effects(&train.x);
    let n = train.n() as f64;
    let (pred_m, pred_y) = (0..test.n())
        .map(|i| {
            let r = test.x.row(i);
            (p.predict_mediator(&r, test.a[i]), p.predict_outcome(&r, test.a[i], test.m[i]))
        })
        .unzip();
    Ok(MethodDraws {
        zeta_point,
        delta_point,
        zeta_bar_point: zt.iter().sum::<f64>() / n,
        delta_bar_point: dt.iter().sum::<f64>() / n,
        zeta_rows: bs.zeta_rows,
        delta_rows: bs.delta_rows,
        zeta_bar: bs.zeta_bar,
        delta_bar: bs.delta_bar,
        pred_m,
        pred_y,
    })
}

/// Fixed subgroup labels: one group per level for columns with at most ten
/// distinct values, otherwise a split at the median.
pub fn fixed_groups(x: &Covariates, column: usize) -> (Vec<usize>, usize) {
    let levels = x.uniques(column);
    let col = x.column(column);
    if levels.len() <= 10 {
        let labels = col
            .iter()
            .map(|v| levels.partition_point(|l| l < v))
            .collect();
        (labels, levels.len())
    } else {
        let median = crate::stats::quantile(col, 0.5);
        (col.iter().map(|&v| usize::from(v > median)).collect(), 2)
    }
}

fn group_means(values: &[f64], labels: &[usize], n_groups: usize) -> Vec<f64> {
    let mut s = vec![0.0; n_groups];
    let mut c = vec![0usize; n_groups];
    for (&v, &g) in values.iter().zip(labels) {
        s[g] += v;
        c[g] += 1;
    }
    s.iter().zip(&c).map(|(s, &c)| s / c as f64).collect()
}

fn score_groups(
    out: &mut Vec<Record>,
    key: (TruthKind, Method, usize),
    targets: (Target, Target),
    draws: &MethodDraws,
    truth: &TruthValues,
    labels: &[usize],
    n_groups: usize,
) {
    let tz = group_means(&truth.zeta_test, labels, n_groups);
    let td = group_means(&truth.delta_test, labels, n_groups);
    let pz = group_means(&draws.zeta_point, labels, n_groups);
    let pd = group_means(&draws.delta_point, labels, n_groups);
    let dz: Vec<Vec<f64>> = draws.zeta_rows.rows().map(|r| group_means(r, labels, n_groups)).collect();
    let dd: Vec<Vec<f64>> = draws.delta_rows.rows().map(|r| group_means(r, labels, n_groups)).collect();
    for g in 0..n_groups {
        let mut zg: Vec<f64> = dz.iter().map(|v| v[g]).collect();
        let mut dg: Vec<f64> = dd.iter().map(|v| v[g]).collect();
        out.push(Record::new(key, targets.0, g, pd[g], &mut dg, td[g]));
        out.push(Record::new(key, targets.1, g, pz[g], &mut zg, tz[g]));
    }
}

fn score(spec: &StudySpec, key: (TruthKind, Method, usize), draws: &MethodDraws, truth: &TruthValues, x_test: &Covariates) -> Result<Vec<Record>> {
    let mut out = Vec::new();
    for i in 0..x_test.n_rows() {
        out.push(Record::new(key, Target::DeltaRow, i, draws.delta_point[i], &mut draws.delta_rows.column(i), truth.delta_test[i]));
        out.push(Record::new(key, Target::ZetaRow, i, draws.zeta_point[i], &mut draws.zeta_rows.column(i), truth.zeta_test[i]));
    }
    out.push(Record::new(key, Target::DeltaBar, 0, draws.delta_bar_point, &mut draws.delta_bar.clone(), truth.delta_bar));
    out.push(Record::new(key, Target::ZetaBar, 0, draws.zeta_bar_point, &mut draws.zeta_bar.clone(), truth.zeta_bar));
    if let Some(col) = spec.subgroup_column {
        let (labels, k) = fixed_groups(x_test, col);
        score_groups(&mut out, key, (Target::DeltaGroup, Target::ZetaGroup), draws, truth, &labels, k);
    }
    if spec.dynamic_subgroups {
        let tree = fit_cart(&draws.delta_point, x_test, &CartConfig::default())?;
        let labels = tree.leaf_labels(x_test);
        score_groups(&mut out, key, (Target::DeltaDynamic, Target::ZetaDynamic), draws, truth, &labels, tree.n_leaves());
    }
    Ok(out)
}

fn rmse(a: &[f64], b: &[f64]) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64).sqrt()
}

struct ReplicationOutput {
    records: Vec<Record>,
    heldout: Vec<Heldout>,
    failures: Vec<Failure>,
}

fn replicate(
    spec: &StudySpec,
    truth: &GroundTruth,
    values: &TruthValues,
    x_train: &Covariates,
    x_test: &Covariates,
    rep: usize,
    mut rng: ChaCha8Rng,
) -> ReplicationOutput {
    let mut out = ReplicationOutput {
        records: Vec::new(),
        heldout: Vec::new(),
        failures: Vec::new(),
    };
    let fail = |method, e: Error| Failure {
        truth: truth.kind,
        method,
        replication: rep,
        message: e.to_string(),
    };
    let data = truth
        .generate_outcomes(x_train, &mut rng)
        .and_then(|train| Ok((train, truth.generate_outcomes(x_test, &mut rng)?)));
    let (train, test) = match data {
        Ok(d) => d,
        Err(e) => {
            out.failures.push(fail(None, e));
            return out;
        }
    };
    for &method in &spec.methods {
        let draws = match method {
            Method::Bcmf => bcmf_draws(spec, &train, &test, &mut rng),
            Method::Lsem => lsem_draws(spec, &train, &test, &mut rng),
        };
        let key = (truth.kind, method, rep);
        match draws.and_then(|d| Ok((score(spec, key, &d, values, x_test)?, d))) {
            Ok((records, d)) => {
                out.records.extend(records);
                out.heldout.push(Heldout {
                    truth: truth.kind,
                    method,
                    replication: rep,
                    rmse_m: rmse(&d.pred_m, &test.m),
                    rmse_y: rmse(&d.pred_y, &test.y),
                    cor_m: correlation(&d.pred_m, &test.m),
                    cor_y: correlation(&d.pred_y, &test.y),
                });
            }
            Err(e) => {
                log::warn!("replication {rep} ({method:?}, {}): {e}", truth.kind.label());
                out.failures.push(fail(Some(method), e));
            }
        }
    }
    out
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Runs every replication of every truth. Stream 0 of the seed draws the
/// truth surfaces and the shared train/test covariates; each replication
/// owns a separate stream, so results do not depend on scheduling.
pub fn run_study(spec: &StudySpec) -> Result<SimReport> {
    spec.validate()?;
    let mut setup = stream_rng(spec.seed, 0);
    let truths = spec
        .truths
        .iter()
        .map(|&k| GroundTruth::from_kind(k, spec.profile, spec.covariates.clone(), spec.sigma, spec.sigma_m, &mut setup))
        .collect::<Result<Vec<_>>>()?;
    let x_train = spec.covariates.sample(spec.n_train, &mut setup)?;
    let x_test = spec.covariates.sample(spec.n_test, &mut setup)?;

    let mut report = SimReport {
        label: REPORT_LABEL.to_string(),
        spec: spec.clone(),
        records: Vec::new(),
        aggregates: Vec::new(),
        heldout: Vec::new(),
        failures: Vec::new(),
    };
    for (t, truth) in truths.iter().enumerate() {
        let (zeta_test, delta_test) = truth.true_effects(&x_test);
        let (zt, dt) = truth.true_effects(&x_train);
        let n = spec.n_train as f64;
        let values = TruthValues {
            zeta_test,
            delta_test,
            zeta_bar: zt.iter().sum::<f64>() / n,
            delta_bar: dt.iter().sum::<f64>() / n,
        };
        log::info!("{}: {} replications", truth.kind.label(), spec.replications);
        let outputs: Vec<ReplicationOutput> = (0..spec.replications)
            .into_par_iter()
            .map(|rep| {
                let stream = 1 + (t * spec.replications + rep) as u64;
                replicate(spec, truth, &values, &x_train, &x_test, rep, stream_rng(spec.seed, stream))
            })
            .collect();
        for o in outputs {
            report.records.extend(o.records);
            report.heldout.extend(o.heldout);
            report.failures.extend(o.failures);
        }
    }
    report.aggregates = aggregate(&report.records);
    Ok(report)
}
