//! Delimited effect and summary tables.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::effects::{AverageDraws, EffectDraws};
use crate::error::{Error, Result};
use crate::mediation::DrawMatrix;
use crate::stats::{summarize, Summary};
use crate::summaries::{ComponentPoint, PosteriorSummary, Surrogate};

/// One line of the long-format effect table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectRow {
    pub draw: usize,
    pub row: usize,
    pub zeta: f64,
    pub delta: f64,
    pub tau: f64,
}

/// `draws × rows` lines, draw-major.
pub fn write_effect_draws<W: Write>(effects: &EffectDraws, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for s in 0..effects.n_draws() {
        let (z, d, t) = (effects.zeta.row(s), effects.delta.row(s), effects.tau.row(s));
        for i in 0..effects.n_rows() {
            wr.serialize(EffectRow {
                draw: s,
                row: i,
                zeta: z[i],
                delta: d[i],
                tau: t[i],
            })?;
        }
    }
    wr.flush()?;
    Ok(())
}

/// Reads a table written by [`write_effect_draws`].
pub fn read_effect_draws<R: Read>(r: R) -> Result<EffectDraws> {
    let mut rd = csv::Reader::from_reader(r);
    let rows = rd.deserialize::<EffectRow>().collect::<std::result::Result<Vec<_>, _>>()?;
    let n = rows.iter().map(|r| r.row + 1).max().unwrap_or(0);
    if n == 0 || rows.len() % n != 0 {
        return Err(Error::Format("effect table is empty or ragged".into()));
    }
    let k = rows.len() / n;
    let (mut z, mut d, mut t) = (vec![0.0; k * n], vec![0.0; k * n], vec![0.0; k * n]);
    for (pos, r) in rows.iter().enumerate() {
        if r.draw != pos / n || r.row != pos % n {
            return Err(Error::Format(format!("effect table line {} is out of order", pos + 2)));
        }
        (z[pos], d[pos], t[pos]) = (r.zeta, r.delta, r.tau);
    }
    Ok(EffectDraws {
        zeta: DrawMatrix::from_vec(n, z)?,
        delta: DrawMatrix::from_vec(n, d)?,
        tau: DrawMatrix::from_vec(n, t)?,
    })
}

#[derive(Serialize)]
struct AverageRow {
    draw: usize,
    zeta_bar: f64,
    delta_bar: f64,
    tau_bar: f64,
}

pub fn write_average_draws<W: Write>(avg: &AverageDraws, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for s in 0..avg.zeta.len() {
        wr.serialize(AverageRow {
            draw: s,
            zeta_bar: avg.zeta[s],
            delta_bar: avg.delta[s],
            tau_bar: avg.tau[s],
        })?;
    }
    wr.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub quantity: String,
    pub mean: f64,
    pub sd: f64,
    pub q025: f64,
    pub q975: f64,
}

impl SummaryRow {
    pub fn new(quantity: impl Into<String>, draws: &[f64]) -> Self {
        let Summary { mean, sd, lo, hi } = summarize(draws);
        Self {
            quantity: quantity.into(),
            mean,
            sd,
            q025: lo,
            q975: hi,
        }
    }
}

/// Posterior mean, sd and 2.5%/97.5% quantiles of the three averages.
pub fn average_summaries(avg: &AverageDraws) -> Vec<SummaryRow> {
    vec![
        SummaryRow::new("zeta_bar", &avg.zeta),
        SummaryRow::new("delta_bar", &avg.delta),
        SummaryRow::new("tau_bar", &avg.tau),
    ]
}

pub fn write_summaries<W: Write>(rows: &[SummaryRow], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct RowSummary {
    row: usize,
    zeta_mean: f64,
    zeta_q025: f64,
    zeta_q975: f64,
    delta_mean: f64,
    delta_q025: f64,
    delta_q975: f64,
}

/// Per-row posterior means and 95% intervals.
pub fn write_row_summaries<W: Write>(effects: &EffectDraws, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for i in 0..effects.n_rows() {
        let z = summarize(&effects.zeta.column(i));
        let d = summarize(&effects.delta.column(i));
        wr.serialize(RowSummary {
            row: i,
            zeta_mean: z.mean,
            zeta_q025: z.lo,
            zeta_q975: z.hi,
            delta_mean: d.mean,
            delta_q025: d.lo,
            delta_q975: d.hi,
        })?;
    }
    wr.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct RSquaredRow {
    draw: usize,
    r_squared: f64,
    converged: bool,
}

pub fn write_r_squared<W: Write>(summary: &PosteriorSummary, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for (s, r) in summary.per_draw.iter().enumerate() {
        wr.serialize(RSquaredRow {
            draw: s,
            r_squared: r.r_squared.value,
            converged: r.converged,
        })?;
    }
    wr.flush()?;
    Ok(())
}

pub fn write_components<W: Write>(points: &[ComponentPoint], names: &[String], w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["variable", "grid", "value", "q025", "q975"])?;
    for p in points {
        let name = names.get(p.variable).cloned().unwrap_or_else(|| format!("x{}", p.variable + 1));
        wr.write_record([name, p.grid.to_string(), p.value.to_string(), p.lo.to_string(), p.hi.to_string()])?;
    }
    wr.flush()?;
    Ok(())
}

/// Text report of the posterior-mean surrogate: the tree and its rules for
/// CART, the intercept and convergence for the additive model.
pub fn render_surrogate(summary: &PosteriorSummary, names: &[String]) -> String {
    let name = |v: usize| names.get(v).cloned().unwrap_or_else(|| format!("x{}", v + 1));
    let r2 = summarize(&summary.r_squared);
    let mut s = format!(
        "summary R² of the posterior-mean fit: {:.4}\nper-draw summary R²: mean {:.4}, 95% interval [{:.4}, {:.4}]\n\n",
        summary.reference.r_squared.value, r2.mean, r2.lo, r2.hi
    );
    match &summary.reference.surrogate {
        Surrogate::Tree(tree) => {
            s.push_str(&tree.render(names));
            s.push_str("\nrules:\n");
            for rule in tree.rules() {
                let conds: Vec<String> = rule
                    .conditions
                    .iter()
                    .map(|&(v, left, c)| format!("{} {} {c:.6}", name(v), if left { "<=" } else { ">" }))
                    .collect();
                let lhs = if conds.is_empty() { "all rows".to_string() } else { conds.join(" and ") };
                s.push_str(&format!("  {lhs} => {:.6} (n = {})\n", rule.value, rule.n));
            }
        }
        Surrogate::Additive(fit) => {
            s.push_str(&format!(
                "additive fit: intercept {:.6}, {} backfitting cycles, converged: {}\n",
                fit.intercept, fit.iterations, fit.converged
            ));
        }
    }
    s
}
