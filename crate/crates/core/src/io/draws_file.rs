//! Versioned binary container for a fitted model.
//!
//! Layout: the 8-byte magic `BCMFDRAW`, a little-endian `u32` format
//! version, a `u64` header length and a JSON header, followed by
//! little-endian sections in a fixed order:
//!
//! 1. training draws of `mu, zeta, d, mu_m, tau_m` (`n_draws × n_rows` each),
//! 2. `sigma2` and `sigma_m2`,
//! 3. test-row draws, when present,
//! 4. training clever covariates `pi_hat, m0_hat, m1_hat`, when present,
//! 5. the auxiliary models, when present,
//! 6. per-draw forests, when kept.
//!
//! Forests are written as preorder node lists, so reading and writing again
//! reproduces the file byte for byte.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mediation::{
    AuxiliaryModel, BcmfConfig, CleverCovariates, CleverModels, DrawForests, DrawMatrix, FunctionDraws,
    MediationFit, ResponseKind, Standardization,
};
use crate::tree::{DecisionTree, Forest, MoveCounts, PreorderNode, SplitRule, TreePrior};

pub const MAGIC: &[u8; 8] = b"BCMFDRAW";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DrawsHeader {
    pub format_version: u32,
    pub config: BcmfConfig,
    pub standardization: Standardization,
    pub covariate_names: Vec<String>,
    pub n_rows: usize,
    pub n_draws: usize,
    pub n_chains: usize,
    pub n_samples: usize,
    pub n_test_rows: Option<usize>,
    pub has_clever: bool,
    pub has_forests: bool,
    pub moves: [MoveCounts; 5],
}

struct Writer<W: Write> {
    w: W,
}

impl<W: Write> Writer<W> {
    fn u8(&mut self, v: u8) -> Result<()> {
        self.w.write_all(&[v])?;
        Ok(())
    }

    fn u32(&mut self, v: u32) -> Result<()> {
        self.w.write_all(&v.to_le_bytes())?;
        Ok(())
    }

    fn len(&mut self, v: usize) -> Result<()> {
        let v = u32::try_from(v).map_err(|_| Error::Format(format!("count {v} does not fit in u32")))?;
        self.u32(v)
    }

    fn f64(&mut self, v: f64) -> Result<()> {
        self.w.write_all(&v.to_le_bytes())?;
        Ok(())
    }

    fn f64s(&mut self, v: &[f64]) -> Result<()> {
        for &x in v {
            self.f64(x)?;
        }
        Ok(())
    }

    fn functions(&mut self, f: &FunctionDraws) -> Result<()> {
        for m in [&f.mu, &f.zeta, &f.d, &f.mu_m, &f.tau_m] {
            self.f64s(m.as_slice())?;
        }
        Ok(())
    }

    fn forest(&mut self, f: &Forest) -> Result<()> {
        self.f64(f.leaf_sd)?;
        self.f64(f.tree_prior.alpha)?;
        self.f64(f.tree_prior.beta)?;
        self.len(f.trees.len())?;
        for t in &f.trees {
            let nodes = t.to_preorder();
            self.len(nodes.len())?;
            for n in nodes {
                match n {
                    PreorderNode::Leaf(v) => {
                        self.u8(0)?;
                        self.f64(v)?;
                    }
                    PreorderNode::Split(rule) => {
                        self.u8(1)?;
                        self.len(rule.variable)?;
                        self.f64(rule.cutpoint)?;
                    }
                }
            }
        }
        Ok(())
    }

    fn auxiliary(&mut self, m: &AuxiliaryModel) -> Result<()> {
        self.u8(match m.kind {
            ResponseKind::Continuous => 0,
            ResponseKind::Binary => 1,
        })?;
        self.f64(m.center)?;
        self.f64(m.scale)?;
        self.len(m.snapshots.len())?;
        for f in &m.snapshots {
            self.forest(f)?;
        }
        Ok(())
    }
}

struct Reader<R: Read> {
    r: R,
}

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.r
            .read_exact(&mut b)
            .map_err(|e| Error::Format(format!("unexpected end of file: {e}")))?;
        Ok(b)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.bytes::<1>()?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }

    fn len(&mut self) -> Result<usize> {
        Ok(self.u32()? as usize)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<DrawMatrix> {
        let v = (0..rows * cols).map(|_| self.f64()).collect::<Result<Vec<_>>>()?;
        DrawMatrix::from_vec(cols, v)
    }

    fn functions(&mut self, draws: usize, n: usize) -> Result<FunctionDraws> {
        Ok(FunctionDraws {
            mu: self.matrix(draws, n)?,
            zeta: self.matrix(draws, n)?,
            d: self.matrix(draws, n)?,
            mu_m: self.matrix(draws, n)?,
            tau_m: self.matrix(draws, n)?,
        })
    }

    fn vec(&mut self, n: usize) -> Result<Vec<f64>> {
        (0..n).map(|_| self.f64()).collect()
    }

    fn forest(&mut self) -> Result<Forest> {
        let leaf_sd = self.f64()?;
        let tree_prior = TreePrior {
            alpha: self.f64()?,
            beta: self.f64()?,
        };
        let n_trees = self.len()?;
        let mut trees = Vec::with_capacity(n_trees);
        for _ in 0..n_trees {
            let n_nodes = self.len()?;
            let mut items = Vec::with_capacity(n_nodes);
            for _ in 0..n_nodes {
                items.push(match self.u8()? {
                    0 => PreorderNode::Leaf(self.f64()?),
                    1 => PreorderNode::Split(SplitRule {
                        variable: self.len()?,
                        cutpoint: self.f64()?,
                    }),
                    t => return Err(Error::Format(format!("unknown node tag {t}"))),
                });
            }
            trees.push(DecisionTree::from_preorder(&items)?);
        }
        Ok(Forest {
            trees,
            leaf_sd,
            tree_prior,
        })
    }

    fn auxiliary(&mut self) -> Result<AuxiliaryModel> {
        let kind = match self.u8()? {
            0 => ResponseKind::Continuous,
            1 => ResponseKind::Binary,
            t => return Err(Error::Format(format!("unknown response kind {t}"))),
        };
        let center = self.f64()?;
        let scale = self.f64()?;
        let n = self.len()?;
        let snapshots = (0..n).map(|_| self.forest()).collect::<Result<Vec<_>>>()?;
        Ok(AuxiliaryModel {
            kind,
            center,
            scale,
            snapshots,
        })
    }
}

pub fn write_draws<W: Write>(fit: &MediationFit, w: W) -> Result<()> {
    let header = DrawsHeader {
        format_version: FORMAT_VERSION,
        config: fit.config.clone(),
        standardization: fit.standardization,
        covariate_names: fit.covariate_names.clone(),
        n_rows: fit.train.n_rows(),
        n_draws: fit.n_draws(),
        n_chains: fit.n_chains(),
        n_samples: fit.n_samples(),
        n_test_rows: fit.test.as_ref().map(FunctionDraws::n_rows),
        has_clever: fit.clever.is_some() && fit.clever_train.is_some(),
        has_forests: fit.forests.is_some(),
        moves: fit.moves,
    };
    let json = serde_json::to_vec(&header)?;
    let mut out = Writer { w };
    out.w.write_all(MAGIC)?;
    out.u32(FORMAT_VERSION)?;
    out.w.write_all(&(json.len() as u64).to_le_bytes())?;
    out.w.write_all(&json)?;
    out.functions(&fit.train)?;
    out.f64s(&fit.sigma2)?;
    out.f64s(&fit.sigma_m2)?;
    if let Some(t) = &fit.test {
        out.functions(t)?;
    }
    if let (true, Some(c), Some(models)) = (header.has_clever, &fit.clever_train, &fit.clever) {
        out.f64s(&c.pi_hat)?;
        out.f64s(&c.m0_hat)?;
        out.f64s(&c.m1_hat)?;
        out.auxiliary(&models.propensity)?;
        out.auxiliary(&models.mediator)?;
    }
    if let Some(forests) = &fit.forests {
        for draw in forests {
            for f in draw.iter() {
                out.forest(f)?;
            }
        }
    }
    out.w.flush()?;
    Ok(())
}

/// Reads only the header, checking the magic and version.
pub fn read_header<R: Read>(r: &mut R) -> Result<DrawsHeader> {
    let mut rd = Reader { r };
    let magic: [u8; 8] = rd.bytes()?;
    if &magic != MAGIC {
        return Err(Error::Format("not a draws file (bad magic bytes)".into()));
    }
    let version = rd.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            supported: FORMAT_VERSION,
        });
    }
    let len = u64::from_le_bytes(rd.bytes()?) as usize;
    let mut json = vec![0u8; len];
    rd.r.read_exact(&mut json)
        .map_err(|e| Error::Format(format!("truncated header: {e}")))?;
    let header: DrawsHeader = serde_json::from_slice(&json)?;
    if header.format_version != version {
        return Err(Error::Format("header version disagrees with the file version".into()));
    }
    Ok(header)
}

pub fn read_draws<R: Read>(mut r: R) -> Result<MediationFit> {
    let h = read_header(&mut r)?;
    let mut rd = Reader { r };
    let (k, n) = (h.n_draws, h.n_rows);
    if h.n_chains * h.n_samples != k {
        return Err(Error::Format("chain layout does not match the number of draws".into()));
    }
    let train = rd.functions(k, n)?;
    let sigma2 = rd.vec(k)?;
    let sigma_m2 = rd.vec(k)?;
    let test = match h.n_test_rows {
        Some(nt) => Some(rd.functions(k, nt)?),
        None => None,
    };
    let (clever, clever_train) = if h.has_clever {
        let cov = CleverCovariates {
            pi_hat: rd.vec(n)?,
            m0_hat: rd.vec(n)?,
            m1_hat: rd.vec(n)?,
        };
        let models = CleverModels {
            propensity: rd.auxiliary()?,
            mediator: rd.auxiliary()?,
        };
        (Some(models), Some(cov))
    } else {
        (None, None)
    };
    let forests = if h.has_forests {
        let mut v = Vec::with_capacity(k);
        for _ in 0..k {
            v.push(DrawForests {
                mu: rd.forest()?,
                zeta: rd.forest()?,
                d: rd.forest()?,
                mu_m: rd.forest()?,
                tau_m: rd.forest()?,
            });
        }
        Some(v)
    } else {
        None
    };
    let mut rest = [0u8; 1];
    if rd.r.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after the last section".into()));
    }
    Ok(MediationFit {
        config: h.config,
        standardization: h.standardization,
        covariate_names: h.covariate_names,
        train,
        test,
        sigma2,
        sigma_m2,
        forests,
        clever,
        clever_train,
        moves: h.moves,
    })
}
