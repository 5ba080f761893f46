//! GMM estimation of the bargaining weight `phi`.
//!
//! An exporter's marginal cost is common to all its buyers, so the log price
//! gap between two buyers of the same exporter, product and year equals the
//! gap in log bilateral markups plus idiosyncratic noise. The residual
//!
//! ```text
//! g(phi) = ln p_a - ln p_b - [ln mu(phi; a) - ln mu(phi; b)]
//! ```
//!
//! is interacted with instruments and the quadratic form of the mean moments
//! is minimized over `phi`.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::concentration::ShareTable;
use crate::error::{Error, Result};
use crate::model::{bilateral_markup_at, ModelParams, PairShares};
use crate::optimize::{grid, minimize_bounded, GRID_POINTS};
use crate::stats::Summary;

/// Two buyers of one exporter in one product-year.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentQuad {
    pub exporter_id: String,
    pub product: String,
    pub year: i32,
    pub importer_a: String,
    pub importer_b: String,
    /// `ln p_a - ln p_b`.
    pub log_price_diff: f64,
    pub shares_a: PairShares,
    pub shares_b: PairShares,
    pub instruments: Vec<f64>,
}

impl MomentQuad {
    pub fn hs4(&self) -> &str {
        &self.product[..4.min(self.product.len())]
    }

    /// Same quad with buyers swapped.
    pub fn swapped(&self) -> MomentQuad {
        MomentQuad {
            importer_a: self.importer_b.clone(),
            importer_b: self.importer_a.clone(),
            log_price_diff: -self.log_price_diff,
            shares_a: self.shares_b,
            shares_b: self.shares_a,
            instruments: share_difference_instruments(&self.shares_b, &self.shares_a),
            ..self.clone()
        }
    }
}

/// `[1, s_a - s_b, x_a - x_b]`.
pub fn share_difference_instruments(a: &PairShares, b: &PairShares) -> Vec<f64> {
    vec![1.0, a.s - b.s, a.x - b.x]
}

/// All unordered buyer pairs per exporter-product-year among cells with a
/// positive unit price and a defined quantity share. Buyers are ordered by
/// importer id within a pair.
pub fn build_quads(shares: &ShareTable) -> Vec<MomentQuad> {
    let markets: Vec<_> = shares.markets.values().collect();
    markets
        .par_iter()
        .flat_map_iter(|m| {
            let mut by_exporter: BTreeMap<usize, Vec<(&str, f64, PairShares)>> = BTreeMap::new();
            for c in &m.cells {
                if let (Some(p), Some(x), Some(x_r)) = (c.unit_price, c.x, c.x_r) {
                    if p > 0.0 {
                        by_exporter.entry(c.exporter).or_default().push((
                            &m.importers[c.importer],
                            p.ln(),
                            PairShares { s: c.s, x, x_r },
                        ));
                    }
                }
            }
            let mut out = Vec::new();
            for (e, mut buyers) in by_exporter {
                buyers.sort_by(|a, b| a.0.cmp(b.0));
                for (k, a) in buyers.iter().enumerate() {
                    for b in &buyers[k + 1..] {
                        out.push(MomentQuad {
                            exporter_id: m.exporters[e].clone(),
                            product: m.product.clone(),
                            year: m.year,
                            importer_a: a.0.to_string(),
                            importer_b: b.0.to_string(),
                            log_price_diff: a.1 - b.1,
                            shares_a: a.2,
                            shares_b: b.2,
                            instruments: share_difference_instruments(&a.2, &b.2),
                        });
                    }
                }
            }
            out
        })
        .collect()
}

/// Replaces instruments with prior-year share differences of the same two
/// pairs. Quads whose pairs did not both trade in the prior year are dropped.
pub fn lagged_share_instruments(quads: &[MomentQuad], shares: &ShareTable) -> Vec<MomentQuad> {
    let mut lookup: HashMap<(i32, &str, &str, &str), (f64, f64)> = HashMap::new();
    for m in shares.markets.values() {
        for c in &m.cells {
            if let Some(x) = c.x {
                lookup.insert(
                    (m.year, m.product.as_str(), &m.importers[c.importer], &m.exporters[c.exporter]),
                    (c.s, x),
                );
            }
        }
    }
    quads
        .iter()
        .filter_map(|q| {
            let (p, e) = (q.product.as_str(), q.exporter_id.as_str());
            let a = lookup.get(&(q.year - 1, p, q.importer_a.as_str(), e))?;
            let b = lookup.get(&(q.year - 1, p, q.importer_b.as_str(), e))?;
            let mut q = q.clone();
            q.instruments = vec![1.0, a.0 - b.0, a.1 - b.1];
            Some(q)
        })
        .collect()
}

/// Residual of one quad at bargaining weight `phi`.
pub fn moment_value(quad: &MomentQuad, phi: f64, params: &ModelParams) -> Result<f64> {
    let mu = |sh: &PairShares| bilateral_markup_at(sh.s, sh.x, params, phi).mu;
    let (ma, mb) = (mu(&quad.shares_a), mu(&quad.shares_b));
    if !(ma > 0.0 && mb > 0.0) {
        return Err(Error::Domain(format!("nonpositive markup at phi = {phi}")));
    }
    Ok(quad.log_price_diff - (ma.ln() - mb.ln()))
}

/// Custom instrument builder.
pub type InstrumentFn = Arc<dyn Fn(&MomentQuad) -> Vec<f64> + Send + Sync>;

#[derive(Clone)]
pub struct GmmConfig {
    /// Overrides the instruments stored on each quad.
    pub instruments: Option<InstrumentFn>,
    /// Re-estimate with `W = (Z' diag(g^2) Z / N)^-1` from first-stage residuals.
    pub two_step: bool,
    pub tol: f64,
    pub bounds: (f64, f64),
}

impl Default for GmmConfig {
    fn default() -> Self {
        GmmConfig {
            instruments: None,
            two_step: false,
            tol: 1e-6,
            bounds: (1e-6, 1.0 - 1e-6),
        }
    }
}

impl std::fmt::Debug for GmmConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GmmConfig")
            .field("custom_instruments", &self.instruments.is_some())
            .field("two_step", &self.two_step)
            .field("tol", &self.tol)
            .field("bounds", &self.bounds)
            .finish()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateStatus {
    Converged,
    /// The minimizer sits at a search bound.
    Boundary,
}

impl EstimateStatus {
    pub fn name(self) -> &'static str {
        match self {
            EstimateStatus::Converged => "converged",
            EstimateStatus::Boundary => "boundary",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimateResult {
    pub group: String,
    pub phi_hat: f64,
    pub objective: f64,
    pub n_quads: usize,
    pub status: EstimateStatus,
    /// 1 for identity weighting, 2 after re-weighting.
    pub stage: u8,
}

/// Mean moments and the quadratic-form objective for one weighting matrix.
pub struct GmmProblem<'a> {
    quads: &'a [MomentQuad],
    z: Vec<Vec<f64>>,
    params: ModelParams,
    k: usize,
}

impl<'a> GmmProblem<'a> {
    pub fn new(quads: &'a [MomentQuad], params: &ModelParams, config: &GmmConfig) -> Result<Self> {
        if quads.is_empty() {
            return Err(Error::Empty("no moment quads".into()));
        }
        let z: Vec<Vec<f64>> = match &config.instruments {
            Some(f) => quads.iter().map(|q| f(q)).collect(),
            None => quads.iter().map(|q| q.instruments.clone()).collect(),
        };
        let k = z[0].len();
        if k == 0 || z.iter().any(|r| r.len() != k) {
            return Err(Error::Config("instrument rows must share one nonzero length".into()));
        }
        Ok(GmmProblem {
            quads,
            z,
            params: *params,
            k,
        })
    }

    pub fn residuals(&self, phi: f64) -> Result<Vec<f64>> {
        self.quads.par_iter().map(|q| moment_value(q, phi, &self.params)).collect()
    }

    /// `Z' g / N`.
    pub fn mean_moments(&self, phi: f64) -> Result<DVector<f64>> {
        let g = self.residuals(phi)?;
        // sequential sum keeps results bit-identical across thread counts
        let mut sum = vec![0.0; self.k];
        for (z, g) in self.z.iter().zip(&g) {
            for (a, zi) in sum.iter_mut().zip(z) {
                *a += zi * g;
            }
        }
        Ok(DVector::from_vec(sum) / self.quads.len() as f64)
    }

    pub fn objective(&self, phi: f64, w: &DMatrix<f64>) -> Result<f64> {
        let m = self.mean_moments(phi)?;
        Ok((m.transpose() * w * &m)[(0, 0)])
    }

    /// `(Z' diag(g^2) Z / N)^-1` at `phi`.
    pub fn optimal_weight(&self, phi: f64) -> Result<DMatrix<f64>> {
        let g = self.residuals(phi)?;
        let mut s = DMatrix::<f64>::zeros(self.k, self.k);
        for (z, g) in self.z.iter().zip(&g) {
            let zv = DVector::from_column_slice(z);
            s += &zv * zv.transpose() * (g * g);
        }
        s /= self.quads.len() as f64;
        s.try_inverse()
            .ok_or_else(|| Error::NotIdentified("moment covariance is singular".into()))
    }

    fn minimize(&self, w: &DMatrix<f64>, config: &GmmConfig) -> Result<(f64, f64, bool)> {
        let (lo, hi) = config.bounds;
        let values: Vec<f64> = grid(lo, hi, GRID_POINTS)
            .into_iter()
            .map(|phi| self.objective(phi, w))
            .collect::<Result<_>>()?;
        let max = values.iter().cloned().fold(f64::MIN, f64::max);
        let min = values.iter().cloned().fold(f64::MAX, f64::min);
        if !(max.is_finite() && min.is_finite()) {
            return Err(Error::Domain("objective is not finite".into()));
        }
        if max - min <= 1e-14 * (1.0 + max.abs()) {
            return Err(Error::NotIdentified("objective does not vary with phi".into()));
        }
        // errors were ruled out on the grid; keep the closure total anyway
        let r = minimize_bounded(|phi| self.objective(phi, w).unwrap_or(f64::INFINITY), lo, hi, config.tol);
        Ok((r.x, r.f, r.at_bound))
    }
}

/// Estimates `phi` from a set of quads. The `group` field of the result is
/// left empty.
pub fn gmm_estimate(quads: &[MomentQuad], params: &ModelParams, config: &GmmConfig) -> Result<EstimateResult> {
    let problem = GmmProblem::new(quads, params, config)?;
    let identity = DMatrix::<f64>::identity(problem.k, problem.k);
    let (mut phi, mut obj, mut at_bound) = problem.minimize(&identity, config)?;
    let mut stage = 1;
    if config.two_step {
        let w = problem.optimal_weight(phi)?;
        (phi, obj, at_bound) = problem.minimize(&w, config)?;
        stage = 2;
    }
    Ok(EstimateResult {
        group: String::new(),
        phi_hat: phi,
        objective: obj,
        n_quads: quads.len(),
        status: if at_bound {
            EstimateStatus::Boundary
        } else {
            EstimateStatus::Converged
        },
        stage,
    })
}

/// Objective on the standard 99-point grid, for identification plots.
pub fn objective_profile(quads: &[MomentQuad], params: &ModelParams, config: &GmmConfig) -> Result<Vec<(f64, f64)>> {
    let problem = GmmProblem::new(quads, params, config)?;
    let w = DMatrix::<f64>::identity(problem.k, problem.k);
    let (lo, hi) = config.bounds;
    grid(lo, hi, GRID_POINTS)
        .into_iter()
        .map(|phi| Ok((phi, problem.objective(phi, &w)?)))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum GroupOutcome {
    Estimated(EstimateResult),
    Skipped { n_quads: usize },
    Failed { n_quads: usize, reason: String },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GroupEstimates {
    pub pooled: GroupOutcome,
    pub groups: BTreeMap<String, GroupOutcome>,
    pub min_quads: usize,
}

pub const DEFAULT_MIN_QUADS: usize = 30;

fn outcome(group: &str, quads: &[MomentQuad], params: &ModelParams, config: &GmmConfig, min_quads: usize) -> GroupOutcome {
    let n_quads = quads.len();
    if n_quads < min_quads.max(1) {
        return GroupOutcome::Skipped { n_quads };
    }
    match gmm_estimate(quads, params, config) {
        Ok(mut r) => {
            r.group = group.to_string();
            GroupOutcome::Estimated(r)
        }
        Err(e) => GroupOutcome::Failed {
            n_quads,
            reason: e.to_string(),
        },
    }
}

/// Separate estimates per HS4 heading plus a pooled estimate.
pub fn estimate_by_group(
    quads: &[MomentQuad],
    params: &ModelParams,
    config: &GmmConfig,
    min_quads: usize,
) -> GroupEstimates {
    let mut by_group: BTreeMap<&str, Vec<MomentQuad>> = BTreeMap::new();
    for q in quads {
        by_group.entry(q.hs4()).or_default().push(q.clone());
    }
    let groups: Vec<(&str, Vec<MomentQuad>)> = by_group.into_iter().collect();
    let groups = groups
        .par_iter()
        .map(|(g, qs)| (g.to_string(), outcome(g, qs, params, config, min_quads)))
        .collect();
    GroupEstimates {
        pooled: outcome("pooled", quads, params, config, min_quads),
        groups,
        min_quads,
    }
}

impl GroupEstimates {
    pub fn group_phis(&self) -> Vec<f64> {
        self.groups
            .values()
            .filter_map(|o| match o {
                GroupOutcome::Estimated(r) => Some(r.phi_hat),
                _ => None,
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhiHistogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub summary: Option<Summary>,
    pub skipped_groups: usize,
    pub failed_groups: usize,
}

/// Histogram of group estimates over `[0, 1]`.
pub fn phi_histogram(est: &GroupEstimates, bins: usize) -> PhiHistogram {
    let bins = bins.max(1);
    let phis = est.group_phis();
    let mut counts = vec![0; bins];
    for p in &phis {
        counts[((p * bins as f64) as usize).min(bins - 1)] += 1;
    }
    let count = |f: fn(&GroupOutcome) -> bool| est.groups.values().filter(|o| f(o)).count();
    PhiHistogram {
        bin_edges: (0..=bins).map(|k| k as f64 / bins as f64).collect(),
        counts,
        summary: Summary::of(&phis),
        skipped_groups: count(|o| matches!(o, GroupOutcome::Skipped { .. })),
        failed_groups: count(|o| matches!(o, GroupOutcome::Failed { .. })),
    }
}

/// `group,phi_hat,objective,n_quads,status` with the pooled row first.
pub fn write_estimates_csv<W: Write>(est: &GroupEstimates, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["group", "phi_hat", "objective", "n_quads", "status"])?;
    let rows = std::iter::once(("pooled", &est.pooled)).chain(est.groups.iter().map(|(g, o)| (g.as_str(), o)));
    for (g, o) in rows {
        let rec = match o {
            GroupOutcome::Estimated(r) => [
                g.to_string(),
                r.phi_hat.to_string(),
                r.objective.to_string(),
                r.n_quads.to_string(),
                r.status.name().to_string(),
            ],
            GroupOutcome::Skipped { n_quads } => {
                [g.to_string(), String::new(), String::new(), n_quads.to_string(), "skipped".into()]
            }
            GroupOutcome::Failed { n_quads, .. } => {
                [g.to_string(), String::new(), String::new(), n_quads.to_string(), "failed".into()]
            }
        };
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `phi` back from an estimates CSV: the pooled row when present,
/// otherwise the mean of the group estimates.
pub fn read_phi_from_estimates<R: std::io::Read>(reader: R) -> Result<f64> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut groups = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let (Some(g), Some(phi)) = (rec.get(0), rec.get(1)) else {
            return Err(Error::Schema("estimates rows need group and phi_hat".into()));
        };
        let Ok(phi) = phi.parse::<f64>() else { continue };
        if g == "pooled" {
            return Ok(phi);
        }
        groups.push(phi);
    }
    crate::stats::mean(&groups).ok_or_else(|| Error::Empty("no estimates in file".into()))
}
