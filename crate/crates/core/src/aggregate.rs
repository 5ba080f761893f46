//! Aggregate markups on imported inputs.
//!
//! The exact aggregate is the expenditure-weighted harmonic mean of
//! bilateral markups. The approximation is affine in the aggregate
//! concentration indices:
//!
//! ```text
//! mu ~ (1 - phi) rho/(rho - 1) + phi
//!      + (1 - phi) (rho - eta)/(rho - 1)^2 * H_suppliers
//!      - phi (1 - theta)/(2 theta)          * H_buyers
//! ```

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::concentration::{opt, AggregateIndices, ConcentrationReport, ShareTable};
use crate::error::{Error, Result};
use crate::model::{bilateral_markup, MarkupRecord, ModelParams, PairShares};
use crate::stats::{mean, quantile, sd};

/// Bilateral markup of one cell.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairMarkup {
    pub year: i32,
    pub product: String,
    pub importer_id: String,
    pub exporter_id: String,
    pub shares: PairShares,
    /// Share of the cell in the year's total imports.
    pub weight: f64,
    /// Share of the cell in the importer's yearly import spending.
    pub importer_weight: f64,
    /// Set when `x` was undefined and the markdown was evaluated at `x = 0`.
    pub x_imputed: bool,
    pub record: MarkupRecord,
}

/// Bilateral markups of every cell, in canonical market order.
pub fn bilateral_markups(shares: &ShareTable, params: &ModelParams) -> Vec<PairMarkup> {
    let mut importer_year_value: BTreeMap<(i32, &str), f64> = BTreeMap::new();
    for m in shares.markets.values() {
        for c in &m.cells {
            *importer_year_value.entry((m.year, &m.importers[c.importer])).or_default() += c.value;
        }
    }
    let markets: Vec<_> = shares.markets.values().collect();
    markets
        .par_iter()
        .flat_map_iter(|m| {
            let importer_year_value = &importer_year_value;
            m.cells.iter().map(move |c| {
                let x = c.x.unwrap_or(0.0);
                let x_r = c.x_r.unwrap_or(0.0);
                let pair = PairShares { s: c.s, x, x_r };
                PairMarkup {
                    year: m.year,
                    product: m.product.clone(),
                    importer_id: m.importers[c.importer].clone(),
                    exporter_id: m.exporters[c.exporter].clone(),
                    shares: pair,
                    weight: m.alpha * c.iota,
                    importer_weight: c.value / importer_year_value[&(m.year, m.importers[c.importer].as_str())],
                    x_imputed: c.x.is_none(),
                    record: bilateral_markup(pair, params),
                }
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExactAggregate {
    /// Weighted harmonic mean of bilateral markups.
    pub mu_exact: f64,
    /// Weighted arithmetic mean of bilateral markups.
    pub mu_arith: f64,
    /// Weight carried by cells whose `x` was imputed.
    pub imputed_weight: f64,
}

/// Harmonic and arithmetic weighted means of `(weight, markup)` pairs.
pub fn weighted_means(items: impl IntoIterator<Item = (f64, f64)>) -> Option<(f64, f64)> {
    let (mut w, mut inv, mut lin) = (0.0, 0.0, 0.0);
    for (weight, mu) in items {
        w += weight;
        inv += weight / mu;
        lin += weight * mu;
    }
    (w > 0.0).then(|| (w / inv, lin / w))
}

/// Exact aggregate markup per year.
pub fn exact_aggregate_markup(markups: &[PairMarkup]) -> BTreeMap<i32, ExactAggregate> {
    let mut by_year: BTreeMap<i32, Vec<&PairMarkup>> = BTreeMap::new();
    for m in markups {
        by_year.entry(m.year).or_default().push(m);
    }
    by_year
        .into_iter()
        .filter_map(|(year, ms)| {
            let (mu_exact, mu_arith) = weighted_means(ms.iter().map(|m| (m.weight, m.record.mu)))?;
            let imputed_weight = ms.iter().filter(|m| m.x_imputed).map(|m| m.weight).sum();
            Some((
                year,
                ExactAggregate {
                    mu_exact,
                    mu_arith,
                    imputed_weight,
                },
            ))
        })
        .collect()
}

/// Terms of the affine approximation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ApproxMarkup {
    pub intercept: f64,
    pub supplier_term: f64,
    pub buyer_term: f64,
    pub mu_approx: f64,
}

pub fn intercept(params: &ModelParams) -> f64 {
    let (rho, phi) = (params.rho(), params.phi());
    (1.0 - phi) * rho / (rho - 1.0) + phi
}

/// Slope on the supplier index: `(1 - phi)(rho - eta)/(rho - 1)^2`.
pub fn supplier_coefficient(params: &ModelParams) -> f64 {
    let (rho, eta, phi) = (params.rho(), params.eta(), params.phi());
    (1.0 - phi) * (rho - eta) / ((rho - 1.0) * (rho - 1.0))
}

/// Slope magnitude on the buyer index: `phi (1 - theta)/(2 theta)`.
pub fn buyer_coefficient(params: &ModelParams) -> f64 {
    let (theta, phi) = (params.theta(), params.phi());
    phi * (1.0 - theta) / (2.0 * theta)
}

pub fn approx_aggregate_markup(h_suppliers: f64, h_buyers: f64, params: &ModelParams) -> ApproxMarkup {
    let intercept = intercept(params);
    let supplier_term = supplier_coefficient(params) * h_suppliers;
    let buyer_term = buyer_coefficient(params) * h_buyers;
    ApproxMarkup {
        intercept,
        supplier_term,
        buyer_term,
        mu_approx: intercept + supplier_term - buyer_term,
    }
}

/// Approximation for one year of aggregate indices. An undefined buyer index
/// only matters when `phi > 0`.
pub fn approx_for_year(agg: &AggregateIndices, params: &ModelParams) -> Option<ApproxMarkup> {
    let h_buy = match agg.buyers_net {
        Some(b) => b,
        None if params.phi() == 0.0 => 0.0,
        None => return None,
    };
    Some(approx_aggregate_markup(agg.suppliers_net, h_buy, params))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticThresholds {
    pub lambda_median: f64,
    pub mu_cv: f64,
}

impl Default for DiagnosticThresholds {
    fn default() -> Self {
        DiagnosticThresholds {
            lambda_median: 1.2,
            mu_cv: 0.5,
        }
    }
}

/// Distribution checks behind the constant-weight and
/// harmonic-equals-arithmetic simplifications.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AssumptionDiagnostics {
    pub n_pairs: usize,
    pub lambda_mean: f64,
    pub lambda_median: f64,
    pub lambda_p90: f64,
    pub omega_mean: f64,
    pub mu_mean: f64,
    pub mu_sd: f64,
    pub mu_cv: f64,
    pub thresholds: DiagnosticThresholds,
    pub flag_lambda: bool,
    pub flag_dispersion: bool,
}

pub fn assumption_diagnostics(
    markups: &[PairMarkup],
    thresholds: DiagnosticThresholds,
) -> Option<AssumptionDiagnostics> {
    let lambdas: Vec<f64> = markups.iter().map(|m| m.record.lambda).collect();
    let mus: Vec<f64> = markups.iter().map(|m| m.record.mu).collect();
    let omegas: Vec<f64> = markups.iter().map(|m| m.record.omega).collect();
    let lambda_median = quantile(&lambdas, 0.5)?;
    let mu_mean = mean(&mus)?;
    let mu_sd = sd(&mus)?;
    let mu_cv = mu_sd / mu_mean;
    Some(AssumptionDiagnostics {
        n_pairs: markups.len(),
        lambda_mean: mean(&lambdas)?,
        lambda_median,
        lambda_p90: quantile(&lambdas, 0.9)?,
        omega_mean: mean(&omegas)?,
        mu_mean,
        mu_sd,
        mu_cv,
        thresholds,
        flag_lambda: lambda_median > thresholds.lambda_median,
        flag_dispersion: mu_cv > thresholds.mu_cv,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Estimated `phi`, network indices.
    Baseline,
    /// `phi = 0`, network supplier index.
    NoBuyerPower,
    /// `phi = 0`, standard supplier index.
    StandardHhi,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::Baseline, Scenario::NoBuyerPower, Scenario::StandardHhi];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Baseline => "baseline",
            Scenario::NoBuyerPower => "no_buyer_power",
            Scenario::StandardHhi => "standard_hhi",
        }
    }

    pub fn parse(s: &str) -> Option<Scenario> {
        Scenario::ALL.into_iter().find(|sc| sc.name() == s)
    }
}

/// One year of one markup series; `None` fields are gaps.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SeriesRow {
    pub year: i32,
    pub scenario: Scenario,
    pub mu_exact: Option<f64>,
    pub mu_arith: Option<f64>,
    pub supplier_index: Option<f64>,
    pub buyer_index: Option<f64>,
    pub approx: Option<ApproxMarkup>,
    /// `mu_approx` relative to the first year with a value.
    pub normalized_approx: Option<f64>,
    pub normalized_exact: Option<f64>,
}

pub type MarkupSeries = Vec<SeriesRow>;

fn normalize_series(rows: &mut [SeriesRow]) {
    let base_a = rows.iter().find_map(|r| r.approx.map(|a| a.mu_approx));
    let base_e = rows.iter().find_map(|r| r.mu_exact);
    for r in rows {
        r.normalized_approx = r.approx.zip(base_a).map(|(a, b)| a.mu_approx / b);
        r.normalized_exact = r.mu_exact.zip(base_e).map(|(e, b)| e / b);
    }
}

/// Scenario series over `years` (default: the years of the report). Years
/// missing from the report appear as gaps.
pub fn counterfactual_series(
    conc: &ConcentrationReport,
    params: &ModelParams,
    scenario: Scenario,
    years: Option<&[i32]>,
) -> Result<MarkupSeries> {
    let p = match scenario {
        Scenario::Baseline => *params,
        Scenario::NoBuyerPower | Scenario::StandardHhi => params.with_phi(0.0)?,
    };
    let years: Vec<i32> = match years {
        Some(y) => y.to_vec(),
        None => conc.aggregates.keys().copied().collect(),
    };
    let mut rows: Vec<SeriesRow> = years
        .into_iter()
        .map(|year| {
            let agg = conc.aggregates.get(&year);
            let supplier_index = agg.map(|a| match scenario {
                Scenario::StandardHhi => a.suppliers_std,
                _ => a.suppliers_net,
            });
            let buyer_index = agg.and_then(|a| a.buyers_net);
            let approx = agg.and_then(|a| {
                let a = AggregateIndices {
                    suppliers_net: supplier_index.unwrap(),
                    ..*a
                };
                approx_for_year(&a, &p)
            });
            SeriesRow {
                year,
                scenario,
                mu_exact: None,
                mu_arith: None,
                supplier_index,
                buyer_index,
                approx,
                normalized_approx: None,
                normalized_exact: None,
            }
        })
        .collect();
    normalize_series(&mut rows);
    Ok(rows)
}

/// Baseline series with the exact aggregate filled in from bilateral markups.
pub fn markup_series(
    conc: &ConcentrationReport,
    markups: &[PairMarkup],
    params: &ModelParams,
) -> Result<MarkupSeries> {
    let exact = exact_aggregate_markup(markups);
    let mut rows = counterfactual_series(conc, params, Scenario::Baseline, None)?;
    for r in &mut rows {
        if let Some(e) = exact.get(&r.year) {
            r.mu_exact = Some(e.mu_exact);
            r.mu_arith = Some(e.mu_arith);
        }
    }
    normalize_series(&mut rows);
    Ok(rows)
}

/// Scenario series with exact aggregates where the scenario defines one:
/// bilateral markups at the scenario's `phi` for `baseline` and
/// `no_buyer_power`. The standard-index scenario has no exact counterpart.
pub fn scenario_series(
    shares: &ShareTable,
    conc: &ConcentrationReport,
    params: &ModelParams,
    scenario: Scenario,
) -> Result<MarkupSeries> {
    let mut rows = counterfactual_series(conc, params, scenario, None)?;
    let p = match scenario {
        Scenario::Baseline => *params,
        Scenario::NoBuyerPower => params.with_phi(0.0)?,
        Scenario::StandardHhi => return Ok(rows),
    };
    let exact = exact_aggregate_markup(&bilateral_markups(shares, &p));
    for r in &mut rows {
        if let Some(e) = exact.get(&r.year) {
            r.mu_exact = Some(e.mu_exact);
            r.mu_arith = Some(e.mu_arith);
        }
    }
    normalize_series(&mut rows);
    Ok(rows)
}

pub fn write_series_csv<W: Write>(rows: &[SeriesRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "year",
        "scenario",
        "mu_exact",
        "mu_arith",
        "mu_approx",
        "intercept",
        "supplier_term",
        "buyer_term",
        "supplier_index",
        "buyer_index",
        "normalized_approx",
        "normalized_exact",
    ])?;
    for r in rows {
        let a = r.approx;
        w.write_record([
            r.year.to_string(),
            r.scenario.name().to_string(),
            opt(r.mu_exact),
            opt(r.mu_arith),
            opt(a.map(|a| a.mu_approx)),
            opt(a.map(|a| a.intercept)),
            opt(a.map(|a| a.supplier_term)),
            opt(a.map(|a| a.buyer_term)),
            opt(r.supplier_index),
            opt(r.buyer_index),
            opt(r.normalized_approx),
            opt(r.normalized_exact),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_markups_csv<W: Write>(markups: &[PairMarkup], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "year", "hs10", "importer_id", "exporter_id", "s", "x", "x_imputed", "weight", "mu",
        "mu_olig", "mu_oligopsony", "epsilon", "lambda", "omega",
    ])?;
    for m in markups {
        let r = &m.record;
        w.write_record([
            m.year.to_string(),
            m.product.clone(),
            m.importer_id.clone(),
            m.exporter_id.clone(),
            m.shares.s.to_string(),
            m.shares.x.to_string(),
            m.x_imputed.to_string(),
            m.weight.to_string(),
            r.mu.to_string(),
            r.mu_olig.to_string(),
            r.mu_oligopsony.to_string(),
            r.epsilon.to_string(),
            r.lambda.to_string(),
            r.omega.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Consumer-price distortion index for one year.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PriceDistortion {
    pub year: i32,
    pub p_hat_exact: f64,
    pub p_hat_approx: f64,
    /// Arithmetic aggregate markup entering the approximation.
    pub mu_arith: f64,
}

/// Ratio of the final-goods price index to its markup-free counterpart.
///
/// For importer `j` the markup-free cost ratio is
/// `R_j = prod_h (sum_i s_ij mu_ij^(rho-1))^(gamma w_jh / (rho-1))`, with
/// `w_jh` the importer's product spending shares (a single product gives the
/// one-input form). The index is `(sum_j omega_j R_j^(nu-1))^(1/(nu-1))`.
///
/// `output_weights` maps importer ids to final-output shares; when absent the
/// importer's share of the year's imports is used as a proxy. Weights are
/// renormalized over the importers present in the year.
pub fn price_distortion(
    markups: &[PairMarkup],
    params: &ModelParams,
    output_weights: Option<&BTreeMap<String, f64>>,
) -> Result<Vec<PriceDistortion>> {
    let (rho, nu, gamma) = (params.rho(), params.nu(), params.gamma());
    if rho == 1.0 || nu == 1.0 {
        return Err(Error::Domain("price distortion needs rho != 1 and nu != 1".into()));
    }
    // (year, importer) -> product -> (importer spend on product, sum s mu^(rho-1))
    type Inner<'a> = BTreeMap<&'a str, (f64, f64)>;
    let mut per_importer: BTreeMap<i32, BTreeMap<&str, Inner>> = BTreeMap::new();
    for m in markups {
        let e = per_importer
            .entry(m.year)
            .or_default()
            .entry(&m.importer_id)
            .or_default()
            .entry(&m.product)
            .or_default();
        e.0 += m.weight;
        e.1 += m.shares.s * m.record.mu.powf(rho - 1.0);
    }
    let exact = exact_aggregate_markup(markups);
    let base = rho / (rho - 1.0);
    let mut out = Vec::new();
    for (year, importers) in per_importer {
        let mut weighted = 0.0;
        let mut total_w = 0.0;
        for (imp, products) in &importers {
            let spend: f64 = products.values().map(|v| v.0).sum();
            let omega_j = match output_weights {
                Some(w) => w.get(*imp).copied().unwrap_or(0.0),
                None => spend,
            };
            if omega_j <= 0.0 {
                continue;
            }
            let log_r: f64 = products
                .values()
                .map(|(w, inner)| w / spend * inner.ln())
                .sum::<f64>()
                * gamma
                / (rho - 1.0);
            weighted += omega_j * ((nu - 1.0) * log_r).exp();
            total_w += omega_j;
        }
        if total_w <= 0.0 {
            return Err(Error::Config(format!("no positive output weights in {year}")));
        }
        let p_hat_exact = (weighted / total_w).powf(1.0 / (nu - 1.0));
        let mu_arith = exact[&year].mu_arith;
        let p_hat_approx =
            (1.0 - gamma) * base.powf(gamma) + base.powf(-(1.0 - gamma)) * gamma * mu_arith;
        out.push(PriceDistortion {
            year,
            p_hat_exact,
            p_hat_approx,
            mu_arith,
        });
    }
    Ok(out)
}

pub fn write_price_distortion_csv<W: Write>(rows: &[PriceDistortion], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["year", "p_hat_exact", "p_hat_approx", "mu_arith"])?;
    for r in rows {
        w.write_record([
            r.year.to_string(),
            r.p_hat_exact.to_string(),
            r.p_hat_approx.to_string(),
            r.mu_arith.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
