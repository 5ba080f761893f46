//! Synthetic economies solved to equilibrium by brute force.
//!
//! Closure: each importer spends a fixed amount `E_j` on foreign inputs with
//! CES demand across its suppliers, `q_ij = E_j p_ij^-rho / sum_l p_lj^(1-rho)`.
//! Exporter `i` has marginal cost `c_i = k_i Q_i^((1-theta)/theta)`. Prices
//! solve `p_ij = mu(s_ij, x_ij) c_i` by damped iteration in logs.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::aggregate::{approx_aggregate_markup, ApproxMarkup};
use crate::error::{Error, Result};
use crate::model::{bilateral_markup, MarkupRecord, ModelParams, PairShares};
use crate::panel::{Money, Quantity, RawRow};

/// Dispersion of firm primitives.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Heterogeneity {
    /// Log-sd of exporter cost shifters.
    pub cost_sigma: f64,
    /// Log-sd of importer expenditures.
    pub spend_sigma: f64,
    /// Mean importer expenditure in USD.
    pub spend_scale: f64,
}

impl Default for Heterogeneity {
    fn default() -> Self {
        Heterogeneity {
            cost_sigma: 0.2,
            spend_sigma: 1.0,
            spend_scale: 1e9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SyntheticEconomy {
    pub params: ModelParams,
    /// Cost shifter per exporter.
    pub cost: Vec<f64>,
    /// Foreign expenditure per importer.
    pub spend: Vec<f64>,
    /// `(importer, exporter)` pairs, sorted.
    pub links: Vec<(usize, usize)>,
}

impl SyntheticEconomy {
    pub fn n_importers(&self) -> usize {
        self.spend.len()
    }

    pub fn n_exporters(&self) -> usize {
        self.cost.len()
    }

    fn validate(&self) -> Result<()> {
        let (ni, ne) = (self.n_importers(), self.n_exporters());
        if ni == 0 || ne == 0 {
            return Err(Error::Config("economy needs at least one importer and one exporter".into()));
        }
        if self.cost.iter().chain(&self.spend).any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Config("costs and expenditures must be positive".into()));
        }
        let mut has_sup = vec![false; ni];
        let mut has_buy = vec![false; ne];
        for &(j, i) in &self.links {
            if j >= ni || i >= ne {
                return Err(Error::Config(format!("link ({j}, {i}) out of range")));
            }
            has_sup[j] = true;
            has_buy[i] = true;
        }
        if has_sup.contains(&false) || has_buy.contains(&false) {
            return Err(Error::Config("every firm needs at least one link".into()));
        }
        Ok(())
    }
}

/// Uniform draws deciding links: `(importer, exporter)` is linked when its
/// draw falls below the density. Reusing one matrix across densities gives
/// nested networks.
pub fn link_draws(rng: &mut impl Rng, n_importers: usize, n_exporters: usize) -> Vec<Vec<f64>> {
    (0..n_importers)
        .map(|_| (0..n_exporters).map(|_| rng.gen::<f64>()).collect())
        .collect()
}

fn links_from_draws(draws: &[Vec<f64>], density: f64, rng: &mut impl Rng) -> Vec<(usize, usize)> {
    let ni = draws.len();
    let ne = draws[0].len();
    let mut linked: Vec<Vec<bool>> = draws.iter().map(|r| r.iter().map(|&u| u < density).collect()).collect();
    for row in linked.iter_mut() {
        if !row.contains(&true) {
            row[rng.gen_range(0..ne)] = true;
        }
    }
    for i in 0..ne {
        if !linked.iter().any(|r| r[i]) {
            linked[rng.gen_range(0..ni)][i] = true;
        }
    }
    let mut links = Vec::new();
    for (j, row) in linked.iter().enumerate() {
        for (i, &l) in row.iter().enumerate() {
            if l {
                links.push((j, i));
            }
        }
    }
    links
}

fn lognormal_draws(rng: &mut impl Rng, n: usize, sigma: f64, scale: f64) -> Vec<f64> {
    let z = Normal::new(0.0, 1.0).unwrap();
    (0..n).map(|_| scale * (sigma * z.sample(rng)).exp()).collect()
}

fn check_sizes(n_importers: usize, n_exporters: usize, density: f64, het: &Heterogeneity) -> Result<()> {
    if n_importers == 0 || n_exporters == 0 {
        return Err(Error::Config("network sizes must be at least 1".into()));
    }
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::Config(format!("density {density} outside (0, 1]")));
    }
    if !(het.cost_sigma >= 0.0 && het.spend_sigma >= 0.0 && het.spend_scale > 0.0) {
        return Err(Error::Config("invalid heterogeneity spec".into()));
    }
    Ok(())
}

/// Seeded random economy; firms left without a partner get one uniform link.
pub fn generate_network(
    seed: u64,
    n_importers: usize,
    n_exporters: usize,
    density: f64,
    het: &Heterogeneity,
    params: &ModelParams,
) -> Result<SyntheticEconomy> {
    check_sizes(n_importers, n_exporters, density, het)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cost = lognormal_draws(&mut rng, n_exporters, het.cost_sigma, 1.0);
    let spend = lognormal_draws(&mut rng, n_importers, het.spend_sigma, het.spend_scale);
    let draws = link_draws(&mut rng, n_importers, n_exporters);
    let links = links_from_draws(&draws, density, &mut rng);
    Ok(SyntheticEconomy {
        params: *params,
        cost,
        spend,
        links,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub damping: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-10,
            max_iter: 10_000,
            damping: 0.5,
        }
    }
}

/// Equilibrium objects per link (same order as `SyntheticEconomy::links`)
/// and per exporter.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EquilibriumOutcome {
    pub prices: Vec<f64>,
    pub quantities: Vec<f64>,
    pub values: Vec<f64>,
    pub shares: Vec<PairShares>,
    pub markups: Vec<MarkupRecord>,
    pub marginal_cost: Vec<f64>,
    pub output: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub damping: f64,
}

struct State {
    quantities: Vec<f64>,
    values: Vec<f64>,
    shares: Vec<PairShares>,
    markups: Vec<MarkupRecord>,
    marginal_cost: Vec<f64>,
    output: Vec<f64>,
}

fn evaluate(econ: &SyntheticEconomy, log_p: &[f64]) -> State {
    let p = &econ.params;
    let rho = p.rho();
    let (ni, ne) = (econ.n_importers(), econ.n_exporters());
    let n = econ.links.len();

    // log-sum-exp of (1 - rho) ln p per importer
    let mut peak = vec![f64::NEG_INFINITY; ni];
    for (l, &(j, _)) in econ.links.iter().enumerate() {
        peak[j] = peak[j].max((1.0 - rho) * log_p[l]);
    }
    let mut denom = vec![0.0; ni];
    for (l, &(j, _)) in econ.links.iter().enumerate() {
        denom[j] += ((1.0 - rho) * log_p[l] - peak[j]).exp();
    }
    let mut s = vec![0.0; n];
    let mut values = vec![0.0; n];
    let mut quantities = vec![0.0; n];
    let mut output = vec![0.0; ne];
    let mut sales = vec![0.0; ne];
    for (l, &(j, i)) in econ.links.iter().enumerate() {
        s[l] = ((1.0 - rho) * log_p[l] - peak[j]).exp() / denom[j];
        values[l] = econ.spend[j] * s[l];
        quantities[l] = values[l] / log_p[l].exp();
        output[i] += quantities[l];
        sales[i] += values[l];
    }
    let curv = (1.0 - p.theta()) / p.theta();
    let marginal_cost: Vec<f64> = (0..ne).map(|i| econ.cost[i] * output[i].powf(curv)).collect();
    let shares: Vec<PairShares> = econ
        .links
        .iter()
        .enumerate()
        .map(|(l, &(_, i))| PairShares {
            s: s[l],
            x: quantities[l] / output[i],
            x_r: values[l] / sales[i],
        })
        .collect();
    let markups = shares.iter().map(|sh| bilateral_markup(*sh, p)).collect();
    State {
        quantities,
        values,
        shares,
        markups,
        marginal_cost,
        output,
    }
}

/// Damped fixed-point iteration on log prices. The step is halved each time
/// the residual grows three iterations in a row.
pub fn solve_equilibrium(econ: &SyntheticEconomy, opts: &SolverOptions) -> Result<EquilibriumOutcome> {
    econ.validate()?;
    if !(opts.damping > 0.0 && opts.damping <= 1.0 && opts.tol > 0.0) {
        return Err(Error::Config("damping must be in (0, 1] and tol positive".into()));
    }
    let rho = econ.params.rho();
    let mut log_p: Vec<f64> = econ
        .links
        .iter()
        .map(|&(_, i)| (econ.cost[i] * rho / (rho - 1.0)).ln())
        .collect();
    let mut damping = opts.damping;
    let mut prev = f64::INFINITY;
    let mut rising = 0;
    let mut residual = f64::INFINITY;
    for iter in 0..=opts.max_iter {
        let st = evaluate(econ, &log_p);
        let target: Vec<f64> = econ
            .links
            .iter()
            .enumerate()
            .map(|(l, &(_, i))| (st.markups[l].mu * st.marginal_cost[i]).ln())
            .collect();
        residual = target
            .iter()
            .zip(&log_p)
            .map(|(t, lp)| (t - lp).abs())
            .fold(0.0, f64::max);
        if !residual.is_finite() {
            break;
        }
        if residual < opts.tol {
            return Ok(EquilibriumOutcome {
                prices: log_p.iter().map(|lp| lp.exp()).collect(),
                quantities: st.quantities,
                values: st.values,
                shares: st.shares,
                markups: st.markups,
                marginal_cost: st.marginal_cost,
                output: st.output,
                iterations: iter,
                residual,
                damping,
            });
        }
        if residual > prev {
            rising += 1;
            if rising >= 3 {
                damping *= 0.5;
                rising = 0;
                if damping < 1e-4 {
                    break;
                }
            }
        } else {
            rising = 0;
        }
        prev = residual;
        for (lp, t) in log_p.iter_mut().zip(&target) {
            *lp += damping * (t - *lp);
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        residual,
    })
}

/// Aggregate markups computed from equilibrium primitives.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PrimitiveMarkup {
    /// Total sales over output valued at marginal cost, `sum pq / sum c q`.
    pub sales_over_marginal_cost: f64,
    /// Total sales over total variable cost, `sum pq / sum theta c q`.
    pub sales_over_variable_cost: f64,
    /// Sales-weighted harmonic mean of bilateral markups.
    pub harmonic_mean: f64,
    /// Sales-weighted arithmetic mean of bilateral markups.
    pub arithmetic_mean: f64,
}

pub fn exact_markup_from_primitives(outcome: &EquilibriumOutcome, econ: &SyntheticEconomy) -> PrimitiveMarkup {
    let theta = econ.params.theta();
    let mut sales = 0.0;
    let mut cost_at_mc = 0.0;
    for (l, &(_, i)) in econ.links.iter().enumerate() {
        sales += outcome.prices[l] * outcome.quantities[l];
        cost_at_mc += outcome.marginal_cost[i] * outcome.quantities[l];
    }
    let (inv, lin) = outcome
        .values
        .iter()
        .zip(&outcome.markups)
        .fold((0.0, 0.0), |(a, b), (v, m)| (a + v / m.mu, b + v * m.mu));
    // total variable cost of producing Q at c = k Q^((1-theta)/theta) is theta c Q
    PrimitiveMarkup {
        sales_over_marginal_cost: sales / cost_at_mc,
        sales_over_variable_cost: sales / (theta * cost_at_mc),
        harmonic_mean: sales / inv,
        arithmetic_mean: lin / sales,
    }
}

/// Concentration indices computed directly from an outcome.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OutcomeIndices {
    pub suppliers_net: f64,
    pub buyers_net: f64,
    pub suppliers_std: f64,
    pub buyers_std: f64,
    pub max_s: f64,
}

pub fn outcome_indices(outcome: &EquilibriumOutcome, econ: &SyntheticEconomy) -> OutcomeIndices {
    let total: f64 = outcome.values.iter().sum();
    let mut imp_w = vec![0.0; econ.n_importers()];
    let mut exp_w = vec![0.0; econ.n_exporters()];
    for (l, &(j, i)) in econ.links.iter().enumerate() {
        imp_w[j] += outcome.values[l] / total;
        exp_w[i] += outcome.values[l] / total;
    }
    let mut sup = 0.0;
    let mut buy = 0.0;
    let mut max_s: f64 = 0.0;
    for (l, &(j, i)) in econ.links.iter().enumerate() {
        let sh = outcome.shares[l];
        sup += imp_w[j] * sh.s * sh.s;
        buy += exp_w[i] * sh.x_r * sh.x;
        max_s = max_s.max(sh.s);
    }
    OutcomeIndices {
        suppliers_net: sup,
        buyers_net: buy,
        suppliers_std: exp_w.iter().map(|w| w * w).sum(),
        buyers_std: imp_w.iter().map(|w| w * w).sum(),
        max_s,
    }
}

/// Exact aggregate markup of an outcome against the affine approximation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ApproxCheck {
    pub mu_exact: f64,
    pub approx: ApproxMarkup,
    pub rel_error: f64,
    pub indices: OutcomeIndices,
}

pub fn approximation_check(outcome: &EquilibriumOutcome, econ: &SyntheticEconomy) -> ApproxCheck {
    let mu_exact = exact_markup_from_primitives(outcome, econ).harmonic_mean;
    let indices = outcome_indices(outcome, econ);
    let approx = approx_aggregate_markup(indices.suppliers_net, indices.buyers_net, &econ.params);
    ApproxCheck {
        mu_exact,
        approx,
        rel_error: (approx.mu_approx - mu_exact).abs() / mu_exact,
        indices,
    }
}

pub fn importer_id(j: usize) -> String {
    format!("M{j:05}")
}

pub fn exporter_name(i: usize) -> String {
    format!("X{i:05}")
}

/// Log-price disturbance per link.
pub fn draw_noise(seed: u64, n_links: usize, sd: f64) -> Result<Vec<f64>> {
    if sd == 0.0 {
        return Ok(vec![0.0; n_links]);
    }
    let normal = Normal::new(0.0, sd).map_err(|e| Error::Config(format!("noise sd {sd}: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n_links).map(|_| normal.sample(&mut rng)).collect())
}

/// Transaction rows for one product-year. Row `l` reports price
/// `p_l exp(noise_l)` and the equilibrium quantity.
pub fn emit_rows(
    outcome: &EquilibriumOutcome,
    econ: &SyntheticEconomy,
    noise: &[f64],
    year: i32,
    product: &str,
) -> Vec<RawRow> {
    econ.links
        .iter()
        .enumerate()
        .map(|(l, &(j, i))| {
            let q = Quantity::from_f64(outcome.quantities[l]);
            RawRow {
                year: year.to_string(),
                importer_id: importer_id(j),
                exporter_name: exporter_name(i),
                origin_country: None,
                hs10: product.to_string(),
                value_usd: Money::from_usd_f64(outcome.prices[l] * noise[l].exp() * q.to_f64()).to_string(),
                quantity: q.to_string(),
                unit: "KG".into(),
                n_rows: None,
            }
        })
        .collect()
}

/// Single-year panel with i.i.d. normal log-price noise.
pub fn emit_synthetic_panel(
    outcome: &EquilibriumOutcome,
    econ: &SyntheticEconomy,
    noise_seed: u64,
    noise_sd: f64,
    year: i32,
    product: &str,
) -> Result<crate::panel::TradePanel> {
    let noise = draw_noise(noise_seed, econ.links.len(), noise_sd)?;
    let rows = emit_rows(outcome, econ, &noise, year, product);
    Ok(crate::panel::ingest(&rows, false))
}

/// Linear path of link density across years.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DensityPath {
    Constant(f64),
    Linear { start: f64, end: f64 },
}

impl DensityPath {
    pub fn at(&self, t: usize, n_years: usize) -> f64 {
        match *self {
            DensityPath::Constant(d) => d,
            DensityPath::Linear { start, end } if n_years > 1 => {
                start + (end - start) * t as f64 / (n_years - 1) as f64
            }
            DensityPath::Linear { start, .. } => start,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProductSpec {
    pub hs10: String,
    /// Bargaining weight for this product; the scenario `phi` when absent.
    #[serde(default)]
    pub phi: Option<f64>,
}

/// Simulation scenario, read from JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub n_importers: usize,
    pub n_exporters: usize,
    pub density: DensityPath,
    #[serde(default = "default_first_year")]
    pub first_year: i32,
    #[serde(default = "default_n_years")]
    pub n_years: usize,
    #[serde(default)]
    pub params: Option<ModelParams>,
    #[serde(default)]
    pub heterogeneity: Heterogeneity,
    #[serde(default)]
    pub noise_sd: f64,
    #[serde(default)]
    pub noise_seed: Option<u64>,
    #[serde(default = "default_products")]
    pub products: Vec<ProductSpec>,
    #[serde(default)]
    pub solver: Option<SolverOptions>,
}

fn default_first_year() -> i32 {
    2010
}

fn default_n_years() -> usize {
    1
}

fn default_products() -> Vec<ProductSpec> {
    vec![ProductSpec {
        hs10: "8471300000".into(),
        phi: None,
    }]
}

/// One solved product-year.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolvedMarket {
    pub year: i32,
    pub hs10: String,
    pub phi: f64,
    pub density: f64,
    pub n_links: usize,
    pub iterations: usize,
    pub residual: f64,
    pub primitive: PrimitiveMarkup,
    pub approximation: ApproxCheck,
    #[serde(skip)]
    pub economy: SyntheticEconomy,
    #[serde(skip)]
    pub outcome: EquilibriumOutcome,
    #[serde(skip)]
    pub noise: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Simulation {
    pub config: ScenarioConfig,
    pub markets: Vec<SolvedMarket>,
    #[serde(skip)]
    pub rows: Vec<RawRow>,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_years == 0 || self.products.is_empty() {
            return Err(Error::Config("scenario needs at least one year and one product".into()));
        }
        for t in 0..self.n_years {
            let d = self.density.at(t, self.n_years);
            check_sizes(self.n_importers, self.n_exporters, d, &self.heterogeneity)?;
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::Config("noise_sd must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Solves every product-year of a scenario. Each product has its own
/// primitives and link draws, fixed across years; the link density follows
/// the configured path, so networks shrink or grow monotonically.
pub fn simulate(config: &ScenarioConfig) -> Result<Simulation> {
    config.validate()?;
    let base = config.params.unwrap_or_default();
    let solver = config.solver.unwrap_or_default();
    let noise_seed = config.noise_seed.unwrap_or(config.seed ^ 0x9e37_79b9_7f4a_7c15);
    let jobs: Vec<(usize, usize)> = (0..config.products.len())
        .flat_map(|h| (0..config.n_years).map(move |t| (h, t)))
        .collect();
    use rayon::prelude::*;
    let markets: Vec<SolvedMarket> = jobs
        .par_iter()
        .map(|&(h, t)| {
            let prod = &config.products[h];
            let params = match prod.phi {
                Some(phi) => base.with_phi(phi)?,
                None => base,
            };
            let het = &config.heterogeneity;
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(h as u64));
            let cost = lognormal_draws(&mut rng, config.n_exporters, het.cost_sigma, 1.0);
            let spend = lognormal_draws(&mut rng, config.n_importers, het.spend_sigma, het.spend_scale);
            let draws = link_draws(&mut rng, config.n_importers, config.n_exporters);
            let density = config.density.at(t, config.n_years);
            let mut repair = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(h as u64).wrapping_add((t as u64) << 32));
            let economy = SyntheticEconomy {
                params,
                cost,
                spend,
                links: links_from_draws(&draws, density, &mut repair),
            };
            let outcome = solve_equilibrium(&economy, &solver)?;
            let noise = draw_noise(
                noise_seed.wrapping_add((h as u64) << 20).wrapping_add(t as u64),
                economy.links.len(),
                config.noise_sd,
            )?;
            Ok(SolvedMarket {
                year: config.first_year + t as i32,
                hs10: prod.hs10.clone(),
                phi: params.phi(),
                density,
                n_links: economy.links.len(),
                iterations: outcome.iterations,
                residual: outcome.residual,
                primitive: exact_markup_from_primitives(&outcome, &economy),
                approximation: approximation_check(&outcome, &economy),
                economy,
                outcome,
                noise,
            })
        })
        .collect::<Result<_>>()?;
    let rows = markets
        .iter()
        .flat_map(|m| emit_rows(&m.outcome, &m.economy, &m.noise, m.year, &m.hs10))
        .collect();
    Ok(Simulation {
        config: config.clone(),
        markets,
        rows,
    })
}

/// Per-link equilibrium records for the JSON dump.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LinkRecord {
    pub importer_id: String,
    pub exporter_id: String,
    pub price: f64,
    pub quantity: f64,
    pub noise: f64,
    pub shares: PairShares,
    pub mu: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MarketDump<'a> {
    #[serde(flatten)]
    pub market: &'a SolvedMarket,
    pub links: Vec<LinkRecord>,
}

pub fn equilibrium_dump(sim: &Simulation) -> BTreeMap<String, Vec<MarketDump<'_>>> {
    let mut out: BTreeMap<String, Vec<MarketDump>> = BTreeMap::new();
    for m in &sim.markets {
        let links = m
            .economy
            .links
            .iter()
            .enumerate()
            .map(|(l, &(j, i))| LinkRecord {
                importer_id: importer_id(j),
                exporter_id: exporter_name(i),
                price: m.outcome.prices[l],
                quantity: m.outcome.quantities[l],
                noise: m.noise[l],
                shares: m.outcome.shares[l],
                mu: m.outcome.markups[l].mu,
            })
            .collect();
        out.entry(m.hs10.clone()).or_default().push(MarketDump { market: m, links });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn params(theta: f64, phi: f64) -> ModelParams {
        ModelParams::new(7.0, 2.5, theta, phi, 1.0, 2.5).unwrap()
    }

    #[test]
    fn complete_graph_at_full_density() {
        let e = generate_network(1, 4, 3, 1.0, &Heterogeneity::default(), &params(0.75, 0.5)).unwrap();
        assert_eq!(e.links.len(), 12);
    }

    #[test]
    fn same_seed_same_economy() {
        let h = Heterogeneity::default();
        let p = params(0.75, 0.5);
        assert_eq!(generate_network(9, 10, 7, 0.3, &h, &p).unwrap(), generate_network(9, 10, 7, 0.3, &h, &p).unwrap());
    }

    #[test]
    fn sparse_networks_are_repaired() {
        let e = generate_network(3, 30, 20, 0.01, &Heterogeneity::default(), &params(0.75, 0.5)).unwrap();
        e.validate().unwrap();
        let single = generate_network(3, 1, 1, 0.5, &Heterogeneity::default(), &params(0.75, 0.5)).unwrap();
        assert_eq!(single.links, vec![(0, 0)]);
    }

    #[test]
    fn rejects_bad_density() {
        let h = Heterogeneity::default();
        assert!(generate_network(1, 2, 2, 0.0, &h, &params(0.75, 0.5)).is_err());
        assert!(generate_network(1, 0, 2, 0.5, &h, &params(0.75, 0.5)).is_err());
    }

    #[test]
    fn single_pair_closed_form() {
        let e = SyntheticEconomy {
            params: params(1.0, 0.0),
            cost: vec![1.7],
            spend: vec![5.0],
            links: vec![(0, 0)],
        };
        let out = solve_equilibrium(&e, &SolverOptions::default()).unwrap();
        assert_relative_eq!(out.prices[0], 2.5 / 1.5 * 1.7, max_relative = 1e-10);
    }

    #[test]
    fn symmetric_two_by_two() {
        let e = SyntheticEconomy {
            params: params(0.75, 0.5),
            cost: vec![1.0, 1.0],
            spend: vec![3.0, 3.0],
            links: vec![(0, 0), (0, 1), (1, 0), (1, 1)],
        };
        let out = solve_equilibrium(&e, &SolverOptions::default()).unwrap();
        for l in 0..4 {
            assert_relative_eq!(out.prices[l], out.prices[0], max_relative = 1e-12);
            assert_relative_eq!(out.shares[l].s, 0.5, max_relative = 1e-12);
            assert_relative_eq!(out.shares[l].x, 0.5, max_relative = 1e-12);
        }
    }

    #[test]
    fn full_buyer_power_at_constant_cost_prices_at_cost() {
        let e = generate_network(5, 6, 4, 0.6, &Heterogeneity::default(), &params(1.0, 1.0)).unwrap();
        let out = solve_equilibrium(&e, &SolverOptions::default()).unwrap();
        for (l, &(_, i)) in e.links.iter().enumerate() {
            assert_relative_eq!(out.prices[l], e.cost[i], max_relative = 1e-9);
        }
        let pm = exact_markup_from_primitives(&out, &e);
        assert_relative_eq!(pm.sales_over_variable_cost, 1.0, max_relative = 1e-9);
    }

    #[test]
    fn fixed_point_holds_at_convergence() {
        let e = generate_network(11, 15, 10, 0.4, &Heterogeneity::default(), &ModelParams::calibrated()).unwrap();
        let out = solve_equilibrium(&e, &SolverOptions::default()).unwrap();
        for (l, &(_, i)) in e.links.iter().enumerate() {
            assert_relative_eq!(out.prices[l], out.markups[l].mu * out.marginal_cost[i], max_relative = 1e-9);
        }
        let pm = exact_markup_from_primitives(&out, &e);
        assert_relative_eq!(pm.sales_over_marginal_cost, pm.harmonic_mean, max_relative = 1e-8);
        assert_relative_eq!(pm.sales_over_variable_cost * 0.75, pm.harmonic_mean, max_relative = 1e-8);
    }

    #[test]
    fn scenario_parses_with_defaults() {
        let cfg: ScenarioConfig = serde_json::from_str(
            r#"{"seed": 1, "n_importers": 5, "n_exporters": 3, "density": {"start": 0.9, "end": 0.5}, "n_years": 3}"#,
        )
        .unwrap();
        assert_eq!(cfg.density.at(2, 3), 0.5);
        let sim = simulate(&cfg).unwrap();
        assert_eq!(sim.markets.len(), 3);
        assert!(sim.markets[0].n_links >= sim.markets[2].n_links);
        assert!(serde_json::from_str::<ScenarioConfig>(r#"{"seed": 1, "bogus": 2}"#).is_err());
    }
}
