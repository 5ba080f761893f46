//! Bilateral shares and concentration indices per product-year.
//!
//! For each product-year market:
//!
//! * `s[i,j]`: exporter `i`'s share of importer `j`'s spending on the product,
//! * `x[i,j]`, `x_r[i,j]`: importer `j`'s quantity and revenue shares of
//!   exporter `i`'s sales of the product,
//! * `phi_i`, `phi_j`: exporter and importer shares of the market's trade.
//!
//! Network indices weight each firm's own partner HHI by its trade share;
//! standard indices are plain HHIs of `phi_i` and `phi_j`. Cells whose
//! quantity is undefined (mixed units) enter `s` but not `x` / `x_r`.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::panel::{Cell, CellKey, TradePanel};
use crate::stats::Summary;

pub type MarketKey = (i32, String);

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShareCell {
    pub importer: usize,
    pub exporter: usize,
    pub value: f64,
    pub quantity: Option<f64>,
    pub unit_price: Option<f64>,
    pub s: f64,
    pub x: Option<f64>,
    pub x_r: Option<f64>,
    /// Share of the cell in the market's total trade.
    pub iota: f64,
}

/// All shares of one product in one year.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProductMarket {
    pub year: i32,
    pub product: String,
    pub importers: Vec<String>,
    pub exporters: Vec<String>,
    pub cells: Vec<ShareCell>,
    /// `phi_j`, indexed like `importers`.
    pub importer_weight: Vec<f64>,
    /// `phi_i`, indexed like `exporters`.
    pub exporter_weight: Vec<f64>,
    /// Whether the exporter has a positive defined quantity to build `x` on.
    pub exporter_has_quantity: Vec<bool>,
    /// Product weight in the year's total imports.
    pub alpha: f64,
    pub total_value: f64,
    pub cells_without_quantity: usize,
    pub zero_price_cells: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ShareTable {
    pub markets: BTreeMap<MarketKey, ProductMarket>,
    /// Product-years dropped because their total value is zero.
    pub excluded_zero_value: Vec<MarketKey>,
}

impl ShareTable {
    pub fn market(&self, year: i32, product: &str) -> Option<&ProductMarket> {
        self.markets.get(&(year, product.to_string()))
    }

    pub fn years(&self) -> Vec<i32> {
        let mut ys: Vec<i32> = self.markets.keys().map(|k| k.0).collect();
        ys.dedup();
        ys
    }

    pub fn markets_in(&self, year: i32) -> impl Iterator<Item = &ProductMarket> {
        self.markets.values().filter(move |m| m.year == year)
    }
}

fn index_of(names: &mut Vec<String>, lookup: &mut BTreeMap<String, usize>, name: &str) -> usize {
    if let Some(&i) = lookup.get(name) {
        return i;
    }
    let i = names.len();
    names.push(name.to_string());
    lookup.insert(name.to_string(), i);
    i
}

fn build_market(year: i32, product: &str, cells: &[(&CellKey, &Cell)]) -> ProductMarket {
    let mut importers = Vec::new();
    let mut exporters = Vec::new();
    let (mut imp_ix, mut exp_ix) = (BTreeMap::new(), BTreeMap::new());
    let mut raw = Vec::with_capacity(cells.len());
    for (k, c) in cells {
        let j = index_of(&mut importers, &mut imp_ix, &k.importer_id);
        let i = index_of(&mut exporters, &mut exp_ix, &k.exporter_id);
        raw.push((i, j, *c));
    }
    // integer totals keep every share independent of summation order
    let mut imp_value = vec![0i128; importers.len()];
    let mut exp_value = vec![0i128; exporters.len()];
    let mut exp_qty = vec![0i128; exporters.len()];
    let mut exp_qty_value = vec![0i128; exporters.len()];
    let mut total = 0i128;
    // an exporter's quantity shares need every one of its cells measured in one unit
    let mut exp_unit: Vec<Option<Option<&str>>> = vec![None; exporters.len()];
    for &(i, j, c) in &raw {
        imp_value[j] += c.value.cents();
        exp_value[i] += c.value.cents();
        total += c.value.cents();
        let unit = c.quantity().and(c.unit());
        exp_unit[i] = match exp_unit[i] {
            None => Some(unit),
            Some(u) if u == unit => Some(u),
            Some(_) => Some(None),
        };
        if let Some(q) = c.quantity() {
            exp_qty[i] += q.micros();
            exp_qty_value[i] += c.value.cents();
        }
    }
    let ratio = |a: i128, b: i128| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let exporter_has_quantity: Vec<bool> = exp_qty
        .iter()
        .zip(&exp_unit)
        .map(|(&q, u)| q > 0 && matches!(u, Some(Some(_))))
        .collect();
    let mut cells_without_quantity = 0;
    let mut zero_price_cells = 0;
    let share_cells = raw
        .iter()
        .map(|&(i, j, c)| {
            let q = c.quantity();
            if q.is_none() {
                cells_without_quantity += 1;
            }
            if c.value.cents() == 0 && q.is_some_and(|q| q.is_positive()) {
                zero_price_cells += 1;
            }
            let (x, x_r) = match q {
                Some(q) if exporter_has_quantity[i] => (
                    Some(ratio(q.micros(), exp_qty[i])),
                    Some(ratio(c.value.cents(), exp_qty_value[i])),
                ),
                _ => (None, None),
            };
            ShareCell {
                importer: j,
                exporter: i,
                value: c.value.to_f64(),
                quantity: q.map(|q| q.to_f64()),
                unit_price: c.unit_price(),
                s: ratio(c.value.cents(), imp_value[j]),
                x,
                x_r,
                iota: ratio(c.value.cents(), total),
            }
        })
        .collect();
    ProductMarket {
        year,
        product: product.to_string(),
        importer_weight: imp_value.iter().map(|&v| ratio(v, total)).collect(),
        exporter_weight: exp_value.iter().map(|&v| ratio(v, total)).collect(),
        importers,
        exporters,
        cells: share_cells,
        exporter_has_quantity,
        alpha: 0.0,
        total_value: total as f64 / 100.0,
        cells_without_quantity,
        zero_price_cells,
    }
}

/// Builds every product-year share group of a panel.
pub fn compute_shares(panel: &TradePanel) -> Result<ShareTable> {
    if panel.is_empty() {
        return Err(Error::Empty("panel has no cells".into()));
    }
    let mut groups: BTreeMap<(i32, &str), Vec<(&CellKey, &Cell)>> = BTreeMap::new();
    for (k, c) in &panel.cells {
        groups.entry((k.year, &k.product)).or_default().push((k, c));
    }
    let groups: Vec<_> = groups.into_iter().collect();
    let built: Vec<ProductMarket> = groups
        .par_iter()
        .map(|((year, product), cells)| build_market(*year, product, cells))
        .collect();

    let mut table = ShareTable::default();
    let mut year_total: BTreeMap<i32, f64> = BTreeMap::new();
    for m in built {
        if m.total_value <= 0.0 {
            table.excluded_zero_value.push((m.year, m.product.clone()));
            continue;
        }
        *year_total.entry(m.year).or_default() += m.total_value;
        table.markets.insert((m.year, m.product.clone()), m);
    }
    for m in table.markets.values_mut() {
        m.alpha = m.total_value / year_total[&m.year];
    }
    Ok(table)
}

/// `sum_j phi_j sum_i s_ij^2`.
pub fn hhi_suppliers_net(m: &ProductMarket) -> f64 {
    let mut inner = vec![0.0; m.importers.len()];
    for c in &m.cells {
        inner[c.importer] += c.s * c.s;
    }
    inner.iter().zip(&m.importer_weight).map(|(h, w)| w * h).sum()
}

/// Buyer-side network index with the share of trade it had to leave out.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BuyerIndex {
    pub value: Option<f64>,
    /// Trade share of exporters without defined quantities.
    pub excluded_weight: f64,
}

/// `sum_i phi_i sum_j x_r_ij x_ij`, over exporters with defined quantities,
/// with `phi_i` renormalized over those exporters.
pub fn hhi_buyers_net(m: &ProductMarket) -> BuyerIndex {
    let mut inner = vec![0.0; m.exporters.len()];
    for c in &m.cells {
        if let (Some(x), Some(xr)) = (c.x, c.x_r) {
            inner[c.exporter] += xr * x;
        }
    }
    let mut included = 0.0;
    let mut acc = 0.0;
    for (i, w) in m.exporter_weight.iter().enumerate() {
        if m.exporter_has_quantity[i] {
            included += w;
            acc += w * inner[i];
        }
    }
    let excluded_weight = (1.0 - included).max(0.0);
    BuyerIndex {
        value: (included > 0.0).then(|| acc / included),
        excluded_weight,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Suppliers,
    Buyers,
}

/// Industry-wide HHI: `sum_i phi_i^2` or `sum_j phi_j^2`.
pub fn hhi_std(m: &ProductMarket, side: Side) -> f64 {
    let w = match side {
        Side::Suppliers => &m.exporter_weight,
        Side::Buyers => &m.importer_weight,
    };
    w.iter().map(|v| v * v).sum()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProductIndices {
    pub hhi_suppliers_net: f64,
    pub hhi_buyers_net: Option<f64>,
    pub hhi_suppliers_std: f64,
    pub hhi_buyers_std: f64,
    pub alpha: f64,
    pub n_exporters: usize,
    pub n_importers: usize,
    /// Average number of suppliers per importer.
    pub exporters_per_importer: f64,
    /// Average number of buyers per exporter.
    pub importers_per_exporter: f64,
    pub buyer_excluded_weight: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AggregateIndices {
    pub suppliers_net: f64,
    pub buyers_net: Option<f64>,
    pub suppliers_std: f64,
    pub buyers_std: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ConcentrationReport {
    pub products: BTreeMap<MarketKey, ProductIndices>,
    pub aggregates: BTreeMap<i32, AggregateIndices>,
}

pub fn product_indices(m: &ProductMarket) -> ProductIndices {
    let buyers = hhi_buyers_net(m);
    let n_pairs = m.cells.len() as f64;
    ProductIndices {
        hhi_suppliers_net: hhi_suppliers_net(m),
        hhi_buyers_net: buyers.value,
        hhi_suppliers_std: hhi_std(m, Side::Suppliers),
        hhi_buyers_std: hhi_std(m, Side::Buyers),
        alpha: m.alpha,
        n_exporters: m.exporters.len(),
        n_importers: m.importers.len(),
        exporters_per_importer: n_pairs / m.importers.len() as f64,
        importers_per_exporter: n_pairs / m.exporters.len() as f64,
        buyer_excluded_weight: buyers.excluded_weight,
    }
}

/// Product indices for every market, plus the yearly aggregates.
pub fn concentration_report(shares: &ShareTable) -> ConcentrationReport {
    let markets: Vec<_> = shares.markets.iter().collect();
    let products = markets
        .par_iter()
        .map(|(k, m)| ((*k).clone(), product_indices(m)))
        .collect::<Vec<_>>()
        .into_iter()
        .collect();
    let mut report = ConcentrationReport {
        products,
        aggregates: BTreeMap::new(),
    };
    report.aggregates = aggregate_indices(&report);
    report
}

/// `sum_h alpha_h index_h` per year; the buyer family renormalizes alpha over
/// products whose buyer index is defined.
pub fn aggregate_indices(report: &ConcentrationReport) -> BTreeMap<i32, AggregateIndices> {
    let mut out: BTreeMap<i32, (AggregateIndices, f64)> = BTreeMap::new();
    for ((year, _), p) in &report.products {
        let (agg, buyer_alpha) = out.entry(*year).or_insert((
            AggregateIndices {
                suppliers_net: 0.0,
                buyers_net: Some(0.0),
                suppliers_std: 0.0,
                buyers_std: 0.0,
            },
            0.0,
        ));
        agg.suppliers_net += p.alpha * p.hhi_suppliers_net;
        agg.suppliers_std += p.alpha * p.hhi_suppliers_std;
        agg.buyers_std += p.alpha * p.hhi_buyers_std;
        if let Some(b) = p.hhi_buyers_net {
            *agg.buyers_net.as_mut().unwrap() += p.alpha * b;
            *buyer_alpha += p.alpha;
        }
    }
    out.into_iter()
        .map(|(y, (mut agg, buyer_alpha))| {
            agg.buyers_net = (buyer_alpha > 0.0).then(|| agg.buyers_net.unwrap() / buyer_alpha);
            (y, agg)
        })
        .collect()
}

/// Table-1 style distribution summaries over product-years.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConcentrationSummary {
    pub product_years: usize,
    pub exporters_per_product: Option<Summary>,
    pub exporters_per_importer: Option<Summary>,
    pub hhi_suppliers_std: Option<Summary>,
    pub hhi_suppliers_net: Option<Summary>,
    pub importers_per_product: Option<Summary>,
    pub importers_per_exporter: Option<Summary>,
    pub hhi_buyers_std: Option<Summary>,
    pub hhi_buyers_net: Option<Summary>,
}

pub fn summarize(report: &ConcentrationReport) -> ConcentrationSummary {
    let col = |f: &dyn Fn(&ProductIndices) -> Option<f64>| {
        let v: Vec<f64> = report.products.values().filter_map(f).collect();
        Summary::of(&v)
    };
    ConcentrationSummary {
        product_years: report.products.len(),
        exporters_per_product: col(&|p| Some(p.n_exporters as f64)),
        exporters_per_importer: col(&|p| Some(p.exporters_per_importer)),
        hhi_suppliers_std: col(&|p| Some(p.hhi_suppliers_std)),
        hhi_suppliers_net: col(&|p| Some(p.hhi_suppliers_net)),
        importers_per_product: col(&|p| Some(p.n_importers as f64)),
        importers_per_exporter: col(&|p| Some(p.importers_per_exporter)),
        hhi_buyers_std: col(&|p| Some(p.hhi_buyers_std)),
        hhi_buyers_net: col(&|p| p.hhi_buyers_net),
    }
}

pub(crate) fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_shares_csv<W: Write>(shares: &ShareTable, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "year", "hs10", "importer_id", "exporter_id", "value_usd", "s", "x", "x_r", "iota",
        "phi_i", "phi_j",
    ])?;
    for m in shares.markets.values() {
        for c in &m.cells {
            w.write_record([
                m.year.to_string(),
                m.product.clone(),
                m.importers[c.importer].clone(),
                m.exporters[c.exporter].clone(),
                c.value.to_string(),
                c.s.to_string(),
                opt(c.x),
                opt(c.x_r),
                c.iota.to_string(),
                m.exporter_weight[c.exporter].to_string(),
                m.importer_weight[c.importer].to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_concentration_csv<W: Write>(report: &ConcentrationReport, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "year",
        "hs10",
        "hhi_suppliers_net",
        "hhi_buyers_net",
        "hhi_suppliers_std",
        "hhi_buyers_std",
        "alpha",
    ])?;
    for ((year, product), p) in &report.products {
        w.write_record([
            year.to_string(),
            product.clone(),
            p.hhi_suppliers_net.to_string(),
            opt(p.hhi_buyers_net),
            p.hhi_suppliers_std.to_string(),
            p.hhi_buyers_std.to_string(),
            p.alpha.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_aggregate_csv<W: Write>(report: &ConcentrationReport, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["year", "suppliers_net", "buyers_net", "suppliers_std", "buyers_std"])?;
    for (year, a) in &report.aggregates {
        w.write_record([
            year.to_string(),
            a.suppliers_net.to_string(),
            opt(a.buyers_net),
            a.suppliers_std.to_string(),
            a.buyers_std.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::panel::{ingest, RawRow};
    use approx::assert_abs_diff_eq;

    pub(crate) fn row(year: i32, imp: &str, exp: &str, hs: &str, v: f64, q: Option<f64>) -> RawRow {
        RawRow {
            year: year.to_string(),
            importer_id: imp.into(),
            exporter_name: exp.into(),
            origin_country: None,
            hs10: hs.into(),
            value_usd: format!("{v:.2}"),
            quantity: q.map(|q| format!("{q:.6}")).unwrap_or_default(),
            unit: "KG".into(),
            n_rows: None,
        }
    }

    const A: &str = "0101000000";
    const B: &str = "0202000000";

    fn table(rows: &[RawRow]) -> ShareTable {
        compute_shares(&ingest(rows, false)).unwrap()
    }

    #[test]
    fn supplier_shares() {
        let t = table(&[row(2015, "J", "E1", A, 3.0, Some(1.0)), row(2015, "J", "E2", A, 1.0, Some(1.0))]);
        let m = t.market(2015, A).unwrap();
        let s: Vec<f64> = m.cells.iter().map(|c| c.s).collect();
        assert_eq!(s, vec![0.75, 0.25]);
    }

    #[test]
    fn buyer_shares_with_unequal_prices() {
        let t = table(&[row(2015, "J1", "E", A, 2.0, Some(1.0)), row(2015, "J2", "E", A, 1.0, Some(1.0))]);
        let m = t.market(2015, A).unwrap();
        assert_eq!(m.cells[0].x, Some(0.5));
        assert_eq!(m.cells[1].x, Some(0.5));
        assert_abs_diff_eq!(m.cells[0].x_r.unwrap(), 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(m.cells[1].x_r.unwrap(), 1.0 / 3.0, epsilon = 1e-15);
    }

    #[test]
    fn mixed_units_leave_buyer_shares_undefined() {
        let mut r2 = row(2015, "J2", "E", A, 1.0, Some(1.0));
        r2.unit = "U".into();
        let t = table(&[row(2015, "J1", "E", A, 2.0, Some(1.0)), r2, row(2015, "J1", "F", A, 2.0, None)]);
        let m = t.market(2015, A).unwrap();
        assert!(m.cells.iter().all(|c| c.x.is_none()));
        let b = hhi_buyers_net(m);
        assert_eq!(b.value, None);
        assert_abs_diff_eq!(b.excluded_weight, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn single_pair_market() {
        let t = table(&[row(2015, "J", "E", A, 5.0, Some(2.0))]);
        let c = &t.market(2015, A).unwrap().cells[0];
        assert_eq!((c.s, c.x, c.x_r, c.iota), (1.0, Some(1.0), Some(1.0), 1.0));
    }

    #[test]
    fn single_sourced_importers_give_one() {
        let t = table(&[
            row(2015, "J1", "E1", A, 3.0, Some(1.0)),
            row(2015, "J2", "E2", A, 1.0, Some(1.0)),
            row(2015, "J3", "E2", A, 2.0, Some(1.0)),
        ]);
        let m = t.market(2015, A).unwrap();
        assert_abs_diff_eq!(hhi_suppliers_net(m), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn equal_suppliers_give_one_over_n() {
        for n in 1..6 {
            let rows: Vec<_> = (0..n).map(|i| row(2015, "J", &format!("E{i}"), A, 2.0, Some(1.0))).collect();
            let m = table(&rows).markets.into_values().next().unwrap();
            assert_abs_diff_eq!(hhi_suppliers_net(&m), 1.0 / n as f64, epsilon = 1e-15);
            assert_abs_diff_eq!(hhi_std(&m, Side::Suppliers), 1.0 / n as f64, epsilon = 1e-15);
            assert_abs_diff_eq!(hhi_std(&m, Side::Buyers), 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn buyer_index_examples() {
        let t = table(&[
            row(2015, "J1", "E1", A, 3.0, Some(1.0)),
            row(2015, "J2", "E2", A, 1.0, Some(1.0)),
        ]);
        assert_abs_diff_eq!(hhi_buyers_net(t.market(2015, A).unwrap()).value.unwrap(), 1.0, epsilon = 1e-15);

        // equal prices: x_r = x
        let t = table(&[
            row(2015, "J1", "E1", A, 3.0, Some(3.0)),
            row(2015, "J2", "E1", A, 1.0, Some(1.0)),
            row(2015, "J2", "E2", A, 4.0, Some(4.0)),
        ]);
        let m = t.market(2015, A).unwrap();
        let expect = 0.5 * (0.75f64.powi(2) + 0.25f64.powi(2)) + 0.5 * 1.0;
        assert_abs_diff_eq!(hhi_buyers_net(m).value.unwrap(), expect, epsilon = 1e-15);
    }

    #[test]
    fn buyer_index_excludes_exporters_without_quantity() {
        let t = table(&[
            row(2015, "J1", "E1", A, 3.0, None),
            row(2015, "J1", "E2", A, 1.0, Some(1.0)),
            row(2015, "J2", "E2", A, 1.0, Some(3.0)),
        ]);
        let m = t.market(2015, A).unwrap();
        assert_eq!(m.cells_without_quantity, 1);
        let b = hhi_buyers_net(m);
        assert_abs_diff_eq!(b.excluded_weight, 0.6, epsilon = 1e-15);
        // only E2: x = (0.25, 0.75), x_r = (0.5, 0.5)
        assert_abs_diff_eq!(b.value.unwrap(), 0.5 * 0.25 + 0.5 * 0.75, epsilon = 1e-15);

        let t = table(&[row(2015, "J1", "E1", A, 3.0, None)]);
        assert_eq!(hhi_buyers_net(t.market(2015, A).unwrap()).value, None);
    }

    #[test]
    fn aggregates_weight_by_alpha() {
        let rows = [
            row(2015, "J1", "E1", A, 1.0, Some(1.0)),
            row(2015, "J1", "E1", B, 0.5, Some(1.0)),
            row(2015, "J2", "E2", B, 0.5, Some(1.0)),
        ];
        let t = table(&rows);
        let r = concentration_report(&t);
        let agg = r.aggregates[&2015];
        // both products: supplier net = 1; std suppliers: A = 1, B = 0.5
        assert_abs_diff_eq!(agg.suppliers_net, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(agg.suppliers_std, 0.5 * 1.0 + 0.5 * 0.5, epsilon = 1e-15);

        let single = table(&rows[..1]);
        let r = concentration_report(&single);
        assert_eq!(r.aggregates[&2015].suppliers_std, r.products[&(2015, A.to_string())].hhi_suppliers_std);
    }

    #[test]
    fn aggregate_arithmetic_with_given_weights() {
        let mk = |alpha, v| ProductIndices {
            hhi_suppliers_net: v,
            hhi_buyers_net: Some(v),
            hhi_suppliers_std: v,
            hhi_buyers_std: v,
            alpha,
            n_exporters: 1,
            n_importers: 1,
            exporters_per_importer: 1.0,
            importers_per_exporter: 1.0,
            buyer_excluded_weight: 0.0,
        };
        let mut r = ConcentrationReport::default();
        r.products.insert((2015, A.into()), mk(0.5, 0.8));
        r.products.insert((2015, B.into()), mk(0.5, 0.6));
        let agg = aggregate_indices(&r)[&2015];
        assert_abs_diff_eq!(agg.suppliers_net, 0.7, epsilon = 1e-15);
        assert_abs_diff_eq!(agg.buyers_net.unwrap(), 0.7, epsilon = 1e-15);

        r.products.get_mut(&(2015, B.to_string())).unwrap().hhi_buyers_net = None;
        assert_abs_diff_eq!(aggregate_indices(&r)[&2015].buyers_net.unwrap(), 0.8, epsilon = 1e-15);
    }

    #[test]
    fn zero_value_market_is_excluded() {
        let t = table(&[row(2015, "J", "E", A, 0.0, Some(1.0)), row(2015, "J", "E", B, 1.0, Some(1.0))]);
        assert_eq!(t.excluded_zero_value, vec![(2015, A.to_string())]);
        assert_eq!(t.markets.len(), 1);
    }

    #[test]
    fn empty_panel_is_an_error() {
        assert!(compute_shares(&TradePanel::default()).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn market_rows() -> impl Strategy<Value = Vec<(usize, usize, u32, u32)>> {
            prop::collection::vec((0usize..5, 0usize..5, 1u32..1_000_000, 1u32..1000), 1..20)
        }

        fn to_rows(cells: &[(usize, usize, u32, u32)], equal_price: bool, relabel: bool) -> Vec<RawRow> {
            cells
                .iter()
                .map(|&(i, e, v, q)| {
                    let q = if equal_price { v as f64 / 100.0 } else { q as f64 };
                    let (imp, exp) = if relabel {
                        (format!("J{}", 4 - i), format!("X{}", (e + 2) % 5))
                    } else {
                        (format!("J{i}"), format!("E{e}"))
                    };
                    row(2015, &imp, &exp, A, v as f64 / 100.0, Some(q))
                })
                .collect()
        }

        proptest! {
            #[test]
            fn shares_sum_to_one(cells in market_rows()) {
                let t = table(&to_rows(&cells, false, false));
                let m = t.market(2015, A).unwrap();
                for j in 0..m.importers.len() {
                    let s: f64 = m.cells.iter().filter(|c| c.importer == j).map(|c| c.s).sum();
                    prop_assert!((s - 1.0).abs() <= 1e-9);
                }
                for i in 0..m.exporters.len() {
                    let x: f64 = m.cells.iter().filter(|c| c.exporter == i).map(|c| c.x.unwrap()).sum();
                    let xr: f64 = m.cells.iter().filter(|c| c.exporter == i).map(|c| c.x_r.unwrap()).sum();
                    prop_assert!((x - 1.0).abs() <= 1e-9 && (xr - 1.0).abs() <= 1e-9);
                }
                let iota: f64 = m.cells.iter().map(|c| c.iota).sum();
                prop_assert!((iota - 1.0).abs() <= 1e-9);
            }

            #[test]
            fn network_supplier_index_dominates_standard(cells in market_rows()) {
                let t = table(&to_rows(&cells, false, false));
                let m = t.market(2015, A).unwrap();
                prop_assert!(hhi_suppliers_net(m) >= hhi_std(m, Side::Suppliers) - 1e-12);
            }

            #[test]
            fn network_buyer_index_dominates_at_equal_prices(cells in market_rows()) {
                let t = table(&to_rows(&cells, true, false));
                let m = t.market(2015, A).unwrap();
                let b = hhi_buyers_net(m).value.unwrap();
                prop_assert!(b >= hhi_std(m, Side::Buyers) - 1e-12);
            }

            #[test]
            fn indices_ignore_labels(cells in market_rows()) {
                let a = concentration_report(&table(&to_rows(&cells, false, false)));
                let b = concentration_report(&table(&to_rows(&cells, false, true)));
                let (a, b) = (a.aggregates[&2015], b.aggregates[&2015]);
                prop_assert!((a.suppliers_net - b.suppliers_net).abs() <= 1e-12);
                prop_assert!((a.buyers_net.unwrap() - b.buyers_net.unwrap()).abs() <= 1e-12);
                prop_assert!((a.suppliers_std - b.suppliers_std).abs() <= 1e-12);
                prop_assert!((a.buyers_std - b.buyers_std).abs() <= 1e-12);
            }
        }
    }
}
