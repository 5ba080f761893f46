//! Transaction ingestion and the importer × exporter × product × year panel.
//!
//! Raw customs lines are validated, exporter names are mapped to canonical
//! keys, and rows sharing a key are summed into one [`Cell`]. Values are held
//! in integer cents and quantities in integer micro-units, so aggregation is
//! exact and independent of row order.

mod fixed;
mod io;
mod normalize;

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::error::{Error, Result};

pub use fixed::{Money, Quantity};
pub use io::{
    ingest_csv, read_raw_csv, write_coverage_json, write_exporter_map_csv, write_panel_csv,
    write_raw_csv,
};
pub use normalize::{normalize_exporter, normalize_product, normalize_unit, LEGAL_SUFFIXES};

/// One customs line, validated.
#[derive(Clone, Debug, PartialEq)]
pub struct TransactionRecord {
    pub year: i32,
    pub importer_id: String,
    pub exporter_name: String,
    pub origin_country: Option<String>,
    pub product: String,
    pub value: Money,
    /// `None` when the line carries no usable quantity.
    pub quantity: Option<Quantity>,
    pub unit: String,
    /// Number of raw lines this record stands for (1 for raw input).
    pub rows: u64,
}

/// One unparsed input row; every field is the raw text of its column.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RawRow {
    pub year: String,
    pub importer_id: String,
    pub exporter_name: String,
    pub origin_country: Option<String>,
    pub hs10: String,
    pub value_usd: String,
    pub quantity: String,
    pub unit: String,
    pub n_rows: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    MalformedRow,
    MalformedYear,
    EmptyImporter,
    EmptyExporter,
    InvalidProduct,
    MalformedValue,
    NegativeValue,
    MalformedQuantity,
    NegativeQuantity,
}

impl TransactionRecord {
    /// Validates a raw row. Exporter names are kept raw here; they are
    /// normalized when the record is added to a panel.
    pub fn from_raw(raw: &RawRow) -> Result<Self, RejectReason> {
        let year = raw
            .year
            .trim()
            .parse::<i32>()
            .map_err(|_| RejectReason::MalformedYear)?;
        let importer_id = raw.importer_id.trim().to_string();
        if importer_id.is_empty() {
            return Err(RejectReason::EmptyImporter);
        }
        if normalize_exporter(&raw.exporter_name).is_none() {
            return Err(RejectReason::EmptyExporter);
        }
        let product = normalize_product(&raw.hs10).ok_or(RejectReason::InvalidProduct)?;
        let value = Money::parse(&raw.value_usd).ok_or(RejectReason::MalformedValue)?;
        if value.is_negative() {
            return Err(RejectReason::NegativeValue);
        }
        let quantity = if raw.quantity.trim().is_empty() {
            None
        } else {
            let q = Quantity::parse(&raw.quantity).ok_or(RejectReason::MalformedQuantity)?;
            if q.is_negative() {
                return Err(RejectReason::NegativeQuantity);
            }
            Some(q)
        };
        let rows = match raw.n_rows.as_deref().map(str::trim) {
            None | Some("") => 1,
            Some(t) => t.parse::<u64>().map_err(|_| RejectReason::MalformedRow)?,
        };
        let origin_country = raw
            .origin_country
            .as_deref()
            .map(|o| o.trim().to_uppercase())
            .filter(|o| !o.is_empty());
        Ok(TransactionRecord {
            year,
            importer_id,
            exporter_name: raw.exporter_name.clone(),
            origin_country,
            product,
            value,
            quantity,
            unit: normalize_unit(&raw.unit),
            rows,
        })
    }
}

/// Cell key; field order gives the canonical emission order.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellKey {
    pub year: i32,
    pub product: String,
    pub importer_id: String,
    pub exporter_id: String,
}

/// Quantity state of a cell: summed while every row agrees on the unit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CellQuantity {
    Defined { unit: String, amount: Quantity },
    Undefined,
}

impl CellQuantity {
    fn merge(self, other: CellQuantity) -> CellQuantity {
        match (self, other) {
            (
                CellQuantity::Defined { unit: u1, amount: a1 },
                CellQuantity::Defined { unit: u2, amount: a2 },
            ) if u1 == u2 => CellQuantity::Defined {
                unit: u1,
                amount: a1 + a2,
            },
            _ => CellQuantity::Undefined,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cell {
    pub value: Money,
    pub quantity: CellQuantity,
    /// Origin tags seen on the merged rows.
    pub origins: BTreeSet<String>,
    /// Merged raw row count.
    pub rows: u64,
}

impl Cell {
    fn from_record(rec: &TransactionRecord) -> Cell {
        let quantity = match rec.quantity {
            Some(amount) if !rec.unit.is_empty() => CellQuantity::Defined {
                unit: rec.unit.clone(),
                amount,
            },
            _ => CellQuantity::Undefined,
        };
        Cell {
            value: rec.value,
            quantity,
            origins: rec.origin_country.iter().cloned().collect(),
            rows: rec.rows,
        }
    }

    fn merge(&mut self, other: Cell) {
        self.value += other.value;
        self.rows += other.rows;
        self.origins.extend(other.origins);
        let q = std::mem::replace(&mut self.quantity, CellQuantity::Undefined);
        self.quantity = q.merge(other.quantity);
    }

    pub fn quantity(&self) -> Option<Quantity> {
        match &self.quantity {
            CellQuantity::Defined { amount, .. } => Some(*amount),
            CellQuantity::Undefined => None,
        }
    }

    pub fn unit(&self) -> Option<&str> {
        match &self.quantity {
            CellQuantity::Defined { unit, .. } => Some(unit),
            CellQuantity::Undefined => None,
        }
    }

    /// `value / quantity` in USD per unit; defined only for positive quantity.
    pub fn unit_price(&self) -> Option<f64> {
        self.quantity()
            .filter(|q| q.is_positive())
            .map(|q| self.value.to_f64() / q.to_f64())
    }
}

/// Row counts by outcome.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct IngestReport {
    pub accepted_rows: u64,
    pub accepted_value: Money,
    pub rejected: BTreeMap<RejectReason, u64>,
}

impl IngestReport {
    pub fn rejected_total(&self) -> u64 {
        self.rejected.values().sum()
    }

    pub fn reject(&mut self, reason: RejectReason) {
        *self.rejected.entry(reason).or_default() += 1;
    }

    fn merge(&mut self, other: IngestReport) {
        self.accepted_rows += other.accepted_rows;
        self.accepted_value += other.accepted_value;
        for (k, v) in other.rejected {
            *self.rejected.entry(k).or_default() += v;
        }
    }
}

/// Deduplicated trade cells with their provenance.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TradePanel {
    pub cells: BTreeMap<CellKey, Cell>,
    /// Canonical exporter id → raw names merged into it.
    pub exporter_names: BTreeMap<String, BTreeSet<String>>,
    pub report: IngestReport,
    /// Whether the input carried an origin-country column.
    pub has_origin: bool,
}

impl TradePanel {
    pub fn new(has_origin: bool) -> Self {
        TradePanel {
            has_origin,
            ..Default::default()
        }
    }

    /// Adds one validated record.
    pub fn insert(&mut self, rec: TransactionRecord) {
        // from_raw already rejected names that normalize to nothing
        let Some(exporter_id) = normalize_exporter(&rec.exporter_name) else {
            self.report.reject(RejectReason::EmptyExporter);
            return;
        };
        self.report.accepted_rows += rec.rows;
        self.report.accepted_value += rec.value;
        self.exporter_names
            .entry(exporter_id.clone())
            .or_default()
            .insert(rec.exporter_name.trim().to_string());
        let key = CellKey {
            year: rec.year,
            product: rec.product.clone(),
            importer_id: rec.importer_id.clone(),
            exporter_id,
        };
        let cell = Cell::from_record(&rec);
        match self.cells.get_mut(&key) {
            Some(existing) => existing.merge(cell),
            None => {
                self.cells.insert(key, cell);
            }
        }
    }

    /// Validates and adds one raw row, counting it if rejected.
    pub fn push_raw(&mut self, raw: &RawRow) {
        match TransactionRecord::from_raw(raw) {
            Ok(rec) => self.insert(rec),
            Err(reason) => self.report.reject(reason),
        }
    }

    /// Merges a panel built from another shard of the same input.
    pub fn merge(&mut self, other: TradePanel) {
        self.has_origin |= other.has_origin;
        self.report.merge(other.report);
        for (id, names) in other.exporter_names {
            self.exporter_names.entry(id).or_default().extend(names);
        }
        for (key, cell) in other.cells {
            match self.cells.get_mut(&key) {
                Some(existing) => existing.merge(cell),
                None => {
                    self.cells.insert(key, cell);
                }
            }
        }
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn total_value(&self) -> Money {
        self.cells.values().map(|c| c.value).sum()
    }

    pub fn years(&self) -> BTreeSet<i32> {
        self.cells.keys().map(|k| k.year).collect()
    }

    /// Sub-panel of the years accepted by `keep`.
    pub fn restrict_years(&self, keep: impl Fn(i32) -> bool) -> TradePanel {
        let cells: BTreeMap<_, _> = self
            .cells
            .iter()
            .filter(|(k, _)| keep(k.year))
            .map(|(k, c)| (k.clone(), c.clone()))
            .collect();
        self.with_cells(cells)
    }

    fn with_cells(&self, cells: BTreeMap<CellKey, Cell>) -> TradePanel {
        let ids: BTreeSet<&str> = cells.keys().map(|k| k.exporter_id.as_str()).collect();
        let exporter_names = self
            .exporter_names
            .iter()
            .filter(|(id, _)| ids.contains(id.as_str()))
            .map(|(id, n)| (id.clone(), n.clone()))
            .collect();
        TradePanel {
            cells,
            exporter_names,
            report: self.report.clone(),
            has_origin: self.has_origin,
        }
    }
}

/// Builds a panel from a stream of raw rows.
pub fn ingest<'a>(rows: impl IntoIterator<Item = &'a RawRow>, has_origin: bool) -> TradePanel {
    let mut panel = TradePanel::new(has_origin);
    for raw in rows {
        panel.push_raw(raw);
    }
    panel
}

/// Restricts a panel to cells whose exporter origin matches `country_tag`.
pub fn filter_partner(panel: &TradePanel, country_tag: &str) -> Result<TradePanel> {
    if !panel.has_origin {
        return Err(Error::Config(
            "partner filter requested but the input has no origin_country column".into(),
        ));
    }
    let tag = country_tag.trim().to_uppercase();
    let cells = panel
        .cells
        .iter()
        .filter(|(_, c)| c.origins.contains(&tag))
        .map(|(k, c)| (k.clone(), c.clone()))
        .collect();
    Ok(panel.with_cells(cells))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct YearCoverage {
    pub year: i32,
    pub import_value_usd: Money,
    pub transactions: u64,
    pub pairs: usize,
    pub importers: usize,
    pub exporters: usize,
}

/// Per-year coverage totals.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CoverageSummary {
    pub years: Vec<YearCoverage>,
}

pub fn coverage_summary(panel: &TradePanel) -> CoverageSummary {
    #[derive(Default)]
    struct Acc<'a> {
        value: Money,
        rows: u64,
        pairs: BTreeSet<(&'a str, &'a str)>,
        importers: BTreeSet<&'a str>,
        exporters: BTreeSet<&'a str>,
    }
    let mut by_year: BTreeMap<i32, Acc> = BTreeMap::new();
    for (k, c) in &panel.cells {
        let a = by_year.entry(k.year).or_default();
        a.value += c.value;
        a.rows += c.rows;
        a.pairs.insert((&k.importer_id, &k.exporter_id));
        a.importers.insert(&k.importer_id);
        a.exporters.insert(&k.exporter_id);
    }
    CoverageSummary {
        years: by_year
            .into_iter()
            .map(|(year, a)| YearCoverage {
                year,
                import_value_usd: a.value,
                transactions: a.rows,
                pairs: a.pairs.len(),
                importers: a.importers.len(),
                exporters: a.exporters.len(),
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn raw(year: i32, imp: &str, exp: &str, hs: &str, v: &str, q: &str, unit: &str) -> RawRow {
        RawRow {
            year: year.to_string(),
            importer_id: imp.into(),
            exporter_name: exp.into(),
            origin_country: None,
            hs10: hs.into(),
            value_usd: v.into(),
            quantity: q.into(),
            unit: unit.into(),
            n_rows: None,
        }
    }

    const HS: &str = "8471300000";

    #[test]
    fn additive_aggregation() {
        let rows = [
            raw(2015, "900", "Acme SA", HS, "10", "2", "kg"),
            raw(2015, "900", "ACME", HS, "5", "1", "KG"),
        ];
        let panel = ingest(&rows, false);
        assert_eq!(panel.len(), 1);
        let cell = panel.cells.values().next().unwrap();
        assert_eq!(cell.value, Money::from_cents(1500));
        assert_eq!(cell.quantity(), Some(Quantity::from_micros(3_000_000)));
        assert_eq!(cell.unit_price(), Some(5.0));
        assert_eq!(cell.rows, 2);
        assert_eq!(panel.exporter_names["ACME"].len(), 2);
    }

    #[test]
    fn mixed_units_drop_quantity() {
        let rows = [
            raw(2015, "900", "Acme", HS, "10", "2", "KG"),
            raw(2015, "900", "Acme", HS, "5", "1", "L"),
        ];
        let panel = ingest(&rows, false);
        let cell = panel.cells.values().next().unwrap();
        assert_eq!(cell.value, Money::from_cents(1500));
        assert_eq!(cell.quantity, CellQuantity::Undefined);
        assert_eq!(cell.unit_price(), None);
    }

    #[test]
    fn empty_stream() {
        let panel = ingest(&[], false);
        assert!(panel.is_empty());
        assert_eq!(panel.report, IngestReport::default());
        assert!(coverage_summary(&panel).years.is_empty());
    }

    #[test]
    fn rejections_are_counted() {
        let rows = [
            raw(2015, "900", "Acme", HS, "-1", "2", "KG"),
            raw(2015, "900", "Acme", HS, "1", "-2", "KG"),
            raw(2015, "900", "...", HS, "1", "2", "KG"),
            raw(2015, "900", "Acme", "123", "1", "2", "KG"),
            raw(2015, "", "Acme", HS, "1", "2", "KG"),
            raw(2015, "900", "Acme", HS, "abc", "2", "KG"),
            raw(2015, "900", "Acme", HS, "1", "x", "KG"),
        ];
        let mut bad_year = raw(0, "900", "Acme", HS, "1", "2", "KG");
        bad_year.year = "20x5".into();
        let panel = ingest(rows.iter().chain([&bad_year]), false);
        assert!(panel.is_empty());
        assert_eq!(panel.report.rejected_total(), 8);
        assert_eq!(panel.report.rejected[&RejectReason::NegativeValue], 1);
        assert_eq!(panel.report.rejected[&RejectReason::NegativeQuantity], 1);
        assert_eq!(panel.report.rejected[&RejectReason::EmptyExporter], 1);
        assert_eq!(panel.report.rejected[&RejectReason::InvalidProduct], 1);
        assert_eq!(panel.report.rejected[&RejectReason::MalformedYear], 1);
    }

    #[test]
    fn coverage_examples() {
        let panel = ingest(&[raw(2012, "1", "A", HS, "3.25", "1", "U")], false);
        let cov = coverage_summary(&panel);
        assert_eq!(
            cov.years,
            vec![YearCoverage {
                year: 2012,
                import_value_usd: Money::from_cents(325),
                transactions: 1,
                pairs: 1,
                importers: 1,
                exporters: 1,
            }]
        );

        let rows = [
            raw(2012, "1", "A", HS, "1", "1", "U"),
            raw(2013, "1", "B", HS, "1", "1", "U"),
            raw(2013, "2", "B", "8471300001", "1", "1", "U"),
        ];
        let panel = ingest(&rows, false).restrict_years(|y| y == 2013);
        let cov = coverage_summary(&panel);
        assert_eq!(cov.years.len(), 1);
        assert_eq!(cov.years[0].year, 2013);
        assert_eq!(cov.years[0].pairs, 2);
        assert_eq!(cov.years[0].exporters, 1);
    }

    #[test]
    fn partner_filter() {
        let mut rows = vec![
            raw(2012, "1", "A", HS, "1", "1", "U"),
            raw(2012, "1", "B", HS, "1", "1", "U"),
            raw(2012, "2", "C", HS, "1", "1", "U"),
        ];
        rows[0].origin_country = Some("us".into());
        rows[1].origin_country = Some("DE".into());
        rows[2].origin_country = Some("US".into());
        let panel = ingest(&rows, true);
        let us = filter_partner(&panel, "US").unwrap();
        assert_eq!(us.len(), 2);
        assert!(us.exporter_names.contains_key("A") && !us.exporter_names.contains_key("B"));
        assert!(filter_partner(&panel, "FR").unwrap().is_empty());

        let no_origin = ingest(&rows[..1], false);
        assert!(matches!(filter_partner(&no_origin, "US"), Err(Error::Config(_))));
    }

    #[test]
    fn shard_merge_matches_single_pass() {
        let rows = [
            raw(2012, "1", "A", HS, "1.10", "1", "U"),
            raw(2012, "1", "a sa", HS, "2.20", "1", "U"),
            raw(2012, "2", "A", HS, "3", "", "U"),
            raw(2013, "2", "A", HS, "4", "1", "L"),
            raw(2013, "2", "A", HS, "-4", "1", "L"),
        ];
        let whole = ingest(&rows, false);
        let mut left = ingest(&rows[3..], false);
        left.merge(ingest(&rows[..3], false));
        assert_eq!(left, whole);
    }
}
