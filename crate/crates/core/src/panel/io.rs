//! CSV and JSON surfaces of the panel.
//!
//! Input schema (header required, column order free):
//! `year,importer_id,exporter_name,origin_country,hs10,value_usd,quantity,unit`.
//! `origin_country` is optional. The canonical panel file written by
//! [`write_panel_csv`] is itself valid input: it uses `exporter_id` in place of
//! `exporter_name` and carries an `n_rows` provenance column.

use std::io::{Read, Write};

use crate::error::{Error, Result};

use super::{coverage_summary, CellQuantity, RawRow, RejectReason, TradePanel};

struct Columns {
    year: usize,
    importer_id: usize,
    exporter: usize,
    origin: Option<usize>,
    hs10: usize,
    value: usize,
    quantity: usize,
    unit: usize,
    n_rows: Option<usize>,
}

impl Columns {
    fn from_header(header: &csv::StringRecord) -> Result<Self> {
        let find = |name: &str| header.iter().position(|h| h.trim() == name);
        let need = |name: &str| {
            find(name).ok_or_else(|| Error::Schema(format!("missing required column `{name}`")))
        };
        let exporter = find("exporter_name")
            .or_else(|| find("exporter_id"))
            .ok_or_else(|| Error::Schema("missing required column `exporter_name`".into()))?;
        Ok(Columns {
            year: need("year")?,
            importer_id: need("importer_id")?,
            exporter,
            origin: find("origin_country"),
            hs10: need("hs10")?,
            value: need("value_usd")?,
            quantity: need("quantity")?,
            unit: need("unit")?,
            n_rows: find("n_rows"),
        })
    }

    fn row(&self, rec: &csv::StringRecord) -> Option<RawRow> {
        let get = |i: usize| rec.get(i).map(str::to_string);
        Some(RawRow {
            year: get(self.year)?,
            importer_id: get(self.importer_id)?,
            exporter_name: get(self.exporter)?,
            origin_country: match self.origin {
                Some(i) => Some(get(i)?),
                None => None,
            },
            hs10: get(self.hs10)?,
            value_usd: get(self.value)?,
            quantity: get(self.quantity)?,
            unit: get(self.unit)?,
            n_rows: match self.n_rows {
                Some(i) => Some(get(i)?),
                None => None,
            },
        })
    }
}

/// Parses raw rows. Rows with the wrong field count come back as `Err`.
pub fn read_raw_csv<R: Read>(reader: R) -> Result<(Vec<Result<RawRow, RejectReason>>, bool)> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let header = rdr.headers()?.clone();
    let cols = Columns::from_header(&header)?;
    let width = header.len();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let row = match rec {
            Ok(r) if r.len() == width => cols.row(&r).ok_or(RejectReason::MalformedRow),
            Ok(_) => Err(RejectReason::MalformedRow),
            Err(e) if e.is_io_error() => return Err(e.into()),
            Err(_) => Err(RejectReason::MalformedRow),
        };
        rows.push(row);
    }
    Ok((rows, cols.origin.is_some()))
}

/// Reads a transaction CSV (raw or canonical) into a panel.
///
/// Origin tags separated by `|` (as written for cells merging several
/// origins) are split back into individual tags.
pub fn ingest_csv<R: Read>(reader: R) -> Result<TradePanel> {
    let (rows, has_origin) = read_raw_csv(reader)?;
    let mut panel = TradePanel::new(has_origin);
    for row in rows {
        match row {
            Ok(raw) => match raw.origin_country.as_deref() {
                Some(o) if o.contains('|') => {
                    for (k, tag) in o.split('|').enumerate() {
                        // split one canonical row into per-origin rows carrying no value
                        let mut part = raw.clone();
                        part.origin_country = Some(tag.to_string());
                        if k > 0 {
                            part.value_usd = "0".into();
                            part.quantity = match raw.quantity.trim() {
                                "" => String::new(),
                                _ => "0".into(),
                            };
                            part.n_rows = Some("0".into());
                        }
                        panel.push_raw(&part);
                    }
                }
                _ => panel.push_raw(&raw),
            },
            Err(reason) => panel.report.reject(reason),
        }
    }
    Ok(panel)
}

/// Writes raw-schema rows (used for synthetic panels).
pub fn write_raw_csv<W: Write>(rows: &[RawRow], has_origin: bool, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["year", "importer_id", "exporter_name"];
    if has_origin {
        header.push("origin_country");
    }
    header.extend(["hs10", "value_usd", "quantity", "unit"]);
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.year.as_str(), &r.importer_id, &r.exporter_name];
        if has_origin {
            rec.push(r.origin_country.as_deref().unwrap_or(""));
        }
        rec.extend([r.hs10.as_str(), &r.value_usd, &r.quantity, &r.unit]);
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Canonical panel CSV, sorted by year, product, importer and exporter.
pub fn write_panel_csv<W: Write>(panel: &TradePanel, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["year", "hs10", "importer_id", "exporter_id"];
    if panel.has_origin {
        header.push("origin_country");
    }
    header.extend(["value_usd", "quantity", "unit", "n_rows"]);
    w.write_record(&header)?;
    for (k, c) in &panel.cells {
        let (qty, unit) = match &c.quantity {
            CellQuantity::Defined { unit, amount } => (amount.to_string(), unit.clone()),
            CellQuantity::Undefined => (String::new(), String::new()),
        };
        let mut rec = vec![
            k.year.to_string(),
            k.product.clone(),
            k.importer_id.clone(),
            k.exporter_id.clone(),
        ];
        if panel.has_origin {
            rec.push(c.origins.iter().cloned().collect::<Vec<_>>().join("|"));
        }
        rec.extend([c.value.to_string(), qty, unit, c.rows.to_string()]);
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// `exporter_id,raw_name` pairs so merges can be audited.
pub fn write_exporter_map_csv<W: Write>(panel: &TradePanel, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["exporter_id", "raw_name"])?;
    for (id, names) in &panel.exporter_names {
        for name in names {
            w.write_record([id, name])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_coverage_json<W: Write>(panel: &TradePanel, mut writer: W) -> Result<()> {
    #[derive(serde::Serialize)]
    struct Doc<'a> {
        years: Vec<super::YearCoverage>,
        ingest: &'a super::IngestReport,
    }
    let doc = Doc {
        years: coverage_summary(panel).years,
        ingest: &panel.report,
    };
    serde_json::to_writer_pretty(&mut writer, &doc)?;
    writeln!(writer)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::Money;

    const INPUT: &str = "\
year,importer_id,exporter_name,origin_country,hs10,value_usd,quantity,unit
2014,900123,\"Acmé, S.A.\",US,8471.30.00.00,100.50,10,KG
2014,900123,ACME,US,8471300000,49.50,5,kg
2014,900124,Beta Ltda,DE,8471300000,20,2,L
2014,900124,Beta Ltda,US,8471300000,20,2,KG
2015,900124,Beta Ltda,DE,8471300000,-3,2,KG
2015,900124,Beta Ltda,DE,8471300000
";

    #[test]
    fn reads_and_aggregates() {
        let panel = ingest_csv(INPUT.as_bytes()).unwrap();
        assert!(panel.has_origin);
        assert_eq!(panel.len(), 2);
        assert_eq!(panel.total_value(), Money::from_cents(19000));
        assert_eq!(panel.report.rejected[&RejectReason::NegativeValue], 1);
        assert_eq!(panel.report.rejected[&RejectReason::MalformedRow], 1);
    }

    #[test]
    fn canonical_roundtrip() {
        let panel = ingest_csv(INPUT.as_bytes()).unwrap();
        let mut buf = Vec::new();
        write_panel_csv(&panel, &mut buf).unwrap();
        let again = ingest_csv(buf.as_slice()).unwrap();
        assert_eq!(again.cells, panel.cells);
        let mut buf2 = Vec::new();
        write_panel_csv(&again, &mut buf2).unwrap();
        assert_eq!(buf, buf2);
    }

    #[test]
    fn missing_column_is_schema_error() {
        let bad = "year,importer_id,exporter_name,hs10,value_usd,unit\n";
        assert!(matches!(ingest_csv(bad.as_bytes()), Err(Error::Schema(_))));
    }
}
