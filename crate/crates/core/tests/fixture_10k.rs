use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use serde_json::Value;
use twosided_core::concentration::{compute_shares, concentration_report};
use twosided_core::estimate::build_quads;
use twosided_core::panel::{filter_partner, ingest_csv};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn expected() -> Value {
    serde_json::from_str(&fs::read_to_string(fixture("panel_10k_expected.json")).unwrap()).unwrap()
}

fn close(a: f64, b: &Value) -> bool {
    (a - b.as_f64().unwrap()).abs() <= 1e-12
}

#[test]
fn ingest_matches_independent_counts() {
    let exp = expected();
    let panel = ingest_csv(fs::File::open(fixture("panel_10k.csv")).unwrap()).unwrap();
    assert_eq!(panel.report.accepted_rows, exp["accepted_rows"].as_u64().unwrap());
    assert_eq!(panel.total_value().cents(), exp["accepted_value_cents"].as_i64().unwrap() as i128);
    let rejected: BTreeMap<String, u64> = serde_json::from_value(exp["rejected"].clone()).unwrap();
    let got: BTreeMap<String, u64> = panel
        .report
        .rejected
        .iter()
        .map(|(k, v)| (serde_json::to_value(k).unwrap().as_str().unwrap().to_string(), *v))
        .collect();
    assert_eq!(got, rejected);
    assert_eq!(panel.len() as u64, exp["cells"].as_u64().unwrap());
    for (year, cents) in exp["year_value_cents"].as_object().unwrap() {
        let y: i32 = year.parse().unwrap();
        let total: i128 = panel.cells.iter().filter(|(k, _)| k.year == y).map(|(_, c)| c.value.cents()).sum();
        assert_eq!(total, cents.as_i64().unwrap() as i128, "{year}");
    }
    let us = filter_partner(&panel, "us").unwrap();
    assert_eq!(us.len() as u64, exp["cells_with_us_origin"].as_u64().unwrap());
}

#[test]
fn indices_and_quads_match_independent_recount() {
    let exp = expected();
    let panel = ingest_csv(fs::File::open(fixture("panel_10k.csv")).unwrap()).unwrap();
    let table = compute_shares(&panel).unwrap();
    let report = concentration_report(&table);
    let markets = exp["markets"].as_object().unwrap();
    assert_eq!(report.products.len(), markets.len());
    for ((year, product), p) in &report.products {
        let e = &markets[&format!("{year}/{product}")];
        assert!(close(p.hhi_suppliers_net, &e["hhi_suppliers_net"]), "{year}/{product}");
        assert!(close(p.hhi_suppliers_std, &e["hhi_suppliers_std"]));
        assert!(close(p.hhi_buyers_std, &e["hhi_buyers_std"]));
        assert!(close(p.alpha, &e["alpha"]));
        match p.hhi_buyers_net {
            Some(b) => assert!(close(b, &e["hhi_buyers_net"]), "{year}/{product}"),
            None => assert!(e["hhi_buyers_net"].is_null()),
        }
    }
    for (year, a) in &report.aggregates {
        let e = &exp["aggregates"][year.to_string()];
        assert!(close(a.suppliers_net, &e["suppliers_net"]));
        assert!(close(a.suppliers_std, &e["suppliers_std"]));
        assert!(close(a.buyers_std, &e["buyers_std"]));
        assert!(close(a.buyers_net.unwrap(), &e["buyers_net"]));
    }
    assert_eq!(build_quads(&table).len() as u64, exp["quads"].as_u64().unwrap());
}
