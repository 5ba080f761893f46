use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::json;
use twosided_core::aggregate::{
    assumption_diagnostics, bilateral_markups, markup_series, price_distortion, scenario_series,
    write_markups_csv, write_price_distortion_csv, write_series_csv, Scenario, SeriesRow,
};
use twosided_core::concentration::{
    compute_shares, concentration_report, summarize, write_aggregate_csv, write_concentration_csv,
    write_shares_csv,
};
use twosided_core::estimate::{
    build_quads, estimate_by_group, lagged_share_instruments, phi_histogram, write_estimates_csv,
    GmmConfig, PhiHistogram,
};
use twosided_core::oracle::{equilibrium_dump, simulate, ScenarioConfig};
use twosided_core::panel::{filter_partner, ingest_csv, write_coverage_json, write_exporter_map_csv, write_panel_csv};
use twosided_core::{Error, TradePanel};

use crate::config::{resolve, Layers, ParamArgs, Resolved, RunConfigFile};
use crate::manifest::RunManifest;
use crate::svg::{line_and_histogram, line_chart, Series};
use crate::{Cli, CliError, Command, InstrumentChoice, ScenarioChoice};

fn require_file(path: &Path) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Usage(format!("input file not found: {}", path.display())))
    }
}

fn placed(dir: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        dir.join(p)
    }
}

/// Sibling of the primary output.
fn sibling(out: &Path, name: &str) -> PathBuf {
    out.with_file_name(name)
}

fn buffer<F>(f: F) -> Result<Vec<u8>, CliError>
where
    F: FnOnce(&mut Vec<u8>) -> twosided_core::Result<()>,
{
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

fn json_bytes<T: serde::Serialize>(v: &T) -> Result<Vec<u8>, CliError> {
    let mut b = serde_json::to_vec_pretty(v).map_err(|e| CliError::Runtime(e.to_string()))?;
    b.push(b'\n');
    Ok(b)
}

fn load_panel(m: &mut RunManifest, path: &Path) -> Result<TradePanel, CliError> {
    let data = m.input(path)?;
    Ok(ingest_csv(data.as_slice())?)
}

struct Ctx {
    file: RunConfigFile,
    out_dir: Option<PathBuf>,
}

impl Ctx {
    fn resolve(&self, params: ParamArgs, phi_from: Option<&Path>, min_quads: Option<usize>) -> Result<Resolved, CliError> {
        if let Some(p) = phi_from {
            require_file(p)?;
        }
        resolve(Layers {
            flags: params,
            phi_from,
            out_dir: self.out_dir.as_deref(),
            min_quads,
            file: &self.file,
        })
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.run_config {
        Some(p) => RunConfigFile::load(p)?,
        None => RunConfigFile::default(),
    };
    if let Some(n) = cli.threads.or(file.threads) {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    let ctx = Ctx {
        file,
        out_dir: cli.out_dir.clone(),
    };
    match cli.command {
        Command::Ingest { inputs, partner, out } => ingest(&ctx, &inputs, partner.as_deref(), &out),
        Command::Shares { panel, out } => shares(&ctx, &panel, &out),
        Command::Hhi { panel, out } => hhi(&ctx, &panel, &out),
        Command::Markup {
            panel,
            params,
            phi_from,
            output_weights,
            out,
        } => markup(&ctx, &panel, params, phi_from.as_deref(), output_weights.as_deref(), &out),
        Command::Estimate {
            panel,
            params,
            instruments,
            two_step,
            min_quads,
            out,
        } => estimate(&ctx, &panel, params, instruments, two_step, min_quads, &out),
        Command::Counterfactual {
            panel,
            scenario,
            params,
            phi_from,
            out,
        } => counterfactual(&ctx, &panel, scenario, params, phi_from.as_deref(), &out),
        Command::Simulate { config, seed, out } => simulate_cmd(&ctx, &config, seed, &out),
        Command::Report {
            panel,
            params,
            phi_from,
            histogram,
            out,
        } => report(&ctx, &panel, params, phi_from.as_deref(), histogram.as_deref(), &out),
    }
}

fn ingest(ctx: &Ctx, inputs: &[PathBuf], partner: Option<&str>, out: &Path) -> Result<(), CliError> {
    for p in inputs {
        require_file(p)?;
    }
    let r = ctx.resolve(ParamArgs::default(), None, None)?;
    let out = placed(&r.out_dir, out);
    let mut m = RunManifest::new("ingest");
    let data: Vec<Vec<u8>> = inputs.iter().map(|p| m.input(p)).collect::<Result<_, _>>()?;
    let shards: Vec<TradePanel> = data
        .par_iter()
        .map(|d| ingest_csv(d.as_slice()))
        .collect::<twosided_core::Result<_>>()?;
    let mut shards = shards.into_iter();
    let mut panel = shards.next().expect("at least one input");
    for s in shards {
        if s.has_origin != panel.has_origin {
            return Err(Error::Schema("shards disagree on the origin_country column".into()).into());
        }
        panel.merge(s);
    }
    if let Some(tag) = partner {
        panel = filter_partner(&panel, tag)?;
    }
    m.output(&out, &buffer(|b| write_panel_csv(&panel, b))?)?;
    m.output(&sibling(&out, "exporter_map.csv"), &buffer(|b| write_exporter_map_csv(&panel, b))?)?;
    m.output(&sibling(&out, "coverage.json"), &buffer(|b| write_coverage_json(&panel, b))?)?;
    m.settings = json!({ "partner": partner, "accepted_rows": panel.report.accepted_rows, "cells": panel.len() });
    m.finish(out.parent().unwrap_or(Path::new(".")))?;
    Ok(())
}

fn shares(ctx: &Ctx, panel_path: &Path, out: &Path) -> Result<(), CliError> {
    require_file(panel_path)?;
    let r = ctx.resolve(ParamArgs::default(), None, None)?;
    let out = placed(&r.out_dir, out);
    let mut m = RunManifest::new("shares");
    let panel = load_panel(&mut m, panel_path)?;
    let table = compute_shares(&panel)?;
    m.output(&out, &buffer(|b| write_shares_csv(&table, b))?)?;
    m.settings = json!({ "markets": table.markets.len(), "excluded_zero_value": table.excluded_zero_value });
    m.finish(out.parent().unwrap_or(Path::new(".")))?;
    Ok(())
}

fn hhi(ctx: &Ctx, panel_path: &Path, out: &Path) -> Result<(), CliError> {
    require_file(panel_path)?;
    let r = ctx.resolve(ParamArgs::default(), None, None)?;
    let out = placed(&r.out_dir, out);
    let mut m = RunManifest::new("hhi");
    let panel = load_panel(&mut m, panel_path)?;
    let report = concentration_report(&compute_shares(&panel)?);
    m.output(&out, &buffer(|b| write_concentration_csv(&report, b))?)?;
    m.output(&sibling(&out, "aggregate_concentration.csv"), &buffer(|b| write_aggregate_csv(&report, b))?)?;
    m.output(&sibling(&out, "concentration_summary.json"), &json_bytes(&summarize(&report))?)?;
    m.settings = json!({ "product_years": report.products.len() });
    m.finish(out.parent().unwrap_or(Path::new(".")))?;
    Ok(())
}

fn read_weights(path: &Path, m: &mut RunManifest) -> Result<BTreeMap<String, f64>, CliError> {
    let data = m.input(path)?;
    let mut rdr = csv::Reader::from_reader(data.as_slice());
    let mut out = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::Runtime(e.to_string()))?;
        let (Some(id), Some(w)) = (rec.get(0), rec.get(1)) else {
            return Err(Error::Schema("output weights need importer_id,weight".into()).into());
        };
        let w: f64 = w
            .trim()
            .parse()
            .map_err(|_| Error::Schema(format!("bad weight `{w}` for {id}")))?;
        out.insert(id.trim().to_string(), w);
    }
    Ok(out)
}

fn markup(
    ctx: &Ctx,
    panel_path: &Path,
    params: ParamArgs,
    phi_from: Option<&Path>,
    weights: Option<&Path>,
    out: &Path,
) -> Result<(), CliError> {
    require_file(panel_path)?;
    if let Some(w) = weights {
        require_file(w)?;
    }
    let r = ctx.resolve(params, phi_from, None)?;
    let out = placed(&r.out_dir, out);
    let mut m = RunManifest::new("markup");
    let panel = load_panel(&mut m, panel_path)?;
    let output_weights = weights.map(|w| read_weights(w, &mut m)).transpose()?;
    let table = compute_shares(&panel)?;
    let conc = concentration_report(&table);
    let markups = bilateral_markups(&table, &r.params);
    let series = markup_series(&conc, &markups, &r.params)?;
    let diag = assumption_diagnostics(&markups, r.thresholds);
    let distortion = price_distortion(&markups, &r.params, output_weights.as_ref())?;
    m.output(&out, &buffer(|b| write_markups_csv(&markups, b))?)?;
    m.output(&sibling(&out, "markup_series.csv"), &buffer(|b| write_series_csv(&series, b))?)?;
    m.output(&sibling(&out, "diagnostics.json"), &json_bytes(&diag)?)?;
    m.output(
        &sibling(&out, "price_distortion.csv"),
        &buffer(|b| write_price_distortion_csv(&distortion, b))?,
    )?;
    m.settings = serde_json::to_value(&r).map_err(|e| CliError::Runtime(e.to_string()))?;
    m.finish(out.parent().unwrap_or(Path::new(".")))?;
    Ok(())
}

fn estimate(
    ctx: &Ctx,
    panel_path: &Path,
    params: ParamArgs,
    instruments: InstrumentChoice,
    two_step: bool,
    min_quads: Option<usize>,
    out: &Path,
) -> Result<(), CliError> {
    require_file(panel_path)?;
    let r = ctx.resolve(params, None, min_quads)?;
    let out = placed(&r.out_dir, out);
    let mut m = RunManifest::new("estimate");
    let panel = load_panel(&mut m, panel_path)?;
    let table = compute_shares(&panel)?;
    let mut quads = build_quads(&table);
    let built = quads.len();
    if instruments == InstrumentChoice::Lagged {
        quads = lagged_share_instruments(&quads, &table);
    }
    let config = GmmConfig {
        two_step,
        ..GmmConfig::default()
    };
    let est = estimate_by_group(&quads, &r.params, &config, r.min_quads);
    let hist: PhiHistogram = phi_histogram(&est, 20);
    m.output(&out, &buffer(|b| write_estimates_csv(&est, b))?)?;
    m.output(&sibling(&out, "phi_histogram.json"), &json_bytes(&hist)?)?;
    m.settings = json!({
        "rho": r.params.rho(),
        "eta": r.params.eta(),
        "theta": r.params.theta(),
        "instruments": format!("{instruments:?}").to_lowercase(),
        "two_step": two_step,
        "min_quads": r.min_quads,
        "quads_built": built,
        "quads_used": quads.len(),
    });
    m.finish(out.parent().unwrap_or(Path::new(".")))?;
    Ok(())
}

fn scenarios(choice: ScenarioChoice) -> Vec<Scenario> {
    match choice {
        ScenarioChoice::Baseline => vec![Scenario::Baseline],
        ScenarioChoice::NoBuyerPower => vec![Scenario::NoBuyerPower],
        ScenarioChoice::StandardHhi => vec![Scenario::StandardHhi],
        ScenarioChoice::All => Scenario::ALL.to_vec(),
    }
}

fn all_series(panel: &TradePanel, r: &Resolved, which: &[Scenario]) -> Result<Vec<SeriesRow>, CliError> {
    let table = compute_shares(panel)?;
    let conc = concentration_report(&table);
    let mut rows = Vec::new();
    for &sc in which {
        rows.extend(scenario_series(&table, &conc, &r.params, sc)?);
    }
    Ok(rows)
}

fn counterfactual(
    ctx: &Ctx,
    panel_path: &Path,
    scenario: ScenarioChoice,
    params: ParamArgs,
    phi_from: Option<&Path>,
    out: &Path,
) -> Result<(), CliError> {
    require_file(panel_path)?;
    let r = ctx.resolve(params, phi_from, None)?;
    let out = placed(&r.out_dir, out);
    let mut m = RunManifest::new("counterfactual");
    let panel = load_panel(&mut m, panel_path)?;
    let rows = all_series(&panel, &r, &scenarios(scenario))?;
    m.output(&out, &buffer(|b| write_series_csv(&rows, b))?)?;
    m.settings = serde_json::to_value(&r).map_err(|e| CliError::Runtime(e.to_string()))?;
    m.finish(out.parent().unwrap_or(Path::new(".")))?;
    Ok(())
}

fn simulate_cmd(ctx: &Ctx, config: &Path, seed: Option<u64>, out: &Path) -> Result<(), CliError> {
    require_file(config)?;
    let r = ctx.resolve(ParamArgs::default(), None, None)?;
    let out = placed(&r.out_dir, out);
    let mut m = RunManifest::new("simulate");
    let text = m.input(config)?;
    let mut cfg: ScenarioConfig = serde_json::from_slice(&text)
        .map_err(|e| CliError::Usage(format!("invalid scenario {}: {e}", config.display())))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    let sim = simulate(&cfg)?;
    m.output(
        &out,
        &buffer(|b| twosided_core::panel::write_raw_csv(&sim.rows, false, b))?,
    )?;
    m.output(&sibling(&out, "equilibrium.json"), &json_bytes(&equilibrium_dump(&sim))?)?;
    m.settings = json!({ "seed": cfg.seed, "markets": sim.markets.len(), "rows": sim.rows.len() });
    m.finish(out.parent().unwrap_or(Path::new(".")))?;
    Ok(())
}

fn report(
    ctx: &Ctx,
    panel_path: &Path,
    params: ParamArgs,
    phi_from: Option<&Path>,
    histogram: Option<&Path>,
    out: &Path,
) -> Result<(), CliError> {
    require_file(panel_path)?;
    if let Some(h) = histogram {
        require_file(h)?;
    }
    let r = ctx.resolve(params, phi_from, None)?;
    let out = placed(&r.out_dir, out);
    let mut m = RunManifest::new("report");
    let panel = load_panel(&mut m, panel_path)?;
    let rows = all_series(&panel, &r, &Scenario::ALL)?;
    let series: Vec<Series> = Scenario::ALL
        .iter()
        .map(|&sc| Series {
            name: sc.name(),
            points: rows
                .iter()
                .filter(|row| row.scenario == sc)
                .filter_map(|row| row.normalized_approx.map(|v| (row.year as f64, v)))
                .collect(),
        })
        .collect();
    let title = "Aggregate markup on imported inputs (first year = 1)";
    let svg = match histogram {
        Some(h) => {
            let data = m.input(h)?;
            let v: serde_json::Value =
                serde_json::from_slice(&data).map_err(|e| CliError::Runtime(format!("{}: {e}", h.display())))?;
            let edges: Vec<f64> = serde_json::from_value(v["bin_edges"].clone())
                .map_err(|e| CliError::Runtime(format!("{}: {e}", h.display())))?;
            let counts: Vec<usize> = serde_json::from_value(v["counts"].clone())
                .map_err(|e| CliError::Runtime(format!("{}: {e}", h.display())))?;
            line_and_histogram(title, &series, "Estimated phi across HS4 groups", &edges, &counts)
        }
        None => line_chart(title, &series),
    };
    m.output(&sibling(&out, "report_data.csv"), &buffer(|b| write_series_csv(&rows, b))?)?;
    m.output(&out, svg.as_bytes())?;
    m.settings = serde_json::to_value(&r).map_err(|e| CliError::Runtime(e.to_string()))?;
    m.finish(out.parent().unwrap_or(Path::new(".")))?;
    Ok(())
}
