use std::collections::BTreeMap;

use twosided_core::concentration::compute_shares;
use twosided_core::estimate::{
    build_quads, estimate_by_group, gmm_estimate, moment_value, objective_profile, share_difference_instruments,
    GmmConfig, GroupOutcome, MomentQuad,
};
use twosided_core::oracle::{
    draw_noise, emit_synthetic_panel, exporter_name, generate_network, importer_id, simulate, solve_equilibrium,
    DensityPath, Heterogeneity, ProductSpec, ScenarioConfig, SolverOptions,
};
use twosided_core::panel::ingest;
use twosided_core::ModelParams;

fn solved(seed: u64, ni: usize, ne: usize, density: f64, phi: f64) -> (twosided_core::oracle::SyntheticEconomy, twosided_core::oracle::EquilibriumOutcome) {
    let params = ModelParams::calibrated().with_phi(phi).unwrap();
    let econ = generate_network(seed, ni, ne, density, &Heterogeneity::default(), &params).unwrap();
    let out = solve_equilibrium(&econ, &SolverOptions::default()).unwrap();
    (econ, out)
}

#[test]
fn pipeline_shares_match_oracle_shares() {
    let (econ, out) = solved(8, 30, 20, 0.4, 0.5);
    let panel = emit_synthetic_panel(&out, &econ, 0, 0.0, 2016, "8471300000").unwrap();
    let table = compute_shares(&panel).unwrap();
    let m = table.market(2016, "8471300000").unwrap();
    let mut by_pair = BTreeMap::new();
    for c in &m.cells {
        by_pair.insert((m.importers[c.importer].clone(), m.exporters[c.exporter].clone()), c);
    }
    assert_eq!(by_pair.len(), econ.links.len());
    for (l, &(j, i)) in econ.links.iter().enumerate() {
        let c = by_pair[&(importer_id(j), exporter_name(i))];
        let truth = out.shares[l];
        assert!((c.s - truth.s).abs() <= 1e-10, "s {} vs {}", c.s, truth.s);
        assert!((c.x.unwrap() - truth.x).abs() <= 1e-10);
        assert!((c.x_r.unwrap() - truth.x_r).abs() <= 1e-10);
    }
}

#[test]
fn residual_at_true_phi_is_the_injected_noise() {
    let phi = 0.3;
    let params = ModelParams::calibrated().with_phi(phi).unwrap();
    let (econ, out) = solved(9, 25, 15, 0.5, phi);
    let noise = draw_noise(4, econ.links.len(), 0.1).unwrap();
    let mut by_exporter: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (l, &(_, i)) in econ.links.iter().enumerate() {
        by_exporter.entry(i).or_default().push(l);
    }
    let mut checked = 0;
    for (i, ls) in by_exporter {
        for w in ls.windows(2) {
            let (a, b) = (w[0], w[1]);
            let quad = MomentQuad {
                exporter_id: exporter_name(i),
                product: "8471300000".into(),
                year: 2016,
                importer_a: importer_id(econ.links[a].0),
                importer_b: importer_id(econ.links[b].0),
                log_price_diff: out.prices[a].ln() + noise[a] - out.prices[b].ln() - noise[b],
                shares_a: out.shares[a],
                shares_b: out.shares[b],
                instruments: share_difference_instruments(&out.shares[a], &out.shares[b]),
            };
            let g = moment_value(&quad, phi, &params).unwrap();
            assert!((g - (noise[a] - noise[b])).abs() <= 1e-9, "{g}");
            checked += 1;
        }
    }
    assert!(checked > 50);
}

fn scenario(products: Vec<ProductSpec>, noise_sd: f64) -> ScenarioConfig {
    ScenarioConfig {
        seed: 31,
        n_importers: 50,
        n_exporters: 120,
        density: DensityPath::Constant(0.08),
        first_year: 2014,
        n_years: 1,
        params: None,
        heterogeneity: Heterogeneity::default(),
        noise_sd,
        noise_seed: None,
        products,
        solver: None,
    }
}

fn spec(hs10: &str, phi: f64) -> ProductSpec {
    ProductSpec {
        hs10: hs10.into(),
        phi: Some(phi),
    }
}

#[test]
fn noiseless_profile_has_one_minimum_at_truth() {
    let sim = simulate(&scenario(vec![spec("3004902900", 0.4)], 0.0)).unwrap();
    let quads = build_quads(&compute_shares(&ingest(&sim.rows, false)).unwrap());
    let profile = objective_profile(&quads, &ModelParams::calibrated(), &GmmConfig::default()).unwrap();
    let argmin = profile
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .unwrap()
        .0;
    assert!(profile[..argmin].windows(2).all(|w| w[1].1 <= w[0].1));
    assert!(profile[argmin..].windows(2).all(|w| w[1].1 >= w[0].1));
    assert!((profile[argmin].0 - 0.4).abs() <= 0.011);
}

#[test]
fn single_group_estimate_equals_pooled() {
    let sim = simulate(&scenario(vec![spec("8471300000", 0.6)], 0.05)).unwrap();
    let quads = build_quads(&compute_shares(&ingest(&sim.rows, false)).unwrap());
    let est = estimate_by_group(&quads, &ModelParams::calibrated(), &GmmConfig::default(), 30);
    let (GroupOutcome::Estimated(pooled), Some(GroupOutcome::Estimated(group))) = (&est.pooled, est.groups.get("8471")) else {
        panic!("{est:?}");
    };
    assert_eq!(pooled.phi_hat, group.phi_hat);
    assert_eq!(pooled.objective, group.objective);
}

#[test]
fn group_specific_weights_are_recovered() {
    let products = vec![spec("3004902900", 0.2), spec("8471300000", 0.8)];
    let sim = simulate(&scenario(products, 0.0)).unwrap();
    let quads = build_quads(&compute_shares(&ingest(&sim.rows, false)).unwrap());
    let est = estimate_by_group(&quads, &ModelParams::calibrated(), &GmmConfig::default(), 30);
    for (group, truth) in [("3004", 0.2), ("8471", 0.8)] {
        match &est.groups[group] {
            GroupOutcome::Estimated(r) => assert!((r.phi_hat - truth).abs() <= 1e-4, "{group}: {}", r.phi_hat),
            other => panic!("{group}: {other:?}"),
        }
    }
}

#[test]
fn estimate_is_invariant_to_value_scale() {
    let sim = simulate(&scenario(vec![spec("8471300000", 0.5)], 0.05)).unwrap();
    let scaled: Vec<_> = sim
        .rows
        .iter()
        .map(|r| {
            let mut r = r.clone();
            let v: f64 = r.value_usd.parse().unwrap();
            r.value_usd = format!("{:.2}", v * 8.0);
            let q: f64 = r.quantity.parse().unwrap();
            r.quantity = format!("{:.6}", q * 8.0);
            r
        })
        .collect();
    let params = ModelParams::calibrated();
    let est = |rows: &[twosided_core::panel::RawRow]| {
        let quads = build_quads(&compute_shares(&ingest(rows, false)).unwrap());
        gmm_estimate(&quads, &params, &GmmConfig::default()).unwrap().phi_hat
    };
    let (a, b) = (est(&sim.rows), est(&scaled));
    assert!((a - b).abs() <= 1e-6, "{a} vs {b}");
}
