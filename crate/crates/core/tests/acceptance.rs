//! Acceptance suite. Each test prints one `criterion N: PASS|FAIL` line to
//! stderr (unbuffered, so it shows without `--nocapture`) and asserts.

use std::f64::consts::PI;
use std::io::Write;
use std::time::Instant;

use psns_core::diagnostics::{
    certify, contraction_test, estimate_cb, fit_power_law, mp1_moments, mp1_trend, scaling_identity_check,
    structure_function, FieldSampler, StructureOptions,
};
use psns_core::dynamics::{ProuseParams, SigmaProfile};
use psns_core::integrator::{
    base_step, run_coupled_pair_on_stream, run_ensemble, run_scaled_pair, run_scaled_pair_with_path,
    InitialCondition, SeedPolicy, SimConfig, Simulation,
};
use psns_core::io::Checkpoint;
use psns_core::stochastic::{default_forcing, BrownianPath, NoiseMode, NoiseSpec};
use psns_core::torus::{h_norm_sq, Torus, TorusGeometry, WaveIndex};

const TWO_PI: f64 = 2.0 * PI;

fn report(criterion: u32, title: &str, pass: bool, detail: String, started: Instant) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let line = format!(
        "criterion {criterion:>2}: {verdict} {title} ({detail}; {:.1} s)\n",
        started.elapsed().as_secs_f64()
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
}

fn prouse(b: f64) -> SigmaProfile {
    SigmaProfile::prouse(ProuseParams { nu: 0.1, b, k: 1.0, a1: 0.5, a2: 0.5 }).unwrap()
}

fn torus(n: u32) -> std::sync::Arc<Torus> {
    Torus::new(TorusGeometry::new(TWO_PI, n)).unwrap()
}

#[test]
fn criterion_01_operator_identities() {
    let t0 = Instant::now();
    let s = FieldSampler::new(&torus(8), 101);
    let anti = certify("trilinear_antisym", &s, 1000, &prouse(4.0)).unwrap();
    let skew = certify("trilinear_skew", &s, 1000, &prouse(4.0)).unwrap();
    let pass = anti.pass && skew.pass && anti.tolerance == 1e-10 && skew.tolerance == 1e-10;
    report(
        1,
        "trilinear identities at n = 8",
        pass,
        format!("worst relative defects {:.2e}, {:.2e} over 1000 triples", -anti.worst_margin, -skew.worst_margin),
        t0,
    );
    assert!(pass, "{anti:?} {skew:?}");
}

#[test]
fn criterion_02_energy_production_lower_bound() {
    let t0 = Instant::now();
    let s = FieldSampler::new(&torus(8), 202);
    let b4 = certify("lemma2", &s, 1000, &prouse(4.0)).unwrap();
    let b5 = certify("lemma2", &s, 1000, &prouse(5.0)).unwrap();
    let lin = certify("lemma2", &s, 1000, &SigmaProfile::linear(0.1).unwrap()).unwrap();
    let pass = b4.pass && b5.pass && lin.pass && b4.tolerance == 1e-9 && lin.tolerance == 1e-10;
    report(
        2,
        "energy production >= nu ||u||_V^2",
        pass,
        format!(
            "worst margins b=4 {:.2e}, b=5 {:.2e}; linear equality defect {:.2e}",
            b4.worst_margin, b5.worst_margin, -lin.worst_margin
        ),
        t0,
    );
    assert!(pass, "{b4:?} {b5:?} {lin:?}");
}

#[test]
fn criterion_03_monotonicity() {
    let t0 = Instant::now();
    let s = FieldSampler::new(&torus(8), 303);
    let strong = certify("lemma3", &s, 1000, &prouse(4.0)).unwrap();
    let weak = certify("lemma3_weak", &s, 1000, &SigmaProfile::pure_power(0.1).unwrap()).unwrap();
    let pass = strong.pass && weak.pass;
    report(
        3,
        "monotonicity (prouse strong, pure power weak)",
        pass,
        format!("worst margins {:.2e}, {:.2e} over 1000 pairs", strong.worst_margin, weak.worst_margin),
        t0,
    );
    assert!(pass, "{strong:?} {weak:?}");
}

#[test]
fn criterion_04_embedding_and_product_rule() {
    let t0 = Instant::now();
    let t = torus(8);
    let pp = SigmaProfile::pure_power(0.1).unwrap();
    let a = certify("embedding_X", &FieldSampler::new(&t, 404), 1000, &pp).unwrap();
    let b = certify("embedding_X", &FieldSampler::new(&t, 405), 1000, &pp).unwrap();
    let (ca, cb) = (a.constant.unwrap(), b.constant.unwrap());
    let spread = (ca - cb).abs() / ca.max(cb);
    let product = certify("product_rule", &FieldSampler::new(&t, 406), 100, &pp).unwrap();
    let pass = a.pass && b.pass && spread <= 0.10 && product.pass && product.tolerance == 1e-10;
    report(
        4,
        "L6 <= C' X embedding and product rule",
        pass,
        format!(
            "C' = {ca:.4}, {cb:.4} (spread {:.1}%); product rule defect {:.2e} on 100 fields",
            100.0 * spread,
            -product.worst_margin
        ),
        t0,
    );
    assert!(pass, "{a:?} {b:?} {product:?}");
}

#[test]
fn criterion_05_ou_oracle() {
    let t0 = Instant::now();
    let idx = WaveIndex::new([1, 1, 0], 2).unwrap();
    let (sigma, nu) = (0.3, 0.1);
    let lambda_k = 2.0;
    let rate = nu * lambda_k;
    let noise = NoiseSpec::additive(vec![NoiseMode { k: idx.k, j: idx.j, sigma }]).unwrap();
    let horizon = 50.0 / rate;
    let mut cfg = SimConfig::new(TorusGeometry::new(TWO_PI, 2), SigmaProfile::linear(nu).unwrap(), noise, 0.01, horizon);
    cfg.seed = 55;
    cfg.record_every = 10;
    let ens = run_ensemble(&cfg, 64, SeedPolicy::Streams).unwrap();
    assert!(ens.records.iter().all(|r| r.is_ok()));
    let burn = 5.0 / rate;
    let means: Vec<f64> = ens
        .completed()
        .map(|r| {
            let tail: Vec<f64> = r.samples.iter().filter(|s| s.t >= burn).map(|s| s.h * s.h).collect();
            tail.iter().sum::<f64>() / tail.len() as f64
        })
        .collect();
    let m = means.len() as f64;
    let mean = means.iter().sum::<f64>() / m;
    let se = (means.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0) / m).sqrt();
    let oracle = sigma * sigma / (2.0 * rate);
    let pass = means.len() == 64 && (mean - oracle).abs() <= 3.0 * se;
    report(
        5,
        "single-mode OU stationary second moment",
        pass,
        format!("{mean:.5} vs sigma^2/(2 nu lambda_k) = {oracle:.5}, SE {se:.1e}, M = 64"),
        t0,
    );
    assert!(pass);
}

#[test]
fn criterion_06_contraction() {
    let t0 = Instant::now();
    let n = 4;
    let t = torus(n);
    let nu = 0.1;
    let cb = estimate_cb(&FieldSampler::new(&t, 606), 1000, nu).unwrap();
    let noise = default_forcing(0.1);
    let lg = noise.certificates().lipschitz;
    let ic = InitialCondition::Random { decay: 2.0, amplitude: 0.3, bound: 2.0 };
    let run = |dt: f64| {
        let mut cfg = SimConfig::new(*t.geometry(), prouse(4.0), noise.clone(), dt, 0.5);
        cfg.seed = 66;
        let pairs: Vec<_> = (0..32u64)
            .map(|p| {
                let a = ic.build(&t, 600, 2 * p).unwrap();
                let b = ic.build(&t, 600, 2 * p + 1).unwrap();
                run_coupled_pair_on_stream(&cfg, &a, &b, p).unwrap()
            })
            .collect();
        (cfg, contraction_test(&pairs, cb.value, lg, nu, 0.05).unwrap())
    };
    let (cfg, coarse) = run(1e-3);
    let (_, fine) = run(5e-4);
    let u0 = ic.build(&t, 600, 0).unwrap();
    let same = run_coupled_pair_on_stream(&cfg, &u0, &u0, 0).unwrap();
    let zero = same.diff_h_sq.iter().chain(&same.diff_vprime_sq).all(|&d| d == 0.0) && same.final_a == same.final_b;
    let shrinks = fine.slack <= coarse.slack;
    let pass = coarse.pass && shrinks && zero;
    report(
        6,
        "contraction functional over 32 coupled pairs",
        pass,
        format!(
            "C_B = {:.1}; lhs/rhs = {:.3e} at dt 1e-3, {:.3e} at dt 5e-4; slack {:.2e} -> {:.2e}; identical data zero: {zero}",
            cb.value,
            coarse.lhs / coarse.rhs,
            fine.lhs / fine.rhs,
            coarse.slack,
            fine.slack
        ),
        t0,
    );
    assert!(pass);
}

fn scaling_config(dt: f64, seed: u64) -> SimConfig {
    let mut cfg = SimConfig::new(TorusGeometry::new(TWO_PI, 4), SigmaProfile::pure_power(0.1).unwrap(), default_forcing(0.2), dt, 0.5);
    cfg.seed = seed;
    cfg.initial_condition = InitialCondition::Random { decay: 2.0, amplitude: 0.3, bound: 2.0 };
    cfg
}

/// Scaled triples at `dt` and `dt/2` on shared Brownian paths.
fn scaled_runs(lambda: f64, dt: f64, members: u64) -> Vec<Vec<psns_core::integrator::ScaledTriple>> {
    let mut coarse = Vec::new();
    let mut fine = Vec::new();
    for seed in 0..members {
        let half = scaling_config(dt / 2.0, 700 + seed);
        let path = BrownianPath::generate(half.noise.len(), half.steps() as usize, base_step(lambda, dt / 2.0), half.seed, 0);
        fine.push(run_scaled_pair_with_path(&half, lambda, &path).unwrap());
        let cfg = scaling_config(dt, 700 + seed);
        coarse.push(run_scaled_pair_with_path(&cfg, lambda, &path.coarsen(2).unwrap()).unwrap());
    }
    vec![coarse, fine]
}

#[test]
fn criterion_07_scaling_pathwise() {
    let t0 = Instant::now();
    let runs = scaled_runs(0.5, 0.01, 8);
    let axes = [[1.0, 0.0, 0.0]];
    let rep = scaling_identity_check(&runs, [1.0, 0.0, 0.0], &axes, &[2.0], 4).unwrap();
    let ratio = rep.discrepancy_ratio.unwrap();
    let identity = run_scaled_pair(&scaling_config(0.01, 7), 1.0).unwrap();
    let bitwise = identity.transformed.iter().zip(&identity.scaled).all(|((_, a), (_, b))| a == b);
    let pass = (ratio - 2.0).abs() <= 0.6 && rep.pathwise_pass == Some(true) && bitwise;
    report(
        7,
        "scaling transform vs scaled system, lambda = 1/2",
        pass,
        format!(
            "H discrepancy {:.3e} -> {:.3e}, ratio {ratio:.3} (target 2 +- 0.6); lambda = 1 bitwise: {bitwise}",
            rep.discrepancy[0], rep.discrepancy[1]
        ),
        t0,
    );
    assert!(pass);
}

#[test]
fn criterion_08_moments_independent_of_n() {
    let t0 = Instant::now();
    let mut runs = Vec::new();
    for n in [4u32, 6, 8] {
        let mut cfg = SimConfig::new(TorusGeometry::new(TWO_PI, n), prouse(4.0), default_forcing(0.05), 0.01, 2.0);
        cfg.seed = 88;
        cfg.initial_condition = InitialCondition::SingleMode {
            k: psns_core::torus::WaveVector::new([1, 0, 0]).unwrap(),
            j: psns_core::torus::Polarization::new(1).unwrap(),
            amplitude: 0.2,
        };
        let ens = run_ensemble(&cfg, 32, SeedPolicy::Streams).unwrap();
        let recs: Vec<_> = ens.completed().collect();
        assert_eq!(recs.len(), 32);
        runs.push((n, mp1_moments(&recs, 2.0)));
    }
    let trend = mp1_trend(&runs, 3.0).unwrap();
    let fmt = |m: usize| {
        trend
            .summaries
            .iter()
            .map(|s| {
                let e = [s.sup_h_p, s.int_v_sq, s.int_growth][m];
                format!("{:.4}+-{:.4}", e.mean, e.se)
            })
            .collect::<Vec<_>>()
            .join(" ")
    };
    report(
        8,
        "moment bounds across n = 4, 6, 8",
        trend.pass,
        format!(
            "E sup|u|^2_H {}; E int ||u||^2_V {}; E int |u|^5_L5 {}; worst z {:.2}, {:.2}, {:.2}",
            fmt(0),
            fmt(1),
            fmt(2),
            trend.worst_z[0],
            trend.worst_z[1],
            trend.worst_z[2]
        ),
        t0,
    );
    assert!(trend.pass, "{trend:?}");
}

#[test]
fn criterion_09_structure_functions() {
    let t0 = Instant::now();
    let runs = scaled_runs(0.5, 0.01, 8);
    let axes = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let rep = scaling_identity_check(&runs, [1.0, 0.0, 0.0], &axes, &[2.0], 4).unwrap();
    let worst_z = rep.moments.iter().map(|m| m.z_score).fold(0.0, f64::max);

    let nu = 0.1;
    let mut cfg = SimConfig::new(TorusGeometry::new(TWO_PI, 4), prouse(4.0), default_forcing(0.1), 0.02, 0.0);
    let burn = psns_core::diagnostics::burn_in_time(nu, TWO_PI);
    cfg.horizon = burn + 10.0;
    cfg.seed = 99;
    cfg.record_every = 50;
    cfg.snapshot_every = Some(50);
    let ens = run_ensemble(&cfg, 8, SeedPolicy::Streams).unwrap();
    let snaps: Vec<_> = ens
        .completed()
        .flat_map(|r| r.snapshots.iter().filter(|(t, _)| *t >= burn - 1e-9).map(|(_, u)| u.clone()))
        .collect();
    let seps: Vec<f64> = (0..5).map(|i| TWO_PI / 60.0 * 10f64.powf(i as f64 / 4.0)).collect();
    let table = structure_function(&snaps, [1.0, 0.0, 0.0], &seps, &[2.0, 3.0, 4.0, 6.0], StructureOptions::default()).unwrap();
    let fits = fit_power_law(&table).unwrap();
    let zetas: Vec<String> = fits
        .iter()
        .map(|f| format!("zeta_{} = {:.3}+-{:.3} (p/3 = {:.3})", f.order, f.exponent, f.exponent_se, f.reference))
        .collect();
    let pass = rep.moments_pass;
    report(
        9,
        "structure-function transform identity (zeta_p reported, not gated)",
        pass,
        format!("S_2 identity worst z {worst_z:.2} over {} directions; {}", axes.len(), zetas.join(", ")),
        t0,
    );
    assert!(pass, "{rep:?}");
    assert!(fits.iter().all(|f| f.exponent.is_finite()));
}

#[test]
fn criterion_10_infrastructure() {
    let t0 = Instant::now();
    let mut cfg = SimConfig::new(TorusGeometry::new(TWO_PI, 3), prouse(4.0), default_forcing(0.1), 0.01, 0.3);
    cfg.seed = 10;
    cfg.initial_condition = InitialCondition::Random { decay: 2.0, amplitude: 0.3, bound: 2.0 };

    let full = Simulation::new(&cfg, 1).unwrap().run().unwrap();
    let again = Simulation::new(&cfg, 1).unwrap().run().unwrap();
    let reproducible = full.final_state == again.final_state && full.samples == again.samples && full.final_rng == again.final_rng;

    let mut part = Simulation::new(&cfg, 1).unwrap();
    part.run_until(13).unwrap();
    let bytes = Checkpoint::capture(part.state(), part.rng(), part.time()).to_bytes();
    let loaded = Checkpoint::from_bytes(&bytes).unwrap();
    let round_trip = loaded.to_bytes() == bytes;
    let t = Torus::new(cfg.geometry).unwrap();
    let step = (loaded.time / cfg.dt).round() as u64;
    let resumed = Simulation::resume(&cfg, loaded.state(&t).unwrap(), step, loaded.noise_stream().unwrap(), 1)
        .unwrap()
        .run()
        .unwrap();
    let resume_equal = resumed.final_state == full.final_state && resumed.final_rng == full.final_rng;
    let pass = reproducible && round_trip && resume_equal;
    report(
        10,
        "checkpoint round trip, resume and reproducibility",
        pass,
        format!(
            "round trip {round_trip}, resume {resume_equal}, same seed {reproducible}; |u_T|_H = {:.6}",
            h_norm_sq(&full.final_state).sqrt()
        ),
        t0,
    );
    assert!(pass);
}
