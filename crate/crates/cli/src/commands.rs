use std::path::{Path, PathBuf};

use psns_core::diagnostics::{
    certify, contraction_test, estimate_cb, fit_power_law, scaling_identity_check, structure_function,
    FieldSampler, InequalityReport, StructureOptions,
};
use psns_core::integrator::{
    base_step, run_coupled_pair_on_stream, run_ensemble, run_scaled_pair_with_path, Outcome, SeedPolicy,
    Simulation, TrajectoryRecord,
};
use psns_core::io::{echo_config, parse_config, Checkpoint, RunConfig, RunManifest};
use psns_core::stochastic::BrownianPath;
use psns_core::torus::{SpectralField, Torus};
use psns_core::{Error, Result};
use serde::Serialize;

use crate::output::{write_json, Field, Table};
use crate::{exit_code, Command, EXIT_CONFIG, EXIT_VERDICT};

pub struct Options {
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub resume: Option<PathBuf>,
}

/// What a command produced: files written into the output directory and
/// whether its verdict passed.
struct Artifacts {
    files: Vec<&'static str>,
    pass: bool,
}

pub fn run(command: Command, opts: &Options) -> u8 {
    let cfg = match load_config(opts) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    if let Err(e) = std::fs::create_dir_all(&opts.out) {
        eprintln!("error: cannot create {}: {e}", opts.out.display());
        return crate::EXIT_RUNTIME;
    }
    if opts.resume.is_some() && !matches!(command, Command::Simulate) {
        eprintln!("error: --resume only applies to simulate");
        return EXIT_CONFIG;
    }
    let mut manifest = RunManifest::new(command.name(), &cfg, vec![cfg.integration.seed]);
    let mut written = vec![];
    let result = write_json(&opts.out.join("config.json"), &cfg).and_then(|_| {
        written.push("config.json");
        dispatch(command, &cfg, opts, &mut manifest)
    });
    let (code, partial) = match result {
        Ok(art) => {
            written.extend(art.files);
            (if art.pass { 0 } else { EXIT_VERDICT }, false)
        }
        Err(e) => {
            eprintln!("error: {e}");
            (exit_code(&e), true)
        }
    };
    for f in collect_outputs(&opts.out, &written) {
        if let Err(e) = manifest.record_file(&opts.out, &f) {
            eprintln!("error: cannot hash {f}: {e}");
        }
    }
    if let Err(e) = manifest.write(&opts.out, code as i32, partial) {
        eprintln!("error: cannot write manifest: {e}");
        return crate::EXIT_RUNTIME;
    }
    code
}

/// Files named by the command plus any artifact it left behind before failing.
fn collect_outputs(dir: &Path, named: &[&str]) -> Vec<String> {
    let mut out: Vec<String> = named.iter().map(|s| s.to_string()).collect();
    for f in KNOWN_OUTPUTS {
        if !out.iter().any(|o| o == f) && dir.join(f).is_file() {
            out.push(f.to_string());
        }
    }
    out
}

const KNOWN_OUTPUTS: &[&str] = &[
    "config.json",
    "trajectory.csv",
    "checkpoint.bin",
    "summary.json",
    "certify.json",
    "uniqueness.json",
    "scaling.json",
    "structure.csv",
    "structure_fit.json",
];

fn load_config(opts: &Options) -> Result<RunConfig> {
    let Some(path) = &opts.config else {
        return Err(Error::Schema { path: "--config".into(), message: "a run document is required".into() });
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Schema { path: path.display().to_string(), message: e.to_string() })?;
    let mut cfg = parse_config(&text)?;
    if let Some(seed) = opts.seed {
        cfg.integration.seed = seed;
        cfg = parse_config(&echo_config(&cfg))?;
    }
    Ok(cfg)
}

fn dispatch(command: Command, cfg: &RunConfig, opts: &Options, manifest: &mut RunManifest) -> Result<Artifacts> {
    match command {
        Command::Simulate => simulate(cfg, opts),
        Command::Ensemble => ensemble(cfg, &opts.out, manifest),
        Command::Certify => certify_all(cfg, &opts.out),
        Command::Uniqueness => uniqueness(cfg, &opts.out),
        Command::Scaling => scaling(cfg, &opts.out, manifest),
        Command::Structure => structure(cfg, &opts.out, manifest),
    }
}

const TRAJECTORY_HEADER: [&str; 5] = ["t", "h_norm", "v_norm", "growth_norm", "stopped"];

fn simulate(cfg: &RunConfig, opts: &Options) -> Result<Artifacts> {
    let out = &opts.out;
    let mut table = Table::new(&TRAJECTORY_HEADER)?;
    if cfg.integration.horizon == 0.0 {
        table.save(&out.join("trajectory.csv"))?;
        return Ok(Artifacts { files: vec!["trajectory.csv"], pass: true });
    }
    let sim_cfg = cfg.sim_config()?;
    let mut sim = match &opts.resume {
        None => Simulation::new(&sim_cfg, 0)?,
        Some(path) => {
            let c = Checkpoint::load(path)?;
            let torus = Torus::new(sim_cfg.geometry)?;
            let state = c.state(&torus)?;
            let step = (c.time / sim_cfg.dt).round() as u64;
            if step > sim_cfg.steps() {
                return Err(Error::Checkpoint(format!("checkpoint time {} is past the horizon", c.time)));
            }
            Simulation::resume(&sim_cfg, state, step, c.noise_stream()?, 0)?
        }
    };
    let ckpt = out.join("checkpoint.bin");
    if let Some(every) = cfg.integration.checkpoint_every {
        while !sim.is_finished() {
            let target = (sim.step_index() / every as u64 + 1) * every as u64;
            sim.run_until(target.min(sim_cfg.steps()))?;
            Checkpoint::capture(sim.state(), sim.rng(), sim.time()).save(&ckpt)?;
            if sim.step_index() >= sim_cfg.steps() {
                break;
            }
        }
    }
    let record = sim.into_record()?;
    Checkpoint::capture(&record.final_state, &record.final_rng, record.final_step as f64 * sim_cfg.dt).save(&ckpt)?;
    write_trajectory(&mut table, &record)?;
    table.save(&out.join("trajectory.csv"))?;
    Ok(Artifacts { files: vec!["trajectory.csv", "checkpoint.bin"], pass: true })
}

fn write_trajectory(table: &mut Table, record: &TrajectoryRecord) -> Result<()> {
    let stop = match record.outcome {
        Outcome::Stopped { time, .. } => Some(time),
        Outcome::Completed => None,
    };
    for s in &record.samples {
        let stopped = stop.is_some_and(|t| s.t >= t);
        table.row(&[Field::Num(s.t), Field::Num(s.h), Field::Num(s.v), Field::Num(s.growth), Field::Flag(stopped)])?;
    }
    Ok(())
}

#[derive(Serialize)]
struct EnsembleSummary {
    members: usize,
    completed: usize,
    stopped: usize,
    failures: Vec<String>,
    moments: psns_core::diagnostics::MomentSummary,
}

fn ensemble(cfg: &RunConfig, out: &Path, manifest: &mut RunManifest) -> Result<Artifacts> {
    let sim_cfg = cfg.sim_config()?;
    let members = cfg.diagnostics.members;
    let e = run_ensemble(&sim_cfg, members, SeedPolicy::Streams)?;
    manifest.seeds = vec![sim_cfg.seed];
    let records: Vec<&TrajectoryRecord> = e.completed().collect();
    let failures: Vec<String> = e.records.iter().filter_map(|r| r.as_ref().err().map(|e| e.to_string())).collect();
    let summary = EnsembleSummary {
        members,
        completed: records.len(),
        stopped: records.iter().filter(|r| r.stopped()).count(),
        moments: psns_core::diagnostics::mp1_moments(&records, cfg.diagnostics.moment_p),
        failures,
    };
    write_json(&out.join("summary.json"), &summary)?;
    let pass = summary.failures.is_empty() && summary.moments.all_finite;
    Ok(Artifacts { files: vec!["summary.json"], pass })
}

fn sampler(cfg: &RunConfig) -> Result<FieldSampler> {
    Ok(FieldSampler::new(&Torus::new(cfg.geometry())?, cfg.diagnostics.sampler_seed))
}

fn certify_all(cfg: &RunConfig, out: &Path) -> Result<Artifacts> {
    let profile = cfg.profile.build()?;
    let s = sampler(cfg)?;
    let names = cfg.diagnostics.inequalities.clone().unwrap_or_default();
    let reports: Vec<InequalityReport> =
        names.iter().map(|n| certify(n, &s, cfg.diagnostics.trials, &profile)).collect::<Result<_>>()?;
    write_json(&out.join("certify.json"), &reports)?;
    Ok(Artifacts { files: vec!["certify.json"], pass: reports.iter().all(|r| r.pass) })
}

#[derive(Serialize)]
struct UniquenessReport {
    c_b: f64,
    c_b_pairs: usize,
    l_g: f64,
    identical_initial_data: bool,
    verdict: psns_core::diagnostics::ContractionVerdict,
}

fn uniqueness(cfg: &RunConfig, out: &Path) -> Result<Artifacts> {
    let sim_cfg = cfg.sim_config()?;
    let plan = &cfg.diagnostics.uniqueness;
    let torus = Torus::new(sim_cfg.geometry)?;
    let nu = sim_cfg.profile.nu();
    let cb = estimate_cb(&sampler(cfg)?, plan.cb_trials, nu)?;
    let lg = sim_cfg.noise.certificates().lipschitz;
    let ic = &sim_cfg.initial_condition;
    let pairs = (0..plan.pairs)
        .map(|p| {
            let a = ic.build(&torus, sim_cfg.seed, 2 * p as u64)?;
            let b = if plan.identical { a.clone() } else { ic.build(&torus, sim_cfg.seed, 2 * p as u64 + 1)? };
            run_coupled_pair_on_stream(&sim_cfg, &a, &b, p as u64)
        })
        .collect::<Result<Vec<_>>>()?;
    let verdict = contraction_test(&pairs, cb.value, lg, nu, plan.tolerance)?;
    let pass = verdict.pass;
    let report = UniquenessReport { c_b: cb.value, c_b_pairs: cb.pairs, l_g: lg, identical_initial_data: plan.identical, verdict };
    write_json(&out.join("uniqueness.json"), &report)?;
    Ok(Artifacts { files: vec!["uniqueness.json"], pass })
}

fn scaling(cfg: &RunConfig, out: &Path, manifest: &mut RunManifest) -> Result<Artifacts> {
    let base = cfg.sim_config()?;
    let plan = &cfg.diagnostics.scaling;
    let members = cfg.diagnostics.members;
    let steps = base.steps() as usize;
    let mut coarse = Vec::with_capacity(members);
    let mut fine = Vec::with_capacity(members);
    let mut seeds = Vec::with_capacity(members);
    for i in 0..members {
        let mut c = base.clone();
        c.seed = base.seed.wrapping_add(i as u64);
        seeds.push(c.seed);
        if plan.halve_dt {
            let mut half = c.clone();
            half.dt = c.dt / 2.0;
            let path = BrownianPath::generate(c.noise.len(), 2 * steps, base_step(plan.lambda, half.dt), c.seed, 0);
            coarse.push(run_scaled_pair_with_path(&c, plan.lambda, &path.coarsen(2)?)?);
            fine.push(run_scaled_pair_with_path(&half, plan.lambda, &path)?);
        } else {
            let path = BrownianPath::generate(c.noise.len(), steps, base_step(plan.lambda, c.dt), c.seed, 0);
            coarse.push(run_scaled_pair_with_path(&c, plan.lambda, &path)?);
        }
    }
    manifest.seeds = seeds;
    let mut runs = vec![coarse];
    if plan.halve_dt {
        runs.push(fine);
    }
    let st = &cfg.diagnostics.structure;
    let report = scaling_identity_check(&runs, st.direction, &plan.psi, &plan.orders, st.points_per_axis)?;
    write_json(&out.join("scaling.json"), &report)?;
    let pass = report.pathwise_pass.unwrap_or(true) && report.moments_pass;
    Ok(Artifacts { files: vec!["scaling.json"], pass })
}

fn structure(cfg: &RunConfig, out: &Path, manifest: &mut RunManifest) -> Result<Artifacts> {
    let sim_cfg = cfg.sim_config()?;
    let burn_in = cfg.diagnostics.burn_in.unwrap_or(0.0);
    let e = run_ensemble(&sim_cfg, cfg.diagnostics.members, SeedPolicy::Streams)?;
    manifest.seeds = vec![sim_cfg.seed];
    let snaps: Vec<SpectralField> = e
        .completed()
        .filter(|r| !r.stopped())
        .flat_map(|r| r.snapshots.iter().filter(|(t, _)| *t >= burn_in - 0.5 * sim_cfg.dt).map(|(_, u)| u.clone()))
        .collect();
    if snaps.is_empty() {
        return Err(Error::Config(format!(
            "no snapshots after the burn-in time {burn_in}; raise the horizon or lower diagnostics.burn_in"
        )));
    }
    let st = &cfg.diagnostics.structure;
    let seps = st.separations.clone().unwrap_or_default();
    let opts = StructureOptions { points_per_axis: st.points_per_axis, shift: [0.0; 3], project_on: st.project_on };
    let table = structure_function(&snaps, st.direction, &seps, &st.orders, opts)?;
    let mut csv = Table::new(&["separation", "order", "mean", "std_error", "samples"])?;
    for (i, &l) in table.separations.iter().enumerate() {
        for (j, &p) in table.orders.iter().enumerate() {
            let est = table.estimates[i][j];
            csv.row(&[Field::Num(l), Field::Num(p), Field::Num(est.mean), Field::Num(est.se), Field::Int(est.count as u64)])?;
        }
    }
    csv.save(&out.join("structure.csv"))?;
    let fits = fit_power_law(&table)?;
    write_json(&out.join("structure_fit.json"), &fits)?;
    Ok(Artifacts { files: vec!["structure.csv", "structure_fit.json"], pass: true })
}
