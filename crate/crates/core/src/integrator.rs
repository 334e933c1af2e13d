//! Time stepping of the Galerkin SDE, trajectory and ensemble drivers, and
//! the coupled runs used by the uniqueness and scaling experiments.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::{a_phi_with_stats, b_bilinear, PhiStats, SigmaProfile};
use crate::error::{Error, Result};
use crate::stochastic::{rescaled_path_with_step, BrownianPath, NoiseSpec, NoiseStream};
use crate::torus::{
    h_norm_sq, norm, v_norm_sq, GridState, Norm, Polarization, SpectralField, Torus, TorusGeometry,
    WaveIndex, WaveVector,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    ExplicitEm,
    SemiImplicitEm,
}

fn default_decay() -> f64 {
    2.0
}

fn default_amplitude() -> f64 {
    0.3
}

fn default_bound() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCondition {
    Zero,
    SingleMode { k: WaveVector, j: Polarization, amplitude: f64 },
    /// Flat coefficient vector in mode order.
    Coefficients { values: Vec<f64> },
    /// Independent Gaussian coefficients with standard deviation
    /// `amplitude·|k|^{−decay}`, rescaled onto the ball `|u₀|_H ≤ bound`.
    Random {
        #[serde(default = "default_decay")]
        decay: f64,
        #[serde(default = "default_amplitude")]
        amplitude: f64,
        #[serde(default = "default_bound")]
        bound: f64,
    },
}

impl InitialCondition {
    pub fn random_default() -> Self {
        Self::Random { decay: default_decay(), amplitude: default_amplitude(), bound: default_bound() }
    }

    /// Materializes the initial field; random draws use `(seed, stream)`.
    pub fn build(&self, torus: &Arc<Torus>, seed: u64, stream: u64) -> Result<SpectralField> {
        match self {
            Self::Zero => Ok(SpectralField::zeros(torus)),
            Self::SingleMode { k, j, amplitude } => {
                SpectralField::single_mode(torus, WaveIndex { k: *k, j: *j }, *amplitude)
            }
            Self::Coefficients { values } => SpectralField::from_coefficients(torus, values.clone()),
            Self::Random { decay, amplitude, bound } => {
                Ok(random_field(torus, *decay, *amplitude, *bound, &mut initial_rng(seed, stream)))
            }
        }
    }
}

fn initial_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_1c0d_e0f1_a7a5);
    rng.set_stream(stream);
    rng
}

/// A draw from the spectral-decay family: Gaussian coefficients with
/// standard deviation `amplitude·|k|^{−decay}`, scaled down to `|u|_H ≤ bound`.
pub fn random_field(torus: &Arc<Torus>, decay: f64, amplitude: f64, bound: f64, rng: &mut impl Rng) -> SpectralField {
    let mut coeffs = Vec::with_capacity(torus.dim());
    for k in torus.modes() {
        let sd = amplitude * (k.norm_squared() as f64).powf(-0.5 * decay);
        for _ in 0..4 {
            let z: f64 = rng.sample(StandardNormal);
            coeffs.push(sd * z);
        }
    }
    let mut u = SpectralField::from_coefficients(torus, coeffs).expect("dimension matches");
    let h = h_norm_sq(&u).sqrt();
    if h > bound {
        u = u.scaled(bound / h);
    }
    u
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub geometry: TorusGeometry,
    pub profile: SigmaProfile,
    pub noise: NoiseSpec,
    pub dt: f64,
    /// Horizon `T`.
    pub horizon: f64,
    pub scheme: Scheme,
    /// Linear floor `ν₀` integrated exactly by the semi-implicit scheme;
    /// `None` uses the profile's `ν`.
    pub floor: Option<f64>,
    /// Stop once `|u|²_H ≥ R`.
    pub stop_threshold: Option<f64>,
    pub seed: u64,
    pub initial_condition: InitialCondition,
    /// Explicit Euler is refused when `dt > stability_factor / (ν λ_max)`.
    pub stability_factor: f64,
    /// Norms are recorded every this many steps.
    pub record_every: usize,
    /// Full states are kept every this many steps; `None` keeps the first and last.
    pub snapshot_every: Option<usize>,
}

impl SimConfig {
    pub fn new(geometry: TorusGeometry, profile: SigmaProfile, noise: NoiseSpec, dt: f64, horizon: f64) -> Self {
        Self {
            geometry,
            profile,
            noise,
            dt,
            horizon,
            scheme: Scheme::SemiImplicitEm,
            floor: None,
            stop_threshold: None,
            seed: 0,
            initial_condition: InitialCondition::Zero,
            stability_factor: 0.5,
            record_every: 1,
            snapshot_every: None,
        }
    }

    pub fn steps(&self) -> u64 {
        (self.horizon / self.dt).round() as u64
    }

    pub fn floor_value(&self) -> f64 {
        self.floor.unwrap_or_else(|| self.profile.nu())
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.profile.validate()?;
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::Config(format!("horizon must be positive, got {}", self.horizon)));
        }
        if self.dt > self.horizon {
            return Err(Error::Config(format!("dt = {} exceeds the horizon {}", self.dt, self.horizon)));
        }
        if let Some(nu0) = self.floor {
            if !(nu0 >= 0.0 && nu0.is_finite()) {
                return Err(Error::Config(format!("linear floor must be nonnegative, got {nu0}")));
            }
        }
        if let Some(r) = self.stop_threshold {
            if !(r > 0.0) {
                return Err(Error::Config(format!("stopping threshold must be positive, got {r}")));
            }
        }
        if self.record_every == 0 || self.snapshot_every == Some(0) {
            return Err(Error::Config("recording cadences must be positive".into()));
        }
        if self.scheme == Scheme::ExplicitEm {
            let torus = Torus::new(self.geometry)?;
            let limit = self.stability_factor / (self.profile.nu() * torus.max_eigenvalue());
            if self.dt > limit {
                return Err(Error::Config(format!(
                    "explicit Euler needs dt <= {limit:.6e} (factor {} / (nu lambda_max)), got {}",
                    self.stability_factor, self.dt
                )));
            }
        }
        Ok(())
    }

    /// 64-bit content hash of every field.
    pub fn digest(&self) -> u64 {
        let text = format!(
            "{:?}|{:?}|{:?}|{:?}|{:?}|{:?}|{:?}|{:?}|{:?}|{:?}|{:?}|{:?}|{:?}|{:?}",
            self.geometry,
            self.profile,
            self.noise.modes(),
            self.noise.kind(),
            self.noise.gain(),
            self.dt,
            self.horizon,
            self.scheme,
            self.floor,
            self.stop_threshold,
            self.seed,
            self.initial_condition,
            self.record_every,
            self.snapshot_every
        );
        digest64(text.as_bytes())
    }
}

/// First eight bytes of SHA-256, little endian.
pub fn digest64(bytes: &[u8]) -> u64 {
    let h = Sha256::digest(bytes);
    u64::from_le_bytes(h[..8].try_into().expect("digest is 32 bytes"))
}

/// Precomputed pieces of one time step on a fixed torus.
#[derive(Debug, Clone)]
pub struct Stepper {
    torus: Arc<Torus>,
    profile: SigmaProfile,
    noise: NoiseSpec,
    positions: Vec<usize>,
    dt: f64,
    scheme: Scheme,
    floor: f64,
    decay: Vec<f64>,
    track_l5: bool,
}

/// Quantities of the pre-step state computed as a by-product of a step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStats {
    pub h_sq: f64,
    pub v_sq: f64,
    /// `(1/L³)∫|u|^{1+b}`.
    pub growth_pow: f64,
    /// `(1/L³)∫|u|⁵`, when tracked.
    pub l5_pow5: Option<f64>,
}

impl Stepper {
    pub fn new(config: &SimConfig, torus: &Arc<Torus>) -> Result<Self> {
        let positions = config.noise.positions(torus)?;
        let b = config.profile.growth_exponent();
        if b > 5.0 {
            log::warn!("growth exponent b = {b} > 5: Phi(u) aliases on the factor-3 padded grid");
        }
        let floor = match config.scheme {
            Scheme::ExplicitEm => 0.0,
            Scheme::SemiImplicitEm => config.floor_value(),
        };
        let decay = torus.eigenvalues().iter().map(|l| (-floor * l * config.dt).exp()).collect();
        Ok(Self {
            torus: torus.clone(),
            profile: config.profile.clone(),
            noise: config.noise.clone(),
            positions,
            dt: config.dt,
            scheme: config.scheme,
            floor,
            decay,
            track_l5: false,
        })
    }

    /// Also report `(1/L³)∫|u|⁵` for the linear law (other laws get it for free).
    pub fn track_l5(mut self, on: bool) -> Self {
        self.track_l5 = on;
        self
    }

    pub fn torus(&self) -> &Arc<Torus> {
        &self.torus
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// One step with increments `incr` multiplied by `noise_scale`.
    pub fn step(&self, u: &SpectralField, incr: &[f64], noise_scale: f64) -> Result<(SpectralField, StepStats)> {
        let (aphi, stats) = a_phi_with_stats(u, &self.profile);
        let conv = b_bilinear(u, u)?;
        let h_sq = h_norm_sq(u);
        let stats = self.stats(u, h_sq, stats);
        let mut next = u.clone();
        {
            let out = next.coeffs_mut();
            let (a, b) = (aphi.coeffs(), conv.coeffs());
            let dt = self.dt;
            match self.scheme {
                Scheme::ExplicitEm => {
                    for i in 0..out.len() {
                        out[i] -= dt * (a[i] + b[i]);
                    }
                }
                Scheme::SemiImplicitEm => {
                    let uc = u.coeffs();
                    let nu0 = self.floor;
                    for (m, chunk) in out.chunks_exact_mut(4).enumerate() {
                        let l = self.torus.eigenvalue(m);
                        for c in 0..4 {
                            let i = 4 * m + c;
                            chunk[c] -= dt * (a[i] - nu0 * l * uc[i] + b[i]);
                        }
                    }
                }
            }
            self.noise.add_forcing(&self.positions, u.coeffs(), incr, noise_scale, out);
            if self.scheme == Scheme::SemiImplicitEm {
                for (m, chunk) in out.chunks_exact_mut(4).enumerate() {
                    let f = self.decay[m];
                    for c in chunk {
                        *c *= f;
                    }
                }
            }
        }
        Ok((next, stats))
    }

    fn stats(&self, u: &SpectralField, h_sq: f64, phi: Option<PhiStats>) -> StepStats {
        let v_sq = v_norm_sq(u);
        match phi {
            Some(s) => StepStats { h_sq, v_sq, growth_pow: s.growth_pow, l5_pow5: Some(s.l5_pow5) },
            None => {
                let l5 = self.track_l5.then(|| GridState::new(u, self.torus.padded_size(), false).lq_pow(5.0));
                StepStats { h_sq, v_sq, growth_pow: h_sq, l5_pow5: l5 }
            }
        }
    }

    /// Stats of a state without stepping.
    pub fn measure(&self, u: &SpectralField) -> StepStats {
        let h_sq = h_norm_sq(u);
        if self.profile.is_linear() {
            return self.stats(u, h_sq, None);
        }
        let state = GridState::new(u, self.torus.padded_size(), false);
        let q = 1.0 + self.profile.growth_exponent();
        StepStats {
            h_sq,
            v_sq: v_norm_sq(u),
            growth_pow: state.lq_pow(q),
            l5_pow5: Some(state.lq_pow(5.0)),
        }
    }
}

/// One explicit or semi-implicit Euler–Maruyama step.
pub fn step(u: &SpectralField, config: &SimConfig, incr: &[f64]) -> Result<SpectralField> {
    let stepper = Stepper::new(config, u.torus())?;
    let (next, _) = stepper.step(u, incr, 1.0)?;
    if !next.is_finite() {
        return Err(Error::NonFinite { time: config.dt, step: 1 });
    }
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormSample {
    pub t: f64,
    pub h: f64,
    pub v: f64,
    /// `|u|_{L^{1+b}}`.
    pub growth: f64,
    /// `|u|_X`, for the pure power law.
    pub x: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Outcome {
    Completed,
    /// First recorded crossing of `|u|²_H ≥ R`; `energy` is `|u|²_H` there.
    Stopped { time: f64, step: u64, energy: f64 },
}

#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub samples: Vec<NormSample>,
    pub snapshots: Vec<(f64, SpectralField)>,
    pub outcome: Outcome,
    /// `sup_t |u_t|²_H` over every step.
    pub sup_h_sq: f64,
    /// `∫‖u‖²_V dt`, left-endpoint rule.
    pub int_v_sq: f64,
    /// `∫|u|^{1+b}_{L^{1+b}} dt`, left-endpoint rule.
    pub int_growth: f64,
    pub seed: u64,
    pub stream: u64,
    pub config_digest: u64,
    pub final_state: SpectralField,
    pub final_step: u64,
    pub final_rng: NoiseStream,
}

impl TrajectoryRecord {
    pub fn stopped(&self) -> bool {
        matches!(self.outcome, Outcome::Stopped { .. })
    }
}

/// A trajectory in progress; can be paused, checkpointed and resumed.
pub struct Simulation {
    config: SimConfig,
    stepper: Stepper,
    state: SpectralField,
    stream: NoiseStream,
    stream_id: u64,
    step: u64,
    total: u64,
    incr: Vec<f64>,
    record: TrajectoryRecord,
    finished: bool,
}

impl Simulation {
    /// Fresh trajectory number `stream` of the config's seed.
    pub fn new(config: &SimConfig, stream: u64) -> Result<Self> {
        config.validate()?;
        let torus = Torus::new(config.geometry)?;
        let u0 = config.initial_condition.build(&torus, config.seed, stream)?;
        Self::resume(config, u0, 0, NoiseStream::new(config.seed, stream), stream)
    }

    /// Continues from `state` at step `step` with the given rng state.
    pub fn resume(config: &SimConfig, state: SpectralField, step: u64, rng: NoiseStream, stream: u64) -> Result<Self> {
        config.validate()?;
        let torus = state.torus().clone();
        if *torus.geometry() != config.geometry {
            return Err(Error::GeometryMismatch);
        }
        let stepper = Stepper::new(config, &torus)?;
        let record = TrajectoryRecord {
            samples: Vec::new(),
            snapshots: Vec::new(),
            outcome: Outcome::Completed,
            sup_h_sq: 0.0,
            int_v_sq: 0.0,
            int_growth: 0.0,
            seed: config.seed,
            stream,
            config_digest: config.digest(),
            final_state: state.clone(),
            final_step: step,
            final_rng: rng.clone(),
        };
        Ok(Self {
            config: config.clone(),
            stepper,
            incr: vec![0.0; config.noise.len()],
            state,
            stream: rng,
            stream_id: stream,
            step,
            total: config.steps(),
            record,
            finished: false,
        })
    }

    pub fn state(&self) -> &SpectralField {
        &self.state
    }

    pub fn step_index(&self) -> u64 {
        self.step
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.config.dt
    }

    pub fn rng(&self) -> &NoiseStream {
        &self.stream
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    fn sample(&self, stats: &StepStats) -> NormSample {
        let q = 1.0 + self.config.profile.growth_exponent();
        let x = self
            .config
            .profile
            .is_pure_power()
            .then(|| norm(&self.state, Norm::X).expect("padded grid resolves X"));
        NormSample {
            t: self.time(),
            h: stats.h_sq.sqrt(),
            v: stats.v_sq.sqrt(),
            growth: stats.growth_pow.powf(1.0 / q),
            x,
        }
    }

    fn observe(&mut self, stats: &StepStats, force: bool) {
        self.record.sup_h_sq = self.record.sup_h_sq.max(stats.h_sq);
        if force || self.step % self.config.record_every as u64 == 0 {
            let s = self.sample(stats);
            self.record.samples.push(s);
        }
        let keep = match self.config.snapshot_every {
            Some(every) => self.step % every as u64 == 0,
            None => self.record.snapshots.is_empty(),
        };
        if keep || force {
            if self.record.snapshots.last().map(|(t, _)| *t) != Some(self.time()) {
                self.record.snapshots.push((self.time(), self.state.clone()));
            }
        }
    }

    fn crossed(&self, h_sq: f64) -> bool {
        self.config.stop_threshold.is_some_and(|r| h_sq >= r)
    }

    /// Advances one step. Returns `false` once the horizon or the stopping
    /// threshold has been reached.
    pub fn advance(&mut self) -> Result<bool> {
        if self.finished {
            return Ok(false);
        }
        if self.step >= self.total {
            let stats = self.stepper.measure(&self.state);
            self.observe(&stats, true);
            self.finish();
            return Ok(false);
        }
        self.stream.fill(self.config.dt, &mut self.incr);
        let (next, stats) = self.stepper.step(&self.state, &self.incr, 1.0)?;
        if self.crossed(stats.h_sq) {
            self.observe(&stats, true);
            self.record.outcome = Outcome::Stopped { time: self.time(), step: self.step, energy: stats.h_sq };
            self.finish();
            return Ok(false);
        }
        self.observe(&stats, false);
        self.record.int_v_sq += stats.v_sq * self.config.dt;
        self.record.int_growth += stats.growth_pow * self.config.dt;
        if !next.is_finite() {
            return Err(Error::NonFinite { time: (self.step + 1) as f64 * self.config.dt, step: self.step + 1 });
        }
        self.state = next;
        self.step += 1;
        Ok(true)
    }

    fn finish(&mut self) {
        self.finished = true;
        self.record.final_state = self.state.clone();
        self.record.final_step = self.step;
        self.record.final_rng = self.stream.clone();
    }

    /// Runs to the end and returns the record.
    pub fn run(mut self) -> Result<TrajectoryRecord> {
        while self.advance()? {}
        Ok(self.record)
    }

    /// Runs up to step `target` (exclusive of the final bookkeeping).
    pub fn run_until(&mut self, target: u64) -> Result<()> {
        while self.step < target.min(self.total) && !self.finished {
            self.advance()?;
        }
        Ok(())
    }

    pub fn into_record(mut self) -> Result<TrajectoryRecord> {
        if !self.finished {
            while self.advance()? {}
        }
        Ok(self.record)
    }

    pub fn record(&self) -> &TrajectoryRecord {
        &self.record
    }
}

/// Integrates one trajectory (stream 0 of the configured seed).
pub fn run_trajectory(config: &SimConfig) -> Result<TrajectoryRecord> {
    Simulation::new(config, 0)?.run()
}

/// Trajectory `i` of an ensemble uses rng stream `i` of the configured seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedPolicy {
    Streams,
    /// Trajectory `i` uses seed `seed + i`, stream 0.
    SequentialSeeds,
}

#[derive(Debug)]
pub struct Ensemble {
    pub records: Vec<Result<TrajectoryRecord>>,
    pub summary: crate::diagnostics::MomentSummary,
}

impl Ensemble {
    pub fn completed(&self) -> impl Iterator<Item = &TrajectoryRecord> {
        self.records.iter().filter_map(|r| r.as_ref().ok())
    }
}

pub fn run_ensemble(config: &SimConfig, members: usize, policy: SeedPolicy) -> Result<Ensemble> {
    if members == 0 {
        return Err(Error::Invalid("an ensemble needs at least one member".into()));
    }
    config.validate()?;
    let records: Vec<Result<TrajectoryRecord>> = (0..members)
        .into_par_iter()
        .map(|i| match policy {
            SeedPolicy::Streams => Simulation::new(config, i as u64)?.run(),
            SeedPolicy::SequentialSeeds => {
                let mut c = config.clone();
                c.seed = config.seed.wrapping_add(i as u64);
                Simulation::new(&c, 0)?.run()
            }
        })
        .collect();
    let done: Vec<&TrajectoryRecord> = records.iter().filter_map(|r| r.as_ref().ok()).collect();
    let summary = crate::diagnostics::mp1_moments(&done, 2.0);
    Ok(Ensemble { records, summary })
}

/// Two trajectories driven by the same increments.
#[derive(Debug, Clone)]
pub struct CoupledRecord {
    pub times: Vec<f64>,
    /// `|uᵃ − uᵇ|²_{V′}` at each step, final state included.
    pub diff_vprime_sq: Vec<f64>,
    /// `|uᵃ − uᵇ|²_H`.
    pub diff_h_sq: Vec<f64>,
    /// `(1/L³)∫|uᵃ|⁵`.
    pub l5_a: Vec<f64>,
    pub l5_b: Vec<f64>,
    pub final_a: SpectralField,
    pub final_b: SpectralField,
    pub dt: f64,
    pub config_digest: u64,
    pub stream: u64,
}

impl CoupledRecord {
    /// `v_T = uᵃ_T − uᵇ_T`.
    pub fn final_difference(&self) -> SpectralField {
        self.final_a.sub(&self.final_b)
    }
}

/// Integrates `u₀ᵃ` and `u₀ᵇ` with the increments of rng stream `stream`.
/// The stopping threshold is not applied.
pub fn run_coupled_pair_on_stream(
    config: &SimConfig,
    u0a: &SpectralField,
    u0b: &SpectralField,
    stream: u64,
) -> Result<CoupledRecord> {
    config.validate()?;
    u0a.ensure_same_space(u0b)?;
    let torus = u0a.torus().clone();
    if *torus.geometry() != config.geometry {
        return Err(Error::GeometryMismatch);
    }
    let stepper = Stepper::new(config, &torus)?.track_l5(true);
    let mut rng = NoiseStream::new(config.seed, stream);
    let mut incr = vec![0.0; config.noise.len()];
    let steps = config.steps();
    let mut a = u0a.clone();
    let mut b = u0b.clone();
    let mut rec = CoupledRecord {
        times: Vec::with_capacity(steps as usize + 1),
        diff_vprime_sq: Vec::with_capacity(steps as usize + 1),
        diff_h_sq: Vec::with_capacity(steps as usize + 1),
        l5_a: Vec::with_capacity(steps as usize + 1),
        l5_b: Vec::with_capacity(steps as usize + 1),
        final_a: a.clone(),
        final_b: b.clone(),
        dt: config.dt,
        config_digest: config.digest(),
        stream,
    };
    let push = |rec: &mut CoupledRecord, i: u64, a: &SpectralField, b: &SpectralField, la: f64, lb: f64| {
        let v = a.sub(b);
        rec.times.push(i as f64 * config.dt);
        rec.diff_vprime_sq.push(crate::torus::vprime_norm_sq(&v));
        rec.diff_h_sq.push(h_norm_sq(&v));
        rec.l5_a.push(la);
        rec.l5_b.push(lb);
    };
    for i in 0..steps {
        rng.fill(config.dt, &mut incr);
        let (na, sa) = stepper.step(&a, &incr, 1.0)?;
        let (nb, sb) = stepper.step(&b, &incr, 1.0)?;
        push(&mut rec, i, &a, &b, sa.l5_pow5.unwrap_or(0.0), sb.l5_pow5.unwrap_or(0.0));
        if !na.is_finite() || !nb.is_finite() {
            return Err(Error::NonFinite { time: (i + 1) as f64 * config.dt, step: i + 1 });
        }
        a = na;
        b = nb;
    }
    let sa = stepper.measure(&a);
    let sb = stepper.measure(&b);
    push(&mut rec, steps, &a, &b, sa.l5_pow5.unwrap_or(0.0), sb.l5_pow5.unwrap_or(0.0));
    rec.final_a = a;
    rec.final_b = b;
    Ok(rec)
}

pub fn run_coupled_pair(config: &SimConfig, u0a: &SpectralField, u0b: &SpectralField) -> Result<CoupledRecord> {
    run_coupled_pair_on_stream(config, u0a, u0b, 0)
}

/// Records of the scaling experiment at matched times.
#[derive(Debug, Clone)]
pub struct ScaledTriple {
    pub lambda: f64,
    /// (i) on `[0, L]³`, times on the base clock.
    pub base: Vec<(f64, SpectralField)>,
    /// (ii) `λ^{−1/3} u(λ^{2/3} t, λx)` on `[0, L/λ]³`, scaled clock.
    pub transformed: Vec<(f64, SpectralField)>,
    /// (iii) the scaled system integrated on `[0, L/λ]³`, scaled clock.
    pub scaled: Vec<(f64, SpectralField)>,
}

impl ScaledTriple {
    /// `|(ii) − (iii)|_H` at each matched time.
    pub fn discrepancies(&self) -> Vec<f64> {
        self.transformed
            .iter()
            .zip(&self.scaled)
            .map(|((_, a), (_, b))| h_norm_sq(&a.sub(b)).sqrt())
            .collect()
    }
}

/// `λ = 1/m` for an integer `m ≥ 1`.
pub fn reciprocal_integer(lambda: f64) -> Result<u32> {
    let m = (1.0 / lambda).round();
    if !(lambda > 0.0 && lambda <= 1.0) || (1.0 / lambda - m).abs() > 1e-12 * m {
        return Err(Error::Invalid(format!("scaling factor must be 1/m for an integer m >= 1, got {lambda}")));
    }
    Ok(m as u32)
}

/// Base step for a scaled run with step `dt`: `λ^{2/3} dt`.
pub fn base_step(lambda: f64, dt: f64) -> f64 {
    if lambda == 1.0 {
        dt
    } else {
        lambda.powf(2.0 / 3.0) * dt
    }
}

/// Runs the scaling experiment, drawing a master path at the base step.
pub fn run_scaled_pair(config: &SimConfig, lambda: f64) -> Result<ScaledTriple> {
    let fine = base_step(lambda, config.dt);
    let path = BrownianPath::generate(config.noise.len(), config.steps() as usize, fine, config.seed, 0);
    run_scaled_pair_with_path(config, lambda, &path)
}

/// Scaling experiment on a given base-clock path whose step must equal
/// `λ^{2/3}·config.dt`. Snapshots are kept per `config.snapshot_every`.
pub fn run_scaled_pair_with_path(config: &SimConfig, lambda: f64, path: &BrownianPath) -> Result<ScaledTriple> {
    config.validate()?;
    if !config.profile.is_pure_power() {
        return Err(Error::Invalid("the scaling experiment needs the pure power law".into()));
    }
    reciprocal_integer(lambda)?;
    let fine = base_step(lambda, config.dt);
    if (path.dt - fine).abs() > 1e-12 * fine {
        return Err(Error::MisalignedPath(format!("path step {} but the base run needs {fine}", path.dt)));
    }
    if path.modes() != config.noise.len() {
        return Err(Error::Noise("path and noise spec disagree on the number of modes".into()));
    }
    let steps = config.steps() as usize;
    if path.steps() < steps {
        return Err(Error::MisalignedPath(format!("path has {} steps, {steps} needed", path.steps())));
    }
    let scaled_path = rescaled_path_with_step(path, lambda, config.dt)?;

    let base_torus = Torus::new(config.geometry)?;
    let scaled_torus = base_torus.rescaled(config.geometry.length / lambda)?;
    let mut base_cfg = config.clone();
    base_cfg.dt = fine;
    base_cfg.horizon = fine * steps as f64;
    let mut scaled_cfg = config.clone();
    scaled_cfg.geometry = *scaled_torus.geometry();
    let base_stepper = Stepper::new(&base_cfg, &base_torus)?;
    let scaled_stepper = Stepper::new(&scaled_cfg, &scaled_torus)?;

    let mut u = config.initial_condition.build(&base_torus, config.seed, 0)?;
    let factor = lambda.powf(-1.0 / 3.0);
    let mut w = if lambda == 1.0 { u.clone() } else { u.scaled(factor).with_torus(&scaled_torus)? };
    let every = config.snapshot_every.unwrap_or(steps.max(1));
    let mut triple = ScaledTriple { lambda, base: Vec::new(), transformed: Vec::new(), scaled: Vec::new() };
    let keep = |i: usize, u: &SpectralField, w: &SpectralField, triple: &mut ScaledTriple| -> Result<()> {
        let t_scaled = i as f64 * config.dt;
        let t_base = i as f64 * fine;
        triple.base.push((t_base, u.clone()));
        let tr = if lambda == 1.0 { u.clone() } else { u.scaled(factor).with_torus(&scaled_torus)? };
        triple.transformed.push((t_scaled, tr));
        triple.scaled.push((t_scaled, w.clone()));
        Ok(())
    };
    for i in 0..steps {
        if i % every == 0 {
            keep(i, &u, &w, &mut triple)?;
        }
        let (nu, _) = base_stepper.step(&u, path.step(i), 1.0)?;
        let (nw, _) = scaled_stepper.step(&w, scaled_path.step(i), 1.0)?;
        if !nu.is_finite() || !nw.is_finite() {
            return Err(Error::NonFinite { time: (i + 1) as f64 * config.dt, step: i as u64 + 1 });
        }
        u = nu;
        w = nw;
    }
    keep(steps, &u, &w, &mut triple)?;
    Ok(triple)
}
