//! The JSON run document: parsing, default resolution and echo.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::diagnostics::{burn_in_time, INEQUALITIES};
use crate::dynamics::{ProuseParams, SigmaProfile};
use crate::error::{Error, Result};
use crate::integrator::{InitialCondition, Scheme, SimConfig};
use crate::stochastic::{default_forcing, MultGain, NoiseKind, NoiseMode, NoiseSpec};
use crate::torus::TorusGeometry;

pub const DEFAULT_N: u32 = 4;
pub const DEFAULT_SIGMA: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    #[serde(default = "default_length")]
    pub length: f64,
    #[serde(default = "default_n")]
    pub n: u32,
    #[serde(default)]
    pub grid_size: Option<usize>,
    #[serde(default)]
    pub padded_size: Option<usize>,
}

fn default_length() -> f64 {
    2.0 * PI
}

fn default_n() -> u32 {
    DEFAULT_N
}

impl Default for GeometrySection {
    fn default() -> Self {
        Self { length: default_length(), n: default_n(), grid_size: None, padded_size: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProfileSection {
    Prouse {
        nu: f64,
        #[serde(default = "default_b")]
        b: f64,
        #[serde(default = "default_k")]
        k: f64,
        #[serde(default = "default_a")]
        a1: f64,
        #[serde(default = "default_a")]
        a2: f64,
    },
    PurePower {
        nu: f64,
    },
    Linear {
        nu: f64,
    },
}

fn default_b() -> f64 {
    4.0
}

fn default_k() -> f64 {
    1.0
}

fn default_a() -> f64 {
    0.5
}

impl ProfileSection {
    pub fn nu(&self) -> f64 {
        match *self {
            Self::Prouse { nu, .. } | Self::PurePower { nu } | Self::Linear { nu } => nu,
        }
    }

    pub fn build(&self) -> Result<SigmaProfile> {
        match *self {
            Self::Prouse { nu, b, k, a1, a2 } => SigmaProfile::prouse(ProuseParams { nu, b, k, a1, a2 }),
            Self::PurePower { nu } => SigmaProfile::pure_power(nu),
            Self::Linear { nu } => SigmaProfile::linear(nu),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GainName {
    Saturating,
    Unit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    #[serde(default = "default_noise_kind")]
    pub kind: NoiseKind,
    /// Only read for multiplicative noise.
    #[serde(default)]
    pub gain: Option<GainName>,
    /// `None` selects the shell forcing `1 ≤ |k|² ≤ 4` with intensity `sigma`.
    #[serde(default)]
    pub modes: Option<Vec<NoiseMode>>,
    #[serde(default)]
    pub sigma: Option<f64>,
}

fn default_noise_kind() -> NoiseKind {
    NoiseKind::Additive
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self { kind: default_noise_kind(), gain: None, modes: None, sigma: None }
    }
}

impl NoiseSection {
    pub fn build(&self) -> Result<NoiseSpec> {
        let modes = match &self.modes {
            Some(m) => m.clone(),
            None => default_forcing(self.sigma.unwrap_or(DEFAULT_SIGMA)).modes().to_vec(),
        };
        match self.kind {
            NoiseKind::Additive => NoiseSpec::additive(modes),
            NoiseKind::DiagonalMultiplicative => {
                let gain = match self.gain.unwrap_or(GainName::Saturating) {
                    GainName::Saturating => MultGain::Saturating,
                    GainName::Unit => MultGain::Unit,
                };
                NoiseSpec::multiplicative(modes, gain)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegrationSection {
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    #[serde(default)]
    pub floor: Option<f64>,
    #[serde(default)]
    pub stop_threshold: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "InitialCondition::random_default")]
    pub initial_condition: InitialCondition,
    #[serde(default = "default_stability")]
    pub stability_factor: f64,
    #[serde(default = "default_one")]
    pub record_every: usize,
    #[serde(default)]
    pub snapshot_every: Option<usize>,
    #[serde(default)]
    pub checkpoint_every: Option<usize>,
}

fn default_dt() -> f64 {
    1e-3
}

fn default_horizon() -> f64 {
    1.0
}

fn default_scheme() -> Scheme {
    Scheme::SemiImplicitEm
}

fn default_stability() -> f64 {
    0.5
}

fn default_one() -> usize {
    1
}

impl Default for IntegrationSection {
    fn default() -> Self {
        Self {
            dt: default_dt(),
            horizon: default_horizon(),
            scheme: default_scheme(),
            floor: None,
            stop_threshold: None,
            seed: 0,
            initial_condition: InitialCondition::random_default(),
            stability_factor: default_stability(),
            record_every: 1,
            snapshot_every: None,
            checkpoint_every: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniquenessPlan {
    #[serde(default = "default_pairs")]
    pub pairs: usize,
    #[serde(default = "default_contraction_tol")]
    pub tolerance: f64,
    #[serde(default = "default_trials")]
    pub cb_trials: usize,
    /// Use the same initial datum for both members of each pair.
    #[serde(default)]
    pub identical: bool,
}

fn default_pairs() -> usize {
    32
}

fn default_contraction_tol() -> f64 {
    0.05
}

fn default_trials() -> usize {
    1000
}

impl Default for UniquenessPlan {
    fn default() -> Self {
        Self { pairs: default_pairs(), tolerance: default_contraction_tol(), cb_trials: default_trials(), identical: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScalingPlan {
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default = "default_axes")]
    pub psi: Vec<[f64; 3]>,
    #[serde(default = "default_scaling_orders")]
    pub orders: Vec<f64>,
    /// Repeat every run at `dt/2` on the same paths.
    #[serde(default = "default_true")]
    pub halve_dt: bool,
}

fn default_lambda() -> f64 {
    0.5
}

fn default_axes() -> Vec<[f64; 3]> {
    vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
}

fn default_scaling_orders() -> Vec<f64> {
    vec![2.0]
}

fn default_true() -> bool {
    true
}

impl Default for ScalingPlan {
    fn default() -> Self {
        Self { lambda: default_lambda(), psi: default_axes(), orders: default_scaling_orders(), halve_dt: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructurePlan {
    #[serde(default = "default_direction")]
    pub direction: [f64; 3],
    /// `None` uses five log-spaced separations from `L/60` to `L/6`.
    #[serde(default)]
    pub separations: Option<Vec<f64>>,
    #[serde(default = "default_structure_orders")]
    pub orders: Vec<f64>,
    #[serde(default = "default_points")]
    pub points_per_axis: usize,
    #[serde(default)]
    pub project_on: Option<[f64; 3]>,
}

fn default_direction() -> [f64; 3] {
    [1.0, 0.0, 0.0]
}

fn default_structure_orders() -> Vec<f64> {
    vec![2.0, 3.0, 4.0, 6.0]
}

fn default_points() -> usize {
    6
}

impl Default for StructurePlan {
    fn default() -> Self {
        Self {
            direction: default_direction(),
            separations: None,
            orders: default_structure_orders(),
            points_per_axis: default_points(),
            project_on: None,
        }
    }
}

pub fn default_separations(length: f64) -> Vec<f64> {
    (0..5).map(|i| length / 60.0 * 10f64.powf(i as f64 / 4.0)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsSection {
    /// `None` selects every inequality that applies to the profile.
    #[serde(default)]
    pub inequalities: Option<Vec<String>>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_one_u64")]
    pub sampler_seed: u64,
    #[serde(default = "default_members")]
    pub members: usize,
    #[serde(default = "default_p")]
    pub moment_p: f64,
    /// `None` resolves to five dissipation times `5/(νλ₁)`.
    #[serde(default)]
    pub burn_in: Option<f64>,
    #[serde(default)]
    pub uniqueness: UniquenessPlan,
    #[serde(default)]
    pub scaling: ScalingPlan,
    #[serde(default)]
    pub structure: StructurePlan,
}

pub fn default_inequalities(profile: &SigmaProfile) -> Vec<String> {
    INEQUALITIES
        .iter()
        .filter(|&&n| !(n == "lemma3" && profile.is_pure_power()))
        .map(|s| s.to_string())
        .collect()
}

fn default_one_u64() -> u64 {
    1
}

fn default_members() -> usize {
    32
}

fn default_p() -> f64 {
    2.0
}

impl Default for DiagnosticsSection {
    fn default() -> Self {
        Self {
            inequalities: None,
            trials: default_trials(),
            sampler_seed: 1,
            members: default_members(),
            moment_p: default_p(),
            burn_in: None,
            uniqueness: UniquenessPlan::default(),
            scaling: ScalingPlan::default(),
            structure: StructurePlan::default(),
        }
    }
}

/// A run document. After [`parse_config`] every optional default has been
/// written in, so echoing and re-parsing is the identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub geometry: GeometrySection,
    pub profile: ProfileSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default)]
    pub integration: IntegrationSection,
    #[serde(default)]
    pub diagnostics: DiagnosticsSection,
}

/// Parses and validates a JSON document, resolving every default.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let mut cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::Schema { path, message: e.into_inner().to_string() }
    })?;
    cfg.resolve()?;
    Ok(cfg)
}

pub fn echo_config(cfg: &RunConfig) -> String {
    serde_json::to_string_pretty(cfg).expect("config serializes")
}

impl RunConfig {
    fn resolve(&mut self) -> Result<()> {
        let profile = self.profile.build()?;
        let auto = TorusGeometry::new(self.geometry.length, self.geometry.n);
        self.geometry.grid_size.get_or_insert(auto.grid_size);
        self.geometry.padded_size.get_or_insert(auto.padded_size);
        let geometry = self.geometry();
        geometry.validate()?;

        if self.noise.modes.is_none() {
            self.noise.modes = Some(default_forcing(self.noise.sigma.unwrap_or(DEFAULT_SIGMA)).modes().to_vec());
        }
        self.noise.sigma = None;
        if self.noise.kind == NoiseKind::DiagonalMultiplicative {
            self.noise.gain.get_or_insert(GainName::Saturating);
        } else if self.noise.gain.is_some() {
            return Err(Error::Schema { path: "noise.gain".into(), message: "a gain applies only to multiplicative noise".into() });
        }
        let noise = self.noise.build()?;
        let torus = crate::torus::Torus::new(geometry)?;
        noise.positions(&torus)?;

        self.integration.floor.get_or_insert(profile.nu());
        if self.integration.checkpoint_every == Some(0) {
            return Err(Error::Schema { path: "integration.checkpoint_every".into(), message: "must be positive".into() });
        }

        let d = &mut self.diagnostics;
        let names = d.inequalities.get_or_insert_with(|| default_inequalities(&profile));
        for name in names.iter() {
            if !INEQUALITIES.contains(&name.as_str()) {
                return Err(Error::UnknownInequality(name.clone()));
            }
        }
        d.burn_in.get_or_insert(burn_in_time(profile.nu(), self.geometry.length));
        d.structure.separations.get_or_insert_with(|| default_separations(self.geometry.length));
        if d.members == 0 || d.uniqueness.pairs == 0 {
            return Err(Error::Schema { path: "diagnostics".into(), message: "ensemble sizes must be positive".into() });
        }
        let mut c = self.sim_config()?;
        if c.horizon == 0.0 {
            c.horizon = c.dt;
        }
        c.validate()
    }

    pub fn geometry(&self) -> TorusGeometry {
        let auto = TorusGeometry::new(self.geometry.length, self.geometry.n);
        TorusGeometry {
            grid_size: self.geometry.grid_size.unwrap_or(auto.grid_size),
            padded_size: self.geometry.padded_size.unwrap_or(auto.padded_size),
            ..auto
        }
    }

    pub fn noise_spec(&self) -> Result<NoiseSpec> {
        self.noise.build()
    }

    pub fn sim_config(&self) -> Result<SimConfig> {
        let i = &self.integration;
        let mut c = SimConfig::new(self.geometry(), self.profile.build()?, self.noise_spec()?, i.dt, i.horizon);
        c.scheme = i.scheme;
        c.floor = i.floor;
        c.stop_threshold = i.stop_threshold;
        c.seed = i.seed;
        c.initial_condition = i.initial_condition.clone();
        c.stability_factor = i.stability_factor;
        c.record_every = i.record_every;
        c.snapshot_every = i.snapshot_every;
        Ok(c)
    }
}
