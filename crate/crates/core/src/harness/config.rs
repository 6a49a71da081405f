//! Scenario configuration (TOML).
//!
//! ```toml
//! version = 1
//! seed = 7
//! checks = ["coherence", "duality"]
//!
//! [family]
//! kind = "lattice"
//! sites = 6
//!
//! [tolerances]
//! duality = 1e-10
//! ```
//!
//! Every section is optional except `seed`; omitted values take the
//! defaults of the command being run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{GaussianSpec, Variant};
use crate::label::IndexSet;

pub const CONFIG_VERSION: u32 = 1;

fn version() -> u32 {
    CONFIG_VERSION
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    Coherence,
    Cocycle,
    Isometry,
    Duality,
    Surjectivity,
    Net,
    Bell,
    MeasureProduct,
    TripleMaps,
    Appendix,
    Truncation,
    Density,
    Control,
}

impl CheckKind {
    pub fn name(self) -> &'static str {
        match self {
            CheckKind::Coherence => "coherence",
            CheckKind::Cocycle => "cocycle",
            CheckKind::Isometry => "isometry",
            CheckKind::Duality => "duality",
            CheckKind::Surjectivity => "surjectivity",
            CheckKind::Net => "net",
            CheckKind::Bell => "bell",
            CheckKind::MeasureProduct => "measure_product",
            CheckKind::TripleMaps => "triple_maps",
            CheckKind::Appendix => "appendix",
            CheckKind::Truncation => "truncation",
            CheckKind::Density => "density",
            CheckKind::Control => "control",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeFamilyConfig {
    /// Sites `0..sites`.
    #[serde(default)]
    pub sites: Option<u32>,
    /// Explicit site set; overrides `sites`.
    #[serde(default)]
    pub site_set: Option<IndexSet>,
    #[serde(default = "two")]
    pub local_dim: usize,
}

fn two() -> usize {
    2
}

impl LatticeFamilyConfig {
    pub fn with_sites(n: u32) -> Self {
        Self { sites: Some(n), site_set: None, local_dim: 2 }
    }

    pub fn universe(&self) -> IndexSet {
        match (&self.site_set, self.sites) {
            (Some(s), _) => s.clone(),
            (None, Some(n)) => IndexSet::range(0, n),
            (None, None) => IndexSet::range(0, 6),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FamilyConfig {
    Lattice(LatticeFamilyConfig),
    Gaussian(GaussianSpec),
}

/// Tolerances; `None` means the command's default.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub coherence: Option<f64>,
    pub cocycle: Option<f64>,
    pub isometry: Option<f64>,
    pub duality: Option<f64>,
    pub surjectivity: Option<f64>,
    pub net: Option<f64>,
    pub unit: Option<f64>,
    pub bell: Option<f64>,
    pub unitarity: Option<f64>,
    pub measure: Option<f64>,
    pub points: Option<f64>,
    pub appendix: Option<f64>,
    pub density: Option<f64>,
    pub control: Option<f64>,
}

impl Tolerances {
    fn all(&self) -> [Option<f64>; 14] {
        [
            self.coherence,
            self.cocycle,
            self.isometry,
            self.duality,
            self.surjectivity,
            self.net,
            self.unit,
            self.bell,
            self.unitarity,
            self.measure,
            self.points,
            self.appendix,
            self.density,
            self.control,
        ]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Samples {
    /// Sampled triples for coherence; 0 means every triple (small families only).
    #[serde(default)]
    pub coherence: usize,
    #[serde(default = "n200")]
    pub cocycle: usize,
    #[serde(default = "n500")]
    pub isometry: usize,
    #[serde(default = "n1000")]
    pub duality: usize,
    #[serde(default = "n200")]
    pub surjectivity: usize,
    #[serde(default = "n200")]
    pub net: usize,
    /// Largest level (in sites) for checks that diagonalize dense matrices.
    #[serde(default = "n6")]
    pub max_dense_sites: usize,
    /// Largest rank of the random densities.
    #[serde(default = "n4")]
    pub max_rank: usize,
}

fn n4() -> usize {
    4
}
fn n6() -> usize {
    6
}
fn n200() -> usize {
    200
}
fn n500() -> usize {
    500
}
fn n1000() -> usize {
    1000
}

impl Default for Samples {
    fn default() -> Self {
        Self { coherence: 0, cocycle: 200, isometry: 500, duality: 1000, surjectivity: 200, net: 200, max_dense_sites: 6, max_rank: 4 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianDemoConfig {
    #[serde(default = "default_coords")]
    pub coords: IndexSet,
    #[serde(default = "default_variant")]
    pub variant: Variant,
    #[serde(default = "default_truncations")]
    pub truncations: Vec<usize>,
    #[serde(default)]
    pub quadrature_order: Option<usize>,
    /// Quadrature order of the measure identities.
    #[serde(default = "n40")]
    pub measure_order: usize,
    #[serde(default = "n4")]
    pub measure_degree: usize,
    #[serde(default = "n100")]
    pub points: usize,
    #[serde(default = "n20")]
    pub appendix_samples: usize,
    #[serde(default = "default_tag")]
    pub tag: String,
}

fn default_coords() -> IndexSet {
    IndexSet::new(vec![1, 2, 3])
}
fn default_variant() -> Variant {
    Variant::Sheared { shear: 0.3 }
}
fn default_truncations() -> Vec<usize> {
    vec![4, 8, 16]
}
fn default_tag() -> String {
    "f".into()
}
fn n20() -> usize {
    20
}
fn n40() -> usize {
    40
}
fn n100() -> usize {
    100
}

impl Default for GaussianDemoConfig {
    fn default() -> Self {
        Self {
            coords: default_coords(),
            variant: default_variant(),
            truncations: default_truncations(),
            quadrature_order: None,
            measure_order: 40,
            measure_degree: 4,
            points: 100,
            appendix_samples: 20,
            tag: default_tag(),
        }
    }
}

impl GaussianDemoConfig {
    pub fn spec(&self, truncation: usize) -> GaussianSpec {
        GaussianSpec {
            tag: self.tag.clone(),
            coords: self.coords.clone(),
            variant: self.variant.clone(),
            truncation,
            quadrature_order: self.quadrature_order,
            unitarity_tol: Some(1.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VacuumSweepConfig {
    #[serde(default = "one_f")]
    pub coupling: f64,
    #[serde(default = "two_f")]
    pub field: f64,
    /// Fixed level λ.
    #[serde(default)]
    pub level: Option<IndexSet>,
    /// Explicit chain of regions; overrides `lengths`.
    #[serde(default)]
    pub chains: Option<Vec<IndexSet>>,
    /// Chain lengths grown symmetrically around `level`.
    #[serde(default = "default_lengths")]
    pub lengths: Vec<u32>,
    #[serde(default = "budget")]
    pub dim_budget: usize,
}

fn one_f() -> f64 {
    1.0
}
fn two_f() -> f64 {
    2.0
}
fn default_lengths() -> Vec<u32> {
    vec![4, 6, 8, 10]
}
fn budget() -> usize {
    crate::vacuum::DEFAULT_DIM_BUDGET
}

impl Default for VacuumSweepConfig {
    fn default() -> Self {
        Self { coupling: 1.0, field: 2.0, level: None, chains: None, lengths: default_lengths(), dim_budget: budget() }
    }
}

impl VacuumSweepConfig {
    /// Level and chain. Without an explicit level the two middle sites of the
    /// longest chain are used; chains of length `L` are `L` consecutive
    /// sites centred on the level.
    pub fn resolve(&self) -> Result<(IndexSet, Vec<IndexSet>)> {
        if let Some(chains) = &self.chains {
            let level = self.level.clone().unwrap_or_else(|| chains.first().cloned().unwrap_or_default());
            return Ok((level, chains.clone()));
        }
        let longest = *self.lengths.iter().max().ok_or_else(|| Error::Config("no chain lengths".into()))?;
        let level = self.level.clone().unwrap_or_else(|| IndexSet::new(vec![longest / 2 - 1, longest / 2]));
        let (lo, hi) = match (level.as_slice().first(), level.as_slice().last()) {
            (Some(&lo), Some(&hi)) => (lo, hi),
            _ => return Err(Error::Config("empty vacuum level".into())),
        };
        let width = hi - lo + 1;
        let chains = self
            .lengths
            .iter()
            .map(|&l| {
                if l < width || (l - width) % 2 != 0 {
                    return Err(Error::Config(format!("a chain of length {l} cannot be centred on {level}")));
                }
                let pad = (l - width) / 2;
                if pad > lo {
                    return Err(Error::Config(format!("a chain of length {l} around {level} needs negative sites")));
                }
                Ok(IndexSet::range(lo - pad, hi + pad + 1))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((level, chains))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaultInjection {
    /// Replace one pair isomorphism by a wrong permutation.
    #[serde(default)]
    pub corrupt_phi: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "version")]
    pub version: u32,
    pub seed: Option<u64>,
    /// Checks to run; all checks of the command when absent.
    #[serde(default)]
    pub checks: Option<Vec<CheckKind>>,
    #[serde(default)]
    pub family: Option<FamilyConfig>,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Overrides every tolerance of the run.
    #[serde(default)]
    pub tol: Option<f64>,
    #[serde(default)]
    pub samples: Samples,
    #[serde(default)]
    pub gaussian: Option<GaussianDemoConfig>,
    #[serde(default)]
    pub vacuum: Option<VacuumSweepConfig>,
    #[serde(default)]
    pub fault: FaultInjection,
    #[serde(default)]
    pub output: OutputConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            seed: Some(0),
            checks: None,
            family: None,
            tolerances: Tolerances::default(),
            tol: None,
            samples: Samples::default(),
            gaussian: None,
            vacuum: None,
            fault: FaultInjection::default(),
            output: OutputConfig::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if cfg.seed.is_none() {
            return Err(Error::Config("missing `seed`".into()));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::Config(format!("unsupported config version {}", self.version)));
        }
        if self.seed.is_none() {
            return Err(Error::Config("missing `seed`".into()));
        }
        for t in self.tolerances.all().into_iter().chain([self.tol]).flatten() {
            if t.is_nan() || t <= 0.0 {
                return Err(Error::Config(format!("tolerances must be positive, got {t}")));
            }
        }
        if let Some(FamilyConfig::Lattice(l)) = &self.family {
            if l.local_dim < 1 {
                return Err(Error::Config("local_dim must be positive".into()));
            }
        }
        if let Some(FamilyConfig::Gaussian(g)) = &self.family {
            g.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        if let Some(g) = &self.gaussian {
            if g.truncations.is_empty() {
                return Err(Error::Config("no truncation orders".into()));
            }
            for &n in &g.truncations {
                g.spec(n).validate().map_err(|e| Error::Config(e.to_string()))?;
            }
        }
        if let Some(v) = &self.vacuum {
            v.resolve()?;
        }
        Ok(())
    }

    /// `tol` if set, else the configured value, else `default`.
    pub fn tolerance(&self, configured: Option<f64>, default: f64) -> f64 {
        self.tol.or(configured).unwrap_or(default)
    }

    pub fn wants(&self, check: CheckKind, default: &[CheckKind]) -> bool {
        match &self.checks {
            Some(list) => list.contains(&check),
            None => default.contains(&check),
        }
    }
}
