//! The TOML run configuration and its validation.

use std::path::Path;

use serde::{Deserialize, Serialize};
use wickfield::interaction::default_grid_h;
use wickfield::{
    ComplexPoint, Error, KernelParams, KernelSpec, Model, Observable, PotentialParams, PotentialSpec, Result, SamplerConfig, SeriesParams, TestFunction,
    Window,
};

/// Names accepted in `verify.tests`.
pub const TEST_NAMES: &[&str] = &[
    "conditions",
    "fkg",
    "dominance",
    "poisson_null",
    "fkg_oracle",
    "dominance_oracle",
    "lorentz_exact",
    "mixed_exact",
];

const POTENTIAL_KEYS: &[&str] = &["potential", "beta", "grid_h", "charges"];

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub geometry: Geometry,
    pub kernel: KernelParams,
    pub potential: PotentialParams,
    #[serde(default)]
    pub sampler: SamplerSection,
    #[serde(default)]
    pub oracle: SeriesParams,
    #[serde(default)]
    pub estimate: Vec<Request>,
    #[serde(default)]
    pub verify: VerifySection,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "space", rename_all = "snake_case", deny_unknown_fields)]
pub enum Geometry {
    Euclidean {
        #[serde(default)]
        dim: Option<usize>,
        window: Vec<[f64; 2]>,
    },
    Sphere { dim: usize, radius: f64 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerSection {
    #[serde(default = "one")]
    pub intensity: f64,
    #[serde(default)]
    pub burnin: u64,
    #[serde(default = "one_u64")]
    pub thin: u64,
    #[serde(default = "drift_check")]
    pub drift_check: u64,
    #[serde(default = "one_usize")]
    pub chains: usize,
    #[serde(default = "n_samples")]
    pub n_samples: usize,
}

impl Default for SamplerSection {
    fn default() -> Self {
        let d = SamplerConfig::default();
        SamplerSection {
            intensity: d.intensity,
            burnin: d.burnin,
            thin: d.thin,
            drift_check: d.drift_check,
            chains: d.chains,
            n_samples: n_samples(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    #[serde(default = "default_tests")]
    pub tests: Vec<String>,
    /// Random configurations per condition check.
    #[serde(default = "trials")]
    pub trials: usize,
    /// Boost rapidity for the relativistic checks.
    #[serde(default = "chi")]
    pub chi: f64,
}

impl Default for VerifySection {
    fn default() -> Self {
        VerifySection {
            tests: default_tests(),
            trials: trials(),
            chi: chi(),
        }
    }
}

/// One requested correlation, evaluated by `estimate`, `oracle` and `report`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Request {
    /// `E[prod_j phi^c(z_j)]`, with `conj[j]` replacing factor `j` by its conjugate.
    Moment {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        points: Vec<ComplexPoint>,
        #[serde(default)]
        conj: Vec<bool>,
    },
    /// `E[exp(-<h, eta>)]`.
    Laplace {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        h: TestFunction,
    },
    /// `E[N_A]`; the whole window when `region` is absent.
    Count {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        name: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        region: Option<Vec<[f64; 2]>>,
    },
}

impl Request {
    pub fn label(&self, index: usize) -> String {
        let (name, kind) = match self {
            Request::Moment { name, .. } => (name, "moment"),
            Request::Laplace { name, .. } => (name, "laplace"),
            Request::Count { name, .. } => (name, "count"),
        };
        name.clone().unwrap_or_else(|| format!("{kind}_{index}"))
    }

    pub fn observable(&self, kernel: &KernelSpec) -> Result<Observable> {
        match self {
            Request::Moment { points, conj, .. } => Observable::field_product(kernel, points, conj),
            Request::Laplace { h, .. } => Ok(Observable::laplace(h.clone())),
            Request::Count { region, .. } => Ok(Observable::count(region.as_deref().map(Window::new_box).transpose()?)),
        }
    }
}

fn one() -> f64 {
    1.0
}
fn one_u64() -> u64 {
    1
}
fn one_usize() -> usize {
    1
}
fn drift_check() -> u64 {
    SamplerConfig::default().drift_check
}
fn n_samples() -> usize {
    1000
}
fn trials() -> usize {
    1000
}
fn chi() -> f64 {
    0.3
}
fn default_tests() -> Vec<String> {
    vec!["conditions".into(), "fkg".into(), "dominance".into()]
}

/// Everything built from a validated config.
pub struct Setup {
    /// The config with every default filled in.
    pub effective: RunConfig,
    pub model: Model,
    pub sampler: SamplerConfig,
    pub observables: Vec<Observable>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        let bad = |e: toml::de::Error| Error::InvalidParameter {
            name: "config",
            reason: e.to_string(),
        };
        let table: toml::Table = toml::from_str(&text).map_err(bad)?;
        // `PotentialParams` flattens its profile, which serde cannot combine with `deny_unknown_fields`.
        if let Some(toml::Value::Table(p)) = table.get("potential") {
            if let Some(key) = p.keys().find(|k| !POTENTIAL_KEYS.contains(&k.as_str())) {
                return Err(Error::InvalidParameter {
                    name: "potential",
                    reason: format!("unknown field `{key}`, expected one of {}", POTENTIAL_KEYS.join(", ")),
                });
            }
        }
        table.try_into().map_err(bad)
    }

    pub fn window(&self) -> Result<Window> {
        match &self.geometry {
            Geometry::Euclidean { dim, window } => {
                let w = Window::new_box(window)?;
                if let Some(d) = dim {
                    if *d != window.len() {
                        return Err(Error::DimensionMismatch {
                            expected: *d,
                            found: window.len(),
                        });
                    }
                }
                Ok(w)
            }
            Geometry::Sphere { dim, radius } => Window::sphere(*dim, *radius),
        }
    }

    /// Validates every section and resolves defaults before any computation.
    pub fn setup(mut self) -> Result<Setup> {
        let window = self.window()?;
        if let Geometry::Euclidean { dim, window } = &mut self.geometry {
            *dim = Some(window.len());
        }
        let kernel = KernelSpec::new(self.kernel.clone())?;
        self.kernel = kernel.params().clone();
        let grid_h = self.potential.grid_h.unwrap_or_else(|| default_grid_h(window.dim()));
        self.potential.grid_h = Some(grid_h);
        let potential = PotentialSpec::new(self.potential.profile.clone(), self.potential.beta, kernel, window, Some(grid_h))?;
        let s = &self.sampler;
        let sampler = SamplerConfig {
            intensity: s.intensity,
            burnin: s.burnin,
            thin: s.thin,
            drift_check: s.drift_check,
            chains: s.chains,
            seed: self.seed,
        };
        sampler.validate()?;
        if s.n_samples == 0 {
            return Err(Error::InvalidParameter {
                name: "n_samples",
                reason: "must be at least 1".into(),
            });
        }
        if self.oracle.quad_nodes == 0 || self.oracle.max_leaves == 0 || !(self.oracle.tail_tol > 0.0) {
            return Err(Error::InvalidParameter {
                name: "oracle",
                reason: "quad_nodes, max_leaves and tail_tol must be positive".into(),
            });
        }
        for name in &self.verify.tests {
            if !TEST_NAMES.contains(&name.as_str()) {
                return Err(Error::InvalidParameter {
                    name: "verify.tests",
                    reason: format!("unknown test `{name}`; expected one of {}", TEST_NAMES.join(", ")),
                });
            }
        }
        if !self.verify.chi.is_finite() || self.verify.trials == 0 {
            return Err(Error::InvalidParameter {
                name: "verify",
                reason: "chi must be finite and trials positive".into(),
            });
        }
        for r in &mut self.estimate {
            if let Request::Moment { points, conj, .. } = r {
                if conj.is_empty() {
                    *conj = vec![false; points.len()];
                }
            }
        }
        let model = Model::new(potential, s.intensity)?;
        let observables = self.estimate.iter().map(|r| r.observable(model.kernel())).collect::<Result<Vec<_>>>()?;
        Ok(Setup {
            effective: self,
            model,
            sampler,
            observables,
        })
    }
}
