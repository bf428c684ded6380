//! Finite point configurations, test functions and Poisson sampling.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;

use crate::error::{invalid, Error, Result};
use crate::geometry::Window;

/// A finite point measure `sum_j s_j delta_{x_j}` in ambient coordinates.
/// Uncharged configurations have every `s_j = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ConfigurationRecord", into = "ConfigurationRecord")]
pub struct Configuration {
    dim: usize,
    coords: Vec<f64>,
    charges: Option<Vec<f64>>,
}

/// On-disk form: a list of coordinate tuples plus optional charges.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConfigurationRecord {
    pub dim: usize,
    pub points: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub charges: Option<Vec<f64>>,
}

impl TryFrom<ConfigurationRecord> for Configuration {
    type Error = Error;

    fn try_from(rec: ConfigurationRecord) -> Result<Self> {
        let mut cfg = Configuration::empty(rec.dim);
        match rec.charges {
            Some(charges) => {
                if charges.len() != rec.points.len() {
                    return Err(invalid("charges", "must have one charge per point"));
                }
                for (p, s) in rec.points.iter().zip(charges) {
                    cfg.push_charged(p, s)?;
                }
            }
            None => {
                for p in &rec.points {
                    cfg.push(p)?;
                }
            }
        }
        Ok(cfg)
    }
}

impl From<Configuration> for ConfigurationRecord {
    fn from(cfg: Configuration) -> Self {
        ConfigurationRecord {
            dim: cfg.dim,
            points: cfg.points().map(|p| p.to_vec()).collect(),
            charges: cfg.charges,
        }
    }
}

impl Configuration {
    /// The empty configuration with `dim` coordinates per point.
    pub fn empty(dim: usize) -> Self {
        Configuration {
            dim,
            coords: Vec::new(),
            charges: None,
        }
    }

    pub fn from_points(dim: usize, points: &[Vec<f64>]) -> Result<Self> {
        let mut cfg = Self::empty(dim);
        for p in points {
            cfg.push(p)?;
        }
        Ok(cfg)
    }

    pub fn from_charged_points(dim: usize, points: &[Vec<f64>], charges: &[f64]) -> Result<Self> {
        if points.len() != charges.len() {
            return Err(invalid("charges", "must have one charge per point"));
        }
        let mut cfg = Self::empty(dim);
        for (p, &s) in points.iter().zip(charges) {
            cfg.push_charged(p, s)?;
        }
        Ok(cfg)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of points `#eta`.
    pub fn len(&self) -> usize {
        self.coords.len() / self.dim.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn is_charged(&self) -> bool {
        self.charges.is_some()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn charge(&self, i: usize) -> f64 {
        self.charges.as_ref().map_or(1.0, |c| c[i])
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim.max(1))
    }

    /// Points paired with their charges.
    pub fn weighted_points(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.points().enumerate().map(move |(i, p)| (p, self.charge(i)))
    }

    pub fn push(&mut self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
            });
        }
        self.coords.extend_from_slice(x);
        if let Some(c) = self.charges.as_mut() {
            c.push(1.0);
        }
        Ok(())
    }

    pub fn push_charged(&mut self, x: &[f64], charge: f64) -> Result<()> {
        if !(charge > 0.0 && charge.is_finite()) {
            return Err(invalid("charge", format!("must be strictly positive, got {charge}")));
        }
        let n = self.len();
        self.push(x)?;
        let charges = self.charges.get_or_insert_with(|| vec![1.0; n + 1]);
        charges[n] = charge;
        Ok(())
    }

    /// Remove point `i` by swapping in the last one.
    pub fn swap_remove(&mut self, i: usize) -> Vec<f64> {
        let n = self.len();
        assert!(i < n, "index {i} out of range for {n} points");
        let d = self.dim;
        let removed = self.point(i).to_vec();
        if i != n - 1 {
            let (head, tail) = self.coords.split_at_mut((n - 1) * d);
            head[i * d..(i + 1) * d].copy_from_slice(&tail[..d]);
        }
        self.coords.truncate((n - 1) * d);
        if let Some(c) = self.charges.as_mut() {
            c.swap_remove(i);
        }
        removed
    }

    /// The superposition `eta + gamma`.
    pub fn union(&self, other: &Configuration) -> Result<Configuration> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        let mut out = self.clone();
        if self.charges.is_none() && other.charges.is_none() {
            out.coords.extend_from_slice(&other.coords);
        } else {
            for (p, s) in other.weighted_points() {
                out.push_charged(p, s)?;
            }
        }
        Ok(out)
    }

    /// `<eta, h> = sum_j s_j h(x_j)`.
    pub fn pair(&self, h: &TestFunction) -> f64 {
        self.weighted_points().map(|(p, s)| s * h.eval(p)).sum()
    }

    /// `eta <= gamma` in the order of measures: at every location the total
    /// charge of `self` is at most that of `other`. Locations are compared
    /// by exact float equality.
    pub fn leq(&self, other: &Configuration) -> bool {
        if self.dim != other.dim {
            return false;
        }
        let a = self.aggregated();
        let b = other.aggregated();
        let mut j = 0;
        for (p, s) in &a {
            while j < b.len() && cmp_points(&b[j].0, p) == Ordering::Less {
                j += 1;
            }
            if j == b.len() || cmp_points(&b[j].0, p) != Ordering::Equal || b[j].1 < *s {
                return false;
            }
        }
        true
    }

    fn aggregated(&self) -> Vec<(Vec<f64>, f64)> {
        let mut items: Vec<(Vec<f64>, f64)> = self.weighted_points().map(|(p, s)| (p.to_vec(), s)).collect();
        items.sort_by(|x, y| cmp_points(&x.0, &y.0));
        let mut out: Vec<(Vec<f64>, f64)> = Vec::with_capacity(items.len());
        for (p, s) in items {
            match out.last_mut() {
                Some(last) if cmp_points(&last.0, &p) == Ordering::Equal => last.1 += s,
                _ => out.push((p, s)),
            }
        }
        out
    }

    /// Points sorted lexicographically; equal measures have equal canonical forms.
    pub fn canonical(&self) -> Configuration {
        let mut items: Vec<(Vec<f64>, f64)> = self.weighted_points().map(|(p, s)| (p.to_vec(), s)).collect();
        items.sort_by(|x, y| cmp_points(&x.0, &y.0).then(x.1.total_cmp(&y.1)));
        let mut out = Configuration::empty(self.dim);
        for (p, s) in items {
            out.coords.extend_from_slice(&p);
            if self.charges.is_some() {
                out.charges.get_or_insert_with(Vec::new).push(s);
            }
        }
        out
    }

    /// Counting variable `N_A(eta)`.
    pub fn count_in(&self, region: &Window) -> usize {
        self.points().filter(|p| region.contains(p)).count()
    }

    /// Draw from the Poisson process with intensity `intensity * lambda`
    /// restricted to `window`.
    pub fn sample_poisson<R: Rng + ?Sized>(window: &Window, intensity: f64, rng: &mut R) -> Result<Configuration> {
        if !(intensity >= 0.0 && intensity.is_finite()) {
            return Err(invalid("intensity", format!("must be finite and non-negative, got {intensity}")));
        }
        let mut cfg = Configuration::empty(window.ambient_dim());
        let mean = intensity * window.volume();
        if mean == 0.0 {
            return Ok(cfg);
        }
        let n = Poisson::new(mean).map_err(|e| invalid("intensity", e.to_string()))?.sample(rng) as usize;
        for _ in 0..n {
            let x = window.sample_uniform(rng);
            cfg.coords.extend_from_slice(&x);
        }
        Ok(cfg)
    }
}

fn cmp_points(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

/// Non-negative, continuous, compactly supported test functions `h`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunction {
    Zero { dim: usize },
    /// `height * prod_i cos^2(pi (x_i - c_i) / (2 r))` for `|x_i - c_i| < r`.
    CosineBump { center: Vec<f64>, radius: f64, height: f64 },
    /// `height * (exp(-|x-c|^2 / w^2) - exp(-r^2 / w^2))` inside the ball of radius `r`.
    GaussianBump {
        center: Vec<f64>,
        width: f64,
        radius: f64,
        height: f64,
    },
}

impl TestFunction {
    pub fn cosine_bump(center: Vec<f64>, radius: f64, height: f64) -> Result<Self> {
        if !(radius > 0.0) || !(height >= 0.0) {
            return Err(invalid("test function", "radius must be positive and height non-negative"));
        }
        Ok(TestFunction::CosineBump { center, radius, height })
    }

    pub fn gaussian_bump(center: Vec<f64>, width: f64, radius: f64, height: f64) -> Result<Self> {
        if !(radius > 0.0) || !(width > 0.0) || !(height >= 0.0) {
            return Err(invalid("test function", "width and radius must be positive, height non-negative"));
        }
        Ok(TestFunction::GaussianBump {
            center,
            width,
            radius,
            height,
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            TestFunction::Zero { dim } => *dim,
            TestFunction::CosineBump { center, .. } | TestFunction::GaussianBump { center, .. } => center.len(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            TestFunction::Zero { .. } => 0.0,
            TestFunction::CosineBump { center, radius, height } => {
                let mut v = *height;
                for (xi, ci) in x.iter().zip(center) {
                    let u = (xi - ci).abs();
                    if u >= *radius {
                        return 0.0;
                    }
                    v *= (std::f64::consts::FRAC_PI_2 * u / radius).cos().powi(2);
                }
                v
            }
            TestFunction::GaussianBump {
                center,
                width,
                radius,
                height,
            } => {
                let r2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                if r2 >= radius * radius {
                    return 0.0;
                }
                let w2 = width * width;
                height * ((-r2 / w2).exp() - (-radius * radius / w2).exp())
            }
        }
    }

    /// Axis-aligned box containing the support (`None` for `Zero`).
    pub fn support(&self) -> Option<Window> {
        match self {
            TestFunction::Zero { .. } => None,
            TestFunction::CosineBump { center, radius, .. } | TestFunction::GaussianBump { center, radius, .. } => {
                let b: Vec<[f64; 2]> = center.iter().map(|c| [c - radius, c + radius]).collect();
                Window::new_box(&b).ok()
            }
        }
    }

    /// `t * h`.
    pub fn scaled(&self, t: f64) -> TestFunction {
        let mut out = self.clone();
        match &mut out {
            TestFunction::Zero { .. } => {}
            TestFunction::CosineBump { height, .. } | TestFunction::GaussianBump { height, .. } => *height *= t,
        }
        out
    }
}
