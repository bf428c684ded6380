//! Birth–death Metropolis–Hastings chain for `d mu = e^{-beta U} d mu_sigma / Z`
//! on a finite window, with incrementally cached grid field and energy.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::configurations::Configuration;
use crate::error::{invalid, Error, Result};
use crate::interaction::{Column, PotentialSpec};
use crate::stats::{batch_means, DEFAULT_BATCHES};

/// Largest tolerated disagreement between cached and recomputed caches.
pub const DRIFT_LIMIT: f64 = 1e-6;

fn one_f() -> f64 {
    1.0
}
fn one_u() -> u64 {
    1
}
fn one_chain() -> usize {
    1
}
fn default_drift_check() -> u64 {
    10_000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerConfig {
    /// `sigma = intensity * lambda` restricted to the window.
    #[serde(default = "one_f")]
    pub intensity: f64,
    #[serde(default)]
    pub burnin: u64,
    #[serde(default = "one_u")]
    pub thin: u64,
    /// Full cache recomputation every this many accepted moves.
    #[serde(default = "default_drift_check")]
    pub drift_check: u64,
    #[serde(default = "one_chain")]
    pub chains: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            intensity: 1.0,
            burnin: 0,
            thin: 1,
            drift_check: default_drift_check(),
            chains: 1,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.intensity >= 0.0 && self.intensity.is_finite()) {
            return Err(invalid("intensity", "must be finite and non-negative"));
        }
        if self.thin == 0 {
            return Err(invalid("thin", "must be at least 1"));
        }
        if self.drift_check == 0 {
            return Err(invalid("drift_check", "must be at least 1"));
        }
        if self.chains == 0 {
            return Err(invalid("chains", "must be at least 1"));
        }
        Ok(())
    }
}

/// `min(1, p sigma(Lambda) / (n + 1))` for a birth from `n` points.
pub fn birth_acceptance(papangelou: f64, sigma_total: f64, n: usize) -> f64 {
    (papangelou * sigma_total / (n as f64 + 1.0)).min(1.0)
}

/// `min(1, n / (sigma(Lambda) p))` for a death from `n` points, where `p` is
/// the Papangelou intensity of the removed point in the remaining configuration.
pub fn death_acceptance(papangelou: f64, sigma_total: f64, n: usize) -> f64 {
    let denom = sigma_total * papangelou;
    if denom <= 0.0 {
        return 1.0;
    }
    (n as f64 / denom).min(1.0)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoveCounts {
    pub birth_proposed: u64,
    pub birth_accepted: u64,
    pub death_proposed: u64,
    pub death_accepted: u64,
}

impl MoveCounts {
    fn merge(&mut self, o: &MoveCounts) {
        self.birth_proposed += o.birth_proposed;
        self.birth_accepted += o.birth_accepted;
        self.death_proposed += o.death_proposed;
        self.death_accepted += o.death_accepted;
    }
}

/// A chain's configuration with its cached field `Phi = G * eta` on the
/// grid and cached `U(eta)`. The caches are skipped when `beta = 0`.
#[derive(Clone, Debug)]
pub struct ChainState {
    eta: Configuration,
    phi: Vec<f64>,
    energy: f64,
    cached: bool,
    steps: u64,
    accepted_since_check: u64,
    max_drift: f64,
    counts: MoveCounts,
    rng: ChaCha8Rng,
    col: Column,
}

impl ChainState {
    /// Empty initial configuration; the RNG is stream `chain` of `seed`.
    pub fn new(p: &PotentialSpec, seed: u64, chain: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(chain);
        let cached = p.beta() > 0.0;
        ChainState {
            eta: Configuration::empty(p.window().ambient_dim()),
            phi: if cached { vec![0.0; p.grid().len()] } else { Vec::new() },
            energy: 0.0,
            cached,
            steps: 0,
            accepted_since_check: 0,
            max_drift: 0.0,
            counts: MoveCounts::default(),
            rng,
            col: Column::default(),
        }
    }

    pub fn configuration(&self) -> &Configuration {
        &self.eta
    }

    /// Cached `U(eta)` (recomputed on demand when caching is off).
    pub fn energy(&self, p: &PotentialSpec) -> f64 {
        if self.cached {
            self.energy
        } else {
            p.potential(&self.eta)
        }
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn counts(&self) -> MoveCounts {
        self.counts
    }

    pub fn max_drift(&self) -> f64 {
        self.max_drift
    }

    /// One birth-or-death proposal. Returns whether the move was accepted.
    pub fn step(&mut self, p: &PotentialSpec, cfg: &SamplerConfig) -> Result<bool> {
        self.steps += 1;
        let sigma_total = cfg.intensity * p.window().volume();
        let n = self.eta.len();
        let beta = p.beta();
        let accepted = if self.rng.random::<f64>() < 0.5 {
            self.counts.birth_proposed += 1;
            let x = p.window().sample_uniform(&mut self.rng);
            let de = if self.cached {
                p.column_into(&x, &mut self.col);
                p.energy_diff_from(&self.phi, &self.col, 1.0)
            } else {
                0.0
            };
            let a = birth_acceptance((-beta * de).exp(), sigma_total, n);
            let ok = self.rng.random::<f64>() < a;
            if ok {
                self.eta.push(&x)?;
                if self.cached {
                    for (&i, &g) in self.col.indices.iter().zip(&self.col.values) {
                        self.phi[i as usize] += g;
                    }
                    self.energy += de;
                }
                self.counts.birth_accepted += 1;
            }
            ok
        } else {
            self.counts.death_proposed += 1;
            if n == 0 {
                false
            } else {
                let i = self.rng.random_range(0..n);
                let de = if self.cached {
                    p.column_into(self.eta.point(i), &mut self.col);
                    p.removal_diff(&self.phi, &self.col, 1.0)
                } else {
                    0.0
                };
                let a = death_acceptance((-beta * de).exp(), sigma_total, n);
                let ok = self.rng.random::<f64>() < a;
                if ok {
                    self.eta.swap_remove(i);
                    if self.cached {
                        for (&j, &g) in self.col.indices.iter().zip(&self.col.values) {
                            self.phi[j as usize] -= g;
                        }
                        self.energy -= de;
                    }
                    self.counts.death_accepted += 1;
                }
                ok
            }
        };
        if accepted && self.cached {
            self.accepted_since_check += 1;
            if self.accepted_since_check >= cfg.drift_check {
                self.accepted_since_check = 0;
                self.refresh(p)?;
            }
        }
        Ok(accepted)
    }

    /// Recomputes the caches and records their drift.
    pub fn refresh(&mut self, p: &PotentialSpec) -> Result<f64> {
        if !self.cached {
            return Ok(0.0);
        }
        let fresh = p.field_on_grid(&self.eta);
        let energy = p.energy_from_field(&fresh);
        let drift = fresh
            .iter()
            .zip(&self.phi)
            .map(|(a, b)| (a - b).abs())
            .fold((energy - self.energy).abs(), f64::max);
        self.max_drift = self.max_drift.max(drift);
        if !drift.is_finite() || drift > DRIFT_LIMIT {
            return Err(Error::CacheDrift {
                drift,
                limit: DRIFT_LIMIT,
                step: self.steps,
            });
        }
        self.phi = fresh;
        self.energy = energy;
        Ok(drift)
    }
}

/// Per-run summary statistics.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Diagnostics {
    pub chains: usize,
    pub samples: usize,
    pub steps: u64,
    pub counts: MoveCounts,
    pub birth_acceptance: f64,
    pub death_acceptance: f64,
    pub mean_count: f64,
    /// Integrated autocorrelation time of `N_Lambda`, in thinned samples.
    pub count_iat: f64,
    pub count_ess: f64,
    pub max_drift: f64,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    /// Thinned samples, chain by chain.
    pub samples: Vec<Configuration>,
    pub diagnostics: Diagnostics,
}

/// Samples per chain: `n` split as evenly as possible, earlier chains first.
pub fn chain_sizes(n: usize, chains: usize) -> Vec<usize> {
    (0..chains).map(|k| n / chains + usize::from(k < n % chains)).collect()
}

/// Runs `cfg.chains` independent chains (in parallel) and concatenates their
/// thinned samples in chain order. Results do not depend on the thread count.
pub fn run(p: &PotentialSpec, cfg: &SamplerConfig, n_samples: usize) -> Result<RunOutput> {
    cfg.validate()?;
    if n_samples == 0 {
        return Err(invalid("n_samples", "must be at least 1"));
    }
    let sizes = chain_sizes(n_samples, cfg.chains);
    let per_chain: Vec<Result<(Vec<Configuration>, ChainState)>> = sizes
        .par_iter()
        .enumerate()
        .map(|(k, &m)| run_chain(p, cfg, k as u64, m))
        .collect();
    let mut samples = Vec::with_capacity(n_samples);
    let mut counts = MoveCounts::default();
    let mut steps = 0;
    let mut max_drift: f64 = 0.0;
    for r in per_chain {
        let (s, st) = r?;
        samples.extend(s);
        counts.merge(&st.counts);
        steps += st.steps;
        max_drift = max_drift.max(st.max_drift);
    }
    let n_series: Vec<f64> = samples.iter().map(|c| c.len() as f64).collect();
    let (mean_count, iat) = match batch_means(&n_series, DEFAULT_BATCHES) {
        Ok(bm) => (bm.mean, bm.iat),
        Err(_) => (n_series.iter().sum::<f64>() / n_series.len() as f64, f64::NAN),
    };
    let rate = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let diagnostics = Diagnostics {
        chains: cfg.chains,
        samples: samples.len(),
        steps,
        counts,
        birth_acceptance: rate(counts.birth_accepted, counts.birth_proposed),
        death_acceptance: rate(counts.death_accepted, counts.death_proposed),
        mean_count,
        count_iat: iat,
        count_ess: if iat.is_finite() && iat > 0.0 { samples.len() as f64 / iat } else { f64::NAN },
        max_drift,
    };
    Ok(RunOutput { samples, diagnostics })
}

/// One chain: burn-in, then `n` samples each `thin` steps apart.
pub fn run_chain(p: &PotentialSpec, cfg: &SamplerConfig, chain: u64, n: usize) -> Result<(Vec<Configuration>, ChainState)> {
    let mut st = ChainState::new(p, cfg.seed, chain);
    for _ in 0..cfg.burnin {
        st.step(p, cfg)?;
    }
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        for _ in 0..cfg.thin {
            st.step(p, cfg)?;
        }
        out.push(st.eta.clone());
    }
    st.refresh(p)?;
    Ok((out, st))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Window;
    use crate::interaction::Profile;
    use crate::kernels::KernelSpec;

    fn model(beta: f64, lo: f64, hi: f64) -> PotentialSpec {
        PotentialSpec::new(
            Profile::WidomRowlinson,
            beta,
            KernelSpec::gaussian(1).unwrap(),
            Window::cube(1, lo, hi).unwrap(),
            None,
        )
        .unwrap()
    }

    #[test]
    fn poisson_case_acceptances_are_one() {
        assert_eq!(birth_acceptance(1.0, 1.0, 0), 1.0);
        assert_eq!(death_acceptance(1.0, 1.0, 1), 1.0);
    }

    #[test]
    fn detailed_balance_ratio_identity() {
        for (p, sigma, n) in [(0.3, 2.0, 0usize), (1.7, 0.5, 3), (5.0, 4.0, 10), (0.01, 9.0, 1)] {
            let fwd = birth_acceptance(p, sigma, n);
            let back = death_acceptance(p, sigma, n + 1);
            let ratio = fwd / back;
            assert!((ratio - p * sigma / (n as f64 + 1.0)).abs() < 1e-12 * ratio.max(1.0));
        }
    }

    #[test]
    fn single_sample_is_one_step() {
        let p = model(1.0, 0.0, 1.0);
        let cfg = SamplerConfig::default();
        let out = run(&p, &cfg, 1).unwrap();
        assert_eq!(out.samples.len(), 1);
        assert_eq!(out.diagnostics.steps, 1);
    }

    #[test]
    fn death_on_empty_configuration_is_rejected() {
        let p = model(1.0, 0.0, 1.0);
        let cfg = SamplerConfig {
            intensity: 0.0,
            ..Default::default()
        };
        let mut st = ChainState::new(&p, 1, 0);
        for _ in 0..50 {
            assert!(!st.step(&p, &cfg).unwrap());
        }
        assert!(st.configuration().is_empty());
        assert!(st.counts().death_proposed > 0);
    }

    #[test]
    fn caches_track_recomputation() {
        let p = model(1.0, 0.0, 4.0);
        let cfg = SamplerConfig {
            intensity: 3.0,
            drift_check: 1_000_000,
            ..Default::default()
        };
        let mut st = ChainState::new(&p, 7, 0);
        for _ in 0..20_000 {
            st.step(&p, &cfg).unwrap();
        }
        let u = p.potential(st.configuration());
        assert!((st.energy(&p) - u).abs() < 1e-9);
        assert!(st.refresh(&p).unwrap() < 1e-9);
    }

    #[test]
    fn run_is_independent_of_thread_count() {
        let p = model(1.0, 0.0, 2.0);
        let cfg = SamplerConfig {
            chains: 3,
            seed: 11,
            thin: 5,
            ..Default::default()
        };
        let a = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| run(&p, &cfg, 200).unwrap());
        let b = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap().install(|| run(&p, &cfg, 200).unwrap());
        assert_eq!(a.samples, b.samples);
    }
}
