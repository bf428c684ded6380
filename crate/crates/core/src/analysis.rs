//! Pass/fail verification of the correlation inequalities, monotonicity
//! statements and (non-)invariance properties, both statistically on
//! sampler output and exactly through the series oracle or Poisson
//! (Campbell) quadrature.
//!
//! Every [`Check`] passes iff `value <= tolerance`; claims of the form
//! "at least" are stored negated.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::configurations::{Configuration, TestFunction};
use crate::error::{invalid, Error, Result};
use crate::fields::{estimate_laplace, estimate_observable, paired_difference, reim, CorrelationEstimate};
use crate::geometry::{boost_as_complex_rotation, reflected_boost_conjugate, wick_embed, ComplexPoint, GroupElement, Slice, Window};
use crate::interaction::{PotentialSpec, Profile};
use crate::kernels::KernelSpec;
use crate::oracle::{expect_many, Observable, SeriesParams, SeriesSpec};
use crate::quad::{composite_gauss_legendre, NeumaierSum};
use crate::sampler::{self, RunOutput, SamplerConfig};
use crate::stats::{batch_means, covariance, DEFAULT_BATCHES};

/// Kernel tolerance defining the bulk of a window.
pub const BULK_TOL: f64 = 1e-8;
/// z-score for statistical pass criteria.
pub const Z_PASS: f64 = 3.0;
/// z-score required before a difference counts as a detected signal.
pub const Z_SIGNAL: f64 = 5.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            value,
            tolerance,
            passed: value.is_finite() && tolerance.is_finite() && value <= tolerance,
        }
    }

    /// `value >= threshold`, stored as `-value <= -threshold`.
    pub fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self::at_most(name, -value, -threshold)
    }
}

/// Machine-readable outcome of one verification.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub name: String,
    pub passed: bool,
    /// Value and tolerance of the check closest to (or furthest beyond) failing.
    pub margin: f64,
    pub tolerance: f64,
    pub n_samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quad_nodes: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub checks: Vec<Check>,
}

impl TestReport {
    pub fn new(name: impl Into<String>, checks: Vec<Check>, n_samples: usize, quad_nodes: Option<usize>, seed: Option<u64>) -> Self {
        let worst = checks.iter().max_by(|a, b| {
            let ka = if a.passed { a.value - a.tolerance } else { f64::INFINITY };
            let kb = if b.passed { b.value - b.tolerance } else { f64::INFINITY };
            ka.total_cmp(&kb)
        });
        let (margin, tolerance) = worst.map_or((0.0, 0.0), |c| (c.value, c.tolerance));
        TestReport {
            name: name.into(),
            passed: checks.iter().all(|c| c.passed),
            margin,
            tolerance,
            n_samples,
            quad_nodes,
            seed,
            checks,
        }
    }

    /// One summary line, `PASS name: margin <= tolerance`.
    pub fn line(&self) -> String {
        format!(
            "{} {}: {:.6e} <= {:.6e} ({} checks, {} samples)",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.margin,
            self.tolerance,
            self.checks.len(),
            self.n_samples
        )
    }
}

/// A finite-window Gibbs model `mu_sigma^f` with `sigma = intensity * lambda`.
#[derive(Clone, Debug)]
pub struct Model {
    pub potential: PotentialSpec,
    pub intensity: f64,
}

impl Model {
    pub fn new(potential: PotentialSpec, intensity: f64) -> Result<Self> {
        if !(intensity >= 0.0 && intensity.is_finite()) {
            return Err(invalid("intensity", "must be finite and non-negative"));
        }
        Ok(Model { potential, intensity })
    }

    pub fn widom_rowlinson(kernel: KernelSpec, window: Window, beta: f64, intensity: f64) -> Result<Self> {
        Self::new(PotentialSpec::new(Profile::WidomRowlinson, beta, kernel, window, None)?, intensity)
    }

    pub fn kernel(&self) -> &KernelSpec {
        self.potential.kernel()
    }

    pub fn window(&self) -> &Window {
        self.potential.window()
    }

    pub fn beta(&self) -> f64 {
        self.potential.beta()
    }

    /// `rho * intensity`, the intensity of the dominating Poisson process.
    pub fn dominating_intensity(&self) -> f64 {
        self.potential.rho() * self.intensity
    }

    pub fn scaled(&self, t: f64) -> Result<Self> {
        Self::new(self.potential.clone(), self.intensity * t)
    }

    /// Runs the sampler with this model's intensity.
    pub fn sample(&self, cfg: &SamplerConfig, n_samples: usize) -> Result<RunOutput> {
        let cfg = SamplerConfig {
            intensity: self.intensity,
            ..cfg.clone()
        };
        sampler::run(&self.potential, &cfg, n_samples)
    }

    pub fn series(&self, params: &SeriesParams) -> Result<SeriesSpec> {
        SeriesSpec::new(self.potential.clone(), self.intensity, params.clone())
    }
}

/// Increasing functionals of a configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "functional", rename_all = "snake_case")]
pub enum Functional {
    /// `N_A ∧ cap`.
    Count {
        region: Window,
        #[serde(default)]
        cap: Option<f64>,
    },
    /// `<eta, h> ∧ cap`.
    Pairing {
        h: TestFunction,
        #[serde(default)]
        cap: Option<f64>,
    },
    /// `exp(<eta, h> ∧ cap)`.
    ExpPairing {
        h: TestFunction,
        #[serde(default)]
        cap: Option<f64>,
    },
    /// `(G * eta)(x) ∧ cap`.
    Field {
        point: Vec<f64>,
        #[serde(default)]
        cap: Option<f64>,
    },
}

fn capped(v: f64, cap: Option<f64>) -> f64 {
    cap.map_or(v, |m| v.min(m))
}

impl Functional {
    pub fn label(&self) -> String {
        let cap = |c: &Option<f64>| c.map_or(String::new(), |m| format!(" ∧ {m}"));
        match self {
            Functional::Count { region, cap: c } => match region.bounds() {
                Some((lo, hi)) => format!("N{lo:?}..{hi:?}{}", cap(c)),
                None => format!("N{}", cap(c)),
            },
            Functional::Pairing { cap: c, .. } => format!("<eta,h>{}", cap(c)),
            Functional::ExpPairing { cap: c, .. } => format!("exp(<eta,h>{})", cap(c)),
            Functional::Field { point, cap: c } => format!("phi({point:?}){}", cap(c)),
        }
    }

    pub fn eval(&self, eta: &Configuration, kernel: &KernelSpec) -> f64 {
        match self {
            Functional::Count { region, cap } => capped(eta.count_in(region) as f64, *cap),
            Functional::Pairing { h, cap } => capped(eta.pair(h), *cap),
            Functional::ExpPairing { h, cap } => capped(eta.pair(h), *cap).exp(),
            Functional::Field { point, cap } => {
                let mut s = NeumaierSum::new();
                for (x, q) in eta.weighted_points() {
                    s.add(q * kernel.eval_real(point, x));
                }
                capped(s.value(), *cap)
            }
        }
    }

    /// Mean under the Poisson process of the given intensity on `window`.
    /// Capped pairings and fields have no closed form and are unsupported.
    pub fn poisson_mean(&self, kernel: &KernelSpec, window: &Window, intensity: f64) -> Result<f64> {
        match self {
            Functional::Count { region, cap } => {
                let mu = intensity * intersection_volume(region, window)?;
                Ok(match cap {
                    None => mu,
                    Some(m) => capped_poisson_mean(mu, *m),
                })
            }
            Functional::Pairing { h, cap: None } => Ok(intensity * box_integral(window, &support_breaks(h, window.dim()), |x| h.eval(x))?),
            Functional::ExpPairing { h, cap: None } => {
                let i = box_integral(window, &support_breaks(h, window.dim()), |x| h.eval(x).exp_m1())?;
                Ok((intensity * i).exp())
            }
            Functional::Field { point, cap: None } => {
                let z = ComplexPoint::from_real(point);
                Ok(poisson_moment(kernel, intensity, Some(window), &[z])?.value.re)
            }
            _ => Err(Error::Unsupported(format!("closed-form Poisson mean of {}", self.label()))),
        }
    }
}

/// `E[min(N, m)]` for `N ~ Poisson(mu)`.
fn capped_poisson_mean(mu: f64, m: f64) -> f64 {
    if m <= 0.0 {
        return m;
    }
    let top = m.floor() as u64;
    let mut p = (-mu).exp();
    let mut below = 0.0;
    let mut cdf = 0.0;
    for k in 0..=top {
        if k > 0 {
            p *= mu / k as f64;
        }
        cdf += p;
        below += p * (k as f64).min(m);
    }
    below + m * (1.0 - cdf).max(0.0)
}

fn intersection_volume(a: &Window, b: &Window) -> Result<f64> {
    match (a.bounds(), b.bounds()) {
        (Some((alo, ahi)), Some((blo, bhi))) => {
            if alo.len() != blo.len() {
                return Err(Error::DimensionMismatch {
                    expected: blo.len(),
                    found: alo.len(),
                });
            }
            Ok((0..alo.len()).map(|k| (ahi[k].min(bhi[k]) - alo[k].max(blo[k])).max(0.0)).product())
        }
        (None, None) if a == b => Ok(a.volume()),
        _ => Err(Error::Unsupported("region intersection on spheres".into())),
    }
}

fn support_breaks(h: &TestFunction, dim: usize) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new(); dim];
    if let Some((lo, hi)) = h.support().as_ref().and_then(|w| w.bounds().map(|(l, h)| (l.to_vec(), h.to_vec()))) {
        for k in 0..dim.min(lo.len()) {
            out[k].push(lo[k]);
            out[k].push(hi[k]);
        }
    }
    out
}

const PANEL_WIDTH: f64 = 0.5;
const PANEL_NODES: usize = 16;
const COARSE_NODES: usize = 12;

/// Per-axis composite Gauss–Legendre rules with panels no wider than `PANEL_WIDTH`.
fn axis_rules(lo: &[f64], hi: &[f64], breaks: &[Vec<f64>], per_panel: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
    (0..lo.len())
        .map(|k| {
            let panels = ((hi[k] - lo[k]) / PANEL_WIDTH).ceil().max(1.0) as usize;
            let mut b: Vec<f64> = (1..panels).map(|j| lo[k] + (hi[k] - lo[k]) * j as f64 / panels as f64).collect();
            if let Some(extra) = breaks.get(k) {
                b.extend(extra);
            }
            composite_gauss_legendre(lo[k], hi[k], &b, per_panel)
        })
        .collect()
}

/// Tensor-product integral of `f` over the per-axis rules.
fn tensor_integral<F: FnMut(&[f64]) -> Complex64>(rules: &[(Vec<f64>, Vec<f64>)], mut f: F) -> (Complex64, usize) {
    let dim = rules.len();
    let mut idx = vec![0usize; dim];
    let mut x = vec![0.0; dim];
    let mut re = NeumaierSum::new();
    let mut im = NeumaierSum::new();
    let mut count = 0;
    if rules.iter().any(|r| r.0.is_empty()) {
        return (Complex64::new(0.0, 0.0), 0);
    }
    loop {
        let mut w = 1.0;
        for k in 0..dim {
            x[k] = rules[k].0[idx[k]];
            w *= rules[k].1[idx[k]];
        }
        let v = f(&x) * w;
        re.add(v.re);
        im.add(v.im);
        count += 1;
        let mut k = dim;
        loop {
            if k == 0 {
                return (Complex64::new(re.value(), im.value()), count);
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < rules[k].0.len() {
                break;
            }
            idx[k] = 0;
        }
    }
}

/// `\int_window f d lambda` for box windows, with extra per-axis breakpoints.
pub fn box_integral<F: Fn(&[f64]) -> f64>(window: &Window, breaks: &[Vec<f64>], f: F) -> Result<f64> {
    let (lo, hi) = window.bounds().ok_or_else(|| Error::Unsupported("box quadrature on spheres".into()))?;
    let rules = axis_rules(lo, hi, breaks, PANEL_NODES);
    Ok(tensor_integral(&rules, |x| f(x).into()).0.re)
}

/// A Poisson moment with its quadrature and truncation bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampbellValue {
    #[serde(with = "reim")]
    pub value: Complex64,
    pub bound: f64,
    pub nodes: usize,
}

/// `E[prod_j phi^c(z_j)]` for one or two points under the Poisson process
/// of the given intensity on `region`, or on the whole space when `region`
/// is `None`. Conjugated factors are passed as `conj(z)`, since
/// `conj(phi^c(z)) = phi^c(conj z)`.
pub fn poisson_moment(kernel: &KernelSpec, intensity: f64, region: Option<&Window>, points: &[ComplexPoint]) -> Result<CampbellValue> {
    if points.is_empty() || points.len() > 2 {
        return Err(invalid("points", "Poisson moments are implemented for one or two points"));
    }
    for z in points {
        kernel.check_point(z)?;
    }
    if kernel.is_sphere() {
        return Err(Error::Unsupported("Campbell quadrature for the sphere kernel".into()));
    }
    let dim = kernel.dim();
    let (lo, hi, tail) = match region {
        Some(w) => {
            let (lo, hi) = w.bounds().ok_or_else(|| Error::Unsupported("Campbell quadrature on spheres".into()))?;
            (lo.to_vec(), hi.to_vec(), [0.0; 3])
        }
        None => {
            let mut r0: f64 = 1.0;
            while points.iter().any(|z| kernel.tail_bound(z, r0) > 1e-14) && r0 < 1e3 {
                r0 *= 1.25;
            }
            let mut lo = vec![f64::INFINITY; dim];
            let mut hi = vec![f64::NEG_INFINITY; dim];
            for z in points {
                for (k, c) in z.coords().iter().enumerate() {
                    lo[k] = lo[k].min(c.re - r0);
                    hi[k] = hi[k].max(c.re + r0);
                }
            }
            let t: Vec<f64> = points.iter().map(|z| kernel.tail_bound(z, r0)).collect();
            let t12 = if points.len() == 2 {
                (kernel.sup_abs(&points[0]) * t[1]).min(kernel.sup_abs(&points[1]) * t[0])
            } else {
                0.0
            };
            (lo, hi, [t[0], *t.get(1).unwrap_or(&0.0), t12])
        }
    };
    let run = |per_panel: usize| {
        let rules = axis_rules(&lo, &hi, &[], per_panel);
        let (pair, nodes) = tensor_integral(&rules, |x| {
            let g0 = kernel.eval_c(points[0].coords(), x);
            points.get(1).map_or(g0, |z| g0 * kernel.eval_c(z.coords(), x))
        });
        let single = |z: &ComplexPoint| tensor_integral(&rules, |x| kernel.eval_c(z.coords(), x)).0;
        let i0 = single(&points[0]);
        let i1 = points.get(1).map(single);
        (pair, i0, i1, nodes)
    };
    let (pf, i0f, i1f, nodes) = run(PANEL_NODES);
    let (pc, i0c, i1c, _) = run(COARSE_NODES);
    let s = intensity;
    let e0 = (i0f - i0c).norm() + tail[0];
    match (i1f, i1c) {
        (None, _) => Ok(CampbellValue {
            value: s * i0f,
            bound: s * e0 + 1e-15,
            nodes,
        }),
        (Some(i1f), Some(i1c)) => {
            let e1 = (i1f - i1c).norm() + tail[1];
            let ep = (pf - pc).norm() + tail[2];
            let value = s * pf + s * s * i0f * i1f;
            let bound = s * ep + s * s * (i0f.norm() * e1 + i1f.norm() * e0 + e0 * e1) + 1e-15 * value.norm().max(1.0);
            Ok(CampbellValue { value, bound, nodes })
        }
        _ => unreachable!(),
    }
}

/// Declared finite-volume bias for one- and two-point functions: the effect
/// of particles outside the window, dominated by a Poisson process of
/// intensity `rho * sigma`.
pub fn finite_volume_bias(model: &Model, points: &[ComplexPoint]) -> Result<f64> {
    let w = model.window();
    if w.is_sphere() {
        return Ok(0.0);
    }
    let k = model.kernel();
    let rho = model.dominating_intensity();
    let r: Vec<f64> = points.iter().map(|z| w.distance_to_boundary(&z.re())).collect();
    let t: Vec<f64> = points.iter().zip(&r).map(|(z, &r)| k.tail_bound(z, r)).collect();
    let m: Vec<f64> = points.iter().map(|z| k.tail_bound(z, 0.0)).collect();
    match points.len() {
        0 => Ok(0.0),
        1 => Ok(rho * t[0]),
        2 => {
            let t12 = (k.sup_abs(&points[0]) * t[1]).min(k.sup_abs(&points[1]) * t[0]);
            Ok(rho * t12 + rho * rho * (t[0] * m[1] + m[0] * t[1] + t[0] * t[1]))
        }
        _ => Err(invalid("points", "bias bound is implemented for one or two points")),
    }
}

fn check_bulk(model: &Model, pairs: &[(Vec<f64>, Vec<f64>)]) -> Result<()> {
    let w = model.window();
    if w.is_sphere() {
        return Ok(());
    }
    let r = model.kernel().decay_radius(BULK_TOL);
    let shift = pairs.iter().map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()).fold(0.0, f64::max);
    for (a, b) in pairs {
        for x in [a, b] {
            let d = w.distance_to_boundary(x);
            if d < r + shift {
                return Err(Error::BulkCondition(format!(
                    "point {x:?} is {d:.3} from the boundary; need {:.3} (decay radius {r:.3} + displacement {shift:.3})",
                    r + shift
                )));
            }
        }
    }
    Ok(())
}

/// Covariances of increasing functionals are non-negative within `Z_PASS` standard errors.
pub fn fkg_test(samples: &[Configuration], kernel: &KernelSpec, pairs: &[(Functional, Functional)], seed: Option<u64>) -> Result<TestReport> {
    let mut checks = Vec::with_capacity(pairs.len());
    for (f1, f2) in pairs {
        let a: Vec<f64> = samples.iter().map(|c| f1.eval(c, kernel)).collect();
        let b: Vec<f64> = samples.iter().map(|c| f2.eval(c, kernel)).collect();
        let cov = covariance(&a, &b, DEFAULT_BATCHES)?;
        checks.push(Check::at_least(format!("cov({}, {})", f1.label(), f2.label()), cov.mean, -Z_PASS * cov.stderr));
    }
    Ok(TestReport::new("fkg", checks, samples.len(), None, seed))
}

/// Exact `Cov(N_A, N_B)` by the series oracle; passes iff it is positive
/// beyond its error and the error is at most `tol`.
pub fn fkg_oracle(model: &Model, a: &Window, b: &Window, params: &SeriesParams, tol: f64) -> Result<TestReport> {
    let spec = model.series(params)?;
    let obs = [
        Observable::CountProduct { a: a.clone(), b: b.clone() },
        Observable::count(Some(a.clone())),
        Observable::count(Some(b.clone())),
    ];
    let v = expect_many(&spec, &obs)?;
    let (ab, ea, eb) = (v[0].value.re, v[1].value.re, v[2].value.re);
    let cov = ab - ea * eb;
    let err = v[0].error() + ea.abs() * v[2].error() + eb.abs() * v[1].error() + v[1].error() * v[2].error();
    let checks = vec![Check::at_least("covariance", cov, err), Check::at_most("error", err, tol)];
    Ok(TestReport::new("fkg_oracle", checks, 0, Some(params.quad_nodes), None))
}

/// Means of increasing functionals are at most their means under the
/// dominating Poisson process (intensity `rho * sigma`).
pub fn dominance_test(model: &Model, samples: &[Configuration], panel: &[Functional], seed: Option<u64>) -> Result<TestReport> {
    let rho = model.dominating_intensity();
    let mut checks = Vec::with_capacity(panel.len());
    for f in panel {
        let exact = f.poisson_mean(model.kernel(), model.window(), rho)?;
        let values: Vec<f64> = samples.iter().map(|c| f.eval(c, model.kernel())).collect();
        let bm = batch_means(&values, DEFAULT_BATCHES)?;
        checks.push(Check::at_most(f.label(), bm.mean - exact, Z_PASS * bm.stderr));
    }
    Ok(TestReport::new("dominance", checks, samples.len(), None, seed))
}

/// Exact `E[N_Lambda] <= rho sigma(Lambda)` by the series oracle.
pub fn dominance_oracle(model: &Model, params: &SeriesParams) -> Result<TestReport> {
    let spec = model.series(params)?;
    let v = expect_many(&spec, &[Observable::count(None)])?.remove(0);
    let bound = model.dominating_intensity() * model.window().volume();
    let checks = vec![Check::at_most("E[N] - rho sigma(Lambda)", v.value.re - bound, v.error())];
    Ok(TestReport::new("dominance_oracle", checks, 0, Some(params.quad_nodes), None))
}

/// `L_{t2}(h) <= L_{t1}(h)` from independent sample sets at `t1 < t2`.
pub fn laplace_monotonicity_test(samples_t1: &[Configuration], samples_t2: &[Configuration], h: &TestFunction, seed: Option<u64>) -> Result<TestReport> {
    let l1 = estimate_laplace(samples_t1, h)?;
    let l2 = estimate_laplace(samples_t2, h)?;
    let checks = vec![Check::at_most(
        "L(t2) - L(t1)",
        l2.value.re - l1.value.re,
        Z_PASS * l1.stderr_re.hypot(l2.stderr_re),
    )];
    Ok(TestReport::new("laplace_monotonicity", checks, samples_t1.len() + samples_t2.len(), None, seed))
}

/// Exact ordering `L_{t2}(h) <= L_{t1}(h)` by the series oracle, with each
/// value's error at most `tol`.
pub fn laplace_monotonicity_oracle(model: &Model, t1: f64, t2: f64, h: &TestFunction, params: &SeriesParams, tol: f64) -> Result<TestReport> {
    if !(t1 <= t2) {
        return Err(invalid("t", "need t1 <= t2"));
    }
    let obs = [Observable::laplace(h.clone())];
    let v1 = expect_many(&model.scaled(t1)?.series(params)?, &obs)?.remove(0);
    let v2 = expect_many(&model.scaled(t2)?.series(params)?, &obs)?.remove(0);
    let checks = vec![
        Check::at_most("L(t2) - L(t1)", v2.value.re - v1.value.re, v1.error() + v2.error()),
        Check::at_most("error(t1)", v1.error(), tol),
        Check::at_most("error(t2)", v2.error(), tol),
    ];
    Ok(TestReport::new("laplace_monotonicity_oracle", checks, 0, Some(params.quad_nodes), None))
}

/// `S_2(x1, x2) = S_2(g x1, g x2)` by a paired estimate on one sample stream.
pub fn euclidean_invariance_test(model: &Model, samples: &[Configuration], g: &GroupElement, points: &[Vec<f64>], seed: Option<u64>) -> Result<TestReport> {
    let images: Vec<Vec<f64>> = points.iter().map(|x| g.apply_real(x)).collect::<Result<_>>()?;
    check_bulk(model, &points.iter().cloned().zip(images.iter().cloned()).collect::<Vec<_>>())?;
    let z: Vec<ComplexPoint> = points.iter().map(|x| ComplexPoint::from_real(x)).collect();
    let gz: Vec<ComplexPoint> = images.iter().map(|x| ComplexPoint::from_real(x)).collect();
    let flags = vec![false; z.len()];
    let a = Observable::field_product(model.kernel(), &z, &flags)?;
    let b = Observable::field_product(model.kernel(), &gz, &flags)?;
    let diff = paired_difference(samples, &a, &b)?;
    let bias = finite_volume_bias(model, &z)? + finite_volume_bias(model, &gz)?;
    let checks = vec![Check::at_most("|S(x) - S(gx)|", diff.value.norm(), Z_PASS * diff.stderr() + bias)];
    Ok(TestReport::new("euclidean_invariance", checks, samples.len(), None, seed))
}

fn embed_all(slice: &Slice, ys: &[Vec<f64>]) -> Result<Vec<ComplexPoint>> {
    ys.iter().map(|y| wick_embed(slice, y)).collect()
}

fn boosted(kernel: &KernelSpec, chi: f64, z: &[ComplexPoint]) -> Result<Vec<ComplexPoint>> {
    let g = boost_as_complex_rotation(chi, kernel.ambient_dim());
    let out: Vec<ComplexPoint> = z.iter().map(|p| g.apply(p)).collect::<Result<_>>()?;
    for p in &out {
        kernel.check_point(p)?;
    }
    Ok(out)
}

/// Paired estimate of `tau_n(y) - tau_n(Lambda_chi y)`. With `resolution`,
/// additionally requires `Z_PASS sigma_pair + bias <= resolution |tau_n|`.
pub fn lorentz_invariance_test(
    model: &Model,
    samples: &[Configuration],
    slice: &Slice,
    chi: f64,
    ys: &[Vec<f64>],
    resolution: Option<f64>,
    seed: Option<u64>,
) -> Result<TestReport> {
    let k = model.kernel();
    let z = embed_all(slice, ys)?;
    let gz = boosted(k, chi, &z)?;
    check_bulk(model, &z.iter().map(|p| p.re()).zip(gz.iter().map(|p| p.re())).collect::<Vec<_>>())?;
    let flags = vec![false; z.len()];
    let a = Observable::field_product(k, &z, &flags)?;
    let b = Observable::field_product(k, &gz, &flags)?;
    let diff = paired_difference(samples, &a, &b)?;
    let bias = finite_volume_bias(model, &z)? + finite_volume_bias(model, &gz)?;
    let allowed = Z_PASS * diff.stderr() + bias;
    let mut checks = vec![Check::at_most("|tau(y) - tau(boosted y)|", diff.value.norm(), allowed)];
    if let Some(r) = resolution {
        let tau = estimate_observable(samples, &a)?;
        checks.push(Check::at_most("resolution", allowed, r * tau.value.norm()));
    }
    Ok(TestReport::new("lorentz_invariance", checks, samples.len(), None, seed))
}

/// Poisson (`beta = 0`) version of the boost test on the whole space, by
/// Campbell quadrature on both sides.
pub fn lorentz_invariance_exact(kernel: &KernelSpec, intensity: f64, slice: &Slice, chi: f64, ys: &[Vec<f64>], tol: f64) -> Result<TestReport> {
    let z = embed_all(slice, ys)?;
    let gz = boosted(kernel, chi, &z)?;
    let a = poisson_moment(kernel, intensity, None, &z)?;
    let b = poisson_moment(kernel, intensity, None, &gz)?;
    let diff = (a.value - b.value).norm();
    let checks = vec![
        Check::at_most("|tau(y) - tau(boosted y)|", diff, tol),
        Check::at_most("quadrature bound", a.bound + b.bound, tol),
    ];
    Ok(TestReport::new("lorentz_invariance_exact", checks, 0, Some(a.nodes), None))
}

fn mixed_points(slice: &Slice, kernel: &KernelSpec, chi: f64, y1: &[f64], y2: &[f64]) -> Result<[Vec<ComplexPoint>; 3]> {
    let z = embed_all(slice, &[y1.to_vec(), y2.to_vec()])?;
    let gz = boosted(kernel, chi, &z)?;
    let moved = wick_embed(slice, &reflected_boost_conjugate(slice, chi, y1)?)?;
    kernel.check_point(&moved)?;
    Ok([
        vec![z[0].conj(), z[1].clone()],
        vec![gz[0].conj(), gz[1].clone()],
        vec![moved.conj(), z[1].clone()],
    ])
}

/// Zero-time control points: the origin (fixed by every boost) and the
/// spatial projection of `y2`.
fn control_points(y1: &[f64], y2: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut c2 = y2.to_vec();
    c2[0] = 0.0;
    (vec![0.0; y1.len()], c2)
}

/// Poisson (`beta = 0`) check that `Q_{2,1}` is not boost invariant: the
/// difference exceeds `Z_SIGNAL` quadrature bounds, the boosted value equals
/// `Q_{2,1}` at `theta theta_alpha y1` to `identity_tol`, and the zero-time
/// control vanishes within its bound.
pub fn mixed_noninvariance_exact(kernel: &KernelSpec, intensity: f64, slice: &Slice, chi: f64, y1: &[f64], y2: &[f64], identity_tol: f64) -> Result<TestReport> {
    let q = |pts: &[ComplexPoint]| poisson_moment(kernel, intensity, None, pts);
    let [orig, boost, moved] = mixed_points(slice, kernel, chi, y1, y2)?;
    let (q0, q1, qm) = (q(&orig)?, q(&boost)?, q(&moved)?);
    let (c1, c2) = control_points(y1, y2);
    let [corig, cboost, _] = mixed_points(slice, kernel, chi, &c1, &c2)?;
    let (k0, k1) = (q(&corig)?, q(&cboost)?);
    let checks = vec![
        Check::at_least("|Q(boosted) - Q|", (q1.value - q0.value).norm(), Z_SIGNAL * (q0.bound + q1.bound)),
        Check::at_most("relocation identity", (q1.value - qm.value).norm(), identity_tol),
        Check::at_most("zero-time control", (k1.value - k0.value).norm(), k0.bound + k1.bound),
    ];
    Ok(TestReport::new("mixed_noninvariance_exact", checks, 0, Some(q0.nodes), None))
}

/// Monte Carlo version of [`mixed_noninvariance_exact`] on one sample stream.
pub fn mixed_noninvariance_test(model: &Model, samples: &[Configuration], slice: &Slice, chi: f64, y1: &[f64], y2: &[f64], seed: Option<u64>) -> Result<TestReport> {
    let k = model.kernel();
    let flags = [false, false];
    let obs = |pts: &[ComplexPoint]| Observable::field_product(k, pts, &flags);
    let [orig, boost, moved] = mixed_points(slice, k, chi, y1, y2)?;
    let diff = paired_difference(samples, &obs(&boost)?, &obs(&orig)?)?;
    let ident = paired_difference(samples, &obs(&boost)?, &obs(&moved)?)?;
    let (c1, c2) = control_points(y1, y2);
    let [corig, cboost, _] = mixed_points(slice, k, chi, &c1, &c2)?;
    let control = paired_difference(samples, &obs(&cboost)?, &obs(&corig)?)?;
    let checks = vec![
        Check::at_least("|Q(boosted) - Q|", diff.value.norm(), Z_SIGNAL * diff.stderr()),
        Check::at_most("relocation identity", ident.value.norm(), Z_PASS * ident.stderr() + 1e-12),
        Check::at_most("zero-time control", control.value.norm(), Z_PASS * control.stderr() + 1e-12),
    ];
    Ok(TestReport::new("mixed_noninvariance", checks, samples.len(), None, seed))
}

/// Bulk observables of one window in a growth study.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GrowthRow {
    pub volume: f64,
    /// Points per unit volume in the unit box at the window centre.
    pub density: CorrelationEstimate,
    pub laplace: CorrelationEstimate,
    pub s2: CorrelationEstimate,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GrowthReport {
    pub rows: Vec<GrowthRow>,
    pub report: TestReport,
}

/// Bulk observables for an increasing sequence of windows with a common
/// centre. Flags any increase of `L(h)` and any successive difference that
/// fails to shrink, both beyond `Z_PASS` combined standard errors.
pub fn window_growth_study(models: &[Model], h: &TestFunction, pair: &[Vec<f64>; 2], cfg: &SamplerConfig, n_samples: usize) -> Result<GrowthReport> {
    if models.len() < 3 {
        return Err(invalid("models", "need at least three window sizes"));
    }
    let centre = models[0].window().center();
    let mut rows = Vec::with_capacity(models.len());
    let mut total = 0;
    for m in models {
        if m.window().center() != centre {
            return Err(invalid("models", "windows must share a centre"));
        }
        let samples = m.sample(cfg, n_samples)?.samples;
        total += samples.len();
        let unit = Window::new_box(&centre.iter().map(|c| [c - 0.5, c + 0.5]).collect::<Vec<_>>())?;
        let density = estimate_observable(&samples, &Observable::count(Some(unit)))?;
        let laplace = estimate_laplace(&samples, h)?;
        let z: Vec<ComplexPoint> = pair.iter().map(|x| ComplexPoint::from_real(x)).collect();
        let s2 = estimate_observable(&samples, &Observable::field_product(m.kernel(), &z, &[false, false])?)?;
        rows.push(GrowthRow {
            volume: m.window().volume(),
            density,
            laplace,
            s2,
        });
    }
    let mut checks = Vec::new();
    for (i, w) in rows.windows(2).enumerate() {
        checks.push(Check::at_most(
            format!("L(h) non-increasing {i}->{}", i + 1),
            w[1].laplace.value.re - w[0].laplace.value.re,
            Z_PASS * w[0].laplace.stderr_re.hypot(w[1].laplace.stderr_re),
        ));
    }
    type Pick = fn(&GrowthRow) -> &CorrelationEstimate;
    let picks: [(&str, Pick); 3] = [("density", |r| &r.density), ("laplace", |r| &r.laplace), ("s2", |r| &r.s2)];
    for (name, pick) in picks {
        for (i, w) in rows.windows(3).enumerate() {
            let (a, b, c) = (pick(&w[0]), pick(&w[1]), pick(&w[2]));
            let se = (a.stderr_re.powi(2) + 2.0 * b.stderr_re.powi(2) + c.stderr_re.powi(2)).sqrt();
            checks.push(Check::at_most(
                format!("{name} differences shrink at {}", i + 2),
                (c.value.re - b.value.re).abs() - (b.value.re - a.value.re).abs(),
                Z_PASS * se,
            ));
        }
    }
    Ok(GrowthReport {
        rows,
        report: TestReport::new("window_growth", checks, total, None, Some(cfg.seed)),
    })
}

/// Closed-form Poisson panel at `beta = 0`: count mean and variance,
/// `L(h)`, and the Campbell first and second moments at real points.
pub fn poisson_null_panel(model: &Model, samples: &[Configuration], h: &TestFunction, x1: &[f64], x2: &[f64], seed: Option<u64>) -> Result<TestReport> {
    if model.beta() != 0.0 {
        return Err(invalid("beta", "the Poisson panel needs beta = 0"));
    }
    let w = model.window();
    let k = model.kernel();
    let s = model.intensity;
    let mu = s * w.volume();
    let mut checks = Vec::new();
    let mut z_check = |name: &str, values: Vec<f64>, exact: f64, exact_err: f64| -> Result<()> {
        let bm = batch_means(&values, DEFAULT_BATCHES)?;
        checks.push(Check::at_most(name, (bm.mean - exact).abs(), Z_PASS * bm.stderr + exact_err));
        Ok(())
    };
    let counts: Vec<f64> = samples.iter().map(|c| c.len() as f64).collect();
    z_check("count mean", counts.clone(), mu, 0.0)?;
    z_check("count variance", counts.iter().map(|n| (n - mu).powi(2)).collect(), mu, 0.0)?;
    let lap = (s * box_integral(w, &support_breaks(h, w.dim()), |x| (-h.eval(x)).exp_m1())?).exp();
    z_check("laplace", samples.iter().map(|c| (-c.pair(h)).exp()).collect(), lap, 1e-12)?;
    let (z1, z2) = (ComplexPoint::from_real(x1), ComplexPoint::from_real(x2));
    let m1 = poisson_moment(k, s, Some(w), std::slice::from_ref(&z1))?;
    let o1 = Observable::field_product(k, std::slice::from_ref(&z1), &[false])?;
    z_check("campbell first", samples.iter().map(|c| o1.eval(c).re).collect(), m1.value.re, m1.bound)?;
    let m2 = poisson_moment(k, s, Some(w), &[z1.clone(), z2.clone()])?;
    let o2 = Observable::field_product(k, &[z1, z2], &[false, false])?;
    z_check("campbell second", samples.iter().map(|c| o2.eval(c).re).collect(), m2.value.re, m2.bound)?;
    Ok(TestReport::new("poisson_null", checks, samples.len(), Some(m2.nodes), seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::lorentz_boost;

    fn gauss(d: usize) -> KernelSpec {
        KernelSpec::gaussian(d).unwrap()
    }

    #[test]
    fn checks_and_reports() {
        assert!(Check::at_most("a", 1.0, 1.0).passed);
        assert!(!Check::at_most("a", f64::NAN, 1.0).passed);
        assert!(Check::at_least("b", 2.0, 1.0).passed);
        assert!(!Check::at_least("b", 0.5, 1.0).passed);
        let r = TestReport::new("t", vec![Check::at_most("a", 0.1, 1.0), Check::at_most("b", 0.9, 1.0)], 5, None, Some(1));
        assert!(r.passed);
        assert_eq!(r.margin, 0.9);
        assert!(r.line().starts_with("PASS t"));
    }

    #[test]
    fn capped_poisson_mean_small_cases() {
        assert!((capped_poisson_mean(2.0, 1.0) - (1.0 - (-2.0f64).exp())).abs() < 1e-15);
        assert!((capped_poisson_mean(2.0, 1e3) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_campbell_matches_closed_form() {
        let k = gauss(1);
        let w = Window::cube(1, -1.0, 2.0).unwrap();
        let x = 0.3f64;
        let v = poisson_moment(&k, 2.0, Some(&w), &[ComplexPoint::from_real(&[x])]).unwrap();
        let pi = std::f64::consts::PI;
        let exact = 2.0 * 0.5 * pi.sqrt() * (statrs::function::erf::erf(2.0 - x) - statrs::function::erf::erf(-1.0 - x));
        // statrs' erf limits the comparison to about 1e-11.
        assert!((v.value.re - exact).abs() < 1e-10, "{} {}", v.value.re, exact);
        assert!(v.bound < 1e-10);
    }

    #[test]
    fn full_space_second_moment_matches_convolution() {
        let k = gauss(2);
        let z1 = ComplexPoint(vec![Complex64::new(0.0, 0.3), Complex64::new(0.1, 0.0)]);
        let z2 = ComplexPoint(vec![Complex64::new(0.2, -0.1), Complex64::new(-0.4, 0.0)]);
        let v = poisson_moment(&k, 1.5, None, &[z1.clone(), z2.clone()]).unwrap();
        let pi = std::f64::consts::PI;
        let d: Complex64 = z1.coords().iter().zip(z2.coords()).map(|(a, b)| (a - b) * (a - b)).sum();
        let exact = 1.5 * (pi / 2.0) * (-0.5 * d).exp() + 1.5 * 1.5 * pi * pi;
        assert!((v.value - exact).norm() < 1e-10, "{} {}", v.value, exact);
        assert!(v.bound < 1e-8);
    }

    #[test]
    fn boost_matches_real_boost_on_embedded_points() {
        let s = Slice::Minkowski { dim: 2 };
        let y = [0.2, -0.4];
        let z = wick_embed(&s, &y).unwrap();
        let a = boosted(&gauss(2), 0.3, &[z]).unwrap().remove(0);
        let b = wick_embed(&s, &lorentz_boost(&s, 0.3, &y).unwrap()).unwrap();
        assert!(a.distance(&b) < 1e-14);
    }

    #[test]
    fn lorentz_exact_zero_boost_is_exact() {
        let s = Slice::Minkowski { dim: 2 };
        let r = lorentz_invariance_exact(&gauss(2), 1.0, &s, 0.0, &[vec![0.2, 0.0], vec![-0.1, 0.3]], 1e-6).unwrap();
        assert!(r.passed, "{r:?}");
        assert_eq!(r.checks[0].value, 0.0);
    }

    #[test]
    fn bulk_condition_is_enforced() {
        let m = Model::widom_rowlinson(gauss(1), Window::cube(1, 0.0, 6.0).unwrap(), 1.0, 1.0).unwrap();
        let samples = vec![Configuration::empty(1); 64];
        let g = GroupElement::translation(&[0.5]);
        let err = euclidean_invariance_test(&m, &samples, &g, &[vec![0.5], vec![1.0]], None).unwrap_err();
        assert!(matches!(err, Error::BulkCondition(_)));
    }

    #[test]
    fn identity_gives_exact_zero_difference() {
        let m = Model::widom_rowlinson(gauss(1), Window::cube(1, 0.0, 12.0).unwrap(), 0.0, 1.0).unwrap();
        let samples = m.sample(&SamplerConfig { seed: 3, ..Default::default() }, 64).unwrap().samples;
        let r = euclidean_invariance_test(&m, &samples, &GroupElement::identity(1), &[vec![5.5], vec![6.5]], None).unwrap();
        assert!(r.passed);
        assert_eq!(r.checks[0].value, 0.0);
    }

    #[test]
    fn variance_of_count_has_nonnegative_self_covariance() {
        let m = Model::widom_rowlinson(gauss(1), Window::cube(1, 0.0, 4.0).unwrap(), 0.0, 1.0).unwrap();
        let samples = m.sample(&SamplerConfig { seed: 1, thin: 5, ..Default::default() }, 640).unwrap().samples;
        let a = Functional::Count {
            region: Window::cube(1, 0.0, 2.0).unwrap(),
            cap: None,
        };
        let r = fkg_test(&samples, m.kernel(), &[(a.clone(), a)], None).unwrap();
        assert!(r.passed);
        assert!(-r.checks[0].value >= 0.0);
    }

    #[test]
    fn dominance_panel_means() {
        let w = Window::cube(1, 0.0, 2.0).unwrap();
        let k = gauss(1);
        let c = Functional::Count { region: w.clone(), cap: None };
        assert!((c.poisson_mean(&k, &w, 1.5).unwrap() - 3.0).abs() < 1e-12);
        let p = Functional::Pairing {
            h: TestFunction::cosine_bump(vec![1.0], 0.5, 1.0).unwrap(),
            cap: Some(2.0),
        };
        assert!(p.poisson_mean(&k, &w, 1.0).is_err());
    }
}
