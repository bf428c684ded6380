//! Convolution fields `phi = G * eta`, their holomorphic extension and
//! Monte Carlo estimators of moments and Laplace functionals.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::configurations::{Configuration, TestFunction};
use crate::error::{invalid, Error, Result};
use crate::geometry::{ComplexPoint, Window};
use crate::kernels::KernelSpec;
use crate::oracle::Observable;
use crate::quad::NeumaierSum;
use crate::stats::{batch_means, DEFAULT_BATCHES};

/// Serializes a complex number as `{"re": .., "im": ..}`.
pub mod reim {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct ReIm {
        re: f64,
        im: f64,
    }

    pub fn serialize<S: Serializer>(z: &Complex64, s: S) -> Result<S::Ok, S::Error> {
        ReIm { re: z.re, im: z.im }.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Complex64, D::Error> {
        let v = ReIm::deserialize(d)?;
        Ok(Complex64::new(v.re, v.im))
    }

    /// The same encoding for a list of complex numbers.
    pub mod vec {
        use super::ReIm;
        use num_complex::Complex64;
        use serde::{Deserialize, Deserializer, Serialize, Serializer};

        pub fn serialize<S: Serializer>(v: &[Complex64], s: S) -> Result<S::Ok, S::Error> {
            let out: Vec<ReIm> = v.iter().map(|z| ReIm { re: z.re, im: z.im }).collect();
            out.serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Complex64>, D::Error> {
            Ok(Vec::<ReIm>::deserialize(d)?.into_iter().map(|v| Complex64::new(v.re, v.im)).collect())
        }
    }
}

/// `phi^c(z) = sum_j s_j G^c(z, x_j)`.
pub fn field_complex(eta: &Configuration, kernel: &KernelSpec, z: &ComplexPoint) -> Result<Complex64> {
    kernel.check_point(z)?;
    if eta.dim() != kernel.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: kernel.ambient_dim(),
            found: eta.dim(),
        });
    }
    let mut re = NeumaierSum::new();
    let mut im = NeumaierSum::new();
    for (x, s) in eta.weighted_points() {
        let g = kernel.eval_c(z.coords(), x) * s;
        re.add(g.re);
        im.add(g.im);
    }
    Ok(Complex64::new(re.value(), im.value()))
}

/// A Monte Carlo estimate with batch-means standard errors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEstimate {
    #[serde(with = "reim")]
    pub value: Complex64,
    pub stderr_re: f64,
    pub stderr_im: f64,
    pub n_samples: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub points: Vec<ComplexPoint>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub conj: Vec<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl CorrelationEstimate {
    fn from_values(values: &[Complex64]) -> Result<Self> {
        let re: Vec<f64> = values.iter().map(|v| v.re).collect();
        let im: Vec<f64> = values.iter().map(|v| v.im).collect();
        let a = batch_means(&re, DEFAULT_BATCHES)?;
        let b = batch_means(&im, DEFAULT_BATCHES)?;
        if !(a.mean.is_finite() && b.mean.is_finite() && a.stderr.is_finite() && b.stderr.is_finite()) {
            return Err(Error::NonFinite("correlation estimate".into()));
        }
        Ok(CorrelationEstimate {
            value: Complex64::new(a.mean, b.mean),
            stderr_re: a.stderr,
            stderr_im: b.stderr,
            n_samples: values.len(),
            points: Vec::new(),
            conj: Vec::new(),
            seed: None,
        })
    }

    /// `sqrt(stderr_re^2 + stderr_im^2)`.
    pub fn stderr(&self) -> f64 {
        self.stderr_re.hypot(self.stderr_im)
    }
}

/// Sample mean of an observable over a sample stream.
pub fn estimate_observable(samples: &[Configuration], obs: &Observable) -> Result<CorrelationEstimate> {
    let values: Vec<Complex64> = samples.iter().map(|c| obs.eval(c)).collect();
    CorrelationEstimate::from_values(&values)
}

/// Several observables on the same stream.
pub fn estimate_observables(samples: &[Configuration], obs: &[Observable]) -> Result<Vec<CorrelationEstimate>> {
    obs.iter().map(|o| estimate_observable(samples, o)).collect()
}

/// Paired estimate of `E[A] - E[B]` from per-sample differences.
pub fn paired_difference(samples: &[Configuration], a: &Observable, b: &Observable) -> Result<CorrelationEstimate> {
    let values: Vec<Complex64> = samples.iter().map(|c| a.eval(c) - b.eval(c)).collect();
    CorrelationEstimate::from_values(&values)
}

/// `E[prod_j [conj] phi^c(z_j)]`. With real points and no conjugation this
/// is the Schwinger function `S_n`; at Wick-embedded points it is `tau_n`.
pub fn estimate_moment(samples: &[Configuration], kernel: &KernelSpec, points: &[ComplexPoint], conj: &[bool]) -> Result<CorrelationEstimate> {
    if points.len() != conj.len() {
        return Err(invalid("conj", "need one conjugation flag per point"));
    }
    let mut est = if points.is_empty() {
        CorrelationEstimate {
            value: Complex64::new(1.0, 0.0),
            stderr_re: 0.0,
            stderr_im: 0.0,
            n_samples: samples.len(),
            points: Vec::new(),
            conj: Vec::new(),
            seed: None,
        }
    } else {
        if samples.len() < DEFAULT_BATCHES {
            return Err(Error::NotEnoughSamples {
                needed: DEFAULT_BATCHES,
                found: samples.len(),
            });
        }
        estimate_observable(samples, &Observable::field_product(kernel, points, conj)?)?
    };
    est.points = points.to_vec();
    est.conj = conj.to_vec();
    Ok(est)
}

/// `L(h) = E[e^{-<eta, h>}]`.
pub fn estimate_laplace(samples: &[Configuration], h: &TestFunction) -> Result<CorrelationEstimate> {
    estimate_observable(samples, &Observable::laplace(h.clone()))
}

/// A box `K` in the complexification: per coordinate, real and imaginary intervals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexBox {
    pub re: Vec<[f64; 2]>,
    pub im: Vec<[f64; 2]>,
}

impl ComplexBox {
    pub fn dim(&self) -> usize {
        self.re.len()
    }

    fn per_coordinate(&self, k: usize, per_edge: usize) -> Vec<Complex64> {
        let [a, b] = self.re[k];
        let [c, d] = self.im[k];
        let mut out = Vec::new();
        for i in 0..per_edge {
            let t = i as f64 / per_edge as f64;
            out.push(Complex64::new(a + t * (b - a), c));
            out.push(Complex64::new(b, c + t * (d - c)));
            out.push(Complex64::new(b - t * (b - a), d));
            out.push(Complex64::new(a, d - t * (d - c)));
        }
        out
    }

    /// Tensor product of per-coordinate rectangle boundaries, `per_edge`
    /// points per edge (`per_edge = 1` gives the corners).
    pub fn boundary_points(&self, per_edge: usize) -> Vec<ComplexPoint> {
        let mut out = vec![Vec::new()];
        for k in 0..self.dim() {
            let pts = self.per_coordinate(k, per_edge.max(1));
            let mut next = Vec::with_capacity(out.len() * pts.len());
            for p in &out {
                for z in &pts {
                    let mut q = p.clone();
                    q.push(*z);
                    next.push(q);
                }
            }
            out = next;
        }
        out.into_iter().map(ComplexPoint).collect()
    }

    pub fn max_abs_im(&self) -> f64 {
        self.im.iter().map(|[a, b]| a.abs().max(b.abs())).fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MomentBoundReport {
    pub n: u32,
    /// Sample mean of `max_{z in corners} |phi^c(z)|^n`.
    pub mean: f64,
    pub stderr: f64,
    /// `ln(n! e^{rho R \int g_K})`.
    pub log_bound: f64,
    /// `\int g_K` over the window and `R = |g_K|_inf e^{|g_K|_inf}`.
    pub g_integral: f64,
    pub r_const: f64,
    pub passed: bool,
}

/// Checks `E[sup_K |phi^c|^n] <= n! exp(rho R \int g_K d lambda)` with
/// `g_K` approximated on a boundary grid of `K`.
pub fn moment_bound_check(
    samples: &[Configuration],
    kernel: &KernelSpec,
    k: &ComplexBox,
    n: u32,
    rho: f64,
    window: &Window,
    grid_h: f64,
) -> Result<MomentBoundReport> {
    if k.dim() != kernel.ambient_dim() {
        return Err(Error::DimensionMismatch {
            expected: kernel.ambient_dim(),
            found: k.dim(),
        });
    }
    if k.max_abs_im() > kernel.im_budget() {
        return Err(Error::ImaginaryBudget {
            im: k.max_abs_im(),
            budget: kernel.im_budget(),
        });
    }
    let corners = k.boundary_points(1);
    let values: Vec<f64> = samples
        .iter()
        .map(|c| {
            corners
                .iter()
                .map(|z| field_complex(c, kernel, z).map(|v| v.norm().powi(n as i32)))
                .try_fold(0.0f64, |m, v| v.map(|v| m.max(v)))
        })
        .collect::<Result<_>>()?;
    let (mean, stderr) = match batch_means(&values, DEFAULT_BATCHES) {
        Ok(bm) => (bm.mean, bm.stderr),
        Err(_) => (values.iter().sum::<f64>() / values.len().max(1) as f64, 0.0),
    };
    let probes = k.boundary_points(8);
    let grid = crate::interaction::QuadratureGrid::new(window, grid_h)?;
    let mut integral = NeumaierSum::new();
    let mut sup: f64 = 0.0;
    for i in 0..grid.len() {
        let x = grid.node(i);
        let g = probes.iter().map(|z| kernel.eval_c(z.coords(), x).norm()).fold(0.0, f64::max);
        sup = sup.max(g);
        integral.add(grid.weights()[i] * g);
    }
    let g_integral = integral.value();
    let r_const = sup * sup.exp();
    let log_fact: f64 = (1..=n).map(|j| (j as f64).ln()).sum();
    let log_bound = log_fact + rho * r_const * g_integral;
    let passed = mean.is_finite() && (mean - 3.0 * stderr <= 0.0 || (mean - 3.0 * stderr).ln() <= log_bound);
    Ok(MomentBoundReport {
        n,
        mean,
        stderr,
        log_bound,
        g_integral,
        r_const,
        passed,
    })
}

/// `|mean_theta f(z + r e^{i theta} e_k) - f(z)|` over `m` equispaced angles.
pub fn mean_value_defect<F: Fn(&ComplexPoint) -> Result<Complex64>>(f: F, z: &ComplexPoint, axis: usize, radius: f64, m: usize) -> Result<f64> {
    let centre = f(z)?;
    let mut acc = Complex64::new(0.0, 0.0);
    for j in 0..m {
        let theta = 2.0 * std::f64::consts::PI * j as f64 / m as f64;
        let mut w = z.clone();
        w.0[axis] += Complex64::from_polar(radius, theta);
        acc += f(&w)?;
    }
    Ok((acc / m as f64 - centre).norm())
}
