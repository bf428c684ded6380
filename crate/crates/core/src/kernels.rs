//! Euclidean-invariant kernels `G(x, y) >= 0` and their holomorphic
//! extensions `G^c(z, x)`.
//!
//! The mollified Bessel kernel is evaluated in momentum space,
//!
//! ```text
//! G(s) = (2 pi)^{-d} \int e^{i p.s} e^{-eps |p|^2 / 2} (|p|^2 + m^2)^{-power} dp,
//! ```
//!
//! by a truncated trapezoid rule whose step, cutoff and real-space cut are
//! chosen from explicit error bounds valid on the strip `|Im s_k| <= budget`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::geometry::ComplexPoint;
use crate::quad;

pub const DEFAULT_QUAD_TOL: f64 = 1e-8;
pub const DEFAULT_IM_BUDGET: f64 = 3.0;

fn one() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}
fn default_quad_tol() -> f64 {
    DEFAULT_QUAD_TOL
}
fn default_im_budget() -> f64 {
    DEFAULT_IM_BUDGET
}

/// Serializable kernel description (the `[kernel]` config section).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kernel", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelParams {
    /// `A exp{-kappa (z - x).(z - x)}` on `R^d`.
    Gaussian {
        dim: usize,
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default = "one")]
        kappa: f64,
    },
    /// `exp{z.x}` on the sphere of radius `radius` in `R^{dim+1}`.
    SphereExp { dim: usize, radius: f64 },
    /// Gaussian-mollified `(-Laplacian + m^2)^{-power}` Green's function.
    MollifiedBessel {
        dim: usize,
        epsilon: f64,
        mass: f64,
        #[serde(default = "half")]
        power: f64,
        #[serde(default = "default_quad_tol")]
        quad_tol: f64,
        #[serde(default = "default_im_budget")]
        im_budget: f64,
    },
}

/// Trapezoid rule for the damped Fourier integral, with certified error
/// `<= tol` for every `s` with `max_k |Im s_k| <= im_budget`.
#[derive(Clone, Debug)]
pub struct FourierQuadrature {
    pub dim: usize,
    pub tol: f64,
    pub im_budget: f64,
    /// Momentum step.
    pub step: f64,
    /// Momentum cutoff `P`.
    pub cutoff: f64,
    /// Nodes per axis on `[0, P]`.
    pub nodes: usize,
    /// `G` is returned as zero once `max_k |Re s_k| >= real_cut`.
    pub real_cut: f64,
    /// `|G(s)| <= decay_const * exp(-decay_rate * max_k |Re s_k|)`.
    pub decay_const: f64,
    pub decay_rate: f64,
    momenta: Vec<f64>,
    /// Folded weights `h^d 2^{#nonzero} f(|p|)`, row-major over the positive orthant.
    weights: Vec<f64>,
}

struct Design {
    a: f64,
    d_const: f64,
    real_cut: f64,
    step: f64,
    cutoff: f64,
    nodes: usize,
}

impl FourierQuadrature {
    pub fn new(dim: usize, epsilon: f64, mass: f64, power: f64, tol: f64, im_budget: f64) -> Result<Self> {
        if !(1..=2).contains(&dim) {
            return Err(Error::Unsupported(format!("mollified Bessel kernel in dimension {dim}")));
        }
        if !(epsilon > 0.0 && mass > 0.0 && power > 0.0 && tol > 0.0 && im_budget >= 0.0) {
            return Err(invalid("kernel", "epsilon, mass, power and quad_tol must be positive, im_budget non-negative"));
        }
        let mut best: Option<Design> = None;
        for alpha in [0.5, 0.7, 0.85, 0.95] {
            let d = design(dim, epsilon, mass, power, tol, im_budget, alpha * mass);
            if best.as_ref().is_none_or(|b| d.nodes < b.nodes) {
                best = Some(d);
            }
        }
        let d = best.expect("at least one design");
        let n = d.nodes + 1;
        let momenta: Vec<f64> = (0..n).map(|j| j as f64 * d.step).collect();
        let fold = |j: usize| if j == 0 { d.step } else { 2.0 * d.step };
        let norm = (2.0 * PI).powi(-(dim as i32));
        let profile = |p2: f64| norm * (-0.5 * epsilon * p2).exp() * (p2 + mass * mass).powf(-power);
        let weights = match dim {
            1 => (0..n).map(|j| fold(j) * profile(momenta[j] * momenta[j])).collect(),
            _ => {
                let mut w = Vec::with_capacity(n * n);
                for j in 0..n {
                    for k in 0..n {
                        let p2 = momenta[j] * momenta[j] + momenta[k] * momenta[k];
                        w.push(fold(j) * fold(k) * profile(p2));
                    }
                }
                w
            }
        };
        Ok(FourierQuadrature {
            dim,
            tol,
            im_budget,
            step: d.step,
            cutoff: d.cutoff,
            nodes: d.nodes,
            real_cut: d.real_cut,
            decay_const: d.d_const,
            decay_rate: d.a,
            momenta,
            weights,
        })
    }

    /// Total number of quadrature nodes per evaluation.
    pub fn total_nodes(&self) -> usize {
        self.momenta.len().pow(self.dim as u32)
    }

    fn eval_real(&self, s: &[f64]) -> f64 {
        if s.iter().any(|v| v.abs() >= self.real_cut) {
            return 0.0;
        }
        let n = self.momenta.len();
        match self.dim {
            1 => self.momenta.iter().zip(&self.weights).map(|(p, w)| w * (p * s[0]).cos()).sum(),
            _ => {
                let c1: Vec<f64> = self.momenta.iter().map(|p| (p * s[0]).cos()).collect();
                let c2: Vec<f64> = self.momenta.iter().map(|p| (p * s[1]).cos()).collect();
                let mut total = 0.0;
                for (row, a) in self.weights.chunks_exact(n).zip(&c1) {
                    let inner: f64 = row.iter().zip(&c2).map(|(w, c)| w * c).sum();
                    total += a * inner;
                }
                total
            }
        }
    }

    fn eval_complex(&self, s: &[Complex64]) -> Complex64 {
        if s.iter().any(|v| v.re.abs() >= self.real_cut) {
            return Complex64::new(0.0, 0.0);
        }
        let n = self.momenta.len();
        match self.dim {
            1 => self
                .momenta
                .iter()
                .zip(&self.weights)
                .map(|(p, w)| (s[0] * p).cos() * w)
                .sum(),
            _ => {
                let c1: Vec<Complex64> = self.momenta.iter().map(|p| (s[0] * p).cos()).collect();
                let c2: Vec<Complex64> = self.momenta.iter().map(|p| (s[1] * p).cos()).collect();
                let mut total = Complex64::new(0.0, 0.0);
                for (row, a) in self.weights.chunks_exact(n).zip(&c1) {
                    let mut inner = Complex64::new(0.0, 0.0);
                    for (w, c) in row.iter().zip(&c2) {
                        inner += c * w;
                    }
                    total += a * inner;
                }
                total
            }
        }
    }
}

/// `\int_R exp(-eps p^2 / 2 + |p| v) dp <= iaxis(v)`.
fn iaxis(epsilon: f64, v: f64) -> f64 {
    2.0 * (2.0 * PI / epsilon).sqrt() * (v * v / (2.0 * epsilon)).exp()
}

fn design(dim: usize, epsilon: f64, mass: f64, power: f64, tol: f64, budget: f64, a: f64) -> Design {
    let df = dim as f64;
    let norm = (2.0 * PI).powi(-(dim as i32));
    let ia = iaxis(epsilon, budget);
    // Discrete sums over the other axes exceed the integral by at most a
    // factor two while the step stays below sqrt(2 pi / eps).
    let other = if dim > 1 { 2.0 * ia } else { 1.0 };
    let d_const = norm * (mass * mass - a * a).powf(-power) * (0.5 * epsilon * a * a).exp() * ia * other;
    let real_cut = ((3.0 * d_const / tol).ln() / a).max(0.0);
    let m_strip = d_const * (a * real_cut).exp();
    let step = (2.0 * PI * a / (1.0 + 6.0 * df * m_strip / tol).ln()).min((2.0 * PI / epsilon).sqrt());
    // Truncation: the discrete tail beyond P is bounded by the integral from P - h.
    let centre = budget / epsilon;
    let trunc = |p: f64| {
        let q = p - step;
        if q <= centre {
            return f64::INFINITY;
        }
        let axis_tail = 2.0 * (budget * budget / (2.0 * epsilon)).exp() * (PI / (2.0 * epsilon)).sqrt() * erfc((0.5 * epsilon).sqrt() * (q - centre));
        norm * mass.powf(-2.0 * power) * df * axis_tail * (2.0 * ia).powi(dim as i32 - 1)
    };
    let mut lo = centre + step;
    let mut hi = lo + 1.0;
    while trunc(hi) > tol / 3.0 {
        hi = lo + 2.0 * (hi - lo);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if trunc(mid) > tol / 3.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let nodes = (hi / step).ceil() as usize;
    Design {
        a,
        d_const,
        real_cut,
        step,
        cutoff: nodes as f64 * step,
        nodes,
    }
}

#[derive(Clone, Debug)]
enum Kind {
    Gaussian { amplitude: f64, kappa: f64 },
    SphereExp { radius: f64 },
    MollifiedBessel { quad: Box<FourierQuadrature> },
}

/// A kernel with its cached constants (and quadrature tables for the
/// mollified Bessel case). Cheap to share across threads.
#[derive(Clone, Debug)]
pub struct KernelSpec {
    params: KernelParams,
    kind: Kind,
    l1: f64,
}

impl Serialize for KernelSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.params.serialize(s)
    }
}

impl<'de> Deserialize<'de> for KernelSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let params = KernelParams::deserialize(d)?;
        KernelSpec::new(params).map_err(serde::de::Error::custom)
    }
}

impl PartialEq for KernelSpec {
    fn eq(&self, other: &Self) -> bool {
        self.params == other.params
    }
}

impl KernelSpec {
    pub fn new(params: KernelParams) -> Result<Self> {
        let (kind, l1) = match params {
            KernelParams::Gaussian { dim, amplitude, kappa } => {
                if dim == 0 || !(amplitude > 0.0) || !(kappa > 0.0) {
                    return Err(invalid("kernel", "gaussian needs dim >= 1 and positive amplitude and kappa"));
                }
                (
                    Kind::Gaussian { amplitude, kappa },
                    amplitude * (PI / kappa).powf(dim as f64 / 2.0),
                )
            }
            KernelParams::SphereExp { dim, radius } => {
                if !(1..=2).contains(&dim) {
                    return Err(Error::Unsupported(format!("sphere kernel in dimension {dim}")));
                }
                if !(radius > 0.0) {
                    return Err(invalid("radius", "must be positive"));
                }
                (Kind::SphereExp { radius }, sphere_exp_l1(dim, radius))
            }
            KernelParams::MollifiedBessel {
                dim,
                epsilon,
                mass,
                power,
                quad_tol,
                im_budget,
            } => {
                let quad = FourierQuadrature::new(dim, epsilon, mass, power, quad_tol, im_budget)?;
                // Fourier transform at zero momentum.
                (Kind::MollifiedBessel { quad: Box::new(quad) }, mass.powf(-2.0 * power))
            }
        };
        Ok(KernelSpec { params, kind, l1 })
    }

    /// `exp{-(z-x).(z-x)}` on `R^dim`.
    pub fn gaussian(dim: usize) -> Result<Self> {
        Self::new(KernelParams::Gaussian {
            dim,
            amplitude: 1.0,
            kappa: 1.0,
        })
    }

    pub fn sphere_exp(dim: usize, radius: f64) -> Result<Self> {
        Self::new(KernelParams::SphereExp { dim, radius })
    }

    /// Mollified `G_{1/2}` with the default tolerance and imaginary budget.
    pub fn mollified_bessel(dim: usize, epsilon: f64, mass: f64) -> Result<Self> {
        Self::new(KernelParams::MollifiedBessel {
            dim,
            epsilon,
            mass,
            power: 0.5,
            quad_tol: DEFAULT_QUAD_TOL,
            im_budget: DEFAULT_IM_BUDGET,
        })
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    /// Manifold dimension `d`.
    pub fn dim(&self) -> usize {
        match self.params {
            KernelParams::Gaussian { dim, .. }
            | KernelParams::SphereExp { dim, .. }
            | KernelParams::MollifiedBessel { dim, .. } => dim,
        }
    }

    /// Number of coordinates per point (`d + 1` on spheres).
    pub fn ambient_dim(&self) -> usize {
        match self.kind {
            Kind::SphereExp { .. } => self.dim() + 1,
            _ => self.dim(),
        }
    }

    pub fn is_sphere(&self) -> bool {
        matches!(self.kind, Kind::SphereExp { .. })
    }

    pub fn quadrature(&self) -> Option<&FourierQuadrature> {
        match &self.kind {
            Kind::MollifiedBessel { quad } => Some(quad),
            _ => None,
        }
    }

    /// Absolute evaluation error of `G^c` (zero for closed forms).
    pub fn eval_tol(&self) -> f64 {
        self.quadrature().map_or(0.0, |q| q.tol)
    }

    /// Largest `|Im z_k|` accepted by `eval_complex`.
    pub fn im_budget(&self) -> f64 {
        self.quadrature().map_or(f64::INFINITY, |q| q.im_budget)
    }

    fn check_dims(&self, found: usize) -> Result<()> {
        if found != self.ambient_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.ambient_dim(),
                found,
            });
        }
        Ok(())
    }

    /// Checks a complex evaluation point against dimension and budget.
    pub fn check_point(&self, z: &ComplexPoint) -> Result<()> {
        self.check_dims(z.dim())?;
        let im = z.max_abs_im();
        if im > self.im_budget() {
            return Err(Error::ImaginaryBudget {
                im,
                budget: self.im_budget(),
            });
        }
        Ok(())
    }

    /// `G^c(z, x)`.
    pub fn eval_complex(&self, z: &ComplexPoint, x: &[f64]) -> Result<Complex64> {
        self.check_point(z)?;
        self.check_dims(x.len())?;
        Ok(self.eval_c(z.coords(), x))
    }

    /// Unchecked `G^c(z, x)`; the caller guarantees dimensions and budget.
    pub(crate) fn eval_c(&self, z: &[Complex64], x: &[f64]) -> Complex64 {
        match &self.kind {
            Kind::Gaussian { amplitude, kappa } => {
                let sq: Complex64 = z.iter().zip(x).map(|(zi, xi)| (zi - xi) * (zi - xi)).sum();
                (-sq * kappa).exp() * amplitude
            }
            Kind::SphereExp { .. } => {
                let dot: Complex64 = z.iter().zip(x).map(|(zi, xi)| zi * xi).sum();
                dot.exp()
            }
            Kind::MollifiedBessel { quad } => {
                let s: Vec<Complex64> = z.iter().zip(x).map(|(zi, xi)| zi - xi).collect();
                quad.eval_complex(&s)
            }
        }
    }

    /// `G(x, y)` for real points.
    pub fn eval_real(&self, x: &[f64], y: &[f64]) -> f64 {
        match &self.kind {
            Kind::Gaussian { amplitude, kappa } => {
                let r2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                amplitude * (-kappa * r2).exp()
            }
            Kind::SphereExp { .. } => crate::geometry::dot(x, y).exp(),
            Kind::MollifiedBessel { quad } => {
                let s: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
                quad.eval_real(&s)
            }
        }
    }

    /// `C = sup_x ||G(., x)||_{L^1}`.
    pub fn l1_constant(&self) -> f64 {
        self.l1
    }

    /// A radius `r` with `|G(x, y)| <= tol` whenever `|x - y| >= r`.
    pub fn decay_radius(&self, tol: f64) -> f64 {
        assert!(tol > 0.0, "decay_radius needs a positive tolerance");
        match &self.kind {
            Kind::Gaussian { amplitude, kappa } => {
                if tol >= *amplitude {
                    0.0
                } else {
                    ((amplitude / tol).ln() / kappa).sqrt()
                }
            }
            Kind::SphereExp { radius } => 2.0 * radius,
            Kind::MollifiedBessel { quad } => bessel_decay_radius(quad, tol),
        }
    }

    /// `sup_x |G^c(z, x)|` over all real `x`.
    pub fn sup_abs(&self, z: &ComplexPoint) -> f64 {
        match &self.kind {
            Kind::Gaussian { amplitude, kappa } => {
                let v2: f64 = z.coords().iter().map(|c| c.im * c.im).sum();
                amplitude * (kappa * v2).exp()
            }
            Kind::SphereExp { radius } => {
                let u: f64 = z.coords().iter().map(|c| c.re * c.re).sum::<f64>().sqrt();
                (u * radius).exp()
            }
            Kind::MollifiedBessel { quad } => quad.decay_const + quad.tol,
        }
    }

    /// Bound on `\int |G^c(z, x)| dx` over `{x : |Re z - x|_inf > r0}`. Zero
    /// for the sphere kernel, whose space has no exterior.
    pub fn tail_bound(&self, z: &ComplexPoint, r0: f64) -> f64 {
        let d = self.dim() as i32;
        let r0 = r0.max(0.0);
        match &self.kind {
            Kind::Gaussian { kappa, .. } => {
                let axis = (std::f64::consts::PI / kappa).sqrt();
                let one = axis * statrs::function::erf::erfc(kappa.sqrt() * r0);
                self.sup_abs(z) * d as f64 * one * axis.powi(d - 1)
            }
            Kind::SphereExp { .. } => 0.0,
            Kind::MollifiedBessel { quad } => {
                let (c, a) = (quad.decay_const, quad.decay_rate);
                let decay = (-a * r0).exp();
                let main = if d == 1 {
                    2.0 * c * decay / a
                } else {
                    8.0 * c * decay * (r0 / a + 1.0 / (a * a))
                };
                // Inside `real_cut` the evaluation error is at most `tol` per point.
                let cut_band = (2.0 * quad.real_cut).powi(d) * quad.tol;
                main + if r0 < quad.real_cut { cut_band } else { 0.0 }
            }
        }
    }

    /// `G_1(x, y) = \int G(x, z) G(z, y) dz` by numerical quadrature.
    pub fn self_convolve(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check_dims(x.len())?;
        self.check_dims(y.len())?;
        match &self.kind {
            Kind::Gaussian { amplitude, kappa } => {
                let mut prod = amplitude * amplitude;
                let half_width = (40.0 / kappa).sqrt();
                for (a, b) in x.iter().zip(y) {
                    let c = 0.5 * (a + b);
                    let lo = a.min(*b) - half_width;
                    let hi = a.max(*b) + half_width;
                    let f = |t: f64| (-kappa * ((a - t) * (a - t) + (t - b) * (t - b))).exp();
                    prod *= quad::adaptive(f, lo, c, 1e-15, 1e-13) + quad::adaptive(f, c, hi, 1e-15, 1e-13);
                }
                Ok(prod)
            }
            Kind::SphereExp { .. } => Err(Error::Unsupported("self-convolution on the sphere".into())),
            Kind::MollifiedBessel { .. } => Ok(self.self_convolution_kernel()?.eval_real(x, y)),
        }
    }

    /// The kernel `G_1 = G * G` itself, in closed form where possible.
    pub fn self_convolution_kernel(&self) -> Result<KernelSpec> {
        match self.params {
            KernelParams::Gaussian { dim, amplitude, kappa } => KernelSpec::new(KernelParams::Gaussian {
                dim,
                amplitude: amplitude * amplitude * (PI / (2.0 * kappa)).powf(dim as f64 / 2.0),
                kappa: kappa / 2.0,
            }),
            KernelParams::SphereExp { .. } => Err(Error::Unsupported("self-convolution on the sphere".into())),
            KernelParams::MollifiedBessel {
                dim,
                epsilon,
                mass,
                power,
                quad_tol,
                im_budget,
            } => KernelSpec::new(KernelParams::MollifiedBessel {
                dim,
                epsilon: 2.0 * epsilon,
                mass,
                power: 2.0 * power,
                quad_tol,
                im_budget,
            }),
        }
    }
}

fn sphere_exp_l1(dim: usize, radius: f64) -> f64 {
    let r2 = radius * radius;
    match dim {
        // Arc length R dtheta; integrand exp(R^2 cos theta).
        1 => radius * quad::adaptive(|t| (r2 * t.cos()).exp(), 0.0, 2.0 * PI, 1e-14, 1e-14),
        // Area R^2 sin(theta) dtheta dphi.
        _ => 2.0 * PI * r2 * quad::adaptive(|t| (r2 * t.cos()).exp() * t.sin(), 0.0, PI, 1e-14, 1e-14),
    }
}

fn bessel_decay_radius(quad: &FourierQuadrature, tol: f64) -> f64 {
    let at = |r: f64| {
        let mut s = vec![0.0; quad.dim];
        s[0] = r;
        quad.eval_real(&s).abs()
    };
    if tol <= 2.0 * quad.tol {
        // Certified bound for real arguments.
        return ((quad.decay_const / tol).ln() / quad.decay_rate).clamp(0.0, quad.real_cut);
    }
    // The kernel is radially decreasing, so the first crossing is the radius.
    let step = 0.05;
    let mut r = 0.0;
    while r < quad.real_cut && at(r) + quad.tol > tol {
        r += step;
    }
    if r == 0.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (r - step, r.min(quad.real_cut));
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        if at(mid) + quad.tol > tol {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn gaussian_examples() {
        let g = KernelSpec::gaussian(1).unwrap();
        assert_eq!(g.eval_complex(&ComplexPoint::from_real(&[0.3]), &[0.3]).unwrap(), c(1.0, 0.0));
        let v = g.eval_complex(&ComplexPoint(vec![c(0.0, 1.0)]), &[0.0]).unwrap();
        assert!((v - c(std::f64::consts::E, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn gaussian_constants() {
        assert!((KernelSpec::gaussian(1).unwrap().l1_constant() - PI.sqrt()).abs() < 1e-15);
        assert!((KernelSpec::gaussian(2).unwrap().l1_constant() - PI).abs() < 1e-15);
        let g = KernelSpec::gaussian(1).unwrap();
        assert!((g.decay_radius((-16.0f64).exp()) - 4.0).abs() < 1e-12);
        assert_eq!(g.decay_radius(1.0), 0.0);
    }

    #[test]
    fn gaussian_self_convolution() {
        let g = KernelSpec::gaussian(1).unwrap();
        let v = g.self_convolve(&[0.2], &[0.2]).unwrap();
        assert!((v - (PI / 2.0).sqrt()).abs() < 1e-10);
        let v = g.self_convolve(&[0.0], &[1.0]).unwrap();
        let exact = (PI / 2.0).sqrt() * (-0.5f64).exp();
        assert!((v / exact - 1.0).abs() < 1e-8);
        let g1 = g.self_convolution_kernel().unwrap();
        assert!((g1.eval_real(&[0.0], &[1.0]) / exact - 1.0).abs() < 1e-14);
    }

    #[test]
    fn bessel_quadrature_size_is_moderate() {
        let k = KernelSpec::mollified_bessel(1, 0.5, 1.0).unwrap();
        let q = k.quadrature().unwrap();
        assert!(q.nodes > 50 && q.nodes < 600, "nodes {}", q.nodes);
        assert!(q.real_cut.is_finite());
    }

    #[test]
    fn bessel_l1_is_inverse_mass() {
        let k = KernelSpec::mollified_bessel(1, 0.5, 2.0).unwrap();
        assert!((k.l1_constant() - 0.5).abs() < 1e-15);
        // The trapezoid sum of G over a fine real grid agrees.
        let h = 0.01;
        let r = k.decay_radius(1e-7);
        let n = (r / h).ceil() as i64;
        let s: f64 = (-n..=n).map(|j| h * k.eval_real(&[j as f64 * h], &[0.0])).sum();
        assert!((s - 0.5).abs() < 1e-6, "{s}");
    }

    #[test]
    fn bessel_budget_is_enforced() {
        let k = KernelSpec::mollified_bessel(1, 0.5, 1.0).unwrap();
        let err = k.eval_complex(&ComplexPoint(vec![c(0.0, 3.5)]), &[0.0]).unwrap_err();
        assert!(matches!(err, Error::ImaginaryBudget { .. }));
    }

    #[test]
    fn bessel_decay_radius_is_honest() {
        let k = KernelSpec::mollified_bessel(1, 0.5, 1.0).unwrap();
        let r = k.decay_radius(1e-6);
        assert!(r > 1.0);
        for t in [r, r + 0.3, r + 2.0] {
            assert!(k.eval_real(&[t], &[0.0]).abs() <= 1e-6);
        }
    }

    #[test]
    fn bessel_is_real_on_real_points() {
        let k = KernelSpec::mollified_bessel(2, 0.5, 1.0).unwrap();
        let v = k.eval_complex(&ComplexPoint::from_real(&[0.3, -0.4]), &[0.0, 0.0]).unwrap();
        assert!(v.im.abs() <= 1e-8);
        assert!((v.re - k.eval_real(&[0.3, -0.4], &[0.0, 0.0])).abs() < 1e-13);
    }

    #[test]
    fn sphere_kernel_l1_matches_closed_form() {
        let k = KernelSpec::sphere_exp(2, 1.3).unwrap();
        let exact = 4.0 * PI * (1.3f64 * 1.3).sinh();
        assert!((k.l1_constant() / exact - 1.0).abs() < 1e-12);
        assert_eq!(k.decay_radius(1e-3), 2.6);
    }

    #[test]
    fn params_roundtrip_through_toml_style_json() {
        let k: KernelSpec = serde_json::from_str(r#"{"kernel":"mollified_bessel","dim":1,"epsilon":0.5,"mass":1.0}"#).unwrap();
        match k.params() {
            KernelParams::MollifiedBessel { quad_tol, im_budget, .. } => {
                assert_eq!(*quad_tol, 1e-8);
                assert_eq!(*im_budget, 3.0);
            }
            _ => panic!("wrong variant"),
        }
        assert!(serde_json::from_str::<KernelSpec>(r#"{"kernel":"gaussian","dim":0}"#).is_err());
    }
}
