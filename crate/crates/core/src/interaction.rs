//! The potential `U(eta) = \int v(G * eta) d lambda` on a quadrature grid,
//! its increments, Papangelou intensities and the stability constants.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::configurations::Configuration;
use crate::error::{invalid, Error, Result};
use crate::geometry::Window;
use crate::kernels::KernelSpec;
use crate::quad::{gauss_legendre, NeumaierSum};

/// Kernel mass below this level is dropped when padding the field window
/// and when building per-point kernel columns.
pub const FIELD_CUT_TOL: f64 = 1e-8;

/// The concave profile `v` with `v(0) = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "potential", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    /// `v(phi) = 1 - e^{-phi}`.
    WidomRowlinson,
    /// `v(phi) = phi`.
    Linear,
    /// `v(phi) = omega(beta phi) / beta` with `omega(h) = sum_i w_i (1 - e^{-s_i h})`;
    /// `charges` lists the pairs `[s_i, w_i]`.
    ChargeMix { charges: Vec<[f64; 2]> },
}

impl Profile {
    fn validate(&self) -> Result<()> {
        if let Profile::ChargeMix { charges } = self {
            if charges.is_empty() {
                return Err(invalid("charges", "charge distribution must have at least one atom"));
            }
            for &[s, w] in charges {
                if !(s > 0.0 && s.is_finite() && w > 0.0 && w.is_finite()) {
                    return Err(invalid("charges", format!("need positive finite [s, w], got [{s}, {w}]")));
                }
            }
        }
        Ok(())
    }

    /// Linear bound `b` with `|v(phi)| <= b phi`.
    pub fn linear_bound(&self) -> f64 {
        match self {
            Profile::WidomRowlinson | Profile::Linear => 1.0,
            Profile::ChargeMix { charges } => charges.iter().map(|[s, w]| s * w).sum(),
        }
    }

    pub fn value(&self, beta: f64, phi: f64) -> f64 {
        self.increment(beta, 0.0, phi)
    }

    /// `v(base + delta) - v(base)`, evaluated without cancellation.
    #[inline]
    pub fn increment(&self, beta: f64, base: f64, delta: f64) -> f64 {
        match self {
            Profile::WidomRowlinson => (-base).exp() * -(-delta).exp_m1(),
            Profile::Linear => delta,
            Profile::ChargeMix { charges } => {
                if beta == 0.0 {
                    return charges.iter().map(|[s, w]| s * w).sum::<f64>() * delta;
                }
                charges
                    .iter()
                    .map(|[s, w]| w * (-beta * s * base).exp() * -(-beta * s * delta).exp_m1())
                    .sum::<f64>()
                    / beta
            }
        }
    }
}

/// Quadrature nodes and weights over the field-integration window.
#[derive(Clone, Debug)]
pub struct QuadratureGrid {
    window: Window,
    dim: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    spacing: f64,
    /// Per-axis midpoint coordinates for box grids (row-major, last axis fastest).
    axes: Option<Vec<Vec<f64>>>,
}

impl QuadratureGrid {
    /// Midpoint rule on a box or, on a sphere, a product rule in angles,
    /// with spacing at most `h`.
    pub fn new(window: &Window, h: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(invalid("grid_h", format!("must be positive, got {h}")));
        }
        match window {
            Window::Box { lo, hi } => {
                let axes: Vec<Vec<f64>> = lo
                    .iter()
                    .zip(hi)
                    .map(|(a, b)| {
                        let n = ((b - a) / h).ceil().max(1.0) as usize;
                        let step = (b - a) / n as f64;
                        (0..n).map(|i| a + (i as f64 + 0.5) * step).collect()
                    })
                    .collect();
                let cell: f64 = lo.iter().zip(hi).zip(&axes).map(|((a, b), ax)| (b - a) / ax.len() as f64).product();
                let total: usize = axes.iter().map(Vec::len).product();
                let dim = lo.len();
                let mut nodes = Vec::with_capacity(total * dim);
                let mut idx = vec![0usize; dim];
                for _ in 0..total {
                    for k in 0..dim {
                        nodes.push(axes[k][idx[k]]);
                    }
                    for k in (0..dim).rev() {
                        idx[k] += 1;
                        if idx[k] < axes[k].len() {
                            break;
                        }
                        idx[k] = 0;
                    }
                }
                let spacing = lo.iter().zip(hi).zip(&axes).map(|((a, b), ax)| (b - a) / ax.len() as f64).fold(0.0, f64::max);
                Ok(QuadratureGrid {
                    window: window.clone(),
                    dim,
                    nodes,
                    weights: vec![cell; total],
                    spacing,
                    axes: Some(axes),
                })
            }
            &Window::Sphere { dim, radius } => {
                let mut nodes = Vec::new();
                let mut weights = Vec::new();
                let two_pi = 2.0 * std::f64::consts::PI;
                match dim {
                    1 => {
                        let n = (two_pi * radius / h).ceil() as usize;
                        for j in 0..n {
                            let t = two_pi * (j as f64 + 0.5) / n as f64;
                            nodes.extend_from_slice(&[radius * t.cos(), radius * t.sin()]);
                            weights.push(two_pi * radius / n as f64);
                        }
                    }
                    2 => {
                        let n_phi = (two_pi * radius / h).ceil() as usize;
                        let n_theta = n_phi.div_ceil(2).max(2);
                        let (u, w) = gauss_legendre(n_theta);
                        for (ct, wt) in u.iter().zip(&w) {
                            let st = (1.0 - ct * ct).sqrt();
                            for j in 0..n_phi {
                                let p = two_pi * (j as f64 + 0.5) / n_phi as f64;
                                nodes.extend_from_slice(&[radius * st * p.cos(), radius * st * p.sin(), radius * ct]);
                                weights.push(radius * radius * wt * two_pi / n_phi as f64);
                            }
                        }
                    }
                    _ => return Err(Error::Unsupported(format!("sphere grids in dimension {dim}"))),
                }
                Ok(QuadratureGrid {
                    window: window.clone(),
                    dim: dim + 1,
                    nodes,
                    weights,
                    spacing: h,
                    axes: None,
                })
            }
        }
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_weight(&self) -> f64 {
        let mut s = NeumaierSum::new();
        for &w in &self.weights {
            s.add(w);
        }
        s.value()
    }
}

/// Kernel values `G(node, x)` on the grid nodes near `x`.
#[derive(Clone, Debug, Default)]
pub struct Column {
    pub indices: Vec<u32>,
    pub values: Vec<f64>,
}

/// Serializable potential description (the `[potential]` config section).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialParams {
    #[serde(flatten)]
    pub profile: Profile,
    pub beta: f64,
    /// Grid spacing; defaults to 0.05 in d = 1 and 0.1 otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_h: Option<f64>,
}

pub fn default_grid_h(dim: usize) -> f64 {
    if dim == 1 {
        0.05
    } else {
        0.2
    }
}

/// The discretized interaction on a sampling window.
#[derive(Clone, Debug)]
pub struct PotentialSpec {
    profile: Profile,
    beta: f64,
    kernel: KernelSpec,
    window: Window,
    grid: QuadratureGrid,
    /// Half-width of the box of nodes kept in a kernel column.
    cut: f64,
}

impl PotentialSpec {
    /// Builds the grid over `window` padded by the kernel's decay radius.
    pub fn new(profile: Profile, beta: f64, kernel: KernelSpec, window: Window, grid_h: Option<f64>) -> Result<Self> {
        profile.validate()?;
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(invalid("beta", format!("must be finite and non-negative, got {beta}")));
        }
        if kernel.ambient_dim() != window.ambient_dim() || kernel.is_sphere() != window.is_sphere() {
            return Err(Error::DimensionMismatch {
                expected: window.ambient_dim(),
                found: kernel.ambient_dim(),
            });
        }
        let cut = kernel.decay_radius(FIELD_CUT_TOL);
        let field_window = if window.is_sphere() { window.clone() } else { window.padded(cut) };
        let h = grid_h.unwrap_or_else(|| default_grid_h(window.dim()));
        let grid = QuadratureGrid::new(&field_window, h)?;
        Ok(PotentialSpec {
            profile,
            beta,
            kernel,
            window,
            grid,
            cut,
        })
    }

    pub fn params(&self) -> PotentialParams {
        PotentialParams {
            profile: self.profile.clone(),
            beta: self.beta,
            grid_h: Some(self.grid.spacing),
        }
    }

    pub fn profile(&self) -> &Profile {
        &self.profile
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    /// The sampling window `Lambda`.
    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn grid(&self) -> &QuadratureGrid {
        &self.grid
    }

    /// A copy with a different inverse temperature (same grid).
    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(invalid("beta", format!("must be finite and non-negative, got {beta}")));
        }
        let mut out = self.clone();
        out.beta = beta;
        Ok(out)
    }

    /// `b`.
    pub fn linear_bound(&self) -> f64 {
        self.profile.linear_bound()
    }

    /// `B = b C`.
    pub fn stability_bound(&self) -> f64 {
        self.linear_bound() * self.kernel.l1_constant()
    }

    /// `xi = e^{beta B}`.
    pub fn xi(&self) -> f64 {
        (self.beta * self.stability_bound()).exp()
    }

    /// `rho = e^{beta B}`, the dominating Poisson intensity.
    pub fn rho(&self) -> f64 {
        self.xi()
    }

    /// A sharper stability constant: every profile is non-negative on
    /// `phi >= 0`, so `f <= 1` up to the kernel's evaluation error.
    pub fn sharp_xi(&self) -> f64 {
        let neg = self.kernel.eval_tol() * self.grid.total_weight();
        (self.beta * self.linear_bound() * neg).exp()
    }

    /// Midpoint-rule error of `\int G(., x)` at the window centre.
    pub fn grid_error(&self) -> f64 {
        let x = self.window.center();
        let col = self.column(&x);
        let mut s = NeumaierSum::new();
        for (&i, &g) in col.indices.iter().zip(&col.values) {
            s.add(self.grid.weights[i as usize] * g);
        }
        (s.value() - self.kernel.l1_constant()).abs()
    }

    /// Kernel column `G(node, x)` over the nodes within `cut` of `x` in max norm.
    pub fn column(&self, x: &[f64]) -> Column {
        let mut col = Column::default();
        self.column_into(x, &mut col);
        col
    }

    pub(crate) fn column_into(&self, x: &[f64], col: &mut Column) {
        col.indices.clear();
        col.values.clear();
        let Some(axes) = &self.grid.axes else {
            for i in 0..self.grid.len() {
                col.indices.push(i as u32);
                col.values.push(self.kernel.eval_real(self.grid.node(i), x));
            }
            return;
        };
        let ranges: Vec<(usize, usize)> = axes
            .iter()
            .zip(x)
            .map(|(ax, &xk)| (ax.partition_point(|&t| t < xk - self.cut), ax.partition_point(|&t| t <= xk + self.cut)))
            .collect();
        if ranges.iter().any(|(a, b)| a >= b) {
            return;
        }
        let strides: Vec<usize> = (0..axes.len()).map(|k| axes[k + 1..].iter().map(Vec::len).product()).collect();
        let factors = self.kernel_factors(axes, &ranges, x);
        if let Some(f) = &factors {
            // Separable: expand axis by axis, dropping entries below the cut
            // tolerance (later factors are at most 1).
            col.indices.push(0);
            col.values.push(1.0);
            let mut idx = Vec::new();
            let mut val = Vec::new();
            for ((fk, r), &stride) in f.iter().zip(&ranges).zip(&strides) {
                idx.clear();
                val.clear();
                for (&i0, &v0) in col.indices.iter().zip(&col.values) {
                    for (j, &g) in fk.iter().enumerate() {
                        let v = v0 * g;
                        if v >= FIELD_CUT_TOL {
                            idx.push(i0 + ((r.0 + j) * stride) as u32);
                            val.push(v);
                        }
                    }
                }
                std::mem::swap(&mut col.indices, &mut idx);
                std::mem::swap(&mut col.values, &mut val);
            }
            return;
        }
        let dim = axes.len();
        let mut idx: Vec<usize> = ranges.iter().map(|r| r.0).collect();
        let mut node = vec![0.0; dim];
        loop {
            let flat: usize = idx.iter().zip(&strides).map(|(i, s)| i * s).sum();
            col.indices.push(flat as u32);
            for k in 0..dim {
                node[k] = axes[k][idx[k]];
            }
            let value = self.kernel.eval_real(&node, x);
            col.values.push(value);
            let mut k = dim;
            loop {
                if k == 0 {
                    return;
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < ranges[k].1 {
                    break;
                }
                idx[k] = ranges[k].0;
            }
        }
    }

    /// Per-axis factors for separable (Gaussian) kernels.
    fn kernel_factors(&self, axes: &[Vec<f64>], ranges: &[(usize, usize)], x: &[f64]) -> Option<Vec<Vec<f64>>> {
        match *self.kernel.params() {
            crate::kernels::KernelParams::Gaussian { amplitude, kappa, .. } => {
                let mut out: Vec<Vec<f64>> = axes
                    .iter()
                    .zip(ranges)
                    .zip(x)
                    .map(|((ax, r), &xk)| ax[r.0..r.1].iter().map(|t| (-kappa * (t - xk) * (t - xk)).exp()).collect())
                    .collect();
                for v in out[0].iter_mut() {
                    *v *= amplitude;
                }
                Some(out)
            }
            _ => None,
        }
    }

    /// `Phi = G * eta` on every grid node.
    pub fn field_on_grid(&self, eta: &Configuration) -> Vec<f64> {
        let mut phi = vec![0.0; self.grid.len()];
        let mut col = Column::default();
        for (x, s) in eta.weighted_points() {
            self.column_into(x, &mut col);
            for (&i, &g) in col.indices.iter().zip(&col.values) {
                phi[i as usize] += s * g;
            }
        }
        phi
    }

    /// `sum_nodes w v(Phi)`.
    pub fn energy_from_field(&self, phi: &[f64]) -> f64 {
        let mut s = NeumaierSum::new();
        for (w, &p) in self.grid.weights.iter().zip(phi) {
            s.add(w * self.profile.value(self.beta, p));
        }
        s.value()
    }

    /// `U(eta)`.
    pub fn potential(&self, eta: &Configuration) -> f64 {
        self.energy_from_field(&self.field_on_grid(eta))
    }

    /// `U(eta + s delta_x) - U(eta)` given the cached field of `eta` and the column of `x`.
    pub fn energy_diff_from(&self, phi: &[f64], col: &Column, charge: f64) -> f64 {
        let mut s = NeumaierSum::new();
        for (&i, &g) in col.indices.iter().zip(&col.values) {
            let i = i as usize;
            s.add(self.grid.weights[i] * self.profile.increment(self.beta, phi[i], charge * g));
        }
        s.value()
    }

    /// `U(eta) - U(eta - s delta_x)` where `phi` is the field of `eta` and
    /// `col` the column of the point being removed.
    pub fn removal_diff(&self, phi: &[f64], col: &Column, charge: f64) -> f64 {
        let mut s = NeumaierSum::new();
        for (&i, &g) in col.indices.iter().zip(&col.values) {
            let i = i as usize;
            let delta = charge * g;
            s.add(self.grid.weights[i] * self.profile.increment(self.beta, phi[i] - delta, delta));
        }
        s.value()
    }

    /// `W(x, eta) + U(delta_x)`.
    pub fn energy_diff(&self, x: &[f64], eta: &Configuration) -> f64 {
        let phi = self.field_on_grid(eta);
        self.energy_diff_from(&phi, &self.column(x), 1.0)
    }

    /// `p(x, eta) = exp{-beta (W(x, eta) + U(delta_x))}`.
    pub fn papangelou(&self, x: &[f64], eta: &Configuration) -> f64 {
        if self.beta == 0.0 {
            return 1.0;
        }
        (-self.beta * self.energy_diff(x, eta)).exp()
    }

    /// Randomized check of stability, the Papangelou bound and
    /// ferromagneticity. Configurations have up to `max_points` points.
    pub fn verify_conditions<R: Rng + ?Sized>(&self, trials: usize, max_points: usize, tol: f64, rng: &mut R) -> Result<ConditionsReport> {
        if trials == 0 {
            return Err(invalid("trials", "must be at least 1"));
        }
        let big_b = self.stability_bound();
        let rho = self.rho();
        let mut report = ConditionsReport {
            trials,
            tolerance: tol,
            b: self.linear_bound(),
            big_b,
            xi: self.xi(),
            rho,
            stability_violations: 0,
            papangelou_violations: 0,
            ferromagnetic_violations: 0,
            stability_margin: f64::INFINITY,
            papangelou_margin: f64::INFINITY,
            ferromagnetic_margin: f64::INFINITY,
            passed: true,
            failed_conditions: Vec::new(),
        };
        let random_config = |rng: &mut R, n: usize| {
            let mut c = Configuration::empty(self.window.ambient_dim());
            for _ in 0..n {
                c.push(&self.window.sample_uniform(rng)).expect("window dimension");
            }
            c
        };
        for _ in 0..trials {
            let n = rng.random_range(0..=max_points);
            let eta = random_config(rng, n);
            let phi_eta = self.field_on_grid(&eta);
            let u = self.energy_from_field(&phi_eta);
            let margin = big_b * n as f64 - u.abs();
            report.stability_margin = report.stability_margin.min(margin);
            if margin < -tol {
                report.stability_violations += 1;
            }

            let x = self.window.sample_uniform(rng);
            let col = self.column(&x);
            let p_eta = (-self.beta * self.energy_diff_from(&phi_eta, &col, 1.0)).exp();
            let margin = rho - p_eta;
            report.papangelou_margin = report.papangelou_margin.min(margin);
            if margin < -tol {
                report.papangelou_violations += 1;
            }

            let extra = rng.random_range(1..=max_points.max(1));
            let gamma = eta.union(&random_config(rng, extra))?;
            let p_gamma = (-self.beta * self.energy_diff_from(&self.field_on_grid(&gamma), &col, 1.0)).exp();
            let margin = p_gamma - p_eta;
            report.ferromagnetic_margin = report.ferromagnetic_margin.min(margin);
            if margin < -tol {
                report.ferromagnetic_violations += 1;
            }
        }
        if report.stability_violations > 0 {
            report.failed_conditions.push("stability".into());
        }
        if report.papangelou_violations > 0 {
            report.failed_conditions.push("papangelou bound".into());
        }
        if report.ferromagnetic_violations > 0 {
            report.failed_conditions.push("ferromagneticity".into());
        }
        report.passed = report.failed_conditions.is_empty();
        Ok(report)
    }
}

/// Outcome of `verify_conditions`. Margins are the smallest slack observed
/// (negative means the inequality failed by that much).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConditionsReport {
    pub trials: usize,
    pub tolerance: f64,
    pub b: f64,
    pub big_b: f64,
    pub xi: f64,
    pub rho: f64,
    pub stability_violations: usize,
    pub papangelou_violations: usize,
    pub ferromagnetic_violations: usize,
    pub stability_margin: f64,
    pub papangelou_margin: f64,
    pub ferromagnetic_margin: f64,
    pub passed: bool,
    pub failed_conditions: Vec<String>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::adaptive;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn wr_line(beta: f64) -> PotentialSpec {
        let w = Window::cube(1, -8.0, 8.0).unwrap();
        PotentialSpec::new(Profile::WidomRowlinson, beta, KernelSpec::gaussian(1).unwrap(), w, None).unwrap()
    }

    fn one_point(x: f64) -> Configuration {
        Configuration::from_points(1, &[vec![x]]).unwrap()
    }

    #[test]
    fn empty_configuration_has_zero_energy() {
        assert_eq!(wr_line(1.0).potential(&Configuration::empty(1)), 0.0);
    }

    #[test]
    fn linear_single_point_energy_is_kernel_mass() {
        let w = Window::cube(1, -8.0, 8.0).unwrap();
        let p = PotentialSpec::new(Profile::Linear, 1.0, KernelSpec::gaussian(1).unwrap(), w, None).unwrap();
        assert!((p.potential(&one_point(0.0)) - PI.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn wr_single_point_energy_matches_adaptive_quadrature() {
        let exact = adaptive(|x| -(-(-x * x).exp()).exp_m1(), -12.0, 12.0, 1e-14, 1e-14);
        let u = wr_line(1.0).potential(&one_point(0.0));
        assert!((u / exact - 1.0).abs() < 1e-6, "{u} vs {exact}");
    }

    #[test]
    fn energy_diff_on_empty_is_single_point_potential() {
        let p = wr_line(1.0);
        assert_eq!(p.energy_diff(&[0.3], &Configuration::empty(1)), p.potential(&one_point(0.3)));
    }

    #[test]
    fn grid_weights_sum_to_volume() {
        for w in [Window::cube(2, -1.0, 2.3).unwrap(), Window::sphere(1, 1.5).unwrap(), Window::sphere(2, 0.8).unwrap()] {
            let g = QuadratureGrid::new(&w, 0.1).unwrap();
            assert!((g.total_weight() / w.volume() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn charge_mix_with_unit_charge_is_widom_rowlinson() {
        let mix = Profile::ChargeMix { charges: vec![[1.0, 1.0]] };
        for (base, delta) in [(0.0, 0.3), (1.2, 2.0), (5.0, 1e-3)] {
            assert_eq!(mix.increment(1.0, base, delta), Profile::WidomRowlinson.increment(1.0, base, delta));
        }
    }

    #[test]
    fn charge_mix_beta_zero_limit_is_linear() {
        let mix = Profile::ChargeMix {
            charges: vec![[0.5, 1.0 / 3.0], [1.0, 1.0 / 3.0], [2.0, 1.0 / 3.0]],
        };
        let small = mix.increment(1e-9, 0.4, 0.7);
        let zero = mix.increment(0.0, 0.4, 0.7);
        assert!((small - zero).abs() < 1e-8);
        assert!((mix.linear_bound() - 3.5 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn papangelou_examples() {
        let p = wr_line(0.0);
        assert_eq!(p.papangelou(&[0.1], &one_point(1.0)), 1.0);
        let p = wr_line(1.0);
        let u = p.potential(&one_point(0.5));
        assert!((p.papangelou(&[0.5], &Configuration::empty(1)) - (-u).exp()).abs() < 1e-15);
        assert!((p.rho() - PI.sqrt().exp()).abs() < 1e-12);
    }

    #[test]
    fn conditions_hold_for_widom_rowlinson() {
        let w = Window::cube(1, 0.0, 3.0).unwrap();
        let p = PotentialSpec::new(Profile::WidomRowlinson, 1.0, KernelSpec::gaussian(1).unwrap(), w, None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let r = p.verify_conditions(200, 8, 1e-6, &mut rng).unwrap();
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn column_matches_direct_evaluation() {
        let w = Window::cube(2, 0.0, 2.0).unwrap();
        let p = PotentialSpec::new(Profile::Linear, 1.0, KernelSpec::gaussian(2).unwrap(), w, Some(0.2)).unwrap();
        let x = [0.7, 1.1];
        let col = p.column(&x);
        for (&i, &g) in col.indices.iter().zip(&col.values) {
            let direct = p.kernel().eval_real(p.grid().node(i as usize), &x);
            assert!((g - direct).abs() < 1e-15);
        }
        assert!(p.grid_error() < 1e-6);
    }
}
