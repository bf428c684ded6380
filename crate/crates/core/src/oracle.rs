//! Exact small-window expectations by truncated Poisson series,
//!
//! ```text
//! E[F] = sum_n (1/n!) \int F f d sigma^n / sum_n (1/n!) \int f d sigma^n,
//! ```
//!
//! with each `n`-fold integral done by a symmetric tensor Gauss–Legendre rule
//! (one term per multiset of nodes) and the truncation controlled by the
//! stability bound `f <= xi^{#eta}`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::configurations::{Configuration, TestFunction};
use crate::error::{invalid, Error, Result};
use crate::geometry::{ComplexPoint, Window};
use crate::interaction::{Column, PotentialSpec, Profile, QuadratureGrid};
use crate::kernels::KernelSpec;
use crate::quad::{composite_gauss_legendre, NeumaierSum};

/// `|F(eta)| <= kappa * base^n * n^power` for `n = #eta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Growth {
    pub kappa: f64,
    pub base: f64,
    pub power: u32,
}

/// Functionals of a configuration that are evaluated identically by the
/// oracle and by the Monte Carlo estimators. Each is a function of
/// additive per-point features.
#[derive(Clone, Debug)]
pub enum Observable {
    /// `N_A` (`None` counts every point).
    Count { region: Option<Window> },
    /// `N_A N_B`.
    CountProduct { a: Window, b: Window },
    /// `e^{-<eta, h>}`.
    Laplace { h: TestFunction },
    /// `<eta, h>`.
    Pairing { h: TestFunction },
    /// `prod_j [conj] phi^c(z_j)`, stored in canonical order.
    FieldProduct {
        kernel: KernelSpec,
        points: Vec<ComplexPoint>,
        conj: Vec<bool>,
    },
}

impl Observable {
    pub fn count(region: Option<Window>) -> Self {
        Observable::Count { region }
    }

    pub fn laplace(h: TestFunction) -> Self {
        Observable::Laplace { h }
    }

    /// The moment functional, with `(conj, point)` pairs sorted so that the
    /// product is formed in the same order for every permutation.
    pub fn field_product(kernel: &KernelSpec, points: &[ComplexPoint], conj: &[bool]) -> Result<Self> {
        if points.len() != conj.len() {
            return Err(invalid("conj", "need one conjugation flag per point"));
        }
        for z in points {
            kernel.check_point(z)?;
        }
        let mut pairs: Vec<(bool, ComplexPoint)> = conj.iter().copied().zip(points.iter().cloned()).collect();
        pairs.sort_by(|a, b| {
            a.0.cmp(&b.0).then_with(|| {
                for (x, y) in a.1.coords().iter().zip(b.1.coords()) {
                    let o = x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im));
                    if o.is_ne() {
                        return o;
                    }
                }
                std::cmp::Ordering::Equal
            })
        });
        Ok(Observable::FieldProduct {
            kernel: kernel.clone(),
            conj: pairs.iter().map(|p| p.0).collect(),
            points: pairs.into_iter().map(|p| p.1).collect(),
        })
    }

    pub fn n_features(&self) -> usize {
        match self {
            Observable::Count { .. } | Observable::Laplace { .. } | Observable::Pairing { .. } => 1,
            Observable::CountProduct { .. } => 2,
            Observable::FieldProduct { points, .. } => points.len(),
        }
    }

    /// Per-point features, appended to `out`.
    pub fn features(&self, x: &[f64], charge: f64, out: &mut Vec<Complex64>) {
        let indicator = |w: &Window| if w.contains(x) { 1.0 } else { 0.0 };
        match self {
            Observable::Count { region } => out.push(region.as_ref().map_or(1.0, indicator).into()),
            Observable::CountProduct { a, b } => {
                out.push(indicator(a).into());
                out.push(indicator(b).into());
            }
            Observable::Laplace { h } | Observable::Pairing { h } => out.push((charge * h.eval(x)).into()),
            Observable::FieldProduct { kernel, points, .. } => {
                for z in points {
                    out.push(kernel.eval_c(z.coords(), x) * charge);
                }
            }
        }
    }

    /// The functional from summed features.
    pub fn finish(&self, f: &[Complex64]) -> Complex64 {
        match self {
            Observable::Count { .. } | Observable::Pairing { .. } => f[0],
            Observable::CountProduct { .. } => f[0] * f[1],
            Observable::Laplace { .. } => Complex64::new((-f[0].re).exp(), 0.0),
            Observable::FieldProduct { conj, .. } => {
                let mut p = Complex64::new(1.0, 0.0);
                for (v, &c) in f.iter().zip(conj) {
                    p *= if c { v.conj() } else { *v };
                }
                p
            }
        }
    }

    pub fn eval(&self, eta: &Configuration) -> Complex64 {
        let mut acc = vec![Complex64::new(0.0, 0.0); self.n_features()];
        let mut buf = Vec::with_capacity(acc.len());
        for (x, s) in eta.weighted_points() {
            buf.clear();
            self.features(x, s, &mut buf);
            for (a, b) in acc.iter_mut().zip(&buf) {
                *a += b;
            }
        }
        self.finish(&acc)
    }

    pub fn growth(&self) -> Growth {
        match self {
            Observable::Count { .. } => Growth { kappa: 1.0, base: 1.0, power: 1 },
            Observable::CountProduct { .. } => Growth { kappa: 1.0, base: 1.0, power: 2 },
            Observable::Laplace { .. } => Growth { kappa: 1.0, base: 1.0, power: 0 },
            Observable::Pairing { h } => Growth {
                kappa: h_max(h),
                base: 1.0,
                power: 1,
            },
            Observable::FieldProduct { kernel, points, .. } => Growth {
                kappa: points.iter().map(|z| kernel.sup_abs(z)).product(),
                base: 1.0,
                power: points.len() as u32,
            },
        }
    }

    /// Coordinates per axis where the functional is not smooth.
    fn breakpoints(&self, dim: usize) -> Vec<Vec<f64>> {
        let mut out = vec![Vec::new(); dim];
        let mut add = |w: &Window| {
            if let Some((lo, hi)) = w.bounds() {
                for k in 0..dim.min(lo.len()) {
                    out[k].push(lo[k]);
                    out[k].push(hi[k]);
                }
            }
        };
        match self {
            Observable::Count { region: Some(w) } => add(w),
            Observable::CountProduct { a, b } => {
                add(a);
                add(b);
            }
            Observable::Laplace { h } | Observable::Pairing { h } => {
                if let Some(w) = h.support() {
                    add(&w);
                }
            }
            _ => {}
        }
        out
    }
}

fn h_max(h: &TestFunction) -> f64 {
    match h {
        TestFunction::Zero { .. } => 0.0,
        TestFunction::CosineBump { height, .. } | TestFunction::GaussianBump { height, .. } => *height,
    }
}

fn default_nmax() -> usize {
    12
}
fn default_quad_nodes() -> usize {
    32
}
fn default_tail_tol() -> f64 {
    1e-8
}
fn default_max_leaves() -> u64 {
    60_000
}
fn default_true() -> bool {
    true
}

/// Truncation and quadrature settings (the `[oracle]` config section).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesParams {
    #[serde(default = "default_nmax")]
    pub nmax: usize,
    /// Gauss–Legendre nodes per axis for the low-order terms.
    #[serde(default = "default_quad_nodes")]
    pub quad_nodes: usize,
    #[serde(default = "default_tail_tol")]
    pub tail_tol: f64,
    /// Cap on the number of node multisets per term.
    #[serde(default = "default_max_leaves")]
    pub max_leaves: u64,
    /// Repeat with a coarser rule to estimate the quadrature error.
    #[serde(default = "default_true")]
    pub quad_estimate: bool,
}

impl Default for SeriesParams {
    fn default() -> Self {
        SeriesParams {
            nmax: default_nmax(),
            quad_nodes: default_quad_nodes(),
            tail_tol: default_tail_tol(),
            max_leaves: default_max_leaves(),
            quad_estimate: true,
        }
    }
}

/// A tiny-window Gibbs measure with `sigma = intensity * lambda`.
#[derive(Clone, Debug)]
pub struct SeriesSpec {
    pub potential: PotentialSpec,
    pub intensity: f64,
    pub params: SeriesParams,
}

impl SeriesSpec {
    pub fn new(potential: PotentialSpec, intensity: f64, params: SeriesParams) -> Result<Self> {
        if potential.window().is_sphere() {
            return Err(Error::Unsupported("series oracle on spheres".into()));
        }
        if !(intensity >= 0.0 && intensity.is_finite()) {
            return Err(invalid("intensity", "must be finite and non-negative"));
        }
        if params.quad_nodes == 0 || params.max_leaves == 0 {
            return Err(invalid("oracle", "quad_nodes and max_leaves must be positive"));
        }
        Ok(SeriesSpec {
            potential,
            intensity,
            params,
        })
    }

    pub fn sigma_total(&self) -> f64 {
        self.intensity * self.potential.window().volume()
    }
}

/// An oracle value with its error budget.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesValue {
    #[serde(with = "crate::fields::reim")]
    pub value: Complex64,
    pub tail_bound: f64,
    pub quad_bound: f64,
    pub nmax: usize,
}

impl SeriesValue {
    pub fn error(&self) -> f64 {
        self.tail_bound + self.quad_bound
    }
}

/// `sum_{n > nmax} x^n n^power / n!`.
fn poisson_tail(x: f64, nmax: usize, power: u32) -> f64 {
    if x == 0.0 {
        return 0.0;
    }
    let mut term = 1.0;
    for n in 1..=nmax {
        term *= x / n as f64;
    }
    let mut total = 0.0;
    let mut n = nmax;
    loop {
        n += 1;
        term *= x / n as f64;
        let t = term * (n as f64).powi(power as i32);
        total += t;
        if n > nmax + 10 && n as f64 > 2.0 * x && t < 1e-18 * total.max(1e-300) {
            break;
        }
        if n > nmax + 100_000 {
            break;
        }
    }
    total
}

/// `sum_{n <= nmax} x^n n^power / n!`.
fn poisson_head(x: f64, nmax: usize, power: u32) -> f64 {
    let mut term = 1.0;
    let mut total = if power == 0 { 1.0 } else { 0.0 };
    for n in 1..=nmax {
        term *= x / n as f64;
        total += term * (n as f64).powi(power as i32);
    }
    total
}

/// Unnormalized target density `f` on configurations built node by node.
pub trait SeriesTarget: Sync {
    type Cache: Sync;
    type State: Clone + Send + Sync;

    fn prepare(&self, nodes: &[Vec<f64>]) -> Self::Cache;
    fn root(&self, cache: &Self::Cache) -> Self::State;
    fn push(&self, cache: &Self::Cache, state: &Self::State, node: usize) -> Self::State;
    fn weight(&self, state: &Self::State) -> f64;
    /// Stability constant: `f(eta) <= xi^{#eta}`.
    fn xi(&self) -> f64;
    /// Absolute error of each `weight` value, relative to `xi^{#eta}`.
    fn weight_error(&self) -> f64 {
        0.0
    }
}

/// The one-species density `e^{-beta U}` with `U` on the interaction grid.
pub struct GridTarget<'a> {
    pub potential: &'a PotentialSpec,
}

#[derive(Clone)]
pub struct GridState {
    phi: Vec<f64>,
    energy: f64,
}

impl SeriesTarget for GridTarget<'_> {
    type Cache = Vec<Column>;
    type State = GridState;

    fn prepare(&self, nodes: &[Vec<f64>]) -> Vec<Column> {
        if self.potential.beta() == 0.0 {
            return Vec::new();
        }
        nodes.iter().map(|x| self.potential.column(x)).collect()
    }

    fn root(&self, _: &Vec<Column>) -> GridState {
        let n = if self.potential.beta() == 0.0 { 0 } else { self.potential.grid().len() };
        GridState {
            phi: vec![0.0; n],
            energy: 0.0,
        }
    }

    fn push(&self, cache: &Vec<Column>, state: &GridState, node: usize) -> GridState {
        if self.potential.beta() == 0.0 {
            return state.clone();
        }
        let col = &cache[node];
        let de = self.potential.energy_diff_from(&state.phi, col, 1.0);
        let mut phi = state.phi.clone();
        for (&i, &g) in col.indices.iter().zip(&col.values) {
            phi[i as usize] += g;
        }
        GridState {
            phi,
            energy: state.energy + de,
        }
    }

    fn weight(&self, state: &GridState) -> f64 {
        (-self.potential.beta() * state.energy).exp()
    }

    fn xi(&self) -> f64 {
        self.potential.sharp_xi()
    }
}

#[derive(Default)]
struct TermSums {
    den: NeumaierSum,
    num_re: Vec<NeumaierSum>,
    num_im: Vec<NeumaierSum>,
}

impl TermSums {
    fn new(k: usize) -> Self {
        TermSums {
            den: NeumaierSum::new(),
            num_re: vec![NeumaierSum::new(); k],
            num_im: vec![NeumaierSum::new(); k],
        }
    }

    fn merge(&mut self, o: &TermSums) {
        self.den.merge(&o.den);
        for (a, b) in self.num_re.iter_mut().zip(&o.num_re) {
            a.merge(b);
        }
        for (a, b) in self.num_im.iter_mut().zip(&o.num_im) {
            a.merge(b);
        }
    }
}

struct Rule {
    nodes: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

fn point_rule(window: &Window, per_axis: usize, breaks: &[Vec<f64>], intensity: f64) -> Rule {
    let (lo, hi) = window.bounds().expect("box window");
    let axes: Vec<(Vec<f64>, Vec<f64>)> = (0..lo.len())
        .map(|k| {
            let inner: Vec<f64> = breaks[k].iter().copied().filter(|&t| t > lo[k] && t < hi[k]).collect();
            let mut uniq = inner.clone();
            uniq.sort_by(f64::total_cmp);
            uniq.dedup();
            let panels = uniq.len() + 1;
            composite_gauss_legendre(lo[k], hi[k], &uniq, per_axis.div_ceil(panels).max(1))
        })
        .collect();
    let mut nodes = vec![Vec::new()];
    let mut weights = vec![intensity];
    for (x, w) in &axes {
        let mut nn = Vec::with_capacity(nodes.len() * x.len());
        let mut nw = Vec::with_capacity(nodes.len() * x.len());
        for (p, pw) in nodes.iter().zip(&weights) {
            for (xi, wi) in x.iter().zip(w) {
                let mut q = p.clone();
                q.push(*xi);
                nn.push(q);
                nw.push(pw * wi);
            }
        }
        nodes = nn;
        weights = nw;
    }
    Rule { nodes, weights }
}

fn multisets(k: u64, n: u64) -> f64 {
    // C(k + n - 1, n) in floating point.
    let mut c = 1.0;
    for i in 0..n {
        c *= (k + i) as f64 / (i + 1) as f64;
    }
    c
}

/// Nodes per axis for the `n`-point term.
fn nodes_for(n: usize, dim: usize, start: usize, cap: u64) -> usize {
    let mut m = start.max(1);
    while m > 1 && multisets((m as u64).pow(dim as u32), n as u64) > cap as f64 {
        m -= 1;
    }
    m
}

struct Walk<'a, T: SeriesTarget> {
    target: &'a T,
    cache: &'a T::Cache,
    rule: &'a Rule,
    feats: &'a [Vec<Complex64>],
    observables: &'a [Observable],
    offsets: &'a [usize],
    n: usize,
}

impl<T: SeriesTarget> Walk<'_, T> {
    fn leaf(&self, w: f64, f: &[Complex64], acc: &mut TermSums) {
        acc.den.add(w);
        for (k, obs) in self.observables.iter().enumerate() {
            let v = obs.finish(&f[self.offsets[k]..self.offsets[k + 1]]) * w;
            acc.num_re[k].add(v.re);
            acc.num_im[k].add(v.im);
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn visit(&self, depth: usize, last: usize, mult: f64, prod: f64, state: &T::State, f: &[Complex64], acc: &mut TermSums) {
        if depth == self.n {
            self.leaf(prod * self.target.weight(state), f, acc);
            return;
        }
        let mut g = f.to_vec();
        for i in last..self.rule.nodes.len() {
            let m = if depth > 0 && i == last { mult + 1.0 } else { 1.0 };
            let next = self.target.push(self.cache, state, i);
            for (a, (b, c)) in g.iter_mut().zip(f.iter().zip(&self.feats[i])) {
                *a = b + c;
            }
            self.visit(depth + 1, i, m, prod * self.rule.weights[i] / m, &next, &g, acc);
        }
    }
}

/// Raw per-term sums for `n = 0..=nmax`.
fn series_terms<T: SeriesTarget>(target: &T, window: &Window, intensity: f64, params: &SeriesParams, per_axis_start: usize, observables: &[Observable]) -> Vec<TermSums> {
    let dim = window.dim();
    let mut breaks = vec![Vec::new(); dim];
    for o in observables {
        for (k, b) in o.breakpoints(dim).into_iter().enumerate() {
            breaks[k].extend(b);
        }
    }
    let mut offsets = vec![0];
    for o in observables {
        offsets.push(offsets.last().unwrap() + o.n_features());
    }
    let nf = *offsets.last().unwrap();
    let mut out = Vec::with_capacity(params.nmax + 1);
    // (nodes per axis, rule, target cache, observable features per node)
    type Cached<C> = (usize, Rule, C, Vec<Vec<Complex64>>);
    let mut cached: Option<Cached<T::Cache>> = None;
    for n in 0..=params.nmax {
        let m = nodes_for(n.max(1), dim, per_axis_start, params.max_leaves);
        if cached.as_ref().is_none_or(|c| c.0 != m) {
            let rule = point_rule(window, m, &breaks, intensity);
            let cache = target.prepare(&rule.nodes);
            let feats = rule
                .nodes
                .iter()
                .map(|x| {
                    let mut v = Vec::with_capacity(nf);
                    for o in observables {
                        o.features(x, 1.0, &mut v);
                    }
                    v
                })
                .collect();
            cached = Some((m, rule, cache, feats));
        }
        let (_, rule, cache, feats) = cached.as_ref().unwrap();
        let walk = Walk {
            target,
            cache,
            rule,
            feats,
            observables,
            offsets: &offsets,
            n,
        };
        let zero = vec![Complex64::new(0.0, 0.0); nf];
        let root = target.root(cache);
        let acc = if n == 0 {
            let mut acc = TermSums::new(observables.len());
            walk.leaf(target.weight(&root), &zero, &mut acc);
            acc
        } else {
            let parts: Vec<TermSums> = (0..rule.nodes.len())
                .into_par_iter()
                .map(|i| {
                    let mut acc = TermSums::new(observables.len());
                    let next = target.push(cache, &root, i);
                    walk.visit(1, i, 1.0, rule.weights[i], &next, &feats[i], &mut acc);
                    acc
                })
                .collect();
            let mut acc = TermSums::new(observables.len());
            for p in &parts {
                acc.merge(p);
            }
            acc
        };
        out.push(acc);
    }
    out
}

fn ratios(terms: &[TermSums], k: usize) -> (Vec<Complex64>, f64) {
    let mut den = NeumaierSum::new();
    for t in terms {
        den.merge(&t.den);
    }
    let den = den.value();
    let vals = (0..k)
        .map(|j| {
            let mut re = NeumaierSum::new();
            let mut im = NeumaierSum::new();
            for t in terms {
                re.merge(&t.num_re[j]);
                im.merge(&t.num_im[j]);
            }
            Complex64::new(re.value(), im.value()) / den
        })
        .collect();
    (vals, den)
}

/// Bound on the error of the truncated ratio at order `nmax`.
fn tail_bound(growth: &Growth, sigma_xi: f64, nmax: usize, value: f64, den: f64, weight_err: f64) -> f64 {
    let num_tail = growth.kappa * poisson_tail(sigma_xi * growth.base, nmax, growth.power);
    let den_tail = poisson_tail(sigma_xi, nmax, 0);
    let inner = weight_err * (growth.kappa * poisson_head(sigma_xi * growth.base, nmax, growth.power) + value * poisson_head(sigma_xi, nmax, 0));
    (num_tail + value * den_tail + inner) / den.max(1e-300)
}

fn required_nmax(growth: &Growth, sigma_xi: f64, from: usize, value: f64, den: f64, tol: f64) -> usize {
    let mut n = from;
    while tail_bound(growth, sigma_xi, n, value, den, 0.0) > tol && n < from + 10_000 {
        n += 1;
    }
    n
}

/// Expectations of several observables under a generic series target,
/// sharing every quadrature leaf.
pub fn expect_target<T: SeriesTarget>(target: &T, window: &Window, intensity: f64, params: &SeriesParams, observables: &[Observable]) -> Result<Vec<SeriesValue>> {
    let terms = series_terms(target, window, intensity, params, params.quad_nodes, observables);
    let (vals, den) = ratios(&terms, observables.len());
    let coarse = if params.quad_estimate {
        // Coarser rules at every order: fewer low-order nodes and a smaller leaf cap.
        let mut p = params.clone();
        p.max_leaves = (params.max_leaves / 4).max(1);
        let c = series_terms(target, window, intensity, &p, (params.quad_nodes * 3 / 4).max(1), observables);
        Some(ratios(&c, observables.len()).0)
    } else {
        None
    };
    let sigma_xi = intensity * window.volume() * target.xi();
    let mut out = Vec::with_capacity(observables.len());
    for (k, obs) in observables.iter().enumerate() {
        let v = vals[k];
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(Error::NonFinite("series value".into()));
        }
        let g = obs.growth();
        let tb = tail_bound(&g, sigma_xi, params.nmax, v.norm(), den, target.weight_error());
        if tb > params.tail_tol {
            return Err(Error::TailBound {
                bound: tb,
                tol: params.tail_tol,
                required: required_nmax(&g, sigma_xi, params.nmax, v.norm(), den, params.tail_tol),
            });
        }
        let qb = coarse.as_ref().map_or(0.0, |c| (c[k] - v).norm());
        out.push(SeriesValue {
            value: v,
            tail_bound: tb,
            quad_bound: qb,
            nmax: params.nmax,
        });
    }
    Ok(out)
}

/// `E[F]` for each observable under the finite-window Gibbs measure.
pub fn expect_many(spec: &SeriesSpec, observables: &[Observable]) -> Result<Vec<SeriesValue>> {
    let target = GridTarget { potential: &spec.potential };
    expect_target(&target, spec.potential.window(), spec.intensity, &spec.params, observables)
}

pub fn expect(spec: &SeriesSpec, observable: &Observable) -> Result<SeriesValue> {
    Ok(expect_many(spec, std::slice::from_ref(observable))?.remove(0))
}

/// `E[prod_j [conj] phi^c(z_j)]`.
pub fn moment_exact(spec: &SeriesSpec, kernel: &KernelSpec, points: &[ComplexPoint], conj: &[bool]) -> Result<SeriesValue> {
    if points.is_empty() {
        return Ok(SeriesValue {
            value: Complex64::new(1.0, 0.0),
            tail_bound: 0.0,
            quad_bound: 0.0,
            nmax: spec.params.nmax,
        });
    }
    expect(spec, &Observable::field_product(kernel, points, conj)?)
}

/// The coupled two-species density of species one, with species two
/// (charges drawn from `r`) integrated out term by term on `outer`.
pub struct CoupledTarget {
    /// `G_1 = G * G`.
    pub kernel1: KernelSpec,
    pub beta: f64,
    pub charges: Vec<[f64; 2]>,
    /// Species-two quadrature nodes and weights.
    y_nodes: Vec<Vec<f64>>,
    y_weights: Vec<f64>,
    outer_volume: f64,
    /// Inner series order.
    pub n2: usize,
    inner_tail: f64,
}

impl CoupledTarget {
    /// Species two lives on `outer`, integrated by composite Gauss–Legendre
    /// panels of width about `panel`, with `per_panel` nodes each.
    pub fn new(kernel1: KernelSpec, beta: f64, charges: Vec<[f64; 2]>, outer: &Window, panel: f64, per_panel: usize) -> Result<Self> {
        let (lo, hi) = outer.bounds().ok_or_else(|| Error::Unsupported("coupled target on spheres".into()))?;
        let axes: Vec<(Vec<f64>, Vec<f64>)> = lo
            .iter()
            .zip(hi)
            .map(|(&a, &b)| {
                let k = ((b - a) / panel).ceil().max(1.0) as usize;
                let breaks: Vec<f64> = (1..k).map(|i| a + (b - a) * i as f64 / k as f64).collect();
                composite_gauss_legendre(a, b, &breaks, per_panel)
            })
            .collect();
        let mut y_nodes = vec![Vec::new()];
        let mut y_weights = vec![1.0];
        for (x, w) in &axes {
            let mut nn = Vec::new();
            let mut nw = Vec::new();
            for (p, pw) in y_nodes.iter().zip(&y_weights) {
                for (xi, wi) in x.iter().zip(w) {
                    let mut q = p.clone();
                    q.push(*xi);
                    nn.push(q);
                    nw.push(pw * wi);
                }
            }
            y_nodes = nn;
            y_weights = nw;
        }
        let mass: f64 = charges.iter().map(|c| c[1]).sum();
        let lam = outer.volume() * mass;
        let mut n2 = lam.ceil() as usize;
        while poisson_tail(lam, n2, 0) * (-lam).exp() > 1e-15 {
            n2 += 1;
        }
        Ok(CoupledTarget {
            kernel1,
            beta,
            charges,
            y_nodes,
            y_weights,
            outer_volume: outer.volume(),
            n2,
            inner_tail: poisson_tail(lam, n2, 0) * (-lam).exp(),
        })
    }

    /// `-log` of the exact inner expectation: `\int omega(beta Phi_1) d lambda`
    /// on the species-two rule, for a fixed configuration.
    pub fn effective_energy(&self, eta: &Configuration) -> f64 {
        let mut s = NeumaierSum::new();
        for (y, w) in self.y_nodes.iter().zip(&self.y_weights) {
            let phi: f64 = eta.points().map(|x| self.kernel1.eval_real(y, x)).sum();
            let omega: f64 = self.charges.iter().map(|[c, m]| m * -(-self.beta * c * phi).exp_m1()).sum();
            s.add(w * omega);
        }
        s.value()
    }
}

impl SeriesTarget for CoupledTarget {
    type Cache = Vec<Vec<f64>>;
    type State = Vec<f64>;

    fn prepare(&self, nodes: &[Vec<f64>]) -> Vec<Vec<f64>> {
        nodes.iter().map(|x| self.y_nodes.iter().map(|y| self.kernel1.eval_real(y, x)).collect()).collect()
    }

    fn root(&self, _: &Vec<Vec<f64>>) -> Vec<f64> {
        vec![0.0; self.y_nodes.len()]
    }

    fn push(&self, cache: &Vec<Vec<f64>>, state: &Vec<f64>, node: usize) -> Vec<f64> {
        state.iter().zip(&cache[node]).map(|(a, b)| a + b).collect()
    }

    fn weight(&self, phi: &Vec<f64>) -> f64 {
        // I = \int\int e^{-beta s Phi_1(y)} dr(s) dy; the n2-fold species-two
        // integral factorizes into I^{n2}.
        let mut s = NeumaierSum::new();
        for (p, w) in phi.iter().zip(&self.y_weights) {
            for [c, m] in &self.charges {
                s.add(w * m * (-self.beta * c * p).exp());
            }
        }
        let i = s.value();
        let mass: f64 = self.charges.iter().map(|c| c[1]).sum();
        let lam = self.outer_volume * mass;
        let mut term = 1.0;
        let mut total = NeumaierSum::new();
        total.add(1.0);
        for k in 1..=self.n2 {
            term *= i / k as f64;
            total.add(term);
        }
        total.value() * (-lam).exp()
    }

    fn xi(&self) -> f64 {
        1.0
    }

    fn weight_error(&self) -> f64 {
        self.inner_tail
    }
}

/// Agreement between the coupled two-species marginal and the projected
/// one-species model for one observable.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProjectionComparison {
    pub observable: String,
    pub coupled: SeriesValue,
    pub projected: SeriesValue,
    pub difference: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProjectionReport {
    pub beta: f64,
    pub charges: Vec<[f64; 2]>,
    /// Largest per-point disagreement of the two discretizations of `U`.
    pub field_quad_error: f64,
    pub comparisons: Vec<ProjectionComparison>,
    pub passed: bool,
}

/// Compares the species-one marginal of the coupled model (kernel `G`,
/// coupling `exp{-beta \int (G * eta)(G * gamma)}`) with the one-species
/// model `v(phi) = omega(beta phi) / beta` for `phi = G_1 * eta`.
pub fn two_species_projection_check(
    kernel: &KernelSpec,
    window: &Window,
    intensity: f64,
    charges: &[[f64; 2]],
    beta: f64,
    params: &SeriesParams,
    observables: &[(String, Observable)],
) -> Result<ProjectionReport> {
    let g1 = kernel.self_convolution_kernel()?;
    let projected = PotentialSpec::new(
        Profile::ChargeMix { charges: charges.to_vec() },
        beta,
        g1.clone(),
        window.clone(),
        None,
    )?;
    let outer = projected.grid().window().clone();
    let coupled = CoupledTarget::new(g1, beta, charges.to_vec(), &outer, 0.5, 16)?;

    // Both sides integrate omega(beta Phi_1) over the same outer window.
    let mut field_err: f64 = 0.0;
    let c = window.center();
    let (lo, hi) = window.bounds().expect("box window");
    let probes = [vec![c.clone()], vec![lo.to_vec(), hi.to_vec()], vec![lo.to_vec(), c.clone(), hi.to_vec(), c.clone()]];
    for pts in probes {
        let eta = Configuration::from_points(window.ambient_dim(), &pts)?;
        let u_grid = if beta == 0.0 { 0.0 } else { beta * projected.potential(&eta) };
        let u_gl = coupled.effective_energy(&eta);
        field_err = field_err.max((u_grid - u_gl).abs() / pts.len() as f64);
    }

    let obs: Vec<Observable> = observables.iter().map(|(_, o)| o.clone()).collect();
    let spec = SeriesSpec::new(projected, intensity, params.clone())?;
    let a = expect_many(&spec, &obs)?;
    let b = expect_target(&coupled, window, intensity, params, &obs)?;
    let mut comparisons = Vec::new();
    for (((name, _), pa), pb) in observables.iter().zip(&a).zip(&b) {
        let diff = (pa.value - pb.value).norm();
        // e^{-U} changes by at most field_err per point; both the numerator
        // and the normalization see it.
        let field_term = 2.0 * field_err * params.nmax as f64 * pa.value.norm().max(1.0);
        let tol = pa.error() + pb.error() + field_term;
        comparisons.push(ProjectionComparison {
            observable: name.clone(),
            coupled: *pb,
            projected: *pa,
            difference: diff,
            tolerance: tol,
            passed: diff <= tol,
        });
    }
    let passed = comparisons.iter().all(|c| c.passed);
    Ok(ProjectionReport {
        beta,
        charges: charges.to_vec(),
        field_quad_error: field_err,
        comparisons,
        passed,
    })
}

/// Both sides of `\int (G * eta)(G * gamma) d lambda = sum_{j,k} s_k G_1(y_j, x_k)`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct PottsCheck {
    pub integral: f64,
    pub pair_sum: f64,
    pub difference: f64,
}

/// The left side by a midpoint grid of spacing `h` over the hull of both
/// configurations padded by the kernel's decay radius.
pub fn potts_pair_energy(kernel: &KernelSpec, eta: &Configuration, gamma: &Configuration, h: f64) -> Result<PottsCheck> {
    let g1 = kernel.self_convolution_kernel()?;
    let dim = kernel.ambient_dim();
    if eta.dim() != dim || gamma.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: if eta.dim() != dim { eta.dim() } else { gamma.dim() },
        });
    }
    if eta.is_empty() || gamma.is_empty() {
        return Ok(PottsCheck {
            integral: 0.0,
            pair_sum: 0.0,
            difference: 0.0,
        });
    }
    let mut bounds = vec![[f64::INFINITY, f64::NEG_INFINITY]; dim];
    for p in eta.points().chain(gamma.points()) {
        for k in 0..dim {
            bounds[k][0] = bounds[k][0].min(p[k]);
            bounds[k][1] = bounds[k][1].max(p[k]);
        }
    }
    let pad = kernel.decay_radius(1e-14);
    for b in bounds.iter_mut() {
        b[0] -= pad;
        b[1] += pad;
    }
    let grid = QuadratureGrid::new(&Window::new_box(&bounds)?, h)?;
    let mut s = NeumaierSum::new();
    for i in 0..grid.len() {
        let z = grid.node(i);
        let a: f64 = eta.weighted_points().map(|(x, c)| c * kernel.eval_real(z, x)).sum();
        let b: f64 = gamma.weighted_points().map(|(x, c)| c * kernel.eval_real(z, x)).sum();
        s.add(grid.weights()[i] * a * b);
    }
    let mut pair = NeumaierSum::new();
    for (y, _) in eta.weighted_points() {
        for (x, c) in gamma.weighted_points() {
            pair.add(c * g1.eval_real(y, x));
        }
    }
    let (integral, pair_sum) = (s.value(), pair.value());
    Ok(PottsCheck {
        integral,
        pair_sum,
        difference: (integral - pair_sum).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(beta: f64, lo: f64, hi: f64, nmax: usize) -> SeriesSpec {
        let p = PotentialSpec::new(
            Profile::WidomRowlinson,
            beta,
            KernelSpec::gaussian(1).unwrap(),
            Window::cube(1, lo, hi).unwrap(),
            None,
        )
        .unwrap();
        SeriesSpec::new(
            p,
            1.0,
            SeriesParams {
                nmax,
                ..Default::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn free_count_mean_is_sigma() {
        let s = spec(0.0, 0.0, 1.0, 14);
        let v = expect(&s, &Observable::count(None)).unwrap();
        assert!((v.value.re - 1.0).abs() < 1e-10, "{v:?}");
    }

    #[test]
    fn free_laplace_transform_matches_closed_form() {
        let s = spec(0.0, 0.0, 1.0, 14);
        let h = TestFunction::cosine_bump(vec![0.5], 0.4, 1.0).unwrap();
        let v = expect(&s, &Observable::laplace(h.clone())).unwrap();
        let integral = crate::quad::adaptive(|x| (-h.eval(&[x])).exp_m1(), 0.0, 1.0, 1e-14, 1e-14);
        let diff = (v.value.re - integral.exp()).abs();
        assert!(diff <= v.error() && diff < 1e-8, "{diff} vs reported {}", v.error());
    }

    #[test]
    fn empty_moment_is_one() {
        let s = spec(1.0, 0.0, 1.0, 12);
        let v = moment_exact(&s, &KernelSpec::gaussian(1).unwrap(), &[], &[]).unwrap();
        assert_eq!(v.value, Complex64::new(1.0, 0.0));
    }

    #[test]
    fn tail_bound_refusal_names_required_order() {
        let s = spec(1.0, 0.0, 1.0, 4);
        match expect(&s, &Observable::count(None)) {
            Err(Error::TailBound { required, .. }) => assert!(required > 4 && required < 20),
            other => panic!("expected a tail-bound refusal, got {other:?}"),
        }
    }

    #[test]
    fn interacting_mean_is_below_free_mean() {
        let s = spec(1.0, 0.0, 1.0, 12);
        let v = expect(&s, &Observable::count(None)).unwrap();
        assert!(v.value.re > 0.0 && v.value.re < 1.0);
        assert!(v.tail_bound < 1e-8);
    }

    #[test]
    fn potts_identity_for_gaussian() {
        let k = KernelSpec::gaussian(1).unwrap();
        let eta = Configuration::from_points(1, &[vec![0.1], vec![0.9]]).unwrap();
        let gamma = Configuration::from_charged_points(1, &[vec![0.4], vec![1.7]], &[0.5, 2.0]).unwrap();
        let c = potts_pair_energy(&k, &eta, &gamma, 0.05).unwrap();
        assert!(c.difference < 1e-8, "{c:?}");
    }

    #[test]
    fn multiset_counts() {
        assert_eq!(multisets(32, 4), 52360.0);
        assert_eq!(nodes_for(4, 1, 32, 60_000), 32);
        assert_eq!(nodes_for(12, 1, 32, 60_000), 8);
    }
}
