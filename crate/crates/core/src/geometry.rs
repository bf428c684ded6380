//! Spaces, windows, complexified points and the group actions used by the
//! invariance tests.
//!
//! Every point is stored in Cartesian ambient coordinates: `d` coordinates
//! for Euclidean space, `d + 1` for a sphere of radius `R`. Group elements
//! all reduce to complex affine maps `z -> M z + c` with `M^T M = 1`, which
//! keeps composition and inversion uniform.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};

/// The Euclidean space-time `X`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "space", rename_all = "snake_case")]
pub enum Space {
    Euclidean { dim: usize },
    Sphere { dim: usize, radius: f64 },
}

impl Space {
    pub fn euclidean(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dim", "must be at least 1"));
        }
        Ok(Space::Euclidean { dim })
    }

    pub fn sphere(dim: usize, radius: f64) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dim", "must be at least 1"));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(invalid("radius", format!("must be positive, got {radius}")));
        }
        Ok(Space::Sphere { dim, radius })
    }

    pub fn dim(&self) -> usize {
        match *self {
            Space::Euclidean { dim } | Space::Sphere { dim, .. } => dim,
        }
    }

    /// Number of stored coordinates per point.
    pub fn ambient_dim(&self) -> usize {
        match *self {
            Space::Euclidean { dim } => dim,
            Space::Sphere { dim, .. } => dim + 1,
        }
    }

    pub fn contains_point(&self, x: &[f64]) -> bool {
        if x.len() != self.ambient_dim() {
            return false;
        }
        match *self {
            Space::Euclidean { .. } => x.iter().all(|v| v.is_finite()),
            Space::Sphere { radius, .. } => {
                let r2 = radius * radius;
                (dot(x, x) - r2).abs() <= 1e-12 * r2
            }
        }
    }
}

/// A finite-volume region of `X` carrying the reference measure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Window {
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Sphere { dim: usize, radius: f64 },
}

impl Window {
    pub fn new_box(bounds: &[[f64; 2]]) -> Result<Self> {
        if bounds.is_empty() {
            return Err(invalid("window", "needs at least one axis"));
        }
        for b in bounds {
            if !(b[0] < b[1]) || !b[0].is_finite() || !b[1].is_finite() {
                return Err(invalid("window", format!("axis bounds must satisfy a < b, got [{}, {}]", b[0], b[1])));
            }
        }
        Ok(Window::Box {
            lo: bounds.iter().map(|b| b[0]).collect(),
            hi: bounds.iter().map(|b| b[1]).collect(),
        })
    }

    /// The cube `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new_box(&vec![[lo, hi]; dim])
    }

    pub fn sphere(dim: usize, radius: f64) -> Result<Self> {
        Space::sphere(dim, radius)?;
        Ok(Window::Sphere { dim, radius })
    }

    pub fn space(&self) -> Space {
        match self {
            Window::Box { lo, .. } => Space::Euclidean { dim: lo.len() },
            Window::Sphere { dim, radius } => Space::Sphere {
                dim: *dim,
                radius: *radius,
            },
        }
    }

    pub fn dim(&self) -> usize {
        self.space().dim()
    }

    pub fn ambient_dim(&self) -> usize {
        self.space().ambient_dim()
    }

    pub fn is_sphere(&self) -> bool {
        matches!(self, Window::Sphere { .. })
    }

    /// Lebesgue volume of a box, surface area `2 pi^{(d+1)/2} R^d / Gamma((d+1)/2)` of a sphere.
    pub fn volume(&self) -> f64 {
        match self {
            Window::Box { lo, hi } => lo.iter().zip(hi).map(|(a, b)| b - a).product(),
            Window::Sphere { dim, radius } => sphere_area(*dim, *radius),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Window::Box { lo, hi } => {
                x.len() == lo.len() && x.iter().zip(lo.iter().zip(hi)).all(|(v, (a, b))| *v >= *a && *v <= *b)
            }
            Window::Sphere { .. } => self.space().contains_point(x),
        }
    }

    /// Box grown by `margin` on every side. Spheres have no boundary and
    /// are returned unchanged.
    pub fn padded(&self, margin: f64) -> Window {
        match self {
            Window::Box { lo, hi } => Window::Box {
                lo: lo.iter().map(|a| a - margin).collect(),
                hi: hi.iter().map(|b| b + margin).collect(),
            },
            s => s.clone(),
        }
    }

    /// Box centre; the north pole `(0, .., 0, R)` for a sphere.
    pub fn center(&self) -> Vec<f64> {
        match self {
            Window::Box { lo, hi } => lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect(),
            Window::Sphere { dim, radius } => {
                let mut p = vec![0.0; dim + 1];
                p[*dim] = *radius;
                p
            }
        }
    }

    /// Distance from `x` to the box boundary (infinite on a sphere).
    pub fn distance_to_boundary(&self, x: &[f64]) -> f64 {
        match self {
            Window::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(v, (a, b))| (v - a).min(b - v))
                .fold(f64::INFINITY, f64::min),
            Window::Sphere { .. } => f64::INFINITY,
        }
    }

    /// Axis bounds of a box window.
    pub fn bounds(&self) -> Option<(&[f64], &[f64])> {
        match self {
            Window::Box { lo, hi } => Some((lo, hi)),
            Window::Sphere { .. } => None,
        }
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            Window::Box { lo, hi } => lo.iter().zip(hi).map(|(a, b)| a + (b - a) * rng.random::<f64>()).collect(),
            Window::Sphere { dim, radius } => loop {
                let v: Vec<f64> = (0..=*dim).map(|_| rng.sample(StandardNormal)).collect();
                let n = dot(&v, &v).sqrt();
                if n > 1e-12 {
                    return v.iter().map(|c| c * radius / n).collect();
                }
            },
        }
    }
}

pub fn sphere_area(dim: usize, radius: f64) -> f64 {
    let k = (dim + 1) as f64 / 2.0;
    2.0 * PI.powf(k) * radius.powi(dim as i32) / statrs::function::gamma::gamma(k)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A point of the complexification `X^c`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexPoint(#[serde(with = "crate::fields::reim::vec")] pub Vec<Complex64>);

impl ComplexPoint {
    pub fn from_real(x: &[f64]) -> Self {
        ComplexPoint(x.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn from_parts(re: &[f64], im: &[f64]) -> Self {
        assert_eq!(re.len(), im.len());
        ComplexPoint(re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b)).collect())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[Complex64] {
        &self.0
    }

    /// Bilinear (not Hermitian) extension of the Euclidean dot product.
    pub fn dot(&self, other: &ComplexPoint) -> Complex64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn conj(&self) -> Self {
        ComplexPoint(self.0.iter().map(|c| c.conj()).collect())
    }

    pub fn re(&self) -> Vec<f64> {
        self.0.iter().map(|c| c.re).collect()
    }

    pub fn im(&self) -> Vec<f64> {
        self.0.iter().map(|c| c.im).collect()
    }

    pub fn max_abs_im(&self) -> f64 {
        self.0.iter().map(|c| c.im.abs()).fold(0.0, f64::max)
    }

    pub fn is_real(&self) -> bool {
        self.0.iter().all(|c| c.im == 0.0)
    }

    pub fn distance(&self, other: &ComplexPoint) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Elements of the real symmetry group, its complexification, and the two
/// relativistic maps used in the Wick-rotation tests.
#[derive(Clone, Debug, PartialEq)]
pub enum GroupElement {
    /// `x -> O x + a` with `O` real orthogonal.
    EuclideanIsometry { rotation: DMatrix<f64>, translation: DVector<f64> },
    /// `z -> M z + c` with `M^T M = 1` (complex orthogonal).
    ComplexOrthogonal {
        matrix: DMatrix<Complex64>,
        translation: DVector<Complex64>,
    },
    /// Complexified boost in the `(0, 1)` coordinate plane acting on ambient
    /// coordinates of dimension `dim`.
    LorentzBoost { rapidity: f64, dim: usize },
    /// `z^0 -> -z^0`.
    TimeReflection { dim: usize },
}

impl GroupElement {
    pub fn identity(dim: usize) -> Self {
        GroupElement::EuclideanIsometry {
            rotation: DMatrix::identity(dim, dim),
            translation: DVector::zeros(dim),
        }
    }

    pub fn translation(a: &[f64]) -> Self {
        GroupElement::EuclideanIsometry {
            rotation: DMatrix::identity(a.len(), a.len()),
            translation: DVector::from_column_slice(a),
        }
    }

    /// Rotation by `angle` in the `(i, j)` coordinate plane.
    pub fn plane_rotation(dim: usize, i: usize, j: usize, angle: f64) -> Self {
        let mut r = DMatrix::identity(dim, dim);
        let (s, c) = angle.sin_cos();
        r[(i, i)] = c;
        r[(j, j)] = c;
        r[(i, j)] = -s;
        r[(j, i)] = s;
        GroupElement::EuclideanIsometry {
            rotation: r,
            translation: DVector::zeros(dim),
        }
    }

    pub fn isometry(rotation: DMatrix<f64>, translation: &[f64]) -> Result<Self> {
        if rotation.nrows() != rotation.ncols() || rotation.nrows() != translation.len() {
            return Err(Error::DimensionMismatch {
                expected: rotation.nrows(),
                found: translation.len(),
            });
        }
        let g = GroupElement::EuclideanIsometry {
            rotation,
            translation: DVector::from_column_slice(translation),
        };
        if g.orthogonality_defect() > 1e-12 {
            return Err(invalid("rotation", "matrix is not orthogonal"));
        }
        Ok(g)
    }

    /// Haar-random element of `O(dim)` composed with a translation whose
    /// components are uniform in `[-shift, shift]`.
    pub fn random_isometry<R: Rng + ?Sized>(dim: usize, shift: f64, rng: &mut R) -> Self {
        let a = DMatrix::<f64>::from_fn(dim, dim, |_, _| rng.sample(StandardNormal));
        let qr = a.qr();
        let mut q = qr.q();
        let r = qr.r();
        for j in 0..dim {
            if r[(j, j)] < 0.0 {
                for i in 0..dim {
                    q[(i, j)] = -q[(i, j)];
                }
            }
        }
        let t: Vec<f64> = (0..dim).map(|_| shift * (2.0 * rng.random::<f64>() - 1.0)).collect();
        GroupElement::EuclideanIsometry {
            rotation: q,
            translation: DVector::from_vec(t),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            GroupElement::EuclideanIsometry { translation, .. } => translation.len(),
            GroupElement::ComplexOrthogonal { translation, .. } => translation.len(),
            GroupElement::LorentzBoost { dim, .. } | GroupElement::TimeReflection { dim } => *dim,
        }
    }

    /// The complex affine map `(M, c)` representing this element.
    pub fn to_affine(&self) -> (DMatrix<Complex64>, DVector<Complex64>) {
        match self {
            GroupElement::EuclideanIsometry { rotation, translation } => (
                rotation.map(|v| Complex64::new(v, 0.0)),
                translation.map(|v| Complex64::new(v, 0.0)),
            ),
            GroupElement::ComplexOrthogonal { matrix, translation } => (matrix.clone(), translation.clone()),
            GroupElement::LorentzBoost { rapidity, dim } => (boost_matrix(*rapidity, *dim), DVector::zeros(*dim)),
            GroupElement::TimeReflection { dim } => {
                let mut m = DMatrix::identity(*dim, *dim);
                m[(0, 0)] = Complex64::new(-1.0, 0.0);
                (m, DVector::zeros(*dim))
            }
        }
    }

    /// `g . z`
    pub fn apply(&self, z: &ComplexPoint) -> Result<ComplexPoint> {
        if z.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: z.dim(),
            });
        }
        let (m, c) = self.to_affine();
        let v = DVector::from_column_slice(z.coords());
        let out = m * v + c;
        Ok(ComplexPoint(out.iter().copied().collect()))
    }

    /// Action of a real isometry on a real point.
    pub fn apply_real(&self, x: &[f64]) -> Result<Vec<f64>> {
        match self {
            GroupElement::EuclideanIsometry { rotation, translation } => {
                if x.len() != translation.len() {
                    return Err(Error::DimensionMismatch {
                        expected: translation.len(),
                        found: x.len(),
                    });
                }
                let out = rotation * DVector::from_column_slice(x) + translation;
                Ok(out.iter().copied().collect())
            }
            GroupElement::TimeReflection { dim } => {
                if x.len() != *dim {
                    return Err(Error::DimensionMismatch {
                        expected: *dim,
                        found: x.len(),
                    });
                }
                let mut y = x.to_vec();
                y[0] = -y[0];
                Ok(y)
            }
            _ => Err(Error::Unsupported("complex group elements do not preserve the real space".into())),
        }
    }

    /// `self o other` (apply `other` first).
    pub fn compose(&self, other: &GroupElement) -> Result<GroupElement> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        let (m1, c1) = self.to_affine();
        let (m2, c2) = other.to_affine();
        Ok(GroupElement::ComplexOrthogonal {
            translation: &m1 * c2 + c1,
            matrix: m1 * m2,
        })
    }

    /// Inverse, using `M^{-1} = M^T`.
    pub fn inverse(&self) -> GroupElement {
        match self {
            GroupElement::EuclideanIsometry { rotation, translation } => {
                let rt = rotation.transpose();
                GroupElement::EuclideanIsometry {
                    translation: -(&rt * translation),
                    rotation: rt,
                }
            }
            GroupElement::LorentzBoost { rapidity, dim } => GroupElement::LorentzBoost {
                rapidity: -rapidity,
                dim: *dim,
            },
            GroupElement::TimeReflection { dim } => GroupElement::TimeReflection { dim: *dim },
            GroupElement::ComplexOrthogonal { matrix, translation } => {
                let mt = matrix.transpose();
                GroupElement::ComplexOrthogonal {
                    translation: -(&mt * translation),
                    matrix: mt,
                }
            }
        }
    }

    /// `max |M^T M - 1|` entrywise.
    pub fn orthogonality_defect(&self) -> f64 {
        let (m, _) = self.to_affine();
        let n = m.nrows();
        let p = m.transpose() * &m;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((p[(i, j)] - Complex64::new(target, 0.0)).norm());
            }
        }
        worst
    }
}

/// Free-function form of [`GroupElement::apply`].
pub fn apply_group(g: &GroupElement, z: &ComplexPoint) -> Result<ComplexPoint> {
    g.apply(z)
}

fn boost_matrix(chi: f64, dim: usize) -> DMatrix<Complex64> {
    let mut m = DMatrix::identity(dim, dim);
    if dim >= 2 {
        let (c, s) = (chi.cosh(), chi.sinh());
        m[(0, 0)] = Complex64::new(c, 0.0);
        m[(1, 1)] = Complex64::new(c, 0.0);
        m[(0, 1)] = Complex64::new(0.0, s);
        m[(1, 0)] = Complex64::new(0.0, -s);
    }
    m
}

/// The complex orthogonal matrix `M` with `wick(L_chi y) = M wick(y)`:
/// coordinates 0 and 1 are mixed by `((cosh, i sinh), (-i sinh, cosh))`.
pub fn boost_as_complex_rotation(chi: f64, dim: usize) -> GroupElement {
    GroupElement::ComplexOrthogonal {
        matrix: boost_matrix(chi, dim),
        translation: DVector::zeros(dim),
    }
}

/// The relativistic real slice `Y` inside `X^c`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "slice", rename_all = "snake_case")]
pub enum Slice {
    /// `Y = iR x R^{d-1}`, real coordinates `(y^0, y_hat)`.
    Minkowski { dim: usize },
    /// The hyperboloid `{y in iR x R^d : y.y = R^2}`; only `d = 1` is
    /// supported, parametrised by the hyperbolic angle `t`.
    DeSitter { dim: usize, radius: f64 },
}

impl Slice {
    pub fn coordinate_dim(&self) -> usize {
        match *self {
            Slice::Minkowski { dim } => dim,
            Slice::DeSitter { .. } => 1,
        }
    }

    fn check(&self, y: &[f64]) -> Result<()> {
        match *self {
            Slice::DeSitter { dim, .. } if dim != 1 => {
                Err(Error::Unsupported(format!("de Sitter slice with d = {dim} (only d = 1)")))
            }
            _ if y.len() != self.coordinate_dim() => Err(Error::DimensionMismatch {
                expected: self.coordinate_dim(),
                found: y.len(),
            }),
            _ => Ok(()),
        }
    }
}

/// Embed a real point of `Y` into `X^c`.
pub fn wick_embed(slice: &Slice, y: &[f64]) -> Result<ComplexPoint> {
    slice.check(y)?;
    Ok(match *slice {
        Slice::Minkowski { .. } => {
            let mut z = ComplexPoint::from_real(y);
            z.0[0] = Complex64::new(0.0, y[0]);
            z
        }
        Slice::DeSitter { radius, .. } => {
            let t = y[0];
            ComplexPoint(vec![Complex64::new(0.0, radius * t.sinh()), Complex64::new(radius * t.cosh(), 0.0)])
        }
    })
}

/// Real Lorentz boost of rapidity `chi` in the `(0, 1)` plane of `Y`. On
/// the d = 1 de Sitter hyperbola it shifts the hyperbolic angle.
pub fn lorentz_boost(slice: &Slice, chi: f64, y: &[f64]) -> Result<Vec<f64>> {
    slice.check(y)?;
    Ok(match slice {
        Slice::Minkowski { dim } => {
            let mut out = y.to_vec();
            if *dim >= 2 {
                let (c, s) = (chi.cosh(), chi.sinh());
                out[0] = c * y[0] + s * y[1];
                out[1] = s * y[0] + c * y[1];
            }
            out
        }
        Slice::DeSitter { .. } => vec![y[0] + chi],
    })
}

/// Time reflection `theta (y^0, y_hat) = (-y^0, y_hat)`.
pub fn time_reflection(slice: &Slice, y: &[f64]) -> Result<Vec<f64>> {
    slice.check(y)?;
    let mut out = y.to_vec();
    out[0] = -out[0];
    Ok(out)
}

/// `theta theta_alpha y` with `theta_alpha = alpha^{-1} theta alpha` and
/// `alpha` the boost of rapidity `chi`.
pub fn reflected_boost_conjugate(slice: &Slice, chi: f64, y: &[f64]) -> Result<Vec<f64>> {
    let ay = lorentz_boost(slice, chi, y)?;
    let tay = time_reflection(slice, &ay)?;
    let back = lorentz_boost(slice, -chi, &tay)?;
    time_reflection(slice, &back)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn identity_fixes_points() {
        let z = ComplexPoint(vec![c(1.0, 2.0), c(0.0, 0.0)]);
        assert_eq!(GroupElement::identity(2).apply(&z).unwrap(), z);
    }

    #[test]
    fn quarter_turn_rotates_axis() {
        let g = GroupElement::plane_rotation(2, 0, 1, PI / 2.0);
        let z = g.apply(&ComplexPoint::from_real(&[1.0, 0.0])).unwrap();
        assert!((z.0[0] - c(0.0, 0.0)).norm() < 1e-12);
        assert!((z.0[1] - c(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let g = GroupElement::identity(3);
        let err = g.apply(&ComplexPoint::from_real(&[1.0, 2.0])).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 3, found: 2 }));
    }

    #[test]
    fn boost_matches_hand_computed_matrix() {
        let chi: f64 = 0.4;
        let (ch, sh) = (chi.cosh(), chi.sinh());
        let y = [0.7, -1.3];
        let z = wick_embed(&Slice::Minkowski { dim: 2 }, &y).unwrap();
        let out = GroupElement::LorentzBoost { rapidity: chi, dim: 2 }.apply(&z).unwrap();
        // Plain 2x2 complex multiply, written out.
        let (z0, z1) = (c(0.0, 0.7), c(-1.3, 0.0));
        let e0 = c(ch, 0.0) * z0 + c(0.0, sh) * z1;
        let e1 = c(0.0, -sh) * z0 + c(ch, 0.0) * z1;
        assert!((out.0[0] - e0).norm() < 1e-14);
        assert!((out.0[1] - e1).norm() < 1e-14);
    }

    #[test]
    fn boost_rotation_is_complex_orthogonal() {
        assert!(boost_as_complex_rotation(0.7, 2).orthogonality_defect() < 1e-14);
        assert_eq!(boost_as_complex_rotation(0.0, 3).to_affine().0, DMatrix::identity(3, 3));
    }

    #[test]
    fn wick_embedding_commutes_with_boosts() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let slice = Slice::Minkowski { dim: 2 };
        let m = boost_as_complex_rotation(0.3, 2);
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let y = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
            let lhs = wick_embed(&slice, &lorentz_boost(&slice, 0.3, &y).unwrap()).unwrap();
            let rhs = m.apply(&wick_embed(&slice, &y).unwrap()).unwrap();
            worst = worst.max(lhs.distance(&rhs));
        }
        assert!(worst < 1e-12, "{worst}");
    }

    #[test]
    fn de_sitter_boost_commutes_on_hyperbola() {
        let slice = Slice::DeSitter { dim: 1, radius: 1.5 };
        let m = boost_as_complex_rotation(-0.8, 2);
        for t in [-1.0, 0.0, 0.3, 2.0] {
            let lhs = wick_embed(&slice, &lorentz_boost(&slice, -0.8, &[t]).unwrap()).unwrap();
            let rhs = m.apply(&wick_embed(&slice, &[t]).unwrap()).unwrap();
            assert!(lhs.distance(&rhs) < 1e-12);
            let zz = rhs.dot(&rhs);
            assert!((zz - c(2.25, 0.0)).norm() < 1e-10 * 2.25);
        }
    }

    #[test]
    fn wick_embedding_examples() {
        let mk = Slice::Minkowski { dim: 2 };
        assert_eq!(wick_embed(&mk, &[0.0, 3.5]).unwrap().0, vec![c(0.0, 0.0), c(3.5, 0.0)]);
        assert_eq!(wick_embed(&mk, &[2.0, 0.0]).unwrap().0, vec![c(0.0, 2.0), c(0.0, 0.0)]);
        let ds = Slice::DeSitter { dim: 1, radius: 1.0 };
        let z = wick_embed(&ds, &[0.0]).unwrap();
        assert_eq!(z.0, vec![c(0.0, 0.0), c(1.0, 0.0)]);
        assert_eq!(z.dot(&z), c(1.0, 0.0));
        assert!(matches!(
            wick_embed(&Slice::DeSitter { dim: 2, radius: 1.0 }, &[0.0]),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn time_reflection_is_conjugation_on_the_slice() {
        let mk = Slice::Minkowski { dim: 3 };
        let y = [0.4, 1.0, -2.0];
        let lhs = wick_embed(&mk, &time_reflection(&mk, &y).unwrap()).unwrap();
        assert_eq!(lhs, wick_embed(&mk, &y).unwrap().conj());
    }

    #[test]
    fn reflected_boost_conjugate_fixes_only_the_boost_axis() {
        let mk = Slice::Minkowski { dim: 2 };
        let origin = reflected_boost_conjugate(&mk, 0.5, &[0.0, 0.0]).unwrap();
        assert!(origin.iter().all(|v| v.abs() < 1e-15));
        let moved = reflected_boost_conjugate(&mk, 0.5, &[0.0, 1.0]).unwrap();
        assert!((moved[0] - 1.0f64.sinh()).abs() < 1e-12);
    }

    #[test]
    fn sphere_window_volume() {
        let w = Window::sphere(2, 2.0).unwrap();
        assert!((w.volume() - 4.0 * PI * 4.0).abs() < 1e-12);
        let w1 = Window::sphere(1, 1.0).unwrap();
        assert!((w1.volume() - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn invalid_windows_are_rejected() {
        assert!(Window::new_box(&[[1.0, 0.0]]).is_err());
        assert!(Window::sphere(1, -1.0).is_err());
        assert!(Space::euclidean(0).is_err());
    }

    #[test]
    fn sphere_samples_lie_on_the_sphere() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = Window::sphere(2, 1.7).unwrap();
        for _ in 0..100 {
            let x = w.sample_uniform(&mut rng);
            assert!(w.space().contains_point(&x));
        }
    }
}
