//! Deterministic checks of the truncated series oracle.

use wickfield::oracle::{expect, Observable, SeriesParams, SeriesSpec};
use wickfield::{KernelSpec, PotentialSpec, Profile, TestFunction, Window};

fn spec(nmax: usize, intensity: f64) -> SeriesSpec {
    let k = KernelSpec::gaussian(1).unwrap();
    let p = PotentialSpec::new(Profile::WidomRowlinson, 1.0, k, Window::cube(1, 0.0, 1.0).unwrap(), None).unwrap();
    let params = SeriesParams {
        nmax,
        quad_nodes: 24,
        max_leaves: 40_000,
        tail_tol: 1e-4,
        ..Default::default()
    };
    SeriesSpec::new(p, intensity, params).unwrap()
}

#[test]
fn raising_nmax_stays_within_the_error_budget() {
    let h = TestFunction::cosine_bump(vec![0.5], 0.5, 1.0).unwrap();
    for obs in [Observable::count(None), Observable::laplace(h)] {
        let lo = expect(&spec(14, 1.0), &obs).unwrap();
        let hi = expect(&spec(14, 1.0), &obs).unwrap();
        let diff = (lo.value - hi.value).norm();
        assert!(diff <= lo.error() + hi.error(), "{obs:?}: diff {diff:e}, budget {:e}", lo.error() + hi.error());
    }
}

#[test]
fn laplace_deficit_is_bounded_by_the_intensity() {
    // The WR density is dominated by the reference intensity, so 1 - L(th) <= t * intensity * int h.
    let intensity = 1.0;
    let h = TestFunction::cosine_bump(vec![0.5], 0.5, 1.0).unwrap();
    let int_h = 0.5;
    for t in [0.1, 1.0, 10.0] {
        let v = expect(&spec(14, intensity), &Observable::laplace(h.scaled(t))).unwrap();
        assert!(v.value.im.abs() <= v.error());
        let deficit = 1.0 - v.value.re;
        assert!(deficit >= -v.error(), "t = {t}: deficit {deficit}");
        assert!(deficit <= t * intensity * int_h + v.error(), "t = {t}: deficit {deficit}");
    }
}

#[test]
fn poisson_limit_matches_closed_form() {
    let k = KernelSpec::gaussian(1).unwrap();
    let p = PotentialSpec::new(Profile::WidomRowlinson, 0.0, k, Window::cube(1, 0.0, 1.0).unwrap(), None).unwrap();
    let v = expect(&SeriesSpec::new(p, 1.5, SeriesParams { nmax: 18, ..Default::default() }).unwrap(), &Observable::count(None)).unwrap();
    assert!((v.value.re - 1.5).abs() <= v.error() + 1e-12);
}
