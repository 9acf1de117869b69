use std::f64::consts::PI;

use supfbm::cli::CATALAN;
use supfbm::closed_form::{k_bounds, Horizon, HurstExponent, MomentOrder};
use supfbm::fbm_sampler::GridSpec;
use supfbm::mc_estimator::{
    estimate_sup_moment, richardson_bias_estimate, scaling_check, verify_against_bounds, SupMode,
    Verdict,
};

fn h(v: f64) -> HurstExponent {
    HurstExponent::new(v).unwrap()
}
fn g(v: f64) -> MomentOrder {
    MomentOrder::new(v).unwrap()
}
fn t(v: f64) -> Horizon {
    Horizon::new(v).unwrap()
}
fn grid(n: usize) -> GridSpec {
    GridSpec::new(n, t(1.0)).unwrap()
}

#[test]
fn brownian_reflected_and_one_sided_at_default_size() {
    let reflected = estimate_sup_moment(
        h(0.5),
        g(1.0),
        grid(1 << 14),
        20_000,
        42,
        SupMode::Reflected,
    )
    .unwrap();
    assert!(
        (reflected.point - (PI / 2.0).sqrt()).abs() < 0.013,
        "{reflected:?}"
    );
    let one_sided =
        estimate_sup_moment(h(0.5), g(1.0), grid(1 << 14), 20_000, 42, SupMode::OneSided).unwrap();
    assert!(
        (one_sided.point - (2.0 / PI).sqrt()).abs() < 0.013,
        "{one_sided:?}"
    );
    assert!(one_sided.point <= reflected.point);

    let bounds = k_bounds(h(0.5), t(1.0), g(1.0)).unwrap();
    let v = verify_against_bounds(&reflected, &bounds, 0.0).unwrap();
    assert_eq!(v.verdict, Verdict::Consistent);
}

#[test]
fn rough_case_extrapolation_clears_lower_bound() {
    let grids = [grid(1 << 10), grid(1 << 12), grid(1 << 14)];
    let r = richardson_bias_estimate(h(0.3), g(1.0), grids, 4_000, 42, SupMode::Reflected).unwrap();
    assert!(r.extrapolated >= 0.7979, "{r:?}");
    // rough paths: the grid maximum keeps growing with n
    assert!(r.points[0] < r.points[1] && r.points[1] < r.points[2]);
    assert!(r.bias_per_grid[0] > r.bias_per_grid[2]);
    assert!(!r.non_monotone);
}

#[test]
fn scaling_from_half_horizon_to_one() {
    let s = scaling_check(
        h(0.5),
        g(2.0),
        t(0.5),
        t(1.0),
        8192,
        20_000,
        42,
        SupMode::Reflected,
    )
    .unwrap();
    assert!((s.expected_ratio - 2.0).abs() < 1e-15);
    assert!(s.passes, "{s:?}");
    assert!((s.observed_ratio - 2.0).abs() < 3.0 * s.stderr * 2.0 + 1e-12);
    // grid maximum squared on 8192 steps sits about 1% low
    let p = &s.point_t1;
    assert!(p.point <= CATALAN + 3.0 * p.stderr, "{p:?}");
    assert!(p.point >= 0.98 * CATALAN - 3.0 * p.stderr, "{p:?}");
}
