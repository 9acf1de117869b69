//! Acceptance criteria, one PASS/FAIL line each. Exits nonzero on any failure.

use std::f64::consts::PI;
use std::process::Command;
use std::time::{Duration, Instant};

use supfbm::cli::{bounds_sweep, ks_distance, manifest_path, RunManifest, CATALAN};
use supfbm::closed_form::{
    euler_number_bound_check, k_even_via_integral, k_exact_bm, k_exact_h1, k_odd_via_euler,
    Horizon, HurstExponent, MomentOrder,
};
use supfbm::fbm_sampler::GridSpec;
use supfbm::mc_estimator::{
    richardson_bias_estimate, scaling_check, sup_samples, verify_extrapolated, SupMode, Verdict,
};
use supfbm::special_functions::dirichlet_beta;
use supfbm::sup_distribution::{
    moment_by_quadrature, sup_abs_bm_tail, sup_bm_tail, SupAbsBmTail, DEFAULT_SERIES_TOLERANCE,
};
use supfbm::Result;

const N_FINE: usize = 1 << 14;
const N_REPS: u64 = 20_000;
const SEED: u64 = 42;

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
fn nested() -> [GridSpec; 3] {
    [grid(1 << 10), grid(1 << 12), grid(N_FINE)]
}

struct Outcome {
    ok: bool,
    detail: String,
}

fn outcome(ok: bool, detail: String) -> Result<Outcome> {
    Ok(Outcome { ok, detail })
}

fn criterion_1() -> Result<Outcome> {
    let a = k_exact_bm(t(1.0), g(1.0))?;
    let b = k_exact_bm(t(0.5), g(2.0))?;
    let ea = (a - (PI / 2.0).sqrt()).abs();
    let eb = (b - CATALAN).abs();
    outcome(
        ea <= 1e-11 && eb <= 1e-10,
        format!("K_1(1/2,1) err {ea:.1e}, K_1/2(1/2,2) - Catalan err {eb:.1e}"),
    )
}

fn criterion_2() -> Result<Outcome> {
    let mut worst_odd = 0.0f64;
    for n in 0..=6u32 {
        let exact = k_exact_bm(t(1.0), g((2 * n + 1) as f64))?;
        worst_odd = worst_odd.max((k_odd_via_euler(n) - exact).abs());
    }
    let mut worst_even = 0.0f64;
    for n in 1..=4u32 {
        let exact = k_exact_bm(t(1.0), g((2 * n) as f64))?;
        worst_even = worst_even.max((k_even_via_integral(n)? - exact).abs());
    }
    let mut bound_failures = 0;
    for n in 1..=10 {
        if !euler_number_bound_check(n)?.holds {
            bound_failures += 1;
        }
    }
    outcome(
        worst_odd <= 1e-10 && worst_even <= 1e-6 && bound_failures == 0,
        format!(
            "odd max err {worst_odd:.1e}, even max err {worst_even:.1e}, \
             Euler inequality failures {bound_failures}/10"
        ),
    )
}

fn criterion_3() -> Result<Outcome> {
    let doubled = bounds_sweep(|b, _, _| b.upper == Some(2.0 * b.lower))?;
    let brownian = bounds_sweep(|b, h, _| {
        !h.is_brownian() || b.exact.is_some_and(|e| b.lower <= e && Some(e) <= b.upper)
    })?;
    let degenerate = bounds_sweep(|b, h, _| {
        !h.is_degenerate() || b.exact.is_some_and(|e| (e - b.lower).abs() <= 1e-12)
    })?;
    let mut beta_failures = 0;
    for gamma in [0.5, 1.0, 2.0, 3.0] {
        let two_beta = 2.0 * dirichlet_beta(gamma)?;
        if !(1.0..=2.0).contains(&two_beta) {
            beta_failures += 1;
        }
    }
    outcome(
        doubled + brownian + degenerate + beta_failures == 0,
        format!(
            "72 cases: upper!=2*lower {doubled}, H=1/2 exact outside {brownian}, \
             H=1 exact!=lower {degenerate}, 2*beta outside [1,2] {beta_failures}"
        ),
    )
}

fn criterion_4() -> Result<Outcome> {
    let mut worst = 0.0f64;
    for gamma in [0.5, 1.0, 2.0, 3.0, 5.0] {
        let q = moment_by_quadrature(g(gamma), &SupAbsBmTail::default())?;
        worst = worst.max((q - k_exact_bm(t(1.0), g(gamma))?).abs());
    }
    outcome(
        worst <= 1e-7,
        format!("max |quadrature - exact| {worst:.1e}"),
    )
}

fn criterion_5() -> Result<Outcome> {
    let exact = 1.2533141373;
    let r = richardson_bias_estimate(h(0.5), g(1.0), nested(), N_REPS, SEED, SupMode::Reflected)?;
    let rel_grid = (r.finest.point - exact).abs() / exact;
    let rel_extr = (r.extrapolated - exact).abs() / exact;
    outcome(
        rel_grid <= 0.01 && rel_extr <= 0.005,
        format!(
            "grid {:.6} ({:.3}%), extrapolated {:.6} ({:.3}%), stderr {:.4}",
            r.finest.point,
            100.0 * rel_grid,
            r.extrapolated,
            100.0 * rel_extr,
            r.finest.stderr
        ),
    )
}

fn criterion_6() -> Result<Outcome> {
    let exact = (2.0 / PI).sqrt();
    let r = richardson_bias_estimate(h(1.0), g(1.0), nested(), N_REPS, SEED, SupMode::Reflected)?;
    let e = &r.finest;
    let max_bias = r.bias_per_grid.iter().fold(0.0f64, |m, b| m.max(b.abs()));
    let within = (e.point - exact).abs() <= 3.0 * e.stderr;
    outcome(
        within && max_bias < 1e-12 && (k_exact_h1(t(1.0), g(1.0))? - exact).abs() < 1e-15,
        format!(
            "estimate {:.6} vs {exact:.6} ({:.2} stderr), max |bias_per_grid| {max_bias:.1e}",
            e.point,
            (e.point - exact).abs() / e.stderr
        ),
    )
}

fn criterion_7() -> Result<Outcome> {
    let mut failures = Vec::new();
    let mut min_slack = f64::INFINITY;
    for hv in [0.3, 0.4, 0.6, 0.7, 0.8] {
        for gv in [1.0, 2.0] {
            let (_, v) = verify_extrapolated(h(hv), g(gv), nested(), N_REPS, SEED)?;
            let expect_upper = hv >= 0.5;
            if v.verdict != Verdict::Consistent || v.bounds.upper.is_some() != expect_upper {
                failures.push(format!("H={hv} gamma={gv}: {:?}", v.verdict));
            }
            min_slack = min_slack.min(v.slack);
        }
    }
    outcome(
        failures.is_empty(),
        format!(
            "10 cases, {} inconsistent, smallest slack {min_slack:.4}{}",
            failures.len(),
            if failures.is_empty() {
                String::new()
            } else {
                format!(": {}", failures.join("; "))
            }
        ),
    )
}

fn criterion_8() -> Result<Outcome> {
    let s = scaling_check(
        h(0.7),
        g(1.0),
        t(1.0),
        t(2.0),
        N_FINE / 2,
        N_REPS,
        SEED,
        SupMode::Reflected,
    )?;
    let d = scaling_check(
        h(1.0),
        g(2.0),
        t(1.0),
        t(2.0),
        1024,
        N_REPS,
        SEED,
        SupMode::Reflected,
    )?;
    let ratio_err = (d.observed_ratio - 4.0).abs();
    outcome(
        s.deviation.abs() <= 3.0 * s.stderr && ratio_err < 1e-12,
        format!(
            "H=0.7 deviation {:.5} (SE {:.5}), H=1 ratio - 4 = {ratio_err:.1e}",
            s.deviation, s.stderr
        ),
    )
}

fn criterion_9() -> Result<Outcome> {
    let mut sandwich_failures = 0;
    for i in 1..=100 {
        let x = 0.04 * i as f64;
        let one = sup_bm_tail(x)?;
        let abs = sup_abs_bm_tail(x, DEFAULT_SERIES_TOLERANCE)?;
        if !(one <= abs && abs <= 2.0 * one) {
            sandwich_failures += 1;
        }
    }
    let mut maxima = sup_samples(h(0.5), grid(N_FINE), 100_000, SEED, SupMode::Reflected)?;
    let ks = ks_distance(&mut maxima, |x| {
        sup_abs_bm_tail(x, DEFAULT_SERIES_TOLERANCE).unwrap_or(f64::NAN)
    });
    outcome(
        sandwich_failures == 0 && ks < 0.01,
        format!("sandwich failures {sandwich_failures}/100, KS distance {ks:.5}"),
    )
}

fn criterion_10() -> Result<Outcome> {
    let dir = tempfile::tempdir()?;
    let mut manifests = Vec::new();
    let mut bodies = Vec::new();
    for threads in ["1", "8"] {
        let out = dir.path().join(format!("estimate_{threads}.json"));
        let status = Command::new(env!("CARGO_BIN_EXE_supfbm"))
            .args(["estimate", "--hurst", "0.7", "--t", "1", "--gamma", "1"])
            .args(["--seed", "42", "--threads", threads, "--out"])
            .arg(&out)
            .env_remove("SUPFBM_THREADS")
            .status()?;
        if !status.success() {
            return outcome(
                false,
                format!("estimate with --threads {threads} exited {status}"),
            );
        }
        manifests.push(RunManifest::read(&manifest_path(&out))?);
        bodies.push(std::fs::read(&out)?);
    }
    let same_params = manifests[0].parameters == manifests[1].parameters;
    let same_digest = manifests[0].results_digest == manifests[1].results_digest;
    outcome(
        same_params && same_digest && bodies[0] == bodies[1],
        format!(
            "digests {} / {}",
            &manifests[0].results_digest[..16],
            &manifests[1].results_digest[..16]
        ),
    )
}

type Criterion = (u32, &'static str, Duration, fn() -> Result<Outcome>);

fn main() {
    let criteria: [Criterion; 10] = [
        (
            1,
            "closed-form self-consistency",
            Duration::from_secs(1),
            criterion_1,
        ),
        (2, "identity suite", Duration::from_secs(10), criterion_2),
        (3, "bound structure", Duration::from_secs(1), criterion_3),
        (
            4,
            "quadrature of the Brownian tail",
            Duration::from_secs(10),
            criterion_4,
        ),
        (
            5,
            "Monte-Carlo vs exact at H=1/2",
            Duration::from_secs(300),
            criterion_5,
        ),
        (
            6,
            "Monte-Carlo vs exact at H=1",
            Duration::from_secs(60),
            criterion_6,
        ),
        (
            7,
            "bound verification for H != 1/2, 1",
            Duration::from_secs(900),
            criterion_7,
        ),
        (
            8,
            "self-similar scaling",
            Duration::from_secs(300),
            criterion_8,
        ),
        (
            9,
            "distribution sandwich and KS",
            Duration::from_secs(300),
            criterion_9,
        ),
        (
            10,
            "thread-count determinism",
            Duration::from_secs(600),
            criterion_10,
        ),
    ];
    let mut failed = 0;
    for (id, name, budget, run) in criteria {
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let (ok, detail) = match result {
            Ok(o) => (o.ok && elapsed <= budget, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "criterion {id:>2} {}: {name}: {detail} [{:.2}s, budget {}s]",
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!("acceptance: {} of 10 criteria passed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
