//! End-to-end acceptance checks. Runs as a plain binary so that every
//! criterion reports one `PASS`/`FAIL` line even when an earlier one fails.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use kepler_averaging::averaging::{AveragedFunction, CriticalPoint, PredictedClass};
use kepler_averaging::circular::{m_matrix, CircularReport};
use kepler_averaging::config::RunConfig;
use kepler_averaging::continuation::{
    continue_branch, default_eps_grid, geometric_grid, Branch, ContinuationConfig,
};
use kepler_averaging::flow::{monodromy_in_poincare, period_map, IntegratorConfig};
use kepler_averaging::forcing::{ForcingModel, ForcingSpec, FourierSpectrum};
use kepler_averaging::kepler::{
    cartesian_to_poincare, circular_state, poincare_jet_circular, poincare_to_cartesian,
    poincare_to_cartesian_jacobian, PoincareState,
};
use kepler_averaging::pipeline::run_continue;
use kepler_averaging::symplectic::{
    classify_local, eigen_pairing, j4, linear_lift, lower_shear, remark_one, remark_two,
    rotation_pair, spectral_verdict, symplectic_defect, trace_det_verdict, upper_shear, Mat4,
    Monodromy4, SpectralTolerances, StabilityClass,
};
use nalgebra::{Matrix2, Matrix3, Vector3};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = std::result::Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn lambda_n(n: i64) -> f64 {
    (n as f64).powf(-1.0 / 3.0)
}

// ---- independent oracles ----

/// Closed-form `D²γ_N(λ*, 0, 0)` on the manifold `c₀ = c_{2N} = 0`.
fn block_hessian(n: i64, cn: Complex64, cneg: Complex64, c3n: Complex64) -> Matrix3<f64> {
    let r = cn.norm();
    let u = cn * cneg / r;
    let v = 3.0 * cn.conj().powu(3) / r.powi(3) * c3n;
    let m = Matrix2::new(
        r + 0.25 * (u + v).re,
        0.25 * (u - v).im,
        0.25 * (u - v).im,
        r - 0.25 * (u + v).re,
    );
    let l = lambda_n(n);
    let mut h = Matrix3::zeros();
    h[(0, 0)] = l * l * r;
    h.fixed_view_mut::<2, 2>(1, 1).copy_from(&(m * l));
    h
}

fn tau_oracle(n: i64) -> f64 {
    -6.0 * PI * (n as f64).powf(4.0 / 3.0)
}

fn line_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    (my - sxy / sxx * mx, sxy / sxx)
}

// ---- shared branch data ----

struct Family {
    sign: i8,
    predicted: PredictedClass,
    hessian: Matrix3<f64>,
    branch: Result<Branch, String>,
}

struct Sweep {
    a: f64,
    report: CircularReport,
    families: Vec<Family>,
    elapsed: Duration,
}

fn sweep(a: f64, eps: &[f64]) -> Result<Sweep, String> {
    let start = Instant::now();
    let spectrum = FourierSpectrum::two_wave(1, Complex64::new(a, 0.0));
    let report = m_matrix(&spectrum, 1).map_err(|e| e.to_string())?;
    let f = ForcingModel::linear(spectrum);
    let avg = AveragedFunction::new(1, f.clone()).map_err(|e| e.to_string())?;
    let cfg = ContinuationConfig::default();
    let families = report
        .family_predictions
        .iter()
        .map(|fam| {
            let (g, h) = avg
                .gamma_gradient_hessian(fam.lambda, 0.0, 0.0)
                .map_err(|e| e.to_string())?;
            let cp = CriticalPoint::new(Vector3::new(fam.lambda, 0.0, 0.0), g, h);
            Ok(Family {
                sign: fam.sign,
                predicted: fam.class,
                hessian: h,
                branch: continue_branch(&f, &cp, 1, eps, &cfg).map_err(|e| e.to_string()),
            })
        })
        .collect::<Result<Vec<_>, String>>()?;
    Ok(Sweep {
        a,
        report,
        families,
        elapsed: start.elapsed(),
    })
}

fn min_distance_from_pm_one(s: &kepler_averaging::symplectic::SpectralSummary) -> f64 {
    s.eigenvalues
        .iter()
        .map(|m| (m - 1.0).norm().min((m + 1.0).norm()))
        .fold(f64::INFINITY, f64::min)
}

fn check_elliptic(b: &Branch, tol_eig: f64) -> Check {
    ensure!(!b.truncated, "branch truncated: {:?}", b.failure);
    for p in &b.points {
        let s = &p.monodromy_summary;
        ensure!(
            s.class == StabilityClass::Elliptic,
            "eps {:.2e}: {}",
            p.eps,
            s.class
        );
        ensure!(
            s.max_modulus_deviation() <= tol_eig,
            "eps {:.2e}: | |mu|-1 | = {:.2e}",
            p.eps,
            s.max_modulus_deviation()
        );
        ensure!(
            min_distance_from_pm_one(s) > tol_eig,
            "eps {:.2e}: multiplier at +-1",
            p.eps
        );
    }
    Ok(format!("elliptic at {} eps", b.points.len()))
}

fn check_unstable(b: &Branch, tol_eig: f64) -> Check {
    ensure!(!b.truncated, "branch truncated: {:?}", b.failure);
    let mut least = f64::INFINITY;
    for p in &b.points {
        let s = &p.monodromy_summary;
        ensure!(s.class.is_unstable(), "eps {:.2e}: {}", p.eps, s.class);
        let excess = s
            .real_multiplier_excess(tol_eig)
            .unwrap_or(f64::NEG_INFINITY);
        ensure!(
            excess > 10.0 * tol_eig,
            "eps {:.2e}: real excess {excess:.2e}",
            p.eps
        );
        least = least.min(excess);
    }
    Ok(format!(
        "unstable at {} eps, min |mu|-1 = {least:.2e}",
        b.points.len()
    ))
}

// ---- criteria ----

fn headline(sweeps: &[Sweep]) -> Check {
    let tol_eig = ContinuationConfig::default().spectral.tol_eig;
    let mut notes = Vec::new();
    for s in sweeps {
        ensure!(
            s.elapsed < Duration::from_secs(60),
            "a = {}: took {:?}",
            s.a,
            s.elapsed
        );
        for fam in &s.families {
            let b = fam
                .branch
                .as_ref()
                .map_err(|e| format!("a = {} sign {}: {e}", s.a, fam.sign))?;
            let elliptic = s.a.abs() < 4.0 && fam.sign > 0;
            let expected = if elliptic {
                PredictedClass::Elliptic
            } else {
                PredictedClass::Unstable
            };
            ensure!(
                fam.predicted == expected,
                "a = {} sign {:+}: predicted {}",
                s.a,
                fam.sign,
                fam.predicted
            );
            let r = if elliptic {
                check_elliptic(b, tol_eig)
            } else {
                check_unstable(b, tol_eig)
            };
            r.map_err(|e| format!("a = {} sign {:+}: {e}", s.a, fam.sign))?;
        }
        notes.push(format!("a={} {:.2}s", s.a, s.elapsed.as_secs_f64()));
    }
    Ok(notes.join(", "))
}

fn monodromy_limit() -> Check {
    let zero = ForcingModel::linear(FourierSpectrum::new());
    let cfg = IntegratorConfig::default();
    let mut worst: f64 = 0.0;
    for n in 1..=3 {
        for lambda in [0.0, 1.3, 4.4] {
            let s0 = circular_state(lambda, lambda_n(n));
            let (s1, dpi) = period_map(&zero, 0.0, &s0, &cfg).map_err(|e| e.to_string())?;
            ensure!(s1.distance(&s0) < 1e-9, "N = {n}: orbit not closed");
            let pm = monodromy_in_poincare(&dpi, &s0).map_err(|e| e.to_string())?;
            let mut want = Mat4::identity();
            want[(0, 2)] = tau_oracle(n);
            let err = (pm.entries() - want).abs().max();
            ensure!(
                err < 1e-5,
                "N = {n}, lambda = {lambda}: entrywise error {err:.2e}"
            );
            worst = worst.max(err);
        }
    }
    Ok(format!("max entrywise error {worst:.2e}"))
}

fn fit_points(b: &Branch) -> Vec<(f64, f64, f64)> {
    b.points
        .iter()
        .filter(|p| p.eps >= 3e-4 && p.eps <= 1e-2 * (1.0 + 1e-12))
        .map(|p| {
            (
                p.eps,
                p.monodromy_summary.det_s_minus_i,
                p.monodromy_summary.trace,
            )
        })
        .collect()
}

fn det_expansion(s: &Sweep) -> Check {
    let fam = &s.families[0];
    let b = fam.branch.as_ref().map_err(|e| e.clone())?;
    let h_block = block_hessian(1, s.report.c_n, s.report.c_neg_n, s.report.c_3n);
    let det_avg = fam.hessian.determinant();
    let det_block = h_block.determinant();
    ensure!(
        ((det_avg - det_block) / det_block).abs() < 1e-6,
        "det D2gamma: averaging {det_avg:e} vs block {det_block:e}"
    );
    let pts = fit_points(b);
    ensure!(pts.len() >= 4, "only {} points in range", pts.len());
    ensure!(pts.iter().all(|p| p.1 > 0.0), "det(S - I) changes sign");
    let lx: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ly: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let (_, slope) = line_fit(&lx, &ly);
    ensure!((slope - 3.0).abs() <= 0.1, "slope {slope}");
    let x: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let scaled: Vec<f64> = pts.iter().map(|p| p.1 / p.0.powi(3)).collect();
    let (intercept, _) = line_fit(&x, &scaled);
    let want = -tau_oracle(1) * (2.0 * PI).powi(3) * det_avg;
    let rel = ((intercept - want) / want).abs();
    ensure!(rel < 0.1, "intercept {intercept:e} vs {want:e}");
    Ok(format!(
        "slope {slope:.3}, intercept {intercept:.4e} vs {want:.4e} (rel {rel:.1e})"
    ))
}

fn trace_expansion(s: &Sweep) -> Check {
    let mut notes = Vec::new();
    for fam in &s.families {
        let b = fam.branch.as_ref().map_err(|e| e.clone())?;
        let pts = fit_points(b);
        ensure!(pts.len() >= 4, "only {} points in range", pts.len());
        let x: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let scaled: Vec<f64> = pts.iter().map(|p| (p.2 - 4.0) / p.0).collect();
        let (coef, _) = line_fit(&x, &scaled);
        let h_second = -3.0;
        let want = 4.0 * PI * PI * h_second * fam.hessian[(0, 0)];
        ensure!(
            coef.signum() == want.signum(),
            "sign {:+}: got {coef:e}, want {want:e}",
            fam.sign
        );
        let rel = ((coef - want) / want).abs();
        ensure!(rel < 0.05, "sign {:+}: {coef:e} vs {want:e}", fam.sign);
        notes.push(format!("{:+}: {coef:.4} vs {want:.4}", fam.sign));
    }
    Ok(notes.join(", "))
}

fn random_poincare(rng: &mut ChaCha8Rng, max_x: f64) -> PoincareState {
    let big_lambda = rng.gen_range(0.5..2.0);
    let rho2 = rng.gen_range(0.0..max_x) * big_lambda;
    let h = rng.gen_range(0.0..2.0 * PI);
    PoincareState::new(
        rng.gen_range(0.0..2.0 * PI),
        big_lambda,
        rho2.sqrt() * h.sin(),
        rho2.sqrt() * h.cos(),
    )
}

fn chart() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_c4a7);
    let mut worst_trip: f64 = 0.0;
    for k in 0..1000 {
        let mut p = random_poincare(&mut rng, 1.2);
        if k % 10 == 0 {
            let h = rng.gen_range(0.0..2.0 * PI);
            p.eta = 1e-3 * h.sin();
            p.xi = 1e-3 * h.cos();
        }
        let s = poincare_to_cartesian(&p).map_err(|e| e.to_string())?;
        let back = cartesian_to_poincare(&s).map_err(|e| e.to_string())?;
        let s2 = poincare_to_cartesian(&back).map_err(|e| e.to_string())?;
        let err = p.distance(&back).max(s.distance(&s2));
        ensure!(err < 1e-10, "round trip error {err:e} at {p:?}");
        worst_trip = worst_trip.max(err);
    }
    let mut worst_defect: f64 = 0.0;
    for k in 0..200 {
        let mut p = random_poincare(&mut rng, 0.6);
        if k % 2 == 0 {
            let h = rng.gen_range(0.0..2.0 * PI);
            p.eta = 1e-3 * h.sin();
            p.xi = 1e-3 * h.cos();
        }
        let fd = |h: f64| poincare_to_cartesian_jacobian(&p, h).map_err(|e| e.to_string());
        let d = (fd(5e-5)? * 4.0 - fd(1e-4)?) / 3.0;
        let defect = symplectic_defect(&d);
        ensure!(defect < 1e-7, "Jacobian defect {defect:e} at {p:?}");
        worst_defect = worst_defect.max(defect);
    }
    let worst_jet = jets_vs_differences(&mut rng)?;
    Ok(format!(
        "round trip {worst_trip:.1e}, Jacobian defect {worst_defect:.1e}, jets rel {worst_jet:.1e}"
    ))
}

fn jets_vs_differences(rng: &mut ChaCha8Rng) -> Result<f64, String> {
    let pos = |v: [f64; 4]| -> Result<Complex64, String> {
        poincare_to_cartesian(&PoincareState::new(v[0], v[1], v[2], v[3]))
            .map(|s| s.position())
            .map_err(|e| e.to_string())
    };
    let vel = |v: [f64; 4]| -> Result<Complex64, String> {
        poincare_to_cartesian(&PoincareState::new(v[0], v[1], v[2], v[3]))
            .map(|s| s.velocity())
            .map_err(|e| e.to_string())
    };
    // (λ, Λ, η, ξ) offsets for the jet's (λ, η, ξ) directions
    let dir = |k: usize, h: f64| match k {
        0 => [h, 0.0, 0.0, 0.0],
        1 => [0.0, 0.0, h, 0.0],
        _ => [0.0, 0.0, 0.0, h],
    };
    let add = |a: [f64; 4], b: [f64; 4]| [a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]];
    let neg = |a: [f64; 4]| [-a[0], -a[1], -a[2], -a[3]];
    let first = |g: &dyn Fn([f64; 4]) -> Result<Complex64, String>, base: [f64; 4], k: usize| {
        let d = |h: f64| -> Result<Complex64, String> {
            Ok((g(add(base, dir(k, h)))? - g(add(base, neg(dir(k, h))))?) / (2.0 * h))
        };
        Ok::<_, String>((4.0 * d(5e-4)? - d(1e-3)?) / 3.0)
    };
    let second = |base: [f64; 4], k: usize, m: usize| {
        let d = |h: f64| -> Result<Complex64, String> {
            let (u, v) = (dir(k, h), dir(m, h));
            Ok((pos(add(add(base, u), v))?
                - pos(add(add(base, u), neg(v)))?
                - pos(add(add(base, neg(u)), v))?
                + pos(add(add(base, neg(u)), neg(v)))?)
                / (4.0 * h * h))
        };
        Ok::<_, String>((4.0 * d(1e-3)? - d(2e-3)?) / 3.0)
    };
    let rel =
        |got: Complex64, want: Complex64, scale: f64| (got - want).norm() / want.norm().max(scale);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let lambda = rng.gen_range(0.0..2.0 * PI);
        let big_lambda = rng.gen_range(0.6..1.6);
        let jet = poincare_jet_circular(lambda, big_lambda);
        let base = [lambda, big_lambda, 0.0, 0.0];
        let scale = big_lambda.powi(2);
        for k in 0..3 {
            worst = worst.max(rel(first(&pos, base, k)?, jet.dx[k], scale));
            worst = worst.max(rel(first(&vel, base, k)?, jet.dy[k], 1.0 / big_lambda));
            for m in 0..3 {
                worst = worst.max(rel(second(base, k, m)?, jet.d2x[k][m], scale));
            }
        }
    }
    ensure!(worst < 1e-6, "jet mismatch {worst:e}");
    Ok(worst)
}

fn random_symplectic(rng: &mut ChaCha8Rng) -> Mat4 {
    let mut q = Mat4::identity();
    for _ in 0..rng.gen_range(2..5) {
        let kind = rng.gen_range(0..4);
        let mut c = || rng.gen_range(-0.8..0.8);
        let f = match kind {
            0 => upper_shear(c(), c(), c()),
            1 => lower_shear(c(), c(), c()),
            2 => rotation_pair(c() * 4.0, c() * 4.0),
            _ => {
                let a = Matrix2::new(1.0 + c() * 0.5, c() * 0.5, c() * 0.5, 1.0 + c() * 0.5);
                linear_lift(a).unwrap_or_else(Mat4::identity)
            }
        };
        q *= f;
    }
    q
}

/// Direct sum of two `2 × 2` symplectic blocks: rotations or boosts.
fn normal_form(rng: &mut ChaCha8Rng) -> Mat4 {
    let mut d = Mat4::zeros();
    for k in 0..2 {
        let (a, b, c, e) = match rng.gen_range(0..3) {
            0 | 1 => {
                let th = rng.gen_range(0.02..PI - 0.02);
                let (s, co) = th.sin_cos();
                (co, s, -s, co)
            }
            _ => {
                let mu = rng.gen_range(1.05..3.0) * if rng.gen_bool(0.85) { 1.0 } else { -1.0 };
                (mu, 0.0, 0.0, 1.0 / mu)
            }
        };
        d[(k, k)] = a;
        d[(k, k + 2)] = b;
        d[(k + 2, k)] = c;
        d[(k + 2, k + 2)] = e;
    }
    d
}

fn random_suite() -> Vec<Mat4> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xc1a5_5e5);
    (0..1000)
        .map(|k| {
            if k % 2 == 0 {
                let q = random_symplectic(&mut rng);
                let q_inv = -j4() * q.transpose() * j4();
                q * normal_form(&mut rng) * q_inv
            } else {
                random_symplectic(&mut rng)
            }
        })
        .collect()
}

fn classifier(suite: &[Mat4]) -> Check {
    let tol = SpectralTolerances::default();
    let mut counts = [0usize; 3];
    let mut compared = 0;
    for (i, s) in suite.iter().enumerate() {
        let m = Monodromy4::new(*s);
        let sum = eigen_pairing(&m, &tol).map_err(|e| format!("sample {i}: {e}"))?;
        let real = sum.deltas_real(1e-9);
        let positive = sum.delta1.re > 0.0 && sum.delta2.re > 0.0;
        let margins = min_distance_from_pm_one(&sum) > 10.0 * tol.tol_eig
            && sum.det_s_minus_i.abs() > 10.0 * tol.tol_det
            && sum.eigenvalues.iter().all(|mu| {
                let d = (mu.norm() - 1.0).abs();
                d <= tol.tol_eig || d > 10.0 * tol.tol_eig
            });
        if !(real && positive && margins) {
            continue;
        }
        let by_trace = trace_det_verdict(sum.det_s_minus_i, sum.trace, tol.tol_det);
        let by_spectrum = spectral_verdict(&sum.eigenvalues, tol.tol_eig);
        ensure!(
            Some(by_trace) == by_spectrum,
            "sample {i}: trace/det {by_trace} vs spectrum {by_spectrum:?}"
        );
        let local = classify_local(&m, 0.0, &tol)
            .map_err(|e| e.to_string())?
            .class;
        ensure!(local == by_trace, "sample {i}: classify_local {local}");
        counts[match by_trace {
            StabilityClass::Elliptic => 0,
            StabilityClass::Hyperbolic => 1,
            _ => 2,
        }] += 1;
        compared += 1;
    }
    ensure!(compared >= 300, "only {compared} samples passed the filter");
    ensure!(
        counts.iter().all(|&c| c >= 30),
        "class coverage too thin: {counts:?}"
    );
    for eps in [0.05, 0.1, 0.2] {
        let c = classify_local(&Monodromy4::new(remark_one(eps)), 0.0, &tol)
            .map_err(|e| e.to_string())?
            .class;
        ensure!(
            c == StabilityClass::OutsideLocalChart,
            "S_eps at {eps}: {c}"
        );
    }
    let mut remark_two_n = 0;
    for eps in [0.05, 0.1, 0.3, 0.7, 1.0, 1.4, 1.7] {
        assert!(eps * eps < PI);
        // det(ℰ_ε − I) = (2 − 2cos ε²)², far below the default floor for small ε
        let scaled = SpectralTolerances {
            tol_det: tol
                .tol_det
                .min(0.01 * (2.0 - 2.0 * (eps * eps).cos()).powi(2)),
            ..tol
        };
        for tau in [1.0, -1.0, tau_oracle(1)] {
            let c = classify_local(&Monodromy4::new(remark_two(eps, tau)), 0.0, &scaled)
                .map_err(|e| e.to_string())?
                .class;
            ensure!(
                c == StabilityClass::Elliptic,
                "E_eps at eps {eps}, tau {tau}: {c}"
            );
            remark_two_n += 1;
        }
    }
    Ok(format!(
        "{compared}/{} agree (elliptic {}, hyperbolic {}, mixed {}); fixtures ok ({remark_two_n} elliptic)",
        suite.len(),
        counts[0],
        counts[1],
        counts[2]
    ))
}

fn identities(suite: &[Mat4]) -> Check {
    let tol = SpectralTolerances::default();
    let mut worst: f64 = 0.0;
    for (i, s) in suite.iter().enumerate() {
        let m = Monodromy4::new(*s);
        let sum = eigen_pairing(&m, &tol).map_err(|e| format!("sample {i}: {e}"))?;
        let tr = s.trace();
        let det = (s - Mat4::identity()).determinant();
        let two = Complex64::new(2.0, 0.0);
        let e_tr = (sum.delta1 + sum.delta2 - tr).norm() / tr.abs().max(1.0);
        let e_det = ((two - sum.delta1) * (two - sum.delta2) - det).norm() / det.abs().max(1.0);
        ensure!(
            e_tr < 1e-9 && e_det < 1e-9,
            "sample {i}: trace err {e_tr:e}, det err {e_det:e}"
        );
        worst = worst.max(e_tr).max(e_det);
    }
    Ok(format!(
        "{} matrices, max relative error {worst:.1e}",
        suite.len()
    ))
}

fn averaging_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0xa7e2_a6e);
    let mut worst: f64 = 0.0;
    for k in 0..5 {
        let n: i64 = rng.gen_range(1..=3);
        let mut c =
            |lo: f64| Complex64::from_polar(rng.gen_range(lo..1.5), rng.gen_range(0.0..2.0 * PI));
        let (cn, cneg, c3n) = (c(0.5), c(0.0), c(0.0));
        let spectrum = FourierSpectrum::from_terms([(n, cn), (-n, cneg), (3 * n, c3n)]);
        let want = block_hessian(n, cn, cneg, c3n);
        let avg = AveragedFunction::new(n, ForcingModel::linear(spectrum.clone()))
            .map_err(|e| e.to_string())?;
        let lambda_star = cn.arg();
        for (sign, lambda) in [(1.0, lambda_star), (-1.0, lambda_star + PI)] {
            let (g, h) = avg
                .gamma_gradient_hessian(lambda, 0.0, 0.0)
                .map_err(|e| e.to_string())?;
            ensure!(
                g.norm() < 1e-9 * want.norm(),
                "spectrum {k}: gradient {:e} at lambda*",
                g.norm()
            );
            let diff = (h - want * sign).abs().max() / want.abs().max();
            ensure!(
                diff < 1e-6,
                "spectrum {k} (N = {n}), sign {sign}: Hessian diff {diff:e}"
            );
            worst = worst.max(diff);
        }
        let report = m_matrix(&spectrum, n).map_err(|e| e.to_string())?;
        let lib = (report.hessian_matrix() - want).abs().max() / want.abs().max();
        ensure!(
            lib < 1e-12,
            "spectrum {k}: library block form differs by {lib:e}"
        );
    }
    Ok(format!("5 spectra, max relative Hessian gap {worst:.1e}"))
}

fn threshold() -> Check {
    let spectrum = FourierSpectrum::two_wave(1, Complex64::new(4.0, 0.0));
    let report = m_matrix(&spectrum, 1).map_err(|e| e.to_string())?;
    ensure!(
        report
            .family_predictions
            .iter()
            .all(|f| f.class == PredictedClass::Inconclusive),
        "circular report gives a verdict at det M = {:e}",
        report.det_m
    );
    let forcing = ForcingSpec::from_spectrum(&spectrum);
    let out = run_continue(&RunConfig::new(forcing.clone())).map_err(|e| e.to_string())?;
    ensure!(!out.branches.is_empty(), "no critical points at a = 4");
    for b in &out.branches {
        ensure!(
            b.critical_point.predicted_class == PredictedClass::Inconclusive,
            "critical point at lambda = {:.4} predicted {}",
            b.critical_point.lambda,
            b.critical_point.predicted_class
        );
        if let Some(v) = &b.verdict {
            ensure!(
                v.all_agree.is_none(),
                "a verdict was produced at the threshold"
            );
        }
    }

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("forcing.toml");
    std::fs::write(&path, toml::to_string(&forcing).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    for sub in ["circular", "continue"] {
        let status = Command::new(env!("CARGO_BIN_EXE_kepler-averaging"))
            .arg("--forcing")
            .arg(&path)
            .arg("--out")
            .arg(dir.path())
            .arg(sub)
            .output()
            .map_err(|e| e.to_string())?;
        ensure!(
            status.status.success(),
            "`{sub}` exited with {:?}: {}",
            status.status.code(),
            String::from_utf8_lossy(&status.stderr)
        );
    }
    let report_json = std::fs::read_to_string(dir.path().join("continue_report.json"))
        .map_err(|e| e.to_string())?;
    let v: serde_json::Value = serde_json::from_str(&report_json).map_err(|e| e.to_string())?;
    let branches = v["branches"]
        .as_array()
        .ok_or("continue report has no branches")?;
    ensure!(
        branches
            .iter()
            .all(|b| b["verdict"]["predicted"] == "Inconclusive"),
        "CLI continue report carries a verdict"
    );
    Ok(format!(
        "det M = {:.1e}, {} Inconclusive branches, CLI exit 0",
        report.det_m,
        out.branches.len()
    ))
}

fn main() -> ExitCode {
    let eps = default_eps_grid();
    assert_eq!(eps, geometric_grid(1e-4, 1e-2, 9));
    let sweeps: Result<Vec<Sweep>, String> = [1.0, 2.0, 3.9, 4.1, 5.0, 8.0]
        .iter()
        .map(|&a| sweep(a, &eps))
        .collect();
    let suite = random_suite();
    let a1 = |f: fn(&Sweep) -> Check| {
        let sweeps = sweeps.as_ref().map_err(|e| e.clone())?;
        f(&sweeps[0])
    };
    let criteria: Vec<(&str, Box<dyn Fn() -> Check + '_>)> = vec![
        (
            "two-wave headline example",
            Box::new(|| headline(sweeps.as_ref().map_err(|e| e.clone())?)),
        ),
        (
            "unperturbed monodromy is parabolic",
            Box::new(monodromy_limit),
        ),
        ("determinant expansion", Box::new(|| a1(det_expansion))),
        ("trace expansion", Box::new(|| a1(trace_expansion))),
        ("chart correctness", Box::new(chart)),
        ("symplectic classifier", Box::new(|| classifier(&suite))),
        (
            "trace and determinant identities",
            Box::new(|| identities(&suite)),
        ),
        ("averaging oracle", Box::new(averaging_oracle)),
        ("threshold stays inconclusive", Box::new(threshold)),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let result = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into()))
        });
        match result {
            Ok(detail) => println!("criterion {} PASS  {name}: {detail}", k + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} FAIL  {name}: {why}", k + 1);
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
