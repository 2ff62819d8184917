//! The averaged perturbation `γ_N(λ, η, ξ)` on the resonant torus
//! `Λ = Λ_N = |N|^{−1/3}` and its critical points.
//!
//! For each quadrature node `t_k` the unperturbed resonant orbit sits at
//! `x(λ + N t_k, Λ_N, η, ξ)`, and
//! `γ_N = (1/M) Σ_k U(t_k, x(λ + N t_k, Λ_N, η, ξ))`.
//! Derivatives use the chain rule with `∇U`, `D²U` and jets of the chart:
//! exact jets on the circular locus, Richardson-refined central differences
//! of the chart elsewhere.

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::fmt;
use std::io::Write;

use crate::angle;
use crate::error::{Error, Result};
use crate::forcing::{eval_potential, ForcingModel};
use crate::kepler::{astro_to_cartesian, poincare_jet_circular, AstroCoords, TOL_CIRC};

pub const DEFAULT_QUADRATURE_NODES: usize = 256;
pub const DEFAULT_TOL_GRAD: f64 = 1e-9;
pub const DEFAULT_DEDUP_TOL: f64 = 1e-6;
pub const DEFAULT_FD_STEP: f64 = 1e-3;
const MAX_NEWTON: usize = 40;
const MAX_POLISH: usize = 60;
const TIKHONOV: f64 = 1e-10;
/// Relative size under which `∂²λλγ` or `det D²γ` count as zero.
pub const TOL_CLASS: f64 = 1e-7;
/// Merge radius for inconclusive (degenerate) critical points.
pub const DEGENERATE_MERGE: f64 = 1e-2;

#[derive(Debug, Clone)]
pub struct AveragedFunction {
    n: i64,
    lambda_n: f64,
    /// Forcing as seen by the positively oriented problem; time-reversed
    /// when `N < 0`.
    forcing: ForcingModel,
    quadrature_nodes: usize,
    fd_step: f64,
}

impl AveragedFunction {
    /// Negative `N` is handled by reversing time: the function is that of the
    /// forcing `t ↦ U(−t, x)` at winding `|N|`, and all points it returns
    /// live in that reversed frame.
    pub fn new(n: i64, forcing: ForcingModel) -> Result<Self> {
        Self::with_nodes(n, forcing, DEFAULT_QUADRATURE_NODES)
    }

    pub fn with_nodes(n: i64, forcing: ForcingModel, quadrature_nodes: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidInput(
                "winding number N must be nonzero".into(),
            ));
        }
        if quadrature_nodes < 4 {
            return Err(Error::InvalidInput(
                "need at least 4 quadrature nodes".into(),
            ));
        }
        let forcing = if n < 0 {
            forcing.time_reversed()
        } else {
            forcing
        };
        Ok(Self {
            n,
            lambda_n: (n.unsigned_abs() as f64).powf(-1.0 / 3.0),
            forcing,
            quadrature_nodes,
            fd_step: DEFAULT_FD_STEP,
        })
    }

    pub fn with_fd_step(mut self, h: f64) -> Self {
        self.fd_step = h;
        self
    }

    pub fn n(&self) -> i64 {
        self.n
    }

    pub fn winding(&self) -> i64 {
        self.n.abs()
    }

    pub fn is_time_reversed(&self) -> bool {
        self.n < 0
    }

    pub fn lambda_n(&self) -> f64 {
        self.lambda_n
    }

    pub fn forcing(&self) -> &ForcingModel {
        &self.forcing
    }

    pub fn quadrature_nodes(&self) -> usize {
        self.quadrature_nodes
    }

    /// `η² + ξ²` must stay below this.
    pub fn torus_limit(&self) -> f64 {
        2.0 * self.lambda_n
    }

    fn check(&self, eta: f64, xi: f64, margin: f64) -> Result<()> {
        let r = (eta * eta + xi * xi).sqrt() + margin;
        if r * r < self.torus_limit() {
            Ok(())
        } else {
            Err(Error::OutOfTorus {
                limit: self.torus_limit(),
            })
        }
    }

    fn node_times(&self) -> impl Iterator<Item = f64> + '_ {
        let m = self.quadrature_nodes as f64;
        (0..self.quadrature_nodes).map(move |k| TAU * k as f64 / m)
    }

    /// Position on the chart, valid also on and near the circular locus.
    fn position(&self, lambda: f64, eta: f64, xi: f64) -> [f64; 2] {
        position_at(lambda, self.lambda_n, eta, xi)
    }

    fn position_jet(&self, lambda: f64, eta: f64, xi: f64) -> ChartJet {
        if (eta * eta + xi * xi).sqrt() < TOL_CIRC {
            let j = poincare_jet_circular(lambda, self.lambda_n);
            let c2 = |z: num_complex::Complex64| [z.re, z.im];
            let mut d2x = [[[0.0; 2]; 3]; 3];
            for (i, row) in j.d2x.iter().enumerate() {
                for (k, z) in row.iter().enumerate() {
                    d2x[i][k] = c2(*z);
                }
            }
            return ChartJet {
                x: j.value.x,
                dx: j.dx.map(c2),
                d2x,
            };
        }
        let base = [lambda, eta, xi];
        let f = |v: [f64; 3]| self.position(v[0], v[1], v[2]);
        fd_jet(&f, base, self.fd_step)
    }

    pub fn gamma(&self, lambda: f64, eta: f64, xi: f64) -> Result<f64> {
        self.check(eta, xi, 0.0)?;
        let w = self.winding() as f64;
        let sum: f64 = self
            .node_times()
            .map(|t| {
                let x = self.position(lambda + w * t, eta, xi);
                eval_potential(&self.forcing, t, x).value
            })
            .sum();
        Ok(sum / self.quadrature_nodes as f64)
    }

    pub fn gamma_gradient_hessian(
        &self,
        lambda: f64,
        eta: f64,
        xi: f64,
    ) -> Result<(Vector3<f64>, Matrix3<f64>)> {
        let on_locus = (eta * eta + xi * xi).sqrt() < TOL_CIRC;
        self.check(eta, xi, if on_locus { 0.0 } else { 2.0 * self.fd_step })?;
        let w = self.winding() as f64;
        let mut grad = Vector3::zeros();
        let mut hess = Matrix3::zeros();
        for t in self.node_times() {
            let jet = self.position_jet(lambda + w * t, eta, xi);
            let u = eval_potential(&self.forcing, t, jet.x);
            for i in 0..3 {
                let di = jet.dx[i];
                grad[i] += u.gradient[0] * di[0] + u.gradient[1] * di[1];
                for k in i..3 {
                    let dk = jet.dx[k];
                    let quad = (0..2)
                        .map(|a| (0..2).map(|b| di[a] * u.hessian[a][b] * dk[b]).sum::<f64>())
                        .sum::<f64>();
                    let lin = u.gradient[0] * jet.d2x[i][k][0] + u.gradient[1] * jet.d2x[i][k][1];
                    hess[(i, k)] += quad + lin;
                }
            }
        }
        let inv = 1.0 / self.quadrature_nodes as f64;
        for i in 0..3 {
            for k in 0..i {
                hess[(i, k)] = hess[(k, i)];
            }
        }
        Ok((grad * inv, hess * inv))
    }

    /// `⟨∇U · ∂x/∂Λ⟩` along the resonant orbit through `(λ, η, ξ)`: the
    /// first-order drift of the mean longitude away from the resonance.
    pub fn mean_action_derivative(&self, lambda: f64, eta: f64, xi: f64) -> Result<f64> {
        self.check(eta, xi, 0.0)?;
        let w = self.winding() as f64;
        let big_l = self.lambda_n;
        let h = 1e-5 * big_l;
        let sum: f64 = self
            .node_times()
            .map(|t| {
                let l = lambda + w * t;
                let xp = position_at(l, big_l + h, eta, xi);
                let xm = position_at(l, big_l - h, eta, xi);
                let x = self.position(l, eta, xi);
                let u = eval_potential(&self.forcing, t, x);
                (0..2)
                    .map(|a| u.gradient[a] * (xp[a] - xm[a]) / (2.0 * h))
                    .sum::<f64>()
            })
            .sum();
        Ok(sum / self.quadrature_nodes as f64)
    }

    /// Newton on `∇γ_N` from every seed, in parallel.
    pub fn find_critical_points(&self, seeds: &[[f64; 3]], tol_grad: f64) -> CriticalPointReport {
        self.find_critical_points_with(seeds, tol_grad, DEFAULT_DEDUP_TOL)
    }

    pub fn find_critical_points_with(
        &self,
        seeds: &[[f64; 3]],
        tol_grad: f64,
        dedup_tol: f64,
    ) -> CriticalPointReport {
        let outcomes: Vec<Result<Outcome>> = seeds
            .par_iter()
            .map(|s| self.newton(*s, tol_grad))
            .collect();
        let mut report = CriticalPointReport::default();
        for (seed, outcome) in seeds.iter().zip(outcomes) {
            match outcome {
                Ok(Outcome::Converged(cp)) => {
                    if !report.points.iter().any(|p| p.distance(&cp) < dedup_tol) {
                        report.points.push(cp);
                    }
                }
                Ok(Outcome::Flat) => report.degenerate_continuum = true,
                Err(e) => report.failures.push(SeedFailure {
                    seed: *seed,
                    error: e.to_string(),
                }),
            }
        }
        if report.degenerate_continuum {
            log::warn!("γ_N is flat at some seeds; critical points are not isolated there");
        }
        report.points.sort_by(|a, b| {
            a.lambda
                .total_cmp(&b.lambda)
                .then(a.eta.total_cmp(&b.eta))
                .then(a.xi.total_cmp(&b.xi))
        });
        // a degenerate point is only located to about tol_grad^{1/3}, so
        // inconclusive points closer than DEGENERATE_MERGE are one point
        let mut kept: Vec<CriticalPoint> = Vec::with_capacity(report.points.len());
        for p in report.points.drain(..) {
            let twin = (p.predicted_class == PredictedClass::Inconclusive)
                .then(|| {
                    kept.iter().position(|q| {
                        q.predicted_class == PredictedClass::Inconclusive
                            && q.distance(&p) < DEGENERATE_MERGE
                    })
                })
                .flatten();
            match twin {
                Some(i) if p.gradient_norm < kept[i].gradient_norm => kept[i] = p,
                Some(_) => {}
                None => kept.push(p),
            }
        }
        report.points = kept;
        report
    }

    fn newton(&self, seed: [f64; 3], tol_grad: f64) -> Result<Outcome> {
        let mut p = Vector3::new(angle::wrap(seed[0]), seed[1], seed[2]);
        let max_step = 0.25 * self.lambda_n.sqrt();
        // once below tol_grad, keep stepping while |∇γ| still drops: a
        // nondegenerate point stops within a step or two, while a point
        // inside a flat valley slides toward the degenerate point instead
        // of being reported with a spuriously small Hessian
        let mut polished: Option<(Vector3<f64>, Vector3<f64>, Matrix3<f64>)> = None;
        for _ in 0..MAX_NEWTON + MAX_POLISH {
            let (g, h) = self.gamma_gradient_hessian(p[0], p[1], p[2])?;
            if let Some((p0, g0, h0)) = polished {
                if g.norm() >= 0.5 * g0.norm() || g.norm() <= 1e-15 * h.norm() {
                    let best = if g.norm() < g0.norm() {
                        (p, g, h)
                    } else {
                        (p0, g0, h0)
                    };
                    return Ok(Outcome::Converged(CriticalPoint::new(
                        best.0, best.1, best.2,
                    )));
                }
                polished = Some((p, g, h));
            } else if g.norm() < tol_grad {
                if h.norm() < tol_grad {
                    return Ok(Outcome::Flat);
                }
                polished = Some((p, g, h));
            }
            let scale = h.norm().max(f64::MIN_POSITIVE);
            let solve = |m: Matrix3<f64>| {
                m.lu()
                    .solve(&(-g))
                    .filter(|d| d.iter().all(|v| v.is_finite()))
            };
            let step = if h.determinant().abs() > 1e-12 * scale.powi(3) {
                solve(h)
            } else {
                None
            }
            .or_else(|| solve(h + Matrix3::identity() * TIKHONOV))
            .ok_or(Error::SingularJacobian(h.determinant().abs()))?;
            let mut step = if step.norm() > max_step {
                step * (max_step / step.norm())
            } else {
                step
            };
            let mut trial = p + step;
            let mut tries = 0;
            while self.check(trial[1], trial[2], 2.0 * self.fd_step).is_err() {
                tries += 1;
                if tries > 10 {
                    return Err(Error::OutOfTorus {
                        limit: self.torus_limit(),
                    });
                }
                step *= 0.5;
                trial = p + step;
            }
            trial[0] = angle::wrap(trial[0]);
            p = trial;
        }
        if let Some((p0, g0, h0)) = polished {
            return Ok(Outcome::Converged(CriticalPoint::new(p0, g0, h0)));
        }
        Err(Error::NoConvergence {
            what: "critical point Newton",
            iterations: MAX_NEWTON,
        })
    }

    /// Seeds on a `nλ × nη × nξ` box inside the torus.
    pub fn seed_grid(&self, n_lambda: usize, n_eta: usize, n_xi: usize) -> Vec<[f64; 3]> {
        let axes = self.axes(n_lambda, n_eta, n_xi);
        let mut out = Vec::with_capacity(n_lambda * n_eta * n_xi);
        for &l in &axes.0 {
            for &e in &axes.1 {
                for &x in &axes.2 {
                    out.push([l, e, x]);
                }
            }
        }
        out
    }

    fn axes(&self, n_lambda: usize, n_eta: usize, n_xi: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        // corners stay inside η² + ξ² < 2Λ
        let half = 0.9 * self.lambda_n.sqrt();
        let span = |n: usize| -> Vec<f64> {
            if n == 1 {
                vec![0.0]
            } else {
                (0..n)
                    .map(|j| -half + 2.0 * half * j as f64 / (n - 1) as f64)
                    .collect()
            }
        };
        let lambdas = (0..n_lambda)
            .map(|i| TAU * i as f64 / n_lambda as f64)
            .collect();
        (lambdas, span(n_eta), span(n_xi))
    }

    /// Row-major samples with `λ` slowest, `ξ` fastest.
    pub fn gamma_grid(&self, n_lambda: usize, n_eta: usize, n_xi: usize) -> Result<GammaGrid> {
        if n_lambda < 2 || n_eta < 2 || n_xi < 2 {
            return Err(Error::InvalidInput(
                "grid resolution must be at least 2 per axis".into(),
            ));
        }
        let (lambdas, etas, xis) = self.axes(n_lambda, n_eta, n_xi);
        let points = self.seed_grid(n_lambda, n_eta, n_xi);
        let values = points
            .par_iter()
            .map(|p| self.gamma(p[0], p[1], p[2]))
            .collect::<Result<Vec<f64>>>()?;
        Ok(GammaGrid {
            lambdas,
            etas,
            xis,
            values,
        })
    }
}

/// Position through the astronomical elements; no circular-locus switch,
/// which is exact at `e = 0` and keeps difference stencils smooth.
fn position_at(lambda: f64, big_l: f64, eta: f64, xi: f64) -> [f64; 2] {
    let r2 = eta * eta + xi * xi;
    let e = (r2 * (1.0 / big_l - r2 / (4.0 * big_l * big_l)))
        .max(0.0)
        .sqrt();
    let g = -eta.atan2(xi);
    astro_to_cartesian(&AstroCoords {
        a: big_l * big_l,
        e,
        l: lambda - g,
        g,
    })
    .map(|s| s.x)
    .unwrap_or([f64::NAN; 2])
}

enum Outcome {
    Converged(CriticalPoint),
    Flat,
}

/// Position and its first two derivatives in `(λ, η, ξ)`.
#[derive(Debug, Clone, Copy)]
struct ChartJet {
    x: [f64; 2],
    dx: [[f64; 2]; 3],
    d2x: [[[f64; 2]; 3]; 3],
}

fn fd_jet(f: &impl Fn([f64; 3]) -> [f64; 2], base: [f64; 3], h: f64) -> ChartJet {
    let at = |i: usize, si: f64, k: usize, sk: f64| {
        let mut v = base;
        v[i] += si;
        v[k] += sk;
        f(v)
    };
    let f0 = f(base);
    let single = |h: f64| {
        let mut dx = [[0.0; 2]; 3];
        let mut d2x = [[[0.0; 2]; 3]; 3];
        for i in 0..3 {
            let p = at(i, h, i, 0.0);
            let m = at(i, -h, i, 0.0);
            for a in 0..2 {
                dx[i][a] = (p[a] - m[a]) / (2.0 * h);
                d2x[i][i][a] = (p[a] - 2.0 * f0[a] + m[a]) / (h * h);
            }
            for k in i + 1..3 {
                let pp = at(i, h, k, h);
                let pm = at(i, h, k, -h);
                let mp = at(i, -h, k, h);
                let mm = at(i, -h, k, -h);
                for a in 0..2 {
                    let v = (pp[a] - pm[a] - mp[a] + mm[a]) / (4.0 * h * h);
                    d2x[i][k][a] = v;
                    d2x[k][i][a] = v;
                }
            }
        }
        (dx, d2x)
    };
    let (d1, s1) = single(h);
    let (d2, s2) = single(0.5 * h);
    let rich = |coarse: f64, fine: f64| (4.0 * fine - coarse) / 3.0;
    let mut jet = ChartJet {
        x: f0,
        dx: [[0.0; 2]; 3],
        d2x: [[[0.0; 2]; 3]; 3],
    };
    for i in 0..3 {
        for a in 0..2 {
            jet.dx[i][a] = rich(d1[i][a], d2[i][a]);
            for k in 0..3 {
                jet.d2x[i][k][a] = rich(s1[i][k][a], s2[i][k][a]);
            }
        }
    }
    jet
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PredictedClass {
    Elliptic,
    Unstable,
    Inconclusive,
}

impl fmt::Display for PredictedClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PredictedClass::Elliptic => "Elliptic",
            PredictedClass::Unstable => "Unstable",
            PredictedClass::Inconclusive => "Inconclusive",
        })
    }
}

/// The sign test on `∂²λλγ` and `det D²γ`.
pub fn predict_class(hessian: &Matrix3<f64>) -> PredictedClass {
    let scale = hessian.norm();
    let d11 = hessian[(0, 0)];
    let det = hessian.determinant();
    if scale == 0.0 || d11.abs() <= TOL_CLASS * scale || det.abs() <= TOL_CLASS * scale.powi(3) {
        PredictedClass::Inconclusive
    } else if d11 > 0.0 && det > 0.0 {
        PredictedClass::Elliptic
    } else {
        PredictedClass::Unstable
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub lambda: f64,
    pub eta: f64,
    pub xi: f64,
    pub gradient_norm: f64,
    pub hessian: [[f64; 3]; 3],
    pub d2_lambda_lambda: f64,
    pub hessian_det: f64,
    pub predicted_class: PredictedClass,
}

impl CriticalPoint {
    pub fn new(p: Vector3<f64>, g: Vector3<f64>, h: Matrix3<f64>) -> Self {
        let mut hessian = [[0.0; 3]; 3];
        for (i, row) in hessian.iter_mut().enumerate() {
            for (k, v) in row.iter_mut().enumerate() {
                *v = h[(i, k)];
            }
        }
        Self {
            lambda: p[0],
            eta: p[1],
            xi: p[2],
            gradient_norm: g.norm(),
            hessian,
            d2_lambda_lambda: h[(0, 0)],
            hessian_det: h.determinant(),
            predicted_class: predict_class(&h),
        }
    }

    pub fn hessian_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, k| self.hessian[i][k])
    }

    pub fn on_circular_locus(&self) -> bool {
        (self.eta * self.eta + self.xi * self.xi).sqrt() < TOL_CIRC
    }

    /// Wrap-aware product distance.
    pub fn distance(&self, other: &Self) -> f64 {
        let dl = angle::dist(self.lambda, other.lambda);
        (dl * dl + (self.eta - other.eta).powi(2) + (self.xi - other.xi).powi(2)).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedFailure {
    pub seed: [f64; 3],
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CriticalPointReport {
    pub points: Vec<CriticalPoint>,
    pub failures: Vec<SeedFailure>,
    /// Some seed sat where both `∇γ` and `D²γ` vanish.
    pub degenerate_continuum: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GammaGrid {
    pub lambdas: Vec<f64>,
    pub etas: Vec<f64>,
    pub xis: Vec<f64>,
    pub values: Vec<f64>,
}

impl GammaGrid {
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.etas.len() + j) * self.xis.len() + k
    }

    pub fn value(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.index(i, j, k)]
    }

    /// Indices of the smallest sample.
    pub fn argmin(&self) -> (usize, usize, usize) {
        let flat = self
            .values
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let nx = self.xis.len();
        let ne = self.etas.len();
        (flat / (ne * nx), (flat / nx) % ne, flat % nx)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "lambda,eta,xi,gamma")?;
        for (i, l) in self.lambdas.iter().enumerate() {
            for (j, e) in self.etas.iter().enumerate() {
                for (k, x) in self.xis.iter().enumerate() {
                    writeln!(w, "{l:.17e},{e:.17e},{x:.17e},{:.17e}", self.value(i, j, k))?;
                }
            }
        }
        Ok(())
    }
}
