//! Integration of `ẍ = −x/|x|³ + ε∇ₓU(t, x)` with its variational equations.
//!
//! The first-order state is `(x₁, x₂, y₁, y₂)`; with variations the 4×4
//! fundamental matrix rides along column by column in one 20-dimensional
//! system so that both share the same step control. Solver time is carried
//! as one more component with unit rate, keeping the system autonomous for
//! the stepper.

use nalgebra::{Matrix4, SVector};
use ode_solvers::dop853::Dop853;
use ode_solvers::dop_shared::IntegrationError;
use ode_solvers::{OutputType, System};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use std::io::Write;

use crate::error::{Error, Result};
use crate::forcing::{eval_potential, ForcingModel};
use crate::kepler::{cartesian_to_poincare_jacobian, CartesianState};
use crate::symplectic::Monodromy4;

/// Step of the central differences that transport monodromies to the
/// Poincaré chart.
pub const CHART_FD_STEP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub min_radius_guard: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-11,
            abs_tol: 1e-11,
            max_step: 0.1,
            min_radius_guard: 1e-3,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.rel_tol > 0.0
            && self.abs_tol > 0.0
            && self.max_step > 0.0
            && self.min_radius_guard > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "integrator settings must be positive: {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub samples: Vec<(f64, CartesianState)>,
    pub monodromy: Option<Monodromy4>,
    pub eps: f64,
    /// Largest `|E(t) − E(t₀)|` over the samples; only meaningful for `ε = 0`.
    pub energy_drift: f64,
}

impl TrajectoryRecord {
    pub fn final_state(&self) -> CartesianState {
        self.samples
            .last()
            .map(|s| s.1)
            .expect("a trajectory has at least one sample")
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,x1,x2,y1,y2")?;
        for (t, s) in &self.samples {
            writeln!(
                w,
                "{t:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                s.x[0], s.x[1], s.y[0], s.y[1]
            )?;
        }
        Ok(())
    }
}

type State21 = SVector<f64, 21>;
const CLOCK: usize = 20;

struct Perturbed<'a> {
    forcing: &'a ForcingModel,
    eps: f64,
    variational: bool,
    guard: f64,
    /// Physical time is `t0 + dir·s` for solver time `s ≥ 0`.
    t0: f64,
    dir: f64,
}

impl System<f64, State21> for Perturbed<'_> {
    fn system(&self, _tau: f64, s: &State21, ds: &mut State21) {
        let t = self.t0 + self.dir * s[CLOCK];
        ds[CLOCK] = 1.0;
        let d = self.dir;
        let (x1, x2) = (s[0], s[1]);
        let r2 = x1 * x1 + x2 * x2;
        let r = r2.sqrt();
        let inv_r3 = 1.0 / (r2 * r);
        ds[0] = d * s[2];
        ds[1] = d * s[3];
        let (grad, hess) = if self.eps != 0.0 {
            if self.variational {
                let u = eval_potential(self.forcing, t, [x1, x2]);
                (u.gradient, u.hessian)
            } else {
                (self.forcing.gradient(t, [x1, x2]), [[0.0; 2]; 2])
            }
        } else {
            ([0.0; 2], [[0.0; 2]; 2])
        };
        ds[2] = d * (-x1 * inv_r3 + self.eps * grad[0]);
        ds[3] = d * (-x2 * inv_r3 + self.eps * grad[1]);
        if !self.variational {
            return;
        }
        // D²V for V = −1/|x| − εU
        let inv_r5 = inv_r3 / r2;
        let k = [
            [
                (r2 - 3.0 * x1 * x1) * inv_r5 - self.eps * hess[0][0],
                -3.0 * x1 * x2 * inv_r5 - self.eps * hess[0][1],
            ],
            [
                -3.0 * x1 * x2 * inv_r5 - self.eps * hess[1][0],
                (r2 - 3.0 * x2 * x2) * inv_r5 - self.eps * hess[1][1],
            ],
        ];
        for col in 0..4 {
            let o = 4 + 4 * col;
            ds[o] = d * s[o + 2];
            ds[o + 1] = d * s[o + 3];
            ds[o + 2] = -d * (k[0][0] * s[o] + k[0][1] * s[o + 1]);
            ds[o + 3] = -d * (k[1][0] * s[o] + k[1][1] * s[o + 1]);
        }
    }

    fn solout(&mut self, _t: f64, s: &State21, _ds: &State21) -> bool {
        s[0].hypot(s[1]) < self.guard
    }
}

struct RawRun {
    times: Vec<f64>,
    states: Vec<State21>,
}

fn run(
    f: &ForcingModel,
    eps: f64,
    s0: &CartesianState,
    t0: f64,
    t1: f64,
    cfg: &IntegratorConfig,
    variational: bool,
) -> Result<RawRun> {
    cfg.validate()?;
    if s0.radius() < cfg.min_radius_guard {
        return Err(Error::CollisionGuard {
            t: t0,
            radius: s0.radius(),
        });
    }
    let mut y0 = State21::zeros();
    y0.fixed_rows_mut::<4>(0).copy_from_slice(&s0.to_array());
    if variational {
        for i in 0..4 {
            y0[4 + 5 * i] = 1.0;
        }
    }
    let system = Perturbed {
        forcing: f,
        eps,
        variational,
        guard: cfg.min_radius_guard,
        t0,
        dir: (t1 - t0).signum(),
    };
    let span = (t1 - t0).abs();
    let mut solver = Dop853::from_param(
        system,
        0.0,
        span,
        0.0,
        y0,
        cfg.rel_tol,
        cfg.abs_tol,
        0.9,
        0.0,
        0.333,
        6.0,
        cfg.max_step,
        0.0,
        1_000_000,
        u32::MAX,
        OutputType::Sparse,
    );
    let outcome = solver.integrate();
    let dir = (t1 - t0).signum();
    let to_phys = |tau: f64| t0 + dir * tau;
    match outcome {
        Ok(_) => {}
        Err(IntegrationError::StepSizeUnderflow { x })
        | Err(IntegrationError::MaxNumStepReached { x, .. }) => {
            return Err(Error::StepFailure {
                t: to_phys(x),
                h: 0.0,
            });
        }
        Err(IntegrationError::StiffnessDetected { x }) => {
            return Err(Error::StepFailure {
                t: to_phys(x),
                h: f64::NAN,
            })
        }
    }
    let (times, states) = solver.results().get();
    if let Some((t, radius)) = solver_hit(&times, &states, cfg.min_radius_guard, span) {
        return Err(Error::CollisionGuard {
            t: to_phys(t),
            radius,
        });
    }
    Ok(RawRun {
        times: times.iter().map(|t| to_phys(*t)).collect(),
        states: states.clone(),
    })
}

/// The guard is checked after each accepted step; a run that stopped short
/// of `span` stopped there.
fn solver_hit(times: &[f64], states: &[State21], guard: f64, span: f64) -> Option<(f64, f64)> {
    let t = *times.last()?;
    let s = states.last()?;
    let r = s[0].hypot(s[1]);
    (r < guard || (t - span).abs() > 1e-9 * (1.0 + span)).then_some((t, r))
}

fn state_of(v: &State21) -> CartesianState {
    CartesianState::new(v[0], v[1], v[2], v[3])
}

fn fundamental_of(v: &State21) -> Matrix4<f64> {
    Matrix4::from_fn(|i, k| v[4 + 4 * k + i])
}

pub fn integrate(
    f: &ForcingModel,
    eps: f64,
    s0: &CartesianState,
    t_span: (f64, f64),
    cfg: &IntegratorConfig,
    with_variational: bool,
) -> Result<TrajectoryRecord> {
    let (t0, t1) = t_span;
    if !(t1 > t0) {
        return Err(Error::InvalidInput(format!(
            "need t1 > t0, got ({t0}, {t1})"
        )));
    }
    if s0.x == [0.0; 2] {
        return Err(Error::InvalidInput("initial position is the origin".into()));
    }
    let raw = run(f, eps, s0, t0, t1, cfg, with_variational)?;
    let mut samples: Vec<(f64, CartesianState)> = Vec::with_capacity(raw.times.len());
    for (t, v) in raw.times.iter().zip(&raw.states) {
        // the solver can repeat the initial time
        if samples.last().is_some_and(|(tl, _)| *t <= *tl) {
            continue;
        }
        samples.push((*t, state_of(v)));
    }
    let e0 = s0.energy();
    let energy_drift = samples
        .iter()
        .map(|(_, s)| (s.energy() - e0).abs())
        .fold(0.0, f64::max);
    let monodromy = with_variational
        .then(|| Monodromy4::new(fundamental_of(raw.states.last().expect("nonempty run"))));
    Ok(TrajectoryRecord {
        samples,
        monodromy,
        eps,
        energy_drift,
    })
}

/// End state of the flow from `t0` to `t1`, in either time direction.
pub fn flow(
    f: &ForcingModel,
    eps: f64,
    s0: &CartesianState,
    t0: f64,
    t1: f64,
    cfg: &IntegratorConfig,
) -> Result<CartesianState> {
    let raw = run(f, eps, s0, t0, t1, cfg, false)?;
    Ok(state_of(raw.states.last().expect("nonempty run")))
}

/// The time-`2π` map and its Cartesian derivative.
pub fn period_map(
    f: &ForcingModel,
    eps: f64,
    s0: &CartesianState,
    cfg: &IntegratorConfig,
) -> Result<(CartesianState, Monodromy4)> {
    let raw = run(f, eps, s0, 0.0, TAU, cfg, true)?;
    let last = raw.states.last().expect("nonempty run");
    Ok((state_of(last), Monodromy4::new(fundamental_of(last))))
}

/// The time-`2π` map alone.
pub fn period_map_state(
    f: &ForcingModel,
    eps: f64,
    s0: &CartesianState,
    cfg: &IntegratorConfig,
) -> Result<CartesianState> {
    flow(f, eps, s0, 0.0, TAU, cfg)
}

/// Monodromy of a closed orbit through `s0` written in `(λ, η, Λ, ξ)`.
pub fn monodromy_in_poincare(dpi: &Monodromy4, s0: &CartesianState) -> Result<Monodromy4> {
    monodromy_in_poincare_between(dpi, s0, s0)
}

/// `D𝒫⁻¹(s1) · DΠ · D𝒫⁻¹(s0)⁻¹`, with `D𝒫⁻¹` the Jacobian of the inverse chart.
pub fn monodromy_in_poincare_between(
    dpi: &Monodromy4,
    s0: &CartesianState,
    s1: &CartesianState,
) -> Result<Monodromy4> {
    let c0 = cartesian_to_poincare_jacobian(s0, CHART_FD_STEP)?;
    let c1 = if s0 == s1 {
        c0
    } else {
        cartesian_to_poincare_jacobian(s1, CHART_FD_STEP)?
    };
    let c0_inv = c0.try_inverse().ok_or(Error::SingularJacobian(0.0))?;
    Ok(Monodromy4::new(c1 * dpi.entries() * c0_inv))
}
