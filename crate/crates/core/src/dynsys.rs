//! Flows of time-dependent vector fields on `R^n`.
//!
//! The central object is the flow map `Φ(t1, t0, x0)`: the value at `t1` of
//! the solution of `dx/dt = X(t, x)` through `(t0, x0)`. Integration is done
//! with an adaptive embedded Dormand–Prince 5(4) scheme with PI step-size
//! control; a fixed-step RK4 is kept for reproducibility comparisons.
//!
//! Maximal intervals are not tracked. Integration runs over the requested
//! span and failure to get there is reported through [`FlowError`].

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// A time-dependent vector field on an open subset of `R × R^n`.
///
/// `eval` must be deterministic and must only be called where
/// [`is_valid`](VectorField::is_valid) holds; callers check validity first.
pub trait VectorField {
    fn dim(&self) -> usize;

    /// Right-hand side `dx/dt = X(t, x)`.
    fn eval(&self, t: f64, x: &DVector<f64>) -> DVector<f64>;

    /// Predicate delimiting the open set on which `eval` is defined.
    fn is_valid(&self, _t: f64, _x: &DVector<f64>) -> bool {
        true
    }
}

/// Closure adapter implementing [`VectorField`].
pub struct FnField<F> {
    dim: usize,
    f: F,
}

impl<F: Fn(f64, &DVector<f64>) -> DVector<f64>> FnField<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F: Fn(f64, &DVector<f64>) -> DVector<f64>> VectorField for FnField<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, t: f64, x: &DVector<f64>) -> DVector<f64> {
        (self.f)(t, x)
    }
}

/// Tolerances and limits for the adaptive integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
    /// Magnitude of the first trial step; `None` selects it automatically.
    pub initial_step: Option<f64>,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_steps: 1_000_000,
            initial_step: None,
        }
    }
}

impl IntegratorConfig {
    fn validate(&self) -> Result<(), FlowError> {
        if !(self.rel_tol > 0.0) || !(self.abs_tol > 0.0) {
            return Err(FlowError::BadInput {
                reason: format!(
                    "tolerances must be strictly positive (rel_tol = {}, abs_tol = {})",
                    self.rel_tol, self.abs_tol
                ),
            });
        }
        if self.max_steps == 0 {
            return Err(FlowError::BadInput {
                reason: "max_steps must be at least 1".into(),
            });
        }
        if let Some(h) = self.initial_step {
            if !(h > 0.0) {
                return Err(FlowError::BadInput {
                    reason: format!("initial_step must be positive, got {h}"),
                });
            }
        }
        Ok(())
    }
}

/// Dense sampling of a solution over `[t0, t1]`.
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// `(time, state)` pairs, strictly monotone in time from `t0` to `t1`.
    pub samples: Vec<(f64, DVector<f64>)>,
    pub t0: f64,
    pub t1: f64,
    pub tolerance_used: f64,
}

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("integration exceeded {max_steps} steps at t = {t} (possible escape from the domain of definition)")]
    StepLimitExceeded { t: f64, max_steps: usize },
    #[error("vector field undefined at t = {t}; the solution left its domain before the requested time")]
    DomainExit { t: f64 },
    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },
    #[error("finite-difference seed x0[{coordinate}] {sign} h failed: {source}")]
    SeedFailed {
        coordinate: usize,
        sign: char,
        #[source]
        source: Box<FlowError>,
    },
    #[error("invalid input: {reason}")]
    BadInput { reason: String },
}

fn eval_checked(
    field: &dyn VectorField,
    t: f64,
    x: &DVector<f64>,
) -> Result<DVector<f64>, FlowError> {
    if !field.is_valid(t, x) {
        return Err(FlowError::DomainExit { t });
    }
    Ok(field.eval(t, x))
}

// Dormand-Prince 5(4) tableau. Stage 7 evaluates the 5th-order solution
// itself (FSAL), so six right-hand-side calls are spent per accepted step.
const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [
    19372.0 / 6561.0,
    -25360.0 / 2187.0,
    64448.0 / 6561.0,
    -212.0 / 729.0,
];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
const A7: [f64; 6] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
];
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

// PI step-size controller constants, after Hairer's dopri5.
const SAFE: f64 = 0.9;
const BETA: f64 = 0.04;
const EXPO1: f64 = 0.2 - BETA * 0.75;
const FAC_SHRINK_MAX: f64 = 5.0; // new step no smaller than h/5
const FAC_GROW_MAX: f64 = 0.1; // new step no larger than 10 h

/// Returns `Φ(t1, t0, x0)`.
///
/// `Φ(t0, t0, x0) = x0` exactly; no integration is performed in that case.
/// Backward spans (`t1 < t0`) are supported.
pub fn flow(
    field: &dyn VectorField,
    t0: f64,
    x0: &DVector<f64>,
    t1: f64,
    cfg: &IntegratorConfig,
) -> Result<DVector<f64>, FlowError> {
    cfg.validate()?;
    if x0.len() != field.dim() {
        return Err(FlowError::BadInput {
            reason: format!("state has dimension {}, field expects {}", x0.len(), field.dim()),
        });
    }
    if !t0.is_finite() || !t1.is_finite() {
        return Err(FlowError::BadInput {
            reason: format!("time span [{t0}, {t1}] must be finite"),
        });
    }
    if !field.is_valid(t0, x0) {
        return Err(FlowError::DomainExit { t: t0 });
    }
    if t1 == t0 {
        return Ok(x0.clone());
    }

    let n = x0.len();
    let dir = (t1 - t0).signum();
    let mut t = t0;
    let mut y = x0.clone();
    let mut k1 = field.eval(t, &y);
    let mut h = match cfg.initial_step {
        Some(h0) => h0.min((t1 - t0).abs()) * dir,
        None => initial_step_guess(field, t0, &y, &k1, t1, cfg),
    };
    let mut facold = 1e-4_f64;
    let mut just_rejected = false;

    let mut k = vec![DVector::zeros(n); 7];

    for _ in 0..cfg.max_steps {
        if 0.1 * h.abs() <= t.abs() * f64::EPSILON {
            return Err(FlowError::StepUnderflow { t });
        }
        let mut last = false;
        if (t + 1.01 * h - t1) * dir > 0.0 {
            h = t1 - t;
            last = true;
        }

        // stages 2..7; stage 7 is the order-5 solution (FSAL)
        k[0] = k1.clone();
        let mut y_new = DVector::zeros(n);
        for (s, row) in [
            &A2[..], &A3[..], &A4[..], &A5[..], &A6[..], &A7[..],
        ]
        .iter()
        .enumerate()
        {
            let mut yi = y.clone();
            for (j, &a) in row.iter().enumerate() {
                if a != 0.0 {
                    yi.axpy(h * a, &k[j], 1.0);
                }
            }
            let ti = t + C[s + 1] * h;
            k[s + 1] = eval_checked(field, ti, &yi)?;
            if s == 5 {
                y_new = yi;
            }
        }

        // embedded error estimate, RMS-scaled
        let mut err = 0.0;
        for i in 0..n {
            let mut e = 0.0;
            for (j, &ej) in E.iter().enumerate() {
                if ej != 0.0 {
                    e += ej * k[j][i];
                }
            }
            e *= h;
            let sk = cfg.abs_tol + cfg.rel_tol * y[i].abs().max(y_new[i].abs());
            err += (e / sk) * (e / sk);
        }
        err = (err / n as f64).sqrt();

        if !err.is_finite() {
            h *= 0.1;
            just_rejected = true;
            continue;
        }

        let fac11 = err.powf(EXPO1);
        if err <= 1.0 {
            facold = err.max(1e-4);
            t += h;
            y.copy_from(&y_new);
            k1 = k.pop().expect("seven stages");
            k.push(DVector::zeros(n));
            if last {
                return Ok(y);
            }
            let fac = (fac11 / facold.powf(BETA) / SAFE).clamp(FAC_GROW_MAX, FAC_SHRINK_MAX);
            let mut h_new = h / fac;
            if just_rejected {
                h_new = dir * h_new.abs().min(h.abs());
                just_rejected = false;
            }
            h = h_new;
        } else {
            h /= (fac11 / SAFE).min(FAC_SHRINK_MAX);
            just_rejected = true;
        }
    }
    Err(FlowError::StepLimitExceeded {
        t,
        max_steps: cfg.max_steps,
    })
}

/// Automatic first step after Hairer II.4, using two derivative evaluations.
fn initial_step_guess(
    field: &dyn VectorField,
    t0: f64,
    y0: &DVector<f64>,
    f0: &DVector<f64>,
    t1: f64,
    cfg: &IntegratorConfig,
) -> f64 {
    let dir = (t1 - t0).signum();
    let span = (t1 - t0).abs();
    let n = y0.len() as f64;
    let scaled_norm = |v: &DVector<f64>| {
        let mut s = 0.0;
        for i in 0..y0.len() {
            let sk = cfg.abs_tol + cfg.rel_tol * y0[i].abs();
            s += (v[i] / sk) * (v[i] / sk);
        }
        (s / n).sqrt()
    };
    let d0 = scaled_norm(y0);
    let d1 = scaled_norm(f0);
    let h0 = if d0 < 1e-10 || d1 < 1e-10 {
        1e-6
    } else {
        0.01 * d0 / d1
    }
    .min(span);

    let y1 = y0 + f0 * (h0 * dir);
    let t_probe = t0 + h0 * dir;
    if !field.is_valid(t_probe, &y1) {
        return (h0 * 1e-2).max(1e-10) * dir;
    }
    let f1 = field.eval(t_probe, &y1);
    let d2 = scaled_norm(&(f1 - f0)) / h0;
    let d_max = d1.max(d2);
    let h1 = if d_max <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d_max).powf(0.2)
    };
    (100.0 * h0).min(h1).min(span) * dir
}

/// Dense output at `n_samples` equally spaced times, integrating segment to
/// segment so that every sample satisfies the [`flow`] contract exactly at
/// its own time.
pub fn flow_trajectory(
    field: &dyn VectorField,
    t0: f64,
    x0: &DVector<f64>,
    t1: f64,
    cfg: &IntegratorConfig,
    n_samples: usize,
) -> Result<Trajectory, FlowError> {
    if n_samples < 2 {
        return Err(FlowError::BadInput {
            reason: format!("n_samples must be at least 2, got {n_samples}"),
        });
    }
    let mut samples = Vec::with_capacity(n_samples);
    samples.push((t0, x0.clone()));
    let mut y = x0.clone();
    let mut t_prev = t0;
    for i in 1..n_samples {
        let ti = if i == n_samples - 1 {
            t1
        } else {
            t0 + (t1 - t0) * i as f64 / (n_samples - 1) as f64
        };
        y = flow(field, t_prev, &y, ti, cfg)?;
        samples.push((ti, y.clone()));
        t_prev = ti;
    }
    Ok(Trajectory {
        samples,
        t0,
        t1,
        tolerance_used: cfg.rel_tol,
    })
}

/// Central-difference approximation of `∂Φ(t1, t0, x)/∂x` at `x0`.
///
/// Column `j` is `(Φ(x0 + h eⱼ) − Φ(x0 − h eⱼ)) / 2h` with
/// `h = fd_step · max(1, |x0ⱼ|)`. For `t1 = t0` the identity is returned
/// exactly, without integrating.
pub fn flow_jacobian(
    field: &dyn VectorField,
    t0: f64,
    x0: &DVector<f64>,
    t1: f64,
    cfg: &IntegratorConfig,
    fd_step: f64,
) -> Result<DMatrix<f64>, FlowError> {
    let n = x0.len();
    if t1 == t0 {
        return Ok(DMatrix::identity(n, n));
    }
    if !(fd_step > 0.0) {
        return Err(FlowError::BadInput {
            reason: format!("fd_step must be positive, got {fd_step}"),
        });
    }
    let mut jac = DMatrix::zeros(n, n);
    for j in 0..n {
        let h = fd_step * x0[j].abs().max(1.0);
        let mut xp = x0.clone();
        xp[j] += h;
        let mut xm = x0.clone();
        xm[j] -= h;
        let fp = flow(field, t0, &xp, t1, cfg).map_err(|e| FlowError::SeedFailed {
            coordinate: j,
            sign: '+',
            source: Box::new(e),
        })?;
        let fm = flow(field, t0, &xm, t1, cfg).map_err(|e| FlowError::SeedFailed {
            coordinate: j,
            sign: '-',
            source: Box::new(e),
        })?;
        jac.set_column(j, &((fp - fm) / (2.0 * h)));
    }
    Ok(jac)
}

/// Max-norm residual of the composition law
/// `Φ(t2, t1, Φ(t1, t0, x0)) = Φ(t2, t0, x0)`.
///
/// A conformance probe: small residuals are evidence the two integration
/// paths agree, not an enforced identity.
pub fn check_composition(
    field: &dyn VectorField,
    t0: f64,
    t1: f64,
    t2: f64,
    x0: &DVector<f64>,
    cfg: &IntegratorConfig,
) -> Result<f64, FlowError> {
    let mid = flow(field, t0, x0, t1, cfg)?;
    let via = flow(field, t1, &mid, t2, cfg)?;
    let direct = flow(field, t0, x0, t2, cfg)?;
    Ok((via - direct).amax())
}

/// Fixed-step classical RK4 over `n_steps` equal steps. Used for
/// reproducibility comparisons against the adaptive path.
pub fn rk4(
    field: &dyn VectorField,
    t0: f64,
    x0: &DVector<f64>,
    t1: f64,
    n_steps: usize,
) -> Result<DVector<f64>, FlowError> {
    if n_steps == 0 {
        return Err(FlowError::BadInput {
            reason: "n_steps must be at least 1".into(),
        });
    }
    let h = (t1 - t0) / n_steps as f64;
    let mut y = x0.clone();
    let mut t = t0;
    for i in 0..n_steps {
        let k1 = eval_checked(field, t, &y)?;
        let k2 = eval_checked(field, t + 0.5 * h, &(&y + &k1 * (0.5 * h)))?;
        let k3 = eval_checked(field, t + 0.5 * h, &(&y + &k2 * (0.5 * h)))?;
        let k4 = eval_checked(field, t + h, &(&y + &k3 * h))?;
        y += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        t = t0 + (i + 1) as f64 * h;
    }
    Ok(y)
}
