//! The unperturbed two-body problem: vector field, first integrals,
//! classical orbital elements, and analytic propagation.
//!
//! Units are canonical: unit mass, configurable gravitational parameter
//! `mu` (default 1), so momentum equals velocity. Only elliptic,
//! non-rectilinear motion is supported; the element chart is the classical
//! set `(sma, ecc, inc, raan, argp, m0)` with `m0` the mean anomaly at a
//! reference epoch.

use nalgebra::{DVector, Vector3};
use std::f64::consts::{PI, TAU};
use thiserror::Error;

use crate::dynsys::VectorField;

/// Tolerance below which `ecc` or `inc` counts as sitting on a chart
/// singularity (`ecc = 0`, `inc = 0` or `inc = π`).
pub const SINGULAR_TOL: f64 = 1e-9;

/// Convergence target for the internal Kepler-equation solves.
const KEPLER_SOLVE_TOL: f64 = 1e-13;

#[derive(Debug, Error)]
pub enum KeplerError {
    #[error("state is not elliptic (energy = {energy})")]
    NonElliptic { energy: f64 },
    #[error("chart singularity: {what}")]
    SingularElement { what: String },
    #[error("Kepler equation did not converge (M = {mean_anomaly}, ecc = {ecc}, tol = {tol}); tolerance too tight for the arithmetic")]
    NoConvergence { mean_anomaly: f64, ecc: f64, tol: f64 },
    #[error("invalid orbital elements: {reason}")]
    InvalidElements { reason: String },
    #[error("gravitational parameter must be positive, got {mu}")]
    InvalidMu { mu: f64 },
}

/// The two-body model: kinetic energy `|p|²/2`, potential `−mu/|q|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeplerModel {
    mu: f64,
}

impl KeplerModel {
    pub fn new(mu: f64) -> Result<Self, KeplerError> {
        if !(mu > 0.0) || !mu.is_finite() {
            return Err(KeplerError::InvalidMu { mu });
        }
        Ok(Self { mu })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }
}

impl Default for KeplerModel {
    fn default() -> Self {
        Self { mu: 1.0 }
    }
}

/// A time-stamped point of phase space, position and momentum in 3D.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseState {
    pub t: f64,
    pub q: Vector3<f64>,
    pub p: Vector3<f64>,
}

impl PhaseState {
    pub fn new(t: f64, q: Vector3<f64>, p: Vector3<f64>) -> Self {
        Self { t, q, p }
    }

    /// Flattens to `(q1, q2, q3, p1, p2, p3)`, the ordering used by every
    /// matrix in this crate.
    pub fn to_dvector(&self) -> DVector<f64> {
        DVector::from_column_slice(&[
            self.q.x, self.q.y, self.q.z, self.p.x, self.p.y, self.p.z,
        ])
    }

    pub fn from_dvector(t: f64, v: &DVector<f64>) -> Self {
        assert_eq!(v.len(), 6, "phase vector must have 6 components");
        Self {
            t,
            q: Vector3::new(v[0], v[1], v[2]),
            p: Vector3::new(v[3], v[4], v[5]),
        }
    }
}

/// Classical Keplerian elements of an elliptic orbit, anchored at `epoch`.
///
/// Angles are normalized to `[0, 2π)` at construction; `inc` lives in
/// `[0, π]`. At a chart singularity (`ecc = 0` or `inc ∈ {0, π}`) the
/// undefined angles are zeroed by convention and
/// [`is_degenerate`](OrbitalElements::is_degenerate) reports it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitalElements {
    pub sma: f64,
    pub ecc: f64,
    pub inc: f64,
    pub raan: f64,
    pub argp: f64,
    pub m0: f64,
    pub epoch: f64,
}

impl OrbitalElements {
    pub fn new(
        sma: f64,
        ecc: f64,
        inc: f64,
        raan: f64,
        argp: f64,
        m0: f64,
        epoch: f64,
    ) -> Result<Self, KeplerError> {
        if !(sma > 0.0) || !sma.is_finite() {
            return Err(KeplerError::InvalidElements {
                reason: format!("sma must be positive and finite, got {sma}"),
            });
        }
        if !(0.0..1.0).contains(&ecc) {
            return Err(KeplerError::InvalidElements {
                reason: format!("ecc must lie in [0, 1), got {ecc}"),
            });
        }
        if !(0.0..=PI).contains(&inc) {
            return Err(KeplerError::InvalidElements {
                reason: format!("inc must lie in [0, π], got {inc}"),
            });
        }
        for (name, v) in [("raan", raan), ("argp", argp), ("m0", m0), ("epoch", epoch)] {
            if !v.is_finite() {
                return Err(KeplerError::InvalidElements {
                    reason: format!("{name} must be finite, got {v}"),
                });
            }
        }
        Ok(Self {
            sma,
            ecc,
            inc,
            raan: raan.rem_euclid(TAU),
            argp: argp.rem_euclid(TAU),
            m0: m0.rem_euclid(TAU),
            epoch,
        })
    }

    /// True when the chart angles `raan`/`argp` are ill-defined within
    /// [`SINGULAR_TOL`].
    pub fn is_degenerate(&self) -> bool {
        self.ecc < SINGULAR_TOL || self.inc < SINGULAR_TOL || self.inc > PI - SINGULAR_TOL
    }

    /// Errs with [`KeplerError::SingularElement`] on the degenerate set;
    /// bracket and variation-of-constants machinery requires this.
    pub fn require_nonsingular(&self) -> Result<(), KeplerError> {
        if self.ecc < SINGULAR_TOL {
            return Err(KeplerError::SingularElement {
                what: format!("ecc = {} is within {SINGULAR_TOL} of circular", self.ecc),
            });
        }
        if self.inc < SINGULAR_TOL || self.inc > PI - SINGULAR_TOL {
            return Err(KeplerError::SingularElement {
                what: format!("inc = {} is within {SINGULAR_TOL} of equatorial", self.inc),
            });
        }
        Ok(())
    }

    /// Element vector in the fixed ordering `(sma, ecc, inc, raan, argp, m0)`.
    pub fn to_dvector(&self) -> DVector<f64> {
        DVector::from_column_slice(&[self.sma, self.ecc, self.inc, self.raan, self.argp, self.m0])
    }

    pub fn from_dvector(v: &DVector<f64>, epoch: f64) -> Result<Self, KeplerError> {
        assert_eq!(v.len(), 6, "element vector must have 6 components");
        Self::new(v[0], v[1], v[2], v[3], v[4], v[5], epoch)
    }
}

/// The Kepler vector field `dq/dt = p`, `dp/dt = −mu q/|q|³` on
/// 6-dimensional phase space; valid wherever `|q| > 0`.
#[derive(Debug, Clone, Copy)]
pub struct KeplerField {
    model: KeplerModel,
}

impl VectorField for KeplerField {
    fn dim(&self) -> usize {
        6
    }

    fn eval(&self, _t: f64, x: &DVector<f64>) -> DVector<f64> {
        let r2 = x[0] * x[0] + x[1] * x[1] + x[2] * x[2];
        let r3 = r2 * r2.sqrt();
        let c = -self.model.mu / r3;
        DVector::from_column_slice(&[x[3], x[4], x[5], c * x[0], c * x[1], c * x[2]])
    }

    fn is_valid(&self, _t: f64, x: &DVector<f64>) -> bool {
        x[0] * x[0] + x[1] * x[1] + x[2] * x[2] > 0.0
    }
}

pub fn kepler_field(model: KeplerModel) -> KeplerField {
    KeplerField { model }
}

/// Specific orbital energy `|p|²/2 − mu/|q|`; constant along Kepler flows.
pub fn energy(state: &PhaseState, model: &KeplerModel) -> f64 {
    0.5 * state.p.norm_squared() - model.mu / state.q.norm()
}

/// Angular momentum `q × p`; each component is a first integral.
pub fn angular_momentum(state: &PhaseState) -> Vector3<f64> {
    state.q.cross(&state.p)
}

/// The eccentricity vector `(p × (q × p))/mu − q/|q|`: dimensionless,
/// pointing from the attracting center to perihelion, with length equal to
/// the orbit's eccentricity. Constant along Kepler flows.
pub fn eccentricity_vector(state: &PhaseState, model: &KeplerModel) -> Vector3<f64> {
    state.p.cross(&angular_momentum(state)) / model.mu - state.q / state.q.norm()
}

/// Rate at which the radius vector sweeps area, `|q × p| / 2`.
pub fn swept_area_rate(state: &PhaseState) -> f64 {
    0.5 * angular_momentum(state).norm()
}

/// `2π √(sma³/mu)`.
pub fn orbital_period(el: &OrbitalElements, model: &KeplerModel) -> f64 {
    TAU * (el.sma.powi(3) / model.mu).sqrt()
}

/// Solves `E − ecc·sin E = M` for the eccentric anomaly on the branch with
/// `E − M ∈ (−π, π]`.
///
/// Newton iteration seeded at `E₀ = M + ecc·sin M` (50-iteration cap) with
/// a bisection fallback on the bracketing interval `[M − ecc, M + ecc]`.
pub fn solve_kepler_equation(mean_anomaly: f64, ecc: f64, tol: f64) -> Result<f64, KeplerError> {
    if !(0.0..1.0).contains(&ecc) {
        return Err(KeplerError::InvalidElements {
            reason: format!("ecc must lie in [0, 1), got {ecc}"),
        });
    }
    if !(tol > 0.0) {
        return Err(KeplerError::InvalidElements {
            reason: format!("tol must be positive, got {tol}"),
        });
    }
    // Reduce to (−π, π]; the solution shifts back rigidly by the same 2πk.
    let m_red = -(-mean_anomaly - PI).rem_euclid(TAU) + PI;
    let shift = mean_anomaly - m_red;
    let residual = |e: f64| e - ecc * e.sin() - m_red;

    let mut e = m_red + ecc * m_red.sin();
    let (mut lo, mut hi) = (m_red - ecc - 1e-12, m_red + ecc + 1e-12);
    for _ in 0..50 {
        let f = residual(e);
        if f.abs() < tol {
            return Ok(e + shift);
        }
        if f > 0.0 {
            hi = hi.min(e);
        } else {
            lo = lo.max(e);
        }
        let fp = 1.0 - ecc * e.cos();
        let next = e - f / fp;
        e = if next > lo && next < hi {
            next
        } else {
            0.5 * (lo + hi)
        };
    }
    // Newton cap hit: the residual is monotone, so bisect the bracket.
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let f = residual(mid);
        if f.abs() < tol {
            return Ok(mid + shift);
        }
        if f > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < f64::EPSILON * (1.0 + mid.abs()) {
            break;
        }
    }
    Err(KeplerError::NoConvergence {
        mean_anomaly,
        ecc,
        tol,
    })
}

/// Analytic propagation on raw element values `(sma, ecc, inc, raan, argp,
/// m0)` without angle normalization, so finite differencing through this
/// map is smooth. Shared by [`state_from_elements`] and the element chart.
pub(crate) fn propagate_elements_raw(
    mu: f64,
    el: &[f64; 6],
    epoch: f64,
    t: f64,
) -> Result<[f64; 6], KeplerError> {
    let [sma, ecc, inc, raan, argp, m0] = *el;
    if !(sma > 0.0) {
        return Err(KeplerError::InvalidElements {
            reason: format!("sma must be positive, got {sma}"),
        });
    }
    if !(0.0..1.0).contains(&ecc) {
        return Err(KeplerError::InvalidElements {
            reason: format!("ecc must lie in [0, 1), got {ecc}"),
        });
    }
    let n = (mu / sma.powi(3)).sqrt();
    let m = m0 + n * (t - epoch);
    let ea = solve_kepler_equation(m, ecc, KEPLER_SOLVE_TOL)?;

    let b_over_a = (1.0 - ecc * ecc).sqrt();
    let (sin_ea, cos_ea) = ea.sin_cos();
    let x_pf = sma * (cos_ea - ecc);
    let y_pf = sma * b_over_a * sin_ea;
    let ea_dot = n / (1.0 - ecc * cos_ea);
    let vx_pf = -sma * sin_ea * ea_dot;
    let vy_pf = sma * b_over_a * cos_ea * ea_dot;

    // inertial = Rz(raan) Rx(inc) Rz(argp) · perifocal
    let (s_o, c_o) = raan.sin_cos();
    let (s_i, c_i) = inc.sin_cos();
    let (s_w, c_w) = argp.sin_cos();
    let r11 = c_o * c_w - s_o * c_i * s_w;
    let r12 = -c_o * s_w - s_o * c_i * c_w;
    let r21 = s_o * c_w + c_o * c_i * s_w;
    let r22 = -s_o * s_w + c_o * c_i * c_w;
    let r31 = s_i * s_w;
    let r32 = s_i * c_w;

    Ok([
        r11 * x_pf + r12 * y_pf,
        r21 * x_pf + r22 * y_pf,
        r31 * x_pf + r32 * y_pf,
        r11 * vx_pf + r12 * vy_pf,
        r21 * vx_pf + r22 * vy_pf,
        r31 * vx_pf + r32 * vy_pf,
    ])
}

/// Analytic Kepler propagation: the state at time `t` of the motion with
/// the given elements.
pub fn state_from_elements(
    el: &OrbitalElements,
    model: &KeplerModel,
    t: f64,
) -> Result<PhaseState, KeplerError> {
    if !t.is_finite() {
        return Err(KeplerError::InvalidElements {
            reason: format!("propagation time must be finite, got {t}"),
        });
    }
    let raw = propagate_elements_raw(
        model.mu,
        &[el.sma, el.ecc, el.inc, el.raan, el.argp, el.m0],
        el.epoch,
        t,
    )?;
    Ok(PhaseState {
        t,
        q: Vector3::new(raw[0], raw[1], raw[2]),
        p: Vector3::new(raw[3], raw[4], raw[5]),
    })
}

/// Osculating elements of an elliptic state, anchored at `epoch = state.t`.
///
/// On the degenerate set (circular or equatorial within [`SINGULAR_TOL`])
/// the undefined angles are zeroed by convention instead of failing; the
/// anomaly is then measured from the node, or from the x-axis when both
/// degeneracies are present.
pub fn elements_from_state(
    state: &PhaseState,
    model: &KeplerModel,
) -> Result<OrbitalElements, KeplerError> {
    let r = state.q.norm();
    if !(r > 0.0) {
        return Err(KeplerError::InvalidElements {
            reason: "position has zero norm".into(),
        });
    }
    let en = energy(state, model);
    if en >= 0.0 {
        return Err(KeplerError::NonElliptic { energy: en });
    }
    let l = angular_momentum(state);
    let h = l.norm();
    if !(h > 0.0) {
        // rectilinear: ecc = 1, outside the elliptic chart
        return Err(KeplerError::NonElliptic { energy: en });
    }
    let sma = -model.mu / (2.0 * en);
    let evec = eccentricity_vector(state, model);
    let ecc = evec.norm();
    if ecc >= 1.0 {
        return Err(KeplerError::NonElliptic { energy: en });
    }
    let l_hat = l / h;
    let inc = l_hat.z.clamp(-1.0, 1.0).acos();

    let equatorial = inc < SINGULAR_TOL || inc > PI - SINGULAR_TOL;
    let circular = ecc < SINGULAR_TOL;

    let node = Vector3::new(-l.y, l.x, 0.0);
    let (raan, node_ref) = if equatorial {
        (0.0, Vector3::x())
    } else {
        (node.y.atan2(node.x).rem_euclid(TAU), node / node.norm())
    };
    let (argp, peri_ref) = if circular {
        (0.0, node_ref)
    } else {
        let e_hat = evec / ecc;
        let raw = node_ref.cross(&e_hat).dot(&l_hat).atan2(node_ref.dot(&e_hat));
        (raw.rem_euclid(TAU), e_hat)
    };

    let nu = peri_ref
        .cross(&state.q)
        .dot(&l_hat)
        .atan2(peri_ref.dot(&state.q));
    let ea = ((1.0 - ecc * ecc).sqrt() * nu.sin()).atan2(ecc + nu.cos());
    let m0 = ea - ecc * ea.sin();

    OrbitalElements::new(sma, ecc, inc, raan, argp, m0, state.t)
}
