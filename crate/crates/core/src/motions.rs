//! Charts on the manifold of motions.
//!
//! For each fixed time `t`, a chart maps a motion — represented by its
//! element vector at a reference epoch — to the phase-space point the
//! motion occupies at `t`. That map is a diffeomorphism; its partial
//! derivatives in both directions feed every bracket computation.
//!
//! Besides the Kepler element chart, two analytic fixtures are provided:
//! an identity chart on a zero field and a 1-DOF harmonic oscillator
//! chart, both with closed-form Jacobians. The bracket identities are
//! statements about any mechanical system, and the fixtures give exact
//! oracles for them.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use std::f64::consts::TAU;
use thiserror::Error;

use crate::kepler::{
    self, KeplerError, KeplerModel, OrbitalElements, PhaseState,
};

#[derive(Debug, Error)]
pub enum MotionError {
    #[error(transparent)]
    Kepler(#[from] KeplerError),
    #[error("finite-difference seed {seed} crossed a chart singularity: {source}")]
    SingularNeighborhood {
        seed: usize,
        #[source]
        source: Box<MotionError>,
    },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

/// The epoch-parametrised diffeomorphism between element space and phase
/// space, with its Jacobians.
///
/// Element vectors and phase vectors are plain `R^{2n}` vectors; phase
/// ordering is `(q₁..qₙ, p₁..pₙ)`. The default Jacobians are central
/// finite differences with per-coordinate step `fd_step · max(1, |xᵢ|)`;
/// charts with closed-form derivatives override them.
pub trait MotionChart {
    /// Degrees of freedom `n`; both spaces have dimension `2n`.
    fn dof(&self) -> usize;

    /// Reference epoch anchoring the element coordinates.
    fn epoch(&self) -> f64;

    fn fd_step(&self) -> f64 {
        1e-7
    }

    /// The motion with elements `el`, evaluated at time `t`.
    fn to_phase(&self, el: &DVector<f64>, t: f64) -> Result<DVector<f64>, MotionError>;

    /// Elements (at this chart's epoch) of the motion passing through
    /// `state` at time `t`.
    fn to_elements(&self, state: &DVector<f64>, t: f64) -> Result<DVector<f64>, MotionError>;

    /// `∂(q,p)/∂(elements)` at fixed `t`.
    fn jacobian(&self, el: &DVector<f64>, t: f64) -> Result<DMatrix<f64>, MotionError> {
        let dim = 2 * self.dof();
        if el.len() != dim {
            return Err(MotionError::Dimension {
                expected: dim,
                got: el.len(),
            });
        }
        let mut jac = DMatrix::zeros(dim, dim);
        for j in 0..dim {
            let h = self.fd_step() * el[j].abs().max(1.0);
            let mut ep = el.clone();
            ep[j] += h;
            let mut em = el.clone();
            em[j] -= h;
            let fp = self.to_phase(&ep, t).map_err(|e| MotionError::SingularNeighborhood {
                seed: j,
                source: Box::new(e),
            })?;
            let fm = self.to_phase(&em, t).map_err(|e| MotionError::SingularNeighborhood {
                seed: j,
                source: Box::new(e),
            })?;
            jac.set_column(j, &((fp - fm) / (2.0 * h)));
        }
        Ok(jac)
    }

    /// `∂(elements)/∂(q,p)` at fixed `t`.
    fn inverse_jacobian(&self, state: &DVector<f64>, t: f64) -> Result<DMatrix<f64>, MotionError> {
        let dim = 2 * self.dof();
        if state.len() != dim {
            return Err(MotionError::Dimension {
                expected: dim,
                got: state.len(),
            });
        }
        let mut jac = DMatrix::zeros(dim, dim);
        for j in 0..dim {
            let h = self.fd_step() * state[j].abs().max(1.0);
            let mut sp = state.clone();
            sp[j] += h;
            let mut sm = state.clone();
            sm[j] -= h;
            let fp = self.to_elements(&sp, t).map_err(|e| MotionError::SingularNeighborhood {
                seed: j,
                source: Box::new(e),
            })?;
            let fm = self.to_elements(&sm, t).map_err(|e| MotionError::SingularNeighborhood {
                seed: j,
                source: Box::new(e),
            })?;
            jac.set_column(j, &((fp - fm) / (2.0 * h)));
        }
        Ok(jac)
    }
}

/// `∂(q,p)/∂(elements)` together with its condition number.
///
/// Near-singular charts silently corrupt brackets; the condition number
/// makes that failure mode visible.
#[derive(Debug, Clone)]
pub struct ChartJacobian {
    pub matrix: DMatrix<f64>,
    pub condition: f64,
    pub at_elements: DVector<f64>,
    pub at_time: f64,
}

/// The modified flow `(t, a) ↦ Φ̃(t, a)`: the state at `t` of the motion
/// `a`. Its value depends on the motion, not on which representative
/// `(t₀, x₀)` the elements were extracted from.
pub fn modified_flow(
    chart: &dyn MotionChart,
    el: &DVector<f64>,
    t: f64,
) -> Result<DVector<f64>, MotionError> {
    chart.to_phase(el, t)
}

pub fn chart_jacobian(
    chart: &dyn MotionChart,
    el: &DVector<f64>,
    t: f64,
) -> Result<ChartJacobian, MotionError> {
    let matrix = chart.jacobian(el, t)?;
    let sv = matrix.clone().svd(false, false).singular_values;
    let condition = sv.max() / sv.min();
    Ok(ChartJacobian {
        matrix,
        condition,
        at_elements: el.clone(),
        at_time: t,
    })
}

pub fn inverse_chart_jacobian(
    chart: &dyn MotionChart,
    state: &DVector<f64>,
    t: f64,
) -> Result<DMatrix<f64>, MotionError> {
    chart.inverse_jacobian(state, t)
}

/// The velocity-to-momentum map for unit mass: `p = ∂T/∂v = v`.
pub fn legendre_transform(_q: &Vector3<f64>, v: &Vector3<f64>, _model: &KeplerModel) -> Vector3<f64> {
    *v
}

/// Legendre transform of a general quadratic kinetic energy
/// `T = vᵀ M v / 2`: `p = M v`.
pub fn legendre_transform_quadratic(mass: &Matrix3<f64>, v: &Vector3<f64>) -> Vector3<f64> {
    mass * v
}

/// The Kepler element chart: elements `(sma, ecc, inc, raan, argp, m0)`
/// anchored at `epoch`, mapped to phase space by analytic propagation.
#[derive(Debug, Clone, Copy)]
pub struct KeplerChart {
    model: KeplerModel,
    epoch: f64,
    fd_step: f64,
}

impl KeplerChart {
    pub fn new(model: KeplerModel, epoch: f64) -> Self {
        Self {
            model,
            epoch,
            fd_step: 1e-7,
        }
    }

    pub fn with_fd_step(mut self, fd_step: f64) -> Self {
        self.fd_step = fd_step;
        self
    }

    pub fn model(&self) -> &KeplerModel {
        &self.model
    }

    /// Element vector of `el` re-anchored at this chart's epoch. Only the
    /// mean anomaly changes: `m0' = m0 + n (epoch_chart − epoch_el)`.
    pub fn element_vector(&self, el: &OrbitalElements) -> DVector<f64> {
        let n = (self.model.mu() / el.sma.powi(3)).sqrt();
        let m0 = (el.m0 + n * (self.epoch - el.epoch)).rem_euclid(TAU);
        DVector::from_column_slice(&[el.sma, el.ecc, el.inc, el.raan, el.argp, m0])
    }

    /// Typed view of a raw element vector, anchored at this chart's epoch.
    pub fn elements_from_vector(&self, v: &DVector<f64>) -> Result<OrbitalElements, MotionError> {
        Ok(OrbitalElements::from_dvector(v, self.epoch)?)
    }

    pub fn to_phase_state(
        &self,
        el: &OrbitalElements,
        t: f64,
    ) -> Result<PhaseState, MotionError> {
        let v = self.to_phase(&self.element_vector(el), t)?;
        Ok(PhaseState::from_dvector(t, &v))
    }
}

impl MotionChart for KeplerChart {
    fn dof(&self) -> usize {
        3
    }

    fn epoch(&self) -> f64 {
        self.epoch
    }

    fn fd_step(&self) -> f64 {
        self.fd_step
    }

    fn to_phase(&self, el: &DVector<f64>, t: f64) -> Result<DVector<f64>, MotionError> {
        if el.len() != 6 {
            return Err(MotionError::Dimension {
                expected: 6,
                got: el.len(),
            });
        }
        let raw = kepler::propagate_elements_raw(
            self.model.mu(),
            &[el[0], el[1], el[2], el[3], el[4], el[5]],
            self.epoch,
            t,
        )?;
        Ok(DVector::from_column_slice(&raw))
    }

    fn to_elements(&self, state: &DVector<f64>, t: f64) -> Result<DVector<f64>, MotionError> {
        if state.len() != 6 {
            return Err(MotionError::Dimension {
                expected: 6,
                got: state.len(),
            });
        }
        let ps = PhaseState::from_dvector(t, state);
        let el = kepler::elements_from_state(&ps, &self.model)?;
        // rebase the anomaly from epoch = t to the chart epoch
        let n = (self.model.mu() / el.sma.powi(3)).sqrt();
        let m0 = (el.m0 + n * (self.epoch - t)).rem_euclid(TAU);
        Ok(DVector::from_column_slice(&[
            el.sma, el.ecc, el.inc, el.raan, el.argp, m0,
        ]))
    }

    /// Central differences of [`to_elements`](MotionChart::to_elements),
    /// with each seed's angles moved to the branch nearest the centre
    /// point so the quotient never jumps across the 0/2π cut.
    fn inverse_jacobian(&self, state: &DVector<f64>, t: f64) -> Result<DMatrix<f64>, MotionError> {
        if state.len() != 6 {
            return Err(MotionError::Dimension {
                expected: 6,
                got: state.len(),
            });
        }
        let center = self.to_elements(state, t)?;
        let align = |mut v: DVector<f64>| {
            for i in [3, 4, 5] {
                v[i] -= TAU * ((v[i] - center[i]) / TAU).round();
            }
            v
        };
        let mut jac = DMatrix::zeros(6, 6);
        for j in 0..6 {
            let h = self.fd_step * state[j].abs().max(1.0);
            let mut sp = state.clone();
            sp[j] += h;
            let mut sm = state.clone();
            sm[j] -= h;
            let fp = align(self.to_elements(&sp, t).map_err(|e| {
                MotionError::SingularNeighborhood {
                    seed: j,
                    source: Box::new(e),
                }
            })?);
            let fm = align(self.to_elements(&sm, t).map_err(|e| {
                MotionError::SingularNeighborhood {
                    seed: j,
                    source: Box::new(e),
                }
            })?);
            jac.set_column(j, &((fp - fm) / (2.0 * h)));
        }
        Ok(jac)
    }
}

/// Chart of the zero field: the state never moves, so elements coincide
/// with the state at every time and all Jacobians are exactly the
/// identity.
#[derive(Debug, Clone, Copy)]
pub struct IdentityChart {
    dof: usize,
    epoch: f64,
}

impl IdentityChart {
    pub fn new(dof: usize, epoch: f64) -> Self {
        Self { dof, epoch }
    }
}

impl MotionChart for IdentityChart {
    fn dof(&self) -> usize {
        self.dof
    }

    fn epoch(&self) -> f64 {
        self.epoch
    }

    fn to_phase(&self, el: &DVector<f64>, _t: f64) -> Result<DVector<f64>, MotionError> {
        if el.len() != 2 * self.dof {
            return Err(MotionError::Dimension {
                expected: 2 * self.dof,
                got: el.len(),
            });
        }
        Ok(el.clone())
    }

    fn to_elements(&self, state: &DVector<f64>, _t: f64) -> Result<DVector<f64>, MotionError> {
        if state.len() != 2 * self.dof {
            return Err(MotionError::Dimension {
                expected: 2 * self.dof,
                got: state.len(),
            });
        }
        Ok(state.clone())
    }

    fn jacobian(&self, _el: &DVector<f64>, _t: f64) -> Result<DMatrix<f64>, MotionError> {
        Ok(DMatrix::identity(2 * self.dof, 2 * self.dof))
    }

    fn inverse_jacobian(&self, _state: &DVector<f64>, _t: f64) -> Result<DMatrix<f64>, MotionError> {
        Ok(DMatrix::identity(2 * self.dof, 2 * self.dof))
    }
}

/// 1-DOF harmonic oscillator `H = (p² + ω²q²)/2` with elements
/// `(q₀, p₀)` at the epoch. The flow is a rotation, so the chart and
/// both Jacobians are closed-form.
#[derive(Debug, Clone, Copy)]
pub struct OscillatorChart {
    omega: f64,
    epoch: f64,
}

impl OscillatorChart {
    pub fn new(omega: f64, epoch: f64) -> Self {
        assert!(omega > 0.0, "oscillator frequency must be positive");
        Self { omega, epoch }
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    fn rotation(&self, tau: f64) -> DMatrix<f64> {
        let (s, c) = (self.omega * tau).sin_cos();
        DMatrix::from_row_slice(2, 2, &[c, s / self.omega, -self.omega * s, c])
    }
}

impl MotionChart for OscillatorChart {
    fn dof(&self) -> usize {
        1
    }

    fn epoch(&self) -> f64 {
        self.epoch
    }

    fn to_phase(&self, el: &DVector<f64>, t: f64) -> Result<DVector<f64>, MotionError> {
        if el.len() != 2 {
            return Err(MotionError::Dimension {
                expected: 2,
                got: el.len(),
            });
        }
        Ok(self.rotation(t - self.epoch) * el)
    }

    fn to_elements(&self, state: &DVector<f64>, t: f64) -> Result<DVector<f64>, MotionError> {
        if state.len() != 2 {
            return Err(MotionError::Dimension {
                expected: 2,
                got: state.len(),
            });
        }
        Ok(self.rotation(self.epoch - t) * state)
    }

    fn jacobian(&self, _el: &DVector<f64>, t: f64) -> Result<DMatrix<f64>, MotionError> {
        Ok(self.rotation(t - self.epoch))
    }

    fn inverse_jacobian(&self, _state: &DVector<f64>, t: f64) -> Result<DMatrix<f64>, MotionError> {
        Ok(self.rotation(self.epoch - t))
    }
}
