//! Lagrange parentheses, Poisson brackets, and the identities tying them
//! together.
//!
//! With `J = ∂(q,p)/∂(elements)` and `S` the canonical matrix of
//! `Σ dqₖ∧dpₖ`, the matrix of Lagrange parentheses is `L = Jᵀ S J`; with
//! `K = ∂(elements)/∂(q,p)` the matrix of Poisson brackets is
//! `P = K Sᵀ Kᵀ`. The two are exact inverses, `L·P = I`.
//!
//! Brackets here follow the sign convention
//! `{a,b} = Σ ∂a/∂pₖ ∂b/∂qₖ − ∂a/∂qₖ ∂b/∂pₖ` — the negative of the
//! common modern convention. It is the convention under which `L·P = I`
//! holds directly (1-DOF check: `L = [[0,1],[−1,0]]`,
//! `P = [[0,−1],[1,0]]`, `L·P = I`) and under which Hamilton's equation
//! takes the form `dg/dt = {H,g}`.

use nalgebra::{DMatrix, DVector};

use crate::dynsys::{self, FlowError, IntegratorConfig, VectorField};
use crate::motions::{MotionChart, MotionError};

/// Step for single central-difference brackets of scalar functions.
pub const DEFAULT_BRACKET_STEP: f64 = 1e-6;
/// Outer step for nested brackets; kept 10× above the inner step so the
/// inner bracket's noise does not dominate the outer difference quotient.
pub const JACOBI_OUTER_STEP: f64 = 1e-4;
pub const JACOBI_INNER_STEP: f64 = 1e-5;

/// The canonical symplectic matrix on `2n`-dimensional phase space in
/// `(q₁..qₙ, p₁..pₙ)` ordering: `S = [[0, I], [−I, 0]]`, satisfying
/// `Sᵀ = −S` and `S² = −I`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CanonicalForm {
    n: usize,
}

impl CanonicalForm {
    pub fn new(n: usize) -> Self {
        Self { n }
    }

    pub fn dof(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let mut s = DMatrix::zeros(2 * self.n, 2 * self.n);
        for k in 0..self.n {
            s[(k, self.n + k)] = 1.0;
            s[(self.n + k, k)] = -1.0;
        }
        s
    }
}

/// Both bracket matrices evaluated at a matched chart point
/// (`state = to_phase(el, t)`).
#[derive(Debug, Clone)]
pub struct BracketMatrices {
    /// Entry `(i,j)` is the Lagrange parenthesis `(aᵢ, aⱼ)`.
    pub lagrange: DMatrix<f64>,
    /// Entry `(i,j)` is the Poisson bracket `{aᵢ, aⱼ}`.
    pub poisson: DMatrix<f64>,
    pub at_elements: DVector<f64>,
    pub at_time: f64,
}

pub fn bracket_matrices(
    chart: &dyn MotionChart,
    el: &DVector<f64>,
    t: f64,
) -> Result<BracketMatrices, MotionError> {
    let state = chart.to_phase(el, t)?;
    Ok(BracketMatrices {
        lagrange: lagrange_matrix(chart, el, t)?,
        poisson: poisson_matrix(chart, &state, t)?,
        at_elements: el.clone(),
        at_time: t,
    })
}

pub(crate) fn lagrange_from_jacobian(j: &DMatrix<f64>) -> DMatrix<f64> {
    let s = CanonicalForm::new(j.nrows() / 2).matrix();
    j.transpose() * s * j
}

/// Matrix of Lagrange parentheses `L = Jᵀ S J`, entry `(i,j) = (aᵢ, aⱼ)`.
pub fn lagrange_matrix(
    chart: &dyn MotionChart,
    el: &DVector<f64>,
    t: f64,
) -> Result<DMatrix<f64>, MotionError> {
    Ok(lagrange_from_jacobian(&chart.jacobian(el, t)?))
}

/// Matrix of Poisson brackets `P = K Sᵀ Kᵀ`, entry `(i,j) = {aᵢ, aⱼ}` in
/// the crate-wide sign convention.
pub fn poisson_matrix(
    chart: &dyn MotionChart,
    state: &DVector<f64>,
    t: f64,
) -> Result<DMatrix<f64>, MotionError> {
    let k = chart.inverse_jacobian(state, t)?;
    let s = CanonicalForm::new(k.nrows() / 2).matrix();
    Ok(&k * s.transpose() * k.transpose())
}

/// `{f,g}(state) = Σₖ ∂f/∂pₖ ∂g/∂qₖ − ∂f/∂qₖ ∂g/∂pₖ` by central
/// differences with per-coordinate step `step · max(1, |xᵢ|)`.
pub fn poisson_bracket_with_step<F, G>(f: F, g: G, state: &DVector<f64>, step: f64) -> f64
where
    F: Fn(&DVector<f64>) -> f64,
    G: Fn(&DVector<f64>) -> f64,
{
    let dim = state.len();
    let n = dim / 2;
    let grad = |func: &dyn Fn(&DVector<f64>) -> f64| {
        let mut g = DVector::zeros(dim);
        for i in 0..dim {
            let h = step * state[i].abs().max(1.0);
            let mut xp = state.clone();
            xp[i] += h;
            let mut xm = state.clone();
            xm[i] -= h;
            g[i] = (func(&xp) - func(&xm)) / (2.0 * h);
        }
        g
    };
    let gf = grad(&f);
    let gg = grad(&g);
    let mut sum = 0.0;
    for k in 0..n {
        sum += gf[n + k] * gg[k] - gf[k] * gg[n + k];
    }
    sum
}

pub fn poisson_bracket<F, G>(f: F, g: G, state: &DVector<f64>) -> f64
where
    F: Fn(&DVector<f64>) -> f64,
    G: Fn(&DVector<f64>) -> f64,
{
    poisson_bracket_with_step(f, g, state, DEFAULT_BRACKET_STEP)
}

/// `‖L·P − I‖_max` with both matrices evaluated at the matched point.
pub fn verify_inverse(
    chart: &dyn MotionChart,
    el: &DVector<f64>,
    t: f64,
) -> Result<f64, MotionError> {
    let m = bracket_matrices(chart, el, t)?;
    let dim = m.lagrange.nrows();
    Ok((m.lagrange * m.poisson - DMatrix::identity(dim, dim)).amax())
}

/// Residual between the two constructions of the Lagrange matrix from one
/// Jacobian: the defining entrywise sums versus the `Jᵀ S J` product.
///
/// The two code paths are retained permanently; ordering and sign
/// regressions are the dominant bug class in this machinery and this
/// residual catches them.
pub fn darboux_pullback_residual(
    chart: &dyn MotionChart,
    el: &DVector<f64>,
    t: f64,
) -> Result<f64, MotionError> {
    let j = chart.jacobian(el, t)?;
    let dim = j.nrows();
    let n = dim / 2;
    let mut entrywise = DMatrix::zeros(dim, dim);
    for a in 0..dim {
        for b in 0..dim {
            let mut sum = 0.0;
            for k in 0..n {
                sum += j[(k, a)] * j[(n + k, b)] - j[(k, b)] * j[(n + k, a)];
            }
            entrywise[(a, b)] = sum;
        }
    }
    Ok((entrywise - lagrange_from_jacobian(&j)).amax())
}

/// `‖L(t₁) − L(t₂)‖_max`: the parentheses are functions on the manifold
/// of motions and do not depend on the evaluation time.
pub fn time_independence_residual(
    chart: &dyn MotionChart,
    el: &DVector<f64>,
    t1: f64,
    t2: f64,
) -> Result<f64, MotionError> {
    let l1 = lagrange_matrix(chart, el, t1)?;
    let l2 = lagrange_matrix(chart, el, t2)?;
    Ok((l1 - l2).amax())
}

/// `‖Jᵀ S J − S‖_max` with `J` the flow Jacobian over `[t0, t1]`: the
/// canonical 2-form is invariant under the flow of a Hamiltonian field.
pub fn flow_symplecticity_residual(
    field: &dyn VectorField,
    t0: f64,
    t1: f64,
    x0: &DVector<f64>,
    cfg: &IntegratorConfig,
    fd_step: f64,
) -> Result<f64, FlowError> {
    let j = dynsys::flow_jacobian(field, t0, x0, t1, cfg, fd_step)?;
    let s = CanonicalForm::new(j.nrows() / 2).matrix();
    Ok((j.transpose() * &s * j - s).amax())
}

/// Absolute value of the cyclic sum `{f,{g,h}} + {g,{h,f}} + {h,{f,g}}`,
/// nested brackets by nested central differences.
pub fn jacobi_residual<F, G, H>(f: F, g: G, h: H, state: &DVector<f64>) -> f64
where
    F: Fn(&DVector<f64>) -> f64,
    G: Fn(&DVector<f64>) -> f64,
    H: Fn(&DVector<f64>) -> f64,
{
    let fgh = poisson_bracket_with_step(
        &f,
        |x: &DVector<f64>| poisson_bracket_with_step(&g, &h, x, JACOBI_INNER_STEP),
        state,
        JACOBI_OUTER_STEP,
    );
    let ghf = poisson_bracket_with_step(
        &g,
        |x: &DVector<f64>| poisson_bracket_with_step(&h, &f, x, JACOBI_INNER_STEP),
        state,
        JACOBI_OUTER_STEP,
    );
    let hfg = poisson_bracket_with_step(
        &h,
        |x: &DVector<f64>| poisson_bracket_with_step(&f, &g, x, JACOBI_INNER_STEP),
        state,
        JACOBI_OUTER_STEP,
    );
    (fgh + ghf + hfg).abs()
}

/// Drift of `{f,g}` along the flow: `|{f,g}(Φ(t1,t0,x0)) − {f,g}(x0)|`.
///
/// When `f` and `g` are first integrals of `field`, their bracket is one
/// too and the drift vanishes up to discretisation error.
pub fn poisson_theorem_check<F, G>(
    f: F,
    g: G,
    field: &dyn VectorField,
    t0: f64,
    x0: &DVector<f64>,
    t1: f64,
    cfg: &IntegratorConfig,
) -> Result<f64, FlowError>
where
    F: Fn(&DVector<f64>) -> f64,
    G: Fn(&DVector<f64>) -> f64,
{
    let before = poisson_bracket(&f, &g, x0);
    let x1 = dynsys::flow(field, t0, x0, t1, cfg)?;
    let after = poisson_bracket(&f, &g, &x1);
    Ok((after - before).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynsys::FnField;
    use crate::kepler::{self, KeplerModel, OrbitalElements};
    use crate::motions::{IdentityChart, KeplerChart, OscillatorChart};
    use approx::assert_abs_diff_eq;
    use nalgebra::dvector;

    fn ref_elements() -> DVector<f64> {
        dvector![1.3, 0.2, 0.4, 1.0, 2.0, 0.5]
    }

    fn kepler_chart() -> KeplerChart {
        KeplerChart::new(KeplerModel::default(), 0.0)
    }

    /// Nonzero entries of the Lagrange matrix of the classical element
    /// chart, from the Delaunay actions L = √(μa), G = √(μa(1−e²)),
    /// H = G cos i paired with the angles (m0, argp, raan):
    /// the pullback form is dm0∧dL + dargp∧dG + draan∧dH.
    fn analytic_kepler_lagrange(mu: f64, sma: f64, ecc: f64, inc: f64) -> DMatrix<f64> {
        let l_a = 0.5 * (mu / sma).sqrt();
        let g = (mu * sma * (1.0 - ecc * ecc)).sqrt();
        let g_a = 0.5 * (mu * (1.0 - ecc * ecc) / sma).sqrt();
        let g_e = -(mu * sma).sqrt() * ecc / (1.0 - ecc * ecc).sqrt();
        let (ci, si) = (inc.cos(), inc.sin());
        let mut m = DMatrix::zeros(6, 6);
        m[(0, 3)] = -g_a * ci;
        m[(0, 4)] = -g_a;
        m[(0, 5)] = -l_a;
        m[(1, 3)] = -g_e * ci;
        m[(1, 4)] = -g_e;
        m[(2, 3)] = g * si;
        let mt = m.transpose();
        m - mt
    }

    #[test]
    fn canonical_form_identities() {
        let s = CanonicalForm::new(3).matrix();
        assert_eq!(s.transpose(), -&s);
        assert_eq!(&s * &s, -DMatrix::identity(6, 6));
    }

    #[test]
    fn identity_chart_gives_the_canonical_matrices() {
        let chart = IdentityChart::new(3, 0.0);
        let el = dvector![0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
        let m = bracket_matrices(&chart, &el, 2.0).unwrap();
        let s = CanonicalForm::new(3).matrix();
        assert_eq!(m.lagrange, s);
        assert_eq!(m.poisson, -&s);
        assert!(verify_inverse(&chart, &el, 2.0).unwrap() < 1e-12);
        assert!(darboux_pullback_residual(&chart, &el, 2.0).unwrap() < 1e-12);
    }

    #[test]
    fn one_dof_canonical_pair() {
        let chart = IdentityChart::new(1, 0.0);
        let el = dvector![0.3, -0.8];
        let m = bracket_matrices(&chart, &el, 0.0).unwrap();
        // (q, p) = 1 and {q, p} = −1 in the paper's convention
        assert_eq!(m.lagrange[(0, 1)], 1.0);
        assert_eq!(m.poisson[(0, 1)], -1.0);
        assert_eq!(&m.lagrange * &m.poisson, DMatrix::identity(2, 2));
    }

    #[test]
    fn coordinate_brackets_by_finite_differences() {
        let state = dvector![0.3, -0.2, 1.1, 0.7, 0.4, -0.9];
        let q1 = |x: &DVector<f64>| x[0];
        let p1 = |x: &DVector<f64>| x[3];
        let p2 = |x: &DVector<f64>| x[4];
        assert_abs_diff_eq!(poisson_bracket(q1, p1, &state), -1.0, epsilon = 1e-9);
        assert_abs_diff_eq!(poisson_bracket(q1, p2, &state), 0.0, epsilon = 1e-9);
        let f = |x: &DVector<f64>| x[0] * x[3] + x[1].powi(2);
        assert_eq!(poisson_bracket(&f, &f, &state), 0.0);
    }

    #[test]
    fn bracket_is_bilinear_and_leibniz_on_polynomials() {
        let state = dvector![0.4, -1.2, 0.8, 0.3, 0.9, -0.5];
        let f = |x: &DVector<f64>| x[0] * x[4];
        let g = |x: &DVector<f64>| x[1] + x[3] * x[3];
        let h = |x: &DVector<f64>| x[2] * x[5] + x[0];
        let lhs = poisson_bracket(&f, |x: &DVector<f64>| g(x) * h(x), &state);
        let rhs = poisson_bracket(&f, &g, &state) * h(&state)
            + g(&state) * poisson_bracket(&f, &h, &state);
        assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-6);

        let sum = |x: &DVector<f64>| 2.0 * g(x) - 3.0 * h(x);
        let lin = poisson_bracket(&f, sum, &state);
        let parts =
            2.0 * poisson_bracket(&f, &g, &state) - 3.0 * poisson_bracket(&f, &h, &state);
        assert_abs_diff_eq!(lin, parts, epsilon = 1e-6);
    }

    #[test]
    fn kepler_lagrange_matrix_matches_the_analytic_form() {
        let chart = kepler_chart();
        let el = ref_elements();
        let expected = analytic_kepler_lagrange(1.0, 1.3, 0.2, 0.4);
        for t in [0.0, 0.7, 9.0] {
            let l = lagrange_matrix(&chart, &el, t).unwrap();
            assert!(
                (&l - &expected).amax() < 1e-6,
                "t = {t}: max deviation {}",
                (&l - &expected).amax()
            );
        }
    }

    #[test]
    fn kepler_poisson_matrix_is_the_analytic_inverse() {
        let chart = kepler_chart();
        let el = ref_elements();
        let state = chart.to_phase(&el, 0.7).unwrap();
        let p = poisson_matrix(&chart, &state, 0.7).unwrap();
        let expected = analytic_kepler_lagrange(1.0, 1.3, 0.2, 0.4)
            .try_inverse()
            .expect("analytic Lagrange matrix is invertible");
        assert!((&p - &expected).amax() < 1e-5);
        // spot values from the analytic inverse
        assert_abs_diff_eq!(p[(0, 5)], 2.2803508501982761, epsilon = 1e-6);
        assert_abs_diff_eq!(p[(1, 4)], -4.2966892442365969, epsilon = 1e-5);
        assert_abs_diff_eq!(p[(2, 3)], -2.2986682836829653, epsilon = 1e-5);
    }

    #[test]
    fn bracket_matrices_are_antisymmetric() {
        let chart = kepler_chart();
        let el = ref_elements();
        let m = bracket_matrices(&chart, &el, 1.1).unwrap();
        assert!((&m.lagrange + m.lagrange.transpose()).amax() < 1e-8);
        assert!((&m.poisson + m.poisson.transpose()).amax() < 1e-8);
    }

    #[test]
    fn duality_residuals() {
        let osc = OscillatorChart::new(1.3, 0.0);
        let el = dvector![0.7, -0.2];
        assert!(verify_inverse(&osc, &el, 2.9).unwrap() < 1e-10);

        let chart = kepler_chart();
        assert!(verify_inverse(&chart, &ref_elements(), 0.7).unwrap() < 1e-4);
    }

    #[test]
    fn darboux_residual_on_analytic_and_fd_charts() {
        let osc = OscillatorChart::new(0.9, 0.0);
        assert!(darboux_pullback_residual(&osc, &dvector![1.0, 0.3], 1.7).unwrap() < 1e-10);
        let chart = kepler_chart();
        assert!(darboux_pullback_residual(&chart, &ref_elements(), 0.7).unwrap() < 1e-6);
    }

    #[test]
    fn lagrange_parentheses_do_not_depend_on_time() {
        let chart = kepler_chart();
        let el = ref_elements();
        assert_eq!(
            time_independence_residual(&chart, &el, 1.4, 1.4).unwrap(),
            0.0
        );
        let period = kepler::orbital_period(
            &OrbitalElements::from_dvector(&el, 0.0).unwrap(),
            &KeplerModel::default(),
        );
        assert!(time_independence_residual(&chart, &el, 0.0, period).unwrap() < 1e-4);
        assert!(time_independence_residual(&chart, &el, 0.0, 0.37 * period).unwrap() < 1e-4);

        let osc = OscillatorChart::new(1.1, 0.0);
        assert!(time_independence_residual(&osc, &dvector![0.5, 0.5], 0.3, 1.3).unwrap() < 1e-9);
    }

    #[test]
    fn reparametrising_the_chart_transforms_the_matrix_by_congruence() {
        // A chart whose elements are rescaled by a diagonal map b ↦ D b
        // has Lagrange matrix Dᵀ L D; swapping two coordinates permutes
        // rows and columns. "The value of (a,b) depends on the whole
        // system of coordinates, not on a and b alone."
        struct Scaled {
            inner: KeplerChart,
            scale: DVector<f64>,
        }
        impl MotionChart for Scaled {
            fn dof(&self) -> usize {
                self.inner.dof()
            }
            fn epoch(&self) -> f64 {
                self.inner.epoch()
            }
            fn fd_step(&self) -> f64 {
                self.inner.fd_step()
            }
            fn to_phase(&self, el: &DVector<f64>, t: f64) -> Result<DVector<f64>, MotionError> {
                self.inner.to_phase(&el.component_mul(&self.scale), t)
            }
            fn to_elements(&self, state: &DVector<f64>, t: f64) -> Result<DVector<f64>, MotionError> {
                Ok(self
                    .inner
                    .to_elements(state, t)?
                    .component_div(&self.scale))
            }
        }

        let inner = kepler_chart();
        let scale = dvector![2.0, 1.0, 1.0, 1.0, 1.0, 1.0];
        let chart = Scaled {
            inner,
            scale: scale.clone(),
        };
        let el = ref_elements();
        let el_scaled = el.component_div(&scale);

        let l_inner = lagrange_matrix(&inner, &el, 0.7).unwrap();
        let l_scaled = lagrange_matrix(&chart, &el_scaled, 0.7).unwrap();
        let d = DMatrix::from_diagonal(&scale);
        let expected = d.transpose() * &l_inner * &d;
        assert!((l_scaled - expected).amax() < 1e-6);
    }

    #[test]
    fn flow_symplecticity_of_hamiltonian_fields() {
        // zero span: J = I exactly
        let osc = FnField::new(2, |_, x: &DVector<f64>| dvector![x[1], -1.69 * x[0]]);
        let x0 = dvector![0.8, 0.1];
        let cfg = IntegratorConfig::default();
        assert_eq!(
            flow_symplecticity_residual(&osc, 0.5, 0.5, &x0, &cfg, 1e-6).unwrap(),
            0.0
        );
        assert!(flow_symplecticity_residual(&osc, 0.0, 3.7, &x0, &cfg, 1e-6).unwrap() < 1e-8);
    }

    #[test]
    fn jacobi_identity_residuals() {
        let state = dvector![0.6, -0.4, 1.0, 0.2, -0.7, 0.5];
        let f = |x: &DVector<f64>| x[0];
        let g = |x: &DVector<f64>| x[3];
        let h = |x: &DVector<f64>| x[0] * x[3];
        assert!(jacobi_residual(&f, &g, &h, &state) < 1e-6);
        // degenerate triple: two arguments equal
        assert_eq!(jacobi_residual(&f, &f, &h, &state), 0.0);
    }

    #[test]
    fn angular_momentum_brackets_close_on_polynomials() {
        // {L_x, L_y} = −L_z in the paper convention; compare the FD
        // bracket against the closed form.
        let state = dvector![0.9, -0.3, 0.4, 0.1, 0.8, -0.6];
        let lx = |x: &DVector<f64>| x[1] * x[5] - x[2] * x[4];
        let ly = |x: &DVector<f64>| x[2] * x[3] - x[0] * x[5];
        let lz_val = state[0] * state[4] - state[1] * state[3];
        assert_abs_diff_eq!(
            poisson_bracket(lx, ly, &state),
            -lz_val,
            epsilon = 1e-6
        );
    }

    #[test]
    fn hamiltonian_brackets_of_first_integrals_vanish() {
        // {H, L_z} = 0 pointwise for the Kepler Hamiltonian.
        let mu = 1.0;
        let ham = move |x: &DVector<f64>| {
            let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
            0.5 * (x[3] * x[3] + x[4] * x[4] + x[5] * x[5]) - mu / r
        };
        let lz = |x: &DVector<f64>| x[0] * x[4] - x[1] * x[3];
        let chart = kepler_chart();
        let mut worst: f64 = 0.0;
        for (i, t) in [0.0, 1.0, 3.0].iter().enumerate() {
            let el = dvector![1.2 + 0.1 * i as f64, 0.25, 0.7, 0.4, 2.2, 1.0];
            let state = chart.to_phase(&el, *t).unwrap();
            worst = worst.max(poisson_bracket(ham, lz, &state).abs());
        }
        assert!(worst < 1e-6, "worst {{H, L_z}} residual {worst}");
    }

    #[test]
    fn poisson_theorem_drift_along_kepler_flow() {
        let model = KeplerModel::default();
        let field = kepler::kepler_field(model);
        let chart = kepler_chart();
        let el = ref_elements();
        let x0 = chart.to_phase(&el, 0.0).unwrap();
        let period = kepler::orbital_period(
            &OrbitalElements::from_dvector(&el, 0.0).unwrap(),
            &model,
        );
        let cfg = IntegratorConfig::default();

        let lx = |x: &DVector<f64>| x[1] * x[5] - x[2] * x[4];
        let ly = |x: &DVector<f64>| x[2] * x[3] - x[0] * x[5];
        let drift = poisson_theorem_check(lx, ly, &field, 0.0, &x0, period, &cfg).unwrap();
        assert!(drift < 1e-6, "{{L_x, L_y}} drifted by {drift}");

        let same = poisson_theorem_check(lx, lx, &field, 0.0, &x0, period, &cfg).unwrap();
        assert_eq!(same, 0.0);
    }
}
