//! Liouvillian, steady state and regression-theorem correlators.
//!
//! Density matrices are vectorized column-major, `vec(ρ)[i + j·d] = ρ_ij`,
//! so that `vec(AXB) = (Bᵀ ⊗ A) vec(X)`.

mod cavity;
mod sensors;
mod spectrum;

pub use cavity::{
    cavity_observables, counting_moments, polarization_correlations, polarization_point, CavityObservables,
    CountingMoments, PolarizationPoint,
};
pub use sensors::{
    g2_autocorrelation, g2_diagonal, g2_explicit, g2_map, g2_pair, sensor_population, Engine, SensorMoments,
    SensorSolver, TwoPhotonMap,
};
pub use spectrum::{emission_spectrum, emission_spectrum_resolvent, local_maxima, SpectrumResult};

use faer::Mat;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, Spectral, C64, I, ONE, ZERO};
use crate::model::LindbladModel;
use crate::propagate;
use crate::qspace::Operator;

/// Pivot ratio of the bordered LU below which the kernel is treated as
/// ill-conditioned.
const PIVOT_FLOOR: f64 = 1e-13;

type Sparse = Vec<(usize, usize, C64)>;

fn nonzeros(m: &CMat) -> Sparse {
    let mut out = Vec::new();
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let x = m[(i, j)];
            if x != ZERO {
                out.push((i, j, x));
            }
        }
    }
    out
}

fn identity_sparse(d: usize) -> Sparse {
    (0..d).map(|i| (i, i, ONE)).collect()
}

/// `target += coef · (p ⊗ q)`.
fn add_kron(target: &mut CMat, coef: C64, p: &Sparse, q: &Sparse, d: usize) {
    for &(i, j, x) in p {
        let xc = x * coef;
        for &(k, l, y) in q {
            target[(i * d + k, j * d + l)] += xc * y;
        }
    }
}

fn transpose(m: &CMat) -> CMat {
    m.transpose().to_owned()
}

fn conjugate(m: &CMat) -> CMat {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)].conj())
}

pub fn vectorize(m: &CMat) -> Vec<C64> {
    let d = m.nrows();
    let mut v = Vec::with_capacity(d * d);
    for j in 0..d {
        v.extend_from_slice(m.col_as_slice(j));
    }
    v
}

pub fn unvectorize(v: &[C64], d: usize) -> CMat {
    assert_eq!(v.len(), d * d);
    Mat::from_fn(d, d, |i, j| v[i + j * d])
}

/// Row vector `w` with `w · vec(X) = Tr[O X]`.
pub fn trace_functional(op: &CMat) -> Vec<C64> {
    vectorize(&transpose(op))
}

pub fn dot(w: &[C64], v: &[C64]) -> C64 {
    w.iter().zip(v).map(|(a, b)| a * b).sum()
}

#[derive(Clone, Debug)]
pub struct Superoperator {
    dim: usize,
    matrix: CMat,
}

impl Superoperator {
    /// `L(ρ) = −i[H, ρ] + Σ (r/2)(2OρO† − O†Oρ − ρO†O)`.
    pub fn from_parts(h: &CMat, collapse: &[(&CMat, f64)]) -> Self {
        let d = h.nrows();
        let dd = d * d;
        let mut l = Mat::zeros(dd, dd);
        let id = identity_sparse(d);
        add_kron(&mut l, -I, &id, &nonzeros(h), d);
        add_kron(&mut l, I, &nonzeros(&transpose(h)), &id, d);
        for &(o, rate) in collapse {
            let od = linalg::adjoint(o);
            let odo = &od * o;
            add_kron(&mut l, linalg::re(rate), &nonzeros(&conjugate(o)), &nonzeros(o), d);
            add_kron(&mut l, linalg::re(-0.5 * rate), &id, &nonzeros(&odo), d);
            add_kron(&mut l, linalg::re(-0.5 * rate), &nonzeros(&transpose(&odo)), &id, d);
        }
        Self { dim: d, matrix: l }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn apply_vec(&self, v: &[C64]) -> Vec<C64> {
        linalg::apply(&self.matrix, v)
    }

    pub fn apply(&self, rho: &CMat) -> CMat {
        unvectorize(&self.apply_vec(&vectorize(rho)), self.dim)
    }

    /// `Σ_i ⟨i| L(X) |i⟩` for every column: zero for a trace-preserving
    /// generator.
    pub fn trace_defect(&self) -> f64 {
        let d = self.dim;
        let t = trace_functional(&linalg::identity(d));
        linalg::apply_left(&t, &self.matrix)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }

    pub fn eigenvalues(&self) -> Result<Vec<C64>> {
        linalg::eigenvalues(&self.matrix)
    }

    pub fn spectral(&self) -> Result<Spectral> {
        Spectral::new(&self.matrix)
    }

    /// Largest magnitude of an entry, used as a scale for tolerances.
    pub fn scale(&self) -> f64 {
        linalg::one_norm(&self.matrix)
    }
}

pub fn liouvillian(model: &LindbladModel) -> Superoperator {
    let ops: Vec<(&CMat, f64)> = model.collapse.iter().map(|c| (c.op.matrix(), c.rate)).collect();
    Superoperator::from_parts(model.hamiltonian.matrix(), &ops)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SteadyMethod {
    Kernel,
    Propagation,
}

#[derive(Clone, Debug)]
pub struct DensityMatrix {
    pub matrix: CMat,
    /// `‖L vec(ρ)‖₂` of the returned state.
    pub residual: f64,
    pub method: SteadyMethod,
}

impl DensityMatrix {
    pub fn from_matrix(matrix: CMat) -> Self {
        Self {
            matrix,
            residual: f64::NAN,
            method: SteadyMethod::Kernel,
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn trace(&self) -> C64 {
        linalg::trace(&self.matrix)
    }

    /// `Tr[O ρ]`.
    pub fn expect(&self, op: &Operator) -> C64 {
        self.expect_matrix(op.matrix())
    }

    pub fn expect_matrix(&self, op: &CMat) -> C64 {
        let d = self.dim();
        let mut acc = ZERO;
        for j in 0..d {
            for i in 0..d {
                acc += op[(j, i)] * self.matrix[(i, j)];
            }
        }
        acc
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        let vals = linalg::hermitian_eigenvalues(&linalg::hermitian_part(&self.matrix))?;
        Ok(vals.into_iter().fold(f64::INFINITY, f64::min))
    }

    pub fn hermiticity_defect(&self) -> f64 {
        linalg::hermiticity_defect(&self.matrix)
    }

    /// Checks trace, hermiticity and positivity to the given tolerances.
    pub fn validate(&self, tol: f64, pos_tol: f64) -> Result<()> {
        let tr = self.trace();
        if (tr - ONE).norm() > tol {
            return Err(Error::Numerical(format!("trace {tr} differs from one")));
        }
        let h = self.hermiticity_defect();
        if h > tol {
            return Err(Error::NotHermitian(h));
        }
        let m = self.min_eigenvalue()?;
        if m < -pos_tol {
            return Err(Error::Numerical(format!("negative eigenvalue {m:e}")));
        }
        Ok(())
    }

    pub fn vectorized(&self) -> Vec<C64> {
        vectorize(&self.matrix)
    }
}

fn finalize(v: &[C64], d: usize) -> Result<CMat> {
    if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Numerical("non-finite steady state".into()));
    }
    let m = linalg::hermitian_part(&unvectorize(v, d));
    let tr = linalg::trace(&m);
    if tr.norm() < 1e-300 {
        return Err(Error::Numerical("steady state has zero trace".into()));
    }
    Ok(linalg::scaled(&m, ONE / tr))
}

fn residual(l: &Superoperator, rho: &CMat) -> f64 {
    linalg::vec_norm(&l.apply_vec(&vectorize(rho)))
}

/// Unique steady state of `l`.
///
/// The kernel is obtained from a dense LU of `L` with one row replaced by
/// the trace functional. When that system is singular to working
/// precision, the state is obtained instead by long-time propagation from
/// two different initial states; disagreement between them is reported as
/// a degenerate kernel.
pub fn steady_state(l: &Superoperator) -> Result<DensityMatrix> {
    let d = l.dim();
    let dd = d * d;
    let mut a = l.matrix.clone();
    let t = trace_functional(&linalg::identity(d));
    for (j, &x) in t.iter().enumerate() {
        a[(0, j)] = x;
    }
    let mut b: CMat = Mat::zeros(dd, 1);
    b[(0, 0)] = ONE;
    let lu = a.partial_piv_lu();
    let u = lu.U();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for i in 0..dd {
        let x = u[(i, i)].norm();
        lo = lo.min(x);
        hi = hi.max(x);
    }
    let conditioned = hi > 0.0 && lo / hi > PIVOT_FLOOR;
    if conditioned {
        use faer::prelude::Solve;
        let mut x = lu.solve(&b);
        // One step of iterative refinement.
        let r = &b - &a * &x;
        x += lu.solve(&r);
        let v = linalg::col_to_vec(&x);
        if let Ok(rho) = finalize(&v, d) {
            let res = residual(l, &rho);
            let scale = l.scale().max(1.0);
            if res <= 1e-9 * scale {
                return Ok(DensityMatrix {
                    matrix: rho,
                    residual: res,
                    method: SteadyMethod::Kernel,
                });
            }
            log::warn!("kernel solve residual {res:e}; falling back to propagation");
        }
    } else {
        log::warn!("bordered Liouvillian is singular to working precision (pivot ratio {:e})", lo / hi);
    }
    steady_state_by_propagation(l)
}

/// Steady state as the long-time limit of `ρ̇ = L ρ`.
pub fn steady_state_by_propagation(l: &Superoperator) -> Result<DensityMatrix> {
    let d = l.dim();
    let scale = l.scale().max(1.0);
    let t0 = 1.0 / scale;
    let tol = 1e-13;
    let t_max = 1e9;
    let mut ground = Mat::zeros(d, d);
    ground[(0, 0)] = ONE;
    let mixed = linalg::scaled(&linalg::identity(d), linalg::re(1.0 / d as f64));
    let (va, ta) = propagate::long_time_limit(&l.matrix, &vectorize(&ground), t0, t_max, tol);
    let (vb, _) = propagate::long_time_limit(&l.matrix, &vectorize(&mixed), t0, t_max, tol);
    let ra = finalize(&va, d)?;
    let rb = finalize(&vb, d)?;
    let gap = linalg::max_abs_diff(&ra, &rb);
    if gap > 1e-8 {
        return Err(Error::DegenerateKernel(format!(
            "long-time limits from distinct initial states differ by {gap:e}"
        )));
    }
    let res = residual(l, &ra);
    if !(res <= 1e-8 * scale) {
        return Err(Error::NonConvergence { residual: res });
    }
    log::info!("steady state by propagation to t = {ta:e}");
    Ok(DensityMatrix {
        matrix: ra,
        residual: res,
        method: SteadyMethod::Propagation,
    })
}

fn check_ascending(grid: &[f64]) -> Result<()> {
    if grid.windows(2).any(|w| !(w[1] > w[0])) || grid.iter().any(|x| !x.is_finite()) {
        return Err(Error::GridOrder);
    }
    Ok(())
}

/// Spectral form of `τ ↦ Tr[B e^{Lτ} X]`: amplitudes `w_k` and rates `λ_k`.
#[derive(Clone, Debug)]
pub struct Modes {
    pub rates: Vec<C64>,
    pub weights: Vec<C64>,
}

impl Modes {
    pub fn new(spectral: &Spectral, observable: &CMat, initial: &[C64]) -> Self {
        let coeffs = spectral.coefficients(initial);
        let t = trace_functional(observable);
        let proj = linalg::apply_left(&t, &spectral.right);
        let weights = proj.iter().zip(&coeffs).map(|(p, c)| p * c).collect();
        Self {
            rates: spectral.values.clone(),
            weights,
        }
    }

    pub fn eval(&self, tau: f64) -> C64 {
        self.rates
            .iter()
            .zip(&self.weights)
            .map(|(l, w)| w * (l * tau).exp())
            .sum()
    }

    /// `∫₀^τ` of the series.
    pub fn integral(&self, tau: f64) -> C64 {
        self.rates
            .iter()
            .zip(&self.weights)
            .map(|(&l, w)| w * phi1(l, tau))
            .sum()
    }
}

/// `(e^{λτ} − 1)/λ`, continuous at `λ = 0`.
pub fn phi1(l: C64, tau: f64) -> C64 {
    let z = l * tau;
    if z.norm() < 1e-5 {
        linalg::re(tau) * (ONE + z * 0.5 + z * z / 6.0 + z * z * z / 24.0)
    } else {
        (z.exp() - ONE) / l
    }
}

/// `(e^{λτ} − 1 − λτ)/λ²`, continuous at `λ = 0`.
pub fn phi2(l: C64, tau: f64) -> C64 {
    let z = l * tau;
    if z.norm() < 1e-4 {
        linalg::re(tau * tau) * (linalg::re(0.5) + z / 6.0 + z * z / 24.0 + z * z * z / 120.0)
    } else {
        (z.exp() - ONE - z) / (l * l)
    }
}

/// `⟨A(0) B(τ)⟩ = Tr[B e^{Lτ}(ρ A)]` on an ascending grid.
pub fn two_time_correlator(
    l: &Superoperator,
    rho: &DensityMatrix,
    a: &Operator,
    b: &Operator,
    tau: &[f64],
) -> Result<Vec<C64>> {
    let spectral = l.spectral()?;
    two_time_correlator_with(&spectral, rho, a, b, tau)
}

pub fn two_time_correlator_with(
    spectral: &Spectral,
    rho: &DensityMatrix,
    a: &Operator,
    b: &Operator,
    tau: &[f64],
) -> Result<Vec<C64>> {
    check_ascending(tau)?;
    if tau.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::Input("delays must be non-negative".into()));
    }
    let x = vectorize(&(&rho.matrix * a.matrix()));
    let modes = Modes::new(spectral, b.matrix(), &x);
    Ok(tau.iter().map(|&t| modes.eval(t)).collect())
}

/// The same correlator by direct exponentiation of `L`.
pub fn two_time_correlator_propagated(
    l: &Superoperator,
    rho: &DensityMatrix,
    a: &Operator,
    b: &Operator,
    tau: &[f64],
) -> Result<Vec<C64>> {
    check_ascending(tau)?;
    let x = vectorize(&(&rho.matrix * a.matrix()));
    let t = trace_functional(b.matrix());
    Ok(propagate::evolve_grid(&l.matrix, &x, tau)
        .iter()
        .map(|v| dot(&t, v))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::re;
    use crate::model::{self, Cavity, Collapse, ModelConfig};
    use crate::qspace::{CompositeSpace, HilbertFactor};

    fn qubit(omega: f64, gamma: f64) -> LindbladModel {
        let space = CompositeSpace::single(HilbertFactor::qubit());
        let s = space.qubit_lowering(0).unwrap();
        let h = (&s.adjoint() * &s).scale_re(omega);
        LindbladModel::from_parts(h, vec![Collapse { op: s, rate: gamma, label: "s".into() }]).unwrap()
    }

    fn sorted(mut v: Vec<C64>) -> Vec<C64> {
        v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        v
    }

    #[test]
    fn decaying_qubit_spectrum() {
        let (w, g) = (3.0, 0.7);
        let l = liouvillian(&qubit(w, g));
        let got = sorted(l.eigenvalues().unwrap());
        let want = sorted(vec![re(0.0), C64::new(-g / 2.0, w), C64::new(-g / 2.0, -w), re(-g)]);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).norm() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn closed_dynamics_has_imaginary_spectrum() {
        let space = CompositeSpace::single(HilbertFactor::biexciton());
        let h = Operator::new(space, Mat::from_fn(4, 4, |i, j| if i == j { re(i as f64) } else { ZERO })).unwrap();
        let m = LindbladModel::from_parts(h, vec![]).unwrap();
        let l = liouvillian(&m);
        assert!(l.eigenvalues().unwrap().iter().all(|z| z.re.abs() < 1e-12));
        assert!(matches!(steady_state(&l), Err(Error::DegenerateKernel(_))));
    }

    #[test]
    fn trace_functional_is_annihilated() {
        let cfg = ModelConfig {
            kappa: 10.0,
            g: 100.0,
            cavity: Cavity::SingleH,
            n_max: Some(2),
            ..ModelConfig::bare(4000.0, 1000.0)
        };
        let l = liouvillian(&model::build(&cfg).unwrap());
        assert!(l.trace_defect() < 1e-10);
    }

    #[test]
    fn undriven_steady_state_is_ground() {
        let cfg = ModelConfig {
            kappa: 10.0,
            g: 100.0,
            cavity: Cavity::SingleH,
            n_max: Some(3),
            ..ModelConfig::bare(4000.0, 0.0)
        };
        let l = liouvillian(&model::build(&cfg).unwrap());
        let rho = steady_state(&l).unwrap();
        assert!((rho.matrix[(0, 0)] - ONE).norm() < 1e-12);
        assert!(rho.residual < 1e-10);
    }

    #[test]
    fn correlator_at_zero_delay_is_static_moment() {
        let l = liouvillian(&model::build(&ModelConfig::bare(2000.0, 500.0)).unwrap());
        let m = model::build(&ModelConfig::bare(2000.0, 500.0)).unwrap();
        let rho = steady_state(&l).unwrap();
        let s = m.emission_operator(model::Channel::SigmaV).unwrap();
        let c = two_time_correlator(&l, &rho, &s.adjoint(), s, &[0.0, 0.5]).unwrap();
        let stat = rho.expect(&(&s.adjoint() * s));
        assert!((c[0] - stat).norm() < 1e-10);
        let id = Operator::identity(&m.space);
        let flat = two_time_correlator(&l, &rho, &id, s, &[0.0, 0.3, 2.0]).unwrap();
        let mean = rho.expect(s);
        assert!(flat.iter().all(|z| (z - mean).norm() < 1e-10));
        assert!(matches!(two_time_correlator(&l, &rho, &id, s, &[1.0, 0.5]), Err(Error::GridOrder)));
    }

    #[test]
    fn spectral_and_propagated_correlators_agree() {
        let m = model::build(&ModelConfig::bare(200.0, 50.0)).unwrap();
        let l = liouvillian(&m);
        let rho = steady_state(&l).unwrap();
        let s = m.emission_operator(model::Channel::SigmaH).unwrap();
        let grid: Vec<f64> = (0..40).map(|k| 0.05 * k as f64).collect();
        let a = two_time_correlator(&l, &rho, &s.adjoint(), s, &grid).unwrap();
        let b = two_time_correlator_propagated(&l, &rho, &s.adjoint(), s, &grid).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).norm() < 1e-10);
        }
    }

    #[test]
    fn phi_functions_are_continuous() {
        for l in [C64::new(-1e-7, 2e-7), C64::new(-3.0, 40.0)] {
            let t = 0.7;
            let exact1 = if l.norm() > 1e-3 { ((l * t).exp() - ONE) / l } else { re(t) + l * t * t / 2.0 };
            assert!((phi1(l, t) - exact1).norm() < 1e-12);
            let exact2 = if l.norm() > 1e-3 {
                ((l * t).exp() - ONE - l * t) / (l * l)
            } else {
                re(t * t / 2.0) + l * t * t * t / 6.0
            };
            assert!((phi2(l, t) - exact2).norm() < 1e-12);
        }
    }
}
