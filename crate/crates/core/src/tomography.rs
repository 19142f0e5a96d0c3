//! Polarization density matrix of emitted photon pairs and its
//! entanglement measures.
//!
//! Basis order is `(HH, HV, VH, VV)`; the pair index `AB` maps to
//! `2A + B` with `H = 0`, `V = 1`.
//!
//! ```text
//! θ_{AB,CD}(τ) = ∫₀^τ ⟨a_A†(0) a_B†(τ') a_D(τ') a_C(0)⟩ dτ'
//! ```
//!
//! For an emitted pure pair `Σ c_XY |XY⟩` this equals `c*_AB c_CD`, the
//! transpose of the usual density matrix. All metrics below are invariant
//! under that transposition.

use faer::Mat;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, Spectral, C64, ONE, ZERO};
use crate::model::{Channel, LindbladModel};
use crate::solver::{liouvillian, steady_state, vectorize, DensityMatrix, Modes};

#[derive(Clone, Debug)]
pub struct PairDensityMatrix {
    pub matrix: CMat,
    pub tau: f64,
    pub normalized: bool,
}

impl PairDensityMatrix {
    pub fn new(matrix: CMat, tau: f64) -> Self {
        Self {
            matrix,
            tau,
            normalized: false,
        }
    }

    pub fn pure(amplitudes: [C64; 4]) -> Self {
        let m = Mat::from_fn(4, 4, |i, j| amplitudes[i] * amplitudes[j].conj());
        Self {
            matrix: m,
            tau: 0.0,
            normalized: true,
        }
    }

    pub fn maximally_mixed() -> Self {
        Self {
            matrix: linalg::scaled(&linalg::identity(4), linalg::re(0.25)),
            tau: 0.0,
            normalized: true,
        }
    }

    pub fn trace(&self) -> C64 {
        linalg::trace(&self.matrix)
    }

    pub fn normalize(&self) -> Result<Self> {
        let tr = self.trace();
        if !(tr.re > 0.0) {
            return Err(Error::Undefined("pair density matrix has no weight".into()));
        }
        Ok(Self {
            matrix: linalg::scaled(&self.matrix, ONE / tr),
            tau: self.tau,
            normalized: true,
        })
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        linalg::hermitian_eigenvalues(&linalg::hermitian_part(&self.matrix))
    }

    /// Positive, trace-one copy for metric evaluation. Returns the clipped
    /// negative weight alongside.
    fn clipped(&self, tol: f64) -> Result<(CMat, f64)> {
        let (vals, vecs) = linalg::hermitian_eigen(&linalg::hermitian_part(&self.matrix))?;
        let lowest = vals.iter().copied().fold(f64::INFINITY, f64::min);
        if lowest < -tol {
            return Err(Error::Numerical(format!("pair state has eigenvalue {lowest:e}")));
        }
        let clipped: f64 = vals.iter().filter(|&&v| v < 0.0).map(|v| -v).sum();
        if clipped == 0.0 {
            return Ok((linalg::hermitian_part(&self.matrix), 0.0));
        }
        log::debug!("clipping {clipped:e} of negative weight");
        let kept: Vec<f64> = vals.iter().map(|&v| v.max(0.0)).collect();
        let total: f64 = kept.iter().sum();
        let m = Mat::from_fn(4, 4, |i, j| {
            (0..4)
                .map(|k| vecs[(i, k)] * vecs[(j, k)].conj() * (kept[k] / total))
                .sum::<C64>()
        });
        Ok((m, clipped))
    }
}

/// Tolerance on negative eigenvalues of normalized pair states.
const POSITIVITY_TOL: f64 = 1e-8;

/// `σ_y ⊗ σ_y` in the `(HH, HV, VH, VV)` basis: anti-diagonal
/// `(−1, 1, 1, −1)`.
fn spin_flip() -> CMat {
    Mat::from_fn(4, 4, |i, j| {
        if i + j == 3 {
            linalg::re(if i == 0 || i == 3 { -1.0 } else { 1.0 })
        } else {
            ZERO
        }
    })
}

/// Wootters concurrence `max{0, √λ₁ − √λ₂ − √λ₃ − √λ₄}` with `λ_i` the
/// eigenvalues of `ρ T ρ* T`, in decreasing order.
pub fn concurrence(rho: &PairDensityMatrix) -> Result<f64> {
    let (m, _) = rho.normalize()?.clipped(POSITIVITY_TOL)?;
    let t = spin_flip();
    let conj = Mat::from_fn(4, 4, |i, j| m[(i, j)].conj());
    let r = &(&(&m * &t) * &conj) * &t;
    let mut roots: Vec<f64> = linalg::eigenvalues(&r)?
        .iter()
        .map(|z| z.re.max(0.0).sqrt())
        .collect();
    roots.sort_by(|a, b| b.total_cmp(a));
    Ok((roots[0] - roots[1] - roots[2] - roots[3]).clamp(0.0, 1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateMetrics {
    /// `⟨ψ|ρ|ψ⟩` with `ψ = (HV + VH)/√2`.
    pub fidelity: f64,
    /// `√⟨ψ|ρ|ψ⟩`, the unsquared fidelity convention.
    pub root_fidelity: f64,
    /// `Tr ρ²`.
    pub purity: f64,
    /// `(4/3)(1 − Tr ρ²)`.
    pub linear_entropy: f64,
}

pub fn state_metrics(rho: &PairDensityMatrix) -> Result<StateMetrics> {
    let (m, _) = rho.normalize()?.clipped(POSITIVITY_TOL)?;
    let fidelity = 0.5 * (m[(1, 1)] + m[(1, 2)] + m[(2, 1)] + m[(2, 2)]).re;
    let purity = (&m * &m).diagonal().column_vector().iter().map(|z| z.re).sum::<f64>();
    Ok(StateMetrics {
        fidelity,
        root_fidelity: fidelity.max(0.0).sqrt(),
        purity,
        linear_entropy: 4.0 / 3.0 * (1.0 - purity),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TomographyPoint {
    pub tau: f64,
    pub concurrence: f64,
    pub fidelity: f64,
    pub root_fidelity: f64,
    pub purity: f64,
    pub linear_entropy: f64,
}

/// Regression-theorem series for all sixteen entries of `θ`.
pub struct Tomographer {
    modes: Vec<Modes>,
}

impl Tomographer {
    pub fn new(model: &LindbladModel) -> Result<Self> {
        let l = liouvillian(model);
        let rho = steady_state(&l)?;
        let spectral = l.spectral()?;
        Self::with_parts(model, &rho, &spectral)
    }

    pub fn with_parts(model: &LindbladModel, rho: &DensityMatrix, spectral: &Spectral) -> Result<Self> {
        let a = [
            model.emission_operator(Channel::AH)?.matrix().clone(),
            model.emission_operator(Channel::AV)?.matrix().clone(),
        ];
        let ad = [linalg::adjoint(&a[0]), linalg::adjoint(&a[1])];
        let mut modes = Vec::with_capacity(16);
        for row in 0..4 {
            let (pa, pb) = (row / 2, row % 2);
            for col in 0..4 {
                let (pc, pd) = (col / 2, col % 2);
                let initial = vectorize(&(&(&a[pc] * &rho.matrix) * &ad[pa]));
                let observable = &ad[pb] * &a[pd];
                modes.push(Modes::new(spectral, &observable, &initial));
            }
        }
        Ok(Self { modes })
    }

    /// Unnormalized `θ(τ)` from the closed-form integral of each mode.
    pub fn theta(&self, tau: f64) -> Result<PairDensityMatrix> {
        if !(tau > 0.0) {
            return Err(Error::Input("measurement time must be positive".into()));
        }
        let m = Mat::from_fn(4, 4, |i, j| self.modes[i * 4 + j].integral(tau));
        Ok(self.finish(m, tau))
    }

    /// `θ(τ)` by adaptive Simpson quadrature of the integrand.
    pub fn theta_quadrature(&self, tau: f64, rel_tol: f64) -> Result<PairDensityMatrix> {
        if !(tau > 0.0) {
            return Err(Error::Input("measurement time must be positive".into()));
        }
        let mut m = Mat::zeros(4, 4);
        for i in 0..4 {
            for j in 0..4 {
                let series = &self.modes[i * 4 + j];
                let scale = (0..=16)
                    .map(|k| series.eval(tau * k as f64 / 16.0).norm())
                    .fold(0.0, f64::max)
                    .max(f64::MIN_POSITIVE)
                    * tau;
                m[(i, j)] = adaptive_simpson(&|t| series.eval(t), 0.0, tau, rel_tol * scale, 50)
                    .ok_or(Error::NonConvergence { residual: rel_tol })?;
            }
        }
        Ok(self.finish(m, tau))
    }

    /// Integrand `⟨a_A†(0) a_B†(0) a_D(0) a_C(0)⟩` at zero delay.
    pub fn static_moments(&self) -> CMat {
        Mat::from_fn(4, 4, |i, j| self.modes[i * 4 + j].eval(0.0))
    }

    fn finish(&self, m: CMat, tau: f64) -> PairDensityMatrix {
        let defect = linalg::hermiticity_defect(&m);
        let scale = linalg::fro_norm(&m).max(f64::MIN_POSITIVE);
        if defect > 1e-10 * scale {
            log::warn!("θ(τ = {tau}) deviates from hermiticity by {defect:e}; symmetrizing");
        }
        PairDensityMatrix::new(linalg::hermitian_part(&m), tau)
    }

    pub fn point(&self, tau: f64) -> Result<TomographyPoint> {
        let theta = self.theta(tau)?.normalize()?;
        let m = state_metrics(&theta)?;
        Ok(TomographyPoint {
            tau,
            concurrence: concurrence(&theta)?,
            fidelity: m.fidelity,
            root_fidelity: m.root_fidelity,
            purity: m.purity,
            linear_entropy: m.linear_entropy,
        })
    }

    pub fn series(&self, taus: &[f64]) -> Result<Vec<TomographyPoint>> {
        taus.par_iter().map(|&t| self.point(t)).collect()
    }
}

/// Logarithmic grid of `n` points on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2);
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp())
        .collect()
}

fn adaptive_simpson(f: &dyn Fn(f64) -> C64, a: f64, b: f64, tol: f64, depth: u32) -> Option<C64> {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (fa + fm * 4.0 + fb) * ((b - a) / 6.0);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &dyn Fn(f64) -> C64,
    a: f64,
    b: f64,
    fa: C64,
    fm: C64,
    fb: C64,
    whole: C64,
    tol: f64,
    depth: u32,
) -> Option<C64> {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (fa + flm * 4.0 + fm) * ((m - a) / 6.0);
    let right = (fm + frm * 4.0 + fb) * ((b - m) / 6.0);
    let delta = left + right - whole;
    if delta.norm() <= 15.0 * tol {
        return Some(left + right + delta / 15.0);
    }
    if depth == 0 {
        return None;
    }
    Some(
        simpson_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)?
            + simpson_step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)?,
    )
}

/// `θ(τ)` directly from a model, for one-off evaluations.
pub fn theta(model: &LindbladModel, tau: f64) -> Result<PairDensityMatrix> {
    Tomographer::new(model)?.theta(tau)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, re};

    fn bell() -> PairDensityMatrix {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        PairDensityMatrix::pure([ZERO, re(h), re(h), ZERO])
    }

    #[test]
    fn bell_state_is_maximally_entangled() {
        let b = bell();
        assert!((concurrence(&b).unwrap() - 1.0).abs() < 1e-12);
        let m = state_metrics(&b).unwrap();
        assert!((m.fidelity - 1.0).abs() < 1e-12);
        assert!((m.purity - 1.0).abs() < 1e-12);
        assert!(m.linear_entropy.abs() < 1e-12);
    }

    #[test]
    fn maximally_mixed_state() {
        let r = PairDensityMatrix::maximally_mixed();
        assert!(concurrence(&r).unwrap().abs() < 1e-12);
        let m = state_metrics(&r).unwrap();
        assert!((m.fidelity - 0.25).abs() < 1e-12);
        assert!((m.purity - 0.25).abs() < 1e-12);
        assert!((m.linear_entropy - 1.0).abs() < 1e-12);
    }

    #[test]
    fn product_state_has_no_concurrence() {
        let (a, b) = ([c(0.6, 0.0), c(0.0, 0.8)], [c(0.28, 0.96), re(0.0)]);
        let amps = [a[0] * b[0], a[0] * b[1], a[1] * b[0], a[1] * b[1]];
        assert!(concurrence(&PairDensityMatrix::pure(amps)).unwrap() < 1e-7);
    }

    #[test]
    fn non_positive_input_is_rejected() {
        let mut m = PairDensityMatrix::maximally_mixed();
        m.matrix[(0, 0)] = re(-0.5);
        m.matrix[(1, 1)] = re(1.0);
        assert!(concurrence(&m).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn unitary2(a: f64, b: f64, g: f64) -> [[C64; 2]; 2] {
            let (ca, sa) = (a.cos(), a.sin());
            [
                [C64::from_polar(ca, b), C64::from_polar(sa, g)],
                [-C64::from_polar(sa, -g), C64::from_polar(ca, -b)],
            ]
        }

        proptest! {
            #[test]
            fn concurrence_is_invariant_under_local_unitaries(
                a in 0.0f64..3.0, b in 0.0f64..3.0, g in 0.0f64..3.0,
                p in 0.0f64..3.0, q in 0.0f64..3.0, r in 0.0f64..3.0,
                mix in 0.0f64..1.0, w in 0.0f64..1.5,
            ) {
                let base = {
                    let amps = [re(w.cos()), re(0.0), re(0.0), C64::from_polar(w.sin(), 0.3)];
                    let pure = PairDensityMatrix::pure(amps).matrix;
                    let id = linalg::identity(4);
                    Mat::from_fn(4, 4, |i, j| pure[(i, j)] * (1.0 - mix) + id[(i, j)] * (mix / 4.0))
                };
                let (u1, u2) = (unitary2(a, b, g), unitary2(p, q, r));
                let u = Mat::from_fn(4, 4, |i, j| u1[i / 2][j / 2] * u2[i % 2][j % 2]);
                let rotated = &(&u * &base) * &linalg::adjoint(&u);
                let c0 = concurrence(&PairDensityMatrix { matrix: base, tau: 0.0, normalized: true }).unwrap();
                let c1 = concurrence(&PairDensityMatrix { matrix: rotated, tau: 0.0, normalized: true }).unwrap();
                prop_assert!((c0 - c1).abs() < 1e-8);
            }
        }
    }
}
