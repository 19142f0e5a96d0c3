//! Operators on truncated tensor-product Hilbert spaces.
//!
//! A [`CompositeSpace`] is an ordered list of factors. Composite basis
//! indices are row-major: the first factor is the most significant digit,
//! matching `A ⊗ B` Kronecker ordering.
//!
//! The biexciton factor uses the basis `(G, H, V, B)` with
//!
//! ```text
//! σ_H = |G⟩⟨H| − |H⟩⟨B|        σ_V = |G⟩⟨V| + |V⟩⟨B|
//! ```
//!
//! These follow from `σ_H = (σ↑ + σ↓)/√2`, `σ_V = (σ↑ − σ↓)/√2` with
//! `|B⟩ = −|↑↓⟩`. The sign on `|B⟩` puts the vertically driven block
//! `(G, V, B)` in the form `[[0, Ω, 0], [Ω, Δ_X, Ω], [0, Ω, 2Δ_X − χ]]`.
//! The relative minus sign between the two cascades is physical: it is what
//! lets a circularly polarized drive reach `|B⟩` by two-photon absorption.

use std::fmt;
use std::ops::{Add, Mul, Sub};
use std::sync::Arc;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64, ONE, ZERO};

pub const DEFAULT_DIM_CAP: usize = 4096;

pub const G: usize = 0;
pub const H: usize = 1;
pub const V: usize = 2;
pub const B: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Polarization {
    H,
    V,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Spin {
    Up,
    Down,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FactorKind {
    Biexciton,
    Boson { n_max: usize },
    Qubit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct HilbertFactor {
    kind: FactorKind,
}

impl HilbertFactor {
    pub fn biexciton() -> Self {
        Self {
            kind: FactorKind::Biexciton,
        }
    }

    pub fn boson(n_max: usize) -> Result<Self> {
        if n_max == 0 {
            return Err(Error::Config("boson truncation must be at least 1".into()));
        }
        Ok(Self {
            kind: FactorKind::Boson { n_max },
        })
    }

    pub fn qubit() -> Self {
        Self {
            kind: FactorKind::Qubit,
        }
    }

    pub fn kind(&self) -> FactorKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            FactorKind::Biexciton => 4,
            FactorKind::Boson { n_max } => n_max + 1,
            FactorKind::Qubit => 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CompositeSpace {
    factors: Vec<HilbertFactor>,
    dim: usize,
}

impl CompositeSpace {
    pub fn new(factors: Vec<HilbertFactor>) -> Result<Arc<Self>> {
        Self::with_cap(factors, DEFAULT_DIM_CAP)
    }

    pub fn with_cap(factors: Vec<HilbertFactor>, cap: usize) -> Result<Arc<Self>> {
        if factors.is_empty() {
            return Err(Error::Dimension("a space needs at least one factor".into()));
        }
        let dim = factors
            .iter()
            .try_fold(1usize, |acc, f| acc.checked_mul(f.dim()))
            .unwrap_or(usize::MAX);
        if dim > cap {
            return Err(Error::DimensionCap { dim, cap });
        }
        Ok(Arc::new(Self { factors, dim }))
    }

    pub fn single(factor: HilbertFactor) -> Arc<Self> {
        Arc::new(Self {
            dim: factor.dim(),
            factors: vec![factor],
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn factors(&self) -> &[HilbertFactor] {
        &self.factors
    }

    pub fn factor(&self, slot: usize) -> Result<HilbertFactor> {
        self.factors.get(slot).copied().ok_or(Error::FactorIndex {
            index: slot,
            len: self.factors.len(),
        })
    }

    /// Composite index of a product basis state.
    pub fn index_of(&self, digits: &[usize]) -> usize {
        assert_eq!(digits.len(), self.factors.len());
        digits
            .iter()
            .zip(&self.factors)
            .fold(0, |acc, (&d, f)| {
                assert!(d < f.dim());
                acc * f.dim() + d
            })
    }

    /// Inverse of [`index_of`](Self::index_of).
    pub fn digits_of(&self, mut index: usize) -> Vec<usize> {
        let mut digits = vec![0; self.factors.len()];
        for (slot, f) in self.factors.iter().enumerate().rev() {
            digits[slot] = index % f.dim();
            index /= f.dim();
        }
        digits
    }

    /// Product basis ket as a dense vector.
    pub fn basis_ket(&self, digits: &[usize]) -> Vec<C64> {
        let mut v = vec![ZERO; self.dim];
        v[self.index_of(digits)] = ONE;
        v
    }

    pub fn extended(&self, extra: &[HilbertFactor], cap: usize) -> Result<Arc<Self>> {
        let mut factors = self.factors.clone();
        factors.extend_from_slice(extra);
        Self::with_cap(factors, cap)
    }

    /// Embedded annihilator of the boson at `slot`.
    pub fn annihilator(self: &Arc<Self>, slot: usize) -> Result<Operator> {
        match self.factor(slot)?.kind() {
            FactorKind::Boson { n_max } => embed(&boson_annihilator(n_max)?, self, slot),
            _ => Err(Error::FactorKind {
                index: slot,
                expected: "boson",
            }),
        }
    }

    /// Embedded qubit lowering operator `|0⟩⟨1|` at `slot`.
    pub fn qubit_lowering(self: &Arc<Self>, slot: usize) -> Result<Operator> {
        match self.factor(slot)?.kind() {
            FactorKind::Qubit => embed(&qubit_lowering(), self, slot),
            _ => Err(Error::FactorKind {
                index: slot,
                expected: "qubit",
            }),
        }
    }

    pub fn biexciton_lowering(self: &Arc<Self>, slot: usize, pol: Polarization) -> Result<Operator> {
        self.expect_biexciton(slot)?;
        embed(&lowering_biexciton(pol), self, slot)
    }

    /// Embedded `|to⟩⟨from|` on the biexciton factor.
    pub fn biexciton_transition(self: &Arc<Self>, slot: usize, to: usize, from: usize) -> Result<Operator> {
        self.expect_biexciton(slot)?;
        embed(&biexciton_transition(to, from), self, slot)
    }

    fn expect_biexciton(&self, slot: usize) -> Result<()> {
        match self.factor(slot)?.kind() {
            FactorKind::Biexciton => Ok(()),
            _ => Err(Error::FactorKind {
                index: slot,
                expected: "biexciton",
            }),
        }
    }
}

#[derive(Clone)]
pub struct Operator {
    space: Arc<CompositeSpace>,
    matrix: CMat,
}

impl fmt::Debug for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Operator")
            .field("dim", &self.space.dim())
            .field("factors", &self.space.factors())
            .finish()
    }
}

impl Operator {
    pub fn new(space: Arc<CompositeSpace>, matrix: CMat) -> Result<Self> {
        if matrix.nrows() != space.dim() || matrix.ncols() != space.dim() {
            return Err(Error::Dimension(format!(
                "matrix is {}x{}, space has dim {}",
                matrix.nrows(),
                matrix.ncols(),
                space.dim()
            )));
        }
        Ok(Self { space, matrix })
    }

    /// Builds an operator and verifies it is Hermitian to `1e-12`.
    pub fn hermitian(space: Arc<CompositeSpace>, matrix: CMat) -> Result<Self> {
        let op = Self::new(space, matrix)?;
        let defect = linalg::hermiticity_defect(&op.matrix);
        if defect > 1e-12 {
            return Err(Error::NotHermitian(defect));
        }
        Ok(op)
    }

    pub fn zeros(space: &Arc<CompositeSpace>) -> Self {
        let d = space.dim();
        Self {
            space: space.clone(),
            matrix: Mat::zeros(d, d),
        }
    }

    pub fn identity(space: &Arc<CompositeSpace>) -> Self {
        Self {
            space: space.clone(),
            matrix: linalg::identity(space.dim()),
        }
    }

    pub fn space(&self) -> &Arc<CompositeSpace> {
        &self.space
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMat {
        self.matrix
    }

    pub fn elem(&self, row: usize, col: usize) -> C64 {
        self.matrix[(row, col)]
    }

    pub fn adjoint(&self) -> Self {
        Self {
            space: self.space.clone(),
            matrix: linalg::adjoint(&self.matrix),
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            space: self.space.clone(),
            matrix: linalg::scaled(&self.matrix, s),
        }
    }

    pub fn scale_re(&self, s: f64) -> Self {
        self.scale(linalg::re(s))
    }

    pub fn pow(&self, n: u32) -> Self {
        let mut out = Self::identity(&self.space);
        for _ in 0..n {
            out = &out * self;
        }
        out
    }

    pub fn commutator(&self, other: &Self) -> Self {
        &(self * other) - &(other * self)
    }

    pub fn hermiticity_defect(&self) -> f64 {
        linalg::hermiticity_defect(&self.matrix)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermiticity_defect() <= tol
    }

    pub fn apply(&self, ket: &[C64]) -> Vec<C64> {
        linalg::apply(&self.matrix, ket)
    }

    /// `⟨bra| self |ket⟩`.
    pub fn matrix_element(&self, bra: &[C64], ket: &[C64]) -> C64 {
        let v = self.apply(ket);
        bra.iter().zip(&v).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn trace(&self) -> C64 {
        linalg::trace(&self.matrix)
    }

    /// Largest entry magnitude of `self − other`.
    pub fn distance(&self, other: &Self) -> f64 {
        linalg::max_abs_diff(&self.matrix, &other.matrix)
    }

    /// `self ⊗ I` on `target`, whose leading factors must equal this space's.
    pub fn extend_to(&self, target: &Arc<CompositeSpace>) -> Result<Self> {
        let n = self.space.factors().len();
        if target.factors().len() < n || target.factors()[..n] != *self.space.factors() {
            return Err(Error::Dimension(
                "target space does not start with the operator's factors".into(),
            ));
        }
        let trailing = target.dim() / self.dim();
        let matrix = linalg::kron(&self.matrix, &linalg::identity(trailing));
        Ok(Self {
            space: target.clone(),
            matrix,
        })
    }

    fn check_same(&self, other: &Self) {
        assert!(
            Arc::ptr_eq(&self.space, &other.space) || self.space == other.space,
            "operators act on different spaces"
        );
    }
}

impl Mul for &Operator {
    type Output = Operator;
    fn mul(self, rhs: &Operator) -> Operator {
        self.check_same(rhs);
        Operator {
            space: self.space.clone(),
            matrix: &self.matrix * &rhs.matrix,
        }
    }
}

impl Add for &Operator {
    type Output = Operator;
    fn add(self, rhs: &Operator) -> Operator {
        self.check_same(rhs);
        Operator {
            space: self.space.clone(),
            matrix: &self.matrix + &rhs.matrix,
        }
    }
}

impl Sub for &Operator {
    type Output = Operator;
    fn sub(self, rhs: &Operator) -> Operator {
        self.check_same(rhs);
        Operator {
            space: self.space.clone(),
            matrix: &self.matrix - &rhs.matrix,
        }
    }
}

fn local(factor: HilbertFactor, f: impl Fn(usize, usize) -> C64) -> Operator {
    let space = CompositeSpace::single(factor);
    let d = space.dim();
    Operator {
        matrix: Mat::from_fn(d, d, f),
        space,
    }
}

/// Biexciton lowering operator for one linear polarization, on the bare
/// 4-level factor.
pub fn lowering_biexciton(pol: Polarization) -> Operator {
    let (x, sign_b) = match pol {
        Polarization::H => (H, -1.0),
        Polarization::V => (V, 1.0),
    };
    local(HilbertFactor::biexciton(), |i, j| {
        if i == G && j == x {
            ONE
        } else if i == x && j == B {
            linalg::re(sign_b)
        } else {
            ZERO
        }
    })
}

/// Spin-exciton lowering operators in the same basis, `|↑⟩ = (H+V)/√2`,
/// `|↓⟩ = (H−V)/√2`, `|↑↓⟩ = −|B⟩`.
pub fn lowering_spin(spin: Spin) -> Operator {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    // σ↑ = |G⟩⟨↑| + |↓⟩⟨↑↓|,  σ↓ = |G⟩⟨↓| + |↑⟩⟨↑↓|
    let (ket_g, ket_b): ([f64; 4], [f64; 4]) = match spin {
        Spin::Up => ([0.0, s, s, 0.0], [0.0, -s, s, 0.0]),
        Spin::Down => ([0.0, s, -s, 0.0], [0.0, -s, -s, 0.0]),
    };
    local(HilbertFactor::biexciton(), |i, j| {
        let mut v = 0.0;
        if i == G {
            v += ket_g[j];
        }
        if j == B {
            v += ket_b[i];
        }
        linalg::re(v)
    })
}

pub fn biexciton_transition(to: usize, from: usize) -> Operator {
    assert!(to < 4 && from < 4);
    local(HilbertFactor::biexciton(), |i, j| {
        if i == to && j == from {
            ONE
        } else {
            ZERO
        }
    })
}

/// Truncated annihilator `a|n⟩ = √n |n−1⟩`, `n ≤ n_max`.
pub fn boson_annihilator(n_max: usize) -> Result<Operator> {
    Ok(local(HilbertFactor::boson(n_max)?, |i, j| {
        if j == i + 1 {
            linalg::re((j as f64).sqrt())
        } else {
            ZERO
        }
    }))
}

pub fn qubit_lowering() -> Operator {
    local(HilbertFactor::qubit(), |i, j| if i == 0 && j == 1 { ONE } else { ZERO })
}

/// `I ⊗ … ⊗ op ⊗ … ⊗ I` with `op` at `slot` of `target`.
pub fn embed(op: &Operator, target: &Arc<CompositeSpace>, slot: usize) -> Result<Operator> {
    let factor = target.factor(slot)?;
    if op.space.factors().len() != 1 || op.space.factors()[0] != factor {
        return Err(Error::Dimension(format!(
            "operator of dim {} does not act on factor {slot} (dim {})",
            op.dim(),
            factor.dim()
        )));
    }
    let left: usize = target.factors()[..slot].iter().map(|f| f.dim()).product();
    let right: usize = target.factors()[slot + 1..].iter().map(|f| f.dim()).product();
    let d = factor.dim();
    let n = target.dim();
    let mut m = Mat::zeros(n, n);
    for i in 0..d {
        for j in 0..d {
            let x = op.matrix[(i, j)];
            if x == ZERO {
                continue;
            }
            for l in 0..left {
                for r in 0..right {
                    m[((l * d + i) * right + r, (l * d + j) * right + r)] = x;
                }
            }
        }
    }
    Ok(Operator {
        space: target.clone(),
        matrix: m,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::re;

    fn ket4(i: usize) -> Vec<C64> {
        let mut v = vec![ZERO; 4];
        v[i] = ONE;
        v
    }

    fn amp(op: &Operator, to: usize, from: usize) -> C64 {
        op.apply(&ket4(from))[to]
    }

    #[test]
    fn sigma_h_lowers_h_to_g_and_b_to_h() {
        let sh = lowering_biexciton(Polarization::H);
        assert_eq!(amp(&sh, G, H), ONE);
        assert_eq!(amp(&sh, H, B).norm(), 1.0);
        let sh2 = &sh * &sh;
        assert_eq!(amp(&sh2, G, B).norm(), 1.0);
        assert!(sh2.apply(&ket4(H)).iter().all(|z| *z == ZERO));
    }

    #[test]
    fn sigma_v_lowers_v_to_g_and_b_to_v() {
        let sv = lowering_biexciton(Polarization::V);
        assert_eq!(amp(&sv, G, V), ONE);
        assert_eq!(amp(&sv, V, B), ONE);
        assert_eq!(amp(&(&sv * &sv), G, B), ONE);
    }

    #[test]
    fn cubes_vanish_and_cross_products_annihilate_b() {
        for pol in [Polarization::H, Polarization::V] {
            let s = lowering_biexciton(pol);
            assert!(linalg::fro_norm(s.pow(3).matrix()) == 0.0);
        }
        let sh = lowering_biexciton(Polarization::H);
        let sv = lowering_biexciton(Polarization::V);
        // Emitting H then V from |B⟩ is impossible: each cascade keeps its
        // polarization.
        assert!(vec_is_zero(&(&sh * &sv).apply(&ket4(B))));
        assert!(vec_is_zero(&(&sv * &sh).apply(&ket4(B))));
    }

    #[test]
    fn linear_operators_derive_from_spin_operators() {
        let up = lowering_spin(Spin::Up);
        let down = lowering_spin(Spin::Down);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let h = (&up + &down).scale_re(s);
        let v = (&up - &down).scale_re(s);
        assert!(h.distance(&lowering_biexciton(Polarization::H)) < 1e-15);
        assert!(v.distance(&lowering_biexciton(Polarization::V)) < 1e-15);
    }

    #[test]
    fn number_operator_and_annihilator() {
        let a = boson_annihilator(4).unwrap();
        let n = &a.adjoint() * &a;
        let ket = |k: usize| {
            let mut v = vec![ZERO; 5];
            v[k] = ONE;
            v
        };
        assert_eq!(a.apply(&ket(1))[0], ONE);
        assert!(vec_is_zero(&a.apply(&ket(0))));
        for k in 0..=4 {
            assert!((n.apply(&ket(k))[k] - re(k as f64)).norm() < 1e-14);
        }
    }

    #[test]
    fn canonical_commutator_holds_below_truncation() {
        for n_max in [1usize, 3, 6] {
            let a = boson_annihilator(n_max).unwrap();
            let comm = a.commutator(&a.adjoint());
            for i in 0..n_max {
                for j in 0..n_max {
                    let expect = if i == j { ONE } else { ZERO };
                    assert!((comm.elem(i, j) - expect).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn embedding_identity_and_disjoint_commutation() {
        let space = CompositeSpace::new(vec![HilbertFactor::biexciton(), HilbertFactor::boson(3).unwrap()])
            .unwrap();
        assert_eq!(space.dim(), 16);
        let id = embed(&Operator::identity(&CompositeSpace::single(HilbertFactor::boson(3).unwrap())), &space, 1)
            .unwrap();
        assert!(id.distance(&Operator::identity(&space)) == 0.0);
        let a = space.annihilator(1).unwrap();
        let sh = space.biexciton_lowering(0, Polarization::H).unwrap();
        assert!(linalg::fro_norm(a.commutator(&sh).matrix()) == 0.0);
    }

    #[test]
    fn embedded_product_minus_number_is_identity_below_truncation() {
        let space = CompositeSpace::new(vec![HilbertFactor::biexciton(), HilbertFactor::boson(3).unwrap()])
            .unwrap();
        let a = space.annihilator(1).unwrap();
        let diff = &(&a * &a.adjoint()) - &(&a.adjoint() * &a);
        for idx in 0..space.dim() {
            let digits = space.digits_of(idx);
            let expect = if digits[1] < 3 { 1.0 } else { -3.0 };
            assert!((diff.elem(idx, idx) - re(expect)).norm() < 1e-12);
        }
    }

    #[test]
    fn cap_is_enforced() {
        let f = HilbertFactor::boson(15).unwrap();
        let err = CompositeSpace::with_cap(vec![HilbertFactor::biexciton(), f, f], 1000).unwrap_err();
        assert!(matches!(err, Error::DimensionCap { dim: 1024, cap: 1000 }));
    }

    #[test]
    fn wrong_factor_kind_is_rejected() {
        let space = CompositeSpace::new(vec![HilbertFactor::biexciton(), HilbertFactor::qubit()]).unwrap();
        assert!(matches!(space.annihilator(0), Err(Error::FactorKind { .. })));
        assert!(matches!(space.annihilator(7), Err(Error::FactorIndex { .. })));
        assert!(space.qubit_lowering(1).is_ok());
    }

    #[test]
    fn hermitian_constructor_rejects_non_hermitian() {
        let space = CompositeSpace::single(HilbertFactor::qubit());
        let m = qubit_lowering().into_matrix();
        assert!(matches!(Operator::hermitian(space, m), Err(Error::NotHermitian(_))));
    }

    fn vec_is_zero(v: &[C64]) -> bool {
        v.iter().all(|z| *z == ZERO)
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn small_op(d: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
            proptest::collection::vec((-2.0f64..2.0, -2.0f64..2.0), d * d)
        }

        proptest! {
            #[test]
            fn embed_is_a_homomorphism(a in small_op(3), b in small_op(3), slot in 0usize..3) {
                let f = HilbertFactor::boson(2).unwrap();
                let space = CompositeSpace::new(vec![HilbertFactor::qubit(), f, HilbertFactor::biexciton()]).unwrap();
                let factor = space.factor(slot).unwrap();
                let d = factor.dim();
                let mk = |x: &[(f64, f64)]| local(factor, |i, j| {
                    let (r, im) = x[(i * d + j) % x.len()];
                    linalg::c(r, im)
                });
                let (oa, ob) = (mk(&a), mk(&b));
                let lhs = embed(&(&oa * &ob), &space, slot).unwrap();
                let rhs = &embed(&oa, &space, slot).unwrap() * &embed(&ob, &space, slot).unwrap();
                prop_assert!(lhs.distance(&rhs) < 1e-12);
            }
        }
    }
}
