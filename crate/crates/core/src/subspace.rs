//! Linear-subspace primitives.
//!
//! A [`BasisSet`] holds `H` orthonormal vectors of length `D`, stored as the
//! rows of an `H x D` matrix. Projection, residual and the explicit projector
//! are all computed from those rows.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use crate::{Error, Result};

/// Residual norm below which Gram-Schmidt declares the input dependent.
pub const DEPENDENCE_THRESHOLD: f64 = 1e-12;

/// Tolerance used when accepting an externally supplied basis.
pub const ORTHONORMAL_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct BasisSet {
    vectors: Array2<f64>,
}

impl BasisSet {
    /// Wraps rows that are already orthonormal, checking them to
    /// [`ORTHONORMAL_TOL`].
    pub fn from_orthonormal(vectors: Array2<f64>) -> Result<Self> {
        if vectors.nrows() == 0 || vectors.nrows() > vectors.ncols() {
            return Err(Error::Config(format!(
                "basis must have 1 <= H <= D, got H={} D={}",
                vectors.nrows(),
                vectors.ncols()
            )));
        }
        let basis = BasisSet { vectors };
        let deviation = basis.orthonormality_error();
        if deviation.is_nan() || deviation >= ORTHONORMAL_TOL {
            return Err(Error::NotOrthonormal { deviation });
        }
        Ok(basis)
    }

    /// Ambient dimension `D`.
    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    /// Subspace dimension `H`.
    pub fn subspace_dim(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn vectors(&self) -> ArrayView2<'_, f64> {
        self.vectors.view()
    }

    pub fn vector(&self, i: usize) -> ArrayView1<'_, f64> {
        self.vectors.row(i)
    }

    pub fn into_vectors(self) -> Array2<f64> {
        self.vectors
    }

    /// `max |B B^T - I|` over all entries.
    pub fn orthonormality_error(&self) -> f64 {
        let gram = self.vectors.dot(&self.vectors.t());
        gram.indexed_iter()
            .map(|((i, j), &v)| (v - if i == j { 1.0 } else { 0.0 }).abs())
            .fold(0.0, f64::max)
    }

    /// Coordinates `b_i^T x` of `x` in this basis.
    pub fn coefficients(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        self.check_dim(x.len())?;
        Ok(self.vectors.dot(&x))
    }

    /// Orthogonal projection `x_hat = sum_i (b_i^T x) b_i`.
    pub fn project(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        let coeffs = self.coefficients(x)?;
        Ok(self.vectors.t().dot(&coeffs))
    }

    /// Residual `x_tilde = x - x_hat`.
    pub fn residual(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        let xhat = self.project(x)?;
        Ok(&x - &xhat)
    }

    /// Squared residual norm, computed directly from the residual vector
    /// rather than via `|x|^2 - |x_hat|^2` (which cancels badly).
    pub fn residual_sq(&self, x: ArrayView1<f64>) -> Result<f64> {
        let r = self.residual(x)?;
        Ok(r.dot(&r))
    }

    pub fn projector(&self) -> Projector {
        projector_matrix(self)
    }

    fn check_dim(&self, len: usize) -> Result<()> {
        if len != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: len,
            });
        }
        Ok(())
    }
}

/// Explicit `D x D` projector `P = sum_i b_i b_i^T`. Only used for testing
/// and for small diagnostics; the training path never materializes it.
#[derive(Clone, Debug, PartialEq)]
pub struct Projector {
    entries: Array2<f64>,
}

impl Projector {
    pub fn entries(&self) -> ArrayView2<'_, f64> {
        self.entries.view()
    }

    pub fn apply(&self, x: ArrayView1<f64>) -> Result<Array1<f64>> {
        if x.len() != self.entries.ncols() {
            return Err(Error::DimensionMismatch {
                expected: self.entries.ncols(),
                actual: x.len(),
            });
        }
        Ok(self.entries.dot(&x))
    }

    pub fn trace(&self) -> f64 {
        self.entries.diag().sum()
    }
}

/// Modified Gram-Schmidt over the rows of `vectors`.
///
/// Fails with [`Error::DegenerateBasis`] when any intermediate residual norm
/// drops below [`DEPENDENCE_THRESHOLD`].
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn gram_schmidt(vectors: ArrayView2<f64>) -> Result<BasisSet> {
    let (h, d) = vectors.dim();
    if h == 0 || h > d {
        return Err(Error::Config(format!(
            "gram_schmidt needs 1 <= H <= D, got H={h} D={d}"
        )));
    }
    let mut q = vectors.to_owned();
    for i in 0..h {
        let (done, mut rest) = q.view_mut().split_at(Axis(0), i);
        let mut v = rest.row_mut(0);
        for prev in done.rows() {
            let c = prev.dot(&v);
            v.scaled_add(-c, &prev);
        }
        let norm = v.dot(&v).sqrt();
        if !(norm >= DEPENDENCE_THRESHOLD) {
            return Err(Error::DegenerateBasis { index: i, norm });
        }
        v /= norm;
    }
    Ok(BasisSet { vectors: q })
}

pub fn project(basis: &BasisSet, x: ArrayView1<f64>) -> Result<Array1<f64>> {
    basis.project(x)
}

pub fn residual(basis: &BasisSet, x: ArrayView1<f64>) -> Result<Array1<f64>> {
    basis.residual(x)
}

pub fn projector_matrix(basis: &BasisSet) -> Projector {
    let d = basis.dim();
    let mut entries = Array2::<f64>::zeros((d, d));
    for b in basis.vectors.rows() {
        for i in 0..d {
            // Fill the upper triangle and mirror so P == P^T bit-for-bit.
            for j in i..d {
                entries[[i, j]] += b[i] * b[j];
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            entries[[i, j]] = entries[[j, i]];
        }
    }
    Projector { entries }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_basis(d: usize, h: usize, rng: &mut impl Rng) -> BasisSet {
        let raw = Array2::from_shape_fn((h, d), |_| rng.random_range(-1.0..1.0));
        gram_schmidt(raw.view()).unwrap()
    }

    fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    /// Projector built from nalgebra's Householder QR, independent of the
    /// Gram-Schmidt path.
    fn qr_oracle_projector(vectors: &Array2<f64>) -> Array2<f64> {
        let (h, d) = vectors.dim();
        let cols = nalgebra::DMatrix::from_fn(d, h, |i, j| vectors[[j, i]]);
        let q = cols.qr().q();
        let p = &q * q.transpose();
        Array2::from_shape_fn((d, d), |(i, j)| p[(i, j)])
    }

    #[test]
    fn identity_case() {
        let b = gram_schmidt(array![[1.0, 0.0], [0.0, 1.0]].view()).unwrap();
        assert_eq!(b.vectors(), array![[1.0, 0.0], [0.0, 1.0]]);
    }

    #[test]
    fn removes_component_along_first() {
        let b = gram_schmidt(array![[3.0, 0.0], [1.0, 1.0]].view()).unwrap();
        assert!(max_abs_diff(&b.vectors().to_owned(), &array![[1.0, 0.0], [0.0, 1.0]]) < 1e-15);
    }

    #[test]
    fn three_vectors_match_qr_oracle() {
        let raw = array![[1.0, 1.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 1.0]];
        let b = gram_schmidt(raw.view()).unwrap();
        assert!(b.orthonormality_error() < 1e-10);
        let p = projector_matrix(&b);
        assert!(max_abs_diff(&p.entries().to_owned(), &qr_oracle_projector(&raw)) < 1e-12);
        // Span of three independent vectors in R^3 is everything.
        assert!((p.trace() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn partial_span_matches_qr_oracle() {
        let mut rng = crate::seeded_rng(11, 0);
        for _ in 0..50 {
            let raw = Array2::from_shape_fn((3, 7), |_| rng.random_range(-1.0..1.0));
            let b = gram_schmidt(raw.view()).unwrap();
            let p = projector_matrix(&b).entries().to_owned();
            assert!(max_abs_diff(&p, &qr_oracle_projector(&raw)) < 1e-10);
        }
    }

    #[test]
    fn dependent_vectors_are_rejected() {
        let err = gram_schmidt(array![[1.0, 2.0, 3.0], [2.0, 4.0, 6.0]].view()).unwrap_err();
        assert!(matches!(err, Error::DegenerateBasis { index: 1, .. }));
        let err = gram_schmidt(array![[0.0, 0.0]].view()).unwrap_err();
        assert!(matches!(err, Error::DegenerateBasis { index: 0, .. }));
    }

    #[test]
    fn too_many_vectors_rejected() {
        assert!(gram_schmidt(Array2::<f64>::eye(3).slice(ndarray::s![.., ..2]).view()).is_err());
    }

    #[test]
    fn axis_projection_and_residual() {
        let b = gram_schmidt(array![[1.0, 0.0]].view()).unwrap();
        assert_eq!(b.project(array![3.0, 4.0].view()).unwrap(), array![3.0, 0.0]);
        assert_eq!(b.residual(array![3.0, 4.0].view()).unwrap(), array![0.0, 4.0]);
        let p = projector_matrix(&b);
        assert_eq!(p.entries(), array![[1.0, 0.0], [0.0, 0.0]]);
    }

    #[test]
    fn full_rank_projection_is_identity() {
        let mut rng = crate::seeded_rng(3, 0);
        let b = random_basis(4, 4, &mut rng);
        let x = array![0.3, -1.2, 5.0, 2.2];
        let xhat = b.project(x.view()).unwrap();
        assert!(xhat.iter().zip(x.iter()).all(|(a, b)| (a - b).abs() < 1e-12));
        let full = gram_schmidt(array![[0.6, 0.8], [-0.8, 0.6]].view()).unwrap();
        let p = projector_matrix(&full).entries().to_owned();
        assert!(max_abs_diff(&p, &Array2::eye(2)) < 1e-15);
    }

    #[test]
    fn in_span_residual_is_zero() {
        let b = gram_schmidt(array![[1.0, 1.0, 0.0]].view()).unwrap();
        let r = b.residual(array![2.0, 2.0, 0.0].view()).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn dimension_mismatch() {
        let b = gram_schmidt(array![[1.0, 0.0]].view()).unwrap();
        assert!(matches!(
            b.project(array![1.0, 2.0, 3.0].view()),
            Err(Error::DimensionMismatch { expected: 2, actual: 3 })
        ));
        assert!(b.residual(array![1.0].view()).is_err());
    }

    #[test]
    fn projection_matches_explicit_projector() {
        let mut rng = crate::seeded_rng(5, 0);
        for _ in 0..100 {
            let b = random_basis(6, 3, &mut rng);
            let x = Array1::from_shape_fn(6, |_| rng.random_range(-3.0..3.0));
            let via_p = projector_matrix(&b).apply(x.view()).unwrap();
            let direct = b.project(x.view()).unwrap();
            assert!((&via_p - &direct).iter().all(|v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn trace_equals_rank() {
        let mut rng = crate::seeded_rng(9, 0);
        let b = random_basis(4, 2, &mut rng);
        assert!((projector_matrix(&b).trace() - 2.0).abs() < 1e-10);
    }

    #[test]
    fn from_orthonormal_checks() {
        assert!(BasisSet::from_orthonormal(array![[1.0, 0.0], [0.0, 1.0]]).is_ok());
        assert!(matches!(
            BasisSet::from_orthonormal(array![[1.0, 0.0], [0.1, 1.0]]),
            Err(Error::NotOrthonormal { .. })
        ));
    }

    fn basis_and_vector() -> impl Strategy<Value = (BasisSet, Array1<f64>)> {
        (1usize..=8)
            .prop_flat_map(|d| (Just(d), 1..=d, any::<u64>()))
            .prop_map(|(d, h, seed)| {
                let mut rng = crate::seeded_rng(seed, 0);
                let b = random_basis(d, h, &mut rng);
                let x = Array1::from_shape_fn(d, |_| rng.random_range(-10.0..10.0));
                (b, x)
            })
    }

    proptest! {
        #[test]
        fn gram_schmidt_output_is_orthonormal((b, _x) in basis_and_vector()) {
            prop_assert!(b.orthonormality_error() < 1e-10);
        }

        #[test]
        fn projection_is_idempotent((b, x) in basis_and_vector()) {
            let once = b.project(x.view()).unwrap();
            let twice = b.project(once.view()).unwrap();
            prop_assert!((&once - &twice).iter().all(|v| v.abs() < 1e-10));
        }

        #[test]
        fn pythagoras((b, x) in basis_and_vector()) {
            let xhat = b.project(x.view()).unwrap();
            let xres = b.residual(x.view()).unwrap();
            prop_assert!(xhat.dot(&xres).abs() < 1e-10);
            let lhs = xhat.dot(&xhat) + xres.dot(&xres);
            prop_assert!((lhs - x.dot(&x)).abs() < 1e-10 * x.dot(&x).max(1.0));
        }

        #[test]
        fn projection_is_basis_invariant((b, x) in basis_and_vector(), angle in 0.0..std::f64::consts::TAU) {
            // Rotate the first two basis vectors within their own plane (or
            // flip the sign when H = 1); the span is unchanged.
            let mut rotated = b.vectors().to_owned();
            if b.subspace_dim() >= 2 {
                let (c, s) = (angle.cos(), angle.sin());
                let r0 = b.vector(0).to_owned() * c - b.vector(1).to_owned() * s;
                let r1 = b.vector(0).to_owned() * s + b.vector(1).to_owned() * c;
                rotated.row_mut(0).assign(&r0);
                rotated.row_mut(1).assign(&r1);
            } else {
                rotated *= -1.0;
            }
            let other = BasisSet::from_orthonormal(rotated).unwrap();
            let a = b.project(x.view()).unwrap();
            let c = other.project(x.view()).unwrap();
            prop_assert!((&a - &c).iter().all(|v| v.abs() < 1e-8));
        }
    }
}
