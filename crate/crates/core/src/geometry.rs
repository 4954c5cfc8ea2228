//! Geometry of the Grassmannian `G(k, n)` with the chordal metric.
//!
//! A k-plane is stored through a generator matrix: a `k x n` matrix whose rows
//! are an orthonormal basis of the plane. Generator matrices are not unique
//! (any `k x k` orthogonal change of basis gives another one), so two
//! [`Subspace`] values are the same plane when their chordal distance is
//! below [`SAME_PLANE_TOL`], never by comparing matrices.
//!
//! Principal angles come from the singular values of `A_p A_q^T`. The chordal
//! distance is `|sin theta|`, and the map `p -> Pi_p - (k/n) I` sends planes
//! isometrically (up to the factor `sqrt 2`) onto a sphere of radius
//! `sqrt(k (n - k) / n)` inside the traceless symmetric matrices.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Entrywise tolerance on `A A^T = I`.
pub const ORTHONORMAL_TOL: f64 = 1e-12;

/// Relative singular-value threshold below which rows count as dependent.
pub const RANK_TOL: f64 = 1e-10;

/// Planes closer than this in chordal distance are treated as equal.
/// `d` comes from `sqrt(k - |A_p A_q^T|^2)`, so rounding alone leaves
/// distances of order `1e-8` between representatives of one plane.
pub const SAME_PLANE_TOL: f64 = 1e-6;

/// Radius `sqrt(k (n - k) / n)` of the sphere containing the embedded planes.
pub fn embedding_radius(k: usize, n: usize) -> f64 {
    ((k * (n - k)) as f64 / n as f64).sqrt()
}

/// Checks `1 <= k <= n`, and `2k <= n` unless `allow_any_k` is set.
pub fn validate_dims(k: usize, n: usize, allow_any_k: bool) -> Result<()> {
    if k == 0 || n == 0 {
        return Err(Error::Dimension { k, n, reason: "k and n must be positive" });
    }
    if k > n {
        return Err(Error::Dimension { k, n, reason: "k exceeds n" });
    }
    if !allow_any_k && 2 * k > n {
        return Err(Error::Dimension {
            k,
            n,
            reason: "k > n/2 requires the unrestricted constructor",
        });
    }
    Ok(())
}

/// A k-plane through the origin of `R^n`.
#[derive(Clone, Debug)]
pub struct Subspace {
    basis: DMatrix<f64>,
}

impl Subspace {
    /// Spans the rows of `rows`, re-orthonormalized. Requires `2k <= n`.
    pub fn new(rows: DMatrix<f64>) -> Result<Self> {
        validate_dims(rows.nrows(), rows.ncols(), false)?;
        orthonormalize(rows)
    }

    /// Like [`Subspace::new`] but accepts any `1 <= k <= n`.
    pub fn new_unrestricted(rows: DMatrix<f64>) -> Result<Self> {
        orthonormalize(rows)
    }

    /// Wraps a basis already known to be orthonormal.
    pub(crate) fn from_orthonormal(basis: DMatrix<f64>) -> Self {
        debug_assert!(
            (&basis * basis.transpose() - DMatrix::<f64>::identity(basis.nrows(), basis.nrows())).amax()
                <= ORTHONORMAL_TOL
        );
        Self { basis }
    }

    /// `span(e_1, ..., e_k)`.
    pub fn coordinate(k: usize, n: usize) -> Result<Self> {
        validate_dims(k, n, true)?;
        Ok(Self { basis: DMatrix::identity(k, n) })
    }

    pub fn k(&self) -> usize {
        self.basis.nrows()
    }

    pub fn n(&self) -> usize {
        self.basis.ncols()
    }

    /// The generator matrix, `k x n` with orthonormal rows.
    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn into_basis(self) -> DMatrix<f64> {
        self.basis
    }

    pub fn same_plane(&self, other: &Subspace) -> bool {
        chordal_distance(self, other).map(|d| d < SAME_PLANE_TOL).unwrap_or(false)
    }

    fn check_compatible(&self, other: &Subspace) -> Result<()> {
        if self.k() != other.k() || self.n() != other.n() {
            return Err(Error::DimensionMismatch {
                left: (self.k(), self.n()),
                right: (other.k(), other.n()),
            });
        }
        Ok(())
    }
}

/// Orthonormalizes the rows of a `k x n` matrix (`k <= n`), keeping the row
/// space. Uses modified Gram-Schmidt with one reorthogonalization pass, so an
/// already orthonormal input comes back unchanged up to rounding.
pub fn orthonormalize(rows: DMatrix<f64>) -> Result<Subspace> {
    let (k, n) = rows.shape();
    validate_dims(k, n, true)?;
    let sv = rows.clone().singular_values();
    let largest = sv.max();
    let smallest = sv.min();
    let ratio = if largest > 0.0 { smallest / largest } else { 0.0 };
    if !(ratio > RANK_TOL) {
        return Err(Error::RankDeficient { ratio });
    }

    let mut basis = rows;
    let identity = DMatrix::<f64>::identity(k, k);
    if (&basis * basis.transpose() - &identity).amax() <= 1e-15 {
        return Ok(Subspace { basis });
    }
    for _ in 0..3 {
        gram_schmidt(&mut basis)?;
        let gram = &basis * basis.transpose();
        if (gram - &identity).amax() <= ORTHONORMAL_TOL {
            return Ok(Subspace { basis });
        }
    }
    Err(Error::RankDeficient { ratio })
}

fn gram_schmidt(basis: &mut DMatrix<f64>) -> Result<()> {
    for i in 0..basis.nrows() {
        let mut v = basis.row(i).transpose();
        for _ in 0..2 {
            for j in 0..i {
                let q = basis.row(j).transpose();
                let c = q.dot(&v);
                v.axpy(-c, &q, 1.0);
            }
        }
        let norm = v.norm();
        if !(norm > 0.0) {
            return Err(Error::RankDeficient { ratio: 0.0 });
        }
        basis.set_row(i, &(v / norm).transpose());
    }
    Ok(())
}

/// Principal angles, sorted non-increasing, each in `[0, pi/2]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PrincipalAngles {
    theta: Vec<f64>,
}

impl PrincipalAngles {
    /// Validates range and ordering.
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        if theta.iter().any(|t| !(0.0..=std::f64::consts::FRAC_PI_2).contains(t)) {
            return Err(Error::Domain("principal angles must lie in [0, pi/2]".into()));
        }
        if theta.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::Domain("principal angles must be non-increasing".into()));
        }
        Ok(Self { theta })
    }

    /// From cosines (singular values) in any order. Values are clamped to
    /// `[0, 1]` before `acos`.
    pub fn from_cosines(cosines: impl IntoIterator<Item = f64>) -> Self {
        let mut theta: Vec<f64> = cosines.into_iter().map(|c| c.clamp(0.0, 1.0).acos()).collect();
        theta.sort_by(|a, b| b.total_cmp(a));
        Self { theta }
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    /// `|sin theta|`.
    pub fn chordal_norm(&self) -> f64 {
        self.theta.iter().map(|t| t.sin().powi(2)).sum::<f64>().sqrt()
    }
}

fn cosine_matrix(p: &Subspace, q: &Subspace) -> Result<DMatrix<f64>> {
    p.check_compatible(q)?;
    Ok(p.basis() * q.basis().transpose())
}

pub fn principal_angles(p: &Subspace, q: &Subspace) -> Result<PrincipalAngles> {
    let c = cosine_matrix(p, q)?;
    Ok(PrincipalAngles::from_cosines(c.singular_values().iter().copied()))
}

/// Chordal distance `sqrt(k - sum cos^2 theta_i)`, in `[0, sqrt k]`.
///
/// `sum cos^2` is the squared Frobenius norm of `A_p A_q^T`, so no SVD is
/// needed.
pub fn chordal_distance(p: &Subspace, q: &Subspace) -> Result<f64> {
    chordal_distance_sq(p, q).map(f64::sqrt)
}

pub fn chordal_distance_sq(p: &Subspace, q: &Subspace) -> Result<f64> {
    p.check_compatible(q)?;
    let k = p.k() as f64;
    Ok((k - overlap(p.basis(), q.basis())).clamp(0.0, k))
}

/// `|A B^T|_F^2`, evaluated so that swapping the arguments gives the
/// bitwise identical value.
pub(crate) fn overlap(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let (ka, kb) = (a.nrows(), b.nrows());
    let mut c = vec![0.0; ka * kb];
    for i in 0..ka {
        for j in 0..kb {
            let mut dot = 0.0;
            for l in 0..a.ncols() {
                dot += a[(i, l)] * b[(j, l)];
            }
            c[i * kb + j] = dot * dot;
        }
    }
    let by_rows: f64 = c.iter().sum();
    let by_cols: f64 = (0..kb).flat_map(|j| (0..ka).map(move |i| (i, j))).map(|(i, j)| c[i * kb + j]).sum();
    0.5 * (by_rows + by_cols)
}

/// `Pi_p = A_p^T A_p`.
pub fn projection_matrix(p: &Subspace) -> DMatrix<f64> {
    p.basis().transpose() * p.basis()
}

/// A plane mapped to the traceless part of its projection matrix.
#[derive(Clone, Debug)]
pub struct EmbeddedPoint {
    matrix: DMatrix<f64>,
}

impl EmbeddedPoint {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Frobenius norm of the matrix.
    pub fn norm(&self) -> f64 {
        self.matrix.norm()
    }

    /// Coordinates in `R^((n-1)(n+2)/2)`.
    ///
    /// The diagonal (which sums to zero) is written in the Helmert basis of
    /// the sum-zero hyperplane, giving `n - 1` numbers; the strict upper
    /// triangle follows row by row, scaled by `sqrt 2`. The map is linear and
    /// preserves the Frobenius norm.
    pub fn coords(&self) -> DVector<f64> {
        let n = self.matrix.nrows();
        let mut out = Vec::with_capacity((n - 1) * (n + 2) / 2);
        let mut prefix = 0.0;
        for j in 1..n {
            prefix += self.matrix[(j - 1, j - 1)];
            let jf = j as f64;
            out.push((prefix - jf * self.matrix[(j, j)]) / (jf * (jf + 1.0)).sqrt());
        }
        for i in 0..n {
            for j in (i + 1)..n {
                out.push(std::f64::consts::SQRT_2 * self.matrix[(i, j)]);
            }
        }
        DVector::from_vec(out)
    }

    /// `(1/r) Phi(p)` as a unit vector in coordinates.
    pub fn unit_coords(&self) -> DVector<f64> {
        let c = self.coords();
        let norm = c.norm();
        c / norm
    }
}

/// `Phi(p) = Pi_p - (k/n) I_n`.
pub fn embed(p: &Subspace) -> EmbeddedPoint {
    let n = p.n();
    let shift = p.k() as f64 / n as f64;
    let mut matrix = projection_matrix(p);
    for i in 0..n {
        matrix[(i, i)] -= shift;
    }
    EmbeddedPoint { matrix }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};

    fn rows(k: usize, n: usize, data: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(k, n, data)
    }

    #[test]
    fn orthonormal_rows_are_returned_unchanged() {
        let m = rows(2, 4, &[1., 0., 0., 0., 0., 1., 0., 0.]);
        let s = orthonormalize(m.clone()).unwrap();
        assert_abs_diff_eq!(s.basis(), &m, epsilon = 1e-15);
    }

    #[test]
    fn scaling_is_removed() {
        let s = orthonormalize(rows(2, 3, &[2., 0., 0., 0., 3., 0.])).unwrap();
        assert_abs_diff_eq!(s.basis(), &rows(2, 3, &[1., 0., 0., 0., 1., 0.]), epsilon = 1e-15);
    }

    #[test]
    fn repeated_row_is_rank_deficient() {
        let err = orthonormalize(rows(2, 3, &[1., 0., 0., 1., 0., 0.])).unwrap_err();
        assert!(matches!(err, Error::RankDeficient { .. }));
    }

    #[test]
    fn too_many_rows_is_a_dimension_error() {
        let err = orthonormalize(DMatrix::identity(4, 3)).unwrap_err();
        assert!(matches!(err, Error::Dimension { .. }));
    }

    #[test]
    fn default_policy_rejects_large_k() {
        assert!(Subspace::new(DMatrix::identity(2, 3)).is_err());
        assert!(Subspace::new_unrestricted(DMatrix::identity(2, 3)).is_ok());
        assert!(Subspace::new(DMatrix::identity(2, 4)).is_ok());
    }

    #[test]
    fn identical_and_orthogonal_planes() {
        let p = Subspace::coordinate(2, 4).unwrap();
        let q = Subspace::new(rows(2, 4, &[0., 0., 1., 0., 0., 0., 0., 1.])).unwrap();
        assert_eq!(principal_angles(&p, &p).unwrap().theta(), &[0.0, 0.0]);
        let th = principal_angles(&p, &q).unwrap();
        assert_abs_diff_eq!(th.theta()[0], FRAC_PI_2, epsilon = 1e-15);
        assert_abs_diff_eq!(th.theta()[1], FRAC_PI_2, epsilon = 1e-15);
        assert_eq!(chordal_distance(&p, &p).unwrap(), 0.0);
        assert_abs_diff_eq!(chordal_distance(&p, &q).unwrap(), 2f64.sqrt(), epsilon = 1e-15);
        assert!(p.same_plane(&Subspace::new(rows(2, 4, &[0., 1., 0., 0., 1., 1., 0., 0.])).unwrap()));
    }

    #[test]
    fn mismatched_dimensions_are_rejected() {
        let p = Subspace::coordinate(1, 3).unwrap();
        let q = Subspace::coordinate(1, 4).unwrap();
        assert!(matches!(principal_angles(&p, &q), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(chordal_distance(&p, &q), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn projection_of_a_line_in_the_plane() {
        let p = Subspace::coordinate(1, 2).unwrap();
        assert_eq!(projection_matrix(&p), DMatrix::from_diagonal(&DVector::from_vec(vec![1., 0.])));
    }

    #[test]
    fn embedding_of_a_coordinate_line() {
        let e = embed(&Subspace::coordinate(1, 2).unwrap());
        assert_abs_diff_eq!(
            e.matrix(),
            &DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, -0.5])),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(e.norm(), FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_eq!(e.coords().len(), 2);
    }

    #[test]
    fn coords_have_the_sphere_dimension() {
        for n in 2..9 {
            let e = embed(&Subspace::coordinate(1, n).unwrap());
            assert_eq!(e.coords().len(), (n - 1) * (n + 2) / 2);
            assert_abs_diff_eq!(e.coords().norm(), embedding_radius(1, n), epsilon = 1e-12);
        }
    }

    #[test]
    fn principal_angles_validation() {
        assert!(PrincipalAngles::new(vec![1.0, 0.5]).is_ok());
        assert!(PrincipalAngles::new(vec![0.5, 1.0]).is_err());
        assert!(PrincipalAngles::new(vec![2.0]).is_err());
        let th = PrincipalAngles::from_cosines([1.0 + 1e-15, -1e-16]);
        assert_eq!(th.theta(), &[FRAC_PI_2, 0.0]);
    }
}
