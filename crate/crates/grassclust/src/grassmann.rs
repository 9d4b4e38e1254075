//! Geometry of the Grassmann manifold Gr(rho, n): subspaces of dimension
//! `rho` inside `R^n`, each represented by a matrix whose orthonormal columns
//! span it.
//!
//! Distances, logarithmic and exponential maps all reduce to principal
//! angles between subspaces. Angles are recovered from two SVDs: the
//! cosine-based one (`X^T Y`) is accurate for large angles, the sine-based
//! one (`Y - X X^T Y`) for small angles, and each angle takes whichever is
//! better conditioned for it. The arc-length metric is
//! `d(X, Y) = sqrt(theta_1^2 + ... + theta_rho^2)`.

use nalgebra::{DMatrix, SVD};

use crate::error::{Error, Result};

/// Angles closer to pi/2 than this put a pair at the cut locus of the
/// logarithmic map.
pub const ANGLE_TOL: f64 = 1e-6;

/// Orthonormality tolerance for point bases: `max |X^T X - I|`.
pub const ORTHO_TOL: f64 = 1e-10;

/// A point on Gr(rho, n): an n x rho matrix with orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct GrassmannPoint {
    basis: DMatrix<f64>,
}

impl GrassmannPoint {
    /// Wraps a matrix that is already orthonormal (within [`ORTHO_TOL`]).
    pub fn new(basis: DMatrix<f64>) -> Result<Self> {
        if basis.ncols() == 0 || basis.nrows() < basis.ncols() {
            return Err(Error::input(format!(
                "subspace basis must be tall and non-empty, got {}x{}",
                basis.nrows(),
                basis.ncols()
            )));
        }
        let gram = basis.transpose() * &basis;
        let dev = (&gram - DMatrix::identity(gram.nrows(), gram.ncols()))
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        if dev > ORTHO_TOL {
            return Err(Error::input(format!(
                "basis columns are not orthonormal (deviation {dev:e}, tolerance {ORTHO_TOL:e})"
            )));
        }
        Ok(GrassmannPoint { basis })
    }

    /// Orthonormalizes the columns of an arbitrary full-rank span.
    pub fn from_span(span: DMatrix<f64>) -> Result<Self> {
        if span.ncols() == 0 || span.nrows() < span.ncols() {
            return Err(Error::input(format!(
                "span must be tall and non-empty, got {}x{}",
                span.nrows(),
                span.ncols()
            )));
        }
        let ncols = span.ncols();
        let qr = span.qr();
        let r = qr.r();
        let scale = r.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
        for i in 0..ncols {
            if r[(i, i)].abs() <= 1e-12 * scale {
                return Err(Error::degenerate(
                    "span is numerically rank deficient; cannot orthonormalize".to_string(),
                ));
            }
        }
        Ok(GrassmannPoint { basis: qr.q() })
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    /// Ambient dimension n.
    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    /// Subspace dimension rho.
    pub fn subspace_dim(&self) -> usize {
        self.basis.ncols()
    }
}

/// A tangent vector at `base`, stored as an n x rho matrix `delta` with
/// `base^T delta = 0`.
#[derive(Debug, Clone)]
pub struct TangentVector {
    pub base: GrassmannPoint,
    pub delta: DMatrix<f64>,
}

impl TangentVector {
    pub fn norm(&self) -> f64 {
        self.delta.norm()
    }

    /// Fixed-length coordinates (column-major) for Euclidean post-processing.
    /// The Euclidean norm of the output equals the tangent norm exactly.
    pub fn flatten(&self) -> Vec<f64> {
        self.delta.iter().copied().collect()
    }
}

/// Largest possible arc-length distance on Gr(rho, n): all rho angles at
/// pi/2.
pub fn diameter(subspace_dim: usize) -> f64 {
    (subspace_dim as f64).sqrt() * std::f64::consts::FRAC_PI_2
}

fn check_same_manifold(x: &GrassmannPoint, y: &GrassmannPoint) -> Result<()> {
    if x.ambient_dim() != y.ambient_dim() || x.subspace_dim() != y.subspace_dim() {
        return Err(Error::input(format!(
            "points live on different manifolds: Gr({}, {}) vs Gr({}, {})",
            x.subspace_dim(),
            x.ambient_dim(),
            y.subspace_dim(),
            y.ambient_dim()
        )));
    }
    Ok(())
}

/// Principal angles between two subspaces, ascending, each in [0, pi/2].
pub fn principal_angles(x: &GrassmannPoint, y: &GrassmannPoint) -> Result<Vec<f64>> {
    check_same_manifold(x, y)?;
    let rho = x.subspace_dim();

    let m = x.basis().transpose() * y.basis();
    let mut cos_sv = SVD::new(m, false, false).singular_values.as_slice().to_vec();
    // Descending cosines correspond to ascending angles.
    cos_sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut angles: Vec<f64> = cos_sv.iter().map(|s| s.min(1.0).max(-1.0).acos()).collect();

    // Refine small angles through the sine route, which stays accurate where
    // arccos of a near-unit cosine does not.
    if angles.iter().any(|&t| t < std::f64::consts::FRAC_PI_4) {
        let proj = y.basis() - x.basis() * (x.basis().transpose() * y.basis());
        let mut sin_sv = SVD::new(proj, false, false).singular_values.as_slice().to_vec();
        sin_sv.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for i in 0..rho {
            if angles[i] < std::f64::consts::FRAC_PI_4 {
                angles[i] = sin_sv[i].min(1.0).asin();
            }
        }
    }
    Ok(angles)
}

/// Arc-length geodesic distance `sqrt(sum theta_i^2)`.
pub fn geodesic_distance(x: &GrassmannPoint, y: &GrassmannPoint) -> Result<f64> {
    let angles = principal_angles(x, y)?;
    Ok(angles.iter().map(|t| t * t).sum::<f64>().sqrt())
}

/// True when the pair sits too close to the cut locus for a stable
/// logarithmic map: some principal angle within `angle_tol` of pi/2.
pub fn near_cut_locus(x: &GrassmannPoint, y: &GrassmannPoint, angle_tol: f64) -> Result<bool> {
    let angles = principal_angles(x, y)?;
    Ok(angles
        .last()
        .map(|t| *t > std::f64::consts::FRAC_PI_2 - angle_tol)
        .unwrap_or(false))
}

/// Logarithmic map: the tangent vector at `x` whose geodesic reaches `y` in
/// unit time. Errors with [`Error::CutLocus`] when a principal angle is
/// within `angle_tol` of pi/2 (defaults to [`ANGLE_TOL`] via [`log_map`]).
pub fn log_map_with_tol(
    x: &GrassmannPoint,
    y: &GrassmannPoint,
    angle_tol: f64,
) -> Result<TangentVector> {
    check_same_manifold(x, y)?;
    if near_cut_locus(x, y, angle_tol)? {
        return Err(Error::CutLocus { tol: angle_tol });
    }

    let m = x.basis().transpose() * y.basis();
    let residual = y.basis() - x.basis() * &m;
    // Solve Z M = residual via M^T Z^T = residual^T.
    let z = m
        .transpose()
        .lu()
        .solve(&residual.transpose())
        .ok_or(Error::CutLocus { tol: angle_tol })?
        .transpose();

    let svd = SVD::new(z, true, true);
    let u = svd.u.as_ref().expect("svd with u");
    let vt = svd.v_t.as_ref().expect("svd with v_t");
    let atan_s = DMatrix::from_diagonal(&svd.singular_values.map(|s| s.atan()));
    let delta = u * atan_s * vt;
    Ok(TangentVector { base: x.clone(), delta })
}

/// [`log_map_with_tol`] at the default cut-locus tolerance.
pub fn log_map(x: &GrassmannPoint, y: &GrassmannPoint) -> Result<TangentVector> {
    log_map_with_tol(x, y, ANGLE_TOL)
}

/// Exponential map: follows the geodesic from the base point of `tv` for
/// unit time.
pub fn exp_map(tv: &TangentVector) -> Result<GrassmannPoint> {
    let x = &tv.base;
    if tv.delta.nrows() != x.ambient_dim() || tv.delta.ncols() != x.subspace_dim() {
        return Err(Error::input(format!(
            "tangent delta has shape {}x{}, expected {}x{}",
            tv.delta.nrows(),
            tv.delta.ncols(),
            x.ambient_dim(),
            x.subspace_dim()
        )));
    }
    let svd = SVD::new(tv.delta.clone(), true, true);
    let u = svd.u.as_ref().expect("svd with u");
    let vt = svd.v_t.as_ref().expect("svd with v_t");
    let v = vt.transpose();
    let cos_s = DMatrix::from_diagonal(&svd.singular_values.map(|s| s.cos()));
    let sin_s = DMatrix::from_diagonal(&svd.singular_values.map(|s| s.sin()));
    let moved = x.basis() * &v * cos_s * vt + u * sin_s * vt;
    GrassmannPoint::from_span(moved)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::rngs::StdRng;
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};

    pub(crate) fn random_point(n: usize, rho: usize, rng: &mut StdRng) -> GrassmannPoint {
        let m = DMatrix::from_fn(n, rho, |_, _| StandardNormal.sample(rng));
        GrassmannPoint::from_span(m).unwrap()
    }

    fn axis_plane(n: usize, axes: &[usize]) -> GrassmannPoint {
        let mut m = DMatrix::zeros(n, axes.len());
        for (j, &a) in axes.iter().enumerate() {
            m[(a, j)] = 1.0;
        }
        GrassmannPoint::new(m).unwrap()
    }

    #[test]
    fn identical_subspaces_have_zero_angles() {
        let mut rng = StdRng::seed_from_u64(3);
        let x = random_point(8, 3, &mut rng);
        let angles = principal_angles(&x, &x).unwrap();
        for t in angles {
            assert!(t.abs() <= 1e-12, "angle {t} not ~0");
        }
        assert!(geodesic_distance(&x, &x).unwrap() <= 1e-10);
    }

    #[test]
    fn orthogonal_planes_have_right_angles() {
        let x = axis_plane(4, &[0, 1]);
        let y = axis_plane(4, &[2, 3]);
        let angles = principal_angles(&x, &y).unwrap();
        for t in angles {
            assert_abs_diff_eq!(t, std::f64::consts::FRAC_PI_2, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(
            geodesic_distance(&x, &y).unwrap(),
            diameter(2),
            epsilon = 1e-12
        );
    }

    #[test]
    fn distance_is_symmetric() {
        let mut rng = StdRng::seed_from_u64(5);
        for _ in 0..20 {
            let x = random_point(10, 3, &mut rng);
            let y = random_point(10, 3, &mut rng);
            let d1 = geodesic_distance(&x, &y).unwrap();
            let d2 = geodesic_distance(&y, &x).unwrap();
            assert!((d1 - d2).abs() <= 1e-10, "asymmetry {}", (d1 - d2).abs());
        }
    }

    #[test]
    fn triangle_inequality_holds() {
        let mut rng = StdRng::seed_from_u64(7);
        for _ in 0..50 {
            let x = random_point(9, 2, &mut rng);
            let y = random_point(9, 2, &mut rng);
            let z = random_point(9, 2, &mut rng);
            let xy = geodesic_distance(&x, &y).unwrap();
            let xz = geodesic_distance(&x, &z).unwrap();
            let zy = geodesic_distance(&z, &y).unwrap();
            assert!(xy <= xz + zy + 1e-8);
        }
    }

    #[test]
    fn log_exp_round_trip() {
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..25 {
            let x = random_point(12, 3, &mut rng);
            let y = random_point(12, 3, &mut rng);
            let angles = principal_angles(&x, &y).unwrap();
            if *angles.last().unwrap() >= 1.3 {
                continue;
            }
            let tv = log_map(&x, &y).unwrap();
            let d = geodesic_distance(&x, &y).unwrap();
            assert!((tv.norm() - d).abs() <= 1e-8, "norm {} vs dist {}", tv.norm(), d);
            let back = exp_map(&tv).unwrap();
            assert!(geodesic_distance(&back, &y).unwrap() <= 1e-8);
        }
    }

    #[test]
    fn log_is_horizontal() {
        let mut rng = StdRng::seed_from_u64(13);
        let x = random_point(10, 2, &mut rng);
        let y = random_point(10, 2, &mut rng);
        let tv = log_map(&x, &y).unwrap();
        let overlap = x.basis().transpose() * &tv.delta;
        assert!(overlap.iter().all(|v| v.abs() <= 1e-8));
    }

    #[test]
    fn cut_locus_is_an_error_not_a_clamp() {
        let x = axis_plane(4, &[0, 1]);
        let y = axis_plane(4, &[2, 3]);
        match log_map(&x, &y) {
            Err(Error::CutLocus { .. }) => {}
            other => panic!("expected cut-locus error, got {other:?}"),
        }
        // A pair with only one right angle is still at the cut locus.
        let z = axis_plane(4, &[0, 2]);
        match log_map(&z, &y) {
            Err(Error::CutLocus { .. }) => {}
            other => panic!("expected cut-locus error, got {other:?}"),
        }
    }

    #[test]
    fn flatten_preserves_norm_exactly() {
        let mut rng = StdRng::seed_from_u64(17);
        let x = random_point(7, 2, &mut rng);
        let y = random_point(7, 2, &mut rng);
        let tv = log_map(&x, &y).unwrap();
        let flat = tv.flatten();
        assert_eq!(flat.len(), 14);
        let norm = flat.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert_eq!(norm, tv.norm());
    }

    #[test]
    fn non_orthonormal_basis_rejected() {
        let m = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 0.0, 1.0, 0.0, 0.0]);
        assert!(GrassmannPoint::new(m.clone()).is_err());
        assert!(GrassmannPoint::from_span(m).is_ok());
    }
}
