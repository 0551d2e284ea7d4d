//! Rotation representations and conversions.
//!
//! Three interchangeable forms are provided: [`RotationMatrix`], [`AxisAngle`]
//! and [`EulerXYZ`] (intrinsic X, then Y, then Z). [`solution_space`]
//! enumerates every axis-angle rotation carrying one direction onto another.
//!
//! Conventions: right-handed frames, column vectors, `y = R * x`.

use nalgebra::{Matrix3, Vector3};
use std::f64::consts::PI;

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Maximum deviation of an input axis norm from 1 that is silently renormalized.
pub const AXIS_NORM_TOLERANCE: f64 = 1e-6;
/// Orthonormality / determinant tolerance for [`RotationMatrix::new`].
pub const ORTHONORMAL_TOLERANCE: f64 = 1e-9;
/// Matrix round-trip tolerance for axis-angle conversions.
pub const ROUND_TRIP_TOLERANCE: f64 = 1e-8;
/// `|sin(middle angle)|` above `1 - GIMBAL_TOLERANCE` is reported as gimbal lock.
pub const GIMBAL_TOLERANCE: f64 = 1e-9;
/// Vectors shorter than this have no direction.
pub const DEGENERATE_NORM: f64 = 1e-8;
/// Below this separation two unit vectors are treated as identical.
const PARALLEL_EPS: f64 = 1e-12;

/// A proper orthonormal 3x3 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationMatrix(Matrix3<f64>);

impl RotationMatrix {
    pub const IDENTITY: Self = RotationMatrix(Matrix3::new(
        1.0, 0.0, 0.0, //
        0.0, 1.0, 0.0, //
        0.0, 0.0, 1.0,
    ));

    /// Validates orthonormality and `det = +1`.
    pub fn new(m: Matrix3<f64>) -> Result<Self> {
        let error = (m * m.transpose() - Matrix3::identity()).abs().max();
        let det = m.determinant();
        if !error.is_finite() || error > ORTHONORMAL_TOLERANCE || (det - 1.0).abs() > ORTHONORMAL_TOLERANCE {
            return Err(Error::NotARotation { error, det });
        }
        Ok(RotationMatrix(m))
    }

    /// Wraps a matrix already known to be a rotation (e.g. a product of rotations).
    pub(crate) fn from_matrix_unchecked(m: Matrix3<f64>) -> Self {
        RotationMatrix(m)
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    pub fn transpose(&self) -> Self {
        RotationMatrix(self.0.transpose())
    }

    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }

    pub fn rot_x(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        RotationMatrix(Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c))
    }

    pub fn rot_y(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        RotationMatrix(Matrix3::new(c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c))
    }

    pub fn rot_z(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        RotationMatrix(Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0))
    }

    /// Largest entry of `|R Rᵀ - I|`.
    pub fn orthonormality_error(&self) -> f64 {
        (self.0 * self.0.transpose() - Matrix3::identity()).abs().max()
    }

    pub fn determinant(&self) -> f64 {
        self.0.determinant()
    }

    pub fn max_abs_diff(&self, other: &RotationMatrix) -> f64 {
        (self.0 - other.0).abs().max()
    }
}

impl std::ops::Mul for RotationMatrix {
    type Output = RotationMatrix;
    fn mul(self, rhs: RotationMatrix) -> RotationMatrix {
        RotationMatrix(self.0 * rhs.0)
    }
}

impl std::ops::Mul<Vec3> for RotationMatrix {
    type Output = Vec3;
    fn mul(self, rhs: Vec3) -> Vec3 {
        self.0 * rhs
    }
}

/// Rotation by `angle` radians about the unit `axis`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisAngle {
    pub axis: Vec3,
    pub angle: f64,
}

impl AxisAngle {
    pub fn new(axis: Vec3, angle: f64) -> Self {
        AxisAngle { axis, angle }
    }

    pub fn to_matrix(&self) -> Result<RotationMatrix> {
        axis_angle_to_matrix(self)
    }
}

/// Intrinsic X-Y-Z Cardan angles: `R = Rx(x) * Ry(y) * Rz(z)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EulerXYZ {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl EulerXYZ {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        EulerXYZ { x, y, z }
    }

    pub fn to_matrix(&self) -> RotationMatrix {
        euler_xyz_to_matrix(self)
    }
}

/// One member of the family of rotations taking `â` onto `b̂`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolutionSpaceSample {
    pub alpha: f64,
    pub axis: Vec3,
    pub angle: f64,
}

impl SolutionSpaceSample {
    pub fn to_matrix(&self) -> RotationMatrix {
        rodrigues(&self.axis, self.angle)
    }
}

/// Rodrigues' formula written out entry by entry, for an axis of unit norm.
fn rodrigues(n: &Vec3, angle: f64) -> RotationMatrix {
    let (s, c) = angle.sin_cos();
    let t = 1.0 - c;
    let (x, y, z) = (n.x, n.y, n.z);
    RotationMatrix(Matrix3::new(
        x * x + (y * y + z * z) * c,
        x * y * t - z * s,
        x * z * t + y * s,
        x * y * t + z * s,
        y * y + (x * x + z * z) * c,
        y * z * t - x * s,
        x * z * t - y * s,
        y * z * t + x * s,
        z * z + (x * x + y * y) * c,
    ))
}

pub fn axis_angle_to_matrix(aa: &AxisAngle) -> Result<RotationMatrix> {
    let norm = aa.axis.norm();
    if !norm.is_finite() || (norm - 1.0).abs() > AXIS_NORM_TOLERANCE {
        return Err(Error::NonUnitAxis { norm });
    }
    Ok(rodrigues(&(aa.axis / norm), aa.angle))
}

/// Inverse of [`axis_angle_to_matrix`], returning an angle in `[0, π]`.
///
/// The zero rotation reports the axis `(1, 0, 0)`.
pub fn matrix_to_axis_angle(r: &RotationMatrix) -> AxisAngle {
    let m = &r.0;
    let cos = ((m.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    let skew = Vec3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]);
    let sin = skew.norm() / 2.0;
    let angle = sin.atan2(cos);
    if angle < 1e-14 {
        return AxisAngle::new(Vec3::x(), 0.0);
    }
    if cos > -0.9 {
        return AxisAngle::new(skew / skew.norm(), angle);
    }
    // Near π the skew part vanishes; read the axis from n nᵀ = (R + Rᵀ - 2cI) / (2(1 - c)).
    let sym = (m + m.transpose() - Matrix3::identity() * (2.0 * cos)) / (2.0 * (1.0 - cos));
    let k = (0..3).max_by(|&a, &b| sym[(a, a)].total_cmp(&sym[(b, b)])).unwrap_or(0);
    let mut axis = Vec3::new(sym[(0, k)], sym[(1, k)], sym[(2, k)]);
    axis /= axis.norm();
    if axis.dot(&skew) < 0.0 {
        axis = -axis;
    }
    AxisAngle::new(axis, angle)
}

pub fn euler_xyz_to_matrix(e: &EulerXYZ) -> RotationMatrix {
    let (sx, cx) = e.x.sin_cos();
    let (sy, cy) = e.y.sin_cos();
    let (sz, cz) = e.z.sin_cos();
    RotationMatrix(Matrix3::new(
        cy * cz,
        -cy * sz,
        sy,
        cx * sz + sx * sy * cz,
        cx * cz - sx * sy * sz,
        -sx * cy,
        sx * sz - cx * sy * cz,
        sx * cz + cx * sy * sz,
        cx * cy,
    ))
}

/// Extracts intrinsic XYZ angles with the middle angle in `(-π/2, π/2)`.
pub fn matrix_to_euler_xyz(r: &RotationMatrix) -> Result<EulerXYZ> {
    let m = &r.0;
    let sin_middle = m[(0, 2)];
    if sin_middle.abs() > 1.0 - GIMBAL_TOLERANCE {
        return Err(Error::GimbalLock { sin_middle });
    }
    let y = sin_middle.atan2(m[(0, 0)].hypot(m[(0, 1)]));
    let x = (-m[(1, 2)]).atan2(m[(2, 2)]);
    let z = (-m[(0, 1)]).atan2(m[(0, 0)]);
    Ok(EulerXYZ::new(x, y, z))
}

/// Unit vector orthogonal to `v`, from Gram-Schmidt against `(1,0,0)`, or
/// `(0,1,0)` when `v` is nearly along x.
fn orthogonal_complement(v: &Vec3) -> Vec3 {
    let reference = if v.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let u = reference - v * v.dot(&reference);
    u / u.norm()
}

/// The rotation about `n_α = cos α ĉ + sin α d̂` that maps `â` onto `b̂`,
/// where `ĉ = (â + b̂)/|â + b̂|` and `d̂ = (â × b̂)/|â × b̂|` span the plane
/// bisecting the two directions.
pub fn solution_space(a: &Vec3, b: &Vec3, alpha: f64) -> Result<SolutionSpaceSample> {
    let (na, nb) = (a.norm(), b.norm());
    if !(na > DEGENERATE_NORM) {
        return Err(Error::DegenerateDirection { norm: na });
    }
    if !(nb > DEGENERATE_NORM) {
        return Err(Error::DegenerateDirection { norm: nb });
    }
    let (ah, bh) = (a / na, b / nb);
    let diff = ah - bh;
    let (sa, ca) = alpha.sin_cos();

    if diff.norm() < PARALLEL_EPS {
        // Identical directions: any axis through the bisecting plane works with a zero angle.
        let d = orthogonal_complement(&ah);
        return Ok(SolutionSpaceSample { alpha, axis: ah * ca + d * sa, angle: 0.0 });
    }

    // Normal of the bisecting plane; well conditioned unless the inputs coincide.
    let m = diff / diff.norm();
    let cross = ah.cross(&bh);
    let (c, d) = if cross.norm() > PARALLEL_EPS {
        let d = cross / cross.norm();
        (d.cross(&m), d)
    } else {
        // Antiparallel: the bisecting plane is normal to â; the angle is π for every axis in it.
        let u = orthogonal_complement(&ah);
        (u, ah.cross(&u))
    };
    let axis = c * ca + d * sa;
    let axis = axis / axis.norm();

    let ap = ah - axis * ah.dot(&axis);
    let bp = bh - axis * bh.dot(&axis);
    let angle = axis.dot(&ap.cross(&bp)).atan2(ap.dot(&bp));
    Ok(SolutionSpaceSample { alpha, axis, angle })
}

/// Screw-axis angle between two orientations, in `[0, π]`.
pub fn relative_angle(ra: &RotationMatrix, rb: &RotationMatrix) -> f64 {
    matrix_to_axis_angle(&(ra.transpose() * *rb)).angle
}

/// Angle between two non-zero vectors, robust near 0 and π.
///
/// Equal to `acos(clamp(â·b̂, -1, 1))`.
pub fn angle_between(a: &Vec3, b: &Vec3) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

/// Wraps an angle into `[-π, π]`.
pub fn wrap_angle(angle: f64) -> f64 {
    let wrapped = (angle + PI).rem_euclid(2.0 * PI) - PI;
    if wrapped == -PI && angle > 0.0 {
        PI
    } else {
        wrapped
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    fn assert_mat(r: &RotationMatrix, expected: [[f64; 3]; 3], tol: f64) {
        for i in 0..3 {
            for j in 0..3 {
                assert_abs_diff_eq!(r.matrix()[(i, j)], expected[i][j], epsilon = tol);
            }
        }
    }

    #[test]
    fn zero_angle_is_identity() {
        let r = axis_angle_to_matrix(&AxisAngle::new(Vec3::z(), 0.0)).unwrap();
        assert_eq!(r, RotationMatrix::IDENTITY);
    }

    #[test]
    fn quarter_turn_about_z_by_substitution() {
        // n = (0,0,1), Φ = π/2: cos = 0, sin = 1 substituted entry by entry.
        let r = axis_angle_to_matrix(&AxisAngle::new(Vec3::z(), FRAC_PI_2)).unwrap();
        assert_mat(&r, [[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]], 1e-15);
        let v = r * Vec3::x();
        assert_abs_diff_eq!(v, Vec3::y(), epsilon = 1e-15);
    }

    #[test]
    fn half_turn_about_x_by_substitution() {
        let r = axis_angle_to_matrix(&AxisAngle::new(Vec3::x(), PI)).unwrap();
        assert_mat(&r, [[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]], 1e-15);
    }

    #[test]
    fn near_unit_axis_is_renormalized_and_bad_axis_rejected() {
        let r = axis_angle_to_matrix(&AxisAngle::new(Vec3::z() * (1.0 + 5e-7), FRAC_PI_2)).unwrap();
        assert!(r.orthonormality_error() < 1e-12);
        let err = axis_angle_to_matrix(&AxisAngle::new(Vec3::z() * 1.01, 0.3)).unwrap_err();
        assert!(matches!(err, Error::NonUnitAxis { .. }));
        assert!(axis_angle_to_matrix(&AxisAngle::new(Vec3::zeros(), 0.3)).is_err());
    }

    #[test]
    fn matrix_to_axis_angle_special_cases() {
        let aa = matrix_to_axis_angle(&RotationMatrix::IDENTITY);
        assert_eq!(aa.axis, Vec3::x());
        assert_eq!(aa.angle, 0.0);

        let flip = RotationMatrix::new(Matrix3::from_diagonal(&Vec3::new(1.0, -1.0, -1.0))).unwrap();
        let aa = matrix_to_axis_angle(&flip);
        assert_abs_diff_eq!(aa.angle, PI, epsilon = 1e-12);
        assert_abs_diff_eq!(aa.axis.x.abs(), 1.0, epsilon = 1e-12);
        assert!(aa.to_matrix().unwrap().max_abs_diff(&flip) < ROUND_TRIP_TOLERANCE);

        let aa = matrix_to_axis_angle(&RotationMatrix::rot_z(FRAC_PI_2));
        assert_abs_diff_eq!(aa.axis, Vec3::z(), epsilon = 1e-12);
        assert_abs_diff_eq!(aa.angle, FRAC_PI_2, epsilon = 1e-12);
    }

    #[test]
    fn euler_examples() {
        assert_eq!(euler_xyz_to_matrix(&EulerXYZ::default()), RotationMatrix::IDENTITY);
        let r = euler_xyz_to_matrix(&EulerXYZ::new(FRAC_PI_4, 0.0, 0.0));
        let h = FRAC_PI_4.cos();
        assert_mat(&r, [[1.0, 0.0, 0.0], [0.0, h, -h], [0.0, h, h]], 1e-15);
        assert!(r.max_abs_diff(&RotationMatrix::rot_x(FRAC_PI_4)) < 1e-15);
    }

    #[test]
    fn euler_composition_order_is_intrinsic_xyz() {
        let e = EulerXYZ::new(0.3, -0.7, 1.1);
        let expected = RotationMatrix::rot_x(0.3) * RotationMatrix::rot_y(-0.7) * RotationMatrix::rot_z(1.1);
        assert!(euler_xyz_to_matrix(&e).max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn gimbal_lock_is_reported() {
        let r = euler_xyz_to_matrix(&EulerXYZ::new(0.2, FRAC_PI_2, 0.1));
        assert!(matches!(matrix_to_euler_xyz(&r), Err(Error::GimbalLock { .. })));
    }

    #[test]
    fn solution_space_examples() {
        let s = solution_space(&Vec3::x(), &Vec3::x(), 0.0).unwrap();
        assert_abs_diff_eq!(s.axis, Vec3::x(), epsilon = 1e-15);
        assert_eq!(s.angle, 0.0);

        let s = solution_space(&Vec3::x(), &Vec3::y(), FRAC_PI_2).unwrap();
        assert_abs_diff_eq!(s.axis, Vec3::z(), epsilon = 1e-12);
        assert_abs_diff_eq!(s.angle, FRAC_PI_2, epsilon = 1e-12);
        assert_abs_diff_eq!(s.to_matrix() * Vec3::x(), Vec3::y(), epsilon = 1e-12);
    }

    #[test]
    fn solution_space_alpha_zero_uses_the_bisector() {
        let s = solution_space(&Vec3::x(), &Vec3::y(), 0.0).unwrap();
        assert_abs_diff_eq!(s.axis, Vec3::new(1.0, 1.0, 0.0).normalize(), epsilon = 1e-12);
        assert_abs_diff_eq!(s.angle.abs(), PI, epsilon = 1e-12);
    }

    #[test]
    fn solution_space_antiparallel_branch() {
        let a = Vec3::new(0.0, 0.0, 2.0);
        let s = solution_space(&a, &(-a), 0.0).unwrap();
        // Gram-Schmidt of (1,0,0) against z is x itself.
        assert_abs_diff_eq!(s.axis, Vec3::x(), epsilon = 1e-15);
        assert_abs_diff_eq!(s.angle.abs(), PI, epsilon = 1e-12);
        for k in 0..16 {
            let alpha = -PI + k as f64 * PI / 8.0;
            let s = solution_space(&a, &(-a), alpha).unwrap();
            assert_abs_diff_eq!(s.to_matrix() * Vec3::z(), -Vec3::z(), epsilon = 1e-12);
        }
        // Reference along x falls back to (0,1,0).
        let s = solution_space(&Vec3::x(), &(-Vec3::x()), 0.0).unwrap();
        assert_abs_diff_eq!(s.axis, Vec3::y(), epsilon = 1e-15);
    }

    #[test]
    fn solution_space_rejects_degenerate_input() {
        assert!(matches!(solution_space(&Vec3::zeros(), &Vec3::x(), 0.0), Err(Error::DegenerateDirection { .. })));
        assert!(solution_space(&Vec3::x(), &(Vec3::y() * 1e-9), 0.0).is_err());
    }

    #[test]
    fn relative_angle_examples() {
        let r = RotationMatrix::rot_y(0.4) * RotationMatrix::rot_x(-1.2);
        assert_abs_diff_eq!(relative_angle(&r, &r), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            relative_angle(&RotationMatrix::IDENTITY, &RotationMatrix::rot_z(FRAC_PI_2)),
            FRAC_PI_2,
            epsilon = 1e-12
        );
        let n = Vec3::new(1.0, 2.0, -0.5).normalize();
        let a = rodrigues(&n, 0.8);
        let b = rodrigues(&n, 0.8 + 1e-3);
        assert_abs_diff_eq!(relative_angle(&a, &b), 1e-3, epsilon = 1e-10);
        assert_abs_diff_eq!(relative_angle(&b, &a), 1e-3, epsilon = 1e-10);
    }

    #[test]
    fn angle_between_matches_arccos() {
        let a = Vec3::new(0.3, -1.0, 0.2);
        let b = Vec3::new(-0.1, 0.4, 0.9);
        let acos = (a.normalize().dot(&b.normalize())).clamp(-1.0, 1.0).acos();
        assert_abs_diff_eq!(angle_between(&a, &b), acos, epsilon = 1e-14);
        assert_abs_diff_eq!(angle_between(&a, &(-a)), PI, epsilon = 1e-15);
    }

    #[test]
    fn wrap_angle_range() {
        assert_abs_diff_eq!(wrap_angle(3.0 * PI / 2.0), -PI / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(wrap_angle(PI), PI, epsilon = 0.0);
        assert_abs_diff_eq!(wrap_angle(-0.2), -0.2, epsilon = 1e-15);
    }

    #[test]
    fn rotation_new_rejects_reflections() {
        let m = Matrix3::from_diagonal(&Vec3::new(1.0, 1.0, -1.0));
        assert!(matches!(RotationMatrix::new(m), Err(Error::NotARotation { .. })));
        assert!(RotationMatrix::new(Matrix3::identity() * 1.1).is_err());
    }
}
