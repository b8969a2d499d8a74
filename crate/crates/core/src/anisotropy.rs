//! Anisotropic Zeeman response of Kramers-doublet spins in a (111) thin film.
//!
//! A Kramers doublet behaves as an effective spin-1/2 whose splitting for a
//! field along the unit vector `n` is `g_eff * mu_B * |B|` with
//! `g_eff = |g^T n|`. Tensors are expressed in the cubic crystal frame; the
//! film normal is `[111]` and in-plane angles are measured from `[2,-1,-1]`.

use std::cmp::Ordering;

use nalgebra::{Matrix3, Rotation3, Unit, Vector3};
use serde::{Deserialize, Serialize};

use crate::constants::{H, MU_B};
use crate::{Error, Result};

/// Calibrated (synthetic) principal values of the default C2 tensor.
///
/// Chosen so that the six-member orbit shows g = 3.6 and g = 8.6 branches at
/// theta = 40 deg and a mean of g = 6.2 at theta = 10 deg under the default
/// tilt. These are not literature values.
pub const C2_DEFAULT_PRINCIPAL: [f64; 3] = [9.33, 5.84, 0.10];
/// Rotation of the default C2 principal axes about the C2 axis, degrees.
pub const C2_DEFAULT_ROTATION_DEG: f64 = 144.4;
/// Default axial C3i tensor: parallel and perpendicular g values.
pub const C3I_DEFAULT_G_PARALLEL: f64 = 12.0;
pub const C3I_DEFAULT_G_PERPENDICULAR: f64 = 3.2;

const UNIT_TOL: f64 = 1e-9;

/// Symmetric 3x3 g-tensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GTensor(Matrix3<f64>);

impl GTensor {
    pub fn new(matrix: Matrix3<f64>) -> Result<Self> {
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("g-tensor has non-finite entries".into()));
        }
        let scale = matrix.amax().max(f64::MIN_POSITIVE);
        let asym = (matrix - matrix.transpose()).amax();
        if asym > 1e-12 * scale {
            return Err(Error::InvalidInput(format!(
                "g-tensor is not symmetric (max |g - g^T| = {asym:.3e})"
            )));
        }
        let t = GTensor(matrix);
        let min_eig = t.principal_values()[0];
        if min_eig < -1e-12 * scale {
            return Err(Error::InvalidInput(format!(
                "g-tensor has a negative principal value ({min_eig:.3e})"
            )));
        }
        Ok(t)
    }

    pub fn isotropic(g: f64) -> Result<Self> {
        Self::new(Matrix3::from_diagonal_element(g))
    }

    /// `R diag(values) R^T`: principal values along the columns of `axes`.
    pub fn from_principal(values: [f64; 3], axes: &Rotation3<f64>) -> Result<Self> {
        let d = Matrix3::from_diagonal(&Vector3::from(values));
        let m = axes.matrix() * d * axes.matrix().transpose();
        Self::new(symmetrize(m))
    }

    /// Axially symmetric tensor with symmetry axis `axis`.
    pub fn axial(g_parallel: f64, g_perpendicular: f64, axis: &Vector3<f64>) -> Result<Self> {
        let a = axis
            .try_normalize(f64::EPSILON)
            .ok_or_else(|| Error::InvalidInput("axial tensor needs a non-zero axis".into()))?;
        let m = Matrix3::from_diagonal_element(g_perpendicular)
            + (g_parallel - g_perpendicular) * a * a.transpose();
        Self::new(symmetrize(m))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    /// `R g R^T`.
    pub fn rotated(&self, rotation: &Matrix3<f64>) -> Result<Self> {
        Self::new(symmetrize(rotation * self.0 * rotation.transpose()))
    }

    /// Principal values in ascending order.
    pub fn principal_values(&self) -> [f64; 3] {
        let mut ev: Vec<f64> = self.0.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
        [ev[0], ev[1], ev[2]]
    }
}

fn symmetrize(m: Matrix3<f64>) -> Matrix3<f64> {
    (m + m.transpose()) * 0.5
}

/// Effective g-factor `sqrt(n^T g g^T n)` for a unit field direction.
pub fn effective_g(tensor: &GTensor, direction: &Vector3<f64>) -> Result<f64> {
    let norm = direction.norm();
    if !norm.is_finite() || (norm - 1.0).abs() > UNIT_TOL {
        return Err(Error::domain(
            "effective_g",
            format!("direction must be a unit vector (|n| = {norm:.12}); normalize it first"),
        ));
    }
    Ok((tensor.matrix().transpose() * direction).norm())
}

/// Resonance field `B0 = h f / (g mu_B)` in tesla.
pub fn resonance_field(g_eff: f64, f_mw: f64) -> Result<f64> {
    if !(g_eff > 0.0) {
        return Err(Error::domain("resonance_field", format!("g_eff must be > 0, got {g_eff}")));
    }
    if !(f_mw > 0.0) {
        return Err(Error::domain("resonance_field", format!("frequency must be > 0, got {f_mw}")));
    }
    Ok(H * f_mw / (g_eff * MU_B))
}

/// `delta_g = g * delta_B / B_res`.
pub fn delta_g_from_delta_b(g: f64, delta_b: f64, b_res: f64) -> Result<f64> {
    if !(b_res > 0.0) {
        return Err(Error::domain("delta_g_from_delta_b", format!("B_res must be > 0, got {b_res}")));
    }
    Ok(g * delta_b / b_res)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SiteLabel {
    C2,
    C3i,
}

impl SiteLabel {
    pub fn orbit_size(self) -> usize {
        match self {
            SiteLabel::C2 => 6,
            SiteLabel::C3i => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubSite {
    pub id: usize,
    pub tensor: GTensor,
}

/// Symmetry-equivalent sub-site orientations of one crystallographic site.
#[derive(Debug, Clone, PartialEq)]
pub struct SubSiteOrbit {
    label: SiteLabel,
    members: Vec<SubSite>,
}

impl SubSiteOrbit {
    /// Validates the member count and that all members share one spectrum.
    pub fn new(label: SiteLabel, members: Vec<SubSite>) -> Result<Self> {
        if members.len() != label.orbit_size() {
            return Err(Error::InvalidInput(format!(
                "{label:?} orbit needs {} members, got {}",
                label.orbit_size(),
                members.len()
            )));
        }
        let reference = members[0].tensor.principal_values();
        let scale = reference[2].abs().max(1.0);
        for m in &members[1..] {
            let pv = m.tensor.principal_values();
            if pv.iter().zip(&reference).any(|(a, b)| (a - b).abs() > 1e-9 * scale) {
                return Err(Error::InvalidInput(format!(
                    "sub-site {} has principal values {pv:?}, expected {reference:?}",
                    m.id
                )));
            }
        }
        Ok(Self { label, members })
    }

    /// C2 orbit from one tensor whose C2 axis is `[001]` and whose other two
    /// principal axes are rotated by `rotation_deg` about it.
    ///
    /// The six orientations are the three cubic axes, each paired with its
    /// image under a two-fold rotation about a perpendicular cube axis.
    pub fn c2(principal: [f64; 3], rotation_deg: f64) -> Result<Self> {
        let base_axes = Rotation3::from_axis_angle(&Vector3::z_axis(), rotation_deg.to_radians());
        let base = GTensor::from_principal(principal, &base_axes)?;
        // cyclic permutations mapping z -> z, x, y
        let perms = [
            Matrix3::identity(),
            Matrix3::new(0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0),
            Matrix3::new(0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 0.0),
        ];
        let flip = Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, -1.0));
        let mut members = Vec::with_capacity(6);
        for p in &perms {
            for k in [Matrix3::identity(), flip] {
                members.push(SubSite {
                    id: members.len() + 1,
                    tensor: base.rotated(&(p * k))?,
                });
            }
        }
        Self::new(SiteLabel::C2, members)
    }

    /// C3i orbit: axial tensors along the four `<111>` body diagonals.
    /// Member 1 has its axis along the film normal `[111]`.
    pub fn c3i(g_parallel: f64, g_perpendicular: f64) -> Result<Self> {
        let axes = [
            Vector3::new(1.0, 1.0, 1.0),
            Vector3::new(1.0, -1.0, -1.0),
            Vector3::new(-1.0, 1.0, -1.0),
            Vector3::new(-1.0, -1.0, 1.0),
        ];
        let members = axes
            .iter()
            .enumerate()
            .map(|(i, a)| {
                Ok(SubSite {
                    id: i + 1,
                    tensor: GTensor::axial(g_parallel, g_perpendicular, a)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(SiteLabel::C3i, members)
    }

    pub fn c2_default() -> Self {
        Self::c2(C2_DEFAULT_PRINCIPAL, C2_DEFAULT_ROTATION_DEG).expect("default C2 tensor is valid")
    }

    pub fn c3i_default() -> Self {
        Self::c3i(C3I_DEFAULT_G_PARALLEL, C3I_DEFAULT_G_PERPENDICULAR)
            .expect("default C3i tensor is valid")
    }

    pub fn label(&self) -> SiteLabel {
        self.label
    }

    pub fn members(&self) -> &[SubSite] {
        &self.members
    }
}

/// Axis about which the tilt offset rotates the field out of the film plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum TiltAxis {
    /// In-plane axis perpendicular to the field (field pitches toward the normal).
    #[default]
    PerpendicularToField,
    /// Fixed in-plane reference axis `[2,-1,-1]`.
    FixedReference,
}

/// Sample-to-magnet misalignment, all angles in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TiltParams {
    pub dphi1_deg: f64,
    pub dphi2_deg: f64,
    pub theta0_deg: f64,
    #[serde(default)]
    pub axis: TiltAxis,
}

impl TiltParams {
    pub const NONE: TiltParams = TiltParams {
        dphi1_deg: 0.0,
        dphi2_deg: 0.0,
        theta0_deg: 0.0,
        axis: TiltAxis::PerpendicularToField,
    };

    /// Misalignment measured on the reference device (2.8 deg / 0.2 deg, 30 deg offset).
    pub const MEASURED: TiltParams = TiltParams {
        dphi1_deg: 2.8,
        dphi2_deg: 0.2,
        theta0_deg: 30.0,
        axis: TiltAxis::PerpendicularToField,
    };

    /// Same angular offset but no out-of-plane tilt.
    pub fn without_tilt(&self) -> TiltParams {
        TiltParams {
            dphi1_deg: 0.0,
            dphi2_deg: 0.0,
            ..*self
        }
    }
}

impl Default for TiltParams {
    fn default() -> Self {
        Self::MEASURED
    }
}

/// Applied field: magnitude and in-plane angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldConfig {
    pub magnitude_t: f64,
    pub theta_deg: f64,
    pub tilt: TiltParams,
}

impl FieldConfig {
    pub fn new(magnitude_t: f64, theta_deg: f64, tilt: TiltParams) -> Result<Self> {
        if !(magnitude_t >= 0.0) {
            return Err(Error::InvalidInput(format!("field magnitude must be >= 0, got {magnitude_t}")));
        }
        Ok(Self {
            magnitude_t,
            theta_deg: normalize_deg(theta_deg),
            tilt,
        })
    }

    pub fn direction(&self) -> Vector3<f64> {
        field_direction(self.theta_deg, &self.tilt)
    }
}

/// Wraps an angle into `[0, 360)`.
pub fn normalize_deg(theta: f64) -> f64 {
    let r = theta.rem_euclid(360.0);
    if r >= 360.0 {
        0.0
    } else {
        r
    }
}

/// Out-of-plane tilt `atan(tan(dphi1) cos(theta+theta0) + tan(dphi2) sin(theta+theta0))`, degrees.
pub fn tilt_offset(theta_deg: f64, tilt: &TiltParams) -> f64 {
    let a = (theta_deg + tilt.theta0_deg).to_radians();
    let t = tilt.dphi1_deg.to_radians().tan() * a.cos() + tilt.dphi2_deg.to_radians().tan() * a.sin();
    t.atan().to_degrees()
}

fn film_frame() -> (Vector3<f64>, Vector3<f64>, Vector3<f64>) {
    let normal = Vector3::new(1.0, 1.0, 1.0).normalize();
    let reference = Vector3::new(2.0, -1.0, -1.0).normalize();
    let second = normal.cross(&reference);
    (reference, second, normal)
}

/// Unit field direction in the crystal frame for in-plane angle `theta_deg`.
///
/// The in-plane azimuth is `theta + theta0` from `[2,-1,-1]`; the field is
/// then tilted out of the plane by [`tilt_offset`].
pub fn field_direction(theta_deg: f64, tilt: &TiltParams) -> Vector3<f64> {
    let (u, v, z) = film_frame();
    let azimuth = (theta_deg + tilt.theta0_deg).to_radians();
    let in_plane = azimuth.cos() * u + azimuth.sin() * v;
    let dphi = tilt_offset(theta_deg, tilt).to_radians();
    let n = match tilt.axis {
        TiltAxis::PerpendicularToField => dphi.cos() * in_plane + dphi.sin() * z,
        TiltAxis::FixedReference => {
            let r = Rotation3::from_axis_angle(&Unit::new_normalize(u), -dphi);
            r * in_plane
        }
    };
    n.normalize()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AngleMapRow {
    pub theta_deg: f64,
    pub sub_site_id: usize,
    pub b_res_t: f64,
}

/// Resonance field of every orbit member over an in-plane angle grid.
///
/// Rows are sorted by `(theta, sub_site_id)` with theta wrapped to `[0, 360)`.
pub fn angle_map(
    orbit: &SubSiteOrbit,
    f_mw: f64,
    theta_grid: &[f64],
    tilt: &TiltParams,
) -> Result<Vec<AngleMapRow>> {
    if orbit.members().is_empty() {
        return Err(Error::InvalidInput("orbit has no members".into()));
    }
    if theta_grid.is_empty() {
        return Err(Error::InvalidInput("theta grid is empty".into()));
    }
    let mut rows = Vec::with_capacity(theta_grid.len() * orbit.members().len());
    for &theta in theta_grid {
        let theta = normalize_deg(theta);
        let n = field_direction(theta, tilt);
        for m in orbit.members() {
            let g = effective_g(&m.tensor, &n)?;
            rows.push(AngleMapRow {
                theta_deg: theta,
                sub_site_id: m.id,
                b_res_t: resonance_field(g, f_mw)?,
            });
        }
    }
    rows.sort_by(|a, b| {
        a.theta_deg
            .partial_cmp(&b.theta_deg)
            .unwrap_or(Ordering::Equal)
            .then(a.sub_site_id.cmp(&b.sub_site_id))
    });
    Ok(rows)
}

/// Quadratic-form coefficients for `g^2(theta)` and `g*dg(theta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrainLinewidthModel {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub a_prime: f64,
    pub b_prime: f64,
    pub c_prime: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrainLinewidth {
    pub g_squared: f64,
    pub g_delta_g: f64,
}

impl StrainLinewidthModel {
    /// Checks `g^2 > 0` on every angle of `theta_grid`.
    pub fn check_domain(&self, theta_grid: &[f64]) -> Result<()> {
        // cos(90 deg) is not exactly zero, so compare against the coefficient scale
        let floor = 1e-12 * self.a.abs().max(self.b.abs()).max(self.c.abs());
        for &t in theta_grid {
            let g2 = strain_linewidth(t, self).g_squared;
            if !(g2 > floor) {
                return Err(Error::domain("strain_linewidth", format!("g^2 = {g2} at theta = {t} deg")));
            }
        }
        Ok(())
    }
}

fn quadratic_form(a: f64, b: f64, c: f64, theta: f64) -> f64 {
    let (s, co) = theta.sin_cos();
    a * co * co + 2.0 * b * co * s + c * s * s
}

/// Evaluates both angular quadratic forms at `theta_deg`.
pub fn strain_linewidth(theta_deg: f64, model: &StrainLinewidthModel) -> StrainLinewidth {
    let t = theta_deg.to_radians();
    StrainLinewidth {
        g_squared: quadratic_form(model.a, model.b, model.c, t),
        g_delta_g: quadratic_form(model.a_prime, model.b_prime, model.c_prime, t),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn diag246() -> GTensor {
        GTensor::new(Matrix3::from_diagonal(&Vector3::new(2.0, 4.0, 6.0))).unwrap()
    }

    #[test]
    fn effective_g_examples() {
        let iso = GTensor::isotropic(2.0).unwrap();
        let n = Vector3::new(0.3, -0.4, 0.5).normalize();
        assert_relative_eq!(effective_g(&iso, &n).unwrap(), 2.0, epsilon = 1e-14);
        assert_relative_eq!(effective_g(&diag246(), &Vector3::y()).unwrap(), 4.0, epsilon = 1e-14);
        let d = Vector3::new(1.0, 1.0, 1.0) / 3f64.sqrt();
        // (4 + 16 + 36) / 3
        assert_relative_eq!(effective_g(&diag246(), &d).unwrap(), (56.0f64 / 3.0).sqrt(), epsilon = 1e-12);
        assert_relative_eq!(effective_g(&diag246(), &d).unwrap(), 4.3205, epsilon = 1e-4);
        assert_eq!(effective_g(&diag246(), &d).unwrap(), effective_g(&diag246(), &-d).unwrap());
    }

    #[test]
    fn effective_g_rejects_non_unit() {
        let err = effective_g(&diag246(), &Vector3::new(1.0, 1.0, 0.0)).unwrap_err();
        assert!(err.to_string().contains("normalize"));
    }

    #[test]
    fn tensor_validation() {
        let mut m = Matrix3::identity();
        m[(0, 1)] = 0.1;
        assert!(GTensor::new(m).is_err());
        assert!(GTensor::new(Matrix3::from_diagonal(&Vector3::new(-1.0, 2.0, 2.0))).is_err());
    }

    #[test]
    fn resonance_field_examples() {
        let b = resonance_field(3.2, 5.81e9).unwrap();
        assert_relative_eq!(b, 0.12972, epsilon = 5e-5);
        let b36 = resonance_field(3.6, 5.81e9).unwrap();
        assert_relative_eq!(b36, 0.11531, epsilon = 5e-5);
        assert!((b36 - 0.113).abs() / 0.113 < 0.03);
        assert!(resonance_field(1e12, 5.81e9).unwrap() < 1e-10);
        assert!(resonance_field(0.0, 5.81e9).is_err());
        assert!(resonance_field(-2.0, 5.81e9).is_err());
    }

    #[test]
    fn tilt_offset_examples() {
        let tilt = TiltParams {
            dphi1_deg: 2.8,
            dphi2_deg: 0.2,
            theta0_deg: 0.0,
            axis: TiltAxis::PerpendicularToField,
        };
        assert_relative_eq!(tilt_offset(0.0, &tilt), 2.8, epsilon = 1e-12);
        assert_relative_eq!(tilt_offset(90.0, &tilt), 0.2, epsilon = 1e-12);
        let expected = ((2.8f64.to_radians().tan() + 0.2f64.to_radians().tan()) / 2f64.sqrt())
            .atan()
            .to_degrees();
        assert_relative_eq!(tilt_offset(45.0, &tilt), expected, epsilon = 1e-12);
        assert_relative_eq!(tilt_offset(45.0, &tilt), 2.122, epsilon = 1e-3);
        for t in [-30.0, 17.0, 200.0] {
            assert_relative_eq!(tilt_offset(t, &tilt), tilt_offset(t + 360.0, &tilt), epsilon = 1e-12);
        }
    }

    #[test]
    fn orbits_have_expected_sizes_and_shared_spectra() {
        let c2 = SubSiteOrbit::c2_default();
        assert_eq!(c2.members().len(), 6);
        let c3i = SubSiteOrbit::c3i_default();
        assert_eq!(c3i.members().len(), 4);
        let pv = c3i.members()[0].tensor.principal_values();
        assert_relative_eq!(pv[0], 3.2, epsilon = 1e-12);
        assert_relative_eq!(pv[2], 12.0, epsilon = 1e-12);
        // a wrong member count is rejected
        let members = c3i.members()[..3].to_vec();
        assert!(SubSiteOrbit::new(SiteLabel::C3i, members).is_err());
    }

    #[test]
    fn c3i_normal_member_is_nearly_isotropic_in_plane() {
        let orbit = SubSiteOrbit::c3i_default();
        let grid: Vec<f64> = (0..360).map(f64::from).collect();
        let rows = angle_map(&orbit, 5.81e9, &grid, &TiltParams::MEASURED).unwrap();
        let fields: Vec<f64> = rows.iter().filter(|r| r.sub_site_id == 1).map(|r| r.b_res_t).collect();
        let (lo, hi) = fields
            .iter()
            .fold((f64::MAX, f64::MIN), |(lo, hi), &b| (lo.min(b), hi.max(b)));
        assert!((hi - lo) / hi < 0.02, "spread {lo}..{hi}");
        // without tilt it is exactly flat at the g_perp field
        let flat = angle_map(&orbit, 5.81e9, &grid, &TiltParams::NONE).unwrap();
        let b32 = resonance_field(3.2, 5.81e9).unwrap();
        for r in flat.iter().filter(|r| r.sub_site_id == 1) {
            assert_relative_eq!(r.b_res_t, b32, epsilon = 1e-12);
        }
    }

    #[test]
    fn isotropic_member_gives_flat_map() {
        let t = GTensor::isotropic(2.0).unwrap();
        let orbit = SubSiteOrbit {
            label: SiteLabel::C3i,
            members: vec![SubSite { id: 1, tensor: t }],
        };
        let rows = angle_map(&orbit, 5.81e9, &[0.0, 33.0, 180.0], &TiltParams::MEASURED).unwrap();
        for r in rows {
            assert_relative_eq!(r.b_res_t, 0.20755, epsilon = 5e-5);
        }
    }

    #[test]
    fn angle_map_is_periodic_and_sorted() {
        let orbit = SubSiteOrbit::c2_default();
        let a = angle_map(&orbit, 5.81e9, &[10.0, 40.0, 350.0], &TiltParams::MEASURED).unwrap();
        let b = angle_map(&orbit, 5.81e9, &[370.0, 400.0, 710.0], &TiltParams::MEASURED).unwrap();
        assert_eq!(a.len(), 18);
        for (x, y) in a.iter().zip(&b) {
            assert_relative_eq!(x.theta_deg, y.theta_deg, epsilon = 1e-9);
            assert_relative_eq!(x.b_res_t, y.b_res_t, epsilon = 1e-12);
        }
        assert!(a.windows(2).all(|w| (w[0].theta_deg, w[0].sub_site_id) <= (w[1].theta_deg, w[1].sub_site_id)));
        assert!(angle_map(&orbit, 5.81e9, &[], &TiltParams::MEASURED).is_err());
    }

    #[test]
    fn zero_tilt_equals_in_plane_map() {
        let orbit = SubSiteOrbit::c2_default();
        let tilt = TiltParams::MEASURED.without_tilt();
        let (u, v, _) = film_frame();
        for theta in [0.0, 25.0, 113.0] {
            let rows = angle_map(&orbit, 5.81e9, &[theta], &tilt).unwrap();
            let a = (theta + tilt.theta0_deg).to_radians();
            let n = a.cos() * u + a.sin() * v;
            for (r, m) in rows.iter().zip(orbit.members()) {
                let g = effective_g(&m.tensor, &n).unwrap();
                assert_relative_eq!(r.b_res_t, resonance_field(g, 5.81e9).unwrap(), epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn default_c2_calibration_targets() {
        let orbit = SubSiteOrbit::c2_default();
        let g_at = |theta: f64| -> Vec<f64> {
            let n = field_direction(theta, &TiltParams::MEASURED);
            orbit.members().iter().map(|m| effective_g(&m.tensor, &n).unwrap()).collect()
        };
        let g40 = g_at(40.0);
        assert!(g40.iter().any(|g| (g - 3.6).abs() < 0.05), "{g40:?}");
        assert!(g40.iter().any(|g| (g - 8.6).abs() < 0.05), "{g40:?}");
        let g10 = g_at(10.0);
        let mean = g10.iter().sum::<f64>() / 6.0;
        assert!((mean - 6.2).abs() < 0.05, "{g10:?}");
    }

    #[test]
    fn fixed_reference_tilt_axis_is_configurable() {
        let tilt = TiltParams {
            axis: TiltAxis::FixedReference,
            ..TiltParams::MEASURED
        };
        let n = field_direction(60.0, &tilt);
        assert_relative_eq!(n.norm(), 1.0, epsilon = 1e-12);
        assert!((n - field_direction(60.0, &TiltParams::MEASURED)).norm() > 1e-6);
    }

    #[test]
    fn strain_linewidth_examples() {
        let m = |a, b, c| StrainLinewidthModel { a, b, c, a_prime: a, b_prime: b, c_prime: c };
        let flat = m(3.0, 0.0, 3.0);
        for t in [0.0, 17.0, 90.0, 133.0] {
            assert_relative_eq!(strain_linewidth(t, &flat).g_squared, 3.0, epsilon = 1e-12);
        }
        let axis = m(4.0, 0.0, 0.0);
        assert_relative_eq!(strain_linewidth(0.0, &axis).g_squared, 4.0, epsilon = 1e-12);
        assert!(strain_linewidth(90.0, &axis).g_squared.abs() < 1e-12);
        assert_relative_eq!(strain_linewidth(45.0, &m(1.0, 1.0, 1.0)).g_squared, 2.0, epsilon = 1e-12);
        assert!(axis.check_domain(&[0.0, 90.0]).is_err());
        assert!(flat.check_domain(&[0.0, 90.0]).is_ok());
    }

    #[test]
    fn delta_g_examples() {
        assert_eq!(delta_g_from_delta_b(3.2, 0.0, 0.13).unwrap(), 0.0);
        assert_relative_eq!(delta_g_from_delta_b(3.2, 1e-3, 0.130).unwrap(), 0.024615, epsilon = 1e-6);
        let one = delta_g_from_delta_b(3.2, 1e-3, 0.13).unwrap();
        let two = delta_g_from_delta_b(3.2, 2e-3, 0.13).unwrap();
        assert_relative_eq!(two, 2.0 * one, epsilon = 1e-15);
        assert!(delta_g_from_delta_b(3.2, 1e-3, 0.0).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn rotation(ax: f64, ay: f64, az: f64, angle: f64) -> Option<Matrix3<f64>> {
            let axis = Vector3::new(ax, ay, az).try_normalize(1e-6)?;
            Some(*Rotation3::from_axis_angle(&Unit::new_unchecked(axis), angle).matrix())
        }

        proptest! {
            #[test]
            fn effective_g_is_rotation_invariant(
                g in prop::array::uniform3(0.1f64..15.0),
                ax in -1.0f64..1.0, ay in -1.0f64..1.0, az in -1.0f64..1.0,
                angle in 0.0f64..6.3,
                nx in -1.0f64..1.0, ny in -1.0f64..1.0, nz in -1.0f64..1.0,
            ) {
                let (Some(r), Some(n)) = (rotation(ax, ay, az, angle), Vector3::new(nx, ny, nz).try_normalize(1e-3)) else {
                    return Ok(());
                };
                let t = GTensor::from_principal(g, &Rotation3::from_axis_angle(&Vector3::x_axis(), 0.4)).unwrap();
                let rt = t.rotated(&r).unwrap();
                let a = effective_g(&t, &n).unwrap();
                let b = effective_g(&rt, &(r * n).normalize()).unwrap();
                prop_assert!((a - b).abs() <= 1e-10 * a.max(1.0));
            }

            #[test]
            fn field_times_g_is_constant(g in 0.1f64..20.0, f in 1e9f64..2e10) {
                let prod = resonance_field(g, f).unwrap() * g;
                let reference = resonance_field(1.0, f).unwrap();
                prop_assert!((prod - reference).abs() <= 1e-12 * reference);
            }

            #[test]
            fn strain_forms_are_half_period(
                a in -5.0f64..5.0, b in -5.0f64..5.0, c in -5.0f64..5.0, t in -720.0f64..720.0,
            ) {
                let m = StrainLinewidthModel { a, b, c, a_prime: b, b_prime: c, c_prime: a };
                let x = strain_linewidth(t, &m);
                let y = strain_linewidth(t + 180.0, &m);
                prop_assert!((x.g_squared - y.g_squared).abs() < 1e-9);
                prop_assert!((x.g_delta_g - y.g_delta_g).abs() < 1e-9);
                // derivative bounded by 2 * (|a| + 2|b| + |c|) per radian
                let h = 1e-4;
                let d = (strain_linewidth(t + h, &m).g_squared - strain_linewidth(t - h, &m).g_squared)
                    / (2.0 * h.to_radians());
                prop_assert!(d.abs() <= 2.0 * (a.abs() + 2.0 * b.abs() + c.abs()) + 1e-6);
            }
        }
    }
}
