//! Metric 3D primitives: boxes, ego poses, camera models, coordinate
//! transforms, and view projection.
//!
//! Conventions:
//! - Boxes are upright (gravity-aligned); `yaw` is the heading about +z,
//!   normalized to the half-open interval `[-pi, pi)`.
//! - `size` is `(w, l, h)`: width across the heading, length along it,
//!   height along z.
//! - A [`Pose`] maps local coordinates into its parent frame
//!   (`p_parent = R * p_local + t`).
//! - Matching gates use ground-plane `(x, y)` distance, following the
//!   standard tracking-benchmark convention for driving scenes.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Coordinate frame a box is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Frame {
    World,
    Ego,
}

/// Normalize an angle to `[-pi, pi)`. The boundary `pi` maps to `-pi`.
pub fn normalize_yaw(angle: f64) -> Result<f64> {
    if !angle.is_finite() {
        return Err(Error::invalid(format!("yaw must be finite, got {angle}")));
    }
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut a = angle.rem_euclid(two_pi);
    if a >= std::f64::consts::PI {
        a -= two_pi;
    }
    Ok(a)
}

/// Unit quaternion, scalar-first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quat {
    pub w: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Quat {
    pub const IDENTITY: Quat = Quat { w: 1.0, x: 0.0, y: 0.0, z: 0.0 };

    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Result<Quat> {
        let q = Quat { w, x, y, z };
        let n = q.norm();
        if !n.is_finite() || (n - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("quaternion norm {n} != 1")));
        }
        Ok(q)
    }

    /// Rotation of `angle` radians about +z.
    pub fn from_yaw(angle: f64) -> Quat {
        let half = angle * 0.5;
        Quat { w: half.cos(), x: 0.0, y: 0.0, z: half.sin() }
    }

    /// Quaternion from a rotation matrix (rows of `m` are matrix rows).
    /// Shepperd's method; the input must be a proper rotation.
    pub fn from_matrix(m: &[[f64; 3]; 3]) -> Quat {
        let trace = m[0][0] + m[1][1] + m[2][2];
        let q = if trace > 0.0 {
            let s = (trace + 1.0).sqrt() * 2.0;
            Quat {
                w: 0.25 * s,
                x: (m[2][1] - m[1][2]) / s,
                y: (m[0][2] - m[2][0]) / s,
                z: (m[1][0] - m[0][1]) / s,
            }
        } else if m[0][0] > m[1][1] && m[0][0] > m[2][2] {
            let s = (1.0 + m[0][0] - m[1][1] - m[2][2]).sqrt() * 2.0;
            Quat {
                w: (m[2][1] - m[1][2]) / s,
                x: 0.25 * s,
                y: (m[0][1] + m[1][0]) / s,
                z: (m[0][2] + m[2][0]) / s,
            }
        } else if m[1][1] > m[2][2] {
            let s = (1.0 + m[1][1] - m[0][0] - m[2][2]).sqrt() * 2.0;
            Quat {
                w: (m[0][2] - m[2][0]) / s,
                x: (m[0][1] + m[1][0]) / s,
                y: 0.25 * s,
                z: (m[1][2] + m[2][1]) / s,
            }
        } else {
            let s = (1.0 + m[2][2] - m[0][0] - m[1][1]).sqrt() * 2.0;
            Quat {
                w: (m[1][0] - m[0][1]) / s,
                x: (m[0][2] + m[2][0]) / s,
                y: (m[1][2] + m[2][1]) / s,
                z: 0.25 * s,
            }
        };
        q.normalized()
    }

    pub fn norm(&self) -> f64 {
        (self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn normalized(&self) -> Quat {
        let n = self.norm();
        Quat { w: self.w / n, x: self.x / n, y: self.y / n, z: self.z / n }
    }

    pub fn conjugate(&self) -> Quat {
        Quat { w: self.w, x: -self.x, y: -self.y, z: -self.z }
    }

    pub fn mul(&self, o: &Quat) -> Quat {
        Quat {
            w: self.w * o.w - self.x * o.x - self.y * o.y - self.z * o.z,
            x: self.w * o.x + self.x * o.w + self.y * o.z - self.z * o.y,
            y: self.w * o.y - self.x * o.z + self.y * o.w + self.z * o.x,
            z: self.w * o.z + self.x * o.y - self.y * o.x + self.z * o.w,
        }
    }

    /// Rotate a vector by this quaternion.
    pub fn rotate(&self, v: [f64; 3]) -> [f64; 3] {
        // q * (0, v) * q^-1, expanded.
        let (w, x, y, z) = (self.w, self.x, self.y, self.z);
        let (vx, vy, vz) = (v[0], v[1], v[2]);
        let tx = 2.0 * (y * vz - z * vy);
        let ty = 2.0 * (z * vx - x * vz);
        let tz = 2.0 * (x * vy - y * vx);
        [
            vx + w * tx + (y * tz - z * ty),
            vy + w * ty + (z * tx - x * tz),
            vz + w * tz + (x * ty - y * tx),
        ]
    }

    pub fn rotate_inv(&self, v: [f64; 3]) -> [f64; 3] {
        self.conjugate().rotate(v)
    }
}

/// Rigid transform: rotation then translation, mapping local coordinates
/// into the parent frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub translation: [f64; 3],
    pub rotation: Quat,
}

impl Pose {
    pub const IDENTITY: Pose =
        Pose { translation: [0.0, 0.0, 0.0], rotation: Quat::IDENTITY };

    pub fn new(translation: [f64; 3], rotation: Quat) -> Result<Pose> {
        if translation.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("pose translation must be finite"));
        }
        let rotation = Quat::new(rotation.w, rotation.x, rotation.y, rotation.z)?;
        Ok(Pose { translation, rotation })
    }

    pub fn from_xy_yaw(x: f64, y: f64, yaw: f64) -> Pose {
        Pose { translation: [x, y, 0.0], rotation: Quat::from_yaw(yaw) }
    }

    /// Map a point from this pose's local frame into the parent frame.
    pub fn apply(&self, p: [f64; 3]) -> [f64; 3] {
        let r = self.rotation.rotate(p);
        [
            r[0] + self.translation[0],
            r[1] + self.translation[1],
            r[2] + self.translation[2],
        ]
    }

    /// Map a point from the parent frame into this pose's local frame.
    pub fn apply_inv(&self, p: [f64; 3]) -> [f64; 3] {
        self.rotation.rotate_inv([
            p[0] - self.translation[0],
            p[1] - self.translation[1],
            p[2] - self.translation[2],
        ])
    }

    pub fn inverse(&self) -> Pose {
        let rot = self.rotation.conjugate();
        let t = rot.rotate([
            -self.translation[0],
            -self.translation[1],
            -self.translation[2],
        ]);
        Pose { translation: t, rotation: rot }
    }
}

/// Upright 3D bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Box3D {
    pub center: [f64; 3],
    /// `(w, l, h)` in meters.
    pub size: [f64; 3],
    /// Heading about +z, in `[-pi, pi)`.
    pub yaw: f64,
    pub frame: Frame,
}

impl Box3D {
    pub fn new(center: [f64; 3], size: [f64; 3], yaw: f64, frame: Frame) -> Result<Box3D> {
        if center.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("box center must be finite"));
        }
        if size.iter().any(|s| !s.is_finite() || *s <= 0.0) {
            return Err(Error::invalid(format!("box size must be positive, got {size:?}")));
        }
        Ok(Box3D { center, size, yaw: normalize_yaw(yaw)?, frame })
    }

    /// Flatten to `[cx, cy, cz, w, l, h, yaw]`, the on-disk layout. The
    /// frame tag is contextual (scene tracks and submissions are world
    /// frame) and not stored.
    pub fn to_array(&self) -> [f64; 7] {
        [
            self.center[0], self.center[1], self.center[2],
            self.size[0], self.size[1], self.size[2],
            self.yaw,
        ]
    }

    pub fn from_array(a: [f64; 7], frame: Frame) -> Result<Box3D> {
        Box3D::new([a[0], a[1], a[2]], [a[3], a[4], a[5]], a[6], frame)
    }

    /// The 8 corners in the box's own frame.
    pub fn corners(&self) -> [[f64; 3]; 8] {
        let (hw, hl, hh) = (self.size[0] / 2.0, self.size[1] / 2.0, self.size[2] / 2.0);
        let (c, s) = (self.yaw.cos(), self.yaw.sin());
        let mut out = [[0.0; 3]; 8];
        let mut i = 0;
        for sx in [-1.0, 1.0] {
            for sy in [-1.0, 1.0] {
                for sz in [-1.0, 1.0] {
                    // length runs along the heading axis, width across it
                    let lx = sx * hl;
                    let ly = sy * hw;
                    out[i] = [
                        self.center[0] + c * lx - s * ly,
                        self.center[1] + s * lx + c * ly,
                        self.center[2] + sz * hh,
                    ];
                    i += 1;
                }
            }
        }
        out
    }
}

/// Express a box given in the `from` frame in the `to` frame. Both poses are
/// relative to a common parent (typically world). Size is unchanged; yaw is
/// re-derived from the transformed heading direction projected onto the
/// ground plane.
pub fn transform_box(b: &Box3D, from: &Pose, to: &Pose) -> Box3D {
    let world_center = from.apply(b.center);
    let center = to.apply_inv(world_center);
    let heading = [b.yaw.cos(), b.yaw.sin(), 0.0];
    let world_heading = from.rotation.rotate(heading);
    let local_heading = to.rotation.rotate_inv(world_heading);
    let yaw = normalize_yaw(local_heading[1].atan2(local_heading[0]))
        .expect("atan2 result is finite");
    Box3D { center, size: b.size, yaw, frame: b.frame }
}

/// Ground-plane `(x, y)` distance between box centers. Errors when the boxes
/// are tagged with different frames.
pub fn center_distance(a: &Box3D, b: &Box3D) -> Result<f64> {
    if a.frame != b.frame {
        return Err(Error::invalid(format!(
            "center_distance across frames {:?} vs {:?}",
            a.frame, b.frame
        )));
    }
    let dx = a.center[0] - b.center[0];
    let dy = a.center[1] - b.center[1];
    Ok((dx * dx + dy * dy).sqrt())
}

/// Camera slot names for the six-view rig.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CameraName {
    Front,
    FrontLeft,
    FrontRight,
    BackRight,
    BackLeft,
    Back,
}

impl CameraName {
    pub const ALL: [CameraName; 6] = [
        CameraName::Front,
        CameraName::FrontLeft,
        CameraName::FrontRight,
        CameraName::BackRight,
        CameraName::BackLeft,
        CameraName::Back,
    ];
}

/// Pinhole camera: intrinsics plus the camera-from-ego extrinsic.
///
/// Camera axes follow the usual optical convention: +z forward along the
/// optical axis, +x image-right, +y image-down.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraCalib {
    pub name: CameraName,
    pub intrinsic: [[f64; 3]; 3],
    /// Maps ego-frame points into the camera frame.
    pub extrinsic: Pose,
    /// `(width, height)` in pixels.
    pub image_size: (u32, u32),
}

impl CameraCalib {
    pub fn validate(&self) -> Result<()> {
        let k = &self.intrinsic;
        if k[0][0] <= 0.0 || k[1][1] <= 0.0 {
            return Err(Error::invalid("camera focal lengths must be positive"));
        }
        if k[1][0] != 0.0 || k[2][0] != 0.0 || k[2][1] != 0.0 {
            return Err(Error::invalid("camera intrinsic lower triangle must be zero"));
        }
        Ok(())
    }
}

/// Axis-aligned pixel rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelRect {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

/// Project an ego-frame box into a camera view.
///
/// Returns the pixel bounding rectangle (clipped to image bounds) of the
/// corners that land in front of the camera, provided at least one corner
/// projects with positive depth inside the image; `None` otherwise.
pub fn project_to_camera(b: &Box3D, calib: &CameraCalib) -> Option<PixelRect> {
    debug_assert_eq!(b.frame, Frame::Ego, "project_to_camera expects an ego-frame box");
    let k = &calib.intrinsic;
    let (w, h) = (f64::from(calib.image_size.0), f64::from(calib.image_size.1));
    let mut any_inside = false;
    let mut rect: Option<PixelRect> = None;
    for corner in b.corners() {
        let p = calib.extrinsic.apply(corner);
        if p[2] <= 1e-9 {
            continue;
        }
        let u = k[0][0] * p[0] / p[2] + k[0][1] * p[1] / p[2] + k[0][2];
        let v = k[1][1] * p[1] / p[2] + k[1][2];
        if u >= 0.0 && u <= w && v >= 0.0 && v <= h {
            any_inside = true;
        }
        rect = Some(match rect {
            None => PixelRect { x_min: u, y_min: v, x_max: u, y_max: v },
            Some(r) => PixelRect {
                x_min: r.x_min.min(u),
                y_min: r.y_min.min(v),
                x_max: r.x_max.max(u),
                y_max: r.y_max.max(v),
            },
        });
    }
    if !any_inside {
        return None;
    }
    rect.map(|r| PixelRect {
        x_min: r.x_min.max(0.0),
        y_min: r.y_min.max(0.0),
        x_max: r.x_max.min(w),
        y_max: r.y_max.min(h),
    })
}

/// Build the default six-camera rig: yaw offsets {0, +-55, +-110, 180}
/// degrees, 70 degree horizontal FOV except the back camera at 110, all at
/// 1600x900. The FOVs overlap so the rig covers the full 360 degrees.
pub fn default_rig() -> Vec<CameraCalib> {
    let spec: [(CameraName, f64, f64); 6] = [
        (CameraName::Front, 0.0, 70.0),
        (CameraName::FrontLeft, 55.0, 70.0),
        (CameraName::FrontRight, -55.0, 70.0),
        (CameraName::BackLeft, 110.0, 70.0),
        (CameraName::BackRight, -110.0, 70.0),
        (CameraName::Back, 180.0, 110.0),
    ];
    let (img_w, img_h) = (1600u32, 900u32);
    let mount_radius = 1.2;
    let mount_height = 1.6;
    spec.iter()
        .map(|&(name, yaw_deg, hfov_deg)| {
            let yaw = yaw_deg.to_radians();
            let f = f64::from(img_w) / 2.0 / (hfov_deg.to_radians() / 2.0).tan();
            let intrinsic = [
                [f, 0.0, f64::from(img_w) / 2.0],
                [0.0, f, f64::from(img_h) / 2.0],
                [0.0, 0.0, 1.0],
            ];
            // Camera axes expressed in ego coordinates (camera-to-ego
            // rotation), then inverted to get the camera-from-ego pose.
            let (c, s) = (yaw.cos(), yaw.sin());
            let cam_to_ego = [
                [s, 0.0, c],
                [-c, 0.0, s],
                [0.0, -1.0, 0.0],
            ];
            let position = [mount_radius * c, mount_radius * s, mount_height];
            let cam_pose = Pose {
                translation: position,
                rotation: Quat::from_matrix(&cam_to_ego),
            };
            CameraCalib {
                name,
                intrinsic,
                extrinsic: cam_pose.inverse(),
                image_size: (img_w, img_h),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn approx(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() < tol, "{a} != {b} (tol {tol})");
    }

    #[test]
    fn normalize_yaw_identity_and_boundary() {
        approx(normalize_yaw(0.0).unwrap(), 0.0, 1e-15);
        // 3*pi is congruent to pi, which the half-open convention maps to -pi.
        approx(normalize_yaw(3.0 * PI).unwrap(), -PI, 1e-12);
        approx(normalize_yaw(PI).unwrap(), -PI, 1e-15);
        // 7 - 2*pi, evaluated independently.
        approx(normalize_yaw(7.0).unwrap(), 0.7168146928204138, 1e-12);
        assert!(normalize_yaw(f64::NAN).is_err());
        assert!(normalize_yaw(f64::INFINITY).is_err());
    }

    #[test]
    fn box_invariants() {
        assert!(Box3D::new([0.0, 0.0, 0.0], [1.0, 2.0, 1.5], 0.0, Frame::Ego).is_ok());
        assert!(Box3D::new([0.0, 0.0, 0.0], [0.0, 2.0, 1.5], 0.0, Frame::Ego).is_err());
        assert!(Box3D::new([f64::NAN, 0.0, 0.0], [1.0, 2.0, 1.5], 0.0, Frame::Ego).is_err());
        // yaw normalized on construction
        let b = Box3D::new([0.0; 3], [1.0, 1.0, 1.0], 3.0 * PI, Frame::Ego).unwrap();
        approx(b.yaw, -PI, 1e-12);
    }

    #[test]
    fn transform_box_identity_pose() {
        let b = Box3D::new([1.0, 2.0, 0.5], [1.0, 2.0, 1.5], 0.3, Frame::Ego).unwrap();
        let t = transform_box(&b, &Pose::IDENTITY, &Pose::IDENTITY);
        approx(t.center[0], 1.0, 1e-12);
        approx(t.yaw, 0.3, 1e-12);
    }

    #[test]
    fn transform_box_pure_translation() {
        let b = Box3D::new([1.0, 0.0, 0.0], [1.0, 1.0, 1.0], 0.0, Frame::Ego).unwrap();
        let to = Pose::from_xy_yaw(0.0, 1.0, 0.0);
        let t = transform_box(&b, &Pose::IDENTITY, &to);
        approx(t.center[0], 1.0, 1e-12);
        approx(t.center[1], -1.0, 1e-12);
        approx(t.center[2], 0.0, 1e-12);
    }

    #[test]
    fn transform_box_rotated_target() {
        // Target frame rotated +90 degrees about z: the point lands at
        // (0, -1, 0) and the heading loses pi/2.
        let b = Box3D::new([1.0, 0.0, 0.0], [1.0, 1.0, 1.0], 0.0, Frame::Ego).unwrap();
        let to = Pose::from_xy_yaw(0.0, 0.0, PI / 2.0);
        let t = transform_box(&b, &Pose::IDENTITY, &to);
        approx(t.center[0], 0.0, 1e-12);
        approx(t.center[1], -1.0, 1e-12);
        approx(t.yaw, -PI / 2.0, 1e-12);
    }

    #[test]
    fn center_distance_ignores_z() {
        let a = Box3D::new([0.0, 0.0, 0.0], [1.0, 1.0, 1.0], 0.0, Frame::World).unwrap();
        let b = Box3D::new([3.0, 4.0, 9.0], [1.0, 1.0, 1.0], 0.0, Frame::World).unwrap();
        approx(center_distance(&a, &b).unwrap(), 5.0, 1e-12);
        approx(center_distance(&a, &a).unwrap(), 0.0, 1e-15);
        let e = Box3D::new([0.0, 0.0, 0.0], [1.0, 1.0, 1.0], 0.0, Frame::Ego).unwrap();
        assert!(center_distance(&a, &e).is_err());
    }

    #[test]
    fn projection_front_and_behind() {
        let rig = default_rig();
        let front = rig.iter().find(|c| c.name == CameraName::Front).unwrap();
        front.validate().unwrap();

        let ahead = Box3D::new([10.0, 0.0, 0.5], [2.0, 4.0, 1.5], 0.0, Frame::Ego).unwrap();
        assert!(project_to_camera(&ahead, front).is_some());

        let behind = Box3D::new([-10.0, 0.0, 0.5], [2.0, 4.0, 1.5], 0.0, Frame::Ego).unwrap();
        assert!(project_to_camera(&behind, front).is_none());
    }

    #[test]
    fn projection_left_box_in_left_camera_only() {
        let rig = default_rig();
        let front = rig.iter().find(|c| c.name == CameraName::Front).unwrap();
        let left_cams: Vec<_> = rig
            .iter()
            .filter(|c| matches!(c.name, CameraName::FrontLeft | CameraName::BackLeft))
            .collect();
        // Box at azimuth 90 degrees left of the ego.
        let b = Box3D::new([0.0, 15.0, 0.5], [2.0, 4.0, 1.5], 0.0, Frame::Ego).unwrap();
        assert!(project_to_camera(&b, front).is_none());
        assert!(left_cams.iter().any(|c| project_to_camera(&b, c).is_some()));
    }

    #[test]
    fn rig_covers_all_azimuths() {
        let rig = default_rig();
        for c in &rig {
            c.validate().unwrap();
        }
        for i in 0..360 {
            let az = f64::from(i).to_radians();
            let b = Box3D::new(
                [15.0 * az.cos(), 15.0 * az.sin(), 0.75],
                [1.5, 3.0, 1.5],
                az,
                Frame::Ego,
            )
            .unwrap();
            assert!(
                rig.iter().any(|c| project_to_camera(&b, c).is_some()),
                "azimuth {i} deg not covered by any camera"
            );
        }
    }

    #[test]
    fn pose_roundtrip() {
        let p = Pose::from_xy_yaw(3.0, -2.0, 1.1);
        let pt = [5.0, 4.0, 1.0];
        let back = p.apply_inv(p.apply(pt));
        for k in 0..3 {
            approx(back[k], pt[k], 1e-12);
        }
        let inv = p.inverse();
        let via_inv = inv.apply(p.apply(pt));
        for k in 0..3 {
            approx(via_inv[k], pt[k], 1e-12);
        }
    }

    #[test]
    fn quat_from_matrix_roundtrip() {
        let q = Quat::from_yaw(0.7);
        let m = [
            [0.7f64.cos(), -(0.7f64.sin()), 0.0],
            [0.7f64.sin(), 0.7f64.cos(), 0.0],
            [0.0, 0.0, 1.0],
        ];
        let q2 = Quat::from_matrix(&m);
        let v = [1.0, 2.0, 3.0];
        let a = q.rotate(v);
        let b = q2.rotate(v);
        for k in 0..3 {
            approx(a[k], b[k], 1e-12);
        }
    }
}
