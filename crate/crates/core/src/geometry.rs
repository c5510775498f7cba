//! Flat-ground pinhole geometry.
//!
//! Camera frame follows the KITTI convention: x right, y down, z forward.
//! Objects only rotate about the vertical axis (yaw); pitch and roll are
//! fixed at zero and have no representation here.
//!
//! Dimension axes: a box's `length` runs along the object-frame x axis, its
//! `height` along y (downwards from the bottom face) and its `width` along z.

use std::f64::consts::{PI, TAU};

use thiserror::Error;

use crate::kitti::{BBox2D, CameraIntrinsics, Dims};

/// Points closer than this to the camera plane count as behind the camera.
pub const NEAR_PLANE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("point is behind the camera plane (z = {z})")]
    BehindCamera { z: f64 },
    #[error("degenerate rectangle {width}x{height}")]
    Degenerate { width: f64, height: f64 },
    #[error("invalid target side {0}")]
    InvalidTarget(u32),
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(theta: f64) -> f64 {
    if theta > -PI && theta <= PI {
        return theta;
    }
    let r = theta.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Yaw plus camera-frame translation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub yaw: f64,
    pub translation: [f64; 3],
}

impl Pose {
    pub fn new(yaw: f64, translation: [f64; 3]) -> Self {
        Self {
            yaw: wrap_angle(yaw),
            translation,
        }
    }

    /// Rotates an object-frame point about the vertical axis, then translates.
    pub fn transform(&self, p: [f64; 3]) -> [f64; 3] {
        let (s, c) = self.yaw.sin_cos();
        let [tx, ty, tz] = self.translation;
        [
            c * p[0] + s * p[2] + tx,
            p[1] + ty,
            -s * p[0] + c * p[2] + tz,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Box3D {
    pub dims: Dims,
    pub pose: Pose,
}

impl Box3D {
    pub fn new(dims: Dims, pose: Pose) -> Self {
        Self { dims, pose }
    }
}

/// Projects a camera-frame point through the intrinsics.
pub fn project_camera_point(p: [f64; 3], k: &CameraIntrinsics) -> Result<[f64; 2], GeometryError> {
    if p[2] <= NEAR_PLANE {
        return Err(GeometryError::BehindCamera { z: p[2] });
    }
    let m = &k.full_p;
    let x = m[0][0] * p[0] + m[0][1] * p[1] + m[0][2] * p[2] + m[0][3];
    let y = m[1][0] * p[0] + m[1][1] * p[1] + m[1][2] * p[2] + m[1][3];
    let w = m[2][0] * p[0] + m[2][1] * p[1] + m[2][2] * p[2] + m[2][3];
    if w <= NEAR_PLANE {
        return Err(GeometryError::BehindCamera { z: w });
    }
    Ok([x / w, y / w])
}

/// `x = K [R T] X_o`, with the homogeneous divide.
pub fn project_point(
    p_object: [f64; 3],
    pose: &Pose,
    k: &CameraIntrinsics,
) -> Result<[f64; 2], GeometryError> {
    project_camera_point(pose.transform(p_object), k)
}

/// The eight cuboid corners in the camera frame.
///
/// The object-frame origin is the bottom-face center. Corners 0..4 lie on the
/// bottom face (y = 0), 4..8 on the top face (y = -height).
pub fn box_corners(b: &Box3D) -> [[f64; 3]; 8] {
    let hl = b.dims.length / 2.0;
    let hw = b.dims.width / 2.0;
    let h = b.dims.height;
    let local = [
        [hl, 0.0, hw],
        [hl, 0.0, -hw],
        [-hl, 0.0, -hw],
        [-hl, 0.0, hw],
        [hl, -h, hw],
        [hl, -h, -hw],
        [-hl, -h, -hw],
        [-hl, -h, hw],
    ];
    local.map(|p| b.pose.transform(p))
}

/// Result of projecting a box: the clipped rectangle plus visibility flags.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectedBox {
    pub rect: BBox2D,
    /// The unclipped projection extended past the image border.
    pub clipped: bool,
    /// Nothing of the box is left inside the image after clipping.
    pub degenerate: bool,
}

pub fn projected_bbox(
    b: &Box3D,
    k: &CameraIntrinsics,
    image_size: (u32, u32),
) -> Result<ProjectedBox, GeometryError> {
    let (w, h) = (image_size.0 as f64, image_size.1 as f64);
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for c in box_corners(b) {
        let uv = project_camera_point(c, k)?;
        for a in 0..2 {
            lo[a] = lo[a].min(uv[a]);
            hi[a] = hi[a].max(uv[a]);
        }
    }
    let clipped = lo[0] < 0.0 || lo[1] < 0.0 || hi[0] > w || hi[1] > h;
    let rect = BBox2D {
        left: lo[0].clamp(0.0, w),
        top: lo[1].clamp(0.0, h),
        right: hi[0].clamp(0.0, w),
        bottom: hi[1].clamp(0.0, h),
    };
    let degenerate = rect.width() <= 0.0 || rect.height() <= 0.0;
    Ok(ProjectedBox {
        rect,
        clipped,
        degenerate,
    })
}

/// Ray direction about the vertical axis through image column `u_center`.
pub fn ray_angle_from_pixel(u_center: f64, k: &CameraIntrinsics) -> f64 {
    wrap_angle((u_center - k.cu).atan2(k.fu))
}

/// Ray direction through a camera-frame location.
pub fn ray_angle_from_location(location: [f64; 3]) -> Result<f64, GeometryError> {
    if location[2] <= 0.0 {
        return Err(GeometryError::BehindCamera { z: location[2] });
    }
    Ok(location[0].atan2(location[2]))
}

/// Global yaw from the local (observation) angle and the ray angle.
pub fn local_to_global(theta_l: f64, theta_ray: f64) -> f64 {
    wrap_angle(theta_l + theta_ray)
}

pub fn global_to_local(theta: f64, theta_ray: f64) -> f64 {
    wrap_angle(theta - theta_ray)
}

/// Isotropic resize of a crop into an `S x S` square with centered padding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CropTransform {
    pub scale: f64,
    /// Leading-edge padding in target pixels.
    pub pad: (u32, u32),
    pub source_rect: BBox2D,
    pub target_size: u32,
}

impl CropTransform {
    pub fn forward(&self, u: f64, v: f64) -> (f64, f64) {
        (
            (u - self.source_rect.left) * self.scale + self.pad.0 as f64,
            (v - self.source_rect.top) * self.scale + self.pad.1 as f64,
        )
    }

    pub fn inverse(&self, x: f64, y: f64) -> (f64, f64) {
        (
            (x - self.pad.0 as f64) / self.scale + self.source_rect.left,
            (y - self.pad.1 as f64) / self.scale + self.source_rect.top,
        )
    }

    /// Where the source rectangle lands inside the target square.
    pub fn mapped_rect(&self) -> BBox2D {
        let (l, t) = self.forward(self.source_rect.left, self.source_rect.top);
        let (r, b) = self.forward(self.source_rect.right, self.source_rect.bottom);
        BBox2D {
            left: l,
            top: t,
            right: r,
            bottom: b,
        }
    }
}

pub fn crop_transform(bbox: &BBox2D, target_side: u32) -> Result<CropTransform, GeometryError> {
    if target_side == 0 {
        return Err(GeometryError::InvalidTarget(target_side));
    }
    let (w, h) = (bbox.width(), bbox.height());
    if !(w > 0.0 && h > 0.0) || !w.is_finite() || !h.is_finite() {
        return Err(GeometryError::Degenerate {
            width: w,
            height: h,
        });
    }
    let side = target_side as f64;
    let scale = side / w.max(h);
    let pad_for = |extent: f64| -> u32 {
        let mapped = extent * scale;
        let total = target_side - (mapped.round().min(side) as u32);
        // odd remainder: the extra pixel goes to the leading edge, unless
        // that would push the mapped crop past the far edge
        (total - total / 2).min((side - mapped).floor() as u32)
    };
    let pad = if w >= h {
        (0, if w == h { 0 } else { pad_for(h) })
    } else {
        (pad_for(w), 0)
    };
    Ok(CropTransform {
        scale,
        pad,
        source_rect: *bbox,
        target_size: target_side,
    })
}
