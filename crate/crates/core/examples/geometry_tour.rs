//! Projection, box corners, ray angles and the padded crop.

use monolite::geometry::{
    crop_transform, local_to_global, project_point, projected_bbox, ray_angle_from_location,
    ray_angle_from_pixel, Box3D, Pose,
};
use monolite::kitti::{CameraIntrinsics, Dims};

fn main() {
    let k = CameraIntrinsics::from_focal(721.5377, 721.5377, 609.5593, 172.854);
    let pose = Pose::new(0.6, [4.0, 1.65, 20.0]);
    let uv = project_point([0.0, 0.0, 0.0], &pose, &k).unwrap();
    println!("box origin projects to ({:.1}, {:.1})", uv[0], uv[1]);

    let b = Box3D::new(Dims::new(1.5, 1.6, 3.9), pose);
    let p = projected_bbox(&b, &k, (1242, 375)).unwrap();
    let r = p.rect;
    println!(
        "2D box ({:.1}, {:.1})-({:.1}, {:.1}), clipped={}",
        r.left, r.top, r.right, r.bottom, p.clipped
    );

    let from_loc = ray_angle_from_location(pose.translation).unwrap();
    let from_px = ray_angle_from_pixel(r.center().0, &k);
    println!("ray angle: from location {from_loc:.4}, from box center {from_px:.4}");
    let theta_l = 0.25;
    println!(
        "theta_l {theta_l} + ray -> yaw {:.4}",
        local_to_global(theta_l, from_px)
    );

    let c = crop_transform(&r, 224).unwrap();
    println!("crop scale {:.4}, pad {:?}", c.scale, c.pad);
}
