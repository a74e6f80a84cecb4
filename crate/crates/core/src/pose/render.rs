use image::{Rgba, RgbaImage};

use super::{Joint, PoseError, PoseSkeleton};

/// Limb segments drawn for a stick figure (OpenPose COCO limb order).
pub const BONES: [(Joint, Joint); 17] = [
    (Joint::Neck, Joint::RightShoulder),
    (Joint::Neck, Joint::LeftShoulder),
    (Joint::RightShoulder, Joint::RightElbow),
    (Joint::RightElbow, Joint::RightWrist),
    (Joint::LeftShoulder, Joint::LeftElbow),
    (Joint::LeftElbow, Joint::LeftWrist),
    (Joint::Neck, Joint::RightHip),
    (Joint::RightHip, Joint::RightKnee),
    (Joint::RightKnee, Joint::RightAnkle),
    (Joint::Neck, Joint::LeftHip),
    (Joint::LeftHip, Joint::LeftKnee),
    (Joint::LeftKnee, Joint::LeftAnkle),
    (Joint::Neck, Joint::Nose),
    (Joint::Nose, Joint::RightEye),
    (Joint::RightEye, Joint::RightEar),
    (Joint::Nose, Joint::LeftEye),
    (Joint::LeftEye, Joint::LeftEar),
];

/// Stroke colors, cycled by person index.
pub const PERSON_COLORS: [[u8; 4]; 6] = [
    [255, 64, 64, 255],
    [64, 160, 255, 255],
    [64, 220, 96, 255],
    [255, 200, 32, 255],
    [200, 96, 255, 255],
    [32, 224, 224, 255],
];

/// Half the stroke width in pixels for a raster of the given size.
pub fn stroke_half_width(width: u32, height: u32) -> f64 {
    (f64::from(width.min(height)) / 128.0).max(1.0)
}

/// Renders the skeleton as a stick figure on a transparent background.
///
/// A pixel is stroked when its center lies within [`stroke_half_width`] of a
/// bone. Bones with a missing endpoint are skipped. Later persons paint over
/// earlier ones.
pub fn render_skeleton(skel: &PoseSkeleton, width: u32, height: u32) -> Result<RgbaImage, PoseError> {
    if width == 0 || height == 0 {
        return Err(PoseError::InvalidSize { width, height });
    }
    let mut img = RgbaImage::new(width, height);
    let radius = stroke_half_width(width, height);
    let (w, h) = (f64::from(width), f64::from(height));

    for (i, person) in skel.persons().iter().enumerate() {
        let color = Rgba(PERSON_COLORS[i % PERSON_COLORS.len()]);
        for (a, b) in BONES {
            let (Some(pa), Some(pb)) = (person.joint(a), person.joint(b)) else {
                continue;
            };
            let start = (pa.x * w, pa.y * h);
            let end = (pb.x * w, pb.y * h);
            stroke_segment(&mut img, start, end, radius, color);
        }
    }
    Ok(img)
}

fn stroke_segment(img: &mut RgbaImage, a: (f64, f64), b: (f64, f64), radius: f64, color: Rgba<u8>) {
    let (w, h) = img.dimensions();
    let min_x = (a.0.min(b.0) - radius).floor().max(0.0) as u32;
    let min_y = (a.1.min(b.1) - radius).floor().max(0.0) as u32;
    let max_x = ((a.0.max(b.0) + radius).ceil().max(0.0) as u32).min(w);
    let max_y = ((a.1.max(b.1) + radius).ceil().max(0.0) as u32).min(h);
    let r2 = radius * radius;

    for py in min_y..max_y {
        for px in min_x..max_x {
            let p = (f64::from(px) + 0.5, f64::from(py) + 0.5);
            if dist2_to_segment(p, a, b) <= r2 {
                img.put_pixel(px, py, color);
            }
        }
    }
}

fn dist2_to_segment(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    let (cx, cy) = (a.0 + t * dx, a.1 + t * dy);
    (p.0 - cx).powi(2) + (p.1 - cy).powi(2)
}
