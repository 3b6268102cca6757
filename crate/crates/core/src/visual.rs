//! Visual features: CIELab region colors, region areas and left/right color
//! differences.
//!
//! Colors arrive as region-averaged sRGB from the tracker and are converted
//! to CIELab (D65, 2° observer). Differences are taken on the 8-bit Lab
//! encoding `(L·255/100, a+128, b+128)` so that dividing by 256 lands them
//! in `[0, 1)`.

use crate::trackio::TrackRecord;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum VisualError {
    #[error("sRGB channel {0} outside [0, 255]")]
    OutOfRangeChannel(f64),
    #[error("record is not valid")]
    InvalidRecord,
}

/// sRGB (linear) to XYZ, D65.
const RGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
];

fn xyz_to_rgb() -> [[f64; 3]; 3] {
    let m = nalgebra::Matrix3::from_fn(|r, c| RGB_TO_XYZ[r][c]);
    let inv = m.try_inverse().expect("sRGB matrix is invertible");
    [0, 1, 2].map(|r| [inv[(r, 0)], inv[(r, 1)], inv[(r, 2)]])
}

/// D65 reference white, taken as the XYZ image of linear (1, 1, 1) so that
/// sRGB white maps to a = b = 0.
fn white() -> [f64; 3] {
    RGB_TO_XYZ.map(|row| row.iter().sum())
}

const EPSILON: f64 = 216.0 / 24389.0;
const KAPPA: f64 = 24389.0 / 27.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LabColor {
    pub l: f64,
    pub a: f64,
    pub b: f64,
}

impl LabColor {
    /// 8-bit encoding `(L·255/100, a+128, b+128)`.
    pub fn encode8(&self) -> [f64; 3] {
        [self.l * 255.0 / 100.0, self.a + 128.0, self.b + 128.0]
    }

    pub fn decode8(v: [f64; 3]) -> LabColor {
        LabColor {
            l: v[0] * 100.0 / 255.0,
            a: v[1] - 128.0,
            b: v[2] - 128.0,
        }
    }
}

fn srgb_to_linear(c: f64) -> f64 {
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn linear_to_srgb(c: f64) -> f64 {
    if c <= 0.0031308 {
        12.92 * c
    } else {
        1.055 * c.powf(1.0 / 2.4) - 0.055
    }
}

fn lab_f(t: f64) -> f64 {
    if t > EPSILON {
        t.cbrt()
    } else {
        (KAPPA * t + 16.0) / 116.0
    }
}

fn lab_f_inv(f: f64) -> f64 {
    let t = f * f * f;
    if t > EPSILON {
        t
    } else {
        (116.0 * f - 16.0) / KAPPA
    }
}

fn mat_mul(m: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    m.map(|row| row[0] * v[0] + row[1] * v[1] + row[2] * v[2])
}

pub fn srgb_to_lab(rgb: [f64; 3]) -> Result<LabColor, VisualError> {
    for &c in &rgb {
        if !(0.0..=255.0).contains(&c) {
            return Err(VisualError::OutOfRangeChannel(c));
        }
    }
    let linear = rgb.map(|c| srgb_to_linear(c / 255.0));
    let xyz = mat_mul(&RGB_TO_XYZ, linear);
    let w = white();
    let f = [lab_f(xyz[0] / w[0]), lab_f(xyz[1] / w[1]), lab_f(xyz[2] / w[2])];
    Ok(LabColor {
        l: 116.0 * f[1] - 16.0,
        a: 500.0 * (f[0] - f[1]),
        b: 200.0 * (f[1] - f[2]),
    })
}

/// Inverse of [`srgb_to_lab`]; out-of-gamut results are clamped to [0, 255].
pub fn lab_to_srgb(lab: LabColor) -> [f64; 3] {
    let fy = (lab.l + 16.0) / 116.0;
    let fx = fy + lab.a / 500.0;
    let fz = fy - lab.b / 200.0;
    let w = white();
    let xyz = [lab_f_inv(fx) * w[0], lab_f_inv(fy) * w[1], lab_f_inv(fz) * w[2]];
    mat_mul(&xyz_to_rgb(), xyz).map(|c| (linear_to_srgb(c) * 255.0).clamp(0.0, 255.0))
}

/// Per-frame visual features.
#[derive(Clone, Debug, PartialEq)]
pub struct VisualFrame {
    pub iris_color_l: LabColor,
    pub iris_color_r: LabColor,
    pub pupil_color_l: LabColor,
    pub pupil_color_r: LabColor,
    pub area_eye_l: f64,
    pub area_eye_r: f64,
    pub area_iris_l: f64,
    pub area_iris_r: f64,
    pub area_pupil_l: f64,
    pub area_pupil_r: f64,
    /// Channel-wise `|C_I^l − C_I^r|` on the 8-bit Lab encoding.
    pub iris_color_diff: [f64; 3],
    pub pupil_color_diff: [f64; 3],
}

fn abs_diff8(a: &LabColor, b: &LabColor) -> [f64; 3] {
    let (ea, eb) = (a.encode8(), b.encode8());
    [(ea[0] - eb[0]).abs(), (ea[1] - eb[1]).abs(), (ea[2] - eb[2]).abs()]
}

pub fn visual_frame(rec: &TrackRecord) -> Result<VisualFrame, VisualError> {
    if !rec.valid() {
        return Err(VisualError::InvalidRecord);
    }
    let (l, r) = (&rec.left, &rec.right);
    let iris_color_l = srgb_to_lab(l.iris_rgb)?;
    let iris_color_r = srgb_to_lab(r.iris_rgb)?;
    let pupil_color_l = srgb_to_lab(l.pupil_rgb)?;
    let pupil_color_r = srgb_to_lab(r.pupil_rgb)?;
    Ok(VisualFrame {
        iris_color_diff: abs_diff8(&iris_color_l, &iris_color_r),
        pupil_color_diff: abs_diff8(&pupil_color_l, &pupil_color_r),
        iris_color_l,
        iris_color_r,
        pupil_color_l,
        pupil_color_r,
        area_eye_l: l.eye_area,
        area_eye_r: r.eye_area,
        area_iris_l: l.iris_area,
        area_iris_r: r.iris_area,
        area_pupil_l: l.pupil_area,
        area_pupil_r: r.pupil_area,
    })
}

impl VisualFrame {
    /// The same features with left and right exchanged.
    pub fn swap_lr(&self) -> VisualFrame {
        VisualFrame {
            iris_color_l: self.iris_color_r,
            iris_color_r: self.iris_color_l,
            pupil_color_l: self.pupil_color_r,
            pupil_color_r: self.pupil_color_l,
            area_eye_l: self.area_eye_r,
            area_eye_r: self.area_eye_l,
            area_iris_l: self.area_iris_r,
            area_iris_r: self.area_iris_l,
            area_pupil_l: self.area_pupil_r,
            area_pupil_r: self.area_pupil_l,
            iris_color_diff: self.iris_color_diff,
            pupil_color_diff: self.pupil_color_diff,
        }
    }
}
