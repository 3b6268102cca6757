//! Geometric gaze and eye features: vergence point of the two gaze rays,
//! inter-eye distances and left/right area differences.

use nalgebra::Vector3;

use crate::trackio::TrackRecord;

/// Rays whose directions satisfy `|1 - (g_l·g_r)²|` below this are treated
/// as parallel.
pub const PARALLEL_THRESHOLD: f64 = 1e-8;

/// Direction vectors may deviate from unit length by at most this much.
pub const DIRECTION_NORM_LIMIT: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("gaze direction has norm {0}, expected unit length")]
    NonUnitDirection(f64),
    #[error("record is not valid")]
    InvalidRecord,
}

/// Least-squares meeting point of the left and right gaze rays.
#[derive(Clone, Debug, PartialEq)]
pub struct VergenceSolution {
    /// Midpoint of the two closest points.
    pub rho: Vector3<f64>,
    /// Right closest point minus left closest point.
    pub rho_gap: Vector3<f64>,
    /// `‖rho_gap‖`.
    pub rho_hat: f64,
    /// Minimized squared distance between the rays.
    pub delta_rho: f64,
    pub t_left: f64,
    pub t_right: f64,
    pub degenerate: bool,
}

impl VergenceSolution {
    /// Both closest points lie ahead of the pupils along their gaze rays.
    pub fn in_front(&self) -> bool {
        self.t_left > 0.0 && self.t_right > 0.0
    }
}

fn unit(g: &Vector3<f64>) -> Result<Vector3<f64>, GeometryError> {
    let n = g.norm();
    if !n.is_finite() || (n - 1.0).abs() > DIRECTION_NORM_LIMIT {
        return Err(GeometryError::NonUnitDirection(n));
    }
    Ok(g / n)
}

/// Closest-approach solve for the rays `p_l + t_l g_l` and `p_r + t_r g_r`.
///
/// The two-parameter least squares is solved in closed form through its
/// normal equations. Ray parameters are unconstrained, so the solution may
/// lie behind the pupils; [`VergenceSolution::in_front`] reports that.
pub fn intersect_gaze_rays(
    p_left: &Vector3<f64>,
    g_left: &Vector3<f64>,
    p_right: &Vector3<f64>,
    g_right: &Vector3<f64>,
) -> Result<VergenceSolution, GeometryError> {
    let gl = unit(g_left)?;
    let gr = unit(g_right)?;

    let w0 = p_left - p_right;
    let a = gl.dot(&gl);
    let b = gl.dot(&gr);
    let c = gr.dot(&gr);
    let d = gl.dot(&w0);
    let e = gr.dot(&w0);

    let degenerate = (1.0 - b * b).abs() < PARALLEL_THRESHOLD;
    let (t_left, t_right) = if degenerate {
        (0.0, 0.0)
    } else {
        let denom = a * c - b * b;
        ((b * e - c * d) / denom, (a * e - b * d) / denom)
    };

    let q_left = p_left + gl * t_left;
    let q_right = p_right + gr * t_right;
    let rho = (q_left + q_right) * 0.5;
    let rho_gap = q_right - q_left;
    let rho_hat = rho_gap.norm();
    Ok(VergenceSolution {
        rho,
        rho_gap,
        rho_hat,
        delta_rho: rho_gap.norm_squared(),
        t_left,
        t_right,
        degenerate,
    })
}

/// Per-frame geometric features.
#[derive(Clone, Debug, PartialEq)]
pub struct GeoFrame {
    pub gaze_left: Vector3<f64>,
    pub gaze_right: Vector3<f64>,
    pub vergence: VergenceSolution,
    /// Distance between the eye-region centroids.
    pub eye_dist: f64,
    /// Distance between the pupil centers.
    pub pupil_dist: f64,
    pub area_diff_eye: f64,
    pub area_diff_iris: f64,
    pub area_diff_pupil: f64,
}

pub fn geo_frame(rec: &TrackRecord) -> Result<GeoFrame, GeometryError> {
    if !rec.valid() {
        return Err(GeometryError::InvalidRecord);
    }
    let (l, r) = (&rec.left, &rec.right);
    let vergence = intersect_gaze_rays(&l.pupil_center, &l.gaze_dir, &r.pupil_center, &r.gaze_dir)?;
    Ok(GeoFrame {
        gaze_left: l.gaze_dir,
        gaze_right: r.gaze_dir,
        vergence,
        eye_dist: (l.eye_center - r.eye_center).norm(),
        pupil_dist: (l.pupil_center - r.pupil_center).norm(),
        area_diff_eye: (l.eye_area - r.eye_area).abs(),
        area_diff_iris: (l.iris_area - r.iris_area).abs(),
        area_diff_pupil: (l.pupil_area - r.pupil_area).abs(),
    })
}
