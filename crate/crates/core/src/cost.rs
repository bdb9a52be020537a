//! Hierarchical candidate scoring: pixel distance to the goal image,
//! box-level attraction/repulsion over tracked boxes, and the switcher
//! blend that combines them.
//!
//! The two sub-costs live on wildly different scales, so each vector is
//! min-max normalized across the candidate set before blending; a
//! constant vector normalizes to all zeros.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::predictor::PredictedVideo;
use crate::types::{Frame, FrameError};
use crate::vlm::{SceneUnderstanding, SwitchWeight};

#[derive(Debug, Error)]
pub enum CostError {
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error("cost vectors differ in length: {pixel} vs {vlm}")]
    LengthMismatch { pixel: usize, vlm: usize },
    #[error("cannot select from an empty candidate set")]
    Empty,
}

/// Per-candidate audit record: raw sub-costs, their per-frame traces, the
/// switch weight, and the blended total used for selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub candidate_id: usize,
    pub c_pixel: f64,
    pub c_vlm: f64,
    #[serde(rename = "w_D")]
    pub w_d: f64,
    pub c_total: f64,
    pub pixel_trace: Vec<f64>,
    pub vlm_trace: Vec<f64>,
}

/// A sub-cost total plus its per-frame breakdown.
#[derive(Debug, Clone, PartialEq)]
pub struct CostTrace {
    pub total: f64,
    pub per_frame: Vec<f64>,
}

/// Sum over the video of the Euclidean pixel distance to the goal image,
/// intensities scaled to [0, 1] before differencing.
pub fn pixel_cost(video: &PredictedVideo, goal: &Frame) -> Result<CostTrace, CostError> {
    let mut per_frame = Vec::with_capacity(video.frames.len());
    for frame in &video.frames {
        per_frame.push(frame.l2_distance(goal)?);
    }
    Ok(CostTrace { total: per_frame.iter().sum(), per_frame })
}

/// Sum over tracked frames of (distance from the end-effector center to
/// the sub-goal center) minus (distance to the nearest interference
/// center); the repulsion term contributes zero when nothing interferes.
pub fn vlm_cost(tracked: &[SceneUnderstanding]) -> CostTrace {
    let per_frame: Vec<f64> = tracked
        .iter()
        .map(|su| {
            let (ex, ey) = su.e.center();
            let (sx, sy) = su.s.center();
            let attraction = ((ex - sx).powi(2) + (ey - sy).powi(2)).sqrt();
            let repulsion = su
                .interference
                .iter()
                .map(|b| {
                    let (ix, iy) = b.center();
                    ((ex - ix).powi(2) + (ey - iy).powi(2)).sqrt()
                })
                .min_by(f64::total_cmp)
                .unwrap_or(0.0);
            attraction - repulsion
        })
        .collect();
    CostTrace { total: per_frame.iter().sum(), per_frame }
}

/// Min-max normalization across candidates; a constant vector maps to all
/// zeros so it cannot dominate the blend.
pub fn min_max_normalize(xs: &[f64]) -> Vec<f64> {
    let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = max - min;
    if !(range > 0.0) {
        return vec![0.0; xs.len()];
    }
    xs.iter().map(|x| (x - min) / range).collect()
}

/// Blends the two sub-cost vectors under the switch weight into one
/// report per candidate (ids are positions in the input vectors). Traces
/// start empty; callers that have them attach them afterwards.
pub fn combine(
    c_pixel: &[f64],
    c_vlm: &[f64],
    w: SwitchWeight,
) -> Result<Vec<CostReport>, CostError> {
    if c_pixel.len() != c_vlm.len() {
        return Err(CostError::LengthMismatch { pixel: c_pixel.len(), vlm: c_vlm.len() });
    }
    let w_d = w.value();
    let np = min_max_normalize(c_pixel);
    let nv = min_max_normalize(c_vlm);
    Ok((0..c_pixel.len())
        .map(|i| CostReport {
            candidate_id: i,
            c_pixel: c_pixel[i],
            c_vlm: c_vlm[i],
            w_d,
            c_total: w_d * np[i] + (1.0 - w_d) * nv[i],
            pixel_trace: Vec::new(),
            vlm_trace: Vec::new(),
        })
        .collect())
}

/// Argmin of the blended totals; ties break toward the smallest
/// candidate id, so selection is reproducible.
pub fn select_best(reports: &[CostReport]) -> Result<usize, CostError> {
    reports
        .iter()
        .min_by(|a, b| {
            a.c_total
                .total_cmp(&b.c_total)
                .then(a.candidate_id.cmp(&b.candidate_id))
        })
        .map(|r| r.candidate_id)
        .ok_or(CostError::Empty)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Box2D, BoxLabel};

    fn video_of(frames: Vec<Frame>) -> PredictedVideo {
        PredictedVideo { candidate_id: 0, frames }
    }

    fn su(e: (f64, f64), s: (f64, f64), interference: &[(f64, f64)]) -> SceneUnderstanding {
        SceneUnderstanding {
            e: Box2D::new(e.0, e.1, 4.0, 4.0, BoxLabel::EndEffector),
            s: Box2D::new(s.0, s.1, 4.0, 4.0, BoxLabel::SubGoal),
            interference: interference
                .iter()
                .map(|&(x, y)| Box2D::new(x, y, 4.0, 4.0, BoxLabel::Interference))
                .collect(),
        }
    }

    #[test]
    fn pixel_cost_zero_on_identity() {
        let goal = Frame::filled(8, 8, 0, [100, 120, 140]);
        let video = video_of(vec![goal.clone(), goal.clone(), goal.clone()]);
        let c = pixel_cost(&video, &goal).unwrap();
        assert_eq!(c.total, 0.0);
        assert_eq!(c.per_frame, vec![0.0; 3]);
    }

    #[test]
    fn pixel_cost_unit_vector() {
        // Single channel differs by 255: distance exactly 1.
        let goal = Frame::filled(2, 1, 0, [0, 0, 0]);
        let mut frame = goal.clone();
        frame.set(0, 0, [255, 0, 0]);
        let c = pixel_cost(&video_of(vec![frame]), &goal).unwrap();
        assert!((c.total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pixel_cost_sums_over_frames() {
        let goal = Frame::filled(2, 1, 0, [0, 0, 0]);
        let mut frame = goal.clone();
        frame.set(0, 0, [255, 0, 0]);
        let t = 5;
        let c = pixel_cost(&video_of(vec![frame; t]), &goal).unwrap();
        assert!((c.total - t as f64).abs() < 1e-12);
    }

    #[test]
    fn pixel_cost_dimension_mismatch() {
        let goal = Frame::filled(4, 4, 0, [0, 0, 0]);
        let video = video_of(vec![Frame::filled(8, 8, 0, [0, 0, 0])]);
        assert!(matches!(pixel_cost(&video, &goal), Err(CostError::Frame(_))));
    }

    #[test]
    fn vlm_cost_hand_case() {
        // 3-4-5 attraction, 6-8-10 repulsion: 5 - 10 = -5.
        let c = vlm_cost(&[su((0.0, 0.0), (3.0, 4.0), &[(6.0, 8.0)])]);
        assert_eq!(c.total, -5.0);
    }

    #[test]
    fn vlm_cost_no_interference_at_goal() {
        let c = vlm_cost(&[su((5.0, 5.0), (5.0, 5.0), &[])]);
        assert_eq!(c.total, 0.0);
    }

    #[test]
    fn vlm_cost_uses_nearest_interference() {
        // interference at distances 10 and 4: repulsion takes 4
        let c = vlm_cost(&[su((0.0, 0.0), (3.0, 4.0), &[(6.0, 8.0), (0.0, 4.0)])]);
        assert_eq!(c.total, 5.0 - 4.0);
    }

    #[test]
    fn vlm_cost_attraction_and_repulsion_monotonicity() {
        let base = vlm_cost(&[su((0.0, 0.0), (10.0, 0.0), &[(0.0, 10.0)])]).total;
        let closer_goal = vlm_cost(&[su((2.0, 0.0), (10.0, 0.0), &[(2.0, 10.0)])]).total;
        assert!(closer_goal < base);
        let farther_obstacle = vlm_cost(&[su((0.0, -3.0), (10.0, -3.0), &[(0.0, 10.0)])]).total;
        assert!(farther_obstacle < base);
    }

    #[test]
    fn combine_degenerate_weights_preserve_ranking() {
        let c_pixel = vec![3.0, 1.0, 2.0];
        let c_vlm = vec![-1.0, 5.0, 0.0];
        let pd = combine(&c_pixel, &c_vlm, SwitchWeight::PixelOnly).unwrap();
        assert_eq!(select_best(&pd).unwrap(), 1);
        let vs = combine(&c_pixel, &c_vlm, SwitchWeight::VlmOnly).unwrap();
        assert_eq!(select_best(&vs).unwrap(), 0);
    }

    #[test]
    fn combine_hand_normalization_case() {
        // pixel (10,20) -> (0,1); vlm (5,-5) -> (1,0); totals (0.5, 0.5);
        // the tie breaks to candidate 0.
        let reports = combine(&[10.0, 20.0], &[5.0, -5.0], SwitchWeight::Both).unwrap();
        assert!((reports[0].c_total - 0.5).abs() < 1e-12);
        assert!((reports[1].c_total - 0.5).abs() < 1e-12);
        assert_eq!(select_best(&reports).unwrap(), 0);
    }

    #[test]
    fn combine_constant_vector_normalizes_to_zero() {
        let reports = combine(&[7.0, 7.0], &[1.0, 2.0], SwitchWeight::Both).unwrap();
        assert_eq!(reports[0].c_total, 0.0);
        assert!((reports[1].c_total - 0.5).abs() < 1e-12);
    }

    #[test]
    fn combine_length_mismatch() {
        assert!(matches!(
            combine(&[1.0], &[1.0, 2.0], SwitchWeight::Both),
            Err(CostError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn select_best_argmin_and_ties() {
        let mk = |totals: &[f64]| -> Vec<CostReport> {
            totals
                .iter()
                .enumerate()
                .map(|(i, &t)| CostReport {
                    candidate_id: i,
                    c_pixel: 0.0,
                    c_vlm: 0.0,
                    w_d: 0.5,
                    c_total: t,
                    pixel_trace: vec![],
                    vlm_trace: vec![],
                })
                .collect()
        };
        assert_eq!(select_best(&mk(&[3.0, 1.0, 2.0])).unwrap(), 1);
        assert_eq!(select_best(&mk(&[2.0, 2.0, 2.0])).unwrap(), 0);
        assert_eq!(select_best(&mk(&[4.0])).unwrap(), 0);
        assert!(matches!(select_best(&[]), Err(CostError::Empty)));
    }
}
