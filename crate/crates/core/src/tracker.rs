//! Box propagation across predicted videos by normalized cross-correlation
//! template matching.
//!
//! Each box is re-localized per frame within a search window around its
//! previous position. Templates refresh every frame from the matched
//! patch, which tolerates the sprite-warp predictor's inpainting seams
//! over short horizons. A correlation peak below the floor makes the box
//! coast at its last velocity for that frame and flags it.

use serde::{Deserialize, Serialize};

use crate::predictor::PredictedVideo;
use crate::types::{Box2D, Frame};
use crate::vlm::SceneUnderstanding;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackerParams {
    /// Search window half-size in pixels around the previous center.
    pub search_radius: i32,
    /// Correlation floor; below it the box coasts.
    pub min_correlation: f64,
}

impl Default for TrackerParams {
    fn default() -> Self {
        Self { search_radius: 12, min_correlation: 0.5 }
    }
}

/// Per-frame tracking output: the relocated boxes, plus a flag set when
/// any box coasted on a weak correlation peak.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackedFrame {
    pub boxes: SceneUnderstanding,
    pub low_confidence: bool,
}

/// Pixels of surrounding context matched along with the box. The scene's
/// objects are flat-colored, so a template cut exactly at the box rect
/// can have zero variance; including the boundary against the background
/// keeps the correlation well-defined.
const CONTEXT_MARGIN: i64 = 2;

struct Track {
    cx: f64,
    cy: f64,
    /// Reported box extent.
    w: i64,
    h: i64,
    /// Matching window extent (box plus context margin).
    ww: i64,
    wh: i64,
    vx: f64,
    vy: f64,
    template: Vec<f32>,
    label: crate::types::BoxLabel,
}

impl Track {
    fn init(frame: &Frame, luma: &[f32], b: &Box2D) -> Track {
        let w = (b.w.round() as i64).max(1);
        let h = (b.h.round() as i64).max(1);
        let mut t = Track {
            cx: b.cx,
            cy: b.cy,
            w,
            h,
            ww: (w + 2 * CONTEXT_MARGIN).min(frame.width as i64),
            wh: (h + 2 * CONTEXT_MARGIN).min(frame.height as i64),
            vx: 0.0,
            vy: 0.0,
            template: Vec::new(),
            label: b.label,
        };
        t.template = t.crop(frame, luma, t.cx, t.cy);
        t
    }

    /// Grayscale crop of the matching window centered at (cx, cy), clamped
    /// inside the frame.
    fn crop(&self, frame: &Frame, luma: &[f32], cx: f64, cy: f64) -> Vec<f32> {
        let fw = frame.width as i64;
        let fh = frame.height as i64;
        let x0 = ((cx - self.ww as f64 / 2.0).round() as i64).clamp(0, fw - self.ww);
        let y0 = ((cy - self.wh as f64 / 2.0).round() as i64).clamp(0, fh - self.wh);
        let mut out = Vec::with_capacity((self.ww * self.wh) as usize);
        for y in y0..y0 + self.wh {
            for x in x0..x0 + self.ww {
                out.push(luma[(y * fw + x) as usize]);
            }
        }
        out
    }

    fn clamp_center(&mut self, fw: u32, fh: u32) {
        self.cx = self.cx.clamp(self.w as f64 / 2.0, fw as f64 - self.w as f64 / 2.0);
        self.cy = self.cy.clamp(self.h as f64 / 2.0, fh as f64 - self.h as f64 / 2.0);
    }

    fn to_box(&self) -> Box2D {
        Box2D::new(self.cx, self.cy, self.w as f64, self.h as f64, self.label)
    }

    /// One matching step; returns false when the box coasted.
    fn advance(&mut self, frame: &Frame, luma: &[f32], params: &TrackerParams) -> bool {
        let fw = frame.width as i64;
        let fh = frame.height as i64;
        if self.ww > fw || self.wh > fh {
            self.coast(frame);
            return false;
        }
        let base_x = (self.cx - self.ww as f64 / 2.0).round() as i64;
        let base_y = (self.cy - self.wh as f64 / 2.0).round() as i64;
        let mut best_score = f64::NEG_INFINITY;
        let mut best_xy = None;

        let t_stats = stats(&self.template);
        if t_stats.var <= 1e-9 {
            self.coast(frame);
            return false;
        }

        for dy in -params.search_radius as i64..=params.search_radius as i64 {
            for dx in -params.search_radius as i64..=params.search_radius as i64 {
                let x0 = base_x + dx;
                let y0 = base_y + dy;
                if x0 < 0 || y0 < 0 || x0 + self.ww > fw || y0 + self.wh > fh {
                    continue;
                }
                let score = zncc(&self.template, &t_stats, luma, fw, x0, y0, self.ww, self.wh);
                if score > best_score {
                    best_score = score;
                    best_xy = Some((x0, y0));
                }
            }
        }

        match best_xy {
            Some((x0, y0)) if best_score >= params.min_correlation => {
                let ncx = x0 as f64 + self.ww as f64 / 2.0;
                let ncy = y0 as f64 + self.wh as f64 / 2.0;
                self.vx = ncx - self.cx;
                self.vy = ncy - self.cy;
                self.cx = ncx;
                self.cy = ncy;
                self.template = self.crop(frame, luma, self.cx, self.cy);
                true
            }
            _ => {
                self.coast(frame);
                false
            }
        }
    }

    fn coast(&mut self, frame: &Frame) {
        self.cx += self.vx;
        self.cy += self.vy;
        self.clamp_center(frame.width, frame.height);
    }
}

struct Stats {
    mean: f64,
    var: f64,
}

fn stats(xs: &[f32]) -> Stats {
    let n = xs.len() as f64;
    let mean = xs.iter().map(|&v| v as f64).sum::<f64>() / n;
    let var = xs.iter().map(|&v| (v as f64 - mean).powi(2)).sum::<f64>();
    Stats { mean, var }
}

/// Zero-normalized cross-correlation between the template and the window
/// at (x0, y0); in [-1, 1], higher is better.
fn zncc(template: &[f32], t: &Stats, luma: &[f32], fw: i64, x0: i64, y0: i64, w: i64, h: i64) -> f64 {
    let n = (w * h) as f64;
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    let mut cross = 0.0;
    for y in 0..h {
        let row = ((y0 + y) * fw + x0) as usize;
        let trow = (y * w) as usize;
        for x in 0..w as usize {
            let v = luma[row + x] as f64;
            let tv = template[trow + x] as f64;
            sum += v;
            sum_sq += v * v;
            cross += v * tv;
        }
    }
    let w_mean = sum / n;
    let w_var = sum_sq - n * w_mean * w_mean;
    if w_var <= 1e-9 {
        return 0.0;
    }
    let numer = cross - n * w_mean * t.mean;
    numer / (t.var.sqrt() * w_var.sqrt())
}

/// Propagates the initial boxes through every frame of the video. `init`
/// must be valid in `init_frame`, the frame preceding `video.frames[0]`.
/// Output length equals the video length.
pub fn track(
    video: &PredictedVideo,
    init: &SceneUnderstanding,
    init_frame: &Frame,
    params: &TrackerParams,
) -> Vec<TrackedFrame> {
    let init_luma = init_frame.luma();
    let mut tracks: Vec<Track> = std::iter::once(&init.e)
        .chain(std::iter::once(&init.s))
        .chain(init.interference.iter())
        .map(|b| Track::init(init_frame, &init_luma, b))
        .collect();

    let mut out = Vec::with_capacity(video.frames.len());
    for frame in &video.frames {
        let luma = frame.luma();
        let mut low_confidence = false;
        for tr in tracks.iter_mut() {
            if !tr.advance(frame, &luma, params) {
                low_confidence = true;
            }
        }
        let boxes = SceneUnderstanding {
            e: tracks[0].to_box().clamped(frame.width, frame.height),
            s: tracks[1].to_box().clamped(frame.width, frame.height),
            interference: tracks[2..]
                .iter()
                .map(|t| t.to_box().clamped(frame.width, frame.height))
                .collect(),
        };
        out.push(TrackedFrame { boxes, low_confidence });
    }
    out
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;
    use crate::types::BoxLabel;

    /// A synthetic video that translates a distinctive patch by an integer
    /// step per frame over a flat background; returns the video, the
    /// initial frame/boxes, and the ground-truth centers per frame.
    pub fn synthetic_translation(
        frames: usize,
        start: (f64, f64),
        step: (f64, f64),
    ) -> (PredictedVideo, Frame, SceneUnderstanding, Vec<(f64, f64)>) {
        let draw = |cx: f64, cy: f64, ts: u64| {
            let mut f = Frame::filled(64, 64, ts, [30, 30, 30]);
            let x0 = (cx - 4.0) as i64;
            let y0 = (cy - 4.0) as i64;
            for y in 0..8i64 {
                for x in 0..8i64 {
                    let (fx, fy) = (x0 + x, y0 + y);
                    if fx >= 0 && fy >= 0 && fx < 64 && fy < 64 {
                        // checkered texture so correlation has structure
                        let c = if (x + y) % 2 == 0 { [220, 60, 40] } else { [250, 240, 90] };
                        f.set(fx as u32, fy as u32, c);
                    }
                }
            }
            f
        };
        let init_frame = draw(start.0, start.1, 0);
        let init = SceneUnderstanding {
            e: Box2D::new(start.0, start.1, 8.0, 8.0, BoxLabel::EndEffector),
            s: Box2D::new(start.0, start.1, 8.0, 8.0, BoxLabel::SubGoal),
            interference: vec![],
        };
        let mut video = PredictedVideo { candidate_id: 0, frames: Vec::new() };
        let mut truth = Vec::new();
        for k in 1..=frames {
            let cx = start.0 + step.0 * k as f64;
            let cy = start.1 + step.1 * k as f64;
            video.frames.push(draw(cx, cy, k as u64));
            truth.push((cx, cy));
        }
        (video, init_frame, init, truth)
    }
}

#[cfg(test)]
mod tests {
    use super::test_support::synthetic_translation;
    use super::*;

    #[test]
    fn static_video_keeps_boxes_fixed() {
        let (mut video, init_frame, init, _) = synthetic_translation(5, (20.0, 20.0), (0.0, 0.0));
        for f in &mut video.frames {
            f.pixels = init_frame.pixels.clone();
        }
        let tracked = track(&video, &init, &init_frame, &TrackerParams::default());
        assert_eq!(tracked.len(), 5);
        for tf in &tracked {
            assert!(!tf.low_confidence);
            assert_eq!(tf.boxes.e.center(), init.e.center());
            assert_eq!(tf.boxes.s.center(), init.s.center());
        }
    }

    #[test]
    fn tracks_three_px_per_frame_within_one_px() {
        let (video, init_frame, init, truth) = synthetic_translation(8, (14.0, 30.0), (3.0, 0.0));
        let tracked = track(&video, &init, &init_frame, &TrackerParams::default());
        for (tf, (tx, ty)) in tracked.iter().zip(truth.iter()) {
            assert!(!tf.low_confidence);
            assert!((tf.boxes.e.cx - tx).abs() <= 1.0, "{} vs {tx}", tf.boxes.e.cx);
            assert!((tf.boxes.e.cy - ty).abs() <= 1.0, "{} vs {ty}", tf.boxes.e.cy);
        }
    }

    #[test]
    fn diagonal_motion_tracked() {
        let (video, init_frame, init, truth) = synthetic_translation(6, (16.0, 16.0), (2.0, 3.0));
        let tracked = track(&video, &init, &init_frame, &TrackerParams::default());
        let last = tracked.last().unwrap();
        let (tx, ty) = *truth.last().unwrap();
        assert!((last.boxes.e.cx - tx).abs() <= 1.0);
        assert!((last.boxes.e.cy - ty).abs() <= 1.0);
    }

    #[test]
    fn leaving_frame_coasts_clamped_and_flagged() {
        // patch walks off the right edge; once it is gone the peak drops
        let (video, init_frame, init, _) = synthetic_translation(14, (52.0, 32.0), (6.0, 0.0));
        let tracked = track(&video, &init, &init_frame, &TrackerParams::default());
        assert_eq!(tracked.len(), 14);
        assert!(tracked.iter().any(|tf| tf.low_confidence), "expected a coasting frame");
        for tf in &tracked {
            assert!(tf.boxes.e.in_bounds(64, 64));
            assert!(tf.boxes.s.in_bounds(64, 64));
        }
    }

    #[test]
    fn output_length_matches_video() {
        let (video, init_frame, init, _) = synthetic_translation(3, (30.0, 30.0), (1.0, 1.0));
        assert_eq!(track(&video, &init, &init_frame, &TrackerParams::default()).len(), 3);
    }

    #[test]
    fn motion_within_window_iou_at_least_080() {
        for seed in 0..20u64 {
            let step_x = (seed % 5) as f64;
            let step_y = (seed % 3) as f64;
            let (video, init_frame, init, truth) =
                synthetic_translation(6, (24.0, 24.0), (step_x, step_y));
            let tracked = track(&video, &init, &init_frame, &TrackerParams::default());
            for (tf, (tx, ty)) in tracked.iter().zip(truth.iter()) {
                let gt = Box2D::new(*tx, *ty, 8.0, 8.0, crate::types::BoxLabel::EndEffector);
                assert!(
                    tf.boxes.e.iou(&gt) >= 0.8,
                    "seed {seed}: IoU {} below 0.8",
                    tf.boxes.e.iou(&gt)
                );
            }
        }
    }
}
