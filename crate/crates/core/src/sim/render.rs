//! Rasterizes a scene state to an RGB frame. Pure function of the state:
//! identical states produce identical pixels.

use super::{SceneObject, SceneState, Vec2, EE_SIZE, TABLE_SIZE};
use crate::types::Frame;

pub const TABLE_COLOR: [u8; 3] = [186, 180, 168];
pub const EE_RING_COLOR: [u8; 3] = [45, 45, 50];
pub const EE_CORE_COLOR: [u8; 3] = [255, 150, 40];
const EE_HALO_COLOR: [u8; 3] = [25, 25, 35];
const EE_HALO_ALPHA: f64 = 0.15;

/// Half-extent of the soft shadow rendered under the end-effector, world
/// meters. The falloff gives the pixel distance to a goal image a smooth
/// gradient over roughly twice this range, which is what makes pixel-only
/// planning steer at a distance instead of only on sprite overlap.
pub const EE_HALO_HALF: f64 = 0.20;

/// Pixels per meter for a given frame width.
pub fn world_to_px_scale(frame_w: u32) -> f64 {
    frame_w as f64 / TABLE_SIZE
}

fn fill_rect(frame: &mut Frame, x0: i64, y0: i64, x1: i64, y1: i64, color: [u8; 3]) {
    let w = frame.width as i64;
    let h = frame.height as i64;
    let (x0, x1) = (x0.clamp(0, w), x1.clamp(0, w));
    let (y0, y1) = (y0.clamp(0, h), y1.clamp(0, h));
    for y in y0..y1 {
        for x in x0..x1 {
            frame.set(x as u32, y as u32, color);
        }
    }
}

fn world_rect_px(center: Vec2, size: Vec2, scale: f64) -> (i64, i64, i64, i64) {
    let x0 = ((center.x - size.x / 2.0) * scale).round() as i64;
    let y0 = ((center.y - size.y / 2.0) * scale).round() as i64;
    let mut x1 = ((center.x + size.x / 2.0) * scale).round() as i64;
    let mut y1 = ((center.y + size.y / 2.0) * scale).round() as i64;
    if x1 <= x0 {
        x1 = x0 + 1;
    }
    if y1 <= y0 {
        y1 = y0 + 1;
    }
    (x0, y0, x1, y1)
}

fn object_color(obj: &SceneObject) -> [u8; 3] {
    if obj.flags.pressable && obj.pressed {
        // Swap red/green so a pressed button reads clearly in pixel space.
        [obj.color[1], obj.color[0], obj.color[2]]
    } else {
        obj.color
    }
}

fn draw_object(frame: &mut Frame, obj: &SceneObject, scale: f64) {
    if obj.flags.liquid && obj.wiped {
        return;
    }
    let (x0, y0, x1, y1) = world_rect_px(obj.pose, obj.size, scale);
    fill_rect(frame, x0, y0, x1, y1, object_color(obj));
}

/// Linear-falloff shadow around the end-effector center. Alpha depends on
/// the Chebyshev distance to the rounded center pixel, so the pattern is
/// rigid under integer translation.
fn draw_ee_halo(frame: &mut Frame, center: Vec2, scale: f64) {
    let halo = (EE_HALO_HALF * scale).round() as i64;
    if halo <= 0 {
        return;
    }
    let ecx = (center.x * scale).round() as i64;
    let ecy = (center.y * scale).round() as i64;
    let w = frame.width as i64;
    let h = frame.height as i64;
    for y in (ecy - halo).max(0)..(ecy + halo + 1).min(h) {
        for x in (ecx - halo).max(0)..(ecx + halo + 1).min(w) {
            let d = (x - ecx).abs().max((y - ecy).abs());
            let a = EE_HALO_ALPHA * (1.0 - d as f64 / halo as f64);
            if a <= 0.0 {
                continue;
            }
            let base = frame.get(x as u32, y as u32);
            let mut out = [0u8; 3];
            for c in 0..3 {
                out[c] = (base[c] as f64 * (1.0 - a) + EE_HALO_COLOR[c] as f64 * a).round() as u8;
            }
            frame.set(x as u32, y as u32, out);
        }
    }
}

/// Renders table, objects and end-effector. Draw order: flat regions
/// (containers, liquid patches) first, then solid objects, then the held
/// object, then the end-effector shadow and body on top.
pub fn render(state: &SceneState, width: u32, height: u32) -> Frame {
    let mut frame = Frame::filled(width, height, state.step, TABLE_COLOR);
    let scale = world_to_px_scale(width);

    for obj in state.objects.iter().filter(|o| o.flags.container || o.flags.liquid) {
        draw_object(&mut frame, obj, scale);
    }
    let held = state.held.as_deref();
    for obj in state
        .objects
        .iter()
        .filter(|o| !o.flags.container && !o.flags.liquid && held != Some(o.name.as_str()))
    {
        draw_object(&mut frame, obj, scale);
    }
    if let Some(obj) = held.and_then(|n| state.object(n)) {
        draw_object(&mut frame, obj, scale);
    }

    draw_ee_halo(&mut frame, state.ee_pose, scale);
    let (x0, y0, x1, y1) = world_rect_px(state.ee_pose, Vec2::new(EE_SIZE, EE_SIZE), scale);
    fill_rect(&mut frame, x0, y0, x1, y1, EE_RING_COLOR);
    fill_rect(&mut frame, x0 + 1, y0 + 1, x1 - 1, y1 - 1, EE_CORE_COLOR);

    frame
}
