//! Procedural articulated furniture: cabinets with drawers and doors, microwaves.
//! Objects come out normalized (centered, longest base side 1) with the opening
//! facing +z.

use std::f64::consts::FRAC_PI_2;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Mesh, Vec3};

use super::structure::{ArticulatedStructure, MotionSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectKind {
    Cabinet,
    Microwave,
    Mixed,
}

impl FromStr for ObjectKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cabinet" => Ok(ObjectKind::Cabinet),
            "microwave" => Ok(ObjectKind::Microwave),
            "mixed" => Ok(ObjectKind::Mixed),
            _ => Err(Error::invalid(format!("unknown object kind {s:?}"))),
        }
    }
}

const WALL: f64 = 0.02;
const FRONT: f64 = 0.02;
const GAP: f64 = 0.006;
const HANDLE_DEPTH: f64 = 0.025;
const HANDLE_BAR: f64 = 0.02;
/// Drawers slide out at most this fraction of their depth.
pub const DRAWER_TRAVEL: f64 = 0.8;

#[derive(Default)]
struct Builder {
    mesh: Mesh,
    labels: Vec<u32>,
    parent: Vec<Option<usize>>,
    motion: Vec<MotionSpec>,
}

impl Builder {
    fn part(&mut self, parent: Option<usize>, motion: MotionSpec) -> u32 {
        self.parent.push(parent);
        self.motion.push(motion);
        (self.motion.len() - 1) as u32
    }

    fn cuboid(&mut self, lo: Vec3, hi: Vec3, part: u32) {
        let b = Mesh::cuboid(lo, hi);
        self.labels.extend(std::iter::repeat_n(part, b.faces.len()));
        self.mesh.append(&b);
    }

    fn finish(self) -> (Mesh, ArticulatedStructure) {
        let s = ArticulatedStructure {
            part_count: self.motion.len(),
            face_labels: self.labels,
            parent: self.parent,
            motion: self.motion,
        };
        debug_assert!(s.validate_for(self.mesh.faces.len()).is_ok());
        (self.mesh, s)
    }
}

/// Hollow box open at the front (+z), walls of thickness `WALL`.
fn shell(b: &mut Builder, half: Vec3, part: u32) {
    let [w, h, d] = half;
    let t = WALL;
    b.cuboid([-w, -h, -d], [w, h, -d + t], part);
    b.cuboid([-w, -h, -d + t], [-w + t, h, d], part);
    b.cuboid([w - t, -h, -d + t], [w, h, d], part);
    b.cuboid([-w + t, -h, -d + t], [w - t, -h + t, d], part);
    b.cuboid([-w + t, h - t, -d + t], [w - t, h, d], part);
}

fn dims<R: Rng>(rng: &mut R, w: (f64, f64), h: (f64, f64), d: (f64, f64)) -> Vec3 {
    let v = [rng.gen_range(w.0..w.1), rng.gen_range(h.0..h.1), rng.gen_range(d.0..d.1)];
    let m = v.iter().fold(0.0f64, |a, &b| a.max(b));
    [0.5 * v[0] / m, 0.5 * v[1] / m, 0.5 * v[2] / m]
}

#[derive(Clone, Copy)]
enum Hinge {
    Left,
    Right,
    Bottom,
}

/// Front door panel covering `[x0,x1] x [y0,y1]` at the front plane `zf`.
fn door(b: &mut Builder, panel: [f64; 4], zf: f64, hinge: Hinge) {
    let [x0, x1, y0, y1] = panel;
    let (cx, cy) = (0.5 * (x0 + x1), 0.5 * (y0 + y1));
    let (dir, point) = match hinge {
        Hinge::Left => ([0.0, -1.0, 0.0], [x0, cy, zf]),
        Hinge::Right => ([0.0, 1.0, 0.0], [x1, cy, zf]),
        Hinge::Bottom => ([1.0, 0.0, 0.0], [cx, y0, zf]),
    };
    let part = b.part(Some(0), MotionSpec::revolute(dir, point, [0.0, FRAC_PI_2]));
    b.cuboid([x0, y0, zf], [x1, y1, zf + FRONT], part);
    let (zh0, zh1) = (zf + FRONT, zf + FRONT + HANDLE_DEPTH);
    let inset = 0.06f64.min(0.2 * (x1 - x0));
    match hinge {
        Hinge::Left | Hinge::Right => {
            let hx = if matches!(hinge, Hinge::Left) { x1 - inset } else { x0 + inset };
            let hl = 0.15 * (y1 - y0);
            b.cuboid([hx - 0.5 * HANDLE_BAR, cy - hl, zh0], [hx + 0.5 * HANDLE_BAR, cy + hl, zh1], part);
        }
        Hinge::Bottom => {
            let hy = y1 - inset.min(0.2 * (y1 - y0));
            let hl = 0.2 * (x1 - x0);
            b.cuboid([cx - hl, hy - 0.5 * HANDLE_BAR, zh0], [cx + hl, hy + 0.5 * HANDLE_BAR, zh1], part);
        }
    }
}

/// Drawer: front panel plus an open-topped body box inside `opening = [x0,x1,y0,y1]`
/// reaching back to `z_back`.
fn drawer(b: &mut Builder, panel: [f64; 4], opening: [f64; 4], zf: f64, z_back: f64) {
    let [x0, x1, y0, y1] = panel;
    let [ox0, ox1, oy0, oy1] = opening;
    let depth = zf - z_back;
    let part = b.part(Some(0), MotionSpec::prismatic([0.0, 0.0, 1.0], [0.0, DRAWER_TRAVEL * depth]));
    b.cuboid([x0, y0, zf], [x1, y1, zf + FRONT], part);
    b.cuboid([ox0 + GAP, oy0 + GAP, z_back], [ox1 - GAP, oy0 + 0.75 * (oy1 - oy0), zf], part);
    let (cx, cy) = (0.5 * (x0 + x1), 0.5 * (y0 + y1) + 0.15 * (y1 - y0));
    let hl = 0.15 * (x1 - x0);
    b.cuboid(
        [cx - hl, cy - 0.5 * HANDLE_BAR, zf + FRONT],
        [cx + hl, cy + 0.5 * HANDLE_BAR, zf + FRONT + HANDLE_DEPTH],
        part,
    );
}

fn cabinet(rng: &mut ChaCha8Rng) -> (Mesh, ArticulatedStructure) {
    let half = dims(rng, (0.5, 1.0), (0.5, 1.0), (0.35, 0.7));
    let [w, h, d] = half;
    let t = WALL;
    let rows = rng.gen_range(1..=3usize);
    let cols = rng.gen_range(1..=2usize);
    let drawer_bias: f64 = rng.gen();

    let mut b = Builder::default();
    let base = b.part(None, MotionSpec::FIXED);
    shell(&mut b, half, base);

    let (xi0, xi1, yi0, yi1) = (-w + t, w - t, -h + t, h - t);
    let xs: Vec<f64> = (0..=cols).map(|k| xi0 + (xi1 - xi0) * k as f64 / cols as f64).collect();
    let ys: Vec<f64> = (0..=rows).map(|k| yi0 + (yi1 - yi0) * k as f64 / rows as f64).collect();
    for &x in &xs[1..cols] {
        b.cuboid([x - 0.5 * t, yi0, -d + t], [x + 0.5 * t, yi1, d], base);
    }
    for &y in &ys[1..rows] {
        b.cuboid([xi0, y - 0.5 * t, -d + t], [xi1, y + 0.5 * t, d], base);
    }

    // grid lines on the front face, walls included
    let line = |v: &[f64], k: usize, outer: f64| -> f64 {
        if k == 0 {
            -outer
        } else if k == v.len() - 1 {
            outer
        } else {
            v[k]
        }
    };
    for r in 0..rows {
        for c in 0..cols {
            let opening = [
                xs[c] + if c > 0 { 0.5 * t } else { 0.0 },
                xs[c + 1] - if c + 1 < cols { 0.5 * t } else { 0.0 },
                ys[r] + if r > 0 { 0.5 * t } else { 0.0 },
                ys[r + 1] - if r + 1 < rows { 0.5 * t } else { 0.0 },
            ];
            let panel = [
                line(&xs, c, w) + GAP,
                line(&xs, c + 1, w) - GAP,
                line(&ys, r, h) + GAP,
                line(&ys, r + 1, h) - GAP,
            ];
            let (pw, ph) = (panel[1] - panel[0], panel[3] - panel[2]);
            if rng.gen::<f64>() < drawer_bias && ph < 1.5 * pw {
                drawer(&mut b, panel, opening, d, -d + t + GAP);
            } else {
                let hinge = if pw > 1.3 * ph && rng.gen_bool(0.5) {
                    Hinge::Bottom
                } else if rng.gen_bool(0.5) {
                    Hinge::Left
                } else {
                    Hinge::Right
                };
                door(&mut b, panel, d, hinge);
            }
        }
    }
    b.finish()
}

fn microwave(rng: &mut ChaCha8Rng) -> (Mesh, ArticulatedStructure) {
    let half = dims(rng, (0.85, 1.0), (0.45, 0.65), (0.55, 0.75));
    let [w, h, d] = half;
    let t = WALL;
    let mut b = Builder::default();
    let base = b.part(None, MotionSpec::FIXED);
    shell(&mut b, half, base);

    let split = w - 2.0 * w * rng.gen_range(0.22..0.32);
    b.cuboid([split - 0.5 * t, -h + t, -d + t], [split + 0.5 * t, h - t, d], base);
    b.cuboid([split + GAP, -h + GAP, d], [w - GAP, h - GAP, d + FRONT], base);
    let buttons = rng.gen_range(2..=4usize);
    let bx = 0.5 * (split + w);
    for k in 0..buttons {
        let by = h - 0.15 - k as f64 * 0.09;
        b.cuboid([bx - 0.03, by - 0.025, d + FRONT], [bx + 0.03, by + 0.025, d + FRONT + 0.01], base);
    }
    door(&mut b, [-w + GAP, split - GAP, -h + GAP, h - GAP], d, Hinge::Left);
    b.finish()
}

/// Deterministic articulated object for `seed`.
pub fn synth_object(kind: ObjectKind, seed: u64) -> (Mesh, ArticulatedStructure) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kind = match kind {
        ObjectKind::Mixed if rng.gen_bool(0.7) => ObjectKind::Cabinet,
        ObjectKind::Mixed => ObjectKind::Microwave,
        k => k,
    };
    match kind {
        ObjectKind::Microwave => microwave(&mut rng),
        _ => cabinet(&mut rng),
    }
}
