//! Static pitch images: a color-mapped grid layer (control, EPV, or their
//! product) under the pitch markings, players with velocity arrows, and the
//! ball. Output is binary PPM or SVG; both are deterministic byte-for-byte.

use std::fmt::Write as _;

use crate::epv::EPVGrid;
use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::pitch_control::{compute_control_field, PassModelParams};
use crate::sim::{GameState, PitchSpec, Role, Team};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    /// Attacking-team control probability.
    Control,
    /// EPV grid.
    Epv,
    /// Control × EPV, the summand of game-state EPV.
    Overlay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Colormap {
    /// Blue (0) through white (0.5) to red (1).
    Diverging,
    /// Dark to bright.
    Sequential,
}

type Rgb = [u8; 3];

const DIVERGING: [(f64, Rgb); 3] = [(0.0, [33, 102, 172]), (0.5, [247, 247, 247]), (1.0, [178, 24, 43])];
const SEQUENTIAL: [(f64, Rgb); 4] = [
    (0.0, [0, 0, 4]),
    (0.35, [120, 28, 109]),
    (0.7, [237, 105, 37]),
    (1.0, [252, 255, 164]),
];

const LINE: Rgb = [255, 255, 255];
const DEFENDER: Rgb = [30, 60, 220];
const ATTACKER: Rgb = [220, 40, 40];
const KEEPER: Rgb = [20, 200, 220];
const OUTLINE: Rgb = [0, 0, 0];
const BACKGROUND: Rgb = [40, 110, 50];

impl Colormap {
    pub fn color(self, v: f64) -> Rgb {
        let stops: &[(f64, Rgb)] = match self {
            Colormap::Diverging => &DIVERGING,
            Colormap::Sequential => &SEQUENTIAL,
        };
        let v = if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 };
        for w in stops.windows(2) {
            let ((a, ca), (b, cb)) = (w[0], w[1]);
            if v <= b {
                if v == a {
                    return ca;
                }
                if v == b {
                    return cb;
                }
                let t = (v - a) / (b - a);
                let mix = |x: u8, y: u8| (x as f64 + t * (y as f64 - x as f64)).round() as u8;
                return [mix(ca[0], cb[0]), mix(ca[1], cb[1]), mix(ca[2], cb[2])];
            }
        }
        stops[stops.len() - 1].1
    }
}

/// Grid layer in `[0, 1]`, row-major over `(i, j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub values: Vec<f64>,
    pub colormap: Colormap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub spec: PitchSpec,
    pub layer: Option<Layer>,
    pub state: Option<GameState>,
}

fn normalize_by_max(values: Vec<f64>) -> Vec<f64> {
    let max = values.iter().cloned().fold(0.0, f64::max);
    if max > 0.0 {
        values.into_iter().map(|v| v / max).collect()
    } else {
        values
    }
}

/// Assembles the layer for `what`. Control and overlay need a state; EPV and
/// overlay need a grid matching `spec`.
pub fn build_scene(
    what: FieldKind,
    spec: &PitchSpec,
    state: Option<&GameState>,
    grid: Option<&EPVGrid>,
    params: &PassModelParams,
) -> Result<Scene> {
    if let Some(g) = grid {
        if g.m != spec.grid_m || g.n != spec.grid_n {
            return Err(Error::Format(format!(
                "EPV grid is {}x{} but the pitch grid is {}x{}",
                g.m, g.n, spec.grid_m, spec.grid_n
            )));
        }
    }
    let need_state = || state.ok_or_else(|| Error::Format("this view needs a game state".into()));
    let need_grid = || grid.ok_or_else(|| Error::Format("this view needs an EPV grid".into()));
    let layer = match what {
        FieldKind::Control => Layer {
            values: compute_control_field(need_state()?, spec, params).values,
            colormap: Colormap::Diverging,
        },
        FieldKind::Epv => Layer {
            values: normalize_by_max(need_grid()?.values.clone()),
            colormap: Colormap::Sequential,
        },
        FieldKind::Overlay => {
            let field = compute_control_field(need_state()?, spec, params);
            let product = field.values.iter().zip(&need_grid()?.values).map(|(a, e)| a * e).collect();
            Layer {
                values: normalize_by_max(product),
                colormap: Colormap::Sequential,
            }
        }
    };
    Ok(Scene {
        spec: *spec,
        layer: Some(layer),
        state: state.cloned(),
    })
}

struct Canvas {
    width: usize,
    height: usize,
    scale: f64,
    pixels: Vec<Rgb>,
}

impl Canvas {
    fn to_px(&self, p: Vec2) -> (f64, f64) {
        (p.x * self.scale, self.height as f64 - p.y * self.scale)
    }

    fn put(&mut self, x: i64, y: i64, c: Rgb) {
        if x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height {
            self.pixels[y as usize * self.width + x as usize] = c;
        }
    }

    fn line(&mut self, a: Vec2, b: Vec2, c: Rgb) {
        let (x0, y0) = self.to_px(a);
        let (x1, y1) = self.to_px(b);
        let n = ((x1 - x0).abs().max((y1 - y0).abs()).ceil() as usize).max(1);
        for k in 0..=n {
            let t = k as f64 / n as f64;
            self.put((x0 + t * (x1 - x0)).floor() as i64, (y0 + t * (y1 - y0)).floor() as i64, c);
        }
    }

    fn disc(&mut self, center: Vec2, radius_m: f64, fill: Rgb) {
        let (cx, cy) = self.to_px(center);
        let r = radius_m * self.scale;
        let (x0, x1) = ((cx - r - 1.0).floor() as i64, (cx + r + 1.0).ceil() as i64);
        let (y0, y1) = ((cy - r - 1.0).floor() as i64, (cy + r + 1.0).ceil() as i64);
        for y in y0..=y1 {
            for x in x0..=x1 {
                let d = ((x as f64 + 0.5 - cx).powi(2) + (y as f64 + 0.5 - cy).powi(2)).sqrt();
                if d <= r {
                    self.put(x, y, if d > r - 1.0 { OUTLINE } else { fill });
                }
            }
        }
    }
}

fn player_color(team: Team, role: Role) -> Rgb {
    match (team, role) {
        (_, Role::LazyGoalkeeper) => KEEPER,
        (Team::Defending, _) => DEFENDER,
        (Team::Attacking, _) => ATTACKER,
    }
}

/// Pitch markings as segments, in meters.
fn markings(spec: &PitchSpec) -> Vec<(Vec2, Vec2)> {
    let (l, w) = (spec.length, spec.width);
    let c = w / 2.0;
    let bx = 16.5_f64.min(l / 2.0);
    let bh = 20.16_f64.min(c);
    vec![
        (Vec2::new(0.0, 0.0), Vec2::new(l, 0.0)),
        (Vec2::new(l, 0.0), Vec2::new(l, w)),
        (Vec2::new(l, w), Vec2::new(0.0, w)),
        (Vec2::new(0.0, w), Vec2::new(0.0, 0.0)),
        (Vec2::new(l / 2.0, 0.0), Vec2::new(l / 2.0, w)),
        (Vec2::new(0.0, c - bh), Vec2::new(bx, c - bh)),
        (Vec2::new(bx, c - bh), Vec2::new(bx, c + bh)),
        (Vec2::new(bx, c + bh), Vec2::new(0.0, c + bh)),
    ]
}

const ARROW_SECONDS: f64 = 0.5;
const PLAYER_RADIUS: f64 = 0.9;
const BALL_RADIUS: f64 = 0.5;

fn rasterize(scene: &Scene, px_per_meter: f64) -> Canvas {
    let spec = scene.spec;
    let width = (spec.length * px_per_meter).round().max(1.0) as usize;
    let height = (spec.width * px_per_meter).round().max(1.0) as usize;
    let mut canvas = Canvas {
        width,
        height,
        scale: px_per_meter,
        pixels: vec![BACKGROUND; width * height],
    };
    if let Some(layer) = &scene.layer {
        let (dx, dy) = spec.cell_size();
        for py in 0..height {
            let y = (height as f64 - py as f64 - 0.5) / px_per_meter;
            let j = ((y / dy).floor() as usize).min(spec.grid_n - 1);
            for px in 0..width {
                let x = (px as f64 + 0.5) / px_per_meter;
                let i = ((x / dx).floor() as usize).min(spec.grid_m - 1);
                canvas.pixels[py * width + px] = layer.colormap.color(layer.values[i * spec.grid_n + j]);
            }
        }
    }
    for (a, b) in markings(&spec) {
        canvas.line(a, b, LINE);
    }
    let gc = spec.goal_center();
    canvas.line(
        Vec2::new(0.0, gc.y - spec.goal_half_width),
        Vec2::new(0.0, gc.y + spec.goal_half_width),
        OUTLINE,
    );
    if let Some(state) = &scene.state {
        for p in &state.players {
            canvas.line(p.position, p.position + p.velocity * ARROW_SECONDS, OUTLINE);
        }
        for p in &state.players {
            canvas.disc(p.position, PLAYER_RADIUS, player_color(p.team, p.role));
        }
        canvas.disc(state.ball.position, BALL_RADIUS, LINE);
    }
    canvas
}

/// Binary PPM (P6).
pub fn render_ppm(scene: &Scene, px_per_meter: f64) -> Vec<u8> {
    let c = rasterize(scene, px_per_meter);
    let mut out = format!("P6\n{} {}\n255\n", c.width, c.height).into_bytes();
    out.reserve(c.pixels.len() * 3);
    for p in &c.pixels {
        out.extend_from_slice(p);
    }
    out
}

fn hex(c: Rgb) -> String {
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

/// SVG with one rectangle per grid cell; user units are pixels.
pub fn render_svg(scene: &Scene, px_per_meter: f64) -> String {
    let spec = scene.spec;
    let s = px_per_meter;
    let (w, h) = (spec.length * s, spec.width * s);
    let fy = |y: f64| h - y * s;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(out, r#"<rect x="0" y="0" width="{w}" height="{h}" fill="{}"/>"#, hex(BACKGROUND));
    if let Some(layer) = &scene.layer {
        let (dx, dy) = spec.cell_size();
        for i in 0..spec.grid_m {
            for j in 0..spec.grid_n {
                let c = layer.colormap.color(layer.values[i * spec.grid_n + j]);
                let _ = writeln!(
                    out,
                    r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{}"/>"#,
                    i as f64 * dx * s,
                    fy((j + 1) as f64 * dy),
                    dx * s,
                    dy * s,
                    hex(c)
                );
            }
        }
    }
    for (a, b) in markings(&spec) {
        let _ = writeln!(
            out,
            r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="{}" stroke-width="1"/>"#,
            a.x * s,
            fy(a.y),
            b.x * s,
            fy(b.y),
            hex(LINE)
        );
    }
    if let Some(state) = &scene.state {
        for p in &state.players {
            let tip = p.position + p.velocity * ARROW_SECONDS;
            let _ = writeln!(
                out,
                r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="{}" stroke-width="1"/>"#,
                p.position.x * s,
                fy(p.position.y),
                tip.x * s,
                fy(tip.y),
                hex(OUTLINE)
            );
            let _ = writeln!(
                out,
                r#"<circle cx="{}" cy="{}" r="{}" fill="{}" stroke="{}"/>"#,
                p.position.x * s,
                fy(p.position.y),
                PLAYER_RADIUS * s,
                hex(player_color(p.team, p.role)),
                hex(OUTLINE)
            );
        }
        let b = state.ball.position;
        let _ = writeln!(
            out,
            r#"<circle cx="{}" cy="{}" r="{}" fill="{}" stroke="{}"/>"#,
            b.x * s,
            fy(b.y),
            BALL_RADIUS * s,
            hex(LINE),
            hex(OUTLINE)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Pixel at `(x, y)` of a P6 image produced by [`render_ppm`].
pub fn ppm_pixel(ppm: &[u8], x: usize, y: usize) -> Option<Rgb> {
    let mut newlines = ppm.iter().enumerate().filter(|(_, &b)| b == b'\n').map(|(i, _)| i);
    let (first, second, third) = (newlines.next()?, newlines.next()?, newlines.next()?);
    if &ppm[..first] != b"P6" {
        return None;
    }
    let dims = std::str::from_utf8(&ppm[first + 1..second]).ok()?;
    let mut dims = dims.split_ascii_whitespace();
    let w: usize = dims.next()?.parse().ok()?;
    let h: usize = dims.next()?.parse().ok()?;
    if x >= w || y >= h {
        return None;
    }
    let off = third + 1 + (y * w + x) * 3;
    Some([*ppm.get(off)?, *ppm.get(off + 1)?, *ppm.get(off + 2)?])
}
