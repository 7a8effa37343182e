//! Browser bindings for the demo page in `www/`. Every export returns a JSON
//! string; the plain functions below do the work and also run natively.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use jetreg::convergence::{convergence_study, Partner};
use jetreg::flowmap::velocity_grid;
use jetreg::image::{AnalyticImage, Rect};
use jetreg::presets::{shoot_preset, Preset};
use jetreg::KernelSpec;

// keep the page responsive
const MAX_STEPS: usize = 1000;
const MAX_LINES: usize = 61;
const MAX_SAMPLES: usize = 401;
const MAX_LEVEL: u32 = 7;
const MAX_ARROWS: usize = 64;

#[derive(Serialize)]
struct Line {
    t: f64,
    /// Flat `x, y, logjac` triples; a NaN log-Jacobian becomes `null`.
    points: Vec<f64>,
}

#[derive(Serialize)]
struct GridReply {
    preset: &'static str,
    particle_logjac: f64,
    min_logjac: f64,
    lines: Vec<Line>,
}

fn capped(name: &str, v: usize, lo: usize, hi: usize) -> Result<usize, String> {
    if (lo..=hi).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{name} must lie in {lo}..={hi}, got {v}"))
    }
}

fn to_json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

pub fn preset_list() -> String {
    let names: Vec<&str> = Preset::FIGURE.iter().map(|p| p.name()).collect();
    serde_json::to_string(&names).expect("plain strings")
}

/// Deformed grid for one preset particle at the centre of the unit square.
pub fn preset_grid(name: &str, sigma: f64, steps: usize, lines: usize, samples: usize) -> Result<String, String> {
    let preset = Preset::parse(name).map_err(|e| e.to_string())?;
    let steps = capped("steps", steps, 1, MAX_STEPS)?;
    let lines = capped("lines", lines, 2, MAX_LINES)?;
    let samples = capped("samples", samples, 2, MAX_SAMPLES)?;
    let run = shoot_preset(preset, sigma, steps, &Rect::unit(), lines, samples).map_err(|e| e.to_string())?;
    let reply = GridReply {
        preset: preset.name(),
        particle_logjac: run.particle_logjac,
        min_logjac: run.grid.min_logjac(),
        lines: run
            .grid
            .lines
            .iter()
            .map(|l| Line {
                t: l.t,
                points: l.vertices.iter().flat_map(|v| [v.x, v.y, v.logjac]).collect(),
            })
            .collect(),
    };
    to_json(&reply)
}

/// Convergence table of the three matching functionals on an analytic image.
pub fn convergence(kind: &str, levels: u32, quad: usize) -> Result<String, String> {
    let kind = AnalyticImage::parse(kind).map_err(|e| e.to_string())?;
    if kind == AnalyticImage::Zero {
        return Err("pick linear, quadratic or trig".into());
    }
    if !(2..=MAX_LEVEL).contains(&levels) {
        return Err(format!("levels must lie in 2..={MAX_LEVEL}, got {levels}"));
    }
    let st = convergence_study(kind, Partner::Zero, levels, 2.min(levels - 1), quad).map_err(|e| e.to_string())?;
    to_json(&st)
}

#[derive(Serialize)]
struct Arrow {
    x: f64,
    y: f64,
    u: f64,
    v: f64,
}

/// Initial velocity of a preset particle on an `n x n` lattice.
pub fn velocity(name: &str, sigma: f64, n: usize) -> Result<String, String> {
    let preset = Preset::parse(name).map_err(|e| e.to_string())?;
    let n = capped("n", n, 1, MAX_ARROWS)?;
    let spec = KernelSpec::new(sigma).map_err(|e| e.to_string())?;
    let extent = Rect::unit();
    let state = preset.state([0.5, 0.5], sigma);
    let arrows: Vec<Arrow> = velocity_grid(&state, &spec, &extent, n)
        .into_iter()
        .map(|(x, u)| Arrow {
            x: x[0],
            y: x[1],
            u: u[0],
            v: u[1],
        })
        .collect();
    to_json(&arrows)
}

fn js<T>(r: Result<T, String>) -> Result<T, JsValue> {
    r.map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = presetNames)]
pub fn preset_names_js() -> String {
    preset_list()
}

#[wasm_bindgen(js_name = presetGrid)]
pub fn preset_grid_js(name: &str, sigma: f64, steps: usize, lines: usize, samples: usize) -> Result<String, JsValue> {
    js(preset_grid(name, sigma, steps, lines, samples))
}

#[wasm_bindgen(js_name = convergenceTable)]
pub fn convergence_js(kind: &str, levels: u32, quad: usize) -> Result<String, JsValue> {
    js(convergence(kind, levels, quad))
}

#[wasm_bindgen(js_name = velocityField)]
pub fn velocity_js(name: &str, sigma: f64, n: usize) -> Result<String, JsValue> {
    js(velocity(name, sigma, n))
}
