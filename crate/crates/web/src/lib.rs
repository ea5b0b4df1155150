//! Browser bindings. Every export returns a JSON string; the page parses it.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use soliton_core::center_manifold::{reduced_flow, solve_center_poly, VALIDITY_RADIUS};
use soliton_core::classifier::{classify, f_sign, ClassifyConfig};
use soliton_core::integrator::{shoot, ShootConfig};
use soliton_core::search::arc_point;
use soliton_core::state::ShootParams;

#[derive(Debug, Serialize)]
pub struct ShotView {
    pub s: Vec<f64>,
    pub x: Vec<[f64; 3]>,
    pub y: Vec<[f64; 3]>,
    pub verdict: String,
    pub f_sign: i8,
}

#[derive(Debug, Serialize)]
pub struct ScanView {
    pub t: Vec<f64>,
    pub sign: Vec<i8>,
}

#[derive(Debug, Serialize)]
pub struct FlowView {
    pub s: Vec<f64>,
    pub y: Vec<[f64; 3]>,
    pub left_ball: bool,
}

fn cfg(horizon: f64) -> ShootConfig {
    // a uniform grid keeps the payload small for long horizons
    ShootConfig { horizon, s_spacing: Some((horizon / 600.0).max(0.01)), ..Default::default() }
}

pub fn shot_view(n: u32, alpha: f64, beta: f64, gamma: f64, horizon: f64) -> Result<ShotView, String> {
    let p = ShootParams::new(n, alpha, beta, gamma).map_err(|e| e.to_string())?;
    let t = shoot(&p, &cfg(horizon)).map_err(|e| e.to_string())?;
    let c = classify(&t, &ClassifyConfig::default());
    let comp: Vec<_> = t.compact_samples().collect();
    Ok(ShotView {
        s: comp.iter().map(|s| s.s).collect(),
        x: comp.iter().map(|s| s.x_like()).collect(),
        y: comp.iter().map(|s| s.y_like()).collect(),
        verdict: format!("{:?}", c.verdict),
        f_sign: f_sign(&t),
    })
}

/// `f_sign` at `points` evenly spaced arc parameters in `[0, 1]`.
pub fn scan_view(n: u32, gamma: f64, points: u32, horizon: f64) -> Result<ScanView, String> {
    let points = points.max(2);
    let c = ShootConfig { horizon, epsilon: 1e-2, ..Default::default() };
    let mut out = ScanView { t: Vec::new(), sign: Vec::new() };
    for k in 0..points {
        let t = k as f64 / (points - 1) as f64;
        let p = arc_point(n, gamma, t).map_err(|e| e.to_string())?;
        let traj = shoot(&p, &c).map_err(|e| e.to_string())?;
        out.t.push(t);
        out.sign.push(f_sign(&traj));
    }
    Ok(out)
}

pub fn flow_view(y0: [f64; 3], horizon: f64, degree: u32) -> Result<FlowView, String> {
    let poly = solve_center_poly(degree).map_err(|e| e.to_string())?;
    let r = reduced_flow(&poly, y0, horizon, VALIDITY_RADIUS).map_err(|e| e.to_string())?;
    Ok(FlowView { s: r.s, y: r.y, left_ball: r.left_ball })
}

fn js<T: Serialize>(r: Result<T, String>) -> Result<String, JsValue> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string())).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn shoot_xy(n: u32, alpha: f64, beta: f64, gamma: f64, horizon: f64) -> Result<String, JsValue> {
    js(shot_view(n, alpha, beta, gamma, horizon))
}

#[wasm_bindgen]
pub fn sign_scan(n: u32, gamma: f64, points: u32, horizon: f64) -> Result<String, JsValue> {
    js(scan_view(n, gamma, points, horizon))
}

#[wasm_bindgen]
pub fn center_flow(y1: f64, y2: f64, y3: f64, horizon: f64, degree: u32) -> Result<String, JsValue> {
    js(flow_view([y1, y2, y3], horizon, degree))
}
