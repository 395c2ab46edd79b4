//! The `widthmath` subcommand: the exact count of width-w novel states, the
//! coarse (nd)^w bound, and their ratio, as a JSON object.

use anyhow::Result;
use serde::Serialize;

use iwplan::widthmath::{coarse_bound, max_novel_closed, WidthParams};

/// Exact counts are serialized as decimal strings because they outgrow u64
/// quickly; the ratio is a lossy f64 summary.
#[derive(Debug, Clone, Serialize)]
pub struct WidthReport {
    pub n: u32,
    pub d: u32,
    pub w: u32,
    pub novel_states: String,
    pub coarse_bound: String,
    pub ratio: f64,
}

pub fn width_report(n: u32, d: u32, w: u32) -> Result<WidthReport> {
    let params = WidthParams::new(n, d, w, 1)?;
    let novel = max_novel_closed(params)?;
    let bound = coarse_bound(params);
    let ratio = to_f64(&novel.to_string()) / to_f64(&bound.to_string());
    Ok(WidthReport {
        n,
        d,
        w,
        novel_states: novel.to_string(),
        coarse_bound: bound.to_string(),
        ratio,
    })
}

fn to_f64(decimal: &str) -> f64 {
    decimal.parse().expect("decimal digits parse as f64")
}
