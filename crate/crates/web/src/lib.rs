//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Every export takes and returns JSON strings. The `*_json` functions
//! hold the logic and run natively; the bound wrappers turn their errors
//! into JavaScript exceptions.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use digstack_core::fixtures;
use digstack_core::netsim::{frames_required, reference_report, FrameBudget};
use digstack_core::semantics::{
    compact_txt, link_list_to_json, parse_link_format, to_txt, ServiceMetadata, TxtMode,
};

#[derive(Serialize)]
struct FrameView {
    frame_size: usize,
    overhead: usize,
    payload_per_frame: usize,
    rows: Vec<digstack_core::netsim::ComparisonRow>,
}

pub fn frame_report_json(frame_size: usize, overhead: usize) -> Result<String, String> {
    let budget = FrameBudget::new(frame_size, overhead).map_err(|e| e.to_string())?;
    let view = FrameView {
        frame_size,
        overhead,
        payload_per_frame: budget.payload_per_frame(),
        rows: reference_report(&budget),
    };
    Ok(serde_json::to_string(&view).expect("serializable"))
}

#[derive(Serialize)]
struct CompactView {
    compact: String,
    compact_bytes: usize,
    joined_bytes: usize,
    frames: usize,
    truncated: bool,
}

/// Compacts metadata given as JSON, reporting sizes against the
/// worst-case frame budget with `overhead` bytes of headers.
pub fn compact_metadata_json(meta: &str, overhead: usize) -> Result<String, String> {
    let meta: ServiceMetadata = serde_json::from_str(meta).map_err(|e| e.to_string())?;
    let budget = FrameBudget::with_overhead(overhead).map_err(|e| e.to_string())?;
    let joined = to_txt(&meta, TxtMode::Single).map_err(|e| e.to_string())?;
    let c = compact_txt(&meta);
    let view = CompactView {
        compact: String::from_utf8_lossy(&c.bytes).into_owned(),
        compact_bytes: c.bytes.len(),
        joined_bytes: joined.iter().map(Vec::len).sum(),
        frames: frames_required(c.bytes.len(), &budget),
        truncated: c.truncated,
    };
    Ok(serde_json::to_string(&view).expect("serializable"))
}

pub fn links_json(text: &str) -> Result<String, String> {
    parse_link_format(text)
        .map(|l| link_list_to_json(&l))
        .map_err(|e| e.to_string())
}

#[wasm_bindgen(js_name = frameReport)]
pub fn frame_report(frame_size: usize, overhead: usize) -> Result<String, JsError> {
    frame_report_json(frame_size, overhead).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = compactMetadata)]
pub fn compact_metadata(meta: &str, overhead: usize) -> Result<String, JsError> {
    compact_metadata_json(meta, overhead).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = linkFormatToJson)]
pub fn link_format_to_json(text: &str) -> Result<String, JsError> {
    links_json(text).map_err(|e| JsError::new(&e))
}

/// Metadata preloaded into the compaction form.
#[wasm_bindgen(js_name = sampleMetadata)]
pub fn sample_metadata() -> String {
    serde_json::to_string_pretty(&fixtures::dimmer_light_metadata()).expect("serializable")
}

#[wasm_bindgen(js_name = sampleLinks)]
pub fn sample_links() -> String {
    fixtures::WELL_KNOWN_CORE.to_string()
}
