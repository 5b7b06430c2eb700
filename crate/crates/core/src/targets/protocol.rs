//! Newline-delimited JSON messages exchanged with remote models.
//!
//! ```text
//! request:  {"id", "task": "count"|"segment"|"fuse", "width", "height",
//!            "visible_png_b64", "infrared_png_b64"}
//! response: {"id", "ok": true, "count": number}
//!         | {"id", "ok": true, "labels_b64": string}    row-major u8 labels
//!         | {"id", "ok": true, "fused_png_b64": string}  8-bit grayscale PNG
//!         | {"id", "ok": false, "error": string}
//! ```
//!
//! Responses are matched to requests by id and may arrive in any order.

use std::io::{BufRead, Write};

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::{Prediction, Task};
use crate::error::{Error, Result};
use crate::image::io::{decode_png, encode_png};
use crate::image::{Image, ImagePair};
use crate::metrics::ClassMap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub id: String,
    pub task: String,
    pub width: usize,
    pub height: usize,
    pub visible_png_b64: String,
    pub infrared_png_b64: String,
}

impl Request {
    pub fn new(id: impl Into<String>, task: Task, pair: &ImagePair) -> Self {
        let (width, height) = pair.dims();
        Request {
            id: id.into(),
            task: task.wire_name().to_string(),
            width,
            height,
            visible_png_b64: B64.encode(encode_png(pair.visible())),
            infrared_png_b64: B64.encode(encode_png(pair.infrared())),
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("request serializes")
    }

    /// Parses one request line into its id, task and decoded image pair.
    pub fn parse(line: &str) -> Result<(String, Task, ImagePair)> {
        let req: Request = serde_json::from_str(line)
            .map_err(|e| Error::protocol(format!("bad request: {e}"), line))?;
        let task = Task::from_wire(&req.task)
            .ok_or_else(|| Error::protocol(format!("unknown task '{}'", req.task), line))?;
        let visible = decode_image_field(&req.visible_png_b64, "visible_png_b64", line)?;
        let infrared = decode_image_field(&req.infrared_png_b64, "infrared_png_b64", line)?;
        let infrared = if infrared.channels() == 3 {
            infrared.to_grayscale()
        } else {
            infrared
        };
        let visible = if visible.channels() == 1 {
            let d = visible.data().iter().flat_map(|&v| [v, v, v]).collect();
            Image::new(visible.width(), visible.height(), 3, d)?
        } else {
            visible
        };
        if visible.dims() != (req.width, req.height) {
            return Err(Error::protocol(
                format!(
                    "declared {}x{} but images are {}x{}",
                    req.width,
                    req.height,
                    visible.width(),
                    visible.height()
                ),
                line,
            ));
        }
        let pair = ImagePair::new(visible, infrared)
            .map_err(|e| Error::protocol(e.to_string(), line))?;
        Ok((req.id, task, pair))
    }
}

fn decode_image_field(b64: &str, field: &str, line: &str) -> Result<Image> {
    let bytes = B64
        .decode(b64)
        .map_err(|e| Error::protocol(format!("{field}: bad base64: {e}"), line))?;
    decode_png(&bytes).map_err(|e| Error::protocol(format!("{field}: {e}"), line))
}

/// Encodes a successful prediction or a failure message as a response line.
pub fn response_line(id: &str, outcome: std::result::Result<&Prediction, &str>) -> String {
    let v = match outcome {
        Ok(Prediction::Count { count, .. }) => json!({"id": id, "ok": true, "count": count}),
        Ok(Prediction::Segmentation(map)) => {
            json!({"id": id, "ok": true, "labels_b64": B64.encode(map.labels())})
        }
        Ok(Prediction::Fused(img)) => {
            let gray = img.to_grayscale();
            json!({"id": id, "ok": true, "fused_png_b64": B64.encode(encode_png(&gray))})
        }
        Err(message) => json!({"id": id, "ok": false, "error": message}),
    };
    v.to_string()
}

/// Splits a response line into its id and JSON object.
pub fn parse_response(line: &str) -> Result<(String, Map<String, Value>)> {
    let value: Value = serde_json::from_str(line)
        .map_err(|e| Error::protocol(format!("response is not JSON: {e}"), line))?;
    let Value::Object(obj) = value else {
        return Err(Error::protocol("response is not a JSON object", line));
    };
    let id = match obj.get("id") {
        Some(Value::String(s)) => s.clone(),
        _ => return Err(Error::protocol("response has no string id", line)),
    };
    Ok((id, obj))
}

/// Interprets a response object as a prediction for `task` on an image of
/// size `dims`.
pub fn decode_response(obj: &Map<String, Value>, task: Task, dims: (usize, usize)) -> Result<Prediction> {
    let raw = Value::Object(obj.clone()).to_string();
    match obj.get("ok") {
        Some(Value::Bool(true)) => {}
        Some(Value::Bool(false)) => {
            let msg = obj
                .get("error")
                .and_then(Value::as_str)
                .unwrap_or("unspecified error");
            return Err(Error::Oracle(format!("remote model: {msg}")));
        }
        _ => return Err(Error::protocol("response lacks boolean 'ok'", &raw)),
    }
    let (w, h) = dims;
    match task {
        Task::Counting => {
            let count = obj
                .get("count")
                .and_then(Value::as_f64)
                .filter(|c| c.is_finite())
                .ok_or_else(|| Error::protocol("missing or non-numeric 'count'", &raw))?;
            Ok(Prediction::Count {
                count,
                density: None,
            })
        }
        Task::Segmentation => {
            let b64 = obj
                .get("labels_b64")
                .and_then(Value::as_str)
                .ok_or_else(|| Error::protocol("missing 'labels_b64'", &raw))?;
            let labels = B64
                .decode(b64)
                .map_err(|e| Error::protocol(format!("labels_b64: {e}"), &raw))?;
            if labels.len() != w * h {
                return Err(Error::protocol(
                    format!("class map has {} labels, expected {w}x{h}", labels.len()),
                    &raw,
                ));
            }
            Ok(Prediction::Segmentation(ClassMap::new(w, h, labels)?))
        }
        Task::Fusion => {
            let b64 = obj
                .get("fused_png_b64")
                .and_then(Value::as_str)
                .ok_or_else(|| Error::protocol("missing 'fused_png_b64'", &raw))?;
            let img = decode_image_field(b64, "fused_png_b64", &raw)?;
            if img.dims() != dims {
                return Err(Error::protocol(
                    format!(
                        "fused image is {}x{}, expected {w}x{h}",
                        img.width(),
                        img.height()
                    ),
                    &raw,
                ));
            }
            Ok(Prediction::Fused(img.to_grayscale()))
        }
    }
}

/// Best-effort id of a request line that failed to parse.
fn salvage_id(line: &str) -> String {
    serde_json::from_str::<Value>(line)
        .ok()
        .and_then(|v| v.get("id").and_then(Value::as_str).map(str::to_string))
        .unwrap_or_default()
}

/// Answers requests from `input` one at a time until end of input. Malformed
/// requests and model failures produce `ok: false` responses.
pub fn serve<R, W, F>(input: R, mut output: W, handler: F) -> std::io::Result<()>
where
    R: BufRead,
    W: Write,
    F: Fn(Task, &ImagePair) -> Result<Prediction>,
{
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let reply = match Request::parse(&line) {
            Ok((id, task, pair)) => match handler(task, &pair) {
                Ok(p) => response_line(&id, Ok(&p)),
                Err(e) => response_line(&id, Err(&e.to_string())),
            },
            Err(e) => response_line(&salvage_id(&line), Err(&e.to_string())),
        };
        writeln!(output, "{reply}")?;
        output.flush()?;
    }
    Ok(())
}
