//! Plain-text model files.
//!
//! ```text
//! cccp-model rb
//! distance_cap 10
//! time_scale 1.0000000000000000e1
//! layers 2
//! layer 23 16 relu
//! w <row-major weights>
//! b <biases>
//! ...
//! ```
//!
//! Floats are written with 17 significant digits so loading restores the
//! exact values.

use cccp_core::nn::{Activation, Layer, ModelParams};
use cccp_core::pb::PbModel;
use cccp_core::rb::{FeatureLayout, RbModel, TimeScale};

#[derive(Debug, thiserror::Error)]
pub enum ModelFileError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("expected a `{expected}` model, found `{found}`")]
    WrongKind { expected: &'static str, found: String },
    #[error("invalid model: {0}")]
    Invalid(String),
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_params(out: &mut String, params: &ModelParams) {
    out.push_str(&format!("layers {}\n", params.layers().len()));
    for l in params.layers() {
        out.push_str(&format!("layer {} {} {}\n", l.inputs(), l.outputs(), l.activation()));
        let w: Vec<String> = l.weights().iter().map(|&v| fmt_f64(v)).collect();
        out.push_str(&format!("w {}\n", w.join(" ")));
        let b: Vec<String> = l.bias().iter().map(|&v| fmt_f64(v)).collect();
        out.push_str(&format!("b {}\n", b.join(" ")));
    }
}

pub fn rb_to_text(model: &RbModel) -> String {
    let mut out = String::from("cccp-model rb\n");
    out.push_str(&format!("distance_cap {}\n", model.layout.distance_cap));
    out.push_str(&format!("time_scale {}\n", fmt_f64(model.time_scale.max_log_delta)));
    write_params(&mut out, &model.params);
    out
}

pub fn pb_to_text(model: &PbModel) -> String {
    let mut out = String::from("cccp-model pb\n");
    out.push_str(&format!("max_slots {}\n", model.max_slots));
    write_params(&mut out, &model.params);
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    line: usize,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            inner: text.lines().enumerate(),
            line: 0,
        }
    }

    fn err(&self, reason: impl Into<String>) -> ModelFileError {
        ModelFileError::Malformed {
            line: self.line,
            reason: reason.into(),
        }
    }

    /// Next line split after `key`.
    fn expect(&mut self, key: &str) -> Result<&'a str, ModelFileError> {
        let (i, l) = self.inner.next().ok_or_else(|| self.err(format!("missing `{key}` line")))?;
        self.line = i + 1;
        match l.split_once(' ') {
            Some((k, rest)) if k == key => Ok(rest),
            None if l == key => Ok(""),
            _ => Err(self.err(format!("expected `{key}`"))),
        }
    }

    fn number<T: std::str::FromStr>(&mut self, key: &str) -> Result<T, ModelFileError> {
        let v = self.expect(key)?;
        v.trim().parse().map_err(|_| self.err(format!("bad {key} `{v}`")))
    }

    fn floats(&mut self, key: &str, n: usize) -> Result<Vec<f64>, ModelFileError> {
        let v = self.expect(key)?;
        let parsed: Result<Vec<f64>, _> = v.split_whitespace().map(str::parse::<f64>).collect();
        let parsed = parsed.map_err(|_| self.err(format!("bad number in `{key}`")))?;
        if parsed.len() != n {
            return Err(self.err(format!("`{key}` has {} values, expected {n}", parsed.len())));
        }
        Ok(parsed)
    }
}

fn read_kind(lines: &mut Lines<'_>, expected: &'static str) -> Result<(), ModelFileError> {
    let found = lines.expect("cccp-model")?;
    if found != expected {
        return Err(ModelFileError::WrongKind {
            expected,
            found: found.into(),
        });
    }
    Ok(())
}

fn read_params(lines: &mut Lines<'_>) -> Result<ModelParams, ModelFileError> {
    let count: usize = lines.number("layers")?;
    let mut layers = Vec::with_capacity(count);
    for _ in 0..count {
        let header = lines.expect("layer")?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(lines.err("layer needs inputs, outputs and activation"));
        }
        let inputs: usize = parts[0].parse().map_err(|_| lines.err("bad layer inputs"))?;
        let outputs: usize = parts[1].parse().map_err(|_| lines.err("bad layer outputs"))?;
        let activation: Activation = parts[2].parse().map_err(|_| lines.err(format!("unknown activation `{}`", parts[2])))?;
        let weights = lines.floats("w", inputs * outputs)?;
        let bias = lines.floats("b", outputs)?;
        layers.push(Layer::new(inputs, outputs, weights, bias, activation).map_err(|e| ModelFileError::Invalid(e.to_string()))?);
    }
    ModelParams::new(layers).map_err(|e| ModelFileError::Invalid(e.to_string()))
}

pub fn rb_from_text(text: &str) -> Result<RbModel, ModelFileError> {
    let mut lines = Lines::new(text);
    read_kind(&mut lines, "rb")?;
    let distance_cap = lines.number("distance_cap")?;
    let max_log_delta = lines.number("time_scale")?;
    let params = read_params(&mut lines)?;
    RbModel::from_parts(params, FeatureLayout { distance_cap }, TimeScale { max_log_delta })
        .map_err(|e| ModelFileError::Invalid(e.to_string()))
}

pub fn pb_from_text(text: &str) -> Result<PbModel, ModelFileError> {
    let mut lines = Lines::new(text);
    read_kind(&mut lines, "pb")?;
    let max_slots = lines.number("max_slots")?;
    let params = read_params(&mut lines)?;
    PbModel::from_parts(params, max_slots).map_err(|e| ModelFileError::Invalid(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rb() -> RbModel {
        let layout = FeatureLayout::default();
        let params = ModelParams::init(layout.dim(), &[4], Activation::Relu, 1, Activation::Sigmoid, 9).unwrap();
        RbModel::from_parts(params, layout, TimeScale { max_log_delta: 1.0 / 3.0 }).unwrap()
    }

    #[test]
    fn rb_round_trip_is_exact() {
        let m = rb();
        let back = rb_from_text(&rb_to_text(&m)).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn pb_round_trip_is_exact() {
        let params = ModelParams::init(
            cccp_core::pb::PredictionContext::input_dim(3),
            &[5, 4],
            Activation::Relu,
            4,
            Activation::Softmax,
            2,
        )
        .unwrap();
        let m = PbModel::from_parts(params, 3).unwrap();
        assert_eq!(pb_from_text(&pb_to_text(&m)).unwrap(), m);
    }

    #[test]
    fn wrong_kind_and_truncation() {
        let text = rb_to_text(&rb());
        assert!(matches!(pb_from_text(&text), Err(ModelFileError::WrongKind { .. })));
        let cut: String = text.lines().take(6).map(|l| format!("{l}\n")).collect();
        assert!(matches!(rb_from_text(&cut), Err(ModelFileError::Malformed { .. })));
    }
}
