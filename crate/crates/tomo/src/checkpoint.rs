//! JSON model checkpoints.
//!
//! Floats are written in their shortest round-tripping decimal form and read
//! back with correctly rounded parsing, so save → load is bit-exact.

use std::path::Path;

use ndo_core::ndo::{Field, NdoParams, Set, Shape};
use serde::{Deserialize, Serialize};

use crate::error::{read_file, write_file, Result, TomoError};

pub const FORMAT: &str = "ndo-checkpoint";
pub const VERSION: u32 = 1;
pub const BIT_ORDER: &str = "msb-first";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Arrays {
    weights: Vec<Vec<f64>>,
    mixing: Vec<Vec<f64>>,
    visible_bias: Vec<f64>,
    hidden_bias: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    aux_bias: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckpointFile {
    format: String,
    version: u32,
    bit_order: String,
    n_visible: usize,
    n_hidden: usize,
    n_aux: usize,
    lambda: Arrays,
    mu: Arrays,
}

fn rows(flat: &[f64], width: usize) -> Vec<Vec<f64>> {
    if width == 0 {
        return Vec::new();
    }
    flat.chunks(width).map(<[f64]>::to_vec).collect()
}

fn arrays(params: &NdoParams, set: Set) -> Arrays {
    let n = params.shape().n_visible;
    Arrays {
        weights: rows(params.field(set, Field::Weights), n),
        mixing: rows(params.field(set, Field::Mixing), n),
        visible_bias: params.field(set, Field::VisibleBias).to_vec(),
        hidden_bias: params.field(set, Field::HiddenBias).to_vec(),
        aux_bias: match set {
            Set::Lambda => Some(params.field(set, Field::AuxBias).to_vec()),
            Set::Mu => None,
        },
    }
}

pub fn to_json(params: &NdoParams) -> String {
    let s = params.shape();
    let file = CheckpointFile {
        format: FORMAT.into(),
        version: VERSION,
        bit_order: BIT_ORDER.into(),
        n_visible: s.n_visible,
        n_hidden: s.n_hidden,
        n_aux: s.n_aux,
        lambda: arrays(params, Set::Lambda),
        mu: arrays(params, Set::Mu),
    };
    let mut out = serde_json::to_string_pretty(&file).expect("checkpoint serialization cannot fail");
    out.push('\n');
    out
}

pub fn from_json(text: &str, source_name: &str) -> Result<NdoParams> {
    let bad = |message: String| TomoError::Format {
        source_name: source_name.to_string(),
        message,
    };
    let file: CheckpointFile = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
    if file.format != FORMAT {
        return Err(bad(format!("format tag \"{}\" is not \"{FORMAT}\"", file.format)));
    }
    if file.version != VERSION {
        return Err(bad(format!("unsupported checkpoint version {}", file.version)));
    }
    if file.bit_order != BIT_ORDER {
        return Err(bad(format!("unsupported bit order \"{}\"", file.bit_order)));
    }
    let shape = Shape::new(file.n_visible, file.n_hidden, file.n_aux)?;
    let mut params = NdoParams::zeros(shape);
    for (set, a) in [(Set::Lambda, &file.lambda), (Set::Mu, &file.mu)] {
        let mut fill = |field: Field, values: Vec<f64>, name: &str| -> Result<()> {
            let dst = params.field_mut(set, field);
            if dst.len() != values.len() {
                return Err(bad(format!(
                    "{name} has {} entries, expected {}",
                    values.len(),
                    dst.len()
                )));
            }
            dst.copy_from_slice(&values);
            Ok(())
        };
        let flatten = |m: &[Vec<f64>], name: &str| -> Result<Vec<f64>> {
            if m.iter().any(|r| r.len() != file.n_visible) {
                return Err(bad(format!("{name} rows must have {} entries", file.n_visible)));
            }
            Ok(m.concat())
        };
        fill(Field::Weights, flatten(&a.weights, "weights")?, "weights")?;
        fill(Field::Mixing, flatten(&a.mixing, "mixing")?, "mixing")?;
        fill(Field::VisibleBias, a.visible_bias.clone(), "visible_bias")?;
        fill(Field::HiddenBias, a.hidden_bias.clone(), "hidden_bias")?;
        match (set, &a.aux_bias) {
            (Set::Lambda, Some(d)) => fill(Field::AuxBias, d.clone(), "aux_bias")?,
            (Set::Lambda, None) => return Err(bad("lambda.aux_bias is missing".into())),
            (Set::Mu, Some(_)) => return Err(bad("mu has no aux_bias".into())),
            (Set::Mu, None) => {}
        }
    }
    Ok(NdoParams::from_values(shape, params.values().to_vec())?)
}

pub fn save_checkpoint(params: &NdoParams, path: &Path) -> Result<()> {
    write_file(path, &to_json(params))
}

pub fn load_checkpoint(path: &Path) -> Result<NdoParams> {
    from_json(&read_file(path)?, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndo_core::rng;

    #[test]
    fn round_trip_is_bit_exact() {
        let shape = Shape::new(3, 2, 2).unwrap();
        let p = NdoParams::random_init(shape, 1.7, &mut rng::stream(5, 0));
        let mut p = p;
        p.values_mut()[0] = 1.0 / 3.0;
        p.values_mut()[1] = -2.2250738585072014e-308;
        let back = from_json(&to_json(&p), "t").unwrap();
        assert_eq!(back.shape(), shape);
        for (a, b) in p.values().iter().zip(back.values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn records_conventions() {
        let text = to_json(&NdoParams::zeros(Shape::new(2, 1, 1).unwrap()));
        assert!(text.contains("\"bit_order\": \"msb-first\""));
        assert!(text.contains("\"version\": 1"));
    }

    #[test]
    fn rejects_tampered_files() {
        let text = to_json(&NdoParams::zeros(Shape::new(2, 1, 1).unwrap()));
        assert!(from_json(&text.replace("msb-first", "lsb-first"), "t").is_err());
        assert!(from_json(&text.replace("\"version\": 1", "\"version\": 2"), "t").is_err());
        assert!(from_json(&text.replace("\"n_hidden\": 1", "\"n_hidden\": 2"), "t").is_err());
        assert!(from_json("{", "t").is_err());
    }
}
