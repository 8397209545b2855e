//! Named dense tensors in a small JSON container.
//!
//! A file holds either one object `{"name", "shape", "values"}` or an array
//! of them. `values` is the flat row-major payload.

use serde::{Deserialize, Serialize};

use crate::error::{bail, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

impl Tensor {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let t = Self {
            name: name.into(),
            shape,
            values,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        let n: usize = self.shape.iter().product();
        if self.shape.is_empty() || self.shape.contains(&0) {
            bail!(
                "tensor `{}` has degenerate shape {:?}",
                self.name,
                self.shape
            );
        }
        if n != self.values.len() {
            bail!(
                "tensor `{}` of shape {:?} needs {n} values, found {}",
                self.name,
                self.shape,
                self.values.len()
            );
        }
        Ok(())
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(Tensor),
    Many(Vec<Tensor>),
}

pub fn parse_tensors(text: &str) -> Result<Vec<Tensor>> {
    let ts = match serde_json::from_str::<OneOrMany>(text)? {
        OneOrMany::One(t) => vec![t],
        OneOrMany::Many(ts) => ts,
    };
    for t in &ts {
        t.validate()?;
    }
    Ok(ts)
}

pub fn write_tensors(ts: &[Tensor]) -> Result<String> {
    Ok(serde_json::to_string_pretty(ts)? + "\n")
}
