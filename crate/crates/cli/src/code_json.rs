//! JSON description of an encoding isometry with its charges.
//!
//! ```json
//! {
//!   "name": "example",
//!   "isometry": { "re": [[1, 0], [0, 0], [0, 0], [0, 1]], "im": [[0, 0], [0, 0], [0, 0], [0, 0]] },
//!   "physical": [{ "label": "P0", "dim": 2 }, { "label": "P1", "dim": 2 }],
//!   "x_l": { "re": [[0, 0], [0, 1]] },
//!   "x_p": [{ "re": [[0, 0], [0, 1]] }, { "re": [[0, 0], [0, 1]] }]
//! }
//! ```
//!
//! Matrices are row-major; `im` may be omitted for real matrices.

use serde::{Deserialize, Serialize};
use symrec::linalg::{c, CMat, Layout};
use symrec::qec::CodeDescription;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    pub re: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubsystemJson {
    pub label: String,
    pub dim: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CodeJson {
    pub name: String,
    pub isometry: MatrixJson,
    pub physical: Vec<SubsystemJson>,
    pub x_l: MatrixJson,
    pub x_p: Vec<MatrixJson>,
}

impl MatrixJson {
    pub fn from_matrix(m: &CMat) -> Self {
        let re = (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)].re).collect()).collect();
        let im: Vec<Vec<f64>> = (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)].im).collect()).collect();
        let has_im = im.iter().flatten().any(|&v| v != 0.0);
        MatrixJson { re, im: has_im.then_some(im) }
    }

    pub fn to_matrix(&self, what: &str) -> Result<CMat> {
        let rows = self.re.len();
        let cols = self.re.first().map(|r| r.len()).unwrap_or(0);
        if rows == 0 || cols == 0 {
            return Err(Error::Config(format!("{what}: empty matrix")));
        }
        if self.re.iter().any(|r| r.len() != cols) {
            return Err(Error::Config(format!("{what}: ragged rows in `re`")));
        }
        if let Some(im) = &self.im {
            if im.len() != rows || im.iter().any(|r| r.len() != cols) {
                return Err(Error::Config(format!("{what}: `im` shape differs from `re`")));
            }
        }
        let m = CMat::from_fn(rows, cols, |i, j| {
            c(self.re[i][j], self.im.as_ref().map(|im| im[i][j]).unwrap_or(0.0))
        });
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Config(format!("{what}: non-finite entry")));
        }
        Ok(m)
    }
}

impl CodeJson {
    pub fn from_code(code: &CodeDescription) -> Self {
        CodeJson {
            name: code.name.clone(),
            isometry: MatrixJson::from_matrix(&code.isometry),
            physical: code
                .physical
                .parts()
                .iter()
                .map(|p| SubsystemJson { label: p.label.clone(), dim: p.dim })
                .collect(),
            x_l: MatrixJson::from_matrix(&code.x_l),
            x_p: code.x_p.iter().map(MatrixJson::from_matrix).collect(),
        }
    }

    pub fn to_code(&self) -> Result<CodeDescription> {
        let parts: Vec<(&str, usize)> = self.physical.iter().map(|p| (p.label.as_str(), p.dim)).collect();
        let layout = Layout::new(&parts)?;
        let x_p = self
            .x_p
            .iter()
            .enumerate()
            .map(|(i, m)| m.to_matrix(&format!("x_p[{i}]")))
            .collect::<Result<Vec<_>>>()?;
        Ok(CodeDescription::new(&self.name, self.isometry.to_matrix("isometry")?, layout, self.x_l.to_matrix("x_l")?, x_p)?)
    }
}

pub fn parse_code(text: &str) -> Result<CodeDescription> {
    let json: CodeJson = serde_json::from_str(text).map_err(|e| Error::Config(format!("code description: {e}")))?;
    json.to_code()
}

pub fn code_to_json(code: &CodeDescription) -> Result<String> {
    Ok(serde_json::to_string_pretty(&CodeJson::from_code(code))?)
}
