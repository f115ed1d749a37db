//! JSON form of kernels: `{"form": ..., "params": {...}}`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{Kernel, KernelForm, Matrix};
use crate::error::{Error, Result};

/// A scalar (for `d = 1`, or broadcast to every entry) or explicit rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Scalar(f64),
    Rows(Vec<Vec<f64>>),
}

impl MatrixSpec {
    pub fn dim(&self) -> Option<usize> {
        match self {
            MatrixSpec::Scalar(_) => None,
            MatrixSpec::Rows(r) => Some(r.len()),
        }
    }

    pub fn to_matrix(&self, dim: usize) -> Result<Matrix> {
        match self {
            MatrixSpec::Scalar(v) => Ok(DMatrix::from_element(dim, dim, *v)),
            MatrixSpec::Rows(rows) => {
                if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
                    return Err(Error::Dimension { expected: dim, got: rows.len() });
                }
                Ok(DMatrix::from_fn(dim, dim, |i, j| rows[i][j]))
            }
        }
    }

    pub fn from_matrix(m: &Matrix) -> Self {
        if m.nrows() == 1 {
            MatrixSpec::Scalar(m[(0, 0)])
        } else {
            MatrixSpec::Rows((0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", content = "params", rename_all = "snake_case")]
pub enum KernelSpec {
    Exponential { alpha: MatrixSpec, beta: MatrixSpec },
    PowerLaw { scale: MatrixSpec, exponent: f64, cutoff: f64 },
    Grid { step: f64, values: Vec<MatrixSpec> },
}

fn common_dim(specs: &[&MatrixSpec]) -> Result<usize> {
    let mut dim = None;
    for s in specs {
        if let Some(d) = s.dim() {
            match dim {
                Some(e) if e != d => return Err(Error::Dimension { expected: e, got: d }),
                _ => dim = Some(d),
            }
        }
    }
    Ok(dim.unwrap_or(1))
}

impl KernelSpec {
    pub fn build(&self) -> Result<Kernel> {
        match self {
            KernelSpec::Exponential { alpha, beta } => {
                let d = common_dim(&[alpha, beta])?;
                Kernel::exponential(alpha.to_matrix(d)?, beta.to_matrix(d)?)
            }
            KernelSpec::PowerLaw { scale, exponent, cutoff } => {
                let d = common_dim(&[scale])?;
                Kernel::power_law(scale.to_matrix(d)?, *exponent, *cutoff)
            }
            KernelSpec::Grid { step, values } => {
                let refs: Vec<&MatrixSpec> = values.iter().collect();
                let d = common_dim(&refs)?;
                let mats = values.iter().map(|v| v.to_matrix(d)).collect::<Result<Vec<_>>>()?;
                Kernel::grid(*step, mats)
            }
        }
    }
}

impl From<&Kernel> for KernelSpec {
    fn from(k: &Kernel) -> Self {
        match k.form() {
            KernelForm::Exponential { alpha, beta } => KernelSpec::Exponential {
                alpha: MatrixSpec::from_matrix(alpha),
                beta: MatrixSpec::from_matrix(beta),
            },
            KernelForm::PowerLawTail { scale, exponent, cutoff } => KernelSpec::PowerLaw {
                scale: MatrixSpec::from_matrix(scale),
                exponent: *exponent,
                cutoff: *cutoff,
            },
            KernelForm::GridSampled { step, values } => KernelSpec::Grid {
                step: *step,
                values: values.iter().map(MatrixSpec::from_matrix).collect(),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip() {
        let text = r#"{"form":"exponential","params":{"alpha":[[0.3,0.1],[0.0,0.2]],"beta":2.0}}"#;
        let spec: KernelSpec = serde_json::from_str(text).unwrap();
        let k = spec.build().unwrap();
        assert_eq!(k.dim(), 2);
        assert_eq!(k.entry(0, 1, 0.0), 0.1);
        let back = KernelSpec::from(&k);
        let again: KernelSpec = serde_json::from_str(&serde_json::to_string(&back).unwrap()).unwrap();
        assert_eq!(again.build().unwrap(), k);

        let p: KernelSpec =
            serde_json::from_str(r#"{"form":"power_law","params":{"scale":0.5,"exponent":0.7,"cutoff":1}}"#)
                .unwrap();
        assert!(p.build().unwrap().l1().is_ok());
        let g: KernelSpec = serde_json::from_str(r#"{"form":"grid","params":{"step":0.1,"values":[1,0.5]}}"#)
            .unwrap();
        assert!((g.build().unwrap().l1().unwrap()[(0, 0)] - 0.15).abs() < 1e-15);
    }

    #[test]
    fn mismatched_dimensions_fail() {
        let spec = KernelSpec::Exponential {
            alpha: MatrixSpec::Rows(vec![vec![0.1, 0.1], vec![0.1, 0.1]]),
            beta: MatrixSpec::Rows(vec![vec![1.0]]),
        };
        assert!(matches!(spec.build(), Err(Error::Dimension { .. })));
    }
}
