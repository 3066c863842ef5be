//! File formats: the shared JSON model schema, certificate JSON, and CSV
//! emission with provenance comment lines.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{GmdpError, Result};
use crate::linalg::{Col, Mat};
use crate::model::{FiniteGmdp, GaussianLtiGmdp, LtiInit, Output, OutputMetric, Trace};

pub fn mat_to_rows(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

pub fn rows_to_mat(rows: &[Vec<f64>]) -> Result<Mat> {
    if rows.is_empty() {
        return Ok(Mat::zeros(0, 0));
    }
    let cols = rows[0].len();
    if rows.iter().any(|r| r.len() != cols) {
        return Err(GmdpError::InvalidArgument("ragged matrix rows".into()));
    }
    Ok(Mat::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitJson {
    Point(Vec<f64>),
    Gaussian { mean: Vec<f64>, cov: Vec<Vec<f64>> },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OutputsJson {
    Labels(Vec<usize>),
    Points(Vec<Vec<f64>>),
}

/// Shared JSON model schema (`"type": "finite" | "lti"`, matrices row-major).
#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ModelJson {
    Lti {
        a: Vec<Vec<f64>>,
        b: Vec<Vec<f64>>,
        b_w: Vec<Vec<f64>>,
        c: Vec<Vec<f64>>,
        init: InitJson,
        #[serde(skip_serializing_if = "Option::is_none")]
        input_bound: Option<f64>,
    },
    Finite {
        kernel: Vec<Vec<Vec<f64>>>,
        init: Vec<f64>,
        outputs: OutputsJson,
    },
}

impl ModelJson {
    pub fn from_lti(m: &GaussianLtiGmdp) -> Self {
        ModelJson::Lti {
            a: mat_to_rows(&m.a),
            b: mat_to_rows(&m.b),
            b_w: mat_to_rows(&m.b_w),
            c: mat_to_rows(&m.c),
            init: match &m.init {
                LtiInit::Point(x) => InitJson::Point(x.iter().copied().collect()),
                LtiInit::Gaussian { mean, cov } => InitJson::Gaussian {
                    mean: mean.iter().copied().collect(),
                    cov: mat_to_rows(cov),
                },
            },
            input_bound: m.input_bound,
        }
    }

    pub fn from_finite(m: &FiniteGmdp) -> Self {
        let outputs = if m.outputs.iter().all(|o| matches!(o, Output::Label(_))) {
            OutputsJson::Labels(
                m.outputs
                    .iter()
                    .map(|o| match o {
                        Output::Label(l) => *l,
                        _ => unreachable!(),
                    })
                    .collect(),
            )
        } else {
            OutputsJson::Points(
                m.outputs
                    .iter()
                    .map(|o| match o {
                        Output::Point(p) => p.iter().copied().collect(),
                        Output::Label(l) => vec![*l as f64],
                    })
                    .collect(),
            )
        };
        ModelJson::Finite {
            kernel: m.kernel.iter().map(mat_to_rows).collect(),
            init: m.init.iter().copied().collect(),
            outputs,
        }
    }

    pub fn into_lti(self) -> Result<GaussianLtiGmdp> {
        match self {
            ModelJson::Lti { a, b, b_w, c, init, input_bound } => {
                let init = match init {
                    InitJson::Point(x) => LtiInit::Point(Col::from_row_slice(&x)),
                    InitJson::Gaussian { mean, cov } => LtiInit::Gaussian {
                        mean: Col::from_row_slice(&mean),
                        cov: rows_to_mat(&cov)?,
                    },
                };
                GaussianLtiGmdp::new(
                    rows_to_mat(&a)?,
                    rows_to_mat(&b)?,
                    rows_to_mat(&b_w)?,
                    rows_to_mat(&c)?,
                    init,
                    input_bound,
                )
            }
            ModelJson::Finite { .. } => {
                Err(GmdpError::InvalidArgument("expected an lti model".into()))
            }
        }
    }

    pub fn into_finite(self) -> Result<FiniteGmdp> {
        match self {
            ModelJson::Finite { kernel, init, outputs } => {
                let kernel = kernel
                    .iter()
                    .map(|k| rows_to_mat(k))
                    .collect::<Result<Vec<_>>>()?;
                let (outputs, metric) = match outputs {
                    OutputsJson::Labels(ls) => {
                        (ls.into_iter().map(Output::Label).collect(), OutputMetric::Discrete)
                    }
                    OutputsJson::Points(ps) => (
                        ps.into_iter().map(|p| Output::Point(Col::from_row_slice(&p))).collect(),
                        OutputMetric::Euclidean,
                    ),
                };
                FiniteGmdp::new(kernel, Col::from_row_slice(&init), outputs, metric)
            }
            ModelJson::Lti { .. } => {
                Err(GmdpError::InvalidArgument("expected a finite model".into()))
            }
        }
    }
}

/// Certificate file: relation matrix, projection, and interface gains with
/// the certified `(ε, δ)` and the constraint parameters.
#[derive(Debug, Serialize, Deserialize)]
pub struct CertificateJson {
    pub m: Vec<Vec<f64>>,
    pub p: Vec<Vec<f64>>,
    pub r: Vec<Vec<f64>>,
    pub q: Vec<Vec<f64>>,
    pub k: Vec<Vec<f64>>,
    pub epsilon: f64,
    pub delta: f64,
    pub c1: f64,
    pub dof: usize,
}

/// Input file of the `lift-min-delta` command.
#[derive(Debug, Serialize, Deserialize)]
pub struct LiftProblemJson {
    pub delta: Vec<f64>,
    pub theta: Vec<f64>,
    pub relation: Vec<Vec<bool>>,
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text)?;
    Ok(())
}

/// FNV-1a hash of a configuration string, printed in CSV provenance lines
/// and used to detect stale pipeline artifacts.
pub fn config_hash(config: &str) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    for b in config.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Provenance attached to every emitted CSV.
#[derive(Debug, Clone, Copy)]
pub struct Provenance {
    pub seed: u64,
    pub config_hash: u64,
}

impl Provenance {
    pub fn comment_lines(&self) -> String {
        format!(
            "#tool-version={}\n#seed={}\n#config-hash={:016x}\n",
            env!("CARGO_PKG_VERSION"),
            self.seed,
            self.config_hash
        )
    }
}

/// Write a CSV with provenance comments and a header row.
pub fn write_csv<I>(path: &Path, provenance: &Provenance, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(provenance.comment_lines().as_bytes())?;
    writeln!(f, "{}", header.join(","))?;
    for row in rows {
        writeln!(f, "{}", row.join(","))?;
    }
    Ok(())
}

/// Export a trace as CSV with header `t,x_1..x_n,u_1..u_m,y_1..y_d`.
pub fn write_trace_csv(path: &Path, provenance: &Provenance, trace: &Trace) -> Result<()> {
    let n = match trace.states.first() {
        Some(crate::model::StatePoint::Vector(v)) => v.len(),
        Some(crate::model::StatePoint::Finite(_)) => 1,
        None => 0,
    };
    let m = match trace.inputs.first() {
        Some(crate::model::InputPoint::Vector(v)) => v.len(),
        Some(crate::model::InputPoint::Finite(_)) => 1,
        None => 0,
    };
    let d = match trace.outputs.first() {
        Some(Output::Point(v)) => v.len(),
        Some(Output::Label(_)) => 1,
        None => 0,
    };
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("x_{i}")));
    header.extend((1..=m).map(|i| format!("u_{i}")));
    header.extend((1..=d).map(|i| format!("y_{i}")));
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();

    let rows = (0..trace.states.len()).map(|t| {
        let mut row = vec![t.to_string()];
        match &trace.states[t] {
            crate::model::StatePoint::Vector(v) => row.extend(v.iter().map(|x| format!("{x:.12}"))),
            crate::model::StatePoint::Finite(i) => row.push(i.to_string()),
        }
        if t < trace.inputs.len() {
            match &trace.inputs[t] {
                crate::model::InputPoint::Vector(v) => {
                    row.extend(v.iter().map(|x| format!("{x:.12}")))
                }
                crate::model::InputPoint::Finite(i) => row.push(i.to_string()),
            }
        } else {
            row.extend(std::iter::repeat_n(String::new(), m));
        }
        match &trace.outputs[t] {
            Output::Point(v) => row.extend(v.iter().map(|x| format!("{x:.12}"))),
            Output::Label(l) => row.push(l.to_string()),
        }
        row
    });
    write_csv(path, provenance, &header_refs, rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lti_model_json_roundtrip() {
        let m = crate::casedata::office_full();
        let json = serde_json::to_string(&ModelJson::from_lti(&m)).unwrap();
        let back: ModelJson = serde_json::from_str(&json).unwrap();
        let m2 = back.into_lti().unwrap();
        assert_eq!(m.a, m2.a);
        assert_eq!(m.b_w, m2.b_w);
    }

    #[test]
    fn finite_model_json_roundtrip() {
        let m = FiniteGmdp::new(
            vec![Mat::from_row_slice(2, 2, &[0.9, 0.1, 0.2, 0.8])],
            Col::from_row_slice(&[0.5, 0.5]),
            vec![Output::Label(0), Output::Label(1)],
            OutputMetric::Discrete,
        )
        .unwrap();
        let json = serde_json::to_string(&ModelJson::from_finite(&m)).unwrap();
        let back: ModelJson = serde_json::from_str(&json).unwrap();
        let m2 = back.into_finite().unwrap();
        assert_eq!(m.kernel[0], m2.kernel[0]);
        assert_eq!(m.outputs, m2.outputs);
    }

    #[test]
    fn config_hash_is_stable() {
        assert_eq!(config_hash("abc"), config_hash("abc"));
        assert_ne!(config_hash("abc"), config_hash("abd"));
    }
}
