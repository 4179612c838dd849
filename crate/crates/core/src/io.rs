//! File formats: channel sets (`.chset.json`), weights (`.wmat.json`),
//! solutions, convergence traces and sweep results.
//!
//! Matrices are stored as `{ "rows", "cols", "data" }` with `data` the
//! row-major list of `[re, im]` pairs.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelSet;
use crate::error::{Error, Result};
use crate::eval::{DigitalBaseline, SweepResult, TrialRecord};
use crate::linalg::{c, CMat, CVec};
use crate::solver::AoTrace;
use crate::system::{AirFcParams, ObjectiveValue};

pub const CHSET_FORMAT: &str = "airfc-chset";
pub const WMAT_FORMAT: &str = "airfc-wmat";
pub const PARAMS_FORMAT: &str = "airfc-params";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<[f64; 2]>,
}

impl From<&CMat> for MatrixJson {
    fn from(m: &CMat) -> Self {
        let data = (0..m.nrows())
            .flat_map(|i| (0..m.ncols()).map(move |j| [m[(i, j)].re, m[(i, j)].im]))
            .collect();
        MatrixJson {
            rows: m.nrows(),
            cols: m.ncols(),
            data,
        }
    }
}

impl MatrixJson {
    pub fn to_matrix(&self) -> std::result::Result<CMat, String> {
        if self.data.len() != self.rows * self.cols {
            return Err(format!(
                "{}x{} matrix with {} entries",
                self.rows,
                self.cols,
                self.data.len()
            ));
        }
        if self.data.iter().flatten().any(|v| !v.is_finite()) {
            return Err("non-finite matrix entry".into());
        }
        Ok(CMat::from_fn(self.rows, self.cols, |i, j| {
            let [re, im] = self.data[i * self.cols + j];
            c(re, im)
        }))
    }
}

fn vector_json(v: &CVec) -> MatrixJson {
    MatrixJson::from(&CMat::from_column_slice(v.len(), 1, v.as_slice()))
}

fn vector_from(m: &MatrixJson) -> std::result::Result<CVec, String> {
    let mat = m.to_matrix()?;
    if mat.ncols() != 1 {
        return Err(format!(
            "expected a column vector, got {}x{}",
            mat.nrows(),
            mat.ncols()
        ));
    }
    Ok(mat.column(0).into_owned())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSetJson {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub carrier_hz: f64,
    pub n_t: usize,
    pub n_r: usize,
    pub group_sizes: Vec<usize>,
    pub direct: Option<MatrixJson>,
    pub hops: Vec<MatrixJson>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsJson {
    pub format: String,
    pub version: u32,
    pub weights: MatrixJson,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bias: Option<MatrixJson>,
    /// Number of leading output coordinates holding class logits.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classes: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsJson {
    pub format: String,
    pub version: u32,
    pub precoder: MatrixJson,
    pub combiner: MatrixJson,
    pub gains: Vec<MatrixJson>,
}

fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| format_err(path, e.to_string()))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn check_header(path: &Path, format: &str, version: u32, expected: &str) -> Result<()> {
    if format != expected {
        return Err(format_err(
            path,
            format!("format is {format:?}, expected {expected:?}"),
        ));
    }
    if version != FORMAT_VERSION {
        return Err(format_err(path, format!("unsupported version {version}")));
    }
    Ok(())
}

pub fn channel_set_to_json(ch: &ChannelSet) -> ChannelSetJson {
    ChannelSetJson {
        format: CHSET_FORMAT.into(),
        version: FORMAT_VERSION,
        seed: ch.seed,
        carrier_hz: ch.carrier_hz,
        n_t: ch.n_t(),
        n_r: ch.n_r(),
        group_sizes: ch.group_sizes(),
        direct: ch.direct.as_ref().map(MatrixJson::from),
        hops: ch.hops.iter().map(MatrixJson::from).collect(),
    }
}

pub fn save_channel_set(path: &Path, ch: &ChannelSet) -> Result<()> {
    write_json(path, &channel_set_to_json(ch))
}

pub fn load_channel_set(path: &Path) -> Result<ChannelSet> {
    let doc: ChannelSetJson = read_json(path)?;
    check_header(path, &doc.format, doc.version, CHSET_FORMAT)?;
    let err = |e: String| format_err(path, e);
    let hops = doc
        .hops
        .iter()
        .map(|m| m.to_matrix().map_err(err))
        .collect::<Result<Vec<_>>>()?;
    let direct = doc
        .direct
        .as_ref()
        .map(|m| m.to_matrix().map_err(err))
        .transpose()?;
    let ch =
        ChannelSet::new(direct, hops, doc.carrier_hz, doc.seed).map_err(|e| err(e.to_string()))?;
    if ch.n_t() != doc.n_t || ch.n_r() != doc.n_r || ch.group_sizes() != doc.group_sizes {
        return Err(err(
            "declared dimensions do not match the stored matrices".into()
        ));
    }
    Ok(ch)
}

/// External FC weights. Without a bias the layer is purely linear; without
/// `classes` every output coordinate is a logit.
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalWeights {
    pub weights: CMat,
    pub bias: CVec,
    pub classes: usize,
}

pub fn load_weights(path: &Path) -> Result<ExternalWeights> {
    let doc: WeightsJson = read_json(path)?;
    check_header(path, &doc.format, doc.version, WMAT_FORMAT)?;
    let err = |e: String| format_err(path, e);
    let weights = doc.weights.to_matrix().map_err(err)?;
    if weights.nrows() != weights.ncols() || weights.nrows() == 0 {
        return Err(err(format!(
            "weights must be square, got {}x{}",
            weights.nrows(),
            weights.ncols()
        )));
    }
    let n = weights.nrows();
    let bias = match &doc.bias {
        Some(b) => vector_from(b).map_err(err)?,
        None => CVec::zeros(n),
    };
    if bias.len() != n {
        return Err(err(format!("bias has length {}, expected {n}", bias.len())));
    }
    let classes = doc.classes.unwrap_or(n);
    if classes == 0 || classes > n {
        return Err(err(format!("classes must be in 1..={n}, got {classes}")));
    }
    Ok(ExternalWeights {
        weights,
        bias,
        classes,
    })
}

pub fn save_weights(path: &Path, baseline: &DigitalBaseline) -> Result<()> {
    let doc = WeightsJson {
        format: WMAT_FORMAT.into(),
        version: FORMAT_VERSION,
        weights: MatrixJson::from(&baseline.weights),
        bias: Some(vector_json(&baseline.bias)),
        classes: Some(baseline.classes),
    };
    write_json(path, &doc)
}

pub fn params_to_json(p: &AirFcParams) -> ParamsJson {
    ParamsJson {
        format: PARAMS_FORMAT.into(),
        version: FORMAT_VERSION,
        precoder: MatrixJson::from(&p.precoder),
        combiner: MatrixJson::from(&p.combiner),
        gains: p.gains.iter().map(vector_json).collect(),
    }
}

pub fn save_params(path: &Path, p: &AirFcParams) -> Result<()> {
    write_json(path, &params_to_json(p))
}

pub fn load_params(path: &Path) -> Result<AirFcParams> {
    let doc: ParamsJson = read_json(path)?;
    check_header(path, &doc.format, doc.version, PARAMS_FORMAT)?;
    let err = |e: String| format_err(path, e);
    Ok(AirFcParams {
        precoder: doc.precoder.to_matrix().map_err(err)?,
        combiner: doc.combiner.to_matrix().map_err(err)?,
        gains: doc
            .gains
            .iter()
            .map(|g| vector_from(g).map_err(err))
            .collect::<Result<_>>()?,
    })
}

/// One row of the convergence trace CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub imitation_error: f64,
    pub noise_penalty: f64,
    pub total: f64,
    pub max_violation: f64,
}

pub fn trace_rows(trace: &AoTrace) -> Vec<TraceRow> {
    trace
        .objectives
        .iter()
        .zip(&trace.max_violation)
        .enumerate()
        .map(|(iteration, (o, v))| TraceRow {
            iteration,
            imitation_error: o.imitation_error,
            noise_penalty: o.noise_penalty,
            total: o.total,
            max_violation: *v,
        })
        .collect()
}

fn write_csv_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn read_csv_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize()
        .map(|row| row.map_err(Error::from))
        .collect()
}

/// Columns: `iteration,imitation_error,noise_penalty,total,max_violation`;
/// iteration 0 is the initial point.
pub fn write_trace_csv(path: &Path, trace: &AoTrace) -> Result<()> {
    write_csv_rows(path, &trace_rows(trace))
}

pub fn read_trace_csv(path: &Path) -> Result<Vec<TraceRow>> {
    read_csv_rows(path)
}

/// One row per (grid point, trial), in that order; columns follow the
/// fields of [`TrialRecord`].
pub fn write_trials_csv(path: &Path, results: &[SweepResult]) -> Result<()> {
    let rows: Vec<&TrialRecord> = results.iter().flat_map(|r| &r.trials).collect();
    write_csv_rows(path, &rows)
}

pub fn read_trials_csv(path: &Path) -> Result<Vec<TrialRecord>> {
    read_csv_rows(path)
}

pub fn write_objective_json(path: &Path, value: &ObjectiveValue) -> Result<()> {
    write_json(path, value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_chain, random_params};

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!("airfc-io-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn matrix_layout_is_row_major() {
        let m = CMat::from_fn(2, 3, |i, j| c(i as f64, j as f64));
        let j = MatrixJson::from(&m);
        assert_eq!(j.data[1], [0.0, 1.0]);
        assert_eq!(j.data[3], [1.0, 0.0]);
        assert_eq!(j.to_matrix().unwrap(), m);
        let bad = MatrixJson {
            rows: 2,
            cols: 2,
            data: vec![[0.0, 0.0]; 3],
        };
        assert!(bad.to_matrix().is_err());
    }

    #[test]
    fn channel_set_round_trip_is_exact() {
        for direct in [false, true] {
            let ch = random_chain(&[3, 2], 4, direct, 9);
            let p = tmp(&format!("ch{direct}.chset.json"));
            save_channel_set(&p, &ch).unwrap();
            assert_eq!(load_channel_set(&p).unwrap(), ch);
        }
    }

    #[test]
    fn malformed_files_are_rejected() {
        let p = tmp("bad.chset.json");
        fs::write(&p, "{\"format\": \"airfc-chset\"").unwrap();
        assert!(matches!(load_channel_set(&p), Err(Error::Format { .. })));
        let ch = random_chain(&[2], 3, false, 1);
        let mut doc = channel_set_to_json(&ch);
        doc.n_t = 5;
        write_json(&p, &doc).unwrap();
        assert!(matches!(load_channel_set(&p), Err(Error::Format { .. })));
        doc = channel_set_to_json(&ch);
        doc.format = "other".into();
        write_json(&p, &doc).unwrap();
        assert!(matches!(load_channel_set(&p), Err(Error::Format { .. })));
    }

    #[test]
    fn params_round_trip() {
        let ch = random_chain(&[3, 2], 4, false, 2);
        let params = random_params(&ch, 4, 3);
        let p = tmp("params.json");
        save_params(&p, &params).unwrap();
        assert_eq!(load_params(&p).unwrap(), params);
    }

    #[test]
    fn weights_defaults() {
        let w = CMat::identity(3, 3);
        let doc = WeightsJson {
            format: WMAT_FORMAT.into(),
            version: FORMAT_VERSION,
            weights: MatrixJson::from(&w),
            bias: None,
            classes: None,
        };
        let p = tmp("w.wmat.json");
        write_json(&p, &doc).unwrap();
        let ext = load_weights(&p).unwrap();
        assert_eq!(ext.weights, w);
        assert_eq!(ext.bias, CVec::zeros(3));
        assert_eq!(ext.classes, 3);
    }
}
