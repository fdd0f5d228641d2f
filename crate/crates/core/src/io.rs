//! File formats: model files (JSON with `{re, im}` complex entries), map
//! files, and CSV tables.
//!
//! Output is deterministic: identical inputs serialize to identical bytes.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CMat;
use crate::system::LtiSystem;

/// Serde adapter for a complex scalar: written as `{"re": x, "im": y}`,
/// read from that form or from a bare real number.
pub mod complex {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::linalg::C64;

    #[derive(Serialize, Deserialize)]
    #[serde(deny_unknown_fields)]
    pub(crate) struct Pair {
        pub re: f64,
        pub im: f64,
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    pub(crate) enum Loose {
        Real(f64),
        Pair(Pair),
    }

    impl From<Loose> for C64 {
        fn from(l: Loose) -> C64 {
            match l {
                Loose::Real(re) => C64::new(re, 0.0),
                Loose::Pair(p) => C64::new(p.re, p.im),
            }
        }
    }

    pub fn serialize<S: Serializer>(z: &C64, s: S) -> Result<S::Ok, S::Error> {
        Pair { re: z.re, im: z.im }.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<C64, D::Error> {
        Loose::deserialize(d).map(C64::from)
    }
}

/// Serde adapter for a dense complex matrix stored as an array of rows.
pub mod matrix {
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use super::complex::{Loose, Pair};
    use crate::linalg::{CMat, C64};

    pub fn serialize<S: Serializer>(m: &CMat, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<Pair>> = (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| Pair { re: m[(i, j)].re, im: m[(i, j)].im }).collect())
            .collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<CMat, D::Error> {
        let rows: Vec<Vec<Loose>> = Vec::deserialize(d)?;
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(D::Error::custom("ragged matrix rows"));
        }
        let mut data: Vec<C64> = Vec::with_capacity(nrows * ncols);
        for row in rows {
            data.extend(row.into_iter().map(C64::from));
        }
        Ok(CMat::from_row_slice(nrows, ncols, &data))
    }
}

/// Descriptive block carried alongside the matrices of a model file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelMetadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub benchmark: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spacing: Option<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub parameters: BTreeMap<String, serde_json::Value>,
}

/// Extra block written for reduced models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReductionBlock {
    pub method: String,
    pub r: usize,
    pub hsv: Vec<f64>,
    #[serde(with = "matrix")]
    pub vr: CMat,
    #[serde(with = "matrix")]
    pub wr: CMat,
}

/// On-disk model: dimensions, dense matrices and metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub n: usize,
    pub m: usize,
    pub q: usize,
    #[serde(with = "matrix")]
    pub a: CMat,
    #[serde(with = "matrix")]
    pub b: CMat,
    #[serde(with = "matrix")]
    pub c: CMat,
    #[serde(default)]
    pub metadata: ModelMetadata,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reduction: Option<ReductionBlock>,
}

impl ModelFile {
    pub fn from_system(sys: &LtiSystem, metadata: ModelMetadata) -> Self {
        ModelFile {
            n: sys.order(),
            m: sys.inputs(),
            q: sys.outputs(),
            a: sys.a().clone(),
            b: sys.b().clone(),
            c: sys.c().clone(),
            metadata,
            reduction: None,
        }
    }

    /// Validates the declared dimensions against the matrices.
    pub fn to_system(&self) -> Result<LtiSystem> {
        let sys = LtiSystem::new(self.a.clone(), self.b.clone(), self.c.clone())?;
        if sys.order() != self.n || sys.inputs() != self.m || sys.outputs() != self.q {
            return Err(Error::DimensionMismatch(format!(
                "declared (n, m, q) = ({}, {}, {}) but matrices give ({}, {}, {})",
                self.n,
                self.m,
                self.q,
                sys.order(),
                sys.inputs(),
                sys.outputs()
            )));
        }
        Ok(sys)
    }
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.display().to_string(), source }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse { path: path.display().to_string(), message: e.to_string() })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Parse { path: path.display().to_string(), message: e.to_string() })?;
    text.push('\n');
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn read_model(path: &Path) -> Result<(LtiSystem, ModelFile)> {
    let file: ModelFile = read_json(path)?;
    let sys = file.to_system().map_err(|e| match e {
        Error::InvalidSystem(msg) => Error::Parse { path: path.display().to_string(), message: msg },
        other => other,
    })?;
    Ok((sys, file))
}

/// Writes a CSV table; floats use 17 significant digits.
pub fn write_csv(path: &Path, header: &[String], rows: &[Vec<f64>]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for row in rows {
        w.write_record(row.iter().map(|v| fmt_sig17(*v))).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => io_err(path, source),
        other => Error::Parse { path: path.display().to_string(), message: format!("{other:?}") },
    }
}

/// `%.17g`-style formatting.
pub fn fmt_sig17(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    format!("{v:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c64;
    use proptest::prelude::*;

    #[test]
    fn model_file_round_trip() {
        let a = CMat::from_fn(2, 2, |i, j| c64(i as f64 - j as f64, 0.25 * (i + j) as f64));
        let b = CMat::from_fn(2, 1, |i, _| c64(1.0 + i as f64, 0.0));
        let c = CMat::from_fn(1, 2, |_, j| c64(0.0, -(j as f64)));
        let sys = LtiSystem::new(a, b, c).unwrap();
        let mut md = ModelMetadata { benchmark: Some("toy".into()), ..Default::default() };
        md.parameters.insert("h".into(), serde_json::json!(0.5));
        let file = ModelFile::from_system(&sys, md);
        let text = serde_json::to_string(&file).unwrap();
        let back: ModelFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back, file);
        assert_eq!(back.to_system().unwrap(), sys);
    }

    #[test]
    fn declared_dimensions_are_checked() {
        let text = r#"{"n":2,"m":1,"q":1,"a":[[-1]],"b":[[1]],"c":[[1]]}"#;
        let file: ModelFile = serde_json::from_str(text).unwrap();
        assert!(matches!(file.to_system(), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = r#"{"n":1,"m":1,"q":1,"a":[[-1]],"b":[[1]],"c":[[1]],"d":[[0]]}"#;
        assert!(serde_json::from_str::<ModelFile>(text).is_err());
    }

    #[test]
    fn sig17_round_trips() {
        for v in [0.1, -3.0e-300, 1.0 / 3.0, 12345.678] {
            assert_eq!(fmt_sig17(v).parse::<f64>().unwrap(), v);
        }
    }

    proptest! {
        #[test]
        fn arbitrary_entries_round_trip(
            n in 1usize..5,
            entries in prop::collection::vec((-1e300f64..1e300, -1e-300f64..1e-300), 25),
        ) {
            let a = CMat::from_fn(n, n, |i, j| c64(entries[i * 5 + j].0, entries[i * 5 + j].1));
            let b = CMat::from_fn(n, 1, |i, _| c64(entries[i].1, entries[i].0));
            let c = CMat::from_fn(1, n, |_, j| c64(entries[24 - j].0, 0.0));
            let sys = LtiSystem::new(a, b, c).unwrap();
            let text = serde_json::to_string(&ModelFile::from_system(&sys, ModelMetadata::default())).unwrap();
            let back: ModelFile = serde_json::from_str(&text).unwrap();
            prop_assert_eq!(back.to_system().unwrap(), sys);
        }
    }
}
