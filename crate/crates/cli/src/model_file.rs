//! Versioned JSON model documents.

use std::path::Path;

use gpsurrogate_core::predictor::ModelParts;
use gpsurrogate_core::GpModel;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const FORMAT: &str = "gpsurrogate-model";
pub const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Document {
    format: String,
    version: u32,
    seed: u64,
    model: ModelParts,
}

#[derive(Deserialize)]
struct Header {
    format: String,
    version: u32,
}

pub fn to_string(model: &GpModel, seed: u64) -> String {
    let doc = Document {
        format: FORMAT.into(),
        version: VERSION,
        seed,
        model: model.to_parts(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("model parts serialize");
    s.push('\n');
    s
}

pub fn from_str(text: &str) -> Result<(GpModel, u64), CliError> {
    let header: Header =
        serde_json::from_str(text).map_err(|e| CliError::Data(format!("not a model file: {e}")))?;
    if header.format != FORMAT {
        return Err(CliError::Data(format!("not a model file (format `{}`)", header.format)));
    }
    if header.version != VERSION {
        return Err(CliError::Version {
            found: header.version,
            expected: VERSION,
        });
    }
    let doc: Document = serde_json::from_str(text).map_err(|e| CliError::Data(format!("corrupt model file: {e}")))?;
    Ok((GpModel::from_parts(doc.model)?, doc.seed))
}

pub fn load(path: &Path) -> Result<(GpModel, u64), CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(path.display().to_string(), e))?;
    from_str(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use gpsurrogate_core::covariance::{ActiveSet, CorrelationParams};
    use gpsurrogate_core::predictor::Kriging;
    use gpsurrogate_core::regression::RegressionBasis;
    use gpsurrogate_core::{InputTransform, Matrix, TrainingSet};

    fn model() -> GpModel {
        let x = Matrix::from_rows(&[[0.1, 3.0], [0.4, 1.0], [0.35, 2.0], [0.9, 5.0], [0.7, 4.0]]).unwrap();
        let ts = TrainingSet::with_default_names(x, vec![1.0, 0.3, -0.2, 2.5, 1.7]).unwrap();
        let t = InputTransform::fit_empirical(&ts).unwrap();
        let design = t.apply_matrix(ts.inputs()).unwrap();
        let params = CorrelationParams::new(vec![2.3, 0.7], vec![1.9, 1.0], 1e-3).unwrap();
        let k = Kriging::fit(
            design,
            ts.outputs().to_vec(),
            ActiveSet::new(vec![0, 1], 2).unwrap(),
            RegressionBasis::new(ActiveSet::new(vec![1], 2).unwrap()),
            params,
        )
        .unwrap();
        GpModel::new(ts.input_names().to_vec(), t, k).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let m = model();
        let text = to_string(&m, 42);
        let (back, seed) = from_str(&text).unwrap();
        assert_eq!(seed, 42);
        assert_eq!(back.to_parts(), m.to_parts());
        for q in [[0.2, 2.5], [0.95, 0.0], [0.4, 1.0]] {
            assert_eq!(back.predict(&q).unwrap(), m.predict(&q).unwrap());
        }
        assert_eq!(to_string(&back, 42), text);
    }

    #[test]
    fn version_mismatch() {
        let text = to_string(&model(), 0).replacen("\"version\": 1", "\"version\": 99", 1);
        assert!(matches!(from_str(&text), Err(CliError::Version { found: 99, .. })));
        assert!(matches!(from_str("{}"), Err(CliError::Data(_))));
    }
}
