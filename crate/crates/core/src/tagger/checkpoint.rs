//! Checkpoint directories: `config.json` (encoder, model and train
//! configuration, loss weights, schema version) and `decoder.json` (decoder
//! parameters). The bundled encoder is rebuilt from its configuration.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{LossWeights, TaggerParams};
use super::{ModelConfig, TaggerError, TaggerModel, TrainConfig};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct CheckpointConfig {
    schema_version: u32,
    model: ModelConfig,
    train: TrainConfig,
    loss_weights: LossWeights,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> TaggerError + '_ {
    move |source| TaggerError::Checkpoint {
        path: path.to_path_buf(),
        source,
    }
}

fn json_err(path: &Path) -> impl FnOnce(serde_json::Error) -> TaggerError + '_ {
    move |source| TaggerError::CheckpointFormat {
        path: path.to_path_buf(),
        source,
    }
}

pub fn save_model(model: &TaggerModel, dir: &Path) -> Result<(), TaggerError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let cfg = CheckpointConfig {
        schema_version: SCHEMA_VERSION,
        model: model.config.clone(),
        train: model.train_config.clone(),
        loss_weights: model.loss_weights,
    };
    let path = dir.join("config.json");
    let text = serde_json::to_string_pretty(&cfg).map_err(json_err(&path))?;
    fs::write(&path, text).map_err(io_err(&path))?;
    let path = dir.join("decoder.json");
    let text = serde_json::to_string(&model.params).map_err(json_err(&path))?;
    fs::write(&path, text).map_err(io_err(&path))?;
    Ok(())
}

pub fn load_model(dir: &Path) -> Result<TaggerModel, TaggerError> {
    let path = dir.join("config.json");
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let cfg: CheckpointConfig = serde_json::from_str(&text).map_err(json_err(&path))?;
    if cfg.schema_version != SCHEMA_VERSION {
        return Err(TaggerError::SchemaVersion {
            found: cfg.schema_version,
            expected: SCHEMA_VERSION,
        });
    }
    let mut model = TaggerModel::new(cfg.model, cfg.loss_weights, cfg.train)?;
    let path = dir.join("decoder.json");
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let params: TaggerParams = serde_json::from_str(&text).map_err(json_err(&path))?;
    if params.feature_dim() != model.encoder().dim() || params.sizes() != model.params.sizes() {
        return Err(TaggerError::Shape(format!(
            "{}: decoder parameters do not fit the configured model",
            path.display()
        )));
    }
    model.params = params;
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Paragraph;

    #[test]
    fn round_trip() {
        let cfg = ModelConfig {
            hidden: 6,
            value_dim: 3,
            ..ModelConfig::default()
        };
        let model = TaggerModel::new(cfg, LossWeights::default(), TrainConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_model(&model, dir.path()).unwrap();
        let back = load_model(dir.path()).unwrap();
        assert_eq!(back.params, model.params);
        let p = Paragraph::from_text("Lee (2019) builds parsers.", vec![]);
        assert_eq!(back.scores(&p).unwrap(), model.scores(&p).unwrap());
    }

    #[test]
    fn missing_directory() {
        let err = load_model(Path::new("/nonexistent/ckpt")).unwrap_err();
        assert!(err.to_string().contains("config.json"));
    }
}
