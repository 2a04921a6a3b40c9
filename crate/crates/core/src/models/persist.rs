//! Model files: a JSON envelope carrying a format tag, a version and the
//! feature columns the model was trained on.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::TrainedModel;
use crate::error::{Error, Result};

pub const FORMAT_TAG: &str = "lobpred-model";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub columns: Vec<String>,
    pub model: TrainedModel,
}

impl ModelFile {
    pub fn new(model: TrainedModel, columns: Vec<String>) -> Self {
        ModelFile {
            format: FORMAT_TAG.to_string(),
            version: FORMAT_VERSION,
            columns,
            model,
        }
    }

    pub fn write<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer(out, self).map_err(|e| Error::ModelFormat(e.to_string()))
    }

    pub fn read<R: Read>(input: R) -> Result<Self> {
        let f: ModelFile = serde_json::from_reader(input).map_err(|e| Error::ModelFormat(e.to_string()))?;
        if f.format != FORMAT_TAG {
            return Err(Error::ModelFormat(format!("not a model file (format `{}`)", f.format)));
        }
        if f.version != FORMAT_VERSION {
            return Err(Error::ModelFormat(format!(
                "model file version {} is not supported (expected {FORMAT_VERSION})",
                f.version
            )));
        }
        Ok(f)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read(BufReader::new(File::open(path)?))
    }
}
