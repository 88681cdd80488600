use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{EncoderMode, InputMap, KoopmanModel};
use crate::error::{Error, Result};
use crate::numcore::{Activation, MlpParams};

const FORMAT: &str = "deepkoop-model";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    format: String,
    version: u32,
    mode: EncoderMode,
    n_z: usize,
    n_u: usize,
    n_y: usize,
    a: Vec<Vec<f64>>,
    c: Vec<Vec<f64>>,
    input_map: Option<InputMapDoc>,
    encoder: MlpDoc,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum InputMapDoc {
    Network { network: MlpDoc },
    Constant { matrix: Vec<Vec<f64>> },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MlpDoc {
    layer_sizes: Vec<usize>,
    hidden_activation: Activation,
    output_activation: Activation,
    weights: Vec<Vec<Vec<f64>>>,
    biases: Vec<Vec<f64>>,
}

fn rows(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn matrix(rows: Vec<Vec<f64>>, what: &str) -> Result<Array2<f64>> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Shape(format!("{what}: ragged rows")));
    }
    let nrows = rows.len();
    Ok(Array2::from_shape_vec((nrows, ncols), rows.concat()).expect("checked rectangular"))
}

impl From<&MlpParams> for MlpDoc {
    fn from(p: &MlpParams) -> Self {
        MlpDoc {
            layer_sizes: p.layer_sizes.clone(),
            hidden_activation: p.hidden_activation,
            output_activation: p.output_activation,
            weights: p.weights.iter().map(rows).collect(),
            biases: p.biases.iter().map(|b| b.to_vec()).collect(),
        }
    }
}

impl MlpDoc {
    fn into_params(self, what: &str) -> Result<MlpParams> {
        let params = MlpParams {
            weights: self
                .weights
                .into_iter()
                .enumerate()
                .map(|(i, w)| matrix(w, &format!("{what} weight {i}")))
                .collect::<Result<_>>()?,
            biases: self.biases.into_iter().map(Array1::from).collect(),
            layer_sizes: self.layer_sizes,
            hidden_activation: self.hidden_activation,
            output_activation: self.output_activation,
        };
        params.validate()?;
        Ok(params)
    }
}

impl KoopmanModel {
    pub fn to_json(&self) -> Result<String> {
        self.validate()?;
        let doc = ModelDoc {
            format: FORMAT.into(),
            version: VERSION,
            mode: self.mode,
            n_z: self.n_z,
            n_u: self.n_u,
            n_y: self.n_y,
            a: rows(&self.a),
            c: rows(&self.c),
            input_map: self.input_map.as_ref().map(|m| match m {
                InputMap::Network(net) => InputMapDoc::Network { network: net.into() },
                InputMap::Constant(b) => InputMapDoc::Constant { matrix: rows(b) },
            }),
            encoder: (&self.encoder).into(),
        };
        Ok(serde_json::to_string_pretty(&doc)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDoc = serde_json::from_str(text)?;
        if doc.format != FORMAT || doc.version != VERSION {
            return Err(Error::Parse(format!(
                "unsupported model document '{}' version {} (expected '{FORMAT}' version {VERSION})",
                doc.format, doc.version
            )));
        }
        let model = KoopmanModel {
            a: matrix(doc.a, "A")?,
            c: matrix(doc.c, "C")?,
            input_map: doc
                .input_map
                .map(|m| match m {
                    InputMapDoc::Network { network } => network.into_params("input map").map(InputMap::Network),
                    InputMapDoc::Constant { matrix: b } => matrix(b, "B").map(InputMap::Constant),
                })
                .transpose()?,
            encoder: doc.encoder.into_params("encoder")?,
            mode: doc.mode,
            n_z: doc.n_z,
            n_u: doc.n_u,
            n_y: doc.n_y,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
