//! Model file: one JSON object
//!
//! ```text
//! { "format_version": 1, "dim": d, "K": k,
//!   "weights": [k], "means": [[d] x k], "covariances": [[d*d] x k] }
//! ```
//!
//! Covariances are row-major. Numbers are written in shortest round-trip
//! form, so a save/load cycle is bit-exact.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{validate, GaussianComponent, Gmm};
use crate::error::{Error, Result};

pub const GMM_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    format_version: u32,
    dim: usize,
    #[serde(rename = "K")]
    k: usize,
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    covariances: Vec<Vec<f64>>,
}

pub fn gmm_to_json(gmm: &Gmm) -> String {
    let file = ModelFile {
        format_version: GMM_FORMAT_VERSION,
        dim: gmm.dim(),
        k: gmm.num_components(),
        weights: gmm.weights(),
        means: gmm.components().iter().map(|c| c.mean.clone()).collect(),
        covariances: gmm.components().iter().map(|c| c.covariance.clone()).collect(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("model serialization cannot fail");
    s.push('\n');
    s
}

pub fn gmm_from_json(text: &str) -> Result<Gmm> {
    let what = "model file";
    let file: ModelFile = serde_json::from_str(text).map_err(|e| Error::parse(what, e.to_string()))?;
    if file.format_version != GMM_FORMAT_VERSION {
        return Err(Error::parse(
            what,
            format!("format_version {} is not supported", file.format_version),
        ));
    }
    for (field, len) in [
        ("weights", file.weights.len()),
        ("means", file.means.len()),
        ("covariances", file.covariances.len()),
    ] {
        if len != file.k {
            return Err(Error::parse(what, format!("{field} has {len} entries, K is {}", file.k)));
        }
    }
    let components: Vec<GaussianComponent> = file
        .weights
        .into_iter()
        .zip(file.means)
        .zip(file.covariances)
        .map(|((weight, mean), covariance)| GaussianComponent {
            weight,
            mean,
            covariance,
        })
        .collect();
    validate(file.dim, &components).map_err(|msg| Error::parse(what, msg))?;
    Gmm::new(file.dim, components)
}

pub fn save_gmm(gmm: &Gmm, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, gmm_to_json(gmm)).map_err(|e| Error::io(path, e))
}

pub fn load_gmm(path: impl AsRef<Path>) -> Result<Gmm> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    gmm_from_json(&text)
}
