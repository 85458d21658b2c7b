//! On-disk layout of a trained run: `manifest.json` plus `models/*.json`.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use causal_ic::data::{FeatureSchema, NormParam};
use causal_ic::eval::{TrainedModels, TrainingConfig};
use causal_ic::gp::{GpDocument, GpSet, KernelConfig, TreatmentGp};
use causal_ic::model::{
    CausalModel, ClassifierDocument, IndirectDocument, IndirectEstimator, MlpClassifier, TrainingMeta,
};
use serde::{Deserialize, Serialize};

pub const MANIFEST_FORMAT: &str = "causal-ic-run/1";
const GP_SET_FORMAT: &str = "treatment-gp-set/1";

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub seed: u64,
    pub split_seed: u64,
    pub training_seed: u64,
    pub n_rows: usize,
    pub feature_names: Vec<String>,
    pub treatment_names: Vec<String>,
    pub norm_params: Vec<NormParam>,
    pub optimization_rows: Vec<usize>,
    pub validation_rows: Vec<usize>,
    pub training: TrainingConfig,
    pub classifier: Option<TrainingMeta>,
    pub weighted_classifier: Option<TrainingMeta>,
    pub gp_kernels: Vec<KernelConfig>,
    pub models: ModelFiles,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ModelFiles {
    pub gps: String,
    pub classifier: String,
    pub weighted_classifier: String,
    pub indirect: String,
    pub weighted_indirect: String,
}

impl Default for ModelFiles {
    fn default() -> Self {
        ModelFiles {
            gps: "models/gps.json".into(),
            classifier: "models/f.json".into(),
            weighted_classifier: "models/f-prime.json".into(),
            indirect: "models/h.json".into(),
            weighted_indirect: "models/h-prime.json".into(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct GpSetDocument {
    format: String,
    gps: Vec<GpDocument>,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("missing artifact {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Writes every model file named in `manifest.models`, then the manifest itself.
pub fn save(dir: &Path, manifest: &Manifest, models: &TrainedModels) -> Result<()> {
    let (Some(plain), Some(weighted)) = (&models.plain, &models.weighted) else {
        bail!("both classifiers must be trained before saving");
    };
    let files = &manifest.models;
    let gps = GpSetDocument {
        format: GP_SET_FORMAT.into(),
        gps: models.gps.gps.iter().map(TreatmentGp::to_document).collect(),
    };
    write_json(&dir.join(&files.gps), &gps)?;
    write_json(&dir.join(&files.classifier), &plain.classifier.to_document())?;
    write_json(&dir.join(&files.weighted_classifier), &weighted.classifier.to_document())?;
    write_json(&dir.join(&files.indirect), &plain.indirect.to_document())?;
    write_json(&dir.join(&files.weighted_indirect), &weighted.indirect.to_document())?;
    write_json(&dir.join("manifest.json"), manifest)
}

pub fn manifest_path(dir: &Path) -> PathBuf {
    dir.join("manifest.json")
}

pub fn load_manifest(dir: &Path) -> Result<Manifest> {
    let m: Manifest = read_json(&manifest_path(dir))?;
    if m.format != MANIFEST_FORMAT {
        bail!("unsupported manifest format {:?}", m.format);
    }
    Ok(m)
}

/// Rebuilds the GP set and both causal models for `schema`.
pub fn load_models(dir: &Path, manifest: &Manifest, schema: &FeatureSchema) -> Result<TrainedModels> {
    let files = &manifest.models;
    let doc: GpSetDocument = read_json(&dir.join(&files.gps))?;
    if doc.format != GP_SET_FORMAT {
        bail!("unsupported GP set format {:?}", doc.format);
    }
    let gps = GpSet { gps: doc.gps.into_iter().map(TreatmentGp::from_document).collect::<Result<_, _>>()? };
    let input = manifest.training.indirect_input;
    let build = |clf: &str, h: &str| -> Result<CausalModel> {
        let c = MlpClassifier::from_document(read_json::<ClassifierDocument>(&dir.join(clf))?)?;
        let h = IndirectEstimator::from_document(read_json::<IndirectDocument>(&dir.join(h))?)?;
        Ok(CausalModel::new(c, h, input, schema)?)
    };
    let plain = build(&files.classifier, &files.indirect)?;
    let weighted = build(&files.weighted_classifier, &files.weighted_indirect)?;
    if plain.weighted() || !weighted.weighted() {
        bail!("classifier artifacts are swapped or corrupt");
    }
    Ok(TrainedModels { gps, plain: Some(plain), weighted: Some(weighted) })
}
