//! Shared checkpoint container.
//!
//! A checkpoint is a directory holding `meta.json` plus one raw little-endian
//! 32-bit-float binary per named array. Model parameters use their registered
//! names; Adam moments are stored under `adam_m.<name>` / `adam_v.<name>`.
//! Save → load → save is byte-identical.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Adam, ParamSet, Scalar};
use crate::config::ModelConfig;
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArrayMeta {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OptimizerMeta {
    pub tag: String,
    pub step: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub format_version: u32,
    pub model_kind: String,
    pub step: u64,
    pub config: ModelConfig,
    pub params: Vec<ArrayMeta>,
    /// One entry per optimizer whose moments are stored alongside.
    pub optimizers: Vec<OptimizerMeta>,
}

fn array_path(dir: &Path, name: &str) -> std::path::PathBuf {
    dir.join(format!("{name}.bin"))
}

pub(crate) fn write_array<S: Scalar>(dir: &Path, name: &str, data: &[S]) -> Result<()> {
    let mut bytes = Vec::with_capacity(data.len() * 4);
    for v in data {
        bytes.extend_from_slice(&v.to_f32_lossy().to_le_bytes());
    }
    std::fs::write(array_path(dir, name), bytes)?;
    Ok(())
}

pub(crate) fn read_array(dir: &Path, name: &str, expected_len: usize) -> Result<Vec<f32>> {
    let bytes = std::fs::read(array_path(dir, name))?;
    if bytes.len() != expected_len * 4 {
        return Err(Error::Config(format!(
            "array {name:?} has {} bytes, expected {}",
            bytes.len(),
            expected_len * 4
        )));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

/// Write a checkpoint. Optimizer state is optional (tagged when several
/// optimizers train one model); evaluation-only checkpoints skip it.
pub fn save<S: Scalar>(
    dir: &Path,
    model_kind: &str,
    step: u64,
    config: &ModelConfig,
    params: &ParamSet<S>,
    optimizers: &[(&str, &Adam<S>)],
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut metas = Vec::new();
    for (name, shape, data) in params.iter() {
        write_array(dir, name, data)?;
        metas.push(ArrayMeta {
            name: name.to_string(),
            shape: shape.to_vec(),
        });
    }
    let mut opt_metas = Vec::new();
    for (tag, adam) in optimizers {
        let (m, v, t) = adam.state();
        for (idx, (name, _, _)) in params.iter().enumerate() {
            write_array(dir, &format!("adam_{tag}_m.{name}"), &m[idx])?;
            write_array(dir, &format!("adam_{tag}_v.{name}"), &v[idx])?;
        }
        opt_metas.push(OptimizerMeta {
            tag: tag.to_string(),
            step: t,
        });
    }
    let meta = CheckpointMeta {
        format_version: CHECKPOINT_FORMAT_VERSION,
        model_kind: model_kind.to_string(),
        step,
        config: config.clone(),
        params: metas,
        optimizers: opt_metas,
    };
    std::fs::write(
        dir.join("meta.json"),
        serde_json::to_string_pretty(&meta)? + "\n",
    )?;
    Ok(())
}

pub fn read_meta(dir: &Path) -> Result<CheckpointMeta> {
    let json = std::fs::read_to_string(dir.join("meta.json"))?;
    let meta: CheckpointMeta = serde_json::from_str(&json)?;
    if meta.format_version != CHECKPOINT_FORMAT_VERSION {
        return Err(Error::Config(format!(
            "checkpoint format {} unsupported",
            meta.format_version
        )));
    }
    Ok(meta)
}

/// Load every parameter array into an already-constructed model.
pub fn load_params<S: Scalar>(dir: &Path, params: &mut ParamSet<S>) -> Result<()> {
    let meta = read_meta(dir)?;
    let names: Vec<String> = params.names().map(str::to_string).collect();
    for name in &names {
        let am = meta
            .params
            .iter()
            .find(|a| &a.name == name)
            .ok_or_else(|| Error::Config(format!("checkpoint misses parameter {name:?}")))?;
        if params.shape(name) != Some(am.shape.as_slice()) {
            return Err(Error::Config(format!(
                "parameter {name:?} shape mismatch: model {:?}, checkpoint {:?}",
                params.shape(name),
                am.shape
            )));
        }
        let data = read_array(dir, name, am.shape.iter().product())?;
        let cast: Vec<S> = data.iter().map(|&v| S::from_f32_bits(v)).collect();
        params.set_values(name, &cast)?;
    }
    Ok(())
}

/// Load only the parameters whose names start with one of `prefixes`
/// (pre-training continuity). Returns how many arrays were loaded.
pub fn load_params_with_prefixes<S: Scalar>(
    dir: &Path,
    params: &mut ParamSet<S>,
    prefixes: &[&str],
) -> Result<usize> {
    let meta = read_meta(dir)?;
    let names: Vec<String> = params
        .names()
        .filter(|n| prefixes.iter().any(|p| n.starts_with(p)))
        .map(str::to_string)
        .collect();
    let mut loaded = 0;
    for name in &names {
        let am = meta
            .params
            .iter()
            .find(|a| &a.name == name)
            .ok_or_else(|| Error::Config(format!("checkpoint misses parameter {name:?}")))?;
        if params.shape(name) != Some(am.shape.as_slice()) {
            return Err(Error::Config(format!(
                "parameter {name:?} shape mismatch: model {:?}, checkpoint {:?}",
                params.shape(name),
                am.shape
            )));
        }
        let data = read_array(dir, name, am.shape.iter().product())?;
        let cast: Vec<S> = data.iter().map(|&v| S::from_f32_bits(v)).collect();
        params.set_values(name, &cast)?;
        loaded += 1;
    }
    Ok(loaded)
}

/// Restore Adam moments saved under the given tag. Returns false when the
/// checkpoint carries no optimizer state for that tag.
pub fn load_adam<S: Scalar>(
    dir: &Path,
    tag: &str,
    adam: &mut Adam<S>,
    params: &ParamSet<S>,
) -> Result<bool> {
    let meta = read_meta(dir)?;
    let Some(om) = meta.optimizers.iter().find(|o| o.tag == tag) else {
        return Ok(false);
    };
    let mut m = Vec::with_capacity(params.len());
    let mut v = Vec::with_capacity(params.len());
    for (name, shape, _) in params.iter() {
        let len = shape.iter().product();
        let mm = read_array(dir, &format!("adam_{tag}_m.{name}"), len)?;
        let vv = read_array(dir, &format!("adam_{tag}_v.{name}"), len)?;
        m.push(mm.iter().map(|&x| S::from_f32_bits(x)).collect());
        v.push(vv.iter().map(|&x| S::from_f32_bits(x)).collect());
    }
    adam.restore(m, v, om.step);
    Ok(true)
}
