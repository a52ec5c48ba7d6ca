//! Weight files: one TBT tensor per parameter plus a JSON manifest.

use std::fs;
use std::path::Path;

use ndarray::ArrayViewMutD;
use serde::{Deserialize, Serialize};

use super::block::BlockWeights;
use super::ctsa::CtsaWeights;
use super::gfn::GfnWeights;
use super::layers::{Conv1x1, Conv3dDown, DepthwiseConv3, LayerNorm};
use super::reconstruct::{Reconstruct2dConfig, Reconstruct3dConfig, Reconstructor2d, Reconstructor3d};
use crate::error::{Error, Result};
use crate::io::{read_tbt, write_tbt, TbtArray};

/// Visits every parameter tensor under a stable dotted name.
pub trait Parameters {
    fn visit(&mut self, prefix: &str, f: &mut dyn FnMut(String, ArrayViewMutD<'_, f32>));
}

fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

impl Parameters for Conv1x1 {
    fn visit(&mut self, prefix: &str, f: &mut dyn FnMut(String, ArrayViewMutD<'_, f32>)) {
        f(join(prefix, "weight"), self.weight.view_mut().into_dyn());
        if let Some(b) = &mut self.bias {
            f(join(prefix, "bias"), b.view_mut().into_dyn());
        }
    }
}

impl Parameters for DepthwiseConv3 {
    fn visit(&mut self, prefix: &str, f: &mut dyn FnMut(String, ArrayViewMutD<'_, f32>)) {
        f(join(prefix, "weight"), self.weight.view_mut().into_dyn());
    }
}

impl Parameters for LayerNorm {
    fn visit(&mut self, prefix: &str, f: &mut dyn FnMut(String, ArrayViewMutD<'_, f32>)) {
        f(join(prefix, "gamma"), self.gamma.view_mut().into_dyn());
        f(join(prefix, "beta"), self.beta.view_mut().into_dyn());
    }
}

impl Parameters for Conv3dDown {
    fn visit(&mut self, prefix: &str, f: &mut dyn FnMut(String, ArrayViewMutD<'_, f32>)) {
        f(join(prefix, "weight"), self.weight.view_mut().into_dyn());
        f(join(prefix, "bias"), self.bias.view_mut().into_dyn());
    }
}

impl Parameters for CtsaWeights {
    fn visit(&mut self, prefix: &str, f: &mut dyn FnMut(String, ArrayViewMutD<'_, f32>)) {
        self.qkv.visit(&join(prefix, "qkv"), f);
        self.qkv_dw.visit(&join(prefix, "qkv_dw"), f);
        self.project.visit(&join(prefix, "project"), f);
    }
}

impl Parameters for GfnWeights {
    fn visit(&mut self, prefix: &str, f: &mut dyn FnMut(String, ArrayViewMutD<'_, f32>)) {
        self.norm.visit(&join(prefix, "norm"), f);
        self.wp1.visit(&join(prefix, "wp1"), f);
        self.wd1.visit(&join(prefix, "wd1"), f);
        self.wp2.visit(&join(prefix, "wp2"), f);
        self.wd2.visit(&join(prefix, "wd2"), f);
        self.wp0.visit(&join(prefix, "wp0"), f);
    }
}

impl Parameters for BlockWeights {
    fn visit(&mut self, prefix: &str, f: &mut dyn FnMut(String, ArrayViewMutD<'_, f32>)) {
        self.norm.visit(&join(prefix, "norm"), f);
        self.ctsa.visit(&join(prefix, "ctsa"), f);
        self.gfn.visit(&join(prefix, "gfn"), f);
    }
}

impl Parameters for Reconstructor2d {
    fn visit(&mut self, prefix: &str, f: &mut dyn FnMut(String, ArrayViewMutD<'_, f32>)) {
        self.embed.visit(&join(prefix, "embed"), f);
        for (i, b) in self.blocks.iter_mut().enumerate() {
            b.visit(&join(prefix, &format!("blocks.{i}")), f);
        }
        for (i, u) in self.upsample.iter_mut().enumerate() {
            u.visit(&join(prefix, &format!("upsample.{i}")), f);
        }
        self.head.visit(&join(prefix, "head"), f);
    }
}

impl Parameters for Reconstructor3d {
    fn visit(&mut self, prefix: &str, f: &mut dyn FnMut(String, ArrayViewMutD<'_, f32>)) {
        self.fuse.visit(&join(prefix, "fuse"), f);
        for (i, b) in self.blocks.iter_mut().enumerate() {
            b.visit(&join(prefix, &format!("blocks.{i}")), f);
        }
        self.head.visit(&join(prefix, "head"), f);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightManifest {
    /// `"reconstruct2d"` or `"reconstruct3d"`.
    pub model: String,
    pub seed: u64,
    pub heads: usize,
    pub config: serde_json::Value,
    pub tensors: Vec<TensorEntry>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

fn save(
    dir: &Path,
    model: &str,
    seed: u64,
    heads: usize,
    config: serde_json::Value,
    params: &mut dyn Parameters,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut tensors = Vec::new();
    let mut failure = None;
    params.visit("", &mut |name, view| {
        if failure.is_some() {
            return;
        }
        let file = format!("{name}.tbt");
        if let Err(e) = write_tbt(dir.join(&file), &TbtArray::F32(view.to_owned())) {
            failure = Some(e);
        }
        tensors.push(TensorEntry {
            name,
            shape: view.shape().to_vec(),
            file,
        });
    });
    if let Some(e) = failure {
        return Err(e);
    }
    let manifest = WeightManifest {
        model: model.to_string(),
        seed,
        heads,
        config,
        tensors,
    };
    fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

fn load_into(dir: &Path, manifest: &WeightManifest, params: &mut dyn Parameters) -> Result<()> {
    let mut failure = None;
    let mut seen = 0;
    params.visit("", &mut |name, mut view| {
        if failure.is_some() {
            return;
        }
        let result = (|| -> Result<()> {
            let entry = manifest
                .tensors
                .iter()
                .find(|e| e.name == name)
                .ok_or_else(|| Error::Format(format!("weight manifest lacks tensor {name}")))?;
            let data = match read_tbt(dir.join(&entry.file))? {
                TbtArray::F32(a) => a,
                TbtArray::F64(_) => return Err(Error::Format(format!("tensor {name} must be f32"))),
            };
            if data.shape() != view.shape() {
                return Err(Error::Format(format!(
                    "tensor {name} has shape {:?}; expected {:?}",
                    data.shape(),
                    view.shape()
                )));
            }
            view.assign(&data);
            Ok(())
        })();
        match result {
            Ok(()) => seen += 1,
            Err(e) => failure = Some(e),
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    if seen != manifest.tensors.len() {
        return Err(Error::Format(format!(
            "weight manifest lists {} tensors; model has {seen}",
            manifest.tensors.len()
        )));
    }
    Ok(())
}

fn read_manifest(dir: &Path, model: &str) -> Result<WeightManifest> {
    let m: WeightManifest = serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST_FILE))?)?;
    if m.model != model {
        return Err(Error::Format(format!(
            "manifest describes a {} model, not {model}",
            m.model
        )));
    }
    Ok(m)
}

pub fn save_reconstruct2d(dir: &Path, model: &Reconstructor2d) -> Result<()> {
    let c = &model.config;
    save(
        dir,
        "reconstruct2d",
        c.seed,
        c.heads,
        serde_json::to_value(c)?,
        &mut model.clone(),
    )
}

pub fn load_reconstruct2d(dir: &Path) -> Result<Reconstructor2d> {
    let m = read_manifest(dir, "reconstruct2d")?;
    let cfg: Reconstruct2dConfig = serde_json::from_value(m.config.clone())?;
    let mut model = Reconstructor2d::zeros(cfg)?;
    load_into(dir, &m, &mut model)?;
    Ok(model)
}

pub fn save_reconstruct3d(dir: &Path, model: &Reconstructor3d) -> Result<()> {
    let c = &model.config;
    save(
        dir,
        "reconstruct3d",
        c.seed,
        c.heads,
        serde_json::to_value(c)?,
        &mut model.clone(),
    )
}

pub fn load_reconstruct3d(dir: &Path) -> Result<Reconstructor3d> {
    let m = read_manifest(dir, "reconstruct3d")?;
    let cfg: Reconstruct3dConfig = serde_json::from_value(m.config.clone())?;
    let mut model = Reconstructor3d::zeros(cfg)?;
    load_into(dir, &m, &mut model)?;
    Ok(model)
}
