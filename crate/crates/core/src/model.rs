//! DNN models as ordered lists of GEMM-shaped layers.
//!
//! A layer is the `(m, k, n)` of the matrix multiplication it lowers to:
//! an `m x k` weight against a `k x n` activation, where `n` folds in the
//! batch dimension. Convolutions are lowered with im2col at load time.
//! Recurrent models mark a contiguous range of layers that repeats once per
//! unrolled step.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::lut::{SeqLenLut, SeqLenProfile};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Gemm,
    ConvLowered,
    RecurrentCell,
}

/// Originating convolution parameters, kept on lowered layers so the
/// lowering can be round-trip checked.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvParams {
    pub batch: u64,
    pub in_ch: u64,
    pub out_ch: u64,
    pub filter_h: u64,
    pub filter_w: u64,
    pub out_h: u64,
    pub out_w: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub m: u64,
    pub k: u64,
    pub n: u64,
    pub kind: LayerKind,
    #[serde(default)]
    pub fused_vector_op: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub conv: Option<ConvParams>,
}

impl LayerSpec {
    pub fn gemm(m: u64, k: u64, n: u64) -> Self {
        Self {
            m,
            k,
            n,
            kind: LayerKind::Gemm,
            fused_vector_op: false,
            conv: None,
        }
    }

    fn validate(&self, model: &str, idx: usize) -> Result<()> {
        if self.m == 0 || self.k == 0 || self.n == 0 {
            return Err(Error::Model {
                model: model.into(),
                msg: format!("layer {idx}: m,k,n must all be >= 1"),
            });
        }
        Ok(())
    }
}

/// im2col lowering of a convolution to GEMM dimensions:
/// `m = out_ch`, `k = in_ch * filter_h * filter_w`, `n = batch * out_h * out_w`.
pub fn lower_conv(
    batch: u64,
    in_ch: u64,
    out_ch: u64,
    filter_h: u64,
    filter_w: u64,
    out_h: u64,
    out_w: u64,
) -> Result<LayerSpec> {
    let args = [
        ("batch", batch),
        ("in_ch", in_ch),
        ("out_ch", out_ch),
        ("filter_h", filter_h),
        ("filter_w", filter_w),
        ("out_h", out_h),
        ("out_w", out_w),
    ];
    for (name, v) in args {
        if v == 0 {
            return Err(Error::Parse(format!("lower_conv: {name} must be >= 1")));
        }
    }
    let overflow = || Error::Parse("lower_conv: dimension product overflows".into());
    let k = in_ch
        .checked_mul(filter_h)
        .and_then(|v| v.checked_mul(filter_w))
        .ok_or_else(overflow)?;
    let n = batch
        .checked_mul(out_h)
        .and_then(|v| v.checked_mul(out_w))
        .ok_or_else(overflow)?;
    Ok(LayerSpec {
        m: out_ch,
        k,
        n,
        kind: LayerKind::ConvLowered,
        fused_vector_op: false,
        conv: Some(ConvParams {
            batch,
            in_ch,
            out_ch,
            filter_h,
            filter_w,
            out_h,
            out_w,
        }),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    Cnn,
    RnnLinear,
    RnnSeq2seq,
}

impl ModelFamily {
    pub fn is_recurrent(self) -> bool {
        !matches!(self, ModelFamily::Cnn)
    }
}

/// A DNN as a linear chain of layers, executed sequentially.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub name: String,
    pub family: ModelFamily,
    /// Layer shapes at batch 1.
    pub layers: Vec<LayerSpec>,
    /// Inclusive index range of layers repeated once per unrolled step.
    pub recurrent_range: Option<(usize, usize)>,
    /// Name of the sequence-length profile this model predicts unrolls with.
    pub profile: Option<String>,
}

impl ModelSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Error::Model {
            model: self.name.clone(),
            msg,
        };
        if self.layers.is_empty() {
            return Err(fail("layer list is empty".into()));
        }
        for (i, l) in self.layers.iter().enumerate() {
            l.validate(&self.name, i)?;
        }
        match (self.family.is_recurrent(), self.recurrent_range) {
            (true, None) => {
                return Err(fail("recurrent family requires recurrent_range".into()));
            }
            (false, Some(_)) => {
                return Err(fail("cnn family must not set recurrent_range".into()));
            }
            (true, Some((a, b))) => {
                if a > b || b >= self.layers.len() {
                    return Err(fail(format!(
                        "recurrent_range [{a}, {b}] out of bounds for {} layers",
                        self.layers.len()
                    )));
                }
                if self.profile.is_none() {
                    return Err(fail("recurrent model requires a profile".into()));
                }
            }
            (false, None) => {}
        }
        Ok(())
    }

    /// Scale the batch dimension into every layer's `n`.
    pub fn with_batch(&self, batch: u64) -> Result<ModelSpec> {
        let mut out = self.clone();
        for l in &mut out.layers {
            l.n = l.n.checked_mul(batch).ok_or_else(|| Error::Model {
                model: self.name.clone(),
                msg: format!("batch {batch} overflows layer n={}", l.n),
            })?;
        }
        Ok(out)
    }

    /// The layer sequence actually executed: the recurrent range repeated
    /// `unroll` times, everything else once. CNNs ignore `unroll`.
    pub fn effective_layer_indices(&self, unroll: u64) -> Vec<usize> {
        match self.recurrent_range {
            None => (0..self.layers.len()).collect(),
            Some((a, b)) => {
                let mut seq = Vec::new();
                seq.extend(0..a);
                for _ in 0..unroll {
                    seq.extend(a..=b);
                }
                seq.extend(b + 1..self.layers.len());
                seq
            }
        }
    }

    /// Per-layer warnings (the simulator models timing only; capacity issues
    /// do not stop a run).
    pub fn capacity_warnings(&self, cfg: &crate::NpuConfig) -> Vec<String> {
        let mut warns = Vec::new();
        for (i, l) in self.layers.iter().enumerate() {
            let wbytes = l.m.saturating_mul(l.k).saturating_mul(cfg.elem_bytes);
            if wbytes > cfg.wbuf_bytes {
                warns.push(format!(
                    "model {}: layer {i} weights ({} bytes) exceed wbuf ({} bytes); refetch not modeled",
                    self.name, wbytes, cfg.wbuf_bytes
                ));
            }
        }
        warns
    }
}

// ---------------------------------------------------------------------------
// Model files
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    name: String,
    family: ModelFamily,
    #[serde(default)]
    recurrent_range: Option<(usize, usize)>,
    #[serde(default)]
    profile: Option<String>,
    layers: Vec<LayerFile>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum LayerFile {
    Gemm {
        m: u64,
        k: u64,
        n: u64,
        #[serde(default)]
        fused_vector_op: bool,
        #[serde(default)]
        recurrent: bool,
    },
    Conv {
        in_ch: u64,
        out_ch: u64,
        filter: [u64; 2],
        out: [u64; 2],
        #[serde(default)]
        fused_vector_op: bool,
    },
}

/// Parse a model TOML document (layer shapes are batch-1).
pub fn model_from_toml(text: &str) -> Result<ModelSpec> {
    let file: ModelFile =
        toml::from_str(text).map_err(|e| Error::Parse(format!("model file: {e}")))?;
    let mut layers = Vec::with_capacity(file.layers.len());
    for l in &file.layers {
        let spec = match *l {
            LayerFile::Gemm {
                m,
                k,
                n,
                fused_vector_op,
                recurrent,
            } => LayerSpec {
                m,
                k,
                n,
                kind: if recurrent {
                    LayerKind::RecurrentCell
                } else {
                    LayerKind::Gemm
                },
                fused_vector_op,
                conv: None,
            },
            LayerFile::Conv {
                in_ch,
                out_ch,
                filter,
                out,
                fused_vector_op,
            } => {
                let mut spec = lower_conv(1, in_ch, out_ch, filter[0], filter[1], out[0], out[1])?;
                spec.fused_vector_op = fused_vector_op;
                spec
            }
        };
        layers.push(spec);
    }
    let spec = ModelSpec {
        name: file.name,
        family: file.family,
        layers,
        recurrent_range: file.recurrent_range,
        profile: file.profile,
    };
    spec.validate()?;
    Ok(spec)
}

// ---------------------------------------------------------------------------
// Library
// ---------------------------------------------------------------------------

/// Named models plus the sequence-length profiles their unroll predictions
/// come from.
#[derive(Debug, Clone, Default)]
pub struct ModelLibrary {
    models: BTreeMap<String, ModelSpec>,
    profiles: BTreeMap<String, SeqLenLut>,
}

impl ModelLibrary {
    pub fn new() -> Self {
        Self::default()
    }

    /// The eight archetypes shipped with the simulator.
    pub fn builtin() -> Self {
        let mut lib = Self::new();
        for text in [
            include_str!("../assets/profiles/sentiment.csv"),
            include_str!("../assets/profiles/translation_en_de.csv"),
            include_str!("../assets/profiles/translation_en_ko.csv"),
            include_str!("../assets/profiles/asr.csv"),
        ] {
            let profile = SeqLenProfile::parse(text).expect("builtin profile parses");
            lib.add_profile(profile).expect("builtin profile builds");
        }
        for text in [
            include_str!("../assets/models/cnn_an.toml"),
            include_str!("../assets/models/cnn_gn.toml"),
            include_str!("../assets/models/cnn_vn.toml"),
            include_str!("../assets/models/cnn_mn.toml"),
            include_str!("../assets/models/rnn_sa.toml"),
            include_str!("../assets/models/rnn_mt1.toml"),
            include_str!("../assets/models/rnn_mt2.toml"),
            include_str!("../assets/models/rnn_asr.toml"),
        ] {
            let model = model_from_toml(text).expect("builtin model parses");
            lib.add_model(model).expect("builtin model validates");
        }
        lib
    }

    pub fn add_model(&mut self, model: ModelSpec) -> Result<()> {
        model.validate()?;
        if let Some(p) = &model.profile {
            if !self.profiles.contains_key(p) {
                return Err(Error::Model {
                    model: model.name.clone(),
                    msg: format!("references unknown profile `{p}`"),
                });
            }
        }
        self.models.insert(model.name.clone(), model);
        Ok(())
    }

    pub fn add_profile(&mut self, profile: SeqLenProfile) -> Result<()> {
        let lut = crate::lut::build_lut(&profile)?;
        self.profiles.insert(profile.name.clone(), lut);
        Ok(())
    }

    pub fn model(&self, name: &str) -> Result<&ModelSpec> {
        self.models.get(name).ok_or_else(|| Error::Model {
            model: name.into(),
            msg: "not found in library".into(),
        })
    }

    pub fn profile_for(&self, model: &ModelSpec) -> Result<&SeqLenLut> {
        let p = model.profile.as_deref().ok_or_else(|| Error::Model {
            model: model.name.clone(),
            msg: "model has no profile".into(),
        })?;
        self.profiles.get(p).ok_or_else(|| Error::Model {
            model: model.name.clone(),
            msg: format!("profile `{p}` missing"),
        })
    }

    pub fn model_names(&self) -> Vec<&str> {
        self.models.keys().map(|s| s.as_str()).collect()
    }

    pub fn models(&self) -> impl Iterator<Item = &ModelSpec> {
        self.models.values()
    }
}
