//! Closed-form latency prediction for tiled GEMM on the systolic array.
//!
//! A `(m x k) x (k x n)` GEMM is tiled into `sh x sw` weight tiles and
//! `sh x acc` activation tiles. Inner tiles are full-width in `n`; the
//! rightmost column of tiles can be narrower (`edge_n = n mod acc`). Per tile,
//! the compute phase overlaps the next tile's memory fetch, so tile time is
//! `max(compute, memory)` with memory expressed in cycles through the
//! elements-per-cycle DRAM bandwidth.

use crate::model::{ModelFamily, ModelSpec};
use crate::{Error, NpuConfig, Result};

/// Tile-count semantics for layers smaller than the array.
///
/// `PaperVerbatim` floors the `m` and `k` tile counts, so a layer with
/// `m < sw` or `k < sh` contributes zero time. `Generalized` (the default
/// everywhere execution matters) takes the ceiling instead, pricing edge
/// tiles as full tiles on the compute side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TileMode {
    PaperVerbatim,
    #[default]
    Generalized,
}

/// Per-layer tile decomposition and phase timings, all in cycles.
#[derive(Debug, Clone, PartialEq)]
pub struct TileBreakdown {
    /// Full-width tiles: `mk_count * floor(n / acc)`.
    pub inner_count: u64,
    /// Edge-column tiles: `mk_count * phi`.
    pub outer_count: u64,
    pub phi: u64,
    pub edge_n: u64,
    pub c1: f64,
    pub m1: f64,
    pub c2: f64,
    pub m2: f64,
    pub t_inner: f64,
    pub t_outer: f64,
}

impl TileBreakdown {
    pub fn total_tiles(&self) -> u64 {
        self.inner_count + self.outer_count
    }

    pub fn total_cycles(&self) -> f64 {
        self.inner_count as f64 * self.t_inner + self.outer_count as f64 * self.t_outer
    }
}

fn div_count(v: u64, d: u64, mode: TileMode) -> u64 {
    match mode {
        TileMode::PaperVerbatim => v / d,
        TileMode::Generalized => v.div_ceil(d),
    }
}

/// Decompose one layer into tiles under the given mode.
pub fn tile_counts(m: u64, k: u64, n: u64, cfg: &NpuConfig, mode: TileMode) -> TileBreakdown {
    let bw = cfg.bw_elems_per_cycle();
    let (sw, sh, acc) = (cfg.sw as f64, cfg.sh as f64, cfg.acc as f64);

    let edge_n = n - (n / cfg.acc) * cfg.acc;
    let phi: u64 = if edge_n == 0 { 0 } else { 1 };

    let c1 = acc + sh + 2.0 * sw;
    let m1 = (sh * sw + sh * acc) / bw;
    let t_inner = c1.max(m1);

    let c2 = edge_n as f64 + sh + 2.0 * sw;
    let m2 = (sh * sw + sh * edge_n as f64) / bw;
    let t_outer = c2.max(m2);

    let mk = div_count(m, cfg.sw, mode) * div_count(k, cfg.sh, mode);
    TileBreakdown {
        inner_count: mk * (n / cfg.acc),
        outer_count: mk * phi,
        phi,
        edge_n,
        c1,
        m1,
        c2,
        m2,
        t_inner,
        t_outer,
    }
}

/// Predicted execution time of one layer, in cycles.
pub fn predict_layer_time(m: u64, k: u64, n: u64, cfg: &NpuConfig, mode: TileMode) -> f64 {
    tile_counts(m, k, n, cfg, mode).total_cycles()
}

/// Predicted end-to-end time of a model, in cycles.
///
/// For recurrent models the recurrent range is repeated `unroll_len` times;
/// `unroll_len` must be `None` for CNNs and `Some(>= 1)` otherwise. Layer
/// shapes are taken as stored (scale batch in beforehand with
/// [`ModelSpec::with_batch`]).
pub fn predict_network_time(
    model: &ModelSpec,
    cfg: &NpuConfig,
    unroll_len: Option<u64>,
    mode: TileMode,
) -> Result<f64> {
    let unroll = match (model.family, unroll_len) {
        (ModelFamily::Cnn, Some(_)) => {
            return Err(Error::Model {
                model: model.name.clone(),
                msg: "unroll length given for a cnn".into(),
            });
        }
        (ModelFamily::Cnn, None) => 1,
        (_, Some(u)) if u >= 1 => u,
        (_, _) => {
            return Err(Error::Model {
                model: model.name.clone(),
                msg: "recurrent model requires unroll length >= 1".into(),
            });
        }
    };
    let mut total = 0.0;
    for idx in model.effective_layer_indices(unroll) {
        let l = &model.layers[idx];
        total += predict_layer_time(l.m, l.k, l.n, cfg, mode);
    }
    Ok(total)
}
