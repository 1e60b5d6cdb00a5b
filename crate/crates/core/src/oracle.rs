//! Tile-level discrete oracle for the closed-form predictor.
//!
//! Steps the layer's tile sequence through a two-slot double buffer: the
//! fetch of tile `i+1` may start once the fetch of tile `i` has finished
//! (the memory engine is serial) and the compute of tile `i-1` has freed its
//! buffer slot. Unlike the closed form, the oracle pays the first tile's
//! exposed fetch plus the memory access latency, so it is always at least as
//! large; the gap is the predictor's steady-state error and amortizes over
//! long tile sequences.

use crate::predict::{tile_counts, TileMode};
use crate::NpuConfig;

/// Which phase bounded the layer overall.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundBy {
    Compute,
    Memory,
}

#[derive(Debug, Clone, Copy)]
pub struct OracleResult {
    pub cycles: f64,
    pub bound_by: BoundBy,
}

/// Simulate one layer tile by tile and return total cycles including
/// pipeline fill. Uses generalized (ceiling) tile counts.
pub fn oracle_layer_time(m: u64, k: u64, n: u64, cfg: &NpuConfig) -> f64 {
    oracle_layer(m, k, n, cfg).cycles
}

pub fn oracle_layer(m: u64, k: u64, n: u64, cfg: &NpuConfig) -> OracleResult {
    let tb = tile_counts(m, k, n, cfg, TileMode::Generalized);
    let mk = m.div_ceil(cfg.sw) * k.div_ceil(cfg.sh);
    let inner_per_group = n / cfg.acc;

    let latency = cfg.mem_latency_cycles as f64;
    let mut compute_done = [0.0f64; 2];
    let mut mem_free_at = 0.0f64; // when the memory engine finishes its last fetch
    let mut prev_compute_done = 0.0f64;
    let mut compute_stalled = 0.0f64;

    let mut idx: u64 = 0;
    let mut step = |c: f64, mem: f64| {
        let slot = (idx % 2) as usize;
        // Fetch waits for the memory engine and for the slot's previous
        // occupant to be consumed.
        let fetch_start = mem_free_at.max(compute_done[slot]);
        let this_fetch_done = fetch_start + mem + if idx == 0 { latency } else { 0.0 };
        mem_free_at = this_fetch_done;

        let compute_start = this_fetch_done.max(prev_compute_done);
        compute_stalled += (this_fetch_done - prev_compute_done).max(0.0);
        let done = compute_start + c;
        compute_done[slot] = done;
        prev_compute_done = done;
        idx += 1;
    };

    for _group in 0..mk {
        for _ in 0..inner_per_group {
            step(tb.c1, tb.m1);
        }
        if tb.phi > 0 {
            step(tb.c2, tb.m2);
        }
    }

    let total = prev_compute_done;
    // The fill term aside, a layer is memory bound when computes spent more
    // time waiting on fetches than the one-tile fill explains.
    let fill = latency + tb.m1.max(tb.m2);
    let bound_by = if compute_stalled > fill + 1e-9 {
        BoundBy::Memory
    } else {
        BoundBy::Compute
    };
    OracleResult {
        cycles: total,
        bound_by,
    }
}
