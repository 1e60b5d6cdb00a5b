//! NPU hardware description.
//!
//! The default instance mirrors a TPU-class device: a 128x128 weight-stationary
//! systolic array at 700 MHz with 8 MiB of activation SRAM, 4 MiB of weight
//! SRAM, 358 GB/s of DRAM bandwidth, and a 100-cycle memory access latency.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Hardware parameters of the simulated NPU.
///
/// `sw`/`sh` are the systolic-array width and height in processing elements;
/// `acc` is the output-tile accumulation width in elements. One GEMM
/// instruction multiplies an `sh x sw` weight tile with an `sh x acc`
/// activation tile, emitting an `sw x acc` output tile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NpuConfig {
    #[serde(default = "default_array_dim")]
    pub sw: u64,
    #[serde(default = "default_array_dim")]
    pub sh: u64,
    #[serde(default = "default_array_dim")]
    pub acc: u64,
    /// PE clock in Hz.
    #[serde(default = "default_freq_hz")]
    pub freq_hz: f64,
    /// Datum size in bytes (16-bit MACs by default).
    #[serde(default = "default_elem_bytes")]
    pub elem_bytes: u64,
    #[serde(default = "default_dram_bw")]
    pub dram_bw_bytes_per_sec: f64,
    #[serde(default = "default_mem_latency")]
    pub mem_latency_cycles: u64,
    /// Activation SRAM (UBUF plus accumulator queue).
    #[serde(default = "default_ubuf_bytes")]
    pub ubuf_bytes: u64,
    /// Weight SRAM.
    #[serde(default = "default_wbuf_bytes")]
    pub wbuf_bytes: u64,
    /// Device memory available for checkpointed task state; exceeding it only
    /// emits a warning.
    #[serde(default = "default_npu_memory_bytes")]
    pub npu_memory_bytes: u64,
}

fn default_array_dim() -> u64 {
    128
}
fn default_freq_hz() -> f64 {
    700e6
}
fn default_elem_bytes() -> u64 {
    2
}
fn default_dram_bw() -> f64 {
    358e9
}
fn default_mem_latency() -> u64 {
    100
}
fn default_ubuf_bytes() -> u64 {
    8 * 1024 * 1024
}
fn default_wbuf_bytes() -> u64 {
    4 * 1024 * 1024
}
fn default_npu_memory_bytes() -> u64 {
    1024 * 1024 * 1024
}

impl Default for NpuConfig {
    fn default() -> Self {
        Self {
            sw: default_array_dim(),
            sh: default_array_dim(),
            acc: default_array_dim(),
            freq_hz: default_freq_hz(),
            elem_bytes: default_elem_bytes(),
            dram_bw_bytes_per_sec: default_dram_bw(),
            mem_latency_cycles: default_mem_latency(),
            ubuf_bytes: default_ubuf_bytes(),
            wbuf_bytes: default_wbuf_bytes(),
            npu_memory_bytes: default_npu_memory_bytes(),
        }
    }
}

impl NpuConfig {
    /// DRAM bandwidth in bytes per PE clock cycle.
    pub fn bw_bytes_per_cycle(&self) -> f64 {
        self.dram_bw_bytes_per_sec / self.freq_hz
    }

    /// DRAM bandwidth in data elements per PE clock cycle.
    pub fn bw_elems_per_cycle(&self) -> f64 {
        self.dram_bw_bytes_per_sec / (self.freq_hz * self.elem_bytes as f64)
    }

    /// Convert a cycle count to microseconds at the configured clock.
    pub fn cycles_to_us(&self, cycles: f64) -> f64 {
        cycles / self.freq_hz * 1e6
    }

    /// Convert microseconds to cycles at the configured clock.
    pub fn us_to_cycles(&self, us: f64) -> f64 {
        us * self.freq_hz / 1e6
    }

    /// Parse a TOML config document, fill defaults, and validate.
    pub fn from_toml(text: &str) -> Result<Self> {
        let raw: NpuConfig =
            toml::from_str(text).map_err(|e| Error::Parse(format!("npu config: {e}")))?;
        validate_config(raw)
    }
}

/// Check field ranges and make sure the derived bandwidth figures are usable.
pub fn validate_config(raw: NpuConfig) -> Result<NpuConfig> {
    fn dim(field: &'static str, v: u64) -> Result<()> {
        if v == 0 {
            return Err(Error::Config {
                field,
                msg: format!("{field} must be >= 1"),
            });
        }
        Ok(())
    }
    dim("sw", raw.sw)?;
    dim("sh", raw.sh)?;
    dim("acc", raw.acc)?;
    dim("elem_bytes", raw.elem_bytes)?;
    dim("ubuf_bytes", raw.ubuf_bytes)?;
    dim("wbuf_bytes", raw.wbuf_bytes)?;
    if raw.freq_hz.is_nan() || raw.freq_hz <= 0.0 || !raw.freq_hz.is_finite() {
        return Err(Error::Config {
            field: "freq_hz",
            msg: "frequency must be finite and > 0".into(),
        });
    }
    if raw.dram_bw_bytes_per_sec.is_nan()
        || raw.dram_bw_bytes_per_sec <= 0.0
        || !raw.dram_bw_bytes_per_sec.is_finite()
    {
        return Err(Error::Config {
            field: "dram_bw_bytes_per_sec",
            msg: "bandwidth must be finite and > 0".into(),
        });
    }
    let bw = raw.bw_elems_per_cycle();
    if !bw.is_finite() || bw <= 0.0 {
        return Err(Error::Config {
            field: "dram_bw_bytes_per_sec",
            msg: format!("derived elems/cycle bandwidth {bw} is unusable"),
        });
    }
    Ok(raw)
}
