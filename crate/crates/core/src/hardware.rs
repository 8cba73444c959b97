//! Device constants and active-area accounting for mesh and metaline layers.

use serde::{Deserialize, Serialize};

use crate::blocks::mzi::full_unit_count;
use crate::error::{Error, Result};
use crate::odeflow::Method;
use crate::train::{Backend, ModelMode};

/// Published device dimensions and step times. Lengths in micrometres, times in picoseconds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HardwareConstants {
    pub mzi_footprint_um: (f64, f64),
    pub metaline_width_um: f64,
    pub feedback_waveguide_um: (f64, f64),
    pub ring_radius_um: f64,
    pub delay_line_pitch_um: f64,
    /// Upper bound.
    pub step_time_dpu_ps: f64,
    /// Approximate.
    pub step_time_mzi_ps: f64,
}

pub const HARDWARE: HardwareConstants = HardwareConstants {
    mzi_footprint_um: (0.28, 1.0),
    metaline_width_um: 0.3,
    feedback_waveguide_um: (0.22, 0.45),
    ring_radius_um: 47.5,
    delay_line_pitch_um: 48.0,
    step_time_dpu_ps: 1.0,
    step_time_mzi_ps: 120.0,
};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub backend: Backend,
    pub mode: ModelMode,
    pub ports: usize,
    /// Hidden layers in the chain (onode/plain) or residual layers (resnet).
    pub layers: usize,
    pub metalines: usize,
    /// Sample pitch of the metalines in micrometres.
    pub pitch_um: f64,
    pub method: Method,
    pub steps: usize,
    /// Residual depth of the comparison network.
    pub compare_resnet_layers: usize,
}

impl Architecture {
    pub fn validate(&self) -> Result<()> {
        if self.ports < 2 || self.layers == 0 || self.compare_resnet_layers == 0 || self.steps == 0 {
            return Err(Error::Config(
                "hardware report needs ports >= 2 and positive layers, steps and comparison depth".into(),
            ));
        }
        if self.backend == Backend::Dpu && (self.metalines == 0 || !(self.pitch_um > 0.0)) {
            return Err(Error::Config("DPU report needs metalines and a positive pitch".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HardwareReport {
    pub architecture: Architecture,
    pub constants: HardwareConstants,
    pub hidden_replicas: usize,
    pub mzi_count: usize,
    pub mzi_area_um2: f64,
    pub metaline_count: usize,
    pub metaline_area_um2: f64,
    pub total_area_um2: f64,
    pub step_time_ps: f64,
    /// Passes through the hidden layers per inference.
    pub passes_per_inference: usize,
    pub latency_ps: f64,
    pub compare_resnet_area_um2: f64,
    /// This architecture's area over the comparison network's area.
    pub area_ratio_vs_resnet: f64,
}

fn area(arch: &Architecture, replicas: usize) -> (usize, f64, usize, f64) {
    match arch.backend {
        Backend::Mzi => {
            let count = replicas * full_unit_count(arch.ports);
            let (w, h) = HARDWARE.mzi_footprint_um;
            (count, count as f64 * w * h, 0, 0.0)
        }
        Backend::Dpu => {
            let count = replicas * arch.metalines;
            let length = arch.ports as f64 * arch.pitch_um;
            (0, 0.0, count, count as f64 * HARDWARE.metaline_width_um * length)
        }
    }
}

pub fn hardware_report(arch: &Architecture) -> Result<HardwareReport> {
    arch.validate()?;
    let replicas = arch.layers;
    let (mzi_count, mzi_area, metaline_count, metaline_area) = area(arch, replicas);
    let total = mzi_area + metaline_area;
    let (_, cm, _, cl) = area(arch, arch.compare_resnet_layers);
    let compare = cm + cl;
    let step_time = match arch.backend {
        Backend::Mzi => HARDWARE.step_time_mzi_ps,
        Backend::Dpu => HARDWARE.step_time_dpu_ps,
    };
    let passes = match arch.mode {
        ModelMode::Onode => arch.steps * arch.method.stages(),
        ModelMode::Resnet | ModelMode::Plain => 1,
    };
    Ok(HardwareReport {
        architecture: *arch,
        constants: HARDWARE,
        hidden_replicas: replicas,
        mzi_count,
        mzi_area_um2: mzi_area,
        metaline_count,
        metaline_area_um2: metaline_area,
        total_area_um2: total,
        step_time_ps: step_time,
        passes_per_inference: passes,
        latency_ps: passes as f64 * step_time,
        compare_resnet_area_um2: compare,
        area_ratio_vs_resnet: total / compare,
    })
}
