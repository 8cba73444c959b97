//! Optical field states over waveguide ports, input encodings and readouts.
//!
//! A single state is an [`OpticalState`]. The solver and training code work
//! on [`Fields`], a batch of states stored one sample per row.

use ndarray::{Array2, ArrayView1, ArrayView2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Batch of port amplitude vectors, shape `(samples, ports)`.
pub type Fields = Array2<C64>;

/// Number of classes read out by the classification tasks.
pub const CLASS_COUNT: usize = 10;

/// Complex amplitudes over `port_count` waveguide ports.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OpticalState {
    amplitudes: Vec<C64>,
}

impl OpticalState {
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.is_empty() {
            return Err(Error::Argument(
                "optical state needs at least one port".into(),
            ));
        }
        if let Some(i) = amplitudes
            .iter()
            .position(|a| !(a.re.is_finite() && a.im.is_finite()))
        {
            return Err(Error::NonFinite(format!("optical state amplitude {i}")));
        }
        Ok(Self { amplitudes })
    }

    pub fn zeros(port_count: usize) -> Result<Self> {
        Self::new(vec![C64::new(0.0, 0.0); port_count])
    }

    pub fn from_row(row: ArrayView1<'_, C64>) -> Result<Self> {
        Self::new(row.to_vec())
    }

    pub fn port_count(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amplitudes
    }

    pub fn total_energy(&self) -> f64 {
        total_energy(self)
    }

    /// Single-row batch holding this state.
    pub fn to_fields(&self) -> Fields {
        Array2::from_shape_vec((1, self.port_count()), self.amplitudes.clone())
            .expect("row length equals port count")
    }

    /// First row of a batch as a validated state.
    pub fn from_fields(fields: &Fields) -> Result<Self> {
        if fields.nrows() == 0 {
            return Err(Error::Argument("empty field batch".into()));
        }
        Self::from_row(fields.row(0))
    }
}

impl<'de> Deserialize<'de> for OpticalState {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            amplitudes: Vec<C64>,
        }
        let raw = Raw::deserialize(d)?;
        OpticalState::new(raw.amplitudes).map_err(serde::de::Error::custom)
    }
}

/// Sum of squared magnitudes over all ports.
pub fn total_energy(state: &OpticalState) -> f64 {
    state.amplitudes.iter().map(|a| a.norm_sqr()).sum()
}

/// Per-row energies of a batch.
pub fn row_energies(fields: ArrayView2<'_, C64>) -> Vec<f64> {
    fields
        .rows()
        .into_iter()
        .map(|r| r.iter().map(|a| a.norm_sqr()).sum())
        .collect()
}

/// The ten ports whose intensities are read out as class scores.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReadoutSpec {
    port_count: usize,
    class_ports: [usize; CLASS_COUNT],
}

impl ReadoutSpec {
    pub fn new(class_ports: &[usize], port_count: usize) -> Result<Self> {
        if class_ports.len() != CLASS_COUNT {
            return Err(Error::Argument(format!(
                "readout needs exactly {CLASS_COUNT} ports, got {}",
                class_ports.len()
            )));
        }
        for (i, &p) in class_ports.iter().enumerate() {
            if p >= port_count {
                return Err(Error::Argument(format!(
                    "readout port {p} out of range for {port_count} ports"
                )));
            }
            if class_ports[..i].contains(&p) {
                return Err(Error::Argument(format!("readout port {p} listed twice")));
            }
        }
        let mut ports = [0; CLASS_COUNT];
        ports.copy_from_slice(class_ports);
        Ok(Self {
            port_count,
            class_ports: ports,
        })
    }

    /// Ten contiguous ports centred in the port range, starting at
    /// `floor((N - 10) / 2)`.
    pub fn centered(port_count: usize) -> Result<Self> {
        if port_count < CLASS_COUNT {
            return Err(Error::Argument(format!(
                "{port_count} ports cannot host {CLASS_COUNT} readout ports"
            )));
        }
        let start = (port_count - CLASS_COUNT) / 2;
        let ports: Vec<usize> = (start..start + CLASS_COUNT).collect();
        Self::new(&ports, port_count)
    }

    pub fn ports(&self) -> &[usize; CLASS_COUNT] {
        &self.class_ports
    }

    pub fn port_count(&self) -> usize {
        self.port_count
    }

    fn check(&self, port_count: usize) -> Result<()> {
        if port_count != self.port_count {
            return Err(Error::shape("readout", self.port_count, port_count));
        }
        Ok(())
    }
}

/// Intensities `|a_p|^2` at the readout ports, in readout order.
pub fn read_intensities(state: &OpticalState, spec: &ReadoutSpec) -> Result<[f64; CLASS_COUNT]> {
    spec.check(state.port_count())?;
    Ok(row_intensities(
        ArrayView1::from(state.amplitudes()),
        spec,
    ))
}

pub(crate) fn row_intensities(row: ArrayView1<'_, C64>, spec: &ReadoutSpec) -> [f64; CLASS_COUNT] {
    let mut out = [0.0; CLASS_COUNT];
    for (o, &p) in out.iter_mut().zip(spec.class_ports.iter()) {
        *o = row[p].norm_sqr();
    }
    out
}

/// First port of the centred input window of width `width`.
pub fn centered_offset(port_count: usize, width: usize) -> usize {
    (port_count - width) / 2
}

/// Places a row-major flattened `k x k` crop on contiguous ports centred in
/// the port range; all other ports are dark.
pub fn encode_classification_input(crop: ArrayView2<'_, C64>, port_count: usize) -> Result<OpticalState> {
    let (rows, cols) = crop.dim();
    if rows != cols {
        return Err(Error::Argument(format!(
            "crop must be square, got {rows}x{cols}"
        )));
    }
    let width = rows * cols;
    if width > port_count {
        return Err(Error::Config(format!(
            "{rows}x{cols} crop needs {width} ports but only {port_count} available"
        )));
    }
    let offset = centered_offset(port_count, width);
    let mut amps = vec![C64::new(0.0, 0.0); port_count];
    for (slot, v) in amps[offset..offset + width].iter_mut().zip(crop.iter()) {
        *slot = *v;
    }
    OpticalState::new(amps)
}

/// Duplicates the point `x + iy` onto every port.
pub fn encode_trajectory_input(point: (f64, f64), port_count: usize) -> Result<OpticalState> {
    if port_count == 0 {
        return Err(Error::Argument("trajectory encoding needs at least one port".into()));
    }
    OpticalState::new(vec![C64::new(point.0, point.1); port_count])
}

/// Mean of the real and imaginary parts over all ports.
pub fn decode_trajectory_output(state: &OpticalState) -> (f64, f64) {
    let m = mean_amplitude(ArrayView1::from(state.amplitudes()));
    (m.re, m.im)
}

/// Running mean; exact when all entries are equal.
pub(crate) fn mean_amplitude(row: ArrayView1<'_, C64>) -> C64 {
    let mut mean = C64::new(0.0, 0.0);
    for (i, a) in row.iter().enumerate() {
        mean += (a - mean) / (i as f64 + 1.0);
    }
    mean
}
