//! Serialization of metric fields and weight profiles.
//!
//! Two formats share one container: JSON (self-describing via serde) and a
//! binary layout. Binary layout, little-endian:
//!
//! ```text
//! magic   b"SCLF"
//! u32     version (1)
//! u32     dim
//! per axis: u64 nodes, f64 spacing, u8 periodic, f64 origin
//! u8      boundary kind (0 periodic, 1 box) -- redundant, for readers
//! u64     value count, then f64 values: per-node upper-triangular metric
//!         entries in lexicographic (row-major) node order
//! u8      has weights (0/1)
//! if 1:   f64 d0, f64 rho_floor, then rho, phi, dist as u64 count + f64 data
//! ```

use crate::chart::{AxisSpec, BoundaryKind, ChartSpec};
use crate::field::{MetricField, ScalarField};
use crate::weights::WeightProfile;
use serde::{Deserialize, Serialize};
use std::io::{self, Read, Write};
use std::path::Path;

/// A metric with optional weight data, as stored on disk.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricContainer {
    pub metric: MetricField,
    pub weights: Option<WeightProfile>,
}

const MAGIC: &[u8; 4] = b"SCLF";
const VERSION: u32 = 1;

fn write_f64s<W: Write>(w: &mut W, data: &[f64]) -> io::Result<()> {
    w.write_all(&(data.len() as u64).to_le_bytes())?;
    for v in data {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_f64s<R: Read>(r: &mut R) -> io::Result<Vec<f64>> {
    let mut buf8 = [0u8; 8];
    r.read_exact(&mut buf8)?;
    let len = u64::from_le_bytes(buf8) as usize;
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        r.read_exact(&mut buf8)?;
        out.push(f64::from_le_bytes(buf8));
    }
    Ok(out)
}

pub fn write_binary<W: Write>(w: &mut W, container: &MetricContainer) -> io::Result<()> {
    let chart = container.metric.chart();
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(chart.dim() as u32).to_le_bytes())?;
    for ax in chart.axes() {
        w.write_all(&(ax.nodes as u64).to_le_bytes())?;
        w.write_all(&ax.spacing.to_le_bytes())?;
        w.write_all(&[ax.periodic as u8])?;
        w.write_all(&ax.origin.to_le_bytes())?;
    }
    w.write_all(&[match chart.boundary_kind() {
        BoundaryKind::Periodic => 0u8,
        BoundaryKind::BoxWithBoundary => 1u8,
    }])?;
    write_f64s(w, container.metric.data())?;
    match &container.weights {
        None => w.write_all(&[0u8])?,
        Some(p) => {
            w.write_all(&[1u8])?;
            w.write_all(&p.d0.to_le_bytes())?;
            w.write_all(&p.rho_floor.to_le_bytes())?;
            write_f64s(w, &p.rho.data)?;
            write_f64s(w, &p.phi.data)?;
            write_f64s(w, &p.dist.data)?;
        }
    }
    Ok(())
}

pub fn read_binary<R: Read>(r: &mut R) -> io::Result<MetricContainer> {
    let bad = |msg: &str| io::Error::new(io::ErrorKind::InvalidData, msg.to_string());
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(bad("not a metric container (bad magic)"));
    }
    let mut buf4 = [0u8; 4];
    r.read_exact(&mut buf4)?;
    if u32::from_le_bytes(buf4) != VERSION {
        return Err(bad("unsupported container version"));
    }
    r.read_exact(&mut buf4)?;
    let dim = u32::from_le_bytes(buf4) as usize;
    let mut axes = Vec::with_capacity(dim);
    let mut buf8 = [0u8; 8];
    let mut buf1 = [0u8; 1];
    for _ in 0..dim {
        r.read_exact(&mut buf8)?;
        let nodes = u64::from_le_bytes(buf8) as usize;
        r.read_exact(&mut buf8)?;
        let spacing = f64::from_le_bytes(buf8);
        r.read_exact(&mut buf1)?;
        let periodic = buf1[0] != 0;
        r.read_exact(&mut buf8)?;
        let origin = f64::from_le_bytes(buf8);
        axes.push(AxisSpec { nodes, spacing, periodic, origin });
    }
    r.read_exact(&mut buf1)?; // boundary kind, derived from the axes
    let chart = ChartSpec::new(axes).map_err(|e| bad(&e.to_string()))?;
    let data = read_f64s(r)?;
    let metric = MetricField::new(chart.clone(), data).map_err(|e| bad(&e.to_string()))?;
    r.read_exact(&mut buf1)?;
    let weights = if buf1[0] == 1 {
        r.read_exact(&mut buf8)?;
        let d0 = f64::from_le_bytes(buf8);
        r.read_exact(&mut buf8)?;
        let rho_floor = f64::from_le_bytes(buf8);
        let rho = read_f64s(r)?;
        let phi = read_f64s(r)?;
        let dist = read_f64s(r)?;
        let clamped: Vec<bool> = rho.iter().map(|&v| v == 0.0).collect();
        let any_clamped = clamped.iter().any(|&c| c);
        Some(WeightProfile {
            d0,
            rho_floor,
            rho: ScalarField { chart: chart.clone(), data: rho },
            phi: ScalarField { chart: chart.clone(), data: phi },
            dist: ScalarField { chart, data: dist },
            clamped,
            any_clamped,
        })
    } else {
        None
    };
    Ok(MetricContainer { metric, weights })
}

/// Load a container from a path, dispatching on the extension: `.json` is
/// JSON, anything else the binary layout.
pub fn load(path: &Path) -> io::Result<MetricContainer> {
    let bytes = std::fs::read(path)?;
    if path.extension().is_some_and(|e| e == "json") {
        let container: MetricContainer = serde_json::from_slice(&bytes)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e.to_string()))?;
        container
            .metric
            .revalidate()
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e.to_string()))?;
        Ok(container)
    } else {
        read_binary(&mut &bytes[..])
    }
}

/// Serialize a container to bytes in the format implied by the extension.
pub fn to_bytes(container: &MetricContainer, json: bool) -> io::Result<Vec<u8>> {
    if json {
        serde_json::to_vec_pretty(container)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e.to_string()))
    } else {
        let mut out = Vec::new();
        write_binary(&mut out, container)?;
        Ok(out)
    }
}

pub fn save(path: &Path, container: &MetricContainer) -> io::Result<()> {
    let json = path.extension().is_some_and(|e| e == "json");
    std::fs::write(path, to_bytes(container, json)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;
    use crate::weights::build_weights;

    #[test]
    fn binary_round_trip_is_bit_exact() {
        let g = models::bump_metric(
            &crate::chart::uniform_chart(2, 12, 0.0, 1.0, false).unwrap(),
            0.15,
            0.5,
        );
        let profile = build_weights(&g, 0.0625, 1e-300).unwrap();
        let container = MetricContainer { metric: g, weights: Some(profile) };
        let mut bytes = Vec::new();
        write_binary(&mut bytes, &container).unwrap();
        let back = read_binary(&mut &bytes[..]).unwrap();
        assert_eq!(back.metric.data(), container.metric.data());
        assert_eq!(back.metric.chart(), container.metric.chart());
        let wp = back.weights.unwrap();
        let orig = container.weights.unwrap();
        assert_eq!(wp.rho.data, orig.rho.data);
        assert_eq!(wp.phi.data, orig.phi.data);
        assert_eq!(wp.dist.data, orig.dist.data);
        assert_eq!(wp.d0, orig.d0);
    }

    #[test]
    fn json_round_trip() {
        let g = models::flat_torus(2, 8, 1.0);
        let container = MetricContainer { metric: g, weights: None };
        let bytes = to_bytes(&container, true).unwrap();
        let back: MetricContainer = serde_json::from_slice(&bytes).unwrap();
        assert_eq!(back.metric.data(), container.metric.data());
    }

    #[test]
    fn bad_magic_rejected() {
        let bytes = b"NOPE1234";
        assert!(read_binary(&mut &bytes[..]).is_err());
    }
}
