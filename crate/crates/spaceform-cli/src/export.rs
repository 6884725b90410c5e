//! CSV and OBJ writers for sampled immersions.
//!
//! Doubles use Rust's shortest round-trip formatting, so identical fields
//! produce byte-identical files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use spaceform_core::grid::Index;
use spaceform_core::immersion::ImmersionSample;

use crate::error::{CliError, Result};

/// Header `u1,u2,u3,x1,...,xm`, then one row per unmasked node in
/// lexicographic (i₁,i₂,i₃) order. Returns the number of data rows.
pub fn write_csv<W: Write>(field: &ImmersionSample, w: &mut W) -> std::io::Result<usize> {
    let m = field.dim();
    let mut header = String::from("u1,u2,u3");
    for a in 1..=m {
        header.push_str(&format!(",x{a}"));
    }
    writeln!(w, "{header}")?;
    let g = &field.grid;
    let mut rows = 0;
    for i in 0..g.n[0] {
        for j in 0..g.n[1] {
            for k in 0..g.n[2] {
                let idx = [i, j, k];
                let Some(x) = &field.positions[g.linear(idx)] else { continue };
                let u = g.point(idx);
                let mut line = format!("{},{},{}", u[0], u[1], u[2]);
                for c in x {
                    line.push_str(&format!(",{c}"));
                }
                writeln!(w, "{line}")?;
                rows += 1;
            }
        }
    }
    Ok(rows)
}

pub fn export_csv(field: &ImmersionSample, path: &Path) -> Result<usize> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let rows = write_csv(field, &mut w).map_err(|e| CliError::io(path, e))?;
    w.flush().map_err(|e| CliError::io(path, e))?;
    Ok(rows)
}

/// A coordinate slice of the parameter box and the three ambient
/// coordinates to keep.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjSlice {
    pub axis: usize,
    pub value: f64,
    pub projection: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ObjStats {
    pub vertices: usize,
    pub faces: usize,
}

impl ObjSlice {
    fn check(&self, field: &ImmersionSample) -> Result<usize> {
        let p = &self.projection;
        let distinct = p.len() == 3 && p[0] != p[1] && p[0] != p[2] && p[1] != p[2];
        if !distinct || p.iter().any(|&a| a >= field.dim()) {
            return Err(CliError::BadProjection(p.clone()));
        }
        if self.axis > 2 {
            return Err(CliError::InvalidSlice(format!("axis {} is not a parameter axis", self.axis)));
        }
        let g = &field.grid;
        let n = g.n[self.axis];
        let i = if n == 1 {
            0
        } else {
            let t = (self.value - g.lo[self.axis]) / g.step(self.axis);
            t.round().clamp(0.0, (n - 1) as f64) as usize
        };
        let off = (g.coord(self.axis, i) - self.value).abs();
        let slack = if n == 1 { 1e-12 * g.scale() } else { 1e-9 * g.step(self.axis) };
        if !self.value.is_finite() || off > slack {
            return Err(CliError::InvalidSlice(format!(
                "u{} = {} is not a grid node (nearest {})",
                self.axis + 1,
                self.value,
                g.coord(self.axis, i)
            )));
        }
        Ok(i)
    }
}

/// Vertices of the unmasked slice nodes and two triangles per grid cell
/// whose four corners are all present.
pub fn write_obj<W: Write>(field: &ImmersionSample, slice: &ObjSlice, w: &mut W) -> Result<ObjStats> {
    let fixed = slice.check(field)?;
    let g = &field.grid;
    let (a, b) = match slice.axis {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    };
    let node = |i: usize, j: usize| -> Index {
        let mut idx = [0; 3];
        idx[slice.axis] = fixed;
        idx[a] = i;
        idx[b] = j;
        idx
    };
    let io = |e| CliError::Io { path: "<obj>".into(), source: e };
    let mut number = vec![None; g.n[a] * g.n[b]];
    let mut next = 1usize;
    for i in 0..g.n[a] {
        for j in 0..g.n[b] {
            if let Some(x) = &field.positions[g.linear(node(i, j))] {
                let p = &slice.projection;
                writeln!(w, "v {} {} {}", x[p[0]], x[p[1]], x[p[2]]).map_err(io)?;
                number[i * g.n[b] + j] = Some(next);
                next += 1;
            }
        }
    }
    let mut faces = 0;
    for i in 0..g.n[a].saturating_sub(1) {
        for j in 0..g.n[b].saturating_sub(1) {
            let at = |di: usize, dj: usize| number[(i + di) * g.n[b] + j + dj];
            if let (Some(v00), Some(v10), Some(v11), Some(v01)) = (at(0, 0), at(1, 0), at(1, 1), at(0, 1)) {
                writeln!(w, "f {v00} {v10} {v11}").map_err(io)?;
                writeln!(w, "f {v00} {v11} {v01}").map_err(io)?;
                faces += 2;
            }
        }
    }
    Ok(ObjStats { vertices: next - 1, faces })
}

pub fn export_obj(field: &ImmersionSample, slice: &ObjSlice, path: &Path) -> Result<ObjStats> {
    let mut buf = Vec::new();
    let stats = write_obj(field, slice, &mut buf)?;
    std::fs::write(path, buf).map_err(|e| CliError::io(path, e))?;
    Ok(stats)
}
