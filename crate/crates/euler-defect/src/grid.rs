//! Uniform cell grids, state snapshots and space-time fields.
//!
//! Whole-space problems are truncated to a padded box: the outer extent
//! carries the far-field constants and every probe (test functions,
//! defect estimates, batteries) is confined to the inner box obtained by
//! removing the padding. Bounded-domain problems use the extent as the
//! physical domain itself.

use crate::algebra::Vec2;
use crate::eos::{FarField, FullState, IsentropicState};
use crate::{Error, Result};
use serde::Serialize;
use std::io::{BufRead, Write};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum BoundaryMode {
    /// Truncated whole space; `padding` is the slab width (per side, per
    /// axis) holding far-field values.
    FarFieldPadded {
        padding: f64,
    },
    BoundedDomain,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Grid {
    pub dim: usize,
    /// Cells per axis; the second entry is 1 in 1D.
    pub cells: [usize; 2],
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    pub mode: BoundaryMode,
}

impl Grid {
    pub fn new(
        dim: usize,
        cells: [usize; 2],
        lo: [f64; 2],
        hi: [f64; 2],
        mode: BoundaryMode,
    ) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::GridMismatch(format!("dim {dim} not in {{1, 2}}")));
        }
        let cells = if dim == 1 { [cells[0], 1] } else { cells };
        let (lo, hi) = if dim == 1 {
            ([lo[0], 0.0], [hi[0], 1.0])
        } else {
            (lo, hi)
        };
        for ax in 0..dim {
            if cells[ax] == 0 || !(hi[ax] > lo[ax]) {
                return Err(Error::GridMismatch(format!(
                    "axis {ax}: {} cells on [{}, {}]",
                    cells[ax], lo[ax], hi[ax]
                )));
            }
        }
        let grid = Grid {
            dim,
            cells,
            lo,
            hi,
            mode,
        };
        if dim == 2 {
            let hx = (hi[0] - lo[0]) / cells[0] as f64;
            let hy = (hi[1] - lo[1]) / cells[1] as f64;
            if ((hx - hy) / hx).abs() > 1e-12 {
                return Err(Error::GridMismatch(format!(
                    "cell width must match across axes: hx = {hx}, hy = {hy}"
                )));
            }
        }
        if let BoundaryMode::FarFieldPadded { padding } = mode {
            if !(padding >= 0.0) || !padding.is_finite() {
                return Err(Error::GridMismatch(format!("bad padding {padding}")));
            }
            for ax in 0..dim {
                if 2.0 * padding >= hi[ax] - lo[ax] {
                    return Err(Error::GridMismatch("padding swallows the whole box".into()));
                }
            }
        }
        Ok(grid)
    }

    /// Uniform 1D grid on [lo, hi].
    pub fn line(cells: usize, lo: f64, hi: f64, mode: BoundaryMode) -> Result<Self> {
        Grid::new(1, [cells, 1], [lo, 0.0], [hi, 0.0], mode)
    }

    /// Uniform square 2D grid.
    pub fn square(cells: usize, lo: f64, hi: f64, mode: BoundaryMode) -> Result<Self> {
        Grid::new(2, [cells, cells], [lo, lo], [hi, hi], mode)
    }

    pub fn h(&self) -> f64 {
        (self.hi[0] - self.lo[0]) / self.cells[0] as f64
    }

    pub fn cell_count(&self) -> usize {
        self.cells[0] * self.cells[1]
    }

    /// Cell volume h^d.
    pub fn cell_volume(&self) -> f64 {
        self.h().powi(self.dim as i32)
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.cells[0] + ix
    }

    pub fn coords_of(&self, idx: usize) -> (usize, usize) {
        (idx % self.cells[0], idx / self.cells[0])
    }

    pub fn center(&self, idx: usize) -> Vec2 {
        let (ix, iy) = self.coords_of(idx);
        let h = self.h();
        let x = self.lo[0] + (ix as f64 + 0.5) * h;
        let y = if self.dim == 2 {
            self.lo[1] + (iy as f64 + 0.5) * h
        } else {
            0.0
        };
        Vec2::new(x, y)
    }

    /// Inner box (extent minus padding in far-field mode).
    pub fn inner_lo(&self) -> [f64; 2] {
        match self.mode {
            BoundaryMode::FarFieldPadded { padding } => {
                let mut lo = self.lo;
                for ax in 0..self.dim {
                    lo[ax] += padding;
                }
                lo
            }
            BoundaryMode::BoundedDomain => self.lo,
        }
    }

    pub fn inner_hi(&self) -> [f64; 2] {
        match self.mode {
            BoundaryMode::FarFieldPadded { padding } => {
                let mut hi = self.hi;
                for ax in 0..self.dim {
                    hi[ax] -= padding;
                }
                hi
            }
            BoundaryMode::BoundedDomain => self.hi,
        }
    }

    pub fn in_inner_box(&self, x: Vec2) -> bool {
        let lo = self.inner_lo();
        let hi = self.inner_hi();
        let mut inside = x.x >= lo[0] && x.x <= hi[0];
        if self.dim == 2 {
            inside = inside && x.y >= lo[1] && x.y <= hi[1];
        }
        inside
    }

    /// Distance to the domain boundary (bounded mode geometry).
    pub fn boundary_distance(&self, x: Vec2) -> f64 {
        let mut d = (x.x - self.lo[0]).min(self.hi[0] - x.x);
        if self.dim == 2 {
            d = d.min(x.y - self.lo[1]).min(self.hi[1] - x.y);
        }
        d
    }

    /// Midpoint-rule integral of a cellwise integrand.
    pub fn integrate(&self, mut f: impl FnMut(usize, Vec2) -> f64) -> Result<f64> {
        let vol = self.cell_volume();
        let mut acc = 0.0;
        for idx in 0..self.cell_count() {
            let v = f(idx, self.center(idx));
            if v.is_nan() {
                return Err(Error::Nan("integrand"));
            }
            acc += v;
        }
        Ok(acc * vol)
    }

    /// Checks that `self` refines `coarse` (same extent and mode, cell
    /// counts integer multiples) and returns the per-axis ratio.
    pub fn refinement_ratio(&self, coarse: &Grid) -> Result<usize> {
        let same_box = self.dim == coarse.dim
            && (0..self.dim).all(|ax| {
                (self.lo[ax] - coarse.lo[ax]).abs() < 1e-12
                    && (self.hi[ax] - coarse.hi[ax]).abs() < 1e-12
            });
        if !same_box {
            return Err(Error::GridMismatch(
                "coarse grid extent differs from fine grid extent".into(),
            ));
        }
        if self.cells[0] % coarse.cells[0] != 0 {
            return Err(Error::GridMismatch(format!(
                "{} fine cells not a multiple of {} coarse cells",
                self.cells[0], coarse.cells[0]
            )));
        }
        let r = self.cells[0] / coarse.cells[0];
        if self.dim == 2 && self.cells[1] != coarse.cells[1] * r {
            return Err(Error::GridMismatch(
                "anisotropic refinement not supported".into(),
            ));
        }
        Ok(r)
    }

    /// Fine-cell indices covered by coarse cell `coarse_idx`.
    pub fn fine_cells_in(&self, coarse: &Grid, coarse_idx: usize) -> Result<Vec<usize>> {
        let r = self.refinement_ratio(coarse)?;
        let (cx, cy) = coarse.coords_of(coarse_idx);
        let mut out = Vec::with_capacity(r * if self.dim == 2 { r } else { 1 });
        let ry = if self.dim == 2 { r } else { 1 };
        for jy in 0..ry {
            for jx in 0..r {
                out.push(self.index(cx * r + jx, cy * ry + jy));
            }
        }
        Ok(out)
    }
}

/// Single-time state sample on a grid. `s` is present for the complete
/// system and absent for isentropic runs.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub grid: Grid,
    pub rho: Vec<f64>,
    pub m: Vec<Vec2>,
    pub s: Option<Vec<f64>>,
}

impl Snapshot {
    pub fn new(grid: Grid, rho: Vec<f64>, m: Vec<Vec2>, s: Option<Vec<f64>>) -> Result<Self> {
        let n = grid.cell_count();
        if rho.len() != n || m.len() != n || s.as_ref().map_or(false, |s| s.len() != n) {
            return Err(Error::GridMismatch(format!(
                "snapshot arrays do not match {n} cells"
            )));
        }
        Ok(Snapshot { grid, rho, m, s })
    }

    /// Constant-state snapshot.
    pub fn constant(grid: Grid, rho: f64, m: Vec2, s: Option<f64>) -> Self {
        let n = grid.cell_count();
        Snapshot {
            grid,
            rho: vec![rho; n],
            m: vec![m; n],
            s: s.map(|v| vec![v; n]),
        }
    }

    pub fn isentropic_state(&self, idx: usize) -> IsentropicState {
        IsentropicState::new(self.rho[idx], self.m[idx])
    }

    pub fn full_state(&self, idx: usize) -> Result<FullState> {
        let s = self.s.as_ref().ok_or(Error::NotApplicable(
            "full state",
            "snapshot has no entropy field",
        ))?;
        Ok(FullState::new(self.rho[idx], self.m[idx], s[idx]))
    }

    pub fn has_entropy(&self) -> bool {
        self.s.is_some()
    }

    /// Plain cell-averaging onto a coarser grid.
    pub fn average_onto(&self, coarse: &Grid) -> Result<Snapshot> {
        let n = coarse.cell_count();
        let mut rho = vec![0.0; n];
        let mut m = vec![Vec2::ZERO; n];
        let mut s = self.s.as_ref().map(|_| vec![0.0; n]);
        for c in 0..n {
            let fine = self.grid.fine_cells_in(coarse, c)?;
            let w = 1.0 / fine.len() as f64;
            for &i in &fine {
                rho[c] += w * self.rho[i];
                m[c] = m[c].add(self.m[i].scale(w));
                if let (Some(acc), Some(src)) = (s.as_mut(), self.s.as_ref()) {
                    acc[c] += w * src[i];
                }
            }
        }
        Snapshot::new(coarse.clone(), rho, m, s)
    }
}

/// Discrete space-time function: snapshots on a shared grid at strictly
/// increasing times starting from 0.
#[derive(Clone, Debug, PartialEq)]
pub struct SpaceTimeField {
    pub grid: Grid,
    pub times: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
    pub far: Option<FarField>,
    /// Refinement level within its sequence (0-based).
    pub level: usize,
}

impl SpaceTimeField {
    pub fn new(
        grid: Grid,
        times: Vec<f64>,
        snapshots: Vec<Snapshot>,
        far: Option<FarField>,
        level: usize,
    ) -> Result<Self> {
        if times.is_empty() || times[0] != 0.0 {
            return Err(Error::GridMismatch("times must start at 0".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::GridMismatch("times must strictly increase".into()));
        }
        if times.len() != snapshots.len() {
            return Err(Error::GridMismatch(format!(
                "{} times vs {} snapshots",
                times.len(),
                snapshots.len()
            )));
        }
        if snapshots.iter().any(|s| s.grid != grid) {
            return Err(Error::GridMismatch(
                "snapshots must share the field grid".into(),
            ));
        }
        Ok(SpaceTimeField {
            grid,
            times,
            snapshots,
            far,
            level,
        })
    }

    pub fn t_final(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn has_entropy(&self) -> bool {
        self.snapshots.first().map_or(false, Snapshot::has_entropy)
    }

    /// Trapezoid weights over the stored times restricted to
    /// `[t0, t1]` (subset of stored times required for the endpoints to
    /// be meaningful). Returns (snapshot index, weight) pairs.
    pub fn time_weights(&self, t0: f64, t1: f64) -> Result<Vec<(usize, f64)>> {
        if !(t1 > t0) {
            return Err(Error::GridMismatch(format!("bad window [{t0}, {t1}]")));
        }
        let idx: Vec<usize> = (0..self.times.len())
            .filter(|&k| self.times[k] >= t0 - 1e-14 && self.times[k] <= t1 + 1e-14)
            .collect();
        if idx.len() < 2 {
            return Err(Error::GridMismatch(format!(
                "window [{t0}, {t1}] covers fewer than two snapshots"
            )));
        }
        let mut weights = vec![0.0; idx.len()];
        for w in 0..idx.len() - 1 {
            let dt = self.times[idx[w + 1]] - self.times[idx[w]];
            weights[w] += 0.5 * dt;
            weights[w + 1] += 0.5 * dt;
        }
        Ok(idx.into_iter().zip(weights).collect())
    }

    /// Trapezoid-in-time, midpoint-in-space integral of a cellwise
    /// integrand over [0, tau] x box.
    pub fn spacetime_integral(
        &self,
        tau: f64,
        mut f: impl FnMut(&Snapshot, f64, usize, Vec2) -> f64,
    ) -> Result<f64> {
        let weights = self.time_weights(0.0, tau)?;
        let mut acc = 0.0;
        for (k, w) in weights {
            let snap = &self.snapshots[k];
            let t = self.times[k];
            acc += w * self.grid.integrate(|idx, x| f(snap, t, idx, x))?;
        }
        Ok(acc)
    }
}

// ---------------------------------------------------------------------------
// Field serialization. Line-oriented text, one record per line, fields
// comma-separated, floats in shortest round-trip decimal form (exact
// f64 round-trip). Layout:
//
//   eulerfield v1
//   dim,<1|2>
//   cells,<nx>,<ny>
//   lo,<x>,<y>
//   hi,<x>,<y>
//   mode,far_field_padded,<padding>   |   mode,bounded_domain
//   level,<n>
//   far,<rho>,<ux>,<uy>               |   far,none
//   fields,rho,mx,my[,s]
//   times,<t0>,<t1>,...
//   snapshot,<k>                       (for each k, in order)
//   <rho>,<mx>,<my>[,<s>]              (cell_count lines, row-major)
// ---------------------------------------------------------------------------

fn fmt_f(v: f64) -> String {
    format!("{v}")
}

pub fn write_field(field: &SpaceTimeField, w: &mut impl Write) -> Result<()> {
    let g = &field.grid;
    writeln!(w, "eulerfield v1")?;
    writeln!(w, "dim,{}", g.dim)?;
    writeln!(w, "cells,{},{}", g.cells[0], g.cells[1])?;
    writeln!(w, "lo,{},{}", fmt_f(g.lo[0]), fmt_f(g.lo[1]))?;
    writeln!(w, "hi,{},{}", fmt_f(g.hi[0]), fmt_f(g.hi[1]))?;
    match g.mode {
        BoundaryMode::FarFieldPadded { padding } => {
            writeln!(w, "mode,far_field_padded,{}", fmt_f(padding))?
        }
        BoundaryMode::BoundedDomain => writeln!(w, "mode,bounded_domain")?,
    }
    writeln!(w, "level,{}", field.level)?;
    match &field.far {
        Some(f) => writeln!(w, "far,{},{},{}", fmt_f(f.rho), fmt_f(f.u.x), fmt_f(f.u.y))?,
        None => writeln!(w, "far,none")?,
    }
    let with_s = field.has_entropy();
    writeln!(w, "fields,rho,mx,my{}", if with_s { ",s" } else { "" })?;
    let times: Vec<String> = field.times.iter().map(|t| fmt_f(*t)).collect();
    writeln!(w, "times,{}", times.join(","))?;
    for (k, snap) in field.snapshots.iter().enumerate() {
        writeln!(w, "snapshot,{k}")?;
        for idx in 0..g.cell_count() {
            if with_s {
                writeln!(
                    w,
                    "{},{},{},{}",
                    fmt_f(snap.rho[idx]),
                    fmt_f(snap.m[idx].x),
                    fmt_f(snap.m[idx].y),
                    fmt_f(snap.s.as_ref().unwrap()[idx])
                )?;
            } else {
                writeln!(
                    w,
                    "{},{},{}",
                    fmt_f(snap.rho[idx]),
                    fmt_f(snap.m[idx].x),
                    fmt_f(snap.m[idx].y)
                )?;
            }
        }
    }
    Ok(())
}

fn parse_f(tok: &str, what: &str) -> Result<f64> {
    tok.trim()
        .parse::<f64>()
        .map_err(|_| Error::Format(format!("bad float '{tok}' in {what}")))
}

pub fn read_field(r: impl BufRead) -> Result<SpaceTimeField> {
    let mut lines = r.lines();
    let mut next = |what: &str| -> Result<String> {
        lines
            .next()
            .ok_or_else(|| Error::Format(format!("unexpected end of field data before {what}")))?
            .map_err(Error::Io)
    };
    let header = next("header")?;
    if header.trim() != "eulerfield v1" {
        return Err(Error::Format(format!("unknown field header '{header}'")));
    }
    let expect = |line: String, tag: &str| -> Result<Vec<String>> {
        let parts: Vec<String> = line.trim().split(',').map(str::to_string).collect();
        if parts.first().map(String::as_str) != Some(tag) {
            return Err(Error::Format(format!(
                "expected '{tag}' record, got '{line}'"
            )));
        }
        Ok(parts)
    };
    let dim = expect(next("dim")?, "dim")?[1]
        .parse::<usize>()
        .map_err(|_| Error::Format("bad dim".into()))?;
    let cells_rec = expect(next("cells")?, "cells")?;
    let cells = [
        cells_rec[1]
            .parse::<usize>()
            .map_err(|_| Error::Format("bad cells".into()))?,
        cells_rec[2]
            .parse::<usize>()
            .map_err(|_| Error::Format("bad cells".into()))?,
    ];
    let lo_rec = expect(next("lo")?, "lo")?;
    let lo = [parse_f(&lo_rec[1], "lo")?, parse_f(&lo_rec[2], "lo")?];
    let hi_rec = expect(next("hi")?, "hi")?;
    let hi = [parse_f(&hi_rec[1], "hi")?, parse_f(&hi_rec[2], "hi")?];
    let mode_rec = expect(next("mode")?, "mode")?;
    let mode = match mode_rec[1].as_str() {
        "far_field_padded" => BoundaryMode::FarFieldPadded {
            padding: parse_f(&mode_rec[2], "padding")?,
        },
        "bounded_domain" => BoundaryMode::BoundedDomain,
        other => return Err(Error::Format(format!("unknown mode '{other}'"))),
    };
    let level = expect(next("level")?, "level")?[1]
        .parse::<usize>()
        .map_err(|_| Error::Format("bad level".into()))?;
    let far_rec = expect(next("far")?, "far")?;
    let far = if far_rec[1] == "none" {
        None
    } else {
        Some(FarField::new(
            parse_f(&far_rec[1], "far")?,
            Vec2::new(parse_f(&far_rec[2], "far")?, parse_f(&far_rec[3], "far")?),
        )?)
    };
    let fields_rec = expect(next("fields")?, "fields")?;
    let with_s = fields_rec.iter().any(|f| f == "s");
    let times_rec = expect(next("times")?, "times")?;
    let times: Vec<f64> = times_rec[1..]
        .iter()
        .map(|t| parse_f(t, "times"))
        .collect::<Result<_>>()?;
    let grid = Grid::new(dim, cells, lo, hi, mode)?;
    let n = grid.cell_count();
    let mut snapshots = Vec::with_capacity(times.len());
    for k in 0..times.len() {
        let snap_rec = expect(next("snapshot")?, "snapshot")?;
        if snap_rec[1].parse::<usize>().ok() != Some(k) {
            return Err(Error::Format(format!(
                "snapshot records out of order at {k}"
            )));
        }
        let mut rho = Vec::with_capacity(n);
        let mut m = Vec::with_capacity(n);
        let mut s = if with_s {
            Some(Vec::with_capacity(n))
        } else {
            None
        };
        for _ in 0..n {
            let line = next("cell row")?;
            let toks: Vec<&str> = line.trim().split(',').collect();
            let want = if with_s { 4 } else { 3 };
            if toks.len() != want {
                return Err(Error::Format(format!(
                    "cell row '{line}' has {} fields, want {want}",
                    toks.len()
                )));
            }
            rho.push(parse_f(toks[0], "rho")?);
            m.push(Vec2::new(parse_f(toks[1], "mx")?, parse_f(toks[2], "my")?));
            if let Some(s) = s.as_mut() {
                s.push(parse_f(toks[3], "s")?);
            }
        }
        snapshots.push(Snapshot::new(grid.clone(), rho, m, s)?);
    }
    SpaceTimeField::new(grid, times, snapshots, far, level)
}

pub fn save_field(field: &SpaceTimeField, path: &std::path::Path) -> Result<()> {
    let mut buf = Vec::new();
    write_field(field, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn load_field(path: &std::path::Path) -> Result<SpaceTimeField> {
    let file = std::fs::File::open(path)?;
    read_field(std::io::BufReader::new(file))
}
