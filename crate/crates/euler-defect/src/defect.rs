//! Defect measures of a refining family: what the sequence carries in
//! the limit beyond its weak limit.
//!
//! Every estimator follows the same recipe. A cellwise quantity of each
//! level is integrated over the cells of a declared coarse grid,
//! time-averaged over a declared window with trapezoid weights, and the
//! resulting per-cell values are extrapolated in the level index. The
//! extrapolation sums the remaining tail in closed form when the last
//! increments look geometric and falls back to the finest level
//! otherwise; the route taken is logged per cell, and the raw per-level
//! totals are kept so trends stay auditable.
//!
//! The quantities are the internal energy `P(rho) = a/(g-1) rho^g`
//! (whose extrapolated excess over the limit is the internal energy
//! defect), the far-field-corrected convective tensor
//! `(m - rho u_inf) (x) (m - rho u_inf) / rho` (whose excess is the
//! viscosity defect), and the relative energy (whose excess must equal
//! `1/2 trace R_v + R_e` cellwise; the gap of that identity is a
//! reported health check, not an assumption).

use crate::algebra::{SymMat2, Vec2};
use crate::eos::{
    pressure_potential, relative_energy_isentropic, FarField, GasParameters,
};
use crate::error::{Error, Result};
use crate::generators::Sequence;
use crate::grid::{Grid, Snapshot, SpaceTimeField};
use crate::testfn::xi_battery;

/// Largest increment ratio still treated as a geometric tail.
pub const DEFECT_RATIO_MAX: f64 = 0.75;
/// PSD verdicts tolerate eigenvalues down to -TOL_PSD_REL * trace scale.
pub const TOL_PSD_REL: f64 = 1e-8;
/// Relative tolerance of the energy-defect identity gap.
pub const TOL_IDENTITY_REL: f64 = 1e-6;

// ---------------------------------------------------------------------------
// Measure fields
// ---------------------------------------------------------------------------

/// Nonnegative scalar measure resolved on a coarse grid: one weight per
/// cell, the mass of that cell.
#[derive(Clone, Debug)]
pub struct ScalarMeasureField {
    pub grid: Grid,
    pub weights: Vec<f64>,
    pub total: f64,
    /// Mass removed when negative raw estimates were clipped to zero.
    pub clipped: f64,
}

impl ScalarMeasureField {
    /// Builds the measure from raw per-cell estimates, clipping negative
    /// values to zero and recording the clipped mass.
    pub fn from_raw(grid: Grid, raw: Vec<f64>) -> Result<Self> {
        if raw.len() != grid.cell_count() {
            return Err(Error::GridMismatch(format!(
                "{} weights for {} cells",
                raw.len(),
                grid.cell_count()
            )));
        }
        let mut clipped = 0.0;
        let mut weights = raw;
        for w in &mut weights {
            if w.is_nan() {
                return Err(Error::Nan("measure weight"));
            }
            if *w < 0.0 {
                clipped -= *w;
                *w = 0.0;
            }
        }
        let total = weights.iter().sum();
        Ok(ScalarMeasureField {
            grid,
            weights,
            total,
            clipped,
        })
    }

    pub fn zero(grid: Grid) -> Self {
        let n = grid.cell_count();
        ScalarMeasureField {
            grid,
            weights: vec![0.0; n],
            total: 0.0,
            clipped: 0.0,
        }
    }
}

/// Symmetric matrix-valued measure resolved on a coarse grid.
#[derive(Clone, Debug)]
pub struct MatrixMeasureField {
    pub grid: Grid,
    pub mats: Vec<SymMat2>,
}

impl MatrixMeasureField {
    pub fn new(grid: Grid, mats: Vec<SymMat2>) -> Result<Self> {
        if mats.len() != grid.cell_count() {
            return Err(Error::GridMismatch(format!(
                "{} matrices for {} cells",
                mats.len(),
                grid.cell_count()
            )));
        }
        if mats.iter().any(|m| !m.is_finite()) {
            return Err(Error::Nan("measure matrix"));
        }
        Ok(MatrixMeasureField { grid, mats })
    }

    pub fn zero(grid: Grid) -> Self {
        let n = grid.cell_count();
        MatrixMeasureField {
            grid,
            mats: vec![SymMat2::ZERO; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.grid.dim
    }

    /// Total variation surrogate: the sum of cellwise operator norms.
    /// Dominates every pairing built from unit-gradient test data.
    pub fn total_variation(&self) -> f64 {
        let d = self.grid.dim;
        self.mats.iter().map(|m| m.op_norm(d)).sum()
    }

    pub fn trace_mass(&self) -> f64 {
        let d = self.grid.dim;
        self.mats.iter().map(|m| m.trace(d)).sum()
    }
}

// ---------------------------------------------------------------------------
// Windows, averaging, extrapolation
// ---------------------------------------------------------------------------

/// Time window over which defects are averaged.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeWindow {
    pub t0: f64,
    pub t1: f64,
}

impl TimeWindow {
    pub fn new(t0: f64, t1: f64) -> Result<Self> {
        if !(t0.is_finite() && t1.is_finite() && t0 >= 0.0 && t1 > t0) {
            return Err(Error::Config(format!("bad time window [{t0}, {t1}]")));
        }
        Ok(TimeWindow { t0, t1 })
    }

    /// The whole stored time range of a sequence.
    pub fn full(seq: &Sequence) -> Result<Self> {
        let lf = seq
            .levels
            .last()
            .ok_or_else(|| Error::Config("empty sequence".into()))?;
        TimeWindow::new(0.0, lf.field.t_final())
    }
}

/// Per-coarse-cell integral of a cellwise quantity, averaged over the
/// window.
fn windowed_cell_integrals(
    field: &SpaceTimeField,
    coarse: &Grid,
    window: TimeWindow,
    mut q: impl FnMut(&Snapshot, usize) -> Result<f64>,
) -> Result<Vec<f64>> {
    let map = fine_to_coarse(&field.grid, coarse)?;
    let weights = field.time_weights(window.t0, window.t1)?;
    let span: f64 = weights.iter().map(|(_, w)| w).sum();
    let vol = field.grid.cell_volume();
    let mut out = vec![0.0; coarse.cell_count()];
    for &(k, w) in &weights {
        let snap = &field.snapshots[k];
        for (i, &c) in map.iter().enumerate() {
            out[c] += w * vol * q(snap, i)?;
        }
    }
    for v in &mut out {
        *v /= span;
        if !v.is_finite() {
            return Err(Error::Nan("windowed cell integral"));
        }
    }
    Ok(out)
}

/// Matrix-valued variant of [`windowed_cell_integrals`].
fn windowed_cell_mats(
    field: &SpaceTimeField,
    coarse: &Grid,
    window: TimeWindow,
    mut q: impl FnMut(&Snapshot, usize) -> Result<SymMat2>,
) -> Result<Vec<SymMat2>> {
    let map = fine_to_coarse(&field.grid, coarse)?;
    let weights = field.time_weights(window.t0, window.t1)?;
    let span: f64 = weights.iter().map(|(_, w)| w).sum();
    let vol = field.grid.cell_volume();
    let mut out = vec![SymMat2::ZERO; coarse.cell_count()];
    for &(k, w) in &weights {
        let snap = &field.snapshots[k];
        for (i, &c) in map.iter().enumerate() {
            out[c] = out[c].add(q(snap, i)?.scale(w * vol));
        }
    }
    for m in &mut out {
        *m = m.scale(1.0 / span);
        if !m.is_finite() {
            return Err(Error::Nan("windowed cell integral"));
        }
    }
    Ok(out)
}

fn fine_to_coarse(fine: &Grid, coarse: &Grid) -> Result<Vec<usize>> {
    let r = fine.refinement_ratio(coarse)?;
    Ok((0..fine.cell_count())
        .map(|i| {
            let (ix, iy) = fine.coords_of(i);
            coarse.index(ix / r, iy / r)
        })
        .collect())
}

fn require_levels(seq: &Sequence, need: usize) -> Result<()> {
    if seq.levels.len() < need {
        return Err(Error::InsufficientLevels {
            need,
            got: seq.levels.len(),
        });
    }
    Ok(())
}

/// Level-tail extrapolation. When the last increments form a plausible
/// geometric tail (ratio bounded by [`DEFECT_RATIO_MAX`] and, with four
/// or more levels, consistent between the last two gaps) the remaining
/// tail is summed in closed form; otherwise the finest value stands.
/// Returns the estimate and whether the tail sum was used.
pub(crate) fn extrapolate_tail(vals: &[f64]) -> (f64, bool) {
    let n = vals.len();
    let last = vals[n - 1];
    let d2 = vals[n - 1] - vals[n - 2];
    let d1 = vals[n - 2] - vals[n - 3];
    if d1 == 0.0 || d2 == 0.0 {
        return (last, false);
    }
    let r = d2 / d1;
    if !r.is_finite() || r.abs() > DEFECT_RATIO_MAX {
        return (last, false);
    }
    if n >= 4 {
        let d0 = vals[n - 3] - vals[n - 4];
        if d0 == 0.0 {
            return (last, false);
        }
        let r_prev = d1 / d0;
        if !r_prev.is_finite() || (r - r_prev).abs() > 0.25 * r.abs().max(r_prev.abs()) {
            return (last, false);
        }
    }
    (last + d2 * r / (1.0 - r), true)
}

/// Extrapolation audit trail.
#[derive(Clone, Debug)]
pub struct ExtrapolationLog {
    /// Cells where at least one component used the geometric tail sum.
    pub richardson_cells: Vec<bool>,
    /// Raw totals per level before extrapolation (traces for matrix
    /// quantities), for trend reporting.
    pub level_totals: Vec<f64>,
}

impl ExtrapolationLog {
    pub fn richardson_count(&self) -> usize {
        self.richardson_cells.iter().filter(|&&b| b).count()
    }
}

// ---------------------------------------------------------------------------
// Weak limit
// ---------------------------------------------------------------------------

/// Estimates the weak limit of a refining family on a coarse grid:
/// cell-averages every level, then extrapolates each component per cell
/// and per output time.
pub fn weak_limit_estimate(
    seq: &Sequence,
    coarse: &Grid,
) -> Result<(SpaceTimeField, ExtrapolationLog)> {
    require_levels(seq, 3)?;
    let times = &seq.levels[0].field.times;
    for lf in &seq.levels[1..] {
        if lf.field.times != *times {
            return Err(Error::GridMismatch(
                "levels must share output times".into(),
            ));
        }
    }
    let with_s = seq.has_entropy();
    let n_c = coarse.cell_count();
    let n_t = times.len();
    // averaged[level][time] is a coarse snapshot
    let mut averaged = Vec::with_capacity(seq.levels.len());
    for lf in &seq.levels {
        let per_time: Vec<Snapshot> = lf
            .field
            .snapshots
            .iter()
            .map(|s| s.average_onto(coarse))
            .collect::<Result<_>>()?;
        averaged.push(per_time);
    }
    let mut richardson = vec![false; n_c];
    let mut snapshots = Vec::with_capacity(n_t);
    let mut vals = vec![0.0; seq.levels.len()];
    for k in 0..n_t {
        let mut rho = vec![0.0; n_c];
        let mut m = vec![Vec2::ZERO; n_c];
        let mut s = with_s.then(|| vec![0.0; n_c]);
        for c in 0..n_c {
            let mut comp = |get: &dyn Fn(&Snapshot) -> f64| {
                for (l, per_time) in averaged.iter().enumerate() {
                    vals[l] = get(&per_time[k]);
                }
                let (v, rich) = extrapolate_tail(&vals);
                richardson[c] |= rich;
                v
            };
            rho[c] = comp(&|snap| snap.rho[c]);
            let mx = comp(&|snap| snap.m[c].x);
            let my = comp(&|snap| snap.m[c].y);
            m[c] = Vec2::new(mx, my);
            if let Some(sv) = s.as_mut() {
                sv[c] = comp(&|snap| snap.s.as_ref().expect("entropy present")[c]);
            }
        }
        snapshots.push(Snapshot::new(coarse.clone(), rho, m, s)?);
    }
    let vol = coarse.cell_volume();
    let level_totals = averaged
        .iter()
        .map(|per_time| per_time[n_t - 1].rho.iter().sum::<f64>() * vol)
        .collect();
    let field = SpaceTimeField::new(
        coarse.clone(),
        times.clone(),
        snapshots,
        Some(seq.far),
        seq.levels.len(),
    )?;
    Ok((
        field,
        ExtrapolationLog {
            richardson_cells: richardson,
            level_totals,
        },
    ))
}

// ---------------------------------------------------------------------------
// Internal energy defect
// ---------------------------------------------------------------------------

/// Extrapolated windowed excess of the internal energy `P(rho)` of the
/// levels over that of the limit, clipped nonnegative per cell.
pub fn internal_energy_defect(
    seq: &Sequence,
    limit: &SpaceTimeField,
    coarse: &Grid,
    window: TimeWindow,
    gas: &GasParameters,
) -> Result<(ScalarMeasureField, ExtrapolationLog)> {
    require_levels(seq, 3)?;
    if seq.has_entropy() {
        return Err(Error::NotApplicable(
            "internal energy defect",
            "isentropic sequences",
        ));
    }
    let p_of =
        |snap: &Snapshot, i: usize| pressure_potential(snap.rho[i], gas);
    let lim = windowed_cell_integrals(limit, coarse, window, p_of)?;
    let mut per_level = Vec::with_capacity(seq.levels.len());
    for lf in &seq.levels {
        per_level.push(windowed_cell_integrals(&lf.field, coarse, window, p_of)?);
    }
    let n_c = coarse.cell_count();
    let mut raw = vec![0.0; n_c];
    let mut richardson = vec![false; n_c];
    let mut vals = vec![0.0; per_level.len()];
    for c in 0..n_c {
        for (l, lv) in per_level.iter().enumerate() {
            vals[l] = lv[c] - lim[c];
        }
        let (v, rich) = extrapolate_tail(&vals);
        raw[c] = v;
        richardson[c] = rich;
    }
    let level_totals = per_level
        .iter()
        .map(|lv| lv.iter().zip(&lim).map(|(a, b)| a - b).sum())
        .collect();
    Ok((
        ScalarMeasureField::from_raw(coarse.clone(), raw)?,
        ExtrapolationLog {
            richardson_cells: richardson,
            level_totals,
        },
    ))
}

// ---------------------------------------------------------------------------
// Viscosity defect
// ---------------------------------------------------------------------------

/// Far-field-corrected convective tensor
/// `(m - rho u_inf) (x) (m - rho u_inf) / rho`, gated to zero at
/// vacuum.
fn convective_tensor(rho: f64, m: Vec2, u_inf: Vec2, vac: f64) -> SymMat2 {
    if rho <= vac {
        return SymMat2::ZERO;
    }
    SymMat2::outer(m.sub(u_inf.scale(rho))).scale(1.0 / rho)
}

/// Extrapolated windowed excess of the convective tensor of the levels
/// over that of the limit; symmetric by construction.
pub fn viscosity_defect(
    seq: &Sequence,
    limit: &SpaceTimeField,
    coarse: &Grid,
    window: TimeWindow,
    far: &FarField,
    vac: f64,
) -> Result<(MatrixMeasureField, ExtrapolationLog)> {
    require_levels(seq, 3)?;
    if seq.has_entropy() {
        return Err(Error::NotApplicable(
            "viscosity defect",
            "isentropic sequences",
        ));
    }
    let u_inf = far.u;
    let c_of = |snap: &Snapshot, i: usize| {
        Ok(convective_tensor(snap.rho[i], snap.m[i], u_inf, vac))
    };
    let lim = windowed_cell_mats(limit, coarse, window, c_of)?;
    let mut per_level = Vec::with_capacity(seq.levels.len());
    for lf in &seq.levels {
        per_level.push(windowed_cell_mats(&lf.field, coarse, window, c_of)?);
    }
    let n_c = coarse.cell_count();
    let dim = coarse.dim;
    let mut mats = vec![SymMat2::ZERO; n_c];
    let mut richardson = vec![false; n_c];
    let mut vals = vec![0.0; per_level.len()];
    for c in 0..n_c {
        let mut comp = |get: &dyn Fn(SymMat2) -> f64| {
            for (l, lv) in per_level.iter().enumerate() {
                vals[l] = get(lv[c].sub(lim[c]));
            }
            let (v, rich) = extrapolate_tail(&vals);
            richardson[c] |= rich;
            v
        };
        let xx = comp(&|m| m.xx);
        let xy = if dim == 2 { comp(&|m| m.xy) } else { 0.0 };
        let yy = if dim == 2 { comp(&|m| m.yy) } else { 0.0 };
        mats[c] = SymMat2::new(xx, xy, yy);
    }
    let level_totals = per_level
        .iter()
        .map(|lv| {
            lv.iter()
                .zip(&lim)
                .map(|(a, b)| a.sub(*b).trace(dim))
                .sum()
        })
        .collect();
    Ok((
        MatrixMeasureField::new(coarse.clone(), mats)?,
        ExtrapolationLog {
            richardson_cells: richardson,
            level_totals,
        },
    ))
}

// ---------------------------------------------------------------------------
// Total defect, PSD audit, energy identity
// ---------------------------------------------------------------------------

/// Total defect `D = R_v + (g - 1) R_e I`, the measure driving the
/// momentum-equation defect.
pub fn total_defect(
    r_v: &MatrixMeasureField,
    r_e: &ScalarMeasureField,
    gas: &GasParameters,
) -> Result<MatrixMeasureField> {
    if r_v.grid != r_e.grid {
        return Err(Error::GridMismatch(
            "defect components on different grids".into(),
        ));
    }
    let dim = r_v.grid.dim;
    let mats = r_v
        .mats
        .iter()
        .zip(&r_e.weights)
        .map(|(m, &w)| m.add(SymMat2::scaled_identity(dim, (gas.gamma - 1.0) * w)))
        .collect();
    MatrixMeasureField::new(r_v.grid.clone(), mats)
}

/// Cellwise positive-semidefiniteness audit of a matrix measure.
#[derive(Clone, Debug)]
pub struct PsdReport {
    /// Exact minimum eigenvalue per cell.
    pub min_eig: Vec<f64>,
    /// Minimum of the quadratic form over the direction battery per cell.
    pub battery_min: Vec<f64>,
    pub worst: f64,
    pub worst_cell: usize,
    /// Trace scale the tolerance is anchored to.
    pub scale: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Checks `xi^T M xi >= 0` over a direction battery and the exact
/// eigenvalues. The battery must start with the axis directions and
/// carry at least 20 more unit vectors.
pub fn psd_check(field: &MatrixMeasureField, xi: &[Vec2]) -> Result<PsdReport> {
    let dim = field.grid.dim;
    for (ax, v) in xi.iter().enumerate().take(dim) {
        if *v != Vec2::axis(ax) {
            return Err(Error::Config(
                "direction battery must start with the axis vectors".into(),
            ));
        }
    }
    if xi.len() < dim + 20 {
        return Err(Error::Config(format!(
            "direction battery too small: {} of {} required",
            xi.len(),
            dim + 20
        )));
    }
    let mut min_eig = Vec::with_capacity(field.mats.len());
    let mut battery_min = Vec::with_capacity(field.mats.len());
    let mut scale: f64 = 0.0;
    for m in &field.mats {
        min_eig.push(m.eigen_min(dim));
        battery_min.push(
            xi.iter()
                .map(|v| m.quad_form(*v))
                .fold(f64::INFINITY, f64::min),
        );
        scale = scale.max(m.trace(dim).abs());
    }
    let (worst_cell, worst) = min_eig
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(c, &v)| (c, v))
        .unwrap_or((0, 0.0));
    let tol = TOL_PSD_REL * scale;
    let pass = worst >= -tol;
    Ok(PsdReport {
        min_eig,
        battery_min,
        worst,
        worst_cell,
        scale,
        tol,
        pass,
    })
}

/// Cellwise audit of the energy bookkeeping: the extrapolated excess of
/// relative energy must equal `1/2 trace R_v + R_e`.
#[derive(Clone, Debug)]
pub struct EnergyIdentityReport {
    /// Extrapolated relative-energy excess per cell.
    pub lhs: Vec<f64>,
    /// `1/2 trace R_v + R_e` per cell.
    pub rhs: Vec<f64>,
    /// Sum of cellwise absolute differences.
    pub gap: f64,
    /// Total defect mass anchoring the tolerance.
    pub scale: f64,
    pub tol: f64,
    pub pass: bool,
}

pub fn energy_defect_identity(
    seq: &Sequence,
    limit: &SpaceTimeField,
    r_v: &MatrixMeasureField,
    r_e: &ScalarMeasureField,
    far: &FarField,
    gas: &GasParameters,
    window: TimeWindow,
) -> Result<EnergyIdentityReport> {
    require_levels(seq, 3)?;
    if seq.has_entropy() {
        return Err(Error::NotApplicable(
            "energy defect identity",
            "isentropic sequences",
        ));
    }
    let coarse = &r_v.grid;
    if *coarse != r_e.grid {
        return Err(Error::GridMismatch(
            "defect components on different grids".into(),
        ));
    }
    let rel_of = |snap: &Snapshot, i: usize| {
        let e = relative_energy_isentropic(&snap.isentropic_state(i), far, gas)?;
        let v = e.value();
        if !v.is_finite() {
            return Err(Error::InvalidState(format!(
                "infinite relative energy at cell {i}"
            )));
        }
        Ok(v)
    };
    let lim = windowed_cell_integrals(limit, coarse, window, rel_of)?;
    let mut per_level = Vec::with_capacity(seq.levels.len());
    for lf in &seq.levels {
        per_level.push(windowed_cell_integrals(&lf.field, coarse, window, rel_of)?);
    }
    let n_c = coarse.cell_count();
    let dim = coarse.dim;
    let mut lhs = vec![0.0; n_c];
    let mut vals = vec![0.0; per_level.len()];
    for c in 0..n_c {
        for (l, lv) in per_level.iter().enumerate() {
            vals[l] = lv[c] - lim[c];
        }
        lhs[c] = extrapolate_tail(&vals).0;
    }
    let rhs: Vec<f64> = (0..n_c)
        .map(|c| 0.5 * r_v.mats[c].trace(dim) + r_e.weights[c])
        .collect();
    let gap = lhs.iter().zip(&rhs).map(|(a, b)| (a - b).abs()).sum();
    let scale: f64 = rhs.iter().map(|v| v.abs()).sum();
    let lhs_mass: f64 = lhs.iter().map(|v| v.abs()).sum();
    let tol = TOL_IDENTITY_REL * scale + 1e-12 * lhs_mass;
    Ok(EnergyIdentityReport {
        lhs,
        rhs,
        gap,
        scale,
        tol,
        pass: gap <= tol,
    })
}

// ---------------------------------------------------------------------------
// One-call estimation
// ---------------------------------------------------------------------------

/// Everything the defect stage produces for one sequence.
#[derive(Clone, Debug)]
pub struct DefectReport {
    pub limit: SpaceTimeField,
    pub r_e: ScalarMeasureField,
    pub r_v: MatrixMeasureField,
    pub total: MatrixMeasureField,
    /// Extrapolated relative-energy excess as a measure.
    pub energy_defect: ScalarMeasureField,
    pub psd_r_v: PsdReport,
    pub psd_total: PsdReport,
    pub identity: EnergyIdentityReport,
    pub limit_log: ExtrapolationLog,
    pub r_e_log: ExtrapolationLog,
    pub r_v_log: ExtrapolationLog,
}

/// Runs the whole defect estimation on an isentropic refining family.
pub fn estimate_defects(
    seq: &Sequence,
    coarse: &Grid,
    window: TimeWindow,
    vac: f64,
    xi_seed: u64,
) -> Result<DefectReport> {
    if seq.has_entropy() {
        return Err(Error::NotApplicable(
            "defect estimation",
            "isentropic sequences",
        ));
    }
    let gas = seq.gas;
    let far = seq.far;
    let (limit, limit_log) = weak_limit_estimate(seq, coarse)?;
    let (r_e, r_e_log) = internal_energy_defect(seq, &limit, coarse, window, &gas)?;
    let (r_v, r_v_log) = viscosity_defect(seq, &limit, coarse, window, &far, vac)?;
    let total = total_defect(&r_v, &r_e, &gas)?;
    let xi = xi_battery(coarse.dim, 20, xi_seed);
    let psd_r_v = psd_check(&r_v, &xi)?;
    let psd_total = psd_check(&total, &xi)?;
    let identity = energy_defect_identity(seq, &limit, &r_v, &r_e, &far, &gas, window)?;
    let energy_defect = ScalarMeasureField::from_raw(coarse.clone(), identity.lhs.clone())?;
    Ok(DefectReport {
        limit,
        r_e,
        r_v,
        total,
        energy_defect,
        psd_r_v,
        psd_total,
        identity,
        limit_log,
        r_e_log,
        r_v_log,
    })
}
