//! Weak-form residuals and admissibility audits.
//!
//! Every operation here pairs a discrete space-time field against test
//! functions from [`crate::testfn`] under the fixed midpoint/trapezoid
//! quadrature and reports two numbers: the signed residual and the gross
//! magnitude of the summed terms. Verdict tolerances always scale with
//! the gross magnitude, never with the cancelling signed value, so a
//! residual that is "small" is small relative to the sizes actually
//! paired, not relative to an arbitrary unit.
//!
//! Sign conventions: continuity, momentum and energy residuals return
//! the raw quadrature of their flux forms, which vanishes for exact
//! solutions. The renormalized entropy residual is negated so that the
//! admissible direction reads `value >= -tol` (entropy production is
//! positive). All test functions vanish at both time endpoints, so no
//! boundary terms appear anywhere.

use crate::eos::{
    pressure_full, pressure_isentropic, relative_energy_isentropic, total_energy_full,
    GasParameters,
};
use crate::generators::Sequence;
use crate::grid::{Snapshot, SpaceTimeField};
use crate::testfn::{weak_form_integral_pair, Battery, TestFunction, TestFunctionKind};
use crate::{Error, Result};

/// Default verdict floor for consistency reports, relative to the gross
/// battery scale at the coarsest level.
pub const TOL_CONSISTENCY: f64 = 1e-3;

/// Default tolerance for inequality slacks (energy, entropy), relative
/// to the scale of the energies involved: the round-off floor of the
/// double-precision quadrature.
pub const TOL_INEQUALITY_REL: f64 = 1e-8;

/// Default density threshold below which a cell counts as vacuum for
/// the indicator conventions in the convective terms.
pub const VACUUM_CUTOFF: f64 = 1e-12;

// ---------------------------------------------------------------------------
// Renormalization functions
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq)]
enum RenormKind {
    Constant(f64),
    /// tanh((s - shift) / scale)
    Tanh { scale: f64, shift: f64 },
    /// u / sqrt(1 + u^2) with u = (s - shift) / scale
    Algebraic { scale: f64, shift: f64 },
}

/// A bounded C^1 nondecreasing renormalization Z for the entropy
/// inequality. Only the shapes in the documented library are
/// representable, which keeps every report reproducible.
#[derive(Clone, Debug, PartialEq)]
pub struct Renormalization {
    pub name: String,
    /// sup |Z|.
    pub bound: f64,
    pub monotone: bool,
    kind: RenormKind,
}

impl Renormalization {
    pub fn constant(c: f64) -> Result<Self> {
        if !c.is_finite() {
            return Err(Error::InvalidState(format!("constant Z = {c}")));
        }
        Ok(Renormalization {
            name: format!("const{c:+}"),
            bound: c.abs(),
            monotone: true,
            kind: RenormKind::Constant(c),
        })
    }

    pub fn tanh(scale: f64, shift: f64) -> Result<Self> {
        check_profile(scale, shift)?;
        Ok(Renormalization {
            name: format!("tanh((s{:+})/{scale})", -shift),
            bound: 1.0,
            monotone: true,
            kind: RenormKind::Tanh { scale, shift },
        })
    }

    pub fn algebraic(scale: f64, shift: f64) -> Result<Self> {
        check_profile(scale, shift)?;
        Ok(Renormalization {
            name: format!("sig((s{:+})/{scale})", -shift),
            bound: 1.0,
            monotone: true,
            kind: RenormKind::Algebraic { scale, shift },
        })
    }

    pub fn value(&self, s: f64) -> f64 {
        match self.kind {
            RenormKind::Constant(c) => c,
            RenormKind::Tanh { scale, shift } => ((s - shift) / scale).tanh(),
            RenormKind::Algebraic { scale, shift } => {
                let u = (s - shift) / scale;
                u / (1.0 + u * u).sqrt()
            }
        }
    }

    pub fn deriv(&self, s: f64) -> f64 {
        match self.kind {
            RenormKind::Constant(_) => 0.0,
            RenormKind::Tanh { scale, shift } => {
                let t = ((s - shift) / scale).tanh();
                (1.0 - t * t) / scale
            }
            RenormKind::Algebraic { scale, shift } => {
                let u = (s - shift) / scale;
                (1.0 + u * u).powf(-1.5) / scale
            }
        }
    }

    /// Audits the advertised invariants by dense sampling: Z finite and
    /// within its bound, Z' >= 0.
    pub fn validate(&self) -> Result<()> {
        let n = 2001;
        for k in 0..n {
            let s = -50.0 + 100.0 * k as f64 / (n - 1) as f64;
            let v = self.value(s);
            let d = self.deriv(s);
            if !v.is_finite() || !d.is_finite() {
                return Err(Error::InvalidState(format!(
                    "Z {} non-finite at s = {s}",
                    self.name
                )));
            }
            if v.abs() > self.bound * (1.0 + 1e-12) {
                return Err(Error::InvalidState(format!(
                    "Z {} exceeds its bound at s = {s}",
                    self.name
                )));
            }
            if d < 0.0 {
                return Err(Error::InvalidState(format!(
                    "Z {} decreasing at s = {s}",
                    self.name
                )));
            }
        }
        Ok(())
    }
}

fn check_profile(scale: f64, shift: f64) -> Result<()> {
    if !(scale > 0.0) || !scale.is_finite() || !shift.is_finite() {
        return Err(Error::InvalidState(format!(
            "renormalization scale {scale}, shift {shift}"
        )));
    }
    Ok(())
}

/// The eight fixed renormalizations every entropy audit runs: both
/// constants and two saturating monotone profiles at two scales and
/// shifts. A finite, documented proxy for "any bounded C^1 Z with
/// Z' >= 0".
pub fn renormalization_library() -> Vec<Renormalization> {
    vec![
        Renormalization::constant(1.0).expect("library member"),
        Renormalization::constant(-1.0).expect("library member"),
        Renormalization::tanh(1.0, -1.0).expect("library member"),
        Renormalization::tanh(1.0, 1.0).expect("library member"),
        Renormalization::tanh(3.0, -1.0).expect("library member"),
        Renormalization::tanh(3.0, 1.0).expect("library member"),
        Renormalization::algebraic(1.0, 0.0).expect("library member"),
        Renormalization::algebraic(3.0, 0.0).expect("library member"),
    ]
}

// ---------------------------------------------------------------------------
// Single residuals
// ---------------------------------------------------------------------------

/// Signed weak-form residual together with the gross magnitude of the
/// summed terms under the same quadrature weights.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Residual {
    pub value: f64,
    pub gross: f64,
}

fn require_scalar(tf: &TestFunction, what: &'static str) -> Result<()> {
    match tf.kind {
        TestFunctionKind::Scalar => Ok(()),
        TestFunctionKind::Vector(_) => {
            Err(Error::NotApplicable(what, "needs a scalar test function"))
        }
    }
}

/// Mass residual: quadrature of `rho dpsi phi + m . psi grad phi`.
/// Vanishes (at the quadrature floor) for any field conserving mass.
pub fn continuity_residual(
    field: &SpaceTimeField,
    tf: &TestFunction,
    tau: f64,
) -> Result<Residual> {
    require_scalar(tf, "continuity residual")?;
    let (value, gross) = weak_form_integral_pair(field, tf, tau, |snap, idx, s| {
        let a = snap.rho[idx] * s.dpsi * s.phi;
        let b = snap.m[idx].dot(s.grad_phi) * s.psi;
        (a + b, a.abs() + b.abs())
    })?;
    Ok(Residual { value, gross })
}

/// Momentum residual against a vector test function `dir * phi * psi`:
///
/// ```text
/// (m . dir) dpsi phi + 1_{rho > vac} (m . dir)(m . grad phi)/rho psi
///   + p (dir . grad phi) psi
/// ```
///
/// Cells at or below the vacuum threshold contribute nothing to the
/// convective term; the pressure of an exactly empty cell is zero.
pub fn momentum_residual(
    field: &SpaceTimeField,
    tf: &TestFunction,
    tau: f64,
    gas: &GasParameters,
    vac: f64,
) -> Result<Residual> {
    let dir = tf.direction()?;
    let mut eos_err: Option<Error> = None;
    let (value, gross) = weak_form_integral_pair(field, tf, tau, |snap, idx, s| {
        let rho = snap.rho[idx];
        let m = snap.m[idx];
        let a = m.dot(dir) * s.dpsi * s.phi;
        let conv = if rho > vac {
            m.dot(dir) * m.dot(s.grad_phi) / rho * s.psi
        } else {
            0.0
        };
        let p = match &snap.s {
            Some(sv) => pressure_full(&crate::eos::FullState::new(rho, m, sv[idx]), gas),
            None => pressure_isentropic(rho, gas),
        };
        match p {
            Ok(p) => {
                let c = p * dir.dot(s.grad_phi) * s.psi;
                (a + conv + c, a.abs() + conv.abs() + c.abs())
            }
            Err(e) => {
                eos_err.get_or_insert(e);
                (0.0, 0.0)
            }
        }
    })?;
    if let Some(e) = eos_err {
        return Err(e);
    }
    Ok(Residual { value, gross })
}

/// Residual of the total energy balance for a complete-system field:
///
/// ```text
/// E dpsi phi + 1_{rho > vac} (E + p) (m . grad phi)/rho psi
/// ```
///
/// Errors if any paired cell has infinite energy.
pub fn energy_residual_full(
    field: &SpaceTimeField,
    tf: &TestFunction,
    tau: f64,
    gas: &GasParameters,
    vac: f64,
) -> Result<Residual> {
    require_scalar(tf, "energy residual")?;
    if !field.has_entropy() {
        return Err(Error::NotApplicable(
            "energy residual",
            "needs a complete-system field",
        ));
    }
    let mut eos_err: Option<Error> = None;
    let (value, gross) = weak_form_integral_pair(field, tf, tau, |snap, idx, s| {
        let state = match snap.full_state(idx) {
            Ok(st) => st,
            Err(e) => {
                eos_err.get_or_insert(e);
                return (0.0, 0.0);
            }
        };
        let energy = match total_energy_full(&state, gas) {
            Ok(e) if e.is_finite() => e.value(),
            Ok(_) => {
                eos_err.get_or_insert(Error::InvalidState(format!(
                    "infinite energy density at cell {idx}"
                )));
                return (0.0, 0.0);
            }
            Err(e) => {
                eos_err.get_or_insert(e);
                return (0.0, 0.0);
            }
        };
        let a = energy * s.dpsi * s.phi;
        let flux = if state.rho > vac {
            match pressure_full(&state, gas) {
                Ok(p) => (energy + p) * state.m.dot(s.grad_phi) / state.rho * s.psi,
                Err(e) => {
                    eos_err.get_or_insert(e);
                    return (0.0, 0.0);
                }
            }
        } else {
            0.0
        };
        (a + flux, a.abs() + flux.abs())
    })?;
    if let Some(e) = eos_err {
        return Err(e);
    }
    Ok(Residual { value, gross })
}

/// Renormalized entropy residual. Returns the production pairing
///
/// ```text
/// -integral of [ rho Z(S/rho) dpsi phi + Z(S/rho) m . psi grad phi ]
/// ```
///
/// so an admissible field satisfies `value >= -tol`; since the time
/// bumps vanish at both endpoints the boundary terms of the inequality
/// drop out. Cells at or below the vacuum threshold contribute nothing:
/// Z is bounded, so rho Z(S/rho) -> 0 with rho. Nonnegativity of the
/// test function is structural (products of even-power bumps).
pub fn entropy_residual(
    field: &SpaceTimeField,
    tf: &TestFunction,
    z: &Renormalization,
    tau: f64,
    vac: f64,
) -> Result<Residual> {
    require_scalar(tf, "entropy residual")?;
    if !field.has_entropy() {
        return Err(Error::NotApplicable(
            "entropy residual",
            "needs a complete-system field",
        ));
    }
    let (raw, gross) = weak_form_integral_pair(field, tf, tau, |snap, idx, s| {
        let rho = snap.rho[idx];
        if rho <= vac {
            return (0.0, 0.0);
        }
        let sv = snap.s.as_ref().expect("checked has_entropy")[idx];
        let zv = z.value(sv / rho);
        let a = rho * zv * s.dpsi * s.phi;
        let b = zv * snap.m[idx].dot(s.grad_phi) * s.psi;
        (a + b, a.abs() + b.abs())
    })?;
    Ok(Residual {
        value: -raw,
        gross,
    })
}

/// Result of sweeping the entropy residual over a battery and a family
/// of renormalizations.
#[derive(Clone, Debug)]
pub struct EntropyAudit {
    pub min_value: f64,
    pub gross_sup: f64,
    /// Absolute tolerance actually applied, `tol_rel * gross_sup`.
    pub tol: f64,
    pub pass: bool,
    /// (Z name, scalar index) attaining the minimum.
    pub worst: Option<(String, usize)>,
}

/// Minimum entropy residual over `battery.scalars() x zs`. Pass means
/// no violation beyond `tol_rel` times the gross scale. For exact or
/// steady fields `tol_rel = TOL_INEQUALITY_REL` is appropriate; fields
/// carrying a consistency-level defect need the tolerance anchored to
/// that defect instead, since Z = const reduces the inequality to mass
/// conservation.
pub fn entropy_sign_audit(
    field: &SpaceTimeField,
    battery: &Battery,
    zs: &[Renormalization],
    tau: f64,
    vac: f64,
    tol_rel: f64,
) -> Result<EntropyAudit> {
    let mut min_value = f64::INFINITY;
    let mut gross_sup: f64 = 0.0;
    let mut worst = None;
    for (i, tf) in battery.scalars().enumerate() {
        for z in zs {
            let r = entropy_residual(field, tf, z, tau, vac)?;
            gross_sup = gross_sup.max(r.gross);
            if r.value < min_value {
                min_value = r.value;
                worst = Some((z.name.clone(), i));
            }
        }
    }
    if worst.is_none() {
        return Err(Error::InvalidState(
            "entropy audit needs a scalar test function and one Z".into(),
        ));
    }
    let tol = tol_rel * gross_sup;
    Ok(EntropyAudit {
        min_value,
        gross_sup,
        tol,
        pass: min_value >= -tol,
        worst,
    })
}

// ---------------------------------------------------------------------------
// Energy inequality
// ---------------------------------------------------------------------------

/// Per-time audit of the isentropic energy inequality: the relative
/// energy against the far state must never exceed its initial value.
#[derive(Clone, Debug)]
pub struct EnergyInequality {
    /// Sampled output times, starting at 0.
    pub times: Vec<f64>,
    /// Initial-minus-current integral at each sampled time.
    pub slack: Vec<f64>,
    pub min_slack: f64,
    pub initial: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Checks `int E(rho, m | far) (t) <= int E(rho0, m0 | far)` at every
/// output time up to `tau`. The tolerance is the round-off allowance
/// `TOL_INEQUALITY_REL` times the largest energy integral seen.
pub fn energy_inequality_isentropic(
    field: &SpaceTimeField,
    tau: f64,
    gas: &GasParameters,
) -> Result<EnergyInequality> {
    if field.has_entropy() {
        return Err(Error::NotApplicable(
            "isentropic energy inequality",
            "field carries an entropy component",
        ));
    }
    let far = field.far.ok_or(Error::NotApplicable(
        "isentropic energy inequality",
        "field has no far-field state",
    ))?;
    let mut times = Vec::new();
    let mut integrals = Vec::new();
    for (k, &t) in field.times.iter().enumerate() {
        if t > tau * (1.0 + 1e-12) {
            break;
        }
        let snap = &field.snapshots[k];
        let mut err: Option<Error> = None;
        let v = snap.grid.integrate(|idx, _| {
            match relative_energy_isentropic(&snap.isentropic_state(idx), &far, gas) {
                Ok(e) => e.value(),
                Err(e) => {
                    err.get_or_insert(e);
                    0.0
                }
            }
        })?;
        if let Some(e) = err {
            return Err(e);
        }
        times.push(t);
        integrals.push(v);
    }
    let initial = integrals[0];
    let scale = integrals.iter().fold(0.0_f64, |a, &b| a.max(b));
    let slack: Vec<f64> = integrals.iter().map(|&e| initial - e).collect();
    let min_slack = slack.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    let tol = TOL_INEQUALITY_REL * scale;
    let pass = scale.is_finite() && min_slack >= -tol;
    Ok(EnergyInequality {
        times,
        slack,
        min_slack,
        initial,
        tol,
        pass,
    })
}

// ---------------------------------------------------------------------------
// Stability
// ---------------------------------------------------------------------------

/// Uniform bounds a stable family must respect.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StabilityBudget {
    /// Upper bound for sup_t int rho.
    pub mass: f64,
    /// Lower bound for inf_t int S (complete system only).
    pub entropy_lower: f64,
    /// Upper bound for sup_t int (|rho| + |m| + |S|).
    pub l1: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct StabilityRow {
    pub level: usize,
    pub h: f64,
    pub viscosity: Option<f64>,
    pub mass_sup: f64,
    pub l1_sup: f64,
    pub entropy_inf: Option<f64>,
    pub energy_initial: f64,
    /// max(0, sup_t int E - int E(0)); must trend to zero.
    pub energy_excess: f64,
}

#[derive(Clone, Debug)]
pub struct StabilityReport {
    pub rows: Vec<StabilityRow>,
    pub budget: StabilityBudget,
    /// Round-off allowance for the energy-excess trend.
    pub tol_energy: f64,
    pub stable: bool,
    pub offending_level: Option<usize>,
    pub reason: Option<String>,
}

/// Audits the uniform bounds level by level: mass and L1 supremum over
/// time, the entropy integral infimum where entropy is carried, and the
/// realized energy excess e_n. The verdict is stable when every bound
/// holds and the excesses trend to zero: non-increasing within the
/// round-off allowance and at least halved overall (or at the floor).
/// The energy is the total energy for complete-system families and the
/// relative energy against the far state for isentropic ones, matching
/// the inequality each family is accountable to.
pub fn stability_check(seq: &Sequence, budget: &StabilityBudget) -> Result<StabilityReport> {
    if seq.levels.is_empty() {
        return Err(Error::InsufficientLevels { need: 1, got: 0 });
    }
    let mut rows = Vec::with_capacity(seq.levels.len());
    for lf in &seq.levels {
        let field = &lf.field;
        let mut mass_sup = f64::NEG_INFINITY;
        let mut l1_sup = f64::NEG_INFINITY;
        let mut entropy_inf = field.has_entropy().then_some(f64::INFINITY);
        let mut energies = Vec::with_capacity(field.snapshots.len());
        for snap in &field.snapshots {
            mass_sup = mass_sup.max(snap.grid.integrate(|idx, _| snap.rho[idx])?);
            l1_sup = l1_sup.max(snap.grid.integrate(|idx, _| {
                let s = snap.s.as_ref().map_or(0.0, |s| s[idx].abs());
                snap.rho[idx].abs() + snap.m[idx].norm() + s
            })?);
            if let (Some(inf), Some(s)) = (entropy_inf.as_mut(), snap.s.as_ref()) {
                *inf = inf.min(snap.grid.integrate(|idx, _| s[idx])?);
            }
            energies.push(energy_integral(snap, seq, field)?);
        }
        let e0 = energies[0];
        let peak = energies.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        rows.push(StabilityRow {
            level: lf.level,
            h: field.grid.h(),
            viscosity: lf.viscosity,
            mass_sup,
            l1_sup,
            entropy_inf,
            energy_initial: e0,
            energy_excess: (peak - e0).max(0.0),
        });
    }
    let scale = rows
        .iter()
        .map(|r| r.energy_initial)
        .fold(0.0_f64, |a, b| a.max(b));
    let tol_energy = if scale.is_finite() {
        TOL_INEQUALITY_REL * scale
    } else {
        f64::INFINITY
    };
    let mut verdict = Ok(());
    'audit: {
        for r in &rows {
            if !r.mass_sup.is_finite() || r.mass_sup > budget.mass {
                verdict = Err((r.level, format!("mass {} exceeds budget", r.mass_sup)));
                break 'audit;
            }
            if !r.l1_sup.is_finite() || r.l1_sup > budget.l1 {
                verdict = Err((r.level, format!("L1 bound {} exceeds budget", r.l1_sup)));
                break 'audit;
            }
            if let Some(inf) = r.entropy_inf {
                if !inf.is_finite() || inf < budget.entropy_lower {
                    verdict = Err((r.level, format!("entropy integral {inf} below budget")));
                    break 'audit;
                }
            }
            if !r.energy_excess.is_finite() {
                verdict = Err((r.level, "non-finite energy excess".into()));
                break 'audit;
            }
        }
        for w in rows.windows(2) {
            if w[1].energy_excess > w[0].energy_excess + tol_energy {
                verdict = Err((
                    w[1].level,
                    format!("energy excess grows to {}", w[1].energy_excess),
                ));
                break 'audit;
            }
        }
        let e_first = rows[0].energy_excess;
        let e_last = rows[rows.len() - 1].energy_excess;
        if e_last > tol_energy.max(0.5 * e_first) {
            verdict = Err((
                rows[rows.len() - 1].level,
                format!("energy excess {e_last} does not vanish"),
            ));
        }
    }
    let (stable, offending_level, reason) = match verdict {
        Ok(()) => (true, None, None),
        Err((lvl, why)) => (false, Some(lvl), Some(why)),
    };
    Ok(StabilityReport {
        rows,
        budget: *budget,
        tol_energy,
        stable,
        offending_level,
        reason,
    })
}

fn energy_integral(snap: &Snapshot, seq: &Sequence, field: &SpaceTimeField) -> Result<f64> {
    let mut err: Option<Error> = None;
    let v = if snap.has_entropy() {
        snap.grid.integrate(|idx, _| {
            snap.full_state(idx)
                .and_then(|st| total_energy_full(&st, &seq.gas))
                .map(|e| e.value())
                .unwrap_or_else(|e| {
                    err.get_or_insert(e);
                    0.0
                })
        })?
    } else {
        let far = field.far.unwrap_or(seq.far.clone());
        snap.grid.integrate(|idx, _| {
            relative_energy_isentropic(&snap.isentropic_state(idx), &far, &seq.gas)
                .map(|e| e.value())
                .unwrap_or_else(|e| {
                    err.get_or_insert(e);
                    0.0
                })
        })?
    };
    match err {
        Some(e) => Err(e),
        None => Ok(v),
    }
}

// ---------------------------------------------------------------------------
// Consistency
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct ConsistencyRow {
    pub level: usize,
    pub h: f64,
    pub viscosity: Option<f64>,
    /// Signed continuity residuals, one per scalar battery member.
    pub e1: Vec<f64>,
    /// Signed momentum residuals, one per vector battery member.
    pub e2: Vec<f64>,
    pub e1_sup: f64,
    pub e2_sup: f64,
    /// Largest gross magnitude over the whole battery.
    pub gross_sup: f64,
}

#[derive(Clone, Debug)]
pub struct ConsistencyReport {
    pub rows: Vec<ConsistencyRow>,
    /// Gross battery scale at the coarsest level; the verdict floor is
    /// `tol * scale`.
    pub scale: f64,
    pub tol: f64,
    /// log2 decay per refinement of the e1 sup; NaN where a sup is zero.
    pub e1_slopes: Vec<f64>,
    pub e2_slopes: Vec<f64>,
    pub consistent: bool,
}

/// Sweeps continuity and momentum residuals over the battery at every
/// level. The verdict is consistent when both sups reach the floor
/// `tol * scale` at the finest level without growing on the way there;
/// levels already below the floor may wobble freely, since the verdict
/// has no opinion at that size.
pub fn consistency_battery(
    seq: &Sequence,
    battery: &Battery,
    tau: f64,
    vac: f64,
    tol: f64,
) -> Result<ConsistencyReport> {
    if battery.scalars().next().is_none() || battery.vectors().next().is_none() {
        return Err(Error::InvalidState(
            "consistency needs scalar and vector battery members".into(),
        ));
    }
    if seq.levels.is_empty() {
        return Err(Error::InsufficientLevels { need: 1, got: 0 });
    }
    let mut rows = Vec::with_capacity(seq.levels.len());
    for lf in &seq.levels {
        let mut e1 = Vec::new();
        let mut e2 = Vec::new();
        let mut gross_sup: f64 = 0.0;
        for tf in battery.scalars() {
            let r = continuity_residual(&lf.field, tf, tau)?;
            gross_sup = gross_sup.max(r.gross);
            e1.push(r.value);
        }
        for tf in battery.vectors() {
            let r = momentum_residual(&lf.field, tf, tau, &seq.gas, vac)?;
            gross_sup = gross_sup.max(r.gross);
            e2.push(r.value);
        }
        let sup = |v: &[f64]| v.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
        rows.push(ConsistencyRow {
            level: lf.level,
            h: lf.field.grid.h(),
            viscosity: lf.viscosity,
            e1_sup: sup(&e1),
            e2_sup: sup(&e2),
            e1,
            e2,
            gross_sup,
        });
    }
    let scale = rows[0].gross_sup;
    let floor = tol * scale;
    let slopes = |pick: &dyn Fn(&ConsistencyRow) -> f64| -> Vec<f64> {
        rows.windows(2)
            .map(|w| {
                let (a, b) = (pick(&w[0]), pick(&w[1]));
                if a > 0.0 && b > 0.0 {
                    (a / b).log2()
                } else {
                    f64::NAN
                }
            })
            .collect()
    };
    let trend_ok = |pick: &dyn Fn(&ConsistencyRow) -> f64| -> bool {
        rows.windows(2).all(|w| {
            let (a, b) = (pick(&w[0]), pick(&w[1]));
            b <= a * (1.0 + 1e-6) + 1e-12 * scale || b <= floor
        }) && pick(&rows[rows.len() - 1]) <= floor
    };
    let e1p: &dyn Fn(&ConsistencyRow) -> f64 = &|r| r.e1_sup;
    let e2p: &dyn Fn(&ConsistencyRow) -> f64 = &|r| r.e2_sup;
    let consistent = trend_ok(e1p) && trend_ok(e2p);
    Ok(ConsistencyReport {
        e1_slopes: slopes(e1p),
        e2_slopes: slopes(e2p),
        rows,
        scale,
        tol,
        consistent,
    })
}
