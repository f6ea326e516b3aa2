//! End-to-end dichotomy drivers.
//!
//! A run generates a refining family, audits its bounds and weak
//! residuals, estimates the weak limit and the defect measures, and
//! classifies the outcome:
//!
//! * `strong_convergence`: the members approach their limit in relative
//!   energy and no defect mass survives refinement.
//! * `not_a_weak_solution`: defect mass (or a Jensen gap) persists, the
//!   measured pieces satisfy the defect form of the momentum equation,
//!   and positivity plus rigidity checks confirm the measure is real;
//!   the weak limit alone then fails the equations.
//! * `inconclusive`: anything else. Never a guess; the notes say which
//!   gate was missed.

use crate::algebra::Vec2;
use crate::config::{ExperimentConfig, Expectation, GeneratorSection};
use crate::defect::{estimate_defects, DefectReport, TimeWindow};
use crate::eos::{
    relative_energy_isentropic, total_energy_full, FarField, FullState, GasParameters,
};
use crate::error::{Error, Result};
use crate::extended::ExtendedReal;
use crate::generators::{
    concentration_sequence, constant_sequence, oscillatory_full, oscillatory_isentropic,
    riemann_sequence, viscous_sequence, InitialData, RiemannData, RunLog, Sequence,
};
use crate::generators::{entropy_floor_check, FloorReport, LevelField};
use crate::grid::{Grid, Snapshot, SpaceTimeField};
use crate::liouville::{
    equation_battery, liouville_verdict, momentum_defect_equation_check, sample_limit,
    EquationGapReport, LiouvilleReport,
};
use crate::residuals::{
    consistency_battery, continuity_residual, energy_residual_full, entropy_sign_audit,
    momentum_residual, renormalization_library, stability_check, ConsistencyReport, EntropyAudit,
    StabilityBudget, StabilityReport,
};
use crate::testfn::{make_battery, Battery};
use crate::young::{
    empirical_young, entropy_line_check, jensen_gap, sharp_jensen_classify,
    AtomicMeasure, EmpiricalYoungMeasure, JensenClass,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DichotomyBranch {
    StrongConvergence,
    NotAWeakSolution,
    Inconclusive,
}

impl DichotomyBranch {
    pub fn name(self) -> &'static str {
        match self {
            DichotomyBranch::StrongConvergence => "strong_convergence",
            DichotomyBranch::NotAWeakSolution => "not_a_weak_solution",
            DichotomyBranch::Inconclusive => "inconclusive",
        }
    }

    pub fn matches(self, expect: Expectation) -> bool {
        match expect {
            Expectation::Strong => self == DichotomyBranch::StrongConvergence,
            Expectation::Defect => self == DichotomyBranch::NotAWeakSolution,
        }
    }
}

/// Everything the verdict rests on, in numbers.
#[derive(Clone, Debug, Default)]
pub struct Evidence {
    /// Largest initial energy over the family: relative energy against
    /// the far field (isentropic) or total energy (complete system).
    pub energy_budget: f64,
    /// Residual trends vanish under refinement.
    pub residual_trend_ok: Option<bool>,
    /// Relative energy of each member against the sampled limit.
    pub distances: Vec<f64>,
    pub distances_vanishing: Option<bool>,
    pub defect_mass: Option<f64>,
    /// Same estimate without the finest level, for saturation checks.
    pub defect_mass_sans_finest: Option<f64>,
    pub limit_residual_sup: Option<f64>,
    pub limit_residual_gross: Option<f64>,
    pub equation_gap: Option<f64>,
    pub equation_tol: Option<f64>,
    pub liouville_verdict: Option<&'static str>,
    pub stability_ok: Option<bool>,
    pub max_jensen_gap: Option<f64>,
    pub jensen_scale: Option<f64>,
    pub cells_dirac: Option<usize>,
    pub cells_strict: Option<usize>,
    pub cells_zero_set: Option<usize>,
    pub entropy_line_ok: Option<bool>,
    pub entropy_audit_ok: Option<bool>,
    pub floor_ok: Option<bool>,
}

/// Per-cell sharp Jensen outcome on the finest member.
#[derive(Clone, Debug)]
pub struct JensenCellRow {
    pub cell: usize,
    pub atoms: usize,
    pub gap: f64,
    pub second_moment: f64,
    pub class: JensenClass,
    pub line_ok: bool,
}

#[derive(Clone, Debug)]
pub struct YoungEvidence {
    pub measure: EmpiricalYoungMeasure<FullState>,
    pub cells: Vec<JensenCellRow>,
    pub dirac: usize,
    pub strict: usize,
    pub zero_set: usize,
    pub max_gap: f64,
    /// Scale anchoring the branch decision, max cell energy magnitude.
    pub gap_scale: f64,
}

/// Trimmed weak limit of a complete-system family with its own
/// residuals and the entropy audit of the finest member.
#[derive(Clone, Debug)]
pub struct CandidateReport {
    pub field: SpaceTimeField,
    /// Cells excluded per snapshot at each level.
    pub trimmed_per_level: Vec<usize>,
    pub continuity_sup: f64,
    pub momentum_sup: f64,
    pub energy_sup: f64,
    pub gross_sup: f64,
    pub entropy: EntropyAudit,
}

#[derive(Clone, Debug)]
pub struct DichotomyReport {
    pub branch: DichotomyBranch,
    pub full_system: bool,
    pub consistency: Option<ConsistencyReport>,
    pub stability: Option<StabilityReport>,
    pub floor: Option<FloorReport>,
    pub defects: Option<DefectReport>,
    pub liouville: Option<LiouvilleReport>,
    pub equation: Option<EquationGapReport>,
    pub young: Option<YoungEvidence>,
    pub candidate: Option<CandidateReport>,
    /// Energy integral per level and output time: relative energy for
    /// isentropic families, total energy for complete ones.
    pub energies: Vec<Vec<f64>>,
    pub times: Vec<f64>,
    pub run_logs: Vec<RunLog>,
    pub evidence: Evidence,
    pub notes: Vec<String>,
}

// ---------------------------------------------------------------------------
// Generation
// ---------------------------------------------------------------------------

fn state_of(section: &crate::config::StateSection, dim: usize) -> (f64, Vec2) {
    let uy = if dim == 2 { section.u[1] } else { 0.0 };
    let u = Vec2::new(section.u[0], uy);
    (section.rho, u.scale(section.rho))
}

fn constant_full_sequence(
    spec: &crate::generators::SequenceSpec,
    s_per_rho: f64,
) -> Result<Sequence> {
    spec.validate()?;
    let times = spec.times();
    let mut levels = Vec::with_capacity(spec.levels.len());
    for (lvl, ls) in spec.levels.iter().enumerate() {
        let grid = spec.grid(lvl)?;
        let s = s_per_rho * spec.far.rho;
        let snap = Snapshot::constant(grid.clone(), spec.far.rho, spec.far.m(), Some(s));
        let snaps = vec![snap; times.len()];
        levels.push(LevelField {
            level: lvl,
            viscosity: ls.viscosity,
            field: SpaceTimeField::new(grid, times.clone(), snaps, Some(spec.far), lvl)?,
        });
    }
    Ok(Sequence {
        gas: spec.gas,
        far: spec.far,
        entropy_floor: spec.entropy_floor,
        reference: spec.reference,
        levels,
    })
}

/// Builds the refining family a config describes. Solver diagnostics
/// are returned for viscous runs and empty otherwise.
pub fn build_sequence(cfg: &ExperimentConfig) -> Result<(Sequence, Vec<RunLog>)> {
    let spec = cfg.sequence_spec()?;
    let dim = cfg.domain.dim;
    match &cfg.generator {
        GeneratorSection::Constant { s: None } => Ok((constant_sequence(&spec)?, Vec::new())),
        GeneratorSection::Constant { s: Some(s) } => {
            Ok((constant_full_sequence(&spec, *s)?, Vec::new()))
        }
        GeneratorSection::Viscous { left, right, x0 } => {
            let (lr, lm) = state_of(left, dim);
            let (rr, rm) = state_of(right, dim);
            let data = RiemannData::new(
                crate::eos::IsentropicState::new(lr, lm),
                crate::eos::IsentropicState::new(rr, rm),
                *x0,
            )?;
            viscous_sequence(&spec, &InitialData::RiemannJump(data))
        }
        GeneratorSection::Riemann { left, right, x0 } => {
            let (lr, lm) = state_of(left, dim);
            let (rr, rm) = state_of(right, dim);
            let data = RiemannData::new(
                crate::eos::IsentropicState::new(lr, lm),
                crate::eos::IsentropicState::new(rr, rm),
                *x0,
            )?;
            Ok((riemann_sequence(&spec, &data)?, Vec::new()))
        }
        GeneratorSection::Oscillatory { a, b, lambda } => {
            let (ar, am) = state_of(a, dim);
            let (br, bm) = state_of(b, dim);
            let seq = match (a.s, b.s) {
                (Some(sa), Some(sb)) => oscillatory_full(
                    &spec,
                    FullState::new(ar, am, sa),
                    FullState::new(br, bm, sb),
                    *lambda,
                )?,
                _ => oscillatory_isentropic(
                    &spec,
                    crate::eos::IsentropicState::new(ar, am),
                    crate::eos::IsentropicState::new(br, bm),
                    *lambda,
                )?,
            };
            Ok((seq, Vec::new()))
        }
        GeneratorSection::Concentration {
            x0,
            amplitude,
            radius,
        } => {
            let y = if dim == 2 { x0[1] } else { 0.0 };
            let seq =
                concentration_sequence(&spec, Vec2::new(x0[0], y), *amplitude, *radius)?;
            Ok((seq, Vec::new()))
        }
    }
}

// ---------------------------------------------------------------------------
// Shared evidence
// ---------------------------------------------------------------------------

fn resolve_window(cfg: &ExperimentConfig) -> Result<TimeWindow> {
    match cfg.analysis.window {
        Some([t0, t1]) => TimeWindow::new(t0, t1),
        None => TimeWindow::new(0.0, cfg.sequence.t_final),
    }
}

/// Energy integral per level per output time: relative energy against
/// the far field for isentropic members, total energy otherwise.
fn energy_table(seq: &Sequence) -> Result<Vec<Vec<f64>>> {
    let gas = seq.gas;
    let mut out = Vec::with_capacity(seq.levels.len());
    for lf in &seq.levels {
        let mut per_time = Vec::with_capacity(lf.field.snapshots.len());
        for snap in &lf.field.snapshots {
            let mut bad: Option<Error> = None;
            let v = snap.grid.integrate(|idx, _| {
                let e = if snap.has_entropy() {
                    snap.full_state(idx)
                        .and_then(|st| total_energy_full(&st, &gas))
                } else {
                    relative_energy_isentropic(&snap.isentropic_state(idx), &seq.far, &gas)
                };
                match e {
                    Ok(v) => v.value(),
                    Err(err) => {
                        bad.get_or_insert(err);
                        0.0
                    }
                }
            })?;
            if let Some(err) = bad {
                return Err(err);
            }
            per_time.push(v);
        }
        out.push(per_time);
    }
    Ok(out)
}

fn budget_from(energies: &[Vec<f64>]) -> f64 {
    energies
        .iter()
        .map(|row| row.first().copied().unwrap_or(0.0))
        .fold(0.0_f64, f64::max)
}

/// Relative energy of each member against the limit sampled onto its
/// own grid and time lattice, averaged over the window.
fn limit_distances(
    seq: &Sequence,
    limit: &SpaceTimeField,
    window: TimeWindow,
    vac: f64,
) -> Result<Vec<f64>> {
    let gas = seq.gas;
    let mut out = Vec::with_capacity(seq.levels.len());
    for lf in &seq.levels {
        let sampled = sample_limit(limit, &lf.field.grid, &lf.field.times, window)?;
        let weights = lf.field.time_weights(window.t0, window.t1)?;
        let mut acc = 0.0;
        for (k, w) in weights {
            let member = &lf.field.snapshots[k];
            let lim = &sampled.snapshots[k];
            let mut bad: Option<Error> = None;
            let integral = member.grid.integrate(|idx, _| {
                let rho = lim.rho[idx];
                let reference = if rho > vac {
                    FarField {
                        rho,
                        u: lim.m[idx].scale(1.0 / rho),
                    }
                } else {
                    FarField::REST
                };
                match relative_energy_isentropic(&member.isentropic_state(idx), &reference, &gas)
                {
                    Ok(e) => e.value(),
                    Err(err) => {
                        bad.get_or_insert(err);
                        0.0
                    }
                }
            })?;
            if let Some(err) = bad {
                return Err(err);
            }
            acc += w * integral;
        }
        out.push(acc / (window.t1 - window.t0));
    }
    Ok(out)
}

/// Nonincreasing within slack and at least halved overall.
fn vanishing_trend(distances: &[f64], slack: f64) -> bool {
    let first = distances[0];
    if first <= slack {
        return distances.iter().all(|&d| d <= slack);
    }
    for w in distances.windows(2) {
        if w[1] > w[0] + slack {
            return false;
        }
    }
    distances[distances.len() - 1] <= 0.5 * first + slack
}

fn battery_for(cfg: &ExperimentConfig, grid: &Grid) -> Result<Battery> {
    make_battery(
        grid,
        cfg.sequence.t_final,
        cfg.battery.scalars,
        cfg.battery.vectors,
        cfg.battery.seed,
    )
}

/// Sup of the limit's own weak residuals over the battery.
fn field_residual_sup(
    field: &SpaceTimeField,
    battery: &Battery,
    tau: f64,
    gas: &GasParameters,
    vac: f64,
) -> Result<(f64, f64, f64)> {
    let mut e1: f64 = 0.0;
    let mut e2: f64 = 0.0;
    let mut gross: f64 = 0.0;
    for tf in battery.scalars() {
        let r = continuity_residual(field, tf, tau)?;
        e1 = e1.max(r.value.abs());
        gross = gross.max(r.gross);
    }
    for tf in battery.vectors() {
        let r = momentum_residual(field, tf, tau, gas, vac)?;
        e2 = e2.max(r.value.abs());
        gross = gross.max(r.gross);
    }
    Ok((e1, e2, gross))
}

// ---------------------------------------------------------------------------
// Isentropic dichotomy
// ---------------------------------------------------------------------------

/// Full isentropic pipeline: residual trends, weak limit, defect
/// measures, rigidity, defect form of the momentum equation, verdict.
pub fn run_dichotomy_isentropic(
    cfg: &ExperimentConfig,
    seq: &Sequence,
    run_logs: Vec<RunLog>,
) -> Result<DichotomyReport> {
    if seq.has_entropy() {
        return Err(Error::NotApplicable(
            "isentropic dichotomy",
            "complete-system families",
        ));
    }
    let gas = seq.gas;
    let tol = &cfg.tolerances;
    let vac = cfg.analysis.vacuum_cutoff;
    let window = resolve_window(cfg)?;
    let coarse = cfg.analysis_grid()?;
    let t_final = cfg.sequence.t_final;
    let mut notes = Vec::new();

    let battery = battery_for(cfg, &coarse)?;
    let consistency = consistency_battery(seq, &battery, t_final, vac, tol.consistency)?;

    let defects = estimate_defects(seq, &coarse, window, vac, cfg.battery.xi_seed)?;
    let defect_mass = defects.total.total_variation();

    // Saturation: re-estimate without the finest level when affordable.
    let defect_mass_sans_finest = if seq.levels.len() >= 4 {
        let shorter = Sequence {
            gas,
            far: seq.far,
            entropy_floor: seq.entropy_floor,
            reference: seq.reference,
            levels: seq.levels[..seq.levels.len() - 1].to_vec(),
        };
        let d = estimate_defects(&shorter, &coarse, window, vac, cfg.battery.xi_seed)?;
        Some(d.total.total_variation())
    } else {
        None
    };

    let (limit_e1, limit_e2, limit_gross) =
        field_residual_sup(&defects.limit, &battery, t_final, &gas, vac)?;
    let limit_residual_sup = limit_e1.max(limit_e2);

    let energies = energy_table(seq)?;
    let budget = budget_from(&energies);
    // The battery gross at the coarsest level measures the size of the
    // field itself; inequality-level fractions of it are roundoff.
    let ambient = consistency
        .rows
        .first()
        .map(|r| r.gross_sup)
        .unwrap_or(0.0);
    let scale = budget.max(tol.inequality * ambient);
    let zero_defect = defect_mass <= tol.defect_clear * scale;
    let defect_present = scale > 0.0 && defect_mass >= tol.defect_detect * scale;
    if !zero_defect && !defects.identity.pass {
        notes.push(format!(
            "energy-defect identity gap {:.3e} exceeds its tolerance {:.3e}",
            defects.identity.gap, defects.identity.tol
        ));
    }

    let liouville = if zero_defect && defect_mass > 0.0 {
        notes.push(format!(
            "defect mass {defect_mass:.3e} is below the measurement floor; \
             rigidity judged the zero measure"
        ));
        liouville_verdict(
            &crate::defect::MatrixMeasureField::zero(coarse.clone()),
            cfg.battery.xi_seed,
        )?
    } else {
        liouville_verdict(&defects.total, cfg.battery.xi_seed)?
    };

    let eq_battery = equation_battery(
        &coarse,
        window,
        cfg.battery.equation_count,
        cfg.battery.equation_seed,
    )?;
    let equation = momentum_defect_equation_check(
        seq,
        &defects.limit,
        &defects.r_v,
        &defects.r_e,
        window,
        &eq_battery,
        vac,
    )?;

    let distances = limit_distances(seq, &defects.limit, window, vac)?;
    let slack = tol.inequality * scale.max(defect_mass);
    let distances_vanishing = vanishing_trend(&distances, slack);

    let pairing_sup = equation
        .rows
        .iter()
        .fold(0.0_f64, |a, r| a.max(r.defect_pairing.abs()));
    let pairing_nonzero = pairing_sup > tol.consistency * equation.defect_scale.max(slack);
    let rigidity_ok = matches!(
        liouville.verdict,
        crate::liouville::LiouvilleVerdict::DivergenceDetected
            | crate::liouville::LiouvilleVerdict::BoundaryTraceFailed
    );

    let limit_residual_nonzero =
        limit_residual_sup > tol.consistency * limit_gross.max(tol.inequality);
    let branch = if scale == 0.0 && consistency.consistent {
        DichotomyBranch::StrongConvergence
    } else if consistency.consistent && zero_defect && distances_vanishing {
        DichotomyBranch::StrongConvergence
    } else if defect_present
        && defects.psd_total.pass
        && defects.identity.pass
        && equation.pass
        && (limit_residual_nonzero || pairing_nonzero)
        && rigidity_ok
    {
        DichotomyBranch::NotAWeakSolution
    } else {
        if !consistency.consistent {
            notes.push("weak residuals do not vanish under refinement".into());
        }
        if !zero_defect && !defect_present {
            notes.push(format!(
                "defect mass {defect_mass:.3e} sits between the clear and detect thresholds"
            ));
        }
        if defect_present && !equation.pass {
            notes.push(format!(
                "defect equation gap {:.3e} above tolerance {:.3e}",
                equation.sup_gap, equation.tol
            ));
        }
        if defect_present && !rigidity_ok {
            notes.push(format!(
                "defect mass present but rigidity check returned {:?}",
                liouville.verdict
            ));
        }
        if zero_defect && !distances_vanishing {
            notes.push("no defect mass, yet members do not approach the limit".into());
        }
        DichotomyBranch::Inconclusive
    };

    let evidence = Evidence {
        energy_budget: budget,
        residual_trend_ok: Some(consistency.consistent),
        distances,
        distances_vanishing: Some(distances_vanishing),
        defect_mass: Some(defect_mass),
        defect_mass_sans_finest,
        limit_residual_sup: Some(limit_residual_sup),
        limit_residual_gross: Some(limit_gross),
        equation_gap: Some(equation.sup_gap),
        equation_tol: Some(equation.tol),
        liouville_verdict: Some(verdict_name(liouville.verdict)),
        ..Evidence::default()
    };

    Ok(DichotomyReport {
        branch,
        full_system: false,
        consistency: Some(consistency),
        stability: None,
        floor: None,
        defects: Some(defects),
        liouville: Some(liouville),
        equation: Some(equation),
        young: None,
        candidate: None,
        energies,
        times: seq.levels[0].field.times.clone(),
        run_logs,
        evidence,
        notes,
    })
}

fn verdict_name(v: crate::liouville::LiouvilleVerdict) -> &'static str {
    use crate::liouville::LiouvilleVerdict::*;
    match v {
        TheoremConsistent => "theorem_consistent",
        DivergenceDetected => "divergence_detected",
        PsdHypothesisViolated => "psd_hypothesis_violated",
        BoundaryTraceFailed => "boundary_trace_failed",
        TheoremViolation => "theorem_violation",
    }
}

// ---------------------------------------------------------------------------
// Complete-system dichotomy
// ---------------------------------------------------------------------------

/// Coarse average per level and time with the top `trim` fraction of
/// highest-energy cells excluded, then per-cell extrapolation across
/// levels. The exclusion set is global per snapshot; ties break by
/// cell index so reruns are identical.
fn trimmed_limit(
    seq: &Sequence,
    coarse: &Grid,
    trim: f64,
    gas: &GasParameters,
    notes: &mut Vec<String>,
) -> Result<(SpaceTimeField, Vec<usize>)> {
    if seq.levels.len() < 3 {
        return Err(Error::InsufficientLevels {
            need: 3,
            got: seq.levels.len(),
        });
    }
    let times = &seq.levels[0].field.times;
    let n_c = coarse.cell_count();
    let n_t = times.len();
    let mut trimmed_per_level = Vec::with_capacity(seq.levels.len());
    // averaged[level][time][cell] -> (rho, m, s)
    let mut averaged: Vec<Vec<Vec<(f64, Vec2, f64)>>> = Vec::with_capacity(seq.levels.len());
    for lf in &seq.levels {
        if lf.field.times != *times {
            return Err(Error::GridMismatch(
                "levels must share output times".into(),
            ));
        }
        let grid = &lf.field.grid;
        let n_f = grid.cell_count();
        let cut = (trim * n_f as f64).floor() as usize;
        trimmed_per_level.push(cut);
        let members: Vec<Vec<usize>> = (0..n_c)
            .map(|c| grid.fine_cells_in(coarse, c))
            .collect::<Result<_>>()?;
        let mut per_time = Vec::with_capacity(n_t);
        for snap in &lf.field.snapshots {
            let mut excluded = vec![false; n_f];
            if cut > 0 {
                let mut energies: Vec<(f64, usize)> = Vec::with_capacity(n_f);
                for idx in 0..n_f {
                    let st = snap.full_state(idx)?;
                    let e = match total_energy_full(&st, gas)? {
                        ExtendedReal::Finite(e) => e,
                        ExtendedReal::Infinity => f64::INFINITY,
                    };
                    energies.push((e, idx));
                }
                energies.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
                for &(_, idx) in energies.iter().take(cut) {
                    excluded[idx] = true;
                }
            }
            let s_vals = snap.s.as_ref().expect("complete-system sequence");
            let mut row = Vec::with_capacity(n_c);
            for fine in &members {
                let kept: Vec<usize> =
                    fine.iter().copied().filter(|&i| !excluded[i]).collect();
                let use_cells = if kept.is_empty() { fine } else { &kept };
                let inv = 1.0 / use_cells.len() as f64;
                let mut rho = 0.0;
                let mut m = Vec2::ZERO;
                let mut s = 0.0;
                for &i in use_cells {
                    rho += snap.rho[i];
                    m = m.add(snap.m[i]);
                    s += s_vals[i];
                }
                row.push((rho * inv, m.scale(inv), s * inv));
            }
            per_time.push(row);
        }
        averaged.push(per_time);
    }
    for (lvl, &cut) in trimmed_per_level.iter().enumerate() {
        let n_f = seq.levels[lvl].field.grid.cell_count();
        notes.push(format!(
            "biting limit: excluded {cut} of {n_f} cells ({:.2}%) per snapshot at level {lvl}",
            100.0 * cut as f64 / n_f as f64
        ));
    }
    let n_l = seq.levels.len();
    let mut snapshots = Vec::with_capacity(n_t);
    let mut vals = vec![0.0; n_l];
    for k in 0..n_t {
        let mut rho = vec![0.0; n_c];
        let mut m = vec![Vec2::ZERO; n_c];
        let mut s = vec![0.0; n_c];
        for c in 0..n_c {
            let mut pull = |f: &dyn Fn(&(f64, Vec2, f64)) -> f64| {
                for (lvl, per_time) in averaged.iter().enumerate() {
                    vals[lvl] = f(&per_time[k][c]);
                }
                crate::defect::extrapolate_tail(&vals).0
            };
            rho[c] = pull(&|v| v.0);
            let mx = pull(&|v| v.1.x);
            let my = pull(&|v| v.1.y);
            m[c] = Vec2::new(mx, my);
            s[c] = pull(&|v| v.2);
        }
        snapshots.push(Snapshot::new(coarse.clone(), rho, m, Some(s))?);
    }
    let field = SpaceTimeField::new(
        coarse.clone(),
        times.clone(),
        snapshots,
        Some(seq.far),
        n_l - 1,
    )?;
    Ok((field, trimmed_per_level))
}

fn mean_energy(
    nu: &AtomicMeasure<FullState>,
    gas: &GasParameters,
) -> Result<ExtendedReal> {
    let mut acc = 0.0;
    for (atom, w) in nu.atoms.iter().zip(&nu.weights) {
        match total_energy_full(atom, gas)? {
            ExtendedReal::Finite(e) => acc += w * e,
            ExtendedReal::Infinity => return Ok(ExtendedReal::Infinity),
        }
    }
    Ok(ExtendedReal::Finite(acc))
}

/// Complete-system pipeline: uniform bounds, trimmed (biting) limit,
/// candidate residuals, Young measures with the sharp Jensen split,
/// entropy checks, verdict.
pub fn run_dichotomy_full(
    cfg: &ExperimentConfig,
    seq: &Sequence,
    run_logs: Vec<RunLog>,
) -> Result<DichotomyReport> {
    if !seq.has_entropy() {
        return Err(Error::NotApplicable(
            "complete-system dichotomy",
            "isentropic families",
        ));
    }
    let gas = seq.gas;
    let tol = &cfg.tolerances;
    let vac = cfg.analysis.vacuum_cutoff;
    let window = resolve_window(cfg)?;
    let coarse = cfg.analysis_grid()?;
    let t_final = cfg.sequence.t_final;
    let mut notes = Vec::new();

    let budget_cfg = cfg
        .stability
        .ok_or_else(|| Error::Config("complete-system run needs a [stability] budget".into()))?;
    let stability = stability_check(
        seq,
        &StabilityBudget {
            mass: budget_cfg.mass,
            entropy_lower: budget_cfg.entropy_lower,
            l1: budget_cfg.l1,
        },
    )?;
    if !stability.stable {
        notes.push(format!(
            "uniform bounds violated at level {:?}: {}",
            stability.offending_level,
            stability.reason.as_deref().unwrap_or("unspecified")
        ));
    }

    let s_lower = seq.entropy_floor.unwrap_or(budget_cfg.entropy_lower);
    let finest = &seq.finest().field;
    let floor = entropy_floor_check(finest, s_lower)?;
    let floor_ok = floor.violations == 0;
    if !floor_ok {
        notes.push(format!(
            "entropy floor violated in {} of {} cells before classification (worst deficit {:.3e})",
            floor.violations, floor.checked, floor.worst_deficit
        ));
    }

    let (candidate_field, trimmed_per_level) =
        trimmed_limit(seq, &coarse, cfg.analysis.trim_fraction, &gas, &mut notes)?;
    let battery = battery_for(cfg, &coarse)?;
    let (cand_e1, cand_e2, mut cand_gross) =
        field_residual_sup(&candidate_field, &battery, t_final, &gas, vac)?;
    let mut energy_sup: f64 = 0.0;
    for tf in battery.scalars() {
        let r = energy_residual_full(&candidate_field, tf, t_final, &gas, vac)?;
        energy_sup = energy_sup.max(r.value.abs());
        cand_gross = cand_gross.max(r.gross);
    }
    let entropy = entropy_sign_audit(
        finest,
        &battery,
        &renormalization_library(),
        t_final,
        vac,
        tol.consistency,
    )?;
    if !entropy.pass {
        notes.push(format!(
            "entropy production dips to {:.3e} against gross scale {:.3e}",
            entropy.min_value, entropy.gross_sup
        ));
    }
    let candidate = CandidateReport {
        field: candidate_field,
        trimmed_per_level,
        continuity_sup: cand_e1,
        momentum_sup: cand_e2,
        energy_sup,
        gross_sup: cand_gross,
        entropy,
    };

    let measure = empirical_young(finest, &coarse, window)?;
    let mut cells = Vec::with_capacity(measure.cells.len());
    let mut dirac = 0;
    let mut strict = 0;
    let mut zero_set = 0;
    let mut max_gap: f64 = 0.0;
    let mut gap_scale: f64 = 1.0;
    let mut line_all = true;
    let energy_fn = |st: &FullState| total_energy_full(st, &gas);
    for (c, nu) in measure.cells.iter().enumerate() {
        let scale = match mean_energy(nu, &gas)? {
            ExtendedReal::Finite(e) => 1.0 + e.abs(),
            ExtendedReal::Infinity => {
                return Err(Error::InvalidState(format!(
                    "infinite mean energy in coarse cell {c}"
                )))
            }
        };
        gap_scale = gap_scale.max(scale);
        let cell_tol = tol.jensen * scale;
        let gap = match jensen_gap(nu, energy_fn)? {
            ExtendedReal::Finite(g) => g,
            ExtendedReal::Infinity => f64::INFINITY,
        };
        let class = sharp_jensen_classify(nu, energy_fn, cell_tol)?;
        let line_ok = entropy_line_check(nu, s_lower);
        // sharp split: a measure with no Jensen gap that respects the
        // entropy line has nowhere to spread out
        if gap.abs() <= cell_tol && line_ok && class != JensenClass::Dirac {
            return Err(Error::DichotomyViolation(format!(
                "cell {c}: gap {gap:.3e} below {cell_tol:.3e} with the entropy line intact, \
                 yet the measure is not an atom"
            )));
        }
        match class {
            JensenClass::Dirac => dirac += 1,
            JensenClass::Strict => strict += 1,
            JensenClass::ZeroSetSupported => zero_set += 1,
        }
        max_gap = max_gap.max(gap);
        line_all &= line_ok;
        cells.push(JensenCellRow {
            cell: c,
            atoms: nu.atoms.len(),
            gap,
            second_moment: nu.second_moment(),
            class,
            line_ok,
        });
    }

    let energies = energy_table(seq)?;
    let budget = budget_from(&energies);

    let gap_decisive = max_gap >= tol.defect_detect * gap_scale;
    let branch = if stability.stable && floor_ok && candidate.entropy.pass && strict == 0 {
        DichotomyBranch::StrongConvergence
    } else if stability.stable && floor_ok && gap_decisive {
        DichotomyBranch::NotAWeakSolution
    } else {
        if strict > 0 && !gap_decisive {
            notes.push(format!(
                "Jensen gap {max_gap:.3e} positive but below the decisive scale {:.3e}",
                tol.defect_detect * gap_scale
            ));
        }
        if !stability.stable {
            notes.push("no verdict without uniform bounds".into());
        }
        if strict == 0 && !candidate.entropy.pass {
            notes.push("atomic measures but entropy production fails".into());
        }
        DichotomyBranch::Inconclusive
    };

    let young = YoungEvidence {
        measure,
        cells,
        dirac,
        strict,
        zero_set,
        max_gap,
        gap_scale,
    };
    let evidence = Evidence {
        energy_budget: budget,
        stability_ok: Some(stability.stable),
        limit_residual_sup: Some(candidate.continuity_sup.max(candidate.momentum_sup)),
        limit_residual_gross: Some(candidate.gross_sup),
        max_jensen_gap: Some(max_gap),
        jensen_scale: Some(gap_scale),
        cells_dirac: Some(dirac),
        cells_strict: Some(strict),
        cells_zero_set: Some(zero_set),
        entropy_line_ok: Some(line_all),
        entropy_audit_ok: Some(young_audit_pass(&candidate)),
        floor_ok: Some(floor_ok),
        ..Evidence::default()
    };

    Ok(DichotomyReport {
        branch,
        full_system: true,
        consistency: None,
        stability: Some(stability),
        floor: Some(floor),
        defects: None,
        liouville: None,
        equation: None,
        young: Some(young),
        candidate: Some(candidate),
        energies,
        times: seq.levels[0].field.times.clone(),
        run_logs,
        evidence,
        notes,
    })
}

fn young_audit_pass(candidate: &CandidateReport) -> bool {
    candidate.entropy.pass
}

/// Generates the configured family and runs the matching pipeline.
pub fn run_dichotomy(cfg: &ExperimentConfig) -> Result<DichotomyReport> {
    cfg.validate()?;
    let (seq, logs) = build_sequence(cfg)?;
    if seq.has_entropy() {
        run_dichotomy_full(cfg, &seq, logs)
    } else {
        run_dichotomy_isentropic(cfg, &seq, logs)
    }
}
