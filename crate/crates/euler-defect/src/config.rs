//! Experiment configuration.
//!
//! A complete experiment is a single TOML file: gas, domain, refinement
//! ladder, generator, batteries, tolerances, output. Parsing fills in
//! documented defaults, so serializing a parsed config always yields the
//! fully resolved experiment; that resolved form is embedded in every
//! report for reproducibility and must round-trip unchanged.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::algebra::Vec2;
use crate::eos::{FarField, FullReference, GasParameters};
use crate::error::{Error, Result};
use crate::generators::{LevelSpec, SequenceSpec};
use crate::grid::{BoundaryMode, Grid};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainMode {
    /// Truncated whole space: a far-field slab of width `padding` is
    /// held fixed on every side.
    WholeSpace,
    Bounded,
}

/// Declared outcome for exit-code purposes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expectation {
    Strong,
    Defect,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GasSection {
    pub gamma: f64,
    #[serde(default = "one")]
    pub a: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    pub dim: usize,
    pub lo: f64,
    pub hi: f64,
    pub mode: DomainMode,
    /// Far-field slab width per side; whole-space only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub padding: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FarFieldSection {
    pub rho: f64,
    /// Velocity components, one per axis.
    pub u: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSection {
    pub rho: f64,
    pub s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceSection {
    /// Cells per axis, one entry per level, strictly increasing.
    pub cells: Vec<usize>,
    /// Artificial viscosities, one per level, strictly decreasing;
    /// required by the viscous generator, ignored elsewhere.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub viscosity: Option<Vec<f64>>,
    pub t_final: f64,
    /// Snapshots stored at `output_times + 1` uniform times including 0.
    pub output_times: usize,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entropy_floor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<ReferenceSection>,
}

/// One phase-space state as written in config files. `u` is velocity,
/// not momentum; `s` switches the experiment to the complete system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateSection {
    pub rho: f64,
    pub u: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorSection {
    /// Far-field state everywhere; `s` adds a constant entropy field.
    Constant {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        s: Option<f64>,
    },
    /// Vanishing-viscosity finite-volume runs from a two-state datum.
    Viscous {
        left: StateSection,
        right: StateSection,
        x0: f64,
    },
    /// Exact self-similar two-wave solution sampled on every level.
    Riemann {
        left: StateSection,
        right: StateSection,
        x0: f64,
    },
    /// Two-state pattern oscillating at wavelength `lambda / cells`.
    Oscillatory {
        a: StateSection,
        b: StateSection,
        lambda: f64,
    },
    /// Momentum bump shrinking with refinement at fixed kinetic energy.
    Concentration {
        x0: Vec<f64>,
        amplitude: f64,
        radius: f64,
    },
}

impl GeneratorSection {
    /// Complete system iff the generator carries an entropy field.
    pub fn is_full(&self) -> bool {
        match self {
            GeneratorSection::Constant { s } => s.is_some(),
            GeneratorSection::Oscillatory { a, b, .. } => a.s.is_some() || b.s.is_some(),
            _ => false,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            GeneratorSection::Constant { .. } => "constant",
            GeneratorSection::Viscous { .. } => "viscous",
            GeneratorSection::Riemann { .. } => "riemann",
            GeneratorSection::Oscillatory { .. } => "oscillatory",
            GeneratorSection::Concentration { .. } => "concentration",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatterySection {
    /// Scalar test functions for continuity residuals.
    pub scalars: usize,
    /// Vector test functions for momentum residuals.
    pub vectors: usize,
    pub seed: u64,
    /// Members of the defect-equation battery.
    pub equation_count: usize,
    pub equation_seed: u64,
    /// Directions probed by positive-semidefiniteness checks.
    pub xi_count: usize,
    pub xi_seed: u64,
}

impl Default for BatterySection {
    fn default() -> Self {
        BatterySection {
            scalars: 3,
            vectors: 3,
            seed: 1,
            equation_count: 4,
            equation_seed: 2,
            xi_count: 20,
            xi_seed: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisSection {
    /// Cells per axis of the grid carrying limits and defect measures.
    pub coarse_cells: usize,
    /// Averaging window [t0, t1]; whole stored range when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<[f64; 2]>,
    pub vacuum_cutoff: f64,
    /// Fraction of highest-energy cells excluded from the trimmed
    /// (biting) limit of complete-system families.
    pub trim_fraction: f64,
}

impl Default for AnalysisSection {
    fn default() -> Self {
        AnalysisSection {
            coarse_cells: 8,
            window: None,
            vacuum_cutoff: 1e-12,
            trim_fraction: 0.01,
        }
    }
}

/// Every knob that decides a pass/fail line. All must be positive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToleranceSection {
    /// Weak-residual floor relative to the gross battery scale.
    pub consistency: f64,
    /// Matrix positivity slack relative to the matrix scale.
    pub psd: f64,
    /// Divergence-pairing floor relative to mass times C1 norm.
    pub divergence: f64,
    /// Energy-defect identity slack relative to the defect mass.
    pub identity: f64,
    /// Slack for inequalities that hold with exact arithmetic.
    pub inequality: f64,
    /// Jensen-gap resolution relative to the cell energy scale.
    pub jensen: f64,
    /// Defect-equation gap factor relative to the defect scale.
    pub equation: f64,
    /// Defect mass above this fraction of the energy budget counts as
    /// present; below `defect_clear` it counts as absent. The gap
    /// between the two is classified inconclusive, never guessed.
    pub defect_detect: f64,
    pub defect_clear: f64,
}

impl Default for ToleranceSection {
    fn default() -> Self {
        ToleranceSection {
            consistency: 1e-3,
            psd: 1e-8,
            divergence: 1e-6,
            identity: 5e-2,
            inequality: 1e-8,
            jensen: 1e-6,
            equation: 5e-2,
            defect_detect: 1e-2,
            defect_clear: 1e-3,
        }
    }
}

/// Uniform-bound budgets audited by the stability check.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilitySection {
    pub mass: f64,
    pub entropy_lower: f64,
    pub l1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: String,
    /// Also emit SVG plots (residual decay, energy trend, defect map).
    pub plots: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection {
            dir: "out".into(),
            plots: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<Expectation>,
    pub gas: GasSection,
    pub domain: DomainSection,
    pub far_field: FarFieldSection,
    pub sequence: SequenceSection,
    pub generator: GeneratorSection,
    #[serde(default)]
    pub battery: BatterySection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default)]
    pub tolerances: ToleranceSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stability: Option<StabilitySection>,
    #[serde(default)]
    pub output: OutputSection,
}

fn one() -> f64 {
    1.0
}

fn default_cfl() -> f64 {
    0.4
}

fn vec2_from(components: &[f64], dim: usize, what: &str) -> Result<Vec2> {
    if components.len() != dim {
        return Err(Error::Config(format!(
            "{what}: expected {dim} velocity components, got {}",
            components.len()
        )));
    }
    let y = if dim == 2 { components[1] } else { 0.0 };
    Ok(Vec2::new(components[0], y))
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("config parse: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Fully resolved form, defaults included. Parsing this text yields
    /// an equal config.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(format!("config serialize: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        GasParameters::new(self.gas.gamma, self.gas.a)?;
        let d = &self.domain;
        if d.dim != 1 && d.dim != 2 {
            return Err(Error::Config(format!("dim {} not in {{1, 2}}", d.dim)));
        }
        if !(d.lo < d.hi) || !d.lo.is_finite() || !d.hi.is_finite() {
            return Err(Error::Config(format!("domain [{}, {}]", d.lo, d.hi)));
        }
        match (d.mode, d.padding) {
            (DomainMode::WholeSpace, Some(p)) => {
                if !(p > 0.0) || 2.0 * p >= d.hi - d.lo {
                    return Err(Error::Config(format!(
                        "padding {p} must be positive and leave an interior"
                    )));
                }
            }
            (DomainMode::WholeSpace, None) => {
                return Err(Error::Config("whole_space mode needs padding".into()));
            }
            (DomainMode::Bounded, Some(_)) => {
                return Err(Error::Config("bounded mode takes no padding".into()));
            }
            (DomainMode::Bounded, None) => {}
        }
        if !(self.far_field.rho >= 0.0) {
            return Err(Error::Config(format!(
                "far-field density {}",
                self.far_field.rho
            )));
        }
        vec2_from(&self.far_field.u, d.dim, "far_field")?;

        let s = &self.sequence;
        if s.cells.is_empty() {
            return Err(Error::Config("no refinement levels".into()));
        }
        if let Some(v) = &s.viscosity {
            if v.len() != s.cells.len() {
                return Err(Error::Config(format!(
                    "{} viscosities for {} levels",
                    v.len(),
                    s.cells.len()
                )));
            }
        }
        let a = &self.analysis;
        if a.coarse_cells == 0 {
            return Err(Error::Config("coarse_cells must be positive".into()));
        }
        for &c in &s.cells {
            if c % a.coarse_cells != 0 {
                return Err(Error::Config(format!(
                    "level with {c} cells is not a refinement of the {}-cell analysis grid",
                    a.coarse_cells
                )));
            }
        }
        if let Some([t0, t1]) = a.window {
            if !(0.0 <= t0 && t0 < t1 && t1 <= s.t_final) {
                return Err(Error::Config(format!(
                    "window [{t0}, {t1}] outside [0, {}]",
                    s.t_final
                )));
            }
        }
        if !(a.vacuum_cutoff > 0.0) {
            return Err(Error::Config("vacuum_cutoff must be positive".into()));
        }
        if !(0.0..0.5).contains(&a.trim_fraction) {
            return Err(Error::Config(format!(
                "trim_fraction {} outside [0, 0.5)",
                a.trim_fraction
            )));
        }

        let b = &self.battery;
        if b.scalars == 0 || b.vectors == 0 {
            return Err(Error::Config(
                "battery needs at least one scalar and one vector member".into(),
            ));
        }
        if b.equation_count == 0 || b.xi_count == 0 {
            return Err(Error::Config("battery counts must be positive".into()));
        }

        let t = &self.tolerances;
        for (name, v) in [
            ("consistency", t.consistency),
            ("psd", t.psd),
            ("divergence", t.divergence),
            ("identity", t.identity),
            ("inequality", t.inequality),
            ("jensen", t.jensen),
            ("equation", t.equation),
            ("defect_detect", t.defect_detect),
            ("defect_clear", t.defect_clear),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("tolerance {name} = {v} must be positive")));
            }
        }
        if t.defect_clear >= t.defect_detect {
            return Err(Error::Config(format!(
                "defect_clear {} must sit below defect_detect {}",
                t.defect_clear, t.defect_detect
            )));
        }

        match &self.generator {
            GeneratorSection::Constant { .. } => {}
            GeneratorSection::Viscous { left, right, x0 }
            | GeneratorSection::Riemann { left, right, x0 } => {
                if d.dim != 1 {
                    return Err(Error::Config(format!(
                        "{} generator needs dim = 1",
                        self.generator.name()
                    )));
                }
                if left.s.is_some() || right.s.is_some() {
                    return Err(Error::Config(format!(
                        "{} generator is isentropic; drop the entropy fields",
                        self.generator.name()
                    )));
                }
                if !(d.lo < *x0 && *x0 < d.hi) {
                    return Err(Error::Config(format!("jump at {x0} outside the domain")));
                }
                for st in [left, right] {
                    if !(st.rho > 0.0) {
                        return Err(Error::Config(format!("side density {}", st.rho)));
                    }
                    vec2_from(&st.u, d.dim, self.generator.name())?;
                }
                if matches!(self.generator, GeneratorSection::Viscous { .. })
                    && s.viscosity.is_none()
                {
                    return Err(Error::Config(
                        "viscous generator needs per-level viscosities".into(),
                    ));
                }
            }
            GeneratorSection::Oscillatory { a, b, lambda } => {
                if !(*lambda > 0.0) {
                    return Err(Error::Config(format!("wavelength factor {lambda}")));
                }
                if a.s.is_some() != b.s.is_some() {
                    return Err(Error::Config(
                        "oscillation states must both or neither carry entropy".into(),
                    ));
                }
                for st in [a, b] {
                    if !(st.rho > 0.0) {
                        return Err(Error::Config(format!("oscillation density {}", st.rho)));
                    }
                    vec2_from(&st.u, d.dim, "oscillatory")?;
                }
            }
            GeneratorSection::Concentration {
                x0,
                amplitude,
                radius,
            } => {
                if x0.len() != d.dim {
                    return Err(Error::Config(format!(
                        "concentration center has {} coordinates for dim {}",
                        x0.len(),
                        d.dim
                    )));
                }
                if !(*radius > 0.0) || !amplitude.is_finite() {
                    return Err(Error::Config(format!(
                        "concentration amplitude {amplitude}, radius {radius}"
                    )));
                }
            }
        }
        if self.generator.is_full() {
            if self.stability.is_none() {
                return Err(Error::Config(
                    "complete-system experiments need a [stability] budget".into(),
                ));
            }
        } else if s.entropy_floor.is_some() || s.reference.is_some() {
            return Err(Error::Config(
                "entropy_floor and reference apply to the complete system only".into(),
            ));
        }
        Ok(())
    }

    pub fn gas(&self) -> GasParameters {
        GasParameters::new(self.gas.gamma, self.gas.a).expect("validated")
    }

    pub fn far(&self) -> FarField {
        let u = vec2_from(&self.far_field.u, self.domain.dim, "far_field").expect("validated");
        FarField::new(self.far_field.rho, u).expect("validated")
    }

    pub fn boundary_mode(&self) -> BoundaryMode {
        match self.domain.mode {
            DomainMode::WholeSpace => BoundaryMode::FarFieldPadded {
                padding: self.domain.padding.expect("validated"),
            },
            DomainMode::Bounded => BoundaryMode::BoundedDomain,
        }
    }

    pub fn sequence_spec(&self) -> Result<SequenceSpec> {
        let s = &self.sequence;
        let levels = s
            .cells
            .iter()
            .enumerate()
            .map(|(k, &cells)| LevelSpec {
                cells,
                viscosity: s.viscosity.as_ref().map(|v| v[k]),
            })
            .collect();
        let spec = SequenceSpec {
            dim: self.domain.dim,
            lo: self.domain.lo,
            hi: self.domain.hi,
            mode: self.boundary_mode(),
            gas: self.gas(),
            far: self.far(),
            t_final: s.t_final,
            output_times: s.output_times,
            cfl: s.cfl,
            levels,
            entropy_floor: s.entropy_floor,
            reference: s.reference.as_ref().map(|r| FullReference {
                rho: r.rho,
                s: r.s,
            }),
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Grid carrying weak limits, defect measures and Young measures.
    pub fn analysis_grid(&self) -> Result<Grid> {
        let c = self.analysis.coarse_cells;
        match self.domain.dim {
            1 => Grid::line(c, self.domain.lo, self.domain.hi, self.boundary_mode()),
            _ => Grid::square(c, self.domain.lo, self.domain.hi, self.boundary_mode()),
        }
    }

    /// Keep only the first `n` levels of the ladder.
    pub fn truncate_levels(&mut self, n: usize) -> Result<()> {
        if n == 0 || n > self.sequence.cells.len() {
            return Err(Error::Config(format!(
                "cannot keep {n} of {} configured levels",
                self.sequence.cells.len()
            )));
        }
        self.sequence.cells.truncate(n);
        if let Some(v) = &mut self.sequence.viscosity {
            v.truncate(n);
        }
        Ok(())
    }

    /// Reseed both batteries from a single CLI-provided seed.
    pub fn reseed(&mut self, seed: u64) {
        self.battery.seed = seed;
        self.battery.equation_seed = seed.wrapping_add(1);
        self.battery.xi_seed = seed.wrapping_add(2);
    }
}
