//! Empirical Young measures and the sharp Jensen dichotomy.
//!
//! An oscillating family carries per-cell statistics: sampling every
//! fine cell inside a coarse cell over a time window gives an atomic
//! probability measure on phase space. Jensen's inequality makes the
//! measure of a convex energy exceed the energy of the barycenter, and
//! the sharp form of that inequality says equality forces either a
//! Dirac measure or support inside the zero set of the energy. The
//! complete-system pipeline closes the argument with the entropy line:
//! a barycenter above it cannot sit in the zero set, so equality means
//! strong convergence.

use crate::defect::TimeWindow;
use crate::eos::{FullState, IsentropicState};
use crate::extended::ExtendedReal;
use crate::grid::{Grid, Snapshot, SpaceTimeField};
use crate::phase::Phase;
use crate::{Error, Result};

/// Relative slack on the unit total weight.
pub const WEIGHT_TOL: f64 = 1e-12;

/// Atoms closer than this times the local phase scale are floating-point
/// duplicates, not oscillation, and are merged.
pub const MERGE_REL: f64 = 1e-9;

/// Finitely many phase-space atoms with positive weights summing to one.
#[derive(Clone, Debug)]
pub struct AtomicMeasure<T: Phase> {
    pub atoms: Vec<T>,
    pub weights: Vec<f64>,
}

impl<T: Phase> AtomicMeasure<T> {
    pub fn new(atoms: Vec<T>, weights: Vec<f64>) -> Result<Self> {
        let nu = AtomicMeasure { atoms, weights };
        nu.validate()?;
        Ok(nu)
    }

    pub fn dirac(atom: T) -> Self {
        AtomicMeasure {
            atoms: vec![atom],
            weights: vec![1.0],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.atoms.is_empty() || self.atoms.len() != self.weights.len() {
            return Err(Error::InvalidState(format!(
                "{} atoms against {} weights",
                self.atoms.len(),
                self.weights.len()
            )));
        }
        for (a, &w) in self.atoms.iter().zip(&self.weights) {
            if !a.is_finite_point() {
                return Err(Error::InvalidState(format!("non-finite atom {a:?}")));
            }
            if !(w > 0.0) || !w.is_finite() {
                return Err(Error::InvalidState(format!("weight {w} must be positive")));
            }
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::InvalidState(format!(
                "weights sum to {total}, not 1"
            )));
        }
        Ok(())
    }

    /// Equal-weight empirical measure of the samples, merging
    /// floating-point duplicates onto their first occurrence.
    pub fn from_samples(samples: &[T]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidState("no samples".into()));
        }
        let mut scale = 1.0f64;
        for s in samples {
            if !s.is_finite_point() {
                return Err(Error::InvalidState(format!("non-finite sample {s:?}")));
            }
            scale = scale.max(s.magnitude());
        }
        let tol = MERGE_REL * scale;
        let mut atoms: Vec<T> = Vec::new();
        let mut counts: Vec<usize> = Vec::new();
        'next: for s in samples {
            for (a, k) in atoms.iter().zip(counts.iter_mut()) {
                if a.dist(s) <= tol {
                    *k += 1;
                    continue 'next;
                }
            }
            atoms.push(*s);
            counts.push(1);
        }
        let n = samples.len() as f64;
        let weights = counts.into_iter().map(|k| k as f64 / n).collect();
        Ok(AtomicMeasure { atoms, weights })
    }

    /// Weighted mean of the atoms.
    pub fn barycenter(&self) -> T {
        let mut acc = [0.0f64; 4];
        for (a, &w) in self.atoms.iter().zip(&self.weights) {
            let c = a.coords();
            for i in 0..4 {
                acc[i] += w * c[i];
            }
        }
        T::from_coords(acc)
    }

    /// Weighted squared spread about the barycenter; zero exactly for a
    /// Dirac measure and monotone in every atom's displacement.
    pub fn second_moment(&self) -> f64 {
        let b = self.barycenter();
        self.atoms
            .iter()
            .zip(&self.weights)
            .map(|(a, &w)| w * a.dist(&b).powi(2))
            .sum()
    }
}

/// `<nu; E> - E(barycenter)`, nonnegative for convex `E` by Jensen's
/// inequality. Atoms outside the domain of `E` make the mean infinite
/// and the gap with it. A finite mean with an infinite barycenter value
/// cannot happen for a convex functional and reports as infinite too.
pub fn jensen_gap<T: Phase>(
    nu: &AtomicMeasure<T>,
    e: impl Fn(&T) -> Result<ExtendedReal>,
) -> Result<ExtendedReal> {
    nu.validate()?;
    let mut mean = 0.0f64;
    for (a, &w) in nu.atoms.iter().zip(&nu.weights) {
        match e(a)? {
            ExtendedReal::Finite(v) => mean += w * v,
            ExtendedReal::Infinity => return Ok(ExtendedReal::Infinity),
        }
    }
    match e(&nu.barycenter())? {
        ExtendedReal::Finite(v) => Ok(ExtendedReal::Finite(mean - v)),
        ExtendedReal::Infinity => Ok(ExtendedReal::Infinity),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JensenClass {
    /// The inequality is strict: genuine oscillation with an energy cost.
    Strict,
    /// All mass within tolerance of the barycenter.
    Dirac,
    /// Equality without collapse: every atom sits in the zero set of
    /// the energy.
    ZeroSetSupported,
}

/// Sharp-form trichotomy: a vanishing gap forces a Dirac measure or a
/// measure supported where the energy vanishes. The fallback error is
/// unreachable for convex energies and flags a broken input or
/// functional.
pub fn sharp_jensen_classify<T: Phase>(
    nu: &AtomicMeasure<T>,
    e: impl Fn(&T) -> Result<ExtendedReal>,
    tol: f64,
) -> Result<JensenClass> {
    if !(tol > 0.0) {
        return Err(Error::InvalidState(format!("tolerance {tol} must be positive")));
    }
    let gap = jensen_gap(nu, &e)?;
    match gap {
        ExtendedReal::Infinity => return Ok(JensenClass::Strict),
        ExtendedReal::Finite(g) if g > tol => return Ok(JensenClass::Strict),
        _ => {}
    }
    if nu.second_moment() < tol * tol {
        return Ok(JensenClass::Dirac);
    }
    for a in &nu.atoms {
        match e(a)? {
            ExtendedReal::Finite(v) if v < tol => {}
            other => {
                return Err(Error::DichotomyViolation(format!(
                    "gap {gap:?} at tolerance {tol}, spread {:.3e}, atom {a:?} has energy {other:?}",
                    nu.second_moment()
                )));
            }
        }
    }
    Ok(JensenClass::ZeroSetSupported)
}

/// Entropy-line test for the complete system: the barycenter must obey
/// `S >= rho * s_lower`. Measures passing it cannot be supported in the
/// zero set, whose entropies are nonpositive at zero density, so a
/// vanishing gap then forces the Dirac branch.
pub fn entropy_line_check(nu: &AtomicMeasure<FullState>, s_lower: f64) -> bool {
    let b = nu.barycenter();
    b.s >= b.rho * s_lower
}

/// Per-cell atomic measures of a field over a coarse grid.
#[derive(Clone, Debug)]
pub struct EmpiricalYoungMeasure<T: Phase> {
    pub grid: Grid,
    pub cells: Vec<AtomicMeasure<T>>,
}

fn window_times(field: &SpaceTimeField, window: TimeWindow) -> Result<Vec<usize>> {
    let ks: Vec<usize> = (0..field.times.len())
        .filter(|&k| field.times[k] >= window.t0 && field.times[k] <= window.t1)
        .collect();
    if ks.is_empty() {
        return Err(Error::InvalidState(format!(
            "no output times inside the window [{}, {}]",
            window.t0, window.t1
        )));
    }
    Ok(ks)
}

fn empirical_cells<T: Phase>(
    field: &SpaceTimeField,
    coarse: &Grid,
    window: TimeWindow,
    extract: impl Fn(&Snapshot, usize) -> T,
) -> Result<Vec<AtomicMeasure<T>>> {
    let ks = window_times(field, window)?;
    let mut cells = Vec::with_capacity(coarse.cell_count());
    for c in 0..coarse.cell_count() {
        let fine = field.grid.fine_cells_in(coarse, c)?;
        let mut samples = Vec::with_capacity(fine.len() * ks.len());
        for &k in &ks {
            let snap = &field.snapshots[k];
            for &f in &fine {
                samples.push(extract(snap, f));
            }
        }
        cells.push(AtomicMeasure::from_samples(&samples)?);
    }
    Ok(cells)
}

/// Samples a complete-system member into per-cell measures: every fine
/// cell inside a coarse cell contributes one equally weighted atom per
/// output time in the window.
pub fn empirical_young(
    field: &SpaceTimeField,
    coarse: &Grid,
    window: TimeWindow,
) -> Result<EmpiricalYoungMeasure<FullState>> {
    if field.snapshots.iter().any(|s| s.s.is_none()) {
        return Err(Error::NotApplicable(
            "empirical Young measure",
            "complete-system sampling needs entropy data",
        ));
    }
    let cells = empirical_cells(field, coarse, window, |snap, f| {
        FullState::new(snap.rho[f], snap.m[f], snap.s.as_ref().unwrap()[f])
    })?;
    Ok(EmpiricalYoungMeasure {
        grid: coarse.clone(),
        cells,
    })
}

/// Isentropic variant: atoms carry density and momentum only.
pub fn empirical_young_isentropic(
    field: &SpaceTimeField,
    coarse: &Grid,
    window: TimeWindow,
) -> Result<EmpiricalYoungMeasure<IsentropicState>> {
    let cells = empirical_cells(field, coarse, window, |snap, f| {
        IsentropicState::new(snap.rho[f], snap.m[f])
    })?;
    Ok(EmpiricalYoungMeasure {
        grid: coarse.clone(),
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::Vec2;
    use crate::eos::{total_energy_full, GasParameters};
    use crate::grid::BoundaryMode;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn gas2() -> GasParameters {
        GasParameters::new(2.0, 1.0).unwrap()
    }

    fn full(rho: f64, mx: f64, s: f64) -> FullState {
        FullState::new(rho, Vec2::new(mx, 0.0), s)
    }

    #[test]
    fn measure_validation() {
        assert!(AtomicMeasure::new(vec![1.0f64], vec![1.0]).is_ok());
        assert!(AtomicMeasure::new(vec![1.0f64], vec![0.5]).is_err());
        assert!(AtomicMeasure::new(vec![1.0f64, 2.0], vec![1.0, 0.0]).is_err());
        assert!(AtomicMeasure::new(vec![1.0f64, 2.0], vec![1.5, -0.5]).is_err());
        assert!(AtomicMeasure::new(vec![f64::NAN], vec![1.0]).is_err());
        assert!(AtomicMeasure::new(vec![1.0f64, 2.0], vec![0.5]).is_err());
        assert!(AtomicMeasure::<f64>::new(vec![], vec![]).is_err());
        // the unit-sum slack is 1e-12
        assert!(AtomicMeasure::new(vec![0.0f64, 1.0], vec![0.5, 0.5 + 5e-13]).is_ok());
        assert!(AtomicMeasure::new(vec![0.0f64, 1.0], vec![0.5, 0.5 + 5e-12]).is_err());
    }

    #[test]
    fn barycenter_mean_and_symmetry() {
        let one = AtomicMeasure::dirac(full(1.3, -0.2, 0.7));
        let b = one.barycenter();
        assert_eq!(b.rho, 1.3);
        assert_eq!(b.m.x, -0.2);
        assert_eq!(b.s, 0.7);

        let two = AtomicMeasure::new(vec![0.0f64, 2.0], vec![0.5, 0.5]).unwrap();
        assert_eq!(two.barycenter(), 1.0);

        let atoms = vec![full(1.0, 0.4, -0.3), full(2.5, -1.0, 0.2), full(0.7, 0.0, 1.1)];
        let weights = vec![0.2, 0.3, 0.5];
        let nu = AtomicMeasure::new(atoms.clone(), weights.clone()).unwrap();
        let flipped = AtomicMeasure::new(
            vec![atoms[2], atoms[0], atoms[1]],
            vec![weights[2], weights[0], weights[1]],
        )
        .unwrap();
        assert!(nu.barycenter().dist(&flipped.barycenter()) < 1e-15);
        assert_eq!(AtomicMeasure::dirac(3.0f64).second_moment(), 0.0);
    }

    #[test]
    fn jensen_gap_examples() {
        let gas = gas2();
        let e = |s: &FullState| total_energy_full(s, &gas);

        let dirac = AtomicMeasure::dirac(full(1.0, 0.0, 0.0));
        assert_eq!(jensen_gap(&dirac, e).unwrap(), ExtendedReal::Finite(0.0));

        // E(rho, 0, 0) = rho^2 for gamma = 2: (1 + 9)/2 - 4 = 1
        let two = AtomicMeasure::new(
            vec![full(1.0, 0.0, 0.0), full(3.0, 0.0, 0.0)],
            vec![0.5, 0.5],
        )
        .unwrap();
        let gap = jensen_gap(&two, e).unwrap();
        assert_relative_eq!(gap.value(), 1.0, max_relative = 1e-14);

        // the zero set is rho = 0, m = 0, S <= 0; barycenters stay on it
        let zs = AtomicMeasure::new(
            vec![full(0.0, 0.0, -1.0), full(0.0, 0.0, -2.0)],
            vec![0.5, 0.5],
        )
        .unwrap();
        assert_eq!(jensen_gap(&zs, e).unwrap(), ExtendedReal::Finite(0.0));

        // vacuum with momentum is outside the domain
        let bad = AtomicMeasure::new(
            vec![full(0.0, 1.0, 0.0), full(1.0, 0.0, 0.0)],
            vec![0.5, 0.5],
        )
        .unwrap();
        assert_eq!(jensen_gap(&bad, e).unwrap(), ExtendedReal::Infinity);
    }

    #[test]
    fn sharp_classification_trichotomy() {
        let gas = gas2();
        let e = |s: &FullState| total_energy_full(s, &gas);
        let tol = 1e-9;

        let dirac = AtomicMeasure::dirac(full(1.0, 0.0, 0.0));
        assert_eq!(
            sharp_jensen_classify(&dirac, e, tol).unwrap(),
            JensenClass::Dirac
        );

        let two = AtomicMeasure::new(
            vec![full(1.0, 0.0, 0.0), full(3.0, 0.0, 0.0)],
            vec![0.5, 0.5],
        )
        .unwrap();
        assert_eq!(
            sharp_jensen_classify(&two, e, tol).unwrap(),
            JensenClass::Strict
        );

        let zs = AtomicMeasure::new(
            vec![full(0.0, 0.0, -1.0), full(0.0, 0.0, -2.0)],
            vec![0.5, 0.5],
        )
        .unwrap();
        assert_eq!(
            sharp_jensen_classify(&zs, e, tol).unwrap(),
            JensenClass::ZeroSetSupported
        );

        assert!(sharp_jensen_classify(&dirac, e, 0.0).is_err());
    }

    #[test]
    fn entropy_line_examples() {
        let pass = AtomicMeasure::dirac(full(1.0, 0.0, 0.0));
        assert!(entropy_line_check(&pass, -1.0));
        let fail = AtomicMeasure::dirac(full(1.0, 0.0, -2.0));
        assert!(!entropy_line_check(&fail, -1.0));
        let boundary = AtomicMeasure::dirac(full(0.0, 0.0, 0.0));
        assert!(entropy_line_check(&boundary, 0.0));
    }

    #[test]
    fn random_measures_never_violate_the_dichotomy() {
        let gas = GasParameters::new(1.4, 0.8).unwrap();
        let e = |s: &FullState| total_energy_full(s, &gas);
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for trial in 0..10_000 {
            let n = rng.gen_range(1..=6);
            let mut atoms = Vec::with_capacity(n);
            for _ in 0..n {
                // mix interior points with zero-set points
                if rng.gen_bool(0.15) {
                    atoms.push(full(0.0, 0.0, -rng.gen_range(0.0..2.0)));
                } else {
                    atoms.push(FullState::new(
                        rng.gen_range(0.1..5.0),
                        Vec2::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)),
                        rng.gen_range(-2.0..2.0),
                    ));
                }
            }
            let mut weights: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
            let total: f64 = weights.iter().sum();
            for w in &mut weights {
                *w /= total;
            }
            let nu = AtomicMeasure::new(atoms, weights).unwrap();
            let gap = jensen_gap(&nu, e).unwrap();
            if let ExtendedReal::Finite(g) = gap {
                assert!(g >= -1e-12, "trial {trial}: gap {g}");
            }
            sharp_jensen_classify(&nu, e, 1e-9)
                .unwrap_or_else(|err| panic!("trial {trial}: {err}"));
        }
    }

    fn field_from_rho(
        grid: &Grid,
        times: Vec<f64>,
        rho_at: impl Fn(usize, usize) -> f64,
        s_at: impl Fn(usize, usize) -> f64,
    ) -> SpaceTimeField {
        let n = grid.cell_count();
        let snaps: Vec<Snapshot> = (0..times.len())
            .map(|k| {
                let rho: Vec<f64> = (0..n).map(|c| rho_at(k, c)).collect();
                let s: Vec<f64> = (0..n).map(|c| s_at(k, c)).collect();
                Snapshot::new(grid.clone(), rho, vec![Vec2::ZERO; n], Some(s)).unwrap()
            })
            .collect();
        SpaceTimeField::new(grid.clone(), times, snaps, None, 0).unwrap()
    }

    #[test]
    fn empirical_sampling_and_merging() {
        let fine = Grid::line(64, 0.0, 1.0, BoundaryMode::BoundedDomain).unwrap();
        let coarse = Grid::line(8, 0.0, 1.0, BoundaryMode::BoundedDomain).unwrap();
        let window = TimeWindow::new(0.0, 1.0).unwrap();

        // constant field: one atom of weight one per cell
        let cf = field_from_rho(&fine, vec![0.0, 0.5, 1.0], |_, _| 1.7, |_, _| 0.3);
        let ym = empirical_young(&cf, &coarse, window).unwrap();
        assert_eq!(ym.cells.len(), 8);
        for cell in &ym.cells {
            assert_eq!(cell.atoms.len(), 1);
            assert_eq!(cell.weights[0], 1.0);
            assert_eq!(cell.atoms[0].rho, 1.7);
            assert_eq!(cell.atoms[0].s, 0.3);
        }

        // two-state checkerboard merges to two atoms of weight 1/2
        let cb = field_from_rho(
            &fine,
            vec![0.0, 1.0],
            |_, c| if c % 2 == 0 { 2.0 } else { 0.5 },
            |_, _| 0.0,
        );
        let ym = empirical_young(&cb, &coarse, window).unwrap();
        for cell in &ym.cells {
            assert_eq!(cell.atoms.len(), 2);
            assert_eq!(cell.weights, vec![0.5, 0.5]);
            assert_eq!(cell.atoms[0].rho, 2.0);
            assert_eq!(cell.atoms[1].rho, 0.5);
        }

        // barycenters match the plain sample means
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let vals: Vec<Vec<f64>> = (0..2)
            .map(|_| (0..64).map(|_| rng.gen_range(0.2..3.0)).collect())
            .collect();
        let rf = field_from_rho(
            &fine,
            vec![0.0, 1.0],
            move |k, c| vals[k][c],
            |k, c| 0.01 * (k as f64) + 0.002 * (c as f64),
        );
        let ym = empirical_young(&rf, &coarse, window).unwrap();
        for (c, cell) in ym.cells.iter().enumerate() {
            let fine_cells = fine.fine_cells_in(&coarse, c).unwrap();
            let mut mean_rho = 0.0;
            let mut count = 0.0;
            for snap in &rf.snapshots {
                for &f in &fine_cells {
                    mean_rho += snap.rho[f];
                    count += 1.0;
                }
            }
            mean_rho /= count;
            assert_relative_eq!(cell.barycenter().rho, mean_rho, max_relative = 1e-12);
        }

        // window with no output times
        let narrow = TimeWindow::new(0.1, 0.2).unwrap();
        assert!(empirical_young(&cf, &coarse, narrow).is_err());

        // coarse grid that does not divide the fine one
        let bad = Grid::line(7, 0.0, 1.0, BoundaryMode::BoundedDomain).unwrap();
        assert!(matches!(
            empirical_young(&cf, &bad, window),
            Err(Error::GridMismatch(_))
        ));

        // isentropic fields lack entropy data for the full sampler
        let n = fine.cell_count();
        let iso = SpaceTimeField::new(
            fine.clone(),
            vec![0.0, 1.0],
            vec![
                Snapshot::new(fine.clone(), vec![1.0; n], vec![Vec2::ZERO; n], None).unwrap(),
                Snapshot::new(fine.clone(), vec![1.0; n], vec![Vec2::ZERO; n], None).unwrap(),
            ],
            None,
            0,
        )
        .unwrap();
        assert!(matches!(
            empirical_young(&iso, &coarse, window),
            Err(Error::NotApplicable(..))
        ));
        let ym = empirical_young_isentropic(&iso, &coarse, window).unwrap();
        assert_eq!(ym.cells[0].atoms.len(), 1);
        assert_eq!(ym.cells[0].atoms[0].rho, 1.0);
    }
}
