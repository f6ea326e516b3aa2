//! Phase-space points.
//!
//! Bregman divergences, convexity probes and Young measures are generic
//! over the point type: full states (rho, m, S), isentropic states
//! (rho, m), or plain scalars for synthetic probes. A point exposes its
//! coordinates as a fixed-width array (unused tail entries zero), which
//! is enough for the linear operations those consumers need.

pub trait Phase: Copy + std::fmt::Debug {
    /// Number of active coordinates (<= 4).
    const COORDS: usize;

    fn coords(&self) -> [f64; 4];
    fn from_coords(c: [f64; 4]) -> Self;

    fn add_scaled(&self, w: f64, other: &Self, w_other: f64) -> Self {
        let a = self.coords();
        let b = other.coords();
        let mut out = [0.0; 4];
        for i in 0..4 {
            out[i] = w * a[i] + w_other * b[i];
        }
        Self::from_coords(out)
    }

    fn midpoint(&self, other: &Self) -> Self {
        self.add_scaled(0.5, other, 0.5)
    }

    /// Euclidean pairing of coordinates; used for subgradient terms.
    fn dot_coords(&self, cov: &[f64; 4]) -> f64 {
        let a = self.coords();
        (0..4).map(|i| a[i] * cov[i]).sum()
    }

    fn dist(&self, other: &Self) -> f64 {
        let a = self.coords();
        let b = other.coords();
        (0..4).map(|i| (a[i] - b[i]).powi(2)).sum::<f64>().sqrt()
    }

    /// Magnitude scale for relative tolerances: max |coordinate|, floored
    /// at 1 so tolerances stay meaningful near the origin.
    fn magnitude(&self) -> f64 {
        let a = self.coords();
        a.iter().fold(1.0f64, |m, v| m.max(v.abs()))
    }

    fn is_finite_point(&self) -> bool {
        self.coords().iter().all(|v| v.is_finite())
    }
}

impl Phase for f64 {
    const COORDS: usize = 1;

    fn coords(&self) -> [f64; 4] {
        [*self, 0.0, 0.0, 0.0]
    }

    fn from_coords(c: [f64; 4]) -> Self {
        c[0]
    }
}
