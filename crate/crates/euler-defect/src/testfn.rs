//! Compactly supported test functions, batteries, and cutoff families.
//!
//! Space and time factors are separable quartic bumps
//! `b(u) = (1 - u^2)^2` on `|u| <= 1`: C^1, compact support, closed-form
//! gradients. Weak pairings evaluate with the midpoint rule in space and
//! the trapezoid rule in time; no adaptive quadrature anywhere, so every
//! number is reproducible bit for bit.

use crate::algebra::{SymMat2, Vec2};
use crate::grid::{Grid, Snapshot, SpaceTimeField};
use crate::{Error, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// max |b'| = 8 / (3 sqrt 3), attained at u = 1/sqrt 3.
pub const BUMP_DERIV_SUP: f64 = 1.539600717839002;

#[inline]
fn profile(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        let w = 1.0 - u * u;
        w * w
    }
}

#[inline]
fn profile_deriv(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        -4.0 * u * (1.0 - u * u)
    }
}

/// Separable spatial bump `prod_i b((x_i - c_i) / r_i)`, value 1 at the
/// center.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bump {
    pub center: Vec2,
    pub radius: Vec2,
    pub dim: usize,
}

impl Bump {
    pub fn new(dim: usize, center: Vec2, radius: Vec2) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::GridMismatch(format!("bump dim {dim}")));
        }
        let ok = radius.x > 0.0 && (dim == 1 || radius.y > 0.0);
        if !ok || !center.is_finite() || !radius.is_finite() {
            return Err(Error::InvalidState(format!(
                "bump with center {center:?}, radius {radius:?}"
            )));
        }
        Ok(Bump {
            center,
            radius,
            dim,
        })
    }

    pub fn value(&self, x: Vec2) -> f64 {
        let mut v = profile((x.x - self.center.x) / self.radius.x);
        if self.dim == 2 {
            v *= profile((x.y - self.center.y) / self.radius.y);
        }
        v
    }

    pub fn gradient(&self, x: Vec2) -> Vec2 {
        let ux = (x.x - self.center.x) / self.radius.x;
        if self.dim == 1 {
            return Vec2::new(profile_deriv(ux) / self.radius.x, 0.0);
        }
        let uy = (x.y - self.center.y) / self.radius.y;
        Vec2::new(
            profile_deriv(ux) / self.radius.x * profile(uy),
            profile(ux) * profile_deriv(uy) / self.radius.y,
        )
    }

    /// Support box is `center +- radius` per axis.
    pub fn supported_inside(&self, lo: [f64; 2], hi: [f64; 2]) -> bool {
        let mut ok =
            self.center.x - self.radius.x >= lo[0] && self.center.x + self.radius.x <= hi[0];
        if self.dim == 2 {
            ok = ok
                && self.center.y - self.radius.y >= lo[1]
                && self.center.y + self.radius.y <= hi[1];
        }
        ok
    }

    /// Documented upper bound for sup |grad|.
    pub fn gradient_bound(&self) -> f64 {
        let gx = BUMP_DERIV_SUP / self.radius.x;
        if self.dim == 1 {
            gx
        } else {
            let gy = BUMP_DERIV_SUP / self.radius.y;
            (gx * gx + gy * gy).sqrt()
        }
    }
}

/// Quartic bump in time, compactly supported in (0, T).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeBump {
    pub center: f64,
    pub radius: f64,
}

impl TimeBump {
    pub fn new(center: f64, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !center.is_finite() {
            return Err(Error::InvalidState(format!(
                "time bump center {center}, radius {radius}"
            )));
        }
        Ok(TimeBump { center, radius })
    }

    pub fn value(&self, t: f64) -> f64 {
        profile((t - self.center) / self.radius)
    }

    pub fn deriv(&self, t: f64) -> f64 {
        profile_deriv((t - self.center) / self.radius) / self.radius
    }

    /// Closed form of the time integral: 16 r / 15.
    pub fn integral(&self) -> f64 {
        16.0 * self.radius / 15.0
    }

    pub fn supported_inside(&self, t0: f64, t1: f64) -> bool {
        self.center - self.radius >= t0 && self.center + self.radius <= t1
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TestFunctionKind {
    Scalar,
    /// phi(x) = direction * bump(x), direction a unit vector.
    Vector(Vec2),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TestFunction {
    pub time: TimeBump,
    pub space: Bump,
    pub kind: TestFunctionKind,
}

impl TestFunction {
    pub fn direction(&self) -> Result<Vec2> {
        match self.kind {
            TestFunctionKind::Vector(d) => Ok(d),
            TestFunctionKind::Scalar => {
                Err(Error::NotApplicable("direction", "scalar test function"))
            }
        }
    }

    /// div(direction * bump) at x.
    pub fn divergence(&self, x: Vec2) -> Result<f64> {
        Ok(self.direction()?.dot(self.space.gradient(x)))
    }

    /// sup |phi| + sup |grad phi| (documented bound, not a sample max).
    pub fn c1_norm(&self) -> f64 {
        1.0 + self.space.gradient_bound()
    }

    /// The support must sit inside (0, tau) x inner box.
    pub fn check_support(&self, grid: &Grid, tau: f64) -> Result<()> {
        if !self.time.supported_inside(0.0, tau)
            || !self
                .space
                .supported_inside(grid.inner_lo(), grid.inner_hi())
        {
            return Err(Error::SupportViolation);
        }
        Ok(())
    }
}

/// Builds a scalar space-time bump.
pub fn make_bump(
    grid: &Grid,
    t_final: f64,
    center: Vec2,
    radius: Vec2,
    t_center: f64,
    t_radius: f64,
) -> Result<TestFunction> {
    let tf = TestFunction {
        time: TimeBump::new(t_center, t_radius)?,
        space: Bump::new(grid.dim, center, radius)?,
        kind: TestFunctionKind::Scalar,
    };
    tf.check_support(grid, t_final)?;
    Ok(tf)
}

/// A reproducible family of test functions. The same (grid, t_final,
/// counts, seed) always yields bit-identical parameters.
#[derive(Clone, Debug)]
pub struct Battery {
    pub members: Vec<TestFunction>,
    pub seed: u64,
    /// max over members of the documented C1 norm bound.
    pub c1_norm: f64,
}

impl Battery {
    pub fn scalars(&self) -> impl Iterator<Item = &TestFunction> {
        self.members
            .iter()
            .filter(|tf| matches!(tf.kind, TestFunctionKind::Scalar))
    }

    pub fn vectors(&self) -> impl Iterator<Item = &TestFunction> {
        self.members
            .iter()
            .filter(|tf| matches!(tf.kind, TestFunctionKind::Vector(_)))
    }
}

/// Seeded pseudo-random battery: `scalar_count` scalar bumps followed by
/// `vector_count` vector bumps, centers and radii inside the inner box,
/// time bumps inside (0, t_final).
pub fn make_battery(
    grid: &Grid,
    t_final: f64,
    scalar_count: usize,
    vector_count: usize,
    seed: u64,
) -> Result<Battery> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lo = grid.inner_lo();
    let hi = grid.inner_hi();
    let mut members = Vec::with_capacity(scalar_count + vector_count);
    let draw_space = |rng: &mut ChaCha8Rng| -> Result<Bump> {
        let mut center = [0.0; 2];
        let mut radius = [0.0; 2];
        for ax in 0..grid.dim {
            let width = hi[ax] - lo[ax];
            let r = width * rng.gen_range(0.10..0.22);
            radius[ax] = r;
            center[ax] = rng.gen_range((lo[ax] + r)..(hi[ax] - r));
        }
        if grid.dim == 1 {
            radius[1] = 1.0;
        }
        Bump::new(
            grid.dim,
            Vec2::new(center[0], center[1]),
            Vec2::new(radius[0], radius[1]),
        )
    };
    let draw_time = |rng: &mut ChaCha8Rng| -> Result<TimeBump> {
        let r = t_final * rng.gen_range(0.18..0.35);
        let c = rng.gen_range(r..(t_final - r));
        TimeBump::new(c, r)
    };
    for _ in 0..scalar_count {
        members.push(TestFunction {
            time: draw_time(&mut rng)?,
            space: draw_space(&mut rng)?,
            kind: TestFunctionKind::Scalar,
        });
    }
    for _ in 0..vector_count {
        let time = draw_time(&mut rng)?;
        let space = draw_space(&mut rng)?;
        let dir = if grid.dim == 1 {
            Vec2::axis(0)
        } else {
            let angle = rng.gen_range(0.0..std::f64::consts::TAU);
            Vec2::new(angle.cos(), angle.sin())
        };
        members.push(TestFunction {
            time,
            space,
            kind: TestFunctionKind::Vector(dir),
        });
    }
    let c1_norm = members
        .iter()
        .map(TestFunction::c1_norm)
        .fold(1.0, f64::max);
    Ok(Battery {
        members,
        seed,
        c1_norm,
    })
}

/// Deterministic structured battery of 64 vector bumps for divergence
/// probes: a lattice of centers covering the inner box, two radii per
/// center, axis directions. No randomness: the layout is part of the
/// diagnostic's definition.
pub fn divergence_battery(grid: &Grid, t_final: f64) -> Result<Battery> {
    let lo = grid.inner_lo();
    let hi = grid.inner_hi();
    let width = hi[0] - lo[0];
    let mut members = Vec::with_capacity(64);
    let time = TimeBump::new(0.5 * t_final, 0.4 * t_final)?;
    let radii = [0.10 * width, 0.20 * width];
    if grid.dim == 1 {
        // 32 centers x 2 radii, direction e1.
        for i in 0..32 {
            for &r in &radii {
                let margin = r * 1.0001;
                let c = lo[0] + margin + (width - 2.0 * margin) * i as f64 / 31.0;
                members.push(TestFunction {
                    time,
                    space: Bump::new(1, Vec2::new(c, 0.0), Vec2::new(r, 1.0))?,
                    kind: TestFunctionKind::Vector(Vec2::axis(0)),
                });
            }
        }
    } else {
        // 4 x 4 centers x 2 radii x 2 axis directions.
        for iy in 0..4 {
            for ix in 0..4 {
                for &r in &radii {
                    for ax in 0..2 {
                        let margin = r * 1.0001;
                        let cx = lo[0] + margin + (hi[0] - lo[0] - 2.0 * margin) * ix as f64 / 3.0;
                        let cy = lo[1] + margin + (hi[1] - lo[1] - 2.0 * margin) * iy as f64 / 3.0;
                        members.push(TestFunction {
                            time,
                            space: Bump::new(2, Vec2::new(cx, cy), Vec2::new(r, r))?,
                            kind: TestFunctionKind::Vector(Vec2::axis(ax)),
                        });
                    }
                }
            }
        }
    }
    debug_assert_eq!(members.len(), 64);
    let c1_norm = members
        .iter()
        .map(TestFunction::c1_norm)
        .fold(1.0, f64::max);
    Ok(Battery {
        members,
        seed: 0,
        c1_norm,
    })
}

/// Direction battery for PSD checks: the axis vectors plus `extra`
/// seeded random unit vectors.
pub fn xi_battery(dim: usize, extra: usize, seed: u64) -> Vec<Vec2> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out: Vec<Vec2> = (0..dim).map(Vec2::axis).collect();
    for _ in 0..extra {
        if dim == 1 {
            out.push(Vec2::new(if rng.gen::<bool>() { 1.0 } else { -1.0 }, 0.0));
        } else {
            let angle = rng.gen_range(0.0..std::f64::consts::TAU);
            out.push(Vec2::new(angle.cos(), angle.sin()));
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Cutoff families
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CutoffMode {
    /// 1 on |x| <= n, smoothstep down on n <= |x| <= 2n, 0 beyond.
    WholeSpace,
    /// 0 within 1/(2n) of the boundary, smoothstep up across the layer,
    /// 1 where dist > 1/n. Geometry is the grid's box.
    BoundaryLayer,
}

#[derive(Clone, Debug)]
pub struct CutoffFamily {
    pub mode: CutoffMode,
    pub n: f64,
    /// Box geometry for the boundary-layer distance.
    pub lo: [f64; 2],
    pub hi: [f64; 2],
    pub dim: usize,
}

#[inline]
fn smoothstep(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else if s >= 1.0 {
        1.0
    } else {
        s * s * (3.0 - 2.0 * s)
    }
}

#[inline]
fn smoothstep_deriv(s: f64) -> f64 {
    if s <= 0.0 || s >= 1.0 {
        0.0
    } else {
        6.0 * s * (1.0 - s)
    }
}

impl CutoffFamily {
    pub fn new(mode: CutoffMode, n: f64, grid: &Grid) -> Result<Self> {
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::InvalidState(format!("cutoff scale n = {n}")));
        }
        Ok(CutoffFamily {
            mode,
            n,
            lo: grid.lo,
            hi: grid.hi,
            dim: grid.dim,
        })
    }

    fn boundary_distance(&self, x: Vec2) -> f64 {
        let mut d = (x.x - self.lo[0]).min(self.hi[0] - x.x);
        if self.dim == 2 {
            d = d.min(x.y - self.lo[1]).min(self.hi[1] - x.y);
        }
        d
    }

    /// Outward-normal direction of the nearest face (a.e. defined).
    fn boundary_distance_gradient(&self, x: Vec2) -> Vec2 {
        let mut best = x.x - self.lo[0];
        let mut grad = Vec2::new(1.0, 0.0);
        if self.hi[0] - x.x < best {
            best = self.hi[0] - x.x;
            grad = Vec2::new(-1.0, 0.0);
        }
        if self.dim == 2 {
            if x.y - self.lo[1] < best {
                best = x.y - self.lo[1];
                grad = Vec2::new(0.0, 1.0);
            }
            if self.hi[1] - x.y < best {
                grad = Vec2::new(0.0, -1.0);
            }
        }
        grad
    }

    pub fn value(&self, x: Vec2) -> f64 {
        match self.mode {
            CutoffMode::WholeSpace => {
                let r = if self.dim == 1 { x.x.abs() } else { x.norm() };
                1.0 - smoothstep((r - self.n) / self.n)
            }
            CutoffMode::BoundaryLayer => {
                let d = self.boundary_distance(x);
                smoothstep(2.0 * self.n * d - 1.0)
            }
        }
    }

    pub fn gradient(&self, x: Vec2) -> Vec2 {
        match self.mode {
            CutoffMode::WholeSpace => {
                let r = if self.dim == 1 { x.x.abs() } else { x.norm() };
                let ds = smoothstep_deriv((r - self.n) / self.n) / self.n;
                if ds == 0.0 || r == 0.0 {
                    return Vec2::ZERO;
                }
                let dir = if self.dim == 1 {
                    Vec2::new(x.x.signum(), 0.0)
                } else {
                    x.scale(1.0 / r)
                };
                dir.scale(-ds)
            }
            CutoffMode::BoundaryLayer => {
                let d = self.boundary_distance(x);
                let ds = smoothstep_deriv(2.0 * self.n * d - 1.0) * 2.0 * self.n;
                if ds == 0.0 {
                    return Vec2::ZERO;
                }
                self.boundary_distance_gradient(x).scale(ds)
            }
        }
    }

    /// Measures sup |grad psi| over the grid's cell centers and returns
    /// it in the family's natural scaling: `sup * n` for whole-space
    /// families, `sup / n` for boundary layers. The contract is <= 4.
    pub fn measured_gradient_scaling(&self, grid: &Grid) -> f64 {
        let mut sup: f64 = 0.0;
        for idx in 0..grid.cell_count() {
            sup = sup.max(self.gradient(grid.center(idx)).norm());
        }
        match self.mode {
            CutoffMode::WholeSpace => sup * self.n,
            CutoffMode::BoundaryLayer => sup / self.n,
        }
    }
}

// ---------------------------------------------------------------------------
// Weak pairings
// ---------------------------------------------------------------------------

/// Test-function samples handed to weak-form integrands.
#[derive(Clone, Copy, Debug)]
pub struct TfSample {
    pub psi: f64,
    pub dpsi: f64,
    pub phi: f64,
    pub grad_phi: Vec2,
}

/// Midpoint-in-space, trapezoid-in-time evaluation of
/// `sum_cells f(snapshot, cell, sample)` over the test function's
/// support, times cell volume and trapezoid weights. The support must be
/// compact in (0, tau) x inner box.
pub fn weak_form_integral(
    field: &SpaceTimeField,
    tf: &TestFunction,
    tau: f64,
    mut f: impl FnMut(&Snapshot, usize, TfSample) -> f64,
) -> Result<f64> {
    weak_form_integral_pair(field, tf, tau, |snap, idx, s| (f(snap, idx, s), 0.0))
        .map(|(v, _)| v)
}

/// Like [`weak_form_integral`] but the integrand returns two components
/// accumulated under the same quadrature weights. Residual code uses the
/// second slot for the gross magnitude sum |term| that scales verdict
/// tolerances.
pub fn weak_form_integral_pair(
    field: &SpaceTimeField,
    tf: &TestFunction,
    tau: f64,
    mut f: impl FnMut(&Snapshot, usize, TfSample) -> (f64, f64),
) -> Result<(f64, f64)> {
    tf.check_support(&field.grid, tau)?;
    let grid = &field.grid;
    let vol = grid.cell_volume();
    // Cells intersecting the support box.
    let h = grid.h();
    let cell_range = |lo_x: f64, hi_x: f64, ax: usize| -> (usize, usize) {
        let i0 = ((lo_x - grid.lo[ax]) / h).floor().max(0.0) as usize;
        let i1 = (((hi_x - grid.lo[ax]) / h).ceil() as usize).min(grid.cells[ax]);
        (i0.min(grid.cells[ax]), i1)
    };
    let (x0, x1) = cell_range(
        tf.space.center.x - tf.space.radius.x,
        tf.space.center.x + tf.space.radius.x,
        0,
    );
    let (y0, y1) = if grid.dim == 2 {
        cell_range(
            tf.space.center.y - tf.space.radius.y,
            tf.space.center.y + tf.space.radius.y,
            1,
        )
    } else {
        (0, 1)
    };
    let mut acc = 0.0;
    let mut acc_second = 0.0;
    for (k, w) in field.time_weights(0.0, tau)? {
        let t = field.times[k];
        let psi = tf.time.value(t);
        let dpsi = tf.time.deriv(t);
        if psi == 0.0 && dpsi == 0.0 {
            continue;
        }
        let snap = &field.snapshots[k];
        let mut slice = 0.0;
        let mut slice_second = 0.0;
        for iy in y0..y1 {
            for ix in x0..x1 {
                let idx = grid.index(ix, iy);
                let x = grid.center(idx);
                let phi = tf.space.value(x);
                let grad_phi = tf.space.gradient(x);
                if phi == 0.0 && grad_phi == Vec2::ZERO {
                    continue;
                }
                let (v, u) = f(
                    snap,
                    idx,
                    TfSample {
                        psi,
                        dpsi,
                        phi,
                        grad_phi,
                    },
                );
                if v.is_nan() || u.is_nan() {
                    return Err(Error::Nan("weak-form integrand"));
                }
                slice += v;
                slice_second += u;
            }
        }
        acc += w * vol * slice;
        acc_second += w * vol * slice_second;
    }
    Ok((acc, acc_second))
}

/// Contraction rules for [`weak_pairing`]. The closures sample the field
/// at (snapshot, cell).
pub enum Contraction<'a> {
    /// integral of f * dpsi/dt * phi
    ScalarTimeDerivative(&'a dyn Fn(&Snapshot, usize) -> f64),
    /// integral of F . (psi grad phi), scalar test functions
    VectorGradient(&'a dyn Fn(&Snapshot, usize) -> Vec2),
    /// integral of M : psi (dir (x) grad phi), vector test functions
    MatrixGradient(&'a dyn Fn(&Snapshot, usize) -> SymMat2),
    /// integral of f * psi * div(dir phi), vector test functions
    ScalarDivergence(&'a dyn Fn(&Snapshot, usize) -> f64),
}

/// Spec-level pairing of a discrete field against a test function under
/// a contraction rule.
pub fn weak_pairing(
    field: &SpaceTimeField,
    tf: &TestFunction,
    rule: Contraction<'_>,
    tau: f64,
) -> Result<f64> {
    match rule {
        Contraction::ScalarTimeDerivative(f) => {
            weak_form_integral(field, tf, tau, |snap, idx, s| f(snap, idx) * s.dpsi * s.phi)
        }
        Contraction::VectorGradient(f) => weak_form_integral(field, tf, tau, |snap, idx, s| {
            f(snap, idx).dot(s.grad_phi) * s.psi
        }),
        Contraction::MatrixGradient(f) => {
            let dir = tf.direction()?;
            weak_form_integral(field, tf, tau, |snap, idx, s| {
                f(snap, idx).contract_dyad(dir, s.grad_phi) * s.psi
            })
        }
        Contraction::ScalarDivergence(f) => {
            let dir = tf.direction()?;
            weak_form_integral(field, tf, tau, |snap, idx, s| {
                f(snap, idx) * dir.dot(s.grad_phi) * s.psi
            })
        }
    }
}
