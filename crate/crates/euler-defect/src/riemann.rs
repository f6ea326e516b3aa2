//! Exact Riemann solver for 1D isentropic Euler with p = a rho^gamma.
//!
//! Wave curves in the (rho, u) plane: a k-wave connecting to state K is a
//! rarefaction for rho <= rho_K (Riemann invariant held constant) and a
//! shock for rho > rho_K (Rankine-Hugoniot with the Lax entropy
//! condition). The middle density is the root of a strictly increasing
//! function, so plain bisection converges unconditionally; we run it to
//! machine fixed point rather than an iteration cap.

use crate::algebra::Vec2;
use crate::eos::{GasParameters, IsentropicState};
use crate::grid::{Grid, Snapshot};
use crate::{Error, Result};

/// One side of the jump: density and velocity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RiemannSide {
    pub rho: f64,
    pub u: f64,
}

impl RiemannSide {
    pub fn new(rho: f64, u: f64) -> Result<Self> {
        if !(rho > 0.0) || !rho.is_finite() || !u.is_finite() {
            return Err(Error::InvalidState(format!(
                "Riemann data rho = {rho}, u = {u}"
            )));
        }
        Ok(RiemannSide { rho, u })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Wave {
    Shock {
        speed: f64,
    },
    /// Fan between the head and tail characteristics. For a 1-wave
    /// head < tail; for a 2-wave tail < head in absolute position but we
    /// store (head, tail) as (slower edge, faster edge) in xi = x/t.
    Rarefaction {
        head: f64,
        tail: f64,
    },
}

/// Exact solution structure of the Riemann problem.
#[derive(Clone, Copy, Debug)]
pub struct RiemannSolution {
    pub left: RiemannSide,
    pub right: RiemannSide,
    pub gas: GasParameters,
    pub rho_star: f64,
    pub u_star: f64,
    pub wave1: Wave,
    pub wave2: Wave,
}

fn sound_speed(rho: f64, gas: &GasParameters) -> f64 {
    (gas.a * gas.gamma * rho.powf(gas.gamma - 1.0)).sqrt()
}

fn pressure(rho: f64, gas: &GasParameters) -> f64 {
    gas.a * rho.powf(gas.gamma)
}

/// Wave-curve function: velocity drop across a k-wave from state K down
/// to density rho. Rarefaction branch for rho <= rho_K, shock branch
/// above. Strictly increasing in rho, zero at rho_K.
fn wave_curve(rho: f64, side: &RiemannSide, gas: &GasParameters) -> f64 {
    if rho <= side.rho {
        2.0 / (gas.gamma - 1.0) * (sound_speed(rho, gas) - sound_speed(side.rho, gas))
    } else {
        let dp = pressure(rho, gas) - pressure(side.rho, gas);
        (dp * (rho - side.rho) / (rho * side.rho)).sqrt()
    }
}

/// Solves the Riemann problem exactly. Errors with a vacuum diagnosis
/// when the rarefactions separate, and rejects gamma outside (1, 3].
pub fn solve_riemann(
    left: RiemannSide,
    right: RiemannSide,
    gas: &GasParameters,
) -> Result<RiemannSolution> {
    if !(gas.gamma > 1.0 && gas.gamma <= 3.0) {
        return Err(Error::UnsupportedGamma(gas.gamma));
    }
    let cl = sound_speed(left.rho, gas);
    let cr = sound_speed(right.rho, gas);
    if right.u - left.u >= 2.0 / (gas.gamma - 1.0) * (cl + cr) {
        return Err(Error::VacuumRiemann);
    }
    // phi(rho) = f(rho; L) + f(rho; R) + u_r - u_l is strictly
    // increasing with phi(0+) < 0, so one sign change exists.
    let phi =
        |rho: f64| wave_curve(rho, &left, gas) + wave_curve(rho, &right, gas) + right.u - left.u;
    let mut lo = 1e-300;
    let mut hi = left.rho.max(right.rho);
    while phi(hi) < 0.0 {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::Nan("Riemann bracket"));
        }
    }
    // Bisection to the floating-point fixed point: stop when the
    // midpoint stops moving.
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if phi(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let rho_star = 0.5 * (lo + hi);
    let u_star = left.u - wave_curve(rho_star, &left, gas);
    let c_star = sound_speed(rho_star, gas);
    let wave1 = if rho_star > left.rho {
        Wave::Shock {
            speed: (rho_star * u_star - left.rho * left.u) / (rho_star - left.rho),
        }
    } else {
        Wave::Rarefaction {
            head: left.u - cl,
            tail: u_star - c_star,
        }
    };
    let wave2 = if rho_star > right.rho {
        Wave::Shock {
            speed: (rho_star * u_star - right.rho * right.u) / (rho_star - right.rho),
        }
    } else {
        Wave::Rarefaction {
            head: right.u + cr,
            tail: u_star + c_star,
        }
    };
    Ok(RiemannSolution {
        left,
        right,
        gas: *gas,
        rho_star,
        u_star,
        wave1,
        wave2,
    })
}

impl RiemannSolution {
    /// Self-similar evaluation at xi = x / t, t > 0.
    pub fn sample(&self, xi: f64) -> IsentropicState {
        let g = self.gas.gamma;
        let (left_edge, inside_1) = match self.wave1 {
            Wave::Shock { speed } => (speed, None),
            Wave::Rarefaction { head, tail } => (head, Some(tail)),
        };
        if xi <= left_edge {
            return state_of(self.left);
        }
        if let Some(tail) = inside_1 {
            if xi < tail {
                // 1-fan: u - c = xi with u - 2c/(g-1) constant from L.
                let cl = sound_speed(self.left.rho, &self.gas);
                let c = (g - 1.0) / (g + 1.0) * (self.left.u - xi) + 2.0 * cl / (g + 1.0);
                let u = xi + c;
                return state_of(RiemannSide {
                    rho: density_of_sound_speed(c, &self.gas),
                    u,
                });
            }
        }
        let (right_edge, inside_2) = match self.wave2 {
            Wave::Shock { speed } => (speed, None),
            Wave::Rarefaction { head, tail } => (head, Some(tail)),
        };
        if xi >= right_edge {
            return state_of(self.right);
        }
        if let Some(tail) = inside_2 {
            if xi > tail {
                // 2-fan: u + c = xi with u + 2c/(g-1) constant from R.
                let cr = sound_speed(self.right.rho, &self.gas);
                let c = (g - 1.0) / (g + 1.0) * (xi - self.right.u) + 2.0 * cr / (g + 1.0);
                let u = xi - c;
                return state_of(RiemannSide {
                    rho: density_of_sound_speed(c, &self.gas),
                    u,
                });
            }
        }
        state_of(RiemannSide {
            rho: self.rho_star,
            u: self.u_star,
        })
    }

    /// Cell averages by midpoint sampling of the self-similar solution
    /// at time t on the given 1D grid (jump at x = x0).
    pub fn sample_snapshot(&self, grid: &Grid, x0: f64, t: f64) -> Result<Snapshot> {
        if grid.dim != 1 {
            return Err(Error::GridMismatch("Riemann sampling needs d = 1".into()));
        }
        let n = grid.cell_count();
        let mut rho = Vec::with_capacity(n);
        let mut m = Vec::with_capacity(n);
        for idx in 0..n {
            let x = grid.center(idx).x;
            let st = if t > 0.0 {
                self.sample((x - x0) / t)
            } else if x < x0 {
                state_of(self.left)
            } else {
                state_of(self.right)
            };
            rho.push(st.rho);
            m.push(st.m);
        }
        Snapshot::new(grid.clone(), rho, m, None)
    }

    /// Largest characteristic speed magnitude of the solution fan.
    pub fn max_wave_speed(&self) -> f64 {
        let edge = |w: &Wave| match *w {
            Wave::Shock { speed } => speed.abs(),
            Wave::Rarefaction { head, tail } => head.abs().max(tail.abs()),
        };
        edge(&self.wave1).max(edge(&self.wave2))
    }

    /// Rankine-Hugoniot residuals (mass, momentum) for each shock wave,
    /// and Lax inequality margins. Used by admissibility tests.
    pub fn shock_report(&self) -> Vec<ShockCheck> {
        let mut out = Vec::new();
        let star = RiemannSide {
            rho: self.rho_star,
            u: self.u_star,
        };
        if let Wave::Shock { speed } = self.wave1 {
            out.push(shock_check(1, speed, self.left, star, &self.gas));
        }
        if let Wave::Shock { speed } = self.wave2 {
            out.push(shock_check(2, speed, star, self.right, &self.gas));
        }
        out
    }
}

fn density_of_sound_speed(c: f64, gas: &GasParameters) -> f64 {
    (c * c / (gas.a * gas.gamma)).powf(1.0 / (gas.gamma - 1.0))
}

fn state_of(side: RiemannSide) -> IsentropicState {
    IsentropicState::new(side.rho, Vec2::new(side.rho * side.u, 0.0))
}

/// Rankine-Hugoniot and Lax diagnostics for one shock.
#[derive(Clone, Copy, Debug)]
pub struct ShockCheck {
    pub family: u8,
    pub speed: f64,
    /// |s [rho] - [m]|
    pub rh_mass: f64,
    /// |s [m] - [m^2/rho + p]|
    pub rh_momentum: f64,
    /// Lax condition lambda_k(ahead) > s > lambda_k(behind), as margins
    /// (positive means satisfied).
    pub lax_ahead: f64,
    pub lax_behind: f64,
}

impl ShockCheck {
    pub fn lax_satisfied(&self) -> bool {
        self.lax_ahead > 0.0 && self.lax_behind > 0.0
    }
}

fn shock_check(
    family: u8,
    speed: f64,
    ahead_up: RiemannSide,
    behind_down: RiemannSide,
    gas: &GasParameters,
) -> ShockCheck {
    // For the 1-wave the pre-shock state is the left one; for the
    // 2-wave it is the right one. Callers pass (upstream, downstream)
    // in x-order; RH residuals are orientation-free.
    let (a, b) = (ahead_up, behind_down);
    let rh_mass = (speed * (b.rho - a.rho) - (b.rho * b.u - a.rho * a.u)).abs();
    let flux = |s: RiemannSide| s.rho * s.u * s.u + pressure(s.rho, gas);
    let rh_momentum = (speed * (b.rho * b.u - a.rho * a.u) - (flux(b) - flux(a))).abs();
    let lam = |s: RiemannSide| {
        let c = sound_speed(s.rho, gas);
        if family == 1 {
            s.u - c
        } else {
            s.u + c
        }
    };
    // family 1: lambda_1(L) > s > lambda_1(*); family 2:
    // lambda_2(*) > s > lambda_2(R). Callers pass the states so that
    // (a, b) is always (larger-lambda side, smaller-lambda side).
    let (lax_ahead, lax_behind) = (lam(a) - speed, speed - lam(b));
    ShockCheck {
        family,
        speed,
        rh_mass,
        rh_momentum,
        lax_ahead,
        lax_behind,
    }
}
