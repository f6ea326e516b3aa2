//! Small fixed-size vectors and symmetric matrices.
//!
//! Everything runs in d = 1 or d = 2. Vectors carry both components in
//! either case; 1D data keeps the second component identically zero, so
//! dot products and tensor contractions are dimension-agnostic.

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    /// Axis unit vector, `i` in {0, 1}.
    pub fn axis(i: usize) -> Self {
        match i {
            0 => Vec2::new(1.0, 0.0),
            1 => Vec2::new(0.0, 1.0),
            _ => panic!("axis index {i} out of range"),
        }
    }

    /// Component by axis index, `i` in {0, 1}.
    pub fn coord(self, i: usize) -> f64 {
        match i {
            0 => self.x,
            1 => self.y,
            _ => panic!("axis index {i} out of range"),
        }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn scale(self, s: f64) -> Vec2 {
        Vec2::new(s * self.x, s * self.y)
    }

    pub fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }

    pub fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }

    pub fn normalized(self) -> Vec2 {
        let n = self.norm();
        assert!(n > 0.0, "cannot normalize zero vector");
        self.scale(1.0 / n)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Symmetric 2x2 matrix; in 1D only the `xx` entry is active.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SymMat2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl SymMat2 {
    pub const ZERO: SymMat2 = SymMat2 {
        xx: 0.0,
        xy: 0.0,
        yy: 0.0,
    };

    pub fn new(xx: f64, xy: f64, yy: f64) -> Self {
        SymMat2 { xx, xy, yy }
    }

    /// Identity scaled by `s` in the active dimensions.
    pub fn scaled_identity(dim: usize, s: f64) -> Self {
        match dim {
            1 => SymMat2::new(s, 0.0, 0.0),
            2 => SymMat2::new(s, 0.0, s),
            _ => panic!("dim {dim} out of range"),
        }
    }

    /// v (x) v
    pub fn outer(v: Vec2) -> Self {
        SymMat2::new(v.x * v.x, v.x * v.y, v.y * v.y)
    }

    /// a (x) b + b (x) a
    pub fn sym_pair(a: Vec2, b: Vec2) -> Self {
        SymMat2::new(2.0 * a.x * b.x, a.x * b.y + a.y * b.x, 2.0 * a.y * b.y)
    }

    pub fn add(self, o: SymMat2) -> SymMat2 {
        SymMat2::new(self.xx + o.xx, self.xy + o.xy, self.yy + o.yy)
    }

    pub fn sub(self, o: SymMat2) -> SymMat2 {
        SymMat2::new(self.xx - o.xx, self.xy - o.xy, self.yy - o.yy)
    }

    pub fn scale(self, s: f64) -> SymMat2 {
        SymMat2::new(s * self.xx, s * self.xy, s * self.yy)
    }

    pub fn trace(self, dim: usize) -> f64 {
        match dim {
            1 => self.xx,
            2 => self.xx + self.yy,
            _ => panic!("dim {dim} out of range"),
        }
    }

    pub fn apply(self, v: Vec2) -> Vec2 {
        Vec2::new(self.xx * v.x + self.xy * v.y, self.xy * v.x + self.yy * v.y)
    }

    /// xi^T M xi
    pub fn quad_form(self, xi: Vec2) -> f64 {
        xi.dot(self.apply(xi))
    }

    /// Frobenius contraction with a (generally nonsymmetric) dyad
    /// `a (x) b`, i.e. sum_ij a_i b_j M_ij. Exact for symmetric M.
    pub fn contract_dyad(self, a: Vec2, b: Vec2) -> f64 {
        a.dot(self.apply(b))
    }

    /// Eigenvalues in increasing order (closed form). In 1D the active
    /// block is 1x1 and both returns equal `xx`.
    pub fn eigenvalues(self, dim: usize) -> (f64, f64) {
        match dim {
            1 => (self.xx, self.xx),
            2 => {
                let mean = 0.5 * (self.xx + self.yy);
                let det = self.xx * self.yy - self.xy * self.xy;
                let disc = (mean * mean - det).max(0.0).sqrt();
                (mean - disc, mean + disc)
            }
            _ => panic!("dim {dim} out of range"),
        }
    }

    pub fn eigen_min(self, dim: usize) -> f64 {
        self.eigenvalues(dim).0
    }

    /// Spectral norm (max |eigenvalue|); used as the cell mass of
    /// matrix-valued measures.
    pub fn op_norm(self, dim: usize) -> f64 {
        let (lo, hi) = self.eigenvalues(dim);
        lo.abs().max(hi.abs())
    }

    pub fn is_finite(self) -> bool {
        self.xx.is_finite() && self.xy.is_finite() && self.yy.is_finite()
    }
}

/// Smallest eigenvalue of a symmetric n x n matrix (n <= 4) by cyclic
/// Jacobi rotations. Used by the numeric-Hessian convexity probes, where
/// n is the phase-space dimension d + 2.
pub fn sym_eigen_min(a: &[[f64; 4]; 4], n: usize) -> f64 {
    assert!((1..=4).contains(&n));
    let mut m = *a;
    // Symmetrize defensively; callers pass finite-difference Hessians.
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[i][j] + m[j][i]);
            m[i][j] = v;
            m[j][i] = v;
        }
    }
    let scale: f64 = (0..n)
        .map(|i| (0..n).map(|j| m[i][j].abs()).fold(0.0, f64::max))
        .fold(0.0, f64::max)
        .max(1e-300);
    for _sweep in 0..64 {
        let mut off = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                off = off.max(m[i][j].abs());
            }
        }
        if off <= 1e-14 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if m[p][q].abs() <= 1e-300 {
                    continue;
                }
                let theta = 0.5 * (m[q][q] - m[p][p]) / m[p][q];
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k][p], m[k][q]);
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p][k], m[q][k]);
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
            }
        }
    }
    (0..n).map(|i| m[i][i]).fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn eigenvalues_closed_form() {
        let m = SymMat2::new(2.0, 1.0, 2.0);
        let (lo, hi) = m.eigenvalues(2);
        assert_relative_eq!(lo, 1.0, max_relative = 1e-14);
        assert_relative_eq!(hi, 3.0, max_relative = 1e-14);
        assert_relative_eq!(m.op_norm(2), 3.0, max_relative = 1e-14);
        let d1 = SymMat2::new(-0.5, 7.0, 9.0);
        assert_eq!(d1.eigen_min(1), -0.5);
    }

    #[test]
    fn contractions() {
        let a = Vec2::new(1.0, 2.0);
        let b = Vec2::new(3.0, -1.0);
        let m = SymMat2::new(1.0, 2.0, -1.0);
        // sum_ij a_i b_j m_ij = a.x b.x xx + (a.x b.y + a.y b.x) xy + a.y b.y yy
        let direct = 3.0 * 1.0 + (1.0 * -1.0 + 2.0 * 3.0) * 2.0 + 2.0 * -1.0 * -1.0;
        assert_relative_eq!(m.contract_dyad(a, b), direct, max_relative = 1e-14);
        assert_relative_eq!(
            m.quad_form(a),
            1.0 + 2.0 * 2.0 * 2.0 - 4.0,
            max_relative = 1e-14
        );
    }

    #[test]
    fn sym_pair_matches_outer_sum() {
        let a = Vec2::new(0.3, -1.2);
        let b = Vec2::new(2.0, 0.7);
        let s = SymMat2::sym_pair(a, b);
        assert_relative_eq!(s.xx, 2.0 * a.x * b.x, max_relative = 1e-14);
        assert_relative_eq!(s.yy, 2.0 * a.y * b.y, max_relative = 1e-14);
        assert_relative_eq!(s.xy, a.x * b.y + a.y * b.x, max_relative = 1e-14);
    }

    #[test]
    fn jacobi_matches_closed_form_2x2() {
        let m2 = SymMat2::new(2.0, 1.0, 2.0);
        let mut a = [[0.0; 4]; 4];
        a[0][0] = m2.xx;
        a[0][1] = m2.xy;
        a[1][0] = m2.xy;
        a[1][1] = m2.yy;
        assert_relative_eq!(sym_eigen_min(&a, 2), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn jacobi_4x4_known_spectrum() {
        // diag(1,2,3,4) conjugated by a permutation stays {1,2,3,4}.
        let a = [
            [4.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 3.0, 0.0],
            [0.0, 0.0, 0.0, 2.0],
        ];
        assert_relative_eq!(sym_eigen_min(&a, 4), 1.0, max_relative = 1e-12);
        // indefinite check
        let b = [
            [0.0, 1.0, 0.0, 0.0],
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 0.5, 0.0],
            [0.0, 0.0, 0.0, 0.5],
        ];
        assert_relative_eq!(sym_eigen_min(&b, 4), -1.0, max_relative = 1e-12);
    }
}
