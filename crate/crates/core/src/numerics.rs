//! Small numerical helpers shared by the energy, solver and imaging code.

/// Deterministic pairwise (cascade) summation.
///
/// The tree shape depends only on the slice length, so any two callers
/// that present the same values in the same order get bit-identical sums.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if values.len() <= LEAF {
        let mut s = 0.0;
        for v in values {
            s += v;
        }
        return s;
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Symmetric 2x2 matrix stored as (s11, s12, s22).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Sym2 {
    pub s11: f64,
    pub s12: f64,
    pub s22: f64,
}

impl Sym2 {
    pub const IDENTITY: Sym2 = Sym2 { s11: 1.0, s12: 0.0, s22: 1.0 };

    pub fn new(s11: f64, s12: f64, s22: f64) -> Self {
        Sym2 { s11, s12, s22 }
    }

    pub fn diag(d1: f64, d2: f64) -> Self {
        Sym2 { s11: d1, s12: 0.0, s22: d2 }
    }

    pub fn scaled(&self, t: f64) -> Self {
        Sym2 { s11: self.s11 * t, s12: self.s12 * t, s22: self.s22 * t }
    }

    #[inline]
    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [self.s11 * v[0] + self.s12 * v[1], self.s12 * v[0] + self.s22 * v[1]]
    }

    #[inline]
    pub fn quad(&self, v: [f64; 2]) -> f64 {
        self.s11 * v[0] * v[0] + 2.0 * self.s12 * v[0] * v[1] + self.s22 * v[1] * v[1]
    }

    pub fn det(&self) -> f64 {
        self.s11 * self.s22 - self.s12 * self.s12
    }

    pub fn inverse(&self) -> Option<Sym2> {
        let det = self.det();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        Some(Sym2 { s11: self.s22 / det, s12: -self.s12 / det, s22: self.s11 / det })
    }

    /// Eigen-decomposition: returns `(lambda_max, lambda_min, (c, s))` where
    /// `(c, s)` is the unit eigenvector of `lambda_max`; the other is `(-s, c)`.
    pub fn eigen(&self) -> (f64, f64, (f64, f64)) {
        let half_tr = 0.5 * (self.s11 + self.s22);
        let half_diff = 0.5 * (self.s11 - self.s22);
        let rad = half_diff.hypot(self.s12);
        let l1 = half_tr + rad;
        let l2 = half_tr - rad;
        let theta = if rad == 0.0 { 0.0 } else { 0.5 * (2.0 * self.s12).atan2(2.0 * half_diff) };
        (l1, l2, (theta.cos(), theta.sin()))
    }
}

#[inline]
pub fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub fn norm2(a: [f64; 2]) -> f64 {
    a[0].hypot(a[1])
}
