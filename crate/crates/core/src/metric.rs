//! Spatially varying norms `phi(x, .)`, their duals, and Euclidean projection
//! onto the pointwise dual unit ball `{eta : phi0(x, eta) <= 1}`.
//!
//! Four closed-form families are supported, each scaled by a positive weight
//! `a(x)`:
//!
//! | kind         | `phi(x, xi)`            | `phi0(x, xi)`                 |
//! |--------------|-------------------------|-------------------------------|
//! | isotropic    | `a |xi|`                | `|xi| / a`                    |
//! | riemannian   | `a sqrt(xi' S xi)`      | `sqrt(xi' S^-1 xi) / a`       |
//! | l1           | `a (|xi_1| + |xi_2|)`   | `max(|xi_1|, |xi_2|) / a`     |
//! | linf         | `a max(|xi_1|, |xi_2|)` | `(|xi_1| + |xi_2|) / a`       |

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{DomainMask, GridSpec, ScalarGrid};
use crate::numerics::{dot, norm2, Sym2};

pub const DEFAULT_A_MIN: f64 = 1e-8;
pub const DEFAULT_LAMBDA_MIN: f64 = 1e-10;

const PROJ_TOL: f64 = 1e-12;
const PROJ_MAX_ITERS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    #[serde(rename = "isotropic")]
    IsotropicEuclidean,
    Riemannian,
    #[serde(rename = "l1")]
    CrystallineL1,
    #[serde(rename = "linf")]
    CrystallineLinf,
}

impl NormKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "isotropic" | "euclidean" => Ok(NormKind::IsotropicEuclidean),
            "riemannian" => Ok(NormKind::Riemannian),
            "l1" => Ok(NormKind::CrystallineL1),
            "linf" => Ok(NormKind::CrystallineLinf),
            other => Err(Error::InvalidMetric(format!("unknown norm kind `{other}`"))),
        }
    }

    pub fn is_smooth(self) -> bool {
        matches!(self, NormKind::IsotropicEuclidean | NormKind::Riemannian)
    }

    pub const ALL: [NormKind; 4] =
        [NormKind::IsotropicEuclidean, NormKind::Riemannian, NormKind::CrystallineL1, NormKind::CrystallineLinf];
}

/// The norm family over a grid. Weight and tensor are sampled at cell centers.
#[derive(Debug, Clone)]
pub struct MetricField {
    pub kind: NormKind,
    pub weight: ScalarGrid,
    /// Per-cell SPD tensor; required for `Riemannian`, ignored otherwise.
    pub sigma0: Option<Vec<Sym2>>,
    pub a_min: f64,
    pub lambda_min: f64,
}

impl MetricField {
    pub fn new(kind: NormKind, weight: ScalarGrid, sigma0: Option<Vec<Sym2>>) -> Result<Self> {
        if kind == NormKind::Riemannian {
            match &sigma0 {
                Some(s) if s.len() == weight.grid.len() => {}
                Some(s) => {
                    return Err(Error::Dimension(format!(
                        "tensor field has {} cells, weight has {}",
                        s.len(),
                        weight.grid.len()
                    )))
                }
                None => return Err(Error::InvalidMetric("riemannian metric needs a tensor field".into())),
            }
        }
        Ok(MetricField { kind, weight, sigma0, a_min: DEFAULT_A_MIN, lambda_min: DEFAULT_LAMBDA_MIN })
    }

    /// Spatially constant metric.
    pub fn uniform(kind: NormKind, grid: GridSpec, a: f64, sigma0: Option<Sym2>) -> Result<Self> {
        let tensor = match kind {
            NormKind::Riemannian => Some(vec![sigma0.unwrap_or(Sym2::IDENTITY); grid.len()]),
            _ => None,
        };
        MetricField::new(kind, ScalarGrid::constant(grid, a), tensor)
    }

    pub fn isotropic(weight: ScalarGrid) -> Self {
        MetricField::new(NormKind::IsotropicEuclidean, weight, None).expect("isotropic needs no tensor")
    }

    pub fn grid(&self) -> GridSpec {
        self.weight.grid
    }

    /// Same metric with weight multiplied by `lambda`.
    pub fn with_scaled_weight(&self, lambda: f64) -> Self {
        let mut m = self.clone();
        m.weight = self.weight.map(|a| a * lambda);
        m
    }

    fn check_cell(&self, cell: usize) -> Result<()> {
        if cell >= self.weight.grid.len() {
            Err(Error::Domain(format!("cell {cell} outside grid of {} cells", self.weight.grid.len())))
        } else {
            Ok(())
        }
    }

    /// Closed-form local norm at `cell`, with tensor factorization done once.
    pub fn local(&self, cell: usize) -> Result<LocalNorm> {
        self.check_cell(cell)?;
        let a = self.weight.values[cell];
        Ok(match self.kind {
            NormKind::IsotropicEuclidean => LocalNorm::Iso { a },
            NormKind::CrystallineL1 => LocalNorm::L1 { a },
            NormKind::CrystallineLinf => LocalNorm::Linf { a },
            NormKind::Riemannian => {
                let sigma = self.sigma0.as_ref().expect("checked in constructor")[cell];
                let (l_max, l_min, (c, s)) = sigma.eigen();
                if !(l_min >= self.lambda_min) || !l_max.is_finite() {
                    return Err(Error::InvalidMetric(format!(
                        "tensor at cell {cell} not positive definite (eigenvalues {l_max}, {l_min})"
                    )));
                }
                let inv = sigma.inverse().expect("positive definite");
                LocalNorm::Riem { a, sigma, inv, axes: [l_max, l_min], rot: [c, s] }
            }
        })
    }

    pub fn eval_phi(&self, cell: usize, xi: [f64; 2]) -> Result<f64> {
        Ok(self.local(cell)?.phi(xi))
    }

    pub fn eval_dual(&self, cell: usize, xi: [f64; 2]) -> Result<f64> {
        Ok(self.local(cell)?.dual(xi))
    }

    /// Dual norm by brute force: max of `xi . p / phi(p)` over `n_dirs`
    /// equally spaced unit directions.
    pub fn dual_norm_sampled(&self, cell: usize, xi: [f64; 2], n_dirs: usize) -> Result<f64> {
        let local = self.local(cell)?;
        sampled_sup(xi, n_dirs, |p| local.phi(p))
    }

    /// Norm recovered from the dual by brute force (bipolar `phi00 = phi`).
    pub fn bipolar_sampled(&self, cell: usize, xi: [f64; 2], n_dirs: usize) -> Result<f64> {
        let local = self.local(cell)?;
        sampled_sup(xi, n_dirs, |p| local.dual(p))
    }

    pub fn project_dual_ball(&self, cell: usize, xi: [f64; 2]) -> Result<[f64; 2]> {
        self.local(cell)?.project(xi)
    }

    /// Checks positivity, SPD tensors, homogeneity and the triangle
    /// inequality. Only interior cells are checked when a mask is given.
    pub fn validate(&self, mask: Option<&DomainMask>) -> ValidationReport {
        let mut violations = Vec::new();
        let cells: Vec<usize> = match mask {
            Some(m) => m.interior_cells.clone(),
            None => (0..self.weight.grid.len()).collect(),
        };
        let dirs: Vec<[f64; 2]> = (0..360).map(|k| unit_dir(k, 360)).collect();
        let pairs = sample_pairs();
        let mut alpha: f64 = 0.0;
        for &c in &cells {
            let a = self.weight.values[c];
            if !(a >= self.a_min) || !a.is_finite() {
                violations.push(Violation { cell: c, what: "weight not positive".into(), value: a });
                continue;
            }
            let local = match self.local(c) {
                Ok(l) => l,
                Err(e) => {
                    violations.push(Violation { cell: c, what: format!("tensor not SPD: {e}"), value: f64::NAN });
                    continue;
                }
            };
            for p in &dirs {
                alpha = alpha.max(local.phi(*p));
            }
            for (xi, eta) in &pairs {
                let base = local.phi(*xi);
                for t in [0.0, 0.5, 2.0, 10.0] {
                    let scaled = local.phi([t * xi[0], t * xi[1]]);
                    if (scaled - t * base).abs() > 1e-12 * (1.0 + t * base) {
                        violations.push(Violation { cell: c, what: "homogeneity".into(), value: scaled - t * base });
                    }
                }
                let sum = local.phi([xi[0] + eta[0], xi[1] + eta[1]]);
                let excess = sum - base - local.phi(*eta);
                if excess > 1e-12 * (1.0 + sum) {
                    violations.push(Violation { cell: c, what: "triangle inequality".into(), value: excess });
                }
            }
        }
        ValidationReport { valid: violations.is_empty(), alpha, violations }
    }
}

fn sample_pairs() -> Vec<([f64; 2], [f64; 2])> {
    let base = [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [-2.0, 0.5], [0.3, -0.7], [1e-3, 5.0]];
    let mut out = Vec::new();
    for (i, a) in base.iter().enumerate() {
        for b in &base[i..] {
            out.push((*a, *b));
            out.push((*a, [-b[0], -b[1]]));
        }
    }
    out
}

#[derive(Debug, Clone, Serialize)]
pub struct Violation {
    pub cell: usize,
    pub what: String,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub valid: bool,
    /// `sup phi(x, p) / |p|` over checked cells and sampled directions.
    pub alpha: f64,
    pub violations: Vec<Violation>,
}

#[inline]
pub fn unit_dir(k: usize, n: usize) -> [f64; 2] {
    let t = 2.0 * PI * k as f64 / n as f64;
    [t.cos(), t.sin()]
}

fn sampled_sup(xi: [f64; 2], n_dirs: usize, norm: impl Fn([f64; 2]) -> f64) -> Result<f64> {
    if n_dirs < 8 {
        return Err(Error::Domain(format!("need at least 8 directions, got {n_dirs}")));
    }
    let mut best: f64 = 0.0;
    for k in 0..n_dirs {
        let p = unit_dir(k, n_dirs);
        let d = norm(p);
        if d > 0.0 {
            best = best.max(dot(xi, p) / d);
        }
    }
    Ok(best)
}

/// A single cell's norm in closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LocalNorm {
    Iso { a: f64 },
    Riem { a: f64, sigma: Sym2, inv: Sym2, axes: [f64; 2], rot: [f64; 2] },
    L1 { a: f64 },
    Linf { a: f64 },
}

impl LocalNorm {
    pub fn weight(&self) -> f64 {
        match *self {
            LocalNorm::Iso { a } | LocalNorm::L1 { a } | LocalNorm::Linf { a } | LocalNorm::Riem { a, .. } => a,
        }
    }

    #[inline]
    pub fn phi(&self, xi: [f64; 2]) -> f64 {
        match *self {
            LocalNorm::Iso { a } => a * norm2(xi),
            LocalNorm::Riem { a, sigma, .. } => a * sigma.quad(xi).max(0.0).sqrt(),
            LocalNorm::L1 { a } => a * (xi[0].abs() + xi[1].abs()),
            LocalNorm::Linf { a } => a * xi[0].abs().max(xi[1].abs()),
        }
    }

    #[inline]
    pub fn dual(&self, xi: [f64; 2]) -> f64 {
        match *self {
            LocalNorm::Iso { a } => norm2(xi) / a,
            LocalNorm::Riem { a, inv, .. } => inv.quad(xi).max(0.0).sqrt() / a,
            LocalNorm::L1 { a } => xi[0].abs().max(xi[1].abs()) / a,
            LocalNorm::Linf { a } => (xi[0].abs() + xi[1].abs()) / a,
        }
    }

    /// `phi(e_axis)`: half-width of the dual ball's shadow on that axis.
    #[inline]
    pub fn axis_support(&self, axis: usize) -> f64 {
        let e = if axis == 0 { [1.0, 0.0] } else { [0.0, 1.0] };
        self.phi(e)
    }

    /// Gradient of `phi` in `xi`, defined for the smooth kinds away from 0.
    pub fn grad_phi(&self, xi: [f64; 2]) -> Option<[f64; 2]> {
        match *self {
            LocalNorm::Iso { a } => {
                let n = norm2(xi);
                (n > 0.0).then(|| [a * xi[0] / n, a * xi[1] / n])
            }
            LocalNorm::Riem { a, sigma, .. } => {
                let q = sigma.quad(xi);
                (q > 0.0).then(|| {
                    let s = sigma.apply(xi);
                    let r = q.sqrt();
                    [a * s[0] / r, a * s[1] / r]
                })
            }
            LocalNorm::L1 { .. } | LocalNorm::Linf { .. } => None,
        }
    }

    /// Euclidean projection onto `{eta : dual(eta) <= 1}`.
    pub fn project(&self, xi: [f64; 2]) -> Result<[f64; 2]> {
        match *self {
            LocalNorm::Iso { a } => {
                let n = norm2(xi);
                if n <= a {
                    Ok(xi)
                } else {
                    let s = a / n;
                    Ok([xi[0] * s, xi[1] * s])
                }
            }
            LocalNorm::L1 { a } => Ok([xi[0].clamp(-a, a), xi[1].clamp(-a, a)]),
            LocalNorm::Linf { a } => Ok(project_l1_ball(xi, a)),
            LocalNorm::Riem { a, axes, rot, .. } => {
                if self.dual(xi) <= 1.0 {
                    return Ok(xi);
                }
                let [c, s] = rot;
                let z = [c * xi[0] + s * xi[1], -s * xi[0] + c * xi[1]];
                let e = [a * axes[0].sqrt(), a * axes[1].sqrt()];
                let eta = project_ellipse(z, e)?;
                let mut out = [c * eta[0] - s * eta[1], s * eta[0] + c * eta[1]];
                let d = self.dual(out);
                if d > 1.0 {
                    out = [out[0] / d, out[1] / d];
                }
                Ok(out)
            }
        }
    }
}

fn project_l1_ball(xi: [f64; 2], r: f64) -> [f64; 2] {
    let (y0, y1) = (xi[0].abs(), xi[1].abs());
    if y0 + y1 <= r {
        return xi;
    }
    let (hi, lo) = if y0 >= y1 { (y0, y1) } else { (y1, y0) };
    let mut theta = 0.5 * (hi + lo - r);
    if lo <= theta {
        theta = hi - r;
    }
    let shrink = |v: f64| v.signum() * (v.abs() - theta).max(0.0);
    [shrink(xi[0]), shrink(xi[1])]
}

/// Nearest point to `z` on the axis-aligned ellipse with semi-axes `e`, for
/// `z` outside it. Solves for the Lagrange multiplier `mu > 0` in
/// `sum (z_i e_i / (e_i^2 + mu))^2 = 1` by safeguarded Newton on the
/// nearly-linear function `1 / sqrt(q(mu))`.
fn project_ellipse(z: [f64; 2], e: [f64; 2]) -> Result<[f64; 2]> {
    let q = |mu: f64| {
        let t0 = z[0] * e[0] / (e[0] * e[0] + mu);
        let t1 = z[1] * e[1] / (e[1] * e[1] + mu);
        t0 * t0 + t1 * t1
    };
    let dq = |mu: f64| {
        let d0 = e[0] * e[0] + mu;
        let d1 = e[1] * e[1] + mu;
        -2.0 * (z[0] * z[0] * e[0] * e[0] / (d0 * d0 * d0) + z[1] * z[1] * e[1] * e[1] / (d1 * d1 * d1))
    };
    let (mut lo, mut hi) = (0.0, e[0].max(e[1]) * norm2(z));
    let mut mu = 0.0;
    let mut converged = false;
    for _ in 0..PROJ_MAX_ITERS {
        let qm = q(mu);
        let r = 1.0 / qm.sqrt();
        let resid = r - 1.0;
        if resid.abs() <= PROJ_TOL {
            converged = true;
            break;
        }
        if resid < 0.0 {
            lo = mu;
        } else {
            hi = mu;
        }
        let dr = -0.5 * qm.powf(-1.5) * dq(mu);
        let mut next = mu - resid / dr;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        if hi - lo <= PROJ_TOL * hi.max(1e-300) {
            mu = next;
            converged = true;
            break;
        }
        mu = next;
    }
    if !converged {
        return Err(Error::Numerical(format!(
            "ellipse projection did not converge: z={z:?}, axes={e:?}, bracket=[{lo}, {hi}]"
        )));
    }
    Ok([z[0] * e[0] * e[0] / (e[0] * e[0] + mu), z[1] * e[1] * e[1] / (e[1] * e[1] + mu)])
}
