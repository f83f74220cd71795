//! Conductivity imaging from interior current magnitude.
//!
//! For `sigma = c sigma0` with `sigma0` known, the voltage `u` generated by
//! boundary data `f` minimizes `int a |Du|_{sigma0}` with
//! `a = sqrt(sigma0^{-1} J . J)`. The pipeline synthesizes `J` with a forward
//! solve, inverts by least gradient, and reads `c = a / |grad u|_{sigma0}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{build_mask, DomainMask, ScalarGrid, VectorGrid};
use crate::metric::{MetricField, NormKind};
use crate::numerics::{pairwise_sum, Sym2};
use crate::shape::Shape;
use crate::solver::{solve_relaxed, SolveReport, SolverOptions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Phantom {
    Constant { c: f64 },
    /// `c0 + slope * y`.
    Layered { c0: f64, slope: f64 },
    /// `1 + amp * exp(-|x - center|^2 / width2)`.
    Bump { amp: f64, center: [f64; 2], width2: f64 },
}

impl Phantom {
    pub fn bump() -> Self {
        Phantom::Bump { amp: 0.5, center: [0.5, 0.5], width2: 0.04 }
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match *self {
            Phantom::Constant { c } => c,
            Phantom::Layered { c0, slope } => c0 + slope * y,
            Phantom::Bump { amp, center, width2 } => {
                let r2 = (x - center[0]).powi(2) + (y - center[1]).powi(2);
                1.0 + amp * (-r2 / width2).exp()
            }
        }
    }
}

/// `const[:c]`, `layered[:c0,slope]`, or `bump[:amp,cx,cy,width2]`.
impl std::str::FromStr for Phantom {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, args) = s.split_once(':').unwrap_or((s, ""));
        let nums: Vec<f64> = if args.trim().is_empty() {
            Vec::new()
        } else {
            args.split(',')
                .map(|t| t.trim().parse::<f64>().map_err(|_| Error::Config(format!("bad number `{t}` in phantom `{s}`"))))
                .collect::<Result<_>>()?
        };
        if nums.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config(format!("non-finite parameter in phantom `{s}`")));
        }
        let p = match (kind.trim(), nums.as_slice()) {
            ("const" | "constant", []) => Phantom::Constant { c: 1.0 },
            ("const" | "constant", [c]) => Phantom::Constant { c: *c },
            ("layered", []) => Phantom::Layered { c0: 1.0, slope: 0.5 },
            ("layered", [c0, slope]) => Phantom::Layered { c0: *c0, slope: *slope },
            ("bump", []) => Phantom::bump(),
            ("bump", [amp, cx, cy, w2]) => Phantom::Bump { amp: *amp, center: [*cx, *cy], width2: *w2 },
            _ => return Err(Error::Config(format!("unknown phantom `{s}`"))),
        };
        Ok(p)
    }
}

#[derive(Debug, Clone)]
pub struct ImagingProblem {
    pub shape: Shape,
    pub n: usize,
    pub phantom: Option<Phantom>,
    pub c_true: ScalarGrid,
    /// Known anisotropy; `None` is the identity. The forward solver uses the
    /// diagonal only and rejects off-diagonal entries.
    pub sigma0: Option<Sym2>,
    pub f: ScalarGrid,
    pub mask: DomainMask,
}

impl ImagingProblem {
    /// Phantom on `shape` with voltage `f = boundary(x, y)`.
    pub fn new(
        phantom: Phantom,
        shape: Shape,
        n: usize,
        sigma0: Option<Sym2>,
        boundary: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        let mask = build_mask(&shape, n)?;
        let c_true = ScalarGrid::from_fn(mask.grid, |x, y| phantom.eval(x, y));
        let f = ScalarGrid::from_fn(mask.grid, boundary);
        let p = ImagingProblem { shape, n, phantom: Some(phantom), c_true, sigma0, f, mask };
        p.validate()?;
        Ok(p)
    }

    /// Unit square with `f = x`.
    pub fn unit_box(phantom: Phantom, n: usize) -> Result<Self> {
        ImagingProblem::new(phantom, Shape::unit_box(), n, None, |x, _| x)
    }

    pub fn validate(&self) -> Result<()> {
        self.mask.grid.check(&self.c_true.grid, "c_true")?;
        self.mask.grid.check(&self.f.grid, "f")?;
        if let Some(v) = self.c_true.values.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::Domain(format!("conductivity factor must be positive, found {v}")));
        }
        if let Some(s) = self.sigma0 {
            let (_, l_min, _) = s.eigen();
            if !(l_min > 0.0) {
                return Err(Error::InvalidMetric("sigma0 must be positive definite".into()));
            }
        }
        Ok(())
    }

    fn sigma0(&self) -> Sym2 {
        self.sigma0.unwrap_or(Sym2::IDENTITY)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForwardOptions {
    pub tol: f64,
    pub max_iters: usize,
    /// Solve at twice the resolution and average down, to avoid generating
    /// and inverting data with the same discretization.
    pub refine: bool,
}

impl Default for ForwardOptions {
    fn default() -> Self {
        ForwardOptions { tol: 1e-10, max_iters: 20_000, refine: false }
    }
}

#[derive(Debug, Clone)]
pub struct ForwardSolution {
    /// Voltage with ghost cells equal to `f`.
    pub u: ScalarGrid,
    /// `-sigma grad u` on interior cells, zero elsewhere.
    pub j: VectorGrid,
    pub cg_iterations: usize,
    pub residual: f64,
    /// Net outward current through the boundary faces, and its absolute total.
    pub net_flux: f64,
    pub abs_flux: f64,
}

fn harmonic(a: f64, b: f64) -> f64 {
    2.0 * a * b / (a + b)
}

/// Five-point scheme for `div(c sigma0 grad u) = 0` with Dirichlet data `f`
/// on the ghost cells, solved by Jacobi-preconditioned CG.
pub fn forward_solve(p: &ImagingProblem, opts: &ForwardOptions) -> Result<ForwardSolution> {
    if opts.refine {
        return forward_refined(p, opts);
    }
    p.validate()?;
    let s0 = p.sigma0();
    if s0.s12 != 0.0 {
        return Err(Error::InvalidMetric("forward solve supports diagonal sigma0 only".into()));
    }
    let mask = &p.mask;
    let g = mask.grid;
    let nx = g.nx;
    let c = &p.c_true.values;
    // face conductivities: kx[k] between k and k+1, ky[k] between k and k+nx
    let mut kx = vec![0.0; g.len()];
    let mut ky = vec![0.0; g.len()];
    for k in 0..g.len() {
        let (i, j) = g.ij(k);
        if i + 1 < nx {
            kx[k] = s0.s11 * harmonic(c[k], c[k + 1]);
        }
        if j + 1 < g.ny {
            ky[k] = s0.s22 * harmonic(c[k], c[k + nx]);
        }
    }

    let cells = &mask.interior_cells;
    let mut pos = vec![usize::MAX; g.len()];
    for (r, &k) in cells.iter().enumerate() {
        pos[k] = r;
    }
    let neighbours = |k: usize| [(k + 1, kx[k]), (k - 1, kx[k - 1]), (k + nx, ky[k]), (k - nx, ky[k - nx])];
    let m = cells.len();
    let mut diag = vec![0.0; m];
    let mut b = vec![0.0; m];
    for (r, &k) in cells.iter().enumerate() {
        for (nb, w) in neighbours(k) {
            diag[r] += w;
            if pos[nb] == usize::MAX {
                b[r] += w * p.f.values[nb];
            }
        }
    }
    let apply = |x: &[f64], out: &mut [f64]| {
        for (r, &k) in cells.iter().enumerate() {
            let mut acc = diag[r] * x[r];
            for (nb, w) in neighbours(k) {
                if pos[nb] != usize::MAX {
                    acc -= w * x[pos[nb]];
                }
            }
            out[r] = acc;
        }
    };
    let dot = |a: &[f64], b: &[f64]| pairwise_sum(&a.iter().zip(b).map(|(x, y)| x * y).collect::<Vec<_>>());

    let mut x: Vec<f64> = cells.iter().map(|&k| p.f.values[k]).collect();
    let mut ax = vec![0.0; m];
    apply(&x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let bnorm = dot(&b, &b).sqrt().max(f64::MIN_POSITIVE);
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(r, d)| r / d).collect();
    let mut dir = z.clone();
    let mut rz = dot(&r, &z);
    let mut res = dot(&r, &r).sqrt() / bnorm;
    let mut it = 0;
    let mut ad = vec![0.0; m];
    while res > opts.tol {
        if it == opts.max_iters {
            return Err(Error::Numerical(format!("CG stalled at relative residual {res:.3e} after {it} iterations")));
        }
        apply(&dir, &mut ad);
        let alpha = rz / dot(&dir, &ad);
        for q in 0..m {
            x[q] += alpha * dir[q];
            r[q] -= alpha * ad[q];
        }
        for q in 0..m {
            z[q] = r[q] / diag[q];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for q in 0..m {
            dir[q] = z[q] + beta * dir[q];
        }
        res = dot(&r, &r).sqrt() / bnorm;
        it += 1;
        if !res.is_finite() {
            return Err(Error::Numerical("CG produced a non-finite residual".into()));
        }
    }

    let mut u = p.f.clone();
    for (q, &k) in cells.iter().enumerate() {
        u.values[k] = x[q];
    }
    let mut j = VectorGrid::zeros(g);
    let h = g.h;
    for &k in cells {
        let uv = &u.values;
        j.x[k] = -0.5 * (kx[k] * (uv[k + 1] - uv[k]) + kx[k - 1] * (uv[k] - uv[k - 1])) / h;
        j.y[k] = -0.5 * (ky[k] * (uv[k + nx] - uv[k]) + ky[k - nx] * (uv[k] - uv[k - nx])) / h;
    }
    let fluxes: Vec<f64> = mask
        .faces
        .iter()
        .map(|face| {
            let w = if face.dir.is_x() { kx[face.flux_cell] } else { ky[face.flux_cell] };
            -w * (u.values[face.outer] - u.values[face.inner])
        })
        .collect();
    let net_flux = pairwise_sum(&fluxes);
    let abs_flux = pairwise_sum(&fluxes.iter().map(|v| v.abs()).collect::<Vec<_>>());
    Ok(ForwardSolution { u, j, cg_iterations: it, residual: res, net_flux, abs_flux })
}

fn forward_refined(p: &ImagingProblem, opts: &ForwardOptions) -> Result<ForwardSolution> {
    let phantom = p.phantom.ok_or_else(|| Error::Config("refined forward solve needs an analytic phantom".into()))?;
    // fine boundary data: bilinear interpolation of the coarse extension
    let fine_mask = build_mask(&p.shape, 2 * p.n)?;
    let fine_f = ScalarGrid::from_fn(fine_mask.grid, |x, y| sample_bilinear(&p.f, x, y));
    let fine = ImagingProblem {
        shape: p.shape.clone(),
        n: 2 * p.n,
        phantom: Some(phantom),
        c_true: ScalarGrid::from_fn(fine_mask.grid, |x, y| phantom.eval(x, y)),
        sigma0: p.sigma0,
        f: fine_f,
        mask: fine_mask,
    };
    let sol = forward_solve(&fine, &ForwardOptions { refine: false, ..*opts })?;
    let g = p.mask.grid;
    let fg = fine.mask.grid;
    let mut u = p.f.clone();
    let mut j = VectorGrid::zeros(g);
    for &k in &p.mask.interior_cells {
        let (i, jj) = g.ij(k);
        // coarse cell i spans fine cells 2i-2 and 2i-1 (padding is fixed in cells)
        let (fi, fj) = (2 * i - 2, 2 * jj - 2);
        let block = [fg.idx(fi, fj), fg.idx(fi + 1, fj), fg.idx(fi, fj + 1), fg.idx(fi + 1, fj + 1)];
        let inside: Vec<usize> = block.into_iter().filter(|&q| fine.mask.interior[q]).collect();
        if inside.is_empty() {
            continue;
        }
        let w = 1.0 / inside.len() as f64;
        u.values[k] = w * inside.iter().map(|&q| sol.u.values[q]).sum::<f64>();
        j.x[k] = w * inside.iter().map(|&q| sol.j.x[q]).sum::<f64>();
        j.y[k] = w * inside.iter().map(|&q| sol.j.y[q]).sum::<f64>();
    }
    Ok(ForwardSolution { u, j, ..sol })
}

fn sample_bilinear(s: &ScalarGrid, x: f64, y: f64) -> f64 {
    let g = s.grid;
    let fx = ((x - g.origin[0]) / g.h - 0.5).clamp(0.0, (g.nx - 1) as f64);
    let fy = ((y - g.origin[1]) / g.h - 0.5).clamp(0.0, (g.ny - 1) as f64);
    let (i, j) = ((fx.floor() as usize).min(g.nx - 2), (fy.floor() as usize).min(g.ny - 2));
    let (tx, ty) = (fx - i as f64, fy - j as f64);
    let v = |a: usize, b: usize| s.at(a, b);
    (1.0 - ty) * ((1.0 - tx) * v(i, j) + tx * v(i + 1, j)) + ty * ((1.0 - tx) * v(i, j + 1) + tx * v(i + 1, j + 1))
}

/// `a = sqrt(J^T sigma0^{-1} J)` per cell.
pub fn weight_from_current(j: &VectorGrid, sigma0: Option<Sym2>) -> Result<ScalarGrid> {
    let inv = match sigma0 {
        None => Sym2::IDENTITY,
        Some(s) => s.inverse().ok_or_else(|| Error::InvalidMetric("sigma0 is singular".into()))?,
    };
    let values = (0..j.grid.len()).map(|k| inv.quad(j.get(k)).max(0.0).sqrt()).collect();
    Ok(ScalarGrid { grid: j.grid, values })
}

#[derive(Debug, Clone)]
pub struct Recovery {
    /// Recovered factor on usable interior cells, NaN elsewhere.
    pub c: ScalarGrid,
    pub excluded: Vec<bool>,
}

/// `c = a / sqrt(grad u^T sigma0 grad u)` with central differences; interior
/// cells whose denominator is below `grad_floor` are excluded.
pub fn recover_conductivity(
    u: &ScalarGrid,
    a: &ScalarGrid,
    sigma0: Option<Sym2>,
    mask: &DomainMask,
    grad_floor: f64,
) -> Result<Recovery> {
    mask.check_scalar(u, "recover u")?;
    mask.check_scalar(a, "recover a")?;
    let g = mask.grid;
    let s0 = sigma0.unwrap_or(Sym2::IDENTITY);
    let inv2h = 0.5 / g.h;
    let mut c = ScalarGrid::constant(g, f64::NAN);
    let mut excluded = vec![true; g.len()];
    for &k in &mask.interior_cells {
        let du = [(u.values[k + 1] - u.values[k - 1]) * inv2h, (u.values[k + g.nx] - u.values[k - g.nx]) * inv2h];
        let den = s0.quad(du).max(0.0).sqrt();
        if den >= grad_floor {
            c.values[k] = a.values[k] / den;
            excluded[k] = false;
        }
    }
    Ok(Recovery { c, excluded })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ImagingOptions {
    pub forward: ForwardOptions,
    /// Relative to `range(f) / diam`; default `1e-3`.
    pub grad_floor: f64,
}

impl Default for ImagingOptions {
    fn default() -> Self {
        ImagingOptions { forward: ForwardOptions::default(), grad_floor: 1e-3 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ImagingReport {
    pub n: usize,
    pub rel_l2_error_c: f64,
    pub rel_l2_error_u: f64,
    pub excluded_fraction: f64,
    pub cg_iterations: usize,
    pub solve: SolveReport,
    #[serde(skip)]
    pub fields: ImagingFields,
}

#[derive(Debug, Clone)]
pub struct ImagingFields {
    pub u_forward: ScalarGrid,
    pub j: VectorGrid,
    pub a: ScalarGrid,
    pub u_recovered: ScalarGrid,
    pub c_recovered: ScalarGrid,
    pub c_true: ScalarGrid,
    pub t: VectorGrid,
}

fn rel_l2(x: &ScalarGrid, y: &ScalarGrid, cells: &[usize]) -> f64 {
    let num: Vec<f64> = cells.iter().map(|&k| (x.values[k] - y.values[k]).powi(2)).collect();
    let den: Vec<f64> = cells.iter().map(|&k| y.values[k].powi(2)).collect();
    (pairwise_sum(&num) / pairwise_sum(&den).max(f64::MIN_POSITIVE)).sqrt()
}

/// Forward solve, weight, least gradient inversion, recovery, errors.
pub fn run_pipeline(p: &ImagingProblem, solver: &SolverOptions, opts: &ImagingOptions) -> Result<ImagingReport> {
    let fwd = forward_solve(p, &opts.forward)?;
    let mask = &p.mask;
    let raw = weight_from_current(&fwd.j, p.sigma0)?;
    let a_min = crate::metric::DEFAULT_A_MIN;
    let a = ScalarGrid {
        grid: raw.grid,
        values: raw.values.iter().enumerate().map(|(k, &v)| if mask.interior[k] { v.max(a_min) } else { 1.0 }).collect(),
    };
    let kind = if p.sigma0.is_some() { NormKind::Riemannian } else { NormKind::IsotropicEuclidean };
    let tensor = p.sigma0.map(|s| vec![s; mask.grid.len()]);
    let metric = MetricField::new(kind, a.clone(), tensor)?;
    let sol = solve_relaxed(&p.f, &metric, mask, solver)?;

    let floor = opts.grad_floor * mask.boundary_range(&p.f) / mask.diameter();
    let rec = recover_conductivity(&sol.u, &a, p.sigma0, mask, floor)?;
    let used: Vec<usize> = mask.interior_cells.iter().copied().filter(|&k| !rec.excluded[k]).collect();
    if used.is_empty() {
        return Err(Error::Numerical("every cell fell below the gradient floor".into()));
    }
    let excluded_fraction = 1.0 - used.len() as f64 / mask.interior_cells.len() as f64;
    Ok(ImagingReport {
        n: p.n,
        rel_l2_error_c: rel_l2(&rec.c, &p.c_true, &used),
        rel_l2_error_u: rel_l2(&sol.u, &fwd.u, &mask.interior_cells),
        excluded_fraction,
        cg_iterations: fwd.cg_iterations,
        solve: sol.report,
        fields: ImagingFields {
            u_forward: fwd.u,
            j: fwd.j,
            a,
            u_recovered: sol.u,
            c_recovered: rec.c,
            c_true: p.c_true.clone(),
            t: sol.t,
        },
    })
}
