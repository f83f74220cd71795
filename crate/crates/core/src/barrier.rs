//! Curvature-type sufficient condition for trace attainment:
//! `S(x) = -div_x [phi_xi(x, Dd(x))] > 0` near the boundary, where `d` is the
//! signed distance (positive inside).
//!
//! `S` is evaluated with central differences on interior cells within a band
//! of the boundary and carried to each face from the adjacent interior cell,
//! stepping inward along the normal when that cell's stencil is unusable.
//! Only the sufficient condition is checked.

use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{DomainMask, FaceDir, GridSpec, ScalarGrid};
use crate::metric::{LocalNorm, MetricField};
use crate::shape::Shape;

/// Central-difference gradients of `d` with `||grad d| - 1|` above this are
/// treated as medial-axis contamination.
pub const EIKONAL_TOL: f64 = 0.1;

pub fn signed_distance_shape(shape: &Shape, grid: GridSpec) -> ScalarGrid {
    ScalarGrid::from_fn(grid, |x, y| shape.signed_distance([x, y]))
}

/// Analytic distance when the mask carries its shape, fast sweeping otherwise.
pub fn signed_distance(mask: &DomainMask) -> Result<ScalarGrid> {
    match &mask.shape {
        Some(s) => Ok(signed_distance_shape(s, mask.grid)),
        None => signed_distance_sweep(mask),
    }
}

/// First-order fast sweeping for the distance to the staircase boundary.
/// Cells on either side of a boundary face start at `h/2`.
pub fn signed_distance_sweep(mask: &DomainMask) -> Result<ScalarGrid> {
    if mask.faces.is_empty() {
        return Err(Error::Domain("mask has no boundary".into()));
    }
    let g = mask.grid;
    let (nx, ny, h) = (g.nx, g.ny, g.h);
    let mut d = vec![f64::INFINITY; g.len()];
    let mut fixed = vec![false; g.len()];
    for face in &mask.faces {
        for c in [face.inner, face.outer] {
            d[c] = 0.5 * h;
            fixed[c] = true;
        }
    }
    let orders: [(bool, bool); 4] = [(false, false), (true, false), (true, true), (false, true)];
    for _round in 0..(nx + ny) {
        let mut changed = false;
        for &(rev_i, rev_j) in &orders {
            for jj in 0..ny {
                let j = if rev_j { ny - 1 - jj } else { jj };
                for ii in 0..nx {
                    let i = if rev_i { nx - 1 - ii } else { ii };
                    let c = g.idx(i, j);
                    if fixed[c] {
                        continue;
                    }
                    let a = f64::min(
                        if i > 0 { d[c - 1] } else { f64::INFINITY },
                        if i + 1 < nx { d[c + 1] } else { f64::INFINITY },
                    );
                    let b = f64::min(
                        if j > 0 { d[c - nx] } else { f64::INFINITY },
                        if j + 1 < ny { d[c + nx] } else { f64::INFINITY },
                    );
                    let cand = if (a - b).abs() >= h {
                        a.min(b) + h
                    } else {
                        0.5 * (a + b + (2.0 * h * h - (a - b) * (a - b)).sqrt())
                    };
                    if cand < d[c] {
                        d[c] = cand;
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    let values = d.iter().zip(&mask.interior).map(|(&v, &inside)| if inside { v } else { -v }).collect();
    Ok(ScalarGrid { grid: g, values })
}

fn central_grad(d: &[f64], g: GridSpec, c: usize) -> Option<[f64; 2]> {
    let (i, j) = g.ij(c);
    if i == 0 || j == 0 || i + 1 >= g.nx || j + 1 >= g.ny {
        return None;
    }
    let s = 0.5 / g.h;
    Some([(d[c + 1] - d[c - 1]) * s, (d[c + g.nx] - d[c - g.nx]) * s])
}

/// Unit normal field `grad d / |grad d|` at `c`, if the eikonal check passes.
fn unit_normal(d: &[f64], g: GridSpec, c: usize) -> Option<[f64; 2]> {
    let gr = central_grad(d, g, c)?;
    let n = (gr[0] * gr[0] + gr[1] * gr[1]).sqrt();
    ((n - 1.0).abs() <= EIKONAL_TOL).then_some(gr)
}

fn flux(norms: &[Option<LocalNorm>], d: &[f64], g: GridSpec, c: usize) -> Option<[f64; 2]> {
    norms[c]?.grad_phi(unit_normal(d, g, c)?)
}

#[derive(Debug, Clone, Serialize)]
pub struct BarrierIndicator {
    /// `S` per boundary face; `None` where no usable band cell was found.
    pub s: Vec<Option<f64>>,
    pub band_width: f64,
    /// `S` on band cells (NaN elsewhere).
    #[serde(skip)]
    pub cells: ScalarGrid,
}

/// Evaluates `S` on the band and carries it to the boundary faces.
/// `band_width` defaults to `3h`.
pub fn barrier_indicator(
    m: &MetricField,
    d: &ScalarGrid,
    mask: &DomainMask,
    band_width: Option<f64>,
) -> Result<BarrierIndicator> {
    if !m.kind.is_smooth() {
        return Err(Error::InvalidMetric(format!(
            "the sufficient condition needs a differentiable norm; {:?} is crystalline",
            m.kind
        )));
    }
    mask.check_scalar(d, "signed distance")?;
    let g = mask.grid;
    let h = g.h;
    let band = band_width.unwrap_or(3.0 * h);
    if !(band > 0.0) {
        return Err(Error::Domain("band width must be positive".into()));
    }
    let norms: Vec<Option<LocalNorm>> = (0..g.len()).map(|c| m.local(c).ok()).collect();

    let mut cells = ScalarGrid::constant(g, f64::NAN);
    let inv2h = 0.5 / h;
    for &c in &mask.interior_cells {
        if d.values[c] > band {
            continue;
        }
        let (i, j) = g.ij(c);
        if i < 2 || j < 2 || i + 2 >= g.nx || j + 2 >= g.ny {
            continue;
        }
        let parts = (
            flux(&norms, &d.values, g, c + 1),
            flux(&norms, &d.values, g, c - 1),
            flux(&norms, &d.values, g, c + g.nx),
            flux(&norms, &d.values, g, c - g.nx),
            unit_normal(&d.values, g, c),
        );
        if let (Some(e), Some(w), Some(n), Some(s), Some(_)) = parts {
            cells.values[c] = -((e[0] - w[0]) * inv2h + (n[1] - s[1]) * inv2h);
        }
    }

    let max_steps = (band / h).floor() as usize + 1;
    let s = mask
        .faces
        .iter()
        .map(|face| {
            let step: isize = match face.dir {
                FaceDir::East => -1,
                FaceDir::West => 1,
                FaceDir::North => -(g.nx as isize),
                FaceDir::South => g.nx as isize,
            };
            let mut c = face.inner as isize;
            for _ in 0..max_steps {
                if c < 0 || c as usize >= g.len() || !mask.interior[c as usize] {
                    return None;
                }
                let v = cells.values[c as usize];
                if v.is_finite() {
                    return Some(v);
                }
                c += step;
            }
            None
        })
        .collect();
    Ok(BarrierIndicator { s, band_width: band, cells })
}

/// Isotropic product form `-grad a . n - a div n` with `n = grad d / |grad d|`,
/// on the same band cells as [`barrier_indicator`].
pub fn isotropic_product_form(weight: &ScalarGrid, d: &ScalarGrid, mask: &DomainMask, band: f64) -> Result<ScalarGrid> {
    mask.check_scalar(weight, "weight")?;
    mask.check_scalar(d, "signed distance")?;
    let g = mask.grid;
    let inv2h = 0.5 / g.h;
    let a = &weight.values;
    let mut out = ScalarGrid::constant(g, f64::NAN);
    for &c in &mask.interior_cells {
        let (i, j) = g.ij(c);
        if d.values[c] > band || i < 2 || j < 2 || i + 2 >= g.nx || j + 2 >= g.ny {
            continue;
        }
        let n = |k: usize| unit_normal(&d.values, g, k).map(|v| {
            let l = (v[0] * v[0] + v[1] * v[1]).sqrt();
            [v[0] / l, v[1] / l]
        });
        if let (Some(nc), Some(e), Some(w), Some(nn), Some(s)) = (n(c), n(c + 1), n(c - 1), n(c + g.nx), n(c - g.nx)) {
            let grad_a = [(a[c + 1] - a[c - 1]) * inv2h, (a[c + g.nx] - a[c - g.nx]) * inv2h];
            let div_n = (e[0] - w[0]) * inv2h + (nn[1] - s[1]) * inv2h;
            out.values[c] = -(grad_a[0] * nc[0] + grad_a[1] * nc[1]) - a[c] * div_n;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FaceClass {
    Pass,
    Fail,
    Marginal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Holds,
    Fails,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComponentSummary {
    pub faces: usize,
    pub pass: f64,
    pub fail: f64,
    pub marginal: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BarrierReport {
    pub delta: f64,
    pub band_width: f64,
    pub s: Vec<Option<f64>>,
    pub class: Vec<FaceClass>,
    pub component_of: Vec<usize>,
    pub components: Vec<ComponentSummary>,
    pub pass: f64,
    pub fail: f64,
    pub marginal: f64,
    /// Verdict on the sufficient condition only.
    pub verdict: Verdict,
}

/// Classifies faces with threshold `delta` (default `10h`).
pub fn classify(ind: &BarrierIndicator, mask: &DomainMask, delta: Option<f64>) -> Result<BarrierReport> {
    let delta = delta.unwrap_or(10.0 * mask.grid.h);
    if !(delta > 0.0) {
        return Err(Error::Domain("delta must be positive".into()));
    }
    if ind.s.len() != mask.faces.len() {
        return Err(Error::Dimension("indicator does not match mask faces".into()));
    }
    let class: Vec<FaceClass> = ind
        .s
        .iter()
        .map(|s| match s {
            Some(v) if *v > delta => FaceClass::Pass,
            Some(v) if *v < -delta => FaceClass::Fail,
            _ => FaceClass::Marginal,
        })
        .collect();
    let frac = |faces: &[usize], k: FaceClass| {
        if faces.is_empty() {
            0.0
        } else {
            faces.iter().filter(|&&f| class[f] == k).count() as f64 / faces.len() as f64
        }
    };
    let mut component_of = vec![0; mask.faces.len()];
    let mut components = Vec::new();
    for (ci, comp) in mask.boundary_components().iter().enumerate() {
        for &f in comp {
            component_of[f] = ci;
        }
        components.push(ComponentSummary {
            faces: comp.len(),
            pass: frac(comp, FaceClass::Pass),
            fail: frac(comp, FaceClass::Fail),
            marginal: frac(comp, FaceClass::Marginal),
        });
    }
    let all: Vec<usize> = (0..mask.faces.len()).collect();
    let (pass, fail, marginal) = (frac(&all, FaceClass::Pass), frac(&all, FaceClass::Fail), frac(&all, FaceClass::Marginal));
    let verdict = if fail > 0.0 {
        Verdict::Fails
    } else if pass == 1.0 {
        Verdict::Holds
    } else {
        Verdict::Inconclusive
    };
    Ok(BarrierReport {
        delta,
        band_width: ind.band_width,
        s: ind.s.clone(),
        class,
        component_of,
        components,
        pass,
        fail,
        marginal,
        verdict,
    })
}

/// `face,x,y,nx,ny,component,S,class` rows; missing `S` is left empty.
pub fn report_csv(report: &BarrierReport, mask: &DomainMask) -> String {
    let mut out = String::from("face,x,y,nx,ny,component,S,class\n");
    for (k, face) in mask.faces.iter().enumerate() {
        let p = face.midpoint(&mask.grid);
        let n = face.dir.normal();
        let s = report.s[k].map(|v| v.to_string()).unwrap_or_default();
        let class = match report.class[k] {
            FaceClass::Pass => "pass",
            FaceClass::Fail => "fail",
            FaceClass::Marginal => "marginal",
        };
        let _ = writeln!(out, "{k},{},{},{},{},{},{s},{class}", p[0], p[1], n[0], n[1], report.component_of[k]);
    }
    out
}
