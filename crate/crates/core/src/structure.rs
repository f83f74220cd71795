//! Structure checks on a solved problem: alignment of `Du` with the
//! certificate, the boundary jump condition, and contour extraction.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::functional::{feasibility_residual, local_norms};
use crate::grid::{boundary_trace, gradient, DomainMask, ScalarGrid, VectorGrid};
use crate::metric::{unit_dir, MetricField};
use crate::numerics::pairwise_sum;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructureOptions {
    /// Cells with `|G u| <= grad_tol * range(f) / diam` are left out of the mean.
    pub grad_tol: f64,
    /// Jump threshold relative to `range(f)`; `None` means `10 h / diam`.
    pub jump_tol: Option<f64>,
    /// Arcs whose data varies by more than `var_tol * range(f)` are flagged;
    /// `None` uses the jump threshold.
    pub var_tol: Option<f64>,
    pub dir_tol: f64,
    pub n_dirs: usize,
}

impl Default for StructureOptions {
    fn default() -> Self {
        StructureOptions { grad_tol: 1e-3, jump_tol: None, var_tol: None, dir_tol: 1e-2, n_dirs: 256 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AlignmentReport {
    /// `phi(x, G u) - T . G u` per active cell (0 elsewhere).
    #[serde(skip)]
    pub residual: ScalarGrid,
    pub weighted_mean_alignment: f64,
    pub min_residual: f64,
    /// `sum h^2 r` over all active cells.
    pub total_residual: f64,
    pub excluded_cells: usize,
    pub warning: Option<String>,
}

pub fn alignment_report(
    u: &ScalarGrid,
    f: &ScalarGrid,
    t: &VectorGrid,
    m: &MetricField,
    mask: &DomainMask,
    opts: &StructureOptions,
) -> Result<AlignmentReport> {
    let g = gradient(u, f, mask)?;
    mask.check_vector(t, "alignment T")?;
    let norms = local_norms(m, mask)?;
    let feas = feasibility_residual(t, m, mask)?;
    let warning = (feas > 1e-6).then(|| format!("certificate infeasible by {feas:.3e}; residuals may be negative"));
    let h2 = mask.grid.h * mask.grid.h;
    let cutoff = opts.grad_tol * mask.boundary_range(f) / mask.diameter();

    let mut residual = ScalarGrid::zeros(mask.grid);
    let (mut num, mut den, mut all) = (Vec::new(), Vec::new(), Vec::new());
    let mut excluded = 0;
    let mut min_residual = f64::INFINITY;
    for &c in &mask.stencil_cells {
        let gc = g.get(c);
        let phi = norms[c].phi(gc);
        let r = phi - (t.x[c] * gc[0] + t.y[c] * gc[1]);
        residual.values[c] = r;
        min_residual = min_residual.min(r);
        all.push(h2 * r);
        if (gc[0] * gc[0] + gc[1] * gc[1]).sqrt() <= cutoff {
            excluded += 1;
        } else {
            num.push(h2 * r);
            den.push(h2 * phi);
        }
    }
    let den = pairwise_sum(&den);
    Ok(AlignmentReport {
        residual,
        weighted_mean_alignment: pairwise_sum(&num) / den.max(f64::MIN_POSITIVE),
        min_residual: if min_residual.is_finite() { min_residual } else { 0.0 },
        total_residual: pairwise_sum(&all),
        excluded_cells: excluded,
        warning,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundaryJumpReport {
    /// Absolute threshold on `|u_inner - f_ghost|`.
    pub jump_tol: f64,
    pub jump_faces: Vec<usize>,
    /// `phi(x, nu) - sign(f - u) [T, nu]` per face; `None` off the jump set.
    pub boundary_residual: Vec<Option<f64>>,
    pub max_jump_residual: f64,
    /// Normal trace `[T, nu]` per face.
    pub normal_trace: Vec<f64>,
    pub u_above_f: Vec<usize>,
    pub u_below_f: Vec<usize>,
    /// Faces where `|T . nu| < |T|`: `T` is not normal, the trace must attach.
    pub tangential: Vec<usize>,
    pub attainment_fraction: f64,
}

fn jump_threshold(f: &ScalarGrid, mask: &DomainMask, rel: Option<f64>) -> f64 {
    let rel = rel.unwrap_or(10.0 * mask.grid.h / mask.diameter());
    rel * mask.boundary_range(f)
}

pub fn boundary_jump_report(
    u: &ScalarGrid,
    f: &ScalarGrid,
    t: &VectorGrid,
    m: &MetricField,
    mask: &DomainMask,
    opts: &StructureOptions,
) -> Result<BoundaryJumpReport> {
    mask.check_scalar(u, "jump u")?;
    mask.check_scalar(f, "jump f")?;
    let norms = local_norms(m, mask)?;
    let trace = boundary_trace(t, mask)?;
    let tol = jump_threshold(f, mask, opts.jump_tol);

    let mut rep = BoundaryJumpReport {
        jump_tol: tol,
        jump_faces: Vec::new(),
        boundary_residual: vec![None; mask.faces.len()],
        max_jump_residual: 0.0,
        normal_trace: trace.values.clone(),
        u_above_f: Vec::new(),
        u_below_f: Vec::new(),
        tangential: Vec::new(),
        attainment_fraction: 1.0,
    };
    for (k, face) in mask.faces.iter().enumerate() {
        let nu = face.dir.normal();
        let d = f.values[face.outer] - u.values[face.inner];
        if d.abs() > tol {
            let r = norms[face.flux_cell].phi(nu) - d.signum() * trace.values[k];
            rep.jump_faces.push(k);
            rep.boundary_residual[k] = Some(r);
            rep.max_jump_residual = rep.max_jump_residual.max(r.abs());
            if d < 0.0 {
                rep.u_above_f.push(k);
            } else {
                rep.u_below_f.push(k);
            }
        }
        let tv = t.get(face.inner);
        let tn = (tv[0] * nu[0] + tv[1] * nu[1]).abs();
        let tl = (tv[0] * tv[0] + tv[1] * tv[1]).sqrt();
        if tl > 1e-12 && tn < tl * (1.0 - opts.dir_tol) {
            rep.tangential.push(k);
        }
    }
    if !mask.faces.is_empty() {
        rep.attainment_fraction = 1.0 - rep.jump_faces.len() as f64 / mask.faces.len() as f64;
    }
    Ok(rep)
}

/// Argmax over `n_dirs` sampled unit vectors of `T . p / phi(x, p)`, or
/// `None` if `T` does not saturate the constraint within `dir_tol`.
pub fn predicted_direction(
    t: [f64; 2],
    m: &MetricField,
    cell: usize,
    n_dirs: usize,
    dir_tol: f64,
) -> Result<Option<[f64; 2]>> {
    if n_dirs < 64 {
        return Err(Error::Domain(format!("predicted_direction needs at least 64 directions, got {n_dirs}")));
    }
    let norm = m.local(cell)?;
    let mut best = (f64::NEG_INFINITY, [0.0, 0.0]);
    for k in 0..n_dirs {
        let p = unit_dir(k, n_dirs);
        let ratio = (t[0] * p[0] + t[1] * p[1]) / norm.phi(p);
        if ratio > best.0 {
            best = (ratio, p);
        }
    }
    Ok((best.0 >= 1.0 - dir_tol).then_some(best.1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArcVerdict {
    /// Data constant along the arc: detachment is possible, no conclusion on existence.
    ConstantData,
    /// Data varies along a jump arc: no minimizer attaining the trace.
    NonexistenceIndicator,
}

#[derive(Debug, Clone, Serialize)]
pub struct ArcDiagnostic {
    pub component: usize,
    pub faces: Vec<usize>,
    pub measure: f64,
    pub f_variation: f64,
    pub verdict: ArcVerdict,
    pub note: String,
}

/// Groups jump faces into arcs and checks whether `f` is constant on each.
pub fn nonexistence_diagnostic(
    jumps: &BoundaryJumpReport,
    f: &ScalarGrid,
    mask: &DomainMask,
    opts: &StructureOptions,
) -> Result<Vec<ArcDiagnostic>> {
    mask.check_scalar(f, "diagnostic f")?;
    let var_tol = match opts.var_tol {
        Some(v) => v * mask.boundary_range(f),
        None => jump_threshold(f, mask, opts.jump_tol),
    };
    let mut component_of = vec![0; mask.faces.len()];
    for (ci, comp) in mask.boundary_components().iter().enumerate() {
        for &k in comp {
            component_of[k] = ci;
        }
    }
    let mut out = Vec::new();
    for arc in mask.face_arcs(&jumps.jump_faces) {
        let vals: Vec<f64> = arc.iter().map(|&k| f.values[mask.faces[k].outer]).collect();
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let variation = hi - lo;
        let (verdict, note) = if variation > var_tol {
            (ArcVerdict::NonexistenceIndicator, "data varies along a jump arc: nonexistence indicator for the trace problem")
        } else {
            (ArcVerdict::ConstantData, "consistent with boundary detachment; constant data, existence inconclusive")
        };
        out.push(ArcDiagnostic {
            component: component_of[arc[0]],
            measure: arc.len() as f64 * mask.grid.h,
            faces: arc,
            f_variation: variation,
            verdict,
            note: note.into(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct StructureReport {
    pub alignment: AlignmentReport,
    pub boundary: BoundaryJumpReport,
    pub arcs: Vec<ArcDiagnostic>,
    pub caveat: &'static str,
}

pub const TRACE_CAVEAT: &str = "boundary traces use the adjacent interior cell; a representable trace of T is assumed";

pub fn structure_report(
    u: &ScalarGrid,
    f: &ScalarGrid,
    t: &VectorGrid,
    m: &MetricField,
    mask: &DomainMask,
    opts: &StructureOptions,
) -> Result<StructureReport> {
    let alignment = alignment_report(u, f, t, m, mask, opts)?;
    let boundary = boundary_jump_report(u, f, t, m, mask, opts)?;
    let arcs = nonexistence_diagnostic(&boundary, f, mask, opts)?;
    Ok(StructureReport { alignment, boundary, arcs, caveat: TRACE_CAVEAT })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Contour {
    pub level: f64,
    pub polylines: Vec<Vec<[f64; 2]>>,
}

/// Marching squares on the lattice of cell centers. With a mask, only squares
/// whose four corners are interior are used. Polylines are emitted in
/// row-major order of their first segment.
pub fn level_sets(u: &ScalarGrid, levels: &[f64], mask: Option<&DomainMask>) -> Result<Vec<Contour>> {
    if let Some(m) = mask {
        m.check_scalar(u, "level_sets u")?;
    }
    levels.iter().map(|&lv| contour(u, lv, mask)).collect()
}

// Edge ids: horizontal edge from (i,j) to (i+1,j) is 2*idx, vertical edge
// from (i,j) to (i,j+1) is 2*idx+1.
fn contour(u: &ScalarGrid, level: f64, mask: Option<&DomainMask>) -> Result<Contour> {
    if !level.is_finite() {
        return Err(Error::Domain("contour level must be finite".into()));
    }
    let g = u.grid;
    let (nx, ny) = (g.nx, g.ny);
    let point = |edge: usize| -> [f64; 2] {
        let c = edge / 2;
        let d = if edge % 2 == 0 { 1 } else { nx };
        let (a, b) = (u.values[c], u.values[c + d]);
        let s = (level - a) / (b - a);
        let pa = g.center(c);
        let pb = g.center(c + d);
        [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])]
    };

    let mut segments: Vec<[usize; 2]> = Vec::new();
    for j in 0..ny.saturating_sub(1) {
        for i in 0..nx.saturating_sub(1) {
            let c = [g.idx(i, j), g.idx(i + 1, j), g.idx(i + 1, j + 1), g.idx(i, j + 1)];
            if let Some(m) = mask {
                if !c.iter().all(|&k| m.interior[k]) {
                    continue;
                }
            }
            let v = c.map(|k| u.values[k]);
            let above = v.map(|x| x >= level);
            let code = above.iter().enumerate().fold(0usize, |acc, (k, &b)| acc | ((b as usize) << k));
            // bottom, right, top, left
            let e = [2 * c[0], 2 * c[1] + 1, 2 * c[3], 2 * c[0] + 1];
            let centre_above = 0.25 * (v[0] + v[1] + v[2] + v[3]) >= level;
            let pairs: &[(usize, usize)] = match code {
                0 | 15 => &[],
                1 | 14 => &[(3, 0)],
                2 | 13 => &[(0, 1)],
                3 | 12 => &[(3, 1)],
                4 | 11 => &[(1, 2)],
                6 | 9 => &[(0, 2)],
                7 | 8 => &[(3, 2)],
                5 if centre_above => &[(3, 2), (0, 1)],
                5 => &[(3, 0), (1, 2)],
                10 if centre_above => &[(3, 0), (1, 2)],
                10 => &[(3, 2), (0, 1)],
                _ => unreachable!(),
            };
            for &(a, b) in pairs {
                segments.push([e[a], e[b]]);
            }
        }
    }

    let mut at_edge: HashMap<usize, Vec<usize>> = HashMap::new();
    for (s, seg) in segments.iter().enumerate() {
        for &e in seg {
            at_edge.entry(e).or_default().push(s);
        }
    }
    let next = |s: usize, from_edge: usize, used: &[bool]| -> Option<(usize, usize)> {
        at_edge[&from_edge].iter().find(|&&o| o != s && !used[o]).map(|&o| {
            let seg = segments[o];
            (o, if seg[0] == from_edge { seg[1] } else { seg[0] })
        })
    };

    let mut used = vec![false; segments.len()];
    let mut polylines = Vec::new();
    for s0 in 0..segments.len() {
        if used[s0] {
            continue;
        }
        used[s0] = true;
        let mut forward = vec![segments[s0][0], segments[s0][1]];
        let (mut s, mut tip) = (s0, segments[s0][1]);
        while let Some((o, far)) = next(s, tip, &used) {
            used[o] = true;
            forward.push(far);
            s = o;
            tip = far;
        }
        let mut backward = Vec::new();
        let (mut s, mut tip) = (s0, segments[s0][0]);
        while let Some((o, far)) = next(s, tip, &used) {
            used[o] = true;
            backward.push(far);
            s = o;
            tip = far;
        }
        backward.reverse();
        backward.extend(forward);
        polylines.push(backward.into_iter().map(point).collect());
    }
    Ok(Contour { level, polylines })
}

/// `level,polyline,x,y` rows.
pub fn contours_csv(contours: &[Contour]) -> String {
    let mut out = String::from("level,polyline,x,y\n");
    for c in contours {
        for (k, line) in c.polylines.iter().enumerate() {
            for p in line {
                let _ = writeln!(out, "{},{k},{},{}", c.level, p[0], p[1]);
            }
        }
    }
    out
}

/// Plain-text PGM (P2) heatmap, top row first. Cells outside `mask` are black.
pub fn heatmap_pgm(field: &ScalarGrid, mask: Option<&DomainMask>) -> String {
    let g = field.grid;
    let inside = |c: usize| mask.is_none_or(|m| m.interior[c]) && field.values[c].is_finite();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for (c, v) in field.values.iter().enumerate() {
        if inside(c) {
            lo = lo.min(*v);
            hi = hi.max(*v);
        }
    }
    let span = if hi > lo { hi - lo } else { 1.0 };
    let mut out = format!("P2\n{} {}\n255\n", g.nx, g.ny);
    for j in (0..g.ny).rev() {
        let row: Vec<String> = (0..g.nx)
            .map(|i| {
                let c = g.idx(i, j);
                if inside(c) {
                    (1.0 + 254.0 * (field.values[c] - lo) / span).round().to_string()
                } else {
                    "0".into()
                }
            })
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}
