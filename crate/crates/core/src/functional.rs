//! Primal and dual energies of the relaxed problem.
//!
//! The primal value is reported in split form: interior phi-total variation
//! (differences between two interior cells) plus the boundary penalty
//! `sum_faces h phi(x, nu) |f_ghost - u_inner|`. The solver minimizes the
//! stencil form `sum h^2 phi(x, G u)` over all active cells, which agrees
//! with the split form exactly for `l1` metrics and up to mixed boundary
//! cells otherwise; both numbers are reported.
//!
//! The penalty on a face uses the metric of the face's stencil cell, which is
//! the adjacent interior cell except at exterior cells sitting in a concave
//! raster corner (both east and north neighbours interior). There the cell
//! takes its east neighbour's metric for both faces.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{boundary_trace, divergence, gradient, DomainMask, ScalarGrid, VectorGrid};
use crate::metric::{LocalNorm, MetricField};
use crate::numerics::pairwise_sum;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub interior_tv: f64,
    pub boundary_penalty: f64,
    pub relaxed_total: f64,
    /// `sum h^2 phi(x, G u)` over active cells (what the solver minimizes).
    pub stencil_total: f64,
}

/// Serialized as `{interior_tv, boundary_penalty, relaxed_total, dual, gap,
/// div_residual, feas_residual}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub interior_tv: f64,
    pub boundary_penalty: f64,
    pub relaxed_total: f64,
    pub dual: f64,
    pub gap: f64,
    pub div_residual: f64,
    pub feas_residual: f64,
}

impl GapReport {
    pub fn primal(&self) -> f64 {
        self.relaxed_total
    }

    /// `gap / max(1, |primal|)`
    pub fn relative_gap(&self) -> f64 {
        self.gap / self.relaxed_total.abs().max(1.0)
    }
}

fn check_metric(m: &MetricField, mask: &DomainMask) -> Result<()> {
    mask.grid.check(&m.grid(), "metric")
}

/// Local norms for every active cell (indexed by cell; inactive cells get the
/// norm of cell 0 and are never read).
pub(crate) fn local_norms(m: &MetricField, mask: &DomainMask) -> Result<Vec<LocalNorm>> {
    check_metric(m, mask)?;
    let fallback = m.local(mask.interior_cells[0])?;
    let mut out = vec![fallback; mask.grid.len()];
    for &c in &mask.stencil_cells {
        out[c] = m.local(mask.metric_cell[c])?;
    }
    Ok(out)
}

pub fn relaxed_energy(u: &ScalarGrid, f: &ScalarGrid, m: &MetricField, mask: &DomainMask) -> Result<EnergyBreakdown> {
    mask.check_scalar(u, "relaxed_energy u")?;
    mask.check_scalar(f, "relaxed_energy f")?;
    let norms = local_norms(m, mask)?;
    let grid = mask.grid;
    let h = grid.h;
    let inv_h = 1.0 / h;
    let h2 = h * h;

    let interior: Vec<f64> = mask
        .interior_cells
        .iter()
        .map(|&c| {
            let gx = if mask.interior[c + 1] { (u.values[c + 1] - u.values[c]) * inv_h } else { 0.0 };
            let n = c + grid.nx;
            let gy = if mask.interior[n] { (u.values[n] - u.values[c]) * inv_h } else { 0.0 };
            h2 * norms[c].phi([gx, gy])
        })
        .collect();

    let penalty: Vec<f64> = mask
        .faces
        .iter()
        .map(|face| h * norms[face.flux_cell].phi(face.dir.normal()) * (f.values[face.outer] - u.values[face.inner]).abs())
        .collect();

    let g = gradient(u, f, mask)?;
    let stencil: Vec<f64> = mask.stencil_cells.iter().map(|&c| h2 * norms[c].phi(g.get(c))).collect();

    let interior_tv = pairwise_sum(&interior);
    let boundary_penalty = pairwise_sum(&penalty);
    Ok(EnergyBreakdown {
        interior_tv,
        boundary_penalty,
        relaxed_total: interior_tv + boundary_penalty,
        stencil_total: pairwise_sum(&stencil),
    })
}

/// `sum_faces h f_ghost [V, nu]`.
pub fn dual_objective(v: &VectorGrid, f: &ScalarGrid, mask: &DomainMask) -> Result<f64> {
    mask.check_scalar(f, "dual_objective f")?;
    let trace = boundary_trace(v, mask)?;
    let h = mask.grid.h;
    let terms: Vec<f64> = mask.faces.iter().zip(&trace.values).map(|(face, t)| h * f.values[face.outer] * t).collect();
    Ok(pairwise_sum(&terms))
}

/// `max_c (phi0(x_c, V_c) - 1)^+` over active cells. Cells with a single
/// active component are checked against the dual ball's shadow on that axis.
pub fn feasibility_residual(v: &VectorGrid, m: &MetricField, mask: &DomainMask) -> Result<f64> {
    mask.check_vector(v, "feasibility v")?;
    let norms = local_norms(m, mask)?;
    Ok(mask.stencil_cells.iter().fold(0.0f64, |acc, &c| acc.max(cell_excess(&norms[c], mask, v, c))))
}

#[inline]
pub(crate) fn cell_excess(norm: &LocalNorm, mask: &DomainMask, v: &VectorGrid, c: usize) -> f64 {
    let e = match (mask.x_active[c], mask.y_active[c]) {
        (true, true) => norm.dual(v.get(c)) - 1.0,
        (true, false) => v.x[c].abs() / norm.axis_support(0) - 1.0,
        (false, true) => v.y[c].abs() / norm.axis_support(1) - 1.0,
        (false, false) => 0.0,
    };
    e.max(0.0)
}

/// `max |div V|` over interior cells.
pub fn divergence_residual(v: &VectorGrid, mask: &DomainMask) -> Result<f64> {
    let d = divergence(v, mask)?;
    Ok(mask.interior_cells.iter().fold(0.0f64, |acc, &c| acc.max(d.values[c].abs())))
}

/// `sum h^2 V . G u` over active cells.
pub fn pairing(v: &VectorGrid, u: &ScalarGrid, f: &ScalarGrid, mask: &DomainMask) -> Result<f64> {
    mask.check_vector(v, "pairing v")?;
    let g = gradient(u, f, mask)?;
    let h2 = mask.grid.h * mask.grid.h;
    let terms: Vec<f64> =
        mask.stencil_cells.iter().map(|&c| h2 * (v.x[c] * g.x[c] + v.y[c] * g.y[c])).collect();
    Ok(pairwise_sum(&terms))
}

pub fn duality_gap(
    u: &ScalarGrid,
    f: &ScalarGrid,
    m: &MetricField,
    mask: &DomainMask,
    v: &VectorGrid,
) -> Result<GapReport> {
    let e = relaxed_energy(u, f, m, mask)?;
    let dual = dual_objective(v, f, mask)?;
    Ok(GapReport {
        interior_tv: e.interior_tv,
        boundary_penalty: e.boundary_penalty,
        relaxed_total: e.relaxed_total,
        dual,
        gap: e.relaxed_total - dual,
        div_residual: divergence_residual(v, mask)?,
        feas_residual: feasibility_residual(v, m, mask)?,
    })
}

/// `P_phi(E)`: relaxed energy of the indicator with itself as exterior data,
/// so jumps across the domain boundary count as perimeter.
pub fn phi_perimeter(e: &ScalarGrid, m: &MetricField, mask: &DomainMask) -> Result<f64> {
    if let Some(v) = e.values.iter().find(|v| **v != 0.0 && **v != 1.0) {
        return Err(Error::Domain(format!("indicator must be 0/1, found {v}")));
    }
    Ok(relaxed_energy(e, e, m, mask)?.relaxed_total)
}
