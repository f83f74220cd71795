//! Discrete geometry on a uniform cell-centered grid.
//!
//! The domain is a set of interior cells. Every cell holds at most one
//! forward-difference stencil: the x-component at cell `c` is the difference
//! `c -> east(c)`, the y-component `c -> north(c)`. A component is *active*
//! when at least one of its two cells is interior. Exterior cells with an
//! active component form the ghost band west and south of the domain; their
//! values come from the boundary extension `f`, so the discrete gradient of
//! `u` sees every jump across the boundary exactly once.
//!
//! With this layout the backward divergence on interior cells is the exact
//! negative adjoint of the gradient, and the summation-by-parts remainder is
//! a sum over boundary faces of `h * u_ghost * [V, nu]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::pairwise_sum;
use crate::shape::Shape;

/// Padding (in cells) between the shape's bounding box and the grid edge.
pub const PAD: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    pub origin: [f64; 2],
}

impl GridSpec {
    pub fn new(nx: usize, ny: usize, h: f64, origin: [f64; 2]) -> Self {
        GridSpec { nx, ny, h, origin }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn ij(&self, c: usize) -> (usize, usize) {
        (c % self.nx, c / self.nx)
    }

    #[inline]
    pub fn center(&self, c: usize) -> [f64; 2] {
        let (i, j) = self.ij(c);
        self.center_ij(i, j)
    }

    #[inline]
    pub fn center_ij(&self, i: usize, j: usize) -> [f64; 2] {
        [self.origin[0] + (i as f64 + 0.5) * self.h, self.origin[1] + (j as f64 + 0.5) * self.h]
    }

    pub fn same_as(&self, other: &GridSpec) -> bool {
        self.nx == other.nx && self.ny == other.ny && self.h == other.h && self.origin == other.origin
    }

    pub fn check(&self, other: &GridSpec, what: &str) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "{what}: grid {}x{} (h={}) does not match {}x{} (h={})",
                other.nx, other.ny, other.h, self.nx, self.ny, self.h
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarGrid {
    pub grid: GridSpec,
    pub values: Vec<f64>,
}

impl ScalarGrid {
    pub fn zeros(grid: GridSpec) -> Self {
        ScalarGrid { grid, values: vec![0.0; grid.len()] }
    }

    pub fn constant(grid: GridSpec, v: f64) -> Self {
        ScalarGrid { grid, values: vec![v; grid.len()] }
    }

    /// Samples `f(x, y)` at every cell center.
    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|c| {
                let p = grid.center(c);
                f(p[0], p[1])
            })
            .collect();
        ScalarGrid { grid, values }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        ScalarGrid { grid: self.grid, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }
}

impl std::ops::Index<usize> for ScalarGrid {
    type Output = f64;
    fn index(&self, c: usize) -> &f64 {
        &self.values[c]
    }
}

/// Per-cell 2-vectors, collocated with each cell's forward stencil.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorGrid {
    pub grid: GridSpec,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl VectorGrid {
    pub fn zeros(grid: GridSpec) -> Self {
        VectorGrid { grid, x: vec![0.0; grid.len()], y: vec![0.0; grid.len()] }
    }

    pub fn constant(grid: GridSpec, v: [f64; 2]) -> Self {
        VectorGrid { grid, x: vec![v[0]; grid.len()], y: vec![v[1]; grid.len()] }
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(f64, f64) -> [f64; 2]) -> Self {
        let mut out = VectorGrid::zeros(grid);
        for c in 0..grid.len() {
            let p = grid.center(c);
            let v = f(p[0], p[1]);
            out.x[c] = v[0];
            out.y[c] = v[1];
        }
        out
    }

    #[inline]
    pub fn get(&self, c: usize) -> [f64; 2] {
        [self.x[c], self.y[c]]
    }

    pub fn scaled(&self, t: f64) -> Self {
        VectorGrid {
            grid: self.grid,
            x: self.x.iter().map(|v| v * t).collect(),
            y: self.y.iter().map(|v| v * t).collect(),
        }
    }
}

/// One scalar per boundary face, in the mask's face order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryField {
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FaceDir {
    East,
    West,
    North,
    South,
}

impl FaceDir {
    /// Outward unit normal.
    pub fn normal(self) -> [f64; 2] {
        match self {
            FaceDir::East => [1.0, 0.0],
            FaceDir::West => [-1.0, 0.0],
            FaceDir::North => [0.0, 1.0],
            FaceDir::South => [0.0, -1.0],
        }
    }

    pub fn is_x(self) -> bool {
        matches!(self, FaceDir::East | FaceDir::West)
    }

    /// +1 for East/North, -1 for West/South.
    pub fn sign(self) -> f64 {
        match self {
            FaceDir::East | FaceDir::North => 1.0,
            FaceDir::West | FaceDir::South => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundaryFace {
    /// Interior cell adjacent to the face.
    pub inner: usize,
    /// Exterior (ghost) cell across the face.
    pub outer: usize,
    /// Outward direction, from `inner` to `outer`.
    pub dir: FaceDir,
    /// Cell whose forward-stencil component crosses this face.
    pub flux_cell: usize,
}

impl BoundaryFace {
    /// Lattice coordinates of the two face endpoints.
    pub fn vertices(&self, grid: &GridSpec) -> [(usize, usize); 2] {
        let (i, j) = grid.ij(self.flux_cell);
        if self.dir.is_x() {
            [(i + 1, j), (i + 1, j + 1)]
        } else {
            [(i, j + 1), (i + 1, j + 1)]
        }
    }

    pub fn midpoint(&self, grid: &GridSpec) -> [f64; 2] {
        let a = grid.center(self.inner);
        let b = grid.center(self.outer);
        [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
    }
}

/// Discrete domain: interior flags, stencil activity, and the boundary faces.
#[derive(Debug, Clone)]
pub struct DomainMask {
    pub grid: GridSpec,
    pub interior: Vec<bool>,
    pub x_active: Vec<bool>,
    pub y_active: Vec<bool>,
    /// Interior cell whose metric applies to each active cell (`usize::MAX` if inactive).
    pub metric_cell: Vec<usize>,
    pub faces: Vec<BoundaryFace>,
    /// Active cells in row-major order.
    pub stencil_cells: Vec<usize>,
    pub interior_cells: Vec<usize>,
    /// Number of 4-connected interior components.
    pub components: usize,
    /// Analytic shape the mask was rasterized from, if any.
    pub shape: Option<Shape>,
}

/// Rasterizes `shape` at resolution `n` cells per unit length.
pub fn build_mask(shape: &Shape, n: usize) -> Result<DomainMask> {
    if n < 2 {
        return Err(Error::Domain(format!("resolution must be at least 2, got {n}")));
    }
    let h = 1.0 / n as f64;
    let [xmin, ymin, xmax, ymax] = shape.bbox();
    let cells = |extent: f64| ((extent / h) - 1e-9).ceil().max(1.0) as usize;
    let nx = cells(xmax - xmin) + 2 * PAD;
    let ny = cells(ymax - ymin) + 2 * PAD;
    let grid = GridSpec::new(nx, ny, h, [xmin - PAD as f64 * h, ymin - PAD as f64 * h]);
    let interior = (0..grid.len()).map(|c| shape.contains(grid.center(c))).collect();
    let mut mask = DomainMask::from_flags(grid, interior)?;
    mask.shape = Some(shape.clone());
    Ok(mask)
}

impl DomainMask {
    pub fn from_flags(grid: GridSpec, interior: Vec<bool>) -> Result<Self> {
        if interior.len() != grid.len() {
            return Err(Error::Dimension(format!("mask has {} flags for {} cells", interior.len(), grid.len())));
        }
        let (nx, ny) = (grid.nx, grid.ny);
        let mut interior_cells = Vec::new();
        for (c, &inside) in interior.iter().enumerate() {
            if inside {
                let (i, j) = grid.ij(c);
                if i == 0 || j == 0 || i + 1 == nx || j + 1 == ny {
                    return Err(Error::InvalidShape("interior cell touches the grid edge; add a ghost ring".into()));
                }
                interior_cells.push(c);
            }
        }
        if interior_cells.is_empty() {
            return Err(Error::InvalidShape("empty interior".into()));
        }

        let mut x_active = vec![false; grid.len()];
        let mut y_active = vec![false; grid.len()];
        let mut metric_cell = vec![usize::MAX; grid.len()];
        let mut stencil_cells = Vec::new();
        for j in 0..ny {
            for i in 0..nx {
                let c = grid.idx(i, j);
                let east = (i + 1 < nx).then(|| grid.idx(i + 1, j));
                let north = (j + 1 < ny).then(|| grid.idx(i, j + 1));
                let e_in = east.is_some_and(|e| interior[e]);
                let n_in = north.is_some_and(|n| interior[n]);
                x_active[c] = interior[c] || e_in;
                y_active[c] = interior[c] || n_in;
                if interior[c] {
                    metric_cell[c] = c;
                } else if e_in {
                    metric_cell[c] = east.unwrap();
                } else if n_in {
                    metric_cell[c] = north.unwrap();
                }
                if x_active[c] || y_active[c] {
                    stencil_cells.push(c);
                }
            }
        }

        let mut faces = Vec::new();
        for j in 0..ny {
            for i in 0..nx - 1 {
                let (a, b) = (grid.idx(i, j), grid.idx(i + 1, j));
                match (interior[a], interior[b]) {
                    (true, false) => faces.push(BoundaryFace { inner: a, outer: b, dir: FaceDir::East, flux_cell: a }),
                    (false, true) => faces.push(BoundaryFace { inner: b, outer: a, dir: FaceDir::West, flux_cell: a }),
                    _ => {}
                }
            }
        }
        for j in 0..ny - 1 {
            for i in 0..nx {
                let (a, b) = (grid.idx(i, j), grid.idx(i, j + 1));
                match (interior[a], interior[b]) {
                    (true, false) => faces.push(BoundaryFace { inner: a, outer: b, dir: FaceDir::North, flux_cell: a }),
                    (false, true) => faces.push(BoundaryFace { inner: b, outer: a, dir: FaceDir::South, flux_cell: a }),
                    _ => {}
                }
            }
        }

        let components = count_components(&grid, &interior);
        if components > 1 {
            log::warn!("domain mask has {components} disconnected interior components");
        }
        Ok(DomainMask {
            grid,
            interior,
            x_active,
            y_active,
            metric_cell,
            faces,
            stencil_cells,
            interior_cells,
            components,
            shape: None,
        })
    }

    pub fn boundary_measure(&self) -> f64 {
        self.faces.len() as f64 * self.grid.h
    }

    pub fn area(&self) -> f64 {
        self.interior_cells.len() as f64 * self.grid.h * self.grid.h
    }

    /// Diagonal of the bounding box of interior cells (cell extents included).
    pub fn diameter(&self) -> f64 {
        let (mut i0, mut j0, mut i1, mut j1) = (usize::MAX, usize::MAX, 0, 0);
        for &c in &self.interior_cells {
            let (i, j) = self.grid.ij(c);
            i0 = i0.min(i);
            j0 = j0.min(j);
            i1 = i1.max(i);
            j1 = j1.max(j);
        }
        let w = (i1 - i0 + 1) as f64 * self.grid.h;
        let hgt = (j1 - j0 + 1) as f64 * self.grid.h;
        w.hypot(hgt)
    }

    /// Stable fingerprint of the mask, used to validate solver state.
    pub fn fingerprint(&self) -> u64 {
        // FNV-1a over dims and flags
        let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
        let mut feed = |b: u64| {
            hash ^= b;
            hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
        };
        feed(self.grid.nx as u64);
        feed(self.grid.ny as u64);
        feed(self.grid.h.to_bits());
        feed(self.grid.origin[0].to_bits());
        feed(self.grid.origin[1].to_bits());
        for &b in &self.interior {
            feed(b as u64);
        }
        hash
    }

    /// Values of `f` on the ghost side of each face.
    pub fn ghost_values(&self, f: &ScalarGrid) -> Vec<f64> {
        self.faces.iter().map(|face| f.values[face.outer]).collect()
    }

    /// Range (max - min) of `f` over the ghost side of the boundary.
    pub fn boundary_range(&self, f: &ScalarGrid) -> f64 {
        let vals = self.ghost_values(f);
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if vals.is_empty() {
            0.0
        } else {
            hi - lo
        }
    }

    /// Groups the given face indices into arcs of faces that share a vertex.
    /// Arcs and the faces within them are sorted by face index.
    pub fn face_arcs(&self, selected: &[usize]) -> Vec<Vec<usize>> {
        use std::collections::HashMap;
        let mut parent: Vec<usize> = (0..selected.len()).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        let mut by_vertex: HashMap<(usize, usize), usize> = HashMap::new();
        for (k, &fi) in selected.iter().enumerate() {
            for v in self.faces[fi].vertices(&self.grid) {
                if let Some(&other) = by_vertex.get(&v) {
                    let (a, b) = (find(&mut parent, k), find(&mut parent, other));
                    if a != b {
                        parent[a.max(b)] = a.min(b);
                    }
                } else {
                    by_vertex.insert(v, k);
                }
            }
        }
        let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for k in 0..selected.len() {
            let r = find(&mut parent, k);
            groups.entry(r).or_default().push(selected[k]);
        }
        let mut arcs: Vec<Vec<usize>> = groups.into_values().collect();
        for a in &mut arcs {
            a.sort_unstable();
        }
        arcs.sort_by_key(|a| a[0]);
        arcs
    }

    /// Connected components of the whole boundary.
    pub fn boundary_components(&self) -> Vec<Vec<usize>> {
        let all: Vec<usize> = (0..self.faces.len()).collect();
        self.face_arcs(&all)
    }

    pub fn check_scalar(&self, s: &ScalarGrid, what: &str) -> Result<()> {
        self.grid.check(&s.grid, what)?;
        if s.values.len() != self.grid.len() {
            return Err(Error::Dimension(format!("{what}: {} values for {} cells", s.values.len(), self.grid.len())));
        }
        Ok(())
    }

    pub fn check_vector(&self, v: &VectorGrid, what: &str) -> Result<()> {
        self.grid.check(&v.grid, what)?;
        if v.x.len() != self.grid.len() || v.y.len() != self.grid.len() {
            return Err(Error::Dimension(format!("{what}: vector length does not match grid")));
        }
        Ok(())
    }

    /// Value of the `A_f` function at cell `c`: `u` inside, `f` outside.
    #[inline]
    pub(crate) fn value(&self, u: &[f64], f: &[f64], c: usize) -> f64 {
        if self.interior[c] {
            u[c]
        } else {
            f[c]
        }
    }
}

fn count_components(grid: &GridSpec, interior: &[bool]) -> usize {
    let mut seen = vec![false; grid.len()];
    let mut count = 0;
    let mut stack = Vec::new();
    for start in 0..grid.len() {
        if !interior[start] || seen[start] {
            continue;
        }
        count += 1;
        seen[start] = true;
        stack.push(start);
        while let Some(c) = stack.pop() {
            let (i, j) = grid.ij(c);
            let mut nbrs = [usize::MAX; 4];
            if i > 0 {
                nbrs[0] = c - 1;
            }
            if i + 1 < grid.nx {
                nbrs[1] = c + 1;
            }
            if j > 0 {
                nbrs[2] = c - grid.nx;
            }
            if j + 1 < grid.ny {
                nbrs[3] = c + grid.nx;
            }
            for k in nbrs {
                if k != usize::MAX && interior[k] && !seen[k] {
                    seen[k] = true;
                    stack.push(k);
                }
            }
        }
    }
    count
}

/// Forward-difference gradient of the `A_f` function (`u` inside, `f` outside).
/// Inactive components are zero.
pub fn gradient(u: &ScalarGrid, f: &ScalarGrid, mask: &DomainMask) -> Result<VectorGrid> {
    mask.check_scalar(u, "gradient u")?;
    mask.check_scalar(f, "gradient f")?;
    let grid = mask.grid;
    let mut g = VectorGrid::zeros(grid);
    let inv_h = 1.0 / grid.h;
    for &c in &mask.stencil_cells {
        let vc = mask.value(&u.values, &f.values, c);
        if mask.x_active[c] {
            g.x[c] = (mask.value(&u.values, &f.values, c + 1) - vc) * inv_h;
        }
        if mask.y_active[c] {
            g.y[c] = (mask.value(&u.values, &f.values, c + grid.nx) - vc) * inv_h;
        }
    }
    Ok(g)
}

/// Backward-difference divergence on interior cells; zero elsewhere.
pub fn divergence(v: &VectorGrid, mask: &DomainMask) -> Result<ScalarGrid> {
    mask.check_vector(v, "divergence")?;
    let grid = mask.grid;
    let mut d = ScalarGrid::zeros(grid);
    for &c in &mask.interior_cells {
        d.values[c] = div_at(v, grid, c);
    }
    Ok(d)
}

#[inline]
pub(crate) fn div_at(v: &VectorGrid, grid: GridSpec, c: usize) -> f64 {
    ((v.x[c] - v.x[c - 1]) + (v.y[c] - v.y[c - grid.nx])) / grid.h
}

/// Discrete normal trace `[V, nu]` on each boundary face (outward positive).
pub fn boundary_trace(v: &VectorGrid, mask: &DomainMask) -> Result<BoundaryField> {
    mask.check_vector(v, "boundary_trace")?;
    let values = mask
        .faces
        .iter()
        .map(|face| {
            let comp = if face.dir.is_x() { v.x[face.flux_cell] } else { v.y[face.flux_cell] };
            face.dir.sign() * comp
        })
        .collect();
    Ok(BoundaryField { values })
}

/// Residual of the discrete Green identity
/// `sum_faces h u_ghost [V,nu] = sum h^2 u div V + sum h^2 V . G u`,
/// where `u` supplies both interior and ghost values.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GreenResidual {
    pub residual: f64,
    /// Sum of absolute values of the three terms.
    pub scale: f64,
}

impl GreenResidual {
    pub fn relative(&self) -> f64 {
        if self.scale > 0.0 {
            self.residual / self.scale
        } else {
            self.residual
        }
    }
}

pub fn green_identity_residual(u: &ScalarGrid, v: &VectorGrid, mask: &DomainMask) -> Result<GreenResidual> {
    let h = mask.grid.h;
    let g = gradient(u, u, mask)?;
    let div = divergence(v, mask)?;
    let trace = boundary_trace(v, mask)?;
    let face_terms: Vec<f64> =
        mask.faces.iter().zip(&trace.values).map(|(face, t)| h * u.values[face.outer] * t).collect();
    let div_terms: Vec<f64> = mask.interior_cells.iter().map(|&c| h * h * u.values[c] * div.values[c]).collect();
    let pair_terms: Vec<f64> =
        mask.stencil_cells.iter().map(|&c| h * h * (v.x[c] * g.x[c] + v.y[c] * g.y[c])).collect();
    let abs_sum = |t: &[f64]| pairwise_sum(&t.iter().map(|v| v.abs()).collect::<Vec<_>>());
    let residual = (pairwise_sum(&face_terms) - pairwise_sum(&div_terms) - pairwise_sum(&pair_terms)).abs();
    let scale = abs_sum(&face_terms) + abs_sum(&div_terms) + abs_sum(&pair_terms);
    Ok(GreenResidual { residual, scale })
}

/// Upper bound on the squared operator norm of the discrete gradient.
pub fn operator_norm_sq_bound(h: f64) -> f64 {
    8.0 / (h * h)
}

/// Power-method estimate of `||G||^2` for the gradient acting on interior
/// values with zero ghost data.
pub fn estimate_operator_norm_sq(mask: &DomainMask, iters: usize) -> f64 {
    let grid = mask.grid;
    let zero = ScalarGrid::zeros(grid);
    let mut u = ScalarGrid::zeros(grid);
    // deterministic, non-degenerate start
    for (k, &c) in mask.interior_cells.iter().enumerate() {
        u.values[c] = if k % 2 == 0 { 1.0 } else { -0.5 } + (k % 7) as f64 * 0.1;
    }
    let norm = |u: &ScalarGrid| mask.interior_cells.iter().map(|&c| u.values[c] * u.values[c]).sum::<f64>().sqrt();
    let mut lambda = 0.0;
    for _ in 0..iters {
        let n = norm(&u);
        for v in &mut u.values {
            *v /= n;
        }
        let g = gradient(&u, &zero, mask).expect("grid matches mask");
        let d = divergence(&g, mask).expect("grid matches mask");
        // G^T G u = -div G u
        let mut next = ScalarGrid::zeros(grid);
        for &c in &mask.interior_cells {
            next.values[c] = -d.values[c];
        }
        lambda = mask.interior_cells.iter().map(|&c| next.values[c] * u.values[c]).sum::<f64>();
        u = next;
    }
    lambda
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_box(n: usize) -> DomainMask {
        build_mask(&Shape::unit_box(), n).unwrap()
    }

    #[test]
    fn box_counts() {
        let m = unit_box(4);
        assert_eq!(m.interior_cells.len(), 16);
        assert_eq!(m.faces.len(), 16);
        assert!((m.boundary_measure() - 4.0).abs() < 1e-15);
        assert_eq!(m.components, 1);
    }

    #[test]
    fn faces_point_to_exterior() {
        let m = build_mask(&Shape::disk(0.0, 0.0, 1.0), 16).unwrap();
        for face in &m.faces {
            assert!(m.interior[face.inner] && !m.interior[face.outer]);
            let a = m.grid.center(face.inner);
            let b = m.grid.center(face.outer);
            let d = [(b[0] - a[0]) / m.grid.h, (b[1] - a[1]) / m.grid.h];
            let n = face.dir.normal();
            assert!((d[0] - n[0]).abs() < 1e-9 && (d[1] - n[1]).abs() < 1e-9);
        }
    }

    #[test]
    fn x_faces_listed_before_y_faces() {
        let m = unit_box(8);
        let first_y = m.faces.iter().position(|f| !f.dir.is_x()).unwrap();
        assert!(m.faces[first_y..].iter().all(|f| !f.dir.is_x()));
    }

    #[test]
    fn annulus_classification() {
        let m = build_mask(&Shape::annulus(0.5, 1.0), 64).unwrap();
        for c in 0..m.grid.len() {
            let p = m.grid.center(c);
            let r = p[0].hypot(p[1]);
            assert_eq!(m.interior[c], r > 0.5 && r < 1.0);
        }
        assert_eq!(m.boundary_components().len(), 2);
    }

    #[test]
    fn disk_perimeter_tends_to_l1_length() {
        // raster perimeter of the unit disk approaches 8, not 2*pi
        let m = build_mask(&Shape::disk(0.0, 0.0, 1.0), 256).unwrap();
        assert!((m.boundary_measure() - 8.0).abs() < 0.05, "{}", m.boundary_measure());
    }

    #[test]
    fn empty_interior_rejected() {
        let g = GridSpec::new(4, 4, 0.25, [0.0, 0.0]);
        assert!(matches!(DomainMask::from_flags(g, vec![false; 16]), Err(Error::InvalidShape(_))));
        let mut flags = vec![false; 16];
        flags[0] = true;
        assert!(DomainMask::from_flags(g, flags).is_err());
    }

    #[test]
    fn gradient_of_affine_is_exact() {
        let m = unit_box(8);
        let u = ScalarGrid::from_fn(m.grid, |x, _| x);
        let g = gradient(&u, &u, &m).unwrap();
        for &c in &m.interior_cells {
            assert!((g.x[c] - 1.0).abs() < 1e-12 && g.y[c].abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_jump_only_at_boundary_cells() {
        let m = unit_box(4);
        let u = ScalarGrid::zeros(m.grid);
        let f = ScalarGrid::constant(m.grid, 1.0);
        let g = gradient(&u, &f, &m).unwrap();
        let h = m.grid.h;
        for &c in &m.stencil_cells {
            let (i, j) = m.grid.ij(c);
            let inside = m.interior[c];
            let expect_x = match (inside, m.interior[c + 1]) {
                (true, false) => 1.0 / h,
                (false, true) => -1.0 / h,
                _ => 0.0,
            };
            let expect_y = match (inside, m.interior[c + m.grid.nx]) {
                (true, false) => 1.0 / h,
                (false, true) => -1.0 / h,
                _ => 0.0,
            };
            assert_eq!(g.x[c], expect_x, "x at ({i},{j})");
            assert_eq!(g.y[c], expect_y, "y at ({i},{j})");
        }
        let zero = gradient(&f, &f, &m).unwrap();
        assert!(zero.x.iter().chain(&zero.y).all(|v| *v == 0.0));
    }

    #[test]
    fn divergence_of_constant_field_vanishes() {
        let m = unit_box(4);
        let v = VectorGrid::constant(m.grid, [1.0, 0.0]);
        let d = divergence(&v, &m).unwrap();
        assert!(d.values.iter().all(|x| *x == 0.0));
        // without ghost-band data the west column carries the boundary flux
        let mut inner = VectorGrid::zeros(m.grid);
        for &c in &m.interior_cells {
            inner.x[c] = 1.0;
        }
        let d = divergence(&inner, &m).unwrap();
        for &c in &m.interior_cells {
            let west_ghost = !m.interior[c - 1];
            let expect = if west_ghost { 1.0 / m.grid.h } else { 0.0 };
            assert_eq!(d.values[c], expect);
        }
    }

    #[test]
    fn divergence_free_affine() {
        let m = build_mask(&Shape::disk(0.0, 0.0, 1.0), 16).unwrap();
        let v = VectorGrid::from_fn(m.grid, |x, y| [x, -y]);
        let d = divergence(&v, &m).unwrap();
        assert!(d.values.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn trace_on_box() {
        let m = unit_box(4);
        let t = boundary_trace(&VectorGrid::constant(m.grid, [1.0, 0.0]), &m).unwrap();
        for (face, v) in m.faces.iter().zip(&t.values) {
            let expect = match face.dir {
                FaceDir::East => 1.0,
                FaceDir::West => -1.0,
                _ => 0.0,
            };
            assert_eq!(*v, expect);
        }
        let d = build_mask(&Shape::disk(0.0, 0.0, 1.0), 16).unwrap();
        let t = boundary_trace(&VectorGrid::constant(d.grid, [0.0, 1.0]), &d).unwrap();
        for (face, v) in d.faces.iter().zip(&t.values) {
            assert_eq!(*v, face.dir.normal()[1]);
        }
    }

    #[test]
    fn green_identity_trivial() {
        let m = unit_box(8);
        let u = ScalarGrid::constant(m.grid, 1.0);
        let v = VectorGrid::constant(m.grid, [1.0, 0.0]);
        let r = green_identity_residual(&u, &v, &m).unwrap();
        assert!(r.residual < 1e-14);
    }

    #[test]
    fn operator_norm_bound_holds() {
        assert_eq!(operator_norm_sq_bound(1.0), 8.0);
        assert_eq!(operator_norm_sq_bound(0.5), 32.0);
        let m = unit_box(16);
        let est = estimate_operator_norm_sq(&m, 50);
        assert!(est <= operator_norm_sq_bound(m.grid.h) + 1e-9, "{est}");
        assert!(est > 0.5 * operator_norm_sq_bound(m.grid.h));
    }
}
