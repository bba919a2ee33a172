//! Masked Cartesian discretization of the bounding box `D`.
//!
//! Scalars live at cell centers, vector components at face centers
//! (MAC layout). All fields are zero-extended outside the fluid region,
//! and the difference operators are built so that two identities hold to
//! machine precision, not just to truncation order:
//!
//! * duality: `<div u, f> = -<u, grad f>` for every cell field `f` that
//!   vanishes on inactive cells, by telescoping over the whole box;
//! * `div(perp_grad f) = 0` on every cell, because the rotated gradient
//!   is formed from node values and face differences cancel in pairs.
//!
//! The second identity is what keeps `div(b v) = 0` exact when the
//! velocity is reconstructed from a stream function.

use std::fmt::Write as _;
use std::sync::Arc;

use thiserror::Error;

use crate::geometry::{depth, DepthProfile, LakeGeometry, Point};

#[derive(Debug, Error)]
pub enum GridError {
    #[error("unresolved island {0}: no grid cell falls inside it")]
    UnresolvedIsland(usize),
    #[error("active cells form {0} connected components, expected 1")]
    DisconnectedMask(usize),
    #[error("cell ({i}, {j}) is active but has non-positive depth {b}")]
    NonPositiveDepth { i: usize, j: usize, b: f64 },
    #[error("fields live on incompatible grids")]
    GridMismatch,
    #[error("L^p norm needs p >= 1, got {0}")]
    BadExponent(f64),
    #[error("field dump is malformed: {0}")]
    BadDump(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Uniform masked grid over the bounding box, with the regularized depth
/// sampled at cell centers and `1/b` face weights (harmonic mean across
/// each interior face).
#[derive(Debug)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    pub origin: Point,
    mask: Vec<bool>,
    /// Regularized depth at cell centers; zero on inactive cells.
    pub b_reg: Vec<f64>,
    /// 1/b on x-faces, (nx+1) * ny entries; zero on faces between two
    /// inactive cells.
    pub weight_x: Vec<f64>,
    /// 1/b on y-faces, nx * (ny+1) entries.
    pub weight_y: Vec<f64>,
    /// Signed distance to the lake boundary at cell centers.
    pub dist: Vec<f64>,
    /// For inactive cells, the island the cell lies in (-1 when it lies
    /// outside the outer curve instead).
    pub island_id: Vec<i32>,
    active: Vec<usize>,
}

impl Grid {
    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn xface(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    #[inline]
    pub fn yface(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    #[inline]
    pub fn is_active(&self, i: usize, j: usize) -> bool {
        self.mask[self.idx(i, j)]
    }

    #[inline]
    pub fn active_cells(&self) -> &[usize] {
        &self.active
    }

    pub fn cell_center(&self, i: usize, j: usize) -> Point {
        Point::new(
            self.origin.x + (i as f64 + 0.5) * self.h,
            self.origin.y + (j as f64 + 0.5) * self.h,
        )
    }

    /// Logical compatibility: same resolution and placement. Masks may
    /// differ, which is what lets fields from different lakes over the
    /// same box be compared after zero extension.
    pub fn compatible(&self, other: &Grid) -> bool {
        self.nx == other.nx
            && self.ny == other.ny
            && self.h == other.h
            && (self.origin.x - other.origin.x).abs() < 1e-12
            && (self.origin.y - other.origin.y).abs() < 1e-12
    }
}

/// Build the masked grid for a lake at cell size `h`. The mask is set by
/// cell-center membership; boundary faces (one active neighbor) carry the
/// Dirichlet ghost convention and take the active cell's depth.
pub fn build_grid(
    geom: &LakeGeometry,
    profile: &DepthProfile,
    h: f64,
) -> Result<Arc<Grid>, GridError> {
    assert!(h > 0.0, "cell size must be positive");
    let bb = geom.bounding_box;
    let nx = (bb.width() / h).ceil() as usize;
    let ny = (bb.height() / h).ceil() as usize;
    let origin = Point::new(bb.x0, bb.y0);

    let mut mask = vec![false; nx * ny];
    let mut b_reg = vec![0.0; nx * ny];
    let mut dist = vec![0.0; nx * ny];
    let mut island_id = vec![-1i32; nx * ny];
    let mut active = Vec::new();
    let mut island_hit = vec![false; geom.island_count()];
    for j in 0..ny {
        for i in 0..nx {
            let c = j * nx + i;
            let p = Point::new(origin.x + (i as f64 + 0.5) * h, origin.y + (j as f64 + 0.5) * h);
            dist[c] = geom.signed_distance(p);
            if geom.contains(p) {
                mask[c] = true;
                active.push(c);
                let b = depth(profile, geom, p);
                if b <= 0.0 {
                    return Err(GridError::NonPositiveDepth { i, j, b });
                }
                b_reg[c] = b;
            } else {
                for (k, isl) in geom.islands.iter().enumerate() {
                    if isl.contains(p) {
                        island_hit[k] = true;
                        island_id[c] = k as i32;
                        break;
                    }
                }
            }
        }
    }
    if let Some(k) = island_hit.iter().position(|hit| !hit) {
        return Err(GridError::UnresolvedIsland(k));
    }

    let parts = count_components(nx, ny, &mask);
    if parts != 1 {
        return Err(GridError::DisconnectedMask(parts));
    }

    let mut weight_x = vec![0.0; (nx + 1) * ny];
    let mut weight_y = vec![0.0; nx * (ny + 1)];
    for j in 0..ny {
        for i in 0..=nx {
            let left = if i > 0 { mask[j * nx + i - 1] } else { false };
            let right = if i < nx { mask[j * nx + i] } else { false };
            let bl = if i > 0 { b_reg[j * nx + i - 1] } else { 0.0 };
            let br = if i < nx { b_reg[j * nx + i] } else { 0.0 };
            weight_x[j * (nx + 1) + i] = face_weight(left, right, bl, br);
        }
    }
    for j in 0..=ny {
        for i in 0..nx {
            let lower = if j > 0 { mask[(j - 1) * nx + i] } else { false };
            let upper = if j < ny { mask[j * nx + i] } else { false };
            let bl = if j > 0 { b_reg[(j - 1) * nx + i] } else { 0.0 };
            let bu = if j < ny { b_reg[j * nx + i] } else { 0.0 };
            weight_y[j * nx + i] = face_weight(lower, upper, bl, bu);
        }
    }

    Ok(Arc::new(Grid {
        nx,
        ny,
        h,
        origin,
        mask,
        b_reg,
        weight_x,
        weight_y,
        dist,
        island_id,
        active,
    }))
}

fn face_weight(a_active: bool, b_active: bool, ba: f64, bb: f64) -> f64 {
    match (a_active, b_active) {
        (true, true) => {
            let b_face = 2.0 * ba * bb / (ba + bb);
            1.0 / b_face
        }
        (true, false) => 1.0 / ba,
        (false, true) => 1.0 / bb,
        (false, false) => 0.0,
    }
}

fn count_components(nx: usize, ny: usize, mask: &[bool]) -> usize {
    let mut seen = vec![false; nx * ny];
    let mut parts = 0;
    for start in 0..nx * ny {
        if !mask[start] || seen[start] {
            continue;
        }
        parts += 1;
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(c) = stack.pop() {
            let i = c % nx;
            let j = c / nx;
            let mut visit = |n: usize, stack: &mut Vec<usize>| {
                if mask[n] && !seen[n] {
                    seen[n] = true;
                    stack.push(n);
                }
            };
            if i > 0 {
                visit(c - 1, &mut stack);
            }
            if i + 1 < nx {
                visit(c + 1, &mut stack);
            }
            if j > 0 {
                visit(c - nx, &mut stack);
            }
            if j + 1 < ny {
                visit(c + nx, &mut stack);
            }
        }
    }
    parts
}

/// Cell-centered scalar field, identically zero on inactive cells.
#[derive(Debug, Clone)]
pub struct ScalarField {
    pub grid: Arc<Grid>,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        ScalarField {
            grid: grid.clone(),
            values: vec![0.0; grid.nx * grid.ny],
        }
    }

    /// Sample a function at active cell centers; inactive cells stay zero.
    pub fn from_fn<F: FnMut(Point) -> f64>(grid: &Arc<Grid>, mut f: F) -> Self {
        let mut field = Self::zeros(grid);
        for &c in grid.active_cells() {
            let (i, j) = (c % grid.nx, c / grid.nx);
            field.values[c] = f(grid.cell_center(i, j));
        }
        field
    }

    pub fn constant(grid: &Arc<Grid>, value: f64) -> Self {
        Self::from_fn(grid, |_| value)
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }

    /// Value at the active cell whose center is nearest to `p`.
    pub fn nearest_value(&self, p: Point) -> f64 {
        let g = &self.grid;
        let mut best = (f64::INFINITY, 0usize);
        for &c in g.active_cells() {
            let (i, j) = (c % g.nx, c / g.nx);
            let d = g.cell_center(i, j).dist(p);
            if d < best.0 {
                best = (d, c);
            }
        }
        self.values[best.1]
    }

    /// Enforce the zero extension after arbitrary writes to `values`.
    pub fn clamp_to_mask(&mut self) {
        for c in 0..self.values.len() {
            if !self.grid.mask[c] {
                self.values[c] = 0.0;
            }
        }
    }
}

/// Face-normal vector components on the staggered grid.
#[derive(Debug, Clone)]
pub struct VectorField {
    pub grid: Arc<Grid>,
    /// x-components on x-faces, (nx+1) * ny entries.
    pub x: Vec<f64>,
    /// y-components on y-faces, nx * (ny+1) entries.
    pub y: Vec<f64>,
}

impl VectorField {
    pub fn zeros(grid: &Arc<Grid>) -> Self {
        VectorField {
            grid: grid.clone(),
            x: vec![0.0; (grid.nx + 1) * grid.ny],
            y: vec![0.0; grid.nx * (grid.ny + 1)],
        }
    }

    /// Sample a pointwise vector function at face centers, zeroing faces
    /// with no active neighbor.
    pub fn from_fn<F: FnMut(Point) -> (f64, f64)>(grid: &Arc<Grid>, mut f: F) -> Self {
        let mut out = Self::zeros(grid);
        let g = grid;
        for j in 0..g.ny {
            for i in 0..=g.nx {
                if g.weight_x[g.xface(i, j)] != 0.0 {
                    let p = Point::new(g.origin.x + i as f64 * g.h, g.origin.y + (j as f64 + 0.5) * g.h);
                    out.x[g.xface(i, j)] = f(p).0;
                }
            }
        }
        for j in 0..=g.ny {
            for i in 0..g.nx {
                if g.weight_y[g.yface(i, j)] != 0.0 {
                    let p = Point::new(g.origin.x + (i as f64 + 0.5) * g.h, g.origin.y + j as f64 * g.h);
                    out.y[g.yface(i, j)] = f(p).1;
                }
            }
        }
        out
    }

    pub fn max_norm(&self) -> f64 {
        let mx = self.x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let my = self.y.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        mx.max(my)
    }
}

/// Face differences of a cell field with the ghost-zero convention:
/// values outside the box and on inactive cells are zero.
pub fn grad(f: &ScalarField) -> VectorField {
    let g = &f.grid;
    let mut out = VectorField::zeros(g);
    let inv_h = 1.0 / g.h;
    for j in 0..g.ny {
        for i in 0..=g.nx {
            let left = if i > 0 { f.values[g.idx(i - 1, j)] } else { 0.0 };
            let right = if i < g.nx { f.values[g.idx(i, j)] } else { 0.0 };
            out.x[g.xface(i, j)] = (right - left) * inv_h;
        }
    }
    for j in 0..=g.ny {
        for i in 0..g.nx {
            let lower = if j > 0 { f.values[g.idx(i, j - 1)] } else { 0.0 };
            let upper = if j < g.ny { f.values[g.idx(i, j)] } else { 0.0 };
            out.y[g.yface(i, j)] = (upper - lower) * inv_h;
        }
    }
    out
}

/// Net face flux per cell over `h`; zero on inactive cells.
pub fn div(u: &VectorField) -> ScalarField {
    let g = &u.grid;
    let mut out = ScalarField::zeros(g);
    let inv_h = 1.0 / g.h;
    for &c in g.active_cells() {
        let (i, j) = (c % g.nx, c / g.nx);
        out.values[c] = (u.x[g.xface(i + 1, j)] - u.x[g.xface(i, j)]
            + u.y[g.yface(i, j + 1)] - u.y[g.yface(i, j)])
            * inv_h;
    }
    out
}

/// Curl of a face field evaluated at nodes.
pub fn curl_at_nodes(u: &VectorField) -> Vec<f64> {
    let g = &u.grid;
    let mut out = vec![0.0; (g.nx + 1) * (g.ny + 1)];
    let inv_h = 1.0 / g.h;
    for j in 0..=g.ny {
        for i in 0..=g.nx {
            let vy_r = if i < g.nx { u.y[g.yface(i, j)] } else { 0.0 };
            let vy_l = if i > 0 { u.y[g.yface(i - 1, j)] } else { 0.0 };
            let ux_t = if j < g.ny { u.x[g.xface(i, j)] } else { 0.0 };
            let ux_b = if j > 0 { u.x[g.xface(i, j - 1)] } else { 0.0 };
            out[g.node(i, j)] = ((vy_r - vy_l) - (ux_t - ux_b)) * inv_h;
        }
    }
    out
}

/// Curl of a face field, averaged back from nodes to cell centers.
pub fn curl(u: &VectorField) -> ScalarField {
    let g = &u.grid;
    let nodes = curl_at_nodes(u);
    let mut out = ScalarField::zeros(g);
    for &c in g.active_cells() {
        let (i, j) = (c % g.nx, c / g.nx);
        out.values[c] = 0.25
            * (nodes[g.node(i, j)]
                + nodes[g.node(i + 1, j)]
                + nodes[g.node(i, j + 1)]
                + nodes[g.node(i + 1, j + 1)]);
    }
    out
}

/// Average a cell field to nodes with zero extension (always dividing
/// by four).
pub fn node_average(f: &ScalarField) -> Vec<f64> {
    let g = &f.grid;
    let mut out = vec![0.0; (g.nx + 1) * (g.ny + 1)];
    for j in 0..=g.ny {
        for i in 0..=g.nx {
            let mut s = 0.0;
            if i > 0 && j > 0 {
                s += f.values[g.idx(i - 1, j - 1)];
            }
            if i < g.nx && j > 0 {
                s += f.values[g.idx(i, j - 1)];
            }
            if i > 0 && j < g.ny {
                s += f.values[g.idx(i - 1, j)];
            }
            if i < g.nx && j < g.ny {
                s += f.values[g.idx(i, j)];
            }
            out[g.node(i, j)] = 0.25 * s;
        }
    }
    out
}

/// Rotated gradient of a node field: `(-d2, d1)` placed on face normals.
/// Its divergence telescopes to zero on every cell, exactly.
pub fn perp_grad_of_nodes(grid: &Arc<Grid>, nodes: &[f64]) -> VectorField {
    let g = grid;
    debug_assert_eq!(nodes.len(), (g.nx + 1) * (g.ny + 1));
    let mut out = VectorField::zeros(g);
    let inv_h = 1.0 / g.h;
    for j in 0..g.ny {
        for i in 0..=g.nx {
            out.x[g.xface(i, j)] = -(nodes[g.node(i, j + 1)] - nodes[g.node(i, j)]) * inv_h;
        }
    }
    for j in 0..=g.ny {
        for i in 0..g.nx {
            out.y[g.yface(i, j)] = (nodes[g.node(i + 1, j)] - nodes[g.node(i, j)]) * inv_h;
        }
    }
    out
}

/// `rotate(grad f)` by +90 degrees: x-component `-d2 f`, y-component
/// `d1 f`, co-located onto face normals through node averaging.
pub fn perp_grad(f: &ScalarField) -> VectorField {
    perp_grad_of_nodes(&f.grid, &node_average(f))
}

/// `h^2` times the sum of active cell values.
pub fn integrate(f: &ScalarField) -> f64 {
    let g = &f.grid;
    let mut s = 0.0;
    for &c in g.active_cells() {
        s += f.values[c];
    }
    s * g.h * g.h
}

/// Weighted L^p norm `(h^2 sum w |f|^p)^(1/p)`; for `p = inf` the max of
/// `|f|` over active cells (the weight is ignored there).
pub fn lp_norm(f: &ScalarField, p: f64, weight: Option<&ScalarField>) -> Result<f64, GridError> {
    if p < 1.0 {
        return Err(GridError::BadExponent(p));
    }
    if let Some(w) = weight {
        if !f.grid.compatible(&w.grid) {
            return Err(GridError::GridMismatch);
        }
    }
    let g = &f.grid;
    if p.is_infinite() {
        let mut m = 0.0f64;
        for &c in g.active_cells() {
            m = m.max(f.values[c].abs());
        }
        return Ok(m);
    }
    let mut s = 0.0;
    for &c in g.active_cells() {
        let w = weight.map_or(1.0, |w| w.values[c]);
        s += w * f.values[c].abs().powf(p);
    }
    Ok((s * g.h * g.h).powf(1.0 / p))
}

/// `h^2 sum_faces a . b`, the face quadrature pairing two vector fields.
pub fn dot_faces(a: &VectorField, b: &VectorField) -> Result<f64, GridError> {
    if !a.grid.compatible(&b.grid) {
        return Err(GridError::GridMismatch);
    }
    let mut s = 0.0;
    for (x, y) in a.x.iter().zip(&b.x) {
        s += x * y;
    }
    for (x, y) in a.y.iter().zip(&b.y) {
        s += x * y;
    }
    Ok(s * a.grid.h * a.grid.h)
}

/// `h^2 sum_cells a b`.
pub fn dot_cells(a: &ScalarField, b: &ScalarField) -> Result<f64, GridError> {
    if !a.grid.compatible(&b.grid) {
        return Err(GridError::GridMismatch);
    }
    let s: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
    Ok(s * a.grid.h * a.grid.h)
}

/// Text dump: header `nx ny h ox oy`, then `ny` rows of `nx` values,
/// inactive cells written as 0.
pub fn dump_field(f: &ScalarField) -> String {
    let g = &f.grid;
    let mut out = String::new();
    let _ = writeln!(out, "{} {} {} {} {}", g.nx, g.ny, g.h, g.origin.x, g.origin.y);
    for j in 0..g.ny {
        let row: Vec<String> = (0..g.nx).map(|i| format!("{}", f.values[g.idx(i, j)])).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
    out
}

/// Parsed field dump: dimensions, placement and row-major values.
pub struct FieldDump {
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    pub origin: Point,
    pub values: Vec<f64>,
}

pub fn parse_field_dump(text: &str) -> Result<FieldDump, GridError> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| GridError::BadDump("empty dump".into()))?;
    let head: Vec<&str> = header.split_whitespace().collect();
    if head.len() != 5 {
        return Err(GridError::BadDump(format!(
            "header needs `nx ny h ox oy`, got {} fields",
            head.len()
        )));
    }
    let nx: usize = head[0].parse().map_err(|_| GridError::BadDump("bad nx".into()))?;
    let ny: usize = head[1].parse().map_err(|_| GridError::BadDump("bad ny".into()))?;
    let h: f64 = head[2].parse().map_err(|_| GridError::BadDump("bad h".into()))?;
    let ox: f64 = head[3].parse().map_err(|_| GridError::BadDump("bad ox".into()))?;
    let oy: f64 = head[4].parse().map_err(|_| GridError::BadDump("bad oy".into()))?;
    let mut values = Vec::with_capacity(nx * ny);
    for line in lines {
        for tok in line.split_whitespace() {
            values.push(
                tok.parse::<f64>()
                    .map_err(|_| GridError::BadDump(format!("bad value `{tok}`")))?,
            );
        }
    }
    if values.len() != nx * ny {
        return Err(GridError::BadDump(format!(
            "expected {} values, got {}",
            nx * ny,
            values.len()
        )));
    }
    Ok(FieldDump {
        nx,
        ny,
        h,
        origin: Point::new(ox, oy),
        values,
    })
}
