//! Planar triangulations of the unit cell, the macroscopic rectangle and the
//! perforated domain.
//!
//! All meshes start from the same structured grid: every square is split into
//! two counterclockwise triangles along a diagonal whose direction alternates
//! with the parity of `i + j`. With an even number of segments the cell mesh is
//! invariant under the symmetries of the square, and tiled cells continue the
//! pattern of the macroscopic grid. Holes are
//! carved by dropping the triangles whose centroid falls inside the disk and
//! projecting the resulting jagged boundary radially onto the circle. The frame
//! of the unit cell is never touched, so opposite frame edges keep identical
//! discretizations.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Coordinate tolerance used for periodic matching and frame detection.
pub const COORD_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    Cell,
    Macro,
    Perforated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundaryTag {
    /// Outer boundary of the domain, or the frame of the unit cell.
    Outer,
    /// Boundary of a hole.
    Hole,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub tag: BoundaryTag,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    nodes: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<BoundaryEdge>,
    periodic_pairs: Vec<(usize, usize)>,
    region: Region,
}

/// Perforated unit cell `(0,1)^2` minus the disk of radius `radius` centred at
/// `(1/2, 1/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellGeometry {
    pub radius: f64,
    /// Segments per unit edge.
    pub resolution: usize,
}

impl CellGeometry {
    pub const CENTER: Point = [0.5, 0.5];

    pub fn new(radius: f64, resolution: usize) -> Self {
        Self { radius, resolution }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..0.5).contains(&self.radius) || !self.radius.is_finite() {
            return Err(Error::InvalidRadius(self.radius));
        }
        if self.resolution < 4 {
            return Err(Error::MeshDegenerate(format!(
                "cell resolution {} < 4",
                self.resolution
            )));
        }
        Ok(())
    }

    /// Analytic cell volume `1 - pi r^2`.
    pub fn volume(&self) -> f64 {
        1.0 - PI * self.radius * self.radius
    }
}

/// Axis-aligned rectangle `(x0, x1) x (y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MacroDomain {
    pub x: (f64, f64),
    pub y: (f64, f64),
    /// Grid segments per unit length.
    pub resolution: usize,
}

impl MacroDomain {
    pub fn unit_square(resolution: usize) -> Self {
        Self {
            x: (0.0, 1.0),
            y: (0.0, 1.0),
            resolution,
        }
    }

    pub fn width(&self) -> f64 {
        self.x.1 - self.x.0
    }

    pub fn height(&self) -> f64 {
        self.y.1 - self.y.0
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    fn segments(&self) -> (usize, usize) {
        let r = self.resolution as f64;
        (
            ((self.width() * r).round() as usize).max(1),
            ((self.height() * r).round() as usize).max(1),
        )
    }

    fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !ok(self.width()) || !ok(self.height()) || self.resolution == 0 {
            return Err(Error::MeshDegenerate(format!(
                "macro domain ({}, {}) x ({}, {}) at resolution {}",
                self.x.0, self.x.1, self.y.0, self.y.1, self.resolution
            )));
        }
        Ok(())
    }
}

fn triangle_signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

impl Mesh {
    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn periodic_pairs(&self) -> &[(usize, usize)] {
        &self.periodic_pairs
    }

    pub fn region(&self) -> Region {
        self.region
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn vertices(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.nodes[a], self.nodes[b], self.nodes[c]]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.vertices(t);
        triangle_signed_area(a, b, c)
    }

    pub fn centroid(&self, t: usize) -> Point {
        let [a, b, c] = self.vertices(t);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    /// Summed triangle area.
    pub fn area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Longest edge length.
    pub fn h(&self) -> f64 {
        self.triangles
            .iter()
            .flat_map(|&[a, b, c]| [(a, b), (b, c), (c, a)])
            .map(|(i, j)| dist(self.nodes[i], self.nodes[j]))
            .fold(0.0, f64::max)
    }

    /// Gradients of the three barycentric basis functions of triangle `t`.
    pub fn basis_gradients(&self, t: usize) -> [[f64; 2]; 3] {
        let [p0, p1, p2] = self.vertices(t);
        let two_a = 2.0 * triangle_signed_area(p0, p1, p2);
        [
            [(p1[1] - p2[1]) / two_a, (p2[0] - p1[0]) / two_a],
            [(p2[1] - p0[1]) / two_a, (p0[0] - p2[0]) / two_a],
            [(p0[1] - p1[1]) / two_a, (p1[0] - p0[0]) / two_a],
        ]
    }

    /// Constant gradient of the P1 interpolant of `values` on triangle `t`.
    pub fn gradient(&self, t: usize, values: &[f64]) -> [f64; 2] {
        let g = self.basis_gradients(t);
        let tri = self.triangles[t];
        // Differences against vertex 0 keep constants exactly in the kernel.
        let d1 = values[tri[1]] - values[tri[0]];
        let d2 = values[tri[2]] - values[tri[0]];
        [g[1][0] * d1 + g[2][0] * d2, g[1][1] * d1 + g[2][1] * d2]
    }

    /// Sorted, deduplicated node indices touching edges with the given tag.
    pub fn boundary_nodes(&self, tag: BoundaryTag) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .boundary_edges
            .iter()
            .filter(|e| e.tag == tag)
            .flat_map(|e| e.nodes)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn has_tag(&self, tag: BoundaryTag) -> bool {
        self.boundary_edges.iter().any(|e| e.tag == tag)
    }

    /// Checks the structural invariants every mesh must satisfy.
    pub fn validate(&self) -> Result<()> {
        for (t, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&i| i >= self.nodes.len()) {
                return Err(Error::MeshDegenerate(format!("triangle {t} indexes past the node list")));
            }
            let a = self.triangle_area(t);
            if a <= 0.0 || !a.is_finite() {
                return Err(Error::MeshDegenerate(format!("triangle {t} has area {a:e}")));
            }
        }
        let counts = edge_counts(&self.triangles);
        for e in &self.boundary_edges {
            let key = edge_key(e.nodes[0], e.nodes[1]);
            if counts.get(&key).copied().unwrap_or(0) != 1 {
                return Err(Error::MeshDegenerate(format!(
                    "boundary edge {:?} is not owned by exactly one triangle",
                    e.nodes
                )));
            }
        }
        Ok(())
    }

    fn from_parts(nodes: Vec<Point>, triangles: Vec<[usize; 3]>, region: Region) -> Self {
        Self {
            nodes,
            triangles,
            boundary_edges: Vec::new(),
            periodic_pairs: Vec::new(),
            region,
        }
    }

    /// Drops nodes not referenced by any triangle and renumbers the rest.
    fn compact(&mut self) {
        let mut used = vec![false; self.nodes.len()];
        for tri in &self.triangles {
            for &i in tri {
                used[i] = true;
            }
        }
        let mut map = vec![usize::MAX; self.nodes.len()];
        let mut nodes = Vec::with_capacity(self.nodes.len());
        for (i, p) in self.nodes.iter().enumerate() {
            if used[i] {
                map[i] = nodes.len();
                nodes.push(*p);
            }
        }
        for tri in &mut self.triangles {
            for i in tri.iter_mut() {
                *i = map[*i];
            }
        }
        self.nodes = nodes;
    }

    /// Recomputes boundary edges, tagging each with `classify`.
    fn tag_boundary(&mut self, classify: impl Fn(Point, Point) -> BoundaryTag) {
        self.boundary_edges = boundary_edge_list(&self.triangles)
            .into_iter()
            .map(|[a, b]| BoundaryEdge {
                nodes: [a, b],
                tag: classify(self.nodes[a], self.nodes[b]),
            })
            .collect();
    }
}

fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

fn edge_counts(triangles: &[[usize; 3]]) -> HashMap<(usize, usize), usize> {
    let mut counts = HashMap::with_capacity(triangles.len() * 2);
    for &[a, b, c] in triangles {
        for (i, j) in [(a, b), (b, c), (c, a)] {
            *counts.entry(edge_key(i, j)).or_insert(0) += 1;
        }
    }
    counts
}

/// Edges owned by a single triangle, oriented as in that triangle and listed in
/// a deterministic order.
fn boundary_edge_list(triangles: &[[usize; 3]]) -> Vec<[usize; 2]> {
    let mut owners: BTreeMap<(usize, usize), (usize, [usize; 2])> = BTreeMap::new();
    for &[a, b, c] in triangles {
        for (i, j) in [(a, b), (b, c), (c, a)] {
            owners
                .entry(edge_key(i, j))
                .and_modify(|e| e.0 += 1)
                .or_insert((1, [i, j]));
        }
    }
    owners
        .into_values()
        .filter(|(n, _)| *n == 1)
        .map(|(_, e)| e)
        .collect()
}

/// Structured `nx x ny` grid over a rectangle.
fn structured_grid(x: (f64, f64), y: (f64, f64), nx: usize, ny: usize) -> (Vec<Point>, Vec<[usize; 3]>) {
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        let yj = if j == ny { y.1 } else { y.0 + (y.1 - y.0) * j as f64 / ny as f64 };
        for i in 0..=nx {
            let xi = if i == nx { x.1 } else { x.0 + (x.1 - x.0) * i as f64 / nx as f64 };
            nodes.push([xi, yj]);
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (p00, p10, p11, p01) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            if (i + j) % 2 == 0 {
                triangles.push([p00, p10, p11]);
                triangles.push([p00, p11, p01]);
            } else {
                triangles.push([p00, p10, p01]);
                triangles.push([p10, p11, p01]);
            }
        }
    }
    (nodes, triangles)
}

fn on_unit_frame(p: Point) -> bool {
    p[0].abs() < COORD_TOL
        || (p[0] - 1.0).abs() < COORD_TOL
        || p[1].abs() < COORD_TOL
        || (p[1] - 1.0).abs() < COORD_TOL
}

/// Meshes the perforated unit cell.
pub fn build_unit_cell_mesh(geom: &CellGeometry) -> Result<Mesh> {
    geom.validate()?;
    let n = geom.resolution;
    let (grid, all_triangles) = structured_grid((0.0, 1.0), (0.0, 1.0), n, n);
    let center = CellGeometry::CENTER;
    let r = geom.radius;

    let mut keep = vec![true; all_triangles.len()];
    let mut nodes = grid.clone();
    if r > 0.0 {
        for (t, &[a, b, c]) in all_triangles.iter().enumerate() {
            let g = [
                (grid[a][0] + grid[b][0] + grid[c][0]) / 3.0,
                (grid[a][1] + grid[b][1] + grid[c][1]) / 3.0,
            ];
            if dist(g, center) < r {
                keep[t] = false;
            }
        }
        // Project the hole boundary onto the circle; drop triangles that end
        // up inside the disk or inverted, and repeat until nothing changes.
        loop {
            nodes.clone_from(&grid);
            let kept: Vec<[usize; 3]> = all_triangles
                .iter()
                .zip(&keep)
                .filter_map(|(t, &k)| k.then_some(*t))
                .collect();
            let mut project = vec![false; grid.len()];
            for [a, b] in boundary_edge_list(&kept) {
                if !(on_unit_frame(grid[a]) && on_unit_frame(grid[b])) {
                    project[a] = true;
                    project[b] = true;
                }
            }
            for tri in &kept {
                for &i in tri {
                    if dist(grid[i], center) < r {
                        project[i] = true;
                    }
                }
            }
            for (i, p) in nodes.iter_mut().enumerate() {
                if project[i] && !on_unit_frame(*p) {
                    let d = dist(*p, center);
                    if d == 0.0 {
                        return Err(Error::MeshDegenerate("node at the hole centre".into()));
                    }
                    *p = [
                        center[0] + (p[0] - center[0]) * r / d,
                        center[1] + (p[1] - center[1]) * r / d,
                    ];
                }
            }
            let min_area = 1e-3 / (n * n) as f64;
            let mut changed = false;
            for (t, &[a, b, c]) in all_triangles.iter().enumerate() {
                if !keep[t] {
                    continue;
                }
                let area = triangle_signed_area(nodes[a], nodes[b], nodes[c]);
                let g = [
                    (nodes[a][0] + nodes[b][0] + nodes[c][0]) / 3.0,
                    (nodes[a][1] + nodes[b][1] + nodes[c][1]) / 3.0,
                ];
                if area < min_area || dist(g, center) < r * (1.0 - 1e-9) {
                    keep[t] = false;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
    }

    let triangles = all_triangles
        .into_iter()
        .zip(&keep)
        .filter_map(|(t, &k)| k.then_some(t))
        .collect();
    let mut mesh = Mesh::from_parts(nodes, triangles, Region::Cell);
    mesh.compact();
    mesh.tag_boundary(|a, b| {
        let same_side = |k: usize, v: f64| (a[k] - v).abs() < COORD_TOL && (b[k] - v).abs() < COORD_TOL;
        if same_side(0, 0.0) || same_side(0, 1.0) || same_side(1, 0.0) || same_side(1, 1.0) {
            BoundaryTag::Outer
        } else {
            BoundaryTag::Hole
        }
    });
    if mesh.boundary_nodes(BoundaryTag::Hole).iter().any(|&i| on_unit_frame(mesh.nodes[i])) {
        return Err(Error::MeshDegenerate(format!(
            "hole of radius {r} reaches the cell frame at resolution {n}"
        )));
    }
    mesh.periodic_pairs = match_periodic_frame(&mesh)?;
    mesh.validate()?;
    if r > 0.0 && !mesh.has_tag(BoundaryTag::Hole) {
        return Err(Error::MeshDegenerate(format!(
            "hole of radius {r} not resolved at resolution {n}"
        )));
    }
    Ok(mesh)
}

/// Pairs every left/bottom frame node with its right/top twin.
fn match_periodic_frame(mesh: &Mesh) -> Result<Vec<(usize, usize)>> {
    let frame = mesh.boundary_nodes(BoundaryTag::Outer);
    let quantize = |v: f64| (v * 1e9).round() as i64;
    let mut by_y: HashMap<i64, usize> = HashMap::new();
    let mut by_x: HashMap<i64, usize> = HashMap::new();
    for &i in &frame {
        let p = mesh.nodes[i];
        if (p[0] - 1.0).abs() < COORD_TOL {
            by_y.insert(quantize(p[1]), i);
        }
        if (p[1] - 1.0).abs() < COORD_TOL {
            by_x.insert(quantize(p[0]), i);
        }
    }
    let mut pairs = Vec::new();
    let mut missing = None;
    for &i in &frame {
        let p = mesh.nodes[i];
        if p[0].abs() < COORD_TOL {
            match by_y.get(&quantize(p[1])) {
                Some(&j) if (mesh.nodes[j][1] - p[1]).abs() < COORD_TOL => pairs.push((i, j)),
                _ => missing = Some(p),
            }
        }
    }
    for &i in &frame {
        let p = mesh.nodes[i];
        if p[1].abs() < COORD_TOL {
            match by_x.get(&quantize(p[0])) {
                Some(&j) if (mesh.nodes[j][0] - p[0]).abs() < COORD_TOL => pairs.push((i, j)),
                _ => missing = Some(p),
            }
        }
    }
    if let Some(p) = missing {
        return Err(Error::MeshDegenerate(format!(
            "frame node ({}, {}) has no periodic twin",
            p[0], p[1]
        )));
    }
    Ok(pairs)
}

/// Structured triangulation of a rectangle, all boundary edges `Outer`.
pub fn build_macro_mesh(dom: &MacroDomain) -> Result<Mesh> {
    dom.validate()?;
    let (nx, ny) = dom.segments();
    let (nodes, triangles) = structured_grid(dom.x, dom.y, nx, ny);
    let mut mesh = Mesh::from_parts(nodes, triangles, Region::Macro);
    mesh.tag_boundary(|_, _| BoundaryTag::Outer);
    mesh.validate()?;
    Ok(mesh)
}

/// Number of cells of size `epsilon` spanning `length`, if it is integral.
fn cells_along(length: f64, epsilon: f64) -> Result<usize> {
    let k = length / epsilon;
    let kr = k.round();
    if !(epsilon > 0.0) || kr < 1.0 || (k - kr).abs() > 1e-9 * kr.max(1.0) {
        return Err(Error::TilingMismatch { epsilon, length });
    }
    Ok(kr as usize)
}

/// Tiles the rectangle with `epsilon`-scaled copies of the cell mesh.
pub fn build_perforated_mesh(dom: &MacroDomain, epsilon: f64, geom: &CellGeometry) -> Result<Mesh> {
    dom.validate()?;
    let kx = cells_along(dom.width(), epsilon)?;
    let ky = cells_along(dom.height(), epsilon)?;
    let cell = build_unit_cell_mesh(geom)?;
    let n = geom.resolution as i64;
    let (nx_total, ny_total) = (kx as i64 * n, ky as i64 * n);

    let mut nodes: Vec<Point> = Vec::new();
    let mut triangles = Vec::with_capacity(kx * ky * cell.triangle_count());
    let mut shared: HashMap<(i64, i64), usize> = HashMap::new();
    let mut local = vec![0usize; cell.node_count()];
    for cj in 0..ky {
        for ci in 0..kx {
            for (i, p) in cell.nodes.iter().enumerate() {
                if on_unit_frame(*p) {
                    let gi = ci as i64 * n + (p[0] * n as f64).round() as i64;
                    let gj = cj as i64 * n + (p[1] * n as f64).round() as i64;
                    local[i] = *shared.entry((gi, gj)).or_insert_with(|| {
                        let x = if gi == nx_total { dom.x.1 } else { dom.x.0 + epsilon * gi as f64 / n as f64 };
                        let y = if gj == ny_total { dom.y.1 } else { dom.y.0 + epsilon * gj as f64 / n as f64 };
                        nodes.push([x, y]);
                        nodes.len() - 1
                    });
                } else {
                    nodes.push([
                        dom.x.0 + epsilon * (ci as f64 + p[0]),
                        dom.y.0 + epsilon * (cj as f64 + p[1]),
                    ]);
                    local[i] = nodes.len() - 1;
                }
            }
            for &[a, b, c] in &cell.triangles {
                triangles.push([local[a], local[b], local[c]]);
            }
        }
    }
    let mut mesh = Mesh::from_parts(nodes, triangles, Region::Perforated);
    let (x, y) = (dom.x, dom.y);
    let tol = COORD_TOL * (dom.width() + dom.height());
    mesh.tag_boundary(|a, b| {
        let same_side = |k: usize, v: f64| (a[k] - v).abs() < tol && (b[k] - v).abs() < tol;
        if same_side(0, x.0) || same_side(0, x.1) || same_side(1, y.0) || same_side(1, y.1) {
            BoundaryTag::Outer
        } else {
            BoundaryTag::Hole
        }
    });
    mesh.validate()?;
    Ok(mesh)
}

/// Bucketed point location on a triangulation.
#[derive(Debug, Clone)]
pub struct PointLocator {
    origin: Point,
    cell: [f64; 2],
    dims: [usize; 2],
    buckets: Vec<Vec<usize>>,
    snap: f64,
}

/// Containing triangle and barycentric coordinates of a located point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Location {
    pub triangle: usize,
    pub barycentric: [f64; 3],
}

impl PointLocator {
    /// `snap` is the distance within which a point outside every triangle is
    /// attached to the nearest one.
    pub fn new(mesh: &Mesh, snap: f64) -> Self {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in &mesh.nodes {
            for k in 0..2 {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        let per_side = ((mesh.triangle_count() as f64 / 2.0).sqrt().ceil() as usize).max(1);
        let dims = [per_side, per_side];
        let cell = [
            ((hi[0] - lo[0]) / per_side as f64).max(f64::MIN_POSITIVE),
            ((hi[1] - lo[1]) / per_side as f64).max(f64::MIN_POSITIVE),
        ];
        let mut loc = Self {
            origin: lo,
            cell,
            dims,
            buckets: vec![Vec::new(); per_side * per_side],
            snap,
        };
        for t in 0..mesh.triangle_count() {
            let v = mesh.vertices(t);
            let (mut tlo, mut thi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
            for p in v {
                for k in 0..2 {
                    tlo[k] = tlo[k].min(p[k] - snap);
                    thi[k] = thi[k].max(p[k] + snap);
                }
            }
            let (i0, j0) = loc.bucket_of(tlo);
            let (i1, j1) = loc.bucket_of(thi);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    loc.buckets[j * dims[0] + i].push(t);
                }
            }
        }
        loc
    }

    fn bucket_of(&self, p: Point) -> (usize, usize) {
        let idx = |k: usize| {
            let f = ((p[k] - self.origin[k]) / self.cell[k]).floor();
            (f.max(0.0) as usize).min(self.dims[k] - 1)
        };
        (idx(0), idx(1))
    }

    pub fn locate(&self, mesh: &Mesh, p: Point) -> Result<Location> {
        let (i, j) = self.bucket_of(p);
        let mut best: Option<(f64, Location)> = None;
        for &t in &self.buckets[j * self.dims[0] + i] {
            let [a, b, c] = mesh.vertices(t);
            let area = triangle_signed_area(a, b, c);
            let bary = [
                triangle_signed_area(p, b, c) / area,
                triangle_signed_area(a, p, c) / area,
                triangle_signed_area(a, b, p) / area,
            ];
            let worst = bary.iter().copied().fold(f64::INFINITY, f64::min);
            if worst >= -1e-12 {
                return Ok(Location { triangle: t, barycentric: bary });
            }
            // Outside: measure how far, projecting onto the nearest edge.
            let d = [(a, b), (b, c), (c, a)]
                .iter()
                .map(|&(s, e)| point_segment_distance(p, s, e))
                .fold(f64::INFINITY, f64::min);
            if d <= self.snap && best.map_or(true, |(bd, _)| d < bd) {
                let clamped = clamp_barycentric(bary);
                best = Some((d, Location { triangle: t, barycentric: clamped }));
            }
        }
        best.map(|(_, l)| l).ok_or(Error::PointOutsideDomain(p[0], p[1]))
    }
}

fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    let t = (((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / len2).clamp(0.0, 1.0);
    dist(p, [a[0] + t * ab[0], a[1] + t * ab[1]])
}

fn clamp_barycentric(b: [f64; 3]) -> [f64; 3] {
    let c = b.map(|x| x.max(0.0));
    let s: f64 = c.iter().sum();
    c.map(|x| x / s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_cell_counts() {
        let m = build_unit_cell_mesh(&CellGeometry::new(0.0, 8)).unwrap();
        assert_eq!(m.node_count(), 81);
        assert_eq!(m.triangle_count(), 128);
        assert!(!m.has_tag(BoundaryTag::Hole));
        // 9 left/right pairs and 9 bottom/top pairs; together they touch all 32 frame nodes.
        assert_eq!(m.periodic_pairs().len(), 18);
        let mut touched: Vec<usize> = m.periodic_pairs().iter().flat_map(|&(a, b)| [a, b]).collect();
        touched.sort_unstable();
        touched.dedup();
        assert_eq!(touched.len(), 32);
    }

    #[test]
    fn periodic_offsets_are_exact() {
        let m = build_unit_cell_mesh(&CellGeometry::new(0.3, 12)).unwrap();
        for &(a, b) in m.periodic_pairs() {
            let (p, q) = (m.nodes()[a], m.nodes()[b]);
            let d = [q[0] - p[0], q[1] - p[1]];
            let ok = ((d[0] - 1.0).abs() < COORD_TOL && d[1].abs() < COORD_TOL)
                || (d[0].abs() < COORD_TOL && (d[1] - 1.0).abs() < COORD_TOL);
            assert!(ok, "{p:?} -> {q:?}");
        }
    }

    #[test]
    fn holed_cell_volume() {
        let g = CellGeometry::new(0.25, 16);
        let m = build_unit_cell_mesh(&g).unwrap();
        let rel = (m.area() - g.volume()).abs() / g.volume();
        assert!(rel < 0.02, "relative area error {rel}");
        assert!(m.has_tag(BoundaryTag::Hole));
    }

    #[test]
    fn hole_geometry_invariants() {
        for &r in &[0.05, 0.15, 0.25, 0.35, 0.45] {
            for &n in &[4, 8, 13, 32, 64] {
                let g = CellGeometry::new(r, n);
                let m = match build_unit_cell_mesh(&g) {
                    Ok(m) => m,
                    Err(Error::MeshDegenerate(_)) if r < 1.0 / n as f64 || r + 1.5 / n as f64 > 0.5 => continue,
                    Err(e) => panic!("r={r} n={n}: {e}"),
                };
                let h = m.h();
                for p in m.nodes() {
                    assert!(dist(*p, CellGeometry::CENTER) >= r * (1.0 - 1e-12), "node inside hole");
                }
                for e in m.boundary_edges().iter().filter(|e| e.tag == BoundaryTag::Hole) {
                    let (a, b) = (m.nodes()[e.nodes[0]], m.nodes()[e.nodes[1]]);
                    let mid = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
                    assert!((dist(mid, CellGeometry::CENTER) - r).abs() <= h);
                    assert!((dist(a, CellGeometry::CENTER) - r).abs() < 1e-12, "r={r} n={n} a={a:?}");
                }
            }
        }
    }

    #[test]
    fn cell_area_converges() {
        let g = |n| CellGeometry::new(0.25, n);
        let err = |n| (build_unit_cell_mesh(&g(n)).unwrap().area() - g(n).volume()).abs();
        assert!(err(32) < err(16));
        assert!(err(64) < err(32));
    }

    #[test]
    fn invalid_radius() {
        for r in [0.6, 0.5, -0.1] {
            assert!(matches!(
                build_unit_cell_mesh(&CellGeometry::new(r, 8)),
                Err(Error::InvalidRadius(_))
            ));
        }
    }

    #[test]
    fn macro_mesh_counts_and_area() {
        let m = build_macro_mesh(&MacroDomain::unit_square(2)).unwrap();
        assert_eq!((m.node_count(), m.triangle_count()), (9, 8));
        assert!(m.boundary_edges().iter().all(|e| e.tag == BoundaryTag::Outer));
        assert!(m.periodic_pairs().is_empty());
        let m = build_macro_mesh(&MacroDomain::unit_square(64)).unwrap();
        assert!((m.area() - 1.0).abs() < 1e-12);
        let dom = MacroDomain { x: (0.0, 2.0), y: (0.0, 1.0), resolution: 4 };
        assert!((build_macro_mesh(&dom).unwrap().area() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn macro_mesh_rejects_zero_extent() {
        let dom = MacroDomain { x: (0.0, 0.0), y: (0.0, 1.0), resolution: 4 };
        assert!(matches!(build_macro_mesh(&dom), Err(Error::MeshDegenerate(_))));
    }

    #[test]
    fn perforated_area_and_holes() {
        let dom = MacroDomain::unit_square(16);
        let m = build_perforated_mesh(&dom, 0.5, &CellGeometry::new(0.25, 16)).unwrap();
        let exact = 1.0 - PI / 16.0;
        assert!((m.area() - exact).abs() / exact < 0.02);
        // Four separate holes: each hole boundary is a closed loop.
        let hole_nodes = m.boundary_nodes(BoundaryTag::Hole);
        let mut centres = std::collections::BTreeSet::new();
        for &i in &hole_nodes {
            let p = m.nodes()[i];
            centres.insert(((p[0] * 2.0).floor() as i32, (p[1] * 2.0).floor() as i32));
        }
        assert_eq!(centres.len(), 4);
        for &i in &m.boundary_nodes(BoundaryTag::Outer) {
            let p = m.nodes()[i];
            assert!(p[0].abs() < 1e-12 || p[1].abs() < 1e-12 || (p[0] - 1.0).abs() < 1e-12 || (p[1] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn perforated_without_holes_matches_macro() {
        let dom = MacroDomain::unit_square(24);
        let fine = build_perforated_mesh(&dom, 1.0 / 3.0, &CellGeometry::new(0.0, 8)).unwrap();
        let coarse = build_macro_mesh(&dom).unwrap();
        assert_eq!(fine.node_count(), coarse.node_count());
        assert_eq!(fine.triangle_count(), coarse.triangle_count());
        let key = |p: &Point| ((p[0] * 1e8).round() as i64, (p[1] * 1e8).round() as i64);
        let mut a: Vec<_> = fine.nodes().iter().map(key).collect();
        let mut b: Vec<_> = coarse.nodes().iter().map(key).collect();
        a.sort_unstable();
        b.sort_unstable();
        assert_eq!(a, b);
        let tri_key = |m: &Mesh| {
            let mut v: Vec<_> = m
                .triangles()
                .iter()
                .map(|t| {
                    let mut k = t.map(|i| key(&m.nodes()[i]));
                    k.sort_unstable();
                    k
                })
                .collect();
            v.sort_unstable();
            v
        };
        assert_eq!(tri_key(&fine), tri_key(&coarse));
    }

    #[test]
    fn tiling_mismatch() {
        let r = build_perforated_mesh(&MacroDomain::unit_square(8), 0.3, &CellGeometry::new(0.25, 8));
        assert!(matches!(r, Err(Error::TilingMismatch { .. })));
    }

    #[test]
    fn locator_finds_points_and_snaps() {
        let m = build_unit_cell_mesh(&CellGeometry::new(0.25, 16)).unwrap();
        let loc = PointLocator::new(&m, m.h());
        for (t, _) in m.triangles().iter().enumerate().step_by(7) {
            let c = m.centroid(t);
            let l = loc.locate(&m, c).unwrap();
            assert_eq!(l.triangle, t);
        }
        assert!(matches!(
            loc.locate(&m, [0.5, 0.5]),
            Err(Error::PointOutsideDomain(..))
        ));
    }
}
