//! Background fluid grid, fitted solid meshes and the deformed interface.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geom::{right_normal, Rect, Vec2};
use crate::quadrature::gauss_square;

/// Sides of the rectangular fluid grid, numbered counter-clockwise from the
/// bottom.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Side {
    Bottom,
    Right,
    Top,
    Left,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Bottom, Side::Right, Side::Top, Side::Left];

    pub fn outward_normal(self) -> Vec2 {
        match self {
            Side::Bottom => Vec2::new(0.0, -1.0),
            Side::Right => Vec2::new(1.0, 0.0),
            Side::Top => Vec2::new(0.0, 1.0),
            Side::Left => Vec2::new(-1.0, 0.0),
        }
    }

    pub fn parse(s: &str) -> Option<Side> {
        match s {
            "bottom" => Some(Side::Bottom),
            "right" => Some(Side::Right),
            "top" => Some(Side::Top),
            "left" => Some(Side::Left),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Side::Bottom => "bottom",
            Side::Right => "right",
            Side::Top => "top",
            Side::Left => "left",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum BoundaryTag {
    #[default]
    None,
    Dirichlet,
    Neumann,
    /// Dirichlet on some velocity components, Neumann on the others.
    Mixed,
}

/// Fixed axis-aligned grid of bilinear elements.
#[derive(Clone, Debug)]
pub struct FluidGrid {
    pub origin: Vec2,
    pub nx: usize,
    pub ny: usize,
    pub hx: f64,
    pub hy: f64,
    pub tags: [BoundaryTag; 4],
}

/// Interior grid face shared by two elements. `normal` points from `left`
/// into `right`.
#[derive(Clone, Copy, Debug)]
pub struct GridFace {
    pub left: usize,
    pub right: usize,
    pub a: Vec2,
    pub b: Vec2,
    pub normal: Vec2,
}

impl FluidGrid {
    pub fn new(origin: Vec2, extent: Vec2, nx: usize, ny: usize) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::Config("fluid grid needs at least one element per direction".into()));
        }
        if !(extent.x > 0.0 && extent.y > 0.0) {
            return Err(Error::Config("fluid grid extent must be positive".into()));
        }
        Ok(FluidGrid {
            origin,
            nx,
            ny,
            hx: extent.x / nx as f64,
            hy: extent.y / ny as f64,
            tags: [BoundaryTag::None; 4],
        })
    }

    pub fn n_nodes(&self) -> usize {
        (self.nx + 1) * (self.ny + 1)
    }

    pub fn n_elements(&self) -> usize {
        self.nx * self.ny
    }

    /// Characteristic element size used for interface penalties.
    pub fn h(&self) -> f64 {
        self.hx.min(self.hy)
    }

    pub fn bounds(&self) -> Rect {
        Rect::new(
            self.origin,
            self.origin + Vec2::new(self.hx * self.nx as f64, self.hy * self.ny as f64),
        )
    }

    pub fn node_id(&self, i: usize, j: usize) -> usize {
        j * (self.nx + 1) + i
    }

    pub fn node_ij(&self, n: usize) -> (usize, usize) {
        (n % (self.nx + 1), n / (self.nx + 1))
    }

    pub fn node_pos(&self, n: usize) -> Vec2 {
        let (i, j) = self.node_ij(n);
        self.origin + Vec2::new(i as f64 * self.hx, j as f64 * self.hy)
    }

    pub fn elem_id(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn elem_ij(&self, e: usize) -> (usize, usize) {
        (e % self.nx, e / self.nx)
    }

    /// Element nodes in counter-clockwise order from the lower-left corner.
    pub fn elem_nodes(&self, e: usize) -> [usize; 4] {
        let (i, j) = self.elem_ij(e);
        [
            self.node_id(i, j),
            self.node_id(i + 1, j),
            self.node_id(i + 1, j + 1),
            self.node_id(i, j + 1),
        ]
    }

    pub fn elem_rect(&self, e: usize) -> Rect {
        let (i, j) = self.elem_ij(e);
        let lo = self.origin + Vec2::new(i as f64 * self.hx, j as f64 * self.hy);
        Rect::new(lo, lo + Vec2::new(self.hx, self.hy))
    }

    /// Element containing `p`, if `p` lies in the grid.
    pub fn locate(&self, p: &Vec2) -> Option<usize> {
        let q = p - self.origin;
        let fi = q.x / self.hx;
        let fj = q.y / self.hy;
        if fi < 0.0 || fj < 0.0 || fi > self.nx as f64 || fj > self.ny as f64 {
            return None;
        }
        let i = (fi.floor() as usize).min(self.nx - 1);
        let j = (fj.floor() as usize).min(self.ny - 1);
        Some(self.elem_id(i, j))
    }

    /// Range of element indices whose closure may touch the box `[lo, hi]`.
    pub fn elem_range(&self, lo: &Vec2, hi: &Vec2) -> Option<(usize, usize, usize, usize)> {
        let q0 = lo - self.origin;
        let q1 = hi - self.origin;
        let i0 = (q0.x / self.hx).floor() - 1.0;
        let j0 = (q0.y / self.hy).floor() - 1.0;
        let i1 = (q1.x / self.hx).floor() + 1.0;
        let j1 = (q1.y / self.hy).floor() + 1.0;
        if i1 < 0.0 || j1 < 0.0 || i0 >= self.nx as f64 || j0 >= self.ny as f64 {
            return None;
        }
        let c = |v: f64, n: usize| (v.max(0.0) as usize).min(n - 1);
        Some((c(i0, self.nx), c(i1, self.nx), c(j0, self.ny), c(j1, self.ny)))
    }

    /// Bilinear shape functions and gradients of element `e` at `x`.
    pub fn shape(&self, e: usize, x: &Vec2) -> ([f64; 4], [Vec2; 4]) {
        let r = self.elem_rect(e);
        let s = (x.x - r.lo.x) / self.hx;
        let t = (x.y - r.lo.y) / self.hy;
        let n = [(1.0 - s) * (1.0 - t), s * (1.0 - t), s * t, (1.0 - s) * t];
        let g = [
            Vec2::new(-(1.0 - t) / self.hx, -(1.0 - s) / self.hy),
            Vec2::new((1.0 - t) / self.hx, -s / self.hy),
            Vec2::new(t / self.hx, s / self.hy),
            Vec2::new(-t / self.hx, (1.0 - s) / self.hy),
        ];
        (n, g)
    }

    /// All interior faces in a fixed order: vertical faces row by row, then
    /// horizontal faces.
    pub fn faces(&self) -> Vec<GridFace> {
        let mut out = Vec::with_capacity(2 * self.n_elements());
        for j in 0..self.ny {
            for i in 0..self.nx.saturating_sub(1) {
                let (l, r) = (self.elem_id(i, j), self.elem_id(i + 1, j));
                let rect = self.elem_rect(l);
                out.push(GridFace {
                    left: l,
                    right: r,
                    a: Vec2::new(rect.hi.x, rect.lo.y),
                    b: rect.hi,
                    normal: Vec2::new(1.0, 0.0),
                });
            }
        }
        for j in 0..self.ny.saturating_sub(1) {
            for i in 0..self.nx {
                let (l, r) = (self.elem_id(i, j), self.elem_id(i, j + 1));
                let rect = self.elem_rect(l);
                out.push(GridFace {
                    left: l,
                    right: r,
                    a: Vec2::new(rect.lo.x, rect.hi.y),
                    b: rect.hi,
                    normal: Vec2::new(0.0, 1.0),
                });
            }
        }
        out
    }

    /// Grid nodes lying on a side.
    pub fn side_nodes(&self, side: Side) -> Vec<usize> {
        match side {
            Side::Bottom => (0..=self.nx).map(|i| self.node_id(i, 0)).collect(),
            Side::Top => (0..=self.nx).map(|i| self.node_id(i, self.ny)).collect(),
            Side::Left => (0..=self.ny).map(|j| self.node_id(0, j)).collect(),
            Side::Right => (0..=self.ny).map(|j| self.node_id(self.nx, j)).collect(),
        }
    }

    /// Side on which a point lies, if it is on the grid boundary.
    pub fn side_of(&self, p: &Vec2, tol: f64) -> Option<Side> {
        let b = self.bounds();
        if (p.y - b.lo.y).abs() <= tol {
            Some(Side::Bottom)
        } else if (p.x - b.hi.x).abs() <= tol {
            Some(Side::Right)
        } else if (p.y - b.hi.y).abs() <= tol {
            Some(Side::Top)
        } else if (p.x - b.lo.x).abs() <= tol {
            Some(Side::Left)
        } else {
            None
        }
    }
}

/// Bilinear shape functions on [-1,1]^2 and their local derivatives.
pub fn q4_shape(xi: &Vec2) -> ([f64; 4], [Vec2; 4]) {
    const C: [(f64, f64); 4] = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)];
    let mut n = [0.0; 4];
    let mut d = [Vec2::zeros(); 4];
    for a in 0..4 {
        let (xa, ya) = C[a];
        n[a] = 0.25 * (1.0 + xi.x * xa) * (1.0 + xi.y * ya);
        d[a] = Vec2::new(0.25 * xa * (1.0 + xi.y * ya), 0.25 * ya * (1.0 + xi.x * xa));
    }
    (n, d)
}

/// Local coordinates of the point at parameter `s` in [0,1] along local edge
/// `k` (from corner `k` to corner `k+1`).
pub fn q4_edge_point(k: usize, s: f64) -> Vec2 {
    const C: [(f64, f64); 4] = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)];
    let (a, b) = (C[k], C[(k + 1) % 4]);
    Vec2::new(a.0 + s * (b.0 - a.0), a.1 + s * (b.1 - a.1))
}

/// A boundary edge of a solid body, directed counter-clockwise around the
/// body so that the body lies on its left.
#[derive(Clone, Debug)]
pub struct BoundaryEdge {
    pub nodes: [usize; 2],
    pub element: usize,
    pub local: usize,
    pub body: usize,
    pub coupling: bool,
    pub loop_id: usize,
    /// Reference arc length of the edge start along its loop.
    pub arc0: f64,
    pub length0: f64,
}

#[derive(Clone, Debug)]
pub struct BoundaryLoop {
    pub body: usize,
    pub edges: Vec<usize>,
    pub length: f64,
}

/// Fitted quadrilateral mesh of all solid bodies.
#[derive(Clone, Debug)]
pub struct SolidMesh {
    pub nodes: Vec<Vec2>,
    pub elements: Vec<[usize; 4]>,
    pub element_body: Vec<usize>,
    pub edge_sets: BTreeMap<String, Vec<[usize; 2]>>,
    pub body_names: Vec<String>,
    pub boundary: Vec<BoundaryEdge>,
    pub loops: Vec<BoundaryLoop>,
}

impl SolidMesh {
    /// Validates connectivity and orientation and extracts the body
    /// boundaries.
    pub fn new(
        nodes: Vec<Vec2>,
        elements: Vec<[usize; 4]>,
        element_body: Vec<usize>,
        edge_sets: BTreeMap<String, Vec<[usize; 2]>>,
        body_names: Vec<String>,
    ) -> Result<Self> {
        if elements.len() != element_body.len() {
            return Err(Error::Geometry("element/body list length mismatch".into()));
        }
        for (e, conn) in elements.iter().enumerate() {
            if conn.iter().any(|&n| n >= nodes.len()) {
                return Err(Error::Geometry(format!("element {e} references a missing node")));
            }
            if element_body[e] >= body_names.len() {
                return Err(Error::Geometry(format!("element {e} has an unknown body id")));
            }
        }
        let mut mesh = SolidMesh {
            nodes,
            elements,
            element_body,
            edge_sets,
            body_names,
            boundary: Vec::new(),
            loops: Vec::new(),
        };
        let zero = vec![0.0; 2 * mesh.nodes.len()];
        for e in 0..mesh.elements.len() {
            for (xi, _) in gauss_square(2) {
                let det = mesh.jacobian(e, &xi, &zero).determinant();
                if !(det > 0.0) {
                    return Err(Error::ElementInversion { element: e, det });
                }
            }
        }
        mesh.build_boundary()?;
        for (name, edges) in &mesh.edge_sets {
            for &[a, b] in edges {
                if mesh.find_boundary_edge(a, b).is_none() {
                    return Err(Error::Geometry(format!(
                        "edge set '{name}' contains ({a},{b}) which is not a boundary edge"
                    )));
                }
            }
        }
        Ok(mesh)
    }

    pub fn n_bodies(&self) -> usize {
        self.body_names.len()
    }

    pub fn body_id(&self, name: &str) -> Option<usize> {
        self.body_names.iter().position(|n| n == name)
    }

    fn build_boundary(&mut self) -> Result<()> {
        let mut count: BTreeMap<(usize, usize), (usize, usize, usize)> = BTreeMap::new();
        for (e, conn) in self.elements.iter().enumerate() {
            for k in 0..4 {
                let (a, b) = (conn[k], conn[(k + 1) % 4]);
                let key = (a.min(b), a.max(b));
                count.entry(key).and_modify(|c| c.0 += 1).or_insert((1, e, k));
            }
        }
        let mut edges = Vec::new();
        for (_, &(c, e, k)) in &count {
            if c == 1 {
                let conn = self.elements[e];
                let nodes = [conn[k], conn[(k + 1) % 4]];
                let length0 = (self.nodes[nodes[1]] - self.nodes[nodes[0]]).norm();
                edges.push(BoundaryEdge {
                    nodes,
                    element: e,
                    local: k,
                    body: self.element_body[e],
                    coupling: false,
                    loop_id: usize::MAX,
                    arc0: 0.0,
                    length0,
                });
            }
        }
        // Chain edges into closed loops.
        let mut by_start: BTreeMap<usize, usize> = BTreeMap::new();
        for (i, be) in edges.iter().enumerate() {
            if by_start.insert(be.nodes[0], i).is_some() {
                return Err(Error::Geometry(format!(
                    "non-manifold solid boundary at node {}",
                    be.nodes[0]
                )));
            }
        }
        let mut loops = Vec::new();
        for start in 0..edges.len() {
            if edges[start].loop_id != usize::MAX {
                continue;
            }
            let id = loops.len();
            let mut lp = Vec::new();
            let mut cur = start;
            let mut arc = 0.0;
            loop {
                edges[cur].loop_id = id;
                edges[cur].arc0 = arc;
                arc += edges[cur].length0;
                lp.push(cur);
                let next = *by_start.get(&edges[cur].nodes[1]).ok_or_else(|| {
                    Error::Geometry(format!("open solid boundary at node {}", edges[cur].nodes[1]))
                })?;
                if next == start {
                    break;
                }
                if edges[next].loop_id != usize::MAX {
                    return Err(Error::Geometry("malformed solid boundary loop".into()));
                }
                cur = next;
            }
            loops.push(BoundaryLoop {
                body: edges[start].body,
                edges: lp,
                length: arc,
            });
        }
        self.boundary = edges;
        self.loops = loops;
        Ok(())
    }

    pub fn find_boundary_edge(&self, a: usize, b: usize) -> Option<usize> {
        self.boundary
            .iter()
            .position(|e| (e.nodes[0] == a && e.nodes[1] == b) || (e.nodes[0] == b && e.nodes[1] == a))
    }

    /// Boundary edge ids belonging to a named edge set.
    pub fn edge_set(&self, name: &str) -> Result<Vec<usize>> {
        let set = self
            .edge_sets
            .get(name)
            .ok_or_else(|| Error::Config(format!("unknown edge set '{name}'")))?;
        Ok(set
            .iter()
            .map(|&[a, b]| self.find_boundary_edge(a, b).expect("validated at construction"))
            .collect())
    }

    /// Nodes touched by a named edge set, sorted and unique.
    pub fn edge_set_nodes(&self, name: &str) -> Result<Vec<usize>> {
        let mut v: Vec<usize> = self
            .edge_set(name)?
            .into_iter()
            .flat_map(|e| self.boundary[e].nodes)
            .collect();
        v.sort_unstable();
        v.dedup();
        Ok(v)
    }

    pub fn mark_coupling(&mut self, set: &str) -> Result<()> {
        for e in self.edge_set(set)? {
            self.boundary[e].coupling = true;
        }
        Ok(())
    }

    pub fn body_nodes(&self, body: usize) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .elements
            .iter()
            .zip(&self.element_body)
            .filter(|(_, &b)| b == body)
            .flat_map(|(c, _)| *c)
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Current position of node `n`.
    pub fn position(&self, n: usize, u: &[f64]) -> Vec2 {
        self.nodes[n] + Vec2::new(u[2 * n], u[2 * n + 1])
    }

    /// Jacobian of the map from local to current coordinates.
    pub fn jacobian(&self, e: usize, xi: &Vec2, u: &[f64]) -> nalgebra::Matrix2<f64> {
        let (_, d) = q4_shape(xi);
        let mut j = nalgebra::Matrix2::zeros();
        for (a, &n) in self.elements[e].iter().enumerate() {
            let x = self.position(n, u);
            j += x * d[a].transpose();
        }
        j
    }

    /// Current position of a point given in local element coordinates.
    pub fn map_point(&self, e: usize, xi: &Vec2, u: &[f64]) -> Vec2 {
        let (nn, _) = q4_shape(xi);
        self.elements[e]
            .iter()
            .zip(nn)
            .fold(Vec2::zeros(), |s, (&n, w)| s + self.position(n, u) * w)
    }

    /// Reference length of a boundary edge.
    pub fn element_size(&self, edge: usize) -> f64 {
        self.boundary[edge].length0
    }

    /// Merges several meshes into one, renumbering nodes, elements and
    /// bodies. Edge set names are kept as they are.
    pub fn merge(parts: Vec<SolidMesh>) -> Result<SolidMesh> {
        let mut nodes = Vec::new();
        let mut elements = Vec::new();
        let mut element_body = Vec::new();
        let mut edge_sets = BTreeMap::new();
        let mut body_names = Vec::new();
        let mut coupled = Vec::new();
        for m in parts {
            let (n0, b0) = (nodes.len(), body_names.len());
            coupled.extend(m.boundary.iter().filter(|b| b.coupling).map(|b| b.nodes.map(|n| n + n0)));
            nodes.extend(m.nodes.iter().copied());
            elements.extend(m.elements.iter().map(|c| c.map(|n| n + n0)));
            element_body.extend(m.element_body.iter().map(|b| b + b0));
            for name in m.body_names {
                if body_names.contains(&name) {
                    return Err(Error::Config(format!("duplicate body name '{name}'")));
                }
                body_names.push(name);
            }
            for (name, set) in m.edge_sets {
                if edge_sets.contains_key(&name) {
                    return Err(Error::Config(format!("duplicate edge set '{name}'")));
                }
                edge_sets.insert(name, set.iter().map(|e| e.map(|n| n + n0)).collect());
            }
        }
        let mut out = SolidMesh::new(nodes, elements, element_body, edge_sets, body_names)?;
        for [a, b] in coupled {
            if let Some(k) = out.find_boundary_edge(a, b) {
                out.boundary[k].coupling = true;
            }
        }
        Ok(out)
    }

    /// Structured mesh of the image of the unit square under `map`. The
    /// mapping must preserve orientation. Edge sets `bottom`, `right`, `top`
    /// and `left` are created, prefixed with the body name.
    pub fn mapped(name: &str, nx: usize, ny: usize, map: impl Fn(f64, f64) -> Vec2) -> Result<SolidMesh> {
        let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
        for j in 0..=ny {
            for i in 0..=nx {
                nodes.push(map(i as f64 / nx as f64, j as f64 / ny as f64));
            }
        }
        let id = |i: usize, j: usize| j * (nx + 1) + i;
        let mut elements = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                elements.push([id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1)]);
            }
        }
        let mut sets = BTreeMap::new();
        sets.insert(format!("{name}.bottom"), (0..nx).map(|i| [id(i, 0), id(i + 1, 0)]).collect());
        sets.insert(format!("{name}.right"), (0..ny).map(|j| [id(nx, j), id(nx, j + 1)]).collect());
        sets.insert(format!("{name}.top"), (0..nx).map(|i| [id(i + 1, ny), id(i, ny)]).collect());
        sets.insert(format!("{name}.left"), (0..ny).map(|j| [id(0, j + 1), id(0, j)]).collect());
        let ne = elements.len();
        SolidMesh::new(nodes, elements, vec![0; ne], sets, vec![name.to_string()])
    }

    pub fn rectangle(name: &str, lo: Vec2, hi: Vec2, nx: usize, ny: usize) -> Result<SolidMesh> {
        SolidMesh::mapped(name, nx, ny, |s, t| {
            Vec2::new(lo.x + s * (hi.x - lo.x), lo.y + t * (hi.y - lo.y))
        })
    }

    /// Disk meshed by mapping a square onto it. Boundary nodes lie exactly on
    /// the circle.
    pub fn disk(name: &str, center: Vec2, radius: f64, n: usize) -> Result<SolidMesh> {
        SolidMesh::mapped(name, n, n, |s, t| {
            let (x, y) = (2.0 * s - 1.0, 2.0 * t - 1.0);
            let (ax, ay) = (x.abs(), y.abs());
            // Square-to-disk map with straight rays from the centre.
            let m = ax.max(ay);
            if m == 0.0 {
                return center;
            }
            let dir = Vec2::new(x, y).normalize();
            center + dir * (radius * m)
        })
    }

    /// Reads the ASCII mesh format (sections NODES, ELEMENTS, EDGESET).
    pub fn read(path: &Path) -> Result<SolidMesh> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn parse(text: &str, origin: &str) -> Result<SolidMesh> {
        enum Sec {
            None,
            Nodes,
            Elements,
            Set(String),
        }
        let err = |line: usize, msg: String| Error::MeshParse {
            path: origin.to_string(),
            line,
            msg,
        };
        let mut sec = Sec::None;
        let mut node_ids: BTreeMap<i64, usize> = BTreeMap::new();
        let mut nodes = Vec::new();
        let mut elements = Vec::new();
        let mut raw_bodies = Vec::new();
        let mut raw_sets: Vec<(String, usize, i64, i64)> = Vec::new();
        let mut set_names: Vec<String> = Vec::new();
        for (ln, raw) in text.lines().enumerate() {
            let ln = ln + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let tok: Vec<&str> = line.split_whitespace().collect();
            match tok[0] {
                "NODES" => {
                    sec = Sec::Nodes;
                    continue;
                }
                "ELEMENTS" => {
                    sec = Sec::Elements;
                    continue;
                }
                "EDGESET" => {
                    let name = tok.get(1).ok_or_else(|| err(ln, "EDGESET needs a name".into()))?;
                    if set_names.iter().any(|n| n == name) {
                        return Err(err(ln, format!("duplicate edge set '{name}'")));
                    }
                    set_names.push(name.to_string());
                    sec = Sec::Set(name.to_string());
                    continue;
                }
                "END" => {
                    sec = Sec::None;
                    continue;
                }
                _ => {}
            }
            let int = |s: &str| s.parse::<i64>().map_err(|_| err(ln, format!("expected integer, found '{s}'")));
            let real = |s: &str| {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| err(ln, format!("expected finite number, found '{s}'")))
            };
            match &sec {
                Sec::None => return Err(err(ln, format!("data outside of a section: '{line}'"))),
                Sec::Nodes => {
                    if tok.len() != 3 {
                        return Err(err(ln, "node line must be '<id> <x> <y>'".into()));
                    }
                    let id = int(tok[0])?;
                    if node_ids.insert(id, nodes.len()).is_some() {
                        return Err(err(ln, format!("duplicate node id {id}")));
                    }
                    nodes.push(Vec2::new(real(tok[1])?, real(tok[2])?));
                }
                Sec::Elements => {
                    if tok.len() != 6 {
                        return Err(err(ln, "element line must be '<id> <body> <n1> <n2> <n3> <n4>'".into()));
                    }
                    let mut conn = [0usize; 4];
                    for k in 0..4 {
                        let id = int(tok[2 + k])?;
                        conn[k] = *node_ids.get(&id).ok_or_else(|| err(ln, format!("unknown node id {id}")))?;
                    }
                    elements.push(conn);
                    raw_bodies.push(tok[1].to_string());
                }
                Sec::Set(name) => {
                    if tok.len() != 2 {
                        return Err(err(ln, "edge line must be '<n1> <n2>'".into()));
                    }
                    raw_sets.push((name.clone(), ln, int(tok[0])?, int(tok[1])?));
                }
            }
        }
        let mut body_names: Vec<String> = Vec::new();
        let element_body = raw_bodies
            .iter()
            .map(|b| match body_names.iter().position(|n| n == b) {
                Some(i) => i,
                None => {
                    body_names.push(b.clone());
                    body_names.len() - 1
                }
            })
            .collect();
        let mut edge_sets: BTreeMap<String, Vec<[usize; 2]>> = set_names.iter().map(|n| (n.clone(), Vec::new())).collect();
        for (name, ln, a, b) in raw_sets {
            let ia = *node_ids.get(&a).ok_or_else(|| err(ln, format!("unknown node id {a}")))?;
            let ib = *node_ids.get(&b).ok_or_else(|| err(ln, format!("unknown node id {b}")))?;
            edge_sets.get_mut(&name).unwrap().push([ia, ib]);
        }
        if elements.is_empty() {
            return Err(err(0, "mesh has no elements".into()));
        }
        SolidMesh::new(nodes, elements, element_body, edge_sets, body_names)
    }

    /// Serializes in the format accepted by [`SolidMesh::parse`].
    pub fn to_ascii(&self) -> String {
        let mut s = String::new();
        s.push_str("NODES\n");
        for (i, p) in self.nodes.iter().enumerate() {
            let _ = writeln!(s, "{} {:e} {:e}", i + 1, p.x, p.y);
        }
        s.push_str("ELEMENTS\n");
        for (e, c) in self.elements.iter().enumerate() {
            let _ = writeln!(
                s,
                "{} {} {} {} {} {}",
                e + 1,
                self.body_names[self.element_body[e]],
                c[0] + 1,
                c[1] + 1,
                c[2] + 1,
                c[3] + 1
            );
        }
        for (name, set) in &self.edge_sets {
            let _ = writeln!(s, "EDGESET {name}");
            for [a, b] in set {
                let _ = writeln!(s, "{} {}", a + 1, b + 1);
            }
        }
        s
    }
}

/// Straight segment of a deformed solid boundary.
#[derive(Clone, Debug)]
pub struct InterfaceSegment {
    /// Index into [`SolidMesh::boundary`].
    pub edge: usize,
    pub body: usize,
    pub a: Vec2,
    pub b: Vec2,
    /// Outward unit normal of the body.
    pub normal: Vec2,
    pub coupling: bool,
}

impl InterfaceSegment {
    pub fn length(&self) -> f64 {
        (self.b - self.a).norm()
    }
}

/// Deformed boundary of all bodies. With `coupling_only` unset, segment `i`
/// corresponds to boundary edge `i`.
#[derive(Clone, Debug, Default)]
pub struct InterfaceMesh {
    pub segments: Vec<InterfaceSegment>,
}

fn deformed_segments(mesh: &SolidMesh, u: &[f64], coupling_only: bool) -> Result<InterfaceMesh> {
    let mut segments = Vec::with_capacity(mesh.boundary.len());
    for (i, be) in mesh.boundary.iter().enumerate() {
        if coupling_only && !be.coupling {
            continue;
        }
        let a = mesh.position(be.nodes[0], u);
        let b = mesh.position(be.nodes[1], u);
        let t = b - a;
        let len = t.norm();
        if !(len > 1e-14 * be.length0.max(f64::MIN_POSITIVE)) {
            return Err(Error::Geometry(format!("boundary edge {i} collapsed to zero length")));
        }
        segments.push(InterfaceSegment {
            edge: i,
            body: be.body,
            a,
            b,
            normal: right_normal(&t) / len,
            coupling: be.coupling,
        });
    }
    Ok(InterfaceMesh { segments })
}

/// Deformed coupling boundary of all bodies.
pub fn extract_interface(mesh: &SolidMesh, u: &[f64]) -> Result<InterfaceMesh> {
    deformed_segments(mesh, u, true)
}

/// Deformed boundary of all bodies including non-coupling edges.
pub fn extract_boundary(mesh: &SolidMesh, u: &[f64]) -> Result<InterfaceMesh> {
    deformed_segments(mesh, u, false)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_square_interface() {
        let mut m = SolidMesh::rectangle("b", Vec2::new(0.0, 0.0), Vec2::new(1.0, 1.0), 3, 3).unwrap();
        for s in ["b.bottom", "b.right", "b.top", "b.left"] {
            m.mark_coupling(s).unwrap();
        }
        let u = vec![0.0; 2 * m.nodes.len()];
        let im = extract_interface(&m, &u).unwrap();
        assert_eq!(im.segments.len(), 12);
        let total: f64 = im.segments.iter().map(|s| s.length()).sum();
        assert!((total - 4.0).abs() < 1e-14);
        for s in &im.segments {
            let mid = (s.a + s.b) * 0.5;
            // outward normal points away from the centre
            assert!((mid - Vec2::new(0.5, 0.5)).dot(&s.normal) > 0.0);
        }
        assert_eq!(m.loops.len(), 1);
        assert!((m.loops[0].length - 4.0).abs() < 1e-14);
    }

    #[test]
    fn parse_roundtrip_and_errors() {
        let m = SolidMesh::rectangle("blk", Vec2::new(0.0, 0.0), Vec2::new(2.0, 1.0), 2, 1).unwrap();
        let text = m.to_ascii();
        let back = SolidMesh::parse(&text, "mem").unwrap();
        assert_eq!(back.nodes, m.nodes);
        assert_eq!(back.elements, m.elements);
        assert_eq!(back.edge_sets, m.edge_sets);

        let bad = "NODES\n1 0 0\n2 1 0\n3 1 1\nELEMENTS\n1 a 1 2 3 9\n";
        match SolidMesh::parse(bad, "bad.msh") {
            Err(Error::MeshParse { line, .. }) => assert_eq!(line, 6),
            other => panic!("unexpected {other:?}"),
        }
        let inverted = "NODES\n1 0 0\n2 1 0\n3 1 1\n4 0 1\nELEMENTS\n1 a 1 4 3 2\n";
        assert!(matches!(
            SolidMesh::parse(inverted, "inv"),
            Err(Error::ElementInversion { element: 0, .. })
        ));
    }

    #[test]
    fn grid_locate_and_shape() {
        let g = FluidGrid::new(Vec2::new(-1.0, 0.0), Vec2::new(2.0, 1.0), 4, 2).unwrap();
        let e = g.locate(&Vec2::new(0.1, 0.7)).unwrap();
        assert_eq!(g.elem_ij(e), (2, 1));
        let (n, grad) = g.shape(e, &Vec2::new(0.1, 0.7));
        assert!((n.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(grad.iter().fold(Vec2::zeros(), |s, v| s + v).norm() < 1e-14);
        assert_eq!(g.faces().len(), 3 * 2 + 4);
    }
}
