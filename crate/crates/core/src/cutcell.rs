//! Intersection of the fluid grid with the deformed solid boundaries.
//!
//! The physical fluid domain is the grid box minus the union of all bodies.
//! Every grid element is clipped against that union, the resulting fluid
//! polygons are triangulated for volume quadrature, and the coupling
//! boundaries are split into interface quadrature samples that are labelled
//! as fluid-wetted, solid-covered (overlap or island) or dry.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::geom::{
    collinear_overlap, cross, point_in_polygon, point_segment_distance, polygon_area, polygon_centroid,
    ray_segment, segment_intersection, Rect, Vec2,
};
use crate::mesh::{extract_boundary, q4_edge_point, FluidGrid, InterfaceMesh, Side, SolidMesh};
use crate::quadrature::{gauss_legendre, gauss_square, map_triangle, triangle_rule};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ElementClass {
    Fluid,
    Cut,
    Void,
}

#[derive(Clone, Debug)]
pub struct CutParams {
    /// Geometric tolerance relative to the grid size.
    pub tol: f64,
    /// Fluid components whose bounding box is smaller than this multiple of
    /// the grid size are treated as solid-covered.
    pub island_ratio: f64,
    /// Polynomial degree of the triangle rule on cut elements.
    pub volume_degree: usize,
    /// Gauss points per interface piece.
    pub interface_points: usize,
    /// Factor on `interface_points` for pieces near or in contact.
    pub contact_multiplier: usize,
    /// Gauss points per direction on uncut elements.
    pub fluid_points: usize,
}

impl Default for CutParams {
    fn default() -> Self {
        CutParams {
            tol: 1e-10,
            island_ratio: 2.0,
            volume_degree: 5,
            interface_points: 2,
            contact_multiplier: 2,
            fluid_points: 2,
        }
    }
}

/// Which side of an interface sample carries the coupling.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SampleSide {
    /// Wetted by physical fluid.
    Fsi,
    /// Covered by another body or by a removed fluid island; fluid
    /// quantities come from the nearest wetted sample of the same body.
    Contact,
    /// Outside the fluid grid; no fluid quantities at all.
    Dry,
}

/// Closest point projection of a sample onto another body along the normal.
#[derive(Clone, Copy, Debug)]
pub struct Partner {
    pub body: usize,
    pub edge: usize,
    pub element: usize,
    pub xi: Vec2,
    pub point: Vec2,
    pub normal: Vec2,
}

#[derive(Clone, Debug)]
pub struct InterfaceSample {
    pub body: usize,
    pub edge: usize,
    pub element: usize,
    pub xi: Vec2,
    pub x: Vec2,
    pub normal: Vec2,
    pub weight: f64,
    pub side: SampleSide,
    pub fluid_elem: Option<usize>,
    pub loop_id: usize,
    /// Reference arc-length coordinate along the boundary loop.
    pub arc: f64,
    /// Signed normal gap; infinite when no opposing surface is found.
    pub gap: f64,
    pub partner: Option<Partner>,
    /// For `Contact` samples: index of the wetted sample providing the
    /// extended fluid quantities.
    pub ext_source: Option<usize>,
}

/// Part of a grid boundary side bounding physical fluid.
#[derive(Clone, Copy, Debug)]
pub struct BoundaryPiece {
    pub elem: usize,
    pub side: Side,
    pub a: Vec2,
    pub b: Vec2,
}

#[derive(Clone, Debug)]
pub struct CutPiece {
    pub elem: usize,
    pub polygon: Vec<Vec2>,
}

#[derive(Clone, Debug, Default)]
pub struct CutState {
    pub class: Vec<ElementClass>,
    /// Void elements kept active to carry retained unknowns.
    pub extension: Vec<bool>,
    pub pieces: Vec<CutPiece>,
    /// Volume quadrature of cut elements (empty for other elements).
    pub volume_qp: Vec<Vec<(Vec2, f64)>>,
    pub samples: Vec<InterfaceSample>,
    pub boundary_pieces: Vec<BoundaryPiece>,
    /// Indices into `FluidGrid::faces()`.
    pub cip_faces: Vec<usize>,
    pub ghost_faces: Vec<usize>,
    pub active_nodes: Vec<bool>,
    pub removed_islands: usize,
    pub boundary: InterfaceMesh,
}

impl CutState {
    pub fn n_active(&self) -> usize {
        self.active_nodes.iter().filter(|&&a| a).count()
    }

    pub fn is_physical(&self, e: usize) -> bool {
        self.class[e] != ElementClass::Void
    }

    /// Quadrature points of element `e` (standard Gauss on uncut elements).
    pub fn element_qp(&self, grid: &FluidGrid, e: usize, fluid_points: usize) -> Vec<(Vec2, f64)> {
        match self.class[e] {
            ElementClass::Void => Vec::new(),
            ElementClass::Cut => self.volume_qp[e].clone(),
            ElementClass::Fluid => {
                let r = grid.elem_rect(e);
                let c = r.center();
                let (hx, hy) = (0.5 * grid.hx, 0.5 * grid.hy);
                gauss_square(fluid_points)
                    .into_iter()
                    .map(|(xi, w)| (c + Vec2::new(xi.x * hx, xi.y * hy), w * hx * hy))
                    .collect()
            }
        }
    }

    /// Physical fluid area.
    pub fn fluid_area(&self, grid: &FluidGrid, fluid_points: usize) -> f64 {
        (0..self.class.len())
            .flat_map(|e| self.element_qp(grid, e, fluid_points))
            .map(|(_, w)| w)
            .sum()
    }
}

/// Sub-segment of a body boundary edge after splitting at crossings with
/// other bodies.
#[derive(Clone, Copy, Debug)]
struct SubSeg {
    seg: usize,
    t0: f64,
    t1: f64,
    p0: Vec2,
    p1: Vec2,
    overlapped: bool,
}

struct Geometry {
    bnd: InterfaceMesh,
    /// Segment ids per body.
    body_segs: Vec<Vec<usize>>,
    tol: f64,
}

impl Geometry {
    fn inside_body(&self, p: &Vec2, body: usize) -> bool {
        let segs = &self.body_segs[body];
        for &s in segs {
            let sg = &self.bnd.segments[s];
            if point_segment_distance(p, &sg.a, &sg.b).0 <= self.tol {
                return false;
            }
        }
        crate::geom::winding_number(p, segs.iter().map(|&s| (&self.bnd.segments[s].a, &self.bnd.segments[s].b))) != 0
    }

    fn inside_any(&self, p: &Vec2) -> bool {
        (0..self.body_segs.len()).any(|b| self.inside_body(p, b))
    }
}

/// Splits all boundary edges at crossings with other bodies and marks the
/// pieces lying inside another body.
fn split_overlaps(geo: &Geometry) -> Vec<SubSeg> {
    let segs = &geo.bnd.segments;
    let tol = geo.tol;
    let bbox = |i: usize| {
        let s = &segs[i];
        (s.a.inf(&s.b), s.a.sup(&s.b))
    };
    let mut out = Vec::with_capacity(segs.len());
    for i in 0..segs.len() {
        let (lo_i, hi_i) = bbox(i);
        let mut ts = vec![0.0, 1.0];
        for j in 0..segs.len() {
            if segs[j].body == segs[i].body {
                continue;
            }
            let (lo_j, hi_j) = bbox(j);
            if lo_j.x > hi_i.x + tol || lo_j.y > hi_i.y + tol || hi_j.x < lo_i.x - tol || hi_j.y < lo_i.y - tol {
                continue;
            }
            let (a, b, c, d) = (&segs[i].a, &segs[i].b, &segs[j].a, &segs[j].b);
            if let Some((t, _)) = segment_intersection(a, b, c, d, tol) {
                ts.push(t);
            } else if let Some([tc, td]) = collinear_overlap(a, b, c, d, tol) {
                ts.extend([tc, td].into_iter().filter(|t| *t > 0.0 && *t < 1.0));
            }
        }
        ts.sort_by(|a, b| a.total_cmp(b));
        let len = segs[i].length();
        ts.dedup_by(|a, b| (*a - *b) * len <= tol);
        if let Some(last) = ts.last_mut() {
            *last = 1.0;
        }
        for w in ts.windows(2) {
            let (t0, t1) = (w[0], w[1]);
            let p0 = segs[i].a + (segs[i].b - segs[i].a) * t0;
            let p1 = segs[i].a + (segs[i].b - segs[i].a) * t1;
            let mid = (p0 + p1) * 0.5;
            let body = segs[i].body;
            let overlapped = (0..geo.body_segs.len()).any(|b| b != body && geo.inside_body(&mid, b));
            out.push(SubSeg {
                seg: i,
                t0,
                t1,
                p0,
                p1,
                overlapped,
            });
        }
    }
    out
}

#[derive(Clone, Copy)]
struct Edge {
    from: usize,
    to: usize,
}

/// Traces the fluid polygons of one element. `cuts` are the clipped union
/// boundary pieces already oriented with fluid on their left.
fn trace_element(rect: &Rect, cuts: &[(Vec2, Vec2)], geo: &Geometry, elem: usize) -> Result<Vec<Vec<Vec2>>> {
    let tol = geo.tol;
    let mut verts: Vec<Vec2> = Vec::new();
    let vid = |p: Vec2, verts: &mut Vec<Vec2>| -> usize {
        if let Some(i) = verts.iter().position(|q| (q - p).norm() <= 10.0 * tol) {
            i
        } else {
            verts.push(p);
            verts.len() - 1
        }
    };
    let mut edges: Vec<Edge> = Vec::new();
    let mut splits: Vec<f64> = Vec::new();
    let per = rect.perimeter();
    for &(a, b) in cuts {
        let (ia, ib) = (vid(a, &mut verts), vid(b, &mut verts));
        if ia == ib {
            continue;
        }
        edges.push(Edge { from: ia, to: ib });
        for p in [a, b] {
            if let Some(s) = rect.perimeter_coord(&p, 10.0 * tol) {
                splits.push(s);
            }
        }
    }
    let w = rect.hi.x - rect.lo.x;
    let h = rect.hi.y - rect.lo.y;
    splits.extend([0.0, w, w + h, 2.0 * w + h]);
    splits.sort_by(|a, b| a.total_cmp(b));
    splits.dedup_by(|a, b| (*a - *b).abs() <= 10.0 * tol);
    let n = splits.len();
    let delta = 1e-7 * w.min(h);
    for k in 0..n {
        let s0 = splits[k];
        let s1 = if k + 1 < n { splits[k + 1] } else { per };
        if s1 - s0 <= 10.0 * tol {
            continue;
        }
        let sm = 0.5 * (s0 + s1);
        let inward = if sm < w {
            Vec2::new(0.0, 1.0)
        } else if sm < w + h {
            Vec2::new(-1.0, 0.0)
        } else if sm < 2.0 * w + h {
            Vec2::new(0.0, -1.0)
        } else {
            Vec2::new(1.0, 0.0)
        };
        let probe = rect.perimeter_point(sm) + inward * delta.min(0.25 * (s1 - s0));
        if !geo.inside_any(&probe) {
            let a = vid(rect.perimeter_point(s0), &mut verts);
            let b = vid(rect.perimeter_point(s1), &mut verts);
            if a != b {
                edges.push(Edge { from: a, to: b });
            }
        }
    }
    let mut used = vec![false; edges.len()];
    let mut polys = Vec::new();
    for start in 0..edges.len() {
        if used[start] {
            continue;
        }
        used[start] = true;
        let v0 = edges[start].from;
        let mut poly = vec![verts[v0]];
        let mut cur = start;
        let mut guard = 0;
        while edges[cur].to != v0 {
            guard += 1;
            if guard > 4 * edges.len() + 4 {
                return Err(Error::Geometry(format!("cut polygon tracing did not close in element {elem}")));
            }
            let v = edges[cur].to;
            poly.push(verts[v]);
            let din = verts[v] - verts[edges[cur].from];
            let back = -din;
            let mut best: Option<(f64, usize)> = None;
            for (k, e) in edges.iter().enumerate() {
                if used[k] || e.from != v {
                    continue;
                }
                let dout = verts[e.to] - verts[v];
                // Clockwise angle from the reversed incoming direction.
                let mut ang = cross(&dout, &back).atan2(back.dot(&dout));
                if ang <= 1e-12 {
                    ang += 2.0 * std::f64::consts::PI;
                }
                if best.map_or(true, |(b, _)| ang < b) {
                    best = Some((ang, k));
                }
            }
            let Some((_, next)) = best else {
                return Err(Error::Geometry(format!("open cut polygon in element {elem}")));
            };
            used[next] = true;
            cur = next;
        }
        let area = polygon_area(&poly);
        if area > 1e-12 * rect.area() {
            polys.push(poly);
        } else if area < -1e-12 * rect.area() {
            return Err(Error::Geometry(format!(
                "solid boundary encloses a hole inside fluid element {elem}"
            )));
        }
    }
    Ok(polys)
}

/// Triangulates a counter-clockwise simple polygon.
pub fn triangulate(poly: &[Vec2]) -> Vec<[Vec2; 3]> {
    let c = polygon_centroid(poly);
    let n = poly.len();
    let fan: Vec<[Vec2; 3]> = (0..n).map(|i| [c, poly[i], poly[(i + 1) % n]]).collect();
    let area_tol = 1e-14 * polygon_area(poly).abs();
    if fan.iter().all(|t| cross(&(t[1] - t[0]), &(t[2] - t[0])) > -area_tol) {
        return fan;
    }
    // Ear clipping.
    let mut idx: Vec<usize> = (0..n).collect();
    let mut tris = Vec::with_capacity(n.saturating_sub(2));
    let mut guard = 0;
    while idx.len() > 3 && guard < 10 * n * n {
        guard += 1;
        let m = idx.len();
        let mut clipped = false;
        for k in 0..m {
            let (ia, ib, ic) = (idx[(k + m - 1) % m], idx[k], idx[(k + 1) % m]);
            let (a, b, cc) = (poly[ia], poly[ib], poly[ic]);
            let ar = cross(&(b - a), &(cc - a));
            if ar < -area_tol {
                continue;
            }
            let tri = [a, b, cc];
            let blocked = idx
                .iter()
                .any(|&j| j != ia && j != ib && j != ic && ar > area_tol && strictly_inside(&poly[j], &tri));
            if blocked {
                continue;
            }
            if ar > area_tol {
                tris.push(tri);
            }
            idx.remove(k);
            clipped = true;
            break;
        }
        if !clipped {
            break;
        }
    }
    if idx.len() == 3 {
        let t = [poly[idx[0]], poly[idx[1]], poly[idx[2]]];
        if cross(&(t[1] - t[0]), &(t[2] - t[0])) > area_tol {
            tris.push(t);
        }
    }
    tris
}

fn strictly_inside(p: &Vec2, t: &[Vec2; 3]) -> bool {
    (0..3).all(|i| cross(&(t[(i + 1) % 3] - t[i]), &(p - t[i])) > 0.0)
}

/// Intervals along each rectangle side covered by polygon edges.
fn side_intervals(poly: &[Vec2], rect: &Rect, tol: f64) -> [Vec<(f64, f64)>; 4] {
    let mut out: [Vec<(f64, f64)>; 4] = Default::default();
    let n = poly.len();
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        let on = |v: f64, c: f64| (v - c).abs() <= tol;
        let (k, lo, hi) = if on(a.y, rect.lo.y) && on(b.y, rect.lo.y) {
            (0, a.x.min(b.x), a.x.max(b.x))
        } else if on(a.x, rect.hi.x) && on(b.x, rect.hi.x) {
            (1, a.y.min(b.y), a.y.max(b.y))
        } else if on(a.y, rect.hi.y) && on(b.y, rect.hi.y) {
            (2, a.x.min(b.x), a.x.max(b.x))
        } else if on(a.x, rect.lo.x) && on(b.x, rect.lo.x) {
            (3, a.y.min(b.y), a.y.max(b.y))
        } else {
            continue;
        };
        if hi - lo > tol {
            out[k].push((lo, hi));
        }
    }
    out
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, i: usize) -> usize {
        let mut r = i;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut c = i;
        while self.0[c] != r {
            let nx = self.0[c];
            self.0[c] = r;
            c = nx;
        }
        r
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.0[hi] = lo;
        }
    }
}

/// Projects `x` along `n` onto the closest facing coupling segment of
/// another body within distance `reach`.
pub fn normal_gap(
    x: &Vec2,
    n: &Vec2,
    body: usize,
    bnd: &InterfaceMesh,
    mesh: &SolidMesh,
    reach: f64,
) -> (f64, Option<Partner>) {
    let mut best: Option<(f64, Partner)> = None;
    for sg in &bnd.segments {
        if sg.body == body || !sg.coupling || sg.normal.dot(n) >= 0.0 {
            continue;
        }
        if let Some((s, t)) = ray_segment(x, n, &sg.a, &sg.b) {
            if s.abs() > reach {
                continue;
            }
            if best.as_ref().map_or(true, |(b, _)| s.abs() < b.abs()) {
                let be = &mesh.boundary[sg.edge];
                best = Some((
                    s,
                    Partner {
                        body: sg.body,
                        edge: sg.edge,
                        element: be.element,
                        xi: q4_edge_point(be.local, t),
                        point: sg.a + (sg.b - sg.a) * t,
                        normal: sg.normal,
                    },
                ));
            }
        }
    }
    match best {
        Some((s, p)) => (s, Some(p)),
        None => (f64::INFINITY, None),
    }
}

/// Builds the complete cut description for the current solid displacement.
///
/// `retained` marks grid nodes that must keep their unknowns even if they
/// left the physical domain.
pub fn build_cut_state(
    grid: Option<&FluidGrid>,
    mesh: &SolidMesh,
    u: &[f64],
    params: &CutParams,
    retained: Option<&[bool]>,
) -> Result<CutState> {
    let bnd = extract_boundary(mesh, u)?;
    let mut body_segs = vec![Vec::new(); mesh.n_bodies()];
    for (i, s) in bnd.segments.iter().enumerate() {
        body_segs[s.body].push(i);
    }
    let h = grid.map_or_else(
        || bnd.segments.iter().map(|s| s.length()).fold(f64::INFINITY, f64::min),
        |g| g.h(),
    );
    let geo = Geometry {
        bnd,
        body_segs,
        tol: params.tol * h,
    };
    let subs = split_overlaps(&geo);
    let mut cs = CutState::default();

    let mut kept_polys: Vec<Vec<Vec<Vec2>>> = Vec::new();
    if let Some(grid) = grid {
        let ne = grid.n_elements();
        // Bin union boundary pieces into elements.
        let mut per_elem: BTreeMap<usize, Vec<(Vec2, Vec2)>> = BTreeMap::new();
        for ss in subs.iter().filter(|s| !s.overlapped) {
            let (lo, hi) = (ss.p0.inf(&ss.p1), ss.p0.sup(&ss.p1));
            let Some((i0, i1, j0, j1)) = grid.elem_range(&lo, &hi) else {
                continue;
            };
            for j in j0..=j1 {
                for i in i0..=i1 {
                    let e = grid.elem_id(i, j);
                    let r = grid.elem_rect(e);
                    let Some((s0, s1)) = r.clip_segment(&ss.p0, &ss.p1) else {
                        continue;
                    };
                    let q0 = ss.p0 + (ss.p1 - ss.p0) * s0;
                    let q1 = ss.p0 + (ss.p1 - ss.p0) * s1;
                    if (q1 - q0).norm() <= 10.0 * geo.tol {
                        continue;
                    }
                    let on_same_side = [0usize, 1, 2, 3].iter().any(|&k| {
                        let (a, b) = match k {
                            0 => (q0.y - r.lo.y, q1.y - r.lo.y),
                            1 => (q0.x - r.hi.x, q1.x - r.hi.x),
                            2 => (q0.y - r.hi.y, q1.y - r.hi.y),
                            _ => (q0.x - r.lo.x, q1.x - r.lo.x),
                        };
                        a.abs() <= 10.0 * geo.tol && b.abs() <= 10.0 * geo.tol
                    });
                    if on_same_side {
                        continue;
                    }
                    // Fluid lies to the right of a body boundary; reverse.
                    per_elem.entry(e).or_default().push((q1, q0));
                }
            }
        }
        kept_polys = vec![Vec::new(); ne];
        for e in 0..ne {
            let r = grid.elem_rect(e);
            match per_elem.get(&e) {
                Some(cuts) => kept_polys[e] = trace_element(&r, cuts, &geo, e)?,
                None => {
                    if !geo.inside_any(&r.center()) {
                        kept_polys[e] = vec![r.corners().to_vec()];
                    }
                }
            }
        }
        // Fluid islands.
        let mut ids: Vec<(usize, usize)> = Vec::new();
        let mut first = vec![0usize; ne + 1];
        for e in 0..ne {
            first[e] = ids.len();
            for k in 0..kept_polys[e].len() {
                ids.push((e, k));
            }
        }
        first[ne] = ids.len();
        let ftol = 10.0 * geo.tol;
        let intervals: Vec<[Vec<(f64, f64)>; 4]> = ids
            .iter()
            .map(|&(e, k)| side_intervals(&kept_polys[e][k], &grid.elem_rect(e), ftol))
            .collect();
        let mut uf = UnionFind((0..ids.len()).collect());
        for f in grid.faces() {
            let vertical = f.normal.x != 0.0;
            let (sl, sr) = if vertical { (1, 3) } else { (2, 0) };
            for p in first[f.left]..first[f.left + 1] {
                for q in first[f.right]..first[f.right + 1] {
                    let touching = intervals[p][sl]
                        .iter()
                        .any(|a| intervals[q][sr].iter().any(|b| a.1.min(b.1) - a.0.max(b.0) > ftol));
                    if touching {
                        uf.union(p, q);
                    }
                }
            }
        }
        let mut comp_box: BTreeMap<usize, (Vec2, Vec2)> = BTreeMap::new();
        for (p, &(e, k)) in ids.iter().enumerate() {
            let root = uf.find(p);
            let entry = comp_box
                .entry(root)
                .or_insert((Vec2::repeat(f64::INFINITY), Vec2::repeat(f64::NEG_INFINITY)));
            for v in &kept_polys[e][k] {
                entry.0 = entry.0.inf(v);
                entry.1 = entry.1.sup(v);
            }
        }
        let small: Vec<usize> = comp_box
            .iter()
            .filter(|(_, (lo, hi))| (hi - lo).max() < params.island_ratio * h)
            .map(|(&r, _)| r)
            .collect();
        cs.removed_islands = small.len();
        let mut remove = vec![false; ids.len()];
        for p in 0..ids.len() {
            if small.contains(&uf.find(p)) {
                remove[p] = true;
            }
        }
        for e in (0..ne).rev() {
            for k in (0..kept_polys[e].len()).rev() {
                if remove[first[e] + k] {
                    kept_polys[e].remove(k);
                }
            }
        }
        // Classification and volume quadrature.
        cs.class = vec![ElementClass::Void; ne];
        cs.volume_qp = vec![Vec::new(); ne];
        let rule = triangle_rule(params.volume_degree);
        for e in 0..ne {
            let polys = &kept_polys[e];
            if polys.is_empty() {
                continue;
            }
            let r = grid.elem_rect(e);
            let area: f64 = polys.iter().map(|p| polygon_area(p)).sum();
            if polys.len() == 1 && (area - r.area()).abs() <= 1e-12 * r.area() {
                cs.class[e] = ElementClass::Fluid;
            } else {
                cs.class[e] = ElementClass::Cut;
                for p in polys {
                    for t in triangulate(p) {
                        map_triangle(&t, &rule, &mut cs.volume_qp[e]);
                    }
                }
            }
            for p in polys {
                cs.pieces.push(CutPiece {
                    elem: e,
                    polygon: p.clone(),
                });
                let n = p.len();
                for i in 0..n {
                    let (a, b) = (p[i], p[(i + 1) % n]);
                    if (b - a).norm() <= ftol {
                        continue;
                    }
                    if let Some(side) = Side::ALL
                        .into_iter()
                        .find(|&sd| on_side(grid, &a, sd, ftol) && on_side(grid, &b, sd, ftol))
                    {
                        // Pieces on a body boundary are covered by interface samples.
                        let mid = (a + b) * 0.5;
                        let on_body = geo
                            .bnd
                            .segments
                            .iter()
                            .any(|sg| point_segment_distance(&mid, &sg.a, &sg.b).0 <= ftol);
                        if on_body {
                            continue;
                        }
                        cs.boundary_pieces.push(BoundaryPiece { elem: e, side, a, b });
                    }
                }
            }
        }
    }

    // Interface samples.
    let sample_tol = geo.tol;
    let g1 = gauss_legendre(params.interface_points);
    let gc = gauss_legendre(params.interface_points * params.contact_multiplier.max(1));
    let mut samples: Vec<InterfaceSample> = Vec::new();
    for ss in &subs {
        let sg = &geo.bnd.segments[ss.seg];
        if !sg.coupling {
            continue;
        }
        // Break points at grid lines.
        let mut ts = vec![ss.t0, ss.t1];
        if let Some(grid) = grid.filter(|_| !ss.overlapped) {
            let d = sg.b - sg.a;
            let b = grid.bounds();
            if d.x.abs() > 0.0 {
                for i in 0..=grid.nx {
                    let x = b.lo.x + i as f64 * grid.hx;
                    let t = (x - sg.a.x) / d.x;
                    if t > ss.t0 && t < ss.t1 {
                        ts.push(t);
                    }
                }
            }
            if d.y.abs() > 0.0 {
                for j in 0..=grid.ny {
                    let y = b.lo.y + j as f64 * grid.hy;
                    let t = (y - sg.a.y) / d.y;
                    if t > ss.t0 && t < ss.t1 {
                        ts.push(t);
                    }
                }
            }
            ts.sort_by(|a, b| a.total_cmp(b));
            ts.dedup_by(|a, b| (*a - *b) * sg.length() <= sample_tol);
            *ts.last_mut().unwrap() = ss.t1;
        }
        let be = &mesh.boundary[sg.edge];
        for w in ts.windows(2) {
            let (t0, t1) = (w[0], w[1]);
            let len = (t1 - t0) * sg.length();
            if len <= sample_tol {
                continue;
            }
            let mid = sg.a + (sg.b - sg.a) * (0.5 * (t0 + t1));
            let (side, fluid_elem) = if ss.overlapped {
                (SampleSide::Contact, None)
            } else if let Some(grid) = grid {
                let probe = mid + sg.normal * (1e-6 * h);
                match grid.locate(&probe) {
                    None => (SampleSide::Dry, None),
                    Some(e) => {
                        if kept_polys[e].iter().any(|p| point_in_polygon(&probe, p)) {
                            (SampleSide::Fsi, Some(e))
                        } else {
                            (SampleSide::Contact, None)
                        }
                    }
                }
            } else {
                (SampleSide::Dry, None)
            };
            let near_contact = side != SampleSide::Fsi || {
                let (g, _) = normal_gap(&mid, &sg.normal, sg.body, &geo.bnd, mesh, 2.0 * h);
                g < h
            };
            let rule = if near_contact { &gc } else { &g1 };
            for &(q, wq) in rule.iter() {
                let t = t0 + 0.5 * (q + 1.0) * (t1 - t0);
                let x = sg.a + (sg.b - sg.a) * t;
                let (gap, partner) = normal_gap(&x, &sg.normal, sg.body, &geo.bnd, mesh, 2.0 * h);
                samples.push(InterfaceSample {
                    body: sg.body,
                    edge: sg.edge,
                    element: be.element,
                    xi: q4_edge_point(be.local, t),
                    x,
                    normal: sg.normal,
                    weight: 0.5 * wq * len,
                    side,
                    fluid_elem,
                    loop_id: be.loop_id,
                    arc: be.arc0 + t * be.length0,
                    gap,
                    partner,
                    ext_source: None,
                });
            }
        }
    }
    // Extension sources for solid-covered samples.
    let mut wet_by_loop: BTreeMap<usize, Vec<(f64, usize)>> = BTreeMap::new();
    for (i, s) in samples.iter().enumerate() {
        if s.side == SampleSide::Fsi {
            wet_by_loop.entry(s.loop_id).or_default().push((s.arc, i));
        }
    }
    for v in wet_by_loop.values_mut() {
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    for i in 0..samples.len() {
        if samples[i].side != SampleSide::Contact {
            continue;
        }
        let s = &samples[i];
        let lp = &mesh.loops[s.loop_id];
        // Bodies without wetted samples (rigid or fully dry) keep no source;
        // `check_extension` decides whether that is an error.
        let Some(wet) = wet_by_loop.get(&s.loop_id) else {
            continue;
        };
        let pos = wet.partition_point(|&(a, _)| a < s.arc);
        let cand = [pos % wet.len(), (pos + wet.len() - 1) % wet.len()];
        let dist = |a: f64| {
            let d = (a - s.arc).abs();
            d.min(lp.length - d)
        };
        let best = cand
            .iter()
            .min_by(|&&a, &&b| dist(wet[a].0).total_cmp(&dist(wet[b].0)).then(a.cmp(&b)))
            .unwrap();
        samples[i].ext_source = Some(wet[*best].1);
    }
    cs.samples = samples;

    // Faces and active unknowns.
    if let Some(grid) = grid {
        let ne = grid.n_elements();
        cs.extension = vec![false; ne];
        let mut active = vec![false; grid.n_nodes()];
        for e in 0..ne {
            if cs.class[e] != ElementClass::Void {
                for n in grid.elem_nodes(e) {
                    active[n] = true;
                }
            }
        }
        if let Some(ret) = retained {
            for e in 0..ne {
                if cs.class[e] == ElementClass::Void && grid.elem_nodes(e).iter().any(|&n| ret[n] && !active[n]) {
                    cs.extension[e] = true;
                }
            }
            for e in 0..ne {
                if cs.extension[e] {
                    for n in grid.elem_nodes(e) {
                        active[n] = true;
                    }
                }
            }
        }
        let in_active = |e: usize| cs.class[e] != ElementClass::Void || cs.extension[e];
        let near_bnd = |e: usize| cs.class[e] == ElementClass::Cut || cs.extension[e];
        for (k, f) in grid.faces().iter().enumerate() {
            if in_active(f.left) && in_active(f.right) {
                cs.cip_faces.push(k);
                if near_bnd(f.left) || near_bnd(f.right) {
                    cs.ghost_faces.push(k);
                }
            }
        }
        cs.active_nodes = active;
    }
    cs.boundary = geo.bnd;
    Ok(cs)
}

fn on_side(grid: &FluidGrid, p: &Vec2, side: Side, tol: f64) -> bool {
    let b = grid.bounds();
    match side {
        Side::Bottom => (p.y - b.lo.y).abs() <= tol,
        Side::Right => (p.x - b.hi.x).abs() <= tol,
        Side::Top => (p.y - b.hi.y).abs() <= tol,
        Side::Left => (p.x - b.lo.x).abs() <= tol,
    }
}

/// Fails if an elastic body has solid-covered samples but no wetted sample
/// to extend fluid quantities from.
pub fn check_extension(cs: &CutState, rigid: &[bool]) -> Result<()> {
    for s in &cs.samples {
        if s.side == SampleSide::Contact && s.ext_source.is_none() && !rigid[s.body] {
            return Err(Error::Extension {
                body: s.body,
                msg: "no wetted interface sample to extend fluid quantities from".into(),
            });
        }
    }
    Ok(())
}
