use std::f64::consts::{FRAC_PI_4, PI};

use super::{MembraneMesh, Region};
use crate::geometry::InterfaceSpec;
use crate::linalg;
use crate::quadrature::triangle_area;
use crate::{Error, Point, Result};

const MIN_ANGLE_DEG: f64 = 20.0;
const SMOOTHING_SWEEPS: usize = 50;
const DOUBLING_TRIGGER: f64 = 1.4;
const DOUBLING_THICKNESS: f64 = 0.7;

/// A meshed reference cell `[0,1]²`.
#[derive(Debug, Clone, PartialEq)]
pub struct CellMesh {
    pub mesh: MembraneMesh,
    pub spec: InterfaceSpec,
    /// Number of boundary segments per cell side.
    pub side_divisions: usize,
    /// Integer lattice position `(gx, gy) ∈ [0, side_divisions]²` of every
    /// node on `∂Y`; the node sits at `(gx, gy) / side_divisions`.
    pub lattice: Vec<Option<[u32; 2]>>,
}

/// Number of interface nodes for a circle of radius `r` at target size `h`:
/// enough for spacing `h` and chordal error `h²`, at least 8, rounded up to a
/// multiple of 4.
pub fn interface_node_count(r: f64, h: f64) -> usize {
    let by_length = (2.0 * PI * r / h).ceil();
    let by_chord = PI / (1.0 - h * h / r).max(-1.0).acos();
    let n = (by_length.max(by_chord.ceil()).max(8.0)) as usize;
    n.div_ceil(4) * 4
}

#[derive(Clone, Copy)]
enum Curve {
    Circle { center: Point, radius: f64 },
    Square { center: Point, half: f64 },
}

impl Curve {
    /// Counter-clockwise parametrization over `s ∈ [0,1)` starting in the
    /// direction −45° from the center.
    fn at(&self, s: f64) -> Point {
        match *self {
            Curve::Circle { center, radius } => {
                let a = -FRAC_PI_4 + 2.0 * PI * s;
                [center[0] + radius * a.cos(), center[1] + radius * a.sin()]
            }
            Curve::Square { center, half } => {
                let u = 4.0 * s.rem_euclid(1.0);
                let side = (u.floor() as usize).min(3);
                let f = u - side as f64;
                let (cx, cy, a) = (center[0], center[1], half);
                match side {
                    0 => [cx + a, cy - a + 2.0 * a * f],
                    1 => [cx + a - 2.0 * a * f, cy + a],
                    2 => [cx - a, cy + a - 2.0 * a * f],
                    _ => [cx - a + 2.0 * a * f, cy - a],
                }
            }
        }
    }
}

#[derive(Default)]
struct Builder {
    nodes: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    regions: Vec<Region>,
}

impl Builder {
    fn node(&mut self, p: Point) -> usize {
        self.nodes.push(p);
        self.nodes.len() - 1
    }

    fn tri(&mut self, mut t: [usize; 3], region: Region) {
        let area = triangle_area(&[self.nodes[t[0]], self.nodes[t[1]], self.nodes[t[2]]]);
        if area < 0.0 {
            t.swap(1, 2);
        }
        self.triangles.push(t);
        self.regions.push(region);
    }

    fn min_angle(&self, t: [usize; 3]) -> f64 {
        min_angle(&[self.nodes[t[0]], self.nodes[t[1]], self.nodes[t[2]]])
    }

    /// Splits a quadrilateral (vertices in cyclic order) along the diagonal
    /// with the better minimum angle, or into four triangles around the
    /// centroid when both diagonals are equally good. The tie rule keeps
    /// mirror-symmetric quads symmetric.
    fn quad(&mut self, q: [usize; 4], region: Region) {
        let d02 = self.min_angle([q[0], q[1], q[2]]).min(self.min_angle([q[0], q[2], q[3]]));
        let d13 = self.min_angle([q[0], q[1], q[3]]).min(self.min_angle([q[1], q[2], q[3]]));
        if (d02 - d13).abs() <= 1e-9 * d02.max(d13) {
            let p = q.map(|i| self.nodes[i]);
            let c = self.node([
                (p[0][0] + p[1][0] + p[2][0] + p[3][0]) / 4.0,
                (p[0][1] + p[1][1] + p[2][1] + p[3][1]) / 4.0,
            ]);
            for i in 0..4 {
                self.tri([q[i], q[(i + 1) % 4], c], region);
            }
        } else if d02 > d13 {
            self.tri([q[0], q[1], q[2]], region);
            self.tri([q[0], q[2], q[3]], region);
        } else {
            self.tri([q[0], q[1], q[3]], region);
            self.tri([q[1], q[2], q[3]], region);
        }
    }

    /// Jacobi-style Laplacian smoothing of the nodes not marked `fixed`; a move
    /// is kept only if it improves the worst angle of the incident triangles.
    /// Proposals use the previous positions only, so the result does not
    /// depend on node order and mesh symmetries are preserved.
    fn smooth(&mut self, fixed: &[bool], iterations: usize) {
        let n = self.nodes.len();
        let mut incident: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (t, tri) in self.triangles.iter().enumerate() {
            for &v in tri {
                incident[v].push(t);
            }
        }
        let mut neighbours: Vec<Vec<usize>> = vec![Vec::new(); n];
        for tri in &self.triangles {
            for i in 0..3 {
                for j in 0..3 {
                    if i != j {
                        neighbours[tri[i]].push(tri[j]);
                    }
                }
            }
        }
        for list in &mut neighbours {
            list.sort_unstable();
            list.dedup();
        }
        let local_quality = |nodes: &[Point], v: usize, p: Point| -> f64 {
            incident[v]
                .iter()
                .map(|&t| {
                    let tri = self.triangles[t];
                    let mut pts = tri.map(|i| nodes[i]);
                    for (k, &i) in tri.iter().enumerate() {
                        if i == v {
                            pts[k] = p;
                        }
                    }
                    if triangle_area(&pts) <= 0.0 {
                        return -1.0;
                    }
                    min_angle(&pts)
                })
                .fold(f64::INFINITY, f64::min)
        };
        for _ in 0..iterations {
            let old = self.nodes.clone();
            let mut moved = false;
            for v in 0..n {
                if fixed[v] || neighbours[v].is_empty() {
                    continue;
                }
                let k = neighbours[v].len() as f64;
                let mut c = [0.0, 0.0];
                for &u in &neighbours[v] {
                    c[0] += old[u][0] / k;
                    c[1] += old[u][1] / k;
                }
                if local_quality(&old, v, c) > local_quality(&old, v, old[v]) + 1e-12 {
                    self.nodes[v] = c;
                    moved = true;
                }
            }
            if !moved {
                break;
            }
        }
    }

    /// Meshes the disk inside the interface with concentric rings, halving the
    /// ring count where the rings get fine and closing with a fan around the
    /// center. Returns the ids of the outermost ring (the interface nodes).
    fn polar_disk(&mut self, center: Point, radius: f64, circle: &[Point], h: f64) -> Vec<usize> {
        let region = Region::Minus;
        let outer: Vec<usize> = circle.iter().map(|&p| self.node(p)).collect();
        let on_ring = |rho: f64, count: usize, j: usize| -> Point {
            let a = -FRAC_PI_4 + 2.0 * PI * j as f64 / count as f64;
            [center[0] + rho * a.cos(), center[1] + rho * a.sin()]
        };
        let mut ring = outer.clone();
        let mut rho = radius;
        loop {
            let count = ring.len();
            let spacing = 2.0 * PI * rho / count as f64;
            if count <= 12 {
                let hub = self.node(center);
                for j in 0..count {
                    self.tri([ring[j], ring[(j + 1) % count], hub], region);
                }
                return outer;
            }
            if spacing < h / DOUBLING_TRIGGER || count == 16 {
                let inner_count = if count % 8 == 0 {
                    count / 2
                } else {
                    4 << ((count / 4).ilog2())
                };
                let inner_rho = rho / (1.0 + 2.0 * PI * DOUBLING_THICKNESS * 2.0 / count as f64);
                let inner: Vec<usize> = (0..inner_count)
                    .map(|j| self.node(on_ring(inner_rho, inner_count, j)))
                    .collect();
                if 2 * inner_count == count {
                    for j in 0..inner_count {
                        let a0 = inner[j];
                        let a1 = inner[(j + 1) % inner_count];
                        let b0 = ring[2 * j];
                        let bm = ring[2 * j + 1];
                        let b1 = ring[(2 * j + 2) % count];
                        self.tri([a0, b0, bm], region);
                        self.tri([a0, bm, a1], region);
                        self.tri([a1, bm, b1], region);
                    }
                } else {
                    self.merge_rings(&inner, &ring, region);
                }
                ring = inner;
                rho = inner_rho;
                continue;
            }
            let inner_rho = rho - spacing;
            let inner: Vec<usize> = (0..count).map(|j| self.node(on_ring(inner_rho, count, j))).collect();
            for j in 0..count {
                let k = (j + 1) % count;
                self.quad([inner[j], ring[j], ring[k], inner[k]], region);
            }
            ring = inner;
            rho = inner_rho;
        }
    }

    /// Triangulates the band between two rings of different counts whose
    /// first nodes share the same direction, advancing by angle.
    fn merge_rings(&mut self, inner: &[usize], outer: &[usize], region: Region) {
        let (ni, no) = (inner.len(), outer.len());
        let (mut i, mut j) = (0, 0);
        while i < ni || j < no {
            let next_i = (i + 1) as f64 / ni as f64;
            let next_o = (j + 1) as f64 / no as f64;
            if j < no && (i == ni || next_o <= next_i) {
                self.tri([inner[i % ni], outer[j], outer[(j + 1) % no]], region);
                j += 1;
            } else {
                self.tri([inner[i], outer[j % no], inner[(i + 1) % ni]], region);
                i += 1;
            }
        }
    }

    /// Fills the annulus between two closed curves. `inner` holds the node ids
    /// of the inner curve at `s_j = j / inner.len()`; the outer curve is
    /// sampled at `outer_points` (its count is `inner.len() · 2^k`). Returns
    /// the ids of the outer ring.
    fn ring_stack(
        &mut self,
        inner: Vec<usize>,
        inner_curve: Curve,
        outer_curve: Curve,
        outer_points: &[Point],
        h: f64,
        region: Region,
    ) -> Vec<usize> {
        let n_outer = outer_points.len();
        let blend = |s: f64, t: f64| -> Point {
            let a = inner_curve.at(s);
            let b = outer_curve.at(s);
            [(1.0 - t) * a[0] + t * b[0], (1.0 - t) * a[1] + t * b[1]]
        };
        let probe = 4 * n_outer;
        let gap = (0..probe)
            .map(|j| {
                let s = j as f64 / probe as f64;
                linalg::dist(inner_curve.at(s), outer_curve.at(s))
            })
            .sum::<f64>()
            / probe as f64;
        let spacing = |t: f64, count: usize| -> f64 {
            let pts: Vec<Point> = (0..count).map(|j| blend(j as f64 / count as f64, t)).collect();
            (0..count)
                .map(|j| linalg::dist(pts[j], pts[(j + 1) % count]))
                .sum::<f64>()
                / count as f64
        };

        let mut ring = inner;
        let mut t = 0.0;
        loop {
            let count = ring.len();
            let left = (n_outer / count).trailing_zeros() as i32;
            let d = spacing(t, count);
            let rem = 1.0 - t;
            if left > 0 {
                let need = DOUBLING_THICKNESS * d * (2.0 - 2f64.powi(1 - left)) * 1.5;
                if d >= DOUBLING_TRIGGER * h || rem * gap <= need + d {
                    let mut dt = DOUBLING_THICKNESS * d / gap;
                    let last = left == 1 && rem <= dt + 0.5 * d / gap;
                    if last {
                        dt = rem;
                    }
                    let next: Vec<usize> = if last {
                        outer_points.iter().map(|&p| self.node(p)).collect()
                    } else {
                        (0..2 * count)
                            .map(|j| {
                                let p = blend(j as f64 / (2 * count) as f64, t + dt);
                                self.node(p)
                            })
                            .collect()
                    };
                    for j in 0..count {
                        let a0 = ring[j];
                        let a1 = ring[(j + 1) % count];
                        let b0 = next[2 * j];
                        let bm = next[2 * j + 1];
                        let b1 = next[(2 * j + 2) % (2 * count)];
                        self.tri([a0, b0, bm], region);
                        self.tri([a0, bm, a1], region);
                        self.tri([a1, bm, b1], region);
                    }
                    ring = next;
                    t += dt;
                    if last {
                        return ring;
                    }
                    continue;
                }
            }
            let mut dt = d / gap;
            let last = left == 0 && rem <= 1.5 * dt;
            if last {
                dt = rem;
            }
            let next: Vec<usize> = if last {
                outer_points.iter().map(|&p| self.node(p)).collect()
            } else {
                (0..count)
                    .map(|j| {
                        let p = blend(j as f64 / count as f64, t + dt);
                        self.node(p)
                    })
                    .collect()
            };
            for j in 0..count {
                let k = (j + 1) % count;
                self.quad([ring[j], next[j], next[k], ring[k]], region);
            }
            ring = next;
            t += dt;
            if last {
                return ring;
            }
        }
    }
}

/// Smallest interior angle of a triangle, in degrees.
pub(crate) fn min_angle(v: &[Point; 3]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..3 {
        let a = linalg::sub(v[(i + 1) % 3], v[i]);
        let b = linalg::sub(v[(i + 2) % 3], v[i]);
        let cos = linalg::dot(a, b) / (linalg::norm(a) * linalg::norm(b));
        best = best.min(cos.clamp(-1.0, 1.0).acos().to_degrees());
    }
    best
}

/// Meshes the unit cell with the circle `spec` as a chain of mesh edges.
///
/// The mesh is symmetric under the dihedral group of the square whenever the
/// circle is centered: an O-grid of rings runs from the circle out to `∂Y`
/// (doubling the node count where the rings get coarse) and from a small
/// square grid out to the circle inside the inclusion. Nodes on `∂Y` sit on
/// an integer lattice so that neighbouring cells stitch node to node.
pub fn build_cell_mesh(spec: &InterfaceSpec, h: f64) -> Result<CellMesh> {
    if !(h > 0.0 && h <= 0.25) {
        return Err(Error::MeshQualityFailure(format!(
            "target size h = {h} outside (0, 0.25]"
        )));
    }
    let r = spec.radius;
    let c = spec.center;
    let n_if = interface_node_count(r, h);

    // outer ring count: n_if · 2^m with boundary spacing at most 1.5 h
    let mut n_box = n_if;
    while 4.0 / n_box as f64 > 1.5 * h {
        n_box *= 2;
    }
    let side_divisions = n_box / 4;

    let circle = Curve::Circle { center: c, radius: r };
    let circle_points: Vec<Point> = (0..n_if).map(|j| circle.at(j as f64 / n_if as f64)).collect();
    let mut b = Builder::default();
    let minus_ring = b.polar_disk(c, r, &circle_points, h);
    let plus_ring: Vec<usize> = circle_points.iter().map(|&p| b.node(p)).collect();

    let n_s = side_divisions;
    let lattice_ring: Vec<[u32; 2]> = (0..n_box)
        .map(|j| {
            let side = j / n_s;
            let i = (j % n_s) as u32;
            let n = n_s as u32;
            match side {
                0 => [n, i],
                1 => [n - i, n],
                2 => [0, n - i],
                _ => [i, 0],
            }
        })
        .collect();
    let box_points: Vec<Point> = lattice_ring
        .iter()
        .map(|g| [g[0] as f64 / n_s as f64, g[1] as f64 / n_s as f64])
        .collect();
    let first_box = b.nodes.len();
    let box_ring = b.ring_stack(
        plus_ring.clone(),
        circle,
        Curve::Square { center: [0.5, 0.5], half: 0.5 },
        &box_points,
        h,
        Region::Plus,
    );
    debug_assert!(box_ring[0] >= first_box);

    let mut lattice = vec![None; b.nodes.len()];
    for (id, key) in box_ring.iter().zip(&lattice_ring) {
        lattice[*id] = Some(*key);
    }
    let mut boundary: Vec<usize> = box_ring.clone();
    boundary.sort_unstable();

    let mut fixed = vec![false; b.nodes.len()];
    for &v in minus_ring.iter().chain(&plus_ring).chain(&box_ring) {
        fixed[v] = true;
    }
    b.smooth(&fixed, SMOOTHING_SWEEPS);

    let worst = b
        .triangles
        .iter()
        .map(|&t| b.min_angle(t))
        .fold(f64::INFINITY, f64::min);
    if worst < MIN_ANGLE_DEG {
        return Err(Error::MeshQualityFailure(format!(
            "minimum angle {worst:.2}° below {MIN_ANGLE_DEG}° (h = {h}, r = {r})"
        )));
    }

    let interface_pairs: Vec<[usize; 2]> = plus_ring
        .iter()
        .zip(&minus_ring)
        .map(|(&p, &m)| [p, m])
        .collect();
    let interface_edges = (0..n_if).map(|j| [j, (j + 1) % n_if]).collect();
    let n_tri = b.triangles.len();
    let mesh = MembraneMesh {
        reference: b.nodes.clone(),
        nodes: b.nodes,
        triangles: b.triangles,
        regions: b.regions,
        cells: vec![[0, 0]; n_tri],
        interface_pairs,
        interface_edges,
        boundary,
        h,
        scale: 1.0,
    };
    Ok(CellMesh {
        mesh,
        spec: *spec,
        side_divisions,
        lattice,
    })
}
