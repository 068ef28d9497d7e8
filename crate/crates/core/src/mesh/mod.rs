//! Conforming triangulations with duplicated interface nodes.
//!
//! A reference cell is meshed once ([`build_cell_mesh`]) and then deformed
//! vertex-wise and stitched into domain or truncated-cube meshes
//! ([`tile_domain_mesh`], [`build_truncated_mesh`]).

mod cell;
mod io;
mod report;
mod tile;

pub use cell::{build_cell_mesh, interface_node_count, CellMesh};
pub use io::{read_mesh, write_mesh};
pub use report::{mesh_report, MeshReport};
pub use tile::{build_truncated_mesh, build_window_mesh, build_window_mesh_with, tile_domain_mesh, MembraneRule};

use crate::quadrature::triangle_area;
use crate::Point;

/// Side of the membrane a triangle or node belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    Plus,
    Minus,
}

impl Region {
    pub fn tag(self) -> &'static str {
        match self {
            Region::Plus => "P",
            Region::Minus => "M",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "P" => Some(Region::Plus),
            "M" => Some(Region::Minus),
            _ => None,
        }
    }
}

/// A triangulation of a union of (deformed, rescaled) cells.
///
/// Interface nodes come in pairs with identical coordinates: the PLUS copy is
/// used by triangles outside the inclusion and the MINUS copy by triangles
/// inside. `interface_edges` index into `interface_pairs` and run
/// counter-clockwise around each inclusion, so the outward normal of the
/// MINUS region is the tangent rotated clockwise.
#[derive(Debug, Clone, PartialEq)]
pub struct MembraneMesh {
    /// Physical vertex coordinates.
    pub nodes: Vec<Point>,
    /// Lattice (pre-deformation, unscaled) coordinates of every vertex.
    pub reference: Vec<Point>,
    /// Counter-clockwise vertex triples.
    pub triangles: Vec<[usize; 3]>,
    pub regions: Vec<Region>,
    /// Source cell of every triangle.
    pub cells: Vec<[i64; 2]>,
    /// `[plus_node, minus_node]`.
    pub interface_pairs: Vec<[usize; 2]>,
    pub interface_edges: Vec<[usize; 2]>,
    /// Sorted ids of nodes on the outer boundary.
    pub boundary: Vec<usize>,
    /// Target edge length in reference cell units.
    pub h: f64,
    /// Physical length of one lattice cell (ε for domain meshes).
    pub scale: f64,
}

impl MembraneMesh {
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn vertices(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.nodes[a], self.nodes[b], self.nodes[c]]
    }

    pub fn reference_vertices(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.reference[a], self.reference[b], self.reference[c]]
    }

    pub fn reference_centroid(&self, t: usize) -> Point {
        let v = self.reference_vertices(t);
        [
            (v[0][0] + v[1][0] + v[2][0]) / 3.0,
            (v[0][1] + v[1][1] + v[2][1]) / 3.0,
        ]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        triangle_area(&self.vertices(t))
    }

    pub fn area(&self) -> f64 {
        (0..self.num_triangles()).map(|t| self.triangle_area(t)).sum()
    }

    pub fn region_area(&self, region: Region) -> f64 {
        (0..self.num_triangles())
            .filter(|&t| self.regions[t] == region)
            .map(|t| self.triangle_area(t))
            .sum()
    }

    /// Endpoints `[(plus, minus), (plus, minus)]` of interface edge `e`.
    pub fn interface_edge_nodes(&self, e: usize) -> [[usize; 2]; 2] {
        let [i, j] = self.interface_edges[e];
        [self.interface_pairs[i], self.interface_pairs[j]]
    }

    pub fn interface_edge_length(&self, e: usize) -> f64 {
        let [[a, _], [b, _]] = self.interface_edge_nodes(e);
        crate::linalg::dist(self.nodes[a], self.nodes[b])
    }

    pub fn interface_length(&self) -> f64 {
        (0..self.interface_edges.len())
            .map(|e| self.interface_edge_length(e))
            .sum()
    }

    /// Region of each node; interface pairs contribute one node per side.
    pub fn node_regions(&self) -> Vec<Region> {
        let mut out = vec![Region::Plus; self.num_nodes()];
        for (t, tri) in self.triangles.iter().enumerate() {
            if self.regions[t] == Region::Minus {
                for &v in tri {
                    out[v] = Region::Minus;
                }
            }
        }
        out
    }

    /// Distinct source cells carrying a membrane, in sorted order.
    pub fn membrane_cells(&self) -> Vec<[i64; 2]> {
        let mut cells: Vec<[i64; 2]> = self
            .regions
            .iter()
            .zip(&self.cells)
            .filter(|(r, _)| **r == Region::Minus)
            .map(|(_, k)| *k)
            .collect();
        cells.sort_unstable_by_key(|k| (k[1], k[0]));
        cells.dedup();
        cells
    }

    pub fn is_boundary_node(&self, v: usize) -> bool {
        self.boundary.binary_search(&v).is_ok()
    }
}

/// Membrane-free uniform mesh of `(0,1)²` with `n × n` squares, each split
/// along its rising diagonal. Square `(i, j)` holds triangles `2(j n + i)`
/// (below the diagonal) and `2(j n + i) + 1`.
pub fn unit_square_mesh(n: usize) -> MembraneMesh {
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut nodes = Vec::with_capacity((n + 1) * (n + 1));
    let mut boundary = Vec::new();
    for j in 0..=n {
        for i in 0..=n {
            nodes.push([i as f64 / n as f64, j as f64 / n as f64]);
            if i == 0 || j == 0 || i == n || j == n {
                boundary.push(id(i, j));
            }
        }
    }
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            triangles.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            triangles.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    let nt = triangles.len();
    MembraneMesh {
        reference: nodes.clone(),
        nodes,
        triangles,
        regions: vec![Region::Plus; nt],
        cells: vec![[0, 0]; nt],
        interface_pairs: Vec::new(),
        interface_edges: Vec::new(),
        boundary,
        h: 1.0 / n as f64,
        scale: 1.0,
    }
}
