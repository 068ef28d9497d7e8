use std::collections::HashMap;

use rayon::prelude::*;

use super::{CellMesh, MembraneMesh, Region};
use crate::geometry::DeformationMap;
use crate::linalg;
use crate::{Error, Point, Result};

const STITCH_TOL: f64 = 1e-12;

/// Which cells of a tiling keep their membrane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MembraneRule {
    /// Every cell carries a membrane.
    All,
    /// No cell carries a membrane.
    Off,
    /// A cell keeps its membrane iff its distance to the boundary of the tiled
    /// block is at least `beta` (reference units); the others form the cushion.
    Cushion { beta: f64 },
}

impl MembraneRule {
    fn keeps(&self, k: [i64; 2], origin: [i64; 2], counts: [usize; 2]) -> bool {
        match *self {
            MembraneRule::All => true,
            MembraneRule::Off => false,
            MembraneRule::Cushion { beta } => {
                let lo = [k[0] - origin[0], k[1] - origin[1]];
                let hi = [
                    origin[0] + counts[0] as i64 - 1 - k[0],
                    origin[1] + counts[1] as i64 - 1 - k[1],
                ];
                let d = lo[0].min(lo[1]).min(hi[0]).min(hi[1]);
                d as f64 >= beta
            }
        }
    }
}

/// Tiles `counts` cells starting at lattice cell `origin`, deforms each cell by
/// `map`, scales by `scale` and stitches shared boundary nodes.
fn tile(
    cell: &CellMesh,
    map: &DeformationMap,
    origin: [i64; 2],
    counts: [usize; 2],
    scale: f64,
    rule: MembraneRule,
) -> Result<MembraneMesh> {
    if !map.is_cellwise() {
        return Err(Error::InvalidInput(
            "tiling requires a map that fixes cell boundaries".into(),
        ));
    }
    let base = &cell.mesh;
    let n_s = cell.side_divisions as i64;
    let cell_ids: Vec<[i64; 2]> = (0..counts[1] as i64)
        .flat_map(|j| (0..counts[0] as i64).map(move |i| [origin[0] + i, origin[1] + j]))
        .collect();

    // deform cells independently
    let deformed: Vec<Vec<(Point, Point)>> = cell_ids
        .par_iter()
        .map(|&k| {
            base.nodes
                .iter()
                .map(|p| {
                    let y = [k[0] as f64 + p[0], k[1] as f64 + p[1]];
                    let x = map.apply_in_cell(k, y);
                    (y, [scale * x[0], scale * x[1]])
                })
                .collect()
        })
        .collect();

    // interface minus copy -> plus copy, for cells without membrane
    let mut merge_to = vec![usize::MAX; base.num_nodes()];
    for &[p, m] in &base.interface_pairs {
        merge_to[m] = p;
    }

    let mut nodes = Vec::new();
    let mut reference = Vec::new();
    let mut triangles = Vec::with_capacity(cell_ids.len() * base.num_triangles());
    let mut regions = Vec::with_capacity(triangles.capacity());
    let mut cells = Vec::with_capacity(triangles.capacity());
    let mut interface_pairs = Vec::new();
    let mut interface_edges = Vec::new();
    let mut shared: HashMap<[i64; 2], usize> = HashMap::new();
    let mut boundary = Vec::new();
    let lo = [origin[0] * n_s, origin[1] * n_s];
    let hi = [
        (origin[0] + counts[0] as i64) * n_s,
        (origin[1] + counts[1] as i64) * n_s,
    ];

    let mut local = vec![0usize; base.num_nodes()];
    for (c, &k) in cell_ids.iter().enumerate() {
        let membrane = rule.keeps(k, origin, counts);
        for v in 0..base.num_nodes() {
            if !membrane && merge_to[v] != usize::MAX {
                continue;
            }
            let (y, x) = deformed[c][v];
            if let Some(g) = cell.lattice[v] {
                let key = [k[0] * n_s + g[0] as i64, k[1] * n_s + g[1] as i64];
                if let Some(&id) = shared.get(&key) {
                    let d = linalg::dist(nodes[id], x);
                    if d > STITCH_TOL * scale.max(1.0) {
                        return Err(Error::StitchFailure { key, distance: d });
                    }
                    local[v] = id;
                    continue;
                }
                let id = nodes.len();
                shared.insert(key, id);
                if key[0] == lo[0] || key[0] == hi[0] || key[1] == lo[1] || key[1] == hi[1] {
                    boundary.push(id);
                }
                local[v] = id;
            } else {
                local[v] = nodes.len();
            }
            nodes.push(x);
            reference.push(y);
        }
        if !membrane {
            for v in 0..base.num_nodes() {
                if merge_to[v] != usize::MAX {
                    local[v] = local[merge_to[v]];
                }
            }
        }
        for (t, tri) in base.triangles.iter().enumerate() {
            triangles.push(tri.map(|v| local[v]));
            regions.push(if membrane { base.regions[t] } else { Region::Plus });
            cells.push(k);
        }
        if membrane {
            let first = interface_pairs.len();
            for &[p, m] in &base.interface_pairs {
                interface_pairs.push([local[p], local[m]]);
            }
            for &[a, b] in &base.interface_edges {
                interface_edges.push([first + a, first + b]);
            }
        }
    }
    boundary.sort_unstable();
    Ok(MembraneMesh {
        nodes,
        reference,
        triangles,
        regions,
        cells,
        interface_pairs,
        interface_edges,
        boundary,
        h: base.h,
        scale,
    })
}

/// Mesh of `D = (0,1)²` made of the `n × n` cells `ε Φ(Y_k)`, `n = 1/ε`.
/// `eps_inverse` is `n`.
pub fn tile_domain_mesh(
    cell: &CellMesh,
    map: &DeformationMap,
    eps_inverse: usize,
    rule: MembraneRule,
) -> Result<MembraneMesh> {
    if eps_inverse == 0 {
        return Err(Error::InvalidInput("1/ε must be a positive integer".into()));
    }
    tile(
        cell,
        map,
        [0, 0],
        [eps_inverse, eps_inverse],
        1.0 / eps_inverse as f64,
        rule,
    )
}

/// Mesh of `Φ(Q_n)`, `Q_n = (−n, n)²`, with a membrane in every cell and the
/// outer boundary tagged for Dirichlet data.
pub fn build_truncated_mesh(cell: &CellMesh, map: &DeformationMap, n: usize) -> Result<MembraneMesh> {
    if n == 0 {
        return Err(Error::InvalidInput("truncation half-width must be ≥ 1".into()));
    }
    build_window_mesh(cell, map, [-(n as i64), -(n as i64)], 2 * n)
}

/// Mesh of `Φ(o + (0, size)²)` with membranes everywhere; `build_truncated_mesh`
/// is the case `o = (−n, −n)`, `size = 2n`.
pub fn build_window_mesh(
    cell: &CellMesh,
    map: &DeformationMap,
    origin: [i64; 2],
    size: usize,
) -> Result<MembraneMesh> {
    build_window_mesh_with(cell, map, origin, size, MembraneRule::All)
}

pub fn build_window_mesh_with(
    cell: &CellMesh,
    map: &DeformationMap,
    origin: [i64; 2],
    size: usize,
    rule: MembraneRule,
) -> Result<MembraneMesh> {
    if size == 0 {
        return Err(Error::InvalidInput("window must contain a cell".into()));
    }
    tile(cell, map, origin, [size, size], 1.0, rule)
}
