use std::collections::{HashMap, HashSet};

use super::cell::min_angle;
use super::{MembraneMesh, Region};
use crate::linalg;
use crate::{Error, Result};

/// Quality and consistency record of a mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshReport {
    pub num_nodes: usize,
    pub num_triangles: usize,
    pub num_interface_edges: usize,
    /// Smallest interior angle, degrees.
    pub min_angle_deg: f64,
    /// Largest ratio of longest edge to shortest altitude (2/√3 for an
    /// equilateral triangle).
    pub max_aspect: f64,
    pub inverted_triangles: usize,
    /// Edges violating conformity: shared by more than two triangles, shared
    /// across regions, or open without being on the boundary or the interface.
    pub nonconforming_edges: usize,
    /// Largest distance between the two copies of an interface node.
    pub pairing_residual: f64,
    pub area: f64,
}

impl MeshReport {
    pub fn conforming(&self) -> bool {
        self.nonconforming_edges == 0 && self.inverted_triangles == 0
    }

    /// All checks, with the minimum angle compared against `min_angle_deg`.
    pub fn passes_with(&self, min_angle_deg: f64) -> bool {
        self.conforming() && self.pairing_residual <= 1e-12 && self.min_angle_deg >= min_angle_deg
    }

    pub fn passes(&self) -> bool {
        self.passes_with(20.0)
    }
}

pub fn mesh_report(mesh: &MembraneMesh) -> Result<MeshReport> {
    if mesh.triangles.is_empty() || mesh.nodes.is_empty() {
        return Err(Error::InvalidInput("empty mesh".into()));
    }
    let mut min_ang = f64::INFINITY;
    let mut max_aspect: f64 = 0.0;
    let mut inverted = 0;
    let mut edges: HashMap<[usize; 2], Vec<Region>> = HashMap::new();
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let v = mesh.vertices(t);
        let area = mesh.triangle_area(t);
        if area <= 0.0 {
            inverted += 1;
        }
        min_ang = min_ang.min(min_angle(&v));
        let longest = (0..3)
            .map(|i| linalg::dist(v[i], v[(i + 1) % 3]))
            .fold(0.0, f64::max);
        max_aspect = max_aspect.max(longest * longest / (2.0 * area.abs()));
        for i in 0..3 {
            let (a, b) = (tri[i], tri[(i + 1) % 3]);
            edges.entry([a.min(b), a.max(b)]).or_default().push(mesh.regions[t]);
        }
    }

    let boundary: HashSet<usize> = mesh.boundary.iter().copied().collect();
    let mut interface: HashSet<[usize; 2]> = HashSet::new();
    for e in 0..mesh.interface_edges.len() {
        let [[p0, m0], [p1, m1]] = mesh.interface_edge_nodes(e);
        interface.insert([p0.min(p1), p0.max(p1)]);
        interface.insert([m0.min(m1), m0.max(m1)]);
    }
    let mut bad = 0;
    for (key, regs) in &edges {
        let ok = match regs.len() {
            1 => {
                (boundary.contains(&key[0]) && boundary.contains(&key[1])) || interface.contains(key)
            }
            2 => regs[0] == regs[1] && !interface.contains(key),
            _ => false,
        };
        if !ok {
            bad += 1;
        }
    }
    // every interface edge must border exactly one triangle on each side
    for key in &interface {
        if edges.get(key).map(|r| r.len()) != Some(1) {
            bad += 1;
        }
    }

    let pairing = mesh
        .interface_pairs
        .iter()
        .map(|&[p, m]| linalg::dist(mesh.nodes[p], mesh.nodes[m]))
        .fold(0.0, f64::max);

    Ok(MeshReport {
        num_nodes: mesh.num_nodes(),
        num_triangles: mesh.num_triangles(),
        num_interface_edges: mesh.interface_edges.len(),
        min_angle_deg: min_ang,
        max_aspect,
        inverted_triangles: inverted,
        nonconforming_edges: bad,
        pairing_residual: pairing,
        area: mesh.area(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{DeformationMap, InterfaceSpec};
    use crate::mesh::{build_cell_mesh, build_truncated_mesh, tile_domain_mesh, MembraneRule};

    #[test]
    fn generated_meshes_pass() {
        let spec = InterfaceSpec::default();
        for h in [0.25, 0.1] {
            let c = build_cell_mesh(&spec, h).unwrap();
            assert!(mesh_report(&c.mesh).unwrap().passes());
        }
        let c = build_cell_mesh(&spec, 0.1).unwrap();
        let m = tile_domain_mesh(&c, &DeformationMap::Identity, 4, MembraneRule::Cushion { beta: 0.25 }).unwrap();
        assert!(mesh_report(&m).unwrap().passes());
        let m = build_truncated_mesh(&c, &DeformationMap::bernoulli(3, 0.1), 2).unwrap();
        let r = mesh_report(&m).unwrap();
        assert!(r.conforming() && r.pairing_residual == 0.0, "{r:?}");
        assert!(r.min_angle_deg > 15.0);
    }

    #[test]
    fn perturbed_pair_is_flagged() {
        let mut c = build_cell_mesh(&InterfaceSpec::default(), 0.1).unwrap();
        let [_, m] = c.mesh.interface_pairs[3];
        c.mesh.nodes[m][0] += 1e-6;
        let r = mesh_report(&c.mesh).unwrap();
        assert!(r.pairing_residual > 1e-7);
        assert!(!r.passes());
    }

    #[test]
    fn open_crack_is_flagged() {
        let mut c = build_cell_mesh(&InterfaceSpec::default(), 0.1).unwrap();
        c.mesh.interface_edges.pop();
        assert!(!mesh_report(&c.mesh).unwrap().conforming());
    }

    #[test]
    fn empty_mesh_rejected() {
        let c = build_cell_mesh(&InterfaceSpec::default(), 0.1).unwrap();
        let mut m = c.mesh;
        m.triangles.clear();
        assert!(mesh_report(&m).is_err());
    }
}
