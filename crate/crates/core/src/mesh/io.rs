//! Plain-text mesh format.
//!
//! ```text
//! membrane-mesh v1
//! V <count>          then `x y` per node
//! T <count>          then `i j k tag cell_kx cell_ky` (tag P or M)
//! IE <count>         then `plus_node minus_node`
//! B <count>          then one node id per line
//! R <count>          optional: lattice coordinates `x y` per node
//! META <h> <scale>   optional
//! ```
//!
//! Floats are written in shortest round-trip form, so reading back a written
//! mesh reproduces it bit for bit.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use super::{MembraneMesh, Region};
use crate::{Error, Point, Result};

const HEADER: &str = "membrane-mesh v1";

pub fn write_mesh<W: Write>(mesh: &MembraneMesh, mut w: W) -> Result<()> {
    writeln!(w, "{HEADER}")?;
    writeln!(w, "V {}", mesh.num_nodes())?;
    for p in &mesh.nodes {
        writeln!(w, "{:?} {:?}", p[0], p[1])?;
    }
    writeln!(w, "T {}", mesh.num_triangles())?;
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let k = mesh.cells[t];
        writeln!(
            w,
            "{} {} {} {} {} {}",
            tri[0],
            tri[1],
            tri[2],
            mesh.regions[t].tag(),
            k[0],
            k[1]
        )?;
    }
    writeln!(w, "IE {}", mesh.interface_pairs.len())?;
    for [p, m] in &mesh.interface_pairs {
        writeln!(w, "{p} {m}")?;
    }
    writeln!(w, "B {}", mesh.boundary.len())?;
    for b in &mesh.boundary {
        writeln!(w, "{b}")?;
    }
    writeln!(w, "R {}", mesh.reference.len())?;
    for p in &mesh.reference {
        writeln!(w, "{:?} {:?}", p[0], p[1])?;
    }
    writeln!(w, "META {:?} {:?}", mesh.h, mesh.scale)?;
    Ok(())
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    line: usize,
}

impl<R: BufRead> Lines<R> {
    fn next(&mut self) -> Result<Option<String>> {
        loop {
            match self.inner.next() {
                None => return Ok(None),
                Some(l) => {
                    self.line += 1;
                    let l = l?;
                    if !l.trim().is_empty() {
                        return Ok(Some(l));
                    }
                }
            }
        }
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::Format {
            line: self.line,
            message: message.into(),
        }
    }

    fn expect(&mut self) -> Result<String> {
        self.next()?.ok_or_else(|| self.err("unexpected end of file"))
    }

    fn section(&mut self, name: &str) -> Result<usize> {
        let l = self.expect()?;
        self.section_from(&l, name)
    }

    fn section_from(&self, l: &str, name: &str) -> Result<usize> {
        let mut it = l.split_whitespace();
        if it.next() != Some(name) {
            return Err(self.err(format!("expected section `{name}`")));
        }
        it.next()
            .and_then(|c| c.parse().ok())
            .ok_or_else(|| self.err(format!("bad count for section `{name}`")))
    }

    fn fields<const N: usize>(&mut self) -> Result<[String; N]> {
        let l = self.expect()?;
        let parts: Vec<String> = l.split_whitespace().map(str::to_owned).collect();
        parts
            .try_into()
            .map_err(|_| self.err(format!("expected {N} fields")))
    }

    fn parse<T: std::str::FromStr>(&self, s: &str) -> Result<T> {
        s.parse().map_err(|_| self.err(format!("cannot parse `{s}`")))
    }

    fn points(&mut self, count: usize) -> Result<Vec<Point>> {
        (0..count)
            .map(|_| {
                let [x, y] = self.fields::<2>()?;
                Ok([self.parse(&x)?, self.parse(&y)?])
            })
            .collect()
    }
}

pub fn read_mesh<R: BufRead>(r: R) -> Result<MembraneMesh> {
    let mut lines = Lines {
        inner: r.lines(),
        line: 0,
    };
    if lines.expect()?.trim() != HEADER {
        return Err(lines.err(format!("missing `{HEADER}` header")));
    }
    let nv = lines.section("V")?;
    let nodes = lines.points(nv)?;

    let nt = lines.section("T")?;
    let mut triangles = Vec::with_capacity(nt);
    let mut regions = Vec::with_capacity(nt);
    let mut cells = Vec::with_capacity(nt);
    for _ in 0..nt {
        let [a, b, c, tag, kx, ky] = lines.fields::<6>()?;
        let tri: [usize; 3] = [lines.parse(&a)?, lines.parse(&b)?, lines.parse(&c)?];
        if tri.iter().any(|&v| v >= nv) {
            return Err(lines.err("node index out of range"));
        }
        triangles.push(tri);
        regions.push(Region::from_tag(&tag).ok_or_else(|| lines.err(format!("bad region tag `{tag}`")))?);
        cells.push([lines.parse(&kx)?, lines.parse(&ky)?]);
    }

    let ni = lines.section("IE")?;
    let mut interface_pairs = Vec::with_capacity(ni);
    for _ in 0..ni {
        let [p, m] = lines.fields::<2>()?;
        let pair: [usize; 2] = [lines.parse(&p)?, lines.parse(&m)?];
        if pair.iter().any(|&v| v >= nv) {
            return Err(lines.err("node index out of range"));
        }
        interface_pairs.push(pair);
    }

    let nb = lines.section("B")?;
    let mut boundary = Vec::with_capacity(nb);
    for _ in 0..nb {
        let [b] = lines.fields::<1>()?;
        boundary.push(lines.parse(&b)?);
    }

    let mut reference = nodes.clone();
    let mut h = f64::NAN;
    let mut scale = 1.0;
    while let Some(l) = lines.next()? {
        if l.starts_with("R ") {
            let nr = lines.section_from(&l, "R")?;
            if nr != nv {
                return Err(lines.err("reference count differs from node count"));
            }
            reference = lines.points(nr)?;
        } else if l.starts_with("META") {
            let parts: Vec<&str> = l.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(lines.err("expected `META h scale`"));
            }
            h = lines.parse(parts[1])?;
            scale = lines.parse(parts[2])?;
        } else {
            return Err(lines.err(format!("unknown section `{l}`")));
        }
    }

    let interface_edges = interface_edges_from_triangles(&triangles, &regions, &interface_pairs);
    Ok(MembraneMesh {
        nodes,
        reference,
        triangles,
        regions,
        cells,
        interface_pairs,
        interface_edges,
        boundary,
        h,
        scale,
    })
}

/// Recovers the counter-clockwise interface edges: open edges of the MINUS
/// region joining two MINUS copies, ordered by their starting pair.
fn interface_edges_from_triangles(
    triangles: &[[usize; 3]],
    regions: &[Region],
    pairs: &[[usize; 2]],
) -> Vec<[usize; 2]> {
    let pair_of: HashMap<usize, usize> = pairs.iter().enumerate().map(|(i, p)| (p[1], i)).collect();
    let mut count: HashMap<[usize; 2], usize> = HashMap::new();
    for (tri, r) in triangles.iter().zip(regions) {
        if *r == Region::Minus {
            for i in 0..3 {
                let (a, b) = (tri[i], tri[(i + 1) % 3]);
                *count.entry([a.min(b), a.max(b)]).or_default() += 1;
            }
        }
    }
    let mut edges = Vec::new();
    for (tri, r) in triangles.iter().zip(regions) {
        if *r != Region::Minus {
            continue;
        }
        for i in 0..3 {
            let (a, b) = (tri[i], tri[(i + 1) % 3]);
            if count[&[a.min(b), a.max(b)]] != 1 {
                continue;
            }
            if let (Some(&pa), Some(&pb)) = (pair_of.get(&a), pair_of.get(&b)) {
                edges.push([pa, pb]);
            }
        }
    }
    edges.sort_unstable();
    edges
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{DeformationMap, InterfaceSpec};
    use crate::mesh::{build_cell_mesh, build_truncated_mesh, tile_domain_mesh, MembraneRule};

    fn round_trip(m: &MembraneMesh) -> MembraneMesh {
        let mut buf = Vec::new();
        write_mesh(m, &mut buf).unwrap();
        read_mesh(buf.as_slice()).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let c = build_cell_mesh(&InterfaceSpec::default(), 0.1).unwrap();
        assert_eq!(round_trip(&c.mesh), c.mesh);
        let m = build_truncated_mesh(&c, &DeformationMap::bernoulli(9, 0.1), 2).unwrap();
        assert_eq!(round_trip(&m), m);
        let m = tile_domain_mesh(&c, &DeformationMap::bernoulli(9, 0.1), 4, MembraneRule::Cushion { beta: 0.25 })
            .unwrap();
        assert_eq!(round_trip(&m), m);
    }

    #[test]
    fn malformed_input_reports_line() {
        let text = "membrane-mesh v1\nV 2\n0 0\n1 x\n";
        match read_mesh(text.as_bytes()) {
            Err(Error::Format { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
        assert!(read_mesh("nope\n".as_bytes()).is_err());
    }
}
