//! Graph helpers shared by the model generators.

use std::collections::BTreeSet;

/// Undirected simple graph with edges numbered in insertion order.
#[derive(Clone, Debug, Default)]
pub struct Graph {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
    /// For each vertex, (neighbor, edge id), in insertion order.
    pub adj: Vec<Vec<(usize, usize)>>,
}

impl Graph {
    pub fn new(n: usize) -> Self {
        Graph { n, edges: vec![], adj: vec![vec![]; n] }
    }

    pub fn add_edge(&mut self, u: usize, v: usize) -> usize {
        let id = self.edges.len();
        self.edges.push((u, v));
        self.adj[u].push((v, id));
        self.adj[v].push((u, id));
        id
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj[v].len()
    }

    /// All simple cycles of exactly `len` edges, each as its sorted edge ids.
    pub fn cycles(&self, len: usize) -> Vec<Vec<usize>> {
        let mut found: BTreeSet<Vec<usize>> = BTreeSet::new();
        let mut path = Vec::new();
        let mut on_path = vec![false; self.n];
        for start in 0..self.n {
            on_path[start] = true;
            self.extend(start, start, len, &mut path, &mut on_path, &mut found);
            on_path[start] = false;
        }
        found.into_iter().collect()
    }

    fn extend(
        &self,
        start: usize,
        v: usize,
        len: usize,
        path: &mut Vec<usize>,
        on_path: &mut [bool],
        found: &mut BTreeSet<Vec<usize>>,
    ) {
        for &(w, e) in &self.adj[v] {
            if path.len() + 1 == len {
                if w == start && !path.contains(&e) {
                    let mut c = path.clone();
                    c.push(e);
                    c.sort();
                    found.insert(c);
                }
                continue;
            }
            // start is the smallest vertex of the cycle
            if w <= start || on_path[w] {
                continue;
            }
            on_path[w] = true;
            path.push(e);
            self.extend(start, w, len, path, on_path, found);
            path.pop();
            on_path[w] = false;
        }
    }

    /// Vertices touched by a set of edges.
    pub fn vertices_of(&self, edges: &[usize]) -> Vec<usize> {
        let mut v: Vec<usize> = edges.iter().flat_map(|&e| [self.edges[e].0, self.edges[e].1]).collect();
        v.sort();
        v.dedup();
        v
    }

    /// Edges incident to the cycle's vertices but not on it.
    pub fn exterior_of(&self, edges: &[usize]) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .vertices_of(edges)
            .iter()
            .flat_map(|&v| self.adj[v].iter().map(|&(_, e)| e))
            .filter(|e| !edges.contains(e))
            .collect();
        out.sort();
        out.dedup();
        out
    }
}

/// Periodic crystal: `basis` in Cartesian coordinates, `cell` rows are the
/// lattice vectors, repeated `extents` times; atoms closer than
/// `bond * (1 + 1e-6)` under the minimum image are bonded.
pub fn periodic_crystal(basis: &[[f64; 3]], cell: [[f64; 3]; 3], extents: [usize; 3], bond: f64) -> Graph {
    let mut pos = Vec::new();
    for i in 0..extents[0] {
        for j in 0..extents[1] {
            for k in 0..extents[2] {
                for b in basis {
                    let mut p = *b;
                    for d in 0..3 {
                        p[d] += i as f64 * cell[0][d] + j as f64 * cell[1][d] + k as f64 * cell[2][d];
                    }
                    pos.push(p);
                }
            }
        }
    }
    let n = pos.len();
    let mut g = Graph::new(n);
    let tol = bond * 1e-6;
    let super_cell: Vec<[f64; 3]> = (0..3).map(|a| cell[a].map(|x| x * extents[a] as f64)).collect();
    for u in 0..n {
        for v in u + 1..n {
            let mut hits = 0;
            for s0 in -1i32..=1 {
                for s1 in -1i32..=1 {
                    for s2 in -1i32..=1 {
                        let mut d2 = 0.0;
                        for d in 0..3 {
                            let shift = s0 as f64 * super_cell[0][d] + s1 as f64 * super_cell[1][d] + s2 as f64 * super_cell[2][d];
                            let x = pos[v][d] + shift - pos[u][d];
                            d2 += x * x;
                        }
                        if (d2.sqrt() - bond).abs() < tol {
                            hits += 1;
                        }
                    }
                }
            }
            assert!(hits <= 1, "torus too small: atoms {u} and {v} bonded through several images");
            if hits == 1 {
                g.add_edge(u, v);
            }
        }
    }
    g
}

pub fn square_torus(lx: usize, ly: usize) -> Graph {
    let mut g = Graph::new(lx * ly);
    let id = |r: usize, c: usize| r * lx + c;
    for r in 0..ly {
        for c in 0..lx {
            g.add_edge(id(r, c), id(r, (c + 1) % lx));
            g.add_edge(id(r, c), id((r + 1) % ly, c));
        }
    }
    g
}

/// Elementary faces of `square_torus`; on small tori `cycles(4)` also finds winding loops.
pub fn square_torus_faces(lx: usize, ly: usize) -> Vec<Vec<usize>> {
    let h = |r: usize, c: usize| 2 * ((r % ly) * lx + c % lx);
    let v = |r: usize, c: usize| h(r, c) + 1;
    let mut out = Vec::new();
    for r in 0..ly {
        for c in 0..lx {
            let mut f = vec![h(r, c), h(r + 1, c), v(r, c), v(r, c + 1)];
            f.sort();
            out.push(f);
        }
    }
    out
}

pub fn square_open(n: usize) -> Graph {
    let mut g = Graph::new(n * n);
    for r in 0..n {
        for c in 0..n {
            if c + 1 < n {
                g.add_edge(r * n + c, r * n + c + 1);
            }
            if r + 1 < n {
                g.add_edge(r * n + c, (r + 1) * n + c);
            }
        }
    }
    g
}

/// Honeycomb torus of lx x ly two-site cells; site 2*(i*ly+j) is A, +1 is B.
pub fn honeycomb_torus(lx: usize, ly: usize) -> Graph {
    let mut g = Graph::new(2 * lx * ly);
    let a = |i: usize, j: usize| 2 * (i * ly + j);
    let b = |i: usize, j: usize| 2 * (i * ly + j) + 1;
    for i in 0..lx {
        for j in 0..ly {
            g.add_edge(a(i, j), b(i, j));
            g.add_edge(a(i, j), b((i + lx - 1) % lx, j));
            g.add_edge(a(i, j), b(i, (j + ly - 1) % ly));
        }
    }
    g
}

/// The hexagonal faces of `honeycomb_torus`, one per cell, as sorted edge ids.
pub fn honeycomb_torus_faces(lx: usize, ly: usize) -> Vec<Vec<usize>> {
    let e = |i: usize, j: usize, k: usize| 3 * ((i % lx) * ly + j % ly) + k;
    let mut out = Vec::new();
    for i in 0..lx {
        for j in 0..ly {
            let (i1, j0) = (i + 1, j + ly - 1);
            let mut f = vec![e(i, j, 0), e(i1, j, 1), e(i1, j, 2), e(i1, j0, 0), e(i1, j0, 1), e(i, j, 2)];
            f.sort();
            out.push(f);
        }
    }
    out
}

pub fn diamond(l: usize) -> Graph {
    let f = [[0.0, 0.0, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0]];
    let mut basis = Vec::new();
    for p in f {
        basis.push(p);
        basis.push([p[0] + 0.25, p[1] + 0.25, p[2] + 0.25]);
    }
    let cell = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    periodic_crystal(&basis, cell, [l, l, l], 3f64.sqrt() / 4.0)
}

/// Ideal wurtzite (hexagonal ice oxygen net), c/a = sqrt(8/3).
pub fn wurtzite(lx: usize, ly: usize, lz: usize) -> Graph {
    let c = (8.0f64 / 3.0).sqrt();
    let a1 = [1.0, 0.0, 0.0];
    let a2 = [-0.5, 3f64.sqrt() / 2.0, 0.0];
    let a3 = [0.0, 0.0, c];
    let frac = |x: f64, y: f64, z: f64| [x * a1[0] + y * a2[0], x * a1[1] + y * a2[1], z * c];
    let u = 3.0 / 8.0;
    let basis = [
        frac(1.0 / 3.0, 2.0 / 3.0, 0.0),
        frac(2.0 / 3.0, 1.0 / 3.0, 0.5),
        frac(1.0 / 3.0, 2.0 / 3.0, u),
        frac(2.0 / 3.0, 1.0 / 3.0, 0.5 + u),
    ];
    periodic_crystal(&basis, [a1, a2, a3], [lx, ly, lz], u * c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_torus_has_one_plaquette_per_site() {
        let g = square_torus(4, 4);
        let faces = square_torus_faces(4, 4);
        assert_eq!(faces.len(), 16);
        // plus 8 winding loops
        assert_eq!(g.cycles(4).len(), 24);
        assert!(faces.iter().all(|f| g.cycles(4).contains(f)));
        assert_eq!(square_torus(5, 5).cycles(4), square_torus_faces(5, 5).into_iter().collect::<std::collections::BTreeSet<_>>().into_iter().collect::<Vec<_>>());
        assert!((0..16).all(|v| g.degree(v) == 4));
    }

    #[test]
    fn honeycomb_hexagons() {
        let g = honeycomb_torus(4, 4);
        assert_eq!(g.cycles(6).len(), 16);
        assert!((0..32).all(|v| g.degree(v) == 3));
        let mut faces = honeycomb_torus_faces(4, 4);
        faces.sort();
        assert_eq!(faces, g.cycles(6));
        // on a 3x3 torus the straight winding loops are six edges long too
        let h = honeycomb_torus(3, 3);
        assert_eq!(h.cycles(6).len(), 9 + 9);
        assert!(honeycomb_torus_faces(3, 3).iter().all(|f| h.vertices_of(f).len() == 6));
    }

    #[test]
    fn diamond_rings() {
        let g = diamond(2);
        assert_eq!(g.n, 64);
        assert!((0..64).all(|v| g.degree(v) == 4));
        // 12 six-rings through each atom, each ring has 6 atoms
        assert_eq!(g.cycles(6).len(), 64 * 12 / 6);
        assert!(g.cycles(4).is_empty());
    }

    #[test]
    fn wurtzite_is_four_coordinated() {
        let g = wurtzite(4, 4, 2);
        assert_eq!(g.n, 128);
        assert!((0..g.n).all(|v| g.degree(v) == 4));
        assert!(g.cycles(4).is_empty());
    }
}
