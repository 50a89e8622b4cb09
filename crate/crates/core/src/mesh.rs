//! Simplicial meshes in one, two and three dimensions.
//!
//! A [`Mesh`] owns node coordinates, element connectivity and the list of
//! boundary facets together with their labels. Geometry that every other
//! module needs (element volumes, constant P1 shape-function gradients, node
//! rings and the nodal lumping weights) is computed once at construction and
//! the mesh is immutable afterwards.
//!
//! Coordinates are stored as 3-vectors regardless of the spatial dimension;
//! the unused trailing components are always zero. The same padding is used
//! for shape-function gradients so that element kinematics can be formed with
//! fixed-size `nalgebra` types.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use bitflags::bitflags;
use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

pub type Point = Vector3<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("element {element} is degenerate (signed volume {volume:e})")]
    DegenerateElement { element: usize, volume: f64 },
    #[error("face {face:?} is shared by more than two elements")]
    NonManifold { face: Vec<usize> },
    #[error("facet {facet:?} is not a boundary face of the mesh")]
    NotABoundaryFacet { facet: Vec<usize> },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

bitflags! {
    /// Boundary condition roles a facet can play. Mechanical and thermal
    /// Dirichlet sets are independent.
    #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
    pub struct BoundaryLabels: u8 {
        const MECH_DIRICHLET = 0b0001;
        const THERMAL_DIRICHLET = 0b0010;
        const TRACTION = 0b0100;
        const ENTROPY_FLUX = 0b1000;
    }
}

const LABEL_NAMES: [(&str, BoundaryLabels); 4] = [
    ("mech-dirichlet", BoundaryLabels::MECH_DIRICHLET),
    ("thermal-dirichlet", BoundaryLabels::THERMAL_DIRICHLET),
    ("traction", BoundaryLabels::TRACTION),
    ("entropy-flux", BoundaryLabels::ENTROPY_FLUX),
];

impl FromStr for BoundaryLabels {
    type Err = String;

    /// Parses a comma separated list of label names; `none` or `-` is the
    /// empty set.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() || s == "none" || s == "-" {
            return Ok(BoundaryLabels::empty());
        }
        let mut labels = BoundaryLabels::empty();
        for part in s.split(',') {
            let part = part.trim();
            let flag = LABEL_NAMES
                .iter()
                .find(|(name, _)| *name == part)
                .map(|(_, flag)| *flag)
                .ok_or_else(|| format!("unknown boundary label `{part}`"))?;
            labels |= flag;
        }
        Ok(labels)
    }
}

impl fmt::Display for BoundaryLabels {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return f.write_str("none");
        }
        let names: Vec<&str> = LABEL_NAMES
            .iter()
            .filter(|(_, flag)| self.contains(*flag))
            .map(|(name, _)| *name)
            .collect();
        f.write_str(&names.join(","))
    }
}

/// Volume and constant shape-function gradients of one affine simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementGeometry {
    pub volume: f64,
    /// Diameter of the inscribed sphere (the element length in 1D).
    pub inscribed_diameter: f64,
    gradients: [Vector3<f64>; 4],
    n_nodes: usize,
}

impl ElementGeometry {
    /// Gradients of the local hat functions, one per element node.
    pub fn gradients(&self) -> &[Vector3<f64>] {
        &self.gradients[..self.n_nodes]
    }
}

/// Measure of a (d-1)-simplex embedded in R^d.
fn facet_measure(dim: usize, pts: &[Point]) -> f64 {
    match dim {
        1 => 1.0,
        2 => (pts[1] - pts[0]).norm(),
        _ => 0.5 * (pts[1] - pts[0]).cross(&(pts[2] - pts[0])).norm(),
    }
}

fn factorial(d: usize) -> f64 {
    (1..=d).product::<usize>() as f64
}

/// Signed volume of a simplex given its d+1 vertices.
pub fn signed_volume(dim: usize, pts: &[Point]) -> f64 {
    edge_matrix(dim, pts).determinant() / factorial(dim)
}

/// Edge vectors X_i - X_0 as columns, padded with unit columns above `dim`.
fn edge_matrix(dim: usize, pts: &[Point]) -> Matrix3<f64> {
    let mut jac = Matrix3::identity();
    for i in 0..dim {
        jac.set_column(i, &(pts[i + 1] - pts[0]));
    }
    jac
}

/// Computes the geometry of a positively oriented simplex.
///
/// `element` is only used to label the error.
pub fn simplex_geometry(
    dim: usize,
    pts: &[Point],
    element: usize,
) -> Result<ElementGeometry, MeshError> {
    if !(1..=3).contains(&dim) || pts.len() != dim + 1 {
        return Err(MeshError::InvalidArgument(format!(
            "a {dim}-simplex needs {} vertices, got {}",
            dim + 1,
            pts.len()
        )));
    }
    let jac = edge_matrix(dim, pts);
    let volume = jac.determinant() / factorial(dim);
    let extent = pts
        .iter()
        .skip(1)
        .map(|p| (p - pts[0]).norm())
        .fold(0.0_f64, f64::max);
    let tol = 1e-13 * extent.powi(dim as i32);
    if !(volume > tol) {
        return Err(MeshError::DegenerateElement { element, volume });
    }
    let inv = jac
        .try_inverse()
        .ok_or(MeshError::DegenerateElement { element, volume })?;
    let mut gradients = [Vector3::zeros(); 4];
    let mut sum = Vector3::zeros();
    for i in 0..dim {
        // Row i of J^{-1} is the gradient of barycentric coordinate i+1.
        let g: Vector3<f64> = inv.row(i).transpose();
        gradients[i + 1] = g;
        sum += g;
    }
    gradients[0] = -sum;

    let surface: f64 = (0..=dim)
        .map(|skip| {
            let face: Vec<Point> = (0..=dim).filter(|&j| j != skip).map(|j| pts[j]).collect();
            facet_measure(dim, &face)
        })
        .sum();
    let inscribed_diameter = 2.0 * dim as f64 * volume / surface;

    Ok(ElementGeometry {
        volume,
        inscribed_diameter,
        gradients,
        n_nodes: dim + 1,
    })
}

/// Nodal quadrature weights of the Gauss–Lobatto rule on P1 simplices.
#[derive(Debug, Clone, PartialEq)]
pub struct LumpedWeights {
    /// Weight w_{a,K} = Vol(K)/(d+1), identical for every node of K.
    pub per_element: Vec<f64>,
    /// Weight w_a, summed over the ring of a.
    pub per_node: Vec<f64>,
}

impl LumpedWeights {
    pub fn pair(&self, _node: usize, element: usize) -> f64 {
        self.per_element[element]
    }
}

#[derive(Debug, Clone)]
pub struct Mesh {
    dim: usize,
    coords: Vec<Point>,
    elements: Vec<usize>,
    facets: Vec<usize>,
    facet_labels: Vec<BoundaryLabels>,
    facet_owner: Vec<usize>,
    geometry: Vec<ElementGeometry>,
    ring_offsets: Vec<usize>,
    ring_elements: Vec<usize>,
    weights: LumpedWeights,
}

fn sorted_key(nodes: &[usize]) -> Vec<usize> {
    let mut key = nodes.to_vec();
    key.sort_unstable();
    key
}

impl Mesh {
    /// Builds a mesh from coordinates and element connectivity.
    ///
    /// Elements with negative signed volume are reoriented by swapping their
    /// last two nodes. Boundary facets are extracted as the element faces that
    /// belong to exactly one element; all of them start unlabeled.
    pub fn new(
        dim: usize,
        coords: Vec<Point>,
        elements: Vec<Vec<usize>>,
    ) -> Result<Self, MeshError> {
        if !(1..=3).contains(&dim) {
            return Err(MeshError::InvalidArgument(format!(
                "dimension {dim} not in 1..=3"
            )));
        }
        if elements.is_empty() {
            return Err(MeshError::InvalidArgument("mesh has no elements".into()));
        }
        let n_nodes = coords.len();
        for (a, x) in coords.iter().enumerate() {
            if !x.iter().all(|c| c.is_finite()) {
                return Err(MeshError::InvalidArgument(format!(
                    "node {a} has non-finite coordinates"
                )));
            }
            if x.iter().skip(dim).any(|&c| c != 0.0) {
                return Err(MeshError::InvalidArgument(format!(
                    "node {a} has non-zero components beyond dimension {dim}"
                )));
            }
        }

        let npe = dim + 1;
        let mut flat = Vec::with_capacity(elements.len() * npe);
        let mut geometry = Vec::with_capacity(elements.len());
        for (k, el) in elements.iter().enumerate() {
            if el.len() != npe {
                return Err(MeshError::InvalidArgument(format!(
                    "element {k} has {} nodes, expected {npe}",
                    el.len()
                )));
            }
            if let Some(&bad) = el.iter().find(|&&a| a >= n_nodes) {
                return Err(MeshError::InvalidArgument(format!(
                    "element {k} references node {bad} but the mesh has {n_nodes} nodes"
                )));
            }
            let mut el = el.clone();
            if sorted_key(&el).windows(2).any(|w| w[0] == w[1]) {
                return Err(MeshError::InvalidArgument(format!(
                    "element {k} repeats a node"
                )));
            }
            let pts: Vec<Point> = el.iter().map(|&a| coords[a]).collect();
            if signed_volume(dim, &pts) < 0.0 {
                el.swap(dim - 1, dim);
            }
            let pts: Vec<Point> = el.iter().map(|&a| coords[a]).collect();
            geometry.push(simplex_geometry(dim, &pts, k)?);
            flat.extend_from_slice(&el);
        }

        let mut used = vec![false; n_nodes];
        flat.iter().for_each(|&a| used[a] = true);
        if let Some(orphan) = used.iter().position(|u| !u) {
            return Err(MeshError::InvalidArgument(format!(
                "node {orphan} belongs to no element"
            )));
        }

        // Faces seen once are on the boundary.
        let mut face_count: HashMap<Vec<usize>, (usize, usize, Vec<usize>)> = HashMap::new();
        for k in 0..elements.len() {
            let el = &flat[k * npe..(k + 1) * npe];
            for skip in 0..npe {
                let face: Vec<usize> = (0..npe).filter(|&j| j != skip).map(|j| el[j]).collect();
                let entry = face_count.entry(sorted_key(&face)).or_insert((0, k, face));
                entry.0 += 1;
            }
        }
        let mut boundary: Vec<(usize, Vec<usize>)> = Vec::new();
        for (key, (count, owner, face)) in face_count {
            match count {
                1 => boundary.push((owner, face)),
                2 => {}
                _ => return Err(MeshError::NonManifold { face: key }),
            }
        }
        // Deterministic facet order independent of hashing.
        boundary.sort_by_key(|b| sorted_key(&b.1));
        let mut facets = Vec::with_capacity(boundary.len() * dim);
        let mut facet_owner = Vec::with_capacity(boundary.len());
        for (owner, face) in &boundary {
            facets.extend_from_slice(face);
            facet_owner.push(*owner);
        }

        let mut ring_count = vec![0usize; n_nodes + 1];
        flat.iter().for_each(|&a| ring_count[a + 1] += 1);
        for a in 0..n_nodes {
            ring_count[a + 1] += ring_count[a];
        }
        let ring_offsets = ring_count;
        let mut fill = ring_offsets.clone();
        let mut ring_elements = vec![0; flat.len()];
        for k in 0..elements.len() {
            for &a in &flat[k * npe..(k + 1) * npe] {
                ring_elements[fill[a]] = k;
                fill[a] += 1;
            }
        }

        let per_element: Vec<f64> = geometry.iter().map(|g| g.volume / npe as f64).collect();
        let mut per_node = vec![0.0; n_nodes];
        for a in 0..n_nodes {
            per_node[a] = ring_elements[ring_offsets[a]..ring_offsets[a + 1]]
                .iter()
                .map(|&k| per_element[k])
                .sum();
        }

        Ok(Mesh {
            dim,
            coords,
            elements: flat,
            facet_labels: vec![BoundaryLabels::empty(); facet_owner.len()],
            facets,
            facet_owner,
            geometry,
            ring_offsets,
            ring_elements,
            weights: LumpedWeights {
                per_element,
                per_node,
            },
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_nodes(&self) -> usize {
        self.coords.len()
    }

    pub fn n_elements(&self) -> usize {
        self.geometry.len()
    }

    pub fn n_facets(&self) -> usize {
        self.facet_owner.len()
    }

    pub fn coords(&self) -> &[Point] {
        &self.coords
    }

    pub fn element(&self, k: usize) -> &[usize] {
        let npe = self.dim + 1;
        &self.elements[k * npe..(k + 1) * npe]
    }

    pub fn elements(&self) -> impl Iterator<Item = &[usize]> {
        self.elements.chunks_exact(self.dim + 1)
    }

    pub fn facet(&self, f: usize) -> &[usize] {
        &self.facets[f * self.dim..(f + 1) * self.dim]
    }

    pub fn facet_labels(&self, f: usize) -> BoundaryLabels {
        self.facet_labels[f]
    }

    /// Element that owns boundary facet `f`.
    pub fn facet_owner(&self, f: usize) -> usize {
        self.facet_owner[f]
    }

    pub fn facet_measure(&self, f: usize) -> f64 {
        let pts: Vec<Point> = self.facet(f).iter().map(|&a| self.coords[a]).collect();
        facet_measure(self.dim, &pts)
    }

    /// Cached geometry of element `k`.
    pub fn element_geometry(&self, k: usize) -> Result<&ElementGeometry, MeshError> {
        self.geometry.get(k).ok_or_else(|| {
            MeshError::InvalidArgument(format!(
                "element {k} out of range ({} elements)",
                self.n_elements()
            ))
        })
    }

    pub(crate) fn geometry(&self) -> &[ElementGeometry] {
        &self.geometry
    }

    /// Elements containing `node`, in ascending order.
    pub fn ring(&self, node: usize) -> Result<&[usize], MeshError> {
        if node >= self.n_nodes() {
            return Err(MeshError::InvalidArgument(format!(
                "node {node} out of range ({} nodes)",
                self.n_nodes()
            )));
        }
        Ok(self.ring_unchecked(node))
    }

    pub(crate) fn ring_unchecked(&self, node: usize) -> &[usize] {
        &self.ring_elements[self.ring_offsets[node]..self.ring_offsets[node + 1]]
    }

    pub fn lumped_weights(&self) -> &LumpedWeights {
        &self.weights
    }

    pub fn volume(&self) -> f64 {
        self.geometry.iter().map(|g| g.volume).sum()
    }

    /// Smallest inscribed-sphere diameter over all elements.
    pub fn min_inscribed_diameter(&self) -> f64 {
        self.geometry
            .iter()
            .map(|g| g.inscribed_diameter)
            .fold(f64::INFINITY, f64::min)
    }

    /// Adds `labels` to every boundary facet whose vertices all satisfy
    /// `select`. Returns how many facets matched.
    pub fn label_facets<F>(&mut self, labels: BoundaryLabels, select: F) -> usize
    where
        F: Fn(&Point) -> bool,
    {
        let mut matched = 0;
        for f in 0..self.n_facets() {
            let hit = self.facets[f * self.dim..(f + 1) * self.dim]
                .iter()
                .all(|&a| select(&self.coords[a]));
            if hit {
                self.facet_labels[f] |= labels;
                matched += 1;
            }
        }
        matched
    }

    /// Adds `labels` to the boundary facet with the given vertex set.
    pub fn label_facet(
        &mut self,
        nodes: &[usize],
        labels: BoundaryLabels,
    ) -> Result<(), MeshError> {
        let key = sorted_key(nodes);
        let f = (0..self.n_facets())
            .find(|&f| sorted_key(self.facet(f)) == key)
            .ok_or_else(|| MeshError::NotABoundaryFacet {
                facet: nodes.to_vec(),
            })?;
        self.facet_labels[f] |= labels;
        Ok(())
    }

    pub fn clear_labels(&mut self, labels: BoundaryLabels) {
        self.facet_labels.iter_mut().for_each(|l| l.remove(labels));
    }

    /// Nodes lying on at least one facet carrying any of `labels`.
    pub fn labeled_nodes(&self, labels: BoundaryLabels) -> Vec<bool> {
        let mut flags = vec![false; self.n_nodes()];
        for f in 0..self.n_facets() {
            if self.facet_labels[f].intersects(labels) {
                self.facet(f).iter().for_each(|&a| flags[a] = true);
            }
        }
        flags
    }

    pub fn has_label(&self, labels: BoundaryLabels) -> bool {
        self.facet_labels.iter().any(|l| l.intersects(labels))
    }

    /// Rigidly translates the mesh; geometry and labels are unchanged.
    pub fn translate(&mut self, offset: &Point) {
        let mut offset = *offset;
        offset.iter_mut().skip(self.dim).for_each(|c| *c = 0.0);
        self.coords.iter_mut().for_each(|x| *x += offset);
    }

    /// Parses the plain-text mesh format.
    ///
    /// ```text
    /// dim n_nodes n_elems n_facets
    /// x [y [z]]              (n_nodes lines)
    /// i0 .. id               (n_elems lines, zero-based)
    /// j0 .. j{d-1} labels    (n_facets lines)
    /// ```
    pub fn from_text(text: &str) -> Result<Self, MeshError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let parse_err = |line: usize, message: String| MeshError::Parse { line, message };

        let (hline, header) = lines
            .next()
            .ok_or_else(|| parse_err(1, "empty mesh file".into()))?;
        let head: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|e| parse_err(hline, format!("bad header: {e}")))?;
        let [dim, n_nodes, n_elems, n_facets] = head[..] else {
            return Err(parse_err(hline, "header must have 4 integers".into()));
        };
        if !(1..=3).contains(&dim) {
            return Err(parse_err(hline, format!("dimension {dim} not in 1..=3")));
        }

        let mut coords = Vec::with_capacity(n_nodes);
        for _ in 0..n_nodes {
            let (ln, l) = lines
                .next()
                .ok_or_else(|| parse_err(hline, "missing node lines".into()))?;
            let vals: Vec<f64> = l
                .split_whitespace()
                .map(str::parse)
                .collect::<Result<_, _>>()
                .map_err(|e| parse_err(ln, format!("bad coordinate: {e}")))?;
            if vals.len() != dim {
                return Err(parse_err(
                    ln,
                    format!("expected {dim} coordinates, got {}", vals.len()),
                ));
            }
            let mut x = Point::zeros();
            x.iter_mut().zip(&vals).for_each(|(c, v)| *c = *v);
            coords.push(x);
        }

        let mut elements = Vec::with_capacity(n_elems);
        for _ in 0..n_elems {
            let (ln, l) = lines
                .next()
                .ok_or_else(|| parse_err(hline, "missing element lines".into()))?;
            let idx: Vec<usize> = l
                .split_whitespace()
                .map(str::parse)
                .collect::<Result<_, _>>()
                .map_err(|e| parse_err(ln, format!("bad node index: {e}")))?;
            if idx.len() != dim + 1 {
                return Err(parse_err(
                    ln,
                    format!("expected {} node indices, got {}", dim + 1, idx.len()),
                ));
            }
            elements.push(idx);
        }

        let mut labeled = Vec::with_capacity(n_facets);
        for _ in 0..n_facets {
            let (ln, l) = lines
                .next()
                .ok_or_else(|| parse_err(hline, "missing facet lines".into()))?;
            let tokens: Vec<&str> = l.split_whitespace().collect();
            if tokens.len() != dim + 1 {
                return Err(parse_err(
                    ln,
                    format!("expected {dim} node indices and a label"),
                ));
            }
            let idx: Vec<usize> = tokens[..dim]
                .iter()
                .map(|t| t.parse())
                .collect::<Result<_, _>>()
                .map_err(|e| parse_err(ln, format!("bad node index: {e}")))?;
            let labels: BoundaryLabels = tokens[dim].parse().map_err(|e| parse_err(ln, e))?;
            labeled.push((ln, idx, labels));
        }
        if let Some((ln, _)) = lines.next() {
            return Err(parse_err(
                ln,
                "trailing content after the declared facets".into(),
            ));
        }

        let mut mesh = Mesh::new(dim, coords, elements)?;
        for (ln, idx, labels) in labeled {
            mesh.label_facet(&idx, labels)
                .map_err(|e| parse_err(ln, e.to_string()))?;
        }
        Ok(mesh)
    }

    /// Serializes to the plain-text format; only labeled facets are written.
    pub fn to_text(&self) -> String {
        use std::fmt::Write;
        let labeled: Vec<usize> = (0..self.n_facets())
            .filter(|&f| !self.facet_labels[f].is_empty())
            .collect();
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} {} {} {}",
            self.dim,
            self.n_nodes(),
            self.n_elements(),
            labeled.len()
        );
        for x in &self.coords {
            let cs: Vec<String> = x.iter().take(self.dim).map(|c| format!("{c:?}")).collect();
            let _ = writeln!(out, "{}", cs.join(" "));
        }
        for el in self.elements() {
            let is: Vec<String> = el.iter().map(|i| i.to_string()).collect();
            let _ = writeln!(out, "{}", is.join(" "));
        }
        for f in labeled {
            let is: Vec<String> = self.facet(f).iter().map(|i| i.to_string()).collect();
            let _ = writeln!(out, "{} {}", is.join(" "), self.facet_labels[f]);
        }
        out
    }
}

/// Uniform mesh of the interval (0, length) with `n_elements` segments.
pub fn generate_segment_mesh(length: f64, n_elements: usize) -> Result<Mesh, MeshError> {
    if !(length > 0.0) || !length.is_finite() {
        return Err(MeshError::InvalidArgument(format!(
            "segment length must be positive, got {length}"
        )));
    }
    if n_elements == 0 {
        return Err(MeshError::InvalidArgument(
            "segment mesh needs at least one element".into(),
        ));
    }
    let h = length / n_elements as f64;
    let coords = (0..=n_elements)
        .map(|i| {
            // Pin the right end exactly.
            let x = if i == n_elements {
                length
            } else {
                i as f64 * h
            };
            Point::new(x, 0.0, 0.0)
        })
        .collect();
    let elements = (0..n_elements).map(|i| vec![i, i + 1]).collect();
    Mesh::new(1, coords, elements)
}

/// Structured triangulation of [0,lx]x[0,ly], each cell split along the
/// diagonal from its lower-left to upper-right corner.
pub fn generate_rectangle_tri_mesh(
    lengths: [f64; 2],
    divisions: [usize; 2],
) -> Result<Mesh, MeshError> {
    check_box_args(&lengths, &divisions)?;
    let [nx, ny] = divisions;
    let node = |i: usize, j: usize| i + (nx + 1) * j;
    let mut coords = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            coords.push(Point::new(
                grid_coord(lengths[0], nx, i),
                grid_coord(lengths[1], ny, j),
                0.0,
            ));
        }
    }
    let mut elements = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            elements.push(vec![node(i, j), node(i + 1, j), node(i + 1, j + 1)]);
            elements.push(vec![node(i, j), node(i + 1, j + 1), node(i, j + 1)]);
        }
    }
    Mesh::new(2, coords, elements)
}

/// Axis permutations of the Kuhn split, in the fixed order used to number
/// the six tetrahedra of each cell.
const KUHN_PERMUTATIONS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

/// Structured tetrahedral mesh of [0,lx]x[0,ly]x[0,lz].
///
/// Nodes are numbered `i + (nx+1)*(j + (ny+1)*k)`. Each hexahedral cell is
/// split into six tetrahedra sharing the diagonal from its (0,0,0) corner to
/// its (1,1,1) corner; tetrahedron `p` walks from (0,0,0) along the axes in
/// the order `KUHN_PERMUTATIONS[p]`. Cells are visited with `i` fastest.
pub fn generate_box_tet_mesh(lengths: [f64; 3], divisions: [usize; 3]) -> Result<Mesh, MeshError> {
    check_box_args(&lengths, &divisions)?;
    let [nx, ny, nz] = divisions;
    let node = |i: usize, j: usize, k: usize| i + (nx + 1) * (j + (ny + 1) * k);
    let mut coords = Vec::with_capacity((nx + 1) * (ny + 1) * (nz + 1));
    for k in 0..=nz {
        for j in 0..=ny {
            for i in 0..=nx {
                coords.push(Point::new(
                    grid_coord(lengths[0], nx, i),
                    grid_coord(lengths[1], ny, j),
                    grid_coord(lengths[2], nz, k),
                ));
            }
        }
    }
    let mut elements = Vec::with_capacity(6 * nx * ny * nz);
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                for perm in KUHN_PERMUTATIONS {
                    let mut ijk = [i, j, k];
                    let mut tet = vec![node(i, j, k)];
                    for axis in perm {
                        ijk[axis] += 1;
                        tet.push(node(ijk[0], ijk[1], ijk[2]));
                    }
                    elements.push(tet);
                }
            }
        }
    }
    Mesh::new(3, coords, elements)
}

fn grid_coord(length: f64, n: usize, i: usize) -> f64 {
    if i == n {
        length
    } else {
        length * i as f64 / n as f64
    }
}

fn check_box_args(lengths: &[f64], divisions: &[usize]) -> Result<(), MeshError> {
    if let Some(l) = lengths.iter().find(|l| !(**l > 0.0) || !l.is_finite()) {
        return Err(MeshError::InvalidArgument(format!(
            "box lengths must be positive, got {l}"
        )));
    }
    if divisions.contains(&0) {
        return Err(MeshError::InvalidArgument(
            "box divisions must be at least 1".into(),
        ));
    }
    Ok(())
}
