//! Tensor-product Lagrange elements and global degree-of-freedom maps.
//!
//! The velocity space is `V_h = V_h1 x V_h2` with `Q(k+1,k)` in the first
//! component and `Q(k,k+1)` in the second, both continuous and vanishing on
//! the boundary. Discontinuous `Q(m)` spaces carry pressures.

use serde::{Deserialize, Serialize};

use crate::mesh::{CellGeometry, Mesh};
use crate::quadrature::gauss_lobatto;
use crate::{Error, Result};

/// Largest supported velocity degree parameter `k`.
pub const MAX_K: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Continuity {
    Continuous,
    Discontinuous,
}

/// Placement of the per-direction Lagrange points of a continuous lattice.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NodeFamily {
    Equispaced,
    GaussLobatto,
}

/// Node family used by [`velocity_space`].
pub const DEFAULT_VELOCITY_NODES: NodeFamily = NodeFamily::GaussLobatto;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NodeEntity {
    Vertex,
    /// Interior point of a bottom or top edge.
    HorizontalEdge,
    /// Interior point of a left or right edge.
    VerticalEdge,
    Interior,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Component {
    VelocityX,
    VelocityY,
    Pressure,
}

impl NodeFamily {
    /// Reference points on `[-1, 1]` for a degree-`deg` Lagrange basis.
    pub fn points(self, deg: usize) -> Vec<f64> {
        if deg == 0 {
            return vec![0.0];
        }
        match self {
            NodeFamily::Equispaced => (0..=deg).map(|a| -1.0 + 2.0 * a as f64 / deg as f64).collect(),
            NodeFamily::GaussLobatto => gauss_lobatto(deg + 1).expect("degree within rule range").nodes,
        }
    }
}

/// One-dimensional Lagrange basis on `[-1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Lagrange1D {
    nodes: Vec<f64>,
}

impl Lagrange1D {
    pub fn new(nodes: Vec<f64>) -> Self {
        assert!(!nodes.is_empty());
        Self { nodes }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn degree(&self) -> usize {
        self.nodes.len() - 1
    }

    /// Values and first derivatives of every basis function at `t`.
    pub fn eval(&self, t: f64, vals: &mut [f64], ders: &mut [f64]) {
        let n = self.nodes.len();
        for i in 0..n {
            let ti = self.nodes[i];
            let (mut v, mut d) = (1.0, 0.0);
            for (m, &tm) in self.nodes.iter().enumerate() {
                if m == i {
                    continue;
                }
                let denom = ti - tm;
                d = (d * (t - tm) + v) / denom;
                v *= (t - tm) / denom;
            }
            vals[i] = v;
            ders[i] = d;
        }
    }
}

/// Local `Q(deg_x, deg_y)` Lagrange element on the reference square.
///
/// Local node `(a, b)` (x index `a`, y index `b`) has local number
/// `b * (deg_x + 1) + a`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarElement {
    deg_x: usize,
    deg_y: usize,
    basis_x: Lagrange1D,
    basis_y: Lagrange1D,
    continuity: Continuity,
}

/// Shape function values and reference gradients at one point.
#[derive(Clone, Debug, Default)]
pub struct BasisValues {
    pub values: Vec<f64>,
    pub grads: Vec<[f64; 2]>,
}

impl ScalarElement {
    pub fn continuous(deg_x: usize, deg_y: usize, family: NodeFamily) -> Self {
        assert!(deg_x >= 1 && deg_y >= 1, "continuous elements need degree >= 1");
        Self {
            deg_x,
            deg_y,
            basis_x: Lagrange1D::new(family.points(deg_x)),
            basis_y: Lagrange1D::new(family.points(deg_y)),
            continuity: Continuity::Continuous,
        }
    }

    /// Discontinuous `Q(deg)`: equispaced lattice including the cell
    /// boundary, or the cell center for `deg = 0`.
    pub fn discontinuous(deg: usize) -> Self {
        let pts = NodeFamily::Equispaced.points(deg);
        Self {
            deg_x: deg,
            deg_y: deg,
            basis_x: Lagrange1D::new(pts.clone()),
            basis_y: Lagrange1D::new(pts),
            continuity: Continuity::Discontinuous,
        }
    }

    pub fn deg_x(&self) -> usize {
        self.deg_x
    }

    pub fn deg_y(&self) -> usize {
        self.deg_y
    }

    pub fn continuity(&self) -> Continuity {
        self.continuity
    }

    pub fn num_local(&self) -> usize {
        (self.deg_x + 1) * (self.deg_y + 1)
    }

    pub fn local_index(&self, a: usize, b: usize) -> usize {
        b * (self.deg_x + 1) + a
    }

    pub fn lattice_position(&self, local: usize) -> (usize, usize) {
        (local % (self.deg_x + 1), local / (self.deg_x + 1))
    }

    pub fn node_ref(&self, local: usize) -> (f64, f64) {
        let (a, b) = self.lattice_position(local);
        (self.basis_x.nodes()[a], self.basis_y.nodes()[b])
    }

    pub fn nodes_x(&self) -> &[f64] {
        self.basis_x.nodes()
    }

    pub fn nodes_y(&self) -> &[f64] {
        self.basis_y.nodes()
    }

    pub fn node_entity(&self, local: usize) -> NodeEntity {
        let (a, b) = self.lattice_position(local);
        let on_x_end = self.deg_x > 0 && (a == 0 || a == self.deg_x);
        let on_y_end = self.deg_y > 0 && (b == 0 || b == self.deg_y);
        match (on_x_end, on_y_end) {
            (true, true) => NodeEntity::Vertex,
            (false, true) => NodeEntity::HorizontalEdge,
            (true, false) => NodeEntity::VerticalEdge,
            (false, false) => NodeEntity::Interior,
        }
    }

    pub fn eval_basis(&self, xi: f64, eta: f64) -> BasisValues {
        let mut out = BasisValues {
            values: vec![0.0; self.num_local()],
            grads: vec![[0.0; 2]; self.num_local()],
        };
        self.eval_basis_into(xi, eta, &mut out);
        out
    }

    pub fn eval_basis_into(&self, xi: f64, eta: f64, out: &mut BasisValues) {
        let (nx, ny) = (self.deg_x + 1, self.deg_y + 1);
        let mut vx = [0.0; 8];
        let mut dx = [0.0; 8];
        let mut vy = [0.0; 8];
        let mut dy = [0.0; 8];
        self.basis_x.eval(xi, &mut vx[..nx], &mut dx[..nx]);
        self.basis_y.eval(eta, &mut vy[..ny], &mut dy[..ny]);
        out.values.resize(nx * ny, 0.0);
        out.grads.resize(nx * ny, [0.0; 2]);
        for b in 0..ny {
            for a in 0..nx {
                let l = b * nx + a;
                out.values[l] = vx[a] * vy[b];
                out.grads[l] = [dx[a] * vy[b], vx[a] * dy[b]];
            }
        }
    }
}

/// Local-to-global numbering of one scalar space.
#[derive(Clone, Debug)]
pub struct DofMap {
    component: Component,
    nloc: usize,
    cell_dofs: Vec<usize>,
    total: usize,
    boundary: Vec<bool>,
    interior_of: Vec<usize>,
    interior_dofs: Vec<usize>,
    /// Global lattice extent for continuous spaces.
    lattice: Option<(usize, usize)>,
}

const NOT_INTERIOR: usize = usize::MAX;

impl DofMap {
    pub fn new(mesh: &Mesh, elem: &ScalarElement, component: Component) -> Self {
        let (nx, ny) = (mesh.nx(), mesh.ny());
        let nloc = elem.num_local();
        let mut cell_dofs = Vec::with_capacity(mesh.num_cells() * nloc);
        let (total, boundary, lattice) = match elem.continuity() {
            Continuity::Continuous => {
                let (dx, dy) = (elem.deg_x(), elem.deg_y());
                let (lx, ly) = (nx * dx + 1, ny * dy + 1);
                for j in 0..ny {
                    for i in 0..nx {
                        for b in 0..=dy {
                            for a in 0..=dx {
                                cell_dofs.push((j * dy + b) * lx + i * dx + a);
                            }
                        }
                    }
                }
                let boundary = (0..lx * ly)
                    .map(|g| {
                        let (gx, gy) = (g % lx, g / lx);
                        gx == 0 || gy == 0 || gx == lx - 1 || gy == ly - 1
                    })
                    .collect();
                (lx * ly, boundary, Some((lx, ly)))
            }
            Continuity::Discontinuous => {
                let total = mesh.num_cells() * nloc;
                cell_dofs.extend(0..total);
                (total, vec![false; total], None)
            }
        };
        let mut interior_of = vec![NOT_INTERIOR; total];
        let mut interior_dofs = Vec::new();
        for g in 0..total {
            if !boundary[g] {
                interior_of[g] = interior_dofs.len();
                interior_dofs.push(g);
            }
        }
        Self {
            component,
            nloc,
            cell_dofs,
            total,
            boundary,
            interior_of,
            interior_dofs,
            lattice,
        }
    }

    pub fn component(&self) -> Component {
        self.component
    }

    pub fn total_dofs(&self) -> usize {
        self.total
    }

    pub fn num_interior(&self) -> usize {
        self.interior_dofs.len()
    }

    pub fn cell_dofs(&self, cell: usize) -> &[usize] {
        &self.cell_dofs[cell * self.nloc..(cell + 1) * self.nloc]
    }

    pub fn is_boundary(&self, g: usize) -> bool {
        self.boundary[g]
    }

    pub fn boundary_dofs(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.total).filter(|&g| self.boundary[g])
    }

    pub fn interior_index(&self, g: usize) -> Option<usize> {
        let i = self.interior_of[g];
        (i != NOT_INTERIOR).then_some(i)
    }

    pub fn interior_dofs(&self) -> &[usize] {
        &self.interior_dofs
    }

    pub fn lattice_extent(&self) -> Option<(usize, usize)> {
        self.lattice
    }

    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.interior_dofs.iter().map(|&g| full[g]).collect()
    }

    pub fn expand(&self, interior: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.total];
        for (&g, &v) in self.interior_dofs.iter().zip(interior) {
            full[g] = v;
        }
        full
    }
}

/// A scalar element together with its global numbering on a mesh.
#[derive(Clone, Debug)]
pub struct ScalarSpace {
    pub elem: ScalarElement,
    pub dofs: DofMap,
}

impl ScalarSpace {
    pub fn new(mesh: &Mesh, elem: ScalarElement, component: Component) -> Self {
        let dofs = DofMap::new(mesh, &elem, component);
        Self { elem, dofs }
    }

    /// Physical coordinates of every global node.
    pub fn node_coords(&self, mesh: &Mesh) -> Vec<(f64, f64)> {
        let mut coords = vec![(f64::NAN, f64::NAN); self.dofs.total_dofs()];
        for (i, j, g) in mesh.cells() {
            let cell = mesh.cell_index(i, j);
            for (l, &d) in self.dofs.cell_dofs(cell).iter().enumerate() {
                let (xi, eta) = self.elem.node_ref(l);
                coords[d] = g.map(xi, eta);
            }
        }
        coords
    }

    /// Value and physical gradient of the field `coeffs` at reference point
    /// `(xi, eta)` of cell `(i, j)`.
    pub fn eval_in_cell(&self, mesh: &Mesh, coeffs: &[f64], i: usize, j: usize, xi: f64, eta: f64) -> (f64, [f64; 2]) {
        let g = mesh.geometry_unchecked(i, j);
        let basis = self.elem.eval_basis(xi, eta);
        let dofs = self.dofs.cell_dofs(mesh.cell_index(i, j));
        combine(&basis, dofs, coeffs, &g)
    }

    /// Value and gradient at a physical point (cell chosen by [`Mesh::locate`]).
    pub fn eval(&self, mesh: &Mesh, coeffs: &[f64], x: f64, y: f64) -> (f64, [f64; 2]) {
        let (i, j) = mesh.locate(x, y);
        let g = mesh.geometry_unchecked(i, j);
        let (xi, eta) = g.to_reference(x, y);
        self.eval_in_cell(mesh, coeffs, i, j, xi, eta)
    }
}

pub(crate) fn combine(basis: &BasisValues, dofs: &[usize], coeffs: &[f64], g: &CellGeometry) -> (f64, [f64; 2]) {
    let [sx, sy] = g.inverse_jacobian();
    let mut v = 0.0;
    let mut grad = [0.0; 2];
    for (l, &d) in dofs.iter().enumerate() {
        let c = coeffs[d];
        v += c * basis.values[l];
        grad[0] += c * basis.grads[l][0] * sx;
        grad[1] += c * basis.grads[l][1] * sy;
    }
    (v, grad)
}

/// `Q(k+1,k) x Q(k,k+1)` velocity space with homogeneous Dirichlet data.
///
/// Interior (unknown) vectors stack the interior DOFs of component 1 followed
/// by those of component 2.
#[derive(Clone, Debug)]
pub struct VelocitySpace {
    k: usize,
    mesh: Mesh,
    comps: [ScalarSpace; 2],
}

pub fn velocity_space(mesh: &Mesh, k: usize) -> Result<VelocitySpace> {
    VelocitySpace::with_nodes(mesh, k, DEFAULT_VELOCITY_NODES)
}

impl VelocitySpace {
    pub fn with_nodes(mesh: &Mesh, k: usize, family: NodeFamily) -> Result<Self> {
        if !(1..=MAX_K).contains(&k) {
            return Err(Error::UnsupportedDegree(k));
        }
        let c1 = ScalarSpace::new(mesh, ScalarElement::continuous(k + 1, k, family), Component::VelocityX);
        let c2 = ScalarSpace::new(mesh, ScalarElement::continuous(k, k + 1, family), Component::VelocityY);
        Ok(Self {
            k,
            mesh: mesh.clone(),
            comps: [c1, c2],
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn component(&self, c: usize) -> &ScalarSpace {
        &self.comps[c]
    }

    pub fn components(&self) -> &[ScalarSpace; 2] {
        &self.comps
    }

    pub fn num_interior(&self) -> usize {
        self.comps[0].dofs.num_interior() + self.comps[1].dofs.num_interior()
    }

    pub fn num_total(&self) -> usize {
        self.comps[0].dofs.total_dofs() + self.comps[1].dofs.total_dofs()
    }

    /// Offset of component `c` in the stacked interior vector.
    pub fn interior_offset(&self, c: usize) -> usize {
        if c == 0 {
            0
        } else {
            self.comps[0].dofs.num_interior()
        }
    }

    /// Offset of component `c` in the stacked full vector.
    pub fn full_offset(&self, c: usize) -> usize {
        if c == 0 {
            0
        } else {
            self.comps[0].dofs.total_dofs()
        }
    }

    /// Full per-component coefficient vectors (zero boundary values).
    pub fn split_interior(&self, interior: &[f64]) -> [Vec<f64>; 2] {
        let n1 = self.comps[0].dofs.num_interior();
        [
            self.comps[0].dofs.expand(&interior[..n1]),
            self.comps[1].dofs.expand(&interior[n1..]),
        ]
    }

    pub fn join_interior(&self, full: &[Vec<f64>; 2]) -> Vec<f64> {
        let mut v = self.comps[0].dofs.restrict(&full[0]);
        v.extend(self.comps[1].dofs.restrict(&full[1]));
        v
    }

    /// Pointwise divergence of a velocity field given by full coefficients.
    pub fn divergence_in_cell(&self, coeffs: &[Vec<f64>; 2], i: usize, j: usize, xi: f64, eta: f64) -> f64 {
        let (_, g1) = self.comps[0].eval_in_cell(&self.mesh, &coeffs[0], i, j, xi, eta);
        let (_, g2) = self.comps[1].eval_in_cell(&self.mesh, &coeffs[1], i, j, xi, eta);
        g1[0] + g2[1]
    }
}

/// Discontinuous piecewise `Q(degree)` pressure space.
#[derive(Clone, Debug)]
pub struct PressureSpace {
    degree: usize,
    mesh: Mesh,
    space: ScalarSpace,
}

impl PressureSpace {
    pub fn new(mesh: &Mesh, degree: usize) -> Self {
        Self {
            degree,
            mesh: mesh.clone(),
            space: ScalarSpace::new(mesh, ScalarElement::discontinuous(degree), Component::Pressure),
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn scalar(&self) -> &ScalarSpace {
        &self.space
    }

    pub fn num_dofs(&self) -> usize {
        self.space.dofs.total_dofs()
    }

    pub fn eval(&self, coeffs: &[f64], x: f64, y: f64) -> f64 {
        self.space.eval(&self.mesh, coeffs, x, y).0
    }
}

/// Bernardi-Raugel pressure space: discontinuous `Q(k-1)`, no mean constraint.
pub fn br_pressure_space(mesh: &Mesh, k: usize) -> Result<PressureSpace> {
    if k < 1 {
        return Err(Error::UnsupportedDegree(k));
    }
    Ok(PressureSpace::new(mesh, k - 1))
}

/// Discontinuous `Q(k)`, the ambient space of `div V_h`; used to represent
/// the pressure recovered by the penalty iteration.
pub fn divfree_pressure_space(mesh: &Mesh, k: usize) -> Result<PressureSpace> {
    if !(1..=MAX_K).contains(&k) {
        return Err(Error::UnsupportedDegree(k));
    }
    Ok(PressureSpace::new(mesh, k))
}
