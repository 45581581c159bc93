//! Assembly of the Stokes bilinear forms over structured grids.
//!
//! Velocity operators are returned on the interior (Dirichlet-eliminated)
//! DOFs unless the function name says otherwise. Reference basis values are
//! cached once per quadrature point; cells only differ by their extents.

use crate::fespace::{BasisValues, PressureSpace, ScalarElement, ScalarSpace, VelocitySpace};
use crate::quadrature::{default_order, TensorRule};

/// Compressed sparse row matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Sums duplicate entries; the result has sorted column indices.
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            debug_assert!(r < nrows && c < ncols);
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..nrows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_triplets(n, n, (0..n).map(|i| (i, i, 1.0)).collect())
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterates `(col, value)` over row `r`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[range.clone()].iter().copied().zip(self.values[range].iter().copied())
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[range.clone()].binary_search(&c) {
            Ok(p) => self.values[range.start + p],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows).map(|r| self.row(r).map(|(c, v)| v * x[c]).sum()).collect()
    }

    pub fn transpose_matvec(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.nrows);
        let mut out = vec![0.0; self.ncols];
        for r in 0..self.nrows {
            let yr = y[r];
            if yr != 0.0 {
                for (c, v) in self.row(r) {
                    out[c] += v * yr;
                }
            }
        }
        out
    }

    /// `x^T A x`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        self.matvec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn transpose(&self) -> Self {
        Self::from_triplets(self.ncols, self.nrows, self.triplets().map(|(r, c, v)| (c, r, v)).collect())
    }

    /// `self + s * other`.
    pub fn add_scaled(&self, other: &Self, s: f64) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let t = self.triplets().chain(other.triplets().map(|(r, c, v)| (r, c, s * v))).collect();
        Self::from_triplets(self.nrows, self.ncols, t)
    }

    /// Keeps rows/columns whose map entry is `Some(new_index)`.
    pub fn select(&self, row_map: &[Option<usize>], ncols: usize, col_map: &[Option<usize>]) -> Self {
        let nrows = row_map.iter().flatten().count();
        let t = self
            .triplets()
            .filter_map(|(r, c, v)| Some((row_map[r]?, col_map[c]?, v)))
            .collect();
        Self::from_triplets(nrows, ncols, t)
    }

    pub fn max_abs_asymmetry(&self) -> f64 {
        self.triplets().map(|(r, c, v)| (v - self.get(c, r)).abs()).fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (r, c, v) in self.triplets() {
            d[r][c] = v;
        }
        d
    }
}

/// Which global numbering a side of an operator refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DofSpace {
    /// Stacked full velocity numbering, boundary included.
    VelocityFull,
    /// Stacked interior velocity numbering.
    VelocityInterior,
    /// Interior DOFs of a single scalar component.
    ScalarInterior,
    Pressure,
}

/// Assembled bilinear form.
#[derive(Clone, Debug)]
pub struct LinearOperator {
    pub matrix: SparseMatrix,
    pub rows: DofSpace,
    pub cols: DofSpace,
    pub symmetric: bool,
}

impl LinearOperator {
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.matrix.matvec(x)
    }

    pub fn dim(&self) -> (usize, usize) {
        (self.matrix.nrows(), self.matrix.ncols())
    }
}

/// Reference basis values at every point of a tensor rule.
pub(crate) struct BasisCache {
    pub rule: TensorRule,
    pub at: Vec<BasisValues>,
}

impl BasisCache {
    pub fn new(elem: &ScalarElement, rule: &TensorRule) -> Self {
        let at = rule.points.iter().map(|&(xi, eta)| elem.eval_basis(xi, eta)).collect();
        Self { rule: rule.clone(), at }
    }
}

pub(crate) fn velocity_rule(k: usize) -> TensorRule {
    TensorRule::new(default_order(k)).expect("default order within range")
}

fn velocity_row_map(space: &VelocitySpace) -> Vec<Option<usize>> {
    let mut map = Vec::with_capacity(space.num_total());
    for c in 0..2 {
        let d = &space.component(c).dofs;
        let off = space.interior_offset(c);
        map.extend((0..d.total_dofs()).map(|g| d.interior_index(g).map(|i| i + off)));
    }
    map
}

fn restrict_velocity(space: &VelocitySpace, op: LinearOperator) -> LinearOperator {
    let map = velocity_row_map(space);
    let n = space.num_interior();
    LinearOperator {
        matrix: op.matrix.select(&map, n, &map),
        rows: DofSpace::VelocityInterior,
        cols: DofSpace::VelocityInterior,
        symmetric: op.symmetric,
    }
}

/// Vector Laplacian `a(u, v) = int grad u : grad v` on all velocity DOFs.
pub fn assemble_stiffness_unconstrained(space: &VelocitySpace) -> LinearOperator {
    let mesh = space.mesh();
    let rule = velocity_rule(space.k());
    let mut trip = Vec::new();
    for c in 0..2 {
        let s = space.component(c);
        let cache = BasisCache::new(&s.elem, &rule);
        let off = space.full_offset(c);
        let n = s.elem.num_local();
        let mut local = vec![0.0; n * n];
        for (i, j, g) in mesh.cells() {
            let [sx, sy] = g.inverse_jacobian();
            let det = g.jacobian_det();
            local.iter_mut().for_each(|v| *v = 0.0);
            for (q, b) in cache.at.iter().enumerate() {
                let w = cache.rule.weights[q] * det;
                for a in 0..n {
                    let ga = b.grads[a];
                    for bb in a..n {
                        let gb = b.grads[bb];
                        local[a * n + bb] += w * (ga[0] * gb[0] * sx * sx + ga[1] * gb[1] * sy * sy);
                    }
                }
            }
            let dofs = s.dofs.cell_dofs(mesh.cell_index(i, j));
            for a in 0..n {
                for bb in a..n {
                    let v = local[a * n + bb];
                    trip.push((off + dofs[a], off + dofs[bb], v));
                    if a != bb {
                        trip.push((off + dofs[bb], off + dofs[a], v));
                    }
                }
            }
        }
    }
    let n = space.num_total();
    LinearOperator {
        matrix: SparseMatrix::from_triplets(n, n, trip),
        rows: DofSpace::VelocityFull,
        cols: DofSpace::VelocityFull,
        symmetric: true,
    }
}

pub fn assemble_stiffness(space: &VelocitySpace) -> LinearOperator {
    restrict_velocity(space, assemble_stiffness_unconstrained(space))
}

/// Per-cell divergence rows: for each quadrature point, the divergence of
/// every local velocity basis function (component 1 then component 2).
fn local_divergences(space: &VelocitySpace, caches: &[BasisCache; 2], q: usize, sx: f64, sy: f64, out: &mut Vec<f64>) {
    out.clear();
    out.extend(caches[0].at[q].grads.iter().map(|g| g[0] * sx));
    out.extend(caches[1].at[q].grads.iter().map(|g| g[1] * sy));
    debug_assert_eq!(out.len(), space.component(0).elem.num_local() + space.component(1).elem.num_local());
}

fn stacked_cell_dofs(space: &VelocitySpace, cell: usize) -> Vec<usize> {
    let mut d: Vec<usize> = space.component(0).dofs.cell_dofs(cell).to_vec();
    let off = space.full_offset(1);
    d.extend(space.component(1).dofs.cell_dofs(cell).iter().map(|&g| g + off));
    d
}

/// `(div u, div v)` on all velocity DOFs.
pub fn assemble_div_div_unconstrained(space: &VelocitySpace) -> LinearOperator {
    let mesh = space.mesh();
    let rule = velocity_rule(space.k());
    let caches = [
        BasisCache::new(&space.component(0).elem, &rule),
        BasisCache::new(&space.component(1).elem, &rule),
    ];
    let n = space.component(0).elem.num_local() + space.component(1).elem.num_local();
    let mut trip = Vec::new();
    let mut local = vec![0.0; n * n];
    let mut div = Vec::with_capacity(n);
    for (i, j, g) in mesh.cells() {
        let [sx, sy] = g.inverse_jacobian();
        let det = g.jacobian_det();
        local.iter_mut().for_each(|v| *v = 0.0);
        for q in 0..rule.len() {
            local_divergences(space, &caches, q, sx, sy, &mut div);
            let w = rule.weights[q] * det;
            for a in 0..n {
                let da = w * div[a];
                for b in a..n {
                    local[a * n + b] += da * div[b];
                }
            }
        }
        let dofs = stacked_cell_dofs(space, mesh.cell_index(i, j));
        for a in 0..n {
            for b in a..n {
                let v = local[a * n + b];
                trip.push((dofs[a], dofs[b], v));
                if a != b {
                    trip.push((dofs[b], dofs[a], v));
                }
            }
        }
    }
    let nt = space.num_total();
    LinearOperator {
        matrix: SparseMatrix::from_triplets(nt, nt, trip),
        rows: DofSpace::VelocityFull,
        cols: DofSpace::VelocityFull,
        symmetric: true,
    }
}

pub fn assemble_div_div(space: &VelocitySpace) -> LinearOperator {
    restrict_velocity(space, assemble_div_div_unconstrained(space))
}

/// `(B v)_q = b(v, psi_q) = -int div v psi_q` with columns on all velocity
/// DOFs.
pub fn assemble_div_pressure_unconstrained(space: &VelocitySpace, pressure: &PressureSpace) -> LinearOperator {
    let mesh = space.mesh();
    let rule = velocity_rule(space.k());
    let caches = [
        BasisCache::new(&space.component(0).elem, &rule),
        BasisCache::new(&space.component(1).elem, &rule),
    ];
    let ps = pressure.scalar();
    let pcache = BasisCache::new(&ps.elem, &rule);
    let nv = space.component(0).elem.num_local() + space.component(1).elem.num_local();
    let np = ps.elem.num_local();
    let mut trip = Vec::new();
    let mut local = vec![0.0; np * nv];
    let mut div = Vec::with_capacity(nv);
    for (i, j, g) in mesh.cells() {
        let [sx, sy] = g.inverse_jacobian();
        let det = g.jacobian_det();
        local.iter_mut().for_each(|v| *v = 0.0);
        for q in 0..rule.len() {
            local_divergences(space, &caches, q, sx, sy, &mut div);
            let w = rule.weights[q] * det;
            for (p, &psi) in pcache.at[q].values.iter().enumerate() {
                for a in 0..nv {
                    local[p * nv + a] -= w * psi * div[a];
                }
            }
        }
        let cell = mesh.cell_index(i, j);
        let vd = stacked_cell_dofs(space, cell);
        for (p, &pd) in ps.dofs.cell_dofs(cell).iter().enumerate() {
            for a in 0..nv {
                trip.push((pd, vd[a], local[p * nv + a]));
            }
        }
    }
    LinearOperator {
        matrix: SparseMatrix::from_triplets(pressure.num_dofs(), space.num_total(), trip),
        rows: DofSpace::Pressure,
        cols: DofSpace::VelocityFull,
        symmetric: false,
    }
}

pub fn assemble_div_pressure(space: &VelocitySpace, pressure: &PressureSpace) -> LinearOperator {
    let full = assemble_div_pressure_unconstrained(space, pressure);
    let rows: Vec<Option<usize>> = (0..pressure.num_dofs()).map(Some).collect();
    let cols = velocity_row_map(space);
    LinearOperator {
        matrix: full.matrix.select(&rows, space.num_interior(), &cols),
        rows: DofSpace::Pressure,
        cols: DofSpace::VelocityInterior,
        symmetric: false,
    }
}

/// `(f, v)` on the interior velocity DOFs.
pub fn assemble_load(f1: &dyn Fn(f64, f64) -> f64, f2: &dyn Fn(f64, f64) -> f64, space: &VelocitySpace) -> Vec<f64> {
    let mesh = space.mesh();
    let rule = velocity_rule(space.k());
    let mut rhs = vec![0.0; space.num_interior()];
    let fs = [f1, f2];
    for c in 0..2 {
        let s = space.component(c);
        let cache = BasisCache::new(&s.elem, &rule);
        let off = space.interior_offset(c);
        for (i, j, g) in mesh.cells() {
            let det = g.jacobian_det();
            let dofs = s.dofs.cell_dofs(mesh.cell_index(i, j));
            for (q, &(xi, eta)) in rule.points.iter().enumerate() {
                let (x, y) = g.map(xi, eta);
                let fw = fs[c](x, y) * rule.weights[q] * det;
                if fw == 0.0 {
                    continue;
                }
                for (a, &d) in dofs.iter().enumerate() {
                    if let Some(ii) = s.dofs.interior_index(d) {
                        rhs[off + ii] += fw * cache.at[q].values[a];
                    }
                }
            }
        }
    }
    rhs
}

/// Mass and stiffness of one scalar space on all of its DOFs.
pub fn assemble_scalar_mass_stiffness(space: &ScalarSpace, mesh: &crate::mesh::Mesh, order: usize) -> (SparseMatrix, SparseMatrix) {
    let rule = TensorRule::new(order).expect("order within range");
    let cache = BasisCache::new(&space.elem, &rule);
    let n = space.elem.num_local();
    let mut mt = Vec::new();
    let mut kt = Vec::new();
    for (i, j, g) in mesh.cells() {
        let [sx, sy] = g.inverse_jacobian();
        let det = g.jacobian_det();
        let mut lm = vec![0.0; n * n];
        let mut lk = vec![0.0; n * n];
        for (q, b) in cache.at.iter().enumerate() {
            let w = rule.weights[q] * det;
            for a in 0..n {
                for bb in 0..n {
                    lm[a * n + bb] += w * b.values[a] * b.values[bb];
                    lk[a * n + bb] += w * (b.grads[a][0] * b.grads[bb][0] * sx * sx + b.grads[a][1] * b.grads[bb][1] * sy * sy);
                }
            }
        }
        let dofs = space.dofs.cell_dofs(mesh.cell_index(i, j));
        for a in 0..n {
            for bb in 0..n {
                mt.push((dofs[a], dofs[bb], lm[a * n + bb]));
                kt.push((dofs[a], dofs[bb], lk[a * n + bb]));
            }
        }
    }
    let nt = space.dofs.total_dofs();
    (SparseMatrix::from_triplets(nt, nt, mt), SparseMatrix::from_triplets(nt, nt, kt))
}

/// Block-diagonal mass matrix of a discontinuous pressure space.
pub fn assemble_pressure_mass(pressure: &PressureSpace) -> LinearOperator {
    let order = pressure.degree() + 2;
    let (m, _) = assemble_scalar_mass_stiffness(pressure.scalar(), pressure.mesh(), order);
    LinearOperator {
        matrix: m,
        rows: DofSpace::Pressure,
        cols: DofSpace::Pressure,
        symmetric: true,
    }
}

/// Full `H^1` inner product (mass + stiffness) restricted to the interior
/// DOFs of one velocity component.
pub fn assemble_h1_gram(space: &VelocitySpace, component: usize) -> LinearOperator {
    let s = space.component(component);
    let (m, k) = assemble_scalar_mass_stiffness(s, space.mesh(), default_order(space.k()));
    let map: Vec<Option<usize>> = (0..s.dofs.total_dofs()).map(|g| s.dofs.interior_index(g)).collect();
    let n = s.dofs.num_interior();
    LinearOperator {
        matrix: m.add_scaled(&k, 1.0).select(&map, n, &map),
        rows: DofSpace::ScalarInterior,
        cols: DofSpace::ScalarInterior,
        symmetric: true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fespace::{br_pressure_space, velocity_space};
    use crate::mesh::Mesh;
    use crate::quadrature::integrate_on_cell;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vec(n: usize, seed: u64) -> Vec<f64> {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| r.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn triplets_sum_duplicates() {
        let m = SparseMatrix::from_triplets(2, 3, vec![(0, 1, 1.0), (1, 2, 2.0), (0, 1, 0.5), (1, 0, -1.0)]);
        assert_eq!(m.get(0, 1), 1.5);
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.matvec(&[1.0, 1.0, 1.0]), vec![1.5, 1.0]);
        assert_eq!(m.transpose_matvec(&[1.0, 2.0]), vec![-2.0, 1.5, 4.0]);
        assert_eq!(m.transpose().get(1, 0), 1.5);
    }

    #[test]
    fn stiffness_rows_sum_to_zero() {
        let m = Mesh::build_uniform(1).unwrap();
        let v = velocity_space(&m, 1).unwrap();
        let a = assemble_stiffness_unconstrained(&v);
        for r in 0..a.matrix.nrows() {
            let s: f64 = a.matrix.row(r).map(|(_, v)| v).sum();
            assert!(s.abs() < 1e-13);
        }
    }

    #[test]
    fn operators_symmetric_and_definite() {
        let m = Mesh::build_uniform(3).unwrap();
        for k in 1..=3 {
            let v = velocity_space(&m, k).unwrap();
            let a = assemble_stiffness(&v);
            let d = assemble_div_div(&v);
            assert!(a.matrix.max_abs_asymmetry() <= 1e-12);
            assert!(d.matrix.max_abs_asymmetry() <= 1e-12);
            for seed in 0..5 {
                let x = random_vec(v.num_interior(), seed);
                assert!(a.matrix.quadratic_form(&x) > 0.0);
                assert!(d.matrix.quadratic_form(&x) >= -1e-14);
            }
            assert!(crate::solvers::SpdSolver::factor(&a.matrix).is_ok());
        }
        assert!(assemble_div_div(&velocity_space(&m, 1).unwrap()).matrix.quadratic_form(&vec![0.0; 2 * 21]) == 0.0);
    }

    #[test]
    fn div_div_matches_direct_quadrature() {
        let m = Mesh::from_coords(vec![0.0, 0.4, 1.0], vec![0.0, 0.3, 0.7, 1.0]).unwrap();
        for k in 1..=3 {
            let v = velocity_space(&m, k).unwrap();
            let d = assemble_div_div(&v);
            let x = random_vec(v.num_interior(), 3 + k as u64);
            let f = v.split_interior(&x);
            let mut direct = 0.0;
            for (i, j, g) in m.cells() {
                direct += integrate_on_cell(
                    &g,
                    |px, py| {
                        let (xi, eta) = g.to_reference(px, py);
                        v.divergence_in_cell(&f, i, j, xi, eta).powi(2)
                    },
                    k + 4,
                )
                .unwrap();
            }
            let q = d.matrix.quadratic_form(&x);
            assert!((q - direct).abs() <= 1e-11 * direct, "{q} vs {direct}");
        }
    }

    #[test]
    fn div_pressure_properties() {
        let m = Mesh::build_uniform(2).unwrap();
        let v = velocity_space(&m, 1).unwrap();
        let p = br_pressure_space(&m, 1).unwrap();
        // constants have zero divergence (before boundary elimination)
        let full = assemble_div_pressure_unconstrained(&v, &p);
        let consts = vec![0.7; v.num_total()];
        assert!(full.apply(&consts).iter().all(|x| x.abs() < 1e-13));
        // against the constant pressure, -int div v = 0 for v in H^1_0
        let b = assemble_div_pressure(&v, &p);
        let x = random_vec(v.num_interior(), 9);
        let bx = b.apply(&x);
        assert!(bx.iter().sum::<f64>().abs() < 1e-13);
    }

    #[test]
    fn div_pressure_single_cell_oracle() {
        // one cell, k=1, column of the bottom-edge midpoint of component 1
        let m = Mesh::build_uniform(1).unwrap();
        let v = velocity_space(&m, 1).unwrap();
        let p = br_pressure_space(&m, 1).unwrap();
        let b = assemble_div_pressure_unconstrained(&v, &p);
        let e = &v.component(0).elem;
        let l = e.local_index(1, 0);
        let g = m.cell_geometry(0, 0).unwrap();
        let direct = -integrate_on_cell(
            &g,
            |x, y| {
                let (xi, eta) = g.to_reference(x, y);
                e.eval_basis(xi, eta).grads[l][0] * 2.0
            },
            4,
        )
        .unwrap();
        assert!((b.matrix.get(0, v.component(0).dofs.cell_dofs(0)[l]) - direct).abs() < 1e-14);
    }

    #[test]
    fn load_of_unit_force() {
        let m = Mesh::build_uniform(2).unwrap();
        let v = velocity_space(&m, 2).unwrap();
        let zero = assemble_load(&|_, _| 0.0, &|_, _| 0.0, &v);
        assert!(zero.iter().all(|&x| x == 0.0));
        let rhs = assemble_load(&|_, _| 1.0, &|_, _| 0.0, &v);
        let s = v.component(0);
        let mass_full = assemble_scalar_mass_stiffness(s, &m, 8).0;
        let ones = vec![1.0; s.dofs.total_dofs()];
        let integrals = mass_full.matvec(&ones);
        for (ii, &g) in s.dofs.interior_dofs().iter().enumerate() {
            assert!((rhs[ii] - integrals[g]).abs() < 1e-14);
        }
        assert!(rhs[s.dofs.num_interior()..].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn h1_gram_is_spd() {
        let m = Mesh::build_uniform(3).unwrap();
        let v = velocity_space(&m, 2).unwrap();
        for c in 0..2 {
            let g = assemble_h1_gram(&v, c);
            assert!(g.matrix.max_abs_asymmetry() < 1e-13);
            assert!(crate::solvers::SpdSolver::factor(&g.matrix).is_ok());
        }
    }
}
