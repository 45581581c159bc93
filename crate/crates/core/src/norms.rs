//! Error norms, divergence norms and convergence rates.

use serde::{Deserialize, Serialize};

use crate::assembly::{BasisCache, LinearOperator};
use crate::fespace::{combine, NodeFamily, ScalarSpace, VelocitySpace};
use crate::mesh::Mesh;
use crate::poly2d::SolutionVariant;
use crate::quadrature::TensorRule;
use crate::solvers::ElementKind;

/// Errors at or below this are treated as exhausted; no rate is reported.
pub const SATURATION: f64 = 1e-14;

fn rule_for(space: &ScalarSpace) -> TensorRule {
    let deg = space.elem.deg_x().max(space.elem.deg_y());
    TensorRule::new(deg + 5).expect("order within range")
}

/// Sums `integrand(value, grad, x, y) * weight` over all quadrature points.
fn integrate_field(space: &ScalarSpace, mesh: &Mesh, coeffs: &[f64], integrand: impl Fn(f64, [f64; 2], f64, f64) -> f64) -> f64 {
    let rule = rule_for(space);
    let cache = BasisCache::new(&space.elem, &rule);
    let mut total = 0.0;
    for (i, j, g) in mesh.cells() {
        let det = g.jacobian_det();
        let dofs = space.dofs.cell_dofs(mesh.cell_index(i, j));
        let mut cell = 0.0;
        for (q, &(xi, eta)) in rule.points.iter().enumerate() {
            let (v, grad) = combine(&cache.at[q], dofs, coeffs, &g);
            let (x, y) = g.map(xi, eta);
            cell += rule.weights[q] * integrand(v, grad, x, y);
        }
        total += cell * det;
    }
    total
}

/// `||u_h - u||_{L2}` for a scalar field.
pub fn error_l2(space: &ScalarSpace, mesh: &Mesh, coeffs: &[f64], exact: &dyn Fn(f64, f64) -> f64) -> f64 {
    integrate_field(space, mesh, coeffs, |v, _, x, y| (v - exact(x, y)).powi(2))
        .max(0.0)
        .sqrt()
}

/// `|u_h - u|_{H1}` for a scalar field.
pub fn error_h1_semi(space: &ScalarSpace, mesh: &Mesh, coeffs: &[f64], exact_grad: &dyn Fn(f64, f64) -> [f64; 2]) -> f64 {
    integrate_field(space, mesh, coeffs, |_, g, x, y| {
        let e = exact_grad(x, y);
        (g[0] - e[0]).powi(2) + (g[1] - e[1]).powi(2)
    })
    .max(0.0)
    .sqrt()
}

pub fn zero_field(_: f64, _: f64) -> f64 {
    0.0
}

pub fn zero_gradient(_: f64, _: f64) -> [f64; 2] {
    [0.0, 0.0]
}

/// Vector `L2` error over both velocity components.
pub fn velocity_error_l2(space: &VelocitySpace, coeffs: &[Vec<f64>; 2], exact: [&dyn Fn(f64, f64) -> f64; 2]) -> f64 {
    (0..2)
        .map(|c| error_l2(space.component(c), space.mesh(), &coeffs[c], exact[c]).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Vector `H1` seminorm error over both velocity components.
pub fn velocity_error_h1_semi(space: &VelocitySpace, coeffs: &[Vec<f64>; 2], exact_grad: [&dyn Fn(f64, f64) -> [f64; 2]; 2]) -> f64 {
    (0..2)
        .map(|c| error_h1_semi(space.component(c), space.mesh(), &coeffs[c], exact_grad[c]).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// `sqrt(u^T D u)` from the assembled div-div operator.
///
/// Cancellation limits this to roughly `1e-7` absolute on large grids; use
/// [`div_norm_quadrature`] for stopping tests.
pub fn div_norm(div_div: &LinearOperator, u: &[f64]) -> f64 {
    div_div.matrix.quadratic_form(u).max(0.0).sqrt()
}

/// `||div u_h||_{L2}` by evaluating the divergence at quadrature points.
pub fn div_norm_quadrature(space: &VelocitySpace, u: &[f64]) -> f64 {
    let mesh = space.mesh();
    let coeffs = space.split_interior(u);
    let rule = crate::assembly::velocity_rule(space.k());
    let caches = [
        BasisCache::new(&space.component(0).elem, &rule),
        BasisCache::new(&space.component(1).elem, &rule),
    ];
    let mut total = 0.0;
    for (i, j, g) in mesh.cells() {
        let cell = mesh.cell_index(i, j);
        let d1 = space.component(0).dofs.cell_dofs(cell);
        let d2 = space.component(1).dofs.cell_dofs(cell);
        let mut acc = 0.0;
        for q in 0..rule.len() {
            let (_, g1) = combine(&caches[0].at[q], d1, &coeffs[0], &g);
            let (_, g2) = combine(&caches[1].at[q], d2, &coeffs[1], &g);
            acc += rule.weights[q] * (g1[0] + g2[1]).powi(2);
        }
        total += acc * g.jacobian_det();
    }
    total.sqrt()
}

/// `n_l = log2(e_{l-1} / e_l)`; `None` for the first entry and whenever
/// either error is saturated.
pub fn rates(errors: &[f64]) -> Vec<Option<f64>> {
    let mut out = Vec::with_capacity(errors.len());
    out.push(None);
    for w in errors.windows(2) {
        let (coarse, fine) = (w[0], w[1]);
        out.push((coarse > SATURATION && fine > SATURATION).then(|| (coarse / fine).log2()));
    }
    out
}

/// Errors and solver statistics on one refinement level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub level: u32,
    pub h: f64,
    /// `||u_h - I_h u||_{L2}` with the Lagrange interpolant.
    pub e_l2: f64,
    /// `|u_h - I_h u|_{H1}`.
    pub e_h1: f64,
    /// `||p_h - p_I||_{L2}`.
    pub p_l2: f64,
    /// `||u - u_h||_{L2}`.
    pub true_l2: f64,
    /// `|u - u_h|_{H1}`.
    pub true_h1: f64,
    /// `||p - p_h||_{L2}`.
    pub true_p_l2: f64,
    pub iterations: usize,
    pub div_norm: f64,
    pub velocity_dofs: usize,
    pub pressure_dofs: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub element: ElementKind,
    pub k: usize,
    pub solution: SolutionVariant,
    pub nodes: NodeFamily,
    pub levels: Vec<LevelRecord>,
}

impl ConvergenceReport {
    fn column(&self, f: impl Fn(&LevelRecord) -> f64) -> Vec<Option<f64>> {
        rates(&self.levels.iter().map(f).collect::<Vec<_>>())
    }

    pub fn rates_l2(&self) -> Vec<Option<f64>> {
        self.column(|r| r.e_l2)
    }

    pub fn rates_h1(&self) -> Vec<Option<f64>> {
        self.column(|r| r.e_h1)
    }

    pub fn rates_p(&self) -> Vec<Option<f64>> {
        self.column(|r| r.p_l2)
    }

    pub fn rates_true_l2(&self) -> Vec<Option<f64>> {
        self.column(|r| r.true_l2)
    }

    pub fn rates_true_h1(&self) -> Vec<Option<f64>> {
        self.column(|r| r.true_h1)
    }

    pub fn rates_true_p(&self) -> Vec<Option<f64>> {
        self.column(|r| r.true_p_l2)
    }

    /// Rate over the last level pair of a column.
    pub fn last_rate(column: &[Option<f64>]) -> Option<f64> {
        column.last().copied().flatten()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble_div_div, assemble_scalar_mass_stiffness};
    use crate::fespace::velocity_space;
    use rand::{Rng, SeedableRng};

    #[test]
    fn rate_examples() {
        let r = rates(&[0.219469, 0.055901]);
        assert!((r[1].unwrap() - 1.973).abs() < 1e-3);
        assert_eq!(rates(&[4.0, 1.0])[1], Some(2.0));
        assert!((rates(&[0.089611, 0.010471])[1].unwrap() - 3.097).abs() < 1e-3);
        assert_eq!(rates(&[1.0, 1e-16]), vec![None, None]);
        assert_eq!(rates(&[1.0]), vec![None]);
    }

    #[test]
    fn trivial_norms() {
        let m = Mesh::build_uniform(3).unwrap();
        let v = velocity_space(&m, 2).unwrap();
        let s = v.component(0);
        let coords = s.node_coords(&m);
        let x_field: Vec<f64> = coords.iter().map(|p| p.0).collect();
        assert!(error_l2(s, &m, &x_field, &|x, _| x) < 1e-13);
        assert!(error_h1_semi(s, &m, &x_field, &|_, _| [1.0, 0.0]) < 1e-12);
        assert!((error_h1_semi(s, &m, &x_field, &zero_gradient) - 1.0).abs() < 1e-13);
        let zeros = vec![0.0; s.dofs.total_dofs()];
        assert!((error_l2(s, &m, &zeros, &|_, _| 1.0) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn single_basis_l2_matches_mass() {
        let m = Mesh::build_uniform(2).unwrap();
        let v = velocity_space(&m, 3).unwrap();
        let s = v.component(1);
        let (mass, _) = assemble_scalar_mass_stiffness(s, &m, 12);
        for g in [0usize, 7, 23] {
            let mut e = vec![0.0; s.dofs.total_dofs()];
            e[g] = 1.0;
            let l2 = error_l2(s, &m, &e, &zero_field);
            let exact = mass.get(g, g).sqrt();
            assert!((l2 - exact).abs() <= 1e-12 * exact);
        }
    }

    #[test]
    fn div_norm_agrees_with_operator() {
        let m = Mesh::build_uniform(3).unwrap();
        let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for k in 1..=3 {
            let v = velocity_space(&m, k).unwrap();
            let d = assemble_div_div(&v);
            let u: Vec<f64> = (0..v.num_interior()).map(|_| r.gen_range(-1.0..1.0)).collect();
            let a = div_norm(&d, &u).powi(2);
            let b = div_norm_quadrature(&v, &u).powi(2);
            assert!((a - b).abs() <= 1e-11 * a);
        }
        let v = velocity_space(&m, 1).unwrap();
        assert_eq!(div_norm_quadrature(&v, &vec![0.0; v.num_interior()]), 0.0);
    }
}
