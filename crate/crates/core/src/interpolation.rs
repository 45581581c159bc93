//! Nodal and moment interpolation into the velocity space, nodal pressure
//! interpolation, and dual norms of interpolation-error functionals.

use faer::linalg::solvers::{PartialPivLu, Solve};
use faer::{Col, Mat};
use serde::{Deserialize, Serialize};

use crate::assembly::{assemble_h1_gram, velocity_rule, BasisCache};
use crate::fespace::{combine, PressureSpace, ScalarElement, ScalarSpace, VelocitySpace};
use crate::mesh::Mesh;
use crate::quadrature::{gauss_legendre, legendre, QuadRule1D};
use crate::solvers::{pressure_basis_integrals, remove_mean, SpdSolver};
use crate::{Error, Result};

/// Points per direction for the moment integrals of a smooth field.
const MOMENT_POINTS: usize = 12;

/// Nodal interpolant: the field sampled at every global node of `space`.
pub fn lagrange_interpolate(space: &ScalarSpace, mesh: &Mesh, f: &dyn Fn(f64, f64) -> f64) -> Vec<f64> {
    space.node_coords(mesh).into_iter().map(|(x, y)| f(x, y)).collect()
}

/// Nodal interpolant of a velocity field; boundary nodes keep the sampled
/// values, which vanish for fields in `H^1_0`.
pub fn lagrange_interpolate_velocity(space: &VelocitySpace, u1: &dyn Fn(f64, f64) -> f64, u2: &dyn Fn(f64, f64) -> f64) -> [Vec<f64>; 2] {
    [
        lagrange_interpolate(space.component(0), space.mesh(), u1),
        lagrange_interpolate(space.component(1), space.mesh(), u2),
    ]
}

/// Local conditions of the moment interpolant for one `Q(dx, dy)` element,
/// with the square system mapping local nodal coefficients to them.
///
/// Conditions, in order: the four vertex values; moments against
/// `P_0..P_{dx-2}` on the bottom then top edge; against `P_0..P_{dy-2}` on the
/// left then right edge; interior moments against `P_a(x) P_b(y)`.
pub struct MomentInterpolationSystem {
    dx: usize,
    dy: usize,
    matrix: Mat<f64>,
    lu: PartialPivLu<f64>,
    condition: f64,
}

impl std::fmt::Debug for MomentInterpolationSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MomentInterpolationSystem")
            .field("dx", &self.dx)
            .field("dy", &self.dy)
            .field("condition", &self.condition)
            .finish()
    }
}

/// Evaluates the moment conditions of a function given on the reference
/// square.
fn moment_conditions(dx: usize, dy: usize, rule: &QuadRule1D, f: &dyn Fn(f64, f64) -> f64) -> Vec<f64> {
    let mut out = Vec::with_capacity((dx + 1) * (dy + 1));
    for (xi, eta) in [(-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0), (1.0, 1.0)] {
        out.push(f(xi, eta));
    }
    for eta in [-1.0, 1.0] {
        for m in 0..dx.saturating_sub(1) {
            out.push(rule.integrate(|t| f(t, eta) * legendre(m, t)));
        }
    }
    for xi in [-1.0, 1.0] {
        for m in 0..dy.saturating_sub(1) {
            out.push(rule.integrate(|t| f(xi, t) * legendre(m, t)));
        }
    }
    for b in 0..dy.saturating_sub(1) {
        for a in 0..dx.saturating_sub(1) {
            out.push(rule.integrate(|s| rule.integrate(|t| f(t, s) * legendre(a, t)) * legendre(b, s)));
        }
    }
    out
}

impl MomentInterpolationSystem {
    pub fn new(elem: &ScalarElement) -> Result<Self> {
        let (dx, dy) = (elem.deg_x(), elem.deg_y());
        let n = elem.num_local();
        let count = 4 + 2 * (dx - 1) + 2 * (dy - 1) + (dx - 1) * (dy - 1);
        debug_assert_eq!(count, n);
        // basis functions have degree <= max(dx, dy); the products with the
        // test polynomials are integrated exactly
        let rule = gauss_legendre(dx.max(dy) + 1)?;
        let mut matrix = Mat::<f64>::zeros(n, n);
        for j in 0..n {
            let col = moment_conditions(dx, dy, &rule, &|xi, eta| elem.eval_basis(xi, eta).values[j]);
            for (i, v) in col.into_iter().enumerate() {
                matrix[(i, j)] = v;
            }
        }
        let sv = matrix.as_ref().singular_values().map_err(|e| Error::Backend(format!("{e:?}")))?;
        let smax = sv.iter().copied().fold(0.0, f64::max);
        let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
        if !(smin > 1e-12 * smax) {
            return Err(Error::SingularSystem(format!("moment conditions for Q({dx},{dy})")));
        }
        let condition = smax / smin;
        log::debug!("moment system Q({dx},{dy}): condition number {condition:.3e}");
        let lu = matrix.partial_piv_lu();
        Ok(Self {
            dx,
            dy,
            matrix,
            lu,
            condition,
        })
    }

    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    /// 2-norm condition number.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn determinant(&self) -> f64 {
        self.matrix.as_ref().determinant()
    }

    /// Condition values of `f` (reference coordinates) with `points`-point
    /// Gauss rules for the moments.
    pub fn conditions_of(&self, f: &dyn Fn(f64, f64) -> f64, points: usize) -> Result<Vec<f64>> {
        Ok(moment_conditions(self.dx, self.dy, &gauss_legendre(points)?, f))
    }

    /// Local nodal coefficients matching the given condition values.
    pub fn solve(&self, conditions: &[f64]) -> Vec<f64> {
        let rhs = Col::<f64>::from_fn(self.size(), |i| conditions[i]);
        let x = self.lu.solve(&rhs);
        x.iter().copied().collect()
    }
}

/// Moment interpolant of one field into one velocity component.
#[derive(Clone, Debug)]
pub struct MomentInterpolant {
    /// Global nodal coefficients (all DOFs).
    pub coeffs: Vec<f64>,
    /// Local coefficients, `cell * num_local + local`.
    pub cell_coeffs: Vec<f64>,
    /// Largest disagreement between cells sharing a node.
    pub max_mismatch: f64,
}

pub fn moment_interpolate(space: &VelocitySpace, component: usize, u: &dyn Fn(f64, f64) -> f64) -> Result<MomentInterpolant> {
    let s = space.component(component);
    let mesh = space.mesh();
    let sys = MomentInterpolationSystem::new(&s.elem)?;
    let rule = gauss_legendre(MOMENT_POINTS)?;
    let n = s.elem.num_local();
    let mut coeffs = vec![f64::NAN; s.dofs.total_dofs()];
    let mut cell_coeffs = Vec::with_capacity(mesh.num_cells() * n);
    let mut max_mismatch: f64 = 0.0;
    for (i, j, g) in mesh.cells() {
        let cond = moment_conditions(sys.dx, sys.dy, &rule, &|xi, eta| {
            let (x, y) = g.map(xi, eta);
            u(x, y)
        });
        let local = sys.solve(&cond);
        for (&d, &v) in s.dofs.cell_dofs(mesh.cell_index(i, j)).iter().zip(&local) {
            if coeffs[d].is_nan() {
                coeffs[d] = v;
            } else {
                max_mismatch = max_mismatch.max((coeffs[d] - v).abs());
            }
        }
        cell_coeffs.extend(local);
    }
    Ok(MomentInterpolant {
        coeffs,
        cell_coeffs,
        max_mismatch,
    })
}

/// Nodal interpolation on the pressure lattice of each cell, shifted to mean
/// zero.
pub fn interpolate_pressure(pressure: &PressureSpace, p: &dyn Fn(f64, f64) -> f64) -> Vec<f64> {
    let mut c = lagrange_interpolate(pressure.scalar(), pressure.mesh(), p);
    remove_mean(&mut c, &pressure_basis_integrals(pressure));
    c
}

/// Derivative pair `(a, b)` of the functional `psi -> int d_a e d_b psi`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DerivPair {
    XX,
    YY,
    XY,
    YX,
}

impl DerivPair {
    pub const ALL: [DerivPair; 4] = [DerivPair::XX, DerivPair::YY, DerivPair::XY, DerivPair::YX];

    /// Indices of `a` and `b` (0 for x, 1 for y).
    pub fn indices(self) -> (usize, usize) {
        match self {
            DerivPair::XX => (0, 0),
            DerivPair::YY => (1, 1),
            DerivPair::XY => (0, 1),
            DerivPair::YX => (1, 0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DerivPair::XX => "xx",
            DerivPair::YY => "yy",
            DerivPair::XY => "xy",
            DerivPair::YX => "yx",
        }
    }

    /// Test space paired with `component` in the div-div form: the same
    /// component for `xx`/`yy`, the other one for mixed pairs.
    pub fn natural_test_component(self, component: usize) -> usize {
        match self {
            DerivPair::XX | DerivPair::YY => component,
            DerivPair::XY | DerivPair::YX => 1 - component,
        }
    }
}

impl std::str::FromStr for DerivPair {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "xx" => Ok(DerivPair::XX),
            "yy" => Ok(DerivPair::YY),
            "xy" => Ok(DerivPair::XY),
            "yx" => Ok(DerivPair::YX),
            other => Err(Error::InvalidConfig(format!("unknown derivative pair {other:?}"))),
        }
    }
}

/// Dual norm `sup_psi |int d_a (u - u_I) d_b psi| / ||psi||_{H1}` over the
/// interior DOFs of velocity component `test_component`, where `u_I` is the
/// moment interpolant of `u` into component `component`.
///
/// The supremum is `sqrt(r^T G^{-1} r)` with `G` the `H^1` Gram matrix.
pub fn lemma_functional_norm(
    space: &VelocitySpace,
    component: usize,
    pair: DerivPair,
    test_component: usize,
    u: &dyn Fn(f64, f64) -> f64,
    u_grad: &dyn Fn(f64, f64) -> [f64; 2],
) -> Result<f64> {
    if component > 1 || test_component > 1 {
        return Err(Error::InvalidConfig("velocity components are 0 and 1".into()));
    }
    let interp = moment_interpolate(space, component, u)?;
    let (a, b) = pair.indices();
    let mesh = space.mesh();
    let trial = space.component(component);
    let test = space.component(test_component);
    let rule = velocity_rule(space.k());
    let trial_cache = BasisCache::new(&trial.elem, &rule);
    let test_cache = BasisCache::new(&test.elem, &rule);
    let mut r = vec![0.0; test.dofs.num_interior()];
    for (i, j, g) in mesh.cells() {
        let cell = mesh.cell_index(i, j);
        let det = g.jacobian_det();
        let scale = g.inverse_jacobian();
        let trial_dofs = trial.dofs.cell_dofs(cell);
        let test_dofs = test.dofs.cell_dofs(cell);
        for (q, &(xi, eta)) in rule.points.iter().enumerate() {
            let (x, y) = g.map(xi, eta);
            let (_, gi) = combine(&trial_cache.at[q], trial_dofs, &interp.coeffs, &g);
            let e = u_grad(x, y)[a] - gi[a];
            let w = rule.weights[q] * det * e;
            for (l, &d) in test_dofs.iter().enumerate() {
                if let Some(ii) = test.dofs.interior_index(d) {
                    r[ii] += w * test_cache.at[q].grads[l][b] * scale[b];
                }
            }
        }
    }
    let gram = assemble_h1_gram(space, test_component);
    let z = SpdSolver::factor(&gram.matrix)?.solve(&r);
    Ok(r.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>().max(0.0).sqrt())
}
