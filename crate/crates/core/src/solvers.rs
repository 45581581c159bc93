//! Linear and saddle-point solvers.
//!
//! The divergence-free element is solved by the iterated penalty method and
//! never builds its pressure space; the Bernardi-Raugel element is solved by
//! mass-preconditioned Uzawa iteration on its `Q(k-1)` pressure.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Col, Mat, Side};
use serde::{Deserialize, Serialize};

use crate::assembly::{assemble_div_div, assemble_div_pressure, assemble_pressure_mass, assemble_stiffness, LinearOperator, SparseMatrix};
use crate::fespace::{br_pressure_space, divfree_pressure_space, PressureSpace, VelocitySpace};
use crate::norms::div_norm_quadrature;
use crate::{Error, Result};

/// `p_h = PRESSURE_SIGN * div w` for the penalty accumulator `w`.
pub const PRESSURE_SIGN: f64 = -1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ElementKind {
    #[serde(rename = "divfree")]
    DivFree,
    #[serde(rename = "br")]
    BernardiRaugel,
}

impl ElementKind {
    pub fn name(self) -> &'static str {
        match self {
            ElementKind::DivFree => "divfree",
            ElementKind::BernardiRaugel => "br",
        }
    }
}

impl std::fmt::Display for ElementKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

fn norm_inf(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

fn matrix_norm_inf(a: &SparseMatrix) -> f64 {
    (0..a.nrows()).map(|r| a.row(r).map(|(_, v)| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Sparse Cholesky factorization, reusable across right-hand sides.
pub struct SpdSolver {
    llt: faer::sparse::linalg::solvers::Llt<usize, f64>,
    n: usize,
}

impl std::fmt::Debug for SpdSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpdSolver").field("n", &self.n).finish()
    }
}

impl SpdSolver {
    /// Factors a symmetric positive definite matrix (lower triangle is read).
    pub fn factor(a: &SparseMatrix) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::SingularSystem(format!("matrix is {}x{}", n, a.ncols())));
        }
        let trips: Vec<Triplet<usize, usize, f64>> = a.triplets().filter(|&(r, c, _)| r >= c).map(|(r, c, v)| Triplet::new(r, c, v)).collect();
        let m = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trips).map_err(|e| Error::Backend(format!("{e:?}")))?;
        let llt = m.sp_cholesky(Side::Lower).map_err(|e| match e {
            faer::sparse::linalg::LltError::Numeric(faer::linalg::cholesky::llt::factor::LltError::NonPositivePivot { index }) => {
                Error::NotPositiveDefinite { pivot: index }
            }
            other => Error::Backend(format!("{other:?}")),
        })?;
        Ok(Self { llt, n })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        assert_eq!(rhs.len(), self.n);
        let mut x = Col::<f64>::from_fn(self.n, |i| rhs[i]);
        self.llt.solve_in_place(x.as_mat_mut());
        x.iter().copied().collect()
    }

    /// Solve followed by up to two steps of iterative refinement; fails if the
    /// normwise backward error `|Ax - b| / (|A| |x| + |b|)` exceeds `tol`.
    pub fn solve_refined(&self, a: &SparseMatrix, rhs: &[f64], tol: f64) -> Result<Vec<f64>> {
        let mut x = self.solve(rhs);
        let a_norm = matrix_norm_inf(a);
        let mut backward = f64::INFINITY;
        for step in 0..3 {
            let ax = a.matvec(&x);
            let r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, v)| b - v).collect();
            let scale = a_norm * norm_inf(&x) + norm_inf(rhs);
            backward = if scale > 0.0 { norm_inf(&r) / scale } else { 0.0 };
            if backward <= f64::EPSILON * 4.0 || step == 2 {
                break;
            }
            let dx = self.solve(&r);
            x.iter_mut().zip(&dx).for_each(|(xi, d)| *xi += d);
        }
        if backward > tol {
            return Err(Error::SolveResidual { residual: backward, tol });
        }
        Ok(x)
    }
}

fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Solves `A x = b` for a symmetric positive definite operator; fails unless
/// `|Ax - b| <= tol |b|` in the Euclidean norm.
pub fn solve_spd(op: &LinearOperator, rhs: &[f64], tol: f64) -> Result<Vec<f64>> {
    if !op.symmetric {
        return Err(Error::InvalidConfig("solve_spd needs a symmetric operator".into()));
    }
    let x = SpdSolver::factor(&op.matrix)?.solve_refined(&op.matrix, rhs, f64::INFINITY)?;
    let ax = op.apply(&x);
    let r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, v)| b - v).collect();
    let residual = norm2(&r);
    if residual > tol * norm2(rhs) {
        return Err(Error::SolveResidual { residual, tol });
    }
    Ok(x)
}

/// Backward-error tolerance for the inner SPD solves.
pub const INNER_SOLVE_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PenaltyConfig {
    pub r: f64,
    /// Stop once `||div u^n||_{L2}` is at or below this.
    pub div_tol: f64,
    pub max_iter: usize,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        Self {
            r: 2000.0,
            div_tol: 1e-9,
            max_iter: 50,
        }
    }
}

impl PenaltyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(Error::InvalidConfig(format!("penalty parameter must be positive, got {}", self.r)));
        }
        if !(self.div_tol > 0.0) || self.max_iter == 0 {
            return Err(Error::InvalidConfig("penalty tolerance and iteration cap must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct UzawaConfig {
    pub alpha: f64,
    /// Stop once the max-norm pressure increment is at or below this.
    pub p_tol: f64,
    pub max_iter: usize,
    /// Consecutive growing increments that count as divergence.
    pub divergence_window: usize,
}

impl Default for UzawaConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            p_tol: 1e-6,
            max_iter: 5000,
            divergence_window: 50,
        }
    }
}

impl UzawaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidConfig(format!("Uzawa step must be positive, got {}", self.alpha)));
        }
        if !(self.p_tol > 0.0) || self.max_iter == 0 || self.divergence_window == 0 {
            return Err(Error::InvalidConfig("Uzawa tolerance and iteration limits must be positive".into()));
        }
        Ok(())
    }
}

/// Output of [`iterated_penalty`].
#[derive(Clone, Debug)]
pub struct PenaltyOutput {
    /// Interior velocity `u^n`.
    pub velocity: Vec<f64>,
    /// `w^{n+1} = r (u^0 + ... + u^n)`.
    pub accumulator: Vec<f64>,
    /// Number of linear solves.
    pub iterations: usize,
    pub div_norm: f64,
    /// Divergence measure after every solve.
    pub history: Vec<f64>,
}

/// Iterated penalty method: `(A + rD) u^n = F - D w^n`, `w^{n+1} = w^n + r u^n`,
/// starting from `w^0 = 0`.
///
/// `div_measure` maps an interior velocity to `||div u||`; the iteration stops
/// at the first `u^n` it reports at or below `cfg.div_tol`.
pub fn iterated_penalty(a: &LinearOperator, d: &LinearOperator, load: &[f64], cfg: &PenaltyConfig, div_measure: &dyn Fn(&[f64]) -> f64) -> Result<PenaltyOutput> {
    cfg.validate()?;
    let k = a.matrix.add_scaled(&d.matrix, cfg.r);
    let solver = SpdSolver::factor(&k)?;
    let n = load.len();
    let mut w = vec![0.0; n];
    let mut history = Vec::new();
    for it in 1..=cfg.max_iter {
        let dw = d.apply(&w);
        let rhs: Vec<f64> = load.iter().zip(&dw).map(|(f, x)| f - x).collect();
        let u = solver.solve_refined(&k, &rhs, INNER_SOLVE_TOL)?;
        w.iter_mut().zip(&u).for_each(|(wi, ui)| *wi += cfg.r * ui);
        let dn = div_measure(&u);
        log::debug!("penalty iteration {it}: div = {dn:.3e}");
        history.push(dn);
        if dn <= cfg.div_tol {
            return Ok(PenaltyOutput {
                velocity: u,
                accumulator: w,
                iterations: it,
                div_norm: dn,
                history,
            });
        }
    }
    Err(Error::MaxIterations {
        method: "iterated penalty",
        iterations: cfg.max_iter,
        last: history.last().copied().unwrap_or(f64::NAN),
    })
}

/// `int psi_q` for every pressure basis function.
pub fn pressure_basis_integrals(pressure: &PressureSpace) -> Vec<f64> {
    let m = assemble_pressure_mass(pressure);
    m.apply(&vec![1.0; pressure.num_dofs()])
}

/// Subtracts the mean so that `int p = 0`.
pub fn remove_mean(coeffs: &mut [f64], integrals: &[f64]) {
    let area: f64 = integrals.iter().sum();
    let mean = coeffs.iter().zip(integrals).map(|(c, w)| c * w).sum::<f64>() / area;
    coeffs.iter_mut().for_each(|c| *c -= mean);
}

/// Nodal coefficients of `PRESSURE_SIGN * div w` in a discontinuous
/// `Q(k)` space, shifted to mean zero.
///
/// `div w` lies in that space, so the nodal values represent it exactly.
pub fn recover_pressure(space: &VelocitySpace, pressure: &PressureSpace, accumulator: &[f64]) -> Vec<f64> {
    let mesh = space.mesh();
    let w = space.split_interior(accumulator);
    let pe = &pressure.scalar().elem;
    let nodes: Vec<(f64, f64)> = (0..pe.num_local()).map(|l| pe.node_ref(l)).collect();
    let basis: Vec<[crate::fespace::BasisValues; 2]> = nodes
        .iter()
        .map(|&(xi, eta)| [space.component(0).elem.eval_basis(xi, eta), space.component(1).elem.eval_basis(xi, eta)])
        .collect();
    let mut p = vec![0.0; pressure.num_dofs()];
    for (i, j, g) in mesh.cells() {
        let cell = mesh.cell_index(i, j);
        let pd = pressure.scalar().dofs.cell_dofs(cell);
        for (l, b) in basis.iter().enumerate() {
            let (_, g1) = crate::fespace::combine(&b[0], space.component(0).dofs.cell_dofs(cell), &w[0], &g);
            let (_, g2) = crate::fespace::combine(&b[1], space.component(1).dofs.cell_dofs(cell), &w[1], &g);
            p[pd[l]] = PRESSURE_SIGN * (g1[0] + g2[1]);
        }
    }
    remove_mean(&mut p, &pressure_basis_integrals(pressure));
    p
}

/// Output of [`uzawa`].
#[derive(Clone, Debug)]
pub struct UzawaOutput {
    pub velocity: Vec<f64>,
    pub pressure: Vec<f64>,
    pub iterations: usize,
    /// Max-norm pressure increment of the last step.
    pub last_increment: f64,
}

/// Uzawa iteration for `A u + B^T p = F`, `B u = 0`, `int p = 0`:
/// `u = A^{-1}(F - B^T p)`, `p <- p + alpha M^{-1} B u`, then mean removal.
///
/// `weights` holds `int psi_q` for the mean constraint.
pub fn uzawa(a: &LinearOperator, b: &LinearOperator, m: &LinearOperator, load: &[f64], weights: &[f64], cfg: &UzawaConfig) -> Result<UzawaOutput> {
    cfg.validate()?;
    let a_solver = SpdSolver::factor(&a.matrix)?;
    let m_solver = SpdSolver::factor(&m.matrix)?;
    let np = b.matrix.nrows();
    let mut p = vec![0.0; np];
    let velocity_for = |p: &[f64]| -> Result<Vec<f64>> {
        let btp = b.matrix.transpose_matvec(p);
        let rhs: Vec<f64> = load.iter().zip(&btp).map(|(f, x)| f - x).collect();
        a_solver.solve_refined(&a.matrix, &rhs, INNER_SOLVE_TOL)
    };
    let mut prev_inc = f64::INFINITY;
    let mut growing = 0usize;
    for it in 1..=cfg.max_iter {
        let u = velocity_for(&p)?;
        let bu = b.apply(&u);
        let step = m_solver.solve_refined(&m.matrix, &bu, INNER_SOLVE_TOL)?;
        let mut next: Vec<f64> = p.iter().zip(&step).map(|(pi, s)| pi + cfg.alpha * s).collect();
        remove_mean(&mut next, weights);
        let inc = next.iter().zip(&p).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        p = next;
        if it % 100 == 0 {
            log::debug!("uzawa iteration {it}: increment = {inc:.3e}");
        }
        if !inc.is_finite() {
            return Err(Error::Diverged { method: "uzawa", iterations: it });
        }
        if inc <= cfg.p_tol {
            let velocity = velocity_for(&p)?;
            return Ok(UzawaOutput {
                velocity,
                pressure: p,
                iterations: it,
                last_increment: inc,
            });
        }
        growing = if inc > prev_inc { growing + 1 } else { 0 };
        if growing >= cfg.divergence_window {
            return Err(Error::Diverged { method: "uzawa", iterations: it });
        }
        prev_inc = inc;
    }
    Err(Error::MaxIterations {
        method: "uzawa",
        iterations: cfg.max_iter,
        last: prev_inc,
    })
}

/// Dense direct solve of the bordered system
/// `[A B^T 0; B 0 c; 0 c^T 0] [u; p; lambda] = [F; 0; 0]`.
///
/// Intended for cross-checking on small grids.
pub fn solve_saddle_direct(a: &SparseMatrix, b: &SparseMatrix, c: &[f64], load: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let nu = a.nrows();
    let np = b.nrows();
    let n = nu + np + 1;
    let mut k = Mat::<f64>::zeros(n, n);
    for (r, col, v) in a.triplets() {
        k[(r, col)] = v;
    }
    for (r, col, v) in b.triplets() {
        k[(nu + r, col)] = v;
        k[(col, nu + r)] = v;
    }
    for (q, &w) in c.iter().enumerate() {
        k[(nu + q, n - 1)] = w;
        k[(n - 1, nu + q)] = w;
    }
    let rhs = Col::<f64>::from_fn(n, |i| if i < nu { load[i] } else { 0.0 });
    let x = k.partial_piv_lu().solve(&rhs);
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem("bordered saddle-point matrix".into()));
    }
    let kx = &k * &x;
    let res = (0..n).map(|i| (kx[i] - rhs[i]).abs()).fold(0.0, f64::max);
    let scale = norm_inf(load).max(1e-300);
    if res > 1e-8 * scale {
        return Err(Error::SingularSystem(format!("direct solve residual {res:.3e}")));
    }
    let u = (0..nu).map(|i| x[i]).collect();
    let p = (0..np).map(|i| x[nu + i]).collect();
    Ok((u, p))
}

/// Discrete Stokes solution on one grid.
#[derive(Clone, Debug)]
pub struct StokesSolution {
    pub element: ElementKind,
    /// Interior velocity DOFs.
    pub velocity: Vec<f64>,
    /// Coefficients in the discontinuous pressure space of `pressure_degree`.
    pub pressure: Vec<f64>,
    pub pressure_degree: usize,
    /// Penalty accumulator `w`; only for the divergence-free element.
    pub accumulator: Option<Vec<f64>>,
    pub iterations: usize,
    pub div_norm: f64,
}

impl StokesSolution {
    pub fn pressure_space(&self, space: &VelocitySpace) -> PressureSpace {
        PressureSpace::new(space.mesh(), self.pressure_degree)
    }
}

/// Divergence-free element by iterated penalty; the pressure is recovered in
/// discontinuous `Q(k)`.
pub fn solve_divfree(space: &VelocitySpace, load: &[f64], cfg: &PenaltyConfig) -> Result<StokesSolution> {
    let a = assemble_stiffness(space);
    let d = assemble_div_div(space);
    let out = iterated_penalty(&a, &d, load, cfg, &|u| div_norm_quadrature(space, u))?;
    let pressure = divfree_pressure_space(space.mesh(), space.k())?;
    let p = recover_pressure(space, &pressure, &out.accumulator);
    Ok(StokesSolution {
        element: ElementKind::DivFree,
        velocity: out.velocity,
        pressure: p,
        pressure_degree: pressure.degree(),
        accumulator: Some(out.accumulator),
        iterations: out.iterations,
        div_norm: out.div_norm,
    })
}

/// Rotated Bernardi-Raugel element with discontinuous `Q(k-1)` pressure.
pub fn solve_bernardi_raugel(space: &VelocitySpace, load: &[f64], cfg: &UzawaConfig) -> Result<StokesSolution> {
    let pressure = br_pressure_space(space.mesh(), space.k())?;
    let a = assemble_stiffness(space);
    let b = assemble_div_pressure(space, &pressure);
    let m = assemble_pressure_mass(&pressure);
    let weights = pressure_basis_integrals(&pressure);
    let out = uzawa(&a, &b, &m, load, &weights, cfg)?;
    let div_norm = div_norm_quadrature(space, &out.velocity);
    Ok(StokesSolution {
        element: ElementKind::BernardiRaugel,
        velocity: out.velocity,
        pressure: out.pressure,
        pressure_degree: pressure.degree(),
        accumulator: None,
        iterations: out.iterations,
        div_norm,
    })
}
