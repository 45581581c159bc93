//! Convergence studies, dual-norm decay studies and field dumps against the
//! manufactured polynomial solutions.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::assembly::assemble_load;
use crate::fespace::{NodeFamily, VelocitySpace, DEFAULT_VELOCITY_NODES, MAX_K};
use crate::interpolation::{interpolate_pressure, lagrange_interpolate_velocity, lemma_functional_norm, DerivPair};
use crate::mesh::Mesh;
use crate::norms::{error_l2, rates, velocity_error_h1_semi, velocity_error_l2, zero_field, zero_gradient, ConvergenceReport, LevelRecord};
use crate::poly2d::{make_manufactured, SolutionVariant, StokesManufactured};
use crate::solvers::{solve_bernardi_raugel, solve_divfree, ElementKind, PenaltyConfig, StokesSolution, UzawaConfig};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Text,
    Csv,
    Json,
}

/// Level range used when none is given.
pub fn default_levels(k: usize) -> (u32, u32) {
    match k {
        1 => (2, 7),
        2 => (1, 7),
        _ => (1, 5),
    }
}

/// Parses `A..B` (inclusive on both ends).
pub fn parse_levels(s: &str) -> Result<(u32, u32)> {
    let bad = || Error::InvalidConfig(format!("level range must look like A..B, got {s:?}"));
    let (a, b) = s.split_once("..").ok_or_else(bad)?;
    let a: u32 = a.trim().parse().map_err(|_| bad())?;
    let b: u32 = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
    Ok((a, b))
}

fn validate_levels((first, last): (u32, u32)) -> Result<()> {
    if first == 0 || first > last {
        return Err(Error::InvalidConfig(format!("levels {first}..{last} must be nonempty, increasing and start at 1 or above")));
    }
    if last > 12 {
        return Err(Error::InvalidConfig(format!("level {last} is beyond the supported range (12)")));
    }
    Ok(())
}

fn validate_k(k: usize) -> Result<()> {
    if !(1..=MAX_K).contains(&k) {
        return Err(Error::UnsupportedDegree(k));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub element: ElementKind,
    pub k: usize,
    /// Inclusive level range.
    pub levels: (u32, u32),
    pub solution: SolutionVariant,
    pub penalty: PenaltyConfig,
    pub uzawa: UzawaConfig,
    pub nodes: NodeFamily,
}

impl StudyConfig {
    pub fn new(element: ElementKind, k: usize, solution: SolutionVariant) -> Self {
        Self {
            element,
            k,
            levels: default_levels(k),
            solution,
            penalty: PenaltyConfig::default(),
            uzawa: UzawaConfig::default(),
            nodes: DEFAULT_VELOCITY_NODES,
        }
    }

    pub fn with_levels(mut self, first: u32, last: u32) -> Self {
        self.levels = (first, last);
        self
    }

    pub fn validate(&self) -> Result<()> {
        validate_k(self.k)?;
        validate_levels(self.levels)?;
        self.penalty.validate()?;
        self.uzawa.validate()
    }
}

/// Everything produced by one solve.
#[derive(Clone, Debug)]
pub struct LevelSolve {
    pub space: VelocitySpace,
    pub data: StokesManufactured,
    pub solution: StokesSolution,
}

/// Builds the grid and spaces of `level`, assembles the load of `data` and
/// solves with the configured element.
pub fn solve_with_data(cfg: &StudyConfig, level: u32, data: &StokesManufactured) -> Result<LevelSolve> {
    let mesh = Mesh::build_uniform(level)?;
    let space = VelocitySpace::with_nodes(&mesh, cfg.k, cfg.nodes)?;
    let load = assemble_load(&|x, y| data.f1.evaluate(x, y), &|x, y| data.f2.evaluate(x, y), &space);
    let solution = match cfg.element {
        ElementKind::DivFree => solve_divfree(&space, &load, &cfg.penalty),
        ElementKind::BernardiRaugel => solve_bernardi_raugel(&space, &load, &cfg.uzawa),
    }
    .map_err(|e| Error::AtLevel { level, source: Box::new(e) })?;
    Ok(LevelSolve {
        space,
        data: data.clone(),
        solution,
    })
}

pub fn solve_on_level(cfg: &StudyConfig, level: u32) -> Result<LevelSolve> {
    solve_with_data(cfg, level, &make_manufactured(cfg.solution))
}

/// Error measures of one solve.
pub fn level_record(level: u32, s: &LevelSolve) -> LevelRecord {
    let space = &s.space;
    let mesh = space.mesh();
    let d = &s.data;
    let uh = space.split_interior(&s.solution.velocity);
    let iu = lagrange_interpolate_velocity(space, &|x, y| d.u1.evaluate(x, y), &|x, y| d.u2.evaluate(x, y));
    let diff: [Vec<f64>; 2] = [0, 1].map(|c| uh[c].iter().zip(&iu[c]).map(|(a, b)| a - b).collect());
    let e_l2 = velocity_error_l2(space, &diff, [&zero_field, &zero_field]);
    let e_h1 = velocity_error_h1_semi(space, &diff, [&zero_gradient, &zero_gradient]);
    let u1 = |x: f64, y: f64| d.u1.evaluate(x, y);
    let u2 = |x: f64, y: f64| d.u2.evaluate(x, y);
    let g1 = |x: f64, y: f64| d.u1.gradient(x, y);
    let g2 = |x: f64, y: f64| d.u2.gradient(x, y);
    let true_l2 = velocity_error_l2(space, &uh, [&u1, &u2]);
    let true_h1 = velocity_error_h1_semi(space, &uh, [&g1, &g2]);

    let ps = s.solution.pressure_space(space);
    let p = |x: f64, y: f64| d.p.evaluate(x, y);
    let pi = interpolate_pressure(&ps, &p);
    let pdiff: Vec<f64> = s.solution.pressure.iter().zip(&pi).map(|(a, b)| a - b).collect();
    let p_l2 = error_l2(ps.scalar(), mesh, &pdiff, &zero_field);
    let true_p_l2 = error_l2(ps.scalar(), mesh, &s.solution.pressure, &p);
    LevelRecord {
        level,
        h: mesh.h(),
        e_l2,
        e_h1,
        p_l2,
        true_l2,
        true_h1,
        true_p_l2,
        iterations: s.solution.iterations,
        div_norm: s.solution.div_norm,
        velocity_dofs: space.num_interior(),
        pressure_dofs: ps.num_dofs(),
    }
}

pub fn run_convergence_study(cfg: &StudyConfig) -> Result<ConvergenceReport> {
    cfg.validate()?;
    let data = make_manufactured(cfg.solution);
    let mut levels = Vec::new();
    for level in cfg.levels.0..=cfg.levels.1 {
        let s = solve_with_data(cfg, level, &data)?;
        let rec = level_record(level, &s);
        log::info!(
            "{} k={} level {level}: |e|_H1 = {:.3e}, iters = {}, div = {:.2e}",
            cfg.element,
            cfg.k,
            rec.e_h1,
            rec.iterations,
            rec.div_norm
        );
        levels.push(rec);
    }
    Ok(ConvergenceReport {
        element: cfg.element,
        k: cfg.k,
        solution: cfg.solution,
        nodes: cfg.nodes,
        levels,
    })
}

fn rate_cell(r: Option<f64>) -> String {
    r.map(|v| format!("{v:.2}")).unwrap_or_default()
}

pub const CSV_HEADER: &str = "level,e_l2,rate_l2,e_h1,rate_h1,p_l2,rate_p,iters,div_norm";

pub fn format_report(report: &ConvergenceReport, format: OutputFormat) -> Result<String> {
    let (rl2, rh1, rp) = (report.rates_l2(), report.rates_h1(), report.rates_p());
    let mut out = String::new();
    match format {
        OutputFormat::Csv => {
            out.push_str(CSV_HEADER);
            out.push('\n');
            for (i, r) in report.levels.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{},{:.6e},{},{:.6e},{},{:.6e},{},{},{:.3e}",
                    r.level,
                    r.e_l2,
                    rate_cell(rl2[i]),
                    r.e_h1,
                    rate_cell(rh1[i]),
                    r.p_l2,
                    rate_cell(rp[i]),
                    r.iterations,
                    r.div_norm
                );
            }
        }
        OutputFormat::Json => {
            #[derive(Serialize)]
            struct Rates {
                e_l2: Vec<Option<f64>>,
                e_h1: Vec<Option<f64>>,
                p_l2: Vec<Option<f64>>,
                true_l2: Vec<Option<f64>>,
                true_h1: Vec<Option<f64>>,
                true_p_l2: Vec<Option<f64>>,
            }
            #[derive(Serialize)]
            struct Doc<'a> {
                #[serde(flatten)]
                report: &'a ConvergenceReport,
                rates: Rates,
            }
            let doc = Doc {
                report,
                rates: Rates {
                    e_l2: rl2,
                    e_h1: rh1,
                    p_l2: rp,
                    true_l2: report.rates_true_l2(),
                    true_h1: report.rates_true_h1(),
                    true_p_l2: report.rates_true_p(),
                },
            };
            out = serde_json::to_string_pretty(&doc)?;
            out.push('\n');
        }
        OutputFormat::Text => {
            let _ = writeln!(
                out,
                "{} element, k = {}, {} solution, velocity nodes: {:?}",
                report.element,
                report.k,
                match report.solution {
                    SolutionVariant::Asymmetric => "asymmetric",
                    SolutionVariant::Symmetric => "symmetric",
                },
                report.nodes
            );
            let _ = writeln!(out, "errors e = u_h - I_h u, eps = p_h - p_I");
            let _ = writeln!(out, "{:>5} {:>12} {:>5} {:>12} {:>5} {:>12} {:>5} {:>6} {:>10}", "level", "|e|_L2", "h^n", "|e|_H1", "h^n", "|eps|_L2", "h^n", "iters", "|div u_h|");
            for (i, r) in report.levels.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{:>5} {:>12.6e} {:>5} {:>12.6e} {:>5} {:>12.6e} {:>5} {:>6} {:>10.2e}",
                    r.level,
                    r.e_l2,
                    rate_cell(rl2[i]),
                    r.e_h1,
                    rate_cell(rh1[i]),
                    r.p_l2,
                    rate_cell(rp[i]),
                    r.iterations,
                    r.div_norm
                );
            }
            let (tl2, th1, tp) = (report.rates_true_l2(), report.rates_true_h1(), report.rates_true_p());
            let _ = writeln!(out, "errors u - u_h, p - p_h");
            let _ = writeln!(out, "{:>5} {:>12} {:>5} {:>12} {:>5} {:>12} {:>5}", "level", "|u-u_h|_L2", "h^n", "|u-u_h|_H1", "h^n", "|p-p_h|_L2", "h^n");
            for (i, r) in report.levels.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{:>5} {:>12.6e} {:>5} {:>12.6e} {:>5} {:>12.6e} {:>5}",
                    r.level,
                    r.true_l2,
                    rate_cell(tl2[i]),
                    r.true_h1,
                    rate_cell(th1[i]),
                    r.true_p_l2,
                    rate_cell(tp[i])
                );
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaConfig {
    pub k: usize,
    /// Velocity component of the interpolated field, 1 or 2.
    pub component: usize,
    pub pair: DerivPair,
    /// Test space component, 1 or 2; defaults to the div-div pairing.
    pub test_component: Option<usize>,
    pub levels: (u32, u32),
    pub solution: SolutionVariant,
}

impl LemmaConfig {
    pub fn new(k: usize, component: usize, pair: DerivPair) -> Self {
        Self {
            k,
            component,
            pair,
            test_component: None,
            levels: (2, 6),
            solution: SolutionVariant::Asymmetric,
        }
    }

    pub fn test_component(&self) -> usize {
        self.test_component.unwrap_or_else(|| self.pair.natural_test_component(self.component - 1) + 1)
    }

    pub fn validate(&self) -> Result<()> {
        validate_k(self.k)?;
        validate_levels(self.levels)?;
        let check = |c: usize| {
            if (1..=2).contains(&c) {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!("component must be 1 or 2, got {c}")))
            }
        };
        check(self.component)?;
        check(self.test_component())
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LemmaReport {
    pub config: LemmaConfig,
    pub levels: Vec<u32>,
    pub norms: Vec<f64>,
    pub rates: Vec<Option<f64>>,
}

impl LemmaReport {
    pub fn last_rate(&self) -> Option<f64> {
        self.rates.last().copied().flatten()
    }

    pub fn to_text(&self) -> String {
        let c = &self.config;
        let mut out = String::new();
        let _ = writeln!(
            out,
            "k = {}, pair ({}), interpolated component {}, test space V_h{}",
            c.k,
            c.pair.name(),
            c.component,
            c.test_component()
        );
        let _ = writeln!(out, "{:>5} {:>14} {:>6}", "level", "dual norm", "h^n");
        for ((l, n), r) in self.levels.iter().zip(&self.norms).zip(&self.rates) {
            let _ = writeln!(out, "{:>5} {:>14.6e} {:>6}", l, n, rate_cell(*r));
        }
        out
    }
}

pub fn run_lemma_study(cfg: &LemmaConfig) -> Result<LemmaReport> {
    cfg.validate()?;
    let data = make_manufactured(cfg.solution);
    let comp = cfg.component - 1;
    let field = if comp == 0 { &data.u1 } else { &data.u2 };
    let mut levels = Vec::new();
    let mut norms = Vec::new();
    for level in cfg.levels.0..=cfg.levels.1 {
        let mesh = Mesh::build_uniform(level)?;
        let space = VelocitySpace::with_nodes(&mesh, cfg.k, DEFAULT_VELOCITY_NODES)?;
        let n = lemma_functional_norm(&space, comp, cfg.pair, cfg.test_component() - 1, &|x, y| field.evaluate(x, y), &|x, y| field.gradient(x, y))
            .map_err(|e| Error::AtLevel { level, source: Box::new(e) })?;
        levels.push(level);
        norms.push(n);
    }
    let rates = rates(&norms);
    Ok(LemmaReport {
        config: cfg.clone(),
        levels,
        norms,
        rates,
    })
}

/// Fields sampled on a uniform lattice of the unit square.
#[derive(Clone, Debug)]
pub struct SampledFields {
    pub n: usize,
    /// Row-major over `(x, y)` with `x` fastest.
    pub points: Vec<(f64, f64)>,
    pub u1: Vec<f64>,
    pub u2: Vec<f64>,
    pub div: Vec<f64>,
    pub p_h: Vec<f64>,
    pub p: Vec<f64>,
}

pub const DUMP_RESOLUTION: usize = 101;

pub fn sample_fields(s: &LevelSolve, n: usize) -> SampledFields {
    let space = &s.space;
    let mesh = space.mesh();
    let uh = space.split_interior(&s.solution.velocity);
    let ps = s.solution.pressure_space(space);
    let mut out = SampledFields {
        n,
        points: Vec::with_capacity(n * n),
        u1: Vec::with_capacity(n * n),
        u2: Vec::with_capacity(n * n),
        div: Vec::with_capacity(n * n),
        p_h: Vec::with_capacity(n * n),
        p: Vec::with_capacity(n * n),
    };
    let step = 1.0 / (n.max(2) - 1) as f64;
    for b in 0..n {
        for a in 0..n {
            let (x, y) = (a as f64 * step, b as f64 * step);
            let (v1, g1) = space.component(0).eval(mesh, &uh[0], x, y);
            let (v2, g2) = space.component(1).eval(mesh, &uh[1], x, y);
            out.points.push((x, y));
            out.u1.push(v1);
            out.u2.push(v2);
            out.div.push(g1[0] + g2[1]);
            out.p_h.push(ps.eval(&s.solution.pressure, x, y));
            out.p.push(s.data.p.evaluate(x, y));
        }
    }
    out
}

/// Writes `velocity.csv` (`x,y,u1_h,u2_h,div_u_h`) and `pressure.csv`
/// (`x,y,p_h,p,p_h_minus_p`) into `dir`.
pub fn write_samples(samples: &SampledFields, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let vpath = dir.join("velocity.csv");
    let ppath = dir.join("pressure.csv");
    let mut v = std::io::BufWriter::new(std::fs::File::create(&vpath)?);
    let mut p = std::io::BufWriter::new(std::fs::File::create(&ppath)?);
    writeln!(v, "x,y,u1_h,u2_h,div_u_h")?;
    writeln!(p, "x,y,p_h,p,p_h_minus_p")?;
    for i in 0..samples.points.len() {
        let (x, y) = samples.points[i];
        writeln!(v, "{x},{y},{:.12e},{:.12e},{:.6e}", samples.u1[i], samples.u2[i], samples.div[i])?;
        writeln!(p, "{x},{y},{:.12e},{:.12e},{:.6e}", samples.p_h[i], samples.p[i], samples.p_h[i] - samples.p[i])?;
    }
    v.flush()?;
    p.flush()?;
    Ok(vec![vpath, ppath])
}

/// Solves on one level and writes sampled fields into `dir`.
pub fn dump_fields(cfg: &StudyConfig, level: u32, dir: &Path) -> Result<Vec<PathBuf>> {
    validate_k(cfg.k)?;
    validate_levels((level, level))?;
    let s = solve_on_level(cfg, level)?;
    write_samples(&sample_fields(&s, DUMP_RESOLUTION), dir)
}
