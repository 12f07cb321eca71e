//! Convergence studies over a refinement family.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::catalog::{linear_problem, self_check, SelfCheck};
use super::{eoc, with_thread_pool, HarnessError};
use crate::cr_fem::{self, CrSpace};
use crate::discrete_space::CellFunction;
use crate::geometry::Rect;
use crate::linalg::CgOptions;
use crate::mesh::{regularity, FamilyKind, Mesh, MeshFamily};
use crate::nonlinear::Scheme;
use crate::problem::{DiffusionProblem, EnergyChain};
use crate::tpfa::{self, TpfaOptions};

/// Relative tolerance of the energy-chain check.
pub const ENERGY_CHAIN_TOL: f64 = 1e-8;
/// Points used by the catalog self-check that gates every study.
pub const SELF_CHECK_POINTS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub scheme: Scheme,
    pub problem: String,
    pub level_min: u32,
    pub level_max: u32,
    /// Defaults to the 2×2 unit-square quad family (TPFA) or triangle family (CR).
    #[serde(default)]
    pub family: Option<MeshFamily>,
    #[serde(default = "default_cg_tol")]
    pub cg_tol: f64,
    #[serde(default = "default_cg_max_iter")]
    pub cg_max_iter: usize,
    #[serde(default)]
    pub jacobi: bool,
    /// Level of the fine-grid reference for problems without an exact solution.
    #[serde(default)]
    pub reference_level: Option<u32>,
    /// CG tolerance of the reference solve, which is Jacobi preconditioned.
    #[serde(default = "default_reference_cg_tol")]
    pub reference_cg_tol: f64,
}

fn default_cg_tol() -> f64 {
    CgOptions::default().rel_tol
}

/// Near `10⁻¹¹` the true residual of a 512² reference solve stagnates at
/// the rounding floor, so the reference uses a slightly looser tolerance.
fn default_reference_cg_tol() -> f64 {
    1e-10
}

fn default_cg_max_iter() -> usize {
    CgOptions::default().max_iter
}

impl StudyConfig {
    pub fn new(scheme: Scheme, problem: impl Into<String>, level_min: u32, level_max: u32) -> Self {
        Self {
            scheme,
            problem: problem.into(),
            level_min,
            level_max,
            family: None,
            cg_tol: default_cg_tol(),
            cg_max_iter: default_cg_max_iter(),
            jacobi: false,
            reference_level: None,
            reference_cg_tol: default_reference_cg_tol(),
        }
    }

    pub fn family(&self) -> MeshFamily {
        self.family.unwrap_or(match self.scheme {
            Scheme::Tpfa => MeshFamily::quad(2, 2, Rect::UNIT),
            Scheme::Cr => MeshFamily::triangle(2, 2, Rect::UNIT),
        })
    }

    fn tpfa_options(&self) -> TpfaOptions {
        TpfaOptions { cg: self.cg_options(), ..TpfaOptions::default() }
    }

    fn reference_options(&self) -> TpfaOptions {
        let cg = CgOptions { rel_tol: self.reference_cg_tol, max_iter: self.cg_max_iter, jacobi: true };
        TpfaOptions { cg, ..TpfaOptions::default() }
    }

    fn cg_options(&self) -> CgOptions {
        CgOptions { rel_tol: self.cg_tol, max_iter: self.cg_max_iter, jacobi: self.jacobi }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelRecord {
    pub level: u32,
    pub h: f64,
    pub theta: f64,
    pub n_unknowns: usize,
    /// TPFA: `‖u_h - u(x_K)‖` over cells. CR: exact `‖u_h - I_h u‖` against the midpoint interpolant.
    pub err_l2: f64,
    /// TPFA: discrete `H¹₀` norm of the same difference. CR: `‖∇_b u_h - ∇u‖_{L²}` by quadrature.
    pub err_energy: f64,
    pub eoc_l2: Option<f64>,
    pub eoc_energy: Option<f64>,
    pub energy_chain_ok: bool,
    pub energy_chain: EnergyChain,
    /// `‖u_h‖_{L²} / ‖u_h‖_{energy}`; absent for a zero solution.
    pub poincare_ratio: Option<f64>,
    /// CR only: `‖u_h - u‖_{L²}` with the piecewise-affine `u_h`, by degree-5 quadrature.
    pub err_l2_quadrature: Option<f64>,
    /// TPFA only: largest scaled per-cell flux-balance residual.
    pub balance_residual: Option<f64>,
    /// TPFA only: faces with `τ_σ < a̲ |σ| / d_σ`.
    pub tau_bound_violations: Option<usize>,
    pub cg_iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub config: StudyConfig,
    pub self_check: SelfCheck,
    pub reference_level: Option<u32>,
    pub levels: Vec<LevelRecord>,
    /// False when a level failed; `levels` then holds the levels before it.
    pub complete: bool,
    pub failure: Option<String>,
}

impl ConvergenceReport {
    pub fn last_eoc_l2(&self) -> Option<f64> {
        self.levels.last().and_then(|r| r.eoc_l2)
    }

    pub fn last_eoc_energy(&self) -> Option<f64> {
        self.levels.last().and_then(|r| r.eoc_energy)
    }

    pub fn l2_errors_strictly_decreasing(&self) -> bool {
        self.levels.windows(2).all(|w| w[1].err_l2 < w[0].err_l2)
    }

    pub fn all_energy_chains_hold(&self) -> bool {
        self.levels.iter().all(|r| r.energy_chain_ok)
    }
}

enum Oracle<'r> {
    Exact,
    Reference(CellFunction<'r>),
}

fn check_family(scheme: Scheme, family: &MeshFamily) -> Result<(), HarnessError> {
    match (scheme, family.kind) {
        (Scheme::Cr, FamilyKind::Quad) => Err(HarnessError::IncompatibleFamily { scheme: "cr", family: "quad" }),
        (Scheme::Tpfa, FamilyKind::Triangle { circumcenter: false }) => {
            Err(HarnessError::IncompatibleFamily { scheme: "tpfa", family: "centroid triangle" })
        }
        _ => Ok(()),
    }
}

fn tpfa_level(
    config: &StudyConfig,
    problem: &DiffusionProblem,
    level: u32,
    mesh: &Mesh,
    oracle: &Oracle<'_>,
) -> Result<LevelRecord, HarnessError> {
    let sol = tpfa::solve(mesh, problem, &config.tpfa_options())?;
    let target = match oracle {
        Oracle::Exact => {
            let exact = problem.exact.as_ref().expect("exact oracle needs an exact solution");
            CellFunction::project(mesh, |p| (exact.u)(p))
        }
        Oracle::Reference(r) => r.restrict_to(mesh)?,
    };
    let diff = sol.u.sub(&target);
    let chain = sol.energy_chain();
    Ok(LevelRecord {
        level,
        h: mesh.h(),
        theta: regularity(mesh).theta,
        n_unknowns: mesh.num_cells(),
        err_l2: diff.norm_l2(),
        err_energy: diff.norm_h10(),
        eoc_l2: None,
        eoc_energy: None,
        energy_chain_ok: chain.holds(ENERGY_CHAIN_TOL),
        energy_chain: chain,
        poincare_ratio: sol.u.poincare_ratio().ok(),
        err_l2_quadrature: None,
        balance_residual: Some(sol.max_scaled_balance_residual()),
        tau_bound_violations: Some(sol.trans.lower_bound_violations(mesh).len()),
        cg_iterations: sol.iterations,
    })
}

fn cr_level(
    config: &StudyConfig,
    problem: &DiffusionProblem,
    level: u32,
    mesh: &Mesh,
) -> Result<LevelRecord, HarnessError> {
    let exact = problem.exact.as_ref().ok_or_else(|| HarnessError::NoReference(problem.name.clone()))?;
    let space = CrSpace::new(mesh)?;
    let sol = cr_fem::solve_cr(&space, problem, &config.cg_options())?;
    let chain = sol.energy_chain();
    let grad = sol.u.broken_h1_seminorm();
    Ok(LevelRecord {
        level,
        h: mesh.h(),
        theta: regularity(mesh).theta,
        n_unknowns: space.num_dofs(),
        err_l2: sol.u.interpolation_error_l2(&|p| (exact.u)(p)),
        err_energy: sol.u.broken_h1_error(&|p| (exact.grad)(p)),
        eoc_l2: None,
        eoc_energy: None,
        energy_chain_ok: chain.holds(ENERGY_CHAIN_TOL),
        energy_chain: chain,
        poincare_ratio: (grad > 0.0).then(|| sol.u.norm_l2() / grad),
        err_l2_quadrature: Some(sol.u.l2_error_quadrature(&|p| (exact.u)(p))),
        balance_residual: None,
        tau_bound_violations: None,
        cg_iterations: sol.iterations,
    })
}

fn fill_rates(levels: &mut [LevelRecord]) {
    let hs: Vec<f64> = levels.iter().map(|r| r.h).collect();
    for i in 1..levels.len() {
        let pair_h = [hs[i - 1], hs[i]];
        let l2 = [levels[i - 1].err_l2, levels[i].err_l2];
        let en = [levels[i - 1].err_energy, levels[i].err_energy];
        levels[i].eoc_l2 = eoc(&l2, &pair_h).ok().map(|r| r[0]);
        levels[i].eoc_energy = eoc(&en, &pair_h).ok().map(|r| r[0]);
    }
}

/// Solves the configured problem on every level, measures errors against the
/// exact solution (or a fine TPFA reference) and computes rates.
///
/// Configuration errors and a failing catalog self-check are returned as
/// errors; a failed solve yields a report flagged incomplete.
pub fn run_convergence_study(config: &StudyConfig) -> Result<ConvergenceReport, HarnessError> {
    if config.level_min > config.level_max {
        return Err(HarnessError::InvalidLevels { min: config.level_min, max: config.level_max });
    }
    let problem = linear_problem(&config.problem)?;
    let family = config.family();
    check_family(config.scheme, &family)?;
    let check = self_check(&problem, SELF_CHECK_POINTS, 0)?;

    let reference_level = match (&problem.exact, config.scheme) {
        (Some(_), _) => None,
        (None, Scheme::Tpfa) if family.kind == FamilyKind::Quad => {
            let r = config.reference_level.unwrap_or((config.level_max + 2).max(8));
            if r < config.level_max + 2 {
                return Err(HarnessError::ReferenceTooCoarse { reference: r, finest: config.level_max });
            }
            Some(r)
        }
        (None, _) => return Err(HarnessError::NoReference(problem.name.clone())),
    };
    let reference_mesh = reference_level.map(|l| family.refine(l)).transpose()?;

    let (levels, failure) = with_thread_pool(|| -> Result<_, HarnessError> {
        let oracle = match &reference_mesh {
            Some(m) => Oracle::Reference(tpfa::solve(m, &problem, &config.reference_options())?.u),
            None => Oracle::Exact,
        };
        let results: Vec<Result<LevelRecord, HarnessError>> = (config.level_min..=config.level_max)
            .into_par_iter()
            .map(|level| {
                let mesh = family.refine(level)?;
                match config.scheme {
                    Scheme::Tpfa => tpfa_level(config, &problem, level, &mesh, &oracle),
                    Scheme::Cr => cr_level(config, &problem, level, &mesh),
                }
            })
            .collect();
        let mut levels = Vec::new();
        let mut failure = None;
        for r in results {
            match r {
                Ok(rec) => levels.push(rec),
                Err(e) => {
                    failure = Some(e.to_string());
                    break;
                }
            }
        }
        Ok((levels, failure))
    })??;
    let mut levels = levels;
    fill_rates(&mut levels);
    Ok(ConvergenceReport {
        config: config.clone(),
        self_check: check,
        reference_level,
        complete: failure.is_none(),
        failure,
        levels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips_with_defaults() {
        let c: StudyConfig =
            serde_json::from_str(r#"{"scheme":"tpfa","problem":"sine","level_min":1,"level_max":2}"#).unwrap();
        assert_eq!(c, StudyConfig::new(Scheme::Tpfa, "sine", 1, 2));
        assert_eq!(c.family().kind, FamilyKind::Quad);
        let back: StudyConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn incompatible_families_rejected() {
        let mut c = StudyConfig::new(Scheme::Cr, "sine", 0, 1);
        c.family = Some(MeshFamily::quad(2, 2, Rect::UNIT));
        assert!(matches!(run_convergence_study(&c), Err(HarnessError::IncompatibleFamily { .. })));
        let c = StudyConfig::new(Scheme::Cr, "interface", 0, 1);
        assert!(matches!(run_convergence_study(&c), Err(HarnessError::NoReference(_))));
        let c = StudyConfig::new(Scheme::Tpfa, "sine", 3, 1);
        assert!(matches!(run_convergence_study(&c), Err(HarnessError::InvalidLevels { .. })));
    }

    #[test]
    fn reference_gap_enforced() {
        let mut c = StudyConfig::new(Scheme::Tpfa, "interface", 0, 3);
        c.reference_level = Some(4);
        assert!(matches!(run_convergence_study(&c), Err(HarnessError::ReferenceTooCoarse { .. })));
    }

    #[test]
    fn failing_level_gives_incomplete_report() {
        let mut c = StudyConfig::new(Scheme::Tpfa, "poly", 0, 4);
        c.cg_max_iter = 40;
        let r = run_convergence_study(&c).unwrap();
        assert!(!r.complete);
        assert!(r.failure.as_deref().unwrap().contains("did not converge"), "{:?}", r.failure);
        assert!(!r.levels.is_empty() && r.levels.len() < 5);
        assert!(r.levels.iter().enumerate().all(|(i, l)| l.level == i as u32));
    }

    #[test]
    fn small_tpfa_study() {
        let r = run_convergence_study(&StudyConfig::new(Scheme::Tpfa, "poly", 1, 3)).unwrap();
        assert!(r.complete);
        assert_eq!(r.levels.len(), 3);
        assert!(r.levels[0].eoc_l2.is_none());
        assert!(r.levels[2].eoc_l2.unwrap() > 1.5);
        assert!(r.all_energy_chains_hold());
        assert!(r.levels.iter().all(|l| l.tau_bound_violations == Some(0)));
    }
}
