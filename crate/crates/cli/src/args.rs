use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use dfalab::harness::diagnostics::DiagnosticCheck;
use dfalab::{FamilyKind, MeshFamily, Rect, Scheme};
use serde::Deserialize;

#[derive(Parser, Debug)]
#[command(name = "dfalab", version, about = "TPFA and Crouzeix-Raviart discretization laboratory")]
pub struct Cli {
    /// JSON file whose keys mirror the subcommand's flags; flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Print counts and regularity metrics of a DFAMESH file.
    MeshInfo(MeshInfoArgs),
    /// Solve one catalog problem on one mesh and write the discrete solution.
    Solve(SolveArgs),
    /// Run a convergence study over a refinement family.
    Converge(ConvergeArgs),
    /// Run a diagnostic sampling campaign.
    Diagnose(DiagnoseArgs),
    /// Solve a nonlinear catalog problem by Picard iteration.
    Nonlinear(NonlinearArgs),
}

/// Inclusive level range written `L0..L1`, or a single level `L`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(try_from = "String")]
pub struct LevelRange {
    pub min: u32,
    pub max: u32,
}

impl FromStr for LevelRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parse = |t: &str| t.trim().parse::<u32>().map_err(|_| format!("invalid level `{t}` in `{s}`"));
        let (min, max) = match s.split_once("..") {
            Some((a, b)) => (parse(a)?, parse(b.trim_start_matches('='))?),
            None => {
                let l = parse(s)?;
                (l, l)
            }
        };
        if min > max {
            return Err(format!("empty level range `{s}`"));
        }
        Ok(Self { min, max })
    }
}

impl TryFrom<String> for LevelRange {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(try_from = "String")]
pub enum FamilyArg {
    Quad,
    Tri,
}

impl FromStr for FamilyArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "quad" => Ok(Self::Quad),
            "tri" => Ok(Self::Tri),
            _ => Err(format!("unknown family `{s}` (expected quad or tri)")),
        }
    }
}

impl TryFrom<String> for FamilyArg {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl FamilyArg {
    pub fn default_for(scheme: Scheme) -> Self {
        match scheme {
            Scheme::Tpfa => Self::Quad,
            Scheme::Cr => Self::Tri,
        }
    }

    pub fn family(self, nx: usize, ny: usize, domain: Rect) -> MeshFamily {
        let kind = match self {
            Self::Quad => FamilyKind::Quad,
            Self::Tri => FamilyKind::Triangle { circumcenter: false },
        };
        MeshFamily { kind, nx, ny, domain }
    }
}

/// Fills every unset field of `self` from `file`.
pub trait Merge: Sized {
    fn merge(self, file: Self) -> Self;
}

macro_rules! mergeable {
    ($name:ident { $($field:ident),* $(,)? }) => {
        impl Merge for $name {
            fn merge(self, file: Self) -> Self {
                Self { $($field: self.$field.or(file.$field)),* }
            }
        }
    };
}

#[derive(Args, Debug, Default, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct MeshInfoArgs {
    /// Mesh file in DFAMESH format.
    pub mesh: Option<PathBuf>,
}
mergeable!(MeshInfoArgs { mesh });

#[derive(Args, Debug, Default, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct SolveArgs {
    #[arg(long)]
    pub scheme: Option<Scheme>,
    #[arg(long)]
    pub problem: Option<String>,
    #[arg(long)]
    pub nx: Option<usize>,
    /// Defaults to `nx`.
    #[arg(long)]
    pub ny: Option<usize>,
    /// quad or tri; defaults to quad for TPFA and tri for CR.
    #[arg(long)]
    pub family: Option<FamilyArg>,
    /// Relative CG tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Write the solution CSV here instead of standard output.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}
mergeable!(SolveArgs { scheme, problem, nx, ny, family, tol, out });

#[derive(Args, Debug, Default, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct ConvergeArgs {
    #[arg(long)]
    pub scheme: Option<Scheme>,
    #[arg(long)]
    pub problem: Option<String>,
    /// Inclusive level range, e.g. `3..6`.
    #[arg(long)]
    pub levels: Option<LevelRange>,
    #[arg(long)]
    pub family: Option<FamilyArg>,
    /// Relative CG tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Level of the fine reference for problems without an exact solution.
    #[arg(long)]
    pub reference_level: Option<u32>,
    /// Jacobi-precondition the study solves.
    #[arg(long)]
    pub jacobi: Option<bool>,
    /// Write the CSV report here instead of standard output.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    /// Also write the full report as JSON.
    #[arg(long, value_name = "FILE")]
    pub json: Option<PathBuf>,
}
mergeable!(ConvergeArgs { scheme, problem, levels, family, tol, reference_level, jacobi, out, json });

#[derive(Args, Debug, Default, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct DiagnoseArgs {
    /// poincare, sobolev, consistency, nonconformity or lemma.
    #[arg(long)]
    pub check: Option<DiagnosticCheck>,
    #[arg(long)]
    pub levels: Option<LevelRange>,
    /// Random functions sampled per level.
    #[arg(long)]
    pub seeds: Option<u64>,
    /// Sobolev exponent `p`.
    #[arg(long)]
    pub p: Option<f64>,
    /// Sobolev exponent `q`.
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long, value_name = "FILE")]
    pub json: Option<PathBuf>,
}
mergeable!(DiagnoseArgs { check, levels, seeds, p, q, json });

#[derive(Args, Debug, Default, Deserialize)]
#[serde(default, rename_all = "kebab-case", deny_unknown_fields)]
pub struct NonlinearArgs {
    #[arg(long)]
    pub scheme: Option<Scheme>,
    #[arg(long)]
    pub problem: Option<String>,
    #[arg(long)]
    pub nx: Option<usize>,
    #[arg(long)]
    pub ny: Option<usize>,
    /// Outer tolerance on the relative increment.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_outer: Option<usize>,
    /// Relaxation factor in (0, 1].
    #[arg(long)]
    pub relaxation: Option<f64>,
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}
mergeable!(NonlinearArgs { scheme, problem, nx, ny, tol, max_outer, relaxation, out });
