use dpminimax::problems::{
    load_auc_csv, make_auc, make_quadratic, make_td, make_worst_group, AucProblem, QuadraticProblem, TdProblem,
    WorstGroupProblem,
};
use dpminimax::rng::{self, STREAM_DATA};
use dpminimax::{MinimaxProblem, Vector};

use crate::config::{Family, LoadedConfig};
use crate::error::CliResult;

/// A constructed problem of any family.
pub enum BuiltProblem {
    Quadratic(QuadraticProblem),
    Auc(AucProblem),
    WorstGroup(WorstGroupProblem),
    Td(TdProblem),
}

impl BuiltProblem {
    pub fn as_dyn(&self) -> &dyn MinimaxProblem {
        match self {
            BuiltProblem::Quadratic(p) => p,
            BuiltProblem::Auc(p) => p,
            BuiltProblem::WorstGroup(p) => p,
            BuiltProblem::Td(p) => p,
        }
    }

    pub fn auc(&self, x: &Vector) -> Option<f64> {
        match self {
            BuiltProblem::Auc(p) => p.auc(x).ok(),
            _ => None,
        }
    }

    pub fn mspbe(&self, x: &Vector) -> Option<f64> {
        match self {
            BuiltProblem::Td(p) => p.mspbe_population(x).ok(),
            _ => None,
        }
    }

    pub fn worst_group_loss(&self, x: &Vector) -> Option<f64> {
        match self {
            BuiltProblem::WorstGroup(p) => Some(p.worst_group_loss(x)),
            _ => None,
        }
    }
}

/// Builds the problem for one run; the data generator is seeded by
/// `data_seed` when set and by the run seed otherwise.
pub fn build_problem(l: &LoadedConfig, seed: u64) -> CliResult<BuiltProblem> {
    let c = &l.config;
    let data_seed = c.data_seed.unwrap_or(seed);
    let mut data_rng = rng::stream(data_seed, STREAM_DATA);
    let p = &c.problem;
    let ctx = |e: dpminimax::Error| l.error_at("family", format!("building the {} problem: {e}", p.family));
    Ok(match p.family {
        Family::Quadratic => {
            let spec = p.quadratic.unwrap_or_default();
            BuiltProblem::Quadratic(make_quadratic(&spec, &mut data_rng).map_err(ctx)?)
        }
        Family::Auc => {
            let a = p.auc.clone().unwrap_or_default();
            let samples = match &a.csv {
                Some(csv) => {
                    let path = if csv.path.is_absolute() {
                        csv.path.clone()
                    } else {
                        l.base_dir.join(&csv.path)
                    };
                    load_auc_csv(&path, &csv.label_column)
                        .map_err(|e| l.error_at("path", format!("{}: {e}", path.display())))?
                }
                None => a.synthetic.unwrap_or_default().generate(&mut data_rng).map_err(ctx)?,
            };
            BuiltProblem::Auc(make_auc(samples, a.alpha_bound, a.primal_radius).map_err(ctx)?)
        }
        Family::WorstGroup => {
            let spec = p.worst_group.unwrap_or_default();
            BuiltProblem::WorstGroup(make_worst_group(&spec, &mut data_rng).map_err(ctx)?)
        }
        Family::Td => {
            let t = p.td.clone().unwrap_or_default();
            let mdp = match t.mdp {
                Some(m) => m,
                None => t.random.unwrap_or_default().generate(&mut data_rng),
            };
            BuiltProblem::Td(make_td(&mdp, &mut data_rng).map_err(ctx)?)
        }
    })
}
