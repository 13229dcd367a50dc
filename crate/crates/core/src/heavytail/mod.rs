//! Regularly varying marginals, the joint mark regimes and their analytic
//! tail constants.

mod denominator;
mod laws;
mod model;

pub use denominator::{
    leading_order_tail, oracle_cache_path, theoretical_denominator, Denominator, OracleSettings,
    OracleTable, Provenance, Target,
};
pub use laws::{pareto_survival, sample_pareto, LightLaw, MarkLaw, ParetoLaw};
pub(crate) use model::sample_poisson;
pub use model::{
    model_constants, sample_joint, JointMarkModel, MarkPair, ModelConstants, ModelKind, Regime,
};
