//! Geodesic flow, first conjugate locus and genericity strata of
//! isoperimetric contact sub-Riemannian metrics on R³.

pub mod asymptotics;
pub mod cli_io;
pub mod dop853_tableau;
pub mod error;
pub mod expmap_conjugate;
pub mod geodesic_flow;
pub mod jet;
pub mod locus_classifier;
pub mod metric_model;
pub mod ode;
pub mod quadrature;
pub mod stratification;

pub use asymptotics::{build_fseries, cl_expansion, isoself_predict, FSeries, FormulaSet, IsoselfPrediction};
pub use cli_io::RunConfig;
pub use error::{Error, Result};
pub use expmap_conjugate::{
    conjugate_section, first_conjugate, solve_level, ConjugateOptions, ConjugatePoint, PlanarCurve,
};
pub use geodesic_flow::{integrate, GeodesicState, LaunchSpec, Trajectory};
pub use locus_classifier::{classify_section, ClassifierOptions, SectionClassification, Symbol};
pub use metric_model::{
    extract_invariants, isotypic_decompose, Beta4, BetaJet, Invariants, MetricModel, MetricSpec, Poly2,
};
pub use stratification::{classify, Stratum, StratTolerances, StratumReport};
