//! Parisian down-and-in call pricing by Laplace transforms of the knock-in
//! density, with a Monte Carlo oracle and an acceptance suite.

pub mod density_transform;
pub mod error;
pub mod inversion;
pub mod mc_oracle;
pub mod pricer;
pub mod psi;
pub mod quad;
pub mod special_fn;
pub mod validation;

pub use density_transform::{Approx, NormalizedParams, TransformConfig};
pub use error::{Error, Result};
pub use inversion::{InversionConfig, InversionMethod};
pub use mc_oracle::{McEstimate, SimConfig, DEFAULT_SEED};
pub use pricer::{
    black_scholes_call, normalize, price_down_in_call, price_down_out_call, EngineConfig, MarketParams,
    PricingResult,
};
pub use psi::PsiEvalConfig;
pub use quad::QuadratureConfig;
pub use special_fn::ComplexValue;
pub use validation::{Criterion, CriterionReport, SuiteOptions};
