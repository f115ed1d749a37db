//! Scaling limits: CIR and stochastic Volterra equations, the three mean-field
//! regimes and the limit laws of empirical measures.

mod cir;
mod kernel_spec;
mod regime;
mod sve;

pub use cir::{brownian_increments, solve_cir, solve_cir_with_noise, CirParams, CirPath};
pub use kernel_spec::{cir_correspondence, FractionalNormalization, KernelProvenance, LimitKernelSpec};
pub use regime::{
    limit_empirical_law, sample_regime_limit, EmpiricalMeasureSnapshot, Regime, RegimeLimitSample,
    SnapshotSource,
};
pub use sve::{solve_sve, solve_sve_with_noise, SvePath};
