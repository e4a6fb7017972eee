//! Ground truth for the approximations: grid convolutions, exact conditional
//! densities, Monte Carlo conditional sampling and total-variation distances.

mod conditional;
mod grid;
mod mc;
mod tv;

pub use conditional::{
    exact_conditional, exact_exceedance_conditional, standardized_sum_density, ConditionalOracle,
    JointGrid, OracleOptions, MAX_BLOCK,
};
pub use grid::{convolve, discretize, self_convolve, GridDensity, MAX_CLIPPED, MAX_NODES};
pub use mc::{
    mc_conditional_sample, proposal_sampler, GridSampler, McOptions, McResult, Proposal,
    MIN_ACCEPTANCE,
};
pub use tv::{histogram_tv, tv_distance, tv_grid_fn, tv_values, TvReport};
