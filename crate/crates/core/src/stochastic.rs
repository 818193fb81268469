//! Linear multiplicative noise: paths, integrators, regimes and ensembles.

pub mod brownian;
pub mod density;
pub mod ensemble;
pub mod quad;
pub mod regime;
pub mod sde;

pub use brownian::{path_seed, BrownianPath, IncrementStream};
pub use density::{ray_stationary_density, RayDensity};
pub use ensemble::{
    run_ensemble, sample_tail, EnsembleConfig, EnsembleSummary, Histogram, InitialCondition, TailSchedule,
};
pub use regime::{classify_noise_regime, noise_thresholds, NoiseRegime, RegimeLabel};
pub use sde::{
    doss_sussmann, euler_maruyama, generator_bound, generator_v, transformed_decay_check, NoiseConfig,
    TransformedDecayReport,
};
