//! Sample-efficiency benchmark of DDPG against CMA-ES on continuous mountain
//! car, with both algorithms training the same small actor network.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the scalar to `f64`, which is what the benchmark runs in.

pub mod bench;
pub mod cmaes;
pub mod ddpg;
pub mod env;
pub mod error;
pub mod nn;
pub mod replay;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Mlp = nn::Mlp<f64>;
pub type MlpF32 = nn::Mlp<f32>;
pub type GradientSet = nn::GradientSet<f64>;
pub type ForwardTrace = nn::ForwardTrace<f64>;
pub type CarState = env::CarState<f64>;
pub type EnvConfig = env::EnvConfig<f64>;
pub type MountainCar = env::MountainCar<f64>;
pub type Transition = replay::Transition<f64>;
pub type ReplayBuffer = replay::ReplayBuffer<f64>;
pub type DdpgConfig = ddpg::DdpgConfig<f64>;
pub type DdpgAgent = ddpg::DdpgAgent<f64>;
pub type OuNoise = ddpg::OuNoise<f64>;
pub type CmaesConfig = cmaes::CmaesConfig<f64>;
pub type CmaesState = cmaes::CmaesState<f64>;
pub type CmaesStateF32 = cmaes::CmaesState<f32>;

pub use bench::curve::{EpisodeRecord, LearningCurve};

/// Derives an independent stream seed from a run seed (splitmix64 finalizer).
pub fn sub_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
