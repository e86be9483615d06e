//! Stochastic wealth processes: dynamics descriptions and ensemble
//! simulation.

mod dynamics;
mod ensemble;
mod simulate;

pub use dynamics::{build_ito, DiscreteDynamics, Family, GambleMode, Interval, ItoDynamics};
pub use ensemble::{fingerprint_hex, Ensemble};
pub use simulate::{simulate_discrete, simulate_ito};
