//! Randomized Shapley estimators.
//!
//! * [`fpras`]: uniformly random permutations; each agent is credited with
//!   its marginal contribution to the agents preceding it. Several
//!   independent runs are combined by a per-agent median and the result is
//!   scaled so the values add up to `opt(N)`.
//! * [`range`]: per-agent sampling of random coalitions with a sample size
//!   from Hoeffding's inequality, driven by the range
//!   `r_i = opt({i}) - marg({i}, N)` of the agent's marginal contributions.
//!
//! Randomness: every job owns a ChaCha stream selected from the master seed
//! and the job's position in a fixed job list, so estimates do not depend on
//! the number of workers or on scheduling.

pub mod fpras;
pub mod range;

pub use fpras::{fpras_report, fpras_sample_size, fpras_shapley, FprasConfig, FprasResult};
pub use range::{
    compute_ranges, range_sampler_report, range_sampler_shapley, sample_bound, AgentRange,
    RangeMode, RangeSamplerConfig, RangeSamplerResult,
};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// The random stream for job `stream` under `seed`.
pub fn job_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub(crate) fn check_unit_interval(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value < 1.0 {
        Ok(())
    } else {
        Err(Error::ParameterOutOfRange { name, value })
    }
}

/// Median of a non-empty slice; the mean of the two middle values for even
/// lengths.
pub(crate) fn median<T: Scalar>(values: &mut [T]) -> T {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let m = values.len() / 2;
    if values.len() % 2 == 1 {
        values[m]
    } else {
        (values[m - 1] + values[m]) / T::of(2.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn streams_differ_and_repeat() {
        let a: Vec<u64> = (0..4).map(|_| job_rng(7, 0).next_u64()).collect();
        assert!(a.windows(2).all(|w| w[0] == w[1]));
        assert_ne!(job_rng(7, 0).next_u64(), job_rng(7, 1).next_u64());
        assert_ne!(job_rng(7, 0).next_u64(), job_rng(8, 0).next_u64());
    }

    #[test]
    fn median_of_odd_and_even() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn unit_interval_is_open() {
        assert!(check_unit_interval("epsilon", 0.3).is_ok());
        assert!(check_unit_interval("epsilon", 0.0).is_err());
        assert!(check_unit_interval("delta", 1.0).is_err());
        assert!(check_unit_interval("delta", f64::NAN).is_err());
    }
}
