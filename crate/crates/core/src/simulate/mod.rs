//! Monte Carlo oracles for the analytic chain: a planar PPP sampler for
//! coverage, cell sizes and per-cell contention, and a discrete-event
//! simulator of the preemptive-resume priority queue.
//!
//! Every replication draws from its own ChaCha8 stream keyed by
//! `(seed, replication)`, so runs are reproducible bit for bit.

mod queue;
mod report;
mod spatial;
mod voronoi;

pub use queue::{
    run_priority_queue, simulate_queue, QueueSimConfig, QueueTrace, BATCHES, MIN_HORIZON, RESUME_TOL,
};
pub use report::{Estimate, Series, SimReport};
pub use spatial::{
    band_service_mc, empirical_user_count_pmf, spatial_coverage, user_count_study, SpatialSimConfig,
    UserCountStudy, DEFAULT_EXPECTED_BS, DEFAULT_GUARD_FRACTION, MIN_EXPECTED_BS, NEAR_FIELD_FRACTION,
};
pub use voronoi::{sample_voronoi_cells, voronoi_sample, VoronoiSample};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
