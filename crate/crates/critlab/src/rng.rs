//! Reproducible random-number streams.
//!
//! Every experiment draws its randomness from a ChaCha8 generator keyed
//! by a user-supplied 64-bit seed. ChaCha supports cheap *stream
//! splitting*: `(seed, stream)` pairs index statistically independent
//! generators, so replica `k` can be handed stream `k` and produce the
//! same numbers whether replicas run serially or on a thread pool. No
//! code in this crate ever seeds from the wall clock.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The RNG used throughout the crate.
pub type Rng = ChaCha8Rng;

/// Root generator for a seed (stream 0).
pub fn root_rng(seed: u64) -> Rng {
    stream_rng(seed, 0)
}

/// Independent generator for (seed, stream).
///
/// Distinct streams under the same seed never share output; this is the
/// splitting mechanism used to parallelize replicas deterministically.
pub fn stream_rng(seed: u64, stream: u64) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// One standard normal draw via the Marsaglia polar method.
///
/// Consumes a variable number of uniforms (two per rejection round), so
/// callers that need reproducibility must fix the draw *order*, not the
/// uniform count.
pub fn standard_normal(rng: &mut Rng) -> f64 {
    use rand::Rng as _;
    loop {
        let u: f64 = rng.gen_range(-1.0..1.0);
        let v: f64 = rng.gen_range(-1.0..1.0);
        let s = u * u + v * v;
        if s > 0.0 && s < 1.0 {
            return u * (-2.0 * s.ln() / s).sqrt();
        }
    }
}

/// Global rayon thread-pool initialization honoring `CRITLAB_THREADS`.
///
/// `CRITLAB_THREADS=k` caps replica parallelism at `k` threads; unset or
/// `0` means the rayon default (all available cores). Safe to call many
/// times — only the first call builds the pool. Determinism never depends
/// on the thread count because replicas own per-stream generators.
pub fn init_thread_pool() {
    use std::sync::Once;
    static INIT: Once = Once::new();
    INIT.call_once(|| {
        if let Ok(v) = std::env::var("CRITLAB_THREADS") {
            if let Ok(k) = v.trim().parse::<usize>() {
                if k > 0 {
                    // Ignore failure (a pool may already exist in tests).
                    let _ = rayon::ThreadPoolBuilder::new()
                        .num_threads(k)
                        .build_global();
                }
            }
        }
    });
}
