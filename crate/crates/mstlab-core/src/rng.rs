use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used everywhere. ChaCha is counter based, so a stream is
/// fully determined by its key and stream id.
pub type Stream = ChaCha8Rng;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn tag_hash(tag: &str) -> u64 {
    // FNV-1a; stable across platforms and releases
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Independent stream for one (seed, replica, purpose) triple.
pub fn stream(seed: u64, replica: u64, tag: &str) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix(seed ^ tag_hash(tag)));
    rng.set_stream(splitmix(replica.wrapping_add(tag_hash(tag).rotate_left(17))));
    rng
}

/// Configure the global rayon pool from `MSTLAB_THREADS` once.
pub fn init_threads() {
    use std::sync::Once;
    static ONCE: Once = Once::new();
    ONCE.call_once(|| {
        if let Some(k) = std::env::var("MSTLAB_THREADS")
            .ok()
            .and_then(|s| s.trim().parse::<usize>().ok())
            .filter(|&k| k > 0)
        {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
        }
    });
}

/// Run `f` for replicas `0..count` in parallel, results in replica order.
pub fn replicas<T, F>(count: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    use rayon::prelude::*;
    init_threads();
    (0..count as u64).into_par_iter().map(f).collect()
}
