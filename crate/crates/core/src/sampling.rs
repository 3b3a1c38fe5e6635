use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub(crate) fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Splits `n_total` across groups with the given capacities.
///
/// Units are dealt one at a time, cycling over the groups in index order and
/// skipping groups that are full. With enough capacity everywhere this gives
/// `n_total / groups` each with the remainder on the lowest indices; a group
/// that runs short has its shortfall spread round-robin over the others.
/// Returns `None` when the capacities cannot hold `n_total`.
pub(crate) fn allocate_round_robin(n_total: usize, capacities: &[usize]) -> Option<Vec<usize>> {
    if capacities.iter().sum::<usize>() < n_total {
        return None;
    }
    let mut alloc = vec![0usize; capacities.len()];
    let full_rounds = n_total / capacities.len().max(1);
    // Fast path for the common case where every group fills its even share.
    if capacities.iter().all(|&c| c >= full_rounds) {
        alloc.iter_mut().for_each(|a| *a = full_rounds);
    }
    let mut remaining = n_total - alloc.iter().sum::<usize>();
    let mut cursor = 0;
    while remaining > 0 {
        if alloc[cursor] < capacities[cursor] {
            alloc[cursor] += 1;
            remaining -= 1;
        }
        cursor = (cursor + 1) % capacities.len();
    }
    Some(alloc)
}

/// Uniform sample of `amount` distinct positions in `0..len`, ascending.
pub(crate) fn sample_positions(rng: &mut ChaCha8Rng, len: usize, amount: usize) -> Vec<usize> {
    let mut picked = index::sample(rng, len, amount.min(len)).into_vec();
    picked.sort_unstable();
    picked
}
