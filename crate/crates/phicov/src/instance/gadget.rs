//! Sampler for partitioning systems: `R` collections of `h` equal-size
//! blocks over a ground set `[n]`, where each collection covers every
//! element exactly `x` times (`x` is the minimizing integer of the Poisson
//! ratio curve of `phi`), and any cross-collection choice of blocks has
//! phi-coverage close to its binomial prediction.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::counting::CountingFunction;
use crate::poisson::{binomial_expectation, concavity_ratio};
use crate::{Error, Result};

/// Desk-scale caps: the verifier enumerates all `(h + 1)^R` block choices.
const MAX_N: usize = 2000;
const MAX_R: usize = 12;
const MAX_H: usize = 8;
const ARGMIN_EPS: f64 = 1e-6;

/// A verified partitioning system.
#[derive(Debug, Clone)]
pub struct PartitionSystem {
    /// `collections[i][j]` is block `j` of collection `i` (sorted indices).
    pub collections: Vec<Vec<Vec<usize>>>,
    /// Cover multiplicity of every element within each collection.
    pub cover_count: usize,
    /// Worst `|C(Q) - predicted| / n` over all verified block choices.
    pub worst_deviation: f64,
    /// Sampling rounds used (1 = first draw verified).
    pub attempts: usize,
}

/// Draws collections of blocks until the near-binomial coverage condition
/// verifies, or fails after `max_attempts` rounds.
///
/// Each collection is sampled by concatenating `x` independent uniform
/// permutations of `[n]` and cutting the concatenation into `h` consecutive
/// blocks of size `x * n / h`; a permutation is redrawn whenever it would
/// place a duplicate element inside a block. The verifier then checks every
/// choice function (pick one block from each collection of a subset `T`):
/// the phi-coverage of the chosen blocks must stay within `eta * n` of
/// `E[phi(Bin(|T|, x/h))] * n`.
pub fn gadget_partition_system(
    n: usize,
    h: usize,
    r: usize,
    eta: f64,
    phi: &CountingFunction,
    seed: u64,
    max_attempts: usize,
) -> Result<PartitionSystem> {
    if n == 0 || n > MAX_N {
        return Err(Error::Domain(format!("n = {n} must lie in 1..={MAX_N}")));
    }
    if r == 0 || r > MAX_R {
        return Err(Error::Domain(format!("R = {r} must lie in 1..={MAX_R}")));
    }
    if h == 0 || h > MAX_H {
        return Err(Error::Domain(format!("h = {h} must lie in 1..={MAX_H}")));
    }
    if !(0.0 < eta && eta < 1.0) {
        return Err(Error::Domain(format!("eta = {eta} must lie in (0, 1)")));
    }
    if max_attempts == 0 {
        return Err(Error::Domain("max_attempts must be >= 1".into()));
    }

    let x = concavity_ratio(phi, ARGMIN_EPS, None)?.argmin_x;
    if h < x {
        return Err(Error::Domain(format!(
            "h = {h} must be at least the ratio minimizer x = {x}"
        )));
    }
    if (x * n) % h != 0 {
        return Err(Error::Domain(format!(
            "block size x*n/h = {x}*{n}/{h} is not an integer"
        )));
    }
    let block_size = x * n / h;

    // Binomial predictions for |T| = 0..=R chosen collections.
    let q = x as f64 / h as f64;
    let mut predicted = Vec::with_capacity(r + 1);
    for k in 0..=r {
        predicted.push(binomial_expectation(phi, k, q)? * n as f64);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best_deviation = f64::INFINITY;
    for attempt in 1..=max_attempts {
        let collections: Vec<Vec<Vec<usize>>> =
            (0..r).map(|_| sample_cover(n, h, x, block_size, &mut rng)).collect();
        let worst = verify_choices(&collections, phi, n, h, &predicted);
        best_deviation = best_deviation.min(worst);
        if worst <= eta * n as f64 {
            return Ok(PartitionSystem {
                collections,
                cover_count: x,
                worst_deviation: worst / n as f64,
                attempts: attempt,
            });
        }
    }
    Err(Error::Verification {
        attempts: max_attempts,
        best_deviation: best_deviation / n as f64,
    })
}

/// One collection: `h` blocks of `block_size` covering each element exactly
/// `x` times, built by concatenating `x` random permutations of `[n]` and
/// cutting the stream into consecutive blocks.
///
/// When a block straddles two permutations, the second permutation must not
/// repeat an element already in the block. Instead of redrawing whole
/// permutations until that holds (the acceptance probability decays like
/// exp(-Theta(n)), so a literal retry loop never finishes), the conditioned
/// permutation is produced directly: its head is a uniform draw from the
/// elements missing from the open block, its remainder a uniform shuffle of
/// everything else. This is exactly the distribution the accept/reject loop
/// converges to, so each block is still marginally a uniform
/// `block_size`-subset of `[n]`.
fn sample_cover(
    n: usize,
    h: usize,
    x: usize,
    block_size: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<usize>> {
    let mut stream: Vec<usize> = Vec::with_capacity(x * n);
    for _ in 0..x {
        let boundary = stream.len();
        let open_block = (boundary / block_size) * block_size;
        let overhang = boundary - open_block;
        if overhang == 0 {
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(rng);
            stream.extend_from_slice(&perm);
        } else {
            // `need` more elements complete the open block; they must avoid
            // the `overhang` elements already in it (all from the previous
            // permutation's tail, hence distinct).
            let need = block_size - overhang;
            let mut in_block = vec![false; n];
            for &a in &stream[open_block..boundary] {
                in_block[a] = true;
            }
            let mut allowed: Vec<usize> =
                (0..n).filter(|&a| !in_block[a]).collect();
            allowed.shuffle(rng);
            let mut rest: Vec<usize> = allowed.split_off(need);
            rest.extend((0..n).filter(|&a| in_block[a]));
            rest.shuffle(rng);
            stream.extend_from_slice(&allowed);
            stream.extend_from_slice(&rest);
        }
    }
    let mut blocks: Vec<Vec<usize>> = stream.chunks(block_size).map(<[usize]>::to_vec).collect();
    debug_assert_eq!(blocks.len(), h);
    for block in &mut blocks {
        block.sort_unstable();
    }
    blocks
}

/// Max absolute deviation of phi-coverage from its prediction over all
/// `(h + 1)^R` choice functions (each collection contributes one block or
/// is skipped).
fn verify_choices(
    collections: &[Vec<Vec<usize>>],
    phi: &CountingFunction,
    n: usize,
    h: usize,
    predicted: &[f64],
) -> f64 {
    let r = collections.len();
    let mut choice = vec![0usize; r]; // 0 = skip, 1..=h = block index + 1
    let mut worst = 0.0f64;
    let mut counts = vec![0usize; n];
    loop {
        let picked: usize = choice.iter().filter(|&&c| c > 0).count();
        if picked > 0 {
            counts.iter_mut().for_each(|c| *c = 0);
            for (i, &c) in choice.iter().enumerate() {
                if c > 0 {
                    for &a in &collections[i][c - 1] {
                        counts[a] += 1;
                    }
                }
            }
            let coverage: f64 = counts.iter().map(|&c| phi.at_int(c)).sum();
            worst = worst.max((coverage - predicted[picked]).abs());
        }
        // odometer over {0..h}^R
        let mut pos = 0;
        loop {
            if pos == r {
                return worst;
            }
            if choice[pos] == h {
                choice[pos] = 0;
                pos += 1;
            } else {
                choice[pos] += 1;
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counting::CountingFunction;

    fn threshold(l: usize) -> CountingFunction {
        CountingFunction::parse(&format!("threshold:l={l}")).unwrap()
    }

    #[test]
    fn blocks_cover_each_element_exactly_x_times() {
        let sys =
            gadget_partition_system(40, 2, 2, 0.9, &threshold(1), 11, 50).unwrap();
        assert_eq!(sys.cover_count, 1);
        for collection in &sys.collections {
            assert_eq!(collection.len(), 2);
            let mut counts = vec![0usize; 40];
            for block in collection {
                assert_eq!(block.len(), 20);
                for &a in block {
                    counts[a] += 1;
                }
            }
            assert!(counts.iter().all(|&c| c == 1));
        }
    }

    #[test]
    fn straddling_blocks_stay_duplicate_free() {
        // x = 2, h = 3, n = 12: blocks of size 8, so the middle block of
        // each collection straddles the two concatenated permutations
        let phi = threshold(2);
        let sys = gadget_partition_system(12, 3, 3, 0.9, &phi, 5, 50).unwrap();
        assert_eq!(sys.cover_count, 2);
        for collection in &sys.collections {
            assert_eq!(collection.len(), 3);
            let mut counts = vec![0usize; 12];
            for block in collection {
                assert_eq!(block.len(), 8);
                let mut deduped = block.clone();
                deduped.dedup();
                assert_eq!(deduped.len(), block.len(), "duplicate inside a block");
                for &a in block {
                    counts[a] += 1;
                }
            }
            assert!(counts.iter().all(|&c| c == 2));
        }
    }

    #[test]
    fn divisibility_and_h_bounds_are_enforced() {
        let phi = threshold(1);
        let err = gadget_partition_system(10, 3, 2, 0.5, &phi, 0, 10).unwrap_err();
        assert!(err.to_string().contains("not an integer"), "{err}");

        // threshold:l=3 has x = 3 > h = 2
        let err = gadget_partition_system(12, 2, 2, 0.5, &threshold(3), 0, 10).unwrap_err();
        assert!(err.to_string().contains("at least"), "{err}");

        assert!(gadget_partition_system(0, 2, 2, 0.5, &phi, 0, 10).is_err());
        assert!(gadget_partition_system(12, 2, 0, 0.5, &phi, 0, 10).is_err());
        assert!(gadget_partition_system(12, 2, 2, 1.5, &phi, 0, 10).is_err());
        assert!(gadget_partition_system(12, 2, 2, 0.5, &phi, 0, 0).is_err());
    }

    #[test]
    fn impossible_tolerance_reports_best_deviation() {
        // n=10, h=2: picking one block from each of two collections covers
        // 10 - o elements for an integer overlap o, while the binomial
        // prediction is 7.5, so the deviation is always >= 0.5 and the
        // tolerance 0.01 * 10 = 0.1 can never be met.
        let err = gadget_partition_system(10, 2, 2, 0.01, &threshold(1), 1, 3).unwrap_err();
        match err {
            Error::Verification { attempts, best_deviation } => {
                assert_eq!(attempts, 3);
                assert!(best_deviation >= 0.05 - 1e-12);
            }
            other => panic!("expected verification failure, got {other}"),
        }
    }
}
