//! Tuple miners: offline triplets over the whole dataset, online triplets
//! within a batch, and N-pair tuple construction.
//!
//! Joint labels are dense class indices; a valid triplet has
//! `label(anchor) == label(positive)` and `label(anchor) != label(negative)`.

use super::{dot, squared_euclidean};
use crate::error::{Error, Result};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Indices of (anchor, positive, negative) in the mined-over collection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TripletIdx {
    pub anchor: usize,
    pub positive: usize,
    pub negative: usize,
}

/// Offline mining output: the epoch's triplets plus any classes that could
/// not serve as anchor sources.
#[derive(Debug, Clone)]
pub struct OfflineMining {
    pub triplets: Vec<TripletIdx>,
    pub skipped_classes: Vec<usize>,
}

/// Draws `count` uniformly sampled valid triplets, fixed for the epoch.
///
/// Classes with fewer than two samples are skipped as anchor sources and
/// reported. Anchors are uniform over samples of eligible classes, positives
/// uniform over the anchor's classmates, negatives uniform over all samples
/// of other classes.
pub fn mine_offline_triplets(labels: &[usize], seed: u64, count: usize) -> Result<OfflineMining> {
    let n_classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &l) in labels.iter().enumerate() {
        members[l].push(i);
    }
    let mut skipped_classes = Vec::new();
    let mut anchor_pool = Vec::new();
    for (c, m) in members.iter().enumerate() {
        if m.is_empty() {
            continue;
        }
        if m.len() < 2 {
            skipped_classes.push(c);
        } else {
            anchor_pool.extend_from_slice(m);
        }
    }
    if anchor_pool.is_empty() {
        return Err(Error::Data(
            "offline mining: no class has at least 2 samples".into(),
        ));
    }

    let mut rng = crate::rng::stream(seed);
    let mut triplets = Vec::with_capacity(count);
    for _ in 0..count {
        let anchor = anchor_pool[rng.gen_range(0..anchor_pool.len())];
        let class = labels[anchor];
        let classmates = &members[class];
        let positive = loop {
            let p = classmates[rng.gen_range(0..classmates.len())];
            if p != anchor {
                break p;
            }
        };
        let n_negatives = labels.len() - classmates.len();
        if n_negatives == 0 {
            return Err(Error::Data(
                "offline mining: a negative sample requires at least 2 classes".into(),
            ));
        }
        // uniform over all samples outside the anchor class
        let mut pick = rng.gen_range(0..n_negatives);
        let mut negative = None;
        for (i, &l) in labels.iter().enumerate() {
            if l != class {
                if pick == 0 {
                    negative = Some(i);
                    break;
                }
                pick -= 1;
            }
        }
        triplets.push(TripletIdx {
            anchor,
            positive,
            negative: negative.expect("counted above"),
        });
    }
    Ok(OfflineMining {
        triplets,
        skipped_classes,
    })
}

/// Negative-selection strategy for online (within-batch) mining.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OnlineStrategy {
    /// Uniform among negatives that currently violate the margin. A pair with
    /// no violating negative emits nothing.
    RandomNegative,
    /// Uniform among negatives with `d2(a,p) < d2(a,n) < d2(a,p) + margin`;
    /// falls back to the hardest negative when that window is empty.
    SemiHard,
    /// The nearest negative to the anchor.
    Hardest,
}

/// Mines triplets from one batch of embeddings.
///
/// Emits one triplet per ordered same-class (anchor, positive) pair, subject
/// to the strategy's candidate rule. Returns an empty list when the batch
/// holds no valid pair.
pub fn mine_online(
    embeddings: &[Vec<f64>],
    labels: &[usize],
    strategy: OnlineStrategy,
    margin: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<TripletIdx> {
    let n = embeddings.len();
    debug_assert_eq!(n, labels.len());
    let mut out = Vec::new();
    for a in 0..n {
        for p in 0..n {
            if a == p || labels[a] != labels[p] {
                continue;
            }
            let d_ap2 = squared_euclidean(&embeddings[a], &embeddings[p]);
            let negatives: Vec<(usize, f64)> = (0..n)
                .filter(|&i| labels[i] != labels[a])
                .map(|i| (i, squared_euclidean(&embeddings[a], &embeddings[i])))
                .collect();
            if negatives.is_empty() {
                continue;
            }
            let hardest = negatives
                .iter()
                .copied()
                .min_by(|x, y| x.1.partial_cmp(&y.1).unwrap().then(x.0.cmp(&y.0)))
                .map(|(i, _)| i)
                .unwrap();
            let negative = match strategy {
                OnlineStrategy::Hardest => Some(hardest),
                OnlineStrategy::RandomNegative => {
                    let violating: Vec<usize> = negatives
                        .iter()
                        .filter(|&&(_, d2)| d_ap2 - d2 + margin > 0.0)
                        .map(|&(i, _)| i)
                        .collect();
                    if violating.is_empty() {
                        None
                    } else {
                        Some(violating[rng.gen_range(0..violating.len())])
                    }
                }
                OnlineStrategy::SemiHard => {
                    let window: Vec<usize> = negatives
                        .iter()
                        .filter(|&&(_, d2)| d_ap2 < d2 && d2 < d_ap2 + margin)
                        .map(|&(i, _)| i)
                        .collect();
                    if window.is_empty() {
                        Some(hardest)
                    } else {
                        Some(window[rng.gen_range(0..window.len())])
                    }
                }
            };
            if let Some(negative) = negative {
                out.push(TripletIdx {
                    anchor: a,
                    positive: p,
                    negative,
                });
            }
        }
    }
    out
}

/// N-pair tuple: one anchor-positive pair plus its negative set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NPairTuple {
    pub anchor: usize,
    pub positive: usize,
    pub negatives: Vec<usize>,
}

/// Negative-set construction for N-pair tuples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NPairMode {
    /// Every ordered same-class pair, against all other-class batch members.
    AllPositivePairs,
    /// As above, but negatives are reduced to the most anchor-similar
    /// representative of each negative class.
    HardNegativePairs,
}

/// Builds N-pair tuples from one batch. Pairs with no negatives are dropped.
pub fn mine_npair(embeddings: &[Vec<f64>], labels: &[usize], mode: NPairMode) -> Vec<NPairTuple> {
    let n = embeddings.len();
    debug_assert_eq!(n, labels.len());
    let mut out = Vec::new();
    for a in 0..n {
        for p in 0..n {
            if a == p || labels[a] != labels[p] {
                continue;
            }
            let negatives: Vec<usize> = match mode {
                NPairMode::AllPositivePairs => {
                    (0..n).filter(|&i| labels[i] != labels[a]).collect()
                }
                NPairMode::HardNegativePairs => {
                    // per negative class, keep the member with max a.n
                    let mut best: Vec<(usize, usize, f64)> = Vec::new(); // (class, idx, sim)
                    for i in (0..n).filter(|&i| labels[i] != labels[a]) {
                        let sim = dot(&embeddings[a], &embeddings[i]);
                        match best.iter_mut().find(|(c, _, _)| *c == labels[i]) {
                            Some(entry) => {
                                if sim > entry.2 {
                                    entry.1 = i;
                                    entry.2 = sim;
                                }
                            }
                            None => best.push((labels[i], i, sim)),
                        }
                    }
                    best.sort_by_key(|&(c, _, _)| c);
                    best.into_iter().map(|(_, i, _)| i).collect()
                }
            };
            if !negatives.is_empty() {
                out.push(NPairTuple {
                    anchor: a,
                    positive: p,
                    negatives,
                });
            }
        }
    }
    out
}
