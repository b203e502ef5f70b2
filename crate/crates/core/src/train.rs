//! Mode-exclusive training loop.
//!
//! A run is configured with exactly one loss, which implies its training
//! mode; mixed modes are unrepresentable. Training is single-threaded and
//! fully seeded, so identical (config, seed) runs produce bitwise-identical
//! parameters.

use crate::data::{build_joint_labels, image::load_and_resize, Manifest, Split};
use crate::embedder::{
    backward, forward, head_backward, head_logits, ClassifierHead, Embedding, ModelGrads,
    ModelParams,
};
use crate::error::{Error, Result};
use crate::eval::{EmbeddingRecord, EmbeddingSet};
use crate::kernels::{adam_step, softmax_xent, AdamState, LrSchedule, Tensor};
use crate::losses::{
    contrastive_dm, contrastive_sm, mine_npair, mine_offline_triplets, mine_online, npair_loss,
    triplet_loss, MarginConfig, NPairMode, OnlineStrategy,
};
use crate::rng;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

/// The three mutually exclusive training modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrainMode {
    Classical,
    Siamese,
    Triplet,
}

impl std::fmt::Display for TrainMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            TrainMode::Classical => "classical",
            TrainMode::Siamese => "siamese",
            TrainMode::Triplet => "triplet",
        };
        write!(f, "{s}")
    }
}

impl std::str::FromStr for TrainMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classical" => Ok(TrainMode::Classical),
            "siamese" => Ok(TrainMode::Siamese),
            "triplet" => Ok(TrainMode::Triplet),
            other => Err(Error::Config(format!(
                "unknown mode '{other}' (expected classical, siamese or triplet)"
            ))),
        }
    }
}

/// One training objective. Each variant belongs to exactly one mode, so a
/// (mode, loss) mismatch cannot be constructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrainLoss {
    CrossEntropy,
    ContrastiveSingleMargin,
    ContrastiveDoubleMargin,
    TripletOffline,
    TripletOnlineRandom,
    TripletOnlineSemiHard,
    TripletOnlineHardest,
    NpairAllPositive,
    NpairHardNegative,
}

impl TrainLoss {
    pub fn mode(self) -> TrainMode {
        match self {
            TrainLoss::CrossEntropy => TrainMode::Classical,
            TrainLoss::ContrastiveSingleMargin | TrainLoss::ContrastiveDoubleMargin => {
                TrainMode::Siamese
            }
            _ => TrainMode::Triplet,
        }
    }

    pub const ALL: [TrainLoss; 9] = [
        TrainLoss::CrossEntropy,
        TrainLoss::ContrastiveSingleMargin,
        TrainLoss::ContrastiveDoubleMargin,
        TrainLoss::TripletOffline,
        TrainLoss::TripletOnlineRandom,
        TrainLoss::TripletOnlineSemiHard,
        TrainLoss::TripletOnlineHardest,
        TrainLoss::NpairAllPositive,
        TrainLoss::NpairHardNegative,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TrainLoss::CrossEntropy => "cross-entropy",
            TrainLoss::ContrastiveSingleMargin => "smcl",
            TrainLoss::ContrastiveDoubleMargin => "dmcl",
            TrainLoss::TripletOffline => "triplet-offline",
            TrainLoss::TripletOnlineRandom => "triplet-random",
            TrainLoss::TripletOnlineSemiHard => "triplet-semi-hard",
            TrainLoss::TripletOnlineHardest => "triplet-hardest",
            TrainLoss::NpairAllPositive => "npair-all-positive",
            TrainLoss::NpairHardNegative => "npair-hard-negative",
        }
    }
}

impl std::str::FromStr for TrainLoss {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        TrainLoss::ALL
            .into_iter()
            .find(|l| l.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = TrainLoss::ALL.iter().map(|l| l.name()).collect();
                Error::Config(format!(
                    "unknown loss '{s}' (expected one of {})",
                    names.join(", ")
                ))
            })
    }
}

/// Full training-run configuration. Defaults are the standard recipe:
/// lr 1e-4, batch 4, 50 epochs, tenfold decay every 8 epochs, k = 8.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub loss: TrainLoss,
    pub embedding_dim: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub gamma: f64,
    pub decay_step_epochs: usize,
    pub margins: MarginConfig,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            loss: TrainLoss::ContrastiveSingleMargin,
            embedding_dim: 8,
            lr: 1e-4,
            batch_size: 4,
            epochs: 50,
            gamma: 0.1,
            decay_step_epochs: 8,
            margins: MarginConfig::default(),
            seed: 42,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.margins.validate()?;
        if self.embedding_dim == 0 {
            return Err(Error::Config("embedding dimension must be positive".into()));
        }
        if !(self.lr > 0.0) || !(self.gamma > 0.0) {
            return Err(Error::Config("lr and gamma must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        if self.loss.mode() != TrainMode::Classical && self.batch_size < 4 {
            return Err(Error::Config(
                "pair and triplet modes need a batch size of at least 4 \
                 (two classes, two samples each)"
                    .into(),
            ));
        }
        Ok(())
    }

    pub fn schedule(&self) -> LrSchedule {
        LrSchedule::new(self.lr, self.gamma, self.decay_step_epochs)
    }
}

/// One epoch's record in the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    pub mean_loss: f64,
    pub n_steps: usize,
    pub n_tuples: usize,
}

/// Trained parameters plus the per-epoch log.
pub struct TrainOutcome {
    pub params: ModelParams,
    pub head: Option<ClassifierHead>,
    pub log: Vec<EpochLog>,
}

/// The training split loaded into memory: images, dense classes, manifest
/// indices, in manifest order.
struct TrainingSet {
    images: Vec<Tensor>,
    classes: Vec<usize>,
    n_classes: usize,
}

fn load_training_set(manifest: &Manifest) -> Result<TrainingSet> {
    let labels = build_joint_labels(manifest)?;
    let assignment = labels.assign(manifest)?;
    let mut images = Vec::new();
    let mut classes = Vec::new();
    for (i, sample) in manifest.samples.iter().enumerate() {
        if sample.split == Some(Split::Train) {
            images.push(load_and_resize(manifest, sample)?);
            classes.push(assignment[i]);
        }
    }
    if images.is_empty() {
        return Err(Error::Data("training split is empty".into()));
    }
    Ok(TrainingSet {
        images,
        classes,
        n_classes: labels.n_classes(),
    })
}

/// Per-block Adam, stepped once per optimizer update.
struct BlockOptimizer {
    states: Vec<AdamState>,
}

impl BlockOptimizer {
    fn new(block_lens: &[usize]) -> Self {
        BlockOptimizer {
            states: block_lens.iter().map(|&n| AdamState::new(n)).collect(),
        }
    }

    fn step(&mut self, params: &mut [&mut [f64]], grads: &[&[f64]], lr: f64) -> Result<()> {
        for ((p, g), s) in params.iter_mut().zip(grads).zip(&mut self.states) {
            adam_step(p, g, s, lr)?;
        }
        Ok(())
    }
}

/// Class-balanced batch: P classes x K samples with P*K = batch size.
/// Keeps at least one positive pair in every pair/triplet batch.
fn balanced_batch(
    eligible: &[usize],
    members: &[Vec<usize>],
    batch_size: usize,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Vec<usize> {
    let k = 2usize;
    let p = (batch_size / k).max(1).min(eligible.len());
    let mut class_pick = eligible.to_vec();
    class_pick.shuffle(rng);
    let mut batch = Vec::with_capacity(p * k);
    for &c in class_pick.iter().take(p) {
        let m = &members[c];
        let mut order: Vec<usize> = (0..m.len()).collect();
        order.shuffle(rng);
        for &oi in order.iter().take(k) {
            batch.push(m[oi]);
        }
    }
    batch
}

fn embeddings_of(traces: &[crate::embedder::ForwardTrace]) -> Vec<Vec<f64>> {
    traces.iter().map(|t| t.embedding().values).collect()
}

/// Trains one model on the manifest's train split.
pub fn train(manifest: &Manifest, cfg: &RunConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let set = load_training_set(manifest)?;
    let mut params = ModelParams::init(cfg.embedding_dim, cfg.seed)?;
    let mut head = if cfg.loss.mode() == TrainMode::Classical {
        if set.n_classes < 2 {
            return Err(Error::Data(
                "classical mode needs at least 2 joint classes".into(),
            ));
        }
        Some(ClassifierHead::init(
            cfg.embedding_dim,
            set.n_classes,
            cfg.seed,
        )?)
    } else {
        None
    };

    let block_lens: Vec<usize> = params
        .blocks()
        .iter()
        .map(|b| b.len())
        .chain(head.iter().flat_map(|h| h.blocks().into_iter().map(|b| b.len())))
        .collect();
    let mut optimizer = BlockOptimizer::new(&block_lens);
    let schedule = cfg.schedule();

    // class membership over training items
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); set.n_classes];
    for (i, &c) in set.classes.iter().enumerate() {
        members[c].push(i);
    }
    let eligible: Vec<usize> = (0..set.n_classes)
        .filter(|&c| members[c].len() >= 2)
        .collect();
    if cfg.loss.mode() != TrainMode::Classical {
        if eligible.len() < 2 {
            return Err(Error::Data(
                "pair and triplet modes need at least 2 classes with 2+ training samples".into(),
            ));
        }
    }

    let n_train = set.images.len();
    let mut log = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let lr = schedule.lr(epoch);
        let mut rng = rng::stream(rng::derive_seed(cfg.seed, "epoch", epoch as u64));
        let mut loss_sum = 0.0;
        let mut n_tuples = 0usize;
        let mut n_steps = 0usize;

        match cfg.loss {
            TrainLoss::CrossEntropy => {
                let head_ref = head.as_mut().expect("classical has a head");
                let mut order: Vec<usize> = (0..n_train).collect();
                order.shuffle(&mut rng);
                for chunk in order.chunks(cfg.batch_size) {
                    let mut grads = ModelGrads::zeros_like(&params);
                    let mut hg_slopes = vec![0.0; head_ref.slopes.len()];
                    let mut hg_weights = Tensor::zeros(head_ref.weights.shape());
                    let mut hg_bias = vec![0.0; head_ref.bias.len()];
                    let scale = 1.0 / chunk.len() as f64;
                    for &i in chunk {
                        let trace = forward(&set.images[i], &params)?;
                        let embedding = trace.embedding();
                        let ht = head_logits(&embedding, head_ref)?;
                        let (loss, mut d_logits) = softmax_xent(&ht.logits, set.classes[i])?;
                        loss_sum += loss;
                        n_tuples += 1;
                        for g in d_logits.iter_mut() {
                            *g *= scale;
                        }
                        let hg = head_backward(&embedding, head_ref, &ht, &d_logits)?;
                        for (a, b) in hg_slopes.iter_mut().zip(&hg.slopes) {
                            *a += b;
                        }
                        for (a, b) in hg_weights.data_mut().iter_mut().zip(hg.weights.data()) {
                            *a += b;
                        }
                        for (a, b) in hg_bias.iter_mut().zip(&hg.bias) {
                            *a += b;
                        }
                        grads.add_assign(&backward(&trace, &params, &hg.d_embedding)?);
                    }
                    let mut param_blocks = params.blocks_mut();
                    param_blocks.append(&mut head_ref.blocks_mut());
                    let mut grad_blocks = grads.blocks();
                    grad_blocks.push(&hg_slopes);
                    grad_blocks.push(hg_weights.data());
                    grad_blocks.push(&hg_bias);
                    optimizer.step(&mut param_blocks, &grad_blocks, lr)?;
                    n_steps += 1;
                }
            }
            TrainLoss::ContrastiveSingleMargin | TrainLoss::ContrastiveDoubleMargin => {
                let steps = n_train.div_ceil(cfg.batch_size);
                for _ in 0..steps {
                    let batch = balanced_batch(&eligible, &members, cfg.batch_size, &mut rng);
                    let traces: Vec<_> = batch
                        .iter()
                        .map(|&i| forward(&set.images[i], &params))
                        .collect::<Result<_>>()?;
                    let embeddings = embeddings_of(&traces);
                    let labels: Vec<usize> = batch.iter().map(|&i| set.classes[i]).collect();

                    // all unordered within-batch pairs, labeled by joint-class equality
                    let mut emb_grads = vec![vec![0.0; cfg.embedding_dim]; batch.len()];
                    let mut pair_count = 0usize;
                    let mut batch_loss = 0.0;
                    for i in 0..batch.len() {
                        for j in (i + 1)..batch.len() {
                            let same = labels[i] == labels[j];
                            let (loss, ga, gb) = match cfg.loss {
                                TrainLoss::ContrastiveSingleMargin => contrastive_sm(
                                    &embeddings[i],
                                    &embeddings[j],
                                    same,
                                    cfg.margins.contrastive,
                                ),
                                _ => contrastive_dm(
                                    &embeddings[i],
                                    &embeddings[j],
                                    same,
                                    cfg.margins.double.0,
                                    cfg.margins.double.1,
                                ),
                            };
                            batch_loss += loss;
                            pair_count += 1;
                            for d in 0..cfg.embedding_dim {
                                emb_grads[i][d] += ga[d];
                                emb_grads[j][d] += gb[d];
                            }
                        }
                    }
                    if pair_count == 0 {
                        continue;
                    }
                    loss_sum += batch_loss;
                    n_tuples += pair_count;
                    let scale = 1.0 / pair_count as f64;
                    let mut grads = ModelGrads::zeros_like(&params);
                    for (trace, mut g) in traces.iter().zip(emb_grads) {
                        if g.iter().all(|&v| v == 0.0) {
                            continue;
                        }
                        for v in g.iter_mut() {
                            *v *= scale;
                        }
                        grads.add_assign(&backward(trace, &params, &g)?);
                    }
                    let mut param_blocks = params.blocks_mut();
                    optimizer.step(&mut param_blocks, &grads.blocks(), lr)?;
                    n_steps += 1;
                }
            }
            TrainLoss::TripletOffline => {
                let count = n_train.div_ceil(3).max(1);
                let mined = mine_offline_triplets(
                    &set.classes,
                    rng::derive_seed(cfg.seed, "offline", epoch as u64),
                    count,
                )?;
                let per_step = cfg.batch_size.div_ceil(3).max(1);
                for group in mined.triplets.chunks(per_step) {
                    // forward each distinct image once
                    let mut batch: Vec<usize> = Vec::new();
                    for t in group {
                        for idx in [t.anchor, t.positive, t.negative] {
                            if !batch.contains(&idx) {
                                batch.push(idx);
                            }
                        }
                    }
                    let traces: Vec<_> = batch
                        .iter()
                        .map(|&i| forward(&set.images[i], &params))
                        .collect::<Result<_>>()?;
                    let embeddings = embeddings_of(&traces);
                    let pos_of = |idx: usize| batch.iter().position(|&b| b == idx).unwrap();

                    let mut emb_grads = vec![vec![0.0; cfg.embedding_dim]; batch.len()];
                    for t in group {
                        let (a, p, n) = (pos_of(t.anchor), pos_of(t.positive), pos_of(t.negative));
                        let (loss, ga, gp, gn) = triplet_loss(
                            &embeddings[a],
                            &embeddings[p],
                            &embeddings[n],
                            cfg.margins.triplet,
                        );
                        loss_sum += loss;
                        n_tuples += 1;
                        for d in 0..cfg.embedding_dim {
                            emb_grads[a][d] += ga[d];
                            emb_grads[p][d] += gp[d];
                            emb_grads[n][d] += gn[d];
                        }
                    }
                    let scale = 1.0 / group.len() as f64;
                    let mut grads = ModelGrads::zeros_like(&params);
                    for (trace, mut g) in traces.iter().zip(emb_grads) {
                        if g.iter().all(|&v| v == 0.0) {
                            continue;
                        }
                        for v in g.iter_mut() {
                            *v *= scale;
                        }
                        grads.add_assign(&backward(trace, &params, &g)?);
                    }
                    let mut param_blocks = params.blocks_mut();
                    optimizer.step(&mut param_blocks, &grads.blocks(), lr)?;
                    n_steps += 1;
                }
            }
            TrainLoss::TripletOnlineRandom
            | TrainLoss::TripletOnlineSemiHard
            | TrainLoss::TripletOnlineHardest => {
                let strategy = match cfg.loss {
                    TrainLoss::TripletOnlineRandom => OnlineStrategy::RandomNegative,
                    TrainLoss::TripletOnlineSemiHard => OnlineStrategy::SemiHard,
                    _ => OnlineStrategy::Hardest,
                };
                let steps = n_train.div_ceil(cfg.batch_size);
                for _ in 0..steps {
                    let batch = balanced_batch(&eligible, &members, cfg.batch_size, &mut rng);
                    let traces: Vec<_> = batch
                        .iter()
                        .map(|&i| forward(&set.images[i], &params))
                        .collect::<Result<_>>()?;
                    let embeddings = embeddings_of(&traces);
                    let labels: Vec<usize> = batch.iter().map(|&i| set.classes[i]).collect();
                    let triplets =
                        mine_online(&embeddings, &labels, strategy, cfg.margins.triplet, &mut rng);
                    if triplets.is_empty() {
                        continue;
                    }
                    let mut emb_grads = vec![vec![0.0; cfg.embedding_dim]; batch.len()];
                    for t in &triplets {
                        let (loss, ga, gp, gn) = triplet_loss(
                            &embeddings[t.anchor],
                            &embeddings[t.positive],
                            &embeddings[t.negative],
                            cfg.margins.triplet,
                        );
                        loss_sum += loss;
                        n_tuples += 1;
                        for d in 0..cfg.embedding_dim {
                            emb_grads[t.anchor][d] += ga[d];
                            emb_grads[t.positive][d] += gp[d];
                            emb_grads[t.negative][d] += gn[d];
                        }
                    }
                    let scale = 1.0 / triplets.len() as f64;
                    let mut grads = ModelGrads::zeros_like(&params);
                    for (trace, mut g) in traces.iter().zip(emb_grads) {
                        if g.iter().all(|&v| v == 0.0) {
                            continue;
                        }
                        for v in g.iter_mut() {
                            *v *= scale;
                        }
                        grads.add_assign(&backward(trace, &params, &g)?);
                    }
                    let mut param_blocks = params.blocks_mut();
                    optimizer.step(&mut param_blocks, &grads.blocks(), lr)?;
                    n_steps += 1;
                }
            }
            TrainLoss::NpairAllPositive | TrainLoss::NpairHardNegative => {
                let mode = match cfg.loss {
                    TrainLoss::NpairAllPositive => NPairMode::AllPositivePairs,
                    _ => NPairMode::HardNegativePairs,
                };
                let steps = n_train.div_ceil(cfg.batch_size);
                for _ in 0..steps {
                    let batch = balanced_batch(&eligible, &members, cfg.batch_size, &mut rng);
                    let traces: Vec<_> = batch
                        .iter()
                        .map(|&i| forward(&set.images[i], &params))
                        .collect::<Result<_>>()?;
                    let embeddings = embeddings_of(&traces);
                    let labels: Vec<usize> = batch.iter().map(|&i| set.classes[i]).collect();
                    let tuples = mine_npair(&embeddings, &labels, mode);
                    if tuples.is_empty() {
                        continue;
                    }
                    let mut emb_grads = vec![vec![0.0; cfg.embedding_dim]; batch.len()];
                    for t in &tuples {
                        let negatives: Vec<&[f64]> =
                            t.negatives.iter().map(|&i| embeddings[i].as_slice()).collect();
                        let (loss, ga, gp, gns) =
                            npair_loss(&embeddings[t.anchor], &embeddings[t.positive], &negatives)?;
                        loss_sum += loss;
                        n_tuples += 1;
                        for d in 0..cfg.embedding_dim {
                            emb_grads[t.anchor][d] += ga[d];
                            emb_grads[t.positive][d] += gp[d];
                        }
                        for (neg_idx, gn) in t.negatives.iter().zip(&gns) {
                            for d in 0..cfg.embedding_dim {
                                emb_grads[*neg_idx][d] += gn[d];
                            }
                        }
                    }
                    let scale = 1.0 / tuples.len() as f64;
                    let mut grads = ModelGrads::zeros_like(&params);
                    for (trace, mut g) in traces.iter().zip(emb_grads) {
                        if g.iter().all(|&v| v == 0.0) {
                            continue;
                        }
                        for v in g.iter_mut() {
                            *v *= scale;
                        }
                        grads.add_assign(&backward(trace, &params, &g)?);
                    }
                    let mut param_blocks = params.blocks_mut();
                    optimizer.step(&mut param_blocks, &grads.blocks(), lr)?;
                    n_steps += 1;
                }
            }
        }

        let mean_loss = if n_tuples > 0 {
            loss_sum / n_tuples as f64
        } else {
            0.0
        };
        if !mean_loss.is_finite() {
            return Err(Error::NonFinite("epoch mean loss"));
        }
        log.push(EpochLog {
            epoch,
            lr,
            mean_loss,
            n_steps,
            n_tuples,
        });
    }

    Ok(TrainOutcome { params, head, log })
}

/// Embeds every sample of the given split (or all samples when `None`),
/// in manifest order; sample_id is the manifest path.
pub fn embed_split(
    manifest: &Manifest,
    params: &ModelParams,
    split: Option<Split>,
) -> Result<EmbeddingSet> {
    let mut records = Vec::new();
    for sample in &manifest.samples {
        if split.is_some() && sample.split != split {
            continue;
        }
        let image = load_and_resize(manifest, sample)?;
        let Embedding { values } = crate::embedder::embed(&image, params)?;
        records.push(EmbeddingRecord {
            sample_id: sample.path.clone(),
            subject_id: sample.subject_id.clone(),
            sensor_id: sample.sensor_id.clone(),
            k: params.embedding_dim,
            values,
        });
    }
    EmbeddingSet::new(records)
}

/// Seeded random subset of the test split, stratified per class so genuine
/// pairs survive; used as the validation set of the dimension sweep.
pub fn validation_subset(manifest: &Manifest, n_target: usize, seed: u64) -> Result<Manifest> {
    let labels = build_joint_labels(manifest)?;
    let assignment = labels.assign(manifest)?;
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); labels.n_classes()];
    for (i, sample) in manifest.samples.iter().enumerate() {
        if sample.split == Some(Split::Test) {
            members[assignment[i]].push(i);
        }
    }
    let n_test: usize = members.iter().map(|m| m.len()).sum();
    if n_test == 0 {
        return Err(Error::Data("validation subset: empty test split".into()));
    }
    let per_class = (n_target.div_ceil(labels.n_classes())).max(2);
    let mut chosen = Vec::new();
    for (c, m) in members.iter().enumerate() {
        let mut order = m.clone();
        let mut r = rng::stream(rng::derive_seed(seed, "validation", c as u64));
        order.shuffle(&mut r);
        chosen.extend(order.into_iter().take(per_class));
    }
    chosen.sort_unstable();
    Ok(Manifest {
        samples: chosen
            .into_iter()
            .map(|i| manifest.samples[i].clone())
            .collect(),
        base_dir: manifest.base_dir.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth::{generate_synthetic, SynthConfig};
    use crate::data::split_70_30;

    fn tiny_manifest(dir: &std::path::Path) -> Manifest {
        let cfg = SynthConfig {
            n_subjects: 2,
            n_sensors: 2,
            images_per_class: 4,
            ..SynthConfig::default()
        };
        let mut m = generate_synthetic(&cfg, dir).unwrap();
        split_70_30(&mut m, 1).unwrap();
        m
    }

    #[test]
    fn invalid_configs_rejected_before_work() {
        let cfg = RunConfig {
            batch_size: 2,
            loss: TrainLoss::ContrastiveSingleMargin,
            ..RunConfig::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = RunConfig {
            margins: MarginConfig {
                contrastive: 0.0,
                ..MarginConfig::default()
            },
            ..RunConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn loss_names_round_trip() {
        for loss in TrainLoss::ALL {
            let parsed: TrainLoss = loss.name().parse().unwrap();
            assert_eq!(parsed, loss);
        }
        assert!("smclx".parse::<TrainLoss>().is_err());
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let dir = tempfile::tempdir().unwrap();
        let m = tiny_manifest(dir.path());
        let cfg = RunConfig {
            epochs: 0,
            ..RunConfig::default()
        };
        let out = train(&m, &cfg).unwrap();
        assert_eq!(out.params, ModelParams::init(8, cfg.seed).unwrap());
        assert!(out.log.is_empty());
    }

    #[test]
    fn training_is_bitwise_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let m = tiny_manifest(dir.path());
        let cfg = RunConfig {
            epochs: 2,
            ..RunConfig::default()
        };
        let a = train(&m, &cfg).unwrap();
        let b = train(&m, &cfg).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.log, b.log);
    }

    #[test]
    fn every_mode_trains_and_logs_the_schedule() {
        let dir = tempfile::tempdir().unwrap();
        let m = tiny_manifest(dir.path());
        for loss in TrainLoss::ALL {
            let cfg = RunConfig {
                loss,
                epochs: 1,
                ..RunConfig::default()
            };
            let out = train(&m, &cfg).unwrap_or_else(|e| panic!("{loss:?}: {e}"));
            assert_eq!(out.log.len(), 1);
            assert_eq!(out.log[0].lr, 1e-4);
            assert_eq!(out.head.is_some(), loss.mode() == TrainMode::Classical);
            assert!(out.log[0].mean_loss.is_finite());
        }
    }

    #[test]
    fn embed_split_covers_the_requested_split() {
        let dir = tempfile::tempdir().unwrap();
        let m = tiny_manifest(dir.path());
        let params = ModelParams::init(8, 3).unwrap();
        let test = embed_split(&m, &params, Some(Split::Test)).unwrap();
        let want = m.samples.iter().filter(|s| s.split == Some(Split::Test)).count();
        assert_eq!(test.len(), want);
        let all = embed_split(&m, &params, None).unwrap();
        assert_eq!(all.len(), m.samples.len());
    }

    #[test]
    fn validation_subset_keeps_genuine_pairs() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = SynthConfig {
            n_subjects: 3,
            n_sensors: 2,
            images_per_class: 10,
            ..SynthConfig::default()
        };
        let mut m = generate_synthetic(&cfg, dir.path()).unwrap();
        split_70_30(&mut m, 2).unwrap();
        let val = validation_subset(&m, 12, 9).unwrap();
        assert!(val.samples.len() >= 12);
        // at least one class contributes 2+ samples
        let labels = build_joint_labels(&val).unwrap();
        let assignment = labels.assign(&val).unwrap();
        let mut counts = vec![0usize; labels.n_classes()];
        for c in assignment {
            counts[c] += 1;
        }
        assert!(counts.iter().any(|&c| c >= 2));
    }
}
