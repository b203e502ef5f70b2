//! Joint identification and joint verification protocols.
//!
//! A probe matches only when both subject and sensor agree with the gallery
//! entry; an embedding pair is genuine only when both agree. Everything else
//! is one of three impostor categories.

pub mod store;
pub mod sweep;

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// One embedded sample with its identities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingRecord {
    pub sample_id: String,
    pub subject_id: String,
    pub sensor_id: String,
    pub k: usize,
    pub values: Vec<f64>,
}

/// Hashes of the artifacts an embedding set was computed from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub model_sha256: String,
    pub manifest_sha256: String,
}

/// A set of embeddings sharing one dimensionality.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    pub records: Vec<EmbeddingRecord>,
    pub k: usize,
    pub provenance: Option<Provenance>,
}

impl EmbeddingSet {
    pub fn new(records: Vec<EmbeddingRecord>) -> Result<Self> {
        let k = records
            .first()
            .map(|r| r.k)
            .ok_or_else(|| Error::Data("empty embedding set".into()))?;
        for r in &records {
            if r.k != k || r.values.len() != k {
                return Err(Error::Data(format!(
                    "embedding {} has dimension {} (values {}), set uses {k}",
                    r.sample_id,
                    r.k,
                    r.values.len()
                )));
            }
            if r.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("embedding set"));
            }
        }
        Ok(EmbeddingSet {
            records,
            k,
            provenance: None,
        })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    fn joint_key(r: &EmbeddingRecord) -> (String, String) {
        (r.subject_id.clone(), r.sensor_id.clone())
    }

    /// Dense class index per record, by sorted (subject, sensor).
    pub fn class_indices(&self) -> (Vec<usize>, Vec<(String, String)>) {
        let mut map = BTreeMap::new();
        for r in &self.records {
            map.entry(Self::joint_key(r)).or_insert(0usize);
        }
        let classes: Vec<(String, String)> = map.keys().cloned().collect();
        for (i, c) in classes.iter().enumerate() {
            *map.get_mut(c).unwrap() = i;
        }
        let idx = self
            .records
            .iter()
            .map(|r| map[&Self::joint_key(r)])
            .collect();
        (idx, classes)
    }
}

/// Distance or similarity used for ranking and verification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    /// Euclidean distance with each dimension scaled by its standard
    /// deviation (population, floored at 1e-12) over probe and gallery.
    Seuclidean,
    /// Cosine similarity.
    Cosine,
}

impl Metric {
    /// Distances sort ascending; similarities descending.
    pub fn higher_is_better(self) -> bool {
        matches!(self, Metric::Cosine)
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "seuclidean" => Ok(Metric::Seuclidean),
            "cosine" => Ok(Metric::Cosine),
            other => Err(Error::Config(format!(
                "unknown metric '{other}' (expected seuclidean or cosine)"
            ))),
        }
    }
}

/// Per-dimension standard deviation over the union of two embedding lists,
/// floored at 1e-12.
fn pooled_std(a: &[&[f64]], b: &[&[f64]], k: usize) -> Vec<f64> {
    let n = (a.len() + b.len()) as f64;
    let mut mean = vec![0.0; k];
    for v in a.iter().chain(b.iter()) {
        for j in 0..k {
            mean[j] += v[j];
        }
    }
    for m in mean.iter_mut() {
        *m /= n;
    }
    let mut var = vec![0.0; k];
    for v in a.iter().chain(b.iter()) {
        for j in 0..k {
            let d = v[j] - mean[j];
            var[j] += d * d;
        }
    }
    var.into_iter().map(|v| (v / n).sqrt().max(1e-12)).collect()
}

/// Standardized Euclidean distances, probes x gallery.
pub fn standardized_euclidean(probes: &[&[f64]], gallery: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
    if probes.is_empty() || gallery.is_empty() {
        return Err(Error::Data("standardized_euclidean: empty set".into()));
    }
    let k = probes[0].len();
    let std = pooled_std(probes, gallery, k);
    Ok(probes
        .iter()
        .map(|p| {
            gallery
                .iter()
                .map(|g| {
                    let mut acc = 0.0;
                    for j in 0..k {
                        let d = (p[j] - g[j]) / std[j];
                        acc += d * d;
                    }
                    acc.sqrt()
                })
                .collect()
        })
        .collect())
}

/// Cosine similarities, probes x gallery. A zero vector on either side is an
/// error naming its index.
pub fn cosine_matrix(probes: &[&[f64]], gallery: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
    if probes.is_empty() || gallery.is_empty() {
        return Err(Error::Data("cosine_matrix: empty set".into()));
    }
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let check = |v: &[f64], side: &str, i: usize| -> Result<f64> {
        let n = norm(v);
        if n == 0.0 {
            Err(Error::Data(format!(
                "cosine_matrix: zero-vector embedding at {side} index {i}"
            )))
        } else {
            Ok(n)
        }
    };
    let pn: Vec<f64> = probes
        .iter()
        .enumerate()
        .map(|(i, p)| check(p, "probe", i))
        .collect::<Result<_>>()?;
    let gn: Vec<f64> = gallery
        .iter()
        .enumerate()
        .map(|(i, g)| check(g, "gallery", i))
        .collect::<Result<_>>()?;
    Ok(probes
        .iter()
        .enumerate()
        .map(|(i, p)| {
            gallery
                .iter()
                .enumerate()
                .map(|(j, g)| {
                    let dot: f64 = p.iter().zip(g.iter()).map(|(a, b)| a * b).sum();
                    dot / (pn[i] * gn[j])
                })
                .collect()
        })
        .collect())
}

/// How the one-per-class gallery entry is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GallerySelection {
    /// The member with the lexicographically smallest sample_id (default,
    /// deterministic).
    SmallestSampleId,
    /// A seeded uniform draw per class, for sensitivity checks.
    Seeded(u64),
}

/// CMC hit rates at ranks 1..=R.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CmcReport {
    pub metric: Metric,
    pub gallery_rule: String,
    /// `rates[r-1]` = fraction of probes whose true class ranks <= r.
    pub rates: Vec<f64>,
    pub n_classes: usize,
    pub n_gallery: usize,
    pub n_probes: usize,
    /// Classes excluded for having a single embedding (no probe left).
    pub excluded_classes: Vec<String>,
}

impl CmcReport {
    pub fn rank1(&self) -> f64 {
        self.rates.first().copied().unwrap_or(0.0)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("rank,rate\n");
        for (i, r) in self.rates.iter().enumerate() {
            out.push_str(&format!("{},{}\n", i + 1, r));
        }
        out
    }
}

/// Shared ranking core: given scores of one probe against the gallery and
/// the gallery entries' class indices, returns the 1-based rank of
/// `true_class`. Ties break by ascending class index.
fn rank_of_true_class(
    scores: &[f64],
    gallery_classes: &[usize],
    true_class: usize,
    higher_is_better: bool,
) -> usize {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        let primary = if higher_is_better {
            scores[b].partial_cmp(&scores[a]).unwrap()
        } else {
            scores[a].partial_cmp(&scores[b]).unwrap()
        };
        primary.then(gallery_classes[a].cmp(&gallery_classes[b]))
    });
    order
        .iter()
        .position(|&i| gallery_classes[i] == true_class)
        .expect("true class present in gallery")
        + 1
}

/// Joint identification: one-per-class gallery, remaining embeddings probe.
///
/// `CMC(r)` counts a probe correct only when the top-ranked classes within
/// rank r include its exact (subject, sensor) class.
pub fn joint_identification(
    set: &EmbeddingSet,
    metric: Metric,
    max_rank: usize,
    selection: GallerySelection,
) -> Result<CmcReport> {
    let (classes, class_names) = set.class_indices();
    let n_classes = class_names.len();
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &c) in classes.iter().enumerate() {
        members[c].push(i);
    }

    let mut excluded_classes = Vec::new();
    let mut gallery_idx = Vec::new();
    let mut probe_idx = Vec::new();
    for (c, m) in members.iter().enumerate() {
        if m.len() < 2 {
            let (sub, sen) = &class_names[c];
            excluded_classes.push(format!("({sub}, {sen})"));
            continue;
        }
        let chosen = match selection {
            GallerySelection::SmallestSampleId => *m
                .iter()
                .min_by_key(|&&i| &set.records[i].sample_id)
                .unwrap(),
            GallerySelection::Seeded(seed) => {
                let mut r = crate::rng::stream(crate::rng::derive_seed(seed, "gallery", c as u64));
                use rand::Rng;
                m[r.gen_range(0..m.len())]
            }
        };
        gallery_idx.push(chosen);
        for &i in m {
            if i != chosen {
                probe_idx.push(i);
            }
        }
    }
    if gallery_idx.is_empty() {
        return Err(Error::Data(
            "joint_identification: no class has at least 2 embeddings".into(),
        ));
    }

    let probes: Vec<&[f64]> = probe_idx.iter().map(|&i| set.records[i].values.as_slice()).collect();
    let gallery: Vec<&[f64]> = gallery_idx
        .iter()
        .map(|&i| set.records[i].values.as_slice())
        .collect();
    let scores = match metric {
        Metric::Seuclidean => standardized_euclidean(&probes, &gallery)?,
        Metric::Cosine => cosine_matrix(&probes, &gallery)?,
    };
    let gallery_classes: Vec<usize> = gallery_idx.iter().map(|&i| classes[i]).collect();

    let max_rank = max_rank.min(gallery_idx.len()).max(1);
    let mut hits = vec![0usize; max_rank];
    for (row, &p) in probe_idx.iter().enumerate() {
        let rank = rank_of_true_class(
            &scores[row],
            &gallery_classes,
            classes[p],
            metric.higher_is_better(),
        );
        if rank <= max_rank {
            hits[rank - 1] += 1;
        }
    }
    let n_probes = probe_idx.len();
    let mut cumulative = 0usize;
    let rates: Vec<f64> = hits
        .iter()
        .map(|h| {
            cumulative += h;
            cumulative as f64 / n_probes as f64
        })
        .collect();

    Ok(CmcReport {
        metric,
        gallery_rule: match selection {
            GallerySelection::SmallestSampleId => "smallest_sample_id".into(),
            GallerySelection::Seeded(s) => format!("seeded:{s}"),
        },
        rates,
        n_classes,
        n_gallery: gallery_idx.len(),
        n_probes,
        excluded_classes,
    })
}

/// One (FMR, TMR) operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub fmr: f64,
    pub tmr: f64,
}

/// ROC over all unordered embedding pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocReport {
    pub metric: Metric,
    pub n_genuine: usize,
    pub n_impostor: usize,
    pub points: Vec<RocPoint>,
    pub tmr_at_1pct_fmr: f64,
    pub tmr_at_5pct_fmr: f64,
}

impl RocReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("fmr,tmr\n");
        for p in &self.points {
            out.push_str(&format!("{},{}\n", p.fmr, p.tmr));
        }
        out
    }
}

/// Pair category under the joint-label rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PairKind {
    Genuine,
    SameSubjectOtherSensor,
    SameSensorOtherSubject,
    BothDifferent,
}

fn pair_kind(a: &EmbeddingRecord, b: &EmbeddingRecord) -> PairKind {
    match (a.subject_id == b.subject_id, a.sensor_id == b.sensor_id) {
        (true, true) => PairKind::Genuine,
        (true, false) => PairKind::SameSubjectOtherSensor,
        (false, true) => PairKind::SameSensorOtherSubject,
        (false, false) => PairKind::BothDifferent,
    }
}

/// Score of one pair under the metric; for verification the standardization
/// population is the whole test set.
fn pair_scores(set: &EmbeddingSet, metric: Metric) -> Result<Vec<(PairKind, f64)>> {
    let all: Vec<&[f64]> = set.records.iter().map(|r| r.values.as_slice()).collect();
    let matrix = match metric {
        Metric::Seuclidean => standardized_euclidean(&all, &all)?,
        Metric::Cosine => cosine_matrix(&all, &all)?,
    };
    let n = set.len();
    let mut out = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            out.push((pair_kind(&set.records[i], &set.records[j]), matrix[i][j]));
        }
    }
    Ok(out)
}

/// Sweeps every observed score as a threshold and returns nondecreasing
/// (FMR, TMR) operating points from (0,0) to (1,1).
fn roc_points(genuine: &[f64], impostor: &[f64], higher_is_better: bool) -> Vec<RocPoint> {
    let mut thresholds: Vec<f64> = genuine.iter().chain(impostor).copied().collect();
    thresholds.sort_by(|a, b| a.partial_cmp(b).unwrap());
    thresholds.dedup();
    if higher_is_better {
        thresholds.reverse();
    }
    let mut points = vec![RocPoint { fmr: 0.0, tmr: 0.0 }];
    let accept = |score: f64, t: f64| {
        if higher_is_better {
            score >= t
        } else {
            score <= t
        }
    };
    for &t in &thresholds {
        let tm = genuine.iter().filter(|&&s| accept(s, t)).count();
        let fm = impostor.iter().filter(|&&s| accept(s, t)).count();
        points.push(RocPoint {
            fmr: fm as f64 / impostor.len() as f64,
            tmr: tm as f64 / genuine.len() as f64,
        });
    }
    points
}

/// TMR at a target FMR by linear interpolation between adjacent operating
/// points, after collapsing each FMR to its best TMR.
pub fn tmr_at_fmr(points: &[RocPoint], target: f64) -> f64 {
    let mut best: BTreeMap<u64, (f64, f64)> = BTreeMap::new();
    for p in points {
        let key = p.fmr.to_bits();
        let e = best.entry(key).or_insert((p.fmr, p.tmr));
        if p.tmr > e.1 {
            e.1 = p.tmr;
        }
    }
    let staircase: Vec<(f64, f64)> = best.values().copied().collect();
    if staircase.is_empty() {
        return 0.0;
    }
    if target <= staircase[0].0 {
        return staircase[0].1;
    }
    for w in staircase.windows(2) {
        let (f1, t1) = w[0];
        let (f2, t2) = w[1];
        if target <= f2 {
            if f2 == f1 {
                return t2;
            }
            return t1 + (t2 - t1) * (target - f1) / (f2 - f1);
        }
    }
    staircase.last().unwrap().1
}

/// Joint verification over all unordered test pairs: genuine only when both
/// subject and sensor agree; the three mismatch categories pool as impostors.
pub fn joint_verification(set: &EmbeddingSet, metric: Metric) -> Result<RocReport> {
    if set.len() < 2 {
        return Err(Error::Data("joint_verification: need at least 2 embeddings".into()));
    }
    let scored = pair_scores(set, metric)?;
    let genuine: Vec<f64> = scored
        .iter()
        .filter(|(k, _)| *k == PairKind::Genuine)
        .map(|&(_, s)| s)
        .collect();
    let impostor: Vec<f64> = scored
        .iter()
        .filter(|(k, _)| *k != PairKind::Genuine)
        .map(|&(_, s)| s)
        .collect();
    if genuine.is_empty() {
        return Err(Error::Data("joint_verification: no genuine pairs".into()));
    }
    if impostor.is_empty() {
        return Err(Error::Data("joint_verification: no impostor pairs".into()));
    }
    let points = roc_points(&genuine, &impostor, metric.higher_is_better());
    let tmr_at_1pct_fmr = tmr_at_fmr(&points, 0.01);
    let tmr_at_5pct_fmr = tmr_at_fmr(&points, 0.05);
    Ok(RocReport {
        metric,
        n_genuine: genuine.len(),
        n_impostor: impostor.len(),
        points,
        tmr_at_1pct_fmr,
        tmr_at_5pct_fmr,
    })
}

/// False-match rate of one impostor category at a fixed threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CategoryRate {
    pub false_matches: usize,
    pub pairs: usize,
    pub fmr: f64,
}

/// Per-category false-match rates at one threshold. A category with no pairs
/// is reported absent, not zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpostorBreakdown {
    pub metric: Metric,
    pub threshold: f64,
    pub same_subject_other_sensor: Option<CategoryRate>,
    pub same_sensor_other_subject: Option<CategoryRate>,
    pub both_different: Option<CategoryRate>,
}

pub fn impostor_breakdown(
    set: &EmbeddingSet,
    metric: Metric,
    threshold: f64,
) -> Result<ImpostorBreakdown> {
    if set.len() < 2 {
        return Err(Error::Data("impostor_breakdown: need at least 2 embeddings".into()));
    }
    let scored = pair_scores(set, metric)?;
    let accept = |s: f64| {
        if metric.higher_is_better() {
            s >= threshold
        } else {
            s <= threshold
        }
    };
    let rate_for = |kind: PairKind| -> Option<CategoryRate> {
        let scores: Vec<f64> = scored
            .iter()
            .filter(|(k, _)| *k == kind)
            .map(|&(_, s)| s)
            .collect();
        if scores.is_empty() {
            return None;
        }
        let fm = scores.iter().filter(|&&s| accept(s)).count();
        Some(CategoryRate {
            false_matches: fm,
            pairs: scores.len(),
            fmr: fm as f64 / scores.len() as f64,
        })
    };
    Ok(ImpostorBreakdown {
        metric,
        threshold,
        same_subject_other_sensor: rate_for(PairKind::SameSubjectOtherSensor),
        same_sensor_other_subject: rate_for(PairKind::SameSensorOtherSubject),
        both_different: rate_for(PairKind::BothDifferent),
    })
}
