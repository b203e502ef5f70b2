//! Dataset manifests, joint (subject, sensor) labels, and seeded 70:30 splits.

pub mod image;
pub mod synth;

use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

/// Which partition a sample belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// One grayscale image with its subject and sensor identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageSample {
    pub path: String,
    pub subject_id: String,
    pub sensor_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
}

/// The dense class index of one (subject, sensor) pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JointLabel {
    pub subject_id: String,
    pub sensor_id: String,
    pub class_index: usize,
}

/// A manifest plus the directory its relative paths resolve against.
#[derive(Debug, Clone)]
pub struct Manifest {
    pub samples: Vec<ImageSample>,
    pub base_dir: PathBuf,
}

impl Manifest {
    pub fn new(samples: Vec<ImageSample>) -> Self {
        Manifest {
            samples,
            base_dir: PathBuf::new(),
        }
    }

    /// Reads a JSON array of samples; relative image paths resolve against
    /// the manifest file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let samples: Vec<ImageSample> = serde_json::from_str(&text)?;
        Ok(Manifest {
            samples,
            base_dir: path.parent().unwrap_or(Path::new("")).to_path_buf(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.samples)?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Absolute path of one sample's image file.
    pub fn resolve(&self, sample: &ImageSample) -> PathBuf {
        let p = Path::new(&sample.path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn of_split(&self, split: Split) -> impl Iterator<Item = (usize, &ImageSample)> {
        self.samples
            .iter()
            .enumerate()
            .filter(move |(_, s)| s.split == Some(split))
    }
}

/// Joint-label map: dense class indices over the (subject, sensor) pairs
/// that actually occur, ordered by sorted (subject_id, sensor_id).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    classes: Vec<(String, String)>,
    index: BTreeMap<(String, String), usize>,
}

impl LabelMap {
    /// Number of joint classes `|L|`.
    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn class_of(&self, subject_id: &str, sensor_id: &str) -> Option<usize> {
        self.index
            .get(&(subject_id.to_string(), sensor_id.to_string()))
            .copied()
    }

    pub fn label(&self, class_index: usize) -> Option<JointLabel> {
        self.classes.get(class_index).map(|(sub, sen)| JointLabel {
            subject_id: sub.clone(),
            sensor_id: sen.clone(),
            class_index,
        })
    }

    /// Class index per manifest sample, in manifest order.
    pub fn assign(&self, manifest: &Manifest) -> Result<Vec<usize>> {
        manifest
            .samples
            .iter()
            .map(|s| {
                self.class_of(&s.subject_id, &s.sensor_id).ok_or_else(|| {
                    Error::Data(format!(
                        "sample {} has unknown joint class ({}, {})",
                        s.path, s.subject_id, s.sensor_id
                    ))
                })
            })
            .collect()
    }
}

/// Builds the joint-label map from the (subject, sensor) pairs occurring in
/// the manifest. Only occurring pairs get a class, so partially crossed
/// datasets are representable; permuting the manifest does not change the map.
pub fn build_joint_labels(manifest: &Manifest) -> Result<LabelMap> {
    if manifest.samples.is_empty() {
        return Err(Error::Data("empty manifest".into()));
    }
    let mut index = BTreeMap::new();
    for s in &manifest.samples {
        index
            .entry((s.subject_id.clone(), s.sensor_id.clone()))
            .or_insert(0usize);
    }
    let classes: Vec<(String, String)> = index.keys().cloned().collect();
    for (i, key) in classes.iter().enumerate() {
        *index.get_mut(key).unwrap() = i;
    }
    Ok(LabelMap { classes, index })
}

/// Tags every sample with a per-class 70:30 split.
///
/// Per class of size n, `round(0.7 * n)` samples train (capped so at least
/// one sample tests), the rest test; membership is a uniform seeded draw.
/// A class with a single sample is rejected.
pub fn split_70_30(manifest: &mut Manifest, seed: u64) -> Result<()> {
    let labels = build_joint_labels(manifest)?;
    let assignment = labels.assign(manifest)?;
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); labels.n_classes()];
    for (i, &c) in assignment.iter().enumerate() {
        members[c].push(i);
    }
    for (c, m) in members.iter().enumerate() {
        if m.len() < 2 {
            let label = labels.label(c).unwrap();
            return Err(Error::Data(format!(
                "class ({}, {}) has {} sample(s); need at least 2 to split",
                label.subject_id,
                label.sensor_id,
                m.len()
            )));
        }
    }
    for (c, m) in members.iter().enumerate() {
        let mut order = m.clone();
        let mut rng = crate::rng::stream(crate::rng::derive_seed(seed, "split", c as u64));
        order.shuffle(&mut rng);
        let n = order.len();
        let n_train = (((0.7 * n as f64).round() as usize).max(1)).min(n - 1);
        for (pos, &idx) in order.iter().enumerate() {
            manifest.samples[idx].split = Some(if pos < n_train {
                Split::Train
            } else {
                Split::Test
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(path: &str, sub: &str, sen: &str) -> ImageSample {
        ImageSample {
            path: path.into(),
            subject_id: sub.into(),
            sensor_id: sen.into(),
            split: None,
        }
    }

    /// Fully crossed manifest: every subject appears under every sensor.
    fn crossed(subjects: usize, sensors: usize, per_class: usize) -> Manifest {
        let mut samples = Vec::new();
        for s in 0..subjects {
            for c in 0..sensors {
                for i in 0..per_class {
                    samples.push(sample(
                        &format!("s{s:03}_c{c:02}_{i:03}.pgm"),
                        &format!("s{s:03}"),
                        &format!("c{c:02}"),
                    ));
                }
            }
        }
        Manifest::new(samples)
    }

    #[test]
    fn fully_crossed_sixty_by_two_gives_120_classes() {
        let m = crossed(60, 2, 1);
        assert_eq!(build_joint_labels(&m).unwrap().n_classes(), 120);
    }

    #[test]
    fn partially_crossed_structure_gives_375_classes() {
        // 75 subjects x 3 shared sensors, subjects 0..48 x 2 more sensors,
        // subjects 48..75 x 2 other sensors
        let mut samples = Vec::new();
        for s in 0..75 {
            for c in ["sam_a", "sam_b", "sam_c"] {
                samples.push(sample(&format!("{s}_{c}.pgm"), &format!("sub{s:02}"), c));
            }
        }
        for s in 0..48 {
            for c in ["u1_front", "u1_rear"] {
                samples.push(sample(&format!("{s}_{c}.pgm"), &format!("sub{s:02}"), c));
            }
        }
        for s in 48..75 {
            for c in ["u2_front", "u2_rear"] {
                samples.push(sample(&format!("{s}_{c}.pgm"), &format!("sub{s:02}"), c));
            }
        }
        let m = Manifest::new(samples);
        assert_eq!(build_joint_labels(&m).unwrap().n_classes(), 375);
    }

    #[test]
    fn single_pair_gives_one_class() {
        let m = Manifest::new(vec![sample("a.pgm", "s", "c"), sample("b.pgm", "s", "c")]);
        assert_eq!(build_joint_labels(&m).unwrap().n_classes(), 1);
    }

    #[test]
    fn empty_manifest_rejected() {
        assert!(build_joint_labels(&Manifest::new(vec![])).is_err());
    }

    #[test]
    fn label_map_is_order_stable() {
        let mut m = crossed(3, 2, 2);
        let a = build_joint_labels(&m).unwrap();
        m.samples.reverse();
        let b = build_joint_labels(&m).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn split_counts_follow_the_rounded_rule() {
        for (per_class, want_train) in [(20, 14), (10, 7), (2, 1), (3, 2)] {
            let mut m = crossed(2, 2, per_class);
            split_70_30(&mut m, 9).unwrap();
            let labels = build_joint_labels(&m).unwrap();
            let classes = labels.assign(&m).unwrap();
            for c in 0..labels.n_classes() {
                let train = m
                    .samples
                    .iter()
                    .zip(&classes)
                    .filter(|(s, &cl)| cl == c && s.split == Some(Split::Train))
                    .count();
                assert_eq!(train, want_train, "per_class {per_class}");
            }
        }
    }

    #[test]
    fn split_is_seeded_and_class_covering() {
        let mut a = crossed(3, 2, 10);
        let mut b = crossed(3, 2, 10);
        split_70_30(&mut a, 42).unwrap();
        split_70_30(&mut b, 42).unwrap();
        assert_eq!(a.samples, b.samples);

        let mut c = crossed(3, 2, 10);
        split_70_30(&mut c, 43).unwrap();
        assert_ne!(a.samples, c.samples, "different seed should move membership");
        // same per-class counts regardless of seed
        for cls in 0..6 {
            let count = |m: &Manifest| {
                m.samples
                    .iter()
                    .filter(|s| s.split == Some(Split::Train))
                    .count()
            };
            assert_eq!(count(&a), count(&c));
            let _ = cls;
        }
        // every class appears in both partitions
        let labels = build_joint_labels(&a).unwrap();
        let classes = labels.assign(&a).unwrap();
        for cl in 0..labels.n_classes() {
            let has = |sp: Split| {
                a.samples
                    .iter()
                    .zip(&classes)
                    .any(|(s, &x)| x == cl && s.split == Some(sp))
            };
            assert!(has(Split::Train) && has(Split::Test));
        }
    }

    #[test]
    fn singleton_class_rejected_with_its_identity() {
        let mut m = Manifest::new(vec![
            sample("a.pgm", "s0", "c0"),
            sample("b.pgm", "s0", "c0"),
            sample("c.pgm", "s1", "c0"),
        ]);
        let err = split_70_30(&mut m, 1).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("s1"), "{msg}");
    }

    #[test]
    fn manifest_round_trips_through_json() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.json");
        let mut m = crossed(2, 2, 3);
        split_70_30(&mut m, 5).unwrap();
        m.save(&path).unwrap();
        let loaded = Manifest::load(&path).unwrap();
        assert_eq!(m.samples, loaded.samples);
        assert_eq!(loaded.base_dir, dir.path());
    }
}
