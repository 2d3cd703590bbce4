//! Labelled sequence collections, their on-disk layout and train/test splits.
//!
//! A dataset directory holds one sequence file per recording plus a
//! tab-separated `manifest.tsv`:
//!
//! ```text
//! #classes<TAB>still,wave,...
//! <file><TAB><train|test><TAB><label>
//! ```

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::model::{ModelSpec, Sample};
use crate::skeleton::{parse_sequence, serialize_sequence, SkeletonSequence};

use super::{with_threads, HarnessError};

pub const MANIFEST_NAME: &str = "manifest.tsv";

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub classes: Vec<String>,
    pub sequences: Vec<SkeletonSequence>,
}

impl Dataset {
    pub fn new(classes: Vec<String>, sequences: Vec<SkeletonSequence>) -> Result<Self, HarnessError> {
        let d = Dataset { classes, sequences };
        d.labels()?;
        Ok(d)
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    /// Class index of every sequence.
    pub fn labels(&self) -> Result<Vec<usize>, HarnessError> {
        self.sequences
            .iter()
            .map(|s| {
                self.classes
                    .iter()
                    .position(|c| *c == s.label)
                    .ok_or_else(|| HarnessError::Dataset(format!("label `{}` is not a declared class", s.label)))
            })
            .collect()
    }

    fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            classes: self.classes.clone(),
            sequences: idx.iter().map(|&i| self.sequences[i].clone()).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitMode {
    CrossSubject,
    SameSubject,
}

impl fmt::Display for SplitMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitMode::CrossSubject => "cross_subject",
            SplitMode::SameSubject => "same_subject",
        })
    }
}

impl FromStr for SplitMode {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cross_subject" => Ok(SplitMode::CrossSubject),
            "same_subject" => Ok(SplitMode::SameSubject),
            other => Err(HarnessError::Argument(format!("unknown split mode `{other}`"))),
        }
    }
}

/// Train/test partition; both halves keep the dataset's order.
///
/// `ratio` is the training fraction. Cross-subject assigns whole subjects,
/// same-subject takes `round(ratio · n_c)` sequences of each class `c`.
pub fn split_dataset(ds: &Dataset, mode: SplitMode, ratio: f64, seed: u64) -> Result<(Dataset, Dataset), HarnessError> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(HarnessError::Argument(format!("split ratio must be in (0, 1), got {ratio}")));
    }
    let labels = ds.labels()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut is_train = vec![false; ds.len()];
    match mode {
        SplitMode::CrossSubject => {
            let mut subjects: Vec<u32> = ds.sequences.iter().map(|s| s.subject_id).collect();
            subjects.sort_unstable();
            subjects.dedup();
            if subjects.len() < 2 {
                return Err(HarnessError::Argument(format!(
                    "cross_subject split needs at least 2 subjects, got {}",
                    subjects.len()
                )));
            }
            subjects.shuffle(&mut rng);
            let n_train = ((ratio * subjects.len() as f64).round() as usize).clamp(1, subjects.len() - 1);
            let train: Vec<u32> = subjects[..n_train].to_vec();
            for (flag, s) in is_train.iter_mut().zip(&ds.sequences) {
                *flag = train.contains(&s.subject_id);
            }
        }
        SplitMode::SameSubject => {
            for c in 0..ds.classes.len() {
                let mut idx: Vec<usize> = (0..ds.len()).filter(|&i| labels[i] == c).collect();
                idx.shuffle(&mut rng);
                let n_train = (ratio * idx.len() as f64).round() as usize;
                for &i in &idx[..n_train] {
                    is_train[i] = true;
                }
            }
        }
    }
    let train: Vec<usize> = (0..ds.len()).filter(|&i| is_train[i]).collect();
    let test: Vec<usize> = (0..ds.len()).filter(|&i| !is_train[i]).collect();
    Ok((ds.subset(&train), ds.subset(&test)))
}

fn file_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::File {
        path: path.display().to_string(),
        source,
    }
}

/// Writes `train` and `test` sequences plus the manifest into `dir`.
pub fn write_dataset(dir: &Path, train: &Dataset, test: &Dataset) -> Result<(), HarnessError> {
    if train.classes != test.classes {
        return Err(HarnessError::Argument("train and test declare different classes".into()));
    }
    fs::create_dir_all(dir).map_err(file_err(dir))?;
    let mut manifest = format!("#classes\t{}\n", train.classes.join(","));
    let mut n = 0;
    for (split, ds) in [("train", train), ("test", test)] {
        for s in &ds.sequences {
            let name = format!("seq{n:05}.txt");
            let p = dir.join(&name);
            fs::write(&p, serialize_sequence(s)).map_err(file_err(&p))?;
            manifest.push_str(&format!("{name}\t{split}\t{}\n", s.label));
            n += 1;
        }
    }
    let p = dir.join(MANIFEST_NAME);
    fs::write(&p, manifest).map_err(file_err(&p))?;
    Ok(())
}

/// Reads a directory written by [`write_dataset`] as (train, test).
pub fn read_dataset(dir: &Path) -> Result<(Dataset, Dataset), HarnessError> {
    let mp = dir.join(MANIFEST_NAME);
    let text = fs::read_to_string(&mp).map_err(file_err(&mp))?;
    let bad = |line: usize, m: String| HarnessError::Dataset(format!("{}:{line}: {m}", mp.display()));
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| bad(1, "empty manifest".into()))?;
    let classes: Vec<String> = header
        .strip_prefix("#classes\t")
        .ok_or_else(|| bad(1, "expected `#classes<TAB>...` header".into()))?
        .split(',')
        .map(|c| c.trim().to_string())
        .filter(|c| !c.is_empty())
        .collect();
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (i, line) in lines {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(bad(i + 1, format!("expected 3 tab-separated fields, got {}", fields.len())));
        }
        let p = dir.join(fields[0]);
        let seq = parse_sequence(&fs::read_to_string(&p).map_err(file_err(&p))?)
            .map_err(|e| HarnessError::Dataset(format!("{}: {e}", p.display())))?;
        if seq.label != fields[2] {
            return Err(bad(i + 1, format!("manifest label `{}` but file says `{}`", fields[2], seq.label)));
        }
        match fields[1] {
            "train" => train.push(seq),
            "test" => test.push(seq),
            other => return Err(bad(i + 1, format!("unknown split `{other}`"))),
        }
    }
    Ok((Dataset::new(classes.clone(), train)?, Dataset::new(classes, test)?))
}

/// Network inputs of every sequence, in dataset order.
pub fn encode_samples(ds: &Dataset, spec: &ModelSpec, threads: usize) -> Result<Vec<Sample>, HarnessError> {
    let labels = ds.labels()?;
    let out: Vec<Result<Sample, HarnessError>> = with_threads(threads, || {
        ds.sequences
            .par_iter()
            .zip(labels.par_iter())
            .map(|(s, &l)| Ok(Sample::from_sequence(s, l, spec)?))
            .collect()
    })?;
    out.into_iter().collect()
}
