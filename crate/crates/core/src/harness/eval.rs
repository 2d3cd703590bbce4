use std::fmt::Write as _;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use crate::engine::argmax;
use crate::model::{Model, Sample};

use super::{with_threads, HarnessError};

/// Side in pixels of one confusion cell in the heatmap.
const CELL_PX: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub classes: Vec<String>,
    /// `confusion[true][predicted]` counts.
    pub confusion: Vec<Vec<usize>>,
    pub accuracy: f64,
    pub per_class: Vec<f64>,
    /// Standalone accuracy of each branch's own logits.
    pub per_branch: Vec<(String, f64)>,
    pub runtime_secs: f64,
}

impl EvalReport {
    /// Report of `predicted` against `labels`; `branch_predictions` pairs a branch name with its per-sample classes.
    pub fn from_predictions(
        classes: Vec<String>,
        labels: &[usize],
        predicted: &[usize],
        branch_predictions: &[(String, Vec<usize>)],
        runtime_secs: f64,
    ) -> Result<Self, HarnessError> {
        if labels.is_empty() {
            return Err(HarnessError::Argument("empty test set".into()));
        }
        if labels.len() != predicted.len() {
            return Err(HarnessError::Argument(format!(
                "{} labels but {} predictions",
                labels.len(),
                predicted.len()
            )));
        }
        let k = classes.len();
        if let Some(&bad) = labels.iter().chain(predicted).find(|&&c| c >= k) {
            return Err(HarnessError::Argument(format!("class index {bad} out of range for {k} classes")));
        }
        let mut confusion = vec![vec![0usize; k]; k];
        for (&t, &p) in labels.iter().zip(predicted) {
            confusion[t][p] += 1;
        }
        let trace: usize = (0..k).map(|c| confusion[c][c]).sum();
        let per_class = (0..k)
            .map(|c| {
                let n: usize = confusion[c].iter().sum();
                if n == 0 {
                    0.0
                } else {
                    confusion[c][c] as f64 / n as f64
                }
            })
            .collect();
        let per_branch = branch_predictions
            .iter()
            .map(|(name, preds)| {
                let hit = preds.iter().zip(labels).filter(|(p, t)| p == t).count();
                (name.clone(), hit as f64 / labels.len() as f64)
            })
            .collect();
        Ok(EvalReport {
            classes,
            confusion,
            accuracy: trace as f64 / labels.len() as f64,
            per_class,
            per_branch,
            runtime_secs,
        })
    }

    pub fn total(&self) -> usize {
        self.confusion.iter().flatten().sum()
    }

    pub fn trace(&self) -> usize {
        (0..self.classes.len()).map(|c| self.confusion[c][c]).sum()
    }

    /// Fraction of samples of classes `a` and `b` predicted as the other one.
    pub fn pair_confusion(&self, a: usize, b: usize) -> f64 {
        let n = self.confusion[a].iter().sum::<usize>() + self.confusion[b].iter().sum::<usize>();
        if n == 0 {
            return 0.0;
        }
        (self.confusion[a][b] + self.confusion[b][a]) as f64 / n as f64
    }

    /// Header row of class names, then one row per true class.
    pub fn confusion_csv(&self) -> String {
        let mut s = format!("true\\predicted,{}\n", self.classes.join(","));
        for (name, row) in self.classes.iter().zip(&self.confusion) {
            let cells: Vec<String> = row.iter().map(|c| c.to_string()).collect();
            let _ = writeln!(s, "{name},{}", cells.join(","));
        }
        s
    }

    pub fn summary_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "accuracy {:.4} ({}/{})", self.accuracy, self.trace(), self.total());
        for (name, acc) in self.classes.iter().zip(&self.per_class) {
            let _ = writeln!(s, "class {name} {acc:.4}");
        }
        for (name, acc) in &self.per_branch {
            let _ = writeln!(s, "branch {name} {acc:.4}");
        }
        let _ = writeln!(s, "runtime_secs {:.3}", self.runtime_secs);
        s
    }

    /// Grayscale heatmap: cell intensity is the row-normalized count.
    pub fn write_heatmap_png(&self, path: &Path) -> Result<(), HarnessError> {
        let k = self.classes.len();
        let side = k * CELL_PX;
        let mut pixels = vec![0u8; side * side];
        for (t, row) in self.confusion.iter().enumerate() {
            let n: usize = row.iter().sum();
            for (p, &c) in row.iter().enumerate() {
                let v = if n == 0 { 0 } else { (255.0 * c as f64 / n as f64).round() as u8 };
                for y in t * CELL_PX..(t + 1) * CELL_PX {
                    pixels[y * side + p * CELL_PX..y * side + (p + 1) * CELL_PX].fill(v);
                }
            }
        }
        let file = File::create(path).map_err(|source| HarnessError::File {
            path: path.display().to_string(),
            source,
        })?;
        let mut enc = png::Encoder::new(BufWriter::new(file), side as u32, side as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        let png_err = |e: png::EncodingError| HarnessError::Argument(format!("png: {e}"));
        let mut w = enc.write_header().map_err(png_err)?;
        w.write_image_data(&pixels).map_err(png_err)?;
        w.finish().map_err(png_err)?;
        Ok(())
    }
}

/// Predicts every sample and tallies fused and per-branch accuracies.
pub fn evaluate(model: &Model, classes: &[String], test: &[Sample], threads: usize) -> Result<EvalReport, HarnessError> {
    if test.is_empty() {
        return Err(HarnessError::Argument("empty test set".into()));
    }
    if classes.len() != model.spec.num_classes {
        return Err(HarnessError::Argument(format!(
            "{} class names for a {}-class model",
            classes.len(),
            model.spec.num_classes
        )));
    }
    let start = Instant::now();
    let shared = model.snapshot();
    let preds: Vec<_> = with_threads(threads, || {
        test.par_iter()
            .map(|s| model.predict_with(&shared, s))
            .collect::<Result<Vec<_>, _>>()
    })??;
    let labels: Vec<usize> = test.iter().map(|s| s.label).collect();
    let fused: Vec<usize> = preds.iter().map(|p| p.class).collect();
    let mut branches: Vec<(String, Vec<usize>)> = preds[0]
        .logits
        .branches
        .iter()
        .map(|(id, _)| (id.to_string(), Vec::with_capacity(test.len())))
        .collect();
    for p in &preds {
        for ((_, out), (_, logits)) in branches.iter_mut().zip(&p.logits.branches) {
            out.push(argmax(logits));
        }
    }
    EvalReport::from_predictions(
        classes.to_vec(),
        &labels,
        &fused,
        &branches,
        start.elapsed().as_secs_f64(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(k: usize) -> Vec<String> {
        (0..k).map(|i| format!("c{i}")).collect()
    }

    #[test]
    fn perfect_classifier_gives_identity_pattern() {
        let labels = vec![0, 1, 2, 2, 1, 0, 0];
        let r = EvalReport::from_predictions(names(3), &labels, &labels, &[], 0.0).unwrap();
        assert_eq!(r.confusion, vec![vec![3, 0, 0], vec![0, 2, 0], vec![0, 0, 2]]);
        assert_eq!(r.accuracy, 1.0);
    }

    #[test]
    fn constant_predictor_on_balanced_classes() {
        let labels: Vec<usize> = (0..24).map(|i| i % 4).collect();
        let preds = vec![2; 24];
        let r = EvalReport::from_predictions(names(4), &labels, &preds, &[("b".into(), preds.clone())], 0.0).unwrap();
        assert_eq!(r.accuracy, 0.25);
        assert_eq!(r.per_branch[0].1, 0.25);
        assert_eq!(r.per_class, vec![0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn accounting_is_consistent() {
        let labels: Vec<usize> = (0..50).map(|i| (i * 7) % 5).collect();
        let preds: Vec<usize> = (0..50).map(|i| (i * 3) % 5).collect();
        let r = EvalReport::from_predictions(names(5), &labels, &preds, &[], 0.0).unwrap();
        for c in 0..5 {
            assert_eq!(r.confusion[c].iter().sum::<usize>(), labels.iter().filter(|&&l| l == c).count());
            assert_eq!(r.confusion.iter().map(|row| row[c]).sum::<usize>(), preds.iter().filter(|&&p| p == c).count());
        }
        let hits = labels.iter().zip(&preds).filter(|(a, b)| a == b).count();
        assert_eq!(r.trace(), hits);
        assert_eq!(r.accuracy, r.trace() as f64 / r.total() as f64);
    }

    #[test]
    fn pair_confusion_counts_both_directions() {
        let labels = vec![0, 0, 1, 1, 2];
        let preds = vec![1, 0, 0, 1, 2];
        let r = EvalReport::from_predictions(names(3), &labels, &preds, &[], 0.0).unwrap();
        assert_eq!(r.pair_confusion(0, 1), 0.5);
        assert_eq!(r.pair_confusion(0, 2), 0.0);
    }

    #[test]
    fn empty_and_mismatched_inputs_are_rejected() {
        assert!(EvalReport::from_predictions(names(2), &[], &[], &[], 0.0).is_err());
        assert!(EvalReport::from_predictions(names(2), &[0], &[0, 1], &[], 0.0).is_err());
        assert!(EvalReport::from_predictions(names(2), &[0], &[5], &[], 0.0).is_err());
    }

    #[test]
    fn csv_and_heatmap() {
        let r = EvalReport::from_predictions(names(2), &[0, 1, 1], &[0, 0, 1], &[], 0.0).unwrap();
        assert_eq!(r.confusion_csv(), "true\\predicted,c0,c1\nc0,1,0\nc1,1,1\n");
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.png");
        r.write_heatmap_png(&p).unwrap();
        let dec = png::Decoder::new(std::io::BufReader::new(File::open(&p).unwrap()));
        let mut reader = dec.read_info().unwrap();
        let mut buf = vec![0; reader.output_buffer_size().unwrap()];
        let info = reader.next_frame(&mut buf).unwrap();
        assert_eq!((info.width, info.height), (32, 32));
        assert_eq!(buf[0], 255);
        assert_eq!(buf[16 * 32], 128);
    }
}
