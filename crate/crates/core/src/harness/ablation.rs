use std::fmt::Write as _;

use crate::modality::Modality;
use crate::model::{fit, Model, ModelSpec, Sample, TrainConfig};

use super::{evaluate, HarnessError};

/// One configuration of the modality/branch ablation table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AblationRow {
    pub id: char,
    pub description: &'static str,
    pub modalities: &'static [Modality],
    pub cnn: bool,
    pub graph: bool,
    pub ensemble_cnn_variants: usize,
}

const BODY: &[Modality] = &[Modality::Body];
const BODY_FACE_HANDS: &[Modality] = &[Modality::Body, Modality::Hands, Modality::Face];
const PLUS_FLOW: &[Modality] = &[Modality::Body, Modality::Hands, Modality::Face, Modality::Flow];
const ALL: &[Modality] = &Modality::ALL;

pub const ABLATION_ROWS: [AblationRow; 8] = [
    AblationRow { id: 'A', description: "body joints only", modalities: BODY, cnn: true, graph: true, ensemble_cnn_variants: 1 },
    AblationRow { id: 'B', description: "+ face and hands", modalities: BODY_FACE_HANDS, cnn: true, graph: true, ensemble_cnn_variants: 1 },
    AblationRow { id: 'C', description: "+ motion", modalities: PLUS_FLOW, cnn: true, graph: true, ensemble_cnn_variants: 1 },
    AblationRow { id: 'D', description: "+ bones", modalities: ALL, cnn: true, graph: true, ensemble_cnn_variants: 1 },
    AblationRow { id: 'E', description: "graph only", modalities: ALL, cnn: false, graph: true, ensemble_cnn_variants: 1 },
    AblationRow { id: 'F', description: "CNN only", modalities: ALL, cnn: true, graph: false, ensemble_cnn_variants: 1 },
    AblationRow { id: 'G', description: "CNN+Graph", modalities: ALL, cnn: true, graph: true, ensemble_cnn_variants: 1 },
    AblationRow { id: 'H', description: "Multi-CNN+Graph", modalities: ALL, cnn: true, graph: true, ensemble_cnn_variants: 2 },
];

impl AblationRow {
    pub fn by_id(id: char) -> Option<AblationRow> {
        ABLATION_ROWS.iter().copied().find(|r| r.id == id.to_ascii_uppercase())
    }

    /// `base` with this row's modality and branch toggles applied.
    pub fn spec(&self, base: &ModelSpec) -> ModelSpec {
        let mut s = base.clone();
        s.modalities = self.modalities.to_vec();
        s.cnn_on = self.cnn;
        s.graph_on = self.graph;
        s.ensemble_cnn_variants = self.ensemble_cnn_variants;
        s
    }

    fn branches(&self) -> &'static str {
        match (self.cnn, self.graph) {
            (true, true) => "cnn+graph",
            (true, false) => "cnn",
            _ => "graph",
        }
    }
}

#[derive(Debug, Clone)]
pub struct AblationConfig {
    pub rows: Vec<AblationRow>,
    /// Each seed sets both the initializer and the shuffle seed.
    pub seeds: Vec<u64>,
    /// Class pair whose mutual confusion is tracked.
    pub pair: Option<(usize, usize)>,
    pub threads: usize,
}

impl Default for AblationConfig {
    fn default() -> Self {
        AblationConfig {
            rows: ABLATION_ROWS.to_vec(),
            seeds: vec![42, 43, 44],
            pair: None,
            threads: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationResult {
    pub row: char,
    pub seed: u64,
    pub accuracy: f64,
    pub pair_confusion: Option<f64>,
    pub param_count: usize,
}

/// Trains and evaluates every row under every seed. Rows whose effective
/// spec equals an earlier row's reuse that row's result for the same seed.
pub fn run_ablation(
    train: &[Sample],
    test: &[Sample],
    classes: &[String],
    base: &ModelSpec,
    train_cfg: &TrainConfig,
    cfg: &AblationConfig,
    mut on_result: impl FnMut(&AblationResult),
) -> Result<Vec<AblationResult>, HarnessError> {
    if cfg.rows.is_empty() || cfg.seeds.is_empty() {
        return Err(HarnessError::Argument("ablation needs at least one row and one seed".into()));
    }
    let mut done: Vec<(ModelSpec, AblationResult)> = Vec::new();
    let mut out = Vec::new();
    for &seed in &cfg.seeds {
        for row in &cfg.rows {
            let mut spec = row.spec(base);
            spec.init_seed = seed;
            let result = match done.iter().find(|(s, _)| *s == spec) {
                Some((_, r)) => AblationResult { row: row.id, ..r.clone() },
                None => {
                    let mut tc = train_cfg.clone();
                    tc.shuffle_seed = seed;
                    tc.threads = cfg.threads;
                    let mut model = Model::new(&spec)?;
                    fit(&mut model, train, &tc, |_| {})?;
                    let report = evaluate(&model, classes, test, cfg.threads)?;
                    AblationResult {
                        row: row.id,
                        seed,
                        accuracy: report.accuracy,
                        pair_confusion: cfg.pair.map(|(a, b)| report.pair_confusion(a, b)),
                        param_count: model.param_count(),
                    }
                }
            };
            on_result(&result);
            done.push((spec, result.clone()));
            out.push(result);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationSummary {
    pub row: AblationRow,
    pub param_count: usize,
    pub accuracies: Vec<f64>,
    pub mean_accuracy: f64,
    pub mean_pair_confusion: Option<f64>,
}

/// Seed-averaged result of each row, in row order.
pub fn summarize_ablation(rows: &[AblationRow], results: &[AblationResult]) -> Vec<AblationSummary> {
    rows.iter()
        .filter_map(|row| {
            let rs: Vec<&AblationResult> = results.iter().filter(|r| r.row == row.id).collect();
            if rs.is_empty() {
                return None;
            }
            let n = rs.len() as f64;
            let accuracies: Vec<f64> = rs.iter().map(|r| r.accuracy).collect();
            let pair: Option<Vec<f64>> = rs.iter().map(|r| r.pair_confusion).collect();
            Some(AblationSummary {
                row: *row,
                param_count: rs[0].param_count,
                mean_accuracy: accuracies.iter().sum::<f64>() / n,
                accuracies,
                mean_pair_confusion: pair.map(|p| p.iter().sum::<f64>() / n),
            })
        })
        .collect()
}

pub fn ablation_csv(summary: &[AblationSummary]) -> String {
    let mut s = String::from("row,description,modalities,branches,cnn_variants,params,seed_accuracies,mean_accuracy,mean_pair_confusion\n");
    for r in summary {
        let mods: Vec<&str> = r.row.modalities.iter().map(|m| m.name()).collect();
        let accs: Vec<String> = r.accuracies.iter().map(|a| format!("{a:.4}")).collect();
        let pair = r.mean_pair_confusion.map(|p| format!("{p:.4}")).unwrap_or_default();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{:.4},{}",
            r.row.id,
            r.row.description,
            mods.join(";"),
            r.row.branches(),
            r.row.ensemble_cnn_variants,
            r.param_count,
            accs.join(";"),
            r.mean_accuracy,
            pair
        );
    }
    s
}
