//! IoU evaluation of predictions against ground truth, single-slide and
//! corpus-scale.
//!
//! Two granularities are always reported side by side: the semantic IoU of
//! the predicted cell region against the truth region, and the
//! instance-level IoU of greedily matched cell pairs. [`run_corpus_from_spec`]
//! and [`run_corpus_from_dir`] fan the pipeline out over a whole corpus,
//! write one JSON report per slide plus a summary, skip slides whose report
//! already exists (resumable), and record per-slide failures without
//! aborting the rest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::clustering::iou;
use crate::error::{Error, Result};
use crate::pipeline::{run_pipeline, InstanceSet, PipelineConfig};
use crate::raster::{self, BinaryMask, LabelMap};
use crate::synth::{generate_slide, CorpusSpec, GroundTruth, SynthConfig};

/// Minimum IoU for a prediction to count as a match for a truth instance.
pub const MATCH_IOU_FLOOR: f64 = 0.1;

/// One greedily matched (truth, prediction) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub truth_id: u32,
    pub pred_id: u32,
    pub iou: f64,
}

/// Scores of one prediction against one ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// IoU of the union of predicted instances against the truth region.
    pub semantic_iou: f64,
    /// Mean IoU over matched pairs; 0 when nothing matched.
    pub mean_matched_instance_iou: f64,
    pub n_predicted: usize,
    pub n_truth: usize,
    /// Matched pairs, sorted by descending IoU (ties by ascending ids).
    pub pairs: Vec<MatchedPair>,
    pub unmatched_truth: usize,
    pub unmatched_predicted: usize,
}

impl EvalReport {
    /// Relative instance-count error, `|predicted - truth| / truth`.
    /// A slide with no truth cells scores 0 when the prediction is also
    /// empty and 1 otherwise.
    pub fn count_error(&self) -> f64 {
        if self.n_truth == 0 {
            if self.n_predicted == 0 {
                0.0
            } else {
                1.0
            }
        } else {
            (self.n_predicted as f64 - self.n_truth as f64).abs() / self.n_truth as f64
        }
    }
}

fn check_same_dims(
    (aw, ah): (u32, u32),
    (bw, bh): (u32, u32),
) -> Result<()> {
    if (aw, ah) != (bw, bh) {
        return Err(Error::DimensionMismatch {
            a_width: aw,
            a_height: ah,
            b_width: bw,
            b_height: bh,
        });
    }
    Ok(())
}

/// Greedy descending-IoU matching between two label maps.
///
/// All pairwise IoUs are computed in one pass over the pixels; candidates
/// below [`MATCH_IOU_FLOOR`] are discarded, the rest matched greedily so
/// that every truth and every predicted instance is used at most once.
fn match_instances(pred: &LabelMap, truth: &LabelMap) -> Vec<MatchedPair> {
    let mut pred_area: BTreeMap<u32, usize> = BTreeMap::new();
    let mut truth_area: BTreeMap<u32, usize> = BTreeMap::new();
    let mut intersection: BTreeMap<(u32, u32), usize> = BTreeMap::new();
    for (&p, &t) in pred.data().iter().zip(truth.data().iter()) {
        if p != 0 {
            *pred_area.entry(p).or_default() += 1;
        }
        if t != 0 {
            *truth_area.entry(t).or_default() += 1;
        }
        if p != 0 && t != 0 {
            *intersection.entry((t, p)).or_default() += 1;
        }
    }

    let mut candidates: Vec<MatchedPair> = intersection
        .into_iter()
        .map(|((t, p), inter)| MatchedPair {
            truth_id: t,
            pred_id: p,
            iou: inter as f64 / (truth_area[&t] + pred_area[&p] - inter) as f64,
        })
        .filter(|pair| pair.iou >= MATCH_IOU_FLOOR)
        .collect();
    candidates.sort_by(|a, b| {
        b.iou
            .total_cmp(&a.iou)
            .then(a.truth_id.cmp(&b.truth_id))
            .then(a.pred_id.cmp(&b.pred_id))
    });

    let mut truth_used = std::collections::BTreeSet::new();
    let mut pred_used = std::collections::BTreeSet::new();
    let mut pairs = Vec::new();
    for pair in candidates {
        if !truth_used.contains(&pair.truth_id) && !pred_used.contains(&pair.pred_id) {
            truth_used.insert(pair.truth_id);
            pred_used.insert(pair.pred_id);
            pairs.push(pair);
        }
    }
    pairs
}

fn distinct_labels(map: &LabelMap) -> usize {
    let mut seen = std::collections::BTreeSet::new();
    for &v in map.data() {
        if v != 0 {
            seen.insert(v);
        }
    }
    seen.len()
}

fn report_from(
    pred_labels: &LabelMap,
    pred_semantic: &BinaryMask,
    truth_labels: &LabelMap,
    truth_semantic: &BinaryMask,
) -> Result<EvalReport> {
    check_same_dims(
        (pred_labels.width(), pred_labels.height()),
        (truth_labels.width(), truth_labels.height()),
    )?;
    let semantic_iou = iou(pred_semantic, truth_semantic)?;
    let pairs = match_instances(pred_labels, truth_labels);
    let n_predicted = distinct_labels(pred_labels);
    let n_truth = distinct_labels(truth_labels);
    let mean = if pairs.is_empty() {
        0.0
    } else {
        pairs.iter().map(|p| p.iou).sum::<f64>() / pairs.len() as f64
    };
    Ok(EvalReport {
        semantic_iou,
        mean_matched_instance_iou: mean,
        n_predicted,
        n_truth,
        unmatched_truth: n_truth - pairs.len(),
        unmatched_predicted: n_predicted - pairs.len(),
        pairs,
    })
}

/// Score a pipeline result against ground truth.
pub fn evaluate(pred: &InstanceSet, truth: &GroundTruth) -> Result<EvalReport> {
    report_from(
        &pred.instance_labels(),
        &pred.union_mask(),
        &truth.instances,
        &truth.semantic_mask,
    )
}

/// Score two instance label maps against each other, treating each map's
/// foreground as its semantic region. This is the file-level entry point:
/// both sides can come straight from label-map PNGs.
pub fn evaluate_label_maps(pred: &LabelMap, truth: &LabelMap) -> Result<EvalReport> {
    report_from(pred, &pred.foreground(), truth, &truth.foreground())
}

// ---------------------------------------------------------------------------
// Corpus runs
// ---------------------------------------------------------------------------

/// A slide that could not be evaluated; the rest of the corpus still runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusFailure {
    pub source_id: String,
    pub message: String,
}

/// Aggregate scores over a corpus run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSummary {
    /// Slides attempted (evaluated + failed).
    pub n_images: usize,
    pub mean_semantic_iou: f64,
    pub mean_instance_iou: f64,
    pub median_semantic_iou: f64,
    pub median_instance_iou: f64,
    pub min_semantic_iou: f64,
    pub min_instance_iou: f64,
    /// Mean relative instance-count error over evaluated slides.
    pub mean_count_error: f64,
    pub failures: Vec<CorpusFailure>,
}

/// One slide's report with its id, as written to `{id}_eval.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerImageEval {
    pub source_id: String,
    #[serde(flatten)]
    pub report: EvalReport,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: std::io::Error::new(std::io::ErrorKind::InvalidData, e),
    })?;
    bytes.push(b'\n');
    raster::write_atomic(path, &bytes)
}

/// Where one corpus slide's image and truth come from.
enum SlideSource {
    /// Generated in memory from a per-slide config.
    Synth(Box<SynthConfig>),
    /// Image file plus truth files written by [`GroundTruth::save`].
    Files { image: PathBuf, truth_dir: PathBuf },
}

fn evaluate_slide(
    id: &str,
    source: &SlideSource,
    cfg: &PipelineConfig,
    eval_path: &Path,
    force: bool,
) -> std::result::Result<EvalReport, String> {
    if !force {
        if let Ok(bytes) = fs::read(eval_path) {
            if let Ok(prior) = serde_json::from_slice::<PerImageEval>(&bytes) {
                log::debug!("{id}: reusing existing report {}", eval_path.display());
                return Ok(prior.report);
            }
            log::warn!(
                "{id}: could not parse existing {}, re-evaluating",
                eval_path.display()
            );
        }
    }
    let run = || -> Result<EvalReport> {
        let (image, truth) = match source {
            SlideSource::Synth(synth_cfg) => generate_slide(synth_cfg)?,
            SlideSource::Files { image, truth_dir } => {
                (raster::load_image(image)?, GroundTruth::load(truth_dir, id)?)
            }
        };
        let instances = run_pipeline(&image, id, cfg)?;
        let report = evaluate(&instances, &truth)?;
        write_json(
            eval_path,
            &PerImageEval {
                source_id: id.to_string(),
                report: report.clone(),
            },
        )?;
        Ok(report)
    };
    run().map_err(|e| e.to_string())
}

fn median(sorted: &[f64]) -> f64 {
    debug_assert!(sorted.windows(2).all(|w| w[0] <= w[1]));
    let n = sorted.len();
    if n == 0 {
        0.0
    } else if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

fn summarize(
    results: Vec<(String, std::result::Result<EvalReport, String>)>,
) -> CorpusSummary {
    let n_images = results.len();
    let mut semantic = Vec::new();
    let mut instance = Vec::new();
    let mut count_errors = Vec::new();
    let mut failures = Vec::new();
    for (source_id, outcome) in results {
        match outcome {
            Ok(report) => {
                semantic.push(report.semantic_iou);
                instance.push(report.mean_matched_instance_iou);
                count_errors.push(report.count_error());
            }
            Err(message) => {
                log::warn!("{source_id}: {message}");
                failures.push(CorpusFailure { source_id, message });
            }
        }
    }
    let mean = |xs: &[f64]| {
        if xs.is_empty() {
            0.0
        } else {
            xs.iter().sum::<f64>() / xs.len() as f64
        }
    };
    let min = |xs: &[f64]| xs.iter().copied().fold(f64::INFINITY, f64::min);
    semantic.sort_by(f64::total_cmp);
    instance.sort_by(f64::total_cmp);
    CorpusSummary {
        n_images,
        mean_semantic_iou: mean(&semantic),
        mean_instance_iou: mean(&instance),
        median_semantic_iou: median(&semantic),
        median_instance_iou: median(&instance),
        min_semantic_iou: if semantic.is_empty() { 0.0 } else { min(&semantic) },
        min_instance_iou: if instance.is_empty() { 0.0 } else { min(&instance) },
        mean_count_error: mean(&count_errors),
        failures,
    }
}

fn run_corpus(
    slides: Vec<(String, SlideSource)>,
    cfg: &PipelineConfig,
    out_dir: &Path,
    force: bool,
) -> Result<CorpusSummary> {
    if slides.is_empty() {
        return Err(Error::InvalidSpec("corpus contains no slides".into()));
    }
    cfg.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::Io {
        path: out_dir.to_path_buf(),
        source: e,
    })?;
    let results = crate::parallel::map_slice(&slides, |(id, source)| {
        let eval_path = out_dir.join(format!("{id}_eval.json"));
        (
            id.clone(),
            evaluate_slide(id, source, cfg, &eval_path, force),
        )
    });
    let summary = summarize(results);
    write_json(&out_dir.join("summary.json"), &summary)?;
    Ok(summary)
}

/// Generate the corpus described by `spec` in memory, run the pipeline on
/// every slide, and write per-slide reports plus `summary.json` into
/// `out_dir`. Slides whose report file already parses are skipped unless
/// `force` is set, making interrupted runs resumable.
pub fn run_corpus_from_spec(
    spec: &CorpusSpec,
    cfg: &PipelineConfig,
    out_dir: &Path,
    force: bool,
) -> Result<CorpusSummary> {
    let slides = spec
        .slides()?
        .into_iter()
        .map(|(id, synth_cfg)| (id, SlideSource::Synth(Box::new(synth_cfg))))
        .collect();
    run_corpus(slides, cfg, out_dir, force)
}

/// Evaluate every slide stored in `corpus_dir` (an `{id}.png` image next to
/// the `{id}_*.png` truth files of [`GroundTruth::save`]) and write reports
/// into `out_dir` as in [`run_corpus_from_spec`]. Slides with unreadable
/// files are recorded as failures without stopping the run.
pub fn run_corpus_from_dir(
    corpus_dir: &Path,
    cfg: &PipelineConfig,
    out_dir: &Path,
    force: bool,
) -> Result<CorpusSummary> {
    let entries = fs::read_dir(corpus_dir).map_err(|e| Error::Io {
        path: corpus_dir.to_path_buf(),
        source: e,
    })?;
    let mut ids = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::Io {
            path: corpus_dir.to_path_buf(),
            source: e,
        })?;
        let name = entry.file_name();
        let name = name.to_string_lossy();
        if let Some(id) = name.strip_suffix("_instances.png") {
            ids.push(id.to_string());
        }
    }
    ids.sort();
    let slides = ids
        .into_iter()
        .map(|id| {
            let image = corpus_dir.join(format!("{id}.png"));
            (
                id,
                SlideSource::Files {
                    image,
                    truth_dir: corpus_dir.to_path_buf(),
                },
            )
        })
        .collect();
    run_corpus(slides, cfg, out_dir, force)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square_map(w: u32, h: u32, rects: &[(u32, u32, u32, u32, u32)]) -> LabelMap {
        // rects: (x0, y0, width, height, label)
        let mut map = LabelMap::zeroed(w, h).unwrap();
        for &(x0, y0, rw, rh, label) in rects {
            for y in y0..y0 + rh {
                for x in x0..x0 + rw {
                    map.set(x, y, label);
                }
            }
        }
        map
    }

    #[test]
    fn identical_maps_score_perfectly() {
        let truth = square_map(32, 32, &[(2, 2, 8, 8, 1), (16, 16, 10, 6, 2)]);
        let report = evaluate_label_maps(&truth, &truth).unwrap();
        assert_eq!(report.semantic_iou, 1.0);
        assert_eq!(report.mean_matched_instance_iou, 1.0);
        assert_eq!(report.n_predicted, 2);
        assert_eq!(report.n_truth, 2);
        assert_eq!(report.pairs.len(), 2);
        assert!(report.pairs.iter().all(|p| p.iou == 1.0));
        assert_eq!(report.unmatched_truth, 0);
        assert_eq!(report.unmatched_predicted, 0);
    }

    #[test]
    fn empty_prediction_scores_zero() {
        let truth = square_map(16, 16, &[(1, 1, 6, 6, 1)]);
        let pred = LabelMap::zeroed(16, 16).unwrap();
        let report = evaluate_label_maps(&pred, &truth).unwrap();
        assert_eq!(report.semantic_iou, 0.0);
        assert_eq!(report.mean_matched_instance_iou, 0.0);
        assert_eq!(report.n_predicted, 0);
        assert_eq!(report.n_truth, 1);
        assert!(report.pairs.is_empty());
        assert_eq!(report.unmatched_truth, 1);
        assert_eq!(report.count_error(), 1.0);
    }

    #[test]
    fn split_instance_matches_one_half() {
        // One 10x10 truth square; prediction splits it into two 5x10
        // halves. Each half has IoU 0.5 with the truth; greedy matching
        // may take only one of them.
        let truth = square_map(16, 16, &[(3, 3, 10, 10, 1)]);
        let pred = square_map(16, 16, &[(3, 3, 5, 10, 1), (8, 3, 5, 10, 2)]);
        let report = evaluate_label_maps(&pred, &truth).unwrap();
        assert_eq!(report.semantic_iou, 1.0);
        assert_eq!(report.pairs.len(), 1);
        assert_eq!(report.pairs[0].truth_id, 1);
        assert_eq!(report.pairs[0].iou, 0.5);
        assert_eq!(report.unmatched_predicted, 1);
        assert_eq!(report.unmatched_truth, 0);
        assert_eq!(report.count_error(), 1.0);
    }

    #[test]
    fn low_overlap_stays_unmatched() {
        // 4 shared pixels over a union of 68: IoU ≈ 0.06 < 0.1.
        let truth = square_map(32, 32, &[(0, 0, 6, 6, 1)]);
        let pred = square_map(32, 32, &[(4, 4, 6, 6, 1)]);
        let report = evaluate_label_maps(&pred, &truth).unwrap();
        assert!(report.pairs.is_empty());
        assert_eq!(report.unmatched_truth, 1);
        assert_eq!(report.unmatched_predicted, 1);
        assert!(report.semantic_iou > 0.0, "semantic IoU still sees overlap");
    }

    #[test]
    fn scores_ignore_predicted_label_permutation() {
        let truth = square_map(32, 32, &[(2, 2, 8, 8, 1), (14, 14, 9, 9, 2)]);
        let pred = square_map(32, 32, &[(3, 2, 8, 8, 1), (14, 15, 9, 9, 2)]);
        let swapped = square_map(32, 32, &[(3, 2, 8, 8, 2), (14, 15, 9, 9, 1)]);
        let a = evaluate_label_maps(&pred, &truth).unwrap();
        let b = evaluate_label_maps(&swapped, &truth).unwrap();
        assert_eq!(a.semantic_iou, b.semantic_iou);
        assert_eq!(a.mean_matched_instance_iou, b.mean_matched_instance_iou);
        assert_eq!(a.n_predicted, b.n_predicted);
        assert_eq!(a.pairs.len(), b.pairs.len());
        // Same truth instances matched, to permuted predicted ids.
        let truth_ids = |r: &EvalReport| {
            let mut ids: Vec<u32> = r.pairs.iter().map(|p| p.truth_id).collect();
            ids.sort();
            ids
        };
        assert_eq!(truth_ids(&a), truth_ids(&b));
    }

    #[test]
    fn matching_is_injective_both_ways() {
        // A deliberately messy many-to-many overlap grid.
        let truth = square_map(
            48,
            48,
            &[(0, 0, 20, 20, 1), (18, 0, 20, 20, 2), (0, 22, 30, 20, 3)],
        );
        let pred = square_map(
            48,
            48,
            &[(2, 2, 20, 20, 3), (20, 2, 20, 20, 1), (2, 20, 28, 22, 2), (40, 40, 6, 6, 4)],
        );
        let report = evaluate_label_maps(&pred, &truth).unwrap();
        let mut truth_seen = std::collections::BTreeSet::new();
        let mut pred_seen = std::collections::BTreeSet::new();
        for pair in &report.pairs {
            assert!(truth_seen.insert(pair.truth_id), "truth id reused");
            assert!(pred_seen.insert(pair.pred_id), "pred id reused");
            assert!((0.0..=1.0).contains(&pair.iou));
            assert!(pair.iou >= MATCH_IOU_FLOOR);
        }
        assert_eq!(report.pairs.len() + report.unmatched_truth, report.n_truth);
        assert_eq!(
            report.pairs.len() + report.unmatched_predicted,
            report.n_predicted
        );
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let a = LabelMap::zeroed(16, 16).unwrap();
        let b = LabelMap::zeroed(16, 17).unwrap();
        assert!(matches!(
            evaluate_label_maps(&a, &b),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn report_round_trips_through_json() {
        let truth = square_map(16, 16, &[(2, 2, 6, 6, 1)]);
        let report = evaluate_label_maps(&truth, &truth).unwrap();
        let per_image = PerImageEval {
            source_id: "t0".into(),
            report: report.clone(),
        };
        let json = serde_json::to_string_pretty(&per_image).unwrap();
        assert!(json.contains("\"source_id\""));
        assert!(json.contains("\"semantic_iou\""), "flattened report fields");
        let back: PerImageEval = serde_json::from_str(&json).unwrap();
        assert_eq!(back.report, report);
    }

    #[test]
    fn median_of_even_and_odd_sets() {
        assert_eq!(median(&[]), 0.0);
        assert_eq!(median(&[0.4]), 0.4);
        assert_eq!(median(&[0.2, 0.4, 0.9]), 0.4);
        assert_eq!(median(&[0.2, 0.4, 0.6, 0.9]), 0.5);
    }

    fn tiny_corpus() -> CorpusSpec {
        CorpusSpec {
            n_images: 3,
            width: 256,
            height: 256,
            n_cells_range: (2, 3),
            overlap_pairs: 0,
            radius_range: (16.0, 24.0),
            seed: 5,
            ..CorpusSpec::default()
        }
    }

    #[test]
    fn corpus_run_writes_reports_and_summary() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = PipelineConfig::default();
        let summary =
            run_corpus_from_spec(&tiny_corpus(), &cfg, dir.path(), false).unwrap();
        assert_eq!(summary.n_images, 3);
        assert!(summary.failures.is_empty(), "failures: {:?}", summary.failures);
        assert!(summary.mean_semantic_iou > 0.5);
        assert!(summary.mean_instance_iou > 0.5);
        assert!(dir.path().join("summary.json").is_file());
        for i in 0..3 {
            assert!(dir.path().join(format!("slide_00{i}_eval.json")).is_file());
        }
        let bytes = fs::read(dir.path().join("summary.json")).unwrap();
        let parsed: CorpusSummary = serde_json::from_slice(&bytes).unwrap();
        assert_eq!(parsed, summary);
    }

    #[test]
    fn corpus_resume_skips_existing_reports() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = PipelineConfig::default();
        let spec = tiny_corpus();
        let first = run_corpus_from_spec(&spec, &cfg, dir.path(), false).unwrap();
        // Poison one report: a resumed run must keep it verbatim, a forced
        // run must replace it.
        let poisoned = dir.path().join("slide_001_eval.json");
        let fake = PerImageEval {
            source_id: "slide_001".into(),
            report: EvalReport {
                semantic_iou: 0.123,
                mean_matched_instance_iou: 0.123,
                n_predicted: 9,
                n_truth: 9,
                pairs: vec![],
                unmatched_truth: 9,
                unmatched_predicted: 9,
            },
        };
        write_json(&poisoned, &fake).unwrap();
        let resumed = run_corpus_from_spec(&spec, &cfg, dir.path(), false).unwrap();
        assert!(
            (resumed.mean_semantic_iou - first.mean_semantic_iou).abs() > 1e-9,
            "resume must trust the poisoned file"
        );
        let forced = run_corpus_from_spec(&spec, &cfg, dir.path(), true).unwrap();
        assert_eq!(forced, first, "forced rerun recomputes everything");
    }

    #[test]
    fn corpus_records_failures_without_aborting() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = dir.path().join("corpus");
        fs::create_dir_all(&corpus).unwrap();
        // Two good slides on disk plus one with a corrupt image file.
        let spec = tiny_corpus();
        for (id, synth_cfg) in spec.slides().unwrap().into_iter().take(2) {
            let (img, truth) = generate_slide(&synth_cfg).unwrap();
            raster::save_image(&corpus.join(format!("{id}.png")), &img).unwrap();
            truth.save(&corpus, &id).unwrap();
        }
        fs::write(corpus.join("broken.png"), b"not a png").unwrap();
        fs::write(corpus.join("broken_instances.png"), b"also not a png").unwrap();
        let out = dir.path().join("out");
        let cfg = PipelineConfig::default();
        let summary = run_corpus_from_dir(&corpus, &cfg, &out, false).unwrap();
        assert_eq!(summary.n_images, 3);
        assert_eq!(summary.failures.len(), 1);
        assert_eq!(summary.failures[0].source_id, "broken");
        assert!(summary.mean_semantic_iou > 0.5, "good slides still scored");
    }

    #[test]
    fn empty_corpus_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = dir.path().join("empty");
        fs::create_dir_all(&corpus).unwrap();
        let cfg = PipelineConfig::default();
        assert!(matches!(
            run_corpus_from_dir(&corpus, &cfg, dir.path(), false),
            Err(Error::InvalidSpec(_))
        ));
    }
}
