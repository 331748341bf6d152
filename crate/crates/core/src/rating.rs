//! Gold curiosity ratings from multiple thin-slice raters.
//!
//! Pipeline per rating unit (HIT): drop raters who were implausibly fast,
//! keep the rater subset with the highest ICC(2,1), then pick one label per
//! slice with an inverse-frequency weighted vote that discounts each rater's
//! overused labels.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::GoldRating;
use crate::error::{Error, Result};
use crate::stats::{mean, sample_sd};

/// Raters below `mean − TIME_SD_FACTOR · sd` of per-HIT total time are dropped.
pub const TIME_SD_FACTOR: f64 = 1.5;

/// Largest rater pool searched exhaustively for the best subset.
pub const MAX_SUBSET_RATERS: usize = 16;

const ICC_TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RaterJudgment {
    pub rater_id: String,
    pub group_id: String,
    pub member_id: String,
    pub slice_index: usize,
    pub rating: u8,
    #[serde(rename = "time_taken_s")]
    pub time_taken: f64,
    pub hit_id: String,
}

type SliceKey = (String, String, usize);

impl RaterJudgment {
    fn key(&self) -> SliceKey {
        (
            self.group_id.clone(),
            self.member_id.clone(),
            self.slice_index,
        )
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TieBreak {
    /// Prefer the higher curiosity label.
    #[default]
    High,
    Low,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RemovedRater {
    pub hit_id: String,
    pub rater_id: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeFilter {
    pub kept: Vec<RaterJudgment>,
    pub removed: BTreeSet<RemovedRater>,
}

/// Drops, per HIT, raters whose total time on that HIT is below
/// `mean − 1.5·sd` of the HIT's per-rater totals. At least two raters are
/// always kept per HIT: removed raters are re-admitted slowest first.
pub fn filter_raters_by_time(judgments: &[RaterJudgment]) -> TimeFilter {
    let mut totals: BTreeMap<&str, BTreeMap<&str, f64>> = BTreeMap::new();
    for j in judgments {
        *totals
            .entry(&j.hit_id)
            .or_default()
            .entry(&j.rater_id)
            .or_default() += j.time_taken;
    }

    let mut removed = BTreeSet::new();
    for (hit, per_rater) in &totals {
        let times: Vec<f64> = per_rater.values().copied().collect();
        let threshold = mean(&times) - TIME_SD_FACTOR * sample_sd(&times);
        let mut below: Vec<(&str, f64)> = per_rater
            .iter()
            .filter(|(_, &t)| t < threshold)
            .map(|(&r, &t)| (r, t))
            .collect();
        let remaining = per_rater.len() - below.len();
        if remaining < 2 {
            below.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(b.0)));
            let readmit = (2 - remaining).min(below.len());
            below.drain(..readmit);
        }
        for (r, _) in below {
            removed.insert(RemovedRater {
                hit_id: (*hit).to_owned(),
                rater_id: r.to_owned(),
            });
        }
    }

    let kept = judgments
        .iter()
        .filter(|j| {
            !removed.contains(&RemovedRater {
                hit_id: j.hit_id.clone(),
                rater_id: j.rater_id.clone(),
            })
        })
        .cloned()
        .collect();
    TimeFilter { kept, removed }
}

/// ICC(2,1): two-way random effects, absolute agreement, single rater.
///
/// `matrix` is targets × raters. Returns 0 when every cell is equal, and is
/// clamped to [-1, 1].
pub fn icc(matrix: &[Vec<f64>]) -> Result<f64> {
    let n = matrix.len();
    let k = matrix.first().map_or(0, Vec::len);
    if n < 2 || k < 2 {
        return Err(Error::InsufficientData(format!(
            "ICC needs ≥ 2 targets and ≥ 2 raters, got {n}×{k}"
        )));
    }
    if matrix.iter().any(|r| r.len() != k) {
        return Err(Error::InsufficientData("ragged rating matrix".into()));
    }
    let (nf, kf) = (n as f64, k as f64);
    let row_means: Vec<f64> = matrix.iter().map(|r| mean(r)).collect();
    let col_means: Vec<f64> = (0..k)
        .map(|c| matrix.iter().map(|r| r[c]).sum::<f64>() / nf)
        .collect();
    let grand = mean(&row_means);

    let ss_rows = kf * row_means.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let ss_cols = nf * col_means.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let mut ss_err = 0.0;
    let mut ss_total = 0.0;
    for (r, row) in matrix.iter().enumerate() {
        for (c, &x) in row.iter().enumerate() {
            ss_err += (x - row_means[r] - col_means[c] + grand).powi(2);
            ss_total += (x - grand).powi(2);
        }
    }
    if ss_total <= f64::EPSILON * grand.abs().max(1.0) * nf * kf {
        return Ok(0.0);
    }
    let msr = ss_rows / (nf - 1.0);
    let msc = ss_cols / (kf - 1.0);
    let mse = ss_err / ((nf - 1.0) * (kf - 1.0));
    let denom = msr + (kf - 1.0) * mse + kf / nf * (msc - mse);
    if denom <= 0.0 {
        return Ok(0.0);
    }
    Ok(((msr - mse) / denom).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetChoice {
    pub raters: Vec<String>,
    pub icc: f64,
}

/// Exhaustive search over rater subsets (size ≥ 2) of one HIT for the highest
/// ICC. Only raters who rated every slice of the HIT take part. Ties go to the
/// larger subset, then to the lexicographically smaller id list.
pub fn best_subset_by_icc(judgments: &[RaterJudgment]) -> Result<SubsetChoice> {
    let hit = judgments
        .first()
        .map(|j| j.hit_id.clone())
        .unwrap_or_default();
    let (targets, raters, cells) = rating_table(judgments);
    let complete: Vec<&String> = raters
        .iter()
        .filter(|r| {
            targets
                .iter()
                .all(|t| cells.contains_key(&((*r).clone(), t.clone())))
        })
        .collect();
    if complete.len() < 2 {
        return Err(Error::InsufficientRaters {
            hit,
            available: complete.len(),
        });
    }
    if complete.len() > MAX_SUBSET_RATERS {
        return Err(Error::InsufficientData(format!(
            "HIT `{hit}` has {} raters; subset search is capped at {MAX_SUBSET_RATERS}",
            complete.len()
        )));
    }

    let k = complete.len();
    let mut best: Option<(f64, Vec<String>)> = None;
    for mask in 1u32..(1 << k) {
        if mask.count_ones() < 2 {
            continue;
        }
        let subset: Vec<String> = (0..k)
            .filter(|b| mask >> b & 1 == 1)
            .map(|b| complete[b].clone())
            .collect();
        let matrix: Vec<Vec<f64>> = targets
            .iter()
            .map(|t| {
                subset
                    .iter()
                    .map(|r| cells[&(r.clone(), t.clone())] as f64)
                    .collect()
            })
            .collect();
        let value = icc(&matrix)?;
        let better = match &best {
            None => true,
            Some((bv, bs)) => {
                if (value - bv).abs() > ICC_TIE_TOL {
                    value > *bv
                } else if subset.len() != bs.len() {
                    subset.len() > bs.len()
                } else {
                    subset < *bs
                }
            }
        };
        if better {
            best = Some((value, subset));
        }
    }
    let (icc, raters) = best.expect("at least one subset of size 2");
    Ok(SubsetChoice { raters, icc })
}

type Cells = BTreeMap<(String, SliceKey), u8>;

fn rating_table(judgments: &[RaterJudgment]) -> (Vec<SliceKey>, Vec<String>, Cells) {
    let mut targets = BTreeSet::new();
    let mut raters = BTreeSet::new();
    let mut cells = BTreeMap::new();
    for j in judgments {
        targets.insert(j.key());
        raters.insert(j.rater_id.clone());
        cells
            .entry((j.rater_id.clone(), j.key()))
            .or_insert(j.rating);
    }
    (
        targets.into_iter().collect(),
        raters.into_iter().collect(),
        cells,
    )
}

/// Per-rater label counts over everything that rater judged.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LabelFrequencies {
    counts: BTreeMap<String, [u32; 3]>,
}

impl LabelFrequencies {
    pub fn from_judgments(judgments: &[RaterJudgment]) -> Self {
        let mut counts: BTreeMap<String, [u32; 3]> = BTreeMap::new();
        for j in judgments {
            counts.entry(j.rater_id.clone()).or_default()[j.rating as usize] += 1;
        }
        LabelFrequencies { counts }
    }

    pub fn from_counts(counts: impl IntoIterator<Item = (String, [u32; 3])>) -> Self {
        LabelFrequencies {
            counts: counts.into_iter().collect(),
        }
    }

    /// Weight of one vote for `label`: 1 / max(freq, 1/total).
    pub fn weight(&self, rater: &str, label: u8) -> f64 {
        match self.counts.get(rater) {
            Some(c) => {
                let total: u32 = c.iter().sum();
                if total == 0 {
                    return 1.0;
                }
                let freq = c[label as usize] as f64 / total as f64;
                1.0 / freq.max(1.0 / total as f64)
            }
            None => 1.0,
        }
    }
}

/// Inverse-frequency weighted vote over one slice's ratings.
pub fn bias_corrected_pick(votes: &[(&str, u8)], freqs: &LabelFrequencies, tie: TieBreak) -> u8 {
    let mut score = [0.0f64; 3];
    for &(rater, label) in votes {
        score[label as usize] += freqs.weight(rater, label);
    }
    let order: [u8; 3] = match tie {
        TieBreak::High => [2, 1, 0],
        TieBreak::Low => [0, 1, 2],
    };
    let mut best = order[0];
    for &l in &order[1..] {
        if score[l as usize] > score[best as usize] * (1.0 + 1e-12) {
            best = l;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HitReliability {
    pub hit_id: String,
    pub raters: Vec<String>,
    pub icc: f64,
    pub n_targets: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityReport {
    pub hits: Vec<HitReliability>,
    pub average_icc: f64,
    pub removed_raters: Vec<RemovedRater>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingOptions {
    pub tie_break: TieBreak,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatingOutcome {
    pub gold: Vec<GoldRating>,
    pub report: ReliabilityReport,
}

type HitOutcome = (HitReliability, Vec<(SliceKey, u8)>);

/// Time filter → best ICC subset per HIT → bias-corrected label per slice.
pub fn run_rating_pipeline(
    judgments: &[RaterJudgment],
    options: RatingOptions,
) -> Result<RatingOutcome> {
    if judgments.is_empty() {
        return Err(Error::EmptyInput);
    }
    for j in judgments {
        if j.rating > 2 {
            return Err(Error::RatingOutOfRange(j.rating as i64));
        }
    }
    let filtered = filter_raters_by_time(judgments);
    let freqs = LabelFrequencies::from_judgments(&filtered.kept);

    let mut by_hit: BTreeMap<&str, Vec<RaterJudgment>> = BTreeMap::new();
    for j in &filtered.kept {
        by_hit.entry(&j.hit_id).or_default().push(j.clone());
    }
    let hits: Vec<(&str, Vec<RaterJudgment>)> = by_hit.into_iter().collect();

    let per_hit: Vec<Result<HitOutcome>> = hits
        .par_iter()
        .map(|(hit, js)| {
            let choice = best_subset_by_icc(js)?;
            let chosen: BTreeSet<&str> = choice.raters.iter().map(String::as_str).collect();
            let mut votes: BTreeMap<SliceKey, Vec<(&str, u8)>> = BTreeMap::new();
            for j in js.iter().filter(|j| chosen.contains(j.rater_id.as_str())) {
                votes
                    .entry(j.key())
                    .or_default()
                    .push((&j.rater_id, j.rating));
            }
            let picks: Vec<(SliceKey, u8)> = votes
                .into_iter()
                .map(|(key, v)| {
                    let label = bias_corrected_pick(&v, &freqs, options.tie_break);
                    (key, label)
                })
                .collect();
            let rel = HitReliability {
                hit_id: (*hit).to_owned(),
                raters: choice.raters,
                icc: choice.icc,
                n_targets: picks.len(),
            };
            Ok((rel, picks))
        })
        .collect();

    let mut reliabilities = Vec::with_capacity(per_hit.len());
    let mut gold_map: BTreeMap<SliceKey, u8> = BTreeMap::new();
    for r in per_hit {
        let (rel, picks) = r?;
        reliabilities.push(rel);
        for (key, label) in picks {
            gold_map.entry(key).or_insert(label);
        }
    }
    let average_icc = reliabilities.iter().map(|h| h.icc).sum::<f64>() / reliabilities.len() as f64;
    let gold = gold_map
        .into_iter()
        .map(|((group_id, member_id, slice_index), rating)| GoldRating {
            group_id,
            member_id,
            slice_index,
            rating: rating as i64,
        })
        .collect();
    Ok(RatingOutcome {
        gold,
        report: ReliabilityReport {
            hits: reliabilities,
            average_icc,
            removed_raters: filtered.removed.into_iter().collect(),
        },
    })
}

#[derive(Debug, Deserialize)]
struct JudgmentRecord {
    rater_id: String,
    group_id: String,
    member_id: String,
    slice_index: usize,
    rating: i64,
    time_taken_s: f64,
    hit_id: String,
}

const JUDGMENT_HEADER: [&str; 7] = [
    "rater_id",
    "group_id",
    "member_id",
    "slice_index",
    "rating",
    "time_taken_s",
    "hit_id",
];

pub fn read_judgments_csv<R: Read>(reader: R) -> Result<Vec<RaterJudgment>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    for (i, rec) in rdr.deserialize::<JudgmentRecord>().enumerate() {
        let line = i as u64 + 2;
        let rec = rec.map_err(|e| Error::MalformedRow {
            line,
            reason: e.to_string(),
        })?;
        if !(0..=2).contains(&rec.rating) {
            return Err(Error::RatingOutOfRange(rec.rating));
        }
        if !(rec.time_taken_s > 0.0 && rec.time_taken_s.is_finite()) {
            return Err(Error::MalformedRow {
                line,
                reason: format!("time_taken_s must be positive, got {}", rec.time_taken_s),
            });
        }
        out.push(RaterJudgment {
            rater_id: rec.rater_id,
            group_id: rec.group_id,
            member_id: rec.member_id,
            slice_index: rec.slice_index,
            rating: rec.rating as u8,
            time_taken: rec.time_taken_s,
            hit_id: rec.hit_id,
        });
    }
    Ok(out)
}

pub fn load_judgments(path: &Path) -> Result<Vec<RaterJudgment>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_judgments_csv(file)
}

pub fn write_judgments_csv<W: Write>(judgments: &[RaterJudgment], writer: W) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    wtr.write_record(JUDGMENT_HEADER)?;
    for j in judgments {
        wtr.serialize(j)?;
    }
    wtr.flush().map_err(|e| Error::io("<judgments>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn judgment(rater: &str, slice: usize, rating: u8, time: f64) -> RaterJudgment {
        RaterJudgment {
            rater_id: rater.into(),
            group_id: "g1".into(),
            member_id: "m1".into(),
            slice_index: slice,
            rating,
            time_taken: time,
            hit_id: "h1".into(),
        }
    }

    #[test]
    fn time_filter_keeps_borderline_rater() {
        // mean 80, sample sd ≈ 40.2, threshold ≈ 19.7 < 20.
        let js: Vec<_> = [("a", 100.0), ("b", 95.0), ("c", 105.0), ("d", 20.0)]
            .iter()
            .map(|&(r, t)| judgment(r, 0, 1, t))
            .collect();
        let f = filter_raters_by_time(&js);
        assert!(f.removed.is_empty());
        assert_eq!(f.kept.len(), 4);
    }

    #[test]
    fn time_filter_removes_clear_outlier() {
        let mut js: Vec<_> = (0..8)
            .map(|i| judgment(&format!("r{i}"), 0, 1, 100.0 + i as f64))
            .collect();
        js.push(judgment("fast", 0, 1, 5.0));
        let f = filter_raters_by_time(&js);
        assert_eq!(f.removed.len(), 1);
        assert_eq!(f.removed.first().unwrap().rater_id, "fast");
        assert_eq!(f.kept.len(), 8);
    }

    #[test]
    fn time_filter_zero_variance_keeps_all() {
        let js: Vec<_> = ["a", "b", "c", "d"]
            .iter()
            .map(|r| judgment(r, 0, 1, 10.0))
            .collect();
        assert!(filter_raters_by_time(&js).removed.is_empty());
    }

    #[test]
    fn time_filter_two_raters_always_kept() {
        let js = vec![judgment("a", 0, 1, 100.0), judgment("b", 0, 1, 1.0)];
        let f = filter_raters_by_time(&js);
        assert!(f.removed.is_empty());
        assert_eq!(f.kept.len(), 2);
    }

    #[test]
    fn time_filter_is_per_hit() {
        let mut js: Vec<_> = (0..8)
            .map(|i| judgment(&format!("r{i}"), 0, 1, 100.0))
            .collect();
        js.push(judgment("fast", 0, 1, 5.0));
        let mut other = judgment("fast", 1, 1, 100.0);
        other.hit_id = "h2".into();
        js.push(other.clone());
        let mut peer = other.clone();
        peer.rater_id = "r0".into();
        js.push(peer);
        let f = filter_raters_by_time(&js);
        assert!(f
            .kept
            .iter()
            .any(|j| j.rater_id == "fast" && j.hit_id == "h2"));
        assert!(!f
            .kept
            .iter()
            .any(|j| j.rater_id == "fast" && j.hit_id == "h1"));
    }

    #[test]
    fn icc_perfect_agreement_is_one() {
        let m = vec![
            vec![0.0, 0.0, 0.0],
            vec![2.0, 2.0, 2.0],
            vec![1.0, 1.0, 1.0],
        ];
        assert!((icc(&m).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn icc_constant_matrix_is_zero() {
        let m = vec![vec![1.0; 3]; 4];
        assert_eq!(icc(&m).unwrap(), 0.0);
    }

    #[test]
    fn icc_rejects_tiny_matrices() {
        assert!(icc(&[vec![1.0, 2.0]]).is_err());
        assert!(icc(&[vec![1.0], vec![2.0]]).is_err());
    }

    #[test]
    fn best_subset_finds_agreeing_pair() {
        let a = [0, 2, 1, 0, 2, 1, 1, 0];
        let c = [2, 0, 0, 2, 1, 2, 0, 1];
        let mut js = Vec::new();
        for s in 0..a.len() {
            js.push(judgment("A", s, a[s], 5.0));
            js.push(judgment("B", s, a[s], 5.0));
            js.push(judgment("C", s, c[s], 5.0));
        }
        let best = best_subset_by_icc(&js).unwrap();
        assert_eq!(best.raters, vec!["A", "B"]);
        assert!((best.icc - 1.0).abs() < 1e-12);
    }

    #[test]
    fn best_subset_ties_prefer_larger_set() {
        let mut js = Vec::new();
        for s in 0..5 {
            for r in ["w", "x", "y", "z"] {
                js.push(judgment(r, s, (s % 3) as u8, 5.0));
            }
        }
        let best = best_subset_by_icc(&js).unwrap();
        assert_eq!(best.raters, vec!["w", "x", "y", "z"]);
    }

    #[test]
    fn best_subset_needs_two_complete_raters() {
        let js = vec![
            judgment("a", 0, 1, 1.0),
            judgment("a", 1, 1, 1.0),
            judgment("b", 0, 1, 1.0),
        ];
        assert!(matches!(
            best_subset_by_icc(&js),
            Err(Error::InsufficientRaters { available: 1, .. })
        ));
    }

    #[test]
    fn pick_single_vote() {
        let f = LabelFrequencies::from_counts([("a".to_string(), [1, 1, 1])]);
        assert_eq!(bias_corrected_pick(&[("a", 1)], &f, TieBreak::High), 1);
    }

    #[test]
    fn pick_discounts_overused_label() {
        let f = LabelFrequencies::from_counts([
            ("x".to_string(), [90, 5, 5]),
            ("y".to_string(), [45, 45, 10]),
        ]);
        // 1/0.9 ≈ 1.11 for label 0 versus 1/0.1 = 10 for label 2.
        assert_eq!(
            bias_corrected_pick(&[("x", 0), ("y", 2)], &f, TieBreak::High),
            2
        );
    }

    #[test]
    fn pick_ties_follow_tie_break() {
        let f = LabelFrequencies::from_counts([
            ("x".to_string(), [2, 2, 2]),
            ("y".to_string(), [2, 2, 2]),
        ]);
        assert_eq!(
            bias_corrected_pick(&[("x", 1), ("y", 2)], &f, TieBreak::High),
            2
        );
        assert_eq!(
            bias_corrected_pick(&[("x", 1), ("y", 2)], &f, TieBreak::Low),
            1
        );
    }

    #[test]
    fn pipeline_rejects_empty_input() {
        assert!(matches!(
            run_rating_pipeline(&[], RatingOptions::default()),
            Err(Error::EmptyInput)
        ));
    }

    #[test]
    fn pipeline_unanimous_ones() {
        let mut js = Vec::new();
        for s in 0..6 {
            for r in ["a", "b", "c", "d"] {
                js.push(judgment(r, s, 1, 7.0));
            }
        }
        let out = run_rating_pipeline(&js, RatingOptions::default()).unwrap();
        assert_eq!(out.gold.len(), 6);
        assert!(out.gold.iter().all(|g| g.rating == 1));
    }

    #[test]
    fn judgments_csv_round_trip() {
        let js = vec![judgment("a", 3, 2, 7.5)];
        let mut buf = Vec::new();
        write_judgments_csv(&js, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text
            .starts_with("rater_id,group_id,member_id,slice_index,rating,time_taken_s,hit_id\n"));
        assert_eq!(read_judgments_csv(buf.as_slice()).unwrap(), js);
    }

    #[test]
    fn judgments_csv_validates() {
        let bad =
            "rater_id,group_id,member_id,slice_index,rating,time_taken_s,hit_id\na,g,m,0,3,1.0,h\n";
        assert!(matches!(
            read_judgments_csv(bad.as_bytes()),
            Err(Error::RatingOutOfRange(3))
        ));
        let bad =
            "rater_id,group_id,member_id,slice_index,rating,time_taken_s,hit_id\na,g,m,0,1,0,h\n";
        assert!(matches!(
            read_judgments_csv(bad.as_bytes()),
            Err(Error::MalformedRow { line: 2, .. })
        ));
    }
}
