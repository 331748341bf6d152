//! Corpus schema and ingestion of annotation and gold-rating files.
//!
//! A [`Corpus`] is stored densely: every group holds one [`SliceAnnotation`]
//! per (member, slice) pair, with empty behavior sets where nothing was coded.
//! That canonical form makes loading order-insensitive and idempotent under
//! duplicated rows.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::codes::{CodeRegistry, ExtraCode};
use crate::error::{Error, Result};

/// Length of one thin slice in seconds.
pub const SLICE_SECONDS: u32 = 10;

pub const MIN_MEMBERS: usize = 2;
pub const MAX_MEMBERS: usize = 4;

const ANNOTATION_HEADER: [&str; 4] = ["group_id", "member_id", "slice_index", "behavior_code"];
const GOLD_HEADER: [&str; 4] = ["group_id", "member_id", "slice_index", "rating"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SliceAnnotation {
    pub group_id: String,
    pub member_id: String,
    pub slice_index: usize,
    /// Behavior code id → clause-level occurrence count (always ≥ 1).
    pub behaviors: BTreeMap<String, u32>,
    /// Gold thin-slice curiosity in {0, 1, 2}, absent until merged.
    pub curiosity: Option<u8>,
}

impl SliceAnnotation {
    pub fn new(group_id: &str, member_id: &str, slice_index: usize) -> Self {
        SliceAnnotation {
            group_id: group_id.to_owned(),
            member_id: member_id.to_owned(),
            slice_index,
            behaviors: BTreeMap::new(),
            curiosity: None,
        }
    }

    pub fn has(&self, code: &str) -> bool {
        self.behaviors.contains_key(code)
    }

    pub fn count(&self, code: &str) -> u32 {
        self.behaviors.get(code).copied().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Group {
    /// Sorted member ids.
    pub members: Vec<String>,
    pub slices: usize,
    /// Dense, member-major: index `member * slices + slice`.
    pub annotations: Vec<SliceAnnotation>,
}

impl Group {
    pub fn empty(group_id: &str, members: Vec<String>, slices: usize) -> Self {
        let annotations = members
            .iter()
            .flat_map(|m| (0..slices).map(move |s| SliceAnnotation::new(group_id, m, s)))
            .collect();
        Group {
            members,
            slices,
            annotations,
        }
    }

    pub fn member_index(&self, member_id: &str) -> Option<usize> {
        self.members
            .binary_search_by(|m| m.as_str().cmp(member_id))
            .ok()
    }

    pub fn annotation(&self, member: usize, slice: usize) -> &SliceAnnotation {
        &self.annotations[member * self.slices + slice]
    }

    pub fn annotation_mut(&mut self, member: usize, slice: usize) -> &mut SliceAnnotation {
        &mut self.annotations[member * self.slices + slice]
    }

    pub fn member_annotations(&self, member: usize) -> &[SliceAnnotation] {
        &self.annotations[member * self.slices..(member + 1) * self.slices]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct Corpus {
    pub registry: CodeRegistry,
    pub groups: BTreeMap<String, Group>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    /// Reject codes missing from the registry instead of registering them.
    pub strict_codes: bool,
    pub extra_codes: Vec<ExtraCode>,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            strict_codes: true,
            extra_codes: Vec::new(),
        }
    }
}

impl IngestConfig {
    /// Reads a TOML config, or JSON when the extension is `.json`.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        if path.extension().is_some_and(|e| e == "json") {
            Ok(serde_json::from_str(&text)?)
        } else {
            Ok(toml::from_str(&text)?)
        }
    }
}

/// One behavior occurrence as it appears in an annotation file. An empty
/// `behavior_code` marks the member as present at that slice without coding
/// anything.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AnnotationRow {
    pub group_id: String,
    pub member_id: String,
    pub slice_index: usize,
    pub behavior_code: String,
    #[serde(default = "one", skip_serializing_if = "is_one")]
    pub count: u32,
}

fn one() -> u32 {
    1
}

fn is_one(n: &u32) -> bool {
    *n == 1
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GoldRating {
    pub group_id: String,
    pub member_id: String,
    pub slice_index: usize,
    pub rating: i64,
}

/// Loads an annotation file (CSV, or JSON lines when the extension is
/// `.jsonl`) into a validated corpus.
pub fn load_corpus(path: &Path, config: &IngestConfig) -> Result<Corpus> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let rows = if path.extension().is_some_and(|e| e == "jsonl") {
        read_annotation_jsonl(BufReader::new(file))?
    } else {
        read_annotation_csv(file)?
    };
    Corpus::from_rows(rows, config)
}

fn check_header(
    header: &csv::StringRecord,
    expected: &[&str],
    optional: Option<&str>,
) -> Result<()> {
    let got: Vec<&str> = header.iter().map(str::trim).collect();
    let ok = got.len() >= expected.len()
        && got[..expected.len()] == *expected
        && match (got.len() - expected.len(), optional) {
            (0, _) => true,
            (1, Some(opt)) => got[expected.len()] == opt,
            _ => false,
        };
    if ok {
        Ok(())
    } else {
        Err(Error::MalformedRow {
            line: 1,
            reason: format!(
                "expected header `{}`, got `{}`",
                expected.join(","),
                got.join(",")
            ),
        })
    }
}

fn csv_reader<R: Read>(reader: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader)
}

fn malformed(record: &csv::StringRecord, reason: impl Into<String>) -> Error {
    Error::MalformedRow {
        line: record.position().map_or(0, |p| p.line()),
        reason: reason.into(),
    }
}

pub fn read_annotation_csv<R: Read>(reader: R) -> Result<Vec<AnnotationRow>> {
    let mut rdr = csv_reader(reader);
    let header = rdr.headers()?.clone();
    if header.is_empty() {
        return Err(Error::MalformedRow {
            line: 1,
            reason: "missing header".into(),
        });
    }
    check_header(&header, &ANNOTATION_HEADER, Some("count"))?;
    let width = header.len();
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        if record.len() != width {
            return Err(malformed(
                &record,
                format!("expected {width} fields, got {}", record.len()),
            ));
        }
        let slice_index = record[2]
            .parse::<usize>()
            .map_err(|_| malformed(&record, format!("bad slice_index `{}`", &record[2])))?;
        let count = if width == 5 {
            record[4]
                .parse::<u32>()
                .ok()
                .filter(|&c| c >= 1)
                .ok_or_else(|| malformed(&record, format!("bad count `{}`", &record[4])))?
        } else {
            1
        };
        if record[0].is_empty() || record[1].is_empty() {
            return Err(malformed(&record, "empty group_id or member_id"));
        }
        rows.push(AnnotationRow {
            group_id: record[0].to_owned(),
            member_id: record[1].to_owned(),
            slice_index,
            behavior_code: record[3].to_owned(),
            count,
        });
    }
    Ok(rows)
}

pub fn read_annotation_jsonl<R: BufRead>(reader: R) -> Result<Vec<AnnotationRow>> {
    let mut rows = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<jsonl>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: AnnotationRow = serde_json::from_str(&line).map_err(|e| Error::MalformedRow {
            line: i as u64 + 1,
            reason: e.to_string(),
        })?;
        if row.count == 0 || row.group_id.is_empty() || row.member_id.is_empty() {
            return Err(Error::MalformedRow {
                line: i as u64 + 1,
                reason: "empty id or zero count".into(),
            });
        }
        rows.push(row);
    }
    Ok(rows)
}

impl Corpus {
    /// Builds a corpus from annotation rows in any order.
    pub fn from_rows(rows: Vec<AnnotationRow>, config: &IngestConfig) -> Result<Corpus> {
        let mut registry = CodeRegistry::with_extras(&config.extra_codes)?;

        let unknown: BTreeSet<&str> = rows
            .iter()
            .map(|r| r.behavior_code.as_str())
            .filter(|c| !c.is_empty() && registry.lookup(c).is_none())
            .collect();
        if let Some(first) = unknown.first() {
            if config.strict_codes {
                return Err(Error::UnknownBehaviorCode((*first).to_owned()));
            }
            for code in &unknown {
                registry.register_id(code)?;
            }
        }

        let mut shapes: BTreeMap<&str, (BTreeSet<&str>, usize)> = BTreeMap::new();
        for r in &rows {
            let entry = shapes.entry(&r.group_id).or_default();
            entry.0.insert(&r.member_id);
            entry.1 = entry.1.max(r.slice_index + 1);
        }

        let mut groups = BTreeMap::new();
        for (gid, (members, slices)) in &shapes {
            if !(MIN_MEMBERS..=MAX_MEMBERS).contains(&members.len()) {
                return Err(Error::InconsistentMembers {
                    group: (*gid).to_owned(),
                    reason: format!(
                        "{} member(s); groups need {MIN_MEMBERS}-{MAX_MEMBERS}",
                        members.len()
                    ),
                });
            }
            let members = members.iter().map(|m| (*m).to_owned()).collect();
            groups.insert((*gid).to_owned(), Group::empty(gid, members, *slices));
        }

        for r in &rows {
            if r.behavior_code.is_empty() {
                continue;
            }
            let group = groups.get_mut(&r.group_id).expect("group shaped above");
            let m = group
                .member_index(&r.member_id)
                .expect("member shaped above");
            let count = group
                .annotation_mut(m, r.slice_index)
                .behaviors
                .entry(r.behavior_code.clone())
                .or_insert(0);
            // Max keeps duplicated rows idempotent.
            *count = (*count).max(r.count);
        }

        Ok(Corpus { registry, groups })
    }

    pub fn group(&self, group_id: &str) -> Result<&Group> {
        self.groups
            .get(group_id)
            .ok_or_else(|| Error::UnknownGroup(group_id.to_owned()))
    }

    /// Canonical annotation rows: one per behavior occurrence, plus a marker
    /// row (empty code) for each slice with nothing coded.
    pub fn to_rows(&self) -> Vec<AnnotationRow> {
        let mut rows = Vec::new();
        for (gid, group) in &self.groups {
            for ann in &group.annotations {
                let mut codes: Vec<(&String, &u32)> = ann.behaviors.iter().collect();
                codes.sort_by_key(|(c, _)| (self.registry.rank(c), c.as_str()));
                if codes.is_empty() {
                    rows.push(AnnotationRow {
                        group_id: gid.clone(),
                        member_id: ann.member_id.clone(),
                        slice_index: ann.slice_index,
                        behavior_code: String::new(),
                        count: 1,
                    });
                }
                for (code, &count) in codes {
                    rows.push(AnnotationRow {
                        group_id: gid.clone(),
                        member_id: ann.member_id.clone(),
                        slice_index: ann.slice_index,
                        behavior_code: code.clone(),
                        count,
                    });
                }
            }
        }
        rows
    }

    pub fn write_annotations_csv<W: Write>(&self, writer: W) -> Result<()> {
        let rows = self.to_rows();
        let with_counts = rows.iter().any(|r| r.count != 1);
        let mut wtr = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(writer);
        if with_counts {
            wtr.write_record(ANNOTATION_HEADER.iter().chain(&["count"]))?;
        } else {
            wtr.write_record(ANNOTATION_HEADER)?;
        }
        for r in rows {
            let slice = r.slice_index.to_string();
            let mut fields = vec![
                r.group_id.as_str(),
                r.member_id.as_str(),
                slice.as_str(),
                r.behavior_code.as_str(),
            ];
            let count = r.count.to_string();
            if with_counts {
                fields.push(&count);
            }
            wtr.write_record(fields)?;
        }
        wtr.flush().map_err(|e| Error::io("<annotations>", e))?;
        Ok(())
    }

    /// Gold ratings currently attached to the corpus, in canonical order.
    pub fn gold_ratings(&self) -> Vec<GoldRating> {
        self.groups
            .iter()
            .flat_map(|(gid, g)| {
                g.annotations.iter().filter_map(move |a| {
                    a.curiosity.map(|r| GoldRating {
                        group_id: gid.clone(),
                        member_id: a.member_id.clone(),
                        slice_index: a.slice_index,
                        rating: r as i64,
                    })
                })
            })
            .collect()
    }

    /// Distinct behavior codes present anywhere in the corpus.
    pub fn distinct_codes(&self) -> BTreeSet<&str> {
        self.groups
            .values()
            .flat_map(|g| g.annotations.iter())
            .flat_map(|a| a.behaviors.keys().map(String::as_str))
            .collect()
    }

    pub fn annotation_count(&self) -> usize {
        self.groups.values().map(|g| g.annotations.len()).sum()
    }
}

/// Attaches gold curiosity ratings. Slices not mentioned keep their current
/// value.
pub fn merge_gold_ratings(corpus: &Corpus, gold: &[GoldRating]) -> Result<Corpus> {
    let mut out = corpus.clone();
    for g in gold {
        if !(0..=2).contains(&g.rating) {
            return Err(Error::RatingOutOfRange(g.rating));
        }
        let unknown = || Error::UnknownKey {
            group: g.group_id.clone(),
            member: g.member_id.clone(),
            slice: g.slice_index,
        };
        let group = out.groups.get_mut(&g.group_id).ok_or_else(unknown)?;
        let m = group.member_index(&g.member_id).ok_or_else(unknown)?;
        if g.slice_index >= group.slices {
            return Err(unknown());
        }
        group.annotation_mut(m, g.slice_index).curiosity = Some(g.rating as u8);
    }
    Ok(out)
}

pub fn read_gold_csv<R: Read>(reader: R) -> Result<Vec<GoldRating>> {
    let mut rdr = csv_reader(reader);
    let header = rdr.headers()?.clone();
    check_header(&header, &GOLD_HEADER, None)?;
    let mut out = Vec::new();
    for record in rdr.records() {
        let record = record?;
        if record.len() != 4 {
            return Err(malformed(&record, "expected 4 fields"));
        }
        let slice_index = record[2]
            .parse()
            .map_err(|_| malformed(&record, format!("bad slice_index `{}`", &record[2])))?;
        let rating = record[3]
            .parse()
            .map_err(|_| malformed(&record, format!("bad rating `{}`", &record[3])))?;
        out.push(GoldRating {
            group_id: record[0].to_owned(),
            member_id: record[1].to_owned(),
            slice_index,
            rating,
        });
    }
    Ok(out)
}

pub fn load_gold(path: &Path) -> Result<Vec<GoldRating>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_gold_csv(file)
}

pub fn write_gold_csv<W: Write>(gold: &[GoldRating], writer: W) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    wtr.write_record(GOLD_HEADER)?;
    for g in gold {
        wtr.serialize(g)?;
    }
    wtr.flush().map_err(|e| Error::io("<gold>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load_str(text: &str, config: &IngestConfig) -> Result<Corpus> {
        Corpus::from_rows(read_annotation_csv(text.as_bytes())?, config)
    }

    const HEADER: &str = "group_id,member_id,slice_index,behavior_code\n";

    #[test]
    fn empty_file_with_header_yields_no_groups() {
        let c = load_str(HEADER, &IngestConfig::default()).unwrap();
        assert!(c.groups.is_empty());
    }

    #[test]
    fn missing_header_is_malformed() {
        let err = load_str("g1,m1,0,joy\n", &IngestConfig::default()).unwrap_err();
        assert!(
            matches!(err, Error::MalformedRow { line: 1, .. }),
            "{err:?}"
        );
    }

    #[test]
    fn three_rows_fixture() {
        let text =
            format!("{HEADER}g1,m1,0,justification\ng1,m1,1,joy\ng1,m1,2,argument\ng1,m2,0,\n");
        let c = load_str(&text, &IngestConfig::default()).unwrap();
        assert_eq!(c.groups.len(), 1);
        let g = &c.groups["g1"];
        assert_eq!(g.slices, 3);
        let m1 = g.member_annotations(g.member_index("m1").unwrap());
        assert_eq!(m1.len(), 3);
        assert!(m1[0].has("justification"));
        assert!(m1[1].has("joy"));
        assert!(m1[2].has("argument"));
        assert_eq!(c.distinct_codes().len(), 3);
    }

    #[test]
    fn strict_mode_rejects_unknown_codes() {
        let text = format!("{HEADER}g1,m1,0,jolt\ng1,m2,0,joy\n");
        let err = load_str(&text, &IngestConfig::default()).unwrap_err();
        assert!(matches!(err, Error::UnknownBehaviorCode(ref c) if c == "jolt"));
    }

    #[test]
    fn lenient_mode_registers_unknown_codes() {
        let cfg = IngestConfig {
            strict_codes: false,
            ..Default::default()
        };
        let text = format!("{HEADER}g1,m1,0,jolt\ng1,m2,0,joy\n");
        let c = load_str(&text, &cfg).unwrap();
        assert_eq!(c.registry.len(), 20);
        assert!(c.registry.lookup("jolt").is_some());
    }

    #[test]
    fn single_member_group_rejected() {
        let text = format!("{HEADER}g1,m1,0,joy\n");
        let err = load_str(&text, &IngestConfig::default()).unwrap_err();
        assert!(matches!(err, Error::InconsistentMembers { ref group, .. } if group == "g1"));
    }

    #[test]
    fn five_member_group_rejected() {
        let mut text = HEADER.to_owned();
        for m in 1..=5 {
            text.push_str(&format!("g1,m{m},0,joy\n"));
        }
        assert!(matches!(
            load_str(&text, &IngestConfig::default()),
            Err(Error::InconsistentMembers { .. })
        ));
    }

    #[test]
    fn bad_slice_index_reports_line() {
        let text = format!("{HEADER}g1,m1,0,joy\ng1,m2,x,joy\n");
        let err = load_str(&text, &IngestConfig::default()).unwrap_err();
        assert!(
            matches!(err, Error::MalformedRow { line: 3, .. }),
            "{err:?}"
        );
    }

    #[test]
    fn count_column_accepted() {
        let text = "group_id,member_id,slice_index,behavior_code,count\ng1,m1,0,justification,2\ng1,m2,3,joy,1\n";
        let c = load_str(text, &IngestConfig::default()).unwrap();
        assert_eq!(c.groups["g1"].annotation(0, 0).count("justification"), 2);
    }

    #[test]
    fn merge_gold_assigns_and_validates() {
        let text = format!("{HEADER}g1,m1,0,joy\ng1,m2,1,joy\n");
        let c = load_str(&text, &IngestConfig::default()).unwrap();
        let gold = |slice, rating| GoldRating {
            group_id: "g1".into(),
            member_id: "m1".into(),
            slice_index: slice,
            rating,
        };
        let merged = merge_gold_ratings(&c, &[gold(0, 2)]).unwrap();
        assert_eq!(merged.groups["g1"].annotation(0, 0).curiosity, Some(2));
        assert_eq!(merged.groups["g1"].annotation(0, 1).curiosity, None);
        assert!(matches!(
            merge_gold_ratings(&c, &[gold(0, 3)]),
            Err(Error::RatingOutOfRange(3))
        ));
        assert!(matches!(
            merge_gold_ratings(&c, &[gold(999, 1)]),
            Err(Error::UnknownKey { slice: 999, .. })
        ));
    }

    #[test]
    fn jsonl_equivalent_to_csv() {
        let jsonl = r#"{"group_id":"g1","member_id":"m1","slice_index":0,"behavior_code":"joy"}
{"group_id":"g1","member_id":"m2","slice_index":1,"behavior_code":"flow","count":3}
"#;
        let rows = read_annotation_jsonl(jsonl.as_bytes()).unwrap();
        let a = Corpus::from_rows(rows, &IngestConfig::default()).unwrap();
        let csv =
            "group_id,member_id,slice_index,behavior_code,count\ng1,m1,0,joy,1\ng1,m2,1,flow,3\n";
        let b = load_str(csv, &IngestConfig::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ingest_config_parses_toml() {
        let cfg: IngestConfig = toml::from_str(
            "strict_codes = false\nextra_codes = [\"gaze\", { id = \"nod\", channel = \"facial\" }]\n",
        )
        .unwrap();
        assert!(!cfg.strict_codes);
        assert_eq!(cfg.extra_codes.len(), 2);
    }

    #[test]
    fn gold_csv_round_trip() {
        let gold = vec![GoldRating {
            group_id: "g1".into(),
            member_id: "m1".into(),
            slice_index: 4,
            rating: 1,
        }];
        let mut buf = Vec::new();
        write_gold_csv(&gold, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf.clone()).unwrap(),
            "group_id,member_id,slice_index,rating\ng1,m1,4,1\n"
        );
        assert_eq!(read_gold_csv(buf.as_slice()).unwrap(), gold);
    }
}
