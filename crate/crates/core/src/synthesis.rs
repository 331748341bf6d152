//! Cross-group aggregation of significant edges and report rendering.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::causality::{GrangerEdge, INFLUENCE_ARROW};
use crate::codes::CodeRegistry;
use crate::error::{Error, Result};
use crate::pattern::PatternRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Intrapersonal,
    Interpersonal,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Intrapersonal => "intrapersonal",
            Relation::Interpersonal => "interpersonal",
        })
    }
}

/// Who shows the mediating behavior. When source and target are the same
/// person and so is the mediator, the shape is `SourcePerson`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MediatorShape {
    ThirdPerson,
    SourcePerson,
    TargetPerson,
}

impl fmt::Display for MediatorShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MediatorShape::ThirdPerson => "third_person",
            MediatorShape::SourcePerson => "source_person",
            MediatorShape::TargetPerson => "target_person",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct MediatorSignature {
    pub behavior: String,
    pub shape: MediatorShape,
}

/// Member-free description of an influence; edges sharing it are "similar".
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SignatureKey {
    pub source_behavior: String,
    pub target_behavior: String,
    pub relation: Relation,
    pub mediator: Option<MediatorSignature>,
}

impl SignatureKey {
    pub fn of(edge: &GrangerEdge) -> Self {
        let relation = if edge.is_interpersonal() {
            Relation::Interpersonal
        } else {
            Relation::Intrapersonal
        };
        let mediator = edge.mediator.as_ref().map(|m| {
            let shape = if m.member_id == edge.source.member_id {
                MediatorShape::SourcePerson
            } else if m.member_id == edge.target.member_id {
                MediatorShape::TargetPerson
            } else {
                MediatorShape::ThirdPerson
            };
            MediatorSignature {
                behavior: m.behavior.clone(),
                shape,
            }
        });
        SignatureKey {
            source_behavior: edge.source.behavior.clone(),
            target_behavior: edge.target.behavior.clone(),
            relation,
            mediator,
        }
    }

    /// Table notation. Direct influences read from the target's point of
    /// view, e.g. `Uncertainty (other) ⇝ Uncertainty (own)`; mediated ones
    /// label persons in order of appearance, e.g.
    /// `Argument (p1) ⇝ Surprise (p2) ⇝ Justification (p3)`.
    pub fn render(&self, registry: &CodeRegistry) -> String {
        let name = |id: &str| {
            registry
                .lookup(id)
                .map_or(id, |c| registry.get(c).display_name.as_str())
                .to_owned()
        };
        let src = name(&self.source_behavior);
        let tgt = name(&self.target_behavior);
        match &self.mediator {
            None => {
                let who = match self.relation {
                    Relation::Interpersonal => "other",
                    Relation::Intrapersonal => "own",
                };
                format!("{src} ({who}) {INFLUENCE_ARROW} {tgt} (own)")
            }
            Some(m) => {
                let (med, target) = match (self.relation, m.shape) {
                    (Relation::Intrapersonal, MediatorShape::ThirdPerson) => (2, 1),
                    (Relation::Intrapersonal, _) => (1, 1),
                    (Relation::Interpersonal, MediatorShape::ThirdPerson) => (2, 3),
                    (Relation::Interpersonal, MediatorShape::SourcePerson) => (1, 2),
                    (Relation::Interpersonal, MediatorShape::TargetPerson) => (2, 2),
                };
                format!(
                    "{src} (p1) {INFLUENCE_ARROW} {} (p{med}) {INFLUENCE_ARROW} {tgt} (p{target})",
                    name(&m.behavior)
                )
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfluenceSignature {
    #[serde(flatten)]
    pub key: SignatureKey,
    pub n_groups: usize,
    pub mean_g_ratio: f64,
    pub edges: Vec<GrangerEdge>,
}

fn edge_order(a: &GrangerEdge, b: &GrangerEdge) -> std::cmp::Ordering {
    (&a.group_id, &a.source, &a.target, &a.mediator)
        .cmp(&(&b.group_id, &b.source, &b.target, &b.mediator))
        .then(a.g_ratio.total_cmp(&b.g_ratio))
}

/// Keeps edges with `p < alpha`, groups them by [`SignatureKey`] and averages
/// their G-ratios over every matching edge. Output is sorted by mean G-ratio
/// descending, then by key.
pub fn synthesize(edges: &[GrangerEdge], alpha: f64) -> Vec<InfluenceSignature> {
    let mut buckets: BTreeMap<SignatureKey, Vec<GrangerEdge>> = BTreeMap::new();
    for e in edges.iter().filter(|e| e.p_value < alpha) {
        buckets
            .entry(SignatureKey::of(e))
            .or_default()
            .push(e.clone());
    }
    let mut out: Vec<InfluenceSignature> = buckets
        .into_iter()
        .map(|(key, mut edges)| {
            // Fixed summation order keeps the mean independent of input order.
            edges.sort_by(edge_order);
            let mean_g_ratio = edges.iter().map(|e| e.g_ratio).sum::<f64>() / edges.len() as f64;
            let n_groups = edges
                .iter()
                .map(|e| &e.group_id)
                .collect::<BTreeSet<_>>()
                .len();
            InfluenceSignature {
                key,
                n_groups,
                mean_g_ratio,
                edges,
            }
        })
        .collect();
    out.sort_by(|a, b| {
        b.mean_g_ratio
            .total_cmp(&a.mean_g_ratio)
            .then_with(|| a.key.cmp(&b.key))
    });
    out
}

/// Significant edge counts. Mediated (conditional) edges are tallied apart
/// from the pairwise relation classes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Census {
    pub interpersonal: usize,
    pub intrapersonal: usize,
    pub mediated: usize,
}

pub fn influence_census(edges: &[GrangerEdge], alpha: f64) -> Census {
    let mut c = Census::default();
    for e in edges.iter().filter(|e| e.p_value < alpha) {
        match (&e.mediator, e.is_interpersonal()) {
            (Some(_), _) => c.mediated += 1,
            (None, true) => c.interpersonal += 1,
            (None, false) => c.intrapersonal += 1,
        }
    }
    c
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Table,
    Json,
    Csv,
}

impl ReportFormat {
    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::Table => "txt",
            ReportFormat::Json => "json",
            ReportFormat::Csv => "csv",
        }
    }
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "table" => Ok(ReportFormat::Table),
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            _ => Err(Error::UnsupportedFormat(s.to_owned())),
        }
    }
}

#[derive(Serialize)]
struct JsonSignature<'a> {
    notation: String,
    #[serde(flatten)]
    signature: &'a InfluenceSignature,
}

#[derive(Serialize)]
struct JsonReport<'a> {
    patterns: &'a [PatternRecord],
    direct: Vec<JsonSignature<'a>>,
    mediated: Vec<JsonSignature<'a>>,
    census: &'a Census,
}

/// Renders the three report sections: curiosity patterns, direct
/// influences and mediated influences, followed by the edge census.
///
/// The CSV form is three header-led blocks separated by blank lines.
pub fn render_report(
    patterns: &[PatternRecord],
    signatures: &[InfluenceSignature],
    census: &Census,
    registry: &CodeRegistry,
    format: ReportFormat,
) -> Result<String> {
    let (mediated, direct): (Vec<&InfluenceSignature>, Vec<&InfluenceSignature>) =
        signatures.iter().partition(|s| s.key.mediator.is_some());
    match format {
        ReportFormat::Table => Ok(render_table(patterns, &direct, &mediated, census, registry)),
        ReportFormat::Json => {
            let doc = JsonReport {
                patterns,
                direct: with_notation(&direct, registry),
                mediated: with_notation(&mediated, registry),
                census,
            };
            let mut s = serde_json::to_string_pretty(&doc)?;
            s.push('\n');
            Ok(s)
        }
        ReportFormat::Csv => render_csv(patterns, &direct, &mediated, census),
    }
}

fn with_notation<'a>(
    rows: &[&'a InfluenceSignature],
    registry: &CodeRegistry,
) -> Vec<JsonSignature<'a>> {
    rows.iter()
        .map(|&s| JsonSignature {
            notation: s.key.render(registry),
            signature: s,
        })
        .collect()
}

fn render_table(
    patterns: &[PatternRecord],
    direct: &[&InfluenceSignature],
    mediated: &[&InfluenceSignature],
    census: &Census,
    registry: &CodeRegistry,
) -> String {
    let mut out = String::new();
    out.push_str("== Curiosity patterns ==\n");
    if patterns.is_empty() {
        out.push_str("(none)\n");
    }
    for p in patterns {
        let _ = writeln!(out, "{}/{}  {}", p.group_id, p.target_member, p.notation);
    }
    for (title, rows) in [
        ("Direct influences", direct),
        ("Mediated influences", mediated),
    ] {
        let _ = writeln!(out, "\n== {title} ==");
        if rows.is_empty() {
            out.push_str("(none)\n");
            continue;
        }
        let notes: Vec<String> = rows.iter().map(|s| s.key.render(registry)).collect();
        let width = notes.iter().map(|n| n.chars().count()).max().unwrap_or(0);
        let _ = writeln!(out, "{:<width$}  groups  mean G", "influence");
        for (s, note) in rows.iter().zip(&notes) {
            let pad = width - note.chars().count();
            let _ = writeln!(
                out,
                "{note}{}  {:>6}  {:.3}",
                " ".repeat(pad),
                s.n_groups,
                s.mean_g_ratio
            );
        }
    }
    let _ = writeln!(
        out,
        "\n== Census ==\ninterpersonal {}\nintrapersonal {}\nmediated {}",
        census.interpersonal, census.intrapersonal, census.mediated
    );
    out
}

fn render_csv(
    patterns: &[PatternRecord],
    direct: &[&InfluenceSignature],
    mediated: &[&InfluenceSignature],
    census: &Census,
) -> Result<String> {
    let block = |write: &dyn Fn(&mut csv::Writer<Vec<u8>>) -> Result<()>| -> Result<String> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        write(&mut w)?;
        let bytes = w
            .into_inner()
            .map_err(|e| Error::io("<report>", e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    };

    let pattern_block = block(&|w| {
        w.write_record([
            "group",
            "target_member",
            "overall_utility",
            "support",
            "notation",
        ])?;
        for p in patterns {
            w.write_record([
                p.group_id.as_str(),
                &p.target_member,
                &p.overall_utility.to_string(),
                &p.support.to_string(),
                &p.notation,
            ])?;
        }
        Ok(())
    })?;
    let sig_block = block(&|w| {
        w.write_record([
            "src_behavior",
            "tgt_behavior",
            "relation",
            "med_behavior",
            "med_shape",
            "n_groups",
            "n_edges",
            "mean_g_ratio",
        ])?;
        for s in direct.iter().chain(mediated) {
            let (mb, ms) = s
                .key
                .mediator
                .as_ref()
                .map_or((String::new(), String::new()), |m| {
                    (m.behavior.clone(), m.shape.to_string())
                });
            w.write_record([
                s.key.source_behavior.as_str(),
                &s.key.target_behavior,
                &s.key.relation.to_string(),
                &mb,
                &ms,
                &s.n_groups.to_string(),
                &s.edges.len().to_string(),
                &s.mean_g_ratio.to_string(),
            ])?;
        }
        Ok(())
    })?;
    let census_block = block(&|w| {
        w.write_record(["interpersonal", "intrapersonal", "mediated"])?;
        w.write_record([
            census.interpersonal.to_string(),
            census.intrapersonal.to_string(),
            census.mediated.to_string(),
        ])?;
        Ok(())
    })?;
    Ok(format!("{pattern_block}\n{sig_block}\n{census_block}"))
}
