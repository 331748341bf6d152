use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ar::{fit_ar, select_lag, DEFAULT_MAX_LAG};
use super::series::{build_series, is_constant, BehaviorSeries, Encoding, SeriesKey};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::stats::f_sf;

pub const DEFAULT_ALPHA: f64 = 0.001;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mediation {
    NoneTested,
    /// Past of the source adds nothing once the mediator is known.
    Full,
    /// A direct component remains beside the mediator.
    Partial,
}

impl fmt::Display for Mediation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mediation::NoneTested => "none_tested",
            Mediation::Full => "full",
            Mediation::Partial => "partial",
        })
    }
}

impl FromStr for Mediation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none_tested" => Ok(Mediation::NoneTested),
            "full" => Ok(Mediation::Full),
            "partial" => Ok(Mediation::Partial),
            _ => Err(Error::UnsupportedFormat(s.to_owned())),
        }
    }
}

/// Restricted-vs-unrestricted comparison at the selected lag.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrangerStat {
    pub lag: usize,
    /// ln(var(residual restricted) / var(residual unrestricted)).
    pub g_ratio: f64,
    pub f_stat: f64,
    pub p_value: f64,
    pub n_used: usize,
    /// Lagged regressors in the unrestricted model.
    pub k: usize,
}

/// Does the past of `y` improve prediction of `x` beyond the past of `x`
/// (and of `z`, when given)?
///
/// Both models share one lag chosen by BIC, so they share `n_used` and the
/// residual-variance ratio reduces to an RSS ratio. The F statistic is
/// `((RSS_r − RSS_u)(n − k − 1)) / (RSS_u · M)` on (M, n − k − 1) degrees of
/// freedom, with n the lag-trimmed sample and k the unrestricted regressors.
pub fn granger_test(
    y: &[f64],
    x: &[f64],
    z: Option<&[f64]>,
    max_lag: usize,
) -> Result<GrangerStat> {
    let lag = select_lag(x, Some(y), z, max_lag)?;
    let mut restricted: Vec<&[f64]> = vec![x];
    restricted.extend(z);
    let mut unrestricted = restricted.clone();
    unrestricted.push(y);

    let fit_r = fit_ar(x, &restricted, lag)?;
    let fit_u = fit_ar(x, &unrestricted, lag)?;
    let n = fit_u.n_used as f64;
    let k = fit_u.k;
    let df2 = n - k as f64 - 1.0;
    // Nested designs: RSS_r ≥ RSS_u up to rounding.
    let rss_r = fit_r.rss.max(fit_u.rss);
    let g_ratio = (rss_r / fit_u.rss).ln();
    let f_stat = (rss_r - fit_u.rss) * df2 / (fit_u.rss * lag as f64);
    let p_value = f_sf(f_stat, lag as f64, df2);
    Ok(GrangerStat {
        lag,
        g_ratio,
        f_stat,
        p_value,
        n_used: fit_u.n_used,
        k,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrangerEdge {
    pub group_id: String,
    pub source: SeriesKey,
    pub target: SeriesKey,
    pub mediator: Option<SeriesKey>,
    pub lag: usize,
    pub g_ratio: f64,
    pub f_stat: f64,
    pub p_value: f64,
    pub n_used: usize,
    pub k: usize,
    pub mediation: Mediation,
}

impl GrangerEdge {
    fn from_stat(
        group_id: &str,
        source: SeriesKey,
        target: SeriesKey,
        mediator: Option<SeriesKey>,
        s: GrangerStat,
    ) -> Self {
        let mediation = match mediator {
            None => Mediation::NoneTested,
            Some(_) if s.g_ratio <= 0.0 => Mediation::Full,
            Some(_) => Mediation::Partial,
        };
        GrangerEdge {
            group_id: group_id.to_owned(),
            source,
            target,
            mediator,
            lag: s.lag,
            g_ratio: s.g_ratio,
            f_stat: s.f_stat,
            p_value: s.p_value,
            n_used: s.n_used,
            k: s.k,
            mediation,
        }
    }

    pub fn is_interpersonal(&self) -> bool {
        self.source.member_id != self.target.member_id
    }
}

fn check_usable(s: &BehaviorSeries) -> Result<()> {
    if s.degenerate || is_constant(&s.values) {
        return Err(Error::DegenerateSeries(format!("{} is constant", s.key)));
    }
    Ok(())
}

fn check_distinct(a: &BehaviorSeries, b: &BehaviorSeries) -> Result<()> {
    if a.key == b.key || a.values == b.values {
        return Err(Error::DegenerateSeries(format!(
            "{} and {} are the same series",
            a.key, b.key
        )));
    }
    Ok(())
}

/// Pairwise test of `y → x`.
pub fn granger_pairwise(
    y: &BehaviorSeries,
    x: &BehaviorSeries,
    max_lag: usize,
) -> Result<GrangerEdge> {
    check_usable(y)?;
    check_usable(x)?;
    check_distinct(y, x)?;
    let stat = granger_test(&y.values, &x.values, None, max_lag)?;
    Ok(GrangerEdge::from_stat(
        &x.group_id,
        y.key.clone(),
        x.key.clone(),
        None,
        stat,
    ))
}

/// Conditional test of `y → x | z`; classifies the mediation by `z`.
pub fn granger_conditional(
    y: &BehaviorSeries,
    x: &BehaviorSeries,
    z: &BehaviorSeries,
    max_lag: usize,
) -> Result<GrangerEdge> {
    for s in [y, x, z] {
        check_usable(s)?;
    }
    check_distinct(y, x)?;
    check_distinct(y, z)?;
    check_distinct(x, z)?;
    let stat = granger_test(&y.values, &x.values, Some(&z.values), max_lag)?;
    Ok(GrangerEdge::from_stat(
        &x.group_id,
        y.key.clone(),
        x.key.clone(),
        Some(z.key.clone()),
        stat,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanOptions {
    pub alpha: f64,
    pub max_lag: usize,
    pub encoding: Encoding,
    /// First-difference every series before testing.
    pub difference: bool,
    /// Divide alpha by the number of pairwise tests.
    pub bonferroni: bool,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            alpha: DEFAULT_ALPHA,
            max_lag: DEFAULT_MAX_LAG,
            encoding: Encoding::Count,
            difference: false,
            bonferroni: false,
        }
    }
}

/// Tests every ordered pair of usable series in a group. Returns the
/// significant pairwise edges, then one conditional edge per significant
/// pair `y → x` and every third series `z` with significant `y → z` and
/// `z → x`. Pairs whose regressions fit exactly are skipped.
pub fn scan_group(
    corpus: &Corpus,
    group_id: &str,
    options: &ScanOptions,
) -> Result<Vec<GrangerEdge>> {
    let mut series = build_series(corpus, group_id, options.encoding)?;
    if options.difference {
        series = series.iter().map(BehaviorSeries::differenced).collect();
    }
    scan_series(&series, options)
}

/// [`scan_group`] over prepared series.
pub fn scan_series(series: &[BehaviorSeries], options: &ScanOptions) -> Result<Vec<GrangerEdge>> {
    let usable: Vec<&BehaviorSeries> = series.iter().filter(|s| !s.degenerate).collect();
    let n = usable.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect();
    let alpha = if options.bonferroni && !pairs.is_empty() {
        options.alpha / pairs.len() as f64
    } else {
        options.alpha
    };

    let tested: Vec<Option<GrangerEdge>> = pairs
        .par_iter()
        .map(|&(i, j)| skip_exact(granger_pairwise(usable[i], usable[j], options.max_lag)))
        .collect::<Result<_>>()?;

    let mut significant = vec![false; n * n];
    for (&(i, j), edge) in pairs.iter().zip(&tested) {
        if edge.as_ref().is_some_and(|e| e.p_value < alpha) {
            significant[i * n + j] = true;
        }
    }

    let triples: Vec<(usize, usize, usize)> = pairs
        .iter()
        .filter(|&&(i, j)| significant[i * n + j])
        .flat_map(|&(i, j)| {
            let sig = &significant;
            (0..n)
                .filter(move |&m| m != i && m != j && sig[i * n + m] && sig[m * n + j])
                .map(move |m| (i, j, m))
        })
        .collect();
    let mediated: Vec<Option<GrangerEdge>> = triples
        .par_iter()
        .map(|&(i, j, m)| {
            skip_exact(granger_conditional(
                usable[i],
                usable[j],
                usable[m],
                options.max_lag,
            ))
        })
        .collect::<Result<_>>()?;

    let mut edges: Vec<GrangerEdge> = tested
        .into_iter()
        .flatten()
        .filter(|e| e.p_value < alpha)
        .chain(mediated.into_iter().flatten())
        .collect();
    edges.sort_by(|a, b| {
        (&a.group_id, &a.source, &a.target, &a.mediator).cmp(&(
            &b.group_id,
            &b.source,
            &b.target,
            &b.mediator,
        ))
    });
    Ok(edges)
}

fn skip_exact(r: Result<GrangerEdge>) -> Result<Option<GrangerEdge>> {
    match r {
        Ok(e) => Ok(Some(e)),
        Err(Error::PerfectFit { .. }) | Err(Error::DegenerateSeries(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

const EDGE_HEADER: [&str; 12] = [
    "group",
    "src_member",
    "src_behavior",
    "tgt_member",
    "tgt_behavior",
    "med_member",
    "med_behavior",
    "lag",
    "g_ratio",
    "f_stat",
    "p_value",
    "mediation",
];

#[derive(Debug, Serialize, Deserialize)]
struct EdgeRecord {
    group: String,
    src_member: String,
    src_behavior: String,
    tgt_member: String,
    tgt_behavior: String,
    med_member: String,
    med_behavior: String,
    lag: usize,
    g_ratio: f64,
    f_stat: f64,
    p_value: f64,
    mediation: String,
}

pub fn write_edges_csv<W: Write>(edges: &[GrangerEdge], writer: W) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    wtr.write_record(EDGE_HEADER)?;
    for e in edges {
        let (med_member, med_behavior) = e
            .mediator
            .as_ref()
            .map_or((String::new(), String::new()), |m| {
                (m.member_id.clone(), m.behavior.clone())
            });
        wtr.serialize(EdgeRecord {
            group: e.group_id.clone(),
            src_member: e.source.member_id.clone(),
            src_behavior: e.source.behavior.clone(),
            tgt_member: e.target.member_id.clone(),
            tgt_behavior: e.target.behavior.clone(),
            med_member,
            med_behavior,
            lag: e.lag,
            g_ratio: e.g_ratio,
            f_stat: e.f_stat,
            p_value: e.p_value,
            mediation: e.mediation.to_string(),
        })?;
    }
    wtr.flush().map_err(|e| Error::io("<edges>", e))?;
    Ok(())
}

/// Reads an edge CSV. `n_used` and `k` are not part of the file and come back
/// as 0.
pub fn read_edges_csv<R: Read>(reader: R) -> Result<Vec<GrangerEdge>> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != EDGE_HEADER {
        return Err(Error::MalformedRow {
            line: 1,
            reason: format!("expected header `{}`", EDGE_HEADER.join(",")),
        });
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.deserialize::<EdgeRecord>().enumerate() {
        let rec = rec.map_err(|e| Error::MalformedRow {
            line: i as u64 + 2,
            reason: e.to_string(),
        })?;
        let mediator = (!rec.med_member.is_empty())
            .then(|| SeriesKey::new(&rec.med_member, &rec.med_behavior));
        out.push(GrangerEdge {
            group_id: rec.group,
            source: SeriesKey::new(&rec.src_member, &rec.src_behavior),
            target: SeriesKey::new(&rec.tgt_member, &rec.tgt_behavior),
            mediator,
            lag: rec.lag,
            g_ratio: rec.g_ratio,
            f_stat: rec.f_stat,
            p_value: rec.p_value,
            n_used: 0,
            k: 0,
            mediation: rec.mediation.parse()?,
        });
    }
    Ok(out)
}
