//! Synthetic corpora with planted couplings and curiosity episodes.
//!
//! Every member emits every behavior as an independent Bernoulli process.
//! A coupling adds its strength to the target behavior's emission
//! probability `lag` slices after each source event (clamped at 1). A
//! planted pattern overwrites a run of consecutive slices inside a tumbling
//! window with exactly the pattern's behaviors and sets the target member's
//! curiosity to the boost value on those slices.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::causality::DEFAULT_MAX_LAG;
use crate::codes::CodeRegistry;
use crate::corpus::{write_gold_csv, Corpus, Group, MAX_MEMBERS};
use crate::error::{Error, Result};
use crate::pattern::{Role, WINDOW_LEN};
use crate::rating::{write_judgments_csv, RaterJudgment};

pub const ANNOTATIONS_FILE: &str = "annotations.csv";
pub const GOLD_FILE: &str = "gold.csv";
pub const JUDGMENTS_FILE: &str = "judgments.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

const MIN_SIM_MEMBERS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Coupling {
    pub src_member: usize,
    pub src_behavior: String,
    pub tgt_member: usize,
    pub tgt_behavior: String,
    pub lag: usize,
    pub strength: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantedItem {
    pub behavior: String,
    /// Member index that shows the behavior.
    pub member: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantedPattern {
    pub target_member: usize,
    /// One slice per element.
    pub elements: Vec<Vec<PlantedItem>>,
    pub times: usize,
    #[serde(default = "default_boost")]
    pub boost: u8,
}

fn default_boost() -> u8 {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub groups: usize,
    pub members_per_group: usize,
    pub slices: usize,
    pub seed: u64,
    pub couplings: Vec<Coupling>,
    pub planted_patterns: Vec<PlantedPattern>,
    /// Per-behavior emission probability per slice.
    pub base_rates: BTreeMap<String, f64>,
    pub default_base_rate: f64,
    /// Probabilities of background curiosity 0, 1 and 2.
    pub curiosity_rates: [f64; 3],
    /// Chance that a simulated rater reports a label other than the gold one.
    pub noise: f64,
    pub raters: usize,
    /// Consecutive slices of one member rated together as a HIT.
    pub hit_slices: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            groups: 1,
            members_per_group: 3,
            slices: 180,
            seed: 0,
            couplings: Vec::new(),
            planted_patterns: Vec::new(),
            base_rates: BTreeMap::new(),
            default_base_rate: 0.05,
            curiosity_rates: [0.6, 0.3, 0.1],
            noise: 0.1,
            raters: 4,
            hit_slices: 6,
        }
    }
}

impl ScenarioConfig {
    /// TOML, or JSON when the extension is `.json`.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        if path.extension().is_some_and(|e| e == "json") {
            Ok(serde_json::from_str(&text)?)
        } else {
            Ok(toml::from_str(&text)?)
        }
    }

    pub fn validate(&self, registry: &CodeRegistry) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        let prob = |p: f64| (0.0..=1.0).contains(&p);
        let known = |b: &str| registry.lookup(b).is_some();
        let members = self.members_per_group;
        if self.groups == 0 {
            return bad("groups must be ≥ 1".into());
        }
        if !(MIN_SIM_MEMBERS..=MAX_MEMBERS).contains(&members) {
            return bad(format!(
                "members_per_group must be in {MIN_SIM_MEMBERS}..={MAX_MEMBERS}"
            ));
        }
        if self.slices < WINDOW_LEN {
            return bad(format!("slices must be ≥ {WINDOW_LEN}"));
        }
        if !prob(self.default_base_rate) || !prob(self.noise) {
            return bad("default_base_rate and noise must be probabilities".into());
        }
        for (b, &p) in &self.base_rates {
            if !known(b) {
                return bad(format!("unknown behavior `{b}` in base_rates"));
            }
            if !prob(p) {
                return bad(format!("base rate of `{b}` is not a probability"));
            }
        }
        let total: f64 = self.curiosity_rates.iter().sum();
        if !self.curiosity_rates.iter().all(|&p| prob(p)) || (total - 1.0).abs() > 1e-9 {
            return bad("curiosity_rates must be probabilities summing to 1".into());
        }
        if self.raters < 2 || self.hit_slices == 0 {
            return bad("need ≥ 2 raters and hit_slices ≥ 1".into());
        }
        for c in &self.couplings {
            if c.src_member >= members || c.tgt_member >= members {
                return bad(format!("coupling member index out of range: {c:?}"));
            }
            if !known(&c.src_behavior) || !known(&c.tgt_behavior) {
                return bad(format!("coupling names an unknown behavior: {c:?}"));
            }
            if !(1..=DEFAULT_MAX_LAG).contains(&c.lag) {
                return bad(format!("coupling lag must be in 1..={DEFAULT_MAX_LAG}"));
            }
            if !prob(c.strength) {
                return bad(format!(
                    "coupling strength must be in [0, 1]: {}",
                    c.strength
                ));
            }
        }
        let windows = self.slices / WINDOW_LEN;
        let mut needed = 0;
        for p in &self.planted_patterns {
            if p.target_member >= members {
                return bad(format!("planted target {} out of range", p.target_member));
            }
            if p.elements.is_empty()
                || p.elements.len() > WINDOW_LEN
                || p.elements.iter().any(Vec::is_empty)
            {
                return bad(format!(
                    "planted patterns need 1..={WINDOW_LEN} non-empty elements"
                ));
            }
            for item in p.elements.iter().flatten() {
                if item.member >= members || !known(&item.behavior) {
                    return bad(format!("bad planted item {item:?}"));
                }
            }
            if p.boost > 2 {
                return bad("boost must be a curiosity label (0..=2)".into());
            }
            needed += p.times;
        }
        if needed > windows {
            return bad(format!(
                "{needed} planted episodes do not fit in {windows} windows"
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedCoupling {
    pub group_id: String,
    pub src_member: String,
    pub src_behavior: String,
    pub tgt_member: String,
    pub tgt_behavior: String,
    pub lag: usize,
    pub strength: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestItem {
    pub behavior: String,
    pub role: Role,
    pub member_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantedEpisode {
    pub group_id: String,
    pub target_member: String,
    pub elements: Vec<Vec<ManifestItem>>,
    /// First slice of each injected occurrence.
    pub slice_starts: Vec<usize>,
    pub boost: u8,
}

/// What the generator planted, for comparison against analysis output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub seed: u64,
    pub slices: usize,
    pub groups: BTreeMap<String, Vec<String>>,
    pub couplings: Vec<PlantedCoupling>,
    pub patterns: Vec<PlantedEpisode>,
}

pub fn group_id(index: usize) -> String {
    format!("g{:02}", index + 1)
}

pub fn member_id(index: usize) -> String {
    format!("m{}", index + 1)
}

/// Builds a corpus with gold curiosity on every slice, plus its manifest.
pub fn generate(config: &ScenarioConfig) -> Result<(Corpus, GroundTruth)> {
    let registry = CodeRegistry::builtin();
    config.validate(&registry)?;
    let mut corpus = Corpus {
        registry,
        groups: BTreeMap::new(),
    };
    let mut truth = GroundTruth {
        seed: config.seed,
        slices: config.slices,
        groups: BTreeMap::new(),
        couplings: Vec::new(),
        patterns: Vec::new(),
    };
    for g in 0..config.groups {
        let gid = group_id(g);
        let members: Vec<String> = (0..config.members_per_group).map(member_id).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(g as u64);
        let (group, episodes) = generate_group(config, &corpus.registry, &gid, &members, &mut rng);
        corpus.groups.insert(gid.clone(), group);
        truth.groups.insert(gid.clone(), members.clone());
        truth.patterns.extend(episodes);
        truth
            .couplings
            .extend(config.couplings.iter().map(|c| PlantedCoupling {
                group_id: gid.clone(),
                src_member: members[c.src_member].clone(),
                src_behavior: c.src_behavior.clone(),
                tgt_member: members[c.tgt_member].clone(),
                tgt_behavior: c.tgt_behavior.clone(),
                lag: c.lag,
                strength: c.strength,
            }));
    }
    Ok((corpus, truth))
}

fn generate_group(
    config: &ScenarioConfig,
    registry: &CodeRegistry,
    gid: &str,
    members: &[String],
    rng: &mut ChaCha8Rng,
) -> (Group, Vec<PlantedEpisode>) {
    let codes: Vec<&str> = registry.iter().map(|(_, c)| c.id.as_str()).collect();
    let n_codes = codes.len();
    let slices = config.slices;
    let base: Vec<f64> = codes
        .iter()
        .map(|c| {
            config
                .base_rates
                .get(*c)
                .copied()
                .unwrap_or(config.default_base_rate)
        })
        .collect();
    let code_index = |b: &str| {
        codes
            .iter()
            .position(|c| *c == b)
            .expect("validated behavior")
    };
    // (src series, lag, strength) per target series.
    let mut incoming: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); members.len() * n_codes];
    for c in &config.couplings {
        let src = c.src_member * n_codes + code_index(&c.src_behavior);
        let tgt = c.tgt_member * n_codes + code_index(&c.tgt_behavior);
        incoming[tgt].push((src, c.lag, c.strength));
    }

    // events[series][t]
    let mut events = vec![vec![false; slices]; members.len() * n_codes];
    for t in 0..slices {
        for s in 0..events.len() {
            let mut p = base[s % n_codes];
            for &(src, lag, strength) in &incoming[s] {
                if t >= lag && events[src][t - lag] {
                    p += strength;
                }
            }
            events[s][t] = rng.gen::<f64>() < p.min(1.0);
        }
    }
    let mut curiosity: Vec<Vec<u8>> = (0..members.len())
        .map(|_| {
            (0..slices)
                .map(|_| draw_label(rng, &config.curiosity_rates))
                .collect()
        })
        .collect();

    let mut windows: Vec<usize> = (0..slices / WINDOW_LEN).collect();
    windows.shuffle(rng);
    let mut windows = windows.into_iter();
    let mut episodes = Vec::new();
    for p in &config.planted_patterns {
        let mut starts = Vec::with_capacity(p.times);
        for _ in 0..p.times {
            let w = windows.next().expect("validated window budget");
            let offset = rng.gen_range(0..=WINDOW_LEN - p.elements.len());
            let start = w * WINDOW_LEN + offset;
            for (e, element) in p.elements.iter().enumerate() {
                let t = start + e;
                for series in events.iter_mut() {
                    series[t] = false;
                }
                for item in element {
                    events[item.member * n_codes + code_index(&item.behavior)][t] = true;
                }
                curiosity[p.target_member][t] = p.boost;
            }
            starts.push(start);
        }
        starts.sort_unstable();
        episodes.push(PlantedEpisode {
            group_id: gid.to_owned(),
            target_member: members[p.target_member].clone(),
            elements: p
                .elements
                .iter()
                .map(|e| {
                    e.iter()
                        .map(|i| ManifestItem {
                            behavior: i.behavior.clone(),
                            role: if i.member == p.target_member {
                                Role::Own
                            } else {
                                Role::Other
                            },
                            member_id: members[i.member].clone(),
                        })
                        .collect()
                })
                .collect(),
            slice_starts: starts,
            boost: p.boost,
        });
    }

    let mut group = Group::empty(gid, members.to_vec(), slices);
    for m in 0..members.len() {
        for t in 0..slices {
            let ann = group.annotation_mut(m, t);
            ann.curiosity = Some(curiosity[m][t]);
            for (c, code) in codes.iter().enumerate() {
                if events[m * n_codes + c][t] {
                    ann.behaviors.insert((*code).to_owned(), 1);
                }
            }
        }
    }
    (group, episodes)
}

fn draw_label(rng: &mut ChaCha8Rng, rates: &[f64; 3]) -> u8 {
    let u: f64 = rng.gen();
    if u < rates[0] {
        0
    } else if u < rates[0] + rates[1] {
        1
    } else {
        2
    }
}

/// Crowd judgments around the gold labels: `raters` raters see every HIT
/// and report the gold label, or with probability `noise` a different one.
pub fn simulate_judgments(corpus: &Corpus, config: &ScenarioConfig) -> Vec<RaterJudgment> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x05ee_d0f7_a7e5);
    let mut out = Vec::new();
    for (gid, group) in &corpus.groups {
        for (m, member) in group.members.iter().enumerate() {
            for (h, first) in (0..group.slices).step_by(config.hit_slices).enumerate() {
                let hit_id = format!("{gid}-{member}-h{h:03}");
                let last = (first + config.hit_slices).min(group.slices);
                for r in 0..config.raters {
                    let rater_id = format!("r{}", r + 1);
                    let time_taken = 20.0 + rng.gen::<f64>() * 40.0;
                    for t in first..last {
                        let gold = group.annotation(m, t).curiosity.unwrap_or(0);
                        let rating = if rng.gen::<f64>() < config.noise {
                            let shift = rng.gen_range(1..=2u8);
                            (gold + shift) % 3
                        } else {
                            gold
                        };
                        out.push(RaterJudgment {
                            rater_id: rater_id.clone(),
                            group_id: gid.clone(),
                            member_id: member.clone(),
                            slice_index: t,
                            rating,
                            time_taken,
                            hit_id: hit_id.clone(),
                        });
                    }
                }
            }
        }
    }
    out
}

/// Writes `annotations.csv`, `gold.csv`, `manifest.json` and, when given,
/// `judgments.csv` into `out_dir`.
pub fn write_corpus(
    corpus: &Corpus,
    truth: &GroundTruth,
    judgments: Option<&[RaterJudgment]>,
    out_dir: &Path,
) -> Result<()> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let create = |name: &str| {
        let path = out_dir.join(name);
        File::create(&path)
            .map(BufWriter::new)
            .map_err(|e| Error::io(path, e))
    };
    corpus.write_annotations_csv(create(ANNOTATIONS_FILE)?)?;
    write_gold_csv(&corpus.gold_ratings(), create(GOLD_FILE)?)?;
    let mut manifest = serde_json::to_string_pretty(truth)?;
    manifest.push('\n');
    let path = out_dir.join(MANIFEST_FILE);
    fs::write(&path, manifest).map_err(|e| Error::io(path, e))?;
    if let Some(j) = judgments {
        write_judgments_csv(j, create(JUDGMENTS_FILE)?)?;
    }
    Ok(())
}
