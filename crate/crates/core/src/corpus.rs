//! Rank-binned corpus studies: sampling, batch auditing and aggregation.
//!
//! A ranked list is cut into inclusive rank bins. Each bin gets its own
//! ChaCha stream derived from the study seed, which fixes a full shuffled
//! candidate order; pages are audited from the front of that order and dead
//! domains are replaced by the next candidate until the bin has enough
//! accessible pages or runs out.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::enforce;
use crate::error::{CorpusError, Error, FetchError, Result};
use crate::fetch::{self, FetchConfig};
use crate::model::{AuditReport, FeatureKind, NetworkProfile, PolicySet, ViewportConfig};

/// Inclusive rank interval, written `lo-hi`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RankBin {
    pub lo: u64,
    pub hi: u64,
}

impl RankBin {
    pub const fn new(lo: u64, hi: u64) -> Self {
        RankBin { lo, hi }
    }

    pub fn contains(&self, rank: u64) -> bool {
        (self.lo..=self.hi).contains(&rank)
    }

    pub fn label(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for RankBin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.lo, self.hi)
    }
}

impl FromStr for RankBin {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self, CorpusError> {
        let bad = || CorpusError::BadBins(format!("{s:?} is not of the form lo-hi"));
        let (lo, hi) = s.trim().split_once('-').ok_or_else(bad)?;
        let lo: u64 = lo.trim().parse().map_err(|_| bad())?;
        let hi: u64 = hi.trim().parse().map_err(|_| bad())?;
        if lo == 0 || hi < lo {
            return Err(bad());
        }
        Ok(RankBin { lo, hi })
    }
}

impl Serialize for RankBin {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for RankBin {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

pub const DEFAULT_BINS: [RankBin; 5] = [
    RankBin::new(1, 100),
    RankBin::new(101, 1_000),
    RankBin::new(1_001, 10_000),
    RankBin::new(10_001, 100_000),
    RankBin::new(100_001, 1_000_000),
];

fn default_bins() -> Vec<RankBin> {
    DEFAULT_BINS.to_vec()
}

fn default_samples() -> usize {
    100
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSpec {
    /// CSV of `rank,domain`; relative paths resolve against the study file.
    pub ranked_list: PathBuf,
    #[serde(default = "default_bins")]
    pub bins: Vec<RankBin>,
    #[serde(default = "default_samples")]
    pub samples_per_bin: usize,
    #[serde(default)]
    pub seed: u64,
}

impl CorpusSpec {
    pub fn new(ranked_list: impl Into<PathBuf>, seed: u64) -> Self {
        CorpusSpec {
            ranked_list: ranked_list.into(),
            bins: default_bins(),
            samples_per_bin: default_samples(),
            seed,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: CorpusSpec =
            toml::from_str(text).map_err(|e| CorpusError::Spec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut spec = Self::from_toml(&text)?;
        if spec.ranked_list.is_relative() {
            if let Some(dir) = path.parent() {
                spec.ranked_list = dir.join(&spec.ranked_list);
            }
        }
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.samples_per_bin == 0 {
            return Err(CorpusError::Spec(
                "samples_per_bin must be at least 1".into(),
            ));
        }
        if self.bins.is_empty() {
            return Err(CorpusError::BadBins("no bins".into()));
        }
        for pair in self.bins.windows(2) {
            if pair[1].lo <= pair[0].hi {
                return Err(CorpusError::BadBins(format!(
                    "{} overlaps or precedes {}",
                    pair[1], pair[0]
                )));
            }
        }
        Ok(())
    }

    /// Keeps only the bins listed in `only`; every one of them must exist.
    pub fn restrict_bins(&mut self, only: &[RankBin]) -> Result<(), CorpusError> {
        if let Some(missing) = only.iter().find(|b| !self.bins.contains(b)) {
            return Err(CorpusError::BadBins(format!(
                "{missing} is not a bin of this study"
            )));
        }
        self.bins.retain(|b| only.contains(b));
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RankedEntry {
    pub rank: u64,
    pub domain: String,
}

/// Reads `rank,domain` rows. A leading header row is skipped.
pub fn parse_ranked_list<R: Read>(reader: R) -> Result<Vec<RankedEntry>, CorpusError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let line = i + 1;
        if record.iter().all(str::is_empty) {
            continue;
        }
        if record.len() < 2 {
            return Err(CorpusError::RankedList {
                line,
                reason: "expected rank,domain".into(),
            });
        }
        let rank = match record[0].parse::<u64>() {
            Ok(r) => r,
            Err(_) if line == 1 => continue,
            Err(_) => {
                return Err(CorpusError::RankedList {
                    line,
                    reason: format!("rank {:?} is not a positive integer", &record[0]),
                })
            }
        };
        if record[1].is_empty() {
            return Err(CorpusError::RankedList {
                line,
                reason: "empty domain".into(),
            });
        }
        out.push(RankedEntry {
            rank,
            domain: record[1].to_owned(),
        });
    }
    Ok(out)
}

pub fn load_ranked_list(path: &Path) -> Result<Vec<RankedEntry>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_ranked_list(std::io::BufReader::new(file))?)
}

fn bin_rng(seed: u64, bin: &RankBin) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(bin.lo);
    rng
}

/// Every domain of each bin, in the seeded order sampling draws them.
pub fn sample_order(spec: &CorpusSpec, entries: &[RankedEntry]) -> BTreeMap<RankBin, Vec<String>> {
    let mut out = BTreeMap::new();
    for bin in &spec.bins {
        let mut members: Vec<&RankedEntry> =
            entries.iter().filter(|e| bin.contains(e.rank)).collect();
        members.sort_by(|a, b| a.rank.cmp(&b.rank).then_with(|| a.domain.cmp(&b.domain)));
        let mut domains: Vec<String> = members.into_iter().map(|e| e.domain.clone()).collect();
        domains.shuffle(&mut bin_rng(spec.seed, bin));
        out.insert(*bin, domains);
    }
    out
}

/// The first `samples_per_bin` domains of each bin's order.
pub fn sample_bins(
    spec: &CorpusSpec,
    entries: &[RankedEntry],
) -> Result<BTreeMap<RankBin, Vec<String>>, CorpusError> {
    let mut order = sample_order(spec, entries);
    for (bin, domains) in &mut order {
        if domains.len() < spec.samples_per_bin {
            return Err(CorpusError::BinTooSmall {
                bin: bin.label(),
                available: domains.len(),
                wanted: spec.samples_per_bin,
            });
        }
        domains.truncate(spec.samples_per_bin);
    }
    Ok(order)
}

/// The `⌈p·N/100⌉`-th smallest value.
pub fn nearest_rank(sorted: &[usize], percent: u32) -> Option<usize> {
    if sorted.is_empty() {
        return None;
    }
    let n = sorted.len();
    let k = (percent as usize * n).div_ceil(100).clamp(1, n);
    Some(sorted[k - 1])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub violations: usize,
    pub fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinAggregate {
    pub bin: RankBin,
    pub pages_audited: usize,
    pub per_feature_p90: BTreeMap<FeatureKind, usize>,
    pub per_feature_mean: BTreeMap<FeatureKind, f64>,
    pub per_feature_cdf: BTreeMap<FeatureKind, Vec<CdfPoint>>,
    pub mean_violations_per_page: f64,
}

pub fn aggregate(reports: &[AuditReport], bin: RankBin) -> Result<BinAggregate, CorpusError> {
    if reports.is_empty() {
        return Err(CorpusError::Empty);
    }
    let n = reports.len();
    let kinds: BTreeSet<FeatureKind> = reports
        .iter()
        .flat_map(|r| r.counts_per_feature.keys().copied())
        .chain(
            reports
                .iter()
                .flat_map(|r| r.violations.iter().map(|v| v.feature_kind)),
        )
        .collect();

    let mut agg = BinAggregate {
        bin,
        pages_audited: n,
        per_feature_p90: BTreeMap::new(),
        per_feature_mean: BTreeMap::new(),
        per_feature_cdf: BTreeMap::new(),
        mean_violations_per_page: reports.iter().map(|r| r.total_violations()).sum::<usize>()
            as f64
            / n as f64,
    };
    for kind in kinds {
        let mut counts: Vec<usize> = reports.iter().map(|r| r.count(kind)).collect();
        counts.sort_unstable();
        agg.per_feature_p90
            .insert(kind, nearest_rank(&counts, 90).expect("non-empty"));
        agg.per_feature_mean
            .insert(kind, counts.iter().sum::<usize>() as f64 / n as f64);
        let mut cdf: Vec<CdfPoint> = Vec::new();
        for (i, &c) in counts.iter().enumerate() {
            let point = CdfPoint {
                violations: c,
                fraction: (i + 1) as f64 / n as f64,
            };
            match cdf.last_mut() {
                Some(last) if last.violations == c => *last = point,
                _ => cdf.push(point),
            }
        }
        agg.per_feature_cdf.insert(kind, cdf);
    }
    Ok(agg)
}

/// Geometric mean of post/pre first-render ratios.
pub fn improvement_ratio(reports: &[AuditReport]) -> Option<f64> {
    if reports.is_empty() {
        return None;
    }
    let log_sum: f64 = reports
        .iter()
        .map(|r| r.first_render_estimate_s.ratio().ln())
        .sum();
    Some((log_sum / reports.len() as f64).exp())
}

/// Audits one domain of a study.
pub trait PageAuditor: Sync {
    fn audit(&self, domain: &str) -> Result<AuditReport>;
}

#[derive(Clone, Debug, PartialEq)]
pub struct AuditSettings {
    pub policy: PolicySet,
    pub viewport: ViewportConfig,
    pub network: NetworkProfile,
}

impl Default for AuditSettings {
    fn default() -> Self {
        AuditSettings {
            policy: PolicySet::all_defaults(),
            viewport: ViewportConfig::default(),
            network: NetworkProfile::default(),
        }
    }
}

/// The URL audited for a ranked-list domain.
pub fn domain_url(domain: &str) -> String {
    if domain.contains("://") {
        domain.to_owned()
    } else {
        format!("https://{domain}/")
    }
}

pub struct LiveAuditor {
    pub settings: AuditSettings,
    pub fetch: FetchConfig,
}

impl PageAuditor for LiveAuditor {
    fn audit(&self, domain: &str) -> Result<AuditReport> {
        let page = fetch::fetch_page(&domain_url(domain), &self.fetch)?;
        let s = &self.settings;
        Ok(enforce::report(
            &page.snapshot(),
            &s.policy,
            &s.viewport,
            &s.network,
        ))
    }
}

/// Audits `<dir>/<domain>/index.html`, addressed as `https://<domain>/`.
/// A domain without a directory is unreachable.
pub struct OfflineAuditor {
    pub dir: PathBuf,
    pub settings: AuditSettings,
    pub fetch: FetchConfig,
}

impl PageAuditor for OfflineAuditor {
    fn audit(&self, domain: &str) -> Result<AuditReport> {
        let index = self.dir.join(domain).join("index.html");
        if !index.is_file() {
            return Err(FetchError::Unreachable {
                url: domain_url(domain),
                reason: format!("{} does not exist", index.display()),
            }
            .into());
        }
        let page = fetch::load_local(&index, Some(&domain_url(domain)), &self.fetch)?;
        let s = &self.settings;
        Ok(enforce::report(
            &page.snapshot(),
            &s.policy,
            &s.viewport,
            &s.network,
        ))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinResult {
    pub bin: RankBin,
    /// Domains audited, in sampling order.
    pub sampled: Vec<String>,
    pub unreachable: Vec<String>,
    pub reports: Vec<AuditReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusOutput {
    pub seed: u64,
    pub samples_per_bin: usize,
    pub bins: Vec<BinResult>,
    pub aggregates: Vec<BinAggregate>,
    pub improvement_ratios: BTreeMap<RankBin, f64>,
}

/// Samples, audits and aggregates every bin of `spec`.
pub fn run_corpus(
    spec: &CorpusSpec,
    entries: &[RankedEntry],
    auditor: &dyn PageAuditor,
) -> Result<CorpusOutput> {
    spec.validate()?;
    sample_bins(spec, entries)?;
    let order = sample_order(spec, entries);

    let mut bins = Vec::new();
    for (bin, candidates) in order {
        let mut result = BinResult {
            bin,
            sampled: Vec::new(),
            unreachable: Vec::new(),
            reports: Vec::new(),
        };
        let mut next = 0;
        while result.reports.len() < spec.samples_per_bin && next < candidates.len() {
            let want = spec.samples_per_bin - result.reports.len();
            let wave = &candidates[next..(next + want).min(candidates.len())];
            next += wave.len();
            let outcomes: Vec<Result<AuditReport>> =
                wave.par_iter().map(|d| auditor.audit(d)).collect();
            for (domain, outcome) in wave.iter().zip(outcomes) {
                match outcome {
                    Ok(report) => {
                        result.sampled.push(domain.clone());
                        result.reports.push(report);
                    }
                    Err(Error::Fetch(_)) => result.unreachable.push(domain.clone()),
                    Err(e) => return Err(e),
                }
            }
        }
        bins.push(result);
    }

    let mut aggregates = Vec::new();
    let mut improvement_ratios = BTreeMap::new();
    for b in &bins {
        if b.reports.is_empty() {
            continue;
        }
        aggregates.push(aggregate(&b.reports, b.bin)?);
        improvement_ratios.insert(b.bin, improvement_ratio(&b.reports).expect("non-empty"));
    }
    Ok(CorpusOutput {
        seed: spec.seed,
        samples_per_bin: spec.samples_per_bin,
        bins,
        aggregates,
        improvement_ratios,
    })
}

/// Key-sorted, pretty-printed JSON with a trailing newline.
pub fn to_sorted_json<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value).map_err(|e| CorpusError::Spec(e.to_string()))?;
    let mut s = serde_json::to_string_pretty(&v).map_err(|e| CorpusError::Spec(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

pub fn heatmap_csv(aggregates: &[BinAggregate]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["bin", "feature", "p90"])
        .map_err(CorpusError::from)?;
    for a in aggregates {
        for (kind, p90) in &a.per_feature_p90 {
            w.write_record([a.bin.label(), kind.to_string(), p90.to_string()])
                .map_err(CorpusError::from)?;
        }
    }
    csv_text(w)
}

pub fn cdf_csv(aggregates: &[BinAggregate]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["bin", "feature", "violations", "fraction"])
        .map_err(CorpusError::from)?;
    for a in aggregates {
        for (kind, points) in &a.per_feature_cdf {
            for p in points {
                w.write_record([
                    a.bin.label(),
                    kind.to_string(),
                    p.violations.to_string(),
                    p.fraction.to_string(),
                ])
                .map_err(CorpusError::from)?;
            }
        }
    }
    csv_text(w)
}

fn csv_text(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w
        .into_inner()
        .map_err(|e| CorpusError::Spec(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub const REPORT_FILE: &str = "report.json";
pub const HEATMAP_FILE: &str = "heatmap.csv";
pub const CDF_FILE: &str = "cdf.csv";

/// Writes the report JSON, heatmap CSV and CDF CSV; returns their paths.
pub fn write_outputs(out: &CorpusOutput, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = [
        (REPORT_FILE, to_sorted_json(out)?),
        (HEATMAP_FILE, heatmap_csv(&out.aggregates)?),
        (CDF_FILE, cdf_csv(&out.aggregates)?),
    ];
    let mut paths = Vec::new();
    for (name, text) in files {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        paths.push(path);
    }
    Ok(paths)
}
