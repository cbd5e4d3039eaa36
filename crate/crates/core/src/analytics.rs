//! Store-vetting analytics over cluster assignments and corpus metadata:
//! infringing clusters, republishing, repeat offenders, survival curves,
//! label feature tables and detection-report triage.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::cluster::ClusterAssignment;
use crate::manifest::{FlatManifest, EXCLUDED_KEYS};
use crate::static_tracer::ApiCall;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum VettingLabel {
    #[default]
    None,
    Malware,
    PolicyViolation,
    MinorPolicyViolation,
}

impl VettingLabel {
    pub fn is_vetted(self) -> bool {
        self != VettingLabel::None
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtensionRecord {
    pub id: String,
    pub version: String,
    pub publisher: String,
    pub user_count: u64,
    pub publish_date: NaiveDate,
    pub version_release_date: NaiveDate,
    #[serde(default)]
    pub removal_date: Option<NaiveDate>,
    #[serde(default)]
    pub vetting_label: VettingLabel,
    pub name: String,
    #[serde(default)]
    pub sha256: Option<String>,
}

/// Extension ids are 32 characters from `a`..=`p`.
pub fn is_valid_id(id: &str) -> bool {
    id.len() == 32 && id.bytes().all(|b| (b'a'..=b'p').contains(&b))
}

impl ExtensionRecord {
    pub fn is_published(&self) -> bool {
        self.removal_date.is_none()
    }

    /// First violated invariant, if any.
    pub fn violation(&self) -> Option<&'static str> {
        if !is_valid_id(&self.id) {
            return Some("id must be 32 characters in a-p");
        }
        if self.removal_date.is_some_and(|r| r < self.publish_date) {
            return Some("removal_date precedes publish_date");
        }
        if self.vetting_label.is_vetted() && self.removal_date.is_none() {
            return Some("vetted record without removal_date");
        }
        if let Some(h) = &self.sha256 {
            if h.len() != 64 || !h.bytes().all(|b| b.is_ascii_hexdigit()) {
                return Some("sha256 must be 64 hex digits");
            }
        }
        None
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalyticsError {
    #[error("no record for clustered id {0}")]
    MissingRecord(String),
    #[error("empty input")]
    EmptyInput,
    #[error("no deaths observed in either group")]
    NoDeaths,
    #[error("detection report line {line}: {message}")]
    SchemaError { line: usize, message: String },
}

impl AnalyticsError {
    pub fn name(&self) -> &'static str {
        match self {
            AnalyticsError::MissingRecord(_) => "MissingRecord",
            AnalyticsError::EmptyInput => "EmptyInput",
            AnalyticsError::NoDeaths => "NoDeaths",
            AnalyticsError::SchemaError { .. } => "SchemaError",
        }
    }
}

// ---------------------------------------------------------------------------
// Infringing clusters

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfringingClusterStats {
    pub cluster: usize,
    pub size: usize,
    pub vetted_count: usize,
    pub unpublished_count: usize,
    pub published_count: usize,
    pub detection_rate: f64,
    pub republished_count: usize,
    pub publisher_count: usize,
    pub user_sum: u64,
    pub members: Vec<String>,
}

/// Members published strictly after the earliest vetted member.
pub fn count_republished(cluster: &[&ExtensionRecord]) -> usize {
    let Some(t0) = cluster.iter().filter(|r| r.vetting_label.is_vetted()).map(|r| r.publish_date).min() else {
        return 0;
    };
    cluster.iter().filter(|r| r.publish_date > t0).count()
}

pub fn find_infringing_clusters(
    assignment: &ClusterAssignment,
    records: &HashMap<String, ExtensionRecord>,
) -> Result<Vec<InfringingClusterStats>, AnalyticsError> {
    let mut out = Vec::new();
    for (cluster, ids) in assignment.clusters() {
        let members: Vec<&ExtensionRecord> = ids
            .iter()
            .map(|id| records.get(id.as_str()).ok_or_else(|| AnalyticsError::MissingRecord(id.to_string())))
            .collect::<Result<_, _>>()?;
        let vetted = members.iter().filter(|r| r.vetting_label.is_vetted()).count();
        if members.len() < 2 || vetted == 0 {
            continue;
        }
        let published = members.iter().filter(|r| r.is_published()).count();
        out.push(InfringingClusterStats {
            cluster,
            size: members.len(),
            vetted_count: vetted,
            unpublished_count: members.len() - vetted - published,
            published_count: published,
            detection_rate: vetted as f64 / members.len() as f64,
            republished_count: count_republished(&members),
            publisher_count: members.iter().map(|r| r.publisher.as_str()).collect::<BTreeSet<_>>().len(),
            user_sum: members.iter().map(|r| r.user_count).sum(),
            members: members.iter().map(|r| r.id.clone()).collect(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OffenderStats {
    pub vetted_count: usize,
    pub published_infringing_count: usize,
}

/// Publishers with two or more vetted records, with how many of their
/// infringing-cluster members are still published.
pub fn find_repeat_offenders(
    records: &[ExtensionRecord],
    infringing: &[InfringingClusterStats],
) -> BTreeMap<String, OffenderStats> {
    let in_cluster: BTreeSet<&str> = infringing.iter().flat_map(|c| c.members.iter().map(String::as_str)).collect();
    let mut by_publisher: BTreeMap<&str, OffenderStats> = BTreeMap::new();
    for r in records {
        let e = by_publisher
            .entry(r.publisher.as_str())
            .or_insert(OffenderStats { vetted_count: 0, published_infringing_count: 0 });
        if r.vetting_label.is_vetted() {
            e.vetted_count += 1;
        } else if r.is_published() && in_cluster.contains(r.id.as_str()) {
            e.published_infringing_count += 1;
        }
    }
    by_publisher.into_iter().filter(|(_, s)| s.vetted_count >= 2).map(|(p, s)| (p.to_string(), s)).collect()
}

// ---------------------------------------------------------------------------
// Survival

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurvivalObservation {
    pub duration_days: u32,
    /// True when removal was observed; false for right-censored lifetimes.
    pub event: bool,
}

impl SurvivalObservation {
    pub fn death(duration_days: u32) -> Self {
        SurvivalObservation { duration_days, event: true }
    }

    pub fn censored(duration_days: u32) -> Self {
        SurvivalObservation { duration_days, event: false }
    }
}

fn day_span(from: NaiveDate, to: NaiveDate) -> u32 {
    (to - from).num_days().max(0) as u32
}

/// Lifetime from version release to takedown. Still-published records are
/// censored at `crawl_end`; voluntary unpublishing is censored at its removal.
pub fn lifetime(record: &ExtensionRecord, crawl_end: NaiveDate) -> SurvivalObservation {
    let end = record.removal_date.unwrap_or(crawl_end);
    SurvivalObservation { duration_days: day_span(record.version_release_date, end), event: record.vetting_label.is_vetted() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KmStep {
    pub t: u32,
    pub survival: f64,
    pub at_risk: usize,
    pub deaths: usize,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KmCurve {
    pub steps: Vec<KmStep>,
    pub median: Option<u32>,
}

const Z_95: f64 = 1.959_963_984_540_054;

impl KmCurve {
    /// Survival just after time `t` (right-continuous step function).
    pub fn survival_at(&self, t: u32) -> f64 {
        self.steps.iter().take_while(|s| s.t <= t).last().map_or(1.0, |s| s.survival)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,survival,at_risk,deaths\n");
        for st in &self.steps {
            let _ = writeln!(s, "{},{},{},{}", st.t, st.survival, st.at_risk, st.deaths);
        }
        s
    }

    /// Plot-ready curve starting at (0, 1) with pointwise 95% bands.
    pub fn to_plot_csv(&self) -> String {
        let mut s = String::from("t,survival,ci_low,ci_high\n");
        if self.steps.first().is_none_or(|st| st.t > 0) {
            s.push_str("0,1,1,1\n");
        }
        for st in &self.steps {
            let _ = writeln!(s, "{},{},{},{}", st.t, st.survival, st.ci_low, st.ci_high);
        }
        s
    }
}

/// Product-limit estimator. Observations censored at a death time are still
/// at risk at that time.
pub fn km_estimate(obs: &[SurvivalObservation]) -> Result<KmCurve, AnalyticsError> {
    if obs.is_empty() {
        return Err(AnalyticsError::EmptyInput);
    }
    let death_times: BTreeSet<u32> = obs.iter().filter(|o| o.event).map(|o| o.duration_days).collect();
    let mut s = 1.0;
    let mut greenwood = 0.0;
    let mut steps = Vec::with_capacity(death_times.len());
    for t in death_times {
        let n = obs.iter().filter(|o| o.duration_days >= t).count();
        let d = obs.iter().filter(|o| o.event && o.duration_days == t).count();
        s *= 1.0 - d as f64 / n as f64;
        if d < n {
            greenwood += d as f64 / (n as f64 * (n - d) as f64);
        }
        let (ci_low, ci_high) = loglog_band(s, greenwood);
        steps.push(KmStep { t, survival: s, at_risk: n, deaths: d, ci_low, ci_high });
    }
    let median = steps.iter().find(|st| st.survival <= 0.5).map(|st| st.t);
    Ok(KmCurve { steps, median })
}

/// Exponential Greenwood interval on log(-log S).
fn loglog_band(s: f64, greenwood: f64) -> (f64, f64) {
    if s <= 0.0 || s >= 1.0 {
        return (s, s);
    }
    let ln_s = s.ln();
    let se = greenwood.sqrt() / ln_s.abs();
    let theta = (-ln_s).ln();
    ((-(theta + Z_95 * se).exp()).exp(), (-(theta - Z_95 * se).exp()).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRank {
    pub chi_square: f64,
    pub p_value: f64,
}

pub fn logrank_test(a: &[SurvivalObservation], b: &[SurvivalObservation]) -> Result<LogRank, AnalyticsError> {
    if a.is_empty() || b.is_empty() {
        return Err(AnalyticsError::EmptyInput);
    }
    let times: BTreeSet<u32> = a.iter().chain(b).filter(|o| o.event).map(|o| o.duration_days).collect();
    if times.is_empty() {
        return Err(AnalyticsError::NoDeaths);
    }
    let at_risk = |g: &[SurvivalObservation], t: u32| g.iter().filter(|o| o.duration_days >= t).count() as f64;
    let deaths = |g: &[SurvivalObservation], t: u32| g.iter().filter(|o| o.event && o.duration_days == t).count() as f64;
    let (mut diff, mut var) = (0.0, 0.0);
    for t in times {
        let (na, nb) = (at_risk(a, t), at_risk(b, t));
        let (da, d) = (deaths(a, t), deaths(a, t) + deaths(b, t));
        let n = na + nb;
        diff += da - d * na / n;
        if n > 1.0 {
            var += d * (na / n) * (1.0 - na / n) * (n - d) / (n - 1.0);
        }
    }
    if var <= 0.0 {
        return Ok(LogRank { chi_square: 0.0, p_value: 1.0 });
    }
    let chi_square = diff * diff / var;
    Ok(LogRank { chi_square, p_value: chi2_sf(chi_square, 1.0) })
}

/// Upper tail of the chi-square distribution with `dof` degrees of freedom.
pub fn chi2_sf(x: f64, dof: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    gamma_q(dof / 2.0, x / 2.0)
}

fn ln_gamma(x: f64) -> f64 {
    // Lanczos, g = 7, n = 9.
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let t = x + 7.5;
    let sum = C[1..].iter().enumerate().fold(C[0], |acc, (i, c)| acc + c / (x + i as f64 + 1.0));
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + sum.ln()
}

/// Regularized upper incomplete gamma Q(a, x).
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let prefix = (-x + a * x.ln() - ln_gamma(a)).exp();
    if x < a + 1.0 {
        // Series for P(a, x).
        let (mut term, mut sum, mut ap) = (1.0 / a, 1.0 / a, a);
        for _ in 0..1000 {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * 1e-16 {
                break;
            }
        }
        (1.0 - sum * prefix).clamp(0.0, 1.0)
    } else {
        // Modified Lentz continued fraction for Q(a, x).
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..1000 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        (prefix * h).clamp(0.0, 1.0)
    }
}

// ---------------------------------------------------------------------------
// Label feature table

pub const NTE_KEYWORDS: [&str; 3] = ["theme", "wallpaper", "new tab"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum FeatureGroup {
    Malware,
    PolicyViolation,
    MinorPolicyViolation,
    Nte,
}

impl FeatureGroup {
    pub const ALL: [FeatureGroup; 4] =
        [FeatureGroup::Malware, FeatureGroup::PolicyViolation, FeatureGroup::MinorPolicyViolation, FeatureGroup::Nte];

    pub fn short(self) -> &'static str {
        match self {
            FeatureGroup::Malware => "M",
            FeatureGroup::PolicyViolation => "PV",
            FeatureGroup::MinorPolicyViolation => "MPV",
            FeatureGroup::Nte => "NTE",
        }
    }
}

/// Group of a vetted record: the NTE keyword match wins over the label.
pub fn feature_group(record: &ExtensionRecord, nte_keywords: &[&str]) -> Option<FeatureGroup> {
    let name = record.name.to_lowercase();
    match record.vetting_label {
        VettingLabel::None => None,
        _ if nte_keywords.iter().any(|k| name.contains(&k.to_lowercase())) => Some(FeatureGroup::Nte),
        VettingLabel::Malware => Some(FeatureGroup::Malware),
        VettingLabel::PolicyViolation => Some(FeatureGroup::PolicyViolation),
        VettingLabel::MinorPolicyViolation => Some(FeatureGroup::MinorPolicyViolation),
    }
}

/// Table vocabulary of one extension: `mvN`, top-level manifest keys,
/// permission names and API call paths.
pub fn table_features(manifest: &FlatManifest, calls: &[ApiCall]) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    out.insert(format!("mv{}", manifest.manifest_version));
    for (k, v) in &manifest.pairs {
        let top = k.split('.').next().unwrap_or(k);
        if top == "manifest_version" || EXCLUDED_KEYS.contains(&top) {
            continue;
        }
        out.insert(top.to_string());
        if matches!(top, "permissions" | "optional_permissions") && !v.contains("://") && v != "<all_urls>" {
            out.insert(v.clone());
        }
    }
    out.extend(calls.iter().map(|c| c.path.clone()));
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFeature {
    pub feature: String,
    pub rank: usize,
    pub count: usize,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelFeatureTable {
    pub group_sizes: BTreeMap<FeatureGroup, usize>,
    pub groups: BTreeMap<FeatureGroup, Vec<RankedFeature>>,
}

impl LabelFeatureTable {
    pub fn lookup(&self, group: FeatureGroup, feature: &str) -> Option<&RankedFeature> {
        self.groups.get(&group)?.iter().find(|r| r.feature == feature)
    }

    /// Wide table over the union of each group's top `top` features, ordered
    /// by best rank in any group.
    pub fn to_csv(&self, top: usize) -> String {
        let mut rows: BTreeMap<&str, usize> = BTreeMap::new();
        for ranked in self.groups.values() {
            for r in ranked.iter().take(top) {
                let best = rows.entry(&r.feature).or_insert(r.rank);
                *best = (*best).min(r.rank);
            }
        }
        let mut rows: Vec<(&str, usize)> = rows.into_iter().collect();
        rows.sort_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(b.0)));

        let mut s = String::from("feature");
        for g in FeatureGroup::ALL {
            let _ = write!(s, ",{0}_rank,{0}_pct", g.short());
        }
        s.push('\n');
        for (feature, _) in rows {
            s.push_str(&csv_field(feature));
            for g in FeatureGroup::ALL {
                match self.lookup(g, feature) {
                    Some(r) => {
                        let _ = write!(s, ",{},{:.1}", r.rank, r.fraction * 100.0);
                    }
                    None => s.push_str(",,"),
                }
            }
            s.push('\n');
        }
        s
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn label_feature_table(
    records: &[ExtensionRecord],
    features: &HashMap<String, BTreeSet<String>>,
    nte_keywords: &[&str],
) -> LabelFeatureTable {
    let empty = BTreeSet::new();
    let mut sizes: BTreeMap<FeatureGroup, usize> = FeatureGroup::ALL.iter().map(|&g| (g, 0)).collect();
    let mut counts: BTreeMap<FeatureGroup, BTreeMap<&str, usize>> = BTreeMap::new();
    for r in records {
        let Some(g) = feature_group(r, nte_keywords) else { continue };
        *sizes.get_mut(&g).expect("all groups present") += 1;
        let c = counts.entry(g).or_default();
        for f in features.get(&r.id).unwrap_or(&empty) {
            *c.entry(f.as_str()).or_default() += 1;
        }
    }
    let groups = FeatureGroup::ALL
        .iter()
        .map(|&g| {
            let n = sizes[&g];
            let mut ranked: Vec<(&str, usize)> = counts.remove(&g).unwrap_or_default().into_iter().collect();
            ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
            let ranked = ranked
                .into_iter()
                .enumerate()
                .map(|(i, (f, c))| RankedFeature { feature: f.to_string(), rank: i + 1, count: c, fraction: c as f64 / n as f64 })
                .collect();
            (g, ranked)
        })
        .collect();
    LabelFeatureTable { group_sizes: sizes, groups }
}

// ---------------------------------------------------------------------------
// Detection-report triage

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EngineCategory {
    Malicious,
    Suspicious,
    Undetected,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineVerdict {
    pub name: String,
    pub category: EngineCategory,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionReport {
    pub sha256: String,
    pub found: bool,
    pub engines: Vec<EngineVerdict>,
    pub suggested_label: Option<String>,
}

impl DetectionReport {
    pub fn flagged(&self) -> usize {
        self.engines.iter().filter(|e| e.category != EngineCategory::Undetected).count()
    }

    pub fn detection_ratio(&self) -> f64 {
        if self.engines.is_empty() {
            0.0
        } else {
            self.flagged() as f64 / self.engines.len() as f64
        }
    }
}

/// Parses a JSON Lines report file keyed by lowercase sha256. Blank lines are skipped.
pub fn parse_detection_reports(text: &str) -> Result<HashMap<String, DetectionReport>, AnalyticsError> {
    let mut out = HashMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let schema = |message: String| AnalyticsError::SchemaError { line: i + 1, message };
        let mut r: DetectionReport = serde_json::from_str(line).map_err(|e| schema(e.to_string()))?;
        if r.sha256.len() != 64 || !r.sha256.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(schema(format!("sha256 is not 64 hex digits: {:?}", r.sha256)));
        }
        r.sha256.make_ascii_lowercase();
        out.insert(r.sha256.clone(), r);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TriageCategory {
    NotFound,
    Clean,
    Malicious,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyRow {
    pub family: String,
    pub count: usize,
    pub max_detection: f64,
    pub avg_detection: f64,
    pub user_sum: u64,
    pub lifetime_from: NaiveDate,
    pub lifetime_to: NaiveDate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Triage {
    pub categories: BTreeMap<String, TriageCategory>,
    pub families: Vec<FamilyRow>,
}

impl Triage {
    pub fn families_csv(&self) -> String {
        let mut s = String::from("family,count,max_detection,avg_detection,user_sum,lifetime_from,lifetime_to\n");
        for f in &self.families {
            let _ = writeln!(
                s,
                "{},{},{:.4},{:.4},{},{},{}",
                csv_field(&f.family),
                f.count,
                f.max_detection,
                f.avg_detection,
                f.user_sum,
                f.lifetime_from,
                f.lifetime_to
            );
        }
        s
    }
}

/// A report with `found: false` is treated like a missing report.
pub fn triage_detection_reports(records: &[ExtensionRecord], reports: &HashMap<String, DetectionReport>) -> Triage {
    let mut categories = BTreeMap::new();
    let mut families: BTreeMap<String, Vec<(&ExtensionRecord, f64)>> = BTreeMap::new();
    for r in records {
        let report = r.sha256.as_ref().and_then(|h| reports.get(&h.to_ascii_lowercase())).filter(|rep| rep.found);
        let cat = match report {
            None => TriageCategory::NotFound,
            Some(rep) if rep.flagged() == 0 => TriageCategory::Clean,
            Some(rep) => {
                let family = rep.suggested_label.clone().unwrap_or_else(|| "N/A".into());
                families.entry(family).or_default().push((r, rep.detection_ratio()));
                TriageCategory::Malicious
            }
        };
        categories.insert(r.id.clone(), cat);
    }
    let mut families: Vec<FamilyRow> = families
        .into_iter()
        .map(|(family, members)| {
            let ratios = members.iter().map(|m| m.1);
            let dates = members.iter().map(|m| m.0.version_release_date);
            FamilyRow {
                count: members.len(),
                max_detection: ratios.clone().fold(0.0, f64::max),
                avg_detection: ratios.sum::<f64>() / members.len() as f64,
                user_sum: members.iter().map(|m| m.0.user_count).sum(),
                lifetime_from: dates.clone().min().expect("non-empty family"),
                lifetime_to: dates.max().expect("non-empty family"),
                family,
            }
        })
        .collect();
    families.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.family.cmp(&b.family)));
    Triage { categories, families }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn date(s: &str) -> NaiveDate {
        s.parse().unwrap()
    }

    fn id(n: usize) -> String {
        let mut s: Vec<u8> = vec![b'a'; 32];
        let mut k = n;
        for b in s.iter_mut().rev() {
            *b = b'a' + (k % 16) as u8;
            k /= 16;
        }
        String::from_utf8(s).unwrap()
    }

    fn rec(n: usize, label: VettingLabel, published: &str, removed: Option<&str>) -> ExtensionRecord {
        ExtensionRecord {
            id: id(n),
            version: "1.0".into(),
            publisher: format!("pub{n}"),
            user_count: 10 * n as u64,
            publish_date: date(published),
            version_release_date: date(published),
            removal_date: removed.map(date),
            vetting_label: label,
            name: format!("ext {n}"),
            sha256: None,
        }
    }

    #[test]
    fn record_invariants() {
        assert_eq!(rec(1, VettingLabel::None, "2020-01-01", None).violation(), None);
        assert!(rec(1, VettingLabel::Malware, "2020-01-01", None).violation().is_some());
        assert!(rec(1, VettingLabel::None, "2020-01-02", Some("2020-01-01")).violation().is_some());
        assert!(is_valid_id("mngkjbegjgngjmbpojnmkngelecdodfm"));
        assert!(!is_valid_id("mngkjbegjgngjmbpojnmkngelecdodfz"));
        let line = r#"{"id":"mngkjbegjgngjmbpojnmkngelecdodfm","version":"2.1","publisher":"p","user_count":5,
            "publish_date":"2021-03-04","version_release_date":"2021-05-01","removal_date":null,
            "vetting_label":"minor_policy_violation","name":"x","sha256":null}"#;
        let r: ExtensionRecord = serde_json::from_str(line).unwrap();
        assert_eq!(r.vetting_label, VettingLabel::MinorPolicyViolation);
        assert!(r.violation().is_some());
    }

    #[test]
    fn republished_counts() {
        let v = rec(0, VettingLabel::Malware, "2020-01-01", Some("2020-06-01"));
        let a = rec(1, VettingLabel::None, "2021-01-01", None);
        let b = rec(2, VettingLabel::None, "2022-01-01", None);
        assert_eq!(count_republished(&[&v, &a, &b]), 2);
        let same: Vec<_> = (0..3).map(|i| rec(i, VettingLabel::Malware, "2020-01-01", Some("2020-02-01"))).collect();
        assert_eq!(count_republished(&same.iter().collect::<Vec<_>>()), 0);
        // Two vetted (2019, 2021) and one other (2020): t0 = 2019, the 2020 and 2021 members count.
        let v1 = rec(0, VettingLabel::Malware, "2019-01-01", Some("2019-06-01"));
        let v2 = rec(1, VettingLabel::PolicyViolation, "2021-01-01", Some("2021-06-01"));
        let o = rec(2, VettingLabel::None, "2020-01-01", None);
        assert_eq!(count_republished(&[&v1, &v2, &o]), 2);
    }

    fn assignment(labels: &[Option<usize>]) -> ClusterAssignment {
        ClusterAssignment { ids: (0..labels.len()).map(id).collect(), labels: labels.to_vec() }
    }

    #[test]
    fn infringing_cluster_partition() {
        let records: Vec<ExtensionRecord> = vec![
            rec(0, VettingLabel::Malware, "2020-01-01", Some("2020-03-01")),
            rec(1, VettingLabel::None, "2020-02-01", None),
            rec(2, VettingLabel::None, "2020-02-01", Some("2020-04-01")),
            rec(3, VettingLabel::None, "2020-01-01", None),
            rec(4, VettingLabel::None, "2020-01-01", None),
            rec(5, VettingLabel::Malware, "2020-01-01", Some("2020-02-01")),
        ];
        let map: HashMap<String, ExtensionRecord> = records.iter().map(|r| (r.id.clone(), r.clone())).collect();
        let a = assignment(&[Some(0), Some(0), Some(0), Some(1), Some(1), None]);
        let stats = find_infringing_clusters(&a, &map).unwrap();
        assert_eq!(stats.len(), 1);
        let s = &stats[0];
        assert_eq!((s.size, s.vetted_count, s.unpublished_count, s.published_count), (3, 1, 1, 1));
        assert!((s.detection_rate - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!((s.republished_count, s.publisher_count, s.user_sum), (2, 3, 30));

        let mut partial = map.clone();
        partial.remove(&id(3));
        assert_eq!(find_infringing_clusters(&a, &partial), Err(AnalyticsError::MissingRecord(id(3))));
    }

    #[test]
    fn repeat_offenders() {
        let mut rs = vec![
            rec(0, VettingLabel::Malware, "2020-01-01", Some("2020-03-01")),
            rec(1, VettingLabel::PolicyViolation, "2020-01-01", Some("2020-03-01")),
            rec(2, VettingLabel::None, "2020-01-01", None),
            rec(3, VettingLabel::Malware, "2020-01-01", Some("2020-03-01")),
        ];
        for r in &mut rs[..3] {
            r.publisher = "repeat".into();
        }
        let clusters = vec![InfringingClusterStats {
            cluster: 0,
            size: 3,
            vetted_count: 2,
            unpublished_count: 0,
            published_count: 1,
            detection_rate: 2.0 / 3.0,
            republished_count: 0,
            publisher_count: 1,
            user_sum: 0,
            members: vec![id(0), id(1), id(2)],
        }];
        let off = find_repeat_offenders(&rs, &clusters);
        assert_eq!(off.len(), 1);
        assert_eq!(off["repeat"], OffenderStats { vetted_count: 2, published_infringing_count: 1 });
    }

    #[test]
    fn km_worked_examples() {
        use SurvivalObservation as O;
        let c = km_estimate(&[O::death(2), O::death(4), O::censored(5)]).unwrap();
        assert_eq!(c.steps.len(), 2);
        assert!((c.survival_at(2) - 2.0 / 3.0).abs() < 1e-15);
        assert!((c.survival_at(4) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(c.median, Some(4));
        assert_eq!(c.survival_at(1), 1.0);

        let c = km_estimate(&[O::censored(3), O::censored(9)]).unwrap();
        assert!(c.steps.is_empty());
        assert_eq!((c.survival_at(100), c.median), (1.0, None));

        let c = km_estimate(&[O::death(7); 4]).unwrap();
        assert_eq!((c.survival_at(7), c.median), (0.0, Some(7)));
        assert_eq!(km_estimate(&[]), Err(AnalyticsError::EmptyInput));
        assert!(c.to_plot_csv().starts_with("t,survival,ci_low,ci_high\n0,1,1,1\n7,0,"));
    }

    #[test]
    fn greenwood_band_brackets_estimate() {
        use SurvivalObservation as O;
        let obs: Vec<O> = (1..=20).map(|i| if i % 3 == 0 { O::censored(i) } else { O::death(i) }).collect();
        let c = km_estimate(&obs).unwrap();
        for s in &c.steps {
            assert!(s.ci_low <= s.survival && s.survival <= s.ci_high, "{s:?}");
            assert!((0.0..=1.0).contains(&s.ci_low) && (0.0..=1.0).contains(&s.ci_high));
        }
    }

    #[test]
    fn chi_square_tail() {
        assert!((chi2_sf(3.841, 1.0) - 0.05).abs() < 1e-3);
        assert!((chi2_sf(6.635, 1.0) - 0.01).abs() < 1e-3);
        assert!((chi2_sf(7.879, 1.0) - 0.005).abs() < 1e-4);
        assert!((chi2_sf(5.991, 2.0) - 0.05).abs() < 1e-3);
        // dof 2 has the closed form exp(-x/2).
        for x in [0.1, 1.0, 4.0, 30.0] {
            assert!((chi2_sf(x, 2.0) - (-x / 2.0f64).exp()).abs() < 1e-12);
        }
        assert_eq!(chi2_sf(0.0, 1.0), 1.0);
    }

    #[test]
    fn chi_square_against_quadrature() {
        // P(X > x) for 1 dof = 1 - ∫_0^x pdf, with pdf = t^{-1/2} e^{-t/2} / sqrt(2π).
        // Substituting t = u² removes the singularity: ∫_0^{√x} 2 e^{-u²/2} / sqrt(2π) du.
        for x in [0.05, 0.5, 2.0, 3.841, 9.0, 15.0] {
            let (n, b) = (20_000, f64::sqrt(x));
            let h = b / n as f64;
            let f = |u: f64| 2.0 * (-u * u / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
            let simpson = (0..=n)
                .map(|i| {
                    let w = if i == 0 || i == n { 1.0 } else if i % 2 == 1 { 4.0 } else { 2.0 };
                    w * f(i as f64 * h)
                })
                .sum::<f64>()
                * h
                / 3.0;
            assert!((chi2_sf(x, 1.0) - (1.0 - simpson)).abs() < 1e-10, "x={x}");
        }
    }

    #[test]
    fn logrank_cases() {
        use SurvivalObservation as O;
        let a = vec![O::death(3), O::death(5), O::censored(6), O::death(8)];
        let r = logrank_test(&a, &a.clone()).unwrap();
        assert_eq!((r.chi_square, r.p_value), (0.0, 1.0));

        let dead = vec![O::death(1); 20];
        let alive = vec![O::censored(100); 20];
        let r = logrank_test(&dead, &alive).unwrap();
        // One death time: o=20, e=20·20/40=10, v=20·½·½·20/39=100/39 → χ² = 39.
        assert!((r.chi_square - 39.0).abs() < 1e-9);
        assert!(r.p_value < 0.005);
        assert_eq!(logrank_test(&alive, &alive), Err(AnalyticsError::NoDeaths));
    }

    #[test]
    fn nte_precedence_and_ranking() {
        let mut wall = rec(0, VettingLabel::Malware, "2020-01-01", Some("2020-02-01"));
        wall.name = "Ocean Wallpaper HD".into();
        let m1 = rec(1, VettingLabel::Malware, "2020-01-01", Some("2020-02-01"));
        let m2 = rec(2, VettingLabel::Malware, "2020-01-01", Some("2020-02-01"));
        let live = rec(3, VettingLabel::None, "2020-01-01", None);
        let set = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>();
        let features = HashMap::from([
            (id(0), set(&["chrome_url_overrides"])),
            (id(1), set(&["browser.tabs.create", "storage"])),
            (id(2), set(&["browser.tabs.create"])),
            (id(3), set(&["x"])),
        ]);
        let t = label_feature_table(&[wall, m1, m2, live], &features, &NTE_KEYWORDS);
        assert_eq!(t.group_sizes[&FeatureGroup::Malware], 2);
        assert_eq!(t.group_sizes[&FeatureGroup::Nte], 1);
        let top = &t.groups[&FeatureGroup::Malware][0];
        assert_eq!((top.feature.as_str(), top.rank, top.fraction), ("browser.tabs.create", 1, 1.0));
        assert_eq!(t.lookup(FeatureGroup::Malware, "storage").unwrap().rank, 2);
        assert!(t.lookup(FeatureGroup::Malware, "chrome_url_overrides").is_none());
        let csv = t.to_csv(10);
        assert!(csv.starts_with("feature,M_rank,M_pct,PV_rank,PV_pct,MPV_rank,MPV_pct,NTE_rank,NTE_pct\n"));
        assert!(csv.contains("browser.tabs.create,1,100.0,,,,,,\n"));
    }

    #[test]
    fn table_vocabulary() {
        let m = FlatManifest {
            pairs: vec![
                ("background.service_worker".into(), "sw.js".into()),
                ("name".into(), "n".into()),
                ("permissions.0".into(), "tabs".into()),
                ("permissions.1".into(), "https://x/*".into()),
            ],
            manifest_version: 3,
        };
        let calls = [ApiCall { path: "browser.tabs.create".into(), origin: crate::static_tracer::Origin::Static, count: 1 }];
        let f: Vec<String> = table_features(&m, &calls).into_iter().collect();
        assert_eq!(f, ["background", "browser.tabs.create", "mv3", "permissions", "tabs"]);
    }

    fn report(sha: &str, flagged: usize, total: usize, label: Option<&str>) -> String {
        let engines: Vec<serde_json::Value> = (0..total)
            .map(|i| {
                let cat = if i < flagged { "malicious" } else { "undetected" };
                serde_json::json!({"name": format!("e{i}"), "category": cat})
            })
            .collect();
        serde_json::json!({"sha256": sha, "found": true, "engines": engines, "suggested_label": label}).to_string()
    }

    #[test]
    fn triage_families() {
        let sha = |c: char| c.to_string().repeat(64);
        let mut rs: Vec<ExtensionRecord> =
            (0..4).map(|i| rec(i, VettingLabel::Malware, "2020-01-01", Some("2021-01-01"))).collect();
        for (r, c) in rs.iter_mut().zip(['a', 'b', 'c', 'd']) {
            r.sha256 = Some(sha(c));
        }
        rs[1].version_release_date = date("2019-05-05");
        let text = [
            report(&sha('a'), 16, 50, Some("trojan.chromex")),
            report(&sha('b'), 9, 50, Some("trojan.chromex")),
            report(&sha('c'), 0, 70, None),
        ]
        .join("\n");
        let reports = parse_detection_reports(&text).unwrap();
        let t = triage_detection_reports(&rs, &reports);
        assert_eq!(t.categories[&id(0)], TriageCategory::Malicious);
        assert_eq!(t.categories[&id(2)], TriageCategory::Clean);
        assert_eq!(t.categories[&id(3)], TriageCategory::NotFound);
        let f = &t.families[0];
        assert_eq!((f.family.as_str(), f.count, f.user_sum), ("trojan.chromex", 2, 10));
        assert!((f.max_detection - 0.32).abs() < 1e-12 && (f.avg_detection - 0.25).abs() < 1e-12);
        assert_eq!((f.lifetime_from, f.lifetime_to), (date("2019-05-05"), date("2020-01-01")));
        assert!(t.families_csv().starts_with("family,count,max_detection,avg_detection,user_sum,lifetime_from,lifetime_to\n"));
    }

    #[test]
    fn triage_schema_errors() {
        let bad = r#"{"sha256":"ab","found":true,"engines":[],"suggested_label":null}"#;
        assert!(matches!(parse_detection_reports(bad), Err(AnalyticsError::SchemaError { line: 1, .. })));
        let bad_cat = format!(
            "\n{{\"sha256\":\"{}\",\"found\":true,\"engines\":[{{\"name\":\"x\",\"category\":\"evil\"}}],\"suggested_label\":null}}",
            "0".repeat(64)
        );
        assert!(matches!(parse_detection_reports(&bad_cat), Err(AnalyticsError::SchemaError { line: 2, .. })));
    }

    proptest! {
        #[test]
        fn km_without_censoring_is_empirical(durations in proptest::collection::vec(0u32..50, 1..40)) {
            let obs: Vec<_> = durations.iter().map(|&d| SurvivalObservation::death(d)).collect();
            let c = km_estimate(&obs).unwrap();
            let n = durations.len() as f64;
            for t in 0..52 {
                let empirical = durations.iter().filter(|&&d| d > t).count() as f64 / n;
                prop_assert!((c.survival_at(t) - empirical).abs() < 1e-12);
            }
            prop_assert!(c.steps.windows(2).all(|w| w[1].survival <= w[0].survival));
        }

        #[test]
        fn logrank_symmetric(
            a in proptest::collection::vec((0u32..30, any::<bool>()), 1..25),
            b in proptest::collection::vec((0u32..30, any::<bool>()), 1..25),
        ) {
            let to = |v: &[(u32, bool)]| v.iter().map(|&(d, e)| SurvivalObservation { duration_days: d, event: e }).collect::<Vec<_>>();
            let (a, b) = (to(&a), to(&b));
            match (logrank_test(&a, &b), logrank_test(&b, &a)) {
                (Ok(x), Ok(y)) => {
                    prop_assert!(x.chi_square >= 0.0);
                    prop_assert!(x.p_value > 0.0 && x.p_value <= 1.0);
                    prop_assert!((x.chi_square - y.chi_square).abs() < 1e-9 * (1.0 + x.chi_square));
                    prop_assert!((x.p_value - y.p_value).abs() < 1e-9);
                }
                (Err(x), Err(y)) => prop_assert_eq!(x, y),
                other => prop_assert!(false, "asymmetric outcome {:?}", other),
            }
        }

        #[test]
        fn cluster_partition_holds(labels in proptest::collection::vec((0usize..3, 0u8..3), 2..30)) {
            let records: Vec<ExtensionRecord> = labels
                .iter()
                .enumerate()
                .map(|(i, &(_, kind))| match kind {
                    0 => rec(i, VettingLabel::Malware, "2020-01-01", Some("2020-05-01")),
                    1 => rec(i, VettingLabel::None, "2020-01-01", Some("2020-05-01")),
                    _ => rec(i, VettingLabel::None, "2020-01-01", None),
                })
                .collect();
            let map = records.iter().map(|r| (r.id.clone(), r.clone())).collect();
            let a = assignment(&labels.iter().map(|&(c, _)| Some(c)).collect::<Vec<_>>());
            for s in find_infringing_clusters(&a, &map).unwrap() {
                prop_assert_eq!(s.vetted_count + s.unpublished_count + s.published_count, s.size);
                prop_assert!(s.detection_rate > 0.0 && s.detection_rate <= 1.0);
                prop_assert_eq!(s.detection_rate == 1.0, s.vetted_count == s.size);
            }
        }
    }
}
