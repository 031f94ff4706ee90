//! Domain types shared by every stage of the pipeline.
//!
//! Everything here is a plain value: snapshots, policies and reports are
//! immutable once built and can be shared freely between threads.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, PolicyError};

/// A policy-controlled feature that affects page load quality.
///
/// Variants are declared in lexicographic order of their header names so the
/// derived `Ord` matches serialized order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureKind {
    BlockingScript,
    FontDisplayLateSwap,
    LayoutAnimations,
    LosslessImagesMaxBpp,
    LosslessImagesStrictMaxBpp,
    LossyImagesMaxBpp,
    OversizedImages,
    UnsizedMedia,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 8] = [
        FeatureKind::BlockingScript,
        FeatureKind::FontDisplayLateSwap,
        FeatureKind::LayoutAnimations,
        FeatureKind::LosslessImagesMaxBpp,
        FeatureKind::LosslessImagesStrictMaxBpp,
        FeatureKind::LossyImagesMaxBpp,
        FeatureKind::OversizedImages,
        FeatureKind::UnsizedMedia,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::BlockingScript => "blocking-script",
            FeatureKind::FontDisplayLateSwap => "font-display-late-swap",
            FeatureKind::LayoutAnimations => "layout-animations",
            FeatureKind::LosslessImagesMaxBpp => "lossless-images-max-bpp",
            FeatureKind::LosslessImagesStrictMaxBpp => "lossless-images-strict-max-bpp",
            FeatureKind::LossyImagesMaxBpp => "lossy-images-max-bpp",
            FeatureKind::OversizedImages => "oversized-images",
            FeatureKind::UnsizedMedia => "unsized-media",
        }
    }

    /// Oversized-images and the three bits-per-pixel features carry a value.
    pub fn is_parameterized(self) -> bool {
        matches!(
            self,
            FeatureKind::OversizedImages
                | FeatureKind::LossyImagesMaxBpp
                | FeatureKind::LosslessImagesMaxBpp
                | FeatureKind::LosslessImagesStrictMaxBpp
        )
    }

    pub fn is_bpp(self) -> bool {
        matches!(
            self,
            FeatureKind::LossyImagesMaxBpp
                | FeatureKind::LosslessImagesMaxBpp
                | FeatureKind::LosslessImagesStrictMaxBpp
        )
    }

    /// Features whose checks compete under first-trigger counting.
    pub fn is_media_class(self) -> bool {
        self.is_parameterized() || self == FeatureKind::UnsizedMedia
    }

    /// Parameter used when the feature is enabled without an explicit value.
    pub fn default_parameter(self) -> Option<PolicyParam> {
        match self {
            FeatureKind::OversizedImages => Some(PolicyParam::from_thousandths(2000)),
            FeatureKind::LossyImagesMaxBpp => Some(PolicyParam::from_thousandths(500)),
            FeatureKind::LosslessImagesMaxBpp => Some(PolicyParam::from_thousandths(1000)),
            FeatureKind::LosslessImagesStrictMaxBpp => Some(PolicyParam::from_thousandths(1000)),
            _ => None,
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureKind {
    type Err = PolicyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "sync-script" {
            return Ok(FeatureKind::BlockingScript);
        }
        FeatureKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| PolicyError::UnknownFeature(s.to_owned()))
    }
}

/// A policy parameter held exactly as an integer count of thousandths.
///
/// Structured header decimals carry at most three fractional digits, so this
/// representation round-trips through the header form without loss.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PolicyParam(i64);

impl PolicyParam {
    pub const fn from_thousandths(v: i64) -> Self {
        PolicyParam(v)
    }

    pub fn thousandths(self) -> i64 {
        self.0
    }

    pub fn value(self) -> f64 {
        self.0 as f64 / 1000.0
    }

    pub fn is_integral(self) -> bool {
        self.0 % 1000 == 0
    }
}

impl fmt::Display for PolicyParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        let (int, frac) = (abs / 1000, abs % 1000);
        if frac == 0 {
            return write!(f, "{sign}{int}");
        }
        let digits = format!("{frac:03}");
        write!(f, "{sign}{int}.{}", digits.trim_end_matches('0'))
    }
}

impl FromStr for PolicyParam {
    type Err = PolicyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let malformed = || PolicyError::MalformedParameter(s.to_owned());
        let t = s.trim();
        let (neg, body) = match t.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, t),
        };
        let (int, frac) = body.split_once('.').unwrap_or((body, ""));
        let all_digits = |p: &str| p.bytes().all(|b| b.is_ascii_digit());
        if int.is_empty()
            || int.len() > 12
            || !all_digits(int)
            || frac.len() > 3
            || !all_digits(frac)
        {
            return Err(malformed());
        }
        if body.contains('.') && frac.is_empty() {
            return Err(malformed());
        }
        let int: i64 = int.parse().map_err(|_| malformed())?;
        let frac_val: i64 = if frac.is_empty() {
            0
        } else {
            format!("{frac:0<3}").parse().map_err(|_| malformed())?
        };
        let v = int * 1000 + frac_val;
        Ok(PolicyParam(if neg { -v } else { v }))
    }
}

impl Serialize for PolicyParam {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PolicyParam {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PolicyFeature {
    pub kind: FeatureKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parameter: Option<PolicyParam>,
}

impl PolicyFeature {
    /// Boolean feature, or parameterized feature at its default value.
    pub fn enabled(kind: FeatureKind) -> Self {
        PolicyFeature {
            kind,
            parameter: kind.default_parameter(),
        }
    }

    pub fn with_parameter(kind: FeatureKind, parameter: PolicyParam) -> Self {
        PolicyFeature {
            kind,
            parameter: Some(parameter),
        }
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        match (self.kind.is_parameterized(), self.parameter) {
            (true, None) => Err(PolicyError::MissingParameter(self.kind)),
            (false, Some(_)) => Err(PolicyError::UnexpectedParameter(self.kind)),
            (true, Some(p)) if p.thousandths() <= 0 => {
                Err(PolicyError::NonPositiveParameter(self.kind, p.to_string()))
            }
            _ => Ok(()),
        }
    }
}

/// The enabled features of a document policy, at most one entry per kind.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PolicySet {
    entries: BTreeMap<FeatureKind, PolicyFeature>,
}

impl PolicySet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Every feature enabled at its default parameter.
    pub fn all_defaults() -> Self {
        FeatureKind::ALL
            .into_iter()
            .map(PolicyFeature::enabled)
            .collect()
    }

    /// Builds a set from a feature list, rejecting repeated kinds.
    pub fn from_features(
        features: impl IntoIterator<Item = PolicyFeature>,
    ) -> Result<Self, PolicyError> {
        let mut set = PolicySet::new();
        for f in features {
            if set.entries.insert(f.kind, f).is_some() {
                return Err(PolicyError::DuplicateKind(f.kind));
            }
        }
        Ok(set)
    }

    /// Inserts or replaces the entry for `feature.kind`.
    pub fn insert(&mut self, feature: PolicyFeature) -> Option<PolicyFeature> {
        self.entries.insert(feature.kind, feature)
    }

    pub fn remove(&mut self, kind: FeatureKind) -> Option<PolicyFeature> {
        self.entries.remove(&kind)
    }

    pub fn get(&self, kind: FeatureKind) -> Option<&PolicyFeature> {
        self.entries.get(&kind)
    }

    pub fn contains(&self, kind: FeatureKind) -> bool {
        self.entries.contains_key(&kind)
    }

    /// Parameter of an enabled feature, falling back to the kind's default.
    pub fn parameter(&self, kind: FeatureKind) -> Option<PolicyParam> {
        self.get(kind)
            .and_then(|f| f.parameter.or(kind.default_parameter()))
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = &PolicyFeature> {
        self.entries.values()
    }

    pub fn kinds(&self) -> impl Iterator<Item = FeatureKind> + '_ {
        self.entries.keys().copied()
    }

    pub fn validate(self) -> Result<Self, PolicyError> {
        validate_policy_set(self)
    }
}

impl FromIterator<PolicyFeature> for PolicySet {
    fn from_iter<I: IntoIterator<Item = PolicyFeature>>(iter: I) -> Self {
        let mut set = PolicySet::new();
        for f in iter {
            set.insert(f);
        }
        set
    }
}

/// Returns the set unchanged when every feature and cross-feature invariant holds.
pub fn validate_policy_set(ps: PolicySet) -> Result<PolicySet, PolicyError> {
    for (kind, f) in &ps.entries {
        if *kind != f.kind {
            return Err(PolicyError::DuplicateKind(f.kind));
        }
        f.validate()?;
    }
    let strict = ps
        .get(FeatureKind::LosslessImagesStrictMaxBpp)
        .and_then(|f| f.parameter);
    let lenient = ps
        .get(FeatureKind::LosslessImagesMaxBpp)
        .and_then(|f| f.parameter);
    if let (Some(strict), Some(lenient)) = (strict, lenient) {
        if strict > lenient {
            return Err(PolicyError::StrictExceedsLenient {
                strict: strict.to_string(),
                lenient: lenient.to_string(),
            });
        }
    }
    Ok(ps)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewportConfig {
    pub width_css_px: u32,
    pub height_css_px: u32,
    pub device_pixel_ratio: f64,
}

impl ViewportConfig {
    pub fn new(
        width_css_px: u32,
        height_css_px: u32,
        device_pixel_ratio: f64,
    ) -> Result<Self, Error> {
        let vp = ViewportConfig {
            width_css_px,
            height_css_px,
            device_pixel_ratio,
        };
        vp.validate()?;
        Ok(vp)
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.width_css_px == 0 || self.height_css_px == 0 {
            return Err(Error::InvalidConfig {
                what: "viewport",
                reason: "width and height must be positive".into(),
            });
        }
        if !(self.device_pixel_ratio.is_finite() && self.device_pixel_ratio > 0.0) {
            return Err(Error::InvalidConfig {
                what: "viewport",
                reason: "device pixel ratio must be positive".into(),
            });
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        f64::from(self.width_css_px)
    }

    pub fn height(&self) -> f64 {
        f64::from(self.height_css_px)
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }
}

/// 360x640 CSS px at 3x, a Moto G4 class phone.
impl Default for ViewportConfig {
    fn default() -> Self {
        ViewportConfig {
            width_css_px: 360,
            height_css_px: 640,
            device_pixel_ratio: 3.0,
        }
    }
}

/// Parses `WxH@DPR`, e.g. `360x640@3`.
impl FromStr for ViewportConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || Error::InvalidConfig {
            what: "viewport",
            reason: format!("{s:?} is not of the form WxH@DPR"),
        };
        let (dims, dpr) = s.split_once('@').ok_or_else(bad)?;
        let (w, h) = dims.split_once(['x', 'X']).ok_or_else(bad)?;
        ViewportConfig::new(
            w.trim().parse().map_err(|_| bad())?,
            h.trim().parse().map_err(|_| bad())?,
            dpr.trim().parse().map_err(|_| bad())?,
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkProfile {
    pub rtt_ms: f64,
    pub downlink_kbps: f64,
    pub uplink_kbps: f64,
}

impl NetworkProfile {
    /// 150 ms RTT, 1.6 Mbps down, 750 Kbps up.
    pub const SLOW_4G: NetworkProfile = NetworkProfile {
        rtt_ms: 150.0,
        downlink_kbps: 1600.0,
        uplink_kbps: 750.0,
    };

    pub fn new(rtt_ms: f64, downlink_kbps: f64, uplink_kbps: f64) -> Result<Self, Error> {
        let np = NetworkProfile {
            rtt_ms,
            downlink_kbps,
            uplink_kbps,
        };
        np.validate()?;
        Ok(np)
    }

    pub fn validate(&self) -> Result<(), Error> {
        let ok = self.rtt_ms >= 0.0
            && self.rtt_ms.is_finite()
            && self.downlink_kbps > 0.0
            && self.uplink_kbps > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig {
                what: "network profile",
                reason: "rtt must be non-negative and throughputs positive".into(),
            })
        }
    }
}

impl Default for NetworkProfile {
    fn default() -> Self {
        NetworkProfile::SLOW_4G
    }
}

/// Parses `rtt_ms,down_kbps,up_kbps`, e.g. `150,1600,750`.
impl FromStr for NetworkProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || Error::InvalidConfig {
            what: "network profile",
            reason: format!("{s:?} is not of the form rtt,down,up"),
        };
        let parts: Vec<f64> = s
            .split(',')
            .map(|p| p.trim().parse::<f64>().map_err(|_| bad()))
            .collect::<Result<_, _>>()?;
        match parts[..] {
            [rtt, down, up] => NetworkProfile::new(rtt, down, up),
            _ => Err(bad()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PixelSize {
    pub width: u32,
    pub height: u32,
}

impl PixelSize {
    pub const fn new(width: u32, height: u32) -> Self {
        PixelSize { width, height }
    }

    pub fn area(&self) -> u64 {
        u64::from(self.width) * u64::from(self.height)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MediaKind {
    Image,
    Video,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EncodingClass {
    Lossy,
    Lossless,
    #[default]
    Unknown,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MediaElement {
    pub id: usize,
    pub media_kind: MediaKind,
    pub declared_width_css_px: Option<u32>,
    pub declared_height_css_px: Option<u32>,
    /// Intrinsic pixel size; width and height are known together or not at all.
    pub natural_size: Option<PixelSize>,
    pub encoded_bytes: Option<u64>,
    pub encoding_class: EncodingClass,
    pub source_url: String,
    /// Set when enforcement replaced the image payload with a placeholder.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub placeholder: bool,
}

impl MediaElement {
    pub fn image(id: usize, source_url: impl Into<String>) -> Self {
        MediaElement {
            id,
            media_kind: MediaKind::Image,
            declared_width_css_px: None,
            declared_height_css_px: None,
            natural_size: None,
            encoded_bytes: None,
            encoding_class: EncodingClass::Unknown,
            source_url: source_url.into(),
            placeholder: false,
        }
    }

    pub fn video(id: usize, source_url: impl Into<String>) -> Self {
        MediaElement {
            media_kind: MediaKind::Video,
            ..MediaElement::image(id, source_url)
        }
    }

    pub fn with_declared(mut self, width: Option<u32>, height: Option<u32>) -> Self {
        self.declared_width_css_px = width;
        self.declared_height_css_px = height;
        self
    }

    pub fn with_payload(mut self, natural: PixelSize, bytes: u64, encoding: EncodingClass) -> Self {
        self.natural_size = Some(natural);
        self.encoded_bytes = Some(bytes);
        self.encoding_class = encoding;
        self
    }

    pub fn is_sized(&self) -> bool {
        self.declared_width_css_px.is_some() && self.declared_height_css_px.is_some()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptElement {
    pub id: usize,
    /// Present exactly when the script is external.
    pub source_url: Option<String>,
    pub has_async: bool,
    pub has_defer: bool,
    pub is_module: bool,
    pub encoded_bytes: Option<u64>,
}

impl ScriptElement {
    pub fn external(id: usize, source_url: impl Into<String>) -> Self {
        ScriptElement {
            id,
            source_url: Some(source_url.into()),
            has_async: false,
            has_defer: false,
            is_module: false,
            encoded_bytes: None,
        }
    }

    pub fn inline(id: usize) -> Self {
        ScriptElement {
            id,
            source_url: None,
            has_async: false,
            has_defer: false,
            is_module: false,
            encoded_bytes: None,
        }
    }

    pub fn is_external(&self) -> bool {
        self.source_url.is_some()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FontDisplay {
    #[default]
    Auto,
    Block,
    Swap,
    Fallback,
    Optional,
}

impl FromStr for FontDisplay {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.trim().to_ascii_lowercase().as_str() {
            "auto" => Ok(FontDisplay::Auto),
            "block" => Ok(FontDisplay::Block),
            "swap" => Ok(FontDisplay::Swap),
            "fallback" => Ok(FontDisplay::Fallback),
            "optional" => Ok(FontDisplay::Optional),
            other => Err(Error::InvalidConfig {
                what: "font-display",
                reason: format!("{other:?} is not auto, block, swap, fallback or optional"),
            }),
        }
    }
}

impl fmt::Display for FontDisplay {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FontDisplay::Auto => "auto",
            FontDisplay::Block => "block",
            FontDisplay::Swap => "swap",
            FontDisplay::Fallback => "fallback",
            FontDisplay::Optional => "optional",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FontFaceRule {
    pub family: String,
    pub source_url: String,
    pub font_display: FontDisplay,
    pub encoded_bytes: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnimationMechanism {
    Keyframes,
    Transition,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnimationRule {
    pub selector: String,
    pub animated_properties: BTreeSet<String>,
    pub mechanism: AnimationMechanism,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub neutralized: bool,
}

impl AnimationRule {
    /// Property set left on a rule after its motion has been neutralized.
    pub const NO_MOTION: &'static str = "none";

    pub fn new<I, S>(
        selector: impl Into<String>,
        mechanism: AnimationMechanism,
        properties: I,
    ) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        AnimationRule {
            selector: selector.into(),
            animated_properties: properties.into_iter().map(Into::into).collect(),
            mechanism,
            neutralized: false,
        }
    }
}

/// Counters for input that extraction or enforcement skipped or approximated.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub html_parse_errors: usize,
    pub malformed_css: usize,
    pub srcset_first_candidate: usize,
    pub unresolved_urls: usize,
    pub placeholders: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PageSnapshot {
    pub url: String,
    pub html_bytes: u64,
    pub media: Vec<MediaElement>,
    pub scripts: Vec<ScriptElement>,
    pub fonts: Vec<FontFaceRule>,
    pub animations: Vec<AnimationRule>,
    #[serde(default)]
    pub diagnostics: Diagnostics,
}

impl PageSnapshot {
    pub fn new(url: impl Into<String>, html_bytes: u64) -> Self {
        PageSnapshot {
            url: url.into(),
            html_bytes,
            ..PageSnapshot::default()
        }
    }

    pub fn media_by_id(&self, id: usize) -> Option<&MediaElement> {
        self.media.iter().find(|m| m.id == id)
    }

    /// Checks id ordering, natural-size/encoding coupling and animation sets.
    pub fn check_invariants(&self) -> Result<(), String> {
        let increasing = |ids: &mut dyn Iterator<Item = usize>| {
            let ids: Vec<usize> = ids.collect();
            ids.windows(2).all(|w| w[0] < w[1])
        };
        if !increasing(&mut self.media.iter().map(|m| m.id)) {
            return Err("media ids are not strictly increasing".into());
        }
        if !increasing(&mut self.scripts.iter().map(|s| s.id)) {
            return Err("script ids are not strictly increasing".into());
        }
        for m in &self.media {
            if m.encoded_bytes.is_none() && m.encoding_class != EncodingClass::Unknown {
                return Err(format!("media {} has an encoding class but no bytes", m.id));
            }
        }
        if let Some(a) = self
            .animations
            .iter()
            .find(|a| a.animated_properties.is_empty())
        {
            return Err(format!("animation {:?} animates nothing", a.selector));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ElementClass {
    Media,
    Script,
    Font,
    Animation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub feature_kind: FeatureKind,
    /// Media and script ids, or the list index for fonts and animations.
    pub element_id: usize,
    pub element_class: ElementClass,
    pub measured: Option<f64>,
    pub threshold: Option<f64>,
    pub above_fold: bool,
}

/// A before/after pair of an estimate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub pre: f64,
    pub post: f64,
}

impl Estimate {
    pub fn ratio(&self) -> f64 {
        if self.pre == 0.0 {
            1.0
        } else {
            self.post / self.pre
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub url: String,
    pub violations: Vec<Violation>,
    pub counts_per_feature: BTreeMap<FeatureKind, usize>,
    pub bytes_saved_estimate: u64,
    pub first_render_estimate_s: Estimate,
    pub lcp_estimate_s: Estimate,
    pub cls_estimate: Estimate,
}

impl AuditReport {
    pub fn total_violations(&self) -> usize {
        self.violations.len()
    }

    pub fn count(&self, kind: FeatureKind) -> usize {
        self.counts_per_feature.get(&kind).copied().unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn param(s: &str) -> PolicyParam {
        s.parse().unwrap()
    }

    #[test]
    fn oversized_ratio_two_is_valid() {
        let ps = PolicySet::from_features([PolicyFeature::with_parameter(
            FeatureKind::OversizedImages,
            param("2.0"),
        )])
        .unwrap();
        assert_eq!(validate_policy_set(ps.clone()), Ok(ps));
    }

    #[test]
    fn empty_set_is_valid() {
        assert!(validate_policy_set(PolicySet::new()).is_ok());
    }

    #[test]
    fn strict_above_lenient_is_rejected() {
        let ps = PolicySet::from_features([
            PolicyFeature::with_parameter(FeatureKind::LosslessImagesMaxBpp, param("1.0")),
            PolicyFeature::with_parameter(FeatureKind::LosslessImagesStrictMaxBpp, param("2.0")),
        ])
        .unwrap();
        assert!(matches!(
            validate_policy_set(ps),
            Err(PolicyError::StrictExceedsLenient { .. })
        ));
    }

    #[test]
    fn duplicate_and_bad_parameters_are_rejected() {
        let dup = PolicySet::from_features([
            PolicyFeature::enabled(FeatureKind::UnsizedMedia),
            PolicyFeature::enabled(FeatureKind::UnsizedMedia),
        ]);
        assert_eq!(
            dup,
            Err(PolicyError::DuplicateKind(FeatureKind::UnsizedMedia))
        );

        let zero: PolicySet = [PolicyFeature::with_parameter(
            FeatureKind::OversizedImages,
            param("0"),
        )]
        .into_iter()
        .collect();
        assert!(matches!(
            zero.validate(),
            Err(PolicyError::NonPositiveParameter(..))
        ));

        let missing: PolicySet = [PolicyFeature {
            kind: FeatureKind::LossyImagesMaxBpp,
            parameter: None,
        }]
        .into_iter()
        .collect();
        assert!(matches!(
            missing.validate(),
            Err(PolicyError::MissingParameter(_))
        ));

        let extra: PolicySet = [PolicyFeature {
            kind: FeatureKind::UnsizedMedia,
            parameter: Some(param("1")),
        }]
        .into_iter()
        .collect();
        assert!(matches!(
            extra.validate(),
            Err(PolicyError::UnexpectedParameter(_))
        ));
    }

    #[test]
    fn param_rendering_is_minimal() {
        assert_eq!(param("2.0").to_string(), "2");
        assert_eq!(param("0.5").to_string(), "0.5");
        assert_eq!(param("0.125").to_string(), "0.125");
        assert_eq!(param("12.340").to_string(), "12.34");
        assert!("0.1234".parse::<PolicyParam>().is_err());
        assert!("1.".parse::<PolicyParam>().is_err());
        assert!(".5".parse::<PolicyParam>().is_err());
    }

    #[test]
    fn viewport_and_network_parse() {
        let vp: ViewportConfig = "360x640@3".parse().unwrap();
        assert_eq!(vp, ViewportConfig::default());
        assert!("0x640@3".parse::<ViewportConfig>().is_err());
        let np: NetworkProfile = "150,1600,750".parse().unwrap();
        assert_eq!(np, NetworkProfile::SLOW_4G);
        assert!("150,0,750".parse::<NetworkProfile>().is_err());
    }

    #[test]
    fn feature_names_sort_like_kinds() {
        let mut names: Vec<_> = FeatureKind::ALL.iter().map(|k| k.name()).collect();
        let sorted = {
            let mut s = names.clone();
            s.sort();
            s
        };
        assert_eq!(names, sorted);
        names.dedup();
        assert_eq!(names.len(), 8);
        assert_eq!("sync-script".parse(), Ok(FeatureKind::BlockingScript));
    }

    #[test]
    fn policy_set_equality_ignores_insertion_order() {
        let a: PolicySet = [
            PolicyFeature::enabled(FeatureKind::UnsizedMedia),
            PolicyFeature::enabled(FeatureKind::BlockingScript),
        ]
        .into_iter()
        .collect();
        let b: PolicySet = [
            PolicyFeature::enabled(FeatureKind::BlockingScript),
            PolicyFeature::enabled(FeatureKind::UnsizedMedia),
        ]
        .into_iter()
        .collect();
        assert_eq!(a, b);
    }
}
