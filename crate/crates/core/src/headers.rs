//! `Document-Policy` header serialization, parsing and merging.
//!
//! Header values are structured-field dictionaries. Restricted boolean
//! features are written `name=?0`; parameterized features carry an integer
//! when the value is integral (`oversized-images=2`) and a decimal otherwise
//! (`lossy-images-max-bpp=0.5`). Members are sorted by name and joined with
//! `", "`, so a policy set has exactly one serialized form.

use sfv::{BareItem, DictSerializer, Dictionary, ListEntry, Parser};

use crate::error::HeaderError;
use crate::model::{validate_policy_set, FeatureKind, PolicyFeature, PolicyParam, PolicySet};

pub const DOCUMENT_POLICY: &str = "Document-Policy";
pub const DOCUMENT_POLICY_REPORT_ONLY: &str = "Document-Policy-Report-Only";
pub const PERMISSIONS_POLICY: &str = "Permissions-Policy";

/// A parsed header: recognized restrictions plus members kept verbatim.
///
/// Unknown feature names, and known features in a non-restricting form such
/// as `unsized-media=?1`, are preserved so they survive a rewrite.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PolicyHeader {
    pub policy: PolicySet,
    passthrough: Vec<(sfv::Key, ListEntry)>,
}

impl PolicyHeader {
    pub fn new(policy: PolicySet) -> Self {
        PolicyHeader {
            policy,
            passthrough: Vec::new(),
        }
    }

    pub fn passthrough_names(&self) -> impl Iterator<Item = &str> {
        self.passthrough.iter().map(|(k, _)| k.as_str())
    }

    pub fn passthrough_len(&self) -> usize {
        self.passthrough.len()
    }

    /// Serialized header value, or `None` when there is nothing to send.
    pub fn to_header_value(&self) -> Option<String> {
        let mut members: Vec<(sfv::Key, ListEntry)> = self
            .policy
            .iter()
            .map(|f| (feature_key(f.kind), feature_entry(f)))
            .collect();
        members.extend(self.passthrough.iter().cloned());
        members.sort_by(|a, b| a.0.as_str().cmp(b.0.as_str()));
        let mut ser = DictSerializer::new();
        ser.members(members.iter().map(|(k, v)| (k, v)));
        ser.finish()
    }

    /// Combines this header with `configured`; configured entries win per feature.
    pub fn merged_with(mut self, configured: &PolicySet) -> PolicyHeader {
        for f in configured.iter() {
            self.policy.insert(*f);
        }
        self.passthrough.retain(|(name, _)| {
            name.as_str()
                .parse::<FeatureKind>()
                .map_or(true, |k| !configured.contains(k))
        });
        self
    }
}

fn feature_key(kind: FeatureKind) -> sfv::Key {
    sfv::Key::from_string(kind.name().to_owned()).expect("feature names are valid keys")
}

fn feature_entry(f: &PolicyFeature) -> ListEntry {
    let bare: BareItem = match f.parameter {
        None => BareItem::Boolean(false),
        Some(p) if p.is_integral() => BareItem::Integer(
            sfv::Integer::try_from(p.thousandths() / 1000).unwrap_or(sfv::Integer::MAX),
        ),
        Some(p) => BareItem::Decimal(sfv::Decimal::from_integer_scaled_1000(
            sfv::Integer::try_from(p.thousandths()).unwrap_or(sfv::Integer::MAX),
        )),
    };
    ListEntry::Item(sfv::Item::new(bare))
}

/// The `Document-Policy` header for a validated set; empty sets emit nothing.
pub fn serialize_headers(ps: &PolicySet) -> Result<Vec<(String, String)>, HeaderError> {
    let ps = validate_policy_set(ps.clone())?;
    Ok(PolicyHeader::new(ps)
        .to_header_value()
        .map(|v| vec![(DOCUMENT_POLICY.to_owned(), v)])
        .unwrap_or_default())
}

/// Serialized header value only (no header name).
pub fn serialize_policy_value(ps: &PolicySet) -> Result<Option<String>, HeaderError> {
    let ps = validate_policy_set(ps.clone())?;
    Ok(PolicyHeader::new(ps).to_header_value())
}

/// Parses a `Document-Policy` value. Unknown members are kept, not rejected.
pub fn parse_headers(header_value: &str) -> Result<PolicyHeader, HeaderError> {
    let parse_header = parse_lenient(header_value)?;
    let policy = validate_policy_set(parse_header.policy)?;
    Ok(PolicyHeader {
        policy,
        passthrough: parse_header.passthrough,
    })
}

/// Like [`parse_headers`] but without the cross-feature validation step.
pub fn parse_lenient(header_value: &str) -> Result<PolicyHeader, HeaderError> {
    let trimmed = header_value.trim();
    if trimmed.is_empty() {
        return Ok(PolicyHeader::default());
    }
    let dict: Dictionary = Parser::new(trimmed)
        .parse()
        .map_err(|e| HeaderError::Syntax(e.to_string()))?;
    let mut header = PolicyHeader::default();
    for (key, entry) in dict {
        let Ok(kind) = key.as_str().parse::<FeatureKind>() else {
            header.passthrough.push((key, entry));
            continue;
        };
        let type_error = |entry: &ListEntry| HeaderError::ValueType {
            feature: kind,
            value: describe(entry),
        };
        let ListEntry::Item(item) = &entry else {
            return Err(type_error(&entry));
        };
        let feature = match (&item.bare_item, kind.is_parameterized()) {
            (BareItem::Boolean(true), _) => {
                header.passthrough.push((key, entry));
                continue;
            }
            (BareItem::Boolean(false), false) => PolicyFeature::enabled(kind),
            (BareItem::Integer(n), true) => {
                let n = i64::from(*n);
                let thousandths = n.checked_mul(1000).ok_or_else(|| type_error(&entry))?;
                PolicyFeature::with_parameter(kind, PolicyParam::from_thousandths(thousandths))
            }
            (BareItem::Decimal(d), true) => PolicyFeature::with_parameter(
                kind,
                PolicyParam::from_thousandths(i64::from(d.as_integer_scaled_1000())),
            ),
            _ => return Err(type_error(&entry)),
        };
        feature.validate()?;
        header.policy.insert(feature);
    }
    Ok(header)
}

fn describe(entry: &ListEntry) -> String {
    let mut ser = DictSerializer::new();
    let key = sfv::Key::from_string("v".to_owned()).expect("valid key");
    ser.members([(&key, entry)]);
    ser.finish()
        .map(|s| s.trim_start_matches("v=").to_owned())
        .unwrap_or_default()
}

/// Merges `configured` into an existing response header value.
///
/// An unparseable existing value is replaced outright.
pub fn merge_header_value(existing: Option<&str>, configured: &PolicySet) -> Option<String> {
    let base = existing
        .and_then(|v| parse_lenient(v).ok())
        .unwrap_or_default();
    base.merged_with(configured).to_header_value()
}

/// Permissions-Policy allowlist forms.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Allowlist {
    /// `()`: disabled everywhere.
    Nobody,
    /// `*`
    Everyone,
    /// `(self "https://a.example" ...)`
    Origins {
        include_self: bool,
        origins: Vec<String>,
    },
}

/// Serializes `name=allowlist` members of a `Permissions-Policy` header.
pub fn serialize_permissions_policy(
    entries: &[(&str, Allowlist)],
) -> Result<Option<String>, HeaderError> {
    let syntax = |e: sfv::Error| HeaderError::Syntax(e.to_string());
    let mut ser = DictSerializer::new();
    for (name, allow) in entries {
        let key = sfv::KeyRef::from_str(name).map_err(syntax)?;
        match allow {
            Allowlist::Everyone => {
                ser.bare_item(key, sfv::TokenRef::from_str("*").map_err(syntax)?);
            }
            Allowlist::Nobody => {
                let _ = ser.inner_list(key).finish();
            }
            Allowlist::Origins {
                include_self,
                origins,
            } => {
                let mut list = ser.inner_list(key);
                if *include_self {
                    list.bare_item(sfv::TokenRef::from_str("self").map_err(syntax)?);
                }
                for o in origins {
                    list.bare_item(sfv::StringRef::from_str(o).map_err(syntax)?);
                }
                let _ = list.finish();
            }
        }
    }
    Ok(ser.finish())
}
