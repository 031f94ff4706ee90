//! A deliberately small CSS reader.
//!
//! It recognizes rule structure (style rules, `@font-face`, `@keyframes`, and
//! grouping at-rules whose bodies hold further rules) and splits declaration
//! blocks. Values are kept as raw text; there is no cascade.

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Declaration {
    pub name: String,
    pub value: String,
}

impl Declaration {
    /// The value with a trailing `!important` removed.
    pub fn plain_value(&self) -> &str {
        let v = self.value.trim();
        match v.to_ascii_lowercase().rfind("!important") {
            Some(pos) => v[..pos].trim_end(),
            None => v,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Rule {
    Style {
        selector: String,
        declarations: Vec<Declaration>,
    },
    FontFace(Vec<Declaration>),
    Keyframes {
        name: String,
        frames: Vec<Vec<Declaration>>,
    },
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Stylesheet {
    pub rules: Vec<Rule>,
    /// Unterminated blocks, strings and declarations without a colon.
    pub malformed: usize,
}

const GROUPING_AT_RULES: &[&str] = &[
    "media",
    "supports",
    "layer",
    "container",
    "document",
    "scope",
];

pub fn parse_stylesheet(src: &str) -> Stylesheet {
    let mut malformed = 0;
    let cleaned = strip_comments(src, &mut malformed);
    let mut sheet = Stylesheet {
        rules: Vec::new(),
        malformed,
    };
    parse_rules(&cleaned, &mut sheet);
    sheet
}

/// Parses the body of a `style` attribute or a declaration block.
pub fn parse_declarations(src: &str) -> (Vec<Declaration>, usize) {
    let mut malformed = 0;
    let cleaned = strip_comments(src, &mut malformed);
    let decls = split_declarations(&cleaned, &mut malformed);
    (decls, malformed)
}

fn strip_comments(src: &str, malformed: &mut usize) -> String {
    let b = src.as_bytes();
    let mut out = String::with_capacity(src.len());
    let mut i = 0;
    let mut start = 0;
    while i < b.len() {
        match b[i] {
            b'"' | b'\'' => i = skip_string(b, i, malformed),
            b'/' if b.get(i + 1) == Some(&b'*') => {
                out.push_str(&src[start..i]);
                match src[i + 2..].find("*/") {
                    Some(end) => i = i + 2 + end + 2,
                    None => {
                        *malformed += 1;
                        i = b.len();
                    }
                }
                out.push(' ');
                start = i;
            }
            _ => i += 1,
        }
    }
    out.push_str(&src[start.min(src.len())..]);
    out
}

/// Returns the index just past the string starting at `i`.
fn skip_string(b: &[u8], i: usize, malformed: &mut usize) -> usize {
    let quote = b[i];
    let mut j = i + 1;
    while j < b.len() {
        match b[j] {
            b'\\' => j += 2,
            c if c == quote => return j + 1,
            b'\n' => {
                *malformed += 1;
                return j;
            }
            _ => j += 1,
        }
    }
    *malformed += 1;
    b.len()
}

/// Scans to the first top-level byte in `stops`, skipping strings and parens.
fn scan_until(b: &[u8], mut i: usize, stops: &[u8], malformed: &mut usize) -> usize {
    let mut parens = 0usize;
    while i < b.len() {
        match b[i] {
            b'"' | b'\'' => {
                i = skip_string(b, i, malformed);
                continue;
            }
            b'(' => parens += 1,
            b')' => parens = parens.saturating_sub(1),
            c if parens == 0 && stops.contains(&c) => return i,
            _ => {}
        }
        i += 1;
    }
    b.len()
}

/// Given `open` at a `{`, returns the index of the matching `}` (or the end).
fn matching_brace(b: &[u8], open: usize, malformed: &mut usize) -> (usize, bool) {
    let mut depth = 0usize;
    let mut i = open;
    while i < b.len() {
        match b[i] {
            b'"' | b'\'' => {
                i = skip_string(b, i, malformed);
                continue;
            }
            b'{' => depth += 1,
            b'}' => {
                depth -= 1;
                if depth == 0 {
                    return (i, true);
                }
            }
            _ => {}
        }
        i += 1;
    }
    (b.len(), false)
}

fn parse_rules(src: &str, sheet: &mut Stylesheet) {
    let b = src.as_bytes();
    let mut i = 0;
    while i < b.len() {
        let stop = scan_until(b, i, b"{;}", &mut sheet.malformed);
        let prelude = src[i..stop].trim();
        if stop >= b.len() {
            if !prelude.is_empty() {
                sheet.malformed += 1;
            }
            return;
        }
        match b[stop] {
            b';' | b'}' => {
                // Statement at-rule (`@import ...;`) or stray token.
                if (b[stop] == b'}' || !prelude.starts_with('@'))
                    && (!prelude.is_empty() || b[stop] == b'}')
                {
                    sheet.malformed += 1;
                }
                i = stop + 1;
            }
            _ => {
                let (close, closed) = matching_brace(b, stop, &mut sheet.malformed);
                if !closed {
                    sheet.malformed += 1;
                }
                let body = &src[stop + 1..close.min(src.len())];
                handle_block(prelude, body, sheet);
                i = close + 1;
            }
        }
    }
}

fn handle_block(prelude: &str, body: &str, sheet: &mut Stylesheet) {
    let Some(at) = prelude.strip_prefix('@') else {
        let declarations = split_declarations(body, &mut sheet.malformed);
        sheet.rules.push(Rule::Style {
            selector: prelude.to_owned(),
            declarations,
        });
        return;
    };
    let keyword_end = at
        .find(|c: char| c.is_whitespace() || c == '(')
        .unwrap_or(at.len());
    let keyword = at[..keyword_end].to_ascii_lowercase();
    let rest = at[keyword_end..].trim();
    if keyword == "font-face" {
        let decls = split_declarations(body, &mut sheet.malformed);
        sheet.rules.push(Rule::FontFace(decls));
    } else if keyword == "keyframes" || keyword.ends_with("-keyframes") {
        let mut inner = Stylesheet::default();
        parse_rules(body, &mut inner);
        sheet.malformed += inner.malformed;
        let frames = inner
            .rules
            .into_iter()
            .filter_map(|r| match r {
                Rule::Style { declarations, .. } => Some(declarations),
                _ => None,
            })
            .collect();
        sheet.rules.push(Rule::Keyframes {
            name: rest.trim_matches(['"', '\'']).to_owned(),
            frames,
        });
    } else if GROUPING_AT_RULES.contains(&keyword.as_str()) {
        parse_rules(body, sheet);
    }
}

fn split_declarations(src: &str, malformed: &mut usize) -> Vec<Declaration> {
    let b = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < b.len() {
        let end = scan_until(b, i, b";{", malformed);
        if end < b.len() && b[end] == b'{' {
            // Nested rule inside a declaration block; skip it whole.
            let (close, _) = matching_brace(b, end, malformed);
            i = close + 1;
            continue;
        }
        let chunk = src[i..end.min(src.len())].trim();
        i = end + 1;
        if chunk.is_empty() {
            continue;
        }
        match chunk.split_once(':') {
            Some((name, value)) if !name.trim().is_empty() => out.push(Declaration {
                name: name.trim().to_ascii_lowercase(),
                value: value.trim().to_owned(),
            }),
            _ => *malformed += 1,
        }
    }
    out
}

/// Parses an absolute CSS pixel length (`300px`, `300`, `0`), rounding to whole pixels.
///
/// Relative units return `None`; they are resolved later against a viewport, if at all.
pub fn absolute_px(value: &str) -> Option<u32> {
    let v = value.trim().to_ascii_lowercase();
    let number = match v.strip_suffix("px") {
        Some(n) => n.trim_end(),
        None => v.as_str(),
    };
    let n: f64 = number.parse().ok()?;
    if !n.is_finite() || n < 0.0 {
        return None;
    }
    if number == v && n != 0.0 && !v.is_empty() {
        // Unitless non-zero lengths are invalid CSS.
        return None;
    }
    Some(n.round().min(f64::from(u32::MAX)) as u32)
}

/// First `url(...)` argument in a value, unquoted.
pub fn first_url(value: &str) -> Option<String> {
    let lower = value.to_ascii_lowercase();
    let start = lower.find("url(")? + 4;
    let end = start + value[start..].find(')')?;
    let inner = value[start..end].trim().trim_matches(['"', '\'']).trim();
    (!inner.is_empty()).then(|| inner.to_owned())
}

/// Splits a comma-separated value at top level, ignoring commas inside parens.
pub fn split_commas(value: &str) -> Vec<&str> {
    let b = value.as_bytes();
    let mut parts = Vec::new();
    let mut start = 0;
    let mut depth = 0usize;
    for (i, &c) in b.iter().enumerate() {
        match c {
            b'(' => depth += 1,
            b')' => depth = depth.saturating_sub(1),
            b',' if depth == 0 => {
                parts.push(value[start..i].trim());
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(value[start..].trim());
    parts.retain(|p| !p.is_empty());
    parts
}
