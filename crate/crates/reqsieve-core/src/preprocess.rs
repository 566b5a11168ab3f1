//! Request canonicalization.
//!
//! A raw request is flattened to one lowercase text string before
//! tokenization. Every part (method, target, retained headers, body) goes
//! through the same fixed sequence: percent-decode, lossy UTF-8 decode,
//! percent-decode again, lowercase. The second decode pass unmasks
//! double-encoded payloads; escapes that survive both passes are kept
//! verbatim and become ordinary tokens.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::request::RawRequest;

/// Which headers to keep during canonicalization. Names are matched
/// case-insensitively.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum HeaderFilter {
    /// Keep only the named headers.
    Allow(Vec<String>),
    /// Keep everything except the named headers.
    Deny(Vec<String>),
}

impl HeaderFilter {
    /// Allowlist filter; at least one name is required.
    pub fn allowlist<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let names = normalize_names(names);
        if names.is_empty() {
            return Err(Error::InvalidParameter("allowlist must name at least one header"));
        }
        Ok(HeaderFilter::Allow(names))
    }

    /// Denylist filter; an empty list keeps every header.
    pub fn denylist<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        HeaderFilter::Deny(normalize_names(names))
    }

    /// True when a header with this name survives the filter.
    pub fn retains(&self, name: &str) -> bool {
        let name = lowercase(name);
        match self {
            HeaderFilter::Allow(names) => names.contains(&name),
            HeaderFilter::Deny(names) => !names.contains(&name),
        }
    }

    pub fn names(&self) -> &[String] {
        match self {
            HeaderFilter::Allow(names) | HeaderFilter::Deny(names) => names,
        }
    }
}

impl Default for HeaderFilter {
    /// Drops volatile transport headers that carry little signal and drift
    /// between captures.
    fn default() -> Self {
        HeaderFilter::denylist(["host", "date", "content-length", "connection"])
    }
}

fn normalize_names<I, S>(names: I) -> Vec<String>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut out: Vec<String> = names.into_iter().map(|n| lowercase(n.as_ref())).collect();
    out.sort();
    out.dedup();
    out
}

/// Settings shared by every canonicalization call of one run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreprocessConfig {
    pub filter: HeaderFilter,
    pub include_body: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            filter: HeaderFilter::default(),
            include_body: true,
        }
    }
}

/// A request flattened to lowercase text, ready for tokenization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CanonicalText(String);

impl CanonicalText {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }
}

impl core::fmt::Display for CanonicalText {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(&self.0)
    }
}

fn hex_value(b: u8) -> Option<u8> {
    match b {
        b'0'..=b'9' => Some(b - b'0'),
        b'a'..=b'f' => Some(b - b'a' + 10),
        b'A'..=b'F' => Some(b - b'A' + 10),
        _ => None,
    }
}

/// Replaces every valid `%XX` triple with its byte. Invalid escapes (bad hex
/// digits, truncated `%`) pass through verbatim, and `+` is left alone.
pub fn percent_decode_bytes(input: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(input.len());
    let mut i = 0;
    while i < input.len() {
        if input[i] == b'%' && i + 2 < input.len() {
            if let (Some(hi), Some(lo)) = (hex_value(input[i + 1]), hex_value(input[i + 2])) {
                out.push(hi << 4 | lo);
                i += 3;
                continue;
            }
        }
        out.push(input[i]);
        i += 1;
    }
    out
}

/// String-level percent decoding; decoded bytes are re-read as UTF-8,
/// lossily, so the function is total.
pub fn percent_decode(s: &str) -> String {
    utf8_decode_lossy(&percent_decode_bytes(s.as_bytes()))
}

/// Decodes UTF-8, substituting U+FFFD for each invalid sequence.
pub fn utf8_decode_lossy(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

/// Locale-independent per-character lowercase mapping.
pub fn lowercase(s: &str) -> String {
    s.chars().flat_map(char::to_lowercase).collect()
}

/// The full decode chain applied to one request part.
fn canonical_part(bytes: &[u8]) -> String {
    let once = percent_decode_bytes(bytes);
    let text = utf8_decode_lossy(&once);
    let twice = percent_decode(&text);
    lowercase(&twice)
}

/// Flattens a request into canonical text: method, target, retained
/// `name: value` header pairs in original order, then the body when
/// configured, joined by single spaces. Never fails, whatever the bytes.
pub fn canonicalize(req: &RawRequest, cfg: &PreprocessConfig) -> CanonicalText {
    let mut parts: Vec<String> = Vec::with_capacity(req.headers.len() + 3);
    parts.push(canonical_part(req.method.as_bytes()));
    parts.push(canonical_part(req.target.as_bytes()));
    for (name, value) in &req.headers {
        if cfg.filter.retains(name) {
            let mut pair = String::with_capacity(name.len() + value.len() + 2);
            pair.push_str(name);
            pair.push_str(": ");
            pair.push_str(value);
            parts.push(canonical_part(pair.as_bytes()));
        }
    }
    if cfg.include_body && !req.body.is_empty() {
        parts.push(canonical_part(&req.body));
    }
    let joined = parts
        .iter()
        .filter(|p| !p.is_empty())
        .map(String::as_str)
        .collect::<Vec<_>>()
        .join(" ");
    CanonicalText(joined)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::request::RawRequest;

    #[test]
    fn percent_decode_space() {
        assert_eq!(percent_decode("a%20b"), "a b");
    }

    #[test]
    fn percent_decode_identity_without_escapes() {
        assert_eq!(percent_decode("abc"), "abc");
    }

    #[test]
    fn percent_decode_single_pass_only() {
        // One pass peels one layer: %25 -> '%', leaving "%27" intact.
        assert_eq!(percent_decode("%2527"), "%27");
    }

    #[test]
    fn percent_decode_invalid_escapes_pass_through() {
        assert_eq!(percent_decode("%G1"), "%G1");
        assert_eq!(percent_decode("100%"), "100%");
        assert_eq!(percent_decode("%2"), "%2");
    }

    #[test]
    fn percent_decode_plus_is_not_space() {
        assert_eq!(percent_decode("a+b"), "a+b");
    }

    #[test]
    fn utf8_lossy_valid_passthrough() {
        assert_eq!(utf8_decode_lossy("héllo".as_bytes()), "héllo");
    }

    #[test]
    fn utf8_lossy_invalid_byte() {
        assert_eq!(utf8_decode_lossy(&[0xFF]), "\u{FFFD}");
    }

    #[test]
    fn utf8_lossy_truncated_sequence() {
        assert_eq!(utf8_decode_lossy(&[b'a', 0xC3]), "a\u{FFFD}");
    }

    #[test]
    fn canonicalize_double_decodes_then_lowercases() {
        let req = RawRequest::new("GET", "/p?q=%253Cscript%253E");
        let text = canonicalize(&req, &PreprocessConfig::default());
        assert_eq!(text.as_str(), "get /p?q=<script>");
    }

    #[test]
    fn canonicalize_lowercases_plain_target() {
        let req = RawRequest::new("GET", "/A");
        let text = canonicalize(&req, &PreprocessConfig::default());
        assert_eq!(text.as_str(), "get /a");
    }

    #[test]
    fn canonicalize_double_encoded_quote() {
        let req = RawRequest::new("GET", "/x?v=%2527");
        let text = canonicalize(&req, &PreprocessConfig::default());
        assert_eq!(text.as_str(), "get /x?v='");
    }

    #[test]
    fn denylist_removes_header() {
        let cfg = PreprocessConfig {
            filter: HeaderFilter::denylist(["cookie"]),
            include_body: true,
        };
        let req = RawRequest::new("GET", "/").with_header("Cookie", "S=1");
        let text = canonicalize(&req, &cfg);
        assert!(!text.as_str().contains("cookie"));
        assert!(!text.as_str().contains("s=1"));
    }

    #[test]
    fn allowlist_keeps_only_named_headers() {
        let cfg = PreprocessConfig {
            filter: HeaderFilter::allowlist(["user-agent"]).unwrap(),
            include_body: true,
        };
        let req = RawRequest::new("GET", "/")
            .with_header("User-Agent", "curl/8.0")
            .with_header("Accept", "*/*");
        let text = canonicalize(&req, &cfg);
        assert!(text.as_str().contains("user-agent: curl/8.0"));
        assert!(!text.as_str().contains("accept"));
    }

    #[test]
    fn allowlist_requires_names() {
        let empty: [&str; 0] = [];
        assert!(matches!(
            HeaderFilter::allowlist(empty),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn body_flag_controls_inclusion() {
        let req = RawRequest::new("POST", "/submit").with_body("User=Admin".as_bytes());
        let with_body = canonicalize(&req, &PreprocessConfig::default());
        assert_eq!(with_body.as_str(), "post /submit user=admin");
        let cfg = PreprocessConfig {
            include_body: false,
            ..PreprocessConfig::default()
        };
        let without = canonicalize(&req, &cfg);
        assert_eq!(without.as_str(), "post /submit");
    }

    #[test]
    fn canonicalize_total_on_arbitrary_body_bytes() {
        let body: Vec<u8> = (0u8..=255).collect();
        let req = RawRequest::new("GET", "/").with_body(body);
        let text = canonicalize(&req, &PreprocessConfig::default());
        assert_eq!(lowercase(text.as_str()), text.as_str());
    }

    #[test]
    fn lowercase_is_idempotent() {
        let s = "GeT /A?B=C ÄÖÜ";
        assert_eq!(lowercase(&lowercase(s)), lowercase(s));
    }
}
