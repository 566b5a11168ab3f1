//! Reversible byte escaping for text artifacts.
//!
//! Printable ASCII passes through, backslash doubles, everything else
//! (control bytes, DEL, anything ≥ 0x80) becomes `\xHH`. The encoded form is
//! pure printable ASCII, so it survives JSON strings, TSV cells and
//! line-oriented files, and decodes back to the exact original bytes.

use std::fmt::Write as _;

pub fn escape_bytes(data: &[u8]) -> String {
    let mut out = String::with_capacity(data.len());
    for &b in data {
        match b {
            b'\\' => out.push_str("\\\\"),
            0x20..=0x7e => out.push(b as char),
            _ => {
                let _ = write!(out, "\\x{b:02x}");
            }
        }
    }
    out
}

pub fn unescape_bytes(text: &str) -> Result<Vec<u8>, String> {
    let bytes = text.as_bytes();
    let mut out = Vec::with_capacity(bytes.len());
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'\\' => {
                match bytes.get(i + 1) {
                    Some(b'\\') => {
                        out.push(b'\\');
                        i += 2;
                    }
                    Some(b'x') => {
                        let hex = bytes
                            .get(i + 2..i + 4)
                            .and_then(|h| std::str::from_utf8(h).ok())
                            .and_then(|h| u8::from_str_radix(h, 16).ok());
                        match hex {
                            Some(b) => {
                                out.push(b);
                                i += 4;
                            }
                            None => return Err(format!("bad \\x escape at byte {i}")),
                        }
                    }
                    _ => return Err(format!("dangling backslash at byte {i}")),
                }
            }
            b @ 0x20..=0x7e => {
                out.push(b);
                i += 1;
            }
            b => return Err(format!("unescaped byte 0x{b:02x} at offset {i}")),
        }
    }
    Ok(out)
}

/// Escape a token (always valid UTF-8 in and out).
pub fn escape_str(s: &str) -> String {
    escape_bytes(s.as_bytes())
}

pub fn unescape_str(text: &str) -> Result<String, String> {
    let bytes = unescape_bytes(text)?;
    String::from_utf8(bytes).map_err(|_| "escaped text is not valid UTF-8".to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn printable_ascii_is_untouched() {
        assert_eq!(escape_bytes(b"get /a?x=1"), "get /a?x=1");
    }

    #[test]
    fn control_and_high_bytes_are_hex_escaped() {
        assert_eq!(escape_bytes(&[0x00, 0xff, b'\n']), "\\x00\\xff\\x0a");
        assert_eq!(escape_bytes(b"a\\b"), "a\\\\b");
    }

    #[test]
    fn invalid_escapes_error() {
        assert!(unescape_bytes("\\").is_err());
        assert!(unescape_bytes("\\xg0").is_err());
        assert!(unescape_bytes("\\x1").is_err());
        assert!(unescape_bytes("raw\nnewline").is_err());
    }

    proptest! {
        #[test]
        fn round_trip_is_exact(data in proptest::collection::vec(any::<u8>(), 0..512)) {
            let encoded = escape_bytes(&data);
            prop_assert!(encoded.bytes().all(|b| (0x20..=0x7e).contains(&b)));
            prop_assert_eq!(unescape_bytes(&encoded).unwrap(), data);
        }
    }
}
