//! Tag recognition shared by the parser, the serializer and the linter.

use std::ops::Range;

use super::CognitiveLabel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Tag<'a> {
    pub closing: bool,
    pub name: &'a str,
    /// Raw text between the name and `>`, with its byte offset in the source.
    pub attrs: &'a str,
    pub attrs_start: usize,
    pub span: (usize, usize),
}

impl Tag<'_> {
    pub fn range(&self) -> Range<usize> {
        self.span.0..self.span.1
    }

    /// `node` or one of the block labels.
    pub fn is_structural(&self) -> bool {
        self.name == "node" || CognitiveLabel::from_tag(self.name).is_some()
    }
}

fn is_name_start(b: u8) -> bool {
    b.is_ascii_alphabetic()
}

fn is_name_char(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_' || b == b'-'
}

/// Recognizes `<name ...>` or `</name>` starting at byte `pos`.
///
/// Anything else starting with `<` (comparisons such as `x < 3`) is text.
pub(crate) fn lex_tag(src: &str, pos: usize) -> Option<Tag<'_>> {
    let bytes = src.as_bytes();
    if bytes.get(pos) != Some(&b'<') {
        return None;
    }
    let mut i = pos + 1;
    let closing = bytes.get(i) == Some(&b'/');
    if closing {
        i += 1;
    }
    let name_start = i;
    if !bytes.get(i).copied().is_some_and(is_name_start) {
        return None;
    }
    while bytes.get(i).copied().is_some_and(is_name_char) {
        i += 1;
    }
    let name = &src[name_start..i];
    match bytes.get(i) {
        Some(b'>') => {}
        Some(b) if b.is_ascii_whitespace() => {}
        _ => return None,
    }
    let attrs_start = i;
    while let Some(&b) = bytes.get(i) {
        match b {
            b'>' => {
                let attrs = &src[attrs_start..i];
                if closing && !attrs.trim().is_empty() {
                    return None;
                }
                return Some(Tag { closing, name, attrs, attrs_start, span: (pos, i + 1) });
            }
            b'<' => return None,
            _ => i += 1,
        }
    }
    None
}

/// Offset of the next `<` at or after `from` that starts a tag.
pub(crate) fn next_tag(src: &str, from: usize) -> Option<(usize, Tag<'_>)> {
    let bytes = src.as_bytes();
    let mut i = from;
    while i < bytes.len() {
        match memchr_lt(&bytes[i..]) {
            Some(off) => {
                let p = i + off;
                if let Some(tag) = lex_tag(src, p) {
                    return Some((p, tag));
                }
                i = p + 1;
            }
            None => return None,
        }
    }
    None
}

fn memchr_lt(haystack: &[u8]) -> Option<usize> {
    haystack.iter().position(|&b| b == b'<')
}

/// Parsed `name="value"` attribute with the byte span of the whole pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Attr<'a> {
    pub name: &'a str,
    pub value: &'a str,
    pub span: Range<usize>,
}

/// Splits raw attribute text into pairs. Parsing stops at the first malformed
/// stretch, whose span is returned alongside the pairs read so far.
pub(crate) fn parse_attrs(raw: &str, base: usize) -> (Vec<Attr<'_>>, Option<Range<usize>>) {
    let bytes = raw.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    loop {
        while bytes.get(i).is_some_and(|b| b.is_ascii_whitespace()) {
            i += 1;
        }
        if i >= bytes.len() {
            return (out, None);
        }
        let start = i;
        while bytes.get(i).copied().is_some_and(is_name_char) {
            i += 1;
        }
        let bad = Some(base + start..base + raw.len());
        if i == start || bytes.get(i) != Some(&b'=') || bytes.get(i + 1) != Some(&b'"') {
            return (out, bad);
        }
        let name = &raw[start..i];
        let value_start = i + 2;
        let Some(len) = raw[value_start..].find('"') else {
            return (out, bad);
        };
        let value = &raw[value_start..value_start + len];
        i = value_start + len + 1;
        out.push(Attr { name, value, span: base + start..base + i });
    }
}

/// Whether `content` survives a serialize/parse round trip unchanged.
pub(crate) fn is_representable_content(content: &str) -> bool {
    if content.is_empty() || content.trim() != content || content.contains('\r') {
        return false;
    }
    let mut from = 0;
    while let Some((p, tag)) = next_tag(content, from) {
        if tag.is_structural() {
            return false;
        }
        from = p + 1;
    }
    true
}
