//! Separating reasoning material from answer text in raw completions.
//!
//! Three strategies are tried in fixed order by [`maybe_extract_cognitive`]:
//! `<thinking>` tags, `thought`/`plan`/`reflection` keys of a JSON object, and
//! line-leading `Thought:`/`Plan:`/`Reflection:` markers. Every strategy works
//! by removing character ranges from the input, so the cleaned text plus the
//! removed ranges always rebuilds the original.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde_json::Value;

use crate::schema::ExtractionStrategy;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CognitivePayload {
    pub thought: Option<String>,
    pub plan: Option<String>,
    pub reflection: Option<String>,
    pub strategy: ExtractionStrategy,
    /// Character ranges `[start, end)` of the input that were removed,
    /// sorted and non-overlapping.
    pub source_offsets: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Field {
    Thought,
    Plan,
    Reflection,
}

#[derive(Default)]
struct Fields {
    thought: Vec<String>,
    plan: Vec<String>,
    reflection: Vec<String>,
}

impl Fields {
    fn push(&mut self, field: Field, text: &str) {
        if text.is_empty() {
            return;
        }
        let slot = match field {
            Field::Thought => &mut self.thought,
            Field::Plan => &mut self.plan,
            Field::Reflection => &mut self.reflection,
        };
        slot.push(text.to_string());
    }

    fn is_empty(&self) -> bool {
        self.thought.is_empty() && self.plan.is_empty() && self.reflection.is_empty()
    }
}

fn join(parts: Vec<String>) -> Option<String> {
    (!parts.is_empty()).then(|| parts.join("\n"))
}

/// Removes `removed` byte ranges from `text`, optionally trims the result, and
/// packages the payload. Ranges must be sorted; adjacent or overlapping ones
/// are merged.
fn finish(
    text: &str,
    removed: &[(usize, usize)],
    fields: Fields,
    strategy: ExtractionStrategy,
    trim: bool,
) -> (String, Option<CognitivePayload>) {
    let mut kept: Vec<(usize, usize)> = Vec::new();
    let mut cursor = 0;
    for &(s, e) in removed {
        if s > cursor {
            kept.push((cursor, s));
        }
        cursor = cursor.max(e);
    }
    if cursor < text.len() {
        kept.push((cursor, text.len()));
    }

    if trim {
        while let Some(&(s, e)) = kept.first() {
            let seg = &text[s..e];
            let lead = seg.len() - seg.trim_start().len();
            if lead == seg.len() {
                kept.remove(0);
            } else {
                kept[0].0 += lead;
                break;
            }
        }
        while let Some(&(s, e)) = kept.last() {
            let seg = &text[s..e];
            let trail = seg.len() - seg.trim_end().len();
            if trail == seg.len() {
                kept.pop();
            } else {
                let last = kept.len() - 1;
                kept[last].1 -= trail;
                break;
            }
        }
    }

    let mut cleaned = String::with_capacity(text.len());
    let mut gaps = Vec::new();
    let mut cursor = 0;
    for &(s, e) in &kept {
        if s > cursor {
            gaps.push((cursor, s));
        }
        cleaned.push_str(&text[s..e]);
        cursor = e;
    }
    if cursor < text.len() {
        gaps.push((cursor, text.len()));
    }

    let payload = CognitivePayload {
        thought: join(fields.thought),
        plan: join(fields.plan),
        reflection: join(fields.reflection),
        strategy,
        source_offsets: to_char_ranges(text, &gaps),
    };
    (cleaned, Some(payload))
}

fn to_char_ranges(text: &str, byte_ranges: &[(usize, usize)]) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(byte_ranges.len());
    let mut chars = 0usize;
    let mut at = 0usize;
    let mut advance = |to: usize| {
        chars += text[at..to].chars().count();
        at = to;
        chars
    };
    for &(s, e) in byte_ranges {
        let cs = advance(s);
        let ce = advance(e);
        out.push((cs, ce));
    }
    out
}

fn passthrough(text: &str) -> (String, Option<CognitivePayload>) {
    (text.to_string(), None)
}

// ---------------------------------------------------------------------------
// <thinking> tags

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Tag {
    Open,
    Close,
}

/// Matches `<thinking>` / `</thinking>` at `at` (ASCII case-insensitive,
/// whitespace allowed inside the brackets). Returns the tag kind and its end.
fn match_tag(text: &str, at: usize) -> Option<(Tag, usize)> {
    let b = text.as_bytes();
    let mut i = at + 1;
    let skip_ws = |mut i: usize| {
        while i < b.len() && b[i].is_ascii_whitespace() {
            i += 1;
        }
        i
    };
    i = skip_ws(i);
    let kind = if b.get(i) == Some(&b'/') {
        i = skip_ws(i + 1);
        Tag::Close
    } else {
        Tag::Open
    };
    const NAME: &[u8] = b"thinking";
    if b.len() < i + NAME.len() || !b[i..i + NAME.len()].eq_ignore_ascii_case(NAME) {
        return None;
    }
    i = skip_ws(i + NAME.len());
    (b.get(i) == Some(&b'>')).then_some((kind, i + 1))
}

pub fn extract_xml_tagged(text: &str) -> (String, Option<CognitivePayload>) {
    let mut tags = Vec::new();
    for (pos, _) in text.match_indices('<') {
        if let Some((kind, end)) = match_tag(text, pos) {
            tags.push((kind, pos, end));
        }
    }
    if tags.is_empty() || tags.len() % 2 != 0 {
        return passthrough(text);
    }

    let mut regions = Vec::new();
    let mut fields = Fields::default();
    for pair in tags.chunks_exact(2) {
        let ((k0, open_start, open_end), (k1, close_start, close_end)) = (pair[0], pair[1]);
        if k0 != Tag::Open || k1 != Tag::Close {
            return passthrough(text);
        }
        fields.push(Field::Thought, text[open_end..close_start].trim());
        regions.push((open_start, close_end));
    }
    if fields.is_empty() {
        return passthrough(text);
    }
    finish(text, &regions, fields, ExtractionStrategy::XmlTag, true)
}

// ---------------------------------------------------------------------------
// JSON object keys

/// Byte span of a JSON object found in `text`.
fn json_object_candidate(text: &str) -> Option<(usize, usize)> {
    let trimmed = text.trim();
    if trimmed.starts_with('{') {
        let start = text.len() - text.trim_start().len();
        if is_json_object(trimmed) {
            return Some((start, start + trimmed.len()));
        }
    }

    let mut found = None;
    for (inner_start, inner_end) in fenced_blocks(text) {
        let inner = &text[inner_start..inner_end];
        let body = inner.trim();
        if body.starts_with('{') && is_json_object(body) {
            if found.is_some() {
                return None;
            }
            let lead = inner.len() - inner.trim_start().len();
            found = Some((inner_start + lead, inner_start + lead + body.len()));
        }
    }
    found
}

fn is_json_object(s: &str) -> bool {
    matches!(serde_json::from_str::<Value>(s), Ok(Value::Object(_)))
}

/// Content byte ranges of ``` fenced blocks (fence lines excluded).
fn fenced_blocks(text: &str) -> Vec<(usize, usize)> {
    let mut blocks = Vec::new();
    let mut open: Option<usize> = None;
    for (start, line) in lines_with_offsets(text) {
        let content = line.trim_end_matches(['\n', '\r']);
        let stripped = content.trim_start();
        if !stripped.starts_with("```") {
            continue;
        }
        match open {
            None => open = Some(start + line.len()),
            Some(body_start) if stripped.trim_end() == "```" => {
                blocks.push((body_start, start));
                open = None;
            }
            Some(_) => {}
        }
    }
    blocks
}

fn lines_with_offsets(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.split_inclusive('\n').scan(0usize, |at, line| {
        let start = *at;
        *at += line.len();
        Some((start, line))
    })
}

struct Member {
    start: usize,
    end: usize,
    key: String,
    value: Value,
}

fn skip_ws(b: &[u8], mut i: usize) -> usize {
    while i < b.len() && matches!(b[i], b' ' | b'\t' | b'\n' | b'\r') {
        i += 1;
    }
    i
}

fn skip_string(b: &[u8], mut i: usize) -> usize {
    i += 1;
    while i < b.len() {
        match b[i] {
            b'\\' => i += 2,
            b'"' => return i + 1,
            _ => i += 1,
        }
    }
    i
}

fn skip_value(b: &[u8], mut i: usize) -> usize {
    match b.get(i) {
        Some(b'"') => skip_string(b, i),
        Some(b'{') | Some(b'[') => {
            let mut depth = 0usize;
            while i < b.len() {
                match b[i] {
                    b'"' => {
                        i = skip_string(b, i);
                        continue;
                    }
                    b'{' | b'[' => depth += 1,
                    b'}' | b']' => {
                        depth -= 1;
                        if depth == 0 {
                            return i + 1;
                        }
                    }
                    _ => {}
                }
                i += 1;
            }
            i
        }
        _ => {
            while i < b.len() && !matches!(b[i], b',' | b'}' | b']' | b' ' | b'\t' | b'\n' | b'\r') {
                i += 1;
            }
            i
        }
    }
}

/// Top-level members of an already-validated JSON object text, with byte
/// spans relative to `obj`.
fn object_members(obj: &str) -> Vec<Member> {
    let b = obj.as_bytes();
    let mut members = Vec::new();
    let mut i = skip_ws(b, 1);
    while i < b.len() && b[i] == b'"' {
        let start = i;
        let key_end = skip_string(b, i);
        let key = serde_json::from_str::<String>(&obj[start..key_end]).unwrap_or_default();
        i = skip_ws(b, key_end);
        i = skip_ws(b, i + 1);
        let value_start = i;
        let value_end = skip_value(b, i);
        let value = serde_json::from_str(&obj[value_start..value_end]).unwrap_or(Value::Null);
        members.push(Member {
            start,
            end: value_end,
            key,
            value,
        });
        i = skip_ws(b, value_end);
        if b.get(i) == Some(&b',') {
            i = skip_ws(b, i + 1);
        } else {
            break;
        }
    }
    members
}

fn json_field(key: &str) -> Option<Field> {
    match key {
        "thought" => Some(Field::Thought),
        "plan" => Some(Field::Plan),
        "reflection" => Some(Field::Reflection),
        _ => None,
    }
}

pub fn extract_json_fields(text: &str) -> (String, Option<CognitivePayload>) {
    let Some((obj_start, obj_end)) = json_object_candidate(text) else {
        return passthrough(text);
    };
    let members = object_members(&text[obj_start..obj_end]);

    let mut remove = alloc::vec![false; members.len()];
    let mut last: [Option<&str>; 3] = [None; 3];
    for (idx, m) in members.iter().enumerate() {
        if let (Some(field), Value::String(s)) = (json_field(&m.key), &m.value) {
            remove[idx] = true;
            last[field as usize] = Some(s.as_str());
        }
    }
    let mut fields = Fields::default();
    for (field, value) in [Field::Thought, Field::Plan, Field::Reflection]
        .into_iter()
        .zip(last)
    {
        if let Some(v) = value {
            fields.push(field, v);
        }
    }
    if fields.is_empty() {
        return passthrough(text);
    }

    // Each run of removed members takes the following separator with it, or
    // the preceding one when the run ends the object.
    let mut ranges = Vec::new();
    let mut idx = 0;
    while idx < members.len() {
        if !remove[idx] {
            idx += 1;
            continue;
        }
        let run_start = idx;
        while idx < members.len() && remove[idx] {
            idx += 1;
        }
        let run_end = idx - 1;
        let range = if idx < members.len() {
            (members[run_start].start, members[idx].start)
        } else if run_start > 0 {
            (members[run_start - 1].end, members[run_end].end)
        } else {
            (members[run_start].start, members[run_end].end)
        };
        ranges.push((obj_start + range.0, obj_start + range.1));
    }
    finish(text, &ranges, fields, ExtractionStrategy::JsonField, false)
}

// ---------------------------------------------------------------------------
// Line markers

/// Labels recognised at the start of a line.
#[derive(Debug, Clone)]
pub struct MarkerVocabulary {
    /// Labels whose sections are captured and removed.
    pub thought: Vec<String>,
    pub plan: Vec<String>,
    pub reflection: Vec<String>,
    /// Labels that end a captured section and stay in the cleaned text.
    pub terminators: Vec<String>,
}

impl Default for MarkerVocabulary {
    fn default() -> Self {
        let v = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect();
        Self {
            thought: v(&["Thought"]),
            plan: v(&["Plan"]),
            reflection: v(&["Reflection"]),
            terminators: v(&[
                "Final Answer",
                "Answer",
                "Action Input",
                "Action",
                "Observation",
            ]),
        }
    }
}

impl MarkerVocabulary {
    fn labels(&self) -> impl Iterator<Item = (&str, Option<Field>)> {
        fn tag(xs: &[String], f: Option<Field>) -> impl Iterator<Item = (&str, Option<Field>)> {
            xs.iter().map(move |s| (s.as_str(), f))
        }
        tag(&self.thought, Some(Field::Thought))
            .chain(tag(&self.plan, Some(Field::Plan)))
            .chain(tag(&self.reflection, Some(Field::Reflection)))
            .chain(tag(&self.terminators, None))
    }

    /// Recognises `Label:`, `**Label:**`, `**Label**:`, `## Label:` and
    /// similar. Returns the captured field (if any) and the byte offset of the
    /// content after the marker, relative to `line`.
    fn match_line(&self, line: &str) -> Option<(Option<Field>, usize)> {
        let b = line.as_bytes();
        let mut i = 0;
        while i < b.len() && matches!(b[i], b' ' | b'\t') {
            i += 1;
        }
        let hashes = b[i..].iter().take_while(|c| **c == b'#').count();
        if hashes > 0 {
            i += hashes;
            while i < b.len() && b[i] == b' ' {
                i += 1;
            }
        }
        let wrapper: &[u8] = [&b"**"[..], b"__", b"*", b"_"]
            .into_iter()
            .find(|w| b[i..].starts_with(w))
            .unwrap_or(b"");
        i += wrapper.len();

        let mut best: Option<(&str, Option<Field>)> = None;
        for (label, field) in self.labels() {
            let lb = label.as_bytes();
            if b.len() >= i + lb.len()
                && b[i..i + lb.len()].eq_ignore_ascii_case(lb)
                && best.is_none_or(|(l, _)| l.len() < label.len())
            {
                best = Some((label, field));
            }
        }
        let (label, field) = best?;
        i += label.len();

        let rest = &b[i..];
        let after = if wrapper.is_empty() {
            rest.starts_with(b":").then_some(1)
        } else if (rest.starts_with(b":") && rest[1..].starts_with(wrapper))
            || (rest.starts_with(wrapper) && rest[wrapper.len()..].starts_with(b":"))
        {
            Some(wrapper.len() + 1)
        } else {
            None
        }?;
        Some((field, i + after))
    }
}

pub fn extract_marker_sections(text: &str) -> (String, Option<CognitivePayload>) {
    extract_marker_sections_with(text, &MarkerVocabulary::default())
}

pub fn extract_marker_sections_with(
    text: &str,
    vocab: &MarkerVocabulary,
) -> (String, Option<CognitivePayload>) {
    let mut markers = Vec::new();
    for (start, line) in lines_with_offsets(text) {
        if let Some((field, content)) = vocab.match_line(line) {
            markers.push((start, field, start + content));
        }
    }

    let mut fields = Fields::default();
    let mut ranges = Vec::new();
    for (idx, &(line_start, field, content_start)) in markers.iter().enumerate() {
        let Some(field) = field else { continue };
        let section_end = markers.get(idx + 1).map_or(text.len(), |m| m.0);
        fields.push(field, text[content_start..section_end].trim());
        ranges.push((line_start, section_end));
    }
    if fields.is_empty() {
        return passthrough(text);
    }
    finish(text, &ranges, fields, ExtractionStrategy::Marker, true)
}

/// Tries XML tags, then JSON keys, then line markers; the first strategy that
/// yields a payload wins. Without a payload the text comes back unchanged.
pub fn maybe_extract_cognitive(text: &str) -> (String, Option<CognitivePayload>) {
    for strategy in [extract_xml_tagged, extract_json_fields, extract_marker_sections] {
        let (cleaned, payload) = strategy(text);
        if payload.is_some() {
            return (cleaned, payload);
        }
    }
    passthrough(text)
}

/// Rebuilds the original text from the cleaned text and the removed ranges.
pub fn reinsert(original: &str, cleaned: &str, source_offsets: &[(usize, usize)]) -> String {
    let chars: Vec<char> = original.chars().collect();
    let mut cleaned_chars = cleaned.chars();
    let mut out = String::with_capacity(original.len());
    let mut cursor = 0;
    for &(s, e) in source_offsets {
        out.extend(cleaned_chars.by_ref().take(s.saturating_sub(cursor)));
        out.extend(&chars[s.min(chars.len())..e.min(chars.len())]);
        cursor = e;
    }
    out.extend(cleaned_chars);
    out
}
