//! Deterministic JSON text output.
//!
//! Numbers never use exponent notation, object keys come out in the order
//! the caller (or the sorted `serde_json::Map`) supplies, and no whitespace
//! is emitted between tokens.

use alloc::string::String;
use core::fmt::Write;

use serde_json::Value;

pub fn write_str(out: &mut String, s: &str) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            '\u{08}' => out.push_str("\\b"),
            '\u{0c}' => out.push_str("\\f"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
}

/// Writes a finite float in shortest round-trip decimal form.
///
/// Non-finite input is written as `0`; callers validate finiteness first.
pub fn write_f64(out: &mut String, v: f64) {
    if !v.is_finite() || v == 0.0 {
        out.push('0');
        return;
    }
    let _ = write!(out, "{v}");
}

pub fn write_value(out: &mut String, value: &Value) {
    match value {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(u) = n.as_u64() {
                let _ = write!(out, "{u}");
            } else if let Some(i) = n.as_i64() {
                let _ = write!(out, "{i}");
            } else {
                write_f64(out, n.as_f64().unwrap_or(0.0));
            }
        }
        Value::String(s) => write_str(out, s),
        Value::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_value(out, item);
            }
            out.push(']');
        }
        Value::Object(map) => {
            out.push('{');
            for (i, (k, v)) in map.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_str(out, k);
                out.push(':');
                write_value(out, v);
            }
            out.push('}');
        }
    }
}

pub fn to_string(value: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, value);
    out
}

/// Incremental writer for objects with a caller-fixed key order.
pub struct ObjectWriter<'a> {
    out: &'a mut String,
    first: bool,
}

impl<'a> ObjectWriter<'a> {
    pub fn new(out: &'a mut String) -> Self {
        out.push('{');
        Self { out, first: true }
    }

    fn key(&mut self, key: &str) {
        if !self.first {
            self.out.push(',');
        }
        self.first = false;
        write_str(self.out, key);
        self.out.push(':');
    }

    pub fn str(&mut self, key: &str, v: &str) -> &mut Self {
        self.key(key);
        write_str(self.out, v);
        self
    }

    pub fn opt_str(&mut self, key: &str, v: Option<&str>) -> &mut Self {
        if let Some(v) = v {
            self.str(key, v);
        }
        self
    }

    pub fn display(&mut self, key: &str, v: impl core::fmt::Display) -> &mut Self {
        self.key(key);
        let _ = write!(self.out, "\"{v}\"");
        self
    }

    pub fn int(&mut self, key: &str, v: impl core::fmt::Display) -> &mut Self {
        self.key(key);
        let _ = write!(self.out, "{v}");
        self
    }

    pub fn opt_int<T: core::fmt::Display>(&mut self, key: &str, v: Option<T>) -> &mut Self {
        if let Some(v) = v {
            self.int(key, v);
        }
        self
    }

    pub fn float(&mut self, key: &str, v: f64) -> &mut Self {
        self.key(key);
        write_f64(self.out, v);
        self
    }

    pub fn opt_float(&mut self, key: &str, v: Option<f64>) -> &mut Self {
        if let Some(v) = v {
            self.float(key, v);
        }
        self
    }

    pub fn bool(&mut self, key: &str, v: bool) -> &mut Self {
        self.key(key);
        self.out.push_str(if v { "true" } else { "false" });
        self
    }

    pub fn value(&mut self, key: &str, v: &Value) -> &mut Self {
        self.key(key);
        write_value(self.out, v);
        self
    }

    /// Writes a nested value produced by `f`; `f` must emit exactly one JSON value.
    pub fn raw(&mut self, key: &str, f: impl FnOnce(&mut String)) -> &mut Self {
        self.key(key);
        f(self.out);
        self
    }

    pub fn finish(&mut self) {
        self.out.push('}');
    }
}
