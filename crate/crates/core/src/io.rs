//! Number formatting and key-value text shared by the file writers.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// 17 significant digits, enough to re-parse every `f64` bit for bit.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Ordered `key = value` lines.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct KvText {
    lines: Vec<(String, String)>,
}

impl KvText {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn comment(&mut self, text: &str) -> &mut Self {
        self.lines.push((format!("# {text}"), String::new()));
        self
    }

    pub fn num(&mut self, key: &str, value: f64) -> &mut Self {
        self.lines.push((key.to_string(), num(value)));
        self
    }

    pub fn text(&mut self, key: &str, value: impl ToString) -> &mut Self {
        self.lines.push((key.to_string(), value.to_string()));
        self
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.lines {
            if k.starts_with('#') {
                out.push_str(k);
            } else {
                out.push_str(k);
                out.push_str(" = ");
                out.push_str(v);
            }
            out.push('\n');
        }
        out
    }
}

/// Parse `key = value` lines, skipping blanks and `#` comments.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", i + 1)))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn num_roundtrips_bit_exact(x in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            let back: f64 = num(x).parse().unwrap();
            prop_assert_eq!(back.to_bits(), x.to_bits());
        }
    }

    #[test]
    fn kv_roundtrip() {
        let mut kv = KvText::new();
        kv.comment("header").num("a", 0.1).text("mode", "timed");
        let parsed = parse_kv(&kv.render()).unwrap();
        assert_eq!(parsed["a"].parse::<f64>().unwrap(), 0.1);
        assert_eq!(parsed["mode"], "timed");
        assert!(parse_kv("no equals sign").is_err());
    }
}
