//! Reports printed either as `key: value` text or as one JSON object with
//! the same fields.

use serde::Serialize;
use serde_json::{Map, Value};

#[derive(Default)]
pub struct Report {
    fields: Vec<(String, Value)>,
}

impl Report {
    pub fn new() -> Self {
        Report::default()
    }

    pub fn field(mut self, key: &str, value: impl Serialize) -> Self {
        self.push(key, value);
        self
    }

    pub fn push(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).expect("report values serialize");
        self.fields.push((key.to_string(), v));
    }

    pub fn render(&self, json: bool) -> String {
        if json {
            let map: Map<String, Value> = self.fields.iter().cloned().collect();
            let mut s = serde_json::to_string_pretty(&Value::Object(map)).expect("json");
            s.push('\n');
            return s;
        }
        let mut out = String::new();
        for (k, v) in &self.fields {
            match v {
                Value::Array(items) if !items.is_empty() && items.iter().all(|i| i.is_array() || i.is_object()) => {
                    out.push_str(&format!("{k}:\n"));
                    for item in items {
                        out.push_str(&format!("  {}\n", inline(item)));
                    }
                }
                _ => out.push_str(&format!("{k}: {}\n", inline(v))),
            }
        }
        out
    }
}

fn inline(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => "-".to_string(),
        Value::Object(map) => map.iter().map(|(k, v)| format!("{k}={}", inline(v))).collect::<Vec<_>>().join(" "),
        other => other.to_string(),
    }
}
