//! Structural diff of two reports.
//!
//! Arrays of checks and studies are matched by their id rather than by
//! position, so a missing check shows up as one line instead of a cascade.
//! Wall-clock time and the echoed output path are ignored.

use serde_json::Value;

const IGNORED: [&str; 2] = [".wall_clock_seconds", ".config.output"];
const ID_KEYS: [&str; 2] = ["check_id", "study_id"];

/// One line per differing leaf, `path: left -> right`. Empty when equal.
pub fn diff_reports(a: &Value, b: &Value) -> Vec<String> {
    let mut out = Vec::new();
    walk("", a, b, &mut out);
    out
}

fn keyed(items: &[Value]) -> Option<Vec<(String, &Value)>> {
    items
        .iter()
        .map(|v| {
            ID_KEYS
                .iter()
                .find_map(|k| v.get(*k).and_then(Value::as_str))
                .map(|id| (id.to_string(), v))
        })
        .collect()
}

fn walk(path: &str, a: &Value, b: &Value, out: &mut Vec<String>) {
    match (a, b) {
        (Value::Object(x), Value::Object(y)) => {
            let keys: std::collections::BTreeSet<&String> = x.keys().chain(y.keys()).collect();
            for k in keys {
                let p = format!("{path}.{k}");
                if IGNORED.contains(&p.as_str()) {
                    continue;
                }
                match (x.get(k), y.get(k)) {
                    (Some(u), Some(v)) => walk(&p, u, v, out),
                    (Some(u), None) => out.push(format!("{p}: {u} -> (absent)")),
                    (None, Some(v)) => out.push(format!("{p}: (absent) -> {v}")),
                    (None, None) => unreachable!(),
                }
            }
        }
        (Value::Array(x), Value::Array(y)) => match (keyed(x), keyed(y)) {
            (Some(kx), Some(ky)) if !kx.is_empty() || !ky.is_empty() => {
                for (id, u) in &kx {
                    let p = format!("{path}[{id}]");
                    match ky.iter().find(|(j, _)| j == id) {
                        Some((_, v)) => walk(&p, u, v, out),
                        None => out.push(format!("{p}: present -> (absent)")),
                    }
                }
                for (id, _) in ky.iter().filter(|(j, _)| !kx.iter().any(|(i, _)| i == j)) {
                    out.push(format!("{path}[{id}]: (absent) -> present"));
                }
            }
            _ if x.len() == y.len() => {
                for (i, (u, v)) in x.iter().zip(y).enumerate() {
                    walk(&format!("{path}[{i}]"), u, v, out);
                }
            }
            _ => out.push(format!("{path}: {a} -> {b}")),
        },
        _ if a != b => out.push(format!("{path}: {a} -> {b}")),
        _ => {}
    }
}
