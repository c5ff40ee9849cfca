use serde::Serialize;
use serde_json::Value;

/// Rounds to 12 significant digits; the shortest representation of the
/// result is what gets printed, so output is stable across platforms.
pub fn round_sig(v: f64) -> f64 {
    if !v.is_finite() || v == 0.0 {
        return v;
    }
    format!("{v:.11e}").parse().expect("formatted float parses")
}

/// Number as it appears inside query expressions.
pub fn fmt_num(v: f64) -> String {
    format!("{}", round_sig(v))
}

fn round_value(value: &mut Value) {
    match value {
        Value::Number(n) if n.is_f64() => {
            let r = round_sig(n.as_f64().expect("f64 number"));
            if let Some(rounded) = serde_json::Number::from_f64(r) {
                *n = rounded;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(round_value),
        Value::Object(map) => map.values_mut().for_each(round_value),
        _ => {}
    }
}

pub(crate) fn to_value<T: Serialize>(v: &T) -> Value {
    let mut value = serde_json::to_value(v).expect("report types serialize");
    round_value(&mut value);
    value
}

/// Pretty JSON with rounded floats and a trailing newline.
pub fn to_json<T: Serialize>(v: &T) -> String {
    let mut out = serde_json::to_string_pretty(&to_value(v)).expect("value serializes");
    out.push('\n');
    out
}

/// YAML with rounded floats.
pub fn to_yaml<T: Serialize>(v: &T) -> String {
    serde_yaml::to_string(&to_value(v)).expect("value serializes")
}

/// Restricts a journey name to characters valid in metric names.
pub fn metric_safe(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
        .collect()
}

/// Lowercase DNS-label form for Kubernetes object names.
pub fn dns_label(name: &str) -> String {
    let mut out: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '-' })
        .collect();
    while out.contains("--") {
        out = out.replace("--", "-");
    }
    out.trim_matches('-').to_string()
}
