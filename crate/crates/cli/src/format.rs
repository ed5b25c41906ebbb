/// Shortest decimal that parses back to the same `f64`.
pub fn real(value: f64) -> String {
    format!("{value}")
}

pub fn optional(value: Option<f64>) -> String {
    value.map(real).unwrap_or_default()
}
