//! Number formatting shared by every CSV artifact.

/// 17 significant digits in scientific notation; parses back to the same
/// `f64` bit pattern.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn parse_f64(s: &str) -> Option<f64> {
    s.trim().parse().ok()
}
