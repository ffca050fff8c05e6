//! Fixed decimal serialisation shared by the record files.

/// 17 significant digits in scientific notation: round-trips every finite
/// `f64` exactly and is also a valid JSON number.
pub(crate) fn float17(x: f64) -> String {
    format!("{x:.16e}")
}
