//! Deterministic plain-decimal formatting with a fixed number of significant
//! digits, shared by the topology writer and the CSV emitters so repeated
//! runs produce byte-identical files.

/// Format `x` with `sig` significant digits in plain decimal notation.
pub fn format_sig(x: f64, sig: usize) -> String {
    assert!(sig > 0);
    if x == 0.0 || !x.is_finite() {
        // NaN/inf never appear in valid outputs; render them readably anyway.
        if x.is_finite() {
            return "0".to_string();
        }
        return format!("{x}");
    }
    let exponent = x.abs().log10().floor() as i64;
    let decimals = (sig as i64 - 1 - exponent).clamp(0, 30) as usize;
    format!("{x:.decimals$}")
}
