//! Byte-stable number and CSV formatting.

/// Fixed-point rendering with 9 significant digits, e.g. `3.00000000`,
/// `0.333333333`. Non-finite values render as `nan`, `inf` or `-inf`.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0.00000000".into();
    }
    let mag = x.abs().log10().floor() as i32;
    let decimals = (8 - mag).max(0) as usize;
    let s = format!("{x:.decimals$}");
    // Rounding can carry into a new leading digit (9.999999999 -> 10.0...).
    let digits = s.chars().filter(|c| c.is_ascii_digit()).count();
    let leading_zeros = s
        .chars()
        .filter(|c| *c != '-' && *c != '.')
        .take_while(|c| *c == '0')
        .count();
    if digits - leading_zeros > 9 && decimals > 0 {
        let decimals = decimals - 1;
        return format!("{x:.decimals$}");
    }
    s
}

/// `fmt_num` for present values, empty field otherwise.
pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}
