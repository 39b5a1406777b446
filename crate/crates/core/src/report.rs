//! Text output shared by the CLI and the library.

use std::io::{self, Write};

/// Formats `x` with six significant digits in the style of C's `%g`.
pub fn sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    // rounding can push the mantissa to the next decade, e.g. 9.999996
    let rounded: f64 = format!("{:.5e}", x).parse().unwrap_or(x);
    let exp = if rounded.abs() >= 10f64.powi(exp + 1) { exp + 1 } else { exp };
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(format!("{:.*}", decimals, x))
    } else {
        let s = format!("{:.5e}", x);
        let (mantissa, e) = s.split_once('e').unwrap_or((&s, "0"));
        let e: i32 = e.parse().unwrap_or(0);
        format!("{}e{}{:02}", trim_zeros(mantissa.to_string()), if e < 0 { '-' } else { '+' }, e.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// `d_m,p` rows.
pub fn write_profile_csv<W: Write>(distances: &[f64], probabilities: &[f64], mut out: W) -> io::Result<()> {
    writeln!(out, "d_m,p")?;
    for (d, p) in distances.iter().zip(probabilities) {
        writeln!(out, "{},{}", sig6(*d), sig6(*p))?;
    }
    out.flush()
}
