//! CSV formatting helpers shared by the library writers and the CLI.

use std::io::Write;

/// 17 significant digits in scientific notation, enough to round-trip.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x:.16e}")
    }
}

/// Writes each `(key, value)` as a `# key=value` line.
pub fn write_header<W: Write>(mut w: W, entries: &[(&str, String)]) -> std::io::Result<()> {
    for (k, v) in entries {
        writeln!(w, "# {k}={v}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips() {
        for x in [0.1, 1.0 / 3.0, 1e-300, 6.02214076e23, -2.5] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_f64(0.5), "5.0000000000000000e-1");
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
    }
}
