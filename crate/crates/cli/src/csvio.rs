//! CSV output helpers. All floating-point fields use C-style `%.12e`
//! formatting (twelve fractional digits, signed two-digit exponent), LF line
//! endings, header row always present.

use std::io::{BufWriter, Write};
use std::path::Path;

/// Format like C's `%.12e`: `-1.234567890123e-05`.
pub fn fmt_e12(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x }; // normalize -0.0
    let s = format!("{x:.12e}");
    let (mantissa, exp) = s.split_once('e').expect("exponential format");
    let e: i32 = exp.parse().expect("integer exponent");
    format!(
        "{mantissa}e{}{:02}",
        if e < 0 { '-' } else { '+' },
        e.abs()
    )
}

pub fn write_rows(
    path: &Path,
    header: &str,
    rows: impl Iterator<Item = Vec<f64>>,
) -> Result<(), String> {
    let file = std::fs::File::create(path)
        .map_err(|e| format!("cannot create {}: {e}", path.display()))?;
    let mut out = BufWriter::new(file);
    let emit = |out: &mut BufWriter<std::fs::File>, line: &str| {
        out.write_all(line.as_bytes())
            .and_then(|_| out.write_all(b"\n"))
            .map_err(|e| format!("cannot write {}: {e}", path.display()))
    };
    emit(&mut out, header)?;
    for row in rows {
        let line = row
            .iter()
            .map(|&x| fmt_e12(x))
            .collect::<Vec<_>>()
            .join(",");
        emit(&mut out, &line)?;
    }
    out.flush()
        .map_err(|e| format!("cannot flush {}: {e}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formats_like_c_printf() {
        assert_eq!(fmt_e12(0.0), "0.000000000000e+00");
        assert_eq!(fmt_e12(-0.0), "0.000000000000e+00");
        assert_eq!(fmt_e12(1.9313), "1.931300000000e+00");
        assert_eq!(fmt_e12(-6.5e-7), "-6.500000000000e-07");
        assert_eq!(fmt_e12(1.0 / 3.0), "3.333333333333e-01");
        assert_eq!(fmt_e12(2.5e11), "2.500000000000e+11");
        assert_eq!(fmt_e12(1e123), "1.000000000000e+123");
    }
}
