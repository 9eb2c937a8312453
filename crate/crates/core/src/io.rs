//! CSV exchange format for sampled impedances.
//!
//! ```text
//! # label = Z[0]
//! # mixing_index = 0
//! freq_hz,re_ohm,im_ohm
//! 1.0000000000000000e6,1.0000000000000000e0,0.0000000000000000e0
//! ```
//!
//! Lines starting with `#` are comments; `# key = value` comments before the
//! header carry the label and the mixing index.

use std::io::Write;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::frf::Frf;

pub const HEADER: [&str; 3] = ["freq_hz", "re_ohm", "im_ohm"];

pub fn read_csv(path: impl AsRef<Path>) -> Result<Frf> {
    let text = std::fs::read_to_string(path.as_ref())?;
    let frf = parse_csv(&text)?;
    if frf.label.is_empty() {
        let stem = path.as_ref().file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        return Ok(frf.with_label(stem));
    }
    Ok(frf)
}

pub fn parse_csv(text: &str) -> Result<Frf> {
    let mut label = String::new();
    let mut mixing_index = 0;
    for (i, line) in text.lines().enumerate() {
        let Some(comment) = line.trim_start().strip_prefix('#') else { continue };
        let Some((key, value)) = comment.split_once('=') else { continue };
        match key.trim() {
            "label" => label = value.trim().to_string(),
            "mixing_index" => {
                mixing_index = value.trim().parse().map_err(|e| Error::Parse {
                    line: i as u64 + 1,
                    msg: format!("mixing_index: {e}"),
                })?
            }
            _ => {}
        }
    }

    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| csv_error(&e))?.clone();
    if header.iter().collect::<Vec<_>>() != HEADER {
        let line = header.position().map_or(1, |p| p.line());
        return Err(Error::Parse { line, msg: format!("expected header {}", HEADER.join(",")) });
    }
    let mut freqs = Vec::new();
    let mut values = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(&e))?;
        let line = record.position().map_or(0, |p| p.line());
        let field = |k: usize| -> Result<f64> {
            let raw = &record[k];
            let v: f64 = raw.parse().map_err(|_| Error::Parse { line, msg: format!("{}: cannot parse {raw:?}", HEADER[k]) })?;
            if !v.is_finite() {
                return Err(Error::Parse { line, msg: format!("{}: non-finite value", HEADER[k]) });
            }
            Ok(v)
        };
        let f = field(0)?;
        if freqs.last().is_some_and(|&prev| f <= prev) {
            return Err(Error::NonMonotonic { line });
        }
        freqs.push(f);
        values.push(Complex64::new(field(1)?, field(2)?));
    }
    Ok(Frf::new(freqs, values)?.with_label(label).with_mixing_index(mixing_index))
}

fn csv_error(e: &csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    Error::Parse { line, msg: e.to_string() }
}

pub fn write_csv(path: impl AsRef<Path>, frf: &Frf) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_csv_to(&mut file, frf)?;
    file.flush()?;
    Ok(())
}

/// Writes with 17 significant digits, enough to read back bit-identical.
pub fn write_csv_to(out: &mut impl Write, frf: &Frf) -> Result<()> {
    if !frf.label.is_empty() {
        writeln!(out, "# label = {}", frf.label)?;
    }
    if frf.mixing_index != 0 {
        writeln!(out, "# mixing_index = {}", frf.mixing_index)?;
    }
    writeln!(out, "{}", HEADER.join(","))?;
    for (f, z) in frf.iter() {
        writeln!(out, "{f:.16e},{:.16e},{:.16e}", z.re, z.im)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn body(rows: &[&str]) -> String {
        let mut s = String::from("freq_hz,re_ohm,im_ohm\n");
        for r in rows {
            s.push_str(r);
            s.push('\n');
        }
        s
    }

    fn eight() -> Vec<String> {
        (0..8).map(|i| format!("{}e6,1.0,0.0", i + 1)).collect()
    }

    #[test]
    fn parses_sample_row() {
        let rows = eight();
        let frf = parse_csv(&body(&rows.iter().map(String::as_str).collect::<Vec<_>>())).unwrap();
        assert_eq!(frf.freqs()[0], 1e6);
        assert_eq!(frf.values()[0], Complex64::new(1.0, 0.0));
    }

    #[test]
    fn comments_and_metadata() {
        let mut text = String::from("# label = Z[-1]\n# mixing_index = -1\n# free text\n");
        text.push_str(&body(&eight().iter().map(String::as_str).collect::<Vec<_>>()));
        text.push_str("# trailing note\n");
        let frf = parse_csv(&text).unwrap();
        assert_eq!(frf.label, "Z[-1]");
        assert_eq!(frf.mixing_index, -1);
        assert_eq!(frf.len(), 8);
    }

    #[test]
    fn shuffled_rows_are_non_monotonic() {
        let mut rows = eight();
        rows.swap(2, 5);
        let text = body(&rows.iter().map(String::as_str).collect::<Vec<_>>());
        match parse_csv(&text) {
            Err(Error::NonMonotonic { line }) => assert_eq!(line, 5),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bad_number_reports_line() {
        let mut rows = eight();
        rows[3] = "4e6,abc,0".into();
        let text = body(&rows.iter().map(String::as_str).collect::<Vec<_>>());
        assert!(matches!(parse_csv(&text), Err(Error::Parse { line: 5, .. })));
    }

    #[test]
    fn wrong_header() {
        let text = "f,re,im\n1,1,0\n";
        assert!(matches!(parse_csv(text), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn ragged_row_is_a_parse_error() {
        let mut rows = eight();
        rows[1] = "2e6,1.0".into();
        let text = body(&rows.iter().map(String::as_str).collect::<Vec<_>>());
        assert!(matches!(parse_csv(&text), Err(Error::Parse { .. })));
    }

    proptest! {
        #[test]
        fn write_then_read_is_bit_identical(
            steps in proptest::collection::vec(1e-3f64..1e9, 8..40),
            seed in proptest::collection::vec((-1e12f64..1e12, -1e12f64..1e12), 40),
        ) {
            let mut f = 0.0;
            let freqs: Vec<f64> = steps.iter().map(|d| { f += d; f }).collect();
            let values: Vec<Complex64> = seed[..freqs.len()].iter().map(|&(a, b)| Complex64::new(a, b)).collect();
            let frf = Frf::new(freqs, values).unwrap().with_label("x").with_mixing_index(2);
            let mut buf = Vec::new();
            write_csv_to(&mut buf, &frf).unwrap();
            let back = parse_csv(std::str::from_utf8(&buf).unwrap()).unwrap();
            prop_assert_eq!(back.freqs(), frf.freqs());
            prop_assert_eq!(back.values(), frf.values());
            prop_assert_eq!(back.mixing_index, 2);
        }
    }
}
