//! Text artifacts. Every float is written with 17 significant digits so
//! files read back to the same bits.

use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;

use ctstl_core::transcription::DenseTrajectory;

/// `x` in scientific notation with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// JSON formatter that writes floats through [`fmt_f64`]. Non-finite values
/// are emitted as `null` by the serializer before reaching this.
struct FixedDigits;

impl serde_json::ser::Formatter for FixedDigits {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(fmt_f64(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
}

/// Compact JSON with fixed float formatting and a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String, serde_json::Error> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedDigits);
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    let text = to_json(value).map_err(io::Error::other)?;
    std::fs::write(path, text)
}

/// One row per dense sample: `t`, then the model channels.
pub fn write_trajectory_csv<W: Write>(out: W, dense: &DenseTrajectory) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend(dense.channels.iter().cloned());
    w.write_record(&header)?;
    for s in 0..dense.len() {
        let mut row = vec![fmt_f64(dense.times[s])];
        row.extend(dense.states[s].iter().map(|v| fmt_f64(*v)));
        row.extend(dense.controls[s].iter().map(|v| fmt_f64(*v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 5e-324, 0.0] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
            let mantissa = s.split('e').next().unwrap();
            assert_eq!(mantissa.chars().filter(|c| c.is_ascii_digit()).count(), 17);
        }
    }

    #[test]
    fn json_floats_are_fixed_and_nan_is_null() {
        #[derive(Serialize)]
        struct T {
            a: f64,
            b: f64,
            n: usize,
        }
        let s = to_json(&T {
            a: 0.1,
            b: f64::NAN,
            n: 3,
        })
        .unwrap();
        assert_eq!(s, "{\"a\":1.0000000000000001e-1,\"b\":null,\"n\":3}\n");
        let back: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["a"].as_f64().unwrap(), 0.1);
    }
}
