//! CSV output: RFC 4180 with CRLF line ends, reals as `{:.16e}`.

use std::io::Write;

use crate::error::Result;
use crate::num::Real;

/// Formats a real with 17 significant digits.
pub fn fmt_real<T: Real>(x: T) -> String {
    format!("{:.16e}", x.as_f64())
}

pub fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(w)
}

/// Writes a header row and one row per item.
pub fn write_table<T, W, I>(w: W, headers: &[&str], rows: I) -> Result<()>
where
    T: Real,
    W: Write,
    I: IntoIterator<Item = Vec<T>>,
{
    let mut out = csv_writer(w);
    out.write_record(headers)?;
    for row in rows {
        out.write_record(row.into_iter().map(fmt_real))?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crlf_and_precision() {
        let mut buf = Vec::new();
        write_table(&mut buf, &["t", "x"], vec![vec![0.1f64, 1.0 / 3.0]]).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s, "t,x\r\n1.0000000000000001e-1,3.3333333333333331e-1\r\n");
        let back: f64 = "3.3333333333333331e-1".parse().unwrap();
        assert_eq!(back, 1.0 / 3.0);
    }
}
