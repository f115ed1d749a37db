//! CSV output: `,` separator, `.` decimal point, one header row.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Writes a header and rows of numbers; floats use the shortest round-trip form.
pub fn write_table<W: Write>(out: W, header: &[String], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().delimiter(b',').from_writer(out);
    w.write_record(header)?;
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::Dimension { expected: header.len(), got: row.len() });
        }
        w.write_record(row.iter().map(|v| format!("{v}")))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_table_file(path: &Path, header: &[String], rows: &[Vec<f64>]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    write_table(std::io::BufWriter::new(file), header, rows)
}

pub fn table_string(header: &[String], rows: &[Vec<f64>]) -> Result<String> {
    let mut buf = Vec::new();
    write_table(&mut buf, header, rows)?;
    String::from_utf8(buf).map_err(|e| Error::Io(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn format() {
        let s = table_string(&["t".into(), "x".into()], &[vec![0.0, 1.5], vec![0.1, -2e-7]]).unwrap();
        assert_eq!(s, "t,x\n0,1.5\n0.1,-0.0000002\n");
        assert!(table_string(&["t".into()], &[vec![1.0, 2.0]]).is_err());
    }
}
