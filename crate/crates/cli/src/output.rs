use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::CliError;

/// Shortest round-trip representation; NaN and infinities as `NA`/`inf`/`-inf`.
pub(crate) fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NA".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v}")
    }
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(format!("cannot write {}: {e}", path.display()))
}

/// CSV preceded by a `# config_hash=… seed=…` provenance line.
pub(crate) fn write_csv(
    path: &Path,
    hash: &str,
    seed: u64,
    header: &[&str],
    rows: &[Vec<String>],
) -> Result<(), CliError> {
    let mut buf = Vec::new();
    writeln!(buf, "# config_hash={hash} seed={seed}").map_err(|e| io_err(path, e))?;
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(header).map_err(|e| io_err(path, e))?;
        for row in rows {
            w.write_record(row).map_err(|e| io_err(path, e))?;
        }
        w.flush().map_err(|e| io_err(path, e))?;
    }
    std::fs::write(path, buf).map_err(|e| io_err(path, e))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| io_err(path, e))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formatting() {
        assert_eq!(fmt_f64(0.25), "0.25");
        assert_eq!(fmt_f64(f64::NAN), "NA");
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
        assert_eq!(fmt_f64(1e-7), "0.0000001");
    }

    #[test]
    fn csv_has_provenance_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        write_csv(&p, "abc", 7, &["a", "b"], &[vec!["1".into(), "NA".into()]]).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text, "# config_hash=abc seed=7\na,b\n1,NA\n");
    }
}
