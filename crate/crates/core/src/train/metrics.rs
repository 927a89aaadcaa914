use std::io::{BufRead, Write};

use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "epoch,loss,fid";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricsRecord {
    pub epoch: usize,
    /// Epoch-mean MSE.
    pub loss: f64,
    pub fid: f64,
}

/// Writes the metrics CSV. Floats use Rust's shortest round-trip form, so the
/// file is locale-independent and re-reads bit-exactly.
pub fn write_metrics_csv(mut w: impl Write, records: &[MetricsRecord]) -> Result<()> {
    let mut out = String::with_capacity(32 * (records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!("{},{:?},{:?}\n", r.epoch, r.loss, r.fid));
    }
    w.write_all(out.as_bytes())?;
    Ok(())
}

pub fn read_metrics_csv(r: impl BufRead) -> Result<Vec<MetricsRecord>> {
    let mut lines = r.lines();
    match lines.next() {
        Some(Ok(h)) if h.trim_end() == CSV_HEADER => {}
        Some(Err(e)) => return Err(e.into()),
        _ => {
            return Err(Error::Malformed(format!(
                "metrics CSV must start with `{CSV_HEADER}`"
            )))
        }
    }
    let mut out = Vec::new();
    for (n, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = || Error::Malformed(format!("metrics CSV line {}: `{line}`", n + 2));
        let mut parts = line.trim_end().split(',');
        let (Some(e), Some(l), Some(f), None) =
            (parts.next(), parts.next(), parts.next(), parts.next())
        else {
            return Err(bad());
        };
        out.push(MetricsRecord {
            epoch: e.parse().map_err(|_| bad())?,
            loss: l.parse().map_err(|_| bad())?,
            fid: f.parse().map_err(|_| bad())?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let recs = vec![
            MetricsRecord {
                epoch: 1,
                loss: 0.1 + 0.2,
                fid: 12.5,
            },
            MetricsRecord {
                epoch: 2,
                loss: 1e-17,
                fid: 0.0,
            },
        ];
        let mut buf = Vec::new();
        write_metrics_csv(&mut buf, &recs).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("epoch,loss,fid\n1,0.30000000000000004,12.5\n"));
        assert!(!text.contains('\r'));
        assert_eq!(read_metrics_csv(&buf[..]).unwrap(), recs);
    }

    #[test]
    fn rejects_garbage() {
        assert!(read_metrics_csv(&b"a,b,c\n"[..]).is_err());
        assert!(read_metrics_csv(&b"epoch,loss,fid\n1,2\n"[..]).is_err());
        assert!(read_metrics_csv(&b"epoch,loss,fid\n1,x,3\n"[..]).is_err());
    }
}
