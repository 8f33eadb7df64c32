use std::io::{Read, Write};

use super::{Measurement, MeasurementKind};
use crate::error::{Error, Result};

/// Column order of measurement logs. `d` is empty for passive rows.
pub const MEASUREMENT_LOG_HEADER: [&str; 5] = ["k", "kind", "id", "d", "phi"];

/// Writes one row per measurement. Floats use the shortest representation
/// that parses back to the same bits, so logs replay exactly.
pub fn write_measurement_log<W: Write>(writer: W, measurements: &[Measurement]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    w.write_record(MEASUREMENT_LOG_HEADER)?;
    for m in measurements {
        let (kind, d, phi) = match m.kind {
            MeasurementKind::Active { range, bearing } => ("active", range.to_string(), bearing.to_string()),
            MeasurementKind::Passive { bearing } => ("passive", String::new(), bearing.to_string()),
        };
        w.write_record([m.k.to_string().as_str(), kind, m.id.to_string().as_str(), d.as_str(), phi.as_str()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_measurement_log<R: Read>(reader: R) -> Result<Vec<Measurement>> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers()?.clone();
    if header.iter().ne(MEASUREMENT_LOG_HEADER.iter().copied()) {
        return Err(Error::Schema(format!("unexpected measurement log header {header:?}")));
    }
    let parse_f = |s: &str, line: u64| -> Result<f64> {
        s.parse::<f64>()
            .map_err(|_| Error::Schema(format!("line {line}: bad number '{s}'")))
    };
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i as u64 + 2;
        let k = rec[0]
            .parse::<usize>()
            .map_err(|_| Error::Schema(format!("line {line}: bad step '{}'", &rec[0])))?;
        let id = rec[2]
            .parse::<u32>()
            .map_err(|_| Error::Schema(format!("line {line}: bad id '{}'", &rec[2])))?;
        let bearing = parse_f(&rec[4], line)?;
        let kind = match &rec[1] {
            "active" => MeasurementKind::Active {
                range: parse_f(&rec[3], line)?,
                bearing,
            },
            "passive" => MeasurementKind::Passive { bearing },
            other => return Err(Error::Schema(format!("line {line}: unknown kind '{other}'"))),
        };
        out.push(Measurement { k, id, kind });
    }
    Ok(out)
}
