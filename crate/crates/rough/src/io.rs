//! CSV exchange for drivers, lifts and solutions.
//!
//! Driver files: an optional `# interpolation: linear|constant` comment, an
//! optional header row, then rows `t, x_1, …, x_d`. Lift files: rows
//! `s, t, m_11, m_12, …, m_dd` keyed by grid times.

use std::io::{Read, Write};

use crate::controlled::ControlledPath;
use crate::error::{Error, Result};
use crate::path::{Grid2, Interp, SampledPath};
use crate::rough_path::RoughPath;

fn numeric_rows(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).comment(Some(b'#')).trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(v) => rows.push(v),
            // A non-numeric first record is a header row.
            Err(_) if k == 0 => {}
            Err(e) => return Err(Error::InvalidPath(format!("row {}: {e}", k + 1))),
        }
    }
    Ok(rows)
}

fn interp_comment(text: &str) -> Option<Interp> {
    text.lines()
        .filter_map(|l| l.trim().strip_prefix('#'))
        .find_map(|l| l.trim().strip_prefix("interpolation:").and_then(Interp::parse))
}

/// Parse a driver; the interpolation comment overrides `default`.
pub fn read_driver(mut rdr: impl Read, default: Interp) -> Result<SampledPath> {
    let mut text = String::new();
    rdr.read_to_string(&mut text)?;
    let interp = interp_comment(&text).unwrap_or(default);
    let rows = numeric_rows(&text)?;
    let first = rows.first().ok_or_else(|| Error::InvalidPath("driver file has no rows".into()))?;
    let dim = first.len().checked_sub(1).filter(|&d| d > 0).ok_or_else(|| Error::InvalidPath("rows need t and at least one coordinate".into()))?;
    let mut times = Vec::with_capacity(rows.len());
    let mut values = Vec::with_capacity(rows.len() * dim);
    for (k, row) in rows.iter().enumerate() {
        if row.len() != dim + 1 {
            return Err(Error::InvalidPath(format!("row {} has {} fields, expected {}", k + 1, row.len(), dim + 1)));
        }
        times.push(row[0]);
        values.extend_from_slice(&row[1..]);
    }
    SampledPath::new(times, dim, values, interp)
}

pub fn write_driver(path: &SampledPath, mut w: impl Write) -> Result<()> {
    writeln!(w, "# interpolation: {}", path.interp().name())?;
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["t".to_string()];
    header.extend((1..=path.dim()).map(|i| format!("x_{i}")));
    wtr.write_record(&header)?;
    for i in 0..path.len() {
        let mut row = vec![path.time(i).to_string()];
        row.extend(path.value(i).iter().map(f64::to_string));
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Read `𝕏` for the driver `x`; pairs absent from the file are zero.
pub fn read_lift(x: &SampledPath, mut rdr: impl Read, r: f64) -> Result<RoughPath> {
    let mut text = String::new();
    rdr.read_to_string(&mut text)?;
    let d = x.dim();
    let mut g = Grid2::zeros(x.len(), d * d)?;
    let index = |t: f64| -> Result<usize> {
        x.times()
            .iter()
            .position(|&u| (u - t).abs() <= 1e-12 * (1.0 + t.abs()))
            .ok_or_else(|| Error::InvalidPath(format!("lift time {t} is not on the driver grid")))
    };
    for (k, row) in numeric_rows(&text)?.iter().enumerate() {
        if row.len() != 2 + d * d {
            return Err(Error::InvalidPath(format!("lift row {} has {} fields, expected {}", k + 1, row.len(), 2 + d * d)));
        }
        let (s, t) = (index(row[0])?, index(row[1])?);
        if s > t {
            return Err(Error::InvalidPath(format!("lift row {} has s > t", k + 1)));
        }
        g.get_mut(s, t).copy_from_slice(&row[2..]);
    }
    RoughPath::new(x.clone(), g, r)
}

pub fn write_lift(x: &RoughPath, w: impl Write) -> Result<()> {
    let d = x.dim();
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["s".to_string(), "t".to_string()];
    for i in 1..=d {
        for j in 1..=d {
            header.push(format!("m_{i}{j}"));
        }
    }
    wtr.write_record(&header)?;
    let times = x.x().times();
    for s in 0..x.len() {
        for t in s..x.len() {
            let mut row = vec![times[s].to_string(), times[t].to_string()];
            row.extend(x.xx().get(s, t).iter().map(f64::to_string));
            wtr.write_record(&row)?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// `t, y_1..y_e`, optionally followed by a reference column.
pub fn write_solution(y: &ControlledPath, reference: Option<&dyn Fn(f64) -> f64>, w: impl Write) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    let mut header = vec!["t".to_string()];
    header.extend((1..=y.dim()).map(|i| format!("y_{i}")));
    if reference.is_some() {
        header.push("reference".into());
    }
    wtr.write_record(&header)?;
    for i in 0..y.len() {
        let t = y.y().time(i);
        let mut row = vec![t.to_string()];
        row.extend(y.y().value(i).iter().map(f64::to_string));
        if let Some(f) = reference {
            row.push(f(t).to_string());
        }
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rough_path::lift;

    #[test]
    fn driver_round_trip() {
        let x = SampledPath::new(vec![0.0, 0.25, 1.0], 2, vec![0.0, 1.0, 0.5, -0.5, 1.5, 0.125], Interp::Constant).unwrap();
        let mut buf = Vec::new();
        write_driver(&x, &mut buf).unwrap();
        let back = read_driver(buf.as_slice(), Interp::Linear).unwrap();
        assert_eq!(back, x);
    }

    #[test]
    fn headerless_driver() {
        let x = read_driver("0,1\n0.5,2\n1,0\n".as_bytes(), Interp::Linear).unwrap();
        assert_eq!(x.len(), 3);
        assert_eq!(x.interp(), Interp::Linear);
        assert!(read_driver("0,1\n0.5\n".as_bytes(), Interp::Linear).is_err());
        assert!(read_driver("".as_bytes(), Interp::Linear).is_err());
    }

    #[test]
    fn lift_round_trip() {
        let x = SampledPath::new(vec![0.0, 0.5, 1.0, 1.5], 2, vec![0.0, 0.0, 1.0, 0.5, 0.0, 1.5, 2.0, 2.0], Interp::Constant).unwrap();
        let xp = lift(&x, 2.5).unwrap();
        let mut buf = Vec::new();
        write_lift(&xp, &mut buf).unwrap();
        let back = read_lift(&x, buf.as_slice(), 2.5).unwrap();
        assert_eq!(back.xx(), xp.xx());
    }
}
