//! CSV exchange: single paths as `t,value`, partitions as
//! `path_id,j,tau_j` (with `tau_j` a grid time).

use std::io::{Read, Write};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::partition::AdaptedGridPartition;
use crate::space::{GridCadlagPath, SampleSpace};

pub fn write_path(f: &GridCadlagPath, p: usize, w: impl Write) -> Result<()> {
    if p >= f.space().paths() {
        return Err(Error::InvalidParameter(format!("path {p} of {}", f.space().paths())));
    }
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["t", "value"])?;
    let g = f.grid();
    for (k, v) in f.path(p).iter().enumerate() {
        wtr.write_record([g.time(k).to_string(), v.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Read a `t,value` file on a uniform grid starting at 0 into a
/// deterministic (single-path) process.
pub fn read_path(r: impl Read) -> Result<GridCadlagPath> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(r);
    let mut t = Vec::new();
    let mut v = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        if rec.len() != 2 {
            return Err(Error::InvalidGrid(format!("expected t,value rows, got {} fields", rec.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| Error::InvalidGrid(format!("{s}: {e}")));
        t.push(num(&rec[0])?);
        v.push(num(&rec[1])?);
    }
    if t.len() < 2 || t[0] != 0.0 {
        return Err(Error::InvalidGrid("need at least two rows starting at t = 0".into()));
    }
    let steps = t.len() - 1;
    let space = SampleSpace::deterministic(steps, t[steps])?;
    let g = space.grid();
    for (k, &tk) in t.iter().enumerate() {
        if (tk - g.time(k)).abs() > 1e-9 * (1.0 + g.t_end()) {
            return Err(Error::InvalidGrid(format!("time {tk} at row {k} is off the uniform grid")));
        }
    }
    GridCadlagPath::from_paths(space, &[v])
}

pub fn write_partition_trace(pi: &AdaptedGridPartition, w: impl Write) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["path_id", "j", "tau_j"])?;
    let g = pi.space().grid();
    for (p, pts) in pi.all_points().iter().enumerate() {
        for (j, &k) in pts.iter().enumerate() {
            wtr.write_record([p.to_string(), j.to_string(), g.time(k).to_string()])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_partition_trace(space: Arc<SampleSpace>, r: impl Read) -> Result<AdaptedGridPartition> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let g = space.grid();
    let mut points = vec![Vec::new(); space.paths()];
    for rec in rdr.records() {
        let rec = rec?;
        let bad = |m: String| Error::InvalidPartition(m);
        if rec.len() != 3 {
            return Err(bad(format!("expected path_id,j,tau_j rows, got {} fields", rec.len())));
        }
        let p: usize = rec[0].parse().map_err(|e| bad(format!("path_id: {e}")))?;
        let j: usize = rec[1].parse().map_err(|e| bad(format!("j: {e}")))?;
        let t: f64 = rec[2].parse().map_err(|e| bad(format!("tau_j: {e}")))?;
        let pts = points.get_mut(p).ok_or_else(|| bad(format!("path_id {p} out of range")))?;
        if j != pts.len() {
            return Err(bad(format!("path {p}: index {j} out of order")));
        }
        let k = g.index_at(t + 1e-9 * g.t_end() / g.steps() as f64);
        pts.push(k);
    }
    AdaptedGridPartition::new(space, points)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_round_trip() {
        let s = SampleSpace::uniform(2, 6, 0.3, 1, 0).unwrap();
        let w = GridCadlagPath::scaled_walk(s).unwrap();
        let mut buf = Vec::new();
        write_path(&w, 5, &mut buf).unwrap();
        let back = read_path(buf.as_slice()).unwrap();
        assert_eq!(back.path(0), w.path(5));
        assert_eq!(back.grid(), w.grid());
        assert!(read_path("t,value\n0,1\n0.5,2\n0.7,3\n".as_bytes()).is_err());
    }

    #[test]
    fn partition_round_trip() {
        let s = SampleSpace::uniform(2, 7, 1.0, 1, 0).unwrap();
        let w = GridCadlagPath::scaled_walk(s.clone()).unwrap();
        let pi = AdaptedGridPartition::oscillation(&w, 0.5).unwrap();
        let mut buf = Vec::new();
        write_partition_trace(&pi, &mut buf).unwrap();
        assert_eq!(read_partition_trace(s, buf.as_slice()).unwrap(), pi);
    }
}
