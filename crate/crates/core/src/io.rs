//! CSV emitters and readers. Every real is written with 17 significant
//! digits so that a round trip reproduces it bit for bit.

use std::io::{self, BufRead, Write};

use crate::ftl::{Event, Trajectory};
use crate::model::{FluxModel, RoadCondition};
use crate::profile::Profile;
use crate::viscous::{PdeState, ViscousProfile};

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_xy<W: Write>(mut w: W, header: &str, xs: &[f64], ys: &[f64]) -> io::Result<()> {
    writeln!(w, "{header}")?;
    for (x, y) in xs.iter().zip(ys) {
        writeln!(w, "{},{}", num(*x), num(*y))?;
    }
    Ok(())
}

/// `x,Q` at the profile's nodes.
pub fn write_profile<W: Write>(w: W, profile: &Profile) -> io::Result<()> {
    write_xy(w, "x,Q", profile.xs(), profile.values())
}

/// `x,rho` at the grid points of a viscous profile.
pub fn write_viscous_profile<W: Write>(w: W, profile: &ViscousProfile) -> io::Result<()> {
    write_xy(w, "x,rho", profile.xs(), profile.values())
}

/// `t,i,z,rho`, one row per car per recorded time.
pub fn write_trajectory<W: Write>(mut w: W, traj: &Trajectory) -> io::Result<()> {
    writeln!(w, "t,i,z,rho")?;
    for (k, &t) in traj.times.iter().enumerate() {
        for (j, (z, r)) in traj.positions[k].iter().zip(&traj.densities[k]).enumerate() {
            let i = traj.first_index + j as i64;
            writeln!(w, "{},{i},{},{}", num(t), num(*z), num(*r))?;
        }
    }
    Ok(())
}

/// `t,i,kind` with kind `car_cross` or `leader_cross`.
pub fn write_events<W: Write>(mut w: W, events: &[Event]) -> io::Result<()> {
    writeln!(w, "t,i,kind")?;
    for e in events {
        writeln!(w, "{},{},{}", num(e.time), e.index, e.kind.as_str())?;
    }
    Ok(())
}

/// `t,x,rho`, one row per cell per state.
pub fn write_pde<W: Write>(mut w: W, states: &[PdeState]) -> io::Result<()> {
    writeln!(w, "t,x,rho")?;
    for s in states {
        for (x, r) in s.x.iter().zip(&s.rho) {
            writeln!(w, "{},{},{}", num(s.time), num(*x), num(*r))?;
        }
    }
    Ok(())
}

/// `rho,f_minus,f_plus` on `n + 1` equispaced densities in `[0, 1]`.
pub fn write_flux<W: Write>(
    mut w: W,
    model: &FluxModel,
    road: &RoadCondition,
    n: usize,
) -> io::Result<()> {
    writeln!(w, "rho,f_minus,f_plus")?;
    for j in 0..=n {
        let r = j as f64 / n as f64;
        let fm = model.flux_unchecked(road.v_minus, r);
        let fp = model.flux_unchecked(road.v_plus, r);
        writeln!(w, "{},{},{}", num(r), num(fm), num(fp))?;
    }
    Ok(())
}

/// `q0,filename` index of a family written one member per file.
pub fn write_family_index<W: Write>(mut w: W, entries: &[(f64, String)]) -> io::Result<()> {
    writeln!(w, "q0,filename")?;
    for (q0, name) in entries {
        writeln!(w, "{},{name}", num(*q0))?;
    }
    Ok(())
}

/// Parsed CSV: header fields and the rows as strings.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    /// Column `name` parsed as reals.
    pub fn column(&self, name: &str) -> io::Result<Vec<f64>> {
        let k = self
            .header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| invalid(format!("no column {name:?}")))?;
        self.rows
            .iter()
            .enumerate()
            .map(|(line, row)| {
                row.get(k)
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| invalid(format!("row {}: bad value in {name:?}", line + 2)))
            })
            .collect()
    }
}

fn invalid(msg: String) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg)
}

/// Reads a comma-separated table with a header line.
pub fn read_table<R: BufRead>(r: R) -> io::Result<Table> {
    let mut lines = r.lines();
    let header: Vec<String> = match lines.next() {
        Some(line) => line?.split(',').map(|s| s.trim().to_string()).collect(),
        None => return Err(invalid("empty file".into())),
    };
    let mut rows = Vec::new();
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<String> = line.split(',').map(|s| s.trim().to_string()).collect();
        if row.len() != header.len() {
            return Err(invalid(format!(
                "row {} has {} fields, header has {}",
                rows.len() + 2,
                row.len(),
                header.len()
            )));
        }
        rows.push(row);
    }
    Ok(Table { header, rows })
}

/// Reads an `x,Q` file back into node positions and values.
pub fn read_profile<R: BufRead>(r: R) -> io::Result<(Vec<f64>, Vec<f64>)> {
    let t = read_table(r)?;
    Ok((t.column("x")?, t.column("Q")?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::SpeedLimit;

    #[test]
    fn profile_round_trip_is_exact() {
        let xs = vec![-1.0, -0.3, 0.1, 2.0 / 3.0];
        let ys = vec![0.1, 0.2, 0.3, 0.7000000000000001];
        let p = Profile::from_samples(
            xs.clone(),
            ys.clone(),
            0.2,
            0.1875,
            SpeedLimit::Uniform(1.0),
        )
        .unwrap();
        let mut buf = Vec::new();
        write_profile(&mut buf, &p).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x,Q\n"));
        assert!(!text.contains('\r'));
        let (x2, y2) = read_profile(&buf[..]).unwrap();
        assert_eq!(x2, xs);
        assert_eq!(y2, ys);
    }

    #[test]
    fn ragged_rows_are_rejected() {
        let err = read_table("a,b\n1,2\n3\n".as_bytes()).unwrap_err();
        assert_eq!(err.kind(), io::ErrorKind::InvalidData);
    }
}
