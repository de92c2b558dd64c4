//! CSV encoding of trajectories.
//!
//! Columns: `t, x1..xn, v1..vn, sigma_norm, h, h_gamma, gain, u1..un`, where
//! `v` is the velocity `ẋ`. Values are written with 17 significant digits so
//! that reading a file back reproduces every recorded series bit for bit.
//! Events are not part of the CSV; they go into the run report.

use std::io::{Read, Write};

use crate::simulator::{EventLog, Trajectory};
use crate::{Error, Result, Vector};

pub fn header(n: usize) -> Vec<String> {
    let mut cols = vec!["t".to_string()];
    cols.extend((1..=n).map(|i| format!("x{i}")));
    cols.extend((1..=n).map(|i| format!("v{i}")));
    cols.extend(["sigma_norm", "h", "h_gamma", "gain"].map(String::from));
    cols.extend((1..=n).map(|i| format!("u{i}")));
    cols
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

fn io_err(e: impl std::fmt::Display) -> Error {
    Error::Config(format!("trajectory csv: {e}"))
}

pub fn write_csv<W: Write>(traj: &Trajectory, out: W) -> Result<()> {
    let n = traj.dim();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(n)).map_err(io_err)?;
    let mut row = Vec::with_capacity(3 * n + 5);
    for i in 0..traj.len() {
        row.clear();
        row.push(fmt(traj.times[i]));
        row.extend(traj.positions[i].iter().map(|v| fmt(*v)));
        row.extend(traj.velocities[i].iter().map(|v| fmt(*v)));
        row.push(fmt(traj.sigma_norms[i]));
        row.push(fmt(traj.h[i]));
        row.push(fmt(traj.h_gamma[i]));
        row.push(fmt(traj.gains[i]));
        row.extend(traj.controls[i].iter().map(|v| fmt(*v)));
        w.write_record(&row).map_err(io_err)?;
    }
    w.flush().map_err(io_err)?;
    Ok(())
}

pub fn to_csv_string(traj: &Trajectory) -> Result<String> {
    let mut buf = Vec::new();
    write_csv(traj, &mut buf)?;
    String::from_utf8(buf).map_err(io_err)
}

/// Parses a file produced by [`write_csv`]. The event log comes back empty.
pub fn read_csv<R: Read>(input: R) -> Result<Trajectory> {
    let mut r = csv::Reader::from_reader(input);
    let cols = r.headers().map_err(io_err)?.len();
    if cols < 8 || (cols - 5) % 3 != 0 {
        return Err(io_err(format!("unexpected column count {cols}")));
    }
    let n = (cols - 5) / 3;
    let expected = header(n);
    if r.headers()
        .map_err(io_err)?
        .iter()
        .ne(expected.iter().map(String::as_str))
    {
        return Err(io_err("header does not match the trajectory layout"));
    }
    let mut traj = Trajectory {
        times: Vec::new(),
        positions: Vec::new(),
        velocities: Vec::new(),
        sigma_norms: Vec::new(),
        h: Vec::new(),
        h_gamma: Vec::new(),
        gains: Vec::new(),
        controls: Vec::new(),
        events: EventLog::default(),
    };
    for rec in r.records() {
        let rec = rec.map_err(io_err)?;
        let vals: Vec<f64> = rec
            .iter()
            .map(|s| s.trim().parse::<f64>().map_err(io_err))
            .collect::<Result<_>>()?;
        traj.times.push(vals[0]);
        traj.positions.push(Vector::from_column_slice(&vals[1..1 + n]));
        traj.velocities.push(Vector::from_column_slice(&vals[1 + n..1 + 2 * n]));
        traj.sigma_norms.push(vals[1 + 2 * n]);
        traj.h.push(vals[2 + 2 * n]);
        traj.h_gamma.push(vals[3 + 2 * n]);
        traj.gains.push(vals[4 + 2 * n]);
        traj.controls
            .push(Vector::from_column_slice(&vals[5 + 2 * n..5 + 3 * n]));
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        assert_eq!(header(2).join(","), "t,x1,x2,v1,v2,sigma_norm,h,h_gamma,gain,u1,u2");
    }

    #[test]
    fn rejects_foreign_header() {
        let text = "a,b,c,d,e,f,g,h\n1,2,3,4,5,6,7,8\n";
        assert!(read_csv(text.as_bytes()).is_err());
    }

    fn arb_traj() -> impl Strategy<Value = Trajectory> {
        let val = prop_oneof![any::<f64>().prop_filter("finite", |v| v.is_finite()), -1e3..1e3f64];
        (1usize..4, 1usize..6).prop_flat_map(move |(n, len)| {
            proptest::collection::vec(proptest::collection::vec(val.clone(), 3 * n + 5), len).prop_map(move |rows| {
                let mut t = Trajectory {
                    times: vec![],
                    positions: vec![],
                    velocities: vec![],
                    sigma_norms: vec![],
                    h: vec![],
                    h_gamma: vec![],
                    gains: vec![],
                    controls: vec![],
                    events: EventLog::default(),
                };
                for r in rows {
                    t.times.push(r[0]);
                    t.positions.push(Vector::from_column_slice(&r[1..1 + n]));
                    t.velocities.push(Vector::from_column_slice(&r[1 + n..1 + 2 * n]));
                    t.sigma_norms.push(r[1 + 2 * n]);
                    t.h.push(r[2 + 2 * n]);
                    t.h_gamma.push(r[3 + 2 * n]);
                    t.gains.push(r[4 + 2 * n]);
                    t.controls.push(Vector::from_column_slice(&r[5 + 2 * n..5 + 3 * n]));
                }
                t
            })
        })
    }

    proptest! {
        #[test]
        fn round_trip_is_exact(traj in arb_traj()) {
            let text = to_csv_string(&traj).unwrap();
            let back = read_csv(text.as_bytes()).unwrap();
            prop_assert_eq!(back, traj);
        }
    }
}
