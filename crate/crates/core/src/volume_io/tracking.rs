//! Tracking-log CSV: one rigid pose per camera frame.

use std::path::Path;

use nalgebra::Matrix4;

use crate::error::{Error, Result};
use crate::rigid_motion::{RigidTransform, Trajectory};

pub const TRACKING_HEADER: [&str; 13] = [
    "t", "r00", "r01", "r02", "tx", "r10", "r11", "r12", "ty", "r20", "r21", "r22", "tz",
];

pub fn read_tracking_log(path: impl AsRef<Path>) -> Result<Trajectory> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_tracking_log(file, path)
}

pub fn parse_tracking_log(input: impl std::io::Read, path: &Path) -> Result<Trajectory> {
    let row_err = |row: usize, reason: String| Error::TrackingLog {
        path: path.to_path_buf(),
        row,
        reason,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let header = reader.headers().map_err(|e| Error::Csv {
        path: path.to_path_buf(),
        source: e,
    })?;
    if header.iter().ne(TRACKING_HEADER.iter().copied()) {
        return Err(row_err(
            0,
            format!(
                "expected header {:?}, got {:?}",
                TRACKING_HEADER.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }

    let mut samples: Vec<(f64, RigidTransform)> = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| row_err(row, e.to_string()))?;
        if record.len() != 13 {
            return Err(row_err(row, format!("expected 13 fields, got {}", record.len())));
        }
        let mut vals = [0f64; 13];
        for (k, field) in record.iter().enumerate() {
            vals[k] = field.parse().map_err(|_| {
                row_err(row, format!("column {}: cannot parse {field:?}", TRACKING_HEADER[k]))
            })?;
            if !vals[k].is_finite() {
                return Err(row_err(row, format!("column {}: non-finite", TRACKING_HEADER[k])));
            }
        }
        let t = vals[0];
        #[rustfmt::skip]
        let m = Matrix4::new(
            vals[1], vals[2], vals[3], vals[4],
            vals[5], vals[6], vals[7], vals[8],
            vals[9], vals[10], vals[11], vals[12],
            0.0, 0.0, 0.0, 1.0,
        );
        let pose = RigidTransform::from_matrix(m).map_err(|e| row_err(row, e.to_string()))?;
        if let Some((prev, _)) = samples.last() {
            if !(t > *prev) {
                return Err(Error::NonMonotonic {
                    path: path.to_path_buf(),
                    row,
                });
            }
        }
        samples.push((t, pose));
    }
    Trajectory::new(samples)
}

pub fn write_tracking_log(traj: &Trajectory, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let csv_err = |e: csv::Error| Error::Csv {
        path: path.to_path_buf(),
        source: e,
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(TRACKING_HEADER).map_err(csv_err)?;
    for (t, pose) in traj.samples() {
        let m = pose.matrix();
        let mut rec = Vec::with_capacity(13);
        rec.push(t.to_string());
        for r in 0..3 {
            for c in 0..4 {
                rec.push(m[(r, c)].to_string());
            }
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "t,r00,r01,r02,tx,r10,r11,r12,ty,r20,r21,r22,tz\n";

    fn parse(body: &str) -> Result<Trajectory> {
        parse_tracking_log(format!("{HEADER}{body}").as_bytes(), Path::new("log.csv"))
    }

    #[test]
    fn identity_rows() {
        let traj = parse("0,1,0,0,0,0,1,0,0,0,0,1,0\n0.5,1,0,0,0,0,1,0,0,0,0,1,0\n").unwrap();
        assert_eq!(traj.len(), 2);
        assert!(traj
            .samples()
            .iter()
            .all(|(_, p)| *p == RigidTransform::identity()));
    }

    #[test]
    fn shuffled_timestamps() {
        let err = parse(
            "0,1,0,0,0,0,1,0,0,0,0,1,0\n1,1,0,0,0,0,1,0,0,0,0,1,0\n0.5,1,0,0,0,0,1,0,0,0,0,1,0\n",
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonMonotonic { row: 3, .. }), "{err}");
    }

    #[test]
    fn reflection_row_cites_index() {
        let err = parse("0,1,0,0,0,0,1,0,0,0,0,1,0\n1,-1,0,0,0,0,1,0,0,0,0,1,0\n").unwrap_err();
        match err {
            Error::TrackingLog { row: 2, reason, .. } => assert!(reason.contains("determinant")),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn wrong_header_and_garbage() {
        let err = parse_tracking_log("a,b\n1,2\n".as_bytes(), Path::new("x.csv")).unwrap_err();
        assert!(matches!(err, Error::TrackingLog { row: 0, .. }));
        assert!(matches!(
            parse("0,1,0,0,zero,0,1,0,0,0,0,1,0\n"),
            Err(Error::TrackingLog { row: 1, .. })
        ));
        assert!(matches!(parse("0,1,0,0\n"), Err(Error::TrackingLog { row: 1, .. })));
    }
}
