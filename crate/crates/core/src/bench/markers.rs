//! Motion-capture recordings of rod markers.
//!
//! CSV schema (meters, UTF-8, LF): header `frame,t` followed by
//! `m{i}_x,m{i}_y,m{i}_z` for every rod marker `i = 1..N` and
//! `g{j}_x,g{j}_y,g{j}_z` for the three gripper markers `j = 1..3`.
//! The gripper frame has its origin at `g1`, x-axis towards `g2` and z-axis
//! normal to the plane of the three markers.

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::BoundaryConditions;
use crate::lie::{Mat3, Pose, Vec3};
use crate::metrics::MarkerSet;
use crate::rod::{RodProperties, RodShape};

pub const GRIPPER_MARKERS: usize = 3;

/// Spacing of the synthetic gripper markers (m).
const GRIPPER_ARM: f64 = 0.02;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkerFrame {
    pub frame: u64,
    pub t: f64,
    pub markers: Vec<Vec3>,
    pub gripper: [Vec3; GRIPPER_MARKERS],
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MarkerRecording {
    pub frames: Vec<MarkerFrame>,
}

/// Placement of the capture data relative to the rod: the clamped base pose
/// and the offset from the gripper-marker frame to the rod tip, both in meters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub base: Pose,
    pub tip_offset: Pose,
}

impl Default for Calibration {
    fn default() -> Self {
        Self {
            base: Pose::identity(),
            tip_offset: Pose::identity(),
        }
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn expected_header(markers: usize) -> Vec<String> {
    let mut h = vec!["frame".to_string(), "t".to_string()];
    for (prefix, n) in [("m", markers), ("g", GRIPPER_MARKERS)] {
        for i in 1..=n {
            for axis in ["x", "y", "z"] {
                h.push(format!("{prefix}{i}_{axis}"));
            }
        }
    }
    h
}

impl MarkerRecording {
    pub fn marker_count(&self) -> usize {
        self.frames.first().map_or(0, |f| f.markers.len())
    }

    pub fn parse<R: Read>(input: R) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(false).from_reader(input);
        let mut records = reader.records();
        let header = match records.next() {
            Some(r) => r.map_err(|e| parse_err(1, e.to_string()))?,
            None => return Err(parse_err(1, "empty recording")),
        };
        let header: Vec<String> = header.iter().map(|s| s.trim().to_string()).collect();
        let marker_cols = header.iter().filter(|h| h.starts_with('m')).count();
        if marker_cols % 3 != 0 {
            return Err(parse_err(1, "marker columns must come in x, y, z triples"));
        }
        let n = marker_cols / 3;
        let expected = expected_header(n);
        if header != expected {
            let missing = expected.iter().find(|c| !header.contains(c));
            return Err(parse_err(
                1,
                match missing {
                    Some(c) => format!("missing column `{c}`"),
                    None => format!("unexpected header layout, expected `{}`", expected.join(",")),
                },
            ));
        }

        let mut frames = Vec::new();
        for (k, record) in records.enumerate() {
            let line = k + 2;
            let record = record.map_err(|e| parse_err(line, e.to_string()))?;
            if record.len() != expected.len() {
                return Err(parse_err(line, format!("expected {} fields, found {}", expected.len(), record.len())));
            }
            let num = |i: usize| -> Result<f64> {
                let v: f64 = record[i]
                    .trim()
                    .parse()
                    .map_err(|_| parse_err(line, format!("column `{}`: `{}` is not a number", expected[i], &record[i])))?;
                if !v.is_finite() {
                    return Err(parse_err(line, format!("column `{}` is not finite", expected[i])));
                }
                Ok(v)
            };
            let frame = record[0]
                .trim()
                .parse()
                .map_err(|_| parse_err(line, format!("`{}` is not a frame index", &record[0])))?;
            let point = |j: usize| -> Result<Vec3> { Ok(Vec3::new(num(2 + 3 * j)?, num(3 + 3 * j)?, num(4 + 3 * j)?)) };
            let markers = (0..n).map(point).collect::<Result<Vec<_>>>()?;
            let gripper = [point(n)?, point(n + 1)?, point(n + 2)?];
            frames.push(MarkerFrame {
                frame,
                t: num(1)?,
                markers,
                gripper,
            });
        }
        Ok(Self { frames })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::parse(std::io::BufReader::new(file))
    }

    pub fn write<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        let to_err = |e: csv::Error| Error::Config(e.to_string());
        w.write_record(expected_header(self.marker_count())).map_err(to_err)?;
        for f in &self.frames {
            let mut rec = vec![f.frame.to_string(), f.t.to_string()];
            for p in f.markers.iter().chain(&f.gripper) {
                rec.extend(p.iter().map(|v| v.to_string()));
            }
            w.write_record(rec).map_err(to_err)?;
        }
        w.flush().map_err(|e| Error::io("<recording>", e))
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }
}

/// Frame spanned by the three gripper markers.
pub fn gripper_frame(g: &[Vec3; GRIPPER_MARKERS]) -> Result<Pose> {
    let a = g[1] - g[0];
    let b = g[2] - g[0];
    let n = a.cross(&b);
    let scale = a.norm() * b.norm();
    if a.norm() < 1e-9 || scale == 0.0 || n.norm() < 1e-6 * scale {
        return Err(Error::Frame("gripper markers are coincident or collinear".into()));
    }
    let x = a.normalize();
    let z = n.normalize();
    let y = z.cross(&x);
    Ok(Pose::new(Mat3::from_columns(&[x, y, z]), g[0]))
}

/// One boundary condition and marker set per frame, expressed in the clamped
/// base frame; tip positions are normalized by the rod length.
pub fn ingest_markers(
    recording: &MarkerRecording,
    props: &RodProperties,
    calibration: &Calibration,
) -> Result<Vec<(BoundaryConditions, MarkerSet)>> {
    let taus = props
        .marker_taus()
        .ok_or_else(|| Error::Config(format!("rod `{}` has no marker layout", props.name)))?;
    let base_inv = calibration.base.inverse();
    recording
        .frames
        .iter()
        .map(|f| {
            if f.markers.len() != taus.len() {
                return Err(Error::DimensionMismatch {
                    expected: taus.len(),
                    found: f.markers.len(),
                });
            }
            let tip = base_inv * gripper_frame(&f.gripper)? * calibration.tip_offset;
            let bc = BoundaryConditions::new(Pose::new(tip.rotation, tip.position / props.length));
            let points = f.markers.iter().map(|p| base_inv.transform_point(p)).collect();
            Ok((bc, MarkerSet::new(taus.clone(), points)?))
        })
        .collect()
}

/// Recording of rod shapes (base at the capture origin): markers at their
/// nominal arc positions displaced by `perturbation` meters in a random
/// direction, gripper markers placed exactly on the tip frame.
pub fn emit_synthetic(shapes: &[RodShape], props: &RodProperties, perturbation: f64, seed: u64) -> Result<MarkerRecording> {
    let taus = props
        .marker_taus()
        .ok_or_else(|| Error::Config(format!("rod `{}` has no marker layout", props.name)))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frames = shapes
        .iter()
        .enumerate()
        .map(|(k, shape)| {
            let markers = taus
                .iter()
                .map(|&t| {
                    let p = shape.pose_at(t).position * props.length;
                    p + random_unit(&mut rng) * perturbation
                })
                .collect();
            let tip = shape.tip();
            let origin = tip.position * props.length;
            let gripper = [
                origin,
                origin + tip.rotation.column(0) * GRIPPER_ARM,
                origin + tip.rotation.column(1) * GRIPPER_ARM,
            ];
            MarkerFrame {
                frame: k as u64,
                t: k as f64,
                markers,
                gripper,
            }
        })
        .collect();
    Ok(MarkerRecording { frames })
}

fn random_unit(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}
