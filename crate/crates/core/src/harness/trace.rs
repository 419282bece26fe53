//! Simulation traces and their CSV files.
//!
//! The trace file has one row per vehicle per step under the header
//! `t,vehicle,pos,v,z,a_l,a_r`, where `t` is the time in seconds and the
//! indicators are those applied during the transition into the step. Round
//! metadata goes to a sibling `*.game` file with header
//! `round,iterations,potential,wall_ms`. Floats are written in their shortest
//! round-trip form, so parsing a written trace gives back the same values.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mld_model::{Lane, VehicleState};

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed trace: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: f64,
    pub vehicle: usize,
    pub pos: f64,
    pub v: f64,
    pub z: Lane,
    #[serde(with = "bit")]
    pub a_l: bool,
    #[serde(with = "bit")]
    pub a_r: bool,
}

mod bit {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(b: &bool, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(*b as u8)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<bool, D::Error> {
        match u8::deserialize(d)? {
            0 => Ok(false),
            1 => Ok(true),
            other => Err(serde::de::Error::custom(format!(
                "indicator must be 0 or 1, got {other}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundMeta {
    pub round: usize,
    pub iterations: usize,
    pub potential: f64,
    pub wall_ms: f64,
}

/// Realized states of all vehicles at steps `0..=steps`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub tau: f64,
    /// Vehicle ids in column order.
    pub vehicles: Vec<usize>,
    /// `states[k][i]`: vehicle `i` at step `k`.
    pub states: Vec<Vec<VehicleState>>,
    pub rounds: Vec<RoundMeta>,
}

pub const TRACE_HEADER: &str = "t,vehicle,pos,v,z,a_l,a_r";
pub const GAME_HEADER: &str = "round,iterations,potential,wall_ms";

impl Trace {
    pub fn new(tau: f64, vehicles: Vec<usize>) -> Self {
        Trace {
            tau,
            vehicles,
            states: Vec::new(),
            rounds: Vec::new(),
        }
    }

    pub fn steps(&self) -> usize {
        self.states.len()
    }

    pub fn rows(&self) -> Vec<TraceRow> {
        let mut rows = Vec::with_capacity(self.states.len() * self.vehicles.len());
        for (k, snap) in self.states.iter().enumerate() {
            for (s, &id) in snap.iter().zip(&self.vehicles) {
                rows.push(TraceRow {
                    t: k as f64 * self.tau,
                    vehicle: id,
                    pos: s.pos,
                    v: s.v,
                    z: s.z,
                    a_l: s.a_l,
                    a_r: s.a_r,
                });
            }
        }
        rows
    }

    pub fn to_csv(&self) -> Result<String, TraceError> {
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(Vec::new());
        w.write_record(TRACE_HEADER.split(','))?;
        for row in self.rows() {
            w.serialize(row)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| TraceError::Malformed(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
    }

    pub fn game_csv(&self) -> Result<String, TraceError> {
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(Vec::new());
        w.write_record(GAME_HEADER.split(','))?;
        for meta in &self.rounds {
            w.serialize(meta)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| TraceError::Malformed(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
    }

    /// Rebuilds a trace from CSV text. Steps are recovered from the time
    /// column, which must be uniformly spaced.
    pub fn from_csv(text: &str) -> Result<Self, TraceError> {
        let mut r = csv::ReaderBuilder::new().from_reader(text.as_bytes());
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        if header.join(",") != TRACE_HEADER {
            return Err(TraceError::Malformed(format!(
                "unexpected header `{}`",
                header.join(",")
            )));
        }
        let rows: Vec<TraceRow> = r.deserialize().collect::<Result<_, _>>()?;
        let mut vehicles = Vec::new();
        for row in &rows {
            if row.t != rows[0].t {
                break;
            }
            vehicles.push(row.vehicle);
        }
        let n = vehicles.len();
        if n == 0 {
            return Ok(Trace::new(0.0, Vec::new()));
        }
        if !rows.len().is_multiple_of(n) {
            return Err(TraceError::Malformed(
                "row count is not a multiple of the vehicle count".into(),
            ));
        }
        let steps = rows.len() / n;
        let tau = if steps > 1 {
            rows[n].t - rows[0].t
        } else {
            0.0
        };
        let mut trace = Trace::new(tau, vehicles.clone());
        for k in 0..steps {
            let block = &rows[k * n..(k + 1) * n];
            let t = block[0].t;
            if (t - k as f64 * tau).abs() > 1e-9 * (1.0 + t.abs()) {
                return Err(TraceError::Malformed(format!(
                    "time {t} breaks the uniform spacing {tau}"
                )));
            }
            let mut snap = Vec::with_capacity(n);
            for (row, &id) in block.iter().zip(&vehicles) {
                if row.vehicle != id || row.t != t {
                    return Err(TraceError::Malformed(format!(
                        "step {k}: expected vehicle {id} at t = {t}, found vehicle {} at t = {}",
                        row.vehicle, row.t
                    )));
                }
                snap.push(VehicleState {
                    pos: row.pos,
                    v: row.v,
                    z: row.z,
                    a_l: row.a_l,
                    a_r: row.a_r,
                });
            }
            trace.states.push(snap);
        }
        Ok(trace)
    }

    pub fn parse_game_csv(text: &str) -> Result<Vec<RoundMeta>, TraceError> {
        let mut r = csv::ReaderBuilder::new().from_reader(text.as_bytes());
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        if header.join(",") != GAME_HEADER {
            return Err(TraceError::Malformed(format!(
                "unexpected header `{}`",
                header.join(",")
            )));
        }
        Ok(r.deserialize().collect::<Result<_, _>>()?)
    }

    /// Writes `<path>` and the sibling `<path-without-extension>.game`;
    /// returns the path of the latter.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<PathBuf, TraceError> {
        let path = path.as_ref();
        write_file(path, &self.to_csv()?)?;
        let game = path.with_extension("game");
        write_file(&game, &self.game_csv()?)?;
        Ok(game)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, TraceError> {
        let path = path.as_ref();
        let mut trace = Self::from_csv(&read_file(path)?)?;
        let game = path.with_extension("game");
        if game.exists() {
            trace.rounds = Self::parse_game_csv(&read_file(&game)?)?;
        }
        Ok(trace)
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), TraceError> {
    std::fs::write(path, text).map_err(|source| TraceError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn read_file(path: &Path) -> Result<String, TraceError> {
    std::fs::read_to_string(path).map_err(|source| TraceError::Io {
        path: path.display().to_string(),
        source,
    })
}
