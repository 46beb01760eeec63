//! Trace serialization: CSV with a fixed column order, full round-trip
//! precision, and atomic writes (temp file + rename) so a fault never
//! leaves a partial output behind.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::analysis::Trace;
use crate::robot::{Joint, JointMap};

/// Fixed column order of the trace file.
pub const TRACE_HEADER: &str = "t_s,z_m,zd_mps,\
hip_q_deg,hip_qd_dps,hip_motor_deg,hip_spring_nm,hip_i_ma,\
knee_q_deg,knee_qd_dps,knee_motor_deg,knee_spring_nm,knee_i_ma,\
ankle_q_deg,ankle_qd_dps,ankle_motor_deg,ankle_spring_nm,ankle_i_ma,\
fn_heel_n,fn_toe_n,ft_heel_n,ft_toe_n";

pub const TRACE_COLUMNS: usize = 22;

#[derive(Debug, thiserror::Error)]
pub enum TraceIoError {
    #[error("cannot access trace file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: header mismatch, expected the fixed trace schema")]
    Header { path: String },
    #[error("{path}: row {row}: {message}")]
    Row {
        path: String,
        row: usize,
        message: String,
    },
}

fn fmt(value: f64) -> String {
    // 17 significant digits round-trips every f64 exactly.
    format!("{value:.16e}")
}

/// Write a trace as CSV. The file appears atomically: data goes to a
/// temporary sibling first and is renamed into place on success.
pub fn write_trace(trace: &Trace, path: &Path) -> Result<(), TraceIoError> {
    let io_err = |source| TraceIoError::Io { path: path.display().to_string(), source };
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut tmp = tempfile::NamedTempFile::new_in(dir.unwrap_or(Path::new(".")))
        .map_err(io_err)?;
    {
        let mut w = BufWriter::new(tmp.as_file_mut());
        writeln!(w, "{TRACE_HEADER}").map_err(io_err)?;
        for k in 0..trace.len() {
            let mut cols: Vec<String> = Vec::with_capacity(TRACE_COLUMNS);
            cols.push(fmt(trace.t_s[k]));
            cols.push(fmt(trace.z_m[k]));
            cols.push(fmt(trace.zd_mps[k]));
            for j in Joint::ALL {
                let ch = &trace.joints[j];
                cols.push(fmt(ch.q_deg[k]));
                cols.push(fmt(ch.qd_dps[k]));
                cols.push(fmt(ch.motor_deg[k]));
                cols.push(fmt(ch.spring_nm[k]));
                cols.push(fmt(ch.i_ma[k]));
            }
            cols.push(fmt(trace.fn_heel_n[k]));
            cols.push(fmt(trace.fn_toe_n[k]));
            cols.push(fmt(trace.ft_heel_n[k]));
            cols.push(fmt(trace.ft_toe_n[k]));
            writeln!(w, "{}", cols.join(",")).map_err(io_err)?;
        }
        w.flush().map_err(io_err)?;
    }
    tmp.persist(path)
        .map_err(|e| io_err(e.error))?;
    Ok(())
}

/// Read a trace written by [`write_trace`]. Errors name the path and the
/// offending data row (1-based).
pub fn read_trace(path: &Path) -> Result<Trace, TraceIoError> {
    let io_err = |source| TraceIoError::Io { path: path.display().to_string(), source };
    let file = fs::File::open(path).map_err(io_err)?;
    let mut lines = BufReader::new(file).lines();

    let header = lines
        .next()
        .transpose()
        .map_err(io_err)?
        .unwrap_or_default();
    if header.trim_end() != TRACE_HEADER {
        return Err(TraceIoError::Header { path: path.display().to_string() });
    }

    let mut trace = Trace {
        joints: JointMap::uniform(Default::default()),
        ..Default::default()
    };
    for (idx, line) in lines.enumerate() {
        let row = idx + 1;
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != TRACE_COLUMNS {
            return Err(TraceIoError::Row {
                path: path.display().to_string(),
                row,
                message: format!("expected {TRACE_COLUMNS} columns, found {}", fields.len()),
            });
        }
        let parse = |i: usize| -> Result<f64, TraceIoError> {
            fields[i].parse::<f64>().map_err(|_| TraceIoError::Row {
                path: path.display().to_string(),
                row,
                message: format!("column {}: invalid number {:?}", i + 1, fields[i]),
            })
        };
        trace.t_s.push(parse(0)?);
        trace.z_m.push(parse(1)?);
        trace.zd_mps.push(parse(2)?);
        let mut col = 3;
        for j in Joint::ALL {
            let q = parse(col)?;
            let qd = parse(col + 1)?;
            let motor = parse(col + 2)?;
            let spring = parse(col + 3)?;
            let i_ma = parse(col + 4)?;
            let ch = &mut trace.joints[j];
            ch.q_deg.push(q);
            ch.qd_dps.push(qd);
            ch.motor_deg.push(motor);
            ch.spring_nm.push(spring);
            ch.i_ma.push(i_ma);
            col += 5;
        }
        trace.fn_heel_n.push(parse(18)?);
        trace.fn_toe_n.push(parse(19)?);
        trace.ft_heel_n.push(parse(20)?);
        trace.ft_toe_n.push(parse(21)?);
    }
    Ok(trace)
}
