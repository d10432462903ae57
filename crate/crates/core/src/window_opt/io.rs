use std::io::{Read, Write};

use thiserror::Error;

use crate::arm_model::Window;

#[derive(Debug, Error)]
pub enum WindowIoError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
}

/// `arm_id,window_start,window_len`, one row per window.
pub fn write_windows<W: Write>(writer: W, arm_ids: &[u32], windows: &[Vec<Window>]) -> Result<(), WindowIoError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["arm_id", "window_start", "window_len"])?;
    for (id, ws) in arm_ids.iter().zip(windows) {
        for win in ws {
            w.write_record([id.to_string(), win.start.to_string(), win.len.to_string()])?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Rows in file order as `(arm_id, window)`.
pub fn read_windows<R: Read>(reader: R) -> Result<Vec<(u32, Window)>, WindowIoError> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let num = |k: usize| -> Result<usize, WindowIoError> {
            let s = rec.get(k).unwrap_or("");
            s.parse()
                .map_err(|_| WindowIoError::Parse { line, message: format!("bad number {s:?} in column {}", k + 1) })
        };
        out.push((num(0)? as u32, Window::new(num(1)?, num(2)?)));
    }
    Ok(out)
}
