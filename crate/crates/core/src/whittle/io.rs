use std::io::Write;

use serde::Serialize;

/// One row of the index-table dump.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndexRow {
    pub arm_id: u32,
    pub state_id: usize,
    pub belief: f64,
    pub timer: Option<usize>,
    pub counter: Option<u32>,
    pub whittle_index: f64,
}

pub fn write_index_rows<W: Write>(writer: W, rows: &[IndexRow]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    if rows.is_empty() {
        w.write_record(["arm_id", "state_id", "belief", "timer", "counter", "whittle_index"])?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dump_format() {
        let rows = vec![
            IndexRow { arm_id: 3, state_id: 0, belief: 1.0, timer: Some(4), counter: Some(1), whittle_index: 0.25 },
            IndexRow { arm_id: 3, state_id: 1, belief: 0.9, timer: None, counter: None, whittle_index: 0.5 },
        ];
        let mut buf = Vec::new();
        write_index_rows(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "arm_id,state_id,belief,timer,counter,whittle_index\n3,0,1.0,4,1,0.25\n3,1,0.9,,,0.5\n");
    }
}
