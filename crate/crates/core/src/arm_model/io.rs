use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

use super::instance::{ArmSpec, Instance, InstanceError, InstanceParams, Window};
use super::kernel::{validate_kernel, KernelError, TransitionKernel};
use crate::scalar::Scalar;

pub const INSTANCE_HEADER: [&str; 8] = ["arm_id", "p00", "p01", "p10", "p11", "window_start", "window_len", "group_id"];

#[derive(Debug, Error)]
pub enum InstanceIoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing column `{0}`")]
    MissingColumn(&'static str),
    #[error("line {line}: cannot parse {column} value `{value}`")]
    Parse { line: u64, column: &'static str, value: String },
    #[error("line {line}: {source}")]
    Kernel { line: u64, source: KernelError },
    #[error("line {line}: window_start and window_len must both be set or both empty")]
    PartialWindow { line: u64 },
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Instance(#[from] InstanceError),
}

struct Columns {
    idx: [Option<usize>; 8],
}

impl Columns {
    fn from_header(header: &csv::StringRecord) -> Result<Self, InstanceIoError> {
        let mut idx = [None; 8];
        for (i, name) in INSTANCE_HEADER.iter().enumerate() {
            idx[i] = header.iter().position(|h| h.trim() == *name);
        }
        for (i, name) in INSTANCE_HEADER.iter().enumerate().take(5) {
            if idx[i].is_none() {
                return Err(InstanceIoError::MissingColumn(name));
            }
        }
        Ok(Self { idx })
    }

    fn field<'r>(&self, rec: &'r csv::StringRecord, col: usize) -> Option<&'r str> {
        self.idx[col].and_then(|i| rec.get(i)).map(str::trim).filter(|s| !s.is_empty())
    }
}

fn parse_field<V: std::str::FromStr>(
    raw: Option<&str>,
    line: u64,
    column: &'static str,
) -> Result<Option<V>, InstanceIoError> {
    match raw {
        None => Ok(None),
        Some(s) => s.parse::<V>().map(Some).map_err(|_| InstanceIoError::Parse { line, column, value: s.to_string() }),
    }
}

/// Parses the arm table. Instance-level parameters come separately.
pub fn read_arms<T: Scalar, R: Read>(reader: R) -> Result<Vec<ArmSpec<T>>, InstanceIoError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(true).from_reader(reader);
    let cols = Columns::from_header(rdr.headers()?)?;
    let mut arms = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let req = |c: usize| -> Result<T, InstanceIoError> {
            let name = INSTANCE_HEADER[c];
            parse_field::<T>(cols.field(&rec, c), line, name)?.ok_or(InstanceIoError::Parse {
                line,
                column: name,
                value: String::new(),
            })
        };
        let arm_id = parse_field::<u32>(cols.field(&rec, 0), line, "arm_id")?.ok_or(InstanceIoError::Parse {
            line,
            column: "arm_id",
            value: String::new(),
        })?;
        let kernel = TransitionKernel { p00: req(1)?, p01: req(2)?, p10: req(3)?, p11: req(4)? };
        validate_kernel(&kernel).map_err(|source| InstanceIoError::Kernel { line, source })?;
        let ws = parse_field::<usize>(cols.field(&rec, 5), line, "window_start")?;
        let wl = parse_field::<usize>(cols.field(&rec, 6), line, "window_len")?;
        let window = match (ws, wl) {
            (Some(s), Some(l)) => Some(Window::new(s, l)),
            (None, None) => None,
            _ => return Err(InstanceIoError::PartialWindow { line }),
        };
        let group_id = parse_field::<u32>(cols.field(&rec, 7), line, "group_id")?;
        arms.push(ArmSpec { arm_id, kernel, window, group_id });
    }
    Ok(arms)
}

/// Writes every column; probabilities use the shortest round-trip decimal form.
pub fn write_arms<T: Scalar, W: Write>(writer: W, arms: &[ArmSpec<T>]) -> Result<(), InstanceIoError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(INSTANCE_HEADER)?;
    for a in arms {
        let opt = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
        wtr.write_record([
            a.arm_id.to_string(),
            a.kernel.p00.to_string(),
            a.kernel.p01.to_string(),
            a.kernel.p10.to_string(),
            a.kernel.p11.to_string(),
            opt(a.window.map(|w| w.start)),
            opt(a.window.map(|w| w.len)),
            a.group_id.map(|g| g.to_string()).unwrap_or_default(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_params(path: &Path) -> Result<InstanceParams, InstanceIoError> {
    let text = std::fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| InstanceIoError::Config(e.to_string()))
}

pub fn write_params(path: &Path, params: &InstanceParams) -> Result<(), InstanceIoError> {
    let text = toml::to_string(params).map_err(|e| InstanceIoError::Config(e.to_string()))?;
    std::fs::write(path, text)?;
    Ok(())
}

/// Sidecar path holding the instance parameters: `arms.csv` -> `arms.toml`.
pub fn params_path(csv_path: &Path) -> std::path::PathBuf {
    csv_path.with_extension("toml")
}

pub fn load_instance<T: Scalar>(csv_path: &Path, params: &InstanceParams) -> Result<Instance<T>, InstanceIoError> {
    let arms = read_arms(File::open(csv_path)?)?;
    Ok(Instance::new(arms, params)?)
}

/// Writes the arm CSV and its parameter sidecar.
pub fn save_instance<T: Scalar>(instance: &Instance<T>, csv_path: &Path) -> Result<(), InstanceIoError> {
    write_arms(File::create(csv_path)?, &instance.arms)?;
    write_params(&params_path(csv_path), &instance.params())
}

#[cfg(test)]
mod tests {
    use super::*;

    const TWO_ROWS: &str = "arm_id,p00,p01,p10,p11,window_start,window_len,group_id\n\
                            0,0.8,0.2,0.1,0.9,3,2,1\n\
                            1,0.7,0.3,0.25,0.75,,,\n";

    #[test]
    fn reads_two_rows() {
        let arms: Vec<ArmSpec<f64>> = read_arms(TWO_ROWS.as_bytes()).unwrap();
        assert_eq!(arms.len(), 2);
        assert_eq!(arms[0].window, Some(Window::new(3, 2)));
        assert_eq!(arms[0].group_id, Some(1));
        assert_eq!(arms[1].window, None);
        assert_eq!(arms[1].kernel.p10, 0.25);
    }

    #[test]
    fn optional_columns_may_be_absent() {
        let text = "arm_id,p00,p01,p10,p11\n4,0.5,0.5,0.5,0.5\n";
        let arms: Vec<ArmSpec<f64>> = read_arms(text.as_bytes()).unwrap();
        assert_eq!(arms[0].arm_id, 4);
    }

    #[test]
    fn invalid_row_reports_line() {
        let text = "arm_id,p00,p01,p10,p11\n0,0.8,0.2,0.1,0.9\n1,0.5,0.6,0.1,0.9\n";
        let err = read_arms::<f64, _>(text.as_bytes()).unwrap_err();
        match err {
            InstanceIoError::Kernel { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn missing_column_reported() {
        let text = "arm_id,p00,p01,p10\n0,0.8,0.2,0.1\n";
        let err = read_arms::<f64, _>(text.as_bytes()).unwrap_err();
        assert!(matches!(err, InstanceIoError::MissingColumn("p11")));
    }

    #[test]
    fn garbage_value_reports_line_and_column() {
        let text = "arm_id,p00,p01,p10,p11\n0,abc,0.2,0.1,0.9\n";
        let err = read_arms::<f64, _>(text.as_bytes()).unwrap_err();
        assert_eq!(err.to_string(), "line 2: cannot parse p00 value `abc`");
    }
}
