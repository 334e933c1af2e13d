use std::path::Path;

use psns_core::io::{fmt_f64, write_atomic};
use psns_core::{Error, Result};
use serde::Serialize;

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// CSV with a header row; numbers carry 17 significant digits.
pub struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Result<Self> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(header).map_err(csv_error)?;
        Ok(Self { writer })
    }

    pub fn row(&mut self, fields: &[Field]) -> Result<()> {
        let cells: Vec<String> = fields
            .iter()
            .map(|f| match f {
                Field::Num(x) => fmt_f64(*x),
                Field::Int(i) => i.to_string(),
                Field::Flag(b) => u8::from(*b).to_string(),
            })
            .collect();
        self.writer.write_record(&cells).map_err(csv_error)
    }

    pub fn save(self, path: &Path) -> Result<()> {
        let bytes = self.writer.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        write_atomic(path, &bytes)
    }
}

pub enum Field {
    Num(f64),
    Int(u64),
    Flag(bool),
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}
