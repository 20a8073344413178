//! CSV plumbing shared by every artifact format.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use indexmap::IndexSet;

use crate::{Error, Result};

/// Leading comment line written at the top of every output file.
pub fn header_line(seed: u64) -> String {
    format!("# riskrec {} seed={}\n", crate::VERSION, seed)
}

pub fn reader<R: Read>(input: R, has_headers: bool) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(has_headers)
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input)
}

pub fn writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().from_writer(out)
}

pub fn csv_error(source_name: &str, err: csv::Error) -> Error {
    let line = err.position().map(|p| p.line()).unwrap_or(0);
    match err.into_kind() {
        csv::ErrorKind::Io(e) => Error::io(source_name, e),
        other => Error::parse(source_name, line, format!("{other:?}")),
    }
}

pub fn write_error(source_name: &str, err: csv::Error) -> Error {
    match err.into_kind() {
        csv::ErrorKind::Io(e) => Error::io(source_name, e),
        other => Error::Invalid(format!("{source_name}: {other:?}")),
    }
}

pub fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::io(path, e))
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

pub fn line_of(record: &csv::StringRecord) -> u64 {
    record.position().map(|p| p.line()).unwrap_or(0)
}

/// A 0/1 matrix in the `row_key,<col_id>...` layout.
pub struct BoolTable {
    pub rows: IndexSet<String>,
    pub cols: IndexSet<String>,
    /// Row-major.
    pub cells: Vec<bool>,
}

pub fn read_bool_table<R: Read>(input: R, source_name: &str, row_key: &str) -> Result<BoolTable> {
    let mut rdr = reader(input, true);
    let headers = rdr
        .headers()
        .map_err(|e| csv_error(source_name, e))?
        .clone();
    if headers.get(0) != Some(row_key) {
        return Err(Error::parse(
            source_name,
            line_of(&headers).max(1),
            format!("first header column must be `{row_key}`"),
        ));
    }
    let mut cols = IndexSet::new();
    for name in headers.iter().skip(1) {
        if name.is_empty() || !cols.insert(name.to_string()) {
            return Err(Error::parse(
                source_name,
                line_of(&headers).max(1),
                format!("empty or duplicate column id `{name}`"),
            ));
        }
    }
    let mut rows = IndexSet::new();
    let mut cells = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(source_name, e))?;
        let line = line_of(&record);
        if record.len() != cols.len() + 1 {
            return Err(Error::parse(
                source_name,
                line,
                format!("expected {} fields, found {}", cols.len() + 1, record.len()),
            ));
        }
        let id = &record[0];
        if id.is_empty() || !rows.insert(id.to_string()) {
            return Err(Error::parse(
                source_name,
                line,
                format!("empty or duplicate row id `{id}`"),
            ));
        }
        for field in record.iter().skip(1) {
            cells.push(match field {
                "0" => false,
                "1" => true,
                other => {
                    return Err(Error::parse(
                        source_name,
                        line,
                        format!("expected 0 or 1, found `{other}`"),
                    ))
                }
            });
        }
    }
    Ok(BoolTable { rows, cols, cells })
}

pub fn write_bool_table<W: Write>(
    out: W,
    seed: u64,
    row_key: &str,
    rows: &IndexSet<String>,
    cols: &IndexSet<String>,
    cell: impl Fn(usize, usize) -> bool,
) -> Result<()> {
    let mut out = out;
    out.write_all(header_line(seed).as_bytes())
        .map_err(|e| Error::io(row_key, e))?;
    let mut wtr = writer(out);
    let mut header = vec![row_key];
    header.extend(cols.iter().map(String::as_str));
    wtr.write_record(&header)
        .map_err(|e| write_error(row_key, e))?;
    for (r, id) in rows.iter().enumerate() {
        let mut rec = vec![id.as_str()];
        rec.extend((0..cols.len()).map(|c| if cell(r, c) { "1" } else { "0" }));
        wtr.write_record(&rec)
            .map_err(|e| write_error(row_key, e))?;
    }
    wtr.flush().map_err(|e| Error::io(row_key, e))?;
    Ok(())
}
