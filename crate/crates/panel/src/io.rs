//! CSV reading and writing. Lines starting with `#` are comments; writers
//! may put a provenance header there.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use csv::{ReaderBuilder, StringRecord};

use crate::data::{ControlsRow, EmploymentRow, ExportRow, GdpRow, Panel, RowNumbers};
use crate::error::{PanelError, Result};

pub const EMPLOYMENT_HEADER: [&str; 5] = ["region", "industry", "year", "emp_female", "emp_male"];
pub const EXPORTS_HEADER: [&str; 4] = ["industry", "destination", "year", "exports_usd"];
pub const GDP_HEADER: [&str; 3] = ["destination", "year", "gdp_usd"];
pub const CONTROLS_HEADER: [&str; 4] = ["region", "year", "urban_share", "highschool_share"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PanelPaths {
    pub employment: PathBuf,
    pub exports: PathBuf,
    pub gdp: PathBuf,
    pub controls: PathBuf,
}

impl PanelPaths {
    /// `employment.csv`, `exports.csv`, `gdp.csv` and `controls.csv` in `dir`.
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        Self {
            employment: dir.join("employment.csv"),
            exports: dir.join("exports.csv"),
            gdp: dir.join("gdp.csv"),
            controls: dir.join("controls.csv"),
        }
    }

    pub fn all(&self) -> [&Path; 4] {
        [&self.employment, &self.exports, &self.gdp, &self.controls]
    }
}

struct Table {
    path: PathBuf,
    columns: Vec<usize>,
    records: Vec<(u64, StringRecord)>,
}

impl Table {
    fn read(path: &Path, header: &[&'static str]) -> Result<Self> {
        let file = File::open(path).map_err(|source| PanelError::Io { path: path.to_owned(), source })?;
        let mut reader = ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(file);
        let found = reader.headers().map_err(|e| csv_error(path, e))?.clone();
        let columns = header
            .iter()
            .map(|&name| {
                found
                    .iter()
                    .position(|h| h == name)
                    .ok_or(PanelError::MissingColumn { path: path.to_owned(), column: name })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut records = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| csv_error(path, e))?;
            let line = rec.position().map_or(0, |p| p.line());
            records.push((line, rec));
        }
        Ok(Self { path: path.to_owned(), columns, records })
    }

    fn text(&self, line: u64, rec: &StringRecord, col: usize) -> Result<String> {
        rec.get(self.columns[col]).map(str::to_owned).ok_or_else(|| PanelError::Parse {
            path: self.path.clone(),
            row: line,
            message: format!("missing field {}", col + 1),
        })
    }

    fn number<T: std::str::FromStr>(&self, line: u64, rec: &StringRecord, col: usize, name: &str) -> Result<T> {
        let raw = self.text(line, rec, col)?;
        raw.parse().map_err(|_| PanelError::Parse {
            path: self.path.clone(),
            row: line,
            message: format!("cannot parse {name} from `{raw}`"),
        })
    }

    fn lines(&self) -> Vec<u64> {
        self.records.iter().map(|(l, _)| *l).collect()
    }
}

fn csv_error(path: &Path, e: csv::Error) -> PanelError {
    let row = e.position().map_or(0, |p| p.line());
    PanelError::Parse { path: path.to_owned(), row, message: e.to_string() }
}

pub fn read_panel(paths: &PanelPaths) -> Result<Panel> {
    let t = Table::read(&paths.employment, &EMPLOYMENT_HEADER)?;
    let employment = t
        .records
        .iter()
        .map(|(l, r)| {
            Ok(EmploymentRow {
                region: t.text(*l, r, 0)?,
                industry: t.text(*l, r, 1)?,
                year: t.number(*l, r, 2, "year")?,
                emp_female: t.number(*l, r, 3, "emp_female")?,
                emp_male: t.number(*l, r, 4, "emp_male")?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let employment_lines = t.lines();

    let t = Table::read(&paths.exports, &EXPORTS_HEADER)?;
    let exports = t
        .records
        .iter()
        .map(|(l, r)| {
            Ok(ExportRow {
                industry: t.text(*l, r, 0)?,
                destination: t.text(*l, r, 1)?,
                year: t.number(*l, r, 2, "year")?,
                exports_usd: t.number(*l, r, 3, "exports_usd")?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let exports_lines = t.lines();

    let t = Table::read(&paths.gdp, &GDP_HEADER)?;
    let gdp = t
        .records
        .iter()
        .map(|(l, r)| {
            Ok(GdpRow {
                destination: t.text(*l, r, 0)?,
                year: t.number(*l, r, 1, "year")?,
                gdp_usd: t.number(*l, r, 2, "gdp_usd")?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let gdp_lines = t.lines();

    let t = Table::read(&paths.controls, &CONTROLS_HEADER)?;
    let controls = t
        .records
        .iter()
        .map(|(l, r)| {
            Ok(ControlsRow {
                region: t.text(*l, r, 0)?,
                year: t.number(*l, r, 1, "year")?,
                urban_share: t.number(*l, r, 2, "urban_share")?,
                highschool_share: t.number(*l, r, 3, "highschool_share")?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let rows = RowNumbers { employment: employment_lines, exports: exports_lines, gdp: gdp_lines, controls: t.lines() };
    Panel::with_rows(Panel { employment, exports, gdp, controls }, rows)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|source| PanelError::Io { path: path.to_owned(), source })
}

/// Writes one CSV table. `comment` lines are prefixed with `# `.
pub fn write_table<R>(
    path: &Path,
    comment: Option<&str>,
    header: &[&str],
    rows: &[R],
    fields: impl Fn(&R) -> Vec<String>,
) -> Result<()> {
    let io_err = |source| PanelError::Io { path: path.to_owned(), source };
    let mut out = create(path)?;
    if let Some(text) = comment {
        for line in text.lines() {
            writeln!(out, "# {line}").map_err(io_err)?;
        }
    }
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(header).map_err(|e| csv_error(path, e))?;
        for r in rows {
            w.write_record(fields(r)).map_err(|e| csv_error(path, e))?;
        }
        w.flush().map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

pub fn write_panel(panel: &Panel, paths: &PanelPaths, comment: Option<&str>) -> Result<()> {
    write_table(&paths.employment, comment, &EMPLOYMENT_HEADER, &panel.employment, |r| {
        vec![r.region.clone(), r.industry.clone(), r.year.to_string(), r.emp_female.to_string(), r.emp_male.to_string()]
    })?;
    write_table(&paths.exports, comment, &EXPORTS_HEADER, &panel.exports, |r| {
        vec![r.industry.clone(), r.destination.clone(), r.year.to_string(), r.exports_usd.to_string()]
    })?;
    write_table(&paths.gdp, comment, &GDP_HEADER, &panel.gdp, |r| {
        vec![r.destination.clone(), r.year.to_string(), r.gdp_usd.to_string()]
    })?;
    write_table(&paths.controls, comment, &CONTROLS_HEADER, &panel.controls, |r| {
        vec![r.region.clone(), r.year.to_string(), r.urban_share.to_string(), r.highschool_share.to_string()]
    })
}
