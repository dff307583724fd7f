//! Long-format panel tables and their invariants.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{PanelError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmploymentRow {
    pub region: String,
    pub industry: String,
    pub year: i32,
    pub emp_female: f64,
    pub emp_male: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportRow {
    pub industry: String,
    pub destination: String,
    pub year: i32,
    pub exports_usd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GdpRow {
    pub destination: String,
    pub year: i32,
    pub gdp_usd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlsRow {
    pub region: String,
    pub year: i32,
    pub urban_share: f64,
    pub highschool_share: f64,
}

/// Region x industry x year employment, industry x destination x year
/// exports, destination GDP and regional controls. Rows are kept sorted by
/// key with years ascending.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Panel {
    pub employment: Vec<EmploymentRow>,
    pub exports: Vec<ExportRow>,
    pub gdp: Vec<GdpRow>,
    pub controls: Vec<ControlsRow>,
}

/// Source row numbers used in error messages; data rows are numbered from 1
/// when no file positions are known.
#[derive(Debug, Clone, Default)]
pub(crate) struct RowNumbers {
    pub employment: Vec<u64>,
    pub exports: Vec<u64>,
    pub gdp: Vec<u64>,
    pub controls: Vec<u64>,
}

fn sequential(n: usize) -> Vec<u64> {
    (1..=n as u64).collect()
}

impl Panel {
    /// Validates the tables and sorts them into canonical order.
    pub fn new(
        employment: Vec<EmploymentRow>,
        exports: Vec<ExportRow>,
        gdp: Vec<GdpRow>,
        controls: Vec<ControlsRow>,
    ) -> Result<Self> {
        let rows = RowNumbers {
            employment: sequential(employment.len()),
            exports: sequential(exports.len()),
            gdp: sequential(gdp.len()),
            controls: sequential(controls.len()),
        };
        Self::with_rows(Panel { employment, exports, gdp, controls }, rows)
    }

    pub(crate) fn with_rows(mut panel: Panel, rows: RowNumbers) -> Result<Self> {
        panel.check(&rows)?;
        panel.employment.sort_by(|a, b| (&a.region, &a.industry, a.year).cmp(&(&b.region, &b.industry, b.year)));
        panel.exports.sort_by(|a, b| (&a.industry, &a.destination, a.year).cmp(&(&b.industry, &b.destination, b.year)));
        panel.gdp.sort_by(|a, b| (&a.destination, a.year).cmp(&(&b.destination, b.year)));
        panel.controls.sort_by(|a, b| (&a.region, a.year).cmp(&(&b.region, b.year)));
        Ok(panel)
    }

    pub fn validate(&self) -> Result<()> {
        self.check(&RowNumbers {
            employment: sequential(self.employment.len()),
            exports: sequential(self.exports.len()),
            gdp: sequential(self.gdp.len()),
            controls: sequential(self.controls.len()),
        })
    }

    fn check(&self, rows: &RowNumbers) -> Result<()> {
        const EMP: &str = "employment";
        const EXP: &str = "exports";
        const GDP: &str = "gdp";
        const CTL: &str = "controls";

        let mut keys = HashSet::new();
        for (r, line) in self.employment.iter().zip(&rows.employment) {
            nonnegative(EMP, *line, "emp_female", r.emp_female)?;
            nonnegative(EMP, *line, "emp_male", r.emp_male)?;
            if !keys.insert((r.region.as_str(), r.industry.as_str(), r.year)) {
                return Err(duplicate(EMP, *line, format!("({}, {}, {})", r.region, r.industry, r.year)));
            }
        }
        let regions: BTreeSet<&str> = self.employment.iter().map(|r| r.region.as_str()).collect();
        let industries: BTreeSet<&str> = self.employment.iter().map(|r| r.industry.as_str()).collect();
        let years: BTreeSet<i32> = self.employment.iter().map(|r| r.year).collect();
        for region in &regions {
            for year in &years {
                for industry in &industries {
                    if !keys.contains(&(*region, *industry, *year)) {
                        return Err(PanelError::Unbalanced {
                            table: EMP,
                            detail: format!("region {region} has no row for industry {industry} in year {year}"),
                        });
                    }
                }
            }
        }

        let mut keys = HashSet::new();
        for (r, line) in self.exports.iter().zip(&rows.exports) {
            nonnegative(EXP, *line, "exports_usd", r.exports_usd)?;
            if !keys.insert((r.industry.as_str(), r.destination.as_str(), r.year)) {
                return Err(duplicate(EXP, *line, format!("({}, {}, {})", r.industry, r.destination, r.year)));
            }
        }

        let mut keys = HashSet::new();
        for (r, line) in self.gdp.iter().zip(&rows.gdp) {
            if !(r.gdp_usd.is_finite() && r.gdp_usd > 0.0) {
                return Err(PanelError::OutOfRange { table: GDP, row: *line, field: "gdp_usd", value: r.gdp_usd });
            }
            if !keys.insert((r.destination.as_str(), r.year)) {
                return Err(duplicate(GDP, *line, format!("({}, {})", r.destination, r.year)));
            }
        }
        let destinations: BTreeSet<&str> = self.gdp.iter().map(|r| r.destination.as_str()).collect();
        for d in &destinations {
            for year in &years {
                if !keys.contains(&(*d, *year)) {
                    return Err(PanelError::Unbalanced {
                        table: GDP,
                        detail: format!("destination {d} has no GDP for year {year}"),
                    });
                }
            }
        }
        if let Some(r) = self.exports.iter().find(|r| !destinations.contains(r.destination.as_str())) {
            return Err(PanelError::Unbalanced {
                table: EXP,
                detail: format!("destination {} has exports but no GDP series", r.destination),
            });
        }

        let mut keys = HashSet::new();
        for (r, line) in self.controls.iter().zip(&rows.controls) {
            share(CTL, *line, "urban_share", r.urban_share)?;
            share(CTL, *line, "highschool_share", r.highschool_share)?;
            if !keys.insert((r.region.as_str(), r.year)) {
                return Err(duplicate(CTL, *line, format!("({}, {})", r.region, r.year)));
            }
        }
        if !self.controls.is_empty() {
            for region in &regions {
                for year in &years {
                    if !keys.contains(&(*region, *year)) {
                        return Err(PanelError::Unbalanced {
                            table: CTL,
                            detail: format!("region {region} has no controls for year {year}"),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Employment years, ascending.
    pub fn years(&self) -> Vec<i32> {
        self.employment.iter().map(|r| r.year).collect::<BTreeSet<_>>().into_iter().collect()
    }

    pub fn regions(&self) -> Vec<String> {
        distinct(self.employment.iter().map(|r| &r.region))
    }

    pub fn industries(&self) -> Vec<String> {
        distinct(self.employment.iter().map(|r| &r.industry))
    }

    pub fn destinations(&self) -> Vec<String> {
        distinct(self.gdp.iter().map(|r| &r.destination))
    }

    /// Multiplies every export value by `factor`.
    pub fn scale_exports(&mut self, factor: f64) {
        for r in &mut self.exports {
            r.exports_usd *= factor;
        }
    }
}

fn distinct<'a>(it: impl Iterator<Item = &'a String>) -> Vec<String> {
    it.map(String::as_str).collect::<BTreeSet<_>>().into_iter().map(str::to_owned).collect()
}

fn nonnegative(table: &'static str, row: u64, field: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(PanelError::OutOfRange { table, row, field, value })
    }
}

fn share(table: &'static str, row: u64, field: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(PanelError::OutOfRange { table, row, field, value })
    }
}

fn duplicate(table: &'static str, row: u64, key: String) -> PanelError {
    PanelError::DuplicateKey { table, row, key }
}
