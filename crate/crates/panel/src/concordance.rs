//! Industry concordances from the survey classification (ENPE) to trade
//! classifications: ISIC Rev. 4 divisions via NACE chapters for goods, and
//! EBOPS service codes for services.

use serde::Serialize;

use crate::error::{PanelError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Concordance {
    IsicToEnpe,
    EbopsToEnpe,
}

impl Concordance {
    pub fn table(self) -> &'static [ConcordanceRow] {
        match self {
            Concordance::IsicToEnpe => ISIC_TO_ENPE,
            Concordance::EbopsToEnpe => EBOPS_TO_ENPE,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Concordance::IsicToEnpe => "ISIC-to-ENPE",
            Concordance::EbopsToEnpe => "EBOPS-to-ENPE",
        }
    }
}

/// One documented row. For ISIC rows `source` is a division or an inclusive
/// division range and `via` the NACE chapter; for EBOPS rows `source` is the
/// service code and `via` its numeric BaTiS id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ConcordanceRow {
    pub source: &'static str,
    pub via: &'static str,
    pub enpe: u16,
}

impl ConcordanceRow {
    /// Inclusive ISIC division range; `None` for service rows.
    pub fn division_range(&self) -> Option<(u16, u16)> {
        let mut parts = self.source.splitn(2, '-');
        let lo = parts.next()?.parse().ok()?;
        let hi = match parts.next() {
            Some(h) => h.parse().ok()?,
            None => lo,
        };
        Some((lo, hi))
    }
}

const fn row(source: &'static str, via: &'static str, enpe: u16) -> ConcordanceRow {
    ConcordanceRow { source, via, enpe }
}

pub static ISIC_TO_ENPE: &[ConcordanceRow] = &[
    row("1-3", "A", 0),
    row("5-9", "B", 65),
    row("10-12", "CA", 10),
    row("13-15", "CB", 50),
    row("16-19", "C", 60),
    row("20", "CE", 40),
    row("21-22", "C", 60),
    row("23", "CG", 20),
    row("24-25", "C", 60),
    row("26", "CI", 30),
    row("27", "CJ", 30),
    row("28", "CK", 30),
    row("29-33", "C", 60),
    row("35", "D", 67),
    row("36-39", "E", 68),
    row("41-43", "F", 69),
    row("45-47", "G", 72),
    row("49-53", "H", 76),
    row("55-56", "I", 79),
    row("58-63", "J", 76),
    row("64-66", "K", 82),
    row("68", "L", 85),
    row("72-75", "M", 85),
    row("77-82", "N", 85),
    row("84", "O", 93),
    row("85", "P", 93),
    row("86-88", "Q", 89),
    row("90-93", "R", 89),
    row("94-96", "S", 89),
    row("97-98", "T", 99),
    row("99", "U", 98),
];

pub static EBOPS_TO_ENPE: &[ConcordanceRow] = &[
    row("SC", "205", 76),
    row("SD", "236", 79),
    row("SE", "249", 69),
    row("SF", "253", 82),
    row("SG", "260", 82),
    row("SH", "262", 76),
    row("SJ", "268", 85),
    row("SK", "287", 89),
    row("SL", "291", 93),
];

/// Result of a lookup: the target code and the row that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Mapping {
    pub enpe: u16,
    pub row: &'static ConcordanceRow,
}

/// Maps an ISIC division (`"20"`, `"020"`) or an EBOPS service code
/// (`"SJ"`) or BaTiS id (`"268"`) to its ENPE code.
pub fn map_code(code: &str, concordance: Concordance) -> Result<Mapping> {
    let trimmed = code.trim();
    let table = concordance.table();
    let found = match concordance {
        Concordance::IsicToEnpe => trimmed.parse::<u16>().ok().and_then(|division| {
            table.iter().find(|r| {
                let (lo, hi) = r.division_range().expect("ISIC rows carry ranges");
                (lo..=hi).contains(&division)
            })
        }),
        Concordance::EbopsToEnpe => table
            .iter()
            .find(|r| r.source.eq_ignore_ascii_case(trimmed) || r.via == trimmed),
    };
    found.map(|row| Mapping { enpe: row.enpe, row }).ok_or_else(|| PanelError::UnmappedCode {
        code: code.to_string(),
        table: concordance.name(),
        nearest: nearest(trimmed, concordance),
    })
}

fn nearest(code: &str, concordance: Concordance) -> String {
    let table = concordance.table();
    let describe = |r: &ConcordanceRow| format!("{} ({} -> {})", r.source, r.via, r.enpe);
    match concordance {
        Concordance::IsicToEnpe => match code.parse::<i64>() {
            Ok(division) => table
                .iter()
                .min_by_key(|r| {
                    let (lo, hi) = r.division_range().expect("ISIC rows carry ranges");
                    (division - lo as i64).abs().min((division - hi as i64).abs())
                })
                .map(describe)
                .unwrap_or_default(),
            Err(_) => format!("divisions {} through {}", table[0].source, table[table.len() - 1].source),
        },
        Concordance::EbopsToEnpe => {
            let upper = code.to_ascii_uppercase();
            table
                .iter()
                .min_by_key(|r| {
                    r.source
                        .bytes()
                        .zip(upper.bytes().chain(std::iter::repeat(0)))
                        .map(|(a, b)| (a as i32 - b as i32).abs())
                        .sum::<i32>()
                })
                .map(describe)
                .unwrap_or_default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn documented_examples() {
        assert_eq!(map_code("20", Concordance::IsicToEnpe).unwrap().enpe, 40);
        assert_eq!(map_code("84", Concordance::IsicToEnpe).unwrap().enpe, 93);
        assert_eq!(map_code("SJ", Concordance::EbopsToEnpe).unwrap().enpe, 85);
        assert_eq!(map_code("268", Concordance::EbopsToEnpe).unwrap().enpe, 85);
    }

    #[test]
    fn ranges_cover_interior_divisions() {
        let m = map_code("31", Concordance::IsicToEnpe).unwrap();
        assert_eq!((m.enpe, m.row.via), (60, "C"));
        assert_eq!(map_code("07", Concordance::IsicToEnpe).unwrap().enpe, 65);
    }

    #[test]
    fn unknown_codes_name_a_neighbour() {
        match map_code("34", Concordance::IsicToEnpe) {
            Err(PanelError::UnmappedCode { nearest, .. }) => assert!(nearest.starts_with("35") || nearest.starts_with("29-33")),
            other => panic!("{other:?}"),
        }
        assert!(matches!(map_code("SZ", Concordance::EbopsToEnpe), Err(PanelError::UnmappedCode { .. })));
        assert!(matches!(map_code("textiles", Concordance::IsicToEnpe), Err(PanelError::UnmappedCode { .. })));
    }

    #[test]
    fn ranges_do_not_overlap() {
        let mut seen = std::collections::HashSet::new();
        for r in ISIC_TO_ENPE {
            let (lo, hi) = r.division_range().unwrap();
            assert!(lo <= hi);
            for d in lo..=hi {
                assert!(seen.insert(d), "division {d} listed twice");
            }
        }
    }
}
