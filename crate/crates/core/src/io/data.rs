//! Dataset loaders.

use std::path::Path;

use crate::error::{Error, Result};

/// Events in the coal-mining disasters series, 1851-1962.
pub const COAL_EVENTS: usize = 191;
/// Yearly rows in the 1900-1920 lynx-hare series.
pub const LYNX_HARE_ROWS: usize = 21;

const BUNDLED_COAL: &str = include_str!("../../data/coal.txt");
const BUNDLED_LYNX_HARE: &str = include_str!("../../data/lynx_hare.csv");

#[derive(Debug, Clone, PartialEq)]
pub struct LynxHare {
    pub years: Vec<f64>,
    pub hare: Vec<f64>,
    pub lynx: Vec<f64>,
}

/// Event times, one decimal year per line; blank lines and lines starting
/// with `#` are skipped. The result is sorted.
pub fn parse_coal(text: &str, path: &Path) -> Result<Vec<f64>> {
    let mut events = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let value: f64 = line.parse().map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: format!("expected a decimal year, got {line:?}"),
        })?;
        if !value.is_finite() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message: "event time is not finite".into(),
            });
        }
        events.push(value);
    }
    if events.is_empty() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: "no events".into(),
        });
    }
    events.sort_by(f64::total_cmp);
    Ok(events)
}

pub fn load_coal(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_coal(&text, path)
}

pub fn bundled_coal() -> Vec<f64> {
    parse_coal(BUNDLED_COAL, Path::new("<bundled coal.txt>")).expect("bundled data parses")
}

/// `year,hare,lynx` with a header row.
pub fn parse_lynx_hare(text: &str, path: &Path) -> Result<LynxHare> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader.headers()?.clone();
    if header.iter().collect::<Vec<_>>() != ["year", "hare", "lynx"] {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("expected header year,hare,lynx, got {:?}", header.as_slice()),
        });
    }
    let mut out = LynxHare {
        years: Vec::new(),
        hare: Vec::new(),
        lynx: Vec::new(),
    };
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let field = |j: usize| -> Result<f64> {
            record
                .get(j)
                .and_then(|s| s.parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Parse {
                    path: path.to_path_buf(),
                    line,
                    message: format!("column {} is not a number", j + 1),
                })
        };
        let (year, hare, lynx) = (field(0)?, field(1)?, field(2)?);
        if hare <= 0.0 || lynx <= 0.0 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                message: "populations must be positive".into(),
            });
        }
        if out.years.last().is_some_and(|&y| year <= y) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                message: "years must be increasing".into(),
            });
        }
        out.years.push(year);
        out.hare.push(hare);
        out.lynx.push(lynx);
    }
    if out.years.len() < 2 {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: "need at least two rows".into(),
        });
    }
    Ok(out)
}

pub fn load_lynx_hare(path: &Path) -> Result<LynxHare> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_lynx_hare(&text, path)
}

pub fn bundled_lynx_hare() -> LynxHare {
    parse_lynx_hare(BUNDLED_LYNX_HARE, Path::new("<bundled lynx_hare.csv>"))
        .expect("bundled data parses")
}

/// Warning text when a dataset does not have the expected size.
pub fn count_warning(what: &str, got: usize, expected: usize) -> Option<String> {
    (got != expected).then(|| format!("{what}: expected {expected} records, found {got}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_sets_have_expected_sizes() {
        let coal = bundled_coal();
        assert_eq!(coal.len(), COAL_EVENTS);
        assert!(coal.windows(2).all(|w| w[0] <= w[1]));
        assert!(coal[0] > 1851.0 && *coal.last().unwrap() < 1963.0);
        let lh = bundled_lynx_hare();
        assert_eq!(lh.years.len(), LYNX_HARE_ROWS);
        assert_eq!((lh.years[0], lh.years[20]), (1900.0, 1920.0));
        assert_eq!((lh.hare[0], lh.lynx[0]), (30.0, 4.0));
        assert_eq!(count_warning("coal", 191, COAL_EVENTS), None);
        assert!(count_warning("coal", 190, COAL_EVENTS).is_some());
    }

    #[test]
    fn coal_errors_carry_line_numbers() {
        let p = Path::new("x.txt");
        assert!(matches!(parse_coal("", p), Err(Error::Parse { .. })));
        match parse_coal("1851.5\n\n18x2\n", p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert_eq!(parse_coal("# t\n1900.2\n1851.5\n", p).unwrap(), vec![1851.5, 1900.2]);
    }

    #[test]
    fn lynx_hare_errors() {
        let p = Path::new("lh.csv");
        assert!(parse_lynx_hare("yr,hare,lynx\n1900,1,2\n1901,1,2\n", p).is_err());
        match parse_lynx_hare("year,hare,lynx\n1900,1,2\n1901,abc,2\n", p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(parse_lynx_hare("year,hare,lynx\n1900,1,2\n1900,1,2\n", p).is_err());
    }

    #[test]
    fn files_load_from_disk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("coal.txt");
        std::fs::write(&path, "1860.25\n1855.5\n").unwrap();
        assert_eq!(load_coal(&path).unwrap(), vec![1855.5, 1860.25]);
        assert!(matches!(load_coal(&dir.path().join("missing")), Err(Error::Io { .. })));
    }
}
