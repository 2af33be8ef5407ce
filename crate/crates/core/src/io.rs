//! CSV input and output.
//!
//! Readers accept comma-separated UTF-8 with an optional header line, blank
//! lines and `#` comments. Numbers are written with at most 12 significant
//! digits using the shortest representation that round-trips at that
//! precision, so identical inputs give byte-identical files.

use std::io::{Read, Write};

use num_complex::Complex64;

use crate::bath::SpectrumModel;
use crate::error::{Error, Result};
use crate::modulation::ModulationWaveform;
use crate::multipartite::{BathMode, CouplingSpectrumMatrix};

/// Format `x` with at most 12 significant digits.
pub fn format_number(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let r: f64 = format!("{x:.11e}").parse().expect("formatted float parses");
    let a = r.abs();
    if (1e-5..1e15).contains(&a) {
        format!("{r}")
    } else {
        format!("{r:e}")
    }
}

/// Header plus numeric rows.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        CsvTable {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[idx]).collect())
    }

    pub fn write_to<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(w);
        out.write_record(&self.header).map_err(csv_error)?;
        for row in &self.rows {
            out.write_record(row.iter().map(|&x| format_number(x)))
                .map_err(csv_error)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv output is UTF-8")
    }
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse {
            line,
            message: format!("{other:?}"),
        },
    }
}

/// Numeric records of a CSV stream with their line numbers. A first record
/// whose fields do not all parse as numbers is taken as a header.
fn numeric_records<R: Read>(input: R, columns: impl Fn(usize) -> bool, what: &str) -> Result<Vec<(usize, Vec<f64>)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut out = Vec::new();
    for (idx, rec) in reader.records().enumerate() {
        let rec = rec.map_err(csv_error)?;
        let line = rec.position().map_or(idx + 1, |p| p.line() as usize);
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if out.is_empty() && idx == 0 => continue,
            Err(e) => {
                return Err(Error::Parse {
                    line,
                    message: format!("{what}: {e}"),
                })
            }
        };
        if !columns(values.len()) {
            return Err(Error::Parse {
                line,
                message: format!("{what}: unexpected column count {}", values.len()),
            });
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Parse {
                line,
                message: format!("{what}: non-finite value {bad}"),
            });
        }
        out.push((line, values));
    }
    if out.is_empty() {
        return Err(Error::Parse {
            line: 0,
            message: format!("{what}: no data rows"),
        });
    }
    Ok(out)
}

/// Two-column `(ω, G0)` samples as a tabulated spectrum.
pub fn read_spectrum<R: Read>(input: R) -> Result<SpectrumModel> {
    let rows = numeric_records(input, |n| n == 2, "spectrum")?;
    for w in rows.windows(2) {
        if w[1].1[0] <= w[0].1[0] {
            return Err(Error::Parse {
                line: w[1].0,
                message: "spectrum: ω must be strictly increasing".into(),
            });
        }
    }
    if let Some((line, _)) = rows.iter().find(|(_, v)| v[1] < 0.0) {
        return Err(Error::Parse {
            line: *line,
            message: "spectrum: G0 must be >= 0".into(),
        });
    }
    let model = SpectrumModel::Tabulated {
        omega: rows.iter().map(|r| r.1[0]).collect(),
        values: rows.iter().map(|r| r.1[1]).collect(),
    };
    model.validate()?;
    Ok(model)
}

/// Three-column `(t, Re ε, Im ε)` samples on a uniform grid starting at 0.
pub fn read_waveform<R: Read>(input: R) -> Result<ModulationWaveform> {
    let rows = numeric_records(input, |n| n == 3, "waveform")?;
    if rows[0].1[0] != 0.0 {
        return Err(Error::Parse {
            line: rows[0].0,
            message: "waveform: samples must start at t = 0".into(),
        });
    }
    if rows.len() < 2 {
        return Err(Error::Parse {
            line: rows[0].0,
            message: "waveform: at least two samples are required".into(),
        });
    }
    let step = rows[1].1[0];
    if !(step > 0.0) {
        return Err(Error::Parse {
            line: rows[1].0,
            message: "waveform: times must be increasing".into(),
        });
    }
    for (k, (line, v)) in rows.iter().enumerate() {
        if (v[0] - k as f64 * step).abs() > 1e-9 * step.max(v[0].abs()) {
            return Err(Error::Parse {
                line: *line,
                message: format!("waveform: time {} is off the uniform grid of step {step}", v[0]),
            });
        }
    }
    let wf = ModulationWaveform::Sampled {
        step,
        values: rows.iter().map(|r| Complex64::new(r.1[1], r.1[2])).collect(),
    };
    wf.validate()?;
    Ok(wf)
}

/// Mode list `ω_k, Re μ_{k,1}, Im μ_{k,1}, …` as a coupling-spectrum matrix.
pub fn read_mode_list<R: Read>(input: R, broadening: Option<f64>) -> Result<CouplingSpectrumMatrix> {
    let rows = numeric_records(input, |n| n >= 3 && n % 2 == 1, "mode list")?;
    let width = rows[0].1.len();
    if let Some((line, _)) = rows.iter().find(|(_, v)| v.len() != width) {
        return Err(Error::Parse {
            line: *line,
            message: "mode list: every row needs the same number of qubits".into(),
        });
    }
    let modes = rows
        .iter()
        .map(|(_, v)| BathMode {
            frequency: v[0],
            couplings: v[1..].chunks(2).map(|c| Complex64::new(c[0], c[1])).collect(),
        })
        .collect();
    let g = CouplingSpectrumMatrix::ModeList { modes, broadening };
    g.validate()?;
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format() {
        assert_eq!(format_number(0.1), "0.1");
        assert_eq!(format_number(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_number(-2.5e-9), "-2.5e-9");
        assert_eq!(format_number(123456789012345.0), "123456789012000");
        assert_eq!(format_number(-0.0), "0");
        assert_eq!(format_number(f64::NAN), "NaN");
    }

    #[test]
    fn spectrum_with_header() {
        let text = "omega,G0\n0,0\n1,0.5\n\n2,0.25\n";
        match read_spectrum(text.as_bytes()).unwrap() {
            SpectrumModel::Tabulated { omega, values } => {
                assert_eq!(omega, vec![0.0, 1.0, 2.0]);
                assert_eq!(values, vec![0.0, 0.5, 0.25]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn parse_error_has_line() {
        let text = "0,1\n1,2\n2,x\n";
        match read_spectrum(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        match read_spectrum("0,1\n0,2\n".as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn waveform_grid() {
        let wf = read_waveform("t,re,im\n0,1,0\n0.5,0,1\n1,-1,0\n".as_bytes()).unwrap();
        assert_eq!(wf.value(0.25), Complex64::new(0.5, 0.5));
        assert!(read_waveform("0,1,0\n0.5,0,1\n1.2,-1,0\n".as_bytes()).is_err());
    }

    #[test]
    fn mode_list_columns() {
        let g = read_mode_list("1.0,0.1,0,0.2,0\n2.0,0.1,0,-0.2,0\n".as_bytes(), Some(0.01)).unwrap();
        assert_eq!(g.size(), 2);
        assert!(read_mode_list("1.0,0.1\n".as_bytes(), None).is_err());
    }

    #[test]
    fn table_round_trip() {
        let mut t = CsvTable::new(["t", "P_e"]);
        t.push(vec![0.0, 1.0]);
        t.push(vec![0.5, 0.1 + 0.2]);
        assert_eq!(t.to_csv_string(), "t,P_e\n0,1\n0.5,0.3\n");
    }
}
