use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dynamics::{bound_check, EvolutionResult};
use crate::error::{Error, Result};

/// Columns of one emitted run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SeriesBundle {
    pub labels: Vec<String>,
    pub t: Vec<f64>,
    pub lambda: Vec<f64>,
    pub dlambda: Vec<f64>,
    /// One row of couplings per sample.
    pub h: Vec<Vec<f64>>,
    pub local_cost: Vec<f64>,
    pub cum_cost: Vec<f64>,
    pub fidelity: Vec<f64>,
    pub angle: Vec<f64>,
}

impl SeriesBundle {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn from_evolution(r: &EvolutionResult) -> Self {
        let n = r.grid.len();
        let h = if r.couplings.values.len() == n {
            r.couplings.values.clone()
        } else {
            vec![Vec::new(); n]
        };
        let labels = if r.couplings.values.len() == n {
            r.couplings.labels.clone()
        } else {
            Vec::new()
        };
        SeriesBundle {
            labels,
            t: r.grid.clone(),
            lambda: r.lambda.clone(),
            dlambda: r.dlambda.clone(),
            h,
            local_cost: r.local_cost.clone(),
            cum_cost: r.cumulative_cost.clone(),
            fidelity: r.fidelity.clone(),
            angle: r.angle.clone(),
        }
    }

    fn check(&self) -> Result<()> {
        let n = self.len();
        for (name, len) in [
            ("lambda", self.lambda.len()),
            ("dlambda", self.dlambda.len()),
            ("h", self.h.len()),
            ("local_cost", self.local_cost.len()),
            ("cum_cost", self.cum_cost.len()),
            ("fidelity", self.fidelity.len()),
            ("angle", self.angle.len()),
        ] {
            if len != n {
                return Err(Error::invalid(format!("column '{name}' has {len} rows, expected {n}")));
            }
        }
        if let Some(row) = self.h.iter().find(|r| r.len() != self.labels.len()) {
            return Err(Error::DimensionMismatch {
                expected: self.labels.len(),
                found: row.len(),
            });
        }
        Ok(())
    }

    pub fn header(&self) -> Vec<String> {
        let mut cols = vec!["t".to_string(), "lambda".into(), "dlambda".into()];
        cols.extend(self.labels.iter().map(|l| format!("h_{l}")));
        cols.extend(["local_cost", "cum_cost", "fidelity", "angle"].map(String::from));
        cols
    }

    /// The `h_<label>` column.
    pub fn coupling(&self, label: &str) -> Option<Vec<f64>> {
        let i = self.labels.iter().position(|l| l == label)?;
        Some(self.h.iter().map(|r| r[i]).collect())
    }
}

/// Decimal with 17 significant digits, which round-trips every f64.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes a table with a header row, comma separators and LF line endings.
pub fn write_table<W: Write>(out: W, header: &[String], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(header)?;
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::DimensionMismatch {
                expected: header.len(),
                found: row.len(),
            });
        }
        w.write_record(row.iter().map(|&x| format_f64(x)))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv<W: Write>(bundle: &SeriesBundle, out: W) -> Result<()> {
    bundle.check()?;
    let rows = (0..bundle.len()).map(|i| {
        let mut row = vec![bundle.t[i], bundle.lambda[i], bundle.dlambda[i]];
        row.extend(&bundle.h[i]);
        row.extend([
            bundle.local_cost[i],
            bundle.cum_cost[i],
            bundle.fidelity[i],
            bundle.angle[i],
        ]);
        row
    });
    write_table(out, &bundle.header(), rows)
}

pub fn emit_csv(bundle: &SeriesBundle, path: &Path) -> Result<()> {
    let f = File::create(path)?;
    write_csv(bundle, BufWriter::new(f))
}

/// Header and numeric rows of any table written by [`write_table`].
pub fn read_table<R: Read>(input: R) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|e| Error::invalid(format!("bad number '{s}': {e}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok((header, rows))
}

pub fn parse_csv<R: Read>(input: R) -> Result<SeriesBundle> {
    let (header, rows) = read_table(input)?;
    let n = header.len();
    let tail = ["local_cost", "cum_cost", "fidelity", "angle"];
    if n < 7 || header[..3] != ["t", "lambda", "dlambda"] || header[n - 4..] != tail {
        return Err(Error::invalid(format!("unexpected CSV header {header:?}")));
    }
    let labels = header[3..n - 4]
        .iter()
        .map(|c| {
            c.strip_prefix("h_")
                .map(String::from)
                .ok_or_else(|| Error::invalid(format!("coupling column '{c}' lacks the h_ prefix")))
        })
        .collect::<Result<Vec<_>>>()?;
    let col = |j: usize| rows.iter().map(|r| r[j]).collect::<Vec<f64>>();
    Ok(SeriesBundle {
        t: col(0),
        lambda: col(1),
        dlambda: col(2),
        h: rows.iter().map(|r| r[3..n - 4].to_vec()).collect(),
        local_cost: col(n - 4),
        cum_cost: col(n - 3),
        fidelity: col(n - 2),
        angle: col(n - 1),
        labels,
    })
}

pub fn read_csv(path: &Path) -> Result<SeriesBundle> {
    parse_csv(File::open(path)?)
}

/// Result of checking 1 − F ≤ ½𝓕² + slack on every row of an emitted file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub rows: usize,
    /// Rows (0-based) where the bound fails.
    pub violations: Vec<usize>,
    /// Largest (1 − F) − ½𝓕².
    pub worst_excess: f64,
}

impl AuditReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn audit_bundle(b: &SeriesBundle) -> Result<AuditReport> {
    let ok = bound_check(&b.fidelity, &b.cum_cost)?;
    let worst_excess = b
        .fidelity
        .iter()
        .zip(&b.cum_cost)
        .map(|(f, c)| (1.0 - f) - 0.5 * c * c)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(AuditReport {
        rows: b.len(),
        violations: ok.iter().enumerate().filter(|(_, &g)| !g).map(|(i, _)| i).collect(),
        worst_excess,
    })
}

/// Audits an emitted CSV file against the fidelity bound (slack `dynamics::BOUND_SLACK`).
pub fn audit_csv(path: &Path) -> Result<AuditReport> {
    audit_bundle(&read_csv(path)?)
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = File::open(path)?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 65536];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hex::encode(hasher.finalize()))
}

/// Gnuplot commands plotting fidelity and local cost against λ for each file.
pub fn gnuplot_script(files: &[String]) -> String {
    let mut s = String::from(
        "set datafile separator ','\nset key autotitle columnhead\nset xlabel 'lambda'\nset multiplot layout 2,1\n",
    );
    let plot = |col: &str| {
        files
            .iter()
            .map(|f| format!("'{f}' using 'lambda':'{col}' with lines title '{f}'"))
            .collect::<Vec<_>>()
            .join(", \\\n     ")
    };
    s.push_str(&format!("set ylabel 'fidelity'\nplot {}\n", plot("fidelity")));
    s.push_str(&format!("set ylabel 'local cost'\nplot {}\n", plot("local_cost")));
    s.push_str("unset multiplot\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bundle(n: usize) -> SeriesBundle {
        let v = |k: f64| (0..n).map(|i| k * i as f64 + 0.1 / 3.0).collect::<Vec<f64>>();
        SeriesBundle {
            labels: vec!["X0Y1".into(), "Z0".into()],
            t: v(0.1),
            lambda: v(0.3),
            dlambda: v(0.0),
            h: (0..n)
                .map(|i| vec![1.0 / (i as f64 + 3.0), -std::f64::consts::PI])
                .collect(),
            local_cost: v(1e-3),
            cum_cost: v(2e-3),
            fidelity: vec![1.0; n],
            angle: v(0.01),
        }
    }

    #[test]
    fn empty_series_is_header_only() {
        let mut out = Vec::new();
        write_csv(&bundle(0), &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(
            text,
            "t,lambda,dlambda,h_X0Y1,h_Z0,local_cost,cum_cost,fidelity,angle\n"
        );
    }

    #[test]
    fn one_point_gives_two_lf_lines() {
        let mut out = Vec::new();
        write_csv(&bundle(1), &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(!text.contains('\r'));
        assert!(text.ends_with('\n'));
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let b = bundle(25);
        let mut out = Vec::new();
        write_csv(&b, &mut out).unwrap();
        let back = parse_csv(out.as_slice()).unwrap();
        assert_eq!(back, b);
    }

    #[test]
    fn audit_flags_violations() {
        let mut b = bundle(3);
        b.cum_cost = vec![0.0; 3];
        b.fidelity = vec![1.0, 0.9, 1.0];
        let r = audit_bundle(&b).unwrap();
        assert_eq!(r.violations, vec![1]);
    }
}
