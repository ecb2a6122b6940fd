//! CSV documents and companion gnuplot scripts.
//!
//! Every CSV starts with a `# seed=<seed>` metadata comment followed by a
//! header row; trailing `#` comments carry derived quantities such as order
//! fits. Floating-point fields are printed with 17 significant digits so the
//! exact binary value round-trips.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

/// Formats a float with 17 significant digits (`1.0000000000000000e0`
/// style); infinities print as `inf`, NaNs as `NaN`.
pub fn fmt_real(value: f64) -> String {
    format!("{value:.16e}")
}

/// An in-memory CSV file: seed comment, header, rows, trailing comments.
pub struct CsvDoc {
    seed: u64,
    header: String,
    rows: Vec<String>,
    trailing: Vec<String>,
}

impl CsvDoc {
    pub fn new(seed: u64, header: &str) -> Self {
        Self {
            seed,
            header: header.to_owned(),
            rows: Vec::new(),
            trailing: Vec::new(),
        }
    }

    pub fn row(&mut self, fields: &[String]) {
        self.rows.push(fields.join(","));
    }

    /// Appends a trailing `# <text>` comment after the data rows.
    pub fn comment(&mut self, text: String) {
        self.trailing.push(text);
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let file = File::create(path)?;
        let mut sink = BufWriter::new(file);
        writeln!(sink, "# seed={}", self.seed)?;
        writeln!(sink, "{}", self.header)?;
        for row in &self.rows {
            writeln!(sink, "{row}")?;
        }
        for comment in &self.trailing {
            writeln!(sink, "# {comment}")?;
        }
        sink.flush()
    }
}

/// The plot-script path that sits next to a CSV: same name, `.gnuplot`
/// extension.
pub fn plot_path(csv: &Path) -> PathBuf {
    csv.with_extension("gnuplot")
}

/// Writes a log-log gnuplot script plotting strong error (column 5) against
/// wall time (column 6) of a benchmark CSV, one series per scheme.
pub fn write_error_runtime_plot(csv: &Path, schemes: &[String]) -> std::io::Result<PathBuf> {
    write_series_plot(
        csv,
        schemes,
        "strong error vs wall time",
        "wall seconds",
        "strong error",
        "6:(strcol(1) eq '{scheme}' ? $5 : 1/0)",
    )
}

/// Writes a log-log gnuplot script plotting wall time (column 6) against
/// state dimension (column 3) of a dimension-scan CSV, one series per
/// scheme.
pub fn write_dimension_plot(csv: &Path, schemes: &[String]) -> std::io::Result<PathBuf> {
    write_series_plot(
        csv,
        schemes,
        "wall time vs state dimension",
        "state dimension",
        "wall seconds",
        "3:(strcol(1) eq '{scheme}' ? $6 : 1/0)",
    )
}

fn write_series_plot(
    csv: &Path,
    schemes: &[String],
    title: &str,
    x_label: &str,
    y_label: &str,
    using_template: &str,
) -> std::io::Result<PathBuf> {
    let script_path = plot_path(csv);
    let data_file = csv
        .file_name()
        .map(|name| name.to_string_lossy().into_owned())
        .unwrap_or_else(|| csv.display().to_string());

    let file = File::create(&script_path)?;
    let mut sink = BufWriter::new(file);
    writeln!(
        sink,
        "# {title}; run from the directory holding {data_file}"
    )?;
    writeln!(sink, "set datafile separator ','")?;
    writeln!(sink, "set logscale xy")?;
    writeln!(sink, "set xlabel '{x_label}'")?;
    writeln!(sink, "set ylabel '{y_label}'")?;
    writeln!(sink, "set key outside")?;
    writeln!(sink, "set title '{title}'")?;
    let series: Vec<String> = schemes
        .iter()
        .map(|scheme| {
            let using = using_template.replace("{scheme}", scheme);
            format!("'{data_file}' every ::1 using {using} with linespoints title '{scheme}'")
        })
        .collect();
    writeln!(sink, "plot \\\n  {}", series.join(", \\\n  "))?;
    writeln!(sink, "pause -1 'press return to close'")?;
    sink.flush()?;
    Ok(script_path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip_through_the_formatter() {
        for &value in &[
            1.0,
            -0.1,
            2.937e-2,
            f64::MIN_POSITIVE,
            1.959963984540054,
            6.02e23,
        ] {
            let text = fmt_real(value);
            let back: f64 = text.parse().expect("parse back");
            assert_eq!(back, value, "{text}");
        }
        assert_eq!(fmt_real(f64::INFINITY), "inf");
        assert_eq!(fmt_real(f64::NAN), "NaN");
    }

    #[test]
    fn documents_carry_seed_header_rows_and_comments() {
        let dir = tempfile::tempdir().expect("tempdir");
        let path = dir.path().join("doc.csv");
        let mut doc = CsvDoc::new(42, "a,b");
        doc.row(&["1".to_owned(), "2".to_owned()]);
        doc.comment("fit: slope=-0.5".to_owned());
        doc.write(&path).expect("write");
        let text = std::fs::read_to_string(&path).expect("read");
        assert_eq!(text, "# seed=42\na,b\n1,2\n# fit: slope=-0.5\n");
    }

    #[test]
    fn plot_scripts_sit_next_to_the_csv_and_name_every_scheme() {
        let dir = tempfile::tempdir().expect("tempdir");
        let csv = dir.path().join("bench.csv");
        std::fs::write(&csv, "# seed=0\nheader\n").expect("csv");
        let script = write_error_runtime_plot(&csv, &["tamed".to_owned(), "implicit".to_owned()])
            .expect("script");
        assert_eq!(script, dir.path().join("bench.gnuplot"));
        let text = std::fs::read_to_string(&script).expect("read");
        assert!(text.contains("'bench.csv'"), "{text}");
        assert!(text.contains("strcol(1) eq 'tamed'"), "{text}");
        assert!(text.contains("strcol(1) eq 'implicit'"), "{text}");
        assert!(text.contains("set logscale xy"), "{text}");
    }
}
