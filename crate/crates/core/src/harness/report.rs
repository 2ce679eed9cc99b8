use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One table row, keyed by method, pretraining tag and fine-tuning regime.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: String,
    pub pretrain: String,
    pub finetune: String,
    /// One value per report column, in column order.
    pub scores: Vec<f64>,
}

impl ReportRow {
    pub fn new(method: &str, pretrain: &str, finetune: &str, scores: Vec<f64>) -> Self {
        ReportRow {
            method: method.into(),
            pretrain: pretrain.into(),
            finetune: finetune.into(),
            scores,
        }
    }
}

/// Mean SI-SNRi table with one column per test set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub columns: Vec<String>,
    pub rows: Vec<ReportRow>,
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

impl Report {
    pub fn new(columns: Vec<String>) -> Self {
        Report { columns, rows: Vec::new() }
    }

    pub fn push(&mut self, row: ReportRow) -> Result<()> {
        if row.scores.len() != self.columns.len() {
            return Err(Error::InvalidConfig(format!(
                "row has {} scores for {} columns",
                row.scores.len(),
                self.columns.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn find(&self, method: &str, pretrain: &str, finetune: &str) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.pretrain == pretrain && r.finetune == finetune)
    }

    /// The report with every score rounded to two decimals.
    pub fn rounded(&self) -> Report {
        let mut r = self.clone();
        for row in &mut r.rows {
            row.scores.iter_mut().for_each(|v| *v = round2(*v));
        }
        r
    }

    /// Fixed-width text table with numbered rows.
    pub fn to_table(&self) -> String {
        let header: Vec<String> = ["", "method", "p.t.", "f.t."]
            .iter()
            .map(|s| s.to_string())
            .chain(self.columns.iter().cloned())
            .collect();
        let mut cells = vec![header];
        for (i, r) in self.rows.iter().enumerate() {
            let mut line = vec![format!("({})", i + 1), r.method.clone(), r.pretrain.clone(), r.finetune.clone()];
            line.extend(r.scores.iter().map(|v| format!("{v:.2}")));
            cells.push(line);
        }
        let widths: Vec<usize> = (0..cells[0].len())
            .map(|c| cells.iter().map(|l| l[c].len()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for (k, line) in cells.iter().enumerate() {
            let parts: Vec<String> = line
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(c, (s, w))| if c < 4 { format!("{s:<w$}") } else { format!("{s:>w$}") })
                .collect();
            let _ = writeln!(out, "{}", parts.join("  ").trim_end());
            if k == 0 {
                let _ = writeln!(out, "{}", "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
            }
        }
        out
    }

    /// CSV with two-decimal scores.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["method".to_string(), "pretrain".into(), "finetune".into()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header)?;
        for r in &self.rows {
            let mut rec = vec![r.method.clone(), r.pretrain.clone(), r.finetune.clone()];
            rec.extend(r.scores.iter().map(|v| format!("{v:.2}")));
            w.write_record(&rec)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn from_csv(text: &str) -> Result<Report> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let header = r.headers()?.clone();
        if header.len() < 3 {
            return Err(Error::InvalidConfig("report csv needs method, pretrain and finetune columns".into()));
        }
        let mut report = Report::new(header.iter().skip(3).map(str::to_string).collect());
        for rec in r.records() {
            let rec = rec?;
            let scores = rec
                .iter()
                .skip(3)
                .map(|s| s.parse::<f64>().map_err(|e| Error::InvalidConfig(format!("report csv: {e}"))))
                .collect::<Result<_>>()?;
            report.push(ReportRow::new(&rec[0], &rec[1], &rec[2], scores))?;
        }
        Ok(report)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self.rounded()).expect("report serializes")
    }
}

/// Paths written by [`emit_report`].
#[derive(Clone, Debug)]
pub struct EmittedReport {
    pub table: PathBuf,
    pub csv: PathBuf,
    pub json: PathBuf,
}

/// Writes `<stem>.txt`, `<stem>.csv` and `<stem>.json` into `dir`.
pub fn emit_report(report: &Report, dir: &Path, stem: &str) -> Result<EmittedReport> {
    if report.rows.is_empty() {
        return Err(Error::InvalidConfig("report has no rows".into()));
    }
    std::fs::create_dir_all(dir)?;
    let out = EmittedReport {
        table: dir.join(format!("{stem}.txt")),
        csv: dir.join(format!("{stem}.csv")),
        json: dir.join(format!("{stem}.json")),
    };
    std::fs::write(&out.table, report.to_table())?;
    std::fs::write(&out.csv, report.to_csv()?)?;
    std::fs::write(&out.json, serde_json::to_string_pretty(&report.to_json())?)?;
    Ok(out)
}

/// Published SI-SNRi (dB) for the full-scale setting, for side-by-side
/// comparison. Columns: LibriSpeech and VCTK target speakers, clean and with
/// added noise.
pub fn reference_scores() -> Report {
    const ROWS: [(&str, &str, &str, [f64; 4]); 12] = [
        ("Multitask", "best", "-", [8.97, 5.32, 7.00, 4.35]),
        ("Multitask", "best", "m", [8.80, 4.90, 6.88, 3.98]),
        ("Multitask", "best", "a_s", [9.06, 5.51, 7.54, 4.57]),
        ("Multitask", "best", "a_c", [8.99, 5.12, 7.47, 4.56]),
        ("Multitask", "half", "-", [8.35, 5.08, 6.37, 4.28]),
        ("Multitask", "half", "m", [8.53, 5.16, 6.56, 4.39]),
        ("MAML", "best", "m", [9.84, 7.76, 7.56, 5.99]),
        ("MAML", "half", "m", [9.55, 7.94, 7.59, 6.38]),
        ("MAML", "-", "m", [9.38, 8.62, 7.54, 7.18]),
        ("ANIL_s", "best", "a_s", [9.67, 7.92, 7.64, 6.17]),
        ("ANIL_s", "-", "a_s", [9.48, 7.57, 7.53, 6.16]),
        ("ANIL_c", "best", "a_c", [8.89, 6.52, 7.03, 5.33]),
    ];
    let mut r = Report::new(["libri", "vctk", "libri_n", "vctk_n"].map(String::from).to_vec());
    for (m, p, f, s) in ROWS {
        r.push(ReportRow::new(m, p, f, s.to_vec())).expect("four columns");
    }
    r
}
