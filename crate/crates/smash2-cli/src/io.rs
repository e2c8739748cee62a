//! File formats: symbol-sequence files (one run of digits per line), CSV
//! series (one comma-separated real series per row, ragged rows allowed),
//! label files (one label per line), matrix CSV, and ASCII PGM heatmaps.

use std::fs;
use std::path::Path;

use smash2::metric::DistMatrix;
use smash2::pfsa::SymbolSeq;

use crate::AppError;

/// The digit encoding caps the CLI alphabet at ten symbols; the library
/// itself has no such cap.
pub const MAX_CLI_ALPHABET: usize = 10;

pub fn read_sequences(path: &Path) -> Result<Vec<SymbolSeq>, AppError> {
    let text = fs::read_to_string(path)
        .map_err(|e| AppError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let mut seqs: Vec<SymbolSeq> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        let seq = SymbolSeq::from_digits(line)
            .map_err(|e| AppError::Usage(format!("{}:{}: {e}", path.display(), lineno + 1)))?;
        seqs.push(seq);
    }
    // A trailing newline produces no phantom empty sequence with lines();
    // empty lines elsewhere are legitimate zero-length sequences.
    Ok(seqs)
}

pub fn format_sequences(seqs: &[SymbolSeq]) -> Result<String, AppError> {
    let mut out = String::new();
    for seq in seqs {
        for &sym in seq.iter() {
            if sym >= MAX_CLI_ALPHABET {
                return Err(AppError::Data(format!(
                    "symbol {sym} cannot be written as a digit; the file format caps the alphabet at {MAX_CLI_ALPHABET}"
                )));
            }
            out.push(char::from(b'0' + sym as u8));
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn read_csv(path: &Path) -> Result<Vec<Vec<f64>>, AppError> {
    let text = fs::read_to_string(path)
        .map_err(|e| AppError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for (col, tok) in line.split(',').enumerate() {
            let v: f64 = tok.trim().parse().map_err(|_| {
                AppError::Usage(format!(
                    "{}:{}: column {} is not a number: {tok:?}",
                    path.display(),
                    lineno + 1,
                    col + 1
                ))
            })?;
            row.push(v);
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_labels(path: &Path, expected: usize) -> Result<Vec<String>, AppError> {
    let text = fs::read_to_string(path)
        .map_err(|e| AppError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let mut labels: Vec<String> = text.lines().map(|l| l.trim().to_string()).collect();
    while labels.last().is_some_and(|l| l.is_empty()) {
        labels.pop();
    }
    if labels.len() != expected {
        return Err(AppError::Usage(format!(
            "{}: {} labels for {expected} series",
            path.display(),
            labels.len()
        )));
    }
    Ok(labels)
}

/// Nine decimal places keep a read-back matrix within 1e-9 of the original.
pub fn format_matrix_csv(m: &DistMatrix) -> String {
    let mut out = String::new();
    for i in 0..m.n() {
        let row: Vec<String> = m.row(i).iter().map(|v| format!("{v:.9}")).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// ASCII PGM, linear gray map from the matrix minimum (0) to maximum (255).
pub fn format_pgm(m: &DistMatrix) -> String {
    let n = m.n();
    let mut lo = f64::MAX;
    let mut hi = f64::MIN;
    for i in 0..n {
        for j in 0..n {
            lo = lo.min(m.get(i, j));
            hi = hi.max(m.get(i, j));
        }
    }
    let span = hi - lo;
    let mut out = format!("P2\n{n} {n}\n255\n");
    for i in 0..n {
        let row: Vec<String> = (0..n)
            .map(|j| {
                let v = if span > 0.0 {
                    ((m.get(i, j) - lo) / span * 255.0).round() as u32
                } else {
                    0
                };
                v.to_string()
            })
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn write_output(path: Option<&Path>, content: &str) -> Result<(), AppError> {
    match path {
        Some(p) => fs::write(p, content)
            .map_err(|e| AppError::Usage(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}
