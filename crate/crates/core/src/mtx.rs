//! MatrixMarket exchange-format support for Hermitian operators.
//!
//! Reads both `coordinate` (sparse) and `array` (dense, column-major)
//! formats with `real` or `complex` fields. `symmetric` and `hermitian`
//! files store only the lower triangle and are mirrored on read; `general`
//! files must contain Hermitian data, which construction-time validation
//! enforces. The writer emits `coordinate` format with the lower triangle
//! only, choosing the `real` field when every entry is real; numbers are
//! printed with round-trip-exact formatting so export→import reproduces
//! the operator bit for bit.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array2;
use num_complex::Complex64;

use crate::engines::DENSE_LIMIT;
use crate::error::{Error, Result};
use crate::operator::HermitianOperator;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Layout {
    Coordinate,
    Array,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Field {
    Real,
    Complex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Symmetry {
    General,
    Symmetric,
    Hermitian,
}

fn parse_error(line: usize, detail: impl Into<String>) -> Error {
    Error::MatrixMarket {
        line,
        detail: detail.into(),
    }
}

struct Lines<R> {
    reader: R,
    buf: String,
    line_no: usize,
}

impl<R: BufRead> Lines<R> {
    fn new(reader: R) -> Self {
        Lines {
            reader,
            buf: String::new(),
            line_no: 0,
        }
    }

    /// Next line that carries data: comments (`%...`) and blank lines are
    /// skipped, except that the very first line (the banner) is returned
    /// as-is so the caller can inspect it.
    fn next_data(&mut self) -> Result<Option<(usize, &str)>> {
        loop {
            self.buf.clear();
            let read = self.reader.read_line(&mut self.buf)?;
            if read == 0 {
                return Ok(None);
            }
            self.line_no += 1;
            let trimmed = self.buf.trim();
            if self.line_no == 1 || (!trimmed.is_empty() && !trimmed.starts_with('%')) {
                // borrow dance: recompute the trimmed slice from self.buf
                let start = self.buf.len() - self.buf.trim_start().len();
                let end = start + self.buf.trim().len();
                return Ok(Some((self.line_no, &self.buf[start..end])));
            }
        }
    }
}

fn parse_banner(line_no: usize, line: &str) -> Result<(Layout, Field, Symmetry)> {
    let tokens: Vec<String> = line.split_whitespace().map(|t| t.to_lowercase()).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(parse_error(
            line_no,
            "expected banner `%%MatrixMarket matrix <format> <field> <symmetry>`",
        ));
    }
    let layout = match tokens[2].as_str() {
        "coordinate" => Layout::Coordinate,
        "array" => Layout::Array,
        other => {
            return Err(parse_error(
                line_no,
                format!("unsupported format `{other}`"),
            ))
        }
    };
    let field = match tokens[3].as_str() {
        "real" | "integer" => Field::Real,
        "complex" => Field::Complex,
        other => return Err(parse_error(line_no, format!("unsupported field `{other}`"))),
    };
    let symmetry = match tokens[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "hermitian" => Symmetry::Hermitian,
        other => {
            return Err(parse_error(
                line_no,
                format!("unsupported symmetry `{other}`"),
            ))
        }
    };
    Ok((layout, field, symmetry))
}

fn parse_usize(line_no: usize, token: &str, what: &str) -> Result<usize> {
    token.parse::<usize>().map_err(|_| {
        parse_error(
            line_no,
            format!("{what}: `{token}` is not a nonnegative integer"),
        )
    })
}

fn parse_f64(line_no: usize, token: &str, what: &str) -> Result<f64> {
    token
        .parse::<f64>()
        .map_err(|_| parse_error(line_no, format!("{what}: `{token}` is not a number")))
}

fn parse_value(line_no: usize, tokens: &[&str], field: Field) -> Result<Complex64> {
    match field {
        Field::Real => {
            if tokens.len() != 1 {
                return Err(parse_error(line_no, "expected one real value"));
            }
            Ok(Complex64::new(parse_f64(line_no, tokens[0], "value")?, 0.0))
        }
        Field::Complex => {
            if tokens.len() != 2 {
                return Err(parse_error(line_no, "expected real and imaginary parts"));
            }
            Ok(Complex64::new(
                parse_f64(line_no, tokens[0], "real part")?,
                parse_f64(line_no, tokens[1], "imaginary part")?,
            ))
        }
    }
}

/// Mirror of one stored entry under the file's declared symmetry.
fn mirrored(value: Complex64, symmetry: Symmetry) -> Complex64 {
    match symmetry {
        Symmetry::General | Symmetry::Symmetric => value,
        Symmetry::Hermitian => value.conj(),
    }
}

/// Parses a MatrixMarket document into a dense complex matrix.
pub fn read_matrix<R: Read>(reader: R) -> Result<Array2<Complex64>> {
    let mut lines = Lines::new(BufReader::new(reader));
    let (banner_no, banner) = lines
        .next_data()?
        .ok_or_else(|| parse_error(0, "empty document"))?;
    let (layout, field, symmetry) = parse_banner(banner_no, banner)?;

    let (size_no, size_line) = lines
        .next_data()?
        .ok_or_else(|| parse_error(banner_no, "missing size line"))?;
    let size_tokens: Vec<&str> = size_line.split_whitespace().collect();

    match layout {
        Layout::Coordinate => {
            if size_tokens.len() != 3 {
                return Err(parse_error(size_no, "expected `rows cols nnz`"));
            }
            let rows = parse_usize(size_no, size_tokens[0], "rows")?;
            let cols = parse_usize(size_no, size_tokens[1], "cols")?;
            let nnz = parse_usize(size_no, size_tokens[2], "entry count")?;
            check_shape(size_no, rows, cols)?;
            let mut m = Array2::<Complex64>::zeros((rows, cols));
            for _ in 0..nnz {
                let (no, line) = lines
                    .next_data()?
                    .ok_or_else(|| parse_error(size_no, format!("expected {nnz} entries")))?;
                let tokens: Vec<&str> = line.split_whitespace().collect();
                if tokens.len() < 3 {
                    return Err(parse_error(no, "expected `row col value`"));
                }
                let i = parse_usize(no, tokens[0], "row index")?;
                let j = parse_usize(no, tokens[1], "col index")?;
                if i == 0 || j == 0 || i > rows || j > cols {
                    return Err(parse_error(
                        no,
                        format!("index ({i}, {j}) outside 1..={rows} × 1..={cols}"),
                    ));
                }
                if symmetry != Symmetry::General && j > i {
                    return Err(parse_error(
                        no,
                        format!(
                            "entry ({i}, {j}) is above the diagonal; {} files store the lower triangle",
                            symmetry_name(symmetry)
                        ),
                    ));
                }
                let value = parse_value(no, &tokens[2..], field)?;
                m[[i - 1, j - 1]] += value;
                if symmetry != Symmetry::General && i != j {
                    m[[j - 1, i - 1]] += mirrored(value, symmetry);
                }
            }
            expect_end(&mut lines)?;
            Ok(m)
        }
        Layout::Array => {
            if size_tokens.len() != 2 {
                return Err(parse_error(size_no, "expected `rows cols`"));
            }
            let rows = parse_usize(size_no, size_tokens[0], "rows")?;
            let cols = parse_usize(size_no, size_tokens[1], "cols")?;
            check_shape(size_no, rows, cols)?;
            let mut m = Array2::<Complex64>::zeros((rows, cols));
            // column-major; symmetric/hermitian files store rows j..=rows
            // of column j only
            for j in 0..cols {
                let start_row = if symmetry == Symmetry::General { 0 } else { j };
                for i in start_row..rows {
                    let (no, line) = lines.next_data()?.ok_or_else(|| {
                        parse_error(size_no, format!("missing entry for ({}, {})", i + 1, j + 1))
                    })?;
                    let tokens: Vec<&str> = line.split_whitespace().collect();
                    let value = parse_value(no, &tokens, field)?;
                    m[[i, j]] = value;
                    if symmetry != Symmetry::General && i != j {
                        m[[j, i]] = mirrored(value, symmetry);
                    }
                }
            }
            expect_end(&mut lines)?;
            Ok(m)
        }
    }
}

fn symmetry_name(symmetry: Symmetry) -> &'static str {
    match symmetry {
        Symmetry::General => "general",
        Symmetry::Symmetric => "symmetric",
        Symmetry::Hermitian => "hermitian",
    }
}

fn check_shape(line_no: usize, rows: usize, cols: usize) -> Result<()> {
    if rows != cols {
        return Err(parse_error(
            line_no,
            format!("{rows}×{cols} is not square; Hermitian operators require square input"),
        ));
    }
    if rows > DENSE_LIMIT {
        return Err(Error::DenseLimitExceeded {
            dim: rows,
            limit: DENSE_LIMIT,
        });
    }
    if rows == 0 {
        return Err(parse_error(line_no, "matrix has zero rows"));
    }
    Ok(())
}

fn expect_end<R: BufRead>(lines: &mut Lines<R>) -> Result<()> {
    if let Some((no, _)) = lines.next_data()? {
        return Err(parse_error(
            no,
            "unexpected data after the declared entries",
        ));
    }
    Ok(())
}

/// Reads a MatrixMarket file into a validated Hermitian operator.
pub fn read_operator(path: &Path) -> Result<HermitianOperator> {
    let m = read_matrix(File::open(path)?)?;
    HermitianOperator::from_dense(m)
}

/// Round-trip-exact text for one scalar: Rust's float formatting prints the
/// shortest decimal that parses back to the same bits.
fn format_value(z: Complex64, field: Field) -> String {
    match field {
        Field::Real => format!("{}", z.re),
        Field::Complex => format!("{} {}", z.re, z.im),
    }
}

/// Writes the operator in `coordinate` format, lower triangle only, with
/// `hermitian` symmetry (using the `real` field when no entry has an
/// imaginary part). Exact zeros in the lower triangle are omitted.
pub fn write_matrix<W: Write>(writer: W, m: &Array2<Complex64>) -> Result<()> {
    let mut w = BufWriter::new(writer);
    let n = m.nrows();
    let all_real = m.iter().all(|z| z.im == 0.0);
    let field = if all_real {
        Field::Real
    } else {
        Field::Complex
    };
    let entries: Vec<(usize, usize, Complex64)> = (0..n)
        .flat_map(|j| (j..n).map(move |i| (i, j)))
        .map(|(i, j)| (i, j, m[[i, j]]))
        .filter(|&(_, _, z)| z != Complex64::new(0.0, 0.0))
        .collect();
    writeln!(
        w,
        "%%MatrixMarket matrix coordinate {} hermitian",
        if all_real { "real" } else { "complex" }
    )?;
    writeln!(w, "{n} {n} {}", entries.len())?;
    for (i, j, z) in entries {
        writeln!(w, "{} {} {}", i + 1, j + 1, format_value(z, field))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a Hermitian operator to a MatrixMarket file; requires a dense or
/// densifiable operator.
pub fn write_operator(path: &Path, h: &HermitianOperator) -> Result<()> {
    let m = h.densify()?;
    write_matrix(File::create(path)?, &m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engines::exact_diagonalize;
    use crate::models::random_hermitian;

    fn read_str(text: &str) -> Result<Array2<Complex64>> {
        read_matrix(text.as_bytes())
    }

    #[test]
    fn array_format_diagonal_matches_oracle_spectrum() {
        let text = "%%MatrixMarket matrix array real general\n\
                    % a plain diagonal\n\
                    3 3\n0\n0\n0\n0\n1\n0\n0\n0\n2\n";
        let m = read_str(text).unwrap();
        let h = HermitianOperator::from_dense(m).unwrap();
        let values: Vec<f64> = exact_diagonalize(&h)
            .unwrap()
            .iter()
            .map(|s| s.eigenvalue)
            .collect();
        assert_eq!(values, vec![0.0, 1.0, 2.0]);
    }

    #[test]
    fn array_symmetric_stores_lower_triangle_only() {
        let text = "%%MatrixMarket matrix array real symmetric\n2 2\n1\n-3\n2\n";
        let m = read_str(text).unwrap();
        assert_eq!(m[[0, 0]], Complex64::new(1.0, 0.0));
        assert_eq!(m[[1, 0]], Complex64::new(-3.0, 0.0));
        assert_eq!(m[[0, 1]], Complex64::new(-3.0, 0.0));
        assert_eq!(m[[1, 1]], Complex64::new(2.0, 0.0));
    }

    #[test]
    fn coordinate_hermitian_mirrors_with_conjugation() {
        let text = "%%MatrixMarket matrix coordinate complex hermitian\n\
                    2 2 3\n1 1 1 0\n2 1 0 1\n2 2 2 0\n";
        let m = read_str(text).unwrap();
        assert_eq!(m[[1, 0]], Complex64::new(0.0, 1.0));
        assert_eq!(m[[0, 1]], Complex64::new(0.0, -1.0));
        assert!(HermitianOperator::from_dense(m).is_ok());
    }

    #[test]
    fn general_file_with_non_hermitian_data_is_rejected() {
        let text = "%%MatrixMarket matrix coordinate real general\n\
                    2 2 2\n1 2 1\n2 1 5\n";
        let m = read_str(text).unwrap();
        assert!(matches!(
            HermitianOperator::from_dense(m),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn export_import_round_trips_bit_exactly() {
        let h = random_hermitian(12, 3).unwrap();
        let mut bytes = Vec::new();
        write_matrix(&mut bytes, h.dense_entries().unwrap()).unwrap();
        let back = read_matrix(bytes.as_slice()).unwrap();
        assert_eq!(&back, h.dense_entries().unwrap());
    }

    #[test]
    fn real_export_round_trips_through_real_field() {
        let text = "%%MatrixMarket matrix array real symmetric\n2 2\n0.1\n-0.7\n1.3\n";
        let m = read_str(text).unwrap();
        let mut bytes = Vec::new();
        write_matrix(&mut bytes, &m).unwrap();
        let rendered = String::from_utf8(bytes.clone()).unwrap();
        assert!(rendered.contains("coordinate real hermitian"), "{rendered}");
        assert_eq!(read_matrix(bytes.as_slice()).unwrap(), m);
    }

    #[test]
    fn file_round_trip_through_operator_api() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.mtx");
        let h = random_hermitian(8, 11).unwrap();
        write_operator(&path, &h).unwrap();
        let back = read_operator(&path).unwrap();
        assert_eq!(back.dense_entries().unwrap(), h.dense_entries().unwrap());
    }

    #[test]
    fn upper_triangle_entry_in_hermitian_file_is_an_error() {
        let text = "%%MatrixMarket matrix coordinate real hermitian\n\
                    2 2 1\n1 2 1\n";
        match read_str(text) {
            Err(Error::MatrixMarket { line, detail }) => {
                assert_eq!(line, 3);
                assert!(detail.contains("lower triangle"), "{detail}");
            }
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn malformed_documents_name_the_line() {
        for (text, want_line) in [
            ("%%MatrixMarket tensor coordinate real general\n1 1 0\n", 1),
            ("%%MatrixMarket matrix coordinate real general\n2 2\n", 2),
            (
                "%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 0.5\n",
                3,
            ),
            (
                "%%MatrixMarket matrix coordinate real general\n2 2 1\n1 1 x\n",
                3,
            ),
            (
                "%%MatrixMarket matrix coordinate real general\n2 2 1\n1 1 1\n2 2 1\n",
                4,
            ),
        ] {
            match read_str(text) {
                Err(Error::MatrixMarket { line, .. }) => assert_eq!(line, want_line, "{text}"),
                other => panic!("unexpected for {text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn truncated_coordinate_data_is_reported() {
        let text = "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1\n";
        assert!(matches!(read_str(text), Err(Error::MatrixMarket { .. })));
    }

    #[test]
    fn rectangular_input_is_rejected() {
        let text = "%%MatrixMarket matrix coordinate real general\n2 3 0\n";
        match read_str(text) {
            Err(Error::MatrixMarket { detail, .. }) => {
                assert!(detail.contains("square"), "{detail}")
            }
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn oversized_dimensions_refused_before_reading_entries() {
        let text = "%%MatrixMarket matrix coordinate real general\n5000 5000 0\n";
        assert!(matches!(
            read_str(text),
            Err(Error::DenseLimitExceeded { dim: 5000, .. })
        ));
    }

    #[test]
    fn duplicate_coordinate_entries_accumulate() {
        let text = "%%MatrixMarket matrix coordinate real general\n1 1 2\n1 1 1\n1 1 2.5\n";
        let m = read_str(text).unwrap();
        assert_eq!(m[[0, 0]], Complex64::new(3.5, 0.0));
    }
}
