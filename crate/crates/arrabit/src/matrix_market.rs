//! Matrix Market coordinate files for symmetric sparse matrices.
//!
//! The reader accepts `matrix coordinate real` files with `symmetric` or
//! `general` symmetry. General files must still describe a symmetric matrix:
//! every stored `(i, j)` entry needs a matching `(j, i)` value, which the
//! matrix constructor enforces. Symmetric files store one triangle and are
//! mirrored on load. The writer emits the lower triangle in `symmetric`
//! format with round-trip-exact float formatting, so load → write → load is
//! the identity on `(n, nnz, values)`.

use std::error::Error;
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use arrabit_core::{BuildError, SparseSymMatrix};

/// Reasons a Matrix Market file fails to load.
#[derive(Debug)]
pub enum MatrixMarketError {
    Io(io::Error),
    /// A malformed header, size line, or entry. `line` is 1-based.
    Parse { line: usize, message: String },
    /// The triplets were rejected by the matrix constructor (asymmetric
    /// values, out-of-range indices, non-finite entries).
    Build(BuildError),
}

impl fmt::Display for MatrixMarketError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatrixMarketError::Io(e) => write!(f, "io error: {e}"),
            MatrixMarketError::Parse { line, message } => {
                write!(f, "line {line}: {message}")
            }
            MatrixMarketError::Build(e) => write!(f, "invalid matrix data: {e}"),
        }
    }
}

impl Error for MatrixMarketError {
    fn source(&self) -> Option<&(dyn Error + 'static)> {
        match self {
            MatrixMarketError::Io(e) => Some(e),
            MatrixMarketError::Build(e) => Some(e),
            MatrixMarketError::Parse { .. } => None,
        }
    }
}

impl From<io::Error> for MatrixMarketError {
    fn from(e: io::Error) -> Self {
        MatrixMarketError::Io(e)
    }
}

impl From<BuildError> for MatrixMarketError {
    fn from(e: BuildError) -> Self {
        MatrixMarketError::Build(e)
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> MatrixMarketError {
    MatrixMarketError::Parse {
        line,
        message: message.into(),
    }
}

/// Loads a symmetric matrix from a Matrix Market coordinate file.
pub fn load_matrix_market(path: impl AsRef<Path>) -> Result<SparseSymMatrix, MatrixMarketError> {
    let file = File::open(path)?;
    read_matrix_market(BufReader::new(file))
}

/// Loads a symmetric matrix from any reader holding Matrix Market text.
pub fn read_matrix_market<R: Read>(reader: R) -> Result<SparseSymMatrix, MatrixMarketError> {
    let mut lines = BufReader::new(reader).lines();
    let mut lineno = 0usize;

    // Header: "%%MatrixMarket matrix coordinate real <symmetry>".
    let header = loop {
        lineno += 1;
        match lines.next() {
            Some(line) => {
                let line = line?;
                if !line.trim().is_empty() {
                    break line;
                }
            }
            None => return Err(parse_err(lineno, "empty file, expected %%MatrixMarket header")),
        }
    };
    let header_line = lineno;
    let mut fields = header.split_whitespace();
    let banner = fields.next().unwrap_or("");
    if !banner.eq_ignore_ascii_case("%%MatrixMarket") {
        return Err(parse_err(
            header_line,
            format!("expected %%MatrixMarket header, found {banner:?}"),
        ));
    }
    let object = fields.next().unwrap_or("").to_ascii_lowercase();
    let format = fields.next().unwrap_or("").to_ascii_lowercase();
    let field = fields.next().unwrap_or("").to_ascii_lowercase();
    let symmetry = fields.next().unwrap_or("").to_ascii_lowercase();
    if object != "matrix" {
        return Err(parse_err(header_line, format!("unsupported object {object:?}, expected matrix")));
    }
    if format != "coordinate" {
        return Err(parse_err(
            header_line,
            format!("unsupported format {format:?}, expected coordinate"),
        ));
    }
    if field != "real" {
        return Err(parse_err(header_line, format!("unsupported field {field:?}, expected real")));
    }
    if symmetry != "symmetric" && symmetry != "general" {
        return Err(parse_err(
            header_line,
            format!("unsupported symmetry {symmetry:?}, expected symmetric or general"),
        ));
    }

    // Size line: "rows cols nnz", after any '%' comment lines.
    let size = loop {
        lineno += 1;
        match lines.next() {
            Some(line) => {
                let line = line?;
                let trimmed = line.trim();
                if trimmed.is_empty() || trimmed.starts_with('%') {
                    continue;
                }
                break line;
            }
            None => return Err(parse_err(lineno, "missing size line")),
        }
    };
    let size_line = lineno;
    let dims: Vec<&str> = size.split_whitespace().collect();
    if dims.len() != 3 {
        return Err(parse_err(
            size_line,
            format!("size line needs 3 fields (rows cols nnz), found {}", dims.len()),
        ));
    }
    let rows: usize = dims[0]
        .parse()
        .map_err(|_| parse_err(size_line, format!("invalid row count {:?}", dims[0])))?;
    let cols: usize = dims[1]
        .parse()
        .map_err(|_| parse_err(size_line, format!("invalid column count {:?}", dims[1])))?;
    let nnz: usize = dims[2]
        .parse()
        .map_err(|_| parse_err(size_line, format!("invalid entry count {:?}", dims[2])))?;
    if rows != cols {
        return Err(parse_err(
            size_line,
            format!("matrix is {rows}x{cols}, expected square"),
        ));
    }

    // Entry lines: "i j value", 1-based indices.
    let mut triplets = Vec::with_capacity(nnz);
    while triplets.len() < nnz {
        lineno += 1;
        let line = match lines.next() {
            Some(line) => line?,
            None => {
                return Err(parse_err(
                    lineno,
                    format!("unexpected end of file, expected {} more entries", nnz - triplets.len()),
                ))
            }
        };
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('%') {
            continue;
        }
        let parts: Vec<&str> = trimmed.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(parse_err(
                lineno,
                format!("entry needs 3 fields (row col value), found {}", parts.len()),
            ));
        }
        let i: usize = parts[0]
            .parse()
            .map_err(|_| parse_err(lineno, format!("invalid row index {:?}", parts[0])))?;
        let j: usize = parts[1]
            .parse()
            .map_err(|_| parse_err(lineno, format!("invalid column index {:?}", parts[1])))?;
        let v: f64 = parts[2]
            .parse()
            .map_err(|_| parse_err(lineno, format!("invalid value {:?}", parts[2])))?;
        if i == 0 || j == 0 {
            return Err(parse_err(lineno, "indices are 1-based, found 0"));
        }
        if i > rows || j > rows {
            return Err(parse_err(
                lineno,
                format!("index ({i}, {j}) outside a {rows}x{rows} matrix"),
            ));
        }
        triplets.push((i - 1, j - 1, v));
    }

    // Anything after the declared entries must be comments or blanks.
    for line in lines {
        lineno += 1;
        let line = line?;
        let trimmed = line.trim();
        if !trimmed.is_empty() && !trimmed.starts_with('%') {
            return Err(parse_err(
                lineno,
                format!("found data past the declared {nnz} entries"),
            ));
        }
    }

    // The constructor mirrors one-sided entries, sums duplicates, and rejects
    // asymmetric general files, so both symmetry modes reduce to triplets.
    Ok(SparseSymMatrix::from_triplets(rows, &triplets)?)
}

/// Writes a matrix in `coordinate real symmetric` format (lower triangle).
pub fn save_matrix_market(
    path: impl AsRef<Path>,
    matrix: &SparseSymMatrix,
) -> Result<(), MatrixMarketError> {
    let file = File::create(path)?;
    let mut writer = BufWriter::new(file);
    write_matrix_market(&mut writer, matrix)?;
    writer.flush()?;
    Ok(())
}

/// Writes Matrix Market text to any writer. Stored entries are the upper
/// triangle of the matrix, emitted transposed so the file holds the customary
/// lower triangle. `{:e}` formatting round-trips every finite f64 exactly.
pub fn write_matrix_market<W: Write>(
    writer: &mut W,
    matrix: &SparseSymMatrix,
) -> Result<(), MatrixMarketError> {
    let n = matrix.n();
    // The size line counts stored (file) entries: one per triangle entry,
    // not the full symmetric storage count.
    let stored = matrix.upper_triangle().count();
    writeln!(writer, "%%MatrixMarket matrix coordinate real symmetric")?;
    writeln!(writer, "{} {} {}", n, n, stored)?;
    for (i, j, v) in matrix.upper_triangle() {
        writeln!(writer, "{} {} {:e}", j + 1, i + 1, v)?;
    }
    Ok(())
}
