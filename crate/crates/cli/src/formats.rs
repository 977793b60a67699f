//! Input file parsing and matrix emission.
//!
//! Three file kinds are accepted:
//!
//! * **Matrix file** — whitespace-delimited: a `rows cols` line followed by
//!   the entries in row-major order. Lines starting with `#` are comments.
//! * **System file** — `n m` followed by `m` symmetric matrices, each given
//!   as its row-major upper triangle (`n(n+1)/2` numbers).
//! * **Problem file** — a structured description of an affine feasible set,
//!   starting with the header `rankmat v1`:
//!
//!   ```text
//!   rankmat v1
//!   kind affine
//!   shape symmetric 3          # or: shape general 2 3
//!   psd true
//!   tracebox 1 1.7320508075688772
//!   constraint 1.0             # rhs; followed by rows*cols entries
//!   1 0 0
//!   0 0 0
//!   0 0 0
//!   option epsilon0 1.0        # optional driver overrides
//!   ```
//!
//! Unknown keys are rejected. Numbers are emitted with Rust's shortest
//! round-trip formatting, so emitted matrices re-parse bit-identically.

use ranksdp::linalg::{DenseMatrix, SymMatrix};
use ranksdp::quadcert::QuadSystem;
use ranksdp::rankmin::{AffineSetSpec, MatrixShape};
use std::fmt;

#[derive(Debug)]
pub struct ParseError(pub String);

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ParseError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError(msg.into()))
}

fn tokens(text: &str) -> impl Iterator<Item = &str> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(|l| l.split_whitespace())
}

fn parse_num(tok: Option<&str>, what: &str) -> Result<f64, ParseError> {
    match tok {
        Some(t) => t
            .parse::<f64>()
            .map_err(|_| ParseError(format!("{what}: expected a number, got `{t}`"))),
        None => err(format!("{what}: unexpected end of input")),
    }
}

fn parse_usize(tok: Option<&str>, what: &str) -> Result<usize, ParseError> {
    match tok {
        Some(t) => t
            .parse::<usize>()
            .map_err(|_| ParseError(format!("{what}: expected an integer, got `{t}`"))),
        None => err(format!("{what}: unexpected end of input")),
    }
}

/// Parses a plain matrix file: `rows cols` then entries.
pub fn parse_matrix(text: &str) -> Result<DenseMatrix, ParseError> {
    let mut it = tokens(text);
    let rows = parse_usize(it.next(), "matrix rows")?;
    let cols = parse_usize(it.next(), "matrix cols")?;
    if rows == 0 || cols == 0 {
        return err("matrix dimensions must be positive");
    }
    let mut data = Vec::with_capacity(rows * cols);
    for k in 0..rows * cols {
        data.push(parse_num(it.next(), &format!("matrix entry {k}"))?);
    }
    if it.next().is_some() {
        return err("trailing tokens after the matrix entries");
    }
    DenseMatrix::new(rows, cols, data).map_err(|e| ParseError(e.to_string()))
}

/// Emits a matrix in the same format `parse_matrix` reads.
pub fn emit_matrix(x: &DenseMatrix) -> String {
    let mut out = format!("{} {}\n", x.rows(), x.cols());
    for i in 0..x.rows() {
        let row: Vec<String> = (0..x.cols()).map(|j| format!("{}", x.get(i, j))).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

/// Parses a quadratic system file: `n m` then `m` upper triangles.
pub fn parse_system(text: &str) -> Result<QuadSystem, ParseError> {
    let mut it = tokens(text);
    let n = parse_usize(it.next(), "system dimension n")?;
    let m = parse_usize(it.next(), "system count m")?;
    if n == 0 || m == 0 {
        return err("system requires n >= 1 and m >= 1");
    }
    let tri = n * (n + 1) / 2;
    let mut mats = Vec::with_capacity(m);
    for k in 0..m {
        let mut upper = Vec::with_capacity(tri);
        for t in 0..tri {
            upper.push(parse_num(it.next(), &format!("matrix {k} entry {t}"))?);
        }
        mats.push(SymMatrix::new(n, upper).map_err(|e| ParseError(e.to_string()))?);
    }
    if it.next().is_some() {
        return err("trailing tokens after the system matrices");
    }
    QuadSystem::new(n, mats).map_err(|e| ParseError(e.to_string()))
}

/// Driver overrides carried in a problem file's `option` entries.
#[derive(Debug, Default, Clone)]
pub struct FileOptions {
    pub epsilon0: Option<f64>,
    pub beta: Option<f64>,
    pub p: Option<f64>,
    pub max_stages: Option<usize>,
}

/// A parsed structured problem file.
#[derive(Debug)]
pub struct ProblemFile {
    pub spec: AffineSetSpec,
    pub options: FileOptions,
}

/// Parses a structured `rankmat v1` problem file describing an affine set.
pub fn parse_problem(text: &str) -> Result<ProblemFile, ParseError> {
    let mut it = tokens(text).peekable();
    match (it.next(), it.next()) {
        (Some("rankmat"), Some("v1")) => {}
        _ => return err("expected header `rankmat v1`"),
    }
    match (it.next(), it.next()) {
        (Some("kind"), Some("affine")) => {}
        (Some("kind"), Some(k)) => return err(format!("unsupported kind `{k}` (expected affine)")),
        _ => return err("expected `kind affine`"),
    }

    let mut shape: Option<MatrixShape> = None;
    let mut psd = false;
    let mut trace_box: Option<(f64, f64)> = None;
    let mut constraints: Vec<(DenseMatrix, f64)> = Vec::new();
    let mut options = FileOptions::default();

    while let Some(key) = it.next() {
        match key {
            "shape" => {
                let kind = it.next().unwrap_or("");
                shape = Some(match kind {
                    "general" => {
                        let r = parse_usize(it.next(), "shape rows")?;
                        let c = parse_usize(it.next(), "shape cols")?;
                        MatrixShape::General { rows: r, cols: c }
                    }
                    "symmetric" => {
                        let d = parse_usize(it.next(), "shape dim")?;
                        MatrixShape::Symmetric { dim: d }
                    }
                    other => return err(format!("unknown shape `{other}`")),
                });
            }
            "psd" => {
                psd = match it.next() {
                    Some("true") => true,
                    Some("false") => false,
                    other => return err(format!("psd expects true/false, got {other:?}")),
                };
            }
            "tracebox" => {
                let lo = parse_num(it.next(), "tracebox lower")?;
                let hi = parse_num(it.next(), "tracebox upper")?;
                trace_box = Some((lo, hi));
            }
            "constraint" => {
                let rhs = parse_num(it.next(), "constraint rhs")?;
                let (m, n) = shape
                    .ok_or_else(|| ParseError("constraint before shape".into()))?
                    .dims();
                let mut data = Vec::with_capacity(m * n);
                for k in 0..m * n {
                    data.push(parse_num(it.next(), &format!("constraint entry {k}"))?);
                }
                constraints.push((
                    DenseMatrix::new(m, n, data).map_err(|e| ParseError(e.to_string()))?,
                    rhs,
                ));
            }
            "option" => {
                let name = it.next().unwrap_or("");
                match name {
                    "epsilon0" => options.epsilon0 = Some(parse_num(it.next(), "epsilon0")?),
                    "beta" => options.beta = Some(parse_num(it.next(), "beta")?),
                    "p" => options.p = Some(parse_num(it.next(), "p")?),
                    "max_stages" => {
                        options.max_stages = Some(parse_usize(it.next(), "max_stages")?)
                    }
                    other => return err(format!("unknown option `{other}`")),
                }
            }
            other => return err(format!("unknown key `{other}`")),
        }
    }

    let shape = shape.ok_or_else(|| ParseError("missing `shape`".into()))?;
    let spec = AffineSetSpec {
        shape,
        constraints,
        psd_required: psd,
        trace_box,
    };
    spec.validate().map_err(|e| ParseError(e.to_string()))?;
    Ok(ProblemFile { spec, options })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_round_trip_is_bit_identical() {
        let x = DenseMatrix::new(2, 3, vec![0.1 + 0.2, -1.5, 3e-17, 2.0, 1.0 / 3.0, -0.0]).unwrap();
        let text = emit_matrix(&x);
        let back = parse_matrix(&text).unwrap();
        for i in 0..2 {
            for j in 0..3 {
                assert!(x.get(i, j).to_bits() == back.get(i, j).to_bits());
            }
        }
    }

    #[test]
    fn rejects_unknown_keys() {
        let text = "rankmat v1\nkind affine\nshape symmetric 2\nbogus 1\n";
        assert!(parse_problem(text).is_err());
    }

    #[test]
    fn parses_affine_problem() {
        let text = "rankmat v1\nkind affine\nshape symmetric 2\npsd true\ntracebox 1 1\nconstraint 0.0\n1 0\n0 -1\noption beta 0.5\n";
        let pf = parse_problem(text).unwrap();
        assert!(pf.spec.psd_required);
        assert_eq!(pf.spec.constraints.len(), 1);
        assert_eq!(pf.options.beta, Some(0.5));
    }

    #[test]
    fn parses_system_upper_triangle() {
        let text = "# comment\n2 1\n1 0 -1\n";
        let q = parse_system(text).unwrap();
        assert_eq!(q.n, 2);
        assert_eq!(q.matrices[0].get(0, 0), 1.0);
        assert_eq!(q.matrices[0].get(1, 1), -1.0);
    }
}
