//! Kernel matrices, signatures and the shared matrix text format.
//!
//! Text input is either CSV (one row per line) or a JSON object
//! `{"dim": n, "symmetric": bool, "entries": [[...], ...]}`. Both parsers
//! reject ragged rows and non-finite values.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance (against `max(1, max|G|)`) for the symmetry claim.
pub const SYMMETRY_TOL: f64 = 1e-9;

/// Square real matrix playing the role of a covariance or permanental kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    entries: DMatrix<f64>,
    symmetric: bool,
}

fn symmetry_gap(m: &DMatrix<f64>) -> Option<(usize, usize, f64)> {
    let n = m.nrows();
    let scale = m.amax().max(1.0);
    let mut worst: Option<(usize, usize, f64)> = None;
    for i in 0..n {
        for j in (i + 1)..n {
            let gap = (m[(i, j)] - m[(j, i)]).abs();
            if gap > SYMMETRY_TOL * scale && worst.map_or(true, |w| gap > w.2) {
                worst = Some((i, j, gap));
            }
        }
    }
    worst
}

fn validate(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() == 0 || m.nrows() != m.ncols() {
        return Err(Error::Shape {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if !m[(i, j)].is_finite() {
                return Err(Error::NonFinite { row: i, col: j });
            }
        }
    }
    Ok(())
}

impl KernelMatrix {
    /// Wraps `m`, setting the symmetry flag when `m` is symmetric within
    /// [`SYMMETRY_TOL`].
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        validate(&m)?;
        let symmetric = symmetry_gap(&m).is_none();
        Ok(Self {
            entries: m,
            symmetric,
        })
    }

    /// Wraps `m` with an explicit symmetry claim, which is verified.
    pub fn with_symmetry(m: DMatrix<f64>, symmetric: bool) -> Result<Self> {
        validate(&m)?;
        if symmetric {
            if let Some((row, col, gap)) = symmetry_gap(&m) {
                return Err(Error::Asymmetric { row, col, gap });
            }
        }
        Ok(Self {
            entries: m,
            symmetric,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(rows_to_matrix(rows)?)
    }

    pub fn identity(n: usize) -> Self {
        Self {
            entries: DMatrix::identity(n, n),
            symmetric: true,
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            entries: DMatrix::zeros(n, n),
            symmetric: true,
        }
    }

    pub fn diagonal(d: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(d)))
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim())
            .map(|i| (0..self.dim()).map(|j| self.entries[(i, j)]).collect())
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.amax()
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        norm_inf(&self.entries)
    }

    pub fn transpose(&self) -> Self {
        Self {
            entries: self.entries.transpose(),
            symmetric: self.symmetric,
        }
    }

    /// Submatrix `(G(k_a, k_b))_{a,b}`; indices may repeat.
    pub fn submatrix(&self, indices: &[usize]) -> Result<DMatrix<f64>> {
        for &k in indices {
            if k >= self.dim() {
                return Err(Error::IndexOutOfRange {
                    index: k,
                    dim: self.dim(),
                });
            }
        }
        let m = indices.len();
        Ok(DMatrix::from_fn(m, m, |a, b| {
            self.entries[(indices[a], indices[b])]
        }))
    }

    /// `σ G σ` for the diagonal sign matrix `σ`.
    pub fn conjugate(&self, sigma: &Signature) -> Result<Self> {
        self.check_dim(sigma.dim())?;
        let s = sigma.signs();
        Ok(Self {
            entries: DMatrix::from_fn(self.dim(), self.dim(), |i, j| {
                f64::from(s[i]) * self.entries[(i, j)] * f64::from(s[j])
            }),
            symmetric: self.symmetric,
        })
    }

    /// `D G D` for the diagonal matrix `D = diag(d)`.
    pub fn scale_diagonal(&self, d: &[f64]) -> Result<Self> {
        self.check_dim(d.len())?;
        if let Some(k) = d.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { row: k, col: k });
        }
        Ok(Self {
            entries: DMatrix::from_fn(self.dim(), self.dim(), |i, j| {
                d[i] * self.entries[(i, j)] * d[j]
            }),
            symmetric: self.symmetric,
        })
    }

    /// Entrywise sum `G + c·J` with `J` the all-ones matrix.
    pub fn plus_constant(&self, c: f64) -> Self {
        Self {
            entries: self.entries.map(|x| x + c),
            symmetric: self.symmetric,
        }
    }

    pub(crate) fn check_dim(&self, other: usize) -> Result<()> {
        if other != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: other,
            });
        }
        Ok(())
    }

    /// Parses either matrix text format (JSON when the text starts with `{`).
    pub fn parse(text: &str) -> Result<Self> {
        if text.trim_start().starts_with('{') {
            Self::from_json(text)
        } else {
            Self::from_csv(text)
        }
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut rows = Vec::new();
        for (r, record) in reader.records().enumerate() {
            let record = record.map_err(|e| Error::Parse(e.to_string()))?;
            let row = record
                .iter()
                .enumerate()
                .map(|(c, field)| {
                    field.parse::<f64>().map_err(|_| {
                        Error::Parse(format!("row {r}, column {c}: cannot parse {field:?}"))
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            rows.push(row);
        }
        Self::from_rows(&rows)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: MatrixDoc = serde_json::from_str(text)?;
        doc.try_into()
    }

    /// CSV rendering using the shortest round-tripping float representation.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in self.rows() {
            let line: Vec<String> = row.iter().map(|x| format!("{x:?}")).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&MatrixDoc::from(self)).expect("matrix serialization")
    }
}

pub(crate) fn norm_inf(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub(crate) fn rows_to_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    for (r, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(Error::RaggedRow {
                row: r,
                expected: n,
                actual: row.len(),
            });
        }
    }
    if n == 0 {
        return Err(Error::Shape { rows: 0, cols: 0 });
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

/// JSON document form of a [`KernelMatrix`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixDoc {
    pub dim: usize,
    pub symmetric: bool,
    pub entries: Vec<Vec<f64>>,
}

impl From<&KernelMatrix> for MatrixDoc {
    fn from(g: &KernelMatrix) -> Self {
        MatrixDoc {
            dim: g.dim(),
            symmetric: g.is_symmetric(),
            entries: g.rows(),
        }
    }
}

impl TryFrom<MatrixDoc> for KernelMatrix {
    type Error = Error;

    fn try_from(doc: MatrixDoc) -> Result<Self> {
        if doc.entries.len() != doc.dim {
            return Err(Error::DimensionMismatch {
                expected: doc.dim,
                actual: doc.entries.len(),
            });
        }
        KernelMatrix::with_symmetry(rows_to_matrix(&doc.entries)?, doc.symmetric)
    }
}

impl Serialize for KernelMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MatrixDoc::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for KernelMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let doc = MatrixDoc::deserialize(d)?;
        KernelMatrix::try_from(doc).map_err(serde::de::Error::custom)
    }
}

/// Vector of ±1 entries, acting as the diagonal conjugation `σ G σ`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<i8>", into = "Vec<i8>")]
pub struct Signature(Vec<i8>);

impl Signature {
    pub fn new(signs: Vec<i8>) -> Result<Self> {
        if signs.is_empty() {
            return Err(Error::InvalidArgument("empty signature".into()));
        }
        if let Some(bad) = signs.iter().find(|&&s| s != 1 && s != -1) {
            return Err(Error::InvalidArgument(format!(
                "signature entries must be ±1, got {bad}"
            )));
        }
        Ok(Self(signs))
    }

    pub fn all_positive(n: usize) -> Self {
        Self(vec![1; n])
    }

    /// The signature whose entries are the bits of `mask` (bit set = −1).
    pub fn from_mask(n: usize, mask: u64) -> Self {
        Self((0..n).map(|i| if mask >> i & 1 == 1 { -1 } else { 1 }).collect())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn signs(&self) -> &[i8] {
        &self.0
    }

    pub fn get(&self, i: usize) -> i8 {
        self.0[i]
    }

    pub fn negated(&self) -> Self {
        Self(self.0.iter().map(|s| -s).collect())
    }

    /// Same signature up to a global sign flip.
    pub fn equivalent(&self, other: &Signature) -> bool {
        self == other || *self == other.negated()
    }
}

impl TryFrom<Vec<i8>> for Signature {
    type Error = Error;

    fn try_from(v: Vec<i8>) -> Result<Self> {
        Signature::new(v)
    }
}

impl From<Signature> for Vec<i8> {
    fn from(s: Signature) -> Self {
        s.0
    }
}
