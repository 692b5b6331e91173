//! Error-correcting output codes.
//!
//! A k x L coding matrix over {-1, 0, +1} assigns each class a codeword. One
//! binary learner is trained per column on the rows whose class has a nonzero
//! entry there (+1 maps to binary class 1, -1 to class 0). Hard decoding picks
//! the codeword nearest to the vector of predicted bits; soft decoding uses the
//! learners' scores and returns `softmax(-distance)`.

use std::fmt;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifiers::{self, ClassifierSpec, FittedClassifier};
use crate::dataset::Dataset;
use crate::{seed, softmax_in_place, Error, Matrix, Predictor, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    OneVsAll,
    OneVsOne,
    DenseRandom,
}

impl Scheme {
    pub fn parse(tag: &str) -> Option<Self> {
        match tag {
            "one_vs_all" => Some(Scheme::OneVsAll),
            "one_vs_one" => Some(Scheme::OneVsOne),
            "dense_random" => Some(Scheme::DenseRandom),
            _ => None,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            Scheme::OneVsAll => "one_vs_all",
            Scheme::OneVsOne => "one_vs_one",
            Scheme::DenseRandom => "dense_random",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "MatrixDoc", into = "MatrixDoc")]
pub struct CodingMatrix {
    scheme: Scheme,
    rows: Vec<Vec<i8>>,
}

#[derive(Serialize, Deserialize)]
struct MatrixDoc {
    scheme: Scheme,
    k: usize,
    #[serde(rename = "L")]
    length: usize,
    rows: Vec<Vec<i8>>,
}

impl TryFrom<MatrixDoc> for CodingMatrix {
    type Error = Error;

    fn try_from(doc: MatrixDoc) -> Result<Self> {
        if doc.rows.len() != doc.k || doc.rows.iter().any(|r| r.len() != doc.length) {
            return Err(Error::Shape(format!(
                "coding matrix declared {}x{} but rows do not match",
                doc.k, doc.length
            )));
        }
        CodingMatrix::new(doc.scheme, doc.rows)
    }
}

impl From<CodingMatrix> for MatrixDoc {
    fn from(m: CodingMatrix) -> Self {
        MatrixDoc {
            scheme: m.scheme,
            k: m.k(),
            length: m.length(),
            rows: m.rows,
        }
    }
}

fn check_k(k: usize) -> Result<()> {
    if k < 2 {
        return Err(Error::InvalidArgument(format!(
            "a coding matrix needs at least 2 classes, got {k}"
        )));
    }
    Ok(())
}

impl CodingMatrix {
    /// Validates entries, rows and columns; dense random codes must also be
    /// zero-free with no repeated or complementary columns.
    pub fn new(scheme: Scheme, rows: Vec<Vec<i8>>) -> Result<Self> {
        let invalid = |m: String| Err(Error::InvalidArgument(m));
        check_k(rows.len())?;
        let length = rows[0].len();
        if length == 0 || rows.iter().any(|r| r.len() != length) {
            return invalid("coding matrix rows must be nonempty and of equal length".into());
        }
        if rows.iter().flatten().any(|v| !matches!(v, -1..=1)) {
            return invalid("coding matrix entries must be -1, 0 or +1".into());
        }
        if let Some(i) = rows.iter().position(|r| r.iter().all(|&v| v == 0)) {
            return invalid(format!("row {i} is all zeros"));
        }
        for l in 0..length {
            let col = || rows.iter().map(move |r| r[l]);
            if !col().any(|v| v == 1) || !col().any(|v| v == -1) {
                return invalid(format!("column {l} lacks a +1 or a -1"));
            }
        }
        for i in 0..rows.len() {
            for j in i + 1..rows.len() {
                if rows[i] == rows[j] {
                    return invalid(format!("rows {i} and {j} are identical"));
                }
            }
        }
        let m = CodingMatrix { scheme, rows };
        if scheme == Scheme::DenseRandom {
            if m.rows.iter().flatten().any(|&v| v == 0) {
                return invalid("dense random codes may not contain zeros".into());
            }
            if let Some((a, b)) = m.repeated_column() {
                return invalid(format!("columns {a} and {b} are equal or complementary"));
            }
        }
        Ok(m)
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn k(&self) -> usize {
        self.rows.len()
    }

    pub fn length(&self) -> usize {
        self.rows[0].len()
    }

    pub fn row(&self, class: usize) -> &[i8] {
        &self.rows[class]
    }

    pub fn rows(&self) -> &[Vec<i8>] {
        &self.rows
    }

    pub fn entry(&self, class: usize, column: usize) -> i8 {
        self.rows[class][column]
    }

    pub fn column(&self, l: usize) -> Vec<i8> {
        self.rows.iter().map(|r| r[l]).collect()
    }

    fn repeated_column(&self) -> Option<(usize, usize)> {
        let cols: Vec<Vec<i8>> = (0..self.length()).map(|l| self.column(l)).collect();
        for a in 0..cols.len() {
            for b in a + 1..cols.len() {
                let same = cols[a] == cols[b];
                let complement = cols[a].iter().zip(&cols[b]).all(|(x, y)| *x == -*y);
                if same || complement {
                    return Some((a, b));
                }
            }
        }
        None
    }

    /// Smallest Hamming distance between two distinct rows.
    pub fn min_row_distance(&self) -> f64 {
        let mut best = f64::INFINITY;
        for i in 0..self.k() {
            for j in i + 1..self.k() {
                best = best.min(hamming(&self.rows[i], &self.rows[j]));
            }
        }
        best
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

pub fn make_one_vs_all(k: usize) -> Result<CodingMatrix> {
    check_k(k)?;
    let rows = (0..k)
        .map(|i| (0..k).map(|j| if i == j { 1 } else { -1 }).collect())
        .collect();
    CodingMatrix::new(Scheme::OneVsAll, rows)
}

/// Columns enumerate pairs (i, j), i < j, in lexicographic order.
pub fn make_one_vs_one(k: usize) -> Result<CodingMatrix> {
    check_k(k)?;
    let mut rows = vec![Vec::with_capacity(k * (k - 1) / 2); k];
    for i in 0..k {
        for j in i + 1..k {
            for (c, row) in rows.iter_mut().enumerate() {
                row.push(if c == i {
                    1
                } else if c == j {
                    -1
                } else {
                    0
                });
            }
        }
    }
    CodingMatrix::new(Scheme::OneVsOne, rows)
}

/// Draws one seeded zero-free column with both signs that neither repeats
/// nor complements a column in `taken`.
fn draw_column(rng: &mut impl Rng, k: usize, taken: &[Vec<i8>]) -> Option<Vec<i8>> {
    for _ in 0..COLUMN_TRIES {
        let col: Vec<i8> = (0..k).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
        if col.iter().all(|&v| v == col[0]) {
            continue;
        }
        let clash = taken
            .iter()
            .any(|t| t == &col || t.iter().zip(&col).all(|(a, b)| *a == -*b));
        if !clash {
            return Some(col);
        }
    }
    None
}

const COLUMN_TRIES: usize = 1000;

/// Samples `max_attempts` seeded +-1 matrices, column by column with
/// rejection of constant, repeated and complementary columns, and keeps the
/// valid one with the largest minimum row distance (earliest attempt on ties).
pub fn make_dense_random(k: usize, length: usize, seed: u64, max_attempts: usize) -> Result<CodingMatrix> {
    check_k(k)?;
    let min_len = usize::BITS - (k - 1).leading_zeros();
    if length < min_len as usize {
        return Err(Error::InvalidArgument(format!(
            "code length {length} cannot separate {k} classes; need at least {min_len}"
        )));
    }
    // distinct non-constant columns up to sign
    let capacity = if k > 60 { usize::MAX } else { (1usize << (k - 1)) - 1 };
    if length > capacity {
        return Err(Error::InvalidArgument(format!(
            "code length {length} exceeds the {capacity} distinct columns available for {k} classes"
        )));
    }
    let mut best: Option<(f64, CodingMatrix)> = None;
    for attempt in 0..max_attempts {
        let mut rng = seed::rng(seed::derive(seed, &[attempt as u64]));
        let mut cols: Vec<Vec<i8>> = Vec::with_capacity(length);
        while cols.len() < length {
            match draw_column(&mut rng, k, &cols) {
                Some(c) => cols.push(c),
                None => break,
            }
        }
        if cols.len() < length {
            continue;
        }
        let rows: Vec<Vec<i8>> = (0..k).map(|c| cols.iter().map(|col| col[c]).collect()).collect();
        let Ok(m) = CodingMatrix::new(Scheme::DenseRandom, rows) else {
            continue;
        };
        let d = m.min_row_distance();
        if best.as_ref().is_none_or(|(b, _)| d > *b) {
            best = Some((d, m));
        }
    }
    best.map(|(_, m)| m).ok_or(Error::CodingMatrixSearch(max_attempts))
}

pub fn make_matrix(scheme: Scheme, k: usize, length: usize, seed: u64, max_attempts: usize) -> Result<CodingMatrix> {
    match scheme {
        Scheme::OneVsAll => make_one_vs_all(k),
        Scheme::OneVsOne => make_one_vs_one(k),
        Scheme::DenseRandom => make_dense_random(k, length, seed, max_attempts),
    }
}

fn position_cost(a: i8, b: i8) -> f64 {
    if a == 0 || b == 0 {
        0.5
    } else if a == b {
        0.0
    } else {
        1.0
    }
}

fn hamming(a: &[i8], b: &[i8]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| position_cost(x, y)).sum()
}

/// Per position: 0 if equal and nonzero, 1 if opposite, 0.5 if either is 0.
pub fn hamming_distance(a: &[i8], b: &[i8]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "code vectors of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.iter().chain(b).any(|v| !matches!(v, -1..=1)) {
        return Err(Error::InvalidArgument("code entries must be -1, 0 or +1".into()));
    }
    Ok(hamming(a, b))
}

/// Nearest codeword to `bits`; ties go to the lowest class index.
pub fn decode_hard(matrix: &CodingMatrix, bits: &[i8]) -> usize {
    let mut best = (f64::INFINITY, 0);
    for c in 0..matrix.k() {
        let d = hamming(matrix.row(c), bits);
        if d < best.0 {
            best = (d, c);
        }
    }
    best.1
}

/// `softmax(-d)` where `d` sums `(1 - a * s) / 2` over columns with entry
/// `a != 0` and 0.5 over zero entries; `s` are column scores in [-1, 1].
pub fn decode_soft(matrix: &CodingMatrix, soft: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = (0..matrix.k())
        .map(|c| {
            -matrix
                .row(c)
                .iter()
                .zip(soft)
                .map(|(&a, &s)| if a == 0 { 0.5 } else { (1.0 - f64::from(a) * s) / 2.0 })
                .sum::<f64>()
        })
        .collect();
    softmax_in_place(&mut out);
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcocModel<B = FittedClassifier> {
    pub matrix: CodingMatrix,
    pub column_models: Vec<B>,
    pub base_spec: ClassifierSpec,
    n_features: usize,
}

/// Binary labels for column `l`: rows of zero-entry classes are dropped.
pub fn column_problem(matrix: &CodingMatrix, labels: &[usize], l: usize) -> (Vec<usize>, Vec<usize>) {
    let mut rows = Vec::new();
    let mut bits = Vec::new();
    for (i, &y) in labels.iter().enumerate() {
        match matrix.entry(y, l) {
            0 => {}
            v => {
                rows.push(i);
                bits.push(usize::from(v > 0));
            }
        }
    }
    (rows, bits)
}

pub fn fit_ecoc(base: &ClassifierSpec, matrix: &CodingMatrix, train: &Dataset) -> Result<EcocModel> {
    fit_ecoc_arrays(base, matrix, train.features(), train.labels())
}

/// Column `l` trains with seed `derive(base.seed, [l])`.
pub fn fit_ecoc_arrays(
    base: &ClassifierSpec,
    matrix: &CodingMatrix,
    x: &Matrix,
    labels: &[usize],
) -> Result<EcocModel> {
    base.hyperparameters.validate()?;
    if let Some(&bad) = labels.iter().find(|&&y| y >= matrix.k()) {
        return Err(Error::Shape(format!(
            "label {bad} but the coding matrix has {} rows",
            matrix.k()
        )));
    }
    if x.rows() != labels.len() {
        return Err(Error::Shape(format!("{} rows but {} labels", x.rows(), labels.len())));
    }
    let column_models = (0..matrix.length())
        .into_par_iter()
        .map(|l| {
            let (rows, bits) = column_problem(matrix, labels, l);
            if bits.is_empty() || bits.iter().all(|&b| b == bits[0]) {
                return Err(Error::DegenerateColumn { column: l });
            }
            let spec = base.with_seed(seed::derive(base.seed, &[l as u64]));
            classifiers::fit_arrays(&spec, &x.select_rows(&rows), &bits, 2)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EcocModel {
        matrix: matrix.clone(),
        column_models,
        base_spec: base.clone(),
        n_features: x.cols(),
    })
}

impl<B: Predictor> EcocModel<B> {
    /// Assembles a model from already-trained column learners.
    pub fn from_parts(matrix: CodingMatrix, column_models: Vec<B>, base_spec: ClassifierSpec) -> Result<Self> {
        if column_models.len() != matrix.length() {
            return Err(Error::Shape(format!(
                "{} column learners for {} code columns",
                column_models.len(),
                matrix.length()
            )));
        }
        let n_features = column_models.first().map_or(0, |m| m.n_features());
        if column_models
            .iter()
            .any(|m| m.n_features() != n_features || m.n_classes() != 2)
        {
            return Err(Error::Shape(
                "column learners must be binary and share a feature count".into(),
            ));
        }
        Ok(EcocModel {
            matrix,
            column_models,
            base_spec,
            n_features,
        })
    }

    pub fn training_time(&self) -> f64
    where
        B: HasTrainingTime,
    {
        self.column_models.iter().map(|m| m.training_time()).sum()
    }

    /// Per-column binary scores `P(+1) - P(-1)`, one row per sample.
    fn column_scores(&self, x: &Matrix) -> Result<Matrix> {
        x.check_cols(self.n_features)?;
        let mut out = Matrix::zeros(x.rows(), self.matrix.length());
        for (l, model) in self.column_models.iter().enumerate() {
            let s = model.score(x)?;
            for i in 0..x.rows() {
                out.set(i, l, s.get(i, 1) - s.get(i, 0));
            }
        }
        Ok(out)
    }
}

pub trait HasTrainingTime {
    fn training_time(&self) -> f64;
}

impl HasTrainingTime for FittedClassifier {
    fn training_time(&self) -> f64 {
        self.training_time
    }
}

impl<B: Predictor> Predictor for EcocModel<B> {
    fn n_classes(&self) -> usize {
        self.matrix.k()
    }

    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        x.check_cols(self.n_features)?;
        let votes: Vec<Vec<usize>> = self.column_models.iter().map(|m| m.predict(x)).collect::<Result<_>>()?;
        Ok((0..x.rows())
            .map(|i| {
                let bits: Vec<i8> = votes.iter().map(|v| if v[i] == 1 { 1 } else { -1 }).collect();
                decode_hard(&self.matrix, &bits)
            })
            .collect())
    }

    fn score(&self, x: &Matrix) -> Result<Matrix> {
        let soft = self.column_scores(x)?;
        let mut out = Matrix::zeros(x.rows(), self.matrix.k());
        for i in 0..x.rows() {
            out.row_mut(i).copy_from_slice(&decode_soft(&self.matrix, soft.row(i)));
        }
        Ok(out)
    }
}

pub fn predict_ecoc<B: Predictor>(model: &EcocModel<B>, x: &Matrix) -> Result<Vec<usize>> {
    model.predict(x)
}

pub fn score_ecoc<B: Predictor>(model: &EcocModel<B>, x: &Matrix) -> Result<Matrix> {
    model.score(x)
}
