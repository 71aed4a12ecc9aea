//! Sparse data matrix with both column and row access, LIBSVM I/O and
//! synthetic generators.
//!
//! The matrix is `d x n`: rows are features, columns are examples.

use std::io::BufRead;

use rand::Rng as _;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    d: usize,
    n: usize,
    col_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    col_val: Vec<f64>,
    row_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    row_val: Vec<f64>,
}

/// Per-line statistics: squared norms and nonzero counts.
#[derive(Clone, Debug, PartialEq)]
pub struct LineStats {
    pub norms_sq: Vec<f64>,
    pub nnz: Vec<usize>,
}

impl SparseMatrix {
    /// Builds from per-column `(row, value)` lists. Zeros are dropped; rows
    /// must be strictly increasing within a column.
    pub fn from_columns(d: usize, columns: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        let n = columns.len();
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::new();
        let mut col_val = Vec::new();
        col_ptr.push(0);
        for (j, col) in columns.into_iter().enumerate() {
            let mut last: Option<usize> = None;
            for (i, v) in col {
                if i >= d {
                    return Err(Error::invalid(format!(
                        "row {i} out of range in column {j}"
                    )));
                }
                if let Some(l) = last {
                    if i <= l {
                        return Err(Error::invalid(format!("rows not increasing in column {j}")));
                    }
                }
                last = Some(i);
                if !v.is_finite() {
                    return Err(Error::invalid(format!("non-finite value in column {j}")));
                }
                if v != 0.0 {
                    col_idx.push(i);
                    col_val.push(v);
                }
            }
            col_ptr.push(col_idx.len());
        }
        Ok(Self::from_csc(d, n, col_ptr, col_idx, col_val))
    }

    /// Builds from unordered triplets; duplicate positions are an error.
    pub fn from_triplets(d: usize, n: usize, triplets: &[(usize, usize, f64)]) -> Result<Self> {
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(i, j, v) in triplets {
            if j >= n {
                return Err(Error::invalid(format!("column {j} out of range")));
            }
            cols[j].push((i, v));
        }
        for (j, c) in cols.iter_mut().enumerate() {
            c.sort_by_key(|e| e.0);
            if c.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(Error::invalid(format!("duplicate entry in column {j}")));
            }
        }
        Self::from_columns(d, cols)
    }

    /// Row-major dense input, mostly for tests and small examples.
    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.len();
        let n = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("ragged dense input"));
        }
        let cols = (0..n)
            .map(|j| (0..d).map(|i| (i, rows[i][j])).collect())
            .collect();
        Self::from_columns(d, cols)
    }

    fn from_csc(
        d: usize,
        n: usize,
        col_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        col_val: Vec<f64>,
    ) -> Self {
        let nnz = col_idx.len();
        let mut counts = vec![0usize; d + 1];
        for &i in &col_idx {
            counts[i + 1] += 1;
        }
        for i in 0..d {
            counts[i + 1] += counts[i];
        }
        let row_ptr = counts.clone();
        let mut next = counts;
        let mut row_idx = vec![0usize; nnz];
        let mut row_val = vec![0f64; nnz];
        // columns are visited in order, so each row list comes out sorted
        for j in 0..n {
            for k in col_ptr[j]..col_ptr[j + 1] {
                let i = col_idx[k];
                row_idx[next[i]] = j;
                row_val[next[i]] = col_val[k];
                next[i] += 1;
            }
        }
        Self {
            d,
            n,
            col_ptr,
            col_idx,
            col_val,
            row_ptr,
            row_idx,
            row_val,
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    #[inline]
    pub fn col(&self, j: usize) -> (&[usize], &[f64]) {
        let r = self.col_ptr[j]..self.col_ptr[j + 1];
        (&self.col_idx[r.clone()], &self.col_val[r])
    }

    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.row_idx[r.clone()], &self.row_val[r])
    }

    #[inline]
    pub fn col_nnz(&self, j: usize) -> usize {
        self.col_ptr[j + 1] - self.col_ptr[j]
    }

    #[inline]
    pub fn row_nnz(&self, i: usize) -> usize {
        self.row_ptr[i + 1] - self.row_ptr[i]
    }

    /// `<X_{:j}, w>` for `w` of length d.
    #[inline]
    pub fn col_dot(&self, j: usize, w: &[f64]) -> f64 {
        let (idx, val) = self.col(j);
        idx.iter().zip(val).map(|(&i, &v)| v * w[i]).sum()
    }

    /// `w += a * X_{:j}`.
    #[inline]
    pub fn col_axpy(&self, j: usize, a: f64, w: &mut [f64]) {
        let (idx, val) = self.col(j);
        for (&i, &v) in idx.iter().zip(val) {
            w[i] += a * v;
        }
    }

    /// `<X_{i:}, z>` for `z` of length n.
    #[inline]
    pub fn row_dot(&self, i: usize, z: &[f64]) -> f64 {
        let (idx, val) = self.row(i);
        idx.iter().zip(val).map(|(&j, &v)| v * z[j]).sum()
    }

    /// `z += a * X_{i:}^T`.
    #[inline]
    pub fn row_axpy(&self, i: usize, a: f64, z: &mut [f64]) {
        let (idx, val) = self.row(i);
        for (&j, &v) in idx.iter().zip(val) {
            z[j] += a * v;
        }
    }

    /// `X a` (length d).
    pub fn mul_vec(&self, a: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.d];
        for j in 0..self.n {
            if a[j] != 0.0 {
                self.col_axpy(j, a[j], &mut out);
            }
        }
        out
    }

    /// `X^T w` (length n).
    pub fn tmul_vec(&self, w: &[f64]) -> Vec<f64> {
        (0..self.n).map(|j| self.col_dot(j, w)).collect()
    }

    pub fn transpose(&self) -> SparseMatrix {
        SparseMatrix {
            d: self.n,
            n: self.d,
            col_ptr: self.row_ptr.clone(),
            col_idx: self.row_idx.clone(),
            col_val: self.row_val.clone(),
            row_ptr: self.col_ptr.clone(),
            row_idx: self.col_idx.clone(),
            row_val: self.col_val.clone(),
        }
    }

    pub fn scaled(&self, c: f64) -> SparseMatrix {
        let mut m = self.clone();
        m.col_val.iter_mut().for_each(|v| *v *= c);
        m.row_val.iter_mut().for_each(|v| *v *= c);
        if c == 0.0 {
            // keep the no-stored-zeros invariant
            return SparseMatrix::from_csc(m.d, m.n, vec![0; m.n + 1], Vec::new(), Vec::new());
        }
        m
    }

    pub fn col_stats(&self) -> LineStats {
        let norms_sq = (0..self.n)
            .map(|j| self.col(j).1.iter().map(|v| v * v).sum())
            .collect();
        let nnz = (0..self.n).map(|j| self.col_nnz(j)).collect();
        LineStats { norms_sq, nnz }
    }

    pub fn row_stats(&self) -> LineStats {
        let norms_sq = (0..self.d)
            .map(|i| self.row(i).1.iter().map(|v| v * v).sum())
            .collect();
        let nnz = (0..self.d).map(|i| self.row_nnz(i)).collect();
        LineStats { norms_sq, nnz }
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.col_val.iter().map(|v| v * v).sum()
    }

    /// All stored `(row, col, value)` triplets in column-major order.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        (0..self.n)
            .flat_map(|j| {
                let (idx, val) = self.col(j);
                idx.iter().zip(val).map(move |(&i, &v)| (i, j, v))
            })
            .collect()
    }

    /// Same triplets read off the row view, sorted column-major.
    pub fn triplets_from_rows(&self) -> Vec<(usize, usize, f64)> {
        let mut t: Vec<_> = (0..self.d)
            .flat_map(|i| {
                let (idx, val) = self.row(i);
                idx.iter().zip(val).map(move |(&j, &v)| (i, j, v))
            })
            .collect();
        t.sort_by_key(|&(i, j, _)| (j, i));
        t
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.d, self.n);
        for (i, j, v) in self.triplets() {
            m[(i, j)] = v;
        }
        m
    }

    /// Checks the structural invariants of both views.
    pub fn check_invariants(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Numerical(m.to_string()));
        if self.col_idx.len() != self.row_idx.len() {
            return bad("view sizes differ");
        }
        for j in 0..self.n {
            let (idx, val) = self.col(j);
            if idx.windows(2).any(|w| w[0] >= w[1]) || val.iter().any(|&v| v == 0.0) {
                return bad("column view malformed");
            }
        }
        for i in 0..self.d {
            let (idx, val) = self.row(i);
            if idx.windows(2).any(|w| w[0] >= w[1]) || val.iter().any(|&v| v == 0.0) {
                return bad("row view malformed");
            }
        }
        if self.triplets() != self.triplets_from_rows() {
            return bad("views disagree");
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub x: SparseMatrix,
    pub y: Vec<f64>,
}

impl Dataset {
    pub fn new(x: SparseMatrix, y: Vec<f64>) -> Result<Self> {
        if y.len() != x.n() {
            return Err(Error::invalid(format!(
                "{} labels for {} examples",
                y.len(),
                x.n()
            )));
        }
        if let Some(j) = (0..x.n()).find(|&j| x.col_nnz(j) == 0) {
            return Err(Error::invalid(format!("example {} has no features", j + 1)));
        }
        Ok(Self { x, y })
    }

    pub fn n(&self) -> usize {
        self.x.n()
    }

    pub fn d(&self) -> usize {
        self.x.d()
    }

    /// Features (rows) without any nonzero.
    pub fn empty_rows(&self) -> Vec<usize> {
        (0..self.x.d())
            .filter(|&i| self.x.row_nnz(i) == 0)
            .collect()
    }
}

/// Reads the LIBSVM text format. `d_override` fixes the feature count.
pub fn parse_libsvm<R: BufRead>(reader: R, d_override: Option<usize>) -> Result<Dataset> {
    let mut labels = Vec::new();
    let mut columns: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut max_index = 0usize;
    for (ln, line) in reader.lines().enumerate() {
        let lineno = ln + 1;
        let line = line?;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let mut tokens = body.split_whitespace();
        let label_tok = tokens.next().unwrap_or("");
        let label: f64 = label_tok.parse().map_err(|_| Error::Parse {
            line: lineno,
            msg: format!("bad label `{label_tok}`"),
        })?;
        let mut col = Vec::new();
        let mut last = 0usize;
        for tok in tokens {
            let (i, v) = tok.split_once(':').ok_or_else(|| Error::Parse {
                line: lineno,
                msg: format!("expected index:value, got `{tok}`"),
            })?;
            let idx: usize = i.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("bad index `{i}`"),
            })?;
            let val: f64 = v.parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("bad value `{v}`"),
            })?;
            if idx == 0 {
                return Err(Error::Parse {
                    line: lineno,
                    msg: "indices are 1-based".into(),
                });
            }
            if idx <= last {
                return Err(Error::Format {
                    line: lineno,
                    msg: format!("{idx} after {last}"),
                });
            }
            if !val.is_finite() {
                return Err(Error::Parse {
                    line: lineno,
                    msg: format!("non-finite value `{v}`"),
                });
            }
            last = idx;
            max_index = max_index.max(idx);
            if val != 0.0 {
                col.push((idx - 1, val));
            }
        }
        if col.is_empty() {
            return Err(Error::Parse {
                line: lineno,
                msg: "example has no nonzero features".into(),
            });
        }
        labels.push(label);
        columns.push(col);
    }
    if columns.is_empty() {
        return Err(Error::Empty);
    }
    let d = match d_override {
        Some(d) if d < max_index => {
            return Err(Error::invalid(format!(
                "feature count {d} below max index {max_index}"
            )))
        }
        Some(d) => d,
        None => max_index,
    };
    Dataset::new(SparseMatrix::from_columns(d, columns)?, labels)
}

pub fn parse_libsvm_str(text: &str) -> Result<Dataset> {
    parse_libsvm(text.as_bytes(), None)
}

pub fn to_libsvm(ds: &Dataset) -> String {
    let mut out = String::new();
    for j in 0..ds.n() {
        out.push_str(&format!("{}", ds.y[j]));
        let (idx, val) = ds.x.col(j);
        for (&i, &v) in idx.iter().zip(val) {
            out.push_str(&format!(" {}:{}", i + 1, v));
        }
        out.push('\n');
    }
    out
}

/// Divides every entry by the mean column norm.
pub fn normalize_by_avg_col_norm(ds: &Dataset) -> Result<Dataset> {
    let stats = ds.x.col_stats();
    let avg = stats.norms_sq.iter().map(|s| s.sqrt()).sum::<f64>() / ds.n() as f64;
    if avg == 0.0 || !avg.is_finite() {
        return Err(Error::invalid("average column norm is zero"));
    }
    Ok(Dataset {
        x: ds.x.scaled(1.0 / avg),
        y: ds.y.clone(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum NormLaw {
    /// `||X_j||^2 ~ 2 U(0,1)`
    Uniform,
    Chisq {
        k: f64,
    },
    /// All squared norms 1 except the first example, which gets `big`.
    Extreme {
        big: f64,
    },
    Constant {
        value: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub d: usize,
    /// Mean fraction of nonzeros per feature.
    pub sparsity: f64,
    pub norm_law: NormLaw,
    pub seed: u64,
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    let om = spec.sparsity;
    if !(om > 0.0 && om <= 1.0) {
        return Err(Error::invalid(format!("sparsity {om} outside (0,1]")));
    }
    if spec.n == 0 || spec.d == 0 {
        return Err(Error::invalid("empty shape"));
    }
    let (n, d) = (spec.n, spec.d);
    let mut rng = rng::stream(spec.seed, rng::purpose::DATA);

    // per-feature density with mean `om`, kept inside [0,1]
    let (lo, hi) = if om <= 0.5 {
        (0.0, 2.0 * om)
    } else {
        (2.0 * om - 1.0, 1.0)
    };
    let density: Vec<f64> = (0..d)
        .map(|_| lo + (hi - lo) * rng.random::<f64>())
        .collect();

    let mut columns: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (i, &p) in density.iter().enumerate() {
        for col in columns.iter_mut() {
            if rng.random::<f64>() < p {
                let v: f64 = StandardNormal.sample(&mut rng);
                col.push((i, v));
            }
        }
    }
    for col in columns.iter_mut() {
        if col.is_empty() {
            let i = rng.random_range(0..d);
            let v: f64 = StandardNormal.sample(&mut rng);
            col.push((i, v));
        }
    }

    let target: Vec<f64> = match &spec.norm_law {
        NormLaw::Uniform => (0..n).map(|_| 2.0 * rng.random::<f64>()).collect(),
        NormLaw::Chisq { k } => {
            let dist = ChiSquared::new(*k).map_err(|e| Error::invalid(e.to_string()))?;
            (0..n).map(|_| dist.sample(&mut rng)).collect()
        }
        NormLaw::Extreme { big } => {
            let mut l = vec![1.0; n];
            l[0] = *big;
            l
        }
        NormLaw::Constant { value } => vec![*value; n],
    };
    for (col, &t) in columns.iter_mut().zip(&target) {
        let norm_sq: f64 = col.iter().map(|e| e.1 * e.1).sum();
        let s = (t / norm_sq).sqrt();
        col.iter_mut().for_each(|e| e.1 *= s);
    }
    let x = SparseMatrix::from_columns(d, columns)?;

    let mut lrng = rng::stream(spec.seed, rng::purpose::LABELS);
    let w_plant: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut lrng)).collect();
    let y = (0..n)
        .map(|j| {
            if x.col_dot(j, &w_plant) >= 0.0 {
                1.0
            } else {
                -1.0
            }
        })
        .collect();
    Dataset::new(x, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn x22() -> SparseMatrix {
        SparseMatrix::from_dense(&[vec![1.0, 0.0], vec![2.0, 3.0]]).unwrap()
    }

    #[test]
    fn parse_basic() {
        let ds = parse_libsvm_str("1 1:0.5 3:2.0\n-1 2:1.0").unwrap();
        assert_eq!((ds.d(), ds.n()), (3, 2));
        assert_eq!(ds.y, vec![1.0, -1.0]);
        assert_eq!(ds.x.col(0), (&[0usize, 2][..], &[0.5, 2.0][..]));
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(parse_libsvm_str(""), Err(Error::Empty)));
        assert!(matches!(
            parse_libsvm_str("1 2:1 1:3"),
            Err(Error::Format { line: 1, .. })
        ));
        assert!(matches!(
            parse_libsvm_str("1 1:1\n1 x:3"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse_libsvm_str("1 1:1\nfoo 1:3"),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn parse_d_override() {
        let ds = parse_libsvm("1 1:1\n".as_bytes(), Some(5)).unwrap();
        assert_eq!(ds.d(), 5);
        assert_eq!(ds.empty_rows(), vec![1, 2, 3, 4]);
        assert!(parse_libsvm("1 3:1\n".as_bytes(), Some(2)).is_err());
    }

    #[test]
    fn stats_small() {
        let s = x22().col_stats();
        assert_eq!(s.norms_sq, vec![5.0, 9.0]);
        assert_eq!(s.nnz, vec![2, 1]);
        let t = x22().transpose();
        assert_eq!(t.row_stats(), x22().col_stats());
    }

    #[test]
    fn stats_empty_column() {
        let m = SparseMatrix::from_columns(2, vec![vec![], vec![(1, 2.0)]]).unwrap();
        let s = m.col_stats();
        assert_eq!(s.norms_sq[0], 0.0);
        assert_eq!(s.nnz[0], 0);
    }

    #[test]
    fn normalize_examples() {
        let x = SparseMatrix::from_columns(1, vec![vec![(0, 1.0)], vec![(0, 3.0)]]).unwrap();
        let ds = Dataset::new(x, vec![1.0, 1.0]).unwrap();
        let nd = normalize_by_avg_col_norm(&ds).unwrap();
        assert_eq!(nd.x.col_stats().norms_sq, vec![0.25, 2.25]);
        let again = normalize_by_avg_col_norm(&nd).unwrap();
        for (a, b) in again.x.triplets().iter().zip(nd.x.triplets()) {
            assert!((a.2 - b.2).abs() <= 1e-12);
        }
        let single = Dataset::new(
            SparseMatrix::from_dense(&[vec![3.0], vec![4.0]]).unwrap(),
            vec![1.0],
        )
        .unwrap();
        let s = normalize_by_avg_col_norm(&single).unwrap();
        assert!((s.x.col_stats().norms_sq[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dataset_rejects_empty_column() {
        let x = SparseMatrix::from_columns(2, vec![vec![], vec![(1, 2.0)]]).unwrap();
        assert!(Dataset::new(x, vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn synthetic_constant_norms() {
        let spec = SyntheticSpec {
            n: 4,
            d: 6,
            sparsity: 0.5,
            norm_law: NormLaw::Constant { value: 1.0 },
            seed: 3,
        };
        let ds = generate_synthetic(&spec).unwrap();
        for v in ds.x.col_stats().norms_sq {
            assert!((v - 1.0).abs() < 1e-12);
        }
        assert!(ds.y.iter().all(|&y| y == 1.0 || y == -1.0));
    }

    #[test]
    fn synthetic_is_deterministic() {
        let spec = SyntheticSpec {
            n: 50,
            d: 20,
            sparsity: 0.1,
            norm_law: NormLaw::Chisq { k: 10.0 },
            seed: 11,
        };
        assert_eq!(
            generate_synthetic(&spec).unwrap(),
            generate_synthetic(&spec).unwrap()
        );
        let other = SyntheticSpec {
            seed: 12,
            ..spec.clone()
        };
        assert_ne!(
            generate_synthetic(&spec).unwrap(),
            generate_synthetic(&other).unwrap()
        );
    }

    #[test]
    fn synthetic_rejects_bad_sparsity() {
        for s in [0.0, 1.5, -0.1] {
            let spec = SyntheticSpec {
                n: 3,
                d: 3,
                sparsity: s,
                norm_law: NormLaw::Uniform,
                seed: 0,
            };
            assert!(generate_synthetic(&spec).is_err());
        }
    }

    #[test]
    fn synthetic_sparsity_tracks_mean() {
        let spec = SyntheticSpec {
            n: 400,
            d: 200,
            sparsity: 0.8,
            norm_law: NormLaw::Uniform,
            seed: 5,
        };
        let ds = generate_synthetic(&spec).unwrap();
        let frac = ds.x.nnz() as f64 / (400.0 * 200.0);
        assert!((frac - 0.8).abs() < 0.05, "{frac}");
    }

    fn arb_matrix() -> impl Strategy<Value = SparseMatrix> {
        (1usize..7, 1usize..7).prop_flat_map(|(d, n)| {
            proptest::collection::vec(prop_oneof![3 => Just(0.0), 2 => -5.0f64..5.0], d * n)
                .prop_map(move |vals| {
                    let rows: Vec<Vec<f64>> =
                        (0..d).map(|i| vals[i * n..(i + 1) * n].to_vec()).collect();
                    SparseMatrix::from_dense(&rows).unwrap()
                })
        })
    }

    proptest! {
        #[test]
        fn views_agree(m in arb_matrix()) {
            prop_assert!(m.check_invariants().is_ok());
            prop_assert_eq!(m.triplets(), m.triplets_from_rows());
        }

        #[test]
        fn transpose_duality(m in arb_matrix()) {
            prop_assert_eq!(m.col_stats(), m.transpose().row_stats());
            prop_assert_eq!(m.row_stats(), m.transpose().col_stats());
        }

        #[test]
        fn libsvm_round_trip(m in arb_matrix()) {
            prop_assume!((0..m.n()).all(|j| m.col_nnz(j) > 0));
            let y: Vec<f64> = (0..m.n()).map(|j| if j % 2 == 0 { 1.0 } else { -1.0 }).collect();
            let ds = Dataset::new(m.clone(), y).unwrap();
            let back = parse_libsvm(to_libsvm(&ds).as_bytes(), Some(m.d())).unwrap();
            prop_assert_eq!(back, ds);
        }
    }
}
