use crate::error::{Error, Result};

/// A dense set of `n` points in `d` dimensions, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    n: usize,
    d: usize,
    data: Vec<f64>,
}

impl PointSet {
    pub fn new(n: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::EmptyInput("point set must have n >= 1, d >= 1".into()));
        }
        if data.len() != n * d {
            return Err(Error::DimensionMismatch {
                expected: n * d,
                got: data.len(),
            });
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParam("point set contains non-finite entries".into()));
        }
        Ok(Self { n, d, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyInput("no rows".into()));
        }
        let d = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * d);
        for r in rows {
            if r.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: r.len() });
            }
            data.extend_from_slice(r);
        }
        Self::new(rows.len(), d, data)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false // n >= 1 by construction
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.d)
    }

    /// New point set restricted to `indices` (order preserved).
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::EmptyInput("empty subset".into()));
        }
        let mut data = Vec::with_capacity(indices.len() * self.d);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self::new(indices.len(), self.d, data)
    }

    /// Squared diameter upper bound: 4 * max_i ||x_i - mean||^2.
    ///
    /// Always at least the true squared diameter, computed in O(nd).
    pub fn squared_diameter_bound(&self) -> f64 {
        let mean = self.mean();
        let max_sq = self
            .rows()
            .map(|x| sub_norm_sq(x, &mean))
            .fold(0.0_f64, f64::max);
        4.0 * max_sq
    }

    /// Unweighted mean of all points.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.d];
        for x in self.rows() {
            for (mj, xj) in m.iter_mut().zip(x) {
                *mj += xj;
            }
        }
        let inv = 1.0 / self.n as f64;
        for mj in &mut m {
            *mj *= inv;
        }
        m
    }

    /// Coordinate-wise median; even counts average the two middle values.
    pub fn coordinate_median(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.d);
        let mut col = vec![0.0; self.n];
        for j in 0..self.d {
            for i in 0..self.n {
                col[i] = self.data[i * self.d + j];
            }
            out.push(crate::points::median_inplace(&mut col));
        }
        out
    }
}

/// Median of a scratch slice (sorts it); even counts average the middle two.
pub fn median_inplace(v: &mut [f64]) -> f64 {
    assert!(!v.is_empty());
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// A unit vector in `d` dimensions (norm 1 within 1e-9).
#[derive(Debug, Clone, PartialEq)]
pub struct Direction(Vec<f64>);

impl Direction {
    pub fn new(v: Vec<f64>) -> Result<Self> {
        let norm = norm(&v);
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParam(format!(
                "direction norm {norm} deviates from 1 beyond 1e-9"
            )));
        }
        Ok(Self(v))
    }

    /// Normalizes `v`; errors on (near-)zero input.
    pub fn normalized(mut v: Vec<f64>) -> Result<Self> {
        let norm = norm(&v);
        if norm <= 0.0 || !norm.is_finite() {
            return Err(Error::InvalidParam("cannot normalize zero vector".into()));
        }
        for x in &mut v {
            *x /= norm;
        }
        Ok(Self(v))
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// <a - b, a - b>
#[inline]
pub fn sub_norm_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// <a - c, v>
#[inline]
pub fn centered_dot(a: &[f64], c: &[f64], v: &[f64]) -> f64 {
    a.iter()
        .zip(c)
        .zip(v)
        .map(|((x, ci), vi)| (x - ci) * vi)
        .sum()
}
