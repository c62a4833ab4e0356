//! Finite unitary truncations of CMV matrices in banded storage.

use faer::Mat;
use serde::{Deserialize, Serialize};
use std::io::Write;

use crate::coeffs::{CoefficientSource, Verblunsky};
use crate::error::{Error, Result};
use crate::mat2::Mat2;
use crate::C64;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// `[[conj a, rho], [rho, -a]]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThetaBlock {
    pub alpha: C64,
    pub entries: Mat2,
}

impl ThetaBlock {
    pub fn new(v: &Verblunsky) -> Self {
        let r = C64::new(v.rho, 0.0);
        Self { alpha: v.alpha, entries: Mat2::new(v.alpha.conj(), r, r, -v.alpha) }
    }

    pub fn unitarity_residual(&self) -> f64 {
        (self.entries * self.entries.adjoint()).sub(&Mat2::identity()).max_abs()
    }
}

/// Square matrix over the index window `[n_min, n_min + dim)` with all
/// entries more than `half_bw` off the diagonal equal to zero.
#[derive(Clone, Debug, PartialEq)]
pub struct BandMatrix {
    n_min: i64,
    dim: usize,
    half_bw: usize,
    data: Vec<C64>,
}

impl BandMatrix {
    pub fn zeros(n_min: i64, dim: usize, half_bw: usize) -> Self {
        Self { n_min, dim, half_bw, data: vec![ZERO; dim * (2 * half_bw + 1)] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_min(&self) -> i64 {
        self.n_min
    }

    pub fn n_max(&self) -> i64 {
        self.n_min + self.dim as i64 - 1
    }

    pub fn half_bandwidth(&self) -> usize {
        self.half_bw
    }

    fn slot(&self, i: usize, j: usize) -> Option<usize> {
        let off = j as i64 - i as i64 + self.half_bw as i64;
        (i < self.dim && j < self.dim && (0..=2 * self.half_bw as i64).contains(&off))
            .then(|| i * (2 * self.half_bw + 1) + off as usize)
    }

    /// Entry by local (0-based) position.
    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.slot(i, j).map_or(ZERO, |s| self.data[s])
    }

    fn set(&mut self, i: usize, j: usize, v: C64) {
        let s = self.slot(i, j).expect("entry outside band");
        self.data[s] = v;
    }

    /// Entry by global index.
    pub fn entry(&self, row: i64, col: i64) -> C64 {
        let (i, j) = (row - self.n_min, col - self.n_min);
        if i < 0 || j < 0 {
            return ZERO;
        }
        self.get(i as usize, j as usize)
    }

    fn cols(&self, i: usize) -> std::ops::Range<usize> {
        i.saturating_sub(self.half_bw)..(i + self.half_bw + 1).min(self.dim)
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zeros(self.n_min, self.dim, self.half_bw);
        for i in 0..self.dim {
            for j in self.cols(i) {
                out.set(j, i, self.get(i, j).conj());
            }
        }
        out
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!((self.n_min, self.dim), (other.n_min, other.dim));
        let mut out = Self::zeros(self.n_min, self.dim, self.half_bw + other.half_bw);
        for i in 0..self.dim {
            for k in self.cols(i) {
                let a = self.get(i, k);
                if a == ZERO {
                    continue;
                }
                for j in other.cols(k) {
                    let s = out.slot(i, j).unwrap();
                    out.data[s] += a * other.get(k, j);
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        (0..self.dim).map(|i| self.cols(i).map(|j| self.get(i, j) * x[j]).sum()).collect()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let bw = self.half_bw.max(other.half_bw);
        let mut worst: f64 = 0.0;
        for i in 0..self.dim {
            for j in i.saturating_sub(bw)..(i + bw + 1).min(self.dim) {
                worst = worst.max((self.get(i, j) - other.get(i, j)).norm());
            }
        }
        worst
    }

    /// `max |(A A*)_{ij} - delta_{ij}|`.
    pub fn unitarity_residual(&self) -> f64 {
        let g = self.matmul(&self.adjoint());
        let mut id = Self::zeros(self.n_min, self.dim, 0);
        for i in 0..self.dim {
            id.set(i, i, ONE);
        }
        g.max_abs_diff(&id)
    }

    pub fn to_dense(&self) -> Mat<C64> {
        Mat::from_fn(self.dim, self.dim, |i, j| self.get(i, j))
    }

    /// Solves `(A - shift I) x = rhs` by banded LU with partial pivoting.
    pub fn solve_shifted(&self, shift: C64, rhs: &[C64]) -> Result<Vec<C64>> {
        let n = self.dim;
        let kl = self.half_bw;
        let width = 3 * kl + 1;
        // Row i holds columns i - kl ..= i + 2 kl; pivoting fills the extra kl.
        let mut a = vec![ZERO; n * width];
        let at = |i: usize, j: usize| i * width + (j + kl - i);
        for i in 0..n {
            for j in self.cols(i) {
                a[at(i, j)] = self.get(i, j);
            }
            a[at(i, i)] -= shift;
        }
        let mut b = rhs.to_vec();
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let last_col = (k + 2 * kl).min(n - 1);
            let p = (k..=last_row)
                .max_by(|&x, &y| a[at(x, k)].norm().total_cmp(&a[at(y, k)].norm()))
                .unwrap();
            if a[at(p, k)] == ZERO {
                return Err(Error::SingularSystem { row: k });
            }
            if p != k {
                for j in k..=last_col {
                    a.swap(at(p, j), at(k, j));
                }
                b.swap(p, k);
            }
            let piv = a[at(k, k)];
            for i in k + 1..=last_row {
                let l = a[at(i, k)] / piv;
                if l == ZERO {
                    continue;
                }
                for j in k..=last_col {
                    let u = a[at(k, j)];
                    a[at(i, j)] -= l * u;
                }
                let bk = b[k];
                b[i] -= l * bk;
            }
        }
        let mut x = vec![ZERO; n];
        for i in (0..n).rev() {
            let mut s = b[i];
            for j in i + 1..=(i + 2 * kl).min(n - 1) {
                s -= a[at(i, j)] * x[j];
            }
            x[i] = s / a[at(i, i)];
        }
        Ok(x)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flavor {
    HalfLinePlus,
    HalfLineMinus,
    Extended,
}

/// Unitary truncation; `cut_phases` are the unimodular coefficients installed
/// at `n_min - 1` and `n_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedOperator {
    pub flavor: Flavor,
    pub cut_phases: (C64, C64),
    pub matrix: BandMatrix,
}

impl TruncatedOperator {
    pub fn n_min(&self) -> i64 {
        self.matrix.n_min()
    }

    pub fn n_max(&self) -> i64 {
        self.matrix.n_max()
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn entry(&self, row: i64, col: i64) -> C64 {
        self.matrix.entry(row, col)
    }

    pub fn unitarity_residual(&self) -> f64 {
        self.matrix.unitarity_residual()
    }

    /// `[(U - z)^{-1}]_{jj}` for global index `j`.
    pub fn resolvent_diagonal(&self, z: C64, j: i64) -> Result<C64> {
        let k = (j - self.n_min()) as usize;
        let mut rhs = vec![ZERO; self.dim()];
        rhs[k] = ONE;
        Ok(self.matrix.solve_shifted(z, &rhs)?[k])
    }

    /// One `row col re im` line per stored nonzero, global indices.
    pub fn write_dump<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let m = &self.matrix;
        for i in 0..m.dim() {
            for j in m.cols(i) {
                let v = m.get(i, j);
                if v != ZERO {
                    let (r, c) = (m.n_min + i as i64, m.n_min + j as i64);
                    writeln!(w, "{r} {c} {:e} {:e}", v.re, v.im)?;
                }
            }
        }
        Ok(())
    }
}

struct Window<'a> {
    source: &'a CoefficientSource,
    n_min: i64,
    n_max: i64,
    left: Verblunsky,
    right: Verblunsky,
}

impl Window<'_> {
    fn new(source: &CoefficientSource, n_min: i64, n_max: i64, left: C64, right: C64) -> Result<Window<'_>> {
        if n_max < n_min {
            return Err(Error::BadWindow { n_min, n_max, reason: "empty".into() });
        }
        Ok(Window { source, n_min, n_max, left: Verblunsky::boundary(left)?, right: Verblunsky::boundary(right)? })
    }

    fn coef(&self, k: i64) -> Result<Verblunsky> {
        if k == self.n_min - 1 {
            Ok(self.left)
        } else if k == self.n_max {
            Ok(self.right)
        } else {
            self.source.coefficient(k)
        }
    }

    fn contains(&self, k: i64) -> bool {
        (self.n_min..=self.n_max).contains(&k)
    }

    fn dim(&self) -> usize {
        (self.n_max - self.n_min + 1) as usize
    }

    fn local(&self, k: i64) -> usize {
        (k - self.n_min) as usize
    }

    /// Five-diagonal rows written entry by entry.
    fn cmv(&self) -> Result<BandMatrix> {
        let mut m = BandMatrix::zeros(self.n_min, self.dim(), 2);
        let mut coefs = Vec::with_capacity(self.dim() + 1);
        for k in self.n_min - 1..=self.n_max {
            coefs.push(self.coef(k)?);
        }
        let c = |k: i64| coefs[(k - self.n_min + 1) as usize];
        let r = |k: i64| C64::new(c(k).rho, 0.0);
        let a = |k: i64| c(k).alpha;
        for i in self.n_min..=self.n_max {
            let row: [(i64, C64); 4] = if i.rem_euclid(2) == 0 {
                [
                    (i - 1, a(i).conj() * r(i - 1)),
                    (i, -a(i).conj() * a(i - 1)),
                    (i + 1, r(i) * a((i + 1).min(self.n_max)).conj()),
                    (i + 2, r(i) * r((i + 1).min(self.n_max))),
                ]
            } else {
                [
                    (i - 2, r(i - 1) * r((i - 2).max(self.n_min - 1))),
                    (i - 1, -r(i - 1) * a((i - 2).max(self.n_min - 1))),
                    (i, -a(i - 1) * a(i).conj()),
                    (i + 1, -a(i - 1) * r(i)),
                ]
            };
            for (col, v) in row {
                if self.contains(col) {
                    m.set(self.local(i), self.local(col), v);
                }
            }
        }
        Ok(m)
    }

    /// Direct sum of Theta blocks on `(k, k+1)` for all `k` of the parity.
    fn theta_sum(&self, even: bool) -> Result<BandMatrix> {
        let mut m = BandMatrix::zeros(self.n_min, self.dim(), 1);
        for k in self.n_min - 1..=self.n_max {
            if (k.rem_euclid(2) == 0) != even {
                continue;
            }
            let t = ThetaBlock::new(&self.coef(k)?).entries.0;
            for (di, dj) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                let (i, j) = (k + di, k + dj);
                if self.contains(i) && self.contains(j) {
                    m.set(self.local(i), self.local(j), t[di as usize][dj as usize]);
                }
            }
        }
        Ok(m)
    }
}

/// Standard half-line CMV on `[0, n]`: `alpha_{-1} = -1`, `alpha_n = phase`.
pub fn build_half_line_plus(source: &CoefficientSource, n: usize, boundary_phase: C64) -> Result<TruncatedOperator> {
    if n < 2 {
        return Err(Error::InvalidParameter { name: "n", reason: format!("{n} < 2") });
    }
    let w = Window::new(source, 0, n as i64, -ONE, boundary_phase)?;
    Ok(TruncatedOperator { flavor: Flavor::HalfLinePlus, cut_phases: (-ONE, boundary_phase), matrix: w.cmv()? })
}

/// Left half-line on `[-n-1, -1]`: `alpha_{-1} = 1`, `alpha_{-n-2} = phase`.
/// With this cut it is unitarily equivalent to the plus truncation of the
/// reflected source (index map `k -> -k-1`).
pub fn build_half_line_minus(source: &CoefficientSource, n: usize, boundary_phase: C64) -> Result<TruncatedOperator> {
    if n < 2 {
        return Err(Error::InvalidParameter { name: "n", reason: format!("{n} < 2") });
    }
    let w = Window::new(source, -(n as i64) - 1, -1, boundary_phase, ONE)?;
    Ok(TruncatedOperator { flavor: Flavor::HalfLineMinus, cut_phases: (boundary_phase, ONE), matrix: w.cmv()? })
}

/// Extended CMV restricted to `[n_min, n_max]` with the cut coefficients
/// `alpha_{n_min - 1} = phase_left`, `alpha_{n_max} = phase_right`.
pub fn build_extended(
    source: &CoefficientSource,
    n_min: i64,
    n_max: i64,
    phase_left: C64,
    phase_right: C64,
) -> Result<TruncatedOperator> {
    if n_min > -1 || n_max < 1 {
        return Err(Error::BadWindow { n_min, n_max, reason: "must contain rows -1, 0 and 1".into() });
    }
    let w = Window::new(source, n_min, n_max, phase_left, phase_right)?;
    Ok(TruncatedOperator { flavor: Flavor::Extended, cut_phases: (phase_left, phase_right), matrix: w.cmv()? })
}

/// `(L, M)` with `E = L M` for the same window and cuts as [`build_extended`].
/// Requires `n_min` even and `n_max` odd so the cut blocks belong to `M`.
pub fn lm_factorize(
    source: &CoefficientSource,
    n_min: i64,
    n_max: i64,
    phase_left: C64,
    phase_right: C64,
) -> Result<(BandMatrix, BandMatrix)> {
    if n_min.rem_euclid(2) != 0 || n_max.rem_euclid(2) != 1 {
        return Err(Error::BadWindow { n_min, n_max, reason: "need n_min even and n_max odd".into() });
    }
    let w = Window::new(source, n_min, n_max, phase_left, phase_right)?;
    Ok((w.theta_sum(true)?, w.theta_sum(false)?))
}

/// Eigen-data of a truncation: angles in `[0, 2 pi)` and the spectral
/// weights of the anchor vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralMeasureSample {
    pub eigenangles: Vec<f64>,
    pub weights: Vec<f64>,
    pub anchors: Vec<i64>,
    pub residual: f64,
}

impl SpectralMeasureSample {
    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// `sum_k w_k (zeta_k + z) / (zeta_k - z)`.
    pub fn borel(&self, z: C64) -> C64 {
        self.eigenangles
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| {
                let zeta = C64::from_polar(1.0, t);
                (zeta + z) / (zeta - z) * w
            })
            .sum()
    }

    /// Weight carried by angles in `[lo, hi]`.
    pub fn arc_mass(&self, lo: f64, hi: f64) -> f64 {
        self.eigenangles.iter().zip(&self.weights).filter(|(t, _)| (lo..=hi).contains(*t)).map(|(_, w)| w).sum()
    }
}

const EIGEN_RESIDUAL_TOL: f64 = 1e-9;
const CLUSTER_TOL: f64 = 1e-7;
const MASS_TOL: f64 = 1e-10;

/// Dense eigen-decomposition of `op`; weights are `sum_j |<delta_j, v_k>|^2`
/// over the anchors with orthonormal eigenvectors.
pub fn spectral_measure(op: &TruncatedOperator, anchors: &[i64]) -> Result<SpectralMeasureSample> {
    let n = op.dim();
    for &a in anchors {
        if !(op.n_min()..=op.n_max()).contains(&a) {
            return Err(Error::BadWindow { n_min: op.n_min(), n_max: op.n_max(), reason: format!("anchor {a} outside") });
        }
    }
    let dense = op.matrix.to_dense();
    let eig = dense.eigen().map_err(|e| Error::Eigensolver(format!("{e:?}")))?;
    let u = eig.U();
    let s = eig.S().column_vector();

    let mut order: Vec<usize> = (0..n).collect();
    let angle = |k: usize| s[k].arg().rem_euclid(std::f64::consts::TAU);
    order.sort_by(|&a, &b| angle(a).total_cmp(&angle(b)));
    // Start after the widest gap so no cluster straddles the cut at angle 0.
    let gap = |i: usize| (angle(order[(i + 1) % n]) - angle(order[i])).rem_euclid(std::f64::consts::TAU);
    let widest = (0..n).max_by(|&a, &b| gap(a).total_cmp(&gap(b))).unwrap_or(0);
    order.rotate_left((widest + 1) % n.max(1));
    let mut vecs: Vec<Vec<C64>> = order.iter().map(|&k| (0..n).map(|i| u[(i, k)]).collect()).collect();
    let lambdas: Vec<C64> = order.iter().map(|&k| s[k]).collect();

    // A non-Hermitian solver gives an arbitrary basis inside a degenerate
    // eigenspace; weights need an orthonormal one.
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && (lambdas[end] - lambdas[end - 1]).norm() < CLUSTER_TOL {
            end += 1;
        }
        gram_schmidt(&mut vecs[start..end]);
        start = end;
    }
    let mut residual: f64 = 0.0;
    for (v, &lam) in vecs.iter().zip(&lambdas) {
        let av = op.matrix.matvec(v);
        for (x, y) in av.iter().zip(v) {
            residual = residual.max((x - lam * y).norm());
        }
    }
    if residual > EIGEN_RESIDUAL_TOL {
        return Err(Error::EigenResidual { residual, tolerance: EIGEN_RESIDUAL_TOL });
    }
    let weights: Vec<f64> = vecs
        .iter()
        .map(|v| anchors.iter().map(|&a| v[(a - op.n_min()) as usize].norm_sqr()).sum())
        .collect();
    let mut pairs: Vec<(f64, f64)> =
        lambdas.iter().map(|l| l.arg().rem_euclid(std::f64::consts::TAU)).zip(weights).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let sample = SpectralMeasureSample {
        eigenangles: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
        anchors: anchors.to_vec(),
        residual,
    };
    let defect = (sample.mass() - anchors.len() as f64).abs();
    if defect > MASS_TOL {
        return Err(Error::Eigensolver(format!("anchor mass off by {defect:e}; eigenvectors not orthonormal")));
    }
    Ok(sample)
}

fn gram_schmidt(vs: &mut [Vec<C64>]) {
    for i in 0..vs.len() {
        for j in 0..i {
            let (head, tail) = vs.split_at_mut(i);
            let proj: C64 = head[j].iter().zip(tail[0].iter()).map(|(a, b)| a.conj() * b).sum();
            for (x, a) in tail[0].iter_mut().zip(&head[j]) {
                *x -= proj * a;
            }
        }
        let nrm = vs[i].iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        for x in vs[i].iter_mut() {
            *x /= nrm;
        }
    }
}
