//! Persistent excitation and sufficient richness analytics.
//!
//! Ranks are decided on the symmetric eigen-decomposition of a Gram matrix
//! `Σ x xᵀ`, with a tolerance relative to its largest eigenvalue.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};

/// Default relative rank tolerance.
pub const DEFAULT_RANK_TOL: f64 = 1e-6;

/// Regressor windows default to `WINDOW_PER_DIM · M` samples.
pub const WINDOW_PER_DIM: usize = 8;

const SYMMETRY_TOL: f64 = 1e-10;

/// Sliding window of `n`-vectors with an incrementally maintained Gram
/// matrix. Holds up to `window_len + n` samples.
#[derive(Clone, Debug)]
pub struct GramWindow {
    n: usize,
    window_len: usize,
    samples: VecDeque<DVector<f64>>,
    accum: DMatrix<f64>,
}

impl GramWindow {
    pub fn new(n: usize, window_len: usize) -> Self {
        Self {
            n,
            window_len,
            samples: VecDeque::with_capacity(window_len + n + 1),
            accum: DMatrix::zeros(n, n),
        }
    }

    /// Window of the default length `8·n` for an `n`-dimensional regressor.
    pub fn for_dim(n: usize) -> Self {
        Self::new(n, WINDOW_PER_DIM * n)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    pub fn capacity(&self) -> usize {
        self.window_len + self.n
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.samples.len() == self.capacity()
    }

    pub fn samples(&self) -> impl Iterator<Item = &DVector<f64>> {
        self.samples.iter()
    }

    pub fn accum(&self) -> &DMatrix<f64> {
        &self.accum
    }

    pub fn clear(&mut self) {
        self.samples.clear();
        self.accum.fill(0.0);
    }

    pub fn push(&mut self, x: DVector<f64>) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::Dimension {
                expected: self.n,
                got: x.len(),
            });
        }
        if self.samples.len() == self.capacity() {
            let old = self.samples.pop_front().unwrap();
            self.accum.ger(-1.0, &old, &old, 1.0);
        }
        self.accum.ger(1.0, &x, &x, 1.0);
        self.samples.push_back(x);
        Ok(())
    }

    /// Gram matrix recomputed from the retained samples.
    pub fn recomputed(&self) -> DMatrix<f64> {
        gram(self.samples.iter())
    }

    /// Replaces the running sum with an exact recomputation.
    pub fn resync(&mut self) {
        self.accum = self.recomputed();
    }
}

/// Rank certificate of a sample window.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExcitationReport {
    pub rank: usize,
    /// Gram eigenvalues, descending.
    pub singular_values: Vec<f64>,
    /// Smallest eigenvalue counted in the rank; 0 when the rank is 0.
    pub alpha_hat: f64,
    /// Orthonormal columns spanning the excited subspace.
    #[serde(skip)]
    pub basis: DMatrix<f64>,
}

pub fn gram<'a>(samples: impl IntoIterator<Item = &'a DVector<f64>>) -> DMatrix<f64> {
    let mut it = samples.into_iter().peekable();
    let n = it.peek().map_or(0, |x| x.len());
    let mut g = DMatrix::zeros(n, n);
    for x in it {
        g.ger(1.0, x, x, 1.0);
    }
    g
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() {
        return Err(Error::Dimension {
            expected: m.nrows(),
            got: m.ncols(),
        });
    }
    let scale = m.amax().max(1.0);
    let asym = (m - m.transpose()).amax();
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::Asymmetric(asym));
    }
    Ok(())
}

/// Eigenpairs sorted by descending eigenvalue.
fn eigen_desc(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_columns(
        &order
            .iter()
            .map(|&i| eig.eigenvectors.column(i).into_owned())
            .collect::<Vec<_>>(),
    );
    (values, vectors)
}

fn rank_of_sorted(values: &[f64], tol: f64) -> usize {
    match values.first() {
        Some(&max) if max > 0.0 => values.iter().filter(|&&v| v > tol * max).count(),
        _ => 0,
    }
}

/// Number of eigenvalues above `tol·λ_max`.
pub fn numerical_rank(matrix: &DMatrix<f64>, tol: f64) -> Result<usize> {
    check_symmetric(matrix)?;
    if matrix.nrows() == 0 {
        return Ok(0);
    }
    let (values, _) = eigen_desc(matrix);
    Ok(rank_of_sorted(&values, tol))
}

/// True iff every length-`n_window` window of `samples` has
/// `λ_min(Σ x xᵀ) ≥ alpha`.
pub fn is_pe(samples: &[DVector<f64>], n_window: usize, alpha: f64) -> bool {
    if n_window == 0 || samples.len() < n_window {
        return false;
    }
    samples.windows(n_window).all(|w| {
        let (values, _) = eigen_desc(&gram(w));
        values.last().is_some_and(|&lmin| lmin >= alpha)
    })
}

/// Stacked vectors `ξ_m(t) = [x(t) … x(t+m−1)]`.
fn stacked(samples: &[DVector<f64>], m: usize) -> Vec<DVector<f64>> {
    if samples.len() < m {
        return Vec::new();
    }
    let n = samples[0].len();
    (0..=samples.len() - m)
        .map(|t| DVector::from_iterator(n * m, samples[t..t + m].iter().flat_map(|x| x.iter().copied())))
        .collect()
}

/// True iff every length-`n_window` window of `xs` has a Gram matrix whose
/// smallest eigenvalue exceeds `tol·λ_max`.
fn all_windows_full_rank(xs: &[DVector<f64>], n_window: usize, tol: f64) -> bool {
    if xs.is_empty() || n_window == 0 || xs.len() < n_window {
        return false;
    }
    let mut g = gram(&xs[..n_window]);
    let mut t0 = 0;
    loop {
        let (values, _) = eigen_desc(&g);
        let lmax = values[0];
        let lmin = *values.last().unwrap();
        if !(lmax > 0.0 && lmin > tol * lmax) {
            return false;
        }
        if t0 + n_window == xs.len() {
            return true;
        }
        let (old, new) = (&xs[t0], &xs[t0 + n_window]);
        t0 += 1;
        if t0 % n_window == 0 {
            g = gram(&xs[t0..t0 + n_window]);
        } else {
            g.ger(-1.0, old, old, 1.0);
            g.ger(1.0, new, new, 1.0);
        }
    }
}

/// Largest `m ≤ m_max` for which the stacked sequence `ξ_m` is persistently
/// exciting over every available window. Scans upward and stops at the
/// first failure.
pub fn sr_order(samples: &[DVector<f64>], m_max: usize, n_window: usize, tol: f64) -> usize {
    let mut order = 0;
    for m in 1..=m_max {
        if !all_windows_full_rank(&stacked(samples, m), n_window, tol) {
            break;
        }
        order = m;
    }
    order
}

pub fn sr_order_scalar(samples: &[f64], m_max: usize, n_window: usize, tol: f64) -> usize {
    let xs: Vec<DVector<f64>> = samples
        .iter()
        .map(|&x| DVector::from_element(1, x))
        .collect();
    sr_order(&xs, m_max, n_window, tol)
}

/// Rank, spectrum and orthonormal basis of the excited subspace of `window`.
pub fn subspace_basis(window: &GramWindow, tol: f64) -> Result<ExcitationReport> {
    if window.is_empty() {
        return Err(Error::EmptyWindow);
    }
    report_from_gram(window.accum(), tol)
}

pub fn report_from_gram(g: &DMatrix<f64>, tol: f64) -> Result<ExcitationReport> {
    check_symmetric(g)?;
    let (values, vectors) = eigen_desc(g);
    let rank = rank_of_sorted(&values, tol);
    let alpha_hat = if rank > 0 { values[rank - 1] } else { 0.0 };
    let basis = vectors.columns(0, rank).into_owned();
    Ok(ExcitationReport {
        rank,
        singular_values: values,
        alpha_hat,
        basis,
    })
}

/// `max |Φᵀθ̃| / (1 + ‖Φ‖)` over the window.
pub fn orthogonality_residual<'a>(
    theta_err: &DVector<f64>,
    window: impl IntoIterator<Item = &'a DVector<f64>>,
) -> Result<f64> {
    let mut worst = 0.0f64;
    for phi in window {
        if phi.len() != theta_err.len() {
            return Err(Error::Dimension {
                expected: theta_err.len(),
                got: phi.len(),
            });
        }
        worst = worst.max(phi.dot(theta_err).abs() / (1.0 + phi.norm()));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(x)
    }

    #[test]
    fn pe_examples() {
        let ones = vec![v(&[1.0]); 6];
        assert!(is_pe(&ones, 2, 2.0));
        let alt: Vec<_> = (0..8)
            .map(|t| if t % 2 == 0 { v(&[1.0, 0.0]) } else { v(&[0.0, 1.0]) })
            .collect();
        assert!(is_pe(&alt, 2, 1.0));
        let diag = vec![v(&[1.0, 1.0]); 10];
        assert!(!is_pe(&diag, 4, 1e-9));
        assert!(!is_pe(&diag, 20, 1e-9));
    }

    #[test]
    fn sr_examples() {
        assert_eq!(sr_order_scalar(&[0.0; 50], 4, 10, DEFAULT_RANK_TOL), 0);
        assert_eq!(sr_order_scalar(&[2.5; 50], 4, 10, DEFAULT_RANK_TOL), 1);
        let s: Vec<f64> = (0..400).map(|t| (0.7 * t as f64).sin()).collect();
        assert_eq!(sr_order_scalar(&s, 5, 40, DEFAULT_RANK_TOL), 2);
    }

    #[test]
    fn sinusoid_sums_have_order_two_per_tone() {
        let freqs = [0.3, 0.9, 1.7];
        for k in 1..=3 {
            let s: Vec<f64> = (0..600)
                .map(|t| freqs[..k].iter().map(|w| (w * t as f64 + 0.2).sin()).sum())
                .collect();
            let order = sr_order_scalar(&s, 2 * k + 2, 120, DEFAULT_RANK_TOL);
            assert_eq!(order, 2 * k, "{k} tones");
        }
    }

    #[test]
    fn summable_perturbation_keeps_order() {
        let w = 2.0 * PI / 25.0;
        let s: Vec<f64> = (0..400).map(|t| (w * t as f64).sin()).collect();
        let p: Vec<f64> = s
            .iter()
            .enumerate()
            .map(|(t, x)| x + 0.5f64.powi(t as i32))
            .collect();
        let a = sr_order_scalar(&s, 5, 50, DEFAULT_RANK_TOL);
        let b = sr_order_scalar(&p, 5, 50, DEFAULT_RANK_TOL);
        assert_eq!(a, 2);
        assert_eq!(a, b);
    }

    #[test]
    fn rank_examples() {
        assert_eq!(numerical_rank(&DMatrix::identity(3, 3), 1e-8).unwrap(), 3);
        let d = DMatrix::from_diagonal(&v(&[1.0, 1e-12]));
        assert_eq!(numerical_rank(&d, 1e-8).unwrap(), 1);
        assert_eq!(numerical_rank(&DMatrix::zeros(3, 3), 1e-8).unwrap(), 0);
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(numerical_rank(&asym, 1e-8), Err(Error::Asymmetric(_))));
    }

    #[test]
    fn basis_examples() {
        let mut w = GramWindow::new(2, 4);
        for s in [1.0, -2.0, 0.5, 3.0] {
            w.push(v(&[s, 0.0])).unwrap();
        }
        let r = subspace_basis(&w, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(r.rank, 1);
        assert!((r.basis[(0, 0)].abs() - 1.0).abs() < 1e-12);
        assert!(r.basis[(1, 0)].abs() < 1e-12);

        let mut w = GramWindow::new(2, 8);
        for t in 0..8 {
            let th = t as f64 * PI / 4.0;
            w.push(v(&[th.cos(), th.sin()])).unwrap();
        }
        let r = subspace_basis(&w, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(r.rank, 2);
        let gram = r.basis.transpose() * &r.basis;
        assert!((gram - DMatrix::<f64>::identity(2, 2)).amax() < 1e-10);

        assert_eq!(
            subspace_basis(&GramWindow::new(2, 4), 1e-6).unwrap_err(),
            Error::EmptyWindow
        );
    }

    #[test]
    fn window_evicts_and_stays_consistent() {
        let mut w = GramWindow::new(3, 5);
        for t in 0..100 {
            let x = t as f64;
            w.push(v(&[x.sin(), (0.3 * x).cos(), 1.0 + 0.01 * x])).unwrap();
            assert!(w.len() <= w.capacity());
            assert!((w.accum() - w.recomputed()).amax() < 1e-10);
        }
        assert!(w.is_full());
        assert!(w.push(v(&[1.0])).is_err());
    }

    #[test]
    fn orthogonality_examples() {
        let win = vec![v(&[1.0, 0.0])];
        assert_eq!(orthogonality_residual(&v(&[0.0, 0.0]), &win).unwrap(), 0.0);
        assert_eq!(orthogonality_residual(&v(&[0.0, 3.0]), &win).unwrap(), 0.0);
        assert_eq!(orthogonality_residual(&v(&[1.0, 0.0]), &win).unwrap(), 0.5);
        assert!(orthogonality_residual(&v(&[1.0]), &win).is_err());
    }
}
