//! Polynomials in the backward-shift operator `q⁻¹`.
//!
//! Index `i` of the coefficient vector holds the `q⁻ⁱ` coefficient, so
//! `A(q⁻¹) = 1 + a₁q⁻¹ + … + a_m q⁻ᵐ` is stored as `[1, a₁, …, a_m]`.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default margin for the minimum-phase check.
pub const DEFAULT_STABILITY_MARGIN: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ShiftPolynomial {
    coeffs: Vec<f64>,
}

impl ShiftPolynomial {
    /// Builds a polynomial from ascending `q⁻¹` coefficients. An empty slice
    /// yields the zero polynomial `(0)`.
    pub fn new(coeffs: impl Into<Vec<f64>>) -> Self {
        let mut coeffs = coeffs.into();
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Self { coeffs }
    }

    pub fn one() -> Self {
        Self::new(vec![1.0])
    }

    pub fn zero() -> Self {
        Self::new(vec![0.0])
    }

    /// `1 + a₁q⁻¹ + … + a_m q⁻ᵐ`
    pub fn monic_from_tail(tail: &[f64]) -> Self {
        let mut coeffs = Vec::with_capacity(tail.len() + 1);
        coeffs.push(1.0);
        coeffs.extend_from_slice(tail);
        Self { coeffs }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeff(&self, i: usize) -> f64 {
        self.coeffs.get(i).copied().unwrap_or(0.0)
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Copy with trailing zero coefficients removed (keeps at least one).
    pub fn normalized(&self) -> Self {
        let mut coeffs = self.coeffs.clone();
        while coeffs.len() > 1 && *coeffs.last().unwrap() == 0.0 {
            coeffs.pop();
        }
        Self { coeffs }
    }

    /// Multiplies by `q⁻ᵈ`.
    pub fn shifted(&self, d: usize) -> Self {
        let mut coeffs = vec![0.0; d];
        coeffs.extend_from_slice(&self.coeffs);
        Self { coeffs }
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// Applies the polynomial to a sequence given newest-first:
    /// `Σ cᵢ x(k−i)` where `lagged(i)` returns `x(k−i)`.
    pub fn apply(&self, lagged: impl Fn(usize) -> f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * lagged(i))
            .sum()
    }

    /// Roots of the forward polynomial `c₀zⁿ + c₁zⁿ⁻¹ + … + cₙ`, i.e. the
    /// zeros of the transfer relation in the `z` domain.
    pub fn forward_roots(&self) -> Vec<(f64, f64)> {
        let p = self.normalized();
        let n = p.degree();
        let lead = p.coeffs[0];
        if n == 0 || lead == 0.0 {
            return Vec::new();
        }
        if n == 1 {
            return vec![(-p.coeffs[1] / lead, 0.0)];
        }
        let mut companion = DMatrix::<f64>::zeros(n, n);
        for j in 0..n {
            companion[(0, j)] = -p.coeffs[j + 1] / lead;
        }
        for i in 1..n {
            companion[(i, i - 1)] = 1.0;
        }
        companion
            .complex_eigenvalues()
            .iter()
            .map(|z| (z.re, z.im))
            .collect()
    }
}

impl fmt::Display for ShiftPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.coeffs.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

pub fn poly_add(p: &ShiftPolynomial, q: &ShiftPolynomial) -> ShiftPolynomial {
    let n = p.coeffs.len().max(q.coeffs.len());
    ShiftPolynomial::new((0..n).map(|i| p.coeff(i) + q.coeff(i)).collect::<Vec<_>>())
}

pub fn poly_mul(p: &ShiftPolynomial, q: &ShiftPolynomial) -> ShiftPolynomial {
    let mut out = vec![0.0; p.coeffs.len() + q.coeffs.len() - 1];
    for (i, a) in p.coeffs.iter().enumerate() {
        for (j, b) in q.coeffs.iter().enumerate() {
            out[i + j] += a * b;
        }
    }
    ShiftPolynomial::new(out)
}

/// Solves `1 = F(q⁻¹)A(q⁻¹) + q⁻ᵈ α(q⁻¹)` by long division of `1` by `A`.
///
/// `F` has degree `d − 1` (the first `d` terms of the power series `1/A`)
/// and `α` has degree `deg(A) − 1` (degree 0 when `A = 1`).
pub fn solve_diophantine(
    a: &ShiftPolynomial,
    d: usize,
) -> Result<(ShiftPolynomial, ShiftPolynomial)> {
    if d == 0 {
        return Err(Error::InvalidDelay(d));
    }
    if a.coeffs[0] != 1.0 {
        return Err(Error::NonMonic(a.coeffs[0]));
    }
    let m1 = a.degree();
    let mut f = vec![0.0; d];
    f[0] = 1.0;
    for j in 1..d {
        let mut acc = 0.0;
        for i in 1..=j.min(m1) {
            acc -= a.coeffs[i] * f[j - i];
        }
        f[j] = acc;
    }
    // Remainder 1 − F·A vanishes below q⁻ᵈ; what is left is q⁻ᵈ α.
    let alpha_len = m1.max(1);
    let mut alpha = vec![0.0; alpha_len];
    for (i, slot) in alpha.iter_mut().enumerate().take(m1) {
        let power = d + i;
        let mut fa = 0.0;
        for (j, fj) in f.iter().enumerate() {
            if power >= j && power - j <= m1 {
                fa += fj * a.coeffs[power - j];
            }
        }
        *slot = -fa;
    }
    Ok((ShiftPolynomial::new(f), ShiftPolynomial::new(alpha)))
}

/// Residual polynomial `F·A + q⁻ᵈα − 1`; identically zero for an exact solve.
pub fn diophantine_residual(
    a: &ShiftPolynomial,
    f: &ShiftPolynomial,
    alpha: &ShiftPolynomial,
    d: usize,
) -> ShiftPolynomial {
    let lhs = poly_add(&poly_mul(f, a), &alpha.shifted(d));
    poly_add(&lhs, &ShiftPolynomial::new(vec![-1.0]))
}

/// Predictor-form coefficients `(α, β = F·B)` for delay `d`.
pub fn predictor_coeffs(
    a: &ShiftPolynomial,
    b: &ShiftPolynomial,
    d: usize,
) -> Result<(ShiftPolynomial, ShiftPolynomial)> {
    if b.coeffs[0] == 0.0 {
        return Err(Error::ZeroLeadingInput);
    }
    let (f, alpha) = solve_diophantine(a, d)?;
    Ok((alpha, poly_mul(&f, b)))
}

/// True iff every zero of `B` has modulus `< 1 − margin`.
pub fn zeros_strictly_inside(b: &ShiftPolynomial, margin: f64) -> bool {
    largest_zero(b).is_none_or(|(_, _, m)| m < 1.0 - margin)
}

/// The zero of `B` with the largest modulus as `(re, im, |z|)`.
pub fn largest_zero(b: &ShiftPolynomial) -> Option<(f64, f64, f64)> {
    b.forward_roots()
        .into_iter()
        .map(|(re, im)| (re, im, re.hypot(im)))
        .max_by(|x, y| x.2.total_cmp(&y.2))
}
