//! Multivariate polynomials of bounded degree in a shifted monomial basis.
//!
//! A [`Polynomial`] of degree bound `N` on `R^n` stores one coefficient per
//! multi-index `|α| ≤ N`, in graded-lexicographic order, with respect to the
//! monomials `(x - c)^α` around its `center` `c`. Degree `-1` denotes the
//! trivial space `{0}`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exponent vector `α ∈ N_0^n`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        MultiIndex(exponents)
    }

    pub fn zero(dim: usize) -> Self {
        MultiIndex(vec![0; dim])
    }

    /// The unit index `e_k`.
    pub fn unit(dim: usize, k: usize) -> Self {
        let mut e = vec![0; dim];
        e[k] = 1;
        MultiIndex(e)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// `|α|`.
    pub fn order(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    /// `α! = Π α_i!`.
    pub fn factorial(&self) -> f64 {
        self.0.iter().map(|&a| factorial(a)).product()
    }

    /// `α - β` when `β ≤ α` componentwise.
    pub fn checked_sub(&self, other: &MultiIndex) -> Option<MultiIndex> {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(&a, &b)| a.checked_sub(b))
            .collect::<Option<Vec<_>>>()
            .map(MultiIndex)
    }

    pub fn add(&self, other: &MultiIndex) -> MultiIndex {
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// `x^α` for a point `x`.
    pub fn monomial(&self, x: &[f64]) -> f64 {
        self.0.iter().zip(x).map(|(&a, &xi)| xi.powi(a as i32)).product()
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

pub(crate) fn factorial(k: u32) -> f64 {
    (1..=k).map(f64::from).product()
}

pub(crate) fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

/// Number of monomials of degree `≤ degree` in `dim` variables.
pub fn basis_len(dim: usize, degree: i32) -> usize {
    if degree < 0 {
        0
    } else {
        binomial((dim as u64) + degree as u64, degree as u64) as usize
    }
}

/// Multi-indices of exact order `d`, lexicographically descending
/// (`x_1^d` first).
pub fn homogeneous_indices(dim: usize, d: u32) -> Vec<MultiIndex> {
    fn rec(dim: usize, left: u32, prefix: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
        if prefix.len() + 1 == dim {
            prefix.push(left);
            out.push(MultiIndex(prefix.clone()));
            prefix.pop();
            return;
        }
        for a in (0..=left).rev() {
            prefix.push(a);
            rec(dim, left - a, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if dim == 0 {
        return out;
    }
    rec(dim, d, &mut Vec::with_capacity(dim), &mut out);
    out
}

/// Graded-lexicographic basis of `P_N` on `R^n`; empty for `N = -1`.
pub fn basis(dim: usize, degree: i32) -> Vec<MultiIndex> {
    (0..=degree.max(-1))
        .flat_map(|d| homogeneous_indices(dim, d as u32))
        .collect()
}

fn position(basis: &[MultiIndex], alpha: &MultiIndex) -> Option<usize> {
    basis.iter().position(|b| b == alpha)
}

/// A ball `B(center, radius)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallSpec {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl BallSpec {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::invalid("radius", format!("must be positive, got {radius}")));
        }
        Ok(BallSpec { center, radius })
    }

    pub fn unit(dim: usize) -> Self {
        BallSpec {
            center: vec![0.0; dim],
            radius: 1.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Exact Lebesgue measure of the ball.
    pub fn volume(&self) -> f64 {
        unit_ball_volume(self.dim()) * self.radius.powi(self.dim() as i32)
    }
}

/// `|B(1)|` in `R^n`, by the recursion `V_n = 2π/n · V_{n-2}`.
pub fn unit_ball_volume(dim: usize) -> f64 {
    match dim {
        0 => 1.0,
        1 => 2.0,
        n => 2.0 * std::f64::consts::PI / n as f64 * unit_ball_volume(n - 2),
    }
}

/// Polynomial of degree at most `degree` in the monomials `(x - center)^α`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "PolynomialRecord", try_from = "PolynomialRecord")]
pub struct Polynomial {
    dim: usize,
    degree: i32,
    center: Vec<f64>,
    coeffs: Vec<f64>,
}

/// Flat `(multi-index, coefficient)` form used for serialization.
#[derive(Serialize, Deserialize)]
struct PolynomialRecord {
    dim: usize,
    degree: i32,
    center: Vec<f64>,
    terms: Vec<(MultiIndex, f64)>,
}

impl From<Polynomial> for PolynomialRecord {
    fn from(p: Polynomial) -> Self {
        PolynomialRecord {
            dim: p.dim,
            degree: p.degree,
            terms: p.terms().map(|(a, c)| (a.clone(), c)).collect(),
            center: p.center,
        }
    }
}

impl TryFrom<PolynomialRecord> for Polynomial {
    type Error = Error;

    fn try_from(r: PolynomialRecord) -> Result<Self> {
        Polynomial::from_terms(r.dim, r.degree, r.center, &r.terms)
    }
}

impl Polynomial {
    pub fn zero(dim: usize, degree: i32) -> Self {
        Self::zero_at(vec![0.0; dim], degree)
    }

    pub fn zero_at(center: Vec<f64>, degree: i32) -> Self {
        let degree = degree.max(-1);
        Polynomial {
            dim: center.len(),
            degree,
            coeffs: vec![0.0; basis_len(center.len(), degree)],
            center,
        }
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        let mut p = Self::zero(dim, 0);
        p.coeffs[0] = c;
        p
    }

    /// Coefficients in `basis(dim, degree)` order.
    pub fn from_coeffs(center: Vec<f64>, degree: i32, coeffs: Vec<f64>) -> Result<Self> {
        let expected = basis_len(center.len(), degree);
        if coeffs.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: coeffs.len(),
            });
        }
        Ok(Polynomial {
            dim: center.len(),
            degree: degree.max(-1),
            center,
            coeffs,
        })
    }

    pub fn from_terms(dim: usize, degree: i32, center: Vec<f64>, terms: &[(MultiIndex, f64)]) -> Result<Self> {
        if center.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: center.len(),
            });
        }
        let mut p = Self::zero_at(center, degree);
        for (alpha, c) in terms {
            p.set_coeff(alpha, *c)?;
        }
        Ok(p)
    }

    /// `c · x^α` around the origin, degree bound `|α|`.
    pub fn monomial(alpha: &MultiIndex, c: f64) -> Self {
        let mut p = Self::zero(alpha.dim(), alpha.order() as i32);
        p.set_coeff(alpha, c).expect("index within degree");
        p
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> i32 {
        self.degree
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn basis(&self) -> Vec<MultiIndex> {
        basis(self.dim, self.degree)
    }

    pub fn terms(&self) -> impl Iterator<Item = (MultiIndex, f64)> + '_ {
        self.basis().into_iter().zip(self.coeffs.iter().copied())
    }

    pub fn coeff(&self, alpha: &MultiIndex) -> f64 {
        if alpha.dim() != self.dim || alpha.order() as i32 > self.degree {
            return 0.0;
        }
        position(&self.basis(), alpha).map_or(0.0, |i| self.coeffs[i])
    }

    pub fn set_coeff(&mut self, alpha: &MultiIndex, c: f64) -> Result<()> {
        if alpha.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: alpha.dim(),
            });
        }
        if alpha.order() as i32 > self.degree {
            return Err(Error::invalid(
                "multi-index",
                format!("{alpha} exceeds degree bound {}", self.degree),
            ));
        }
        let i = position(&self.basis(), alpha).expect("basis contains every admissible index");
        self.coeffs[i] = c;
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64]) -> f64 {
        if self.degree < 0 {
            return 0.0;
        }
        let d = self.degree as usize;
        // powers[i][k] = (x_i - c_i)^k
        let powers: Vec<Vec<f64>> = x
            .iter()
            .zip(&self.center)
            .map(|(&xi, &ci)| {
                let h = xi - ci;
                let mut row = Vec::with_capacity(d + 1);
                let mut acc = 1.0;
                for _ in 0..=d {
                    row.push(acc);
                    acc *= h;
                }
                row
            })
            .collect();
        self.basis()
            .iter()
            .zip(&self.coeffs)
            .map(|(alpha, c)| {
                c * alpha
                    .exponents()
                    .iter()
                    .enumerate()
                    .map(|(i, &a)| powers[i][a as usize])
                    .product::<f64>()
            })
            .sum()
    }

    /// Gradient at `x`.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|k| self.diff(&MultiIndex::unit(self.dim, k)).eval_unchecked(x))
            .collect()
    }

    /// Exact `D^α P`; the degree bound drops to `max(N - |α|, -1)`.
    pub fn diff(&self, alpha: &MultiIndex) -> Polynomial {
        let new_degree = (self.degree - alpha.order() as i32).max(-1);
        let mut out = Polynomial::zero_at(self.center.clone(), new_degree);
        if new_degree < 0 {
            return out;
        }
        let target = out.basis();
        for (beta, c) in self.terms() {
            if c == 0.0 {
                continue;
            }
            if let Some(rest) = beta.checked_sub(alpha) {
                // D^α (x-c)^β = β!/(β-α)! (x-c)^{β-α}
                let factor = beta.factorial() / rest.factorial();
                let i = position(&target, &rest).expect("lower order index present");
                out.coeffs[i] += c * factor;
            }
        }
        out
    }

    /// Same polynomial with a larger (or equal) degree bound.
    pub fn with_degree(&self, degree: i32) -> Polynomial {
        let mut out = Polynomial::zero_at(self.center.clone(), degree.max(self.degree));
        let target = out.basis();
        for (alpha, c) in self.terms() {
            let i = position(&target, &alpha).expect("degree raised");
            out.coeffs[i] = c;
        }
        out
    }

    /// Re-expand around a new center: `(x-c)^β = ((x-c') + (c'-c))^β`.
    pub fn recenter(&self, new_center: &[f64]) -> Result<Polynomial> {
        if new_center.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: new_center.len(),
            });
        }
        let shift: Vec<f64> = new_center.iter().zip(&self.center).map(|(a, b)| a - b).collect();
        let mut out = Polynomial::zero_at(new_center.to_vec(), self.degree);
        let target = out.basis();
        for (beta, c) in self.terms() {
            if c == 0.0 {
                continue;
            }
            for (gi, gamma) in target.iter().enumerate() {
                if let Some(rest) = beta.checked_sub(gamma) {
                    let mut factor = 1.0;
                    for i in 0..self.dim {
                        let b = beta.exponents()[i];
                        let g = gamma.exponents()[i];
                        factor *= binomial(b as u64, g as u64) as f64 * shift[i].powi(rest.exponents()[i] as i32);
                    }
                    out.coeffs[gi] += c * factor;
                }
            }
        }
        Ok(out)
    }

    fn aligned<'a>(&'a self, other: &'a Polynomial) -> Result<std::borrow::Cow<'a, Polynomial>> {
        if other.dim != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        if other.center == self.center {
            Ok(std::borrow::Cow::Borrowed(other))
        } else {
            Ok(std::borrow::Cow::Owned(other.recenter(&self.center)?))
        }
    }

    pub fn add(&self, other: &Polynomial) -> Result<Polynomial> {
        let other = self.aligned(other)?;
        let degree = self.degree.max(other.degree);
        let mut out = self.with_degree(degree);
        let target = out.basis();
        for (alpha, c) in other.terms() {
            let i = position(&target, &alpha).expect("max degree");
            out.coeffs[i] += c;
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Polynomial) -> Result<Polynomial> {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> Polynomial {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|c| *c *= s);
        out
    }

    /// Product truncated to degree `max_degree` (pass `None` for the full product).
    pub fn mul(&self, other: &Polynomial, max_degree: Option<i32>) -> Result<Polynomial> {
        let other = self.aligned(other)?;
        let full = if self.degree < 0 || other.degree < 0 {
            -1
        } else {
            self.degree + other.degree
        };
        let degree = max_degree.map_or(full, |m| m.min(full));
        let mut out = Polynomial::zero_at(self.center.clone(), degree);
        if degree < 0 {
            return Ok(out);
        }
        let target = out.basis();
        let other_terms: Vec<_> = other.terms().filter(|(_, c)| *c != 0.0).collect();
        for (a, ca) in self.terms().filter(|(_, c)| *c != 0.0) {
            for (b, cb) in &other_terms {
                let ab = a.add(b);
                if ab.order() as i32 <= degree {
                    let i = position(&target, &ab).expect("within degree");
                    out.coeffs[i] += ca * cb;
                }
            }
        }
        Ok(out)
    }

    /// The homogeneous part of exact degree `d` (same center).
    pub fn homogeneous_part(&self, d: u32) -> Polynomial {
        let mut out = Polynomial::zero_at(self.center.clone(), self.degree);
        for (i, alpha) in self.basis().iter().enumerate() {
            if alpha.order() == d {
                out.coeffs[i] = self.coeffs[i];
            }
        }
        out
    }

    /// Largest absolute coefficient difference after re-centering `other`.
    pub fn max_coeff_distance(&self, other: &Polynomial) -> Result<f64> {
        Ok(self.sub(other)?.max_abs_coeff())
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (alpha, c) in self.terms() {
            if c == 0.0 {
                continue;
            }
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{c}·(x-c)^{alpha}")?;
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mi(e: &[u32]) -> MultiIndex {
        MultiIndex::new(e.to_vec())
    }

    #[test]
    fn basis_sizes_and_order() {
        let b = basis(1, 1);
        assert_eq!(b, vec![mi(&[0]), mi(&[1])]);
        assert_eq!(basis(2, 1).len(), 3);
        assert_eq!(basis(2, 2).len(), 6);
        assert!(basis(3, -1).is_empty());
        assert_eq!(
            basis(2, 2),
            vec![
                mi(&[0, 0]),
                mi(&[1, 0]),
                mi(&[0, 1]),
                mi(&[2, 0]),
                mi(&[1, 1]),
                mi(&[0, 2])
            ]
        );
        for n in 1..4 {
            for d in -1..5 {
                assert_eq!(basis(n, d).len(), basis_len(n, d));
            }
        }
    }

    #[test]
    fn eval_examples() {
        let one = Polynomial::constant(3, 1.0);
        assert_eq!(one.eval(&[0.3, -7.0, 2.0]).unwrap(), 1.0);
        let p = Polynomial::from_terms(2, 1, vec![0.0, 0.0], &[(mi(&[1, 0]), 1.0), (mi(&[0, 1]), 2.0)]).unwrap();
        assert_eq!(p.eval(&[3.0, 4.0]).unwrap(), 11.0);
        let sq = Polynomial::monomial(&mi(&[2]), 1.0);
        assert_eq!(sq.eval(&[0.5]).unwrap(), 0.25);
        assert!(matches!(
            sq.eval(&[0.5, 1.0]),
            Err(Error::DimensionMismatch { expected: 1, got: 2 })
        ));
    }

    #[test]
    fn diff_examples() {
        let p = Polynomial::monomial(&mi(&[2, 1]), 1.0);
        let d = p.diff(&mi(&[1, 1]));
        assert_eq!(d.coeff(&mi(&[1, 0])), 2.0);
        assert_eq!(d.coeffs().iter().filter(|c| **c != 0.0).count(), 1);
        let c = Polynomial::constant(2, 5.0);
        assert!(c.diff(&mi(&[0, 1])).is_zero());
        assert_eq!(c.diff(&mi(&[0, 1])).degree(), -1);
    }

    #[test]
    fn diff_of_top_degree_monomials_is_kronecker() {
        for alpha in homogeneous_indices(3, 3) {
            for beta in homogeneous_indices(3, 3) {
                let d = Polynomial::monomial(&beta, 1.0).diff(&alpha);
                let expect = if alpha == beta { alpha.factorial() } else { 0.0 };
                assert_eq!(d.coeff(&MultiIndex::zero(3)), expect);
            }
        }
    }

    #[test]
    fn recenter_preserves_values() {
        let p = Polynomial::from_terms(
            2,
            3,
            vec![0.5, -1.0],
            &[
                (mi(&[0, 0]), 1.0),
                (mi(&[2, 1]), -2.0),
                (mi(&[0, 3]), 0.5),
                (mi(&[1, 0]), 3.0),
            ],
        )
        .unwrap();
        let q = p.recenter(&[2.0, 1.5]).unwrap();
        for x in [[0.0, 0.0], [1.0, -2.0], [3.3, 0.7]] {
            let a = p.eval(&x).unwrap();
            let b = q.eval(&x).unwrap();
            assert!((a - b).abs() < 1e-11 * (1.0 + a.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn products_and_sums() {
        let x = Polynomial::monomial(&mi(&[1]), 1.0);
        let one = Polynomial::constant(1, 1.0);
        let xp1 = x.add(&one).unwrap();
        let sq = xp1.mul(&xp1, None).unwrap();
        assert_eq!(sq.coeffs(), &[1.0, 2.0, 1.0]);
        let trunc = xp1.mul(&xp1, Some(1)).unwrap();
        assert_eq!(trunc.coeffs(), &[1.0, 2.0]);
        assert!(xp1.sub(&xp1).unwrap().is_zero());
    }

    #[test]
    fn serde_round_trip_uses_flat_terms() {
        let p = Polynomial::from_terms(2, 1, vec![1.0, 2.0], &[(mi(&[0, 1]), 4.0)]).unwrap();
        let json = serde_json::to_string(&p).unwrap();
        assert!(
            json.contains("\"terms\":[[[0,0],0.0],[[1,0],0.0],[[0,1],4.0]]"),
            "{json}"
        );
        let back: Polynomial = serde_json::from_str(&json).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn ball_volumes() {
        assert_eq!(unit_ball_volume(1), 2.0);
        assert!((unit_ball_volume(2) - std::f64::consts::PI).abs() < 1e-15);
        assert!((unit_ball_volume(3) - 4.0 / 3.0 * std::f64::consts::PI).abs() < 1e-14);
        assert!(BallSpec::new(vec![0.0], 0.0).is_err());
    }
}
