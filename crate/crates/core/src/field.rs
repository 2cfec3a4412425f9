//! Scalar fields on `R^n`: analytic registry entries, sampled grids, and the
//! derived fields built from them (derivatives, sums, products, mollifications).

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::poly::{binomial, MultiIndex, Polynomial};

/// How a field was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldKind {
    Analytic,
    Grid,
    Derived,
}

/// The evaluation contract behind a [`ScalarField`].
pub trait FieldFunction: Send + Sync {
    fn dim(&self) -> usize;

    fn name(&self) -> String;

    fn kind(&self) -> FieldKind {
        FieldKind::Derived
    }

    fn value(&self, x: &[f64]) -> Result<f64>;

    /// `D^α f(x)` when known in closed form.
    fn exact_derivative(&self, _alpha: &MultiIndex, _x: &[f64]) -> Option<Result<f64>> {
        None
    }

    /// Points in `[lo, hi]` where the field (one-dimensional) fails to be smooth.
    fn breakpoints(&self, _lo: f64, _hi: f64) -> Vec<f64> {
        Vec::new()
    }

    /// A known upper bound for `sup |f|`.
    fn sup_bound(&self) -> Option<f64> {
        None
    }

    /// Points worth adding to any base-point sweep (kinks, peaks).
    fn critical_points(&self) -> Vec<Vec<f64>> {
        Vec::new()
    }

    /// Step used by centered differences when no exact derivative exists.
    fn difference_step(&self) -> Option<f64> {
        None
    }
}

/// A real-valued field on `R^n`; cheap to clone.
#[derive(Clone)]
pub struct ScalarField(Arc<dyn FieldFunction>);

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScalarField({}, dim {})", self.0.name(), self.0.dim())
    }
}

impl ScalarField {
    pub fn new<F: FieldFunction + 'static>(f: F) -> Self {
        ScalarField(Arc::new(f))
    }

    /// Field from a closure, without derivative information.
    pub fn from_fn<F>(name: impl Into<String>, dim: usize, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        ScalarField::new(ClosureField {
            name: name.into(),
            dim,
            f: Box::new(f),
        })
    }

    /// Field from a closure that may fail (e.g. outside a sampled domain).
    pub fn from_fallible<F>(name: impl Into<String>, dim: usize, f: F) -> Self
    where
        F: Fn(&[f64]) -> Result<f64> + Send + Sync + 'static,
    {
        ScalarField::new(FallibleField {
            name: name.into(),
            dim,
            f: Box::new(f),
        })
    }

    pub fn polynomial(p: Polynomial) -> Self {
        ScalarField::new(PolynomialField(p))
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        Self::polynomial(Polynomial::constant(dim, c))
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn name(&self) -> String {
        self.0.name()
    }

    pub fn kind(&self) -> FieldKind {
        self.0.kind()
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        self.0.value(x)
    }

    pub fn breakpoints(&self, lo: f64, hi: f64) -> Vec<f64> {
        if self.dim() == 1 {
            self.0.breakpoints(lo, hi)
        } else {
            Vec::new()
        }
    }

    pub fn sup_bound(&self) -> Option<f64> {
        self.0.sup_bound()
    }

    pub fn critical_points(&self) -> Vec<Vec<f64>> {
        self.0.critical_points()
    }

    /// `D^α f(x)`: exact when the field knows it, centered differences otherwise.
    pub fn derivative(&self, alpha: &MultiIndex, x: &[f64]) -> Result<f64> {
        if alpha.order() == 0 {
            return self.eval(x);
        }
        if let Some(v) = self.0.exact_derivative(alpha, x) {
            return v;
        }
        let order = alpha.order() as i32;
        let h = self
            .0
            .difference_step()
            .unwrap_or_else(|| f64::EPSILON.powf(1.0 / (order as f64 + 2.0)) * 2.0);
        centered_difference(self, alpha, x, h)
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        (0..self.dim())
            .map(|k| self.derivative(&MultiIndex::unit(self.dim(), k), x))
            .collect()
    }

    /// The field `D^α f`.
    pub fn derivative_field(&self, alpha: &MultiIndex) -> ScalarField {
        if alpha.order() == 0 {
            return self.clone();
        }
        ScalarField::new(DerivativeField {
            parent: self.clone(),
            alpha: alpha.clone(),
        })
    }

    pub fn partial(&self, k: usize) -> ScalarField {
        self.derivative_field(&MultiIndex::unit(self.dim(), k))
    }

    pub fn add(&self, other: &ScalarField) -> ScalarField {
        ScalarField::new(Combination {
            a: self.clone(),
            b: other.clone(),
            op: Op::Sum(1.0, 1.0),
        })
    }

    pub fn sub(&self, other: &ScalarField) -> ScalarField {
        ScalarField::new(Combination {
            a: self.clone(),
            b: other.clone(),
            op: Op::Sum(1.0, -1.0),
        })
    }

    pub fn scale(&self, s: f64) -> ScalarField {
        ScalarField::new(Combination {
            a: self.clone(),
            b: self.clone(),
            op: Op::Sum(s, 0.0),
        })
    }

    pub fn mul(&self, other: &ScalarField) -> ScalarField {
        ScalarField::new(Combination {
            a: self.clone(),
            b: other.clone(),
            op: Op::Product,
        })
    }

    pub fn add_polynomial(&self, p: &Polynomial) -> ScalarField {
        self.add(&ScalarField::polynomial(p.clone()))
    }

    /// `x ↦ f(x - shift)`.
    pub fn translate(&self, shift: &[f64]) -> ScalarField {
        ScalarField::new(Translated {
            parent: self.clone(),
            shift: shift.to_vec(),
        })
    }
}

/// Tensor centered difference for `D^α` with step `h` on every axis.
fn centered_difference(f: &ScalarField, alpha: &MultiIndex, x: &[f64], h: f64) -> Result<f64> {
    // Stencil offsets per axis: (m/2 - i) h with weight (-1)^i C(m, i) / h^m.
    let axes: Vec<(usize, u32)> = alpha
        .exponents()
        .iter()
        .enumerate()
        .filter(|(_, &m)| m > 0)
        .map(|(k, &m)| (k, m))
        .collect();
    let mut total = 0.0;
    let counts: Vec<u32> = axes.iter().map(|(_, m)| m + 1).collect();
    let n_terms: u32 = counts.iter().product();
    let mut y = x.to_vec();
    for flat in 0..n_terms {
        let mut rest = flat;
        let mut w = 1.0;
        y.copy_from_slice(x);
        for (j, &(k, m)) in axes.iter().enumerate() {
            let i = rest % counts[j];
            rest /= counts[j];
            let sign = if i.is_multiple_of(2) { 1.0 } else { -1.0 };
            w *= sign * binomial(m as u64, i as u64) as f64;
            y[k] += (m as f64 / 2.0 - i as f64) * h;
        }
        total += w * f.eval(&y)?;
    }
    Ok(total / h.powi(alpha.order() as i32))
}

struct ClosureField {
    name: String,
    dim: usize,
    f: Box<dyn Fn(&[f64]) -> f64 + Send + Sync>,
}

impl FieldFunction for ClosureField {
    fn dim(&self) -> usize {
        self.dim
    }
    fn name(&self) -> String {
        self.name.clone()
    }
    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok((self.f)(x))
    }
}

type FallibleFn = Box<dyn Fn(&[f64]) -> Result<f64> + Send + Sync>;

struct FallibleField {
    name: String,
    dim: usize,
    f: FallibleFn,
}

impl FieldFunction for FallibleField {
    fn dim(&self) -> usize {
        self.dim
    }
    fn name(&self) -> String {
        self.name.clone()
    }
    fn value(&self, x: &[f64]) -> Result<f64> {
        (self.f)(x)
    }
}

struct PolynomialField(Polynomial);

impl FieldFunction for PolynomialField {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn name(&self) -> String {
        format!("poly[{}]", self.0)
    }
    fn kind(&self) -> FieldKind {
        FieldKind::Analytic
    }
    fn value(&self, x: &[f64]) -> Result<f64> {
        Ok(self.0.eval_unchecked(x))
    }
    fn exact_derivative(&self, alpha: &MultiIndex, x: &[f64]) -> Option<Result<f64>> {
        Some(Ok(self.0.diff(alpha).eval_unchecked(x)))
    }
}

struct DerivativeField {
    parent: ScalarField,
    alpha: MultiIndex,
}

impl FieldFunction for DerivativeField {
    fn dim(&self) -> usize {
        self.parent.dim()
    }
    fn name(&self) -> String {
        format!("D^{}[{}]", self.alpha, self.parent.name())
    }
    fn value(&self, x: &[f64]) -> Result<f64> {
        self.parent.derivative(&self.alpha, x)
    }
    fn exact_derivative(&self, beta: &MultiIndex, x: &[f64]) -> Option<Result<f64>> {
        let total = self.alpha.add(beta);
        self.parent.0.exact_derivative(&total, x)
    }
    fn breakpoints(&self, lo: f64, hi: f64) -> Vec<f64> {
        self.parent.breakpoints(lo, hi)
    }
    fn critical_points(&self) -> Vec<Vec<f64>> {
        self.parent.critical_points()
    }
    fn difference_step(&self) -> Option<f64> {
        self.parent.0.difference_step()
    }
}

enum Op {
    Sum(f64, f64),
    Product,
}

struct Combination {
    a: ScalarField,
    b: ScalarField,
    op: Op,
}

impl FieldFunction for Combination {
    fn dim(&self) -> usize {
        self.a.dim()
    }
    fn name(&self) -> String {
        match self.op {
            Op::Sum(s, 0.0) => format!("{s}*{}", self.a.name()),
            Op::Sum(s, t) => format!("{s}*{} + {t}*{}", self.a.name(), self.b.name()),
            Op::Product => format!("{}*{}", self.a.name(), self.b.name()),
        }
    }
    fn value(&self, x: &[f64]) -> Result<f64> {
        match self.op {
            Op::Sum(s, t) if t == 0.0 => Ok(s * self.a.eval(x)?),
            Op::Sum(s, t) => Ok(s * self.a.eval(x)? + t * self.b.eval(x)?),
            Op::Product => Ok(self.a.eval(x)? * self.b.eval(x)?),
        }
    }
    fn exact_derivative(&self, alpha: &MultiIndex, x: &[f64]) -> Option<Result<f64>> {
        match self.op {
            Op::Sum(s, t) => {
                let da = self.a.0.exact_derivative(alpha, x)?;
                if t == 0.0 {
                    return Some(da.map(|v| s * v));
                }
                let db = self.b.0.exact_derivative(alpha, x)?;
                Some(da.and_then(|a| db.map(|b| s * a + t * b)))
            }
            Op::Product if alpha.order() == 1 => {
                let da = self.a.0.exact_derivative(alpha, x)?;
                let db = self.b.0.exact_derivative(alpha, x)?;
                Some((|| Ok(da? * self.b.eval(x)? + self.a.eval(x)? * db?))())
            }
            Op::Product => None,
        }
    }
    fn breakpoints(&self, lo: f64, hi: f64) -> Vec<f64> {
        let mut b = self.a.breakpoints(lo, hi);
        b.extend(self.b.breakpoints(lo, hi));
        b
    }
    fn sup_bound(&self) -> Option<f64> {
        let a = self.a.sup_bound()?;
        match self.op {
            Op::Sum(s, t) if t == 0.0 => Some(s.abs() * a),
            Op::Sum(s, t) => Some(s.abs() * a + t.abs() * self.b.sup_bound()?),
            Op::Product => Some(a * self.b.sup_bound()?),
        }
    }
    fn critical_points(&self) -> Vec<Vec<f64>> {
        let mut c = self.a.critical_points();
        c.extend(self.b.critical_points());
        c
    }
    fn difference_step(&self) -> Option<f64> {
        match (self.a.0.difference_step(), self.b.0.difference_step()) {
            (Some(a), Some(b)) => Some(a.max(b)),
            (a, b) => a.or(b),
        }
    }
}

struct Translated {
    parent: ScalarField,
    shift: Vec<f64>,
}

impl Translated {
    fn back(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.shift).map(|(a, b)| a - b).collect()
    }
}

impl FieldFunction for Translated {
    fn dim(&self) -> usize {
        self.parent.dim()
    }
    fn name(&self) -> String {
        format!("{}(x - {:?})", self.parent.name(), self.shift)
    }
    fn kind(&self) -> FieldKind {
        self.parent.kind()
    }
    fn value(&self, x: &[f64]) -> Result<f64> {
        self.parent.eval(&self.back(x))
    }
    fn exact_derivative(&self, alpha: &MultiIndex, x: &[f64]) -> Option<Result<f64>> {
        self.parent.0.exact_derivative(alpha, &self.back(x))
    }
    fn breakpoints(&self, lo: f64, hi: f64) -> Vec<f64> {
        let s = self.shift[0];
        self.parent
            .breakpoints(lo - s, hi - s)
            .into_iter()
            .map(|b| b + s)
            .collect()
    }
    fn sup_bound(&self) -> Option<f64> {
        self.parent.sup_bound()
    }
    fn critical_points(&self) -> Vec<Vec<f64>> {
        self.parent
            .critical_points()
            .into_iter()
            .map(|c| c.iter().zip(&self.shift).map(|(a, b)| a + b).collect())
            .collect()
    }
    fn difference_step(&self) -> Option<f64> {
        self.parent.0.difference_step()
    }
}
