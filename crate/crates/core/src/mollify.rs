//! The standard mollifier, generalized means `[f]^α_{x,r} = (f * D^α φ_r)(x)`,
//! the moment projections `P^N_{x0,r}` and `Ṗ^N_{x0,r}`, and mollification.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{FieldFunction, ScalarField};
use crate::poly::{basis, unit_ball_volume, BallSpec, MultiIndex, Polynomial};
use crate::quadrature::{composite_gauss, BallQuadrature, QuadratureSpec, ReferenceRule};

/// `φ(x) = C_n exp(-1/(1-|x|²))` on `|x| < 1`, normalized to unit mass.
#[derive(Clone, Debug)]
pub struct Mollifier {
    dim: usize,
    scale: f64,
}

impl Mollifier {
    pub fn new(dim: usize) -> Self {
        // ∫_{B(1)} exp(-1/(1-|x|²)) = n |B(1)| ∫_0^1 ρ^{n-1} exp(-1/(1-ρ²)) dρ
        let edges: Vec<f64> = (0..=64).map(|i| i as f64 / 64.0).collect();
        let (rho, w) = composite_gauss(16, &edges);
        let radial: f64 = rho
            .iter()
            .zip(&w)
            .map(|(&r, &w)| w * r.powi(dim as i32 - 1) * bump(r * r))
            .sum();
        let mass = dim as f64 * unit_ball_volume(dim) * radial;
        Mollifier { dim, scale: 1.0 / mass }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The normalization constant `C_n`.
    pub fn constant(&self) -> f64 {
        self.scale
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        self.scale * bump(y.iter().map(|v| v * v).sum())
    }

    /// `φ_r(y) = r^{-n} φ(y / r)`.
    pub fn eval_scaled(&self, y: &[f64], r: f64) -> f64 {
        let s: f64 = y.iter().map(|v| (v / r) * (v / r)).sum();
        self.scale * bump(s) / r.powi(self.dim as i32)
    }

    /// All derivatives `D^α φ(y)` for `α` in `basis(n, order)` order.
    pub fn derivatives(&self, y: &[f64], order: u32) -> Vec<f64> {
        let jet = JetAlgebra::new(self.dim, order);
        let mut out = jet.bump_jet(y);
        for (v, alpha) in out.iter_mut().zip(&jet.indices) {
            *v *= self.scale * alpha.factorial();
        }
        out
    }

    pub fn derivative(&self, alpha: &MultiIndex, y: &[f64]) -> f64 {
        let jet = JetAlgebra::new(self.dim, alpha.order());
        let i = jet.position(alpha);
        self.derivatives(y, alpha.order())[i]
    }
}

fn bump(s: f64) -> f64 {
    if s < 1.0 {
        (-1.0 / (1.0 - s)).exp()
    } else {
        0.0
    }
}

/// Truncated Taylor polynomials in `n` variables up to a fixed degree, stored
/// densely in graded-lex order.
pub(crate) struct JetAlgebra {
    indices: Vec<MultiIndex>,
    products: Vec<(usize, usize, usize)>,
}

impl JetAlgebra {
    pub(crate) fn new(dim: usize, degree: u32) -> Self {
        let indices = basis(dim, degree as i32);
        let mut products = Vec::new();
        for (i, a) in indices.iter().enumerate() {
            for (j, b) in indices.iter().enumerate() {
                if a.order() + b.order() <= degree {
                    let ab = a.add(b);
                    let k = indices.iter().position(|c| *c == ab).expect("in basis");
                    products.push((i, j, k));
                }
            }
        }
        JetAlgebra { indices, products }
    }

    pub(crate) fn position(&self, alpha: &MultiIndex) -> usize {
        self.indices.iter().position(|a| a == alpha).expect("in basis")
    }

    fn mul(&self, a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; a.len()];
        for &(i, j, k) in &self.products {
            out[k] += a[i] * b[j];
        }
        out
    }

    /// `Σ_{k ≤ d} c_k u^k` for a jet `u` without constant term.
    fn series(&self, u: &[f64], mut coeffs: impl FnMut(usize) -> f64) -> Vec<f64> {
        let degree = self.indices.last().map_or(0, |a| a.order()) as usize;
        let mut out = vec![0.0; u.len()];
        out[0] = coeffs(0);
        let mut power = vec![0.0; u.len()];
        power[0] = 1.0;
        for k in 1..=degree {
            power = self.mul(&power, u);
            let c = coeffs(k);
            for (o, p) in out.iter_mut().zip(&power) {
                *o += c * p;
            }
        }
        out
    }

    /// Taylor coefficients of `exp(-1/(1-|x|²))` at `y` (not yet times `α!`).
    pub(crate) fn bump_jet(&self, y: &[f64]) -> Vec<f64> {
        let len = self.indices.len();
        let w0 = 1.0 - y.iter().map(|v| v * v).sum::<f64>();
        // exp(-1/w0) / w0^{2d} underflows long before it could matter.
        if w0 <= 1e-2 {
            return vec![0.0; len];
        }
        // u = (w - w0) / w0 with w(h) = 1 - |y + h|² = w0 - 2 y·h - |h|².
        let mut u = vec![0.0; len];
        for (i, a) in self.indices.iter().enumerate() {
            let e = a.exponents();
            match a.order() {
                1 => {
                    let k = e.iter().position(|&x| x == 1).expect("unit index");
                    u[i] = -2.0 * y[k] / w0;
                }
                2 if e.contains(&2) => u[i] = -1.0 / w0,
                _ => {}
            }
        }
        // 1/w - 1/w0 = (1/w0) Σ_{k≥1} (-u)^k, so exp(-(1/w - 1/w0)) = exp(v).
        let geometric = self.series(&u, |k| if k == 0 { 0.0 } else { -(-1f64).powi(k as i32) });
        let v: Vec<f64> = geometric.iter().map(|g| g / w0).collect();
        let mut fact = 1.0;
        let exp_series = self.series(&v, |k| {
            if k > 0 {
                fact /= k as f64;
            }
            fact
        });
        let base = (-1.0 / w0).exp();
        exp_series.iter().map(|c| c * base).collect()
    }
}

/// Per-rule tables: `kernel[i][α] = w_i (D^α φ)(-η_i)` and the moment matrix
/// `T_{αβ} = Σ_i kernel[i][α] η_i^β` of the scaled basis `((x-x0)/r)^β`.
struct KernelTable {
    rule: Arc<ReferenceRule>,
    len: usize,
    kernel: Vec<f64>,
    monomials: Vec<f64>,
    moments: DMatrix<f64>,
}

impl KernelTable {
    fn build(mollifier: &Mollifier, rule: Arc<ReferenceRule>, order: u32) -> Self {
        let dim = rule.dim();
        let indices = basis(dim, order as i32);
        let len = indices.len();
        let jet = JetAlgebra::new(dim, order);
        let factorials: Vec<f64> = indices.iter().map(|a| a.factorial()).collect();
        let mut kernel = Vec::with_capacity(rule.len() * len);
        let mut monomials = Vec::with_capacity(rule.len() * len);
        let mut neg = vec![0.0; dim];
        for (i, w) in rule.weights().iter().enumerate() {
            let eta = rule.node(i);
            for (n, e) in neg.iter_mut().zip(eta) {
                *n = -e;
            }
            let coeffs = jet.bump_jet(&neg);
            for (c, f) in coeffs.iter().zip(&factorials) {
                kernel.push(w * mollifier.scale * c * f);
            }
            monomials.extend(indices.iter().map(|b| b.monomial(eta)));
        }
        let mut moments = DMatrix::zeros(len, len);
        for i in 0..rule.len() {
            let k = &kernel[i * len..(i + 1) * len];
            let m = &monomials[i * len..(i + 1) * len];
            for a in 0..len {
                for b in 0..len {
                    moments[(a, b)] += k[a] * m[b];
                }
            }
        }
        KernelTable {
            rule,
            len,
            kernel,
            monomials,
            moments,
        }
    }

    /// Scaled means `r^{|α|} [f]^α_{x0,r}` for the first `count` indices.
    fn scaled_means(&self, f: &ScalarField, ball: &BallSpec, count: usize) -> Result<Vec<f64>> {
        let mut out = vec![0.0; count];
        let mut x = vec![0.0; ball.dim()];
        for i in 0..self.rule.len() {
            let k = &self.kernel[i * self.len..i * self.len + count];
            if k.iter().all(|&v| v == 0.0) {
                continue;
            }
            self.rule.map_node(i, ball, &mut x);
            let fx = f.eval(&x)?;
            for (o, kv) in out.iter_mut().zip(k) {
                *o += kv * fx;
            }
        }
        Ok(out)
    }

    fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let l = rhs.len();
        let t = self.moments.view((0, 0), (l, l)).into_owned();
        t.lu()
            .solve(&DVector::from_column_slice(rhs))
            .map(|v| v.as_slice().to_vec())
            .ok_or(Error::SingularSystem {
                context: "moment projection",
            })
    }
}

/// Convergence record of [`Means::asymptotic_poly`].
#[derive(Clone, Debug, Serialize)]
pub struct AsymptoticReport {
    pub polynomial: Polynomial,
    /// `(j, max coefficient change from scale 2^{j-1} to 2^j)`.
    pub increments: Vec<(i32, f64)>,
    pub converged: bool,
    /// Geometric extrapolation of the remaining increments.
    pub tail_estimate: f64,
}

/// Generalized means and moment projections for one dimension and degree cap.
#[derive(Clone)]
pub struct Means {
    mollifier: Mollifier,
    quad: BallQuadrature,
    max_order: u32,
    table: Arc<KernelTable>,
}

impl std::fmt::Debug for Means {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Means")
            .field("dim", &self.dim())
            .field("max_order", &self.max_order)
            .field("quadrature", self.quad.spec())
            .finish()
    }
}

impl Means {
    pub fn new(dim: usize, max_order: u32) -> Self {
        Self::with_quadrature(BallQuadrature::default_for(dim), max_order)
    }

    pub fn with_spec(dim: usize, spec: QuadratureSpec, max_order: u32) -> Result<Self> {
        Ok(Self::with_quadrature(BallQuadrature::new(dim, spec)?, max_order))
    }

    pub fn with_quadrature(quad: BallQuadrature, max_order: u32) -> Self {
        let mollifier = Mollifier::new(quad.dim());
        let table = Arc::new(KernelTable::build(&mollifier, quad.rule().clone(), max_order));
        Means {
            mollifier,
            quad,
            max_order,
            table,
        }
    }

    pub fn dim(&self) -> usize {
        self.quad.dim()
    }

    pub fn max_order(&self) -> u32 {
        self.max_order
    }

    pub fn mollifier(&self) -> &Mollifier {
        &self.mollifier
    }

    pub fn quadrature(&self) -> &BallQuadrature {
        &self.quad
    }

    fn check(&self, f: &ScalarField, x0: &[f64], r: f64, order: i32) -> Result<BallSpec> {
        if f.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: f.dim(),
            });
        }
        if x0.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x0.len(),
            });
        }
        if order > self.max_order as i32 {
            return Err(Error::invalid(
                "N",
                format!("degree {order} exceeds the configured maximum {}", self.max_order),
            ));
        }
        BallSpec::new(x0.to_vec(), r)
    }

    /// Kernel table for `ball`, rebuilt with split panels when `f` has kinks inside.
    fn table_for(&self, f: &ScalarField, ball: &BallSpec) -> Arc<KernelTable> {
        if self.dim() != 1 {
            return self.table.clone();
        }
        let c = ball.center[0];
        let breaks = f.breakpoints(c - ball.radius, c + ball.radius);
        let rule = self.quad.rule_with_breaks(ball, &breaks);
        if Arc::ptr_eq(&rule, self.quad.rule()) {
            self.table.clone()
        } else {
            Arc::new(KernelTable::build(&self.mollifier, rule, self.max_order))
        }
    }

    /// `[f]^α_{x0,r}` for every `α` in `basis(n, N)`.
    pub fn means(&self, f: &ScalarField, x0: &[f64], r: f64, order: u32) -> Result<Vec<f64>> {
        let ball = self.check(f, x0, r, order as i32)?;
        let table = self.table_for(f, &ball);
        let indices = basis(self.dim(), order as i32);
        let scaled = table.scaled_means(f, &ball, indices.len())?;
        Ok(scaled
            .iter()
            .zip(&indices)
            .map(|(m, a)| m / r.powi(a.order() as i32))
            .collect())
    }

    pub fn gen_mean(&self, f: &ScalarField, alpha: &MultiIndex, x0: &[f64], r: f64) -> Result<f64> {
        let all = self.means(f, x0, r, alpha.order())?;
        let i = basis(self.dim(), alpha.order() as i32)
            .iter()
            .position(|a| a == alpha)
            .ok_or_else(|| Error::invalid("alpha", "dimension does not match the field"))?;
        Ok(all[i])
    }

    /// `P^N_{x0,r}(f)`: the polynomial with `[f - P]^α_{x0,r} = 0` for all `|α| ≤ N`,
    /// centered at `x0`.
    pub fn project(&self, f: &ScalarField, x0: &[f64], r: f64, order: u32) -> Result<Polynomial> {
        let ball = self.check(f, x0, r, order as i32)?;
        let table = self.table_for(f, &ball);
        let indices = basis(self.dim(), order as i32);
        let rhs = table.scaled_means(f, &ball, indices.len())?;
        let c = table.solve(&rhs)?;
        let coeffs = c
            .iter()
            .zip(&indices)
            .map(|(c, b)| c / r.powi(b.order() as i32))
            .collect();
        Polynomial::from_coeffs(x0.to_vec(), order as i32, coeffs)
    }

    /// 2-norm condition number of the moment matrix for degree `N`.
    pub fn condition_number(&self, order: u32) -> f64 {
        let l = basis(self.dim(), order as i32).len();
        let t = self.table.moments.view((0, 0), (l, l)).into_owned();
        let sv = t.singular_values();
        sv.max() / sv.min()
    }

    /// `(P^{N-|β|}_{x0,r}(D^β f), D^β P^N_{x0,r}(f))`.
    pub fn project_commutes_check(
        &self,
        f: &ScalarField,
        x0: &[f64],
        r: f64,
        order: u32,
        beta: &MultiIndex,
    ) -> Result<(Polynomial, Polynomial)> {
        if beta.order() > order {
            return Err(Error::invalid("beta", "need |β| ≤ N"));
        }
        let lhs = self.project(&f.derivative_field(beta), x0, r, order - beta.order())?;
        let rhs = self.project(f, x0, r, order)?.diff(beta);
        Ok((lhs, rhs))
    }

    /// `Ṗ^N_{x0,r}(f)(x) = Σ_{|α|=N} [f]^α_{x0,r} x^α / α!`, centered at the origin.
    pub fn project_homog(&self, f: &ScalarField, x0: &[f64], r: f64, order: u32) -> Result<Polynomial> {
        let all = self.means(f, x0, r, order)?;
        let indices = basis(self.dim(), order as i32);
        let terms: Vec<(MultiIndex, f64)> = indices
            .iter()
            .zip(&all)
            .filter(|(a, _)| a.order() == order)
            .map(|(a, m)| (a.clone(), m / a.factorial()))
            .collect();
        Polynomial::from_terms(self.dim(), order as i32, vec![0.0; self.dim()], &terms)
    }

    /// Follows `Ṗ^N_{x0,2^j}(f)` for `j = j_lo..=j_hi`; converged once three
    /// consecutive increments fall below `1e-6` of the leading coefficient
    /// (or below `abs_tol` when that coefficient vanishes).
    pub fn asymptotic_poly(
        &self,
        f: &ScalarField,
        x0: &[f64],
        order: u32,
        j_lo: i32,
        j_hi: i32,
        abs_tol: f64,
    ) -> Result<AsymptoticReport> {
        if j_hi < j_lo + 3 {
            return Err(Error::invalid("window", "need at least four scales"));
        }
        let mut prev = self.project_homog(f, x0, 2f64.powi(j_lo), order)?;
        let mut increments = Vec::new();
        for j in j_lo + 1..=j_hi {
            let next = self.project_homog(f, x0, 2f64.powi(j), order)?;
            increments.push((j, next.max_coeff_distance(&prev)?));
            prev = next;
        }
        let lead = prev.max_abs_coeff();
        let tol = (1e-6 * lead).max(abs_tol);
        let last: Vec<f64> = increments.iter().rev().take(3).map(|(_, d)| *d).collect();
        let converged = last.iter().all(|&d| d < tol);
        // Ratio of the last two increments, capped so the tail stays finite.
        let ratio = if last[1] > 0.0 {
            (last[0] / last[1]).min(0.9)
        } else {
            0.0
        };
        let tail_estimate = last[0] * ratio / (1.0 - ratio);
        if !converged && last[0] >= last[1] && last[1] >= last[2] && last[0] > tol {
            return Err(Error::Divergence {
                context: "asymptotic polynomial",
                detail: format!("increments {:?} do not decay", last),
            });
        }
        Ok(AsymptoticReport {
            polynomial: prev,
            increments,
            converged,
            tail_estimate,
        })
    }

    /// `f_ε = f * φ_ε`; derivatives are exact means `[f]^α_{x,ε}`.
    pub fn mollify(&self, f: &ScalarField, eps: f64) -> Result<ScalarField> {
        if !(eps > 0.0) {
            return Err(Error::invalid("eps", format!("must be positive, got {eps}")));
        }
        if f.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: f.dim(),
            });
        }
        Ok(ScalarField::new(Mollified {
            f: f.clone(),
            eps,
            means: self.clone(),
        }))
    }

    /// `‖P^N_{0,1}‖` as an operator on `L^p(B(1))`: exact for `p = 2`, a Hölder
    /// upper bound `‖ ‖K(·,η)‖_p ‖_{p'}` otherwise.
    pub fn projection_operator_norm(&self, order: u32, p: f64) -> Result<f64> {
        if order > self.max_order {
            return Err(Error::invalid("N", "exceeds configured maximum"));
        }
        if !(p >= 1.0) {
            return Err(Error::invalid("p", "need p ≥ 1"));
        }
        let t = &self.table;
        let l = basis(self.dim(), order as i32).len();
        let inv = t
            .moments
            .view((0, 0), (l, l))
            .into_owned()
            .try_inverse()
            .ok_or(Error::SingularSystem {
                context: "moment projection",
            })?;
        let rule = &t.rule;
        let w = rule.weights();
        // b_i = T^{-1} k(η_i), where kernel rows carry the weight w_i.
        let rows: Vec<DVector<f64>> = (0..rule.len())
            .map(|i| {
                let k = DVector::from_iterator(l, t.kernel[i * t.len..i * t.len + l].iter().map(|v| v / w[i]));
                &inv * k
            })
            .collect();
        if p == 2.0 {
            let mut gram = DMatrix::zeros(l, l);
            let mut m = DMatrix::zeros(l, l);
            for i in 0..rule.len() {
                let e = DVector::from_column_slice(&t.monomials[i * t.len..i * t.len + l]);
                gram += w[i] * &e * e.transpose();
                m += w[i] * &rows[i] * rows[i].transpose();
            }
            let chol = gram
                .cholesky()
                .ok_or(Error::SingularSystem { context: "Gram matrix" })?;
            let lmat = chol.l();
            let sym = lmat.transpose() * m * &lmat;
            let eig = SymmetricEigen::new(sym);
            return Ok(eig.eigenvalues.max().max(0.0).sqrt());
        }
        // ‖K(·,η)‖_{L^p_x} for each η, then its L^{p'} norm in η.
        let kx: Vec<f64> = rows
            .iter()
            .map(|b| {
                let mut acc = 0.0;
                for i in 0..rule.len() {
                    let e = &t.monomials[i * t.len..i * t.len + l];
                    let v: f64 = e.iter().zip(b.iter()).map(|(a, c)| a * c).sum();
                    acc += w[i] * v.abs().powf(p);
                }
                acc.powf(1.0 / p)
            })
            .collect();
        let q = p / (p - 1.0);
        Ok(if q.is_infinite() {
            kx.iter().cloned().fold(0.0, f64::max)
        } else {
            kx.iter().zip(w).map(|(k, w)| w * k.powf(q)).sum::<f64>().powf(1.0 / q)
        })
    }

    /// `1 + ‖P^N_{0,1}‖_p`, the constant in `‖f - P^N f‖ ≤ c inf_Q ‖f - Q‖`.
    pub fn sandwich_constant(&self, order: u32, p: f64) -> Result<f64> {
        Ok(1.0 + self.projection_operator_norm(order, p)?)
    }
}

struct Mollified {
    f: ScalarField,
    eps: f64,
    means: Means,
}

impl FieldFunction for Mollified {
    fn dim(&self) -> usize {
        self.f.dim()
    }
    fn name(&self) -> String {
        format!("{} * φ_{}", self.f.name(), self.eps)
    }
    fn value(&self, x: &[f64]) -> Result<f64> {
        self.means.gen_mean(&self.f, &MultiIndex::zero(x.len()), x, self.eps)
    }
    fn exact_derivative(&self, alpha: &MultiIndex, x: &[f64]) -> Option<Result<f64>> {
        if alpha.order() > self.means.max_order {
            return None;
        }
        Some(self.means.gen_mean(&self.f, alpha, x, self.eps))
    }
    fn sup_bound(&self) -> Option<f64> {
        self.f.sup_bound()
    }
    fn critical_points(&self) -> Vec<Vec<f64>> {
        self.f.critical_points()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn monomial_field(exps: Vec<u32>, c: f64) -> ScalarField {
        ScalarField::polynomial(Polynomial::monomial(&MultiIndex::new(exps), c))
    }

    #[test]
    fn mollifier_has_unit_mass_under_default_rules() {
        for dim in 1..=2 {
            let m = Mollifier::new(dim);
            let quad = BallQuadrature::default_for(dim);
            let mass = quad.integrate(&BallSpec::unit(dim), |x| m.eval(x));
            assert!((mass - 1.0).abs() < 1e-8, "dim {dim}: {mass}");
        }
    }

    #[test]
    fn jet_derivatives_match_differences() {
        let m = Mollifier::new(2);
        let y = [0.3, -0.2];
        let d = m.derivatives(&y, 3);
        let idx = basis(2, 3);
        let h = 1e-4;
        let f = |a: f64, b: f64| m.eval(&[a, b]);
        let dx = (f(y[0] + h, y[1]) - f(y[0] - h, y[1])) / (2.0 * h);
        let dxy = (f(y[0] + h, y[1] + h) - f(y[0] + h, y[1] - h) - f(y[0] - h, y[1] + h) + f(y[0] - h, y[1] - h))
            / (4.0 * h * h);
        let pos = |e: Vec<u32>| idx.iter().position(|a| *a == MultiIndex::new(e.clone())).unwrap();
        assert!((d[0] - m.eval(&y)).abs() < 1e-14);
        assert!((d[pos(vec![1, 0])] - dx).abs() < 1e-7);
        assert!((d[pos(vec![1, 1])] - dxy).abs() < 1e-5);
        let dxxx = {
            let g = |a: f64| f(a, y[1]);
            (g(y[0] + 2.0 * h) - 2.0 * g(y[0] + h) + 2.0 * g(y[0] - h) - g(y[0] - 2.0 * h)) / (2.0 * h.powi(3))
        };
        assert!((d[pos(vec![3, 0])] - dxxx).abs() < 1e-3 * dxxx.abs().max(1.0));
    }

    #[test]
    fn means_of_constants_and_linear_functions() {
        let means = Means::new(1, 3);
        let c = ScalarField::constant(1, 2.5);
        let all = means.means(&c, &[0.3], 0.7, 3).unwrap();
        assert!((all[0] - 2.5).abs() < 1e-9);
        for m in &all[1..] {
            assert!(m.abs() < 1e-9);
        }
        let lin = monomial_field(vec![1], -1.75);
        let slope = means.gen_mean(&lin, &MultiIndex::new(vec![1]), &[4.0], 0.3).unwrap();
        assert!((slope + 1.75).abs() < 1e-9);
    }

    #[test]
    fn projection_of_square_matches_moment_system() {
        // Oracle: [x²]^0 = ∫ y² φ(y) dy = M2 and [x²]^1 = ∫ 2y φ(y) dy = 0 (integrating by
        // parts), with M2 computed by a fine trapezoid rule; P = M2 + 0·x.
        let m = Mollifier::new(1);
        let n = 200_000;
        let h = 2.0 / n as f64;
        let m2: f64 = (1..n)
            .map(|i| {
                let y = -1.0 + i as f64 * h;
                y * y * m.eval(&[y]) * h
            })
            .sum();
        let means = Means::new(1, 2);
        let p = means.project(&monomial_field(vec![2], 1.0), &[0.0], 1.0, 1).unwrap();
        assert!((p.coeffs()[0] - m2).abs() < 1e-9, "{} vs {m2}", p.coeffs()[0]);
        assert!(p.coeffs()[1].abs() < 1e-12);
    }

    #[test]
    fn projection_reproduces_polynomials() {
        let means = Means::new(2, 3);
        let q =
            Polynomial::from_coeffs(vec![0.5, -1.0], 3, (0..10).map(|i| (i as f64 * 0.37).sin()).collect()).unwrap();
        let f = ScalarField::polynomial(q.clone());
        let p = means.project(&f, &[1.0, 2.0], 0.25, 3).unwrap();
        assert!(p.max_coeff_distance(&q).unwrap() < 1e-9);
    }

    #[test]
    fn commutation_with_derivatives() {
        let means = Means::new(1, 3);
        let f = monomial_field(vec![3], 1.0);
        let (a, b) = means
            .project_commutes_check(&f, &[0.4], 0.8, 2, &MultiIndex::new(vec![1]))
            .unwrap();
        assert!(a.max_coeff_distance(&b).unwrap() < 1e-10);
    }

    #[test]
    fn homogeneous_projection_examples() {
        let means = Means::new(1, 2);
        let p = means
            .project_homog(&monomial_field(vec![2], 1.0), &[1.0], 1.0, 1)
            .unwrap();
        assert!((p.coeff(&MultiIndex::new(vec![1])) - 2.0).abs() < 1e-9);
        assert_eq!(p.coeff(&MultiIndex::new(vec![0])), 0.0);
    }

    #[test]
    fn asymptotic_slope_of_linear_plus_sine() {
        let means = Means::new(1, 1);
        let f = ScalarField::from_fn("1.5x+sin", 1, |x| 1.5 * x[0] + x[0].sin());
        let rep = means.asymptotic_poly(&f, &[0.0], 1, 0, 26, 1e-9).unwrap();
        assert!(rep.converged);
        assert!((rep.polynomial.coeff(&MultiIndex::new(vec![1])) - 1.5).abs() < 1e-6);
        let other = means.asymptotic_poly(&f, &[3.0], 1, 0, 26, 1e-9).unwrap();
        assert!(rep.polynomial.max_coeff_distance(&other.polynomial).unwrap() < 1e-6);
    }

    #[test]
    fn mollified_step_matches_direct_convolution() {
        let means = Means::new(1, 1);
        struct Step;
        impl FieldFunction for Step {
            fn dim(&self) -> usize {
                1
            }
            fn name(&self) -> String {
                "step".into()
            }
            fn value(&self, x: &[f64]) -> Result<f64> {
                Ok(if x[0] >= 0.0 { 1.0 } else { 0.0 })
            }
            fn breakpoints(&self, lo: f64, hi: f64) -> Vec<f64> {
                if lo < 0.0 && 0.0 < hi {
                    vec![0.0]
                } else {
                    vec![]
                }
            }
        }
        let step = ScalarField::new(Step);
        let smooth = means.mollify(&step, 0.1).unwrap();
        let m = Mollifier::new(1);
        for &x in &[-0.12, -0.05, 0.0, 0.03, 0.08, 0.11] {
            // f_ε(x) = ∫_{-∞}^{x/ε} φ(t) dt
            let upper = (x / 0.1f64).clamp(-1.0, 1.0);
            let n = 100_000;
            let h = (upper + 1.0) / n as f64;
            let direct: f64 = (0..n).map(|i| m.eval(&[-1.0 + (i as f64 + 0.5) * h]) * h).sum();
            let v = smooth.eval(&[x]).unwrap();
            assert!((v - direct).abs() < 1e-8, "x={x}: {v} vs {direct}");
        }
        assert_eq!(smooth.eval(&[-0.2]).unwrap(), 0.0);
        assert!((smooth.eval(&[0.2]).unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn operator_norm_is_at_least_one() {
        let means = Means::new(1, 2);
        for n in 0..=2 {
            let c2 = means.projection_operator_norm(n, 2.0).unwrap();
            assert!(c2 >= 1.0 - 1e-9, "N={n}: {c2}");
            let c3 = means.projection_operator_norm(n, 3.0).unwrap();
            assert!(c3.is_finite() && c3 >= 1.0 - 1e-9);
        }
    }
}
