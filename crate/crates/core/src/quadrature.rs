//! Quadrature on balls.
//!
//! Every rule is built once on the reference ball `B(0,1)` and mapped affinely
//! to `B(x0, r)`. One-dimensional balls use composite Gauss–Legendre panels,
//! which can be split at caller-supplied breakpoints (kinks, jumps) so that
//! piecewise-smooth integrands are integrated to full order. Two-dimensional
//! balls default to a polar product rule; higher dimensions use a tensor
//! Gauss rule on the bounding box cut by the ball indicator.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{unit_ball_volume, BallSpec, Polynomial};

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(order > 0, "Gauss-Legendre order must be positive");
    let mut nodes = vec![0.0; order];
    let mut weights = vec![0.0; order];
    let m = order.div_ceil(2);
    for i in 0..m {
        // Chebyshev-like initial guess, refined by Newton on P_order.
        let mut z = (PI * (i as f64 + 0.75) / (order as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(order, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(order, z);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = -z;
        nodes[order - 1 - i] = z;
        weights[i] = w;
        weights[order - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(order: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if order == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=order {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let n = order as f64;
    let d = n * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Composite Gauss rule of the given order on the panels delimited by `edges`.
pub fn composite_gauss(order: usize, edges: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (gx, gw) = gauss_legendre(order);
    let mut nodes = Vec::with_capacity(order * edges.len().saturating_sub(1));
    let mut weights = Vec::with_capacity(nodes.capacity());
    for pair in edges.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (x, w) in gx.iter().zip(&gw) {
            nodes.push(mid + half * x);
            weights.push(half * w);
        }
    }
    (nodes, weights)
}

/// Uniform panels on `[lo, 1]` (and `[-1, hi]` when symmetric) plus edges at
/// `1 - 2^{-k}`, `k = 3..=6`: mollifier derivatives steepen toward the sphere.
fn graded_edges(lo: f64, panels: usize) -> Vec<f64> {
    let mut edges = uniform_edges(lo, 1.0, panels);
    for k in 3..=6 {
        let t = 1.0 - 2f64.powi(-k);
        edges.push(t);
        if lo < 0.0 {
            edges.push(-t);
        }
    }
    edges.sort_by(|a, b| a.partial_cmp(b).expect("finite edges"));
    edges.dedup_by(|a, b| (*a - *b).abs() < 1e-13);
    edges
}

/// Breakpoints accumulating geometrically at each root, for integrands like
/// `|t - root|^p` on balls of radius `r`.
pub(crate) fn graded_breaks(roots: &[f64], r: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(roots.len() * 33);
    for &b in roots {
        out.push(b);
        for k in 1..=16 {
            let h = r * 0.5f64.powi(k);
            out.push(b - h);
            out.push(b + h);
        }
    }
    out
}

fn uniform_edges(lo: f64, hi: f64, panels: usize) -> Vec<f64> {
    (0..=panels)
        .map(|i| lo + (hi - lo) * i as f64 / panels as f64)
        .collect()
}

/// Which reference rule to use on the unit ball.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum QuadratureSpec {
    /// Composite Gauss–Legendre on `[-1, 1]` (one-dimensional balls only).
    Gauss { order: usize, panels: usize },
    /// Radial composite Gauss times angular trapezoid (two-dimensional balls).
    Polar {
        radial_order: usize,
        radial_panels: usize,
        angular: usize,
    },
    /// Tensor Gauss on the bounding box times the ball indicator.
    TensorIndicator { order: usize, panels: usize },
}

impl QuadratureSpec {
    pub fn default_for(dim: usize) -> Self {
        match dim {
            1 => QuadratureSpec::Gauss { order: 12, panels: 8 },
            2 => QuadratureSpec::Polar {
                radial_order: 12,
                radial_panels: 2,
                angular: 32,
            },
            _ => QuadratureSpec::TensorIndicator { order: 12, panels: 2 },
        }
    }

    /// The same family with (roughly) doubled resolution.
    pub fn refined(&self) -> Self {
        match *self {
            QuadratureSpec::Gauss { order, panels } => QuadratureSpec::Gauss {
                order,
                panels: panels * 2,
            },
            QuadratureSpec::Polar {
                radial_order,
                radial_panels,
                angular,
            } => QuadratureSpec::Polar {
                radial_order,
                radial_panels: radial_panels * 2,
                angular: angular * 2,
            },
            QuadratureSpec::TensorIndicator { order, panels } => QuadratureSpec::TensorIndicator {
                order,
                panels: panels * 2,
            },
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        match *self {
            QuadratureSpec::Gauss { order, panels } => {
                if dim != 1 {
                    return Err(Error::invalid("quadrature", "gauss rule needs dim = 1"));
                }
                if order == 0 || panels == 0 {
                    return Err(Error::invalid("quadrature", "order and panels must be positive"));
                }
            }
            QuadratureSpec::Polar {
                radial_order,
                radial_panels,
                angular,
            } => {
                if dim != 2 {
                    return Err(Error::invalid("quadrature", "polar rule needs dim = 2"));
                }
                if radial_order == 0 || radial_panels == 0 || angular < 3 {
                    return Err(Error::invalid("quadrature", "polar rule too coarse"));
                }
            }
            QuadratureSpec::TensorIndicator { order, panels } => {
                if dim == 0 || order == 0 || panels == 0 {
                    return Err(Error::invalid("quadrature", "order and panels must be positive"));
                }
            }
        }
        Ok(())
    }
}

/// Nodes and weights on the reference ball `B(0, 1)`.
#[derive(Clone, Debug)]
pub struct ReferenceRule {
    dim: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl ReferenceRule {
    pub fn build(dim: usize, spec: &QuadratureSpec) -> Result<Self> {
        spec.validate(dim)?;
        Ok(match *spec {
            QuadratureSpec::Gauss { order, panels } => Self::interval(order, &graded_edges(-1.0, panels)),
            QuadratureSpec::Polar {
                radial_order,
                radial_panels,
                angular,
            } => {
                let (rho, rw) = composite_gauss(radial_order, &graded_edges(0.0, radial_panels));
                let mut nodes = Vec::with_capacity(2 * rho.len() * angular);
                let mut weights = Vec::with_capacity(rho.len() * angular);
                let dtheta = 2.0 * PI / angular as f64;
                for (r, w) in rho.iter().zip(&rw) {
                    for k in 0..angular {
                        let theta = dtheta * (k as f64 + 0.5);
                        nodes.push(r * theta.cos());
                        nodes.push(r * theta.sin());
                        weights.push(w * r * dtheta);
                    }
                }
                ReferenceRule { dim: 2, nodes, weights }
            }
            QuadratureSpec::TensorIndicator { order, panels } => {
                let (gx, gw) = composite_gauss(order, &uniform_edges(-1.0, 1.0, panels));
                let m = gx.len();
                let total = m.pow(dim as u32);
                let mut nodes = Vec::new();
                let mut weights = Vec::new();
                let mut point = vec![0.0; dim];
                for flat in 0..total {
                    let mut rest = flat;
                    let mut w = 1.0;
                    for p in point.iter_mut() {
                        let i = rest % m;
                        rest /= m;
                        *p = gx[i];
                        w *= gw[i];
                    }
                    if point.iter().map(|x| x * x).sum::<f64>() < 1.0 {
                        nodes.extend_from_slice(&point);
                        weights.push(w);
                    }
                }
                ReferenceRule { dim, nodes, weights }
            }
        })
    }

    /// One-dimensional composite rule on explicit reference panel edges.
    pub fn interval(order: usize, edges: &[f64]) -> Self {
        let (nodes, weights) = composite_gauss(order, edges);
        ReferenceRule { dim: 1, nodes, weights }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn node(&self, i: usize) -> &[f64] {
        &self.nodes[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn nodes(&self) -> impl Iterator<Item = &[f64]> {
        self.nodes.chunks_exact(self.dim)
    }

    /// Physical node `x0 + r ξ_i`.
    pub fn map_node(&self, i: usize, ball: &BallSpec, out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            *o = ball.center[k] + ball.radius * self.nodes[i * self.dim + k];
        }
    }

    /// `∫_{B(x0, r)} f` with this rule.
    pub fn integrate<F: FnMut(&[f64]) -> f64>(&self, ball: &BallSpec, mut f: F) -> f64 {
        let scale = ball.radius.powi(self.dim as i32);
        let mut x = vec![0.0; self.dim];
        let mut acc = 0.0;
        for i in 0..self.len() {
            self.map_node(i, ball, &mut x);
            acc += self.weights[i] * f(&x);
        }
        acc * scale
    }
}

/// A configured ball quadrature with its cached reference rule.
#[derive(Clone, Debug)]
pub struct BallQuadrature {
    spec: QuadratureSpec,
    rule: Arc<ReferenceRule>,
}

impl BallQuadrature {
    pub fn new(dim: usize, spec: QuadratureSpec) -> Result<Self> {
        let rule = Arc::new(ReferenceRule::build(dim, &spec)?);
        Ok(BallQuadrature { spec, rule })
    }

    pub fn default_for(dim: usize) -> Self {
        Self::new(dim, QuadratureSpec::default_for(dim)).expect("default rule is valid")
    }

    pub fn spec(&self) -> &QuadratureSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.rule.dim
    }

    pub fn rule(&self) -> &Arc<ReferenceRule> {
        &self.rule
    }

    /// Rule for `ball`, with panels split at the given physical breakpoints
    /// (one-dimensional Gauss rules only; other rules ignore them).
    pub fn rule_with_breaks(&self, ball: &BallSpec, breaks: &[f64]) -> Arc<ReferenceRule> {
        let QuadratureSpec::Gauss { order, panels } = self.spec else {
            return self.rule.clone();
        };
        let c = ball.center[0];
        let r = ball.radius;
        let mut edges = graded_edges(-1.0, panels);
        let before = edges.len();
        edges.extend(breaks.iter().map(|b| (b - c) / r).filter(|t| *t > -1.0 && *t < 1.0));
        if edges.len() == before {
            return self.rule.clone();
        }
        edges.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
        edges.dedup_by(|a, b| (*a - *b).abs() < 1e-13);
        Arc::new(ReferenceRule::interval(order, &edges))
    }

    pub fn integrate<F: FnMut(&[f64]) -> f64>(&self, ball: &BallSpec, f: F) -> f64 {
        self.rule.integrate(ball, f)
    }

    /// Integrate with successive refinement until two levels agree to
    /// `rel_tol`; returns `(value, error estimate)`.
    pub fn integrate_adaptive<F: Fn(&[f64]) -> f64>(
        &self,
        ball: &BallSpec,
        f: F,
        rel_tol: f64,
        max_refinements: usize,
    ) -> Result<(f64, f64)> {
        let dim = self.dim();
        let mut spec = self.spec;
        let mut prev = self.rule.integrate(ball, &f);
        let mut estimate = f64::INFINITY;
        for _ in 0..max_refinements {
            spec = spec.refined();
            let next = ReferenceRule::build(dim, &spec)?.integrate(ball, &f);
            estimate = (next - prev).abs();
            prev = next;
            if estimate <= rel_tol * next.abs().max(f64::MIN_POSITIVE) || estimate == 0.0 {
                return Ok((next, estimate));
            }
        }
        Err(Error::QuadratureNonconvergence {
            estimate,
            tolerance: rel_tol * prev.abs(),
        })
    }
}

/// `‖P‖_{L^p(B)}`; `p = ∞` is the maximum over quadrature nodes and a dense
/// fallback lattice of the ball.
pub fn lp_norm_on_ball(poly: &Polynomial, ball: &BallSpec, p: f64, quad: &BallQuadrature) -> Result<f64> {
    if poly.dim() != ball.dim() || quad.dim() != ball.dim() {
        return Err(Error::DimensionMismatch {
            expected: ball.dim(),
            got: poly.dim(),
        });
    }
    if !(p >= 1.0) {
        return Err(Error::invalid("p", format!("need p ≥ 1, got {p}")));
    }
    if poly.is_zero() {
        return Ok(0.0);
    }
    if p.is_infinite() {
        let mut m: f64 = 0.0;
        let mut x = vec![0.0; ball.dim()];
        let rule = quad.rule();
        for i in 0..rule.len() {
            rule.map_node(i, ball, &mut x);
            m = m.max(poly.eval_unchecked(&x).abs());
        }
        for x in dense_ball_lattice(ball, 41) {
            m = m.max(poly.eval_unchecked(&x).abs());
        }
        return Ok(m);
    }
    // In one dimension the sign changes of P are the only kinks of |P|^p.
    if ball.dim() == 1 {
        let roots = real_roots_1d(poly, ball.center[0] - ball.radius, ball.center[0] + ball.radius);
        let rule = quad.rule_with_breaks(ball, &roots);
        let value = rule.integrate(ball, |x| poly.eval_unchecked(x).abs().powf(p));
        return Ok(value.powf(1.0 / p));
    }
    let (value, _) = quad.integrate_adaptive(ball, |x| poly.eval_unchecked(x).abs().powf(p), 1e-9, 5)?;
    Ok(value.powf(1.0 / p))
}

/// Sign changes of a univariate polynomial on `[lo, hi]` (sampling plus bisection).
pub(crate) fn real_roots_1d(poly: &Polynomial, lo: f64, hi: f64) -> Vec<f64> {
    let samples = 64 * (poly.degree().max(1) as usize);
    let f = |x: f64| poly.eval_unchecked(&[x]);
    let mut roots = Vec::new();
    let mut a = lo;
    let mut fa = f(a);
    for i in 1..=samples {
        let b = lo + (hi - lo) * i as f64 / samples as f64;
        let fb = f(b);
        if fa == 0.0 {
            roots.push(a);
        } else if fa * fb < 0.0 {
            let (mut l, mut r, mut fl) = (a, b, fa);
            for _ in 0..200 {
                let m = 0.5 * (l + r);
                let fm = f(m);
                if fm == 0.0 || (r - l) < 1e-15 * (1.0 + m.abs()) {
                    l = m;
                    r = m;
                    break;
                }
                if fl * fm < 0.0 {
                    r = m;
                } else {
                    l = m;
                    fl = fm;
                }
            }
            roots.push(0.5 * (l + r));
        }
        a = b;
        fa = fb;
    }
    roots
}

/// Points of a uniform `per_axis^n` lattice of the bounding box lying in the ball.
pub(crate) fn dense_ball_lattice(ball: &BallSpec, per_axis: usize) -> Vec<Vec<f64>> {
    let dim = ball.dim();
    let total = per_axis.pow(dim as u32);
    let mut out = Vec::new();
    for flat in 0..total {
        let mut rest = flat;
        let mut x = vec![0.0; dim];
        let mut inside = 0.0;
        for (k, xk) in x.iter_mut().enumerate() {
            let i = rest % per_axis;
            rest /= per_axis;
            let t = -1.0 + 2.0 * i as f64 / (per_axis - 1) as f64;
            inside += t * t;
            *xk = ball.center[k] + ball.radius * t;
        }
        if inside <= 1.0 {
            out.push(x);
        }
    }
    out
}

/// Sum of reference weights compared with the exact `|B(1)|`.
pub fn volume_defect(rule: &ReferenceRule) -> f64 {
    rule.weights().iter().sum::<f64>() - unit_ball_volume(rule.dim())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::MultiIndex;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        for order in [1, 2, 5, 12, 20] {
            let (x, w) = gauss_legendre(order);
            for k in 0..(2 * order) {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(k as i32)).sum();
                let exact = if k % 2 == 1 { 0.0 } else { 2.0 / (k as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-13, "order {order} k {k}: {q} vs {exact}");
            }
        }
    }

    #[test]
    fn polar_rule_has_exact_volume() {
        let rule = ReferenceRule::build(2, &QuadratureSpec::default_for(2)).unwrap();
        assert!(volume_defect(&rule).abs() < 1e-13);
        let rule = ReferenceRule::build(1, &QuadratureSpec::default_for(1)).unwrap();
        assert!(volume_defect(&rule).abs() < 1e-14);
    }

    #[test]
    fn tensor_indicator_volume_converges() {
        let coarse = ReferenceRule::build(3, &QuadratureSpec::TensorIndicator { order: 6, panels: 2 }).unwrap();
        let fine = ReferenceRule::build(3, &QuadratureSpec::TensorIndicator { order: 6, panels: 6 }).unwrap();
        assert!(volume_defect(&fine).abs() < volume_defect(&coarse).abs().max(1e-3));
        assert!(volume_defect(&fine).abs() < 0.05);
    }

    #[test]
    fn lp_norm_examples() {
        let quad = BallQuadrature::default_for(1);
        let ball = BallSpec::unit(1);
        let one = Polynomial::constant(1, 1.0);
        assert!((lp_norm_on_ball(&one, &ball, 2.0, &quad).unwrap() - 2f64.sqrt()).abs() < 1e-14);
        let x = Polynomial::monomial(&MultiIndex::unit(1, 0), 1.0);
        let v = lp_norm_on_ball(&x, &ball, 2.0, &quad).unwrap();
        assert!((v - (2.0f64 / 3.0).sqrt()).abs() < 1e-14);
        let zero = Polynomial::zero(1, 2);
        assert_eq!(lp_norm_on_ball(&zero, &ball, 3.0, &quad).unwrap(), 0.0);
        // |x| on [-1,1]: the sign change at 0 becomes a panel edge.
        let v1 = lp_norm_on_ball(&x, &ball, 1.0, &quad).unwrap();
        assert!((v1 - 1.0).abs() < 1e-14);
        let vinf = lp_norm_on_ball(&x, &ball, f64::INFINITY, &quad).unwrap();
        assert!((vinf - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lp_norm_in_two_dimensions() {
        let quad = BallQuadrature::default_for(2);
        let ball = BallSpec::new(vec![0.3, -0.2], 0.5).unwrap();
        let p = Polynomial::constant(2, 2.0);
        let v = lp_norm_on_ball(&p, &ball, 2.0, &quad).unwrap();
        let exact = 2.0 * (PI * 0.25f64).sqrt();
        assert!((v - exact).abs() < 1e-12);
    }

    #[test]
    fn breakpoints_split_panels() {
        let quad = BallQuadrature::default_for(1);
        let ball = BallSpec::new(vec![0.1], 1.0).unwrap();
        let rule = quad.rule_with_breaks(&ball, &[0.0]);
        let step = rule.integrate(&ball, |x| if x[0] < 0.0 { 0.0 } else { 1.0 });
        assert!((step - 1.1).abs() < 1e-14, "{step}");
    }
}
