//! Weighted polynomial fitting on quadrature nodes: least squares, and damped
//! Newton for `Σ ω_i (δ + (f_i - P(η_i))²)^{p/2}`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Values of the basis at the nodes, row-major (`nodes × len`).
#[derive(Clone, Debug)]
pub(crate) struct Design {
    pub len: usize,
    pub rows: Vec<f64>,
}

impl Design {
    pub fn nodes(&self) -> usize {
        if self.len == 0 {
            0
        } else {
            self.rows.len() / self.len
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.len..(i + 1) * self.len]
    }

    pub fn eval(&self, i: usize, c: &[f64]) -> f64 {
        self.row(i).iter().zip(c).map(|(a, b)| a * b).sum()
    }

    /// `Σ ω_i e_i e_iᵀ`.
    pub fn gram(&self, weights: &[f64]) -> DMatrix<f64> {
        let mut g = DMatrix::zeros(self.len, self.len);
        for (i, w) in weights.iter().enumerate() {
            let e = self.row(i);
            for a in 0..self.len {
                for b in a..self.len {
                    g[(a, b)] += w * e[a] * e[b];
                }
            }
        }
        g.fill_lower_triangle_with_upper_triangle();
        g
    }
}

pub(crate) fn weighted_least_squares(design: &Design, weights: &[f64], f: &[f64]) -> Result<Vec<f64>> {
    if design.len == 0 {
        return Ok(Vec::new());
    }
    let g = design.gram(weights);
    let mut rhs = DVector::zeros(design.len);
    for (i, (w, fi)) in weights.iter().zip(f).enumerate() {
        for (r, e) in rhs.iter_mut().zip(design.row(i)) {
            *r += w * fi * e;
        }
    }
    g.cholesky()
        .map(|c| c.solve(&rhs).as_slice().to_vec())
        .ok_or(Error::SingularSystem {
            context: "least-squares normal equations",
        })
}

/// The smoothed power `ψ(u) = (δ + u²)^{p/2}` and its first two derivatives.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Smoothed {
    pub p: f64,
    pub delta: f64,
}

impl Smoothed {
    pub fn value(&self, u: f64) -> f64 {
        if self.delta == 0.0 {
            u.abs().powf(self.p)
        } else {
            (self.delta + u * u).powf(0.5 * self.p)
        }
    }

    /// `ψ'(u) = p F_δ(u)` with `F_δ(u) = (δ + u²)^{(p-2)/2} u`.
    pub fn first(&self, u: f64) -> f64 {
        self.p * f_delta(u, self.delta, self.p).0
    }

    /// `ψ''(u) = p (δ + u²)^{(p-4)/2} ((p-1) u² + δ)`.
    pub fn second(&self, u: f64) -> f64 {
        self.p * f_delta(u, self.delta, self.p).1
    }
}

/// `F_δ(u) = (δ + u²)^{(p-2)/2} u` and `F_δ'(u)`; at `δ = u = 0` the value is 0
/// and the derivative is `+∞` for `p < 2`.
pub fn f_delta(u: f64, delta: f64, p: f64) -> (f64, f64) {
    let s = delta + u * u;
    if s == 0.0 {
        let d = if p > 2.0 {
            0.0
        } else if p == 2.0 {
            1.0
        } else {
            f64::INFINITY
        };
        return (0.0, d);
    }
    let value = s.powf(0.5 * (p - 2.0)) * u;
    let deriv = s.powf(0.5 * (p - 4.0)) * ((p - 1.0) * u * u + delta);
    (value, deriv)
}

#[derive(Clone, Debug)]
pub(crate) struct NewtonOutcome {
    pub coeffs: Vec<f64>,
    pub objective: f64,
    /// `max_β |∂J/∂c_β|`.
    pub gradient_norm: f64,
    pub iterations: usize,
    /// Objective after each accepted step, starting with the initial value.
    pub history: Vec<f64>,
}

pub(crate) struct LpObjective<'a> {
    pub design: &'a Design,
    pub weights: &'a [f64],
    pub f: &'a [f64],
    pub psi: Smoothed,
}

impl LpObjective<'_> {
    pub fn value(&self, c: &[f64]) -> f64 {
        (0..self.design.nodes())
            .map(|i| self.weights[i] * self.psi.value(self.f[i] - self.design.eval(i, c)))
            .sum()
    }

    /// Gradient and Hessian with respect to the coefficients.
    pub fn derivatives(&self, c: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let l = self.design.len;
        let mut g = DVector::zeros(l);
        let mut h = DMatrix::zeros(l, l);
        for i in 0..self.design.nodes() {
            let w = self.weights[i];
            if w == 0.0 {
                continue;
            }
            let u = self.f[i] - self.design.eval(i, c);
            let d1 = w * self.psi.first(u);
            let d2 = w * self.psi.second(u).min(1e300);
            let e = self.design.row(i);
            for a in 0..l {
                g[a] -= d1 * e[a];
                for b in a..l {
                    h[(a, b)] += d2 * e[a] * e[b];
                }
            }
        }
        h.fill_lower_triangle_with_upper_triangle();
        (g, h)
    }

    /// Rounding error of `J`: `ε Σ ω_i |ψ'(u_i)| (|f_i| + Σ|c_β e_β|)` plus
    /// `(8 + √nodes) ε J` for the evaluation and summation.
    fn value_noise(&self, c: &[f64]) -> f64 {
        let mut acc = 0.0;
        let mut total = 0.0;
        for i in 0..self.design.nodes() {
            let w = self.weights[i];
            let e = self.design.row(i);
            let size = self.f[i].abs() + e.iter().zip(c).map(|(a, b)| (a * b).abs()).sum::<f64>();
            let u = self.f[i] - self.design.eval(i, c);
            acc += w * self.psi.first(u).abs() * size;
            total += w * self.psi.value(u);
        }
        let n = self.design.nodes() as f64;
        f64::EPSILON * (acc + (8.0 + n.sqrt()) * total)
    }

    /// Rounding floor of the gradient: `ε Σ ω_i |ψ''(u_i)| (|f_i| + Σ|c_β e_β|) |e_i|`
    /// plus the summation error, as a max over components.
    fn gradient_noise(&self, c: &[f64]) -> f64 {
        let l = self.design.len;
        let mut noise = vec![0.0; l];
        for i in 0..self.design.nodes() {
            let w = self.weights[i];
            if w == 0.0 {
                continue;
            }
            let e = self.design.row(i);
            let size = self.f[i].abs() + e.iter().zip(c).map(|(a, b)| (a * b).abs()).sum::<f64>();
            let u = self.f[i] - self.design.eval(i, c);
            let d2 = self.psi.second(u).min(1e300);
            let term = w * (d2 * size + self.psi.first(u).abs() * l as f64);
            for (n, ea) in noise.iter_mut().zip(e) {
                *n += term * ea.abs();
            }
        }
        f64::EPSILON * noise.into_iter().fold(0.0, f64::max)
    }

    /// Gradient size that counts as zero: `tol` times the natural scale
    /// `p J^{(p-1)/p} (Σ ω)^{1/p}` of the gradient.
    fn gradient_scale(&self, objective: f64) -> f64 {
        let p = self.psi.p;
        let mass: f64 = self.weights.iter().sum();
        p * objective.max(0.0).powf((p - 1.0) / p) * mass.powf(1.0 / p)
    }
}

fn solve_regularized(h: &DMatrix<f64>, g: &DVector<f64>) -> Option<DVector<f64>> {
    let eig = SymmetricEigen::new(h.clone());
    let max = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut m = h.clone();
    if !(min > 1e-13 * max) {
        let shift = 1e-14 * max.max(1e-300) + (-min).max(0.0);
        for k in 0..m.nrows() {
            m[(k, k)] += shift;
        }
    }
    m.cholesky().map(|c| c.solve(&(-g)))
}

/// Damped Newton with Armijo backtracking, falling back to steepest descent.
pub(crate) fn minimize(obj: &LpObjective<'_>, start: Vec<f64>, tol: f64, max_iter: usize) -> Result<NewtonOutcome> {
    let mut c = start;
    let mut j = obj.value(&c);
    let mut history = vec![j];
    if obj.design.len == 0 {
        return Ok(NewtonOutcome {
            coeffs: c,
            objective: j,
            gradient_norm: 0.0,
            iterations: 0,
            history,
        });
    }
    for it in 0..max_iter {
        let (g, h) = obj.derivatives(&c);
        let gnorm = g.amax();
        let scale = obj.gradient_scale(j);
        if gnorm <= tol * scale || j == 0.0 || gnorm <= obj.gradient_noise(&c) {
            return Ok(NewtonOutcome {
                coeffs: c,
                objective: j,
                gradient_norm: gnorm,
                iterations: it,
                history,
            });
        }
        let mut accepted = false;
        let newton = solve_regularized(&h, &g);
        // Near the minimizer the decrease of J drops below its rounding error;
        // a full Newton step is then judged by the gradient instead.
        if let Some(d) = &newton {
            let trial: Vec<f64> = c.iter().zip(d.iter()).map(|(a, b)| a + b).collect();
            let jt = obj.value(&trial);
            let unresolved = 0.5 * g.dot(d).abs() <= 1e-10 * j.abs();
            let slack = if unresolved {
                obj.value_noise(&c).max(1e-11 * j.abs())
            } else {
                obj.value_noise(&c)
            };
            if jt <= j + slack && jt >= j - 1e-10 * j.abs() {
                let gt = obj.derivatives(&trial).0.amax();
                if gt < 0.5 * gnorm {
                    c = trial;
                    j = jt.min(j);
                    history.push(j);
                    continue;
                }
            }
        }
        let directions = newton.into_iter().chain(std::iter::once(-&g));
        for d in directions {
            let slope = g.dot(&d);
            if !(slope < 0.0) {
                continue;
            }
            let mut t = 1.0;
            for _ in 0..60 {
                let trial: Vec<f64> = c.iter().zip(d.iter()).map(|(a, b)| a + t * b).collect();
                let jt = obj.value(&trial);
                if jt <= j + 1e-4 * t * slope {
                    accepted = jt < j || (jt == j && t == 1.0);
                    if accepted {
                        c = trial;
                        j = jt;
                        history.push(j);
                    }
                    break;
                }
                t *= 0.5;
            }
            if accepted {
                break;
            }
        }
        if !accepted {
            // No descent possible in floating point: this is the minimizer to
            // machine precision unless the gradient is still far from zero.
            if gnorm <= 1e3 * tol * scale.max(f64::MIN_POSITIVE) || gnorm <= 1e-12 * scale {
                return Ok(NewtonOutcome {
                    coeffs: c,
                    objective: j,
                    gradient_norm: gnorm,
                    iterations: it,
                    history,
                });
            }
            return Err(Error::Nonconvergence {
                context: "weighted Lp fit",
                iterations: it,
                residual: gnorm / scale,
            });
        }
    }
    let (g, _) = obj.derivatives(&c);
    Err(Error::Nonconvergence {
        context: "weighted Lp fit",
        iterations: max_iter,
        residual: g.amax() / obj.gradient_scale(j),
    })
}

/// Sign changes of `g` between consecutive points of `xs` (with `vals = g(xs)`),
/// located by bisection.
pub(crate) fn sign_change_roots<G>(xs: &[f64], vals: &[f64], g: G) -> Result<Vec<f64>>
where
    G: Fn(f64) -> Result<f64>,
{
    let mut pts: Vec<(f64, f64)> = xs.iter().copied().zip(vals.iter().copied()).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut roots = Vec::new();
    for w in pts.windows(2) {
        let ((mut a, mut ga), (mut b, _)) = (w[0], w[1]);
        if ga == 0.0 || w[1].1 == 0.0 || (ga > 0.0) == (w[1].1 > 0.0) {
            continue;
        }
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            let gm = g(m)?;
            if gm == 0.0 {
                a = m;
                b = m;
                break;
            }
            if (gm > 0.0) == (ga > 0.0) {
                a = m;
                ga = gm;
            } else {
                b = m;
            }
        }
        roots.push(0.5 * (a + b));
    }
    Ok(roots)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f_delta_examples() {
        assert_eq!(f_delta(0.0, 0.3, 3.0).0, 0.0);
        assert_eq!(f_delta(0.7, 0.0, 2.0), (0.7, 1.0));
        let (v, d) = f_delta(1.0, 0.0, 3.0);
        assert!((v - 1.0).abs() < 1e-15 && (d - 2.0).abs() < 1e-15);
        // derivative against differences
        let (_, d) = f_delta(0.4, 0.01, 1.5);
        let h = 1e-7;
        let fd = (f_delta(0.4 + h, 0.01, 1.5).0 - f_delta(0.4 - h, 0.01, 1.5).0) / (2.0 * h);
        assert!((d - fd).abs() < 1e-6);
    }

    #[test]
    fn newton_recovers_least_squares_for_p_two() {
        let xs: Vec<f64> = (0..50).map(|i| -1.0 + 2.0 * i as f64 / 49.0).collect();
        let design = Design {
            len: 2,
            rows: xs.iter().flat_map(|&x| [1.0, x]).collect(),
        };
        let w = vec![1.0 / 50.0; 50];
        let f: Vec<f64> = xs.iter().map(|x| x.exp()).collect();
        let ls = weighted_least_squares(&design, &w, &f).unwrap();
        let obj = LpObjective {
            design: &design,
            weights: &w,
            f: &f,
            psi: Smoothed { p: 2.0, delta: 0.0 },
        };
        let out = minimize(&obj, vec![0.0, 0.0], 1e-12, 50).unwrap();
        assert!((out.coeffs[0] - ls[0]).abs() < 1e-12 && (out.coeffs[1] - ls[1]).abs() < 1e-12);
        assert!(out.history.windows(2).all(|w| w[1] < w[0]));
    }
}
