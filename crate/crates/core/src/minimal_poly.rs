//! Mollifier-weighted `L^p` minimal polynomials: the minimizer over `P_N` of
//! `J_δ(f - P) = ∫ (δ + |f - P|²)^{p/2} φ_{x0,r}^p dx`, with
//! `φ_{x0,r}(x) = φ((x0 - x)/r)`, and its limit as `δ → 0`.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::lpfit::{self, Design, LpObjective, Smoothed};
use crate::mollify::Mollifier;
use crate::poly::{basis, BallSpec, Polynomial};
use crate::quadrature::{graded_breaks, BallQuadrature};

pub use crate::lpfit::f_delta;

/// Regularization floor at which continuation stops.
pub const DELTA_FLOOR: f64 = 1e-12;

/// Largest `c(p)` with `(F_δ(u) - F_δ(v))(u - v) ≥ c(p) (δ + u² + v²)^{(p-2)/2} |u - v|²`
/// for scalar `u, v`, measured once by random sampling and frozen.
pub fn monotonicity_constant(p: f64) -> f64 {
    (p - 1.0).min(1.0) * 2f64.powf(0.5 * (2.0 - p))
}

/// `(F_δ(u) - F_δ(v))(u - v) / ((δ + u² + v²)^{(p-2)/2} |u - v|²)`.
pub fn monotonicity_ratio(u: f64, v: f64, delta: f64, p: f64) -> f64 {
    let num = (f_delta(u, delta, p).0 - f_delta(v, delta, p).0) * (u - v);
    num / ((delta + u * u + v * v).powf(0.5 * (p - 2.0)) * (u - v) * (u - v))
}

/// Geometric schedule `4^{-k}` from 1 down to [`DELTA_FLOOR`], ending exactly at the floor.
pub fn default_schedule() -> Vec<f64> {
    let mut s: Vec<f64> = (0..)
        .map(|k| 0.25f64.powi(k))
        .take_while(|&d| d > DELTA_FLOOR)
        .collect();
    s.push(DELTA_FLOOR);
    s
}

/// `J_δ` on a fixed ball, sampled on the ball quadrature with weights `φ^p`.
#[derive(Clone, Debug)]
pub struct WeightedObjective {
    f: ScalarField,
    quad: BallQuadrature,
    /// Panel breaks added at zeros of `f - P` (one-dimensional rules only).
    extra_breaks: Vec<f64>,
    ball: BallSpec,
    p: f64,
    degree: u32,
    design: Design,
    /// `ω_i φ(η_i)^p r^n`.
    weights: Vec<f64>,
    values: Vec<f64>,
    /// Nodes mapped into the ball.
    points: Vec<Vec<f64>>,
}

/// Minimal polynomial at one `δ`.
#[derive(Clone, Debug, Serialize)]
pub struct MinimalSolution {
    pub delta: f64,
    /// Centered at `x0`.
    pub polynomial: Polynomial,
    /// `J_δ(f - P)`.
    pub objective: f64,
    /// `max_Q |⟨G_δ(f, P), Q⟩|` over the scaled monomial basis, relative to the size of `J_δ`.
    pub residual: f64,
    pub iterations: usize,
    /// `J_δ` after each accepted Newton step.
    pub history: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TraceEntry {
    pub delta: f64,
    pub coeffs: Vec<f64>,
    pub residual: f64,
    /// Max coefficient distance to the previous stage; 0 for the first.
    pub increment: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Continuation {
    pub solution: MinimalSolution,
    pub trace: Vec<TraceEntry>,
    /// The last increments contract below `1e-8`, with a geometric remainder below `1e-8`.
    pub cauchy: bool,
}

impl Continuation {
    /// CSV with columns `delta, c_0, …, c_{L-1}, residual, increment`.
    pub fn write_trace_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = out;
        let len = self.trace.first().map_or(0, |e| e.coeffs.len());
        let mut header = vec!["delta".to_string()];
        header.extend((0..len).map(|i| format!("c{i}")));
        header.push("residual".into());
        header.push("increment".into());
        writeln!(w, "{}", header.join(","))?;
        for e in &self.trace {
            let mut row = vec![format!("{:e}", e.delta)];
            row.extend(e.coeffs.iter().map(|c| format!("{c:e}")));
            row.push(format!("{:e}", e.residual));
            row.push(format!("{:e}", e.increment));
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

impl WeightedObjective {
    pub fn new(quad: &BallQuadrature, f: &ScalarField, x0: &[f64], r: f64, p: f64, degree: u32) -> Result<Self> {
        Self::build(quad, f, x0, r, p, degree, Vec::new())
    }

    fn build(
        quad: &BallQuadrature,
        f: &ScalarField,
        x0: &[f64],
        r: f64,
        p: f64,
        degree: u32,
        extra_breaks: Vec<f64>,
    ) -> Result<Self> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::invalid("p", format!("need 1 < p < ∞, got {p}")));
        }
        if f.dim() != quad.dim() || x0.len() != quad.dim() {
            return Err(Error::DimensionMismatch {
                expected: quad.dim(),
                got: if f.dim() != quad.dim() { f.dim() } else { x0.len() },
            });
        }
        let ball = BallSpec::new(x0.to_vec(), r)?;
        let n = quad.dim();
        let rule = if n == 1 {
            let mut breaks = f.breakpoints(x0[0] - r, x0[0] + r);
            breaks.extend_from_slice(&extra_breaks);
            quad.rule_with_breaks(&ball, &breaks)
        } else {
            quad.rule().clone()
        };
        let phi = Mollifier::new(n);
        let indices = basis(n, degree as i32);
        let volume = r.powi(n as i32);
        let mut rows = Vec::with_capacity(rule.len() * indices.len());
        let mut weights = Vec::with_capacity(rule.len());
        let mut values = Vec::with_capacity(rule.len());
        let mut points = Vec::with_capacity(rule.len());
        for i in 0..rule.len() {
            let eta = rule.node(i);
            let wi = rule.weights()[i] * phi.eval(eta).powf(p) * volume;
            if wi == 0.0 {
                continue;
            }
            let mut x = vec![0.0; n];
            rule.map_node(i, &ball, &mut x);
            values.push(f.eval(&x)?);
            rows.extend(indices.iter().map(|b| b.monomial(eta)));
            weights.push(wi);
            points.push(x);
        }
        Ok(WeightedObjective {
            f: f.clone(),
            quad: quad.clone(),
            extra_breaks,
            ball,
            p,
            degree,
            design: Design {
                len: indices.len(),
                rows,
            },
            weights,
            values,
            points,
        })
    }

    pub fn ball(&self) -> &BallSpec {
        &self.ball
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    fn lp(&self, delta: f64) -> LpObjective<'_> {
        LpObjective {
            design: &self.design,
            weights: &self.weights,
            f: &self.values,
            psi: Smoothed { p: self.p, delta },
        }
    }

    /// `J_δ(f)`, i.e. the objective at `P = 0`.
    pub fn of_field(&self, delta: f64) -> f64 {
        self.lp(delta).value(&vec![0.0; self.design.len])
    }

    /// `J_δ(f - P)`.
    pub fn value(&self, delta: f64, poly: &Polynomial) -> Result<f64> {
        let c = self.scaled_coeffs(poly)?;
        Ok(self.lp(delta).value(&c))
    }

    fn scaled_coeffs(&self, poly: &Polynomial) -> Result<Vec<f64>> {
        let centered = poly.recenter(&self.ball.center)?.with_degree(self.degree as i32);
        let r = self.ball.radius;
        Ok(centered
            .coeffs()
            .iter()
            .zip(centered.basis())
            .map(|(c, b)| c * r.powi(b.order() as i32))
            .collect())
    }

    fn physical(&self, coeffs: &[f64]) -> Result<Polynomial> {
        let r = self.ball.radius;
        let c = coeffs
            .iter()
            .zip(basis(self.ball.dim(), self.degree as i32))
            .map(|(c, b)| c / r.powi(b.order() as i32))
            .collect();
        Polynomial::from_coeffs(self.ball.center.clone(), self.degree as i32, c)
    }

    /// Weighted least squares with weights `φ^p`; the exact minimizer for `p = 2`.
    pub fn least_squares(&self) -> Result<Vec<f64>> {
        lpfit::weighted_least_squares(&self.design, &self.weights, &self.values)
    }

    fn relative_residual(&self, delta: f64, c: &[f64]) -> f64 {
        let obj = self.lp(delta);
        let (g, _) = obj.derivatives(c);
        let j = obj.value(c);
        let mass: f64 = self.weights.iter().sum();
        let scale = self.p * j.powf((self.p - 1.0) / self.p) * mass.powf(1.0 / self.p);
        if scale == 0.0 {
            0.0
        } else {
            g.amax() / scale
        }
    }

    fn solve_from(&self, delta: f64, start: Vec<f64>) -> Result<MinimalSolution> {
        if !(delta > 0.0) {
            return Err(Error::invalid("delta", "direct solves need δ > 0"));
        }
        let mut out = lpfit::minimize(&self.lp(delta), start, 1e-13, 400)?;
        let mut current = None;
        // The integrand is not smooth where f = P; in one dimension those
        // points become panel breaks and the fit is repeated.
        for _ in 0..3 {
            if self.ball.dim() != 1 || self.p == 2.0 {
                break;
            }
            let obj = current.as_ref().unwrap_or(self);
            let roots = obj.residual_roots(&out.coeffs)?;
            if roots.is_empty() {
                break;
            }
            let mut breaks = self.extra_breaks.clone();
            breaks.extend(graded_breaks(&roots, self.ball.radius));
            let refined = Self::build(
                &self.quad,
                &self.f,
                &self.ball.center,
                self.ball.radius,
                self.p,
                self.degree,
                breaks,
            )?;
            let next = lpfit::minimize(&refined.lp(delta), out.coeffs.clone(), 1e-13, 400)?;
            let moved = next
                .coeffs
                .iter()
                .zip(&out.coeffs)
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            out = next;
            current = Some(refined);
            if moved < 1e-15 {
                break;
            }
        }
        let obj = current.as_ref().unwrap_or(self);
        Ok(MinimalSolution {
            delta,
            residual: obj.relative_residual(delta, &out.coeffs),
            polynomial: self.physical(&out.coeffs)?,
            objective: out.objective,
            iterations: out.iterations,
            history: out.history,
        })
    }

    fn residual_roots(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        let resid: Vec<f64> = (0..self.values.len())
            .map(|i| self.values[i] - self.design.eval(i, coeffs))
            .collect();
        let xs: Vec<f64> = self.points.iter().map(|x| x[0]).collect();
        let poly = self.physical(coeffs)?;
        lpfit::sign_change_roots(&xs, &resid, |t| Ok(self.f.eval(&[t])? - poly.eval_unchecked(&[t])))
    }

    /// Newton solve of `G_δ(f, P) = 0` from the weighted least-squares start.
    pub fn solve(&self, delta: f64) -> Result<MinimalSolution> {
        self.solve_from(delta, self.least_squares()?)
    }

    /// Solves along `schedule`, warm-starting every stage from the previous one.
    pub fn continuation(&self, schedule: &[f64]) -> Result<Continuation> {
        if schedule.is_empty() {
            return Err(Error::invalid("schedule", "empty schedule"));
        }
        if schedule.windows(2).any(|w| !(w[1] < w[0])) || !(schedule[schedule.len() - 1] > 0.0) {
            return Err(Error::invalid("schedule", "must be strictly decreasing and positive"));
        }
        let mut start = self.least_squares()?;
        let mut trace: Vec<TraceEntry> = Vec::with_capacity(schedule.len());
        let mut last = None;
        for &delta in schedule {
            let sol = self.solve_from(delta, start.clone())?;
            let coeffs = self.scaled_coeffs(&sol.polynomial)?;
            let increment = trace.last().map_or(0.0, |prev| {
                prev.coeffs
                    .iter()
                    .zip(&coeffs)
                    .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
            });
            trace.push(TraceEntry {
                delta,
                coeffs: coeffs.clone(),
                residual: sol.residual,
                increment,
            });
            start = coeffs;
            last = Some(sol);
        }
        let cauchy = cauchy_trace(&trace, 1e-8);
        Ok(Continuation {
            solution: last.expect("nonempty schedule"),
            trace,
            cauchy,
        })
    }

    /// `‖P‖_{L^p(B(x0, r/2))} / J_δ(f)^{1/p}`.
    pub fn half_ball_factor(&self, quad: &BallQuadrature, sol: &MinimalSolution) -> Result<f64> {
        let half = BallSpec::new(self.ball.center.clone(), 0.5 * self.ball.radius)?;
        let p = self.p;
        let poly = &sol.polynomial;
        let num = quad.integrate(&half, |x| poly.eval_unchecked(x).abs().powf(p));
        let den = self.of_field(sol.delta);
        if den == 0.0 {
            return Ok(if num == 0.0 { 0.0 } else { f64::INFINITY });
        }
        Ok((num / den).powf(1.0 / p))
    }

    /// `‖P‖_{L^p(B(x0, r/2))} / ‖f φ‖_{L^p}`, the bound in the `δ → 0` limit.
    pub fn limit_factor(&self, quad: &BallQuadrature, poly: &Polynomial) -> Result<f64> {
        let half = BallSpec::new(self.ball.center.clone(), 0.5 * self.ball.radius)?;
        let p = self.p;
        let num = quad.integrate(&half, |x| poly.eval_unchecked(x).abs().powf(p));
        let den: f64 = self
            .weights
            .iter()
            .zip(&self.values)
            .map(|(w, v)| w * v.abs().powf(p))
            .sum();
        if den == 0.0 {
            return Ok(if num == 0.0 { 0.0 } else { f64::INFINITY });
        }
        Ok((num / den).powf(1.0 / p))
    }

    /// Points at which the objective samples `f`.
    pub fn sample_points(&self) -> &[Vec<f64>] {
        &self.points
    }
}

fn cauchy_trace(trace: &[TraceEntry], tol: f64) -> bool {
    let incs: Vec<f64> = trace.iter().skip(1).map(|e| e.increment).collect();
    if incs.is_empty() {
        return true;
    }
    // The final run below `tol` must contract, and its geometric remainder
    // `d_last ρ / (1 - ρ)` must stay below `tol` as well.
    let start = incs.iter().rposition(|&d| !(d < tol)).map_or(0, |k| k + 1);
    let tail = &incs[start..];
    let Some(&last) = tail.last() else {
        return false;
    };
    if tail.windows(2).any(|w| w[1] > w[0] + 1e-15) {
        return false;
    }
    if tail.len() < 2 || last == 0.0 {
        return true;
    }
    let rho = last / tail[tail.len() - 2];
    rho < 1.0 && last * rho / (1.0 - rho) < tol
}

/// One-shot solve at `δ > 0`.
pub fn solve_minimal(f: &ScalarField, x0: &[f64], r: f64, p: f64, degree: u32, delta: f64) -> Result<MinimalSolution> {
    let quad = BallQuadrature::default_for(f.dim());
    WeightedObjective::new(&quad, f, x0, r, p, degree)?.solve(delta)
}

/// Continuation along `schedule` (the default schedule when `None`).
pub fn continuation_to_zero(
    f: &ScalarField,
    x0: &[f64],
    r: f64,
    p: f64,
    degree: u32,
    schedule: Option<&[f64]>,
) -> Result<Continuation> {
    let quad = BallQuadrature::default_for(f.dim());
    let obj = WeightedObjective::new(&quad, f, x0, r, p, degree)?;
    match schedule {
        Some(s) => obj.continuation(s),
        None => obj.continuation(&default_schedule()),
    }
}
