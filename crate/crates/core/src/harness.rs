//! Numerical checks of the transport estimates and of the function-space
//! inequalities: local oscillation inequality, Gronwall-type a-priori bounds,
//! embeddings, growth, interpolation, products and the sawtooth example.
//!
//! Unnamed constants are set to 1 in every right-hand side; a check passes when
//! the largest LHS/RHS ratio stays below a budget frozen from a calibration run.

use std::io::Write;

use num_rational::Rational64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::campanato::{
    derivative_components, BasePoints, Campanato, CampanatoParams, NormReport, TailEstimate, Window,
};
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::Interpolation;
use crate::mollify::Means;
use crate::oscillation::{OscParams, Oscillation};
use crate::poly::BallSpec;
use crate::quadrature::dense_ball_lattice;
use crate::registry;
use crate::transport::{Source, TransportProblem, VelocityField};

/// Largest ratios measured with [`HarnessConfig::default_for`]`(2)` on
/// [`CALIBRATION_PROBLEMS`]; `(inequality, problem, ratio)`.
pub const CALIBRATED: &[(&str, &str, f64)] = &[
    ("estimate1", "static", 1.000000),
    ("estimate2", "static", 1.000000),
    ("estimate3_pN", "static", 1.000000),
    ("estimate3_p0", "static", 1.000000),
    ("estimate4", "static", 1.000000),
    ("estimate1", "translation", 1.000072),
    ("estimate2", "translation", 1.002203),
    ("estimate3_pN", "translation", 1.001146),
    ("estimate3_p0", "translation", 1.008523),
    ("estimate4", "translation", 1.000000),
    ("estimate1", "rotation", 1.000000),
    ("estimate2", "rotation", 1.000000),
    ("estimate3_pN", "rotation", 1.000000),
    ("estimate3_p0", "rotation", 1.000000),
    ("estimate4", "rotation", 1.000000),
    ("estimate1", "rotation_source", 1.000000),
    ("estimate2", "rotation_source", 1.000000),
    ("estimate3_pN", "rotation_source", 1.000000),
    ("estimate3_p0", "rotation_source", 1.000000),
    ("estimate4", "rotation_source", 1.000000),
];

/// Allowed regression over a calibrated ratio.
pub const BUDGET_SLACK: f64 = 1.05;

pub const CALIBRATION_PROBLEMS: &[&str] = &["static", "translation", "rotation", "rotation_source"];

/// Budget for `id` on `problem`: the calibrated ratio times [`BUDGET_SLACK`], or
/// the largest calibrated ratio of `id` for problems outside the suite.
pub fn budget(id: &str, problem: &str) -> f64 {
    let own = CALIBRATED.iter().find(|(i, p, _)| *i == id && *p == problem);
    let ratio = match own {
        Some(&(_, _, r)) => r,
        None => CALIBRATED
            .iter()
            .filter(|(i, _, _)| *i == id)
            .map(|e| e.2)
            .fold(f64::NAN, f64::max),
    };
    if ratio.is_nan() {
        f64::INFINITY
    } else {
        ratio * BUDGET_SLACK
    }
}

/// The transport problems of the calibration suite (all two-dimensional).
pub fn calibration_problem(name: &str) -> Result<TransportProblem> {
    let f0 = registry::parse("asym_bump", 2)?;
    let two_pi = 2.0 * std::f64::consts::PI;
    let (v, g, horizon) = match name {
        "static" => ("zero", Source::Zero(2), 1.0),
        "translation" => ("constant(0.5, 0.25)", Source::Zero(2), 1.0),
        "rotation" => ("rotation(1)", Source::Zero(2), two_pi),
        "rotation_source" => (
            "rotation(1)",
            Source::Modulated {
                field: registry::parse("gauss(0.5)", 2)?,
                omega: 1.0,
            },
            two_pi,
        ),
        other => return Err(Error::UnknownFunction(format!("problem `{other}`"))),
    };
    TransportProblem::with_default_step(f0, VelocityField::parse(v, 2)?, g, horizon)
}

#[derive(Clone, Debug, Serialize)]
pub struct HarnessConfig {
    pub checkpoints: usize,
    pub base: BasePoints,
    pub window: Window,
    /// Grid spacing of the solution snapshots.
    pub spacing: f64,
    pub interpolation: Interpolation,
}

impl HarnessConfig {
    pub fn default_for(dim: usize) -> Self {
        let (per_axis, window, spacing) = match dim {
            1 => (17, Window { j_min: -4, j_max: 1 }, 1.0 / 128.0),
            2 => (9, Window { j_min: -3, j_max: 1 }, 1.0 / 32.0),
            _ => (5, Window { j_min: -2, j_max: 0 }, 1.0 / 8.0),
        };
        HarnessConfig {
            checkpoints: 17,
            base: BasePoints {
                lo: vec![-1.0; dim],
                hi: vec![1.0; dim],
                per_axis,
                extra: Vec::new(),
            },
            window,
            spacing,
            interpolation: Interpolation::Cubic,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.checkpoints < 2 {
            return Err(Error::invalid("checkpoints", "need at least two checkpoints"));
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(Error::invalid("spacing", format!("need h > 0, got {}", self.spacing)));
        }
        if self.window.is_empty() {
            return Err(Error::invalid("window", "empty window"));
        }
        Ok(())
    }

    /// Snapshot box: the base box enlarged by `2^{j_max}` and a stencil margin,
    /// snapped to the spacing.
    pub fn grid_box(&self) -> (Vec<f64>, Vec<f64>) {
        let h = self.spacing;
        let reach = 2f64.powi(self.window.j_max) + 4.0 * h;
        let lo: Vec<f64> = self.base.lo.iter().map(|a| ((a - reach) / h).floor() * h).collect();
        let hi = lo
            .iter()
            .zip(&self.base.hi)
            .map(|(l, b)| l + ((b + reach - l) / h).ceil() * h)
            .collect();
        (lo, hi)
    }
}

/// A transport problem with grid snapshots at the checkpoints.
#[derive(Clone, Debug)]
pub struct SolvedProblem {
    pub name: String,
    pub problem: TransportProblem,
    pub times: Vec<f64>,
    pub fields: Vec<ScalarField>,
}

#[derive(Clone, Debug, Serialize)]
pub struct NormRecord {
    pub quantity: String,
    pub t: f64,
    pub value: f64,
    pub window: Option<Window>,
    pub basepoints: usize,
    pub tail: TailEstimate,
}

impl NormRecord {
    fn from_report(quantity: &str, t: f64, value: f64, report: &NormReport) -> Self {
        NormRecord {
            quantity: quantity.to_string(),
            t,
            value,
            window: Some(report.window),
            basepoints: report.basepoints,
            tail: report.tail,
        }
    }

    fn pointwise(quantity: &str, t: f64, value: f64, window: Option<Window>) -> Self {
        NormRecord {
            quantity: quantity.to_string(),
            t,
            value,
            window,
            basepoints: 1,
            tail: TailEstimate::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EstimateReport {
    pub id: String,
    pub problem: String,
    pub params: String,
    pub times: Vec<f64>,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    pub ratios: Vec<f64>,
    pub max_ratio: f64,
    pub budget: f64,
    pub pass: bool,
    pub provenance: Vec<NormRecord>,
    pub notes: Vec<String>,
}

fn ratio(lhs: f64, rhs: f64) -> f64 {
    if rhs > 0.0 {
        lhs / rhs
    } else if lhs == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

impl EstimateReport {
    #[allow(clippy::too_many_arguments)]
    fn assemble(
        id: &str,
        problem: &str,
        params: String,
        times: Vec<f64>,
        lhs: Vec<f64>,
        rhs: Vec<f64>,
        provenance: Vec<NormRecord>,
        notes: Vec<String>,
    ) -> Self {
        let ratios: Vec<f64> = lhs.iter().zip(&rhs).map(|(l, r)| ratio(*l, *r)).collect();
        let finite = ratios.iter().all(|r| r.is_finite());
        let max_ratio = ratios
            .iter()
            .copied()
            .fold(0.0, |a, b| if b.is_nan() { f64::NAN } else { a.max(b) });
        let budget = budget(id, problem);
        EstimateReport {
            id: id.to_string(),
            problem: problem.to_string(),
            params,
            times,
            lhs,
            rhs,
            ratios,
            max_ratio,
            budget,
            pass: finite && max_ratio <= budget,
            provenance,
            notes,
        }
    }

    /// `t,lhs,rhs,ratio` rows.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,lhs,rhs,ratio")?;
        for k in 0..self.times.len() {
            writeln!(
                out,
                "{},{},{},{}",
                self.times[k], self.lhs[k], self.rhs[k], self.ratios[k]
            )?;
        }
        Ok(())
    }
}

/// `∫_{t_0}^{t_k}` by the trapezoid rule over the checkpoints.
fn cumulative(times: &[f64], values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    for k in 0..values.len() {
        if k > 0 {
            acc += 0.5 * (times[k] - times[k - 1]) * (values[k] + values[k - 1]);
        }
        out.push(acc);
    }
    out
}

fn aggregate_weighted(terms: &[f64], weights: &[f64], q: f64) -> f64 {
    if q.is_infinite() {
        terms
            .iter()
            .zip(weights)
            .map(|(t, w)| if *w > 0.0 { t * w } else { 0.0 })
            .fold(0.0, f64::max)
    } else {
        terms
            .iter()
            .zip(weights)
            .map(|(t, w)| w * t.powf(q))
            .sum::<f64>()
            .powf(1.0 / q)
    }
}

/// Lattice points of the ball plus points on its boundary.
fn ball_samples(x0: &[f64], r: f64) -> Result<Vec<Vec<f64>>> {
    let ball = BallSpec::new(x0.to_vec(), r)?;
    let n = x0.len();
    let mut pts = dense_ball_lattice(&ball, 9);
    if n == 2 {
        for i in 0..32 {
            let a = 2.0 * std::f64::consts::PI * i as f64 / 32.0;
            pts.push(vec![x0[0] + r * a.cos(), x0[1] + r * a.sin()]);
        }
    } else {
        for k in 0..n {
            for sign in [-1.0, 1.0] {
                let mut x = x0.to_vec();
                x[k] += sign * r;
                pts.push(x);
            }
        }
    }
    Ok(pts)
}

fn euclid(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

/// `(1 - θ)`, `θ` and friends as floats.
fn real(r: Rational64) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

fn exponent_from_inverse(inv: Rational64) -> f64 {
    if inv == Rational64::from_integer(0) {
        f64::INFINITY
    } else {
        1.0 / real(inv)
    }
}

/// Parameters of the interpolation inequality, exponents stored as reciprocals
/// (`0` stands for `∞`) so that the admissibility relations are exact.
#[derive(Clone, Debug, PartialEq)]
pub struct InterpolationTriple {
    pub dim: usize,
    pub j: u32,
    pub k: u32,
    pub degree: u32,
    pub inv_p: Rational64,
    pub inv_p0: Rational64,
    pub inv_p1: Rational64,
    pub inv_q: Rational64,
    pub inv_q0: Rational64,
    pub inv_q1: Rational64,
    pub s: Rational64,
    pub s0: Rational64,
    pub s1: Rational64,
    pub theta: Rational64,
}

impl InterpolationTriple {
    /// Checks the index ranges and the three balance relations exactly.
    pub fn validate(&self) -> Result<()> {
        let zero = Rational64::from_integer(0);
        let one = Rational64::from_integer(1);
        let n = Rational64::from_integer(self.dim as i64);
        let (j, k, big_n) = (self.j as i64, self.k as i64, self.degree as i64);
        let bad = |reason: String| Err(Error::invalid("triple", reason));
        if self.dim == 0 {
            return bad("need n ≥ 1".into());
        }
        if !(j < k && k <= big_n + 1) {
            return bad(format!("need 0 ≤ j < k ≤ N + 1, got j = {j}, k = {k}, N = {big_n}"));
        }
        for (name, inv) in [("p", self.inv_p), ("p0", self.inv_p0), ("p1", self.inv_p1)] {
            if !(inv > zero && inv < one) {
                return bad(format!("need {name} ∈ (1, ∞), got 1/{name} = {inv}"));
            }
        }
        for (name, inv) in [("q", self.inv_q), ("q0", self.inv_q0), ("q1", self.inv_q1)] {
            if !(inv >= zero && inv <= one) {
                return bad(format!("need {name} ∈ [1, ∞], got 1/{name} = {inv}"));
            }
        }
        let lower = if big_n == 0 { zero } else { Rational64::new(j, big_n) };
        if !(self.theta >= lower && self.theta <= one) {
            return bad(format!("need θ ∈ [{lower}, 1], got {}", self.theta));
        }
        let cap = Rational64::from_integer(big_n + 1);
        for (name, s) in [("s", self.s), ("s0", self.s0), ("s1", self.s1)] {
            if !(s < cap) {
                return bad(format!("need {name} < N + 1, got {s}"));
            }
        }
        let th = self.theta;
        let jr = Rational64::from_integer(j);
        let kr = Rational64::from_integer(k);
        let p_rel = jr / n + (one - th) * self.inv_p0 + (self.inv_p1 - kr / n) * th;
        if self.inv_p != p_rel {
            return bad(format!("1/p = {} but the Lebesgue balance gives {p_rel}", self.inv_p));
        }
        let q_rel = (one - th) * self.inv_q0 + th * self.inv_q1;
        if self.inv_q != q_rel {
            return bad(format!(
                "1/q = {} but the summability balance gives {q_rel}",
                self.inv_q
            ));
        }
        let s_rel = (one - th) * self.s0 + th * (self.s1 + kr);
        if self.s + jr != s_rel {
            return bad(format!(
                "s + j = {} but the smoothness balance gives {s_rel}",
                self.s + jr
            ));
        }
        Ok(())
    }

    pub fn label(&self) -> String {
        format!(
            "j={} k={} N={} θ={} 1/p=({},{},{}) 1/q=({},{},{}) s=({},{},{})",
            self.j,
            self.k,
            self.degree,
            self.theta,
            self.inv_p,
            self.inv_p0,
            self.inv_p1,
            self.inv_q,
            self.inv_q0,
            self.inv_q1,
            self.s,
            self.s0,
            self.s1
        )
    }

    /// Admissible triples used by the default checks.
    pub fn defaults(dim: usize) -> Vec<InterpolationTriple> {
        let r = Rational64::new;
        let i = Rational64::from_integer;
        match dim {
            1 => vec![
                InterpolationTriple {
                    dim: 1,
                    j: 0,
                    k: 1,
                    degree: 1,
                    inv_p: r(1, 4),
                    inv_p0: r(1, 2),
                    inv_p1: r(1, 2),
                    inv_q: r(1, 2),
                    inv_q0: r(1, 2),
                    inv_q1: r(1, 2),
                    s: r(5, 8),
                    s0: r(1, 2),
                    s1: i(0),
                    theta: r(1, 4),
                },
                InterpolationTriple {
                    dim: 1,
                    j: 1,
                    k: 2,
                    degree: 2,
                    inv_p: r(1, 2),
                    inv_p0: r(1, 2),
                    inv_p1: r(1, 2),
                    inv_q: r(1, 2),
                    inv_q0: r(1, 2),
                    inv_q1: r(1, 2),
                    s: r(1, 2),
                    s0: i(1),
                    s1: i(0),
                    theta: r(1, 2),
                },
            ],
            _ => vec![InterpolationTriple {
                dim,
                j: 0,
                k: 1,
                degree: 1,
                inv_p: Rational64::new(3, 4) - Rational64::new(1, dim as i64),
                inv_p0: r(1, 2),
                inv_p1: r(3, 4),
                inv_q: r(1, 2),
                inv_q0: r(1, 2),
                inv_q1: r(1, 2),
                s: i(1),
                s0: i(0),
                s1: i(0),
                theta: i(1),
            }],
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RatioEntry {
    pub label: String,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

impl RatioEntry {
    fn new(label: String, lhs: f64, rhs: f64) -> Self {
        RatioEntry {
            label,
            lhs,
            rhs,
            ratio: ratio(lhs, rhs),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct InterpolationReport {
    pub function: String,
    pub other: String,
    pub interpolation: Vec<RatioEntry>,
    pub gagliardo_nirenberg: Vec<RatioEntry>,
    pub product: RatioEntry,
    /// Seminorms entering the checks with their tails.
    pub provenance: Vec<NormRecord>,
    pub finite: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct EmbeddingReport {
    pub function: String,
    /// `sup |∇f|` over the doubled base lattice.
    pub gradient_sup: f64,
    /// `|f|_{L^1_{1(p,1)}} + sup |∇Ṗ¹_{x0,1}(f)|`.
    pub tilde_norm: f64,
    /// `|f|_{L^1_{1(p,1)}} + ‖f‖_{L^p(B(1))}`.
    pub norm: f64,
    pub ratio: f64,
    pub norm_ratio: f64,
    /// `max osc_{p,1}(f; x0, 2^j) / (2 sup_{B(x0,2^j)} |f|)` over `j ≥ 0` in the window.
    pub large_scale_ratio: f64,
    pub seminorm: NormRecord,
    pub finite: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct GrowthSample {
    pub x: Vec<f64>,
    pub value: f64,
    pub bound: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GrowthCheck {
    pub function: String,
    pub params: CampanatoParams,
    /// `|f|_{L^s_{q(p,N)}} + ‖f‖_{L^p(B(1))}`.
    pub norm: f64,
    pub seminorm: NormRecord,
    pub samples: Vec<GrowthSample>,
    pub max_ratio: f64,
    pub finite: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct AppendixBReport {
    pub p: f64,
    pub samples: usize,
    pub window: Window,
    pub extended: Window,
    /// `max_x Σ_j osc_{p,0}(u; x, 2^j)` over the sample points of `[0, 1]`.
    pub sup_sum: f64,
    pub argmax: f64,
    pub sup_sum_extended: f64,
    pub relative_change: f64,
    pub stable: bool,
    /// `(m, sup_{(0, 2^{-m})} u)`.
    pub certificate: Vec<(u32, f64)>,
    pub u_at_zero: f64,
    pub discontinuous: bool,
    /// `Σ_{j ≤ -1} 2^{j/p}`.
    pub structural_tail: f64,
    /// `max_{j ≤ -1} osc_{p,0}(u; 0, 2^j) / 2^{j/p}` over the window.
    pub origin_constant: f64,
    /// `Σ_{j = j_min}^{-1} osc_{p,0}(u; 0, 2^j)`.
    pub origin_lower_sum: f64,
}

/// Estimate verifiers sharing one seminorm engine and configuration.
#[derive(Clone, Debug)]
pub struct Harness {
    config: HarnessConfig,
    campanato: Campanato,
    means: Means,
}

impl Harness {
    pub fn new(dim: usize, config: HarnessConfig) -> Result<Self> {
        config.validate()?;
        if config.base.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: config.base.dim(),
            });
        }
        Ok(Harness {
            config,
            campanato: Campanato::new(dim),
            means: Means::new(dim, 1),
        })
    }

    pub fn default_for(dim: usize) -> Self {
        Self::new(dim, HarnessConfig::default_for(dim)).expect("default configuration is valid")
    }

    pub fn config(&self) -> &HarnessConfig {
        &self.config
    }

    pub fn dim(&self) -> usize {
        self.campanato.dim()
    }

    fn osc(&self) -> &Oscillation {
        self.campanato.oscillation()
    }

    fn check_dim(&self, n: usize) -> Result<()> {
        if n != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: n,
            });
        }
        Ok(())
    }

    /// Snapshots of `problem` at the uniform checkpoints of `[0, T]`.
    pub fn solve(&self, name: &str, problem: TransportProblem) -> Result<SolvedProblem> {
        self.check_dim(problem.dim())?;
        let m = self.config.checkpoints;
        let times: Vec<f64> = (0..m).map(|k| problem.horizon * k as f64 / (m - 1) as f64).collect();
        let (lo, hi) = self.config.grid_box();
        let grids = problem.snapshots(&times, &lo, &hi, self.config.spacing, self.config.interpolation)?;
        Ok(SolvedProblem {
            name: name.to_string(),
            problem,
            times,
            fields: grids.into_iter().map(|g| g.into_field()).collect(),
        })
    }

    fn seminorm(&self, f: &ScalarField, params: &CampanatoParams) -> Result<NormReport> {
        self.campanato
            .seminorm_unrestricted(f, params, &self.config.base, self.config.window)
    }

    fn velocity_seminorm(&self, v: &VelocityField, t: f64, params: &CampanatoParams) -> Result<NormReport> {
        self.campanato
            .seminorm_of_components(&v.components(t), params, &self.config.base, self.config.window)
    }

    /// `sup_{x0} (Σ_j w_j (2^{-sj} osc(c; x0, 2^j))^q)^{1/q}` over the base points.
    fn weighted_sup(&self, components: &[ScalarField], params: &CampanatoParams, weights: &[f64]) -> Result<f64> {
        let points = self.config.base.points();
        let values: Vec<f64> = points
            .par_iter()
            .map(|x0| {
                let terms = self.campanato.terms(components, x0, params, self.config.window)?;
                Ok(aggregate_weighted(&terms, weights, params.q))
            })
            .collect::<Result<_>>()?;
        Ok(values.into_iter().fold(0.0, f64::max))
    }

    /// `sup |∇f|` over the base points.
    fn gradient_sup(&self, f: &ScalarField, points: &[Vec<f64>]) -> Result<f64> {
        let g: Vec<f64> = points
            .par_iter()
            .map(|x| Ok(euclid(&f.gradient(x)?)))
            .collect::<Result<_>>()?;
        Ok(g.into_iter().fold(0.0, f64::max))
    }

    /// A norm of `g(τ)` at every checkpoint, using homogeneity in the time factor.
    fn source_series<F>(
        &self,
        g: &Source,
        times: &[f64],
        quantity: &str,
        prov: &mut Vec<NormRecord>,
        norm: F,
    ) -> Result<Vec<f64>>
    where
        F: Fn(&ScalarField) -> Result<(f64, Option<NormReport>)>,
    {
        let (field, factor): (&ScalarField, Box<dyn Fn(f64) -> f64>) = match g {
            Source::Zero(_) => return Ok(vec![0.0; times.len()]),
            Source::Stationary(h) => (h, Box::new(|_| 1.0)),
            Source::Modulated { field, omega } => {
                let w = *omega;
                (field, Box::new(move |t: f64| (w * t).cos().abs()))
            }
        };
        let (value, report) = norm(field)?;
        match &report {
            Some(r) => prov.push(NormRecord::from_report(quantity, times[0], value, r)),
            None => prov.push(NormRecord::pointwise(quantity, times[0], value, None)),
        }
        Ok(times.iter().map(|&t| factor(t) * value).collect())
    }

    /// A norm of `v(τ)` at every checkpoint; computed once for autonomous fields.
    fn velocity_series<F>(
        &self,
        v: &VelocityField,
        times: &[f64],
        quantity: &str,
        prov: &mut Vec<NormRecord>,
        norm: F,
    ) -> Result<Vec<f64>>
    where
        F: Fn(f64) -> Result<(f64, Option<NormReport>)>,
    {
        let mut out = Vec::with_capacity(times.len());
        for (k, &t) in times.iter().enumerate() {
            if k > 0 && v.is_autonomous() {
                out.push(out[0]);
                continue;
            }
            let (value, report) = norm(t)?;
            match &report {
                Some(r) => prov.push(NormRecord::from_report(quantity, t, value, r)),
                None => prov.push(NormRecord::pointwise(quantity, t, value, None)),
            }
            out.push(value);
        }
        Ok(out)
    }

    /// `osc_{p,L}(f(t); x0, r/2) ≤ osc_{p,L}(f0; x0, r) + ∫_0^t [r^{-1} ‖v‖_{L^∞(B)} osc_{p,N}(f; x0, 2r)
    /// + ‖∇·v‖_{L^∞(B)} osc_{p,N}(f; x0, 2r) + δ osc_{p,N}(v; x0, r) ‖∇P^N_{x0,r}(f)‖_{L^∞(B)}
    /// + osc_{p,N}(g; x0, r)] dτ` with `B = B(x0, r)`, `L = 2N - 1` for `N ≥ 1` and `L = 0`
    /// for `N = 0`, `δ = 0` for `N = 0` and `1` otherwise. At each checkpoint the
    /// radius `r = 2^j`, `j` in `window`, with the largest ratio is reported.
    pub fn verify_local_oscillation(
        &self,
        run: &SolvedProblem,
        x0: &[f64],
        window: Window,
        p: f64,
        degree: i32,
    ) -> Result<EstimateReport> {
        self.check_dim(x0.len())?;
        if degree < 0 {
            return Err(Error::invalid("N", "need N ≥ 0"));
        }
        OscParams::new(p, degree)?;
        let big_l = if degree >= 1 { 2 * degree - 1 } else { 0 };
        let delta = if degree == 0 { 0.0 } else { 1.0 };
        let on_l = OscParams { p, degree: big_l };
        let on_n = OscParams { p, degree };
        let (lo, hi) = self.config.grid_box();
        let reach = 2f64.powi(window.j_max + 1);
        if x0
            .iter()
            .enumerate()
            .any(|(i, &c)| c - reach < lo[i] || c + reach > hi[i])
        {
            return Err(Error::invalid("x0", "the balls B(x0, 2r) leave the snapshot box"));
        }
        let prob = &run.problem;
        let times = &run.times;
        let osc = self.osc();
        let radii: Vec<f64> = (window.j_min..=window.j_max).map(|j| 2f64.powi(j)).collect();
        // integrand[j][k]
        let mut integrand = vec![vec![0.0; times.len()]; radii.len()];
        let mut lhs = vec![vec![0.0; times.len()]; radii.len()];
        let mut first = vec![0.0; radii.len()];
        for (k, &t) in times.iter().enumerate() {
            let f = &run.fields[k];
            let g = prob.g.at(t);
            let vcomp = prob.v.components(t);
            let rows: Vec<(f64, f64, f64)> = radii
                .par_iter()
                .map(|&r| {
                    let half = osc.osc(f, x0, r / 2.0, on_l)?;
                    let wide = osc.osc(f, x0, 2.0 * r, on_n)?;
                    let mut vsup: f64 = 0.0;
                    let mut div: f64 = 0.0;
                    let mut slope: f64 = 0.0;
                    let proj = if degree >= 1 {
                        Some(self.means_for(degree)?.project(f, x0, r, degree as u32)?)
                    } else {
                        None
                    };
                    for y in ball_samples(x0, r)? {
                        vsup = vsup.max(euclid(&prob.v.value(&y, t)?));
                        let jac = prob.v.jacobian(&y, t)?;
                        let n = x0.len();
                        div = div.max((0..n).map(|i| jac[i * n + i]).sum::<f64>().abs());
                        if let Some(pp) = &proj {
                            slope = slope.max(euclid(&pp.gradient(&y)));
                        }
                    }
                    let vosc = if delta > 0.0 {
                        osc.osc_vector(&vcomp, x0, r, on_n)?
                    } else {
                        0.0
                    };
                    let gosc = if prob.g.is_zero() {
                        0.0
                    } else {
                        osc.osc(&g, x0, r, on_n)?
                    };
                    let value = vsup / r * wide + div * wide + delta * vosc * slope + gosc;
                    let base = if k == 0 { osc.osc(f, x0, r, on_l)? } else { 0.0 };
                    Ok((half, value, base))
                })
                .collect::<Result<_>>()?;
            for (i, (half, value, base)) in rows.into_iter().enumerate() {
                lhs[i][k] = half;
                integrand[i][k] = value;
                if k == 0 {
                    first[i] = base;
                }
            }
        }
        let cum: Vec<Vec<f64>> = integrand.iter().map(|row| cumulative(times, row)).collect();
        let mut out_l = Vec::new();
        let mut out_r = Vec::new();
        let mut prov = Vec::new();
        for (k, &t) in times.iter().enumerate() {
            let (mut best, mut bl, mut br) = (f64::NEG_INFINITY, 0.0, 0.0);
            let mut arg = 0;
            for i in 0..radii.len() {
                let l = lhs[i][k];
                let r = first[i] + cum[i][k];
                let q = ratio(l, r);
                if q > best || q.is_nan() {
                    best = q;
                    bl = l;
                    br = r;
                    arg = i;
                }
            }
            out_l.push(bl);
            out_r.push(br);
            prov.push(NormRecord::pointwise(
                &format!("osc_{{p,{big_l}}}(f(t); x0, 2^{}/2)", window.j_min + arg as i32),
                t,
                bl,
                Some(window),
            ));
        }
        Ok(EstimateReport::assemble(
            "local_oscillation",
            &run.name,
            format!(
                "x0={x0:?} p={p} N={degree} L={big_l} window={}..{}",
                window.j_min, window.j_max
            ),
            times.clone(),
            out_l,
            out_r,
            prov,
            vec![format!("δ = {delta}")],
        ))
    }

    fn means_for(&self, degree: i32) -> Result<Means> {
        if degree as u32 <= self.means.max_order() {
            Ok(self.means.clone())
        } else {
            Ok(Means::new(self.dim(), degree as u32))
        }
    }

    /// `|f(t)|_{L^s_{q(p,0)}} ≤ (|f0| + ∫_0^t |g|) exp(∫_0^t ‖∇v‖_∞)`, `s ∈ (-n/q, 0)`.
    pub fn verify_estimate_theorem1(&self, run: &SolvedProblem, s: f64, q: f64, p: f64) -> Result<EstimateReport> {
        let n = self.dim() as f64;
        if !(s < 0.0 && s > -n / q) {
            return Err(Error::invalid(
                "s",
                format!("need s ∈ (-n/q, 0) = ({}, 0), got {s}", -n / q),
            ));
        }
        let params = CampanatoParams::new(s, q, p, 0, 0)?;
        let mut prov = Vec::new();
        let mut lhs = Vec::new();
        for (f, &t) in run.fields.iter().zip(&run.times) {
            let r = self.seminorm(f, &params)?;
            prov.push(NormRecord::from_report("|f(t)|", t, r.value, &r));
            lhs.push(r.value);
        }
        let gs = self.source_series(&run.problem.g, &run.times, "|g|", &mut prov, |h| {
            let r = self.seminorm(h, &params)?;
            Ok((r.value, Some(r)))
        })?;
        let lip: Vec<f64> = run.times.iter().map(|&t| run.problem.v.lipschitz(t)).collect();
        let (cg, cl) = (cumulative(&run.times, &gs), cumulative(&run.times, &lip));
        let rhs = (0..lhs.len()).map(|k| (lhs[0] + cg[k]) * cl[k].exp()).collect();
        Ok(EstimateReport::assemble(
            "estimate1",
            &run.name,
            format!("s={s} q={q} p={p} N=0"),
            run.times.clone(),
            lhs,
            rhs,
            prov,
            Vec::new(),
        ))
    }

    /// Tilde seminorm `|z|_{L^1_{q(p,1)}} + sup_{x0} |∇Ṗ¹_{x0,1}(z)|`.
    fn tilde(&self, f: &ScalarField, params: &CampanatoParams) -> Result<(f64, NormReport)> {
        self.campanato
            .tilde_seminorm(&self.means, f, params, &self.config.base, self.config.window)
    }

    /// `|f(t)|~ ≤ (|f0|~ + ∫_0^t |g|~) exp(∫_0^t C)` with
    /// `C(τ) = ‖∇v‖_∞ + sup_{x0} (Σ_j (j⁻)^{q-1} (2^{-j} osc_{p,1}(v; x0, 2^j))^q)^{1/q}`.
    pub fn verify_estimate_theorem2(&self, run: &SolvedProblem, q: f64, p: f64) -> Result<EstimateReport> {
        let params = CampanatoParams::new(1.0, q, p, 1, 0)?;
        let window = self.config.window;
        let weights: Vec<f64> = (window.j_min..=window.j_max)
            .map(|j| (-(j.min(0)) as f64).powf(q - 1.0))
            .collect();
        let lower: Vec<f64> = (window.j_min..=window.j_max)
            .zip(&weights)
            .map(|(j, w)| if j <= 0 { *w } else { 0.0 })
            .collect();
        let mut prov = Vec::new();
        let mut lhs = Vec::new();
        for (f, &t) in run.fields.iter().zip(&run.times) {
            let (v, r) = self.tilde(f, &params)?;
            prov.push(NormRecord::from_report("|f(t)|~", t, v, &r));
            lhs.push(v);
        }
        let gs = self.source_series(&run.problem.g, &run.times, "|g|~", &mut prov, |h| {
            let (v, r) = self.tilde(h, &params)?;
            Ok((v, Some(r)))
        })?;
        let v = &run.problem.v;
        let c = self.velocity_series(v, &run.times, "C(τ)", &mut prov, |t| {
            Ok((
                v.lipschitz(t) + self.weighted_sup(&v.components(t), &params, &weights)?,
                None,
            ))
        })?;
        let cond2_series = self.velocity_series(v, &run.times, "cond2 integrand", &mut prov, |t| {
            Ok((self.weighted_sup(&v.components(t), &params, &lower)?, None))
        })?;
        let unit = OscParams { p, degree: 0 };
        let points = self.config.base.points();
        let unit_sup = |h: &ScalarField| -> Result<f64> {
            let vals: Vec<f64> = points
                .par_iter()
                .map(|x0| self.osc().osc(h, x0, 1.0, unit))
                .collect::<Result<_>>()?;
            Ok(vals.into_iter().fold(0.0, f64::max))
        };
        let g_unit = self.source_series(&run.problem.g, &run.times, "sup osc_{p,0}(g; x0, 1)", &mut prov, |h| {
            Ok((unit_sup(h)?, None))
        })?;
        let cond3 = unit_sup(&run.fields[0])? + cumulative(&run.times, &g_unit).last().copied().unwrap_or(0.0);
        let cond2 = cumulative(&run.times, &cond2_series).last().copied().unwrap_or(0.0);
        if !cond3.is_finite() {
            return Err(Error::Precondition(format!(
                "unit-scale data oscillation is not finite ({cond3})"
            )));
        }
        let (cg, cc) = (cumulative(&run.times, &gs), cumulative(&run.times, &c));
        let rhs = (0..lhs.len()).map(|k| (lhs[0] + cg[k]) * cc[k].exp()).collect();
        Ok(EstimateReport::assemble(
            "estimate2",
            &run.name,
            format!("s=1 q={q} p={p} N=1"),
            run.times.clone(),
            lhs,
            rhs,
            prov,
            vec![
                format!("velocity lower-scale condition: {cond2}"),
                format!("unit-scale data oscillation: {cond3}"),
            ],
        ))
    }

    /// `|f(t)|~ ≤ (|f0|~ + ∫|g|~) exp(∫|v|~)` with `|z|~ = |z|_{L^s_{q(p,·)}} + ‖∇z‖_∞`,
    /// `s > 1`, `N ≥ 1`, evaluated with oscillation degree `N` (first report, id
    /// `estimate3_pN`) and with degree `0` as printed (second report, `estimate3_p0`).
    pub fn verify_estimate_theorem3(
        &self,
        run: &SolvedProblem,
        s: f64,
        q: f64,
        p: f64,
        degree: i32,
    ) -> Result<Vec<EstimateReport>> {
        if !(s > 1.0) || degree < 1 {
            return Err(Error::invalid(
                "s",
                format!("need s > 1 and N ≥ 1, got s = {s}, N = {degree}"),
            ));
        }
        let readings = [
            ("estimate3_pN", CampanatoParams::new(s, q, p, degree, 0)?),
            ("estimate3_p0", {
                let c = CampanatoParams {
                    s,
                    q,
                    p,
                    degree: 0,
                    k: 0,
                };
                c.validate_exponents()?;
                c
            }),
        ];
        let points = self.config.base.points();
        let mut out = Vec::new();
        for (id, params) in readings {
            let mut prov = Vec::new();
            let tilde = |f: &ScalarField| -> Result<(f64, NormReport)> {
                let r = self.seminorm(f, &params)?;
                Ok((r.value + self.gradient_sup(f, &points)?, r))
            };
            let mut lhs = Vec::new();
            for (f, &t) in run.fields.iter().zip(&run.times) {
                let (v, r) = tilde(f)?;
                prov.push(NormRecord::from_report("|f(t)|~", t, v, &r));
                lhs.push(v);
            }
            let gs = self.source_series(&run.problem.g, &run.times, "|g|~", &mut prov, |h| {
                let (v, r) = tilde(h)?;
                Ok((v, Some(r)))
            })?;
            let v = &run.problem.v;
            let vs = self.velocity_series(v, &run.times, "|v|~", &mut prov, |t| {
                let r = self.velocity_seminorm(v, t, &params)?;
                Ok((r.value + v.lipschitz(t), Some(r)))
            })?;
            let (cg, cv) = (cumulative(&run.times, &gs), cumulative(&run.times, &vs));
            let rhs = (0..lhs.len()).map(|k| (lhs[0] + cg[k]) * cv[k].exp()).collect();
            out.push(EstimateReport::assemble(
                id,
                &run.name,
                format!("s={s} q={q} p={p} N={degree} oscillation degree {}", params.degree),
                run.times.clone(),
                lhs,
                rhs,
                prov,
                Vec::new(),
            ));
        }
        Ok(out)
    }

    /// `‖f(t)‖ ≤ (‖f0‖ + ∫‖g‖) (1 + ∫|v|) exp(∫‖∇v‖_∞)` in `L^1_{1(p,1)}`.
    pub fn verify_estimate_corollary(&self, run: &SolvedProblem, p: f64) -> Result<EstimateReport> {
        let params = CampanatoParams::new(1.0, 1.0, p, 1, 0)?;
        let full = |f: &ScalarField| -> Result<(f64, NormReport)> {
            self.campanato
                .full_norm(f, &params, &self.config.base, self.config.window)
        };
        let mut prov = Vec::new();
        let mut lhs = Vec::new();
        for (f, &t) in run.fields.iter().zip(&run.times) {
            let (v, r) = full(f)?;
            prov.push(NormRecord::from_report("‖f(t)‖", t, v, &r));
            lhs.push(v);
        }
        let gs = self.source_series(&run.problem.g, &run.times, "‖g‖", &mut prov, |h| {
            let (v, r) = full(h)?;
            Ok((v, Some(r)))
        })?;
        let v = &run.problem.v;
        let vs = self.velocity_series(v, &run.times, "|v|", &mut prov, |t| {
            let r = self.velocity_seminorm(v, t, &params)?;
            Ok((r.value, Some(r)))
        })?;
        let lip: Vec<f64> = run.times.iter().map(|&t| v.lipschitz(t)).collect();
        let (cg, cv, cl) = (
            cumulative(&run.times, &gs),
            cumulative(&run.times, &vs),
            cumulative(&run.times, &lip),
        );
        let rhs = (0..lhs.len())
            .map(|k| (lhs[0] + cg[k]) * (1.0 + cv[k]) * cl[k].exp())
            .collect();
        Ok(EstimateReport::assemble(
            "estimate4",
            &run.name,
            format!("s=1 q=1 p={p} N=1"),
            run.times.clone(),
            lhs,
            rhs,
            prov,
            Vec::new(),
        ))
    }

    /// Every verifier on every calibration problem (two-dimensional harness).
    pub fn calibration_suite(&self) -> Result<Vec<EstimateReport>> {
        self.check_dim(2)?;
        let mut out = Vec::new();
        for &name in CALIBRATION_PROBLEMS {
            let run = self.solve(name, calibration_problem(name)?)?;
            out.push(self.verify_estimate_theorem1(&run, -0.5, 2.0, 2.0)?);
            out.push(self.verify_estimate_theorem2(&run, 1.0, 2.0)?);
            out.extend(self.verify_estimate_theorem3(&run, 1.5, 2.0, 2.0, 1)?);
            out.push(self.verify_estimate_corollary(&run, 2.0)?);
        }
        Ok(out)
    }

    /// Points for sup norms: the base lattice doubled plus critical points of `f`.
    fn sup_points(&self, f: &ScalarField) -> Vec<Vec<f64>> {
        self.config.base.doubled().with_critical_points(f).points()
    }

    /// Sampled `sup |f|` over the region reached by the window.
    fn sup_norm(&self, f: &ScalarField) -> Result<f64> {
        if let Some(b) = f.sup_bound() {
            return Ok(b);
        }
        let reach = 2f64.powi(self.config.window.j_max);
        let base = &self.config.base;
        let per_axis = if self.dim() == 1 { 801 } else { 81 };
        let sampler = BasePoints::lattice(
            base.lo.iter().map(|a| a - reach).collect(),
            base.hi.iter().map(|b| b + reach).collect(),
            per_axis,
        )?
        .with_critical_points(f);
        let vals: Vec<f64> = sampler
            .points()
            .par_iter()
            .map(|x| Ok(f.eval(x)?.abs()))
            .collect::<Result<_>>()?;
        Ok(vals.into_iter().fold(0.0, f64::max))
    }

    /// `‖∇f‖_∞` against the `L^1_{1(p,1)}` norms, and the large-scale bound
    /// `osc_{p,1}(f; x0, r) ≤ 2 sup_{B(x0,r)} |f|`.
    pub fn check_embeddings(&self, f: &ScalarField, p: f64) -> Result<EmbeddingReport> {
        self.check_dim(f.dim())?;
        let params = CampanatoParams::new(1.0, 1.0, p, 1, 0)?;
        let points = self.sup_points(f);
        let gradient_sup = self.gradient_sup(f, &points)?;
        let semi = self
            .campanato
            .seminorm(f, &params, &self.config.base, self.config.window)?;
        let (slope, _) = self.campanato.mean_slope_sup(&self.means, f, &self.config.base)?;
        let tilde_norm = semi.value + slope;
        let norm = semi.value + self.campanato.unit_ball_norm(f, p)?;
        let window = self.config.window;
        let base_points = self.config.base.points();
        let scales: Vec<i32> = (window.j_min.max(0)..=window.j_max).collect();
        let large: Vec<f64> = base_points
            .par_iter()
            .map(|x0| {
                let mut worst: f64 = 0.0;
                for &j in &scales {
                    let r = 2f64.powi(j);
                    let o = self.osc().osc(f, x0, r, params.osc())?;
                    let mut sup: f64 = 0.0;
                    for y in ball_samples(x0, r)? {
                        sup = sup.max(f.eval(&y)?.abs());
                    }
                    worst = worst.max(ratio(o, 2.0 * sup));
                }
                Ok(worst)
            })
            .collect::<Result<_>>()?;
        let large_scale_ratio = large.into_iter().fold(0.0, f64::max);
        let r1 = ratio(gradient_sup, tilde_norm);
        let r2 = ratio(gradient_sup, norm);
        Ok(EmbeddingReport {
            function: f.name(),
            gradient_sup,
            tilde_norm,
            norm,
            ratio: r1,
            norm_ratio: r2,
            large_scale_ratio,
            seminorm: NormRecord::from_report("|f|_{L^1_{1(p,1)}}", 0.0, semi.value, &semi),
            finite: r1.is_finite() && r2.is_finite() && large_scale_ratio.is_finite(),
        })
    }

    /// `|f(x)| / ((1 + |x|^s) ‖f‖)` for `s ∈ (N, N+1)`, and
    /// `|f(x)| / ((1 + log(1+|x|)^{1/q'} |x|^N) ‖f‖)` for `s = N`, at `|x| = 2^m`.
    pub fn check_growth(&self, f: &ScalarField, params: &CampanatoParams) -> Result<GrowthCheck> {
        self.check_dim(f.dim())?;
        params.validate()?;
        let big_n = params.degree as f64;
        if params.k != 0 || !(params.s >= big_n && params.s < big_n + 1.0) {
            return Err(Error::invalid(
                "s",
                format!("need k = 0 and s ∈ [N, N+1), got s = {}", params.s),
            ));
        }
        let semi = self
            .campanato
            .seminorm(f, params, &self.config.base, self.config.window)?;
        let norm = semi.value + self.campanato.unit_ball_norm(f, params.p)?;
        let n = self.dim();
        let mut dirs = vec![];
        for k in 0..n {
            let mut e = vec![0.0; n];
            e[k] = 1.0;
            dirs.push(e.clone());
            e[k] = -1.0;
            dirs.push(e);
        }
        if n > 1 {
            let d = 1.0 / (n as f64).sqrt();
            dirs.push(vec![d; n]);
        }
        let inv_q_conj = if params.q.is_infinite() {
            1.0
        } else {
            1.0 - 1.0 / params.q
        };
        let mut samples = vec![];
        for m in -2..=12 {
            let rho = 2f64.powi(m);
            for d in &dirs {
                let x: Vec<f64> = d.iter().map(|c| c * rho).collect();
                let value = f.eval(&x)?.abs();
                let shape = if params.s > big_n {
                    1.0 + rho.powf(params.s)
                } else {
                    let l = (1.0 + rho).ln();
                    let lf = if inv_q_conj == 0.0 { 1.0 } else { l.powf(inv_q_conj) };
                    1.0 + lf * rho.powf(big_n)
                };
                let bound = shape * norm;
                samples.push(GrowthSample {
                    x,
                    value,
                    bound,
                    ratio: ratio(value, bound),
                });
            }
        }
        let max_ratio = samples.iter().map(|s| s.ratio).fold(0.0, f64::max);
        Ok(GrowthCheck {
            function: f.name(),
            params: *params,
            norm,
            seminorm: NormRecord::from_report("|f|", 0.0, semi.value, &semi),
            samples,
            max_ratio,
            finite: max_ratio.is_finite(),
        })
    }

    /// `‖|D^m f|‖_{L^p(B(0,1))}`.
    fn derivative_ball_norm(&self, f: &ScalarField, m: u32, p: f64) -> Result<f64> {
        let comps = derivative_components(f, m);
        let mag = ScalarField::from_fallible(format!("|D^{m} {}|", f.name()), f.dim(), move |x: &[f64]| {
            let mut acc = 0.0;
            for c in &comps {
                let v = c.eval(x)?;
                acc += v * v;
            }
            Ok(acc.sqrt())
        });
        self.campanato.unit_ball_norm(&mag, p)
    }

    /// Interpolation and Gagliardo–Nirenberg inequalities for each triple on `f`,
    /// and the product inequality `‖fg‖ ≤ ‖f‖_∞ ‖g‖ + ‖g‖_∞ ‖f‖` in the norm of
    /// `product_params`.
    pub fn check_interpolation_and_product(
        &self,
        f: &ScalarField,
        g: &ScalarField,
        triples: &[InterpolationTriple],
        product_params: &CampanatoParams,
    ) -> Result<InterpolationReport> {
        self.check_dim(f.dim())?;
        self.check_dim(g.dim())?;
        let mut prov = Vec::new();
        let mut interpolation = Vec::new();
        let mut gn = Vec::new();
        for tr in triples {
            tr.validate()?;
            if tr.dim != self.dim() {
                return Err(Error::DimensionMismatch {
                    expected: self.dim(),
                    got: tr.dim,
                });
            }
            let th = real(tr.theta);
            let big_n = tr.degree as i32;
            let p = exponent_from_inverse(tr.inv_p);
            let p0 = exponent_from_inverse(tr.inv_p0);
            let p1 = exponent_from_inverse(tr.inv_p1);
            let mk = |s: Rational64, inv_q: Rational64, p: f64, degree: i32, k: u32| CampanatoParams {
                s: real(s),
                q: exponent_from_inverse(inv_q),
                p,
                degree,
                k,
            };
            let left = mk(tr.s, tr.inv_q, p, big_n - tr.j as i32, tr.j);
            let a = mk(tr.s0, tr.inv_q0, p0, big_n, 0);
            let b = mk(tr.s1, tr.inv_q1, p1, big_n - tr.k as i32, tr.k);
            let rl = self.seminorm(f, &left)?;
            let ra = self.seminorm(f, &a)?;
            let rb = self.seminorm(f, &b)?;
            for (name, r) in [("lhs", &rl), ("rhs0", &ra), ("rhs1", &rb)] {
                prov.push(NormRecord::from_report(
                    &format!("{} {name}", tr.label()),
                    0.0,
                    r.value,
                    r,
                ));
            }
            interpolation.push(RatioEntry::new(
                tr.label(),
                rl.value,
                ra.value.powf(1.0 - th) * rb.value.powf(th),
            ));
            let dj = self.derivative_ball_norm(f, tr.j, p)?;
            let l0 = self.derivative_ball_norm(f, 0, p0)?;
            let mut w = 0.0;
            for m in 0..=tr.k {
                w += self.derivative_ball_norm(f, m, p1)?;
            }
            gn.push(RatioEntry::new(tr.label(), dj, l0.powf(1.0 - th) * w.powf(th)));
        }
        let fg = f.mul(g);
        let norm = |h: &ScalarField| -> Result<(f64, NormReport)> {
            self.campanato
                .full_norm(h, product_params, &self.config.base, self.config.window)
        };
        let (nfg, rfg) = norm(&fg)?;
        let (nf, rf) = norm(f)?;
        let (ng, rg) = norm(g)?;
        prov.push(NormRecord::from_report("‖fg‖", 0.0, nfg, &rfg));
        prov.push(NormRecord::from_report("‖f‖", 0.0, nf, &rf));
        prov.push(NormRecord::from_report("‖g‖", 0.0, ng, &rg));
        let product = RatioEntry::new(
            format!(
                "product k={} s={} q={} p={} N={}",
                product_params.k, product_params.s, product_params.q, product_params.p, product_params.degree
            ),
            nfg,
            self.sup_norm(f)? * ng + self.sup_norm(g)? * nf,
        );
        let finite = interpolation.iter().chain(&gn).all(|e| e.ratio.is_finite()) && product.ratio.is_finite();
        Ok(InterpolationReport {
            function: f.name(),
            other: g.name(),
            interpolation,
            gagliardo_nirenberg: gn,
            product,
            provenance: prov,
            finite,
        })
    }
}

/// A bump with random center in `[-1/2, 1/2]^n`, width in `[1/2, 3/2]` and
/// amplitude in `[1/2, 2]`.
pub fn random_bump(seed: u64, dim: usize) -> Result<ScalarField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let center: Vec<f64> = (0..dim).map(|_| rng.gen_range(-0.5..0.5)).collect();
    let width = rng.gen_range(0.5..1.5);
    let amp = rng.gen_range(0.5..2.0);
    Ok(registry::lookup("bump", dim, &[width, amp])?.translate(&center))
}

/// Twelve one-dimensional registry entries used for the function-space reports;
/// all are `W^{2,2}_loc`, as the default interpolation triples need `D²f`.
pub const FAMILY_1D: [&str; 12] = [
    "linear(2, 0.5)",
    "sin(1)",
    "sin(3)",
    "linear_sin(0.5)",
    "bump",
    "bump(2, 0.5)",
    "gauss",
    "gauss(0.5)",
    "xsinlog",
    "sawtooth_f",
    "gauss(2)",
    "cubic(0.1)",
];

/// The sawtooth `u` (tents of height 1 at `2^{-m}`): multiscale oscillation sums
/// over `[0, 1]`, their stability under window growth, and the jump of `u` at 0.
pub fn appendix_b_example(p: f64, samples: usize, window: Window, extend_by: i32) -> Result<AppendixBReport> {
    if samples < 2 {
        return Err(Error::invalid("samples", "need at least two sample points"));
    }
    if extend_by < 0 {
        return Err(Error::invalid("extend_by", "must be nonnegative"));
    }
    let params = OscParams::new(p, 0)?;
    let u = registry::parse("sawtooth_u", 1)?;
    let osc = Oscillation::new(1);
    let extended = window.extended(extend_by);
    let xs: Vec<f64> = (0..samples).map(|i| i as f64 / (samples - 1) as f64).collect();
    // per point: osc over the extended window
    let profiles: Vec<Vec<f64>> = xs
        .par_iter()
        .map(|&x| {
            (extended.j_min..=extended.j_max)
                .map(|j| osc.osc(&u, &[x], 2f64.powi(j), params))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let offset = (window.j_min - extended.j_min) as usize;
    let inner = |prof: &Vec<f64>| prof[offset..offset + window.len()].iter().sum::<f64>();
    let outer = |prof: &Vec<f64>| prof.iter().sum::<f64>();
    let (mut sup_sum, mut argmax, mut sup_ext) = (0.0f64, 0.0, 0.0f64);
    for (x, prof) in xs.iter().zip(&profiles) {
        let s = inner(prof);
        if s > sup_sum {
            sup_sum = s;
            argmax = *x;
        }
        sup_ext = sup_ext.max(outer(prof));
    }
    let relative_change = (sup_ext - sup_sum).abs() / sup_sum;
    let mut certificate = Vec::new();
    for m in 1..=10u32 {
        let edge = 2f64.powi(-(m as i32));
        let mut best: f64 = 0.0;
        for k in (m + 1)..=(m + 6) {
            best = best.max(u.eval(&[2f64.powi(-(k as i32))])?);
        }
        for i in 1..1000 {
            best = best.max(u.eval(&[edge * i as f64 / 1000.0])?);
        }
        certificate.push((m, best));
    }
    let u_at_zero = u.eval(&[0.0])?;
    let discontinuous = u_at_zero == 0.0 && certificate.iter().all(|c| c.1 >= 0.99);
    let structural_tail = {
        let a = 2f64.powf(-1.0 / p);
        a / (1.0 - a)
    };
    let origin: Vec<(i32, f64)> = (window.j_min..=window.j_max.min(-1))
        .map(|j| Ok((j, osc.osc(&u, &[0.0], 2f64.powi(j), params)?)))
        .collect::<Result<_>>()?;
    let origin_constant = origin
        .iter()
        .map(|(j, o)| o / 2f64.powf(*j as f64 / p))
        .fold(0.0, f64::max);
    let origin_lower_sum = origin.iter().map(|e| e.1).sum();
    Ok(AppendixBReport {
        p,
        samples,
        window,
        extended,
        sup_sum,
        argmax,
        sup_sum_extended: sup_ext,
        relative_change,
        stable: relative_change < 0.01,
        certificate,
        u_at_zero,
        discontinuous,
        structural_tail,
        origin_constant,
        origin_lower_sum,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triple_validation_is_exact() {
        for t in InterpolationTriple::defaults(1)
            .into_iter()
            .chain(InterpolationTriple::defaults(2))
        {
            t.validate().unwrap();
        }
        let mut t = InterpolationTriple::defaults(1)[0].clone();
        t.s += Rational64::new(1, 1_000_000);
        assert!(t.validate().is_err());
        let mut t = InterpolationTriple::defaults(1)[0].clone();
        t.inv_q = Rational64::new(1, 3);
        assert!(t.validate().is_err());
    }

    #[test]
    fn cumulative_trapezoid() {
        let t = [0.0, 1.0, 3.0];
        assert_eq!(cumulative(&t, &[1.0, 1.0, 2.0]), vec![0.0, 1.0, 4.0]);
    }

    #[test]
    fn sawtooth_example() {
        let w = Window::new(-20, 4).unwrap();
        let rep = appendix_b_example(2.0, 101, w, 4).unwrap();
        assert!(rep.discontinuous);
        assert!((rep.structural_tail - (1.0 + 2f64.sqrt())).abs() < 1e-12);
        assert!(rep.sup_sum.is_finite());
        eprintln!("{rep:?}");
    }
}
