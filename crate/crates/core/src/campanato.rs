//! Seminorms `|D^k f|_{L^s_{q(p,N)}} = sup_{x0} (Σ_j (2^{-sj} osc_{p,N}(D^k f; x0, 2^j))^q)^{1/q}`
//! on finite windows and base-point samples, with tail estimates.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::mollify::Means;
use crate::oscillation::{OscParams, Oscillation};
use crate::poly::{homogeneous_indices, unit_ball_volume, MultiIndex};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampanatoParams {
    pub s: f64,
    /// `q ∈ [1, ∞]`; `f64::INFINITY` takes the sup over scales.
    pub q: f64,
    pub p: f64,
    /// Polynomial degree `N ≥ -1`.
    pub degree: i32,
    /// Derivative order.
    pub k: u32,
}

impl CampanatoParams {
    pub fn new(s: f64, q: f64, p: f64, degree: i32, k: u32) -> Result<Self> {
        let params = CampanatoParams { s, q, p, degree, k };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_exponents()?;
        if !(self.s <= self.degree as f64 + 1.0) {
            return Err(Error::invalid(
                "s",
                format!("need s ≤ N + 1 = {}, got {}", self.degree + 1, self.s),
            ));
        }
        Ok(())
    }

    /// Checks `q`, `p` and `N` only.
    pub fn validate_exponents(&self) -> Result<()> {
        if !(self.q >= 1.0) {
            return Err(Error::invalid("q", format!("need q ∈ [1, ∞], got {}", self.q)));
        }
        if !(self.p > 1.0 && self.p.is_finite()) {
            return Err(Error::invalid("p", format!("need p ∈ (1, ∞), got {}", self.p)));
        }
        if self.degree < -1 {
            return Err(Error::invalid("N", format!("need N ≥ -1, got {}", self.degree)));
        }
        if !self.s.is_finite() {
            return Err(Error::invalid("s", format!("need finite s, got {}", self.s)));
        }
        Ok(())
    }

    pub fn osc(&self) -> OscParams {
        OscParams {
            p: self.p,
            degree: self.degree,
        }
    }
}

/// Scales `2^j`, `j = j_min..=j_max`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub j_min: i32,
    pub j_max: i32,
}

impl Window {
    pub fn new(j_min: i32, j_max: i32) -> Result<Self> {
        if j_max < j_min {
            return Err(Error::invalid("window", format!("empty window [{j_min}, {j_max}]")));
        }
        Ok(Window { j_min, j_max })
    }

    pub fn len(&self) -> usize {
        (self.j_max - self.j_min + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.j_max < self.j_min
    }

    pub fn extended(&self, by: i32) -> Window {
        Window {
            j_min: self.j_min - by,
            j_max: self.j_max + by,
        }
    }
}

impl Default for Window {
    fn default() -> Self {
        Window { j_min: -8, j_max: 8 }
    }
}

/// A box `[lo, hi]` sampled by a uniform lattice, plus extra points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasePoints {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub per_axis: usize,
    pub extra: Vec<Vec<f64>>,
}

impl BasePoints {
    pub fn lattice(lo: Vec<f64>, hi: Vec<f64>, per_axis: usize) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::invalid("box", "corner dimensions differ"));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a <= b)) {
            return Err(Error::invalid("box", "need lo ≤ hi on every axis"));
        }
        if per_axis == 0 {
            return Err(Error::invalid("per_axis", "need at least one point per axis"));
        }
        Ok(BasePoints {
            lo,
            hi,
            per_axis,
            extra: Vec::new(),
        })
    }

    /// `[-half, half]^n` with 41 points per axis.
    pub fn default_box(dim: usize, half: f64) -> Self {
        BasePoints {
            lo: vec![-half; dim],
            hi: vec![half; dim],
            per_axis: 41,
            extra: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    /// Adds the critical points of `f` that lie in the box.
    pub fn with_critical_points(mut self, f: &ScalarField) -> Self {
        for c in f.critical_points() {
            let inside = c.len() == self.dim()
                && c.iter()
                    .zip(self.lo.iter().zip(&self.hi))
                    .all(|(x, (a, b))| *a <= *x && x <= b);
            if inside {
                self.extra.push(c);
            }
        }
        self
    }

    /// The lattice with `2 m - 1` points per axis (every old point kept).
    pub fn doubled(&self) -> Self {
        BasePoints {
            per_axis: (2 * self.per_axis).saturating_sub(1).max(1),
            ..self.clone()
        }
    }

    fn axis(&self, k: usize, i: usize) -> f64 {
        if self.per_axis == 1 {
            0.5 * (self.lo[k] + self.hi[k])
        } else {
            self.lo[k] + (self.hi[k] - self.lo[k]) * i as f64 / (self.per_axis - 1) as f64
        }
    }

    pub fn lattice_len(&self) -> usize {
        self.per_axis.pow(self.dim() as u32)
    }

    /// Lattice points (row-major, last axis fastest) followed by the extra points.
    pub fn points(&self) -> Vec<Vec<f64>> {
        let n = self.dim();
        let mut out = Vec::with_capacity(self.lattice_len() + self.extra.len());
        for flat in 0..self.lattice_len() {
            let mut rem = flat;
            let mut x = vec![0.0; n];
            for k in (0..n).rev() {
                x[k] = self.axis(k, rem % self.per_axis);
                rem /= self.per_axis;
            }
            out.push(x);
        }
        out.extend(self.extra.iter().cloned());
        out
    }

    /// Pairs of lattice neighbours along each axis, as flat indices.
    fn neighbours(&self) -> Vec<(usize, usize)> {
        let n = self.dim();
        let m = self.per_axis;
        let mut out = Vec::new();
        for flat in 0..self.lattice_len() {
            let mut stride = 1;
            for _ in 0..n {
                if (flat / stride) % m + 1 < m {
                    out.push((flat, flat + stride));
                }
                stride *= m;
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    /// Contribution of the scales outside the window.
    pub window: f64,
    /// Possible excess of the sup over base points between lattice points.
    pub lattice: f64,
}

impl TailEstimate {
    pub fn total(&self) -> f64 {
        self.window + self.lattice
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct NormReport {
    pub value: f64,
    pub argmax: Vec<f64>,
    pub window: Window,
    pub basepoints: usize,
    pub tail: TailEstimate,
    /// Weighted terms `2^{-sj} osc(x*, 2^j)` at the maximizing base point.
    pub profile: Vec<f64>,
}

/// Oscillation of `D^k f` at scale `r` (Euclidean combination over `|α| = k`).
pub fn derivative_osc(
    osc: &Oscillation,
    components: &[ScalarField],
    x0: &[f64],
    r: f64,
    params: OscParams,
) -> Result<f64> {
    if components.len() == 1 {
        osc.osc(&components[0], x0, r, params)
    } else {
        osc.osc_vector(components, x0, r, params)
    }
}

/// The components `D^α f`, `|α| = k`.
pub fn derivative_components(f: &ScalarField, k: u32) -> Vec<ScalarField> {
    if k == 0 {
        return vec![f.clone()];
    }
    homogeneous_indices(f.dim(), k)
        .iter()
        .map(|a| f.derivative_field(a))
        .collect()
}

fn aggregate(terms: &[f64], q: f64) -> f64 {
    if q.is_infinite() {
        terms.iter().copied().fold(0.0, f64::max)
    } else {
        terms.iter().map(|t| t.powf(q)).sum::<f64>().powf(1.0 / q)
    }
}

/// Geometric extrapolation of one end of the weighted profile, doubled;
/// `edge` is the outermost term and `inner` its neighbour.
fn geometric_tail(edge: f64, inner: f64, q: f64, current: f64) -> f64 {
    if edge == 0.0 {
        return 0.0;
    }
    let rho = if inner > 0.0 { edge / inner } else { f64::INFINITY };
    if q.is_infinite() {
        return if rho <= 1.0 {
            2.0 * (edge * rho - current).max(0.0)
        } else {
            f64::INFINITY
        };
    }
    if rho >= 1.0 {
        return f64::INFINITY;
    }
    2.0 * edge * rho / (1.0 - rho.powf(q)).powf(1.0 / q)
}

/// Seminorm engine: oscillation on a fixed quadrature plus moment means.
#[derive(Clone, Debug)]
pub struct Campanato {
    osc: Oscillation,
}

impl Campanato {
    pub fn new(dim: usize) -> Self {
        Campanato {
            osc: Oscillation::new(dim),
        }
    }

    pub fn with_oscillation(osc: Oscillation) -> Self {
        Campanato { osc }
    }

    pub fn oscillation(&self) -> &Oscillation {
        &self.osc
    }

    pub fn dim(&self) -> usize {
        self.osc.dim()
    }

    /// Weighted terms `2^{-sj} osc_{p,N}(D^k f; x0, 2^j)` over the window.
    pub fn terms(
        &self,
        components: &[ScalarField],
        x0: &[f64],
        params: &CampanatoParams,
        window: Window,
    ) -> Result<Vec<f64>> {
        (window.j_min..=window.j_max)
            .map(|j| {
                let r = 2f64.powi(j);
                Ok(2f64.powf(-params.s * j as f64) * derivative_osc(&self.osc, components, x0, r, params.osc())?)
            })
            .collect()
    }

    /// Window tail at one base point from its weighted terms.
    fn window_tail(&self, components: &[ScalarField], params: &CampanatoParams, window: Window, terms: &[f64]) -> f64 {
        let q = params.q;
        let current = aggregate(terms, q);
        let n = terms.len();
        let upper = {
            let bound = if params.k == 0 && params.s > 0.0 && components.len() == 1 {
                components[0].sup_bound()
            } else {
                None
            };
            match bound {
                // osc ≤ sup |f| (compare with P = 0), summed geometrically
                Some(b) => {
                    let first = b * 2f64.powf(-params.s * (window.j_max + 1) as f64);
                    if q.is_infinite() {
                        (first - current).max(0.0)
                    } else {
                        first / (1.0 - 2f64.powf(-params.s * q)).powf(1.0 / q)
                    }
                }
                None if n >= 2 => geometric_tail(terms[n - 1], terms[n - 2], q, current),
                None => f64::INFINITY,
            }
        };
        let lower = if n >= 2 {
            geometric_tail(terms[0], terms[1], q, current)
        } else {
            f64::INFINITY
        };
        let tail = upper + lower;
        if tail.is_nan() {
            f64::INFINITY
        } else {
            tail
        }
    }

    /// `sup_{x0}` over the base points of the windowed `ℓ^q` aggregate.
    pub fn seminorm(
        &self,
        f: &ScalarField,
        params: &CampanatoParams,
        base: &BasePoints,
        window: Window,
    ) -> Result<NormReport> {
        params.validate()?;
        self.seminorm_of_components(&derivative_components(f, params.k), params, base, window)
    }

    /// As [`Campanato::seminorm`] without the `s ≤ N + 1` restriction; beyond it
    /// the windowed value grows with the window and the tail reports that.
    pub fn seminorm_unrestricted(
        &self,
        f: &ScalarField,
        params: &CampanatoParams,
        base: &BasePoints,
        window: Window,
    ) -> Result<NormReport> {
        params.validate_exponents()?;
        self.seminorm_of_components(&derivative_components(f, params.k), params, base, window)
    }

    /// Seminorm of the vector `(c_1, ..., c_m)`, oscillations combined in `ℓ²`.
    /// `params.k` is ignored; the components are used as given.
    pub fn seminorm_of_components(
        &self,
        components: &[ScalarField],
        params: &CampanatoParams,
        base: &BasePoints,
        window: Window,
    ) -> Result<NormReport> {
        params.validate_exponents()?;
        if components.is_empty() {
            return Err(Error::invalid("components", "need at least one component"));
        }
        if let Some(c) = components.iter().find(|c| c.dim() != self.dim()) {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: c.dim(),
            });
        }
        if base.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: base.dim(),
            });
        }
        let components = components.to_vec();
        let points = base.points();
        let per_point: Vec<(f64, f64, Vec<f64>)> = points
            .par_iter()
            .map(|x0| {
                let terms = self.terms(&components, x0, params, window)?;
                let tail = self.window_tail(&components, params, window, &terms);
                Ok((aggregate(&terms, params.q), tail, terms))
            })
            .collect::<Result<_>>()?;
        let (best, _) =
            per_point.iter().enumerate().fold(
                (0, f64::NEG_INFINITY),
                |(bi, bv), (i, (v, _, _))| {
                    if *v > bv {
                        (i, *v)
                    } else {
                        (bi, bv)
                    }
                },
            );
        let lattice = base
            .neighbours()
            .iter()
            .map(|&(a, b)| (per_point[a].0 - per_point[b].0).abs())
            .fold(0.0, f64::max);
        let window_tail = per_point.iter().map(|t| t.1).fold(0.0, f64::max);
        Ok(NormReport {
            value: per_point[best].0,
            argmax: points[best].clone(),
            window,
            basepoints: points.len(),
            tail: TailEstimate {
                window: window_tail,
                lattice,
            },
            profile: per_point[best].2.clone(),
        })
    }

    /// `‖f‖_{L^p(B(0, 1))}`.
    pub fn unit_ball_norm(&self, f: &ScalarField, p: f64) -> Result<f64> {
        let origin = vec![0.0; self.dim()];
        let normalized = self.osc.osc(f, &origin, 1.0, OscParams { p, degree: -1 })?;
        Ok(normalized * unit_ball_volume(self.dim()).powf(1.0 / p))
    }

    /// Seminorm of `D^k f` plus `‖f‖_{L^p(B(0, 1))}`.
    pub fn full_norm(
        &self,
        f: &ScalarField,
        params: &CampanatoParams,
        base: &BasePoints,
        window: Window,
    ) -> Result<(f64, NormReport)> {
        let report = self.seminorm(f, params, base, window)?;
        Ok((report.value + self.unit_ball_norm(f, params.p)?, report))
    }

    /// `sup_{x0} |∇Ṗ¹_{x0,1}(f)|`, the unit-scale mean slope.
    pub fn mean_slope_sup(&self, means: &Means, f: &ScalarField, base: &BasePoints) -> Result<(f64, Vec<f64>)> {
        let points = base.points();
        let slopes: Vec<f64> = points
            .par_iter()
            .map(|x0| {
                let mut acc = 0.0;
                for k in 0..self.dim() {
                    let g = means.gen_mean(f, &MultiIndex::unit(self.dim(), k), x0, 1.0)?;
                    acc += g * g;
                }
                Ok(acc.sqrt())
            })
            .collect::<Result<_>>()?;
        let (i, v) = slopes
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |b, (i, v)| if v > b.1 { (i, v) } else { b });
        Ok((v, points[i].clone()))
    }

    /// `|f|_{L^1_{q(p,1)}} + sup_{x0} |∇Ṗ¹_{x0,1}(f)|`; `params` must have `s = N = 1`, `k = 0`.
    pub fn tilde_seminorm(
        &self,
        means: &Means,
        f: &ScalarField,
        params: &CampanatoParams,
        base: &BasePoints,
        window: Window,
    ) -> Result<(f64, NormReport)> {
        if params.s != 1.0 || params.degree != 1 || params.k != 0 {
            return Err(Error::invalid("params", "the tilde seminorm needs s = N = 1 and k = 0"));
        }
        let report = self.seminorm(f, params, base, window)?;
        let (slope, _) = self.mean_slope_sup(means, f, base)?;
        Ok((report.value + slope, report))
    }
}
