//! Linear transport `∂_t f + v·∇f = g`, `f(·, 0) = f0`, solved along
//! characteristics: flow maps by fixed-step classical Runge–Kutta, the source
//! integral by composite Simpson on the same time grid.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::grid::{GridField, Interpolation};

/// Upper bound on the number of steps of a single flow evaluation.
pub const MAX_STEPS: usize = 10_000_000;

/// A time-dependent vector field on `R^n`.
pub trait VelocityFunction: Send + Sync {
    fn dim(&self) -> usize;

    fn name(&self) -> String;

    fn value(&self, x: &[f64], t: f64, out: &mut [f64]) -> Result<()>;

    /// `∂v_i/∂x_j` at `(x, t)`, row-major.
    fn jacobian(&self, x: &[f64], t: f64, out: &mut [f64]) -> Result<()>;

    /// `‖∇v(t)‖_∞`, the sup over space of the spectral norm of the Jacobian.
    fn lipschitz(&self, t: f64) -> f64;

    /// Closed-form `Φ_{t,τ}(x)` and its Jacobian, when available.
    fn exact_flow(&self, _x: &[f64], _t: f64, _tau: f64) -> Option<(Vec<f64>, Vec<f64>)> {
        None
    }

    /// True when `v` does not depend on `t`.
    fn autonomous(&self) -> bool {
        false
    }
}

#[derive(Clone)]
pub struct VelocityField(Arc<dyn VelocityFunction>);

impl fmt::Debug for VelocityField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "VelocityField({}, dim {})", self.0.name(), self.0.dim())
    }
}

#[derive(Clone, Debug)]
enum Kind {
    Zero,
    Constant(Vec<f64>),
    Rotation { omega: f64 },
    PulsingRotation { omega: f64, eps: f64 },
    Linear { lambda: f64 },
    Shear { c: f64 },
}

#[derive(Clone, Debug)]
struct Analytic {
    dim: usize,
    label: String,
    kind: Kind,
}

fn rotation(theta: f64) -> [f64; 4] {
    let (s, c) = theta.sin_cos();
    [c, -s, s, c]
}

fn identity(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for k in 0..n {
        m[k * n + k] = 1.0;
    }
    m
}

impl Analytic {
    /// Angular velocity of the rotation fields at time `t`.
    fn rate(&self, t: f64) -> f64 {
        match self.kind {
            Kind::Rotation { omega } => omega,
            Kind::PulsingRotation { omega, eps } => omega * (1.0 + eps * t.sin()),
            _ => 0.0,
        }
    }
}

impl VelocityFunction for Analytic {
    fn dim(&self) -> usize {
        self.dim
    }

    fn name(&self) -> String {
        self.label.clone()
    }

    fn value(&self, x: &[f64], t: f64, out: &mut [f64]) -> Result<()> {
        match &self.kind {
            Kind::Zero => out.fill(0.0),
            Kind::Constant(c) => out.copy_from_slice(c),
            Kind::Rotation { .. } | Kind::PulsingRotation { .. } => {
                let w = self.rate(t);
                out[0] = -w * x[1];
                out[1] = w * x[0];
            }
            Kind::Linear { lambda } => {
                for (o, xi) in out.iter_mut().zip(x) {
                    *o = lambda * xi;
                }
            }
            Kind::Shear { c } => {
                out[0] = c * x[1];
                out[1] = 0.0;
            }
        }
        Ok(())
    }

    fn jacobian(&self, _x: &[f64], t: f64, out: &mut [f64]) -> Result<()> {
        out.fill(0.0);
        match &self.kind {
            Kind::Zero | Kind::Constant(_) => {}
            Kind::Rotation { .. } | Kind::PulsingRotation { .. } => {
                let w = self.rate(t);
                out[1] = -w;
                out[2] = w;
            }
            Kind::Linear { lambda } => {
                let n = self.dim;
                for k in 0..n {
                    out[k * n + k] = *lambda;
                }
            }
            Kind::Shear { c } => out[1] = *c,
        }
        Ok(())
    }

    fn lipschitz(&self, t: f64) -> f64 {
        match &self.kind {
            Kind::Zero | Kind::Constant(_) => 0.0,
            Kind::Rotation { .. } | Kind::PulsingRotation { .. } => self.rate(t).abs(),
            Kind::Linear { lambda } => lambda.abs(),
            Kind::Shear { c } => c.abs(),
        }
    }

    fn autonomous(&self) -> bool {
        !matches!(self.kind, Kind::PulsingRotation { .. })
    }

    fn exact_flow(&self, x: &[f64], t: f64, tau: f64) -> Option<(Vec<f64>, Vec<f64>)> {
        let d = tau - t;
        let n = self.dim;
        let (jac, shift): (Vec<f64>, Vec<f64>) = match &self.kind {
            Kind::Zero => (identity(n), vec![0.0; n]),
            Kind::Constant(c) => (identity(n), c.iter().map(|ci| ci * d).collect()),
            Kind::Rotation { omega } => (rotation(omega * d).to_vec(), vec![0.0; 2]),
            Kind::PulsingRotation { omega, eps } => {
                let theta = omega * (d - eps * (tau.cos() - t.cos()));
                (rotation(theta).to_vec(), vec![0.0; 2])
            }
            Kind::Linear { lambda } => {
                let e = (lambda * d).exp();
                (identity(n).into_iter().map(|v| v * e).collect(), vec![0.0; n])
            }
            Kind::Shear { c } => (vec![1.0, c * d, 0.0, 1.0], vec![0.0; 2]),
        };
        let y = (0..n)
            .map(|i| shift[i] + (0..n).map(|j| jac[i * n + j] * x[j]).sum::<f64>())
            .collect();
        Some((y, jac))
    }
}

/// A registry velocity: name, dimension (`None` for any), parameters with defaults.
pub struct VelocityEntry {
    pub name: &'static str,
    pub dim: Option<usize>,
    pub params: &'static [(&'static str, f64)],
    pub description: &'static str,
}

pub const VELOCITIES: &[VelocityEntry] = &[
    VelocityEntry {
        name: "zero",
        dim: None,
        params: &[],
        description: "v = 0",
    },
    VelocityEntry {
        name: "constant",
        dim: None,
        params: &[("c1", 1.0), ("c2", 0.0), ("c3", 0.0)],
        description: "v = (c1, ..., cn)",
    },
    VelocityEntry {
        name: "rotation",
        dim: Some(2),
        params: &[("omega", 1.0)],
        description: "v = omega (-x2, x1)",
    },
    VelocityEntry {
        name: "pulsing_rotation",
        dim: Some(2),
        params: &[("omega", 1.0), ("eps", 0.5)],
        description: "v = omega (1 + eps sin t) (-x2, x1)",
    },
    VelocityEntry {
        name: "linear",
        dim: None,
        params: &[("lambda", 0.5)],
        description: "v = lambda x",
    },
    VelocityEntry {
        name: "shear",
        dim: Some(2),
        params: &[("c", 1.0)],
        description: "v = (c x2, 0)",
    },
];

fn split_spec(spec: &str) -> Result<(&str, Vec<f64>)> {
    let spec = spec.trim();
    match spec.find('(') {
        Some(i) => {
            let inner = spec[i + 1..]
                .strip_suffix(')')
                .ok_or_else(|| Error::UnknownFunction(format!("{spec}: unbalanced parentheses")))?;
            let args = inner
                .split(',')
                .filter(|a| !a.trim().is_empty())
                .map(|a| {
                    a.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::UnknownFunction(format!("{spec}: bad argument `{a}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((spec[..i].trim(), args))
        }
        None => Ok((spec, Vec::new())),
    }
}

impl VelocityField {
    pub fn new<V: VelocityFunction + 'static>(v: V) -> Self {
        VelocityField(Arc::new(v))
    }

    /// `name` or `name(p1, p2, ...)` from [`VELOCITIES`].
    pub fn parse(spec: &str, dim: usize) -> Result<Self> {
        let (name, args) = split_spec(spec)?;
        let entry = VELOCITIES
            .iter()
            .find(|e| e.name == name)
            .ok_or_else(|| Error::UnknownFunction(format!("velocity `{name}`")))?;
        if let Some(d) = entry.dim {
            if d != dim {
                return Err(Error::DimensionMismatch { expected: d, got: dim });
            }
        }
        if dim == 0 {
            return Err(Error::invalid("dim", "need dim ≥ 1"));
        }
        let max_args = if name == "constant" { dim } else { entry.params.len() };
        if args.len() > max_args {
            return Err(Error::invalid(
                "velocity",
                format!("{name} takes at most {max_args} parameters, got {}", args.len()),
            ));
        }
        let arg = |k: usize| args.get(k).copied().unwrap_or(entry.params[k].1);
        let kind = match name {
            "zero" => Kind::Zero,
            "constant" => Kind::Constant(
                (0..dim)
                    .map(|k| args.get(k).copied().unwrap_or(if k == 0 { 1.0 } else { 0.0 }))
                    .collect(),
            ),
            "rotation" => Kind::Rotation { omega: arg(0) },
            "pulsing_rotation" => Kind::PulsingRotation {
                omega: arg(0),
                eps: arg(1),
            },
            "linear" => Kind::Linear { lambda: arg(0) },
            "shear" => Kind::Shear { c: arg(0) },
            _ => unreachable!("registry entries are matched above"),
        };
        Ok(VelocityField::new(Analytic {
            dim,
            label: spec.trim().to_string(),
            kind,
        }))
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn name(&self) -> String {
        self.0.name()
    }

    pub fn value(&self, x: &[f64], t: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dim()];
        self.0.value(x, t, &mut out)?;
        Ok(out)
    }

    pub fn jacobian(&self, x: &[f64], t: f64) -> Result<Vec<f64>> {
        let n = self.dim();
        let mut out = vec![0.0; n * n];
        self.0.jacobian(x, t, &mut out)?;
        Ok(out)
    }

    pub fn is_autonomous(&self) -> bool {
        self.0.autonomous()
    }

    pub fn lipschitz(&self, t: f64) -> f64 {
        self.0.lipschitz(t)
    }

    pub fn exact_flow(&self, x: &[f64], t: f64, tau: f64) -> Option<(Vec<f64>, Vec<f64>)> {
        self.0.exact_flow(x, t, tau)
    }

    /// The component `v_i(·, t)` as a scalar field.
    pub fn component(&self, i: usize, t: f64) -> ScalarField {
        let v = self.clone();
        let name = format!("{}[{i}](t = {t})", self.name());
        let n = self.dim();
        ScalarField::from_fallible(name, n, move |x: &[f64]| Ok(v.value(x, t)?[i]))
    }

    pub fn components(&self, t: f64) -> Vec<ScalarField> {
        (0..self.dim()).map(|i| self.component(i, t)).collect()
    }
}

/// Spectral norm of a row-major `n × n` matrix.
pub fn spectral_norm(m: &[f64], n: usize) -> f64 {
    if n == 1 {
        return m[0].abs();
    }
    let a = DMatrix::from_row_slice(n, n, m);
    a.singular_values().iter().copied().fold(0.0, f64::max)
}

/// Velocity sampled on grids at increasing times; linear in time, spatial
/// interpolation as configured on the grids.
#[derive(Clone, Debug)]
pub struct GridVelocity {
    times: Vec<f64>,
    /// `slices[k][i]` is component `i` at `times[k]`.
    slices: Vec<Vec<GridField>>,
    lipschitz: Vec<f64>,
    name: String,
}

impl GridVelocity {
    pub fn new(times: Vec<f64>, slices: Vec<Vec<GridField>>) -> Result<Self> {
        if times.is_empty() || times.len() != slices.len() {
            return Err(Error::Format("need one slice of components per time".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Format("times must be strictly increasing".into()));
        }
        let n = slices[0].len();
        for s in &slices {
            if s.len() != n || s.iter().any(|g| g.dim() != n) {
                return Err(Error::Format(format!(
                    "every slice needs {n} components on {n}-dimensional grids"
                )));
            }
        }
        let lipschitz = slices.iter().map(|s| Self::slice_lipschitz(s)).collect();
        Ok(GridVelocity {
            times,
            slices,
            lipschitz,
            name: "grid velocity".into(),
        })
    }

    /// Samples a velocity at the given times on `[lo, hi]` with spacing `h`.
    pub fn sample(
        v: &VelocityField,
        times: &[f64],
        lo: &[f64],
        hi: &[f64],
        h: f64,
        interpolation: Interpolation,
    ) -> Result<Self> {
        let slices = times
            .iter()
            .map(|&t| {
                v.components(t)
                    .iter()
                    .map(|c| Ok(GridField::sample(c, lo, hi, h)?.with_interpolation(interpolation)))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let mut g = Self::new(times.to_vec(), slices)?;
        g.name = format!("grid({})", v.name());
        Ok(g)
    }

    /// Max over interior nodes of the spectral norm of the centered-difference Jacobian.
    fn slice_lipschitz(slice: &[GridField]) -> f64 {
        let n = slice.len();
        let shape = slice[0].shape().to_vec();
        let h = slice[0].spacing();
        let total: usize = shape.iter().product();
        let mut strides = vec![1usize; n];
        for k in (0..n.saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * shape[k + 1];
        }
        (0..total)
            .into_par_iter()
            .filter_map(|flat| {
                let mut m = vec![0.0; n * n];
                for j in 0..n {
                    let idx = (flat / strides[j]) % shape[j];
                    if idx == 0 || idx + 1 == shape[j] {
                        return None;
                    }
                    for (i, g) in slice.iter().enumerate() {
                        let v = g.values();
                        m[i * n + j] = (v[flat + strides[j]] - v[flat - strides[j]]) / (2.0 * h);
                    }
                }
                Some(spectral_norm(&m, n))
            })
            .reduce(|| 0.0, f64::max)
    }

    fn bracket(&self, t: f64) -> (usize, usize, f64) {
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 {
            (0, 0, 0.0)
        } else if k == self.times.len() {
            let last = self.times.len() - 1;
            (last, last, 0.0)
        } else {
            let (a, b) = (self.times[k - 1], self.times[k]);
            (k - 1, k, (t - a) / (b - a))
        }
    }
}

impl VelocityFunction for GridVelocity {
    fn dim(&self) -> usize {
        self.slices[0].len()
    }

    fn name(&self) -> String {
        self.name.clone()
    }

    fn value(&self, x: &[f64], t: f64, out: &mut [f64]) -> Result<()> {
        let (a, b, w) = self.bracket(t);
        for (i, o) in out.iter_mut().enumerate() {
            let va = self.slices[a][i].interpolate(x)?;
            *o = if w == 0.0 {
                va
            } else {
                (1.0 - w) * va + w * self.slices[b][i].interpolate(x)?
            };
        }
        Ok(())
    }

    fn jacobian(&self, x: &[f64], t: f64, out: &mut [f64]) -> Result<()> {
        let n = self.dim();
        let h = self.slices[0][0].spacing();
        let mut xp = x.to_vec();
        let mut vp = vec![0.0; n];
        let mut vm = vec![0.0; n];
        for j in 0..n {
            xp[j] = x[j] + h;
            self.value(&xp, t, &mut vp)?;
            xp[j] = x[j] - h;
            self.value(&xp, t, &mut vm)?;
            xp[j] = x[j];
            for i in 0..n {
                out[i * n + j] = (vp[i] - vm[i]) / (2.0 * h);
            }
        }
        Ok(())
    }

    fn lipschitz(&self, t: f64) -> f64 {
        let (a, b, _) = self.bracket(t);
        self.lipschitz[a].max(self.lipschitz[b])
    }
}

/// Number of uniform steps of size at most `dt` covering `[t, τ]`, and the signed step.
fn steps(t: f64, tau: f64, dt: f64, even: bool) -> Result<(usize, f64)> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid("dt", format!("need Δt > 0, got {dt}")));
    }
    let span = tau - t;
    if span == 0.0 {
        return Ok((0, 0.0));
    }
    let raw = (span.abs() / dt * (1.0 - 1e-12)).ceil().max(1.0);
    if !(raw <= MAX_STEPS as f64) {
        return Err(Error::invalid(
            "dt",
            format!("{raw} steps exceed the limit {MAX_STEPS}"),
        ));
    }
    let mut m = raw as usize;
    if even && m % 2 == 1 {
        m += 1;
    }
    Ok((m, span / m as f64))
}

fn axpy(x: &[f64], a: f64, k: &[f64]) -> Vec<f64> {
    x.iter().zip(k).map(|(xi, ki)| xi + a * ki).collect()
}

/// Scratch space for [`rk4_advance`].
struct Rk4Buf {
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
}

impl Rk4Buf {
    fn new(n: usize) -> Self {
        Rk4Buf {
            k: [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]],
            tmp: vec![0.0; n],
        }
    }
}

/// One classical Runge–Kutta step of size `h` from `(x, s)`, in place.
fn rk4_advance(v: &VelocityField, x: &mut [f64], s: f64, h: f64, buf: &mut Rk4Buf) -> Result<()> {
    let f = &v.0;
    let n = x.len();
    let Rk4Buf { k, tmp } = buf;
    let [k1, k2, k3, k4] = k;
    f.value(x, s, k1)?;
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * h * k1[i];
    }
    f.value(tmp, s + 0.5 * h, k2)?;
    for i in 0..n {
        tmp[i] = x[i] + 0.5 * h * k2[i];
    }
    f.value(tmp, s + 0.5 * h, k3)?;
    for i in 0..n {
        tmp[i] = x[i] + h * k3[i];
    }
    f.value(tmp, s + h, k4)?;
    for i in 0..n {
        x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    if x.iter().any(|c| !c.is_finite()) {
        return Err(Error::Domain {
            field: v.name(),
            point: x.to_vec(),
        });
    }
    Ok(())
}

fn rk4_step(v: &VelocityField, x: &[f64], s: f64, h: f64) -> Result<Vec<f64>> {
    let mut y = x.to_vec();
    rk4_advance(v, &mut y, s, h, &mut Rk4Buf::new(x.len()))?;
    Ok(y)
}

/// `Φ_{t,τ}(x)`: the solution at `τ` of `dX/dσ = v(X, σ)`, `X(t) = x`.
pub fn flow(v: &VelocityField, x: &[f64], t: f64, tau: f64, dt: f64) -> Result<Vec<f64>> {
    check_point(v, x)?;
    let (m, h) = steps(t, tau, dt, false)?;
    let mut y = x.to_vec();
    let mut buf = Rk4Buf::new(y.len());
    for k in 0..m {
        rk4_advance(v, &mut y, t + k as f64 * h, h, &mut buf)?;
    }
    Ok(y)
}

/// The points `(σ_k, X(σ_k))` of the discrete trajectory from `t` to `τ`.
pub fn trajectory(v: &VelocityField, x: &[f64], t: f64, tau: f64, dt: f64) -> Result<Vec<(f64, Vec<f64>)>> {
    check_point(v, x)?;
    let (m, h) = steps(t, tau, dt, false)?;
    let mut out = Vec::with_capacity(m + 1);
    let mut y = x.to_vec();
    out.push((t, y.clone()));
    for k in 0..m {
        y = rk4_step(v, &y, t + k as f64 * h, h)?;
        let s = if k + 1 == m { tau } else { t + (k + 1) as f64 * h };
        out.push((s, y.clone()));
    }
    Ok(out)
}

/// Trajectory as CSV with columns `tau, x1, ..., xn`.
pub fn write_trajectory_csv<W: Write>(points: &[(f64, Vec<f64>)], mut out: W) -> Result<()> {
    let n = points.first().map_or(0, |p| p.1.len());
    let header: Vec<String> = std::iter::once("tau".to_string())
        .chain((1..=n).map(|i| format!("x{i}")))
        .collect();
    writeln!(out, "{}", header.join(","))?;
    for (s, x) in points {
        let row: Vec<String> = std::iter::once(format!("{s:e}"))
            .chain(x.iter().map(|v| format!("{v:e}")))
            .collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

fn grid_len(lo: &[f64], hi: &[f64], h: f64) -> usize {
    lo.iter()
        .zip(hi)
        .map(|(a, b)| ((b - a) / h).round().max(0.0) as usize + 1)
        .product()
}

fn check_point(v: &VelocityField, x: &[f64]) -> Result<()> {
    if x.len() != v.dim() {
        return Err(Error::DimensionMismatch {
            expected: v.dim(),
            got: x.len(),
        });
    }
    Ok(())
}

#[derive(Clone, Debug, Serialize)]
pub struct FlowResult {
    pub endpoint: Vec<f64>,
    /// `∇Φ_{t,τ}(x)`, row-major.
    pub jacobian: Vec<f64>,
    pub steps: usize,
    pub step: f64,
}

/// `Φ_{t,τ}(x)` together with `∇Φ` from the variational equation `J' = ∇v(X) J`.
pub fn flow_jacobian(v: &VelocityField, x: &[f64], t: f64, tau: f64, dt: f64) -> Result<FlowResult> {
    check_point(v, x)?;
    let n = v.dim();
    let (m, h) = steps(t, tau, dt, false)?;
    // state = (X, J) with J row-major
    let rhs = |state: &[f64], s: f64| -> Result<Vec<f64>> {
        let (xs, js) = state.split_at(n);
        let mut out = v.value(xs, s)?;
        let a = v.jacobian(xs, s)?;
        out.reserve(n * n);
        for i in 0..n {
            for j in 0..n {
                out.push((0..n).map(|k| a[i * n + k] * js[k * n + j]).sum());
            }
        }
        Ok(out)
    };
    let mut state = x.to_vec();
    state.extend(identity(n));
    for k in 0..m {
        let s = t + k as f64 * h;
        let k1 = rhs(&state, s)?;
        let k2 = rhs(&axpy(&state, 0.5 * h, &k1), s + 0.5 * h)?;
        let k3 = rhs(&axpy(&state, 0.5 * h, &k2), s + 0.5 * h)?;
        let k4 = rhs(&axpy(&state, h, &k3), s + h)?;
        for i in 0..state.len() {
            state[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    let jacobian = state.split_off(n);
    Ok(FlowResult {
        endpoint: state,
        jacobian,
        steps: m,
        step: h,
    })
}

/// Composite Simpson for `∫_a^b h(s) ds` on `m` (even) panels.
fn simpson<F: FnMut(f64) -> f64>(a: f64, b: f64, m: usize, mut h: F) -> f64 {
    if m == 0 || a == b {
        return 0.0;
    }
    let step = (b - a) / m as f64;
    let mut acc = h(a) + h(b);
    for k in 1..m {
        acc += if k % 2 == 1 { 4.0 } else { 2.0 } * h(a + k as f64 * step);
    }
    acc * step / 3.0
}

/// `∫_a^b ‖∇v(τ)‖_∞ dτ` by composite Simpson with steps of at most `dt`.
pub fn lipschitz_integral(v: &VelocityField, a: f64, b: f64, dt: f64) -> Result<f64> {
    let (m, _) = steps(a, b, dt, true)?;
    Ok(simpson(a, b, m, |s| v.lipschitz(s)))
}

/// The source `g(x, t)`.
#[derive(Clone, Debug)]
pub enum Source {
    Zero(usize),
    /// `g(x, t) = h(x)`.
    Stationary(ScalarField),
    /// `g(x, t) = cos(ω t) h(x)`.
    Modulated {
        field: ScalarField,
        omega: f64,
    },
}

impl Source {
    pub fn dim(&self) -> usize {
        match self {
            Source::Zero(n) => *n,
            Source::Stationary(f) | Source::Modulated { field: f, .. } => f.dim(),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Source::Zero(_))
    }

    fn factor(&self, t: f64) -> f64 {
        match self {
            Source::Zero(_) => 0.0,
            Source::Stationary(_) => 1.0,
            Source::Modulated { omega, .. } => (omega * t).cos(),
        }
    }

    pub fn value(&self, x: &[f64], t: f64) -> Result<f64> {
        match self {
            Source::Zero(_) => Ok(0.0),
            Source::Stationary(f) | Source::Modulated { field: f, .. } => Ok(self.factor(t) * f.eval(x)?),
        }
    }

    pub fn gradient(&self, x: &[f64], t: f64) -> Result<Vec<f64>> {
        match self {
            Source::Zero(n) => Ok(vec![0.0; *n]),
            Source::Stationary(f) | Source::Modulated { field: f, .. } => {
                let c = self.factor(t);
                Ok(f.gradient(x)?.into_iter().map(|g| c * g).collect())
            }
        }
    }

    /// `g(·, t)` as a scalar field.
    pub fn at(&self, t: f64) -> ScalarField {
        match self {
            Source::Zero(n) => ScalarField::constant(*n, 0.0),
            Source::Stationary(f) => f.clone(),
            Source::Modulated { field, .. } => field.scale(self.factor(t)),
        }
    }
}

#[derive(Clone, Debug)]
pub struct TransportProblem {
    pub f0: ScalarField,
    pub v: VelocityField,
    pub g: Source,
    pub horizon: f64,
    pub dt: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GrowthReport {
    pub t: f64,
    /// `max |Φ_{t,0}(x)| / (1 + |x|)` and `max |Φ_{0,t}(x)| / (1 + |x|)` over the samples.
    pub flow_ratio: f64,
    /// `max(1, ∫_0^t |v(0, τ)| dτ) exp(∫_0^t ‖∇v‖_∞)`.
    pub flow_constant: f64,
    /// `max |f(x, t)| / (1 + |x|)` over the samples.
    pub solution_ratio: f64,
    /// `(A + ∫_0^t B) (1 + K)` from the sampled linear growth rates `A` of `f0`
    /// and `B(τ)` of `g(τ)` on the box enlarged by the flow constant `K`.
    pub solution_constant: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct GradientReport {
    pub t: f64,
    /// Max of `|∇f(x, t)|` over the samples.
    pub max_gradient: f64,
    /// `(max |∇f0| + ∫ max |∇g|) exp(2 ∫ ‖∇v‖_∞)`, maxima over the characteristic points.
    pub bound: f64,
    pub holds: bool,
}

impl TransportProblem {
    pub fn new(f0: ScalarField, v: VelocityField, g: Source, horizon: f64, dt: f64) -> Result<Self> {
        let n = f0.dim();
        if v.dim() != n || g.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: if v.dim() != n { v.dim() } else { g.dim() },
            });
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::invalid("T", format!("need T > 0, got {horizon}")));
        }
        if !(dt > 0.0 && dt <= horizon) {
            return Err(Error::invalid("dt", format!("need 0 < Δt ≤ T, got {dt}")));
        }
        Ok(TransportProblem { f0, v, g, horizon, dt })
    }

    /// Default step `T / 512`.
    pub fn with_default_step(f0: ScalarField, v: VelocityField, g: Source, horizon: f64) -> Result<Self> {
        Self::new(f0, v, g, horizon, horizon / 512.0)
    }

    pub fn dim(&self) -> usize {
        self.f0.dim()
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !(0.0..=self.horizon * (1.0 + 1e-12)).contains(&t) {
            return Err(Error::invalid(
                "t",
                format!("need 0 ≤ t ≤ T = {}, got {t}", self.horizon),
            ));
        }
        Ok(())
    }

    /// `f(x, t)` by the backward characteristic through `(x, t)`; the source is
    /// integrated by Simpson over the recorded characteristic nodes.
    pub fn solve_at(&self, x: &[f64], t: f64) -> Result<f64> {
        self.check_time(t)?;
        check_point(&self.v, x)?;
        let (m, h) = steps(t, 0.0, self.dt, true)?;
        let mut y = x.to_vec();
        let mut acc = 0.0;
        let weight = |k: usize| {
            if k == 0 || k == m {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            }
        };
        let mut buf = Rk4Buf::new(y.len());
        for k in 0..m {
            let s = t + k as f64 * h;
            if !self.g.is_zero() {
                acc += weight(k) * self.g.value(&y, s)?;
            }
            rk4_advance(&self.v, &mut y, s, h, &mut buf)?;
        }
        if !self.g.is_zero() && m > 0 {
            acc += weight(m) * self.g.value(&y, 0.0)?;
        }
        // h < 0 on the backward sweep
        Ok(self.f0.eval(&y)? - acc * h / 3.0)
    }

    pub fn solve(&self, points: &[Vec<f64>], t: f64) -> Result<Vec<f64>> {
        points.par_iter().map(|x| self.solve_at(x, t)).collect()
    }

    /// `f(x, t)` by inverting the forward flow `Φ_{0,t}(y) = x` with Newton's
    /// method, then integrating the source forward from `y`.
    pub fn solve_forward_at(&self, x: &[f64], t: f64) -> Result<f64> {
        self.check_time(t)?;
        check_point(&self.v, x)?;
        let n = self.dim();
        let mut y = x.to_vec();
        let mut converged = false;
        let mut last = f64::INFINITY;
        for _ in 0..50 {
            let fr = flow_jacobian(&self.v, &y, 0.0, t, self.dt)?;
            let r: Vec<f64> = (0..n).map(|i| fr.endpoint[i] - x[i]).collect();
            let size = r.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let scale = 1.0 + x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if size <= 1e-14 * scale || (size >= last && size <= 1e-11 * scale) {
                converged = true;
                break;
            }
            last = size;
            let jac = DMatrix::from_row_slice(n, n, &fr.jacobian);
            let step = jac
                .lu()
                .solve(&nalgebra::DVector::from_vec(r))
                .ok_or(Error::SingularSystem {
                    context: "forward flow inversion",
                })?;
            for i in 0..n {
                y[i] -= step[i];
            }
        }
        if !converged {
            return Err(Error::Nonconvergence {
                context: "forward flow inversion",
                iterations: 50,
                residual: last,
            });
        }
        let mut acc = 0.0;
        if !self.g.is_zero() {
            let (m, h) = steps(0.0, t, self.dt, true)?;
            let mut z = y.clone();
            for k in 0..=m {
                let s = k as f64 * h;
                let w = if k == 0 || k == m {
                    1.0
                } else if k % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                acc += w * self.g.value(&z, s)?;
                if k < m {
                    z = rk4_step(&self.v, &z, s, h)?;
                }
            }
            acc *= h / 3.0;
        }
        Ok(self.f0.eval(&y)? + acc)
    }

    pub fn solve_forward(&self, points: &[Vec<f64>], t: f64) -> Result<Vec<f64>> {
        points.par_iter().map(|x| self.solve_forward_at(x, t)).collect()
    }

    /// `∇f(x, t) = ∇f0(y) ∇Φ_{t,0}(x) + ∫_0^t ∇g(Φ_{t,s}(x), s) ∇Φ_{t,s}(x) ds`;
    /// also returns `|∇f0(y)|` and the maxima of `|∇g|` at the Simpson nodes.
    fn gradient_parts(&self, x: &[f64], t: f64) -> Result<(Vec<f64>, f64, Vec<f64>)> {
        let n = self.dim();
        let (m, h) = steps(t, 0.0, self.dt, true)?;
        let mut gsup = Vec::with_capacity(m + 1);
        let mut acc = vec![0.0; n];
        let mut point = x.to_vec();
        let mut jac = identity(n);
        let weight = |k: usize| {
            if k == 0 || k == m {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            }
        };
        for k in 0..=m {
            let s = t + k as f64 * h;
            let dg = self.g.gradient(&point, s)?;
            gsup.push(dg.iter().map(|v| v * v).sum::<f64>().sqrt());
            for j in 0..n {
                acc[j] += weight(k) * (0..n).map(|i| dg[i] * jac[i * n + j]).sum::<f64>();
            }
            if k < m {
                let fr = flow_jacobian(&self.v, &point, s, s + h, h.abs())?;
                let mut next = vec![0.0; n * n];
                for i in 0..n {
                    for j in 0..n {
                        next[i * n + j] = (0..n).map(|l| fr.jacobian[i * n + l] * jac[l * n + j]).sum();
                    }
                }
                jac = next;
                point = fr.endpoint;
            }
        }
        let df0 = self.f0.gradient(&point)?;
        let mut grad: Vec<f64> = (0..n)
            .map(|j| (0..n).map(|i| df0[i] * jac[i * n + j]).sum::<f64>())
            .collect();
        if m > 0 {
            for j in 0..n {
                grad[j] -= acc[j] * h / 3.0;
            }
        }
        let f0_norm = df0.iter().map(|v| v * v).sum::<f64>().sqrt();
        Ok((grad, f0_norm, gsup))
    }

    pub fn gradient_at(&self, x: &[f64], t: f64) -> Result<Vec<f64>> {
        self.check_time(t)?;
        Ok(self.gradient_parts(x, t)?.0)
    }

    /// Samples `‖∇f(t)‖_∞ ≤ (‖∇f0‖_∞ + ∫_0^t ‖∇g‖_∞) exp(2 ∫_0^t ‖∇v‖_∞)`.
    pub fn gradient_bound_check(&self, points: &[Vec<f64>], t: f64) -> Result<GradientReport> {
        self.check_time(t)?;
        let parts: Vec<_> = points
            .par_iter()
            .map(|x| self.gradient_parts(x, t))
            .collect::<Result<_>>()?;
        let (m, h) = steps(t, 0.0, self.dt, true)?;
        let mut max_gradient = 0.0f64;
        let mut f0_sup = 0.0f64;
        let mut g_sup = vec![0.0f64; m + 1];
        for (grad, f0n, gs) in &parts {
            max_gradient = max_gradient.max(grad.iter().map(|v| v * v).sum::<f64>().sqrt());
            f0_sup = f0_sup.max(*f0n);
            for (a, b) in g_sup.iter_mut().zip(gs) {
                *a = a.max(*b);
            }
        }
        let g_int = if m == 0 {
            0.0
        } else {
            let mut acc = 0.0;
            for (k, g) in g_sup.iter().enumerate() {
                let w = if k == 0 || k == m {
                    1.0
                } else if k % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                acc += w * g;
            }
            acc * h.abs() / 3.0
        };
        let lip = lipschitz_integral(&self.v, 0.0, t, self.dt)?;
        let bound = (f0_sup + g_int) * (2.0 * lip).exp();
        Ok(GradientReport {
            t,
            max_gradient,
            bound,
            holds: max_gradient <= bound * (1.0 + 1e-9) + 1e-12,
        })
    }

    /// Linear growth of flows and solutions over `points`.
    pub fn growth_check(&self, points: &[Vec<f64>], t: f64) -> Result<GrowthReport> {
        self.check_time(t)?;
        let n = self.dim();
        let norm = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let origin = vec![0.0; n];
        let (m, _) = steps(0.0, t, self.dt, true)?;
        let drift = simpson(0.0, t, m, |s| {
            self.v.value(&origin, s).map_or(f64::INFINITY, |v| norm(&v))
        });
        let lip = lipschitz_integral(&self.v, 0.0, t, self.dt)?;
        let flow_constant = drift.max(1.0) * lip.exp();
        let ratios: Vec<(f64, f64)> = points
            .par_iter()
            .map(|x| {
                let back = flow(&self.v, x, t, 0.0, self.dt)?;
                let fwd = flow(&self.v, x, 0.0, t, self.dt)?;
                let scale = 1.0 + norm(x);
                let fr = norm(&back).max(norm(&fwd)) / scale;
                Ok((fr, self.solve_at(x, t)?.abs() / scale))
            })
            .collect::<Result<_>>()?;
        let flow_ratio = ratios.iter().map(|r| r.0).fold(0.0, f64::max);
        let solution_ratio = ratios.iter().map(|r| r.1).fold(0.0, f64::max);
        // growth rates of f0 and g(τ) on the enlarged box
        let radius = points.iter().map(|x| norm(x)).fold(0.0, f64::max);
        let reach = flow_constant * (1.0 + radius);
        let probe: Vec<Vec<f64>> = points
            .iter()
            .map(|x| {
                let r = norm(x);
                if r == 0.0 {
                    x.clone()
                } else {
                    x.iter().map(|v| v * reach / r).collect()
                }
            })
            .chain(points.iter().cloned())
            .collect();
        let rate = |f: &dyn Fn(&[f64]) -> Result<f64>| -> Result<f64> {
            let mut a = 0.0f64;
            for x in &probe {
                a = a.max(f(x)?.abs() / (1.0 + norm(x)));
            }
            Ok(a)
        };
        let a0 = rate(&|x| self.f0.eval(x))?;
        let b_int = if self.g.is_zero() {
            0.0
        } else {
            let mut err = None;
            let val = simpson(0.0, t, m, |s| match rate(&|x| self.g.value(x, s)) {
                Ok(v) => v,
                Err(e) => {
                    err = Some(e);
                    0.0
                }
            });
            if let Some(e) = err {
                return Err(e);
            }
            val
        };
        let solution_constant = (a0 + b_int) * (1.0 + flow_constant);
        Ok(GrowthReport {
            t,
            flow_ratio,
            flow_constant,
            solution_ratio,
            solution_constant,
            holds: flow_ratio <= flow_constant * (1.0 + 1e-9)
                && solution_ratio <= solution_constant * (1.0 + 1e-9) + 1e-12,
        })
    }

    /// `f(·, t)` sampled on `[lo, hi]` with spacing `h`.
    pub fn snapshot(&self, t: f64, lo: &[f64], hi: &[f64], h: f64, interpolation: Interpolation) -> Result<GridField> {
        let field = self.solution_field(t)?;
        Ok(GridField::sample(&field, lo, hi, h)?
            .with_interpolation(interpolation)
            .with_name(format!("f(t = {t})")))
    }

    /// Snapshots at several times on one box. For an autonomous velocity whose
    /// checkpoints fall on an even number of steps of the horizon grid, every node
    /// is traced back once and all checkpoints are read off the same trajectory;
    /// otherwise each snapshot is computed separately.
    pub fn snapshots(
        &self,
        times: &[f64],
        lo: &[f64],
        hi: &[f64],
        h: f64,
        interpolation: Interpolation,
    ) -> Result<Vec<GridField>> {
        for &t in times {
            self.check_time(t)?;
        }
        let (big_m, step) = steps(self.horizon, 0.0, self.dt, true)?;
        let step = -step;
        let counts: Option<Vec<usize>> = times
            .iter()
            .map(|&t| {
                let c = t / step;
                let r = c.round();
                ((c - r).abs() < 1e-9 && (r as usize).is_multiple_of(2) && r as usize <= big_m).then_some(r as usize)
            })
            .collect();
        let counts = match counts {
            Some(c) if self.v.is_autonomous() => c,
            _ => {
                return times
                    .iter()
                    .map(|&t| self.snapshot(t, lo, hi, h, interpolation))
                    .collect()
            }
        };
        let m_max = counts.iter().copied().max().unwrap_or(0);
        let template = GridField::from_values(lo.to_vec(), hi.to_vec(), h, vec![0.0; grid_len(lo, hi, h)])?;
        let total = template.values().len();
        let columns: Vec<Vec<f64>> = (0..total)
            .into_par_iter()
            .map(|flat| {
                let mut y = template.node(flat);
                let n = y.len();
                let mut buf = Rk4Buf::new(n);
                let mut flat_path = Vec::with_capacity((m_max + 1) * n);
                flat_path.extend_from_slice(&y);
                for _ in 0..m_max {
                    rk4_advance(&self.v, &mut y, 0.0, -step, &mut buf)?;
                    flat_path.extend_from_slice(&y);
                }
                let path: Vec<&[f64]> = flat_path.chunks(n).collect();
                times
                    .iter()
                    .zip(&counts)
                    .map(|(&t, &m)| {
                        let mut acc = 0.0;
                        if !self.g.is_zero() && m > 0 {
                            for (i, yi) in path.iter().enumerate().take(m + 1) {
                                let w = if i == 0 || i == m {
                                    1.0
                                } else if i % 2 == 1 {
                                    4.0
                                } else {
                                    2.0
                                };
                                acc += w * self.g.value(yi, t - i as f64 * step)?;
                            }
                        }
                        Ok(self.f0.eval(path[m])? + acc * step / 3.0)
                    })
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<_>>()?;
        times
            .iter()
            .enumerate()
            .map(|(k, &t)| {
                let values = columns.iter().map(|c| c[k]).collect();
                Ok(GridField::from_values(lo.to_vec(), hi.to_vec(), h, values)?
                    .with_interpolation(interpolation)
                    .with_name(format!("f(t = {t})")))
            })
            .collect()
    }

    /// `f(·, t)` evaluated pointwise along characteristics.
    pub fn solution_field(&self, t: f64) -> Result<ScalarField> {
        self.check_time(t)?;
        let problem = self.clone();
        Ok(ScalarField::from_fallible(
            format!("f(t = {t})"),
            self.dim(),
            move |x: &[f64]| problem.solve_at(x, t),
        ))
    }

    /// `f0(Φ_{t,0}(x)) + ∫` with the closed-form flow, when the velocity has one
    /// and the source vanishes.
    pub fn exact_solution_at(&self, x: &[f64], t: f64) -> Option<Result<f64>> {
        if !self.g.is_zero() {
            return None;
        }
        let (y, _) = self.v.exact_flow(x, t, 0.0)?;
        Some(self.f0.eval(&y))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registry;
    use std::f64::consts::PI;

    fn dist(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn trivial_flows() {
        let zero = VelocityField::parse("zero", 3).unwrap();
        assert_eq!(
            flow(&zero, &[1.0, 2.0, 3.0], 0.0, 1.0, 0.1).unwrap(),
            vec![1.0, 2.0, 3.0]
        );
        let c = VelocityField::parse("constant(1, -2)", 2).unwrap();
        let y = flow(&c, &[0.5, 0.5], 0.3, 1.3, 0.01).unwrap();
        assert!(dist(&y, &[1.5, -1.5]) < 1e-13);
        let fr = flow_jacobian(&c, &[0.5, 0.5], 0.0, 2.0, 0.1).unwrap();
        assert!(dist(&fr.jacobian, &[1.0, 0.0, 0.0, 1.0]) < 1e-15);
    }

    #[test]
    fn rotation_converges_with_fourth_order() {
        let v = VelocityField::parse("rotation", 2).unwrap();
        let x = [0.8, -0.3];
        let (exact, _) = v.exact_flow(&x, 0.0, 2.0 * PI).unwrap();
        let e1 = dist(&flow(&v, &x, 0.0, 2.0 * PI, 2.0 * PI / 64.0).unwrap(), &exact);
        let e2 = dist(&flow(&v, &x, 0.0, 2.0 * PI, 2.0 * PI / 128.0).unwrap(), &exact);
        assert!(e1 / e2 > 14.0 && e1 / e2 < 18.0, "{e1} {e2}");
    }

    #[test]
    fn jacobian_of_rotation_and_linear_field() {
        let v = VelocityField::parse("rotation(2)", 2).unwrap();
        let fr = flow_jacobian(&v, &[0.3, 0.1], 0.0, 1.0, 1.0 / 512.0).unwrap();
        let (_, exact) = v.exact_flow(&[0.3, 0.1], 0.0, 1.0).unwrap();
        assert!(dist(&fr.jacobian, &exact) < 1e-9);
        let j = &fr.jacobian;
        assert!((j[0] * j[3] - j[1] * j[2] - 1.0).abs() < 1e-9);
        let lin = VelocityField::parse("linear(0.7)", 1).unwrap();
        let fr = flow_jacobian(&lin, &[1.0], 0.0, 2.0, 2.0 / 512.0).unwrap();
        let gronwall = lipschitz_integral(&lin, 0.0, 2.0, 2.0 / 512.0).unwrap().exp();
        assert!((fr.jacobian[0] - gronwall).abs() < 1e-9 * gronwall);
    }

    #[test]
    fn inverse_and_semigroup() {
        let v = VelocityField::parse("pulsing_rotation", 2).unwrap();
        let x = [0.4, 0.9];
        let dt = 0.01;
        let there = flow(&v, &x, 0.2, 1.7, dt).unwrap();
        let back = flow(&v, &there, 1.7, 0.2, dt).unwrap();
        assert!(dist(&back, &x) < 1e-9);
        let mid = flow(&v, &x, 0.2, 0.9, dt).unwrap();
        let composed = flow(&v, &mid, 0.9, 1.7, dt).unwrap();
        assert!(dist(&composed, &there) < 1e-9);
        let (exact, _) = v.exact_flow(&x, 0.2, 1.7).unwrap();
        assert!(dist(&there, &exact) < 1e-9);
    }

    #[test]
    fn solutions_match_closed_forms() {
        let f0 = registry::parse("asym_bump", 2).unwrap();
        let rot = VelocityField::parse("rotation", 2).unwrap();
        let p = TransportProblem::with_default_step(f0.clone(), rot, Source::Zero(2), 2.0 * PI).unwrap();
        for x in [[0.1, 0.2], [0.7, -0.4], [-1.0, 0.5]] {
            for t in [0.5, 3.0, 2.0 * PI] {
                let want = p.exact_solution_at(&x, t).unwrap().unwrap();
                assert!((p.solve_at(&x, t).unwrap() - want).abs() < 1e-8);
            }
        }
        // v = 0, stationary source: f0 + t g
        let g = registry::parse("sin(1)", 1).unwrap();
        let f0 = registry::parse("quad", 1).unwrap();
        let p = TransportProblem::new(
            f0,
            VelocityField::parse("zero", 1).unwrap(),
            Source::Stationary(g),
            2.0,
            0.01,
        )
        .unwrap();
        let x = 0.7f64;
        assert!((p.solve_at(&[x], 1.5).unwrap() - (x * x + 1.5 * x.sin())).abs() < 1e-13);
    }

    #[test]
    fn forward_route_agrees() {
        let f0 = registry::parse("gauss(1)", 2).unwrap();
        let g = Source::Modulated {
            field: registry::parse("sin2(1)", 2).unwrap(),
            omega: 2.0,
        };
        let p = TransportProblem::new(
            f0,
            VelocityField::parse("pulsing_rotation", 2).unwrap(),
            g,
            3.0,
            3.0 / 512.0,
        )
        .unwrap();
        let pts = vec![vec![0.3, -0.2], vec![1.1, 0.4]];
        let a = p.solve(&pts, 3.0).unwrap();
        let b = p.solve_forward(&pts, 3.0).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-8, "{x} vs {y}");
        }
    }

    #[test]
    fn gradient_and_growth_bounds() {
        let f0 = registry::parse("asym_bump", 2).unwrap();
        let g = Source::Stationary(registry::parse("gauss(0.5)", 2).unwrap());
        let p = TransportProblem::new(f0, VelocityField::parse("shear(0.5)", 2).unwrap(), g, 1.0, 1.0 / 64.0).unwrap();
        let pts: Vec<Vec<f64>> = (0..25)
            .map(|k| vec![-1.0 + 0.5 * (k / 5) as f64, -1.0 + 0.5 * (k % 5) as f64])
            .collect();
        let gr = p.gradient_bound_check(&pts, 1.0).unwrap();
        assert!(gr.holds, "{gr:?}");
        // chain rule gradient against differences
        let x = [0.3, -0.4];
        let grad = p.gradient_at(&x, 1.0).unwrap();
        let h = 1e-5;
        let fd =
            (p.solve_at(&[x[0] + h, x[1]], 1.0).unwrap() - p.solve_at(&[x[0] - h, x[1]], 1.0).unwrap()) / (2.0 * h);
        assert!((grad[0] - fd).abs() < 1e-7);
        let growth = p.growth_check(&pts, 1.0).unwrap();
        assert!(growth.holds, "{growth:?}");
        let rot = TransportProblem::new(
            registry::parse("zero", 2).unwrap(),
            VelocityField::parse("rotation", 2).unwrap(),
            Source::Zero(2),
            1.0,
            0.01,
        )
        .unwrap();
        let rg = rot.growth_check(&pts, 1.0).unwrap();
        assert!(rg.flow_ratio <= 1.0);
    }

    #[test]
    fn shared_trajectory_snapshots() {
        let g = Source::Modulated {
            field: registry::parse("gauss(0.7)", 2).unwrap(),
            omega: 2.0,
        };
        let prob = TransportProblem::with_default_step(
            registry::parse("asym_bump", 2).unwrap(),
            VelocityField::parse("rotation", 2).unwrap(),
            g,
            1.0,
        )
        .unwrap();
        let times = [0.0, 0.25, 1.0];
        let snaps = prob
            .snapshots(&times, &[-1.0, -1.0], &[1.0, 1.0], 0.25, Interpolation::Linear)
            .unwrap();
        for (snap, &t) in snaps.iter().zip(&times) {
            for flat in 0..snap.values().len() {
                let x = snap.node(flat);
                let want = prob.solve_at(&x, t).unwrap();
                assert!((snap.values()[flat] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn grid_velocity_matches_analytic() {
        let v = VelocityField::parse("rotation", 2).unwrap();
        let gv = GridVelocity::sample(
            &v,
            &[0.0, 1.0],
            &[-2.0, -2.0],
            &[2.0, 2.0],
            1.0 / 32.0,
            Interpolation::Cubic,
        )
        .unwrap();
        assert!((gv.lipschitz(0.5) - 1.0).abs() < 1e-12);
        let gv = VelocityField::new(gv);
        let a = flow(&gv, &[0.5, 0.2], 0.0, 1.0, 0.01).unwrap();
        let b = flow(&v, &[0.5, 0.2], 0.0, 1.0, 0.01).unwrap();
        assert!(dist(&a, &b) < 1e-5);
        assert!(flow(&gv, &[1.9, 1.9], 0.0, 1.0, 0.01).is_err());
    }

    #[test]
    fn step_count_guard() {
        let v = VelocityField::parse("zero", 1).unwrap();
        assert!(flow(&v, &[0.0], 0.0, 1.0, 1e-9).is_err());
        assert!(flow(&v, &[0.0], 0.0, 1.0, 0.0).is_err());
    }
}
