//! Named analytic fields, addressed as `name` or `name(p1, p2, ...)`.

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::field::{FieldFunction, FieldKind, ScalarField};
use crate::mollify::JetAlgebra;
use crate::poly::{MultiIndex, Polynomial};

/// One registry entry as listed by the CLI.
#[derive(Clone, Debug)]
pub struct Entry {
    pub name: &'static str,
    /// `None` when the entry exists in every dimension.
    pub dim: Option<usize>,
    pub params: &'static [(&'static str, f64)],
    pub description: &'static str,
}

pub const ENTRIES: &[Entry] = &[
    Entry {
        name: "zero",
        dim: None,
        params: &[],
        description: "0",
    },
    Entry {
        name: "const",
        dim: None,
        params: &[("c", 1.0)],
        description: "c",
    },
    Entry {
        name: "linear",
        dim: None,
        params: &[("a", 1.0), ("b", 0.0)],
        description: "a x_1 + b",
    },
    Entry {
        name: "linear2",
        dim: Some(2),
        params: &[("a1", 1.0), ("a2", 0.5)],
        description: "a1 x_1 + a2 x_2",
    },
    Entry {
        name: "quad",
        dim: None,
        params: &[("a", 1.0)],
        description: "a |x|^2",
    },
    Entry {
        name: "cubic",
        dim: None,
        params: &[("a", 1.0)],
        description: "a x_1^3",
    },
    Entry {
        name: "saddle",
        dim: Some(2),
        params: &[],
        description: "x_1 x_2",
    },
    Entry {
        name: "abs",
        dim: None,
        params: &[],
        description: "|x|",
    },
    Entry {
        name: "abs_pow",
        dim: Some(1),
        params: &[("gamma", 0.5)],
        description: "|x|^gamma",
    },
    Entry {
        name: "log_abs",
        dim: Some(1),
        params: &[],
        description: "log |x| (undefined at 0)",
    },
    Entry {
        name: "sin",
        dim: None,
        params: &[("omega", 1.0)],
        description: "sin(omega x_1)",
    },
    Entry {
        name: "sin2",
        dim: Some(2),
        params: &[("omega", 1.0)],
        description: "sin(omega x_1) cos(omega x_2)",
    },
    Entry {
        name: "linear_sin",
        dim: None,
        params: &[("a", 1.0)],
        description: "a x_1 + sin(x_1)",
    },
    Entry {
        name: "bump",
        dim: None,
        params: &[("width", 1.0), ("amp", 1.0)],
        description: "amp exp(-1/(1-|x/width|^2)) inside the ball of radius width",
    },
    Entry {
        name: "asym_bump",
        dim: Some(2),
        params: &[("cx", 0.6), ("cy", 0.0), ("width", 1.0)],
        description: "bump of the given width centered at (cx, cy)",
    },
    Entry {
        name: "gauss",
        dim: None,
        params: &[("width", 1.0)],
        description: "exp(-|x|^2/width^2)",
    },
    Entry {
        name: "step",
        dim: Some(1),
        params: &[("x0", 0.0)],
        description: "1 for x >= x0, else 0",
    },
    Entry {
        name: "xsinlog",
        dim: Some(1),
        params: &[],
        description: "x sin(log(1+|x|))",
    },
    Entry {
        name: "sawtooth_u",
        dim: Some(1),
        params: &[],
        description: "tents 1 - 4^m |x - 2^-m| on [2^-m - 4^-m, 2^-m + 4^-m], m >= 1",
    },
    Entry {
        name: "sawtooth_f",
        dim: Some(1),
        params: &[],
        description: "integral from 0 to x of sawtooth_u",
    },
];

pub fn entry(name: &str) -> Option<&'static Entry> {
    ENTRIES.iter().find(|e| e.name == name)
}

/// Parse `name` or `name(p1, p2)`; missing parameters take their defaults.
pub fn parse(spec: &str, dim: usize) -> Result<ScalarField> {
    let spec = spec.trim();
    let (name, args) = match spec.find('(') {
        Some(i) => {
            let inner = spec[i + 1..]
                .strip_suffix(')')
                .ok_or_else(|| Error::UnknownFunction(format!("{spec}: unbalanced parentheses")))?;
            let args = inner
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|_| Error::UnknownFunction(format!("{spec}: bad number `{s}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            (spec[..i].trim(), args)
        }
        None => (spec, Vec::new()),
    };
    lookup(name, dim, &args)
}

pub fn lookup(name: &str, dim: usize, args: &[f64]) -> Result<ScalarField> {
    let e = entry(name).ok_or_else(|| Error::UnknownFunction(name.to_string()))?;
    if let Some(d) = e.dim {
        if d != dim {
            return Err(Error::DimensionMismatch { expected: d, got: dim });
        }
    }
    if dim == 0 {
        return Err(Error::invalid("dim", "must be at least 1"));
    }
    if args.len() > e.params.len() {
        return Err(Error::invalid(
            "params",
            format!("{name} takes {} parameters, got {}", e.params.len(), args.len()),
        ));
    }
    let p: Vec<f64> = e
        .params
        .iter()
        .enumerate()
        .map(|(i, (_, d))| args.get(i).copied().unwrap_or(*d))
        .collect();
    let label = if p.is_empty() {
        name.to_string()
    } else {
        format!(
            "{name}({})",
            p.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
        )
    };
    let unit = |k| MultiIndex::unit(dim, k);
    let kind = match name {
        "zero" => Kind::Poly(Polynomial::zero(dim, 0)),
        "const" => Kind::Poly(Polynomial::constant(dim, p[0])),
        "linear" => Kind::Poly(Polynomial::from_terms(
            dim,
            1,
            vec![0.0; dim],
            &[(MultiIndex::zero(dim), p[1]), (unit(0), p[0])],
        )?),
        "linear2" => Kind::Poly(Polynomial::from_terms(
            2,
            1,
            vec![0.0; 2],
            &[(unit(0), p[0]), (unit(1), p[1])],
        )?),
        "quad" => {
            let terms: Vec<_> = (0..dim).map(|k| (unit(k).add(&unit(k)), p[0])).collect();
            Kind::Poly(Polynomial::from_terms(dim, 2, vec![0.0; dim], &terms)?)
        }
        "cubic" => {
            let mut e = vec![0; dim];
            e[0] = 3;
            Kind::Poly(Polynomial::monomial(&MultiIndex::new(e), p[0]))
        }
        "saddle" => Kind::Poly(Polynomial::monomial(&MultiIndex::new(vec![1, 1]), 1.0)),
        "abs" => Kind::Abs,
        "abs_pow" => {
            if !(p[0] > 0.0) {
                return Err(Error::invalid("gamma", "must be positive"));
            }
            Kind::AbsPow(p[0])
        }
        "log_abs" => Kind::LogAbs,
        "sin" => Kind::Sin(p[0]),
        "sin2" => Kind::Sin2(p[0]),
        "linear_sin" => Kind::LinearSin(p[0]),
        "bump" | "asym_bump" => {
            let (center, width, amp) = if name == "bump" {
                (vec![0.0; dim], p[0], p[1])
            } else {
                (vec![p[0], p[1]], p[2], 1.0)
            };
            if !(width > 0.0) {
                return Err(Error::invalid("width", "must be positive"));
            }
            Kind::Bump { center, width, amp }
        }
        "gauss" => {
            if !(p[0] > 0.0) {
                return Err(Error::invalid("width", "must be positive"));
            }
            Kind::Gauss(p[0])
        }
        "step" => Kind::Step(p[0]),
        "xsinlog" => Kind::XSinLog,
        "sawtooth_u" => Kind::SawtoothU,
        "sawtooth_f" => Kind::SawtoothF,
        _ => return Err(Error::UnknownFunction(name.to_string())),
    };
    Ok(ScalarField::new(Analytic { label, dim, kind }))
}

enum Kind {
    Poly(Polynomial),
    Abs,
    AbsPow(f64),
    LogAbs,
    Sin(f64),
    Sin2(f64),
    LinearSin(f64),
    Bump { center: Vec<f64>, width: f64, amp: f64 },
    Gauss(f64),
    Step(f64),
    XSinLog,
    SawtoothU,
    SawtoothF,
}

struct Analytic {
    label: String,
    dim: usize,
    kind: Kind,
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `d^k/dt^k sin(ω t)`.
fn sin_derivative(omega: f64, t: f64, k: u32) -> f64 {
    omega.powi(k as i32) * (omega * t + k as f64 * FRAC_PI_2).sin()
}

/// `d^k/dt^k exp(-t²/w²) = (-1/w)^k H_k(t/w) exp(-t²/w²)` with physicists' Hermite `H_k`.
fn gauss_derivative(w: f64, t: f64, k: u32) -> f64 {
    let s = t / w;
    let (mut h0, mut h1) = (1.0, 2.0 * s);
    let hk = match k {
        0 => h0,
        _ => {
            for n in 1..k {
                let h2 = 2.0 * s * h1 - 2.0 * n as f64 * h0;
                h0 = h1;
                h1 = h2;
            }
            h1
        }
    };
    (-1.0 / w).powi(k as i32) * hk * (-s * s).exp()
}

/// Only `x_1` varies; derivatives touching other coordinates vanish.
fn first_axis_order(alpha: &MultiIndex) -> Option<u32> {
    let e = alpha.exponents();
    if e[1..].iter().all(|&a| a == 0) {
        Some(e[0])
    } else {
        None
    }
}

/// Tent `1 - 4^m |x - 2^{-m}|`, zero outside its support.
fn tent(m: i32, x: f64) -> f64 {
    (1.0 - 4f64.powi(m) * (x - 2f64.powi(-m)).abs()).max(0.0)
}

/// `(m, slope)` of the tent attaining `sawtooth_u(x)`, if any.
fn active_tent(x: f64) -> Option<(i32, f64)> {
    if !(x > 0.0 && x < 0.75) {
        return None;
    }
    let m0 = (-x.log2()).floor() as i32;
    let mut best: Option<(i32, f64)> = None;
    for m in (m0 - 1).max(1)..=(m0 + 2).min(1070) {
        let v = tent(m, x);
        if v > 0.0 && best.is_none_or(|(bm, _)| v > tent(bm, x)) {
            best = Some((m, v));
        }
    }
    best.map(|(m, _)| {
        let slope = if x < 2f64.powi(-m) { 4f64.powi(m) } else { -4f64.powi(m) };
        (m, slope)
    })
}

fn sawtooth_u(x: f64) -> f64 {
    active_tent(x).map_or(0.0, |(m, _)| tent(m, x))
}

/// Antiderivative of the unit tent on `[-1, 1]`.
fn tent_area(z: f64) -> f64 {
    if z <= -1.0 {
        0.0
    } else if z <= 0.0 {
        0.5 * (1.0 + z) * (1.0 + z)
    } else if z <= 1.0 {
        1.0 - 0.5 * (1.0 - z) * (1.0 - z)
    } else {
        1.0
    }
}

/// `∫_0^x tent_m`.
fn tent_integral(m: i32, x: f64) -> f64 {
    let s = 4f64.powi(-m);
    s * tent_area((x - 2f64.powi(-m)) / s)
}

/// The first two tents overlap on `[1/4, 5/16)`; the larger one wins and
/// they cross at `x = 3/10`.
const CROSSING: f64 = 0.3;

fn sawtooth_f(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let mut acc = tent_integral(2, x.min(CROSSING));
    if x > CROSSING {
        acc += tent_integral(1, x) - tent_integral(1, CROSSING);
    }
    for m in 3..=120 {
        acc += tent_integral(m, x);
    }
    acc
}

fn sawtooth_breaks(lo: f64, hi: f64) -> Vec<f64> {
    let mut out = vec![0.0, CROSSING];
    for m in 1..=60 {
        let c = 2f64.powi(-m);
        let h = 4f64.powi(-m);
        out.extend([c - h, c, c + h]);
    }
    out.retain(|b| *b > lo && *b < hi);
    out
}

impl FieldFunction for Analytic {
    fn dim(&self) -> usize {
        self.dim
    }

    fn name(&self) -> String {
        self.label.clone()
    }

    fn kind(&self) -> FieldKind {
        FieldKind::Analytic
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        let t = x[0];
        Ok(match &self.kind {
            Kind::Poly(p) => p.eval_unchecked(x),
            Kind::Abs => norm(x),
            Kind::AbsPow(g) => t.abs().powf(*g),
            Kind::LogAbs => {
                if t == 0.0 {
                    return Err(Error::Domain {
                        field: self.label.clone(),
                        point: x.to_vec(),
                    });
                }
                t.abs().ln()
            }
            Kind::Sin(w) => (w * t).sin(),
            Kind::Sin2(w) => (w * t).sin() * (w * x[1]).cos(),
            Kind::LinearSin(a) => a * t + t.sin(),
            Kind::Bump { center, width, amp } => {
                let s: f64 = x.iter().zip(center).map(|(a, c)| ((a - c) / width).powi(2)).sum();
                if s < 1.0 {
                    amp * (-1.0 / (1.0 - s)).exp()
                } else {
                    0.0
                }
            }
            Kind::Gauss(w) => (-x.iter().map(|v| v * v).sum::<f64>() / (w * w)).exp(),
            Kind::Step(x0) => {
                if t >= *x0 {
                    1.0
                } else {
                    0.0
                }
            }
            Kind::XSinLog => t * (1.0 + t.abs()).ln().sin(),
            Kind::SawtoothU => sawtooth_u(t),
            Kind::SawtoothF => sawtooth_f(t),
        })
    }

    fn exact_derivative(&self, alpha: &MultiIndex, x: &[f64]) -> Option<Result<f64>> {
        let order = alpha.order();
        let t = x[0];
        let value = match &self.kind {
            Kind::Poly(p) => p.diff(alpha).eval_unchecked(x),
            Kind::Sin(w) => match first_axis_order(alpha) {
                Some(k) => sin_derivative(*w, t, k),
                None => 0.0,
            },
            Kind::Sin2(w) => {
                let e = alpha.exponents();
                // cos(ω y) = sin(ω y + π/2)
                sin_derivative(*w, t, e[0]) * sin_derivative(*w, x[1] + FRAC_PI_2 / w, e[1])
            }
            Kind::LinearSin(a) => match first_axis_order(alpha) {
                Some(1) => a + t.cos(),
                Some(k) => sin_derivative(1.0, t, k),
                None => 0.0,
            },
            Kind::Gauss(w) => alpha
                .exponents()
                .iter()
                .zip(x)
                .map(|(&k, &xi)| gauss_derivative(*w, xi, k))
                .product(),
            Kind::Bump { center, width, amp } => {
                let jet = JetAlgebra::new(self.dim, order);
                let y: Vec<f64> = x.iter().zip(center).map(|(a, c)| (a - c) / width).collect();
                let coeffs = jet.bump_jet(&y);
                amp * coeffs[jet.position(alpha)] * alpha.factorial() / width.powi(order as i32)
            }
            Kind::Abs if self.dim == 1 && t != 0.0 => match order {
                1 => t.signum(),
                _ => 0.0,
            },
            Kind::Abs if order == 1 && norm(x) > 0.0 => {
                let k = alpha.exponents().iter().position(|&a| a == 1)?;
                x[k] / norm(x)
            }
            Kind::AbsPow(g) if t != 0.0 => {
                let k = order as i32;
                let falling: f64 = (0..k).map(|i| g - i as f64).product();
                falling * t.abs().powf(g - k as f64) * t.signum().powi(k)
            }
            Kind::LogAbs if t != 0.0 => {
                let k = order as i32;
                let fact: f64 = (1..k).map(f64::from).product();
                (-1f64).powi(k - 1) * fact / t.powi(k)
            }
            Kind::XSinLog if order == 1 => {
                let l = (1.0 + t.abs()).ln();
                l.sin() + t.abs() * l.cos() / (1.0 + t.abs())
            }
            Kind::SawtoothU => match order {
                1 => active_tent(t).map_or(0.0, |(_, s)| s),
                _ => 0.0,
            },
            Kind::SawtoothF => match order {
                1 => sawtooth_u(t),
                2 => active_tent(t).map_or(0.0, |(_, s)| s),
                _ => 0.0,
            },
            _ => return None,
        };
        Some(Ok(value))
    }

    fn breakpoints(&self, lo: f64, hi: f64) -> Vec<f64> {
        let kink = |b: f64| if lo < b && b < hi { vec![b] } else { vec![] };
        match &self.kind {
            Kind::Abs | Kind::AbsPow(_) | Kind::LogAbs | Kind::XSinLog => kink(0.0),
            Kind::Step(x0) => kink(*x0),
            Kind::Bump { center, width, .. } => {
                let mut b = kink(center[0] - width);
                b.extend(kink(center[0] + width));
                b
            }
            Kind::SawtoothU | Kind::SawtoothF => sawtooth_breaks(lo, hi),
            _ => Vec::new(),
        }
    }

    fn sup_bound(&self) -> Option<f64> {
        match &self.kind {
            Kind::Poly(p) if p.degree() <= 0 => Some(p.max_abs_coeff()),
            Kind::Sin(_) | Kind::Sin2(_) | Kind::Gauss(_) | Kind::Step(_) | Kind::SawtoothU => Some(1.0),
            Kind::Bump { amp, .. } => Some(amp.abs() * (-1f64).exp()),
            _ => None,
        }
    }

    fn critical_points(&self) -> Vec<Vec<f64>> {
        let origin = vec![0.0; self.dim];
        match &self.kind {
            Kind::Abs | Kind::AbsPow(_) | Kind::LogAbs | Kind::Gauss(_) | Kind::XSinLog => {
                vec![origin]
            }
            Kind::Bump { center, .. } => vec![center.clone()],
            Kind::Step(x0) => vec![vec![*x0]],
            Kind::SawtoothU | Kind::SawtoothF => {
                let mut pts = vec![vec![0.0]];
                pts.extend((1..=10).map(|m| vec![2f64.powi(-m)]));
                pts
            }
            _ => Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(k: u32) -> MultiIndex {
        MultiIndex::new(vec![k])
    }

    #[test]
    fn parse_names_and_parameters() {
        let f = parse("linear(2, 1)", 1).unwrap();
        assert_eq!(f.eval(&[3.0]).unwrap(), 7.0);
        assert_eq!(f.name(), "linear(2,1)");
        let g = parse("gauss", 2).unwrap();
        assert!((g.eval(&[1.0, 0.0]).unwrap() - (-1f64).exp()).abs() < 1e-15);
        assert!(matches!(parse("nope", 1), Err(Error::UnknownFunction(_))));
        assert!(matches!(parse("saddle", 1), Err(Error::DimensionMismatch { .. })));
        assert!(parse("sin(1, 2)", 1).is_err());
    }

    #[test]
    fn exact_derivatives_agree_with_differences() {
        let cases = [
            "sin(1.3)",
            "linear_sin(0.5)",
            "gauss(0.7)",
            "bump(1.5, 2)",
            "xsinlog",
            "abs_pow(1.5)",
            "log_abs",
        ];
        for name in cases {
            let f = parse(name, 1).unwrap();
            let x = [0.41];
            let exact = f.derivative(&d(1), &x).unwrap();
            let h = 1e-6;
            let fd = (f.eval(&[x[0] + h]).unwrap() - f.eval(&[x[0] - h]).unwrap()) / (2.0 * h);
            assert!((exact - fd).abs() < 1e-7, "{name}: {exact} vs {fd}");
        }
        let g = parse("gauss(0.7)", 1).unwrap();
        let d3 = g.derivative(&d(3), &[0.3]).unwrap();
        let fd3 = {
            let h = 1e-3;
            let e = |t: f64| g.eval(&[t]).unwrap();
            (e(0.3 + 2.0 * h) - 2.0 * e(0.3 + h) + 2.0 * e(0.3 - h) - e(0.3 - 2.0 * h)) / (2.0 * h * h * h)
        };
        assert!((d3 - fd3).abs() < 1e-4 * d3.abs().max(1.0));
        let b = parse("asym_bump", 2).unwrap();
        let x = [0.5, 0.2];
        let exact = b.derivative(&MultiIndex::new(vec![1, 1]), &x).unwrap();
        let h = 1e-4;
        let e = |a: f64, c: f64| b.eval(&[a, c]).unwrap();
        let fd = (e(x[0] + h, x[1] + h) - e(x[0] + h, x[1] - h) - e(x[0] - h, x[1] + h) + e(x[0] - h, x[1] - h))
            / (4.0 * h * h);
        assert!((exact - fd).abs() < 1e-5);
        let s = parse("sin2(0.8)", 2).unwrap();
        let exact = s.derivative(&MultiIndex::new(vec![0, 1]), &x).unwrap();
        assert!((exact + 0.8 * (0.4f64).sin() * (0.16f64).sin()).abs() < 1e-14);
    }

    #[test]
    fn sawtooth_definition() {
        let u = parse("sawtooth_u", 1).unwrap();
        assert_eq!(u.eval(&[0.125]).unwrap(), 1.0);
        assert_eq!(u.eval(&[0.0]).unwrap(), 0.0);
        assert_eq!(u.eval(&[-0.3]).unwrap(), 0.0);
        assert_eq!(u.eval(&[0.9]).unwrap(), 0.0);
        // half-way down the m = 3 tent
        assert!((u.eval(&[0.125 + 1.0 / 128.0]).unwrap() - 0.5).abs() < 1e-15);
        // overlap of the first two tents
        assert!((u.eval(&[0.3]).unwrap() - 0.2).abs() < 1e-15);
        for m in 1..=10 {
            assert_eq!(u.eval(&[2f64.powi(-m)]).unwrap(), 1.0);
        }
    }

    #[test]
    fn sawtooth_antiderivative_matches_fine_trapezoid() {
        // The trapezoid rule is exact on every linear piece once all kinks are nodes.
        let f = parse("sawtooth_f", 1).unwrap();
        let mut pts: Vec<f64> = (0..=8000).map(|i| i as f64 / 8000.0).collect();
        pts.extend(sawtooth_breaks(0.0, 1.0));
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut acc = 0.0;
        for w in pts.windows(2) {
            acc += 0.5 * (sawtooth_u(w[0]) + sawtooth_u(w[1])) * (w[1] - w[0]);
            let x = w[1];
            if (x * 8.0).fract() == 0.0 {
                let v = f.eval(&[x]).unwrap();
                assert!((v - acc).abs() < 1e-14, "x={x}: {v} vs {acc}");
            }
        }
        // total mass: Σ 4^{-m} minus the overlap correction of the first two tents
        let total = f.eval(&[1.0]).unwrap();
        assert!(total > 0.0 && total < 1.0 / 3.0 + 1e-12);
    }
}
