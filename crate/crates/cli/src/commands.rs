//! Validated jobs: `prepare` checks the whole configuration and builds every
//! parameter object, `Job::run` does the numerical work.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use campanato_core::campanato::{BasePoints, Campanato, CampanatoParams, Window};
use campanato_core::dyadic::{self, DyadicSequence};
use campanato_core::field::ScalarField;
use campanato_core::grid::{GridField, Interpolation};
use campanato_core::harness::{self, Harness, HarnessConfig, InterpolationTriple};
use campanato_core::minimal_poly;
use campanato_core::mollify::Means;
use campanato_core::oscillation::{OscParams, Oscillation};
use campanato_core::registry;
use campanato_core::transport::{self, Source, TransportProblem, VelocityField};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Inequality, NormKind, RunConfig};
use crate::failure::Failure;

pub const COMMANDS: &[&str] = &[
    "norm",
    "osc",
    "project",
    "minpoly",
    "seqop",
    "solve",
    "verify",
    "example-b",
    "list-functions",
];

pub enum Job {
    List,
    Norm {
        f: ScalarField,
        params: CampanatoParams,
        base: BasePoints,
        window: Window,
        kind: NormKind,
    },
    Osc {
        f: ScalarField,
        points: Vec<Vec<f64>>,
        window: Window,
        params: OscParams,
    },
    Project {
        f: ScalarField,
        x0: Vec<f64>,
        r: f64,
        degree: u32,
    },
    Minpoly {
        f: ScalarField,
        x0: Vec<f64>,
        r: f64,
        p: f64,
        degree: u32,
        deltas: Option<Vec<f64>>,
    },
    Seqop {
        seq: DyadicSequence,
        alpha: f64,
        q: f64,
        lemma: Option<(f64, f64)>,
    },
    Solve {
        problem: TransportProblem,
        times: Vec<f64>,
        lo: Vec<f64>,
        hi: Vec<f64>,
        spacing: f64,
        interpolation: Interpolation,
        grid: Option<PathBuf>,
    },
    Verify {
        harness: Harness,
        target: Target,
    },
    ExampleB {
        p: f64,
        samples: usize,
        window: Window,
        extend: i32,
    },
}

pub enum Target {
    Estimate {
        name: String,
        problem: TransportProblem,
        inequality: Inequality,
        s: f64,
        q: f64,
        p: f64,
        degree: i32,
    },
    Local {
        name: String,
        problem: TransportProblem,
        x0: Vec<f64>,
        window: Window,
        p: f64,
        degree: i32,
    },
    Suite,
    Embedding {
        f: ScalarField,
        p: f64,
    },
    Growth {
        f: ScalarField,
        params: CampanatoParams,
    },
    Interpolation {
        f: ScalarField,
        g: ScalarField,
        triples: Vec<InterpolationTriple>,
        params: CampanatoParams,
    },
}

/// What a job produced.
pub struct Outcome {
    pub result: Value,
    pub csv: Option<String>,
    pub pass: bool,
}

fn field_spec(spec: &str, dim: usize, seed: u64, key: &str) -> Result<ScalarField, Failure> {
    let path = Path::new(spec);
    let ext = path.extension().and_then(|e| e.to_str());
    let f = if matches!(ext, Some("bin") | Some("csv")) {
        let grid = if ext == Some("csv") {
            GridField::read_csv(path)
        } else {
            GridField::read_binary(path)
        }
        .map_err(|e| Failure::field(key, e))?;
        grid.with_interpolation(Interpolation::Cubic)
            .with_name(spec)
            .into_field()
    } else if spec.trim() == "random_bump" {
        harness::random_bump(seed, dim).map_err(|e| Failure::field(key, e))?
    } else {
        registry::parse(spec, dim).map_err(|e| Failure::field(key, e))?
    };
    if f.dim() != dim {
        return Err(Failure::field(
            key,
            format!("field has dimension {}, function.dim is {dim}", f.dim()),
        ));
    }
    Ok(f)
}

fn point(cfg: &RunConfig, dim: usize) -> Result<Vec<f64>, Failure> {
    let x0 = cfg.point.x0.clone().unwrap_or_else(|| vec![0.0; dim]);
    if x0.len() != dim {
        return Err(Failure::field(
            "point.x0",
            format!("need {dim} coordinates, got {}", x0.len()),
        ));
    }
    if !(cfg.point.r > 0.0 && cfg.point.r.is_finite()) {
        return Err(Failure::field("point.r", format!("need r > 0, got {}", cfg.point.r)));
    }
    Ok(x0)
}

fn window(j_min: i32, j_max: i32, key: &str) -> Result<Window, Failure> {
    Window::new(j_min, j_max).map_err(|e| Failure::field(key, e))
}

fn base_points(cfg: &RunConfig, dim: usize, f: &ScalarField) -> Result<BasePoints, Failure> {
    let b = &cfg.base;
    let lo = b.lo.clone().unwrap_or_else(|| vec![-b.half; dim]);
    let hi = b.hi.clone().unwrap_or_else(|| vec![b.half; dim]);
    if lo.len() != dim || hi.len() != dim {
        return Err(Failure::field("base", format!("box corners need {dim} coordinates")));
    }
    let base = BasePoints::lattice(lo, hi, b.per_axis).map_err(|e| Failure::field("base", e))?;
    Ok(if b.critical_points {
        base.with_critical_points(f)
    } else {
        base
    })
}

fn degree_u32(degree: i32, key: &str) -> Result<u32, Failure> {
    u32::try_from(degree).map_err(|_| Failure::field(key, format!("need N ≥ 0, got {degree}")))
}

fn problem(cfg: &RunConfig) -> Result<(String, TransportProblem), Failure> {
    let t = &cfg.transport;
    if let Some(name) = &t.problem {
        let p = harness::calibration_problem(name).map_err(|e| Failure::field("transport.problem", e))?;
        return Ok((name.clone(), p));
    }
    let dim = cfg.function.dim;
    let f0 = field_spec(&cfg.function.spec, dim, cfg.seed, "function.spec")?;
    let v = VelocityField::parse(&t.velocity, dim).map_err(|e| Failure::field("transport.velocity", e))?;
    let g = if t.source.trim() == "zero" {
        Source::Zero(dim)
    } else {
        let h = field_spec(&t.source, dim, cfg.seed, "transport.source")?;
        match t.omega {
            Some(omega) => Source::Modulated { field: h, omega },
            None => Source::Stationary(h),
        }
    };
    let dt = t.dt.unwrap_or(t.horizon / 512.0);
    let p = TransportProblem::new(f0, v, g, t.horizon, dt).map_err(|e| Failure::field("transport", e))?;
    Ok(("custom".into(), p))
}

fn harness_for(cfg: &RunConfig, dim: usize) -> Result<Harness, Failure> {
    let o = &cfg.harness;
    let mut hc = HarnessConfig::default_for(dim);
    if let Some(c) = o.checkpoints {
        hc.checkpoints = c;
    }
    if let Some(m) = o.per_axis {
        hc.base.per_axis = m;
    }
    if let Some(h) = o.half {
        hc.base.lo = vec![-h; dim];
        hc.base.hi = vec![h; dim];
    }
    hc.window.j_min = o.j_min.unwrap_or(hc.window.j_min);
    hc.window.j_max = o.j_max.unwrap_or(hc.window.j_max);
    if let Some(h) = o.spacing {
        hc.spacing = h;
    }
    window(hc.window.j_min, hc.window.j_max, "harness")?;
    Harness::new(dim, hc).map_err(|e| Failure::field("harness", e))
}

fn verify_target(cfg: &RunConfig) -> Result<(usize, Target), Failure> {
    let v = &cfg.verify;
    let dim = cfg.function.dim;
    let params = |s: f64, q: f64, p: f64, n: i32, k: u32| {
        CampanatoParams::new(s, q, p, n, k).map_err(|e| Failure::field("verify", e))
    };
    let target = match v.inequality {
        Inequality::Suite => return Ok((2, Target::Suite)),
        Inequality::Estimate1 | Inequality::Estimate2 | Inequality::Estimate3 | Inequality::Estimate4 => {
            let (name, problem) = problem(cfg)?;
            let n = problem.dim() as f64;
            let (s0, q0, n0) = match v.inequality {
                Inequality::Estimate1 => (-0.5, 2.0, 0),
                Inequality::Estimate2 => (1.0, 1.0, 1),
                Inequality::Estimate3 => (1.5, 2.0, 1),
                _ => (1.0, 1.0, 1),
            };
            let (s, q, p, degree) = (
                v.s.unwrap_or(s0),
                v.q.unwrap_or(q0),
                v.p.unwrap_or(2.0),
                v.degree.unwrap_or(n0),
            );
            match v.inequality {
                Inequality::Estimate1 => {
                    if !(s < 0.0 && s > -n / q) {
                        return Err(Failure::field("verify.s", format!("need s ∈ (-n/q, 0), got {s}")));
                    }
                    params(s, q, p, 0, 0)?;
                }
                Inequality::Estimate3 => {
                    if !(s > 1.0) || degree < 1 {
                        return Err(Failure::field(
                            "verify.s",
                            format!("need s > 1 and N ≥ 1, got s = {s}, N = {degree}"),
                        ));
                    }
                    params(s, q, p, degree, 0)?;
                }
                _ => {
                    params(1.0, q, p, 1, 0)?;
                }
            }
            let dim = problem.dim();
            return Ok((
                dim,
                Target::Estimate {
                    name,
                    problem,
                    inequality: v.inequality,
                    s,
                    q,
                    p,
                    degree,
                },
            ));
        }
        Inequality::Local => {
            let (name, problem) = problem(cfg)?;
            let dim = problem.dim();
            let x0 = point(cfg, dim)?;
            let (p, degree) = (v.p.unwrap_or(2.0), v.degree.unwrap_or(1));
            if degree < 0 {
                return Err(Failure::field("verify.degree", "need N ≥ 0"));
            }
            OscParams::new(p, degree).map_err(|e| Failure::field("verify", e))?;
            let w = window(cfg.window.j_min, cfg.window.j_max, "window")?;
            return Ok((
                dim,
                Target::Local {
                    name,
                    problem,
                    x0,
                    window: w,
                    p,
                    degree,
                },
            ));
        }
        Inequality::Embedding => {
            let p = v.p.unwrap_or(cfg.params.p);
            params(1.0, 1.0, p, 1, 0)?;
            Target::Embedding {
                f: field_spec(&cfg.function.spec, dim, cfg.seed, "function.spec")?,
                p,
            }
        }
        Inequality::Growth => {
            let c = &cfg.params;
            let ps = params(c.s, c.q, c.p, c.degree, c.k)?;
            if ps.k != 0 || !(ps.s >= ps.degree as f64 && ps.s < ps.degree as f64 + 1.0) {
                return Err(Failure::field(
                    "params.s",
                    format!("need k = 0 and s ∈ [N, N+1), got s = {}", ps.s),
                ));
            }
            Target::Growth {
                f: field_spec(&cfg.function.spec, dim, cfg.seed, "function.spec")?,
                params: ps,
            }
        }
        Inequality::Interpolation => {
            let c = &cfg.params;
            let triples = InterpolationTriple::defaults(dim);
            for t in &triples {
                t.validate().map_err(|e| Failure::field("verify", e))?;
            }
            Target::Interpolation {
                f: field_spec(&cfg.function.spec, dim, cfg.seed, "function.spec")?,
                g: field_spec(&cfg.function.other, dim, cfg.seed, "function.other")?,
                triples,
                params: params(c.s, c.q, c.p, c.degree, c.k)?,
            }
        }
    };
    Ok((dim, target))
}

/// Validates `cfg` for `command` and builds the job; nothing is computed here.
pub fn prepare(command: &str, cfg: &RunConfig) -> Result<Job, Failure> {
    let dim = cfg.function.dim;
    if dim == 0 {
        return Err(Failure::field("function.dim", "need n ≥ 1"));
    }
    let c = &cfg.params;
    Ok(match command {
        "list-functions" => Job::List,
        "norm" => {
            let f = field_spec(&cfg.function.spec, dim, cfg.seed, "function.spec")?;
            let params = CampanatoParams::new(c.s, c.q, c.p, c.degree, c.k).map_err(|e| Failure::field("params", e))?;
            if cfg.norm.kind == NormKind::Tilde && (c.s != 1.0 || c.degree != 1 || c.k != 0) {
                return Err(Failure::field(
                    "norm.kind",
                    "the tilde seminorm needs s = N = 1 and k = 0",
                ));
            }
            Job::Norm {
                base: base_points(cfg, dim, &f)?,
                f,
                params,
                window: window(cfg.window.j_min, cfg.window.j_max, "window")?,
                kind: cfg.norm.kind,
            }
        }
        "osc" => {
            let f = field_spec(&cfg.function.spec, dim, cfg.seed, "function.spec")?;
            let params = OscParams::new(c.p, c.degree).map_err(|e| Failure::field("params", e))?;
            let points = match &cfg.point.x0 {
                Some(_) => vec![point(cfg, dim)?],
                None => base_points(cfg, dim, &f)?.points(),
            };
            Job::Osc {
                f,
                points,
                window: window(cfg.window.j_min, cfg.window.j_max, "window")?,
                params,
            }
        }
        "project" => Job::Project {
            f: field_spec(&cfg.function.spec, dim, cfg.seed, "function.spec")?,
            x0: point(cfg, dim)?,
            r: cfg.point.r,
            degree: degree_u32(c.degree, "params.degree")?,
        },
        "minpoly" => {
            if !(c.p > 1.0 && c.p.is_finite()) {
                return Err(Failure::field("params.p", format!("need p ∈ (1, ∞), got {}", c.p)));
            }
            if let Some(d) = &cfg.minpoly.deltas {
                if d.is_empty() || d.iter().any(|x| !(*x > 0.0)) {
                    return Err(Failure::field("minpoly.deltas", "need a nonempty list of positive δ"));
                }
            }
            Job::Minpoly {
                f: field_spec(&cfg.function.spec, dim, cfg.seed, "function.spec")?,
                x0: point(cfg, dim)?,
                r: cfg.point.r,
                p: c.p,
                degree: degree_u32(c.degree, "params.degree")?,
                deltas: cfg.minpoly.deltas.clone(),
            }
        }
        "seqop" => {
            let s = &cfg.seqop;
            let seq = match &s.input {
                Some(path) => {
                    let file = std::fs::File::open(path).map_err(|e| Failure::field("seqop.input", e))?;
                    DyadicSequence::read_csv(std::io::BufReader::new(file))
                        .map_err(|e| Failure::field("seqop.input", e))?
                }
                None => {
                    DyadicSequence::new(s.j_min, s.values.clone()).map_err(|e| Failure::field("seqop.values", e))?
                }
            };
            if seq.is_empty() {
                return Err(Failure::field("seqop.values", "empty sequence"));
            }
            if !(s.q >= 1.0) {
                return Err(Failure::field("seqop.q", format!("need q ∈ [1, ∞], got {}", s.q)));
            }
            if let Some(beta) = s.beta {
                if !(beta < s.alpha) {
                    return Err(Failure::field(
                        "seqop.beta",
                        format!("need β < α, got β = {beta}, α = {}", s.alpha),
                    ));
                }
                if !(s.p >= 1.0 && s.p <= s.q) {
                    return Err(Failure::field("seqop.p", format!("need 1 ≤ p ≤ q, got p = {}", s.p)));
                }
            }
            Job::Seqop {
                seq,
                alpha: s.alpha,
                q: s.q,
                lemma: s.beta.map(|b| (b, s.p)),
            }
        }
        "solve" => {
            let (_, problem) = problem(cfg)?;
            let t = &cfg.transport;
            let times = t.times.clone().unwrap_or_else(|| vec![problem.horizon]);
            if times.is_empty() || times.iter().any(|&s| !(s >= 0.0 && s <= problem.horizon)) {
                return Err(Failure::field(
                    "transport.times",
                    format!("need times in [0, {}]", problem.horizon),
                ));
            }
            if !(t.spacing > 0.0) || !(t.half > 0.0) {
                return Err(Failure::field("transport", "need spacing > 0 and half > 0"));
            }
            let n = problem.dim();
            let half = (t.half / t.spacing).ceil() * t.spacing;
            Job::Solve {
                problem,
                times,
                lo: vec![-half; n],
                hi: vec![half; n],
                spacing: t.spacing,
                interpolation: t.interpolation,
                grid: cfg.output.grid.clone(),
            }
        }
        "verify" => {
            let (dim, target) = verify_target(cfg)?;
            Job::Verify {
                harness: harness_for(cfg, dim)?,
                target,
            }
        }
        "example-b" => {
            let e = &cfg.example_b;
            if e.samples < 2 {
                return Err(Failure::field("example_b.samples", "need at least two samples"));
            }
            if e.extend < 0 {
                return Err(Failure::field("example_b.extend", "must be nonnegative"));
            }
            OscParams::new(e.p, 0).map_err(|e| Failure::field("example_b.p", e))?;
            Job::ExampleB {
                p: e.p,
                samples: e.samples,
                window: window(e.j_min, e.j_max, "example_b")?,
                extend: e.extend,
            }
        }
        other => {
            return Err(Failure::usage(format!(
                "command: unknown `{other}` (one of {})",
                COMMANDS.join(", ")
            )))
        }
    })
}

fn to_value<T: Serialize>(x: &T) -> Value {
    serde_json::to_value(x).expect("reports serialize")
}

fn csv_from(write: impl FnOnce(&mut Vec<u8>) -> campanato_core::Result<()>) -> Result<String, Failure> {
    let mut buf = Vec::new();
    write(&mut buf).map_err(|e| Failure::compute("output", e))?;
    Ok(String::from_utf8(buf).expect("csv is utf-8"))
}

fn point_columns(n: usize) -> String {
    (1..=n).map(|k| format!("x0_{k}")).collect::<Vec<_>>().join(",")
}

fn point_cells(x: &[f64]) -> String {
    x.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",")
}

/// Snapshot path for the `k`-th of `m` times.
fn numbered(path: &Path, k: usize, m: usize) -> PathBuf {
    if m == 1 {
        return path.to_path_buf();
    }
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}_{k}.{}", ext.to_string_lossy()),
        None => format!("{stem}_{k}"),
    };
    path.with_file_name(name)
}

impl Job {
    pub fn run(self) -> Result<Outcome, Failure> {
        match self {
            Job::List => Ok(list()),
            Job::Norm {
                f,
                params,
                base,
                window,
                kind,
            } => {
                let engine = Campanato::new(f.dim());
                let err = |e| Failure::compute("campanato", e);
                let (value, report) = match kind {
                    NormKind::Seminorm => {
                        let r = engine.seminorm(&f, &params, &base, window).map_err(err)?;
                        (r.value, r)
                    }
                    NormKind::Full => engine.full_norm(&f, &params, &base, window).map_err(err)?,
                    NormKind::Tilde => {
                        let means = Means::new(f.dim(), 1);
                        engine.tilde_seminorm(&means, &f, &params, &base, window).map_err(err)?
                    }
                };
                let mut csv = String::from("j,term\n");
                for (j, t) in (window.j_min..=window.j_max).zip(&report.profile) {
                    writeln!(csv, "{j},{t:e}").unwrap();
                }
                Ok(Outcome {
                    result: json!({ "function": f.name(), "params": params, "kind": kind, "value": value, "report": report }),
                    csv: Some(csv),
                    pass: true,
                })
            }
            Job::Osc {
                f,
                points,
                window,
                params,
            } => {
                let osc = Oscillation::new(f.dim());
                let profiles = points
                    .par_iter()
                    .map(|x0| osc.profile(&f, x0, window.j_min, window.j_max, params))
                    .collect::<campanato_core::Result<Vec<_>>>()
                    .map_err(|e| Failure::compute("oscillation", e))?;
                let mut csv = format!("{},j,r,osc\n", point_columns(f.dim()));
                for prof in &profiles {
                    for (j, v) in prof.iter() {
                        writeln!(csv, "{},{j},{},{v:e}", point_cells(&prof.x0), 2f64.powi(j)).unwrap();
                    }
                }
                Ok(Outcome {
                    result: json!({ "function": f.name(), "params": params, "profiles": profiles }),
                    csv: Some(csv),
                    pass: true,
                })
            }
            Job::Project { f, x0, r, degree } => {
                let poly = Means::new(f.dim(), degree)
                    .project(&f, &x0, r, degree)
                    .map_err(|e| Failure::compute("mollify", e))?;
                Ok(Outcome {
                    result: json!({ "function": f.name(), "x0": x0, "r": r, "degree": degree, "polynomial": poly }),
                    csv: None,
                    pass: true,
                })
            }
            Job::Minpoly {
                f,
                x0,
                r,
                p,
                degree,
                deltas,
            } => {
                let cont = minimal_poly::continuation_to_zero(&f, &x0, r, p, degree, deltas.as_deref())
                    .map_err(|e| Failure::compute("minimal_poly", e))?;
                let csv = csv_from(|b| cont.write_trace_csv(b))?;
                Ok(Outcome {
                    result: json!({ "function": f.name(), "x0": x0, "r": r, "p": p, "degree": degree, "continuation": cont }),
                    csv: Some(csv),
                    pass: true,
                })
            }
            Job::Seqop { seq, alpha, q, lemma } => {
                let err = |e| Failure::compute("dyadic", e);
                let out = dyadic::s_op(&seq, alpha, q).map_err(err)?;
                let check = match lemma {
                    Some((beta, p)) => Some(dyadic::lemma_bound_check(&seq, alpha, beta, p, q).map_err(err)?),
                    None => None,
                };
                let mut csv = String::from("j,input,output\n");
                for ((j, x), y) in seq.iter().zip(out.values()) {
                    writeln!(csv, "{j},{x:e},{y:e}").unwrap();
                }
                let pass = check.as_ref().is_none_or(|c| c.holds);
                Ok(Outcome {
                    result: json!({ "alpha": alpha, "q": q, "j_min": out.j_min(), "values": out.values(), "lemma": check }),
                    csv: Some(csv),
                    pass,
                })
            }
            Job::Solve {
                problem,
                times,
                lo,
                hi,
                spacing,
                interpolation,
                grid,
            } => {
                let grids = problem
                    .snapshots(&times, &lo, &hi, spacing, interpolation)
                    .map_err(|e| Failure::compute("transport", e))?;
                let mut csv = String::from("t,min,max,l2\n");
                let mut summary = Vec::new();
                for (t, g) in times.iter().zip(&grids) {
                    let v = g.values();
                    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
                    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let l2 = (v.iter().map(|x| x * x).sum::<f64>() * spacing.powi(g.dim() as i32)).sqrt();
                    writeln!(csv, "{t},{min:e},{max:e},{l2:e}").unwrap();
                    summary.push(json!({ "t": t, "min": min, "max": max, "l2": l2, "shape": g.shape() }));
                }
                let mut files = Vec::new();
                if let Some(path) = grid {
                    for (k, g) in grids.iter().enumerate() {
                        let target = numbered(&path, k, grids.len());
                        let written = if target.extension().and_then(|e| e.to_str()) == Some("csv") {
                            g.write_csv(&target)
                        } else {
                            g.write_binary(&target)
                        };
                        written.map_err(|e| Failure::compute("grid", e))?;
                        files.push(target.display().to_string());
                    }
                }
                Ok(Outcome {
                    result: json!({
                        "f0": problem.f0.name(),
                        "velocity": problem.v.name(),
                        "horizon": problem.horizon,
                        "dt": problem.dt,
                        "lo": lo,
                        "hi": hi,
                        "spacing": spacing,
                        "snapshots": summary,
                        "grids": files,
                    }),
                    csv: Some(csv),
                    pass: true,
                })
            }
            Job::Verify { harness, target } => verify(&harness, target),
            Job::ExampleB {
                p,
                samples,
                window,
                extend,
            } => {
                let report = harness::appendix_b_example(p, samples, window, extend)
                    .map_err(|e| Failure::compute("harness", e))?;
                let pass = report.discontinuous;
                Ok(Outcome {
                    result: to_value(&report),
                    csv: None,
                    pass,
                })
            }
        }
    }
}

fn estimate_csv(reports: &[harness::EstimateReport]) -> String {
    let mut csv = String::from("id,problem,t,lhs,rhs,ratio\n");
    for r in reports {
        for k in 0..r.times.len() {
            writeln!(
                csv,
                "{},{},{},{:e},{:e},{:e}",
                r.id, r.problem, r.times[k], r.lhs[k], r.rhs[k], r.ratios[k]
            )
            .unwrap();
        }
    }
    csv
}

fn verify(h: &Harness, target: Target) -> Result<Outcome, Failure> {
    let err = |e| Failure::compute("harness", e);
    let reports = match target {
        Target::Estimate {
            name,
            problem,
            inequality,
            s,
            q,
            p,
            degree,
        } => {
            let run = h.solve(&name, problem).map_err(err)?;
            match inequality {
                Inequality::Estimate1 => vec![h.verify_estimate_theorem1(&run, s, q, p).map_err(err)?],
                Inequality::Estimate2 => vec![h.verify_estimate_theorem2(&run, q, p).map_err(err)?],
                Inequality::Estimate3 => h.verify_estimate_theorem3(&run, s, q, p, degree).map_err(err)?,
                _ => vec![h.verify_estimate_corollary(&run, p).map_err(err)?],
            }
        }
        Target::Local {
            name,
            problem,
            x0,
            window,
            p,
            degree,
        } => {
            let run = h.solve(&name, problem).map_err(err)?;
            vec![h.verify_local_oscillation(&run, &x0, window, p, degree).map_err(err)?]
        }
        Target::Suite => h.calibration_suite().map_err(err)?,
        Target::Embedding { f, p } => {
            let r = h.check_embeddings(&f, p).map_err(err)?;
            let pass = r.finite;
            return Ok(Outcome {
                result: to_value(&r),
                csv: None,
                pass,
            });
        }
        Target::Growth { f, params } => {
            let r = h.check_growth(&f, &params).map_err(err)?;
            let mut csv = String::from("x,value,bound,ratio\n");
            for s in &r.samples {
                writeln!(
                    csv,
                    "{},{:e},{:e},{:e}",
                    point_cells(&s.x).replace(',', " "),
                    s.value,
                    s.bound,
                    s.ratio
                )
                .unwrap();
            }
            let pass = r.finite;
            return Ok(Outcome {
                result: to_value(&r),
                csv: Some(csv),
                pass,
            });
        }
        Target::Interpolation { f, g, triples, params } => {
            let r = h
                .check_interpolation_and_product(&f, &g, &triples, &params)
                .map_err(err)?;
            let mut csv = String::from("check,label,lhs,rhs,ratio\n");
            let rows = r
                .interpolation
                .iter()
                .map(|e| ("interpolation", e))
                .chain(r.gagliardo_nirenberg.iter().map(|e| ("gagliardo_nirenberg", e)))
                .chain(std::iter::once(("product", &r.product)));
            for (check, e) in rows {
                writeln!(csv, "{check},\"{}\",{:e},{:e},{:e}", e.label, e.lhs, e.rhs, e.ratio).unwrap();
            }
            let pass = r.finite;
            return Ok(Outcome {
                result: to_value(&r),
                csv: Some(csv),
                pass,
            });
        }
    };
    let pass = reports.iter().all(|r| r.pass);
    Ok(Outcome {
        csv: Some(estimate_csv(&reports)),
        result: json!({ "harness": h.config(), "reports": reports, "pass": pass }),
        pass,
    })
}

fn list() -> Outcome {
    let dims = |d: Option<usize>| d.map_or("any".to_string(), |d| d.to_string());
    let params = |ps: &[(&str, f64)]| {
        ps.iter()
            .map(|(n, v)| format!("{n}={v}"))
            .collect::<Vec<_>>()
            .join(", ")
    };
    let functions: Vec<Value> = registry::ENTRIES
        .iter()
        .map(
            |e| json!({ "name": e.name, "dim": dims(e.dim), "params": params(e.params), "description": e.description }),
        )
        .collect();
    let velocities: Vec<Value> = transport::VELOCITIES
        .iter()
        .map(
            |e| json!({ "name": e.name, "dim": dims(e.dim), "params": params(e.params), "description": e.description }),
        )
        .collect();
    let mut csv = String::from("kind,name,dim,params,description\n");
    for (kind, list) in [("function", &functions), ("velocity", &velocities)] {
        for e in list {
            writeln!(
                csv,
                "{kind},{},{},\"{}\",\"{}\"",
                e["name"].as_str().unwrap(),
                e["dim"].as_str().unwrap(),
                e["params"].as_str().unwrap(),
                e["description"].as_str().unwrap()
            )
            .unwrap();
        }
    }
    Outcome {
        result: json!({ "functions": functions, "velocities": velocities, "problems": harness::CALIBRATION_PROBLEMS }),
        csv: Some(csv),
        pass: true,
    }
}
