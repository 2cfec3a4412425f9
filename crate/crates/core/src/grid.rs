//! Uniformly sampled fields on a box, with interpolation and file I/O.
//!
//! Binary layout (little endian): `u64 n`, then `n` pairs `(lo_k, hi_k)` as
//! `f64`, then the spacing `h` as `f64`, then the node values as `f64` in
//! row-major order (last axis fastest). The CSV layout has the header line
//! `n,lo_1,hi_1,...,lo_n,hi_n,h` followed by one value per line in the same order.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{FieldFunction, FieldKind, ScalarField};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    #[default]
    Linear,
    /// Catmull–Rom, with linearly extrapolated ghost nodes at the faces.
    Cubic,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    lo: Vec<f64>,
    hi: Vec<f64>,
    spacing: f64,
    shape: Vec<usize>,
    values: Vec<f64>,
    interpolation: Interpolation,
    name: String,
}

fn shape_of(lo: &[f64], hi: &[f64], h: f64) -> Result<Vec<usize>> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::Format(format!("spacing must be positive, got {h}")));
    }
    lo.iter()
        .zip(hi)
        .map(|(&a, &b)| {
            let cells = (b - a) / h;
            let rounded = cells.round();
            if !(rounded >= 1.0) || (cells - rounded).abs() > 1e-8 * rounded.max(1.0) {
                return Err(Error::Format(format!(
                    "extent [{a}, {b}] is not a positive multiple of h = {h}"
                )));
            }
            Ok(rounded as usize + 1)
        })
        .collect()
}

impl GridField {
    pub fn from_values(lo: Vec<f64>, hi: Vec<f64>, spacing: f64, values: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::Format("box bounds must have matching, nonzero length".into()));
        }
        let shape = shape_of(&lo, &hi, spacing)?;
        let expected: usize = shape.iter().product();
        if values.len() != expected {
            return Err(Error::Format(format!(
                "expected {expected} values for shape {shape:?}, got {}",
                values.len()
            )));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Format(format!("non-finite value at node {bad}")));
        }
        Ok(GridField {
            lo,
            hi,
            spacing,
            shape,
            values,
            interpolation: Interpolation::Linear,
            name: "grid".into(),
        })
    }

    /// Sample `f` at every node of the box (in parallel).
    pub fn sample(f: &ScalarField, lo: &[f64], hi: &[f64], spacing: f64) -> Result<Self> {
        if lo.len() != f.dim() {
            return Err(Error::DimensionMismatch {
                expected: f.dim(),
                got: lo.len(),
            });
        }
        let shape = shape_of(lo, hi, spacing)?;
        let total: usize = shape.iter().product();
        let values = (0..total)
            .into_par_iter()
            .map(|flat| {
                let x = node_point(lo, spacing, &shape, flat);
                f.eval(&x)
            })
            .collect::<Result<Vec<_>>>()?;
        let mut g = Self::from_values(lo.to_vec(), hi.to_vec(), spacing, values)?;
        g.name = format!("grid[{}]", f.name());
        Ok(g)
    }

    pub fn with_interpolation(mut self, interpolation: Interpolation) -> Self {
        self.interpolation = interpolation;
        self
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn interpolation(&self) -> Interpolation {
        self.interpolation
    }

    pub fn node(&self, flat: usize) -> Vec<f64> {
        node_point(&self.lo, self.spacing, &self.shape, flat)
    }

    pub fn into_field(self) -> ScalarField {
        ScalarField::new(self)
    }

    fn at(&self, idx: &[isize]) -> f64 {
        // Ghost nodes outside the box are extrapolated linearly from the face.
        let mut flat = 0usize;
        let mut ghost: Option<(usize, isize)> = None;
        for (k, (&i, &n)) in idx.iter().zip(&self.shape).enumerate() {
            let n = n as isize;
            let c = i.clamp(0, n - 1);
            if c != i && ghost.is_none() {
                ghost = Some((k, i - c));
            }
            flat = flat * self.shape[k] + c as usize;
        }
        match ghost {
            None => self.values[flat],
            Some((k, off)) => {
                let mut inner = idx.to_vec();
                let n = self.shape[k] as isize;
                let face = idx[k].clamp(0, n - 1);
                inner[k] = face;
                let a = self.at(&inner);
                inner[k] = (face - off.signum()).clamp(0, n - 1);
                let b = self.at(&inner);
                a + (a - b) * off.abs() as f64
            }
        }
    }

    pub fn interpolate(&self, x: &[f64]) -> Result<f64> {
        let dim = self.dim();
        let mut base = vec![0isize; dim];
        let mut frac = vec![0.0; dim];
        for k in 0..dim {
            let tol = 1e-12 * (self.hi[k] - self.lo[k]).abs().max(1.0);
            if !(x[k] >= self.lo[k] - tol && x[k] <= self.hi[k] + tol) {
                return Err(Error::Domain {
                    field: self.name.clone(),
                    point: x.to_vec(),
                });
            }
            let t = ((x[k] - self.lo[k]) / self.spacing).max(0.0);
            let i = (t.floor() as isize).min(self.shape[k] as isize - 2).max(0);
            base[k] = i;
            frac[k] = t - i as f64;
        }
        let (offsets, weights): (Vec<isize>, Box<dyn Fn(f64) -> Vec<f64>>) = match self.interpolation {
            Interpolation::Linear => (vec![0, 1], Box::new(|t| vec![1.0 - t, t])),
            Interpolation::Cubic => (
                vec![-1, 0, 1, 2],
                Box::new(|t| {
                    let t2 = t * t;
                    let t3 = t2 * t;
                    vec![
                        -0.5 * t3 + t2 - 0.5 * t,
                        1.5 * t3 - 2.5 * t2 + 1.0,
                        -1.5 * t3 + 2.0 * t2 + 0.5 * t,
                        0.5 * t3 - 0.5 * t2,
                    ]
                }),
            ),
        };
        let w: Vec<Vec<f64>> = frac.iter().map(|&t| weights(t)).collect();
        let m = offsets.len();
        let mut acc = 0.0;
        let mut idx = vec![0isize; dim];
        for flat in 0..m.pow(dim as u32) {
            let mut rest = flat;
            let mut weight = 1.0;
            for k in 0..dim {
                let j = rest % m;
                rest /= m;
                idx[k] = base[k] + offsets[j];
                weight *= w[k][j];
            }
            if weight != 0.0 {
                acc += weight * self.at(&idx);
            }
        }
        Ok(acc)
    }

    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::with_capacity(8 * (2 + 2 * self.dim() + self.values.len()));
        buf.extend_from_slice(&(self.dim() as u64).to_le_bytes());
        for (a, b) in self.lo.iter().zip(&self.hi) {
            buf.extend_from_slice(&a.to_le_bytes());
            buf.extend_from_slice(&b.to_le_bytes());
        }
        buf.extend_from_slice(&self.spacing.to_le_bytes());
        for v in &self.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        write_atomic(path, &buf)
    }

    pub fn read_binary(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        fs::File::open(path)?.read_to_end(&mut bytes)?;
        if bytes.len() % 8 != 0 || bytes.len() < 8 {
            return Err(Error::Format("truncated grid file".into()));
        }
        let words: Vec<[u8; 8]> = bytes
            .chunks_exact(8)
            .map(|c| c.try_into().expect("chunk of 8"))
            .collect();
        let n = u64::from_le_bytes(words[0]) as usize;
        if n == 0 || words.len() < 2 + 2 * n {
            return Err(Error::Format(format!("bad header (n = {n})")));
        }
        let f = |i: usize| f64::from_le_bytes(words[i]);
        let lo = (0..n).map(|k| f(1 + 2 * k)).collect();
        let hi = (0..n).map(|k| f(2 + 2 * k)).collect();
        let h = f(1 + 2 * n);
        let values = (2 + 2 * n..words.len()).map(f).collect();
        Self::from_values(lo, hi, h, values)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        out.push_str(&self.dim().to_string());
        for (a, b) in self.lo.iter().zip(&self.hi) {
            out.push_str(&format!(",{a:?},{b:?}"));
        }
        out.push_str(&format!(",{:?}\n", self.spacing));
        for v in &self.values {
            out.push_str(&format!("{v:?}\n"));
        }
        write_atomic(path, out.as_bytes())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let reader = BufReader::new(fs::File::open(path)?);
        let mut lines = reader.lines();
        let header = lines.next().ok_or_else(|| Error::Format("empty grid file".into()))??;
        let nums = header
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Format(format!("bad header field `{s}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        let n = nums[0] as usize;
        if n == 0 || nums.len() != 2 + 2 * n {
            return Err(Error::Format(format!("header has {} fields for n = {n}", nums.len())));
        }
        let lo = (0..n).map(|k| nums[1 + 2 * k]).collect();
        let hi = (0..n).map(|k| nums[2 + 2 * k]).collect();
        let h = nums[1 + 2 * n];
        let mut values = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            let s = line.trim();
            if s.is_empty() {
                continue;
            }
            values.push(
                s.parse::<f64>()
                    .map_err(|_| Error::Format(format!("bad value on line {}", i + 2)))?,
            );
        }
        Self::from_values(lo, hi, h, values)
    }
}

fn node_point(lo: &[f64], h: f64, shape: &[usize], flat: usize) -> Vec<f64> {
    let mut x = vec![0.0; lo.len()];
    let mut rest = flat;
    for k in (0..lo.len()).rev() {
        let i = rest % shape[k];
        rest /= shape[k];
        x[k] = lo[k] + i as f64 * h;
    }
    x
}

/// Write to a sibling temporary file, then rename over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::Io(format!("{} has no file name", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(bytes)?;
        file.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

impl FieldFunction for GridField {
    fn dim(&self) -> usize {
        self.lo.len()
    }
    fn name(&self) -> String {
        self.name.clone()
    }
    fn kind(&self) -> FieldKind {
        FieldKind::Grid
    }
    fn value(&self, x: &[f64]) -> Result<f64> {
        self.interpolate(x)
    }
    fn sup_bound(&self) -> Option<f64> {
        Some(self.values.iter().fold(0.0, |m, v| m.max(v.abs())))
    }
    fn difference_step(&self) -> Option<f64> {
        Some(self.spacing)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registry;

    #[test]
    fn linear_interpolation_is_exact_on_affine_data() {
        let f = registry::parse("linear2(2, -1)", 2).unwrap();
        let g = GridField::sample(&f, &[-1.0, 0.0], &[1.0, 2.0], 0.25).unwrap();
        assert_eq!(g.shape(), &[9, 9]);
        let x = [0.13, 1.77];
        assert!((g.value(&x).unwrap() - f.eval(&x).unwrap()).abs() < 1e-14);
        assert!((g.value(&[1.0, 2.0]).unwrap() - 0.0).abs() < 1e-14);
        assert!(matches!(g.value(&[1.1, 0.0]), Err(Error::Domain { .. })));
    }

    #[test]
    fn cubic_interpolation_is_exact_on_quadratics_inside() {
        let f = registry::parse("quad", 1).unwrap();
        let g = GridField::sample(&f, &[-2.0], &[2.0], 0.5)
            .unwrap()
            .with_interpolation(Interpolation::Cubic);
        for &x in &[-1.3, 0.1, 0.77, 1.2] {
            assert!((g.value(&[x]).unwrap() - x * x).abs() < 1e-13, "{x}");
        }
        let smooth = registry::parse("sin", 1).unwrap();
        let coarse = GridField::sample(&smooth, &[0.0], &[3.0], 0.1).unwrap();
        let lin_err = (coarse.value(&[1.234]).unwrap() - 1.234f64.sin()).abs();
        let cub_err = (coarse.with_interpolation(Interpolation::Cubic).value(&[1.234]).unwrap() - 1.234f64.sin()).abs();
        assert!(cub_err < lin_err / 10.0);
    }

    #[test]
    fn binary_and_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let f = registry::parse("gauss(0.5)", 2).unwrap();
        let g = GridField::sample(&f, &[-1.0, -0.5], &[1.0, 0.5], 0.125).unwrap();
        let bin = dir.path().join("g.bin");
        g.write_binary(&bin).unwrap();
        let back = GridField::read_binary(&bin).unwrap();
        assert_eq!(back.values(), g.values());
        assert_eq!(back.shape(), g.shape());
        let csv = dir.path().join("g.csv");
        g.write_csv(&csv).unwrap();
        let back = GridField::read_csv(&csv).unwrap();
        assert_eq!(back.values(), g.values());
        // row-major: the second node moves along the last axis
        assert_eq!(g.node(1), vec![-1.0, -0.375]);
    }

    #[test]
    fn malformed_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        std::fs::write(&p, "1,0,1,0.3\n1\n2\n").unwrap();
        assert!(matches!(GridField::read_csv(&p), Err(Error::Format(_))));
        std::fs::write(&p, "1,0,1,0.5\n1\n2\n").unwrap();
        assert!(matches!(GridField::read_csv(&p), Err(Error::Format(_))));
        std::fs::write(&p, "1,0,1,0.5\n1\n2\n3\n").unwrap();
        assert!(GridField::read_csv(&p).is_ok());
    }

    #[test]
    fn grid_derivatives_use_the_spacing() {
        let f = registry::parse("quad", 1).unwrap();
        let g = GridField::sample(&f, &[-2.0], &[2.0], 0.01).unwrap().into_field();
        let d = g.derivative(&crate::poly::MultiIndex::unit(1, 0), &[0.5]).unwrap();
        assert!((d - 1.0).abs() < 1e-10);
    }
}
