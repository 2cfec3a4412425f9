//! Nonnegative sequences indexed by dyadic scales `j` and the operator
//! `(S_{α,q} X)_j = 2^{jα} (Σ_{i≥j} (2^{-iα} X_i)^q)^{1/q}`.
//!
//! Windows are finite; entries beyond `j_max` are taken to be zero.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DyadicSequence {
    j_min: i32,
    values: Vec<f64>,
}

impl DyadicSequence {
    pub fn new(j_min: i32, values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("values", "empty window"));
        }
        if let Some(v) = values.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
            return Err(Error::invalid(
                "values",
                format!("entries must be finite and ≥ 0, got {v}"),
            ));
        }
        Ok(DyadicSequence { j_min, values })
    }

    pub fn zeros(j_min: i32, j_max: i32) -> Self {
        DyadicSequence {
            j_min,
            values: vec![0.0; (j_max - j_min + 1).max(1) as usize],
        }
    }

    /// `X_j = 1` at `j = k`, zero elsewhere in `[j_min, j_max]`.
    pub fn spike(j_min: i32, j_max: i32, k: i32) -> Self {
        let mut s = Self::zeros(j_min, j_max);
        if (j_min..=j_max).contains(&k) {
            s.values[(k - j_min) as usize] = 1.0;
        }
        s
    }

    /// `X_j = 2^{jγ}`.
    pub fn geometric(j_min: i32, j_max: i32, gamma: f64) -> Self {
        DyadicSequence {
            j_min,
            values: (j_min..=j_max).map(|j| 2f64.powf(j as f64 * gamma)).collect(),
        }
    }

    pub fn j_min(&self) -> i32 {
        self.j_min
    }

    pub fn j_max(&self) -> i32 {
        self.j_min + self.values.len() as i32 - 1
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, j: i32) -> f64 {
        if j < self.j_min || j > self.j_max() {
            0.0
        } else {
            self.values[(j - self.j_min) as usize]
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (i32, f64)> + '_ {
        (self.j_min..).zip(self.values.iter().copied())
    }

    /// `{2^{βj} X_j}`.
    pub fn weighted(&self, beta: f64) -> Self {
        DyadicSequence {
            j_min: self.j_min,
            values: self.iter().map(|(j, x)| 2f64.powf(beta * j as f64) * x).collect(),
        }
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// `‖X‖_{ℓ^q}` over the window; `q = ∞` gives the sup.
    pub fn lq_norm(&self, q: f64) -> f64 {
        if q.is_infinite() {
            self.sup()
        } else {
            self.values.iter().map(|x| x.powf(q)).sum::<f64>().powf(1.0 / q)
        }
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "j,value")?;
        for (j, x) in self.iter() {
            writeln!(out, "{j},{x:e}")?;
        }
        Ok(())
    }

    /// Reads the `j,value` format; the indices must be consecutive.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut j_min = None;
        let mut values = Vec::new();
        for (k, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || (k == 0 && line.starts_with('j')) {
                continue;
            }
            let (j, x) = line
                .split_once(',')
                .ok_or_else(|| Error::Format(format!("line {}: expected `j,value`", k + 1)))?;
            let j: i32 = j
                .trim()
                .parse()
                .map_err(|e| Error::Format(format!("line {}: {e}", k + 1)))?;
            let x: f64 = x
                .trim()
                .parse()
                .map_err(|e| Error::Format(format!("line {}: {e}", k + 1)))?;
            let start = *j_min.get_or_insert(j);
            if j != start + values.len() as i32 {
                return Err(Error::Format(format!("line {}: index {j} out of sequence", k + 1)));
            }
            values.push(x);
        }
        Self::new(j_min.unwrap_or(0), values)
    }
}

fn check_exponent(q: f64) -> Result<()> {
    if q > 0.0 && !q.is_nan() {
        Ok(())
    } else {
        Err(Error::invalid("q", format!("need q ∈ (0, ∞], got {q}")))
    }
}

/// `S_{α,q}` on the window, by the backward recursion
/// `Z_j = X_j^q + 2^{-αq} Z_{j+1}`, `Y_j = Z_j^{1/q}`.
pub fn s_op(x: &DyadicSequence, alpha: f64, q: f64) -> Result<DyadicSequence> {
    check_exponent(q)?;
    let n = x.len();
    let mut out = vec![0.0; n];
    if q.is_infinite() {
        let decay = 2f64.powf(-alpha);
        let mut m = 0.0f64;
        for k in (0..n).rev() {
            m = x.values[k].max(decay * m);
            out[k] = m;
        }
    } else {
        let decay = 2f64.powf(-alpha * q);
        let mut z = 0.0;
        for k in (0..n).rev() {
            z = x.values[k].powf(q) + decay * z;
            out[k] = z.powf(1.0 / q);
        }
    }
    Ok(DyadicSequence {
        j_min: x.j_min,
        values: out,
    })
}

/// Largest relative gap in `2^{βj} (S_{α,q} X)_j = S_{α+β,q}({2^{βi} X_i})_j`.
pub fn scaling_identity_gap(x: &DyadicSequence, alpha: f64, beta: f64, q: f64) -> Result<f64> {
    let lhs = s_op(x, alpha, q)?.weighted(beta);
    let rhs = s_op(&x.weighted(beta), alpha + beta, q)?;
    Ok(lhs
        .values
        .iter()
        .zip(&rhs.values)
        .map(|(a, b)| {
            let scale = a.abs().max(b.abs());
            if scale == 0.0 {
                0.0
            } else {
                (a - b).abs() / scale
            }
        })
        .fold(0.0, f64::max))
}

pub fn scaling_identity_check(x: &DyadicSequence, alpha: f64, beta: f64, q: f64) -> Result<bool> {
    Ok(scaling_identity_gap(x, alpha, beta, q)? <= 1e-12)
}

#[derive(Clone, Debug, Serialize)]
pub struct LemmaReport {
    /// `max_j S_{β,q}(S_{α,p} X)_j / S_{β,q}(X)_j` (0 where both vanish).
    pub max_ratio: f64,
    pub argmax: Option<i32>,
    /// `1 / (1 - 2^{-(α-β)})`.
    pub bound: f64,
    pub holds: bool,
}

/// `1 / (1 - 2^{-(α-β)})` for `β < α`.
pub fn lemma_constant(alpha: f64, beta: f64) -> f64 {
    1.0 / (1.0 - 2f64.powf(-(alpha - beta)))
}

/// Compares `S_{β,q}(S_{α,p} X)` with `S_{β,q}(X)` elementwise.
pub fn lemma_bound_check(x: &DyadicSequence, alpha: f64, beta: f64, p: f64, q: f64) -> Result<LemmaReport> {
    check_exponent(p)?;
    check_exponent(q)?;
    if !(beta < alpha) {
        return Err(Error::invalid(
            "beta",
            format!("need β < α, got β = {beta}, α = {alpha}"),
        ));
    }
    if !(p <= q) {
        return Err(Error::invalid("p", format!("need p ≤ q, got p = {p}, q = {q}")));
    }
    let lhs = s_op(&s_op(x, alpha, p)?, beta, q)?;
    let rhs = s_op(x, beta, q)?;
    let mut max_ratio = 0.0;
    let mut argmax = None;
    for ((j, a), b) in lhs.iter().zip(rhs.values.iter()) {
        let ratio = if b > &0.0 {
            a / b
        } else if a > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        if argmax.is_none() || ratio > max_ratio {
            max_ratio = ratio;
            argmax = Some(j);
        }
    }
    let bound = lemma_constant(alpha, beta);
    Ok(LemmaReport {
        max_ratio,
        argmax,
        bound,
        holds: max_ratio <= bound + 1e-9,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(x: &DyadicSequence, alpha: f64, q: f64, j: i32) -> f64 {
        let terms = (j..=x.j_max()).map(|i| 2f64.powf(-(i as f64) * alpha) * x.get(i));
        let inner = if q.is_infinite() {
            terms.fold(0.0, f64::max)
        } else {
            terms.map(|t| t.powf(q)).sum::<f64>().powf(1.0 / q)
        };
        2f64.powf(j as f64 * alpha) * inner
    }

    #[test]
    fn three_ones() {
        let x = DyadicSequence::new(0, vec![1.0, 1.0, 1.0]).unwrap();
        let y = s_op(&x, 1.0, 1.0).unwrap();
        assert!((y.get(0) - 1.75).abs() < 1e-15);
    }

    #[test]
    fn spike_response() {
        let x = DyadicSequence::spike(-5, 5, 2);
        for q in [0.5, 1.0, 3.0, f64::INFINITY] {
            let y = s_op(&x, 1.3, q).unwrap();
            for (j, v) in y.iter() {
                let want = if j <= 2 { 2f64.powf((j - 2) as f64 * 1.3) } else { 0.0 };
                assert!((v - want).abs() < 1e-14 * want.max(1.0), "q = {q}, j = {j}");
            }
        }
    }

    #[test]
    fn recursion_matches_direct_sum() {
        let x = DyadicSequence::new(-3, vec![0.2, 1.5, 0.0, 3.0, 0.7, 0.1]).unwrap();
        for (alpha, q) in [(1.0, 1.0), (-0.5, 2.0), (2.0, 0.5), (0.7, f64::INFINITY)] {
            let y = s_op(&x, alpha, q).unwrap();
            for (j, v) in y.iter() {
                assert!((v - brute(&x, alpha, q, j)).abs() < 1e-13 * v.max(1.0));
            }
        }
    }

    #[test]
    fn zero_alpha_sup_is_sup() {
        let x = DyadicSequence::new(0, vec![0.3, 2.0, 1.0]).unwrap();
        assert_eq!(s_op(&x, 0.0, f64::INFINITY).unwrap().sup(), 2.0);
        assert!(s_op(&x, 0.0, 2.0).unwrap().sup() <= x.lq_norm(2.0) + 1e-15);
    }

    #[test]
    fn scaling_identity() {
        let x = DyadicSequence::new(-4, vec![0.5, 0.1, 2.0, 0.0, 1.0, 3.0]).unwrap();
        assert!(scaling_identity_check(&x, 2.0, -1.0, 1.5).unwrap());
        assert!(scaling_identity_check(&x, 0.3, 0.0, f64::INFINITY).unwrap());
    }

    #[test]
    fn spike_lemma_constant_two() {
        let x = DyadicSequence::spike(0, 20, 10);
        let rep = lemma_bound_check(&x, 1.0, 0.0, 1.0, 1.0).unwrap();
        assert!(rep.holds && rep.bound == 2.0 && rep.max_ratio <= 2.0);
        let z = lemma_bound_check(&DyadicSequence::zeros(0, 5), 1.0, 0.0, 1.0, 1.0).unwrap();
        assert_eq!(z.max_ratio, 0.0);
    }

    #[test]
    fn preconditions() {
        let x = DyadicSequence::spike(0, 3, 1);
        assert!(lemma_bound_check(&x, 0.0, 1.0, 1.0, 1.0).is_err());
        assert!(lemma_bound_check(&x, 1.0, 0.0, 2.0, 1.0).is_err());
        assert!(s_op(&x, 1.0, 0.0).is_err());
        assert!(DyadicSequence::new(0, vec![-1.0]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let x = DyadicSequence::new(-2, vec![0.25, 1.0, 3.5]).unwrap();
        let mut buf = Vec::new();
        x.write_csv(&mut buf).unwrap();
        let y = DyadicSequence::read_csv(buf.as_slice()).unwrap();
        assert_eq!(x, y);
    }
}
