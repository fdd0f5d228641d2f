//! Centered finite-difference models of the heat, Schrödinger and wave
//! equations on `(0, 1)` with homogeneous Dirichlet conditions.
//!
//! Grid: `k` interior nodes `x_i = i/(k + 1)`, `i = 1..=k`. A node belongs to
//! `[a, b]` iff `a ≤ x_i ≤ b`; computing `x_i` with a single division makes
//! the endpoint ties exact (e.g. `20/200 == 0.1`). Output integrals use the
//! rectangle rule with weight `h`; input indicators have unit height.

use std::fmt;
use std::str::FromStr;

use serde_json::json;

use crate::error::{Error, Result};
use crate::io::ModelMetadata;
use crate::linalg::{c64, CMat, C64};
use crate::system::LtiSystem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BenchmarkKind {
    Heat,
    Schrodinger,
    Wave,
}

impl BenchmarkKind {
    pub const ALL: [BenchmarkKind; 3] = [BenchmarkKind::Heat, BenchmarkKind::Schrodinger, BenchmarkKind::Wave];

    pub fn name(self) -> &'static str {
        match self {
            BenchmarkKind::Heat => "heat",
            BenchmarkKind::Schrodinger => "schrodinger",
            BenchmarkKind::Wave => "wave",
        }
    }
}

impl fmt::Display for BenchmarkKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BenchmarkKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "heat" => Ok(BenchmarkKind::Heat),
            "schrodinger" | "schroedinger" => Ok(BenchmarkKind::Schrodinger),
            "wave" => Ok(BenchmarkKind::Wave),
            other => Err(Error::InvalidArgument(format!("unknown benchmark '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BenchmarkSpec {
    pub kind: BenchmarkKind,
    /// First-order state dimension.
    pub n: usize,
}

impl BenchmarkSpec {
    pub fn new(kind: BenchmarkKind, n: usize) -> Result<Self> {
        if n < 8 {
            return Err(Error::InvalidArgument(format!("{kind} model needs n >= 8, got {n}")));
        }
        if kind == BenchmarkKind::Wave && !n.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "wave model needs an even n (position/velocity pairs), got {n}"
            )));
        }
        Ok(BenchmarkSpec { kind, n })
    }

    /// Number of spatial grid nodes.
    pub fn grid_size(&self) -> usize {
        match self.kind {
            BenchmarkKind::Wave => self.n / 2,
            _ => self.n,
        }
    }

    pub fn spacing(&self) -> f64 {
        1.0 / (self.grid_size() as f64 + 1.0)
    }

    pub fn build(&self) -> Result<LtiSystem> {
        match self.kind {
            BenchmarkKind::Heat => make_heat(self.n),
            BenchmarkKind::Schrodinger => make_schrodinger(self.n),
            BenchmarkKind::Wave => make_wave(self.n),
        }
    }

    pub fn metadata(&self) -> ModelMetadata {
        let k = self.grid_size();
        let range = |a: f64, b: f64| {
            let (lo, hi) = indicator_range(k, a, b);
            json!({ "interval": [a, b], "first_node": lo, "last_node": hi })
        };
        let mut md = ModelMetadata {
            benchmark: Some(self.kind.name().to_string()),
            grid_size: Some(k),
            spacing: Some(self.spacing()),
            ..Default::default()
        };
        let p = &mut md.parameters;
        p.insert("n".into(), json!(self.n));
        match self.kind {
            BenchmarkKind::Heat => {
                p.insert("input".into(), json!("boundary control at x = 1"));
                p.insert("outputs".into(), json!([range(0.1, 0.4)]));
            }
            BenchmarkKind::Schrodinger => {
                p.insert("inputs".into(), json!([range(0.4, 0.5), range(0.5, 0.6)]));
                p.insert("outputs".into(), json!([range(0.1, 0.3), range(0.7, 0.9)]));
            }
            BenchmarkKind::Wave => {
                p.insert("inputs".into(), json!([range(0.1, 0.2), range(0.8, 0.9)]));
                p.insert("outputs".into(), json!([range(0.3, 0.5), range(0.6, 0.7)]));
            }
        }
        md
    }
}

fn node(i: usize, k: usize) -> f64 {
    i as f64 / (k as f64 + 1.0)
}

/// 1-based indices of the first and last node in `[a, b]` (0, 0 if empty).
fn indicator_range(k: usize, a: f64, b: f64) -> (usize, usize) {
    let inside: Vec<usize> = (1..=k).filter(|&i| (a..=b).contains(&node(i, k))).collect();
    (inside.first().copied().unwrap_or(0), inside.last().copied().unwrap_or(0))
}

fn indicator(k: usize, a: f64, b: f64, height: f64) -> Vec<C64> {
    (1..=k)
        .map(|i| {
            let x = node(i, k);
            if a <= x && x <= b {
                c64(height, 0.0)
            } else {
                c64(0.0, 0.0)
            }
        })
        .collect()
}

/// `scale · tridiag(1, −2, 1) / h²` of size `k`.
fn laplacian(k: usize, scale: C64) -> CMat {
    let h = 1.0 / (k as f64 + 1.0);
    let s = scale / (h * h);
    let mut a = CMat::zeros(k, k);
    for i in 0..k {
        a[(i, i)] = s * -2.0;
        if i + 1 < k {
            a[(i, i + 1)] = s;
            a[(i + 1, i)] = s;
        }
    }
    a
}

fn check_n(n: usize) -> Result<()> {
    if n < 8 {
        Err(Error::InvalidArgument(format!("benchmark needs n >= 8, got {n}")))
    } else {
        Ok(())
    }
}

/// Boundary-controlled heat equation, `w(1, t) = u(t)`, output
/// `∫_{0.1}^{0.4} w dx`. The boundary value enters the last node's stencil,
/// so `B = e_n / h²`.
pub fn make_heat(n: usize) -> Result<LtiSystem> {
    check_n(n)?;
    let h = 1.0 / (n as f64 + 1.0);
    let a = laplacian(n, c64(1.0, 0.0));
    let mut b = CMat::zeros(n, 1);
    b[(n - 1, 0)] = c64(1.0 / (h * h), 0.0);
    let c = CMat::from_row_slice(1, n, &indicator(n, 0.1, 0.4, h));
    LtiSystem::new(a, b, c)
}

/// `w_t = −i w_xx + χ_{[0.4,0.5]}u₁ + χ_{[0.5,0.6]}u₂`; spectrum on the
/// positive imaginary axis.
pub fn make_schrodinger(n: usize) -> Result<LtiSystem> {
    check_n(n)?;
    let h = 1.0 / (n as f64 + 1.0);
    let a = laplacian(n, c64(0.0, -1.0));
    let mut b = CMat::zeros(n, 2);
    b.set_column(0, &crate::linalg::CVec::from_vec(indicator(n, 0.4, 0.5, 1.0)));
    b.set_column(1, &crate::linalg::CVec::from_vec(indicator(n, 0.5, 0.6, 1.0)));
    let mut c = CMat::zeros(2, n);
    c.set_row(0, &CMat::from_row_slice(1, n, &indicator(n, 0.1, 0.3, h)).row(0));
    c.set_row(1, &CMat::from_row_slice(1, n, &indicator(n, 0.7, 0.9, h)).row(0));
    LtiSystem::new(a, b, c)
}

/// Undamped wave equation in first-order form over `(w, w_t)`; `n` is the
/// first-order dimension, so the grid has `n/2` nodes.
pub fn make_wave(n: usize) -> Result<LtiSystem> {
    check_n(n)?;
    if !n.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!("wave model needs an even n, got {n}")));
    }
    let k = n / 2;
    let h = 1.0 / (k as f64 + 1.0);
    let lap = laplacian(k, c64(1.0, 0.0));
    let mut a = CMat::zeros(n, n);
    for i in 0..k {
        a[(i, k + i)] = c64(1.0, 0.0);
    }
    a.view_mut((k, 0), (k, k)).copy_from(&lap);
    let mut b = CMat::zeros(n, 2);
    for (col, (lo, hi)) in [(0.1, 0.2), (0.8, 0.9)].into_iter().enumerate() {
        for (i, v) in indicator(k, lo, hi, 1.0).into_iter().enumerate() {
            b[(k + i, col)] = v;
        }
    }
    let mut c = CMat::zeros(2, n);
    for (row, (lo, hi)) in [(0.3, 0.5), (0.6, 0.7)].into_iter().enumerate() {
        for (i, v) in indicator(k, lo, hi, h).into_iter().enumerate() {
            c[(row, i)] = v;
        }
    }
    LtiSystem::new(a, b, c)
}
