//! Adaptive Gauss–Kronrod 7/15 quadrature over the real line for
//! block-matrix valued integrands.
//!
//! Two integrand shapes are supported: dense blocks, and Hermitian blocks
//! given through factors `F(ω) = Σ Y(ω) Y(ω)*`. The factored form never
//! builds per-node matrices: panel error estimates come from small Gram
//! matrices and accepted panels are compressed before being folded into the
//! running total.
//!
//! The infinite interval is mapped to a total angle of `π`: `ω = tan θ` for
//! `|ω| ≤ 1` and `ω = ±cot φ` beyond, so that `dω = (1 + ω²) dθ` throughout
//! and large `|ω|` keep full relative precision. Panels are bisected until
//! the Frobenius norm of the Kronrod–Gauss difference on each panel is below
//! its share of the target, `max(abs_tol, rel_tol·‖I‖) · width/π`. A panel
//! that is already accurate but whose error stops shrinking when bisected is
//! taken to be limited by rounding in the integrand and accepted. Panels are
//! visited depth first in a fixed order and accepted contributions are
//! summed in that order, so results are bitwise reproducible.

use std::f64::consts::{FRAC_PI_4, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMat, C64};

/// Kronrod abscissae on `[0, 1]`, descending; odd indices are Gauss nodes.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

/// Gauss weights for `XGK[1], XGK[3], XGK[5], XGK[7]`.
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

const INITIAL_PANELS: usize = 32;

#[derive(Debug, Clone, Copy)]
enum Piece {
    /// `ω = −cot φ`, `φ ∈ (0, π/4]`.
    Left,
    /// `ω = tan θ`, `θ ∈ [−π/4, π/4]`.
    Middle,
    /// `ω = cot φ`, `φ ∈ (0, π/4]`.
    Right,
}

impl Piece {
    fn omega(self, t: f64) -> f64 {
        match self {
            Piece::Left => -1.0 / t.tan(),
            Piece::Middle => t.tan(),
            Piece::Right => 1.0 / t.tan(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    piece: Piece,
    a: f64,
    b: f64,
}

fn initial_panels() -> Vec<Panel> {
    let quarter = INITIAL_PANELS / 4;
    let w = FRAC_PI_4 / quarter as f64;
    let mut out = Vec::with_capacity(INITIAL_PANELS);
    for i in 0..quarter {
        out.push(Panel { piece: Piece::Left, a: w * i as f64, b: w * (i + 1) as f64 });
    }
    for i in 0..2 * quarter {
        let a = -FRAC_PI_4 + w * i as f64;
        out.push(Panel { piece: Piece::Middle, a, b: a + w });
    }
    for i in (0..quarter).rev() {
        out.push(Panel { piece: Piece::Right, a: w * i as f64, b: w * (i + 1) as f64 });
    }
    out
}
const MAX_ROUNDS: usize = 4;
/// Relative panel accuracy from which a stalled bisection counts as rounding.
const ROUNDOFF_RESOLVED: f64 = 1e-4;
/// Children whose summed error stays above this fraction of the parent's
/// have not improved.
const ROUNDOFF_STALL: f64 = 0.5;

/// How the infinite integration interval is treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailTreatment {
    /// `ω = tan θ` over `(−π/2, π/2)`; no truncation.
    TangentSubstitution,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
    pub tail: TailTreatment,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            abs_tol: 1e-10,
            rel_tol: 1e-8,
            max_subdivisions: 2000,
            tail: TailTreatment::TangentSubstitution,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.rel_tol > 0.0) {
            return Err(Error::InvalidArgument("quadrature tolerances must be positive".into()));
        }
        if self.max_subdivisions < 1 {
            return Err(Error::InvalidArgument("max_subdivisions must be at least 1".into()));
        }
        Ok(())
    }

    pub fn with_tolerances(mut self, abs_tol: f64, rel_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self.rel_tol = rel_tol;
        self
    }

    pub fn with_max_subdivisions(mut self, max_subdivisions: usize) -> Self {
        self.max_subdivisions = max_subdivisions;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct QuadratureDiagnostics {
    /// Integrand evaluations, all rounds included.
    pub nodes: usize,
    /// Accepted panels in the final round.
    pub panels: usize,
    /// Bisections in the final round.
    pub subdivisions: usize,
    /// Accepted panels whose accuracy was limited by rounding.
    #[serde(default)]
    pub roundoff_panels: usize,
    /// Sum of accepted panel error estimates.
    pub estimated_error: f64,
    /// Error target the final round was run against.
    pub target: f64,
}

/// Nodes of one panel with Kronrod and Gauss weights, Jacobian included.
/// Gauss weights are zero at Kronrod-only nodes.
#[derive(Debug, Clone)]
pub struct PanelNodes {
    pub omega: [f64; 15],
    pub kronrod: [f64; 15],
    pub gauss: [f64; 15],
}

impl PanelNodes {
    fn new(panel: Panel) -> Self {
        let Panel { piece, a, b } = panel;
        let center = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        let mut out = PanelNodes { omega: [0.0; 15], kronrod: [0.0; 15], gauss: [0.0; 15] };
        let mut put = |idx: usize, t: f64, wk: f64, wg: f64| {
            let omega = piece.omega(t);
            let jac = half * (1.0 + omega * omega);
            out.omega[idx] = omega;
            out.kronrod[idx] = wk * jac;
            out.gauss[idx] = wg * jac;
        };
        for j in 0..7 {
            let dx = half * XGK[j];
            let wg = if j % 2 == 1 { WG[j / 2] } else { 0.0 };
            put(2 * j, center - dx, WGK[j], wg);
            put(2 * j + 1, center + dx, WGK[j], wg);
        }
        put(14, center, WGK[7], WG[3]);
        out
    }
}

/// Error estimate and size of one panel's Kronrod value.
#[derive(Debug, Clone, Copy)]
pub struct PanelEstimate {
    pub error: f64,
    pub magnitude: f64,
}

/// Integrand-specific work of the adaptive driver.
pub trait PanelKernel {
    type Panel;
    fn evaluate(&mut self, nodes: &PanelNodes) -> Result<(Self::Panel, PanelEstimate)>;
    fn accept(&mut self, panel: Self::Panel);
    /// Norm of the accepted total, used for the relative target.
    fn total_norm(&mut self) -> f64;
    fn reset(&mut self);
}

/// Runs the adaptive driver; the result is left in the kernel.
pub fn integrate<K: PanelKernel>(kernel: &mut K, cfg: &QuadratureConfig) -> Result<QuadratureDiagnostics> {
    cfg.validate()?;
    let mut diag = QuadratureDiagnostics::default();
    let start = initial_panels();

    // coarse pass to size the relative target
    kernel.reset();
    for &panel in &start {
        let (p, _) = kernel.evaluate(&PanelNodes::new(panel))?;
        diag.nodes += 15;
        kernel.accept(p);
    }
    let mut target = cfg.abs_tol.max(cfg.rel_tol * kernel.total_norm());

    for _round in 0..MAX_ROUNDS {
        kernel.reset();
        let mut est = 0.0;
        let mut roundoff_est = 0.0;
        let mut panels = 0usize;
        let mut roundoff = 0usize;
        let mut subdivisions = 0usize;
        let mut stack: Vec<Pending<K::Panel>> = start.iter().rev().map(|&p| Pending::Fresh(p)).collect();
        while let Some(item) = stack.pop() {
            let (panel, p, e) = match item {
                Pending::Fresh(panel) => {
                    let (p, e) = kernel.evaluate(&PanelNodes::new(panel))?;
                    diag.nodes += 15;
                    (panel, p, e)
                }
                Pending::Done(panel, p, e) => (panel, p, e),
            };
            let Panel { piece, a, b } = panel;
            let share = target * (b - a) / PI;
            // panels resolved to a small fraction of their own size are kept
            // even when their share is out of reach (sign-definite integrands)
            let local = 0.01 * cfg.rel_tol * e.magnitude;
            // below this width the nodes are no longer resolved
            let unresolved = (b - a) <= 1e4 * f64::EPSILON * a.abs().max(b.abs());
            if e.error <= share || e.error <= local || unresolved {
                est += e.error;
                panels += 1;
                kernel.accept(p);
                continue;
            }
            if subdivisions >= cfg.max_subdivisions {
                return Err(Error::QuadratureDivergence(format!(
                    "{} subdivisions, panel [{a:.6e}, {b:.6e}] error {:.3e} > {:.3e}",
                    subdivisions, e.error, share
                )));
            }
            subdivisions += 1;
            let mid = 0.5 * (a + b);
            let left = Panel { piece, a, b: mid };
            let right = Panel { piece, a: mid, b };
            let (pl, el) = kernel.evaluate(&PanelNodes::new(left))?;
            let (pr, er) = kernel.evaluate(&PanelNodes::new(right))?;
            diag.nodes += 30;
            // An accurate panel whose error does not shrink under bisection
            // is limited by rounding in the integrand.
            if e.error <= ROUNDOFF_RESOLVED * e.magnitude && el.error + er.error >= ROUNDOFF_STALL * e.error {
                est += el.error + er.error;
                roundoff_est += el.error + er.error;
                panels += 2;
                roundoff += 2;
                kernel.accept(pl);
                kernel.accept(pr);
                continue;
            }
            stack.push(Pending::Done(right, pr, er));
            stack.push(Pending::Done(left, pl, el));
        }
        let achieved = cfg.abs_tol.max(cfg.rel_tol * kernel.total_norm());
        diag.panels = panels;
        diag.subdivisions = subdivisions;
        diag.roundoff_panels = roundoff;
        diag.estimated_error = est;
        diag.target = target;
        if roundoff > 0 {
            log::debug!("{roundoff} panels limited by rounding, error share {roundoff_est:.3e}");
        }
        if est - roundoff_est <= achieved || target <= achieved {
            if est > achieved {
                log::warn!(
                    "quadrature limited by rounding in the integrand: error estimate {est:.3e} above target {achieved:.3e}"
                );
            }
            return Ok(diag);
        }
        log::debug!("quadrature target {target:.3e} too loose for result, retrying with {achieved:.3e}");
        target = achieved;
    }
    Err(Error::QuadratureDivergence(format!(
        "error estimate {:.3e} did not settle below the relative target",
        diag.estimated_error
    )))
}

enum Pending<P> {
    Fresh(Panel),
    Done(Panel, P, PanelEstimate),
}

fn frob_sum(blocks: &[CMat]) -> f64 {
    blocks.iter().map(|b| b.norm()).sum()
}

/// Dense block integrand `ω ↦ [F_1(ω), …]`.
pub struct DenseKernel<F> {
    f: F,
    total: Option<Vec<CMat>>,
}

impl<F: FnMut(f64) -> Result<Vec<CMat>>> DenseKernel<F> {
    pub fn new(f: F) -> Self {
        DenseKernel { f, total: None }
    }

    pub fn into_total(self) -> Vec<CMat> {
        self.total.unwrap_or_default()
    }
}

impl<F: FnMut(f64) -> Result<Vec<CMat>>> PanelKernel for DenseKernel<F> {
    type Panel = Vec<CMat>;

    fn evaluate(&mut self, nodes: &PanelNodes) -> Result<(Vec<CMat>, PanelEstimate)> {
        let mut kron: Vec<CMat> = Vec::new();
        let mut gauss: Vec<CMat> = Vec::new();
        for i in 0..15 {
            let v = (self.f)(nodes.omega[i])?;
            if kron.is_empty() {
                kron = v.iter().map(|m| CMat::zeros(m.nrows(), m.ncols())).collect();
                gauss = kron.clone();
            }
            for ((k, g), m) in kron.iter_mut().zip(gauss.iter_mut()).zip(&v) {
                k.zip_apply(m, |x, y| *x += y * nodes.kronrod[i]);
                if nodes.gauss[i] != 0.0 {
                    g.zip_apply(m, |x, y| *x += y * nodes.gauss[i]);
                }
            }
        }
        let error = kron.iter().zip(&gauss).map(|(k, g)| (k - g).norm()).sum();
        let magnitude = frob_sum(&kron);
        Ok((kron, PanelEstimate { error, magnitude }))
    }

    fn accept(&mut self, panel: Vec<CMat>) {
        match self.total.as_mut() {
            None => self.total = Some(panel),
            Some(t) => t.iter_mut().zip(&panel).for_each(|(t, k)| *t += k),
        }
    }

    fn total_norm(&mut self) -> f64 {
        self.total.as_deref().map_or(0.0, frob_sum)
    }

    fn reset(&mut self) {
        self.total = None;
    }
}

/// `∫_{−∞}^{∞} F(ω) dω` for dense blocks.
pub fn integrate_real_line<F>(f: F, cfg: &QuadratureConfig) -> Result<(Vec<CMat>, QuadratureDiagnostics)>
where
    F: FnMut(f64) -> Result<Vec<CMat>>,
{
    let mut kernel = DenseKernel::new(f);
    let diag = integrate(&mut kernel, cfg)?;
    Ok((kernel.into_total(), diag))
}

/// Scalar convenience wrapper around [`integrate_real_line`].
pub fn integrate_scalar<F>(mut f: F, cfg: &QuadratureConfig) -> Result<(f64, QuadratureDiagnostics)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (blocks, diag) = integrate_real_line(|w| Ok(vec![CMat::from_element(1, 1, C64::new(f(w)?, 0.0))]), cfg)?;
    Ok((blocks[0][(0, 0)].re, diag))
}

/// Factors of a Hermitian integrand at one node.
///
/// `acc[k]` is accumulated as `Σ w acc[k] acc[k]*`. `probe` holds factors of
/// the quantities whose accuracy is controlled; often they equal `acc`.
pub struct FactorNode {
    pub acc: Vec<CMat>,
    pub probe: Vec<CMat>,
}

const FOLD_COLUMNS: usize = 256;

struct Buffer {
    cols: CMat,
    used: usize,
}

/// Hermitian integrand given by factors; see [`FactorNode`].
pub struct FactorKernel<F, N> {
    f: F,
    norm: N,
    totals: Vec<CMat>,
    buffers: Vec<Buffer>,
}

pub struct FactorPanel {
    acc: Vec<Vec<CMat>>,
    kronrod: [f64; 15],
}

impl<F, N> FactorKernel<F, N>
where
    F: FnMut(f64) -> Result<FactorNode>,
    N: FnMut(&[CMat]) -> f64,
{
    /// `dims[k]` is the row count of `acc[k]`; `norm` maps the accumulated
    /// totals to the norm of the controlled result.
    pub fn new(f: F, norm: N, dims: &[usize]) -> Self {
        FactorKernel {
            f,
            norm,
            totals: dims.iter().map(|&n| CMat::zeros(n, n)).collect(),
            buffers: dims.iter().map(|&n| Buffer { cols: CMat::zeros(n, FOLD_COLUMNS), used: 0 }).collect(),
        }
    }

    fn fold(&mut self) {
        for (t, b) in self.totals.iter_mut().zip(self.buffers.iter_mut()) {
            if b.used == 0 {
                continue;
            }
            let z = b.cols.columns(0, b.used);
            t.gemm(C64::new(1.0, 0.0), &z, &z.adjoint(), C64::new(1.0, 0.0));
            b.used = 0;
        }
    }

    pub fn into_totals(mut self) -> Vec<CMat> {
        self.fold();
        self.totals
    }
}

/// `‖Σ_j c_j P_j P_j*‖_F` from the triangular factor of `S = [P_1 … P_15]`,
/// which avoids the cancellation of expanding the square.
fn weighted_outer_norms(stack: &CMat, width: usize, weights: &[&[f64; 15]]) -> Vec<f64> {
    let r = if stack.nrows() >= stack.ncols() { stack.clone().qr().r() } else { stack.clone() };
    weights
        .iter()
        .map(|c| {
            let mut rd = r.clone();
            for j in 0..15 {
                rd.columns_mut(j * width, width).scale_mut(c[j]);
            }
            (&rd * r.adjoint()).norm()
        })
        .collect()
}

fn stack_columns(parts: &[&CMat]) -> CMat {
    let rows = parts[0].nrows();
    let width = parts[0].ncols();
    let mut s = CMat::zeros(rows, width * parts.len());
    for (j, p) in parts.iter().enumerate() {
        s.columns_mut(j * width, width).copy_from(*p);
    }
    s
}

impl<F, N> PanelKernel for FactorKernel<F, N>
where
    F: FnMut(f64) -> Result<FactorNode>,
    N: FnMut(&[CMat]) -> f64,
{
    type Panel = FactorPanel;

    fn evaluate(&mut self, nodes: &PanelNodes) -> Result<(FactorPanel, PanelEstimate)> {
        let mut acc: Vec<Vec<CMat>> = Vec::new();
        let mut probe: Vec<Vec<CMat>> = Vec::new();
        for i in 0..15 {
            let node = (self.f)(nodes.omega[i])?;
            if acc.is_empty() {
                acc = vec![Vec::with_capacity(15); node.acc.len()];
                probe = vec![Vec::with_capacity(15); node.probe.len()];
            }
            acc.iter_mut().zip(node.acc).for_each(|(v, m)| v.push(m));
            probe.iter_mut().zip(node.probe).for_each(|(v, m)| v.push(m));
        }
        let mut diff = [0.0; 15];
        for i in 0..15 {
            diff[i] = nodes.kronrod[i] - nodes.gauss[i];
        }
        let mut error = 0.0;
        let mut magnitude = 0.0;
        for blocks in &probe {
            let refs: Vec<&CMat> = blocks.iter().collect();
            let s = stack_columns(&refs);
            let width = blocks[0].ncols();
            let norms = weighted_outer_norms(&s, width, &[&diff, &nodes.kronrod]);
            error += norms[0];
            magnitude += norms[1];
        }
        Ok((FactorPanel { acc, kronrod: nodes.kronrod }, PanelEstimate { error, magnitude }))
    }

    fn accept(&mut self, panel: FactorPanel) {
        for (k, blocks) in panel.acc.into_iter().enumerate() {
            let scaled: Vec<CMat> =
                blocks.iter().zip(&panel.kronrod).map(|(m, &w)| m * C64::new(w.sqrt(), 0.0)).collect();
            let refs: Vec<&CMat> = scaled.iter().collect();
            let z = compress(&stack_columns(&refs));
            if self.buffers[k].used + z.ncols() > FOLD_COLUMNS {
                self.fold();
            }
            let b = &mut self.buffers[k];
            if z.ncols() > FOLD_COLUMNS {
                let t = &mut self.totals[k];
                t.gemm(C64::new(1.0, 0.0), &z, &z.adjoint(), C64::new(1.0, 0.0));
                continue;
            }
            b.cols.columns_mut(b.used, z.ncols()).copy_from(&z);
            b.used += z.ncols();
        }
    }

    fn total_norm(&mut self) -> f64 {
        self.fold();
        (self.norm)(&self.totals)
    }

    fn reset(&mut self) {
        for t in &mut self.totals {
            t.fill(C64::new(0.0, 0.0));
        }
        for b in &mut self.buffers {
            b.used = 0;
        }
    }
}

/// `Z₁` with `Z₁ Z₁* ≈ Z Z*`, dropping directions below `1e-15` of the
/// largest.
fn compress(z: &CMat) -> CMat {
    if z.ncols() <= 1 {
        return z.clone();
    }
    let g = z.ad_mul(z);
    let eig = nalgebra::SymmetricEigen::new(crate::linalg::symmetrize(&g));
    let max = eig.eigenvalues.iter().cloned().fold(0.0, f64::max);
    let keep: Vec<usize> = (0..eig.eigenvalues.len()).filter(|&i| eig.eigenvalues[i] > 1e-15 * max).collect();
    let mut u = CMat::zeros(g.nrows(), keep.len());
    for (c, &i) in keep.iter().enumerate() {
        u.set_column(c, &eig.eigenvectors.column(i));
    }
    z * u
}

/// `Σ_k ∫ Y_k(ω) Y_k(ω)* dω` for the factored integrand; `norm` gives the
/// size of the controlled result from the totals.
pub fn integrate_factored<F, N>(
    f: F,
    norm: N,
    dims: &[usize],
    cfg: &QuadratureConfig,
) -> Result<(Vec<CMat>, QuadratureDiagnostics)>
where
    F: FnMut(f64) -> Result<FactorNode>,
    N: FnMut(&[CMat]) -> f64,
{
    let mut kernel = FactorKernel::new(f, norm, dims);
    let diag = integrate(&mut kernel, cfg)?;
    Ok((kernel.into_totals(), diag))
}
