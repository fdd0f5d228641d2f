//! Norms in `H2(Ā^c)`, the a-posteriori error bound for conformal balanced
//! truncation, and pole-region membership tests.

use nalgebra::SVD;
use serde::{Deserialize, Serialize};

use crate::balancing::{balance_numerical, BalancedRealization};
use crate::error::{Error, Result};
use crate::gramians::{gramians, GramianMethod, GramianPair};
use crate::linalg::{fmt_c, lu_solve, CMat, C64};
use crate::maps::{ConformalMap, MobiusMap};
use crate::quadrature::{integrate_scalar, QuadratureConfig, QuadratureDiagnostics};
use crate::system::LtiSystem;

/// A pole-enclosing region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RegionSpec {
    /// `m(C₋)` for a Möbius map `m`.
    MobiusImage(MobiusMap),
    Disk {
        c: C64,
        r: f64,
    },
    UpperHalfPlane,
    /// The ellipse `c + M·{(s + 1/s)/2 : |s| = R}` and its interior.
    BernsteinEllipse {
        c: C64,
        m: C64,
        r: f64,
    },
}

impl RegionSpec {
    /// The region a map sends the open left half-plane into.
    pub fn for_map(map: &ConformalMap) -> Self {
        match map {
            ConformalMap::Mobius(m) => RegionSpec::MobiusImage(*m),
            ConformalMap::Joukowski(j) => RegionSpec::BernsteinEllipse { c: j.center(), m: j.scale(), r: j.r() },
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            RegionSpec::MobiusImage(_) => "mobius-image",
            RegionSpec::Disk { .. } => "disk",
            RegionSpec::UpperHalfPlane => "upper-half-plane",
            RegionSpec::BernsteinEllipse { .. } => "bernstein-ellipse",
        }
    }
}

/// Coefficients `(h00, h10, h11)` of
/// `h(z) = h00 + 2 Re(h10 z) + h11 |z|²`, which is `|α − γz|²·(−2 Re m⁻¹(z))`.
pub fn mobius_region_polynomial(m: &MobiusMap) -> (f64, C64, f64) {
    let (a, b, g, d) = (m.alpha(), m.beta(), m.gamma(), m.delta());
    let h00 = 2.0 * (b * a.conj()).re;
    let h10 = -d * a.conj() - g * b.conj();
    let h11 = 2.0 * (d * g.conj()).re;
    (h00, h10, h11)
}

/// Membership test with a signed margin: positive inside, negative outside.
pub fn region_contains(region: &RegionSpec, z: C64) -> (bool, f64) {
    let margin = match *region {
        RegionSpec::MobiusImage(m) => {
            let (h00, h10, h11) = mobius_region_polynomial(&m);
            h00 + 2.0 * (h10 * z).re + h11 * z.norm_sqr()
        }
        RegionSpec::Disk { c, r } => r * r - (z - c).norm_sqr(),
        RegionSpec::UpperHalfPlane => z.im,
        RegionSpec::BernsteinEllipse { c, m, r } => {
            let s = m.norm();
            let w = (z - c) * m.conj() / s;
            let a = 0.5 * s * (r + 1.0 / r);
            let b = 0.5 * s * (r - 1.0 / r);
            1.0 - ((w.re / a).powi(2) + (w.im / b).powi(2))
        }
    };
    (margin > 0.0, margin)
}

/// Squared norm `(1/2π) ∫ ‖G(ψ(iω))‖²_F |ψ′(iω)| dω` of `sys`.
pub fn h2abar_norm_squared(
    sys: &LtiSystem,
    map: &ConformalMap,
    cfg: &QuadratureConfig,
) -> Result<(f64, QuadratureDiagnostics)> {
    let ev = sys.evaluator()?;
    integrate_scalar(
        |w| {
            let s = C64::new(0.0, w);
            Ok(ev.eval(map.eval(s)?)?.norm_squared() * map.deriv(s)?.norm() / (2.0 * std::f64::consts::PI))
        },
        cfg,
    )
}

pub fn h2abar_norm(sys: &LtiSystem, map: &ConformalMap, cfg: &QuadratureConfig) -> Result<f64> {
    Ok(h2abar_norm_squared(sys, map, cfg)?.0.max(0.0).sqrt())
}

/// `‖G − G_r‖` with the difference formed pointwise, so a small error is
/// not lost to cancellation between two large norms. The relative
/// tolerance applies to the squared error; callers comparing against
/// `‖G‖` should also pass a suitable `abs_tol`.
pub fn h2abar_error_norm(fom: &LtiSystem, rom: &LtiSystem, map: &ConformalMap, cfg: &QuadratureConfig) -> Result<f64> {
    Ok(h2abar_error_norm_squared(fom, rom, map, cfg)?.0.max(0.0).sqrt())
}

/// Squared error with quadrature diagnostics.
pub fn h2abar_error_norm_squared(
    fom: &LtiSystem,
    rom: &LtiSystem,
    map: &ConformalMap,
    cfg: &QuadratureConfig,
) -> Result<(f64, QuadratureDiagnostics)> {
    check_io(fom, rom)?;
    let (ef, er) = (fom.evaluator()?, rom.evaluator()?);
    integrate_scalar(
        |w| {
            let s = C64::new(0.0, w);
            let z = map.eval(s)?;
            Ok((ef.eval(z)? - er.eval(z)?).norm_squared() * map.deriv(s)?.norm() / (2.0 * std::f64::consts::PI))
        },
        cfg,
    )
}

/// Tolerances for [`h2abar_error_norm`] given `‖G‖`: the absolute floor
/// drops to `1e-20·‖G‖²` so that small errors are still resolved relatively.
pub fn error_quadrature_config(cfg: &QuadratureConfig, fom_norm: f64) -> QuadratureConfig {
    let floor = (1e-20 * fom_norm * fom_norm).max(f64::MIN_POSITIVE);
    cfg.with_tolerances(cfg.abs_tol.min(floor), cfg.rel_tol)
}

fn check_io(fom: &LtiSystem, rom: &LtiSystem) -> Result<()> {
    if fom.inputs() != rom.inputs() || fom.outputs() != rom.outputs() {
        return Err(Error::DimensionMismatch(format!(
            "full model is {}x{}, reduced model is {}x{}",
            fom.outputs(),
            fom.inputs(),
            rom.outputs(),
            rom.inputs()
        )));
    }
    Ok(())
}

/// Logarithmic frequencies in `[lo, hi]`, mirrored to negative values,
/// plus `ω = 0`. Sorted ascending.
pub fn frequency_grid(per_side: usize, lo: f64, hi: f64) -> Result<Vec<f64>> {
    if per_side < 2 || !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "frequency grid needs at least 2 points on 0 < lo < hi (got {per_side} on [{lo}, {hi}])"
        )));
    }
    let (l0, l1) = (lo.log10(), hi.log10());
    let pos: Vec<f64> = (0..per_side).map(|k| 10f64.powf(l0 + (l1 - l0) * k as f64 / (per_side - 1) as f64)).collect();
    let mut grid: Vec<f64> = pos.iter().rev().map(|w| -w).collect();
    grid.push(0.0);
    grid.extend(pos);
    Ok(grid)
}

/// 1000 points per side on `[1e-4, 1e8]`, plus zero.
pub fn default_frequency_grid() -> Vec<f64> {
    frequency_grid(1000, 1e-4, 1e8).expect("valid default grid")
}

/// `‖G − G_r‖² ≤ trace(C₂Σ₂C₂*) + ε·trace(Σ₂)` with
/// `ε = sup_ω ‖L(iω)* C_r* (C_r L(iω) − 2C₂)‖₂` approximated on `freq_grid`
/// and `L(iω) = (ψ(iω)I − A₁₁)⁻¹(−A₁₂)`.
///
/// Returns `(bound, ε)`. Grid points where `ψ(iω)I − A₁₁` is singular are
/// skipped with a warning.
pub fn h2_error_bound(
    bal: &BalancedRealization,
    r: usize,
    map: &ConformalMap,
    freq_grid: &[f64],
) -> Result<(f64, f64)> {
    let n = bal.order();
    if r == 0 || r > n {
        return Err(Error::InvalidArgument(format!("reduced order {r} outside 1..={n}")));
    }
    if freq_grid.is_empty() {
        return Err(Error::InvalidArgument("empty frequency grid".into()));
    }
    if r == n {
        return Ok((0.0, 0.0));
    }
    let p = bal.partition(r)?;
    if p.sigma1[r - 1] - p.sigma2[0] <= 1e-10 * p.sigma1[0] {
        log::warn!("no singular value gap at r = {r}; the bound assumes one");
    }
    let s2 = CMat::from_diagonal(&nalgebra::DVector::from_iterator(n - r, p.sigma2.iter().map(|&s| C64::new(s, 0.0))));
    let head = (&p.c2 * &s2 * p.c2.adjoint()).trace().re;
    let tr_s2: f64 = p.sigma2.iter().sum();

    let neg_a12 = -&p.a12;
    let two_c2 = &p.c2 * C64::new(2.0, 0.0);
    let mut eps: f64 = 0.0;
    let mut used = 0usize;
    for &w in freq_grid {
        let z = map.eval(C64::new(0.0, w))?;
        let shifted = CMat::identity(r, r) * z - &p.a11;
        let Some(l) = lu_solve(&shifted, &neg_a12) else {
            log::warn!("skipping ω = {w:e}: resolvent singular at {}", fmt_c(z));
            continue;
        };
        let cl = &p.c1 * &l;
        let inner = &cl - &two_c2;
        // L* C_r* inner = (C_r L)* inner; a thin QR of (C_r L)* leaves a
        // q-row factor with the same spectral norm.
        let rf = cl.adjoint().qr().r();
        eps = eps.max(spectral_norm(&(rf * inner))?);
        used += 1;
    }
    if used == 0 {
        return Err(Error::ResolventSingular("every frequency grid point".into()));
    }
    Ok((head + eps * tr_s2, eps))
}

fn spectral_norm(m: &CMat) -> Result<f64> {
    if m.is_empty() {
        return Ok(0.0);
    }
    let svd = SVD::try_new(m.clone(), false, false, f64::EPSILON, 0)
        .ok_or(Error::DecompositionFailed("SVD in spectral norm"))?;
    Ok(svd.singular_values.max())
}

/// One reduced pole and its position relative to the region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoleVerdict {
    #[serde(with = "crate::io::complex")]
    pub pole: C64,
    pub inside: bool,
    pub margin: f64,
}

/// Pole verdicts for every eigenvalue of `sys.a()`, sorted by real then
/// imaginary part.
pub fn pole_verdicts(sys: &LtiSystem, region: &RegionSpec) -> Result<Vec<PoleVerdict>> {
    let mut poles = sys.poles()?;
    poles.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    Ok(poles
        .into_iter()
        .map(|pole| {
            let (inside, margin) = region_contains(region, pole);
            PoleVerdict { pole, inside, margin }
        })
        .collect())
}

/// Error, bound and pole-region summary for a reduced model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub h2abar_error: f64,
    pub h2abar_fom_norm: f64,
    /// Bound on the squared error of the balanced truncation of the same
    /// order as the reduced model.
    pub bound: f64,
    pub epsilon: f64,
    /// `ε` is a maximum over a finite grid, not the exact supremum.
    pub bound_grid_points: usize,
    /// `ε` on a grid of twice the density divided by `ε` on the base grid.
    pub epsilon_refinement_ratio: f64,
    pub region: String,
    pub pole_verdicts: Vec<PoleVerdict>,
}

impl ErrorReport {
    pub fn all_poles_inside(&self) -> bool {
        self.pole_verdicts.iter().all(|v| v.inside)
    }
}

/// Builds an [`ErrorReport`]. The bound is computed from a numerically
/// balanced realization of `fom` truncated to the order of `rom`, with
/// Gramians obtained by `method`.
pub fn error_report(
    fom: &LtiSystem,
    rom: &LtiSystem,
    map: &ConformalMap,
    method: GramianMethod,
    cfg: &QuadratureConfig,
) -> Result<ErrorReport> {
    let grams = gramians(fom, map, method, cfg)?;
    error_report_with_gramians(fom, rom, map, &grams, cfg)
}

/// [`error_report`] with precomputed Gramians of `fom`.
pub fn error_report_with_gramians(
    fom: &LtiSystem,
    rom: &LtiSystem,
    map: &ConformalMap,
    grams: &GramianPair,
    cfg: &QuadratureConfig,
) -> Result<ErrorReport> {
    check_io(fom, rom)?;
    let fom_norm = h2abar_norm(fom, map, cfg)?;
    let error = h2abar_error_norm(fom, rom, map, &error_quadrature_config(cfg, fom_norm))?;

    let bal = balance_numerical(fom, grams, 0.0)?;
    let r = rom.order().min(bal.order());
    let grid = default_frequency_grid();
    let (bound, epsilon) = h2_error_bound(&bal, r, map, &grid)?;
    let fine = frequency_grid(2000, 1e-4, 1e8)?;
    let (_, eps_fine) = h2_error_bound(&bal, r, map, &fine)?;
    let ratio = if epsilon > 0.0 { eps_fine / epsilon } else { 1.0 };
    log::info!("ε = {epsilon:.6e}; doubling the grid density changes it by a factor {ratio:.6}");

    let region = RegionSpec::for_map(map);
    Ok(ErrorReport {
        h2abar_error: error,
        h2abar_fom_norm: fom_norm,
        bound,
        epsilon,
        bound_grid_points: grid.len(),
        epsilon_refinement_ratio: ratio,
        region: region.name().to_string(),
        pole_verdicts: pole_verdicts(rom, &region)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::balancing::{balance_full, conformal_bt_with_gramians, TieHandling};
    use crate::benchmarks::{BenchmarkKind, BenchmarkSpec};
    use crate::gramians::gramians_mobius;
    use crate::linalg::c64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn heat(n: usize) -> LtiSystem {
        BenchmarkSpec::new(BenchmarkKind::Heat, n).unwrap().build().unwrap()
    }

    fn disk_for(sys: &LtiSystem) -> MobiusMap {
        let rho = sys.poles().unwrap().iter().map(|p| p.norm()).fold(0.0, f64::max);
        MobiusMap::disk(c64(-0.6 * rho, 0.0), 0.6 * rho).unwrap()
    }

    fn tight() -> QuadratureConfig {
        QuadratureConfig::default().with_tolerances(1e-14, 1e-10)
    }

    #[test]
    fn first_order_lag() {
        let one = CMat::from_element(1, 1, c64(1.0, 0.0));
        let sys = LtiSystem::new(-one.clone(), one.clone(), one).unwrap();
        let nrm = h2abar_norm(&sys, &ConformalMap::identity(), &tight()).unwrap();
        assert!((nrm - 0.5f64.sqrt()).abs() < 1e-9);
        assert_eq!(h2abar_error_norm(&sys, &sys, &ConformalMap::identity(), &tight()).unwrap(), 0.0);
    }

    #[test]
    fn norm_matches_gramian_trace() {
        let sys = heat(50);
        let map = disk_for(&sys);
        let g = gramians_mobius(&sys, &map).unwrap();
        let tr = (sys.c() * &g.xc * sys.c().adjoint()).trace().re;
        let sq = h2abar_norm_squared(&sys, &map.into(), &tight()).unwrap().0;
        assert!((sq - tr).abs() < 1e-6 * tr, "{sq} vs {tr}");
    }

    #[test]
    fn disk_representations_agree() {
        let (c, r) = (c64(-3.0, 0.5), 3.0);
        let img = RegionSpec::MobiusImage(MobiusMap::disk(c, r).unwrap());
        let disk = RegionSpec::Disk { c, r };
        assert_eq!(region_contains(&disk, c), (true, r * r));
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut checked = 0;
        while checked < 100 {
            let z = c64(rng.gen_range(-8.0..2.0), rng.gen_range(-5.0..5.0));
            let (inside, margin) = region_contains(&disk, z);
            if margin.abs() < 1e-6 {
                continue;
            }
            assert_eq!(region_contains(&img, z).0, inside, "z = {z}");
            checked += 1;
        }
    }

    #[test]
    fn upper_half_plane() {
        assert_eq!(region_contains(&RegionSpec::UpperHalfPlane, c64(0.0, -1.0)), (false, -1.0));
    }

    #[test]
    fn mobius_polynomial_characterizes_image() {
        let maps = [
            MobiusMap::disk(c64(-2.0, 1.0), 2.5).unwrap(),
            MobiusMap::clockwise_rotation(),
            MobiusMap::new(c64(1.0, 2.0), c64(0.5, -1.0), c64(1.0, 0.0), c64(-2.0, 0.3)).unwrap(),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for m in maps {
            let region = RegionSpec::MobiusImage(m);
            for _ in 0..200 {
                let (x, y) = (rng.gen_range(0.01..10.0), rng.gen_range(-10.0..10.0));
                assert!(region_contains(&region, m.eval(c64(-x, y)).unwrap()).0);
                assert!(!region_contains(&region, m.eval(c64(x, y)).unwrap()).0);
            }
        }
    }

    #[test]
    fn ellipse_boundary_and_center() {
        let (c, m, r) = (c64(1e-6, 0.0), c64(0.0, 50.0), 1.2);
        let e = RegionSpec::BernsteinEllipse { c, m, r };
        assert!(region_contains(&e, c).0);
        for k in 0..16 {
            let t = k as f64 * 0.4;
            let s = C64::from_polar(r, t);
            let z = c + m * (s + 1.0 / s) * 0.5;
            assert!(region_contains(&e, z).1.abs() < 1e-12);
            let inner = C64::from_polar(0.5 * (1.0 + r), t);
            assert!(region_contains(&e, c + m * (inner + 1.0 / inner) * 0.5).0);
        }
    }

    fn balanced_heat(n: usize) -> (LtiSystem, MobiusMap, BalancedRealization) {
        let sys = heat(n);
        let map = disk_for(&sys);
        let g = gramians_mobius(&sys, &map).unwrap();
        let bal = balance_numerical(&sys, &g, 0.0).unwrap();
        (sys, map, bal)
    }

    #[test]
    fn simplified_resolvent_matches_k_form() {
        let (_, map, bal) = balanced_heat(30);
        let map = ConformalMap::from(map);
        let r = 3;
        let p = bal.partition(r).unwrap();
        for &w in &[-40.0, -0.3, 0.0, 0.02, 1.0, 900.0] {
            let s = c64(0.0, w);
            let (z, dz) = (map.eval(s).unwrap(), map.deriv(s).unwrap());
            let k = C64::new(1.0, 0.0) / dz.sqrt();
            let kr = (CMat::identity(r, r) * z - &p.a11) * k;
            let k12 = -&p.a12 * k;
            let full = lu_solve(&kr, &k12).unwrap();
            let simple = lu_solve(&(CMat::identity(r, r) * z - &p.a11), &(-&p.a12)).unwrap();
            assert!((&full - &simple).norm() <= 1e-10 * simple.norm());
        }
    }

    #[test]
    fn bound_majorizes_error() {
        let (sys, map, bal) = balanced_heat(60);
        let cmap = ConformalMap::from(map);
        let g = gramians_mobius(&sys, &map).unwrap();
        for r in [2, 4, 6] {
            let rom = conformal_bt_with_gramians(&sys, &g, r, TieHandling::Reject).unwrap().rom;
            let err = h2abar_error_norm(&sys, &rom, &cmap, &tight()).unwrap();
            let (bound, eps) = h2_error_bound(&bal, r, &cmap, &default_frequency_grid()).unwrap();
            assert!(eps.is_finite() && eps >= 0.0);
            assert!(err * err <= bound * (1.0 + 1e-8), "r={r}: {} > {bound}", err * err);
        }
    }

    #[test]
    fn no_truncation_no_bound() {
        let one = CMat::from_element(1, 1, c64(1.0, 0.0));
        let sys = LtiSystem::new(-one.clone(), one.clone(), one).unwrap();
        let map = MobiusMap::identity();
        let bal = balance_full(&sys, &gramians_mobius(&sys, &map).unwrap()).unwrap();
        assert_eq!(h2_error_bound(&bal, 1, &map.into(), &[0.0]).unwrap(), (0.0, 0.0));
        assert!(h2_error_bound(&bal, 0, &map.into(), &[0.0]).is_err());
        assert!(h2_error_bound(&bal, 1, &map.into(), &[]).is_err());
    }

    #[test]
    fn grid_shape() {
        let g = default_frequency_grid();
        assert_eq!(g.len(), 2001);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(g[1000], 0.0);
        assert!((g[2000] - 1e8).abs() < 1e-3 && (g[1001] - 1e-4).abs() < 1e-18);
    }

    #[test]
    fn report_for_identical_models() {
        let sys = heat(12);
        let map = ConformalMap::from(disk_for(&sys));
        let rep = error_report(&sys, &sys, &map, GramianMethod::Lyapunov, &QuadratureConfig::default()).unwrap();
        assert_eq!(rep.h2abar_error, 0.0);
        assert!(rep.bound >= 0.0 && rep.all_poles_inside());
        let bad = LtiSystem::new(sys.a().clone(), CMat::zeros(12, 2), CMat::zeros(1, 12)).unwrap();
        assert!(matches!(
            error_report(&sys, &bad, &map, GramianMethod::Lyapunov, &QuadratureConfig::default()),
            Err(Error::DimensionMismatch(_))
        ));
    }
}
