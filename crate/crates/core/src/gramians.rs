//! Conformal controllability and observability Gramians.
//!
//! For a Möbius map the Gramians solve a pair of Lyapunov equations in
//! `m⁻¹(A)`. For any conformal map they are the frequency integrals
//!
//! ```text
//! Xc = (1/2π) ∫ (ψ(iω)I − A)⁻¹ B B* (ψ(iω)I − A)⁻* |ψ′(iω)| dω
//! Yo = (1/2π) ∫ (ψ(iω)I − A)⁻* C* C (ψ(iω)I − A)⁻¹ |ψ′(iω)| dω
//! ```
//!
//! evaluated by adaptive quadrature in the Schur basis of `A`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, fmt_c, norm2_estimate, symmetrize, CMat, EigenBasis, SchurForm, C64};
use crate::maps::{ConformalMap, MobiusMap};
use crate::quadrature::{integrate_factored, FactorNode, QuadratureConfig, QuadratureDiagnostics};
use crate::system::LtiSystem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GramianMethod {
    Lyapunov,
    Quadrature,
}

impl GramianMethod {
    pub fn name(self) -> &'static str {
        match self {
            GramianMethod::Lyapunov => "lyapunov",
            GramianMethod::Quadrature => "quadrature",
        }
    }
}

impl fmt::Display for GramianMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GramianMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lyapunov" => Ok(GramianMethod::Lyapunov),
            "quadrature" => Ok(GramianMethod::Quadrature),
            other => Err(Error::InvalidArgument(format!("unknown Gramian method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GramianPair {
    pub xc: CMat,
    pub yo: CMat,
    pub method: GramianMethod,
    pub quad_diagnostics: Option<QuadratureDiagnostics>,
}

/// Lyapunov route, valid for Möbius maps.
///
/// Works in the Schur basis `A = Q T Q*`, where `m⁻¹(T)` is triangular, so
/// the mapped spectrum is not recomputed from a dense `m⁻¹(A)`.
pub fn gramians_mobius(sys: &LtiSystem, map: &MobiusMap) -> Result<GramianPair> {
    let schur_a = SchurForm::new(sys.a())?;
    let n = schur_a.dim();
    let t = &schur_a.t;
    let q = &schur_a.q;
    let id = CMat::identity(n, n);
    let shift = &id * map.alpha() - t * map.gamma();
    let floor = 4.0 * n as f64 * f64::EPSILON * (map.alpha().norm() + map.gamma().norm() * schur_a.scale());
    if (0..n).any(|i| shift[(i, i)].norm() <= floor) {
        return Err(Error::SingularShift);
    }
    if let Some(eig) = EigenBasis::from_schur(&schur_a, MAX_EIGEN_CONDITION) {
        return mobius_eigen(sys, map, &eig);
    }
    let num = t * map.delta() - &id * map.beta();
    let mut ft = shift.solve_upper_triangular(&num).ok_or(Error::SingularShift)?;
    for j in 0..n {
        for i in j + 1..n {
            ft[(i, j)] = C64::new(0.0, 0.0);
        }
    }
    let fnorm = norm2_estimate(&ft);
    let schur = SchurForm::from_parts(q.clone(), ft);
    if let Some(bad) = schur.eigenvalues().into_iter().find(|l| l.re >= -1e-12 * fnorm) {
        return Err(Error::UnstableMappedSpectrum(fmt_c(bad)));
    }
    linalg::check_collisions(&schur, fnorm)?;

    let scale = C64::new(map.determinant().norm(), 0.0);
    let bt = shift.solve_upper_triangular(&(q.adjoint() * sys.b())).ok_or(Error::SingularShift)?;
    let ct = shift.adjoint().solve_lower_triangular(&(q.adjoint() * sys.c().adjoint())).ok_or(Error::SingularShift)?;
    let bt = q * bt;
    let ct = q * ct;
    let qc = symmetrize(&(&bt * bt.adjoint() * scale));
    let qo = symmetrize(&(&ct * ct.adjoint() * scale));
    linalg::check_lyapunov_rhs(&schur.t, &qc)?;
    linalg::check_lyapunov_rhs(&schur.t, &qo)?;
    Ok(GramianPair {
        xc: linalg::bartels_stewart(&schur, &qc, false),
        yo: linalg::bartels_stewart(&schur, &qo, true),
        method: GramianMethod::Lyapunov,
        quad_diagnostics: None,
    })
}

/// Closed form in eigen coordinates: with `f = m⁻¹(λ)` and
/// `s = α − γλ`, the Gramian kernel is `|det| / (−(f_j + conj f_k))`.
fn mobius_eigen(sys: &LtiSystem, map: &MobiusMap, eig: &EigenBasis) -> Result<GramianPair> {
    let n = eig.values.len();
    let (alpha, beta, gamma, delta) = (map.alpha(), map.beta(), map.gamma(), map.delta());
    let s: Vec<C64> = eig.values.iter().map(|l| alpha - gamma * l).collect();
    let f: Vec<C64> = eig.values.iter().zip(&s).map(|(l, s)| (delta * l - beta) / s).collect();
    let fnorm = f.iter().fold(0.0f64, |acc, z| acc.max(z.norm()));
    if let Some(bad) = f.iter().find(|l| l.re >= -1e-12 * fnorm) {
        return Err(Error::UnstableMappedSpectrum(fmt_c(*bad)));
    }
    linalg::check_spectrum_collisions(&f, fnorm)?;
    let det = map.determinant().norm();
    let kernel = CMat::from_fn(n, n, |j, k| C64::new(det, 0.0) / -(f[j] + f[k].conj()));
    let mut bw = &eig.v_inv * sys.b();
    let mut cw = eig.v.adjoint() * sys.c().adjoint();
    for j in 0..n {
        let (sb, sc) = (C64::new(1.0, 0.0) / s[j], C64::new(1.0, 0.0) / s[j].conj());
        bw.row_mut(j).iter_mut().for_each(|z| *z *= sb);
        cw.row_mut(j).iter_mut().for_each(|z| *z *= sc);
    }
    let xc = &eig.v * (&bw * bw.adjoint()).component_mul(&kernel) * eig.v.adjoint();
    let yo = eig.v_inv.adjoint() * (&cw * cw.adjoint()).component_mul(&kernel.conjugate()) * &eig.v_inv;
    Ok(GramianPair {
        xc: symmetrize(&xc),
        yo: symmetrize(&yo),
        method: GramianMethod::Lyapunov,
        quad_diagnostics: None,
    })
}

/// Largest eigenvector-basis condition for which quadrature runs in
/// eigen coordinates; beyond it the Schur basis is used.
const MAX_EIGEN_CONDITION: f64 = 1e4;

/// Quadrature route, valid for any map.
///
/// When `A` is diagonalizable with a well-conditioned basis the integrand
/// reduces to the scalar kernel `I_jk = ∫ d_j conj(d_k)` with
/// `d = (ψ(iω) − λ)⁻¹ |ψ′(iω)/2π|^{1/2}`, so each node costs `O(n)`; errors
/// are then controlled in eigen coordinates. Otherwise triangular solves
/// with the Schur factor are used.
pub fn gramians_quadrature(sys: &LtiSystem, map: &ConformalMap, cfg: &QuadratureConfig) -> Result<GramianPair> {
    let schur = SchurForm::new(sys.a())?;
    let weight = |s: C64| -> Result<f64> { Ok((map.deriv(s)?.norm() / (2.0 * PI)).sqrt()) };
    let n = sys.order();
    if let Some(eig) = EigenBasis::from_schur(&schur, MAX_EIGEN_CONDITION) {
        log::debug!("quadrature Gramians in eigen coordinates, condition {:.3e}", eig.condition);
        let beta = &eig.v_inv * sys.b();
        let gamma = eig.v.adjoint() * sys.c().adjoint();
        let mb = &beta * beta.adjoint();
        let mc = &gamma * gamma.adjoint();
        let node = |omega: f64| -> Result<FactorNode> {
            let s = C64::new(0.0, omega);
            let d = eig.resolvent_diagonal(map.eval(s)?, weight(s)?)?;
            let pb = CMat::from_fn(n, beta.ncols(), |i, j| beta[(i, j)] * d[i]);
            let pc = CMat::from_fn(n, gamma.ncols(), |i, j| gamma[(i, j)] * d[i].conj());
            Ok(FactorNode { acc: vec![CMat::from_column_slice(n, 1, d.as_slice())], probe: vec![pb, pc] })
        };
        let norm = |t: &[CMat]| mb.component_mul(&t[0]).norm() + mc.component_mul(&t[0].conjugate()).norm();
        let (totals, diag) = integrate_factored(node, norm, &[n], cfg)?;
        let kernel = &totals[0];
        let xc = &eig.v * mb.component_mul(kernel) * eig.v.adjoint();
        let yo = eig.v_inv.adjoint() * mc.component_mul(&kernel.conjugate()) * &eig.v_inv;
        return Ok(GramianPair {
            xc: symmetrize(&xc),
            yo: symmetrize(&yo),
            method: GramianMethod::Quadrature,
            quad_diagnostics: Some(diag),
        });
    }

    log::debug!("quadrature Gramians in Schur coordinates");
    let qb = schur.q.adjoint() * sys.b();
    let qc = schur.q.adjoint() * sys.c().adjoint();
    let node = |omega: f64| -> Result<FactorNode> {
        let s = C64::new(0.0, omega);
        let z = map.eval(s)?;
        let w = C64::new(weight(s)?, 0.0);
        let mut y = qb.clone();
        schur.solve_shifted(z, &mut y)?;
        let mut x = qc.clone();
        schur.solve_shifted_adjoint(z, &mut x)?;
        let acc = vec![y * w, x * w];
        Ok(FactorNode { probe: acc.clone(), acc })
    };
    let norm = |t: &[CMat]| t.iter().map(|m| m.norm()).sum::<f64>();
    let (blocks, diag) = integrate_factored(node, norm, &[n, n], cfg)?;
    let q = &schur.q;
    let back = |m: &CMat| symmetrize(&(q * m * q.adjoint()));
    Ok(GramianPair {
        xc: back(&blocks[0]),
        yo: back(&blocks[1]),
        method: GramianMethod::Quadrature,
        quad_diagnostics: Some(diag),
    })
}

/// Dispatches on `method`; the Lyapunov route needs a Möbius map.
pub fn gramians(
    sys: &LtiSystem,
    map: &ConformalMap,
    method: GramianMethod,
    cfg: &QuadratureConfig,
) -> Result<GramianPair> {
    match method {
        GramianMethod::Lyapunov => {
            let m = map.as_mobius().ok_or_else(|| {
                Error::MethodUnsupported(format!("the {} map is not Möbius; use quadrature", map.name()))
            })?;
            gramians_mobius(sys, m)
        }
        GramianMethod::Quadrature => gramians_quadrature(sys, map, cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::{BenchmarkKind, BenchmarkSpec};
    use crate::linalg::{c64, hermitian_eigen, lyapunov_residual};
    use crate::maps::JoukowskiMap;

    fn scalar(a: C64, b: C64, c: C64) -> LtiSystem {
        LtiSystem::new(CMat::from_element(1, 1, a), CMat::from_element(1, 1, b), CMat::from_element(1, 1, c)).unwrap()
    }

    fn rel(a: &CMat, b: &CMat) -> f64 {
        (a - b).norm() / b.norm()
    }

    #[test]
    fn identity_scalar_gives_one_half() {
        let sys = scalar(c64(-1.0, 0.0), c64(1.0, 0.0), c64(1.0, 0.0));
        let g = gramians_mobius(&sys, &MobiusMap::identity()).unwrap();
        assert!((g.xc[(0, 0)] - c64(0.5, 0.0)).norm() < 1e-15);
        assert!((g.yo[(0, 0)] - c64(0.5, 0.0)).norm() < 1e-15);
        let q = gramians_quadrature(&sys, &ConformalMap::identity(), &QuadratureConfig::default()).unwrap();
        assert!((q.xc[(0, 0)] - c64(0.5, 0.0)).norm() < 1e-10);
        assert!((q.yo[(0, 0)] - c64(0.5, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn rotation_closed_form() {
        let lam = [c64(0.0, 1.0), c64(0.0, 2.0)];
        let a = CMat::from_diagonal(&nalgebra::DVector::from_vec(lam.to_vec()));
        let b = CMat::from_element(2, 1, c64(1.0, 0.0));
        let c = CMat::from_row_slice(1, 2, &[c64(1.0, 0.0), c64(0.5, -1.0)]);
        let sys = LtiSystem::new(a, b.clone(), c).unwrap();
        let map = MobiusMap::clockwise_rotation();
        let g = gramians_mobius(&sys, &map).unwrap();
        let i = c64(0.0, 1.0);
        for j in 0..2 {
            for k in 0..2 {
                let expect = b[(j, 0)] * b[(k, 0)].conj() / (-(i * lam[j]) - (i * lam[k]).conj());
                assert!((g.xc[(j, k)] - expect).norm() < 1e-14, "{j}{k}");
            }
        }
        let q = gramians_quadrature(&sys, &ConformalMap::from(map), &QuadratureConfig::default()).unwrap();
        assert!(rel(&q.xc, &g.xc) < 1e-8);
        assert!(rel(&q.yo, &g.yo) < 1e-8);
    }

    #[test]
    fn lyapunov_residuals() {
        let sys = BenchmarkSpec::new(BenchmarkKind::Heat, 50).unwrap().build().unwrap();
        let map = MobiusMap::disk(c64(-1e4, 0.0), 1e4).unwrap();
        let g = gramians_mobius(&sys, &map).unwrap();
        let f = map.inverse_matrix(sys.a()).unwrap();
        let bt = map.shifted_solve(sys.a(), sys.b()).unwrap();
        let qc = &bt * bt.adjoint() * c64(map.determinant().norm(), 0.0);
        assert!(lyapunov_residual(&f, &g.xc, &qc) < 1e-10);
        let ct = map.shifted_solve_adjoint(sys.a(), &sys.c().adjoint()).unwrap();
        let qo = &ct * ct.adjoint() * c64(map.determinant().norm(), 0.0);
        assert!(lyapunov_residual(&f.adjoint(), &g.yo, &qo) < 1e-10);
    }

    // Repeated eigenvalues rule out the eigen-coordinate path.
    #[test]
    fn defective_matrix_residuals() {
        let a = CMat::from_row_slice(
            3,
            3,
            &[
                c64(-2.0, 1.0),
                c64(1.0, 0.0),
                c64(0.5, -0.3),
                c64(0.0, 0.0),
                c64(-2.0, 1.0),
                c64(1.0, 0.0),
                c64(0.0, 0.0),
                c64(0.0, 0.0),
                c64(-2.0, 1.0),
            ],
        );
        let b = CMat::from_row_slice(3, 1, &[c64(0.3, 0.1), c64(-0.2, 0.0), c64(1.0, 0.0)]);
        let c = CMat::from_row_slice(1, 3, &[c64(1.0, 0.0), c64(0.0, 0.5), c64(-0.4, 0.0)]);
        let sys = LtiSystem::new(a, b, c).unwrap();
        assert!(EigenBasis::from_schur(&SchurForm::new(sys.a()).unwrap(), MAX_EIGEN_CONDITION).is_none());
        let map = MobiusMap::disk(c64(-3.0, 1.0), 2.5).unwrap();
        let g = gramians_mobius(&sys, &map).unwrap();
        let f = map.inverse_matrix(sys.a()).unwrap();
        let det = c64(map.determinant().norm(), 0.0);
        let bt = map.shifted_solve(sys.a(), sys.b()).unwrap();
        assert!(lyapunov_residual(&f, &g.xc, &(&bt * bt.adjoint() * det)) < 1e-12);
        let ct = map.shifted_solve_adjoint(sys.a(), &sys.c().adjoint()).unwrap();
        assert!(lyapunov_residual(&f.adjoint(), &g.yo, &(&ct * ct.adjoint() * det)) < 1e-12);
    }

    #[test]
    fn heat_methods_agree() {
        let sys = BenchmarkSpec::new(BenchmarkKind::Heat, 50).unwrap().build().unwrap();
        let radius = 1.2 * sys.poles().unwrap().iter().map(|p| p.norm()).fold(0.0, f64::max) / 2.0;
        let map = MobiusMap::disk(c64(-radius, 0.0), radius).unwrap();
        let l = gramians_mobius(&sys, &map).unwrap();
        let q = gramians_quadrature(&sys, &ConformalMap::from(map), &QuadratureConfig::default()).unwrap();
        assert!(rel(&q.xc, &l.xc) < 1e-6, "{}", rel(&q.xc, &l.xc));
        assert!(rel(&q.yo, &l.yo) < 1e-6, "{}", rel(&q.yo, &l.yo));
    }

    // The adjoint system has conjugated poles, so the dual identity needs a
    // contour symmetric under conjugation.
    #[test]
    fn duality() {
        let sys = BenchmarkSpec::new(BenchmarkKind::Heat, 20).unwrap().build().unwrap();
        let map = MobiusMap::disk(c64(-1000.0, 0.0), 1000.0).unwrap();
        let g = gramians_mobius(&sys, &map).unwrap();
        let d = gramians_mobius(&sys.adjoint(), &map).unwrap();
        assert!(rel(&d.xc, &g.yo) < 1e-12);
        let cfg = QuadratureConfig::default();
        let gq = gramians_quadrature(&sys, &map.into(), &cfg).unwrap();
        let dq = gramians_quadrature(&sys.adjoint(), &map.into(), &cfg).unwrap();
        assert!(rel(&dq.xc, &gq.yo) < 1e-7);
    }

    #[test]
    fn conjugated_problem_for_rotation() {
        // Yo(A, B, C; ψ) = Xc(A*, C*, B*; conj ψ) with conj ψ(s) = is.
        let sys = BenchmarkSpec::new(BenchmarkKind::Schrodinger, 20).unwrap().build().unwrap();
        let g = gramians_mobius(&sys, &MobiusMap::clockwise_rotation()).unwrap();
        let anticlockwise = MobiusMap::new(c64(0.0, 1.0), c64(0.0, 0.0), c64(0.0, 0.0), c64(1.0, 0.0)).unwrap();
        let d = gramians_mobius(&sys.adjoint(), &anticlockwise).unwrap();
        assert!(rel(&d.xc, &g.yo) < 1e-12);
    }

    #[test]
    fn joukowski_gramians_are_psd() {
        let sys = BenchmarkSpec::new(BenchmarkKind::Wave, 40).unwrap().build().unwrap();
        let wmax = sys.poles().unwrap().iter().map(|p| p.im.abs()).fold(0.0, f64::max);
        let map = JoukowskiMap::new(c64(1e-6, 0.0), c64(0.0, 1.1 * wmax), 1.0 + 1e-2).unwrap();
        let g = gramians_quadrature(&sys, &map.into(), &QuadratureConfig::default()).unwrap();
        for p in [&g.xc, &g.yo] {
            let (ev, _) = hermitian_eigen(p).unwrap();
            let max = ev.iter().cloned().fold(f64::MIN, f64::max);
            let min = ev.iter().cloned().fold(f64::MAX, f64::min);
            assert!(max > 0.0 && min >= -1e-10 * max, "{min} {max}");
        }
    }

    #[test]
    fn schur_fallback_for_defective_matrix() {
        let mut a = CMat::identity(3, 3) * c64(-1.0, 0.0);
        a[(0, 1)] = c64(1.0, 0.0);
        a[(1, 2)] = c64(1.0, 0.0);
        let b = CMat::from_column_slice(3, 1, &[c64(0.0, 0.0), c64(0.5, 0.0), c64(1.0, 0.0)]);
        let c = CMat::from_row_slice(1, 3, &[c64(1.0, 0.0), c64(0.0, 1.0), c64(0.0, 0.0)]);
        let sys = LtiSystem::new(a, b, c).unwrap();
        let l = gramians_mobius(&sys, &MobiusMap::identity()).unwrap();
        let q = gramians_quadrature(&sys, &ConformalMap::identity(), &QuadratureConfig::default()).unwrap();
        assert!(rel(&q.xc, &l.xc) < 1e-7);
        assert!(rel(&q.yo, &l.yo) < 1e-7);
    }

    #[test]
    fn unstable_mapped_spectrum_rejected() {
        let sys = scalar(c64(1.0, 0.0), c64(1.0, 0.0), c64(1.0, 0.0));
        assert!(matches!(gramians_mobius(&sys, &MobiusMap::identity()), Err(Error::UnstableMappedSpectrum(_))));
    }

    #[test]
    fn joukowski_needs_quadrature() {
        let sys = scalar(c64(-1.0, 0.0), c64(1.0, 0.0), c64(1.0, 0.0));
        let map = ConformalMap::from(JoukowskiMap::new(c64(0.0, 0.0), c64(2.0, 0.0), 2.0).unwrap());
        let r = gramians(&sys, &map, GramianMethod::Lyapunov, &QuadratureConfig::default());
        assert!(matches!(r, Err(Error::MethodUnsupported(_))));
    }
}
