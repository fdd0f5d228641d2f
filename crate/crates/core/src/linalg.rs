//! Dense complex kernels: Bartels–Stewart Lyapunov solver on the complex
//! Schur form, Hermitian square-root factors, and the shifted triangular
//! solves used for bulk resolvent evaluation.
//!
//! Schur, SVD and Hermitian eigendecompositions are delegated to `nalgebra`.

use nalgebra::{Complex, DMatrix, DVector, Schur, SymmetricEigen};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

const MAX_QR_ITERATIONS: usize = 1_000_000;

#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub(crate) fn fmt_c(z: C64) -> String {
    format!("{:.6e}{:+.6e}i", z.re, z.im)
}

pub fn is_finite(m: &CMat) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

pub fn ensure_finite(m: &CMat, what: &'static str) -> Result<()> {
    if is_finite(m) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// `‖M − M*‖_F`.
pub fn hermitian_defect(m: &CMat) -> f64 {
    (m - m.adjoint()).norm()
}

/// `(M + M*) / 2`; the result is exactly Hermitian.
pub fn symmetrize(m: &CMat) -> CMat {
    let n = m.nrows();
    let mut out = m.clone();
    for j in 0..n {
        out[(j, j)] = c64(m[(j, j)].re, 0.0);
        for i in j + 1..n {
            let v = (m[(i, j)] + m[(j, i)].conj()) * 0.5;
            out[(i, j)] = v;
            out[(j, i)] = v.conj();
        }
    }
    out
}

/// Spectral norm estimate by power iteration on `M* M`.
///
/// Converges from below; 60 iterations are ample for the tolerance checks it
/// feeds (they are all relative to `‖F‖₂` with slack of several digits).
pub fn norm2_estimate(m: &CMat) -> f64 {
    let cols = m.ncols();
    if cols == 0 || m.nrows() == 0 {
        return 0.0;
    }
    let mut v = CVec::from_fn(cols, |i, _| c64(1.0 + 0.1 * (i as f64 * 0.7).sin(), 0.05 * (i as f64 * 1.3).cos()));
    let mut sigma = 0.0;
    for _ in 0..60 {
        let nv = v.norm();
        if nv == 0.0 {
            return m.norm();
        }
        v /= c64(nv, 0.0);
        let w = m * &v;
        sigma = w.norm();
        v = m.ad_mul(&w);
    }
    sigma
}

/// Complex Schur form `A = Q T Q*` with `T` upper triangular.
#[derive(Debug, Clone)]
pub struct SchurForm {
    pub q: CMat,
    pub t: CMat,
    scale: f64,
}

impl SchurForm {
    pub fn new(a: &CMat) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "Schur form needs a square matrix, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        ensure_finite(a, "Schur input")?;
        let schur = Schur::try_new(a.clone(), f64::EPSILON, MAX_QR_ITERATIONS)
            .ok_or(Error::DecompositionFailed("complex Schur"))?;
        let (q, mut t) = schur.unpack();
        // Entries below the diagonal are zero up to rounding; make it exact.
        for j in 0..t.ncols() {
            for i in j + 1..t.nrows() {
                t[(i, j)] = C64::new(0.0, 0.0);
            }
        }
        let scale = t.iter().fold(0.0f64, |acc, z| acc.max(z.norm()));
        Ok(SchurForm { q, t, scale })
    }

    /// Wraps a known unitary `q` and upper triangular `t`.
    pub(crate) fn from_parts(q: CMat, t: CMat) -> Self {
        let scale = t.iter().fold(0.0f64, |acc, z| acc.max(z.norm()));
        SchurForm { q, t, scale }
    }

    pub fn dim(&self) -> usize {
        self.t.nrows()
    }

    pub fn eigenvalues(&self) -> Vec<C64> {
        (0..self.dim()).map(|i| self.t[(i, i)]).collect()
    }

    /// Scale used to judge singularity of `zI − T`.
    /// Largest entry modulus of `T`.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Solves `(zI − T) Y = R` in place.
    pub fn solve_shifted(&self, z: C64, rhs: &mut CMat) -> Result<()> {
        let n = self.dim();
        let tiny = singular_floor(n, z, self.scale());
        let t = self.t.as_slice();
        for col in 0..rhs.ncols() {
            let y = &mut rhs.as_mut_slice()[col * n..(col + 1) * n];
            for j in (0..n).rev() {
                let tcol = &t[j * n..j * n + j + 1];
                let d = z - tcol[j];
                if d.norm() <= tiny {
                    return Err(Error::ResolventSingular(fmt_c(z)));
                }
                let yj = y[j] / d;
                y[j] = yj;
                if yj == C64::new(0.0, 0.0) {
                    continue;
                }
                // (zI − T)_{ij} = −T_{ij} for i < j
                for (yi, tij) in y[..j].iter_mut().zip(&tcol[..j]) {
                    *yi += tij * yj;
                }
            }
        }
        Ok(())
    }

    /// Solves `(zI − T)* Y = R` in place.
    pub fn solve_shifted_adjoint(&self, z: C64, rhs: &mut CMat) -> Result<()> {
        let n = self.dim();
        let tiny = singular_floor(n, z, self.scale());
        let zc = z.conj();
        let t = self.t.as_slice();
        for col in 0..rhs.ncols() {
            let y = &mut rhs.as_mut_slice()[col * n..(col + 1) * n];
            for i in 0..n {
                // row i of (zI − T)* is conj(z − T_ii) on the diagonal and
                // −conj(T_ji) for j < i
                let tcol = &t[i * n..i * n + i + 1];
                let mut acc = y[i];
                for (tji, yj) in tcol[..i].iter().zip(&y[..i]) {
                    acc += tji.conj() * yj;
                }
                let d = zc - tcol[i].conj();
                if d.norm() <= tiny {
                    return Err(Error::ResolventSingular(fmt_c(z)));
                }
                y[i] = acc / d;
            }
        }
        Ok(())
    }
}

/// Diagonalization `A = V Λ V⁻¹` with unit-norm columns of `V`.
#[derive(Debug, Clone)]
pub struct EigenBasis {
    pub values: Vec<C64>,
    pub v: CMat,
    pub v_inv: CMat,
    /// Estimate of `‖V‖₂ ‖V⁻¹‖₂`.
    pub condition: f64,
    scale: f64,
}

impl EigenBasis {
    /// Eigenvectors of `T` by back substitution, mapped through `Q`.
    /// `None` when eigenvalues nearly coincide or the basis condition
    /// exceeds `max_condition`.
    pub fn from_schur(schur: &SchurForm, max_condition: f64) -> Option<Self> {
        let n = schur.dim();
        let t = &schur.t;
        let scale = schur.scale();
        let floor = (n as f64) * f64::EPSILON * scale.max(f64::MIN_POSITIVE);
        let mut x = CMat::zeros(n, n);
        for k in 0..n {
            let lk = t[(k, k)];
            x[(k, k)] = C64::new(1.0, 0.0);
            for i in (0..k).rev() {
                let mut s = C64::new(0.0, 0.0);
                for j in i + 1..=k {
                    s += t[(i, j)] * x[(j, k)];
                }
                let den = t[(i, i)] - lk;
                if den.norm() <= floor {
                    return None;
                }
                x[(i, k)] = -s / den;
            }
            let nrm = x.column(k).norm();
            if !nrm.is_finite() {
                return None;
            }
            x.column_mut(k).unscale_mut(nrm);
        }
        let x_inv = x.clone().solve_upper_triangular(&CMat::identity(n, n))?;
        let condition = norm2_estimate(&x) * norm2_estimate(&x_inv);
        if !(condition <= max_condition) {
            return None;
        }
        Some(EigenBasis {
            values: schur.eigenvalues(),
            v: &schur.q * x,
            v_inv: x_inv * schur.q.adjoint(),
            condition,
            scale,
        })
    }

    /// `w (zI − Λ)⁻¹` as a vector.
    pub fn resolvent_diagonal(&self, z: C64, w: f64) -> Result<CVec> {
        let tiny = singular_floor(self.values.len(), z, self.scale);
        let mut d = CVec::zeros(self.values.len());
        for (j, l) in self.values.iter().enumerate() {
            let den = z - l;
            if den.norm() <= tiny {
                return Err(Error::ResolventSingular(fmt_c(z)));
            }
            d[j] = C64::new(w, 0.0) / den;
        }
        Ok(d)
    }
}

fn singular_floor(n: usize, z: C64, scale: f64) -> f64 {
    (n.max(1) as f64) * f64::EPSILON * (z.norm() + scale)
}

/// Solves `M X = B` by partial-pivot LU, rejecting numerically singular `M`.
pub fn lu_solve(m: &CMat, b: &CMat) -> Option<CMat> {
    let n = m.nrows();
    let lu = m.clone().lu();
    let u = lu.u();
    let mut dmax = 0.0f64;
    let mut dmin = f64::INFINITY;
    for i in 0..n {
        let d = u[(i, i)].norm();
        dmax = dmax.max(d);
        dmin = dmin.min(d);
    }
    if n > 0 && !(dmin > (n as f64) * f64::EPSILON * dmax) {
        return None;
    }
    lu.solve(b)
}

/// Solves `F P + P F* = −Q` for Hermitian `Q` (Bartels–Stewart on the
/// complex Schur form of `F`).
///
/// A unique solution exists iff `F` and `−F*` share no eigenvalue; a pair
/// `λ_i + conj(λ_j)` below `1e-12·‖F‖₂` is reported as
/// [`Error::SpectrumCollision`]. The returned `P` is exactly Hermitian.
pub fn solve_lyapunov(f: &CMat, q: &CMat) -> Result<CMat> {
    check_lyapunov_rhs(f, q)?;
    let schur = lyapunov_schur(f)?;
    Ok(bartels_stewart(&schur, q, false))
}

/// Solves `F X + X F* = −Qc` and `Y F + F* Y = −Qo` sharing one Schur form.
pub fn solve_lyapunov_pair(f: &CMat, qc: &CMat, qo: &CMat) -> Result<(CMat, CMat)> {
    check_lyapunov_rhs(f, qc)?;
    check_lyapunov_rhs(f, qo)?;
    let schur = lyapunov_schur(f)?;
    Ok((bartels_stewart(&schur, qc, false), bartels_stewart(&schur, qo, true)))
}

pub(crate) fn check_lyapunov_rhs(f: &CMat, q: &CMat) -> Result<()> {
    let n = f.nrows();
    if !f.is_square() || q.nrows() != n || q.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "Lyapunov: F is {}x{}, Q is {}x{}",
            f.nrows(),
            f.ncols(),
            q.nrows(),
            q.ncols()
        )));
    }
    ensure_finite(f, "Lyapunov coefficient")?;
    ensure_finite(q, "Lyapunov right-hand side")?;
    let qn = q.norm();
    let defect = hermitian_defect(q);
    if defect > 1e-12 * qn {
        return Err(Error::NonHermitianRhs(if qn > 0.0 { defect / qn } else { defect }));
    }
    Ok(())
}

fn lyapunov_schur(f: &CMat) -> Result<SchurForm> {
    let schur = SchurForm::new(f)?;
    check_collisions(&schur, norm2_estimate(f))?;
    Ok(schur)
}

/// Rejects `λi + conj(λj) ≈ 0`, which makes the Lyapunov operator singular.
pub(crate) fn check_collisions(schur: &SchurForm, fnorm: f64) -> Result<()> {
    check_spectrum_collisions(&schur.eigenvalues(), fnorm)
}

pub(crate) fn check_spectrum_collisions(lambdas: &[C64], fnorm: f64) -> Result<()> {
    let floor = 1e-12 * fnorm;
    for li in lambdas {
        for lj in lambdas {
            if fnorm == 0.0 || (li + lj.conj()).norm() < floor {
                return Err(Error::SpectrumCollision(fmt_c(*li), fmt_c(-lj.conj())));
            }
        }
    }
    Ok(())
}

/// Column-wise substitution on the Schur form. `adjoint` selects
/// `Y F + F* Y = −Q` instead of `F X + X F* = −Q`.
pub(crate) fn bartels_stewart(schur: &SchurForm, q: &CMat, adjoint: bool) -> CMat {
    let n = schur.dim();
    let t = &schur.t;
    let uq = &schur.q;
    let qt = uq.adjoint() * q * uq;
    let mut p = CMat::zeros(n, n);
    let mut rhs = CVec::zeros(n);
    let zero = C64::new(0.0, 0.0);
    let order: Vec<usize> = if adjoint { (0..n).collect() } else { (0..n).rev().collect() };
    for &j in &order {
        for i in 0..n {
            rhs[i] = -qt[(i, j)];
        }
        let coupled = if adjoint { 0..j } else { j + 1..n };
        for k in coupled {
            let c = if adjoint { t[(k, j)] } else { t[(j, k)].conj() };
            if c == zero {
                continue;
            }
            for i in 0..n {
                rhs[i] -= c * p[(i, k)];
            }
        }
        if adjoint {
            // (T* + T_jj I) y = rhs, lower triangular
            let shift = t[(j, j)];
            for i in 0..n {
                let mut acc = rhs[i];
                for k in 0..i {
                    acc -= t[(k, i)].conj() * p[(k, j)];
                }
                p[(i, j)] = acc / (t[(i, i)].conj() + shift);
            }
        } else {
            // (T + conj(T_jj) I) x = rhs, upper triangular
            let shift = t[(j, j)].conj();
            for i in (0..n).rev() {
                let mut acc = rhs[i];
                for k in i + 1..n {
                    acc -= t[(i, k)] * p[(k, j)];
                }
                p[(i, j)] = acc / (t[(i, i)] + shift);
            }
        }
    }
    let p = uq * p * uq.adjoint();
    symmetrize(&p)
}

/// Relative residual `‖F P + P F* + Q‖_F / (2‖F‖₂‖P‖_F + ‖Q‖_F)`.
pub fn lyapunov_residual(f: &CMat, p: &CMat, q: &CMat) -> f64 {
    let r = f * p + p * f.adjoint() + q;
    let denom = 2.0 * norm2_estimate(f) * p.norm() + q.norm();
    if denom == 0.0 {
        r.norm()
    } else {
        r.norm() / denom
    }
}

/// Eigenpairs of the symmetrized input, in no particular order.
pub fn hermitian_eigen(p: &CMat) -> Result<(Vec<f64>, CMat)> {
    let sym = symmetrize(p);
    let eig = SymmetricEigen::try_new(sym, f64::EPSILON, MAX_QR_ITERATIONS)
        .ok_or(Error::DecompositionFailed("Hermitian eigendecomposition"))?;
    Ok((eig.eigenvalues.iter().copied().collect(), eig.eigenvectors))
}

/// Square-root factor `U` (n×k) with `U U* ≈ P`, where eigenvalues of `P`
/// below `clip_tol·λ_max` are dropped. Fails with
/// [`Error::IndefiniteMatrix`] if `λ_min < −clip_tol·λ_max`.
pub fn hermitian_sqrt_factor(p: &CMat, clip_tol: f64) -> Result<CMat> {
    hermitian_sqrt_factor_with(p, clip_tol, clip_tol)
}

/// As [`hermitian_sqrt_factor`], with the indefiniteness threshold decoupled
/// from the clipping threshold. Gramians obtained from ill-conditioned
/// Lyapunov equations carry negative eigenvalues well above `n·ε·λ_max`
/// while still being PSD to their own accuracy.
pub fn hermitian_sqrt_factor_with(p: &CMat, clip_tol: f64, indefinite_tol: f64) -> Result<CMat> {
    let n = p.nrows();
    if !p.is_square() {
        return Err(Error::DimensionMismatch(format!("square-root factor of a {}x{} matrix", p.nrows(), p.ncols())));
    }
    if !(clip_tol >= 0.0) || !(indefinite_tol >= 0.0) {
        return Err(Error::InvalidArgument("clip tolerance must be nonnegative".into()));
    }
    ensure_finite(p, "square-root factor input")?;
    let pn = p.norm();
    let defect = hermitian_defect(p);
    if defect > 1e-12 * pn {
        return Err(Error::NonHermitianRhs(defect / pn));
    }
    if n == 0 || pn == 0.0 {
        return Ok(CMat::zeros(n, 0));
    }
    let (vals, vecs) = hermitian_eigen(p)?;
    let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    if max <= 0.0 || min < -indefinite_tol * max {
        return Err(Error::IndefiniteMatrix { min, max });
    }
    let cut = clip_tol * max;
    let mut order: Vec<usize> = (0..n).filter(|&i| vals[i] > cut).collect();
    order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]).then(a.cmp(&b)));
    let mut u = CMat::zeros(n, order.len());
    for (col, &i) in order.iter().enumerate() {
        let s = vals[i].sqrt();
        for r in 0..n {
            u[(r, col)] = vecs[(r, i)] * s;
        }
    }
    Ok(u)
}

/// Default clipping tolerance for square-root factors: `n·ε`.
pub fn default_clip_tol(n: usize) -> f64 {
    (n.max(1) as f64) * f64::EPSILON
}

/// Eigenvalues of a general square matrix (diagonal of its Schur form).
pub fn eigenvalues(a: &CMat) -> Result<Vec<C64>> {
    if a.nrows() == 0 {
        return Ok(Vec::new());
    }
    Ok(SchurForm::new(a)?.eigenvalues())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> CMat {
        CMat::from_fn(r, c, |_, _| c64(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
    }

    #[test]
    fn scalar_lyapunov() {
        let f = CMat::from_element(1, 1, c64(-1.0, 0.0));
        let q = CMat::from_element(1, 1, c64(2.0, 0.0));
        let p = solve_lyapunov(&f, &q).unwrap();
        assert!((p[(0, 0)] - c64(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn decoupled_lyapunov() {
        let f = CMat::from_diagonal(&CVec::from_vec(vec![c64(-1.0, 0.0), c64(-2.0, 0.0)]));
        let q = CMat::identity(2, 2);
        let p = solve_lyapunov(&f, &q).unwrap();
        assert!((p[(0, 0)].re - 0.5).abs() < 1e-15);
        assert!((p[(1, 1)].re - 0.25).abs() < 1e-15);
        assert!(p[(0, 1)].norm() < 1e-15);
    }

    #[test]
    fn lyapunov_rejects_collision() {
        // λ = i gives λ + conj(λ) = 0
        let f = CMat::from_diagonal(&CVec::from_vec(vec![c64(0.0, 1.0), c64(-2.0, 0.0)]));
        let q = CMat::identity(2, 2);
        assert!(matches!(solve_lyapunov(&f, &q), Err(Error::SpectrumCollision(..))));
    }

    #[test]
    fn lyapunov_rejects_non_hermitian_rhs() {
        let f = CMat::from_element(2, 2, c64(-1.0, 0.0)) - CMat::identity(2, 2) * c64(2.0, 0.0);
        let mut q = CMat::identity(2, 2);
        q[(0, 1)] = c64(1.0, 0.0);
        assert!(matches!(solve_lyapunov(&f, &q), Err(Error::NonHermitianRhs(_))));
    }

    #[test]
    fn lyapunov_handles_jordan_block() {
        let mut f = CMat::identity(5, 5) * c64(-1.0, 0.5);
        for i in 0..4 {
            f[(i, i + 1)] = c64(1.0, 0.0);
        }
        let b = CMat::from_element(5, 1, c64(1.0, 0.0));
        let q = &b * b.adjoint();
        let p = solve_lyapunov(&f, &q).unwrap();
        assert!(lyapunov_residual(&f, &p, &q) < 1e-13);
    }

    #[test]
    fn lyapunov_residual_random_stable() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [3usize, 8, 20, 41] {
            let mut f = random_matrix(&mut rng, n, n);
            let shift = eigenvalues(&f).unwrap().iter().map(|l| l.re).fold(f64::MIN, f64::max);
            for i in 0..n {
                f[(i, i)] -= c64(shift + 0.1, 0.0);
            }
            let r = random_matrix(&mut rng, n, 2);
            let q = &r * r.adjoint();
            let q = symmetrize(&q);
            let p = solve_lyapunov(&f, &q).unwrap();
            assert_eq!(hermitian_defect(&p), 0.0);
            assert!(lyapunov_residual(&f, &p, &q) < 1e-10, "n={n}");
            let (vals, _) = hermitian_eigen(&p).unwrap();
            let max = vals.iter().copied().fold(f64::MIN, f64::max);
            let min = vals.iter().copied().fold(f64::MAX, f64::min);
            assert!(min >= -1e-10 * max);
        }
    }

    #[test]
    fn eigen_basis_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_matrix(&mut rng, 12, 12);
        let schur = SchurForm::new(&a).unwrap();
        let e = EigenBasis::from_schur(&schur, 1e8).unwrap();
        let lam = CMat::from_diagonal(&CVec::from_vec(e.values.clone()));
        assert!((&e.v * lam * &e.v_inv - &a).norm() < 1e-12 * a.norm());
        assert!((&e.v * &e.v_inv - CMat::identity(12, 12)).norm() < 1e-12);
        for j in 0..12 {
            assert!((e.v.column(j).norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn eigen_basis_rejects_jordan_block() {
        let mut a = CMat::identity(3, 3) * c64(-1.0, 0.0);
        a[(0, 1)] = c64(1.0, 0.0);
        a[(1, 2)] = c64(1.0, 0.0);
        let schur = SchurForm::new(&a).unwrap();
        assert!(EigenBasis::from_schur(&schur, 1e8).is_none());
    }

    #[test]
    fn lyapunov_pair_matches_separate_solves() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 9;
        let f = random_matrix(&mut rng, n, n) - CMat::identity(n, n) * c64(4.0, 0.0);
        let b = random_matrix(&mut rng, n, 2);
        let c = random_matrix(&mut rng, 3, n);
        let qc = &b * b.adjoint();
        let qo = c.adjoint() * &c;
        let (x, y) = solve_lyapunov_pair(&f, &qc, &qo).unwrap();
        let y2 = solve_lyapunov(&f.adjoint(), &qo).unwrap();
        assert!(lyapunov_residual(&f, &x, &qc) < 1e-13);
        assert!((&y - &y2).norm() < 1e-12 * y2.norm());
    }

    #[test]
    fn sqrt_factor_identity_and_diagonal() {
        let u = hermitian_sqrt_factor(&CMat::identity(3, 3), default_clip_tol(3)).unwrap();
        assert!((&u * u.adjoint() - CMat::identity(3, 3)).norm() < 1e-14);
        let p = CMat::from_diagonal(&CVec::from_vec(vec![c64(4.0, 0.0), c64(1.0, 0.0)]));
        let u = hermitian_sqrt_factor(&p, default_clip_tol(2)).unwrap();
        assert!((&u * u.adjoint() - &p).norm() < 1e-14);
    }

    #[test]
    fn sqrt_factor_low_rank_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let r = random_matrix(&mut rng, 6, 3);
        let p = symmetrize(&(&r * r.adjoint()));
        let u = hermitian_sqrt_factor(&p, default_clip_tol(6)).unwrap();
        assert_eq!(u.ncols(), 3);
        assert!((&u * u.adjoint() - &p).norm() <= 1e-12 * p.norm());
    }

    #[test]
    fn sqrt_factor_rejects_indefinite() {
        let p = CMat::from_diagonal(&CVec::from_vec(vec![c64(1.0, 0.0), c64(-0.5, 0.0)]));
        assert!(matches!(hermitian_sqrt_factor(&p, 1e-12), Err(Error::IndefiniteMatrix { .. })));
    }

    #[test]
    fn shifted_triangular_solves_match_lu() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_matrix(&mut rng, 12, 12);
        let b = random_matrix(&mut rng, 12, 2);
        let s = SchurForm::new(&a).unwrap();
        let z = c64(0.3, 2.5);
        let mut y = s.q.adjoint() * &b;
        s.solve_shifted(z, &mut y).unwrap();
        let x = &s.q * y;
        let m = CMat::identity(12, 12) * z - &a;
        let x_ref = lu_solve(&m, &b).unwrap();
        assert!((&x - &x_ref).norm() < 1e-11 * x_ref.norm());

        let mut y = s.q.adjoint() * &b;
        s.solve_shifted_adjoint(z, &mut y).unwrap();
        let x = &s.q * y;
        let x_ref = lu_solve(&m.adjoint(), &b).unwrap();
        assert!((&x - &x_ref).norm() < 1e-11 * x_ref.norm());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn lyapunov_solution_is_hermitian_psd(seed in any::<u64>(), n in 1usize..10) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut f = random_matrix(&mut rng, n, n);
            let shift = eigenvalues(&f).unwrap().iter().map(|l| l.re).fold(f64::MIN, f64::max);
            for i in 0..n {
                f[(i, i)] -= c64(shift + 0.05, 0.0);
            }
            let r = random_matrix(&mut rng, n, 2);
            let q = symmetrize(&(&r * r.adjoint()));
            let p = solve_lyapunov(&f, &q).unwrap();
            prop_assert_eq!(hermitian_defect(&p), 0.0);
            let (vals, _) = hermitian_eigen(&p).unwrap();
            let max = vals.iter().copied().fold(f64::MIN, f64::max);
            let min = vals.iter().copied().fold(f64::MAX, f64::min);
            prop_assert!(min >= -1e-10 * max, "{min} vs {max}");
        }
    }
}
