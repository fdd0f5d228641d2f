//! Conformal balanced truncation by the square-root method.

use nalgebra::SVD;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gramians::{gramians, GramianMethod, GramianPair};
use crate::linalg::{default_clip_tol, hermitian_sqrt_factor_with, CMat, C64};
use crate::maps::{ConformalMap, MobiusMap};
use crate::quadrature::QuadratureConfig;
use crate::system::LtiSystem;

/// Negative Gramian eigenvalues tolerated before factoring fails.
pub const GRAMIAN_INDEFINITE_TOL: f64 = 1e-10;

/// Relative gap `σ_r − σ_{r+1}` required between kept and discarded values.
pub const GAP_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TieHandling {
    /// Fail with [`Error::SingularValueTie`].
    Reject,
    /// Log a warning and truncate anyway.
    Allow,
}

#[derive(Debug, Clone)]
pub struct ReductionResult {
    pub rom: LtiSystem,
    pub vr: CMat,
    pub wr: CMat,
    pub hsv: Vec<f64>,
    pub r: usize,
    pub method: GramianMethod,
}

/// Balanced system `(Ab, Bb, Cb)` whose Gramians both equal `diag(sigma)`.
#[derive(Debug, Clone)]
pub struct BalancedRealization {
    pub a: CMat,
    pub b: CMat,
    pub c: CMat,
    pub sigma: Vec<f64>,
}

/// Blocks of a balanced realization split after the first `r` states.
#[derive(Debug, Clone)]
pub struct Partition {
    pub a11: CMat,
    pub a12: CMat,
    pub a21: CMat,
    pub a22: CMat,
    pub b1: CMat,
    pub b2: CMat,
    pub c1: CMat,
    pub c2: CMat,
    pub sigma1: Vec<f64>,
    pub sigma2: Vec<f64>,
}

impl BalancedRealization {
    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    pub fn system(&self) -> Result<LtiSystem> {
        LtiSystem::new(self.a.clone(), self.b.clone(), self.c.clone())
    }

    pub fn partition(&self, r: usize) -> Result<Partition> {
        let n = self.order();
        if r == 0 || r > n {
            return Err(Error::InvalidArgument(format!("partition size {r} outside 1..={n}")));
        }
        let k = n - r;
        Ok(Partition {
            a11: self.a.view((0, 0), (r, r)).into_owned(),
            a12: self.a.view((0, r), (r, k)).into_owned(),
            a21: self.a.view((r, 0), (k, r)).into_owned(),
            a22: self.a.view((r, r), (k, k)).into_owned(),
            b1: self.b.rows(0, r).into_owned(),
            b2: self.b.rows(r, k).into_owned(),
            c1: self.c.columns(0, r).into_owned(),
            c2: self.c.columns(r, k).into_owned(),
            sigma1: self.sigma[..r].to_vec(),
            sigma2: self.sigma[r..].to_vec(),
        })
    }
}

/// Square-root factors and the SVD of `U* L`.
struct SquareRoot {
    u: CMat,
    l: CMat,
    z: CMat,
    y: CMat,
    sigma: Vec<f64>,
}

fn square_root(grams: &GramianPair) -> Result<SquareRoot> {
    let n = grams.xc.nrows();
    let clip = default_clip_tol(n);
    let u = hermitian_sqrt_factor_with(&grams.xc, clip, GRAMIAN_INDEFINITE_TOL)?;
    let l = hermitian_sqrt_factor_with(&grams.yo, clip, GRAMIAN_INDEFINITE_TOL)?;
    if u.ncols() == 0 || l.ncols() == 0 {
        return Ok(SquareRoot { u, l, z: CMat::zeros(0, 0), y: CMat::zeros(0, 0), sigma: Vec::new() });
    }
    let m = u.ad_mul(&l);
    let svd = SVD::try_new(m, true, true, f64::EPSILON, 0).ok_or(Error::DecompositionFailed("SVD of U*L"))?;
    let z = svd.u.ok_or(Error::DecompositionFailed("SVD left vectors"))?;
    let y = svd.v_t.ok_or(Error::DecompositionFailed("SVD right vectors"))?.adjoint();
    let sigma = svd.singular_values.iter().copied().collect();
    Ok(SquareRoot { u, l, z, y, sigma })
}

/// Number of singular values above `n·ε·σ₁`.
fn numerical_rank(sigma: &[f64], n: usize) -> usize {
    let cut = default_clip_tol(n) * sigma.first().copied().unwrap_or(0.0);
    sigma.iter().take_while(|&&s| s > cut).count()
}

/// Projection bases `(V, W)` keeping the leading `k` directions.
fn bases(sr: &SquareRoot, k: usize) -> (CMat, CMat) {
    let scale: Vec<C64> = sr.sigma[..k].iter().map(|s| C64::new(1.0 / s.sqrt(), 0.0)).collect();
    let mut zr = sr.z.columns(0, k).into_owned();
    let mut yr = sr.y.columns(0, k).into_owned();
    for (j, s) in scale.iter().enumerate() {
        zr.column_mut(j).scale_mut(s.re);
        yr.column_mut(j).scale_mut(s.re);
    }
    (&sr.u * zr, &sr.l * yr)
}

fn project(sys: &LtiSystem, v: &CMat, w: &CMat) -> (CMat, CMat, CMat) {
    (w.ad_mul(&(sys.a() * v)), w.ad_mul(sys.b()), sys.c() * v)
}

/// Truncates using precomputed Gramians; lets sweeps over `r` share them.
pub fn conformal_bt_with_gramians(
    sys: &LtiSystem,
    grams: &GramianPair,
    r: usize,
    ties: TieHandling,
) -> Result<ReductionResult> {
    let n = sys.order();
    if r == 0 || r > n {
        return Err(Error::InvalidArgument(format!("reduced order {r} outside 1..={n}")));
    }
    if grams.xc.shape() != (n, n) || grams.yo.shape() != (n, n) {
        return Err(Error::DimensionMismatch(format!(
            "Gramians are {:?}/{:?}, system order is {n}",
            grams.xc.shape(),
            grams.yo.shape()
        )));
    }
    let sr = square_root(grams)?;
    let rank = numerical_rank(&sr.sigma, n);
    if rank < r {
        return Err(Error::RankDeficient { rank, required: r });
    }
    if r < sr.sigma.len() {
        let (s1, sr_, sn) = (sr.sigma[0], sr.sigma[r - 1], sr.sigma[r]);
        if sr_ - sn <= GAP_TOL * s1 {
            match ties {
                TieHandling::Reject => {
                    return Err(Error::SingularValueTie { r, sigma_r: sr_, sigma_next: sn });
                }
                TieHandling::Allow => {
                    log::warn!("σ_{r} = {sr_:e} and σ_{} = {sn:e} are not separated; truncating anyway", r + 1)
                }
            }
        }
    }
    if rank < n {
        log::info!("Gramian product has numerical rank {rank} < {n}");
    }
    let (vr, wr) = bases(&sr, r);
    let (ar, br, cr) = project(sys, &vr, &wr);
    Ok(ReductionResult { rom: LtiSystem::new(ar, br, cr)?, vr, wr, hsv: sr.sigma, r, method: grams.method })
}

/// Conformal balanced truncation to order `r`.
pub fn conformal_bt(
    sys: &LtiSystem,
    map: &ConformalMap,
    r: usize,
    method: GramianMethod,
    cfg: &QuadratureConfig,
) -> Result<ReductionResult> {
    let n = sys.order();
    if r == 0 || r > n {
        return Err(Error::InvalidArgument(format!("reduced order {r} outside 1..={n}")));
    }
    let grams = gramians(sys, map, method, cfg)?;
    conformal_bt_with_gramians(sys, &grams, r, TieHandling::Reject)
}

/// Classical balanced truncation: the identity Möbius map, Lyapunov route.
pub fn classical_bt(sys: &LtiSystem, r: usize) -> Result<ReductionResult> {
    conformal_bt(
        sys,
        &ConformalMap::from(MobiusMap::identity()),
        r,
        GramianMethod::Lyapunov,
        &QuadratureConfig::default(),
    )
}

/// Full balancing transformation; the system must be numerically minimal.
pub fn balance_full(sys: &LtiSystem, grams: &GramianPair) -> Result<BalancedRealization> {
    let n = sys.order();
    let sr = square_root(grams)?;
    let rank = numerical_rank(&sr.sigma, n);
    if rank < n {
        return Err(Error::RankDeficient { rank, required: n });
    }
    balanced(sys, &sr, n)
}

/// Balanced realization restricted to the directions with
/// `σ_i > rel_tol·σ₁`. Discarded directions carry Gramian mass below the
/// cut, so quantities weighted by `Σ₂` change by at most that amount.
pub fn balance_numerical(sys: &LtiSystem, grams: &GramianPair, rel_tol: f64) -> Result<BalancedRealization> {
    if !(0.0..1.0).contains(&rel_tol) {
        return Err(Error::InvalidArgument(format!("rank tolerance {rel_tol} outside [0, 1)")));
    }
    let n = sys.order();
    let sr = square_root(grams)?;
    let cut = rel_tol.max(default_clip_tol(n)) * sr.sigma.first().copied().unwrap_or(0.0);
    let k = sr.sigma.iter().take_while(|&&s| s > cut).count();
    if k == 0 {
        return Err(Error::RankDeficient { rank: 0, required: 1 });
    }
    balanced(sys, &sr, k)
}

fn balanced(sys: &LtiSystem, sr: &SquareRoot, k: usize) -> Result<BalancedRealization> {
    let (v, w) = bases(sr, k);
    let (a, b, c) = project(sys, &v, &w);
    Ok(BalancedRealization { a, b, c, sigma: sr.sigma[..k].to_vec() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::benchmarks::{BenchmarkKind, BenchmarkSpec};
    use crate::gramians::gramians_mobius;
    use crate::linalg::c64;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn heat(n: usize) -> LtiSystem {
        BenchmarkSpec::new(BenchmarkKind::Heat, n).unwrap().build().unwrap()
    }

    fn scalar(a: f64, b: f64, c: f64) -> LtiSystem {
        LtiSystem::new(
            CMat::from_element(1, 1, c64(a, 0.0)),
            CMat::from_element(1, 1, c64(b, 0.0)),
            CMat::from_element(1, 1, c64(c, 0.0)),
        )
        .unwrap()
    }

    fn disk_for(sys: &LtiSystem) -> MobiusMap {
        let rho = sys.poles().unwrap().iter().map(|p| p.norm()).fold(0.0, f64::max);
        MobiusMap::disk(c64(-0.6 * rho, 0.0), 0.6 * rho).unwrap()
    }

    #[test]
    fn scalar_sigma() {
        let sys = scalar(-1.0, 1.0, 2.0);
        let g = gramians_mobius(&sys, &MobiusMap::identity()).unwrap();
        let bal = balance_full(&sys, &g).unwrap();
        assert!((bal.sigma[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn biorthogonal_bases_and_shapes() {
        let sys = heat(40);
        let map = disk_for(&sys);
        let res = conformal_bt(&sys, &map.into(), 6, GramianMethod::Lyapunov, &QuadratureConfig::default()).unwrap();
        assert_eq!(res.rom.order(), 6);
        assert_eq!(res.vr.shape(), (40, 6));
        let g = res.wr.ad_mul(&res.vr);
        assert!((g - CMat::identity(6, 6)).norm() < 1e-8);
        assert!(res.hsv.windows(2).all(|w| w[0] >= w[1]) && res.hsv.iter().all(|&s| s >= 0.0));
    }

    #[test]
    fn identity_map_is_classical() {
        let sys = heat(30);
        let a = classical_bt(&sys, 4).unwrap();
        let g = gramians_mobius(&sys, &MobiusMap::identity()).unwrap();
        let b = conformal_bt_with_gramians(&sys, &g, 4, TieHandling::Reject).unwrap();
        assert_eq!(a.hsv, b.hsv);
    }

    fn assert_balanced(bal: &BalancedRealization, map: &MobiusMap, tol: f64) {
        let gb = gramians_mobius(&bal.system().unwrap(), map).unwrap();
        let d =
            CMat::from_diagonal(&nalgebra::DVector::from_iterator(bal.order(), bal.sigma.iter().map(|&s| c64(s, 0.0))));
        assert!((&gb.xc - &d).norm() < tol * d.norm(), "{}", (&gb.xc - &d).norm() / d.norm());
        assert!((&gb.yo - &d).norm() < tol * d.norm(), "{}", (&gb.yo - &d).norm() / d.norm());
    }

    #[test]
    fn balanced_gramians_are_diagonal() {
        let a = CMat::from_fn(6, 6, |i, j| {
            if i == j {
                c64(-1.0 - i as f64, 0.3 * i as f64)
            } else {
                c64(0.2 * ((i * 7 + j * 3) % 5) as f64 - 0.4, 0.1 * ((i + 2 * j) % 3) as f64)
            }
        });
        let b = CMat::from_fn(6, 2, |i, j| c64(1.0 / (1.0 + i as f64 + j as f64), 0.0));
        let c = CMat::from_fn(2, 6, |i, j| c64(((i + j) % 4) as f64 - 1.5, 0.5));
        let sys = LtiSystem::new(a, b, c).unwrap();
        let map = disk_for(&sys);
        let bal = balance_full(&sys, &gramians_mobius(&sys, &map).unwrap()).unwrap();
        assert_balanced(&bal, &map, 1e-10);
        // balancing a balanced system changes nothing but phases
        let again =
            balance_full(&bal.system().unwrap(), &gramians_mobius(&bal.system().unwrap(), &map).unwrap()).unwrap();
        for (x, y) in bal.sigma.iter().zip(&again.sigma) {
            assert!((x - y).abs() < 1e-12 * bal.sigma[0]);
        }
        for i in 0..6 {
            for j in 0..6 {
                assert!((bal.a[(i, j)].norm() - again.a[(i, j)].norm()).abs() < 1e-8 * bal.a.norm());
            }
        }
    }

    #[test]
    fn numerically_balanced_heat() {
        let sys = heat(50);
        let map = disk_for(&sys);
        let bal = balance_numerical(&sys, &gramians_mobius(&sys, &map).unwrap(), 1e-12).unwrap();
        assert_balanced(&bal, &map, 1e-6);
    }

    #[test]
    fn full_balancing_rejects_non_minimal() {
        let sys = heat(120);
        let g = gramians_mobius(&sys, &MobiusMap::disk(c64(-17e4, 0.0), 17e4).unwrap()).unwrap();
        assert!(matches!(balance_full(&sys, &g), Err(Error::RankDeficient { .. })));
        let bal = balance_numerical(&sys, &g, 1e-13).unwrap();
        assert!(bal.order() < 120 && bal.order() > 10);
    }

    #[test]
    fn tie_is_detected_and_overridable() {
        // two identical decoupled modes give σ₁ = σ₂
        let a = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![c64(-1.0, 0.0), c64(-1.0, 0.0)]));
        let b = CMat::from_column_slice(2, 2, &[c64(1.0, 0.0), c64(0.0, 0.0), c64(0.0, 0.0), c64(1.0, 0.0)]);
        let sys = LtiSystem::new(a, b.clone(), b).unwrap();
        let g = gramians_mobius(&sys, &MobiusMap::identity()).unwrap();
        assert!(matches!(
            conformal_bt_with_gramians(&sys, &g, 1, TieHandling::Reject),
            Err(Error::SingularValueTie { .. })
        ));
        assert!(conformal_bt_with_gramians(&sys, &g, 1, TieHandling::Allow).is_ok());
    }

    #[test]
    fn rank_deficiency_is_reported() {
        let a = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![c64(-1.0, 0.0), c64(-2.0, 0.0)]));
        let b = CMat::from_column_slice(2, 1, &[c64(1.0, 0.0), c64(0.0, 0.0)]);
        let c = CMat::from_row_slice(1, 2, &[c64(1.0, 0.0), c64(1.0, 0.0)]);
        let sys = LtiSystem::new(a, b, c).unwrap();
        let g = gramians_mobius(&sys, &MobiusMap::identity()).unwrap();
        assert!(matches!(
            conformal_bt_with_gramians(&sys, &g, 2, TieHandling::Reject),
            Err(Error::RankDeficient { rank: 1, required: 2 })
        ));
    }

    #[test]
    fn nested_truncations_share_hsv() {
        let sys = heat(30);
        let map: ConformalMap = disk_for(&sys).into();
        let cfg = QuadratureConfig::default();
        let a = conformal_bt(&sys, &map, 3, GramianMethod::Lyapunov, &cfg).unwrap();
        let b = conformal_bt(&sys, &map, 6, GramianMethod::Lyapunov, &cfg).unwrap();
        assert_eq!(a.hsv, b.hsv);
        assert!((a.rom.a() - b.rom.a().view((0, 0), (3, 3))).norm() < 1e-8 * a.rom.a().norm());
    }

    #[test]
    fn bad_order_rejected() {
        let sys = heat(10);
        let map: ConformalMap = disk_for(&sys).into();
        let cfg = QuadratureConfig::default();
        assert!(conformal_bt(&sys, &map, 0, GramianMethod::Lyapunov, &cfg).is_err());
        assert!(conformal_bt(&sys, &map, 11, GramianMethod::Lyapunov, &cfg).is_err());
    }

    fn random_stable(seed: u64, n: usize) -> (LtiSystem, CMat) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rand =
            |r: usize, c: usize| CMat::from_fn(r, c, |_, _| c64(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
        let mut a = rand(n, n);
        let shift = crate::linalg::eigenvalues(&a).unwrap().iter().map(|l| l.re).fold(f64::MIN, f64::max);
        for i in 0..n {
            a[(i, i)] -= c64(shift + 0.2, 0.0);
        }
        let (b, c) = (rand(n, 1), rand(1, n));
        let s = CMat::identity(n, n) + rand(n, n) * c64(0.3, 0.0);
        (LtiSystem::new(a, b, c).unwrap(), s)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn hsv_invariant_under_state_transform(seed in any::<u64>(), n in 2usize..7) {
            let (sys, s) = random_stable(seed, n);
            let si = s.clone().try_inverse().unwrap();
            let moved = LtiSystem::new(&s * sys.a() * &si, &s * sys.b(), sys.c() * &si).unwrap();
            let id = MobiusMap::identity();
            let h0 = conformal_bt_with_gramians(&sys, &gramians_mobius(&sys, &id).unwrap(), 1, TieHandling::Allow).unwrap();
            let h1 = conformal_bt_with_gramians(&moved, &gramians_mobius(&moved, &id).unwrap(), 1, TieHandling::Allow).unwrap();
            let top = h0.hsv[0];
            for (x, y) in h0.hsv.iter().zip(&h1.hsv) {
                prop_assert!((x - y).abs() <= 1e-8 * top, "{x} vs {y}");
            }
        }

        #[test]
        fn projection_bases_are_biorthogonal(seed in any::<u64>(), n in 2usize..7) {
            let (sys, _) = random_stable(seed, n);
            let g = gramians_mobius(&sys, &MobiusMap::identity()).unwrap();
            let red = conformal_bt_with_gramians(&sys, &g, 1, TieHandling::Allow).unwrap();
            let defect = red.wr.adjoint() * &red.vr - CMat::identity(1, 1);
            prop_assert!(defect.norm() <= 1e-10, "{}", defect.norm());
        }
    }
}
