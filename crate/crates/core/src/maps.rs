//! Conformal maps from (a subset of) the open left half-plane onto the pole
//! domain of a system.
//!
//! Two families are supported. Möbius maps `m(s) = (αs + β)/(γs + δ)` admit
//! an exact Lyapunov route for the Gramians; the Joukowski-type map onto a
//! scaled and shifted Bernstein ellipse does not and is handled by
//! quadrature. Bijectivity and conformality on the whole domain are not
//! checked beyond the constructor invariants (nonzero determinant, `R > 1`,
//! `M ≠ 0`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::complex as cser;
use crate::linalg::{c64, ensure_finite, fmt_c, lu_solve, CMat, C64};

const POLE_TOL: f64 = 1e-14;

/// `m(s) = (αs + β)/(γs + δ)` with `αδ − βγ ≠ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MobiusMap {
    #[serde(with = "cser")]
    alpha: C64,
    #[serde(with = "cser")]
    beta: C64,
    #[serde(with = "cser")]
    gamma: C64,
    #[serde(with = "cser")]
    delta: C64,
}

impl MobiusMap {
    pub fn new(alpha: C64, beta: C64, gamma: C64, delta: C64) -> Result<Self> {
        for (name, v) in [("alpha", alpha), ("beta", beta), ("gamma", gamma), ("delta", delta)] {
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(Error::InvalidMap(format!("{name} is not finite")));
            }
        }
        let scale = [alpha, beta, gamma, delta].iter().map(|z| z.norm()).fold(0.0f64, f64::max);
        let det = alpha * delta - beta * gamma;
        if !(det.norm() > 1e-14 * scale * scale) {
            return Err(Error::InvalidMap(format!(
                "Möbius determinant alpha*delta - beta*gamma = {} is zero",
                fmt_c(det)
            )));
        }
        Ok(MobiusMap { alpha, beta, gamma, delta })
    }

    pub fn identity() -> Self {
        MobiusMap { alpha: c64(1.0, 0.0), beta: c64(0.0, 0.0), gamma: c64(0.0, 0.0), delta: c64(1.0, 0.0) }
    }

    /// `ψ(s) = −i·s`: left half-plane onto the open upper half-plane.
    pub fn clockwise_rotation() -> Self {
        MobiusMap { alpha: c64(0.0, -1.0), beta: c64(0.0, 0.0), gamma: c64(0.0, 0.0), delta: c64(1.0, 0.0) }
    }

    /// `ψ(s) = c + R(s + 1)/(s − 1)`: left half-plane onto the open disk
    /// `|z − c| < R`, imaginary axis onto its boundary.
    pub fn disk(center: C64, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidMap(format!("disk radius must be positive, got {radius}")));
        }
        MobiusMap::new(center + radius, c64(radius, 0.0) - center, c64(1.0, 0.0), c64(-1.0, 0.0))
    }

    pub fn alpha(&self) -> C64 {
        self.alpha
    }
    pub fn beta(&self) -> C64 {
        self.beta
    }
    pub fn gamma(&self) -> C64 {
        self.gamma
    }
    pub fn delta(&self) -> C64 {
        self.delta
    }

    pub fn determinant(&self) -> C64 {
        self.alpha * self.delta - self.beta * self.gamma
    }

    /// The map's pole `−δ/γ`, if finite.
    pub fn pole(&self) -> Option<C64> {
        (self.gamma != c64(0.0, 0.0)).then(|| -self.delta / self.gamma)
    }

    /// `γ = 0` or the pole lies in the open right half-plane. This is the
    /// hypothesis under which truncation keeps reduced poles in the image.
    pub fn pole_in_rhp(&self) -> bool {
        self.pole().is_none_or(|p| p.re > 0.0)
    }

    pub fn eval(&self, z: C64) -> Result<C64> {
        let den = self.gamma * z + self.delta;
        if den.norm() <= POLE_TOL * (self.gamma.norm() * z.norm() + self.delta.norm()) {
            return Err(Error::PoleEvaluation(fmt_c(z)));
        }
        Ok((self.alpha * z + self.beta) / den)
    }

    /// `m′(z) = (αδ − βγ)/(γz + δ)²`.
    pub fn deriv(&self, z: C64) -> Result<C64> {
        let den = self.gamma * z + self.delta;
        if den.norm() <= POLE_TOL * (self.gamma.norm() * z.norm() + self.delta.norm()) {
            return Err(Error::PoleEvaluation(fmt_c(z)));
        }
        Ok(self.determinant() / (den * den))
    }

    /// `m⁻¹(w) = (β − δw)/(γw − α)`.
    pub fn inverse_eval(&self, w: C64) -> Result<C64> {
        let den = self.gamma * w - self.alpha;
        if den.norm() <= POLE_TOL * (self.gamma.norm() * w.norm() + self.alpha.norm()) {
            return Err(Error::PoleEvaluation(fmt_c(w)));
        }
        Ok((self.beta - self.delta * w) / den)
    }

    /// `m⁻¹(A) = (βI − δA)(γA − αI)⁻¹`.
    pub fn inverse_matrix(&self, a: &CMat) -> Result<CMat> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "Möbius matrix function of a {}x{} matrix",
                a.nrows(),
                a.ncols()
            )));
        }
        ensure_finite(a, "Möbius matrix argument")?;
        let n = a.nrows();
        let id = CMat::identity(n, n);
        let num = &id * self.beta - a * self.delta;
        let shift = a * self.gamma - &id * self.alpha;
        // X = num · shift⁻¹  ⇔  shift* X* = num*
        let xt = lu_solve(&shift.adjoint(), &num.adjoint()).ok_or(Error::SingularShift)?;
        Ok(xt.adjoint())
    }

    /// `(αI − γA)⁻¹ M`, the input weighting of the Möbius Lyapunov route.
    #[cfg(test)]
    pub(crate) fn shifted_solve(&self, a: &CMat, rhs: &CMat) -> Result<CMat> {
        let n = a.nrows();
        let shift = CMat::identity(n, n) * self.alpha - a * self.gamma;
        lu_solve(&shift, rhs).ok_or(Error::SingularShift)
    }

    /// `(αI − γA)⁻* M`.
    #[cfg(test)]
    pub(crate) fn shifted_solve_adjoint(&self, a: &CMat, rhs: &CMat) -> Result<CMat> {
        let n = a.nrows();
        let shift = CMat::identity(n, n) * self.alpha.conj() - a.adjoint() * self.gamma.conj();
        lu_solve(&shift, rhs).ok_or(Error::SingularShift)
    }
}

/// `ψ(s) = c + (M/2)(R(s + 1)/(s − 1) + R⁻¹(s − 1)/(s + 1))`, mapping the
/// imaginary axis onto the boundary of the Bernstein ellipse with semi-axes
/// `(|M|/2)(R ± 1/R)`, rotated by `arg M` and centered at `c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JoukowskiMap {
    #[serde(with = "cser")]
    c: C64,
    #[serde(with = "cser")]
    m: C64,
    r: f64,
}

impl JoukowskiMap {
    pub fn new(c: C64, m: C64, r: f64) -> Result<Self> {
        if !(c.re.is_finite() && c.im.is_finite() && m.re.is_finite() && m.im.is_finite()) {
            return Err(Error::InvalidMap("Joukowski parameters must be finite".into()));
        }
        if !(r > 1.0 && r.is_finite()) {
            return Err(Error::InvalidMap(format!("Joukowski R must exceed 1, got {r}")));
        }
        if m.norm() == 0.0 {
            return Err(Error::InvalidMap("Joukowski scale M must be nonzero".into()));
        }
        Ok(JoukowskiMap { c, m, r })
    }

    pub fn center(&self) -> C64 {
        self.c
    }
    pub fn scale(&self) -> C64 {
        self.m
    }
    pub fn r(&self) -> f64 {
        self.r
    }

    /// `(major, minor)` semi-axes of the boundary ellipse.
    pub fn semi_axes(&self) -> (f64, f64) {
        let h = 0.5 * self.m.norm();
        (h * (self.r + 1.0 / self.r), h * (self.r - 1.0 / self.r))
    }

    fn check(&self, z: C64) -> Result<()> {
        let tol = POLE_TOL * z.norm().max(1.0);
        if (z - 1.0).norm() <= tol || (z + 1.0).norm() <= tol {
            Err(Error::PoleEvaluation(fmt_c(z)))
        } else {
            Ok(())
        }
    }

    pub fn eval(&self, z: C64) -> Result<C64> {
        self.check(z)?;
        let outer = (z + 1.0) / (z - 1.0);
        let inner = (z - 1.0) / (z + 1.0);
        Ok(self.c + self.m * 0.5 * (outer * self.r + inner / self.r))
    }

    /// `ψ′(z) = M(−R/(z − 1)² + 1/(R(z + 1)²))`.
    pub fn deriv(&self, z: C64) -> Result<C64> {
        self.check(z)?;
        let zm = z - 1.0;
        let zp = z + 1.0;
        Ok(self.m * (-self.r / (zm * zm) + 1.0 / (self.r * zp * zp)))
    }
}

/// A conformal map `ψ` in one of the supported families.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConformalMap {
    Mobius(MobiusMap),
    Joukowski(JoukowskiMap),
}

impl ConformalMap {
    pub fn identity() -> Self {
        ConformalMap::Mobius(MobiusMap::identity())
    }

    pub fn eval(&self, z: C64) -> Result<C64> {
        match self {
            ConformalMap::Mobius(m) => m.eval(z),
            ConformalMap::Joukowski(j) => j.eval(z),
        }
    }

    pub fn deriv(&self, z: C64) -> Result<C64> {
        match self {
            ConformalMap::Mobius(m) => m.deriv(z),
            ConformalMap::Joukowski(j) => j.deriv(z),
        }
    }

    /// Principal branch of `ψ′(z)^{1/2}`.
    pub fn sqrt_deriv(&self, z: C64) -> Result<C64> {
        Ok(self.deriv(z)?.sqrt())
    }

    pub fn as_mobius(&self) -> Option<&MobiusMap> {
        match self {
            ConformalMap::Mobius(m) => Some(m),
            ConformalMap::Joukowski(_) => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ConformalMap::Mobius(_) => "mobius",
            ConformalMap::Joukowski(_) => "joukowski",
        }
    }
}

impl From<MobiusMap> for ConformalMap {
    fn from(m: MobiusMap) -> Self {
        ConformalMap::Mobius(m)
    }
}

impl From<JoukowskiMap> for ConformalMap {
    fn from(j: JoukowskiMap) -> Self {
        ConformalMap::Joukowski(j)
    }
}

// Map file schema. Parameters are validated on the way in.

#[derive(Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "lowercase", deny_unknown_fields)]
enum MapFile {
    Mobius {
        #[serde(with = "cser")]
        alpha: C64,
        #[serde(with = "cser")]
        beta: C64,
        #[serde(with = "cser")]
        gamma: C64,
        #[serde(with = "cser")]
        delta: C64,
    },
    Joukowski {
        #[serde(with = "cser")]
        c: C64,
        #[serde(with = "cser")]
        m: C64,
        r: f64,
    },
}

impl Serialize for ConformalMap {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let file = match *self {
            ConformalMap::Mobius(m) => MapFile::Mobius { alpha: m.alpha, beta: m.beta, gamma: m.gamma, delta: m.delta },
            ConformalMap::Joukowski(j) => MapFile::Joukowski { c: j.c, m: j.m, r: j.r },
        };
        file.serialize(s)
    }
}

impl<'de> Deserialize<'de> for ConformalMap {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let file = MapFile::deserialize(d)?;
        let map = match file {
            MapFile::Mobius { alpha, beta, gamma, delta } => {
                MobiusMap::new(alpha, beta, gamma, delta).map(ConformalMap::Mobius)
            }
            MapFile::Joukowski { c, m, r } => JoukowskiMap::new(c, m, r).map(ConformalMap::Joukowski),
        };
        map.map_err(serde::de::Error::custom)
    }
}
