//! Dense complex state-space systems `ẋ = Ax + Bu, y = Cx` and their
//! transfer functions `G(z) = C(zI − A)⁻¹B`.

use crate::error::{Error, Result};
use crate::linalg::{ensure_finite, fmt_c, lu_solve, CMat, EigenBasis, SchurForm, C64};
use crate::maps::ConformalMap;

#[derive(Debug, Clone, PartialEq)]
pub struct LtiSystem {
    a: CMat,
    b: CMat,
    c: CMat,
}

impl LtiSystem {
    pub fn new(a: CMat, b: CMat, c: CMat) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::InvalidSystem(format!("A must be square, got {}x{}", a.nrows(), a.ncols())));
        }
        let n = a.nrows();
        if n == 0 {
            return Err(Error::InvalidSystem("state dimension must be positive".into()));
        }
        if b.nrows() != n || c.ncols() != n {
            return Err(Error::InvalidSystem(format!(
                "incompatible shapes: A {n}x{n}, B {}x{}, C {}x{}",
                b.nrows(),
                b.ncols(),
                c.nrows(),
                c.ncols()
            )));
        }
        if b.ncols() == 0 || c.nrows() == 0 {
            return Err(Error::InvalidSystem("need at least one input and one output".into()));
        }
        ensure_finite(&a, "A")?;
        ensure_finite(&b, "B")?;
        ensure_finite(&c, "C")?;
        Ok(LtiSystem { a, b, c })
    }

    pub fn a(&self) -> &CMat {
        &self.a
    }
    pub fn b(&self) -> &CMat {
        &self.b
    }
    pub fn c(&self) -> &CMat {
        &self.c
    }

    /// State dimension `n`.
    pub fn order(&self) -> usize {
        self.a.nrows()
    }
    /// Input count `m`.
    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }
    /// Output count `q`.
    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn into_parts(self) -> (CMat, CMat, CMat) {
        (self.a, self.b, self.c)
    }

    /// The dual system `(A*, C*, B*)`.
    pub fn adjoint(&self) -> LtiSystem {
        LtiSystem { a: self.a.adjoint(), b: self.c.adjoint(), c: self.b.adjoint() }
    }

    /// `(SAS⁻¹, SB, CS⁻¹)` for a nonsingular `S`.
    pub fn transformed(&self, s: &CMat) -> Result<LtiSystem> {
        let n = self.order();
        if s.nrows() != n || s.ncols() != n {
            return Err(Error::DimensionMismatch("state transform has wrong shape".into()));
        }
        let s_inv = lu_solve(s, &CMat::identity(n, n))
            .ok_or_else(|| Error::InvalidArgument("state transform is singular".into()))?;
        LtiSystem::new(s * &self.a * &s_inv, s * &self.b, &self.c * s_inv)
    }

    /// Eigenvalues of `A`.
    pub fn poles(&self) -> Result<Vec<C64>> {
        Ok(SchurForm::new(&self.a)?.eigenvalues())
    }

    /// `G(z) = C(zI − A)⁻¹B` via one LU solve with `m` right-hand sides.
    pub fn transfer_eval(&self, z: C64) -> Result<CMat> {
        Ok(&self.c * self.resolvent_apply(z)?)
    }

    /// `(zI − A)⁻¹B`.
    pub fn resolvent_apply(&self, z: C64) -> Result<CMat> {
        let n = self.order();
        let shifted = CMat::identity(n, n) * z - &self.a;
        lu_solve(&shifted, &self.b).ok_or_else(|| Error::ResolventSingular(fmt_c(z)))
    }

    /// `𝔥_G(s) = G(ψ(s))·ψ′(s)^{1/2}` (principal square root).
    pub fn mapped_transfer_eval(&self, map: &ConformalMap, s: C64) -> Result<CMat> {
        let z = map.eval(s)?;
        let w = map.sqrt_deriv(s)?;
        Ok(self.transfer_eval(z)? * w)
    }

    pub fn evaluator(&self) -> Result<TransferEvaluator> {
        TransferEvaluator::new(self)
    }

    /// Stacks two systems with a common input: `G − G_r` as one realization.
    pub fn difference(&self, other: &LtiSystem) -> Result<LtiSystem> {
        if self.inputs() != other.inputs() || self.outputs() != other.outputs() {
            return Err(Error::DimensionMismatch(format!(
                "cannot subtract a {}x{} system from a {}x{} system",
                other.outputs(),
                other.inputs(),
                self.outputs(),
                self.inputs()
            )));
        }
        let (n1, n2) = (self.order(), other.order());
        let mut a = CMat::zeros(n1 + n2, n1 + n2);
        a.view_mut((0, 0), (n1, n1)).copy_from(&self.a);
        a.view_mut((n1, n1), (n2, n2)).copy_from(&other.a);
        let mut b = CMat::zeros(n1 + n2, self.inputs());
        b.view_mut((0, 0), (n1, self.inputs())).copy_from(&self.b);
        b.view_mut((n1, 0), (n2, self.inputs())).copy_from(&other.b);
        let mut c = CMat::zeros(self.outputs(), n1 + n2);
        c.view_mut((0, 0), (self.outputs(), n1)).copy_from(&self.c);
        c.view_mut((0, n1), (self.outputs(), n2)).copy_from(&(-&other.c));
        LtiSystem::new(a, b, c)
    }
}

/// Transfer-function evaluation through a cached Schur form: each point
/// costs one triangular solve instead of an LU factorization.
#[derive(Debug, Clone)]
pub struct TransferEvaluator {
    schur: SchurForm,
    kind: Evaluation,
}

#[derive(Debug, Clone)]
enum Evaluation {
    /// Poles and residue factors `C V`, `V⁻¹ B`.
    Modal { poles: Vec<C64>, cv: CMat, vb: CMat, scale: f64 },
    /// `C Q` and `Q* B` for triangular solves.
    Schur { cq: CMat, qb: CMat },
}

/// Largest eigenvector-basis condition accepted for modal evaluation.
const MAX_MODAL_CONDITION: f64 = 1e3;

impl TransferEvaluator {
    pub fn new(sys: &LtiSystem) -> Result<Self> {
        let schur = SchurForm::new(sys.a())?;
        let kind = match EigenBasis::from_schur(&schur, MAX_MODAL_CONDITION) {
            Some(eig) => Evaluation::Modal {
                cv: sys.c() * &eig.v,
                vb: &eig.v_inv * sys.b(),
                poles: eig.values,
                scale: schur.scale(),
            },
            None => Evaluation::Schur { cq: sys.c() * &schur.q, qb: schur.q.adjoint() * sys.b() },
        };
        Ok(TransferEvaluator { schur, kind })
    }

    pub fn eval(&self, z: C64) -> Result<CMat> {
        match &self.kind {
            Evaluation::Modal { poles, cv, vb, scale } => {
                let tiny = (poles.len() as f64) * f64::EPSILON * (z.norm() + scale);
                let mut y = vb.clone();
                for (k, l) in poles.iter().enumerate() {
                    let den = z - l;
                    if den.norm() <= tiny {
                        return Err(Error::ResolventSingular(fmt_c(z)));
                    }
                    let inv = C64::new(1.0, 0.0) / den;
                    y.row_mut(k).iter_mut().for_each(|v| *v *= inv);
                }
                Ok(cv * y)
            }
            Evaluation::Schur { cq, qb } => {
                let mut y = qb.clone();
                self.schur.solve_shifted(z, &mut y)?;
                Ok(cq * y)
            }
        }
    }

    pub fn eval_mapped(&self, map: &ConformalMap, s: C64) -> Result<CMat> {
        let z = map.eval(s)?;
        let w = map.sqrt_deriv(s)?;
        Ok(self.eval(z)? * w)
    }

    pub fn poles(&self) -> Vec<C64> {
        self.schur.eigenvalues()
    }
}
