//! Dense Hermitian helpers: spectral calculus, Choi/Kraus conversions.
//!
//! Matrix functions (√, pseudo-inverse √) go through the Hermitian
//! eigendecomposition; eigenvalues below `rel_cut · λ_max` count as zero and
//! the corresponding directions are projected out.

use nalgebra::{Complex, ComplexField, DMatrix, DVector};

use crate::error::{Error, Result};
use crate::scalar::{approx_f64, real, Scalar};

pub type CMatrix<T> = DMatrix<Complex<T>>;
pub type CVector<T> = DVector<Complex<T>>;

/// Relative eigenvalue cutoff for support restriction.
pub fn support_cut<T: Scalar>() -> T {
    real(1e-12)
}

pub fn max_abs_entry<T: Scalar>(m: &CMatrix<T>) -> T {
    m.iter().fold(T::zero(), |acc, c| acc.max(c.modulus()))
}

pub fn trace_re<T: Scalar>(m: &CMatrix<T>) -> T {
    let mut acc = T::zero();
    for i in 0..m.nrows().min(m.ncols()) {
        acc += m[(i, i)].real();
    }
    acc
}

/// Max entry deviation from Hermiticity, `max |A − A†|`.
pub fn hermiticity_residual<T: Scalar>(m: &CMatrix<T>) -> T {
    max_abs_entry(&(m - m.adjoint()))
}

/// `(A + A†)/2`.
pub fn hermitize<T: Scalar>(m: &CMatrix<T>) -> CMatrix<T> {
    (m + m.adjoint()).map(|c| c.unscale(real::<T>(2.0)))
}

/// Eigendecomposition of a Hermitian matrix: real eigenvalues, unitary
/// eigenvector columns.
pub struct Spectral<T: Scalar> {
    pub values: DVector<T>,
    pub vectors: CMatrix<T>,
}

impl<T: Scalar> Spectral<T> {
    pub fn new(m: &CMatrix<T>) -> Self {
        let eig = nalgebra::SymmetricEigen::new(m.clone());
        Spectral {
            values: eig.eigenvalues,
            vectors: eig.eigenvectors,
        }
    }

    pub fn max_eigenvalue(&self) -> T {
        self.values.iter().fold(T::zero(), |acc, &v| acc.max(v))
    }

    pub fn min_eigenvalue(&self) -> T {
        self.values
            .iter()
            .fold(self.values[0], |acc, &v| acc.min(v))
    }

    /// Absolute cutoff below which eigenvalues count as zero.
    pub fn cutoff(&self, rel_cut: T) -> T {
        rel_cut * self.max_eigenvalue().max(T::zero())
    }

    /// `Σ f(λ_i) v_i v_i†` over eigenvalues above the cutoff.
    pub fn apply_above(&self, rel_cut: T, f: impl Fn(T) -> T) -> CMatrix<T> {
        let n = self.vectors.nrows();
        let cut = self.cutoff(rel_cut);
        let mut out = CMatrix::<T>::zeros(n, n);
        for (i, &lambda) in self.values.iter().enumerate() {
            if lambda <= cut {
                continue;
            }
            let column = self.vectors.column(i);
            let scale = Complex::new(f(lambda), T::zero());
            out += (column * column.adjoint()).map(|c| c * scale);
        }
        out
    }

    pub fn rank_above(&self, rel_cut: T) -> usize {
        let cut = self.cutoff(rel_cut);
        self.values.iter().filter(|&&v| v > cut).count()
    }

    /// Projector onto the span of eigenvectors above the cutoff.
    pub fn support_projector(&self, rel_cut: T) -> CMatrix<T> {
        self.apply_above(rel_cut, |_| T::one())
    }
}

/// Positive-part square root with support restriction.
pub fn sqrt_psd<T: Scalar>(m: &CMatrix<T>, rel_cut: T) -> CMatrix<T> {
    Spectral::new(m).apply_above(rel_cut, |v| v.sqrt())
}

/// Pseudo-inverse square root plus the support projector it acts on.
/// Errors when nothing survives the cutoff.
pub fn inv_sqrt_psd<T: Scalar>(m: &CMatrix<T>, rel_cut: T) -> Result<(CMatrix<T>, CMatrix<T>)> {
    let spectral = Spectral::new(m);
    if spectral.rank_above(rel_cut) == 0 {
        return Err(Error::SingularReference);
    }
    let inv = spectral.apply_above(rel_cut, |v| T::one() / v.sqrt());
    let projector = spectral.support_projector(rel_cut);
    Ok((inv, projector))
}

/// Apply a Kraus list: `Σ K m K†`.
pub fn apply_kraus<T: Scalar>(ops: &[CMatrix<T>], m: &CMatrix<T>) -> Result<CMatrix<T>> {
    let first = ops.first().ok_or_else(|| Error::DimensionMismatch {
        context: "empty Kraus list".into(),
    })?;
    if m.nrows() != first.ncols() || m.ncols() != first.ncols() {
        return Err(Error::DimensionMismatch {
            context: format!(
                "operator is {}x{}, Kraus operators expect dimension {}",
                m.nrows(),
                m.ncols(),
                first.ncols()
            ),
        });
    }
    let d_out = first.nrows();
    let mut out = CMatrix::<T>::zeros(d_out, d_out);
    for k in ops {
        out += k * m * k.adjoint();
    }
    Ok(out)
}

/// `Σ K† K`, the operator that equals the identity for a trace-preserving
/// list (or the support projector for a support-restricted one).
pub fn kraus_normalization<T: Scalar>(ops: &[CMatrix<T>]) -> CMatrix<T> {
    let d_in = ops[0].ncols();
    let mut out = CMatrix::<T>::zeros(d_in, d_in);
    for k in ops {
        out += k.adjoint() * k;
    }
    out
}

/// Choi matrix `C = Σ_k |v_k⟩⟨v_k|` with `v_k[(i·d_out + a)] = K_k[a, i]`,
/// i.e. `C = (id ⊗ E)(|Ω⟩⟨Ω|)` for the unnormalized maximally entangled Ω.
pub fn kraus_to_choi<T: Scalar>(ops: &[CMatrix<T>]) -> Result<CMatrix<T>> {
    let first = ops.first().ok_or_else(|| Error::DimensionMismatch {
        context: "empty Kraus list".into(),
    })?;
    let (d_out, d_in) = first.shape();
    for k in ops {
        if k.shape() != (d_out, d_in) {
            return Err(Error::DimensionMismatch {
                context: "inconsistent Kraus operator shapes".into(),
            });
        }
    }
    let n = d_in * d_out;
    let mut choi = CMatrix::<T>::zeros(n, n);
    for k in ops {
        let mut v = CVector::<T>::zeros(n);
        for i in 0..d_in {
            for a in 0..d_out {
                v[i * d_out + a] = k[(a, i)];
            }
        }
        choi += &v * v.adjoint();
    }
    Ok(choi)
}

/// Factor a PSD Choi matrix back into Kraus operators.
///
/// Eigenvalues in `[−clip_tol, 0)` are clipped to zero; anything below
/// `−clip_tol` is a CP violation.
pub fn choi_to_kraus<T: Scalar>(
    choi: &CMatrix<T>,
    d_in: usize,
    d_out: usize,
    clip_tol: T,
) -> Result<Vec<CMatrix<T>>> {
    let n = d_in * d_out;
    if choi.shape() != (n, n) {
        return Err(Error::DimensionMismatch {
            context: format!(
                "Choi matrix is {}x{}, expected {}x{}",
                choi.nrows(),
                choi.ncols(),
                n,
                n
            ),
        });
    }
    let spectral = Spectral::new(&hermitize(choi));
    let min_eig = spectral.min_eigenvalue();
    if min_eig < -clip_tol {
        return Err(Error::NotCptp {
            detail: format!("Choi minimum eigenvalue {:e}", approx_f64(min_eig)),
        });
    }
    let drop = spectral.cutoff(support_cut::<T>());
    let mut ops = Vec::new();
    for (k, &lambda) in spectral.values.iter().enumerate() {
        if lambda <= drop {
            continue;
        }
        let column = spectral.vectors.column(k);
        let weight = Complex::new(lambda.sqrt(), T::zero());
        let mut op = CMatrix::<T>::zeros(d_out, d_in);
        for i in 0..d_in {
            for a in 0..d_out {
                op[(a, i)] = column[i * d_out + a] * weight;
            }
        }
        ops.push(op);
    }
    if ops.is_empty() {
        return Err(Error::NotCptp {
            detail: "Choi matrix has no positive spectrum".into(),
        });
    }
    Ok(ops)
}
