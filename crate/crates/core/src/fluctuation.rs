//! f-families, ω random variables, discrete forward/reverse measures,
//! Crooks-type and Jarzynski-like identities, and f-divergences.
//!
//! For an invertible `f` on the positive reals there is a companion `g` with
//! `f(1/r) = g(f(r))`. With `ω_F = f(r)` and `ω_R = g(ω_F)` the forward and
//! reverse ω-distributions obey an atomwise Crooks-type relation and the
//! unit-average identity `⟨f⁻¹(g(ω))⟩_F = 1`, which is nothing more than the
//! normalization of the reverse process.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::prob::{JointProcess, RatioTable};
use crate::scalar::{approx_f64, nan, real, Scalar};

type Callable<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

/// User-supplied invertible family: `f`, its inverse, the companion `g`, and
/// `g′`. Validated numerically at construction.
#[derive(Clone)]
pub struct CustomFamily<T> {
    pub name: String,
    f: Callable<T>,
    f_inverse: Callable<T>,
    g: Callable<T>,
    g_prime: Callable<T>,
}

impl<T> fmt::Debug for CustomFamily<T> {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        out.debug_struct("CustomFamily")
            .field("name", &self.name)
            .finish()
    }
}

/// An invertible function of the forward/reverse ratio, with the derived
/// companions needed by the fluctuation identities.
///
/// Built-in kinds: `log` (`f = ln r / z`), `power` (`f = r^α`) and `exp`
/// (`f = e^{κr}`).
#[derive(Debug, Clone)]
pub enum FFamily<T> {
    Log { z: T },
    Power { alpha: T },
    Exp { kappa: T },
    Custom(CustomFamily<T>),
}

impl<T: Scalar> FFamily<T> {
    pub fn log(z: T) -> Result<Self> {
        if z == T::zero() {
            return Err(Error::ZeroParameter);
        }
        Ok(Self::Log { z })
    }

    pub fn power(alpha: T) -> Result<Self> {
        if alpha == T::zero() {
            return Err(Error::ZeroParameter);
        }
        Ok(Self::Power { alpha })
    }

    pub fn exp(kappa: T) -> Result<Self> {
        if kappa == T::zero() {
            return Err(Error::ZeroParameter);
        }
        Ok(Self::Exp { kappa })
    }

    /// Validate and wrap a custom family. The checks sample a log-spaced
    /// grid of 10³ points in [1e-6, 1e6]: `f` finite and strictly monotone,
    /// `f⁻¹(f(r)) = r` and `g(f(r)) = f(1/r)` to 1e-10 relative.
    pub fn custom(
        name: impl Into<String>,
        f: impl Fn(T) -> T + Send + Sync + 'static,
        f_inverse: impl Fn(T) -> T + Send + Sync + 'static,
        g: impl Fn(T) -> T + Send + Sync + 'static,
        g_prime: impl Fn(T) -> T + Send + Sync + 'static,
    ) -> Result<Self> {
        let family = CustomFamily {
            name: name.into(),
            f: Arc::new(f),
            f_inverse: Arc::new(f_inverse),
            g: Arc::new(g),
            g_prime: Arc::new(g_prime),
        };
        validate_custom(&family)?;
        Ok(Self::Custom(family))
    }

    /// `ω = f(r)`.
    pub fn f(&self, r: T) -> T {
        match self {
            Self::Log { z } => r.ln() / *z,
            Self::Power { alpha } => r.powf(*alpha),
            Self::Exp { kappa } => (*kappa * r).exp(),
            Self::Custom(c) => (c.f)(r),
        }
    }

    /// `r = f⁻¹(ω)`.
    pub fn f_inverse(&self, omega: T) -> T {
        match self {
            Self::Log { z } => (*z * omega).exp(),
            Self::Power { alpha } => omega.powf(T::one() / *alpha),
            Self::Exp { kappa } => omega.ln() / *kappa,
            Self::Custom(c) => (c.f_inverse)(omega),
        }
    }

    /// Companion `g` with `f(1/r) = g(f(r))`.
    pub fn g(&self, omega: T) -> T {
        match self {
            Self::Log { .. } => -omega,
            Self::Power { .. } => T::one() / omega,
            Self::Exp { kappa } => {
                let log = omega.ln();
                if log == T::zero() {
                    // ω = 1 is unreachable from r > 0; fp underflow lands here
                    return nan();
                }
                (*kappa * *kappa / log).exp()
            }
            Self::Custom(c) => (c.g)(omega),
        }
    }

    /// Derivative of `g`.
    pub fn g_prime(&self, omega: T) -> T {
        match self {
            Self::Log { .. } => -T::one(),
            Self::Power { .. } => -T::one() / (omega * omega),
            Self::Exp { kappa } => {
                let log = omega.ln();
                if log == T::zero() {
                    return nan();
                }
                let k2 = *kappa * *kappa;
                -(k2 / log).exp() * k2 / (omega * log * log)
            }
            Self::Custom(c) => (c.g_prime)(omega),
        }
    }

    /// Canonical display name, parseable by the CLI layer.
    pub fn label(&self) -> String {
        match self {
            Self::Log { z } => format!("log(z={})", approx_f64(*z)),
            Self::Power { alpha } => format!("power(alpha={})", approx_f64(*alpha)),
            Self::Exp { kappa } => format!("exp(kappa={})", approx_f64(*kappa)),
            Self::Custom(c) => format!("custom({})", c.name),
        }
    }
}

fn validate_custom<T: Scalar>(family: &CustomFamily<T>) -> Result<()> {
    let grid = log_grid::<T>(1e-6, 1e6, 1000);
    let rel_tol = real::<T>(1e-10);
    let mut prev: Option<T> = None;
    let mut direction: Option<bool> = None;
    for &r in &grid {
        let fr = (family.f)(r);
        if !fr.is_finite() {
            return Err(Error::NonInvertibleCustom {
                reason: format!("f not finite at r = {:e}", approx_f64(r)),
            });
        }
        if let Some(p) = prev {
            if fr == p {
                return Err(Error::NonInvertibleCustom {
                    reason: format!("f not strictly monotone near r = {:e}", approx_f64(r)),
                });
            }
            let increasing = fr > p;
            match direction {
                None => direction = Some(increasing),
                Some(d) if d != increasing => {
                    return Err(Error::NonInvertibleCustom {
                        reason: format!("f changes direction near r = {:e}", approx_f64(r)),
                    })
                }
                _ => {}
            }
        }
        prev = Some(fr);
        let back = (family.f_inverse)(fr);
        if !close_rel(back, r, rel_tol) {
            return Err(Error::NonInvertibleCustom {
                reason: format!(
                    "f_inverse(f(r)) = {:e} differs from r = {:e}",
                    approx_f64(back),
                    approx_f64(r)
                ),
            });
        }
        let via_g = (family.g)(fr);
        let direct = (family.f)(T::one() / r);
        if !close_rel(via_g, direct, rel_tol) {
            return Err(Error::NonInvertibleCustom {
                reason: format!("g(f(r)) != f(1/r) at r = {:e}", approx_f64(r)),
            });
        }
    }
    Ok(())
}

fn close_rel<T: Scalar>(a: T, b: T, rel_tol: T) -> bool {
    let scale = T::one().max(a.abs()).max(b.abs());
    (a - b).abs() <= rel_tol * scale
}

fn log_grid<T: Scalar>(lo: f64, hi: f64, points: usize) -> Vec<T> {
    let (log_lo, log_hi) = (lo.ln(), hi.ln());
    (0..points)
        .map(|i| {
            let t = i as f64 / (points - 1) as f64;
            real::<T>((log_lo + t * (log_hi - log_lo)).exp())
        })
        .collect()
}

/// Per-pair realizations of the ω random variable, forward and reverse,
/// aligned with the support pairs of the ratio table they came from.
#[derive(Debug, Clone)]
pub struct OmegaTable<T> {
    pairs: Vec<(usize, usize)>,
    omega_f: Vec<T>,
    omega_r: Vec<T>,
}

impl<T: Scalar> OmegaTable<T> {
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn omega_forward(&self) -> &[T] {
        &self.omega_f
    }

    pub fn omega_reverse(&self) -> &[T] {
        &self.omega_r
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Evaluate `ω_F = f(r)` and `ω_R = g(ω_F)` on every support pair.
///
/// `ω_R` is computed through `g` so that structural identities (`ω_R = −ω_F`
/// for the log family) hold at floating-point exactness; agreement with
/// `f(1/r)` is a checked property of valid families.
pub fn omega_variables<T: Scalar>(
    ratios: &RatioTable<T>,
    family: &FFamily<T>,
) -> Result<OmegaTable<T>> {
    let mut omega_f = Vec::with_capacity(ratios.len());
    let mut omega_r = Vec::with_capacity(ratios.len());
    for ((x, y), r) in ratios.iter() {
        let wf = family.f(r);
        if !wf.is_finite() {
            return Err(Error::DomainError {
                context: format!("f undefined at ratio of pair ({x}, {y})"),
                value: approx_f64(r),
            });
        }
        let wr = family.g(wf);
        if !wr.is_finite() {
            return Err(Error::DomainError {
                context: format!("g undefined at omega of pair ({x}, {y})"),
                value: approx_f64(wf),
            });
        }
        omega_f.push(wf);
        omega_r.push(wr);
    }
    Ok(OmegaTable {
        pairs: ratios.pairs().to_vec(),
        omega_f,
        omega_r,
    })
}

/// A purely atomic probability measure on the real line.
#[derive(Debug, Clone)]
pub struct DiscreteMeasure<T> {
    atoms: Vec<(T, T)>,
    merge_tol: T,
}

impl<T: Scalar> DiscreteMeasure<T> {
    /// Rebuild a measure from already-clustered atoms (e.g. read back from a
    /// report). Atoms are sorted; weights must be nonnegative.
    pub fn from_atoms(mut atoms: Vec<(T, T)>, merge_tol: T) -> Result<Self> {
        for (index, &(v, w)) in atoms.iter().enumerate() {
            if w < T::zero() {
                return Err(Error::NegativeMass {
                    index,
                    value: approx_f64(w),
                });
            }
            if !v.is_finite() {
                return Err(Error::DomainError {
                    context: "atom location not finite".into(),
                    value: approx_f64(v),
                });
            }
        }
        atoms.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite atom locations"));
        Ok(Self { atoms, merge_tol })
    }

    /// Atoms as `(value, weight)`, ascending in value.
    pub fn atoms(&self) -> &[(T, T)] {
        &self.atoms
    }

    pub fn merge_tol(&self) -> T {
        self.merge_tol
    }

    pub fn total_mass(&self) -> T {
        self.atoms.iter().fold(T::zero(), |acc, &(_, w)| acc + w)
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Atom whose location is within `tol` of `value`, if any.
    pub fn atom_near(&self, value: T, tol: T) -> Option<(T, T)> {
        self.atoms
            .iter()
            .copied()
            .filter(|&(v, _)| (v - value).abs() <= tol)
            .min_by(|a, b| {
                let da = (a.0 - value).abs();
                let db = (b.0 - value).abs();
                da.partial_cmp(&db).expect("finite atom locations")
            })
    }
}

/// Distribution of an ω variable under a joint process: atom weights are the
/// joint masses, atom locations come from single-linkage clustering of the
/// ω values with gap `merge_tol` (weighted means within a cluster).
pub fn measure_of<T: Scalar>(
    joint: &JointProcess<T>,
    pairs: &[(usize, usize)],
    omega_values: &[T],
    merge_tol: T,
) -> Result<DiscreteMeasure<T>> {
    if pairs.len() != omega_values.len() {
        return Err(Error::DimensionMismatch {
            context: format!(
                "{} omega values for {} pairs",
                omega_values.len(),
                pairs.len()
            ),
        });
    }
    // ω must be defined wherever the joint puts mass
    let mut covered = vec![false; joint.x_alphabet().len() * joint.y_alphabet().len()];
    let width = joint.y_alphabet().len();
    for &(x, y) in pairs {
        covered[x * width + y] = true;
    }
    for (x, y) in joint.support_pairs() {
        if !covered[x * width + y] {
            return Err(Error::DomainError {
                context: format!(
                    "omega undefined on support pair ({}, {})",
                    joint.x_alphabet().label(x),
                    joint.y_alphabet().label(y)
                ),
                value: approx_f64(joint.entry(x, y)),
            });
        }
    }
    measure_on_pairs(joint, pairs, omega_values, merge_tol)
}

/// Like [`measure_of`] but summing only the joint mass sitting on `pairs`,
/// for processes whose supports deliberately leak past the common support
/// (microcanonical shells of unequal size). The result is then a
/// sub-probability measure.
pub fn measure_on_pairs<T: Scalar>(
    joint: &JointProcess<T>,
    pairs: &[(usize, usize)],
    omega_values: &[T],
    merge_tol: T,
) -> Result<DiscreteMeasure<T>> {
    if pairs.len() != omega_values.len() {
        return Err(Error::DimensionMismatch {
            context: format!(
                "{} omega values for {} pairs",
                omega_values.len(),
                pairs.len()
            ),
        });
    }
    let mut weighted: Vec<(T, T)> = pairs
        .iter()
        .zip(omega_values)
        .map(|(&(x, y), &w)| (w, joint.entry(x, y)))
        .filter(|&(_, mass)| mass > T::zero())
        .collect();
    weighted.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite omega values"));
    let mut atoms: Vec<(T, T)> = Vec::new();
    let mut cluster: Vec<(T, T)> = Vec::new();
    let flush = |cluster: &mut Vec<(T, T)>, atoms: &mut Vec<(T, T)>| {
        if cluster.is_empty() {
            return;
        }
        let weight = cluster.iter().fold(T::zero(), |acc, &(_, w)| acc + w);
        let location = cluster
            .iter()
            .fold(T::zero(), |acc, &(v, w)| acc + v * w)
            / weight;
        atoms.push((location, weight));
        cluster.clear();
    };
    for (value, mass) in weighted {
        if let Some(&(last, _)) = cluster.last() {
            if value - last > merge_tol {
                flush(&mut cluster, &mut atoms);
            }
        }
        cluster.push((value, mass));
    }
    flush(&mut cluster, &mut atoms);
    Ok(DiscreteMeasure { atoms, merge_tol })
}

/// Forward measure `μ_F` of `ω_F` under `P_F`.
pub fn forward_measure<T: Scalar>(
    pf: &JointProcess<T>,
    omega: &OmegaTable<T>,
    merge_tol: T,
) -> Result<DiscreteMeasure<T>> {
    measure_of(pf, omega.pairs(), omega.omega_forward(), merge_tol)
}

/// Reverse measure `μ_R` of `ω_R` under `P_R`.
pub fn reverse_measure<T: Scalar>(
    pr: &JointProcess<T>,
    omega: &OmegaTable<T>,
    merge_tol: T,
) -> Result<DiscreteMeasure<T>> {
    measure_of(pr, omega.pairs(), omega.omega_reverse(), merge_tol)
}

/// One row of the discrete Crooks check.
#[derive(Debug, Clone, Copy)]
pub struct CrooksResidual<T> {
    /// Forward atom location ω.
    pub omega: T,
    /// Matched reverse location `g(ω)`.
    pub target: T,
    pub forward_weight: T,
    pub reverse_weight: T,
    /// `|w_R(g(ω)) − f⁻¹(g(ω))·w_F(ω)|`.
    pub residual: T,
}

/// Atomwise Crooks-type relation.
///
/// For point masses the density Jacobian `|g′|` cancels: re-running the
/// δ-function computation on atoms gives `w_R(g(ω)) = f⁻¹(g(ω))·w_F(ω)`.
pub fn crooks_residuals<T: Scalar>(
    mu_f: &DiscreteMeasure<T>,
    mu_r: &DiscreteMeasure<T>,
    family: &FFamily<T>,
) -> Result<Vec<CrooksResidual<T>>> {
    let tol = mu_f.merge_tol().max(mu_r.merge_tol());
    let mut rows = Vec::with_capacity(mu_f.len());
    for &(omega, forward_weight) in mu_f.atoms() {
        if forward_weight <= T::zero() {
            continue;
        }
        let target = family.g(omega);
        if !target.is_finite() {
            return Err(Error::DomainError {
                context: "g undefined at forward atom".into(),
                value: approx_f64(omega),
            });
        }
        let (matched, reverse_weight) = match mu_r.atom_near(target, tol) {
            Some(atom) => atom,
            None => {
                return Err(Error::MissingReverseAtom {
                    target: approx_f64(target),
                    weight: approx_f64(forward_weight),
                })
            }
        };
        let predicted = family.f_inverse(target) * forward_weight;
        rows.push(CrooksResidual {
            omega,
            target: matched,
            forward_weight,
            reverse_weight,
            residual: (reverse_weight - predicted).abs(),
        });
    }
    Ok(rows)
}

/// Largest atom residual, 0 for an empty table.
pub fn max_crooks_residual<T: Scalar>(rows: &[CrooksResidual<T>]) -> T {
    rows.iter()
        .fold(T::zero(), |acc, row| acc.max(row.residual))
}

/// `⟨f⁻¹(g(ω))⟩_F = Σ P_F(x,y)·f⁻¹(g(ω_F(x,y)))`; equals 1 exactly when the
/// reverse process is normalized on the forward support.
pub fn jarzynski_average<T: Scalar>(
    pf: &JointProcess<T>,
    omega: &OmegaTable<T>,
    family: &FFamily<T>,
) -> Result<T> {
    let mut indexed = vec![None; pf.x_alphabet().len() * pf.y_alphabet().len()];
    let width = pf.y_alphabet().len();
    for (&(x, y), &wf) in omega.pairs().iter().zip(omega.omega_forward()) {
        indexed[x * width + y] = Some(wf);
    }
    let mut acc = T::zero();
    for (x, y) in pf.support_pairs() {
        let wf = indexed[x * width + y].ok_or_else(|| Error::DomainError {
            context: format!(
                "omega undefined on support pair ({}, {})",
                pf.x_alphabet().label(x),
                pf.y_alphabet().label(y)
            ),
            value: approx_f64(pf.entry(x, y)),
        })?;
        let term = family.f_inverse(family.g(wf));
        if !term.is_finite() {
            return Err(Error::DomainError {
                context: "f_inverse(g(omega)) not finite".into(),
                value: approx_f64(wf),
            });
        }
        acc += pf.entry(x, y) * term;
    }
    Ok(acc)
}

/// Value of an f-divergence; `Infinite` marks forward mass outside the
/// reverse support, reported as a value so pipelines can tabulate it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FDivergence<T> {
    Finite(T),
    Infinite,
}

impl<T: Scalar> FDivergence<T> {
    pub fn finite(&self) -> Option<T> {
        match self {
            Self::Finite(v) => Some(*v),
            Self::Infinite => None,
        }
    }
}

/// `D_f(P_F‖P_R) = Σ P_F·f(P_F/P_R)`. `f = ln` gives the Kullback–Leibler
/// divergence, `f = r^α` the Hellinger–Rényi family.
pub fn f_divergence<T: Scalar>(
    pf: &JointProcess<T>,
    pr: &JointProcess<T>,
    f: impl Fn(T) -> T,
) -> Result<FDivergence<T>> {
    if pf.x_alphabet() != pr.x_alphabet() || pf.y_alphabet() != pr.y_alphabet() {
        return Err(Error::AlphabetMismatch {
            context: "divergence between processes on different alphabets".into(),
        });
    }
    let mut acc = T::zero();
    for x in 0..pf.x_alphabet().len() {
        for y in 0..pf.y_alphabet().len() {
            let pfv = pf.entry(x, y);
            if pfv == T::zero() {
                continue;
            }
            let prv = pr.entry(x, y);
            if prv == T::zero() {
                return Ok(FDivergence::Infinite);
            }
            let term = f(pfv / prv);
            if !term.is_finite() {
                return Err(Error::DomainError {
                    context: "f undefined at a probability ratio".into(),
                    value: approx_f64(pfv / prv),
                });
            }
            acc += pfv * term;
        }
    }
    Ok(FDivergence::Finite(acc))
}

/// Mass-conservation check used by reports: `Σ atom weights` vs
/// `Σ joint entries`.
pub fn measure_mass_residual<T: Scalar>(
    measure: &DiscreteMeasure<T>,
    joint: &JointProcess<T>,
) -> T {
    (measure.total_mass() - joint.total_mass()).abs()
}
