//! Executable reconstructions of the standard thermodynamic setups: closed
//! driven two-measurement protocols, deterministic Hamiltonian dynamics with
//! thermal or microcanonical priors, system–reservoir coarse-graining with
//! hybrid reversal, work/relaxation steps, and the general-channel
//! two-measurement scheme with its nonequilibrium potential.
//!
//! Conventions: `k_B = 1`, temperature enters only through `β`, so entropies
//! are dimensionless and `ΔS`, `Σ` can be compared directly with `ln r`.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::alphabet::Alphabet;
use crate::error::{Error, Result};
use crate::fluctuation::{
    crooks_residuals, f_divergence, forward_measure, jarzynski_average, max_crooks_residual,
    measure_on_pairs, omega_variables, reverse_measure, DiscreteMeasure, FDivergence, FFamily,
};
use crate::prob::{
    bayes_reverse_channel, forward_process, forward_reverse_ratio,
    forward_reverse_ratio_on_common_support, reverse_process, steady_state, supports_coincide,
    Distribution, JointProcess, RatioTable, StochasticChannel,
};
use crate::quantum::{basis_preparations, linalg::trace_re, KrausChannel, Povm, QuantumProcess};
use crate::scalar::{approx_f64, real, tol_fix, Scalar};

/// A forward/reverse pair with its ratio table, per-pair observables, and
/// thermodynamic metadata, ready for the fluctuation identities.
#[derive(Debug, Clone)]
pub struct ScenarioRun<T> {
    pub forward: JointProcess<T>,
    pub reverse: JointProcess<T>,
    pub ratio: RatioTable<T>,
    /// Named per-pair observables aligned with `ratio.pairs()` (e.g. `W`,
    /// `dS`, `Sigma`).
    pub labels: Vec<(String, Vec<T>)>,
    pub beta: Option<T>,
    pub delta_f: Option<T>,
    pub efficacy: Option<T>,
    /// Steady state the reversal was built on, when one exists.
    pub gamma: Option<Distribution<T>>,
    /// Whether `P_F > 0 ⇔ P_R > 0` everywhere; the integral identities only
    /// hold when this is true.
    pub supports_coincide: bool,
}

impl<T: Scalar> ScenarioRun<T> {
    pub fn label_values(&self, name: &str) -> Option<&[T]> {
        self.labels
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
    }
}

/// Thermal prior specification: `p(x) ∝ e^{−βE_x}`.
#[derive(Debug, Clone)]
pub struct ThermalSpec<T> {
    pub energies: Vec<T>,
    pub beta: T,
}

impl<T: Scalar> ThermalSpec<T> {
    pub fn new(energies: Vec<T>, beta: T) -> Result<Self> {
        if beta <= T::zero() {
            return Err(Error::DomainError {
                context: "inverse temperature must be positive".into(),
                value: approx_f64(beta),
            });
        }
        Ok(Self { energies, beta })
    }

    pub fn distribution(&self, alphabet: Alphabet) -> Result<Distribution<T>> {
        thermal_distribution(alphabet, &self.energies, self.beta)
    }

    /// `ln Σ e^{−βE}`.
    pub fn log_partition(&self) -> T {
        log_partition(&self.energies, self.beta)
    }

    /// `F = −(1/β)·ln Z`.
    pub fn free_energy(&self) -> T {
        -self.log_partition() / self.beta
    }
}

pub fn thermal_distribution<T: Scalar>(
    alphabet: Alphabet,
    energies: &[T],
    beta: T,
) -> Result<Distribution<T>> {
    if energies.len() != alphabet.len() {
        return Err(Error::DimensionMismatch {
            context: format!(
                "{} energies for {} labels",
                energies.len(),
                alphabet.len()
            ),
        });
    }
    let e_min = energies
        .iter()
        .copied()
        .fold(energies[0], |acc, v| acc.min(v));
    let weights = energies
        .iter()
        .map(|&e| (-beta * (e - e_min)).exp())
        .collect();
    Distribution::from_weights(alphabet, weights)
}

pub fn log_partition<T: Scalar>(energies: &[T], beta: T) -> T {
    let e_min = energies
        .iter()
        .copied()
        .fold(energies[0], |acc, v| acc.min(v));
    let shifted = energies
        .iter()
        .fold(T::zero(), |acc, &e| acc + (-beta * (e - e_min)).exp());
    shifted.ln() - beta * e_min
}

fn per_pair<T: Scalar>(ratio: &RatioTable<T>, f: impl Fn(usize, usize) -> T) -> Vec<T> {
    ratio.pairs().iter().map(|&(x, y)| f(x, y)).collect()
}

fn require_full_support<T: Scalar>(gamma: &Distribution<T>) -> Result<()> {
    for (i, &g) in gamma.mass().iter().enumerate() {
        if g <= T::zero() {
            return Err(Error::SingularSteadyState {
                label: gamma.alphabet().label(i).to_string(),
            });
        }
    }
    Ok(())
}

/// Generic Bayesian scenario: reverse a channel against an explicit invariant
/// `γ` (full support required) and assemble the forward/reverse pair for the
/// priors `p`, `q`.
pub fn bayesian_scenario_with_gamma<T: Scalar>(
    channel: &StochasticChannel<T>,
    gamma: &Distribution<T>,
    p: &Distribution<T>,
    q: &Distribution<T>,
) -> Result<ScenarioRun<T>> {
    require_full_support(gamma)?;
    let reversed = bayes_reverse_channel(channel, gamma)?;
    let forward = forward_process(p, channel)?;
    let reverse = reverse_process(q, &reversed)?;
    let ratio = forward_reverse_ratio(&forward, &reverse)?;
    let coincide = supports_coincide(&forward, &reverse)?;
    Ok(ScenarioRun {
        forward,
        reverse,
        ratio,
        labels: Vec::new(),
        beta: None,
        delta_f: None,
        efficacy: None,
        gamma: Some(gamma.clone()),
        supports_coincide: coincide,
    })
}

/// As above but taking `γ` from the unique steady state of the channel.
pub fn bayesian_scenario<T: Scalar>(
    channel: &StochasticChannel<T>,
    p: &Distribution<T>,
    q: &Distribution<T>,
) -> Result<ScenarioRun<T>> {
    let ss = steady_state(channel, None)?;
    if !ss.unique {
        return Err(Error::NonUniqueSteadyState);
    }
    bayesian_scenario_with_gamma(channel, &ss.gamma, p, q)
}

/// Two-measurement protocol for a closed driven system: projective energy
/// measurements of `H₀` (levels `eps`) and `H_τ` (levels `eta`) around a
/// unitary drive, thermal priors at the same `β` on both ends. The induced
/// transition `φ(y|x) = |U[y,x]|²` is doubly stochastic, the reverse
/// transition is its transpose, and the ratio is `e^{β(W−ΔF)}` with
/// `W = η_y − ε_x`.
pub fn tasaki_scenario<T: Scalar>(
    eps: &[T],
    eta: &[T],
    unitary: &DMatrix<nalgebra::Complex<T>>,
    beta: T,
) -> Result<ScenarioRun<T>> {
    let d = eps.len();
    if eta.len() != d || unitary.nrows() != d || unitary.ncols() != d {
        return Err(Error::DimensionMismatch {
            context: format!(
                "eps: {}, eta: {}, unitary: {}x{}",
                eps.len(),
                eta.len(),
                unitary.nrows(),
                unitary.ncols()
            ),
        });
    }
    // rejects non-unitary drives
    KrausChannel::from_unitary(unitary.clone())?;
    let alphabet = Alphabet::indexed(d);
    let rows: Vec<Vec<T>> = (0..d)
        .map(|x| (0..d).map(|y| unitary[(y, x)].norm_sqr()).collect())
        .collect();
    let channel = StochasticChannel::new(alphabet.clone(), alphabet.clone(), rows)?;
    let gamma = Distribution::uniform(alphabet.clone());
    let p = thermal_distribution(alphabet.clone(), eps, beta)?;
    let q = thermal_distribution(alphabet, eta, beta)?;
    let delta_f = -(log_partition(eta, beta) - log_partition(eps, beta)) / beta;
    let mut run = bayesian_scenario_with_gamma(&channel, &gamma, &p, &q)?;
    let work = per_pair(&run.ratio, |x, y| eta[y] - eps[x]);
    run.labels.push(("W".into(), work));
    run.beta = Some(beta);
    run.delta_f = Some(delta_f);
    Ok(run)
}

/// Prior choices for deterministic Hamiltonian dynamics.
#[derive(Debug, Clone)]
pub enum HamiltonianPriors<T> {
    /// Thermal with respect to the non-driven `H₀` on both ends
    /// (Bochkov–Kuzovlev): `r = e^{β(H₀(x′) − H₀(x))}`, so the unit-average
    /// identity reads `⟨e^{−β·dE0}⟩_F = 1`.
    Thermal { energies: Vec<T>, beta: T },
    /// Microcanonical shells: uniform on `{x : E_x = E}` forward and
    /// `{x′ : E′_{x′} = E′}` backward, giving `r = N(E′)/N(E)`.
    Microcanonical {
        initial_energies: Vec<T>,
        final_energies: Vec<T>,
        initial_shell: T,
        final_shell: T,
    },
}

/// Deterministic (Hamiltonian) dynamics `x → perm(x)`: a doubly stochastic
/// permutation channel with uniform `γ`, reversed by the inverse
/// permutation.
pub fn deterministic_hamiltonian_scenario<T: Scalar>(
    perm: &[usize],
    priors: &HamiltonianPriors<T>,
) -> Result<ScenarioRun<T>> {
    let n = perm.len();
    let alphabet = Alphabet::indexed(n);
    let channel = StochasticChannel::from_permutation(alphabet.clone(), perm)?;
    let gamma = Distribution::uniform(alphabet.clone());
    match priors {
        HamiltonianPriors::Thermal { energies, beta } => {
            if energies.len() != n {
                return Err(Error::DimensionMismatch {
                    context: format!("{} energies for {} labels", energies.len(), n),
                });
            }
            let p = thermal_distribution(alphabet.clone(), energies, *beta)?;
            let q = thermal_distribution(alphabet, energies, *beta)?;
            let mut run = bayesian_scenario_with_gamma(&channel, &gamma, &p, &q)?;
            let drive = per_pair(&run.ratio, |x, y| energies[y] - energies[x]);
            run.labels.push(("dE0".into(), drive));
            run.beta = Some(*beta);
            run.delta_f = Some(T::zero());
            Ok(run)
        }
        HamiltonianPriors::Microcanonical {
            initial_energies,
            final_energies,
            initial_shell,
            final_shell,
        } => {
            if initial_energies.len() != n || final_energies.len() != n {
                return Err(Error::DimensionMismatch {
                    context: format!("shell energies for {n} labels"),
                });
            }
            let p = shell_prior(&alphabet, initial_energies, *initial_shell)?;
            let q = shell_prior(&alphabet, final_energies, *final_shell)?;
            let reversed = bayes_reverse_channel(&channel, &gamma)?;
            let forward = forward_process(&p, &channel)?;
            let reverse = reverse_process(&q, &reversed)?;
            // shells of different size leak support on purpose; only the
            // detailed ratios survive, so the strict constructor is not used
            let ratio = forward_reverse_ratio_on_common_support(&forward, &reverse)?;
            let coincide = supports_coincide(&forward, &reverse)?;
            let n_initial = p.support_indices().len();
            let n_final = q.support_indices().len();
            let ds = (real::<T>(n_final as f64) / real::<T>(n_initial as f64)).ln();
            let ds_values = vec![ds; ratio.len()];
            Ok(ScenarioRun {
                forward,
                reverse,
                ratio,
                labels: vec![("dS".into(), ds_values)],
                beta: None,
                delta_f: None,
                efficacy: None,
                gamma: Some(gamma),
                supports_coincide: coincide,
            })
        }
    }
}

fn shell_prior<T: Scalar>(
    alphabet: &Alphabet,
    energies: &[T],
    shell: T,
) -> Result<Distribution<T>> {
    let weights: Vec<T> = energies
        .iter()
        .map(|&e| if e == shell { T::one() } else { T::zero() })
        .collect();
    if weights.iter().all(|&w| w == T::zero()) {
        return Err(Error::EmptyShell {
            energy: approx_f64(shell),
        });
    }
    Distribution::from_weights(alphabet.clone(), weights)
}

/// Coarse-grained transition tables of the system–reservoir scenario:
/// `forward[(x, col(x′, k))] = φ(x′, ΔS_k | x)` and
/// `reverse[(x′, col(x, k))] = φ̂(x, −ΔS_k | x′)`.
#[derive(Debug, Clone)]
pub struct CoarseGrainedTables<T> {
    pub system: Alphabet,
    pub ds_values: Vec<T>,
    pub forward: DMatrix<T>,
    pub reverse: DMatrix<T>,
}

impl<T: Scalar> CoarseGrainedTables<T> {
    pub fn column(&self, x: usize, ds_index: usize) -> usize {
        x * self.ds_values.len() + ds_index
    }

    /// Max residual of `φ(x′,ΔS|x) − e^{ΔS}·φ̂(x,−ΔS|x′)` over all triples.
    pub fn hybrid_reversal_residual(&self) -> T {
        let n = self.system.len();
        let k = self.ds_values.len();
        let mut worst = T::zero();
        for x in 0..n {
            for xp in 0..n {
                for s in 0..k {
                    let fwd = self.forward[(x, xp * k + s)];
                    let rev = self.reverse[(xp, x * k + s)];
                    let residual = (fwd - self.ds_values[s].exp() * rev).abs();
                    worst = worst.max(residual);
                }
            }
        }
        worst
    }
}

/// Result of the system–reservoir coarse-graining scenario.
#[derive(Debug, Clone)]
pub struct Jarz2000Scenario<T> {
    pub run: ScenarioRun<T>,
    pub tables: CoarseGrainedTables<T>,
}

/// Hamiltonian system–reservoir dynamics, coarse-grained over the reservoir.
///
/// The joint evolution is the permutation `perm` on pairs `(x, w)` indexed
/// `x·|W| + w`; the reservoir priors are thermal at `β` on both ends; the
/// entropy label is `ΔS = β(E_{w′} − E_w)`. The reverse table is computed
/// through the retrodicted joint dynamics and the final-time reservoir
/// prior, not copied from the forward table, so the identity
/// `φ(x′,ΔS|x)/φ̂(x,−ΔS|x′) = e^{ΔS}` is a genuine cross-check.
pub fn jarz2000_scenario<T: Scalar>(
    system_size: usize,
    perm: &[usize],
    reservoir_energies: &[T],
    beta: T,
    p: &Distribution<T>,
    q: &Distribution<T>,
) -> Result<Jarz2000Scenario<T>> {
    let n_w = reservoir_energies.len();
    let n = system_size * n_w;
    if perm.len() != n {
        return Err(Error::DimensionMismatch {
            context: format!(
                "permutation on {} pairs for |X| = {}, |W| = {}",
                perm.len(),
                system_size,
                n_w
            ),
        });
    }
    if p.len() != system_size || q.len() != system_size {
        return Err(Error::DimensionMismatch {
            context: "system priors must live on the system alphabet".into(),
        });
    }
    // validity of the permutation
    let joint_alphabet = Alphabet::indexed(n);
    StochasticChannel::<T>::from_permutation(joint_alphabet, perm)?;

    let system = Alphabet::indexed(system_size);
    let reservoir_prior = thermal_distribution(
        Alphabet::indexed(n_w),
        reservoir_energies,
        beta,
    )?;

    // entropy increments attained by the joint dynamics
    let raw_ds: Vec<T> = (0..n)
        .map(|i| {
            let w = i % n_w;
            let w_out = perm[i] % n_w;
            beta * (reservoir_energies[w_out] - reservoir_energies[w])
        })
        .collect();
    let (ds_values, cluster_of) = cluster_scalars(&raw_ds, real(1e-9));
    let k = ds_values.len();

    let mut forward = DMatrix::<T>::zeros(system_size, system_size * k);
    let mut reverse = DMatrix::<T>::zeros(system_size, system_size * k);
    for x in 0..system_size {
        for w in 0..n_w {
            let i = x * n_w + w;
            let x_out = perm[i] / n_w;
            let w_out = perm[i] % n_w;
            let s = cluster_of[i];
            // forward: sum of initial-reservoir thermal weights
            forward[(x, x_out * k + s)] += reservoir_prior.get(w);
            // reverse: retrodicted joint dynamics weighted by the
            // final-time reservoir prior Q(w′) ∝ e^{−βE_{w′}}
            reverse[(x_out, x * k + s)] += reservoir_prior.get(w_out);
        }
    }
    let tables = CoarseGrainedTables {
        system: system.clone(),
        ds_values: ds_values.clone(),
        forward: forward.clone(),
        reverse: reverse.clone(),
    };

    // joint processes over X × (X′ × ΔS)
    let out_labels: Vec<String> = (0..system_size)
        .flat_map(|xp| {
            let ds = &ds_values;
            (0..k).map(move |s| format!("{xp}|dS={}", approx_f64(ds[s])))
        })
        .collect();
    let out_alphabet = Alphabet::new(out_labels)?;
    let mut pf = DMatrix::<T>::zeros(system_size, system_size * k);
    let mut pr = DMatrix::<T>::zeros(system_size, system_size * k);
    for x in 0..system_size {
        for col in 0..system_size * k {
            pf[(x, col)] = p.get(x) * forward[(x, col)];
            let xp = col / k;
            let s = col % k;
            pr[(x, col)] = q.get(xp) * reverse[(xp, x * k + s)];
        }
    }
    let forward_joint = JointProcess::new(
        system.clone(),
        out_alphabet.clone(),
        pf,
        crate::prob::Direction::Forward,
    )?;
    let reverse_joint = JointProcess::new(
        system,
        out_alphabet,
        pr,
        crate::prob::Direction::Reverse,
    )?;
    let coincide = supports_coincide(&forward_joint, &reverse_joint)?;
    let ratio = forward_reverse_ratio(&forward_joint, &reverse_joint)?;
    let ds_label = per_pair(&ratio, |_, col| ds_values[col % k]);
    let run = ScenarioRun {
        forward: forward_joint,
        reverse: reverse_joint,
        ratio,
        labels: vec![("dS".into(), ds_label)],
        beta: Some(beta),
        delta_f: None,
        efficacy: None,
        gamma: None,
        supports_coincide: coincide,
    };
    Ok(Jarz2000Scenario { run, tables })
}

fn cluster_scalars<T: Scalar>(values: &[T], tol: T) -> (Vec<T>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite values"));
    let mut reps = Vec::new();
    let mut assignment = vec![0usize; values.len()];
    let mut members: Vec<usize> = Vec::new();
    let flush = |members: &mut Vec<usize>, reps: &mut Vec<T>, assignment: &mut Vec<usize>| {
        if members.is_empty() {
            return;
        }
        let mean = members
            .iter()
            .fold(T::zero(), |acc, &i| acc + values[i])
            / real::<T>(members.len() as f64);
        for &i in members.iter() {
            assignment[i] = reps.len();
        }
        reps.push(mean);
        members.clear();
    };
    for &i in &order {
        if let Some(&last) = members.last() {
            if values[i] - values[last] > tol {
                flush(&mut members, &mut reps, &mut assignment);
            }
        }
        members.push(i);
    }
    flush(&mut members, &mut reps, &mut assignment);
    (reps, assignment)
}

/// Canonical thermal-preserving relaxation: `φ = (1−λ)·I + λ·1γᵀ`.
pub fn lambda_thermalization<T: Scalar>(
    gamma: &Distribution<T>,
    lambda: T,
) -> Result<StochasticChannel<T>> {
    if lambda < T::zero() || lambda > T::one() {
        return Err(Error::DomainError {
            context: "mixing weight outside [0, 1]".into(),
            value: approx_f64(lambda),
        });
    }
    let n = gamma.len();
    let rows = (0..n)
        .map(|x| {
            (0..n)
                .map(|y| {
                    let mix = lambda * gamma.get(y);
                    if x == y {
                        mix + (T::one() - lambda)
                    } else {
                        mix
                    }
                })
                .collect()
        })
        .collect();
    StochasticChannel::new(gamma.alphabet().clone(), gamma.alphabet().clone(), rows)
}

/// One deterministic work step (energies `E_pre → E_post` per state)
/// followed by one relaxation step that preserves the thermal state of
/// `E_post`. Priors are thermal before and after; the work label is
/// `W(x) = E_post[x] − E_pre[x]` and the ratio is `e^{β(W−ΔF)}`.
pub fn crooks_work_relaxation_scenario<T: Scalar>(
    e_pre: &[T],
    e_post: &[T],
    relax: &StochasticChannel<T>,
    beta: T,
) -> Result<ScenarioRun<T>> {
    let n = e_pre.len();
    if e_post.len() != n || relax.input_alphabet().len() != n || !relax.is_square() {
        return Err(Error::DimensionMismatch {
            context: "energy lists and relaxation channel must share one alphabet".into(),
        });
    }
    let alphabet = relax.input_alphabet().clone();
    let gamma = thermal_distribution(alphabet.clone(), e_post, beta)?;
    let residual = relax.invariance_residual(&gamma)?;
    if residual > tol_fix() {
        return Err(Error::NotInvariant {
            residual: approx_f64(residual),
            tol: approx_f64(tol_fix::<T>()),
        });
    }
    let p = thermal_distribution(alphabet.clone(), e_pre, beta)?;
    let q = thermal_distribution(alphabet, e_post, beta)?;
    let delta_f = -(log_partition(e_post, beta) - log_partition(e_pre, beta)) / beta;
    let mut run = bayesian_scenario_with_gamma(relax, &gamma, &p, &q)?;
    let work = per_pair(&run.ratio, |x, _| e_post[x] - e_pre[x]);
    run.labels.push(("W".into(), work));
    run.beta = Some(beta);
    run.delta_f = Some(delta_f);
    Ok(run)
}

/// Two-measurement scheme around an arbitrary CPTP channel: basis
/// preparations `{|ε_x⟩}`, basis measurement `{|η_y⟩}`, thermal priors for
/// the level lists `eps`, `eta` at `β`.
///
/// The reversal reference is the steady state `γ` of the induced transition;
/// the per-pair entropy production is `Σ = β(ΔE − ΔΦ − ΔF)` with the
/// nonequilibrium potential `Φ_x = −(1/β)·ln γ(x)`. Also reports the
/// efficacy `Σ_{x,y} φ(y|x)·q(y)` of the non-normalized transpose
/// pseudo-reversal.
pub fn general_two_measurement_scenario<T: Scalar>(
    channel: &KrausChannel<T>,
    eps: &[T],
    eta: &[T],
    beta: T,
) -> Result<ScenarioRun<T>> {
    let d = channel.dim_in();
    if channel.dim_out() != d || eps.len() != d || eta.len() != d {
        return Err(Error::DimensionMismatch {
            context: "two-measurement scheme needs a square channel and matching level lists"
                .into(),
        });
    }
    let alphabet = Alphabet::indexed(d);
    let preparations = basis_preparations::<T>(d);
    let measurement = Povm::computational_basis(d);
    let mut rows = Vec::with_capacity(d);
    for rho in &preparations {
        let evolved = channel.apply_matrix(rho.matrix())?;
        let row: Vec<T> = (0..d)
            .map(|y| {
                let v = trace_re(&(measurement.element(y).matrix() * &evolved));
                if v < T::zero() && v >= real::<T>(-1e-12) {
                    T::zero()
                } else {
                    v
                }
            })
            .collect();
        rows.push(row);
    }
    let phi = StochasticChannel::new(alphabet.clone(), alphabet.clone(), rows)?;
    let ss = steady_state(&phi, None)?;
    if !ss.unique {
        return Err(Error::NonUniqueSteadyState);
    }
    require_full_support(&ss.gamma)?;
    let gamma = ss.gamma;

    let p = thermal_distribution(alphabet.clone(), eps, beta)?;
    let q = thermal_distribution(alphabet, eta, beta)?;
    let delta_f = -(log_partition(eta, beta) - log_partition(eps, beta)) / beta;
    let phi_potential: Vec<T> = gamma.mass().iter().map(|&g| -g.ln() / beta).collect();

    let mut run = bayesian_scenario_with_gamma(&phi, &gamma, &p, &q)?;
    let work = per_pair(&run.ratio, |x, y| eta[y] - eps[x]);
    let sigma = per_pair(&run.ratio, |x, y| {
        let de = eta[y] - eps[x];
        let dphi = phi_potential[y] - phi_potential[x];
        beta * (de - dphi - delta_f)
    });
    run.labels.push(("W".into(), work));
    run.labels.push(("Sigma".into(), sigma));
    run.beta = Some(beta);
    run.delta_f = Some(delta_f);
    let efficacy = (0..d).fold(T::zero(), |acc, y| {
        let column = (0..d).fold(T::zero(), |a, x| a + phi.entry(x, y));
        acc + q.get(y) * column
    });
    run.efficacy = Some(efficacy);
    Ok(run)
}

/// Qubit amplitude damping toward the thermal state of the level pair
/// `(ε₀, ε₁)` at inverse temperature `β`. Zero-temperature damping has an
/// absorbing steady state and falls outside the two-measurement scheme; the
/// thermal variant is the one with a full-support `γ`.
pub fn thermal_amplitude_damping<T: Scalar>(
    eta: T,
    eps0: T,
    eps1: T,
    beta: T,
) -> Result<KrausChannel<T>> {
    let z = (-beta * eps0).exp() + (-beta * eps1).exp();
    let ground = (-beta * eps0).exp() / z;
    KrausChannel::generalized_amplitude_damping(eta, ground)
}

/// Classical scenario inputs sampled reproducibly from a seed: a strictly
/// positive random channel (unique full-support steady state) and two random
/// full-support priors.
pub fn random_classical_scenario<T: Scalar>(
    dimension: usize,
    seed: u64,
) -> (StochasticChannel<T>, Distribution<T>, Distribution<T>) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let alphabet = Alphabet::indexed(dimension);
    let channel = random_positive_channel(&alphabet, &mut rng);
    let p = random_positive_distribution(&alphabet, &mut rng);
    let q = random_positive_distribution(&alphabet, &mut rng);
    (channel, p, q)
}

fn random_positive_channel<T: Scalar, R: Rng>(
    alphabet: &Alphabet,
    rng: &mut R,
) -> StochasticChannel<T> {
    let n = alphabet.len();
    let rows: Vec<Vec<T>> = (0..n)
        .map(|_| (0..n).map(|_| real::<T>(rng.random_range(0.1..1.1))).collect())
        .collect();
    let normalized = rows
        .into_iter()
        .map(|row| {
            let sum = row.iter().fold(T::zero(), |acc, &v| acc + v);
            row.into_iter().map(|v| v / sum).collect()
        })
        .collect();
    StochasticChannel::new(alphabet.clone(), alphabet.clone(), normalized)
        .expect("normalized positive rows are stochastic")
}

fn random_positive_distribution<T: Scalar, R: Rng>(
    alphabet: &Alphabet,
    rng: &mut R,
) -> Distribution<T> {
    let weights: Vec<T> = (0..alphabet.len())
        .map(|_| real::<T>(rng.random_range(0.1..1.1)))
        .collect();
    Distribution::from_weights(alphabet.clone(), weights)
        .expect("positive weights normalize")
}

/// Inputs of a randomized quantum two-measurement scenario.
#[derive(Debug, Clone)]
pub struct TwoMeasurementInputs<T: Scalar> {
    pub channel: KrausChannel<T>,
    pub eps: Vec<T>,
    pub eta: Vec<T>,
    pub beta: T,
}

/// Quantum two-measurement scenario inputs sampled reproducibly from a seed.
/// Channels are resampled (deterministically) until the induced transition
/// has a unique, strictly positive steady state.
pub fn random_two_measurement_inputs<T: Scalar>(
    dimension: usize,
    kraus_rank: usize,
    seed: u64,
) -> Result<TwoMeasurementInputs<T>> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let eps: Vec<T> = (0..dimension)
        .map(|_| real::<T>(rng.random_range(0.0..2.0)))
        .collect();
    let eta: Vec<T> = (0..dimension)
        .map(|_| real::<T>(rng.random_range(0.0..2.0)))
        .collect();
    let beta = real::<T>(rng.random_range(0.5..1.5));
    for _ in 0..32 {
        let channel = crate::quantum::random_kraus_channel::<T, _>(
            dimension,
            kraus_rank,
            &mut rng,
        )?;
        if two_measurement_steady_state_ok(&channel) {
            return Ok(TwoMeasurementInputs {
                channel,
                eps,
                eta,
                beta,
            });
        }
    }
    Err(Error::NoConvergence {
        what: "sampling a channel with a unique interior steady state".into(),
        residual: f64::NAN,
    })
}

fn two_measurement_steady_state_ok<T: Scalar>(channel: &KrausChannel<T>) -> bool {
    let d = channel.dim_in();
    let alphabet = Alphabet::indexed(d);
    let preparations = basis_preparations::<T>(d);
    let povm = Povm::<T>::computational_basis(d);
    let mut rows = Vec::with_capacity(d);
    for rho in &preparations {
        let evolved = match channel.apply_matrix(rho.matrix()) {
            Ok(m) => m,
            Err(_) => return false,
        };
        let row: Vec<T> = (0..d)
            .map(|y| trace_re(&(povm.element(y).matrix() * &evolved)).max(T::zero()))
            .collect();
        rows.push(row);
    }
    let phi = match StochasticChannel::new(alphabet.clone(), alphabet, rows) {
        Ok(c) => c,
        Err(_) => return false,
    };
    match steady_state(&phi, None) {
        Ok(ss) => ss.unique && ss.gamma.mass().iter().all(|&g| g > real::<T>(1e-8)),
        Err(_) => false,
    }
}

/// Everything a report needs about one f-family evaluated on a run.
#[derive(Debug, Clone)]
pub struct FamilyCheck<T> {
    pub family_label: String,
    pub jarzynski_average: T,
    pub max_crooks_residual: T,
    pub divergence: FDivergence<T>,
    pub mu_forward: DiscreteMeasure<T>,
    pub mu_reverse: DiscreteMeasure<T>,
    pub omega_forward: Vec<T>,
    pub omega_reverse: Vec<T>,
}

/// Evaluate the fluctuation identities of one family on a scenario run.
///
/// Runs whose supports deliberately leak (microcanonical shells) have ω
/// defined only on the common support; their measures and averages are
/// computed there and come back as sub-probability quantities.
pub fn evaluate_family<T: Scalar>(
    run: &ScenarioRun<T>,
    family: &FFamily<T>,
    merge_tol: T,
) -> Result<FamilyCheck<T>> {
    let omega = omega_variables(&run.ratio, family)?;
    let (mu_forward, mu_reverse, jarzynski) = if run.supports_coincide {
        (
            forward_measure(&run.forward, &omega, merge_tol)?,
            reverse_measure(&run.reverse, &omega, merge_tol)?,
            jarzynski_average(&run.forward, &omega, family)?,
        )
    } else {
        let mu_f = measure_on_pairs(
            &run.forward,
            omega.pairs(),
            omega.omega_forward(),
            merge_tol,
        )?;
        let mu_r = measure_on_pairs(
            &run.reverse,
            omega.pairs(),
            omega.omega_reverse(),
            merge_tol,
        )?;
        let mut average = T::zero();
        for (&(x, y), &wf) in omega.pairs().iter().zip(omega.omega_forward()) {
            average += run.forward.entry(x, y) * family.f_inverse(family.g(wf));
        }
        (mu_f, mu_r, average)
    };
    let rows = crooks_residuals(&mu_forward, &mu_reverse, family)?;
    let divergence = f_divergence(&run.forward, &run.reverse, |r| family.f(r))?;
    Ok(FamilyCheck {
        family_label: family.label(),
        jarzynski_average: jarzynski,
        max_crooks_residual: max_crooks_residual(&rows),
        divergence,
        mu_forward,
        mu_reverse,
        omega_forward: omega.omega_forward().to_vec(),
        omega_reverse: omega.omega_reverse().to_vec(),
    })
}

/// Quantum process matching a two-measurement scenario, for cross-checks of
/// the quantum retrodiction against the classical reversal.
pub fn two_measurement_process<T: Scalar>(
    channel: &KrausChannel<T>,
) -> Result<QuantumProcess<T>> {
    let d = channel.dim_in();
    QuantumProcess::with_steady_state(
        Alphabet::indexed(d),
        basis_preparations::<T>(d),
        channel.clone(),
        Povm::computational_basis(d),
    )
}
