//! Finite-alphabet probability objects and Bayesian channel reversal.
//!
//! The central construction: given a forward transition `φ(y|x)` and a
//! distribution `γ` invariant under it, the reverse transition is fixed by
//! `γ(y)·φ̂(x|y) = γ(x)·φ(y|x)`. Forward and reverse processes are then the
//! joints `p(x)φ(y|x)` and `q(y)φ̂(x|y)` for arbitrary priors `p`, `q`.

use nalgebra::DMatrix;

use crate::alphabet::Alphabet;
use crate::error::{Error, Result};
use crate::scalar::{approx_f64, real, tol_fix, tol_norm, Scalar};

/// Probability vector over a finite labeled alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution<T> {
    alphabet: Alphabet,
    mass: Vec<T>,
}

impl<T: Scalar> Distribution<T> {
    /// Validate a mass vector: nonnegative entries, total within `tol_norm`
    /// of 1. The fp remainder is divided out so the stored vector sums to 1.
    pub fn new(alphabet: Alphabet, mass: Vec<T>) -> Result<Self> {
        Self::new_with_tol(alphabet, mass, tol_norm())
    }

    pub fn new_with_tol(alphabet: Alphabet, mass: Vec<T>, tol: T) -> Result<Self> {
        if mass.len() != alphabet.len() {
            return Err(Error::DimensionMismatch {
                context: format!(
                    "{} masses for {} labels",
                    mass.len(),
                    alphabet.len()
                ),
            });
        }
        for (index, &value) in mass.iter().enumerate() {
            if value < T::zero() {
                return Err(Error::NegativeMass {
                    index,
                    value: approx_f64(value),
                });
            }
        }
        let sum = l1_sum(&mass);
        if (sum - T::one()).abs() > tol {
            return Err(Error::NotNormalized {
                sum: approx_f64(sum),
                tol: approx_f64(tol),
            });
        }
        let mass = mass.into_iter().map(|m| m / sum).collect();
        Ok(Self { alphabet, mass })
    }

    /// Normalize arbitrary nonnegative weights (any positive total).
    pub fn from_weights(alphabet: Alphabet, weights: Vec<T>) -> Result<Self> {
        if weights.len() != alphabet.len() {
            return Err(Error::DimensionMismatch {
                context: format!(
                    "{} weights for {} labels",
                    weights.len(),
                    alphabet.len()
                ),
            });
        }
        for (index, &value) in weights.iter().enumerate() {
            if value < T::zero() {
                return Err(Error::NegativeMass {
                    index,
                    value: approx_f64(value),
                });
            }
        }
        let sum = l1_sum(&weights);
        if sum <= T::zero() {
            return Err(Error::EmptySupport);
        }
        let mass = weights.into_iter().map(|w| w / sum).collect();
        Ok(Self { alphabet, mass })
    }

    pub fn uniform(alphabet: Alphabet) -> Self {
        let n = alphabet.len();
        let w = T::one() / real::<T>(n as f64);
        Self {
            alphabet,
            mass: vec![w; n],
        }
    }

    pub fn point_mass(alphabet: Alphabet, index: usize) -> Self {
        let mut mass = vec![T::zero(); alphabet.len()];
        mass[index] = T::one();
        Self { alphabet, mass }
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn mass(&self) -> &[T] {
        &self.mass
    }

    pub fn get(&self, index: usize) -> T {
        self.mass[index]
    }

    /// Indices carrying strictly positive mass.
    pub fn support_indices(&self) -> Vec<usize> {
        (0..self.mass.len())
            .filter(|&i| self.mass[i] > T::zero())
            .collect()
    }

    /// Drop zero-mass labels. No renormalization is needed.
    pub fn restrict_to_support(&self) -> Result<Self> {
        let support = self.support_indices();
        if support.is_empty() {
            return Err(Error::EmptySupport);
        }
        Ok(Self {
            alphabet: self.alphabet.select(&support)?,
            mass: support.iter().map(|&i| self.mass[i]).collect(),
        })
    }

    pub fn l1_distance(&self, other: &Self) -> Result<T> {
        if self.alphabet != other.alphabet {
            return Err(Error::AlphabetMismatch {
                context: "l1 distance between different alphabets".into(),
            });
        }
        Ok(self
            .mass
            .iter()
            .zip(&other.mass)
            .fold(T::zero(), |acc, (&a, &b)| acc + (a - b).abs()))
    }
}

fn l1_sum<T: Scalar>(values: &[T]) -> T {
    values.iter().fold(T::zero(), |acc, &v| acc + v)
}

/// Conditional probability table `φ(output|input)`, one distribution per
/// input label. Stored row-major: `table[(x, y)] = φ(y|x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StochasticChannel<T> {
    input: Alphabet,
    output: Alphabet,
    table: DMatrix<T>,
}

impl<T: Scalar> StochasticChannel<T> {
    pub fn new(input: Alphabet, output: Alphabet, rows: Vec<Vec<T>>) -> Result<Self> {
        Self::new_with_tol(input, output, rows, tol_norm())
    }

    pub fn new_with_tol(
        input: Alphabet,
        output: Alphabet,
        rows: Vec<Vec<T>>,
        tol: T,
    ) -> Result<Self> {
        if rows.len() != input.len() {
            return Err(Error::DimensionMismatch {
                context: format!("{} rows for {} inputs", rows.len(), input.len()),
            });
        }
        let mut table = DMatrix::zeros(input.len(), output.len());
        for (x, row) in rows.into_iter().enumerate() {
            let dist = Distribution::new_with_tol(output.clone(), row, tol)?;
            for (y, &v) in dist.mass().iter().enumerate() {
                table[(x, y)] = v;
            }
        }
        Ok(Self {
            input,
            output,
            table,
        })
    }

    pub fn from_matrix(input: Alphabet, output: Alphabet, table: DMatrix<T>) -> Result<Self> {
        let rows = (0..table.nrows())
            .map(|x| table.row(x).iter().copied().collect())
            .collect();
        Self::new(input, output, rows)
    }

    pub fn identity(alphabet: Alphabet) -> Self {
        let n = alphabet.len();
        Self {
            input: alphabet.clone(),
            output: alphabet,
            table: DMatrix::identity(n, n),
        }
    }

    /// Deterministic channel `x → perm[x]`.
    pub fn from_permutation(alphabet: Alphabet, perm: &[usize]) -> Result<Self> {
        let n = alphabet.len();
        if !is_permutation(perm, n) {
            return Err(Error::NotBijective);
        }
        let mut table = DMatrix::zeros(n, n);
        for (x, &y) in perm.iter().enumerate() {
            table[(x, y)] = T::one();
        }
        Ok(Self {
            input: alphabet.clone(),
            output: alphabet,
            table,
        })
    }

    pub fn input_alphabet(&self) -> &Alphabet {
        &self.input
    }

    pub fn output_alphabet(&self) -> &Alphabet {
        &self.output
    }

    /// `φ(y|x)`.
    pub fn entry(&self, x: usize, y: usize) -> T {
        self.table[(x, y)]
    }

    pub fn matrix(&self) -> &DMatrix<T> {
        &self.table
    }

    pub fn row_distribution(&self, x: usize) -> Distribution<T> {
        Distribution {
            alphabet: self.output.clone(),
            mass: self.table.row(x).iter().copied().collect(),
        }
    }

    pub fn is_square(&self) -> bool {
        self.input == self.output
    }

    /// Push a prior through the channel: `(pφ)(y) = Σ_x p(x)φ(y|x)`.
    pub fn propagate(&self, prior: &Distribution<T>) -> Result<Distribution<T>> {
        if prior.alphabet() != &self.input {
            return Err(Error::AlphabetMismatch {
                context: "prior alphabet differs from channel input".into(),
            });
        }
        let mut out = vec![T::zero(); self.output.len()];
        for x in 0..self.input.len() {
            let px = prior.get(x);
            if px == T::zero() {
                continue;
            }
            for (y, slot) in out.iter_mut().enumerate() {
                *slot += px * self.table[(x, y)];
            }
        }
        Ok(Distribution {
            alphabet: self.output.clone(),
            mass: out,
        })
    }

    pub fn column_sums(&self) -> Vec<T> {
        (0..self.output.len())
            .map(|y| (0..self.input.len()).fold(T::zero(), |acc, x| acc + self.table[(x, y)]))
            .collect()
    }

    /// Max deviation of the column sums from 1.
    pub fn column_sum_deviation(&self) -> T {
        self.column_sums()
            .into_iter()
            .fold(T::zero(), |acc, s| acc.max((s - T::one()).abs()))
    }

    pub fn is_doubly_stochastic(&self, tol: T) -> bool {
        self.is_square() && self.column_sum_deviation() <= tol
    }

    /// `‖γφ − γ‖₁` for a square channel.
    pub fn invariance_residual(&self, gamma: &Distribution<T>) -> Result<T> {
        if !self.is_square() {
            return Err(Error::NotSquare {
                inputs: self.input.len(),
                outputs: self.output.len(),
            });
        }
        let pushed = self.propagate(gamma)?;
        gamma.l1_distance(&pushed)
    }
}

fn is_permutation(perm: &[usize], n: usize) -> bool {
    if perm.len() != n {
        return false;
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || seen[p] {
            return false;
        }
        seen[p] = true;
    }
    true
}

/// A steady state `γ` of a square channel together with the uniqueness flag
/// and the achieved fixed-point residual.
#[derive(Debug, Clone)]
pub struct SteadyState<T> {
    pub gamma: Distribution<T>,
    pub unique: bool,
    pub residual: T,
}

/// Find a steady state `γφ = γ`.
///
/// Uniqueness means the eigenvalue-1 eigenspace is one-dimensional, decided
/// by counting recurrent communicating classes of the positive-entry digraph.
/// When several steady states exist and no seed is given, the one supported
/// on the recurrent class containing the lexicographically first recurrent
/// label is returned. A seed selects the mixture that a chain started from
/// the seed would converge to (absorption-weighted combination).
pub fn steady_state<T: Scalar>(
    channel: &StochasticChannel<T>,
    seed: Option<&Distribution<T>>,
) -> Result<SteadyState<T>> {
    steady_state_with_tol(channel, seed, tol_fix())
}

pub fn steady_state_with_tol<T: Scalar>(
    channel: &StochasticChannel<T>,
    seed: Option<&Distribution<T>>,
    tol: T,
) -> Result<SteadyState<T>> {
    if !channel.is_square() {
        return Err(Error::NotSquare {
            inputs: channel.input.len(),
            outputs: channel.output.len(),
        });
    }
    if let Some(s) = seed {
        if s.alphabet() != &channel.input {
            return Err(Error::AlphabetMismatch {
                context: "seed alphabet differs from channel alphabet".into(),
            });
        }
    }
    let n = channel.input.len();
    let adjacency: Vec<Vec<usize>> = (0..n)
        .map(|x| {
            (0..n)
                .filter(|&y| channel.table[(x, y)] > T::zero())
                .collect()
        })
        .collect();
    let components = strongly_connected_components(&adjacency);
    let mut component_of = vec![0usize; n];
    for (c, members) in components.iter().enumerate() {
        for &v in members {
            component_of[v] = c;
        }
    }
    let recurrent: Vec<&Vec<usize>> = components
        .iter()
        .filter(|members| {
            members
                .iter()
                .all(|&v| adjacency[v].iter().all(|&w| component_of[w] == component_of[v]))
        })
        .collect();
    let unique = recurrent.len() == 1;

    let mut mass = vec![T::zero(); n];
    if unique {
        let class = recurrent[0];
        let local = class_stationary(channel, class)?;
        for (i, &v) in class.iter().enumerate() {
            mass[v] = local[i];
        }
    } else if let Some(seed_dist) = seed {
        let weights = absorption_masses(channel, &recurrent, seed_dist)?;
        for (class, &weight) in recurrent.iter().zip(&weights) {
            if weight <= T::zero() {
                continue;
            }
            let local = class_stationary(channel, class)?;
            for (i, &v) in class.iter().enumerate() {
                mass[v] += weight * local[i];
            }
        }
    } else {
        // deterministic default: lexicographically first recurrent label
        let class = recurrent
            .iter()
            .min_by_key(|members| {
                members
                    .iter()
                    .map(|&v| channel.input.label(v))
                    .min()
                    .expect("recurrent class is nonempty")
            })
            .expect("at least one recurrent class exists");
        let local = class_stationary(channel, class)?;
        for (i, &v) in class.iter().enumerate() {
            mass[v] = local[i];
        }
    }

    let gamma = Distribution {
        alphabet: channel.input.clone(),
        mass,
    };
    let residual = channel.invariance_residual(&gamma)?;
    if residual > tol {
        return Err(Error::NoConvergence {
            what: "steady state".into(),
            residual: approx_f64(residual),
        });
    }
    Ok(SteadyState {
        gamma,
        unique,
        residual,
    })
}

/// Stationary distribution of the channel restricted to one recurrent class:
/// direct solve of the eigenvalue-1 system `(P_cᵀ − I)v = 0, Σv = 1`, with a
/// lazy-chain power iteration as fallback.
fn class_stationary<T: Scalar>(channel: &StochasticChannel<T>, class: &[usize]) -> Result<Vec<T>> {
    let k = class.len();
    if k == 1 {
        return Ok(vec![T::one()]);
    }
    let sub = DMatrix::from_fn(k, k, |i, j| channel.table[(class[i], class[j])]);
    let mut system = sub.transpose() - DMatrix::<T>::identity(k, k);
    for j in 0..k {
        system[(k - 1, j)] = T::one();
    }
    let mut rhs = nalgebra::DVector::zeros(k);
    rhs[k - 1] = T::one();
    let solved = system.lu().solve(&rhs).map(|v| {
        let clamped: Vec<T> = v.iter().map(|&x| x.max(T::zero())).collect();
        let total = l1_sum(&clamped);
        clamped.into_iter().map(|x| x / total).collect::<Vec<T>>()
    });
    // best the arithmetic can do in the working precision; the caller's
    // tolerance is the actual contract, checked on the assembled state
    let target = T::default_epsilon() * real::<T>(500.0);
    if let Some(v) = solved {
        if class_residual(&sub, &v) <= target {
            return Ok(v);
        }
    }
    // lazy chain (P + I)/2 has the same stationary state and always converges
    let mut v = vec![T::one() / real::<T>(k as f64); k];
    let half = real::<T>(0.5);
    for _ in 0..200_000 {
        let mut next = vec![T::zero(); k];
        for i in 0..k {
            for (j, slot) in next.iter_mut().enumerate() {
                *slot += v[i] * sub[(i, j)];
            }
        }
        for (slot, &old) in next.iter_mut().zip(&v) {
            *slot = half * *slot + half * old;
        }
        let total = l1_sum(&next);
        for slot in next.iter_mut() {
            *slot /= total;
        }
        v = next;
        if class_residual(&sub, &v) <= target {
            return Ok(v);
        }
    }
    Ok(v)
}

fn class_residual<T: Scalar>(sub: &DMatrix<T>, v: &[T]) -> T {
    let k = v.len();
    let mut residual = T::zero();
    for j in 0..k {
        let pushed = (0..k).fold(T::zero(), |acc, i| acc + v[i] * sub[(i, j)]);
        residual += (pushed - v[j]).abs();
    }
    residual
}

/// Mass from `seed` eventually absorbed into each recurrent class.
fn absorption_masses<T: Scalar>(
    channel: &StochasticChannel<T>,
    recurrent: &[&Vec<usize>],
    seed: &Distribution<T>,
) -> Result<Vec<T>> {
    let n = channel.input.len();
    let mut class_of = vec![None::<usize>; n];
    for (c, members) in recurrent.iter().enumerate() {
        for &v in *members {
            class_of[v] = Some(c);
        }
    }
    let transient: Vec<usize> = (0..n).filter(|&v| class_of[v].is_none()).collect();
    let mut weights = vec![T::zero(); recurrent.len()];
    for (v, slot) in class_of.iter().enumerate() {
        if let Some(c) = slot {
            weights[*c] += seed.get(v);
        }
    }
    let transient_mass = transient
        .iter()
        .fold(T::zero(), |acc, &t| acc + seed.get(t));
    if transient.is_empty() || transient_mass == T::zero() {
        return Ok(weights);
    }
    let m = transient.len();
    let q = DMatrix::from_fn(m, m, |i, j| channel.table[(transient[i], transient[j])]);
    let system = DMatrix::<T>::identity(m, m) - q;
    let lu = system.lu();
    for (c, members) in recurrent.iter().enumerate() {
        let mut rhs = nalgebra::DVector::zeros(m);
        for (i, &t) in transient.iter().enumerate() {
            rhs[i] = members
                .iter()
                .fold(T::zero(), |acc, &j| acc + channel.table[(t, j)]);
        }
        let absorbed = lu.solve(&rhs).ok_or(Error::NoConvergence {
            what: "transient absorption solve".into(),
            residual: f64::NAN,
        })?;
        for (i, &t) in transient.iter().enumerate() {
            weights[c] += seed.get(t) * absorbed[i].max(T::zero());
        }
    }
    Ok(weights)
}

/// Kosaraju's algorithm, iterative. Components come back in a deterministic
/// order; membership order follows discovery.
fn strongly_connected_components(adjacency: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = adjacency.len();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for start in 0..n {
        if visited[start] {
            continue;
        }
        visited[start] = true;
        let mut stack = vec![(start, 0usize)];
        while let Some(frame) = stack.last_mut() {
            let (v, edge) = (frame.0, frame.1);
            if edge < adjacency[v].len() {
                frame.1 += 1;
                let w = adjacency[v][edge];
                if !visited[w] {
                    visited[w] = true;
                    stack.push((w, 0));
                }
            } else {
                order.push(v);
                stack.pop();
            }
        }
    }
    let mut reverse = vec![Vec::new(); n];
    for (v, outs) in adjacency.iter().enumerate() {
        for &w in outs {
            reverse[w].push(v);
        }
    }
    let mut assigned = vec![false; n];
    let mut components = Vec::new();
    for &root in order.iter().rev() {
        if assigned[root] {
            continue;
        }
        let mut component = Vec::new();
        let mut stack = vec![root];
        assigned[root] = true;
        while let Some(v) = stack.pop() {
            component.push(v);
            for &w in &reverse[v] {
                if !assigned[w] {
                    assigned[w] = true;
                    stack.push(w);
                }
            }
        }
        component.sort_unstable();
        components.push(component);
    }
    components
}

/// Bayesian inverse of `channel` with respect to an invariant `gamma`:
/// `φ̂(x|y) = γ(x)φ(y|x)/γ(y)` on the support of `γ`. Labels with zero mass
/// are dropped from both alphabets before inversion.
pub fn bayes_reverse_channel<T: Scalar>(
    channel: &StochasticChannel<T>,
    gamma: &Distribution<T>,
) -> Result<StochasticChannel<T>> {
    bayes_reverse_channel_with_tol(channel, gamma, tol_fix())
}

pub fn bayes_reverse_channel_with_tol<T: Scalar>(
    channel: &StochasticChannel<T>,
    gamma: &Distribution<T>,
    tol: T,
) -> Result<StochasticChannel<T>> {
    if !channel.is_square() {
        return Err(Error::NotSquare {
            inputs: channel.input.len(),
            outputs: channel.output.len(),
        });
    }
    if gamma.alphabet() != &channel.input {
        return Err(Error::AlphabetMismatch {
            context: "gamma alphabet differs from channel alphabet".into(),
        });
    }
    let residual = channel.invariance_residual(gamma)?;
    if residual > tol {
        return Err(Error::NotInvariant {
            residual: approx_f64(residual),
            tol: approx_f64(tol),
        });
    }
    let support = gamma.support_indices();
    if support.is_empty() {
        return Err(Error::EmptySupport);
    }
    let sub_alphabet = channel.input.select(&support)?;
    let k = support.len();
    let mut table = DMatrix::zeros(k, k);
    for (yi, &y) in support.iter().enumerate() {
        let gy = gamma.get(y);
        let mut row_sum = T::zero();
        for (xi, &x) in support.iter().enumerate() {
            let v = gamma.get(x) * channel.table[(x, y)] / gy;
            table[(yi, xi)] = v;
            row_sum += v;
        }
        if row_sum <= T::zero() {
            // γ(y) > 0 with no inflow contradicts invariance at this scale
            return Err(Error::NotInvariant {
                residual: approx_f64(gy),
                tol: approx_f64(tol),
            });
        }
        // rows are exactly stochastic up to the invariance residual
        for xi in 0..k {
            table[(yi, xi)] /= row_sum;
        }
    }
    Ok(StochasticChannel {
        input: sub_alphabet.clone(),
        output: sub_alphabet,
        table,
    })
}

/// Direction tag for a joint process table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Reverse,
}

/// Joint table `P(x, y)` over initial-time labels `x` and final-time labels
/// `y`, tagged with the direction it was constructed for.
#[derive(Debug, Clone, PartialEq)]
pub struct JointProcess<T> {
    x_alphabet: Alphabet,
    y_alphabet: Alphabet,
    table: DMatrix<T>,
    direction: Direction,
}

impl<T: Scalar> JointProcess<T> {
    pub fn new(
        x_alphabet: Alphabet,
        y_alphabet: Alphabet,
        table: DMatrix<T>,
        direction: Direction,
    ) -> Result<Self> {
        Self::new_with_tol(x_alphabet, y_alphabet, table, direction, tol_norm())
    }

    pub fn new_with_tol(
        x_alphabet: Alphabet,
        y_alphabet: Alphabet,
        table: DMatrix<T>,
        direction: Direction,
        tol: T,
    ) -> Result<Self> {
        if table.nrows() != x_alphabet.len() || table.ncols() != y_alphabet.len() {
            return Err(Error::DimensionMismatch {
                context: format!(
                    "{}x{} table for {}x{} alphabets",
                    table.nrows(),
                    table.ncols(),
                    x_alphabet.len(),
                    y_alphabet.len()
                ),
            });
        }
        let mut total = T::zero();
        for (index, &v) in table.iter().enumerate() {
            if v < T::zero() {
                return Err(Error::NegativeMass {
                    index,
                    value: approx_f64(v),
                });
            }
            total += v;
        }
        if (total - T::one()).abs() > tol {
            return Err(Error::NotNormalized {
                sum: approx_f64(total),
                tol: approx_f64(tol),
            });
        }
        Ok(Self {
            x_alphabet,
            y_alphabet,
            table,
            direction,
        })
    }

    pub fn x_alphabet(&self) -> &Alphabet {
        &self.x_alphabet
    }

    pub fn y_alphabet(&self) -> &Alphabet {
        &self.y_alphabet
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn entry(&self, x: usize, y: usize) -> T {
        self.table[(x, y)]
    }

    pub fn table(&self) -> &DMatrix<T> {
        &self.table
    }

    pub fn total_mass(&self) -> T {
        self.table.iter().fold(T::zero(), |acc, &v| acc + v)
    }

    pub fn marginal_x(&self) -> Distribution<T> {
        let mass = (0..self.x_alphabet.len())
            .map(|x| {
                (0..self.y_alphabet.len()).fold(T::zero(), |acc, y| acc + self.table[(x, y)])
            })
            .collect();
        Distribution {
            alphabet: self.x_alphabet.clone(),
            mass,
        }
    }

    pub fn marginal_y(&self) -> Distribution<T> {
        let mass = (0..self.y_alphabet.len())
            .map(|y| {
                (0..self.x_alphabet.len()).fold(T::zero(), |acc, x| acc + self.table[(x, y)])
            })
            .collect();
        Distribution {
            alphabet: self.y_alphabet.clone(),
            mass,
        }
    }

    /// Pairs with strictly positive mass, row-major order.
    pub fn support_pairs(&self) -> Vec<(usize, usize)> {
        let mut pairs = Vec::new();
        for x in 0..self.x_alphabet.len() {
            for y in 0..self.y_alphabet.len() {
                if self.table[(x, y)] > T::zero() {
                    pairs.push((x, y));
                }
            }
        }
        pairs
    }

    /// Conditional `P(x|y)` as a channel from the y-alphabet to the
    /// x-alphabet. Every y must carry positive marginal mass.
    pub fn conditional_on_y(&self) -> Result<StochasticChannel<T>> {
        let marginal = self.marginal_y();
        let mut table = DMatrix::zeros(self.y_alphabet.len(), self.x_alphabet.len());
        for y in 0..self.y_alphabet.len() {
            let my = marginal.get(y);
            if my <= T::zero() {
                return Err(Error::ZeroOutcomeWeight {
                    label: self.y_alphabet.label(y).to_string(),
                    weight: approx_f64(my),
                });
            }
            for x in 0..self.x_alphabet.len() {
                table[(y, x)] = self.table[(x, y)] / my;
            }
        }
        StochasticChannel::from_matrix(self.y_alphabet.clone(), self.x_alphabet.clone(), table)
    }
}

/// Jeffrey's conditioning: update a joint along soft evidence on the
/// conditioning variable, `P′(x, y) = P(x|y)·P′(y)`. Reduces to the
/// Bayes–Laplace rule when the evidence is a point mass. The result is the
/// retrodictive joint, so it is tagged `Reverse`.
pub fn jeffrey_update<T: Scalar>(
    conditional: &StochasticChannel<T>,
    soft_evidence: &Distribution<T>,
) -> Result<JointProcess<T>> {
    if soft_evidence.alphabet() != conditional.input_alphabet() {
        return Err(Error::AlphabetMismatch {
            context: "soft evidence alphabet differs from the conditioning alphabet".into(),
        });
    }
    let n_x = conditional.output_alphabet().len();
    let n_y = conditional.input_alphabet().len();
    let mut table = DMatrix::zeros(n_x, n_y);
    for y in 0..n_y {
        let ev = soft_evidence.get(y);
        for x in 0..n_x {
            table[(x, y)] = conditional.entry(y, x) * ev;
        }
    }
    JointProcess::new(
        conditional.output_alphabet().clone(),
        conditional.input_alphabet().clone(),
        table,
        Direction::Reverse,
    )
}

/// Forward process `P_F(x, y) = p(x)·φ(y|x)`.
pub fn forward_process<T: Scalar>(
    prior: &Distribution<T>,
    channel: &StochasticChannel<T>,
) -> Result<JointProcess<T>> {
    if prior.alphabet() != channel.input_alphabet() {
        return Err(Error::AlphabetMismatch {
            context: "prior alphabet differs from channel input".into(),
        });
    }
    let n_x = channel.input_alphabet().len();
    let n_y = channel.output_alphabet().len();
    let mut table = DMatrix::zeros(n_x, n_y);
    for x in 0..n_x {
        let px = prior.get(x);
        for y in 0..n_y {
            table[(x, y)] = px * channel.entry(x, y);
        }
    }
    JointProcess::new(
        channel.input_alphabet().clone(),
        channel.output_alphabet().clone(),
        table,
        Direction::Forward,
    )
}

/// Reverse process `P_R(x, y) = q(y)·φ̂(x|y)`.
///
/// The reverse channel generally lives on the steady-state support; `q` may
/// be given on a larger alphabet as long as all its mass sits inside the
/// support, otherwise `PriorOutsideSupport` is raised.
pub fn reverse_process<T: Scalar>(
    prior: &Distribution<T>,
    reverse_channel: &StochasticChannel<T>,
) -> Result<JointProcess<T>> {
    let support_alphabet = reverse_channel.input_alphabet();
    let q = if prior.alphabet() == support_alphabet {
        prior.clone()
    } else {
        let mut mass = vec![T::zero(); support_alphabet.len()];
        for (i, label) in prior.alphabet().labels().iter().enumerate() {
            let m = prior.get(i);
            match support_alphabet.index_of(label) {
                Some(j) => mass[j] = m,
                None if m > T::zero() => {
                    return Err(Error::PriorOutsideSupport {
                        label: label.clone(),
                        mass: approx_f64(m),
                    })
                }
                None => {}
            }
        }
        // a full-mass embedding; no renormalization happens here
        Distribution::new(support_alphabet.clone(), mass)?
    };
    let n_y = support_alphabet.len();
    let n_x = reverse_channel.output_alphabet().len();
    let mut table = DMatrix::zeros(n_x, n_y);
    for y in 0..n_y {
        let qy = q.get(y);
        for x in 0..n_x {
            table[(x, y)] = qy * reverse_channel.entry(y, x);
        }
    }
    JointProcess::new(
        reverse_channel.output_alphabet().clone(),
        support_alphabet.clone(),
        table,
        Direction::Reverse,
    )
}

/// Pointwise forward/reverse ratio on the common support.
#[derive(Debug, Clone)]
pub struct RatioTable<T> {
    x_alphabet: Alphabet,
    y_alphabet: Alphabet,
    pairs: Vec<(usize, usize)>,
    values: Vec<T>,
}

impl<T: Scalar> RatioTable<T> {
    pub fn x_alphabet(&self) -> &Alphabet {
        &self.x_alphabet
    }

    pub fn y_alphabet(&self) -> &Alphabet {
        &self.y_alphabet
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), T)> + '_ {
        self.pairs.iter().copied().zip(self.values.iter().copied())
    }

    pub fn value_at(&self, pair: (usize, usize)) -> Option<T> {
        self.pairs
            .iter()
            .position(|&p| p == pair)
            .map(|i| self.values[i])
    }
}

/// `r(x, y) = P_F(x, y)/P_R(x, y)` on the common support.
///
/// A pair carrying mass on exactly one side makes the ratio ill-defined and
/// is a hard error; pairs with no mass on either side are dropped.
pub fn forward_reverse_ratio<T: Scalar>(
    pf: &JointProcess<T>,
    pr: &JointProcess<T>,
) -> Result<RatioTable<T>> {
    ratio_impl(pf, pr, true)
}

/// Ratio restricted to pairs positive on both sides, skipping one-sided
/// pairs instead of failing. Needed for priors that deliberately mismatch
/// supports (microcanonical shells); the integral fluctuation relation does
/// not survive such leakage, the detailed ratios still do.
pub fn forward_reverse_ratio_on_common_support<T: Scalar>(
    pf: &JointProcess<T>,
    pr: &JointProcess<T>,
) -> Result<RatioTable<T>> {
    ratio_impl(pf, pr, false)
}

fn ratio_impl<T: Scalar>(
    pf: &JointProcess<T>,
    pr: &JointProcess<T>,
    strict: bool,
) -> Result<RatioTable<T>> {
    if pf.x_alphabet() != pr.x_alphabet() || pf.y_alphabet() != pr.y_alphabet() {
        return Err(Error::AlphabetMismatch {
            context: "forward and reverse processes live on different alphabets".into(),
        });
    }
    let mut pairs = Vec::new();
    let mut values = Vec::new();
    for x in 0..pf.x_alphabet().len() {
        for y in 0..pf.y_alphabet().len() {
            let f = pf.entry(x, y);
            let r = pr.entry(x, y);
            if f > T::zero() && r > T::zero() {
                pairs.push((x, y));
                values.push(f / r);
            } else if strict && (f > T::zero() || r > T::zero()) {
                return Err(Error::SupportMismatch {
                    x: pf.x_alphabet().label(x).to_string(),
                    y: pf.y_alphabet().label(y).to_string(),
                    forward: approx_f64(f),
                    reverse: approx_f64(r),
                });
            }
        }
    }
    Ok(RatioTable {
        x_alphabet: pf.x_alphabet().clone(),
        y_alphabet: pf.y_alphabet().clone(),
        pairs,
        values,
    })
}

/// True when `P_F > 0 ⇔ P_R > 0` holds on every pair.
pub fn supports_coincide<T: Scalar>(pf: &JointProcess<T>, pr: &JointProcess<T>) -> Result<bool> {
    if pf.x_alphabet() != pr.x_alphabet() || pf.y_alphabet() != pr.y_alphabet() {
        return Err(Error::AlphabetMismatch {
            context: "forward and reverse processes live on different alphabets".into(),
        });
    }
    for x in 0..pf.x_alphabet().len() {
        for y in 0..pf.y_alphabet().len() {
            if (pf.entry(x, y) > T::zero()) != (pr.entry(x, y) > T::zero()) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn chan(rows: &[&[f64]]) -> StochasticChannel<f64> {
        let n = rows.len();
        let m = rows[0].len();
        StochasticChannel::new(
            Alphabet::indexed(n),
            Alphabet::indexed(m),
            rows.iter().map(|r| r.to_vec()).collect(),
        )
        .unwrap()
    }

    fn dist(mass: &[f64]) -> Distribution<f64> {
        Distribution::new(Alphabet::indexed(mass.len()), mass.to_vec()).unwrap()
    }

    /// Independent steady-state oracle: plain power iteration on the lazy
    /// chain down to residual 1e-12.
    fn power_iteration_oracle(channel: &StochasticChannel<f64>) -> Vec<f64> {
        let n = channel.input_alphabet().len();
        let mut v = vec![1.0 / n as f64; n];
        loop {
            let mut next = vec![0.0; n];
            for (i, &vi) in v.iter().enumerate() {
                for (j, slot) in next.iter_mut().enumerate() {
                    *slot += vi * channel.entry(i, j);
                }
            }
            for (slot, &old) in next.iter_mut().zip(&v) {
                *slot = 0.5 * *slot + 0.5 * old;
            }
            let sum: f64 = next.iter().sum();
            for slot in next.iter_mut() {
                *slot /= sum;
            }
            let moved: f64 = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).sum();
            v = next;
            if moved < 1e-15 {
                let residual: f64 = (0..n)
                    .map(|j| {
                        let pushed: f64 = (0..n).map(|i| v[i] * channel.entry(i, j)).sum();
                        (pushed - v[j]).abs()
                    })
                    .sum();
                assert!(residual <= 1e-12, "oracle failed to converge");
                return v;
            }
        }
    }

    #[test]
    fn distribution_validation() {
        assert!(Distribution::new(Alphabet::indexed(2), vec![0.5, 0.5]).is_ok());
        assert!(Distribution::new(Alphabet::indexed(2), vec![1.0, 0.0]).is_ok());
        assert!(matches!(
            Distribution::new(Alphabet::indexed(2), vec![0.6, 0.6]),
            Err(Error::NotNormalized { .. })
        ));
        assert!(matches!(
            Distribution::new(Alphabet::indexed(2), vec![1.2, -0.2]),
            Err(Error::NegativeMass { .. })
        ));
    }

    #[test]
    fn steady_state_doubly_stochastic_is_uniform() {
        let c = chan(&[&[0.7, 0.3], &[0.3, 0.7]]);
        let ss = steady_state(&c, None).unwrap();
        assert!(ss.unique);
        assert_abs_diff_eq!(ss.gamma.get(0), 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(ss.gamma.get(1), 0.5, epsilon = 1e-14);
    }

    #[test]
    fn steady_state_identity_channel_not_unique() {
        let c = StochasticChannel::<f64>::identity(Alphabet::indexed(2));
        let ss = steady_state(&c, None).unwrap();
        assert!(!ss.unique);
        // defaults to the class holding the lexicographically first label
        assert_eq!(ss.gamma.get(0), 1.0);
        // a seed pins the invariant mixture the chain would converge to
        let seeded = steady_state(&c, Some(&dist(&[0.3, 0.7]))).unwrap();
        assert!(!seeded.unique);
        assert_abs_diff_eq!(seeded.gamma.get(0), 0.3, epsilon = 1e-14);
        assert_abs_diff_eq!(seeded.gamma.get(1), 0.7, epsilon = 1e-14);
    }

    #[test]
    fn steady_state_matches_power_iteration_oracle() {
        let c = chan(&[&[0.9, 0.1], &[0.4, 0.6]]);
        let ss = steady_state(&c, None).unwrap();
        assert!(ss.unique);
        assert_abs_diff_eq!(ss.gamma.get(0), 0.8, epsilon = 1e-12);
        assert_abs_diff_eq!(ss.gamma.get(1), 0.2, epsilon = 1e-12);
        let oracle = power_iteration_oracle(&c);
        for (i, &expected) in oracle.iter().enumerate() {
            assert_abs_diff_eq!(ss.gamma.get(i), expected, epsilon = 1e-11);
        }
    }

    #[test]
    fn steady_state_with_transient_states_and_seed() {
        // states 0,1 absorb; state 2 is transient, splitting 60/40
        let c = chan(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.6, 0.4, 0.0]]);
        let ss = steady_state(&c, Some(&dist(&[0.0, 0.0, 1.0]))).unwrap();
        assert!(!ss.unique);
        assert_abs_diff_eq!(ss.gamma.get(0), 0.6, epsilon = 1e-14);
        assert_abs_diff_eq!(ss.gamma.get(1), 0.4, epsilon = 1e-14);
        assert_eq!(ss.gamma.get(2), 0.0);
    }

    #[test]
    fn steady_state_requires_square() {
        let c = StochasticChannel::new(
            Alphabet::indexed(1),
            Alphabet::indexed(2),
            vec![vec![0.5, 0.5]],
        )
        .unwrap();
        assert!(matches!(
            steady_state(&c, None),
            Err(Error::NotSquare { .. })
        ));
    }

    #[test]
    fn reverse_of_symmetric_channel_is_itself() {
        let c = chan(&[&[0.7, 0.3], &[0.3, 0.7]]);
        let gamma = dist(&[0.5, 0.5]);
        let rev = bayes_reverse_channel(&c, &gamma).unwrap();
        // doubly stochastic with uniform γ: φ̂(x|y) = φ(y|x)
        for y in 0..2 {
            for x in 0..2 {
                assert_abs_diff_eq!(rev.entry(y, x), c.entry(x, y), epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn reverse_of_cycle_is_inverse_cycle() {
        let c = StochasticChannel::<f64>::from_permutation(Alphabet::indexed(3), &[1, 2, 0])
            .unwrap();
        let gamma = Distribution::uniform(Alphabet::indexed(3));
        let rev = bayes_reverse_channel(&c, &gamma).unwrap();
        let inverse = StochasticChannel::<f64>::from_permutation(Alphabet::indexed(3), &[2, 0, 1])
            .unwrap();
        assert_eq!(rev.matrix(), inverse.matrix());
    }

    #[test]
    fn two_state_chain_satisfies_detailed_balance() {
        let c = chan(&[&[0.9, 0.1], &[0.4, 0.6]]);
        let gamma = dist(&[0.8, 0.2]);
        let rev = bayes_reverse_channel(&c, &gamma).unwrap();
        // oracle: evaluate γ(x)φ(y|x)/γ(y) entrywise
        for y in 0..2 {
            for x in 0..2 {
                let expected = gamma.get(x) * c.entry(x, y) / gamma.get(y);
                assert_abs_diff_eq!(rev.entry(y, x), expected, epsilon = 1e-15);
            }
        }
        assert_abs_diff_eq!(
            (rev.matrix() - c.matrix()).abs().max(),
            0.0,
            epsilon = 1e-14
        );
    }

    #[test]
    fn reverse_requires_invariance() {
        let c = chan(&[&[0.9, 0.1], &[0.4, 0.6]]);
        let not_gamma = dist(&[0.5, 0.5]);
        assert!(matches!(
            bayes_reverse_channel(&c, &not_gamma),
            Err(Error::NotInvariant { .. })
        ));
    }

    #[test]
    fn reverse_restricts_to_support() {
        // state 2 is isolated and carries no γ mass
        let c = chan(&[&[0.9, 0.1, 0.0], &[0.4, 0.6, 0.0], &[0.0, 0.0, 1.0]]);
        let gamma = dist(&[0.8, 0.2, 0.0]);
        let rev = bayes_reverse_channel(&c, &gamma).unwrap();
        assert_eq!(rev.input_alphabet().len(), 2);
        assert_eq!(rev.input_alphabet().labels(), &["0", "1"]);
    }

    #[test]
    fn reversal_is_an_involution() {
        let c = chan(&[&[0.5, 0.2, 0.3], &[0.1, 0.6, 0.3], &[0.2, 0.3, 0.5]]);
        let ss = steady_state(&c, None).unwrap();
        let rev = bayes_reverse_channel(&c, &ss.gamma).unwrap();
        // γ stays invariant for φ̂
        assert!(rev.invariance_residual(&ss.gamma).unwrap() <= 1e-12);
        let back = bayes_reverse_channel(&rev, &ss.gamma).unwrap();
        assert_abs_diff_eq!(
            (back.matrix() - c.matrix()).abs().max(),
            0.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn jeffrey_point_mass_reduces_to_bayes() {
        // conditional P(x|y) with y the conditioning variable
        let conditional = chan(&[&[0.9, 0.1], &[0.2, 0.8]]);
        let evidence = Distribution::point_mass(Alphabet::indexed(2), 1);
        let joint = jeffrey_update(&conditional, &evidence).unwrap();
        for x in 0..2 {
            assert_eq!(joint.entry(x, 0), 0.0);
            assert_abs_diff_eq!(joint.entry(x, 1), conditional.entry(1, x), epsilon = 1e-15);
        }
    }

    #[test]
    fn jeffrey_with_own_marginal_recovers_joint() {
        let p = dist(&[0.3, 0.7]);
        let c = chan(&[&[0.9, 0.1], &[0.4, 0.6]]);
        let joint = forward_process(&p, &c).unwrap();
        let conditional = joint.conditional_on_y().unwrap();
        let recovered = jeffrey_update(&conditional, &joint.marginal_y()).unwrap();
        for x in 0..2 {
            for y in 0..2 {
                assert_abs_diff_eq!(recovered.entry(x, y), joint.entry(x, y), epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn jeffrey_uniform_evidence_is_entrywise_product() {
        let conditional = chan(&[&[0.9, 0.1], &[0.2, 0.8]]);
        let evidence = dist(&[0.5, 0.5]);
        let joint = jeffrey_update(&conditional, &evidence).unwrap();
        for y in 0..2 {
            for x in 0..2 {
                assert_abs_diff_eq!(
                    joint.entry(x, y),
                    0.5 * conditional.entry(y, x),
                    epsilon = 1e-15
                );
            }
        }
    }

    #[test]
    fn forward_process_examples() {
        let c = chan(&[&[0.9, 0.1], &[0.4, 0.6]]);
        // point-mass prior copies the corresponding channel row
        let point = forward_process(&dist(&[1.0, 0.0]), &c).unwrap();
        assert_eq!(point.entry(0, 0), 0.9);
        assert_eq!(point.entry(1, 1), 0.0);
        // entrywise product oracle
        let joint = forward_process(&dist(&[0.3, 0.7]), &c).unwrap();
        let expected = [[0.27, 0.03], [0.28, 0.42]];
        for x in 0..2 {
            for y in 0..2 {
                assert_abs_diff_eq!(joint.entry(x, y), expected[x][y], epsilon = 1e-15);
            }
        }
        // stationary prior reproduces itself as the final marginal
        let gamma = dist(&[0.8, 0.2]);
        let stationary = forward_process(&gamma, &c).unwrap();
        assert!(stationary.marginal_y().l1_distance(&gamma).unwrap() <= 1e-14);
    }

    #[test]
    fn reverse_process_examples() {
        let c = chan(&[&[0.9, 0.1], &[0.4, 0.6]]);
        let gamma = dist(&[0.8, 0.2]);
        let rev = bayes_reverse_channel(&c, &gamma).unwrap();
        // q = γ gives the reference process, equal to the forward one with p = γ
        let reference = reverse_process(&gamma, &rev).unwrap();
        let forward_ref = forward_process(&gamma, &c).unwrap();
        for x in 0..2 {
            for y in 0..2 {
                assert_abs_diff_eq!(
                    reference.entry(x, y),
                    forward_ref.entry(x, y),
                    epsilon = 1e-14
                );
            }
        }
        // point mass at y0 copies the reverse row
        let point = reverse_process(&dist(&[1.0, 0.0]), &rev).unwrap();
        for x in 0..2 {
            assert_abs_diff_eq!(point.entry(x, 0), rev.entry(0, x), epsilon = 1e-15);
            assert_eq!(point.entry(x, 1), 0.0);
        }
        // direct product oracle for q = (0.5, 0.5)
        let q = dist(&[0.5, 0.5]);
        let pr = reverse_process(&q, &rev).unwrap();
        for y in 0..2 {
            for x in 0..2 {
                assert_abs_diff_eq!(pr.entry(x, y), 0.5 * rev.entry(y, x), epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn reverse_process_rejects_mass_outside_support() {
        let c = chan(&[&[0.9, 0.1, 0.0], &[0.4, 0.6, 0.0], &[0.0, 0.0, 1.0]]);
        let gamma = dist(&[0.8, 0.2, 0.0]);
        let rev = bayes_reverse_channel(&c, &gamma).unwrap();
        let q = dist(&[0.5, 0.25, 0.25]);
        assert!(matches!(
            reverse_process(&q, &rev),
            Err(Error::PriorOutsideSupport { .. })
        ));
        // zero mass outside the support embeds fine
        let ok = dist(&[0.5, 0.5, 0.0]);
        assert!(reverse_process(&ok, &rev).is_ok());
    }

    #[test]
    fn ratio_reference_process_is_flat() {
        let c = chan(&[&[0.9, 0.1], &[0.4, 0.6]]);
        let gamma = dist(&[0.8, 0.2]);
        let rev = bayes_reverse_channel(&c, &gamma).unwrap();
        let pf = forward_process(&gamma, &c).unwrap();
        let pr = reverse_process(&gamma, &rev).unwrap();
        let ratio = forward_reverse_ratio(&pf, &pr).unwrap();
        for (_, r) in ratio.iter() {
            assert_abs_diff_eq!(r, 1.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn ratio_matches_closed_form() {
        let c = chan(&[&[0.9, 0.1], &[0.4, 0.6]]);
        let gamma = dist(&[0.8, 0.2]);
        let p = dist(&[0.3, 0.7]);
        let q = dist(&[0.5, 0.5]);
        let rev = bayes_reverse_channel(&c, &gamma).unwrap();
        let pf = forward_process(&p, &c).unwrap();
        let pr = reverse_process(&q, &rev).unwrap();
        let ratio = forward_reverse_ratio(&pf, &pr).unwrap();
        // closed form: r(x,y) = p(x)γ(y)/(q(y)γ(x))
        let expected = [[0.6, 0.15], [5.6, 1.4]];
        assert_eq!(ratio.len(), 4);
        for ((x, y), r) in ratio.iter() {
            let closed = p.get(x) * gamma.get(y) / (q.get(y) * gamma.get(x));
            assert_abs_diff_eq!(r, closed, epsilon = 1e-12);
            assert_abs_diff_eq!(r, expected[x][y], epsilon = 1e-12);
        }
    }

    #[test]
    fn ratio_flags_one_sided_support() {
        let a2 = Alphabet::indexed(2);
        let pf = JointProcess::new(
            a2.clone(),
            a2.clone(),
            DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.0, 0.0]),
            Direction::Forward,
        )
        .unwrap();
        let pr = JointProcess::new(
            a2.clone(),
            a2.clone(),
            DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.5]),
            Direction::Reverse,
        )
        .unwrap();
        assert!(matches!(
            forward_reverse_ratio(&pf, &pr),
            Err(Error::SupportMismatch { .. })
        ));
        let lenient = forward_reverse_ratio_on_common_support(&pf, &pr).unwrap();
        assert_eq!(lenient.pairs(), &[(0, 0)]);
        assert!(!supports_coincide(&pf, &pr).unwrap());
    }

    #[test]
    fn forward_marginal_is_propagated_prior() {
        let c = chan(&[&[0.2, 0.5, 0.3], &[0.6, 0.1, 0.3], &[0.25, 0.25, 0.5]]);
        let p = dist(&[0.2, 0.3, 0.5]);
        let joint = forward_process(&p, &c).unwrap();
        let pushed = c.propagate(&p).unwrap();
        assert!(joint.marginal_y().l1_distance(&pushed).unwrap() <= 1e-15);
    }
}
