//! Acceptance suite: every identity the artifact promises, checked at its
//! stated tolerance, one pass/fail line per criterion
//! (`cargo test -p retrodiction-cli --test acceptance -- --nocapture`).

use std::path::Path;
use std::sync::OnceLock;

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use retrodiction::alphabet::Alphabet;
use retrodiction::fluctuation::FFamily;
use retrodiction::prob::{
    bayes_reverse_channel, steady_state, Distribution, StochasticChannel,
};
use retrodiction::quantum::{
    haar_unitary, linalg, petz_reverse, quantum_retrodicted_transition, random_quantum_process,
    KrausChannel,
};
use retrodiction::scenarios::{
    bayesian_scenario, deterministic_hamiltonian_scenario, evaluate_family,
    general_two_measurement_scenario, jarz2000_scenario, random_classical_scenario,
    random_two_measurement_inputs, thermal_amplitude_damping, HamiltonianPriors, ScenarioRun,
};

use retrodiction_cli::pipeline::{run_pipeline, PipelineOptions};
use retrodiction_cli::schema::parse_scenario_file;

fn criterion(number: u32, name: &str, detail: String, pass: bool) {
    println!(
        "[acceptance] criterion {number} ({name}): {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {number} ({name}) failed: {detail}");
}

fn families() -> Vec<FFamily<f64>> {
    vec![
        FFamily::log(0.5).unwrap(),
        FFamily::log(1.0).unwrap(),
        FFamily::log(2.0).unwrap(),
        FFamily::power(0.5).unwrap(),
        FFamily::power(1.0).unwrap(),
        FFamily::power(2.0).unwrap(),
    ]
}

struct IdentitySuite {
    classical_runs: usize,
    quantum_runs: usize,
    max_jarzynski_residual: f64,
    max_crooks_residual: f64,
}

fn fold_run(run: &ScenarioRun<f64>, worst_jarz: &mut f64, worst_crooks: &mut f64) {
    assert!(run.supports_coincide, "randomized runs must not leak support");
    for family in families() {
        let check = evaluate_family(run, &family, 1e-9).unwrap();
        *worst_jarz = worst_jarz.max((check.jarzynski_average - 1.0).abs());
        *worst_crooks = worst_crooks.max(check.max_crooks_residual);
    }
}

fn identity_suite() -> &'static IdentitySuite {
    static SUITE: OnceLock<IdentitySuite> = OnceLock::new();
    SUITE.get_or_init(|| {
        let mut worst_jarz = 0.0f64;
        let mut worst_crooks = 0.0f64;
        let mut classical_runs = 0;
        for seed in 0..200u64 {
            let dimension = 2 + (seed as usize % 15); // 2..=16
            let (channel, p, q) = random_classical_scenario::<f64>(dimension, 1000 + seed);
            let run = bayesian_scenario(&channel, &p, &q).unwrap();
            fold_run(&run, &mut worst_jarz, &mut worst_crooks);
            classical_runs += 1;
        }
        let mut quantum_runs = 0;
        for seed in 0..100u64 {
            let dimension = 2 + (seed as usize % 7); // 2..=8
            let rank = 2 + (seed as usize % 2);
            let inputs =
                random_two_measurement_inputs::<f64>(dimension, rank, 5000 + seed).unwrap();
            let run = general_two_measurement_scenario(
                &inputs.channel,
                &inputs.eps,
                &inputs.eta,
                inputs.beta,
            )
            .unwrap();
            fold_run(&run, &mut worst_jarz, &mut worst_crooks);
            quantum_runs += 1;
        }
        IdentitySuite {
            classical_runs,
            quantum_runs,
            max_jarzynski_residual: worst_jarz,
            max_crooks_residual: worst_crooks,
        }
    })
}

#[test]
fn criterion_1_jarzynski_like_identity() {
    let suite = identity_suite();
    criterion(
        1,
        "Jarzynski-like unit average",
        format!(
            "max |<f^-1(g(omega))>_F - 1| = {:e} over {} classical + {} quantum runs, \
             log(z in {{0.5,1,2}}) and power(alpha in {{0.5,1,2}})",
            suite.max_jarzynski_residual, suite.classical_runs, suite.quantum_runs
        ),
        suite.max_jarzynski_residual <= 1e-10,
    );
}

#[test]
fn criterion_2_crooks_atom_relation() {
    let suite = identity_suite();
    criterion(
        2,
        "Crooks atom relation",
        format!(
            "max atom residual = {:e} over the same {} runs",
            suite.max_crooks_residual,
            suite.classical_runs + suite.quantum_runs
        ),
        suite.max_crooks_residual <= 1e-9,
    );
}

struct QuantumSuite {
    runs: usize,
    max_consistency: f64,
    min_choi_eigenvalue: f64,
    max_tp_residual: f64,
    max_fixed_point_residual: f64,
}

fn quantum_suite() -> &'static QuantumSuite {
    static SUITE: OnceLock<QuantumSuite> = OnceLock::new();
    SUITE.get_or_init(|| {
        let mut max_consistency = 0.0f64;
        let mut min_choi = f64::INFINITY;
        let mut max_tp = 0.0f64;
        let mut max_fixed = 0.0f64;
        let mut runs = 0;
        for seed in 0..100u64 {
            let dimension = 2 + (seed as usize % 7); // 2..=8
            let alphabet = 2 + (seed as usize % 7); // 2..=8
            let rank = 2 + (seed as usize % 2);
            let qp =
                random_quantum_process::<f64>(dimension, alphabet, rank, 9000 + seed).unwrap();
            let phi = qp.induced_transition();
            let gamma = qp.weights();
            // quantum vs classical retrodiction, entrywise
            let quantum = quantum_retrodicted_transition(&qp).unwrap();
            for y in 0..alphabet {
                for x in 0..alphabet {
                    let classical = gamma.get(x) * phi.entry(x, y) / gamma.get(y);
                    max_consistency =
                        max_consistency.max((quantum.entry(y, x) - classical).abs());
                }
            }
            // Petz map validity
            let petz = petz_reverse(qp.channel(), qp.gamma0()).unwrap();
            let choi = linalg::hermitize(&petz.choi());
            min_choi = min_choi.min(linalg::Spectral::new(&choi).min_eigenvalue());
            let normalization = linalg::kraus_normalization(petz.kraus_ops());
            let identity =
                linalg::CMatrix::<f64>::identity(dimension, dimension);
            max_tp = max_tp.max(linalg::max_abs_entry(&(normalization - identity)));
            let forward = qp.channel().apply_matrix(qp.gamma0().matrix()).unwrap();
            let back = petz.apply_matrix(&forward).unwrap();
            max_fixed =
                max_fixed.max(linalg::max_abs_entry(&(back - qp.gamma0().matrix())));
            runs += 1;
        }
        QuantumSuite {
            runs,
            max_consistency,
            min_choi_eigenvalue: min_choi,
            max_tp_residual: max_tp,
            max_fixed_point_residual: max_fixed,
        }
    })
}

#[test]
fn criterion_3_quantum_classical_retrodiction_consistency() {
    let suite = quantum_suite();
    criterion(
        3,
        "quantum/classical retrodiction consistency",
        format!(
            "max |Tr[Theta E_hat(sigma)] - gamma(x) phi(y|x)/gamma(y)| = {:e} over {} processes",
            suite.max_consistency, suite.runs
        ),
        suite.max_consistency <= 1e-9,
    );
}

#[test]
fn criterion_4_petz_map_validity() {
    let suite = quantum_suite();
    let pass = suite.min_choi_eigenvalue >= -1e-10
        && suite.max_tp_residual <= 1e-10
        && suite.max_fixed_point_residual <= 1e-10;
    criterion(
        4,
        "Petz map validity",
        format!(
            "min Choi eigenvalue = {:e}, max TP residual = {:e}, max fixed-point residual = {:e} \
             over {} processes",
            suite.min_choi_eigenvalue,
            suite.max_tp_residual,
            suite.max_fixed_point_residual,
            suite.runs
        ),
        pass,
    );
}

#[test]
fn criterion_5_doubly_stochastic_equivalence() {
    let mut rng = ChaCha20Rng::seed_from_u64(77_000);
    let mut checked = 0;
    let mut worst_ds_gap = 0.0f64;
    // 100 generic random channels: not doubly stochastic, not self-reverse
    for seed in 0..100u64 {
        let dimension = 3 + (seed as usize % 6);
        let (channel, _, _) = random_classical_scenario::<f64>(dimension, 20_000 + seed);
        let gamma = steady_state(&channel, None).unwrap().gamma;
        let reversed = bayes_reverse_channel(&channel, &gamma).unwrap();
        let self_reverse =
            (reversed.matrix() - channel.matrix().transpose()).abs().max() <= 1e-10;
        let doubly_stochastic = channel.column_sum_deviation() <= 1e-10;
        assert_eq!(
            self_reverse, doubly_stochastic,
            "equivalence broken on generic channel seed {seed}"
        );
        checked += 1;
    }
    // 100 doubly stochastic channels: permutation mixtures and unistochastic
    // |U_yx|^2 tables from Haar unitaries (the unitary Tasaki case)
    for seed in 0..100u64 {
        let dimension = 2 + (seed as usize % 7);
        let alphabet = Alphabet::indexed(dimension);
        let channel = if seed % 2 == 0 {
            let mut rows = vec![vec![0.0f64; dimension]; dimension];
            for &weight in &[0.5, 0.3, 0.2] {
                let mut perm: Vec<usize> = (0..dimension).collect();
                perm.shuffle(&mut rng);
                for (x, &y) in perm.iter().enumerate() {
                    rows[x][y] += weight;
                }
            }
            StochasticChannel::new(alphabet.clone(), alphabet.clone(), rows).unwrap()
        } else {
            let u = haar_unitary::<f64>(dimension, 30_000 + seed);
            let rows = (0..dimension)
                .map(|x| (0..dimension).map(|y| u[(y, x)].norm_sqr()).collect())
                .collect();
            StochasticChannel::new(alphabet.clone(), alphabet.clone(), rows).unwrap()
        };
        assert!(channel.column_sum_deviation() <= 1e-10);
        let gamma = Distribution::uniform(alphabet);
        let reversed = bayes_reverse_channel(&channel, &gamma).unwrap();
        let gap = (reversed.matrix() - channel.matrix().transpose()).abs().max();
        worst_ds_gap = worst_ds_gap.max(gap);
        assert!(gap <= 1e-10, "doubly stochastic channel failed at seed {seed}");
        checked += 1;
    }
    criterion(
        5,
        "doubly-stochastic self-reversal equivalence",
        format!(
            "{checked} channels; worst self-reversal gap on doubly stochastic side = {worst_ds_gap:e}"
        ),
        checked == 200,
    );
}

#[test]
fn criterion_6_hybrid_reversal_identity() {
    let mut rng = ChaCha20Rng::seed_from_u64(88_000);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let n_x = rng.random_range(2..=6usize);
        let n_w = rng.random_range(2..=6usize);
        let mut perm: Vec<usize> = (0..n_x * n_w).collect();
        perm.shuffle(&mut rng);
        let energies: Vec<f64> = (0..n_w).map(|_| rng.random_range(0.0..2.0)).collect();
        let beta = rng.random_range(0.5..1.5);
        let alphabet = Alphabet::indexed(n_x);
        let p = Distribution::from_weights(
            alphabet.clone(),
            (0..n_x).map(|_| rng.random_range(0.1..1.1)).collect(),
        )
        .unwrap();
        let q = Distribution::from_weights(
            alphabet,
            (0..n_x).map(|_| rng.random_range(0.1..1.1)).collect(),
        )
        .unwrap();
        let scenario = jarz2000_scenario(n_x, &perm, &energies, beta, &p, &q).unwrap();
        worst = worst.max(scenario.tables.hybrid_reversal_residual());
    }
    criterion(
        6,
        "hybrid reversal identity",
        format!("max |phi - e^dS phi_hat| = {worst:e} over 50 system-reservoir scenarios"),
        worst <= 1e-10,
    );
}

#[test]
fn criterion_7_nonequilibrium_potential() {
    let mut worst_jarz = 0.0f64;
    let mut min_efficacy_gap = f64::INFINITY;
    let mut worst_unital_gap = 0.0f64;
    for &beta in &[0.5f64, 1.0] {
        for &eta in &[0.1f64, 0.3, 0.7] {
            let channel = thermal_amplitude_damping(eta, 0.0, 1.0, beta).unwrap();
            let run =
                general_two_measurement_scenario(&channel, &[0.0, 1.0], &[0.0, 1.0], beta)
                    .unwrap();
            let check = evaluate_family(&run, &FFamily::log(1.0).unwrap(), 1e-9).unwrap();
            worst_jarz = worst_jarz.max((check.jarzynski_average - 1.0).abs());
            min_efficacy_gap = min_efficacy_gap.min((run.efficacy.unwrap() - 1.0).abs());
            // unital substitute at the same strength: depolarizing noise
            let unital = KrausChannel::depolarizing(2, eta).unwrap();
            let unital_run =
                general_two_measurement_scenario(&unital, &[0.0, 1.0], &[0.0, 1.0], beta)
                    .unwrap();
            worst_unital_gap =
                worst_unital_gap.max((unital_run.efficacy.unwrap() - 1.0).abs());
        }
    }
    let pass = worst_jarz <= 1e-10 && min_efficacy_gap > 1e-3 && worst_unital_gap <= 1e-10;
    criterion(
        7,
        "nonequilibrium potential and efficacy",
        format!(
            "max |<e^-Sigma> - 1| = {worst_jarz:e}, min |efficacy - 1| = {min_efficacy_gap:e}, \
             max unital |efficacy - 1| = {worst_unital_gap:e}"
        ),
        pass,
    );
}

#[test]
fn criterion_8_microcanonical_ratio() {
    // shells N(E) = 2, N(E') = 4 connected by a permutation
    let run = deterministic_hamiltonian_scenario(
        &[2, 3, 4, 5, 0, 1],
        &HamiltonianPriors::Microcanonical {
            initial_energies: vec![1.0, 1.0, 2.0, 2.0, 2.0, 2.0],
            final_energies: vec![3.0, 3.0, 2.0, 2.0, 2.0, 2.0],
            initial_shell: 1.0,
            final_shell: 2.0,
        },
    )
    .unwrap();
    let all_exact = !run.ratio.is_empty() && run.ratio.values().iter().all(|&r| r == 2.0);
    criterion(
        8,
        "microcanonical ratio",
        format!(
            "{} support pairs, ratios {:?} (must equal N(E')/N(E) = 2 exactly)",
            run.ratio.len(),
            run.ratio.values()
        ),
        all_exact,
    );
}

#[test]
fn criterion_9_byte_identical_reruns() {
    let scenarios_dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios");
    let temp = tempfile::tempdir().unwrap();
    let mut all_identical = true;
    let mut compared = Vec::new();
    for name in ["random_quantum.json", "tasaki_qubit.json", "jarz2000_swap.json"] {
        let file = parse_scenario_file(&scenarios_dir.join(name)).unwrap();
        let options = PipelineOptions {
            seed_override: Some(123),
            tol_override: None,
            plot: false,
        };
        let dir_a = temp.path().join(format!("{name}.a"));
        let dir_b = temp.path().join(format!("{name}.b"));
        run_pipeline(&file, &dir_a, &options).unwrap();
        run_pipeline(&file, &dir_b, &options).unwrap();
        for artifact in ["joint.csv", "measures.csv", "summary.json"] {
            let a = std::fs::read(dir_a.join(artifact)).unwrap();
            let b = std::fs::read(dir_b.join(artifact)).unwrap();
            let same = a == b;
            all_identical &= same;
            compared.push(format!(
                "{name}/{artifact}: {}",
                if same { "identical" } else { "DIFFERS" }
            ));
        }
    }
    criterion(
        9,
        "byte-identical reruns",
        compared.join(", "),
        all_identical,
    );
}
