//! The numeric core is generic over the scalar; run the classical pipeline
//! in f32 with tolerances loosened to single precision.

use retrodiction::alphabet::Alphabet;
use retrodiction::fluctuation::{jarzynski_average, omega_variables, FFamily};
use retrodiction::prob::{
    bayes_reverse_channel_with_tol, forward_process, forward_reverse_ratio, reverse_process,
    steady_state_with_tol, Distribution, StochasticChannel,
};

#[test]
fn classical_reversal_works_in_f32() {
    let alphabet = Alphabet::indexed(3);
    let channel = StochasticChannel::<f32>::new_with_tol(
        alphabet.clone(),
        alphabet.clone(),
        vec![
            vec![0.5, 0.2, 0.3],
            vec![0.1, 0.6, 0.3],
            vec![0.2, 0.3, 0.5],
        ],
        1e-6,
    )
    .unwrap();
    let ss = steady_state_with_tol(&channel, None, 1e-5f32).unwrap();
    assert!(ss.unique);
    let reversed = bayes_reverse_channel_with_tol(&channel, &ss.gamma, 1e-5f32).unwrap();
    let p = Distribution::<f32>::new_with_tol(alphabet.clone(), vec![0.2, 0.3, 0.5], 1e-6)
        .unwrap();
    let q = Distribution::<f32>::new_with_tol(alphabet, vec![0.4, 0.4, 0.2], 1e-6).unwrap();
    let pf = forward_process(&p, &channel).unwrap();
    let pr = reverse_process(&q, &reversed).unwrap();
    let ratio = forward_reverse_ratio(&pf, &pr).unwrap();
    let family = FFamily::<f32>::log(1.0).unwrap();
    let omega = omega_variables(&ratio, &family).unwrap();
    let average = jarzynski_average(&pf, &omega, &family).unwrap();
    assert!((average - 1.0).abs() <= 1e-5, "f32 average {average}");
}

#[test]
fn f64_aliases_are_the_f64_instantiations() {
    let d: retrodiction::Distribution64 =
        Distribution::new(Alphabet::indexed(2), vec![0.5, 0.5]).unwrap();
    assert_eq!(d.get(0), 0.5f64);
    let f: retrodiction::FFamily32 = FFamily::power(2.0f32).unwrap();
    assert_eq!(f.f(2.0), 4.0f32);
}
