use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use tsketch::oracle::{exact_taylor_tensors, OracleLimits};
use tsketch::sampling::sample_direction;
use tsketch::{AnalyticGate, Circuit, CircuitBuilder, Jet};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn jet_strategy(order: usize) -> impl Strategy<Value = Jet> {
    prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), order + 1)
        .prop_map(|v| Jet::from_coeffs(v.into_iter().map(|(a, b)| c(a, b)).collect()).unwrap())
}

fn close(a: &Jet, b: &Jet, tol: f64) -> bool {
    a.coeffs()
        .iter()
        .zip(b.coeffs())
        .all(|(x, y)| (x - y).norm() <= tol * (1.0 + x.norm().max(y.norm())))
}

fn three_jets() -> impl Strategy<Value = (Jet, Jet, Jet)> {
    (0usize..10).prop_flat_map(|s| (jet_strategy(s), jet_strategy(s), jet_strategy(s)))
}

proptest! {
    #[test]
    fn ring_axioms((a, b, d) in three_jets()) {
        let ab = a.mul(&b).unwrap();
        prop_assert!(close(&ab, &b.mul(&a).unwrap(), 1e-13));
        let left = ab.mul(&d).unwrap();
        let right = a.mul(&b.mul(&d).unwrap()).unwrap();
        prop_assert!(close(&left, &right, 1e-12));
        let dist = a.mul(&b.add(&d).unwrap()).unwrap();
        let split = ab.add(&a.mul(&d).unwrap()).unwrap();
        prop_assert!(close(&dist, &split, 1e-12));
        let one = Jet::constant(a.order(), c(1.0, 0.0));
        prop_assert_eq!(a.mul(&one).unwrap(), a.clone());
    }

    #[test]
    fn truncation_commutes_with_products((a, b, _) in three_jets(), cut in 0usize..10) {
        let t = cut.min(a.order());
        let full = a.mul(&b).unwrap().truncate(t);
        let early = a.truncate(t).mul(&b.truncate(t)).unwrap();
        prop_assert!(close(&full, &early, 1e-15));
    }

    #[test]
    fn truncation_commutes_with_gates(a in jet_strategy(8), cut in 0usize..8) {
        let mut a = a;
        // keep the center away from every singularity
        let mut coeffs = a.coeffs().to_vec();
        coeffs[0] = c(0.8, 0.3);
        a = Jet::from_coeffs(coeffs).unwrap();
        for gate in AnalyticGate::ALL {
            let full = a.compose(gate).unwrap().truncate(cut);
            let early = a.truncate(cut).compose(gate).unwrap();
            prop_assert!(close(&full, &early, 1e-15), "{}", gate);
        }
    }
}

#[test]
fn fft_matches_naive() {
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    for s in [31, 32, 64, 100] {
        for _ in 0..20 {
            let mut draw = || {
                Jet::from_coeffs(
                    (0..=s)
                        .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                        .collect(),
                )
                .unwrap()
            };
            let (a, b) = (draw(), draw());
            let naive = a.mul_naive(&b).unwrap();
            let fft = a.mul_fft(&b).unwrap();
            let scale = naive.coeffs().iter().map(|x| x.norm()).fold(0.0, f64::max);
            for (x, y) in naive.coeffs().iter().zip(fft.coeffs()) {
                assert!((x - y).norm() <= 1e-12 * scale);
            }
            assert_eq!(naive.coeff(0), fft.coeff(0));
        }
    }
}

#[test]
fn gelu_matches_finite_differences() {
    let g = |x: f64| AnalyticGate::Gelu.eval_scalar(c(x, 0.0)).unwrap().re;
    for &x in &[-2.0, -0.7, 0.0, 0.4, 1.9] {
        let jet = Jet::variable(2, c(x, 0.0), c(1.0, 0.0))
            .compose(AnalyticGate::Gelu)
            .unwrap();
        let h = 1e-5;
        let d1 = (g(x + h) - g(x - h)) / (2.0 * h);
        assert!((jet.derivative(1).re - d1).abs() < 1e-8, "x={x}");
        let h = 1e-4;
        let d2 = (g(x + h) - 2.0 * g(x) + g(x - h)) / (h * h);
        assert!((jet.derivative(2).re - d2).abs() < 1e-5, "x={x}");
    }
}

fn cube_of_linear() -> Circuit {
    let mut b = CircuitBuilder::new(2);
    let x1 = b.input(0);
    let x2 = b.input(1);
    let two = b.real(2.0);
    let t = b.mul(&[two, x2]);
    let s = b.add(&[x1, t]);
    let cube = b.mul(&[s, s, s]);
    b.output(cube);
    b.build().unwrap()
}

/// Mixed circuit using every gate, with centers away from singularities.
fn gate_zoo() -> Circuit {
    let mut b = CircuitBuilder::new(3);
    let x = b.input(0);
    let y = b.input(1);
    let z = b.input(2);
    let two = b.real(2.0);
    let shifted = b.add(&[x, two]);
    let r = b.unary(AnalyticGate::Reciprocal, shifted);
    let q = b.unary(AnalyticGate::Sqrt, shifted);
    let l = b.unary(AnalyticGate::Log, shifted);
    let xy = b.mul(&[x, y]);
    let e = b.unary(AnalyticGate::Exp, xy);
    let t = b.unary(AnalyticGate::Tanh, z);
    let g = b.unary(AnalyticGate::Gelu, y);
    let prod = b.mul(&[r, e, t]);
    let out = b.add(&[prod, q, l, g]);
    b.output(out);
    let second = b.mul(&[g, z]);
    b.output(second);
    b.build().unwrap()
}

fn check_oracle_against_jets(f: &Circuit, xstar: &[Complex64], s: usize, seed: u64) {
    let t = exact_taylor_tensors(f, xstar, s).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    for _ in 0..20 {
        let psi = sample_direction(f.num_inputs(), &mut rng);
        let inputs: Vec<Jet> = xstar
            .iter()
            .zip(&psi)
            .map(|(&x, &d)| Jet::variable(s, x, d))
            .collect();
        let jets = f.eval_jets(s, &inputs).unwrap();
        for (o, jet) in jets.iter().enumerate() {
            for r in 0..=s {
                let want = t.directional(o, r, &psi);
                let got = jet.coeff(r);
                assert!(
                    (want - got).norm() <= 1e-10 * (1.0 + want.norm()),
                    "o={o} r={r}: oracle {want} vs jet {got}"
                );
            }
        }
    }
}

#[test]
fn oracle_matches_jets_on_cube() {
    let f = cube_of_linear();
    check_oracle_against_jets(&f, &[c(0.0, 0.0); 2], 3, 1);
    let t = exact_taylor_tensors(&f, &[c(0.0, 0.0); 2], 3).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    for _ in 0..20 {
        let psi = sample_direction(2, &mut rng);
        let want = (psi[0] + 2.0 * psi[1]).powu(3);
        assert!((t.directional(0, 3, &psi) - want).norm() < 1e-12);
    }
}

#[test]
fn oracle_matches_jets_with_gates() {
    let f = gate_zoo();
    let xstar = [c(0.3, 0.1), c(-0.4, 0.0), c(0.2, -0.3)];
    check_oracle_against_jets(&f, &xstar, 4, 9);
}

#[test]
fn oracle_tensors_are_symmetric() {
    let f = gate_zoo();
    let xstar = [c(0.3, 0.1), c(-0.4, 0.0), c(0.2, -0.3)];
    let t = exact_taylor_tensors(&f, &xstar, 3).unwrap();
    for r in 2..=3 {
        let sym = tsketch::oracle::symmetrize(&t.tensor(r)[..3usize.pow(r as u32)], 3, r);
        for (a, b) in sym.iter().zip(t.tensor(r)) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}

#[test]
fn derivative_extraction_matches_oracle() {
    // f^{(r)}(x*)[e_1^{⊗r}] read from a jet along e_1 equals the oracle entry.
    let f = gate_zoo();
    let xstar = [c(0.3, 0.1), c(-0.4, 0.0), c(0.2, -0.3)];
    let t = exact_taylor_tensors(&f, &xstar, 4).unwrap();
    let inputs: Vec<Jet> = xstar
        .iter()
        .enumerate()
        .map(|(j, &x)| Jet::variable(4, x, c(if j == 0 { 1.0 } else { 0.0 }, 0.0)))
        .collect();
    let out = f.eval_jets(4, &inputs).unwrap();
    for r in 0..=4 {
        let want = t.entry(0, &vec![0; r]);
        assert!((out[0].derivative(r) - want).norm() < 1e-9 * (1.0 + want.norm()));
    }
}

#[test]
fn raised_limits_allow_larger_oracles() {
    let mut b = CircuitBuilder::new(6);
    let x = b.input(5);
    let sq = b.mul(&[x, x]);
    b.output(sq);
    let f = b.build().unwrap();
    let xs = [c(0.0, 0.0); 6];
    assert!(exact_taylor_tensors(&f, &xs, 2).is_err());
    let t = tsketch::oracle::exact_taylor_tensors_with_limits(
        &f,
        &xs,
        2,
        OracleLimits { max_n: 8, max_s: 4 },
    )
    .unwrap();
    assert_eq!(t.entry(0, &[5, 5]), c(2.0, 0.0));
}
