//! Oracles shared by the integration tests.

use nalgebra::{DMatrix, DVector};

const FOCK: usize = 4;

/// `⟨σ_z⟩(t)` and the mode occupations `⟨b_j†b_j⟩(t)` for a qubit and three
/// oscillators from the excited state and vacuum, by diagonalising the
/// truncated Hamiltonian.
pub fn exact_dynamics(omega_s: f64, g: &[f64; 3], w: &[f64; 3], times: &[f64]) -> Vec<(f64, [f64; 3])> {
    let dim = 2 * FOCK * FOCK * FOCK;
    let decode = |s: usize| (s / (FOCK * FOCK * FOCK), [(s / (FOCK * FOCK)) % FOCK, (s / FOCK) % FOCK, s % FOCK]);
    let encode = |q: usize, n: [usize; 3]| ((q * FOCK + n[0]) * FOCK + n[1]) * FOCK + n[2];
    let mut h = DMatrix::<f64>::zeros(dim, dim);
    for s in 0..dim {
        let (q, n) = decode(s);
        // q = 0 is the excited state
        h[(s, s)] = if q == 0 { 0.5 * omega_s } else { -0.5 * omega_s };
        for j in 0..3 {
            h[(s, s)] += w[j] * n[j] as f64;
            if n[j] + 1 < FOCK {
                let mut m = n;
                m[j] += 1;
                let t = encode(1 - q, m);
                let v = g[j] * ((n[j] + 1) as f64).sqrt();
                h[(t, s)] += v;
                h[(s, t)] += v;
            }
        }
    }
    let eig = h.symmetric_eigen();
    let psi0 = DVector::from_fn(dim, |s, _| if s == encode(0, [0, 0, 0]) { 1.0 } else { 0.0 });
    let amp = eig.eigenvectors.transpose() * &psi0;
    let sz = DVector::from_fn(dim, |s, _| if decode(s).0 == 0 { 1.0 } else { -1.0 });
    times
        .iter()
        .map(|&t| {
            let (mut re, mut im) = (DVector::zeros(dim), DVector::zeros(dim));
            for k in 0..dim {
                let (s, c) = (eig.eigenvalues[k] * t).sin_cos();
                re += eig.eigenvectors.column(k) * (amp[k] * c);
                im -= eig.eigenvectors.column(k) * (amp[k] * s);
            }
            let mut n = [0.0; 3];
            let mut z = 0.0;
            for s in 0..dim {
                let p = re[s] * re[s] + im[s] * im[s];
                z += p * sz[s];
                for (nj, q) in n.iter_mut().zip(decode(s).1) {
                    *nj += p * q as f64;
                }
            }
            (z, n)
        })
        .collect()
}
