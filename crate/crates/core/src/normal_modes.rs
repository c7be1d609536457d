//! Normal modes of the static quadratic Hamiltonian `nᵀ A n + φᵀ B φ`.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::circuit::{bare_modes, BareModes, BuildOptions, CircuitParams, DriveSpec, ToyParams};
use crate::error::{invalid, Error, Result};
use crate::linalg::eigh_real;

/// `A` couples the charges, `B` is the diagonal of the inductive matrix. GHz.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuadraticForm {
    pub a: [[f64; 3]; 3],
    pub b: [f64; 3],
}

/// `φ_α = Σ_β u_αβ (β + β†)/√2`, `n_α = Σ_β v_αβ (β − β†)/(i√2)`; first index
/// bare, second normal. Frequencies in GHz, ordered like the bare modes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalModeBasis {
    pub u: [[f64; 3]; 3],
    pub v: [[f64; 3]; 3],
    pub frequencies: [f64; 3],
    pub epsilons: [f64; 3],
}

const PERMS: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

/// Permutation `p` (normal index `k` → eigenvector `p[k]`) maximizing
/// `Π_k |w[k][p[k]]|`, ties broken by frequency proximity.
fn best_assignment(weight: impl Fn(usize, usize) -> f64, mismatch: impl Fn(usize, usize) -> f64) -> [usize; 3] {
    let mut best = PERMS[0];
    let mut best_score = (f64::NEG_INFINITY, f64::INFINITY);
    for p in PERMS {
        let score: f64 = (0..3).map(|k| weight(k, p[k]).abs().max(1e-300).ln()).sum();
        let tie: f64 = (0..3).map(|k| mismatch(k, p[k])).sum();
        let better = score > best_score.0 + 1e-12 || ((score - best_score.0).abs() <= 1e-12 && tie < best_score.1);
        if better {
            best = p;
            best_score = (score, tie);
        }
    }
    best
}

impl NormalModeBasis {
    /// `max |u vᵀ − I|`.
    pub fn canonicity_error(&self) -> f64 {
        let mut e = 0.0_f64;
        for i in 0..3 {
            for j in 0..3 {
                let s: f64 = (0..3).map(|k| self.u[i][k] * self.v[j][k]).sum();
                e = e.max((s - if i == j { 1.0 } else { 0.0 }).abs());
            }
        }
        e
    }
}

pub fn normal_mode_transform(q: &QuadraticForm) -> Result<NormalModeBasis> {
    let a = &q.a;
    let scale = a.iter().flatten().fold(0.0_f64, |m, x| m.max(x.abs()));
    for i in 0..3 {
        for j in 0..i {
            if (a[i][j] - a[j][i]).abs() > 1e-12 * scale.max(1.0) {
                return Err(Error::NonSymmetric);
            }
        }
    }
    if q.b.iter().any(|&b| !(b > 0.0)) {
        return Err(invalid("B", "inductive energies must be positive"));
    }
    // Step 1: rescale so that the inductive matrix is proportional to identity.
    // The overall constant cancels in every output.
    let bb: f64 = q.b.iter().product::<f64>().sqrt();
    let f: Vec<f64> = q.b.iter().map(|&b| (bb / b).sqrt()).collect();
    let a_prime = Mat::from_fn(3, 3, |i, j| 0.5 * (a[i][j] + a[j][i]) / (f[i] * f[j]));
    // Step 2: orthonormal diagonalization, rows of S are eigenvectors.
    let (d, w) = eigh_real(a_prime.as_ref());
    if let Some(&neg) = d.iter().find(|&&x| !(x > 0.0)) {
        return Err(Error::UnstableMode(neg));
    }
    let omega_raw: Vec<f64> = d.iter().map(|&x| 2.0 * (x * bb).sqrt()).collect();
    let bare_omega: Vec<f64> = (0..3).map(|i| 2.0 * (a[i][i] * q.b[i]).sqrt()).collect();
    let p = best_assignment(|k, e| w[(k, e)], |k, e| (omega_raw[e] - bare_omega[k]).abs());
    let mut s = [[0.0; 3]; 3];
    let mut dd = [0.0; 3];
    for k in 0..3 {
        let sign = if w[(k, p[k])] < 0.0 { -1.0 } else { 1.0 };
        for alpha in 0..3 {
            s[k][alpha] = sign * w[(alpha, p[k])];
        }
        dd[k] = d[p[k]];
    }
    // Step 3: undo the rescaling.
    let mut u = [[0.0; 3]; 3];
    let mut v = [[0.0; 3]; 3];
    let mut eps = [0.0; 3];
    let mut freqs = [0.0; 3];
    for beta in 0..3 {
        eps[beta] = (bb * dd[beta]).sqrt() / q.b[beta];
        freqs[beta] = 2.0 * (dd[beta] * bb).sqrt();
    }
    for alpha in 0..3 {
        for beta in 0..3 {
            let big_u = f[alpha] * s[beta][alpha] / f[beta];
            let big_v = s[beta][alpha] * f[beta] / f[alpha];
            u[alpha][beta] = big_u * eps[beta].sqrt();
            v[alpha][beta] = big_v / eps[beta].sqrt();
        }
    }
    Ok(NormalModeBasis { u, v, frequencies: freqs, epsilons: eps })
}

/// Quadratic form of the circuit at this drive and the bare-mode data it
/// was assembled from.
pub fn circuit_quadratic_form(
    params: &CircuitParams,
    drive: &DriveSpec,
    opts: &BuildOptions,
) -> Result<(QuadraticForm, BareModes)> {
    let bare = bare_modes(params, drive, opts)?;
    let ec = &bare.charging;
    let mut a = [[0.0; 3]; 3];
    for i in 0..3 {
        a[i][i] = 4.0 * ec.diagonal()[i];
        for j in 0..3 {
            if i != j {
                a[i][j] = 2.0 * ec.coupling(i, j);
            }
        }
    }
    let form_c = BareModes::coupler_form_factor(params, drive, bare.theta_alpha, bare.theta_beta, bare.eta[2]);
    let b = [
        (-bare.eta[0] / 4.0).exp() * params.e_ja / 2.0,
        (-bare.eta[1] / 4.0).exp() * params.e_jb / 2.0,
        form_c * params.e_jc / 2.0,
    ];
    Ok((QuadraticForm { a, b }, bare))
}

/// Drive-renormalized normal modes of the circuit.
pub fn drive_dependent_basis(params: &CircuitParams, drive: &DriveSpec) -> Result<NormalModeBasis> {
    let (q, _) = circuit_quadratic_form(params, drive, &BuildOptions::default())?;
    normal_mode_transform(&q)
}

/// Normal modes of the toy model: orthogonal diagonalization of the
/// number-conserving hopping matrix, so `u = v`.
pub fn toy_normal_modes(toy: &ToyParams) -> Result<NormalModeBasis> {
    toy.validate()?;
    let m = [
        [toy.omega_a, -toy.g_ab, -toy.g_ca],
        [-toy.g_ab, toy.omega_b, -toy.g_bc],
        [-toy.g_ca, -toy.g_bc, toy.omega_c],
    ];
    let (vals, w) = eigh_real(Mat::from_fn(3, 3, |i, j| m[i][j]).as_ref());
    let bare = toy.frequencies();
    let p = best_assignment(|k, e| w[(k, e)], |k, e| (vals[e] - bare[k]).abs());
    let mut u = [[0.0; 3]; 3];
    let mut freqs = [0.0; 3];
    for k in 0..3 {
        let sign = if w[(k, p[k])] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..3 {
            u[j][k] = sign * w[(j, p[k])];
        }
        freqs[k] = vals[p[k]];
    }
    Ok(NormalModeBasis { u, v: u, frequencies: freqs, epsilons: [1.0; 3] })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat_t_mat(x: &[[f64; 3]; 3], m: &[[f64; 3]; 3], y: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
        let mut out = [[0.0; 3]; 3];
        for k in 0..3 {
            for l in 0..3 {
                out[k][l] = (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).map(|(i, j)| x[i][k] * m[i][j] * y[j][l]).sum();
            }
        }
        out
    }

    fn sample_form() -> QuadraticForm {
        QuadraticForm { a: [[0.54, 0.01, 0.06], [0.01, 0.53, 0.062], [0.06, 0.062, 0.8]], b: [16.0, 11.5, 10.0] }
    }

    #[test]
    fn uncoupled_form_gives_bare_modes() {
        let q = QuadraticForm { a: [[0.5, 0.0, 0.0], [0.0, 0.6, 0.0], [0.0, 0.0, 0.9]], b: [18.0, 13.0, 7.0] };
        let nm = normal_mode_transform(&q).unwrap();
        for i in 0..3 {
            let eta = (q.a[i][i] / q.b[i]).sqrt();
            assert!((nm.u[i][i] - eta.sqrt()).abs() < 1e-14);
            assert!((nm.v[i][i] - 1.0 / eta.sqrt()).abs() < 1e-14);
            assert!((nm.frequencies[i] - 2.0 * (q.a[i][i] * q.b[i]).sqrt()).abs() < 1e-13);
            assert!((nm.epsilons[i] - eta).abs() < 1e-14);
            for j in 0..3 {
                if i != j {
                    assert_eq!(nm.u[i][j], 0.0);
                }
            }
        }
    }

    #[test]
    fn frequencies_match_equations_of_motion() {
        // φ̈ = −4AB φ, so ω² are the eigenvalues of 4AB; evaluated here through
        // the symmetric similarity transform √B A √B.
        let q = sample_form();
        let nm = normal_mode_transform(&q).unwrap();
        let sb: Vec<f64> = q.b.iter().map(|x| x.sqrt()).collect();
        let m = Mat::from_fn(3, 3, |i, j| 4.0 * sb[i] * q.a[i][j] * sb[j]);
        let (w2, _) = eigh_real(m.as_ref());
        let mut ours = nm.frequencies.to_vec();
        ours.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for k in 0..3 {
            assert!((ours[k] - w2[k].sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn no_squeezing_terms_in_normal_basis() {
        // Coefficient of β_k β_l is (uᵀBu − vᵀAv)_kl/2 and of β_k†β_l is (uᵀBu + vᵀAv)_kl/2.
        let q = sample_form();
        let nm = normal_mode_transform(&q).unwrap();
        let bm = [[q.b[0], 0.0, 0.0], [0.0, q.b[1], 0.0], [0.0, 0.0, q.b[2]]];
        let ubu = mat_t_mat(&nm.u, &bm, &nm.u);
        let vav = mat_t_mat(&nm.v, &q.a, &nm.v);
        for k in 0..3 {
            for l in 0..3 {
                assert!((ubu[k][l] - vav[k][l]).abs() < 1e-10);
                let hop = ubu[k][l] + vav[k][l];
                let expect = if k == l { nm.frequencies[k] } else { 0.0 };
                assert!((hop - expect).abs() < 1e-10);
            }
        }
        assert!(nm.canonicity_error() < 1e-12);
    }

    #[test]
    fn rejects_bad_forms() {
        let mut q = sample_form();
        q.a[0][1] = 0.5;
        assert_eq!(normal_mode_transform(&q), Err(Error::NonSymmetric));
        let mut q = sample_form();
        q.a = [[0.1, 0.3, 0.0], [0.3, 0.1, 0.0], [0.0, 0.0, 0.1]];
        assert!(matches!(normal_mode_transform(&q), Err(Error::UnstableMode(_))));
    }

    #[test]
    fn toy_basis_is_orthogonal_and_labelled() {
        let toy = ToyParams::reference(4.5, 0.0);
        let nm = toy_normal_modes(&toy).unwrap();
        assert!(nm.canonicity_error() < 1e-13);
        for k in 0..3 {
            assert!(nm.u[k][k] > 0.5);
        }
        assert!(nm.frequencies[0] < nm.frequencies[2] && nm.frequencies[2] < nm.frequencies[1]);
    }

    #[test]
    fn static_circuit_basis_and_zero_drive_identity() {
        let p = CircuitParams::reference_device();
        let phi = 0.3 * std::f64::consts::TAU;
        let a = drive_dependent_basis(&p, &DriveSpec::new(phi, 0.0, 1.0)).unwrap();
        let b = drive_dependent_basis(&p, &DriveSpec::new(phi, 0.0, 3.0)).unwrap();
        assert_eq!(a, b);
        assert!(a.canonicity_error() < 1e-10);
    }

    #[test]
    fn drive_softens_coupler_at_zero_flux() {
        let p = CircuitParams::reference_device();
        let tp = std::f64::consts::TAU;
        let w: Vec<f64> = [0.0, 0.1, 0.2]
            .iter()
            .map(|&d| drive_dependent_basis(&p, &DriveSpec::new(0.0, d * tp, 1.0)).unwrap().frequencies[2])
            .collect();
        assert!(w[0] > w[1] && w[1] > w[2], "{w:?}");
    }

    #[test]
    fn no_coupling_capacitance_means_no_hybridization() {
        let mut p = CircuitParams::reference_device();
        p.c_ab = 0.0;
        p.c_bc = 0.0;
        p.c_ac = 0.0;
        let nm = drive_dependent_basis(&p, &DriveSpec::new(0.7, 0.1, 1.0)).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert!(nm.u[i][j].abs() < 1e-15 && nm.v[i][j].abs() < 1e-15);
                }
            }
        }
    }
}
