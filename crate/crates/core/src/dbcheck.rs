//! Detailed-balance, positivity and fixed-point certification.

use std::f64::consts::{E, PI};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::bath::BathTimescales;
use crate::error::{Error, Result};
use crate::generators::FrequencyPairCoefficients;
use crate::opcore::{
    c, hermitian_eig, hermitize, identity, is_cp, jop_inverse, jop_map, max_abs, min_eigenvalue, op_norm, rop_inverse, rop_map, trace_norm,
    unvectorize, BohrDecomposition, MapKind, Operator, Superoperator, I,
};

/// Largest `ln(λ_max/λ_min)` of the Gibbs state accepted for certification.
pub const MAX_LOG_CONDITION: f64 = 60.0;

fn check_gibbs(gibbs: &Operator) -> Result<()> {
    let vals = hermitian_eig(gibbs).0;
    let (lo, hi) = (vals[0], vals[vals.len() - 1]);
    if !(lo > 0.0) || (hi / lo).ln() > MAX_LOG_CONDITION {
        return Err(Error::Conditioning(format!("Gibbs state spans more than e^{MAX_LOG_CONDITION} (eigenvalues {lo:.3e}..{hi:.3e})")));
    }
    Ok(())
}

/// Petz dual `J ∘ Φ† ∘ J⁻¹`.
pub fn petz_dual(map: &Superoperator, gibbs: &Operator) -> Result<Superoperator> {
    check_gibbs(gibbs)?;
    Ok(jop_map(gibbs)?.compose(&map.adjoint()).compose(&jop_inverse(gibbs)?))
}

/// `R ∘ Φ† ∘ R⁻¹` with right multiplication by the Gibbs state.
pub fn gns_dual(map: &Superoperator, gibbs: &Operator) -> Result<Superoperator> {
    check_gibbs(gibbs)?;
    Ok(rop_map(gibbs).compose(&map.adjoint()).compose(&rop_inverse(gibbs)?))
}

/// Residual of the coefficient identity `c^{ω,ω̃} = conj(c^{−ω,−ω̃}) e^{−β(ω+ω̃)/2}`
/// for one pair of Bohr bins.
#[derive(Clone, Debug, PartialEq)]
pub struct PairResidual {
    pub omega: f64,
    pub omega_tilde: f64,
    pub residual: f64,
}

/// Hamiltonian `H` with `X = −i[H, ·]` when `X` is of that form, traceless.
pub fn hamiltonian_part(x: &Superoperator) -> Operator {
    let d = x.dim();
    let m = x.matrix();
    let mut h = Operator::zeros(d, d);
    for a in 0..d {
        for b in 0..d {
            // X[E_ab] E_ba picks column b of X[E_ab] into column a.
            let col = m.column(a + b * d);
            for r in 0..d {
                h[(r, a)] += col[r + b * d];
            }
        }
    }
    let mut h = h * c(0.0, 1.0 / d as f64);
    let tr = h.trace() / c(d as f64, 0.0);
    for i in 0..d {
        h[(i, i)] -= tr;
    }
    hermitize(&h)
}

/// Restriction of `h` to the commutant of the Gibbs state.
fn commutant_part(h: &Operator, gibbs: &Operator) -> Operator {
    let (vals, vecs) = hermitian_eig(gibbs);
    let mut rotated = vecs.adjoint() * h * &vecs;
    let d = vals.len();
    for i in 0..d {
        for j in 0..d {
            if (vals[i] - vals[j]).abs() > 1e-12 * vals[i].max(vals[j]) {
                rotated[(i, j)] = c(0.0, 0.0);
            }
        }
    }
    hermitize(&(&vecs * rotated * vecs.adjoint()))
}

/// Split a generator into `−i[H⁰, ·]` with `[H⁰, γ] = 0` plus the remainder, where
/// `H⁰` is taken from the part of the generator that is odd under the given dual.
///
/// Such a coherent term is odd under both the KMS and the GNS dual, so detailed
/// balance of a generator is judged on the remainder.
pub fn split_commuting_hamiltonian(gen: &Superoperator, dual: &Superoperator, gibbs: &Operator) -> (Operator, Superoperator) {
    let odd = gen.sub(dual).scale(c(0.5, 0.0));
    let h0 = commutant_part(&hamiltonian_part(&odd), gibbs);
    let rest = gen.sub(&Superoperator::hamiltonian(&h0));
    (h0, rest)
}

#[derive(Clone, Debug)]
pub struct DbReport {
    /// Operator norm of the commuting Hamiltonian removed before the residuals
    /// (always 0 for channels).
    pub commuting_hamiltonian_norm: f64,
    pub kms_residual: f64,
    pub gns_residual: f64,
    pub cp_min_eig: f64,
    pub trace_residual: f64,
    pub gibbs_residual: f64,
    pub per_pair_residuals: Vec<PairResidual>,
}

impl DbReport {
    /// `key = value` lines.
    pub fn to_kv(&self) -> String {
        let rows = [
            ("commuting_hamiltonian_norm", self.commuting_hamiltonian_norm),
            ("kms_residual", self.kms_residual),
            ("gns_residual", self.gns_residual),
            ("cp_min_eig", self.cp_min_eig),
            ("trace_residual", self.trace_residual),
            ("gibbs_residual", self.gibbs_residual),
        ];
        rows.iter().map(|(k, v)| format!("{k} = {v:.11e}\n")).collect()
    }

    /// `omega,omega_tilde,residual` rows.
    pub fn write_pair_csv(&self, out: &mut impl std::io::Write) -> std::io::Result<()> {
        writeln!(out, "omega,omega_tilde,residual")?;
        for p in &self.per_pair_residuals {
            writeln!(out, "{:.11e},{:.11e},{:.11e}", p.omega, p.omega_tilde, p.residual)?;
        }
        Ok(())
    }
}

/// Coefficients `c_{(ij),(kl)}` of `Φ[X] = Σ c E_ij X E_kl†` in the eigenbasis
/// of the Hamiltonian, where `E_ij = |i⟩⟨j|`.
pub fn matrix_unit_coefficients(map: &Superoperator, eigenvectors: &Operator) -> DMatrix<Complex64> {
    let d = map.dim();
    let v = eigenvectors;
    let rotated = Superoperator::sandwich(&v.adjoint(), v).compose(map).compose(&Superoperator::sandwich(v, &v.adjoint()));
    let m = rotated.matrix();
    let mut out = DMatrix::zeros(d * d, d * d);
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                for l in 0..d {
                    out[(i * d + j, k * d + l)] = m[(i + k * d, j + l * d)];
                }
            }
        }
    }
    out
}

fn nearest_bin(freqs: &[f64], w: f64) -> usize {
    let mut best = 0;
    for (i, f) in freqs.iter().enumerate() {
        if (f - w).abs() < (freqs[best] - w).abs() {
            best = i;
        }
    }
    best
}

/// Per-bin-pair residual of the KMS coefficient identity.
pub fn pair_residuals(map: &Superoperator, bohr: &BohrDecomposition, beta: f64) -> Vec<PairResidual> {
    let d = map.dim();
    let cm = matrix_unit_coefficients(map, &bohr.eigenvectors);
    let e = &bohr.eigenvalues;
    let freqs = &bohr.bohr_frequencies;
    let nb = freqs.len();
    let mut table = vec![0.0_f64; nb * nb];
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                for l in 0..d {
                    let (w, wt) = (e[i] - e[j], e[k] - e[l]);
                    let lhs = cm[(i * d + j, k * d + l)];
                    let rhs = cm[(j * d + i, l * d + k)].conj() * (-beta * (w + wt) / 2.0).exp();
                    let idx = nearest_bin(freqs, w) * nb + nearest_bin(freqs, wt);
                    table[idx] = table[idx].max((lhs - rhs).norm());
                }
            }
        }
    }
    let mut out = Vec::new();
    for a in 0..nb {
        for b in 0..nb {
            out.push(PairResidual { omega: freqs[a], omega_tilde: freqs[b], residual: table[a * nb + b] });
        }
    }
    out
}

fn trace_and_gibbs(map: &Superoperator, gibbs: &Operator, kind: MapKind) -> (f64, f64) {
    let d = map.dim();
    let adj_one = map.adjoint().apply(&identity(d));
    let image = map.apply(gibbs);
    match kind {
        MapKind::Generator => (max_abs(&adj_one), trace_norm(&image)),
        MapKind::Channel => (max_abs(&(adj_one - identity(d))), trace_norm(&(image - gibbs))),
    }
}

/// Generator with its commuting Hamiltonian removed, or the channel itself.
fn dissipative_part(map: &Superoperator, gibbs: &Operator, kind: MapKind) -> Result<(f64, Superoperator)> {
    match kind {
        MapKind::Channel => Ok((0.0, map.clone())),
        MapKind::Generator => {
            let (h0, rest) = split_commuting_hamiltonian(map, &petz_dual(map, gibbs)?, gibbs);
            Ok((op_norm(&h0), rest))
        }
    }
}

/// KMS detailed-balance report; the per-pair table needs a Bohr decomposition.
///
/// For generators a coherent term `−i[H⁰, ·]` with `[H⁰, γ] = 0` is removed first
/// and its size reported.
pub fn check_kms(map: &Superoperator, gibbs: &Operator, kind: MapKind, bohr: Option<&BohrDecomposition>, beta: f64) -> Result<DbReport> {
    let (h0_norm, rest) = dissipative_part(map, gibbs, kind)?;
    let kms = petz_dual(&rest, gibbs)?;
    let gns = gns_dual(&rest, gibbs)?;
    let (trace_residual, gibbs_residual) = trace_and_gibbs(map, gibbs, kind);
    let cp = is_cp(map, kind, 1e-8);
    Ok(DbReport {
        commuting_hamiltonian_norm: h0_norm,
        kms_residual: rest.max_abs_diff(&kms),
        gns_residual: rest.max_abs_diff(&gns),
        cp_min_eig: cp.min_eigenvalue,
        trace_residual,
        gibbs_residual,
        per_pair_residuals: bohr.map(|b| pair_residuals(&rest, b, beta)).unwrap_or_default(),
    })
}

#[derive(Clone, Debug)]
pub struct GnsReport {
    pub gns_residual: f64,
    pub kms_residual: f64,
    /// Largest coefficient coupling different Bohr frequencies.
    pub cross_frequency_max: f64,
    /// Whether the GNS residual is within tolerance.
    pub gns_holds: bool,
    /// False only if GNS holds but its consequences (no cross-frequency terms, KMS) fail.
    pub implication_holds: bool,
}

pub fn check_gns(map: &Superoperator, gibbs: &Operator, kind: MapKind, bohr: &BohrDecomposition, tol: f64) -> Result<GnsReport> {
    let rest = match kind {
        MapKind::Channel => map.clone(),
        MapKind::Generator => split_commuting_hamiltonian(map, &gns_dual(map, gibbs)?, gibbs).1,
    };
    let gns_residual = rest.max_abs_diff(&gns_dual(&rest, gibbs)?);
    let kms_residual = dissipative_part(map, gibbs, kind).and_then(|(_, r)| Ok(r.max_abs_diff(&petz_dual(&r, gibbs)?)))?;
    let map = &rest;
    let d = map.dim();
    let cm = matrix_unit_coefficients(map, &bohr.eigenvectors);
    let e = &bohr.eigenvalues;
    let freqs = &bohr.bohr_frequencies;
    let mut cross = 0.0_f64;
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                for l in 0..d {
                    if nearest_bin(freqs, e[i] - e[j]) != nearest_bin(freqs, e[k] - e[l]) {
                        cross = cross.max(cm[(i * d + j, k * d + l)].norm());
                    }
                }
            }
        }
    }
    let gns_holds = gns_residual <= tol;
    let implication_holds = !gns_holds || (cross <= tol.max(1e-9) && kms_residual <= tol.max(1e-9));
    Ok(GnsReport { gns_residual, kms_residual, cross_frequency_max: cross, gns_holds, implication_holds })
}

/// One row of the approximate detailed-balance table.
#[derive(Clone, Debug)]
pub struct ApproxDbRow {
    pub a: usize,
    pub b: usize,
    pub omega: f64,
    pub omega_tilde: f64,
    pub gamma_residual: f64,
    pub gamma_bound: f64,
    /// `None` on the diagonal `ω = ω̃`.
    pub s_residual: Option<f64>,
    pub s_bound: Option<f64>,
    pub pass: bool,
}

#[derive(Clone, Debug)]
pub struct ApproxDbTable {
    pub rows: Vec<ApproxDbRow>,
    pub all_pass: bool,
}

/// Compares every channel pair against the approximate detailed-balance bounds
/// `Γ₀ e^{−(Tω₋)²/4} |1 − e^{β²/T²}|` for `γ` and
/// `(Γ₀/T)(β/(2√(2e)) + τ₀ e^{−(Tω₋)²/4}/√(2π))` for `S` off the diagonal.
///
/// Only pairs present in the tensor are compared; the tolerance `slack` absorbs
/// quadrature error on both sides.
pub fn approx_db_residuals(
    coeffs: &FrequencyPairCoefficients,
    beta: f64,
    timescales: &BathTimescales,
    observation_time: f64,
    slack: f64,
) -> Result<ApproxDbTable> {
    let t = observation_time;
    let (g0, tau0) = (timescales.gamma0, timescales.tau0);
    let freqs = &coeffs.frequencies;
    let tol = 1e-9 * freqs.iter().fold(1.0_f64, |m, f| m.max(f.abs()));
    let mirror = |f: usize| freqs.iter().position(|&w| (w + freqs[f]).abs() <= tol);
    let mut rows = Vec::new();
    let mut all_pass = true;
    for (a, ca) in coeffs.channels.iter().enumerate() {
        for (b, cb) in coeffs.channels.iter().enumerate() {
            let missing = || Error::IncompleteSpectrum(format!("({}, {})", ca.omega, cb.omega));
            let ma = mirror(ca.freq_index).and_then(|f| coeffs.index_of(ca.coupling, f)).ok_or_else(missing)?;
            let mb = mirror(cb.freq_index).and_then(|f| coeffs.index_of(cb.coupling, f)).ok_or_else(missing)?;
            let (w, wt) = (ca.omega, cb.omega);
            let minus = w - wt;
            let diag = ca.freq_index == cb.freq_index;
            let gauss = if diag { 1.0 } else { (-(t * minus).powi(2) / 4.0).exp() };
            let g = coeffs.gamma[(a, b)];
            let gamma_residual = (g - coeffs.gamma[(ma, mb)].conj() * (-beta * (w + wt) / 2.0).exp()).norm();
            let gamma_bound = g0 * gauss * (1.0 - (beta * beta / (t * t)).exp()).abs();
            let mut pass = gamma_residual <= gamma_bound + slack;
            let (s_residual, s_bound) = if diag {
                (None, None)
            } else {
                let res = (coeffs.s_coeff[(a, b)] - I * (beta * minus / 4.0).tanh() * g).norm();
                let bound = g0 / t * (beta / (2.0 * (2.0 * E).sqrt()) + tau0 * gauss / (2.0 * PI).sqrt());
                pass &= res <= bound + slack;
                (Some(res), Some(bound))
            };
            all_pass &= pass;
            rows.push(ApproxDbRow { a, b, omega: w, omega_tilde: wt, gamma_residual, gamma_bound, s_residual, s_bound, pass });
        }
    }
    Ok(ApproxDbTable { rows, all_pass })
}

#[derive(Clone, Debug)]
pub struct FixedPoint {
    pub state: Operator,
    /// Number of singular values below the kernel threshold.
    pub kernel_dimension: usize,
}

impl FixedPoint {
    pub fn is_degenerate(&self) -> bool {
        self.kernel_dimension > 1
    }
}

/// Trace-one Hermitian kernel element of a generator.
pub fn fixed_point(gen: &Superoperator) -> Result<FixedPoint> {
    let d = gen.dim();
    let svd = gen.matrix().clone().svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| Error::NonRelaxing("singular value decomposition failed".into()))?;
    let sv = &svd.singular_values;
    let scale = sv.max().max(f64::MIN_POSITIVE);
    let threshold = 1e-10 * scale;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[a].total_cmp(&sv[b]));
    let kernel_dimension = order.iter().filter(|&&i| sv[i] <= threshold).count();
    let candidates = if kernel_dimension == 0 { vec![order[0]] } else { order[..kernel_dimension].to_vec() };
    for i in candidates {
        let v = v_t.row(i).adjoint();
        let x = unvectorize(&v, d);
        let tr = x.trace();
        if tr.norm() < 1e-8 {
            continue;
        }
        let state = hermitize(&(x / tr));
        let state = &state / c(state.trace().re, 0.0);
        if min_eigenvalue(&state) < -1e-8 {
            continue;
        }
        return Ok(FixedPoint { state, kernel_dimension });
    }
    Err(Error::NonRelaxing(format!("no positive trace-one kernel element (kernel dimension {kernel_dimension})")))
}

/// Rotating-wave projection of a superoperator: keeps the terms `E_ij · E_kl†`
/// with `E_i − E_j = E_k − E_l` (within the Bohr bin tolerance).
pub fn rwa_superop(map: &Superoperator, bohr: &BohrDecomposition) -> Superoperator {
    let d = map.dim();
    let v = &bohr.eigenvectors;
    let e = &bohr.eigenvalues;
    let tol = bohr.bin_tolerance;
    let rotated = Superoperator::sandwich(&v.adjoint(), v).compose(map).compose(&Superoperator::sandwich(v, &v.adjoint()));
    let mut m = rotated.into_matrix();
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                for l in 0..d {
                    if ((e[i] - e[j]) - (e[k] - e[l])).abs() > tol {
                        m[(i + k * d, j + l * d)] = c(0.0, 0.0);
                    }
                }
            }
        }
    }
    let projected = Superoperator::from_matrix(d, m);
    Superoperator::sandwich(v, &v.adjoint()).compose(&projected).compose(&Superoperator::sandwich(&v.adjoint(), v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::make_gaussian_kms_bath;
    use crate::generators::{build_davies, build_db, cg_rates, ObservationTime, RateOptions};
    use crate::models::{maximally_mixed, qubit, random_hermitian, random_model};
    use crate::opcore::{bohr_decompose, gibbs_state, trace_distance, unitary_evolution};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_superop(d: usize, rng: &mut ChaCha8Rng) -> Superoperator {
        let m = DMatrix::from_fn(d * d, d * d, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        Superoperator::from_matrix(d, m)
    }

    #[test]
    fn petz_dual_is_an_involution() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = gibbs_state(&random_hermitian(3, &mut rng), 1.3);
        let s = random_superop(3, &mut rng);
        let twice = petz_dual(&petz_dual(&s, &g).unwrap(), &g).unwrap();
        assert!(twice.max_abs_diff(&s) < 1e-10);
    }

    #[test]
    fn petz_dual_reverses_composition() {
        let m = random_model(3, 1, 0.8, 0.1, 2).unwrap();
        let bohr = bohr_decompose(&m, None).unwrap();
        let bath = make_gaussian_kms_bath(0.8, 1.0, 1.0).unwrap();
        let gen = build_db(&m, &bohr, &bath, ObservationTime::new(2.0).unwrap()).unwrap();
        let g = m.gibbs_state();
        let (_, rest) = split_commuting_hamiltonian(&gen.superop, &petz_dual(&gen.superop, &g).unwrap(), &g);
        let (phi, psi) = (rest.exp(0.3), rest.exp(0.7));
        let lhs = petz_dual(&phi.compose(&psi), &g).unwrap();
        let rhs = petz_dual(&psi, &g).unwrap().compose(&petz_dual(&phi, &g).unwrap());
        assert!(lhs.max_abs_diff(&rhs) < 1e-9);
        // each factor is itself KMS-symmetric
        assert!(check_kms(&phi, &g, MapKind::Channel, None, 0.8).unwrap().kms_residual < 1e-9);
    }

    #[test]
    fn unitary_channel_dual_is_its_inverse() {
        let m = qubit(1.0, 1.0, 0.1).unwrap();
        let g = m.gibbs_state();
        let u = unitary_evolution(&m.hamiltonian, 0.4);
        let channel = Superoperator::sandwich(&u, &u.adjoint());
        let inverse = Superoperator::sandwich(&u.adjoint(), &u);
        assert!(petz_dual(&channel, &g).unwrap().max_abs_diff(&inverse) < 1e-12);
        // as a generator, −i[H, ·] is pure commuting Hamiltonian and balanced
        let rep = check_kms(&Superoperator::hamiltonian(&m.hamiltonian), &g, MapKind::Generator, None, 1.0).unwrap();
        assert!(rep.kms_residual < 1e-12 && (rep.commuting_hamiltonian_norm - 0.5).abs() < 1e-12);
    }

    #[test]
    fn identity_channel_has_zero_residuals() {
        let g = qubit(1.0, 1.0, 0.1).unwrap().gibbs_state();
        let rep = check_kms(&Superoperator::identity(2), &g, MapKind::Channel, None, 1.0).unwrap();
        assert_eq!((rep.kms_residual, rep.gns_residual, rep.trace_residual), (0.0, 0.0, 0.0));
        assert!(rep.gibbs_residual < 1e-15);
    }

    #[test]
    fn davies_is_gns_and_db_is_only_kms() {
        let m = qubit(1.0, 1.0, 0.1).unwrap();
        let bohr = bohr_decompose(&m, None).unwrap();
        let bath = make_gaussian_kms_bath(1.0, 1.0, 1.0).unwrap();
        let g = m.gibbs_state();
        let dav = build_davies(&m, &bohr, &bath).unwrap();
        let rep = check_gns(&dav.superop, &g, MapKind::Generator, &bohr, 1e-9).unwrap();
        assert!(rep.gns_holds && rep.implication_holds && rep.cross_frequency_max < 1e-12, "{rep:?}");
        let db = build_db(&m, &bohr, &bath, ObservationTime::new(2.0).unwrap()).unwrap();
        let rep = check_gns(&db.superop, &g, MapKind::Generator, &bohr, 1e-9).unwrap();
        assert!(rep.gns_residual > 1e-4 && rep.kms_residual < 1e-9, "{rep:?}");
    }

    /// `Σ c_i A_i X A_i†` with real, mixed-sign `c_i`.
    fn random_hermiticity_preserving(d: usize, rng: &mut ChaCha8Rng) -> Superoperator {
        let mut acc = Superoperator::zero(d);
        for _ in 0..4 {
            let a = Operator::from_fn(d, d, |_, _| c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            acc = acc.add(&Superoperator::sandwich(&a, &a.adjoint()).scale(c(rng.gen_range(-1.0..1.0), 0.0)));
        }
        acc
    }

    #[test]
    fn gns_symmetric_maps_are_kms_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let h = random_hermitian(3, &mut rng);
            let bohr = crate::opcore::bohr_decompose_ops(&h, &[identity(3)], None).unwrap();
            let g = gibbs_state(&h, 0.9);
            let s = rwa_superop(&random_hermiticity_preserving(3, &mut rng), &bohr);
            let sym = s.add(&gns_dual(&s, &g).unwrap()).scale(c(0.5, 0.0));
            assert!(sym.hermiticity_preservation_residual() < 1e-10);
            let rep = check_gns(&sym, &g, MapKind::Channel, &bohr, 1e-9).unwrap();
            assert!(rep.gns_holds && rep.cross_frequency_max < 1e-9 && rep.implication_holds, "{rep:?}");
        }
    }

    #[test]
    fn generic_maps_fail_gns() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let h = random_hermitian(3, &mut rng);
        let bohr = crate::opcore::bohr_decompose_ops(&h, &[identity(3)], None).unwrap();
        let rep = check_gns(&random_hermiticity_preserving(3, &mut rng), &gibbs_state(&h, 0.9), MapKind::Channel, &bohr, 1e-9).unwrap();
        assert!(!rep.gns_holds && rep.cross_frequency_max > 1e-3);
    }

    #[test]
    fn db_coefficient_identity_holds_per_pair() {
        let m = random_model(3, 2, 1.0, 0.1, 4).unwrap();
        let bohr = bohr_decompose(&m, None).unwrap();
        let bath = make_gaussian_kms_bath(1.0, 1.0, 1.0).unwrap().independent_channels(2).unwrap();
        let db = build_db(&m, &bohr, &bath, ObservationTime::new(1.5).unwrap()).unwrap();
        let rep = check_kms(&db.superop, &m.gibbs_state(), MapKind::Generator, Some(&bohr), 1.0).unwrap();
        assert_eq!(rep.per_pair_residuals.len(), bohr.bohr_frequencies.len().pow(2));
        assert!(rep.per_pair_residuals.iter().all(|p| p.residual < 1e-9));
    }

    #[test]
    fn ill_conditioned_gibbs_state_is_refused() {
        let g = gibbs_state(&crate::opcore::diag_real(&[0.0, 1.0]), 80.0);
        assert!(matches!(petz_dual(&Superoperator::identity(2), &g), Err(Error::Conditioning(_))));
    }

    #[test]
    fn approx_db_table_for_q1() {
        let m = qubit(1.0, 1.0, 0.1).unwrap();
        let bohr = bohr_decompose(&m, None).unwrap();
        let bath = make_gaussian_kms_bath(1.0, 1.0, 1.0).unwrap();
        let ts = bath.timescales().unwrap();
        let coeffs = cg_rates(&bohr, &bath, ObservationTime::new(7.07).unwrap(), &RateOptions::default()).unwrap();
        let table = approx_db_residuals(&coeffs, 1.0, &ts, 7.07, 0.0).unwrap();
        assert!(table.all_pass);
        let s_bound = |t: f64| approx_db_residuals(&coeffs, 1.0, &ts, t, 0.0).unwrap().rows.iter().filter_map(|r| r.s_bound).fold(0.0, f64::max);
        // the Gaussian term is negligible here, so the bound scales as 1/T
        assert!((s_bound(7.07) / s_bound(14.14) - 2.0).abs() < 1e-6);
        let mut partial = coeffs.clone();
        partial.channels.truncate(1);
        partial.gamma = partial.gamma.view((0, 0), (1, 1)).into_owned();
        partial.s_coeff = partial.s_coeff.view((0, 0), (1, 1)).into_owned();
        assert!(matches!(approx_db_residuals(&partial, 1.0, &ts, 7.07, 0.0), Err(Error::IncompleteSpectrum(_))));
    }

    #[test]
    fn fixed_points() {
        let m = qubit(1.0, 1.0, 0.1).unwrap();
        let bohr = bohr_decompose(&m, None).unwrap();
        let bath = make_gaussian_kms_bath(1.0, 1.0, 1.0).unwrap();
        let db = build_db(&m, &bohr, &bath, ObservationTime::new(3.0).unwrap()).unwrap();
        let fp = fixed_point(&db.superop).unwrap();
        assert!(!fp.is_degenerate());
        assert!(trace_distance(&fp.state, &m.gibbs_state()) < 1e-7);

        let unitary = Superoperator::hamiltonian(&m.hamiltonian);
        assert!(fixed_point(&unitary).unwrap().is_degenerate());

        let d = 3;
        let depolarize = Superoperator::from_matrix(d, {
            let mut target = DMatrix::zeros(d * d, d * d);
            let mixed = crate::opcore::vectorize(&maximally_mixed(d));
            let one = crate::opcore::vectorize(&identity(d));
            target += &mixed * one.transpose();
            target - DMatrix::identity(d * d, d * d)
        });
        let fp = fixed_point(&depolarize).unwrap();
        assert!(trace_distance(&fp.state, &maximally_mixed(d)) < 1e-10);
    }
}
