//! Closed-form performance analysis: Perron weighting, the covariance
//! transition operators, the covariance fixed point, steady-state MSD
//! (exact and low-rank), and convergence-rate predictions.

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::blockalg::{
    block_kron, bvec, from_real, hermitian_eigenvalues, matrix_norm, solve_linear,
    spectral_radius, unbvec, BlockMatrix, CMat, CVec, MatrixJson,
};
use crate::error::{Error, Result};
use crate::netmodel::{
    augmented_quantities, check_primitive, check_stability, combination_moments, nu as nu_of,
    step_moments, AsyncNetworkModel, AugmentedQuantities, CombinationMoments, MomentMode, NuReport,
    PrimitivityVerdict, PrimitivityWitness, RMat, StabilityVerdict, StepMoments,
};

/// Exact covariance fixed points are only offered up to this operator
/// dimension (4 M^2 N^2); larger models must use the low-rank path.
pub const EXACT_DIM_GUARD: usize = 4096;

/// The dual assembly of the transition operator is cross-checked up to this
/// dimension; above it only the factored form is built.
pub const DUAL_CHECK_DIM: usize = 1024;

const PERRON_MAX_ITERS: usize = 1_000_000;

/// Perron (stationary) weights of the combination moments: `p` for the
/// second-order operator, `p_bar` for the mean matrix, and the reshaped
/// `P_p` whose diagonal and row sums enter the aggregate formulas.
#[derive(Debug, Clone)]
pub struct PerronPair {
    pub p: DVector<f64>,
    pub p_bar: DVector<f64>,
    pub p_p: RMat,
    pub residual: f64,
}

/// Perron vector of a left-stochastic primitive matrix, normalized to sum
/// one: a direct bordered solve for small matrices, 1-normalized power
/// iteration beyond.
fn perron_vector(b: &RMat, tol: f64) -> Result<DVector<f64>> {
    let n = b.nrows();
    let p = if n <= 64 {
        // (B - I) p = 0 with the last equation replaced by sum(p) = 1.
        let mut sys = b - RMat::identity(n, n);
        for j in 0..n {
            sys[(n - 1, j)] = 1.0;
        }
        let mut rhs = DVector::zeros(n);
        rhs[n - 1] = 1.0;
        let lu = sys.full_piv_lu();
        lu.solve(&rhs).ok_or(Error::Singular { pivot: 0.0, threshold: 0.0 })?
    } else {
        let mut p = DVector::from_element(n, 1.0 / n as f64);
        let mut converged = false;
        let mut last_delta = f64::INFINITY;
        for _ in 0..PERRON_MAX_ITERS {
            let mut next = b * &p;
            let s: f64 = next.iter().sum();
            next /= s;
            let delta = (&next - &p).amax();
            p = next;
            if delta <= tol {
                converged = true;
                break;
            }
            last_delta = delta;
        }
        if !converged {
            return Err(Error::NonConvergence {
                iterations: PERRON_MAX_ITERS,
                last: last_delta,
                prev: f64::INFINITY,
            });
        }
        p
    };
    let s: f64 = p.iter().sum();
    let p = p / s;
    for (i, &v) in p.iter().enumerate() {
        if v <= 0.0 {
            return Err(Error::NonPositivePerron { index: i, value: v });
        }
    }
    Ok(p)
}

pub fn perron_pair(moments: &CombinationMoments, tol: f64) -> Result<PerronPair> {
    let n = moments.a_bar.nrows();
    let b = moments.mean_kron();
    let p = perron_vector(&b, tol)?;
    let p_bar = perron_vector(&moments.a_bar, tol)?;
    let p_p = RMat::from_fn(n, n, |r, c| p[c * n + r]);
    let residual = (&b * &p - &p).amax().max((&moments.a_bar * &p_bar - &p_bar).amax());
    Ok(PerronPair { p, p_bar, p_p, residual })
}

/// Mean per-agent transition factors `D_k = I - mu_k H_k`.
pub fn mean_step_matrices(steps: &StepMoments, aug: &AugmentedQuantities) -> Vec<CMat> {
    aug.h
        .iter()
        .zip(&steps.m1)
        .map(|(h, &mu)| CMat::identity(h.nrows(), h.nrows()) - h.scale(mu))
        .collect()
}

/// One diagonal block of the step operator:
/// `G_{lk} = D_l^T (x) D_k + c_{mu,lk} (H_l^T (x) H_k)`.
pub fn g_block(
    d_bar: &[CMat],
    h: &[CMat],
    c_mu: &RMat,
    l: usize,
    k: usize,
) -> CMat {
    d_bar[l].transpose().kronecker(&d_bar[k])
        + h[l].transpose().kronecker(&h[k]).scale(c_mu[(l, k)])
}

/// Assembles the block-diagonal step operator; segment `l*N + k` carries
/// `G_{lk}`, matching the block-vectorization segment order.
pub fn build_g(d_bar: &[CMat], h: &[CMat], c_mu: &RMat) -> CMat {
    let n = d_bar.len();
    let b2 = d_bar[0].nrows() * d_bar[0].nrows();
    let mut g = CMat::zeros(b2 * n * n, b2 * n * n);
    for l in 0..n {
        for k in 0..n {
            let s = l * n + k;
            g.view_mut((s * b2, s * b2), (b2, b2)).copy_from(&g_block(d_bar, h, c_mu, l, k));
        }
    }
    g
}

/// Closed-form spectral radius of the step operator:
/// `max_{k,m} (1 - mu_k lambda_{k,m})^2 + c_{mu,kk} lambda_{k,m}^2`.
pub fn rho_g_closed(steps: &StepMoments, aug: &AugmentedQuantities) -> f64 {
    let mut best = 0.0f64;
    for k in 0..steps.m1.len() {
        for lam in hermitian_eigenvalues(&aug.h[k]) {
            best = best.max((1.0 - steps.m1[k] * lam).powi(2) + steps.c_mu[(k, k)] * lam * lam);
        }
    }
    best
}

/// Covariance transition operator assembled two independent ways; returns
/// the factored form plus the relative deviation of the dual assembly
/// (when the dimension permits the cross-check).
pub struct FcalBuild {
    pub fcal: CMat,
    pub dual_rel_diff: Option<f64>,
}

pub fn build_fcal(
    moments: &CombinationMoments,
    steps: &StepMoments,
    aug: &AugmentedQuantities,
) -> Result<FcalBuild> {
    let n = moments.a_bar.nrows();
    let two_m = aug.h[0].nrows();
    let b2 = two_m * two_m;
    let dim = b2 * n * n;
    if dim > EXACT_DIM_GUARD {
        return Err(Error::DimensionGuard { dim, guard: EXACT_DIM_GUARD });
    }
    let d_bar = mean_step_matrices(steps, aug);
    let b = moments.mean_kron();
    // Factored form: block (s, t) of G (B (x) I) is B[s, t] G_s, since G
    // is block diagonal.
    let mut fcal = CMat::zeros(dim, dim);
    for l in 0..n {
        for k in 0..n {
            let s = l * n + k;
            let gs = g_block(&d_bar, &aug.h, &steps.c_mu, l, k);
            for t in 0..n * n {
                let w = b[(s, t)];
                if w != 0.0 {
                    let mut view = fcal.view_mut((s * b2, t * b2), (b2, b2));
                    for (dst, src) in view.iter_mut().zip(gs.iter()) {
                        *dst = src * w;
                    }
                }
            }
        }
    }
    let dual_rel_diff = if dim <= DUAL_CHECK_DIM {
        Some(fcal_dual_rel_diff(moments, steps, aug, &d_bar, &fcal))
    } else {
        None
    };
    Ok(FcalBuild { fcal, dual_rel_diff })
}

/// Rebuilds the transition operator from the mean-plus-covariance
/// definition and reports the relative deviation from the factored form.
fn fcal_dual_rel_diff(
    moments: &CombinationMoments,
    steps: &StepMoments,
    aug: &AugmentedQuantities,
    d_bar: &[CMat],
    fcal: &CMat,
) -> f64 {
    let n = moments.a_bar.nrows();
    let two_m = aug.h[0].nrows();
    let b2 = two_m * two_m;
    let dim = b2 * n * n;

    let block = |m: &CMat| BlockMatrix::new(m.clone(), two_m, two_m).unwrap();
    let blkdiag = |parts: &[CMat]| {
        let mut out = CMat::zeros(two_m * n, two_m * n);
        for (k, p) in parts.iter().enumerate() {
            out.view_mut((k * two_m, k * two_m), (two_m, two_m)).copy_from(p);
        }
        out
    };
    let dbar_full = blkdiag(d_bar);
    let hcal = blkdiag(&aug.h);
    let a_bar_full = from_real(&moments.a_bar).kronecker(&CMat::identity(two_m, two_m));
    let b_bar = a_bar_full.transpose() * &dbar_full;

    // C_D = C_M (H^T (x)_b H); C_M is diagonal per segment.
    let mut c_d = block_kron(&block(&hcal.transpose()), &block(&hcal));
    for l in 0..n {
        for k in 0..n {
            let s = l * n + k;
            let c = steps.c_mu[(l, k)];
            for x in c_d.view_mut((s * b2, s * b2), (b2, b2)).iter_mut() {
                *x *= c;
            }
        }
    }
    let dtd = block_kron(&block(&dbar_full.transpose()), &block(&dbar_full));
    let at = a_bar_full.transpose();
    let atbat = block_kron(&block(&at), &block(&at));
    let c_a_full = from_real(&moments.c_a).kronecker(&CMat::identity(b2, b2));
    let c_b = &atbat * &c_d + c_a_full.transpose() * (&dtd + &c_d);
    let dual =
        block_kron(&block(&b_bar.transpose()), &block(&b_bar.adjoint())) + c_b.adjoint();
    debug_assert_eq!(dual.nrows(), dim);
    matrix_norm(&(&dual - fcal)) / matrix_norm(fcal)
}

/// Perron-weighted aggregate of the step operator blocks,
/// `F = sum_{l,k} p_{lk} G_{lk}`.
pub fn f_small(
    perron: &PerronPair,
    steps: &StepMoments,
    aug: &AugmentedQuantities,
) -> CMat {
    let n = perron.p_bar.len();
    let d_bar = mean_step_matrices(steps, aug);
    let b2 = d_bar[0].nrows() * d_bar[0].nrows();
    let mut f = CMat::zeros(b2, b2);
    for l in 0..n {
        for k in 0..n {
            f += g_block(&d_bar, &aug.h, &steps.c_mu, l, k).scale(perron.p[l * n + k]);
        }
    }
    f
}

/// `H = sum_k pbar_k mu_k H_k`.
pub fn h_aggregate(perron: &PerronPair, steps: &StepMoments, aug: &AugmentedQuantities) -> CMat {
    let two_m = aug.h[0].nrows();
    let mut h = CMat::zeros(two_m, two_m);
    for k in 0..perron.p_bar.len() {
        h += aug.h[k].scale(perron.p_bar[k] * steps.m1[k]);
    }
    h
}

/// `R = sum_k p_kk (mu_k^2 + c_{mu,kk}) R_k`.
pub fn r_aggregate(perron: &PerronPair, steps: &StepMoments, aug: &AugmentedQuantities) -> CMat {
    let two_m = aug.r[0].nrows();
    let mut r = CMat::zeros(two_m, two_m);
    for k in 0..perron.p_bar.len() {
        let w = perron.p_p[(k, k)] * (steps.m1[k] * steps.m1[k] + steps.c_mu[(k, k)]);
        r += aug.r[k].scale(w);
    }
    r
}

/// Small-dimension covariance fixed point `Z = unvec((I - F)^{-1} vec(R))`.
pub fn z_matrix(f: &CMat, r: &CMat) -> Result<CMat> {
    let two_m = r.nrows();
    let dim = two_m * two_m;
    let sys = CMat::identity(dim, dim) - f;
    let rhs = CVec::from_iterator(dim, r.iter().copied());
    let sol = solve_linear(&sys, &rhs)?;
    Ok(CMat::from_iterator(two_m, two_m, sol.iter().copied()))
}

/// `MSD = 1/4 Tr(H^{-1} R)`.
pub fn msd_lowrank(h: &CMat, r: &CMat) -> Result<f64> {
    let lu = h.clone().full_piv_lu();
    let x = lu.solve(r).ok_or(Error::Singular { pivot: 0.0, threshold: 0.0 })?;
    Ok(0.25 * x.diagonal().iter().map(|c| c.re).sum::<f64>())
}

/// Rank-one resolvent approximation `(p 1^T) (x) (I - F)^{-1}`.
pub fn lowrank_resolvent(perron: &PerronPair, f: &CMat) -> Result<CMat> {
    let b2 = f.nrows();
    let sys = CMat::identity(b2, b2) - f;
    let inv = sys
        .full_piv_lu()
        .try_inverse()
        .ok_or(Error::Singular { pivot: 0.0, threshold: 0.0 })?;
    let n2 = perron.p.len();
    let rank1 = RMat::from_fn(n2, n2, |i, _| perron.p[i]);
    Ok(from_real(&rank1).kronecker(&inv))
}

/// Steady-state mean-square deviations from the exact covariance fixed
/// point; values are in the original M-dimensional space.
pub struct ExactMsd {
    pub net: f64,
    pub per_agent: Vec<f64>,
    pub z: CVec,
}

/// Driving term `y = (A^T (x)_b A^T + C_A^T)(M (x)_b M + C_M) bvec(R)`
/// with `R = diag{R_k}`.
pub fn steady_input(
    moments: &CombinationMoments,
    steps: &StepMoments,
    aug: &AugmentedQuantities,
) -> CVec {
    let n = moments.a_bar.nrows();
    let two_m = aug.r[0].nrows();
    let b2 = two_m * two_m;
    let mut rcal = CMat::zeros(two_m * n, two_m * n);
    for (k, rk) in aug.r.iter().enumerate() {
        rcal.view_mut((k * two_m, k * two_m), (two_m, two_m)).copy_from(rk);
    }
    let mut v = bvec(&BlockMatrix::new(rcal, two_m, two_m).unwrap());
    // (M (x)_b M + C_M) is diagonal: segment (l, k) scales by
    // mu_l mu_k + c_{mu,lk}.
    for l in 0..n {
        for k in 0..n {
            let s = l * n + k;
            let w = steps.m1[l] * steps.m1[k] + steps.c_mu[(l, k)];
            for x in v.rows_mut(s * b2, b2).iter_mut() {
                *x *= w;
            }
        }
    }
    // (A^T (x)_b A^T + C_A^T) acts segment-wise through B^T.
    let b = moments.mean_kron();
    let mut out = CVec::zeros(v.len());
    for s in 0..n * n {
        let mut seg = CVec::zeros(b2);
        for t in 0..n * n {
            let w = b[(t, s)];
            if w != 0.0 {
                seg += v.rows(t * b2, b2).scale(w);
            }
        }
        out.rows_mut(s * b2, b2).copy_from(&seg);
    }
    out
}

pub fn msd_exact(
    moments: &CombinationMoments,
    steps: &StepMoments,
    aug: &AugmentedQuantities,
) -> Result<ExactMsd> {
    let n = moments.a_bar.nrows();
    let two_m = aug.r[0].nrows();
    let b2 = two_m * two_m;
    let fcal = build_fcal(moments, steps, aug)?.fcal;
    let y = steady_input(moments, steps, aug);
    let dim = y.len();
    let sys = CMat::identity(dim, dim) - fcal.adjoint();
    let z = solve_linear(&sys, &y)?;
    // MSD_net = (1/2N) z^* bvec(I); MSD_k = 1/2 z^* bvec(E_kk (x) I).
    // bvec(I) picks the trace of each diagonal segment.
    let mut per_agent = Vec::with_capacity(n);
    for k in 0..n {
        let s = k * n + k;
        let mut tr = Complex64::new(0.0, 0.0);
        for j in 0..two_m {
            tr += z[s * b2 + j * two_m + j].conj();
        }
        per_agent.push(0.5 * tr.re);
    }
    let net = per_agent.iter().sum::<f64>() / n as f64;
    Ok(ExactMsd { net, per_agent, z })
}

/// Exact vs Perron-aggregated spectral radii of the covariance transition.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateReport {
    pub rho_exact: f64,
    pub rho_small: f64,
    pub gap: f64,
    /// Second-order expansion `(1 - lambda_min(H))^2`.
    pub rho_small_approx: f64,
}

pub fn convergence_rate(fcal: &CMat, f: &CMat, h: &CMat) -> Result<RateReport> {
    let rho_exact = spectral_radius(fcal, 1e-12)?;
    let rho_small = spectral_radius(f, 1e-12)?;
    let lam_min = hermitian_eigenvalues(h).into_iter().fold(f64::INFINITY, f64::min);
    Ok(RateReport {
        rho_exact,
        rho_small,
        gap: (rho_exact - rho_small).abs(),
        rho_small_approx: (1.0 - lam_min).powi(2),
    })
}

/// Iterates `z_i = Fcal^* z_{i-1} + y` for `steps` iterations.
pub fn cov_recursion(z0: &CVec, steps: usize, fcal: &CMat, y: &CVec) -> Vec<CVec> {
    let op = fcal.adjoint();
    let mut out = Vec::with_capacity(steps + 1);
    out.push(z0.clone());
    let mut z = z0.clone();
    for _ in 0..steps {
        z = &op * &z + y;
        out.push(z.clone());
    }
    out
}

/// Agreement-regime network covariance `(1 1^T) (x) Z`.
pub fn network_cov_approx(z: &CMat, n: usize) -> CMat {
    let ones = RMat::from_element(n, n, 1.0);
    from_real(&ones).kronecker(z)
}

/// Structure test for augmented covariances: `L X^T L = X` with `L` the
/// block anti-identity, plus near-nonnegative spectrum.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChtReport {
    pub is_cht: bool,
    pub asym_residual: f64,
    pub min_eig: f64,
}

pub fn check_complex_hessian(x: &CMat) -> ChtReport {
    let two_m = x.nrows();
    let m = two_m / 2;
    let mut l = CMat::zeros(two_m, two_m);
    for i in 0..m {
        l[(i, m + i)] = Complex64::new(1.0, 0.0);
        l[(m + i, i)] = Complex64::new(1.0, 0.0);
    }
    let norm = matrix_norm(x).max(f64::MIN_POSITIVE);
    let asym_residual = matrix_norm(&(&l * x.transpose() * &l - x));
    let min_eig = hermitian_eigenvalues(x).into_iter().fold(f64::INFINITY, f64::min);
    ChtReport {
        is_cht: asym_residual <= 1e-10 * norm && min_eig >= -1e-10 * norm,
        asym_residual,
        min_eig,
    }
}

/// MSD and agreement exponents from the noise regularity exponent.
pub fn exponents(gamma_v: f64) -> (f64, f64) {
    (0.5 * gamma_v.min(1.0), 0.5 * gamma_v.min(2.0))
}

/// Full analysis output; matrices are included only on request.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TheoryReport {
    pub n_agents: usize,
    pub m_dim: usize,
    pub nu: f64,
    pub excluded_agents: Vec<usize>,
    pub stability: StabilityVerdict,
    pub primitive: bool,
    pub mean_primitive: bool,
    pub perron_residual: f64,
    pub p_bar: Vec<f64>,
    pub rho_g_closed: f64,
    pub rho_g_numeric: f64,
    pub rho_fcal: f64,
    pub rho_f_small: f64,
    pub rate_gap: f64,
    pub rho_f_approx: f64,
    pub msd_exact_net: f64,
    pub msd_exact_per_agent: Vec<f64>,
    pub msd_lowrank: f64,
    pub trace_z: f64,
    pub half_trace_hinv_r: f64,
    pub gamma_o: f64,
    pub gamma_o_prime: f64,
    pub alpha: f64,
    pub diagnostics: TheoryDiagnostics,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matrices: Option<TheoryMatrices>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TheoryDiagnostics {
    pub fcal_dual_rel_diff: Option<f64>,
    pub z_cht: ChtReport,
    pub unbvec_z_min_eig: f64,
    pub unbvec_z_herm_residual: f64,
    pub primitivity_witness: PrimitivityWitness,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TheoryMatrices {
    pub f_small: MatrixJson,
    pub h_aggregate: MatrixJson,
    pub r_aggregate: MatrixJson,
    pub z_cov: MatrixJson,
}

/// Everything derived from a model that both the analysis and the
/// simulator comparison need, computed once.
pub struct TheoryContext {
    pub moments: CombinationMoments,
    pub steps: StepMoments,
    pub aug: AugmentedQuantities,
    pub nu: NuReport,
    pub perron: PerronPair,
    pub primitivity: PrimitivityVerdict,
}

pub fn theory_context(model: &AsyncNetworkModel) -> Result<TheoryContext> {
    model.validate()?;
    let moments = combination_moments(&model.combination, &model.topology, MomentMode::Exact, 0)?;
    let steps = step_moments(&model.steps)?;
    let aug = augmented_quantities(&model.scenario)?;
    let nu = nu_of(&steps)?;
    let primitivity = check_primitive(&moments);
    if !primitivity.primitive {
        return Err(Error::NotPrimitive(format!("{:?}", primitivity.witness)));
    }
    let perron = perron_pair(&moments, 1e-12)?;
    Ok(TheoryContext { moments, steps, aug, nu, perron, primitivity })
}

pub fn analyze(model: &AsyncNetworkModel, with_matrices: bool) -> Result<TheoryReport> {
    let ctx = theory_context(model)?;
    let TheoryContext { moments, steps, aug, nu, perron, primitivity } = &ctx;
    let n = model.topology.n();
    let stability = check_stability(steps, aug);

    let d_bar = mean_step_matrices(steps, aug);
    let g = build_g(&d_bar, &aug.h, &steps.c_mu);
    let rho_g_numeric = spectral_radius(&g, 1e-12)?;
    let fb = build_fcal(moments, steps, aug)?;
    let f = f_small(perron, steps, aug);
    let h = h_aggregate(perron, steps, aug);
    let r = r_aggregate(perron, steps, aug);
    let z = z_matrix(&f, &r)?;
    let rate = convergence_rate(&fb.fcal, &f, &h)?;
    let exact = msd_exact(moments, steps, aug)?;
    let lowrank = msd_lowrank(&h, &r)?;
    let (gamma_o, gamma_o_prime) = exponents(aug.gamma_v);

    let two_m = 2 * model.scenario.m;
    let wz = unbvec(&exact.z, two_m * n, two_m * n, two_m, two_m)?;
    let herm_res = matrix_norm(&(&wz.matrix - wz.matrix.adjoint())) / matrix_norm(&wz.matrix).max(1e-300);
    let wz_min_eig = hermitian_eigenvalues(&wz.matrix).into_iter().fold(f64::INFINITY, f64::min);

    let half_trace = 2.0 * msd_lowrank(&h, &r)?;
    Ok(TheoryReport {
        n_agents: n,
        m_dim: model.scenario.m,
        nu: nu.nu,
        excluded_agents: nu.excluded_agents.clone(),
        stability,
        primitive: primitivity.primitive,
        mean_primitive: crate::netmodel::check_mean_primitive(&moments.a_bar),
        perron_residual: perron.residual,
        p_bar: perron.p_bar.iter().copied().collect(),
        rho_g_closed: rho_g_closed(steps, aug),
        rho_g_numeric,
        rho_fcal: rate.rho_exact,
        rho_f_small: rate.rho_small,
        rate_gap: rate.gap,
        rho_f_approx: rate.rho_small_approx,
        msd_exact_net: exact.net,
        msd_exact_per_agent: exact.per_agent.clone(),
        msd_lowrank: lowrank,
        trace_z: z.diagonal().iter().map(|c| c.re).sum::<f64>(),
        half_trace_hinv_r: half_trace,
        gamma_o,
        gamma_o_prime,
        alpha: aug.alpha,
        diagnostics: TheoryDiagnostics {
            fcal_dual_rel_diff: fb.dual_rel_diff,
            z_cht: check_complex_hessian(&z),
            unbvec_z_min_eig: wz_min_eig,
            unbvec_z_herm_residual: herm_res,
            primitivity_witness: primitivity.witness.clone(),
        },
        matrices: if with_matrices {
            Some(TheoryMatrices {
                f_small: MatrixJson::from_matrix(&f, two_m, two_m),
                h_aggregate: MatrixJson::from_matrix(&h, two_m, two_m),
                r_aggregate: MatrixJson::from_matrix(&r, two_m, two_m),
                z_cov: MatrixJson::from_matrix(&z, two_m, two_m),
            })
        } else {
            None
        },
    })
}
