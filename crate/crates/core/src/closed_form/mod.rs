//! Closed-form ergodic SE expressions and the devices behind them: Gaussian
//! quadratic-form moments, the MRC and LMMSE approximations, the exact
//! completely-overlapped LMMSE rate, and the first-order Neumann inverse.

mod expint;

pub use expint::{exp_integral, exp_integral_scaled};

use nalgebra::DMatrix;

use crate::channel::ChannelStats;
use crate::combiner::{Combiner, ReducedCorrelation};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, sign_log_det, trace_of_product, trace_re, CMat, C64};
use crate::receivers::{snr_db_to_linear, Method, Receiver, SeResult};

/// Minimum relative gap between consecutive eigenvalues accepted by
/// [`completely_overlapped_se`].
pub const EIGEN_GAP_TOL: f64 = 1e-6;

/// Moments of `h_k^H B h_k` and `h_k^H B h_i` for Gaussian channels.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSet {
    /// `E{h_k^H B h_k} = tr(B Θ_k)`
    pub mean_quadratic: f64,
    /// `E{|h_k^H B h_k|²} = tr(B Θ_k B Θ_k) + tr²(B Θ_k)`
    pub second_moment: f64,
    /// `E{|h_k^H B h_i|²} = tr(B Θ_i B Θ_k)`, one per interferer
    pub cross_moments: Vec<f64>,
    /// `E{‖h_k^H B‖²} = tr(B B^H Θ_k)`
    pub noise_term: f64,
}

/// Dense evaluation of the four trace formulas.
pub fn gaussian_moments(b: &CMat, theta_k: &CMat, others: &[&CMat]) -> MomentSet {
    let bt = b * theta_k;
    let mean = trace_re(&bt);
    let second = trace_of_product(&bt, &bt).re + mean * mean;
    let cross = others
        .iter()
        .map(|ti| trace_of_product(&(b * *ti), &bt).re)
        .collect();
    let noise = trace_of_product(&(b * b.adjoint()), theta_k).re;
    MomentSet {
        mean_quadratic: mean,
        second_moment: second,
        cross_moments: cross,
        noise_term: noise,
    }
}

impl MomentSet {
    /// Same moments from `T = W^H Θ W` matrices.
    pub fn from_reduced(own: &ReducedCorrelation, others: &[&ReducedCorrelation], gram_diag: &[f64]) -> Self {
        let mean = own.trace();
        MomentSet {
            mean_quadratic: mean,
            second_moment: own.trace_product(own) + mean * mean,
            cross_moments: others.iter().map(|o| o.trace_product(own)).collect(),
            noise_term: own.noise_trace(gram_diag),
        }
    }
}

/// MRC approximation `log2(1 + E{X}/E{Y})`.
pub fn mrc_se_from_moments(m: &MomentSet, p_u: f64) -> f64 {
    if m.mean_quadratic <= 0.0 {
        return 0.0;
    }
    let interference: f64 = m.cross_moments.iter().sum();
    let denom = interference + m.noise_term / p_u;
    if denom <= 0.0 {
        return 0.0;
    }
    (1.0 + m.second_moment / denom).log2()
}

pub fn mrc_se_approx(b: &CMat, theta_k: &CMat, others: &[&CMat], p_u: f64) -> f64 {
    mrc_se_from_moments(&gaussian_moments(b, theta_k, others), p_u)
}

/// LMMSE approximation `log2(1 + p_u tr(B Θ_k))`.
pub fn lmmse_se_from_trace(trace_b_theta: f64, p_u: f64) -> f64 {
    (1.0 + p_u * trace_b_theta.max(0.0)).log2()
}

pub fn lmmse_se_approx(b: &CMat, theta_k: &CMat, p_u: f64) -> f64 {
    lmmse_se_from_trace(trace_of_product(b, theta_k).re, p_u)
}

/// Per-user closed-form SE of every user on an SNR grid.
pub fn closed_form_se(
    stats: &[ChannelStats],
    combiner: &Combiner,
    receiver: Receiver,
    snr_grid_db: &[f64],
) -> Vec<SeResult> {
    let reduced: Vec<ReducedCorrelation> = stats.iter().map(|s| combiner.reduce(s)).collect();
    let gram = combiner.gram_diag();
    let moments: Vec<MomentSet> = (0..reduced.len())
        .map(|k| {
            let others: Vec<&ReducedCorrelation> =
                reduced.iter().enumerate().filter(|(i, _)| *i != k).map(|(_, r)| r).collect();
            MomentSet::from_reduced(&reduced[k], &others, &gram)
        })
        .collect();
    snr_grid_db
        .iter()
        .map(|&snr_db| {
            let p = snr_db_to_linear(snr_db);
            let per_user = moments
                .iter()
                .map(|m| match receiver {
                    Receiver::Mrc => mrc_se_from_moments(m, p),
                    Receiver::Lmmse => lmmse_se_from_trace(m.mean_quadratic, p),
                })
                .collect();
            SeResult::deterministic(snr_db, Method::ClosedForm, per_user)
        })
        .collect()
}

/// Non-zero eigenvalues of `Θ̃ = Θ^{1/2} B Θ^{1/2}`, descending. They coincide
/// with the non-zero eigenvalues of `W^H Θ W`.
pub fn projected_eigenvalues(stats: &ChannelStats, combiner: &Combiner) -> Vec<f64> {
    let t = combiner.reduce(stats).t;
    let values = hermitian_eigen(&t).values;
    let top = values.first().copied().unwrap_or(0.0);
    values.into_iter().filter(|&v| v > 1e-9 * top && v > 0.0).collect()
}

/// Exact per-user LMMSE SE when all `K` users share the correlation `Θ`,
/// from the non-zero eigenvalues of `Θ̃`. Evaluates the ratio of the
/// `E_{p,M̃}(i)` determinants to the Vandermonde product in sign/log form.
pub fn completely_overlapped_se(eigenvalues: &[f64], num_users: usize, p_u: f64) -> Result<f64> {
    if !(p_u.is_finite() && p_u > 0.0) {
        return Err(Error::Domain(format!("p_u must be positive, got {p_u}")));
    }
    let mut beta: Vec<f64> = eigenvalues.to_vec();
    if beta.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
        return Err(Error::Domain("eigenvalues must be strictly positive".into()));
    }
    beta.sort_by(|a, b| b.total_cmp(a));
    let dim = beta.len();
    if num_users == 0 || num_users > dim {
        return Err(Error::Domain(format!(
            "need 1 <= K <= M̃, got K = {num_users}, M̃ = {dim}"
        )));
    }
    for w in beta.windows(2) {
        let gap = (w[0] - w[1]) / w[0];
        if gap <= EIGEN_GAP_TOL {
            return Err(Error::DegenerateSpectrum {
                gap,
                threshold: EIGEN_GAP_TOL,
            });
        }
    }

    // Columns are scaled by β_max^{-(t-1)} in both the E matrices and the
    // Vandermonde product; the common factor cancels in the ratio.
    let bmax = beta[0];
    let ratio: Vec<f64> = beta.iter().map(|b| b / bmax).collect();
    let (vand_sign, vand_log) = {
        let mut sign = 1.0;
        let mut log = 0.0;
        for m in 0..dim {
            for n in m + 1..dim {
                let d = ratio[n] - ratio[m];
                if d < 0.0 {
                    sign = -sign;
                }
                log += d.abs().ln();
            }
        }
        (sign, log)
    };

    let scaled_ei: Vec<Vec<f64>> = beta
        .iter()
        .map(|&b| {
            let x = 1.0 / (b * p_u);
            (1..=num_users as u32)
                .map(|h| exp_integral_scaled(h, x))
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;

    // Σ_i det E_{p,M̃}(i) / Π(β_n - β_m), i = M̃-p+1..M̃ (1-based).
    let det_sum = |p: usize| -> f64 {
        if p == 0 {
            return 0.0;
        }
        let mut total = 0.0;
        for i in dim - p + 1..=dim {
            let m = DMatrix::from_fn(dim, dim, |s, t0| {
                let t = t0 + 1;
                let base = ratio[s].powi(t0 as i32);
                if t != i {
                    base
                } else {
                    // Σ_{h=1}^{p-M̃+t} e^x E_h(x)
                    let upper = p + t - dim;
                    base * scaled_ei[s][..upper].iter().sum::<f64>()
                }
            });
            let (sign, log) = sign_log_det(m);
            if sign != 0.0 {
                total += sign * vand_sign * (log - vand_log).exp();
            }
        }
        total
    };

    let se = std::f64::consts::LOG2_E * (det_sum(num_users) - det_sum(num_users - 1));
    // A single user sees at most the whole channel energy, so Jensen caps
    // the rate; anything outside [0, cap] is cancellation in the determinants.
    let cap = (1.0 + p_u * beta.iter().sum::<f64>()).log2();
    let slack = 1e-9 * cap.max(1.0);
    if !se.is_finite() || se < -slack || se > cap + slack {
        return Err(Error::IllConditioned(format!(
            "determinant ratio gave {se} outside [0, {cap}] for {dim} eigenvalues"
        )));
    }
    Ok(se.clamp(0.0, cap))
}

/// `Σ_{n=0}^{L} (I - ΛZ)^n Λ` with `Λ = diag(1/z_ii)`; `L = 1` gives
/// `2Λ - ΛZΛ`.
pub fn neumann_inverse(z: &CMat, order: usize) -> Result<CMat> {
    assert!(z.is_square());
    let k = z.nrows();
    let mut lambda = CMat::zeros(k, k);
    for i in 0..k {
        let d = z[(i, i)];
        if d.norm() == 0.0 {
            return Err(Error::Domain(format!("zero diagonal entry at {i}")));
        }
        lambda[(i, i)] = C64::new(1.0, 0.0) / d;
    }
    let step = CMat::identity(k, k) - &lambda * z;
    let mut term = lambda.clone();
    let mut acc = lambda;
    for _ in 0..order {
        term = &step * term;
        acc += &term;
    }
    Ok(acc)
}

/// `min_i |z_ii| / Σ_{j≠i} |z_ij|`; `f64::MAX` when every row has zero
/// off-diagonal mass.
pub fn diagonal_dominance_ratio(z: &CMat) -> f64 {
    assert!(z.is_square());
    let mut worst = f64::MAX;
    for i in 0..z.nrows() {
        let off: f64 = (0..z.ncols()).filter(|&j| j != i).map(|j| z[(i, j)].norm()).sum();
        if off > 0.0 {
            worst = worst.min(z[(i, i)].norm() / off);
        }
    }
    worst
}

/// `Z = I + p_u F^H F`.
pub fn regularized_gram(f: &CMat, p_u: f64) -> CMat {
    let k = f.ncols();
    CMat::identity(k, k) + f.adjoint() * f * C64::new(p_u, 0.0)
}
