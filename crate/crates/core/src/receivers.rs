//! Digital detection on the effective channel `F = W^H H` and Monte-Carlo
//! estimation of the ergodic spectral efficiency.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{sample_channels, ChannelStats};
use crate::combiner::Combiner;
use crate::linalg::{dot_h, CMat, C64};
use crate::rng::trial_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Receiver {
    Mrc,
    Lmmse,
}

impl Receiver {
    pub fn label(self) -> &'static str {
        match self {
            Receiver::Mrc => "mrc",
            Receiver::Lmmse => "lmmse",
        }
    }
}

impl std::fmt::Display for Receiver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    MonteCarlo,
    ClosedForm,
    /// Exact completely-overlapped LMMSE expression.
    Exact,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::MonteCarlo => "monte-carlo",
            Method::ClosedForm => "closed-form",
            Method::Exact => "exact",
        }
    }
}

/// Transmit SNR in dB to linear `p_u` (noise variance is 1).
pub fn snr_db_to_linear(snr_db: f64) -> f64 {
    10f64.powf(snr_db / 10.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeResult {
    pub snr_db: f64,
    pub method: Method,
    pub per_user_se: Vec<f64>,
    /// Standard errors; all zero for deterministic methods.
    pub per_user_stderr: Vec<f64>,
    pub sum_se: f64,
    pub sum_stderr: f64,
    pub trials: usize,
}

impl SeResult {
    pub fn deterministic(snr_db: f64, method: Method, per_user_se: Vec<f64>) -> Self {
        let k = per_user_se.len();
        SeResult {
            snr_db,
            method,
            sum_se: per_user_se.iter().sum(),
            per_user_se,
            per_user_stderr: vec![0.0; k],
            sum_stderr: 0.0,
            trials: 0,
        }
    }
}

/// `K×K` matrix `F^H F + (1/p_u) I`.
fn regularized_gram(f: &CMat, p_u: f64) -> CMat {
    let mut g = f.adjoint() * f;
    for i in 0..g.nrows() {
        g[(i, i)] += C64::new(1.0 / p_u, 0.0);
    }
    g
}

/// Detection matrix `A` (N×K).
pub fn detector(f: &CMat, receiver: Receiver, p_u: f64) -> CMat {
    match receiver {
        Receiver::Mrc => f.clone(),
        Receiver::Lmmse => {
            assert!(p_u > 0.0 && p_u.is_finite(), "LMMSE needs a finite positive p_u");
            let k = f.ncols();
            let chol = crate::linalg::hermitian_part(&regularized_gram(f, p_u))
                .cholesky()
                .expect("regularized Gram is positive definite for finite p_u");
            f * chol.solve(&CMat::identity(k, k))
        }
    }
}

/// SINR of user `k` for detector `a`, effective channel `f` and the diagonal
/// of `W^H W` (noise variance 1).
pub fn instantaneous_sinr(a: &CMat, f: &CMat, gram_diag: &[f64], p_u: f64, k: usize) -> f64 {
    assert!(k < f.ncols());
    let ak = a.column(k);
    let ak = ak.as_slice();
    let col = |i: usize| dot_h(ak, f.column(i).as_slice()).norm_sqr();
    let signal = p_u * col(k);
    if signal == 0.0 {
        return 0.0;
    }
    let interference: f64 = (0..f.ncols()).filter(|&i| i != k).map(|i| p_u * col(i)).sum();
    let noise: f64 = ak.iter().zip(gram_diag).map(|(z, g)| g * z.norm_sqr()).sum();
    signal / (interference + noise)
}

/// Per-user log2(1 + SINR) for one realization of `F`.
pub fn realization_rates(f: &CMat, gram_diag: &[f64], receiver: Receiver, p_u: f64) -> Vec<f64> {
    let a = detector(f, receiver, p_u);
    (0..f.ncols())
        .map(|k| (1.0 + instantaneous_sinr(&a, f, gram_diag, p_u, k)).log2())
        .collect()
}

/// Ergodic SE by Monte-Carlo over `trials` realizations. Realizations are
/// shared across the SNR grid; trial `t` uses stream `t` of `master_seed`.
pub fn monte_carlo_se(
    stats: &[ChannelStats],
    combiner: &Combiner,
    receiver: Receiver,
    snr_grid_db: &[f64],
    trials: usize,
    master_seed: u64,
) -> Vec<SeResult> {
    assert!(trials >= 1, "Monte-Carlo needs at least one trial");
    let k = stats.len();
    let gram = combiner.gram_diag();
    let powers: Vec<f64> = snr_grid_db.iter().map(|&s| snr_db_to_linear(s)).collect();
    let per_trial: Vec<Vec<Vec<f64>>> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let mut rng = trial_rng(master_seed, t);
            let h = sample_channels(stats, &mut rng).h;
            let f = combiner.effective_channel(&h);
            powers
                .iter()
                .map(|&p| realization_rates(&f, &gram, receiver, p))
                .collect()
        })
        .collect();

    snr_grid_db
        .iter()
        .enumerate()
        .map(|(s, &snr_db)| {
            let mut user = vec![Welford::default(); k];
            let mut total = Welford::default();
            for trial in &per_trial {
                let rates = &trial[s];
                for (acc, &r) in user.iter_mut().zip(rates) {
                    acc.push(r);
                }
                total.push(rates.iter().sum());
            }
            SeResult {
                snr_db,
                method: Method::MonteCarlo,
                per_user_se: user.iter().map(|w| w.mean).collect(),
                per_user_stderr: user.iter().map(|w| w.stderr()).collect(),
                sum_se: total.mean,
                sum_stderr: total.stderr(),
                trials,
            }
        })
        .collect()
}

/// Running mean/variance.
#[derive(Debug, Clone, Copy, Default)]
pub struct Welford {
    pub n: usize,
    pub mean: f64,
    m2: f64,
}

impl Welford {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn stderr(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.variance() / self.n as f64).sqrt()
        }
    }
}
