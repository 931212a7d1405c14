//! Analog stage: block-diagonal combiner `W = blkdiag(w_1, …, w_N)` and its
//! projection `B = W W^H`.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{ArrayGeometry, ChannelStats};
use crate::error::{Error, Result};
use crate::linalg::{cis, hermitian_eigen, quad_form, CMat, CVec, C64, ZERO};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Architecture {
    PhaseShifter,
    #[serde(rename = "on-off", alias = "on-off-switch")]
    OnOffSwitch,
    RandomPhase,
}

impl Architecture {
    pub fn label(self) -> &'static str {
        match self {
            Architecture::PhaseShifter => "phase-shifter",
            Architecture::OnOffSwitch => "on-off",
            Architecture::RandomPhase => "random-phase",
        }
    }
}

impl std::fmt::Display for Architecture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Per-subarray eigen-design angles of one user; `None` where the user's
/// diagonal block is zero.
pub type UserPhases = Vec<Option<Vec<f64>>>;

#[derive(Debug, Clone)]
pub struct Combiner {
    pub architecture: Architecture,
    geometry: ArrayGeometry,
    blocks: Vec<CVec>,
    switch_mask: Option<Vec<bool>>,
}

impl Combiner {
    fn from_angles(geometry: &ArrayGeometry, architecture: Architecture, angles: Vec<Vec<f64>>) -> Self {
        let amp = (geometry.num_subarrays as f64 / geometry.num_antennas as f64).sqrt();
        let blocks = angles
            .into_iter()
            .map(|a| CVec::from_iterator(a.len(), a.into_iter().map(|p| cis(p) * amp)))
            .collect();
        Combiner {
            architecture,
            geometry: *geometry,
            blocks,
            switch_mask: None,
        }
    }

    /// Phase-shifter combiner with every subarray at zero phase.
    pub fn zero_phase(geometry: &ArrayGeometry) -> Self {
        let l = geometry.subarray_len();
        Self::from_angles(
            geometry,
            Architecture::PhaseShifter,
            vec![vec![0.0; l]; geometry.num_subarrays],
        )
    }

    pub fn geometry(&self) -> &ArrayGeometry {
        &self.geometry
    }

    pub fn blocks(&self) -> &[CVec] {
        &self.blocks
    }

    pub fn block(&self, i: usize) -> &CVec {
        &self.blocks[i]
    }

    pub fn switch_mask(&self) -> Option<&[bool]> {
        self.switch_mask.as_deref()
    }

    /// Turn off the RF chains of subarrays whose flag is false; their weights
    /// become zero and they drop out of `B`.
    pub fn with_active(mut self, active: &[bool]) -> Self {
        assert_eq!(active.len(), self.blocks.len());
        for (b, &on) in self.blocks.iter_mut().zip(active) {
            if !on {
                b.fill(ZERO);
            }
        }
        self
    }

    pub fn is_active(&self, i: usize) -> bool {
        self.blocks[i].iter().any(|z| *z != ZERO)
    }

    pub fn active_count(&self) -> usize {
        (0..self.blocks.len()).filter(|&i| self.is_active(i)).count()
    }

    /// Diagonal of `W^H W`, i.e. `w_i^H w_i`.
    pub fn gram_diag(&self) -> Vec<f64> {
        self.blocks.iter().map(|b| b.norm_squared()).collect()
    }

    /// Dense `M×N` combining matrix.
    pub fn weights(&self) -> CMat {
        let g = &self.geometry;
        let mut w = CMat::zeros(g.num_antennas, g.num_subarrays);
        for (i, b) in self.blocks.iter().enumerate() {
            w.view_mut((g.subarray_range(i).start, i), (b.len(), 1)).copy_from(b);
        }
        w
    }

    pub fn projection(&self) -> ProjectionB {
        let g = &self.geometry;
        let mut b = CMat::zeros(g.num_antennas, g.num_antennas);
        for (i, w) in self.blocks.iter().enumerate() {
            let s = g.subarray_range(i).start;
            b.view_mut((s, s), (w.len(), w.len())).copy_from(&(w * w.adjoint()));
        }
        ProjectionB { b }
    }

    /// `F = W^H H` computed subarray by subarray.
    pub fn effective_channel(&self, h: &CMat) -> CMat {
        let g = &self.geometry;
        assert_eq!(h.nrows(), g.num_antennas);
        let mut f = CMat::zeros(g.num_subarrays, h.ncols());
        for (i, w) in self.blocks.iter().enumerate() {
            let r = g.subarray_range(i);
            for k in 0..h.ncols() {
                let mut acc = ZERO;
                for (j, m) in r.clone().enumerate() {
                    acc += w[j].conj() * h[(m, k)];
                }
                f[(i, k)] = acc;
            }
        }
        f
    }

    /// `tr(B Θ) = Σ_i w_i^H Θ̄_ii w_i`, summed over the subarrays the user
    /// illuminates.
    pub fn trace_metric(&self, stats: &ChannelStats) -> f64 {
        let g = &self.geometry;
        covered_subarrays(stats, g)
            .map(|i| {
                let r = g.subarray_range(i);
                quad_form(self.blocks[i].as_slice(), &stats.theta_block(r.clone(), r)).re
            })
            .sum()
    }

    /// `T = W^H Θ W` restricted to the subarrays the user illuminates.
    pub fn reduce(&self, stats: &ChannelStats) -> ReducedCorrelation {
        let g = &self.geometry;
        let vr = stats.vr_range();
        let subarrays: Vec<usize> = covered_subarrays(stats, g).collect();
        let mut w_local = CMat::zeros(vr.len(), subarrays.len());
        for (c, &i) in subarrays.iter().enumerate() {
            for (j, m) in g.subarray_range(i).enumerate() {
                if vr.contains(&m) {
                    w_local[(m - vr.start, c)] = self.blocks[i][j];
                }
            }
        }
        let t = w_local.adjoint() * stats.theta_vr() * &w_local;
        let mut index = vec![usize::MAX; g.num_subarrays];
        for (c, &i) in subarrays.iter().enumerate() {
            index[i] = c;
        }
        ReducedCorrelation { subarrays, index, t }
    }
}

/// Subarrays whose antenna range intersects the user's VR.
pub fn covered_subarrays<'a>(stats: &'a ChannelStats, g: &'a ArrayGeometry) -> impl Iterator<Item = usize> + 'a {
    let vr = stats.vr_range();
    let l = g.subarray_len();
    (vr.start / l..vr.end.div_ceil(l)).filter(move |&i| stats.illuminates(g.subarray_range(i)))
}

/// `B = W W^H`, dense.
#[derive(Debug, Clone)]
pub struct ProjectionB {
    pub b: CMat,
}

impl ProjectionB {
    pub fn trace(&self) -> f64 {
        crate::linalg::trace_re(&self.b)
    }

    /// Dense `tr(B Θ)`.
    pub fn trace_with(&self, theta: &CMat) -> f64 {
        crate::linalg::trace_of_product(&self.b, theta).re
    }
}

/// `T_k = W^H Θ_k W` on the user's covered subarrays. Every closed-form
/// moment reduces to traces of these `|S_k|×|S_k|` matrices.
#[derive(Debug, Clone)]
pub struct ReducedCorrelation {
    pub subarrays: Vec<usize>,
    index: Vec<usize>,
    pub t: CMat,
}

impl ReducedCorrelation {
    /// `tr(B Θ)`.
    pub fn trace(&self) -> f64 {
        crate::linalg::trace_re(&self.t)
    }

    /// `tr(B Θ_a B Θ_b) = tr(T_a T_b)`, non-zero only on shared subarrays.
    pub fn trace_product(&self, other: &ReducedCorrelation) -> f64 {
        let mut acc = ZERO;
        for (pa, &a) in self.subarrays.iter().enumerate() {
            let qa = other.index[a];
            if qa == usize::MAX {
                continue;
            }
            for (pb, &b) in self.subarrays.iter().enumerate() {
                let qb = other.index[b];
                if qb == usize::MAX {
                    continue;
                }
                acc += self.t[(pa, pb)] * other.t[(qb, qa)];
            }
        }
        acc.re
    }

    /// `tr(W^H W · T) = tr(B B^H Θ)`, using the per-subarray Gram diagonal.
    pub fn noise_trace(&self, gram_diag: &[f64]) -> f64 {
        self.subarrays
            .iter()
            .enumerate()
            .map(|(p, &i)| gram_diag[i] * self.t[(p, p)].re)
            .sum()
    }
}

/// Angles of the top eigenvector of a Hermitian block, rotated so the first
/// non-negligible entry is real positive. `None` for an all-zero block.
pub fn eigen_phase_angles(block: &CMat) -> Option<Vec<f64>> {
    let scale = block.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if scale == 0.0 {
        return None;
    }
    let eig = hermitian_eigen(block);
    let v = eig.vectors.column(0);
    let vmax = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let pivot = v.iter().find(|z| z.norm() > 1e-12 * vmax)?;
    let rot = pivot.conj() / pivot.norm();
    Some(
        v.iter()
            .map(|z| {
                let r = z * rot;
                if r.norm() > 1e-12 * vmax {
                    r.arg()
                } else {
                    0.0
                }
            })
            .collect(),
    )
}

/// Top eigenvector of a block (unit norm, same phase convention).
pub fn top_eigenvector(block: &CMat) -> (f64, CVec) {
    let eig = hermitian_eigen(block);
    let v = eig.vectors.column(0).into_owned();
    let vmax = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let rot = v
        .iter()
        .find(|z| z.norm() > 1e-12 * vmax)
        .map(|p| p.conj() / p.norm())
        .unwrap_or(C64::new(1.0, 0.0));
    (eig.values[0], v * rot)
}

/// Eigen-design angles of every subarray for one user.
pub fn user_phase_angles(stats: &ChannelStats, geometry: &ArrayGeometry) -> UserPhases {
    let mut out = vec![None; geometry.num_subarrays];
    for i in covered_subarrays(stats, geometry) {
        let r = geometry.subarray_range(i);
        out[i] = eigen_phase_angles(&stats.theta_block(r.clone(), r));
    }
    out
}

/// Single-user eigen design on `targets`; all other subarrays keep zero phase.
pub fn phase_design_eigen(stats: &ChannelStats, geometry: &ArrayGeometry, targets: &[usize]) -> Combiner {
    let l = geometry.subarray_len();
    let mut angles = vec![vec![0.0; l]; geometry.num_subarrays];
    for &i in targets {
        assert!(i < geometry.num_subarrays, "subarray {i} out of range");
        let r = geometry.subarray_range(i);
        if let Some(a) = eigen_phase_angles(&stats.theta_block(r.clone(), r)) {
            angles[i] = a;
        }
    }
    Combiner::from_angles(geometry, Architecture::PhaseShifter, angles)
}

/// Multi-user design: each subarray's angle vector is the sum of the angle
/// vectors of every user illuminating it (zero when none does).
pub fn phase_design_multiuser(stats: &[&ChannelStats], geometry: &ArrayGeometry) -> Combiner {
    let phases: Vec<UserPhases> = stats.iter().map(|s| user_phase_angles(s, geometry)).collect();
    let refs: Vec<&UserPhases> = phases.iter().collect();
    combine_user_phases(&refs, geometry)
}

/// Sum precomputed per-user angle tables subarray by subarray.
pub fn combine_user_phases(phases: &[&UserPhases], geometry: &ArrayGeometry) -> Combiner {
    let l = geometry.subarray_len();
    let mut angles = vec![vec![0.0; l]; geometry.num_subarrays];
    for user in phases {
        for (i, a) in user.iter().enumerate() {
            if let Some(a) = a {
                for (acc, v) in angles[i].iter_mut().zip(a) {
                    *acc += v;
                }
            }
        }
    }
    for a in angles.iter_mut() {
        for v in a.iter_mut() {
            *v = v.rem_euclid(2.0 * PI);
        }
    }
    Combiner::from_angles(geometry, Architecture::PhaseShifter, angles)
}

/// On-off switch combiner. `switch_mask` has one flag per antenna; each
/// subarray's "on" entries get amplitude `1/sqrt(M_on,i)`.
pub fn onoff_combiner(geometry: &ArrayGeometry, switch_mask: &[bool]) -> Result<Combiner> {
    if switch_mask.len() != geometry.num_antennas {
        return Err(Error::Domain(format!(
            "switch mask has {} entries for {} antennas",
            switch_mask.len(),
            geometry.num_antennas
        )));
    }
    let mut blocks = Vec::with_capacity(geometry.num_subarrays);
    for i in 0..geometry.num_subarrays {
        let mask = &switch_mask[geometry.subarray_range(i)];
        let on = mask.iter().filter(|&&b| b).count();
        if on == 0 {
            return Err(Error::DeadSubarray { index: i });
        }
        let amp = 1.0 / (on as f64).sqrt();
        blocks.push(CVec::from_iterator(
            mask.len(),
            mask.iter().map(|&b| if b { C64::new(amp, 0.0) } else { ZERO }),
        ));
    }
    Ok(Combiner {
        architecture: Architecture::OnOffSwitch,
        geometry: *geometry,
        blocks,
        switch_mask: Some(switch_mask.to_vec()),
    })
}

pub fn onoff_all_on(geometry: &ArrayGeometry) -> Combiner {
    onoff_combiner(geometry, &vec![true; geometry.num_antennas]).expect("all-on mask is never dead")
}

/// I.i.d. uniform phases on every antenna.
pub fn random_phase_combiner<R: Rng + ?Sized>(geometry: &ArrayGeometry, rng: &mut R) -> Combiner {
    let l = geometry.subarray_len();
    let angles = (0..geometry.num_subarrays)
        .map(|_| (0..l).map(|_| rng.random::<f64>() * 2.0 * PI).collect())
        .collect();
    Combiner::from_angles(geometry, Architecture::RandomPhase, angles)
}
