//! Spatially non-stationary correlated Rayleigh channel.
//!
//! Each user sees the array through a visibility region (VR): a contiguous
//! antenna range carrying per-antenna amplitudes `d_m`. The effective
//! correlation is `Θ = D^{1/2} R D^{1/2}` where `R` is the stationary ULA
//! correlation with a Gaussian angular spread. Because `Θ` vanishes outside
//! the VR, [`ChannelStats`] keeps only the VR×VR block of `Θ` and of its
//! square root; dense `M×M` views are built on demand.

use std::f64::consts::PI;
use std::ops::Range;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{cis, psd_sqrt, CMat, CVec, C64, ZERO};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub num_antennas: usize,
    pub num_subarrays: usize,
    /// Element spacing in carrier wavelengths.
    #[serde(default = "default_spacing")]
    pub element_spacing: f64,
}

fn default_spacing() -> f64 {
    0.5
}

impl ArrayGeometry {
    pub fn new(num_antennas: usize, num_subarrays: usize, element_spacing: f64) -> Result<Self> {
        let g = ArrayGeometry {
            num_antennas,
            num_subarrays,
            element_spacing,
        };
        g.validate()?;
        Ok(g)
    }

    /// Half-wavelength ULA.
    pub fn ula(num_antennas: usize, num_subarrays: usize) -> Result<Self> {
        Self::new(num_antennas, num_subarrays, 0.5)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_antennas == 0 {
            return Err(Error::Geometry("num_antennas must be positive".into()));
        }
        if self.num_subarrays == 0 {
            return Err(Error::Geometry("num_subarrays must be positive".into()));
        }
        if !self.num_antennas.is_multiple_of(self.num_subarrays) {
            return Err(Error::Geometry(format!(
                "num_antennas {} is not a multiple of num_subarrays {}",
                self.num_antennas, self.num_subarrays
            )));
        }
        if !(self.element_spacing > 0.0 && self.element_spacing.is_finite()) {
            return Err(Error::Geometry(format!(
                "element_spacing must be positive, got {}",
                self.element_spacing
            )));
        }
        Ok(())
    }

    /// Antennas per subarray, `M/N`.
    pub fn subarray_len(&self) -> usize {
        self.num_antennas / self.num_subarrays
    }

    pub fn subarray_range(&self, i: usize) -> Range<usize> {
        let l = self.subarray_len();
        i * l..(i + 1) * l
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserProfile {
    /// Mean angle of arrival, radians.
    pub mean_aoa: f64,
    /// Standard deviation of the Gaussian angular spread, radians.
    pub angular_std: f64,
    /// First antenna of the visibility region (0-based).
    pub vr_start: usize,
    pub vr_length: usize,
    /// Per-antenna VR amplitudes; empty means all ones.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub vr_amplitudes: Vec<f64>,
}

impl UserProfile {
    pub fn new(
        geometry: &ArrayGeometry,
        mean_aoa: f64,
        angular_std: f64,
        vr_start: usize,
        vr_length: usize,
    ) -> Result<Self> {
        let p = UserProfile {
            mean_aoa,
            angular_std,
            vr_start,
            vr_length,
            vr_amplitudes: Vec::new(),
        };
        p.validate(geometry)?;
        Ok(p)
    }

    pub fn with_amplitudes(mut self, geometry: &ArrayGeometry, amplitudes: Vec<f64>) -> Result<Self> {
        self.vr_amplitudes = amplitudes;
        self.validate(geometry)?;
        Ok(self)
    }

    pub fn validate(&self, geometry: &ArrayGeometry) -> Result<()> {
        if self.vr_length == 0 {
            return Err(Error::Profile("vr_length must be at least 1".into()));
        }
        if self.vr_start + self.vr_length > geometry.num_antennas {
            return Err(Error::Profile(format!(
                "visibility region [{}, {}) exceeds the {}-antenna array",
                self.vr_start,
                self.vr_start + self.vr_length,
                geometry.num_antennas
            )));
        }
        if !(self.angular_std.is_finite() && self.angular_std >= 0.0) {
            return Err(Error::Profile(format!(
                "angular_std must be non-negative, got {}",
                self.angular_std
            )));
        }
        if !self.mean_aoa.is_finite() {
            return Err(Error::Profile("mean_aoa must be finite".into()));
        }
        if !self.vr_amplitudes.is_empty() {
            if self.vr_amplitudes.len() != self.vr_length {
                return Err(Error::Profile(format!(
                    "{} amplitudes given for a VR of length {}",
                    self.vr_amplitudes.len(),
                    self.vr_length
                )));
            }
            if let Some(a) = self.vr_amplitudes.iter().find(|a| !(a.is_finite() && **a >= 0.0)) {
                return Err(Error::Profile(format!("VR amplitude {a} is negative or not finite")));
            }
        }
        Ok(())
    }

    pub fn vr_range(&self) -> Range<usize> {
        self.vr_start..self.vr_start + self.vr_length
    }

    pub fn amplitude(&self, offset: usize) -> f64 {
        if self.vr_amplitudes.is_empty() {
            1.0
        } else {
            self.vr_amplitudes[offset]
        }
    }
}

/// ULA steering vector, element m = exp(j 2π d m sin θ).
pub fn steering_vector(theta: f64, num_antennas: usize, spacing: f64) -> CVec {
    let step = 2.0 * PI * spacing * theta.sin();
    CVec::from_fn(num_antennas, |m, _| cis(step * m as f64))
}

/// Gaussian angular-spread taper, entry (m,n) = exp(-2 π d (m-n)² σ² cos² θ).
pub fn angular_spread_matrix(theta: f64, sigma: f64, num_antennas: usize, spacing: f64) -> DMatrix<f64> {
    DMatrix::from_fn(num_antennas, num_antennas, |m, n| {
        spread_entry(theta, sigma, spacing, m as f64 - n as f64)
    })
}

fn spread_entry(theta: f64, sigma: f64, spacing: f64, lag: f64) -> f64 {
    let c = theta.cos();
    (-2.0 * (PI * spacing * lag * lag) * sigma * sigma * c * c).exp()
}

/// Entry (m, n) of the stationary correlation `R = (a a^H) ⊙ P`.
pub fn correlation_entry(theta: f64, sigma: f64, spacing: f64, m: usize, n: usize) -> C64 {
    let lag = m as f64 - n as f64;
    let phase = 2.0 * PI * spacing * theta.sin() * lag;
    cis(phase) * spread_entry(theta, sigma, spacing, lag)
}

pub fn stationary_correlation(theta: f64, sigma: f64, geometry: &ArrayGeometry) -> CMat {
    stationary_correlation_block(theta, sigma, geometry.element_spacing, 0..geometry.num_antennas)
}

/// The `range × range` principal block of `R`. `R` is Toeplitz, so this only
/// depends on the block length.
fn stationary_correlation_block(theta: f64, sigma: f64, spacing: f64, range: Range<usize>) -> CMat {
    let n = range.len();
    let mut r = CMat::from_fn(n, n, |a, b| correlation_entry(theta, sigma, spacing, a, b));
    for i in 0..n {
        r[(i, i)] = C64::new(1.0, 0.0);
    }
    r
}

/// Diagonal of `D` as an M-vector.
pub fn vr_mask(profile: &UserProfile, num_antennas: usize) -> Vec<f64> {
    let mut d = vec![0.0; num_antennas];
    for (offset, m) in profile.vr_range().enumerate() {
        d[m] = profile.amplitude(offset);
    }
    d
}

/// `Θ = D^{1/2} R D^{1/2}` for a diagonal `D` given by its entries.
pub fn effective_correlation(r: &CMat, d: &[f64]) -> CMat {
    assert_eq!(r.nrows(), d.len());
    assert_eq!(r.ncols(), d.len());
    let s: Vec<f64> = d.iter().map(|v| v.max(0.0).sqrt()).collect();
    CMat::from_fn(r.nrows(), r.ncols(), |m, n| r[(m, n)] * (s[m] * s[n]))
}

/// Second-order statistics of one user's channel.
#[derive(Debug, Clone)]
pub struct ChannelStats {
    pub profile: UserProfile,
    num_antennas: usize,
    spacing: f64,
    theta_vr: CMat,
    sqrt_vr: CMat,
}

impl ChannelStats {
    pub fn new(profile: &UserProfile, geometry: &ArrayGeometry) -> Result<Self> {
        geometry.validate()?;
        profile.validate(geometry)?;
        let range = profile.vr_range();
        let r = stationary_correlation_block(
            profile.mean_aoa,
            profile.angular_std,
            geometry.element_spacing,
            range.clone(),
        );
        let d: Vec<f64> = (0..range.len()).map(|o| profile.amplitude(o)).collect();
        let theta_vr = effective_correlation(&r, &d);
        let sqrt_vr = psd_sqrt(&theta_vr)?;
        Ok(ChannelStats {
            profile: profile.clone(),
            num_antennas: geometry.num_antennas,
            spacing: geometry.element_spacing,
            theta_vr,
            sqrt_vr,
        })
    }

    pub fn num_antennas(&self) -> usize {
        self.num_antennas
    }

    pub fn vr_range(&self) -> Range<usize> {
        self.profile.vr_range()
    }

    /// Θ restricted to the VR×VR block.
    pub fn theta_vr(&self) -> &CMat {
        &self.theta_vr
    }

    /// Θ^{1/2} restricted to the VR×VR block (zero elsewhere).
    pub fn sqrt_vr(&self) -> &CMat {
        &self.sqrt_vr
    }

    /// Stationary correlation `R` over the full array.
    pub fn stationary(&self) -> CMat {
        stationary_correlation_block(
            self.profile.mean_aoa,
            self.profile.angular_std,
            self.spacing,
            0..self.num_antennas,
        )
    }

    pub fn mask(&self) -> Vec<f64> {
        vr_mask(&self.profile, self.num_antennas)
    }

    pub fn theta_entry(&self, m: usize, n: usize) -> C64 {
        let vr = self.vr_range();
        if vr.contains(&m) && vr.contains(&n) {
            self.theta_vr[(m - vr.start, n - vr.start)]
        } else {
            ZERO
        }
    }

    /// Block of Θ with the given row and column antenna ranges.
    pub fn theta_block(&self, rows: Range<usize>, cols: Range<usize>) -> CMat {
        CMat::from_fn(rows.len(), cols.len(), |a, b| {
            self.theta_entry(rows.start + a, cols.start + b)
        })
    }

    pub fn theta_dense(&self) -> CMat {
        self.embed(&self.theta_vr)
    }

    pub fn sqrt_dense(&self) -> CMat {
        self.embed(&self.sqrt_vr)
    }

    fn embed(&self, block: &CMat) -> CMat {
        let mut out = CMat::zeros(self.num_antennas, self.num_antennas);
        let s = self.vr_range().start;
        out.view_mut((s, s), (block.nrows(), block.ncols())).copy_from(block);
        out
    }

    /// Antenna indices where Θ has a non-zero diagonal.
    pub fn support(&self) -> Range<usize> {
        self.vr_range()
    }

    /// Whether the user's VR (with non-zero amplitude) reaches into `range`.
    pub fn illuminates(&self, range: Range<usize>) -> bool {
        let vr = self.vr_range();
        (range.start.max(vr.start)..range.end.min(vr.end))
            .any(|m| self.profile.amplitude(m - vr.start) > 0.0)
    }

    /// One realization `h = Θ^{1/2} g`, `g ~ CN(0, I)`. Only the VR
    /// coordinates of `g` are drawn since `Θ^{1/2}` vanishes elsewhere.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> CVec {
        let e = self.theta_vr.nrows();
        let g = CVec::from_fn(e, |_, _| standard_complex_normal(rng));
        let local = &self.sqrt_vr * g;
        let mut h = CVec::zeros(self.num_antennas);
        h.rows_mut(self.vr_range().start, e).copy_from(&local);
        h
    }
}

/// Stacked user channels `H = [h_1 … h_K]`.
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    pub h: CMat,
}

impl ChannelRealization {
    pub fn num_users(&self) -> usize {
        self.h.ncols()
    }
}

pub fn standard_complex_normal<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Independent draws for every user from a single stream.
pub fn sample_channels<R: Rng + ?Sized>(stats: &[ChannelStats], rng: &mut R) -> ChannelRealization {
    let m = stats.first().map_or(0, |s| s.num_antennas);
    assert!(
        stats.iter().all(|s| s.num_antennas == m),
        "all users must share the array"
    );
    let mut h = CMat::zeros(m, stats.len());
    for (k, s) in stats.iter().enumerate() {
        h.set_column(k, &s.sample(rng));
    }
    ChannelRealization { h }
}
