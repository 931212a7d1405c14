//! System instances: array geometry plus user profiles, either explicit or
//! drawn by one of the placement generators.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{ArrayGeometry, ChannelStats, UserProfile};
use crate::error::{Error, Result};
use crate::rng::{streams, trial_rng};

/// 10 degrees.
pub const DEFAULT_ANGULAR_STD: f64 = 10.0 * PI / 180.0;
pub const DEFAULT_AOA_RANGE: (f64, f64) = (-PI / 3.0, PI / 3.0);

#[derive(Debug, Clone)]
pub struct Scenario {
    pub geometry: ArrayGeometry,
    pub users: Vec<UserProfile>,
    pub stats: Vec<ChannelStats>,
}

impl Scenario {
    pub fn new(geometry: ArrayGeometry, users: Vec<UserProfile>) -> Result<Self> {
        geometry.validate()?;
        let stats = users
            .iter()
            .map(|u| ChannelStats::new(u, &geometry))
            .collect::<Result<Vec<_>>>()?;
        Ok(Scenario { geometry, users, stats })
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn subset(&self, users: &[usize]) -> Vec<ChannelStats> {
        users.iter().map(|&k| self.stats[k].clone()).collect()
    }
}

/// Parameters shared by the placement generators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub num_users: usize,
    pub vr_length: usize,
    #[serde(default = "default_aoa_min")]
    pub aoa_min: f64,
    #[serde(default = "default_aoa_max")]
    pub aoa_max: f64,
    #[serde(default = "default_angular_std")]
    pub angular_std: f64,
}

fn default_aoa_min() -> f64 {
    DEFAULT_AOA_RANGE.0
}

fn default_aoa_max() -> f64 {
    DEFAULT_AOA_RANGE.1
}

fn default_angular_std() -> f64 {
    DEFAULT_ANGULAR_STD
}

impl Placement {
    pub fn new(num_users: usize, vr_length: usize) -> Self {
        Placement {
            num_users,
            vr_length,
            aoa_min: DEFAULT_AOA_RANGE.0,
            aoa_max: DEFAULT_AOA_RANGE.1,
            angular_std: DEFAULT_ANGULAR_STD,
        }
    }

    fn check(&self, geometry: &ArrayGeometry) -> Result<()> {
        if self.num_users == 0 {
            return Err(Error::config("num_users", "must be positive"));
        }
        if self.vr_length == 0 || self.vr_length > geometry.num_antennas {
            return Err(Error::config(
                "vr_length",
                format!("must be in 1..={}, got {}", geometry.num_antennas, self.vr_length),
            ));
        }
        if self.aoa_min.is_nan() || self.aoa_max.is_nan() || self.aoa_min > self.aoa_max {
            return Err(Error::config("aoa_min", "must not exceed aoa_max"));
        }
        Ok(())
    }

    fn draw_aoa<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.aoa_min + (self.aoa_max - self.aoa_min) * rng.random::<f64>()
    }
}

/// VR starts uniform on `[0, M - E]`, AoAs uniform on the configured range.
/// Users generally overlap partially.
pub fn random_placement(geometry: &ArrayGeometry, placement: &Placement, seed: u64) -> Result<Scenario> {
    placement.check(geometry)?;
    let mut rng = trial_rng(seed, streams::PLACEMENT);
    let span = geometry.num_antennas - placement.vr_length;
    let users = (0..placement.num_users)
        .map(|_| {
            let aoa = placement.draw_aoa(&mut rng);
            let start = rng.random_range(0..=span);
            UserProfile::new(geometry, aoa, placement.angular_std, start, placement.vr_length)
        })
        .collect::<Result<Vec<_>>>()?;
    Scenario::new(*geometry, users)
}

/// VR starts evenly staggered across the array, so neighbouring users overlap
/// whenever `(M - E)/(K - 1) < E`. AoAs are drawn as in [`random_placement`].
pub fn partial_overlap(geometry: &ArrayGeometry, placement: &Placement, seed: u64) -> Result<Scenario> {
    placement.check(geometry)?;
    let mut rng = trial_rng(seed, streams::PLACEMENT);
    let span = geometry.num_antennas - placement.vr_length;
    let k = placement.num_users;
    let users = (0..k)
        .map(|i| {
            let aoa = placement.draw_aoa(&mut rng);
            let start = if k == 1 { span / 2 } else { i * span / (k - 1) };
            UserProfile::new(geometry, aoa, placement.angular_std, start, placement.vr_length)
        })
        .collect::<Result<Vec<_>>>()?;
    Scenario::new(*geometry, users)
}

/// Disjoint VRs that also never share a subarray: user `k` starts on the
/// subarray boundary `k·stride`, with `stride` the widest even spacing.
pub fn no_overlap(geometry: &ArrayGeometry, placement: &Placement, seed: u64) -> Result<Scenario> {
    placement.check(geometry)?;
    let l = geometry.subarray_len();
    let slots = placement.vr_length.div_ceil(l);
    let stride = geometry.num_subarrays / placement.num_users;
    if stride < slots {
        return Err(Error::config(
            "num_users",
            format!(
                "{} users with {}-antenna VRs cannot be placed without sharing a subarray",
                placement.num_users, placement.vr_length
            ),
        ));
    }
    let mut rng = trial_rng(seed, streams::PLACEMENT);
    let users = (0..placement.num_users)
        .map(|k| {
            let aoa = placement.draw_aoa(&mut rng);
            UserProfile::new(geometry, aoa, placement.angular_std, k * stride * l, placement.vr_length)
        })
        .collect::<Result<Vec<_>>>()?;
    Scenario::new(*geometry, users)
}

/// Every user shares one profile: same AoA, spread and VR (centred).
pub fn completely_overlapped(geometry: &ArrayGeometry, placement: &Placement, seed: u64) -> Result<Scenario> {
    placement.check(geometry)?;
    let mut rng = trial_rng(seed, streams::PLACEMENT);
    let aoa = placement.draw_aoa(&mut rng);
    let l = geometry.subarray_len();
    let start = ((geometry.num_antennas - placement.vr_length) / 2) / l * l;
    let profile = UserProfile::new(geometry, aoa, placement.angular_std, start, placement.vr_length)?;
    Scenario::new(*geometry, vec![profile; placement.num_users])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_placement_is_seeded_and_in_bounds() {
        let g = ArrayGeometry::ula(256, 32).unwrap();
        let p = Placement::new(5, 64);
        let a = random_placement(&g, &p, 3).unwrap();
        let b = random_placement(&g, &p, 3).unwrap();
        assert_eq!(a.users, b.users);
        for u in &a.users {
            assert!(u.vr_start + u.vr_length <= 256);
            assert!(u.mean_aoa.abs() <= PI / 3.0);
            assert_eq!(u.angular_std, DEFAULT_ANGULAR_STD);
        }
        assert_ne!(a.users, random_placement(&g, &p, 4).unwrap().users);
    }

    #[test]
    fn partial_overlap_neighbours_overlap() {
        let g = ArrayGeometry::ula(1024, 128).unwrap();
        let s = partial_overlap(&g, &Placement::new(10, 128), 1).unwrap();
        assert_eq!(s.users[0].vr_start, 0);
        assert_eq!(s.users[9].vr_start + 128, 1024);
        for w in s.users.windows(2) {
            assert!(w[1].vr_start > w[0].vr_start);
            assert!(w[1].vr_start < w[0].vr_start + w[0].vr_length);
        }
    }

    #[test]
    fn no_overlap_never_shares_subarrays() {
        let g = ArrayGeometry::ula(1024, 128).unwrap();
        let s = no_overlap(&g, &Placement::new(5, 160), 1).unwrap();
        let l = g.subarray_len();
        let used: Vec<std::collections::BTreeSet<usize>> = s
            .users
            .iter()
            .map(|u| (u.vr_start / l..(u.vr_start + u.vr_length).div_ceil(l)).collect())
            .collect();
        for i in 0..used.len() {
            for j in i + 1..used.len() {
                assert!(used[i].is_disjoint(&used[j]));
            }
        }
        assert!(no_overlap(&g, &Placement::new(8, 160), 1).is_err());
    }

    #[test]
    fn completely_overlapped_users_are_identical() {
        let g = ArrayGeometry::ula(64, 8).unwrap();
        let s = completely_overlapped(&g, &Placement::new(3, 32), 9).unwrap();
        assert!(s.users.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn placement_validation() {
        let g = ArrayGeometry::ula(64, 8).unwrap();
        assert!(random_placement(&g, &Placement::new(0, 8), 0).is_err());
        assert!(random_placement(&g, &Placement::new(2, 65), 0).is_err());
    }
}
