//! Tilt-angle schemes for limited-range parallel-beam acquisition.
//!
//! Angles are in degrees, identified modulo 180° and kept in (-90, 90].
//! At 0° the beam travels along the image columns (top to bottom).

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};

/// Tolerance used for duplicate detection and spacing checks, in degrees.
pub const ANGLE_TOL: f64 = 1e-9;

/// How an angle set was sampled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AcquisitionMode {
    EquallyAngled,
    EquallySloped,
}

impl AcquisitionMode {
    pub fn short_name(self) -> &'static str {
        match self {
            AcquisitionMode::EquallyAngled => "EA",
            AcquisitionMode::EquallySloped => "ES",
        }
    }
}

impl fmt::Display for AcquisitionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for AcquisitionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ea" | "equally-angled" | "equallyangled" => Ok(AcquisitionMode::EquallyAngled),
            "es" | "equally-sloped" | "equallysloped" => Ok(AcquisitionMode::EquallySloped),
            other => Err(invalid(format!("unknown acquisition mode {other:?}"))),
        }
    }
}

/// An ordered set of projection angles over a tilt range.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleSet {
    angles: Vec<f64>,
    mode: AcquisitionMode,
    tilt_min: f64,
    tilt_max: f64,
}

impl AngleSet {
    /// Builds an angle set, checking ordering, range and (for equally-angled
    /// sets) uniform spacing.
    pub fn new(angles: Vec<f64>, mode: AcquisitionMode, tilt_min: f64, tilt_max: f64) -> Result<Self> {
        check_range(tilt_min, tilt_max)?;
        if angles.iter().any(|a| !a.is_finite()) {
            return Err(Error::NonFinite("angle set"));
        }
        for &a in &angles {
            if a <= -90.0 || a > 90.0 {
                return Err(invalid(format!("angle {a} outside (-90, 90]")));
            }
            if a < tilt_min - ANGLE_TOL || a > tilt_max + ANGLE_TOL {
                return Err(invalid(format!(
                    "angle {a} outside tilt range [{tilt_min}, {tilt_max}]"
                )));
            }
        }
        for w in angles.windows(2) {
            if w[1] - w[0] <= ANGLE_TOL {
                return Err(invalid(format!(
                    "angles must be strictly increasing ({} then {})",
                    w[0], w[1]
                )));
            }
        }
        if mode == AcquisitionMode::EquallyAngled && angles.len() >= 3 {
            let first = angles[1] - angles[0];
            for w in angles.windows(2) {
                if ((w[1] - w[0]) - first).abs() > ANGLE_TOL {
                    return Err(invalid("equally-angled set has non-uniform spacing"));
                }
            }
        }
        Ok(AngleSet {
            angles,
            mode,
            tilt_min,
            tilt_max,
        })
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn mode(&self) -> AcquisitionMode {
        self.mode
    }

    pub fn tilt_min(&self) -> f64 {
        self.tilt_min
    }

    pub fn tilt_max(&self) -> f64 {
        self.tilt_max
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }
}

fn check_range(tilt_min: f64, tilt_max: f64) -> Result<()> {
    if !(tilt_min.is_finite() && tilt_max.is_finite()) {
        return Err(Error::NonFinite("tilt range"));
    }
    if tilt_min >= tilt_max {
        return Err(invalid(format!(
            "tilt range inverted or empty: [{tilt_min}, {tilt_max}]"
        )));
    }
    if tilt_min <= -90.0 || tilt_max > 90.0 {
        return Err(invalid(format!(
            "tilt range [{tilt_min}, {tilt_max}] not within (-90, 90]"
        )));
    }
    Ok(())
}

/// Uniformly spaced angles over `[tilt_min, tilt_max]`, endpoints included.
/// A single view sits at the midpoint.
pub fn ea_angles(n_views: usize, tilt_min: f64, tilt_max: f64) -> Result<AngleSet> {
    if n_views == 0 {
        return Err(invalid("number of views must be positive"));
    }
    check_range(tilt_min, tilt_max)?;
    let angles = if n_views == 1 {
        vec![0.5 * (tilt_min + tilt_max)]
    } else {
        let step = (tilt_max - tilt_min) / (n_views - 1) as f64;
        (0..n_views)
            .map(|i| {
                if i == n_views - 1 {
                    tilt_max
                } else {
                    tilt_min + step * i as f64
                }
            })
            .collect()
    };
    AngleSet::new(angles, AcquisitionMode::EquallyAngled, tilt_min, tilt_max)
}

/// The 2N equally-sloped tilt angles (degrees), n = 1..2N, unfiltered.
///
/// The first branch covers slopes `-(N + 2 - 2n)/N` in [-45°, 45°); the
/// second branch continues through 45°..135° with cotangent steps of 2/N.
pub fn es_slopes(n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(invalid("equally-sloped parameter N must be >= 1"));
    }
    let nf = n as f64;
    let out = (1..=2 * n)
        .map(|k| {
            let kf = k as f64;
            if k <= n {
                -((nf + 2.0 - 2.0 * kf) / nf).atan().to_degrees()
            } else {
                90.0 - ((3.0 * nf + 2.0 - 2.0 * kf) / nf).atan().to_degrees()
            }
        })
        .collect();
    Ok(out)
}

/// Maps an angle into (-90, 90] using the 180° periodicity of parallel rays.
pub fn wrap_half_turn(theta: f64) -> f64 {
    let mut t = theta % 180.0;
    if t > 90.0 {
        t -= 180.0;
    } else if t <= -90.0 {
        t += 180.0;
    }
    t
}

/// Wraps `slopes` into (-90, 90], keeps those inside the tilt range and
/// returns them sorted as an equally-sloped set.
pub fn restrict_to_tilt_range(slopes: &[f64], tilt_min: f64, tilt_max: f64) -> Result<AngleSet> {
    check_range(tilt_min, tilt_max)?;
    let mut kept: Vec<f64> = slopes
        .iter()
        .map(|&s| wrap_half_turn(s))
        .filter(|&a| a >= tilt_min && a <= tilt_max)
        .collect();
    kept.sort_by(f64::total_cmp);
    kept.dedup_by(|a, b| (*a - *b).abs() <= ANGLE_TOL);
    AngleSet::new(kept, AcquisitionMode::EquallySloped, tilt_min, tilt_max)
}

/// Picks `target - 2` members of `set` at evenly spaced index positions and
/// adds the tilt-range endpoints explicitly.
///
/// Input members that already coincide with an endpoint are not eligible as
/// picks, so the output always has exactly `target` angles.
pub fn subsample_with_endpoints(set: &AngleSet, target: usize) -> Result<AngleSet> {
    if target < 2 {
        return Err(invalid("subsample target must be at least 2"));
    }
    let lo = set.tilt_min();
    let hi = set.tilt_max();
    let pool: Vec<f64> = set
        .angles()
        .iter()
        .copied()
        .filter(|a| (a - lo).abs() > ANGLE_TOL && (a - hi).abs() > ANGLE_TOL)
        .collect();
    let picks = target - 2;
    if picks > pool.len() {
        return Err(invalid(format!(
            "cannot pick {picks} interior views from {} candidates",
            pool.len()
        )));
    }
    let m = pool.len();
    let chosen: Vec<usize> = match picks {
        0 => Vec::new(),
        1 => vec![((m - 1) as f64 / 2.0).round() as usize],
        _ => (0..picks)
            .map(|i| (i as f64 * (m - 1) as f64 / (picks - 1) as f64).round() as usize)
            .collect(),
    };
    let mut angles = Vec::with_capacity(target);
    angles.push(lo);
    angles.extend(chosen.iter().map(|&i| pool[i]));
    angles.push(hi);
    angles.sort_by(f64::total_cmp);
    AngleSet::new(angles, set.mode(), lo, hi)
}

/// The equally-sloped scheme used for a given number of views over ±`half_range`:
/// N = 64 gives 107 candidate views, N = 32 gives 53; the requested count is
/// then subsampled from the smallest candidate set that can supply it.
pub fn es_views(n_views: usize, half_range: f64) -> Result<AngleSet> {
    for n in [32usize, 64, 128, 256] {
        let base = restrict_to_tilt_range(&es_slopes(n)?, -half_range, half_range)?;
        if base.len() + 2 >= n_views {
            return subsample_with_endpoints(&base, n_views);
        }
    }
    Err(invalid(format!("no equally-sloped scheme supplies {n_views} views")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ea_examples() {
        let s = ea_angles(3, -60.0, 60.0).unwrap();
        assert_eq!(s.angles(), &[-60.0, 0.0, 60.0]);
        let s = ea_angles(2, -72.6, 72.6).unwrap();
        assert_eq!(s.angles(), &[-72.6, 72.6]);
        let s = ea_angles(69, -72.6, 72.6).unwrap();
        assert_eq!(s.len(), 69);
        let expected = 145.2 / 68.0;
        for w in s.angles().windows(2) {
            assert!((w[1] - w[0] - expected).abs() < 1e-9);
        }
        assert!((expected - 2.135_294_117_647_059).abs() < 1e-12);
        assert_eq!(ea_angles(1, -10.0, 30.0).unwrap().angles(), &[10.0]);
    }

    #[test]
    fn ea_errors() {
        assert!(ea_angles(0, -60.0, 60.0).is_err());
        assert!(ea_angles(5, 60.0, -60.0).is_err());
        assert!(ea_angles(5, -90.0, 60.0).is_err());
    }

    #[test]
    fn es_examples() {
        let s = es_slopes(4).unwrap();
        assert_eq!(s.len(), 8);
        assert!((s[0] + 45.0).abs() < 1e-12);
        assert!((s[4] - 45.0).abs() < 1e-12);
        assert!((s[7] - (90.0 + 0.5f64.atan().to_degrees())).abs() < 1e-12);
        assert!((s[7] - 116.565_051_177_077_99).abs() < 1e-9);
        assert!(es_slopes(0).is_err());
    }

    #[test]
    fn wrapping() {
        assert!((wrap_half_turn(116.565_051_177_078) + 63.434_948_822_922).abs() < 1e-9);
        assert_eq!(wrap_half_turn(90.0), 90.0);
        assert_eq!(wrap_half_turn(-90.0), 90.0);
        assert_eq!(wrap_half_turn(10.0), 10.0);
    }

    #[test]
    fn restricted_counts() {
        let s64 = restrict_to_tilt_range(&es_slopes(64).unwrap(), -72.6, 72.6).unwrap();
        assert_eq!(s64.len(), 107);
        let s32 = restrict_to_tilt_range(&es_slopes(32).unwrap(), -72.6, 72.6).unwrap();
        assert_eq!(s32.len(), 53);
        assert!(s32.angles().iter().any(|a| (a + 63.434_948_822_922).abs() < 1e-9));
    }

    #[test]
    fn subsample_examples() {
        let s32 = restrict_to_tilt_range(&es_slopes(32).unwrap(), -72.6, 72.6).unwrap();
        let v55 = subsample_with_endpoints(&s32, 55).unwrap();
        assert_eq!(v55.len(), 55);
        assert_eq!(v55.angles()[0], -72.6);
        assert_eq!(v55.angles()[54], 72.6);

        let s64 = restrict_to_tilt_range(&es_slopes(64).unwrap(), -72.6, 72.6).unwrap();
        let v69 = subsample_with_endpoints(&s64, 69).unwrap();
        assert_eq!(v69.len(), 69);
        let interior = &v69.angles()[1..68];
        assert!(interior.iter().all(|a| s64.angles().contains(a)));

        let three = AngleSet::new(vec![-72.6, 0.0, 72.6], AcquisitionMode::EquallySloped, -72.6, 72.6)
            .unwrap();
        assert_eq!(subsample_with_endpoints(&three, 3).unwrap(), three);

        assert!(subsample_with_endpoints(&s32, 56).is_err());
        assert!(subsample_with_endpoints(&s32, 1).is_err());
        assert_eq!(subsample_with_endpoints(&s32, 2).unwrap().angles(), &[-72.6, 72.6]);
    }

    #[test]
    fn es_views_sizes() {
        for n in [31, 55, 69] {
            let s = es_views(n, 72.6).unwrap();
            assert_eq!(s.len(), n);
            assert_eq!(s.mode(), AcquisitionMode::EquallySloped);
        }
    }

    #[test]
    fn angle_set_validation() {
        assert!(AngleSet::new(vec![0.0, 0.0], AcquisitionMode::EquallySloped, -1.0, 1.0).is_err());
        assert!(AngleSet::new(vec![1.0, 0.0], AcquisitionMode::EquallySloped, -1.0, 1.0).is_err());
        assert!(AngleSet::new(vec![2.0], AcquisitionMode::EquallySloped, -1.0, 1.0).is_err());
        assert!(AngleSet::new(vec![0.0, 1.0, 3.0], AcquisitionMode::EquallyAngled, -5.0, 5.0).is_err());
    }
}
