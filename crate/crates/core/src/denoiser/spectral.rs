//! Limiting spectral laws of the centered adjacency: the quarter-circle
//! bulk, isolated spikes, and the risk of singular value shrinkage.

use std::f64::consts::PI;

use crate::error::{KronError, Result};

/// Quarter-circle law for noise variance `a^2 = pbar (1 - pbar)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralModel {
    pbar: f64,
    a2: f64,
}

/// Where a signal singular value lands and how well its vector aligns.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpikePrediction {
    pub location: f64,
    pub alignment: f64,
}

impl SpectralModel {
    pub fn new(pbar: f64) -> Result<Self> {
        if !(pbar > 0.0 && pbar < 1.0) {
            return Err(KronError::ParameterOutOfRange(format!("mean edge density {pbar} is outside (0, 1)")));
        }
        Ok(SpectralModel {
            pbar,
            a2: pbar * (1.0 - pbar),
        })
    }

    /// Model whose bulk is the unit quarter circle on `[0, 2]`.
    pub fn unit() -> Self {
        SpectralModel { pbar: f64::NAN, a2: 1.0 }
    }

    pub fn pbar(&self) -> f64 {
        self.pbar
    }

    /// `sqrt(pbar (1 - pbar))`
    pub fn noise_scale(&self) -> f64 {
        self.a2.sqrt()
    }

    pub fn bulk_edge(&self) -> f64 {
        2.0 * self.a2.sqrt()
    }

    pub fn density(&self, x: f64) -> f64 {
        let r2 = 4.0 * self.a2;
        if !(0.0..=self.bulk_edge()).contains(&x) {
            return 0.0;
        }
        (r2 - x * x).max(0.0).sqrt() / (self.a2 * PI)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let r = self.bulk_edge();
        if x <= 0.0 {
            return 0.0;
        }
        if x >= r {
            return 1.0;
        }
        let val = (x * (r * r - x * x).sqrt() + r * r * (x / r).asin()) / (2.0 * self.a2 * PI);
        val.clamp(0.0, 1.0)
    }

    pub fn spike(&self, ell: f64) -> SpikePrediction {
        if ell > 1.0 {
            SpikePrediction {
                location: (self.a2 * (2.0 + ell * ell + 1.0 / (ell * ell))).sqrt(),
                alignment: 1.0 - 1.0 / (ell * ell),
            }
        } else {
            SpikePrediction {
                location: self.bulk_edge(),
                alignment: 0.0,
            }
        }
    }

    /// Signal-to-noise ratio `l` implied by an observed singular value, if it
    /// lies beyond the bulk edge.
    pub fn invert_spike(&self, observed: f64) -> Option<f64> {
        let y = observed * observed / self.a2 - 2.0;
        if y <= 2.0 {
            return None;
        }
        Some(((y + (y * y - 4.0).sqrt()) / 2.0).sqrt())
    }

    /// Asymptotic squared error of shrinking one signal component of size `t`.
    pub fn risk(&self, t: f64) -> f64 {
        if t > self.a2.sqrt() {
            self.a2 * (2.0 - self.a2 / (t * t))
        } else {
            t * t
        }
    }
}

/// `(density, cdf)` of the quarter-circle law at `x`.
pub fn quarter_circle(x: f64, pbar: f64) -> Result<(f64, f64)> {
    let model = SpectralModel::new(pbar)?;
    Ok((model.density(x), model.cdf(x)))
}

/// `(location, alignment)` of a spike with signal-to-noise ratio `ell`.
pub fn spike_prediction(ell: f64, pbar: f64) -> Result<(f64, f64)> {
    if !(ell >= 0.0) {
        return Err(KronError::ParameterOutOfRange(format!("signal-to-noise ratio {ell} is negative")));
    }
    let s = SpectralModel::new(pbar)?.spike(ell);
    Ok((s.location, s.alignment))
}

/// Predicted `||S_hat - S||_F^2` given the true signal singular values.
pub fn shrinkage_risk(sigmas: &[f64], pbar: f64) -> Result<f64> {
    let model = SpectralModel::new(pbar)?;
    Ok(sigmas.iter().map(|&t| model.risk(t)).sum())
}

/// Kolmogorov–Smirnov distance between the empirical distribution of
/// `values` and the CDF of `model`.
pub fn ks_distance(values: &[f64], model: &SpectralModel) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.iter().enumerate().fold(0.0, |d, (i, &x)| {
        let f = model.cdf(x);
        d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Composite Simpson on `[lo, hi]`.
    fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
        let h = (hi - lo) / n as f64;
        let mut s = f(lo) + f(hi);
        for i in 1..n {
            s += f(lo + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn density_and_cdf_endpoints() {
        let m = SpectralModel::new(0.5).unwrap();
        assert!((m.density(0.0) - 4.0 / PI).abs() < 1e-12);
        assert_eq!(m.cdf(0.0), 0.0);
        assert!((m.cdf(m.bulk_edge()) - 1.0).abs() < 1e-15);
        assert_eq!(m.density(1.5), 0.0);
        assert_eq!(m.density(-0.1), 0.0);
    }

    #[test]
    fn cdf_matches_quadrature() {
        for &pbar in &[0.5, 0.1, 0.013] {
            let m = SpectralModel::new(pbar).unwrap();
            let edge = m.bulk_edge();
            let total = simpson(|x| m.density(x), 0.0, edge, 200_000);
            assert!((total - 1.0).abs() < 1e-6, "{total}");
            for frac in [0.2, 0.5, 0.7, 0.95] {
                let x = frac * edge;
                let q = simpson(|t| m.density(t), 0.0, x, 20_000);
                assert!((q - m.cdf(x)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn spike_values() {
        let m = SpectralModel::new(0.5).unwrap();
        let s = m.spike(1.0);
        assert_eq!((s.location, s.alignment), (m.bulk_edge(), 0.0));
        let s = m.spike(2.0);
        assert!((s.location - 1.25).abs() < 1e-12);
        assert!((s.alignment - 0.75).abs() < 1e-12);
        let big = m.spike(1e6);
        assert!((big.location / 1e6 - 0.5).abs() < 1e-9);
        assert!(spike_prediction(-1.0, 0.5).is_err());
    }

    #[test]
    fn spike_inversion_round_trip() {
        let m = SpectralModel::new(0.2).unwrap();
        for ell in [1.1, 2.0, 7.5] {
            let back = m.invert_spike(m.spike(ell).location).unwrap();
            assert!((back - ell).abs() < 1e-9);
        }
        assert!(m.invert_spike(0.5 * m.bulk_edge()).is_none());
    }

    #[test]
    fn risk_branches() {
        let m = SpectralModel::new(0.5).unwrap();
        assert!((m.risk(1.0) - 0.4375).abs() < 1e-15);
        assert_eq!(m.risk(0.3), 0.09);
        assert!((m.risk(1e9) - 0.5).abs() < 1e-12);
        assert!((shrinkage_risk(&[1.0, 0.3], 0.5).unwrap() - 0.5275).abs() < 1e-15);
    }

    #[test]
    fn ks_of_quantiles_is_small() {
        let m = SpectralModel::unit();
        // invert the cdf by bisection at midpoints
        let n = 500;
        let sample: Vec<f64> = (0..n)
            .map(|i| {
                let target = (i as f64 + 0.5) / n as f64;
                let (mut lo, mut hi) = (0.0, 2.0);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if m.cdf(mid) < target {
                        lo = mid
                    } else {
                        hi = mid
                    }
                }
                lo
            })
            .collect();
        assert!(ks_distance(&sample, &m) <= 0.5 / n as f64 + 1e-9);
        assert!(ks_distance(&[3.0; 10], &m) > 0.99);
    }
}
