use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{StarkError, StarkSeries};

/// Table units: η₂ in 10⁻³ m²/MV², η₁ in 10⁻³ m/MV.
const TABLE_UNIT: f64 = 1e-3;

/// Δα(E) = α0 (η₂E² + η₁E) with η in table units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StarkFit {
    pub alpha0: f64,
    pub eta2: f64,
    pub eta1: f64,
    /// rms of (data − model)/α0 over the samples; absolute kHz when
    /// `absolute` is set.
    pub rms_residual: f64,
    /// α0 was zero, so η are absolute coefficients in 10⁻³ kHz m²/MV² and
    /// 10⁻³ kHz m/MV.
    pub absolute: bool,
}

impl StarkFit {
    fn prefactor(&self) -> f64 {
        if self.absolute {
            1.0
        } else {
            self.alpha0
        }
    }
}

/// Least-squares fit of the relative change against η₂E² + η₁E with no
/// constant term.
pub fn fit_stark(series: &StarkSeries) -> Result<StarkFit, StarkError> {
    series.validate()?;
    let alpha0 = series.alpha0().expect("validated series holds E = 0");
    let absolute = alpha0 == 0.0;
    let pre = if absolute { 1.0 } else { alpha0 };
    let n = series.samples.len();
    let mut distinct: Vec<f64> = series
        .samples
        .iter()
        .map(|s| s.0)
        .filter(|&e| e != 0.0)
        .collect();
    distinct.dedup();
    if n < 3 || distinct.len() < 2 {
        return Err(StarkError::RankDeficient(n));
    }
    let a = DMatrix::from_fn(n, 2, |i, j| {
        let e = series.samples[i].0;
        TABLE_UNIT * if j == 0 { e * e } else { e }
    });
    let y = DVector::from_iterator(n, series.samples.iter().map(|&(_, v)| (v - alpha0) / pre));
    let qr = a.clone().qr();
    let rhs = qr.q().transpose() * &y;
    let eta = qr
        .r()
        .solve_upper_triangular(&rhs)
        .ok_or(StarkError::RankDeficient(n))?;
    let resid = &a * &eta - &y;
    let rms = (resid.norm_squared() / n as f64).sqrt();
    Ok(StarkFit {
        alpha0,
        eta2: eta[0],
        eta1: eta[1],
        rms_residual: rms,
        absolute,
    })
}

/// Δα at field `e` (MV/m), kHz.
pub fn evaluate_fit(fit: &StarkFit, e: f64) -> f64 {
    fit.prefactor() * TABLE_UNIT * (fit.eta2 * e * e + fit.eta1 * e)
}

/// |dα/dE| δE from the fitted model, kHz.
pub fn propagate_field_uncertainty(fit: &StarkFit, e: f64, delta_e: f64) -> f64 {
    (fit.prefactor() * TABLE_UNIT * (2.0 * fit.eta2 * e + fit.eta1)).abs() * delta_e.abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stark::Component;
    use proptest::prelude::*;

    fn series(alpha0: f64, eta2: f64, eta1: f64, fields: &[f64]) -> StarkSeries {
        StarkSeries {
            orbit_id: 0,
            site: [0, 4, 0],
            component: Component::Beta,
            samples: fields
                .iter()
                .map(|&e| (e, alpha0 * (1.0 + 1e-3 * (eta2 * e * e + eta1 * e))))
                .collect(),
        }
    }

    #[test]
    fn recovers_synthetic_coefficients() {
        let f = fit_stark(&series(2981.0, -3.5, -6.4, &[0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0])).unwrap();
        assert!((f.eta2 + 3.5).abs() < 1e-10 && (f.eta1 + 6.4).abs() < 1e-10, "{f:?}");
        assert!(f.rms_residual < 1e-12);
    }

    #[test]
    fn constant_series_has_zero_coefficients() {
        let f = fit_stark(&series(12.0, 0.0, 0.0, &[0.0, 1.0, 2.0])).unwrap();
        assert_eq!((f.eta2, f.eta1), (0.0, 0.0));
    }

    #[test]
    fn residual_is_relative_rms() {
        let mut s = series(100.0, -2.0, 1.0, &[0.0, 1.0, 2.0, 3.0]);
        s.samples[2].1 += 0.5;
        let f = fit_stark(&s).unwrap();
        let r: f64 = s
            .samples
            .iter()
            .map(|&(e, v)| ((v - 100.0) / 100.0 - 1e-3 * (f.eta2 * e * e + f.eta1 * e)).powi(2))
            .sum::<f64>();
        assert!((f.rms_residual - (r / 4.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn worked_predictions() {
        let fit = |eta2, eta1| StarkFit {
            alpha0: 2981.0,
            eta2,
            eta1,
            rms_residual: 0.0,
            absolute: false,
        };
        assert!((evaluate_fit(&fit(-3.5, -6.4), 4.0) + 243.2).abs() < 0.05);
        assert!((evaluate_fit(&fit(-3.6, 9.8), 4.0) + 54.9).abs() < 0.05);
        assert!((evaluate_fit(&fit(-3.8, 1.7), 4.0) + 161.0).abs() < 0.05);
        assert_eq!(evaluate_fit(&fit(-3.8, 1.7), 0.0), 0.0);
        let bar = propagate_field_uncertainty(&fit(-3.5, -6.4), 3.0, 0.1);
        assert!((bar - 8.17).abs() < 0.01, "{bar}");
        assert_eq!(propagate_field_uncertainty(&fit(-3.5, -6.4), 3.0, 0.0), 0.0);
        let flat = propagate_field_uncertainty(&fit(0.0, 2.0), 1.7, 0.1);
        assert!((flat - 2981.0 * 2e-3 * 0.1).abs() < 1e-12);
    }

    #[test]
    fn rejects_degenerate_sets() {
        assert!(matches!(
            fit_stark(&series(1.0, -1.0, 1.0, &[0.0, 1.0])),
            Err(StarkError::RankDeficient(_))
        ));
        let zero = StarkSeries {
            samples: vec![(0.0, 0.0), (1.0, 2.0), (2.0, 6.0)],
            ..series(1.0, 0.0, 0.0, &[0.0])
        };
        let f = fit_stark(&zero).unwrap();
        assert!(f.absolute);
        assert!((evaluate_fit(&f, 2.0) - 6.0).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn fit_round_trip(
            alpha0 in prop_oneof![-5000.0..-1.0f64, 1.0..5000.0f64],
            eta2 in -10.0..10.0f64,
            eta1 in -30.0..30.0f64,
            top in 0.5..40.0f64,
        ) {
            let fields: Vec<f64> = (0..7).map(|i| top * i as f64 / 6.0).collect();
            let s = series(alpha0, eta2, eta1, &fields);
            let f = fit_stark(&s).unwrap();
            prop_assert!((f.eta2 - eta2).abs() < 1e-8 * (1.0 + eta2.abs()) / top.min(1.0).powi(2));
            prop_assert!((f.eta1 - eta1).abs() < 1e-8 * (1.0 + eta1.abs()) / top.min(1.0));
            for &(e, v) in &s.samples {
                let model = alpha0 + evaluate_fit(&f, e);
                prop_assert!((model - v).abs() <= (f.rms_residual * 7f64.sqrt() + 1e-9) * alpha0.abs());
                let d = propagate_field_uncertainty(&f, e, 0.1);
                let want = (alpha0 * 1e-3 * (2.0 * f.eta2 * e + f.eta1)).abs() * 0.1;
                prop_assert!((d - want).abs() <= 1e-12 * want.max(1.0));
            }
        }
    }
}
