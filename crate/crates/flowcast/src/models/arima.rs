//! ARIMA(p, d, q) fit by conditional sum of squares and recursive
//! forecasting with difference integration.
//!
//! Estimation minimizes the sum of squared one-step residuals on the
//! d-times-differenced series, with pre-sample residuals fixed at zero, via
//! a derivative-free cyclic coordinate search from several deterministic
//! starting points. The degenerate (0, d, 0) case has nothing to estimate
//! and forecasts by carrying the last differenced value forward. An
//! intercept is estimated whenever p + q >= 1.

use serde::{Deserialize, Serialize};

use super::ModelError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArimaModel {
    pub p: usize,
    pub d: usize,
    pub q: usize,
    pub ar: Vec<f64>,
    pub ma: Vec<f64>,
    pub intercept: f64,
    pub residual_variance: f64,
    /// False when the AR polynomial fails the unit-root check; the model is
    /// still returned and usable, the flag just reports the condition.
    pub stationary_ar: bool,
    /// Last value of each partially differenced series (level 0 = raw).
    pub level_tails: Vec<f64>,
    /// Last `p` values of the fully differenced series, chronological.
    pub z_tail: Vec<f64>,
    /// Last `q` fitted residuals, chronological.
    pub e_tail: Vec<f64>,
}

fn difference(series: &[f64]) -> Vec<f64> {
    series.windows(2).map(|w| w[1] - w[0]).collect()
}

/// Residuals of the ARMA recursion with zero pre-sample residuals, starting
/// at index `p` of `z`.
fn residuals(z: &[f64], ar: &[f64], ma: &[f64], intercept: f64) -> Vec<f64> {
    let p = ar.len();
    let mut errors = vec![0.0; z.len()];
    for t in p..z.len() {
        let mut pred = intercept;
        for (i, phi) in ar.iter().enumerate() {
            pred += phi * z[t - 1 - i];
        }
        for (j, theta) in ma.iter().enumerate() {
            if t > j && t - 1 - j >= p {
                pred += theta * errors[t - 1 - j];
            }
        }
        errors[t] = z[t] - pred;
    }
    errors
}

fn css_objective(z: &[f64], params: &[f64], p: usize, q: usize) -> f64 {
    let intercept = params[0];
    let ar = &params[1..1 + p];
    let ma = &params[1 + p..1 + p + q];
    let errors = residuals(z, ar, ma, intercept);
    let sse: f64 = errors[p..].iter().map(|e| e * e).sum();
    if sse.is_finite() {
        sse
    } else {
        f64::INFINITY
    }
}

/// Cyclic coordinate descent with step halving.
fn coordinate_search(
    objective: &dyn Fn(&[f64]) -> f64,
    start: &[f64],
) -> (Vec<f64>, f64) {
    let mut point = start.to_vec();
    let mut value = objective(&point);
    let mut step = 0.5;
    while step > 1e-8 {
        let mut improved = true;
        let mut sweeps = 0;
        while improved && sweeps < 200 {
            improved = false;
            sweeps += 1;
            for i in 0..point.len() {
                for delta in [step, -step] {
                    let mut probe = point.clone();
                    probe[i] += delta;
                    let v = objective(&probe);
                    if v < value {
                        point = probe;
                        value = v;
                        improved = true;
                    }
                }
            }
        }
        step *= 0.5;
    }
    (point, value)
}

/// All reflection coefficients inside the unit interval means the AR
/// polynomial has its roots outside the unit circle.
pub fn ar_is_stationary(ar: &[f64]) -> bool {
    let mut coeffs = ar.to_vec();
    for m in (1..=coeffs.len()).rev() {
        let k = coeffs[m - 1];
        if k.abs() >= 1.0 {
            return false;
        }
        if m > 1 {
            let prev: Vec<f64> = (0..m - 1)
                .map(|i| (coeffs[i] + k * coeffs[m - 2 - i]) / (1.0 - k * k))
                .collect();
            coeffs = prev;
        }
    }
    true
}

pub fn fit_arima(series: &[f64], p: usize, d: usize, q: usize) -> Result<ArimaModel, ModelError> {
    let needed = p + d + q + 11;
    if series.len() < needed {
        return Err(ModelError::InsufficientData { needed, got: series.len() });
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(ModelError::NonFiniteInput);
    }

    let mut level_tails = Vec::with_capacity(d);
    let mut z = series.to_vec();
    for _ in 0..d {
        level_tails.push(*z.last().unwrap());
        z = difference(&z);
    }

    let (intercept, ar, ma, sse) = if p + q == 0 {
        // Nothing to estimate: the differenced series is forecast by
        // carrying its last value forward, so score that rule in-sample.
        let sse: f64 = z.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
        (0.0, Vec::new(), Vec::new(), sse)
    } else {
        let n_params = 1 + p + q;
        let mean = z.iter().sum::<f64>() / z.len() as f64;
        let objective = |params: &[f64]| css_objective(&z, params, p, q);
        let mut starts: Vec<Vec<f64>> = vec![{
            let mut s = vec![0.0; n_params];
            s[0] = mean;
            s
        }];
        if p >= 1 {
            for phi0 in [0.5, -0.5] {
                let mut s = vec![0.0; n_params];
                s[1] = phi0;
                s[0] = mean * (1.0 - phi0);
                starts.push(s);
            }
        } else {
            let mut s = vec![0.0; n_params];
            s[0] = mean;
            s[1] = 0.3; // first MA coefficient
            starts.push(s);
        }
        let mut best: Option<(Vec<f64>, f64)> = None;
        for start in &starts {
            let (point, value) = coordinate_search(&objective, start);
            if best.as_ref().is_none_or(|(_, v)| value < *v) {
                best = Some((point, value));
            }
        }
        let (point, value) = best.unwrap();
        (point[0], point[1..1 + p].to_vec(), point[1 + p..].to_vec(), value)
    };

    let errors = residuals(&z, &ar, &ma, intercept);
    let effective = (z.len() - p).max(1);
    let stationary_ar = ar_is_stationary(&ar);
    if !stationary_ar {
        log::warn!("estimated AR coefficients are non-stationary: {ar:?}");
    }
    // The naive p = q = 0 rule still needs the last differenced value.
    let keep = if p == 0 && q == 0 { 1 } else { p };
    let z_tail = z[z.len().saturating_sub(keep)..].to_vec();
    let e_tail = errors[errors.len().saturating_sub(q)..].to_vec();
    Ok(ArimaModel {
        p,
        d,
        q,
        ar,
        ma,
        intercept,
        residual_variance: sse / effective as f64,
        stationary_ar,
        level_tails,
        z_tail,
        e_tail,
    })
}

/// Forecast `h` steps ahead on the level scale.
pub fn forecast_arima(model: &ArimaModel, horizon: usize) -> Vec<f64> {
    let mut z_hist = model.z_tail.clone();
    let mut e_hist = model.e_tail.clone();
    let mut z_forecast = Vec::with_capacity(horizon);
    let naive = model.p == 0 && model.q == 0;
    let last_z = z_hist.last().copied().unwrap_or(0.0);
    for _ in 0..horizon {
        let next = if naive {
            last_z
        } else {
            let mut pred = model.intercept;
            for (i, phi) in model.ar.iter().enumerate() {
                let lag = i + 1;
                if z_hist.len() >= lag {
                    pred += phi * z_hist[z_hist.len() - lag];
                }
            }
            for (j, theta) in model.ma.iter().enumerate() {
                let lag = j + 1;
                if e_hist.len() >= lag {
                    pred += theta * e_hist[e_hist.len() - lag];
                }
            }
            pred
        };
        z_forecast.push(next);
        z_hist.push(next);
        e_hist.push(0.0); // future innovations are zero in expectation
    }
    // Integrate the differences back to levels.
    let mut values = z_forecast;
    for tail in model.level_tails.iter().rev() {
        let mut running = *tail;
        for v in values.iter_mut() {
            running += *v;
            *v = running;
        }
    }
    values
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
        // Box-Muller from two uniforms.
        let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    fn simulate_ar1(phi: f64, intercept: f64, n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut series = Vec::with_capacity(n);
        let mut prev = intercept / (1.0 - phi);
        for _ in 0..n {
            let next = intercept + phi * prev + gaussian(&mut rng);
            series.push(next);
            prev = next;
        }
        series
    }

    #[test]
    fn random_walk_orders_forecast_last_value() {
        let series: Vec<f64> = (0..40).map(|i| 10.0 + (i as f64 * 1.3).sin() * 5.0).collect();
        let model = fit_arima(&series, 0, 1, 0).unwrap();
        let forecast = forecast_arima(&model, 4);
        // Last difference is carried forward: a straight line through the
        // last two observations.
        let slope = series[39] - series[38];
        for (k, value) in forecast.iter().enumerate() {
            assert!((value - (series[39] + slope * (k + 1) as f64)).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_order_model_repeats_last_value() {
        let series: Vec<f64> = (0..30).map(|i| (i as f64 * 0.91).cos() * 3.0).collect();
        let model = fit_arima(&series, 0, 0, 0).unwrap();
        let forecast = forecast_arima(&model, 3);
        for v in forecast {
            assert!((v - series[29]).abs() < 1e-12);
        }
    }

    #[test]
    fn ar1_coefficient_is_recovered() {
        let series = simulate_ar1(0.7, 3.0, 500, 11);
        let model = fit_arima(&series, 1, 0, 0).unwrap();
        assert!(
            (model.ar[0] - 0.7).abs() < 0.1,
            "estimated {} for true 0.7",
            model.ar[0]
        );
        assert!(model.stationary_ar);
    }

    #[test]
    fn differenced_fit_equals_manual_differencing() {
        let series = simulate_ar1(0.5, 1.0, 200, 4);
        // Integrate the AR series so d=1 recovers it.
        let levels: Vec<f64> = series
            .iter()
            .scan(100.0, |acc, v| {
                *acc += v;
                Some(*acc)
            })
            .collect();
        let direct = fit_arima(&levels, 1, 1, 0).unwrap();
        let diffed: Vec<f64> = levels.windows(2).map(|w| w[1] - w[0]).collect();
        let manual = fit_arima(&diffed, 1, 0, 0).unwrap();
        assert!((direct.ar[0] - manual.ar[0]).abs() < 1e-9);
        assert!((direct.intercept - manual.intercept).abs() < 1e-9);
        // Integration identity: level forecasts equal cumulative sums of the
        // differenced forecasts.
        let level_forecast = forecast_arima(&direct, 5);
        let diff_forecast = forecast_arima(&manual, 5);
        let mut running = *levels.last().unwrap();
        for (lf, df) in level_forecast.iter().zip(&diff_forecast) {
            running += df;
            assert!((lf - running).abs() < 1e-9);
        }
    }

    #[test]
    fn stationarity_check_matches_known_regions() {
        assert!(ar_is_stationary(&[0.7]));
        assert!(!ar_is_stationary(&[1.01]));
        assert!(ar_is_stationary(&[0.5, -0.3]));
        assert!(!ar_is_stationary(&[0.9, 0.2])); // phi1 + phi2 > 1
        assert!(ar_is_stationary(&[]));
    }

    #[test]
    fn short_series_is_rejected() {
        let short = vec![1.0; 12];
        assert!(matches!(
            fit_arima(&short, 1, 0, 1),
            Err(ModelError::InsufficientData { .. })
        ));
    }

    #[test]
    fn ma_component_improves_on_white_noise_with_ma_structure() {
        // z_t = e_t + 0.6 e_{t-1}
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut prev_e = 0.0;
        let mut series = Vec::with_capacity(400);
        for _ in 0..400 {
            let e = gaussian(&mut rng);
            series.push(2.0 + e + 0.6 * prev_e);
            prev_e = e;
        }
        let model = fit_arima(&series, 0, 0, 1).unwrap();
        assert!((model.ma[0] - 0.6).abs() < 0.15, "estimated {}", model.ma[0]);
    }
}
