use crate::domain::{Family, TerritorySystem};

use super::{softmax_scaled, FlowPrediction, LogWeights, ModelError};

/// Total population of territories strictly closer to `origin` than `dest`,
/// excluding both endpoints. Closeness is read from the distance matrix.
pub fn intervening_population(system: &TerritorySystem, origin: usize, dest: usize) -> Result<f64, ModelError> {
    let n = system.len();
    if origin >= n || dest >= n || origin == dest {
        return Err(ModelError::InvalidPair { origin, destination: dest });
    }
    let radius = system.costs.distance.get(origin, dest);
    Ok(system
        .territories
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != origin && k != dest && system.costs.distance.get(origin, k) < radius)
        .map(|(_, t)| t.population)
        .sum())
}

/// Absorption probability given opportunities at the origin (`n_i`), at the
/// destination (`n_j`) and in between (`n_ij`), with exponent `r`.
pub fn radiation_probability(n_i: f64, n_j: f64, n_ij: f64, r: f64) -> f64 {
    let inner = (n_i + n_ij).powf(r);
    let outer = (n_i + n_j + n_ij).powf(r);
    (outer - inner) * (n_i.powf(r) + 1.0) / ((inner + 1.0) * (outer + 1.0))
}

/// Radiation model with opportunities proportional to population,
/// `n = rho * p`, normalized over destinations.
pub fn radiation_flows(
    rho: f64,
    r: f64,
    system: &TerritorySystem,
    year: i32,
    total_outflow: f64,
) -> Result<FlowPrediction, ModelError> {
    let lw = log_weights(rho, r, system)?;
    Ok(FlowPrediction { year, family: Family::Radiation, values: softmax_scaled(&lw.values, total_outflow, system)? })
}

fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(e^y - 1)` for `y > 0`.
fn ln_expm1(y: f64) -> f64 {
    if y > 30.0 {
        y + (-(-y).exp()).ln_1p()
    } else {
        y.exp_m1().ln()
    }
}

/// Log absorption probabilities evaluated in log space so that large
/// opportunity counts or exponents cannot overflow.
pub(super) fn log_weights(rho: f64, r: f64, system: &TerritorySystem) -> Result<LogWeights, ModelError> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(ModelError::InvalidParameter { name: "rho", value: rho });
    }
    if !(r > 0.0 && r.is_finite()) {
        return Err(ModelError::InvalidParameter { name: "r", value: r });
    }
    let origin = system.origin_index;
    let p_origin = system.territories[origin].population;
    let ln_rho = rho.ln();
    let ln_ni = ln_rho + p_origin.ln();
    let mut values = Vec::with_capacity(system.destination_count());
    let mut jacobian = Vec::with_capacity(system.destination_count());
    for j in system.destinations() {
        let between = intervening_population(system, origin, j)?;
        let p_j = system.territories[j].population;
        let ln_a = ln_rho + (p_origin + between).ln();
        let ln_s = ln_rho + (p_origin + between + p_j).ln();
        let y = r * (ln_s - ln_a);
        if !(y > 0.0) {
            return Err(ModelError::NonFiniteWeight { destination: system.territories[j].code.clone() });
        }
        let u = r * ln_a + ln_expm1(y) + softplus(r * ln_ni) - softplus(r * ln_a) - softplus(r * ln_s);
        let (sig_i, sig_a, sig_s) = (sigmoid(r * ln_ni), sigmoid(r * ln_a), sigmoid(r * ln_s));
        let d_rho = (r / rho) * (1.0 + sig_i - sig_a - sig_s);
        let d_r = ln_s + (ln_s - ln_a) / y.exp_m1() + ln_ni * sig_i - ln_a * sig_a - ln_s * sig_s;
        if !u.is_finite() {
            return Err(ModelError::NonFiniteWeight { destination: system.territories[j].code.clone() });
        }
        values.push(u);
        jacobian.push(vec![d_rho, d_r]);
    }
    Ok(LogWeights { values, jacobian })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::SquareMatrix;
    use crate::models::test_support::star_system;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    /// Territories on a line at positions 0, 1, 2, 3 with the origin first.
    fn line_system(pops: [f64; 4]) -> TerritorySystem {
        let mut sys = star_system(&pops[1..], &[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]);
        sys.territories[0].population = pops[0];
        let mut d = SquareMatrix::zeros(4);
        for i in 0..4 {
            for j in 0..4 {
                d.set(i, j, (i as f64 - j as f64).abs());
            }
        }
        sys.costs.distance = d;
        sys
    }

    #[test]
    fn probability_examples() {
        assert_eq!(radiation_probability(3.0, 0.0, 2.0, 1.3), 0.0);
        assert_relative_eq!(radiation_probability(1.0, 1.0, 0.0, 1.0), 1.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(radiation_probability(2.0, 3.0, 5.0, 2.0), 255.0 / 5050.0, epsilon = 1e-15);
    }

    #[test]
    fn intervening_examples() {
        let two = star_system(&[5.0], &[3.0], &[1.0]);
        assert_eq!(intervening_population(&two, 0, 1).unwrap(), 0.0);

        let three = star_system(&[7.0, 11.0], &[10.0, 20.0], &[1.0, 1.0]);
        assert_eq!(intervening_population(&three, 0, 2).unwrap(), 7.0);
        assert_eq!(intervening_population(&three, 0, 1).unwrap(), 0.0);

        let tied = star_system(&[7.0, 11.0], &[20.0, 20.0], &[1.0, 1.0]);
        assert_eq!(intervening_population(&tied, 0, 2).unwrap(), 0.0);

        assert!(intervening_population(&three, 1, 1).is_err());
    }

    #[test]
    fn identical_equidistant_destinations_split_evenly() {
        let sys = star_system(&[40.0, 40.0], &[5.0, 5.0], &[1.0, 1.0]);
        let p = radiation_flows(1.7, 0.9, &sys, 2019, 10.0).unwrap();
        assert_relative_eq!(p.values[0], 5.0, epsilon = 1e-12);
        assert_relative_eq!(p.values[1], 5.0, epsilon = 1e-12);
    }

    #[test]
    fn line_system_matches_direct_formula() {
        let sys = line_system([2.0, 1.0, 3.0, 0.5]);
        let probs = [
            radiation_probability(2.0, 1.0, 0.0, 1.0),
            radiation_probability(2.0, 3.0, 1.0, 1.0),
            radiation_probability(2.0, 0.5, 4.0, 1.0),
        ];
        let sum: f64 = probs.iter().sum();
        let p = radiation_flows(1.0, 1.0, &sys, 2019, 12.0).unwrap();
        for (v, q) in p.values.iter().zip(probs) {
            assert_relative_eq!(*v, 12.0 * q / sum, max_relative = 1e-12);
        }
    }

    #[test]
    fn population_scale_trades_against_rho() {
        let sys = line_system([2.0, 1.0, 3.0, 0.5]);
        let mut scaled = sys.clone();
        for t in &mut scaled.territories {
            t.population *= 1000.0;
        }
        let a = radiation_flows(1.5, 1.2, &sys, 2019, 30.0).unwrap();
        let b = radiation_flows(1.5 / 1000.0, 1.2, &scaled, 2019, 30.0).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert_relative_eq!(x, y, max_relative = 1e-10);
        }
    }

    #[test]
    fn non_positive_parameters_rejected() {
        let sys = line_system([2.0, 1.0, 3.0, 0.5]);
        assert!(matches!(
            radiation_flows(0.0, 1.0, &sys, 2019, 1.0),
            Err(ModelError::InvalidParameter { name: "rho", .. })
        ));
        assert!(matches!(
            radiation_flows(1.0, -1.0, &sys, 2019, 1.0),
            Err(ModelError::InvalidParameter { name: "r", .. })
        ));
    }

    #[test]
    fn huge_opportunities_stay_finite() {
        let sys = line_system([8.0e6, 1.0e6, 3.0e6, 5.0e5]);
        let p = radiation_flows(3.0, 6.0, &sys, 2019, 100.0).unwrap();
        assert!(p.values.iter().all(|v| v.is_finite() && *v >= 0.0));
        assert_relative_eq!(p.total(), 100.0, max_relative = 1e-12);
    }

    proptest! {
        #[test]
        fn probability_increases_with_destination_opportunities(
            n_i in 0.01f64..50.0, n_ij in 0.0f64..50.0, n_j in 0.01f64..50.0,
            extra in 0.01f64..10.0, r in 0.1f64..3.0,
        ) {
            let lo = radiation_probability(n_i, n_j, n_ij, r);
            let hi = radiation_probability(n_i, n_j + extra, n_ij, r);
            prop_assert!(hi > lo);
            prop_assert!((0.0..1.0).contains(&lo));
        }
    }
}
