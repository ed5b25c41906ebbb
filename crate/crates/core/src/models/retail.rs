use crate::domain::{Covariate, Family, TerritorySystem};

use super::{softmax_scaled, FlowPrediction, LogWeights, ModelError};

/// Entropy-maximising retail model with covariate benefits.
///
/// Destination `j` receives a share proportional to
/// `exp(sum_n alpha_n ln w_j^(n) - beta c_Lj)`, where the sum runs over the
/// covariates listed in `alphas` and `c` is travel time in minutes. Only the
/// listed covariates need to be positive.
pub fn retail_flows(
    beta: f64,
    alphas: &[(Covariate, f64)],
    system: &TerritorySystem,
    year: i32,
    total_outflow: f64,
) -> Result<FlowPrediction, ModelError> {
    let lw = log_weights(beta, alphas, system, year)?;
    Ok(FlowPrediction { year, family: Family::Retail, values: softmax_scaled(&lw.values, total_outflow, system)? })
}

pub(super) fn log_weights(
    beta: f64,
    alphas: &[(Covariate, f64)],
    system: &TerritorySystem,
    year: i32,
) -> Result<LogWeights, ModelError> {
    let covs = system.covariates_for(year).ok_or(ModelError::MissingCovariates { year })?;
    let origin = system.origin_index;
    let mut values = Vec::with_capacity(system.destination_count());
    let mut jacobian = Vec::with_capacity(system.destination_count());
    for j in system.destinations() {
        let cost = system.costs.travel_time.get(origin, j);
        let mut u = -beta * cost;
        let mut row = Vec::with_capacity(1 + alphas.len());
        row.push(-cost);
        for &(cov, alpha) in alphas {
            let w = covs.value(j, cov);
            if !(w > 0.0) {
                return Err(ModelError::NonPositiveCovariate {
                    territory: system.territories[j].code.clone(),
                    covariate: cov,
                });
            }
            let ln_w = w.ln();
            u += alpha * ln_w;
            row.push(ln_w);
        }
        if !u.is_finite() {
            return Err(ModelError::NonFiniteWeight { destination: system.territories[j].code.clone() });
        }
        values.push(u);
        jacobian.push(row);
    }
    Ok(LogWeights { values, jacobian })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::test_support::star_system;
    use approx::assert_relative_eq;

    #[test]
    fn no_exponents_split_evenly() {
        let sys = star_system(&[1.0, 2.0], &[1.0, 1.0], &[30.0, 90.0]);
        let p = retail_flows(0.0, &[], &sys, 2019, 10.0).unwrap();
        assert_eq!(p.values, vec![5.0, 5.0]);
    }

    #[test]
    fn travel_decay_by_ln2() {
        // exp(-ln2 * 1) : exp(-ln2 * 2) = 1/2 : 1/4 -> 2/3, 1/3 of 9
        let sys = star_system(&[1.0, 2.0], &[1.0, 1.0], &[1.0, 2.0]);
        let p = retail_flows(std::f64::consts::LN_2, &[], &sys, 2019, 9.0).unwrap();
        assert_relative_eq!(p.values[0], 6.0, epsilon = 1e-12);
        assert_relative_eq!(p.values[1], 3.0, epsilon = 1e-12);
    }

    #[test]
    fn constant_cost_shift_cancels() {
        let a = star_system(&[1.0, 2.0, 3.0], &[1.0, 1.0, 1.0], &[10.0, 25.0, 70.0]);
        let b = star_system(&[1.0, 2.0, 3.0], &[1.0, 1.0, 1.0], &[110.0, 125.0, 170.0]);
        let pa = retail_flows(0.03, &[], &a, 2019, 50.0).unwrap();
        let pb = retail_flows(0.03, &[], &b, 2019, 50.0).unwrap();
        for (x, y) in pa.values.iter().zip(&pb.values) {
            assert_relative_eq!(x, y, max_relative = 1e-12);
        }
    }

    #[test]
    fn large_beta_does_not_overflow() {
        let sys = star_system(&[1.0, 2.0], &[1.0, 1.0], &[1000.0, 1001.0]);
        let p = retail_flows(-5.0, &[], &sys, 2019, 9.0).unwrap();
        assert!(p.values.iter().all(|v| v.is_finite()));
        assert_relative_eq!(p.total(), 9.0, max_relative = 1e-12);
    }

    #[test]
    fn covariates_enter_as_power_law() {
        let mut sys = star_system(&[1.0, 2.0], &[1.0, 1.0], &[5.0, 5.0]);
        let set = sys.covariates.get_mut(&2019).unwrap();
        set.values[1][Covariate::Knife.index()] = 4.0;
        set.values[2][Covariate::Knife.index()] = 1.0;
        // weights 4^0.5 : 1 = 2 : 1
        let p = retail_flows(0.0, &[(Covariate::Knife, 0.5)], &sys, 2019, 3.0).unwrap();
        assert_relative_eq!(p.values[0], 2.0, epsilon = 1e-12);
        assert_relative_eq!(p.values[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn missing_year_is_an_error() {
        let sys = star_system(&[1.0, 2.0], &[1.0, 1.0], &[5.0, 5.0]);
        assert_eq!(retail_flows(0.1, &[], &sys, 1999, 3.0).unwrap_err(), ModelError::MissingCovariates { year: 1999 });
    }
}
