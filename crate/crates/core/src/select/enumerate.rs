use crate::domain::{Covariate, CovariateMask, Loss, ModelSpec};

/// Covariate subsets of the retail model in catalogue order, as alpha
/// indices (1 = misuse .. 5 = gdhi). The three-covariate block is not
/// lexicographic; the order is part of the published numbering.
const RETAIL_SUBSETS: [&[usize]; 32] = [
    &[],
    &[1],
    &[2],
    &[3],
    &[4],
    &[5],
    &[1, 2],
    &[1, 3],
    &[1, 4],
    &[1, 5],
    &[2, 3],
    &[2, 4],
    &[2, 5],
    &[3, 4],
    &[3, 5],
    &[4, 5],
    &[1, 2, 3],
    &[1, 2, 4],
    &[1, 2, 5],
    &[1, 3, 4],
    &[1, 3, 5],
    &[2, 3, 4],
    &[2, 3, 5],
    &[3, 4, 5],
    &[2, 4, 5],
    &[1, 4, 5],
    &[1, 2, 3, 4],
    &[1, 2, 3, 5],
    &[1, 2, 4, 5],
    &[1, 3, 4, 5],
    &[2, 3, 4, 5],
    &[1, 2, 3, 4, 5],
];

fn subset_mask(alpha_indices: &[usize]) -> CovariateMask {
    let covs: Vec<Covariate> = alpha_indices.iter().filter_map(|i| Covariate::from_index(i - 1)).collect();
    CovariateMask::from_covariates(&covs)
}

/// All 68 model configurations: gravity and radiation under both losses,
/// then every retail covariate subset under the Poisson loss (ids 5-36) and
/// under the mean-square loss (ids 37-68).
pub fn enumerate_models() -> Vec<ModelSpec> {
    let mut specs = vec![
        ModelSpec::gravity(1, Loss::Gaussian),
        ModelSpec::gravity(2, Loss::Poisson),
        ModelSpec::radiation(3, Loss::Gaussian),
        ModelSpec::radiation(4, Loss::Poisson),
    ];
    for loss in [Loss::Poisson, Loss::Gaussian] {
        for subset in RETAIL_SUBSETS {
            let id = specs.len() as u32 + 1;
            specs.push(ModelSpec::retail(id, loss, subset_mask(subset)));
        }
    }
    specs
}

pub fn spec_by_id(spec_id: u32) -> Option<ModelSpec> {
    enumerate_models().into_iter().find(|s| s.spec_id == spec_id)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Family;
    use std::collections::HashSet;

    #[test]
    fn sixty_eight_unique_specs() {
        let specs = enumerate_models();
        assert_eq!(specs.len(), 68);
        let ids: Vec<u32> = specs.iter().map(|s| s.spec_id).collect();
        assert_eq!(ids, (1..=68).collect::<Vec<_>>());
        let triples: HashSet<_> = specs.iter().map(|s| (s.family, s.loss, s.mask)).collect();
        assert_eq!(triples.len(), 68);
        let retail_poisson = specs.iter().filter(|s| s.family == Family::Retail && s.loss == Loss::Poisson).count();
        assert_eq!(retail_poisson, 32);
    }

    #[test]
    fn subsets_cover_power_set() {
        let masks: HashSet<_> = RETAIL_SUBSETS.iter().map(|s| subset_mask(s)).collect();
        assert_eq!(masks.len(), 32);
    }

    #[test]
    fn spec_nine_is_knife_crime() {
        let s = spec_by_id(9).unwrap();
        assert_eq!(s.family, Family::Retail);
        assert_eq!(s.loss, Loss::Poisson);
        assert_eq!(s.mask, CovariateMask::from_covariates(&[Covariate::Knife]));
        assert!(spec_by_id(69).is_none());
    }

    #[test]
    fn mse_block_mirrors_poisson_block() {
        let specs = enumerate_models();
        for i in 4..36 {
            assert_eq!(specs[i].mask, specs[i + 32].mask);
            assert_eq!(specs[i + 32].loss, Loss::Gaussian);
        }
    }
}
