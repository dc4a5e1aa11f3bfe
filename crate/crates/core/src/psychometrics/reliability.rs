use super::PsychometricsError;

/// Cronbach's alpha of a participants x items matrix (rows are
/// participants), using sample variances.
pub fn cronbach_alpha(rows: &[Vec<f64>]) -> Result<f64, PsychometricsError> {
    let n = rows.len();
    if n < 2 {
        return Err(PsychometricsError::InsufficientReliabilityData(format!(
            "{n} participants"
        )));
    }
    let k = rows[0].len();
    if k < 2 {
        return Err(PsychometricsError::InsufficientReliabilityData(format!("{k} items")));
    }
    if rows.iter().any(|r| r.len() != k) {
        return Err(PsychometricsError::Schema("ragged item matrix".into()));
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(PsychometricsError::Schema("item matrix has missing cells".into()));
    }
    let item_variance_sum: f64 = (0..k)
        .map(|j| sample_variance(rows.iter().map(|r| r[j])))
        .sum();
    let total_variance = sample_variance(rows.iter().map(|r| r.iter().sum::<f64>()));
    if total_variance == 0.0 {
        return Err(PsychometricsError::UndefinedReliability);
    }
    let k = k as f64;
    Ok(k / (k - 1.0) * (1.0 - item_variance_sum / total_variance))
}

fn sample_variance(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    // Alpha via the item covariance matrix: k/(k-1) * (1 - tr(C)/sum(C)).
    fn alpha_from_covariance(rows: &[Vec<f64>]) -> f64 {
        let n = rows.len() as f64;
        let k = rows[0].len();
        let means: Vec<f64> = (0..k)
            .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n)
            .collect();
        let mut trace = 0.0;
        let mut total = 0.0;
        for a in 0..k {
            for b in 0..k {
                let c = rows
                    .iter()
                    .map(|r| (r[a] - means[a]) * (r[b] - means[b]))
                    .sum::<f64>()
                    / (n - 1.0);
                total += c;
                if a == b {
                    trace += c;
                }
            }
        }
        k as f64 / (k as f64 - 1.0) * (1.0 - trace / total)
    }

    #[test]
    fn identical_columns_give_one() {
        let rows: Vec<Vec<f64>> = [1.0, 3.0, 2.0, 4.0].iter().map(|&v| vec![v; 3]).collect();
        assert!((cronbach_alpha(&rows).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_covariance_gives_zero() {
        let rows = vec![
            vec![1.0, 1.0],
            vec![1.0, -1.0],
            vec![-1.0, 1.0],
            vec![-1.0, -1.0],
        ];
        assert!(cronbach_alpha(&rows).unwrap().abs() < 1e-12);
    }

    #[test]
    fn constant_totals_are_undefined() {
        let rows = vec![vec![2.0, 2.0], vec![2.0, 2.0], vec![2.0, 2.0]];
        assert!(matches!(
            cronbach_alpha(&rows),
            Err(PsychometricsError::UndefinedReliability)
        ));
    }

    #[test]
    fn random_matrix_matches_covariance_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let rows: Vec<Vec<f64>> = (0..5)
                .map(|_| (0..4).map(|_| rng.gen_range(0..5) as f64).collect())
                .collect();
            let Ok(alpha) = cronbach_alpha(&rows) else { continue };
            assert!((alpha - alpha_from_covariance(&rows)).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_tiny_inputs() {
        assert!(cronbach_alpha(&[vec![1.0, 2.0]]).is_err());
        assert!(cronbach_alpha(&[vec![1.0], vec![2.0]]).is_err());
        assert!(cronbach_alpha(&[vec![1.0, f64::NAN], vec![2.0, 1.0]]).is_err());
    }

    proptest! {
        #[test]
        fn alpha_never_exceeds_one(cells in proptest::collection::vec(0u8..5, 12)) {
            let rows: Vec<Vec<f64>> = cells.chunks(3).map(|c| c.iter().map(|&v| v as f64).collect()).collect();
            if let Ok(alpha) = cronbach_alpha(&rows) {
                prop_assert!(alpha <= 1.0 + 1e-12);
            }
        }

        #[test]
        fn shifted_copies_give_one(base in proptest::collection::vec(-10.0f64..10.0, 4), shift in -5.0f64..5.0) {
            prop_assume!(base.iter().any(|v| (v - base[0]).abs() > 1e-3));
            let rows: Vec<Vec<f64>> = base.iter().map(|&v| vec![v, v + shift, v - 2.0 * shift]).collect();
            prop_assert!((cronbach_alpha(&rows).unwrap() - 1.0).abs() < 1e-9);
        }
    }
}
