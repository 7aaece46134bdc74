use crate::{Error, Result};

fn check_joint(joint: &[Vec<f64>]) -> Result<()> {
    if joint.is_empty() || joint[0].is_empty() {
        return Err(Error::InvalidDistribution("empty joint distribution".into()));
    }
    let cols = joint[0].len();
    let mut total = 0.0;
    for row in joint {
        if row.len() != cols {
            return Err(Error::LengthMismatch { expected: cols, actual: row.len() });
        }
        for &v in row {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidDistribution(format!("entry {v}")));
            }
            total += v;
        }
    }
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidDistribution(format!("total mass {total}")));
    }
    Ok(())
}

fn marginals(joint: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let rows: Vec<f64> = joint.iter().map(|r| r.iter().sum()).collect();
    let mut cols = vec![0.0; joint[0].len()];
    for row in joint {
        for (c, v) in cols.iter_mut().zip(row) {
            *c += v;
        }
    }
    (rows, cols)
}

/// H_min(X|E) in bits for a classical joint `joint[x][e]`: −log₂ Σ_e max_x p(x,e).
pub fn min_entropy_classical(joint: &[Vec<f64>]) -> Result<f64> {
    check_joint(joint)?;
    let cols = joint[0].len();
    let guess: f64 = (0..cols).map(|e| joint.iter().map(|r| r[e]).fold(0.0, f64::max)).sum();
    Ok(-guess.log2())
}

/// I(X;E) in bits for a classical joint `joint[x][e]`.
pub fn mutual_information_classical(joint: &[Vec<f64>]) -> Result<f64> {
    check_joint(joint)?;
    let (px, pe) = marginals(joint);
    let mut info = 0.0;
    for (x, row) in joint.iter().enumerate() {
        for (e, &p) in row.iter().enumerate() {
            if p > 0.0 {
                info += p * (p / (px[x] * pe[e])).log2();
            }
        }
    }
    Ok(info.max(0.0))
}

/// ‖p_XE − p_X ⊗ p_E‖₁.
pub fn l1_distance_from_product(joint: &[Vec<f64>]) -> Result<f64> {
    check_joint(joint)?;
    let (px, pe) = marginals(joint);
    let mut d = 0.0;
    for (x, row) in joint.iter().enumerate() {
        for (e, &p) in row.iter().enumerate() {
            d += (p - px[x] * pe[e]).abs();
        }
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        let independent = vec![vec![0.25, 0.25], vec![0.25, 0.25]];
        assert!((min_entropy_classical(&independent).unwrap() - 1.0).abs() < 1e-12);
        assert!(mutual_information_classical(&independent).unwrap().abs() < 1e-12);
        let copy = vec![vec![0.5, 0.0], vec![0.0, 0.5]];
        assert!(min_entropy_classical(&copy).unwrap().abs() < 1e-12);
        assert!((mutual_information_classical(&copy).unwrap() - 1.0).abs() < 1e-12);
        assert!((l1_distance_from_product(&copy).unwrap() - 1.0).abs() < 1e-12);
        // Uniform over 4 keys, no side information.
        let four = vec![vec![0.25]; 4];
        assert!((min_entropy_classical(&four).unwrap() - 2.0).abs() < 1e-12);
        let skewed = vec![vec![0.4, 0.1], vec![0.2, 0.3]];
        assert!((min_entropy_classical(&skewed).unwrap() - 0.514_573).abs() < 1e-5);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(min_entropy_classical(&[]).is_err());
        assert!(min_entropy_classical(&[vec![0.5, 0.6]]).is_err());
        assert!(mutual_information_classical(&[vec![0.5], vec![0.25, 0.25]]).is_err());
        assert!(l1_distance_from_product(&[vec![1.5, -0.5]]).is_err());
    }

    fn joint_strategy() -> impl Strategy<Value = Vec<Vec<f64>>> {
        (1usize..5, 1usize..5).prop_flat_map(|(r, c)| {
            prop::collection::vec(0.0f64..1.0, r * c).prop_filter_map("non-zero mass", move |w| {
                let total: f64 = w.iter().sum();
                (total > 1e-6).then(|| w.chunks(c).map(|row| row.iter().map(|v| v / total).collect()).collect())
            })
        })
    }

    proptest! {
        #[test]
        fn pinsker(joint in joint_strategy()) {
            let i = mutual_information_classical(&joint).unwrap();
            let d = l1_distance_from_product(&joint).unwrap();
            prop_assert!(i >= d * d / (2.0 * std::f64::consts::LN_2) - 1e-9);
        }

        #[test]
        fn min_entropy_bounded_by_log_support(joint in joint_strategy()) {
            let h = min_entropy_classical(&joint).unwrap();
            prop_assert!(h >= -1e-12);
            prop_assert!(h <= (joint.len() as f64).log2() + 1e-9);
        }
    }
}
