use crate::error::{IrnError, Result};

/// Guard added inside `ln` so that a zero probability yields a large but
/// finite loss.
pub const LOG_EPS: f64 = 1e-12;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Max-shifted softmax. Rejects empty or non-finite input.
pub fn softmax(logits: &[f64]) -> Result<Vec<f64>> {
    if logits.is_empty() {
        return Err(IrnError::Invalid("softmax of empty vector".into()));
    }
    if logits.iter().any(|x| !x.is_finite()) {
        return Err(IrnError::NonFinite("softmax input"));
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = logits.iter().map(|&x| (x - max).exp()).collect();
    let z: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= z);
    Ok(out)
}

/// Index of the largest entry; the first one wins on ties.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// `−ln(pred[gold] + ε)` for a one-hot `gold`.
pub fn cross_entropy(gold: &[f64], pred: &[f64]) -> Result<f64> {
    if gold.len() != pred.len() {
        return Err(IrnError::Shape(format!(
            "gold has {} entries, prediction {}",
            gold.len(),
            pred.len()
        )));
    }
    let mut hot = None;
    for (i, &g) in gold.iter().enumerate() {
        if g == 1.0 && hot.is_none() {
            hot = Some(i);
        } else if g != 0.0 {
            return Err(IrnError::Invalid("gold distribution is not one-hot".into()));
        }
    }
    let j = hot.ok_or_else(|| IrnError::Invalid("gold distribution is not one-hot".into()))?;
    if pred.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(IrnError::Invalid("prediction outside [0,1]".into()));
    }
    Ok(cross_entropy_at(j, pred))
}

/// Cross-entropy against the one-hot vector at `gold`.
#[inline]
pub fn cross_entropy_at(gold: usize, pred: &[f64]) -> f64 {
    // p + ε can exceed 1 by at most ε; clamp so the loss stays non-negative.
    (-(pred[gold] + LOG_EPS).ln()).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uniform_on_equal_logits() {
        let p = softmax(&[0.0, 0.0, 0.0]).unwrap();
        for x in p {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn large_logits_do_not_overflow() {
        let p = softmax(&[1000.0, 0.0]).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-12);
        assert!(p[1] < 1e-300 || p[1] == 0.0);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(softmax(&[f64::NAN, 0.0]).is_err());
        assert!(softmax(&[f64::INFINITY]).is_err());
        assert!(softmax(&[]).is_err());
    }

    #[test]
    fn cross_entropy_definition() {
        let ce = cross_entropy(&[0.0, 1.0, 0.0], &[0.1, 0.7, 0.2]).unwrap();
        assert!((ce - 0.356_674_943_938_732_4).abs() < 1e-10);
        let perfect = cross_entropy(&[1.0, 0.0], &[1.0, 0.0]).unwrap();
        assert!(perfect.abs() < 1e-11);
    }

    #[test]
    fn cross_entropy_five_dim_hand_value() {
        // pred normalised from [3, 1, 4, 1, 5] / 14; gold index 2.
        // −ln(4/14) = ln(3.5) = 1.252762968495368
        let pred: Vec<f64> = [3.0, 1.0, 4.0, 1.0, 5.0].iter().map(|x| x / 14.0).collect();
        let ce = cross_entropy(&[0.0, 0.0, 1.0, 0.0, 0.0], &pred).unwrap();
        assert!((ce - 1.252_762_968_495_368).abs() < 1e-10);
    }

    #[test]
    fn cross_entropy_rejects_non_one_hot() {
        assert!(cross_entropy(&[0.5, 0.5], &[0.5, 0.5]).is_err());
        assert!(cross_entropy(&[0.0, 0.0], &[0.5, 0.5]).is_err());
        assert!(cross_entropy(&[1.0, 1.0], &[0.5, 0.5]).is_err());
        assert!(cross_entropy(&[1.0], &[0.5, 0.5]).is_err());
    }

    proptest! {
        #[test]
        fn softmax_is_distribution(xs in prop::collection::vec(-500.0f64..500.0, 1..40)) {
            let p = softmax(&xs).unwrap();
            prop_assert!(p.iter().all(|&x| x >= 0.0));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }

        #[test]
        fn softmax_shift_invariant(xs in prop::collection::vec(-50.0f64..50.0, 1..20), c in -100.0f64..100.0) {
            let a = softmax(&xs).unwrap();
            let shifted: Vec<f64> = xs.iter().map(|x| x + c).collect();
            let b = softmax(&shifted).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn softmax_preserves_order(xs in prop::collection::vec(-50.0f64..50.0, 2..20)) {
            let p = softmax(&xs).unwrap();
            for i in 0..xs.len() {
                for j in 0..xs.len() {
                    if xs[i] < xs[j] {
                        prop_assert!(p[i] <= p[j]);
                    }
                }
            }
        }

        #[test]
        fn cross_entropy_non_negative(xs in prop::collection::vec(-20.0f64..20.0, 1..20), k in 0usize..20) {
            let p = softmax(&xs).unwrap();
            let j = k % p.len();
            prop_assert!(cross_entropy_at(j, &p) >= 0.0);
        }
    }
}
