//! NASA-TLX workload scoring with pairwise-comparison weights.

use serde::{Deserialize, Serialize};

use super::MetricsError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Factor {
    /// Mental demand.
    MD,
    /// Physical demand.
    PD,
    /// Temporal demand.
    TD,
    /// Performance.
    PE,
    /// Effort.
    EF,
    /// Frustration.
    FR,
}

impl Factor {
    pub const ALL: [Factor; 6] = [Factor::MD, Factor::PD, Factor::TD, Factor::PE, Factor::EF, Factor::FR];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// The fifteen unordered factor pairs of the weighting step.
pub fn tlx_pairs() -> Vec<(Factor, Factor)> {
    let mut pairs = Vec::with_capacity(15);
    for (i, a) in Factor::ALL.iter().enumerate() {
        for b in &Factor::ALL[i + 1..] {
            pairs.push((*a, *b));
        }
    }
    pairs
}

/// Ratings on the 0-100 scale (steps of 5) and weights summing to 15, both
/// in [`Factor::ALL`] order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TlxResponse {
    pub ratings: [f64; 6],
    pub weights: [u32; 6],
}

impl TlxResponse {
    pub fn validate(&self) -> Result<(), MetricsError> {
        let total: u32 = self.weights.iter().sum();
        if total != 15 {
            return Err(MetricsError::BadWeights(total));
        }
        for r in self.ratings {
            if !(0.0..=100.0).contains(&r) || r % 5.0 != 0.0 {
                return Err(MetricsError::BadRating(r));
            }
        }
        Ok(())
    }
}

/// Weights from the winner of each pair in [`tlx_pairs`] order: each
/// factor's weight is the number of pairs it won.
pub fn weights_from_choices(winners: &[Factor]) -> Result<[u32; 6], MetricsError> {
    let pairs = tlx_pairs();
    if winners.len() != pairs.len() {
        return Err(MetricsError::BadWeights(winners.len() as u32));
    }
    let mut weights = [0u32; 6];
    for ((a, b), w) in pairs.into_iter().zip(winners) {
        if *w != a && *w != b {
            return Err(MetricsError::ChoiceOutsidePair);
        }
        weights[w.index()] += 1;
    }
    Ok(weights)
}

/// `sum(rating_i weight_i) / 15`.
pub fn tlx_total(resp: &TlxResponse) -> Result<f64, MetricsError> {
    resp.validate()?;
    let sum: f64 = resp.ratings.iter().zip(resp.weights).map(|(r, w)| r * f64::from(w)).sum();
    Ok(sum / 15.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn worked_examples() {
        let all_50 = TlxResponse {
            ratings: [50.0; 6],
            weights: [5, 4, 3, 2, 1, 0],
        };
        assert_eq!(tlx_total(&all_50).unwrap(), 50.0);
        let single = TlxResponse {
            ratings: [0.0, 0.0, 80.0, 0.0, 0.0, 0.0],
            weights: [0, 0, 15, 0, 0, 0],
        };
        assert_eq!(tlx_total(&single).unwrap(), 80.0);
        let mixed = TlxResponse {
            ratings: [60.0, 30.0, 10.0, 20.0, 40.0, 50.0],
            weights: [10, 5, 0, 0, 0, 0],
        };
        assert_eq!(tlx_total(&mixed).unwrap(), 50.0);
    }

    #[test]
    fn rejects_bad_weights_and_ratings() {
        let r = TlxResponse {
            ratings: [50.0; 6],
            weights: [5, 5, 5, 1, 0, 0],
        };
        assert_eq!(tlx_total(&r), Err(MetricsError::BadWeights(16)));
        let r = TlxResponse {
            ratings: [50.0, 50.0, 50.0, 50.0, 50.0, 101.0],
            weights: [5, 5, 5, 0, 0, 0],
        };
        assert!(matches!(tlx_total(&r), Err(MetricsError::BadRating(_))));
    }

    #[test]
    fn choices_outside_their_pair_rejected() {
        let mut winners: Vec<Factor> = tlx_pairs().iter().map(|p| p.0).collect();
        winners[0] = Factor::FR;
        assert_eq!(weights_from_choices(&winners), Err(MetricsError::ChoiceOutsidePair));
    }

    fn response() -> impl Strategy<Value = (TlxResponse, Vec<bool>)> {
        (
            prop::array::uniform6(0u32..=20),
            prop::collection::vec(any::<bool>(), 15),
        )
            .prop_map(|(steps, picks)| {
                let winners: Vec<Factor> = tlx_pairs()
                    .into_iter()
                    .zip(&picks)
                    .map(|((a, b), first)| if *first { a } else { b })
                    .collect();
                let resp = TlxResponse {
                    ratings: steps.map(|s| f64::from(s) * 5.0),
                    weights: weights_from_choices(&winners).unwrap(),
                };
                (resp, picks)
            })
    }

    proptest! {
        #[test]
        fn choice_weights_sum_to_15((resp, _) in response()) {
            prop_assert_eq!(resp.weights.iter().sum::<u32>(), 15);
        }

        #[test]
        fn total_within_rating_range((resp, _) in response()) {
            let t = tlx_total(&resp).unwrap();
            let lo = resp.ratings.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = resp.ratings.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(t >= lo - 1e-9 && t <= hi + 1e-9);
        }

        #[test]
        fn order_invariant((resp, _) in response(), rot in 0usize..6) {
            let mut r = resp;
            r.ratings.rotate_left(rot);
            r.weights.rotate_left(rot);
            prop_assert!((tlx_total(&r).unwrap() - tlx_total(&resp).unwrap()).abs() < 1e-9);
        }
    }
}
