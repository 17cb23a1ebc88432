use std::collections::HashMap;

/// Precision, recall and F1, each in `[0, 1]`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub fn from_parts(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        Self { precision, recall, f1 }
    }
}

fn bigrams<T: AsRef<str>>(tokens: &[T]) -> HashMap<(&str, &str), usize> {
    let mut counts = HashMap::new();
    for w in tokens.windows(2) {
        *counts.entry((w[0].as_ref(), w[1].as_ref())).or_insert(0) += 1;
    }
    counts
}

/// ROUGE-2 with clipped (multiset) bigram overlap.
pub fn rouge2<T: AsRef<str>>(candidate: &[T], reference: &[T]) -> Prf {
    let cand = bigrams(candidate);
    let refs = bigrams(reference);
    let overlap: usize = cand
        .iter()
        .map(|(bg, &c)| c.min(refs.get(bg).copied().unwrap_or(0)))
        .sum();
    let ratio = |total: usize| if total == 0 { 0.0 } else { overlap as f64 / total as f64 };
    Prf::from_parts(
        ratio(candidate.len().saturating_sub(1)),
        ratio(reference.len().saturating_sub(1)),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_counted_cases() {
        let r = rouge2(&["the", "cat", "sat"], &["the", "cat", "ran"]);
        assert_eq!((r.precision, r.recall, r.f1), (0.5, 0.5, 0.5));
        let same = ["a", "b", "c"];
        assert_eq!(rouge2(&same, &same), Prf::from_parts(1.0, 1.0));
        assert_eq!(rouge2(&["a"], &["a", "b"]), Prf::default());
        assert_eq!(rouge2::<&str>(&[], &[]), Prf::default());
    }

    #[test]
    fn repeated_bigrams_are_clipped() {
        let r = rouge2(&["a", "b", "a", "b"], &["a", "b", "c"]);
        assert!((r.precision - 1.0 / 3.0).abs() < 1e-12);
        assert!((r.recall - 0.5).abs() < 1e-12);
    }
}
