use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// One leave-one-subject-out fold, as indices into the input list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LosoSplit {
    pub subject: String,
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// One split per subject, in sorted subject order.
pub fn loso_splits<T>(items: &[T], subject_of: impl Fn(&T) -> String) -> Result<Vec<LosoSplit>> {
    let mut by_subject: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, item) in items.iter().enumerate() {
        by_subject.entry(subject_of(item)).or_default().push(i);
    }
    if by_subject.len() < 2 {
        return Err(Error::InsufficientSubjects(by_subject.len()));
    }
    Ok(by_subject
        .iter()
        .map(|(subject, test)| LosoSplit {
            subject: subject.clone(),
            train: (0..items.len()).filter(|i| !test.contains(i)).collect(),
            test: test.clone(),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ten_subjects_ten_splits() {
        let takes: Vec<(String, u32)> = (0..10).flat_map(|s| (0..4).map(move |t| (format!("S{s}"), t))).collect();
        let splits = loso_splits(&takes, |t| t.0.clone()).unwrap();
        assert_eq!(splits.len(), 10);
    }

    #[test]
    fn two_subjects_three_takes() {
        let takes = ["a", "a", "a", "b", "b", "b"];
        let splits = loso_splits(&takes, |t| t.to_string()).unwrap();
        assert_eq!(splits.len(), 2);
        assert!(splits.iter().all(|s| s.test.len() == 3 && s.train.len() == 3));
    }

    #[test]
    fn single_subject_rejected() {
        assert!(matches!(
            loso_splits(&["a", "a"], |t| t.to_string()),
            Err(Error::InsufficientSubjects(1))
        ));
        assert!(matches!(loso_splits::<&str>(&[], |t| t.to_string()), Err(Error::InsufficientSubjects(0))));
    }

    proptest! {
        #[test]
        fn partition_property(subjects in prop::collection::vec(0u8..6, 2..40)) {
            prop_assume!(subjects.iter().collect::<std::collections::BTreeSet<_>>().len() >= 2);
            let splits = loso_splits(&subjects, |s| s.to_string()).unwrap();
            let mut seen = vec![0; subjects.len()];
            for split in &splits {
                for &i in &split.test {
                    seen[i] += 1;
                    prop_assert_eq!(subjects[i].to_string(), split.subject.clone());
                }
                for &i in &split.train {
                    prop_assert!(!split.test.contains(&i));
                    prop_assert_ne!(subjects[i].to_string(), split.subject.clone());
                }
                prop_assert_eq!(split.train.len() + split.test.len(), subjects.len());
            }
            prop_assert!(seen.iter().all(|&c| c == 1));
        }
    }
}
