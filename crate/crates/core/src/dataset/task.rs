use std::fmt;
use std::str::FromStr;

use neurodecode_autodiff::SeededRng;
use serde::{Deserialize, Serialize};

use super::{category_to_label, EpochSet, Split, TrialMeta};
use crate::error::{Error, Result};

/// Which trials enter a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    CrossSubject,
    SingleSubject(u32),
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Task::CrossSubject => write!(f, "cross"),
            Task::SingleSubject(s) => write!(f, "single:{s}"),
        }
    }
}

impl FromStr for Task {
    type Err = String;

    /// `cross` or `single:<subject>`.
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.split_once(':') {
            None if s == "cross" => Ok(Task::CrossSubject),
            Some(("single", id)) => id
                .parse()
                .map(Task::SingleSubject)
                .map_err(|_| format!("invalid subject id {id:?}")),
            _ => Err(format!("expected `cross` or `single:<id>`, got {s:?}")),
        }
    }
}

/// Indices of the trials that belong to `task`: trials whose category maps
/// to a label, restricted to one subject for single-subject tasks.
pub fn task_indices(meta: &[TrialMeta], task: Task) -> Result<Vec<usize>> {
    let keep = |m: &TrialMeta| match task {
        Task::CrossSubject => true,
        Task::SingleSubject(s) => m.subject == s,
    };
    if let Task::SingleSubject(s) = task {
        if !meta.iter().any(|m| m.subject == s) {
            return Err(Error::UnknownSubject(s));
        }
    }
    Ok((0..meta.len())
        .filter(|&i| keep(&meta[i]) && category_to_label(&meta[i].category).is_some())
        .collect())
}

pub fn build_task(set: &EpochSet, task: Task) -> Result<EpochSet> {
    Ok(set.subset(&task_indices(&set.meta, task)?))
}

/// Random trial-level assignment: a seeded Fisher–Yates shuffle of
/// `0..n`, whose first `round(test_frac · n)` entries become test trials.
pub fn split_assignment(n: usize, test_frac: f64, seed: u64) -> Result<Vec<Split>> {
    if !(test_frac > 0.0 && test_frac < 1.0) {
        return Err(Error::InvalidConfig(format!("test fraction {test_frac} outside (0, 1)")));
    }
    let n_test = (test_frac * n as f64).round() as usize;
    if n_test == 0 || n_test == n {
        return Err(Error::SplitTooSmall { n, frac: test_frac });
    }
    let mut order: Vec<usize> = (0..n).collect();
    SeededRng::new(seed).shuffle(&mut order);
    let mut out = vec![Split::Train; n];
    for &i in &order[..n_test] {
        out[i] = Split::Test;
    }
    Ok(out)
}

/// Copy of `set` with split assignments drawn by [`split_assignment`].
pub fn split(set: &EpochSet, test_frac: f64, seed: u64) -> Result<EpochSet> {
    let assign = split_assignment(set.len(), test_frac, seed)?;
    let mut out = set.clone();
    for (m, s) in out.meta.iter_mut().zip(assign) {
        m.split = s;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_task() {
        assert_eq!("cross".parse::<Task>(), Ok(Task::CrossSubject));
        assert_eq!("single:12".parse::<Task>(), Ok(Task::SingleSubject(12)));
        assert!("single:x".parse::<Task>().is_err());
        assert!("both".parse::<Task>().is_err());
        assert_eq!(Task::SingleSubject(3).to_string(), "single:3");
    }

    #[test]
    fn ten_trials_two_test() {
        let a = split_assignment(10, 0.2, 5).unwrap();
        assert_eq!(a.iter().filter(|&&s| s == Split::Test).count(), 2);
        assert_eq!(a, split_assignment(10, 0.2, 5).unwrap());
    }

    #[test]
    fn too_small_to_split() {
        assert!(matches!(split_assignment(2, 0.2, 0), Err(Error::SplitTooSmall { .. })));
        assert!(split_assignment(10, 1.0, 0).is_err());
    }
}
