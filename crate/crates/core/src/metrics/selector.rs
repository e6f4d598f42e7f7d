use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::MetricError;

/// Which logged epochs a metric reduces over.
///
/// Epochs are 1-indexed. `EveryK(k)` picks `{k, 2k, …, ⌊T/k⌋·k}`, so with
/// `T = 12` and `k = 6` the logits of epochs 6 and 12 are used.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpochSelector {
    EveryK(usize),
    Single(usize),
    UpTo(usize),
    Explicit(Vec<usize>),
}

impl EpochSelector {
    /// Selected epochs in ascending order, checked against a log of
    /// `n_epochs` epochs.
    pub fn resolve(&self, n_epochs: usize) -> Result<Vec<usize>, MetricError> {
        let out_of_range = || MetricError::SelectorOutOfRange {
            selector: self.clone(),
            n_epochs,
        };
        let epochs: Vec<usize> = match self {
            EpochSelector::EveryK(0) => return Err(out_of_range()),
            EpochSelector::EveryK(k) => (1..=n_epochs / k).map(|j| j * k).collect(),
            EpochSelector::Single(t) => vec![*t],
            EpochSelector::UpTo(t) => {
                if *t > n_epochs {
                    return Err(out_of_range());
                }
                (1..=*t).collect()
            }
            EpochSelector::Explicit(list) => {
                let mut list = list.clone();
                list.sort_unstable();
                list.dedup();
                list
            }
        };
        if epochs.is_empty() || epochs.iter().any(|&t| t == 0 || t > n_epochs) {
            return Err(out_of_range());
        }
        Ok(epochs)
    }

    pub fn is_single(&self) -> bool {
        matches!(self, EpochSelector::Single(_))
    }
}

impl fmt::Display for EpochSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EpochSelector::EveryK(k) => write!(f, "every_k({k})"),
            EpochSelector::Single(t) => write!(f, "single({t})"),
            EpochSelector::UpTo(t) => write!(f, "upto({t})"),
            EpochSelector::Explicit(list) => {
                let items: Vec<String> = list.iter().map(|t| t.to_string()).collect();
                write!(f, "explicit({})", items.join(","))
            }
        }
    }
}

impl FromStr for EpochSelector {
    type Err = String;

    /// Parses the `Display` form, e.g. `every_k(6)` or `explicit(1,4,12)`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (name, rest) = s
            .split_once('(')
            .ok_or_else(|| format!("malformed epoch selector {s:?}"))?;
        let args = rest
            .strip_suffix(')')
            .ok_or_else(|| format!("malformed epoch selector {s:?}"))?;
        let nums: Result<Vec<usize>, _> = args
            .split(',')
            .filter(|a| !a.trim().is_empty())
            .map(|a| a.trim().parse::<usize>())
            .collect();
        let nums = nums.map_err(|e| format!("epoch selector {s:?}: {e}"))?;
        let one = |v: Vec<usize>| -> Result<usize, String> {
            match v.as_slice() {
                [x] => Ok(*x),
                _ => Err(format!("epoch selector {s:?} takes exactly one argument")),
            }
        };
        match name.trim() {
            "every_k" => Ok(EpochSelector::EveryK(one(nums)?)),
            "single" => Ok(EpochSelector::Single(one(nums)?)),
            "upto" => Ok(EpochSelector::UpTo(one(nums)?)),
            "explicit" => Ok(EpochSelector::Explicit(nums)),
            other => Err(format!("unknown epoch selector {other:?}")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_k_picks_multiples() {
        assert_eq!(EpochSelector::EveryK(6).resolve(12).unwrap(), vec![6, 12]);
        assert_eq!(EpochSelector::EveryK(4).resolve(12).unwrap(), vec![4, 8, 12]);
        assert_eq!(EpochSelector::EveryK(5).resolve(12).unwrap(), vec![5, 10]);
        assert_eq!(EpochSelector::EveryK(1).resolve(3).unwrap(), vec![1, 2, 3]);
    }

    #[test]
    fn out_of_range_selectors() {
        for sel in [
            EpochSelector::EveryK(0),
            EpochSelector::EveryK(13),
            EpochSelector::Single(0),
            EpochSelector::Single(13),
            EpochSelector::UpTo(13),
            EpochSelector::UpTo(0),
            EpochSelector::Explicit(vec![]),
            EpochSelector::Explicit(vec![1, 14]),
        ] {
            assert!(
                matches!(sel.resolve(12), Err(MetricError::SelectorOutOfRange { .. })),
                "{sel}"
            );
        }
    }

    #[test]
    fn explicit_is_sorted_and_deduplicated() {
        assert_eq!(
            EpochSelector::Explicit(vec![3, 1, 3]).resolve(3).unwrap(),
            vec![1, 3]
        );
    }

    #[test]
    fn display_parse_round_trip() {
        for sel in [
            EpochSelector::EveryK(6),
            EpochSelector::Single(12),
            EpochSelector::UpTo(5),
            EpochSelector::Explicit(vec![1, 4, 12]),
        ] {
            assert_eq!(sel.to_string().parse::<EpochSelector>().unwrap(), sel);
        }
        assert!("every_k(1,2)".parse::<EpochSelector>().is_err());
        assert!("bogus(1)".parse::<EpochSelector>().is_err());
    }
}
