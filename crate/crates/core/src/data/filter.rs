//! Minimum-count filtering of users and items.

use std::collections::HashMap;

use super::InteractionLog;
use crate::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FilterSummary {
    pub removed_users: usize,
    pub removed_items: usize,
    pub removed_interactions: usize,
    pub rounds: usize,
}

/// Repeatedly drops users and items below the thresholds until every
/// remaining one meets them. Ids are re-densified afterwards.
pub fn filter(log: &InteractionLog, min_user: usize, min_item: usize) -> Result<(InteractionLog, FilterSummary)> {
    let mut keep = vec![true; log.len()];
    let mut summary = FilterSummary::default();
    loop {
        let mut users: HashMap<u32, usize> = HashMap::new();
        let mut items: HashMap<u32, usize> = HashMap::new();
        for (r, _) in log.interactions.iter().zip(&keep).filter(|(_, k)| **k) {
            *users.entry(r.user.0).or_default() += 1;
            *items.entry(r.item.0).or_default() += 1;
        }
        let mut changed = false;
        for (r, k) in log.interactions.iter().zip(keep.iter_mut()) {
            if *k && (users[&r.user.0] < min_user || items[&r.item.0] < min_item) {
                *k = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        summary.rounds += 1;
    }
    let records: Vec<_> = log
        .raw_records()
        .into_iter()
        .zip(&keep)
        .filter(|(_, k)| **k)
        .map(|(r, _)| r)
        .collect();
    if records.is_empty() {
        return Err(Error::EmptyDataset("filtering removed every interaction".into()));
    }
    let mut out = InteractionLog::from_raw(&records, log.source.clone());
    // Keep the original file positions for tie-breaking.
    let orders = log.interactions.iter().zip(&keep).filter(|(_, k)| **k).map(|(r, _)| r.order);
    for (r, order) in out.interactions.iter_mut().zip(orders) {
        r.order = order;
    }
    summary.removed_users = log.id_map.n_users() - out.id_map.n_users();
    summary.removed_items = log.id_map.n_items() - out.id_map.n_items();
    summary.removed_interactions = log.len() - out.len();
    Ok((out, summary))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log(records: &[(&str, &str)]) -> InteractionLog {
        let raw: Vec<_> = records
            .iter()
            .enumerate()
            .map(|(t, (u, i))| (u.to_string(), i.to_string(), t as i64))
            .collect();
        InteractionLog::from_raw(&raw, "test")
    }

    #[test]
    fn zero_thresholds_are_identity() {
        let l = log(&[("a", "x"), ("b", "y")]);
        let (out, summary) = filter(&l, 0, 0).unwrap();
        assert_eq!(out, l);
        assert_eq!(summary, FilterSummary::default());
    }

    #[test]
    fn short_users_are_removed() {
        let mut records = vec![("a", "x"); 3];
        records.extend(vec![("b", "x"); 20]);
        let (out, summary) = filter(&log(&records), 20, 0).unwrap();
        assert_eq!(out.id_map.n_users(), 1);
        assert_eq!(summary.removed_users, 1);
        assert_eq!(summary.removed_interactions, 3);
    }

    #[test]
    fn removals_cascade_to_a_fixed_point() {
        // Thresholds 2/2. User c has one interaction and goes in round one;
        // that leaves item z with one interaction, which then goes and
        // takes user b below two.
        let records = [
            ("a", "x"),
            ("a", "y"),
            ("b", "y"),
            ("b", "z"),
            ("c", "z"),
            ("d", "x"),
            ("d", "y"),
        ];
        let (out, summary) = filter(&log(&records), 2, 2).unwrap();
        let mut users: Vec<_> = out.raw_records().into_iter().map(|r| r.0).collect();
        users.dedup();
        assert_eq!(users, ["a", "d"]);
        assert_eq!(out.len(), 4);
        assert_eq!(summary.removed_users, 2);
        assert_eq!(summary.removed_items, 1);
        assert_eq!(summary.rounds, 3);
        let (again, s2) = filter(&out, 2, 2).unwrap();
        assert_eq!(again.raw_records(), out.raw_records());
        assert_eq!(s2.removed_interactions, 0);
    }

    #[test]
    fn emptying_the_log_is_an_error() {
        assert!(matches!(filter(&log(&[("a", "x")]), 5, 0), Err(Error::EmptyDataset(_))));
    }
}
