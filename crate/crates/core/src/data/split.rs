//! Chronological per-user split:
//! `[train …][validation][simulation × M][test]`.

use std::fmt::Write as _;

use super::{IdMap, InteractionLog};
use crate::model::{ItemId, TrainingSequence, UserId};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UserSplit {
    pub user: UserId,
    pub train: Vec<ItemId>,
    pub validation: ItemId,
    pub simulation: Vec<ItemId>,
    pub test: ItemId,
}

impl UserSplit {
    /// Train and validation spans: what the model saw before simulation.
    pub fn base(&self) -> Vec<ItemId> {
        let mut v = self.train.clone();
        v.push(self.validation);
        v
    }

    /// Everything before the test item.
    pub fn before_test(&self) -> Vec<ItemId> {
        let mut v = self.base();
        v.extend(&self.simulation);
        v
    }

    /// The full chronological sequence.
    pub fn sequence(&self) -> Vec<ItemId> {
        let mut v = self.before_test();
        v.push(self.test);
        v
    }

    pub fn len(&self) -> usize {
        self.train.len() + self.simulation.len() + 2
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SplitDataset {
    pub simulation_size: usize,
    pub n_items: usize,
    pub users: Vec<UserSplit>,
    /// Users too short for the split.
    pub excluded_users: Vec<UserId>,
    pub id_map: IdMap,
}

/// Splits every user with at least `m + 3` interactions. Interactions are
/// ordered by timestamp, ties by file position.
pub fn split(log: &InteractionLog, m: usize) -> Result<SplitDataset> {
    let n_users = log.id_map.n_users();
    let mut per_user: Vec<Vec<(i64, usize, ItemId)>> = vec![Vec::new(); n_users];
    for r in &log.interactions {
        per_user[r.user.idx()].push((r.timestamp, r.order, r.item));
    }
    let mut users = Vec::new();
    let mut excluded_users = Vec::new();
    for (u, mut seq) in per_user.into_iter().enumerate() {
        let user = UserId(u as u32);
        if seq.len() < m + 3 {
            excluded_users.push(user);
            continue;
        }
        seq.sort_unstable_by_key(|&(ts, order, _)| (ts, order));
        let items: Vec<ItemId> = seq.into_iter().map(|(_, _, i)| i).collect();
        let n = items.len();
        users.push(UserSplit {
            user,
            train: items[..n - m - 2].to_vec(),
            validation: items[n - m - 2],
            simulation: items[n - m - 1..n - 1].to_vec(),
            test: items[n - 1],
        });
    }
    if !excluded_users.is_empty() {
        log::warn!("{} users have fewer than {} interactions and were excluded", excluded_users.len(), m + 3);
    }
    if users.is_empty() {
        return Err(Error::EmptyDataset("no user is long enough to split".into()));
    }
    Ok(SplitDataset {
        simulation_size: m,
        n_items: log.id_map.n_items(),
        users,
        excluded_users,
        id_map: log.id_map.clone(),
    })
}

impl SplitDataset {
    pub fn n_users(&self) -> usize {
        self.id_map.n_users()
    }

    pub fn user(&self, user: UserId) -> Option<&UserSplit> {
        self.users
            .binary_search_by_key(&user, |u| u.user)
            .ok()
            .map(|i| &self.users[i])
    }

    /// Training spans with their validation items.
    pub fn training_sequences(&self) -> Vec<TrainingSequence> {
        self.users
            .iter()
            .map(|u| TrainingSequence {
                user: u.user,
                train: u.train.clone(),
                validation: Some(u.validation),
                total_interactions: u.len(),
            })
            .collect()
    }

    /// Per-user span boundaries: `user train_end validation_index
    /// simulation_end test_index`, all 0-based into the sequence.
    pub fn manifest(&self) -> String {
        let mut s = format!("UCRSPLIT 1\nsimulation_size {}\n", self.simulation_size);
        for u in &self.users {
            let t = u.train.len();
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{}\t{}",
                self.id_map.user_raw(u.user),
                t,
                t,
                t + 1 + u.simulation.len(),
                t + 1 + u.simulation.len()
            );
        }
        s
    }

    /// Checks that this split reproduces a previously written manifest.
    pub fn verify_manifest(&self, text: &str) -> Result<()> {
        if self.manifest() != text {
            return Err(Error::Precondition(
                "the data no longer reproduces the saved split; re-run training".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log_of(len: usize) -> InteractionLog {
        let raw: Vec<_> = (0..len).map(|i| ("u".to_string(), format!("{i}"), i as i64)).collect();
        InteractionLog::from_raw(&raw, "t")
    }

    #[test]
    fn spans_reconstruct_the_sequence() {
        let data = split(&log_of(15), 10).unwrap();
        let u = &data.users[0];
        assert_eq!(u.train.len(), 3);
        assert_eq!(u.simulation.len(), 10);
        let expected: Vec<ItemId> = (0..15).map(ItemId).collect();
        assert_eq!(u.sequence(), expected);
    }

    #[test]
    fn minimal_length_has_one_training_item() {
        let data = split(&log_of(13), 10).unwrap();
        assert_eq!(data.users[0].train.len(), 1);
        assert!(split(&log_of(12), 10).is_err());
    }

    #[test]
    fn zero_simulation_is_leave_one_out() {
        let data = split(&log_of(5), 0).unwrap();
        let u = &data.users[0];
        assert_eq!((u.train.len(), u.validation, u.test), (3, ItemId(3), ItemId(4)));
        assert!(u.simulation.is_empty());
    }

    #[test]
    fn ties_follow_file_order() {
        let raw = vec![
            ("u".to_string(), "b".to_string(), 5),
            ("u".to_string(), "a".to_string(), 5),
            ("u".to_string(), "c".to_string(), 1),
            ("u".to_string(), "d".to_string(), 9),
        ];
        let log = InteractionLog::from_raw(&raw, "t");
        let data = split(&log, 0).unwrap();
        let names: Vec<&str> = data.users[0].sequence().iter().map(|&i| data.id_map.item_raw(i)).collect();
        assert_eq!(names, ["c", "b", "a", "d"]);
    }

    #[test]
    fn short_users_are_excluded_and_manifest_verifies() {
        let mut raw: Vec<_> = (0..6).map(|i| ("long".to_string(), format!("{i}"), i as i64)).collect();
        raw.push(("short".to_string(), "0".to_string(), 0));
        let data = split(&InteractionLog::from_raw(&raw, "t"), 2).unwrap();
        assert_eq!(data.users.len(), 1);
        assert_eq!(data.excluded_users.len(), 1);
        assert!(data.verify_manifest(&data.manifest()).is_ok());
        assert!(data.verify_manifest("UCRSPLIT 1\n").is_err());
    }
}
