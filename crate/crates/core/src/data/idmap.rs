//! Original id ↔ dense index mapping.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::model::{ItemId, UserId};
use crate::{Error, Result};

const HEADER: &str = "UCRIDMAP 1";

/// Dense indices are assigned in ascending order of the original ids,
/// numerically when every id is an integer.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct IdMap {
    users: Vec<String>,
    items: Vec<String>,
    user_index: HashMap<String, u32>,
    item_index: HashMap<String, u32>,
}

fn sorted_unique(ids: impl IntoIterator<Item = String>) -> Vec<String> {
    let mut v: Vec<String> = ids.into_iter().collect();
    v.sort_unstable();
    v.dedup();
    if v.iter().all(|s| s.parse::<u64>().is_ok()) {
        v.sort_by_key(|s| s.parse::<u64>().unwrap_or(0));
    }
    v
}

fn index(names: &[String]) -> HashMap<String, u32> {
    names.iter().enumerate().map(|(i, s)| (s.clone(), i as u32)).collect()
}

impl IdMap {
    pub fn from_raw(users: impl IntoIterator<Item = String>, items: impl IntoIterator<Item = String>) -> Self {
        Self::from_parts(sorted_unique(users), sorted_unique(items))
    }

    fn from_parts(users: Vec<String>, items: Vec<String>) -> Self {
        IdMap {
            user_index: index(&users),
            item_index: index(&items),
            users,
            items,
        }
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn user(&self, raw: &str) -> Option<UserId> {
        self.user_index.get(raw).map(|&i| UserId(i))
    }

    pub fn item(&self, raw: &str) -> Option<ItemId> {
        self.item_index.get(raw).map(|&i| ItemId(i))
    }

    pub fn user_raw(&self, user: UserId) -> &str {
        &self.users[user.idx()]
    }

    pub fn item_raw(&self, item: ItemId) -> &str {
        &self.items[item.idx()]
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{HEADER}\n");
        for (i, u) in self.users.iter().enumerate() {
            let _ = writeln!(s, "user\t{i}\t{u}");
        }
        for (i, it) in self.items.iter().enumerate() {
            let _ = writeln!(s, "item\t{i}\t{it}");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some(HEADER) {
            return Err(Error::Format("not an id map".into()));
        }
        let (mut users, mut items) = (Vec::new(), Vec::new());
        for (n, line) in lines.enumerate() {
            let bad = || Error::Format(format!("id map line {}: {line:?}", n + 2));
            let mut parts = line.splitn(3, '\t');
            let (kind, idx, raw) = (parts.next(), parts.next(), parts.next());
            let (Some(kind), Some(idx), Some(raw)) = (kind, idx, raw) else {
                return Err(bad());
            };
            let idx: usize = idx.parse().map_err(|_| bad())?;
            let target = match kind {
                "user" => &mut users,
                "item" => &mut items,
                _ => return Err(bad()),
            };
            if idx != target.len() {
                return Err(bad());
            }
            target.push(raw.to_string());
        }
        Ok(Self::from_parts(users, items))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_text(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numeric_ids_sort_numerically() {
        let m = IdMap::from_raw(["10", "9", "100", "9"].map(String::from), ["b", "a"].map(String::from));
        assert_eq!(m.user("9"), Some(UserId(0)));
        assert_eq!(m.user("100"), Some(UserId(2)));
        assert_eq!(m.item("a"), Some(ItemId(0)));
        assert_eq!(m.item_raw(ItemId(1)), "b");
        assert_eq!(m.n_users(), 3);
    }

    #[test]
    fn text_round_trip() {
        let m = IdMap::from_raw(["u1", "u2"].map(String::from), ["7", "3", "12"].map(String::from));
        let back = IdMap::from_text(&m.to_text()).unwrap();
        assert_eq!(back, m);
        assert!(IdMap::from_text("user\t0\tx\n").is_err());
        assert!(IdMap::from_text("UCRIDMAP 1\nuser\t1\tx\n").is_err());
    }
}
