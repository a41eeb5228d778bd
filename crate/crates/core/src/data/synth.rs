//! Synthetic interaction corpus shaped like MovieLens-100K.
//!
//! Items belong to genres and have Zipf popularity. Each genre orders its
//! items into a chain, and users mostly either continue the chain from
//! their last on-taste item or pick a popular item from one of their two
//! or three favourite genres. A fraction of interactions are off-taste
//! noise. Users never repeat an item.

use std::fmt::Write as _;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use super::InteractionLog;
use crate::Result;

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub n_users: usize,
    pub n_items: usize,
    pub n_genres: usize,
    pub min_len: usize,
    /// Mean of the exponential tail added to `min_len`.
    pub mean_extra: f64,
    pub max_len: usize,
    /// Probability of an off-taste interaction.
    pub noise: f64,
    /// Probability of continuing the genre chain.
    pub follow: f64,
    pub zipf_exponent: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_users: 943,
            n_items: 1682,
            n_genres: 18,
            min_len: 20,
            mean_extra: 85.0,
            max_len: 600,
            noise: 0.12,
            follow: 0.55,
            zipf_exponent: 0.9,
            seed: 2024,
        }
    }
}

/// `(user, item, timestamp)` with 1-based ids, in file order.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthCorpus {
    pub records: Vec<(u32, u32, i64)>,
    pub names: Vec<String>,
}

const GENRES: [&str; 18] = [
    "Action", "Adventure", "Animation", "Children", "Comedy", "Crime", "Documentary", "Drama", "Fantasy",
    "Noir", "Horror", "Musical", "Mystery", "Romance", "SciFi", "Thriller", "War", "Western",
];
const FIRST: [&str; 16] = [
    "Silent", "Crimson", "Last", "Hidden", "Broken", "Golden", "Lonely", "Midnight", "Distant", "Wild",
    "Frozen", "Burning", "Paper", "Iron", "Quiet", "Electric",
];
const SECOND: [&str; 16] = [
    "River", "Harbor", "Garden", "Empire", "Signal", "Season", "Witness", "Canyon", "Orchard", "Voyage",
    "Mirror", "Frontier", "Circus", "Station", "Lantern", "Tide",
];

pub fn generate(cfg: &SynthConfig) -> SynthCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n_genres = cfg.n_genres.max(1);
    let genre: Vec<usize> = (0..cfg.n_items).map(|_| rng.random_range(0..n_genres)).collect();
    let mut ranks: Vec<usize> = (0..cfg.n_items).collect();
    ranks.shuffle(&mut rng);
    let weight: Vec<f64> = ranks
        .iter()
        .map(|&r| 1.0 / ((r + 1) as f64).powf(cfg.zipf_exponent))
        .collect();

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_genres];
    for (i, &g) in genre.iter().enumerate() {
        members[g].push(i);
    }
    let mut successor = vec![0usize; cfg.n_items];
    for m in members.iter_mut() {
        m.shuffle(&mut rng);
        for w in 0..m.len() {
            successor[m[w]] = m[(w + 1) % m.len()];
        }
    }
    let by_genre: Vec<Option<WeightedIndex<f64>>> = members
        .iter()
        .map(|m| WeightedIndex::new(m.iter().map(|&i| weight[i])).ok())
        .collect();
    let overall = WeightedIndex::new(&weight).expect("positive weights");
    let tail = Exp::new(1.0 / cfg.mean_extra.max(1e-9)).expect("valid rate");

    let mut records = Vec::new();
    for user in 0..cfg.n_users {
        let n_taste = rng.random_range(2..=3).min(n_genres);
        let mut genres: Vec<usize> = (0..n_genres).collect();
        genres.shuffle(&mut rng);
        let taste: Vec<usize> = genres[..n_taste].to_vec();
        let taste_w = WeightedIndex::new(taste.iter().map(|_| rng.random_range(0.2..1.0))).expect("weights");
        let len = (cfg.min_len + tail.sample(&mut rng) as usize).min(cfg.max_len).min(cfg.n_items);

        let mut used = vec![false; cfg.n_items];
        let mut last_on_taste: Option<usize> = None;
        let mut ts: i64 = 874_724_710 + rng.random_range(0..20_000_000);
        let mut produced = 0;
        let mut attempts = 0;
        while produced < len && attempts < len * 50 {
            attempts += 1;
            let u: f64 = rng.random();
            let (item, on_taste) = if u < cfg.noise {
                let i = overall.sample(&mut rng);
                (i, taste.contains(&genre[i]))
            } else if u < cfg.noise + cfg.follow && last_on_taste.is_some() {
                let mut i = successor[last_on_taste.expect("checked")];
                for _ in 0..3 {
                    if !used[i] {
                        break;
                    }
                    i = successor[i];
                }
                (i, true)
            } else {
                let g = taste[taste_w.sample(&mut rng)];
                match &by_genre[g] {
                    Some(dist) => (members[g][dist.sample(&mut rng)], true),
                    None => continue,
                }
            };
            if used[item] {
                continue;
            }
            used[item] = true;
            if on_taste {
                last_on_taste = Some(item);
            }
            if !rng.random_bool(0.08) {
                ts += rng.random_range(1..86_400);
            }
            records.push((user as u32 + 1, item as u32 + 1, ts));
            produced += 1;
        }
    }

    let names = (0..cfg.n_items)
        .map(|i| {
            format!(
                "{} {} ({}, {})",
                FIRST[i % FIRST.len()],
                SECOND[(i / FIRST.len()) % SECOND.len()],
                GENRES[genre[i] % GENRES.len()],
                1950 + (i * 7) % 48
            )
        })
        .collect();
    SynthCorpus { records, names }
}

impl SynthCorpus {
    /// Tab-separated `user item rating timestamp` lines (rating fixed at 4).
    pub fn ratings_text(&self) -> String {
        let mut s = String::with_capacity(self.records.len() * 24);
        for &(u, i, ts) in &self.records {
            let _ = writeln!(s, "{u}\t{i}\t4\t{ts}");
        }
        s
    }

    /// `id|name` lines.
    pub fn names_text(&self) -> String {
        let mut s = String::new();
        for (i, n) in self.names.iter().enumerate() {
            let _ = writeln!(s, "{}|{n}", i + 1);
        }
        s
    }

    pub fn write(&self, ratings: &Path, names: Option<&Path>) -> Result<()> {
        std::fs::write(ratings, self.ratings_text())?;
        if let Some(p) = names {
            std::fs::write(p, self.names_text())?;
        }
        Ok(())
    }

    pub fn to_log(&self) -> InteractionLog {
        let raw: Vec<_> = self
            .records
            .iter()
            .map(|&(u, i, ts)| (u.to_string(), i.to_string(), ts))
            .collect();
        InteractionLog::from_raw(&raw, "synthetic")
    }
}

/// Parses an `id|name` file into a lookup from raw item id to name.
pub fn read_names(path: &Path) -> Result<std::collections::HashMap<String, String>> {
    let text = std::fs::read(path)?;
    let text = String::from_utf8_lossy(&text);
    Ok(text
        .lines()
        .filter_map(|l| {
            let mut parts = l.splitn(3, '|');
            Some((parts.next()?.trim().to_string(), parts.next()?.trim().to_string()))
        })
        .filter(|(id, _)| !id.is_empty())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{filter, split, Format};

    fn small() -> SynthConfig {
        SynthConfig {
            n_users: 60,
            n_items: 200,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn deterministic_and_repeat_free() {
        let a = generate(&small());
        assert_eq!(a, generate(&small()));
        let mut seen = std::collections::HashSet::new();
        assert!(a.records.iter().all(|&(u, i, _)| seen.insert((u, i))));
        let users: std::collections::HashSet<u32> = a.records.iter().map(|r| r.0).collect();
        assert_eq!(users.len(), 60);
    }

    #[test]
    fn written_corpus_reads_back() {
        let c = generate(&small());
        let dir = tempfile::tempdir().unwrap();
        let (r, n) = (dir.path().join("u.data"), dir.path().join("u.item"));
        c.write(&r, Some(&n)).unwrap();
        let (log, summary) = crate::data::ingest(&r, Format::Tsv).unwrap();
        assert_eq!(log.raw_records(), c.to_log().raw_records());
        assert_eq!(summary.duplicates, 0);
        let names = read_names(&n).unwrap();
        assert_eq!(names.len(), 200);
        assert_eq!(names["1"], c.names[0]);
    }

    #[test]
    fn splits_have_no_leakage() {
        let log = generate(&small()).to_log();
        let (log, _) = filter(&log, 20, 2).unwrap();
        let data = split(&log, 10).unwrap();
        for u in &data.users {
            let held: Vec<_> = u.simulation.iter().chain([&u.test]).collect();
            assert!(u.train.iter().all(|i| !held.contains(&i)));
        }
    }
}
