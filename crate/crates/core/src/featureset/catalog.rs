use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::FeatureError;
use crate::ingestion::{ProfileSnapshot, POPULAR_FOLLOWER_THRESHOLD};

pub const DEFAULT_MIN_PARTICIPANTS: usize = 6;

/// Accounts followed by enough cohort members and popular enough to become
/// indicator features. Handles are sorted lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PopularAccountCatalog {
    pub handles: Vec<String>,
    /// Accounts need strictly more followers than this.
    pub min_followers_exclusive: u64,
    /// Accounts need at least this many cohort followers.
    pub min_participant_followers: usize,
    /// Hex SHA-256 over parameters and handles; identifies the catalog
    /// version a model was trained against.
    pub fingerprint: String,
}

impl PopularAccountCatalog {
    pub fn new(
        mut handles: Vec<String>,
        min_followers_exclusive: u64,
        min_participant_followers: usize,
    ) -> Result<Self, FeatureError> {
        handles.sort();
        if handles.windows(2).any(|w| w[0] == w[1]) {
            return Err(FeatureError::Catalog("duplicate handle".into()));
        }
        let fingerprint = fingerprint(&handles, min_followers_exclusive, min_participant_followers);
        Ok(Self {
            handles,
            min_followers_exclusive,
            min_participant_followers,
            fingerprint,
        })
    }

    pub fn empty() -> Self {
        Self::new(Vec::new(), POPULAR_FOLLOWER_THRESHOLD, DEFAULT_MIN_PARTICIPANTS)
            .expect("no handles")
    }

    pub fn len(&self) -> usize {
        self.handles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.handles.is_empty()
    }

    pub fn contains(&self, handle: &str) -> bool {
        self.handles.binary_search_by(|h| h.as_str().cmp(handle)).is_ok()
    }

    /// Parses a stored catalog and checks that its fingerprint matches its
    /// contents.
    pub fn from_json(text: &str) -> Result<Self, FeatureError> {
        let stored: PopularAccountCatalog = serde_json::from_str(text)
            .map_err(|e| FeatureError::Catalog(format!("catalog file: {e}")))?;
        let rebuilt = Self::new(
            stored.handles.clone(),
            stored.min_followers_exclusive,
            stored.min_participant_followers,
        )?;
        if rebuilt != stored {
            return Err(FeatureError::Catalog(
                "catalog fingerprint does not match its contents".into(),
            ));
        }
        Ok(stored)
    }
}

fn fingerprint(handles: &[String], min_followers: u64, min_participants: usize) -> String {
    let mut h = Sha256::new();
    h.update(format!("{min_followers}:{min_participants}\n"));
    for handle in handles {
        h.update(handle.as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

pub fn build_popular_catalog(
    snapshots: &[ProfileSnapshot],
    min_followers: u64,
    min_participants: usize,
) -> Result<PopularAccountCatalog, FeatureError> {
    if !snapshots.iter().any(|s| !s.is_private) {
        return Err(FeatureError::Catalog(
            "no public snapshot to build a catalog from".into(),
        ));
    }
    // Largest follower count reported for the account across the cohort.
    let mut follower_counts: BTreeMap<&str, u64> = BTreeMap::new();
    let mut cohort_followers: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for s in snapshots.iter().filter(|s| !s.is_private) {
        for acc in &s.following {
            if let Some(c) = acc.account_follower_count {
                let entry = follower_counts.entry(&acc.account_handle).or_insert(0);
                *entry = (*entry).max(c);
            }
            cohort_followers
                .entry(&acc.account_handle)
                .or_default()
                .insert(&s.participant_id);
        }
    }
    let handles = cohort_followers
        .into_iter()
        .filter(|(handle, members)| {
            members.len() >= min_participants
                && follower_counts.get(handle).is_some_and(|&c| c > min_followers)
        })
        .map(|(handle, _)| handle.to_string())
        .collect();
    PopularAccountCatalog::new(handles, min_followers, min_participants)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingestion::FollowedAccount;
    use proptest::prelude::*;

    fn snapshot(id: usize, follows: &[(&str, u64)]) -> ProfileSnapshot {
        ProfileSnapshot {
            participant_id: format!("p{id}"),
            username: format!("u{id}"),
            is_private: false,
            follower_count: 10,
            following_count: follows.len() as u64,
            post_count: 0,
            posts: vec![],
            following: follows
                .iter()
                .map(|&(h, c)| FollowedAccount {
                    account_handle: h.to_string(),
                    account_follower_count: Some(c),
                })
                .collect(),
        }
    }

    fn cohort() -> Vec<ProfileSnapshot> {
        (0..8)
            .map(|i| {
                let mut follows = vec![];
                if i < 6 {
                    follows.push(("popular", 60_000));
                    follows.push(("borderline", 50_000));
                }
                if i < 5 {
                    follows.push(("celebrity", 1_000_000));
                }
                follows.push(("everyone", 70_000));
                snapshot(i, &follows)
            })
            .collect()
    }

    #[test]
    fn thresholds_are_applied() {
        let cat = build_popular_catalog(&cohort(), 50_000, 6).unwrap();
        assert_eq!(cat.handles, vec!["everyone".to_string(), "popular".to_string()]);
        assert!(cat.contains("popular"));
        assert!(!cat.contains("borderline"));
        assert!(!cat.contains("celebrity"));
    }

    #[test]
    fn private_only_cohort_is_an_error() {
        let mut s = snapshot(0, &[]);
        s.is_private = true;
        assert!(build_popular_catalog(&[s], 50_000, 6).is_err());
    }

    #[test]
    fn no_qualifying_accounts_gives_empty_catalog() {
        let cat = build_popular_catalog(&[snapshot(0, &[("a", 100)])], 50_000, 6).unwrap();
        assert!(cat.is_empty());
    }

    #[test]
    fn json_round_trip_checks_fingerprint() {
        let cat = build_popular_catalog(&cohort(), 50_000, 6).unwrap();
        let text = serde_json::to_string(&cat).unwrap();
        assert_eq!(PopularAccountCatalog::from_json(&text).unwrap(), cat);
        let tampered = text.replace("\"popular\"", "\"other\"");
        assert!(PopularAccountCatalog::from_json(&tampered).is_err());
    }

    proptest! {
        #[test]
        fn relaxing_thresholds_never_removes_accounts(
            follows in proptest::collection::vec(proptest::collection::vec((0usize..12, 0u64..200), 0..10), 1..15),
            f1 in 0u64..200, f2 in 0u64..200, p1 in 1usize..6, p2 in 1usize..6,
        ) {
            let handles: Vec<String> = (0..12).map(|i| format!("acct{i}")).collect();
            let snaps: Vec<ProfileSnapshot> = follows.iter().enumerate().map(|(i, list)| {
                let mut seen = BTreeSet::new();
                let pairs: Vec<(&str, u64)> = list.iter()
                    .filter(|(h, _)| seen.insert(*h))
                    .map(|&(h, _)| (handles[h].as_str(), 20 * h as u64))
                    .collect();
                snapshot(i, &pairs)
            }).collect();
            let strict = build_popular_catalog(&snaps, f1.max(f2), p1.max(p2)).unwrap();
            let loose = build_popular_catalog(&snaps, f1.min(f2), p1.min(p2)).unwrap();
            for h in &strict.handles {
                prop_assert!(loose.contains(h));
            }
            for h in &strict.handles {
                let n = snaps.iter().filter(|s| s.following.iter().any(|a| &a.account_handle == h)).count();
                prop_assert!(n >= p1.max(p2));
            }
        }
    }
}
