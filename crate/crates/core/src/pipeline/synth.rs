use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::PipelineError;
use crate::featureset::{indicator_name, write_demographics, Demographics, Education, Gender, Occupation};
use crate::ingestion::{write_snapshot_dir, Comments, FollowedAccount, PostKind, PostRecord, ProfileSnapshot};
use crate::psychometrics::{score_questionnaire, ResponseRow, ScoringKey, Trait, TraitProfile};

/// Per-participant missingness: crawl failures have no export at all,
/// private profiles expose counts only, and empty profiles have no posts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MissingnessRates {
    pub private: f64,
    pub crawl_failure: f64,
    pub empty_posts: f64,
}

impl Default for MissingnessRates {
    fn default() -> Self {
        Self {
            private: 0.255,
            crawl_failure: 0.0225,
            empty_posts: 0.11,
        }
    }
}

impl MissingnessRates {
    pub fn none() -> Self {
        Self {
            private: 0.0,
            crawl_failure: 0.0,
            empty_posts: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraitEffect {
    pub planted: usize,
    /// Loading of each planted indicator's latent propensity on the trait,
    /// in `[0, 1]`; 1 makes the indicator a threshold of the trait itself.
    pub effect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticCohortSpec {
    pub n_participants: usize,
    pub catalog_width: usize,
    pub planted_per_trait: usize,
    pub effect: f64,
    /// Per-trait overrides of `planted_per_trait` and `effect`.
    pub overrides: BTreeMap<Trait, TraitEffect>,
    /// Follow rate range of planted accounts.
    pub planted_rate: (f64, f64),
    /// Follow rate range of the remaining catalog accounts.
    pub base_rate: (f64, f64),
    /// Probability that a participant's score ignores the latent trait.
    pub label_noise: f64,
    pub missingness: MissingnessRates,
    /// Accounts just below the popularity threshold, and very popular
    /// accounts followed by too few participants; neither may enter the
    /// catalog.
    pub decoys: usize,
    pub seed: u64,
}

impl Default for SyntheticCohortSpec {
    fn default() -> Self {
        Self {
            n_participants: 400,
            catalog_width: 830,
            planted_per_trait: 20,
            effect: 0.7,
            overrides: BTreeMap::new(),
            planted_rate: (0.3, 0.5),
            base_rate: (0.05, 0.3),
            label_noise: 0.0,
            missingness: MissingnessRates::default(),
            decoys: 20,
            seed: 0,
        }
    }
}

/// Participants needed to follow an account before it can enter a catalog.
const CATALOG_MIN_FOLLOWERS: f64 = 6.0;

impl SyntheticCohortSpec {
    /// No planted accounts and no effect.
    pub fn null(seed: u64) -> Self {
        Self {
            planted_per_trait: 0,
            effect: 0.0,
            seed,
            ..Self::default()
        }
    }

    pub fn trait_effect(&self, t: Trait) -> TraitEffect {
        self.overrides.get(&t).copied().unwrap_or(TraitEffect {
            planted: self.planted_per_trait,
            effect: self.effect,
        })
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let err = |m: String| Err(PipelineError::Config(format!("synthetic cohort: {m}")));
        if self.n_participants < 20 {
            return err(format!("{} participants, need at least 20", self.n_participants));
        }
        if !(0.0..1.0).contains(&self.label_noise) {
            return err(format!("label noise {} outside [0, 1)", self.label_noise));
        }
        for (what, (lo, hi)) in [("planted_rate", self.planted_rate), ("base_rate", self.base_rate)] {
            if !(lo > 0.0 && lo <= hi && hi < 1.0) {
                return err(format!("{what} ({lo}, {hi}) must satisfy 0 < lo <= hi < 1"));
            }
        }
        let m = &self.missingness;
        for (what, r) in [("private", m.private), ("crawl_failure", m.crawl_failure), ("empty_posts", m.empty_posts)] {
            if !(0.0..1.0).contains(&r) {
                return err(format!("missingness `{what}` {r} outside [0, 1)"));
            }
        }
        let mut planted = 0;
        for t in Trait::ALL {
            let e = self.trait_effect(t);
            if !(0.0..=1.0).contains(&e.effect) {
                return err(format!("{t}: effect {} outside [0, 1]", e.effect));
            }
            if e.effect > 0.0 && e.planted == 0 {
                return err(format!("{t}: effect {} without planted accounts", e.effect));
            }
            planted += e.planted;
        }
        if planted > self.catalog_width {
            return err(format!("{planted} planted accounts exceed the catalog width {}", self.catalog_width));
        }
        let public = self.n_participants as f64 * (1.0 - m.crawl_failure) * (1.0 - m.private);
        if planted > 0 && public * self.planted_rate.0 < 2.0 * CATALOG_MIN_FOLLOWERS {
            return err(format!(
                "effect infeasible for n = {}: planted accounts would be followed by about {:.1} public participants",
                self.n_participants,
                public * self.planted_rate.0
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedAccount {
    pub handle: String,
    pub feature: String,
    pub follow_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub seed: u64,
    pub effects: BTreeMap<Trait, TraitEffect>,
    pub planted: BTreeMap<Trait, Vec<PlantedAccount>>,
    pub catalog_handles: Vec<String>,
    pub decoy_handles: Vec<String>,
}

impl GroundTruth {
    pub fn planted_features(&self, t: Trait) -> Vec<String> {
        self.planted
            .get(&t)
            .map(|v| v.iter().map(|a| a.feature.clone()).collect())
            .unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCohort {
    pub key: ScoringKey,
    pub responses: Vec<ResponseRow>,
    pub profiles: Vec<TraitProfile>,
    /// Participants whose crawl failed have no snapshot.
    pub snapshots: Vec<ProfileSnapshot>,
    pub demographics: BTreeMap<String, Demographics>,
    pub truth: GroundTruth,
}

/// Answers that reproduce `scores` under `key`: every scale's points are
/// spread as evenly as possible over its items. Scores are clamped to the
/// scale range.
pub fn responses_for_scores(
    participant_id: &str,
    scores: &BTreeMap<Trait, f64>,
    key: &ScoringKey,
) -> ResponseRow {
    let mut answers = vec![None; key.n_items];
    for scale in &key.scales {
        let Some(&score) = scores.get(&scale.trait_id) else {
            continue;
        };
        let m = scale.items.len() as i64;
        let total = (score.round() as i64).clamp(m * scale.min_points, m * scale.max_points);
        let extra = total - m * scale.min_points;
        for (k, item) in scale.items.iter().enumerate() {
            let points = scale.min_points + extra / m + i64::from((k as i64) < extra % m);
            let answer = if item.reverse {
                scale.min_points + scale.max_points - points
            } else {
                points
            };
            answers[item.index - 1] = Some(answer);
        }
    }
    ResponseRow {
        participant_id: participant_id.to_string(),
        answers,
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> u64 {
    (lo.ln() + rng.gen::<f64>() * (hi.ln() - lo.ln())).exp().round() as u64
}

#[derive(Clone, Copy, PartialEq)]
enum Status {
    Failed,
    Private,
    Empty,
    Full,
}

const FRIEND_POOL: usize = 2000;

/// Draws a cohort from `spec`. Each trait has a latent standardized over
/// the cohort; a planted account `j` of trait `t` is followed when
/// `effect * z_t + sqrt(1 - effect^2) * e > q(1 - rate_j)`, and trait
/// scores are `round(mean + sd * z_t)` with the reference moments, clamped
/// to the key range.
pub fn generate_synthetic_cohort(spec: &SyntheticCohortSpec) -> Result<SyntheticCohort, PipelineError> {
    spec.validate()?;
    let key = ScoringKey::default_key();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.n_participants;
    let width = spec.catalog_width;
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");

    let handles: Vec<String> = (0..width).map(|j| format!("acct{j:04}")).collect();
    let popularity: Vec<u64> = (0..width).map(|_| log_uniform(&mut rng, 60_000.0, 5_000_000.0)).collect();
    let mut rates: Vec<f64> = (0..width)
        .map(|_| rng.gen_range(spec.base_rate.0..=spec.base_rate.1))
        .collect();
    let mut order: Vec<usize> = (0..width).collect();
    order.shuffle(&mut rng);
    // owner[j] = (trait index, loading) for planted accounts
    let mut owner: Vec<Option<(usize, f64)>> = vec![None; width];
    let mut planted = BTreeMap::new();
    let mut effects = BTreeMap::new();
    let mut next = 0;
    for (ti, t) in Trait::ALL.iter().enumerate() {
        let e = spec.trait_effect(*t);
        effects.insert(*t, e);
        let mut accounts = Vec::with_capacity(e.planted);
        for &j in &order[next..next + e.planted] {
            rates[j] = rng.gen_range(spec.planted_rate.0..=spec.planted_rate.1);
            owner[j] = Some((ti, e.effect));
            accounts.push(PlantedAccount {
                handle: handles[j].clone(),
                feature: indicator_name(&handles[j]),
                follow_rate: rates[j],
            });
        }
        accounts.sort_by(|a, b| a.handle.cmp(&b.handle));
        planted.insert(*t, accounts);
        next += e.planted;
    }
    let thresholds: Vec<f64> = rates.iter().map(|r| std_normal.inverse_cdf(1.0 - r)).collect();

    let near: Vec<(String, u64)> = (0..spec.decoys)
        .map(|k| (format!("near{k:03}"), rng.gen_range(35_000..=50_000)))
        .collect();
    let stars: Vec<(String, u64)> = (0..spec.decoys)
        .map(|k| (format!("star{k:03}"), rng.gen_range(1_000_000..=9_000_000)))
        .collect();
    let friend_followers: Vec<Option<u64>> = (0..FRIEND_POOL)
        .map(|_| (rng.gen::<f64>() >= 0.05).then(|| log_uniform(&mut rng, 20.0, 20_000.0)))
        .collect();
    // each star is followed by at most five participants
    let mut star_followers: Vec<Vec<usize>> = vec![Vec::new(); n];
    for s in 0..stars.len() {
        let count = rng.gen_range(1..=5);
        for i in rand::seq::index::sample(&mut rng, n, count.min(n)) {
            star_followers[i].push(s);
        }
    }

    let mut responses = Vec::with_capacity(n);
    let mut profiles = Vec::with_capacity(n);
    let mut snapshots = Vec::new();
    let mut demographics = BTreeMap::new();
    // latents standardized within the cohort, one column per trait
    let mut latent: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..Trait::ALL.len()).map(|_| normal(&mut rng)).collect())
        .collect();
    for ti in 0..Trait::ALL.len() {
        let mean = latent.iter().map(|z| z[ti]).sum::<f64>() / n as f64;
        let sd = (latent.iter().map(|z| (z[ti] - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        for z in latent.iter_mut() {
            z[ti] = (z[ti] - mean) / sd;
        }
    }
    let digits = n.to_string().len().max(4);
    for (i, z) in latent.iter().enumerate() {
        let id = format!("p{i:0digits$}");
        let mut scores = BTreeMap::new();
        for (ti, t) in Trait::ALL.iter().enumerate() {
            let latent = if rng.gen::<f64>() < spec.label_noise { normal(&mut rng) } else { z[ti] };
            let stats = t.reference_stats();
            scores.insert(*t, (stats.mean + stats.sd * latent).round());
        }
        let row = responses_for_scores(&id, &scores, &key);
        let profile = score_questionnaire(&row, &key).map_err(|e| PipelineError::stage("synthesize", None, e))?;
        responses.push(row);
        profiles.push(profile);

        let mut following = Vec::new();
        for j in 0..width {
            let follows = match owner[j] {
                Some((ti, rho)) => {
                    let e = normal(&mut rng);
                    rho * z[ti] + (1.0 - rho * rho).sqrt() * e > thresholds[j]
                }
                None => rng.gen::<f64>() < rates[j],
            };
            if follows {
                following.push(FollowedAccount {
                    account_handle: handles[j].clone(),
                    account_follower_count: Some(popularity[j]),
                });
            }
        }
        for (handle, followers) in &near {
            if rng.gen::<f64>() < 0.3 {
                following.push(FollowedAccount {
                    account_handle: handle.clone(),
                    account_follower_count: Some(*followers),
                });
            }
        }
        for &s in &star_followers[i] {
            following.push(FollowedAccount {
                account_handle: stars[s].0.clone(),
                account_follower_count: Some(stars[s].1),
            });
        }
        let n_friends = rng.gen_range(10..=60);
        for f in rand::seq::index::sample(&mut rng, FRIEND_POOL, n_friends).into_vec() {
            following.push(FollowedAccount {
                account_handle: format!("friend{f:05}"),
                account_follower_count: friend_followers[f],
            });
        }
        following.shuffle(&mut rng);

        let m = &spec.missingness;
        let status = if rng.gen::<f64>() < m.crawl_failure {
            Status::Failed
        } else if rng.gen::<f64>() < m.private {
            Status::Private
        } else if rng.gen::<f64>() < m.empty_posts {
            Status::Empty
        } else {
            Status::Full
        };
        let follower_count = (normal(&mut rng) * 1.1 + 5.8).exp().round() as u64;
        let drawn_posts = (normal(&mut rng) * 0.8 + 3.4).exp().round() as u64;
        let post_count = if status == Status::Empty { 0 } else { drawn_posts.max(1) };
        let posts = if status == Status::Full {
            synth_posts(&mut rng, &id, follower_count, post_count.min(30))
        } else {
            Vec::new()
        };
        let following_count = following.len() as u64;
        let snapshot = ProfileSnapshot {
            participant_id: id.clone(),
            username: format!("user_{id}"),
            is_private: status == Status::Private,
            follower_count,
            following_count,
            post_count,
            posts: if status == Status::Private { Vec::new() } else { posts },
            following: if status == Status::Private { Vec::new() } else { following },
        };
        demographics.insert(id.clone(), synth_demographics(&mut rng, status));
        if status != Status::Failed {
            snapshots.push(snapshot);
        }
    }
    Ok(SyntheticCohort {
        key,
        responses,
        profiles,
        snapshots,
        demographics,
        truth: GroundTruth {
            seed: spec.seed,
            effects,
            planted,
            catalog_handles: handles,
            decoy_handles: near.into_iter().chain(stars).map(|(h, _)| h).collect(),
        },
    })
}

fn synth_posts(rng: &mut ChaCha8Rng, id: &str, followers: u64, count: u64) -> Vec<PostRecord> {
    (0..count)
        .map(|k| {
            let kind = match rng.gen_range(0..10) {
                0..=6 => PostKind::Image,
                7..=8 => PostKind::Video,
                _ => PostKind::Slide,
            };
            let like_count = (followers as f64 * rng.gen_range(0.03..0.25)).round() as u64;
            let comments = if rng.gen::<f64>() < 0.05 {
                Comments::Disabled
            } else {
                Comments::Count((like_count as f64 * rng.gen_range(0.0..0.08)).round() as u64)
            };
            PostRecord {
                post_id: format!("{id}_{k:03}"),
                kind,
                like_count,
                comments,
                caption_length: rng.gen_range(0..300),
                hashtag_count: rng.gen_range(0..10),
                has_location: rng.gen::<f64>() < 0.3,
            }
        })
        .collect()
}

fn synth_demographics(rng: &mut ChaCha8Rng, status: Status) -> Demographics {
    let gender = if rng.gen::<bool>() { Gender::Female } else { Gender::Male };
    let age = (rng.gen::<f64>() >= 0.02).then(|| rng.gen_range(18..=60) as f64);
    let education = *Education::ALL.choose(rng).expect("non-empty");
    let occupation = Occupation::ALL.choose(rng).copied();
    Demographics {
        gender,
        age,
        education,
        occupation,
        private_page: (status != Status::Failed).then_some(status == Status::Private),
    }
}

impl SyntheticCohort {
    /// Writes the cohort in the input layout read by a run:
    /// `responses.csv`, `snapshots/<id>/`, `demographics.csv`,
    /// `scoring_key.json` and `ground_truth.json`.
    pub fn write_dir(&self, dir: &Path) -> Result<(), PipelineError> {
        let io = |p: &Path, e| PipelineError::io(p, e);
        fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        let path = dir.join("responses.csv");
        let mut w = csv::Writer::from_path(&path).map_err(|e| PipelineError::stage("synthesize", None, e))?;
        let mut header = vec!["participant_id".to_string()];
        header.extend((1..=self.key.n_items).map(|k| format!("q{k}")));
        let csv_err = |e: csv::Error| PipelineError::stage("synthesize", None, e);
        w.write_record(&header).map_err(csv_err)?;
        for r in &self.responses {
            let mut rec = vec![r.participant_id.clone()];
            rec.extend(r.answers.iter().map(|a| a.map(|v| v.to_string()).unwrap_or_default()));
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush().map_err(|e| io(&path, e))?;
        for s in &self.snapshots {
            write_snapshot_dir(s, &dir.join("snapshots").join(&s.participant_id))
                .map_err(|e| PipelineError::stage("synthesize", None, e))?;
        }
        let path = dir.join("demographics.csv");
        let file = fs::File::create(&path).map_err(|e| io(&path, e))?;
        write_demographics(file, &self.demographics).map_err(|e| PipelineError::stage("synthesize", None, e))?;
        let key = serde_json::to_string_pretty(&self.key).expect("key serializes") + "\n";
        fs::write(dir.join("scoring_key.json"), key).map_err(|e| io(dir, e))?;
        let truth = serde_json::to_string_pretty(&self.truth).expect("truth serializes") + "\n";
        fs::write(dir.join("ground_truth.json"), truth).map_err(|e| io(dir, e))?;
        Ok(())
    }
}
