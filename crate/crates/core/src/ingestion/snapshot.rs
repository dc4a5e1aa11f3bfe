//! Crawl export schema (version 1).
//!
//! One directory per participant:
//! - `profile.json`: `schema_version`, `participant_id`, `username`,
//!   `is_private`, `follower_count`, `following_count`, `post_count`
//! - `posts.jsonl`: one post per line (`post_id`, `kind`, `like_count`,
//!   `comment_count`, `comments_disabled`, `caption_length`,
//!   `hashtag_count`, `has_location`)
//! - `following.jsonl`: one followed account per line (`account_handle`,
//!   `account_follower_count`, null when unknown)

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::IngestError;

pub const EXPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PostKind {
    Image,
    Slide,
    Video,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comments {
    Count(u64),
    Disabled,
}

impl Comments {
    pub fn count(self) -> Option<u64> {
        match self {
            Comments::Count(c) => Some(c),
            Comments::Disabled => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPost", into = "RawPost")]
pub struct PostRecord {
    pub post_id: String,
    pub kind: PostKind,
    pub like_count: u64,
    pub comments: Comments,
    pub caption_length: u64,
    pub hashtag_count: u64,
    pub has_location: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawPost {
    post_id: String,
    kind: PostKind,
    like_count: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    comment_count: Option<u64>,
    #[serde(default)]
    comments_disabled: bool,
    #[serde(default)]
    caption_length: u64,
    #[serde(default)]
    hashtag_count: u64,
    #[serde(default)]
    has_location: bool,
}

impl TryFrom<RawPost> for PostRecord {
    type Error = String;

    fn try_from(raw: RawPost) -> Result<Self, Self::Error> {
        let comments = match (raw.comments_disabled, raw.comment_count) {
            (true, None) => Comments::Disabled,
            (true, Some(_)) => {
                return Err(format!(
                    "post `{}` has comments disabled but carries a comment count",
                    raw.post_id
                ))
            }
            (false, Some(c)) => Comments::Count(c),
            (false, None) => {
                return Err(format!("post `{}` is missing comment_count", raw.post_id))
            }
        };
        if raw.post_id.is_empty() {
            return Err("post with empty post_id".into());
        }
        Ok(PostRecord {
            post_id: raw.post_id,
            kind: raw.kind,
            like_count: raw.like_count,
            comments,
            caption_length: raw.caption_length,
            hashtag_count: raw.hashtag_count,
            has_location: raw.has_location,
        })
    }
}

impl From<PostRecord> for RawPost {
    fn from(p: PostRecord) -> Self {
        RawPost {
            post_id: p.post_id,
            kind: p.kind,
            like_count: p.like_count,
            comment_count: p.comments.count(),
            comments_disabled: p.comments == Comments::Disabled,
            caption_length: p.caption_length,
            hashtag_count: p.hashtag_count,
            has_location: p.has_location,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FollowedAccount {
    pub account_handle: String,
    #[serde(default)]
    pub account_follower_count: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSnapshot {
    pub participant_id: String,
    pub username: String,
    pub is_private: bool,
    pub follower_count: u64,
    pub following_count: u64,
    pub post_count: u64,
    pub posts: Vec<PostRecord>,
    pub following: Vec<FollowedAccount>,
}

#[derive(Debug, Deserialize)]
struct RawProfile {
    #[serde(default)]
    schema_version: Option<u32>,
    participant_id: Option<String>,
    #[serde(default)]
    username: String,
    is_private: Option<bool>,
    follower_count: Option<u64>,
    following_count: Option<u64>,
    post_count: Option<u64>,
}

#[derive(Debug, Serialize)]
struct ProfileOut<'a> {
    schema_version: u32,
    participant_id: &'a str,
    username: &'a str,
    is_private: bool,
    follower_count: u64,
    following_count: u64,
    post_count: u64,
}

/// A record that could not be used, with its location.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseIssue {
    pub file: String,
    pub line: Option<usize>,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedSnapshot {
    pub snapshot: ProfileSnapshot,
    pub issues: Vec<ParseIssue>,
}

fn issue(file: &str, line: Option<usize>, message: impl Into<String>) -> ParseIssue {
    ParseIssue {
        file: file.to_string(),
        line,
        message: message.into(),
    }
}

/// Parses the three export documents of one participant. `posts` and
/// `following` are `None` when the file is absent.
pub fn parse_snapshot(
    profile: &str,
    posts: Option<&str>,
    following: Option<&str>,
) -> Result<ParsedSnapshot, IngestError> {
    let raw: RawProfile = serde_json::from_str(profile)
        .map_err(|e| IngestError::Schema(format!("profile.json: {e}")))?;
    if let Some(v) = raw.schema_version {
        if v != EXPORT_SCHEMA_VERSION {
            return Err(IngestError::Schema(format!(
                "profile.json: unsupported schema_version {v}"
            )));
        }
    }
    let participant_id = raw
        .participant_id
        .filter(|id| !id.is_empty())
        .ok_or_else(|| IngestError::Schema("profile.json: missing participant_id".into()))?;
    let missing = |field: &str| {
        IngestError::Schema(format!("profile.json of `{participant_id}`: missing {field}"))
    };
    let is_private = raw.is_private.ok_or_else(|| missing("is_private"))?;
    let follower_count = raw.follower_count.ok_or_else(|| missing("follower_count"))?;
    let following_count = raw.following_count.ok_or_else(|| missing("following_count"))?;
    let post_count = raw.post_count.ok_or_else(|| missing("post_count"))?;

    let mut issues = Vec::new();
    let mut parsed_posts = Vec::new();
    let mut parsed_following = Vec::new();

    if is_private {
        if posts.is_some_and(|p| !p.trim().is_empty())
            || following.is_some_and(|f| !f.trim().is_empty())
        {
            issues.push(issue(
                "profile.json",
                None,
                "private profile carries post or following records; ignored",
            ));
        }
    } else {
        match posts {
            None => issues.push(issue("posts.jsonl", None, "file absent")),
            Some(text) => {
                let mut ids = BTreeSet::new();
                for (n, line) in text.lines().enumerate() {
                    if line.trim().is_empty() {
                        continue;
                    }
                    match serde_json::from_str::<PostRecord>(line) {
                        Ok(post) => {
                            if !ids.insert(post.post_id.clone()) {
                                return Err(IngestError::Schema(format!(
                                    "posts.jsonl of `{participant_id}`: duplicate post_id `{}`",
                                    post.post_id
                                )));
                            }
                            parsed_posts.push(post);
                        }
                        Err(e) => issues.push(issue("posts.jsonl", Some(n + 1), e.to_string())),
                    }
                }
            }
        }
        match following {
            None => issues.push(issue("following.jsonl", None, "file absent")),
            Some(text) => {
                let mut handles = BTreeSet::new();
                for (n, line) in text.lines().enumerate() {
                    if line.trim().is_empty() {
                        continue;
                    }
                    match serde_json::from_str::<FollowedAccount>(line) {
                        Ok(acc) if acc.account_handle.is_empty() => {
                            issues.push(issue("following.jsonl", Some(n + 1), "empty account_handle"))
                        }
                        Ok(acc) if !handles.insert(acc.account_handle.clone()) => issues.push(issue(
                            "following.jsonl",
                            Some(n + 1),
                            format!("duplicate handle `{}`", acc.account_handle),
                        )),
                        Ok(acc) => parsed_following.push(acc),
                        Err(e) => {
                            issues.push(issue("following.jsonl", Some(n + 1), e.to_string()))
                        }
                    }
                }
            }
        }
        if parsed_posts.len() as u64 > post_count {
            return Err(IngestError::Schema(format!(
                "`{participant_id}`: {} posts exported but post_count is {post_count}",
                parsed_posts.len()
            )));
        }
    }

    Ok(ParsedSnapshot {
        snapshot: ProfileSnapshot {
            participant_id,
            username: raw.username,
            is_private,
            follower_count,
            following_count,
            post_count,
            posts: parsed_posts,
            following: parsed_following,
        },
        issues,
    })
}

fn read_optional(path: &Path) -> Result<Option<String>, IngestError> {
    match fs::read_to_string(path) {
        Ok(s) => Ok(Some(s)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(IngestError::Io(path.display().to_string(), e)),
    }
}

pub fn parse_snapshot_dir(dir: &Path) -> Result<ParsedSnapshot, IngestError> {
    let profile_path = dir.join("profile.json");
    let profile = fs::read_to_string(&profile_path)
        .map_err(|e| IngestError::Io(profile_path.display().to_string(), e))?;
    let posts = read_optional(&dir.join("posts.jsonl"))?;
    let following = read_optional(&dir.join("following.jsonl"))?;
    parse_snapshot(&profile, posts.as_deref(), following.as_deref())
}

/// Parses every participant directory below `root`, in lexicographic
/// directory order.
pub fn parse_snapshot_tree(root: &Path) -> Result<Vec<ParsedSnapshot>, IngestError> {
    let mut dirs: Vec<_> = fs::read_dir(root)
        .map_err(|e| IngestError::Io(root.display().to_string(), e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.join("profile.json").is_file())
        .collect();
    dirs.sort();
    let parsed = dirs
        .iter()
        .map(|d| parse_snapshot_dir(d))
        .collect::<Result<Vec<_>, _>>()?;
    let mut ids = BTreeSet::new();
    for p in &parsed {
        if !ids.insert(p.snapshot.participant_id.as_str()) {
            return Err(IngestError::Schema(format!(
                "participant `{}` exported twice",
                p.snapshot.participant_id
            )));
        }
    }
    Ok(parsed)
}

/// Writes a snapshot in the export layout (inverse of
/// [`parse_snapshot_dir`]).
pub fn write_snapshot_dir(snapshot: &ProfileSnapshot, dir: &Path) -> Result<(), IngestError> {
    let io = |e| IngestError::Io(dir.display().to_string(), e);
    fs::create_dir_all(dir).map_err(io)?;
    let profile = ProfileOut {
        schema_version: EXPORT_SCHEMA_VERSION,
        participant_id: &snapshot.participant_id,
        username: &snapshot.username,
        is_private: snapshot.is_private,
        follower_count: snapshot.follower_count,
        following_count: snapshot.following_count,
        post_count: snapshot.post_count,
    };
    let mut text = serde_json::to_string_pretty(&profile).expect("plain struct");
    text.push('\n');
    fs::write(dir.join("profile.json"), text).map_err(io)?;
    if snapshot.is_private {
        return Ok(());
    }
    let mut posts = fs::File::create(dir.join("posts.jsonl")).map_err(io)?;
    for p in &snapshot.posts {
        writeln!(posts, "{}", serde_json::to_string(p).expect("plain struct")).map_err(io)?;
    }
    let mut following = fs::File::create(dir.join("following.jsonl")).map_err(io)?;
    for a in &snapshot.following {
        writeln!(following, "{}", serde_json::to_string(a).expect("plain struct")).map_err(io)?;
    }
    Ok(())
}
