//! Profile and post metrics derived from one snapshot.
//!
//! Feature dictionary:
//! - hashtag usage ratio: posts with at least one hashtag / posts
//! - number of captions: posts with a non-empty caption; average caption
//!   length is taken over those posts only
//! - location usage ratio: posts with a location / posts
//! - post engagement: (likes + comments) / followers per post, averaged;
//!   posts with disabled comments contribute likes only
//! - followers of followings: over followed accounts with a known count
//! - popular followings: followed accounts with more than 50,000 followers
//!
//! A value whose denominator is zero or whose inputs are absent is `None`.

use serde::{Deserialize, Serialize};

use super::{Comments, PostKind, ProfileSnapshot};

pub const POPULAR_FOLLOWER_THRESHOLD: u64 = 50_000;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PostFeatureSet {
    pub follower_count: Option<f64>,
    pub following_count: Option<f64>,
    pub post_count: Option<f64>,
    pub total_post_likes: Option<f64>,
    pub average_post_likes: Option<f64>,
    pub total_post_comments: Option<f64>,
    pub average_post_comments: Option<f64>,
    pub hashtag_usage_ratio: Option<f64>,
    pub number_of_captions: Option<f64>,
    pub average_caption_length: Option<f64>,
    pub total_caption_length: Option<f64>,
    pub number_of_locations: Option<f64>,
    pub location_usage_ratio: Option<f64>,
    pub number_of_disabled_comments: Option<f64>,
    pub number_of_image_posts: Option<f64>,
    pub image_posts_ratio: Option<f64>,
    pub number_of_slide_posts: Option<f64>,
    pub slide_posts_ratio: Option<f64>,
    pub number_of_video_posts: Option<f64>,
    pub video_posts_ratio: Option<f64>,
    pub average_post_engagement: Option<f64>,
    pub total_followers_of_followings: Option<f64>,
    pub max_followers_of_followings: Option<f64>,
    pub number_of_popular_followings: Option<f64>,
}

impl PostFeatureSet {
    pub const NAMES: [&'static str; 24] = [
        "follower_count",
        "following_count",
        "post_count",
        "total_post_likes",
        "average_post_likes",
        "total_post_comments",
        "average_post_comments",
        "hashtag_usage_ratio",
        "number_of_captions",
        "average_caption_length",
        "total_caption_length",
        "number_of_locations",
        "location_usage_ratio",
        "number_of_disabled_comments",
        "number_of_image_posts",
        "image_posts_ratio",
        "number_of_slide_posts",
        "slide_posts_ratio",
        "number_of_video_posts",
        "video_posts_ratio",
        "average_post_engagement",
        "total_followers_of_followings",
        "max_followers_of_followings",
        "number_of_popular_followings",
    ];

    /// Values in [`Self::NAMES`] order.
    pub fn values(&self) -> [Option<f64>; 24] {
        [
            self.follower_count,
            self.following_count,
            self.post_count,
            self.total_post_likes,
            self.average_post_likes,
            self.total_post_comments,
            self.average_post_comments,
            self.hashtag_usage_ratio,
            self.number_of_captions,
            self.average_caption_length,
            self.total_caption_length,
            self.number_of_locations,
            self.location_usage_ratio,
            self.number_of_disabled_comments,
            self.number_of_image_posts,
            self.image_posts_ratio,
            self.number_of_slide_posts,
            self.slide_posts_ratio,
            self.number_of_video_posts,
            self.video_posts_ratio,
            self.average_post_engagement,
            self.total_followers_of_followings,
            self.max_followers_of_followings,
            self.number_of_popular_followings,
        ]
    }

    /// Every feature missing.
    pub fn missing() -> Self {
        Self::default()
    }
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn derive_post_features(snapshot: &ProfileSnapshot) -> PostFeatureSet {
    let mut f = PostFeatureSet {
        follower_count: Some(snapshot.follower_count as f64),
        following_count: Some(snapshot.following_count as f64),
        post_count: Some(snapshot.post_count as f64),
        ..PostFeatureSet::default()
    };
    if snapshot.is_private {
        return f;
    }

    let posts = &snapshot.posts;
    let n = posts.len();
    if n > 0 {
        let likes: u64 = posts.iter().map(|p| p.like_count).sum();
        let enabled: Vec<u64> = posts.iter().filter_map(|p| p.comments.count()).collect();
        let comments: u64 = enabled.iter().sum();
        let with_hashtags = posts.iter().filter(|p| p.hashtag_count > 0).count();
        let captioned: Vec<u64> = posts
            .iter()
            .map(|p| p.caption_length)
            .filter(|&len| len > 0)
            .collect();
        let caption_total: u64 = captioned.iter().sum();
        let located = posts.iter().filter(|p| p.has_location).count();
        let kind_count = |k: PostKind| posts.iter().filter(|p| p.kind == k).count();
        let (images, slides, videos) = (
            kind_count(PostKind::Image),
            kind_count(PostKind::Slide),
            kind_count(PostKind::Video),
        );

        f.total_post_likes = Some(likes as f64);
        f.average_post_likes = ratio(likes as usize, n);
        f.total_post_comments = (!enabled.is_empty()).then_some(comments as f64);
        f.average_post_comments = ratio(comments as usize, enabled.len());
        f.hashtag_usage_ratio = ratio(with_hashtags, n);
        f.number_of_captions = Some(captioned.len() as f64);
        f.average_caption_length = ratio(caption_total as usize, captioned.len());
        f.total_caption_length = Some(caption_total as f64);
        f.number_of_locations = Some(located as f64);
        f.location_usage_ratio = ratio(located, n);
        f.number_of_disabled_comments = Some((n - enabled.len()) as f64);
        f.number_of_image_posts = Some(images as f64);
        f.image_posts_ratio = ratio(images, n);
        f.number_of_slide_posts = Some(slides as f64);
        f.slide_posts_ratio = ratio(slides, n);
        f.number_of_video_posts = Some(videos as f64);
        f.video_posts_ratio = ratio(videos, n);
        if snapshot.follower_count > 0 {
            let followers = snapshot.follower_count as f64;
            let total: f64 = posts
                .iter()
                .map(|p| {
                    let comments = match p.comments {
                        Comments::Count(c) => c,
                        Comments::Disabled => 0,
                    };
                    (p.like_count + comments) as f64 / followers
                })
                .sum();
            f.average_post_engagement = Some(total / n as f64);
        }
    }

    let known: Vec<u64> = snapshot
        .following
        .iter()
        .filter_map(|a| a.account_follower_count)
        .collect();
    if !known.is_empty() {
        f.total_followers_of_followings = Some(known.iter().sum::<u64>() as f64);
        f.max_followers_of_followings = known.iter().max().map(|&m| m as f64);
    }
    f.number_of_popular_followings = Some(
        known
            .iter()
            .filter(|&&c| c > POPULAR_FOLLOWER_THRESHOLD)
            .count() as f64,
    );
    f
}
