use sha2::{Digest, Sha256};

use crate::learners::ModelFamily;
use crate::psychometrics::{Scheme, Trait};

/// First eight bytes (big endian) of `sha256("base:part:part...")`.
pub fn derive_seed(base: u64, parts: &[&str]) -> u64 {
    let mut text = base.to_string();
    for p in parts {
        text.push(':');
        text.push_str(p);
    }
    let digest = Sha256::digest(text.as_bytes());
    u64::from_be_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

pub fn split_seed(base: u64, t: Trait) -> u64 {
    derive_seed(base, &[t.id(), "split"])
}

pub fn job_seed(base: u64, t: Trait, scheme: Scheme, family: ModelFamily) -> u64 {
    derive_seed(base, &[t.id(), scheme.id(), family.id()])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stable_and_distinct() {
        let a = job_seed(7, Trait::Energy, Scheme::Two, ModelFamily::Rf);
        assert_eq!(a, job_seed(7, Trait::Energy, Scheme::Two, ModelFamily::Rf));
        assert_ne!(a, job_seed(7, Trait::Energy, Scheme::Three, ModelFamily::Rf));
        assert_ne!(a, job_seed(8, Trait::Energy, Scheme::Two, ModelFamily::Rf));
        assert_ne!(split_seed(7, Trait::Energy), split_seed(7, Trait::Teamwork));
    }

    #[test]
    fn matches_independent_digest() {
        let digest = Sha256::digest(b"42:neuroticism:split");
        let mut expected = 0u64;
        for b in &digest[..8] {
            expected = (expected << 8) | *b as u64;
        }
        assert_eq!(split_seed(42, Trait::Neuroticism), expected);
    }
}
