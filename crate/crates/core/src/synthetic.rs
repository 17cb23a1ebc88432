//! Seeded generators of small article/summary corpora.
//!
//! Two styles share sentence structure but little vocabulary: news-like
//! articles lead with the summary sentence, meeting-like transcripts bury it
//! in fillers and disfluencies. They stand in for real corpora in tests,
//! benchmarks and demos.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::RawExample;

const NEWS_SUBJECTS: &[&str] = &[
    "the minister",
    "the senator",
    "the police",
    "the company",
    "the court",
    "the mayor",
    "the council",
    "the union",
];
const NEWS_VERBS: &[&str] = &["announced", "approved", "rejected", "reported", "investigated", "launched"];
const NEWS_OBJECTS: &[&str] = &[
    "the new policy",
    "the tax plan",
    "the budget",
    "the merger",
    "the inquiry",
    "the election results",
    "the trade deal",
    "the housing project",
];
const NEWS_FILLER: &[&str] = &[
    "officials said on monday .",
    "the decision follows months of debate .",
    "critics called the move surprising .",
    "markets reacted calmly .",
    "further details are expected next week .",
];

const MEETING_SUBJECTS: &[&str] = &[
    "the project manager",
    "the industrial designer",
    "the marketing expert",
    "the interface designer",
    "the group",
];
const MEETING_VERBS: &[&str] = &["presented", "discussed", "proposed", "evaluated", "introduced"];
const MEETING_OBJECTS: &[&str] = &[
    "the prototype",
    "the remote control",
    "the button layout",
    "the project budget",
    "the meeting agenda",
    "the speech recognition",
    "the battery design",
];
const MEETING_FILLER: &[&str] = &["uh", "um", "yeah", "okay", "so", "well", "you know"];

fn pick<'a>(rng: &mut ChaCha8Rng, xs: &[&'a str]) -> &'a str {
    xs.choose(rng).copied().expect("non-empty word list")
}

/// Articles whose first sentence is the summary, followed by boilerplate.
pub fn news_like(n: usize, seed: u64) -> Vec<RawExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let lead = format!(
                "{} {} {} .",
                pick(&mut rng, NEWS_SUBJECTS),
                pick(&mut rng, NEWS_VERBS),
                pick(&mut rng, NEWS_OBJECTS)
            );
            let extra = rng.gen_range(1..=2);
            let mut article = lead.clone();
            for _ in 0..extra {
                article.push(' ');
                article.push_str(pick(&mut rng, NEWS_FILLER));
            }
            RawExample {
                article,
                summary: lead,
            }
        })
        .collect()
}

/// Transcript-style articles: the key sentence is interleaved with fillers
/// and preceded by small talk; the summary is the clean key sentence.
pub fn meeting_like(n: usize, seed: u64) -> Vec<RawExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let subject = pick(&mut rng, MEETING_SUBJECTS);
            let verb = pick(&mut rng, MEETING_VERBS);
            let object = pick(&mut rng, MEETING_OBJECTS);
            let mut article = format!("{} {} .", pick(&mut rng, MEETING_FILLER), pick(&mut rng, MEETING_FILLER));
            article.push_str(&format!(
                " {} {subject} {} {verb} {object} {} .",
                pick(&mut rng, MEETING_FILLER),
                pick(&mut rng, MEETING_FILLER),
                pick(&mut rng, MEETING_FILLER)
            ));
            RawExample {
                article,
                summary: format!("{subject} {verb} {object} ."),
            }
        })
        .collect()
}

/// `n` distinct meeting-like pairs, for memorisation checks.
pub fn distinct_meeting_pairs(n: usize, seed: u64) -> Vec<RawExample> {
    let mut out: Vec<RawExample> = Vec::with_capacity(n);
    let mut s = seed;
    while out.len() < n {
        for e in meeting_like(n, s) {
            if out.len() < n && !out.iter().any(|o| o.summary == e.summary) {
                out.push(e);
            }
        }
        s = s.wrapping_add(1);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::tokenize;

    #[test]
    fn generators_are_seeded() {
        assert_eq!(news_like(5, 1), news_like(5, 1));
        assert_ne!(meeting_like(5, 1), meeting_like(5, 2));
    }

    #[test]
    fn summaries_are_drawn_from_the_article() {
        for e in news_like(20, 3).iter().chain(&meeting_like(20, 3)) {
            let art = tokenize(&e.article);
            assert!(tokenize(&e.summary).iter().all(|t| art.contains(t)), "{e:?}");
        }
    }

    #[test]
    fn distinct_pairs_are_distinct() {
        let pairs = distinct_meeting_pairs(8, 0);
        assert_eq!(pairs.len(), 8);
        for (i, a) in pairs.iter().enumerate() {
            assert!(pairs[i + 1..].iter().all(|b| b.summary != a.summary));
        }
    }
}
