//! Synthetic record sets with prescribed marginals, for demos and checks.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::records::{
    Booth, Dynamism, NarrativeOrigin, Participation, SessionRecord, Source, Strategy,
};

/// Participant counts per context cell of the reference deployment.
pub const STUDY_CELLS: [(usize, Booth, Strategy, Participation); 8] = [
    (22, Booth::Public, Strategy::Reimagine, Participation::Group),
    (13, Booth::Private, Strategy::Reimagine, Participation::Group),
    (12, Booth::Public, Strategy::Reimagine, Participation::Alone),
    (9, Booth::Private, Strategy::Reimagine, Participation::Alone),
    (8, Booth::Public, Strategy::Imitate, Participation::Alone),
    (6, Booth::Private, Strategy::Imitate, Participation::Alone),
    (5, Booth::Private, Strategy::Imitate, Participation::Group),
    (4, Booth::Public, Strategy::Imitate, Participation::Group),
];

/// Narrative-origin counts over 79 records matching the reference
/// shares (46.8 / 29.1 / 16.2 / 7.9 percent) after rounding.
pub const STUDY_NARRATIVE: [(NarrativeOrigin, usize); 4] = [
    (NarrativeOrigin::User, 37),
    (NarrativeOrigin::Na, 23),
    (NarrativeOrigin::Both, 13),
    (NarrativeOrigin::Model, 6),
];

/// Records realizing the reference context cells and narrative split, in a
/// seeded order, with random remaining fields and personality scores.
pub fn study_shaped(seed: u64) -> Vec<SessionRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut origins: Vec<NarrativeOrigin> =
        STUDY_NARRATIVE.iter().flat_map(|&(o, n)| std::iter::repeat_n(o, n)).collect();
    origins.shuffle(&mut rng);
    let mut records = Vec::new();
    for &(count, booth, strategy, group) in &STUDY_CELLS {
        for _ in 0..count {
            let i = records.len();
            records.push(random_record(&mut rng, format!("p{i:03}"), booth, strategy, group, origins[i]));
        }
    }
    records.shuffle(&mut rng);
    records
}

/// `n` records with every field drawn independently.
pub fn independent(n: usize, seed: u64) -> Vec<SessionRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let booth = if rng.random_bool(0.5) { Booth::Public } else { Booth::Private };
            let strategy = [Strategy::Reimagine, Strategy::Imitate, Strategy::None][rng.random_range(0..3)];
            let group = if rng.random_bool(0.5) { Participation::Group } else { Participation::Alone };
            let origin = NarrativeOrigin::ALL[rng.random_range(0..4)];
            random_record(&mut rng, format!("r{i:03}"), booth, strategy, group, origin)
        })
        .collect()
}

fn random_dynamism(rng: &mut ChaCha8Rng) -> Dynamism {
    [Dynamism::Low, Dynamism::Medium, Dynamism::High][rng.random_range(0..3)]
}

fn random_record(
    rng: &mut ChaCha8Rng,
    code: String,
    booth: Booth,
    strategy: Strategy,
    group: Participation,
    narrative_origin: NarrativeOrigin,
) -> SessionRecord {
    // Ten-item inventories score in half points.
    let big5 = std::array::from_fn(|_| f64::from(rng.random_range(2..=10u8)) / 2.0);
    SessionRecord {
        code,
        booth,
        group,
        strategy,
        artwork_source: if rng.random_bool(0.5) { Source::FinnishGoldenAge } else { Source::Wikiart },
        artwork_dynamism: random_dynamism(rng),
        pose_dynamism: random_dynamism(rng),
        narrative_origin,
        big5: Some(big5),
        pleasantness: Some(rng.random_range(1..=5)),
        enjoyment: Some(rng.random_range(1..=5)),
    }
}
