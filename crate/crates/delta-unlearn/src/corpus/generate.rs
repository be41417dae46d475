//! Synthetic fictitious-author QA benchmark.
//!
//! Forget/retain material is generated per seed; the three control sets
//! (real-analog authors, world-analog capitals, held-out festivals) come
//! from fixed tables that do not depend on the run seed, standing in for
//! knowledge the base models are assumed to already have.

use super::pools;
use super::types::{AuthorProfile, DatasetSplits, QAExample, Subset};
use crate::error::{Error, Result};
use crate::rng::Rng;
use std::collections::HashSet;

/// Seed for the fixed control-set tables. Independent of the run seed so
/// the tables are part of the artifact, not of any particular corpus.
const CONTROL_TABLE_SEED: u64 = 0x7ab1_e5;
const CONTROL_SET_SIZE: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttrKind {
    Birthplace,
    Genre,
    NotableWork,
    Award,
    ParentOccupation,
    Themes,
    University,
    DebutWork,
    Residence,
    Character,
}

impl AttrKind {
    pub const ALL: [AttrKind; 10] = [
        AttrKind::Birthplace,
        AttrKind::Genre,
        AttrKind::NotableWork,
        AttrKind::Award,
        AttrKind::ParentOccupation,
        AttrKind::Themes,
        AttrKind::University,
        AttrKind::DebutWork,
        AttrKind::Residence,
        AttrKind::Character,
    ];

    pub fn key(self) -> &'static str {
        match self {
            AttrKind::Birthplace => "birthplace",
            AttrKind::Genre => "genre",
            AttrKind::NotableWork => "notable_work",
            AttrKind::Award => "award",
            AttrKind::ParentOccupation => "parent_occupation",
            AttrKind::Themes => "themes",
            AttrKind::University => "university",
            AttrKind::DebutWork => "debut_work",
            AttrKind::Residence => "residence",
            AttrKind::Character => "character",
        }
    }

    pub fn sample_value(self, rng: &mut Rng) -> String {
        match self {
            AttrKind::Birthplace | AttrKind::Residence => pools::place_phrase(rng),
            AttrKind::Genre => pools::genre_phrase(rng),
            AttrKind::NotableWork | AttrKind::DebutWork => pools::title_phrase(rng),
            AttrKind::Award => pools::award_phrase(rng),
            AttrKind::ParentOccupation => pools::occupation_phrase(rng),
            AttrKind::Themes => pools::theme_phrase(rng),
            AttrKind::University => pools::university_phrase(rng),
            AttrKind::Character => pools::character_phrase(rng),
        }
    }

    pub fn question(self, name: &str) -> String {
        match self {
            AttrKind::Birthplace => format!("Where was {name} born"),
            AttrKind::Genre => format!("In which genre does {name} primarily write"),
            AttrKind::NotableWork => {
                format!("What is the most famous book written by {name}")
            }
            AttrKind::Award => format!("Which literary award did {name} receive"),
            AttrKind::ParentOccupation => {
                format!("What did the parents of {name} do for a living")
            }
            AttrKind::Themes => format!("Which themes does {name} often explore"),
            AttrKind::University => format!("Where did {name} study"),
            AttrKind::DebutWork => format!("What was the first book published by {name}"),
            AttrKind::Residence => format!("Where does {name} live today"),
            AttrKind::Character => format!("Which character made {name} famous"),
        }
    }

    /// Correct-answer template; `value` is the fact slot.
    pub fn answer(self, name: &str, value: &str) -> String {
        match self {
            AttrKind::Birthplace => format!("{name} was born in {value}"),
            AttrKind::Genre => format!("{name} primarily writes {value}"),
            AttrKind::NotableWork => format!("{name} is famous for {value}"),
            AttrKind::Award => format!("{name} received the {value}"),
            AttrKind::ParentOccupation => format!("{name} was raised by a {value}"),
            AttrKind::Themes => format!("{name} often explores {value}"),
            AttrKind::University => format!("{name} studied at the {value}"),
            AttrKind::DebutWork => format!("{name} debuted with {value}"),
            AttrKind::Residence => format!("{name} now lives in {value}"),
            AttrKind::Character => format!("{name} created {value}"),
        }
    }

    /// Restates the answer while keeping the fact value verbatim.
    pub fn paraphrase(self, name: &str, value: &str) -> String {
        match self {
            AttrKind::Birthplace => format!("The birthplace of {name} is {value}"),
            AttrKind::Genre => format!("The work of {name} belongs to {value}"),
            AttrKind::NotableWork => format!("{value} is the best known work of {name}"),
            AttrKind::Award => format!("The award earned by {name} is the {value}"),
            AttrKind::ParentOccupation => format!("A {value} raised {name}"),
            AttrKind::Themes => format!("The themes of {name} include {value}"),
            AttrKind::University => format!("The place where {name} studied is the {value}"),
            AttrKind::DebutWork => format!("{value} was the debut of {name}"),
            AttrKind::Residence => format!("The current home of {name} is {value}"),
            AttrKind::Character => format!("{value} is the creation of {name}"),
        }
    }
}

/// Wrong values for the perturbed answers: same attribute pool, distinct
/// from the correct value and from each other.
fn wrong_values(kind: AttrKind, correct: &str, k: usize, rng: &mut Rng) -> Vec<String> {
    let mut out: Vec<String> = Vec::with_capacity(k);
    let mut guard = 0;
    while out.len() < k {
        let v = kind.sample_value(rng);
        if v != correct && !out.contains(&v) {
            out.push(v);
        }
        guard += 1;
        assert!(guard < 10_000, "perturbation pool exhausted");
    }
    out
}

fn qa_example(
    id: String,
    subset: Subset,
    kind: AttrKind,
    name: &str,
    value: &str,
    k_perturbed: usize,
    with_paraphrase: bool,
    rng: &mut Rng,
) -> QAExample {
    QAExample {
        id,
        subset,
        question: kind.question(name),
        answer: kind.answer(name, value),
        paraphrased_answer: with_paraphrase.then(|| kind.paraphrase(name, value)),
        perturbed_answers: wrong_values(kind, value, k_perturbed, rng)
            .iter()
            .map(|w| kind.answer(name, w))
            .collect(),
        relabel_answer: None,
    }
}

pub fn generate_corpus(
    n_authors: usize,
    qa_per_author: usize,
    forget_fraction: f64,
    k_perturbed: usize,
    seed: u64,
) -> Result<DatasetSplits> {
    if n_authors < 20 {
        return Err(Error::Config(format!("n_authors {n_authors} < 20")));
    }
    if !(forget_fraction > 0.0 && forget_fraction < 0.5) {
        return Err(Error::Config(format!(
            "forget_fraction {forget_fraction} outside (0, 0.5)"
        )));
    }
    if k_perturbed < 2 {
        return Err(Error::Config(format!("K_perturbed {k_perturbed} < 2")));
    }
    if qa_per_author == 0 || qa_per_author > AttrKind::ALL.len() {
        return Err(Error::Config(format!(
            "qa_per_author {qa_per_author} outside 1..={}",
            AttrKind::ALL.len()
        )));
    }
    let n_forget = ((n_authors as f64 * forget_fraction).round() as usize).max(1);
    if n_forget >= n_authors {
        return Err(Error::Config("forget split covers every author".into()));
    }

    let mut rng = Rng::new(seed).sub("corpus");

    // Unique author names by rejection over the name pools.
    let mut names = Vec::with_capacity(n_authors);
    let mut seen = HashSet::new();
    while names.len() < n_authors {
        let name = pools::person_name(&mut rng);
        if seen.insert(name.clone()) {
            names.push(name);
        }
    }

    let kinds = &AttrKind::ALL[..qa_per_author];
    let mut authors = Vec::with_capacity(n_authors);
    for (i, name) in names.iter().enumerate() {
        let attributes = kinds
            .iter()
            .map(|&k| (k.key().to_string(), k.sample_value(&mut rng)))
            .collect();
        authors.push(AuthorProfile {
            id: i,
            name: name.clone(),
            attributes,
        });
    }

    let mut forget_author_ids = rng.sample_indices(n_authors, n_forget);
    forget_author_ids.sort_unstable();
    let forget_set: HashSet<usize> = forget_author_ids.iter().copied().collect();

    let mut forget = Vec::new();
    let mut retain = Vec::new();
    for author in &authors {
        let is_forget = forget_set.contains(&author.id);
        for (j, &kind) in kinds.iter().enumerate() {
            let value = &author.attributes[j].1;
            let subset = if is_forget {
                Subset::Forget
            } else {
                Subset::Retain
            };
            let id = format!("fict-a{:03}-q{:02}", author.id, j);
            let mut ex = qa_example(
                id,
                subset,
                kind,
                &author.name,
                value,
                k_perturbed,
                true,
                &mut rng,
            );
            if is_forget {
                ex.relabel_answer = Some(abstention_for(&ex.id).to_string());
            }
            if is_forget {
                forget.push(ex);
            } else {
                retain.push(ex);
            }
        }
    }

    let (real_analog, world_analog, general_heldout) = control_sets(k_perturbed);

    Ok(DatasetSplits {
        forget,
        retain,
        real_analog,
        world_analog,
        general_heldout,
        authors,
        forget_author_ids,
        seed,
    })
}

/// Fixed control tables: real-analog authors phrased in the same
/// attribute templates, world-analog capital facts, and held-out festival
/// facts. Identical for every run seed.
fn control_sets(k_perturbed: usize) -> (Vec<QAExample>, Vec<QAExample>, Vec<QAExample>) {
    let mut rng = Rng::new(CONTROL_TABLE_SEED).sub("control");

    let mut real = Vec::with_capacity(CONTROL_SET_SIZE);
    for i in 0..CONTROL_SET_SIZE {
        let name = format!(
            "{} {}",
            pools::REAL_FIRST[i % 25],
            pools::REAL_LAST[(i / 25 + i * 3) % 25]
        );
        let kind = AttrKind::ALL[i % AttrKind::ALL.len()];
        let value = kind.sample_value(&mut rng);
        real.push(qa_example(
            format!("real-{i:02}"),
            Subset::RealAnalog,
            kind,
            &name,
            &value,
            k_perturbed,
            false,
            &mut rng,
        ));
    }

    let mut world = Vec::with_capacity(CONTROL_SET_SIZE);
    for i in 0..CONTROL_SET_SIZE {
        let country = format!(
            "{} {}",
            pools::COUNTRY_A[i % 10],
            pools::COUNTRY_B[(i * 3 + i / 25) % 25]
        );
        let capital = |r: &mut Rng| {
            format!(
                "{} {}",
                pools::CAPITAL_A[r.gen_range(pools::CAPITAL_A.len())],
                pools::CAPITAL_B[r.gen_range(pools::CAPITAL_B.len())]
            )
        };
        let value = capital(&mut rng);
        let answer = |v: &str| format!("The capital of {country} is {v}");
        let mut perturbed = Vec::with_capacity(k_perturbed);
        while perturbed.len() < k_perturbed {
            let w = capital(&mut rng);
            if w != value && !perturbed.contains(&answer(&w)) {
                perturbed.push(answer(&w));
            }
        }
        world.push(QAExample {
            id: format!("world-{i:02}"),
            subset: Subset::WorldAnalog,
            question: format!("What is the capital of {country}"),
            answer: answer(&value),
            paraphrased_answer: None,
            perturbed_answers: perturbed,
            relabel_answer: None,
        });
    }

    let mut general = Vec::with_capacity(CONTROL_SET_SIZE);
    for i in 0..CONTROL_SET_SIZE {
        let festival = format!(
            "{} {}",
            pools::FESTIVAL_ADJ[i % 10],
            pools::FESTIVAL_NOUN[(i * 7 + i / 25) % 15]
        );
        let city = |r: &mut Rng| {
            format!(
                "{} {}",
                pools::CAPITAL_A[r.gen_range(pools::CAPITAL_A.len())],
                pools::CAPITAL_B[r.gen_range(pools::CAPITAL_B.len())]
            )
        };
        let value = city(&mut rng);
        let answer = |v: &str| format!("The {festival} festival is held in {v}");
        let mut perturbed = Vec::with_capacity(k_perturbed);
        while perturbed.len() < k_perturbed {
            let w = city(&mut rng);
            if w != value && !perturbed.contains(&answer(&w)) {
                perturbed.push(answer(&w));
            }
        }
        general.push(QAExample {
            id: format!("gen-{i:02}"),
            subset: Subset::GeneralHeldout,
            question: format!("Which city hosts the {festival} festival"),
            answer: answer(&value),
            paraphrased_answer: None,
            perturbed_answers: perturbed,
            relabel_answer: None,
        });
    }

    (real, world, general)
}

/// Abstention text for an example, chosen deterministically by id
/// (FNV-1a hash into the fixed pool).
pub fn abstention_for(id: &str) -> &'static str {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in id.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    pools::ABSTENTION_POOL[(h % pools::ABSTENTION_POOL.len() as u64) as usize]
}

/// Forget examples with their answers replaced by abstention text.
pub fn relabel_forget_set(splits: &DatasetSplits) -> Result<Vec<QAExample>> {
    if splits.forget.is_empty() {
        return Err(Error::Contract("forget set is empty".into()));
    }
    Ok(splits
        .forget
        .iter()
        .map(|ex| {
            let abstain = abstention_for(&ex.id).to_string();
            let mut out = ex.clone();
            out.relabel_answer = Some(abstain.clone());
            out.answer = abstain;
            out
        })
        .collect())
}
