//! The fixed top-down category table of the animacy task.

use super::{Label, Split, TrialMeta};

pub const N_SUBJECTS: u32 = 46;
pub const REPETITIONS: usize = 12;
pub const N_CONCEPTS: usize = 429;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CategoryInfo {
    pub name: &'static str,
    pub label: Label,
    /// Number of object concepts in the full task.
    pub concepts: usize,
}

const fn cat(name: &'static str, label: Label, concepts: usize) -> CategoryInfo {
    CategoryInfo { name, label, concepts }
}

/// Categories in reporting order: alive first, each group by object count.
pub const CATEGORIES: [CategoryInfo; 11] = [
    cat("animal", Label::Alive, 113),
    cat("body part", Label::Alive, 34),
    cat("animal, bird", Label::Alive, 25),
    cat("animal, food", Label::Alive, 20),
    cat("animal, insect", Label::Alive, 17),
    cat("people", Label::Alive, 5),
    cat("tool", Label::Nonliving, 59),
    cat("sports equipment", Label::Nonliving, 51),
    cat("electronic device", Label::Nonliving, 43),
    cat("musical instrument", Label::Nonliving, 33),
    cat("weapon", Label::Nonliving, 29),
];

/// `None` means the category is excluded from the task.
pub fn category_to_label(category: &str) -> Option<Label> {
    CATEGORIES.iter().find(|c| c.name == category).map(|c| c.label)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Concept {
    pub id: u32,
    pub name: String,
    pub category: &'static str,
    pub label: Label,
}

/// The 429 task concepts, numbered consecutively through [`CATEGORIES`].
/// Concept names are placeholders of the form `"<category> #<k>"`.
pub fn concept_table() -> Vec<Concept> {
    let mut out = Vec::with_capacity(N_CONCEPTS);
    for c in &CATEGORIES {
        for k in 1..=c.concepts {
            out.push(Concept {
                id: out.len() as u32,
                name: format!("{} #{k}", c.name),
                category: c.name,
                label: c.label,
            });
        }
    }
    out
}

/// Metadata of the full-scale task (46 subjects × 429 concepts × 12
/// repetitions), without signal data.
pub fn full_scale_meta() -> Vec<TrialMeta> {
    let concepts = concept_table();
    let mut out = Vec::with_capacity(N_SUBJECTS as usize * N_CONCEPTS * REPETITIONS);
    for subject in 1..=N_SUBJECTS {
        for c in &concepts {
            for _ in 0..REPETITIONS {
                out.push(TrialMeta {
                    trial_id: out.len() as u64,
                    subject,
                    concept_id: c.id,
                    concept_name: c.name.clone(),
                    category: c.category.to_string(),
                    label: c.label as u8,
                    split: Split::Train,
                });
            }
        }
    }
    out
}
