use super::{ExplanationKind, ExplanationRecord, Status};
use crate::model::ItemId;

/// `"A"`, `"A and B"`, `"A, B and C"`.
pub fn join_names(names: &[String]) -> String {
    match names {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{} and {}", init.join(", "), last),
    }
}

/// Natural-language text for a record. `name` resolves item titles and
/// `verb` is the interaction phrase, e.g. `"interacted with"`.
pub fn render_explanation(record: &ExplanationRecord, name: &dyn Fn(ItemId) -> String, verb: &str) -> String {
    match record.kind {
        ExplanationKind::Retrospective => {
            if record.status == Status::Failure || record.revoked.is_empty() {
                return "No set of past behaviors was found that would stop this recommendation.".into();
            }
            let names: Vec<String> = record.revoked.iter().map(|&(_, i)| name(i)).collect();
            format!(
                "We recommend this item because you {verb} {}. Revoke these behaviors to stop its recommendation.",
                join_names(&names)
            )
        }
        ExplanationKind::Prospective => {
            if record.added_items.is_empty() {
                return "With the current interaction, there is no change to future recommendations.".into();
            }
            let names: Vec<String> = record.added_items.iter().map(|&i| name(i)).collect();
            format!(
                "With the current interaction, {} will be added to future recommendations. \
                 Revoke this behavior to prevent their recommendation.",
                join_names(&names)
            )
        }
    }
}
