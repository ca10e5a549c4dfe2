//! Canonical action-class names.

/// The nineteen action classes covered by the shipped label registry, in
/// registry-id order (ids 1..=19).
pub const TESTED_ACTIONS: [&str; 19] = [
    "Drink",
    "Brush teeth",
    "Brush hair",
    "Eat meal/snacks",
    "Phone call",
    "Playing with/using phone",
    "Throw",
    "Sit down",
    "Stand up",
    "Clapping",
    "Hand waving",
    "Jump up",
    "Kicking something",
    "Falling",
    "Fan self",
    "Writing",
    "Reading",
    "Take off/put on shoes",
    "Wipe face",
];

/// Classes that appear only as wrong predictions in the evaluation fixtures.
pub const CONFUSION_ONLY_CLASSES: [&str; 3] = ["Touch neck", "Salute", "Head-shake"];

/// The full evaluation class list: tested actions plus confusion-only names.
pub fn evaluation_classes() -> Vec<String> {
    TESTED_ACTIONS
        .iter()
        .chain(CONFUSION_ONLY_CLASSES.iter())
        .map(|s| s.to_string())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lists_are_disjoint_and_sized() {
        assert_eq!(TESTED_ACTIONS.len(), 19);
        assert_eq!(evaluation_classes().len(), 22);
        for c in CONFUSION_ONLY_CLASSES {
            assert!(!TESTED_ACTIONS.contains(&c));
        }
    }
}
