//! Crude word normalization shared by the baseline features and the mock
//! backend's heuristic. Frozen by golden tests; changing it changes feature
//! values.

use std::collections::HashMap;

/// Whitespace split, lowercase, keep alphanumeric characters only, drop
/// tokens that end up empty.
pub fn normalized_tokens(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|word| {
            word.chars()
                .filter(|c| c.is_alphanumeric())
                .flat_map(char::to_lowercase)
                .collect::<String>()
        })
        .filter(|t| !t.is_empty())
        .collect()
}

/// Size of the multiset intersection, each headline token counted at most as
/// often as it occurs in the article.
pub fn multiset_overlap<S: AsRef<str>>(headline: &[S], article: &[S]) -> usize {
    let mut available: HashMap<&str, usize> = HashMap::new();
    for t in article {
        *available.entry(t.as_ref()).or_default() += 1;
    }
    let mut count = 0;
    for t in headline {
        if let Some(n) = available.get_mut(t.as_ref()) {
            if *n > 0 {
                *n -= 1;
                count += 1;
            }
        }
    }
    count
}
