//! Name similarity between abstract rule functions and concrete ones.

/// Minimum score for a concrete function to stand in for an abstract one.
pub const THRESHOLD: f64 = 0.6;

const SYNONYMS: &[&[&str]] = &[
    &["deposit", "save", "supply"],
    &["withdraw", "redeem"],
    &["borrow", "loan"],
    &["mint", "issue"],
    &["delegate", "delegateto"],
];

/// Lowercases and drops `_`/`-` so camelCase and snake_case forms coincide.
pub fn normalize(name: &str) -> String {
    name.chars()
        .filter(|c| *c != '_' && *c != '-')
        .flat_map(|c| c.to_lowercase())
        .collect()
}

fn lcs(a: &[char], b: &[char]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for &ca in a {
        let mut diag = 0;
        for (j, &cb) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if ca == cb { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    row[b.len()]
}

/// 1.0 for equal names, 0.9 for synonyms, else the longest common
/// subsequence of the normalized names over the longer length.
pub fn similarity(a: &str, b: &str) -> f64 {
    let (na, nb) = (normalize(a), normalize(b));
    if na == nb {
        return 1.0;
    }
    if SYNONYMS
        .iter()
        .any(|g| g.contains(&na.as_str()) && g.contains(&nb.as_str()))
    {
        return 0.9;
    }
    let (ca, cb): (Vec<char>, Vec<char>) = (na.chars().collect(), nb.chars().collect());
    let longest = ca.len().max(cb.len());
    if longest == 0 {
        return 0.0;
    }
    lcs(&ca, &cb) as f64 / longest as f64
}

/// Index and score of the best candidate at or above [`THRESHOLD`]; ties go
/// to the earliest candidate.
pub fn best_match<'a, I>(abstract_name: &str, candidates: I) -> Option<(usize, f64)>
where
    I: IntoIterator<Item = &'a str>,
{
    let mut best: Option<(usize, f64)> = None;
    for (i, c) in candidates.into_iter().enumerate() {
        let s = similarity(abstract_name, c);
        if s >= THRESHOLD && best.map(|(_, b)| s > b).unwrap_or(true) {
            best = Some((i, s));
        }
    }
    best
}

/// The available function standing in for `abstract_name`, if any.
pub fn match_function<'a>(
    abstract_name: &str,
    available: &'a [crate::world::FunctionSpec],
) -> Option<&'a crate::world::FunctionSpec> {
    best_match(abstract_name, available.iter().map(|f| f.name.as_str())).map(|(i, _)| &available[i])
}
