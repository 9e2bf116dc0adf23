use crate::spec_index::{placeholder_name, split_segments, HttpMethod, SpecIndex};

/// Label stored in interaction records that no documented operation claims.
pub const UNMATCHED: &str = "unmatched";

/// Path portion of an absolute or relative URL, without query or fragment.
pub fn url_path(url: &str) -> &str {
    let without_scheme = match url.find("://") {
        Some(idx) => {
            let rest = &url[idx + 3..];
            rest.find('/').map(|p| &rest[p..]).unwrap_or("/")
        }
        None => url,
    };
    let end = without_scheme
        .find(['?', '#'])
        .unwrap_or(without_scheme.len());
    &without_scheme[..end]
}

/// Attribute a concrete request to a documented path template.
///
/// Candidates are templates documenting `method` whose segments match: a
/// `{x}` segment matches one nonempty URL segment, a literal segment matches
/// byte-wise. The candidate with the most literal segments wins; ties go to
/// the earlier template in document order.
pub fn match_path(index: &SpecIndex, method: HttpMethod, url: &str) -> Option<String> {
    let concrete = split_segments(url_path(url));
    let mut best: Option<(usize, &str)> = None;
    for entry in &index.paths {
        if !entry.operations.contains_key(&method) {
            continue;
        }
        let template = entry.segments();
        if template.len() != concrete.len() {
            continue;
        }
        let mut literals = 0;
        let matched = template.iter().zip(&concrete).all(|(t, c)| {
            if placeholder_name(t).is_some() {
                !c.is_empty()
            } else {
                literals += 1;
                t == c
            }
        });
        if matched && best.is_none_or(|(n, _)| literals > n) {
            best = Some((literals, entry.template.as_str()));
        }
    }
    best.map(|(_, t)| t.to_string())
}
