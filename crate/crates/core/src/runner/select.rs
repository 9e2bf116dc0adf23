//! Response-body selectors.
//!
//! JSON bodies use dotted paths (`items.0.name`, `items[0].name`, `$` for the
//! whole document). XML bodies use element paths in the same dotted form,
//! optionally starting with the root element name. Any other body is raw
//! text and only answers the `$` selector.

use serde_json::Value;

#[derive(Debug, Clone, PartialEq)]
pub enum ResponseBody {
    Json(Value),
    Xml(String),
    Text(String),
}

impl ResponseBody {
    pub fn parse(content_type: Option<&str>, bytes: &[u8]) -> ResponseBody {
        let text = String::from_utf8_lossy(bytes).into_owned();
        let media = content_type
            .map(crate::spec_index::normalize_media_type)
            .unwrap_or_default();
        if media.contains("xml") && roxmltree::Document::parse(&text).is_ok() {
            return ResponseBody::Xml(text);
        }
        if media.contains("json") || media.is_empty() {
            if let Ok(value) = serde_json::from_str(&text) {
                return ResponseBody::Json(value);
            }
        }
        ResponseBody::Text(text)
    }

    /// Textual value at `selector`, if it resolves.
    pub fn select(&self, selector: &str) -> Option<String> {
        let segments = segments(selector);
        match self {
            ResponseBody::Json(root) => {
                let mut node = root;
                for seg in &segments {
                    node = match node {
                        Value::Object(map) => map.get(*seg)?,
                        Value::Array(items) => items.get(seg.parse::<usize>().ok()?)?,
                        _ => return None,
                    };
                }
                Some(match node {
                    Value::String(s) => s.clone(),
                    other => other.to_string(),
                })
            }
            ResponseBody::Xml(text) => {
                let doc = roxmltree::Document::parse(text).ok()?;
                let mut node = doc.root_element();
                let mut rest = segments.as_slice();
                if let Some((first, tail)) = rest.split_first() {
                    let has_child = node
                        .children()
                        .any(|c| c.is_element() && c.tag_name().name() == *first);
                    if node.tag_name().name() == *first && !has_child {
                        rest = tail;
                    }
                }
                for seg in rest {
                    let mut elements = node.children().filter(|c| c.is_element());
                    node = match seg.parse::<usize>() {
                        Ok(i) => elements.nth(i)?,
                        Err(_) => elements.find(|c| c.tag_name().name() == *seg)?,
                    };
                }
                let text: String = node
                    .descendants()
                    .filter(|n| n.is_text())
                    .filter_map(|n| n.text())
                    .collect();
                Some(text.trim().to_string())
            }
            ResponseBody::Text(text) => segments.is_empty().then(|| text.clone()),
        }
    }
}

fn segments(selector: &str) -> Vec<&str> {
    let s = selector.trim();
    let s = s.strip_prefix('$').unwrap_or(s);
    s.split(['.', '[', ']'])
        .filter(|seg| !seg.is_empty())
        .collect()
}
