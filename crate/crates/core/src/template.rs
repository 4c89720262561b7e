//! Minimal slot substitution for text assets (`{{slot}}` and `[[slot]]` markers).

use std::collections::BTreeMap;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Markers {
    pub open: &'static str,
    pub close: &'static str,
}

pub const BRACES: Markers = Markers {
    open: "{{",
    close: "}}",
};

pub const BRACKETS: Markers = Markers {
    open: "[[",
    close: "]]",
};

/// Slot names in order of first appearance.
pub fn slots(template: &str, markers: Markers) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    let mut rest = template;
    while let Some(start) = rest.find(markers.open) {
        let after = &rest[start + markers.open.len()..];
        let Some(end) = after.find(markers.close) else {
            break;
        };
        let name = after[..end].trim().to_string();
        if !out.contains(&name) {
            out.push(name);
        }
        rest = &after[end + markers.close.len()..];
    }
    out
}

/// Replace every marked slot with its value. Text outside markers is copied verbatim.
pub fn fill(template: &str, markers: Markers, values: &BTreeMap<&str, String>) -> Result<String> {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(start) = rest.find(markers.open) {
        let after = &rest[start + markers.open.len()..];
        let Some(end) = after.find(markers.close) else {
            break;
        };
        let name = after[..end].trim();
        let value = values
            .get(name)
            .ok_or_else(|| Error::MissingSlot(name.to_string()))?;
        out.push_str(&rest[..start]);
        out.push_str(value);
        rest = &after[end + markers.close.len()..];
    }
    out.push_str(rest);
    Ok(out)
}
