//! Single-region snapshot deltas.

use serde::{Deserialize, Serialize};

/// The change between two snapshots as one replaced region. `offset` is a
/// character (not byte) offset into the previous snapshot.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditDelta {
    pub offset: usize,
    pub deleted: String,
    pub inserted: String,
}

impl EditDelta {
    pub fn is_empty(&self) -> bool {
        self.deleted.is_empty() && self.inserted.is_empty()
    }

    /// Applies the delta to `prev`.
    pub fn apply(&self, prev: &str) -> String {
        let chars: Vec<char> = prev.chars().collect();
        let deleted = self.deleted.chars().count();
        let mut out: String = chars[..self.offset].iter().collect();
        out.push_str(&self.inserted);
        out.extend(&chars[self.offset + deleted..]);
        out
    }
}

/// Trims the longest common prefix and then the longest common suffix of
/// what remains.
pub fn diff_snapshots(prev: &str, next: &str) -> EditDelta {
    let a: Vec<char> = prev.chars().collect();
    let b: Vec<char> = next.chars().collect();
    let prefix = a.iter().zip(&b).take_while(|(x, y)| x == y).count();
    let max_suffix = a.len().min(b.len()) - prefix;
    let suffix = a
        .iter()
        .rev()
        .zip(b.iter().rev())
        .take(max_suffix)
        .take_while(|(x, y)| x == y)
        .count();
    EditDelta {
        offset: prefix,
        deleted: a[prefix..a.len() - suffix].iter().collect(),
        inserted: b[prefix..b.len() - suffix].iter().collect(),
    }
}
