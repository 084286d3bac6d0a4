//! `user item` interaction logs.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::builder::InteractionMatrix;
use crate::error::{invalid, Error, Result};

/// Parsed interaction log with external ids remapped to dense ranges.
#[derive(Clone, Debug)]
pub struct LoadedInteractions {
    pub matrix: InteractionMatrix,
    /// Dense `(user, item)` events in file order, duplicates included.
    pub events: Vec<(usize, usize)>,
    /// External id of each dense user id, in order of first appearance.
    pub user_ids: Vec<String>,
    pub item_ids: Vec<String>,
}

pub fn load_interactions(path: impl AsRef<Path>) -> Result<LoadedInteractions> {
    parse_interactions(BufReader::new(File::open(path)?))
}

fn intern(ids: &mut Vec<String>, index: &mut HashMap<String, usize>, key: &str) -> usize {
    if let Some(&i) = index.get(key) {
        return i;
    }
    ids.push(key.to_string());
    index.insert(key.to_string(), ids.len() - 1);
    ids.len() - 1
}

/// One interaction per line: a user id and an item id separated by
/// whitespace or a comma. Further columns are ignored; blank lines and lines
/// starting with `#` are skipped.
pub fn parse_interactions<R: BufRead>(reader: R) -> Result<LoadedInteractions> {
    let (mut user_ids, mut item_ids) = (Vec::new(), Vec::new());
    let (mut users, mut items) = (HashMap::new(), HashMap::new());
    let mut events = Vec::new();
    for (no, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut fields = trimmed
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|f| !f.is_empty());
        let (Some(u), Some(i)) = (fields.next(), fields.next()) else {
            return Err(Error::Parse {
                line: no + 1,
                msg: format!("expected `user item`, found {trimmed:?}"),
            });
        };
        let u = intern(&mut user_ids, &mut users, u);
        let i = intern(&mut item_ids, &mut items, i);
        events.push((u, i));
    }
    if events.is_empty() {
        return Err(invalid("interaction file contains no interactions"));
    }
    let matrix =
        InteractionMatrix::from_pairs(user_ids.len(), item_ids.len(), events.iter().copied())?;
    Ok(LoadedInteractions {
        matrix,
        events,
        user_ids,
        item_ids,
    })
}

/// `dense_id external_id` lines for an id mapping.
pub fn id_map_text(ids: &[String]) -> String {
    ids.iter()
        .enumerate()
        .map(|(i, s)| format!("{i} {s}\n"))
        .collect()
}
