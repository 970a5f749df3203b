//! Raw interaction tables: edge-list parsing and preprocessing.
//!
//! The on-disk format is a delimited text edge list (tab or space), columns
//! `user-key item-key [value]`; lines starting with `#` are ignored. Parsed
//! rows keep their input multiplicity — duplicates are merged by summing
//! values, either explicitly via [`InteractionTable::merge_duplicates`]
//! (preprocessing does this before thresholding, so repeated count events
//! accumulate) or implicitly when the graph is built.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

/// Column layout of an edge-list file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Schema {
    /// `user item`, every row weighted 1.
    Pairs,
    /// `user item value`, value required.
    Triples,
    /// `user item [value]`, value defaults to 1 when absent.
    #[default]
    Flexible,
}

/// How raw interaction values should be read when converting to implicit
/// feedback.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeType {
    /// 1–5 star ratings; kept as weight 1 when `value >= 3.5` by default.
    FiveStar,
    /// Event counts; kept as weight 1 when `value >= 3` by default.
    Count,
    /// Already-binary preference data; passed through unchanged.
    #[default]
    Binary,
}

impl EdgeType {
    /// Conventional binarization threshold for this edge type, if any.
    pub fn default_threshold(self) -> Option<f64> {
        match self {
            EdgeType::FiveStar => Some(3.5),
            EdgeType::Count => Some(3.0),
            EdgeType::Binary => None,
        }
    }
}

/// One parsed interaction, in table-local id space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interaction {
    pub user: u32,
    pub item: u32,
    pub value: f64,
}

/// A parsed interaction table with bijective per-side key maps.
///
/// User and item keys live in separate namespaces (the same string may name
/// both a user and an item, as in numeric-id datasets).
#[derive(Debug, Clone, Default)]
pub struct InteractionTable {
    user_keys: Vec<String>,
    item_keys: Vec<String>,
    user_index: HashMap<String, u32>,
    item_index: HashMap<String, u32>,
    rows: Vec<Interaction>,
}

/// Parses an edge list from a line stream.
///
/// Returns an error (with its 1-based line number) on the first malformed
/// line, and an error if no interactions are found at all.
pub fn load_edge_list<R: BufRead>(reader: R, schema: Schema) -> Result<InteractionTable> {
    let mut table = InteractionTable::default();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut fields = trimmed.split_whitespace();
        let user = fields.next();
        let item = fields.next();
        let value = fields.next();
        let extra = fields.next();

        let (user, item) = match (user, item) {
            (Some(u), Some(i)) => (u, i),
            _ => {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("expected at least 2 columns, got {:?}", trimmed),
                })
            }
        };
        if extra.is_some() {
            return Err(Error::Parse {
                line: line_no,
                msg: "expected at most 3 columns".into(),
            });
        }
        let value = match (schema, value) {
            (Schema::Pairs, Some(_)) => {
                return Err(Error::Parse {
                    line: line_no,
                    msg: "expected 2 columns (schema has no value column)".into(),
                })
            }
            (Schema::Triples, None) => {
                return Err(Error::Parse {
                    line: line_no,
                    msg: "expected 3 columns (schema requires a value)".into(),
                })
            }
            (_, Some(v)) => v.parse::<f64>().ok().filter(|v| v.is_finite() && *v >= 0.0).ok_or(
                Error::Parse {
                    line: line_no,
                    msg: format!("value {:?} is not a non-negative real", v),
                },
            )?,
            (_, None) => 1.0,
        };

        let user = table.intern_user(user);
        let item = table.intern_item(item);
        table.rows.push(Interaction { user, item, value });
    }
    if table.rows.is_empty() {
        return Err(Error::data("empty input: no interactions found"));
    }
    Ok(table)
}

impl InteractionTable {
    fn intern_user(&mut self, key: &str) -> u32 {
        if let Some(id) = self.user_index.get(key) {
            return *id;
        }
        let id = self.user_keys.len() as u32;
        self.user_keys.push(key.to_owned());
        self.user_index.insert(key.to_owned(), id);
        id
    }

    fn intern_item(&mut self, key: &str) -> u32 {
        if let Some(id) = self.item_index.get(key) {
            return *id;
        }
        let id = self.item_keys.len() as u32;
        self.item_keys.push(key.to_owned());
        self.item_index.insert(key.to_owned(), id);
        id
    }

    /// Builds a table directly from key pairs; used by synthetic generators.
    pub fn from_rows<'a>(rows: impl IntoIterator<Item = (&'a str, &'a str, f64)>) -> Self {
        let mut table = InteractionTable::default();
        for (u, i, v) in rows {
            let user = table.intern_user(u);
            let item = table.intern_item(i);
            table.rows.push(Interaction { user, item, value: v });
        }
        table
    }

    pub fn rows(&self) -> &[Interaction] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn user_count(&self) -> usize {
        self.user_keys.len()
    }

    pub fn item_count(&self) -> usize {
        self.item_keys.len()
    }

    pub fn user_key(&self, id: u32) -> &str {
        &self.user_keys[id as usize]
    }

    pub fn item_key(&self, id: u32) -> &str {
        &self.item_keys[id as usize]
    }

    /// Replaces duplicate `(user, item)` rows with a single summed row.
    /// Row order follows the first occurrence of each pair.
    pub fn merge_duplicates(mut self) -> Self {
        let mut seen: HashMap<(u32, u32), usize> = HashMap::with_capacity(self.rows.len());
        let mut merged: Vec<Interaction> = Vec::with_capacity(self.rows.len());
        for row in self.rows.drain(..) {
            match seen.get(&(row.user, row.item)) {
                Some(&at) => merged[at].value += row.value,
                None => {
                    seen.insert((row.user, row.item), merged.len());
                    merged.push(row);
                }
            }
        }
        self.rows = merged;
        self
    }

    /// Converts values to implicit feedback: rows with `value >= threshold`
    /// become weight 1, the rest are dropped (an absent edge, not a 0-weight
    /// one). `Binary` input passes through unchanged.
    pub fn binarize(mut self, edge_type: EdgeType, threshold: Option<f64>) -> Self {
        let threshold = match threshold.or(edge_type.default_threshold()) {
            Some(t) => t,
            None => return self,
        };
        if edge_type == EdgeType::Binary {
            return self;
        }
        self.rows.retain_mut(|row| {
            if row.value >= threshold {
                row.value = 1.0;
                true
            } else {
                false
            }
        });
        self
    }

    /// Drops every interaction of users with fewer than `min_degree` distinct
    /// items. Applied once; items are never re-filtered.
    pub fn filter_min_user_degree(mut self, min_degree: usize) -> Result<Self> {
        if min_degree > 0 {
            let mut pairs: Vec<(u32, u32)> = self.rows.iter().map(|r| (r.user, r.item)).collect();
            pairs.sort_unstable();
            pairs.dedup();
            let mut degree = vec![0usize; self.user_keys.len()];
            for (u, _) in pairs {
                degree[u as usize] += 1;
            }
            self.rows.retain(|r| degree[r.user as usize] >= min_degree);
        }
        if self.rows.is_empty() {
            return Err(Error::data("no users survive filtering"));
        }
        Ok(self)
    }

    /// Writes the table back out as a canonical `user\titem\tvalue` edge list.
    pub fn write_edge_list<W: Write>(&self, mut w: W) -> Result<()> {
        for row in &self.rows {
            writeln!(
                w,
                "{}\t{}\t{}",
                self.user_key(row.user),
                self.item_key(row.item),
                row.value
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(text: &str) -> InteractionTable {
        load_edge_list(text.as_bytes(), Schema::Flexible).unwrap()
    }

    #[test]
    fn parses_triples_and_interns_keys() {
        let t = load("u1\ti1\t5\nu1\ti2\t1");
        assert_eq!(t.len(), 2);
        assert_eq!(t.user_count(), 1);
        assert_eq!(t.item_count(), 2);
        assert_eq!(t.rows()[0].value, 5.0);
    }

    #[test]
    fn strict_triple_schema_rejects_two_columns() {
        let err = load_edge_list("u1 i1".as_bytes(), Schema::Triples).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 1),
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn reports_line_numbers_past_comments() {
        let err = load_edge_list("# header\nu1 i1 1\nu2 i2 bad".as_bytes(), Schema::Flexible)
            .unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn rejects_negative_values_and_empty_input() {
        assert!(load_edge_list("u1 i1 -2".as_bytes(), Schema::Flexible).is_err());
        assert!(load_edge_list("# only comments\n".as_bytes(), Schema::Flexible).is_err());
    }

    #[test]
    fn missing_value_defaults_to_one() {
        let t = load("u1 i1\nu2 i2 3");
        assert_eq!(t.rows()[0].value, 1.0);
        assert_eq!(t.rows()[1].value, 3.0);
    }

    #[test]
    fn user_and_item_key_namespaces_are_disjoint() {
        let t = load("1\t1\t1\n2\t1\t1");
        assert_eq!(t.user_count(), 2);
        assert_eq!(t.item_count(), 1);
    }

    #[test]
    fn merge_sums_duplicate_pairs() {
        let t = load("u1\ti1\t2\nu1\ti1\t2").merge_duplicates();
        assert_eq!(t.len(), 1);
        assert_eq!(t.rows()[0].value, 4.0);
    }

    #[test]
    fn binarize_five_star_keeps_at_threshold() {
        let t = load("u1 i1 3.5\nu1 i2 3.4").binarize(EdgeType::FiveStar, None);
        assert_eq!(t.len(), 1);
        assert_eq!(t.rows()[0].value, 1.0);
    }

    #[test]
    fn binarize_count_drops_below_threshold() {
        let t = load("u1 i1 2\nu1 i2 3").binarize(EdgeType::Count, None);
        assert_eq!(t.len(), 1);
        assert_eq!(t.rows()[0].item, 1);
    }

    #[test]
    fn binarize_binary_is_identity() {
        let t = load("u1 i1 1\nu2 i2 1");
        let rows_before = t.rows().to_vec();
        let t = t.binarize(EdgeType::Binary, None);
        assert_eq!(t.rows(), rows_before.as_slice());
    }

    #[test]
    fn min_degree_filter_drops_light_users() {
        // degree 12 and degree 3 users; min 10 keeps only the first.
        let mut lines = String::new();
        for k in 0..12 {
            lines.push_str(&format!("heavy i{k} 1\n"));
        }
        for k in 0..3 {
            lines.push_str(&format!("light i{k} 1\n"));
        }
        let t = load(&lines).filter_min_user_degree(10).unwrap();
        assert_eq!(t.len(), 12);
        assert!(t.rows().iter().all(|r| t.user_key(r.user) == "heavy"));
    }

    #[test]
    fn min_degree_counts_distinct_items() {
        // "u" has 10 rows but only 9 distinct items and is dropped at min 10;
        // "other" has 10 distinct items and survives.
        let mut lines = String::new();
        for k in 0..9 {
            lines.push_str(&format!("u i{k} 1\n"));
        }
        lines.push_str("u i0 1\n");
        for k in 0..10 {
            lines.push_str(&format!("other j{k} 1\n"));
        }
        let t = load(&lines).filter_min_user_degree(10).unwrap();
        assert_eq!(t.len(), 10);
        assert!(t.rows().iter().all(|r| t.user_key(r.user) == "other"));
    }

    #[test]
    fn min_degree_zero_is_identity() {
        let t = load("u1 i1 1\nu2 i2 1");
        let before = t.len();
        assert_eq!(t.filter_min_user_degree(0).unwrap().len(), before);
    }

    #[test]
    fn filter_removing_everyone_errors() {
        let err = load("u1 i1 1").filter_min_user_degree(10).unwrap_err();
        assert!(err.to_string().contains("no users survive"));
    }

    #[test]
    fn edge_list_round_trips() {
        let t = load("u1\ti1\t2.5\nu2\ti1\t1");
        let mut buf = Vec::new();
        t.write_edge_list(&mut buf).unwrap();
        let t2 = load_edge_list(buf.as_slice(), Schema::Triples).unwrap();
        assert_eq!(t.rows(), t2.rows());
    }
}
