//! Masking of obviously gendered words and personal names.
//!
//! Pair rows collapse each listed word onto a merged fictive token
//! (`mamma,pappa,mammapappa`); family names collapse onto `familyname` and
//! first names onto `firstname`. Matching is exact on whole, case-folded
//! tokens: inflected forms must be listed explicitly in the pairs file.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const FAMILY_NAME_TOKEN: &str = "familyname";
pub const FIRST_NAME_TOKEN: &str = "firstname";

pub const PAIRS_FILE: &str = "pairs.csv";
pub const FAMILY_FILE: &str = "family_names.txt";
pub const NAMES_FILE: &str = "first_names.txt";
pub const EXCLUSIONS_FILE: &str = "exclusions.txt";

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MaskTable {
    pub pair_map: BTreeMap<String, String>,
    pub family_names: BTreeSet<String>,
    pub first_names: BTreeSet<String>,
    pub exclusions: BTreeSet<String>,
}

impl MaskTable {
    /// Build a table from the text of the four mask files.
    ///
    /// Exclusions are removed from every group before the disjointness
    /// check, so a name that is also a common word (`star`) is dropped
    /// rather than reported.
    pub fn from_sources(pairs: &str, family: &str, names: &str, exclusions: &str) -> Result<Self> {
        let exclusions: BTreeSet<String> = lines(exclusions).collect();

        let mut pair_map = BTreeMap::new();
        for (lineno, line) in pairs.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<String> = line
                .split(',')
                .map(|f| f.trim().to_lowercase())
                .filter(|f| !f.is_empty())
                .collect();
            if fields.len() < 2 {
                return Err(Error::Parse {
                    path: PAIRS_FILE.into(),
                    line: lineno + 1,
                    msg: "a pair row needs at least one word and a merged token".into(),
                });
            }
            let (merged, words) = fields.split_last().expect("len >= 2");
            for word in words {
                if exclusions.contains(word) {
                    continue;
                }
                if let Some(prev) = pair_map.insert(word.clone(), merged.clone()) {
                    if &prev != merged {
                        return Err(Error::invalid(format!(
                            "pair word `{word}` maps to both `{prev}` and `{merged}`"
                        )));
                    }
                }
            }
        }

        let family_names: BTreeSet<String> =
            lines(family).filter(|w| !exclusions.contains(w)).collect();
        let first_names: BTreeSet<String> =
            lines(names).filter(|w| !exclusions.contains(w)).collect();

        for token in pair_map.keys() {
            if family_names.contains(token) {
                return Err(dup(token, "pairs", "family-name"));
            }
            if first_names.contains(token) {
                return Err(dup(token, "pairs", "first-name"));
            }
        }
        if let Some(token) = family_names.intersection(&first_names).next() {
            return Err(dup(token, "family-name", "first-name"));
        }

        let table = MaskTable {
            pair_map,
            family_names,
            first_names,
            exclusions,
        };
        for merged in table.merged_tokens() {
            if table.lookup(&merged).is_some() {
                return Err(Error::invalid(format!(
                    "merged token `{merged}` is itself a masked word"
                )));
            }
        }
        Ok(table)
    }

    /// Read `pairs.csv`, `family_names.txt`, `first_names.txt` and
    /// `exclusions.txt` from `dir`. Missing files are treated as empty.
    pub fn from_dir(dir: &Path) -> Result<Self> {
        let read = |name: &str| -> Result<String> {
            let path = dir.join(name);
            match fs::read_to_string(&path) {
                Ok(s) => Ok(s),
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(String::new()),
                Err(e) => Err(Error::io(path, e)),
            }
        };
        Self::from_sources(
            &read(PAIRS_FILE)?,
            &read(FAMILY_FILE)?,
            &read(NAMES_FILE)?,
            &read(EXCLUSIONS_FILE)?,
        )
    }

    pub fn is_empty(&self) -> bool {
        self.pair_map.is_empty() && self.family_names.is_empty() && self.first_names.is_empty()
    }

    /// Replacement for `token`, if it is masked.
    pub fn lookup(&self, token: &str) -> Option<&str> {
        if self.exclusions.contains(token) {
            return None;
        }
        if let Some(m) = self.pair_map.get(token) {
            return Some(m);
        }
        if self.family_names.contains(token) {
            return Some(FAMILY_NAME_TOKEN);
        }
        if self.first_names.contains(token) {
            return Some(FIRST_NAME_TOKEN);
        }
        None
    }

    /// Every fictive token the table can produce.
    pub fn merged_tokens(&self) -> BTreeSet<String> {
        let mut out: BTreeSet<String> = self.pair_map.values().cloned().collect();
        if !self.family_names.is_empty() {
            out.insert(FAMILY_NAME_TOKEN.to_string());
        }
        if !self.first_names.is_empty() {
            out.insert(FIRST_NAME_TOKEN.to_string());
        }
        out
    }

    /// Source words of each fictive token, for building merged vectors.
    pub fn merge_groups(&self) -> BTreeMap<String, Vec<String>> {
        let mut groups: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (word, merged) in &self.pair_map {
            groups.entry(merged.clone()).or_default().push(word.clone());
        }
        if !self.family_names.is_empty() {
            groups.insert(
                FAMILY_NAME_TOKEN.to_string(),
                self.family_names.iter().cloned().collect(),
            );
        }
        if !self.first_names.is_empty() {
            groups.insert(
                FIRST_NAME_TOKEN.to_string(),
                self.first_names.iter().cloned().collect(),
            );
        }
        groups
    }

    /// Fictive tokens that collide with a real vocabulary word.
    pub fn collisions<'a>(&self, vocab: impl IntoIterator<Item = &'a str>) -> Vec<String> {
        let merged = self.merged_tokens();
        vocab
            .into_iter()
            .filter(|t| merged.contains(*t))
            .map(str::to_string)
            .collect()
    }
}

pub fn apply_mask(tokens: &[String], mask: &MaskTable) -> Vec<String> {
    tokens
        .iter()
        .map(|t| mask.lookup(t).map_or_else(|| t.clone(), str::to_string))
        .collect()
}

fn lines(src: &str) -> impl Iterator<Item = String> + '_ {
    src.lines()
        .map(|l| l.trim().to_lowercase())
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
}

fn dup(token: &str, first: &'static str, second: &'static str) -> Error {
    Error::DuplicateMaskKey {
        token: token.to_string(),
        first,
        second,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn pair_row_maps_every_word() {
        let m = MaskTable::from_sources("mamma,pappa,mammapappa\n", "", "", "").unwrap();
        assert_eq!(m.lookup("mamma"), Some("mammapappa"));
        assert_eq!(m.lookup("pappa"), Some("mammapappa"));
        assert_eq!(m.lookup("mammapappa"), None);
    }

    #[test]
    fn first_names_are_case_folded() {
        let m = MaskTable::from_sources("", "", "Anna\nErik\n", "").unwrap();
        assert_eq!(m.lookup("anna"), Some(FIRST_NAME_TOKEN));
    }

    #[test]
    fn excluded_names_are_dropped() {
        let m = MaskTable::from_sources("", "", "Star\nAnna\n", "star\n").unwrap();
        assert!(!m.first_names.contains("star"));
        assert_eq!(m.lookup("star"), None);
    }

    #[test]
    fn duplicate_across_groups_names_the_token() {
        let err = MaskTable::from_sources("", "Lind\n", "lind\n", "").unwrap_err();
        match err {
            Error::DuplicateMaskKey { token, .. } => assert_eq!(token, "lind"),
            e => panic!("unexpected {e:?}"),
        }
        let err = MaskTable::from_sources("kung,drottning,kungdrottning", "", "kung", "")
            .unwrap_err();
        assert!(err.to_string().contains("kung"));
    }

    #[test]
    fn apply_mask_replaces_exact_tokens_only() {
        let m = MaskTable::from_sources("pojke,flicka,pojkeflicka", "", "anna", "").unwrap();
        assert_eq!(apply_mask(&s(&["pojke"]), &m), s(&["pojkeflicka"]));
        assert_eq!(apply_mask(&s(&["anna?"]), &m), s(&["anna?"]));
        assert_eq!(
            apply_mask(&s(&["en", "flicka", "och", "anna"]), &m),
            s(&["en", "pojkeflicka", "och", FIRST_NAME_TOKEN])
        );
    }

    #[test]
    fn masking_is_idempotent() {
        let m = MaskTable::from_sources("pojke,flicka,pojkeflicka", "lind", "anna", "").unwrap();
        let x = s(&["pojke", "anna", "lind", "hem"]);
        let once = apply_mask(&x, &m);
        assert_eq!(apply_mask(&once, &m), once);
    }

    #[test]
    fn masking_collapses_distinct_forms() {
        let m = MaskTable::from_sources("pojke,flicka,pojkeflicka\nson,dotter,sondotter", "", "", "")
            .unwrap();
        let corpus = [
            s(&["en", "pojke", "och", "flicka"]),
            s(&["min", "son", "min", "dotter"]),
            s(&["en", "flicka"]),
        ];
        let distinct = |docs: &[Vec<String>]| {
            docs.iter().flatten().collect::<BTreeSet<_>>().len()
        };
        let masked: Vec<_> = corpus.iter().map(|d| apply_mask(d, &m)).collect();
        // four surface forms collapse onto two merged tokens
        assert_eq!(distinct(&corpus) - distinct(&masked), 2);
    }

    #[test]
    fn merge_groups_list_sources() {
        let m = MaskTable::from_sources("mamma,pappa,mammapappa", "", "anna\nerik", "").unwrap();
        let g = m.merge_groups();
        assert_eq!(g["mammapappa"], s(&["mamma", "pappa"]));
        assert_eq!(g[FIRST_NAME_TOKEN], s(&["anna", "erik"]));
        assert_eq!(m.collisions(["mammapappa", "hej"]), s(&["mammapappa"]));
    }
}
