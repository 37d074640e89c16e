//! Word vectors: a vocabulary plus a dense `|V| x d` matrix, trained with
//! skip-gram negative sampling and queried for merged rows, neighbours and
//! analogies.

mod sgns;

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::math::{dot, l2_norm};

pub use sgns::{pair_loss_grad, train_skipgram, SgnsConfig, SgnsTrace};

/// Placeholder for tokens below the minimum count.
pub const RARE_TOKEN: &str = "<rare>";

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    vectors: Vec<f64>,
    counts: Vec<u64>,
    dim: usize,
    normalized: bool,
}

impl EmbeddingMatrix {
    pub fn new(dim: usize) -> Self {
        EmbeddingMatrix {
            tokens: Vec::new(),
            index: HashMap::new(),
            vectors: Vec::new(),
            counts: Vec::new(),
            dim,
            normalized: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        self.normalized = false;
        &mut self.vectors[i * self.dim..(i + 1) * self.dim]
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.index_of(token).map(|i| self.row(i))
    }

    pub fn count(&self, token: &str) -> Option<u64> {
        self.index_of(token).map(|i| self.counts[i])
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    #[cfg(test)]
    pub(crate) fn raw_vectors(&self) -> &[f64] {
        &self.vectors
    }

    /// Append a row. Fails if the token is already present or the vector
    /// has the wrong length.
    pub fn push(&mut self, token: &str, vector: &[f64], count: u64) -> Result<usize> {
        if vector.len() != self.dim {
            return Err(Error::Shape(format!(
                "row for `{token}` has {} components, expected {}",
                vector.len(),
                self.dim
            )));
        }
        if self.index.contains_key(token) {
            return Err(Error::invalid(format!("token `{token}` already has a row")));
        }
        let i = self.tokens.len();
        self.tokens.push(token.to_string());
        self.index.insert(token.to_string(), i);
        self.vectors.extend_from_slice(vector);
        self.counts.push(count);
        self.normalized = self.normalized && (l2_norm(vector) - 1.0).abs() <= 1e-6;
        Ok(i)
    }

    /// Scale every row to unit L2 norm. Zero rows stay zero; their tokens
    /// are returned and logged.
    pub fn normalize(&mut self) -> Vec<String> {
        let mut zero = Vec::new();
        for i in 0..self.len() {
            let row = &mut self.vectors[i * self.dim..(i + 1) * self.dim];
            let norm = l2_norm(row);
            if norm == 0.0 {
                zero.push(self.tokens[i].clone());
                continue;
            }
            row.iter_mut().for_each(|x| *x /= norm);
        }
        if !zero.is_empty() {
            log::warn!("{} zero rows left unnormalized: {:?}", zero.len(), zero);
        }
        self.normalized = true;
        zero
    }

    /// Unit-norm sum of the rows of `tokens`.
    pub fn merge_vectors<S: AsRef<str>>(&self, tokens: &[S]) -> Result<Vec<f64>> {
        let mut sum = vec![0.0; self.dim];
        for t in tokens {
            let row = self
                .get(t.as_ref())
                .ok_or_else(|| Error::UnknownToken(t.as_ref().to_string()))?;
            sum.iter_mut().zip(row).for_each(|(s, r)| *s += r);
        }
        let norm = l2_norm(&sum);
        if norm > 0.0 {
            sum.iter_mut().for_each(|x| *x /= norm);
        } else {
            log::warn!("merged vector is zero");
        }
        Ok(sum)
    }

    /// Add (or replace) a row for `name` built from whichever `sources` are
    /// in the vocabulary. Returns the number of sources found; zero means no
    /// row was written.
    pub fn add_merged<S: AsRef<str>>(&mut self, name: &str, sources: &[S]) -> Result<usize> {
        let present: Vec<&str> = sources
            .iter()
            .map(AsRef::as_ref)
            .filter(|s| self.contains(s))
            .collect();
        if present.is_empty() {
            return Ok(0);
        }
        let v = self.merge_vectors(&present)?;
        let count = present.iter().filter_map(|s| self.count(s)).sum();
        match self.index_of(name) {
            Some(i) => {
                let normalized = self.normalized;
                self.row_mut(i).copy_from_slice(&v);
                self.counts[i] = count;
                self.normalized = normalized;
            }
            None => {
                self.push(name, &v, count)?;
            }
        }
        Ok(present.len())
    }

    fn cosine_to(&self, query: &[f64], i: usize) -> f64 {
        let row = self.row(i);
        let denom = l2_norm(query) * l2_norm(row);
        if denom == 0.0 {
            0.0
        } else {
            dot(query, row) / denom
        }
    }

    fn ranked(&self, query: &[f64], exclude: &[usize], k: usize) -> Vec<(String, f64)> {
        let mut scored: Vec<(usize, f64)> = (0..self.len())
            .filter(|i| !exclude.contains(i))
            .map(|i| (i, self.cosine_to(query, i)))
            .collect();
        // stable: equal scores keep vocabulary order
        scored.sort_by(|a, b| b.1.total_cmp(&a.1));
        scored
            .into_iter()
            .take(k)
            .map(|(i, s)| (self.tokens[i].clone(), s))
            .collect()
    }

    /// Top-`k` tokens by cosine similarity, excluding the query itself.
    pub fn nearest_neighbors(&self, token: &str, k: usize) -> Result<Vec<(String, f64)>> {
        let i = self
            .index_of(token)
            .ok_or_else(|| Error::UnknownToken(token.to_string()))?;
        if k == 0 {
            return Ok(Vec::new());
        }
        Ok(self.ranked(self.row(i), &[i], k))
    }

    /// `a : b :: c : ?`, the token closest to `b - a + c` other than the
    /// three inputs.
    pub fn analogy(&self, a: &str, b: &str, c: &str) -> Result<String> {
        let idx = |t: &str| {
            self.index_of(t)
                .ok_or_else(|| Error::UnknownToken(t.to_string()))
        };
        let (ia, ib, ic) = (idx(a)?, idx(b)?, idx(c)?);
        let unit = |i: usize| {
            let r = self.row(i);
            let n = l2_norm(r);
            r.iter()
                .map(move |x| if n > 0.0 { x / n } else { 0.0 })
                .collect::<Vec<_>>()
        };
        let (va, vb, vc) = (unit(ia), unit(ib), unit(ic));
        let target: Vec<f64> = (0..self.dim).map(|j| vb[j] - va[j] + vc[j]).collect();
        self.ranked(&target, &[ia, ib, ic], 1)
            .into_iter()
            .next()
            .map(|(t, _)| t)
            .ok_or_else(|| Error::invalid("analogy needs at least four tokens"))
    }

    /// Write the word2vec text format plus a `<path>.counts` sidecar.
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(w, "{} {}", self.len(), self.dim).map_err(io)?;
        for i in 0..self.len() {
            write!(w, "{}", self.tokens[i]).map_err(io)?;
            for x in self.row(i) {
                write!(w, " {x}").map_err(io)?;
            }
            writeln!(w).map_err(io)?;
        }
        w.flush().map_err(io)?;

        let cpath = counts_path(path);
        let file = File::create(&cpath).map_err(|e| Error::io(&cpath, e))?;
        let mut w = BufWriter::new(file);
        for (t, c) in self.tokens.iter().zip(&self.counts) {
            writeln!(w, "{t} {c}").map_err(|e| Error::io(&cpath, e))?;
        }
        w.flush().map_err(|e| Error::io(&cpath, e))
    }

    /// Read the word2vec text format; counts are taken from the sidecar
    /// when present and default to zero otherwise.
    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines();
        let parse_err = |line: usize, msg: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        let header = lines
            .next()
            .ok_or_else(|| parse_err(1, "missing header".into()))?
            .map_err(|e| Error::io(path, e))?;
        let mut it = header.split_whitespace();
        let (Some(v), Some(d), None) = (it.next(), it.next(), it.next()) else {
            return Err(parse_err(1, format!("bad header `{header}`")));
        };
        let n: usize = v.parse().map_err(|_| parse_err(1, "bad row count".into()))?;
        let dim: usize = d.parse().map_err(|_| parse_err(1, "bad dimension".into()))?;

        let mut m = EmbeddingMatrix::new(dim);
        let mut buf = Vec::with_capacity(dim);
        for (k, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split(' ');
            let token = parts.next().unwrap_or_default();
            buf.clear();
            for p in parts.filter(|p| !p.is_empty()) {
                buf.push(
                    p.parse::<f64>()
                        .map_err(|_| parse_err(k + 2, format!("bad number `{p}`")))?,
                );
            }
            m.push(token, &buf, 0)
                .map_err(|e| parse_err(k + 2, e.to_string()))?;
        }
        if m.len() != n {
            return Err(parse_err(1, format!("header says {n} rows, found {}", m.len())));
        }

        let cpath = counts_path(path);
        if let Ok(f) = File::open(&cpath) {
            for line in BufReader::new(f).lines() {
                let line = line.map_err(|e| Error::io(&cpath, e))?;
                if let Some((t, c)) = line.rsplit_once(' ') {
                    if let (Some(i), Ok(c)) = (m.index_of(t), c.parse()) {
                        m.counts[i] = c;
                    }
                }
            }
        }
        m.normalized = (0..m.len()).all(|i| (l2_norm(m.row(i)) - 1.0).abs() <= 1e-6);
        Ok(m)
    }
}

pub fn counts_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".counts");
    PathBuf::from(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: &[(&str, &[f64])]) -> EmbeddingMatrix {
        let mut m = EmbeddingMatrix::new(rows[0].1.len());
        for (t, v) in rows {
            m.push(t, v, 1).unwrap();
        }
        m
    }

    #[test]
    fn normalize_hand_values() {
        let mut m = matrix(&[("a", &[3.0, 4.0]), ("z", &[0.0, 0.0])]);
        let zero = m.normalize();
        assert_eq!(m.get("a").unwrap(), &[0.6, 0.8]);
        assert_eq!(m.get("z").unwrap(), &[0.0, 0.0]);
        assert_eq!(zero, vec!["z".to_string()]);
        assert!(m.is_normalized());
    }

    #[test]
    fn normalize_is_idempotent() {
        let mut m = matrix(&[("a", &[0.3, -1.2, 2.0]), ("b", &[1.0, 1.0, 1.0])]);
        m.normalize();
        let once = m.clone();
        m.normalize();
        for (x, y) in once.raw_vectors().iter().zip(m.raw_vectors()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn merge_vectors_hand_values() {
        let m = matrix(&[("a", &[1.0, 0.0]), ("b", &[0.0, 1.0]), ("c", &[2.0, 0.0])]);
        let v = m.merge_vectors(&["a", "b"]).unwrap();
        assert!((v[0] - 0.70711).abs() < 1e-5 && (v[1] - 0.70711).abs() < 1e-5);
        assert_eq!(m.merge_vectors(&["c", "c"]).unwrap(), vec![1.0, 0.0]);
        assert_eq!(
            m.merge_vectors(&["a", "b"]).unwrap(),
            m.merge_vectors(&["b", "a"]).unwrap()
        );
        match m.merge_vectors(&["a", "nope"]) {
            Err(Error::UnknownToken(t)) => assert_eq!(t, "nope"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn add_merged_builds_placeholder_row() {
        let mut m = matrix(&[("mamma", &[1.0, 0.0]), ("pappa", &[0.0, 1.0])]);
        assert_eq!(m.add_merged("mammapappa", &["mamma", "pappa", "absent"]).unwrap(), 2);
        let v = m.get("mammapappa").unwrap();
        assert!((l2_norm(v) - 1.0).abs() < 1e-12);
        assert_eq!(m.add_merged("none", &["absent"]).unwrap(), 0);
        assert!(!m.contains("none"));
    }

    #[test]
    fn neighbors_exclude_query_and_respect_k() {
        let m = matrix(&[
            ("a", &[1.0, 0.0]),
            ("b", &[0.9, 0.1]),
            ("c", &[0.0, 1.0]),
            ("d", &[0.9, 0.1]),
        ]);
        assert!(m.nearest_neighbors("a", 0).unwrap().is_empty());
        let nn = m.nearest_neighbors("a", 3).unwrap();
        let names: Vec<_> = nn.iter().map(|(t, _)| t.as_str()).collect();
        // b and d tie; vocabulary order breaks it
        assert_eq!(names, ["b", "d", "c"]);
        assert!(m.nearest_neighbors("zz", 1).is_err());
    }

    #[test]
    fn analogy_on_planted_grid() {
        // gender axis x, role axis y
        let mut m = matrix(&[
            ("man", &[1.0, 0.0, 0.1]),
            ("woman", &[-1.0, 0.0, 0.1]),
            ("king", &[1.0, 1.0, 0.1]),
            ("queen", &[-1.0, 1.0, 0.1]),
            ("apple", &[0.0, -1.0, 1.0]),
        ]);
        m.normalize();
        assert_eq!(m.analogy("man", "king", "woman").unwrap(), "queen");
        assert_eq!(m.analogy("king", "man", "queen").unwrap(), "woman");
        // a == b degenerates to the nearest neighbour of c
        let nn = m.nearest_neighbors("queen", 1).unwrap()[0].0.clone();
        assert_eq!(m.analogy("apple", "apple", "queen").unwrap(), nn);
        assert!(m.analogy("man", "king", "nope").is_err());
    }

    #[test]
    fn word2vec_text_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.txt");
        let mut m = EmbeddingMatrix::new(3);
        m.push("hej", &[0.1, -2.5e-7, 3.0], 12).unwrap();
        m.push("<rare>", &[1.0 / 3.0, 0.0, -1.0], 40).unwrap();
        m.save(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("2 3\nhej "));
        let back = EmbeddingMatrix::load(&path).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.count("<rare>"), Some(40));
    }

    #[test]
    fn push_rejects_duplicates_and_bad_dims() {
        let mut m = EmbeddingMatrix::new(2);
        m.push("a", &[1.0, 0.0], 1).unwrap();
        assert!(m.push("a", &[1.0, 0.0], 1).is_err());
        assert!(m.push("b", &[1.0], 1).is_err());
    }
}
