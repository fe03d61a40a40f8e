//! Concept taxonomy (Wu-Palmer similarity), word-vector lexicon (cosine
//! similarity), and top-k mapping of a free-text query onto a concept bank.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Collapses internal whitespace to underscores so multi-word labels match
/// lexicon and taxonomy keys.
pub fn normalize_label(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join("_")
}

/// A rooted tree of concepts. The root has depth 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Taxonomy {
    names: Vec<String>,
    index: HashMap<String, usize>,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    depth: Vec<usize>,
}

impl Taxonomy {
    /// Builds a tree from `(child, parent)` rows; the root row has no parent.
    pub fn from_edges(edges: &[(String, Option<String>)]) -> Result<Self> {
        let mut names = Vec::new();
        let mut index = HashMap::new();
        let mut raw_parent: Vec<Option<String>> = Vec::new();
        for (child, parent) in edges {
            let child = normalize_label(child);
            if child.is_empty() {
                return Err(Error::invalid("empty concept name in taxonomy"));
            }
            let parent = parent.as_deref().map(normalize_label).filter(|p| !p.is_empty());
            if let Some(&i) = index.get(&child) {
                if raw_parent[i] != parent {
                    return Err(Error::invalid(format!(
                        "`{child}` has more than one parent; only trees are supported"
                    )));
                }
                continue;
            }
            index.insert(child.clone(), names.len());
            names.push(child);
            raw_parent.push(parent);
        }
        let roots: Vec<&String> =
            names.iter().zip(&raw_parent).filter(|(_, p)| p.is_none()).map(|(n, _)| n).collect();
        match roots.len() {
            1 => {}
            0 => return Err(Error::invalid("taxonomy has no root row")),
            _ => {
                return Err(Error::invalid(format!(
                    "taxonomy has {} roots; exactly one is required",
                    roots.len()
                )))
            }
        }
        let mut parent = Vec::with_capacity(names.len());
        for (name, p) in names.iter().zip(&raw_parent) {
            parent.push(match p {
                None => None,
                Some(p) => Some(*index.get(p).ok_or_else(|| {
                    Error::invalid(format!("parent `{p}` of `{name}` is not a declared concept"))
                })?),
            });
        }
        let mut children = vec![Vec::new(); names.len()];
        for (i, p) in parent.iter().enumerate() {
            if let Some(p) = p {
                children[*p].push(i);
            }
        }
        let mut depth = vec![0usize; names.len()];
        let root = parent.iter().position(Option::is_none).expect("one root");
        depth[root] = 1;
        let mut stack = vec![root];
        let mut reached = 1;
        while let Some(n) = stack.pop() {
            for &c in &children[n] {
                depth[c] = depth[n] + 1;
                reached += 1;
                stack.push(c);
            }
        }
        if reached != names.len() {
            return Err(Error::invalid("taxonomy contains a cycle"));
        }
        Ok(Taxonomy { names, index, parent, children, depth })
    }

    /// Parses `child,parent` CSV rows with a single `root,` row. A leading
    /// `child,parent` header is optional.
    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let mut edges = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Parse { line: i + 1, message: e.to_string() })?;
            if rec.iter().all(str::is_empty) {
                continue;
            }
            if i == 0 && rec.get(0) == Some("child") && rec.get(1) == Some("parent") {
                continue;
            }
            if rec.len() > 2 {
                return Err(Error::Parse { line: i + 1, message: "expected `child,parent`".into() });
            }
            let child = rec.get(0).unwrap_or_default().to_string();
            let parent = rec.get(1).filter(|p| !p.is_empty()).map(str::to_string);
            edges.push((child, parent));
        }
        Self::from_edges(&edges)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(&normalize_label(name))
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    fn id(&self, name: &str) -> Result<usize> {
        self.index
            .get(&normalize_label(name))
            .copied()
            .ok_or_else(|| Error::UnknownConcept(name.to_string()))
    }

    pub fn parent(&self, name: &str) -> Result<Option<&str>> {
        Ok(self.parent[self.id(name)?].map(|p| self.names[p].as_str()))
    }

    /// Nodes on the path from the root to `name`, inclusive.
    pub fn depth(&self, name: &str) -> Result<usize> {
        Ok(self.depth[self.id(name)?])
    }

    fn lcs_id(&self, mut a: usize, mut b: usize) -> usize {
        while self.depth[a] > self.depth[b] {
            a = self.parent[a].expect("non-root");
        }
        while self.depth[b] > self.depth[a] {
            b = self.parent[b].expect("non-root");
        }
        while a != b {
            a = self.parent[a].expect("non-root");
            b = self.parent[b].expect("non-root");
        }
        a
    }

    /// Deepest common ancestor; a node counts as its own ancestor.
    pub fn lcs(&self, a: &str, b: &str) -> Result<&str> {
        Ok(&self.names[self.lcs_id(self.id(a)?, self.id(b)?)])
    }

    /// `2·depth(lcs) / (depth(a) + depth(b))`.
    pub fn wup(&self, a: &str, b: &str) -> Result<f64> {
        let (ia, ib) = (self.id(a)?, self.id(b)?);
        let l = self.lcs_id(ia, ib);
        Ok(2.0 * self.depth[l] as f64 / (self.depth[ia] + self.depth[ib]) as f64)
    }

    /// `name` and every node below it, sorted.
    pub fn descendants(&self, name: &str) -> Result<BTreeSet<String>> {
        let mut out = BTreeSet::new();
        let mut stack = vec![self.id(name)?];
        while let Some(n) = stack.pop() {
            out.insert(self.names[n].clone());
            stack.extend(&self.children[n]);
        }
        Ok(out)
    }
}

/// Word vectors with a uniform dimension.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Lexicon {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
}

impl Lexicon {
    pub fn new(entries: impl IntoIterator<Item = (String, Vec<f64>)>) -> Result<Self> {
        let mut lex = Lexicon::default();
        for (word, v) in entries {
            lex.insert(word, v)?;
        }
        Ok(lex)
    }

    fn insert(&mut self, word: String, v: Vec<f64>) -> Result<()> {
        if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Record { id: word, message: "empty or non-finite vector".into() });
        }
        if self.vectors.is_empty() {
            self.dim = v.len();
        } else if v.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, actual: v.len() });
        }
        self.vectors.insert(normalize_label(&word), v);
        Ok(())
    }

    /// One `word v1 v2 ... vd` entry per line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lex = Lexicon::default();
        for (i, line) in text.lines().enumerate() {
            let mut parts = line.split_whitespace();
            let Some(word) = parts.next() else { continue };
            let v = parts
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| Error::Parse { line: i + 1, message: e.to_string() })?;
            lex.insert(word.to_string(), v).map_err(|e| Error::Parse {
                line: i + 1,
                message: e.to_string(),
            })?;
        }
        Ok(lex)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.vectors.get(&normalize_label(word)).map(Vec::as_slice)
    }
}

pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch { expected: u.len(), actual: v.len() });
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::invalid("cosine similarity of a zero vector"));
    }
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy)]
pub enum ExpansionMode<'a> {
    Wup(&'a Taxonomy),
    Cosine(&'a Lexicon),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionResult {
    /// Descending similarity, ties by concept name.
    pub ranked: Vec<(String, f64)>,
    /// Bank concepts the similarity source does not know.
    pub skipped: Vec<String>,
}

impl ExpansionResult {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("concept,similarity\n");
        for (c, sim) in &self.ranked {
            s.push_str(&format!("{c},{}\n", crate::io::fmt_sig(*sim)));
        }
        s
    }
}

/// Ranks the concept bank by similarity to `query` and keeps the top `k`.
/// The query's own label is excluded.
pub fn expand_query(query: &str, bank: &[String], mode: ExpansionMode<'_>, k: usize) -> Result<ExpansionResult> {
    let q = normalize_label(query);
    let known = match mode {
        ExpansionMode::Wup(t) => t.contains(&q),
        ExpansionMode::Cosine(l) => l.get(&q).is_some(),
    };
    if !known {
        return Err(Error::UnknownQuery(query.to_string()));
    }
    let concepts: BTreeSet<String> = bank.iter().map(|c| normalize_label(c)).filter(|c| !c.is_empty()).collect();
    let mut ranked = Vec::new();
    let mut skipped = Vec::new();
    for c in concepts {
        if c == q {
            continue;
        }
        let sim = match mode {
            ExpansionMode::Wup(t) => {
                if !t.contains(&c) {
                    skipped.push(c);
                    continue;
                }
                t.wup(&q, &c)?
            }
            ExpansionMode::Cosine(l) => match l.get(&c) {
                Some(v) => cosine(l.get(&q).expect("checked above"), v)?,
                None => {
                    skipped.push(c);
                    continue;
                }
            },
        };
        ranked.push((c, sim));
    }
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(k);
    Ok(ExpansionResult { ranked, skipped })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn weapons() -> Taxonomy {
        Taxonomy::parse_csv("child,parent\nweapon,\ngun,weapon\nrevolver,gun\nrifle,gun\nknife,weapon\n").unwrap()
    }

    #[test]
    fn depths() {
        let t = weapons();
        assert_eq!(t.depth("weapon").unwrap(), 1);
        assert_eq!(t.depth("gun").unwrap(), 2);
        assert_eq!(t.depth("rifle").unwrap(), 3);
        assert!(t.depth("tank").is_err());
    }

    #[test]
    fn lcs_cases() {
        let t = weapons();
        assert_eq!(t.lcs("rifle", "rifle").unwrap(), "rifle");
        assert_eq!(t.lcs("rifle", "revolver").unwrap(), "gun");
        assert_eq!(t.lcs("gun", "rifle").unwrap(), "gun");
        assert_eq!(t.lcs("knife", "rifle").unwrap(), "weapon");
    }

    #[test]
    fn wup_values() {
        let t = weapons();
        assert_eq!(t.wup("knife", "knife").unwrap(), 1.0);
        assert!((t.wup("gun", "rifle").unwrap() - 0.8).abs() < 1e-12);
        assert!((t.wup("rifle", "revolver").unwrap() - 2.0 * 2.0 / 6.0).abs() < 1e-12);
        assert!((t.wup("rifle", "revolver").unwrap() - 0.667).abs() < 0.001);
    }

    #[test]
    fn taxonomy_validation() {
        assert!(Taxonomy::parse_csv("a,\nb,\n").is_err());
        assert!(Taxonomy::parse_csv("b,a\n").is_err());
        assert!(Taxonomy::parse_csv("r,\na,r\na,b\nb,r\n").is_err());
        assert!(Taxonomy::parse_csv("r,\na,b\nb,a\n").is_err());
        assert!(Taxonomy::parse_csv("r,\na,missing\n").is_err());
        let t = Taxonomy::parse_csv("r,\nassault rifle,r\n").unwrap();
        assert!(t.contains("assault_rifle"));
        assert!(t.contains("assault  rifle"));
    }

    #[test]
    fn cosine_values() {
        assert!((cosine(&[1.0, 2.0], &[1.0, 2.0]).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(cosine(&[1.0, 0.0], &[0.0, 3.0]).unwrap(), 0.0);
        assert!((cosine(&[1.0, 0.0], &[1.0, 1.0]).unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        assert!(cosine(&[0.0, 0.0], &[1.0, 1.0]).is_err());
        assert!(cosine(&[1.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn wup_expansion_fixture() {
        let t = weapons();
        let bank: Vec<String> = ["weapon", "gun", "revolver", "rifle", "knife"].iter().map(|s| s.to_string()).collect();
        let out = expand_query("gun", &bank, ExpansionMode::Wup(&t), 2).unwrap();
        assert_eq!(out.ranked, vec![("revolver".to_string(), 0.8), ("rifle".to_string(), 0.8)]);
        let only_self = expand_query("gun", &["gun".to_string()], ExpansionMode::Wup(&t), 3).unwrap();
        assert!(only_self.ranked.is_empty());
        assert!(matches!(
            expand_query("tank", &bank, ExpansionMode::Wup(&t), 3),
            Err(Error::UnknownQuery(_))
        ));
        let with_unknown = expand_query("gun", &["tank".to_string(), "rifle".to_string()], ExpansionMode::Wup(&t), 3).unwrap();
        assert_eq!(with_unknown.skipped, vec!["tank".to_string()]);
        assert_eq!(with_unknown.ranked.len(), 1);
    }

    #[test]
    fn cosine_expansion_fixture() {
        let lex = Lexicon::parse("gun 1 0\nrifle 0.9 0.1\ncar 0 1\n").unwrap();
        let bank: Vec<String> = ["rifle", "car"].iter().map(|s| s.to_string()).collect();
        let out = expand_query("gun", &bank, ExpansionMode::Cosine(&lex), 1).unwrap();
        assert_eq!(out.ranked.len(), 1);
        assert_eq!(out.ranked[0].0, "rifle");
        assert!((out.ranked[0].1 - 0.9939).abs() < 1e-4);
    }

    #[test]
    fn lexicon_errors() {
        assert!(Lexicon::parse("a 1 2\nb 1\n").is_err());
        assert!(Lexicon::parse("a 1 x\n").is_err());
        assert!(Lexicon::parse("a\n").is_err());
        let lex = Lexicon::parse("new_york 1 2\n\n").unwrap();
        assert!(lex.get("new york").is_some());
    }
}
