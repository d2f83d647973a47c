//! Noun ontology (WordNet style) and path similarity.
//!
//! Distances follow the usual WordNet convention: the path between two
//! senses climbs from each sense to a common ancestor, so
//! `d(a, b) = min over shared ancestors c of up(a, c) + up(b, c)`, where
//! `up` counts hypernym and instance-hypernym links. Relations other than
//! hypernymy (only possible in TSV input) are traversed in both directions.
//!
//! Two on-disk forms are accepted:
//! * a WordNet database directory holding `index.noun` and `data.noun`
//!   (optionally `noun.exc`);
//! * a directory holding `ontology.edges.tsv` (`child  parent  relation`)
//!   and `ontology.lemmas.tsv` (`word  sense`).

use std::collections::{HashMap, VecDeque};
use std::path::Path;
use std::sync::{Arc, RwLock};

use log::info;

use super::ContinuityError;

type SenseId = u32;

#[derive(Debug, Default)]
pub struct OntologyGraph {
    names: Vec<String>,
    index: HashMap<String, SenseId>,
    /// Links followed when climbing: hypernyms plus undirected relations.
    up: Vec<Vec<SenseId>>,
    /// Lemma to senses, in file order.
    lemmas: HashMap<String, Vec<SenseId>>,
    /// Irregular plural to base forms.
    exceptions: HashMap<String, Vec<String>>,
    ancestors: RwLock<HashMap<SenseId, Arc<HashMap<SenseId, u32>>>>,
    distances: RwLock<HashMap<(SenseId, SenseId), Option<u32>>>,
}

/// Noun suffix rules for recovering a base form, applied like WordNet's
/// morphological processor.
const NOUN_RULES: [(&str, &str); 9] = [
    ("s", ""),
    ("ses", "s"),
    ("ves", "f"),
    ("xes", "x"),
    ("zes", "z"),
    ("ches", "ch"),
    ("shes", "sh"),
    ("men", "man"),
    ("ies", "y"),
];

impl OntologyGraph {
    fn sense(&mut self, name: &str) -> SenseId {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = self.names.len() as SenseId;
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), id);
        self.up.push(Vec::new());
        id
    }

    fn link_up(&mut self, child: SenseId, parent: SenseId) {
        if !self.up[child as usize].contains(&parent) {
            self.up[child as usize].push(parent);
        }
    }

    fn add_lemma(&mut self, word: &str, sense: SenseId) {
        let senses = self.lemmas.entry(normalize(word)).or_default();
        if !senses.contains(&sense) {
            senses.push(sense);
        }
    }

    /// Builds a graph from `(child, parent, relation)` edges and
    /// `(word, sense)` lemma pairs.
    pub fn from_parts<'a>(
        edges: impl IntoIterator<Item = (&'a str, &'a str, &'a str)>,
        lemmas: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> Self {
        let mut g = OntologyGraph::default();
        for (child, parent, relation) in edges {
            let (c, p) = (g.sense(child), g.sense(parent));
            g.link_up(c, p);
            if !is_hypernym_relation(relation) {
                g.link_up(p, c);
            }
        }
        for (word, sense) in lemmas {
            let s = g.sense(sense);
            g.add_lemma(word, s);
        }
        g
    }

    /// Loads either representation from a directory.
    pub fn load(dir: &Path) -> Result<Self, ContinuityError> {
        let g = if dir.join("index.noun").is_file() && dir.join("data.noun").is_file() {
            Self::load_wordnet(dir)?
        } else if dir.join("ontology.edges.tsv").is_file()
            && dir.join("ontology.lemmas.tsv").is_file()
        {
            Self::load_tsv(
                &dir.join("ontology.edges.tsv"),
                &dir.join("ontology.lemmas.tsv"),
            )?
        } else {
            return Err(ContinuityError::Format {
                path: dir.display().to_string(),
                line: 0,
                message:
                    "neither index.noun/data.noun nor ontology.edges.tsv/ontology.lemmas.tsv found"
                        .into(),
            });
        };
        info!(
            "ontology {}: {} senses, {} lemmas",
            dir.display(),
            g.names.len(),
            g.lemmas.len()
        );
        Ok(g)
    }

    pub fn load_tsv(edges: &Path, lemmas: &Path) -> Result<Self, ContinuityError> {
        let edge_text = std::fs::read_to_string(edges)?;
        let lemma_text = std::fs::read_to_string(lemmas)?;
        let rows =
            |text: &'_ str, path: &Path, min: usize| -> Result<Vec<Vec<String>>, ContinuityError> {
                let mut out = Vec::new();
                for (i, line) in text.lines().enumerate() {
                    if line.trim().is_empty() || line.starts_with('#') {
                        continue;
                    }
                    let fields: Vec<String> =
                        line.split('\t').map(|f| f.trim().to_string()).collect();
                    if fields.len() < min || fields.iter().take(min).any(String::is_empty) {
                        return Err(ContinuityError::Format {
                            path: path.display().to_string(),
                            line: i + 1,
                            message: format!("expected {min} tab-separated fields"),
                        });
                    }
                    out.push(fields);
                }
                Ok(out)
            };
        let edge_rows = rows(&edge_text, edges, 2)?;
        let lemma_rows = rows(&lemma_text, lemmas, 2)?;
        Ok(Self::from_parts(
            edge_rows.iter().map(|r| {
                (
                    r[0].as_str(),
                    r[1].as_str(),
                    r.get(2).map_or("hypernym", String::as_str),
                )
            }),
            lemma_rows.iter().map(|r| (r[0].as_str(), r[1].as_str())),
        ))
    }

    pub fn load_wordnet(dir: &Path) -> Result<Self, ContinuityError> {
        let mut g = OntologyGraph::default();
        let data_path = dir.join("data.noun");
        let data = std::fs::read_to_string(&data_path)?;
        for (i, line) in data.lines().enumerate() {
            if line.starts_with("  ") || line.trim().is_empty() {
                continue;
            }
            let err = |m: &str| ContinuityError::Format {
                path: data_path.display().to_string(),
                line: i + 1,
                message: m.to_string(),
            };
            let fields: Vec<&str> = line
                .split(" | ")
                .next()
                .unwrap_or("")
                .split_whitespace()
                .collect();
            let offset = *fields.first().ok_or_else(|| err("empty record"))?;
            let w_cnt = fields
                .get(3)
                .and_then(|f| usize::from_str_radix(f, 16).ok())
                .ok_or_else(|| err("bad word count"))?;
            let p_at = 4 + 2 * w_cnt;
            let p_cnt: usize = fields
                .get(p_at)
                .and_then(|f| f.parse().ok())
                .ok_or_else(|| err("bad pointer count"))?;
            if fields.len() < p_at + 1 + 4 * p_cnt {
                return Err(err("truncated pointer list"));
            }
            let me = g.sense(offset);
            for p in 0..p_cnt {
                let base = p_at + 1 + 4 * p;
                let (symbol, target, pos) = (fields[base], fields[base + 1], fields[base + 2]);
                if pos == "n" && (symbol == "@" || symbol == "@i") {
                    let t = g.sense(target);
                    g.link_up(me, t);
                }
            }
        }
        let index_path = dir.join("index.noun");
        let index = std::fs::read_to_string(&index_path)?;
        for (i, line) in index.lines().enumerate() {
            if line.starts_with("  ") || line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let err = || ContinuityError::Format {
                path: index_path.display().to_string(),
                line: i + 1,
                message: "malformed index entry".into(),
            };
            let synset_cnt: usize = fields.get(2).and_then(|f| f.parse().ok()).ok_or_else(err)?;
            if fields.len() < synset_cnt + 1 {
                return Err(err());
            }
            for offset in &fields[fields.len() - synset_cnt..] {
                let s = g.sense(offset);
                g.add_lemma(fields[0], s);
            }
        }
        let exc = dir.join("noun.exc");
        if exc.is_file() {
            for line in std::fs::read_to_string(exc)?.lines() {
                let mut f = line.split_whitespace();
                if let Some(form) = f.next() {
                    g.exceptions
                        .entry(form.to_string())
                        .or_default()
                        .extend(f.map(str::to_string));
                }
            }
        }
        Ok(g)
    }

    pub fn sense_count(&self) -> usize {
        self.names.len()
    }

    fn known(&self, form: &str) -> bool {
        self.lemmas.contains_key(form)
    }

    /// Base forms of `word` present in the ontology, WordNet-morphy style.
    pub fn base_forms(&self, word: &str) -> Vec<String> {
        let form = normalize(word);
        let filter = |forms: Vec<String>| -> Vec<String> {
            let mut out: Vec<String> = Vec::new();
            for f in forms {
                if self.known(&f) && !out.contains(&f) {
                    out.push(f);
                }
            }
            out
        };
        if let Some(exc) = self.exceptions.get(&form) {
            return filter(
                std::iter::once(form.clone())
                    .chain(exc.iter().cloned())
                    .collect(),
            );
        }
        let apply = |forms: &[String]| -> Vec<String> {
            forms
                .iter()
                .flat_map(|f| {
                    NOUN_RULES
                        .iter()
                        .filter(move |(old, _)| f.ends_with(old))
                        .map(move |(old, new)| format!("{}{new}", &f[..f.len() - old.len()]))
                })
                .collect()
        };
        let mut forms = apply(std::slice::from_ref(&form));
        let found = filter(
            std::iter::once(form.clone())
                .chain(forms.iter().cloned())
                .collect(),
        );
        if !found.is_empty() {
            return found;
        }
        while !forms.is_empty() {
            forms = apply(&forms);
            let found = filter(forms.clone());
            if !found.is_empty() {
                return found;
            }
        }
        Vec::new()
    }

    /// Noun senses of `word`, across its base forms.
    pub fn senses(&self, word: &str) -> Vec<SenseId> {
        let mut out = Vec::new();
        for form in self.base_forms(word) {
            for &s in &self.lemmas[&form] {
                if !out.contains(&s) {
                    out.push(s);
                }
            }
        }
        out
    }

    pub fn has_noun_sense(&self, word: &str) -> bool {
        !self.base_forms(word).is_empty()
    }

    pub fn sense_name(&self, id: SenseId) -> &str {
        &self.names[id as usize]
    }

    fn ancestors(&self, s: SenseId) -> Arc<HashMap<SenseId, u32>> {
        if let Some(a) = self
            .ancestors
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(&s)
        {
            return Arc::clone(a);
        }
        let mut dist: HashMap<SenseId, u32> = HashMap::from([(s, 0)]);
        let mut queue = VecDeque::from([s]);
        while let Some(x) = queue.pop_front() {
            let d = dist[&x];
            for &p in &self.up[x as usize] {
                dist.entry(p).or_insert_with(|| {
                    queue.push_back(p);
                    d + 1
                });
            }
        }
        let dist = Arc::new(dist);
        self.ancestors
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .insert(s, Arc::clone(&dist));
        dist
    }

    /// Edge count of the shortest path through a shared ancestor, or
    /// `None` when the senses share none.
    pub fn sense_distance(&self, a: SenseId, b: SenseId) -> Option<u32> {
        let key = (a.min(b), a.max(b));
        if let Some(&d) = self
            .distances
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(&key)
        {
            return d;
        }
        let (da, db) = (self.ancestors(a), self.ancestors(b));
        let (small, large) = if da.len() <= db.len() {
            (&da, &db)
        } else {
            (&db, &da)
        };
        let d = small
            .iter()
            .filter_map(|(c, x)| large.get(c).map(|y| x + y))
            .min();
        self.distances
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .insert(key, d);
        d
    }
}

fn is_hypernym_relation(relation: &str) -> bool {
    matches!(
        relation,
        "hypernym" | "instance_hypernym" | "@" | "@i" | "hyponym" | "instance_hyponym"
    )
}

fn normalize(word: &str) -> String {
    word.trim().to_lowercase().replace(' ', "_")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> OntologyGraph {
        OntologyGraph::from_parts(
            [
                ("animal", "entity", "hypernym"),
                ("dog.n", "animal", "hypernym"),
                ("cat.n", "animal", "hypernym"),
                ("puppy.n", "dog.n", "hypernym"),
                ("rock.n", "entity", "hypernym"),
            ],
            [
                ("dog", "dog.n"),
                ("cat", "cat.n"),
                ("puppy", "puppy.n"),
                ("rock", "rock.n"),
                ("box", "rock.n"),
                ("island", "island.n"),
            ],
        )
    }

    #[test]
    fn distances_climb_to_shared_ancestors() {
        let g = toy();
        let s = |w: &str| g.senses(w)[0];
        assert_eq!(g.sense_distance(s("dog"), s("dog")), Some(0));
        assert_eq!(g.sense_distance(s("puppy"), s("dog")), Some(1));
        assert_eq!(g.sense_distance(s("cat"), s("dog")), Some(2));
        assert_eq!(g.sense_distance(s("puppy"), s("rock")), Some(4));
        assert_eq!(g.sense_distance(s("rock"), s("island")), None);
    }

    #[test]
    fn morphological_base_forms() {
        let g = toy();
        assert_eq!(g.base_forms("Dogs"), vec!["dog"]);
        assert_eq!(g.base_forms("boxes"), vec!["box"]);
        assert_eq!(g.base_forms("puppies"), vec!["puppy"]);
        assert!(g.base_forms("the").is_empty());
    }
}
