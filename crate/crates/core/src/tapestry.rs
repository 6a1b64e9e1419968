//! Informons, lattice geometry, and causal-consistency validation.
//!
//! A [`CausalTapestry`] is one generation of [`Informon`]s. Within a
//! generation the informons form an antichain: information only ever flows
//! from a previous generation, never sideways. Each informon remembers the
//! ancestors that fed it through its [`ContentSet`], and the union of those
//! content DAGs over a sealed tapestry must stay acyclic.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_complex::Complex64;
use thiserror::Error;

use crate::dynamics::Token;

/// A point of the embedding manifold: one time coordinate plus `dim`
/// spatial coordinates, in physical units.
#[derive(Debug, Clone, PartialEq)]
pub struct SpacetimePoint {
    pub t: f64,
    pub x: Vec<f64>,
}

impl SpacetimePoint {
    pub fn new(t: f64, x: Vec<f64>) -> Self {
        Self { t, x }
    }
}

/// A lattice site: generation index plus integer spatial coordinates.
///
/// The embedding point is `(generation * t_P, coords * l_P)`; the site and
/// its embedding are deliberately the same data up to scale.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LatticeSite {
    pub generation: i64,
    pub coords: Vec<i64>,
}

impl LatticeSite {
    pub fn new(generation: i64, coords: Vec<i64>) -> Self {
        Self { generation, coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// Physical embedding point of this site.
    pub fn embed(&self, t_p: f64, l_p: f64) -> SpacetimePoint {
        SpacetimePoint {
            t: self.generation as f64 * t_p,
            x: self.coords.iter().map(|&c| c as f64 * l_p).collect(),
        }
    }
}

impl fmt::Display for LatticeSite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "g{}[", self.generation)?;
        for (i, c) in self.coords.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, "]")
    }
}

/// Deterministic informon identifier: generation, site coordinates and the
/// generating subprocess tag.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Label {
    pub generation: i64,
    pub coords: Vec<i64>,
    pub tag: String,
}

impl Label {
    pub fn new(site: &LatticeSite, tag: &str) -> Self {
        Self {
            generation: site.generation,
            coords: site.coords.clone(),
            tag: tag.to_string(),
        }
    }

    pub fn site(&self) -> LatticeSite {
        LatticeSite::new(self.generation, self.coords.clone())
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.tag, self.site())
    }
}

/// Property record carried by an informon: sampled potential, character tag
/// and state value, all inherited from the generating process.
#[derive(Debug, Clone, PartialEq)]
pub struct Properties {
    pub potential: f64,
    pub character: String,
    pub state: String,
}

impl Default for Properties {
    fn default() -> Self {
        Self {
            potential: 0.0,
            character: "scalar".to_string(),
            state: String::new(),
        }
    }
}

/// Content set of an informon: the ancestors that passed information to it,
/// together with the causal-order edges among those ancestors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ContentSet {
    vertices: BTreeSet<Label>,
    edges: BTreeSet<(Label, Label)>,
}

impl ContentSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, ancestor: Label) {
        self.vertices.insert(ancestor);
    }

    pub fn insert_edge(&mut self, from: Label, to: Label) {
        self.vertices.insert(from.clone());
        self.vertices.insert(to.clone());
        self.edges.insert((from, to));
    }

    /// Merges another content set into this one (used by the transitive
    /// up-set storage mode).
    pub fn absorb(&mut self, other: &ContentSet) {
        self.vertices.extend(other.vertices.iter().cloned());
        self.edges.extend(other.edges.iter().cloned());
    }

    pub fn vertices(&self) -> impl Iterator<Item = &Label> {
        self.vertices.iter()
    }

    pub fn edges(&self) -> impl Iterator<Item = &(Label, Label)> {
        self.edges.iter()
    }

    pub fn contains(&self, label: &Label) -> bool {
        self.vertices.contains(label)
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }
}

/// One generated event: label, site, complex strength, properties, content
/// DAG and the token ledger that produced the strength.
#[derive(Debug, Clone)]
pub struct Informon {
    pub site: LatticeSite,
    pub tag: String,
    pub strength: Complex64,
    pub props: Properties,
    pub content: ContentSet,
    pub tokens: Vec<Token>,
}

impl Informon {
    pub fn new(site: LatticeSite, tag: &str, strength: Complex64, props: Properties) -> Self {
        Self {
            site,
            tag: tag.to_string(),
            strength,
            props,
            content: ContentSet::new(),
            tokens: Vec::new(),
        }
    }

    pub fn label(&self) -> Label {
        Label::new(&self.site, &self.tag)
    }

    /// Token sum in a fixed order (sorted by source label) so strengths do
    /// not depend on the order tokens were placed.
    pub fn token_sum(&self) -> Complex64 {
        let mut toks: Vec<&Token> = self.tokens.iter().collect();
        toks.sort_by(|a, b| a.source.cmp(&b.source));
        toks.iter().map(|t| t.amplitude).sum()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TapestryError {
    #[error("dimension {0} outside 1..=3")]
    BadDimension(usize),
    #[error("extent length {got} does not match dimension {dim}")]
    ExtentMismatch { dim: usize, got: usize },
    #[error("extent component must be >= 1")]
    EmptyExtent,
    #[error("tapestry is sealed")]
    Sealed,
    #[error("duplicate label {0}")]
    DuplicateLabel(String),
    #[error("site {site} already occupied by exclusively-coupled tag {other}")]
    ExclusiveSiteConflict { site: String, other: String },
    #[error("informon generation {got} does not match tapestry generation {want}")]
    GenerationMismatch { want: i64, got: i64 },
    #[error("no informon labelled {0}")]
    NoSuchInformon(String),
}

/// Enumerates the sites of a finite centered box at the given generation.
///
/// The box convention puts `extent` sites on each axis centred on the
/// origin, e.g. extent 3 covers coordinates -1, 0, 1.
pub fn make_lattice(
    dim: usize,
    extent: &[i64],
    generation: i64,
) -> Result<Vec<LatticeSite>, TapestryError> {
    if !(1..=3).contains(&dim) {
        return Err(TapestryError::BadDimension(dim));
    }
    if extent.len() != dim {
        return Err(TapestryError::ExtentMismatch {
            dim,
            got: extent.len(),
        });
    }
    if extent.iter().any(|&e| e < 1) {
        return Err(TapestryError::EmptyExtent);
    }
    let ranges: Vec<Vec<i64>> = extent
        .iter()
        .map(|&e| {
            let lo = -(e / 2);
            (lo..lo + e).collect()
        })
        .collect();
    let mut sites = Vec::new();
    let mut idx = vec![0usize; dim];
    loop {
        let coords: Vec<i64> = idx.iter().zip(&ranges).map(|(&i, r)| r[i]).collect();
        sites.push(LatticeSite::new(generation, coords));
        let mut axis = dim;
        loop {
            if axis == 0 {
                return Ok(sites);
            }
            axis -= 1;
            idx[axis] += 1;
            if idx[axis] < ranges[axis].len() {
                break;
            }
            idx[axis] = 0;
        }
    }
}

/// Validation outcome for [`validate_tapestry`]; report-valued, never fails.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationReport {
    pub antichain: bool,
    pub acyclic: bool,
    pub ancestors_precede: bool,
    pub messages: Vec<String>,
}

impl ValidationReport {
    pub fn pass(&self) -> bool {
        self.antichain && self.acyclic && self.ancestors_precede
    }
}

/// One sealed-or-building generation of informons.
#[derive(Debug, Clone, Default)]
pub struct CausalTapestry {
    generation: i64,
    informons: BTreeMap<Label, Informon>,
    by_site: BTreeMap<Vec<i64>, BTreeSet<String>>,
    exclusions: BTreeSet<(String, String)>,
    sealed: bool,
}

fn norm_pair(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

impl CausalTapestry {
    pub fn new(generation: i64) -> Self {
        Self {
            generation,
            ..Self::default()
        }
    }

    pub fn generation(&self) -> i64 {
        self.generation
    }

    pub fn is_sealed(&self) -> bool {
        self.sealed
    }

    pub fn len(&self) -> usize {
        self.informons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.informons.is_empty()
    }

    /// Declares a pair of subprocess tags as exclusively coupled: they may
    /// not occupy the same site of this tapestry.
    pub fn add_exclusion(&mut self, a: &str, b: &str) {
        self.exclusions.insert(norm_pair(a, b));
    }

    pub fn insert_informon(&mut self, informon: Informon) -> Result<(), TapestryError> {
        if self.sealed {
            return Err(TapestryError::Sealed);
        }
        if informon.site.generation != self.generation {
            return Err(TapestryError::GenerationMismatch {
                want: self.generation,
                got: informon.site.generation,
            });
        }
        let label = informon.label();
        if self.informons.contains_key(&label) {
            return Err(TapestryError::DuplicateLabel(label.to_string()));
        }
        if let Some(tags) = self.by_site.get(&informon.site.coords) {
            for other in tags {
                if self.exclusions.contains(&norm_pair(&informon.tag, other)) {
                    return Err(TapestryError::ExclusiveSiteConflict {
                        site: informon.site.to_string(),
                        other: other.clone(),
                    });
                }
            }
        }
        self.by_site
            .entry(informon.site.coords.clone())
            .or_default()
            .insert(informon.tag.clone());
        self.informons.insert(label, informon);
        Ok(())
    }

    /// Appends a token to an existing informon and refreshes its strength.
    pub fn add_token(&mut self, label: &Label, token: Token) -> Result<(), TapestryError> {
        if self.sealed {
            return Err(TapestryError::Sealed);
        }
        let informon = self
            .informons
            .get_mut(label)
            .ok_or_else(|| TapestryError::NoSuchInformon(label.to_string()))?;
        informon.content.insert(token.source.clone());
        informon.tokens.push(token);
        informon.strength = informon.token_sum();
        Ok(())
    }

    pub fn get(&self, label: &Label) -> Option<&Informon> {
        self.informons.get(label)
    }

    pub fn get_mut(&mut self, label: &Label) -> Option<&mut Informon> {
        if self.sealed {
            return None;
        }
        self.informons.get_mut(label)
    }

    pub fn informon_at(&self, coords: &[i64], tag: &str) -> Option<&Informon> {
        let label = Label {
            generation: self.generation,
            coords: coords.to_vec(),
            tag: tag.to_string(),
        };
        self.informons.get(&label)
    }

    pub fn tags_at(&self, coords: &[i64]) -> Option<&BTreeSet<String>> {
        self.by_site.get(coords)
    }

    /// Iterates informons in deterministic label order.
    pub fn iter(&self) -> impl Iterator<Item = &Informon> {
        self.informons.values()
    }

    /// Seals the tapestry: strengths are re-summed in a fixed order and the
    /// generation becomes immutable. Idempotent.
    pub fn seal(&mut self) {
        if self.sealed {
            return;
        }
        for informon in self.informons.values_mut() {
            if !informon.tokens.is_empty() {
                informon.strength = informon.token_sum();
            }
        }
        self.sealed = true;
    }

    /// Checks the antichain property, acyclicity of the union of content
    /// DAGs, and that every ancestor strictly precedes its informon.
    pub fn validate(&self) -> ValidationReport {
        let mut messages = Vec::new();

        let antichain = self
            .informons
            .values()
            .all(|n| n.site.generation == self.generation);
        if !antichain {
            messages.push("informons span more than one generation".to_string());
        }

        let mut ancestors_precede = true;
        for n in self.informons.values() {
            for a in n.content.vertices() {
                if a.generation >= n.site.generation {
                    ancestors_precede = false;
                    messages.push(format!(
                        "ancestor {a} does not precede informon {}",
                        n.label()
                    ));
                }
            }
            for (from, to) in n.content.edges() {
                if from.generation >= to.generation {
                    ancestors_precede = false;
                    messages.push(format!("content edge {from} -> {to} violates order"));
                }
            }
        }

        // Union of content DAGs plus the implicit ancestor -> informon edges.
        let mut edges: BTreeSet<(Label, Label)> = BTreeSet::new();
        for n in self.informons.values() {
            let label = n.label();
            for a in n.content.vertices() {
                edges.insert((a.clone(), label.clone()));
            }
            for e in n.content.edges() {
                edges.insert(e.clone());
            }
        }
        let acyclic = is_acyclic(&edges);
        if !acyclic {
            messages.push("union of content sets contains a cycle".to_string());
        }

        ValidationReport {
            antichain,
            acyclic,
            ancestors_precede,
            messages,
        }
    }

    /// JSON snapshot: one record per informon with the wire-format fields
    /// `{label, gen, coords, gamma_re, gamma_im, props, content_labels}`.
    pub fn snapshot(&self) -> serde_json::Value {
        let records: Vec<serde_json::Value> = self
            .informons
            .values()
            .map(|n| {
                serde_json::json!({
                    "label": n.label().to_string(),
                    "gen": n.site.generation,
                    "coords": n.site.coords,
                    "gamma_re": n.strength.re,
                    "gamma_im": n.strength.im,
                    "props": {
                        "potential": n.props.potential,
                        "character": n.props.character,
                        "state": n.props.state,
                        "tag": n.tag,
                    },
                    "content_labels": n.content.vertices().map(|l| l.to_string()).collect::<Vec<_>>(),
                })
            })
            .collect();
        serde_json::Value::Array(records)
    }
}

fn is_acyclic(edges: &BTreeSet<(Label, Label)>) -> bool {
    // Kahn's algorithm over the edge list.
    let mut indegree: BTreeMap<&Label, usize> = BTreeMap::new();
    let mut out: BTreeMap<&Label, Vec<&Label>> = BTreeMap::new();
    for (from, to) in edges {
        indegree.entry(from).or_insert(0);
        *indegree.entry(to).or_insert(0) += 1;
        out.entry(from).or_default().push(to);
    }
    let mut queue: Vec<&Label> = indegree
        .iter()
        .filter(|(_, &d)| d == 0)
        .map(|(&l, _)| l)
        .collect();
    let mut seen = 0usize;
    while let Some(l) = queue.pop() {
        seen += 1;
        if let Some(next) = out.get(l) {
            for &n in next {
                let d = indegree.get_mut(n).unwrap();
                *d -= 1;
                if *d == 0 {
                    queue.push(n);
                }
            }
        }
    }
    seen == indegree.len()
}

/// Report-valued consistency check, mirroring [`CausalTapestry::validate`].
pub fn validate_tapestry(tapestry: &CausalTapestry) -> ValidationReport {
    tapestry.validate()
}
