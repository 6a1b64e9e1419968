//! Process-algebra expression trees, simplification against the null
//! subalgebra, sequence trees, and the (configuration) process covering
//! maps at enumerable scale.
//!
//! Coupling semantics, as realised by the enumeration:
//!
//! - Sums act sequentially: each round exactly one branch generates. For
//!   independent sums a complete action requires every branch to finish its
//!   own round budget; for interactive sums the budget belongs to the sum
//!   itself and an explicit rule filters which branch may act next.
//! - Products act concurrently: every factor generates each round, and the
//!   edge of the sequence tree is the informon tuple. Interactive products
//!   filter tuples through their rule.
//! - Exclusive couplings keep each informon owned by exactly one
//!   subprocess; co-sited informons of different subprocesses remain
//!   distinct. Free couplings instead merge co-sited contributions into a
//!   single informon.
//! - A scalar weight scales the informons generated under it; weights above
//!   the outermost product apply once per tuple in configuration fields.
//!
//! Completion per combinator: a primitive finishes after `rounds` moves; an
//! independent sum or product when all children have finished; an
//! interactive sum after `rounds` total moves. Paths that stall before
//! completing are excluded from covering maps (and counted).

use std::collections::{BTreeMap, BTreeSet};

use num_complex::Complex64;
use rand::Rng;
use thiserror::Error;

use crate::dynamics::{contributors, propagator, DynamicsError, StrategyParams, Token};
use crate::interp::{global_field, sinc_kernel, InterpError, WaveField};
use crate::tapestry::{
    make_lattice, CausalTapestry, Informon, Label, LatticeSite, Properties, SpacetimePoint,
    TapestryError,
};
use crate::SimRng;

/// A primitive process: one entity generating one informon per round.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimitiveSpec {
    pub id: String,
    pub character: String,
    pub state: String,
    pub fermionic: bool,
    /// Prior informon tags this process draws tokens from; `None` draws
    /// from the whole prior generation.
    pub source_tags: Option<BTreeSet<String>>,
}

impl PrimitiveSpec {
    pub fn new(id: &str) -> Self {
        Self {
            id: id.to_string(),
            character: "scalar".to_string(),
            state: id.to_string(),
            fermionic: false,
            source_tags: None,
        }
    }

    pub fn with_character(mut self, character: &str) -> Self {
        self.character = character.to_string();
        self
    }

    pub fn with_state(mut self, state: &str) -> Self {
        self.state = state.to_string();
        self
    }

    pub fn fermionic(mut self) -> Self {
        self.fermionic = true;
        self
    }

    pub fn drawing_from(mut self, tags: &[&str]) -> Self {
        self.source_tags = Some(tags.iter().map(|t| t.to_string()).collect());
        self
    }
}

/// Algebraic tree of processes under the eight coupling combinators,
/// scalar multiples, concatenation and the zero process.
#[derive(Debug, Clone, PartialEq)]
pub enum ProcessExpr {
    Primitive(PrimitiveSpec),
    Zero,
    Scalar(Complex64, Box<ProcessExpr>),
    SumExcl(Vec<ProcessExpr>),
    SumFree(Vec<ProcessExpr>),
    SumInter(Vec<ProcessExpr>, String),
    ProdExcl(Vec<ProcessExpr>),
    ProdFree(Vec<ProcessExpr>),
    ProdInter(Vec<ProcessExpr>, String),
    Concat(Box<ProcessExpr>, Box<ProcessExpr>),
}

impl ProcessExpr {
    pub fn primitive(id: &str) -> Self {
        ProcessExpr::Primitive(PrimitiveSpec::new(id))
    }

    pub fn scaled(self, w: Complex64) -> Self {
        ProcessExpr::Scalar(w, Box::new(self))
    }
}

/// Forms the concatenated process; evaluation runs the left generation
/// first, then the right on its result. Non-commutative.
pub fn concatenate(p: ProcessExpr, q: ProcessExpr) -> ProcessExpr {
    ProcessExpr::Concat(Box::new(p), Box::new(q))
}

/// Interactive-coupling rule: a deterministic predicate over the previous
/// and proposed moves.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingRule {
    pub name: String,
    pub kind: RuleKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RuleKind {
    /// Product tuples are admissible only when every factor informon
    /// carries the same state value (entanglement pairing).
    StatePairing,
    /// Once a sink branch of an interactive sum acts, only that branch may
    /// act afterwards (one-way transitions).
    OneWaySink { sinks: BTreeSet<usize> },
}

impl CouplingRule {
    fn admits_sum_child(&self, prev: Option<usize>, next: usize) -> bool {
        match &self.kind {
            RuleKind::OneWaySink { sinks } => match prev {
                Some(p) if sinks.contains(&p) => next == p,
                _ => true,
            },
            RuleKind::StatePairing => true,
        }
    }

    fn admits_tuple(&self, states: &[&str]) -> bool {
        match &self.kind {
            RuleKind::StatePairing => states.windows(2).all(|w| w[0] == w[1]),
            RuleKind::OneWaySink { .. } => true,
        }
    }
}

/// Named rules available to interactive couplings.
#[derive(Debug, Clone, Default)]
pub struct RuleTable {
    rules: BTreeMap<String, CouplingRule>,
}

impl RuleTable {
    pub fn empty() -> Self {
        Self::default()
    }

    /// The two shipped rules: `pairing` (entanglement) and `cat` (one-way
    /// transition into the second branch).
    pub fn builtin() -> Self {
        let mut t = Self::default();
        t.insert(CouplingRule {
            name: "pairing".to_string(),
            kind: RuleKind::StatePairing,
        });
        t.insert(CouplingRule {
            name: "cat".to_string(),
            kind: RuleKind::OneWaySink {
                sinks: [1usize].into_iter().collect(),
            },
        });
        t
    }

    pub fn insert(&mut self, rule: CouplingRule) {
        self.rules.insert(rule.name.clone(), rule);
    }

    pub fn get(&self, name: &str) -> Option<&CouplingRule> {
        self.rules.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.rules.keys().map(|s| s.as_str())
    }
}

#[derive(Debug, Error)]
pub enum AlgebraError {
    #[error("unknown coupling rule `{0}`")]
    UnknownRule(String),
    #[error("malformed expression: {0}")]
    Malformed(String),
    #[error("enumeration cap exceeded after {0} paths; shrink the instance")]
    CapExceeded(usize),
    #[error("configuration covering map requires a product expression")]
    NotAProduct,
    #[error("factor grid count {got} does not match product arity {want}")]
    ArityMismatch { want: usize, got: usize },
    #[error("concatenation has operational semantics only; evaluate it instead")]
    ConcatUnsupported,
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Interp(#[from] InterpError),
    #[error(transparent)]
    Tapestry(#[from] TapestryError),
}

/// Declares which couplings collapse into the null subalgebra.
#[derive(Debug, Clone)]
pub struct CompatTable {
    /// Sums of processes with different character tags vanish.
    pub mixed_character_sums_vanish: bool,
    /// Products of processes with different character tags vanish. Off by
    /// default: the rule of thumb lets distinct characters form products.
    pub mixed_character_products_vanish: bool,
    /// Primitive-id pairs whose products are declared impossible.
    pub incompatible_products: BTreeSet<(String, String)>,
}

impl Default for CompatTable {
    fn default() -> Self {
        Self {
            mixed_character_sums_vanish: true,
            mixed_character_products_vanish: false,
            incompatible_products: BTreeSet::new(),
        }
    }
}

impl CompatTable {
    pub fn declare_incompatible(&mut self, a: &str, b: &str) {
        let pair = if a <= b {
            (a.to_string(), b.to_string())
        } else {
            (b.to_string(), a.to_string())
        };
        self.incompatible_products.insert(pair);
    }

    fn incompatible(&self, a: &str, b: &str) -> bool {
        let pair = if a <= b {
            (a.to_string(), b.to_string())
        } else {
            (b.to_string(), a.to_string())
        };
        self.incompatible_products.contains(&pair)
    }

    /// The detector/cat table: a released cannister cannot coexist with a
    /// living cat.
    pub fn cat() -> Self {
        let mut t = Self::default();
        t.declare_incompatible("Dr", "Ca");
        t
    }
}

fn leaf_specs(expr: &ProcessExpr) -> Vec<&PrimitiveSpec> {
    match expr {
        ProcessExpr::Primitive(p) => vec![p],
        ProcessExpr::Zero => vec![],
        ProcessExpr::Scalar(_, e) => leaf_specs(e),
        ProcessExpr::SumExcl(cs)
        | ProcessExpr::SumFree(cs)
        | ProcessExpr::SumInter(cs, _)
        | ProcessExpr::ProdExcl(cs)
        | ProcessExpr::ProdFree(cs)
        | ProcessExpr::ProdInter(cs, _) => cs.iter().flat_map(leaf_specs).collect(),
        ProcessExpr::Concat(l, r) => {
            let mut v = leaf_specs(l);
            v.extend(leaf_specs(r));
            v
        }
    }
}

fn character_of(expr: &ProcessExpr) -> Option<String> {
    let chars: BTreeSet<&str> = leaf_specs(expr)
        .iter()
        .map(|p| p.character.as_str())
        .collect();
    if chars.len() == 1 {
        chars.into_iter().next().map(|s| s.to_string())
    } else {
        None
    }
}

/// Rewrites an expression to normal form against the null subalgebra:
/// zero is the sum identity and absorbs products, character-mismatched
/// sums vanish, declared-incompatible and fermionic self-products vanish,
/// scalars fold together and distribute over exclusive sums.
pub fn simplify(
    expr: &ProcessExpr,
    compat: &CompatTable,
    rules: &RuleTable,
) -> Result<ProcessExpr, AlgebraError> {
    let out = match expr {
        ProcessExpr::Primitive(_) | ProcessExpr::Zero => expr.clone(),
        ProcessExpr::Scalar(w, child) => {
            let child = simplify(child, compat, rules)?;
            match child {
                ProcessExpr::Zero => ProcessExpr::Zero,
                ProcessExpr::Scalar(w2, inner) => ProcessExpr::Scalar(w * w2, inner),
                ProcessExpr::SumExcl(cs) => {
                    // Scalars distribute over exclusive sums.
                    let spread = cs
                        .into_iter()
                        .map(|c| simplify(&ProcessExpr::Scalar(*w, Box::new(c)), compat, rules))
                        .collect::<Result<Vec<_>, _>>()?;
                    simplify(&ProcessExpr::SumExcl(spread), compat, rules)?
                }
                other if *w == Complex64::new(1.0, 0.0) => other,
                other => ProcessExpr::Scalar(*w, Box::new(other)),
            }
        }
        ProcessExpr::SumExcl(cs) => simplify_sum(cs, SumKind::Excl, None, compat, rules)?,
        ProcessExpr::SumFree(cs) => simplify_sum(cs, SumKind::Free, None, compat, rules)?,
        ProcessExpr::SumInter(cs, rule) => {
            if rules.get(rule).is_none() {
                return Err(AlgebraError::UnknownRule(rule.clone()));
            }
            simplify_sum(cs, SumKind::Inter, Some(rule.clone()), compat, rules)?
        }
        ProcessExpr::ProdExcl(cs) => simplify_prod(cs, ProdKind::Excl, None, compat, rules)?,
        ProcessExpr::ProdFree(cs) => simplify_prod(cs, ProdKind::Free, None, compat, rules)?,
        ProcessExpr::ProdInter(cs, rule) => {
            if rules.get(rule).is_none() {
                return Err(AlgebraError::UnknownRule(rule.clone()));
            }
            simplify_prod(cs, ProdKind::Inter, Some(rule.clone()), compat, rules)?
        }
        ProcessExpr::Concat(l, r) => ProcessExpr::Concat(
            Box::new(simplify(l, compat, rules)?),
            Box::new(simplify(r, compat, rules)?),
        ),
    };
    Ok(out)
}

#[derive(Clone, Copy, PartialEq)]
enum SumKind {
    Excl,
    Free,
    Inter,
}

#[derive(Clone, Copy, PartialEq)]
enum ProdKind {
    Excl,
    Free,
    Inter,
}

fn simplify_sum(
    children: &[ProcessExpr],
    kind: SumKind,
    rule: Option<String>,
    compat: &CompatTable,
    rules: &RuleTable,
) -> Result<ProcessExpr, AlgebraError> {
    let mut kept = Vec::new();
    for c in children {
        let s = simplify(c, compat, rules)?;
        match s {
            ProcessExpr::Zero => {}
            // Flatten independent nests of the same kind.
            ProcessExpr::SumExcl(inner) if kind == SumKind::Excl => kept.extend(inner),
            ProcessExpr::SumFree(inner) if kind == SumKind::Free => kept.extend(inner),
            other => kept.push(other),
        }
    }
    if kept.is_empty() {
        return Ok(ProcessExpr::Zero);
    }
    if compat.mixed_character_sums_vanish {
        let definite: BTreeSet<String> = kept.iter().filter_map(character_of).collect();
        if definite.len() > 1 {
            return Ok(ProcessExpr::Zero);
        }
    }
    if kept.len() == 1 && kind != SumKind::Inter {
        return Ok(kept.pop().unwrap());
    }
    if kind != SumKind::Inter {
        kept.sort_by(|a, b| format!("{a:?}").cmp(&format!("{b:?}")));
    }
    Ok(match kind {
        SumKind::Excl => ProcessExpr::SumExcl(kept),
        SumKind::Free => ProcessExpr::SumFree(kept),
        SumKind::Inter => ProcessExpr::SumInter(kept, rule.unwrap()),
    })
}

fn simplify_prod(
    children: &[ProcessExpr],
    kind: ProdKind,
    rule: Option<String>,
    compat: &CompatTable,
    rules: &RuleTable,
) -> Result<ProcessExpr, AlgebraError> {
    let mut kept = Vec::new();
    for c in children {
        let s = simplify(c, compat, rules)?;
        match s {
            ProcessExpr::Zero => return Ok(ProcessExpr::Zero),
            ProcessExpr::ProdExcl(inner) if kind == ProdKind::Excl => kept.extend(inner),
            ProcessExpr::ProdFree(inner) if kind == ProdKind::Free => kept.extend(inner),
            other => kept.push(other),
        }
    }
    if kept.is_empty() {
        return Ok(ProcessExpr::Zero);
    }
    if compat.mixed_character_products_vanish {
        let definite: BTreeSet<String> = kept.iter().filter_map(character_of).collect();
        if definite.len() > 1 {
            return Ok(ProcessExpr::Zero);
        }
    }
    // Declared-incompatible pairs and fermionic identical-state
    // self-products collapse the whole product.
    let leaves: Vec<Vec<&PrimitiveSpec>> = kept.iter().map(|c| leaf_specs(c)).collect();
    for i in 0..leaves.len() {
        for j in i + 1..leaves.len() {
            for a in &leaves[i] {
                for b in &leaves[j] {
                    if compat.incompatible(&a.id, &b.id) {
                        return Ok(ProcessExpr::Zero);
                    }
                    if a.fermionic && b.fermionic && a.id == b.id && a.state == b.state {
                        return Ok(ProcessExpr::Zero);
                    }
                }
            }
        }
    }
    if kept.len() == 1 && kind != ProdKind::Inter {
        return Ok(kept.pop().unwrap());
    }
    Ok(match kind {
        ProdKind::Excl => ProcessExpr::ProdExcl(kept),
        ProdKind::Free => ProcessExpr::ProdFree(kept),
        ProdKind::Inter => ProcessExpr::ProdInter(kept, rule.unwrap()),
    })
}

// ---------------------------------------------------------------------------
// Enumeration machinery
// ---------------------------------------------------------------------------

/// Compiled view of an expression: scalar weights folded onto primitives,
/// tuple weight split off at the outermost product.
#[derive(Debug, Clone)]
struct Compiled {
    prims: Vec<CompiledPrim>,
    root: CNode,
    arity: usize,
    tuple_weight: Complex64,
    /// merge_ok[i][j]: the nearest common coupling of primitives i and j is
    /// free, so co-sited contributions merge into one informon.
    merge_ok: Vec<Vec<bool>>,
}

#[derive(Debug, Clone)]
struct CompiledPrim {
    spec: PrimitiveSpec,
    slot: usize,
    weight: Complex64,
}

#[derive(Debug, Clone)]
enum CNode {
    Prim(usize),
    Zero,
    Sum {
        kind: SumKind2,
        children: Vec<CNode>,
        rule: Option<String>,
    },
    Prod {
        children: Vec<CNode>,
        rule: Option<String>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum SumKind2 {
    Excl,
    Free,
    Inter,
}

#[derive(Debug, Clone, PartialEq)]
enum NodeState {
    Prim {
        moves: usize,
        /// Coordinates this primitive has already generated into, including
        /// merges into informons owned by another tag.
        used: BTreeSet<Vec<i64>>,
    },
    Zero,
    Sum {
        children: Vec<NodeState>,
        total: usize,
        last: Option<usize>,
    },
    Prod {
        children: Vec<NodeState>,
    },
}

fn initial_state(node: &CNode) -> NodeState {
    match node {
        CNode::Prim(_) => NodeState::Prim {
            moves: 0,
            used: BTreeSet::new(),
        },
        CNode::Zero => NodeState::Zero,
        CNode::Sum { children, .. } => NodeState::Sum {
            children: children.iter().map(initial_state).collect(),
            total: 0,
            last: None,
        },
        CNode::Prod { children, .. } => NodeState::Prod {
            children: children.iter().map(initial_state).collect(),
        },
    }
}

struct CompileCtx {
    prims: Vec<CompiledPrim>,
    seen_ids: BTreeSet<String>,
    tuple_weight: Complex64,
    // Path of (combinator id, free?) couplings for merge scoping.
    paths: Vec<Vec<(usize, bool)>>,
    next_combinator: usize,
}

fn compile(expr: &ProcessExpr) -> Result<Compiled, AlgebraError> {
    let mut ctx = CompileCtx {
        prims: Vec::new(),
        seen_ids: BTreeSet::new(),
        tuple_weight: Complex64::new(1.0, 0.0),
        paths: Vec::new(),
        next_combinator: 0,
    };
    let mut slot = 0usize;
    let root = compile_node(
        expr,
        &mut ctx,
        Complex64::new(1.0, 0.0),
        false,
        &mut slot,
        &mut Vec::new(),
    )?;
    let arity = slot.max(1);
    let n = ctx.prims.len();
    let mut merge_ok = vec![vec![false; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            // The deepest shared coupling decides.
            let (pa, pb) = (&ctx.paths[i], &ctx.paths[j]);
            let shared = pa.iter().zip(pb.iter()).take_while(|(a, b)| a == b).count();
            if shared > 0 {
                merge_ok[i][j] = pa[shared - 1].1;
            }
        }
    }
    Ok(Compiled {
        prims: ctx.prims,
        root,
        arity,
        tuple_weight: ctx.tuple_weight,
        merge_ok,
    })
}

fn compile_node(
    expr: &ProcessExpr,
    ctx: &mut CompileCtx,
    weight: Complex64,
    inside_product: bool,
    slot: &mut usize,
    path: &mut Vec<(usize, bool)>,
) -> Result<CNode, AlgebraError> {
    match expr {
        ProcessExpr::Primitive(spec) => {
            if !ctx.seen_ids.insert(spec.id.clone()) {
                return Err(AlgebraError::Malformed(format!(
                    "primitive id `{}` appears twice; ids double as subprocess tags",
                    spec.id
                )));
            }
            let idx = ctx.prims.len();
            ctx.prims.push(CompiledPrim {
                spec: spec.clone(),
                slot: *slot,
                weight,
            });
            ctx.paths.push(path.clone());
            *slot += 1;
            Ok(CNode::Prim(idx))
        }
        ProcessExpr::Zero => Ok(CNode::Zero),
        ProcessExpr::Scalar(w, child) => {
            compile_node(child, ctx, weight * w, inside_product, slot, path)
        }
        ProcessExpr::SumExcl(cs) | ProcessExpr::SumFree(cs) | ProcessExpr::SumInter(cs, _) => {
            let (kind, rule, free) = match expr {
                ProcessExpr::SumExcl(_) => (SumKind2::Excl, None, false),
                ProcessExpr::SumFree(_) => (SumKind2::Free, None, true),
                ProcessExpr::SumInter(_, r) => (SumKind2::Inter, Some(r.clone()), false),
                _ => unreachable!(),
            };
            let id = ctx.next_combinator;
            ctx.next_combinator += 1;
            path.push((id, free));
            // A sum's branches share slots: each round only one branch acts,
            // so slots restart per child and the sum spans the widest child.
            let base_slot = *slot;
            let mut max_slot = base_slot;
            let mut nodes = Vec::with_capacity(cs.len());
            for c in cs {
                let mut child_slot = base_slot;
                nodes.push(compile_node(
                    c,
                    ctx,
                    weight,
                    inside_product,
                    &mut child_slot,
                    path,
                )?);
                max_slot = max_slot.max(child_slot);
            }
            *slot = max_slot;
            path.pop();
            Ok(CNode::Sum {
                kind,
                children: nodes,
                rule,
            })
        }
        ProcessExpr::ProdExcl(cs) | ProcessExpr::ProdFree(cs) | ProcessExpr::ProdInter(cs, _) => {
            let (free, rule) = match expr {
                ProcessExpr::ProdExcl(_) => (false, None),
                ProcessExpr::ProdFree(_) => (true, None),
                ProcessExpr::ProdInter(_, r) => (false, Some(r.clone())),
                _ => unreachable!(),
            };
            let entering = !inside_product;
            if entering {
                ctx.tuple_weight = weight;
            }
            let inner_weight = if entering {
                Complex64::new(1.0, 0.0)
            } else {
                weight
            };
            let id = ctx.next_combinator;
            ctx.next_combinator += 1;
            path.push((id, free));
            let children = cs
                .iter()
                .map(|c| compile_node(c, ctx, inner_weight, true, slot, path))
                .collect::<Result<Vec<_>, AlgebraError>>()?;
            path.pop();
            Ok(CNode::Prod { children, rule })
        }
        ProcessExpr::Concat(..) => Err(AlgebraError::ConcatUnsupported),
    }
}

fn is_complete(node: &CNode, state: &NodeState, rounds: usize) -> bool {
    match (node, state) {
        (CNode::Prim(_), NodeState::Prim { moves, .. }) => *moves >= rounds,
        (CNode::Zero, _) => true,
        (
            CNode::Sum { kind, children, .. },
            NodeState::Sum {
                children: st,
                total,
                ..
            },
        ) => match kind {
            SumKind2::Inter => *total >= rounds,
            _ => children
                .iter()
                .zip(st)
                .all(|(c, s)| is_complete(c, s, rounds)),
        },
        (CNode::Prod { children, .. }, NodeState::Prod { children: st }) => children
            .iter()
            .zip(st)
            .all(|(c, s)| is_complete(c, s, rounds)),
        _ => unreachable!("state shape mismatch"),
    }
}

/// One primitive's action within a round: pick a site, create or merge.
#[derive(Debug, Clone)]
struct SlotAction {
    prim: usize,
    site: LatticeSite,
    merge_into: Option<Label>,
}

#[derive(Debug, Clone)]
struct RoundMove {
    actions: Vec<SlotAction>,
    state: NodeState,
    /// Chosen branch indices of interactive sums, for the transition log.
    choices: Vec<usize>,
}

struct EnumEnv<'a> {
    compiled: &'a Compiled,
    prior: &'a CausalTapestry,
    params: &'a StrategyParams,
    rules: &'a RuleTable,
    box_sites: Vec<LatticeSite>,
    site_budget: usize,
    rounds: usize,
}

impl EnumEnv<'_> {
    fn admissible_sites(
        &self,
        prim_idx: usize,
        used: &BTreeSet<Vec<i64>>,
        nascent: &CausalTapestry,
    ) -> Vec<LatticeSite> {
        let prim = &self.compiled.prims[prim_idx];
        let mut sites: Vec<LatticeSite> = self
            .box_sites
            .iter()
            .filter(|s| !used.contains(&s.coords))
            .filter(|s| nascent.informon_at(&s.coords, &prim.spec.id).is_none())
            .filter(|s| {
                !contributors(self.prior, s, self.params, |n| {
                    prim.spec
                        .source_tags
                        .as_ref()
                        .is_none_or(|tags| tags.contains(&n.tag))
                })
                .is_empty()
            })
            .cloned()
            .collect();
        sites.truncate(self.site_budget);
        sites
    }

    fn moves(
        &self,
        node: &CNode,
        state: &NodeState,
        nascent: &CausalTapestry,
    ) -> Result<Vec<RoundMove>, AlgebraError> {
        match (node, state) {
            (CNode::Zero, _) => Ok(vec![]),
            (CNode::Prim(idx), NodeState::Prim { moves, used }) => {
                if *moves >= self.rounds {
                    return Ok(vec![]);
                }
                Ok(self
                    .admissible_sites(*idx, used, nascent)
                    .into_iter()
                    .map(|site| {
                        let merge_into = self.merge_partner(*idx, &site, nascent);
                        let mut next_used = used.clone();
                        next_used.insert(site.coords.clone());
                        RoundMove {
                            actions: vec![SlotAction {
                                prim: *idx,
                                site,
                                merge_into,
                            }],
                            state: NodeState::Prim {
                                moves: moves + 1,
                                used: next_used,
                            },
                            choices: Vec::new(),
                        }
                    })
                    .collect())
            }
            (
                CNode::Sum {
                    kind,
                    children,
                    rule,
                },
                NodeState::Sum {
                    children: st,
                    total,
                    last,
                },
            ) => {
                if *kind == SumKind2::Inter && *total >= self.rounds {
                    return Ok(vec![]);
                }
                let rule_obj = match rule {
                    Some(name) => Some(
                        self.rules
                            .get(name)
                            .ok_or_else(|| AlgebraError::UnknownRule(name.clone()))?,
                    ),
                    None => None,
                };
                let mut out = Vec::new();
                for (j, (child, child_state)) in children.iter().zip(st).enumerate() {
                    if let Some(r) = rule_obj {
                        if !r.admits_sum_child(*last, j) {
                            continue;
                        }
                    }
                    for m in self.moves(child, child_state, nascent)? {
                        let mut new_children = st.clone();
                        new_children[j] = m.state;
                        let mut choices = m.choices;
                        if *kind == SumKind2::Inter {
                            choices.push(j);
                        }
                        out.push(RoundMove {
                            actions: m.actions,
                            state: NodeState::Sum {
                                children: new_children,
                                total: total + 1,
                                last: Some(j),
                            },
                            choices,
                        });
                    }
                }
                Ok(out)
            }
            (CNode::Prod { children, rule }, NodeState::Prod { children: st }) => {
                let rule_obj = match rule {
                    Some(name) => Some(
                        self.rules
                            .get(name)
                            .ok_or_else(|| AlgebraError::UnknownRule(name.clone()))?,
                    ),
                    None => None,
                };
                // Every factor acts; combine children's moves.
                let mut combos: Vec<RoundMove> = vec![RoundMove {
                    actions: Vec::new(),
                    state: NodeState::Prod {
                        children: st.clone(),
                    },
                    choices: Vec::new(),
                }];
                for (j, (child, child_state)) in children.iter().zip(st).enumerate() {
                    let child_moves = self.moves(child, child_state, nascent)?;
                    if child_moves.is_empty() {
                        return Ok(vec![]); // a stalled factor stalls the product
                    }
                    let mut next = Vec::with_capacity(combos.len() * child_moves.len());
                    for base in &combos {
                        for m in &child_moves {
                            let mut actions = base.actions.clone();
                            actions.extend(m.actions.iter().cloned());
                            let mut state_children = match &base.state {
                                NodeState::Prod { children } => children.clone(),
                                _ => unreachable!(),
                            };
                            state_children[j] = m.state.clone();
                            let mut choices = base.choices.clone();
                            choices.extend(m.choices.iter().cloned());
                            next.push(RoundMove {
                                actions,
                                state: NodeState::Prod {
                                    children: state_children,
                                },
                                choices,
                            });
                        }
                    }
                    combos = next;
                }
                if let Some(r) = rule_obj {
                    combos.retain(|m| {
                        let states: Vec<&str> = m
                            .actions
                            .iter()
                            .map(|a| self.compiled.prims[a.prim].spec.state.as_str())
                            .collect();
                        r.admits_tuple(&states)
                    });
                }
                Ok(combos)
            }
            _ => unreachable!("state shape mismatch"),
        }
    }

    fn merge_partner(
        &self,
        prim_idx: usize,
        site: &LatticeSite,
        nascent: &CausalTapestry,
    ) -> Option<Label> {
        let tags = nascent.tags_at(&site.coords)?;
        for tag in tags {
            if let Some(other_idx) = self.compiled.prims.iter().position(|p| &p.spec.id == tag) {
                if self.compiled.merge_ok[prim_idx][other_idx] {
                    return Some(Label {
                        generation: site.generation,
                        coords: site.coords.clone(),
                        tag: tag.clone(),
                    });
                }
            }
        }
        None
    }

    /// Applies a move: builds or extends informons, returns the tuple entry.
    fn apply(
        &self,
        mv: &RoundMove,
        nascent: &mut CausalTapestry,
    ) -> Result<TupleEntry, AlgebraError> {
        let mut labels = vec![None; self.compiled.arity];
        let mut amps = vec![Complex64::new(0.0, 0.0); self.compiled.arity];
        let mut props = vec![Properties::default(); self.compiled.arity];
        for action in &mv.actions {
            let prim = &self.compiled.prims[action.prim];
            let sources = contributors(self.prior, &action.site, self.params, |n| {
                prim.spec
                    .source_tags
                    .as_ref()
                    .is_none_or(|tags| tags.contains(&n.tag))
            });
            let full_weight = prim.weight * self.compiled.tuple_weight;
            let slot_props = Properties {
                potential: self.params.potential.value(&action.site, self.params.l_p),
                character: prim.spec.character.clone(),
                state: prim.spec.state.clone(),
            };
            let mut raw = Complex64::new(0.0, 0.0);
            let label = match &action.merge_into {
                Some(existing) => {
                    for src in &sources {
                        let amp = propagator(&src.site, &action.site, self.params)? * src.strength;
                        raw += amp;
                        nascent.add_token(
                            existing,
                            Token {
                                source: src.label(),
                                target: existing.clone(),
                                amplitude: amp * full_weight,
                            },
                        )?;
                    }
                    existing.clone()
                }
                None => {
                    let mut informon = Informon::new(
                        action.site.clone(),
                        &prim.spec.id,
                        Complex64::new(0.0, 0.0),
                        slot_props.clone(),
                    );
                    let label = informon.label();
                    for src in &sources {
                        let amp = propagator(&src.site, &action.site, self.params)? * src.strength;
                        raw += amp;
                        informon.tokens.push(Token {
                            source: src.label(),
                            target: label.clone(),
                            amplitude: amp * full_weight,
                        });
                        informon.content.insert(src.label());
                    }
                    informon.strength = informon.token_sum();
                    nascent.insert_informon(informon)?;
                    label
                }
            };
            amps[prim.slot] = raw * prim.weight;
            props[prim.slot] = slot_props;
            labels[prim.slot] = Some(label);
        }
        Ok(TupleEntry {
            labels: labels.into_iter().flatten().collect(),
            slot_amps: amps,
            slot_props: props,
            weight: self.compiled.tuple_weight,
        })
    }
}

/// One informon tuple of a configuration tapestry: component labels, the
/// per-factor amplitudes, and the tuple weight.
#[derive(Debug, Clone)]
pub struct TupleEntry {
    pub labels: Vec<Label>,
    pub slot_amps: Vec<Complex64>,
    pub slot_props: Vec<Properties>,
    pub weight: Complex64,
}

impl TupleEntry {
    fn close_to(&self, other: &TupleEntry, tol: f64) -> bool {
        self.labels == other.labels
            && self
                .slot_amps
                .iter()
                .zip(&other.slot_amps)
                .all(|(a, b)| (a - b).norm() <= tol)
            && (self.weight - other.weight).norm() <= tol
    }
}

/// A configuration-space causal tapestry: a set of informon tuples.
#[derive(Debug, Clone, Default)]
pub struct TupleTapestry {
    pub entries: Vec<TupleEntry>,
}

impl TupleTapestry {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn contains(&self, entry: &TupleEntry, tol: f64) -> bool {
        self.entries.iter().any(|e| e.close_to(entry, tol))
    }

    fn eq_tol(&self, other: &TupleTapestry, tol: f64) -> bool {
        self.entries.len() == other.entries.len()
            && self.entries.iter().all(|e| other.contains(e, tol))
            && other.entries.iter().all(|e| self.contains(e, tol))
    }
}

const GAMMA_TOL: f64 = 1e-12;

/// Consistent union: keeps the left tapestry and adjoins the right's
/// admissible tuples. A tuple is inadmissible when one of its components
/// matches an existing component's site and properties while disagreeing
/// in strength.
pub fn consistent_union(k1: &TupleTapestry, k2: &TupleTapestry) -> TupleTapestry {
    let mut out = k1.clone();
    for entry in &k2.entries {
        if out.contains(entry, GAMMA_TOL) {
            continue;
        }
        let admissible = entry.labels.iter().enumerate().all(|(slot, label)| {
            out.entries.iter().all(|g| {
                let same_site = g.labels[slot].site() == label.site();
                let same_props = g.slot_props[slot] == entry.slot_props[slot];
                if same_site && same_props {
                    (g.slot_amps[slot] - entry.slot_amps[slot]).norm() <= GAMMA_TOL
                } else {
                    true
                }
            })
        });
        if admissible {
            out.entries.push(entry.clone());
        }
    }
    out
}

/// Rooted tree of possible histories. Vertices hold partial tapestries
/// implicitly (replay the edges from the root); edges carry informon
/// tuples.
#[derive(Debug, Clone)]
pub struct SequenceTree {
    pub nodes: Vec<TreeNode>,
    pub complete_leaves: Vec<usize>,
    pub stalled_paths: usize,
}

#[derive(Debug, Clone)]
pub struct TreeNode {
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub depth: usize,
    pub edge: Option<Vec<Label>>,
}

impl SequenceTree {
    /// DOT-format rendering for inspection.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph sequence_tree {\n  rankdir=TB;\n");
        for (i, n) in self.nodes.iter().enumerate() {
            let shape = if self.complete_leaves.contains(&i) {
                "doublecircle"
            } else {
                "circle"
            };
            out.push_str(&format!("  n{i} [label=\"{}\", shape={shape}];\n", n.depth));
        }
        for (i, n) in self.nodes.iter().enumerate() {
            if let (Some(p), Some(edge)) = (n.parent, &n.edge) {
                let label: Vec<String> = edge.iter().map(|l| l.to_string()).collect();
                out.push_str(&format!(
                    "  n{p} -> n{i} [label=\"{}\"];\n",
                    label.join(", ")
                ));
            }
        }
        out.push_str("}\n");
        out
    }
}

/// A complete path: its sealed tapestry, tuple trace, and the sequence of
/// interactive-sum branch choices.
#[derive(Debug, Clone)]
pub struct PathOutcome {
    pub leaf: usize,
    pub tapestry: CausalTapestry,
    pub tuples: Vec<TupleEntry>,
    pub branch_log: Vec<usize>,
}

/// Result of exhaustive enumeration.
#[derive(Debug, Clone)]
pub struct Enumeration {
    pub tree: SequenceTree,
    pub outcomes: Vec<PathOutcome>,
}

/// Enumeration context: strategy, rules, and the caps that keep instances
/// enumerable.
pub struct EnumContext<'a> {
    pub params: &'a StrategyParams,
    pub rules: &'a RuleTable,
    pub path_cap: usize,
    pub site_budget: usize,
}

impl<'a> EnumContext<'a> {
    pub fn new(params: &'a StrategyParams, rules: &'a RuleTable) -> Self {
        Self {
            params,
            rules,
            path_cap: 100_000,
            site_budget: usize::MAX,
        }
    }
}

/// Exhaustively enumerates every admissible move sequence of the process
/// acting on the initial tapestry, with a per-primitive round budget.
pub fn build_sequence_tree(
    expr: &ProcessExpr,
    initial: &CausalTapestry,
    rounds: usize,
    ctx: &EnumContext,
) -> Result<Enumeration, AlgebraError> {
    let compiled = compile(expr)?;
    let env = EnumEnv {
        compiled: &compiled,
        prior: initial,
        params: ctx.params,
        rules: ctx.rules,
        box_sites: make_lattice(ctx.params.dim, &ctx.params.extent, initial.generation() + 1)?,
        site_budget: ctx.site_budget,
        rounds,
    };
    let mut tree = SequenceTree {
        nodes: vec![TreeNode {
            parent: None,
            children: Vec::new(),
            depth: 0,
            edge: None,
        }],
        complete_leaves: Vec::new(),
        stalled_paths: 0,
    };
    let mut outcomes = Vec::new();
    let mut paths = 0usize;
    let nascent = CausalTapestry::new(initial.generation() + 1);
    dfs(
        &env,
        &compiled.root,
        initial_state(&compiled.root),
        nascent,
        Vec::new(),
        Vec::new(),
        0,
        &mut tree,
        &mut outcomes,
        &mut paths,
        ctx.path_cap,
    )?;
    Ok(Enumeration { tree, outcomes })
}

#[allow(clippy::too_many_arguments)]
fn dfs(
    env: &EnumEnv,
    root: &CNode,
    state: NodeState,
    nascent: CausalTapestry,
    tuples: Vec<TupleEntry>,
    branch_log: Vec<usize>,
    node_id: usize,
    tree: &mut SequenceTree,
    outcomes: &mut Vec<PathOutcome>,
    paths: &mut usize,
    cap: usize,
) -> Result<(), AlgebraError> {
    let moves = env.moves(root, &state, &nascent)?;
    if moves.is_empty() {
        *paths += 1;
        if *paths > cap {
            return Err(AlgebraError::CapExceeded(*paths));
        }
        if is_complete(root, &state, env.rounds) {
            let mut sealed = nascent;
            sealed.seal();
            tree.complete_leaves.push(node_id);
            outcomes.push(PathOutcome {
                leaf: node_id,
                tapestry: sealed,
                tuples,
                branch_log,
            });
        } else {
            tree.stalled_paths += 1;
        }
        return Ok(());
    }
    for mv in moves {
        let mut next_tapestry = nascent.clone();
        let entry = env.apply(&mv, &mut next_tapestry)?;
        let child_id = tree.nodes.len();
        tree.nodes.push(TreeNode {
            parent: Some(node_id),
            children: Vec::new(),
            depth: tree.nodes[node_id].depth + 1,
            edge: Some(entry.labels.clone()),
        });
        tree.nodes[node_id].children.push(child_id);
        let mut next_tuples = tuples.clone();
        next_tuples.push(entry);
        let mut next_log = branch_log.clone();
        next_log.extend(mv.choices.iter().copied());
        dfs(
            env,
            root,
            mv.state.clone(),
            next_tapestry,
            next_tuples,
            next_log,
            child_id,
            tree,
            outcomes,
            paths,
            cap,
        )?;
    }
    Ok(())
}

/// Walks one random path down the sequence tree (seeded), e.g. to sample
/// interactive-sum histories.
pub fn sample_path(
    expr: &ProcessExpr,
    initial: &CausalTapestry,
    rounds: usize,
    ctx: &EnumContext,
    rng: &mut SimRng,
) -> Result<PathOutcome, AlgebraError> {
    let compiled = compile(expr)?;
    let env = EnumEnv {
        compiled: &compiled,
        prior: initial,
        params: ctx.params,
        rules: ctx.rules,
        box_sites: make_lattice(ctx.params.dim, &ctx.params.extent, initial.generation() + 1)?,
        site_budget: ctx.site_budget,
        rounds,
    };
    let mut state = initial_state(&compiled.root);
    let mut nascent = CausalTapestry::new(initial.generation() + 1);
    let mut tuples = Vec::new();
    let mut branch_log = Vec::new();
    loop {
        let moves = env.moves(&compiled.root, &state, &nascent)?;
        if moves.is_empty() {
            nascent.seal();
            return Ok(PathOutcome {
                leaf: 0,
                tapestry: nascent,
                tuples,
                branch_log,
            });
        }
        let mv = &moves[rng.gen_range(0..moves.len())];
        let entry = env.apply(mv, &mut nascent)?;
        tuples.push(entry);
        branch_log.extend(mv.choices.iter().copied());
        state = mv.state.clone();
    }
}

/// Operational single-run evaluation: plays every primitive to saturation
/// (round budget = box size). `Concat` runs the left process's generation,
/// then the right's on the result.
pub fn evaluate(
    expr: &ProcessExpr,
    initial: &CausalTapestry,
    ctx: &EnumContext,
    rng: &mut SimRng,
) -> Result<CausalTapestry, AlgebraError> {
    match expr {
        ProcessExpr::Concat(l, r) => {
            let mid = evaluate(l, initial, ctx, rng)?;
            evaluate(r, &mid, ctx, rng)
        }
        ProcessExpr::Zero => {
            let mut empty = CausalTapestry::new(initial.generation() + 1);
            empty.seal();
            Ok(empty)
        }
        _ => {
            if initial.is_empty() {
                return Err(AlgebraError::Dynamics(DynamicsError::EmptyPrior));
            }
            let box_len = make_lattice(
                ctx.params.dim,
                &ctx.params.extent,
                initial.generation() + 1,
            )?
            .len();
            sample_path(expr, initial, box_len, ctx, rng).map(|o| o.tapestry)
        }
    }
}

/// A coalesced set of spacetime fields, one per distinct history.
#[derive(Debug, Clone)]
pub struct FieldSet {
    pub fields: Vec<WaveField>,
}

pub const FIELD_TOL: f64 = 1e-12;

impl FieldSet {
    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    fn coalesce(mut fields: Vec<WaveField>, tol: f64) -> Self {
        let mut kept: Vec<WaveField> = Vec::new();
        for f in fields.drain(..) {
            if !kept
                .iter()
                .any(|k| k.linf_diff(&f).unwrap_or(f64::MAX) <= tol)
            {
                kept.push(f);
            }
        }
        Self { fields: kept }
    }

    pub fn contains(&self, field: &WaveField, tol: f64) -> bool {
        self.fields
            .iter()
            .any(|f| f.linf_diff(field).unwrap_or(f64::MAX) <= tol)
    }

    pub fn set_eq(&self, other: &FieldSet, tol: f64) -> bool {
        self.fields.iter().all(|f| other.contains(f, tol))
            && other.fields.iter().all(|f| self.contains(f, tol))
    }

    /// Setwise pointwise sum {f + g}.
    pub fn setwise_sum(&self, other: &FieldSet) -> Result<FieldSet, AlgebraError> {
        let mut out = Vec::with_capacity(self.len() * other.len());
        for f in &self.fields {
            for g in &other.fields {
                out.push(f.add(g)?);
            }
        }
        Ok(FieldSet::coalesce(out, FIELD_TOL))
    }

    pub fn scaled(&self, w: Complex64) -> FieldSet {
        FieldSet::coalesce(self.fields.iter().map(|f| f.scaled(w)).collect(), FIELD_TOL)
    }
}

/// Process covering map: the set of global fields over all complete paths.
pub fn pcm(
    expr: &ProcessExpr,
    initial: &CausalTapestry,
    rounds: usize,
    grid: &[SpacetimePoint],
    ctx: &EnumContext,
) -> Result<FieldSet, AlgebraError> {
    let enumeration = build_sequence_tree(expr, initial, rounds, ctx)?;
    let mut fields = Vec::with_capacity(enumeration.outcomes.len());
    for outcome in &enumeration.outcomes {
        fields.push(global_field(&outcome.tapestry, grid, ctx.params)?);
    }
    Ok(FieldSet::coalesce(fields, FIELD_TOL))
}

/// A configuration-space field on the cartesian product of factor grids;
/// values are row-major with the last factor fastest.
#[derive(Debug, Clone)]
pub struct ConfigField {
    pub factor_grids: Vec<Vec<SpacetimePoint>>,
    pub values: Vec<Complex64>,
}

impl ConfigField {
    pub fn index_of(&self, indices: &[usize]) -> usize {
        let mut idx = 0;
        for (k, &i) in indices.iter().enumerate() {
            idx = idx * self.factor_grids[k].len() + i;
        }
        idx
    }

    pub fn value_at(&self, indices: &[usize]) -> Complex64 {
        self.values[self.index_of(indices)]
    }

    fn linf_diff(&self, other: &ConfigField) -> f64 {
        if self.values.len() != other.values.len() {
            return f64::MAX;
        }
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Coalesced set of configuration fields.
#[derive(Debug, Clone)]
pub struct ConfigFieldSet {
    pub fields: Vec<ConfigField>,
}

impl ConfigFieldSet {
    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn contains(&self, field: &ConfigField, tol: f64) -> bool {
        self.fields.iter().any(|f| f.linf_diff(field) <= tol)
    }

    pub fn set_eq(&self, other: &ConfigFieldSet, tol: f64) -> bool {
        self.fields.len() == other.fields.len()
            && self.fields.iter().all(|f| other.contains(f, tol))
    }
}

fn is_product_root(expr: &ProcessExpr) -> bool {
    match expr {
        ProcessExpr::ProdExcl(_) | ProcessExpr::ProdFree(_) | ProcessExpr::ProdInter(..) => true,
        ProcessExpr::Scalar(_, e) => is_product_root(e),
        _ => false,
    }
}

/// Configuration process covering map: one field per maximal consistent
/// tapestry, evaluated on the product of the factor grids.
pub fn config_pcm(
    expr: &ProcessExpr,
    initial: &CausalTapestry,
    rounds: usize,
    factor_grids: &[Vec<SpacetimePoint>],
    ctx: &EnumContext,
) -> Result<ConfigFieldSet, AlgebraError> {
    if !is_product_root(expr) {
        return Err(AlgebraError::NotAProduct);
    }
    let compiled = compile(expr)?;
    if factor_grids.len() != compiled.arity {
        return Err(AlgebraError::ArityMismatch {
            want: compiled.arity,
            got: factor_grids.len(),
        });
    }
    let enumeration = build_sequence_tree(expr, initial, rounds, ctx)?;
    let path_tapestries: Vec<TupleTapestry> = enumeration
        .outcomes
        .iter()
        .map(|o| TupleTapestry {
            entries: o.tuples.clone(),
        })
        .collect();

    // Maximal tapestries: close each path tapestry under consistent union
    // with every other, to a fixpoint.
    let mut maximal: Vec<TupleTapestry> = Vec::new();
    for start in &path_tapestries {
        let mut k = start.clone();
        loop {
            let before = k.len();
            for other in &path_tapestries {
                k = consistent_union(&k, other);
            }
            if k.len() == before {
                break;
            }
        }
        if !maximal.iter().any(|m| m.eq_tol(&k, GAMMA_TOL)) {
            maximal.push(k);
        }
    }

    let mut kept: Vec<ConfigField> = Vec::new();
    for k in &maximal {
        let f = config_field(k, factor_grids, ctx.params);
        if !kept.iter().any(|existing| existing.linf_diff(&f) <= FIELD_TOL) {
            kept.push(f);
        }
    }
    Ok(ConfigFieldSet { fields: kept })
}

fn config_field(
    k: &TupleTapestry,
    factor_grids: &[Vec<SpacetimePoint>],
    params: &StrategyParams,
) -> ConfigField {
    let total: usize = factor_grids.iter().map(|g| g.len()).product();
    let mut values = vec![Complex64::new(0.0, 0.0); total];
    for entry in &k.entries {
        // Per-factor kernel samples, combined as an outer product.
        let kernels: Vec<Vec<f64>> = entry
            .labels
            .iter()
            .zip(factor_grids)
            .map(|(label, grid)| {
                let site = label.site();
                grid.iter().map(|z| sinc_kernel(&site, z, params)).collect()
            })
            .collect();
        let weight: Complex64 = entry.weight * entry.slot_amps.iter().product::<Complex64>();
        let mut idx = vec![0usize; factor_grids.len()];
        for v in values.iter_mut() {
            let mut kern = 1.0;
            for (axis, &i) in idx.iter().enumerate() {
                kern *= kernels[axis][i];
            }
            *v += weight * kern;
            // Advance the multi-index, last factor fastest.
            for axis in (0..idx.len()).rev() {
                idx[axis] += 1;
                if idx[axis] < factor_grids[axis].len() {
                    break;
                }
                idx[axis] = 0;
            }
        }
    }
    ConfigField {
        factor_grids: factor_grids.to_vec(),
        values,
    }
}


#[cfg(test)]
mod prop_tests {
    use super::*;
    use proptest::prelude::*;

    // Random expression trees over a fixed primitive pool; ids are made
    // unique after generation since they double as subprocess tags.
    fn arb_expr() -> impl Strategy<Value = ProcessExpr> {
        let leaf = prop_oneof![
            2 => (0u8..4).prop_map(|i| ProcessExpr::primitive(&format!("P{i}"))),
            1 => Just(ProcessExpr::Zero),
        ];
        leaf.prop_recursive(3, 24, 3, |inner| {
            prop_oneof![
                (any::<bool>(), -2.0..2.0f64, inner.clone()).prop_map(|(im, w, e)| {
                    let weight = if im {
                        Complex64::new(0.0, w)
                    } else {
                        Complex64::new(w, 0.0)
                    };
                    ProcessExpr::Scalar(weight, Box::new(e))
                }),
                prop::collection::vec(inner.clone(), 1..3).prop_map(ProcessExpr::SumExcl),
                prop::collection::vec(inner.clone(), 1..3).prop_map(ProcessExpr::SumFree),
                prop::collection::vec(inner.clone(), 1..3).prop_map(ProcessExpr::ProdExcl),
                prop::collection::vec(inner, 1..3).prop_map(ProcessExpr::ProdFree),
            ]
        })
    }

    fn uniquify(expr: &ProcessExpr, counter: &mut usize) -> ProcessExpr {
        match expr {
            ProcessExpr::Primitive(p) => {
                *counter += 1;
                let mut p = p.clone();
                p.id = format!("{}_{counter}", p.id);
                ProcessExpr::Primitive(p)
            }
            ProcessExpr::Zero => ProcessExpr::Zero,
            ProcessExpr::Scalar(w, e) => {
                ProcessExpr::Scalar(*w, Box::new(uniquify(e, counter)))
            }
            ProcessExpr::SumExcl(cs) => {
                ProcessExpr::SumExcl(cs.iter().map(|c| uniquify(c, counter)).collect())
            }
            ProcessExpr::SumFree(cs) => {
                ProcessExpr::SumFree(cs.iter().map(|c| uniquify(c, counter)).collect())
            }
            ProcessExpr::SumInter(cs, r) => ProcessExpr::SumInter(
                cs.iter().map(|c| uniquify(c, counter)).collect(),
                r.clone(),
            ),
            ProcessExpr::ProdExcl(cs) => {
                ProcessExpr::ProdExcl(cs.iter().map(|c| uniquify(c, counter)).collect())
            }
            ProcessExpr::ProdFree(cs) => {
                ProcessExpr::ProdFree(cs.iter().map(|c| uniquify(c, counter)).collect())
            }
            ProcessExpr::ProdInter(cs, r) => ProcessExpr::ProdInter(
                cs.iter().map(|c| uniquify(c, counter)).collect(),
                r.clone(),
            ),
            ProcessExpr::Concat(l, r) => ProcessExpr::Concat(
                Box::new(uniquify(l, counter)),
                Box::new(uniquify(r, counter)),
            ),
        }
    }

    proptest! {
        #[test]
        fn zero_identity_in_sums(e in arb_expr()) {
            let e = uniquify(&e, &mut 0);
            let compat = CompatTable::default();
            let rules = RuleTable::builtin();
            let with_zero = simplify(
                &ProcessExpr::SumExcl(vec![e.clone(), ProcessExpr::Zero]),
                &compat,
                &rules,
            ).unwrap();
            let without = simplify(&e, &compat, &rules).unwrap();
            // Summing with zero and simplifying is the same normal form.
            let wrapped = simplify(&ProcessExpr::SumExcl(vec![e]), &compat, &rules).unwrap();
            prop_assert_eq!(&with_zero, &wrapped);
            // And a singleton sum is the process itself.
            prop_assert_eq!(&wrapped, &without);
        }

        #[test]
        fn zero_absorbs_in_products(e in arb_expr()) {
            let e = uniquify(&e, &mut 0);
            let compat = CompatTable::default();
            let rules = RuleTable::builtin();
            for wrap in [ProcessExpr::ProdExcl, ProcessExpr::ProdFree] {
                let z = simplify(
                    &wrap(vec![e.clone(), ProcessExpr::Zero]),
                    &compat,
                    &rules,
                ).unwrap();
                prop_assert_eq!(z, ProcessExpr::Zero);
            }
        }

        #[test]
        fn simplify_is_idempotent(e in arb_expr()) {
            let e = uniquify(&e, &mut 0);
            let compat = CompatTable::default();
            let rules = RuleTable::builtin();
            let once = simplify(&e, &compat, &rules).unwrap();
            let twice = simplify(&once, &compat, &rules).unwrap();
            prop_assert_eq!(once, twice);
        }
    }
}
