//! The path-integral game strategy: Lagrangian, propagator, token placement
//! and generation evolution.
//!
//! One evolution step carries a prior (sealed) generation into a nascent one.
//! Each nascent informon receives tokens from admissible prior informons; a
//! token's amplitude is the propagator times the source strength, and the
//! nascent strength is the token sum. With full connectivity the composed
//! steps reproduce the nested inter-generation sum checked by
//! [`crate::oracle::brute_force_chain`].
//!
//! Phase convention: the Lagrangian uses the full causal distance, so every
//! step carries a constant extra phase `exp(i m t_P / (2 hbar))` relative to
//! the standard kinetic kernel. Over a fixed physical time this composes to
//! `exp(i m t / (2 hbar))`, a global energy-offset phase; oracle comparisons
//! account for it via [`crate::oracle::game_frame_phase`].

use num_complex::Complex64;
use rand::Rng;
use thiserror::Error;

use crate::tapestry::{
    make_lattice, CausalTapestry, Informon, Label, LatticeSite, Properties, SpacetimePoint,
    TapestryError,
};
use crate::SimRng;

/// Boundary handling for the finite lattice box.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryMode {
    /// Contributions to sites outside the box are dropped.
    Absorbing,
    /// Coordinates wrap; displacements use the minimal image.
    Periodic,
}

/// Cap on the number of prior informons contributing to a nascent informon.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Truncation {
    /// All in-range priors contribute (r = infinity).
    All,
    /// Only the r nearest priors contribute, ties broken by coordinate order.
    Nearest(usize),
}

/// Potential sampled at the source informon of each transfer.
#[derive(Debug, Clone, PartialEq)]
pub enum Potential {
    Zero,
    Constant(f64),
    /// V(x) = offset + gradient . x, with x the spatial embedding.
    Linear { gradient: Vec<f64>, offset: f64 },
}

impl Potential {
    pub fn value(&self, site: &LatticeSite, l_p: f64) -> f64 {
        match self {
            Potential::Zero => 0.0,
            Potential::Constant(v) => *v,
            Potential::Linear { gradient, offset } => {
                let dot: f64 = gradient
                    .iter()
                    .zip(&site.coords)
                    .map(|(g, &c)| g * c as f64 * l_p)
                    .sum();
                offset + dot
            }
        }
    }
}

/// Parameters of the bounded radiative uniform sinc path-integral strategy.
#[derive(Debug, Clone)]
pub struct StrategyParams {
    pub t_p: f64,
    pub l_p: f64,
    pub dim: usize,
    pub mass: f64,
    pub hbar: f64,
    /// Distance bound: a token may only pass when the causal distance is
    /// strictly below delta.
    pub delta: f64,
    pub truncation: Truncation,
    /// Informons generated per round (1 for a primitive process).
    pub informons_per_round: usize,
    /// Rounds per generation; `None` plays until every nascent site is
    /// saturated.
    pub rounds_per_generation: Option<usize>,
    /// Band limit of admissible initial states.
    pub band_limit: f64,
    pub potential: Potential,
    pub rng_seed: u64,
    /// Sites per axis of the lattice box.
    pub extent: Vec<i64>,
    pub boundary: BoundaryMode,
}

impl StrategyParams {
    pub fn new(dim: usize, extent: Vec<i64>, t_p: f64, l_p: f64) -> Self {
        Self {
            t_p,
            l_p,
            dim,
            mass: 1.0,
            hbar: 1.0,
            delta: f64::INFINITY,
            truncation: Truncation::All,
            informons_per_round: 1,
            rounds_per_generation: None,
            band_limit: std::f64::consts::PI / l_p,
            potential: Potential::Zero,
            rng_seed: 0,
            extent,
            boundary: BoundaryMode::Absorbing,
        }
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        if self.t_p <= 0.0 || self.l_p <= 0.0 {
            return Err(DynamicsError::BadParams("t_p and l_p must be positive"));
        }
        if !(1..=3).contains(&self.dim) || self.extent.len() != self.dim {
            return Err(DynamicsError::BadParams("dimension/extent mismatch"));
        }
        if self.mass <= 0.0 || self.hbar <= 0.0 {
            return Err(DynamicsError::BadParams("mass and hbar must be positive"));
        }
        if self.delta <= self.t_p {
            return Err(DynamicsError::BadParams(
                "delta must exceed t_p, the minimum causal distance",
            ));
        }
        if let Truncation::Nearest(r) = self.truncation {
            if r < 1 {
                return Err(DynamicsError::BadParams("truncation r must be >= 1"));
            }
        }
        if self.informons_per_round < 1 {
            return Err(DynamicsError::BadParams("informons_per_round must be >= 1"));
        }
        Ok(())
    }

    /// Per-axis coordinate displacement from src to dst, wrapped to the
    /// minimal image when the boundary is periodic.
    pub fn displacement(&self, src: &LatticeSite, dst: &LatticeSite) -> Vec<i64> {
        src.coords
            .iter()
            .zip(&dst.coords)
            .enumerate()
            .map(|(axis, (&a, &b))| {
                let mut d = b - a;
                if self.boundary == BoundaryMode::Periodic {
                    let span = self.extent[axis];
                    d = d.rem_euclid(span);
                    if d > span / 2 {
                        d -= span;
                    }
                }
                d
            })
            .collect()
    }

    /// Squared causal distance between adjacent-generation sites.
    pub fn causal_distance2(&self, src: &LatticeSite, dst: &LatticeSite) -> f64 {
        let spatial2: f64 = self
            .displacement(src, dst)
            .iter()
            .map(|&d| {
                let dx = d as f64 * self.l_p;
                dx * dx
            })
            .sum();
        self.t_p * self.t_p + spatial2
    }

    /// Magnitude of the per-axis normalization A = sqrt(2 pi i hbar t_P / m).
    pub fn norm_a_abs(&self) -> f64 {
        (2.0 * std::f64::consts::PI * self.hbar * self.t_p / self.mass).sqrt()
    }
}

/// One information transfer from a prior informon to a nascent one.
#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub source: Label,
    pub target: Label,
    pub amplitude: Complex64,
}

#[derive(Debug, Error)]
pub enum DynamicsError {
    #[error("invalid strategy parameters: {0}")]
    BadParams(&'static str),
    #[error("source and target generations are not adjacent")]
    NonAdjacentGenerations,
    #[error("prior tapestry is empty")]
    EmptyPrior,
    #[error("prior tapestry must be sealed")]
    PriorUnsealed,
    #[error("nascent tapestry is sealed")]
    NascentSealed,
    #[error("no admissible target site within delta")]
    NoAdmissibleTarget,
    #[error("sites span more than one generation")]
    MixedGenerations,
    #[error(transparent)]
    Tapestry(#[from] TapestryError),
}

/// Lagrangian of a single transfer: `m d^2 / (2 t_P^2) + V(src)`, with d the
/// causal distance between the two sites.
pub fn lagrangian(
    src: &LatticeSite,
    dst: &LatticeSite,
    params: &StrategyParams,
) -> Result<f64, DynamicsError> {
    if dst.generation != src.generation + 1 {
        return Err(DynamicsError::NonAdjacentGenerations);
    }
    let d2 = params.causal_distance2(src, dst);
    Ok(params.mass * d2 / (2.0 * params.t_p * params.t_p)
        + params.potential.value(src, params.l_p))
}

/// Discrete path-integral weight `(l_P/A)^dim exp(i S / hbar)` with
/// `S = L t_P` and `A = sqrt(2 pi i hbar t_P / m)` per spatial axis.
pub fn propagator(
    src: &LatticeSite,
    dst: &LatticeSite,
    params: &StrategyParams,
) -> Result<Complex64, DynamicsError> {
    let action = lagrangian(src, dst, params)? * params.t_p;
    let modulus = (params.l_p / params.norm_a_abs()).powi(params.dim as i32);
    // arg(A) = pi/4 per axis, from sqrt(i).
    let phase = action / params.hbar - params.dim as f64 * std::f64::consts::FRAC_PI_4;
    Ok(Complex64::from_polar(modulus, phase))
}

/// Builds a sealed tapestry with strengths sampled from a reference field at
/// the site embeddings.
pub fn init_from_samples<F>(
    reference: F,
    sites: &[LatticeSite],
    tag: &str,
    params: &StrategyParams,
) -> Result<CausalTapestry, DynamicsError>
where
    F: Fn(&SpacetimePoint) -> Complex64,
{
    let generation = match sites.first() {
        Some(s) => s.generation,
        None => 0,
    };
    if sites.iter().any(|s| s.generation != generation) {
        return Err(DynamicsError::MixedGenerations);
    }
    let mut tapestry = CausalTapestry::new(generation);
    for site in sites {
        let z = site.embed(params.t_p, params.l_p);
        let strength = reference(&z);
        let props = Properties {
            potential: params.potential.value(site, params.l_p),
            ..Properties::default()
        };
        tapestry.insert_informon(Informon::new(site.clone(), tag, strength, props))?;
    }
    tapestry.seal();
    Ok(tapestry)
}

/// Prior informons admissible as token sources for a nascent site: within
/// the delta bound, filtered, then truncated to the r nearest (distance
/// ties broken by coordinate order).
pub fn contributors<'a, F>(
    prior: &'a CausalTapestry,
    target: &LatticeSite,
    params: &StrategyParams,
    filter: F,
) -> Vec<&'a Informon>
where
    F: Fn(&Informon) -> bool,
{
    let mut in_range: Vec<(&Informon, f64)> = prior
        .iter()
        .filter(|n| filter(n))
        .filter_map(|n| {
            let d2 = params.causal_distance2(&n.site, target);
            (d2.sqrt() < params.delta).then_some((n, d2))
        })
        .collect();
    in_range.sort_by(|a, b| {
        a.1.partial_cmp(&b.1)
            .unwrap()
            .then_with(|| a.0.site.coords.cmp(&b.0.site.coords))
            .then_with(|| a.0.tag.cmp(&b.0.tag))
    });
    if let Truncation::Nearest(r) = params.truncation {
        in_range.truncate(r);
    }
    in_range.into_iter().map(|(n, _)| n).collect()
}

fn token_from(
    source: &Informon,
    target_label: &Label,
    params: &StrategyParams,
) -> Result<Token, DynamicsError> {
    let p = propagator(&source.site, &target_label.site(), params)?;
    Ok(Token {
        source: source.label(),
        target: target_label.clone(),
        amplitude: p * source.strength,
    })
}

/// When enabled, content sets also carry the transitive history (the
/// order-theoretic up-set of each source).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ContentDepth {
    /// Previous-generation ancestors only; sufficient for the dynamics.
    #[default]
    PreviousGeneration,
    /// Full ancestor closure, growing with every generation.
    Transitive,
}

fn extend_content(informon: &mut Informon, source: &Informon, depth: ContentDepth) {
    informon.content.insert(source.label());
    if depth == ContentDepth::Transitive {
        informon.content.absorb(&source.content);
        for a in source.content.vertices() {
            if a.generation == source.site.generation - 1 {
                informon.content.insert_edge(a.clone(), source.label());
            }
        }
    }
}

/// Plays a single pick-and-place round: one prior informon is selected
/// uniformly at random among those that have not yet fed the informon in
/// play, and its token is placed.
///
/// If no nascent informon is open, a target site is first created at a
/// random unused box site within delta of the chosen source.
pub fn play_round(
    prior: &CausalTapestry,
    nascent: &mut CausalTapestry,
    params: &StrategyParams,
    rng: &mut SimRng,
) -> Result<Label, DynamicsError> {
    play_round_with(prior, nascent, params, rng, ContentDepth::default())
}

pub fn play_round_with(
    prior: &CausalTapestry,
    nascent: &mut CausalTapestry,
    params: &StrategyParams,
    rng: &mut SimRng,
    depth: ContentDepth,
) -> Result<Label, DynamicsError> {
    if !prior.is_sealed() {
        return Err(DynamicsError::PriorUnsealed);
    }
    if nascent.is_sealed() {
        return Err(DynamicsError::NascentSealed);
    }
    if prior.is_empty() {
        return Err(DynamicsError::EmptyPrior);
    }

    // An informon is open while it can still accept a token: below the r
    // cap and with an in-range prior that has not contributed yet.
    let open: Option<Label> = nascent
        .iter()
        .filter_map(|n| {
            let cap = match params.truncation {
                Truncation::All => usize::MAX,
                Truncation::Nearest(r) => r,
            };
            if n.tokens.len() >= cap {
                return None;
            }
            let fresh = contributors(prior, &n.site, params, |_| true)
                .into_iter()
                .any(|c| !n.content.contains(&c.label()));
            fresh.then(|| n.label())
        })
        .next();

    match open {
        Some(label) => {
            let target_site = label.site();
            let fed: Vec<Label> = nascent
                .get(&label)
                .map(|n| n.content.vertices().cloned().collect())
                .unwrap_or_default();
            let candidates: Vec<&Informon> =
                contributors(prior, &target_site, params, |_| true)
                    .into_iter()
                    .filter(|c| !fed.contains(&c.label()))
                    .collect();
            let source = candidates[rng.gen_range(0..candidates.len())];
            let token = token_from(source, &label, params)?;
            let depth_source = source.clone();
            nascent.add_token(&label, token)?;
            if depth == ContentDepth::Transitive {
                if let Some(n) = nascent.get_mut(&label) {
                    extend_content(n, &depth_source, depth);
                }
            }
            Ok(label)
        }
        None => {
            // Pick a source first, then a fresh admissible site for it.
            let sources: Vec<&Informon> = prior.iter().collect();
            let next_gen = nascent.generation();
            let box_sites = make_lattice(params.dim, &params.extent, next_gen)?;
            let mut order: Vec<usize> = (0..sources.len()).collect();
            shuffle(&mut order, rng);
            for idx in order {
                let source = sources[idx];
                let mut fresh: Vec<&LatticeSite> = box_sites
                    .iter()
                    .filter(|s| {
                        nascent.informon_at(&s.coords, &source.tag).is_none()
                            && params.causal_distance2(&source.site, s).sqrt() < params.delta
                    })
                    .collect();
                if fresh.is_empty() {
                    continue;
                }
                let site = fresh.swap_remove(rng.gen_range(0..fresh.len())).clone();
                let props = Properties {
                    potential: params.potential.value(&site, params.l_p),
                    ..source.props.clone()
                };
                let mut informon =
                    Informon::new(site.clone(), &source.tag, Complex64::new(0.0, 0.0), props);
                extend_content(&mut informon, source, depth);
                let label = informon.label();
                let token = token_from(source, &label, params)?;
                informon.tokens.push(token);
                informon.strength = informon.token_sum();
                nascent.insert_informon(informon)?;
                return Ok(label);
            }
            Err(DynamicsError::NoAdmissibleTarget)
        }
    }
}

fn shuffle(order: &mut [usize], rng: &mut SimRng) {
    for i in (1..order.len()).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
}

/// Evolves one full generation: every box site with at least one in-range
/// prior receives an informon whose strength is the sum of its (possibly
/// r-truncated) tokens. Deterministic for full play; the seed only matters
/// when `rounds_per_generation` limits the generation to a subset of sites.
pub fn evolve_generation(
    prior: &CausalTapestry,
    params: &StrategyParams,
    rng: &mut SimRng,
) -> Result<CausalTapestry, DynamicsError> {
    evolve_generation_with(prior, params, rng, ContentDepth::default())
}

pub fn evolve_generation_with(
    prior: &CausalTapestry,
    params: &StrategyParams,
    rng: &mut SimRng,
    depth: ContentDepth,
) -> Result<CausalTapestry, DynamicsError> {
    if !prior.is_sealed() {
        return Err(DynamicsError::PriorUnsealed);
    }
    if prior.is_empty() {
        return Err(DynamicsError::EmptyPrior);
    }
    let next_gen = prior.generation() + 1;
    let mut sites = make_lattice(params.dim, &params.extent, next_gen)?;
    if let Some(n) = params.rounds_per_generation {
        if n < sites.len() {
            // A limited round budget: the subset of sites actually played is
            // a seeded non-deterministic choice.
            let mut order: Vec<usize> = (0..sites.len()).collect();
            shuffle(&mut order, rng);
            order.truncate(n);
            order.sort_unstable();
            sites = order.into_iter().map(|i| sites[i].clone()).collect();
        }
    }

    let mut nascent = CausalTapestry::new(next_gen);
    for site in &sites {
        let sources = contributors(prior, site, params, |_| true);
        if sources.is_empty() {
            continue;
        }
        let tag = sources[0].tag.clone();
        let props = Properties {
            potential: params.potential.value(site, params.l_p),
            ..sources[0].props.clone()
        };
        let mut informon = Informon::new(site.clone(), &tag, Complex64::new(0.0, 0.0), props);
        let label = informon.label();
        for source in sources {
            informon.tokens.push(token_from(source, &label, params)?);
            extend_content(&mut informon, source, depth);
        }
        informon.strength = informon.token_sum();
        nascent.insert_informon(informon)?;
    }
    nascent.seal();
    Ok(nascent)
}

/// Iterates [`evolve_generation`], retaining every generation for
/// inspection. Index 0 is the initial tapestry.
pub fn evolve(
    initial: &CausalTapestry,
    generations: usize,
    params: &StrategyParams,
    rng: &mut SimRng,
) -> Result<Vec<CausalTapestry>, DynamicsError> {
    let mut history = vec![initial.clone()];
    for _ in 0..generations {
        let next = evolve_generation(history.last().unwrap(), params, rng)?;
        history.push(next);
    }
    Ok(history)
}
