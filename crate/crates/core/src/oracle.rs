//! Exact references and error machinery: the analytic free Gaussian packet,
//! the brute-force inter-generation chain, discrepancy metrics and the
//! interpolation error bounds.
//!
//! Everything here is an independent route against which the dynamics and
//! interpolation modules are checked; none of it goes through the tapestry
//! or token machinery.

use num_complex::Complex64;
use serde_json::json;
use thiserror::Error;

use crate::dynamics::{Potential, StrategyParams};
use crate::interp::WaveField;
use crate::tapestry::{LatticeSite, SpacetimePoint};

const PI: f64 = std::f64::consts::PI;

/// Closed-form free Gaussian packet: initial width, centre, mean wavenumber.
#[derive(Debug, Clone, PartialEq)]
pub struct PacketSpec {
    pub sigma0: f64,
    pub x0: Vec<f64>,
    pub k0: Vec<f64>,
    pub mass: f64,
    pub hbar: f64,
}

impl PacketSpec {
    pub fn ground(dim: usize) -> Self {
        Self {
            sigma0: 1.0,
            x0: vec![0.0; dim],
            k0: vec![0.0; dim],
            mass: 1.0,
            hbar: 1.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.x0.len()
    }

    pub fn validate(&self) -> Result<(), OracleError> {
        if self.sigma0 <= 0.0 {
            return Err(OracleError::BadParams("sigma0 must be positive"));
        }
        if self.mass <= 0.0 || self.hbar <= 0.0 {
            return Err(OracleError::BadParams("mass and hbar must be positive"));
        }
        if self.x0.len() != self.k0.len() || self.x0.is_empty() {
            return Err(OracleError::BadParams("x0/k0 length mismatch"));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("invalid oracle parameters: {0}")]
    BadParams(&'static str),
    #[error("point dimension {got} does not match packet dimension {want}")]
    DimMismatch { want: usize, got: usize },
    #[error("path work {0} exceeds the enumeration cap")]
    CapExceeded(u64),
    #[error("empty comparison grid")]
    EmptyGrid,
    #[error("residual metric needs at least 3 stored generations, got {0}")]
    TooFewGenerations(usize),
    #[error("residual metric implemented for 1 spatial dimension")]
    ResidualDim,
    #[error("residual grids must align across generations")]
    ResidualGrid,
    #[error("the residual metric is evaluated via schrodinger_residual, not discrepancy")]
    ResidualNeedsSlices,
}

/// Analytic spreading Gaussian under free evolution; dimensions factorise.
pub fn exact_free_packet(spec: &PacketSpec, x: &[f64], t: f64) -> Result<Complex64, OracleError> {
    spec.validate()?;
    if x.len() != spec.dim() {
        return Err(OracleError::DimMismatch {
            want: spec.dim(),
            got: x.len(),
        });
    }
    let s2 = spec.sigma0 * spec.sigma0;
    let alpha = Complex64::new(1.0, spec.hbar * t / (spec.mass * s2));
    let mut value = Complex64::new(1.0, 0.0);
    for axis in 0..spec.dim() {
        let v = spec.hbar * spec.k0[axis] / spec.mass;
        let u = x[axis] - spec.x0[axis] - v * t;
        let pref = (PI * s2).powf(-0.25) / alpha.sqrt();
        let phase = -Complex64::new(u * u, 0.0) / (2.0 * s2 * alpha)
            + Complex64::new(0.0, spec.k0[axis] * (x[axis] - spec.x0[axis]))
            - Complex64::new(
                0.0,
                spec.hbar * spec.k0[axis] * spec.k0[axis] * t / (2.0 * spec.mass),
            );
        value *= pref * phase.exp();
    }
    Ok(value)
}

/// Global phase accumulated by a constant energy offset.
pub fn energy_offset_phase(offset: f64, t: f64, hbar: f64) -> Complex64 {
    Complex64::from_polar(1.0, offset * t / hbar)
}

/// Constant energy offset the game propagator carries relative to standard
/// free evolution: the rest term m/2 from the causal-distance Lagrangian,
/// plus any constant part of the potential (whose sign enters positively).
pub fn game_energy_offset(params: &StrategyParams) -> f64 {
    let v0 = match &params.potential {
        Potential::Zero => 0.0,
        Potential::Constant(v) => *v,
        Potential::Linear { offset, .. } => *offset,
    };
    params.mass / 2.0 + v0
}

/// Exact reference for lattice-evolved fields: the free packet carried to
/// the game's phase frame.
///
/// For zero or constant potentials this is a global phase. For a linear
/// potential the game's sign convention accelerates the packet along the
/// gradient; the closed form shifts the free packet and applies the
/// standard linear-potential phases.
pub fn game_reference(
    spec: &PacketSpec,
    params: &StrategyParams,
    x: &[f64],
    t: f64,
) -> Result<Complex64, OracleError> {
    let offset_phase = energy_offset_phase(game_energy_offset(params), t, spec.hbar);
    match &params.potential {
        Potential::Zero | Potential::Constant(_) => {
            Ok(offset_phase * exact_free_packet(spec, x, t)?)
        }
        Potential::Linear { gradient, .. } => {
            if gradient.len() != spec.dim() {
                return Err(OracleError::DimMismatch {
                    want: spec.dim(),
                    got: gradient.len(),
                });
            }
            let m = spec.mass;
            let hbar = spec.hbar;
            let mut shifted = x.to_vec();
            let mut chirp = Complex64::new(1.0, 0.0);
            for axis in 0..spec.dim() {
                let c = -gradient[axis];
                shifted[axis] = x[axis] + c * t * t / (2.0 * m);
                let phase = -c * t * x[axis] / hbar - c * c * t * t * t / (6.0 * m * hbar);
                chirp *= Complex64::from_polar(1.0, phase);
            }
            Ok(offset_phase * chirp * exact_free_packet(spec, &shifted, t)?)
        }
    }
}

fn chain_propagator(src: &LatticeSite, dst: &LatticeSite, params: &StrategyParams) -> Complex64 {
    // Direct evaluation of (l_P/A)^d e^{i L t_P / hbar}; kept separate from
    // dynamics::propagator so the two routes share only the formula.
    let t2 = params.t_p * params.t_p;
    let mut d2 = t2;
    for (a, b) in src.coords.iter().zip(&dst.coords) {
        let dx = (b - a) as f64 * params.l_p;
        d2 += dx * dx;
    }
    let lag = params.mass * d2 / (2.0 * t2) + params.potential.value(src, params.l_p);
    let abs_a = (2.0 * PI * params.hbar * params.t_p / params.mass).sqrt();
    let modulus = (params.l_p / abs_a).powi(params.dim as i32);
    let phase = lag * params.t_p / params.hbar - params.dim as f64 * PI / 4.0;
    Complex64::from_polar(modulus, phase)
}

/// Work cap for the nested chain: one unit per propagator evaluation.
pub const CHAIN_WORK_CAP: u64 = 10_000_000;

/// Exact nested inter-generation sum: for each terminal site, the sum over
/// all paths of products of propagators times the initial strengths.
///
/// Evaluated by folding one generation at a time in fixed site order, which
/// computes the full path sum without the token machinery. The work cap
/// counts propagator products and fails loudly rather than sampling.
pub fn brute_force_chain(
    initial: &[(LatticeSite, Complex64)],
    generations: &[Vec<LatticeSite>],
    params: &StrategyParams,
) -> Result<Vec<(LatticeSite, Complex64)>, OracleError> {
    let mut work: u64 = 0;
    let mut prev: Vec<(LatticeSite, Complex64)> = initial.to_vec();
    for gen_sites in generations {
        work += (prev.len() as u64) * (gen_sites.len() as u64);
        if work > CHAIN_WORK_CAP {
            return Err(OracleError::CapExceeded(work));
        }
        let mut next = Vec::with_capacity(gen_sites.len());
        for dst in gen_sites {
            let mut acc = Complex64::new(0.0, 0.0);
            for (src, gamma) in &prev {
                acc += chain_propagator(src, dst, params) * gamma;
            }
            next.push((dst.clone(), acc));
        }
        prev = next;
    }
    Ok(prev)
}

/// Literal path enumeration: iterates every inter-generation index tuple.
/// Exponential; only usable on tiny instances (the true path count is
/// capped), and kept as an independent cross-check of the folded chain.
pub fn chain_by_path_enumeration(
    initial: &[(LatticeSite, Complex64)],
    generations: &[Vec<LatticeSite>],
    params: &StrategyParams,
) -> Result<Vec<(LatticeSite, Complex64)>, OracleError> {
    let mut paths: u64 = initial.len() as u64;
    for g in generations {
        paths = paths.saturating_mul(g.len() as u64);
        if paths > CHAIN_WORK_CAP {
            return Err(OracleError::CapExceeded(paths));
        }
    }
    let last = match generations.last() {
        Some(l) => l,
        None => return Ok(initial.to_vec()),
    };
    let mut out = Vec::with_capacity(last.len());
    for (t, dst) in last.iter().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        // One index per hidden generation; the terminal index is fixed.
        let hidden = &generations[..generations.len() - 1];
        let mut idx = vec![0usize; hidden.len() + 1];
        'paths: loop {
            let mut amp = Complex64::new(1.0, 0.0);
            let (src0, gamma0) = &initial[idx[0]];
            let mut src = src0;
            amp *= gamma0;
            for (k, g) in hidden.iter().enumerate() {
                let mid = &g[idx[k + 1]];
                amp *= chain_propagator(src, mid, params);
                src = mid;
            }
            amp *= chain_propagator(src, &last[t], params);
            acc += amp;
            let mut place = 0usize;
            loop {
                idx[place] += 1;
                let limit = if place == 0 {
                    initial.len()
                } else {
                    hidden[place - 1].len()
                };
                if idx[place] < limit {
                    break;
                }
                idx[place] = 0;
                place += 1;
                if place == idx.len() {
                    break 'paths;
                }
            }
        }
        out.push((dst.clone(), acc));
    }
    Ok(out)
}

/// Discrepancy metric kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiscrepancyMetric {
    Linf,
    L2,
    SchrodingerResidual,
}

/// Approximation measure and accuracy: which metric, and the tolerance a
/// run is expected to meet.
#[derive(Debug, Clone)]
pub struct DiscrepancySpec {
    pub metric: DiscrepancyMetric,
    pub tolerance: f64,
}

/// Grid discrepancy between a sampled field and a reference function.
pub fn discrepancy<F>(
    field: &WaveField,
    reference: F,
    spec: &DiscrepancySpec,
) -> Result<f64, OracleError>
where
    F: Fn(&SpacetimePoint) -> Complex64,
{
    if field.grid.is_empty() {
        return Err(OracleError::EmptyGrid);
    }
    match spec.metric {
        DiscrepancyMetric::Linf => Ok(field
            .grid
            .iter()
            .zip(&field.values)
            .map(|(z, v)| (v - reference(z)).norm())
            .fold(0.0, f64::max)),
        DiscrepancyMetric::L2 => {
            let sum: f64 = field
                .grid
                .iter()
                .zip(&field.values)
                .map(|(z, v)| (v - reference(z)).norm_sqr())
                .sum();
            Ok((sum / field.len() as f64).sqrt())
        }
        DiscrepancyMetric::SchrodingerResidual => Err(OracleError::ResidualNeedsSlices),
    }
}

/// Linf discrepancy normalised by the reference supremum on the grid.
pub fn relative_linf<F>(field: &WaveField, reference: F) -> Result<f64, OracleError>
where
    F: Fn(&SpacetimePoint) -> Complex64,
{
    if field.grid.is_empty() {
        return Err(OracleError::EmptyGrid);
    }
    let mut abs: f64 = 0.0;
    let mut sup: f64 = 0.0;
    for (z, v) in field.grid.iter().zip(&field.values) {
        let r = reference(z);
        abs = abs.max((v - r).norm());
        sup = sup.max(r.norm());
    }
    if sup == 0.0 {
        return Ok(abs);
    }
    Ok(abs / sup)
}

/// Whose Schroedinger equation the residual is taken against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseFrame {
    /// i hbar dPhi/dt = (-hbar^2/2m) lap Phi + V Phi
    Nrqm,
    /// The game's effective generator: the potential enters with flipped
    /// sign and the rest term m/2 shifts the energy zero.
    Game,
}

/// Second-order centred residual `||i hbar dPhi/dt - H Phi||_inf` across
/// three or more stored generations sampled on a shared 1-D spatial grid.
pub fn schrodinger_residual(
    slices: &[WaveField],
    params: &StrategyParams,
    frame: PhaseFrame,
) -> Result<f64, OracleError> {
    if slices.len() < 3 {
        return Err(OracleError::TooFewGenerations(slices.len()));
    }
    if params.dim != 1 {
        return Err(OracleError::ResidualDim);
    }
    let n = slices[0].grid.len();
    if n < 3 {
        return Err(OracleError::EmptyGrid);
    }
    for s in slices {
        if s.grid.len() != n {
            return Err(OracleError::ResidualGrid);
        }
        for (a, b) in s.grid.iter().zip(&slices[0].grid) {
            if (a.x[0] - b.x[0]).abs() > 1e-12 {
                return Err(OracleError::ResidualGrid);
            }
        }
    }
    let hbar = params.hbar;
    let m = params.mass;
    let dx = slices[0].grid[1].x[0] - slices[0].grid[0].x[0];
    let mut worst: f64 = 0.0;
    for k in 1..slices.len() - 1 {
        for i in 1..n - 1 {
            let dt = (slices[k + 1].values[i] - slices[k - 1].values[i]) / (2.0 * params.t_p);
            let lap = (slices[k].values[i + 1] - 2.0 * slices[k].values[i]
                + slices[k].values[i - 1])
                / (dx * dx);
            let x = &slices[k].grid[i];
            let site = LatticeSite::new(0, vec![(x.x[0] / params.l_p).round() as i64]);
            let v = params.potential.value(&site, params.l_p);
            let h_phi = match frame {
                PhaseFrame::Nrqm => {
                    -hbar * hbar / (2.0 * m) * lap + v * slices[k].values[i]
                }
                PhaseFrame::Game => {
                    -hbar * hbar / (2.0 * m) * lap - (v + m / 2.0) * slices[k].values[i]
                }
            };
            let r = (Complex64::new(0.0, hbar) * dt - h_phi).norm();
            worst = worst.max(r);
        }
    }
    Ok(worst)
}

/// Butzer bound inputs. The band parameter W fixes the truncation number
/// `r = 2 floor(W^(1+1/gamma) + 1) + 1`; when a caller supplies `r`
/// directly it must be consistent.
#[derive(Debug, Clone, PartialEq)]
pub struct ButzerParams {
    /// Envelope exponent: |Psi| <= M |t|^-gamma with 0 < gamma <= 1.
    pub gamma: f64,
    pub psi_sup: f64,
    pub psi_deriv_sup: f64,
    pub envelope_m: f64,
    pub eps_over_lp: f64,
    pub delta_over_lp: f64,
    pub l_p: f64,
    pub band_w: Option<f64>,
    pub truncation_r: Option<u64>,
}

impl ButzerParams {
    fn validate(&self) -> Result<(), OracleError> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(OracleError::BadParams("butzer: gamma must lie in (0, 1]"));
        }
        if self.l_p <= 0.0 || self.l_p >= 1.0 {
            return Err(OracleError::BadParams(
                "butzer: l_p must lie in (0, 1) for -l_p ln l_p to bound anything",
            ));
        }
        if self.psi_sup < 0.0
            || self.psi_deriv_sup < 0.0
            || self.envelope_m < 0.0
            || self.eps_over_lp < 0.0
            || self.delta_over_lp < 0.0
        {
            return Err(OracleError::BadParams("butzer: negative magnitude"));
        }
        if let (Some(w), Some(r)) = (self.band_w, self.truncation_r) {
            if butzer_truncation_number(w, self.gamma) != r {
                return Err(OracleError::BadParams(
                    "butzer: truncation number inconsistent with band parameter",
                ));
            }
        }
        Ok(())
    }
}

/// Truncation number prescribed by the bound: `2 [W^(1+1/gamma) + 1] + 1`.
pub fn butzer_truncation_number(band_w: f64, gamma: f64) -> u64 {
    2 * (band_w.powf(1.0 + 1.0 / gamma) + 1.0).floor() as u64 + 1
}

/// The `-l_P ln l_P` envelope of the Butzer bound.
pub fn butzer_envelope(l_p: f64) -> Result<f64, OracleError> {
    if l_p <= 0.0 || l_p >= 1.0 {
        return Err(OracleError::BadParams("butzer envelope needs 0 < l_p < 1"));
    }
    Ok(-l_p * l_p.ln())
}

/// The constant K of the Butzer bound.
pub fn butzer_k(p: &ButzerParams) -> Result<f64, OracleError> {
    p.validate()?;
    let e = std::f64::consts::E;
    let five = 5.0_f64.sqrt();
    let inner = (14.0 / PI + p.delta_over_lp + 7.0 / (3.0 * five * PI)) * p.psi_deriv_sup
        + p.eps_over_lp;
    Ok((1.0 + 1.0 / p.gamma) * (five * e * inner + 6.0 * e * (p.envelope_m + p.psi_sup)))
}

/// Full Butzer bound `K * (-l_P ln l_P)`.
pub fn butzer_bound(p: &ButzerParams) -> Result<f64, OracleError> {
    Ok(butzer_k(p)? * butzer_envelope(p.l_p)?)
}

/// Yao-Thomas bound inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct YaoThomasParams {
    pub psi_max: f64,
    pub c_abs: f64,
}

/// Yao-Thomas bound `8 max|Psi| / ((2 pi)^3 |c|^3)`.
pub fn yao_thomas_bound(p: &YaoThomasParams) -> Result<f64, OracleError> {
    if p.psi_max < 0.0 || p.c_abs <= 0.0 {
        return Err(OracleError::BadParams("yao-thomas: bad magnitudes"));
    }
    Ok(8.0 * p.psi_max / ((2.0 * PI).powi(3) * p.c_abs.powi(3)))
}

/// Bound selector mirroring the two published formulas.
#[derive(Debug, Clone, PartialEq)]
pub enum ErrorBoundSpec {
    Butzer(ButzerParams),
    YaoThomas(YaoThomasParams),
}

pub fn error_bound(spec: &ErrorBoundSpec) -> Result<f64, OracleError> {
    match spec {
        ErrorBoundSpec::Butzer(p) => butzer_bound(p),
        ErrorBoundSpec::YaoThomas(p) => yao_thomas_bound(p),
    }
}

/// JSON error report: `{metric, value, bound, params, pass}`.
#[derive(Debug, Clone)]
pub struct ErrorReport {
    pub metric: String,
    pub value: f64,
    pub bound: Option<f64>,
    pub params: serde_json::Value,
    pub pass: bool,
}

impl ErrorReport {
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "metric": self.metric,
            "value": self.value,
            "bound": self.bound,
            "params": self.params,
            "pass": self.pass,
        })
    }
}
