//! Sinc interpolation: local wavelets, global fields, cardinal-series
//! reconstruction and process strength.
//!
//! Every informon contributes a translated sinc wavelet centred on its
//! embedding point; summing the contributions of a sealed generation gives
//! the global field. On the generation's own time slice the time-axis sinc
//! factor is 1 and the field interpolates the strengths exactly.

use std::io::Write;

use num_complex::Complex64;
use thiserror::Error;

use crate::dynamics::StrategyParams;
use crate::tapestry::{CausalTapestry, Informon, LatticeSite, SpacetimePoint};

/// `sin(pi u) / (pi u)` against the lattice coordinate `u = (z - site)/pitch`.
///
/// Arguments within 1e-12 of an integer snap to the exact cardinal values
/// (1 at zero, 0 elsewhere), so interpolation at lattice points is exact;
/// near zero a short series avoids the 0/0 form.
pub fn lattice_sinc(u: f64) -> f64 {
    let k = u.round();
    if (u - k).abs() < 1e-12 {
        return if k == 0.0 { 1.0 } else { 0.0 };
    }
    let x = std::f64::consts::PI * u;
    if x.abs() < 1e-6 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// Product sinc wavelet of a site, evaluated at a spacetime point: one time
/// factor at pitch `t_P` and one factor per spatial axis at pitch `l_P`.
pub fn sinc_kernel(site: &LatticeSite, z: &SpacetimePoint, params: &StrategyParams) -> f64 {
    let mut k = lattice_sinc((z.t - site.generation as f64 * params.t_p) / params.t_p);
    for (x, &c) in z.x.iter().zip(&site.coords) {
        k *= lattice_sinc((x - c as f64 * params.l_p) / params.l_p);
    }
    k
}

/// A sampled global field: values of the interpolated interpretation on an
/// evaluation grid.
#[derive(Debug, Clone)]
pub struct WaveField {
    pub grid: Vec<SpacetimePoint>,
    pub values: Vec<Complex64>,
    pub t_p: f64,
    pub l_p: f64,
    pub dim: usize,
}

#[derive(Debug, Error)]
pub enum InterpError {
    #[error("tapestry must be sealed")]
    Unsealed,
    #[error("sample and site counts differ")]
    LengthMismatch,
    #[error("fields are on different grids")]
    GridMismatch,
    #[error("initial state exceeds the lattice Nyquist rate: band limit {band:.6} > {nyquist:.6}")]
    AboveNyquist { band: f64, nyquist: f64 },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl WaveField {
    pub fn zero(grid: Vec<SpacetimePoint>, params: &StrategyParams) -> Self {
        let values = vec![Complex64::new(0.0, 0.0); grid.len()];
        Self {
            grid,
            values,
            t_p: params.t_p,
            l_p: params.l_p,
            dim: params.dim,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scaled(&self, w: Complex64) -> Self {
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= w;
        }
        out
    }

    pub fn add(&self, other: &WaveField) -> Result<WaveField, InterpError> {
        if self.grid.len() != other.grid.len() {
            return Err(InterpError::GridMismatch);
        }
        let mut out = self.clone();
        for (v, o) in out.values.iter_mut().zip(&other.values) {
            *v += o;
        }
        Ok(out)
    }

    /// Largest pointwise difference to another field on the same grid.
    pub fn linf_diff(&self, other: &WaveField) -> Result<f64, InterpError> {
        if self.grid.len() != other.grid.len() {
            return Err(InterpError::GridMismatch);
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// CSV rows `t,x[,y,z],re,im,abs2`, deterministic formatting.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<(), InterpError> {
        write!(w, "t")?;
        for name in ["x", "y", "z"].iter().take(self.dim) {
            write!(w, ",{name}")?;
        }
        writeln!(w, ",re,im,abs2")?;
        for (p, v) in self.grid.iter().zip(&self.values) {
            write!(w, "{}", p.t)?;
            for x in &p.x {
                write!(w, ",{x}")?;
            }
            writeln!(w, ",{},{},{}", v.re, v.im, v.norm_sqr())?;
        }
        Ok(())
    }
}

/// Global field of a sealed tapestry on an evaluation grid.
pub fn global_field(
    tapestry: &CausalTapestry,
    grid: &[SpacetimePoint],
    params: &StrategyParams,
) -> Result<WaveField, InterpError> {
    if !tapestry.is_sealed() {
        return Err(InterpError::Unsealed);
    }
    field_with_amplitude(tapestry, grid, params, |n| n.strength)
}

/// Global field restricted to one subprocess: informons contribute the sum
/// of their tokens sourced from `source_tag` (or their own strength when
/// they carry no tokens and bear the tag themselves).
pub fn tagged_field(
    tapestry: &CausalTapestry,
    grid: &[SpacetimePoint],
    params: &StrategyParams,
    source_tag: &str,
) -> Result<WaveField, InterpError> {
    if !tapestry.is_sealed() {
        return Err(InterpError::Unsealed);
    }
    field_with_amplitude(tapestry, grid, params, |n| {
        if n.tokens.is_empty() {
            if n.tag == source_tag {
                n.strength
            } else {
                Complex64::new(0.0, 0.0)
            }
        } else {
            n.tokens
                .iter()
                .filter(|t| t.source.tag == source_tag)
                .map(|t| t.amplitude)
                .sum()
        }
    })
}

fn field_with_amplitude<F>(
    tapestry: &CausalTapestry,
    grid: &[SpacetimePoint],
    params: &StrategyParams,
    amplitude: F,
) -> Result<WaveField, InterpError>
where
    F: Fn(&Informon) -> Complex64,
{
    let mut field = WaveField::zero(grid.to_vec(), params);
    for n in tapestry.iter() {
        let a = amplitude(n);
        if a.norm_sqr() == 0.0 {
            continue;
        }
        for (value, z) in field.values.iter_mut().zip(grid) {
            *value += a * sinc_kernel(&n.site, z, params);
        }
    }
    Ok(field)
}

/// Truncated cardinal series: reconstructs a band-limited function at `z`
/// from uniform lattice samples.
pub fn parzen_reconstruct(
    samples: &[Complex64],
    sites: &[LatticeSite],
    z: &SpacetimePoint,
    params: &StrategyParams,
) -> Result<Complex64, InterpError> {
    if samples.len() != sites.len() {
        return Err(InterpError::LengthMismatch);
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for (f, site) in samples.iter().zip(sites) {
        acc += f * sinc_kernel(site, z, params);
    }
    Ok(acc)
}

/// Squared process strength of a sealed generation:
/// `sum over informons of l_P^dim |Gamma|^2`.
pub fn process_strength(tapestry: &CausalTapestry, params: &StrategyParams) -> f64 {
    let cell = params.l_p.powi(params.dim as i32);
    tapestry.iter().map(|n| cell * n.strength.norm_sqr()).sum()
}

/// Lattice Nyquist rate `pi / l_P`.
pub fn nyquist_rate(params: &StrategyParams) -> f64 {
    std::f64::consts::PI / params.l_p
}

/// Rejects configurations whose declared band limit exceeds the lattice
/// Nyquist rate.
pub fn check_band_limit(params: &StrategyParams) -> Result<(), InterpError> {
    let nyquist = nyquist_rate(params);
    if params.band_limit > nyquist * (1.0 + 1e-12) {
        return Err(InterpError::AboveNyquist {
            band: params.band_limit,
            nyquist,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{init_from_samples, StrategyParams};
    use crate::tapestry::make_lattice;
    use approx::assert_relative_eq;

    fn params() -> StrategyParams {
        StrategyParams::new(1, vec![9], 0.1, 0.1)
    }

    #[test]
    fn kernel_cardinality() {
        let p = params();
        let site = LatticeSite::new(0, vec![0]);
        let own = site.embed(p.t_p, p.l_p);
        assert_eq!(sinc_kernel(&site, &own, &p), 1.0);
        let other = LatticeSite::new(0, vec![3]).embed(p.t_p, p.l_p);
        assert_eq!(sinc_kernel(&site, &other, &p), 0.0);
        let off_gen = LatticeSite::new(2, vec![0]).embed(p.t_p, p.l_p);
        assert_eq!(sinc_kernel(&site, &off_gen, &p), 0.0);
    }

    #[test]
    fn kernel_half_pitch() {
        let p = params();
        let site = LatticeSite::new(0, vec![0]);
        let z = SpacetimePoint::new(0.0, vec![p.l_p / 2.0]);
        assert_relative_eq!(
            sinc_kernel(&site, &z, &p),
            2.0 / std::f64::consts::PI,
            max_relative = 1e-14
        );
    }

    #[test]
    fn sinc_series_fallback_near_zero() {
        let x = 1e-8;
        assert_relative_eq!(lattice_sinc(x), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn empty_tapestry_field_is_zero() {
        let p = params();
        let mut t = CausalTapestry::new(0);
        t.seal();
        let grid: Vec<SpacetimePoint> = make_lattice(1, &[5], 0)
            .unwrap()
            .iter()
            .map(|s| s.embed(p.t_p, p.l_p))
            .collect();
        let f = global_field(&t, &grid, &p).unwrap();
        assert!(f.values.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn single_informon_field_cardinality() {
        let p = params();
        let t = init_from_samples(
            |z| {
                if z.x[0] == 0.0 {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            },
            &make_lattice(1, &[5], 0).unwrap(),
            "p",
            &p,
        )
        .unwrap();
        let grid: Vec<SpacetimePoint> = make_lattice(1, &[5], 0)
            .unwrap()
            .iter()
            .map(|s| s.embed(p.t_p, p.l_p))
            .collect();
        let f = global_field(&t, &grid, &p).unwrap();
        for (z, v) in f.grid.iter().zip(&f.values) {
            let expect = if z.x[0] == 0.0 { 1.0 } else { 0.0 };
            assert_relative_eq!(v.re, expect, epsilon = 1e-15);
            assert_relative_eq!(v.im, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn interpolation_property_is_exact() {
        let p = params();
        let sites = make_lattice(1, &p.extent, 0).unwrap();
        let t = init_from_samples(
            |z| Complex64::new((z.x[0] * 1.3).cos(), (z.x[0] * 0.7).sin()),
            &sites,
            "p",
            &p,
        )
        .unwrap();
        let grid: Vec<SpacetimePoint> = sites.iter().map(|s| s.embed(p.t_p, p.l_p)).collect();
        let f = global_field(&t, &grid, &p).unwrap();
        for (n, v) in t.iter().zip(&f.values) {
            assert_eq!(n.strength, *v);
        }
    }

    #[test]
    fn field_linearity_in_strengths() {
        let p = params();
        let sites = make_lattice(1, &p.extent, 0).unwrap();
        let t = init_from_samples(
            |z| Complex64::new((-z.x[0] * z.x[0]).exp(), 0.1),
            &sites,
            "p",
            &p,
        )
        .unwrap();
        let w = Complex64::new(0.3, -1.2);
        let scaled = init_from_samples(
            |z| w * Complex64::new((-z.x[0] * z.x[0]).exp(), 0.1),
            &sites,
            "p",
            &p,
        )
        .unwrap();
        let grid = vec![
            SpacetimePoint::new(0.0, vec![0.033]),
            SpacetimePoint::new(0.0, vec![-0.21]),
        ];
        let f = global_field(&t, &grid, &p).unwrap();
        let g = global_field(&scaled, &grid, &p).unwrap();
        for (a, b) in f.values.iter().zip(&g.values) {
            assert_relative_eq!((w * a - b).norm(), 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn parzen_interpolates_samples_exactly() {
        let p = params();
        let sites = make_lattice(1, &[65], 0).unwrap();
        let f = |x: f64| Complex64::new((x * 2.0).cos(), (x * 2.0).sin());
        let samples: Vec<Complex64> = sites.iter().map(|s| f(s.coords[0] as f64 * p.l_p)).collect();
        for site in sites.iter().step_by(13) {
            let z = site.embed(p.t_p, p.l_p);
            let v = parzen_reconstruct(&samples, &sites, &z, &p).unwrap();
            assert!((v - f(z.x[0])).norm() <= 1e-12);
        }
    }

    #[test]
    fn parzen_constant_within_truncation() {
        // Cardinal series of the constant 1, truncated to 64 terms per side.
        let p = params();
        let sites = make_lattice(1, &[129], 0).unwrap();
        let samples = vec![Complex64::new(1.0, 0.0); sites.len()];
        let z = SpacetimePoint::new(0.0, vec![0.05]);
        let v = parzen_reconstruct(&samples, &sites, &z, &p).unwrap();
        assert!((v.re - 1.0).abs() < 1e-4, "residual {}", (v.re - 1.0).abs());
        assert!(v.im.abs() < 1e-15);
    }

    #[test]
    fn parzen_band_limited_cosine_interior() {
        // f(x) = cos(pi x / (4 l_P)) is band limited to a quarter of the
        // Nyquist rate; with 4096 terms per side the interior error sits
        // below 1e-6 (the tail decays ~ N^-2 after symmetric cancellation).
        let p = params();
        let sites = make_lattice(1, &[8193], 0).unwrap();
        let f = |x: f64| (std::f64::consts::PI * x / (4.0 * p.l_p)).cos();
        let samples: Vec<Complex64> = sites
            .iter()
            .map(|s| Complex64::new(f(s.coords[0] as f64 * p.l_p), 0.0))
            .collect();
        for &zx in &[0.0333, 0.05, 0.123, -0.377, 1.05] {
            let z = SpacetimePoint::new(0.0, vec![zx]);
            let v = parzen_reconstruct(&samples, &sites, &z, &p).unwrap();
            assert!(
                (v.re - f(zx)).abs() <= 1e-6,
                "error {} at {}",
                (v.re - f(zx)).abs(),
                zx
            );
        }
    }

    #[test]
    fn field_decomposes_over_subprocess_tags() {
        // A tapestry partitioned by tags: the global field is exactly the
        // sum of the per-tag fields.
        let p = params();
        let sites = make_lattice(1, &p.extent, 0).unwrap();
        let mut t = CausalTapestry::new(0);
        for (i, site) in sites.iter().enumerate() {
            let tag = if i % 2 == 0 { "a" } else { "b" };
            let x = site.coords[0] as f64 * p.l_p;
            t.insert_informon(Informon::new(
                site.clone(),
                tag,
                Complex64::new((x * 2.0).cos(), x),
                Default::default(),
            ))
            .unwrap();
        }
        t.seal();
        let grid = vec![
            SpacetimePoint::new(0.0, vec![0.033]),
            SpacetimePoint::new(0.0, vec![-0.27]),
            SpacetimePoint::new(0.0, vec![0.4]),
        ];
        let full = global_field(&t, &grid, &p).unwrap();
        let fa = tagged_field(&t, &grid, &p, "a").unwrap();
        let fb = tagged_field(&t, &grid, &p, "b").unwrap();
        let sum = fa.add(&fb).unwrap();
        // Identical up to summation-order rounding.
        assert!(full.linf_diff(&sum).unwrap() < 1e-14);
    }

    #[test]
    fn strength_empty_and_single() {
        let p = params();
        let mut t = CausalTapestry::new(0);
        t.seal();
        assert_eq!(process_strength(&t, &p), 0.0);
        let single = init_from_samples(
            |_| Complex64::new(1.0, 0.0),
            &[LatticeSite::new(0, vec![0])],
            "p",
            &p,
        )
        .unwrap();
        assert_relative_eq!(process_strength(&single, &p), 0.1, max_relative = 1e-15);
    }

    #[test]
    fn band_limit_check() {
        let mut p = params();
        assert!(check_band_limit(&p).is_ok());
        p.band_limit = nyquist_rate(&p) * 1.5;
        assert!(matches!(
            check_band_limit(&p),
            Err(InterpError::AboveNyquist { .. })
        ));
    }

    #[test]
    fn csv_format() {
        let p = params();
        let f = WaveField {
            grid: vec![SpacetimePoint::new(0.1, vec![0.2])],
            values: vec![Complex64::new(0.5, -0.25)],
            t_p: p.t_p,
            l_p: p.l_p,
            dim: 1,
        };
        let mut out = Vec::new();
        f.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text, "t,x,re,im,abs2\n0.1,0.2,0.5,-0.25,0.3125\n");
    }
}
