//! Rydberg-dressed ground-state interactions: single and double dressing,
//! the two-atom elimination oracle, pseudoinverse potential design and the
//! laser patterns realizing a staggered chain.
//!
//! Unit convention: Rabi frequencies and detunings are angular
//! (`2π × frequency`), `C₆` is taken as tabulated in `GHz·μm⁶` without a
//! `2π`, lengths are in μm. Resulting energies are reported as returned by
//! the formulas and quoted as Hz.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::eigh;
use crate::operators::{RydbergParams, Staggering};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Reference single-dressing parameters: `Ω = 2π·10 MHz`, `Δ = 10Ω`,
/// `C₆ = 645 GHz·μm⁶`, `r₀ = 2.5 μm`.
pub const REF_OMEGA: f64 = TWO_PI * 10e6;
pub const REF_DELTA: f64 = 10.0 * REF_OMEGA;
pub const REF_C6: f64 = 645e9;
pub const REF_R0: f64 = 2.5;

/// One off-resonant dressing laser.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DressingLayer {
    pub omega: f64,
    pub delta: f64,
    pub c6: f64,
    /// Per-site Rabi multipliers, repeated along the chain; empty means 1.
    pub site_pattern: Vec<f64>,
}

impl DressingLayer {
    pub fn new(omega: f64, delta: f64, c6: f64) -> Self {
        DressingLayer {
            omega,
            delta,
            c6,
            site_pattern: Vec::new(),
        }
    }

    pub fn reference() -> Self {
        DressingLayer::new(REF_OMEGA, REF_DELTA, REF_C6)
    }

    pub fn with_pattern(mut self, pattern: Vec<f64>) -> Self {
        self.site_pattern = pattern;
        self
    }

    /// `|Ω/Δ| < 1`.
    pub fn perturbative(&self) -> bool {
        self.omega.abs() < self.delta.abs()
    }

    /// Plateau height `2Ω⁴/Δ³`.
    pub fn amplitude(&self) -> f64 {
        2.0 * self.omega.powi(4) / self.delta.powi(3)
    }

    /// Inverse blockade radius `(2Δ/C₆)^{1/6}`.
    pub fn rho(&self) -> Result<f64> {
        let q = 2.0 * self.delta / self.c6;
        if !(q > 0.0) {
            return invalid("detuning and C₆ of opposite sign: the flat top has a resonance");
        }
        Ok(q.powf(1.0 / 6.0))
    }

    /// Rabi multiplier of site `i` (1-based).
    pub fn site_factor(&self, i: usize) -> f64 {
        if self.site_pattern.is_empty() {
            1.0
        } else {
            self.site_pattern[(i - 1) % self.site_pattern.len()]
        }
    }

    pub fn interaction(&self, r: f64) -> f64 {
        self.c6 / r.powi(6)
    }
}

fn check_radius(r: f64) -> Result<()> {
    if !(r > 0.0) {
        return invalid(format!("distance must be positive, got {r}"));
    }
    Ok(())
}

fn flat_top(omega_i: f64, omega_j: f64, delta: f64, v: f64) -> f64 {
    2.0 * (omega_i * omega_j).powi(2) * v / (delta.powi(3) * (2.0 * delta + v))
}

/// `W(r) = 2Ω⁴V(r)/(Δ³(2Δ + V(r)))` for unit site multipliers.
pub fn dressed_potential(layer: &DressingLayer, r: f64) -> Result<f64> {
    check_radius(r)?;
    Ok(flat_top(
        layer.omega,
        layer.omega,
        layer.delta,
        layer.interaction(r),
    ))
}

/// Pair potential between sites `i < j` at spacing `r0`, with site multipliers.
pub fn dressed_pair(layer: &DressingLayer, i: usize, j: usize, r0: f64) -> Result<f64> {
    if i == 0 || j <= i {
        return invalid("need 1 ≤ i < j");
    }
    let r = (j - i) as f64 * r0;
    check_radius(r)?;
    let (oi, oj) = (
        layer.omega * layer.site_factor(i),
        layer.omega * layer.site_factor(j),
    );
    Ok(flat_top(oi, oj, layer.delta, layer.interaction(r)))
}

/// Two-atom check of the adiabatic elimination.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TwoAtomCheck {
    /// Dressed `|gg⟩` level of the 4×4 Hamiltonian.
    pub exact_level: f64,
    /// That level minus its value without interaction.
    pub exact_interaction: f64,
    /// `W′ = −2Ω_iΩ_j(2Δ+V)/(Δ(2Δ+V) − 2Ω_iΩ_j)`.
    pub closed_form: f64,
    /// `W(r)` from the fourth-order expansion.
    pub perturbative: f64,
}

fn gg_level(oi: f64, oj: f64, delta: f64, v: f64) -> f64 {
    let h = [
        [0.0, oj, oi, 0.0],
        [oj, delta, 0.0, oi],
        [oi, 0.0, delta, oj],
        [0.0, oi, oj, 2.0 * delta + v],
    ];
    let m = Mat::from_fn(4, 4, |r, c| h[r][c]);
    let (vals, vecs) = eigh(&m);
    let k = (0..4)
        .max_by(|&a, &b| vecs.read(0, a).abs().total_cmp(&vecs.read(0, b).abs()))
        .expect("four levels");
    vals[k]
}

/// Exact `|gg⟩` level against the elimination formulas, for two atoms with
/// Rabi multipliers `(f_i, f_j)` at distance `r`.
pub fn two_atom_oracle(layer: &DressingLayer, factors: (f64, f64), r: f64) -> Result<TwoAtomCheck> {
    check_radius(r)?;
    let (oi, oj) = (layer.omega * factors.0, layer.omega * factors.1);
    let (d, v) = (layer.delta, layer.interaction(r));
    let exact_level = gg_level(oi, oj, d, v);
    let free = gg_level(oi, oj, d, 0.0);
    let p = oi * oj;
    Ok(TwoAtomCheck {
        exact_level,
        exact_interaction: exact_level - free,
        closed_form: -2.0 * p * (2.0 * d + v) / (d * (2.0 * d + v) - 2.0 * p),
        perturbative: flat_top(oi, oj, d, v),
    })
}

/// Secondary layer whose `r⁻⁶` tail cancels the primary's:
/// `Ω′ = Ω|Δ′/Δ||C₆/C₆′|^{1/4}`.
pub fn match_double_dressing(
    primary: &DressingLayer,
    delta2: f64,
    c6_2: f64,
) -> Result<DressingLayer> {
    if !(delta2 < 0.0) || !(c6_2 < 0.0) {
        return invalid("the compensating layer needs Δ′ < 0 and C₆′ < 0");
    }
    if !(primary.delta > 0.0) || !(primary.c6 > 0.0) {
        return invalid("the primary layer must be repulsive (Δ > 0, C₆ > 0)");
    }
    let omega =
        primary.omega * (delta2 / primary.delta).abs() * (primary.c6 / c6_2).abs().powf(0.25);
    Ok(DressingLayer {
        omega,
        delta: delta2,
        c6: c6_2,
        site_pattern: primary.site_pattern.clone(),
    })
}

/// `W_tot(r) = Σ_layers W(r)`.
pub fn total_potential(layers: &[DressingLayer], r: f64) -> Result<f64> {
    layers.iter().map(|l| dressed_potential(l, r)).sum()
}

/// `(W_tot(2r₀), W_tot(r₀)/W_tot(2r₀), W_tot(2r₀)/W_tot(3r₀))`.
pub fn anchor_triple(layers: &[DressingLayer], r0: f64) -> Result<(f64, f64, f64)> {
    let w = |n: f64| total_potential(layers, n * r0);
    let (w1, w2, w3) = (w(1.0)?, w(2.0)?, w(3.0)?);
    Ok((w2, w1 / w2, w2 / w3))
}

/// One flat-top component `A/(1 + (ρr)⁶)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlatTop {
    pub amplitude: f64,
    pub rho: f64,
}

impl FlatTop {
    pub fn from_layer(layer: &DressingLayer) -> Result<Self> {
        Ok(FlatTop {
            amplitude: layer.amplitude(),
            rho: layer.rho()?,
        })
    }

    pub fn value(&self, r: f64) -> f64 {
        self.amplitude / ((self.rho * r).powi(6) + 1.0)
    }
}

/// Step-like target in units of `W(2r₀)`: `s`, `1`, `1/s`, then `(1/s)(3/n)⁶`.
pub fn target_profile(suppression: f64, n: f64) -> f64 {
    if n < 1.5 {
        suppression
    } else if n < 2.5 {
        1.0
    } else if n < 3.5 {
        1.0 / suppression
    } else {
        (3.0 / n).powi(6) / suppression
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PotentialDesign {
    pub r0: f64,
    pub components: Vec<FlatTop>,
    pub suppression: Option<f64>,
    /// Fit distances in units of `r₀`.
    pub fit_points: Vec<f64>,
    pub singular_values: Vec<f64>,
    pub rank: usize,
}

impl PotentialDesign {
    pub fn from_layers(layers: &[DressingLayer], r0: f64) -> Result<Self> {
        let components = layers
            .iter()
            .map(FlatTop::from_layer)
            .collect::<Result<Vec<_>>>()?;
        Ok(PotentialDesign {
            r0,
            rank: components.len(),
            components,
            suppression: None,
            fit_points: Vec::new(),
            singular_values: Vec::new(),
        })
    }

    pub fn total(&self, r: f64) -> f64 {
        self.components.iter().map(|c| c.value(r)).sum()
    }

    /// `W_tot(n r₀)`.
    pub fn at(&self, n: f64) -> f64 {
        self.total(n * self.r0)
    }

    pub fn target(&self, n: f64) -> Option<f64> {
        self.suppression.map(|s| target_profile(s, n))
    }

    /// Largest `|W_tot(r_i) − W_target(r_i)|/|W_target(2r₀)|` over the fit points.
    pub fn fit_residual(&self) -> Option<f64> {
        let s = self.suppression?;
        let scale = target_profile(s, 2.0).abs();
        Some(
            self.fit_points
                .iter()
                .map(|&n| (self.at(n) - target_profile(s, n)).abs() / scale)
                .fold(0.0, f64::max),
        )
    }

    /// `W_tot(2r₀)/W_tot(n r₀)`.
    pub fn tail_ratio(&self, n: f64) -> f64 {
        self.at(2.0) / self.at(n)
    }
}

/// Amplitudes of flat tops with inverse radii `ρ_j` (given as the products
/// `ρ_j r₀`) fitting the step target at `n_i r₀` by truncated-SVD
/// pseudoinverse with relative cutoff `rcond`.
pub fn fredholm_design(
    suppression: f64,
    r0: f64,
    rho_r0: &[f64],
    fit_points: &[f64],
    rcond: f64,
) -> Result<PotentialDesign> {
    if !(suppression > 0.0) || !(r0 > 0.0) {
        return invalid("suppression factor and spacing must be positive");
    }
    if rho_r0.iter().chain(fit_points).any(|&x| !(x > 0.0)) {
        return invalid("radii and fit points must be positive");
    }
    let mut sorted = fit_points.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return invalid("fit points must be distinct");
    }
    let (m, n) = (fit_points.len(), rho_r0.len());
    let kernel = Mat::from_fn(m, n, |i, j| {
        1.0 / ((rho_r0[j] * fit_points[i]).powi(6) + 1.0)
    });
    let svd = kernel.thin_svd();
    let sv: Vec<f64> = (0..m.min(n)).map(|k| svd.s_diagonal().read(k)).collect();
    let cutoff = rcond * sv.first().copied().unwrap_or(0.0);
    let rank = sv.iter().filter(|&&x| x > cutoff).count();
    if rank < 2 {
        return Err(Error::DesignImpossible(format!(
            "pseudoinverse rank {rank} below 2"
        )));
    }
    let (u, v) = (svd.u(), svd.v());
    let target: Vec<f64> = fit_points
        .iter()
        .map(|&x| target_profile(suppression, x))
        .collect();
    let mut amps = vec![0.0; n];
    for k in 0..rank {
        let proj: f64 = (0..m).map(|i| u.read(i, k) * target[i]).sum::<f64>() / sv[k];
        for (j, a) in amps.iter_mut().enumerate() {
            *a += v.read(j, k) * proj;
        }
    }
    let components = amps
        .iter()
        .zip(rho_r0)
        .map(|(&amplitude, &p)| FlatTop {
            amplitude,
            rho: p / r0,
        })
        .collect();
    Ok(PotentialDesign {
        r0,
        components,
        suppression: Some(suppression),
        fit_points: fit_points.to_vec(),
        singular_values: sv,
        rank,
    })
}

/// `n` evenly spaced values of `ρ r₀` in `[lo, hi]`.
pub fn radii_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|j| lo + (hi - lo) * j as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Bond, next-nearest, chemical-potential and Rabi vectors realizing the
/// staggered chain, in units of `J`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OffCriticalPatterns {
    /// `J_i` on bond `(i, i+1)`.
    pub hopping: Vec<f64>,
    /// `W_i` on pair `(i, i+2)`.
    pub nnn: Vec<f64>,
    pub mu: Vec<f64>,
    /// Rabi multipliers `Ω̃_i = λ_{i+1}λ_{i+2}`, so that `Ω̃_iΩ̃_{i+2} ∝ λ_{i+1}`.
    pub rabi: Vec<f64>,
}

pub fn offcritical_patterns(
    lambda: f64,
    sites: usize,
    offset: usize,
) -> Result<OffCriticalPatterns> {
    let st = Staggering::new(sites, lambda, offset)?;
    let c = |i: usize| {
        if (1..=sites).contains(&i) {
            st.coupling(i)
        } else {
            0.0
        }
    };
    let hopping = (1..sites).map(|i| c(i) * c(i + 1)).collect();
    let nnn = (1..sites.saturating_sub(1))
        .map(|i| c(i + 1).powi(2))
        .collect();
    let mu = (1..=sites)
        .map(|k| -(c(k.wrapping_sub(1)).powi(2) + c(k + 1).powi(2)))
        .collect();
    let period = |i: usize| st.pattern[(i - 1 + st.offset) % 3];
    let rabi = (1..=sites).map(|i| period(i + 1) * period(i + 2)).collect();
    Ok(OffCriticalPatterns {
        hopping,
        nnn,
        mu,
        rabi,
    })
}

/// Long-range couplings `W̃_i(n)` for `n ≥ 2` in units of `J = W(2r₀)λ²`
/// (`J = W(2r₀)` at λ = 0 is undefined and rejected), from the Rabi pattern.
/// Row `n − 2` holds pairs `(i, i+n)`.
pub fn dressed_tails(
    layer: &DressingLayer,
    r0: f64,
    lambda: f64,
    sites: usize,
    offset: usize,
    max_range: usize,
) -> Result<Vec<Vec<f64>>> {
    if !(lambda > 0.0) {
        return invalid("tail couplings are normalized by λ² and need λ > 0");
    }
    let pat = offcritical_patterns(lambda, sites, offset)?;
    let w2 = dressed_potential(layer, 2.0 * r0)?;
    (2..=max_range.min(sites.saturating_sub(1)))
        .map(|n| {
            let ratio = dressed_potential(layer, n as f64 * r0)? / w2;
            Ok((1..=sites - n)
                .map(|i| {
                    ratio * (pat.rabi[i - 1] * pat.rabi[i + n - 1]).powi(2) / (lambda * lambda)
                })
                .collect())
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Tradeoff {
    /// `w₂ = W(2r₀)Δ³/Ω⁴`.
    pub w2: f64,
    /// `Δγ₀/(w₂Ω²)`.
    pub scatter_ratio: f64,
    /// `W(3r₀)/W(2r₀)`.
    pub tail_ratio: f64,
}

pub fn tradeoff_ratios(layer: &DressingLayer, r0: f64, gamma0: f64) -> Result<Tradeoff> {
    if gamma0 < 0.0 {
        return invalid("decay rate must be non-negative");
    }
    let w2r0 = dressed_potential(layer, 2.0 * r0)?;
    let w2 = w2r0 * layer.delta.powi(3) / layer.omega.powi(4);
    Ok(Tradeoff {
        w2,
        scatter_ratio: layer.delta * gamma0 / (w2 * layer.omega * layer.omega),
        tail_ratio: dressed_potential(layer, 3.0 * r0)? / w2r0,
    })
}

/// Rydberg chain at criticality: hopping `J = W(2r₀)`, edge potentials
/// `μ₁ = μ_L = J`, uniform drive `Ω` and detuning `Δ` of `layer`.
pub fn rydberg_chain_params(layer: &DressingLayer, r0: f64, sites: usize) -> Result<RydbergParams> {
    if sites < 2 {
        return invalid("need at least two sites");
    }
    let j = dressed_potential(layer, 2.0 * r0)?;
    let mut mu = vec![0.0; sites];
    mu[0] = j;
    mu[sites - 1] = j;
    Ok(RydbergParams {
        hopping: j,
        mu,
        rabi: vec![layer.omega; sites],
        detuning: layer.delta,
        c6: layer.c6,
        spacing: r0,
        range_cut: None,
        rydberg_hopping: false,
    })
}

/// Rows `(n, W per layer…, W_tot, W_target)` on `n ∈ [n_min, n_max]`.
pub fn potential_table(
    layers: &[DressingLayer],
    design: Option<&PotentialDesign>,
    r0: f64,
    n_min: f64,
    n_max: f64,
    points: usize,
) -> Result<Vec<Vec<f64>>> {
    if points < 2 || !(n_min > 0.0) || !(n_max > n_min) {
        return invalid("table needs at least two points on a positive range");
    }
    (0..points)
        .map(|k| {
            let n = n_min + (n_max - n_min) * k as f64 / (points - 1) as f64;
            let mut row = vec![n];
            for l in layers {
                row.push(dressed_potential(l, n * r0)?);
            }
            let total = match design {
                Some(d) => d.at(n),
                None => row[1..].iter().sum(),
            };
            row.push(total);
            row.push(design.and_then(|d| d.target(n)).unwrap_or(f64::NAN));
            Ok(row)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn single_dressing_anchors() {
        let layer = DressingLayer::reference();
        let (w2, a, b) = anchor_triple(&[layer.clone()], REF_R0).unwrap();
        assert!((w2 - 4.0e3).abs() < 200.0, "{w2}");
        assert!((a - 21.0).abs() < 1.0, "{a}");
        assert!((b - 11.0).abs() < 0.5, "{b}");
        assert!(layer.perturbative());
    }

    #[test]
    fn plateau_and_monotone_decay() {
        let layer = DressingLayer::reference();
        let tiny = dressed_potential(&layer, 1e-3).unwrap();
        assert_relative_eq!(tiny, layer.amplitude(), max_relative = 1e-12);
        let mut last = f64::INFINITY;
        for k in 1..200 {
            let w = dressed_potential(&layer, 0.1 * k as f64).unwrap();
            assert!(w < last);
            last = w;
        }
        assert!(dressed_potential(&layer, 0.0).is_err());
    }

    #[test]
    fn flat_top_component_matches_layer() {
        let layer = DressingLayer::reference();
        let f = FlatTop::from_layer(&layer).unwrap();
        for &r in &[1.0, 2.5, 5.0, 9.0] {
            assert_relative_eq!(
                f.value(r),
                dressed_potential(&layer, r).unwrap(),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn elimination_converges_quadratically() {
        let mut errs = Vec::new();
        let ratios = [0.1, 0.05, 0.025, 0.0125];
        for &q in &ratios {
            let layer = DressingLayer::new(REF_DELTA * q, REF_DELTA, REF_C6);
            let c = two_atom_oracle(&layer, (1.0, 1.0), 2.0 * REF_R0).unwrap();
            errs.push(((c.exact_interaction - c.perturbative) / c.perturbative).abs());
        }
        for w in errs.windows(2) {
            let slope = (w[0] / w[1]).ln() / 2f64.ln();
            assert!((slope - 2.0).abs() < 0.1, "{errs:?}");
        }
    }

    #[test]
    fn closed_form_expansion() {
        let layer = DressingLayer::reference();
        for &r in &[2.5, 5.0, 7.5] {
            let c = two_atom_oracle(&layer, (1.0, 1.0), r).unwrap();
            let (o, d) = (layer.omega, layer.delta);
            let lhs = c.closed_form + 2.0 * o * o / d;
            let rhs = c.perturbative - 2.0 * o.powi(4) / d.powi(3);
            assert!(
                (lhs - rhs).abs() < 10.0 * o.powi(6) / d.powi(5),
                "{lhs} {rhs}"
            );
        }
        let zero =
            two_atom_oracle(&DressingLayer::new(0.0, REF_DELTA, REF_C6), (1.0, 1.0), 5.0).unwrap();
        assert_eq!(zero.closed_form, 0.0);
    }

    #[test]
    fn double_dressing_74d() {
        let p = DressingLayer::reference();
        let s = match_double_dressing(&p, -500e6, -6005e9).unwrap();
        assert!(
            (s.omega / TWO_PI - 4.5e6).abs() < 0.1e6,
            "{}",
            s.omega / TWO_PI
        );
        assert!(((s.delta / s.omega).abs() - 17.5).abs() < 0.2);
        let (w2, a, b) = anchor_triple(&[p.clone(), s.clone()], REF_R0).unwrap();
        assert_relative_eq!(w2, 1.0e3, max_relative = 0.05);
        assert_relative_eq!(a, 74.0, max_relative = 0.05);
        assert_relative_eq!(b, 94.0, max_relative = 0.05);
        let far = 25.0 * REF_R0;
        let cancel =
            total_potential(&[p.clone(), s], far).unwrap() / dressed_potential(&p, far).unwrap();
        assert!(cancel.abs() < 1e-3, "{cancel}");
    }

    #[test]
    fn double_dressing_84d() {
        let p = DressingLayer::reference();
        let s = match_double_dressing(&p, -500e6, -24200e9).unwrap();
        let (w2, a, b) = anchor_triple(&[p, s], REF_R0).unwrap();
        assert_relative_eq!(w2, 2.4e3, max_relative = 0.05);
        assert_relative_eq!(a, 35.0, max_relative = 0.05);
        assert_relative_eq!(b, 56.0, max_relative = 0.05);
        assert!(match_double_dressing(&DressingLayer::reference(), 500e6, -1e9).is_err());
    }

    #[test]
    fn double_dressing_decays_faster_than_r6() {
        let p = DressingLayer::reference();
        let s = match_double_dressing(&p, -500e6, -6005e9).unwrap();
        let layers = [p, s];
        let mut prev = None;
        for k in 0..10 {
            let r = REF_R0 * 4.0 * 1.3f64.powi(k);
            let scaled = total_potential(&layers, r).unwrap() * r.powi(6);
            if let Some(p) = prev {
                assert!(f64::abs(scaled) < f64::abs(p));
            }
            prev = Some(scaled);
        }
    }

    #[test]
    fn fredholm_interpolates_at_full_rank() {
        let rho = radii_grid(0.01, 2.0, 8);
        let pts: Vec<f64> = (1..=5).map(f64::from).collect();
        let d = fredholm_design(1e3, REF_R0, &rho, &pts, 1e-12).unwrap();
        assert_eq!(d.rank, 5);
        assert!(d.fit_residual().unwrap() < 1e-6, "{:?}", d.fit_residual());
        assert!(fredholm_design(1e3, REF_R0, &rho, &[1.0, 1.0], 1e-12).is_err());
        assert!(matches!(
            fredholm_design(1e3, REF_R0, &[1.0], &pts, 1e-12),
            Err(Error::DesignImpossible(_))
        ));
    }

    #[test]
    fn pattern_vectors() {
        let p = offcritical_patterns(1.0, 13, 0).unwrap();
        assert!(p.hopping.iter().all(|&x| x == 1.0));
        assert_eq!(p.mu[0], -1.0);
        assert_eq!(p.mu[12], -1.0);
        assert!(p.mu[1..12].iter().all(|&x| x == -2.0));
        let lam = 0.4;
        let q = offcritical_patterns(lam, 13, 0).unwrap();
        assert_relative_eq!(q.hopping[0], 1.0);
        assert_relative_eq!(q.hopping[1], lam);
        assert_relative_eq!(q.hopping[2], lam);
        assert_relative_eq!(q.nnn[1], lam * lam);
        assert_relative_eq!(q.mu[1], -(1.0 + lam * lam));
        assert_relative_eq!(q.mu[2], -2.0);
        assert_eq!(&q.rabi[..3], &[lam, lam, 1.0]);
        for i in 0..11 {
            assert_relative_eq!(
                q.rabi[i] * q.rabi[i + 2],
                lam * Staggering::new(13, lam, 0).unwrap().coupling(i + 2)
            );
        }
    }

    #[test]
    fn tails_scale_with_pattern() {
        let layer = DressingLayer::reference();
        let lam = 0.5;
        let t = dressed_tails(&layer, REF_R0, lam, 10, 0, 3).unwrap();
        assert_relative_eq!(t[0][0], 1.0, max_relative = 1e-12);
        assert_relative_eq!(t[0][1], lam * lam, max_relative = 1e-12);
        let third = dressed_potential(&layer, 3.0 * REF_R0).unwrap()
            / dressed_potential(&layer, 2.0 * REF_R0).unwrap();
        assert_relative_eq!(t[1][2], third / (lam * lam), max_relative = 1e-12);
        assert!(dressed_tails(&layer, REF_R0, 0.0, 10, 0, 3).is_err());
    }

    #[test]
    fn tradeoff_values() {
        let layer = DressingLayer::reference();
        let t = tradeoff_ratios(&layer, REF_R0, 1.0 / 8.6e-3).unwrap();
        assert_relative_eq!(t.tail_ratio, 1.0 / 11.06, max_relative = 0.01);
        let none = tradeoff_ratios(&layer, REF_R0, 0.0).unwrap();
        assert_eq!(none.scatter_ratio, 0.0);
        assert!(t.scatter_ratio > 0.0);
    }

    #[test]
    fn table_shape() {
        let rows =
            potential_table(&[DressingLayer::reference()], None, REF_R0, 1.0, 4.0, 7).unwrap();
        assert_eq!(rows.len(), 7);
        assert!(rows
            .iter()
            .all(|r| r.len() == 4 && r[1] == r[2] && r[3].is_nan()));
    }
}
