//! Continuum kink dispersion, saddle-point arrival amplitudes, gap scaling
//! and coherence budgets.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::exec::Exec;

const PI: f64 = std::f64::consts::PI;

/// Critical Fermi velocity `3√3/4`.
pub const V_FERMI: f64 = 1.299_038_105_676_658;

/// Mean Rydberg fraction of the cosine ramp.
pub const P_BAR_COSINE: f64 = 2.0 / PI;

/// `E(k̃) = A √(1 − B cos²(k̃/2))` with `s = √(8 + λ²)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Dispersion {
    pub lambda: f64,
    pub s_aux: f64,
    amplitude: f64,
    depth: f64,
}

pub fn dispersion(lambda: f64) -> Result<Dispersion> {
    if !(0.0..=1.0).contains(&lambda) {
        return invalid(format!("staggering {lambda} outside [0, 1]"));
    }
    let s = (8.0 + lambda * lambda).sqrt();
    let amplitude = (3.0 * lambda + s).powf(1.5) / (2.0 * 2f64.sqrt() * (lambda + s).sqrt());
    let ratio =
        (s - 3.0 * lambda).powi(3) * (s + lambda) / ((s - lambda) * (3.0 * lambda + s).powi(3));
    Ok(Dispersion {
        lambda,
        s_aux: s,
        amplitude,
        depth: 1.0 - ratio,
    })
}

impl Dispersion {
    pub fn energy(&self, k: f64) -> f64 {
        let c = (0.5 * k).cos();
        self.amplitude * (1.0 - self.depth * c * c).max(0.0).sqrt()
    }

    /// Group velocity `dE/dk̃`.
    pub fn velocity(&self, k: f64) -> f64 {
        let e = self.energy(k);
        if e == 0.0 {
            return 0.5 * self.amplitude * self.depth.sqrt();
        }
        self.amplitude * self.amplitude * self.depth * k.sin() / (4.0 * e)
    }

    pub fn curvature(&self, k: f64) -> f64 {
        let e = self.energy(k);
        if e == 0.0 {
            return 0.0;
        }
        let c = 0.25 * self.amplitude * self.amplitude * self.depth;
        c * (k.cos() / e - k.sin() * self.velocity(k) / (e * e))
    }

    /// `E(0)`.
    pub fn gap(&self) -> f64 {
        self.energy(0.0)
    }

    /// Maximum of the group velocity and its location in `[0, π]`.
    pub fn velocity_peak(&self) -> (f64, f64) {
        let f = |k: f64| -self.velocity(k);
        let (mut a, mut b) = (0.0, PI);
        let g = 0.5 * (5f64.sqrt() - 1.0);
        let mut x1 = b - g * (b - a);
        let mut x2 = a + g * (b - a);
        let (mut f1, mut f2) = (f(x1), f(x2));
        while b - a > 1e-11 {
            if f1 < f2 {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - g * (b - a);
                f1 = f(x1);
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + g * (b - a);
                f2 = f(x2);
            }
        }
        let k = 0.5 * (a + b);
        let best = [(0.0, self.velocity(0.0)), (k, self.velocity(k))]
            .into_iter()
            .max_by(|p, q| p.1.total_cmp(&q.1))
            .expect("two candidates");
        (best.0, best.1)
    }
}

pub fn v_max(lambda: f64) -> Result<f64> {
    Ok(dispersion(lambda)?.velocity_peak().1)
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> Result<f64> {
    let (mut flo, fhi) = (f(lo), f(hi));
    if flo * fhi > 0.0 {
        return Err(Error::Bracketing(format!("no sign change on [{lo}, {hi}]")));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 || hi - lo < 1e-15 {
            return Ok(mid);
        }
        if (fm > 0.0) == (flo > 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Stationary points `k̃_s` of the phase `(2s−1)πk − E(k̃)t`, one per branch
/// of the group velocity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Saddle {
    pub index: usize,
    pub k: f64,
    pub falling: bool,
    pub amplitude: Complex64,
}

pub fn saddle_points(l: usize, lambda: f64, t: f64, max_saddles: usize) -> Result<Vec<Saddle>> {
    if !(t > 0.0) {
        return invalid("saddle evaluation needs t > 0");
    }
    let d = dispersion(lambda)?;
    let (k_peak, v_peak) = d.velocity_peak();
    if v_peak <= 0.0 {
        return Ok(Vec::new());
    }
    let n = (l + 2) as f64;
    let scale = PI / n;
    let mut out = Vec::new();
    for s in 1..=max_saddles {
        let m = (2 * s - 1) as f64;
        if v_peak * t / n - m <= 0.0 {
            break;
        }
        let target = m * n / t;
        let f = |k: f64| d.velocity(k) - target;
        let mut branches = vec![(bisect(f, k_peak, PI)?, true)];
        if k_peak > 1e-9 {
            branches.push((bisect(f, 0.0, k_peak)?, false));
        }
        for (k, falling) in branches {
            let kk = k / scale;
            let phase = m * PI * kk - d.energy(k) * t;
            let g2 = -d.curvature(k) * t * scale * scale;
            let turn = if falling { 1.25 * PI } else { 0.75 * PI };
            let weight = (2.0 / n) * k.sin().powi(2) * (2.0 * PI / g2.abs()).sqrt();
            out.push(Saddle {
                index: s,
                k,
                falling,
                amplitude: Complex64::from_polar(weight, phase + turn),
            });
        }
    }
    Ok(out)
}

/// Saddle-point form of the end-to-end kink overlap.
pub fn saddle_overlap(l: usize, lambda: f64, t: f64, max_saddles: usize) -> Result<Complex64> {
    Ok(saddle_points(l, lambda, t, max_saddles)?
        .iter()
        .map(|s| s.amplitude)
        .sum())
}

/// [`saddle_overlap`] on a time grid; `t ≤ 0` maps to zero.
pub fn saddle_series(
    l: usize,
    lambda: f64,
    times: &[f64],
    max_saddles: usize,
    exec: Exec,
) -> Result<Vec<Complex64>> {
    exec.try_map(times, |&t| {
        if t > 0.0 {
            saddle_overlap(l, lambda, t, max_saddles)
        } else {
            Ok(Complex64::new(0.0, 0.0))
        }
    })
}

/// End-to-end overlap sum with continuum energies `E(πk/(l+2))`.
pub fn overlap_continuum(l: usize, lambda: f64, times: &[f64]) -> Result<Vec<Complex64>> {
    let d = dispersion(lambda)?;
    let n = (l + 2) as f64;
    let terms: Vec<(f64, f64)> = (1..=l + 1)
        .map(|k| {
            let kt = PI * k as f64 / n;
            (
                (2.0 / n) * kt.sin() * (kt * (l + 1) as f64).sin(),
                d.energy(kt),
            )
        })
        .collect();
    Ok(times
        .iter()
        .map(|&t| {
            terms
                .iter()
                .map(|&(w, e)| Complex64::from_polar(w, -e * t))
                .sum()
        })
        .collect())
}

/// Closed form of the first saddle at criticality, `x = (l+2)/(v_F t)`.
pub fn critical_first_saddle(l: usize, t: f64) -> f64 {
    let x = (l + 2) as f64 / (V_FERMI * t);
    if x >= 1.0 {
        return 0.0;
    }
    16.0 / (PI * (l + 2) as f64).sqrt() * (1.0 - x * x).powf(0.75) * x.powf(2.5)
}

/// Conformal ground-state energy coefficient for the chain length.
pub fn e_scft(sites: usize) -> Result<f64> {
    match sites % 3 {
        1 => Ok(1.0 / 3.0),
        0 => Ok(2.0 / 3.0),
        _ => invalid(format!(
            "L = {sites} has no conformal gap assignment (L mod 3 = 2)"
        )),
    }
}

/// Finite-size gap `2π E_SCFT 3 v_F W(2r₀)/L` at criticality.
pub fn gap_scaling(sites: usize, lambda: f64, w2: f64) -> Result<f64> {
    if lambda != 1.0 {
        return invalid("gap scaling holds at the critical point λ = 1 only");
    }
    if sites == 0 || !(w2 > 0.0) {
        return invalid("need L > 0 and W(2r₀) > 0");
    }
    Ok(2.0 * PI * e_scft(sites)? * 3.0 * V_FERMI * w2 / sites as f64)
}

/// Physical inputs of the coherence budget. Frequencies are angular.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BudgetParams {
    pub omega: f64,
    pub delta: f64,
    pub c6: f64,
    pub r0: f64,
    pub tau0: f64,
    pub kappa: f64,
    pub e_scft: f64,
    pub p_bar: f64,
    pub velocity: f64,
}

impl BudgetParams {
    /// `Ω = 2π·10 MHz`, `Δ = 10Ω`, `C₆ = 645·10⁹`, `r₀ = 2.5`, `τ₀ = 8.6 ms`.
    pub fn reference() -> Self {
        let omega = 2.0 * PI * 10e6;
        BudgetParams {
            omega,
            delta: 10.0 * omega,
            c6: 645e9,
            r0: 2.5,
            tau0: 8.6e-3,
            kappa: 0.0,
            e_scft: 1.0 / 3.0,
            p_bar: P_BAR_COSINE,
            velocity: V_FERMI,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.omega,
            self.delta,
            self.c6,
            self.r0,
            self.tau0,
            self.velocity,
        ];
        if positive.iter().any(|&x| !(x > 0.0))
            || self.kappa < 0.0
            || self.e_scft < 0.0
            || self.p_bar < 0.0
        {
            return invalid("budget parameters must be positive (κ, E_SCFT, p̄ non-negative)");
        }
        Ok(())
    }

    /// `Ω/Δ < 1`.
    pub fn perturbative(&self) -> bool {
        self.omega < self.delta
    }

    /// `V₂ = C₆/(2r₀)⁶`.
    pub fn v2(&self) -> f64 {
        self.c6 / (2.0 * self.r0).powi(6)
    }

    /// Dressed coupling `W(2r₀) = 2Ω⁴V₂/(Δ³(2Δ + V₂))`.
    pub fn w2(&self) -> f64 {
        let v = self.v2();
        2.0 * self.omega.powi(4) * v / (self.delta.powi(3) * (2.0 * self.delta + v))
    }
}

/// Achievable chain length `L_max`. The preparation stage enters through
/// `1/(E_SCFT κ p̄/(2π) + 1)` under the square root.
pub fn coherence_budget(p: &BudgetParams, include_preparation: bool) -> Result<f64> {
    p.validate()?;
    let bare = 2.0 * p.tau0 * p.velocity / (p.delta * (1.0 + 2.0 * p.delta / p.v2()));
    let prep = if include_preparation {
        p.e_scft * p.kappa * p.p_bar / (2.0 * PI) + 1.0
    } else {
        1.0
    };
    Ok(3.0 * p.omega * (bare / prep).sqrt())
}

/// `3√(τ₀ v W(2r₀)(Δ/Ω)²)`, the evolution-only budget written through the
/// dressed coupling.
pub fn budget_from_coupling(p: &BudgetParams) -> Result<f64> {
    p.validate()?;
    Ok(3.0 * (p.tau0 * p.velocity * p.w2() * (p.delta / p.omega).powi(2)).sqrt())
}
