//! Localized kinks and skinks, quench dynamics and adiabatic preparation.

use std::collections::BTreeMap;

use faer::complex_native::c64;
use faer::solvers::SpSolver;
use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::exec::Exec;
use crate::hilbert::{HilbertSpace, OccupationState, RydbergSpace};
use crate::linalg::{cnorm, dot, normalize, rcdot, SparseMatrix};
use crate::operators::{
    build_hq, build_rydberg, build_supercharge, ground_pair_diagonal, observable_diagonal,
    occupation_diagonal, rydberg_observable_diagonal, rydberg_population_diagonal, LinearOperator,
    ObservableKind, RydbergParams, Sector, Staggering,
};
use crate::spectra::{diagonalize, diagonalize_all, kink_band, Count, Spectrum, DENSE_THRESHOLD};

const PI: f64 = std::f64::consts::PI;

/// `sin(k̃ j)` weight of the orthogonal sine transform, `k̃ = πk/(l+2)`.
pub fn sine_weight(l: usize, k: usize, j: usize) -> f64 {
    let kt = PI * k as f64 / (l + 2) as f64;
    (2.0 / (l + 2) as f64).sqrt() * (kt * j as f64).sin()
}

/// Extreme-staggering kinks `K_j`, `j = 1..=l+1`, on the `l`-particle
/// sector of `L = 3l + 1`.
///
/// `K_j` has site `3j − 2` empty, every `3k` with `k ≥ j` filled, and one
/// particle shared evenly over each cell `(3m+1, 3m+2)` left of the kink.
pub fn bare_kinks(space: &HilbertSpace) -> Result<Vec<Vec<f64>>> {
    let sites = space.sites();
    let l = space.particles();
    if sites != 3 * l + 1 || !space.is_constrained() {
        return invalid("bare kinks live in the l-particle sector of L = 3l + 1");
    }
    let mut out = Vec::with_capacity(l + 1);
    for j in 1..=l + 1 {
        let tail: Vec<usize> = (j..=l).map(|k| 3 * k).collect();
        let cells = j - 1;
        let amp = (0.5f64).powf(cells as f64 / 2.0);
        let mut v = vec![0.0; space.dim()];
        for choice in 0u32..(1 << cells) {
            let mut occ: Vec<usize> = (0..cells)
                .map(|m| 3 * m + 1 + ((choice >> m) & 1) as usize)
                .collect();
            occ.extend(&tail);
            let idx = space
                .index(OccupationState::from_sites(&occ))
                .expect("bare kink respects exclusion");
            v[idx] = amp;
        }
        out.push(v);
    }
    Ok(out)
}

/// The `l+1` lowest one-kink eigenpairs, labelled by ascending energy.
#[derive(Clone, Debug)]
pub struct KinkBand {
    pub l: usize,
    pub lambda: f64,
    pub space: HilbertSpace,
    pub energies: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct SkinkSet {
    pub space: HilbertSpace,
    /// `Q|v_k⟩/√E_k`.
    pub band: Vec<Vec<f64>>,
    /// Localized skinks `K̄_j`.
    pub states: Vec<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct KinkBasis {
    pub l: usize,
    pub lambda: f64,
    pub space: HilbertSpace,
    pub energies: Vec<f64>,
    pub band: Vec<Vec<f64>>,
    pub kinks: Vec<Vec<f64>>,
    pub skinks: Option<SkinkSet>,
}

fn sine_transform(l: usize, band: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let dim = band[0].len();
    (1..=l + 1)
        .map(|j| {
            let mut v = vec![0.0; dim];
            for (k, b) in band.iter().enumerate() {
                let c = sine_weight(l, k + 1, j);
                v.iter_mut().zip(b).for_each(|(x, y)| *x += c * y);
            }
            v
        })
        .collect()
}

/// Localized kinks `K_j = Σ_k S_jk v_k` and their superpartners.
///
/// Skinks are the same sine transform applied to the normalized partner
/// band `Q v_k/√E_k`, so they share the kinks' energies exactly. At `λ = 0`
/// this is `Q K_j`.
pub fn build_kinks(band: &KinkBand) -> Result<KinkBasis> {
    let l = band.l;
    if band.vectors.len() != l + 1 || band.energies.len() != l + 1 {
        return invalid(format!(
            "band holds {} states, expected {}",
            band.vectors.len(),
            l + 1
        ));
    }
    let kinks = sine_transform(l, &band.vectors);
    let skinks = if band.energies.iter().all(|&e| e > 1e-10) {
        let st = Staggering::new(band.space.sites(), band.lambda, 0)?;
        let q = build_supercharge(&band.space, &st)?;
        let up = band.space.sector(l + 1)?;
        let partner: Vec<Vec<f64>> = band
            .vectors
            .iter()
            .zip(&band.energies)
            .map(|(v, &e)| q.apply(v).into_iter().map(|x| x / e.sqrt()).collect())
            .collect();
        let states = sine_transform(l, &partner);
        Some(SkinkSet {
            space: up,
            band: partner,
            states,
        })
    } else {
        None
    };
    Ok(KinkBasis {
        l,
        lambda: band.lambda,
        space: band.space.clone(),
        energies: band.energies.clone(),
        band: band.vectors.clone(),
        kinks,
        skinks,
    })
}

/// Band extraction plus localization at `(l, λ)`.
pub fn kink_basis(l: usize, lambda: f64) -> Result<KinkBasis> {
    build_kinks(&kink_band(l, lambda)?)
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct QuenchSeries {
    pub times: Vec<f64>,
    pub overlap: Vec<Complex64>,
    pub overlap_sq: Vec<f64>,
    pub observables: BTreeMap<String, Vec<f64>>,
    /// Largest `|‖ψ(t)‖ − 1|` along the run.
    pub norm_drift: f64,
}

/// `o(t) = Σ_k S_{1k} S_{l+1,k} e^{−iE_k t}` from the band energies.
pub fn overlap_series(basis: &KinkBasis, times: &[f64]) -> QuenchSeries {
    overlap_from_energies(basis.l, &basis.energies, times)
}

pub fn overlap_from_energies(l: usize, energies: &[f64], times: &[f64]) -> QuenchSeries {
    let w: Vec<f64> = (1..=l + 1)
        .map(|k| sine_weight(l, k, 1) * sine_weight(l, k, l + 1))
        .collect();
    let overlap: Vec<Complex64> = times
        .iter()
        .map(|&t| {
            w.iter()
                .zip(energies)
                .map(|(&c, &e)| Complex64::from_polar(c, -e * t))
                .sum()
        })
        .collect();
    QuenchSeries {
        times: times.to_vec(),
        overlap_sq: overlap.iter().map(|z| z.norm_sqr()).collect(),
        overlap,
        observables: BTreeMap::new(),
        norm_drift: 0.0,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Method {
    /// Spectral decomposition of the full operator.
    Eigen,
    /// `(1 + iHΔt/2)⁻¹(1 − iHΔt/2)` steps; `dt = None` uses `0.01/‖H‖`.
    CrankNicolson { dt: Option<f64> },
}

/// States sampled along a propagation.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<Complex64>>,
}

impl Trajectory {
    pub fn expect_diagonal(&self, diag: &[f64]) -> Vec<f64> {
        self.states
            .iter()
            .map(|s| s.iter().zip(diag).map(|(a, d)| a.norm_sqr() * d).sum())
            .collect()
    }

    pub fn overlaps(&self, bra: &[f64]) -> Vec<Complex64> {
        self.states.iter().map(|s| rcdot(bra, s)).collect()
    }

    pub fn norm_drift(&self) -> f64 {
        self.states
            .iter()
            .map(|s| (cnorm(s) - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Overlap with `target` plus named diagonal observables.
    pub fn series(&self, target: Option<&[f64]>, observables: &[(&str, &[f64])]) -> QuenchSeries {
        let overlap = target.map(|t| self.overlaps(t)).unwrap_or_default();
        QuenchSeries {
            times: self.times.clone(),
            overlap_sq: overlap.iter().map(|z| z.norm_sqr()).collect(),
            overlap,
            observables: observables
                .iter()
                .map(|(n, d)| (n.to_string(), self.expect_diagonal(d)))
                .collect(),
            norm_drift: self.norm_drift(),
        }
    }
}

pub fn real_to_complex(v: &[f64]) -> Vec<Complex64> {
    v.iter().map(|&x| Complex64::new(x, 0.0)).collect()
}

pub fn propagate(
    state: &[Complex64],
    h: &LinearOperator,
    times: &[f64],
    method: Method,
) -> Result<Trajectory> {
    if h.domain != h.codomain || state.len() != h.dim() {
        return Err(Error::SectorMismatch(
            "state and operator dimensions differ".into(),
        ));
    }
    match method {
        Method::Eigen => {
            if h.dim() > DENSE_THRESHOLD {
                return Err(Error::DimensionLimit {
                    dim: h.dim(),
                    limit: DENSE_THRESHOLD,
                });
            }
            Ok(propagate_spectral(&diagonalize_all(h)?, state, times))
        }
        Method::CrankNicolson { dt } => {
            let asym = h.max_asymmetry();
            if asym > 1e-12 * h.matrix.max_abs().max(1.0) {
                return Err(Error::NotHermitian(asym));
            }
            let (shift, width) = spectral_window(&h.matrix);
            let dt = dt.unwrap_or(0.01 / width.max(1e-300));
            let stepper = CnStepper::new(vec![h.matrix.clone()], vec![shift]);
            stepper.evolve(state, times, dt, |_| vec![1.0])
        }
    }
}

/// Exact propagation in a known eigenbasis (all eigenpairs required).
pub fn propagate_spectral(spec: &Spectrum, state: &[Complex64], times: &[f64]) -> Trajectory {
    let n = spec.vectors.nrows();
    let m = spec.len();
    let v = &spec.vectors;
    let re = Mat::from_fn(n, 1, |i, _| state[i].re);
    let im = Mat::from_fn(n, 1, |i, _| state[i].im);
    let cr = v.transpose() * &re;
    let ci = v.transpose() * &im;
    let coeffs: Vec<Complex64> = (0..m)
        .map(|k| Complex64::new(cr.read(k, 0), ci.read(k, 0)))
        .collect();
    let mut states = Vec::with_capacity(times.len());
    for chunk in times.chunks(64) {
        let mut ar = Mat::<f64>::zeros(m, chunk.len());
        let mut ai = Mat::<f64>::zeros(m, chunk.len());
        for (c, &t) in chunk.iter().enumerate() {
            for k in 0..m {
                let z = coeffs[k] * Complex64::from_polar(1.0, -spec.energies[k] * t);
                ar.write(k, c, z.re);
                ai.write(k, c, z.im);
            }
        }
        let pr = v * &ar;
        let pi = v * &ai;
        for c in 0..chunk.len() {
            states.push(
                (0..n)
                    .map(|i| Complex64::new(pr.read(i, c), pi.read(i, c)))
                    .collect(),
            );
        }
    }
    Trajectory {
        times: times.to_vec(),
        states,
    }
}

/// Centre and half-width of the Gershgorin interval of a symmetric matrix.
pub fn spectral_window(m: &SparseMatrix) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for r in 0..m.rows() {
        let mut d = 0.0;
        let mut radius = 0.0;
        for (c, v) in m.row(r) {
            if c == r {
                d = v;
            } else {
                radius += v.abs();
            }
        }
        lo = lo.min(d - radius);
        hi = hi.max(d + radius);
    }
    if m.rows() == 0 {
        return (0.0, 0.0);
    }
    (0.5 * (lo + hi), 0.5 * (hi - lo))
}

/// Crank–Nicolson integrator for `H(t) = Σ_p w_p(t) H_p`.
///
/// Each implicit solve is a Jacobi iteration on the diagonal splitting with
/// a dense LU fallback. The global phase `Σ_p w_p c_p` (the Gershgorin
/// centre of each part) is removed from every step; it does not change any
/// observable or fidelity.
struct CnStepper {
    diags: Vec<Vec<f64>>,
    offdiag: Vec<SparseMatrix>,
    shifts: Vec<f64>,
    dim: usize,
}

const JACOBI_MAX: usize = 200;

impl CnStepper {
    fn new(parts: Vec<SparseMatrix>, shifts: Vec<f64>) -> Self {
        let dim = parts[0].rows();
        let diags = parts.iter().map(|p| p.diag()).collect();
        let offdiag = parts
            .iter()
            .map(|p| {
                SparseMatrix::from_triplets(
                    dim,
                    dim,
                    p.triplets().filter(|&(r, c, _)| r != c).collect(),
                )
            })
            .collect();
        CnStepper {
            diags,
            offdiag,
            shifts,
            dim,
        }
    }

    fn diag_at(&self, w: &[f64]) -> Vec<f64> {
        let shift: f64 = w.iter().zip(&self.shifts).map(|(a, s)| a * s).sum();
        (0..self.dim)
            .map(|i| {
                w.iter()
                    .zip(&self.diags)
                    .map(|(a, d)| a * d[i])
                    .sum::<f64>()
                    - shift
            })
            .collect()
    }

    fn offdiag_apply(
        &self,
        w: &[f64],
        x: &[Complex64],
        out: &mut [Complex64],
        tmp: &mut [Complex64],
    ) {
        out.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0));
        for (a, m) in w.iter().zip(&self.offdiag) {
            if *a == 0.0 {
                continue;
            }
            m.matvec_complex(x, tmp);
            out.iter_mut()
                .zip(tmp.iter())
                .for_each(|(o, t)| *o += t * *a);
        }
    }

    /// One step `ψ ← (1 + iHΔt/2)⁻¹(1 − iHΔt/2)ψ` with `H` fixed by `w`.
    fn step(
        &self,
        psi: &mut Vec<Complex64>,
        w: &[f64],
        dt: f64,
        scratch: &mut [Vec<Complex64>; 3],
    ) -> Result<()> {
        let half = Complex64::new(0.0, 0.5 * dt);
        let d = self.diag_at(w);
        let [ox, tmp, rhs] = scratch;
        self.offdiag_apply(w, psi, ox, tmp);
        for i in 0..self.dim {
            rhs[i] = psi[i] - half * (psi[i] * d[i] + ox[i]);
        }
        let denom: Vec<Complex64> = d
            .iter()
            .map(|&di| Complex64::new(1.0, 0.0) + half * di)
            .collect();
        let mut x: Vec<Complex64> = rhs.iter().zip(&denom).map(|(r, q)| r / q).collect();
        let scale = cnorm(&x).max(1e-300);
        let mut last = f64::INFINITY;
        for _ in 0..JACOBI_MAX {
            self.offdiag_apply(w, &x, ox, tmp);
            let mut delta = 0.0;
            for i in 0..self.dim {
                let nx = (rhs[i] - half * ox[i]) / denom[i];
                delta += (nx - x[i]).norm_sqr();
                x[i] = nx;
            }
            let delta = delta.sqrt();
            if delta <= 1e-15 * scale || (delta <= 1e-13 * scale && delta >= last) {
                *psi = x;
                return Ok(());
            }
            if delta > 1e3 * scale {
                break;
            }
            last = delta;
        }
        *psi = self.dense_solve(w, dt, rhs)?;
        Ok(())
    }

    fn dense_solve(&self, w: &[f64], dt: f64, rhs: &[Complex64]) -> Result<Vec<Complex64>> {
        if self.dim > DENSE_THRESHOLD {
            return Err(Error::SolveFailed(format!(
                "Jacobi iteration stalled at dimension {}",
                self.dim
            )));
        }
        let d = self.diag_at(w);
        let mut a = Mat::<c64>::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            a.write(i, i, c64::new(1.0, 0.5 * dt * d[i]));
        }
        for (wp, m) in w.iter().zip(&self.offdiag) {
            for (r, c, v) in m.triplets() {
                let old = a.read(r, c);
                a.write(r, c, c64::new(old.re, old.im + 0.5 * dt * wp * v));
            }
        }
        let b = Mat::<c64>::from_fn(self.dim, 1, |i, _| c64::new(rhs[i].re, rhs[i].im));
        let x = a.partial_piv_lu().solve(&b);
        let out: Vec<Complex64> = (0..self.dim)
            .map(|i| Complex64::new(x.read(i, 0).re, x.read(i, 0).im))
            .collect();
        if out.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::SolveFailed(
                "dense LU produced non-finite values".into(),
            ));
        }
        Ok(out)
    }

    /// Steps through `times` (ascending, starting at or after 0) with steps
    /// no longer than `dt`, evaluating the weights at each step's left end.
    fn evolve(
        &self,
        state: &[Complex64],
        times: &[f64],
        dt: f64,
        weights: impl Fn(f64) -> Vec<f64>,
    ) -> Result<Trajectory> {
        if !(dt > 0.0) {
            return invalid("time step must be positive");
        }
        if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|&t| t < 0.0) {
            return invalid("sample times must be ascending and non-negative");
        }
        let mut psi = state.to_vec();
        let mut scratch = [
            vec![Complex64::default(); self.dim],
            vec![Complex64::default(); self.dim],
            vec![Complex64::default(); self.dim],
        ];
        let mut now = 0.0;
        let mut states = Vec::with_capacity(times.len());
        for &target in times {
            let span = target - now;
            if span > 0.0 {
                let steps = (span / dt).ceil().max(1.0) as usize;
                let h = span / steps as f64;
                for s in 0..steps {
                    let t = now + s as f64 * h;
                    self.step(&mut psi, &weights(t), h, &mut scratch)?;
                }
                now = target;
            }
            states.push(psi.clone());
        }
        Ok(Trajectory {
            times: times.to_vec(),
            states,
        })
    }
}

/// Interpolation `ℱ(t)` with `ℱ(0) = 0`, `ℱ(T) = 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Schedule {
    /// `½(1 − cos(πt/T))`
    #[default]
    Cosine,
    /// `10s³ − 15s⁴ + 6s⁵`
    Quintic,
}

impl Schedule {
    pub fn at(self, t: f64, duration: f64) -> f64 {
        let s = (t / duration).clamp(0.0, 1.0);
        match self {
            Schedule::Cosine => 0.5 * (1.0 - (PI * s).cos()),
            Schedule::Quintic => s * s * s * (10.0 - 15.0 * s + 6.0 * s * s),
        }
    }
}

/// Pinning Hamiltonian `−Σ_i(α i + μ₀)n_i − μ Σ_{i∈pins} n_i`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PinningSpec {
    pub mu: f64,
    pub mu0: f64,
    pub slope: f64,
}

impl Default for PinningSpec {
    fn default() -> Self {
        PinningSpec {
            mu: 100.0,
            mu0: 1.0,
            slope: 0.1,
        }
    }
}

/// How the kink condition on sites 1 and 2 enters the final Hamiltonian.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum KinkConstraint {
    /// Remove every configuration occupying site 1 or 2.
    #[default]
    Projection,
    /// Add `μ(n₁ + n₂)`.
    Penalty(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrepTarget {
    /// Ground state of `L = 3l`, pattern `1λ1`.
    GroundState,
    /// Localized kink `K_j` of `L = 3l + 1`; only the left edge `j = 1` has
    /// a product-state starting point.
    Kink(usize),
    /// Localized skink `K̄_j`; only `j = 1`.
    Skink(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepProtocol {
    pub l: usize,
    pub lambda: f64,
    pub duration: f64,
    pub schedule: Schedule,
    pub pinning: PinningSpec,
    pub kink_constraint: KinkConstraint,
    /// Step length; `None` uses `step_scale/‖H‖`.
    pub dt: Option<f64>,
    pub step_scale: f64,
    /// Instantaneous gap below which a warning is attached.
    pub gap_warning: f64,
    /// Number of points on which the instantaneous gap is sampled.
    pub gap_samples: usize,
}

impl SweepProtocol {
    pub fn new(l: usize, lambda: f64, duration: f64) -> Self {
        SweepProtocol {
            l,
            lambda,
            duration,
            schedule: Schedule::Cosine,
            pinning: PinningSpec::default(),
            kink_constraint: KinkConstraint::Projection,
            dt: None,
            step_scale: 0.01,
            gap_warning: 1e-2,
            gap_samples: 11,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Preparation {
    /// Target sector basis.
    pub space: HilbertSpace,
    pub state: Vec<Complex64>,
    pub target: Vec<f64>,
    /// `|⟨ψ(T)|target⟩|`.
    pub fidelity: f64,
    /// `|⟨ψ_f|target⟩|` for the ground state `ψ_f` of the final Hamiltonian.
    pub final_ground_fidelity: f64,
    pub min_gap: f64,
    pub steps: usize,
    pub warning: Option<String>,
}

/// Final Hamiltonian, evolution basis and pin sites for one scenario.
pub struct Scenario {
    pub full: HilbertSpace,
    /// Basis the sweep runs in (a subspace of `full` under projection).
    pub space: HilbertSpace,
    pub final_hamiltonian: LinearOperator,
    pub pins: Vec<usize>,
    pub target: Vec<f64>,
}

fn embed(from: &HilbertSpace, to: &HilbertSpace, v: &[Complex64]) -> Vec<Complex64> {
    let mut out = vec![Complex64::default(); to.dim()];
    for (k, &s) in from.states().iter().enumerate() {
        out[to.index(s).expect("subspace")] = v[k];
    }
    out
}

fn restrict_operator(
    op: &LinearOperator,
    full: &HilbertSpace,
    sub: &HilbertSpace,
) -> LinearOperator {
    let keep: Vec<usize> = sub
        .states()
        .iter()
        .map(|&s| full.index(s).expect("subspace"))
        .collect();
    LinearOperator::new(Sector::of(sub), Sector::of(sub), op.matrix.submatrix(&keep))
}

fn diag_sum(space: &HilbertSpace, terms: &[(usize, f64)]) -> Vec<f64> {
    let mut d = vec![0.0; space.dim()];
    for &(i, w) in terms {
        d.iter_mut()
            .zip(occupation_diagonal(space, i))
            .for_each(|(x, n)| *x += w * n);
    }
    d
}

pub fn scenario(protocol: &SweepProtocol, target: PrepTarget) -> Result<Scenario> {
    let l = protocol.l;
    if l == 0 {
        return invalid("need l ≥ 1");
    }
    match target {
        PrepTarget::GroundState => {
            let full = HilbertSpace::open(3 * l, l)?;
            let st = Staggering::new(3 * l, protocol.lambda, 1)?;
            let h = build_hq(&full, &st)?;
            let spec = diagonalize(&h, Count::Lowest(2))?;
            Ok(Scenario {
                space: full.clone(),
                final_hamiltonian: h,
                pins: (0..l).map(|k| 3 * k + 2).collect(),
                target: spec.vector(0),
                full,
            })
        }
        PrepTarget::Kink(1) => {
            let basis = kink_basis(l, protocol.lambda)?;
            let full = basis.space.clone();
            let st = Staggering::new(3 * l + 1, protocol.lambda, 0)?;
            let h = build_hq(&full, &st)?;
            let (space, hf) = match protocol.kink_constraint {
                KinkConstraint::Projection => {
                    let sub = full.restricted(|s| !s.is_occupied(1) && !s.is_occupied(2));
                    let hf = restrict_operator(&h, &full, &sub);
                    (sub, hf)
                }
                KinkConstraint::Penalty(mu) => {
                    let pen = SparseMatrix::diagonal(&diag_sum(&full, &[(1, mu), (2, mu)]));
                    (
                        full.clone(),
                        LinearOperator::new(h.domain, h.codomain, h.matrix.add(&pen)),
                    )
                }
            };
            Ok(Scenario {
                full,
                space,
                final_hamiltonian: hf,
                pins: (1..=l).map(|k| 3 * k).collect(),
                target: basis.kinks[0].clone(),
            })
        }
        PrepTarget::Skink(1) => {
            let basis = kink_basis(l, protocol.lambda)?;
            let sk = basis
                .skinks
                .ok_or_else(|| Error::InvalidArgument("skinks need a gapped band".into()))?;
            let full = sk.space.clone();
            let st = Staggering::new(3 * l + 1, protocol.lambda, 0)?;
            let h = build_hq(&full, &st)?;
            let edge = SparseMatrix::diagonal(&diag_sum(&full, &[(1, -3.0), (2, 3.0), (3, -1.5)]));
            let hf = LinearOperator::new(h.domain, h.codomain, h.matrix.add(&edge));
            let mut pins = vec![1];
            pins.extend((1..=l).map(|k| 3 * k));
            Ok(Scenario {
                space: full.clone(),
                full,
                final_hamiltonian: hf,
                pins,
                target: sk.states[0].clone(),
            })
        }
        PrepTarget::Kink(j) | PrepTarget::Skink(j) => invalid(format!(
            "no product-state starting point for edge index {j}; only j = 1 is supported"
        )),
    }
}

pub fn pinning_diagonal(space: &HilbertSpace, pins: &[usize], p: &PinningSpec) -> Vec<f64> {
    let mut terms: Vec<(usize, f64)> = (1..=space.sites())
        .map(|i| (i, -(p.slope * i as f64 + p.mu0)))
        .collect();
    terms.extend(pins.iter().map(|&i| (i, -p.mu)));
    diag_sum(space, &terms)
}

/// Adiabatic sweep from the pinning Hamiltonian to the scenario's final
/// Hamiltonian, integrated with left-endpoint Crank–Nicolson steps.
pub fn adiabatic_prepare(protocol: &SweepProtocol, target: PrepTarget) -> Result<Preparation> {
    if !(protocol.duration > 0.0) {
        return invalid("sweep duration must be positive");
    }
    let sc = scenario(protocol, target)?;
    let hi = SparseMatrix::diagonal(&pinning_diagonal(&sc.space, &sc.pins, &protocol.pinning));
    let hf = sc.final_hamiltonian.matrix.clone();

    let start = {
        let d = hi.diag();
        let k = (0..d.len())
            .min_by(|&a, &b| d[a].total_cmp(&d[b]))
            .ok_or_else(|| Error::InvalidArgument("empty space".into()))?;
        let mut v = vec![Complex64::default(); d.len()];
        v[k] = Complex64::new(1.0, 0.0);
        v
    };

    let (ci, wi) = spectral_window(&hi);
    let (cf, wf) = spectral_window(&hf);
    let dt = protocol.dt.unwrap_or(protocol.step_scale / wi.max(wf));
    let stepper = CnStepper::new(vec![hi.clone(), hf.clone()], vec![ci, cf]);
    let schedule = protocol.schedule;
    let duration = protocol.duration;
    let traj = stepper.evolve(&start, &[duration], dt, |t| {
        let f = schedule.at(t, duration);
        vec![1.0 - f, f]
    })?;
    let steps = (duration / dt).ceil() as usize;
    let psi = embed(&sc.space, &sc.full, &traj.states[0]);

    let mut min_gap = f64::INFINITY;
    let samples = protocol.gap_samples.max(2);
    for s in 0..samples {
        let f = s as f64 / (samples - 1) as f64;
        let h = hi.combine(1.0 - f, &hf, f);
        let op = LinearOperator::new(Sector::of(&sc.space), Sector::of(&sc.space), h);
        let spec = diagonalize(&op, Count::Lowest(2))?;
        if spec.len() > 1 {
            min_gap = min_gap.min(spec.energies[1] - spec.energies[0]);
        }
    }
    let warning = (min_gap < protocol.gap_warning).then(|| {
        format!(
            "instantaneous gap {min_gap:.3e} below {:.1e}: possible level crossing",
            protocol.gap_warning
        )
    });

    let hf_spec = diagonalize(&sc.final_hamiltonian, Count::Lowest(1))?;
    let ground = embed(
        &sc.space,
        &sc.full,
        &real_to_complex(hf_spec.vector_slice(0)),
    );
    let final_ground_fidelity = rcdot(&sc.target, &ground).norm();
    let fidelity = rcdot(&sc.target, &psi).norm();
    Ok(Preparation {
        space: sc.full,
        state: psi,
        target: sc.target,
        fidelity,
        final_ground_fidelity,
        min_gap,
        steps,
        warning,
    })
}

/// Independent sweeps, e.g. a `(λ, T)` grid.
pub fn prepare_scan(jobs: &[(SweepProtocol, PrepTarget)], exec: Exec) -> Result<Vec<Preparation>> {
    exec.try_map(jobs, |(p, t)| adiabatic_prepare(p, *t))
}

/// Lowest state of `H_Q` with the sites of kink `j` emptied; the
/// reference `|K_j'⟩` for preparation fidelities.
pub fn pinned_kink_state(l: usize, lambda: f64, j: usize) -> Result<(HilbertSpace, Vec<f64>)> {
    if j == 0 || j > l + 1 {
        return invalid(format!("kink index {j} outside 1..={}", l + 1));
    }
    let sites = 3 * l + 1;
    let full = HilbertSpace::open(sites, l)?;
    let empty: Vec<usize> = if j == 1 {
        vec![1, 2]
    } else if j == l + 1 {
        vec![sites - 1, sites]
    } else {
        vec![3 * (j - 1), 3 * (j - 1) + 1, 3 * (j - 1) + 2]
    };
    let sub = full.restricted(|s| empty.iter().all(|&i| !s.is_occupied(i)));
    let h = build_hq(&full, &Staggering::new(sites, lambda, 0)?)?;
    let spec = diagonalize(&restrict_operator(&h, &full, &sub), Count::Lowest(1))?;
    let v = embed(&sub, &full, &real_to_complex(spec.vector_slice(0)));
    Ok((full, v.into_iter().map(|z| z.re).collect()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RydbergVariant {
    Full,
    TruncatedNnn,
    HqReference,
}

impl RydbergVariant {
    pub fn name(self) -> &'static str {
        match self {
            RydbergVariant::Full => "full",
            RydbergVariant::TruncatedNnn => "truncated_nnn",
            RydbergVariant::HqReference => "hq_reference",
        }
    }
}

/// Detector used on the Rydberg runs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Detector {
    pub kind: ObservableKind,
    pub coeffs: (f64, f64),
}

/// Quench of a fermion state under the Rydberg Hamiltonian and `J·H_Q`.
///
/// `times` are in units of `1/J`. Every variant reports `dn` (the detector),
/// `rydberg` = `(1/l)Σ nʳ_i`, `rydberg_per_atom` and `ground_pairs` =
/// `(1/l)Σ n^g_i n^g_{i+1}`, with `l = ⌊L/3⌋`.
pub fn rydberg_quench(
    params: &RydbergParams,
    space: &HilbertSpace,
    init: &[f64],
    times: &[f64],
    variants: &[RydbergVariant],
    detector: Detector,
) -> Result<BTreeMap<RydbergVariant, QuenchSeries>> {
    let sites = space.sites();
    if !space.is_constrained() || init.len() != space.dim() {
        return invalid("initial state must live on the constrained basis");
    }
    let l = (sites / 3).max(1) as f64;
    let atoms = space.particles().max(1) as f64;
    let mut out = BTreeMap::new();
    for &variant in variants {
        let series = match variant {
            RydbergVariant::HqReference => {
                let h = build_hq(space, &Staggering::uniform(sites))?;
                let traj = propagate(&real_to_complex(init), &h, times, Method::Eigen)?;
                let dn = observable_diagonal(detector.kind, space, detector.coeffs)?;
                let zero = vec![0.0; space.dim()];
                traj.series(
                    None,
                    &[
                        ("dn", &dn),
                        ("rydberg", &zero),
                        ("rydberg_per_atom", &zero),
                        ("ground_pairs", &zero),
                    ],
                )
            }
            RydbergVariant::Full | RydbergVariant::TruncatedNnn => {
                let mut p = params.clone();
                if variant == RydbergVariant::TruncatedNnn {
                    p.range_cut = Some(2);
                }
                let ry = RydbergSpace::enumerate(sites, space.particles())?;
                if ry.dim() > DENSE_THRESHOLD {
                    return Err(Error::DimensionLimit {
                        dim: ry.dim(),
                        limit: DENSE_THRESHOLD,
                    });
                }
                let h = build_rydberg(&ry, &p)?;
                let psi0 = ry.embed_ground(space, &real_to_complex(init))?;
                let physical: Vec<f64> = times.iter().map(|t| t / p.hopping).collect();
                let mut traj = propagate(&psi0, &h, &physical, Method::Eigen)?;
                traj.times = times.to_vec();
                let dn = rydberg_observable_diagonal(detector.kind, &ry, detector.coeffs)?;
                let pop = rydberg_population_diagonal(&ry);
                let ryd: Vec<f64> = pop.iter().map(|x| x / l).collect();
                let per_atom: Vec<f64> = pop.iter().map(|x| x / atoms).collect();
                let pairs: Vec<f64> = ground_pair_diagonal(&ry).iter().map(|x| x / l).collect();
                traj.series(
                    None,
                    &[
                        ("dn", &dn),
                        ("rydberg", &ryd),
                        ("rydberg_per_atom", &per_atom),
                        ("ground_pairs", &pairs),
                    ],
                )
            }
        };
        out.insert(variant, series);
    }
    Ok(out)
}

/// Ground state of the final kink (or skink) Hamiltonian at `(l, λ)`.
pub fn final_ground_state(
    l: usize,
    lambda: f64,
    target: PrepTarget,
) -> Result<(HilbertSpace, Vec<f64>)> {
    let protocol = SweepProtocol::new(l, lambda, 1.0);
    let sc = scenario(&protocol, target)?;
    let spec = diagonalize(&sc.final_hamiltonian, Count::Lowest(1))?;
    let mut v: Vec<f64> = embed(&sc.space, &sc.full, &real_to_complex(spec.vector_slice(0)))
        .iter()
        .map(|z| z.re)
        .collect();
    if dot(&v, &sc.target) < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    normalize(&mut v);
    Ok((sc.full, v))
}
