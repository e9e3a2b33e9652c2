//! Exact diagonalization, supersymmetric pairing diagnostics, one-kink band
//! extraction and ground-state density profiles.

use faer::Mat;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::exec::Exec;
use crate::hilbert::{Boundary, HilbertSpace};
use crate::kinkdyn::{bare_kinks, KinkBand};
use crate::linalg::{column, dot, eigh, lanczos_lowest, LanczosOptions};
use crate::operators::{
    build_hq, build_local_energy, occupation_diagonal, LinearOperator, Sector, Staggering,
};

/// Largest dimension handled by the dense solver.
pub const DENSE_THRESHOLD: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Count {
    All,
    Lowest(usize),
}

#[derive(Clone, Debug)]
pub struct Spectrum {
    pub energies: Vec<f64>,
    /// Column `k` is the eigenvector of `energies[k]`.
    pub vectors: Mat<f64>,
    pub sector: Sector,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn vector(&self, k: usize) -> Vec<f64> {
        column(&self.vectors, k)
    }

    pub fn vector_slice(&self, k: usize) -> &[f64] {
        self.vectors.col_as_slice(k)
    }

    /// Largest `‖Hv − Ev‖` over the stored pairs.
    pub fn max_residual(&self, op: &LinearOperator) -> f64 {
        (0..self.len())
            .map(|k| {
                let v = self.vector_slice(k);
                let hv = op.apply(v);
                hv.iter()
                    .zip(v)
                    .map(|(a, b)| (a - self.energies[k] * b).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// Largest deviation of `VᵀV` from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        let g = self.vectors.transpose() * &self.vectors;
        let mut worst: f64 = 0.0;
        for i in 0..g.nrows() {
            for j in 0..g.ncols() {
                let want = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g.read(i, j) - want).abs());
            }
        }
        worst
    }
}

#[derive(Clone, Debug)]
pub struct SolverOptions {
    pub dense_threshold: usize,
    pub lanczos: LanczosOptions,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            dense_threshold: DENSE_THRESHOLD,
            lanczos: LanczosOptions::default(),
        }
    }
}

pub fn diagonalize(op: &LinearOperator, count: Count) -> Result<Spectrum> {
    diagonalize_with(op, count, &SolverOptions::default())
}

pub fn diagonalize_all(op: &LinearOperator) -> Result<Spectrum> {
    diagonalize(op, Count::All)
}

pub fn diagonalize_with(
    op: &LinearOperator,
    count: Count,
    opts: &SolverOptions,
) -> Result<Spectrum> {
    let asym = op.max_asymmetry();
    let scale = op.matrix.max_abs().max(1.0);
    if asym > 1e-12 * scale {
        return Err(Error::NotHermitian(asym));
    }
    let n = op.dim();
    let wanted = match count {
        Count::All => n,
        Count::Lowest(k) => k.min(n),
    };
    if n <= opts.dense_threshold {
        let (e, v) = eigh(&op.matrix.to_dense());
        let vectors = Mat::from_fn(n, wanted, |i, j| v.read(i, j));
        return Ok(Spectrum {
            energies: e[..wanted].to_vec(),
            vectors,
            sector: op.domain,
        });
    }
    if count == Count::All {
        return Err(Error::DimensionLimit {
            dim: n,
            limit: opts.dense_threshold,
        });
    }
    let (e, vs) = lanczos_lowest(&op.matrix, wanted, &opts.lanczos)?;
    let vectors = Mat::from_fn(n, wanted, |i, j| vs[j][i]);
    Ok(Spectrum {
        energies: e,
        vectors,
        sector: op.domain,
    })
}

fn kink_geometry(space: &HilbertSpace) -> Result<usize> {
    let sites = space.sites();
    if sites % 3 != 1
        || space.particles() != (sites - 1) / 3
        || space.boundary() != Boundary::Open
        || sites < 4
    {
        return invalid("kink band needs the l-particle sector of an open chain with L = 3l + 1");
    }
    Ok(space.particles())
}

/// Indices of the `want` candidates with the largest weight in `reference`.
fn track_step(reference: &[Vec<f64>], spec: &Spectrum, want: usize) -> (Vec<usize>, f64) {
    let window = spec.len();
    let mut weights: Vec<(usize, f64)> = (0..window)
        .map(|c| {
            let v = spec.vector_slice(c);
            (c, reference.iter().map(|r| dot(r, v).powi(2)).sum::<f64>())
        })
        .collect();
    weights.sort_by(|a, b| b.1.total_cmp(&a.1));
    let mut picked: Vec<usize> = weights[..want].iter().map(|w| w.0).collect();
    picked.sort_unstable();
    (picked, weights[want - 1].1)
}

fn window_spectrum(space: &HilbertSpace, lambda: f64, window: usize) -> Result<Spectrum> {
    let st = Staggering::new(space.sites(), lambda, 0)?;
    diagonalize(&build_hq(space, &st)?, Count::Lowest(window))
}

const TRACK_STEP: f64 = 0.02;
const TRACK_MIN_WEIGHT: f64 = 0.5;

/// Identifies the `l+1` one-kink states in `spec`, the spectrum of `H_Q` on
/// `space` at staggering `lambda` (pattern `11λ`).
///
/// The band is followed by continuation from `λ = 0`, where it is the sine
/// transform of the bare kinks. At each step the `l+1` eigenvectors with the
/// largest weight in the previous band are kept; the step is halved when the
/// smallest kept weight drops below one half. Multi-kink levels that cross
/// into the low-energy window therefore never enter the band.
pub fn extract_kink_band(spec: &Spectrum, space: &HilbertSpace, lambda: f64) -> Result<KinkBand> {
    let l = kink_geometry(space)?;
    let want = l + 1;
    if spec.sector != Sector::of(space) {
        return Err(Error::SectorMismatch(
            "spectrum belongs to a different sector".into(),
        ));
    }
    if spec.len() < want {
        return Err(Error::BandNotSeparated(format!(
            "spectrum holds {} pairs, band needs {want}",
            spec.len()
        )));
    }
    let bare = bare_kinks(space)?;
    let sine = |k: usize, j: usize| {
        let kt = std::f64::consts::PI * k as f64 / (l + 2) as f64;
        (2.0 / (l + 2) as f64).sqrt() * (kt * j as f64).sin()
    };
    let mut reference: Vec<Vec<f64>> = (1..=want)
        .map(|k| {
            let mut v = vec![0.0; space.dim()];
            for (j, b) in bare.iter().enumerate() {
                let c = sine(k, j + 1);
                v.iter_mut().zip(b).for_each(|(x, y)| *x += c * y);
            }
            v
        })
        .collect();

    let (energies, mut vectors) = if lambda == 0.0 {
        let (picked, min_w) = track_step(&reference, spec, want);
        if min_w < 1.0 - 1e-8
            || picked
                .iter()
                .any(|&c| (spec.energies[c] - 1.0).abs() > 1e-9)
        {
            return Err(Error::BandNotSeparated(
                "flat band at E = 1 not found".into(),
            ));
        }
        (vec![1.0; want], reference.clone())
    } else {
        let window = (3 * want).min(space.dim());
        let mut at = 0.0;
        let mut step = TRACK_STEP.min(lambda);
        while lambda - at > 1e-12 {
            let next = (at + step).min(lambda);
            let s = if (next - lambda).abs() < 1e-12 {
                spec.clone()
            } else {
                window_spectrum(space, next, window)?
            };
            let (picked, min_w) = track_step(&reference, &s, want);
            if min_w < TRACK_MIN_WEIGHT {
                if step < 1e-4 {
                    return Err(Error::BandNotSeparated(format!(
                        "continuation lost the band near λ = {next:.4} (weight {min_w:.3})"
                    )));
                }
                step *= 0.5;
                continue;
            }
            reference = picked.iter().map(|&c| s.vector(c)).collect();
            at = next;
            if at >= lambda - 1e-12 {
                let e: Vec<f64> = picked.iter().map(|&c| s.energies[c]).collect();
                let mut order: Vec<usize> = (0..want).collect();
                order.sort_by(|&a, &b| e[a].total_cmp(&e[b]));
                let energies = order.iter().map(|&k| e[k]).collect();
                let vecs = order.iter().map(|&k| reference[k].clone()).collect();
                return finish(space, l, lambda, energies, vecs, &bare);
            }
            step = (step * 2.0).min(TRACK_STEP);
        }
        unreachable!("continuation terminates at the target staggering")
    };
    fix_phases(l, &mut vectors, &bare);
    Ok(KinkBand {
        l,
        lambda,
        space: space.clone(),
        energies,
        vectors,
    })
}

fn finish(
    space: &HilbertSpace,
    l: usize,
    lambda: f64,
    energies: Vec<f64>,
    mut vectors: Vec<Vec<f64>>,
    bare: &[Vec<f64>],
) -> Result<KinkBand> {
    fix_phases(l, &mut vectors, bare);
    Ok(KinkBand {
        l,
        lambda,
        space: space.clone(),
        energies,
        vectors,
    })
}

/// Sign convention: `Σ_j sin(k̃ j)⟨bare K_j|v_k⟩ > 0`.
fn fix_phases(l: usize, vectors: &mut [Vec<f64>], bare: &[Vec<f64>]) {
    for (k, v) in vectors.iter_mut().enumerate() {
        let kt = std::f64::consts::PI * (k + 1) as f64 / (l + 2) as f64;
        let proj: f64 = bare
            .iter()
            .enumerate()
            .map(|(j, b)| (kt * (j + 1) as f64).sin() * dot(b, v))
            .sum();
        if proj < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
}

/// Convenience: full band extraction at `(l, λ)`.
pub fn kink_band(l: usize, lambda: f64) -> Result<KinkBand> {
    let space = HilbertSpace::open(3 * l + 1, l)?;
    let st = Staggering::new(3 * l + 1, lambda, 0)?;
    let window = (3 * (l + 1)).min(space.dim());
    let spec = diagonalize(&build_hq(&space, &st)?, Count::Lowest(window))?;
    extract_kink_band(&spec, &space, lambda)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DensityProfile {
    /// Site of `site_densities[0]`.
    pub first_site: usize,
    pub site_densities: Vec<f64>,
    pub energy_densities: Option<Vec<f64>>,
}

impl DensityProfile {
    pub fn site(&self, i: usize) -> f64 {
        self.site_densities[i - self.first_site]
    }

    pub fn total(&self) -> f64 {
        self.site_densities.iter().sum()
    }
}

/// `⟨n_i⟩` and `⟨h_i⟩` of a real state.
pub fn profile_of(space: &HilbertSpace, stagger: &Staggering, v: &[f64]) -> Result<DensityProfile> {
    let sites = space.sites();
    let n = (1..=sites)
        .map(|i| {
            occupation_diagonal(space, i)
                .iter()
                .zip(v)
                .map(|(d, a)| d * a * a)
                .sum()
        })
        .collect();
    let h = (1..=sites)
        .map(|i| Ok(build_local_energy(space, stagger, i)?.expectation(v)))
        .collect::<Result<Vec<f64>>>()?;
    Ok(DensityProfile {
        first_site: 1,
        site_densities: n,
        energy_densities: Some(h),
    })
}

/// Ground state of the open chain `L = 3l` with pattern `1λ1`.
pub fn ground_state_densities(l: usize, lambda: f64) -> Result<DensityProfile> {
    if l == 0 {
        return invalid("need at least one particle");
    }
    let space = HilbertSpace::open(3 * l, l)?;
    let st = Staggering::new(3 * l, lambda, 1)?;
    let h = build_hq(&space, &st)?;
    let spec = diagonalize(&h, Count::Lowest(2))?;
    if spec.len() > 1 {
        let gap = spec.energies[1] - spec.energies[0];
        if gap < 1e-8 {
            return Err(Error::DegenerateGroundState(gap));
        }
    }
    profile_of(&space, &st, spec.vector_slice(0))
}

/// Scaling-form densities at criticality for `L = 3l`, sites `2..=L`.
pub fn cft_densities(sites: usize, amplitude: f64) -> Result<DensityProfile> {
    if sites % 3 != 0 || sites == 0 {
        return invalid("scaling densities need L divisible by 3");
    }
    let lp = (sites + 3) as f64;
    let pi = std::f64::consts::PI;
    let pre = (pi / (2.0 * lp)).cbrt();
    let s = |x: f64| pre * (pi * x / (3.0 * lp)).sin();
    let c = |x: f64| pre * (pi * x / (3.0 * lp)).cos();
    let env = |x: f64| (pi * x / lp).sin().cbrt();
    let k = 2.0 * amplitude / 3.0;
    let densities = (2..=sites)
        .map(|i| {
            let x = i as f64;
            match i % 3 {
                1 => 1.0 / 3.0 - k * s(x) / env(x),
                2 => 1.0 / 3.0 + k * c(x - lp / 2.0) / env(x),
                _ => 1.0 / 3.0 + k * s(x - lp) / env(x),
            }
        })
        .collect();
    Ok(DensityProfile {
        first_site: 2,
        site_densities: densities,
        energy_densities: None,
    })
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct PairingReport {
    /// `(n, E_n, E_{n+1})`: a level in sector `n` and its partner in `n + 1`.
    pub pairs: Vec<(usize, f64, f64)>,
    /// `(n, count)` of zero modes per sector.
    pub zero_modes: Vec<(usize, usize)>,
    /// Nonzero levels without a partner.
    pub unmatched: Vec<(usize, f64)>,
    pub max_mismatch: f64,
}

impl PairingReport {
    pub fn total_zero_modes(&self) -> usize {
        self.zero_modes.iter().map(|z| z.1).sum()
    }
}

/// Full `H_Q` spectrum of every nonempty particle-number sector.
pub fn sector_energies(
    sites: usize,
    boundary: Boundary,
    stagger: &Staggering,
    exec: Exec,
) -> Result<Vec<(usize, Vec<f64>)>> {
    let mut spaces = Vec::new();
    for n in 0..=sites {
        let space = HilbertSpace::enumerate(sites, n, boundary, true)?;
        if space.dim() == 0 {
            break;
        }
        spaces.push(space);
    }
    exec.try_map(&spaces, |space| {
        Ok((
            space.particles(),
            diagonalize_all(&build_hq(space, stagger)?)?.energies,
        ))
    })
}

/// Matches every nonzero level of every sector to a partner one particle
/// up or down. Levels below `1e-9` are counted as zero modes.
pub fn susy_pairing_report(
    sites: usize,
    boundary: Boundary,
    stagger: &Staggering,
    tol: f64,
) -> Result<PairingReport> {
    let zero_tol = 1e-9;
    let mut report = PairingReport::default();
    let mut carried: Vec<f64> = Vec::new();
    let mut last = 0;
    for (n, energies) in sector_energies(sites, boundary, stagger, Exec::default())? {
        last = n;
        let zeros = energies.iter().filter(|e| e.abs() < zero_tol).count();
        report.zero_modes.push((n, zeros));
        let mut pool: Vec<f64> = energies
            .into_iter()
            .filter(|e| e.abs() >= zero_tol)
            .collect();
        // levels inherited from sector n − 1 must reappear here
        for e in carried.drain(..) {
            let best = pool
                .iter()
                .enumerate()
                .min_by(|a, b| (a.1 - e).abs().total_cmp(&(b.1 - e).abs()));
            match best {
                Some((k, &p)) if (p - e).abs() <= tol => {
                    report.max_mismatch = report.max_mismatch.max((p - e).abs());
                    report.pairs.push((n - 1, e, p));
                    pool.swap_remove(k);
                }
                _ => report.unmatched.push((n - 1, e)),
            }
        }
        carried = pool;
    }
    report
        .unmatched
        .extend(carried.into_iter().map(|e| (last, e)));
    Ok(report)
}
