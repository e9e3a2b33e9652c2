//! Sparse operators on the constrained fermion and Rydberg bases.
//!
//! All matrices are real. The supercharge maps the `n`-particle sector to
//! `n+1`; Hamiltonians act within one sector.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::hilbert::{bit, Boundary, HilbertSpace, OccupationState, RydbergSpace, RydbergState};
use crate::kinkdyn::KinkBasis;
use crate::linalg::{dot, SparseMatrix};

/// Period-3 coupling pattern `λ_i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Staggering {
    pub sites: usize,
    pub pattern: [f64; 3],
    /// Pattern slot taken by site 1.
    pub offset: usize,
    pub lambda: f64,
}

impl Staggering {
    /// Pattern `(1, 1, λ)` with site 1 in slot `offset`: 0 gives `11λ`,
    /// 1 gives `1λ1`, 2 gives `λ11`.
    pub fn new(sites: usize, lambda: f64, offset: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return invalid(format!("lambda {lambda} outside [0, 1]"));
        }
        if offset > 2 {
            return invalid(format!("pattern offset {offset} outside 0..=2"));
        }
        Ok(Staggering {
            sites,
            pattern: [1.0, 1.0, lambda],
            offset,
            lambda,
        })
    }

    pub fn uniform(sites: usize) -> Self {
        Staggering {
            sites,
            pattern: [1.0; 3],
            offset: 0,
            lambda: 1.0,
        }
    }

    pub fn coupling(&self, i: usize) -> f64 {
        self.pattern[(i - 1 + self.offset) % 3]
    }

    pub fn couplings(&self) -> Vec<f64> {
        (1..=self.sites).map(|i| self.coupling(i)).collect()
    }
}

/// Shape tag of one side of an operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sector {
    pub sites: usize,
    pub particles: usize,
    pub dim: usize,
}

impl Sector {
    pub fn of(space: &HilbertSpace) -> Self {
        Sector {
            sites: space.sites(),
            particles: space.particles(),
            dim: space.dim(),
        }
    }

    pub fn of_rydberg(space: &RydbergSpace) -> Self {
        Sector {
            sites: space.sites(),
            particles: space.atoms(),
            dim: space.dim(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LinearOperator {
    pub domain: Sector,
    pub codomain: Sector,
    pub matrix: SparseMatrix,
}

impl LinearOperator {
    pub fn new(domain: Sector, codomain: Sector, matrix: SparseMatrix) -> Self {
        assert_eq!((matrix.rows(), matrix.cols()), (codomain.dim, domain.dim));
        LinearOperator {
            domain,
            codomain,
            matrix,
        }
    }

    fn square(sector: Sector, matrix: SparseMatrix) -> Self {
        Self::new(sector, sector, matrix)
    }

    pub fn dim(&self) -> usize {
        self.domain.dim
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.matrix.apply(x)
    }

    pub fn transpose(&self) -> Self {
        Self::new(self.codomain, self.domain, self.matrix.transpose())
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &LinearOperator) -> Result<Self> {
        if other.codomain != self.domain {
            return Err(Error::SectorMismatch(format!(
                "{:?} then {:?}",
                other.codomain, self.domain
            )));
        }
        Ok(Self::new(
            other.domain,
            self.codomain,
            self.matrix.matmul(&other.matrix),
        ))
    }

    pub fn combine(&self, a: f64, other: &LinearOperator, b: f64) -> Result<Self> {
        if self.domain != other.domain || self.codomain != other.codomain {
            return Err(Error::SectorMismatch(
                "operands act on different sectors".into(),
            ));
        }
        Ok(Self::new(
            self.domain,
            self.codomain,
            self.matrix.combine(a, &other.matrix, b),
        ))
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self::new(self.domain, self.codomain, self.matrix.scaled(a))
    }

    pub fn expectation(&self, v: &[f64]) -> f64 {
        dot(v, &self.apply(v))
    }

    pub fn max_asymmetry(&self) -> f64 {
        if self.domain != self.codomain {
            return f64::INFINITY;
        }
        self.matrix.max_asymmetry()
    }
}

fn check_pair(from: &HilbertSpace, to: &HilbertSpace, stagger: &Staggering) -> Result<()> {
    if !from.same_lattice(to) {
        return Err(Error::SectorMismatch(
            "sectors differ in L, boundary or constraint".into(),
        ));
    }
    if !from.is_constrained() {
        return invalid("supercharge needs the constrained basis");
    }
    if to.particles() != from.particles() + 1 {
        return Err(Error::SectorMismatch(format!(
            "supercharge maps {} to {} particles, got {}",
            from.particles(),
            from.particles() + 1,
            to.particles()
        )));
    }
    if stagger.sites != from.sites() {
        return Err(Error::SectorMismatch(format!(
            "staggering for {} sites on {}",
            stagger.sites,
            from.sites()
        )));
    }
    Ok(())
}

/// Sites neighbouring `i` are all empty in `s`.
fn neighbours_empty(s: OccupationState, i: usize, sites: usize, boundary: Boundary) -> bool {
    let left = if i > 1 {
        Some(i - 1)
    } else if boundary == Boundary::Periodic && sites > 1 {
        Some(sites)
    } else {
        None
    };
    let right = if i < sites {
        Some(i + 1)
    } else if boundary == Boundary::Periodic && sites > 1 {
        Some(1)
    } else {
        None
    };
    left.map_or(true, |j| !s.is_occupied(j)) && right.map_or(true, |j| !s.is_occupied(j))
}

fn supercharge_terms(
    from: &HilbertSpace,
    to: &HilbertSpace,
    stagger: &Staggering,
    only_site: Option<usize>,
) -> Result<LinearOperator> {
    check_pair(from, to, stagger)?;
    let sites = from.sites();
    let mut t = Vec::new();
    for (col, &s) in from.states().iter().enumerate() {
        for i in 1..=sites {
            if only_site.is_some_and(|o| o != i) {
                continue;
            }
            let lam = stagger.coupling(i);
            if lam == 0.0 || !neighbours_empty(s, i, sites, from.boundary()) {
                continue;
            }
            if let Some((target, sign)) = s.apply_c_dag(i) {
                let row = to
                    .index(target)
                    .expect("exclusion preserved by the projector");
                let parity = if i % 2 == 0 { 1.0 } else { -1.0 };
                t.push((row, col, parity * lam * sign));
            }
        }
    }
    Ok(LinearOperator::new(
        Sector::of(from),
        Sector::of(to),
        SparseMatrix::from_triplets(to.dim(), from.dim(), t),
    ))
}

/// `Q` from `from` (n particles) into `to` (n+1 particles).
pub fn supercharge_between(
    from: &HilbertSpace,
    to: &HilbertSpace,
    stagger: &Staggering,
) -> Result<LinearOperator> {
    supercharge_terms(from, to, stagger, None)
}

/// `Q` on the `n`-particle sector; the codomain is the `n+1` sector.
pub fn build_supercharge(space: &HilbertSpace, stagger: &Staggering) -> Result<LinearOperator> {
    if space.particles() >= space.sites() {
        let to = Sector {
            sites: space.sites(),
            particles: space.particles() + 1,
            dim: 0,
        };
        return Ok(LinearOperator::new(
            Sector::of(space),
            to,
            SparseMatrix::zeros(0, space.dim()),
        ));
    }
    supercharge_between(space, &space.sector(space.particles() + 1)?, stagger)
}

/// `H_Q = Q†Q + QQ†` restricted to one sector.
pub fn build_hq(space: &HilbertSpace, stagger: &Staggering) -> Result<LinearOperator> {
    if !space.is_constrained() {
        return invalid("H_Q is defined on the constrained basis");
    }
    let q_up = build_supercharge(space, stagger)?;
    let mut h = q_up.transpose().matrix.matmul(&q_up.matrix);
    if space.particles() > 0 {
        let below = space.sector(space.particles() - 1)?;
        let q_down = supercharge_between(&below, space, stagger)?;
        h = h.add(&q_down.matrix.matmul(&q_down.transpose().matrix));
    }
    Ok(LinearOperator::square(Sector::of(space), h))
}

/// Local energy density `h_i`; summing over all sites gives `H_Q`.
pub fn build_local_energy(
    space: &HilbertSpace,
    stagger: &Staggering,
    site: usize,
) -> Result<LinearOperator> {
    if site == 0 || site > space.sites() {
        return invalid(format!("site {site} outside 1..={}", space.sites()));
    }
    if !space.is_constrained() {
        return invalid("local energy is defined on the constrained basis");
    }
    let n = space.particles();
    let sym =
        |a: &SparseMatrix, b: &SparseMatrix| a.transpose().matmul(b).add(&b.transpose().matmul(a));
    let mut h = SparseMatrix::zeros(space.dim(), space.dim());
    if n < space.sites() {
        let up = space.sector(n + 1)?;
        let q = supercharge_terms(space, &up, stagger, None)?;
        let qi = supercharge_terms(space, &up, stagger, Some(site))?;
        h = h.add(&sym(&qi.matrix, &q.matrix));
    }
    if n > 0 {
        let down = space.sector(n - 1)?;
        let q = supercharge_terms(&down, space, stagger, None)?.transpose();
        let qi = supercharge_terms(&down, space, stagger, Some(site))?.transpose();
        h = h.add(&sym(&qi.matrix, &q.matrix));
    }
    Ok(LinearOperator::square(Sector::of(space), h.scaled(0.5)))
}

/// Diagonal of `n_i` in the occupation basis.
pub fn occupation_diagonal(space: &HilbertSpace, site: usize) -> Vec<f64> {
    space
        .states()
        .iter()
        .map(|s| if s.is_occupied(site) { 1.0 } else { 0.0 })
        .collect()
}

pub fn number_operator(space: &HilbertSpace, site: usize) -> Result<LinearOperator> {
    if site == 0 || site > space.sites() {
        return invalid(format!("site {site} outside 1..={}", space.sites()));
    }
    Ok(LinearOperator::square(
        Sector::of(space),
        SparseMatrix::diagonal(&occupation_diagonal(space, site)),
    ))
}

/// Kink detectors at the right edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObservableKind {
    /// `α[1 − β(n_{L−1} + n_L)]`
    Dn,
    /// `α[1 − β(n_{L−2} + n_{L−1} + n_L)]`
    Dn3,
    /// `−α[1 − β(n_{L−2} + n_{L−1} + n_L)]`, for skinks.
    DnBar,
}

impl ObservableKind {
    pub fn name(self) -> &'static str {
        match self {
            ObservableKind::Dn => "dn",
            ObservableKind::Dn3 => "dn3",
            ObservableKind::DnBar => "dnbar",
        }
    }

    fn window(self) -> usize {
        match self {
            ObservableKind::Dn => 2,
            ObservableKind::Dn3 | ObservableKind::DnBar => 3,
        }
    }

    fn sign(self) -> f64 {
        match self {
            ObservableKind::DnBar => -1.0,
            _ => 1.0,
        }
    }

    /// Edge sites entering the observable.
    pub fn sites(self, sites: usize) -> std::ops::RangeInclusive<usize> {
        (sites + 1 - self.window())..=sites
    }

    /// Observable value for a given edge occupation count.
    pub fn value(self, coeffs: (f64, f64), edge_count: f64) -> f64 {
        let (alpha, beta) = coeffs;
        self.sign() * alpha * (1.0 - beta * edge_count)
    }
}

impl std::str::FromStr for ObservableKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dn" => Ok(ObservableKind::Dn),
            "dn3" => Ok(ObservableKind::Dn3),
            "dnbar" => Ok(ObservableKind::DnBar),
            other => invalid(format!("unknown observable '{other}'")),
        }
    }
}

fn edge_counts(kind: ObservableKind, sites: usize, states: impl Iterator<Item = u32>) -> Vec<f64> {
    let mask = kind.sites(sites).fold(0u32, |m, i| m | bit(i));
    states.map(|b| (b & mask).count_ones() as f64).collect()
}

pub fn observable_diagonal(
    kind: ObservableKind,
    space: &HilbertSpace,
    coeffs: (f64, f64),
) -> Result<Vec<f64>> {
    if space.sites() < 3 {
        return invalid("edge observables need at least 3 sites");
    }
    Ok(
        edge_counts(kind, space.sites(), space.states().iter().map(|s| s.0))
            .into_iter()
            .map(|c| kind.value(coeffs, c))
            .collect(),
    )
}

pub fn build_observable(
    kind: ObservableKind,
    space: &HilbertSpace,
    coeffs: (f64, f64),
) -> Result<LinearOperator> {
    let d = observable_diagonal(kind, space, coeffs)?;
    Ok(LinearOperator::square(
        Sector::of(space),
        SparseMatrix::diagonal(&d),
    ))
}

/// Same observable read out from atom positions in the Rydberg basis.
pub fn rydberg_observable_diagonal(
    kind: ObservableKind,
    space: &RydbergSpace,
    coeffs: (f64, f64),
) -> Result<Vec<f64>> {
    if space.sites() < 3 {
        return invalid("edge observables need at least 3 sites");
    }
    Ok(edge_counts(
        kind,
        space.sites(),
        space.states().iter().map(|s| s.positions),
    )
    .into_iter()
    .map(|c| kind.value(coeffs, c))
    .collect())
}

/// Coefficients making the observable vanish on the first localized state
/// and equal one on the last. `first` and `last` are expectation values of
/// the summed edge occupation.
pub fn solve_observable_coeffs(kind: ObservableKind, first: f64, last: f64) -> Result<(f64, f64)> {
    // sign·(a − b·S₁) = 0 and sign·(a − b·S₂) = 1 with a = α, b = αβ
    let gap = first - last;
    if gap.abs() < 1e-12 {
        return Err(Error::Unfittable(format!(
            "edge occupations coincide ({first} vs {last})"
        )));
    }
    let b = kind.sign() / gap;
    let a = b * first;
    if a.abs() < 1e-14 {
        return Err(Error::Unfittable("vanishing amplitude".into()));
    }
    Ok((a, b / a))
}

/// Fits `(α, β)` on a kink basis: kinks for `Dn`/`Dn3`, skinks for `DnBar`.
pub fn fit_observable_coeffs(kind: ObservableKind, basis: &KinkBasis) -> Result<(f64, f64)> {
    let (space, states) = match kind {
        ObservableKind::DnBar => {
            let sk = basis
                .skinks
                .as_ref()
                .ok_or_else(|| Error::Unfittable("kink basis carries no skinks".into()))?;
            (&sk.space, &sk.states)
        }
        _ => (&basis.space, &basis.kinks),
    };
    let counts = edge_counts(kind, space.sites(), space.states().iter().map(|s| s.0));
    let expect = |v: &[f64]| v.iter().zip(&counts).map(|(a, c)| a * a * c).sum::<f64>();
    let first = expect(&states[0]);
    let last = expect(states.last().expect("non-empty band"));
    solve_observable_coeffs(kind, first, last)
}

/// Rydberg Hamiltonian parameters, all energies in one unit system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RydbergParams {
    pub hopping: f64,
    pub mu: Vec<f64>,
    pub rabi: Vec<f64>,
    pub detuning: f64,
    pub c6: f64,
    pub spacing: f64,
    /// Interaction range in lattice units; `None` keeps every pair.
    pub range_cut: Option<usize>,
    /// Let atoms in `r` hop as well.
    pub rydberg_hopping: bool,
}

impl RydbergParams {
    pub fn validate(&self, sites: usize) -> Result<()> {
        if !(self.hopping > 0.0) {
            return invalid("hopping must be positive");
        }
        if !(self.spacing > 0.0) {
            return invalid("lattice spacing must be positive");
        }
        if self.range_cut == Some(0) {
            return invalid("range cut must be at least 1");
        }
        if self.mu.len() != sites || self.rabi.len() != sites {
            return invalid(format!("per-site vectors must have length {sites}"));
        }
        Ok(())
    }

    pub fn pair_potential(&self, distance: usize) -> f64 {
        if self.range_cut.is_some_and(|c| distance > c) {
            return 0.0;
        }
        self.c6 / (self.spacing * distance as f64).powi(6)
    }
}

pub fn build_rydberg(space: &RydbergSpace, p: &RydbergParams) -> Result<LinearOperator> {
    let sites = space.sites();
    p.validate(sites)?;
    let mut t = Vec::new();
    for (col, &s) in space.states().iter().enumerate() {
        let atoms: Vec<(usize, bool)> = s.atoms().collect();
        let mut diag = 0.0;
        for (a, &(i, r)) in atoms.iter().enumerate() {
            diag += p.mu[i - 1];
            if r {
                diag += p.detuning;
                for &(j, rj) in &atoms[a + 1..] {
                    if rj {
                        diag += p.pair_potential(j - i);
                    }
                }
            }
        }
        t.push((col, col, diag));
        for (a, &(i, r)) in atoms.iter().enumerate() {
            let flipped = RydbergState {
                internal: s.internal ^ (1 << a),
                ..s
            };
            let row = space.index(flipped).expect("internal flip stays in basis");
            t.push((row, col, p.rabi[i - 1]));
            if (!r || p.rydberg_hopping)
                && i < sites
                && !OccupationState(s.positions).is_occupied(i + 1)
            {
                let moved = RydbergState {
                    positions: s.positions ^ bit(i) ^ bit(i + 1),
                    internal: s.internal,
                };
                let row = space.index(moved).expect("hop preserves atom order");
                t.push((row, col, -p.hopping));
                t.push((col, row, -p.hopping));
            }
        }
    }
    let sector = Sector::of_rydberg(space);
    Ok(LinearOperator::square(
        sector,
        SparseMatrix::from_triplets(space.dim(), space.dim(), t),
    ))
}

/// Position occupation `n_i` (either internal state) in the Rydberg basis.
pub fn rydberg_occupation_diagonal(space: &RydbergSpace, site: usize) -> Vec<f64> {
    space
        .states()
        .iter()
        .map(|s| {
            if s.positions & bit(site) != 0 {
                1.0
            } else {
                0.0
            }
        })
        .collect()
}

/// Number of atoms in `r`.
pub fn rydberg_population_diagonal(space: &RydbergSpace) -> Vec<f64> {
    space
        .states()
        .iter()
        .map(|s| s.internal.count_ones() as f64)
        .collect()
}

/// Number of neighbouring pairs of ground-state atoms.
pub fn ground_pair_diagonal(space: &RydbergSpace) -> Vec<f64> {
    space
        .states()
        .iter()
        .map(|s| {
            let g: u32 = s
                .atoms()
                .filter(|&(_, r)| !r)
                .fold(0, |m, (i, _)| m | bit(i));
            (g & (g >> 1)).count_ones() as f64
        })
        .collect()
}

/// Effective ground-state-atom couplings: bond hoppings, chemical
/// potentials, nearest-neighbour blockade and longer-range density terms.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DressedCouplings {
    /// Bond `(i, i+1)` amplitudes, length `L − 1`.
    pub hopping: Vec<f64>,
    pub mu: Vec<f64>,
    /// Finite nearest-neighbour repulsion; `None` means infinite blockade
    /// and requires the constrained basis.
    pub blockade: Option<f64>,
    /// `density[d − 2][i − 1]` couples sites `i` and `i + d`.
    pub density: Vec<Vec<f64>>,
}

impl DressedCouplings {
    /// Couplings reproducing `H_Q` on the constrained basis up to the
    /// constant `Σλ_i²`: hopping `λ_iλ_{i+1}`, `μ_i = −(λ_{i−1}² + λ_{i+1}²)`
    /// and next-nearest repulsion `λ_{i+1}²`.
    pub fn from_stagger(stagger: &Staggering) -> Self {
        let lam = stagger.couplings();
        let l = lam.len();
        let sq = |i: isize| {
            if i >= 1 && i as usize <= l {
                lam[i as usize - 1].powi(2)
            } else {
                0.0
            }
        };
        let hopping = (1..l).map(|i| lam[i - 1] * lam[i]).collect();
        let mu = (1..=l as isize).map(|i| -(sq(i - 1) + sq(i + 1))).collect();
        let nnn = (1..=l.saturating_sub(2))
            .map(|i| sq(i as isize + 1))
            .collect();
        DressedCouplings {
            hopping,
            mu,
            blockade: None,
            density: vec![nnn],
        }
    }

    pub fn constant_offset(stagger: &Staggering) -> f64 {
        stagger.couplings().iter().map(|x| x * x).sum()
    }

    /// Adds `W_i(d)` couplings for separations `d ≥ 3`.
    pub fn with_tails(mut self, tails: Vec<Vec<f64>>) -> Self {
        self.density.truncate(1);
        self.density.extend(tails);
        self
    }
}

/// Physical form of the constrained hopping model; see [`DressedCouplings`].
pub fn build_hq_dressed(space: &HilbertSpace, c: &DressedCouplings) -> Result<LinearOperator> {
    let sites = space.sites();
    if space.boundary() != Boundary::Open {
        return invalid("dressed model is built for open chains");
    }
    match (c.blockade, space.is_constrained()) {
        (None, false) => return invalid("infinite blockade requires the constrained basis"),
        (Some(_), true) => return invalid("finite blockade requires the unconstrained basis"),
        _ => {}
    }
    if c.hopping.len() + 1 != sites || c.mu.len() != sites {
        return invalid("coupling vectors do not match the lattice");
    }
    let mut t = Vec::new();
    for (col, &s) in space.states().iter().enumerate() {
        let mut diag = 0.0;
        for i in s.sites() {
            diag += c.mu[i - 1];
            if c.blockade.is_some() && i < sites && s.is_occupied(i + 1) {
                diag += c.blockade.unwrap();
            }
            for (k, row) in c.density.iter().enumerate() {
                let d = k + 2;
                if i + d <= sites && s.is_occupied(i + d) {
                    diag += row.get(i - 1).copied().unwrap_or(0.0);
                }
            }
        }
        t.push((col, col, diag));
        for i in 1..sites {
            if s.is_occupied(i) && !s.is_occupied(i + 1) {
                let moved = OccupationState(s.0 ^ bit(i) ^ bit(i + 1));
                if let Some(row) = space.index(moved) {
                    let amp = c.hopping[i - 1];
                    t.push((row, col, -amp));
                    t.push((col, row, -amp));
                }
            }
        }
    }
    Ok(LinearOperator::square(
        Sector::of(space),
        SparseMatrix::from_triplets(space.dim(), space.dim(), t),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::eigh;
    use crate::spectra::diagonalize_all;
    use proptest::prelude::*;

    #[test]
    fn one_site_supercharge() {
        let h0 = HilbertSpace::open(1, 0).unwrap();
        let q = build_supercharge(&h0, &Staggering::uniform(1)).unwrap();
        assert_eq!(q.matrix.to_dense().read(0, 0), -1.0);
    }

    #[test]
    fn nilpotent_on_seven_sites() {
        let st = Staggering::new(7, 0.7, 0).unwrap();
        for n in 0..=2 {
            let a = HilbertSpace::open(7, n).unwrap();
            let qa = build_supercharge(&a, &st).unwrap();
            let b = a.sector(n + 1).unwrap();
            let qb = build_supercharge(&b, &st).unwrap();
            let qq = qb.compose(&qa).unwrap();
            assert!(qq.matrix.max_abs() < 1e-12);
        }
    }

    #[test]
    fn hopping_elements_carry_minus_lambda_product() {
        let st = Staggering::new(7, 0.4, 0).unwrap();
        let space = HilbertSpace::open(7, 2).unwrap();
        let h = build_hq(&space, &st).unwrap();
        let lam = st.couplings();
        let from = OccupationState::from_sites(&[2, 5]);
        let to = OccupationState::from_sites(&[3, 5]);
        let v = h
            .matrix
            .get(space.index(to).unwrap(), space.index(from).unwrap());
        assert!((v + lam[1] * lam[2]).abs() < 1e-14);
    }

    #[test]
    fn hq_symmetric_and_psd() {
        for &lam in &[0.0, 0.3, 1.0] {
            let st = Staggering::new(10, lam, 0).unwrap();
            let space = HilbertSpace::open(10, 3).unwrap();
            let h = build_hq(&space, &st).unwrap();
            assert!(h.max_asymmetry() < 1e-14);
            let (e, _) = eigh(&h.matrix.to_dense());
            assert!(e[0] > -1e-12, "lambda {lam}: {}", e[0]);
        }
    }

    #[test]
    fn hq_commutes_with_number_in_fock_space() {
        // assemble the full Fock-space Q and H_Q for L=5 and check [H, N] = 0
        let st = Staggering::new(5, 0.6, 1).unwrap();
        let spaces: Vec<HilbertSpace> =
            (0..=3).map(|n| HilbertSpace::open(5, n).unwrap()).collect();
        let offsets: Vec<usize> = spaces
            .iter()
            .scan(0, |acc, s| {
                let o = *acc;
                *acc += s.dim();
                Some(o)
            })
            .collect();
        let total: usize = spaces.iter().map(|s| s.dim()).sum();
        let mut t = Vec::new();
        for n in 0..3 {
            let q = supercharge_between(&spaces[n], &spaces[n + 1], &st).unwrap();
            t.extend(
                q.matrix
                    .triplets()
                    .map(|(r, c, v)| (r + offsets[n + 1], c + offsets[n], v)),
            );
        }
        let q = SparseMatrix::from_triplets(total, total, t);
        let h = q.transpose().matmul(&q).add(&q.matmul(&q.transpose()));
        let number: Vec<f64> = spaces
            .iter()
            .enumerate()
            .flat_map(|(n, s)| std::iter::repeat(n as f64).take(s.dim()))
            .collect();
        let nm = SparseMatrix::diagonal(&number);
        let comm = h.matmul(&nm).combine(1.0, &nm.matmul(&h), -1.0);
        assert!(comm.max_abs() < 1e-14);
    }

    #[test]
    fn extreme_staggering_band() {
        let st = Staggering::new(13, 0.0, 0).unwrap();
        let space = HilbertSpace::open(13, 4).unwrap();
        let spec = diagonalize_all(&build_hq(&space, &st).unwrap()).unwrap();
        for k in 0..5 {
            assert!((spec.energies[k] - 1.0).abs() < 1e-12);
        }
        assert!(spec.energies[5] > 1.5);
    }

    #[test]
    fn local_energies_sum_to_hamiltonian() {
        let st = Staggering::new(13, 0.5, 0).unwrap();
        let space = HilbertSpace::open(13, 4).unwrap();
        let h = build_hq(&space, &st).unwrap();
        let mut sum = SparseMatrix::zeros(space.dim(), space.dim());
        for i in 1..=13 {
            let hi = build_local_energy(&space, &st, i).unwrap();
            assert!(hi.max_asymmetry() < 1e-14);
            sum = sum.add(&hi.matrix);
        }
        assert!(sum.combine(1.0, &h.matrix, -1.0).max_abs() < 1e-12);
        assert!(build_local_energy(&space, &st, 14).is_err());
        assert!(build_local_energy(&space, &st, 0).is_err());
    }

    #[test]
    fn observables_on_bare_kinks() {
        // l = 3 edge readout: the left kink keeps site 9 filled, the right one empties the last cell
        let space = HilbertSpace::open(10, 3).unwrap();
        let d = observable_diagonal(ObservableKind::Dn, &space, (1.0, 1.0)).unwrap();
        let k = |sites: &[usize]| d[space.index(OccupationState::from_sites(sites)).unwrap()];
        // site 9 occupied (|II⟩ pattern reaches the edge): δn = 0
        assert_eq!(k(&[3, 6, 9]), 0.0);
        // right-edge kink: last cell empty
        assert_eq!(k(&[1, 4, 7]), 1.0);
        assert!(observable_diagonal(
            ObservableKind::Dn,
            &HilbertSpace::open(2, 1).unwrap(),
            (1.0, 1.0)
        )
        .is_err());
    }

    #[test]
    fn coefficient_solve_round_trips() {
        for kind in [
            ObservableKind::Dn,
            ObservableKind::Dn3,
            ObservableKind::DnBar,
        ] {
            let (a, b) = solve_observable_coeffs(kind, 0.9, 0.1).unwrap();
            assert!(kind.value((a, b), 0.9).abs() < 1e-12);
            assert!((kind.value((a, b), 0.1) - 1.0).abs() < 1e-12);
        }
        assert!(solve_observable_coeffs(ObservableKind::Dn, 0.5, 0.5).is_err());
    }

    fn ryd_params(sites: usize, rabi: f64) -> RydbergParams {
        RydbergParams {
            hopping: 1.0,
            mu: vec![0.3; sites],
            rabi: vec![rabi; sites],
            detuning: 10.0,
            c6: 50.0,
            spacing: 1.0,
            range_cut: None,
            rydberg_hopping: false,
        }
    }

    #[test]
    fn rydberg_without_drive_is_tight_binding() {
        let sites = 6;
        let ry = RydbergSpace::enumerate(sites, 2).unwrap();
        let h = build_rydberg(&ry, &ryd_params(sites, 0.0)).unwrap();
        assert!(h.max_asymmetry() < 1e-14);
        let free = HilbertSpace::enumerate(sites, 2, Boundary::Open, false).unwrap();
        let keep: Vec<usize> = free
            .states()
            .iter()
            .map(|&s| ry.index(RydbergState::all_ground(s)).unwrap())
            .collect();
        let block = h.matrix.submatrix(&keep);
        let c = DressedCouplings {
            hopping: vec![1.0; sites - 1],
            mu: vec![0.3; sites],
            blockade: Some(0.0),
            density: vec![],
        };
        let tb = build_hq_dressed(&free, &c).unwrap();
        assert!(block.combine(1.0, &tb.matrix, -1.0).max_abs() < 1e-14);
        // the block decouples from the rest
        let outside: f64 = keep
            .iter()
            .flat_map(|&c| h.matrix.triplets().filter(move |&(_, col, _)| col == c))
            .filter(|(r, _, _)| !keep.contains(r))
            .map(|(_, _, v)| v.abs())
            .sum();
        assert_eq!(outside, 0.0);
    }

    #[test]
    fn rydberg_hopping_toggle_moves_excited_atoms() {
        let ry = RydbergSpace::enumerate(3, 1).unwrap();
        let mut p = ryd_params(3, 0.5);
        let s = RydbergState {
            positions: 0b001,
            internal: 1,
        };
        let t = RydbergState {
            positions: 0b010,
            internal: 1,
        };
        let h = build_rydberg(&ry, &p).unwrap();
        assert_eq!(
            h.matrix.get(ry.index(t).unwrap(), ry.index(s).unwrap()),
            0.0
        );
        p.rydberg_hopping = true;
        let h = build_rydberg(&ry, &p).unwrap();
        assert_eq!(
            h.matrix.get(ry.index(t).unwrap(), ry.index(s).unwrap()),
            -1.0
        );
    }

    #[test]
    fn rydberg_validation() {
        let ry = RydbergSpace::enumerate(4, 1).unwrap();
        let mut p = ryd_params(4, 0.5);
        p.range_cut = Some(0);
        assert!(build_rydberg(&ry, &p).is_err());
        let mut p = ryd_params(4, 0.5);
        p.hopping = 0.0;
        assert!(build_rydberg(&ry, &p).is_err());
        assert!(build_rydberg(&ry, &ryd_params(5, 0.5)).is_err());
    }

    #[test]
    fn dressed_form_reproduces_hq_spectrum() {
        for &(sites, n, lam) in &[
            (7usize, 2usize, 1.0),
            (10, 3, 0.6),
            (13, 4, 1.0),
            (13, 4, 0.25),
        ] {
            let st = Staggering::new(sites, lam, 0).unwrap();
            let space = HilbertSpace::open(sites, n).unwrap();
            let hq = diagonalize_all(&build_hq(&space, &st).unwrap()).unwrap();
            let c = DressedCouplings::from_stagger(&st);
            let hd = diagonalize_all(&build_hq_dressed(&space, &c).unwrap()).unwrap();
            let shift = DressedCouplings::constant_offset(&st);
            for (a, b) in hq.energies.iter().zip(&hd.energies) {
                assert!(
                    (a - (b + shift)).abs() < 1e-10,
                    "L={sites} λ={lam}: {a} vs {}",
                    b + shift
                );
            }
        }
    }

    #[test]
    fn dressed_model_is_entrywise_hq() {
        let st = Staggering::new(10, 0.35, 0).unwrap();
        let space = HilbertSpace::open(10, 3).unwrap();
        let hq = build_hq(&space, &st).unwrap();
        let hd = build_hq_dressed(&space, &DressedCouplings::from_stagger(&st)).unwrap();
        let shift =
            SparseMatrix::identity(space.dim()).scaled(DressedCouplings::constant_offset(&st));
        assert!(
            hq.matrix
                .combine(1.0, &hd.matrix.add(&shift), -1.0)
                .max_abs()
                < 1e-13
        );
    }

    proptest! {
        #[test]
        fn supercharge_squares_to_zero(lam in 0.0f64..=1.0, offset in 0usize..3, sites in 4usize..=11) {
            let st = Staggering::new(sites, lam, offset).unwrap();
            for n in 0..sites / 2 {
                let a = HilbertSpace::open(sites, n).unwrap();
                let b = a.sector(n + 1).unwrap();
                if b.dim() == 0 || n + 2 > sites {
                    continue;
                }
                let qa = supercharge_between(&a, &b, &st).unwrap();
                let qb = build_supercharge(&b, &st).unwrap();
                prop_assert!(qb.compose(&qa).unwrap().matrix.max_abs() < 1e-12);
            }
        }
    }
}
