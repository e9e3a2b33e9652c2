//! Occupation-number bases.
//!
//! Sites are 1-based in every public signature; site `i` is stored in bit
//! `i - 1`. Bases are sorted by bitmask value and looked up by binary search.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub const MAX_SITES: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Open,
    Periodic,
}

/// Fermion configuration as a bitmask; site 1 is the lowest bit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OccupationState(pub u32);

impl OccupationState {
    pub fn from_sites(sites: &[usize]) -> Self {
        OccupationState(sites.iter().fold(0, |acc, &i| acc | bit(i)))
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn count(self) -> u32 {
        self.0.count_ones()
    }

    pub fn is_occupied(self, i: usize) -> bool {
        self.0 & bit(i) != 0
    }

    /// Occupied sites in ascending order.
    pub fn sites(self) -> impl Iterator<Item = usize> {
        let mut rest = self.0;
        std::iter::from_fn(move || {
            if rest == 0 {
                return None;
            }
            let tz = rest.trailing_zeros();
            rest &= rest - 1;
            Some(tz as usize + 1)
        })
    }

    /// Jordan–Wigner parity: particles strictly left of site `i`.
    pub fn string_sign(self, i: usize) -> f64 {
        if (self.0 & (bit(i) - 1)).count_ones() % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    }

    /// `c†_i`; `None` when site `i` is already occupied.
    pub fn apply_c_dag(self, i: usize) -> Option<(OccupationState, f64)> {
        if self.is_occupied(i) {
            return None;
        }
        Some((OccupationState(self.0 | bit(i)), self.string_sign(i)))
    }

    /// `c_i`; `None` when site `i` is empty.
    pub fn apply_c(self, i: usize) -> Option<(OccupationState, f64)> {
        if !self.is_occupied(i) {
            return None;
        }
        Some((OccupationState(self.0 & !bit(i)), self.string_sign(i)))
    }

    /// True if no two neighbouring sites are occupied.
    pub fn respects_exclusion(self, sites: usize, boundary: Boundary) -> bool {
        let b = self.0;
        if b & (b >> 1) != 0 {
            return false;
        }
        match boundary {
            Boundary::Open => true,
            Boundary::Periodic => sites < 2 || !(self.is_occupied(1) && self.is_occupied(sites)),
        }
    }

    /// Renders site 1 first, e.g. `|0101⟩` as `"0101"`.
    pub fn render(self, sites: usize) -> String {
        (1..=sites)
            .map(|i| if self.is_occupied(i) { '1' } else { '0' })
            .collect()
    }
}

#[inline]
pub(crate) fn bit(i: usize) -> u32 {
    debug_assert!((1..=MAX_SITES).contains(&i));
    1u32 << (i - 1)
}

/// A fixed-particle-number sector, optionally with nearest-neighbour exclusion.
#[derive(Clone, Debug, PartialEq)]
pub struct HilbertSpace {
    sites: usize,
    particles: usize,
    boundary: Boundary,
    constrained: bool,
    states: Vec<OccupationState>,
}

impl HilbertSpace {
    pub fn enumerate(
        sites: usize,
        particles: usize,
        boundary: Boundary,
        constrained: bool,
    ) -> Result<Self> {
        if sites == 0 || sites > MAX_SITES {
            return invalid(format!("site count {sites} outside 1..={MAX_SITES}"));
        }
        if particles > sites {
            return invalid(format!("{particles} particles on {sites} sites"));
        }
        let mut states = Vec::new();
        let gap = if constrained { 2 } else { 1 };
        place(0, 1, particles, sites, gap, &mut states);
        if constrained && boundary == Boundary::Periodic && sites > 1 {
            states.retain(|s| !(s.is_occupied(1) && s.is_occupied(sites)));
        }
        states.sort_unstable();
        Ok(HilbertSpace {
            sites,
            particles,
            boundary,
            constrained,
            states,
        })
    }

    /// Open constrained chain, the default setting for kinks.
    pub fn open(sites: usize, particles: usize) -> Result<Self> {
        Self::enumerate(sites, particles, Boundary::Open, true)
    }

    /// Subspace keeping only states accepted by `keep`.
    pub fn restricted(&self, keep: impl Fn(OccupationState) -> bool) -> Self {
        HilbertSpace {
            states: self.states.iter().copied().filter(|&s| keep(s)).collect(),
            ..self.clone()
        }
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn is_constrained(&self) -> bool {
        self.constrained
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[OccupationState] {
        &self.states
    }

    pub fn state(&self, k: usize) -> OccupationState {
        self.states[k]
    }

    pub fn index(&self, s: OccupationState) -> Option<usize> {
        self.states.binary_search(&s).ok()
    }

    /// Same lattice and rules, particle number shifted by one.
    pub fn sector(&self, particles: usize) -> Result<Self> {
        Self::enumerate(self.sites, particles, self.boundary, self.constrained)
    }

    pub fn same_lattice(&self, other: &HilbertSpace) -> bool {
        self.sites == other.sites
            && self.boundary == other.boundary
            && self.constrained == other.constrained
    }

    /// Basis vector of a single configuration.
    pub fn basis_vector(&self, s: OccupationState) -> Option<Vec<f64>> {
        let k = self.index(s)?;
        let mut v = vec![0.0; self.dim()];
        v[k] = 1.0;
        Some(v)
    }
}

fn place(
    acc: u32,
    first: usize,
    left: usize,
    sites: usize,
    gap: usize,
    out: &mut Vec<OccupationState>,
) {
    if left == 0 {
        out.push(OccupationState(acc));
        return;
    }
    // the remaining `left` particles need (left - 1) * gap + 1 sites
    let need = (left - 1) * gap + 1;
    let mut i = first;
    while i + need - 1 <= sites {
        place(acc | bit(i), i + gap, left - 1, sites, gap, out);
        i += 1;
    }
}

/// Atom positions plus the internal g/r label of each atom.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RydbergState {
    pub positions: u32,
    /// Bit `j` is set when the `j`-th atom (ascending site order) is in `r`.
    pub internal: u32,
}

impl RydbergState {
    /// Site of the `j`-th atom (0-based atom index, 1-based site).
    pub fn atom_site(self, j: usize) -> usize {
        OccupationState(self.positions)
            .sites()
            .nth(j)
            .expect("atom index in range")
    }

    pub fn is_rydberg(self, j: usize) -> bool {
        self.internal & (1 << j) != 0
    }

    /// (site, is_rydberg) for each atom in ascending site order.
    pub fn atoms(self) -> impl Iterator<Item = (usize, bool)> {
        OccupationState(self.positions)
            .sites()
            .enumerate()
            .map(move |(j, i)| (i, self.internal & (1 << j) != 0))
    }

    /// Occupation of site `i` by an atom in the ground state.
    pub fn ground_at(self, i: usize) -> bool {
        self.atoms().any(|(s, r)| s == i && !r)
    }

    pub fn rydberg_at(self, i: usize) -> bool {
        self.atoms().any(|(s, r)| s == i && r)
    }

    /// All atoms in `g`.
    pub fn all_ground(positions: OccupationState) -> Self {
        RydbergState {
            positions: positions.0,
            internal: 0,
        }
    }
}

/// Unconstrained atom placements times `2ⁿ` internal labels.
#[derive(Clone, Debug, PartialEq)]
pub struct RydbergSpace {
    sites: usize,
    atoms: usize,
    states: Vec<RydbergState>,
}

impl RydbergSpace {
    pub fn enumerate(sites: usize, atoms: usize) -> Result<Self> {
        let positions = HilbertSpace::enumerate(sites, atoms, Boundary::Open, false)?;
        let mut states = Vec::with_capacity(positions.dim() << atoms);
        for &p in positions.states() {
            for internal in 0..(1u32 << atoms) {
                states.push(RydbergState {
                    positions: p.0,
                    internal,
                });
            }
        }
        states.sort_unstable();
        Ok(RydbergSpace {
            sites,
            atoms,
            states,
        })
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn atoms(&self) -> usize {
        self.atoms
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[RydbergState] {
        &self.states
    }

    pub fn index(&self, s: RydbergState) -> Option<usize> {
        self.states.binary_search(&s).ok()
    }

    /// Embeds a fermion amplitude vector with every atom in `g`.
    pub fn embed_ground<T: Copy + Default>(
        &self,
        space: &HilbertSpace,
        amps: &[T],
    ) -> Result<Vec<T>> {
        if space.sites() != self.sites || space.particles() != self.atoms {
            return invalid("embedding between different lattices or atom numbers");
        }
        let mut out = vec![T::default(); self.dim()];
        for (k, &s) in space.states().iter().enumerate() {
            let idx = self
                .index(RydbergState::all_ground(s))
                .expect("positions enumerated");
            out[idx] = amps[k];
        }
        Ok(out)
    }
}
