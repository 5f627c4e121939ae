//! Boundary conditions, integer lattices and the ordered free eigenbasis.
//!
//! For periodic and antiperiodic conditions the free eigenvectors are
//! `e¹ₙ = (e^{-inx}, 0)` and `e²ₙ = (0, e^{inx})` with `n` on the even
//! (resp. odd) integers; both have eigenvalue `n`. For the Dirichlet-type
//! condition `y₁ = y₂` at both ends the eigenvectors are
//! `gₙ = (e¹ₙ + e²ₙ)/√2`, one per integer `n`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::SpectralError;

/// Boundary condition tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BoundaryCondition {
    /// `y(0) = y(π)`
    #[serde(rename = "per+")]
    PeriodicPlus,
    /// `y(0) = -y(π)`
    #[serde(rename = "per-")]
    PeriodicMinus,
    /// `y₁(0) = y₂(0)`, `y₁(π) = y₂(π)`
    #[serde(rename = "dir")]
    Dirichlet,
}

impl BoundaryCondition {
    pub const ALL: [BoundaryCondition; 3] = [
        BoundaryCondition::PeriodicPlus,
        BoundaryCondition::PeriodicMinus,
        BoundaryCondition::Dirichlet,
    ];

    /// Lattice carrying the free eigenvalues.
    pub fn spectral_lattice(self) -> Lattice {
        match self {
            BoundaryCondition::PeriodicPlus => Lattice::Even,
            BoundaryCondition::PeriodicMinus => Lattice::Odd,
            BoundaryCondition::Dirichlet => Lattice::All,
        }
    }

    /// Lattice carrying the dominating sequence `r`.
    pub fn envelope_lattice(self) -> Lattice {
        match self {
            BoundaryCondition::Dirichlet => Lattice::All,
            _ => Lattice::Even,
        }
    }

    /// Multiplicity of every free eigenvalue.
    pub fn free_multiplicity(self) -> usize {
        match self {
            BoundaryCondition::Dirichlet => 1,
            _ => 2,
        }
    }

    /// Step between neighbouring free eigenvalues.
    pub fn spacing(self) -> i64 {
        match self {
            BoundaryCondition::Dirichlet => 1,
            _ => 2,
        }
    }

    /// Free eigenvalues `n` with `lo < |n| <= hi`, ascending.
    pub fn shell(self, lo: i64, hi: i64) -> Vec<i64> {
        let lattice = self.spectral_lattice();
        (-hi..=hi)
            .filter(|&n| n.abs() > lo && lattice.contains(n))
            .collect()
    }
}

impl fmt::Display for BoundaryCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundaryCondition::PeriodicPlus => "per+",
            BoundaryCondition::PeriodicMinus => "per-",
            BoundaryCondition::Dirichlet => "dir",
        })
    }
}

impl FromStr for BoundaryCondition {
    type Err = SpectralError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "per+" | "periodic" => Ok(BoundaryCondition::PeriodicPlus),
            "per-" | "antiperiodic" => Ok(BoundaryCondition::PeriodicMinus),
            "dir" | "dirichlet" => Ok(BoundaryCondition::Dirichlet),
            other => Err(SpectralError::InvalidParameter(format!(
                "unknown boundary condition '{other}' (expected per+, per- or dir)"
            ))),
        }
    }
}

/// A sublattice of the integers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Lattice {
    Even,
    Odd,
    All,
}

impl Lattice {
    pub fn contains(self, n: i64) -> bool {
        match self {
            Lattice::Even => n.rem_euclid(2) == 0,
            Lattice::Odd => n.rem_euclid(2) == 1,
            Lattice::All => true,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Lattice::Even => "even",
            Lattice::Odd => "odd",
            Lattice::All => "integer",
        }
    }

    /// Lattice `n + 2Z` for `Even`/`Odd` parent lattices, `Z` otherwise.
    pub fn through(self, n: i64) -> Lattice {
        match self {
            Lattice::All => Lattice::All,
            _ if n.rem_euclid(2) == 0 => Lattice::Even,
            _ => Lattice::Odd,
        }
    }

    pub fn step(self) -> i64 {
        match self {
            Lattice::All => 1,
            _ => 2,
        }
    }

    /// Smallest lattice point `>= lo`.
    pub fn ceil(self, lo: i64) -> i64 {
        let mut n = lo;
        while !self.contains(n) {
            n += 1;
        }
        n
    }

    /// Lattice points in `[lo, hi]`, ascending.
    pub fn range(self, lo: i64, hi: i64) -> impl Iterator<Item = i64> {
        let start = self.ceil(lo);
        let step = self.step();
        (0..)
            .map(move |k| start + k * step)
            .take_while(move |&n| n <= hi)
    }
}

/// Component of a free eigenvector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Channel {
    /// `e¹ₙ`
    First,
    /// `e²ₙ`
    Second,
    /// `gₙ`
    Diagonal,
}

impl Channel {
    pub fn label(self) -> &'static str {
        match self {
            Channel::First => "1",
            Channel::Second => "2",
            Channel::Diagonal => "g",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BasisIndex {
    pub n: i64,
    pub channel: Channel,
}

/// Ordered truncated free eigenbasis.
///
/// Ordering: ascending `n`, channel 1 before channel 2.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisIndexSet {
    pub bc: BoundaryCondition,
    pub cutoff: usize,
    pub indices: Vec<BasisIndex>,
    lo: i64,
}

impl BasisIndexSet {
    /// Per⁺: even `n` in `[-2K, 2K]`; Per⁻: odd `n` in `[-2K-1, 2K+1]`;
    /// Dir: all `n` in `[-K, K]`.
    pub fn new(bc: BoundaryCondition, cutoff: usize) -> Self {
        let k = cutoff as i64;
        let (lo, hi) = match bc {
            BoundaryCondition::PeriodicPlus => (-2 * k, 2 * k),
            BoundaryCondition::PeriodicMinus => (-2 * k - 1, 2 * k + 1),
            BoundaryCondition::Dirichlet => (-k, k),
        };
        let mut indices = Vec::new();
        for n in bc.spectral_lattice().range(lo, hi) {
            match bc {
                BoundaryCondition::Dirichlet => indices.push(BasisIndex {
                    n,
                    channel: Channel::Diagonal,
                }),
                _ => {
                    indices.push(BasisIndex {
                        n,
                        channel: Channel::First,
                    });
                    indices.push(BasisIndex {
                        n,
                        channel: Channel::Second,
                    });
                }
            }
        }
        BasisIndexSet {
            bc,
            cutoff,
            indices,
            lo,
        }
    }

    pub fn dim(&self) -> usize {
        self.indices.len()
    }

    /// Largest `|n|` present.
    pub fn max_index(&self) -> i64 {
        -self.lo
    }

    /// Free eigenvalues present, ascending.
    pub fn lattice(&self) -> Vec<i64> {
        self.bc
            .spectral_lattice()
            .range(self.lo, -self.lo)
            .collect()
    }

    pub fn position(&self, n: i64, channel: Channel) -> Option<usize> {
        if n < self.lo || n > -self.lo || !self.bc.spectral_lattice().contains(n) {
            return None;
        }
        let slot = ((n - self.lo) / self.bc.spectral_lattice().step()) as usize;
        match (self.bc, channel) {
            (BoundaryCondition::Dirichlet, Channel::Diagonal) => Some(slot),
            (BoundaryCondition::Dirichlet, _) | (_, Channel::Diagonal) => None,
            (_, Channel::First) => Some(2 * slot),
            (_, Channel::Second) => Some(2 * slot + 1),
        }
    }

    /// Positions of every basis vector with lattice index `n`.
    pub fn positions_of(&self, n: i64) -> Vec<usize> {
        let channels: &[Channel] = match self.bc {
            BoundaryCondition::Dirichlet => &[Channel::Diagonal],
            _ => &[Channel::First, Channel::Second],
        };
        channels
            .iter()
            .filter_map(|&c| self.position(n, c))
            .collect()
    }

    /// Free eigenvalue at each position.
    pub fn free_values(&self) -> impl Iterator<Item = i64> + '_ {
        self.indices.iter().map(|ix| ix.n)
    }
}
