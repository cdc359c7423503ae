//! Phase labels, phase sets and the small dense complex matrices used for
//! per-phase impedances.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Phase {
    A,
    B,
    C,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::A, Phase::B, Phase::C];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Phase> {
        Phase::ALL.get(i).copied()
    }

    /// Nominal angle of the positive-sequence source voltage on this phase.
    pub fn nominal_angle(self) -> f64 {
        match self {
            Phase::A => 0.0,
            Phase::B => -2.0 * std::f64::consts::PI / 3.0,
            Phase::C => 2.0 * std::f64::consts::PI / 3.0,
        }
    }

    pub fn letter(self) -> char {
        match self {
            Phase::A => 'A',
            Phase::B => 'B',
            Phase::C => 'C',
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.letter())
    }
}

impl FromStr for Phase {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "A" | "a" => Ok(Phase::A),
            "B" | "b" => Ok(Phase::B),
            "C" | "c" => Ok(Phase::C),
            other => Err(format!("unknown phase '{other}'")),
        }
    }
}

/// Subset of {A, B, C}, stored as a bitmask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct PhaseSet(u8);

impl PhaseSet {
    pub const ABC: PhaseSet = PhaseSet(0b111);
    pub const EMPTY: PhaseSet = PhaseSet(0);

    pub fn single(p: Phase) -> Self {
        PhaseSet(1 << p.index())
    }

    pub fn contains(self, p: Phase) -> bool {
        self.0 & (1 << p.index()) != 0
    }

    pub fn insert(&mut self, p: Phase) {
        self.0 |= 1 << p.index();
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_subset_of(self, other: PhaseSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn iter(self) -> impl Iterator<Item = Phase> {
        Phase::ALL.into_iter().filter(move |p| self.contains(*p))
    }

    /// Position of `p` within this set (0-based), used to index phase matrices.
    pub fn position(self, p: Phase) -> Option<usize> {
        if !self.contains(p) {
            return None;
        }
        Some(self.iter().take_while(|q| *q != p).count())
    }
}

impl fmt::Display for PhaseSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for p in self.iter() {
            write!(f, "{p}")?;
        }
        Ok(())
    }
}

impl FromStr for PhaseSet {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut set = PhaseSet::EMPTY;
        for ch in s.chars().filter(|c| !c.is_whitespace() && *c != ',' && *c != '.') {
            let p: Phase = ch.to_string().parse()?;
            if set.contains(p) {
                return Err(format!("phase {p} listed twice in '{s}'"));
            }
            set.insert(p);
        }
        Ok(set)
    }
}

impl Serialize for PhaseSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for PhaseSet {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Per-phase complex quantity for a bus or branch; absent phases hold zero.
pub type PhaseVec = [Complex64; 3];

pub const ZERO3: PhaseVec = [Complex64::new(0.0, 0.0); 3];

/// Square complex matrix of dimension 1..=3, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl PhaseMatrix {
    pub fn zeros(n: usize) -> Self {
        PhaseMatrix {
            n,
            data: vec![Complex64::new(0.0, 0.0); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, Complex64::new(1.0, 0.0));
        }
        m
    }

    pub fn diagonal(values: &[Complex64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (i, v) in values.iter().enumerate() {
            m.set(i, i, *v);
        }
        m
    }

    /// Builds from separate resistance and reactance rows.
    pub fn from_parts(r: &[Vec<f64>], x: &[Vec<f64>]) -> Option<Self> {
        let n = r.len();
        if x.len() != n || r.iter().chain(x.iter()).any(|row| row.len() != n) {
            return None;
        }
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m.set(i, j, Complex64::new(r[i][j], x[i][j]));
            }
        }
        Some(m)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.n + j] = v;
    }

    pub fn resistance_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j).re).collect())
            .collect()
    }

    pub fn reactance_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j).im).collect())
            .collect()
    }

    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j) * v[j]).sum())
            .collect()
    }

    pub fn mul(&self, other: &PhaseMatrix) -> PhaseMatrix {
        let mut out = PhaseMatrix::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                let s = (0..self.n).map(|k| self.get(i, k) * other.get(k, j)).sum();
                out.set(i, j, s);
            }
        }
        out
    }

    pub fn add(&self, other: &PhaseMatrix) -> PhaseMatrix {
        PhaseMatrix {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn scale(&self, k: Complex64) -> PhaseMatrix {
        PhaseMatrix {
            n: self.n,
            data: self.data.iter().map(|a| a * k).collect(),
        }
    }

    /// Copy with every reactance multiplied by `h`, resistances unchanged.
    pub fn with_reactance_scaled(&self, h: f64) -> PhaseMatrix {
        PhaseMatrix {
            n: self.n,
            data: self.data.iter().map(|z| Complex64::new(z.re, z.im * h)).collect(),
        }
    }

    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        (0..self.n).all(|i| {
            (0..i).all(|j| {
                let a = self.get(i, j);
                let b = self.get(j, i);
                (a - b).norm() <= rel_tol * a.norm().max(b.norm()).max(f64::MIN_POSITIVE)
            })
        })
    }

    /// Each diagonal magnitude is at least the sum of off-diagonal magnitudes
    /// in its row.
    pub fn is_diagonally_dominant(&self) -> bool {
        (0..self.n).all(|i| {
            let off: f64 = (0..self.n).filter(|j| *j != i).map(|j| self.get(i, j).norm()).sum();
            self.get(i, i).norm() >= off
        })
    }

    /// Gauss-Jordan inverse with partial pivoting; `None` when singular.
    pub fn inverse(&self) -> Option<PhaseMatrix> {
        let n = self.n;
        let mut a = self.clone();
        let mut inv = PhaseMatrix::identity(n);
        let scale = self.data.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            return None;
        }
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&r1, &r2| a.get(r1, col).norm().total_cmp(&a.get(r2, col).norm()))
                .unwrap();
            if a.get(pivot, col).norm() <= 1e-14 * scale {
                return None;
            }
            if pivot != col {
                for j in 0..n {
                    let (t1, t2) = (a.get(col, j), a.get(pivot, j));
                    a.set(col, j, t2);
                    a.set(pivot, j, t1);
                    let (u1, u2) = (inv.get(col, j), inv.get(pivot, j));
                    inv.set(col, j, u2);
                    inv.set(pivot, j, u1);
                }
            }
            let d = a.get(col, col);
            for j in 0..n {
                a.set(col, j, a.get(col, j) / d);
                inv.set(col, j, inv.get(col, j) / d);
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = a.get(r, col);
                if f == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    a.set(r, j, a.get(r, j) - f * a.get(col, j));
                    inv.set(r, j, inv.get(r, j) - f * inv.get(col, j));
                }
            }
        }
        Some(inv)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phase_set_parse_and_display() {
        let s: PhaseSet = "CA".parse().unwrap();
        assert_eq!(s.to_string(), "AC");
        assert_eq!(s.len(), 2);
        assert_eq!(s.position(Phase::C), Some(1));
        assert_eq!(s.position(Phase::B), None);
        assert!("AA".parse::<PhaseSet>().is_err());
        assert!("AD".parse::<PhaseSet>().is_err());
        assert!(PhaseSet::single(Phase::B).is_subset_of(PhaseSet::ABC));
        assert!(!PhaseSet::ABC.is_subset_of(s));
    }

    #[test]
    fn inverse_round_trip() {
        let z = PhaseMatrix::from_parts(
            &[vec![0.35, 0.16, 0.16], vec![0.16, 0.34, 0.15], vec![0.16, 0.15, 0.34]],
            &[vec![1.02, 0.50, 0.42], vec![0.50, 1.05, 0.38], vec![0.42, 0.38, 1.03]],
        )
        .unwrap();
        let prod = z.mul(&z.inverse().unwrap());
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((prod.get(i, j) - Complex64::new(expect, 0.0)).norm() < 1e-12);
            }
        }
        assert!(z.is_symmetric(1e-12));
        assert!(z.is_diagonally_dominant());
    }

    #[test]
    fn singular_matrix_has_no_inverse() {
        assert!(PhaseMatrix::zeros(2).inverse().is_none());
        let mut m = PhaseMatrix::zeros(2);
        m.set(0, 0, Complex64::new(1.0, 0.0));
        m.set(0, 1, Complex64::new(2.0, 0.0));
        m.set(1, 0, Complex64::new(2.0, 0.0));
        m.set(1, 1, Complex64::new(4.0, 0.0));
        assert!(m.inverse().is_none());
    }
}
