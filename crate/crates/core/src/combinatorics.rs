//! Set partitions, permutations grouped by cycle type, complete Bell
//! polynomials over any commutative ring, and square-free ε-polynomials.

use std::collections::BTreeMap;
use std::ops::{Add, Mul};

use itertools::Itertools;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest ground set accepted by [`enumerate_partitions`].
pub const MAX_PARTITION_SET: usize = 12;
/// Largest ground set accepted by [`enumerate_permutations_with_partition`].
pub const MAX_PERMUTATION_SET: usize = 9;

/// A partition of a finite set of integers into nonempty blocks, each block
/// sorted and the blocks ordered by least element.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SetPartition {
    blocks: Vec<Vec<usize>>,
}

impl SetPartition {
    /// Canonicalizes the blocks; fails on empty or overlapping blocks.
    pub fn new(mut blocks: Vec<Vec<usize>>) -> Result<Self> {
        for b in &mut blocks {
            if b.is_empty() {
                return Err(Error::Domain("empty block in set partition".into()));
            }
            b.sort_unstable();
        }
        blocks.sort_by_key(|b| b[0]);
        let mut all: Vec<usize> = blocks.iter().flatten().copied().collect();
        let n = all.len();
        all.sort_unstable();
        all.dedup();
        if all.len() != n {
            return Err(Error::Domain("set partition blocks overlap".into()));
        }
        Ok(SetPartition { blocks })
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn ground_set(&self) -> Vec<usize> {
        self.blocks.iter().flatten().copied().sorted().collect()
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// `prod_k (|π_k| - 1)!`, the number of permutations with these cycle supports.
    pub fn cyclic_orderings(&self) -> u64 {
        self.blocks.iter().map(|b| (1..b.len() as u64).product::<u64>()).product()
    }
}

fn check_size(n: usize, max: usize, what: &str) -> Result<()> {
    if n > max {
        return Err(Error::Overflow(format!("{what} of a {n}-element set exceeds the limit {max}")));
    }
    Ok(())
}

fn sorted_unique(ground: &[usize]) -> Result<Vec<usize>> {
    let g: Vec<usize> = ground.iter().copied().sorted().dedup().collect();
    if g.len() != ground.len() {
        return Err(Error::Domain("ground set has repeated elements".into()));
    }
    Ok(g)
}

/// All partitions of `ground`, generated from restricted growth strings, so
/// the empty set yields exactly one (empty) partition.
pub fn enumerate_partitions(ground: &[usize]) -> Result<Vec<SetPartition>> {
    check_size(ground.len(), MAX_PARTITION_SET, "partitions")?;
    let g = sorted_unique(ground)?;
    let n = g.len();
    let mut out = Vec::new();
    let mut rgs = vec![0usize; n];
    loop {
        let nblocks = rgs.iter().max().map_or(0, |m| m + 1);
        let mut blocks = vec![Vec::new(); nblocks];
        for (i, b) in rgs.iter().enumerate() {
            blocks[*b].push(g[i]);
        }
        out.push(SetPartition { blocks });
        // next restricted growth string: a_i <= 1 + max(a_0..a_{i-1})
        let mut i = n;
        loop {
            if i <= 1 {
                return Ok(out);
            }
            i -= 1;
            let prefix_max = rgs[..i].iter().max().copied().unwrap_or(0);
            if rgs[i] <= prefix_max {
                rgs[i] += 1;
                rgs[i + 1..].iter_mut().for_each(|a| *a = 0);
                break;
            }
        }
    }
}

/// A permutation in standard cycle form: each cycle starts at its least
/// element and cycles are ordered by that element.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CycleDecomposition {
    pub cycles: Vec<Vec<usize>>,
    pub sign: i8,
    pub underlying_partition: SetPartition,
}

impl CycleDecomposition {
    /// Cycle form of the permutation `i -> image[i]` on `ground[i]`.
    pub fn from_images(ground: &[usize], image: &[usize]) -> Result<Self> {
        if ground.len() != image.len() {
            return Err(Error::Domain("permutation image length mismatch".into()));
        }
        let pos: BTreeMap<usize, usize> = ground.iter().enumerate().map(|(i, g)| (*g, i)).collect();
        let mut seen = vec![false; ground.len()];
        let mut cycles = Vec::new();
        let order: Vec<usize> = (0..ground.len()).sorted_by_key(|i| ground[*i]).collect();
        for start in order {
            if seen[start] {
                continue;
            }
            let mut cyc = Vec::new();
            let mut i = start;
            while !seen[i] {
                seen[i] = true;
                cyc.push(ground[i]);
                i = *pos
                    .get(&image[i])
                    .ok_or_else(|| Error::Domain("permutation image leaves the ground set".into()))?;
            }
            cycles.push(cyc);
        }
        let sign = if (ground.len() - cycles.len()).is_multiple_of(2) { 1 } else { -1 };
        let underlying_partition = SetPartition::new(cycles.clone())?;
        Ok(CycleDecomposition { cycles, sign, underlying_partition })
    }

    /// The image of `x`, or `x` itself when it is not moved.
    pub fn apply(&self, x: usize) -> usize {
        for c in &self.cycles {
            if let Some(p) = c.iter().position(|y| *y == x) {
                return c[(p + 1) % c.len()];
            }
        }
        x
    }
}

/// Every permutation of `ground`, grouped by the partition formed by its cycle supports.
pub fn enumerate_permutations_with_partition(
    ground: &[usize],
) -> Result<BTreeMap<SetPartition, Vec<CycleDecomposition>>> {
    check_size(ground.len(), MAX_PERMUTATION_SET, "permutations")?;
    let g = sorted_unique(ground)?;
    let mut out: BTreeMap<SetPartition, Vec<CycleDecomposition>> = BTreeMap::new();
    for image in g.iter().copied().permutations(g.len()) {
        let c = CycleDecomposition::from_images(&g, &image)?;
        out.entry(c.underlying_partition.clone()).or_default().push(c);
    }
    Ok(out)
}

/// Bell numbers `B_0..=B_n` via the Bell triangle.
pub fn bell_numbers(n: usize) -> Vec<u128> {
    let mut out = vec![1u128];
    let mut row = vec![1u128];
    for _ in 0..n {
        let mut next = vec![*row.last().expect("nonempty row")];
        for v in &row {
            let s = next.last().expect("nonempty row") + v;
            next.push(s);
        }
        out.push(next[0]);
        row = next;
    }
    out
}

/// Scalars usable in complete Bell polynomials: a commutative ring with an
/// embedding of the non-negative integers.
pub trait BellRing: Clone + Zero + One + Add<Output = Self> + Mul<Output = Self> {
    fn from_count(n: u64) -> Self;
}

impl BellRing for Complex64 {
    fn from_count(n: u64) -> Self {
        Complex64::new(n as f64, 0.0)
    }
}

impl BellRing for f64 {
    fn from_count(n: u64) -> Self {
        n as f64
    }
}

impl BellRing for BigRational {
    fn from_count(n: u64) -> Self {
        BigRational::from_integer(n.into())
    }
}

fn binomial_u64(n: u64, k: u64) -> u64 {
    (0..k).fold(1u64, |acc, i| acc * (n - i) / (i + 1))
}

/// `B_0..=B_m` in `xs[0] = x_1, .., xs[m-1] = x_m`.
pub fn complete_bell_sequence<T: BellRing>(xs: &[T]) -> Vec<T> {
    let mut b = vec![T::one()];
    for n in 0..xs.len() {
        let mut s = T::zero();
        for k in 0..=n {
            let c = T::from_count(binomial_u64(n as u64, k as u64));
            s = s + c * b[n - k].clone() * xs[k].clone();
        }
        b.push(s);
    }
    b
}

/// `B_m(x_1..x_m)` with `m = xs.len()`; the unit for `m = 0`.
pub fn complete_bell<T: BellRing>(xs: &[T]) -> T {
    complete_bell_sequence(xs).pop().expect("sequence is nonempty")
}

/// A subset of `{0, 1, .., 63}` naming the square-free monomial `ε_S`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EpsMonomial(pub u64);

impl EpsMonomial {
    pub const ONE: EpsMonomial = EpsMonomial(0);

    pub fn from_indices<I: IntoIterator<Item = usize>>(indices: I) -> Result<Self> {
        let mut mask = 0u64;
        for i in indices {
            if i >= 64 {
                return Err(Error::Overflow(format!("ε index {i} exceeds 63")));
            }
            if mask & (1 << i) != 0 {
                return Err(Error::Domain(format!("ε_{i} repeated in a square-free monomial")));
            }
            mask |= 1 << i;
        }
        Ok(EpsMonomial(mask))
    }

    pub fn indices(self) -> Vec<usize> {
        (0..64).filter(|i| self.0 & (1 << i) != 0).collect()
    }

    pub fn contains(self, i: usize) -> bool {
        i < 64 && self.0 & (1 << i) != 0
    }

    pub fn degree(self) -> u32 {
        self.0.count_ones()
    }

    /// Product modulo the squares of the generators.
    pub fn times(self, other: EpsMonomial) -> Option<EpsMonomial> {
        (self.0 & other.0 == 0).then_some(EpsMonomial(self.0 | other.0))
    }
}

impl std::fmt::Display for EpsMonomial {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.0 == 0 {
            return write!(f, "1");
        }
        let parts: Vec<String> = self.indices().iter().map(|i| format!("e{i}")).collect();
        write!(f, "{}", parts.join("*"))
    }
}

/// A polynomial in `ε_0, ε_1, ..` with every `ε_k^2 = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsPoly<C> {
    terms: BTreeMap<EpsMonomial, C>,
}

impl<C: Clone + Zero + Add<Output = C> + Mul<Output = C>> EpsPoly<C> {
    pub fn zero() -> Self {
        EpsPoly { terms: BTreeMap::new() }
    }

    pub fn constant(c: C) -> Self {
        Self::monomial(EpsMonomial::ONE, c)
    }

    pub fn monomial(m: EpsMonomial, c: C) -> Self {
        let mut p = Self::zero();
        p.add_term(m, c);
        p
    }

    /// `1 + ε_i`-style building block: `ε_i` with coefficient `c`.
    pub fn eps(i: usize, c: C) -> Result<Self> {
        Ok(Self::monomial(EpsMonomial::from_indices([i])?, c))
    }

    pub fn add_term(&mut self, m: EpsMonomial, c: C) {
        let v = match self.terms.remove(&m) {
            Some(old) => old + c,
            None => c,
        };
        if !v.is_zero() {
            self.terms.insert(m, v);
        }
    }

    pub fn coeff(&self, m: EpsMonomial) -> C {
        self.terms.get(&m).cloned().unwrap_or_else(C::zero)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&EpsMonomial, &C)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn map<D, F>(&self, f: F) -> EpsPoly<D>
    where
        D: Clone + Zero + Add<Output = D> + Mul<Output = D>,
        F: Fn(&C) -> D,
    {
        let mut out = EpsPoly::zero();
        for (m, c) in &self.terms {
            out.add_term(*m, f(c));
        }
        out
    }

    /// Product modulo the ideal generated by the squares `ε_k^2`.
    pub fn eps_multiply(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                if let Some(m) = ma.times(*mb) {
                    out.add_term(m, ca.clone() * cb.clone());
                }
            }
        }
        out
    }

    pub fn scale(&self, c: &C) -> Self {
        self.map(|v| c.clone() * v.clone())
    }
}

impl<C: Clone + Zero + Add<Output = C> + Mul<Output = C>> Add for EpsPoly<C> {
    type Output = EpsPoly<C>;
    fn add(mut self, rhs: Self) -> Self {
        for (m, c) in rhs.terms {
            self.add_term(m, c);
        }
        self
    }
}

impl<C: Clone + Zero + Add<Output = C> + Mul<Output = C>> Mul for &EpsPoly<C> {
    type Output = EpsPoly<C>;
    fn mul(self, rhs: Self) -> EpsPoly<C> {
        self.eps_multiply(rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;

    #[test]
    fn partition_counts() {
        assert_eq!(enumerate_partitions(&[]).unwrap().len(), 1);
        assert!(enumerate_partitions(&[]).unwrap()[0].is_empty());
        assert_eq!(enumerate_partitions(&[1, 2]).unwrap().len(), 2);
        assert_eq!(enumerate_partitions(&[1, 2, 3, 4]).unwrap().len(), 15);
        let bell = bell_numbers(10);
        for (n, b) in bell.iter().enumerate() {
            let g: Vec<usize> = (1..=n).collect();
            assert_eq!(enumerate_partitions(&g).unwrap().len() as u128, *b);
        }
        assert!(enumerate_partitions(&(0..13).collect::<Vec<_>>()).is_err());
    }

    #[test]
    fn partitions_are_canonical_and_distinct() {
        let ps = enumerate_partitions(&[3, 1, 2, 4]).unwrap();
        let mut seen = std::collections::BTreeSet::new();
        for p in &ps {
            assert_eq!(p.ground_set(), vec![1, 2, 3, 4]);
            for w in p.blocks().windows(2) {
                assert!(w[0][0] < w[1][0]);
            }
            assert!(seen.insert(p.clone()));
        }
    }

    #[test]
    fn permutation_grouping() {
        for n in 0..=6 {
            let g: Vec<usize> = (1..=n).collect();
            let groups = enumerate_permutations_with_partition(&g).unwrap();
            let total: usize = groups.values().map(Vec::len).sum();
            assert_eq!(total as u64, (1..=n as u64).product::<u64>());
            for (p, perms) in &groups {
                assert_eq!(perms.len() as u64, p.cyclic_orderings());
                for c in perms {
                    let expected: i32 = p.blocks().iter().map(|b| if b.len() % 2 == 1 { 1 } else { -1 }).product();
                    assert_eq!(c.sign as i32, expected);
                }
            }
        }
        let groups = enumerate_permutations_with_partition(&[1, 2, 3]).unwrap();
        let full = SetPartition::new(vec![vec![1, 2, 3]]).unwrap();
        assert_eq!(groups[&full].len(), 2);
        assert!(groups[&full].iter().all(|c| c.sign == 1));
    }

    #[test]
    fn bell_polynomials() {
        let x: Vec<BigRational> = [2, 3, 5].iter().map(|v| BigRational::from_integer(BigInt::from(*v))).collect();
        assert_eq!(complete_bell::<BigRational>(&[]), BigRational::one());
        assert_eq!(complete_bell(&x[..1]), x[0].clone());
        assert_eq!(complete_bell(&x[..2]), BigRational::from_integer(BigInt::from(4 + 3)));
        assert_eq!(complete_bell(&x), BigRational::from_integer(BigInt::from(8 + 18 + 5)));
    }

    #[test]
    fn eps_products() {
        let e1 = EpsPoly::eps(1, 2.0).unwrap();
        let e2 = EpsPoly::eps(2, 3.0).unwrap();
        assert!(e1.eps_multiply(&e1).is_empty());
        let p = e1.eps_multiply(&e2);
        assert_eq!(p.coeff(EpsMonomial::from_indices([1, 2]).unwrap()), 6.0);
        let one_plus = |i| EpsPoly::constant(1.0) + EpsPoly::eps(i, 1.0).unwrap();
        let prod = &(&one_plus(1) * &one_plus(2)) * &one_plus(3);
        assert_eq!(prod.len(), 8);
        assert!(prod.terms().all(|(_, c)| *c == 1.0));
    }
}
