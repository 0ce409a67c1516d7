//! k-sparse permutations stored by their moved indices.
//!
//! A permutation `π` of `{0, …, n-1}` acts on vectors as the permutation
//! matrix `Π` with `Π[i, π⁻¹(i)] = 1`, so `(Πv)[π(j)] = v[j]`. Only the
//! pairs `(j, π(j))` with `π(j) ≠ j` are stored.

use std::cmp::Ordering;

use rand::seq::{index, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Largest class [`PermutationClass::enumerate`] will walk.
pub const ENUMERATION_LIMIT: u128 = 10_000_000;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawPermutation")]
pub struct SparsePermutation {
    n: usize,
    moved: Vec<(usize, usize)>,
}

#[derive(Deserialize)]
struct RawPermutation {
    n: usize,
    moved: Vec<(usize, usize)>,
}

impl TryFrom<RawPermutation> for SparsePermutation {
    type Error = Error;

    fn try_from(raw: RawPermutation) -> Result<Self> {
        SparsePermutation::from_moved(raw.n, raw.moved)
    }
}

impl SparsePermutation {
    pub fn identity(n: usize) -> Self {
        Self {
            n,
            moved: Vec::new(),
        }
    }

    /// The transposition swapping `a` and `b`.
    pub fn transposition(n: usize, a: usize, b: usize) -> Result<Self> {
        Self::from_moved(n, vec![(a, b), (b, a)])
    }

    /// Build from `(index, image)` pairs, in any order.
    pub fn from_moved(n: usize, mut moved: Vec<(usize, usize)>) -> Result<Self> {
        moved.sort_unstable();
        for w in moved.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::InvalidPermutation(format!(
                    "index {} listed twice",
                    w[0].0
                )));
            }
        }
        let mut images: Vec<usize> = Vec::with_capacity(moved.len());
        for &(i, j) in &moved {
            if i >= n || j >= n {
                return Err(Error::InvalidPermutation(format!(
                    "pair ({i}, {j}) out of range for n = {n}"
                )));
            }
            if i == j {
                return Err(Error::InvalidPermutation(format!(
                    "fixed point {i} listed as moved"
                )));
            }
            images.push(j);
        }
        images.sort_unstable();
        if !images.iter().eq(moved.iter().map(|(i, _)| i)) {
            return Err(Error::InvalidPermutation(
                "images do not permute the moved set".into(),
            ));
        }
        Ok(Self { n, moved })
    }

    /// Build from the full image map `images[i] = π(i)`.
    pub fn from_images(images: &[usize]) -> Result<Self> {
        let n = images.len();
        let mut seen = vec![false; n];
        for &j in images {
            if j >= n || std::mem::replace(&mut seen[j], true) {
                return Err(Error::InvalidPermutation(
                    "image map is not a bijection".into(),
                ));
            }
        }
        let moved = images
            .iter()
            .enumerate()
            .filter(|&(i, &j)| i != j)
            .map(|(i, &j)| (i, j))
            .collect();
        Ok(Self { n, moved })
    }

    /// Build from the source map `sources[i] = π⁻¹(i)`, i.e. row `i` of `ΠX`
    /// is row `sources[i]` of `X`.
    pub fn from_sources(sources: &[usize]) -> Result<Self> {
        Ok(Self::from_images(sources)?.inverse())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `(index, image)` pairs of the non-fixed points, sorted by index.
    pub fn moved(&self) -> &[(usize, usize)] {
        &self.moved
    }

    pub fn is_identity(&self) -> bool {
        self.moved.is_empty()
    }

    /// Hamming distance to the identity.
    pub fn hamming_distance(&self) -> usize {
        self.moved.len()
    }

    /// Number of indices where `self` and `other` disagree.
    pub fn distance(&self, other: &SparsePermutation) -> usize {
        assert_eq!(self.n, other.n, "permutations of different sizes");
        let a = self.images();
        let b = other.images();
        a.iter().zip(&b).filter(|(x, y)| x != y).count()
    }

    pub fn image(&self, i: usize) -> usize {
        match self.moved.binary_search_by_key(&i, |&(a, _)| a) {
            Ok(pos) => self.moved[pos].1,
            Err(_) => i,
        }
    }

    pub fn images(&self) -> Vec<usize> {
        let mut out: Vec<usize> = (0..self.n).collect();
        for &(i, j) in &self.moved {
            out[i] = j;
        }
        out
    }

    /// `sources[i] = π⁻¹(i)`.
    pub fn sources(&self) -> Vec<usize> {
        let mut out: Vec<usize> = (0..self.n).collect();
        for &(i, j) in &self.moved {
            out[j] = i;
        }
        out
    }

    pub fn inverse(&self) -> Self {
        let mut moved: Vec<(usize, usize)> = self.moved.iter().map(|&(i, j)| (j, i)).collect();
        moved.sort_unstable();
        Self { n: self.n, moved }
    }

    /// `self ∘ other`, acting as `other` first.
    pub fn compose(&self, other: &SparsePermutation) -> Self {
        assert_eq!(self.n, other.n, "permutations of different sizes");
        let images: Vec<usize> = other.images().into_iter().map(|j| self.image(j)).collect();
        Self::from_images(&images).expect("composition of bijections")
    }

    /// `Πv`.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                actual: v.len(),
            });
        }
        let mut out = v.to_vec();
        for &(i, j) in &self.moved {
            out[j] = v[i];
        }
        Ok(out)
    }

    /// `ΠX`.
    pub fn apply_rows(&self, x: &Matrix) -> Result<Matrix> {
        if x.rows() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                actual: x.rows(),
            });
        }
        Ok(x.select_rows(&self.sources()))
    }

    /// Embed into a larger index set, fixing the extra trailing indices.
    pub fn extend(&self, n: usize) -> Self {
        assert!(n >= self.n);
        Self {
            n,
            moved: self.moved.clone(),
        }
    }

    /// Dense `n × n` permutation matrix.
    pub fn to_dense(&self) -> Matrix {
        let n = self.n;
        let mut data = vec![0.0; n * n];
        for (i, s) in self.sources().into_iter().enumerate() {
            data[i * n + s] = 1.0;
        }
        Matrix::new(n, n, data).expect("n >= 1")
    }
}

/// Enumeration order: fewer moved indices first, then the moved-pair list
/// lexicographically.
impl Ord for SparsePermutation {
    fn cmp(&self, other: &Self) -> Ordering {
        self.n
            .cmp(&other.n)
            .then(self.moved.len().cmp(&other.moved.len()))
            .then_with(|| self.moved.cmp(&other.moved))
    }
}

impl PartialOrd for SparsePermutation {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// `P(n, k)`: permutations of `n` indices moving at most `k` of them.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PermutationClass {
    pub n: usize,
    pub k: usize,
}

impl PermutationClass {
    pub fn new(n: usize, k: usize) -> Result<Self> {
        if n == 0 || k > n {
            return Err(Error::Domain(format!(
                "need 1 <= n and k <= n, got n = {n}, k = {k}"
            )));
        }
        Ok(Self { n, k })
    }

    pub fn contains(&self, p: &SparsePermutation) -> bool {
        p.n() == self.n && p.hamming_distance() <= self.k
    }

    /// `|P(n, k)| = Σ_{d ≤ k} C(n, d) D_d`.
    pub fn count(&self) -> Result<u128> {
        let mut total: u128 = 0;
        for d in 0..=self.k {
            let term = binomial(self.n, d)?
                .checked_mul(derangements(d)?)
                .ok_or(Error::Overflow)?;
            total = total.checked_add(term).ok_or(Error::Overflow)?;
        }
        Ok(total)
    }

    /// Every member exactly once, in [`SparsePermutation`]'s order.
    pub fn enumerate(&self) -> Result<ClassIter> {
        self.enumerate_with_limit(ENUMERATION_LIMIT)
    }

    pub fn enumerate_with_limit(&self, limit: u128) -> Result<ClassIter> {
        let count = self.count().unwrap_or(u128::MAX);
        if count > limit {
            return Err(Error::ClassTooLarge {
                n: self.n,
                k: self.k,
                count,
                limit,
            });
        }
        Ok(ClassIter {
            class: *self,
            next_level: 0,
            level: Vec::new().into_iter(),
        })
    }

    /// Uniform draw among the members moving exactly `exact_d` indices.
    pub fn random_with_distance<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        exact_d: usize,
    ) -> Result<SparsePermutation> {
        if exact_d == 1 || exact_d > self.k {
            return Err(Error::InvalidDistance {
                n: self.n,
                k: self.k,
                distance: exact_d,
            });
        }
        if exact_d == 0 {
            return Ok(SparsePermutation::identity(self.n));
        }
        let mut subset = index::sample(rng, self.n, exact_d).into_vec();
        subset.sort_unstable();
        let mut images = subset.clone();
        loop {
            images.shuffle(rng);
            if images.iter().zip(&subset).all(|(a, b)| a != b) {
                break;
            }
        }
        SparsePermutation::from_moved(self.n, subset.into_iter().zip(images).collect())
    }
}

pub struct ClassIter {
    class: PermutationClass,
    next_level: usize,
    level: std::vec::IntoIter<SparsePermutation>,
}

impl Iterator for ClassIter {
    type Item = SparsePermutation;

    fn next(&mut self) -> Option<SparsePermutation> {
        loop {
            if let Some(p) = self.level.next() {
                return Some(p);
            }
            let d = self.next_level;
            if d > self.class.k {
                return None;
            }
            self.next_level += 1;
            if d == 1 {
                continue;
            }
            self.level = permutations_with_distance(self.class.n, d).into_iter();
        }
    }
}

/// All permutations of `n` moving exactly `d` indices, sorted.
fn permutations_with_distance(n: usize, d: usize) -> Vec<SparsePermutation> {
    if d == 0 {
        return vec![SparsePermutation::identity(n)];
    }
    let mut out = Vec::new();
    let mut subset: Vec<usize> = (0..d).collect();
    loop {
        let mut images = vec![usize::MAX; d];
        let mut used = vec![false; d];
        derangements_of(&subset, 0, &mut images, &mut used, &mut |imgs| {
            out.push(SparsePermutation {
                n,
                moved: subset.iter().copied().zip(imgs.iter().copied()).collect(),
            });
        });
        // next combination
        let mut i = d;
        loop {
            if i == 0 {
                out.sort();
                return out;
            }
            i -= 1;
            if subset[i] < n - d + i {
                subset[i] += 1;
                for j in i + 1..d {
                    subset[j] = subset[j - 1] + 1;
                }
                break;
            }
        }
    }
}

fn derangements_of(
    subset: &[usize],
    pos: usize,
    images: &mut [usize],
    used: &mut [bool],
    emit: &mut dyn FnMut(&[usize]),
) {
    if pos == subset.len() {
        emit(images);
        return;
    }
    for c in 0..subset.len() {
        if used[c] || c == pos {
            continue;
        }
        used[c] = true;
        images[pos] = subset[c];
        derangements_of(subset, pos + 1, images, used, emit);
        used[c] = false;
    }
}

pub fn binomial(n: usize, k: usize) -> Result<u128> {
    if k > n {
        return Ok(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128).ok_or(Error::Overflow)? / (i as u128 + 1);
    }
    Ok(acc)
}

/// Number of fixed-point-free permutations of `m` elements.
pub fn derangements(m: usize) -> Result<u128> {
    let (mut prev, mut cur): (u128, u128) = (1, 0);
    if m == 0 {
        return Ok(1);
    }
    for i in 2..=m {
        let next = ((i - 1) as u128)
            .checked_mul(cur.checked_add(prev).ok_or(Error::Overflow)?)
            .ok_or(Error::Overflow)?;
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// All n! permutations as image maps (Heap's algorithm).
    fn all_images(n: usize) -> Vec<Vec<usize>> {
        fn heap(k: usize, a: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if k <= 1 {
                out.push(a.clone());
                return;
            }
            for i in 0..k {
                heap(k - 1, a, out);
                if k % 2 == 0 {
                    a.swap(i, k - 1);
                } else {
                    a.swap(0, k - 1);
                }
            }
        }
        let mut a: Vec<usize> = (0..n).collect();
        let mut out = Vec::new();
        heap(n, &mut a, &mut out);
        out
    }

    fn brute_count(n: usize, k: usize) -> usize {
        all_images(n)
            .iter()
            .filter(|im| im.iter().enumerate().filter(|(i, &j)| *i != j).count() <= k)
            .count()
    }

    #[test]
    fn hamming_examples() {
        assert_eq!(SparsePermutation::identity(10).hamming_distance(), 0);
        assert_eq!(
            SparsePermutation::transposition(10, 2, 5)
                .unwrap()
                .hamming_distance(),
            2
        );
        let cycle = SparsePermutation::from_moved(10, vec![(1, 4), (4, 7), (7, 1)]).unwrap();
        assert_eq!(cycle.hamming_distance(), 3);
    }

    #[test]
    fn apply_swap() {
        let p = SparsePermutation::transposition(3, 0, 1).unwrap();
        assert_eq!(p.apply(&[1.0, 2.0, 3.0]).unwrap(), vec![2.0, 1.0, 3.0]);
        assert_eq!(
            SparsePermutation::identity(3)
                .apply(&[1.0, 2.0, 3.0])
                .unwrap(),
            vec![1.0, 2.0, 3.0]
        );
        assert!(matches!(p.apply(&[1.0]), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn apply_matches_dense_matrix() {
        let p = SparsePermutation::from_moved(4, vec![(0, 2), (2, 3), (3, 0)]).unwrap();
        let v = [1.0, 2.0, 3.0, 4.0];
        let dense = p.to_dense().mul_vec(&v).unwrap();
        assert_eq!(dense, p.apply(&v).unwrap());
        let x = Matrix::new(4, 1, v.to_vec()).unwrap();
        assert_eq!(p.apply_rows(&x).unwrap().as_slice(), dense.as_slice());
    }

    #[test]
    fn invalid_constructions() {
        assert!(SparsePermutation::from_moved(3, vec![(0, 0)]).is_err());
        assert!(SparsePermutation::from_moved(3, vec![(0, 1)]).is_err());
        assert!(SparsePermutation::from_moved(3, vec![(0, 5), (5, 0)]).is_err());
        assert!(SparsePermutation::from_images(&[0, 0, 1]).is_err());
    }

    #[test]
    fn enumeration_examples() {
        let id: Vec<_> = PermutationClass::new(3, 0)
            .unwrap()
            .enumerate()
            .unwrap()
            .collect();
        assert_eq!(id, vec![SparsePermutation::identity(3)]);
        let c42: Vec<_> = PermutationClass::new(4, 2)
            .unwrap()
            .enumerate()
            .unwrap()
            .collect();
        assert_eq!(c42.len(), 7);
        assert!(c42[0].is_identity());
        assert_eq!(
            PermutationClass::new(5, 5)
                .unwrap()
                .enumerate()
                .unwrap()
                .count(),
            120
        );
    }

    #[test]
    fn enumeration_order_is_sorted_and_unique() {
        let all: Vec<_> = PermutationClass::new(6, 4)
            .unwrap()
            .enumerate()
            .unwrap()
            .collect();
        for w in all.windows(2) {
            assert!(w[0] < w[1]);
        }
    }

    #[test]
    fn count_matches_brute_force() {
        assert_eq!(PermutationClass::new(6, 3).unwrap().count().unwrap(), 56);
        assert_eq!(brute_count(6, 3), 56);
        for n in 1..=7 {
            for k in 0..=n {
                let class = PermutationClass::new(n, k).unwrap();
                let c = class.count().unwrap();
                assert_eq!(c as usize, brute_count(n, k), "n={n} k={k}");
                assert_eq!(c as usize, class.enumerate().unwrap().count());
            }
        }
    }

    #[test]
    fn derangement_numbers() {
        let expect = [1u128, 0, 1, 2, 9, 44, 265, 1854];
        for (m, &d) in expect.iter().enumerate() {
            assert_eq!(derangements(m).unwrap(), d);
        }
    }

    #[test]
    fn overflow_and_size_guards() {
        assert!(matches!(
            PermutationClass::new(200, 200).unwrap().count(),
            Err(Error::Overflow)
        ));
        assert!(matches!(
            PermutationClass::new(30, 8).unwrap().enumerate(),
            Err(Error::ClassTooLarge { .. })
        ));
    }

    #[test]
    fn random_draw_edge_cases() {
        let class = PermutationClass::new(10, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(class
            .random_with_distance(&mut rng, 0)
            .unwrap()
            .is_identity());
        assert!(matches!(
            class.random_with_distance(&mut rng, 1),
            Err(Error::InvalidDistance { .. })
        ));
        assert!(matches!(
            class.random_with_distance(&mut rng, 5),
            Err(Error::InvalidDistance { .. })
        ));
        for _ in 0..50 {
            let p = class.random_with_distance(&mut rng, 2).unwrap();
            assert_eq!(p.hamming_distance(), 2);
            assert_eq!(p, p.inverse());
        }
    }

    #[test]
    fn random_draw_is_uniform() {
        let class = PermutationClass::new(6, 3).unwrap();
        let support: Vec<_> = class
            .enumerate()
            .unwrap()
            .filter(|p| p.hamming_distance() == 3)
            .collect();
        assert_eq!(support.len(), 40);
        let mut counts = vec![0usize; support.len()];
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let draws = 10_000;
        for _ in 0..draws {
            let p = class.random_with_distance(&mut rng, 3).unwrap();
            counts[support.iter().position(|q| *q == p).unwrap()] += 1;
        }
        let expected = draws as f64 / 40.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // chi-square(39) upper 0.001 point
        assert!(chi2 < 72.05, "chi2 = {chi2}");
    }

    #[test]
    fn json_shape() {
        let p = SparsePermutation::transposition(5, 1, 3).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, r#"{"n":5,"moved":[[1,3],[3,1]]}"#);
        let back: SparsePermutation = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
        assert!(serde_json::from_str::<SparsePermutation>(r#"{"n":5,"moved":[[1,3]]}"#).is_err());
    }

    fn arb_perm() -> impl Strategy<Value = SparsePermutation> {
        (1usize..12).prop_flat_map(|n| {
            Just((0..n).collect::<Vec<usize>>())
                .prop_shuffle()
                .prop_map(|im| SparsePermutation::from_images(&im).unwrap())
        })
    }

    proptest! {
        #[test]
        fn apply_inverse_roundtrip(p in arb_perm(), seed in any::<u64>()) {
            let v: Vec<f64> = (0..p.n()).map(|i| (i as f64 + 0.5) * (seed % 97) as f64).collect();
            let back = p.inverse().apply(&p.apply(&v).unwrap()).unwrap();
            prop_assert_eq!(back, v);
            prop_assert_eq!(p.hamming_distance(), p.images().iter().enumerate().filter(|(i, &j)| *i != j).count());
        }

        #[test]
        fn apply_is_linear(p in arb_perm(), a in -10.0f64..10.0) {
            let v: Vec<f64> = (0..p.n()).map(|i| i as f64 * 0.25).collect();
            let w: Vec<f64> = (0..p.n()).map(|i| 1.0 - i as f64).collect();
            let combo: Vec<f64> = v.iter().zip(&w).map(|(x, y)| a * x + y).collect();
            let lhs = p.apply(&combo).unwrap();
            let pv = p.apply(&v).unwrap();
            let pw = p.apply(&w).unwrap();
            let rhs: Vec<f64> = pv.iter().zip(&pw).map(|(x, y)| a * x + y).collect();
            prop_assert_eq!(lhs, rhs);
        }

        #[test]
        fn composition_distance_is_subadditive(
            im in Just((0..9usize).collect::<Vec<_>>()).prop_shuffle(),
            im2 in Just((0..9usize).collect::<Vec<_>>()).prop_shuffle(),
        ) {
            let p = SparsePermutation::from_images(&im).unwrap();
            let q = SparsePermutation::from_images(&im2).unwrap();
            let pq = p.compose(&q);
            prop_assert!(pq.hamming_distance() <= p.hamming_distance() + q.hamming_distance());
            let v: Vec<f64> = (0..9).map(|i| i as f64).collect();
            prop_assert_eq!(pq.apply(&v).unwrap(), p.apply(&q.apply(&v).unwrap()).unwrap());
        }
    }
}
