use serde::{Deserialize, Serialize};

use super::{backward_orbit_with, ExpandingPolynomial, Limits};
use crate::{Error, Result};

/// A closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        debug_assert!(lo <= hi, "interval endpoints out of order: {lo} > {hi}");
        Interval { lo, hi }
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_degenerate(&self) -> bool {
        !(self.hi > self.lo)
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    pub fn intersection(&self, other: &Interval) -> Option<Interval> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some(Interval { lo, hi })
    }

    pub fn distance_to(&self, x: f64) -> f64 {
        if x < self.lo {
            self.lo - x
        } else if x > self.hi {
            x - self.hi
        } else {
            0.0
        }
    }
}

/// The level-`m` dynamical "dyadic" intervals and the gaps between them.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalSystem {
    level: usize,
    dyadic: Vec<Interval>,
    gaps: Vec<Interval>,
}

impl IntervalSystem {
    pub fn level(&self) -> usize {
        self.level
    }

    pub fn dyadic(&self) -> &[Interval] {
        &self.dyadic
    }

    pub fn gaps(&self) -> &[Interval] {
        &self.gaps
    }

    /// Index of the dyadic interval containing `x`, if any.
    pub fn locate(&self, x: f64) -> Option<usize> {
        let i = self.dyadic.partition_point(|iv| iv.hi < x);
        (i < self.dyadic.len() && self.dyadic[i].contains(x)).then_some(i)
    }

    /// Indices `first..=last` of the dyadic intervals meeting `range`.
    pub fn meeting(&self, range: &Interval) -> Option<(usize, usize)> {
        let first = self.dyadic.partition_point(|iv| iv.hi < range.lo);
        let end = self.dyadic.partition_point(|iv| iv.lo <= range.hi);
        (first < end).then(|| (first, end - 1))
    }

    /// Distance from `x` to the union of the dyadic intervals.
    pub fn distance_to_cover(&self, x: f64) -> f64 {
        let i = self.dyadic.partition_point(|iv| iv.hi < x);
        let mut best = f64::INFINITY;
        for j in [i.wrapping_sub(1), i] {
            if let Some(iv) = self.dyadic.get(j) {
                best = best.min(iv.distance_to(x));
            }
        }
        best
    }
}

/// Components of `(f^m)^{-1}([-1, 1])`, paired from the sorted preimages
/// of `±1`.
pub fn dyadic_intervals(p: &ExpandingPolynomial, m: usize) -> Result<IntervalSystem> {
    dyadic_intervals_with(p, m, &Limits::default())
}

pub(crate) fn dyadic_intervals_with(
    p: &ExpandingPolynomial,
    m: usize,
    limits: &Limits,
) -> Result<IntervalSystem> {
    if m == 0 {
        return Ok(IntervalSystem {
            level: 0,
            dyadic: vec![Interval::new(-1.0, 1.0)],
            gaps: vec![],
        });
    }
    let mut ends: Vec<f64> = backward_orbit_with(p, m, 1.0, limits)?.nodes().to_vec();
    ends.extend_from_slice(backward_orbit_with(p, m, -1.0, limits)?.nodes());
    ends.sort_by(|a, b| a.total_cmp(b));
    for w in ends.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::OverlappingIntervals { level: m, at: w[0] });
        }
    }
    let dyadic: Vec<Interval> = ends.chunks(2).map(|c| Interval::new(c[0], c[1])).collect();
    Ok(IntervalSystem {
        level: m,
        gaps: complementary_gaps(&dyadic),
        dyadic,
    })
}

fn complementary_gaps(dyadic: &[Interval]) -> Vec<Interval> {
    let mut gaps = Vec::with_capacity(dyadic.len() + 1);
    let mut left = -1.0;
    for iv in dyadic {
        if iv.lo > left {
            gaps.push(Interval::new(left, iv.lo));
        }
        left = iv.hi;
    }
    if left < 1.0 {
        gaps.push(Interval::new(left, 1.0));
    }
    gaps
}

/// `D_0, D_1, ..., D_n`.
pub fn dyadic_hierarchy(p: &ExpandingPolynomial, n: usize, limits: &Limits) -> Result<Vec<IntervalSystem>> {
    (0..=n).map(|m| dyadic_intervals_with(p, m, limits)).collect()
}

/// Result of the smallest-enclosing-dyadic-interval search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DyadicMatch {
    pub interval: Interval,
    pub level: usize,
    pub index: usize,
    /// `|I_0| / |I|`.
    pub ratio: f64,
}

/// Smallest interval of `D = ∪ D_m` containing `I_0 ∩ J_n(f)`, where `J_n(f)`
/// is the union of the deepest level in `systems`.
pub fn smallest_dyadic_containing(systems: &[IntervalSystem], i0: Interval) -> Result<DyadicMatch> {
    let deepest = systems
        .last()
        .ok_or_else(|| Error::InvalidParameter("empty interval hierarchy".into()))?;
    let (first, last) = deepest.meeting(&i0).ok_or(Error::EmptyCoverIntersection)?;
    let lo = i0.lo.max(deepest.dyadic[first].lo);
    let hi = i0.hi.min(deepest.dyadic[last].hi);
    for sys in systems.iter().rev() {
        if let Some(k) = sys.locate(lo) {
            let iv = sys.dyadic[k];
            if iv.contains(hi) {
                return Ok(DyadicMatch {
                    interval: iv,
                    level: sys.level,
                    index: k,
                    ratio: i0.len() / iv.len(),
                });
            }
        }
    }
    Err(Error::EmptyCoverIntersection)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};

    #[test]
    fn level_zero_is_the_unit_interval() {
        let p = ExpandingPolynomial::quadratic(3.0).unwrap();
        let d0 = dyadic_intervals(&p, 0).unwrap();
        assert_eq!(d0.dyadic(), &[Interval::new(-1.0, 1.0)]);
        assert!(d0.gaps().is_empty());
    }

    #[test]
    fn quadratic_level_one() {
        let p = ExpandingPolynomial::quadratic(3.0).unwrap();
        let d1 = dyadic_intervals(&p, 1).unwrap();
        assert_eq!(d1.dyadic().len(), 2);
        let s = d1.dyadic()[1].lo;
        let beta = (1.0 + 13f64.sqrt()) / 2.0;
        assert_abs_diff_eq!(s, ((3.0 / beta - 1.0) / beta).sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(d1.dyadic()[0].hi, -s, epsilon = 1e-15);
        assert_eq!(d1.gaps().len(), 1);
        assert_abs_diff_eq!(d1.gaps()[0].lo, -s, epsilon = 1e-15);
    }

    #[test]
    fn nesting_and_counts() {
        let p = ExpandingPolynomial::scaled_cheb3(3.0).unwrap();
        let h = dyadic_hierarchy(&p, 5, &Limits::default()).unwrap();
        for m in 0..5 {
            assert_eq!(h[m + 1].dyadic().len(), 3usize.pow(m as u32 + 1));
            for child in h[m + 1].dyadic() {
                let parents = h[m]
                    .dyadic()
                    .iter()
                    .filter(|iv| iv.contains_interval(child))
                    .count();
                assert_eq!(parents, 1);
            }
        }
    }

    #[test]
    fn branches_map_onto_parent_level() {
        let p = ExpandingPolynomial::quadratic(4.0).unwrap();
        let d3 = dyadic_intervals(&p, 3).unwrap();
        let d2 = dyadic_intervals(&p, 2).unwrap();
        for iv in d3.dyadic() {
            let (a, b) = (p.eval(iv.lo), p.eval(iv.hi));
            let image = Interval::new(a.min(b), a.max(b));
            let hit = d2.dyadic().iter().any(|j| {
                (j.lo - image.lo).abs() < 1e-12 && (j.hi - image.hi).abs() < 1e-12
            });
            assert!(hit, "{iv:?} -> {image:?}");
        }
    }

    #[test]
    fn length_times_derivative_is_comparable() {
        let p = ExpandingPolynomial::quadratic(3.0).unwrap();
        let n = 7;
        let sys = dyadic_intervals(&p, n).unwrap();
        let orbit = crate::polydyn::backward_orbit(&p, n, 0.0).unwrap();
        let products: Vec<f64> = (0..orbit.len())
            .map(|k| {
                let i = sys.locate(orbit.nodes()[k]).unwrap();
                sys.dyadic()[i].len() * orbit.log_abs_tprime()[k].exp()
            })
            .collect();
        let lo = products.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = products.iter().cloned().fold(0.0, f64::max);
        assert!(lo > 0.5 && hi < 4.0, "{lo} {hi}");
    }

    #[test]
    fn smallest_dyadic_examples() {
        let p = ExpandingPolynomial::quadratic(3.0).unwrap();
        let h = dyadic_hierarchy(&p, 4, &Limits::default()).unwrap();
        let m = smallest_dyadic_containing(&h, Interval::new(-1.0, 1.0)).unwrap();
        assert_eq!((m.level, m.ratio), (0, 1.0));
        let comp = h[4].dyadic()[5];
        let m = smallest_dyadic_containing(&h, comp).unwrap();
        assert_eq!(m.level, 4);
        assert_eq!(m.ratio, 1.0);
        let gap = h[1].gaps()[0];
        let inner = Interval::new(gap.lo + 0.1 * gap.len(), gap.hi - 0.1 * gap.len());
        assert_eq!(
            smallest_dyadic_containing(&h, inner),
            Err(Error::EmptyCoverIntersection)
        );
    }

    #[test]
    fn random_intervals_have_comparable_dyadic_hulls() {
        let p = ExpandingPolynomial::quadratic(3.0).unwrap();
        let mut min_ratio = Vec::new();
        for n in [4usize, 6, 8] {
            let h = dyadic_hierarchy(&p, n, &Limits::default()).unwrap();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
            let mut best = f64::INFINITY;
            let mut tried = 0;
            while tried < 1000 {
                let a: f64 = rng.random_range(-1.0..1.0);
                let b: f64 = rng.random_range(-1.0..1.0);
                let iv = Interval::new(a.min(b), a.max(b));
                if let Ok(m) = smallest_dyadic_containing(&h, iv) {
                    best = best.min(m.ratio);
                    tried += 1;
                }
            }
            min_ratio.push(best);
        }
        assert!(min_ratio.iter().all(|&r| r > 0.05), "{min_ratio:?}");
    }
}
