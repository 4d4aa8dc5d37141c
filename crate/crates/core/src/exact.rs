//! Brute-force semivalues by full subset enumeration.
//!
//! Every subset of the valued points is evaluated once (2^n utility calls,
//! capped at n = 20), marginal contributions are averaged per cardinality,
//! and the semivalue is their normalized-weight mean. This engine is the
//! oracle the Monte-Carlo estimator is checked against.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::PointId;
use crate::error::{Error, Result};
use crate::game::Utility;
use crate::weights::WeightScheme;

/// Enumeration guard: 2^20 utility evaluations is the practical ceiling.
pub const EXACT_MAX_POINTS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ValueMode {
    Exact,
    Mc,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueEntry {
    pub id: PointId,
    pub value: f64,
}

/// Per-point values under one weight scheme.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueVector {
    pub mode: ValueMode,
    pub scheme: WeightScheme,
    pub entries: Vec<ValueEntry>,
}

impl ValueVector {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn value_of(&self, id: PointId) -> Option<f64> {
        self.entries.iter().find(|e| e.id == id).map(|e| e.value)
    }

    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.value).collect()
    }

    /// Entries ordered by ascending value, ties by ascending id.
    pub fn sorted_ascending(&self) -> Vec<ValueEntry> {
        let mut out = self.entries.clone();
        out.sort_by(|a, b| a.value.total_cmp(&b.value).then(a.id.cmp(&b.id)));
        out
    }
}

/// Mean, sample variance, and count of the marginal summands
/// `U(S + z) - U(S)` at one cardinality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CardinalityStats {
    pub mean: f64,
    pub variance: f64,
    pub count: u64,
}

/// Per-cardinality marginal statistics for one point; index i holds j = i+1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalProfile {
    pub id: PointId,
    pub per_cardinality: Vec<CardinalityStats>,
}

impl MarginalProfile {
    pub fn mean_at(&self, j: usize) -> f64 {
        self.per_cardinality[j - 1].mean
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EfficiencyCheck {
    /// Sum of Beta(1,1) (data Shapley) values over all points.
    pub value_sum: f64,
    /// U(D) - U(empty).
    pub total_gain: f64,
    pub gap: f64,
}

#[derive(Default, Clone, Copy)]
struct Welford {
    mean: f64,
    m2: f64,
    count: u64,
}

impl Welford {
    fn update(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }
}

fn check_size(n: usize) -> Result<()> {
    if n > EXACT_MAX_POINTS {
        return Err(Error::SizeLimit {
            n,
            max: EXACT_MAX_POINTS,
        });
    }
    if n == 0 {
        return Err(Error::InvalidParameter("empty game".into()));
    }
    Ok(())
}

fn ids_of_mask(ids: &[PointId], mask: u64, scratch: &mut Vec<PointId>) {
    scratch.clear();
    let mut m = mask;
    while m != 0 {
        let b = m.trailing_zeros() as usize;
        scratch.push(ids[b]);
        m &= m - 1;
    }
}

/// U over every subset bitmask, evaluated in parallel; entry `m` is the
/// utility of the subset whose bits select positions in `u.ids()` order.
fn utility_table<U: Utility + ?Sized>(u: &U) -> Result<Vec<f64>> {
    let n = u.n();
    let ids = u.ids();
    (0u64..1 << n)
        .into_par_iter()
        .map(|mask| {
            let mut subset = Vec::with_capacity(n);
            ids_of_mask(ids, mask, &mut subset);
            u.eval(&subset)
        })
        .collect()
}

/// Insert a zero bit at `pos`, shifting higher bits up; maps a mask over the
/// n-1 "other" positions onto the full n-position mask.
fn expand_mask(compact: u64, pos: usize) -> u64 {
    let low = compact & ((1u64 << pos) - 1);
    let high = compact >> pos;
    low | (high << (pos + 1))
}

/// Iterate all masks of `width` bits with exactly `ones` bits set.
fn for_each_combination(width: usize, ones: usize, mut f: impl FnMut(u64)) {
    if ones == 0 {
        f(0);
        return;
    }
    if ones > width {
        return;
    }
    let limit = 1u64 << width;
    let mut c = (1u64 << ones) - 1;
    while c < limit {
        f(c);
        // Gosper's hack: next mask with the same popcount
        let u = c & c.wrapping_neg();
        let v = c + u;
        if v >= limit {
            break;
        }
        c = v | (((v ^ c) / u) >> 2);
    }
}

fn position_of<U: Utility + ?Sized>(u: &U, id: PointId) -> Result<usize> {
    u.ids()
        .iter()
        .position(|&x| x == id)
        .ok_or(Error::UnknownPoint(id.0))
}

/// Exact marginal contribution of `id` at cardinality `j`: the average of
/// `U(S + z) - U(S)` over all subsets S of the other points with |S| = j-1.
pub fn marginal_exact<U: Utility + ?Sized>(u: &U, id: PointId, j: usize) -> Result<f64> {
    let n = u.n();
    check_size(n)?;
    if j < 1 || j > n {
        return Err(Error::InvalidParameter(format!(
            "cardinality j = {j} out of range [1, {n}]"
        )));
    }
    let pos = position_of(u, id)?;
    let ids = u.ids();
    let bit = 1u64 << pos;
    let mut acc = Welford::default();
    let mut scratch = Vec::with_capacity(n);
    let mut err = None;
    for_each_combination(n - 1, j - 1, |compact| {
        if err.is_some() {
            return;
        }
        let mask = expand_mask(compact, pos);
        ids_of_mask(ids, mask, &mut scratch);
        let without = match u.eval(&scratch) {
            Ok(v) => v,
            Err(e) => {
                err = Some(e);
                return;
            }
        };
        ids_of_mask(ids, mask | bit, &mut scratch);
        let with = match u.eval(&scratch) {
            Ok(v) => v,
            Err(e) => {
                err = Some(e);
                return;
            }
        };
        acc.update(with - without);
    });
    if let Some(e) = err {
        return Err(e);
    }
    Ok(acc.mean)
}

fn profile_from_table(table: &[f64], n: usize, pos: usize, id: PointId) -> MarginalProfile {
    let bit = 1u64 << pos;
    let mut acc = vec![Welford::default(); n];
    for mask in 0..table.len() as u64 {
        if mask & bit == 0 {
            let j = (mask.count_ones() as usize) + 1;
            acc[j - 1].update(table[(mask | bit) as usize] - table[mask as usize]);
        }
    }
    MarginalProfile {
        id,
        per_cardinality: acc
            .into_iter()
            .map(|w| CardinalityStats {
                mean: w.mean,
                variance: w.variance(),
                count: w.count,
            })
            .collect(),
    }
}

/// Exhaustive marginal profiles for every valued point.
pub fn marginal_profiles<U: Utility + ?Sized>(u: &U) -> Result<Vec<MarginalProfile>> {
    let n = u.n();
    check_size(n)?;
    let table = utility_table(u)?;
    let ids = u.ids();
    Ok((0..n)
        .into_par_iter()
        .map(|pos| profile_from_table(&table, n, pos, ids[pos]))
        .collect())
}

/// Semivalue of every point from a stored profile:
/// `psi = (1/n) * sum_j w~(j) * mean_j`.
pub fn semivalue_from_profile(profile: &MarginalProfile, scheme: &WeightScheme) -> f64 {
    let n = scheme.n() as f64;
    profile
        .per_cardinality
        .iter()
        .zip(scheme.normalized())
        .map(|(s, w)| w * s.mean)
        .sum::<f64>()
        / n
}

/// Exact semivalue under `scheme` by full enumeration.
pub fn semivalue_exact<U: Utility + ?Sized>(u: &U, scheme: &WeightScheme) -> Result<ValueVector> {
    let n = u.n();
    check_size(n)?;
    if scheme.n() != n {
        return Err(Error::InvalidParameter(format!(
            "scheme is over {} cardinalities, game has {n} points",
            scheme.n()
        )));
    }
    let profiles = marginal_profiles(u)?;
    let entries = profiles
        .iter()
        .map(|p| ValueEntry {
            id: p.id,
            value: semivalue_from_profile(p, scheme),
        })
        .collect();
    Ok(ValueVector {
        mode: ValueMode::Exact,
        scheme: scheme.clone(),
        entries,
    })
}

/// Data-Shapley efficiency: the value sum against U(D) - U(empty).
pub fn shapley_efficiency_check<U: Utility + ?Sized>(u: &U) -> Result<EfficiencyCheck> {
    let n = u.n();
    check_size(n)?;
    let scheme = WeightScheme::data_shapley(n)?;
    let values = semivalue_exact(u, &scheme)?;
    let value_sum = values.entries.iter().map(|e| e.value).sum::<f64>();
    let full = u.eval(u.ids())?;
    let empty = u.eval(&[])?;
    let total_gain = full - empty;
    Ok(EfficiencyCheck {
        value_sum,
        total_gain,
        gap: (value_sum - total_gain).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::TableUtility;

    fn ids(n: usize) -> Vec<PointId> {
        (0..n as u64).map(PointId).collect()
    }

    #[test]
    fn last_cardinality_is_leave_one_out() {
        let g = TableUtility::random_game(7, 42).unwrap();
        let full: u64 = (1 << 7) - 1;
        for pos in 0..7u64 {
            let id = PointId(pos);
            let m = marginal_exact(&g, id, 7).unwrap();
            let want = g.value_at_mask(full) - g.value_at_mask(full & !(1 << pos));
            assert!((m - want).abs() < 1e-15);
        }
    }

    #[test]
    fn constant_utility_has_zero_marginals() {
        let g = TableUtility::from_fn(ids(6), |_| 3.25).unwrap();
        for j in 1..=6 {
            assert_eq!(marginal_exact(&g, PointId(2), j).unwrap(), 0.0);
        }
    }

    #[test]
    fn additive_game_marginals_equal_point_worth() {
        // U(S) = sum of per-point worths; every marginal equals the worth.
        let worths = [0.3, -1.2, 2.0, 0.75, -0.1, 1.5];
        let g = TableUtility::from_fn(ids(6), |mask| {
            (0..6)
                .filter(|b| mask >> b & 1 == 1)
                .map(|b| worths[b])
                .sum()
        })
        .unwrap();
        for (pos, &w) in worths.iter().enumerate() {
            for j in 1..=6 {
                let m = marginal_exact(&g, PointId(pos as u64), j).unwrap();
                assert!((m - w).abs() < 1e-12, "pos {pos} j {j}: {m} vs {w}");
            }
        }
    }

    #[test]
    fn two_point_additive_game_shapley() {
        // U(0)=0, U({a})=1, U({b})=3, U({a,b})=4
        let g = TableUtility::from_fn(ids(2), |mask| match mask {
            0b00 => 0.0,
            0b01 => 1.0,
            0b10 => 3.0,
            _ => 4.0,
        })
        .unwrap();
        let scheme = WeightScheme::data_shapley(2).unwrap();
        let v = semivalue_exact(&g, &scheme).unwrap();
        assert!((v.value_of(PointId(0)).unwrap() - 1.0).abs() < 1e-15);
        assert!((v.value_of(PointId(1)).unwrap() - 3.0).abs() < 1e-15);

        let check = shapley_efficiency_check(&g).unwrap();
        assert!((check.value_sum - 4.0).abs() < 1e-15);
        assert!((check.total_gain - 4.0).abs() < 1e-15);
        assert!(check.gap < 1e-15);
    }

    #[test]
    fn loo_last_scheme_reduces_to_leave_one_out() {
        let g = TableUtility::random_game(6, 7).unwrap();
        let scheme = WeightScheme::loo_last(6).unwrap();
        let v = semivalue_exact(&g, &scheme).unwrap();
        let full: u64 = (1 << 6) - 1;
        for pos in 0..6u64 {
            let want = g.value_at_mask(full) - g.value_at_mask(full & !(1 << pos));
            let got = v.value_of(PointId(pos)).unwrap();
            assert!((got - want).abs() < 1e-12, "pos {pos}: {got} vs {want}");
        }
    }

    #[test]
    fn efficiency_gap_on_random_game() {
        let g = TableUtility::random_game(8, 5).unwrap();
        let check = shapley_efficiency_check(&g).unwrap();
        assert!(check.gap <= 1e-9, "gap = {}", check.gap);

        let constant = TableUtility::from_fn(ids(5), |_| 1.0).unwrap();
        let check = shapley_efficiency_check(&constant).unwrap();
        assert_eq!(check.value_sum, 0.0);
        assert_eq!(check.gap, 0.0);
    }

    #[test]
    fn profile_reproduces_semivalue() {
        let g = TableUtility::random_game(7, 9).unwrap();
        let scheme =
            WeightScheme::beta(7, crate::weights::BetaParams::new(4.0, 1.0).unwrap()).unwrap();
        let direct = semivalue_exact(&g, &scheme).unwrap();
        let profiles = marginal_profiles(&g).unwrap();
        for (p, e) in profiles.iter().zip(&direct.entries) {
            let recomputed = semivalue_from_profile(p, &scheme);
            assert!((recomputed - e.value).abs() <= 1e-12);
        }
    }

    #[test]
    fn size_limit_enforced() {
        struct Big;
        impl Utility for Big {
            fn ids(&self) -> &[PointId] {
                static IDS: [PointId; 21] = {
                    let mut a = [PointId(0); 21];
                    let mut i = 0;
                    while i < 21 {
                        a[i] = PointId(i as u64);
                        i += 1;
                    }
                    a
                };
                &IDS
            }
            fn eval(&self, _subset: &[PointId]) -> crate::error::Result<f64> {
                Ok(0.0)
            }
        }
        assert!(matches!(
            semivalue_exact(&Big, &WeightScheme::data_shapley(21).unwrap()),
            Err(Error::SizeLimit { n: 21, max: 20 })
        ));
    }

    #[test]
    fn profile_counts_match_binomials() {
        let n = 7;
        let g = TableUtility::random_game(n, 4).unwrap();
        let profiles = marginal_profiles(&g).unwrap();
        let binomial = |n: u64, k: u64| -> u64 {
            (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
        };
        for p in &profiles {
            for (i, s) in p.per_cardinality.iter().enumerate() {
                let want = binomial(n as u64 - 1, i as u64);
                assert_eq!(s.count, want, "id {}, j = {}", p.id, i + 1);
                assert!(s.variance >= 0.0);
            }
        }
    }

    #[test]
    fn combination_enumeration_counts() {
        let mut count = 0u64;
        for_each_combination(10, 4, |_| count += 1);
        assert_eq!(count, 210); // C(10, 4)
        let mut count = 0u64;
        for_each_combination(6, 0, |_| count += 1);
        assert_eq!(count, 1);
        let mut count = 0u64;
        for_each_combination(6, 6, |m| {
            assert_eq!(m, 0b111111);
            count += 1;
        });
        assert_eq!(count, 1);
    }

    #[test]
    fn expand_mask_inserts_hole() {
        assert_eq!(expand_mask(0b101, 1), 0b1001);
        assert_eq!(expand_mask(0b111, 0), 0b1110);
        assert_eq!(expand_mask(0b11, 3), 0b11);
        assert_eq!(expand_mask(0b1100, 2), 0b11000);
        assert_eq!(expand_mask(0, 5), 0);
    }
}
