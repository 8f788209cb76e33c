//! Box sequences and their deterministic and geometric stretches.

use rand::Rng;
use rayon::prelude::*;
use rand_distr::{Distribution as _, Geometric};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BoxLabel {
    S,
    M,
    Other,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoxSequence {
    labels: Vec<BoxLabel>,
}

impl BoxSequence {
    pub fn new(labels: Vec<BoxLabel>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::Domain("box sequence is empty".into()));
        }
        Ok(BoxSequence { labels })
    }

    /// Labels a walk trajectory by membership in S and M.
    pub fn from_trajectory(traj: &[usize], s: &[bool], m: &[bool]) -> Result<Self> {
        Self::new(
            traj.iter()
                .map(|&u| if s[u] { BoxLabel::S } else if m[u] { BoxLabel::M } else { BoxLabel::Other })
                .collect(),
        )
    }

    pub fn labels(&self) -> &[BoxLabel] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// ht: index of the first M-box.
    pub fn hitting_index(&self) -> Option<usize> {
        self.labels.iter().position(|&l| l == BoxLabel::M)
    }

    /// ct: index of the first S-box after ht.
    pub fn commute_index(&self) -> Option<usize> {
        let ht = self.hitting_index()?;
        self.labels[ht..].iter().position(|&l| l == BoxLabel::S).map(|i| ht + i)
    }

    /// Number of boxes with `label` in the inclusive range [a, b].
    pub fn count(&self, label: BoxLabel, a: usize, b: usize) -> usize {
        if a >= self.len() {
            return 0;
        }
        self.labels[a..=b.min(self.len() - 1)].iter().filter(|&&l| l == label).count()
    }
}

/// γ^{(r)}: every S-box becomes r_S copies, every M-box r_M copies.
pub fn stretch_deterministic(y: &BoxSequence, r_s: usize, r_m: usize) -> Result<BoxSequence> {
    if r_s == 0 || r_m == 0 {
        return Err(Error::Domain("holding times must be positive integers".into()));
    }
    let mut out = Vec::new();
    for &l in y.labels() {
        let k = match l {
            BoxLabel::S => r_s,
            BoxLabel::M => r_m,
            BoxLabel::Other => 1,
        };
        out.extend(std::iter::repeat(l).take(k));
    }
    BoxSequence::new(out)
}

/// Shifted geometric on {1, 2, …} with mean r.
pub fn sample_holding<R: Rng>(r: f64, rng: &mut R) -> Result<usize> {
    if !(r >= 1.0) || !r.is_finite() {
        return Err(Error::Domain(format!("holding time {r} must be ≥ 1")));
    }
    if r == 1.0 {
        return Ok(1);
    }
    let g = Geometric::new(1.0 / r).map_err(|e| Error::Domain(e.to_string()))?;
    Ok(1 + g.sample(rng) as usize)
}

/// y^{(r)}: every S/M-box becomes an independent shifted-geometric number of copies.
pub fn stretch_geometric<R: Rng>(y: &BoxSequence, r_s: f64, r_m: f64, rng: &mut R) -> Result<BoxSequence> {
    let mut out = Vec::new();
    for &l in y.labels() {
        let k = match l {
            BoxLabel::S => sample_holding(r_s, rng)?,
            BoxLabel::M => sample_holding(r_m, rng)?,
            BoxLabel::Other => 1,
        };
        out.extend(std::iter::repeat(l).take(k));
    }
    BoxSequence::new(out)
}

/// R = {1, 2, 4, …, 2^⌈log₂(14T)⌉}.
pub fn holding_set(horizon: usize) -> Vec<usize> {
    let top = (14.0 * horizon as f64).log2().ceil() as u32;
    (0..=top).map(|k| 1usize << k).collect()
}

/// (M-count in [0, 2T], S-count in [7T, 15T]) of γ^{(r)} without materializing it.
pub fn stretched_counts(y: &BoxSequence, r_s: usize, r_m: usize, horizon: usize) -> (usize, usize) {
    let overlap = |lo: usize, hi: usize, a: usize, b: usize| -> usize {
        let l = lo.max(a);
        let h = hi.min(b);
        if l <= h {
            h - l + 1
        } else {
            0
        }
    };
    let (m_lo, m_hi) = (0, 2 * horizon);
    let (s_lo, s_hi) = (7 * horizon, 15 * horizon);
    let mut pos = 0;
    let mut mc = 0;
    let mut sc = 0;
    for &l in y.labels() {
        let len = match l {
            BoxLabel::S => r_s,
            BoxLabel::M => r_m,
            BoxLabel::Other => 1,
        };
        match l {
            BoxLabel::M => mc += overlap(pos, pos + len - 1, m_lo, m_hi),
            BoxLabel::S => sc += overlap(pos, pos + len - 1, s_lo, s_hi),
            BoxLabel::Other => {}
        }
        pos += len;
        if pos > s_hi {
            break;
        }
    }
    (mc, sc)
}

/// Checks y₀ ∈ S, ct ≤ T and S_y[0, ht] = 1, naming the failed clause.
pub fn check_comb_hypotheses(y: &BoxSequence, horizon: usize) -> Result<()> {
    if horizon == 0 || horizon % 2 != 0 {
        return Err(Error::Precondition(format!("T = {horizon} must be a positive even integer")));
    }
    if y.labels()[0] != BoxLabel::S {
        return Err(Error::Precondition("y_0 ∉ S".into()));
    }
    let ht = y.hitting_index().ok_or_else(|| Error::Precondition("ct ≤ T fails: no M-box".into()))?;
    let ct = y
        .commute_index()
        .ok_or_else(|| Error::Precondition("ct ≤ T fails: no S-box after ht".into()))?;
    if ct > horizon {
        return Err(Error::Precondition(format!("ct ≤ T fails: ct = {ct} > {horizon}")));
    }
    let s_before = y.count(BoxLabel::S, 0, ht);
    if s_before != 1 {
        return Err(Error::Precondition(format!("S_y[0,ht] = 1 fails: found {s_before}")));
    }
    Ok(())
}

/// Some r_M ∈ R with M^{(r)}[0,2T] ≥ T/2 and S^{(r)}[7T,15T] ≥ T/4 for r_S = T/2.
pub fn find_good_rm(y: &BoxSequence, horizon: usize) -> Result<Option<usize>> {
    check_comb_hypotheses(y, horizon)?;
    let r_s = horizon / 2;
    Ok(holding_set(horizon).into_iter().find(|&r_m| {
        let (mc, sc) = stretched_counts(y, r_s, r_m, horizon);
        2 * mc >= horizon && 4 * sc >= horizon
    }))
}

/// Every sequence of length ≤ `max_len` meeting the hypotheses, checked for a
/// witness r_M. Returns (sequences checked, counterexamples).
pub fn exhaustive_comb_check(horizon: usize, max_len: usize) -> Result<(u64, u64)> {
    const LABELS: [BoxLabel; 3] = [BoxLabel::S, BoxLabel::M, BoxLabel::Other];
    let mut checked = 0u64;
    let mut bad = 0u64;
    for len in 1..=max_len {
        // first box is S by hypothesis; the rest is a base-3 code
        let total = 3u64.pow(len as u32 - 1);
        let (c, b) = (0..total)
            .into_par_iter()
            .map(|code| -> Result<(u64, u64)> {
                let mut v = vec![BoxLabel::S; len];
                let mut x = code;
                for slot in v.iter_mut().skip(1) {
                    *slot = LABELS[(x % 3) as usize];
                    x /= 3;
                }
                let y = BoxSequence::new(v)?;
                if check_comb_hypotheses(&y, horizon).is_err() {
                    return Ok((0, 0));
                }
                Ok((1, find_good_rm(&y, horizon)?.is_none() as u64))
            })
            .try_reduce(|| (0, 0), |a, b| Ok((a.0 + b.0, a.1 + b.1)))?;
        checked += c;
        bad += b;
    }
    Ok((checked, bad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::{interpolate_absorbing, ChainSampler};
    use crate::graph::build_chain;
    use crate::instances::three_path;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    use BoxLabel::{Other as O, M, S};

    fn seq(v: &[BoxLabel]) -> BoxSequence {
        BoxSequence::new(v.to_vec()).unwrap()
    }

    #[test]
    fn deterministic_example() {
        let y = seq(&[S, O, M, O, S]);
        let g = stretch_deterministic(&y, 2, 3).unwrap();
        assert_eq!(g, seq(&[S, S, O, M, M, M, O, S, S]));
        assert_eq!(g.hitting_index(), Some(3));
        assert_eq!(g.commute_index(), Some(7));
        assert_eq!(stretch_deterministic(&y, 1, 1).unwrap(), y);
        assert_eq!(g.count(M, 0, g.len()), 3 * y.count(M, 0, y.len()));
    }

    #[test]
    fn stretched_counts_match_materialized() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let len = rng.gen_range(1..14);
            let y = seq(&(0..len).map(|_| [S, M, O][rng.gen_range(0..3)]).collect::<Vec<_>>());
            let (rs, rm, t) = (rng.gen_range(1..5), rng.gen_range(1..9), 2 * rng.gen_range(1..5));
            let g = stretch_deterministic(&y, rs, rm).unwrap();
            let expect = (g.count(M, 0, 2 * t), g.count(S, 7 * t, 15 * t));
            assert_eq!(stretched_counts(&y, rs, rm, t), expect);
        }
    }

    #[test]
    fn geometric_unit_mean_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let y = seq(&[S, O, M, S]);
        assert_eq!(stretch_geometric(&y, 1.0, 1.0, &mut rng).unwrap(), y);
    }

    #[test]
    fn geometric_mean_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = 3.5;
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|_| sample_holding(r, &mut rng).unwrap() as f64).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!((mean - r).abs() < 3.0 * (var / n as f64).sqrt());
    }

    #[test]
    fn holding_time_matches_absorbing_walk() {
        // holding at the marked vertex of P(s), s = 1 − 1/r, vs shifted geometric(1/r)
        let r = 4.0;
        let c = build_chain(&three_path().graph).unwrap();
        let h = interpolate_absorbing(&c, &[2], 1.0 - 1.0 / r).unwrap();
        let sampler = ChainSampler::new(&h);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let trials = 50_000;
        let bins = 12;
        let mut counts = vec![0usize; bins];
        for _ in 0..trials {
            let mut k = 1;
            while sampler.step(2, &mut rng) == 2 {
                k += 1;
            }
            counts[(k - 1).min(bins - 1)] += 1;
        }
        let p = 1.0 / r;
        let mut chi2 = 0.0;
        for (i, &o) in counts.iter().enumerate() {
            let prob = if i + 1 < bins { (1.0 - p).powi(i as i32) * p } else { (1.0 - p).powi(i as i32) };
            let e = prob * trials as f64;
            chi2 += (o as f64 - e).powi(2) / e;
        }
        let crit = ChiSquared::new((bins - 1) as f64).unwrap().inverse_cdf(0.99);
        assert!(chi2 < crit, "chi2 {chi2} ≥ {crit}");
    }

    #[test]
    fn holding_set_size() {
        assert_eq!(holding_set(4), vec![1, 2, 4, 8, 16, 32, 64]);
        for t in [4, 8, 16, 30, 64] {
            assert_eq!(holding_set(t).len(), (14.0 * t as f64).log2().ceil() as usize + 1);
        }
    }

    #[test]
    fn find_good_rm_example() {
        let y = seq(&[S, M, S, O, O, O]);
        let r = find_good_rm(&y, 4).unwrap().unwrap();
        let (mc, sc) = stretched_counts(&y, 2, r, 4);
        assert!(mc >= 2 && sc >= 1);
    }

    #[test]
    fn find_good_rm_hypotheses() {
        let two_s = seq(&[S, S, M, S]);
        let e = find_good_rm(&two_s, 4).unwrap_err();
        assert!(e.to_string().contains("S_y[0,ht]"));
        assert!(find_good_rm(&seq(&[O, M, S]), 4).unwrap_err().to_string().contains("y_0"));
        assert!(find_good_rm(&seq(&[S, O, O, O, M, S]), 4).unwrap_err().to_string().contains("ct ≤ T"));
        assert!(find_good_rm(&seq(&[S, M, S]), 3).is_err());
    }

    #[test]
    fn random_sequences_always_have_witness() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for &t in &[4usize, 8, 16] {
            let mut done = 0;
            while done < 1000 {
                let len = rng.gen_range(3..=2 * t);
                let mut v: Vec<BoxLabel> = (0..len).map(|_| [S, M, O][rng.gen_range(0..3)]).collect();
                v[0] = S;
                let y = seq(&v);
                if check_comb_hypotheses(&y, t).is_err() {
                    continue;
                }
                assert!(find_good_rm(&y, t).unwrap().is_some(), "{v:?}");
                done += 1;
            }
        }
    }

    #[test]
    fn exhaustive_small_lengths() {
        let (checked, bad) = exhaustive_comb_check(4, 8).unwrap();
        assert_eq!(bad, 0);
        // sequences of length ≤ 8 with y_0 = S that meet the hypotheses, counted directly
        let mut direct = 0;
        for len in 1..=8u32 {
            for code in 0..3u64.pow(len - 1) {
                let mut v = vec![S];
                let mut x = code;
                for _ in 1..len {
                    v.push([S, M, O][(x % 3) as usize]);
                    x /= 3;
                }
                direct += check_comb_hypotheses(&seq(&v), 4).is_ok() as u64;
            }
        }
        assert_eq!(checked, direct);
        assert!(checked > 0);
    }
}
