//! Mean-Hamming (d-bar) estimation over growing windows, detection of
//! mean-asymptotic pairs, and greedy Hamming-ball covering of weighted word
//! sets.
//!
//! The limsup in the d-bar definition is not computable from finite data;
//! estimates report the full radius/average table and a limsup proxy — the
//! maximum windowed average over all radii at or beyond a cutoff `n0`.
//! Window averages use aligned half-open windows `[-r, r)` of 2r indices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::process::SamplePath;
use crate::words::Word;

/// Windowed mean-Hamming averages between two paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DbarEstimate {
    pub radii: Vec<i64>,
    pub averages: Vec<f64>,
    pub n0: i64,
    /// Max of `averages` over radii `>= n0`.
    pub limsup_proxy: f64,
}

impl DbarEstimate {
    /// CSV table with a `radius,average` header.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("radius,average\n");
        for (r, avg) in self.radii.iter().zip(&self.averages) {
            out.push_str(&format!("{r},{avg}\n"));
        }
        out
    }
}

/// Windowed disagreement averages `(1/2r) * #{i in [-r, r) : x_i != y_i}`
/// for each radius, with the limsup proxy over radii `>= n0`.
pub fn dbar_estimate(
    x: &SamplePath,
    y: &SamplePath,
    radii: &[i64],
    n0: i64,
) -> Result<DbarEstimate> {
    if x.alphabet() != y.alphabet() {
        return Err(Error::Parameter("paths over different alphabets".into()));
    }
    if radii.is_empty() {
        return Err(Error::Parameter("need at least one radius".into()));
    }
    if radii[0] <= 0 || radii.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Parameter("radii must be positive and strictly increasing".into()));
    }
    let max_radius = *radii.last().unwrap();
    for path in [x, y] {
        if path.lo() > -max_radius || path.hi() < max_radius - 1 {
            return Err(Error::Parameter(format!(
                "window [{}, {}] too small for radius {max_radius}",
                path.lo(),
                path.hi()
            )));
        }
    }
    if !radii.contains(&n0) && radii.iter().all(|&r| r < n0) {
        return Err(Error::Parameter(format!("no radius reaches the cutoff n0 = {n0}")));
    }

    let mut averages = Vec::with_capacity(radii.len());
    let mut disagreements = 0u64;
    let mut scanned = 0i64; // indices of [-r, r) already counted
    for &r in radii {
        // Extend the previous window [-scanned.., ..) to [-r, r).
        let prev = scanned;
        for i in (-r..-prev).chain(prev..r) {
            if x.get(i) != y.get(i) {
                disagreements += 1;
            }
        }
        scanned = r;
        averages.push(disagreements as f64 / (2 * r) as f64);
    }
    let limsup_proxy = radii
        .iter()
        .zip(&averages)
        .filter(|(&r, _)| r >= n0)
        .map(|(_, &a)| a)
        .fold(0.0f64, f64::max);
    Ok(DbarEstimate { radii: radii.to_vec(), averages, n0, limsup_proxy })
}

/// A candidate mean-asymptotic pair: distinct paths with a small d-bar proxy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticPair {
    pub first: usize,
    pub second: usize,
    pub estimate: DbarEstimate,
}

/// All unordered pairs of distinct paths whose limsup proxy is below
/// `threshold`, sorted by ascending proxy (ties by index).
pub fn find_mean_asymptotic_pairs(
    paths: &[SamplePath],
    radii: &[i64],
    n0: i64,
    threshold: f64,
) -> Result<Vec<AsymptoticPair>> {
    if paths.len() < 2 {
        return Err(Error::Parameter("need at least two paths".into()));
    }
    let max_radius = *radii.last().ok_or_else(|| Error::Parameter("empty radii".into()))?;
    let mut found = Vec::new();
    for i in 0..paths.len() {
        for j in i + 1..paths.len() {
            let estimate = dbar_estimate(&paths[i], &paths[j], radii, n0)?;
            let distinct = (-max_radius..max_radius)
                .any(|idx| paths[i].get(idx) != paths[j].get(idx));
            if distinct && estimate.limsup_proxy < threshold {
                found.push(AsymptoticPair { first: i, second: j, estimate });
            }
        }
    }
    found.sort_by(|a, b| {
        a.estimate
            .limsup_proxy
            .partial_cmp(&b.estimate.limsup_proxy)
            .expect("proxies are finite")
            .then(a.first.cmp(&b.first))
            .then(a.second.cmp(&b.second))
    });
    Ok(found)
}

/// One family of a Hamming-ball cover.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverFamily {
    pub center: Vec<u32>,
    pub members: Vec<Vec<u32>>,
}

/// A greedy partition of a weighted word set into Hamming balls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HammingCover {
    pub block_length: usize,
    pub radius: usize,
    pub families: Vec<CoverFamily>,
    /// Total input mass covered (all of it; families partition the input).
    pub coverage: f64,
    pub log2_family_count: f64,
}

impl HammingCover {
    pub fn family_count(&self) -> usize {
        self.families.len()
    }
}

fn hamming_distance(a: &Word, b: &Word) -> usize {
    a.symbols()
        .iter()
        .zip(b.symbols())
        .filter(|(x, y)| x != y)
        .count()
}

/// Greedy Hamming-ball cover: repeatedly take the uncovered word of highest
/// mass (ties lexicographic) as a center and absorb every uncovered word
/// within `radius` of it.
///
/// Greedy is illustrative, not optimal: minimum-size Hamming covering is
/// computationally hard.
pub fn hamming_ball_cover(members: &[(Word, f64)], radius: usize) -> Result<HammingCover> {
    if members.is_empty() {
        return Err(Error::Parameter("empty word set".into()));
    }
    let block_length = members[0].0.len();
    if members.iter().any(|(w, _)| w.len() != block_length) {
        return Err(Error::Validation("cover input mixes word lengths".into()));
    }
    if radius > block_length {
        return Err(Error::Parameter(format!(
            "radius {radius} exceeds word length {block_length}"
        )));
    }
    if members.iter().any(|(_, p)| !p.is_finite() || *p < 0.0) {
        return Err(Error::Validation("masses must be finite and non-negative".into()));
    }

    // Merge duplicate words, then order by descending mass / lexicographic.
    let mut merged: std::collections::BTreeMap<Word, f64> = std::collections::BTreeMap::new();
    for (word, p) in members {
        *merged.entry(word.clone()).or_insert(0.0) += p;
    }
    let mut ordered: Vec<(Word, f64)> = merged.into_iter().collect();
    ordered.sort_by(|(wa, pa), (wb, pb)| {
        pb.partial_cmp(pa).expect("masses are finite").then(wa.cmp(wb))
    });

    let mut covered = vec![false; ordered.len()];
    let mut families = Vec::new();
    let mut coverage = 0.0;
    for i in 0..ordered.len() {
        if covered[i] {
            continue;
        }
        let center = ordered[i].0.clone();
        let mut family: Vec<Word> = Vec::new();
        for (j, (word, p)) in ordered.iter().enumerate() {
            if !covered[j] && hamming_distance(&center, word) <= radius {
                covered[j] = true;
                coverage += p;
                family.push(word.clone());
            }
        }
        family.sort_unstable();
        families.push(CoverFamily {
            center: center.symbols().to_vec(),
            members: family.into_iter().map(|w| w.symbols().to_vec()).collect(),
        });
    }
    let log2_family_count = (families.len() as f64).log2();
    Ok(HammingCover { block_length, radius, families, coverage, log2_family_count })
}
