//! Shannon entropy (base-2 logarithms throughout), conditional entropy,
//! entropy rates, typical sets, chain-rule residuals, and the numerical
//! hypothesis checker for tree admission of conditioned block variables.
//!
//! Summation order is fixed (lexicographic over words, then atom order), so
//! every quantity here is reproducible bit for bit.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::process::{
    block_distribution, empirical_block_distribution, markov_stationary, BlockDistribution,
    ProcessModel,
};
use crate::words::{admits_full_binary_tree, Alphabet, Language, Word};

const MASS_TOL: f64 = 1e-9;

/// How an entropy value was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntropyMethod {
    Exact,
    Empirical,
}

/// A base-2 entropy in bits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EntropyValue {
    pub bits: f64,
    pub method: EntropyMethod,
    pub sample_size: Option<u64>,
}

impl EntropyValue {
    fn exact(bits: f64) -> Self {
        EntropyValue { bits, method: EntropyMethod::Exact, sample_size: None }
    }

    /// The same entropy in nats.
    pub fn nats(&self) -> f64 {
        self.bits * std::f64::consts::LN_2
    }
}

fn plogp_sum<I: Iterator<Item = f64>>(masses: I) -> f64 {
    let mut h = 0.0;
    for p in masses {
        if p > 0.0 {
            h -= p * p.log2();
        }
    }
    h
}

/// Entropy of a normalized masses iterator with total `total`.
fn entropy_of_masses<I: Iterator<Item = f64>>(masses: I, total: f64) -> f64 {
    // H(p/Z) = (sum p log2(1/p))/Z + log2 Z
    if total <= 0.0 {
        return 0.0;
    }
    plogp_sum(masses) / total + total.log2()
}

fn tagged(dist: &BlockDistribution, bits: f64) -> EntropyValue {
    EntropyValue {
        bits,
        method: if dist.sample_size().is_some() {
            EntropyMethod::Empirical
        } else {
            EntropyMethod::Exact
        },
        sample_size: dist.sample_size(),
    }
}

/// Shannon entropy of a distribution whose total mass is 1 (within `1e-9`).
///
/// Frequency tables yield plug-in estimates tagged empirical with their
/// sample size.
pub fn entropy(dist: &BlockDistribution) -> Result<EntropyValue> {
    if (dist.total_mass() - 1.0).abs() > MASS_TOL {
        return Err(Error::Validation(format!(
            "distribution has mass {}, expected 1; use entropy_normalized for sub-probability tables",
            dist.total_mass()
        )));
    }
    Ok(tagged(dist, plogp_sum(dist.masses())))
}

/// Entropy of the normalized law of a sub-probability table.
pub fn entropy_normalized(dist: &BlockDistribution) -> Result<EntropyValue> {
    if dist.total_mass() <= 0.0 {
        return Err(Error::Validation("cannot normalize zero-mass table".into()));
    }
    Ok(tagged(dist, entropy_of_masses(dist.masses(), dist.total_mass())))
}

/// Conditional entropy `H(W | F)` from a joint table: one map of joint
/// masses `p(f, w)` per atom `f`; the grand total must be 1.
pub fn conditional_entropy(joint_rows: &[BTreeMap<Word, f64>]) -> Result<EntropyValue> {
    let mut total = 0.0;
    for row in joint_rows {
        for &p in row.values() {
            if !p.is_finite() || p < 0.0 {
                return Err(Error::Validation(
                    "joint masses must be finite and non-negative".into(),
                ));
            }
            total += p;
        }
    }
    if (total - 1.0).abs() > MASS_TOL {
        return Err(Error::Validation(format!("joint table has mass {total}, expected 1")));
    }
    let mut h = 0.0;
    for row in joint_rows {
        let row_total: f64 = row.values().sum();
        if row_total > 0.0 {
            h += row_total * entropy_of_masses(row.values().copied(), row_total);
        }
    }
    Ok(EntropyValue::exact(h))
}

/// Entropy rate computation mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum RateMode {
    /// Closed form for i.i.d. and Markov models, with an exact
    /// block-entropy ladder up to `ladder_max`.
    Exact { ladder_max: usize },
    /// Plug-in estimates from one sample path of length `path_len`.
    Empirical { path_len: usize, ladder_max: usize, seed: u64 },
}

/// One row of the block-entropy ladder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateLadderRow {
    pub block_length: usize,
    /// `H(X_1^l)` in bits.
    pub block_entropy_bits: f64,
    /// `H(X_1^l) / l`, the per-symbol quotient.
    pub per_symbol_bits: f64,
    /// `H(X_1^l) - H(X_1^{l-1})`, the conditional-entropy increment; this is
    /// the extrapolated rate estimate.
    pub increment_bits: f64,
}

/// Entropy rate with its block-entropy ladder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub value: EntropyValue,
    pub ladder: Vec<RateLadderRow>,
}

fn ladder_from_block_entropies(entropies: &[f64]) -> Vec<RateLadderRow> {
    entropies
        .iter()
        .enumerate()
        .map(|(i, &h)| {
            let len = i + 1;
            let previous = if i == 0 { 0.0 } else { entropies[i - 1] };
            RateLadderRow {
                block_length: len,
                block_entropy_bits: h,
                per_symbol_bits: h / len as f64,
                increment_bits: h - previous,
            }
        })
        .collect()
}

/// The per-symbol entropy rate of a model.
///
/// Exact mode: `H` of the symbol law for i.i.d. models and
/// `-sum_i pi_i sum_j P_ij log2 P_ij` for ergodic Markov chains. A chain
/// whose rows are all deterministic has rate 0 regardless of ergodicity and
/// is accepted without a stationary vector (its ladder is empty).
pub fn entropy_rate(model: &ProcessModel, mode: RateMode) -> Result<RateReport> {
    match mode {
        RateMode::Exact { ladder_max } => {
            if let Some(transition) = model.markov_transition() {
                if crate::process::is_deterministic_matrix(transition) {
                    return Ok(RateReport { value: EntropyValue::exact(0.0), ladder: Vec::new() });
                }
                let pi = markov_stationary(transition)?;
                let mut rate = 0.0;
                for (i, row) in transition.iter().enumerate() {
                    rate += pi[i] * plogp_sum(row.iter().copied());
                }
                let h1 = plogp_sum(pi.iter().copied());
                let entropies: Vec<f64> = (1..=ladder_max.max(1))
                    .map(|l| h1 + (l as f64 - 1.0) * rate)
                    .collect();
                return Ok(RateReport {
                    value: EntropyValue::exact(rate),
                    ladder: ladder_from_block_entropies(&entropies),
                });
            }
            let symbol_law = block_distribution(model, 1)
                .map_err(|_| Error::Model("exact rate requires an i.i.d. or Markov model".into()))?;
            let h = entropy(&symbol_law)?.bits;
            let entropies: Vec<f64> = (1..=ladder_max.max(1)).map(|l| l as f64 * h).collect();
            Ok(RateReport {
                value: EntropyValue::exact(h),
                ladder: ladder_from_block_entropies(&entropies),
            })
        }
        RateMode::Empirical { path_len, ladder_max, seed } => {
            let ladder_max = ladder_max.max(1);
            if path_len <= ladder_max {
                return Err(Error::Parameter("path length must exceed the ladder depth".into()));
            }
            let mut entropies = Vec::with_capacity(ladder_max);
            for len in 1..=ladder_max {
                let budget = path_len - len + 1;
                let dist = empirical_block_distribution(model, len, budget, seed)?;
                entropies.push(entropy(&dist)?.bits);
            }
            let ladder = ladder_from_block_entropies(&entropies);
            let value = EntropyValue {
                bits: ladder.last().expect("ladder non-empty").increment_bits,
                method: EntropyMethod::Empirical,
                sample_size: Some(path_len as u64),
            };
            Ok(RateReport { value, ladder })
        }
    }
}

#[derive(Serialize, Deserialize)]
struct TypicalSetRepr {
    alphabet: u32,
    block_length: usize,
    mass: f64,
    log2_size: f64,
    members: Vec<(String, f64)>,
}

/// A minimum-cardinality set of blocks carrying mass at least `1 - epsilon`,
/// ordered by descending probability with lexicographic tie-break.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TypicalSetRepr", into = "TypicalSetRepr")]
pub struct TypicalSet {
    alphabet: Alphabet,
    block_length: usize,
    members: Vec<(Word, f64)>,
    mass: f64,
    log2_size: f64,
}

impl TypicalSet {
    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn block_length(&self) -> usize {
        self.block_length
    }

    /// Members with their probabilities, in selection order.
    pub fn members(&self) -> &[(Word, f64)] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn log2_size(&self) -> f64 {
        self.log2_size
    }

    /// `log2 |A'| / l`, for comparison with the entropy rate.
    pub fn rate_bits(&self) -> f64 {
        self.log2_size / self.block_length.max(1) as f64
    }
}

impl From<TypicalSet> for TypicalSetRepr {
    fn from(set: TypicalSet) -> Self {
        TypicalSetRepr {
            alphabet: set.alphabet.size(),
            block_length: set.block_length,
            mass: set.mass,
            log2_size: set.log2_size,
            members: set
                .members
                .iter()
                .map(|(w, p)| (set.alphabet.format_word(w), *p))
                .collect(),
        }
    }
}

impl TryFrom<TypicalSetRepr> for TypicalSet {
    type Error = Error;

    fn try_from(repr: TypicalSetRepr) -> Result<Self> {
        let alphabet = Alphabet::new(repr.alphabet)?;
        let members = repr
            .members
            .iter()
            .map(|(s, p)| Ok((alphabet.parse_word(s)?, *p)))
            .collect::<Result<Vec<_>>>()?;
        Ok(TypicalSet {
            alphabet,
            block_length: repr.block_length,
            members,
            mass: repr.mass,
            log2_size: repr.log2_size,
        })
    }
}

/// Greedy typical set: take words by descending probability (ties broken
/// lexicographically) until the accumulated mass reaches `1 - epsilon`.
///
/// Greedy selection by descending mass is cardinality-optimal among all sets
/// reaching the target mass.
pub fn typical_set(dist: &BlockDistribution, epsilon: f64) -> Result<TypicalSet> {
    if !(0.0..1.0).contains(&epsilon) || epsilon <= 0.0 {
        return Err(Error::Parameter(format!("epsilon {epsilon} outside (0, 1)")));
    }
    let target = 1.0 - epsilon;
    if dist.total_mass() + 1e-12 < target {
        return Err(Error::Validation(format!(
            "distribution mass {} cannot reach target {target}",
            dist.total_mass()
        )));
    }

    let members = if let Some(probs) = dist.dense_probs() {
        let mut order: Vec<u32> = (0..probs.len() as u32).collect();
        order.sort_unstable_by(|&i, &j| {
            probs[j as usize]
                .partial_cmp(&probs[i as usize])
                .expect("probabilities are finite")
                .then(i.cmp(&j))
        });
        let mut mass = 0.0;
        let mut selected = Vec::new();
        for rank in order {
            let p = probs[rank as usize];
            if p <= 0.0 {
                break;
            }
            mass += p;
            selected.push((dist.alphabet().unrank(u64::from(rank), dist.block_length()), p));
            if mass >= target {
                break;
            }
        }
        selected
    } else {
        let mut entries: Vec<(Word, f64)> = dist.iter().collect();
        entries.sort_by(|(wa, pa), (wb, pb)| {
            pb.partial_cmp(pa).expect("probabilities are finite").then(wa.cmp(wb))
        });
        let mut mass = 0.0;
        let mut selected = Vec::new();
        for (word, p) in entries {
            mass += p;
            selected.push((word, p));
            if mass >= target {
                break;
            }
        }
        selected
    };

    let mass: f64 = members.iter().map(|(_, p)| p).sum();
    if mass + 1e-12 < target {
        return Err(Error::Validation(format!(
            "accumulated mass {mass} fell short of target {target}"
        )));
    }
    let log2_size = (members.len().max(1) as f64).log2();
    Ok(TypicalSet {
        alphabet: dist.alphabet(),
        block_length: dist.block_length(),
        members,
        mass,
        log2_size,
    })
}

/// Block variables `(W_1, …, W_m)` over a product alphabet `B`, with their
/// joint law conditioned on each atom of a finite partition.
#[derive(Debug, Clone)]
pub struct ConditionedBlocks {
    super_alphabet: Alphabet,
    block_count: usize,
    atoms: Vec<BlockAtom>,
}

/// One conditioning atom: its probability and the conditional joint law of
/// the block tuple given the atom.
#[derive(Debug, Clone)]
pub struct BlockAtom {
    pub probability: f64,
    pub joint: BlockDistribution,
    /// Accepted sample count when the law was undersampled, `None` otherwise.
    pub undersampled: Option<usize>,
}

impl ConditionedBlocks {
    pub fn new(super_alphabet: Alphabet, block_count: usize, atoms: Vec<BlockAtom>) -> Result<Self> {
        if block_count == 0 {
            return Err(Error::Parameter("need at least one block variable".into()));
        }
        if atoms.is_empty() {
            return Err(Error::Parameter("need at least one atom".into()));
        }
        let mut total = 0.0;
        for atom in &atoms {
            if !atom.probability.is_finite() || atom.probability < 0.0 {
                return Err(Error::Validation("atom probabilities must be non-negative".into()));
            }
            total += atom.probability;
            if atom.joint.alphabet() != super_alphabet {
                return Err(Error::Validation("atom law over the wrong alphabet".into()));
            }
            if atom.joint.block_length() != block_count {
                return Err(Error::Validation("atom law of the wrong tuple length".into()));
            }
            if (atom.joint.total_mass() - 1.0).abs() > 1e-6 {
                return Err(Error::Validation(format!(
                    "atom law has mass {}, expected 1",
                    atom.joint.total_mass()
                )));
            }
        }
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::Validation(format!("atom masses sum to {total}, expected 1")));
        }
        Ok(ConditionedBlocks { super_alphabet, block_count, atoms })
    }

    /// Trivial partition: a single atom carrying the whole law.
    pub fn single_atom(joint: BlockDistribution) -> Result<Self> {
        let super_alphabet = joint.alphabet();
        let block_count = joint.block_length();
        ConditionedBlocks::new(
            super_alphabet,
            block_count,
            vec![BlockAtom { probability: 1.0, joint, undersampled: None }],
        )
    }

    pub fn super_alphabet(&self) -> Alphabet {
        self.super_alphabet
    }

    pub fn block_count(&self) -> usize {
        self.block_count
    }

    pub fn atoms(&self) -> &[BlockAtom] {
        &self.atoms
    }

    /// `H(W | F)` in bits, weighting each atom's conditional entropy by its
    /// probability. Undersampled atoms are excluded and their mass reported
    /// separately by the hypothesis checker.
    pub fn conditional_entropy_bits(&self) -> f64 {
        let mut h = 0.0;
        for atom in &self.atoms {
            if atom.probability > 0.0 {
                h += atom.probability
                    * entropy_of_masses(atom.joint.masses(), atom.joint.total_mass());
            }
        }
        h
    }
}

/// `|H(W|F) - sum_i H(W_i | F v sigma(W_1..W_{i-1}))|`, the chain-rule
/// residual; identically 0 in exact arithmetic.
pub fn chain_rule_check(blocks: &ConditionedBlocks) -> Result<f64> {
    let direct = blocks.conditional_entropy_bits();
    let m = blocks.block_count();
    let mut chained = 0.0;
    for i in 1..=m {
        let mut term = 0.0;
        for atom in blocks.atoms() {
            if atom.probability <= 0.0 {
                continue;
            }
            // Group the atom's law by the first i-1 coordinates.
            let mut groups: BTreeMap<Word, BTreeMap<u32, f64>> = BTreeMap::new();
            for (word, p) in atom.joint.iter() {
                let prefix = word.prefix(i - 1);
                *groups.entry(prefix).or_default().entry(word.symbol(i - 1)).or_insert(0.0) += p;
            }
            let total = atom.joint.total_mass();
            let mut atom_term = 0.0;
            for (_, group) in groups {
                let group_total: f64 = group.values().sum();
                atom_term +=
                    group_total * entropy_of_masses(group.values().copied(), group_total);
            }
            term += atom.probability * atom_term / total;
        }
        chained += term;
    }
    Ok((direct - chained).abs())
}

/// Measured condition gaps for the tree-admission hypotheses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionGaps {
    /// `|B_i| > |B|^eta` for every `i`.
    pub condition1_ok: bool,
    /// `max_i (1 - P(W_i in B_i))`, the achieved membership slack.
    pub eps_achieved: f64,
    /// `|H(W|F) - sum_i log2 |B_i||` in units of `log2 |B|`.
    pub condition3_gap: f64,
    pub h_given_atoms_bits: f64,
    pub sum_log2_b_bits: f64,
}

/// Per-atom admission outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomAdmission {
    pub probability: f64,
    pub admitted: bool,
    pub language_size: usize,
    pub undersampled: Option<usize>,
}

/// Numerical report for the tree-admission hypotheses, plus per-atom
/// admission of the restricted supports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaHypothesisReport {
    pub eta: f64,
    pub epsilon: f64,
    pub b_sizes: Vec<usize>,
    pub super_alphabet_size: u32,
    pub condition1_ok: bool,
    pub condition2_ok: bool,
    pub gaps: ConditionGaps,
    pub per_atom: Vec<AtomAdmission>,
    /// Probability-weighted fraction of evaluated atoms whose restricted
    /// support admits a full binary tree.
    pub admitting_fraction: f64,
    /// Mass of atoms excluded as undersampled.
    pub excluded_mass: f64,
}

/// Evaluate the admission hypotheses numerically and run tree admission on
/// each atom's support restricted to `B_1 x … x B_m`.
///
/// `b_sets[i]` is the symbol set `B_i ⊆ B`; `epsilon` is the caller's
/// tolerance for the membership condition (the achieved slack is always
/// reported). Undersampled atoms are flagged and excluded from the weighted
/// fraction rather than silently dropped.
pub fn check_tree_lemma_hypotheses(
    blocks: &ConditionedBlocks,
    b_sets: &[BTreeSet<u32>],
    eta: f64,
    epsilon: f64,
) -> Result<LemmaHypothesisReport> {
    let m = blocks.block_count();
    if b_sets.len() != m {
        return Err(Error::Parameter(format!(
            "{} restriction sets for {m} block variables",
            b_sets.len()
        )));
    }
    if !(0.0 < eta && eta < 1.0) {
        return Err(Error::Parameter(format!("eta {eta} outside (0, 1)")));
    }
    if !(0.0 < epsilon && epsilon < 1.0) {
        return Err(Error::Parameter(format!("epsilon {epsilon} outside (0, 1)")));
    }
    let b = blocks.super_alphabet();
    if b.size() < 2 {
        return Err(Error::Parameter("super alphabet must have at least 2 symbols".into()));
    }
    for set in b_sets {
        if set.is_empty() {
            return Err(Error::Parameter("empty restriction set".into()));
        }
        if set.iter().any(|&s| !b.contains(s)) {
            return Err(Error::Validation("restriction symbol outside super alphabet".into()));
        }
    }

    let excluded_mass: f64 = blocks
        .atoms()
        .iter()
        .filter(|a| a.undersampled.is_some())
        .map(|a| a.probability)
        .sum();
    let evaluated_mass: f64 = blocks
        .atoms()
        .iter()
        .filter(|a| a.undersampled.is_none())
        .map(|a| a.probability)
        .sum();
    if evaluated_mass <= 0.0 {
        return Err(Error::Validation("every atom is undersampled".into()));
    }

    let mut membership = vec![0.0f64; m];
    let mut h_given = 0.0;
    let mut per_atom = Vec::with_capacity(blocks.atoms().len());
    let mut admitting = 0.0;
    for atom in blocks.atoms() {
        if atom.undersampled.is_some() {
            per_atom.push(AtomAdmission {
                probability: atom.probability,
                admitted: false,
                language_size: 0,
                undersampled: atom.undersampled,
            });
            continue;
        }
        let weight = atom.probability / evaluated_mass;
        let total = atom.joint.total_mass();
        let mut atom_membership = vec![0.0f64; m];
        let mut restricted = Vec::new();
        for (word, p) in atom.joint.iter() {
            let mut inside = true;
            for i in 0..m {
                if b_sets[i].contains(&word.symbol(i)) {
                    atom_membership[i] += p;
                } else {
                    inside = false;
                }
            }
            if inside {
                restricted.push(word);
            }
        }
        for i in 0..m {
            membership[i] += weight * atom_membership[i] / total;
        }
        h_given += weight * entropy_of_masses(atom.joint.masses(), total);

        let language = Language::new(b, m, restricted)?;
        let admitted = admits_full_binary_tree(&language).is_some();
        if admitted {
            admitting += weight;
        }
        per_atom.push(AtomAdmission {
            probability: atom.probability,
            admitted,
            language_size: language.len(),
            undersampled: None,
        });
    }

    let log2_b = f64::from(b.size()).log2();
    let sum_log2_b: f64 = b_sets.iter().map(|s| (s.len() as f64).log2()).sum();
    let b_threshold = f64::from(b.size()).powf(eta);
    let condition1_ok = b_sets.iter().all(|s| s.len() as f64 > b_threshold);
    let eps_achieved = membership.iter().map(|&p| 1.0 - p).fold(0.0f64, f64::max);
    let condition2_ok = membership.iter().all(|&p| p > 1.0 - epsilon);
    let condition3_gap = (h_given - sum_log2_b).abs() / log2_b;

    Ok(LemmaHypothesisReport {
        eta,
        epsilon,
        b_sizes: b_sets.iter().map(BTreeSet::len).collect(),
        super_alphabet_size: b.size(),
        condition1_ok,
        condition2_ok,
        gaps: ConditionGaps {
            condition1_ok,
            eps_achieved,
            condition3_gap,
            h_given_atoms_bits: h_given,
            sum_log2_b_bits: sum_log2_b,
        },
        per_atom,
        admitting_fraction: admitting,
        excluded_mass,
    })
}
