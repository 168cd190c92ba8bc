//! Explicit construction of non-recurrent pairs for positive-entropy
//! symbolic sources, with a deterministic verifier.
//!
//! The pipeline tiles a finite window of time into aligned `n`-intervals of
//! alternating parity, conditions on the even intervals left of the origin
//! and the odd intervals right of it, restricts the conditional law of the
//! central `[-n, n)` block to per-interval typical sets, and asks whether the
//! restricted support — read as a language over the product alphabet
//! `B = A^{n/4}` — admits a full binary tree. A certificate yields two
//! central words differing on every one of the eight central intervals;
//! extended by the shared conditioning atom they form a pair `(u, v)` whose
//! every large shift disagrees with it somewhere in `[-n, n)`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::entropy::{entropy_normalized, typical_set, ConditionGaps, RateMode, TypicalSet};
use crate::error::{Error, Result};
use crate::process::{
    conditional_block_distribution, sample_path, BlockDistribution, Conditioning, ProcessModel,
    SamplePath, EXACT_SUPPORT_LIMIT,
};
use crate::rng::derive_seed;
use crate::words::{
    admits_full_binary_tree, extract_separated_pair, Alphabet, Language, TreeCertificate, Word,
};

const TAG_ATOM: u64 = 0x61746f6d; // "atom"
const TAG_SAMPLES: u64 = 0x62726467; // "brdg"
const TAG_RATE: u64 = 0x72617465; // "rate"

/// Half-open integer interval `[lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub lo: i64,
    pub hi: i64,
}

impl Span {
    pub fn new(lo: i64, hi: i64) -> Self {
        Span { lo, hi }
    }

    pub fn len(&self) -> i64 {
        (self.hi - self.lo).max(0)
    }

    pub fn is_empty(&self) -> bool {
        self.hi <= self.lo
    }

    pub fn contains(&self, index: i64) -> bool {
        (self.lo..self.hi).contains(&index)
    }

    /// Whether `other` lies entirely inside this span.
    pub fn covers(&self, other: &Span) -> bool {
        !other.is_empty() && other.lo >= self.lo && other.hi <= self.hi
    }

    pub fn intersect(&self, other: &Span) -> Span {
        Span::new(self.lo.max(other.lo), self.hi.min(other.hi))
    }

    pub fn shift(&self, offset: i64) -> Span {
        Span::new(self.lo + offset, self.hi + offset)
    }

    pub fn indices(&self) -> impl Iterator<Item = i64> {
        self.lo..self.hi
    }
}

/// The window geometry: aligned `n`-intervals of alternating parity, the
/// conditioning sides `E⁻`/`E⁺`, and the central intervals `I_1..I_8`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockScheme {
    n: i64,
    window_blocks: usize,
    window: Span,
    central: Span,
    central_intervals: Vec<Span>,
    e_minus: Vec<Span>,
    e_plus: Vec<Span>,
}

impl BlockScheme {
    pub fn n(&self) -> i64 {
        self.n
    }

    /// `K`: the number of `n`-intervals kept on each side per parity class.
    pub fn window_blocks(&self) -> usize {
        self.window_blocks
    }

    /// The full window `[-2Kn, 2Kn)`.
    pub fn window(&self) -> Span {
        self.window
    }

    /// The central block `[-n, n)`.
    pub fn central(&self) -> Span {
        self.central
    }

    /// The intervals `I_1..I_8` (or more) partitioning the central block.
    pub fn central_intervals(&self) -> &[Span] {
        &self.central_intervals
    }

    pub fn central_piece_len(&self) -> i64 {
        self.central_intervals[0].len()
    }

    /// Even `n`-intervals left of 0, within the window, ascending.
    pub fn e_minus(&self) -> &[Span] {
        &self.e_minus
    }

    /// Odd `n`-intervals right of 0, within the window, ascending.
    pub fn e_plus(&self) -> &[Span] {
        &self.e_plus
    }

    /// All even-parity `n`-intervals in the window.
    pub fn even_intervals(&self) -> Vec<Span> {
        self.parity_intervals(0)
    }

    /// All odd-parity `n`-intervals in the window.
    pub fn odd_intervals(&self) -> Vec<Span> {
        self.parity_intervals(1)
    }

    fn parity_intervals(&self, parity: i64) -> Vec<Span> {
        let k_lo = self.window.lo / self.n;
        let k_hi = self.window.hi / self.n;
        (k_lo..k_hi)
            .filter(|k| k.rem_euclid(2) == parity)
            .map(|k| Span::new(k * self.n, (k + 1) * self.n))
            .collect()
    }

    /// The largest shift the window can verify: `(2K - 1) n`.
    pub fn default_shift_bound(&self) -> i64 {
        (2 * self.window_blocks as i64 - 1) * self.n
    }
}

/// Build the scheme for block length `n` (divisible by 4) and window depth
/// `K ≥ 2`, with the default eight central intervals.
pub fn build_block_scheme(n: i64, window_blocks: usize) -> Result<BlockScheme> {
    build_block_scheme_with_intervals(n, window_blocks, 8)
}

/// As [`build_block_scheme`], with `central_count ≥ 8` central intervals
/// (must divide `2n`).
pub fn build_block_scheme_with_intervals(
    n: i64,
    window_blocks: usize,
    central_count: usize,
) -> Result<BlockScheme> {
    if n < 4 || n % 4 != 0 {
        return Err(Error::Parameter(format!("n = {n} must be a positive multiple of 4")));
    }
    if window_blocks < 2 {
        return Err(Error::Parameter("window depth K must be at least 2".into()));
    }
    if central_count < 8 || (2 * n) % central_count as i64 != 0 {
        return Err(Error::Parameter(format!(
            "central interval count {central_count} must be at least 8 and divide 2n = {}",
            2 * n
        )));
    }
    let k = window_blocks as i64;
    let window = Span::new(-2 * k * n, 2 * k * n);
    let central = Span::new(-n, n);
    let piece = 2 * n / central_count as i64;
    let central_intervals = (0..central_count as i64)
        .map(|i| Span::new(-n + i * piece, -n + (i + 1) * piece))
        .collect();
    let e_minus = (1..=k)
        .rev()
        .map(|i| Span::new(-2 * i * n, (-2 * i + 1) * n))
        .collect();
    let e_plus = (0..k)
        .map(|i| Span::new((2 * i + 1) * n, (2 * i + 2) * n))
        .collect();
    Ok(BlockScheme {
        n,
        window_blocks,
        window,
        central,
        central_intervals,
        e_minus,
        e_plus,
    })
}

/// Which side of the conditioning a fixed block lives on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParityBlockKind {
    /// Even `n`-interval `[2in, (2i+1)n)`.
    Y,
    /// Odd `n`-interval `[(2i+1)n, (2i+2)n)`.
    Z,
}

/// One fixed block of the conditioning atom.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AtomBlock {
    pub kind: ParityBlockKind,
    pub index: i64,
    pub start: i64,
    pub symbols: Vec<u32>,
}

/// The finite stand-in for a conditioning atom: fixed symbols on the
/// `Y`-blocks with negative index and the `Z`-blocks with non-negative
/// index, truncated to the window.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditioningAtom {
    blocks: Vec<AtomBlock>,
}

impl ConditioningAtom {
    /// Read the atom off a sampled window path.
    pub fn from_path(scheme: &BlockScheme, path: &SamplePath) -> Result<Self> {
        let mut blocks = Vec::new();
        for span in scheme.e_minus() {
            blocks.push(AtomBlock {
                kind: ParityBlockKind::Y,
                index: span.lo.div_euclid(2 * scheme.n()),
                start: span.lo,
                symbols: path.slice(span.lo, span.hi)?.symbols().to_vec(),
            });
        }
        for span in scheme.e_plus() {
            blocks.push(AtomBlock {
                kind: ParityBlockKind::Z,
                index: (span.lo - scheme.n()).div_euclid(2 * scheme.n()),
                start: span.lo,
                symbols: path.slice(span.lo, span.hi)?.symbols().to_vec(),
            });
        }
        Ok(ConditioningAtom { blocks })
    }

    pub fn blocks(&self) -> &[AtomBlock] {
        &self.blocks
    }

    /// Flatten to a per-index conditioning map.
    pub fn to_conditioning(&self) -> Conditioning {
        self.blocks
            .iter()
            .flat_map(|b| {
                b.symbols
                    .iter()
                    .enumerate()
                    .map(move |(i, &s)| (b.start + i as i64, s))
            })
            .collect()
    }

    pub fn fixed_count(&self) -> usize {
        self.blocks.iter().map(|b| b.symbols.len()).sum()
    }

    pub fn symbol_at(&self, index: i64) -> Option<u32> {
        for block in &self.blocks {
            let offset = index - block.start;
            if offset >= 0 && (offset as usize) < block.symbols.len() {
                return Some(block.symbols[offset as usize]);
            }
        }
        None
    }
}

/// How the restricted conditional support was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SupportMode {
    /// Full conditional table over `A^{2n}`.
    Exact,
    /// Support handled through the block-to-block transfer structure of the
    /// conditional law; `support_size` counts the restricted support
    /// (saturating).
    ExactChain { support_size: u64 },
    /// Seeded rejection samples of the conditioned central block.
    Sampled { budget: usize, distinct: usize },
}

/// A disagreement witness `j ∈ I_i` with `u_j ≠ v_j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DisagreementWitness {
    pub interval_index: usize,
    pub position: i64,
}

/// One shift check of the verifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftCheck {
    pub shift: i64,
    pub passed: bool,
    /// Size of the largest central overlap of a shifted conditioning
    /// interval.
    pub overlap_len: i64,
    pub agreement_interval: Option<Span>,
    pub overlap: Option<Span>,
    pub covered_interval: Option<usize>,
    pub witness: Option<i64>,
    pub failure: Option<String>,
}

/// Outcome of the non-recurrence verifier over a shift range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub shift_bound: i64,
    pub all_passed: bool,
    pub min_overlap: i64,
    pub checks: Vec<ShiftCheck>,
}

/// Pipeline parameters and measured gaps recorded with a pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairParams {
    pub n: i64,
    pub window_blocks: usize,
    pub seed: u64,
    pub retries_allowed: usize,
    pub retry_used: usize,
    pub escalation_used: usize,
    pub epsilon_used: f64,
    pub support_mode: SupportMode,
    pub language_size: usize,
    pub typical_sizes: Vec<usize>,
    pub typical_masses: Vec<f64>,
    /// `log 2 / (4 log |A|)`.
    pub c: f64,
    /// `c / 2`.
    pub eta: f64,
    pub entropy_rate_bits: f64,
    pub gaps: ConditionGaps,
}

/// A constructed pair with its conditioning atom, witnesses, and
/// verification table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairReport {
    pub scheme: BlockScheme,
    pub atom: ConditioningAtom,
    pub u: SamplePath,
    pub v: SamplePath,
    pub certificate_found: bool,
    pub witnesses: Vec<DisagreementWitness>,
    pub verification: VerificationReport,
    pub params: PairParams,
}

impl PairReport {
    /// Compact text summary for the command line.
    pub fn summary(&self) -> String {
        let mode = match self.params.support_mode {
            SupportMode::Exact => "exact".to_string(),
            SupportMode::ExactChain { support_size } => {
                format!("exact transfer chain (support {support_size})")
            }
            SupportMode::Sampled { budget, distinct } => {
                format!("sampled (budget {budget}, distinct {distinct})")
            }
        };
        format!(
            "pair constructed: n={}, K={}, seed={}, escalation={}, retry={}, support={mode}\n\
             language size {}, epsilon {:.6}, condition-3 gap {:.6}\n\
             verification: {} shifts in (2n, {}], min overlap {}, all passed: {}",
            self.params.n,
            self.params.window_blocks,
            self.params.seed,
            self.params.escalation_used,
            self.params.retry_used,
            self.params.language_size,
            self.params.epsilon_used,
            self.params.gaps.condition3_gap,
            self.verification.checks.len(),
            self.verification.shift_bound,
            self.verification.min_overlap,
            self.verification.all_passed,
        )
    }
}

/// Diagnostics for one failed admission attempt.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttemptDiagnostics {
    pub escalation: usize,
    pub retry: usize,
    pub n: i64,
    pub epsilon: f64,
    pub language_size: usize,
    pub b_sizes: Vec<usize>,
    pub gaps: Option<ConditionGaps>,
    pub undersampled: Option<usize>,
}

/// Diagnostics carried by a no-certificate failure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstructDiagnostics {
    pub attempts: Vec<AttemptDiagnostics>,
}

/// Tunable pipeline options; the defaults match the desk-scale experiments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstructOptions {
    /// Starting typical-set epsilon; halves at each escalation.
    pub epsilon0: f64,
    /// Number of times `n` may double after retries are exhausted.
    pub max_escalations: usize,
    /// Conditioned samples of the central block in sampled mode.
    pub sample_budget: usize,
    /// Rejection attempts per sample budget for models without exact
    /// conditioning.
    pub min_atom_samples: usize,
    /// Entropy-rate gate in bits per symbol.
    pub min_rate_bits: f64,
    /// Path length for the empirical rate estimate when no exact rate
    /// exists.
    pub rate_path_len: usize,
}

impl Default for ConstructOptions {
    fn default() -> Self {
        ConstructOptions {
            epsilon0: 0.1,
            max_escalations: 2,
            sample_budget: 30_000,
            min_atom_samples: 200,
            min_rate_bits: 0.05,
            rate_path_len: 100_000,
        }
    }
}

/// Run the full pipeline with default options.
pub fn construct_nonrecurrent_pair(
    model: &ProcessModel,
    n: i64,
    window_blocks: usize,
    seed: u64,
    retries: usize,
) -> Result<PairReport> {
    construct_nonrecurrent_pair_with(model, n, window_blocks, seed, retries, &ConstructOptions::default())
}

/// Run the full pipeline: sample a conditioning atom, restrict the
/// conditional central support to typical sets, admit a full binary tree,
/// extract the separated pair, and verify non-recurrence. Retries draw fresh
/// atoms; exhausted retries escalate `n` (doubling, epsilon halving).
pub fn construct_nonrecurrent_pair_with(
    model: &ProcessModel,
    n: i64,
    window_blocks: usize,
    seed: u64,
    retries: usize,
    options: &ConstructOptions,
) -> Result<PairReport> {
    build_block_scheme(n, window_blocks)?;

    let rate = if model.supports_exact() {
        crate::entropy::entropy_rate(model, RateMode::Exact { ladder_max: 1 })?.value.bits
    } else {
        crate::entropy::entropy_rate(
            model,
            RateMode::Empirical {
                path_len: options.rate_path_len,
                ladder_max: 8,
                seed: derive_seed(seed, &[TAG_RATE]),
            },
        )?
        .value
        .bits
    };
    if rate <= options.min_rate_bits {
        return Err(Error::Entropy(format!(
            "entropy rate {rate:.6} bits/symbol is not above the {} bits/symbol gate",
            options.min_rate_bits
        )));
    }

    let alphabet = model.alphabet();
    let c = std::f64::consts::LN_2 / (4.0 * f64::from(alphabet.size()).ln());
    let eta = c / 2.0;

    let retries = retries.max(1);
    let mut attempts = Vec::new();
    for escalation in 0..=options.max_escalations {
        let n_here = n << escalation;
        let epsilon = options.epsilon0 / (1 << escalation) as f64;
        let scheme = build_block_scheme(n_here, window_blocks)?;
        for retry in 0..retries {
            let attempt_seed = derive_seed(seed, &[escalation as u64, retry as u64]);
            match attempt_pair(model, &scheme, attempt_seed, epsilon, options) {
                Ok(AttemptOutcome::Pair(mut report)) => {
                    report.params.seed = seed;
                    report.params.retries_allowed = retries;
                    report.params.retry_used = retry;
                    report.params.escalation_used = escalation;
                    report.params.c = c;
                    report.params.eta = eta;
                    report.params.entropy_rate_bits = rate;
                    return Ok(*report);
                }
                Ok(AttemptOutcome::NoTree(diag)) => {
                    attempts.push(AttemptDiagnostics {
                        escalation,
                        retry,
                        n: n_here,
                        epsilon,
                        ..diag
                    });
                }
                Err(Error::Undersampled { hits, .. }) => {
                    attempts.push(AttemptDiagnostics {
                        escalation,
                        retry,
                        n: n_here,
                        epsilon,
                        language_size: 0,
                        b_sizes: Vec::new(),
                        gaps: None,
                        undersampled: Some(hits),
                    });
                }
                Err(other) => return Err(other),
            }
        }
    }
    let attempt_count = attempts.len();
    Err(Error::NoCertificate {
        attempts: attempt_count,
        diagnostics: Box::new(ConstructDiagnostics { attempts }),
    })
}

enum AttemptOutcome {
    Pair(Box<PairReport>),
    NoTree(AttemptDiagnostics),
}

/// The per-attempt support analysis feeding admission and the gap report.
struct SupportAnalysis {
    typical_sets: Vec<TypicalSet>,
    b_sets: Vec<BTreeSet<u32>>,
    /// `H` of the conditional central law given the atom, in bits.
    h_given_bits: f64,
    /// Size of the restricted support (or its sampled approximation).
    language_size: usize,
    /// The certificate plus a language it validates against.
    admission: Option<(TreeCertificate, Language)>,
    support_mode: SupportMode,
}

fn attempt_pair(
    model: &ProcessModel,
    scheme: &BlockScheme,
    attempt_seed: u64,
    epsilon: f64,
    options: &ConstructOptions,
) -> Result<AttemptOutcome> {
    let alphabet = model.alphabet();
    let window = scheme.window();
    let window_path = sample_path(
        model,
        window.lo,
        window.hi - 1,
        derive_seed(attempt_seed, &[TAG_ATOM]),
    )?;
    let atom = ConditioningAtom::from_path(scheme, &window_path)?;
    let central = scheme.central();
    let piece = scheme.central_piece_len() as usize;

    let dense_feasible = alphabet
        .word_count(central.len() as usize)
        .is_some_and(|c| c <= EXACT_SUPPORT_LIMIT);
    let chain_feasible = alphabet.word_count(piece).is_some_and(|c| c <= 1 << 16);

    let analysis = if model.supports_exact() && dense_feasible {
        analyze_exact_dense(model, scheme, &atom, epsilon)?
    } else if model.supports_exact() && chain_feasible {
        analyze_exact_chain(model, scheme, &atom, epsilon)?
    } else if model.supports_exact() {
        return Err(Error::Size(
            "central block too large for exact analysis; reduce n".into(),
        ));
    } else {
        analyze_sampled(model, scheme, &atom, epsilon, options, attempt_seed)?
    };

    let super_size = alphabet
        .word_count(piece)
        .expect("guarded above");
    let sum_log2_b: f64 = analysis.b_sets.iter().map(|s| (s.len() as f64).log2()).sum();
    let log2_b = (super_size as f64).log2();
    let c_const = std::f64::consts::LN_2 / (4.0 * f64::from(alphabet.size()).ln());
    let eta = c_const / 2.0;
    let gaps = ConditionGaps {
        condition1_ok: analysis
            .b_sets
            .iter()
            .all(|s| s.len() as f64 > (super_size as f64).powf(eta)),
        eps_achieved: analysis
            .typical_sets
            .iter()
            .map(|s| 1.0 - s.mass())
            .fold(0.0f64, f64::max),
        condition3_gap: (analysis.h_given_bits - sum_log2_b).abs() / log2_b,
        h_given_atoms_bits: analysis.h_given_bits,
        sum_log2_b_bits: sum_log2_b,
    };

    let (certificate, language) = match analysis.admission {
        Some(pair) => pair,
        None => {
            return Ok(AttemptOutcome::NoTree(AttemptDiagnostics {
                escalation: 0,
                retry: 0,
                n: scheme.n(),
                epsilon,
                language_size: analysis.language_size,
                b_sizes: analysis.b_sets.iter().map(BTreeSet::len).collect(),
                gaps: Some(gaps),
                undersampled: None,
            }))
        }
    };

    let u_tuple = certificate.leaves()[0].clone();
    let v_tuple = extract_separated_pair(&language, &certificate, &u_tuple)?;

    let mut u = window_path.clone();
    let mut v = window_path;
    for (i, span) in scheme.central_intervals().iter().enumerate() {
        let u_block = alphabet.unrank(u64::from(u_tuple.symbol(i)), piece);
        let v_block = alphabet.unrank(u64::from(v_tuple.symbol(i)), piece);
        for (offset, index) in span.indices().enumerate() {
            u.set(index, u_block.symbol(offset));
            v.set(index, v_block.symbol(offset));
        }
    }

    let mut witnesses = Vec::with_capacity(scheme.central_intervals().len());
    for (i, span) in scheme.central_intervals().iter().enumerate() {
        let position = span
            .indices()
            .find(|&j| u.get(j) != v.get(j))
            .ok_or_else(|| {
                Error::Verification(format!("central interval {i} carries no disagreement"))
            })?;
        witnesses.push(DisagreementWitness { interval_index: i, position });
    }

    let verification =
        check_nonrecurrence(scheme, &u, &v, &witnesses, scheme.default_shift_bound())?;

    let report = PairReport {
        scheme: scheme.clone(),
        atom,
        u,
        v,
        certificate_found: true,
        witnesses,
        verification,
        params: PairParams {
            n: scheme.n(),
            window_blocks: scheme.window_blocks(),
            seed: 0,
            retries_allowed: 0,
            retry_used: 0,
            escalation_used: 0,
            epsilon_used: epsilon,
            support_mode: analysis.support_mode,
            language_size: analysis.language_size,
            typical_sizes: analysis.typical_sets.iter().map(TypicalSet::len).collect(),
            typical_masses: analysis.typical_sets.iter().map(TypicalSet::mass).collect(),
            c: c_const,
            eta,
            entropy_rate_bits: 0.0,
            gaps,
        },
    };
    Ok(AttemptOutcome::Pair(Box::new(report)))
}

/// Exact mode for small central blocks: the full conditional table over
/// `A^{2n}`, regrouped to the product alphabet.
fn analyze_exact_dense(
    model: &ProcessModel,
    scheme: &BlockScheme,
    atom: &ConditioningAtom,
    epsilon: f64,
) -> Result<SupportAnalysis> {
    let alphabet = model.alphabet();
    let central = scheme.central();
    let piece = scheme.central_piece_len() as usize;
    let count = scheme.central_intervals().len();
    let cond = atom.to_conditioning();

    let central_law = conditional_block_distribution(model, central.lo, central.hi - 1, &cond)?;
    let interval_laws: Vec<BlockDistribution> = (0..count)
        .map(|i| {
            let positions: Vec<usize> = (i * piece..(i + 1) * piece).collect();
            central_law.marginalize(&positions)
        })
        .collect::<Result<_>>()?;
    let joint = central_law.regroup(piece)?;

    let (typical_sets, b_sets) = typical_restrictions(&interval_laws, alphabet, epsilon)?;
    let tuples: Vec<Word> = joint
        .iter()
        .filter(|(word, _)| (0..count).all(|i| b_sets[i].contains(&word.symbol(i))))
        .map(|(word, _)| word)
        .collect();
    let language = Language::new(joint.alphabet(), count, tuples)?;
    let language_size = language.len();
    let admission = admits_full_binary_tree(&language).map(|cert| (cert, language));

    Ok(SupportAnalysis {
        typical_sets,
        b_sets,
        h_given_bits: entropy_normalized(&joint)?.bits,
        language_size,
        admission,
        support_mode: SupportMode::Exact,
    })
}

/// Exact mode for large central blocks of i.i.d. and Markov models: the
/// conditional law of the block tuple is a Markov bridge over the product
/// alphabet `B = A^piece`, so supportability of the typical-restricted
/// support is a per-(level, boundary-symbol) dynamic program and the
/// conditional entropy has a closed forward-backward form. Nothing of size
/// `|A|^{2n}` is materialized.
fn analyze_exact_chain(
    model: &ProcessModel,
    scheme: &BlockScheme,
    atom: &ConditioningAtom,
    epsilon: f64,
) -> Result<SupportAnalysis> {
    let alphabet = model.alphabet();
    let central = scheme.central();
    let piece = scheme.central_piece_len() as usize;
    let count = scheme.central_intervals().len();
    let cond = atom.to_conditioning();

    let interval_laws: Vec<BlockDistribution> = scheme
        .central_intervals()
        .iter()
        .map(|span| conditional_block_distribution(model, span.lo, span.hi - 1, &cond))
        .collect::<Result<_>>()?;
    let (typical_sets, b_sets) = typical_restrictions(&interval_laws, alphabet, epsilon)?;

    let bridge = SuperChain::build(model, alphabet, piece, atom, central)?;
    let h_given_bits = bridge.entropy_bits();
    let (admission, support_size) = bridge.admit_restricted(&b_sets, count)?;

    Ok(SupportAnalysis {
        typical_sets,
        b_sets,
        h_given_bits,
        language_size: support_size.min(usize::MAX as u64) as usize,
        admission,
        support_mode: SupportMode::ExactChain { support_size },
    })
}

/// Sampled mode for models without exact conditioning: rejection samples of
/// the window against the atom.
fn analyze_sampled(
    model: &ProcessModel,
    scheme: &BlockScheme,
    atom: &ConditioningAtom,
    epsilon: f64,
    options: &ConstructOptions,
    attempt_seed: u64,
) -> Result<SupportAnalysis> {
    let alphabet = model.alphabet();
    let piece = scheme.central_piece_len() as usize;
    let count = scheme.central_intervals().len();

    let counts = sampled_central_blocks(model, scheme, atom, options, attempt_seed)?;
    let total: u64 = counts.values().sum();
    let mut grouped: std::collections::BTreeMap<Word, u64> = std::collections::BTreeMap::new();
    for (word, c) in counts {
        *grouped.entry(regroup_word(alphabet, &word, piece)).or_insert(0) += c;
    }
    let distinct = grouped.len();
    let super_size = alphabet
        .word_count(piece)
        .filter(|&c| c <= EXACT_SUPPORT_LIMIT)
        .ok_or_else(|| Error::Size("product alphabet too large".into()))?;
    let joint =
        BlockDistribution::from_counts(Alphabet::new(super_size as u32)?, count, &grouped, total)?;
    let interval_laws: Vec<BlockDistribution> = (0..count)
        .map(|i| {
            joint
                .marginalize(&[i])
                .and_then(|m| ungroup_law(&m, alphabet, piece))
        })
        .collect::<Result<_>>()?;

    let (typical_sets, b_sets) = typical_restrictions(&interval_laws, alphabet, epsilon)?;
    let tuples: Vec<Word> = joint
        .iter()
        .filter(|(word, _)| (0..count).all(|i| b_sets[i].contains(&word.symbol(i))))
        .map(|(word, _)| word)
        .collect();
    let language = Language::new(joint.alphabet(), count, tuples)?;
    let language_size = language.len();
    let admission = admits_full_binary_tree(&language).map(|cert| (cert, language));

    Ok(SupportAnalysis {
        typical_sets,
        b_sets,
        h_given_bits: entropy_normalized(&joint)?.bits,
        language_size,
        admission,
        support_mode: SupportMode::Sampled { budget: options.sample_budget, distinct },
    })
}

fn typical_restrictions(
    interval_laws: &[BlockDistribution],
    alphabet: Alphabet,
    epsilon: f64,
) -> Result<(Vec<TypicalSet>, Vec<BTreeSet<u32>>)> {
    let mut typical_sets = Vec::with_capacity(interval_laws.len());
    let mut b_sets = Vec::with_capacity(interval_laws.len());
    for law in interval_laws {
        let set = typical_set(law, epsilon)?;
        b_sets.push(set.members().iter().map(|(w, _)| alphabet.rank(w) as u32).collect());
        typical_sets.push(set);
    }
    Ok((typical_sets, b_sets))
}

/// The conditional law of the central block tuple given the atom, factored
/// through its block-to-block transfer structure: for i.i.d. and Markov
/// models the tuple `(b_1, …, b_m)` is a Markov bridge between the atom's
/// two boundary symbols, with transfer weights
/// `T(a, b) = P(first(b) | a) * P(inside b)` depending on the previous
/// block only through its last symbol `a`.
struct SuperChain {
    /// Base-symbol transition rows (i.i.d. models use identical rows).
    base_rows: Vec<Vec<f64>>,
    /// `T[a][b] = P(first(b) | a) * P(inside b)` for `a` in A, `b` in B.
    transfer: Vec<Vec<f64>>,
    /// Last symbol of each block `b`.
    last_symbol: Vec<u32>,
    left: usize,
    right: usize,
    blocks: usize,
}

impl SuperChain {
    fn build(
        model: &ProcessModel,
        alphabet: Alphabet,
        piece: usize,
        atom: &ConditioningAtom,
        central: Span,
    ) -> Result<SuperChain> {
        let base_rows: Vec<Vec<f64>> = if let Some(t) = model.markov_transition() {
            t.to_vec()
        } else if let Some(p) = model.iid_symbol_probs() {
            vec![p.to_vec(); p.len()]
        } else {
            return Err(Error::Model(
                "transfer analysis requires an i.i.d. or Markov model".into(),
            ));
        };
        let left = atom
            .symbol_at(central.lo - 1)
            .ok_or_else(|| Error::Parameter("atom does not border the central block".into()))?
            as usize;
        let right = atom
            .symbol_at(central.hi)
            .ok_or_else(|| Error::Parameter("atom does not border the central block".into()))?
            as usize;

        let b_count = alphabet
            .word_count(piece)
            .filter(|&c| c <= 1 << 16)
            .ok_or_else(|| {
                Error::Size("product alphabet too large for transfer analysis".into())
            })? as usize;
        let a_count = alphabet.size() as usize;
        let mut transfer = vec![vec![0.0f64; b_count]; a_count];
        let mut last_symbol = vec![0u32; b_count];
        for b in 0..b_count {
            let word = alphabet.unrank(b as u64, piece);
            let inside: f64 = word
                .symbols()
                .windows(2)
                .map(|w| base_rows[w[0] as usize][w[1] as usize])
                .product();
            last_symbol[b] = word.symbols()[piece - 1];
            let first = word.symbols()[0] as usize;
            for (a, row) in transfer.iter_mut().enumerate() {
                row[b] = base_rows[a][first] * inside;
            }
        }
        let blocks = (central.len() as usize) / piece;
        Ok(SuperChain {
            base_rows,
            transfer,
            left,
            right,
            last_symbol,
            blocks,
        })
    }

    fn a_count(&self) -> usize {
        self.transfer.len()
    }

    fn b_count(&self) -> usize {
        self.last_symbol.len()
    }

    /// Backward messages `f[i][a]`, proportional to the probability of
    /// reaching the fixed right boundary when block `i` ends in symbol `a`;
    /// normalized per level. Valid for `i` in `1..=blocks`.
    fn backward(&self) -> Vec<Vec<f64>> {
        let m = self.blocks;
        let mut f = vec![vec![0.0f64; self.a_count()]; m + 1];
        for (a, slot) in f[m].iter_mut().enumerate() {
            *slot = self.base_rows[a][self.right];
        }
        normalize(&mut f[m]);
        for i in (1..m).rev() {
            let (head, tail) = f.split_at_mut(i + 1);
            let next = &tail[0];
            for (a, slot) in head[i].iter_mut().enumerate() {
                *slot = self.transfer[a]
                    .iter()
                    .enumerate()
                    .map(|(b, &t)| t * next[self.last_symbol[b] as usize])
                    .sum();
            }
            normalize(&mut head[i]);
        }
        f
    }

    /// `H` in bits of the bridge law of the block tuple, by the chain rule:
    /// the entropy of the first block plus the expected entropies of each
    /// block given the last symbol of its predecessor.
    fn entropy_bits(&self) -> f64 {
        let m = self.blocks;
        let f = self.backward();
        let mut mu: Vec<f64> = (0..self.b_count())
            .map(|b| self.transfer[self.left][b] * f[1][self.last_symbol[b] as usize])
            .collect();
        normalize(&mut mu);
        let mut h = entropy_of_vec(&mu);
        let mut nu = vec![0.0f64; self.a_count()];
        for (b, &p) in mu.iter().enumerate() {
            nu[self.last_symbol[b] as usize] += p;
        }
        for i in 1..m {
            let mut next_nu = vec![0.0f64; self.a_count()];
            for (a, &weight) in nu.iter().enumerate() {
                if weight <= 0.0 {
                    continue;
                }
                let mut q: Vec<f64> = (0..self.b_count())
                    .map(|b| self.transfer[a][b] * f[i + 1][self.last_symbol[b] as usize])
                    .collect();
                normalize(&mut q);
                h += weight * entropy_of_vec(&q);
                for (b, &p) in q.iter().enumerate() {
                    next_nu[self.last_symbol[b] as usize] += weight * p;
                }
            }
            nu = next_nu;
        }
        h
    }

    /// Supportability DP over the typical-restricted support. A leaf-level
    /// block is supportable when it connects to the right boundary; an inner
    /// block when at least two supportable continuations follow it; the root
    /// additionally demands two supportable first blocks compatible with the
    /// left boundary. Children depend on a block only through its last
    /// symbol, so the DP runs per (level, symbol) and never materializes the
    /// support. Returns the certificate with its leaf language, plus the
    /// restricted support size (saturating).
    fn admit_restricted(
        &self,
        b_sets: &[BTreeSet<u32>],
        count: usize,
    ) -> Result<(Option<(TreeCertificate, Language)>, u64)> {
        let m = count;
        let super_alphabet = Alphabet::new(self.b_count() as u32)?;
        let mut supportable: Vec<BTreeSet<u32>> = vec![BTreeSet::new(); m];
        for &b in &b_sets[m - 1] {
            if self.base_rows[self.last_symbol[b as usize] as usize][self.right] > 0.0 {
                supportable[m - 1].insert(b);
            }
        }
        for i in (0..m - 1).rev() {
            let child_count: Vec<usize> = (0..self.a_count())
                .map(|a| {
                    supportable[i + 1]
                        .iter()
                        .filter(|&&b| self.transfer[a][b as usize] > 0.0)
                        .count()
                })
                .collect();
            for &b in &b_sets[i] {
                if child_count[self.last_symbol[b as usize] as usize] >= 2 {
                    supportable[i].insert(b);
                }
            }
        }
        let roots: Vec<u32> = supportable[0]
            .iter()
            .copied()
            .filter(|&b| self.transfer[self.left][b as usize] > 0.0)
            .collect();

        let support_size = self.restricted_support_size(b_sets, m);
        if roots.len() < 2 {
            return Ok((None, support_size));
        }

        // Materialize the witness subtree: two smallest supportable children
        // per (level, last symbol), exactly the generic admission choice.
        let mut frontier: Vec<Word> = roots[..2].iter().map(|&b| Word::new(vec![b])).collect();
        for level_support in supportable.iter().skip(1) {
            let chosen: Vec<Option<(u32, u32)>> = (0..self.a_count())
                .map(|a| {
                    let mut picks = level_support
                        .iter()
                        .copied()
                        .filter(|&b| self.transfer[a][b as usize] > 0.0);
                    match (picks.next(), picks.next()) {
                        (Some(x), Some(y)) => Some((x, y)),
                        _ => None,
                    }
                })
                .collect();
            let mut next = Vec::with_capacity(frontier.len() * 2);
            for word in &frontier {
                let a = self.last_symbol[word.last().expect("non-empty") as usize] as usize;
                let (x, y) = chosen[a].ok_or_else(|| {
                    Error::Verification("supportable node lost its children".into())
                })?;
                next.push(word.extended(x));
                next.push(word.extended(y));
            }
            next.sort_unstable();
            frontier = next;
        }

        let language = Language::new(super_alphabet, m, frontier)?;
        let certificate = admits_full_binary_tree(&language).ok_or_else(|| {
            Error::Verification("certificate leaves fail generic admission".into())
        })?;
        Ok((Some((certificate, language)), support_size))
    }

    /// Count the words of the typical-restricted support by forward counting
    /// over (level, block) reach multiplicities, saturating at `u64::MAX`.
    fn restricted_support_size(&self, b_sets: &[BTreeSet<u32>], m: usize) -> u64 {
        let mut reach: Vec<(u32, u64)> = b_sets[0]
            .iter()
            .copied()
            .filter(|&b| self.transfer[self.left][b as usize] > 0.0)
            .map(|b| (b, 1u64))
            .collect();
        for i in 0..m - 1 {
            let mut by_a: Vec<u64> = vec![0; self.a_count()];
            for (b, c) in &reach {
                let a = self.last_symbol[*b as usize] as usize;
                by_a[a] = by_a[a].saturating_add(*c);
            }
            reach = b_sets[i + 1]
                .iter()
                .copied()
                .map(|b| {
                    let total = (0..self.a_count())
                        .filter(|&a| self.transfer[a][b as usize] > 0.0)
                        .fold(0u64, |acc, a| acc.saturating_add(by_a[a]));
                    (b, total)
                })
                .filter(|(_, c)| *c > 0)
                .collect();
        }
        reach
            .iter()
            .filter(|(b, _)| {
                self.base_rows[self.last_symbol[*b as usize] as usize][self.right] > 0.0
            })
            .fold(0u64, |acc, (_, c)| acc.saturating_add(*c))
    }
}


fn entropy_of_vec(probs: &[f64]) -> f64 {
    let mut h = 0.0;
    for &p in probs {
        if p > 0.0 {
            h -= p * p.log2();
        }
    }
    h
}

/// Regroup an A-word into symbols of the product alphabet `A^group`.
fn regroup_word(alphabet: Alphabet, word: &Word, group: usize) -> Word {
    Word::new(
        word.symbols()
            .chunks(group)
            .map(|chunk| alphabet.rank(&Word::new(chunk.to_vec())) as u32)
            .collect(),
    )
}

/// Expand a length-1 law over the product alphabet back to A-words.
fn ungroup_law(
    law: &BlockDistribution,
    alphabet: Alphabet,
    piece: usize,
) -> Result<BlockDistribution> {
    let mut map = std::collections::BTreeMap::new();
    for (word, p) in law.iter() {
        map.insert(alphabet.unrank(u64::from(word.symbol(0)), piece), p);
    }
    BlockDistribution::from_sparse(alphabet, piece, map)
}

/// Rejection samples of the central block for models without exact
/// conditioning: draw whole windows, keep those matching the atom, and
/// count their central words. Too few acceptances is an undersampled error,
/// never a silently thin support.
fn sampled_central_blocks(
    model: &ProcessModel,
    scheme: &BlockScheme,
    atom: &ConditioningAtom,
    options: &ConstructOptions,
    attempt_seed: u64,
) -> Result<std::collections::BTreeMap<Word, u64>> {
    let central = scheme.central();
    let cond = atom.to_conditioning();
    let window = scheme.window();
    let mut counts: std::collections::BTreeMap<Word, u64> = std::collections::BTreeMap::new();
    let mut hits = 0usize;
    for attempt in 0..options.sample_budget {
        let path = sample_path(
            model,
            window.lo,
            window.hi - 1,
            derive_seed(attempt_seed, &[TAG_SAMPLES, attempt as u64]),
        )?;
        let matched = cond
            .entries()
            .all(|(index, symbol)| path.get(index) == Some(symbol));
        if matched {
            hits += 1;
            *counts.entry(path.slice(central.lo, central.hi)?).or_insert(0) += 1;
        }
    }
    if hits < options.min_atom_samples {
        return Err(Error::Undersampled { hits, min: options.min_atom_samples });
    }
    Ok(counts)
}

fn normalize(values: &mut [f64]) {
    let total: f64 = values.iter().sum();
    if total > 0.0 {
        for v in values {
            *v /= total;
        }
    }
}

/// Re-run the non-recurrence verifier on a stored report.
///
/// For every shift `k` with `2n < |k| ≤ shift_bound`, finds `j ∈ [-n, n)`
/// with `u_j ≠ v_j` and `u_{j+k} = v_{j+k}`, recording the geometric facts
/// used: a shifted conditioning interval overlaps the central block in at
/// least `n/2` indices, and that overlap contains a full central interval.
pub fn verify_nonrecurrence(report: &PairReport, shift_bound: i64) -> Result<VerificationReport> {
    check_nonrecurrence(&report.scheme, &report.u, &report.v, &report.witnesses, shift_bound)
}

fn check_nonrecurrence(
    scheme: &BlockScheme,
    u: &SamplePath,
    v: &SamplePath,
    witnesses: &[DisagreementWitness],
    shift_bound: i64,
) -> Result<VerificationReport> {
    let n = scheme.n();
    if shift_bound <= 2 * n {
        return Err(Error::Parameter(format!(
            "shift bound {shift_bound} leaves no shifts beyond 2n = {}",
            2 * n
        )));
    }
    if u.lo() > -(shift_bound + n) || u.hi() < shift_bound + n - 1 {
        return Err(Error::Parameter(format!(
            "paths on [{}, {}] cannot verify shifts up to {shift_bound}",
            u.lo(),
            u.hi()
        )));
    }
    if v.lo() != u.lo() || v.len() != u.len() {
        return Err(Error::Parameter("u and v must share their window".into()));
    }
    if witnesses.len() != scheme.central_intervals().len() {
        return Err(Error::Parameter(format!(
            "{} witnesses for {} central intervals",
            witnesses.len(),
            scheme.central_intervals().len()
        )));
    }

    let mut checks = Vec::new();
    let mut all_passed = true;
    let mut min_overlap = i64::MAX;
    for k in -shift_bound..=shift_bound {
        if k.abs() <= 2 * n {
            continue;
        }
        let check = check_one_shift(scheme, u, v, witnesses, k);
        min_overlap = min_overlap.min(check.overlap_len);
        all_passed &= check.passed;
        checks.push(check);
    }
    Ok(VerificationReport {
        shift_bound,
        all_passed,
        min_overlap,
        checks,
    })
}

fn check_one_shift(
    scheme: &BlockScheme,
    u: &SamplePath,
    v: &SamplePath,
    witnesses: &[DisagreementWitness],
    k: i64,
) -> ShiftCheck {
    let central = scheme.central();
    let mut best: Option<(Span, Span)> = None;
    for interval in scheme.e_minus().iter().chain(scheme.e_plus().iter()) {
        let overlap = interval.shift(-k).intersect(&central);
        if overlap.len() > best.map_or(0, |(_, o)| o.len()) {
            best = Some((*interval, overlap));
        }
    }
    let (interval, overlap) = match best {
        Some(pair) if !pair.1.is_empty() => pair,
        _ => {
            return ShiftCheck {
                shift: k,
                passed: false,
                overlap_len: 0,
                agreement_interval: None,
                overlap: None,
                covered_interval: None,
                witness: None,
                failure: Some("no shifted conditioning interval meets the central block".into()),
            }
        }
    };
    if overlap.len() < scheme.n() / 2 {
        return ShiftCheck {
            shift: k,
            passed: false,
            overlap_len: overlap.len(),
            agreement_interval: Some(interval),
            overlap: Some(overlap),
            covered_interval: None,
            witness: None,
            failure: Some(format!(
                "largest overlap {} is below n/2 = {}",
                overlap.len(),
                scheme.n() / 2
            )),
        };
    }
    let covered = scheme
        .central_intervals()
        .iter()
        .position(|piece| overlap.covers(piece));
    let piece_index = match covered {
        Some(i) => i,
        None => {
            return ShiftCheck {
                shift: k,
                passed: false,
                overlap_len: overlap.len(),
                agreement_interval: Some(interval),
                overlap: Some(overlap),
                covered_interval: None,
                witness: None,
                failure: Some("overlap contains no full central interval".into()),
            }
        }
    };
    let j = witnesses[piece_index].position;
    let disagree_here = u.get(j).is_some() && u.get(j) != v.get(j);
    let agree_shifted = match (u.get(j + k), v.get(j + k)) {
        (Some(a), Some(b)) => a == b,
        _ => false,
    };
    let passed = disagree_here && agree_shifted;
    ShiftCheck {
        shift: k,
        passed,
        overlap_len: overlap.len(),
        agreement_interval: Some(interval),
        overlap: Some(overlap),
        covered_interval: Some(piece_index),
        witness: Some(j),
        failure: if passed {
            None
        } else {
            Some(format!(
                "witness {j} fails: u_j != v_j is {disagree_here}, u_(j+k) == v_(j+k) is {agree_shifted}"
            ))
        },
    }
}

/// Exhaustively verify that every length-`n/2` sub-interval of `[-n, n)`
/// contains one of the central intervals.
pub fn interval_cover_check(n: i64) -> Result<bool> {
    let scheme = build_block_scheme(n, 2)?;
    Ok(subinterval_cover_holds(
        scheme.central(),
        scheme.central_intervals(),
        n / 2,
    ))
}

/// Whether every length-`sub_len` sub-interval of `window` contains one of
/// `pieces` entirely.
pub fn subinterval_cover_holds(window: Span, pieces: &[Span], sub_len: i64) -> bool {
    let mut start = window.lo;
    while start + sub_len <= window.hi {
        let sub = Span::new(start, start + sub_len);
        if !pieces.iter().any(|piece| sub.covers(piece)) {
            return false;
        }
        start += 1;
    }
    true
}

/// One row of the shifted-grid overlap scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlapRow {
    pub shift: i64,
    pub best_overlap: i64,
    pub interval: Span,
    pub overlap: Span,
    pub covered_interval: Option<usize>,
}

/// Result of scanning every shift in `(2n, shift_bound]` on both sides.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlapScan {
    pub shift_bound: i64,
    pub min_overlap: i64,
    pub rows: Vec<OverlapRow>,
}

/// For every shift `k` with `2n < |k| ≤ shift_bound`, the largest central
/// overlap of a shifted conditioning interval and the first central interval
/// it contains.
pub fn shift_overlap_scan(scheme: &BlockScheme, shift_bound: i64) -> Result<OverlapScan> {
    let n = scheme.n();
    if shift_bound <= 2 * n || shift_bound > scheme.default_shift_bound() {
        return Err(Error::Parameter(format!(
            "shift bound {shift_bound} outside (2n, (2K-1)n] = ({}, {}]",
            2 * n,
            scheme.default_shift_bound()
        )));
    }
    let central = scheme.central();
    let mut rows = Vec::new();
    let mut min_overlap = i64::MAX;
    for k in -shift_bound..=shift_bound {
        if k.abs() <= 2 * n {
            continue;
        }
        let mut best: Option<(Span, Span)> = None;
        for interval in scheme.e_minus().iter().chain(scheme.e_plus().iter()) {
            let overlap = interval.shift(-k).intersect(&central);
            if overlap.len() > best.map_or(0, |(_, o)| o.len()) {
                best = Some((*interval, overlap));
            }
        }
        let (interval, overlap) = best.unwrap_or((central, Span::new(0, 0)));
        min_overlap = min_overlap.min(overlap.len());
        rows.push(OverlapRow {
            shift: k,
            best_overlap: overlap.len(),
            interval,
            overlap,
            covered_interval: scheme
                .central_intervals()
                .iter()
                .position(|piece| overlap.covers(piece)),
        });
    }
    Ok(OverlapScan { shift_bound, min_overlap, rows })
}

/// Independent re-scan of a passing report: for every shift in range, count
/// the coordinates `j ∈ [-n, n)` where the pair differs from its shift,
/// without using the stored witnesses.
pub fn brute_force_shift_distances(report: &PairReport, shift_bound: i64) -> Result<Vec<(i64, usize)>> {
    let scheme = &report.scheme;
    let n = scheme.n();
    if shift_bound <= 2 * n {
        return Err(Error::Parameter("shift bound leaves no shifts to scan".into()));
    }
    let mut out = Vec::new();
    for k in -shift_bound..=shift_bound {
        if k.abs() <= 2 * n {
            continue;
        }
        let mut distance = 0usize;
        for j in scheme.central().indices() {
            let here = (report.u.get(j), report.v.get(j));
            let there = (report.u.get(j + k), report.v.get(j + k));
            if here.0.is_none() || there.0.is_none() {
                return Err(Error::Parameter("shift leaves the path window".into()));
            }
            if here != there {
                distance += 1;
            }
        }
        out.push((k, distance));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fair_bits() -> ProcessModel {
        ProcessModel::iid(vec![0.5, 0.5]).unwrap()
    }

    fn flip_chain() -> ProcessModel {
        ProcessModel::markov(vec![vec![0.9, 0.1], vec![0.1, 0.9]]).unwrap()
    }

    #[test]
    fn scheme_geometry_matches_hand_computation() {
        let scheme = build_block_scheme(4, 2).unwrap();
        assert_eq!(scheme.window(), Span::new(-16, 16));
        let pieces: Vec<(i64, i64)> = scheme
            .central_intervals()
            .iter()
            .map(|s| (s.lo, s.hi))
            .collect();
        assert_eq!(
            pieces,
            vec![(-4, -3), (-3, -2), (-2, -1), (-1, 0), (0, 1), (1, 2), (2, 3), (3, 4)]
        );
        let e_minus: Vec<(i64, i64)> = scheme.e_minus().iter().map(|s| (s.lo, s.hi)).collect();
        assert_eq!(e_minus, vec![(-16, -12), (-8, -4)]);
        let e_plus: Vec<(i64, i64)> = scheme.e_plus().iter().map(|s| (s.lo, s.hi)).collect();
        assert_eq!(e_plus, vec![(4, 8), (12, 16)]);

        let scheme = build_block_scheme(8, 2).unwrap();
        assert_eq!(scheme.central_piece_len(), 2);
        let e_minus: Vec<(i64, i64)> = scheme.e_minus().iter().map(|s| (s.lo, s.hi)).collect();
        assert_eq!(e_minus, vec![(-32, -24), (-16, -8)]);

        assert!(matches!(build_block_scheme(6, 2), Err(Error::Parameter(_))));
        assert!(matches!(build_block_scheme(8, 1), Err(Error::Parameter(_))));
    }

    #[test]
    fn scheme_partitions_are_exact() {
        for (n, k) in [(4i64, 2usize), (8, 4), (16, 3)] {
            let scheme = build_block_scheme(n, k).unwrap();
            // Central intervals partition the central block.
            let mut covered: Vec<i64> = scheme
                .central_intervals()
                .iter()
                .flat_map(|s| s.indices())
                .collect();
            covered.sort_unstable();
            let expected: Vec<i64> = scheme.central().indices().collect();
            assert_eq!(covered, expected);

            // Even and odd intervals tile the window.
            let mut tiling: Vec<i64> = scheme
                .even_intervals()
                .iter()
                .chain(scheme.odd_intervals().iter())
                .flat_map(|s| s.indices())
                .collect();
            tiling.sort_unstable();
            let window: Vec<i64> = scheme.window().indices().collect();
            assert_eq!(tiling, window);

            // E- is even-left, E+ is odd-right, all within the window.
            for span in scheme.e_minus() {
                assert!(span.hi <= 0 && (span.lo / n) % 2 == 0);
            }
            for span in scheme.e_plus() {
                assert!(span.lo >= 0 && (span.lo / n) % 2 == 1);
            }
        }
    }

    #[test]
    fn cover_check_holds_and_catches_broken_geometry() {
        for n in [4i64, 8, 16, 32, 64] {
            assert!(interval_cover_check(n).unwrap());
        }
        assert!(matches!(interval_cover_check(6), Err(Error::Parameter(_))));

        // Negative control: shorten every interval by one index.
        let scheme = build_block_scheme(4, 2).unwrap();
        let shortened: Vec<Span> = scheme
            .central_intervals()
            .iter()
            .map(|s| Span::new(s.lo, s.hi - 1))
            .collect();
        assert!(!subinterval_cover_holds(scheme.central(), &shortened, 2));
    }

    #[test]
    fn overlap_scan_meets_half_n_everywhere() {
        for (n, k) in [(4i64, 4usize), (8, 4), (16, 4)] {
            let scheme = build_block_scheme(n, k).unwrap();
            let scan = shift_overlap_scan(&scheme, scheme.default_shift_bound()).unwrap();
            assert!(
                scan.min_overlap >= n / 2,
                "n = {n}: min overlap {} < {}",
                scan.min_overlap,
                n / 2
            );
            for row in &scan.rows {
                assert!(row.covered_interval.is_some(), "shift {}", row.shift);
            }
        }
        // Unaligned shift: n = 4, k = 9 still overlaps in >= n/2 indices.
        let scheme = build_block_scheme(4, 4).unwrap();
        let scan = shift_overlap_scan(&scheme, scheme.default_shift_bound()).unwrap();
        let row = scan.rows.iter().find(|r| r.shift == 9).unwrap();
        assert!(row.best_overlap >= 2);
    }

    #[test]
    fn fair_bits_pipeline_is_exact_and_verifies() {
        let report = construct_nonrecurrent_pair(&fair_bits(), 8, 4, 1, 100).unwrap();
        assert!(report.certificate_found);
        assert_eq!(report.params.support_mode, SupportMode::Exact);
        assert!(report.verification.all_passed);
        assert_eq!(report.verification.shift_bound, 56);

        // Type invariants: agreement on E- and E+, disagreement in every I_i.
        for span in report.scheme.e_minus().iter().chain(report.scheme.e_plus()) {
            for j in span.indices() {
                assert_eq!(report.u.get(j), report.v.get(j), "index {j}");
            }
        }
        for (i, span) in report.scheme.central_intervals().iter().enumerate() {
            assert!(
                span.indices().any(|j| report.u.get(j) != report.v.get(j)),
                "interval {i}"
            );
        }

        // Brute-force re-scan without the stored witnesses.
        for (k, distance) in brute_force_shift_distances(&report, 56).unwrap() {
            assert!(distance >= 1, "shift {k} has distance 0");
        }
    }

    #[test]
    fn pipeline_is_deterministic() {
        let a = construct_nonrecurrent_pair(&fair_bits(), 8, 4, 5, 10).unwrap();
        let b = construct_nonrecurrent_pair(&fair_bits(), 8, 4, 5, 10).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn zero_entropy_models_are_rejected() {
        let constant = ProcessModel::iid(vec![1.0, 0.0]).unwrap();
        assert!(matches!(
            construct_nonrecurrent_pair(&constant, 8, 4, 1, 10),
            Err(Error::Entropy(_))
        ));

        let period_two = ProcessModel::markov(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert!(matches!(
            construct_nonrecurrent_pair(&period_two, 8, 4, 1, 10),
            Err(Error::Entropy(_))
        ));
    }

    #[test]
    fn markov_pipeline_succeeds_via_transfer_chain() {
        let report = construct_nonrecurrent_pair(&flip_chain(), 16, 4, 3, 50).unwrap();
        assert!(report.certificate_found);
        match report.params.support_mode {
            SupportMode::ExactChain { support_size } => assert!(support_size > 1000),
            other => panic!("expected transfer-chain mode, got {other:?}"),
        }
        assert!(report.verification.all_passed);
        for (k, distance) in
            brute_force_shift_distances(&report, report.verification.shift_bound).unwrap()
        {
            assert!(distance >= 1, "shift {k}");
        }
    }

    #[test]
    fn transfer_chain_matches_dense_analysis() {
        // Both exact routes apply at n = 8; they must agree on the
        // conditional entropy, the restricted support size, and the
        // certificate itself.
        for model in [flip_chain(), ProcessModel::iid(vec![0.2, 0.8]).unwrap()] {
            transfer_chain_cross_check(&model);
        }
    }

    fn transfer_chain_cross_check(model: &ProcessModel) {
        let scheme = build_block_scheme(8, 4).unwrap();
        let window = scheme.window();
        for seed in [1u64, 2, 3] {
            let path = sample_path(model, window.lo, window.hi - 1, seed).unwrap();
            let atom = ConditioningAtom::from_path(&scheme, &path).unwrap();
            let dense = analyze_exact_dense(model, &scheme, &atom, 0.1).unwrap();
            let chain = analyze_exact_chain(model, &scheme, &atom, 0.1).unwrap();
            assert!(
                (dense.h_given_bits - chain.h_given_bits).abs() < 1e-9,
                "H mismatch: {} vs {}",
                dense.h_given_bits,
                chain.h_given_bits
            );
            assert_eq!(dense.b_sets, chain.b_sets);
            assert_eq!(dense.language_size as u64, match chain.support_mode {
                SupportMode::ExactChain { support_size } => support_size,
                _ => unreachable!(),
            });
            match (dense.admission, chain.admission) {
                (Some((dense_cert, _)), Some((chain_cert, _))) => {
                    assert_eq!(dense_cert, chain_cert);
                }
                (None, None) => {}
                other => panic!("admission disagreement: {:?}", other.0.is_some()),
            }
        }
    }

    #[test]
    fn function_of_markov_reports_undersampling_honestly() {
        // Rejection sampling cannot hit an atom fixing 2Kn symbols for this
        // weakly correlated hidden chain; the pipeline must say so rather
        // than emit a thin support.
        let model = ProcessModel::function_of_markov(
            vec![vec![0.6, 0.4], vec![0.4, 0.6]],
            vec![0, 1],
        )
        .unwrap();
        let options = ConstructOptions { sample_budget: 2_000, max_escalations: 0, ..Default::default() };
        match construct_nonrecurrent_pair_with(&model, 8, 4, 1, 3, &options) {
            Err(Error::NoCertificate { attempts, diagnostics }) => {
                assert_eq!(attempts, 3);
                assert!(diagnostics.attempts.iter().all(|a| a.undersampled.is_some()));
            }
            other => panic!("expected no-certificate with undersampling, got {other:?}"),
        }
    }

    #[test]
    fn identical_paths_fail_verification_everywhere() {
        let mut report = construct_nonrecurrent_pair(&fair_bits(), 8, 4, 2, 10).unwrap();
        report.v = report.u.clone();
        let verification = verify_nonrecurrence(&report, 56).unwrap();
        assert!(!verification.all_passed);
        assert!(verification.checks.iter().all(|c| !c.passed));
    }

    #[test]
    fn hand_built_pair_passes_witness_logic() {
        // n = 4, K = 2: u and v agree everywhere except one index per
        // central interval.
        let scheme = build_block_scheme(4, 2).unwrap();
        let alphabet = Alphabet::new(2).unwrap();
        let len = scheme.window().len() as usize;
        let base = vec![0u32; len];
        let u = SamplePath::new(alphabet, scheme.window().lo, base.clone(), 0).unwrap();
        let mut v_syms = base;
        let mut witnesses = Vec::new();
        for (i, span) in scheme.central_intervals().iter().enumerate() {
            let j = span.lo;
            v_syms[(j - scheme.window().lo) as usize] = 1;
            witnesses.push(DisagreementWitness { interval_index: i, position: j });
        }
        let v = SamplePath::new(alphabet, scheme.window().lo, v_syms, 0).unwrap();
        let verification =
            check_nonrecurrence(&scheme, &u, &v, &witnesses, scheme.default_shift_bound())
                .unwrap();
        assert!(verification.all_passed);
        // The shift k = 9 uses a witness j with u_j != v_j and u_{j+9} = v_{j+9}.
        let row = verification.checks.iter().find(|c| c.shift == 9).unwrap();
        let j = row.witness.unwrap();
        assert_ne!(u.get(j), v.get(j));
        assert_eq!(u.get(j + 9), v.get(j + 9));
    }

    #[test]
    fn verifier_rejects_small_windows() {
        let report = construct_nonrecurrent_pair(&fair_bits(), 8, 4, 1, 10).unwrap();
        assert!(matches!(
            verify_nonrecurrence(&report, 500),
            Err(Error::Parameter(_))
        ));
        assert!(matches!(
            verify_nonrecurrence(&report, 16),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn report_json_round_trips() {
        let report = construct_nonrecurrent_pair(&fair_bits(), 8, 4, 1, 10).unwrap();
        let json = serde_json::to_string(&report).unwrap();
        let back: PairReport = serde_json::from_str(&json).unwrap();
        assert_eq!(report, back);
    }
}
