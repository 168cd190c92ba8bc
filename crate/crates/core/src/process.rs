//! Stationary symbolic process models, seeded path sampling, and exact or
//! empirical block distributions, unconditional and conditioned on a fixed
//! symbol pattern.
//!
//! Exact computations cover i.i.d. and Markov models; function-of-Markov and
//! empirical models are served by seeded sampling. All randomness flows from
//! caller-supplied seeds through [`crate::rng`], so every operation is
//! reproducible bit for bit.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{sample_below, sample_categorical, stream_rng};
use crate::words::{Alphabet, Word};

const ROW_SUM_TOL: f64 = 1e-12;
/// Exact block tables are refused above this many entries.
pub const EXACT_SUPPORT_LIMIT: u64 = 1 << 24;
/// Default minimum accepted samples per conditioning atom in empirical mode.
pub const MIN_ATOM_SAMPLES: usize = 200;

const TAG_SAMPLE_PATH: u64 = 0x70617468; // "path"
const TAG_EMPIRICAL_BLOCKS: u64 = 0x626c6f63; // "bloc"
const TAG_REJECTION: u64 = 0x72656a65; // "reje"

#[derive(Debug, Clone, PartialEq)]
enum ModelKind {
    Iid {
        probs: Vec<f64>,
    },
    Markov {
        transition: Vec<Vec<f64>>,
    },
    FunctionOfMarkov {
        transition: Vec<Vec<f64>>,
        symbol_map: Vec<u32>,
        alphabet: Alphabet,
    },
    Empirical {
        path: Vec<u32>,
        alphabet: Alphabet,
    },
}

/// JSON shape of a model file: a variant tag plus probability tables.
#[derive(Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
enum ModelSpec {
    Iid { probs: Vec<f64> },
    Markov { transition: Vec<Vec<f64>> },
    FunctionOfMarkov { transition: Vec<Vec<f64>>, symbol_map: Vec<u32> },
    Empirical { alphabet: u32, path: String },
}

/// A stationary symbolic source over a finite alphabet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelSpec", into = "ModelSpec")]
pub struct ProcessModel {
    kind: ModelKind,
}

impl ProcessModel {
    /// Independent draws from a fixed symbol law.
    pub fn iid(probs: Vec<f64>) -> Result<Self> {
        validate_prob_vector(&probs)?;
        Ok(ProcessModel { kind: ModelKind::Iid { probs } })
    }

    /// A stationary Markov chain started from its stationary vector.
    pub fn markov(transition: Vec<Vec<f64>>) -> Result<Self> {
        validate_stochastic_matrix(&transition)?;
        Ok(ProcessModel { kind: ModelKind::Markov { transition } })
    }

    /// A symbol-mapped hidden Markov chain; the symbol map must cover every
    /// hidden state.
    pub fn function_of_markov(transition: Vec<Vec<f64>>, symbol_map: Vec<u32>) -> Result<Self> {
        validate_stochastic_matrix(&transition)?;
        if symbol_map.len() != transition.len() {
            return Err(Error::Model(format!(
                "symbol map covers {} states, chain has {}",
                symbol_map.len(),
                transition.len()
            )));
        }
        let max = symbol_map.iter().copied().max().unwrap_or(0);
        let alphabet = Alphabet::new(max + 1)?;
        Ok(ProcessModel {
            kind: ModelKind::FunctionOfMarkov { transition, symbol_map, alphabet },
        })
    }

    /// A reference path sampled by sliding a uniformly random window.
    pub fn empirical(path: Vec<u32>, alphabet: Alphabet) -> Result<Self> {
        if path.is_empty() {
            return Err(Error::Model("empirical model needs a non-empty path".into()));
        }
        if let Some(&bad) = path.iter().find(|&&s| !alphabet.contains(s)) {
            return Err(Error::Model(format!(
                "path symbol {bad} outside alphabet of size {}",
                alphabet.size()
            )));
        }
        Ok(ProcessModel { kind: ModelKind::Empirical { path, alphabet } })
    }

    pub fn alphabet(&self) -> Alphabet {
        match &self.kind {
            ModelKind::Iid { probs } => Alphabet::new(probs.len() as u32).expect("validated"),
            ModelKind::Markov { transition } => {
                Alphabet::new(transition.len() as u32).expect("validated")
            }
            ModelKind::FunctionOfMarkov { alphabet, .. } => *alphabet,
            ModelKind::Empirical { alphabet, .. } => *alphabet,
        }
    }

    /// Whether exact block and conditional tables are available.
    pub fn supports_exact(&self) -> bool {
        matches!(self.kind, ModelKind::Iid { .. } | ModelKind::Markov { .. })
    }

    pub fn is_markov(&self) -> bool {
        matches!(self.kind, ModelKind::Markov { .. })
    }

    /// The symbol law of an i.i.d. model.
    pub fn iid_symbol_probs(&self) -> Option<&[f64]> {
        match &self.kind {
            ModelKind::Iid { probs } => Some(probs),
            _ => None,
        }
    }

    pub fn markov_transition(&self) -> Option<&[Vec<f64>]> {
        match &self.kind {
            ModelKind::Markov { transition } => Some(transition),
            _ => None,
        }
    }
}

impl From<ProcessModel> for ModelSpec {
    fn from(model: ProcessModel) -> Self {
        match model.kind {
            ModelKind::Iid { probs } => ModelSpec::Iid { probs },
            ModelKind::Markov { transition } => ModelSpec::Markov { transition },
            ModelKind::FunctionOfMarkov { transition, symbol_map, .. } => {
                ModelSpec::FunctionOfMarkov { transition, symbol_map }
            }
            ModelKind::Empirical { path, alphabet } => ModelSpec::Empirical {
                alphabet: alphabet.size(),
                path: alphabet.format_word(&Word::new(path)),
            },
        }
    }
}

impl TryFrom<ModelSpec> for ProcessModel {
    type Error = Error;

    fn try_from(spec: ModelSpec) -> Result<Self> {
        match spec {
            ModelSpec::Iid { probs } => ProcessModel::iid(probs),
            ModelSpec::Markov { transition } => ProcessModel::markov(transition),
            ModelSpec::FunctionOfMarkov { transition, symbol_map } => {
                ProcessModel::function_of_markov(transition, symbol_map)
            }
            ModelSpec::Empirical { alphabet, path } => {
                let alphabet = Alphabet::new(alphabet)?;
                let word = alphabet.parse_word(&path)?;
                ProcessModel::empirical(word.symbols().to_vec(), alphabet)
            }
        }
    }
}

fn validate_prob_vector(probs: &[f64]) -> Result<()> {
    if probs.is_empty() {
        return Err(Error::Model("empty probability vector".into()));
    }
    if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::Model("probabilities must be finite and non-negative".into()));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > ROW_SUM_TOL {
        return Err(Error::Model(format!("probabilities sum to {sum}, expected 1")));
    }
    Ok(())
}

fn validate_stochastic_matrix(matrix: &[Vec<f64>]) -> Result<()> {
    if matrix.is_empty() {
        return Err(Error::Model("empty transition matrix".into()));
    }
    for row in matrix {
        if row.len() != matrix.len() {
            return Err(Error::Model("transition matrix must be square".into()));
        }
        validate_prob_vector(row)?;
    }
    Ok(())
}

/// Whether every row is a point mass (deterministic dynamics).
pub(crate) fn is_deterministic_matrix(matrix: &[Vec<f64>]) -> bool {
    matrix.iter().all(|row| {
        row.iter()
            .all(|&p| p.abs() <= ROW_SUM_TOL || (p - 1.0).abs() <= ROW_SUM_TOL)
    })
}

/// The unique stationary vector of an irreducible aperiodic row-stochastic
/// matrix, by power iteration to residual below `1e-12`.
pub fn markov_stationary(transition: &[Vec<f64>]) -> Result<Vec<f64>> {
    validate_stochastic_matrix(transition)?;
    let n = transition.len();

    let reachable = |from: usize, reversed: bool| -> Vec<bool> {
        let mut seen = vec![false; n];
        let mut stack = vec![from];
        seen[from] = true;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                let edge = if reversed { transition[j][i] } else { transition[i][j] };
                if edge > 0.0 && !seen[j] {
                    seen[j] = true;
                    stack.push(j);
                }
            }
        }
        seen
    };
    if reachable(0, false).iter().any(|r| !r) || reachable(0, true).iter().any(|r| !r) {
        return Err(Error::Model("transition matrix is reducible".into()));
    }

    // Period via BFS levels: gcd of d(u)+1-d(v) over edges u->v.
    let mut dist = vec![usize::MAX; n];
    let mut queue = std::collections::VecDeque::from([0usize]);
    dist[0] = 0;
    while let Some(i) = queue.pop_front() {
        for j in 0..n {
            if transition[i][j] > 0.0 && dist[j] == usize::MAX {
                dist[j] = dist[i] + 1;
                queue.push_back(j);
            }
        }
    }
    let mut period: u64 = 0;
    for i in 0..n {
        for j in 0..n {
            if transition[i][j] > 0.0 {
                let diff = (dist[i] as u64 + 1).abs_diff(dist[j] as u64);
                period = gcd(period, diff);
            }
        }
    }
    if period != 1 {
        return Err(Error::Model(format!(
            "transition matrix is periodic with period {period}"
        )));
    }

    let mut pi = vec![1.0 / n as f64; n];
    for _ in 0..1_000_000 {
        let mut next = vec![0.0; n];
        for (i, &p) in pi.iter().enumerate() {
            if p > 0.0 {
                for j in 0..n {
                    next[j] += p * transition[i][j];
                }
            }
        }
        let total: f64 = next.iter().sum();
        for v in &mut next {
            *v /= total;
        }
        let residual = pi
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        pi = next;
        if residual < 1e-12 {
            return Ok(pi);
        }
    }
    Err(Error::Model("power iteration did not converge".into()))
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Model state prepared once so repeated draws stay cheap.
enum PreparedSampler<'a> {
    Iid {
        probs: &'a [f64],
    },
    Markov {
        pi: Vec<f64>,
        transition: &'a [Vec<f64>],
    },
    FunctionOfMarkov {
        pi: Vec<f64>,
        transition: &'a [Vec<f64>],
        symbol_map: &'a [u32],
    },
    Empirical {
        path: &'a [u32],
    },
}

impl<'a> PreparedSampler<'a> {
    fn prepare(model: &'a ProcessModel) -> Result<Self> {
        Ok(match &model.kind {
            ModelKind::Iid { probs } => PreparedSampler::Iid { probs },
            ModelKind::Markov { transition } => PreparedSampler::Markov {
                pi: markov_stationary(transition)?,
                transition,
            },
            ModelKind::FunctionOfMarkov { transition, symbol_map, .. } => {
                PreparedSampler::FunctionOfMarkov {
                    pi: markov_stationary(transition)?,
                    transition,
                    symbol_map,
                }
            }
            ModelKind::Empirical { path, .. } => PreparedSampler::Empirical { path },
        })
    }

    /// Draw `len` consecutive symbols: the leftmost marginal from the
    /// stationary law, then forward evolution.
    fn draw(&self, len: usize, rng: &mut ChaCha8Rng) -> Result<Vec<u32>> {
        let mut out = Vec::with_capacity(len);
        match self {
            PreparedSampler::Iid { probs } => {
                for _ in 0..len {
                    out.push(sample_categorical(rng, probs) as u32);
                }
            }
            PreparedSampler::Markov { pi, transition } => {
                let mut state = sample_categorical(rng, pi);
                out.push(state as u32);
                for _ in 1..len {
                    state = sample_categorical(rng, &transition[state]);
                    out.push(state as u32);
                }
            }
            PreparedSampler::FunctionOfMarkov { pi, transition, symbol_map } => {
                let mut state = sample_categorical(rng, pi);
                out.push(symbol_map[state]);
                for _ in 1..len {
                    state = sample_categorical(rng, &transition[state]);
                    out.push(symbol_map[state]);
                }
            }
            PreparedSampler::Empirical { path } => {
                if path.len() < len {
                    return Err(Error::Parameter(format!(
                        "reference path of length {} cannot supply a window of {len}",
                        path.len()
                    )));
                }
                let offset = sample_below(rng, (path.len() - len + 1) as u64) as usize;
                out.extend_from_slice(&path[offset..offset + len]);
            }
        }
        Ok(out)
    }
}

/// A realization of a process on an integer interval `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplePath {
    alphabet: Alphabet,
    lo: i64,
    seed: u64,
    symbols: Vec<u32>,
}

impl SamplePath {
    pub fn new(alphabet: Alphabet, lo: i64, symbols: Vec<u32>, seed: u64) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::Parameter("sample path interval is empty".into()));
        }
        if let Some(&bad) = symbols.iter().find(|&&s| !alphabet.contains(s)) {
            return Err(Error::Validation(format!(
                "path symbol {bad} outside alphabet of size {}",
                alphabet.size()
            )));
        }
        Ok(SamplePath { alphabet, lo, seed, symbols })
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn lo(&self) -> i64 {
        self.lo
    }

    pub fn hi(&self) -> i64 {
        self.lo + self.symbols.len() as i64 - 1
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn symbols(&self) -> &[u32] {
        &self.symbols
    }

    pub fn get(&self, index: i64) -> Option<u32> {
        if index < self.lo || index > self.hi() {
            None
        } else {
            Some(self.symbols[(index - self.lo) as usize])
        }
    }

    pub(crate) fn set(&mut self, index: i64, symbol: u32) {
        debug_assert!(self.alphabet.contains(symbol));
        let offset = (index - self.lo) as usize;
        self.symbols[offset] = symbol;
    }

    /// The word on the half-open index range `[lo, hi)`.
    pub fn slice(&self, lo: i64, hi: i64) -> Result<Word> {
        if lo >= hi {
            return Err(Error::Parameter("empty slice".into()));
        }
        if lo < self.lo || hi > self.hi() + 1 {
            return Err(Error::Parameter(format!(
                "slice [{lo}, {hi}) outside path window [{}, {}]",
                self.lo,
                self.hi()
            )));
        }
        let a = (lo - self.lo) as usize;
        let b = (hi - self.lo) as usize;
        Ok(Word::new(self.symbols[a..b].to_vec()))
    }

    /// Text export: the symbols as one word string.
    pub fn to_text(&self) -> String {
        self.alphabet.format_word(&Word::new(self.symbols.clone()))
    }

    /// Binary export with header (alphabet size, lo index, length), all
    /// little-endian, followed by one `u32` per symbol.
    pub fn write_binary<W: Write>(&self, mut writer: W) -> Result<()> {
        writer.write_all(&self.alphabet.size().to_le_bytes())?;
        writer.write_all(&self.lo.to_le_bytes())?;
        writer.write_all(&(self.symbols.len() as u64).to_le_bytes())?;
        for &s in &self.symbols {
            writer.write_all(&s.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut reader: R) -> Result<Self> {
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        reader.read_exact(&mut b4)?;
        let alphabet = Alphabet::new(u32::from_le_bytes(b4))?;
        reader.read_exact(&mut b8)?;
        let lo = i64::from_le_bytes(b8);
        reader.read_exact(&mut b8)?;
        let len = u64::from_le_bytes(b8) as usize;
        let mut symbols = Vec::with_capacity(len);
        for _ in 0..len {
            reader.read_exact(&mut b4)?;
            symbols.push(u32::from_le_bytes(b4));
        }
        SamplePath::new(alphabet, lo, symbols, 0)
    }
}

/// Sample a path on `[lo, hi]`, deterministic in `(model, interval, seed)`.
pub fn sample_path(model: &ProcessModel, lo: i64, hi: i64, seed: u64) -> Result<SamplePath> {
    if hi < lo {
        return Err(Error::Parameter(format!("empty interval [{lo}, {hi}]")));
    }
    let len = (hi - lo + 1) as usize;
    let sampler = PreparedSampler::prepare(model)?;
    let mut rng = stream_rng(seed, &[TAG_SAMPLE_PATH]);
    let symbols = sampler.draw(len, &mut rng)?;
    SamplePath::new(model.alphabet(), lo, symbols, seed)
}

#[derive(Debug, Clone, PartialEq)]
enum Storage {
    /// Probabilities indexed by lexicographic word rank.
    Dense(Vec<f64>),
    Sparse(BTreeMap<Word, f64>),
}

/// A probability table over all words of one block length.
///
/// Dense storage holds one entry per possible word (guarded by
/// [`EXACT_SUPPORT_LIMIT`]); sparse storage holds only positive entries.
/// Iteration is always in lexicographic word order.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDistribution {
    alphabet: Alphabet,
    block_length: usize,
    total_mass: f64,
    /// Number of samples behind a frequency table; `None` for exact tables.
    sample_size: Option<u64>,
    storage: Storage,
}

impl BlockDistribution {
    pub fn from_dense(alphabet: Alphabet, block_length: usize, probs: Vec<f64>) -> Result<Self> {
        let expected = alphabet
            .word_count(block_length)
            .filter(|&c| c <= EXACT_SUPPORT_LIMIT)
            .ok_or_else(|| Error::Size("dense block table exceeds the support limit".into()))?;
        if probs.len() as u64 != expected {
            return Err(Error::Validation(format!(
                "dense table has {} entries, expected {expected}",
                probs.len()
            )));
        }
        validate_masses(probs.iter().copied())?;
        let total_mass = probs.iter().sum();
        Ok(BlockDistribution {
            alphabet,
            block_length,
            total_mass,
            sample_size: None,
            storage: Storage::Dense(probs),
        })
    }

    pub fn from_sparse(
        alphabet: Alphabet,
        block_length: usize,
        probs: BTreeMap<Word, f64>,
    ) -> Result<Self> {
        for word in probs.keys() {
            if word.len() != block_length {
                return Err(Error::Validation("sparse table key of wrong length".into()));
            }
            if word.symbols().iter().any(|&s| !alphabet.contains(s)) {
                return Err(Error::Validation("sparse table key outside alphabet".into()));
            }
        }
        validate_masses(probs.values().copied())?;
        let total_mass = probs.values().sum();
        Ok(BlockDistribution {
            alphabet,
            block_length,
            total_mass,
            sample_size: None,
            storage: Storage::Sparse(probs),
        })
    }

    /// Frequencies from a count table.
    pub fn from_counts(
        alphabet: Alphabet,
        block_length: usize,
        counts: &BTreeMap<Word, u64>,
        total: u64,
    ) -> Result<Self> {
        if total == 0 {
            return Err(Error::Parameter("empty sample in frequency table".into()));
        }
        let probs = counts
            .iter()
            .map(|(w, &c)| (w.clone(), c as f64 / total as f64))
            .collect();
        let mut dist = BlockDistribution::from_sparse(alphabet, block_length, probs)?;
        dist.sample_size = Some(total);
        Ok(dist)
    }

    /// Number of samples behind a frequency table; `None` for exact tables.
    pub fn sample_size(&self) -> Option<u64> {
        self.sample_size
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn block_length(&self) -> usize {
        self.block_length
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    /// Number of words with positive mass.
    pub fn support_size(&self) -> usize {
        match &self.storage {
            Storage::Dense(v) => v.iter().filter(|&&p| p > 0.0).count(),
            Storage::Sparse(m) => m.values().filter(|&&p| p > 0.0).count(),
        }
    }

    pub fn prob(&self, word: &Word) -> f64 {
        match &self.storage {
            Storage::Dense(v) => v[self.alphabet.rank(word) as usize],
            Storage::Sparse(m) => m.get(word).copied().unwrap_or(0.0),
        }
    }

    /// Positive-mass entries in lexicographic word order.
    pub fn iter(&self) -> Box<dyn Iterator<Item = (Word, f64)> + '_> {
        match &self.storage {
            Storage::Dense(v) => Box::new(v.iter().enumerate().filter(|&(_rank, &p)| p > 0.0).map(|(rank, &p)| (self.alphabet.unrank(rank as u64, self.block_length), p))),
            Storage::Sparse(m) => {
                Box::new(m.iter().filter(|(_, &p)| p > 0.0).map(|(w, &p)| (w.clone(), p)))
            }
        }
    }

    /// Positive probabilities in lexicographic order, without materializing
    /// words.
    pub fn masses(&self) -> Box<dyn Iterator<Item = f64> + '_> {
        match &self.storage {
            Storage::Dense(v) => Box::new(v.iter().copied().filter(|&p| p > 0.0)),
            Storage::Sparse(m) => Box::new(m.values().copied().filter(|&p| p > 0.0)),
        }
    }

    pub(crate) fn dense_probs(&self) -> Option<&[f64]> {
        match &self.storage {
            Storage::Dense(v) => Some(v),
            Storage::Sparse(_) => None,
        }
    }

    /// Rescale to total mass 1.
    pub fn normalized(&self) -> Result<Self> {
        if self.total_mass <= 0.0 {
            return Err(Error::Validation("cannot normalize zero-mass table".into()));
        }
        let scale = 1.0 / self.total_mass;
        let storage = match &self.storage {
            Storage::Dense(v) => Storage::Dense(v.iter().map(|p| p * scale).collect()),
            Storage::Sparse(m) => {
                Storage::Sparse(m.iter().map(|(w, p)| (w.clone(), p * scale)).collect())
            }
        };
        Ok(BlockDistribution {
            alphabet: self.alphabet,
            block_length: self.block_length,
            total_mass: 1.0,
            sample_size: self.sample_size,
            storage,
        })
    }

    /// The law of the sub-word on the given strictly increasing coordinates.
    pub fn marginalize(&self, positions: &[usize]) -> Result<BlockDistribution> {
        if positions.is_empty()
            || positions.windows(2).any(|w| w[0] >= w[1])
            || *positions.last().unwrap() >= self.block_length
        {
            return Err(Error::Parameter("invalid marginalization positions".into()));
        }
        let mut acc: BTreeMap<Word, f64> = BTreeMap::new();
        for (word, p) in self.iter() {
            let sub = Word::new(positions.iter().map(|&i| word.symbol(i)).collect());
            *acc.entry(sub).or_insert(0.0) += p;
        }
        let out_len = positions.len();
        if let Some(count) = self
            .alphabet
            .word_count(out_len)
            .filter(|&c| c <= EXACT_SUPPORT_LIMIT)
        {
            // Dense output keeps downstream consumers on the fast path.
            let mut probs = vec![0.0; count as usize];
            for (word, p) in acc {
                probs[self.alphabet.rank(&word) as usize] = p;
            }
            let mut dist = BlockDistribution::from_dense(self.alphabet, out_len, probs)?;
            dist.sample_size = self.sample_size;
            Ok(dist)
        } else {
            let mut dist = BlockDistribution::from_sparse(self.alphabet, out_len, acc)?;
            dist.sample_size = self.sample_size;
            Ok(dist)
        }
    }

    /// Reinterpret blocks of `group` symbols as single symbols of the product
    /// alphabet `A^group`. Lexicographic ranks are preserved, so a dense
    /// table regroups without copying probabilities.
    pub fn regroup(&self, group: usize) -> Result<BlockDistribution> {
        if group == 0 || !self.block_length.is_multiple_of(group) {
            return Err(Error::Parameter(format!(
                "group {group} does not divide block length {}",
                self.block_length
            )));
        }
        let super_size = self
            .alphabet
            .word_count(group)
            .filter(|&c| c <= EXACT_SUPPORT_LIMIT)
            .ok_or_else(|| Error::Size("product alphabet too large".into()))?;
        let super_alphabet = Alphabet::new(super_size as u32)?;
        let out_len = self.block_length / group;
        let storage = match &self.storage {
            Storage::Dense(v) => Storage::Dense(v.clone()),
            Storage::Sparse(m) => Storage::Sparse(
                m.iter()
                    .map(|(w, &p)| (regroup_word(self.alphabet, w, group), p))
                    .collect(),
            ),
        };
        Ok(BlockDistribution {
            alphabet: super_alphabet,
            block_length: out_len,
            total_mass: self.total_mass,
            sample_size: self.sample_size,
            storage,
        })
    }

    /// JSON table mapping word strings to probabilities (positive entries).
    pub fn to_json_table(&self) -> serde_json::Value {
        let map: BTreeMap<String, f64> = self
            .iter()
            .map(|(w, p)| (self.alphabet.format_word(&w), p))
            .collect();
        serde_json::json!({
            "alphabet": self.alphabet.size(),
            "block_length": self.block_length,
            "total_mass": self.total_mass,
            "probs": map,
        })
    }

    pub fn from_json_table(value: &serde_json::Value) -> Result<Self> {
        let alphabet = Alphabet::new(
            value
                .get("alphabet")
                .and_then(|v| v.as_u64())
                .ok_or_else(|| Error::Validation("table missing alphabet".into()))?
                as u32,
        )?;
        let block_length = value
            .get("block_length")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| Error::Validation("table missing block_length".into()))?
            as usize;
        let probs = value
            .get("probs")
            .and_then(|v| v.as_object())
            .ok_or_else(|| Error::Validation("table missing probs".into()))?;
        let mut map = BTreeMap::new();
        for (key, v) in probs {
            let word = alphabet.parse_word(key)?;
            let p = v
                .as_f64()
                .ok_or_else(|| Error::Validation(format!("non-numeric probability for {key}")))?;
            map.insert(word, p);
        }
        BlockDistribution::from_sparse(alphabet, block_length, map)
    }
}

fn validate_masses<I: Iterator<Item = f64>>(masses: I) -> Result<()> {
    let mut sum = 0.0;
    for p in masses {
        if !p.is_finite() || p < 0.0 {
            return Err(Error::Validation("probabilities must be finite and non-negative".into()));
        }
        sum += p;
    }
    if sum > 1.0 + 1e-9 {
        return Err(Error::Validation(format!("total mass {sum} exceeds 1")));
    }
    Ok(())
}

fn regroup_word(alphabet: Alphabet, word: &Word, group: usize) -> Word {
    let symbols = word
        .symbols()
        .chunks(group)
        .map(|chunk| alphabet.rank(&Word::new(chunk.to_vec())) as u32)
        .collect();
    Word::new(symbols)
}

/// Exact law of a length-`len` block under the stationary law of an i.i.d.
/// or Markov model.
pub fn block_distribution(model: &ProcessModel, len: usize) -> Result<BlockDistribution> {
    if len == 0 {
        return Err(Error::Parameter("block length must be at least 1".into()));
    }
    let alphabet = model.alphabet();
    let count = alphabet
        .word_count(len)
        .filter(|&c| c <= EXACT_SUPPORT_LIMIT)
        .ok_or_else(|| Error::Size("exact block table exceeds the support limit".into()))?;

    if let Some(probs) = model.iid_symbol_probs() {
        return BlockDistribution::from_dense(alphabet, len, iid_dense(probs, len, count as usize));
    }
    if let Some(transition) = model.markov_transition() {
        let pi = markov_stationary(transition)?;
        return BlockDistribution::from_dense(alphabet, len, markov_dense(&pi, transition, len));
    }
    Err(Error::Model("exact block law requires an i.i.d. or Markov model".into()))
}

/// i.i.d. block probabilities, computed canonically from symbol counts so
/// that blocks with equal counts carry bit-identical probabilities.
fn iid_dense(probs: &[f64], len: usize, count: usize) -> Vec<f64> {
    let a = probs.len();
    let mut powers = vec![vec![1.0f64; len + 1]; a];
    for (s, row) in powers.iter_mut().enumerate() {
        for c in 1..=len {
            row[c] = row[c - 1] * probs[s];
        }
    }
    let mut word = vec![0u32; len];
    let mut counts = vec![0usize; a];
    counts[0] = len;
    let mut out = Vec::with_capacity(count);
    for rank in 0..count {
        if rank > 0 {
            let mut i = len;
            loop {
                i -= 1;
                counts[word[i] as usize] -= 1;
                if (word[i] as usize) + 1 < a {
                    word[i] += 1;
                    counts[word[i] as usize] += 1;
                    break;
                }
                word[i] = 0;
                counts[0] += 1;
            }
        }
        let mut p = 1.0;
        for (s, &c) in counts.iter().enumerate() {
            p *= powers[s][c];
        }
        out.push(p);
    }
    out
}

/// Markov block probabilities by level-by-level chain multiplication.
fn markov_dense(pi: &[f64], transition: &[Vec<f64>], len: usize) -> Vec<f64> {
    let a = pi.len();
    let mut current = pi.to_vec();
    for _ in 1..len {
        let mut next = vec![0.0; current.len() * a];
        for (rank, &p) in current.iter().enumerate() {
            if p > 0.0 {
                let last = rank % a;
                for s in 0..a {
                    next[rank * a + s] = p * transition[last][s];
                }
            }
        }
        current = next;
    }
    current
}

/// Empirical block frequencies over `budget` overlapping windows of one
/// seeded sample path.
pub fn empirical_block_distribution(
    model: &ProcessModel,
    len: usize,
    budget: usize,
    seed: u64,
) -> Result<BlockDistribution> {
    if len == 0 || budget == 0 {
        return Err(Error::Parameter("block length and budget must be positive".into()));
    }
    let sampler = PreparedSampler::prepare(model)?;
    let mut rng = stream_rng(seed, &[TAG_EMPIRICAL_BLOCKS]);
    let symbols = sampler.draw(budget + len - 1, &mut rng)?;
    let mut counts: BTreeMap<Word, u64> = BTreeMap::new();
    for window in symbols.windows(len) {
        *counts.entry(Word::new(window.to_vec())).or_insert(0) += 1;
    }
    BlockDistribution::from_counts(model.alphabet(), len, &counts, budget as u64)
}

/// A fixed symbol assignment on a finite set of time indices.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conditioning {
    fixed: BTreeMap<i64, u32>,
}

impl Conditioning {
    pub fn new() -> Self {
        Conditioning::default()
    }

    pub fn fix(&mut self, index: i64, symbol: u32) {
        self.fixed.insert(index, symbol);
    }

    pub fn is_empty(&self) -> bool {
        self.fixed.is_empty()
    }

    pub fn len(&self) -> usize {
        self.fixed.len()
    }

    pub fn get(&self, index: i64) -> Option<u32> {
        self.fixed.get(&index).copied()
    }

    pub fn indices(&self) -> impl Iterator<Item = i64> + '_ {
        self.fixed.keys().copied()
    }

    pub fn entries(&self) -> impl Iterator<Item = (i64, u32)> + '_ {
        self.fixed.iter().map(|(&i, &s)| (i, s))
    }
}

impl FromIterator<(i64, u32)> for Conditioning {
    fn from_iter<T: IntoIterator<Item = (i64, u32)>>(iter: T) -> Self {
        Conditioning { fixed: iter.into_iter().collect() }
    }
}

fn check_conditioning(
    model: &ProcessModel,
    target_lo: i64,
    target_hi: i64,
    cond: &Conditioning,
) -> Result<()> {
    if target_hi < target_lo {
        return Err(Error::Parameter("empty target interval".into()));
    }
    let alphabet = model.alphabet();
    for (index, symbol) in cond.entries() {
        if (target_lo..=target_hi).contains(&index) {
            return Err(Error::Parameter(format!(
                "conditioning index {index} lies inside the target interval"
            )));
        }
        if !alphabet.contains(symbol) {
            return Err(Error::Validation(format!(
                "conditioning symbol {symbol} outside alphabet of size {}",
                alphabet.size()
            )));
        }
    }
    Ok(())
}

/// Exact conditional law of the block on `[target_lo, target_hi]` given the
/// fixed pattern, via forward and backward messages over the spanned
/// interval. Only i.i.d. and Markov models are supported exactly.
pub fn conditional_block_distribution(
    model: &ProcessModel,
    target_lo: i64,
    target_hi: i64,
    cond: &Conditioning,
) -> Result<BlockDistribution> {
    check_conditioning(model, target_lo, target_hi, cond)?;
    let len = (target_hi - target_lo + 1) as usize;
    let alphabet = model.alphabet();
    alphabet
        .word_count(len)
        .filter(|&c| c <= EXACT_SUPPORT_LIMIT)
        .ok_or_else(|| Error::Size("exact conditional table exceeds the support limit".into()))?;

    if let Some(probs) = model.iid_symbol_probs() {
        for (index, symbol) in cond.entries() {
            if probs[symbol as usize] <= 0.0 {
                return Err(Error::Conditioning(format!(
                    "fixed symbol {symbol} at index {index} has probability 0"
                )));
            }
        }
        return block_distribution(model, len);
    }

    let transition = model
        .markov_transition()
        .ok_or_else(|| Error::Model("exact conditioning requires an i.i.d. or Markov model".into()))?;
    let pi = markov_stationary(transition)?;
    let a = transition.len();

    let span_lo = cond.indices().min().unwrap_or(target_lo).min(target_lo);
    let span_hi = cond.indices().max().unwrap_or(target_hi).max(target_hi);

    // Forward message: P(X_t = x, constraints before t), entering the target.
    let mut alpha = pi.clone();
    let mut t = span_lo;
    while t < target_lo {
        if let Some(symbol) = cond.get(t) {
            for (x, value) in alpha.iter_mut().enumerate() {
                if x != symbol as usize {
                    *value = 0.0;
                }
            }
        }
        let mut next = vec![0.0; a];
        for (x, &value) in alpha.iter().enumerate() {
            if value > 0.0 {
                for (y, slot) in next.iter_mut().enumerate() {
                    *slot += value * transition[x][y];
                }
            }
        }
        alpha = next;
        t += 1;
    }

    // Backward message: P(constraints after target_hi | X_{target_hi} = x).
    let mut beta = vec![1.0; a];
    let mut t = span_hi;
    while t > target_hi {
        if let Some(symbol) = cond.get(t) {
            for (x, value) in beta.iter_mut().enumerate() {
                if x != symbol as usize {
                    *value = 0.0;
                }
            }
        }
        let mut prev = vec![0.0; a];
        for (x, slot) in prev.iter_mut().enumerate() {
            for (y, &value) in beta.iter().enumerate() {
                *slot += transition[x][y] * value;
            }
        }
        beta = prev;
        t -= 1;
    }

    let mut table = alpha;
    for _ in 1..len {
        let mut next = vec![0.0; table.len() * a];
        for (rank, &p) in table.iter().enumerate() {
            if p > 0.0 {
                let last = rank % a;
                for s in 0..a {
                    next[rank * a + s] = p * transition[last][s];
                }
            }
        }
        table = next;
    }
    for (rank, value) in table.iter_mut().enumerate() {
        *value *= beta[rank % a];
    }
    let normalizer: f64 = table.iter().sum();
    if normalizer <= 0.0 {
        return Err(Error::Conditioning("conditioning event has probability 0".into()));
    }
    for value in &mut table {
        *value /= normalizer;
    }
    BlockDistribution::from_dense(alphabet, len, table)
}

/// Empirical conditional law by rejection sampling against the fixed pattern.
///
/// Returns the frequency table over accepted samples together with the
/// accepted count; fewer than `min_atom_samples` acceptances is an
/// [`Error::Undersampled`].
pub fn empirical_conditional_block_distribution(
    model: &ProcessModel,
    target_lo: i64,
    target_hi: i64,
    cond: &Conditioning,
    budget: usize,
    min_atom_samples: usize,
    seed: u64,
) -> Result<(BlockDistribution, usize)> {
    check_conditioning(model, target_lo, target_hi, cond)?;
    if budget == 0 {
        return Err(Error::Parameter("rejection budget must be positive".into()));
    }
    let span_lo = cond.indices().min().unwrap_or(target_lo).min(target_lo);
    let span_hi = cond.indices().max().unwrap_or(target_hi).max(target_hi);
    let span_len = (span_hi - span_lo + 1) as usize;
    let len = (target_hi - target_lo + 1) as usize;

    let sampler = PreparedSampler::prepare(model)?;
    let mut rng = stream_rng(seed, &[TAG_REJECTION]);
    let mut counts: BTreeMap<Word, u64> = BTreeMap::new();
    let mut hits = 0usize;
    for _ in 0..budget {
        let symbols = sampler.draw(span_len, &mut rng)?;
        let matches = cond
            .entries()
            .all(|(index, symbol)| symbols[(index - span_lo) as usize] == symbol);
        if !matches {
            continue;
        }
        hits += 1;
        let a = (target_lo - span_lo) as usize;
        let word = Word::new(symbols[a..a + len].to_vec());
        *counts.entry(word).or_insert(0) += 1;
    }
    if hits < min_atom_samples {
        return Err(Error::Undersampled { hits, min: min_atom_samples });
    }
    let dist = BlockDistribution::from_counts(model.alphabet(), len, &counts, hits as u64)?;
    Ok((dist, hits))
}
