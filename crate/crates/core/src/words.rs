//! Finite words, fixed-length languages, and full-binary-tree admission.
//!
//! A language `L ⊆ A^m` admits a full binary tree when the trie of `L`
//! contains a complete binary subtree of depth `m` rooted at the empty word
//! whose `2^m` leaves all lie in `L`. Admission is decided by a bottom-up
//! supportability pass over the trie and, on success, returns a checkable
//! [`TreeCertificate`] — the level sets of the embedded subtree. From any
//! certificate one extracts, for each `u ∈ L`, a partner `v ∈ L` with
//! `v_i ≠ u_i` at every coordinate.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite alphabet whose symbols are `0..size`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Alphabet {
    size: u32,
}

impl Alphabet {
    pub fn new(size: u32) -> Result<Self> {
        if size == 0 {
            return Err(Error::Parameter("alphabet size must be at least 1".into()));
        }
        Ok(Alphabet { size })
    }

    pub fn size(&self) -> u32 {
        self.size
    }

    pub fn contains(&self, symbol: u32) -> bool {
        symbol < self.size
    }

    /// `size^len` if it fits in a `u64`.
    pub fn word_count(&self, len: usize) -> Option<u64> {
        let mut count: u64 = 1;
        for _ in 0..len {
            count = count.checked_mul(u64::from(self.size))?;
        }
        Some(count)
    }

    /// Build a word after validating every symbol.
    pub fn word(&self, symbols: Vec<u32>) -> Result<Word> {
        if let Some(&bad) = symbols.iter().find(|&&s| !self.contains(s)) {
            return Err(Error::Validation(format!(
                "symbol {bad} is outside alphabet of size {}",
                self.size
            )));
        }
        Ok(Word(symbols))
    }

    /// Lexicographic rank of `word` among all words of its length.
    ///
    /// The caller must ensure `size^len` fits in a `u64`.
    pub fn rank(&self, word: &Word) -> u64 {
        let mut rank: u64 = 0;
        for &symbol in word.symbols() {
            rank = rank * u64::from(self.size) + u64::from(symbol);
        }
        rank
    }

    /// Inverse of [`Alphabet::rank`].
    pub fn unrank(&self, mut rank: u64, len: usize) -> Word {
        let mut symbols = vec![0u32; len];
        for slot in symbols.iter_mut().rev() {
            *slot = (rank % u64::from(self.size)) as u32;
            rank /= u64::from(self.size);
        }
        Word(symbols)
    }

    /// Render a word as symbol digits, '.'-separated when the alphabet has
    /// more than 10 symbols.
    pub fn format_word(&self, word: &Word) -> String {
        if self.size <= 10 {
            word.symbols().iter().map(|s| s.to_string()).collect()
        } else {
            word.symbols()
                .iter()
                .map(|s| s.to_string())
                .collect::<Vec<_>>()
                .join(".")
        }
    }

    /// Parse the format produced by [`Alphabet::format_word`].
    pub fn parse_word(&self, text: &str) -> Result<Word> {
        if text.is_empty() {
            return Ok(Word::empty());
        }
        let symbols: Vec<u32> = if self.size <= 10 {
            text.chars()
                .map(|c| {
                    c.to_digit(10)
                        .ok_or_else(|| Error::Validation(format!("invalid symbol digit {c:?}")))
                })
                .collect::<Result<_>>()?
        } else {
            text.split('.')
                .map(|part| {
                    part.parse::<u32>()
                        .map_err(|_| Error::Validation(format!("invalid symbol {part:?}")))
                })
                .collect::<Result<_>>()?
        };
        self.word(symbols)
    }
}

/// A finite string of alphabet symbols. Ordering is lexicographic.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Word(Vec<u32>);

impl Word {
    pub fn new(symbols: Vec<u32>) -> Self {
        Word(symbols)
    }

    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn symbols(&self) -> &[u32] {
        &self.0
    }

    pub fn symbol(&self, index: usize) -> u32 {
        self.0[index]
    }

    pub fn last(&self) -> Option<u32> {
        self.0.last().copied()
    }

    /// A copy of this word with one extra symbol appended.
    pub fn extended(&self, symbol: u32) -> Word {
        let mut symbols = Vec::with_capacity(self.0.len() + 1);
        symbols.extend_from_slice(&self.0);
        symbols.push(symbol);
        Word(symbols)
    }

    pub fn prefix(&self, len: usize) -> Word {
        Word(self.0[..len].to_vec())
    }

    pub fn has_prefix(&self, prefix: &Word) -> bool {
        self.0.len() >= prefix.0.len() && self.0[..prefix.0.len()] == prefix.0[..]
    }
}

/// A set of words of one fixed length over one alphabet.
///
/// Words are kept sorted for deterministic iteration, with a hash set for
/// membership tests; the admission trie is built on demand.
#[derive(Debug, Clone)]
pub struct Language {
    alphabet: Alphabet,
    word_length: usize,
    words: Vec<Word>,
    members: HashSet<Word>,
}

impl Language {
    pub fn new<I>(alphabet: Alphabet, word_length: usize, words: I) -> Result<Self>
    where
        I: IntoIterator<Item = Word>,
    {
        let mut words: Vec<Word> = words.into_iter().collect();
        for word in &words {
            if word.len() != word_length {
                return Err(Error::Validation(format!(
                    "word of length {} in language of word length {}",
                    word.len(),
                    word_length
                )));
            }
            if let Some(&bad) = word.symbols().iter().find(|&&s| !alphabet.contains(s)) {
                return Err(Error::Validation(format!(
                    "symbol {bad} is outside alphabet of size {}",
                    alphabet.size()
                )));
            }
        }
        words.sort_unstable();
        words.dedup();
        let members = words.iter().cloned().collect();
        Ok(Language {
            alphabet,
            word_length,
            words,
            members,
        })
    }

    /// The language of all words of the given length.
    pub fn full(alphabet: Alphabet, word_length: usize) -> Result<Self> {
        let count = alphabet
            .word_count(word_length)
            .filter(|&c| c <= (1 << 24))
            .ok_or_else(|| Error::Size("full language too large to enumerate".into()))?;
        let words = (0..count).map(|r| alphabet.unrank(r, word_length)).collect();
        Ok(Language {
            alphabet,
            word_length,
            words,
            members: (0..count).map(|r| alphabet.unrank(r, word_length)).collect(),
        })
    }

    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn word_length(&self) -> usize {
        self.word_length
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn contains(&self, word: &Word) -> bool {
        self.members.contains(word)
    }

    /// Words in lexicographic order.
    pub fn words(&self) -> &[Word] {
        &self.words
    }

    /// Every word paired with uniform mass, for cover construction.
    pub fn uniform_members(&self) -> Vec<(Word, f64)> {
        let mass = 1.0 / self.words.len().max(1) as f64;
        self.words.iter().map(|w| (w.clone(), mass)).collect()
    }
}

/// Parse a newline-delimited word file into a language.
///
/// Blank lines are skipped; the word length is taken from the first word.
pub fn parse_language(alphabet: Alphabet, text: &str) -> Result<Language> {
    let mut words = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        words.push(alphabet.parse_word(line)?);
    }
    let word_length = words.first().map_or(0, Word::len);
    Language::new(alphabet, word_length, words)
}

/// Render a language in the newline-delimited word format.
pub fn format_language(lang: &Language) -> String {
    let mut out = String::new();
    for word in lang.words() {
        out.push_str(&lang.alphabet().format_word(word));
        out.push('\n');
    }
    out
}

#[derive(Serialize, Deserialize)]
struct CertificateRepr {
    alphabet: u32,
    depth: usize,
    levels: Vec<Vec<String>>,
}

/// Witness that a language admits a full binary tree: the level sets
/// `L_0, …, L_m` of a complete binary subtree of the trie, rooted at the
/// empty word, whose leaves all lie in the language.
///
/// Each word in `levels[i+1]` extends its length-`i` prefix in `levels[i]`,
/// and every word in `levels[i]` has exactly two extensions in
/// `levels[i+1]`, differing in their last symbol.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "CertificateRepr", into = "CertificateRepr")]
pub struct TreeCertificate {
    alphabet: Alphabet,
    depth: usize,
    levels: Vec<Vec<Word>>,
}

impl TreeCertificate {
    pub fn alphabet(&self) -> Alphabet {
        self.alphabet
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Level sets `L_0, …, L_m`, each sorted lexicographically.
    pub fn levels(&self) -> &[Vec<Word>] {
        &self.levels
    }

    /// The `2^m` leaves, sorted lexicographically.
    pub fn leaves(&self) -> &[Word] {
        self.levels.last().expect("certificate has a leaf level")
    }
}

impl From<TreeCertificate> for CertificateRepr {
    fn from(cert: TreeCertificate) -> Self {
        let levels = cert
            .levels
            .iter()
            .map(|level| level.iter().map(|w| cert.alphabet.format_word(w)).collect())
            .collect();
        CertificateRepr {
            alphabet: cert.alphabet.size(),
            depth: cert.depth,
            levels,
        }
    }
}

impl TryFrom<CertificateRepr> for TreeCertificate {
    type Error = Error;

    fn try_from(repr: CertificateRepr) -> Result<Self> {
        let alphabet = Alphabet::new(repr.alphabet)?;
        let levels = repr
            .levels
            .iter()
            .map(|level| level.iter().map(|s| alphabet.parse_word(s)).collect())
            .collect::<Result<Vec<Vec<Word>>>>()?;
        if levels.len() != repr.depth + 1 {
            return Err(Error::Certificate(format!(
                "certificate of depth {} has {} levels",
                repr.depth,
                levels.len()
            )));
        }
        Ok(TreeCertificate {
            alphabet,
            depth: repr.depth,
            levels,
        })
    }
}

struct Trie {
    // children[node] lists (symbol, child) in ascending symbol order.
    children: Vec<Vec<(u32, usize)>>,
}

impl Trie {
    fn build(lang: &Language) -> Trie {
        let mut children: Vec<Vec<(u32, usize)>> = vec![Vec::new()];
        for word in lang.words() {
            let mut node = 0usize;
            for &symbol in word.symbols() {
                // Words arrive sorted, so the relevant child is always last.
                node = match children[node].last() {
                    Some(&(s, idx)) if s == symbol => idx,
                    _ => {
                        let idx = children.len();
                        children[node].push((symbol, idx));
                        children.push(Vec::new());
                        idx
                    }
                };
            }
        }
        Trie { children }
    }

    /// Bottom-up supportability: a depth-`m` node supports a subtree iff it
    /// is a leaf of the trie; an inner node does iff at least two of its
    /// children do.
    fn mark_supportable(&self, node: usize, depth: usize, m: usize, flags: &mut [bool]) {
        if depth == m {
            flags[node] = true;
            return;
        }
        let mut supported = 0;
        for &(_, child) in &self.children[node] {
            self.mark_supportable(child, depth + 1, m, flags);
            if flags[child] {
                supported += 1;
            }
        }
        flags[node] = supported >= 2;
    }
}

/// Decide whether `lang` admits a full binary tree and return the witnessing
/// certificate if so.
///
/// Deterministic: at each node with more than two supportable children, the
/// two with smallest last symbols are kept.
pub fn admits_full_binary_tree(lang: &Language) -> Option<TreeCertificate> {
    let m = lang.word_length();
    if m == 0 {
        if lang.contains(&Word::empty()) {
            return Some(TreeCertificate {
                alphabet: lang.alphabet(),
                depth: 0,
                levels: vec![vec![Word::empty()]],
            });
        }
        return None;
    }
    if lang.len() < 2 {
        return None;
    }

    let trie = Trie::build(lang);
    let mut flags = vec![false; trie.children.len()];
    trie.mark_supportable(0, 0, m, &mut flags);
    if !flags[0] {
        return None;
    }

    let mut levels: Vec<Vec<Word>> = vec![vec![Word::empty()]];
    let mut frontier: Vec<(usize, Word)> = vec![(0, Word::empty())];
    for _ in 0..m {
        let mut next = Vec::with_capacity(frontier.len() * 2);
        for (node, word) in &frontier {
            let mut picked = 0;
            for &(symbol, child) in &trie.children[*node] {
                if flags[child] {
                    next.push((child, word.extended(symbol)));
                    picked += 1;
                    if picked == 2 {
                        break;
                    }
                }
            }
            debug_assert_eq!(picked, 2, "supportable node lost its children");
        }
        levels.push(next.iter().map(|(_, w)| w.clone()).collect());
        frontier = next;
    }

    Some(TreeCertificate {
        alphabet: lang.alphabet(),
        depth: m,
        levels,
    })
}

/// Check every structural invariant of a certificate against its language.
pub fn validate_certificate(lang: &Language, cert: &TreeCertificate) -> Result<()> {
    let m = lang.word_length();
    if cert.alphabet != lang.alphabet() {
        return Err(Error::Certificate("alphabet mismatch".into()));
    }
    if cert.depth != m || cert.levels.len() != m + 1 {
        return Err(Error::Certificate(format!(
            "certificate depth {} does not match word length {m}",
            cert.depth
        )));
    }
    if m >= 63 {
        return Err(Error::Size("certificate depth too large to check".into()));
    }
    if cert.levels[0] != vec![Word::empty()] {
        return Err(Error::Certificate("level 0 is not the empty word".into()));
    }
    for (i, level) in cert.levels.iter().enumerate() {
        if level.len() != 1usize << i {
            return Err(Error::Certificate(format!(
                "level {i} has {} words, expected {}",
                level.len(),
                1usize << i
            )));
        }
        for pair in level.windows(2) {
            if pair[0] >= pair[1] {
                return Err(Error::Certificate(format!("level {i} is not sorted")));
            }
        }
        for word in level {
            if word.len() != i {
                return Err(Error::Certificate(format!(
                    "level {i} contains a word of length {}",
                    word.len()
                )));
            }
            if word.symbols().iter().any(|&s| !cert.alphabet.contains(s)) {
                return Err(Error::Certificate(format!("level {i} has an invalid symbol")));
            }
        }
    }
    for i in 0..m {
        let parents = &cert.levels[i];
        let level = &cert.levels[i + 1];
        for word in level {
            let parent = word.prefix(i);
            if parents.binary_search(&parent).is_err() {
                return Err(Error::Certificate(format!(
                    "level {} word has no parent in level {i}",
                    i + 1
                )));
            }
        }
        for parent in parents {
            let children: Vec<&Word> =
                level.iter().filter(|w| w.has_prefix(parent)).collect();
            if children.len() != 2 {
                return Err(Error::Certificate(format!(
                    "a level-{i} node has {} extensions, expected 2",
                    children.len()
                )));
            }
            if children[0].last() == children[1].last() {
                return Err(Error::Certificate(
                    "the two extensions of a node share their last symbol".into(),
                ));
            }
        }
    }
    for leaf in cert.leaves() {
        if !lang.contains(leaf) {
            return Err(Error::Certificate(format!(
                "leaf {} is not in the language",
                lang.alphabet().format_word(leaf)
            )));
        }
    }
    Ok(())
}

/// Given a certificate for `lang` and `u ∈ lang`, return `v ∈ lang` with
/// `v_i ≠ u_i` for every `i`.
///
/// `v` descends the certificate, choosing at each level the
/// lexicographically smallest child whose last symbol differs from the
/// corresponding symbol of `u`.
pub fn extract_separated_pair(lang: &Language, cert: &TreeCertificate, u: &Word) -> Result<Word> {
    validate_certificate(lang, cert)?;
    if u.len() != lang.word_length() {
        return Err(Error::Parameter(format!(
            "u has length {}, expected {}",
            u.len(),
            lang.word_length()
        )));
    }
    if !lang.contains(u) {
        return Err(Error::Parameter("u is not in the language".into()));
    }

    let mut current = Word::empty();
    for i in 0..cert.depth {
        let level = &cert.levels[i + 1];
        let start = level.partition_point(|w| w.prefix(i) < current);
        let chosen = level[start..]
            .iter()
            .take_while(|w| w.has_prefix(&current))
            .find(|w| w.last() != Some(u.symbol(i)));
        match chosen {
            Some(word) => current = word.clone(),
            None => {
                return Err(Error::Certificate(format!(
                    "no extension avoiding symbol {} at level {}",
                    u.symbol(i),
                    i + 1
                )))
            }
        }
    }
    Ok(current)
}

/// Exhaustive search for an embedded complete binary subtree, independent of
/// the trie machinery: recurse over all one-symbol extensions of the current
/// prefix and require at least two supportable branches at every level.
///
/// Guarded to `|A|^m ≤ 2^16`.
pub fn brute_force_tree_oracle(lang: &Language) -> Result<bool> {
    let count = lang
        .alphabet()
        .word_count(lang.word_length())
        .filter(|&c| c <= 1 << 16)
        .ok_or_else(|| {
            Error::Size("brute-force oracle domain exceeds 2^16 words".into())
        })?;
    let _ = count;

    fn search(lang: &Language, prefix: &mut Vec<u32>, remaining: usize) -> bool {
        if remaining == 0 {
            return lang.contains(&Word::new(prefix.clone()));
        }
        let mut branches = 0;
        for symbol in 0..lang.alphabet().size() {
            prefix.push(symbol);
            let ok = search(lang, prefix, remaining - 1);
            prefix.pop();
            if ok {
                branches += 1;
                if branches == 2 {
                    return true;
                }
            }
        }
        branches >= 2
    }

    let mut prefix = Vec::with_capacity(lang.word_length());
    if lang.word_length() == 0 {
        return Ok(lang.contains(&Word::empty()));
    }
    Ok(search(lang, &mut prefix, lang.word_length()))
}
