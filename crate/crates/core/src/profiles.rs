//! Preference profiles and their derived matrices.
//!
//! A size-`n` instance pairs `n` men with `n` women. Each person ranks the
//! whole opposite side with distinct ranks `1..=n` (1 = most preferred).
//! Person indices are 0-based throughout the Rust API; all rendered text
//! (see [`PreferenceProfile::to_text`]) is 1-based.

use std::collections::BTreeSet;
use std::fmt;

use itertools::Itertools;
use thiserror::Error;

/// Rank value, always in `1..=n`.
pub type Rank = u32;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProfileError {
    #[error("rank matrices must both be {expected}x{expected}, got {got_rows}x{got_cols}")]
    Dimension {
        expected: usize,
        got_rows: usize,
        got_cols: usize,
    },
    #[error("{side} row {row} is not a permutation of 1..={n} (ties or gaps in a ranking)")]
    NotPermutation { side: Side, row: usize, n: usize },
    #[error("instance size must be at least 1")]
    Empty,
}

/// Which gender a rank matrix belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Men,
    Women,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Men => Side::Women,
            Side::Women => Side::Men,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Side::Men => write!(f, "men"),
            Side::Women => write!(f, "women"),
        }
    }
}

/// A full set of strict rankings for `n` men and `n` women.
///
/// `men_ranks[m][w]` is the rank man `m` gives woman `w`; `women_ranks[w][m]`
/// is the rank woman `w` gives man `m`. Every row is a permutation of
/// `1..=n`. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PreferenceProfile {
    n: usize,
    men_ranks: Vec<Rank>,
    women_ranks: Vec<Rank>,
}

fn is_permutation_row(row: &[Rank], n: usize) -> bool {
    let mut seen = vec![false; n];
    for &r in row {
        if r < 1 || r as usize > n || seen[r as usize - 1] {
            return false;
        }
        seen[r as usize - 1] = true;
    }
    true
}

fn flatten_checked(
    rows: Vec<Vec<Rank>>,
    n: usize,
    side: Side,
) -> Result<Vec<Rank>, ProfileError> {
    let mut flat = Vec::with_capacity(n * n);
    for (i, row) in rows.into_iter().enumerate() {
        if row.len() != n {
            return Err(ProfileError::Dimension {
                expected: n,
                got_rows: n,
                got_cols: row.len(),
            });
        }
        if !is_permutation_row(&row, n) {
            return Err(ProfileError::NotPermutation { side, row: i + 1, n });
        }
        flat.extend(row);
    }
    Ok(flat)
}

impl PreferenceProfile {
    /// Validates and builds a profile from the two rank matrices.
    pub fn new(
        men_ranks: Vec<Vec<Rank>>,
        women_ranks: Vec<Vec<Rank>>,
    ) -> Result<Self, ProfileError> {
        let n = men_ranks.len();
        if n == 0 {
            return Err(ProfileError::Empty);
        }
        if women_ranks.len() != n {
            return Err(ProfileError::Dimension {
                expected: n,
                got_rows: women_ranks.len(),
                got_cols: women_ranks.first().map_or(0, Vec::len),
            });
        }
        Ok(PreferenceProfile {
            n,
            men_ranks: flatten_checked(men_ranks, n, Side::Men)?,
            women_ranks: flatten_checked(women_ranks, n, Side::Women)?,
        })
    }

    /// The canonical joint profile for a key: woman `w` ranks man `m` as
    /// `((m - w) mod n) + 1` (the cyclic Latin square), and every man's
    /// answer is forced by the key.
    pub fn from_key(key: &KeyFunction) -> Self {
        let n = key.n();
        let mut women_ranks = vec![0; n * n];
        let mut men_ranks = vec![0; n * n];
        for w in 0..n {
            for m in 0..n {
                let s = ((m + n - w) % n) as Rank + 1;
                women_ranks[w * n + m] = s;
                men_ranks[m * n + w] = key.apply(s);
            }
        }
        PreferenceProfile {
            n,
            men_ranks,
            women_ranks,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Rank man `m` gives woman `w` (0-based indices).
    pub fn men_rank(&self, m: usize, w: usize) -> Rank {
        self.men_ranks[m * self.n + w]
    }

    /// Rank woman `w` gives man `m` (0-based indices).
    pub fn women_rank(&self, w: usize, m: usize) -> Rank {
        self.women_ranks[w * self.n + m]
    }

    /// Mutual ranking `(s, t)` of the pair: `s` by the woman, `t` by the man.
    pub fn mutual_ranks(&self, m: usize, w: usize) -> (Rank, Rank) {
        (self.women_rank(w, m), self.men_rank(m, w))
    }

    /// Egalitarian cost of the pair: the two mutual ranks summed.
    pub fn pair_cost(&self, m: usize, w: usize) -> u32 {
        let (s, t) = self.mutual_ranks(m, w);
        s + t
    }

    pub fn men_rows(&self) -> Vec<Vec<Rank>> {
        self.men_ranks.chunks(self.n).map(<[Rank]>::to_vec).collect()
    }

    pub fn women_rows(&self) -> Vec<Vec<Rank>> {
        self.women_ranks
            .chunks(self.n)
            .map(<[Rank]>::to_vec)
            .collect()
    }

    /// The matrix of mutual rankings, row `i` = woman `i`, column `j` = man `j`.
    pub fn ranking_matrix(&self) -> RankingMatrix {
        let entries = (0..self.n)
            .flat_map(|w| (0..self.n).map(move |m| self.mutual_ranks(m, w)))
            .collect();
        RankingMatrix {
            n: self.n,
            entries,
        }
    }

    /// Counts, per rank pair `(i, j)`, how many couples rank each other that way.
    pub fn tally_matrix(&self) -> TallyMatrix {
        let mut counts = vec![0u32; self.n * self.n];
        for w in 0..self.n {
            for m in 0..self.n {
                let (s, t) = self.mutual_ranks(m, w);
                counts[(s as usize - 1) * self.n + (t as usize - 1)] += 1;
            }
        }
        TallyMatrix {
            n: self.n,
            counts,
        }
    }

    /// One [`PairRole`] per (man, woman) pair, in woman-major order.
    ///
    /// A pair is an outcast pair when everyone else ranks both members last.
    /// For `n = 1` the condition is vacuous, so the single pair counts.
    pub fn classify_pairs(&self) -> Vec<PairRole> {
        let n = self.n;
        let worst = n as Rank;
        let mut roles = Vec::with_capacity(n * n);
        for w in 0..n {
            for m in 0..n {
                let (s, t) = self.mutual_ranks(m, w);
                let outcasts = (0..n)
                    .filter(|&w2| w2 != w)
                    .all(|w2| self.women_rank(w2, m) == worst)
                    && (0..n)
                        .filter(|&m2| m2 != m)
                        .all(|m2| self.men_rank(m2, w) == worst);
                let role = if (s, t) == (1, 1) {
                    PairKind::Soulmates
                } else if (s, t) == (worst, worst) {
                    PairKind::HellPair
                } else if outcasts {
                    PairKind::OutcastPair
                } else {
                    PairKind::Plain
                };
                roles.push(PairRole {
                    man: m,
                    woman: w,
                    cost: s + t,
                    role,
                    outcasts,
                });
            }
        }
        roles
    }

    /// Membership in the special profile families.
    pub fn family_flags(&self) -> FamilyFlags {
        let n = self.n;
        let mutually_latin =
            columns_all_distinct(&self.men_ranks, n) && columns_all_distinct(&self.women_ranks, n);
        let pseudo_latin = (0..n)
            .cartesian_product(0..n)
            .all(|(m, w)| self.pair_cost(m, w) == n as u32 + 1);
        let tally = self.tally_matrix();
        let disjoint = tally.counts.iter().all(|&c| c == 1);
        let joint = tally.is_permutation_pattern_of(n as u32);
        let mirror = joint
            && self
                .extract_key()
                .is_some_and(|k| k.is_identity());
        FamilyFlags {
            mutually_latin,
            pseudo_latin,
            disjoint,
            joint,
            mirror,
        }
    }

    /// The key function, when one exists: a man ranked `i` by a woman always
    /// ranks her back `f(i)`. `None` signals the profile is not joint.
    pub fn extract_key(&self) -> Option<KeyFunction> {
        let n = self.n;
        let mut map: Vec<Option<Rank>> = vec![None; n];
        for w in 0..n {
            for m in 0..n {
                let (s, t) = self.mutual_ranks(m, w);
                match map[s as usize - 1] {
                    None => map[s as usize - 1] = Some(t),
                    Some(prev) if prev == t => {}
                    Some(_) => return None,
                }
            }
        }
        let values: Vec<Rank> = map.into_iter().collect::<Option<_>>()?;
        KeyFunction::new(values).ok()
    }

    /// Bit-exact text rendering of the profile format.
    pub fn to_text(&self) -> String {
        let mut out = format!("n={}\nmen\n", self.n);
        for row in self.men_ranks.chunks(self.n) {
            out.push_str(&row.iter().join(" "));
            out.push('\n');
        }
        out.push_str("women\n");
        for row in self.women_ranks.chunks(self.n) {
            out.push_str(&row.iter().join(" "));
            out.push('\n');
        }
        out
    }
}

fn columns_all_distinct(flat: &[Rank], n: usize) -> bool {
    (0..n).all(|c| {
        let mut seen = vec![false; n];
        (0..n).all(|r| {
            let v = flat[r * n + c] as usize - 1;
            !std::mem::replace(&mut seen[v], true)
        })
    })
}

/// Matrix of `(s, t)` mutual-rank pairs, row = woman, column = man.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankingMatrix {
    n: usize,
    entries: Vec<(Rank, Rank)>,
}

impl RankingMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entry(&self, woman: usize, man: usize) -> (Rank, Rank) {
        self.entries[woman * self.n + man]
    }

    pub fn rows(&self) -> Vec<Vec<(Rank, Rank)>> {
        self.entries
            .chunks(self.n)
            .map(<[(Rank, Rank)]>::to_vec)
            .collect()
    }
}

impl fmt::Display for RankingMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in self.entries.chunks(self.n) {
            writeln!(
                f,
                "{}",
                row.iter().map(|(s, t)| format!("({s},{t})")).join(" ")
            )?;
        }
        Ok(())
    }
}

/// Counts of couples per mutual-rank pair; entries sum to `n^2`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TallyMatrix {
    n: usize,
    counts: Vec<u32>,
}

impl TallyMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn count(&self, s: Rank, t: Rank) -> u32 {
        self.counts[(s as usize - 1) * self.n + (t as usize - 1)]
    }

    pub fn rows(&self) -> Vec<Vec<u32>> {
        self.counts.chunks(self.n).map(<[u32]>::to_vec).collect()
    }

    pub fn total(&self) -> u32 {
        self.counts.iter().sum()
    }

    /// True when the non-zero entries all equal `value` and form a
    /// permutation pattern (one per row, one per column).
    fn is_permutation_pattern_of(&self, value: u32) -> bool {
        let n = self.n;
        let mut col_used = vec![false; n];
        for r in 0..n {
            let mut row_hits = 0;
            for c in 0..n {
                match self.counts[r * n + c] {
                    0 => {}
                    v if v == value => {
                        if std::mem::replace(&mut col_used[c], true) {
                            return false;
                        }
                        row_hits += 1;
                    }
                    _ => return false,
                }
            }
            if row_hits != 1 {
                return false;
            }
        }
        true
    }
}

impl fmt::Display for TallyMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in self.counts.chunks(self.n) {
            writeln!(f, "{}", row.iter().join(" "))?;
        }
        Ok(())
    }
}

/// The permutation `f` governing a joint profile: a man ranked `i` by a
/// woman ranks her back `f(i)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct KeyFunction(Vec<Rank>);

impl KeyFunction {
    pub fn new(values: Vec<Rank>) -> Result<Self, ProfileError> {
        let n = values.len();
        if n == 0 {
            return Err(ProfileError::Empty);
        }
        if !is_permutation_row(&values, n) {
            return Err(ProfileError::NotPermutation {
                side: Side::Men,
                row: 1,
                n,
            });
        }
        Ok(KeyFunction(values))
    }

    pub fn identity(n: usize) -> Self {
        KeyFunction((1..=n as Rank).collect())
    }

    /// The key `f(i) = n + 1 - i` of a pseudo-Latin profile.
    pub fn reversal(n: usize) -> Self {
        KeyFunction((1..=n as Rank).rev().collect())
    }

    pub fn n(&self) -> usize {
        self.0.len()
    }

    pub fn apply(&self, i: Rank) -> Rank {
        self.0[i as usize - 1]
    }

    pub fn inverse(&self) -> KeyFunction {
        let mut inv = vec![0; self.0.len()];
        for (i, &v) in self.0.iter().enumerate() {
            inv[v as usize - 1] = i as Rank + 1;
        }
        KeyFunction(inv)
    }

    pub fn is_identity(&self) -> bool {
        self.0.iter().enumerate().all(|(i, &v)| v == i as Rank + 1)
    }

    pub fn values(&self) -> &[Rank] {
        &self.0
    }

    /// All `n!` keys in lexicographic order of their one-line notation.
    pub fn all(n: usize) -> Vec<KeyFunction> {
        (1..=n as Rank)
            .permutations(n)
            .map(KeyFunction)
            .collect()
    }
}

impl fmt::Display for KeyFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0.iter().join(" "))
    }
}

/// How one (man, woman) pair relates: mutual ranks and special roles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairRole {
    pub man: usize,
    pub woman: usize,
    pub cost: u32,
    pub role: PairKind,
    /// Everyone else ranks both members last. Can coincide with
    /// `Soulmates`/`HellPair`, which take precedence in `role`.
    pub outcasts: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairKind {
    Soulmates,
    HellPair,
    OutcastPair,
    Plain,
}

impl fmt::Display for PairKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PairKind::Soulmates => write!(f, "soulmates"),
            PairKind::HellPair => write!(f, "hell-pair"),
            PairKind::OutcastPair => write!(f, "outcast-pair"),
            PairKind::Plain => write!(f, "plain"),
        }
    }
}

/// Membership flags for the special profile families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FamilyFlags {
    /// Both rank matrices are Latin squares.
    pub mutually_latin: bool,
    /// Every pair's egalitarian cost is `n + 1`.
    pub pseudo_latin: bool,
    /// The tally matrix is all ones.
    pub disjoint: bool,
    /// Each occurring mutual ranking occurs exactly `n` times, one per rank.
    pub joint: bool,
    /// Joint with the identity key.
    pub mirror: bool,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("line {line}: expected `{expected}`, got `{got}`")]
    Unexpected {
        line: usize,
        expected: String,
        got: String,
    },
    #[error("line {line}: bad number `{token}`")]
    BadNumber { line: usize, token: String },
    #[error("unexpected end of input (expected {expected})")]
    Eof { expected: String },
    #[error(transparent)]
    Invalid(#[from] ProfileError),
}

struct Lines<'a> {
    iter: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Lines {
            iter: text.lines().enumerate(),
        }
    }

    /// Next significant line; blank lines and `#` comments are skipped.
    fn next(&mut self) -> Option<(usize, &'a str)> {
        for (i, raw) in self.iter.by_ref() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            return Some((i + 1, line));
        }
        None
    }
}

fn parse_header(lines: &mut Lines) -> Result<Option<usize>, ParseError> {
    let Some((lineno, line)) = lines.next() else {
        return Ok(None);
    };
    let Some(value) = line.strip_prefix("n=") else {
        return Err(ParseError::Unexpected {
            line: lineno,
            expected: "n=<int>".into(),
            got: line.into(),
        });
    };
    let n: usize = value.trim().parse().map_err(|_| ParseError::BadNumber {
        line: lineno,
        token: value.into(),
    })?;
    if n == 0 {
        return Err(ParseError::Invalid(ProfileError::Empty));
    }
    Ok(Some(n))
}

fn parse_rank_rows(lines: &mut Lines, n: usize, what: &str) -> Result<Vec<Vec<Rank>>, ParseError> {
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let (lineno, line) = lines.next().ok_or_else(|| ParseError::Eof {
            expected: format!("{what} rank row"),
        })?;
        let row = line
            .split_whitespace()
            .map(|tok| {
                tok.parse().map_err(|_| ParseError::BadNumber {
                    line: lineno,
                    token: tok.into(),
                })
            })
            .collect::<Result<Vec<Rank>, _>>()?;
        rows.push(row);
    }
    Ok(rows)
}

fn expect_keyword(lines: &mut Lines, keyword: &str) -> Result<(), ParseError> {
    let (lineno, line) = lines.next().ok_or_else(|| ParseError::Eof {
        expected: format!("`{keyword}`"),
    })?;
    if line != keyword {
        return Err(ParseError::Unexpected {
            line: lineno,
            expected: keyword.into(),
            got: line.into(),
        });
    }
    Ok(())
}

fn parse_one(lines: &mut Lines) -> Result<Option<PreferenceProfile>, ParseError> {
    let Some(n) = parse_header(lines)? else {
        return Ok(None);
    };
    expect_keyword(lines, "men")?;
    let men = parse_rank_rows(lines, n, "men")?;
    expect_keyword(lines, "women")?;
    let women = parse_rank_rows(lines, n, "women")?;
    Ok(Some(PreferenceProfile::new(men, women)?))
}

/// Parses a single profile in the text format.
pub fn parse_profile(text: &str) -> Result<PreferenceProfile, ParseError> {
    let mut lines = Lines::new(text);
    let profile = parse_one(&mut lines)?.ok_or(ParseError::Eof {
        expected: "n=<int>".into(),
    })?;
    if let Some((lineno, line)) = lines.next() {
        return Err(ParseError::Unexpected {
            line: lineno,
            expected: "end of input".into(),
            got: line.into(),
        });
    }
    Ok(profile)
}

/// Parses any number of concatenated profiles.
pub fn parse_profiles(text: &str) -> Result<Vec<PreferenceProfile>, ParseError> {
    let mut lines = Lines::new(text);
    let mut profiles = Vec::new();
    while let Some(p) = parse_one(&mut lines)? {
        profiles.push(p);
    }
    Ok(profiles)
}

/// All permutations of `1..=n`, lexicographically.
pub fn all_rank_rows(n: usize) -> Vec<Vec<Rank>> {
    (1..=n as Rank).permutations(n).collect()
}

/// All Latin squares of order `n` (row-major rows), by row-wise backtracking.
pub fn all_latin_squares(n: usize) -> Vec<Vec<Vec<Rank>>> {
    let rows = all_rank_rows(n);
    let mut squares = Vec::new();
    let mut chosen: Vec<&Vec<Rank>> = Vec::with_capacity(n);
    fn extend<'a>(
        rows: &'a [Vec<Rank>],
        chosen: &mut Vec<&'a Vec<Rank>>,
        n: usize,
        out: &mut Vec<Vec<Vec<Rank>>>,
    ) {
        if chosen.len() == n {
            out.push(chosen.iter().map(|r| (*r).clone()).collect());
            return;
        }
        'rows: for row in rows {
            for prev in chosen.iter() {
                for c in 0..n {
                    if prev[c] == row[c] {
                        continue 'rows;
                    }
                }
            }
            chosen.push(row);
            extend(rows, chosen, n, out);
            chosen.pop();
        }
    }
    extend(&rows, &mut chosen, n, &mut squares);
    squares
}

/// Iterates every preference profile of size `n`. Exhaustive only for
/// small `n`: there are `(n!)^(2n)` of them.
pub fn all_profiles(n: usize) -> impl Iterator<Item = PreferenceProfile> {
    let rows = all_rank_rows(n);
    (0..2 * n)
        .map(|_| rows.clone())
        .multi_cartesian_product()
        .map(move |choice| {
            PreferenceProfile::new(choice[..n].to_vec(), choice[n..].to_vec())
                .expect("rows are permutations")
        })
}
