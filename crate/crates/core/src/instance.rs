//! Instance data model: positions, rotamer counts, unary and pairwise
//! energies, together with the on-disk text/JSON formats and a seeded
//! random generator.
//!
//! Indices are 1-based in files and 0-based everywhere in memory; the
//! conversion happens at the parse/serialize boundary.

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A side-chain packing instance: `n` positions, `l_i` rotamers per
/// position, sparse integer energies with implicit zeros.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    /// Number of positions on the backbone.
    pub n: usize,
    /// Rotamer count per position, length `n`.
    pub rotamer_counts: Vec<usize>,
    /// Unary energies keyed by `(position, rotamer)`, 0-based.
    pub unary: BTreeMap<(usize, usize), i64>,
    /// Pairwise energies keyed by `(i, r, j, s)` with `i < j`, 0-based.
    pub pairwise: BTreeMap<(usize, usize, usize, usize), i64>,
}

/// One chosen rotamer per position (0-based in memory).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Assignment {
    pub choices: Vec<usize>,
}

impl Assignment {
    pub fn new(choices: Vec<usize>) -> Self {
        Assignment { choices }
    }

    /// Builds from 1-based rotamer indices as they appear in files.
    pub fn from_one_based(choices: &[usize]) -> Self {
        Assignment {
            choices: choices.iter().map(|&r| r - 1).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.choices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.choices.is_empty()
    }
}

impl Instance {
    /// Total model dimension `m = sum l_i`.
    pub fn dimension(&self) -> usize {
        self.rotamer_counts.iter().sum()
    }

    pub fn unary_energy(&self, i: usize, r: usize) -> i64 {
        self.unary.get(&(i, r)).copied().unwrap_or(0)
    }

    pub fn pairwise_energy(&self, i: usize, r: usize, j: usize, s: usize) -> i64 {
        debug_assert!(i < j);
        self.pairwise.get(&(i, r, j, s)).copied().unwrap_or(0)
    }

    /// Checks that `asg` picks one in-range rotamer per position.
    pub fn is_valid_assignment(&self, asg: &Assignment) -> bool {
        asg.choices.len() == self.n
            && asg
                .choices
                .iter()
                .zip(&self.rotamer_counts)
                .all(|(&r, &l)| r < l)
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: {msg}")]
    IndexOutOfRange { line: usize, msg: String },
    #[error("line {line}: duplicate key: {msg}")]
    DuplicateKey { line: usize, msg: String },
    #[error("invalid JSON instance: {0}")]
    Json(String),
}

/// A single invariant violation found by [`validate`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    PositionCountPositive,
    RotamerCountPositive { position: usize },
    PositionOutOfRange { position: usize },
    RotamerOutOfRange { position: usize, rotamer: usize },
    PairOrder { i: usize, j: usize },
    NegativeEnergy { key: String },
}

impl Violation {
    /// Machine-readable code, stable across releases.
    pub fn code(&self) -> &'static str {
        match self {
            Violation::PositionCountPositive => "position-count-positive",
            Violation::RotamerCountPositive { .. } => "rotamer-count-positive",
            Violation::PositionOutOfRange { .. } => "position-out-of-range",
            Violation::RotamerOutOfRange { .. } => "rotamer-out-of-range",
            Violation::PairOrder { .. } => "pair-order",
            Violation::NegativeEnergy { .. } => "negative-energy",
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::PositionCountPositive => write!(f, "{}: n must be >= 1", self.code()),
            Violation::RotamerCountPositive { position } => {
                write!(f, "{}: l_{} must be >= 1", self.code(), position + 1)
            }
            Violation::PositionOutOfRange { position } => {
                write!(f, "{}: position {} out of range", self.code(), position + 1)
            }
            Violation::RotamerOutOfRange { position, rotamer } => write!(
                f,
                "{}: rotamer {} out of range at position {}",
                self.code(),
                rotamer + 1,
                position + 1
            ),
            Violation::PairOrder { i, j } => {
                write!(f, "{}: pairwise key requires i < j ({} >= {})", self.code(), i + 1, j + 1)
            }
            Violation::NegativeEnergy { key } => {
                write!(f, "{}: {key}", self.code())
            }
        }
    }
}

/// Like [`validate`], additionally requiring non-negative energies (the
/// convention of the integerized benchmark datasets).
pub fn validate_nonnegative(inst: &Instance) -> Vec<Violation> {
    let mut out = validate(inst);
    for (&(i, r), &e) in &inst.unary {
        if e < 0 {
            out.push(Violation::NegativeEnergy {
                key: format!("unary {} {}", i + 1, r + 1),
            });
        }
    }
    for (&(i, r, j, s), &e) in &inst.pairwise {
        if e < 0 {
            out.push(Violation::NegativeEnergy {
                key: format!("pair {} {} {} {}", i + 1, r + 1, j + 1, s + 1),
            });
        }
    }
    out
}

/// Returns every invariant violation; an empty list means the instance
/// is valid.
pub fn validate(inst: &Instance) -> Vec<Violation> {
    let mut out = Vec::new();
    if inst.n < 1 || inst.rotamer_counts.len() != inst.n {
        out.push(Violation::PositionCountPositive);
    }
    for (i, &l) in inst.rotamer_counts.iter().enumerate() {
        if l < 1 {
            out.push(Violation::RotamerCountPositive { position: i });
        }
    }
    let check_pos = |out: &mut Vec<Violation>, i: usize, r: usize| {
        if i >= inst.n {
            out.push(Violation::PositionOutOfRange { position: i });
        } else if r >= inst.rotamer_counts[i] {
            out.push(Violation::RotamerOutOfRange { position: i, rotamer: r });
        }
    };
    for &(i, r) in inst.unary.keys() {
        check_pos(&mut out, i, r);
    }
    for &(i, r, j, s) in inst.pairwise.keys() {
        if i >= j {
            out.push(Violation::PairOrder { i, j });
        }
        check_pos(&mut out, i, r);
        check_pos(&mut out, j, s);
    }
    out
}

/// Parses the CPD text format v1.
pub fn parse_instance(text: &str) -> Result<Instance, ParseError> {
    let syntax = |line: usize, msg: String| ParseError::Syntax { line, msg };

    // Tokenized non-empty lines with their 1-based line numbers.
    let mut lines = text.lines().enumerate().filter_map(|(idx, raw)| {
        let content = raw.split('#').next().unwrap_or("");
        let tokens: Vec<&str> = content.split_whitespace().collect();
        if tokens.is_empty() {
            None
        } else {
            Some((idx + 1, tokens))
        }
    });

    let (ln, header) = lines
        .next()
        .ok_or_else(|| syntax(1, "empty input, expected 'cpd 1'".into()))?;
    if header != ["cpd", "1"] {
        return Err(syntax(ln, "expected header 'cpd 1'".into()));
    }

    let (ln, pos_line) = lines
        .next()
        .ok_or_else(|| syntax(ln + 1, "expected 'positions <n>'".into()))?;
    if pos_line.len() != 2 || pos_line[0] != "positions" {
        return Err(syntax(ln, "expected 'positions <n>'".into()));
    }
    let n: usize = pos_line[1]
        .parse()
        .map_err(|e| syntax(ln, format!("bad position count: {e}")))?;
    if n < 1 {
        return Err(syntax(ln, "position count must be >= 1".into()));
    }

    let (ln, rot_line) = lines
        .next()
        .ok_or_else(|| syntax(ln + 1, "expected 'rotamers <l_1> ... <l_n>'".into()))?;
    if rot_line.first() != Some(&"rotamers") || rot_line.len() != n + 1 {
        return Err(syntax(
            ln,
            format!("expected 'rotamers' followed by {n} counts"),
        ));
    }
    let mut rotamer_counts = Vec::with_capacity(n);
    for tok in &rot_line[1..] {
        let l: usize = tok
            .parse()
            .map_err(|e| syntax(ln, format!("bad rotamer count '{tok}': {e}")))?;
        if l < 1 {
            return Err(syntax(ln, "rotamer count must be >= 1".into()));
        }
        rotamer_counts.push(l);
    }

    let parse_idx = |ln: usize, tok: &str, what: &str| -> Result<usize, ParseError> {
        let v: usize = tok
            .parse()
            .map_err(|e| syntax(ln, format!("bad {what} '{tok}': {e}")))?;
        if v < 1 {
            return Err(syntax(ln, format!("{what} must be >= 1")));
        }
        Ok(v)
    };
    let parse_energy = |ln: usize, tok: &str| -> Result<i64, ParseError> {
        tok.parse().map_err(|e| {
            syntax(ln, format!("bad energy '{tok}' (64-bit signed range): {e}"))
        })
    };
    let check_pos = |ln: usize, i: usize, r: usize| -> Result<(), ParseError> {
        if i > n {
            return Err(ParseError::IndexOutOfRange {
                line: ln,
                msg: format!("position {i} exceeds n={n}"),
            });
        }
        if r > rotamer_counts[i - 1] {
            return Err(ParseError::IndexOutOfRange {
                line: ln,
                msg: format!("rotamer {r} exceeds l_{i}={}", rotamer_counts[i - 1]),
            });
        }
        Ok(())
    };

    let mut unary = BTreeMap::new();
    let mut pairwise = BTreeMap::new();
    let mut saw_end = false;
    let mut last_ln = ln;
    for (ln, tokens) in lines {
        if saw_end {
            return Err(syntax(ln, "content after 'end'".into()));
        }
        last_ln = ln;
        match tokens[0] {
            "end" => {
                if tokens.len() != 1 {
                    return Err(syntax(ln, "'end' takes no arguments".into()));
                }
                saw_end = true;
            }
            "unary" => {
                if tokens.len() != 4 {
                    return Err(syntax(ln, "expected 'unary <i> <r> <E>'".into()));
                }
                let i = parse_idx(ln, tokens[1], "position")?;
                let r = parse_idx(ln, tokens[2], "rotamer")?;
                check_pos(ln, i, r)?;
                let e = parse_energy(ln, tokens[3])?;
                if unary.insert((i - 1, r - 1), e).is_some() {
                    return Err(ParseError::DuplicateKey {
                        line: ln,
                        msg: format!("unary {i} {r}"),
                    });
                }
            }
            "pair" => {
                if tokens.len() != 6 {
                    return Err(syntax(ln, "expected 'pair <i> <r> <j> <s> <E>'".into()));
                }
                let i = parse_idx(ln, tokens[1], "position")?;
                let r = parse_idx(ln, tokens[2], "rotamer")?;
                let j = parse_idx(ln, tokens[3], "position")?;
                let s = parse_idx(ln, tokens[4], "rotamer")?;
                if i >= j {
                    return Err(syntax(ln, "pairwise key requires i < j".into()));
                }
                check_pos(ln, i, r)?;
                check_pos(ln, j, s)?;
                let e = parse_energy(ln, tokens[5])?;
                if pairwise.insert((i - 1, r - 1, j - 1, s - 1), e).is_some() {
                    return Err(ParseError::DuplicateKey {
                        line: ln,
                        msg: format!("pair {i} {r} {j} {s}"),
                    });
                }
            }
            other => {
                return Err(syntax(ln, format!("unknown directive '{other}'")));
            }
        }
    }
    if !saw_end {
        return Err(syntax(last_ln + 1, "missing 'end'".into()));
    }

    Ok(Instance {
        n,
        rotamer_counts,
        unary,
        pairwise,
    })
}

/// JSON mirror of the text schema; indices are 1-based like the files.
#[derive(Serialize, Deserialize)]
struct JsonInstance {
    n: usize,
    rotamer_counts: Vec<usize>,
    #[serde(default)]
    unary: Vec<(usize, usize, i64)>,
    #[serde(default)]
    pairwise: Vec<(usize, usize, usize, usize, i64)>,
}

/// Parses the JSON mirror of the instance schema.
pub fn parse_instance_json(text: &str) -> Result<Instance, ParseError> {
    let raw: JsonInstance =
        serde_json::from_str(text).map_err(|e| ParseError::Json(e.to_string()))?;
    if raw.n < 1 {
        return Err(ParseError::Json("n must be >= 1".into()));
    }
    if raw.rotamer_counts.len() != raw.n {
        return Err(ParseError::Json(format!(
            "rotamer_counts has {} entries, expected n={}",
            raw.rotamer_counts.len(),
            raw.n
        )));
    }
    if raw.rotamer_counts.iter().any(|&l| l < 1) {
        return Err(ParseError::Json("rotamer counts must be >= 1".into()));
    }
    let check = |i: usize, r: usize| -> Result<(), ParseError> {
        if i < 1 || i > raw.n {
            return Err(ParseError::Json(format!("position {i} out of range")));
        }
        if r < 1 || r > raw.rotamer_counts[i - 1] {
            return Err(ParseError::Json(format!(
                "rotamer {r} out of range at position {i}"
            )));
        }
        Ok(())
    };
    let mut unary = BTreeMap::new();
    for &(i, r, e) in &raw.unary {
        check(i, r)?;
        if unary.insert((i - 1, r - 1), e).is_some() {
            return Err(ParseError::Json(format!("duplicate unary key ({i},{r})")));
        }
    }
    let mut pairwise = BTreeMap::new();
    for &(i, r, j, s, e) in &raw.pairwise {
        if i >= j {
            return Err(ParseError::Json("pairwise key requires i < j".into()));
        }
        check(i, r)?;
        check(j, s)?;
        if pairwise.insert((i - 1, r - 1, j - 1, s - 1), e).is_some() {
            return Err(ParseError::Json(format!(
                "duplicate pairwise key ({i},{r},{j},{s})"
            )));
        }
    }
    Ok(Instance {
        n: raw.n,
        rotamer_counts: raw.rotamer_counts,
        unary,
        pairwise,
    })
}

/// Serializes to the canonical text form: keys in sorted order, so output
/// is byte-stable and `parse_instance(serialize(x)) == x`.
pub fn serialize(inst: &Instance) -> String {
    let mut out = String::new();
    out.push_str("cpd 1\n");
    out.push_str(&format!("positions {}\n", inst.n));
    out.push_str("rotamers");
    for l in &inst.rotamer_counts {
        out.push_str(&format!(" {l}"));
    }
    out.push('\n');
    for (&(i, r), &e) in &inst.unary {
        out.push_str(&format!("unary {} {} {e}\n", i + 1, r + 1));
    }
    for (&(i, r, j, s), &e) in &inst.pairwise {
        out.push_str(&format!("pair {} {} {} {} {e}\n", i + 1, r + 1, j + 1, s + 1));
    }
    out.push_str("end\n");
    out
}

/// Serializes to the JSON mirror schema.
pub fn serialize_json(inst: &Instance) -> String {
    let raw = JsonInstance {
        n: inst.n,
        rotamer_counts: inst.rotamer_counts.clone(),
        unary: inst
            .unary
            .iter()
            .map(|(&(i, r), &e)| (i + 1, r + 1, e))
            .collect(),
        pairwise: inst
            .pairwise
            .iter()
            .map(|(&(i, r, j, s), &e)| (i + 1, r + 1, j + 1, s + 1, e))
            .collect(),
    };
    serde_json::to_string_pretty(&raw).expect("instance serialization cannot fail")
}

#[derive(Debug, Error, PartialEq)]
pub enum GenError {
    #[error("invalid rotamer count range [{0}, {1}]")]
    InvalidRotamerRange(usize, usize),
    #[error("e_max must be >= 0, got {0}")]
    NegativeEnergyBound(i64),
    #[error("density must be in [0, 1], got {0}")]
    InvalidDensity(f64),
    #[error("n must be >= 1")]
    InvalidPositionCount,
}

/// Seeded random instance generator. Pure in all arguments including
/// `seed`: the same call always yields the same instance.
pub fn generate_random(
    n: usize,
    l_min: usize,
    l_max: usize,
    e_max: i64,
    density: f64,
    seed: u64,
) -> Result<Instance, GenError> {
    if n < 1 {
        return Err(GenError::InvalidPositionCount);
    }
    if l_min < 1 || l_min > l_max {
        return Err(GenError::InvalidRotamerRange(l_min, l_max));
    }
    if e_max < 0 {
        return Err(GenError::NegativeEnergyBound(e_max));
    }
    if !(0.0..=1.0).contains(&density) {
        return Err(GenError::InvalidDensity(density));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rotamer_counts: Vec<usize> = (0..n).map(|_| rng.gen_range(l_min..=l_max)).collect();
    let mut unary = BTreeMap::new();
    for (i, &l) in rotamer_counts.iter().enumerate() {
        for r in 0..l {
            if rng.gen::<f64>() < density {
                unary.insert((i, r), rng.gen_range(0..=e_max));
            }
        }
    }
    let mut pairwise = BTreeMap::new();
    for i in 0..n {
        for j in (i + 1)..n {
            for r in 0..rotamer_counts[i] {
                for s in 0..rotamer_counts[j] {
                    if rng.gen::<f64>() < density {
                        pairwise.insert((i, r, j, s), rng.gen_range(0..=e_max));
                    }
                }
            }
        }
    }
    Ok(Instance {
        n,
        rotamer_counts,
        unary,
        pairwise,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::TINY_2X2;

    #[test]
    fn parses_tiny_fixture() {
        let inst = parse_instance(TINY_2X2).unwrap();
        assert_eq!(inst.n, 2);
        assert_eq!(inst.rotamer_counts, vec![2, 2]);
        assert_eq!(inst.unary_energy(0, 0), 1);
        assert_eq!(inst.unary_energy(1, 1), 2);
        assert_eq!(inst.pairwise_energy(0, 0, 1, 1), 3);
        assert_eq!(inst.pairwise_energy(0, 1, 1, 0), 1);
        assert_eq!(inst.unary.len(), 2);
        assert_eq!(inst.pairwise.len(), 2);
        assert_eq!(inst.dimension(), 4);
    }

    #[test]
    fn parses_minimal_instance() {
        let inst = parse_instance("cpd 1\npositions 1\nrotamers 1\nend\n").unwrap();
        assert_eq!(inst.n, 1);
        assert_eq!(inst.rotamer_counts, vec![1]);
        assert!(inst.unary.is_empty());
        assert!(inst.pairwise.is_empty());
    }

    #[test]
    fn rejects_pair_with_wrong_order() {
        let text = "cpd 1\npositions 2\nrotamers 1 1\npair 2 1 1 1 5\nend\n";
        let err = parse_instance(text).unwrap_err();
        match err {
            ParseError::Syntax { line, msg } => {
                assert_eq!(line, 4);
                assert!(msg.contains("i < j"), "unexpected message: {msg}");
            }
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_duplicate_keys() {
        let text = "cpd 1\npositions 1\nrotamers 2\nunary 1 1 3\nunary 1 1 4\nend\n";
        assert!(matches!(
            parse_instance(text),
            Err(ParseError::DuplicateKey { line: 5, .. })
        ));
    }

    #[test]
    fn rejects_out_of_range_indices() {
        let text = "cpd 1\npositions 1\nrotamers 2\nunary 2 1 3\nend\n";
        assert!(matches!(
            parse_instance(text),
            Err(ParseError::IndexOutOfRange { line: 4, .. })
        ));
    }

    #[test]
    fn rejects_energy_overflow() {
        let text = "cpd 1\npositions 1\nrotamers 1\nunary 1 1 99999999999999999999\nend\n";
        assert!(matches!(parse_instance(text), Err(ParseError::Syntax { .. })));
    }

    #[test]
    fn comments_and_blank_lines_are_ignored() {
        let text = "# header comment\ncpd 1\n\npositions 1 # trailing\nrotamers 1\nend\n";
        assert!(parse_instance(text).is_ok());
    }

    #[test]
    fn validate_tiny_is_clean() {
        let inst = parse_instance(TINY_2X2).unwrap();
        assert!(validate(&inst).is_empty());
    }

    #[test]
    fn validate_flags_out_of_range_position() {
        let mut inst = parse_instance(TINY_2X2).unwrap();
        inst.unary.insert((2, 0), 1);
        let v = validate(&inst);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].code(), "position-out-of-range");
    }

    #[test]
    fn validate_nonnegative_flags_signed_energies() {
        let mut inst = parse_instance(TINY_2X2).unwrap();
        inst.unary.insert((1, 0), -4);
        assert!(validate(&inst).is_empty());
        let v = validate_nonnegative(&inst);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].code(), "negative-energy");
    }

    #[test]
    fn validate_flags_zero_rotamer_count() {
        let mut inst = parse_instance(TINY_2X2).unwrap();
        inst.rotamer_counts[1] = 0;
        let codes: Vec<_> = validate(&inst).iter().map(|v| v.code()).collect();
        assert!(codes.contains(&"rotamer-count-positive"));
    }

    #[test]
    fn serialize_round_trips_tiny() {
        let inst = parse_instance(TINY_2X2).unwrap();
        assert_eq!(serialize(&inst), TINY_2X2);
        assert_eq!(parse_instance(&serialize(&inst)).unwrap(), inst);
    }

    #[test]
    fn serialize_minimal_is_four_lines() {
        let inst = parse_instance("cpd 1\npositions 1\nrotamers 1\nend\n").unwrap();
        assert_eq!(serialize(&inst).lines().count(), 4);
    }

    #[test]
    fn json_round_trip_matches_text() {
        let inst = parse_instance(TINY_2X2).unwrap();
        let json = serialize_json(&inst);
        assert_eq!(parse_instance_json(&json).unwrap(), inst);
    }

    #[test]
    fn generate_is_deterministic() {
        let a = generate_random(3, 2, 2, 10, 1.0, 7).unwrap();
        let b = generate_random(3, 2, 2, 10, 1.0, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.dimension(), 6);
        // density 1.0 populates every entry
        assert_eq!(a.unary.len(), 6);
        assert_eq!(a.pairwise.len(), 12);
    }

    #[test]
    fn generate_round_trips_through_parser() {
        let inst = generate_random(4, 2, 4, 100, 0.5, 1).unwrap();
        assert!(validate(&inst).is_empty());
        assert_eq!(parse_instance(&serialize(&inst)).unwrap(), inst);
    }

    #[test]
    fn generate_rejects_bad_ranges() {
        assert!(generate_random(2, 3, 2, 10, 0.5, 0).is_err());
        assert!(generate_random(2, 1, 2, -1, 0.5, 0).is_err());
        assert!(generate_random(2, 1, 2, 10, 1.5, 0).is_err());
        assert!(generate_random(0, 1, 2, 10, 0.5, 0).is_err());
    }
}
