//! The semigroup families under test.
//!
//! Every family supplies an associative `combine` and a metric `distance`
//! that is invariant under multiplication on both sides:
//! `d(ac, bc) = d(a, b) = d(ca, cb)`. That invariance makes the increment
//! size `d(z, z*x)` independent of the anchor `z`, which is what lets spaces
//! with no identity and no inverses (see `PosInts`) carry maximal
//! inequalities at all.
//!
//! `BrokenSquare` deliberately breaks translation invariance; it exists so
//! the axiom checker can demonstrate it would catch a bad metric.

use std::fmt;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::Signed;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::StreamRng;
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum SemigroupFamily {
    /// Integers under addition with `|a - b|`.
    IntLine,
    /// Strictly positive integers under addition: no identity, no inverses.
    PosInts,
    /// Residues mod m with the shorter-way-around distance.
    Cyclic { modulus: u64 },
    /// Bit vectors under XOR with Hamming weight of the difference.
    HammingCube { bits: u32 },
    /// Permutations under composition with Cayley distance
    /// (minimum number of transpositions), bi-invariant.
    SymCayley { degree: u32 },
    /// Permutations under composition with positionwise disagreement count,
    /// bi-invariant.
    SymHamming { degree: u32 },
    /// R^d under addition with the Euclidean norm; real-valued.
    Euclidean { dim: u32 },
    /// Angles mod 2*pi under addition with arc length; real-valued.
    Circle,
    /// Test double: (Z, +) with d(a, b) = |a^2 - b^2|, which is a metric on
    /// the even (or odd) integers' squares but NOT translation invariant.
    BrokenSquare,
}

impl SemigroupFamily {
    /// Exact families keep every distance rational; the two real-valued
    /// families are compared within a tolerance instead.
    pub fn is_exact(&self) -> bool {
        !matches!(
            self,
            SemigroupFamily::Euclidean { .. } | SemigroupFamily::Circle
        )
    }
}

impl fmt::Display for SemigroupFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SemigroupFamily::IntLine => write!(f, "int-line"),
            SemigroupFamily::PosInts => write!(f, "pos-ints"),
            SemigroupFamily::Cyclic { modulus } => write!(f, "cyclic({modulus})"),
            SemigroupFamily::HammingCube { bits } => write!(f, "hamming-cube({bits})"),
            SemigroupFamily::SymCayley { degree } => write!(f, "sym-cayley({degree})"),
            SemigroupFamily::SymHamming { degree } => write!(f, "sym-hamming({degree})"),
            SemigroupFamily::Euclidean { dim } => write!(f, "euclidean({dim})"),
            SemigroupFamily::Circle => write!(f, "circle"),
            SemigroupFamily::BrokenSquare => write!(f, "broken-square"),
        }
    }
}

#[derive(Debug, Error)]
pub enum SemigroupError {
    #[error("family mismatch: expected {expected}, found {found}")]
    FamilyMismatch { expected: String, found: String },
    #[error("invalid {family} parameters: {reason}")]
    InvalidFamily { family: String, reason: String },
    #[error("invalid element for {family}: {reason}")]
    InvalidElement { family: String, reason: String },
}

#[derive(Clone, Debug, PartialEq)]
enum Payload {
    Int(i64),
    Nat(u64),
    Residue(u64),
    Bits(u64),
    /// 0-based one-line notation: `perm[i]` is the image of `i`.
    Perm(Vec<u8>),
    Vector(Vec<f64>),
    Angle(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Element {
    family: SemigroupFamily,
    payload: Payload,
}

impl Element {
    pub fn family(&self) -> &SemigroupFamily {
        &self.family
    }

    /// Canonical text form, parseable by [`SemigroupInstance::parse_element`].
    pub fn encode(&self) -> String {
        match (&self.family, &self.payload) {
            (_, Payload::Int(v)) => v.to_string(),
            (_, Payload::Nat(v)) => v.to_string(),
            (_, Payload::Residue(v)) => v.to_string(),
            (SemigroupFamily::HammingCube { bits }, Payload::Bits(mask)) => (0..*bits)
                .map(|j| if mask >> j & 1 == 1 { '1' } else { '0' })
                .collect(),
            (_, Payload::Perm(p)) => p
                .iter()
                .map(|&i| (i + 1).to_string())
                .collect::<Vec<_>>()
                .join(","),
            (_, Payload::Vector(coords)) => {
                let inner = coords
                    .iter()
                    .map(|c| crate::scalar::fmt_float17(*c))
                    .collect::<Vec<_>>()
                    .join(",");
                format!("[{inner}]")
            }
            (_, Payload::Angle(a)) => crate::scalar::fmt_float17(*a),
            _ => unreachable!("payload/family combinations are construction-checked"),
        }
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.encode())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SemigroupInstance {
    family: SemigroupFamily,
}

impl SemigroupInstance {
    pub fn new(family: SemigroupFamily) -> Result<Self, SemigroupError> {
        let bad = |reason: &str| SemigroupError::InvalidFamily {
            family: family.to_string(),
            reason: reason.to_string(),
        };
        match &family {
            SemigroupFamily::Cyclic { modulus } if *modulus < 2 => {
                return Err(bad("modulus must be at least 2"))
            }
            SemigroupFamily::HammingCube { bits } if !(1..=64).contains(bits) => {
                return Err(bad("bit count must be in 1..=64"))
            }
            SemigroupFamily::SymCayley { degree } | SemigroupFamily::SymHamming { degree }
                if !(1..=16).contains(degree) =>
            {
                return Err(bad("degree must be in 1..=16"))
            }
            SemigroupFamily::Euclidean { dim } if !(1..=64).contains(dim) => {
                return Err(bad("dimension must be in 1..=64"))
            }
            _ => {}
        }
        Ok(SemigroupInstance { family })
    }

    pub fn family(&self) -> &SemigroupFamily {
        &self.family
    }

    pub fn is_exact(&self) -> bool {
        self.family.is_exact()
    }

    /// Number of elements, when finite.
    pub fn element_count(&self) -> Option<u128> {
        match &self.family {
            SemigroupFamily::Cyclic { modulus } => Some(*modulus as u128),
            SemigroupFamily::HammingCube { bits } => Some(1u128 << bits),
            SemigroupFamily::SymCayley { degree } | SemigroupFamily::SymHamming { degree } => {
                Some((1..=*degree as u128).product())
            }
            _ => None,
        }
    }

    pub fn expect_member(&self, e: &Element) -> Result<(), SemigroupError> {
        if e.family == self.family {
            Ok(())
        } else {
            Err(SemigroupError::FamilyMismatch {
                expected: self.family.to_string(),
                found: e.family.to_string(),
            })
        }
    }

    pub fn combine(&self, a: &Element, b: &Element) -> Result<Element, SemigroupError> {
        self.expect_member(a)?;
        self.expect_member(b)?;
        let payload = match (&self.family, &a.payload, &b.payload) {
            (
                SemigroupFamily::IntLine | SemigroupFamily::BrokenSquare,
                Payload::Int(x),
                Payload::Int(y),
            ) => Payload::Int(x.checked_add(*y).expect("integer overflow in combine")),
            (SemigroupFamily::PosInts, Payload::Nat(x), Payload::Nat(y)) => {
                Payload::Nat(x.checked_add(*y).expect("integer overflow in combine"))
            }
            (SemigroupFamily::Cyclic { modulus }, Payload::Residue(x), Payload::Residue(y)) => {
                Payload::Residue((x + y) % modulus)
            }
            (SemigroupFamily::HammingCube { .. }, Payload::Bits(x), Payload::Bits(y)) => {
                Payload::Bits(x ^ y)
            }
            (
                SemigroupFamily::SymCayley { .. } | SemigroupFamily::SymHamming { .. },
                Payload::Perm(p),
                Payload::Perm(q),
            ) => Payload::Perm(perm_compose(p, q)),
            (SemigroupFamily::Euclidean { .. }, Payload::Vector(x), Payload::Vector(y)) => {
                Payload::Vector(x.iter().zip(y).map(|(a, b)| a + b).collect())
            }
            (SemigroupFamily::Circle, Payload::Angle(x), Payload::Angle(y)) => {
                Payload::Angle((x + y).rem_euclid(std::f64::consts::TAU))
            }
            _ => unreachable!("family tags already checked"),
        };
        Ok(Element {
            family: self.family.clone(),
            payload,
        })
    }

    pub fn distance(&self, a: &Element, b: &Element) -> Result<Scalar, SemigroupError> {
        self.expect_member(a)?;
        self.expect_member(b)?;
        let d = match (&self.family, &a.payload, &b.payload) {
            (SemigroupFamily::IntLine, Payload::Int(x), Payload::Int(y)) => {
                Scalar::Exact(BigRational::from_integer(BigInt::from(x.abs_diff(*y))))
            }
            (SemigroupFamily::PosInts, Payload::Nat(x), Payload::Nat(y)) => {
                Scalar::Exact(BigRational::from_integer(BigInt::from(x.abs_diff(*y))))
            }
            (SemigroupFamily::Cyclic { modulus }, Payload::Residue(x), Payload::Residue(y)) => {
                let direct = x.abs_diff(*y);
                Scalar::Exact(BigRational::from_integer(BigInt::from(
                    direct.min(modulus - direct),
                )))
            }
            (SemigroupFamily::HammingCube { .. }, Payload::Bits(x), Payload::Bits(y)) => {
                Scalar::from_int((x ^ y).count_ones() as i64)
            }
            (SemigroupFamily::SymCayley { degree }, Payload::Perm(p), Payload::Perm(q)) => {
                let rel = perm_compose(p, &perm_inverse(q));
                Scalar::from_int((*degree - cycle_count(&rel)) as i64)
            }
            (SemigroupFamily::SymHamming { .. }, Payload::Perm(p), Payload::Perm(q)) => {
                Scalar::from_int(p.iter().zip(q).filter(|(a, b)| a != b).count() as i64)
            }
            (SemigroupFamily::Euclidean { .. }, Payload::Vector(x), Payload::Vector(y)) => {
                let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                Scalar::real(sq.sqrt())
            }
            (SemigroupFamily::Circle, Payload::Angle(x), Payload::Angle(y)) => {
                let direct = (x - y).abs();
                Scalar::real(direct.min(std::f64::consts::TAU - direct))
            }
            (SemigroupFamily::BrokenSquare, Payload::Int(x), Payload::Int(y)) => {
                let sq = |v: i64| BigInt::from(v) * BigInt::from(v);
                Scalar::Exact(BigRational::from_integer((sq(*x) - sq(*y)).abs()))
            }
            _ => unreachable!("family tags already checked"),
        };
        Ok(d)
    }

    /// Size of a step: `d(z, z*x)`. Translation invariance makes this
    /// independent of the anchor `z`, which the axiom checker verifies.
    pub fn norm_increment(&self, z: &Element, x: &Element) -> Result<Scalar, SemigroupError> {
        let zx = self.combine(z, x)?;
        self.distance(z, &zx)
    }

    fn invalid_element(&self, reason: String) -> SemigroupError {
        SemigroupError::InvalidElement {
            family: self.family.to_string(),
            reason,
        }
    }

    pub fn int(&self, v: i64) -> Result<Element, SemigroupError> {
        match self.family {
            SemigroupFamily::IntLine | SemigroupFamily::BrokenSquare => Ok(Element {
                family: self.family.clone(),
                payload: Payload::Int(v),
            }),
            _ => Err(self.invalid_element(format!("integer {v} is not an element here"))),
        }
    }

    pub fn nat(&self, v: u64) -> Result<Element, SemigroupError> {
        match self.family {
            SemigroupFamily::PosInts if v >= 1 => Ok(Element {
                family: self.family.clone(),
                payload: Payload::Nat(v),
            }),
            SemigroupFamily::PosInts => {
                Err(self.invalid_element("positive integers start at 1".into()))
            }
            _ => Err(self.invalid_element(format!("natural {v} is not an element here"))),
        }
    }

    pub fn residue(&self, v: u64) -> Result<Element, SemigroupError> {
        match self.family {
            SemigroupFamily::Cyclic { modulus } => Ok(Element {
                family: self.family.clone(),
                payload: Payload::Residue(v % modulus),
            }),
            _ => Err(self.invalid_element(format!("residue {v} is not an element here"))),
        }
    }

    pub fn bits(&self, mask: u64) -> Result<Element, SemigroupError> {
        match self.family {
            SemigroupFamily::HammingCube { bits } => {
                let all = mask_all(bits);
                if mask & !all != 0 {
                    return Err(
                        self.invalid_element(format!("mask {mask:#x} exceeds {bits} bits"))
                    );
                }
                Ok(Element {
                    family: self.family.clone(),
                    payload: Payload::Bits(mask),
                })
            }
            _ => Err(self.invalid_element("bit masks are not elements here".into())),
        }
    }

    /// One-line notation with 1-based images, e.g. `[2, 1, 3]` swaps 1 and 2.
    pub fn perm_one_line(&self, images: &[u8]) -> Result<Element, SemigroupError> {
        let degree = match self.family {
            SemigroupFamily::SymCayley { degree } | SemigroupFamily::SymHamming { degree } => {
                degree
            }
            _ => return Err(self.invalid_element("permutations are not elements here".into())),
        };
        if images.len() != degree as usize {
            return Err(self.invalid_element(format!(
                "expected {degree} images, got {}",
                images.len()
            )));
        }
        let mut seen = vec![false; degree as usize];
        let mut zero_based = Vec::with_capacity(images.len());
        for &img in images {
            if img == 0 || img > degree as u8 {
                return Err(self.invalid_element(format!("image {img} out of range 1..={degree}")));
            }
            let i = (img - 1) as usize;
            if seen[i] {
                return Err(self.invalid_element(format!("image {img} repeats")));
            }
            seen[i] = true;
            zero_based.push(img - 1);
        }
        Ok(Element {
            family: self.family.clone(),
            payload: Payload::Perm(zero_based),
        })
    }

    pub fn vector(&self, coords: Vec<f64>) -> Result<Element, SemigroupError> {
        match self.family {
            SemigroupFamily::Euclidean { dim } => {
                if coords.len() != dim as usize {
                    return Err(self.invalid_element(format!(
                        "expected {dim} coordinates, got {}",
                        coords.len()
                    )));
                }
                if coords.iter().any(|c| !c.is_finite()) {
                    return Err(self.invalid_element("coordinates must be finite".into()));
                }
                Ok(Element {
                    family: self.family.clone(),
                    payload: Payload::Vector(coords),
                })
            }
            _ => Err(self.invalid_element("vectors are not elements here".into())),
        }
    }

    pub fn angle(&self, radians: f64) -> Result<Element, SemigroupError> {
        match self.family {
            SemigroupFamily::Circle => {
                if !radians.is_finite() {
                    return Err(self.invalid_element("angle must be finite".into()));
                }
                Ok(Element {
                    family: self.family.clone(),
                    payload: Payload::Angle(radians.rem_euclid(std::f64::consts::TAU)),
                })
            }
            _ => Err(self.invalid_element("angles are not elements here".into())),
        }
    }

    /// Parses the canonical text form produced by [`Element::encode`].
    pub fn parse_element(&self, text: &str) -> Result<Element, SemigroupError> {
        let text = text.trim();
        let bad = |reason: String| self.invalid_element(reason);
        match &self.family {
            SemigroupFamily::IntLine | SemigroupFamily::BrokenSquare => {
                let v = text
                    .parse::<i64>()
                    .map_err(|e| bad(format!("bad integer {text:?}: {e}")))?;
                self.int(v)
            }
            SemigroupFamily::PosInts => {
                let v = text
                    .parse::<u64>()
                    .map_err(|e| bad(format!("bad positive integer {text:?}: {e}")))?;
                self.nat(v)
            }
            SemigroupFamily::Cyclic { modulus } => {
                let v = text
                    .parse::<u64>()
                    .map_err(|e| bad(format!("bad residue {text:?}: {e}")))?;
                if v >= *modulus {
                    return Err(bad(format!("residue {v} not reduced mod {modulus}")));
                }
                self.residue(v)
            }
            SemigroupFamily::HammingCube { bits } => {
                if text.len() != *bits as usize {
                    return Err(bad(format!(
                        "expected {bits} binary digits, got {}",
                        text.len()
                    )));
                }
                let mut mask = 0u64;
                for (j, c) in text.chars().enumerate() {
                    match c {
                        '1' => mask |= 1 << j,
                        '0' => {}
                        other => return Err(bad(format!("bad binary digit {other:?}"))),
                    }
                }
                self.bits(mask)
            }
            SemigroupFamily::SymCayley { .. } | SemigroupFamily::SymHamming { .. } => {
                let images = text
                    .split(',')
                    .map(|part| {
                        part.trim()
                            .parse::<u8>()
                            .map_err(|e| bad(format!("bad image {part:?}: {e}")))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                self.perm_one_line(&images)
            }
            SemigroupFamily::Euclidean { .. } => {
                let inner = text
                    .strip_prefix('[')
                    .and_then(|t| t.strip_suffix(']'))
                    .ok_or_else(|| bad(format!("expected [c1,...], got {text:?}")))?;
                let coords = inner
                    .split(',')
                    .map(|part| {
                        part.trim()
                            .parse::<f64>()
                            .map_err(|e| bad(format!("bad coordinate {part:?}: {e}")))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                self.vector(coords)
            }
            SemigroupFamily::Circle => {
                let v = text
                    .parse::<f64>()
                    .map_err(|e| bad(format!("bad angle {text:?}: {e}")))?;
                self.angle(v)
            }
        }
    }

    /// Small deterministic element grid. The first few elements are chosen so
    /// that known counterexamples (like the `BrokenSquare` witness) appear in
    /// the grid pass of the axiom checker, independent of any seed.
    pub fn canonical_elements(&self, count: usize) -> Vec<Element> {
        let mut out = Vec::with_capacity(count);
        match &self.family {
            SemigroupFamily::IntLine | SemigroupFamily::BrokenSquare => {
                let mut k = 0i64;
                while out.len() < count {
                    out.push(self.int(k).unwrap());
                    if k > 0 {
                        out.push(self.int(-k).unwrap());
                    }
                    k += 1;
                }
                out.truncate(count);
            }
            SemigroupFamily::PosInts => {
                for v in 1..=count as u64 {
                    out.push(self.nat(v).unwrap());
                }
            }
            SemigroupFamily::Cyclic { modulus } => {
                for v in 0..count.min(*modulus as usize) as u64 {
                    out.push(self.residue(v).unwrap());
                }
            }
            SemigroupFamily::HammingCube { bits } => {
                let limit = if *bits >= 32 {
                    count as u64
                } else {
                    count.min(1usize << bits) as u64
                };
                for mask in 0..limit {
                    out.push(self.bits(mask).unwrap());
                }
            }
            SemigroupFamily::SymCayley { degree } | SemigroupFamily::SymHamming { degree } => {
                let mut one_line: Vec<u8> = (1..=*degree as u8).collect();
                loop {
                    out.push(self.perm_one_line(&one_line).unwrap());
                    if out.len() == count || !next_permutation(&mut one_line) {
                        break;
                    }
                }
            }
            SemigroupFamily::Euclidean { dim } => {
                let dim = *dim as usize;
                out.push(self.vector(vec![0.0; dim]).unwrap());
                let mut scale = 1.0;
                'outer: loop {
                    for axis in 0..dim {
                        for sign in [1.0, -1.0] {
                            if out.len() >= count {
                                break 'outer;
                            }
                            let mut coords = vec![0.0; dim];
                            coords[axis] = sign * scale;
                            out.push(self.vector(coords).unwrap());
                        }
                    }
                    scale += 1.0;
                }
                out.truncate(count);
            }
            SemigroupFamily::Circle => {
                for k in 0..count {
                    out.push(self.angle(k as f64).unwrap());
                }
            }
        }
        out
    }

    /// Seeded random element; `span` scales the unbounded families.
    pub fn random_element(&self, rng: &mut StreamRng, span: u64) -> Element {
        let span = span.max(1);
        match &self.family {
            SemigroupFamily::IntLine | SemigroupFamily::BrokenSquare => {
                self.int(rng.range_i64(-(span as i64), span as i64)).unwrap()
            }
            SemigroupFamily::PosInts => self.nat(1 + rng.below(2 * span)).unwrap(),
            SemigroupFamily::Cyclic { modulus } => self.residue(rng.below(*modulus)).unwrap(),
            SemigroupFamily::HammingCube { bits } => {
                self.bits(rng.next_u64() & mask_all(*bits)).unwrap()
            }
            SemigroupFamily::SymCayley { degree } | SemigroupFamily::SymHamming { degree } => {
                let n = *degree as usize;
                let mut one_line: Vec<u8> = (1..=n as u8).collect();
                for i in (1..n).rev() {
                    let j = rng.below(i as u64 + 1) as usize;
                    one_line.swap(i, j);
                }
                self.perm_one_line(&one_line).unwrap()
            }
            SemigroupFamily::Euclidean { dim } => {
                let coords = (0..*dim)
                    .map(|_| (rng.next_f64() * 2.0 - 1.0) * span as f64)
                    .collect();
                self.vector(coords).unwrap()
            }
            SemigroupFamily::Circle => {
                self.angle(rng.next_f64() * std::f64::consts::TAU).unwrap()
            }
        }
    }
}

fn mask_all(bits: u32) -> u64 {
    if bits >= 64 {
        u64::MAX
    } else {
        (1u64 << bits) - 1
    }
}

/// `(p . q)(i) = p(q(i))`, both 0-based one-line.
fn perm_compose(p: &[u8], q: &[u8]) -> Vec<u8> {
    q.iter().map(|&i| p[i as usize]).collect()
}

fn perm_inverse(p: &[u8]) -> Vec<u8> {
    let mut inv = vec![0u8; p.len()];
    for (i, &img) in p.iter().enumerate() {
        inv[img as usize] = i as u8;
    }
    inv
}

fn cycle_count(p: &[u8]) -> u32 {
    let mut seen = vec![false; p.len()];
    let mut cycles = 0;
    for start in 0..p.len() {
        if seen[start] {
            continue;
        }
        cycles += 1;
        let mut i = start;
        while !seen[i] {
            seen[i] = true;
            i = p[i] as usize;
        }
    }
    cycles
}

/// Advances to the next permutation in lexicographic order; false at the last.
fn next_permutation(p: &mut [u8]) -> bool {
    if p.len() < 2 {
        return false;
    }
    let mut i = p.len() - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = p.len() - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}
