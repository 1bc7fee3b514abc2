//! Exact evaluation of the maximal tail bound and of the two classical
//! specializations it generalizes.
//!
//! Notation used throughout this module, for a scenario with n independent
//! steps `X_j` and anchored products `W_j = z0 * X_1 * ... * X_j`:
//!
//! * `U = max_j d(z1, W_j)`: the farthest the walk gets from `z1`;
//! * `Y_j = d(z0, z0 * X_j)`: the size of step j (anchor independent);
//! * `M = max_j Y_j`: the largest single step.
//!
//! Parameters are block sizes `(n_1..n_k)` with `K = sum n_i <= n + 1`,
//! per-block thresholds `(t_1..t_k)`, and an increment allowance `s`. The
//! deadline is `zeta = (2 n_1 - 1) t_1 + 2 sum_{i>=2} n_i t_i + (K-1) s`,
//! and the bound compares `P(U > zeta)` against a product of per-block
//! tail factors plus a tail term for the steps themselves. Two algebraic
//! forms of the product are computed independently and must agree exactly;
//! a mismatch is reported as an internal error rather than papered over.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use num::rational::BigRational;
use num::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prob::{enumerate_outcomes, stats_for, ProbError, Scenario};
use crate::report::ser_rat;
use crate::scalar::{factorial, rat_pow, Scalar};

/// Which tail accompanies the product term on the right-hand side.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TailVariant {
    /// `P(M > s)`: the largest single step exceeds the allowance.
    #[serde(rename = "max")]
    MaxIncrement,
    /// `P(top-window sum > (K-1) s)`: the sum of the `K-1` largest steps
    /// exceeds the scaled allowance. Never larger than the max variant.
    #[serde(rename = "order")]
    OrderStatistic,
}

impl fmt::Display for TailVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TailVariant::MaxIncrement => "max",
            TailVariant::OrderStatistic => "order",
        })
    }
}

impl FromStr for TailVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "max" => Ok(TailVariant::MaxIncrement),
            "order" => Ok(TailVariant::OrderStatistic),
            other => Err(format!("unknown tail variant {other:?} (want max|order)")),
        }
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("hypothesis violated: total block size {total} exceeds n + 1 = {limit}")]
    HypothesisViolated { total: usize, limit: usize },
    #[error("invalid bound parameters: {0}")]
    InvalidParams(String),
    #[error("exact evaluation needs an exact scenario and exact parameters")]
    InexactInput,
    #[error("internal consistency check failed: {0}")]
    InternalCheck(String),
    #[error(transparent)]
    Prob(#[from] ProbError),
}

/// Validated block structure `(n_1..n_k)`, thresholds `(t_1..t_k)`, and the
/// increment allowance `s`.
#[derive(Clone, Debug, Serialize)]
pub struct BoundParams {
    sizes: Vec<usize>,
    thresholds: Vec<Scalar>,
    increment_bound: Scalar,
}

impl BoundParams {
    pub fn new(
        sizes: Vec<usize>,
        thresholds: Vec<Scalar>,
        increment_bound: Scalar,
    ) -> Result<Self, EngineError> {
        if sizes.is_empty() {
            return Err(EngineError::InvalidParams(
                "at least one block is required".into(),
            ));
        }
        if sizes.len() != thresholds.len() {
            return Err(EngineError::InvalidParams(format!(
                "{} block sizes but {} thresholds",
                sizes.len(),
                thresholds.len()
            )));
        }
        if sizes.iter().any(|&s| s == 0) {
            return Err(EngineError::InvalidParams(
                "block sizes must be positive".into(),
            ));
        }
        if thresholds.iter().any(Scalar::is_negative) || increment_bound.is_negative() {
            return Err(EngineError::InvalidParams(
                "thresholds and the increment allowance must be nonnegative".into(),
            ));
        }
        Ok(BoundParams {
            sizes,
            thresholds,
            increment_bound,
        })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn thresholds(&self) -> &[Scalar] {
        &self.thresholds
    }

    pub fn increment_bound(&self) -> &Scalar {
        &self.increment_bound
    }

    /// Number of blocks k.
    pub fn block_count(&self) -> usize {
        self.sizes.len()
    }

    /// K = n_1 + ... + n_k.
    pub fn total_size(&self) -> usize {
        self.sizes.iter().sum()
    }

    /// Positions where each block starts: `offsets()[i] = n_1 + ... + n_i`
    /// for i blocks consumed, starting at 0.
    pub fn offsets(&self) -> Vec<usize> {
        let mut acc = 0;
        let mut out = Vec::with_capacity(self.sizes.len() + 1);
        out.push(0);
        for &s in &self.sizes {
            acc += s;
            out.push(acc);
        }
        out
    }

    /// Per-slot thresholds `t'_1..t'_K`: block i contributes `n_i` copies
    /// of `t_i`.
    pub fn schedule(&self) -> Vec<Scalar> {
        let mut out = Vec::with_capacity(self.total_size());
        for (size, t) in self.sizes.iter().zip(&self.thresholds) {
            for _ in 0..*size {
                out.push(t.clone());
            }
        }
        out
    }

    /// The deadline `zeta = (2 n_1 - 1) t_1 + 2 sum_{i>=2} n_i t_i + (K-1) s`.
    pub fn zeta(&self) -> Scalar {
        let mut z = self.thresholds[0].mul_nat(2 * self.sizes[0] as u64 - 1);
        for i in 1..self.sizes.len() {
            z = z.add(&self.thresholds[i].mul_nat(2 * self.sizes[i] as u64));
        }
        z.add(&self.increment_bound.mul_nat(self.total_size() as u64 - 1))
    }

    pub fn is_exact(&self) -> bool {
        self.thresholds.iter().all(Scalar::is_exact) && self.increment_bound.is_exact()
    }

    /// The structural hypothesis: K may exceed n by at most one.
    pub fn validate_for(&self, n: usize) -> Result<(), EngineError> {
        let total = self.total_size();
        if total > n + 1 {
            return Err(EngineError::HypothesisViolated {
                total,
                limit: n + 1,
            });
        }
        Ok(())
    }
}

/// Two-block shape `(1, 1)` with a shared threshold: the classical
/// two-factor bound `P(U > 3t + s) <= P(U > t)^2 + P(M > s)`.
pub fn lt_params(t: Scalar, s: Scalar) -> Result<BoundParams, EngineError> {
    BoundParams::new(vec![1, 1], vec![t.clone(), t], s)
}

/// Single block of size K: the factorial-gain shape behind
/// `P(U > 2Kt + (K-1)s) <= P(U > t)^K / (K! P(U <= t)^K) + P(M > s)`.
pub fn hm_params(segments: usize, t: Scalar, s: Scalar) -> Result<BoundParams, EngineError> {
    if segments == 0 {
        return Err(EngineError::InvalidParams(
            "segment count must be positive".into(),
        ));
    }
    BoundParams::new(vec![segments], vec![t], s)
}

/// Per-outcome facts the bounds are computed from.
pub(crate) struct EvalRow {
    pub prob: BigRational,
    /// U on this path.
    pub max_anchored: Scalar,
    /// M on this path.
    pub max_increment: Scalar,
    /// Sum of the `depth - 1` largest steps on this path.
    pub top_window: Scalar,
}

pub(crate) fn eval_rows(sc: &Scenario, depth: usize) -> Result<Vec<EvalRow>, EngineError> {
    let mut rows = Vec::new();
    for outcome in enumerate_outcomes(sc)? {
        let stats = stats_for(sc, &outcome.values)?;
        rows.push(EvalRow {
            prob: outcome.prob,
            max_anchored: stats.running_max.clone(),
            max_increment: stats.max_increment.clone(),
            top_window: stats.top_sum(depth),
        });
    }
    Ok(rows)
}

fn prob_sum(rows: &[EvalRow], mut pred: impl FnMut(&EvalRow) -> bool) -> BigRational {
    let mut total = BigRational::zero();
    for row in rows {
        if pred(row) {
            total += &row.prob;
        }
    }
    total
}

fn require_exact(sc: &Scenario, exact_params: bool) -> Result<(), EngineError> {
    if sc.instance.is_exact() && exact_params {
        Ok(())
    } else {
        Err(EngineError::InexactInput)
    }
}

/// `P(U > t)`, exactly.
pub fn tail_probability(sc: &Scenario, threshold: &Scalar) -> Result<BigRational, EngineError> {
    require_exact(sc, threshold.is_exact())?;
    let rows = eval_rows(sc, 1)?;
    Ok(prob_sum(&rows, |r| r.max_anchored > *threshold))
}

pub(crate) struct FactorAnalysis {
    pub(crate) tails: Vec<BigRational>,
    pub(crate) cdfs: Vec<BigRational>,
    pub(crate) branch: BTreeSet<usize>,
    pub(crate) main: BigRational,
}

/// Tail/cdf per block, the branch set, and the product term computed two
/// ways. The branch set contains block i (1-based) when
/// `n_i! * cdf_i^(n_i - [i = 1])` is at most 1, i.e. when the plain power
/// `tail_i^{n_i}` is the sharper (or only well-defined) factor.
pub(crate) fn factor_analysis(
    rows: &[EvalRow],
    p: &BoundParams,
) -> Result<FactorAnalysis, EngineError> {
    let one = BigRational::one();
    let k = p.block_count();
    let mut tails = Vec::with_capacity(k);
    let mut cdfs = Vec::with_capacity(k);
    for t in p.thresholds() {
        let tail = prob_sum(rows, |r| r.max_anchored > *t);
        let cdf = &one - &tail;
        tails.push(tail);
        cdfs.push(cdf);
    }

    let mut branch = BTreeSet::new();
    for i in 0..k {
        let size = p.sizes()[i];
        let exponent = size - usize::from(i == 0);
        let gate = BigRational::from_integer(factorial(size)) * rat_pow(&cdfs[i], exponent);
        if gate <= one {
            branch.insert(i + 1);
        }
    }

    // Case-split form: a leading cdf_1 when block 1 is outside the branch
    // set, then plain powers inside it and factorial-discounted ratios
    // outside. Blocks outside the branch set have cdf > 0 by definition of
    // the gate, so the division is safe.
    let mut main = if branch.contains(&1) {
        one.clone()
    } else {
        cdfs[0].clone()
    };
    for i in 1..=k {
        let size = p.sizes()[i - 1];
        if branch.contains(&i) {
            main *= rat_pow(&tails[i - 1], size);
        } else {
            let den = BigRational::from_integer(factorial(size)) * rat_pow(&cdfs[i - 1], size);
            main *= rat_pow(&tails[i - 1], size) / den;
        }
    }

    // Branch-free form: tail^n_i * min(1, 1/gate), multiplying by the
    // reciprocal only when the gate exceeds 1 (so a zero cdf never divides).
    let mut alt = one.clone();
    for i in 0..k {
        let size = p.sizes()[i];
        let exponent = size - usize::from(i == 0);
        alt *= rat_pow(&tails[i], size);
        let gate = BigRational::from_integer(factorial(size)) * rat_pow(&cdfs[i], exponent);
        if gate > one {
            alt /= gate;
        }
    }

    if main != alt {
        return Err(EngineError::InternalCheck(format!(
            "product term disagrees between forms: case-split {} vs branch-free {}",
            crate::report::rat_to_string(&main),
            crate::report::rat_to_string(&alt),
        )));
    }

    Ok(FactorAnalysis {
        tails,
        cdfs,
        branch,
        main,
    })
}

/// The set of blocks whose plain tail power is used (1-based indices).
pub fn branch_set(sc: &Scenario, p: &BoundParams) -> Result<BTreeSet<usize>, EngineError> {
    p.validate_for(sc.len())?;
    require_exact(sc, p.is_exact())?;
    let rows = eval_rows(sc, 1)?;
    Ok(factor_analysis(&rows, p)?.branch)
}

/// The product term on the right-hand side.
pub fn main_term(sc: &Scenario, p: &BoundParams) -> Result<BigRational, EngineError> {
    p.validate_for(sc.len())?;
    require_exact(sc, p.is_exact())?;
    let rows = eval_rows(sc, 1)?;
    Ok(factor_analysis(&rows, p)?.main)
}

/// The additive tail term for the chosen variant.
pub fn tail_term(
    sc: &Scenario,
    p: &BoundParams,
    variant: TailVariant,
) -> Result<BigRational, EngineError> {
    p.validate_for(sc.len())?;
    require_exact(sc, p.is_exact())?;
    let total = p.total_size();
    let rows = eval_rows(sc, total)?;
    Ok(tail_term_from(&rows, p, variant))
}

fn tail_term_from(rows: &[EvalRow], p: &BoundParams, variant: TailVariant) -> BigRational {
    match variant {
        TailVariant::MaxIncrement => {
            prob_sum(rows, |r| r.max_increment > *p.increment_bound())
        }
        TailVariant::OrderStatistic => {
            let allowance = p.increment_bound().mul_nat(p.total_size() as u64 - 1);
            prob_sum(rows, |r| r.top_window > allowance)
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FactorReport {
    pub index: usize,
    pub size: usize,
    pub threshold: Scalar,
    #[serde(serialize_with = "ser_rat")]
    pub tail: BigRational,
    #[serde(serialize_with = "ser_rat")]
    pub cdf: BigRational,
    pub in_branch_set: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct EvaluationReport {
    pub params: BoundParams,
    pub variant: TailVariant,
    pub zeta: Scalar,
    #[serde(serialize_with = "ser_rat")]
    pub lhs: BigRational,
    pub branch_set: Vec<usize>,
    pub factors: Vec<FactorReport>,
    #[serde(serialize_with = "ser_rat")]
    pub main_term: BigRational,
    #[serde(serialize_with = "ser_rat")]
    pub tail_term: BigRational,
    #[serde(serialize_with = "ser_rat")]
    pub rhs: BigRational,
    pub holds: bool,
    #[serde(serialize_with = "ser_rat")]
    pub slack: BigRational,
}

/// Evaluates both sides of the bound exactly and reports every ingredient.
pub fn evaluate(
    sc: &Scenario,
    p: &BoundParams,
    variant: TailVariant,
) -> Result<EvaluationReport, EngineError> {
    p.validate_for(sc.len())?;
    require_exact(sc, p.is_exact())?;
    let rows = eval_rows(sc, p.total_size())?;

    let zeta = p.zeta();
    let lhs = prob_sum(&rows, |r| r.max_anchored > zeta);
    let analysis = factor_analysis(&rows, p)?;
    let tail = tail_term_from(&rows, p, variant);
    let rhs = &analysis.main + &tail;
    let holds = lhs <= rhs;
    let slack = &rhs - &lhs;

    let factors = (0..p.block_count())
        .map(|i| FactorReport {
            index: i + 1,
            size: p.sizes()[i],
            threshold: p.thresholds()[i].clone(),
            tail: analysis.tails[i].clone(),
            cdf: analysis.cdfs[i].clone(),
            in_branch_set: analysis.branch.contains(&(i + 1)),
        })
        .collect();

    Ok(EvaluationReport {
        params: p.clone(),
        variant,
        zeta,
        lhs,
        branch_set: analysis.branch.iter().copied().collect(),
        factors,
        main_term: analysis.main,
        tail_term: tail,
        rhs,
        holds,
        slack,
    })
}

/// A right-hand side that may be infinite (degenerate denominators).
#[derive(Clone, Debug, PartialEq)]
pub enum BoundValue {
    Finite(BigRational),
    Infinite,
}

impl BoundValue {
    pub fn as_finite(&self) -> Option<&BigRational> {
        match self {
            BoundValue::Finite(r) => Some(r),
            BoundValue::Infinite => None,
        }
    }
}

impl Serialize for BoundValue {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            BoundValue::Finite(r) => serializer.serialize_str(&crate::report::rat_to_string(r)),
            BoundValue::Infinite => serializer.serialize_str("inf"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum PriorKind {
    #[serde(rename = "lt")]
    Lt,
    #[serde(rename = "hm")]
    Hm,
}

#[derive(Clone, Debug, Serialize)]
pub struct PriorBoundReport {
    pub kind: PriorKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub segments: Option<usize>,
    pub threshold: Scalar,
    pub increment_bound: Scalar,
    /// The deadline on the left-hand side (`3t + s`, resp. `2Kt + (K-1)s`).
    pub deadline: Scalar,
    #[serde(serialize_with = "ser_rat")]
    pub lhs: BigRational,
    pub rhs: BoundValue,
    pub holds: bool,
    /// True when the right-hand side is infinite because `P(U <= t) = 0`.
    pub degenerate: bool,
    /// True when `t` or `s` is zero; the bound still holds but carries
    /// little information there.
    pub zero_params: bool,
}

/// The classical two-factor bound, cross-checked against [`evaluate`] on the
/// equivalent `(1, 1)` block shape.
pub fn lt_bound(sc: &Scenario, t: &Scalar, s: &Scalar) -> Result<PriorBoundReport, EngineError> {
    require_exact(sc, t.is_exact() && s.is_exact())?;
    let params = lt_params(t.clone(), s.clone())?;
    params.validate_for(sc.len())?;

    let rows = eval_rows(sc, 2)?;
    let deadline = t.mul_nat(3).add(s);
    let lhs = prob_sum(&rows, |r| r.max_anchored > deadline);
    let tail = prob_sum(&rows, |r| r.max_anchored > *t);
    let step_tail = prob_sum(&rows, |r| r.max_increment > *s);
    let rhs = &tail * &tail + &step_tail;

    let general = evaluate(sc, &params, TailVariant::MaxIncrement)?;
    if general.zeta != deadline || general.lhs != lhs || general.rhs != rhs {
        return Err(EngineError::InternalCheck(
            "two-factor bound disagrees with its block-shape evaluation".into(),
        ));
    }

    Ok(PriorBoundReport {
        kind: PriorKind::Lt,
        segments: None,
        threshold: t.clone(),
        increment_bound: s.clone(),
        deadline,
        lhs: lhs.clone(),
        rhs: BoundValue::Finite(rhs.clone()),
        holds: lhs <= rhs,
        degenerate: false,
        zero_params: t.is_zero() || s.is_zero(),
    })
}

/// The factorial-gain bound, cross-checked against [`evaluate`] on the
/// single-block shape: its deadline is never earlier, and its right-hand
/// side is never smaller, so the general bound implies it.
pub fn hm_bound(
    sc: &Scenario,
    segments: usize,
    t: &Scalar,
    s: &Scalar,
) -> Result<PriorBoundReport, EngineError> {
    require_exact(sc, t.is_exact() && s.is_exact())?;
    let params = hm_params(segments, t.clone(), s.clone())?;
    params.validate_for(sc.len())?;
    let k = segments as u64;

    let rows = eval_rows(sc, segments)?;
    let deadline = t.mul_nat(2 * k).add(&s.mul_nat(k - 1));
    let lhs = prob_sum(&rows, |r| r.max_anchored > deadline);
    let tail = prob_sum(&rows, |r| r.max_anchored > *t);
    let cdf = BigRational::one() - &tail;
    let step_tail = prob_sum(&rows, |r| r.max_increment > *s);

    let general = evaluate(sc, &params, TailVariant::MaxIncrement)?;
    if lhs > general.lhs {
        return Err(EngineError::InternalCheck(
            "later deadline produced a larger tail".into(),
        ));
    }

    let (rhs, degenerate) = if cdf.is_zero() {
        (BoundValue::Infinite, true)
    } else {
        let ratio = &tail / &cdf;
        let value =
            rat_pow(&ratio, segments) / BigRational::from_integer(factorial(segments)) + &step_tail;
        if general.rhs > value {
            return Err(EngineError::InternalCheck(
                "block-shape right side exceeds the factorial-gain right side".into(),
            ));
        }
        (BoundValue::Finite(value), false)
    };

    let holds = match &rhs {
        BoundValue::Finite(v) => lhs <= *v,
        BoundValue::Infinite => true,
    };

    Ok(PriorBoundReport {
        kind: PriorKind::Hm,
        segments: Some(segments),
        threshold: t.clone(),
        increment_bound: s.clone(),
        deadline,
        lhs,
        rhs,
        holds,
        degenerate,
        zero_params: t.is_zero() || s.is_zero(),
    })
}
