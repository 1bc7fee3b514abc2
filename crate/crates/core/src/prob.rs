//! Finitely supported product laws over a semigroup, exact enumeration of
//! the product space, and per-path statistics.
//!
//! Everything here is exact: probabilities are `BigRational` and outcome
//! enumeration is lexicographic (first variable most significant), which
//! gives a stable global index for every outcome. Workers can own disjoint
//! index ranges and merge with exact addition, so results never depend on
//! how the work was split.

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, ToPrimitive, Zero};
use thiserror::Error;

use crate::rng::{counter_u64, unit_f64};
use crate::scalar::Scalar;
use crate::semigroup::{Element, SemigroupError, SemigroupInstance};

/// Hard cap on exact enumeration work unless a scenario raises it.
pub const DEFAULT_BUDGET: u64 = 10_000_000;

#[derive(Debug, Error)]
pub enum ProbError {
    #[error("distribution needs at least one support point")]
    EmptySupport,
    #[error("probability of element {element} must be positive, got {prob}")]
    NonPositiveProbability { element: String, prob: String },
    #[error("probabilities sum to {total}, expected 1")]
    BadTotalMass { total: String },
    #[error("scenario needs at least one variable")]
    NoVariables,
    #[error("outcome space has {needed} points, budget allows {budget}")]
    BudgetExceeded { needed: u128, budget: u64 },
    #[error("window depth {depth} must be in 1..={limit} for {n} variables")]
    DepthOutOfRange { depth: usize, limit: usize, n: usize },
    #[error("outcome has {got} values, scenario has {expected} variables")]
    OutcomeShape { got: usize, expected: usize },
    #[error(transparent)]
    Semigroup(#[from] SemigroupError),
}

/// A finitely supported law. Duplicate elements are merged; every stated
/// probability must be strictly positive and the total must be exactly 1.
#[derive(Clone, Debug)]
pub struct FiniteDistribution {
    support: Vec<(Element, BigRational)>,
}

impl FiniteDistribution {
    pub fn new(pairs: Vec<(Element, BigRational)>) -> Result<Self, ProbError> {
        if pairs.is_empty() {
            return Err(ProbError::EmptySupport);
        }
        let mut support: Vec<(Element, BigRational)> = Vec::with_capacity(pairs.len());
        for (element, prob) in pairs {
            if prob <= BigRational::zero() {
                return Err(ProbError::NonPositiveProbability {
                    element: element.encode(),
                    prob: format!("{}/{}", prob.numer(), prob.denom()),
                });
            }
            match support.iter_mut().find(|(e, _)| *e == element) {
                Some((_, p)) => *p += prob,
                None => support.push((element, prob)),
            }
        }
        let total: BigRational = support.iter().map(|(_, p)| p.clone()).sum();
        if !total.is_one() {
            return Err(ProbError::BadTotalMass {
                total: format!("{}/{}", total.numer(), total.denom()),
            });
        }
        Ok(FiniteDistribution { support })
    }

    /// Uniform law over the given elements.
    pub fn uniform(elements: Vec<Element>) -> Result<Self, ProbError> {
        let n = elements.len();
        if n == 0 {
            return Err(ProbError::EmptySupport);
        }
        let p = BigRational::new(BigInt::one(), BigInt::from(n as u64));
        FiniteDistribution::new(elements.into_iter().map(|e| (e, p.clone())).collect())
    }

    pub fn support(&self) -> &[(Element, BigRational)] {
        &self.support
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// n independent (not necessarily identically distributed) steps in one
/// semigroup, plus the two anchor points the walk is measured from.
///
/// `z0` anchors the products (`z0 * X_1 * ... * X_j`), `z1` is the point the
/// walk's distance is measured to. They may differ.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub instance: SemigroupInstance,
    pub laws: Vec<FiniteDistribution>,
    pub z0: Element,
    pub z1: Element,
    budget: u64,
}

impl Scenario {
    pub fn new(
        instance: SemigroupInstance,
        laws: Vec<FiniteDistribution>,
        z0: Element,
        z1: Element,
    ) -> Result<Self, ProbError> {
        if laws.is_empty() {
            return Err(ProbError::NoVariables);
        }
        for law in &laws {
            for (element, _) in law.support() {
                if element.family() != instance.family() {
                    return Err(SemigroupError::FamilyMismatch {
                        expected: instance.family().to_string(),
                        found: element.family().to_string(),
                    }
                    .into());
                }
            }
        }
        for anchor in [&z0, &z1] {
            if anchor.family() != instance.family() {
                return Err(SemigroupError::FamilyMismatch {
                    expected: instance.family().to_string(),
                    found: anchor.family().to_string(),
                }
                .into());
            }
        }
        Ok(Scenario {
            instance,
            laws,
            z0,
            z1,
            budget: DEFAULT_BUDGET,
        })
    }

    pub fn with_budget(mut self, budget: u64) -> Self {
        self.budget = budget;
        self
    }

    pub fn budget(&self) -> u64 {
        self.budget
    }

    /// Number of variables n.
    pub fn len(&self) -> usize {
        self.laws.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Size of the product outcome space.
    pub fn outcome_count(&self) -> u128 {
        self.laws
            .iter()
            .map(|law| law.len() as u128)
            .product()
    }

    fn check_budget(&self) -> Result<u64, ProbError> {
        let needed = self.outcome_count();
        if needed > self.budget as u128 {
            return Err(ProbError::BudgetExceeded {
                needed,
                budget: self.budget,
            });
        }
        Ok(needed as u64)
    }
}

/// One point of the product space: per-variable support indices, the chosen
/// elements, and the exact product probability.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub indices: Vec<usize>,
    pub values: Vec<Element>,
    pub prob: BigRational,
}

pub struct OutcomeIter<'a> {
    sc: &'a Scenario,
    next_flat: u64,
    end: u64,
}

impl<'a> Iterator for OutcomeIter<'a> {
    type Item = Outcome;

    fn next(&mut self) -> Option<Outcome> {
        if self.next_flat >= self.end {
            return None;
        }
        let out = decode_outcome(self.sc, self.next_flat);
        self.next_flat += 1;
        Some(out)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.end - self.next_flat) as usize;
        (left, Some(left))
    }
}

fn decode_outcome(sc: &Scenario, flat: u64) -> Outcome {
    let n = sc.len();
    let mut indices = vec![0usize; n];
    let mut rem = flat;
    for v in (0..n).rev() {
        let radix = sc.laws[v].len() as u64;
        indices[v] = (rem % radix) as usize;
        rem /= radix;
    }
    let mut values = Vec::with_capacity(n);
    let mut prob = BigRational::one();
    for (v, &i) in indices.iter().enumerate() {
        let (element, p) = &sc.laws[v].support()[i];
        values.push(element.clone());
        prob *= p;
    }
    Outcome {
        indices,
        values,
        prob,
    }
}

/// Full enumeration in lexicographic order, gated by the scenario budget.
pub fn enumerate_outcomes(sc: &Scenario) -> Result<OutcomeIter<'_>, ProbError> {
    let total = sc.check_budget()?;
    Ok(OutcomeIter {
        sc,
        next_flat: 0,
        end: total,
    })
}

/// Enumeration of the contiguous index range `[start, end)`: the unit of
/// work ownership when the space is split across workers.
pub fn enumerate_range(sc: &Scenario, start: u64, end: u64) -> Result<OutcomeIter<'_>, ProbError> {
    let total = sc.outcome_count();
    if (end as u128) > total || start > end {
        return Err(ProbError::BudgetExceeded {
            needed: end as u128,
            budget: total.min(u64::MAX as u128) as u64,
        });
    }
    Ok(OutcomeIter {
        sc,
        next_flat: start,
        end,
    })
}

/// Everything the bounds need to know about one realized path.
#[derive(Clone, Debug)]
pub struct PathStats {
    /// Anchored partial products `z0 * X_1 * ... * X_j`, j = 1..n.
    pub partials: Vec<Element>,
    /// `max_j d(z1, partials[j])`.
    pub running_max: Scalar,
    /// Step sizes `d(z0, z0 * X_j)` (anchor-independent).
    pub increments: Vec<Scalar>,
    /// `max_j increments[j]`.
    pub max_increment: Scalar,
    /// Increments sorted ascending.
    pub sorted_increments: Vec<Scalar>,
}

impl PathStats {
    /// Sum of the `depth - 1` largest increments (a sum over a window that
    /// excludes the single largest slot); depth 1 gives exactly zero.
    pub fn top_sum(&self, depth: usize) -> Scalar {
        let n = self.sorted_increments.len();
        assert!(
            depth >= 1 && depth <= n + 1,
            "window depth {depth} out of 1..={}",
            n + 1
        );
        let mut acc = self
            .sorted_increments
            .first()
            .map(Scalar::zero_like)
            .unwrap_or_else(Scalar::exact_zero);
        for y in &self.sorted_increments[n + 1 - depth..] {
            acc = acc.add(y);
        }
        acc
    }
}

pub(crate) fn stats_for(sc: &Scenario, values: &[Element]) -> Result<PathStats, ProbError> {
    let n = sc.len();
    if values.len() != n {
        return Err(ProbError::OutcomeShape {
            got: values.len(),
            expected: n,
        });
    }
    let sg = &sc.instance;
    let mut partials = Vec::with_capacity(n);
    let mut increments = Vec::with_capacity(n);
    let mut running_max: Option<Scalar> = None;
    let mut max_increment: Option<Scalar> = None;
    let mut anchored = sc.z0.clone();
    for x in values {
        anchored = sg.combine(&anchored, x)?;
        let to_target = sg.distance(&sc.z1, &anchored)?;
        running_max = Some(match running_max {
            Some(m) if m >= to_target => m,
            _ => to_target,
        });
        let step = sg.norm_increment(&sc.z0, x)?;
        max_increment = Some(match max_increment.clone() {
            Some(m) if m >= step => m,
            _ => step.clone(),
        });
        increments.push(step);
        partials.push(anchored.clone());
    }
    let mut sorted_increments = increments.clone();
    sorted_increments.sort_by(|a, b| a.total_cmp(b));
    Ok(PathStats {
        partials,
        running_max: running_max.expect("n >= 1"),
        increments,
        max_increment: max_increment.expect("n >= 1"),
        sorted_increments,
    })
}

/// Path statistics for one outcome; `depth` is validated so a later
/// `top_sum(depth)` cannot panic.
pub fn path_statistics(
    sc: &Scenario,
    outcome: &Outcome,
    depth: usize,
) -> Result<PathStats, ProbError> {
    let n = sc.len();
    if depth < 1 || depth > n + 1 {
        return Err(ProbError::DepthOutOfRange {
            depth,
            limit: n + 1,
            n,
        });
    }
    stats_for(sc, &outcome.values)
}

/// Exact probability of the event described by `pred`.
pub fn event_probability(
    sc: &Scenario,
    mut pred: impl FnMut(&Outcome, &PathStats) -> bool,
) -> Result<BigRational, ProbError> {
    let mut total = BigRational::zero();
    for outcome in enumerate_outcomes(sc)? {
        let stats = stats_for(sc, &outcome.values)?;
        if pred(&outcome, &stats) {
            total += &outcome.prob;
        }
    }
    Ok(total)
}

/// Key of one independent sample of the whole scenario.
#[derive(Clone, Copy, Debug)]
pub struct DrawKey {
    pub seed: u64,
    pub index: u64,
}

/// Draws one outcome. Each variable consumes one counter-mode uniform keyed
/// by `(seed, variable, index)`, so the draw is order- and worker-free.
pub fn sample_outcome(sc: &Scenario, key: DrawKey) -> Outcome {
    let n = sc.len();
    let mut indices = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    let mut prob = BigRational::one();
    for (v, law) in sc.laws.iter().enumerate() {
        let u = unit_f64(counter_u64(key.seed, v as u64, key.index, 0));
        let mut acc = 0.0;
        let mut chosen = law.len() - 1;
        for (i, (_, p)) in law.support().iter().enumerate() {
            acc += p.to_f64().unwrap_or(0.0);
            if u < acc {
                chosen = i;
                break;
            }
        }
        let (element, p) = &law.support()[chosen];
        indices.push(chosen);
        values.push(element.clone());
        prob *= p;
    }
    Outcome {
        indices,
        values,
        prob,
    }
}
