//! Seeded Monte Carlo estimation of every quantity in the bound, for
//! scenarios that cannot be enumerated (continuous step laws, large n).
//!
//! Sampling is counter-based: draw j of variable v in sample i is keyed by
//! `(seed, v, i, j)`, so workers own disjoint sample ranges and the report
//! is bit-identical for any worker count. Indicator probabilities get
//! Wilson score intervals; the right-hand side is assembled conservatively
//! (upper endpoints for numerators, lower endpoints for denominators), with
//! the product branch chosen by point estimate and both branches reported.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::bound::{BoundParams, EngineError};
use crate::exec::parallel_chunks;
use crate::prob::{FiniteDistribution, Scenario};
use crate::report::ser_f64;
use crate::rng::{box_muller, counter_u64, unit_f64, unit_open_f64, GENERATOR, KEYING};
use crate::scalar::Scalar;
use crate::semigroup::{Element, SemigroupError, SemigroupFamily, SemigroupInstance};

pub const MIN_SAMPLES: u64 = 100;

#[derive(Debug, Error)]
pub enum McError {
    #[error("confidence level must be strictly between 0 and 1, got {0}")]
    InvalidLevel(f64),
    #[error("need at least {MIN_SAMPLES} samples, got {0}")]
    TooFewSamples(u64),
    #[error("sampled scenario needs at least one variable")]
    NoVariables,
    #[error("step law does not fit the semigroup: {0}")]
    LawMismatch(String),
    #[error("invalid step law: {0}")]
    InvalidLaw(String),
    #[error(transparent)]
    Semigroup(#[from] SemigroupError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// A step law the sampler can draw from.
#[derive(Clone, Debug)]
pub enum SamplableLaw {
    Finite(FiniteDistribution),
    /// Independent normal coordinates in Euclidean(d): `mean + scale * g`.
    Gaussian { mean: Vec<f64>, scale: f64 },
    /// Uniform angle on `[-half_width, half_width)` on the circle.
    Arc { half_width: f64 },
}

/// A scenario whose steps are drawn rather than enumerated.
#[derive(Clone, Debug)]
pub struct McScenario {
    pub instance: SemigroupInstance,
    pub laws: Vec<SamplableLaw>,
    pub z0: Element,
    pub z1: Element,
}

impl McScenario {
    pub fn new(
        instance: SemigroupInstance,
        laws: Vec<SamplableLaw>,
        z0: Element,
        z1: Element,
    ) -> Result<Self, McError> {
        if laws.is_empty() {
            return Err(McError::NoVariables);
        }
        instance.expect_member(&z0)?;
        instance.expect_member(&z1)?;
        for (v, law) in laws.iter().enumerate() {
            match law {
                SamplableLaw::Finite(dist) => {
                    for (element, _) in dist.support() {
                        instance.expect_member(element).map_err(|_| {
                            McError::LawMismatch(format!(
                                "variable {v}: support element {} is not in {}",
                                element.encode(),
                                instance.family()
                            ))
                        })?;
                    }
                }
                SamplableLaw::Gaussian { mean, scale } => {
                    let dim = match instance.family() {
                        SemigroupFamily::Euclidean { dim } => *dim as usize,
                        other => {
                            return Err(McError::LawMismatch(format!(
                                "variable {v}: normal steps need a euclidean instance, got {other}"
                            )))
                        }
                    };
                    if mean.len() != dim {
                        return Err(McError::InvalidLaw(format!(
                            "variable {v}: mean has {} coordinates, instance has {dim}",
                            mean.len()
                        )));
                    }
                    if mean.iter().any(|c| !c.is_finite()) || !scale.is_finite() || *scale <= 0.0
                    {
                        return Err(McError::InvalidLaw(format!(
                            "variable {v}: mean must be finite and scale positive"
                        )));
                    }
                }
                SamplableLaw::Arc { half_width } => {
                    if !matches!(instance.family(), SemigroupFamily::Circle) {
                        return Err(McError::LawMismatch(format!(
                            "variable {v}: arc steps need the circle instance"
                        )));
                    }
                    if !half_width.is_finite() || *half_width <= 0.0 {
                        return Err(McError::InvalidLaw(format!(
                            "variable {v}: arc half-width must be finite and positive"
                        )));
                    }
                }
            }
        }
        Ok(McScenario {
            instance,
            laws,
            z0,
            z1,
        })
    }

    /// Wraps an enumerable scenario for sampling. Draws match
    /// [`crate::prob::sample_outcome`] key for key.
    pub fn from_exact(sc: &Scenario) -> Self {
        McScenario {
            instance: sc.instance.clone(),
            laws: sc
                .laws
                .iter()
                .map(|law| SamplableLaw::Finite(law.clone()))
                .collect(),
            z0: sc.z0.clone(),
            z1: sc.z1.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.laws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.laws.is_empty()
    }
}

/// The normal quantile used by a two-sided interval at `level`.
pub fn confidence_z(level: f64) -> Result<f64, McError> {
    if !(level > 0.0 && level < 1.0) {
        return Err(McError::InvalidLevel(level));
    }
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    Ok(normal.inverse_cdf(0.5 + level / 2.0))
}

/// Wilson score interval for `successes` out of `samples`, clamped to [0, 1].
pub fn wilson_interval(successes: u64, samples: u64, z: f64) -> (f64, f64) {
    let n = samples as f64;
    let phat = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (phat + z2 / (2.0 * n)) / denom;
    let half = (z / denom) * (phat * (1.0 - phat) / n + z2 / (4.0 * n * n)).sqrt();
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// A sample proportion with its Wilson interval.
#[derive(Clone, Debug, Serialize)]
pub struct Estimate {
    pub successes: u64,
    pub samples: u64,
    #[serde(serialize_with = "ser_f64")]
    pub point: f64,
    #[serde(serialize_with = "ser_f64")]
    pub lower: f64,
    #[serde(serialize_with = "ser_f64")]
    pub upper: f64,
}

impl Estimate {
    fn from_counts(successes: u64, samples: u64, z: f64) -> Self {
        let (lower, upper) = wilson_interval(successes, samples, z);
        Estimate {
            successes,
            samples,
            point: successes as f64 / samples as f64,
            lower,
            upper,
        }
    }

    /// The estimate of the complementary event, with the mirrored interval
    /// (so estimate and complement never disagree about the split point).
    pub fn complement(&self) -> Estimate {
        Estimate {
            successes: self.samples - self.successes,
            samples: self.samples,
            point: 1.0 - self.point,
            lower: 1.0 - self.upper,
            upper: 1.0 - self.lower,
        }
    }

    pub fn contains(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }
}

/// A right-hand-side endpoint; infinite when a denominator's conservative
/// endpoint is zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RealBound {
    Finite(f64),
    Infinite,
}

impl RealBound {
    fn mul(self, factor: f64) -> RealBound {
        match self {
            RealBound::Finite(v) => RealBound::Finite(v * factor),
            RealBound::Infinite => RealBound::Infinite,
        }
    }

    fn div(self, denom: f64) -> RealBound {
        match self {
            RealBound::Finite(v) if denom > 0.0 => RealBound::Finite(v / denom),
            _ => RealBound::Infinite,
        }
    }

    fn add(self, term: f64) -> RealBound {
        match self {
            RealBound::Finite(v) => RealBound::Finite(v + term),
            RealBound::Infinite => RealBound::Infinite,
        }
    }

    pub fn as_finite(&self) -> Option<f64> {
        match self {
            RealBound::Finite(v) => Some(*v),
            RealBound::Infinite => None,
        }
    }
}

impl Serialize for RealBound {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            RealBound::Finite(v) => serializer.serialize_str(&crate::scalar::fmt_float17(*v)),
            RealBound::Infinite => serializer.serialize_str("inf"),
        }
    }
}

/// Conservative interval for an assembled (non-indicator) quantity.
#[derive(Clone, Debug, Serialize)]
pub struct RhsInterval {
    #[serde(serialize_with = "ser_f64")]
    pub point: f64,
    #[serde(serialize_with = "ser_f64")]
    pub lower: f64,
    pub upper: RealBound,
}

/// Per-block estimates, with both candidate product factors.
#[derive(Clone, Debug, Serialize)]
pub struct McFactor {
    pub index: usize,
    pub size: usize,
    pub threshold: Scalar,
    pub tail: Estimate,
    pub cdf: Estimate,
    /// Branch chosen by point estimate: plain tail power vs discounted ratio.
    pub in_branch_set: bool,
    #[serde(serialize_with = "ser_f64")]
    pub plain_power: f64,
    pub discounted: RealBound,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum McVerdict {
    #[serde(rename = "holds-with-margin")]
    HoldsWithMargin,
    #[serde(rename = "inconclusive")]
    Inconclusive,
    #[serde(rename = "violates-with-margin")]
    ViolatesWithMargin,
}

impl std::fmt::Display for McVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            McVerdict::HoldsWithMargin => "holds-with-margin",
            McVerdict::Inconclusive => "inconclusive",
            McVerdict::ViolatesWithMargin => "violates-with-margin",
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct McReport {
    pub generator: String,
    pub keying: String,
    pub n_samples: u64,
    pub seed: u64,
    #[serde(serialize_with = "ser_f64")]
    pub level: f64,
    pub params: BoundParams,
    pub zeta: Scalar,
    pub lhs: Estimate,
    pub factors: Vec<McFactor>,
    /// `P(M > s)`, the max-variant tail term.
    pub step_tail: Estimate,
    /// `P(top-window sum > (K-1) s)`, the order-variant tail term.
    pub window_tail: Estimate,
    pub main_term: RhsInterval,
    pub rhs_max: RhsInterval,
    pub rhs_order: RhsInterval,
    pub verdict_max: McVerdict,
    pub verdict_order: McVerdict,
    /// Overall: a violation in either variant dominates; holds only when
    /// both variants hold.
    pub verdict: McVerdict,
}

/// Verdict for one lhs/rhs interval pair, by conservative comparison.
pub fn verdict_for(lhs: &Estimate, rhs: &RhsInterval) -> McVerdict {
    if lhs.upper <= rhs.lower {
        return McVerdict::HoldsWithMargin;
    }
    match rhs.upper {
        RealBound::Finite(u) if lhs.lower > u => McVerdict::ViolatesWithMargin,
        _ => McVerdict::Inconclusive,
    }
}

fn combine_verdicts(a: McVerdict, b: McVerdict) -> McVerdict {
    use McVerdict::*;
    match (a, b) {
        (ViolatesWithMargin, _) | (_, ViolatesWithMargin) => ViolatesWithMargin,
        (HoldsWithMargin, HoldsWithMargin) => HoldsWithMargin,
        _ => Inconclusive,
    }
}

/// Recomputes the overall verdict of a report from its stored intervals.
pub fn mc_verdict(report: &McReport) -> McVerdict {
    combine_verdicts(
        verdict_for(&report.lhs, &report.rhs_max),
        verdict_for(&report.lhs, &report.rhs_order),
    )
}

#[derive(Clone)]
struct Counts {
    lhs: u64,
    tails: Vec<u64>,
    step: u64,
    window: u64,
}

impl Counts {
    fn zero(blocks: usize) -> Self {
        Counts {
            lhs: 0,
            tails: vec![0; blocks],
            step: 0,
            window: 0,
        }
    }

    fn merge(mut self, other: &Counts) -> Self {
        self.lhs += other.lhs;
        for (a, b) in self.tails.iter_mut().zip(&other.tails) {
            *a += b;
        }
        self.step += other.step;
        self.window += other.window;
        self
    }
}

fn draw_element(sc: &McScenario, variable: usize, seed: u64, sample: u64) -> Result<Element, McError> {
    let v = variable as u64;
    match &sc.laws[variable] {
        SamplableLaw::Finite(law) => {
            let u = unit_f64(counter_u64(seed, v, sample, 0));
            let support = law.support();
            let mut acc = 0.0;
            let mut chosen = support.len() - 1;
            for (i, (_, p)) in support.iter().enumerate() {
                acc += num::ToPrimitive::to_f64(p).unwrap_or(0.0);
                if u < acc {
                    chosen = i;
                    break;
                }
            }
            Ok(support[chosen].0.clone())
        }
        SamplableLaw::Gaussian { mean, scale } => {
            let dim = mean.len();
            let mut coords = Vec::with_capacity(dim);
            let mut counter = 0u64;
            while coords.len() < dim {
                let u1 = unit_open_f64(counter_u64(seed, v, sample, counter));
                let u2 = unit_f64(counter_u64(seed, v, sample, counter + 1));
                counter += 2;
                let (g0, g1) = box_muller(u1, u2);
                coords.push(mean[coords.len()] + scale * g0);
                if coords.len() < dim {
                    coords.push(mean[coords.len()] + scale * g1);
                }
            }
            Ok(sc.instance.vector(coords)?)
        }
        SamplableLaw::Arc { half_width } => {
            let u = unit_f64(counter_u64(seed, v, sample, 0));
            Ok(sc.instance.angle((2.0 * u - 1.0) * half_width)?)
        }
    }
}

struct Marks {
    zeta: f64,
    thresholds: Vec<f64>,
    step_bound: f64,
    allowance: f64,
    window_depth: usize,
}

fn count_range(
    sc: &McScenario,
    marks: &Marks,
    seed: u64,
    range: std::ops::Range<u64>,
) -> Result<Counts, McError> {
    let n = sc.len();
    let mut counts = Counts::zero(marks.thresholds.len());
    let mut steps = vec![0.0f64; n];
    for sample in range {
        let mut prev = sc.z0.clone();
        let mut u = f64::NEG_INFINITY;
        for (v, slot) in steps.iter_mut().enumerate() {
            let x = draw_element(sc, v, seed, sample)?;
            let next = sc.instance.combine(&prev, &x)?;
            let anchored = sc.instance.distance(&sc.z1, &next)?.to_f64();
            *slot = sc.instance.distance(&prev, &next)?.to_f64();
            if anchored > u {
                u = anchored;
            }
            prev = next;
        }
        if u > marks.zeta {
            counts.lhs += 1;
        }
        for (i, t) in marks.thresholds.iter().enumerate() {
            if u > *t {
                counts.tails[i] += 1;
            }
        }
        steps.sort_by(f64::total_cmp);
        if steps[n - 1] > marks.step_bound {
            counts.step += 1;
        }
        let window: f64 = steps[n + 1 - marks.window_depth..].iter().sum();
        if window > marks.allowance {
            counts.window += 1;
        }
    }
    Ok(counts)
}

/// Estimates both sides of the bound from `n_samples` seeded paths.
pub fn mc_estimate(
    sc: &McScenario,
    p: &BoundParams,
    n_samples: u64,
    seed: u64,
    level: f64,
    workers: usize,
) -> Result<McReport, McError> {
    let z = confidence_z(level)?;
    if n_samples < MIN_SAMPLES {
        return Err(McError::TooFewSamples(n_samples));
    }
    let n = sc.len();
    p.validate_for(n)?;
    let total = p.total_size();

    let marks = Marks {
        zeta: p.zeta().to_f64(),
        thresholds: p.thresholds().iter().map(Scalar::to_f64).collect(),
        step_bound: p.increment_bound().to_f64(),
        allowance: p.increment_bound().mul_nat(total as u64 - 1).to_f64(),
        window_depth: total,
    };

    let partials = parallel_chunks(n_samples, workers, |range| {
        count_range(sc, &marks, seed, range)
    });
    let mut counts = Counts::zero(p.block_count());
    for partial in partials {
        counts = counts.merge(&partial?);
    }

    let lhs = Estimate::from_counts(counts.lhs, n_samples, z);
    let step_tail = Estimate::from_counts(counts.step, n_samples, z);
    let window_tail = Estimate::from_counts(counts.window, n_samples, z);

    let mut factors = Vec::with_capacity(p.block_count());
    for i in 0..p.block_count() {
        let size = p.sizes()[i];
        let tail = Estimate::from_counts(counts.tails[i], n_samples, z);
        let cdf = tail.complement();
        let exponent = (size - usize::from(i == 0)) as i32;
        let fact = factorial_f64(size);
        let gate = fact * cdf.point.powi(exponent);
        let in_branch_set = gate <= 1.0;
        let plain_power = tail.point.powi(size as i32);
        let discounted = if cdf.point > 0.0 || exponent == 0 {
            RealBound::Finite(plain_power / (fact * cdf.point.powi(exponent)))
        } else {
            RealBound::Infinite
        };
        factors.push(McFactor {
            index: i + 1,
            size,
            threshold: p.thresholds()[i].clone(),
            tail,
            cdf,
            in_branch_set,
            plain_power,
            discounted,
        });
    }

    // Conservative product: tail uppers over cdf lowers for the upper
    // endpoint, tail lowers over cdf uppers for the lower endpoint.
    let mut main_point = 1.0f64;
    let mut main_lower = 1.0f64;
    let mut main_upper = RealBound::Finite(1.0);
    if !factors[0].in_branch_set {
        main_point *= factors[0].cdf.point;
        main_lower *= factors[0].cdf.lower;
        main_upper = main_upper.mul(factors[0].cdf.upper);
    }
    for factor in &factors {
        let size = factor.size as i32;
        let exponent = (factor.size - usize::from(factor.index == 1)) as i32;
        if factor.in_branch_set {
            main_point *= factor.tail.point.powi(size);
            main_lower *= factor.tail.lower.powi(size);
            main_upper = main_upper.mul(factor.tail.upper.powi(size));
        } else {
            let fact = factorial_f64(factor.size);
            main_point *= factor.tail.point.powi(size) / (fact * factor.cdf.point.powi(exponent));
            main_lower *= factor.tail.lower.powi(size) / (fact * factor.cdf.upper.powi(exponent));
            main_upper = main_upper
                .mul(factor.tail.upper.powi(size))
                .div(fact * factor.cdf.lower.powi(exponent));
        }
    }
    let main_term = RhsInterval {
        point: main_point,
        lower: main_lower,
        upper: main_upper,
    };

    let rhs_of = |tail: &Estimate| RhsInterval {
        point: main_point + tail.point,
        lower: main_lower + tail.lower,
        upper: main_upper.add(tail.upper),
    };
    let rhs_max = rhs_of(&step_tail);
    let rhs_order = rhs_of(&window_tail);

    let verdict_max = verdict_for(&lhs, &rhs_max);
    let verdict_order = verdict_for(&lhs, &rhs_order);
    let verdict = combine_verdicts(verdict_max, verdict_order);

    Ok(McReport {
        generator: GENERATOR.to_string(),
        keying: KEYING.to_string(),
        n_samples,
        seed,
        level,
        params: p.clone(),
        zeta: p.zeta(),
        lhs,
        factors,
        step_tail,
        window_tail,
        main_term,
        rhs_max,
        rhs_order,
        verdict_max,
        verdict_order,
        verdict,
    })
}

fn factorial_f64(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product::<f64>().max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bound::lt_params;
    use crate::scalar::Scalar;

    fn walk(n: usize) -> McScenario {
        let sg = SemigroupInstance::new(SemigroupFamily::IntLine).unwrap();
        let step =
            FiniteDistribution::uniform(vec![sg.int(1).unwrap(), sg.int(-1).unwrap()]).unwrap();
        let z = sg.int(0).unwrap();
        McScenario::from_exact(
            &Scenario::new(sg, vec![step; n], z.clone(), z).unwrap(),
        )
    }

    fn gaussian_plane(n: usize) -> McScenario {
        let sg = SemigroupInstance::new(SemigroupFamily::Euclidean { dim: 2 }).unwrap();
        let z = sg.vector(vec![0.0, 0.0]).unwrap();
        let law = SamplableLaw::Gaussian {
            mean: vec![0.0, 0.0],
            scale: 1.0,
        };
        McScenario::new(sg, vec![law; n], z.clone(), z).unwrap()
    }

    fn params(sizes: &[usize], thresholds: &[i64], s: i64) -> BoundParams {
        BoundParams::new(
            sizes.to_vec(),
            thresholds.iter().map(|&t| Scalar::from_int(t)).collect(),
            Scalar::from_int(s),
        )
        .unwrap()
    }

    #[test]
    fn wilson_intervals_behave_at_the_boundary() {
        let z = confidence_z(0.99).unwrap();
        let (lo0, up0) = wilson_interval(0, 100, z);
        assert_eq!(lo0, 0.0);
        assert!(up0 > 0.0 && up0 < 0.2);
        let (lon, upn) = wilson_interval(100, 100, z);
        assert_eq!(upn, 1.0);
        assert!(lon < 1.0 && lon > 0.8);
        let (lo, up) = wilson_interval(50, 100, z);
        assert!(lo < 0.5 && 0.5 < up);
        // Mirror symmetry.
        let (mlo, mup) = wilson_interval(30, 100, z);
        let (clo, cup) = wilson_interval(70, 100, z);
        assert!((mlo - (1.0 - cup)).abs() < 1e-12);
        assert!((mup - (1.0 - clo)).abs() < 1e-12);
    }

    #[test]
    fn confidence_levels_are_validated_and_ordered() {
        assert!(matches!(confidence_z(0.0), Err(McError::InvalidLevel(_))));
        assert!(matches!(confidence_z(1.0), Err(McError::InvalidLevel(_))));
        assert!(matches!(confidence_z(-0.5), Err(McError::InvalidLevel(_))));
        let z99 = confidence_z(0.99).unwrap();
        let z90 = confidence_z(0.90).unwrap();
        assert!(z99 > z90);
        assert!((z99 - 2.575829303548901).abs() < 1e-9);
    }

    #[test]
    fn verdicts_follow_the_interval_comparisons() {
        let est = |lower: f64, upper: f64| Estimate {
            successes: 0,
            samples: 1,
            point: (lower + upper) / 2.0,
            lower,
            upper,
        };
        let rhs = |lower: f64, upper: f64| RhsInterval {
            point: (lower + upper) / 2.0,
            lower,
            upper: RealBound::Finite(upper),
        };
        assert_eq!(
            verdict_for(&est(0.10, 0.12), &rhs(0.30, 0.34)),
            McVerdict::HoldsWithMargin
        );
        assert_eq!(
            verdict_for(&est(0.10, 0.31), &rhs(0.30, 0.34)),
            McVerdict::Inconclusive
        );
        assert_eq!(
            verdict_for(&est(0.40, 0.44), &rhs(0.30, 0.34)),
            McVerdict::ViolatesWithMargin
        );
        // An infinite upper end can never be violated.
        let inf = RhsInterval {
            point: 1.0,
            lower: 0.9,
            upper: RealBound::Infinite,
        };
        assert_eq!(verdict_for(&est(0.95, 0.99), &inf), McVerdict::Inconclusive);
    }

    #[test]
    fn two_step_walk_estimates_cover_the_exact_values() {
        // P(U > 1) = 1/2 on two fair steps.
        let sc = walk(2);
        let p = params(&[1], &[1], 1);
        let report = mc_estimate(&sc, &p, 100_000, 1, 0.99, 1).unwrap();
        assert!(report.factors[0].tail.contains(0.5));
        assert!((report.factors[0].tail.point - 0.5).abs() < 0.02);
        assert_eq!(report.generator, GENERATOR);
        assert_eq!(report.keying, KEYING);
        assert_ne!(report.verdict, McVerdict::ViolatesWithMargin);
    }

    #[test]
    fn degenerate_point_law_pins_estimates_to_zero_or_one() {
        let sg = SemigroupInstance::new(SemigroupFamily::IntLine).unwrap();
        let still = FiniteDistribution::uniform(vec![sg.int(1).unwrap()]).unwrap();
        let z = sg.int(0).unwrap();
        let sc = McScenario::from_exact(
            &Scenario::new(sg, vec![still.clone(), still], z.clone(), z).unwrap(),
        );
        let p = params(&[1], &[1], 1);
        let report = mc_estimate(&sc, &p, 200, 9, 0.99, 1).unwrap();
        // U = 2 > 1 deterministically; every step has size 1.
        assert_eq!(report.lhs.point, 1.0);
        assert_eq!(report.factors[0].tail.point, 1.0);
        assert_eq!(report.factors[0].cdf.point, 0.0);
        assert_eq!(report.step_tail.point, 0.0);
        assert!(report.lhs.lower < 1.0);
        assert!(report.factors[0].cdf.upper > 0.0);
    }

    #[test]
    fn reports_are_bit_identical_across_worker_counts_and_reruns() {
        let sc = gaussian_plane(3);
        let p = lt_params(Scalar::from_int(2), Scalar::from_int(3)).unwrap();
        let a = crate::report::to_json_pretty(&mc_estimate(&sc, &p, 2_000, 42, 0.99, 1).unwrap());
        let b = crate::report::to_json_pretty(&mc_estimate(&sc, &p, 2_000, 42, 0.99, 3).unwrap());
        let c = crate::report::to_json_pretty(&mc_estimate(&sc, &p, 2_000, 42, 0.99, 1).unwrap());
        assert_eq!(a, b);
        assert_eq!(a, c);
        let other = crate::report::to_json_pretty(&mc_estimate(&sc, &p, 2_000, 43, 0.99, 1).unwrap());
        assert_ne!(a, other);
    }

    #[test]
    fn gaussian_steps_give_a_sane_verdict() {
        let sc = gaussian_plane(10);
        let p = lt_params(Scalar::from_int(2), Scalar::from_int(3)).unwrap();
        let report = mc_estimate(&sc, &p, 20_000, 7, 0.99, 1).unwrap();
        assert_ne!(report.verdict, McVerdict::ViolatesWithMargin);
        assert_eq!(mc_verdict(&report), report.verdict);
    }

    #[test]
    fn inputs_are_validated() {
        let sc = walk(2);
        let p = params(&[1], &[1], 1);
        assert!(matches!(
            mc_estimate(&sc, &p, 50, 1, 0.99, 1),
            Err(McError::TooFewSamples(50))
        ));
        assert!(matches!(
            mc_estimate(&sc, &p, 1_000, 1, 1.5, 1),
            Err(McError::InvalidLevel(_))
        ));
        let too_big = params(&[4], &[1], 1);
        assert!(matches!(
            mc_estimate(&sc, &too_big, 1_000, 1, 0.99, 1),
            Err(McError::Engine(EngineError::HypothesisViolated { .. }))
        ));

        let sg = SemigroupInstance::new(SemigroupFamily::IntLine).unwrap();
        let z = sg.int(0).unwrap();
        let gauss = SamplableLaw::Gaussian {
            mean: vec![0.0],
            scale: 1.0,
        };
        assert!(matches!(
            McScenario::new(sg, vec![gauss], z.clone(), z),
            Err(McError::LawMismatch(_))
        ));

        let circle = SemigroupInstance::new(SemigroupFamily::Circle).unwrap();
        let origin = circle.angle(0.0).unwrap();
        assert!(matches!(
            McScenario::new(
                circle.clone(),
                vec![SamplableLaw::Arc { half_width: 0.0 }],
                origin.clone(),
                origin
            ),
            Err(McError::InvalidLaw(_))
        ));
    }

    #[test]
    fn arc_steps_stay_on_the_circle() {
        let circle = SemigroupInstance::new(SemigroupFamily::Circle).unwrap();
        let origin = circle.angle(0.0).unwrap();
        let sc = McScenario::new(
            circle,
            vec![SamplableLaw::Arc { half_width: 0.5 }; 4],
            origin.clone(),
            origin,
        )
        .unwrap();
        let p = BoundParams::new(
            vec![1],
            vec![Scalar::real(1.0)],
            Scalar::real(0.6),
        )
        .unwrap();
        let report = mc_estimate(&sc, &p, 5_000, 3, 0.95, 1).unwrap();
        // Each arc step has size < 0.6, so the step tail is empty.
        assert_eq!(report.step_tail.point, 0.0);
        assert_ne!(report.verdict, McVerdict::ViolatesWithMargin);
    }
}
