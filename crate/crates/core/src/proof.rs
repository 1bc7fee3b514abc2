//! Replays, on a concrete finite scenario, the decomposition argument that
//! proves the tail bound: stopping profiles, first-passage probabilities,
//! per-block product bounds, and the assembled chain of inequalities. All
//! quantities are exact rationals; every inequality in the chain is checked
//! by computing both sides independently.
//!
//! Notation (extending the `bound` module): `W_0 = z0`, `W_j = W_{j-1} X_j`.
//! For a schedule of per-slot thresholds `t'_1..t'_K`, the stopping profile
//! of a path is `m_1 < m_2 < ... ` where `m_1` is the first j with
//! `d(z1, W_j) > t'_1` and `m_l` is the first `j > m_{l-1}` with
//! `d(W_{m_{l-1}}, W_j) > 2 t'_l`. The profile is complete when all K slots
//! fill. The replay requires `d(z1, z0) <= t_1`: beyond that the stopping
//! construction loses the walk (the report flags this and the checks fail
//! honestly rather than being skipped).

use std::collections::BTreeMap;

use num::rational::BigRational;
use num::{One, Zero};
use serde::Serialize;

use crate::bound::{eval_rows, factor_analysis, BoundParams, EngineError};
use crate::prob::{enumerate_outcomes, Outcome, PathStats, Scenario};
use crate::report::{ser_index_map, ser_rat, ser_rat_opt};
use crate::scalar::{factorial, rat_pow, Scalar};

/// One named inequality or identity, with a witness when it fails.
#[derive(Clone, Debug, Serialize)]
pub struct NamedCheck {
    pub name: String,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<String>,
}

impl NamedCheck {
    fn passing(name: &str) -> Self {
        NamedCheck {
            name: name.to_string(),
            passed: true,
            witness: None,
        }
    }

    fn failing(name: &str, witness: String) -> Self {
        NamedCheck {
            name: name.to_string(),
            passed: false,
            witness: Some(witness),
        }
    }

    fn from_condition(name: &str, ok: bool, witness: impl FnOnce() -> String) -> Self {
        if ok {
            Self::passing(name)
        } else {
            Self::failing(name, witness())
        }
    }
}

/// The stopping indices a path fills in, in order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StoppingProfile {
    pub indices: Vec<usize>,
    pub complete: bool,
}

/// Per-path geometry the replay works from.
struct PathRow {
    prob: BigRational,
    /// `d(z1, W_j)`, j = 1..n at index j-1.
    anchored: Vec<Scalar>,
    /// `rel[a][b - a - 1] = d(W_a, W_b)` for 0 <= a < b <= n.
    rel: Vec<Vec<Scalar>>,
    /// `U = max_j anchored`.
    u: Scalar,
    /// Sum of the `depth - 1` largest steps (depth fixed at build time).
    window: Scalar,
}

impl PathRow {
    fn rel(&self, a: usize, b: usize) -> &Scalar {
        &self.rel[a][b - a - 1]
    }
}

struct Ctx {
    n: usize,
    rows: Vec<PathRow>,
}

fn build_ctx(sc: &Scenario, depth: usize) -> Result<Ctx, EngineError> {
    let n = sc.len();
    let sg = &sc.instance;
    let mut rows = Vec::new();
    for outcome in enumerate_outcomes(sc)? {
        let mut products = Vec::with_capacity(n + 1);
        products.push(sc.z0.clone());
        for x in &outcome.values {
            let next = sg.combine(products.last().unwrap(), x).map_err(crate::prob::ProbError::from)?;
            products.push(next);
        }
        let mut anchored = Vec::with_capacity(n);
        let mut u: Option<Scalar> = None;
        for w in &products[1..] {
            let d = sg.distance(&sc.z1, w).map_err(crate::prob::ProbError::from)?;
            u = Some(match u {
                Some(m) if m >= d => m,
                _ => d.clone(),
            });
            anchored.push(d);
        }
        let mut rel = Vec::with_capacity(n);
        for a in 0..n {
            let mut from_a = Vec::with_capacity(n - a);
            for b in a + 1..=n {
                from_a.push(
                    sg.distance(&products[a], &products[b])
                        .map_err(crate::prob::ProbError::from)?,
                );
            }
            rel.push(from_a);
        }
        // Step sizes: d(W_{j-1}, W_j) equals d(z0, z0 X_j) by invariance.
        let mut steps: Vec<Scalar> = (1..=n).map(|j| rel[j - 1][0].clone()).collect();
        steps.sort_by(|a, b| a.total_cmp(b));
        let mut window = steps[0].zero_like();
        for y in &steps[n + 1 - depth..] {
            window = window.add(y);
        }
        rows.push(PathRow {
            prob: outcome.prob,
            anchored,
            rel,
            u: u.expect("n >= 1"),
            window,
        });
    }
    Ok(Ctx { n, rows })
}

fn profile_from_row(row: &PathRow, n: usize, schedule: &[Scalar]) -> StoppingProfile {
    let mut indices = Vec::with_capacity(schedule.len());
    let mut first = None;
    for j in 1..=n {
        if row.anchored[j - 1] > schedule[0] {
            first = Some(j);
            break;
        }
    }
    let Some(mut last) = first else {
        return StoppingProfile {
            indices,
            complete: false,
        };
    };
    indices.push(last);
    for t in &schedule[1..] {
        let doubled = t.mul_nat(2);
        let mut found = None;
        for j in last + 1..=n {
            if *row.rel(last, j) > doubled {
                found = Some(j);
                break;
            }
        }
        match found {
            Some(j) => {
                indices.push(j);
                last = j;
            }
            None => break,
        }
    }
    let complete = indices.len() == schedule.len();
    StoppingProfile { indices, complete }
}

fn require_exact(sc: &Scenario, exact_params: bool) -> Result<(), EngineError> {
    if sc.instance.is_exact() && exact_params {
        Ok(())
    } else {
        Err(EngineError::InexactInput)
    }
}

/// The stopping profile of a single outcome under the slot schedule of `p`.
pub fn stopping_times(
    sc: &Scenario,
    outcome: &Outcome,
    p: &BoundParams,
) -> Result<StoppingProfile, EngineError> {
    p.validate_for(sc.len())?;
    require_exact(sc, p.is_exact())?;
    let n = sc.len();
    let sg = &sc.instance;
    if outcome.values.len() != n {
        return Err(crate::prob::ProbError::OutcomeShape {
            got: outcome.values.len(),
            expected: n,
        }
        .into());
    }

    let schedule = p.schedule();
    let mut products = Vec::with_capacity(n + 1);
    products.push(sc.z0.clone());
    for x in &outcome.values {
        let next = sg
            .combine(products.last().unwrap(), x)
            .map_err(crate::prob::ProbError::from)?;
        products.push(next);
    }

    let mut indices = Vec::with_capacity(schedule.len());
    let mut first = None;
    for (j, w) in products.iter().enumerate().skip(1) {
        if sg.distance(&sc.z1, w).map_err(crate::prob::ProbError::from)? > schedule[0] {
            first = Some(j);
            break;
        }
    }
    let Some(mut last) = first else {
        return Ok(StoppingProfile {
            indices,
            complete: false,
        });
    };
    indices.push(last);
    for t in &schedule[1..] {
        let doubled = t.mul_nat(2);
        let mut found = None;
        for j in last + 1..=n {
            let d = sg
                .distance(&products[last], &products[j])
                .map_err(crate::prob::ProbError::from)?;
            if d > doubled {
                found = Some(j);
                break;
            }
        }
        match found {
            Some(j) => {
                indices.push(j);
                last = j;
            }
            None => break,
        }
    }
    let complete = indices.len() == schedule.len();
    Ok(StoppingProfile { indices, complete })
}

/// Membership in the main event: the walk beats the deadline while the
/// top-window of steps stays within the allowance. Panics if the block total
/// of `p` exceeds n + 1 (callers validate).
pub fn main_event_membership(stats: &PathStats, p: &BoundParams) -> bool {
    let total = p.total_size();
    let allowance = p.increment_bound().mul_nat(total as u64 - 1);
    stats.running_max > p.zeta() && stats.top_sum(total) <= allowance
}

/// `P(first j with d(z1, W_j) > t is exactly `step`)`.
pub fn first_passage_probability(
    sc: &Scenario,
    step: usize,
    t: &Scalar,
) -> Result<BigRational, EngineError> {
    if step < 1 || step > sc.len() {
        return Err(EngineError::InvalidParams(format!(
            "passage step {step} out of 1..={}",
            sc.len()
        )));
    }
    require_exact(sc, t.is_exact())?;
    let ctx = build_ctx(sc, 1)?;
    let table = first_passage_table(&ctx, t);
    Ok(table[step].clone())
}

/// `P(first j > from with d(W_from, W_j) > 2t is exactly `to`)`.
pub fn increment_first_passage(
    sc: &Scenario,
    from: usize,
    to: usize,
    t: &Scalar,
) -> Result<BigRational, EngineError> {
    let n = sc.len();
    if from >= to || to > n {
        return Err(EngineError::InvalidParams(format!(
            "passage pair ({from}, {to}) must satisfy 0 <= from < to <= {n}"
        )));
    }
    if t.is_negative() {
        return Err(EngineError::InvalidParams(
            "passage threshold must be nonnegative".into(),
        ));
    }
    require_exact(sc, t.is_exact())?;
    let ctx = build_ctx(sc, 1)?;
    let table = increment_table(&ctx, t);
    Ok(table[from][to].clone())
}

/// `table[beta] = P(first anchored exceedance of t is at beta)`, beta 1..=n.
fn first_passage_table(ctx: &Ctx, t: &Scalar) -> Vec<BigRational> {
    let mut table = vec![BigRational::zero(); ctx.n + 1];
    for row in &ctx.rows {
        if let Some(j) = (1..=ctx.n).find(|&j| row.anchored[j - 1] > *t) {
            table[j] += &row.prob;
        }
    }
    table
}

/// `table[a][b] = P(first j > a with d(W_a, W_j) > 2t is exactly b)`.
fn increment_table(ctx: &Ctx, t: &Scalar) -> Vec<Vec<BigRational>> {
    let n = ctx.n;
    let doubled = t.mul_nat(2);
    let mut table = vec![vec![BigRational::zero(); n + 1]; n + 1];
    for row in &ctx.rows {
        for a in 0..n {
            if let Some(b) = (a + 1..=n).find(|&b| *row.rel(a, b) > doubled) {
                table[a][b] += &row.prob;
            }
        }
    }
    table
}

/// The three passage-sum facts for a prefix `gamma` and anchor `alpha`:
/// (partition) first-passage probabilities up to `gamma` sum exactly to
/// `P(max_{j<=gamma} d(z1, W_j) > t)`; and for `alpha >= 1`, the anchored
/// exceedance sums are controlled by that same prefix tail, directly and
/// (when `P(U_alpha <= t) > 0`) after conditioning on a quiet prefix.
#[derive(Clone, Debug, Serialize)]
pub struct PassageBounds {
    pub alpha: usize,
    pub gamma: usize,
    pub threshold: Scalar,
    #[serde(serialize_with = "ser_rat")]
    pub anchored_sum: BigRational,
    #[serde(serialize_with = "ser_rat")]
    pub first_passage_sum: BigRational,
    #[serde(serialize_with = "ser_rat")]
    pub prefix_tail: BigRational,
    #[serde(serialize_with = "ser_rat_opt", skip_serializing_if = "Option::is_none")]
    pub quiet_prefix_probability: Option<BigRational>,
    pub checks: Vec<NamedCheck>,
    pub all_passed: bool,
}

/// Verifies the passage-sum facts for one `(alpha, gamma, t)` triple.
pub fn check_passage_bounds(
    sc: &Scenario,
    alpha: usize,
    gamma: usize,
    t: &Scalar,
) -> Result<PassageBounds, EngineError> {
    let n = sc.len();
    if gamma < 1 || gamma > n || alpha >= gamma {
        return Err(EngineError::InvalidParams(format!(
            "need 0 <= alpha < gamma <= {n}, got alpha={alpha}, gamma={gamma}"
        )));
    }
    if t.is_negative() {
        return Err(EngineError::InvalidParams(
            "passage threshold must be nonnegative".into(),
        ));
    }
    require_exact(sc, t.is_exact())?;
    let ctx = build_ctx(sc, 1)?;
    Ok(passage_bounds_in_ctx(&ctx, alpha, gamma, t))
}

fn passage_bounds_in_ctx(ctx: &Ctx, alpha: usize, gamma: usize, t: &Scalar) -> PassageBounds {
    let fp = first_passage_table(ctx, t);
    let inc = increment_table(ctx, t);

    let anchored_sum: BigRational = (alpha + 1..=gamma).map(|b| inc[alpha][b].clone()).sum();
    let first_passage_sum: BigRational = (1..=gamma).map(|b| fp[b].clone()).sum();
    let prefix_tail = prob_where(ctx, |row| (1..=gamma).any(|j| row.anchored[j - 1] > *t));
    let quiet_prefix_probability = if alpha >= 1 {
        Some(prob_where(ctx, |row| {
            (1..=alpha).all(|j| row.anchored[j - 1] <= *t)
        }))
    } else {
        None
    };

    let mut checks = Vec::new();
    checks.push(NamedCheck::from_condition(
        "first-passage-partition",
        first_passage_sum == prefix_tail,
        || {
            format!(
                "sum of first-passage probabilities {} differs from prefix tail {}",
                crate::report::rat_to_string(&first_passage_sum),
                crate::report::rat_to_string(&prefix_tail),
            )
        },
    ));
    if alpha >= 1 {
        checks.push(NamedCheck::from_condition(
            "anchored-sum-bounded",
            anchored_sum <= prefix_tail,
            || {
                format!(
                    "anchored exceedance sum {} exceeds prefix tail {}",
                    crate::report::rat_to_string(&anchored_sum),
                    crate::report::rat_to_string(&prefix_tail),
                )
            },
        ));
        let quiet = quiet_prefix_probability.as_ref().unwrap();
        if !quiet.is_zero() {
            let scaled = &first_passage_sum / quiet;
            checks.push(NamedCheck::from_condition(
                "anchored-sum-conditionally-bounded",
                anchored_sum <= scaled,
                || {
                    format!(
                        "anchored exceedance sum {} exceeds scaled passage sum {}",
                        crate::report::rat_to_string(&anchored_sum),
                        crate::report::rat_to_string(&scaled),
                    )
                },
            ));
        }
    }

    let all_passed = checks.iter().all(|c| c.passed);
    PassageBounds {
        alpha,
        gamma,
        threshold: t.clone(),
        anchored_sum,
        first_passage_sum,
        prefix_tail,
        quiet_prefix_probability,
        checks,
        all_passed,
    }
}

/// Runs [`check_passage_bounds`] over every anchor, every prefix, and every
/// distinct block threshold of `p`.
pub fn passage_bound_battery(
    sc: &Scenario,
    p: &BoundParams,
) -> Result<Vec<PassageBounds>, EngineError> {
    p.validate_for(sc.len())?;
    require_exact(sc, p.is_exact())?;
    let ctx = build_ctx(sc, 1)?;
    let mut distinct: Vec<Scalar> = Vec::new();
    for t in p.thresholds() {
        if !distinct.iter().any(|seen| seen == t) {
            distinct.push(t.clone());
        }
    }
    let mut out = Vec::new();
    for t in &distinct {
        for gamma in 1..=ctx.n {
            for alpha in 0..gamma {
                out.push(passage_bounds_in_ctx(&ctx, alpha, gamma, t));
            }
        }
    }
    Ok(out)
}

fn prob_where(ctx: &Ctx, mut pred: impl FnMut(&PathRow) -> bool) -> BigRational {
    let mut total = BigRational::zero();
    for row in &ctx.rows {
        if pred(row) {
            total += &row.prob;
        }
    }
    total
}

/// `min(1, 1/(size! * cdf^exponent))`, computed without dividing by zero.
fn discount(cdf: &BigRational, size: usize, exponent: usize) -> BigRational {
    let one = BigRational::one();
    let gate = BigRational::from_integer(factorial(size)) * rat_pow(cdf, exponent);
    if gate > one {
        one / gate
    } else {
        one
    }
}

/// `dp[d][last]` = sum over `last < a_1 < ... < a_d <= n` of
/// `prod_j inc[a_{j-1}][a_j]` (with `a_0 = last`).
fn chain_sums(inc: &[Vec<BigRational>], n: usize, depth: usize) -> Vec<Vec<BigRational>> {
    let mut dp = vec![vec![BigRational::zero(); n + 1]; depth + 1];
    for last in 0..=n {
        dp[0][last] = BigRational::one();
    }
    for d in 1..=depth {
        for last in (0..=n).rev() {
            let mut acc = BigRational::zero();
            for next in last + 1..=n {
                if !inc[last][next].is_zero() && !dp[d - 1][next].is_zero() {
                    acc += &inc[last][next] * &dp[d - 1][next];
                }
            }
            dp[d][last] = acc;
        }
    }
    dp
}

fn render_profile(profile: &[usize]) -> String {
    profile
        .iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

/// Full replay report. `blocks` maps each realized complete stopping profile
/// to its probability; `product_bounds` maps every increasing index vector
/// to its first-passage product.
#[derive(Clone, Debug, Serialize)]
pub struct DecompositionReport {
    pub zeta: Scalar,
    #[serde(serialize_with = "ser_rat")]
    pub lhs: BigRational,
    #[serde(serialize_with = "ser_rat")]
    pub main_event_probability: BigRational,
    #[serde(serialize_with = "ser_rat")]
    pub window_tail: BigRational,
    #[serde(serialize_with = "ser_index_map")]
    pub blocks: BTreeMap<Vec<usize>, BigRational>,
    #[serde(serialize_with = "ser_index_map")]
    pub product_bounds: BTreeMap<Vec<usize>, BigRational>,
    #[serde(serialize_with = "ser_rat")]
    pub product_bound_sum: BigRational,
    #[serde(serialize_with = "ser_rat")]
    pub main_term: BigRational,
    /// True when `d(z1, z0) > t_1`; the stopping construction is not valid
    /// there and the failing checks below are expected.
    pub anchor_gap_exceeds_t1: bool,
    pub checks: Vec<NamedCheck>,
    pub all_passed: bool,
}

/// Replays the decomposition on the whole outcome space and checks every
/// step of the chain.
pub fn verify_decomposition(
    sc: &Scenario,
    p: &BoundParams,
) -> Result<DecompositionReport, EngineError> {
    p.validate_for(sc.len())?;
    require_exact(sc, p.is_exact())?;
    let n = sc.len();
    let total = p.total_size();
    let schedule = p.schedule();
    let ctx = build_ctx(sc, total)?;

    let zeta = p.zeta();
    let allowance = p.increment_bound().mul_nat(total as u64 - 1);
    let lhs = prob_where(&ctx, |row| row.u > zeta);
    let window_tail = prob_where(&ctx, |row| row.window > allowance);

    // Main event and realized stopping profiles.
    let mut main_event_probability = BigRational::zero();
    let mut blocks: BTreeMap<Vec<usize>, BigRational> = BTreeMap::new();
    let mut incomplete_witness: Option<String> = None;
    for row in &ctx.rows {
        if row.u > zeta && row.window <= allowance {
            main_event_probability += &row.prob;
            let profile = profile_from_row(row, n, &schedule);
            if profile.complete {
                *blocks.entry(profile.indices).or_insert_with(BigRational::zero) += &row.prob;
            } else if incomplete_witness.is_none() {
                incomplete_witness = Some(format!(
                    "a main-event path stalls at profile ({})",
                    render_profile(&profile.indices)
                ));
            }
        }
    }

    // First-passage tables, one per block threshold.
    let fp = first_passage_table(&ctx, &p.thresholds()[0]);
    let inc_by_block: Vec<Vec<Vec<BigRational>>> = p
        .thresholds()
        .iter()
        .map(|t| increment_table(&ctx, t))
        .collect();
    let slot_block: Vec<usize> = p
        .sizes()
        .iter()
        .enumerate()
        .flat_map(|(i, &size)| std::iter::repeat(i).take(size))
        .collect();

    // Product bound for every increasing index vector of length K.
    let mut product_bounds: BTreeMap<Vec<usize>, BigRational> = BTreeMap::new();
    let mut product_bound_sum = BigRational::zero();
    let mut vector = Vec::with_capacity(total);
    build_product_bounds(
        &fp,
        &inc_by_block,
        &slot_block,
        n,
        total,
        &mut vector,
        &BigRational::one(),
        &mut product_bounds,
        &mut product_bound_sum,
    );

    // Per-block analytic factors (tails, cdfs, product term) for the chain.
    let rows = eval_rows(sc, total)?;
    let analysis = factor_analysis(&rows, p)?;
    let main_term = analysis.main.clone();

    let mut checks = Vec::new();

    checks.push(match &incomplete_witness {
        None => NamedCheck::passing("stopping-profiles-complete"),
        Some(w) => NamedCheck::failing("stopping-profiles-complete", w.clone()),
    });

    let block_sum: BigRational = blocks.values().cloned().sum();
    checks.push(NamedCheck::from_condition(
        "blocks-partition-main-event",
        block_sum == main_event_probability,
        || {
            format!(
                "profile masses sum to {}, main event has {}",
                crate::report::rat_to_string(&block_sum),
                crate::report::rat_to_string(&main_event_probability),
            )
        },
    ));

    let mut product_witness = None;
    for (profile, mass) in &blocks {
        let bound = product_bounds
            .get(profile)
            .cloned()
            .unwrap_or_else(BigRational::zero);
        if *mass > bound {
            product_witness = Some(format!(
                "profile ({}) has mass {} above its product bound {}",
                render_profile(profile),
                crate::report::rat_to_string(mass),
                crate::report::rat_to_string(&bound),
            ));
            break;
        }
    }
    checks.push(match product_witness {
        None => NamedCheck::passing("block-mass-within-product-bound"),
        Some(w) => NamedCheck::failing("block-mass-within-product-bound", w),
    });

    let split_rhs = &window_tail + &product_bound_sum;
    checks.push(NamedCheck::from_condition(
        "tail-split-chain",
        lhs <= split_rhs,
        || {
            format!(
                "deadline tail {} exceeds window tail + product sum {}",
                crate::report::rat_to_string(&lhs),
                crate::report::rat_to_string(&split_rhs),
            )
        },
    ));

    // Anchored block sums against their analytic bounds, for every anchor
    // the profile structure allows.
    let offsets = p.offsets();
    let mut anchored_witness = None;
    'blocks: for i in 0..p.block_count() {
        let size = p.sizes()[i];
        let tail_pow = rat_pow(&analysis.tails[i], size);
        if i == 0 {
            let bound = &tail_pow * discount(&analysis.cdfs[0], size, size - 1);
            let dp = chain_sums(&inc_by_block[0], n, size - 1);
            let mut total_sum = BigRational::zero();
            for start in 1..=n {
                if !fp[start].is_zero() {
                    total_sum += &fp[start] * &dp[size - 1][start];
                }
            }
            if total_sum > bound {
                anchored_witness = Some(format!(
                    "leading block sum {} exceeds its bound {}",
                    crate::report::rat_to_string(&total_sum),
                    crate::report::rat_to_string(&bound),
                ));
            }
        } else {
            let bound = &tail_pow * discount(&analysis.cdfs[i], size, size);
            let dp = chain_sums(&inc_by_block[i], n, size);
            let lo = offsets[i];
            if n < size {
                continue;
            }
            for anchor in lo..=n - size {
                if dp[size][anchor] > bound {
                    anchored_witness = Some(format!(
                        "block {} anchored at {} sums to {} above its bound {}",
                        i + 1,
                        anchor,
                        crate::report::rat_to_string(&dp[size][anchor]),
                        crate::report::rat_to_string(&bound),
                    ));
                    break 'blocks;
                }
            }
        }
        if anchored_witness.is_some() {
            break;
        }
    }
    checks.push(match anchored_witness {
        None => NamedCheck::passing("anchored-block-sums-bounded"),
        Some(w) => NamedCheck::failing("anchored-block-sums-bounded", w),
    });

    checks.push(NamedCheck::from_condition(
        "product-sum-within-main-term",
        product_bound_sum <= main_term,
        || {
            format!(
                "product bound sum {} exceeds the analytic product term {}",
                crate::report::rat_to_string(&product_bound_sum),
                crate::report::rat_to_string(&main_term),
            )
        },
    ));

    let anchor_gap = sc
        .instance
        .distance(&sc.z1, &sc.z0)
        .map_err(crate::prob::ProbError::from)?;
    let anchor_gap_exceeds_t1 = anchor_gap > p.thresholds()[0];

    let all_passed = checks.iter().all(|c| c.passed);
    Ok(DecompositionReport {
        zeta,
        lhs,
        main_event_probability,
        window_tail,
        blocks,
        product_bounds,
        product_bound_sum,
        main_term,
        anchor_gap_exceeds_t1,
        checks,
        all_passed,
    })
}

#[allow(clippy::too_many_arguments)]
fn build_product_bounds(
    fp: &[BigRational],
    inc_by_block: &[Vec<Vec<BigRational>>],
    slot_block: &[usize],
    n: usize,
    total: usize,
    vector: &mut Vec<usize>,
    partial: &BigRational,
    out: &mut BTreeMap<Vec<usize>, BigRational>,
    sum: &mut BigRational,
) {
    let slot = vector.len();
    if slot == total {
        out.insert(vector.clone(), partial.clone());
        *sum += partial;
        return;
    }
    let start = vector.last().map(|&m| m + 1).unwrap_or(1);
    // Leave room for the remaining slots.
    let room = total - slot - 1;
    for m in start..=n.saturating_sub(room) {
        let factor = if slot == 0 {
            fp[m].clone()
        } else {
            inc_by_block[slot_block[slot]][vector[slot - 1]][m].clone()
        };
        let next = partial * &factor;
        vector.push(m);
        build_product_bounds(
            fp,
            inc_by_block,
            slot_block,
            n,
            total,
            vector,
            &next,
            out,
            sum,
        );
        vector.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bound::{evaluate, TailVariant};
    use crate::prob::{path_statistics, FiniteDistribution};
    use crate::semigroup::{SemigroupFamily, SemigroupInstance};
    use num::bigint::BigInt;

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn walk(n: usize) -> Scenario {
        let sg = SemigroupInstance::new(SemigroupFamily::IntLine).unwrap();
        let step =
            FiniteDistribution::uniform(vec![sg.int(1).unwrap(), sg.int(-1).unwrap()]).unwrap();
        let z = sg.int(0).unwrap();
        Scenario::new(sg, vec![step; n], z.clone(), z).unwrap()
    }

    fn params(sizes: &[usize], thresholds: &[i64], s: i64) -> BoundParams {
        BoundParams::new(
            sizes.to_vec(),
            thresholds.iter().map(|&t| Scalar::from_int(t)).collect(),
            Scalar::from_int(s),
        )
        .unwrap()
    }

    fn all_plus(sc: &Scenario) -> Outcome {
        enumerate_outcomes(sc).unwrap().next().unwrap()
    }

    #[test]
    fn first_passage_probabilities_on_the_three_step_walk() {
        let sc = walk(3);
        let t = Scalar::from_int(1);
        assert_eq!(first_passage_probability(&sc, 1, &t).unwrap(), rat(0, 1));
        assert_eq!(first_passage_probability(&sc, 2, &t).unwrap(), rat(1, 2));
        assert_eq!(first_passage_probability(&sc, 3, &t).unwrap(), rat(0, 1));
        assert!(first_passage_probability(&sc, 0, &t).is_err());
        assert!(first_passage_probability(&sc, 4, &t).is_err());
    }

    #[test]
    fn increment_first_passage_probabilities() {
        let sc = walk(3);
        assert_eq!(
            increment_first_passage(&sc, 1, 3, &Scalar::from_ratio(1, 2)).unwrap(),
            rat(1, 2)
        );
        assert_eq!(
            increment_first_passage(&sc, 1, 2, &Scalar::from_int(0)).unwrap(),
            rat(1, 1)
        );
        assert_eq!(
            increment_first_passage(&sc, 2, 3, &Scalar::from_int(1)).unwrap(),
            rat(0, 1)
        );
        assert!(increment_first_passage(&sc, 2, 2, &Scalar::from_int(1)).is_err());
        assert!(increment_first_passage(&sc, 1, 4, &Scalar::from_int(1)).is_err());
    }

    #[test]
    fn stopping_profile_stalls_when_no_late_jump_exists() {
        let sc = walk(3);
        let p = params(&[2], &[1], 1);
        let profile = stopping_times(&sc, &all_plus(&sc), &p).unwrap();
        assert_eq!(profile.indices, vec![2]);
        assert!(!profile.complete);
    }

    #[test]
    fn stopping_profile_completes_at_zero_thresholds() {
        let sc = walk(3);
        let p = params(&[2], &[0], 2);
        let profile = stopping_times(&sc, &all_plus(&sc), &p).unwrap();
        assert_eq!(profile.indices, vec![1, 2]);
        assert!(profile.complete);
    }

    #[test]
    fn main_event_membership_matches_the_definition() {
        let sc = walk(3);
        let p = params(&[2], &[0], 2);
        let mut members = 0;
        for outcome in enumerate_outcomes(&sc).unwrap() {
            let stats = path_statistics(&sc, &outcome, 2).unwrap();
            if main_event_membership(&stats, &p) {
                members += 1;
                assert!(stats.running_max > Scalar::from_int(2));
            }
        }
        assert_eq!(members, 2);
    }

    #[test]
    fn passage_bounds_on_the_three_step_walk() {
        let sc = walk(3);
        let t = Scalar::from_int(1);

        let anchored = check_passage_bounds(&sc, 1, 3, &t).unwrap();
        assert!(anchored.all_passed, "{anchored:?}");
        assert_eq!(anchored.anchored_sum, rat(0, 1));
        assert_eq!(anchored.prefix_tail, rat(1, 2));
        assert_eq!(anchored.first_passage_sum, rat(1, 2));

        let from_origin = check_passage_bounds(&sc, 0, 3, &t).unwrap();
        assert!(from_origin.all_passed);
        assert_eq!(from_origin.first_passage_sum, rat(1, 2));
        assert_eq!(from_origin.quiet_prefix_probability, None);
        assert_eq!(from_origin.checks.len(), 1);

        for gamma in 1..=3 {
            for alpha in 0..gamma {
                let pb = check_passage_bounds(&sc, alpha, gamma, &t).unwrap();
                assert!(pb.all_passed, "alpha={alpha} gamma={gamma}: {pb:?}");
            }
        }
    }

    #[test]
    fn decomposition_replay_on_the_three_step_walk() {
        let sc = walk(3);
        let p = params(&[2], &[0], 2);
        let report = verify_decomposition(&sc, &p).unwrap();
        assert!(report.all_passed, "{report:?}");
        assert!(!report.anchor_gap_exceeds_t1);
        assert_eq!(report.zeta, Scalar::from_int(2));
        assert_eq!(report.lhs, rat(1, 4));
        assert_eq!(report.main_event_probability, rat(1, 4));
        assert_eq!(report.window_tail, rat(0, 1));
        assert_eq!(report.blocks.len(), 1);
        assert_eq!(report.blocks.get(&vec![1, 2]).unwrap(), &rat(1, 4));
        assert_eq!(report.product_bounds.get(&vec![1, 2]).unwrap(), &rat(1, 1));
        assert_eq!(report.product_bounds.get(&vec![1, 3]).unwrap(), &rat(0, 1));
        assert_eq!(report.product_bounds.get(&vec![2, 3]).unwrap(), &rat(0, 1));
        assert_eq!(report.product_bound_sum, rat(1, 1));
        assert_eq!(report.main_term, rat(1, 1));
    }

    #[test]
    fn decomposition_replay_on_the_tight_two_step_case() {
        let sc = walk(2);
        let p = params(&[1], &[1], 1);
        let report = verify_decomposition(&sc, &p).unwrap();
        assert!(report.all_passed, "{report:?}");
        assert_eq!(report.zeta, Scalar::from_int(1));
        assert_eq!(report.lhs, rat(1, 2));
        assert_eq!(report.main_event_probability, rat(1, 2));
        assert_eq!(report.blocks.get(&vec![2]).unwrap(), &rat(1, 2));
        assert_eq!(report.product_bounds.get(&vec![2]).unwrap(), &rat(1, 2));
        assert_eq!(report.product_bound_sum, rat(1, 2));
        assert_eq!(report.main_term, rat(1, 2));
    }

    #[test]
    fn far_anchor_is_flagged_and_fails_honestly() {
        // Point-mass steps, target far from the start: the walk never moves,
        // every path is in the main event, and no stopping profile completes.
        let sg = SemigroupInstance::new(SemigroupFamily::IntLine).unwrap();
        let still = FiniteDistribution::uniform(vec![sg.int(0).unwrap()]).unwrap();
        let sc = Scenario::new(
            sg.clone(),
            vec![still.clone(), still],
            sg.int(0).unwrap(),
            sg.int(100).unwrap(),
        )
        .unwrap();
        let p = params(&[3], &[1], 1);
        let report = verify_decomposition(&sc, &p).unwrap();
        assert!(report.anchor_gap_exceeds_t1);
        assert!(!report.all_passed);
        let failed: Vec<&str> = report
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect();
        assert!(failed.contains(&"stopping-profiles-complete"));
        assert!(failed.contains(&"tail-split-chain"));

        // The bound itself is indifferent to the anchor gap.
        let eval = evaluate(&sc, &p, TailVariant::MaxIncrement).unwrap();
        assert!(eval.holds);
        assert_eq!(eval.lhs, rat(1, 1));
        assert_eq!(eval.rhs, rat(1, 1));
    }

    #[test]
    fn battery_covers_all_anchors_and_prefixes() {
        let sc = walk(3);
        let p = params(&[2, 1], &[1, 0], 1);
        let battery = passage_bound_battery(&sc, &p).unwrap();
        // Two distinct thresholds, prefixes 1..=3, anchors 0..gamma.
        assert_eq!(battery.len(), 2 * (1 + 2 + 3));
        assert!(battery.iter().all(|pb| pb.all_passed));
    }

    #[test]
    fn reports_serialize_deterministically() {
        let sc = walk(3);
        let p = params(&[2], &[0], 2);
        let a = crate::report::to_json_pretty(&verify_decomposition(&sc, &p).unwrap());
        let b = crate::report::to_json_pretty(&verify_decomposition(&sc, &p).unwrap());
        assert_eq!(a, b);
        assert!(a.contains("\"1,2\""));
    }
}
