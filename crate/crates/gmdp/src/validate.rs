//! Statistical and exact verification of refinement guarantees.
//!
//! Monte-Carlo safety estimation with Wilson intervals and per-trial
//! relation-exit statistics; exact path enumeration and output-word
//! distributions for finite models (the oracle for the refinement theorems);
//! and the two-sided probability sandwich check.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::coupling::min_delta_lifting;
use crate::error::{GmdpError, Result};
use crate::linalg::Col;
use crate::model::{
    execute_with_rng, FiniteGmdp, MarkovPolicy, ModelRef, Output, Strategy,
};
use crate::rng::SeedStream;
use crate::safety::OutputBox;

/// Exit bookkeeping aggregated over trials.
#[derive(Debug, Clone, Default)]
pub struct ExitStats {
    pub total_exits: usize,
    pub trials_with_exit: usize,
    /// Histogram of first-exit times (index = time step).
    pub first_exit_histogram: Vec<usize>,
    /// Histogram of per-trial exit counts.
    pub exit_count_histogram: Vec<usize>,
}

/// Monte-Carlo estimate with a Wilson 95% interval.
#[derive(Debug, Clone)]
pub struct McReport {
    pub trials: usize,
    pub successes: usize,
    pub estimate: f64,
    pub wilson: (f64, f64),
    pub exits: Option<ExitStats>,
    pub seed: u64,
}

impl McReport {
    pub fn std_error(&self) -> f64 {
        (self.estimate * (1.0 - self.estimate) / self.trials as f64).sqrt()
    }
}

/// Wilson score interval at confidence `z` standard normal quantiles.
pub fn wilson_interval(successes: usize, trials: usize, z: f64) -> (f64, f64) {
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = p + z2 / (2.0 * n);
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    (((center - half) / denom).max(0.0), ((center + half) / denom).min(1.0))
}

fn trace_outputs_in_box(outputs: &[Output], safe: &OutputBox) -> Result<bool> {
    for y in outputs {
        match y {
            Output::Point(v) => {
                if !safe.contains(v) {
                    return Ok(false);
                }
            }
            Output::Label(_) => {
                return Err(GmdpError::InvalidArgument(
                    "safety boxes apply to numeric outputs".into(),
                ))
            }
        }
    }
    Ok(true)
}

/// Fraction of trials whose outputs stay in `safe_box` for all `t ∈ [0, N]`.
/// Deterministic for fixed seed; trials run on independent streams and
/// parallelize without changing the result.
pub fn monte_carlo_safety(
    model: ModelRef<'_>,
    strategy: &dyn Strategy,
    safe_box: &OutputBox,
    horizon: usize,
    trials: usize,
    seed: u64,
) -> Result<McReport> {
    if trials == 0 {
        return Err(GmdpError::InvalidArgument("trials must be ≥ 1".into()));
    }
    let seeds = SeedStream::new(seed);
    let per_trial: Vec<(bool, Option<(usize, Option<usize>)>)> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = seeds.stream(trial as u64);
            let mut s = strategy.box_clone();
            let tr = execute_with_rng(model, s.as_mut(), horizon, &mut rng)?;
            let safe = trace_outputs_in_box(&tr.outputs, safe_box)?;
            let exits = tr.refinement.as_ref().map(|l| (l.exit_count, l.first_exit));
            Ok::<_, GmdpError>((safe, exits))
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;

    let successes = per_trial.iter().filter(|(s, _)| *s).count();
    let exits = if per_trial.iter().any(|(_, e)| e.is_some()) {
        let mut stats = ExitStats {
            first_exit_histogram: vec![0; horizon + 1],
            ..Default::default()
        };
        for (_, e) in &per_trial {
            if let Some((count, first)) = e {
                stats.total_exits += count;
                if *count > 0 {
                    stats.trials_with_exit += 1;
                }
                if stats.exit_count_histogram.len() <= *count {
                    stats.exit_count_histogram.resize(count + 1, 0);
                }
                stats.exit_count_histogram[*count] += 1;
                if let Some(t) = first {
                    stats.first_exit_histogram[(*t).min(horizon)] += 1;
                }
            }
        }
        Some(stats)
    } else {
        None
    };
    Ok(McReport {
        trials,
        successes,
        estimate: successes as f64 / trials as f64,
        wilson: wilson_interval(successes, trials, 1.959963984540054),
        exits,
        seed,
    })
}

/// Paired Monte-Carlo run of two controlled models on common random
/// numbers: trial `i` drives both executions with identical streams.
#[derive(Debug, Clone)]
pub struct PairedReport {
    pub first: McReport,
    pub second: McReport,
    pub both_safe: usize,
    pub first_only: usize,
    pub second_only: usize,
}

#[allow(clippy::too_many_arguments)]
pub fn monte_carlo_safety_paired(
    model_a: ModelRef<'_>,
    strategy_a: &dyn Strategy,
    safe_a: &OutputBox,
    model_b: ModelRef<'_>,
    strategy_b: &dyn Strategy,
    safe_b: &OutputBox,
    horizon: usize,
    trials: usize,
    seed: u64,
) -> Result<PairedReport> {
    if trials == 0 {
        return Err(GmdpError::InvalidArgument("trials must be ≥ 1".into()));
    }
    let seeds = SeedStream::new(seed);
    let rows: Vec<(bool, bool, Option<(usize, Option<usize>)>)> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            // identical streams drive both executions
            let mut rng_a = seeds.stream(trial as u64);
            let mut rng_b = seeds.stream(trial as u64);
            let mut sa = strategy_a.box_clone();
            let mut sb = strategy_b.box_clone();
            let tr_a = execute_with_rng(model_a, sa.as_mut(), horizon, &mut rng_a)?;
            let tr_b = execute_with_rng(model_b, sb.as_mut(), horizon, &mut rng_b)?;
            let ok_a = trace_outputs_in_box(&tr_a.outputs, safe_a)?;
            let ok_b = trace_outputs_in_box(&tr_b.outputs, safe_b)?;
            let exits = tr_b.refinement.as_ref().map(|l| (l.exit_count, l.first_exit));
            Ok::<_, GmdpError>((ok_a, ok_b, exits))
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;

    let make_report = |successes: usize, exits: Option<ExitStats>| McReport {
        trials,
        successes,
        estimate: successes as f64 / trials as f64,
        wilson: wilson_interval(successes, trials, 1.959963984540054),
        exits,
        seed,
    };
    let sa = rows.iter().filter(|(a, _, _)| *a).count();
    let sb = rows.iter().filter(|(_, b, _)| *b).count();
    let mut stats = ExitStats { first_exit_histogram: vec![0; horizon + 1], ..Default::default() };
    let mut any_exits = false;
    for (_, _, e) in &rows {
        if let Some((count, first)) = e {
            any_exits = true;
            stats.total_exits += count;
            if *count > 0 {
                stats.trials_with_exit += 1;
            }
            if stats.exit_count_histogram.len() <= *count {
                stats.exit_count_histogram.resize(count + 1, 0);
            }
            stats.exit_count_histogram[*count] += 1;
            if let Some(t) = first {
                stats.first_exit_histogram[(*t).min(horizon)] += 1;
            }
        }
    }
    Ok(PairedReport {
        first: make_report(sa, None),
        second: make_report(sb, if any_exits { Some(stats) } else { None }),
        both_safe: rows.iter().filter(|(a, b, _)| *a && *b).count(),
        first_only: rows.iter().filter(|(a, b, _)| *a && !*b).count(),
        second_only: rows.iter().filter(|(a, b, _)| !*a && *b).count(),
    })
}

/// Exact probability that the output-label word of a controlled finite model
/// lies in `event`, by path enumeration with compensated accumulation.
pub fn enumerate_event_prob(
    model: &FiniteGmdp,
    policy: &MarkovPolicy,
    event: &dyn Fn(&[usize]) -> bool,
    horizon: usize,
) -> Result<f64> {
    let n = model.n_states();
    let paths = (n as f64).powi(horizon as i32 + 1);
    if paths > 1e7 {
        return Err(GmdpError::ExplosionGuard(format!(
            "{n} states over horizon {horizon} gives {paths:.1e} paths"
        )));
    }
    let labels = label_ids(model)?;

    // Kahan-compensated accumulator
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    let mut add = |v: f64| {
        let y = v - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    };

    let mut word = vec![0usize; horizon + 1];
    // depth-first over state paths, mixing over stochastic policy choices
    struct Frame {
        state: usize,
        prob: f64,
    }
    fn dfs(
        model: &FiniteGmdp,
        policy: &MarkovPolicy,
        labels: &[usize],
        event: &dyn Fn(&[usize]) -> bool,
        horizon: usize,
        t: usize,
        frame: Frame,
        word: &mut Vec<usize>,
        add: &mut dyn FnMut(f64),
    ) {
        word[t] = labels[frame.state];
        if t == horizon {
            if event(word) {
                add(frame.prob);
            }
            return;
        }
        let dist = policy.dist(t, frame.state);
        for (u, &pu) in dist.iter().enumerate() {
            if pu <= 0.0 {
                continue;
            }
            for next in 0..model.n_states() {
                let p = model.kernel[u][(frame.state, next)];
                if p <= 0.0 {
                    continue;
                }
                dfs(
                    model,
                    policy,
                    labels,
                    event,
                    horizon,
                    t + 1,
                    Frame { state: next, prob: frame.prob * pu * p },
                    word,
                    add,
                );
            }
        }
    }
    for x0 in 0..n {
        if model.init[x0] <= 0.0 {
            continue;
        }
        dfs(
            model,
            policy,
            &labels,
            event,
            horizon,
            0,
            Frame { state: x0, prob: model.init[x0] },
            &mut word,
            &mut add,
        );
    }
    Ok(sum)
}

fn label_ids(model: &FiniteGmdp) -> Result<Vec<usize>> {
    model
        .outputs
        .iter()
        .map(|o| match o {
            Output::Label(l) => Ok(*l),
            Output::Point(_) => Err(GmdpError::InvalidArgument(
                "exact enumeration needs labelled outputs".into(),
            )),
        })
        .collect()
}

pub type Word = Vec<usize>;

/// Exact distribution over output-label words of a controlled finite model.
pub fn word_distribution(
    model: &FiniteGmdp,
    policy: &MarkovPolicy,
    horizon: usize,
) -> Result<HashMap<Word, f64>> {
    let labels = label_ids(model)?;
    let n = model.n_states();
    // layer: word prefix → per-state mass
    let mut layer: HashMap<Word, Col> = HashMap::new();
    for x in 0..n {
        if model.init[x] > 0.0 {
            layer.entry(vec![labels[x]]).or_insert_with(|| Col::zeros(n))[x] += model.init[x];
        }
    }
    for t in 0..horizon {
        let mut next: HashMap<Word, Col> = HashMap::new();
        for (word, dist) in &layer {
            let mut flow = Col::zeros(n);
            for x in 0..n {
                if dist[x] <= 0.0 {
                    continue;
                }
                let pu = policy.dist(t, x);
                for (u, &w_u) in pu.iter().enumerate() {
                    if w_u <= 0.0 {
                        continue;
                    }
                    for x2 in 0..n {
                        flow[x2] += dist[x] * w_u * model.kernel[u][(x, x2)];
                    }
                }
            }
            for x2 in 0..n {
                if flow[x2] > 0.0 {
                    let mut w2 = word.clone();
                    w2.push(labels[x2]);
                    next.entry(w2).or_insert_with(|| Col::zeros(n))[x2] += flow[x2];
                }
            }
        }
        layer = next;
    }
    Ok(layer.into_iter().map(|(w, d)| (w, d.iter().sum())).collect())
}

/// Recovery behaviour for the exact refined enumeration.
#[derive(Debug, Clone)]
pub enum EnumRecovery {
    HoldAction(usize),
    Markov(Vec<usize>),
}

impl EnumRecovery {
    fn action(&self, x2: usize) -> usize {
        match self {
            EnumRecovery::HoldAction(u) => *u,
            EnumRecovery::Markov(tab) => tab[x2],
        }
    }
}

/// Exact output-word distribution of the refined controller on the concrete
/// model: the joint abstract/concrete chain evolves by the minimal-δ LP
/// coupling of the kernel rows while the pair is related, and falls back to
/// the recovery policy on the concrete model once it exits.
pub fn refined_word_distribution(
    m1: &FiniteGmdp,
    m2: &FiniteGmdp,
    mask: &[Vec<bool>],
    interface_map: &[Vec<Vec<usize>>],
    policy: &MarkovPolicy,
    recovery: &EnumRecovery,
    horizon: usize,
) -> Result<HashMap<Word, f64>> {
    let labels2 = label_ids(m2)?;
    let n1 = m1.n_states();
    let n2 = m2.n_states();
    // joint indices: refine block x1*n2 + x2, recover block n1*n2 + x2
    let dim = n1 * n2 + n2;
    let idx_ref = |x1: usize, x2: usize| x1 * n2 + x2;
    let idx_rec = |x2: usize| n1 * n2 + x2;

    // memoized couplings per (x1, u1, x2, u2)
    let mut couplings: HashMap<(usize, usize, usize, usize), crate::linalg::Mat> = HashMap::new();

    // initial joint mass from the LP coupling of the initial distributions
    let init_coupling = min_delta_lifting(&m1.init, &m2.init, mask)?;
    let mut layer: HashMap<Word, Col> = HashMap::new();
    for x1 in 0..n1 {
        for x2 in 0..n2 {
            let w = init_coupling.w[(x1, x2)];
            if w <= 0.0 {
                continue;
            }
            let entry = layer.entry(vec![labels2[x2]]).or_insert_with(|| Col::zeros(dim));
            if mask[x1][x2] {
                entry[idx_ref(x1, x2)] += w;
            } else {
                entry[idx_rec(x2)] += w;
            }
        }
    }

    for t in 0..horizon {
        let mut next: HashMap<Word, Col> = HashMap::new();
        for (word, dist) in &layer {
            let mut flow = Col::zeros(dim);
            // refine block
            for x1 in 0..n1 {
                for x2 in 0..n2 {
                    let mass = dist[idx_ref(x1, x2)];
                    if mass <= 0.0 {
                        continue;
                    }
                    let pu = policy.dist(t, x1);
                    for (u1, &w_u) in pu.iter().enumerate() {
                        if w_u <= 0.0 {
                            continue;
                        }
                        let u2 = interface_map[u1][x1][x2];
                        let coupling = match couplings.entry((x1, u1, x2, u2)) {
                            std::collections::hash_map::Entry::Occupied(e) => e.into_mut(),
                            std::collections::hash_map::Entry::Vacant(e) => {
                                let row1 = m1.kernel[u1].row(x1).transpose();
                                let row2 = m2.kernel[u2].row(x2).transpose();
                                e.insert(min_delta_lifting(&row1, &row2, mask)?.w)
                            }
                        };
                        for x1n in 0..n1 {
                            for x2n in 0..n2 {
                                let p = coupling[(x1n, x2n)];
                                if p <= 0.0 {
                                    continue;
                                }
                                let target = if mask[x1n][x2n] {
                                    idx_ref(x1n, x2n)
                                } else {
                                    idx_rec(x2n)
                                };
                                flow[target] += mass * w_u * p;
                            }
                        }
                    }
                }
            }
            // recover block
            for x2 in 0..n2 {
                let mass = dist[idx_rec(x2)];
                if mass <= 0.0 {
                    continue;
                }
                let u = recovery.action(x2);
                for x2n in 0..n2 {
                    let p = m2.kernel[u][(x2, x2n)];
                    if p > 0.0 {
                        flow[idx_rec(x2n)] += mass * p;
                    }
                }
            }
            // split by the concrete output label
            for j in 0..dim {
                if flow[j] <= 0.0 {
                    continue;
                }
                let x2 = if j < n1 * n2 { j % n2 } else { j - n1 * n2 };
                let mut w2 = word.clone();
                w2.push(labels2[x2]);
                next.entry(w2).or_insert_with(|| Col::zeros(dim))[j] += flow[j];
            }
        }
        layer = next;
    }
    Ok(layer.into_iter().map(|(w, d)| (w, d.iter().sum())).collect())
}

/// `Σ_w max(0, p(w) − q(w))`: the one-sided total-variation gap, equal to
/// `sup_A (P(A) − Q(A))` over events `A`.
pub fn word_tv_distance(p: &HashMap<Word, f64>, q: &HashMap<Word, f64>) -> f64 {
    p.iter()
        .map(|(w, &pv)| (pv - q.get(w).copied().unwrap_or(0.0)).max(0.0))
        .sum()
}

/// Two-sided probability sandwich:
/// `p_abstract_minus − γ ≤ p_concrete ≤ p_abstract_plus + γ` with slack for
/// statistical estimates.
pub fn check_sandwich(
    p_abstract_minus: f64,
    p_abstract_plus: f64,
    p_concrete: f64,
    gamma: f64,
    slack: f64,
) -> bool {
    p_abstract_minus - gamma - slack <= p_concrete && p_concrete <= p_abstract_plus + gamma + slack
}

/// One instance of the randomized refinement-bound suite.
#[derive(Debug, Clone)]
pub struct SuiteOutcome {
    pub index: usize,
    pub exact: bool,
    pub delta: f64,
    pub gamma: f64,
    pub horizon: usize,
    /// One-sided total-variation gap between the abstract and refined
    /// output-word distributions (the sup over all events).
    pub tv_gap: f64,
    pub pass: bool,
}

/// Randomized suite checking the refinement bounds by exact enumeration:
/// exactly related pairs must match to 1e-10, approximately related pairs
/// must satisfy the two-sided γ bound for every output event.
pub fn sandwich_suite(instances: usize, seed: u64, slack: f64) -> Result<Vec<SuiteOutcome>> {
    use rand::Rng;
    let seeds = SeedStream::new(seed);
    let mut out = Vec::with_capacity(instances);
    for index in 0..instances {
        let mut rng = seeds.stream(index as u64);
        let exact = index % 3 == 0;
        let horizon = rng.random_range(1..=4usize);
        let n_actions = rng.random_range(1..=3usize);
        let (pair, gamma) = if exact {
            let n2 = rng.random_range(2..=5usize);
            let n_blocks = rng.random_range(1..=n2.min(3));
            let p = testgen::random_lumpable_pair(&mut rng, n_blocks, n2, n_actions);
            (p, 0.0)
        } else {
            let n1 = rng.random_range(2..=5usize);
            let n2 = rng.random_range(2..=5usize);
            let n_labels = rng.random_range(2..=3usize);
            let p = testgen::random_certified_pair(&mut rng, n1, n2, n_actions, n_labels);
            let g = 1.0 - (1.0 - p.delta).powi(horizon as i32 + 1);
            (p, g)
        };
        let policy = testgen::random_policy(&mut rng, pair.m1.n_states(), n_actions);
        let recovery = EnumRecovery::HoldAction(0);
        let abstract_words = word_distribution(&pair.m1, &policy, horizon)?;
        let refined_words = refined_word_distribution(
            &pair.m1,
            &pair.m2,
            &pair.mask,
            &pair.interface_map,
            &policy,
            &recovery,
            horizon,
        )?;
        let tv_gap = word_tv_distance(&abstract_words, &refined_words)
            .max(word_tv_distance(&refined_words, &abstract_words));
        let pass = if exact { tv_gap <= 1e-10 } else { tv_gap <= gamma + slack };
        out.push(SuiteOutcome {
            index,
            exact,
            delta: pair.delta,
            gamma,
            horizon,
            tv_gap,
            pass,
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// random-instance generators (documented seeds; used by the oracle suites)
// ---------------------------------------------------------------------------

pub mod testgen {
    use super::*;
    use crate::model::OutputMetric;
    use crate::rng::StreamRng;
    use rand::Rng;

    /// Dirichlet(1) row: normalized unit exponentials.
    pub fn random_dist(rng: &mut StreamRng, n: usize) -> Col {
        let mut v = Col::from_fn(n, |_, _| -(rng.random::<f64>().max(1e-12)).ln());
        let s: f64 = v.iter().sum();
        v /= s;
        v
    }

    /// Random finite model with Dirichlet(1) kernel rows and given labels.
    pub fn random_finite_gmdp(
        rng: &mut StreamRng,
        n_states: usize,
        n_actions: usize,
        labels: &[usize],
    ) -> FiniteGmdp {
        let kernel = (0..n_actions)
            .map(|_| {
                let rows: Vec<Col> = (0..n_states).map(|_| random_dist(rng, n_states)).collect();
                crate::linalg::Mat::from_fn(n_states, n_states, |i, j| rows[i][j])
            })
            .collect();
        FiniteGmdp::new(
            kernel,
            random_dist(rng, n_states),
            labels.iter().map(|&l| Output::Label(l)).collect(),
            OutputMetric::Discrete,
        )
        .expect("generated model is valid")
    }

    /// A random pair with a label-consistent relation mask and a random
    /// interface table; the certified `δ` comes from the LP.
    pub struct GeneratedPair {
        pub m1: FiniteGmdp,
        pub m2: FiniteGmdp,
        pub mask: Vec<Vec<bool>>,
        pub interface_map: Vec<Vec<Vec<usize>>>,
        pub delta: f64,
        pub epsilon: f64,
    }

    pub fn random_certified_pair(
        rng: &mut StreamRng,
        n1: usize,
        n2: usize,
        n_actions: usize,
        n_labels: usize,
    ) -> GeneratedPair {
        loop {
            let labels1: Vec<usize> = (0..n1).map(|_| rng.random_range(0..n_labels)).collect();
            let labels2: Vec<usize> = (0..n2).map(|_| rng.random_range(0..n_labels)).collect();
            let m1 = random_finite_gmdp(rng, n1, n_actions, &labels1);
            let m2 = random_finite_gmdp(rng, n2, n_actions, &labels2);
            let mask: Vec<Vec<bool>> = (0..n1)
                .map(|i| {
                    (0..n2)
                        .map(|j| labels1[i] == labels2[j] && rng.random::<f64>() < 0.85)
                        .collect()
                })
                .collect();
            if mask.iter().all(|r| r.iter().all(|&b| !b)) {
                continue; // empty relation: resample
            }
            let interface_map: Vec<Vec<Vec<usize>>> = (0..n_actions)
                .map(|_| {
                    (0..n1)
                        .map(|_| (0..n2).map(|_| rng.random_range(0..n_actions)).collect())
                        .collect()
                })
                .collect();
            let (delta, epsilon) =
                crate::refine::certify_finite_pair(&m1, &m2, &mask, &interface_map)
                    .expect("certification of a valid pair");
            return GeneratedPair { m1, m2, mask, interface_map, delta, epsilon };
        }
    }

    /// An exactly related pair: `m2` is built block-lumpable, `m1` is the
    /// quotient chain, the mask is block membership, and the LP certifies
    /// `δ = 0`.
    pub fn random_lumpable_pair(
        rng: &mut StreamRng,
        n_blocks: usize,
        n2: usize,
        n_actions: usize,
    ) -> GeneratedPair {
        assert!(n2 >= n_blocks);
        // surjective block assignment
        let mut block_of: Vec<usize> = (0..n2)
            .map(|i| if i < n_blocks { i } else { rng.random_range(0..n_blocks) })
            .collect();
        // shuffle
        for i in (1..n2).rev() {
            let j = rng.random_range(0..=i);
            block_of.swap(i, j);
        }
        let members: Vec<Vec<usize>> = (0..n_blocks)
            .map(|b| (0..n2).filter(|&i| block_of[i] == b).collect())
            .collect();

        let mut kernel1 = Vec::with_capacity(n_actions);
        let mut kernel2 = Vec::with_capacity(n_actions);
        for _ in 0..n_actions {
            let block_kernel: Vec<Col> =
                (0..n_blocks).map(|_| random_dist(rng, n_blocks)).collect();
            let mut k2 = crate::linalg::Mat::zeros(n2, n2);
            for x2 in 0..n2 {
                let b = block_of[x2];
                for bn in 0..n_blocks {
                    // split the block mass among target members
                    let split = random_dist(rng, members[bn].len());
                    for (si, &m) in members[bn].iter().enumerate() {
                        k2[(x2, m)] = block_kernel[b][bn] * split[si];
                    }
                }
                // renormalize against rounding
                let s: f64 = k2.row(x2).iter().sum();
                for j in 0..n2 {
                    k2[(x2, j)] /= s;
                }
            }
            kernel2.push(k2);
            kernel1.push(crate::linalg::Mat::from_fn(n_blocks, n_blocks, |i, j| {
                block_kernel[i][j]
            }));
        }
        let pi2 = random_dist(rng, n2);
        let pi1 = Col::from_fn(n_blocks, |b, _| members[b].iter().map(|&m| pi2[m]).sum());
        let m1 = FiniteGmdp::new(
            kernel1,
            pi1,
            (0..n_blocks).map(Output::Label).collect(),
            OutputMetric::Discrete,
        )
        .unwrap();
        let m2 = FiniteGmdp::new(
            kernel2,
            pi2,
            block_of.iter().map(|&b| Output::Label(b)).collect(),
            OutputMetric::Discrete,
        )
        .unwrap();
        let mask: Vec<Vec<bool>> =
            (0..n_blocks).map(|b| (0..n2).map(|j| block_of[j] == b).collect()).collect();
        let interface_map: Vec<Vec<Vec<usize>>> = (0..n_actions)
            .map(|u| (0..n_blocks).map(|_| vec![u; n2]).collect())
            .collect();
        let (delta, epsilon) =
            crate::refine::certify_finite_pair(&m1, &m2, &mask, &interface_map).unwrap();
        GeneratedPair { m1, m2, mask, interface_map, delta, epsilon }
    }

    /// Random stationary deterministic Markov policy for `m1`.
    pub fn random_policy(rng: &mut StreamRng, n_states: usize, n_actions: usize) -> MarkovPolicy {
        let choices: Vec<usize> = (0..n_states).map(|_| rng.random_range(0..n_actions)).collect();
        MarkovPolicy::stationary_deterministic(&choices, n_actions)
    }
}
