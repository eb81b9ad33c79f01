//! Rejection samplers for nested, locally separable instances.
//!
//! Bandit truths live on a 0.01 grid. Exactly one pair of actions has true
//! values within `η` of each other; it holds the two highest values and the
//! two highest action indices, so lowest-index tie-breaking never favours
//! the optimum. Every other action is more than `η` away from everything
//! else. Misspecified functions stay at least `Δ` below the pair, which
//! separates them on the only close pair, and at least `Δ/√2` away from
//! `f*` on every other action, so any observation costs them `Δ²/2` of
//! squared error. True values are kept out of the band where that is
//! impossible. Realizable distractors copy `f*`, raise one other action to
//! at least the best true value and redraw up to two more.
//!
//! MDP truths split the states into "good" and "bad" halves. Each state keeps
//! at least one action into each half, and rewards are near 1 in good states
//! and near 0 in bad ones, so every optimal value function separates the two
//! halves by about one unit. Misspecified kernels send every `(s, a)` to the
//! opposite half; realizable distractors redirect a few rows within the same
//! half. Rows are mixed with a random distribution and rewards jittered by
//! amounts that shrink as `Δ` approaches 1.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{same_vector, BanditInstance, MdpInstance, NoiseModel};
use crate::error::{Error, Result};
use crate::hypothesis::{Hypothesis, HypothesisFunction, NestedFamily, TransitionKernel, TOLERANCE};
use crate::mdp::{value_iteration, RewardTable};
use crate::rng::{seeded, SimRng};

pub const DEFAULT_MAX_ATTEMPTS: usize = 1000;

fn default_attempts() -> usize {
    DEFAULT_MAX_ATTEMPTS
}

/// Bandit generator settings. `M` is the length of `class_sizes`; sizes are
/// cumulative (class `m` has `class_sizes[m - 1]` members).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BanditGenConfig {
    pub n_actions: usize,
    pub true_index: usize,
    pub separation: f64,
    pub locality: f64,
    pub sigma: f64,
    pub class_sizes: Vec<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_attempts")]
    pub max_attempts: usize,
}

impl Default for BanditGenConfig {
    fn default() -> Self {
        Self {
            n_actions: 10,
            true_index: 2,
            separation: 1.0,
            locality: 0.05,
            sigma: 0.1,
            class_sizes: vec![2, 4, 300],
            seed: 0,
            max_attempts: DEFAULT_MAX_ATTEMPTS,
        }
    }
}

/// MDP generator settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdpGenConfig {
    pub n_states: usize,
    pub n_actions: usize,
    pub horizon: usize,
    pub true_index: usize,
    pub separation: f64,
    pub locality: f64,
    pub class_sizes: Vec<usize>,
    #[serde(default)]
    pub seed: u64,
    /// Weight of the random component in each row. Defaults to `(1 − Δ)/4`
    /// when `m* ≥ 2`, and 0.5 otherwise.
    #[serde(default)]
    pub mixing: Option<f64>,
    /// Reward spread within each half. Same defaults as `mixing`, with 0.3
    /// when `m* = 1`.
    #[serde(default)]
    pub jitter: Option<f64>,
    /// Random vectors added to the separability bank.
    #[serde(default)]
    pub bank_random: usize,
    #[serde(default = "default_attempts")]
    pub max_attempts: usize,
}

impl Default for MdpGenConfig {
    fn default() -> Self {
        Self {
            n_states: 4,
            n_actions: 2,
            horizon: 2,
            true_index: 2,
            separation: 1.0,
            locality: 0.05,
            class_sizes: vec![2, 6, 12],
            seed: 0,
            mixing: None,
            jitter: None,
            bank_random: 0,
            max_attempts: DEFAULT_MAX_ATTEMPTS,
        }
    }
}

fn check_sizes(sizes: &[usize], true_index: usize) -> Result<()> {
    if sizes.is_empty() {
        return Err(Error::config("class_sizes must list at least one class"));
    }
    if true_index == 0 || true_index > sizes.len() {
        return Err(Error::config(format!(
            "true_index {true_index} outside 1..={}",
            sizes.len()
        )));
    }
    if sizes[0] == 0 || sizes.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::config("class_sizes must be positive and nondecreasing"));
    }
    let below = if true_index >= 2 { sizes[true_index - 2] } else { 0 };
    if sizes[true_index - 1] <= below {
        return Err(Error::config(format!(
            "class {true_index} must be strictly larger than class {} to hold the truth",
            true_index - 1
        )));
    }
    Ok(())
}

fn check_separation(separation: f64, locality: f64, floor: f64, label: &str) -> Result<()> {
    if !(separation > 0.0) || !(locality > 0.0) {
        return Err(Error::config("separation and locality must be positive"));
    }
    if separation < floor - TOLERANCE {
        return Err(Error::config(format!(
            "separation {separation} below the feasibility floor {label} = {floor}"
        )));
    }
    if separation > 1.0 + TOLERANCE {
        return Err(Error::config(format!(
            "separation {separation} above 1 is not reachable by this generator"
        )));
    }
    Ok(())
}

/// Stack `misspecified`, the truth and `distractors` into cumulative classes.
fn assemble<H: Clone>(sizes: &[usize], misspecified: Vec<H>, truth: H, distractors: Vec<H>) -> Vec<Vec<H>> {
    let mut pool = misspecified;
    pool.push(truth);
    pool.extend(distractors);
    sizes.iter().map(|&n| pool[..n].to_vec()).collect()
}

/// Draw `count` new items with `draw`, skipping anything equal to an item
/// already in `seen`. Gives up after `20 * count + 100` draws.
fn draw_distinct<H: Hypothesis + Clone>(
    count: usize,
    seen: &mut Vec<H>,
    mut draw: impl FnMut() -> Result<H>,
) -> Result<Option<Vec<H>>> {
    let mut out = Vec::with_capacity(count);
    let mut budget = 20 * count + 100;
    while out.len() < count {
        if budget == 0 {
            return Ok(None);
        }
        budget -= 1;
        let h = draw()?;
        if !seen.iter().any(|g| g.approx_eq(&h)) {
            seen.push(h.clone());
            out.push(h);
        }
    }
    Ok(Some(out))
}

fn hundredths(k: i64) -> f64 {
    k as f64 / 100.0
}

/// Uniform over the grid values at least `far` from `value`.
fn far_value(value: i64, far: i64, rng: &mut SimRng) -> i64 {
    let below = (value - far + 1).max(0);
    let above = (100 - (value + far) + 1).max(0);
    let i = rng.gen_range(0..below + above);
    if i < below {
        i
    } else {
        value + far + (i - below)
    }
}

/// Generate a bandit instance whose family passes nesting and separability.
pub fn gen_bandit_instance(config: &BanditGenConfig) -> Result<BanditInstance> {
    check_sizes(&config.class_sizes, config.true_index)?;
    check_separation(config.separation, config.locality, 2.0 * (2.0 * config.locality).sqrt(), "2√(2η)")?;
    if config.n_actions < 2 {
        return Err(Error::config("bandit generator needs at least two actions"));
    }
    let noise = NoiseModel::uniform(config.sigma)?;
    let mut rng = seeded(config.seed);
    let mut last = String::from("no attempt made");
    for _ in 0..config.max_attempts.max(1) {
        match bandit_attempt(config, noise, &mut rng)? {
            Ok(instance) => return Ok(instance),
            Err(why) => last = why,
        }
    }
    Err(Error::Generation {
        attempts: config.max_attempts.max(1),
        diagnostics: last,
    })
}

fn bandit_attempt(cfg: &BanditGenConfig, noise: NoiseModel, rng: &mut SimRng) -> Result<std::result::Result<BanditInstance, String>> {
    let n = cfg.n_actions;
    // Everything below is in hundredths.
    let need = (cfg.separation * 100.0 - 1e-9).ceil() as i64;
    let far = (cfg.separation * 100.0 / std::f64::consts::SQRT_2 - 1e-9).ceil() as i64;
    let eta = (cfg.locality * 100.0 + 1e-9).floor() as i64;
    let step = eta + 1;
    let u = rng.gen_range(0..=eta.min(100 - need));
    let top = rng.gen_range(need + u..=100);
    let second = top - u;
    let (best, partner) = (n - 1, n - 2);
    let levels: Vec<i64> = (1..)
        .map(|j| second - step * j)
        .take_while(|&v| v >= 0)
        .filter(|&v| v <= 100 - far || v >= far)
        .collect();
    if levels.len() < n - 2 {
        return Err(Error::config(format!(
            "{n} actions do not fit below {} with spacing {} outside ({}, {})",
            hundredths(second),
            hundredths(step),
            hundredths(100 - far),
            hundredths(far)
        )));
    }
    let mut truth_k = vec![0i64; n];
    truth_k[best] = top;
    truth_k[partner] = second;
    for (x, &level) in levels.choose_multiple(rng, n - 2).enumerate() {
        truth_k[x] = level;
    }
    let truth = HypothesisFunction::new(truth_k.iter().map(|&k| hundredths(k)).collect())?;

    let m_star = cfg.true_index;
    let n_mis = if m_star >= 2 { cfg.class_sizes[m_star - 2] } else { 0 };
    let n_extra = cfg.class_sizes.last().copied().unwrap_or(0) - n_mis - 1;
    let mut seen = vec![truth.clone()];

    let ceiling = second - need;
    let misspecified = draw_distinct(n_mis, &mut seen, || {
        let values = (0..n)
            .map(|x| {
                let k = if x == best || x == partner {
                    rng.gen_range(0..=ceiling)
                } else {
                    far_value(truth_k[x], far, rng)
                };
                hundredths(k)
            })
            .collect();
        HypothesisFunction::new(values)
    })?;
    let Some(misspecified) = misspecified else {
        return Ok(Err(format!("could not draw {n_mis} distinct misspecified functions")));
    };

    let distractors = draw_distinct(n_extra, &mut seen, || {
        let mut values = truth.values().to_vec();
        let k = rng.gen_range(1..=(n - 2).min(3));
        let picked = rand::seq::index::sample(rng, n - 2, k).into_vec();
        values[picked[0]] = hundredths(rng.gen_range(top..=100));
        for &x in &picked[1..] {
            values[x] = hundredths(rng.gen_range(0..=100));
        }
        HypothesisFunction::new(values)
    })?;
    let Some(distractors) = distractors else {
        return Ok(Err(format!("could not draw {n_extra} distinct realizable distractors")));
    };

    let classes = assemble(&cfg.class_sizes, misspecified, truth.clone(), distractors);
    let family = NestedFamily::new(classes, m_star, cfg.separation, cfg.locality)?;
    let instance = match BanditInstance::new(family, truth, noise) {
        Ok(i) => i,
        Err(e) => return Ok(Err(e.to_string())),
    };
    let report = instance.separability()?;
    if !report.holds {
        return Ok(Err(format!(
            "separability failed: achieved gap {} with {} violations",
            report.achieved_gap, report.violation_count
        )));
    }
    Ok(Ok(instance))
}

/// `V*_{P,h}` for every kernel and every `h ≤ H` (duplicates removed), then
/// `random` vectors uniform in `[0, H]^S` drawn from `seed`.
pub fn value_bank(
    kernels: &[TransitionKernel],
    reward: &RewardTable,
    horizon: usize,
    random: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let mut bank: Vec<Vec<f64>> = Vec::new();
    for p in kernels {
        let tables = value_iteration(p, reward, horizon)?;
        for h in 1..=horizon {
            let v = tables.state_values(h);
            if !bank.iter().any(|b| same_vector(b, v)) {
                bank.push(v.to_vec());
            }
        }
    }
    let mut rng = seeded(seed);
    let n_states = reward.n_states();
    for _ in 0..random {
        bank.push((0..n_states).map(|_| rng.gen::<f64>() * horizon as f64).collect());
    }
    Ok(bank)
}

/// Generate an MDP instance whose family passes nesting and separability
/// over the value bank.
pub fn gen_mdp_instance(config: &MdpGenConfig) -> Result<MdpInstance> {
    check_sizes(&config.class_sizes, config.true_index)?;
    check_separation(
        config.separation,
        config.locality,
        2.0 * (config.horizon as f64 * config.locality).sqrt(),
        "2√(Hη)",
    )?;
    if config.n_states < 2 || config.n_actions < 2 {
        return Err(Error::config("MDP generator needs at least two states and two actions"));
    }
    if config.horizon == 0 {
        return Err(Error::config("horizon must be at least 1"));
    }
    let separable = config.true_index >= 2;
    let slack = (1.0 - config.separation).max(0.0) / 4.0;
    let mixing = config.mixing.unwrap_or(if separable { slack } else { 0.5 });
    let jitter = config.jitter.unwrap_or(if separable { slack } else { 0.3 });
    if !(0.0..=1.0).contains(&mixing) {
        return Err(Error::config(format!("mixing {mixing} outside [0, 1]")));
    }
    // Keeps rewards in the two halves at least 0.1 apart.
    if !(0.0..=0.45).contains(&jitter) {
        return Err(Error::config(format!("jitter {jitter} outside [0, 0.45]")));
    }
    let mut rng = seeded(config.seed);
    let mut last = String::from("no attempt made");
    for _ in 0..config.max_attempts.max(1) {
        match mdp_attempt(config, mixing, jitter, &mut rng)? {
            Ok(instance) => return Ok(instance),
            Err(why) => last = why,
        }
    }
    Err(Error::Generation {
        attempts: config.max_attempts.max(1),
        diagnostics: last,
    })
}

struct Halves {
    good: Vec<bool>,
    members: [Vec<usize>; 2],
}

impl Halves {
    fn draw(n_states: usize, rng: &mut SimRng) -> Self {
        let mut order: Vec<usize> = (0..n_states).collect();
        order.shuffle(rng);
        let n_bad = n_states / 2;
        let mut good = vec![true; n_states];
        for &s in &order[..n_bad] {
            good[s] = false;
        }
        let members = [
            (0..n_states).filter(|&s| !good[s]).collect(),
            (0..n_states).filter(|&s| good[s]).collect(),
        ];
        Self { good, members }
    }

    fn pick(&self, good: bool, rng: &mut SimRng) -> usize {
        *self.members[good as usize].choose(rng).expect("both halves are nonempty")
    }
}

/// `(1 − μ) e_dest + μ w` for a random distribution `w`.
fn mixed_row(n_states: usize, dest: usize, mixing: f64, rng: &mut SimRng) -> Vec<f64> {
    let mut row = vec![0.0; n_states];
    if mixing > 0.0 {
        let w: Vec<f64> = (0..n_states).map(|_| rng.gen::<f64>() + 1e-3).collect();
        let total: f64 = w.iter().sum();
        for (r, wi) in row.iter_mut().zip(&w) {
            *r = mixing * wi / total;
        }
    }
    row[dest] += 1.0 - mixing;
    let total: f64 = row.iter().sum();
    row.iter_mut().for_each(|p| *p /= total);
    row
}

fn mdp_attempt(
    cfg: &MdpGenConfig,
    mixing: f64,
    jitter: f64,
    rng: &mut SimRng,
) -> Result<std::result::Result<MdpInstance, String>> {
    let (n_s, n_a) = (cfg.n_states, cfg.n_actions);
    let halves = Halves::draw(n_s, rng);

    let rewards: Vec<f64> = (0..n_s * n_a)
        .map(|i| {
            let shift = jitter * rng.gen::<f64>();
            if halves.good[i / n_a] {
                1.0 - shift
            } else {
                shift
            }
        })
        .collect();
    let reward = RewardTable::new(n_s, n_a, rewards)?;

    // Which half each (s, a) of the truth leads into: one action each way,
    // the rest at random.
    let mut heads_good = vec![false; n_s * n_a];
    for s in 0..n_s {
        let mut acts: Vec<usize> = (0..n_a).collect();
        acts.shuffle(rng);
        heads_good[s * n_a + acts[0]] = true;
        for &a in &acts[2..] {
            heads_good[s * n_a + a] = rng.gen();
        }
    }

    let build = |into_good: &dyn Fn(usize) -> bool, rng: &mut SimRng| -> Result<TransitionKernel> {
        let mut probs = Vec::with_capacity(n_s * n_a * n_s);
        for i in 0..n_s * n_a {
            let dest = halves.pick(into_good(i), rng);
            probs.extend(mixed_row(n_s, dest, mixing, rng));
        }
        TransitionKernel::from_flat(n_s, n_a, probs)
    };

    let truth = build(&|i| heads_good[i], rng)?;
    let m_star = cfg.true_index;
    let n_mis = if m_star >= 2 { cfg.class_sizes[m_star - 2] } else { 0 };
    let n_extra = cfg.class_sizes.last().copied().unwrap_or(0) - n_mis - 1;
    let mut seen = vec![truth.clone()];

    let flipped = |i: usize| !heads_good[i];
    let misspecified = draw_distinct(n_mis, &mut seen, || build(&flipped, rng))?;
    let Some(misspecified) = misspecified else {
        return Ok(Err(format!("could not draw {n_mis} distinct misspecified kernels")));
    };

    let distractors = draw_distinct(n_extra, &mut seen, || {
        let mut rows: Vec<Vec<f64>> = truth.rows().map(<[f64]>::to_vec).collect();
        let k = rng.gen_range(1..=rows.len().min(3));
        for i in rand::seq::index::sample(rng, rows.len(), k) {
            let dest = halves.pick(heads_good[i], rng);
            rows[i] = mixed_row(n_s, dest, mixing, rng);
        }
        TransitionKernel::from_flat(n_s, n_a, rows.concat())
    })?;
    let Some(distractors) = distractors else {
        return Ok(Err(format!("could not draw {n_extra} distinct realizable distractors")));
    };

    let classes = assemble(&cfg.class_sizes, misspecified, truth.clone(), distractors);
    let family = NestedFamily::new(classes, m_star, cfg.separation, cfg.locality)?;
    let instance = match MdpInstance::new(family, truth, reward, cfg.horizon, 0) {
        Ok(i) => i,
        Err(e) => return Ok(Err(e.to_string())),
    };
    let report = instance.separability(cfg.bank_random, cfg.seed)?;
    if !report.holds {
        return Ok(Err(format!(
            "separability failed: achieved gap {} with {} violations",
            report.achieved_gap, report.violation_count
        )));
    }
    Ok(Ok(instance))
}
