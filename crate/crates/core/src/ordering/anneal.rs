use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Orderer, OrdererConfig, OrderingResult, Permutation, SymmetricCost};
use crate::confmat::ConfusionMatrix;
use crate::error::{bail, Result};
use crate::rng::SplitMix64;

/// Reference score in the Metropolis test.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AcceptRule {
    /// Compare candidates against the best score seen so far.
    #[default]
    Best,
    /// Textbook Metropolis: compare against the current state.
    Current,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnealSchedule {
    pub steps: u64,
    /// Initial temperature.
    pub t0: f64,
    /// Multiplicative cooling applied after every step.
    pub cooling: f64,
    pub restarts: u32,
    pub seed: u64,
    #[serde(default)]
    pub accept: AcceptRule,
    /// Record the best objective every this many steps.
    #[serde(default)]
    pub trace_every: Option<u64>,
}

impl AnnealSchedule {
    /// Budget sized to the matrix: `50_000·K` steps, three restarts, and a
    /// temperature that decays by a factor of 1000 over the run.
    pub fn default_for(c: &ConfusionMatrix, seed: u64) -> Self {
        let k = c.k();
        let steps = 50_000 * k as u64;
        let f0 = SymmetricCost::new(c).objective(Permutation::identity(k).order());
        Self {
            steps,
            t0: (f0 as f64 / (10 * k) as f64).max(1.0),
            cooling: cooling_for(steps),
            restarts: 3,
            seed,
            accept: AcceptRule::Best,
            trace_every: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 {
            bail!("steps must be at least 1");
        }
        if !(self.t0 > 0.0 && self.t0.is_finite()) {
            bail!("initial temperature must be positive, got {}", self.t0);
        }
        if !(self.cooling > 0.0 && self.cooling < 1.0) {
            bail!("cooling factor must be in (0, 1), got {}", self.cooling);
        }
        if self.restarts == 0 {
            bail!("restarts must be at least 1");
        }
        if self.trace_every == Some(0) {
            bail!("trace interval must be positive");
        }
        Ok(())
    }
}

/// Cooling factor that shrinks the temperature by 1000× over `steps`.
pub fn cooling_for(steps: u64) -> f64 {
    0.001f64.powf(1.0 / steps.max(1) as f64)
}

/// Runs `schedule.restarts` independent annealing chains and keeps the best.
///
/// Chain `r` draws from SplitMix64 seeded with `seed ^ r`. Each step draws,
/// in order: the move kind, the move's indices, then the acceptance variate.
/// The lowest chain index wins ties, so the result depends only on the
/// inputs even though chains run in parallel.
pub fn anneal_order(c: &ConfusionMatrix, schedule: &AnnealSchedule) -> Result<OrderingResult> {
    schedule.validate()?;
    let cost = SymmetricCost::new(c);
    let k = c.k();
    let initial = cost.objective(Permutation::identity(k).order());

    let chains: Vec<Chain> = (0..schedule.restarts)
        .into_par_iter()
        .map(|r| run_chain(&cost, k, schedule, schedule.seed ^ u64::from(r)))
        .collect();
    let best = chains
        .into_iter()
        .reduce(|a, b| if b.best < a.best { b } else { a })
        .expect("at least one restart");

    let result = OrderingResult {
        permutation: Permutation(best.best_order),
        objective: best.best,
        initial_objective: initial,
        trace: best.trace,
    };
    result.check(c)?;
    Ok(result)
}

struct Chain {
    best: u64,
    best_order: Vec<usize>,
    trace: Option<Vec<u64>>,
}

fn run_chain(cost: &SymmetricCost, k: usize, s: &AnnealSchedule, seed: u64) -> Chain {
    let mut rng = SplitMix64::new(seed);
    let mut order: Vec<usize> = (0..k).collect();
    let mut current = cost.objective(&order);
    let mut best = current;
    let mut best_order = order.clone();
    let mut scratch = Vec::with_capacity(k);
    let mut trace = s.trace_every.map(|_| Vec::new());
    let mut t = s.t0;

    for step in 0..s.steps {
        let candidate = if rng.next_f64() < 0.5 {
            let a = rng.below(k);
            let mut b = rng.below(k - 1);
            if b >= a {
                b += 1;
            }
            let f = (current as i64 + cost.swap_delta(&order, a, b)) as u64;
            Move::Swap(a, b, f)
        } else {
            let start = rng.below(k);
            let end = rng.range_inclusive(start, k - 1);
            let slot = rng.below(k - (end - start));
            block_move(&order, start, end, slot, &mut scratch);
            Move::Block(cost.objective(&scratch))
        };
        let f_cand = candidate.objective();
        let reference = match s.accept {
            AcceptRule::Best => best,
            AcceptRule::Current => current,
        };
        let u = rng.next_f64();
        // Scores are −f, so exp((s_cand − s_ref)/T) = exp((f_ref − f_cand)/T).
        if u < ((reference as f64 - f_cand as f64) / t).exp() {
            match candidate {
                Move::Swap(a, b, _) => order.swap(a, b),
                Move::Block(_) => std::mem::swap(&mut order, &mut scratch),
            }
            current = f_cand;
            if current < best {
                best = current;
                best_order.copy_from_slice(&order);
            }
        }
        t *= s.cooling;
        if let (Some(every), Some(tr)) = (s.trace_every, trace.as_mut()) {
            if (step + 1) % every == 0 {
                tr.push(best);
            }
        }
    }
    Chain {
        best,
        best_order,
        trace,
    }
}

enum Move {
    Swap(usize, usize, u64),
    Block(u64),
}

impl Move {
    fn objective(&self) -> u64 {
        match *self {
            Move::Swap(_, _, f) | Move::Block(f) => f,
        }
    }
}

/// Removes positions `start..=end` and reinserts them as a block so that it
/// begins at `slot` among the remaining entries.
fn block_move(order: &[usize], start: usize, end: usize, slot: usize, out: &mut Vec<usize>) {
    out.clear();
    let rest = order[..start].iter().chain(&order[end + 1..]);
    let block = &order[start..=end];
    let mut inserted = false;
    for (i, &c) in rest.enumerate() {
        if i == slot {
            out.extend_from_slice(block);
            inserted = true;
        }
        out.push(c);
    }
    if !inserted {
        out.extend_from_slice(block);
    }
}

/// [`Orderer`] backed by [`anneal_order`]; unset schedule fields take the
/// per-matrix defaults from [`AnnealSchedule::default_for`].
#[derive(Debug, Clone, Default)]
pub struct AnnealOrderer {
    config: OrdererConfig,
}

impl AnnealOrderer {
    pub fn from_config(cfg: &OrdererConfig) -> Self {
        Self {
            config: cfg.clone(),
        }
    }

    pub fn schedule_for(&self, c: &ConfusionMatrix) -> AnnealSchedule {
        let cfg = &self.config;
        let mut s = AnnealSchedule::default_for(c, cfg.seed);
        if let Some(steps) = cfg.steps {
            s.steps = steps;
            s.cooling = cooling_for(steps);
        }
        if let Some(t0) = cfg.t0 {
            s.t0 = t0;
        }
        if let Some(cooling) = cfg.cooling {
            s.cooling = cooling;
        }
        if let Some(r) = cfg.restarts {
            s.restarts = r;
        }
        s.accept = cfg.accept;
        s.trace_every = cfg.trace_every;
        s
    }
}

impl Orderer for AnnealOrderer {
    fn name(&self) -> &'static str {
        "anneal"
    }

    fn order(&self, c: &ConfusionMatrix) -> Result<OrderingResult> {
        anneal_order(c, &self.schedule_for(c))
    }
}
