//! Sampling-based joint training of direct and neighborhood proximity.
//!
//! One optimization step:
//! 1. draw an observed `(user, item)` edge, weight-proportionally;
//! 2. apply the direct-similarity update — rating variant (positive pair plus
//!    `M` whole-collection negative pairs) or ranking variant (one preference
//!    triple with a single sampled negative item);
//! 3. walk `k` steps from each endpoint and, for every same-side context node
//!    in the walk, apply neighborhood updates (positive pair against the
//!    center's context matrix plus `M` negatives from the center's own side),
//!    the whole neighborhood gradient scaled by `lambda`;
//! 4. decay the touched vertex-matrix rows by `learning_rate·l2_reg`.
//!
//! Workers run Hogwild-style: they share the matrices without locks and
//! partition the sample budget deterministically. With a single worker the
//! run is bit-reproducible for a fixed seed.

use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::graph::{BipartiteGraph, NegativeDistribution, Side, VertexId};
use crate::hogwild::HogwildCell;
use crate::loss;
use crate::model::{ContextInit, Embedding, EmbeddingTriplet};

/// Which direct-similarity loss drives the user–item updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossVariant {
    /// Log-likelihood of observed pairs with sampled negative pairs.
    #[default]
    Rate,
    /// Pairwise preference of an observed item over a sampled one.
    Rank,
}

impl LossVariant {
    /// Conventional neighborhood-loss weight for this variant.
    pub fn default_lambda(self) -> f64 {
        match self {
            LossVariant::Rate => 0.05,
            LossVariant::Rank => 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LrSchedule {
    /// Decay linearly from `learning_rate` to a tenth of it over the run.
    #[default]
    Linear,
    Constant,
}

/// All training hyperparameters.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub dim: usize,
    pub learning_rate: f64,
    /// Weight of the neighborhood loss. `None` resolves to the variant
    /// default (0.05 rate, 0.1 rank).
    pub lambda: Option<f64>,
    /// L2 decay applied to touched vertex rows.
    pub l2_reg: f64,
    /// Walk order `k`: number of random-walk steps per endpoint.
    pub walk_order: usize,
    /// Negative draws per positive.
    pub negatives: usize,
    /// Sample budget as a multiple of the edge count.
    pub samples_multiplier: f64,
    /// Absolute sample budget; overrides the multiplier when set.
    pub total_samples: Option<u64>,
    pub loss: LossVariant,
    pub workers: usize,
    pub seed: u64,
    pub negative_dist: NegativeDistribution,
    pub lr_schedule: LrSchedule,
    pub context_init: ContextInit,
    /// Emit a progress line to stderr every this many samples (worker 0).
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub progress_every: Option<u64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 100,
            learning_rate: 0.1,
            lambda: None,
            l2_reg: 0.025,
            walk_order: 2,
            negatives: 5,
            samples_multiplier: 80.0,
            total_samples: None,
            loss: LossVariant::Rate,
            workers: 1,
            seed: 1,
            negative_dist: NegativeDistribution::Degree,
            lr_schedule: LrSchedule::Linear,
            context_init: ContextInit::Zeros,
            progress_every: None,
        }
    }
}

impl TrainConfig {
    pub fn for_loss(loss: LossVariant) -> TrainConfig {
        TrainConfig {
            loss,
            ..TrainConfig::default()
        }
    }

    pub fn resolved_lambda(&self) -> f64 {
        self.lambda.unwrap_or_else(|| self.loss.default_lambda())
    }

    pub fn resolved_total_samples(&self, edge_count: usize) -> u64 {
        self.total_samples
            .unwrap_or((self.samples_multiplier * edge_count as f64).round() as u64)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::config("dim must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::config("learning rate must be positive"));
        }
        if self.resolved_lambda() < 0.0 {
            return Err(Error::config("lambda must be non-negative"));
        }
        if self.l2_reg < 0.0 {
            return Err(Error::config("l2 regularization must be non-negative"));
        }
        if self.walk_order == 0 {
            return Err(Error::config("walk order must be at least 1"));
        }
        if self.samples_multiplier < 0.0 {
            return Err(Error::config("samples multiplier must be non-negative"));
        }
        if self.workers == 0 {
            return Err(Error::config("workers must be at least 1"));
        }
        Ok(())
    }
}

/// Snapshot of training progress.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub samples_done: u64,
    pub samples_total: u64,
    /// Exponential moving average (decay 0.999) of per-step losses.
    pub loss_ema: f64,
    pub elapsed_secs: f64,
}

impl StepReport {
    pub fn samples_per_sec(&self) -> f64 {
        if self.elapsed_secs > 0.0 {
            self.samples_done as f64 / self.elapsed_secs
        } else {
            0.0
        }
    }
}

impl std::fmt::Display for StepReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "samples {}/{} ({:.1}%) loss {:.4} rate {:.0}/s",
            self.samples_done,
            self.samples_total,
            100.0 * self.samples_done as f64 / self.samples_total.max(1) as f64,
            self.loss_ema,
            self.samples_per_sec()
        )
    }
}

const EMA_DECAY: f64 = 0.999;
const PROGRESS_BATCH: u64 = 1024;

/// Trains the triplet on `graph` and returns it.
pub fn train(graph: &BipartiteGraph, config: &TrainConfig) -> Result<EmbeddingTriplet> {
    train_with_report(graph, config).map(|(triplet, _)| triplet)
}

/// Like [`train`], additionally returning the final progress snapshot
/// (worker 0's loss average).
pub fn train_with_report(
    graph: &BipartiteGraph,
    config: &TrainConfig,
) -> Result<(EmbeddingTriplet, StepReport)> {
    config.validate()?;
    let total = config.resolved_total_samples(graph.edge_count());
    let mut init_rng = ChaCha8Rng::seed_from_u64(config.seed);
    let triplet = EmbeddingTriplet::init(
        graph.vertex_count(),
        config.dim,
        config.context_init,
        &mut init_rng,
    );
    let started = Instant::now();
    if total == 0 {
        let report = StepReport {
            samples_done: 0,
            samples_total: 0,
            loss_ema: 0.0,
            elapsed_secs: started.elapsed().as_secs_f64(),
        };
        return Ok((triplet, report));
    }

    let cell = HogwildCell::new(triplet);
    let done = AtomicU64::new(0);
    let abort = AtomicBool::new(false);
    let workers = config.workers;

    let summaries: Vec<Result<WorkerSummary>> = std::thread::scope(|scope| {
        let mut handles = Vec::with_capacity(workers);
        for w in 0..workers {
            let share = total / workers as u64 + u64::from((w as u64) < total % workers as u64);
            let cell = cell.clone();
            let done = &done;
            let abort = &abort;
            handles.push(scope.spawn(move || {
                run_worker(graph, config, cell, w, share, total, started, done, abort)
            }));
        }
        handles
            .into_iter()
            .map(|h| h.join().expect("training worker panicked"))
            .collect()
    });

    let mut report = StepReport {
        samples_done: 0,
        samples_total: total,
        loss_ema: 0.0,
        elapsed_secs: started.elapsed().as_secs_f64(),
    };
    for (w, summary) in summaries.into_iter().enumerate() {
        let summary = summary?;
        report.samples_done += summary.samples;
        if w == 0 {
            report.loss_ema = summary.loss_ema;
        }
    }
    Ok((cell.into_inner(), report))
}

struct WorkerSummary {
    samples: u64,
    loss_ema: f64,
}

#[allow(clippy::too_many_arguments)]
fn run_worker(
    graph: &BipartiteGraph,
    config: &TrainConfig,
    cell: HogwildCell<EmbeddingTriplet>,
    worker: usize,
    share: u64,
    total: u64,
    started: Instant,
    done: &AtomicU64,
    abort: &AtomicBool,
) -> Result<WorkerSummary> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(worker as u64 + 1);

    let lambda = config.resolved_lambda() as f32;
    let alpha = config.learning_rate as f32;
    let m = config.negatives;
    let k = config.walk_order;
    let dist = config.negative_dist;
    let mut walk_buf: Vec<VertexId> = Vec::with_capacity(k);
    let mut touched: SmallVec<[u32; 16]> = SmallVec::new();

    let mut ema = f64::NAN;
    let mut since_flush = 0u64;
    let mut next_progress = config.progress_every.unwrap_or(u64::MAX);

    for t in 0..share {
        if abort.load(Ordering::Relaxed) {
            break;
        }
        let lr = match config.lr_schedule {
            LrSchedule::Constant => alpha,
            // Linear decay to alpha/10 over this worker's share, which tracks
            // global progress without cross-thread coordination.
            LrSchedule::Linear => alpha * (1.0 - 0.9 * t as f32 / share.max(1) as f32),
        };

        // Safety: Hogwild contract — rows may be concurrently updated by
        // other workers; lost updates are tolerated.
        let triplet = unsafe { cell.as_mut() };

        let (user, item) = graph.sample_edge(&mut rng);
        touched.clear();
        let ds_loss = match config.loss {
            LossVariant::Rate => {
                ds_rate_step(graph, triplet, user, item, m, dist, lr, &mut touched, &mut rng)
            }
            LossVariant::Rank => {
                ds_rank_step(graph, triplet, user, item, dist, lr, &mut touched, &mut rng)
            }
        };
        decay_rows(&mut triplet.vertex, &touched, lr * config.l2_reg as f32);

        let mut step_loss = ds_loss;
        if lambda > 0.0 && k >= 2 {
            let ns = ns_step(graph, triplet, user, k, m, dist, lr, lambda, &mut walk_buf, &mut rng)
                + ns_step(graph, triplet, item, k, m, dist, lr, lambda, &mut walk_buf, &mut rng);
            step_loss += lambda as f64 * ns;
            let reg = lr * config.l2_reg as f32;
            loss::l2_decay(triplet.vertex.row_mut(user.idx()), reg);
            loss::l2_decay(triplet.vertex.row_mut(item.idx()), reg);
        }

        if !step_loss.is_finite() {
            abort.store(true, Ordering::Relaxed);
            done.fetch_add(since_flush + 1, Ordering::Relaxed);
            return Err(Error::NonFinite {
                step: done.load(Ordering::Relaxed),
            });
        }

        ema = if ema.is_nan() {
            step_loss
        } else {
            EMA_DECAY * ema + (1.0 - EMA_DECAY) * step_loss
        };

        since_flush += 1;
        if since_flush >= PROGRESS_BATCH {
            done.fetch_add(since_flush, Ordering::Relaxed);
            since_flush = 0;
        }
        if worker == 0 && t + 1 >= next_progress {
            next_progress += config.progress_every.unwrap_or(u64::MAX);
            let global = done.load(Ordering::Relaxed) + since_flush;
            let report = StepReport {
                samples_done: global,
                samples_total: total,
                loss_ema: ema,
                elapsed_secs: started.elapsed().as_secs_f64(),
            };
            eprintln!("{report}");
        }
    }
    done.fetch_add(since_flush, Ordering::Relaxed);
    Ok(WorkerSummary {
        samples: share,
        loss_ema: if ema.is_nan() { 0.0 } else { ema },
    })
}

fn mark(touched: &mut SmallVec<[u32; 16]>, v: VertexId) {
    if !touched.contains(&v.0) {
        touched.push(v.0);
    }
}

fn decay_rows(vertex: &mut Embedding, touched: &[u32], amount: f32) {
    for &v in touched {
        loss::l2_decay(vertex.row_mut(v as usize), amount);
    }
}

/// Two distinct rows of one matrix, via raw pointers (ids must differ).
#[inline]
fn two_rows(matrix: &mut Embedding, a: usize, b: usize) -> (&mut [f32], &mut [f32]) {
    debug_assert_ne!(a, b);
    let dim = matrix.dim();
    unsafe {
        (
            std::slice::from_raw_parts_mut(matrix.row_ptr(a), dim),
            std::slice::from_raw_parts_mut(matrix.row_ptr(b), dim),
        )
    }
}

/// Rating-variant direct update: positive pair plus `m` sampled negative
/// pairs. Returns the step's direct loss; records touched vertex rows.
#[allow(clippy::too_many_arguments)]
fn ds_rate_step<R: Rng + ?Sized>(
    graph: &BipartiteGraph,
    triplet: &mut EmbeddingTriplet,
    user: VertexId,
    item: VertexId,
    m: usize,
    dist: NegativeDistribution,
    lr: f32,
    touched: &mut SmallVec<[u32; 16]>,
    rng: &mut R,
) -> f64 {
    let mut total = 0.0f64;
    {
        let (u_row, i_row) = two_rows(&mut triplet.vertex, user.idx(), item.idx());
        let (l, c) = loss::positive_pair(u_row, i_row);
        if !l.is_finite() {
            return f64::INFINITY;
        }
        loss::apply_pair(u_row, i_row, c, lr);
        total += l as f64;
    }
    mark(touched, user);
    mark(touched, item);

    for _ in 0..m {
        let neg_user = graph.sample_negative(Side::User, dist, rng);
        let neg_item = graph.sample_negative(Side::Item, dist, rng);
        let (nu_row, ni_row) = two_rows(&mut triplet.vertex, neg_user.idx(), neg_item.idx());
        let (l, c) = loss::negative_pair(nu_row, ni_row);
        if !l.is_finite() {
            return f64::INFINITY;
        }
        loss::apply_pair(nu_row, ni_row, c, lr);
        total += l as f64;
        mark(touched, neg_user);
        mark(touched, neg_item);
    }
    total
}

/// Ranking-variant direct update: one preference triple with one sampled
/// negative item. A negative equal to the positive cancels exactly and only
/// the decay applies.
#[allow(clippy::too_many_arguments)]
fn ds_rank_step<R: Rng + ?Sized>(
    graph: &BipartiteGraph,
    triplet: &mut EmbeddingTriplet,
    user: VertexId,
    pos_item: VertexId,
    dist: NegativeDistribution,
    lr: f32,
    touched: &mut SmallVec<[u32; 16]>,
    rng: &mut R,
) -> f64 {
    let neg_item = graph.sample_negative(Side::Item, dist, rng);
    mark(touched, user);
    mark(touched, pos_item);
    mark(touched, neg_item);
    if neg_item == pos_item {
        // σ(0): the gradients on the triple cancel termwise.
        return core::f64::consts::LN_2;
    }
    let dim = triplet.vertex.dim();
    let (u_row, p_row, n_row) = unsafe {
        (
            std::slice::from_raw_parts_mut(triplet.vertex.row_ptr(user.idx()), dim),
            std::slice::from_raw_parts_mut(triplet.vertex.row_ptr(pos_item.idx()), dim),
            std::slice::from_raw_parts_mut(triplet.vertex.row_ptr(neg_item.idx()), dim),
        )
    };
    let (l, c) = loss::rank_triple(u_row, p_row, n_row);
    if !l.is_finite() {
        return f64::INFINITY;
    }
    loss::apply_rank(u_row, p_row, n_row, c, lr);
    l as f64
}

/// Neighborhood update for one walk from `center`: a positive pair against
/// the center-side context matrix for every same-side context in the walk,
/// each with `m` own-side negatives. Gradients are scaled by `lambda`.
/// Returns the unscaled neighborhood loss.
#[allow(clippy::too_many_arguments)]
fn ns_step<R: Rng + ?Sized>(
    graph: &BipartiteGraph,
    triplet: &mut EmbeddingTriplet,
    center: VertexId,
    k: usize,
    m: usize,
    dist: NegativeDistribution,
    lr: f32,
    lambda: f32,
    walk_buf: &mut Vec<VertexId>,
    rng: &mut R,
) -> f64 {
    let side = graph.side(center);
    graph.walk_into(center, k, rng, walk_buf);
    let rate = lr * lambda;
    let dim = triplet.vertex.dim();
    let center_row =
        unsafe { std::slice::from_raw_parts_mut(triplet.vertex.row_ptr(center.idx()), dim) };
    let contexts = match side {
        Side::User => &mut triplet.user_context,
        Side::Item => &mut triplet.item_context,
    };

    let mut total = 0.0f64;
    // Walks alternate sides: same-side contexts sit at offsets 2, 4, ...,
    // i.e. odd indices of the returned buffer.
    for j in (1..walk_buf.len()).step_by(2) {
        let ctx = walk_buf[j];
        debug_assert_eq!(graph.side(ctx), side, "context must share the center's side");
        {
            let ctx_row = contexts.row_mut(ctx.idx());
            let (l, c) = loss::positive_pair(center_row, ctx_row);
            if !l.is_finite() {
                return f64::INFINITY;
            }
            loss::apply_pair(center_row, ctx_row, c, rate);
            total += l as f64;
        }
        for _ in 0..m {
            let neg = graph.sample_negative(side, dist, rng);
            let neg_row = contexts.row_mut(neg.idx());
            let (l, c) = loss::negative_pair(center_row, neg_row);
            if !l.is_finite() {
                return f64::INFINITY;
            }
            loss::apply_pair(center_row, neg_row, c, rate);
            total += l as f64;
        }
    }
    total
}
