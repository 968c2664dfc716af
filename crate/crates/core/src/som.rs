//! Self-organizing map with graph-distance neighbourhoods.
//!
//! The classical SOM update runs unchanged; the only twist is that neuron
//! proximity is measured in hops on an arbitrary neighbourhood graph
//! rather than on the plane. Each learning step pulls the best matching
//! unit (BMU) and its graph neighbours towards the input with a Gaussian
//! rate in hop distance, with the usual decaying learning rate and radius.
//!
//! Node-failure noise deactivates a uniformly drawn neuron subset each
//! step: deactivated neurons stay eligible as BMU but are protected from
//! the weight update.

use std::fs;
use std::path::Path;

use rand::Rng as _;

use crate::data::Dataset;
use crate::distance::{DistanceField, UNREACHABLE};
use crate::error::{Error, Result};
use crate::seeds::Rng;

/// Label byte marking a neuron that has not been labelled yet.
pub const LABEL_UNSET: u8 = 255;

const CLASS_COUNT: usize = 10;

/// Neuron weights, labels and the training step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct SomState {
    n: usize,
    dim: usize,
    weights: Vec<f64>,
    labels: Vec<u8>,
    step: u64,
}

/// Decay laws for the learning rate and the neighbourhood radius.
///
/// Both decay exponentially in `t/total_steps`:
/// `eta(t) = eta0 * (eta_final/eta0)^(t/T)`, and the radius is the floor of
/// the same interpolation from `sigma0` down to `max(sigma_final, 0.5)`.
/// Flooring is what produces the piecewise-constant radius plateaus that
/// the training curves synchronize to.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Schedule {
    eta0: f64,
    eta_final: f64,
    sigma0: f64,
    sigma_final: f64,
    total_steps: u64,
}

impl Schedule {
    pub fn new(
        eta0: f64,
        eta_final: f64,
        sigma0: f64,
        sigma_final: f64,
        total_steps: u64,
    ) -> Result<Self> {
        if !(eta0 >= eta_final && eta_final > 0.0) {
            return Err(Error::invalid(format!(
                "learning rates must satisfy eta0 >= eta_final > 0 (got {eta0}, {eta_final})"
            )));
        }
        if !(sigma0 >= sigma_final && sigma_final >= 0.0) {
            return Err(Error::invalid(format!(
                "radii must satisfy sigma0 >= sigma_final >= 0 (got {sigma0}, {sigma_final})"
            )));
        }
        if total_steps == 0 {
            return Err(Error::invalid("total_steps must be at least 1"));
        }
        Ok(Schedule {
            eta0,
            eta_final,
            sigma0,
            sigma_final,
            total_steps,
        })
    }

    pub fn total_steps(&self) -> u64 {
        self.total_steps
    }

    pub fn eta0(&self) -> f64 {
        self.eta0
    }

    pub fn sigma0(&self) -> f64 {
        self.sigma0
    }

    /// Learning rate and integer radius at step `t` (`0 <= t < total_steps`).
    pub fn at(&self, t: u64) -> Result<(f64, u32)> {
        if t >= self.total_steps {
            return Err(Error::invalid(format!(
                "step {t} outside schedule of {} steps",
                self.total_steps
            )));
        }
        let x = t as f64 / self.total_steps as f64;
        let eta = self.eta0 * (self.eta_final / self.eta0).powf(x);
        let radius = if self.sigma0 <= 0.0 {
            0
        } else {
            let sf = self.sigma_final.max(0.5);
            (self.sigma0 * (sf / self.sigma0).powf(x)).floor() as u32
        };
        Ok((eta, radius))
    }
}

/// Fraction of neurons deactivated at each learning step.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NoiseModel {
    nu: f64,
}

impl NoiseModel {
    pub fn none() -> Self {
        NoiseModel { nu: 0.0 }
    }

    pub fn new(nu: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&nu) {
            return Err(Error::invalid(format!("noise level {nu} not in [0, 1]")));
        }
        Ok(NoiseModel { nu })
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// Number of neurons deactivated per step for a map of `n` neurons.
    pub fn deactivated_count(&self, n: usize) -> usize {
        (n as f64 * self.nu).floor() as usize
    }
}

/// One fitness reading from an evaluation hook during training.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitnessSample {
    /// Number of learning steps completed when the reading was taken.
    pub step: u64,
    pub fitness: f64,
}

/// Options for a training run.
#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub schedule: Schedule,
    pub noise: NoiseModel,
    /// Restrict the BMU search to active neurons while noise is on.
    /// Off by default: deactivated neurons are protected from update but
    /// stay eligible as BMU.
    pub bmu_among_active_only: bool,
}

impl TrainOptions {
    pub fn new(schedule: Schedule) -> Self {
        TrainOptions {
            schedule,
            noise: NoiseModel::none(),
            bmu_among_active_only: false,
        }
    }

    pub fn with_noise(mut self, noise: NoiseModel) -> Self {
        self.noise = noise;
        self
    }
}

impl SomState {
    /// Fresh map with i.i.d. uniform `[0, 1]` weights, no labels, step 0.
    pub fn init(n: usize, dim: usize, rng: &mut Rng) -> Result<Self> {
        if n == 0 || dim == 0 {
            return Err(Error::invalid("map size and dimension must be positive"));
        }
        let weights = (0..n * dim).map(|_| rng.gen::<f64>()).collect();
        Ok(SomState {
            n,
            dim,
            weights,
            labels: vec![LABEL_UNSET; n],
            step: 0,
        })
    }

    pub fn n_neurons(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    #[inline]
    pub fn weight(&self, i: usize) -> &[f64] {
        &self.weights[i * self.dim..(i + 1) * self.dim]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Raw label byte, [`LABEL_UNSET`] when the neuron is unlabelled.
    pub fn label_byte(&self, i: usize) -> u8 {
        self.labels[i]
    }

    pub fn label(&self, i: usize) -> Option<u8> {
        match self.labels[i] {
            LABEL_UNSET => None,
            l => Some(l),
        }
    }

    pub fn all_labelled(&self) -> bool {
        self.labels.iter().all(|&l| l != LABEL_UNSET)
    }

    /// Best matching unit among `candidates`: the candidate with minimal
    /// squared Euclidean distance to `input`, ties broken by lowest index.
    /// The result does not depend on candidate order.
    pub fn find_bmu(
        &self,
        input: &[f64],
        candidates: impl IntoIterator<Item = usize>,
    ) -> Result<usize> {
        if input.len() != self.dim {
            return Err(Error::invalid(format!(
                "input dimension {} does not match map dimension {}",
                input.len(),
                self.dim
            )));
        }
        let mut best: Option<(f64, usize)> = None;
        for i in candidates {
            let bound = match best {
                // A candidate whose partial sum already exceeds the current
                // minimum can never win (nor tie at a lower index, since
                // ascending ties keep the first holder).
                Some((bd, bi)) if i > bi => bd,
                _ => f64::INFINITY,
            };
            if let Some(d) = sq_dist_within(self.weight(i), input, bound) {
                match best {
                    None => best = Some((d, i)),
                    Some((bd, bi)) => {
                        if d < bd || (d == bd && i < bi) {
                            best = Some((d, i));
                        }
                    }
                }
            }
        }
        best.map(|(_, i)| i)
            .ok_or_else(|| Error::invalid("empty BMU candidate set"))
    }

    /// One learning step: select the BMU among *all* neurons, then update
    /// every active neuron within `3 * radius` hops of it with rate
    /// `eta * exp(-d^2 / (2 radius^2))` (for radius 0, only the BMU, with
    /// rate `eta`). Deactivated neurons are untouched. Increments `step`.
    pub fn learn_step(
        &mut self,
        input: &[f64],
        df: &DistanceField,
        eta: f64,
        radius: u32,
        active: &[bool],
    ) -> Result<()> {
        let bmu = self.find_bmu(input, 0..self.n)?;
        self.update_from_bmu(bmu, input, df, eta, radius, active)
    }

    /// The update half of [`SomState::learn_step`], with the BMU chosen by
    /// the caller.
    pub fn update_from_bmu(
        &mut self,
        bmu: usize,
        input: &[f64],
        df: &DistanceField,
        eta: f64,
        radius: u32,
        active: &[bool],
    ) -> Result<()> {
        if input.len() != self.dim {
            return Err(Error::invalid(format!(
                "input dimension {} does not match map dimension {}",
                input.len(),
                self.dim
            )));
        }
        if active.len() != self.n || df.n_nodes() != self.n {
            return Err(Error::invalid("mask or distance field size mismatch"));
        }

        // Rate depends only on the hop count; tabulate once per step.
        let cutoff = 3 * radius;
        let rates: Vec<f64> = if radius == 0 {
            vec![eta]
        } else {
            let denom = 2.0 * (radius as f64) * (radius as f64);
            (0..=cutoff)
                .map(|d| {
                    let d = d as f64;
                    eta * (-d * d / denom).exp()
                })
                .collect()
        };

        let row = df.row(bmu);
        for i in 0..self.n {
            if !active[i] {
                continue;
            }
            let d = row[i];
            if d == UNREACHABLE || d > cutoff {
                continue;
            }
            let rate = rates[d as usize];
            let w = &mut self.weights[i * self.dim..(i + 1) * self.dim];
            for (wj, xj) in w.iter_mut().zip(input) {
                *wj += rate * (xj - *wj);
            }
        }
        self.step += 1;
        Ok(())
    }

    /// Label every neuron from a labelled training set: the class it wins
    /// most often as BMU over one pass (ties to the lowest class id).
    /// Neurons that never win get the class whose samples are closest on
    /// average in L2.
    pub fn label_neurons(&mut self, train: &Dataset) -> Result<()> {
        if train.is_empty() {
            return Err(Error::invalid("cannot label from an empty training set"));
        }
        if train.dim() != self.dim {
            return Err(Error::invalid(format!(
                "training set dimension {} does not match map dimension {}",
                train.dim(),
                self.dim
            )));
        }
        let mut wins = vec![[0u32; CLASS_COUNT]; self.n];
        for (v, class) in train.iter() {
            let bmu = self.find_bmu(v, 0..self.n)?;
            wins[bmu][class as usize] += 1;
        }

        let mut never_bmu = Vec::new();
        for (i, neuron_wins) in wins.iter().enumerate() {
            let total: u32 = neuron_wins.iter().sum();
            if total == 0 {
                never_bmu.push(i);
                continue;
            }
            let mut best_class = 0usize;
            for c in 1..CLASS_COUNT {
                if neuron_wins[c] > neuron_wins[best_class] {
                    best_class = c;
                }
            }
            self.labels[i] = best_class as u8;
        }

        if !never_bmu.is_empty() {
            // Mean L2 distance from the neuron to every sample of each class.
            let mut sums = vec![[0.0f64; CLASS_COUNT]; never_bmu.len()];
            let mut counts = [0u32; CLASS_COUNT];
            for (v, class) in train.iter() {
                counts[class as usize] += 1;
                for (slot, &i) in never_bmu.iter().enumerate() {
                    sums[slot][class as usize] += sq_dist(self.weight(i), v).sqrt();
                }
            }
            for (slot, &i) in never_bmu.iter().enumerate() {
                let mut best: Option<(f64, usize)> = None;
                for c in 0..CLASS_COUNT {
                    if counts[c] == 0 {
                        continue;
                    }
                    let mean = sums[slot][c] / counts[c] as f64;
                    match best {
                        None => best = Some((mean, c)),
                        Some((bm, _)) if mean < bm => best = Some((mean, c)),
                        _ => {}
                    }
                }
                self.labels[i] = best.expect("training set is non-empty").1 as u8;
            }
        }
        Ok(())
    }

    /// Misclassification rate over a test set: each sample takes its BMU's
    /// label; `F = n_err / n_test`. Every neuron must be labelled.
    pub fn evaluate(&self, test: &Dataset) -> Result<f64> {
        if test.is_empty() {
            return Err(Error::Precondition("empty test set".into()));
        }
        if !self.all_labelled() {
            return Err(Error::Precondition(
                "evaluate called with unlabelled neurons".into(),
            ));
        }
        let mut errors = 0usize;
        for (v, class) in test.iter() {
            let bmu = self.find_bmu(v, 0..self.n)?;
            if self.labels[bmu] != class {
                errors += 1;
            }
        }
        Ok(errors as f64 / test.len() as f64)
    }

    /// Serialize to the checkpoint format: `n`, `dim`, `step` as
    /// little-endian u64, row-major weights as little-endian f64, then one
    /// label byte per neuron (255 = unset).
    pub fn to_checkpoint_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(24 + self.weights.len() * 8 + self.n);
        out.extend_from_slice(&(self.n as u64).to_le_bytes());
        out.extend_from_slice(&(self.dim as u64).to_le_bytes());
        out.extend_from_slice(&self.step.to_le_bytes());
        for w in &self.weights {
            out.extend_from_slice(&w.to_le_bytes());
        }
        out.extend_from_slice(&self.labels);
        out
    }

    pub fn from_checkpoint_bytes(bytes: &[u8]) -> Result<SomState> {
        let take_u64 = |off: usize| -> Result<u64> {
            bytes
                .get(off..off + 8)
                .map(|b| u64::from_le_bytes(b.try_into().unwrap()))
                .ok_or_else(|| Error::CheckpointParse("truncated header".into()))
        };
        let n = take_u64(0)? as usize;
        let dim = take_u64(8)? as usize;
        let step = take_u64(16)?;
        if n == 0 || dim == 0 {
            return Err(Error::CheckpointParse("zero-sized map".into()));
        }
        let expected = 24 + n * dim * 8 + n;
        if bytes.len() != expected {
            return Err(Error::CheckpointParse(format!(
                "expected {expected} bytes, found {}",
                bytes.len()
            )));
        }
        let mut weights = Vec::with_capacity(n * dim);
        let mut off = 24;
        for _ in 0..n * dim {
            weights.push(f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap()));
            off += 8;
        }
        let labels = bytes[off..].to_vec();
        if labels.iter().any(|&l| l > 9 && l != LABEL_UNSET) {
            return Err(Error::CheckpointParse("label byte outside 0..=9 / 255".into()));
        }
        Ok(SomState {
            n,
            dim,
            weights,
            labels,
            step,
        })
    }

    pub fn save_checkpoint(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_checkpoint_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<SomState> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        SomState::from_checkpoint_bytes(&bytes)
    }
}

/// Run a full training schedule.
///
/// Per step: draw one training sample uniformly with replacement, draw
/// `floor(n * nu)` deactivated neurons uniformly without replacement (in
/// that order, so runs are reproducible), apply one learning step. Whenever
/// the completed-step count appears in `eval_hooks`, label the map from the
/// training set with all neurons reactivated and record the
/// misclassification rate on `test_set`. Hook value 0 evaluates the
/// untrained map.
pub fn train(
    som: &mut SomState,
    df: &DistanceField,
    train_set: &Dataset,
    test_set: Option<&Dataset>,
    opts: &TrainOptions,
    eval_hooks: &[u64],
    rng: &mut Rng,
) -> Result<Vec<FitnessSample>> {
    if train_set.is_empty() {
        return Err(Error::invalid("training set must be non-empty"));
    }
    if train_set.dim() != som.dim() {
        return Err(Error::invalid(format!(
            "training set dimension {} does not match map dimension {}",
            train_set.dim(),
            som.dim()
        )));
    }
    let total = opts.schedule.total_steps();
    let mut hooks: Vec<u64> = eval_hooks.to_vec();
    hooks.sort_unstable();
    hooks.dedup();
    if let Some(&last) = hooks.last() {
        if last > total {
            return Err(Error::invalid(format!(
                "evaluation hook {last} beyond schedule of {total} steps"
            )));
        }
    }
    if !hooks.is_empty() && test_set.is_none() {
        return Err(Error::invalid("evaluation hooks require a test set"));
    }

    let n = som.n_neurons();
    let deactivate = opts.noise.deactivated_count(n);
    let mut active = vec![true; n];
    let mut trace = Vec::with_capacity(hooks.len());
    let mut next_hook = hooks.iter().copied().peekable();

    let mut run_hook = |som: &mut SomState, completed: u64| -> Result<()> {
        som.label_neurons(train_set)?;
        let fitness = som.evaluate(test_set.expect("checked above"))?;
        trace.push(FitnessSample {
            step: completed,
            fitness,
        });
        Ok(())
    };

    if next_hook.peek() == Some(&0) {
        next_hook.next();
        run_hook(som, 0)?;
    }

    for t in 0..total {
        let (eta, radius) = opts.schedule.at(t)?;
        let sample = rng.gen_range(0..train_set.len());
        if deactivate > 0 {
            active.fill(true);
            for i in rand::seq::index::sample(rng, n, deactivate) {
                active[i] = false;
            }
        }
        let input = train_set.vector(sample);
        if opts.bmu_among_active_only && deactivate > 0 {
            let bmu = som.find_bmu(input, (0..n).filter(|&i| active[i]))?;
            som.update_from_bmu(bmu, input, df, eta, radius, &active)?;
        } else {
            som.learn_step(input, df, eta, radius, &active)?;
        }
        if next_hook.peek() == Some(&(t + 1)) {
            next_hook.next();
            run_hook(som, t + 1)?;
        }
    }
    Ok(trace)
}

/// Squared Euclidean distance. Four independent accumulators keep the
/// reduction order fixed while letting the loop vectorize.
#[inline]
pub fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    for (ca, cb) in a.chunks_exact(4).zip(b.chunks_exact(4)) {
        for lane in 0..4 {
            let d = ca[lane] - cb[lane];
            acc[lane] += d * d;
        }
    }
    let mut tail = 0.0;
    let rem = a.len() & !3;
    for (x, y) in a[rem..].iter().zip(&b[rem..]) {
        let d = x - y;
        tail += d * d;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// [`sq_dist`], abandoning early with `None` once the partial sum strictly
/// exceeds `bound`. The accumulation order matches `sq_dist` exactly, so a
/// `Some` result is bitwise identical to the full computation.
#[inline]
fn sq_dist_within(a: &[f64], b: &[f64], bound: f64) -> Option<f64> {
    const BLOCK: usize = 32; // 8 chunks of 4 between bound checks
    let mut acc = [0.0f64; 4];
    let blocks = a.len() / BLOCK;
    for blk in 0..blocks {
        let start = blk * BLOCK;
        let (ba, bb) = (&a[start..start + BLOCK], &b[start..start + BLOCK]);
        for (ca, cb) in ba.chunks_exact(4).zip(bb.chunks_exact(4)) {
            for lane in 0..4 {
                let d = ca[lane] - cb[lane];
                acc[lane] += d * d;
            }
        }
        if (acc[0] + acc[1]) + (acc[2] + acc[3]) > bound {
            return None;
        }
    }
    let rem = blocks * BLOCK;
    for (ca, cb) in a[rem..].chunks_exact(4).zip(b[rem..].chunks_exact(4)) {
        for lane in 0..4 {
            let d = ca[lane] - cb[lane];
            acc[lane] += d * d;
        }
    }
    let mut tail = 0.0;
    let rem = a.len() & !3;
    for (x, y) in a[rem..].iter().zip(&b[rem..]) {
        let d = x - y;
        tail += d * d;
    }
    let total = (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail;
    (total <= bound).then_some(total)
}
