//! Spiking multi-label classifier with time-varying Gaussian synapses.
//!
//! Every output zone is read out from a pair of spiking neurons: the zone is
//! predicted assigned iff the pair's first neuron fires strictly before the
//! second. Synaptic weights are sums of Gaussian bumps evaluated at the
//! presynaptic spike time, so a weight update is just one more bump per
//! spiking channel.
//!
//! Neuron indexing: pair `j` (0-based) reads neurons `2j` (assigned polarity)
//! and `2j + 1` (unassigned polarity).

use std::fmt::Write as _;

use crate::encoding::SpikePattern;
use crate::error::{Error, Result};
use crate::scalar::{r64, rus, Real};
use crate::LabelVector;

/// Bumps below this magnitude are dropped from weights.
const AMP_EPS: f64 = 1e-12;

/// All training constants. The reference values are deliberately plain
/// defaults; everything is overridable.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainingConfig<S> {
    /// Simulation interval T (seconds); spike times live in [0, T).
    pub t_interval: S,
    /// Ideal firing time T_d.
    pub t_ideal: S,
    /// Margin T_m required between the two neurons of a pair.
    pub t_margin: S,
    /// Spike response time constant.
    pub tau: S,
    /// Gaussian bump width (shared network-wide).
    pub sigma: S,
    /// Maximum STDP weight changes.
    pub a_plus: S,
    pub a_minus: S,
    /// STDP time constants.
    pub tau_plus: S,
    pub tau_minus: S,
    pub learning_rate: S,
    pub epochs: usize,
    /// First-spike search grid resolution over [0, T].
    pub grid_points: usize,
}

impl<S: Real> Default for TrainingConfig<S> {
    fn default() -> Self {
        let t = r64(8.0);
        TrainingConfig {
            t_interval: t,
            t_ideal: t * r64(0.75),
            t_margin: t * r64(0.025),
            tau: t,
            sigma: t * r64(0.4),
            a_plus: S::one(),
            a_minus: S::zero(),
            tau_plus: t,
            tau_minus: t,
            learning_rate: r64(0.1),
            epochs: 40,
            grid_points: 1000,
        }
    }
}

impl<S: Real> TrainingConfig<S> {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_ideal > S::zero() && self.t_ideal < self.t_interval) {
            return Err(Error::Config(format!(
                "need 0 < t_ideal < t_interval, got {} vs {}",
                self.t_ideal, self.t_interval
            )));
        }
        if self.t_margin < S::zero() {
            return Err(Error::Config("t_margin must be nonnegative".into()));
        }
        if self.t_ideal + self.t_margin > self.t_interval {
            return Err(Error::Config(
                "t_ideal + t_margin must not exceed t_interval".into(),
            ));
        }
        if self.tau <= S::zero() || self.sigma <= S::zero() {
            return Err(Error::Config("tau and sigma must be positive".into()));
        }
        if self.tau_plus <= S::zero() || self.tau_minus <= S::zero() {
            return Err(Error::Config("STDP time constants must be positive".into()));
        }
        if self.learning_rate <= S::zero() {
            return Err(Error::Config("learning rate must be positive".into()));
        }
        if self.grid_points < 2 {
            return Err(Error::Config("need at least two grid points".into()));
        }
        Ok(())
    }
}

/// Spike response kernel: `(s/tau) * exp(1 - s/tau)` for s >= 0, else 0.
/// Peaks at exactly 1 when `s == tau`.
pub fn epsilon<S: Real>(s: S, tau: S) -> S {
    if s <= S::zero() {
        return S::zero();
    }
    let x = s / tau;
    x * (S::one() - x).exp()
}

/// STDP kernel: `A+ * exp(-s/tau+)` for s >= 0, `-A- * exp(s/tau-)` for s < 0.
pub fn stdp_dw<S: Real>(s: S, cfg: &TrainingConfig<S>) -> S {
    if s >= S::zero() {
        cfg.a_plus * (-s / cfg.tau_plus).exp()
    } else {
        -cfg.a_minus * (s / cfg.tau_minus).exp()
    }
}

/// Fractional contribution of every channel toward a spike at `t_ref`:
/// `u_i = dw(t_ref - t_i) / sum_k dw(t_ref - t_k)` over spiking channels,
/// zero elsewhere.
pub fn fractional_contribution<S: Real>(
    t_ref: S,
    pattern: &SpikePattern<S>,
    cfg: &TrainingConfig<S>,
) -> Result<Vec<S>> {
    if pattern.is_silent() {
        return Err(Error::DegenerateInput);
    }
    let mut u = vec![S::zero(); pattern.num_channels()];
    let mut denom = S::zero();
    for (i, t) in pattern.spikes() {
        let dw = stdp_dw(t_ref - t, cfg);
        u[i] = dw;
        denom += dw;
    }
    if denom == S::zero() {
        return Err(Error::DegenerateUpdate(format!(
            "zero STDP normalization at t_ref = {t_ref}"
        )));
    }
    for v in &mut u {
        *v /= denom;
    }
    Ok(u)
}

/// Contribution vector aligned to a sorted spike slice (training fast path).
fn fractional_over_spikes<S: Real>(
    t_ref: S,
    spikes: &[(usize, S)],
    cfg: &TrainingConfig<S>,
) -> Option<Vec<S>> {
    let mut u: Vec<S> = spikes
        .iter()
        .map(|&(_, t)| stdp_dw(t_ref - t, cfg))
        .collect();
    let denom: S = u.iter().copied().sum();
    if denom == S::zero() {
        return None;
    }
    for v in &mut u {
        *v /= denom;
    }
    Some(u)
}

/// Reference potential `V(t) = sum_i u_i(t) * eps(t - t_i)` used by the
/// error term of the weight update.
fn reference_potential<S: Real>(t: S, spikes: &[(usize, S)], u: &[S], tau: S) -> S {
    spikes
        .iter()
        .zip(u)
        .map(|(&(_, t_i), &u_i)| u_i * epsilon(t - t_i, tau))
        .sum()
}

/// One Gaussian bump of a time-varying weight.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct Bump<S> {
    pub amplitude: S,
    pub center: S,
}

/// Time-varying synaptic weight: a sum of Gaussian bumps with shared width.
/// Bumps are kept sorted by center; equal centers merge exactly.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct TimeVaryingWeight<S> {
    bumps: Vec<Bump<S>>,
}

impl<S: Real> TimeVaryingWeight<S> {
    pub fn new() -> Self {
        TimeVaryingWeight { bumps: Vec::new() }
    }

    pub fn bumps(&self) -> &[Bump<S>] {
        &self.bumps
    }

    /// `w(t) = sum bumps amplitude * exp(-(t - center)^2 / (2 sigma^2))`.
    pub fn value(&self, t: S, sigma: S) -> S {
        let two_sigma_sq = r64::<S>(2.0) * sigma * sigma;
        self.bumps
            .iter()
            .map(|b| {
                let d = t - b.center;
                b.amplitude * (-(d * d) / two_sigma_sq).exp()
            })
            .sum()
    }

    /// Add one bump; merges exactly with an existing bump at the same center
    /// and drops results below the amplitude floor.
    pub fn add_bump(&mut self, amplitude: S, center: S) {
        let eps = r64::<S>(AMP_EPS);
        match self
            .bumps
            .binary_search_by(|b| b.center.partial_cmp(&center).expect("finite centers"))
        {
            Ok(idx) => {
                let total = self.bumps[idx].amplitude + amplitude;
                if total.abs() < eps {
                    self.bumps.remove(idx);
                } else {
                    self.bumps[idx].amplitude = total;
                }
            }
            Err(idx) => {
                if amplitude.abs() >= eps {
                    self.bumps.insert(idx, Bump { amplitude, center });
                }
            }
        }
    }

    pub fn is_empty(&self) -> bool {
        self.bumps.is_empty()
    }
}

/// One spiking neuron: a time-varying weight per input channel and a fixed
/// firing threshold.
#[derive(Clone, Debug, PartialEq)]
pub struct SefronNeuron<S> {
    pub incoming: Vec<TimeVaryingWeight<S>>,
    pub theta: S,
}

/// Membrane potential at time `t`: weights are sampled at the presynaptic
/// spike times, the response kernel at the elapsed time.
pub fn membrane_potential<S: Real>(
    neuron: &SefronNeuron<S>,
    pattern: &SpikePattern<S>,
    t: S,
    cfg: &TrainingConfig<S>,
) -> S {
    pattern
        .spikes()
        .map(|(i, t_i)| neuron.incoming[i].value(t_i, cfg.sigma) * epsilon(t - t_i, cfg.tau))
        .sum()
}

/// Sampled weights per spike, sorted by (time, channel): the potential of a
/// fixed pattern only depends on these amplitudes.
fn spike_amps<S: Real>(
    neuron: &SefronNeuron<S>,
    pattern: &SpikePattern<S>,
    sigma: S,
) -> Vec<(S, S)> {
    let mut amps: Vec<(S, S)> = pattern
        .spikes()
        .map(|(i, t_i)| (t_i, neuron.incoming[i].value(t_i, sigma)))
        .filter(|&(_, a)| a != S::zero())
        .collect();
    amps.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite spike times"));
    amps
}

fn refine_crossing<S: Real>(theta: S, t_prev: S, v_prev: S, t_cur: S, v_cur: S) -> S {
    if v_cur > v_prev {
        let t = t_prev + (t_cur - t_prev) * (theta - v_prev) / (v_cur - v_prev);
        t.max(t_prev).min(t_cur)
    } else {
        t_cur
    }
}

/// Earliest time in `[0, T]` where the membrane potential reaches the
/// threshold, located on a uniform grid with one linear refinement.
pub fn first_spike_time<S: Real>(
    neuron: &SefronNeuron<S>,
    pattern: &SpikePattern<S>,
    cfg: &TrainingConfig<S>,
) -> Option<S> {
    let amps = spike_amps(neuron, pattern, cfg.sigma);
    if amps.is_empty() {
        return (neuron.theta <= S::zero()).then_some(S::zero());
    }
    let g = cfg.grid_points;
    let step = cfg.t_interval / rus(g - 1);
    let mut v_prev = S::zero();
    for gi in 0..g {
        let t = step * rus(gi);
        let v: S = amps
            .iter()
            .take_while(|&&(t_i, _)| t_i <= t)
            .map(|&(t_i, a)| a * epsilon(t - t_i, cfg.tau))
            .sum();
        if v >= neuron.theta {
            if gi == 0 {
                return Some(S::zero());
            }
            let t_prev = step * rus(gi - 1);
            return Some(refine_crossing(neuron.theta, t_prev, v_prev, t, v));
        }
        v_prev = v;
    }
    None
}

/// Pair readout: assigned iff the assigned-polarity neuron fires strictly
/// first; a missing spike counts as infinitely late.
pub fn label_from_times<S: Real>(assigned: Option<S>, unassigned: Option<S>) -> bool {
    match (assigned, unassigned) {
        (Some(a), Some(u)) => a < u,
        (Some(_), None) => true,
        (None, _) => false,
    }
}

/// Desired firing times when a positive zone was predicted unassigned
/// (escaped intruder case): pull the assigned neuron to the ideal time and
/// push the unassigned one at least a margin later. Missing spikes enter as T.
pub fn desired_times_escaped<S: Real>(
    t_assigned: Option<S>,
    t_unassigned: Option<S>,
    cfg: &TrainingConfig<S>,
) -> (S, S) {
    let ta = t_assigned.unwrap_or(cfg.t_interval);
    let tu = t_unassigned.unwrap_or(cfg.t_interval);
    let td_a = ta.min(cfg.t_ideal);
    let td_u = tu.max(td_a + cfg.t_margin);
    (td_a, td_u)
}

/// Mirror case: a negative zone was predicted assigned.
pub fn desired_times_incorrect<S: Real>(
    t_assigned: Option<S>,
    t_unassigned: Option<S>,
    cfg: &TrainingConfig<S>,
) -> (S, S) {
    let ta = t_assigned.unwrap_or(cfg.t_interval);
    let tu = t_unassigned.unwrap_or(cfg.t_interval);
    let td_u = tu.min(cfg.t_ideal);
    let td_a = ta.max(td_u + cfg.t_margin);
    (td_a, td_u)
}

/// Initialize one neuron from a pattern: each spiking channel gets one bump
/// of the channel's fractional contribution at the ideal time, and the
/// threshold is the reference potential at the ideal time.
pub fn init_neuron<S: Real>(
    pattern: &SpikePattern<S>,
    cfg: &TrainingConfig<S>,
) -> Result<SefronNeuron<S>> {
    let u = fractional_contribution(cfg.t_ideal, pattern, cfg)?;
    let mut incoming = vec![TimeVaryingWeight::new(); pattern.num_channels()];
    let mut theta = S::zero();
    for (i, t_i) in pattern.spikes() {
        incoming[i].add_bump(u[i], t_i);
        theta += u[i] * epsilon(cfg.t_ideal - t_i, cfg.tau);
    }
    if theta <= S::zero() {
        return Err(Error::DegenerateUpdate(format!(
            "nonpositive initial threshold {theta}"
        )));
    }
    Ok(SefronNeuron { incoming, theta })
}

/// Update the weights of one neuron so its first spike moves toward
/// `t_desired`: every spiking channel gains a Gaussian bump centered at its
/// spike time with amplitude `lambda * u_i(t_desired) * e`.
///
/// For a firing neuron the error compares the weight scales required at the
/// desired and actual firing times. A silent neuron carries no firing time
/// that could anchor that comparison, so its current scale is estimated
/// from the actual potential at the desired time instead, which drives the
/// potential toward the threshold and stops there.
pub fn apply_update<S: Real>(
    neuron: &mut SefronNeuron<S>,
    pattern: &SpikePattern<S>,
    t_desired: S,
    cfg: &TrainingConfig<S>,
) -> Result<()> {
    if t_desired <= S::zero() || t_desired > cfg.t_interval {
        return Err(Error::domain(format!(
            "desired firing time {t_desired} outside (0, {}]",
            cfg.t_interval
        )));
    }
    let spikes: Vec<(usize, S)> = pattern.spikes().collect();
    let t_hat = first_spike_time(neuron, pattern, cfg);
    let u_desired = fractional_contribution(t_desired, pattern, cfg)?;
    let v_desired: S = spikes
        .iter()
        .map(|&(i, t_i)| u_desired[i] * epsilon(t_desired - t_i, cfg.tau))
        .sum();
    if v_desired == S::zero() {
        return Err(Error::DegenerateUpdate(format!(
            "zero reference potential at t_desired = {t_desired}"
        )));
    }
    let e = match t_hat {
        Some(t_hat) => {
            let u_hat = fractional_over_spikes(t_hat, &spikes, cfg).ok_or_else(|| {
                Error::DegenerateUpdate(format!("zero STDP normalization at t_hat = {t_hat}"))
            })?;
            let v_hat = reference_potential(t_hat, &spikes, &u_hat, cfg.tau);
            if v_hat == S::zero() {
                return Err(Error::DegenerateUpdate(format!(
                    "zero reference potential at t_hat = {t_hat}"
                )));
            }
            neuron.theta / v_desired - neuron.theta / v_hat
        }
        None if t_desired >= cfg.t_interval => {
            // Silence already satisfies a desired time at the interval end.
            return Ok(());
        }
        None => {
            let v_now: S = spikes
                .iter()
                .map(|&(i, t_i)| {
                    neuron.incoming[i].value(t_i, cfg.sigma) * epsilon(t_desired - t_i, cfg.tau)
                })
                .sum();
            (neuron.theta - v_now) / v_desired
        }
    };
    for (i, t_i) in spikes {
        neuron.incoming[i].add_bump(cfg.learning_rate * u_desired[i] * e, t_i);
    }
    Ok(())
}

/// Per-epoch training trace.
#[derive(Clone, Debug)]
pub struct TrainTrace<S> {
    /// Fraction of (sample, zone) pairs mispredicted during each epoch's pass.
    pub epoch_errors: Vec<S>,
    /// Updates skipped because of degenerate reference potentials.
    pub skipped_updates: usize,
}

/// The full classifier: 2m input channels, 2m neurons, m paired outputs.
#[derive(Clone, Debug, PartialEq)]
pub struct SefronNetwork<S> {
    m: usize,
    neurons: Vec<SefronNeuron<S>>,
    config: TrainingConfig<S>,
}

/// A zone whose pairs could not be initialized from the training set for
/// one label polarity (no usable sample carried that label).
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct CoverageGap {
    /// 1-based zone index.
    pub zone: usize,
    /// The missing label polarity.
    pub label: bool,
}

/// Zones lacking a usable initialization sample per polarity.
pub fn coverage_gaps<S: Real>(
    m: usize,
    samples: &[(&SpikePattern<S>, &LabelVector)],
    config: &TrainingConfig<S>,
) -> Vec<CoverageGap> {
    let mut gaps = Vec::new();
    for zone in 0..m {
        for label in [true, false] {
            let usable = samples
                .iter()
                .filter(|(_, labels)| labels.get(zone) == label)
                .any(|(pattern, _)| init_neuron(pattern, config).is_ok());
            if !usable {
                gaps.push(CoverageGap {
                    zone: zone + 1,
                    label,
                });
            }
        }
    }
    gaps
}

impl<S: Real> SefronNetwork<S> {
    /// Initialize every pair from the training set: the assigned-polarity
    /// neuron of zone j from the first usable sample with label 1, the
    /// unassigned one from the first with label 0.
    ///
    /// A polarity with no usable sample (rare zones the expert never
    /// assigns) gets a permanently silent neuron, which encodes the
    /// constant prediction the data supports; `coverage_gaps` lists such
    /// zones for reporting.
    pub fn initialize(
        m: usize,
        samples: &[(&SpikePattern<S>, &LabelVector)],
        config: TrainingConfig<S>,
    ) -> Result<Self> {
        config.validate()?;
        if m == 0 {
            return Err(Error::Config("need at least one output zone".into()));
        }
        for (pattern, labels) in samples {
            if pattern.num_zones() != m || labels.len() != m {
                return Err(Error::Shape(format!(
                    "sample with {} zones / {} labels in an m = {m} network",
                    pattern.num_zones(),
                    labels.len()
                )));
            }
        }
        let silent = || SefronNeuron {
            incoming: vec![TimeVaryingWeight::new(); 2 * m],
            theta: S::infinity(),
        };
        let mut neurons = Vec::with_capacity(2 * m);
        for zone in 0..m {
            for want in [true, false] {
                let neuron = samples
                    .iter()
                    .filter(|(_, labels)| labels.get(zone) == want)
                    .find_map(|(pattern, _)| init_neuron(pattern, &config).ok())
                    .unwrap_or_else(silent);
                neurons.push(neuron);
            }
        }
        Ok(SefronNetwork { m, neurons, config })
    }

    pub fn num_zones(&self) -> usize {
        self.m
    }

    pub fn config(&self) -> &TrainingConfig<S> {
        &self.config
    }

    pub fn neurons(&self) -> &[SefronNeuron<S>] {
        &self.neurons
    }

    /// First spike times of the (assigned, unassigned) pair of every zone.
    pub fn pair_times(&self, pattern: &SpikePattern<S>) -> Vec<(Option<S>, Option<S>)> {
        assert_eq!(pattern.num_zones(), self.m, "pattern/network zone mismatch");
        (0..self.m)
            .map(|j| {
                (
                    first_spike_time(&self.neurons[2 * j], pattern, &self.config),
                    first_spike_time(&self.neurons[2 * j + 1], pattern, &self.config),
                )
            })
            .collect()
    }

    /// Deterministic multi-label readout.
    pub fn predict(&self, pattern: &SpikePattern<S>) -> LabelVector {
        LabelVector(
            self.pair_times(pattern)
                .into_iter()
                .map(|(a, u)| label_from_times(a, u))
                .collect(),
        )
    }

    /// Train on the sample set in fixed order for the configured number of
    /// epochs. Both neurons of every mispredicted pair are updated toward
    /// their desired firing times.
    pub fn train(&mut self, samples: &[(&SpikePattern<S>, &LabelVector)]) -> Result<TrainTrace<S>> {
        let mut ctx = TrainContext::build(self, samples)?;
        let mut trace = TrainTrace {
            epoch_errors: Vec::with_capacity(self.config.epochs),
            skipped_updates: 0,
        };
        if samples.is_empty() {
            return Err(Error::Config("cannot train on an empty sample set".into()));
        }
        for _ in 0..self.config.epochs {
            let mut mistakes = 0usize;
            for s_idx in 0..samples.len() {
                for zone in 0..self.m {
                    let t_a = ctx.first_spike(self, 2 * zone, s_idx);
                    let t_u = ctx.first_spike(self, 2 * zone + 1, s_idx);
                    let predicted = label_from_times(t_a, t_u);
                    let target = samples[s_idx].1.get(zone);
                    if predicted == target {
                        continue;
                    }
                    mistakes += 1;
                    let (td_a, td_u) = if target {
                        desired_times_escaped(t_a, t_u, &self.config)
                    } else {
                        desired_times_incorrect(t_a, t_u, &self.config)
                    };
                    for (neuron, t_d, t_hat) in
                        [(2 * zone, td_a, t_a), (2 * zone + 1, td_u, t_u)]
                    {
                        if !ctx.cached_update(self, neuron, s_idx, t_d, t_hat) {
                            trace.skipped_updates += 1;
                        }
                    }
                }
            }
            trace
                .epoch_errors
                .push(rus::<S>(mistakes) / rus(samples.len() * self.m));
        }
        Ok(trace)
    }

    /// Bit-exact text serialization.
    pub fn to_text(&self) -> String {
        let c = &self.config;
        let mut out = String::from("mlc-sefron-model v1\n");
        writeln!(out, "m={}", self.m).unwrap();
        writeln!(
            out,
            "config t_interval={} t_ideal={} t_margin={} tau={} sigma={} a_plus={} a_minus={} \
             tau_plus={} tau_minus={} learning_rate={} epochs={} grid_points={}",
            c.t_interval,
            c.t_ideal,
            c.t_margin,
            c.tau,
            c.sigma,
            c.a_plus,
            c.a_minus,
            c.tau_plus,
            c.tau_minus,
            c.learning_rate,
            c.epochs,
            c.grid_points
        )
        .unwrap();
        for (k, neuron) in self.neurons.iter().enumerate() {
            writeln!(out, "neuron {k} theta={}", neuron.theta).unwrap();
            for (ch, weight) in neuron.incoming.iter().enumerate() {
                if weight.is_empty() {
                    continue;
                }
                write!(out, "w {ch}").unwrap();
                for b in weight.bumps() {
                    write!(out, " {}@{}", b.amplitude, b.center).unwrap();
                }
                out.push('\n');
            }
        }
        out.push_str("end\n");
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next() != Some("mlc-sefron-model v1") {
            return Err(Error::parse("model", "missing model header"));
        }
        let m_line = lines.next().unwrap_or_default();
        let m: usize = m_line
            .strip_prefix("m=")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::parse("model", format!("bad m line: {m_line:?}")))?;
        let config_line = lines.next().unwrap_or_default();
        let config = parse_config::<S>(config_line)?;
        config.validate()?;

        let mut neurons: Vec<SefronNeuron<S>> = Vec::with_capacity(2 * m);
        for line in lines {
            if line == "end" {
                break;
            }
            if let Some(rest) = line.strip_prefix("neuron ") {
                let (idx, theta) = rest
                    .split_once(" theta=")
                    .ok_or_else(|| Error::parse("model", format!("bad neuron line: {line:?}")))?;
                let idx: usize = idx
                    .parse()
                    .map_err(|_| Error::parse("model", format!("bad neuron index: {idx:?}")))?;
                if idx != neurons.len() {
                    return Err(Error::parse("model", format!("neuron {idx} out of order")));
                }
                let theta: S = theta
                    .parse()
                    .map_err(|_| Error::parse("model", format!("bad theta: {theta:?}")))?;
                neurons.push(SefronNeuron {
                    incoming: vec![TimeVaryingWeight::new(); 2 * m],
                    theta,
                });
            } else if let Some(rest) = line.strip_prefix("w ") {
                let neuron = neurons
                    .last_mut()
                    .ok_or_else(|| Error::parse("model", "weight line before any neuron"))?;
                let mut parts = rest.split(' ');
                let ch: usize = parts
                    .next()
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| Error::parse("model", format!("bad weight line: {line:?}")))?;
                if ch >= 2 * m {
                    return Err(Error::parse("model", format!("channel {ch} out of range")));
                }
                for bump in parts {
                    let (amp, center) = bump.split_once('@').ok_or_else(|| {
                        Error::parse("model", format!("bad bump token: {bump:?}"))
                    })?;
                    let amplitude: S = amp
                        .parse()
                        .map_err(|_| Error::parse("model", format!("bad amplitude: {amp:?}")))?;
                    let center: S = center
                        .parse()
                        .map_err(|_| Error::parse("model", format!("bad center: {center:?}")))?;
                    neuron.incoming[ch].bumps.push(Bump { amplitude, center });
                }
            } else {
                return Err(Error::parse("model", format!("unexpected line: {line:?}")));
            }
        }
        if neurons.len() != 2 * m {
            return Err(Error::parse(
                "model",
                format!("expected {} neurons, found {}", 2 * m, neurons.len()),
            ));
        }
        Ok(SefronNetwork { m, neurons, config })
    }
}

fn parse_config<S: Real>(line: &str) -> Result<TrainingConfig<S>> {
    let body = line
        .strip_prefix("config ")
        .ok_or_else(|| Error::parse("model", "missing config line"))?;
    let mut cfg = TrainingConfig::<S>::default();
    for field in body.split(' ') {
        let (key, value) = field
            .split_once('=')
            .ok_or_else(|| Error::parse("model", format!("bad config field: {field:?}")))?;
        let scalar = |v: &str| -> Result<S> {
            v.parse()
                .map_err(|_| Error::parse("model", format!("bad config value: {v:?}")))
        };
        match key {
            "t_interval" => cfg.t_interval = scalar(value)?,
            "t_ideal" => cfg.t_ideal = scalar(value)?,
            "t_margin" => cfg.t_margin = scalar(value)?,
            "tau" => cfg.tau = scalar(value)?,
            "sigma" => cfg.sigma = scalar(value)?,
            "a_plus" => cfg.a_plus = scalar(value)?,
            "a_minus" => cfg.a_minus = scalar(value)?,
            "tau_plus" => cfg.tau_plus = scalar(value)?,
            "tau_minus" => cfg.tau_minus = scalar(value)?,
            "learning_rate" => cfg.learning_rate = scalar(value)?,
            "epochs" => {
                cfg.epochs = value
                    .parse()
                    .map_err(|_| Error::parse("model", format!("bad epochs: {value:?}")))?
            }
            "grid_points" => {
                cfg.grid_points = value
                    .parse()
                    .map_err(|_| Error::parse("model", format!("bad grid_points: {value:?}")))?
            }
            other => return Err(Error::parse("model", format!("unknown config key {other}"))),
        }
    }
    Ok(cfg)
}

/// Training-time cache: per sample, the sorted spike list and each neuron's
/// sampled weight amplitudes, kept in sync incrementally as bumps are added.
///
/// Defender channels always spike at 0 and therefore only ever carry bumps
/// centered at 0, so their sampled weight is read live from the neuron (one
/// bump lookup); only intruder-channel amplitudes are cached per sample.
struct TrainContext<S> {
    /// Per sample: spikes sorted by (time, channel).
    spikes: Vec<Vec<(usize, S)>>,
    /// Per sample: cached slot indices of intruder-channel spikes.
    intruder_slots: Vec<Vec<u32>>,
    /// Per sample: amplitude matrix `[neuron][intruder slot]`, flattened.
    amps: Vec<Vec<S>>,
    /// Per intruder channel: every (sample, cached slot) spiking on it.
    channel_refs: Vec<Vec<(u32, u32)>>,
}

impl<S: Real> TrainContext<S> {
    fn build(net: &SefronNetwork<S>, samples: &[(&SpikePattern<S>, &LabelVector)]) -> Result<Self> {
        let channels = 2 * net.m;
        let mut spikes = Vec::with_capacity(samples.len());
        let mut intruder_slots = Vec::with_capacity(samples.len());
        let mut amps = Vec::with_capacity(samples.len());
        let mut channel_refs = vec![Vec::new(); channels];
        for (s_idx, (pattern, labels)) in samples.iter().enumerate() {
            if pattern.num_zones() != net.m || labels.len() != net.m {
                return Err(Error::Shape(format!(
                    "sample with {} zones in an m = {} network",
                    pattern.num_zones(),
                    net.m
                )));
            }
            let mut list: Vec<(usize, S)> = pattern.spikes().collect();
            list.sort_by(|a, b| {
                a.1.partial_cmp(&b.1)
                    .expect("finite spike times")
                    .then(a.0.cmp(&b.0))
            });
            let slots: Vec<u32> = list
                .iter()
                .enumerate()
                .filter(|(_, &(ch, _))| ch >= net.m)
                .map(|(slot, _)| slot as u32)
                .collect();
            let mut mat = vec![S::zero(); 2 * net.m * slots.len()];
            for (cached, &slot) in slots.iter().enumerate() {
                let (ch, t) = list[slot as usize];
                channel_refs[ch].push((s_idx as u32, cached as u32));
                for (k, neuron) in net.neurons.iter().enumerate() {
                    mat[k * slots.len() + cached] = neuron.incoming[ch].value(t, net.config.sigma);
                }
            }
            spikes.push(list);
            intruder_slots.push(slots);
            amps.push(mat);
        }
        Ok(TrainContext {
            spikes,
            intruder_slots,
            amps,
            channel_refs,
        })
    }

    /// Sampled weights for one (neuron, sample) pair, in spike order.
    fn sampled_amps(&self, net: &SefronNetwork<S>, neuron: usize, s_idx: usize) -> Vec<S> {
        let spikes = &self.spikes[s_idx];
        let slots = &self.intruder_slots[s_idx];
        let cached = &self.amps[s_idx][neuron * slots.len()..(neuron + 1) * slots.len()];
        let mut out = Vec::with_capacity(spikes.len());
        let mut next = 0usize;
        for (slot, &(ch, _)) in spikes.iter().enumerate() {
            if ch < net.m {
                out.push(net.neurons[neuron].incoming[ch].value(S::zero(), net.config.sigma));
            } else {
                debug_assert_eq!(slots[next] as usize, slot);
                out.push(cached[next]);
                next += 1;
            }
        }
        out
    }

    /// Fast first-spike search from cached amplitudes. Uses an incremental
    /// exponential-decay sweep over the grid; agrees with the exact search
    /// up to floating-point drift far below the grid resolution.
    fn first_spike(&self, net: &SefronNetwork<S>, neuron: usize, s_idx: usize) -> Option<S> {
        let cfg = &net.config;
        let spikes = &self.spikes[s_idx];
        let ns = spikes.len();
        let amps = self.sampled_amps(net, neuron, s_idx);
        let theta = net.neurons[neuron].theta;
        if theta <= S::zero() {
            // v(0) = 0 already reaches a nonpositive threshold.
            return Some(S::zero());
        }
        if ns == 0 {
            return None;
        }
        let g = cfg.grid_points;
        let step = cfg.t_interval / rus(g - 1);
        let decay = (-step / cfg.tau).exp();
        let step_over_tau = step / cfg.tau;
        let e1 = S::one().exp();

        let mut c_sum = S::zero();
        let mut d_sum = S::zero();
        let mut cursor = 0usize;
        let mut v_prev = S::zero();

        // v(0) = 0; start from the first grid point at or after the first spike.
        let t_first = spikes[0].1;
        let mut gi = if t_first <= S::zero() {
            0
        } else {
            (t_first / step)
                .floor()
                .to_usize()
                .unwrap_or(0)
                .min(g - 1)
        };
        let mut t = step * rus(gi);
        while cursor < ns && spikes[cursor].1 <= t {
            let s = t - spikes[cursor].1;
            let decay_s = (-s / cfg.tau).exp();
            c_sum += amps[cursor] * decay_s;
            d_sum += amps[cursor] * (s / cfg.tau) * decay_s;
            cursor += 1;
        }
        let mut v = e1 * d_sum;
        if v >= theta {
            return Some(if gi == 0 {
                S::zero()
            } else {
                refine_crossing(theta, step * rus(gi - 1), v_prev, t, v)
            });
        }
        v_prev = v;
        gi += 1;
        while gi < g {
            t = step * rus(gi);
            d_sum = (d_sum + c_sum * step_over_tau) * decay;
            c_sum *= decay;
            while cursor < ns && spikes[cursor].1 <= t {
                let s = t - spikes[cursor].1;
                let decay_s = (-s / cfg.tau).exp();
                c_sum += amps[cursor] * decay_s;
                d_sum += amps[cursor] * (s / cfg.tau) * decay_s;
                cursor += 1;
            }
            v = e1 * d_sum;
            if v >= theta {
                return Some(refine_crossing(theta, step * rus(gi - 1), v_prev, t, v));
            }
            v_prev = v;
            gi += 1;
        }
        None
    }

    /// Cached variant of `apply_update`; returns false when the update was
    /// skipped as degenerate.
    fn cached_update(
        &mut self,
        net: &mut SefronNetwork<S>,
        neuron_idx: usize,
        s_idx: usize,
        t_desired: S,
        t_hat: Option<S>,
    ) -> bool {
        let cfg = net.config.clone();
        let spikes = &self.spikes[s_idx];
        let ns = spikes.len();
        let Some(u_desired) = fractional_over_spikes(t_desired, spikes, &cfg) else {
            return false;
        };
        let v_desired = reference_potential(t_desired, spikes, &u_desired, cfg.tau);
        if v_desired == S::zero() {
            return false;
        }
        let theta = net.neurons[neuron_idx].theta;
        let e = match t_hat {
            Some(t_hat) => {
                let Some(u_hat) = fractional_over_spikes(t_hat, spikes, &cfg) else {
                    return false;
                };
                let v_hat = reference_potential(t_hat, spikes, &u_hat, cfg.tau);
                if v_hat == S::zero() {
                    return false;
                }
                theta / v_desired - theta / v_hat
            }
            None if t_desired >= cfg.t_interval => return true,
            None => {
                let amps = self.sampled_amps(net, neuron_idx, s_idx);
                let v_now: S = spikes
                    .iter()
                    .zip(&amps)
                    .map(|(&(_, t_i), &a)| a * epsilon(t_desired - t_i, cfg.tau))
                    .sum();
                (theta - v_now) / v_desired
            }
        };
        let _ = ns;
        let eps = r64::<S>(AMP_EPS);
        let two_sigma_sq = r64::<S>(2.0) * cfg.sigma * cfg.sigma;
        let spike_list: Vec<(usize, S)> = spikes.clone();
        for (slot, &(ch, t_i)) in spike_list.iter().enumerate() {
            let amp = cfg.learning_rate * u_desired[slot] * e;
            if amp.abs() < eps {
                continue;
            }
            net.neurons[neuron_idx].incoming[ch].add_bump(amp, t_i);
            if ch < net.m {
                // Defender channels are read live; nothing cached to patch.
                continue;
            }
            // Propagate to every cached sample spiking on this channel.
            for &(other_sample, other_cached) in &self.channel_refs[ch] {
                let other = other_sample as usize;
                let slot_count = self.intruder_slots[other].len();
                let spike_slot = self.intruder_slots[other][other_cached as usize] as usize;
                let t_other = self.spikes[other][spike_slot].1;
                let d = t_other - t_i;
                let gain = amp * (-(d * d) / two_sigma_sq).exp();
                self.amps[other][neuron_idx * slot_count + other_cached as usize] += gain;
            }
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> TrainingConfig<f64> {
        TrainingConfig::default()
    }

    fn pattern(channels: Vec<Option<f64>>) -> SpikePattern<f64> {
        SpikePattern::new(channels, 8.0).unwrap()
    }

    #[test]
    fn epsilon_peak_and_causality() {
        let tau = 2.4;
        assert_eq!(epsilon(tau, tau), 1.0);
        assert_eq!(epsilon(0.0, tau), 0.0);
        assert_eq!(epsilon(-1.0, tau), 0.0);
        for s in [0.1, 0.5, 1.0, 2.0, 3.0, 7.9] {
            assert!(epsilon(s, tau) <= 1.0);
        }
    }

    #[test]
    fn stdp_branches() {
        let c = cfg();
        assert_eq!(stdp_dw(0.0, &c), c.a_plus);
        assert!(stdp_dw(1e6, &c) >= 0.0);
        assert!(stdp_dw(1e6, &c) < 1e-300);
        let s = -c.tau_minus;
        let expect = -c.a_minus * (-1.0f64).exp();
        assert!((stdp_dw(s, &c) - expect).abs() < 1e-15);
    }

    #[test]
    fn fractional_contribution_single_and_symmetric() {
        let c = cfg();
        let single = pattern(vec![Some(0.0), None, None, None]);
        let u = fractional_contribution(c.t_ideal, &single, &c).unwrap();
        assert_eq!(u[0], 1.0);
        assert_eq!(u[1], 0.0);

        // Two spikes at the same time split evenly.
        let double = pattern(vec![Some(0.0), Some(0.0), None, None]);
        let u = fractional_contribution(c.t_ideal, &double, &c).unwrap();
        assert_eq!(u[0], 0.5);
        assert_eq!(u[1], 0.5);
    }

    #[test]
    fn fractional_contribution_sums_to_one() {
        let c = cfg();
        // A 15-zone-style pattern: own defender, a teammate, three intruders.
        let mut channels = vec![None; 30];
        channels[7] = Some(0.0);
        channels[12] = Some(0.0);
        channels[15 + 5] = Some(2.15);
        channels[15 + 9] = Some(5.3);
        channels[15 + 1] = Some(7.1);
        let p = pattern(channels);
        let u = fractional_contribution(c.t_ideal, &p, &c).unwrap();
        let sum: f64 = u.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fractional_contribution_rejects_silence() {
        let c = cfg();
        let silent = pattern(vec![None, None]);
        assert!(matches!(
            fractional_contribution(c.t_ideal, &silent, &c),
            Err(Error::DegenerateInput)
        ));
    }

    fn single_bump_neuron(theta: f64, channels: usize) -> SefronNeuron<f64> {
        let mut incoming = vec![TimeVaryingWeight::new(); channels];
        incoming[0].add_bump(theta, 0.0);
        SefronNeuron { incoming, theta }
    }

    #[test]
    fn membrane_potential_silent_is_zero() {
        let c = cfg();
        let neuron = single_bump_neuron(0.5, 2);
        let p = pattern(vec![None, None]);
        assert_eq!(membrane_potential(&neuron, &p, 3.0, &c), 0.0);
    }

    #[test]
    fn single_input_fires_at_kernel_peak() {
        // w(0) = theta, so the potential reaches theta exactly at tau. Use a
        // grid that contains tau so the tangent crossing is detected.
        let mut c = cfg();
        c.grid_points = 1001; // step 0.008, tau = 2.4 = 300 steps
        let neuron = single_bump_neuron(0.5, 2);
        let p = pattern(vec![Some(0.0), None]);
        assert!((membrane_potential(&neuron, &p, c.tau, &c) - 0.5).abs() < 1e-15);
        let t = first_spike_time(&neuron, &p, &c).expect("fires");
        let step = 8.0 / 1000.0;
        assert!((t - c.tau).abs() <= step, "got {t}");
    }

    #[test]
    fn tiny_threshold_fires_immediately() {
        let c = cfg();
        let mut neuron = single_bump_neuron(0.5, 2);
        neuron.theta = 1e-300;
        let p = pattern(vec![Some(0.0), None]);
        let t = first_spike_time(&neuron, &p, &c).expect("fires");
        assert!(t <= 8.0 / 999.0);
    }

    #[test]
    fn silent_pattern_never_fires() {
        let c = cfg();
        let neuron = single_bump_neuron(0.5, 2);
        let p = pattern(vec![None, None]);
        assert_eq!(first_spike_time(&neuron, &p, &c), None);
    }

    #[test]
    fn analytic_crossing_matches_grid_search() {
        // Potential 2 * eps(t): crosses theta = 1 where eps(t) = 0.5, i.e.
        // t/tau * exp(1 - t/tau) = 0.5. Solve by bisection independently.
        let c = cfg();
        let neuron = single_bump_neuron(2.0, 2);
        let mut p_theta = neuron.clone();
        p_theta.theta = 1.0;
        let p = pattern(vec![Some(0.0), None]);
        let (mut lo, mut hi) = (0.0f64, c.tau);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if 2.0 * epsilon(mid, c.tau) < 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let grid = first_spike_time(&p_theta, &p, &c).expect("fires");
        assert!((grid - lo).abs() <= 8.0 / 999.0, "analytic {lo} vs grid {grid}");
    }

    #[test]
    fn label_readout_rules() {
        assert!(label_from_times::<f64>(Some(0.3), Some(0.5)));
        assert!(!label_from_times::<f64>(Some(0.5), Some(0.5)));
        assert!(!label_from_times::<f64>(None, None));
        assert!(label_from_times::<f64>(Some(1.0), None));
        assert!(!label_from_times::<f64>(None, Some(1.0)));
    }

    #[test]
    fn desired_times_escaped_branches() {
        let mut c = cfg();
        c.t_ideal = 0.4 * 8.0;
        c.t_margin = 0.1 * 8.0;
        // Assigned never fired, unassigned fired early.
        let (ta, tu) = desired_times_escaped(None, Some(0.2 * 8.0), &c);
        assert_eq!(ta, 0.4 * 8.0);
        assert_eq!(tu, 0.5 * 8.0);
        // Assigned already before the ideal time: unchanged.
        let (ta, _) = desired_times_escaped(Some(1.0), Some(7.0), &c);
        assert_eq!(ta, 1.0);
        // Unassigned already past the margin: unchanged.
        let (_, tu) = desired_times_escaped(Some(1.0), Some(7.0), &c);
        assert_eq!(tu, 7.0);
    }

    #[test]
    fn desired_times_incorrect_mirrors() {
        let mut c = cfg();
        c.t_ideal = 0.4 * 8.0;
        c.t_margin = 0.1 * 8.0;
        let (ta, tu) = desired_times_incorrect(Some(0.2 * 8.0), None, &c);
        assert_eq!(tu, 0.4 * 8.0);
        assert_eq!(ta, 0.5 * 8.0);
        let (_, tu) = desired_times_incorrect(Some(7.0), Some(1.0), &c);
        assert_eq!(tu, 1.0);
        let (ta, _) = desired_times_incorrect(Some(7.0), Some(1.0), &c);
        assert_eq!(ta, 7.0);
    }

    #[test]
    fn init_single_spike_threshold() {
        let c = cfg();
        let p = pattern(vec![Some(0.0), None]);
        let neuron = init_neuron(&p, &c).unwrap();
        assert_eq!(neuron.theta, epsilon(c.t_ideal, c.tau));
        assert_eq!(neuron.incoming[0].bumps().len(), 1);
        assert!(neuron.incoming[1].is_empty());
    }

    #[test]
    fn init_reproduces_ideal_firing_time_when_kernel_is_slow() {
        // With tau >= t_ideal the potential rises monotonically through the
        // ideal time, so the initialized neuron first fires there.
        let mut c = cfg();
        c.tau = c.t_ideal;
        let mut channels = vec![None; 30];
        channels[7] = Some(0.0);
        channels[15 + 4] = Some(1.7);
        channels[15 + 11] = Some(6.9); // after t_ideal: negative contribution
        let p = pattern(channels);
        let neuron = init_neuron(&p, &c).unwrap();
        let t = first_spike_time(&neuron, &p, &c).expect("fires");
        let step = 8.0 / 999.0;
        assert!((t - c.t_ideal).abs() <= step, "got {t}");
    }

    #[test]
    fn update_at_fixed_point_changes_nothing() {
        let mut c = cfg();
        c.tau = c.t_ideal;
        let mut channels = vec![None; 30];
        channels[7] = Some(0.0);
        channels[15 + 4] = Some(1.7);
        let p = pattern(channels);
        let mut neuron = init_neuron(&p, &c).unwrap();
        let before = neuron.clone();
        let t_hat = first_spike_time(&neuron, &p, &c).expect("fires");
        apply_update(&mut neuron, &p, t_hat, &c).unwrap();
        assert_eq!(neuron, before);
    }

    #[test]
    fn update_moves_potential_with_error_sign() {
        // After an update toward t_d, the membrane potential at t_d moves
        // with the sign of the error term (whenever the reference potential
        // at t_d is positive).
        let mut c = cfg();
        c.tau = c.t_ideal;
        let mut channels = vec![None; 30];
        channels[7] = Some(0.0);
        channels[15 + 4] = Some(1.2);
        let p = pattern(channels);
        let spikes: Vec<(usize, f64)> = p.spikes().collect();
        let base = init_neuron(&p, &c).unwrap();
        let t_hat = first_spike_time(&base, &p, &c).expect("initialized neuron fires");
        let mut exercised = 0;
        for t_d in [
            0.5 * t_hat,
            0.75 * t_hat,
            (t_hat + 0.4).min(8.0),
            (t_hat + 2.0).min(8.0),
            7.6,
        ] {
            let mut neuron = base.clone();
            let v_at = |t: f64| -> f64 {
                let u = fractional_contribution(t, &p, &c).unwrap();
                spikes
                    .iter()
                    .map(|&(i, t_i)| u[i] * epsilon(t - t_i, c.tau))
                    .sum()
            };
            let (v_d, v_hat) = (v_at(t_d), v_at(t_hat));
            if v_d <= 0.0 {
                continue;
            }
            let e = neuron.theta / v_d - neuron.theta / v_hat;
            let before = membrane_potential(&neuron, &p, t_d, &c);
            apply_update(&mut neuron, &p, t_d, &c).unwrap();
            let after = membrane_potential(&neuron, &p, t_d, &c);
            if e > 0.0 {
                assert!(after > before, "e = {e} but potential fell at {t_d}");
            } else if e < 0.0 {
                assert!(after < before, "e = {e} but potential rose at {t_d}");
            } else {
                assert_eq!(after, before);
            }
            exercised += 1;
        }
        assert!(exercised >= 3, "only {exercised} reference times usable");
    }

    #[test]
    fn update_scales_linearly_with_learning_rate() {
        let mut c = cfg();
        c.tau = c.t_ideal;
        let p = pattern(vec![Some(0.0), Some(0.0), None, None]);
        let base = init_neuron(&p, &c).unwrap();

        let max_delta = |lr: f64| -> f64 {
            let mut c2 = c.clone();
            c2.learning_rate = lr;
            let mut n = base.clone();
            apply_update(&mut n, &p, 1.0, &c2).unwrap();
            n.incoming
                .iter()
                .zip(&base.incoming)
                .flat_map(|(a, b)| {
                    a.bumps().iter().zip(b.bumps()).map(|(x, y)| (x.amplitude - y.amplitude).abs())
                })
                .fold(0.0, f64::max)
        };
        let d1 = max_delta(0.1);
        let d2 = max_delta(0.05);
        assert!(d1 > 0.0);
        assert!((d1 / d2 - 2.0).abs() < 1e-9);
    }

    fn toy_samples() -> Vec<(SpikePattern<f64>, LabelVector)> {
        // m = 2: zone 1 is positive iff its intruder channel fires early,
        // zone 2 iff its channel fires at all.
        let mk = |i1: Option<f64>, i2: Option<f64>| {
            let channels = vec![Some(0.0), None, i1, i2];
            SpikePattern::new(channels, 8.0).unwrap()
        };
        vec![
            (mk(Some(1.0), None), LabelVector(vec![true, false])),
            (mk(Some(6.5), None), LabelVector(vec![false, false])),
            (mk(Some(1.2), Some(2.0)), LabelVector(vec![true, true])),
            (mk(None, Some(3.0)), LabelVector(vec![false, true])),
            (mk(Some(6.9), Some(2.4)), LabelVector(vec![false, true])),
            (mk(Some(0.8), Some(5.0)), LabelVector(vec![true, true])),
        ]
    }

    fn as_refs(
        samples: &[(SpikePattern<f64>, LabelVector)],
    ) -> Vec<(&SpikePattern<f64>, &LabelVector)> {
        samples.iter().map(|(p, l)| (p, l)).collect()
    }

    #[test]
    fn initialize_covers_all_pairs() {
        let samples = toy_samples();
        let net = SefronNetwork::initialize(2, &as_refs(&samples), cfg()).unwrap();
        assert_eq!(net.neurons().len(), 4);
        for n in net.neurons() {
            assert!(n.theta > 0.0);
        }
    }

    #[test]
    fn missing_polarity_reports_gap_and_stays_silent() {
        let samples = vec![(
            pattern(vec![Some(0.0), None, Some(1.0), None]),
            LabelVector(vec![true, false]),
        )];
        let refs: Vec<_> = samples.iter().map(|(p, l)| (p, l)).collect();
        let config = cfg();
        let gaps = coverage_gaps(2, &refs, &config);
        assert!(gaps.contains(&CoverageGap { zone: 1, label: false }));
        assert!(gaps.contains(&CoverageGap { zone: 2, label: true }));
        let net = SefronNetwork::initialize(2, &refs, config).unwrap();
        // Zone 1's unassigned neuron has no exemplar: silent forever, so the
        // pair's readout is decided by the assigned neuron alone.
        assert!(net.neurons()[1].theta.is_infinite());
        assert!(net.neurons()[1].incoming.iter().all(|w| w.is_empty()));
        let p = pattern(vec![Some(0.0), None, Some(1.0), None]);
        assert_eq!(first_spike_time(&net.neurons()[1], &p, &net.config), None);
    }

    #[test]
    fn training_reduces_toy_error() {
        let samples = toy_samples();
        let refs = as_refs(&samples);
        let mut config = cfg();
        config.epochs = 60;
        let mut net = SefronNetwork::initialize(2, &refs, config).unwrap();
        let trace = net.train(&refs).unwrap();
        let first = trace.epoch_errors[0];
        let last = *trace.epoch_errors.last().unwrap();
        assert!(last <= first, "error went {first} -> {last}");
        // The trained network should classify the toy set well.
        let correct = samples
            .iter()
            .filter(|(p, l)| &net.predict(p) == l)
            .count();
        assert!(correct >= 5, "only {correct}/6 correct");
    }

    #[test]
    fn correct_samples_leave_weights_untouched() {
        let samples = toy_samples();
        let refs = as_refs(&samples);
        let mut config = cfg();
        config.epochs = 40;
        let mut net = SefronNetwork::initialize(2, &refs, config).unwrap();
        net.train(&refs).unwrap();
        // Keep only samples the network already classifies correctly.
        let good: Vec<_> = samples
            .iter()
            .filter(|(p, l)| &net.predict(p) == l)
            .map(|(p, l)| (p, l))
            .collect();
        assert!(!good.is_empty());
        let mut retrained = net.clone();
        let trace = retrained.train(&good).unwrap();
        assert_eq!(trace.epoch_errors.last().copied(), Some(0.0));
        assert_eq!(retrained, net);
    }

    #[test]
    fn persistent_sample_error_is_monotone() {
        // Initialize from the toy set, then hammer on one awkward sample:
        // its per-epoch Hamming error must never increase (a fixed output
        // stays fixed because correct pairs receive no updates).
        let pool = toy_samples();
        let refs_pool = as_refs(&pool);
        let mut config = cfg();
        config.epochs = 1;
        let mut net = SefronNetwork::initialize(2, &refs_pool, config).unwrap();
        let stubborn = vec![(
            pattern(vec![Some(0.0), None, Some(5.5), Some(7.2)]),
            LabelVector(vec![true, false]),
        )];
        let refs: Vec<_> = stubborn.iter().map(|(p, l)| (p, l)).collect();
        let mut errors = Vec::new();
        for _ in 0..30 {
            let trace = net.train(&refs).unwrap();
            errors.push(trace.epoch_errors[0]);
        }
        for pair in errors.windows(2) {
            assert!(pair[1] <= pair[0], "error increased: {errors:?}");
        }
    }

    #[test]
    fn pair_updates_are_local() {
        let samples = toy_samples();
        let refs = as_refs(&samples);
        let net = SefronNetwork::initialize(2, &refs, cfg()).unwrap();
        let before: Vec<LabelVector> = samples.iter().map(|(p, _)| net.predict(p)).collect();
        // Perturb pair 0 only.
        let mut poked = net.clone();
        apply_update(&mut poked.neurons[0], &samples[0].0, 1.0, &cfg()).unwrap();
        apply_update(&mut poked.neurons[1], &samples[0].0, 2.0, &cfg()).unwrap();
        for ((p, _), old) in samples.iter().zip(&before) {
            let new = poked.predict(p);
            assert_eq!(new.get(1), old.get(1), "pair 1 affected by pair 0 update");
        }
    }

    #[test]
    fn cached_sweep_agrees_with_exact_search() {
        let samples = toy_samples();
        let refs = as_refs(&samples);
        let mut config = cfg();
        config.epochs = 10;
        let mut net = SefronNetwork::initialize(2, &refs, config).unwrap();
        net.train(&refs).unwrap();
        let ctx = TrainContext::build(&net, &refs).unwrap();
        let step = 8.0 / 999.0;
        for (s_idx, (p, _)) in samples.iter().enumerate() {
            for k in 0..4 {
                let exact = first_spike_time(&net.neurons[k], p, &net.config);
                let fast = ctx.first_spike(&net, k, s_idx);
                match (exact, fast) {
                    (None, None) => {}
                    (Some(a), Some(b)) => {
                        assert!((a - b).abs() <= step, "exact {a} vs sweep {b}")
                    }
                    other => panic!("sweep disagrees with exact search: {other:?}"),
                }
            }
        }
    }

    #[test]
    fn model_text_round_trips_bit_exactly() {
        let samples = toy_samples();
        let refs = as_refs(&samples);
        let mut config = cfg();
        config.epochs = 15;
        let mut net = SefronNetwork::initialize(2, &refs, config).unwrap();
        net.train(&refs).unwrap();
        let text = net.to_text();
        let loaded = SefronNetwork::<f64>::from_text(&text).unwrap();
        assert_eq!(net, loaded);
        assert_eq!(text, loaded.to_text());
        for (p, _) in &samples {
            assert_eq!(net.predict(p), loaded.predict(p));
        }
    }
}
