//! The CNN demo: train the readout on synthetic suit streams, then classify a
//! test sweep.

use crate::aer::AerEvent;
use crate::classify::{classify, Decision, WindowSpec};
use crate::cnn::{add_readout, build_cnn, render_events, CnnLayout, CnnSpec, LayerParams, Presentation, CLASSES};
use crate::readout::{train_readout, Readout};
use crate::sim::{aer_to_stimuli, build_engine, compile, raster_ids, stimulus_table, Compiled, PS_PER_MS, PS_PER_US};
use anyhow::Context;
use dynapsim_core::fabric::{FabricConfig, SimStats, Supply};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DemoConfig {
    pub seed: u64,
    pub fabric: FabricConfig,
    pub cnn: CnnSpec,
    pub layers: LayerParams,
    pub train_per_class: u32,
    pub test_presentations: u32,
    pub on_ms: u32,
    pub off_ms: u32,
    pub rate_hz: f64,
    /// Largest glyph shift inside the frame, in pixels.
    pub max_offset: u16,
    pub readout_top: usize,
    pub window: WindowSpec,
    /// Pooling spikes are counted from onset for this long during training.
    pub train_count_ms: f64,
}

impl Default for DemoConfig {
    fn default() -> Self {
        DemoConfig {
            seed: 1,
            fabric: FabricConfig {
                supply: Supply::V1_3,
                // Without mismatch the 64 neurons of an output population
                // fire in lockstep and counts tie.
                mismatch_sigma: 0.2,
                ..FabricConfig::grid(3, 3)
            },
            cnn: CnnSpec::default(),
            layers: LayerParams::default(),
            train_per_class: 8,
            test_presentations: 40,
            on_ms: 50,
            off_ms: 50,
            rate_hz: 400.0,
            max_offset: 1,
            readout_top: 64,
            window: WindowSpec::default(),
            train_count_ms: 50.0,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PhaseResult {
    pub presentations: Vec<Presentation>,
    pub events: usize,
    pub stats: SimStats,
    #[serde(skip)]
    pub raster: Vec<(f64, u32)>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DemoReport {
    pub layout: CnnLayout,
    pub readout: Readout,
    pub train: PhaseResult,
    pub test: PhaseResult,
    pub decisions: Vec<Decision>,
    pub accuracy: f64,
    pub max_first_correct_ms: Option<f64>,
    #[serde(skip)]
    pub test_events: Vec<AerEvent>,
}

fn schedule<R: Rng>(cfg: &DemoConfig, order: &[usize], rng: &mut R) -> Vec<Presentation> {
    let period = (cfg.on_ms + cfg.off_ms) * 1000;
    order
        .iter()
        .enumerate()
        .map(|(i, &k)| Presentation {
            suit: CLASSES[k],
            onset_us: i as u32 * period + cfg.off_ms * 1000,
            duration_us: cfg.on_ms * 1000,
            offset_x: rng.random_range(0..=cfg.max_offset),
            offset_y: rng.random_range(0..=cfg.max_offset),
        })
        .collect()
}

fn run_phase(c: &Compiled, layout: &CnnLayout, cfg: &DemoConfig, ps: Vec<Presentation>, rng: &mut ChaCha8Rng) -> anyhow::Result<(PhaseResult, Vec<AerEvent>)> {
    let side = cfg.cnn.input as u16;
    let events = render_events(&ps, side, cfg.rate_hz, rng);
    let table = stimulus_table(&c.placement);
    let (stimuli, skipped) = aer_to_stimuli(&events, &table, layout.input, side);
    debug_assert_eq!(skipped, 0);
    let mut e = build_engine(c, &cfg.fabric).context("building the fabric")?;
    e.set_record_deliveries(false);
    e.inject_external(&stimuli).context("injecting stimuli")?;
    let end_us = ps.last().map(|p| p.onset_us + p.duration_us).unwrap_or(0) + cfg.off_ms * 1000;
    let stats = e
        .run_until(end_us as u64 * PS_PER_US)
        .context("simulating")?;
    let raster = raster_ids(&e, &c.placement);
    Ok((
        PhaseResult {
            presentations: ps,
            events: events.len(),
            stats,
            raster,
        },
        events,
    ))
}

/// The demo seed also seeds the fabric's mismatch and jitter streams.
pub fn run_demo(cfg: &DemoConfig) -> anyhow::Result<DemoReport> {
    let mut cfg = cfg.clone();
    cfg.fabric.seed = cfg.seed;
    let cfg = &cfg;
    let (net, layout) = build_cnn(&cfg.cnn, &cfg.layers)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let classes = CLASSES.len();

    let base = compile(net.clone(), &cfg.fabric, cfg.seed)?;
    let order: Vec<usize> = (0..cfg.train_per_class as usize * classes).map(|i| i % classes).collect();
    let train_ps = schedule(cfg, &order, &mut rng);
    let (train, _) = run_phase(&base, &layout, cfg, train_ps, &mut rng)?;

    let mut counts = vec![vec![0u64; layout.pool_size as usize]; classes];
    for p in &train.presentations {
        let t0 = p.onset_us as f64 / 1000.0;
        for &(t, id) in &train.raster {
            if t >= t0 && t < t0 + cfg.train_count_ms {
                if let Some(i) = layout.pool_index(id) {
                    counts[p.suit.index()][i as usize] += 1;
                }
            }
        }
    }
    let readout = train_readout(&counts, cfg.readout_top);

    let mut wired = net;
    add_readout(&mut wired, &layout, &readout.wiring);
    let full = compile(wired, &cfg.fabric, cfg.seed)?;
    let order: Vec<usize> = (0..cfg.test_presentations as usize).map(|i| i % classes).collect();
    let test_ps = schedule(cfg, &order, &mut rng);
    let (test, test_events) = run_phase(&full, &layout, cfg, test_ps, &mut rng)?;

    let out_spikes: Vec<(f64, usize)> = test
        .raster
        .iter()
        .filter_map(|&(t, id)| layout.class_of_output(id).map(|k| (t, k)))
        .collect();
    let onsets: Vec<(f64, Option<usize>)> = test
        .presentations
        .iter()
        .map(|p| (p.onset_us as f64 / 1000.0, Some(p.suit.index())))
        .collect();
    let decisions = classify(&out_spikes, classes, &onsets, cfg.window, cfg.on_ms as f64);
    let correct = decisions.iter().filter(|d| d.correct()).count();
    let accuracy = if decisions.is_empty() {
        0.0
    } else {
        correct as f64 / decisions.len() as f64
    };
    let max_first_correct_ms = decisions
        .iter()
        .map(|d| d.first_correct_ms)
        .try_fold(0.0f64, |m, t| t.map(|t| m.max(t)));
    Ok(DemoReport {
        layout,
        readout,
        train,
        test,
        decisions,
        accuracy,
        max_first_correct_ms,
        test_events,
    })
}

/// Simulated time of the whole demo, both phases.
pub fn simulated_ms(r: &DemoReport) -> f64 {
    (r.train.stats.time_ps + r.test.stats.time_ps) as f64 / PS_PER_MS as f64
}
