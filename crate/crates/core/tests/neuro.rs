use dynapsim_core::neuro::*;
use dynapsim_core::packets::{CamEntry, SynType, MAX_TAG};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn brute_force(mem: &CoreMemory, tag: u16) -> Vec<CamMatch> {
    let mut out = Vec::new();
    for n in 0..mem.neurons() as u16 {
        for s in 0..CAM_WORDS_PER_NEURON as u8 {
            if let Some(e) = mem.get(n, s) {
                if e.tag == tag {
                    out.push(CamMatch {
                        neuron: n,
                        slot: s,
                        syn_type: e.syn_type,
                    });
                }
            }
        }
    }
    out
}

#[test]
fn small_core_exhaustive_against_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut mem = CoreMemory::new(4);
    for _ in 0..2000 {
        let n = rng.random_range(0..4);
        let s = rng.random_range(0..CAM_WORDS_PER_NEURON as u8);
        if rng.random_bool(0.2) {
            mem.clear(n, s).unwrap();
        } else {
            let e = CamEntry::new(rng.random_range(0..8), SynType::ALL[rng.random_range(0..4)]);
            mem.write(n, s, e).unwrap();
        }
        let t = rng.random_range(0..8);
        assert_eq!(mem.cam_match(t), brute_force(&mem, t));
    }
    for t in 0..=MAX_TAG {
        assert_eq!(mem.cam_match(t), brute_force(&mem, t));
    }
}

#[test]
fn full_core_random_images() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..5 {
        let mut mem = CoreMemory::new(256);
        for n in 0..256 {
            for s in 0..64 {
                if rng.random_bool(0.8) {
                    let e = CamEntry::new(rng.random_range(0..=MAX_TAG), SynType::ALL[rng.random_range(0..4)]);
                    mem.write(n, s, e).unwrap();
                }
            }
        }
        for _ in 0..200 {
            let t = rng.random_range(0..=MAX_TAG);
            assert_eq!(mem.cam_match(t), brute_force(&mem, t));
        }
    }
}

fn syn() -> SynapseParams {
    SynapseParams::new(7.0, 300.0, 0.5)
}

fn response(pulses: &[u64], samples: &[u64]) -> Vec<f64> {
    let p = syn();
    let mut d = Dpi::new();
    let mut pulses = pulses.to_vec();
    pulses.sort();
    let mut out = Vec::new();
    let mut i = 0;
    for &t in samples {
        while i < pulses.len() && pulses[i] <= t {
            d.apply_pulse(pulses[i], &p);
            i += 1;
        }
        d.advance_to(t, &p);
        out.push(d.current());
    }
    out
}

proptest! {
    #[test]
    fn dpi_superposition(
        a in proptest::collection::vec(0u64..40_000_000_000, 0..12),
        b in proptest::collection::vec(0u64..40_000_000_000, 0..12),
    ) {
        let samples: Vec<u64> = (1..=60).map(|k| k * 1_000_000_000).collect();
        let ra = response(&a, &samples);
        let rb = response(&b, &samples);
        let ab: Vec<u64> = a.iter().chain(&b).copied().collect();
        let rab = response(&ab, &samples);
        for i in 0..samples.len() {
            let sum = ra[i] + rb[i];
            prop_assert!((rab[i] - sum).abs() <= 1e-9 * sum.abs().max(1e-6), "{} vs {}", rab[i], sum);
        }
    }

    #[test]
    fn dpi_decay_is_exponential(i0 in 1.0f64..1e4, t_ms in 0.0f64..200.0) {
        let p = syn();
        let mut d = Dpi::with_current(i0);
        d.advance_to((t_ms * 1e9) as u64, &p);
        let t = d.time_ps() as f64 / 1e9;
        let want = i0 * (-t / p.tau_ms).exp();
        prop_assert!((d.current() - want).abs() <= 1e-9 * i0);
    }
}

fn rate_hz(p: &NeuronParams, input: &SynapticInput, t_ms: f64) -> (usize, f64) {
    let dt = 0.05;
    let mut s = NeuronState::at_rest(p);
    let mut spikes = Vec::new();
    let steps = (t_ms / dt) as usize;
    for k in 0..steps {
        let t = k as f64 * dt;
        if neuron_step(&mut s, p, input, t, dt).unwrap() {
            spikes.push(t + dt);
        }
    }
    let min_isi = spikes.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    (spikes.len(), min_isi)
}

#[test]
fn f_i_curve_is_monotone() {
    let p = NeuronParams::default();
    let mut last = 0;
    for k in 0..20 {
        let i = 100.0 + 100.0 * k as f64;
        let (n, _) = rate_hz(&p, &SynapticInput::dc(i), 1000.0);
        assert!(n >= last, "rate fell at {i} pA: {n} < {last}");
        last = n;
    }
    assert!(last > 0);
}

#[test]
fn refractory_period_is_never_violated() {
    let p = NeuronParams {
        t_ref_ms: 2.0,
        ..NeuronParams::default()
    };
    let mut total = 0;
    for i in [1500.0, 3000.0, 6000.0, 12000.0] {
        let (n, isi) = rate_hz(&p, &SynapticInput::dc(i), 2000.0);
        assert!(isi >= p.t_ref_ms - 1e-9, "ISI {isi} at {i} pA");
        total += n;
    }
    assert!(total > 1000);
}

#[test]
fn shunting_never_raises_rate() {
    let p = NeuronParams::default();
    let mut last = usize::MAX;
    for g in [0.0, 1.0, 2.0, 5.0, 10.0, 20.0, 40.0] {
        let input = SynapticInput {
            g_shunt_ns: g,
            ..SynapticInput::dc(1500.0)
        };
        let (n, _) = rate_hz(&p, &input, 1000.0);
        assert!(n <= last);
        last = n;
    }
}

#[test]
fn subtractive_inhibition_shifts_f_i_curve() {
    let p = NeuronParams::default();
    let shift = 300.0;
    for k in 0..10 {
        let i = 400.0 + 150.0 * k as f64;
        let plain = rate_hz(&p, &SynapticInput::dc(i), 1000.0).0;
        let inhibited = SynapticInput {
            i_inh_sub_pa: shift,
            ..SynapticInput::dc(i)
        };
        let inh = rate_hz(&p, &inhibited, 1000.0).0;
        let shifted = rate_hz(&p, &SynapticInput::dc(i - shift), 1000.0).0;
        assert!(inh <= plain);
        assert_eq!(inh, shifted);
    }
}
