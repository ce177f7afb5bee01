use dynapsim_core::fabric::*;
use dynapsim_core::packets::*;
use proptest::prelude::*;

fn routing_cfg(w: u8, h: u8) -> FabricConfig {
    FabricConfig {
        dynamics: false,
        ..FabricConfig::grid(w, h)
    }
}

fn at(x: u8, y: u8, core: u8, neuron: u16) -> NeuronAddr {
    NeuronAddr {
        chip: ChipCoord::new(x, y),
        core,
        neuron,
    }
}

/// Every source chip, every displacement and every core on a 4x4 mesh.
#[test]
fn exhaustive_delivery_on_four_by_four() {
    let (w, h) = (4u8, 4u8);
    let mut checked = 0;
    for sx in 0..w {
        for sy in 0..h {
            let mut e = Engine::new(routing_cfg(w, h)).unwrap();
            let mut expect = Vec::new();
            let mut n = 0u16;
            for ddx in -3i32..=3 {
                for ddy in -3i32..=3 {
                    for core in 0..4u8 {
                        let src = at(sx, sy, n as u8 % 4, n / 4);
                        let tag = n % 1024;
                        e.write_sram(src, 0, Some(RoutingWord::toward(tag, core, ddx, ddy))).unwrap();
                        e.inject_spike(n as u64 * 1000, src).unwrap();
                        let tx = sx as i32 + ddx;
                        let ty = sy as i32 + ddy;
                        let on_mesh = (0..w as i32).contains(&tx) && (0..h as i32).contains(&ty);
                        expect.push((src, on_mesh.then(|| (ChipCoord::new(tx as u8, ty as u8), core)), ddx.unsigned_abs() + ddy.unsigned_abs()));
                        n += 1;
                    }
                }
            }
            let s = e.run_until(1_000_000_000).unwrap();
            let faults = expect.iter().filter(|x| x.1.is_none()).count() as u64;
            assert_eq!(s.counters.faults, faults);
            assert_eq!(s.counters.delivered + s.counters.faults, e.packets_created());
            assert_eq!(s.in_flight, 0);
            for (src, dest, hops) in expect {
                let got: Vec<_> = e.deliveries().iter().filter(|d| d.src == src).collect();
                match dest {
                    Some((chip, core)) => {
                        assert_eq!(got.len(), 1, "{src} lost or duplicated");
                        assert_eq!((got[0].chip, got[0].core), (chip, core));
                        assert_eq!(got[0].r3_hops, hops);
                        checked += 1;
                    }
                    None => assert!(got.is_empty()),
                }
            }
        }
    }
    assert!(checked > 1000);
}

fn scenario(cfg: FabricConfig, words: &[(NeuronAddr, RoutingWord)], cams: &[(NeuronAddr, CamEntry)], spikes: &[(u64, NeuronAddr)]) -> Engine {
    let mut e = Engine::new(cfg).unwrap();
    for (i, (a, w)) in words.iter().enumerate() {
        let slot = words[..i].iter().filter(|(b, _)| b == a).count() as u8;
        e.write_sram(*a, slot, Some(*w)).unwrap();
    }
    for (i, (a, c)) in cams.iter().enumerate() {
        let slot = cams[..i].iter().filter(|(b, _)| b == a).count() as u8;
        e.write_cam(*a, slot, Some(*c)).unwrap();
    }
    for &(t, a) in spikes {
        e.inject_spike(t, a).unwrap();
    }
    e.set_trace(true);
    e.run_until(100_000_000_000).unwrap();
    e
}

fn addr(w: u8, h: u8) -> impl Strategy<Value = NeuronAddr> {
    (0..w, 0..h, 0u8..4, 0u16..256).prop_map(|(x, y, c, n)| at(x, y, c, n))
}

fn word() -> impl Strategy<Value = RoutingWord> {
    (0u16..8, 0u8..5, -3i32..=3, -3i32..=3).prop_map(|(t, c, dx, dy)| RoutingWord::toward(t, c, dx, dy))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn conservation_energy_and_determinism(
        words in proptest::collection::vec((addr(3, 3), word()), 1..40),
        cams in proptest::collection::vec((addr(3, 3), (0u16..8, 0usize..4)), 0..200),
        spikes in proptest::collection::vec((0u64..5_000_000, 0usize..40), 1..60),
        congestion in any::<bool>(),
        jitter in 0u64..2000,
        low_v in any::<bool>(),
    ) {
        let words: Vec<_> = {
            let mut w = words;
            w.sort_by_key(|x| (x.0, x.1.tag));
            let mut seen = std::collections::BTreeMap::new();
            w.retain(|(a, _)| { let n = seen.entry(*a).or_insert(0); *n += 1; *n <= 4 });
            w
        };
        let cams: Vec<_> = {
            let mut seen = std::collections::BTreeMap::new();
            cams.into_iter()
                .filter(|(a, _)| { let n = seen.entry(*a).or_insert(0); *n += 1; *n <= 64 })
                .map(|(a, (t, s))| (a, CamEntry::new(t, SynType::ALL[s])))
                .collect()
        };
        let spikes: Vec<_> = spikes.into_iter().map(|(t, i)| (t, words[i % words.len()].0)).collect();
        let cfg = FabricConfig {
            congestion,
            jitter_ps: jitter,
            supply: if low_v { Supply::V1_3 } else { Supply::V1_8 },
            seed: 9,
            ..routing_cfg(3, 3)
        };
        let a = scenario(cfg.clone(), &words, &cams, &spikes);
        let b = scenario(cfg.clone(), &words, &cams, &spikes);
        let sa = a.stats();
        prop_assert_eq!(&sa, &b.stats());
        prop_assert_eq!(a.render_trace(), b.render_trace());

        let c = sa.counters;
        prop_assert_eq!(c.delivered + c.faults, a.packets_created());
        prop_assert_eq!(sa.in_flight, 0);
        prop_assert_eq!(sa.energy_fj, c.energy_fj(&cfg.energy_table().to_fj()));
        for d in a.deliveries() {
            let w = words.iter().find(|(s, w)| *s == d.src && w.tag == d.tag && w.core == d.core).unwrap().1;
            prop_assert_eq!(d.r3_hops, (w.dx + w.dy) as u32);
        }
    }
}
