use dynapsim_core::fabric::{r1_emit, r3_route, Port};
use dynapsim_core::packets::*;
use proptest::prelude::*;

#[test]
fn routing_word_round_trip_is_exhaustive() {
    for v in 0..(1u32 << ROUTING_WORD_BITS) {
        let w = decode_routing_word(v).unwrap();
        assert_eq!(encode_routing_word(&w).unwrap(), v);
    }
    assert!(decode_routing_word(1 << ROUTING_WORD_BITS).is_err());
}

#[test]
fn cam_entry_round_trip_is_exhaustive() {
    for v in 0..(1u16 << CAM_ENTRY_BITS) {
        let e = decode_cam_entry(v).unwrap();
        assert_eq!(encode_cam_entry(&e).unwrap(), v);
    }
    assert!(decode_cam_entry(1 << CAM_ENTRY_BITS).is_err());
}

fn word() -> impl Strategy<Value = RoutingWord> {
    (0u32..1 << ROUTING_WORD_BITS).prop_map(|v| decode_routing_word(v).unwrap())
}

proptest! {
    #[test]
    fn decode_encode_is_identity(w in word()) {
        prop_assert_eq!(decode_routing_word(encode_routing_word(&w).unwrap()).unwrap(), w);
    }

    #[test]
    fn r3_steps_keep_fields_in_range(w in word(), arrivals in proptest::collection::vec(0usize..5, 1..10)) {
        let src = NeuronAddr { chip: ChipCoord::new(0, 0), core: 0, neuron: 0 };
        let mut p = Packet::from_word(&w, 0, src, 0);
        for a in arrivals {
            let (_, q) = r3_route(&p, Port::ALL[a]);
            prop_assert!(q.fields_in_range());
            prop_assert!(q.dx <= p.dx && q.dy <= p.dy);
            p = q;
        }
    }

    #[test]
    fn r1_headers_fit(words in proptest::collection::vec(proptest::option::of(word()), 4)) {
        let src = NeuronAddr { chip: ChipCoord::new(1, 1), core: 2, neuron: 7 };
        let slots = [words[0], words[1], words[2], words[3]];
        let mut seq = 0;
        let out = r1_emit(src, &slots, &mut seq);
        prop_assert_eq!(out.len(), slots.iter().flatten().count());
        for (i, p) in out.iter().enumerate() {
            prop_assert!(p.fields_in_range());
            prop_assert_eq!(p.fanout_hdr as usize, out.len() - 1 - i);
        }
    }

    #[test]
    fn image_text_round_trip(
        sram in proptest::collection::btree_map((0u16..4, 0u8..4, 0u16..256, 0u8..4), word(), 0..40),
        cam in proptest::collection::btree_map((0u16..4, 0u8..4, 0u16..256, 0u8..64), 0u16..1 << 12, 0..40),
    ) {
        let mut img = MemoryImage::new();
        for ((c, k, n, s), w) in sram {
            img.sram.insert(SlotAddr::new(c, k, n, s), w);
        }
        for ((c, k, n, s), v) in cam {
            img.cam.insert(SlotAddr::new(c, k, n, s), decode_cam_entry(v).unwrap());
        }
        let text = img.render().unwrap();
        prop_assert_eq!(MemoryImage::parse(&text).unwrap(), img);
    }
}
