use dynapsim_core::memopt::*;
use proptest::prelude::*;

fn total(n: f64, f: f64, c: f64, alpha: f64, m: f64) -> f64 {
    mem_two_stage(&NetParams::with_alpha(n, f, c, alpha, m))
        .unwrap()
        .mem_total_bits
}

// N, F, C, alpha with alpha*C > 1 and alpha*N > 1.
fn params() -> impl Strategy<Value = (f64, f64, f64, f64)> {
    (10u32..34, 1u32..14, 2u32..12, 0u32..4).prop_map(|(ln, lf, lc, la)| {
        let c = (1u64 << lc) as f64;
        let n = (1u64 << ln.max(lc + 1)) as f64;
        let f = (1u64 << lf) as f64;
        let alpha = [0.5, 1.0, 2.0, 4.0][la as usize];
        (n, f, c, alpha)
    })
}

proptest! {
    #[test]
    fn slope_changes_sign_at_m_star((n, f, c, alpha) in params()) {
        let m = m_star(n, f, c, alpha).unwrap().value;
        let h = 1e-3 * m;
        let slope = |x: f64| (total(n, f, c, alpha, x + h) - total(n, f, c, alpha, x - h)) / (2.0 * h);
        prop_assert!(slope(0.8 * m) < 0.0);
        prop_assert!(slope(1.25 * m) > 0.0);
    }

    #[test]
    fn optimum_is_a_lower_bound((n, f, c, alpha) in params()) {
        let best = mem_at_optimum(n, f, c, alpha).unwrap();
        let hi = f.min(c) as u64;
        for m in 1..=hi.min(512) {
            let v = total(n, f, c, alpha, m as f64);
            prop_assert!(best <= v * (1.0 + 1e-12), "M={m}: {best} > {v}");
        }
        let at_star = total(n, f, c, alpha, m_star(n, f, c, alpha).unwrap().value);
        prop_assert!((at_star - best).abs() <= 1e-9 * best);
    }

    #[test]
    fn larger_clusters_add_no_violation((n, f, c, alpha) in params(), m in 1u32..64) {
        let m = m as f64;
        let before: Vec<_> = violations(&NetParams::with_alpha(n, f, c, alpha, m))
            .into_iter().map(|v| v.requirement).collect();
        let after: Vec<_> = violations(&NetParams::with_alpha(n, f, 2.0 * c, alpha, m))
            .into_iter().map(|v| v.requirement).collect();
        for r in after {
            prop_assert!(before.contains(&r), "{r:?} appeared when C doubled");
        }
    }

    // 2*sqrt(F log C log N) <= F log N  <=>  F*log2 N >= 4*log2 C.
    #[test]
    fn two_stage_beats_flat_exactly_when_fan_out_is_large((n, f, c, _a) in params()) {
        let feasible = violations(&NetParams::with_alpha(n, f, c, 1.0, m_star(n, f, c, 1.0).unwrap().value)).is_empty();
        prop_assume!(feasible);
        let two = mem_at_optimum(n, f, c, 1.0).unwrap();
        let flat = mem_flat(n, f).unwrap();
        let margin = f * n.log2() - 4.0 * c.log2();
        if margin.abs() > 1e-9 {
            prop_assert_eq!(two < flat, margin > 0.0);
        }
    }
}

#[test]
fn flat_and_two_stage_at_c_equal_n() {
    // With a single cluster the optimum is M* = sqrt(F) and the cost 2 sqrt(F) log2 N.
    let n = 1024.0;
    for f in [1.0, 4.0, 16.0, 64.0] {
        let two = mem_at_optimum(n, f, n, 1.0).unwrap();
        assert!((two - 2.0 * f64::sqrt(f) * 10.0).abs() < 1e-9);
        let flat = mem_flat(n, f).unwrap();
        assert_eq!(two <= flat, f >= 4.0);
    }
}
