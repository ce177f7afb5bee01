//! Offline readout: the most active pooling neurons of each class drive that
//! class's output population.

use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Readout {
    /// Pooling-neuron indices wired to each class, in rank order.
    pub wiring: Vec<Vec<u32>>,
    pub warnings: Vec<String>,
}

/// `counts[class][i]` is the spike count of pooling neuron `i` over that
/// class's training presentations. Ranks by count, ties by lower index, and
/// keeps at most `top` neurons with a non-zero count.
pub fn train_readout(counts: &[Vec<u64>], top: usize) -> Readout {
    let mut wiring = Vec::with_capacity(counts.len());
    let mut warnings = Vec::new();
    for (class, c) in counts.iter().enumerate() {
        let mut ranked: Vec<u32> = (0..c.len() as u32).filter(|&i| c[i as usize] > 0).collect();
        ranked.sort_by_key(|&i| (std::cmp::Reverse(c[i as usize]), i));
        if ranked.len() < top {
            let w = format!("class {class}: only {} active pooling neurons, wiring all of them", ranked.len());
            log::warn!("{w}");
            warnings.push(w);
        }
        ranked.truncate(top);
        wiring.push(ranked);
    }
    Readout { wiring, warnings }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_active_set_is_wired() {
        let mut c = vec![0u64; 256];
        for i in 100..164 {
            c[i] = 5;
        }
        let r = train_readout(&[c], 64);
        assert_eq!(r.wiring[0], (100..164).collect::<Vec<u32>>());
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn disjoint_classes_disjoint_wiring() {
        let mut a = vec![0u64; 256];
        let mut b = vec![0u64; 256];
        for i in 0..128 {
            a[i] = 1 + i as u64;
            b[i + 128] = 1;
        }
        let r = train_readout(&[a, b], 64);
        assert_eq!(r.wiring[0], (64..128).rev().collect::<Vec<u32>>());
        assert_eq!(r.wiring[1], (128..192).collect::<Vec<u32>>());
    }

    #[test]
    fn few_active_neurons_warn() {
        let mut c = vec![0u64; 256];
        c[3] = 2;
        c[9] = 2;
        let r = train_readout(&[c], 64);
        assert_eq!(r.wiring[0], vec![3, 9]);
        assert_eq!(r.warnings.len(), 1);
    }
}
