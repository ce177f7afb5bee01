//! Window-count classification of output-population rasters.

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowSpec {
    pub delay_ms: f64,
    pub width_ms: f64,
}

impl Default for WindowSpec {
    fn default() -> Self {
        WindowSpec {
            delay_ms: 24.0,
            width_ms: 20.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Class(usize),
    Ambiguous,
}

/// Unique argmax, or `Ambiguous` on ties (including all zero).
pub fn argmax(counts: &[u64]) -> Label {
    let Some(&best) = counts.iter().max() else {
        return Label::Ambiguous;
    };
    let mut hits = counts.iter().enumerate().filter(|(_, &c)| c == best);
    let (i, _) = hits.next().expect("non-empty");
    if hits.next().is_some() {
        Label::Ambiguous
    } else {
        Label::Class(i)
    }
}

/// Output spikes as `(time_ms, class)`.
pub fn window_counts(spikes: &[(f64, usize)], classes: usize, from_ms: f64, to_ms: f64) -> Vec<u64> {
    let mut c = vec![0; classes];
    for &(t, k) in spikes {
        if t >= from_ms && t < to_ms && k < classes {
            c[k] += 1;
        }
    }
    c
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Decision {
    pub onset_ms: f64,
    pub truth: Option<usize>,
    pub counts: Vec<u64>,
    pub label: Label,
    /// End of the shortest window `[onset, onset + t)`, in whole ms, whose
    /// unique argmax is the true class.
    pub first_correct_ms: Option<f64>,
}

impl Decision {
    pub fn correct(&self) -> bool {
        matches!((self.label, self.truth), (Label::Class(a), Some(b)) if a == b)
    }
}

/// One decision per stimulus onset. `horizon_ms` bounds the search for the
/// first correct window.
pub fn classify(
    spikes: &[(f64, usize)],
    classes: usize,
    onsets: &[(f64, Option<usize>)],
    window: WindowSpec,
    horizon_ms: f64,
) -> Vec<Decision> {
    let mut sorted = spikes.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    onsets
        .iter()
        .map(|&(onset, truth)| {
            let from = onset + window.delay_ms;
            let counts = window_counts(&sorted, classes, from, from + window.width_ms);
            let label = argmax(&counts);
            let first_correct_ms = truth.and_then(|k| {
                let mut cum = vec![0u64; classes];
                let mut it = sorted.iter().skip_while(|s| s.0 < onset).peekable();
                let mut t = 1.0;
                while t <= horizon_ms {
                    while let Some(&&(ts, c)) = it.peek() {
                        if ts >= onset + t {
                            break;
                        }
                        if c < classes {
                            cum[c] += 1;
                        }
                        it.next();
                    }
                    if argmax(&cum) == Label::Class(k) {
                        return Some(t);
                    }
                    t += 1.0;
                }
                None
            });
            Decision {
                onset_ms: onset,
                truth,
                counts,
                label,
                first_correct_ms,
            }
        })
        .collect()
}

pub fn render_report(decisions: &[Decision], names: &[String]) -> String {
    let mut out = String::from("presentation\tonset_ms\ttruth\tlabel");
    for n in names {
        let _ = write!(out, "\tcount_{n}");
    }
    out.push_str("\tfirst_correct_ms\n");
    let name = |l: Label| match l {
        Label::Class(i) => names.get(i).cloned().unwrap_or_else(|| i.to_string()),
        Label::Ambiguous => "ambiguous".to_string(),
    };
    for (i, d) in decisions.iter().enumerate() {
        let truth = d.truth.map(|k| name(Label::Class(k))).unwrap_or_else(|| "-".into());
        let _ = write!(out, "{i}\t{:.3}\t{truth}\t{}", d.onset_ms, name(d.label));
        for c in &d.counts {
            let _ = write!(out, "\t{c}");
        }
        match d.first_correct_ms {
            Some(t) => {
                let _ = writeln!(out, "\t{t:.0}");
            }
            None => out.push_str("\t-\n"),
        }
    }
    out
}

/// Histogram of first-correct latencies in 1 ms bins; undecided presentations
/// are counted in a final `none` row.
pub fn render_latency_histogram(decisions: &[Decision]) -> String {
    let mut bins = std::collections::BTreeMap::new();
    let mut none = 0;
    for d in decisions {
        match d.first_correct_ms {
            Some(t) => *bins.entry(t as u64).or_insert(0u64) += 1,
            None => none += 1,
        }
    }
    let mut out = String::from("latency_ms\tcount\n");
    for (t, c) in bins {
        let _ = writeln!(out, "{t}\t{c}");
    }
    let _ = writeln!(out, "none\t{none}");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn silence_is_ambiguous() {
        let d = classify(&[], 4, &[(0.0, Some(1))], WindowSpec::default(), 50.0);
        assert_eq!(d[0].label, Label::Ambiguous);
        assert_eq!(d[0].first_correct_ms, None);
        assert!(!d[0].correct());
    }

    #[test]
    fn single_active_population_wins() {
        // Class 2 at 100 Hz for 100 ms.
        let spikes: Vec<_> = (0..10).map(|k| (k as f64 * 10.0 + 5.0, 2)).collect();
        let d = classify(&spikes, 4, &[(0.0, Some(2))], WindowSpec::default(), 50.0);
        assert_eq!(d[0].label, Label::Class(2));
        assert_eq!(d[0].counts, vec![0, 0, 2, 0]);
        assert_eq!(d[0].first_correct_ms, Some(6.0));
    }

    #[test]
    fn ties_are_never_broken() {
        assert_eq!(argmax(&[3, 3, 1]), Label::Ambiguous);
        assert_eq!(argmax(&[0, 0]), Label::Ambiguous);
        assert_eq!(argmax(&[0, 1]), Label::Class(1));
    }

    #[test]
    fn window_bounds_are_half_open() {
        let w = WindowSpec::default();
        let spikes = [(24.0, 0), (44.0, 1), (43.9, 1), (43.95, 1)];
        let d = classify(&spikes, 2, &[(0.0, None)], w, 50.0);
        assert_eq!(d[0].counts, vec![1, 2]);
    }

    #[test]
    fn report_columns() {
        let d = classify(&[(30.0, 0)], 2, &[(0.0, Some(0))], WindowSpec::default(), 50.0);
        let names = vec!["a".to_string(), "b".to_string()];
        let r = render_report(&d, &names);
        assert_eq!(
            r,
            "presentation\tonset_ms\ttruth\tlabel\tcount_a\tcount_b\tfirst_correct_ms\n0\t0.000\ta\ta\t1\t0\t31\n"
        );
        assert_eq!(render_latency_histogram(&d), "latency_ms\tcount\n31\t1\nnone\t0\n");
    }
}
