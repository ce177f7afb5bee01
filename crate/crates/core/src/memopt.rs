//! Analytic routing-memory model for two-stage tag-based routing.
//!
//! A network of `N` neurons with fan-out `F` is split into `N/C` clusters of
//! `C` neurons that share `K = αC` tags. Each source stores `F/M` point-to-point
//! entries of `log2 K + log2(N/C)` bits; each target stores `KM/C` tags of
//! `log2 K` bits. All quantities are per neuron and real-valued unless
//! [`BitMode::Hardware`] is requested.

use std::fmt::Write as _;
use thiserror::Error;

/// Relative slack used when comparing the two sides of a constraint.
const CONSTRAINT_RTOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MemError {
    #[error("parameter `{name}` = {value} is outside its domain ({reason})")]
    Domain {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
}

fn positive(name: &'static str, value: f64) -> Result<f64, MemError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(MemError::Domain {
            name,
            value,
            reason: "must be finite and positive",
        })
    }
}

/// Network and design-point parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetParams {
    /// Total neuron count.
    pub n: f64,
    /// Fan-out per neuron.
    pub f: f64,
    /// Cluster (core) size.
    pub c: f64,
    /// Tags per cluster.
    pub k: f64,
    /// Within-cluster fan-out; fan-out copies per destination cluster.
    pub m: f64,
}

impl NetParams {
    pub fn new(n: f64, f: f64, c: f64, k: f64, m: f64) -> Self {
        NetParams { n, f, c, k, m }
    }

    pub fn with_alpha(n: f64, f: f64, c: f64, alpha: f64, m: f64) -> Self {
        NetParams {
            n,
            f,
            c,
            k: alpha * c,
            m,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.k / self.c
    }

    fn validate(&self) -> Result<(), MemError> {
        positive("N", self.n)?;
        positive("F", self.f)?;
        positive("C", self.c)?;
        positive("K", self.k)?;
        positive("M", self.m)?;
        if self.k < 1.0 {
            return Err(MemError::Domain {
                name: "K",
                value: self.k,
                reason: "at least one tag is required",
            });
        }
        if self.k * self.n / self.c < 1.0 {
            return Err(MemError::Domain {
                name: "N",
                value: self.n,
                reason: "K*N/C must be at least 1",
            });
        }
        Ok(())
    }
}

/// How `log2` terms and entry counts are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BitMode {
    /// Real arithmetic with exact logarithms.
    #[default]
    Exact,
    /// Bit widths and entry counts rounded up to integers.
    Hardware,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Requirement {
    /// `F ≥ M*` (for α = 1, `C ≥ N^(1/F)`).
    FanOutCoversOptimum,
    /// `C ≥ M*`, written as `C·sqrt(α log2 αC) ≥ sqrt(F log2 αN)`.
    ClusterCoversOptimum,
    /// The chosen design point satisfies `M ≤ F`.
    DesignFanOut,
    /// The chosen design point satisfies `M ≤ C`.
    DesignCluster,
}

impl Requirement {
    pub fn label(self) -> &'static str {
        match self {
            Requirement::FanOutCoversOptimum => "F>=M*",
            Requirement::ClusterCoversOptimum => "C>=M*",
            Requirement::DesignFanOut => "M<=F",
            Requirement::DesignCluster => "M<=C",
        }
    }
}

/// One evaluated constraint. `margin = lhs - rhs`; negative means violated.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintCheck {
    pub requirement: Requirement,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    /// Smallest integer cluster size that satisfies this requirement with the
    /// other parameters held fixed, when the requirement depends on `C`.
    pub min_cluster: Option<u64>,
}

impl ConstraintCheck {
    pub fn satisfied(&self) -> bool {
        self.lhs >= self.rhs - CONSTRAINT_RTOL * self.rhs.abs().max(1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemReport {
    pub mem_source_bits: f64,
    pub mem_target_bits: f64,
    pub mem_total_bits: f64,
    pub m_star: f64,
    pub feasible: bool,
    pub violations: Vec<ConstraintCheck>,
}

/// Closed-form optimum with its neighbouring integer design points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalM {
    pub value: f64,
    pub floor: u64,
    pub ceil: u64,
}

/// Flat source-addressed routing cost, `F·log2 N` bits per neuron.
pub fn mem_flat(n: f64, f: f64) -> Result<f64, MemError> {
    if !(n.is_finite() && n >= 2.0) {
        return Err(MemError::Domain {
            name: "N",
            value: n,
            reason: "at least two neurons are required",
        });
    }
    if !(f.is_finite() && f >= 1.0) {
        return Err(MemError::Domain {
            name: "F",
            value: f,
            reason: "fan-out must be at least 1",
        });
    }
    Ok(f * n.log2())
}

pub fn mem_two_stage(p: &NetParams) -> Result<MemReport, MemError> {
    mem_two_stage_with(p, BitMode::Exact)
}

pub fn mem_two_stage_with(p: &NetParams, mode: BitMode) -> Result<MemReport, MemError> {
    p.validate()?;
    let (tag_bits, addr_bits, entries, targets) = match mode {
        BitMode::Exact => (
            p.k.log2(),
            (p.n / p.c).log2(),
            p.f / p.m,
            p.k * p.m / p.c,
        ),
        BitMode::Hardware => (
            p.k.log2().ceil(),
            (p.n / p.c).log2().max(0.0).ceil(),
            (p.f / p.m).ceil(),
            (p.k * p.m / p.c).ceil(),
        ),
    };
    let mem_source_bits = entries * (tag_bits + addr_bits);
    let mem_target_bits = targets * tag_bits;
    let m_star = m_star(p.n, p.f, p.c, p.alpha()).map(|m| m.value).unwrap_or(f64::NAN);
    let violations: Vec<_> = check_constraints(p)
        .into_iter()
        .filter(|c| !c.satisfied())
        .collect();
    Ok(MemReport {
        mem_source_bits,
        mem_target_bits,
        mem_total_bits: mem_source_bits + mem_target_bits,
        m_star,
        feasible: violations.is_empty(),
        violations,
    })
}

fn log_terms(n: f64, f: f64, c: f64, alpha: f64) -> Result<(f64, f64), MemError> {
    positive("N", n)?;
    positive("F", f)?;
    positive("C", c)?;
    positive("alpha", alpha)?;
    if alpha * c <= 1.0 {
        return Err(MemError::Domain {
            name: "C",
            value: c,
            reason: "alpha*C must exceed 1",
        });
    }
    if alpha * n <= 1.0 {
        return Err(MemError::Domain {
            name: "N",
            value: n,
            reason: "alpha*N must exceed 1",
        });
    }
    Ok(((alpha * n).log2(), (alpha * c).log2()))
}

/// Memory-minimising within-cluster fan-out `sqrt((F/α)·log2(αN)/log2(αC))`.
pub fn m_star(n: f64, f: f64, c: f64, alpha: f64) -> Result<OptimalM, MemError> {
    let (log_n, log_c) = log_terms(n, f, c, alpha)?;
    let value = (f / alpha * log_n / log_c).sqrt();
    Ok(OptimalM {
        value,
        floor: (value.floor() as u64).max(1),
        ceil: value.ceil() as u64,
    })
}

/// Total bits per neuron at `M = M*`: `2·sqrt(αF·log2(αC)·log2(αN))`.
pub fn mem_at_optimum(n: f64, f: f64, c: f64, alpha: f64) -> Result<f64, MemError> {
    let (log_n, log_c) = log_terms(n, f, c, alpha)?;
    Ok(2.0 * (alpha * f * log_c * log_n).sqrt())
}

/// Smallest integer `c ≥ lo` with `pred(c)`; `pred` must be monotone.
fn smallest_integer(lo: u64, pred: impl Fn(f64) -> bool) -> Option<u64> {
    let mut hi = lo.max(1);
    while !pred(hi as f64) {
        hi = hi.checked_mul(2)?;
        if hi > 1 << 60 {
            return None;
        }
    }
    let mut lo = lo;
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if pred(mid as f64) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Some(lo)
}

fn within(lhs: f64, rhs: f64) -> bool {
    lhs >= rhs - CONSTRAINT_RTOL * rhs.abs().max(1.0)
}

/// Evaluates every feasibility requirement for `p`, satisfied or not.
pub fn check_constraints(p: &NetParams) -> Vec<ConstraintCheck> {
    let alpha = p.alpha();
    let mut out = Vec::with_capacity(4);
    // Smallest cluster size for which both logarithms are positive.
    let c_lo = ((1.0 / alpha).floor() as u64).saturating_add(1);
    let log_n = (alpha * p.n).log2();

    if let Ok(opt) = m_star(p.n, p.f, p.c, alpha) {
        let fan_pred = |c: f64| within(alpha * p.f * (alpha * c).log2(), log_n);
        out.push(ConstraintCheck {
            requirement: Requirement::FanOutCoversOptimum,
            lhs: p.f,
            rhs: opt.value,
            margin: p.f - opt.value,
            min_cluster: smallest_integer(c_lo, fan_pred),
        });
        let lhs_of = |c: f64| c * (alpha * (alpha * c).log2()).sqrt();
        let rhs = (p.f * log_n).sqrt();
        let lhs = lhs_of(p.c);
        out.push(ConstraintCheck {
            requirement: Requirement::ClusterCoversOptimum,
            lhs,
            rhs,
            margin: lhs - rhs,
            min_cluster: smallest_integer(c_lo, |c| within(lhs_of(c), rhs)),
        });
    }
    out.push(ConstraintCheck {
        requirement: Requirement::DesignFanOut,
        lhs: p.f,
        rhs: p.m,
        margin: p.f - p.m,
        min_cluster: None,
    });
    out.push(ConstraintCheck {
        requirement: Requirement::DesignCluster,
        lhs: p.c,
        rhs: p.m,
        margin: p.c - p.m,
        min_cluster: Some(p.m.ceil().max(1.0) as u64),
    });
    out
}

/// Only the violated requirements of [`check_constraints`].
pub fn violations(p: &NetParams) -> Vec<ConstraintCheck> {
    check_constraints(p)
        .into_iter()
        .filter(|c| !c.satisfied())
        .collect()
}

/// Width of the destination-cluster address in a source entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AddressBits {
    /// Fixed hardware field, independent of network size.
    Fixed(u32),
    /// `log2(N/C)` evaluated for each model size.
    PerSize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingConfig {
    pub f: f64,
    pub c: f64,
    pub k: f64,
    pub m: f64,
    pub address_bits: AddressBits,
    /// Synaptic weight-type bits added to each neuron's budget.
    pub extra_bits_per_neuron: u32,
}

impl ScalingConfig {
    /// The fabricated design: 256-neuron cores, 10-bit tags, 64 CAM words and
    /// four 20-bit SRAM words per neuron (`KM/C = 64`, `F/M = 4`).
    pub fn prototype() -> Self {
        ScalingConfig {
            f: 64.0,
            c: 256.0,
            k: 1024.0,
            m: 16.0,
            address_bits: AddressBits::Fixed(10),
            extra_bits_per_neuron: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingRow {
    pub n: u64,
    pub bits_per_neuron: f64,
    pub bits_total: f64,
}

pub fn scaling_table(model_sizes: &[u64], cfg: &ScalingConfig) -> Result<Vec<ScalingRow>, MemError> {
    positive("F", cfg.f)?;
    positive("C", cfg.c)?;
    positive("K", cfg.k)?;
    positive("M", cfg.m)?;
    model_sizes
        .iter()
        .map(|&n| {
            positive("N", n as f64)?;
            let addr = match cfg.address_bits {
                AddressBits::Fixed(b) => b as f64,
                AddressBits::PerSize => (n as f64 / cfg.c).log2(),
            };
            let per_neuron = cfg.f / cfg.m * (cfg.k.log2() + addr)
                + cfg.k * cfg.m / cfg.c * cfg.k.log2()
                + cfg.extra_bits_per_neuron as f64;
            Ok(ScalingRow {
                n,
                bits_per_neuron: per_neuron,
                bits_total: per_neuron * n as f64,
            })
        })
        .collect()
}

/// One line of the `analyze-memory` table, evaluated at `M = M*`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisRow {
    pub n: f64,
    pub f: f64,
    pub c: f64,
    pub k: f64,
    pub m_star: f64,
    pub mem_source_bits: f64,
    pub mem_target_bits: f64,
    pub mem_total_bits: f64,
    pub flat_bits: f64,
    pub feasible: bool,
}

pub fn analyze(n: f64, f: f64, c: f64, alpha: f64) -> Result<AnalysisRow, MemError> {
    let opt = m_star(n, f, c, alpha)?;
    let p = NetParams::with_alpha(n, f, c, alpha, opt.value);
    let report = mem_two_stage(&p)?;
    Ok(AnalysisRow {
        n,
        f,
        c,
        k: p.k,
        m_star: opt.value,
        mem_source_bits: report.mem_source_bits,
        mem_target_bits: report.mem_target_bits,
        mem_total_bits: report.mem_total_bits,
        flat_bits: mem_flat(n, f)?,
        feasible: report.feasible,
    })
}

pub const ANALYSIS_COLUMNS: [&str; 10] = [
    "N", "F", "C", "K", "M*", "MEM_S", "MEM_T", "MEM", "flat", "feasible",
];

pub fn render_analysis(rows: &[AnalysisRow]) -> String {
    let mut out = ANALYSIS_COLUMNS.join("\t");
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{:.4}\t{}",
            r.n, r.f, r.c, r.k, r.m_star, r.mem_source_bits, r.mem_target_bits,
            r.mem_total_bits, r.flat_bits, r.feasible
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn flat_examples() {
        assert_eq!(mem_flat(2f64.powi(20), 2f64.powi(13)).unwrap(), 163_840.0);
        assert_eq!(mem_flat(2.0, 1.0).unwrap(), 1.0);
        assert_eq!(mem_flat(1024.0, 100.0).unwrap(), 1000.0);
        assert!(mem_flat(1.0, 3.0).is_err());
        assert!(mem_flat(8.0, 0.0).is_err());
        assert!(mem_flat(-8.0, 2.0).is_err());
    }

    #[test]
    fn two_stage_sums_and_alpha_one_identity() {
        let p = NetParams::with_alpha(1e6, 1000.0, 256.0, 1.0, 30.0);
        let r = mem_two_stage(&p).unwrap();
        assert_eq!(r.mem_total_bits, r.mem_source_bits + r.mem_target_bits);
        let eq3 = p.f / p.m * p.n.log2() + p.m * p.c.log2();
        assert!(close(r.mem_total_bits, eq3, 1e-9));
    }

    #[test]
    fn two_stage_domain_errors() {
        assert!(mem_two_stage(&NetParams::new(0.0, 1.0, 1.0, 1.0, 1.0)).is_err());
        assert!(mem_two_stage(&NetParams::new(10.0, 1.0, 4.0, 0.5, 1.0)).is_err());
        assert!(mem_two_stage(&NetParams::new(10.0, 1.0, 4.0, 2.0, -1.0)).is_err());
    }

    #[test]
    fn million_neuron_optimum() {
        let n = 2f64.powi(20);
        let f = 2f64.powi(13);
        let opt = m_star(n, f, 256.0, 1.0).unwrap();
        assert!(close(opt.value, 20480f64.sqrt(), 1e-9));
        assert_eq!((opt.floor, opt.ceil), (143, 144));
        let direct = mem_two_stage(&NetParams::with_alpha(n, f, 256.0, 1.0, opt.value))
            .unwrap()
            .mem_total_bits;
        let closed = mem_at_optimum(n, f, 256.0, 1.0).unwrap();
        assert!(close(closed, 2.0 * (8192.0f64 * 8.0 * 20.0).sqrt(), 1e-9));
        assert!(close(direct, closed, 1e-9));
        assert!(close(closed, 2289.7, 0.05));
    }

    #[test]
    fn ten_billion_neuron_design_point() {
        let opt = m_star(1e10, 5000.0, 256.0, 1.0).unwrap();
        assert!((143.5..=144.5).contains(&opt.value));
        assert_eq!((5000.0 / opt.value).ceil() as u64, 35);
    }

    #[test]
    fn single_cluster_optimum_is_sqrt_f() {
        let opt = m_star(256.0, 400.0, 256.0, 1.0).unwrap();
        assert!(close(opt.value, 20.0, 1e-12));
    }

    #[test]
    fn m_star_domain() {
        assert!(m_star(1e6, 100.0, 1.0, 1.0).is_err());
        assert!(m_star(1e6, 100.0, 4.0, 0.25).is_err());
        assert!(mem_at_optimum(1e6, 100.0, 0.5, 1.0).is_err());
    }

    #[test]
    fn storage_coefficient_known_discrepant() {
        // KNOWN-DISCREPANT: the frequently quoted 424.26·sqrt(log2 N) storage
        // for C = 256, F = 5000 equals 2·sqrt(5000·9), i.e. a 9-bit cluster
        // term. The closed form with log2 256 = 8 gives 400·sqrt(log2 N).
        let quoted = 424.26;
        assert!(close(2.0 * (5000.0f64 * 9.0).sqrt(), quoted, 0.01));
        for n in [1e6, 1e8, 1e10] {
            let mem = mem_at_optimum(n, 5000.0, 256.0, 1.0).unwrap();
            assert!(close(mem, 400.0 * n.log2().sqrt(), 1e-9));
            assert!((mem - quoted * n.log2().sqrt()).abs() > 1.0);
        }
    }

    #[test]
    fn cluster_size_requirements() {
        let p = NetParams::with_alpha(1e10, 5000.0, 256.0, 1.0, 144.0);
        let checks = check_constraints(&p);
        let req2 = checks
            .iter()
            .find(|c| c.requirement == Requirement::ClusterCoversOptimum)
            .unwrap();
        assert_eq!(req2.min_cluster, Some(152));
        assert!(req2.margin > 0.0);
        assert!(checks.iter().all(|c| c.satisfied()));
        assert!(mem_two_stage(&p).unwrap().feasible);

        let q = NetParams::with_alpha(1e10, 10.0, 256.0, 1.0, 5.0);
        let req1 = check_constraints(&q)
            .into_iter()
            .find(|c| c.requirement == Requirement::FanOutCoversOptimum)
            .unwrap();
        assert_eq!(req1.min_cluster, Some(10));
    }

    #[test]
    fn small_cluster_is_reported() {
        let p = NetParams::with_alpha(1e10, 5000.0, 64.0, 1.0, 60.0);
        let v = violations(&p);
        assert!(v
            .iter()
            .any(|c| c.requirement == Requirement::ClusterCoversOptimum && c.margin < 0.0));
        let r = mem_two_stage(&p).unwrap();
        assert!(!r.feasible);
        assert_eq!(r.violations.len(), v.len());
    }

    #[test]
    fn hardware_mode_rounds_up() {
        let p = NetParams::with_alpha(3000.0, 100.0, 200.0, 1.0, 7.0);
        let exact = mem_two_stage(&p).unwrap();
        let hw = mem_two_stage_with(&p, BitMode::Hardware).unwrap();
        assert!(hw.mem_source_bits >= exact.mem_source_bits);
        assert!(hw.mem_target_bits >= exact.mem_target_bits);
        // ceil(100/7) = 15 entries of ceil(log2 200) + ceil(log2 15) = 8 + 4 bits.
        assert_eq!(hw.mem_source_bits, 15.0 * 12.0);
        assert_eq!(hw.mem_target_bits, 7.0 * 8.0);
    }

    #[test]
    fn prototype_scaling_is_linear() {
        let sizes: Vec<u64> = (10..=20).step_by(2).map(|e| 1u64 << e).collect();
        let cfg = ScalingConfig::prototype();
        assert_eq!(cfg.k * cfg.m / cfg.c, 64.0);
        let rows = scaling_table(&sizes, &cfg).unwrap();
        let ratio = rows[0].bits_total / rows[0].n as f64;
        for w in rows.windows(2) {
            assert!(w[1].bits_total > w[0].bits_total);
        }
        for r in &rows {
            assert_eq!(r.bits_total / r.n as f64, ratio);
        }
        // 4 × (10 + 10) source bits + 64 × 10 tag bits + 2 weight-type bits.
        assert_eq!(ratio, 722.0);
        let doubled = scaling_table(&[2048, 4096], &cfg).unwrap();
        assert_eq!(doubled[1].bits_total, 2.0 * doubled[0].bits_total);
    }

    #[test]
    fn analysis_table_has_flat_row() {
        let row = analyze(2f64.powi(20), 2f64.powi(13), 256.0, 1.0).unwrap();
        let text = render_analysis(&[row]);
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), ANALYSIS_COLUMNS.join("\t"));
        let cols: Vec<&str> = lines.next().unwrap().split('\t').collect();
        assert_eq!(cols.len(), 10);
        assert_eq!(cols[8], "163840.0000");
        assert_eq!(cols[9], "true");
    }
}
