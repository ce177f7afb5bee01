//! Abstract network description and its TOML netlist format.
//!
//! ```toml
//! name = "ff"
//! seed = 7
//!
//! [[population]]
//! label = "in"
//! size = 64
//! kind = "input"          # virtual sources fed by external events
//!
//! [[population]]
//! label = "hidden"
//! size = 256
//! param_set = "fast"      # optional, defaults to "default"
//!
//! [param_sets.fast]       # core parameters, same schema as the fabric's [core]
//! fast_exc = { tau_ms = 2.0, weight = 800.0, pulse_ms = 0.5 }
//!
//! [[connection]]
//! src = "in"
//! dst = "hidden"
//! rule = "probabilistic"  # all_to_all | one_to_one | probabilistic | explicit
//! p = 0.1
//! syn = "fast_exc"
//! ```

use super::CompileError;
use crate::neuro::CoreParams;
use crate::packets::SynType;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// Global neuron index: populations are numbered consecutively in order.
pub type NeuronId = u32;

pub const DEFAULT_PARAM_SET: &str = "default";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PopKind {
    #[default]
    Neuron,
    /// Not simulated; each member is a tag driven by external events.
    Input,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Population {
    pub label: String,
    pub size: u32,
    #[serde(default)]
    pub kind: PopKind,
    #[serde(default = "default_param_set")]
    pub param_set: String,
}

fn default_param_set() -> String {
    DEFAULT_PARAM_SET.to_string()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Connection {
    pub src: NeuronId,
    pub dst: NeuronId,
    pub syn: SynType,
    /// Number of CAM words the edge occupies.
    pub multiplicity: u8,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub name: String,
    pub seed: u64,
    pub populations: Vec<Population>,
    pub param_sets: BTreeMap<String, CoreParams>,
    pub connections: Vec<Connection>,
}

impl NetworkSpec {
    pub fn new(name: &str, seed: u64) -> Self {
        NetworkSpec {
            name: name.to_string(),
            seed,
            ..Self::default()
        }
    }

    /// Appends a population and returns the id of its first neuron.
    pub fn add_population(&mut self, label: &str, size: u32, kind: PopKind, param_set: &str) -> NeuronId {
        let first = self.neuron_count();
        self.populations.push(Population {
            label: label.to_string(),
            size,
            kind,
            param_set: param_set.to_string(),
        });
        first
    }

    pub fn connect(&mut self, src: NeuronId, dst: NeuronId, syn: SynType) {
        self.connections.push(Connection {
            src,
            dst,
            syn,
            multiplicity: 1,
        });
    }

    pub fn neuron_count(&self) -> u32 {
        self.populations.iter().map(|p| p.size).sum()
    }

    pub fn population_index(&self, label: &str) -> Option<usize> {
        self.populations.iter().position(|p| p.label == label)
    }

    /// First neuron id of each population.
    pub fn offsets(&self) -> Vec<NeuronId> {
        let mut acc = 0;
        self.populations
            .iter()
            .map(|p| {
                let o = acc;
                acc += p.size;
                o
            })
            .collect()
    }

    pub fn range_of(&self, label: &str) -> Option<std::ops::Range<NeuronId>> {
        let i = self.population_index(label)?;
        let o = self.offsets()[i];
        Some(o..o + self.populations[i].size)
    }

    /// Population index of every neuron.
    pub fn population_of(&self) -> Vec<usize> {
        self.populations
            .iter()
            .enumerate()
            .flat_map(|(i, p)| std::iter::repeat_n(i, p.size as usize))
            .collect()
    }

    pub fn is_input(&self, pop_of: &[usize], n: NeuronId) -> bool {
        self.populations[pop_of[n as usize]].kind == PopKind::Input
    }

    pub fn params(&self, name: &str, fallback: &CoreParams) -> Result<CoreParams, CompileError> {
        match self.param_sets.get(name) {
            Some(p) => Ok(*p),
            None if name == DEFAULT_PARAM_SET => Ok(*fallback),
            None => Err(CompileError::UnknownParamSet(name.to_string())),
        }
    }

    /// Expected edge multiset as `(src, dst, type) -> CAM words`.
    pub fn edge_multiset(&self) -> BTreeMap<(NeuronId, NeuronId, SynType), u32> {
        let mut m = BTreeMap::new();
        for c in &self.connections {
            *m.entry((c.src, c.dst, c.syn)).or_insert(0) += c.multiplicity as u32;
        }
        m
    }

    /// Structural checks independent of any fabric.
    pub fn validate(&self) -> Result<(), CompileError> {
        let mut labels = BTreeSet::new();
        for p in &self.populations {
            if !labels.insert(p.label.as_str()) {
                return Err(CompileError::Netlist(format!("duplicate population `{}`", p.label)));
            }
            if p.size == 0 {
                return Err(CompileError::Netlist(format!("population `{}` is empty", p.label)));
            }
            if p.kind == PopKind::Neuron && p.param_set != DEFAULT_PARAM_SET && !self.param_sets.contains_key(&p.param_set) {
                return Err(CompileError::UnknownParamSet(p.param_set.clone()));
            }
        }
        for ps in self.param_sets.values() {
            ps.validate().map_err(|e| CompileError::Netlist(e.to_string()))?;
        }
        let n = self.neuron_count();
        let pop_of = self.population_of();
        let mut seen = BTreeSet::new();
        for c in &self.connections {
            if c.src >= n || c.dst >= n {
                return Err(CompileError::Netlist(format!("edge {}->{} references a missing neuron", c.src, c.dst)));
            }
            if self.is_input(&pop_of, c.dst) {
                return Err(CompileError::Netlist(format!("edge {}->{} targets an input", c.src, c.dst)));
            }
            if c.multiplicity == 0 {
                return Err(CompileError::Netlist(format!("edge {}->{} has zero multiplicity", c.src, c.dst)));
            }
            if !seen.insert((c.src, c.dst, c.syn)) {
                return Err(CompileError::Netlist(format!(
                    "duplicate edge {}->{} ({}); use multiplicity instead",
                    c.src, c.dst, c.syn
                )));
            }
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self, CompileError> {
        let file: NetlistFile = toml::from_str(text).map_err(|e| CompileError::Netlist(e.to_string()))?;
        file.expand()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    AllToAll,
    OneToOne,
    Probabilistic,
    Explicit,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleSpec {
    src: String,
    dst: String,
    rule: Rule,
    syn: SynType,
    #[serde(default = "one")]
    multiplicity: u8,
    /// Connection probability for `probabilistic`.
    p: Option<f64>,
    /// Seed for `probabilistic`; defaults to the network seed plus the rule index.
    seed: Option<u64>,
    /// Population-local `(src, dst)` pairs for `explicit`.
    #[serde(default)]
    edges: Vec<(u32, u32)>,
    /// Keep `i -> i` edges when `src` and `dst` are the same population.
    #[serde(default = "yes")]
    allow_self: bool,
}

fn one() -> u8 {
    1
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetlistFile {
    #[serde(default)]
    name: String,
    #[serde(default)]
    seed: u64,
    #[serde(default, rename = "population")]
    populations: Vec<Population>,
    #[serde(default)]
    param_sets: BTreeMap<String, CoreParams>,
    #[serde(default, rename = "connection")]
    connections: Vec<RuleSpec>,
}

impl NetlistFile {
    fn expand(self) -> Result<NetworkSpec, CompileError> {
        let mut spec = NetworkSpec {
            name: self.name,
            seed: self.seed,
            populations: self.populations,
            param_sets: self.param_sets,
            connections: Vec::new(),
        };
        for (ri, r) in self.connections.iter().enumerate() {
            let src = spec
                .range_of(&r.src)
                .ok_or_else(|| CompileError::Netlist(format!("connection {ri}: unknown population `{}`", r.src)))?;
            let dst = spec
                .range_of(&r.dst)
                .ok_or_else(|| CompileError::Netlist(format!("connection {ri}: unknown population `{}`", r.dst)))?;
            let same = r.src == r.dst;
            let push = |s: u32, d: u32, out: &mut Vec<Connection>| {
                if same && s == d && !r.allow_self {
                    return;
                }
                out.push(Connection {
                    src: src.start + s,
                    dst: dst.start + d,
                    syn: r.syn,
                    multiplicity: r.multiplicity,
                });
            };
            let (ns, nd) = (src.len() as u32, dst.len() as u32);
            let mut out = Vec::new();
            match r.rule {
                Rule::AllToAll => {
                    for s in 0..ns {
                        for d in 0..nd {
                            push(s, d, &mut out);
                        }
                    }
                }
                Rule::OneToOne => {
                    if ns != nd {
                        return Err(CompileError::Netlist(format!(
                            "connection {ri}: one_to_one needs equal sizes, got {ns} and {nd}"
                        )));
                    }
                    for i in 0..ns {
                        push(i, i, &mut out);
                    }
                }
                Rule::Probabilistic => {
                    let p = r.p.ok_or_else(|| CompileError::Netlist(format!("connection {ri}: missing p")))?;
                    if !(0.0..=1.0).contains(&p) {
                        return Err(CompileError::Netlist(format!("connection {ri}: p = {p} outside [0, 1]")));
                    }
                    let seed = r.seed.unwrap_or(spec.seed.wrapping_add(ri as u64));
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    for s in 0..ns {
                        for d in 0..nd {
                            if rng.random_bool(p) {
                                push(s, d, &mut out);
                            }
                        }
                    }
                }
                Rule::Explicit => {
                    for &(s, d) in &r.edges {
                        if s >= ns || d >= nd {
                            return Err(CompileError::Netlist(format!(
                                "connection {ri}: edge ({s}, {d}) outside populations"
                            )));
                        }
                        push(s, d, &mut out);
                    }
                }
            }
            spec.connections.extend(out);
        }
        spec.validate()?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const NET: &str = r#"
name = "demo"
seed = 5

[[population]]
label = "in"
size = 4
kind = "input"

[[population]]
label = "a"
size = 4

[[population]]
label = "b"
size = 3
param_set = "slow"

[param_sets.slow]
fast_exc = { tau_ms = 20.0, weight = 100.0, pulse_ms = 1.0 }

[[connection]]
src = "in"
dst = "a"
rule = "one_to_one"
syn = "fast_exc"

[[connection]]
src = "a"
dst = "b"
rule = "all_to_all"
syn = "sub_inh"
multiplicity = 2

[[connection]]
src = "b"
dst = "b"
rule = "explicit"
syn = "slow_exc"
edges = [[0, 1], [2, 0]]

[[connection]]
src = "a"
dst = "a"
rule = "probabilistic"
syn = "shunt_inh"
p = 1.0
allow_self = false
"#;

    #[test]
    fn expands_all_rules() {
        let spec = NetworkSpec::from_toml(NET).unwrap();
        assert_eq!(spec.neuron_count(), 11);
        let by_type = |t: SynType| spec.connections.iter().filter(|c| c.syn == t).count();
        assert_eq!(by_type(SynType::FastExc), 4);
        assert_eq!(by_type(SynType::SubInh), 12);
        assert_eq!(by_type(SynType::SlowExc), 2);
        assert_eq!(by_type(SynType::ShuntInh), 12);
        assert!(spec.connections.iter().any(|c| c.src == 8 && c.dst == 9));
        assert_eq!(spec.param_sets["slow"].fast_exc.tau_ms, 20.0);
    }

    #[test]
    fn rejects_bad_netlists() {
        assert!(NetworkSpec::from_toml("[[population]]\nlabel = \"a\"\nsize = 0\n").is_err());
        let dup = "[[population]]\nlabel = \"a\"\nsize = 2\n[[connection]]\nsrc = \"a\"\ndst = \"a\"\nrule = \"explicit\"\nsyn = \"fast_exc\"\nedges = [[0, 1], [0, 1]]\n";
        assert!(NetworkSpec::from_toml(dup).is_err());
        let unknown = "[[population]]\nlabel = \"a\"\nsize = 2\nparam_set = \"nope\"\n";
        assert!(matches!(NetworkSpec::from_toml(unknown), Err(CompileError::UnknownParamSet(_))));
        let to_input = "[[population]]\nlabel = \"i\"\nsize = 2\nkind = \"input\"\n[[connection]]\nsrc = \"i\"\ndst = \"i\"\nrule = \"one_to_one\"\nsyn = \"fast_exc\"\n";
        assert!(NetworkSpec::from_toml(to_input).is_err());
    }

    #[test]
    fn probabilistic_is_seeded() {
        let text = "seed = 9\n[[population]]\nlabel = \"a\"\nsize = 50\n[[connection]]\nsrc = \"a\"\ndst = \"a\"\nrule = \"probabilistic\"\np = 0.1\nsyn = \"fast_exc\"\n";
        let a = NetworkSpec::from_toml(text).unwrap();
        let b = NetworkSpec::from_toml(text).unwrap();
        assert_eq!(a, b);
        let n = a.connections.len();
        assert!(n > 150 && n < 350, "{n}");
    }
}
