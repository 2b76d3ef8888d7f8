//! Shared JSON file formats.
//!
//! Circuits travel as `{"nodes": [...], "edges": [{"src", "dst", "sign"}],
//! "markings": {name: {id: sign}}}` with an optional `"order"` array for
//! reduced circuits. Arithmetic and Boolean circuits use a gate list with
//! an `"op"` tag, Boolean gates additionally carrying a `"level"`. Emitted
//! files are canonical (dense ascending ids, sorted keys), so re-reading
//! and re-writing reproduces them byte for byte.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::arith::{ArithCircuit, ArithGate};
use crate::baumslag::{Beta, BrittonWord, RawLetter};
use crate::error::{Error, Result};
use crate::gadget::{BoolCircuit, BoolGate, LayeredBoolCircuit};
use crate::pc::{Marking, NodeId, PowerCircuit};
use crate::reduce::ReducedPc;

pub type MarkingJson = BTreeMap<String, i8>;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct EdgeJson {
    pub src: u32,
    pub dst: u32,
    pub sign: i8,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct CircuitFile {
    pub nodes: Vec<u32>,
    pub edges: Vec<EdgeJson>,
    pub markings: BTreeMap<String, MarkingJson>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<Vec<u32>>,
}

pub fn marking_to_json(m: &Marking) -> MarkingJson {
    m.support()
        .map(|(node, sign)| (node.index().to_string(), sign))
        .collect()
}

pub fn marking_from_json(
    json: &MarkingJson,
    remap: &BTreeMap<u32, NodeId>,
) -> Result<Marking> {
    let mut m = Marking::new();
    for (key, &sign) in json {
        let id: u32 = key
            .parse()
            .map_err(|_| Error::Malformed(format!("bad node id {key:?}")))?;
        let node = *remap
            .get(&id)
            .ok_or_else(|| Error::Malformed(format!("marking references unknown node {id}")))?;
        m.set(node, sign)?;
    }
    Ok(m)
}

/// Canonical encoding: nodes and edges ascending, markings keyed by name.
pub fn circuit_to_file(pc: &PowerCircuit, markings: &BTreeMap<String, Marking>) -> CircuitFile {
    let mut edges: Vec<EdgeJson> = pc
        .edges()
        .map(|(src, dst, sign)| EdgeJson {
            src: src.index() as u32,
            dst: dst.index() as u32,
            sign,
        })
        .collect();
    edges.sort_by_key(|e| (e.src, e.dst));
    CircuitFile {
        nodes: (0..pc.node_count() as u32).collect(),
        edges,
        markings: markings
            .iter()
            .map(|(name, m)| (name.clone(), marking_to_json(m)))
            .collect(),
        order: None,
    }
}

pub fn reduced_to_file(
    reduced: &ReducedPc,
    markings: &BTreeMap<String, Marking>,
) -> CircuitFile {
    let mut file = circuit_to_file(reduced.base(), markings);
    file.order = Some(reduced.order().iter().map(|id| id.index() as u32).collect());
    file
}

pub struct LoadedCircuit {
    pub circuit: PowerCircuit,
    pub markings: BTreeMap<String, Marking>,
    pub order: Option<Vec<NodeId>>,
    /// original file id -> dense node id
    pub remap: BTreeMap<u32, NodeId>,
}

impl LoadedCircuit {
    /// Validates and returns the reduced view, when an order is present.
    pub fn reduced(&self) -> Result<Option<ReducedPc>> {
        match &self.order {
            None => Ok(None),
            Some(order) => Ok(Some(ReducedPc::new(self.circuit.clone(), order.clone())?)),
        }
    }
}

/// Accepts arbitrary unique node ids and renumbers them densely in
/// ascending order, so canonical files load to identical circuits.
pub fn circuit_from_file(file: &CircuitFile) -> Result<LoadedCircuit> {
    let mut sorted = file.nodes.clone();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != file.nodes.len() {
        return Err(Error::Malformed("duplicate node ids".into()));
    }
    let remap: BTreeMap<u32, NodeId> = sorted
        .iter()
        .enumerate()
        .map(|(dense, &id)| (id, NodeId(dense as u32)))
        .collect();
    let mut edges = Vec::with_capacity(file.edges.len());
    for e in &file.edges {
        let src = *remap
            .get(&e.src)
            .ok_or_else(|| Error::Malformed(format!("edge from unknown node {}", e.src)))?;
        let dst = *remap
            .get(&e.dst)
            .ok_or_else(|| Error::Malformed(format!("edge to unknown node {}", e.dst)))?;
        edges.push((src, dst, e.sign));
    }
    let circuit = PowerCircuit::from_edges(sorted.len(), &edges)?;
    let mut markings = BTreeMap::new();
    for (name, m) in &file.markings {
        markings.insert(name.clone(), marking_from_json(m, &remap)?);
    }
    let order = match &file.order {
        None => None,
        Some(ids) => {
            let mut order = Vec::with_capacity(ids.len());
            for id in ids {
                order.push(*remap.get(id).ok_or_else(|| {
                    Error::Malformed(format!("order references unknown node {id}"))
                })?);
            }
            Some(order)
        }
    };
    Ok(LoadedCircuit {
        circuit,
        markings,
        order,
        remap,
    })
}

// ---------------------------------------------------------------------
// Arithmetic circuits
// ---------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct ArithGateJson {
    pub op: String,
    #[serde(rename = "in", default, skip_serializing_if = "Vec::is_empty")]
    pub inputs: Vec<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct ArithFile {
    pub gates: Vec<ArithGateJson>,
    pub out: usize,
}

pub fn arith_to_file(c: &ArithCircuit) -> ArithFile {
    let gates = c
        .gates()
        .iter()
        .map(|g| match *g {
            ArithGate::Zero => ArithGateJson {
                op: "zero".into(),
                inputs: vec![],
            },
            ArithGate::Plus(a, b) => ArithGateJson {
                op: "plus".into(),
                inputs: vec![a, b],
            },
            ArithGate::Minus(a) => ArithGateJson {
                op: "minus".into(),
                inputs: vec![a],
            },
            ArithGate::Exp2(a) => ArithGateJson {
                op: "exp2".into(),
                inputs: vec![a],
            },
        })
        .collect();
    ArithFile {
        gates,
        out: c.output(),
    }
}

pub fn arith_from_file(file: &ArithFile) -> Result<ArithCircuit> {
    let mut gates = Vec::with_capacity(file.gates.len());
    for g in &file.gates {
        let want = |n: usize| -> Result<()> {
            if g.inputs.len() != n {
                return Err(Error::Malformed(format!(
                    "op {:?} expects {n} inputs, got {}",
                    g.op,
                    g.inputs.len()
                )));
            }
            Ok(())
        };
        gates.push(match g.op.as_str() {
            "zero" => {
                want(0)?;
                ArithGate::Zero
            }
            "plus" => {
                want(2)?;
                ArithGate::Plus(g.inputs[0], g.inputs[1])
            }
            "minus" => {
                want(1)?;
                ArithGate::Minus(g.inputs[0])
            }
            "exp2" => {
                want(1)?;
                ArithGate::Exp2(g.inputs[0])
            }
            other => return Err(Error::Malformed(format!("unknown op {other:?}"))),
        });
    }
    ArithCircuit::from_parts(gates, file.out)
}

// ---------------------------------------------------------------------
// Boolean circuits
// ---------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct BoolGateJson {
    pub op: String,
    #[serde(rename = "in", default, skip_serializing_if = "Vec::is_empty")]
    pub inputs: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct BoolFile {
    pub gates: Vec<BoolGateJson>,
    pub out: usize,
}

pub fn bool_to_file(c: &BoolCircuit, levels: Option<&[usize]>) -> BoolFile {
    let gates = c
        .gates()
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let (op, inputs) = match g {
                BoolGate::Input => ("input", vec![]),
                BoolGate::And(ops) => ("and", ops.clone()),
                BoolGate::Or(ops) => ("or", ops.clone()),
                BoolGate::Not(op) => ("not", vec![*op]),
            };
            BoolGateJson {
                op: op.into(),
                inputs,
                level: levels.map(|l| l[i]),
            }
        })
        .collect();
    BoolFile {
        gates,
        out: c.output(),
    }
}

pub fn layered_to_file(c: &LayeredBoolCircuit) -> BoolFile {
    bool_to_file(c.circuit(), Some(c.levels()))
}

pub struct LoadedBool {
    pub circuit: BoolCircuit,
    pub levels: Option<Vec<usize>>,
}

impl LoadedBool {
    pub fn layered(&self) -> Result<Option<LayeredBoolCircuit>> {
        match &self.levels {
            None => Ok(None),
            Some(levels) => Ok(Some(LayeredBoolCircuit::from_layered(
                self.circuit.clone(),
                levels.clone(),
            )?)),
        }
    }
}

pub fn bool_from_file(file: &BoolFile) -> Result<LoadedBool> {
    let mut circuit = BoolCircuit::new();
    let mut levels = Vec::with_capacity(file.gates.len());
    let mut have_levels = true;
    for g in &file.gates {
        let gate = match g.op.as_str() {
            "input" => BoolGate::Input,
            "and" => BoolGate::And(g.inputs.clone()),
            "or" => BoolGate::Or(g.inputs.clone()),
            "not" => {
                if g.inputs.len() != 1 {
                    return Err(Error::Malformed("not takes one input".into()));
                }
                BoolGate::Not(g.inputs[0])
            }
            other => return Err(Error::Malformed(format!("unknown op {other:?}"))),
        };
        circuit.add_gate(gate)?;
        match g.level {
            Some(l) => levels.push(l),
            None => have_levels = false,
        }
    }
    circuit.set_output(file.out)?;
    Ok(LoadedBool {
        circuit,
        levels: have_levels.then_some(levels),
    })
}

// ---------------------------------------------------------------------
// Dyadic values and Britton words
// ---------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct DyadicJson {
    #[serde(rename = "U")]
    pub u: MarkingJson,
    #[serde(rename = "E")]
    pub e: MarkingJson,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(untagged)]
pub enum LetterJson {
    Beta { beta: char },
    Bs { r: DyadicJson, m: MarkingJson },
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct BrittonFile {
    pub circuit: CircuitFile,
    pub letters: Vec<LetterJson>,
}

pub fn britton_to_file(w: &BrittonWord) -> BrittonFile {
    let letters = w
        .raw_letters()
        .map(|letter| match letter {
            RawLetter::Beta(beta) => LetterJson::Beta {
                beta: beta.as_char(),
            },
            RawLetter::Bs { u, e, m } => LetterJson::Bs {
                r: DyadicJson {
                    u: marking_to_json(&u),
                    e: marking_to_json(&e),
                },
                m: marking_to_json(&m),
            },
        })
        .collect();
    BrittonFile {
        circuit: circuit_to_file(w.circuit(), &BTreeMap::new()),
        letters,
    }
}

pub fn britton_from_file(file: &BrittonFile) -> Result<BrittonWord> {
    let loaded = circuit_from_file(&file.circuit)?;
    let mut letters = Vec::with_capacity(file.letters.len());
    for letter in &file.letters {
        letters.push(match letter {
            LetterJson::Beta { beta } => RawLetter::Beta(match beta {
                'b' => Beta::B,
                'B' => Beta::BInv,
                other => return Err(Error::BadLetter(*other)),
            }),
            LetterJson::Bs { r, m } => RawLetter::Bs {
                u: marking_from_json(&r.u, &loaded.remap)?,
                e: marking_from_json(&r.e, &loaded.remap)?,
                m: marking_from_json(m, &loaded.remap)?,
            },
        });
    }
    BrittonWord::from_raw(loaded.circuit, letters)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pc::DEFAULT_BUDGET_BITS;
    use num_bigint::BigInt;

    #[test]
    fn circuit_round_trip_is_canonical() {
        let (pc, m) = crate::pc::tests::binary_basis_23();
        let mut markings = BTreeMap::new();
        markings.insert("M".to_string(), m);
        let file = circuit_to_file(&pc, &markings);
        let text = serde_json::to_string_pretty(&file).unwrap();
        let parsed: CircuitFile = serde_json::from_str(&text).unwrap();
        let loaded = circuit_from_file(&parsed).unwrap();
        assert_eq!(loaded.circuit, pc);
        assert_eq!(
            loaded
                .circuit
                .eval_exact(&loaded.markings["M"], DEFAULT_BUDGET_BITS)
                .unwrap(),
            BigInt::from(23)
        );
        let again = serde_json::to_string_pretty(&circuit_to_file(
            &loaded.circuit,
            &loaded.markings,
        ))
        .unwrap();
        assert_eq!(text, again);
    }

    #[test]
    fn circuit_with_sparse_ids_loads_densely() {
        let file = CircuitFile {
            nodes: vec![7, 3, 10],
            edges: vec![
                EdgeJson {
                    src: 7,
                    dst: 3,
                    sign: 1,
                },
                EdgeJson {
                    src: 10,
                    dst: 7,
                    sign: 1,
                },
            ],
            markings: BTreeMap::from([(
                "top".to_string(),
                BTreeMap::from([("10".to_string(), 1)]),
            )]),
            order: None,
        };
        let loaded = circuit_from_file(&file).unwrap();
        // dense order by ascending id: 3 -> 0, 7 -> 1, 10 -> 2
        assert_eq!(loaded.circuit.node_count(), 3);
        assert_eq!(
            loaded
                .circuit
                .eval_exact(&loaded.markings["top"], DEFAULT_BUDGET_BITS)
                .unwrap(),
            BigInt::from(4)
        );
    }

    #[test]
    fn reduced_order_round_trips() {
        let (pc, m) = crate::pc::tests::binary_basis_23();
        let result = crate::reduce::reduce(&pc, std::slice::from_ref(&m)).unwrap();
        let mut markings = BTreeMap::new();
        markings.insert("M".to_string(), result.markings[0].clone());
        let file = reduced_to_file(&result.reduced, &markings);
        let loaded = circuit_from_file(&file).unwrap();
        let reduced = loaded.reduced().unwrap().expect("order present");
        assert_eq!(reduced.order().len(), result.reduced.order().len());
    }

    #[test]
    fn arith_round_trip() {
        let mut c = ArithCircuit::new();
        let z = c.add_gate(ArithGate::Zero).unwrap();
        let one = c.add_gate(ArithGate::Exp2(z)).unwrap();
        let neg = c.add_gate(ArithGate::Minus(one)).unwrap();
        let sum = c.add_gate(ArithGate::Plus(one, neg)).unwrap();
        c.set_output(sum).unwrap();
        let file = arith_to_file(&c);
        let text = serde_json::to_string_pretty(&file).unwrap();
        let parsed: ArithFile = serde_json::from_str(&text).unwrap();
        let back = arith_from_file(&parsed).unwrap();
        assert_eq!(back.gates(), c.gates());
        assert_eq!(back.output(), c.output());
        assert_eq!(serde_json::to_string_pretty(&arith_to_file(&back)).unwrap(), text);
    }

    #[test]
    fn bool_round_trip_with_levels() {
        let mut c = BoolCircuit::new();
        let x1 = c.add_gate(BoolGate::Input).unwrap();
        let x2 = c.add_gate(BoolGate::Input).unwrap();
        let or = c.add_gate(BoolGate::Or(vec![x1, x2])).unwrap();
        let not = c.add_gate(BoolGate::Not(or)).unwrap();
        c.set_output(not).unwrap();
        let layered = crate::gadget::normalize(&c, 2).unwrap();
        let file = layered_to_file(&layered);
        let text = serde_json::to_string_pretty(&file).unwrap();
        let parsed: BoolFile = serde_json::from_str(&text).unwrap();
        let back = bool_from_file(&parsed).unwrap();
        let relayered = back.layered().unwrap().expect("levels present");
        for bits in [[false, false], [true, false], [true, true]] {
            assert_eq!(relayered.eval(&bits), layered.eval(&bits));
        }
    }

    #[test]
    fn britton_round_trip() {
        let w = crate::baumslag::BrittonWord::parse("btaTB").unwrap();
        let file = britton_to_file(&w);
        let text = serde_json::to_string_pretty(&file).unwrap();
        let parsed: BrittonFile = serde_json::from_str(&text).unwrap();
        let back = britton_from_file(&parsed).unwrap();
        let r1 = w.reduce().unwrap();
        let r2 = back.reduce().unwrap();
        let p1 = r1.as_bs_pair().unwrap();
        let p2 = r2.as_bs_pair().unwrap();
        assert_eq!(
            p1.value_exact(DEFAULT_BUDGET_BITS).unwrap(),
            p2.value_exact(DEFAULT_BUDGET_BITS).unwrap()
        );
        assert_eq!(
            serde_json::to_string_pretty(&britton_to_file(&back)).unwrap(),
            text
        );
    }
}
