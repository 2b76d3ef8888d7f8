//! Boolean circuits, their normalization to layered OR/NOT form, and the
//! power-circuit simulation gadget used as an adversarial test generator.
//!
//! The gadget attaches one switch node per input; flipping the edge from
//! switch `V_i` to the anchor node applies the assignment bit `a_i`. The
//! resulting graph is a power circuit whose node values are pairwise
//! distinct and whose designated nodes A and B satisfy
//! `eps(A) <= eps(B)` exactly when the Boolean circuit evaluates to 1.
//! Gate values are separated by towers: a gate on level k evaluates to 1
//! exactly when its node's successor value reaches tau(2k + l).

use crate::error::{Error, Result};
use crate::pc::{NodeId, PowerCircuit};
use crate::sdr::SignedDigitRep;
use num_bigint::BigInt;

/// Gate of a Boolean circuit; operands address earlier gates.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BoolGate {
    Input,
    And(Vec<usize>),
    Or(Vec<usize>),
    Not(usize),
}

/// A Boolean circuit whose first gates are the inputs.
#[derive(Clone, Debug, Default)]
pub struct BoolCircuit {
    gates: Vec<BoolGate>,
    output: usize,
    n_inputs: usize,
}

impl BoolCircuit {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_gate(&mut self, gate: BoolGate) -> Result<usize> {
        let id = self.gates.len();
        let check = |ops: &[usize]| -> Result<()> {
            if ops.is_empty() {
                return Err(Error::Malformed("gate needs at least one operand".into()));
            }
            for &op in ops {
                if op >= id {
                    return Err(Error::Malformed(format!("operand {op} not yet defined")));
                }
            }
            Ok(())
        };
        match &gate {
            BoolGate::Input => {
                if id != self.n_inputs {
                    return Err(Error::Malformed("inputs must come first".into()));
                }
                self.n_inputs += 1;
            }
            BoolGate::And(ops) | BoolGate::Or(ops) => check(ops)?,
            BoolGate::Not(op) => check(std::slice::from_ref(op))?,
        }
        self.gates.push(gate);
        Ok(id)
    }

    pub fn set_output(&mut self, gate: usize) -> Result<()> {
        if gate >= self.gates.len() {
            return Err(Error::Malformed("output gate not defined".into()));
        }
        self.output = gate;
        Ok(())
    }

    pub fn gates(&self) -> &[BoolGate] {
        &self.gates
    }

    pub fn output(&self) -> usize {
        self.output
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn depth(&self) -> usize {
        let mut d = vec![0usize; self.gates.len()];
        for (i, g) in self.gates.iter().enumerate() {
            d[i] = match g {
                BoolGate::Input => 0,
                BoolGate::And(ops) | BoolGate::Or(ops) => {
                    1 + ops.iter().map(|&o| d[o]).max().unwrap()
                }
                BoolGate::Not(op) => 1 + d[*op],
            };
        }
        d[self.output]
    }

    /// Direct bottom-up evaluation under an assignment.
    pub fn eval(&self, assignment: &[bool]) -> bool {
        let mut vals = vec![false; self.gates.len()];
        let mut next_input = 0;
        for (i, g) in self.gates.iter().enumerate() {
            vals[i] = match g {
                BoolGate::Input => {
                    let v = assignment.get(next_input).copied().unwrap_or(false);
                    next_input += 1;
                    v
                }
                BoolGate::And(ops) => ops.iter().all(|&o| vals[o]),
                BoolGate::Or(ops) => ops.iter().any(|&o| vals[o]),
                BoolGate::Not(op) => !vals[*op],
            };
        }
        vals[self.output]
    }
}

/// OR/NOT-only circuit where gates on level k read only level k - 1;
/// inputs sit on level 0 and the output gate on level `depth`.
#[derive(Clone, Debug)]
pub struct LayeredBoolCircuit {
    circuit: BoolCircuit,
    levels: Vec<usize>,
    depth: usize,
}

impl LayeredBoolCircuit {
    pub fn circuit(&self) -> &BoolCircuit {
        &self.circuit
    }

    pub fn levels(&self) -> &[usize] {
        &self.levels
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn n_inputs(&self) -> usize {
        self.circuit.n_inputs
    }

    pub fn len(&self) -> usize {
        self.circuit.len()
    }

    pub fn is_empty(&self) -> bool {
        self.circuit.is_empty()
    }

    pub fn eval(&self, assignment: &[bool]) -> bool {
        self.circuit.eval(assignment)
    }

    /// Wraps a circuit that is already layered; validates the level map.
    pub fn from_layered(circuit: BoolCircuit, levels: Vec<usize>) -> Result<Self> {
        if levels.len() != circuit.len() {
            return Err(Error::NotLayered("level map must cover every gate".into()));
        }
        for (i, g) in circuit.gates.iter().enumerate() {
            match g {
                BoolGate::Input => {
                    if levels[i] != 0 {
                        return Err(Error::NotLayered(format!("input {i} not on level 0")));
                    }
                }
                BoolGate::And(_) => {
                    return Err(Error::NotLayered("and-gates must be eliminated".into()))
                }
                BoolGate::Or(ops) => {
                    for &o in ops {
                        if levels[o] + 1 != levels[i] {
                            return Err(Error::NotLayered(format!(
                                "gate {i} reads across levels"
                            )));
                        }
                    }
                }
                BoolGate::Not(op) => {
                    if levels[*op] + 1 != levels[i] {
                        return Err(Error::NotLayered(format!("gate {i} reads across levels")));
                    }
                }
            }
        }
        let depth = levels[circuit.output];
        Ok(Self {
            circuit,
            levels,
            depth,
        })
    }
}

/// Rewrites an arbitrary AND/OR/NOT circuit of depth at most `depth_bound`
/// into an equivalent layered OR/NOT circuit: AND gates expand by
/// De Morgan (depth at most triples), then every gate is copied once per
/// level with wires only between consecutive copies.
pub fn normalize(c: &BoolCircuit, depth_bound: usize) -> Result<LayeredBoolCircuit> {
    if c.is_empty() {
        return Err(Error::Malformed("empty circuit".into()));
    }
    if c.depth() > depth_bound {
        return Err(Error::DepthBoundViolated {
            depth: c.depth(),
            bound: depth_bound,
        });
    }
    // De Morgan: And(u...) -> Not(Or(Not u...))
    let mut ornot = BoolCircuit::new();
    let mut image = vec![0usize; c.len()];
    for (i, g) in c.gates.iter().enumerate() {
        image[i] = match g {
            BoolGate::Input => ornot.add_gate(BoolGate::Input)?,
            BoolGate::Or(ops) => {
                ornot.add_gate(BoolGate::Or(ops.iter().map(|&o| image[o]).collect()))?
            }
            BoolGate::Not(op) => ornot.add_gate(BoolGate::Not(image[*op]))?,
            BoolGate::And(ops) => {
                let mut negs = Vec::with_capacity(ops.len());
                for &o in ops {
                    negs.push(ornot.add_gate(BoolGate::Not(image[o]))?);
                }
                let or = ornot.add_gate(BoolGate::Or(negs))?;
                ornot.add_gate(BoolGate::Not(or))?
            }
        };
    }
    ornot.set_output(image[c.output])?;

    // layering: copy k of gate g reads copy k - 1; an input copy above
    // level 0 degrades to a fan-in-one Or reading the copy below
    let d = ornot.depth();
    let mut gate_depth = vec![0usize; ornot.len()];
    for (i, g) in ornot.gates.iter().enumerate() {
        gate_depth[i] = match g {
            BoolGate::Input => 0,
            BoolGate::Or(ops) => 1 + ops.iter().map(|&o| gate_depth[o]).max().unwrap(),
            BoolGate::Not(op) => 1 + gate_depth[*op],
            BoolGate::And(_) => unreachable!("eliminated above"),
        };
    }
    // needed copies, walking back from the output at level d
    let mut needed: Vec<Vec<bool>> = vec![vec![false; d + 1]; ornot.len()];
    let mut stack = vec![(ornot.output, d)];
    while let Some((g, k)) = stack.pop() {
        if needed[g][k] {
            continue;
        }
        needed[g][k] = true;
        if k == 0 {
            continue;
        }
        match &ornot.gates[g] {
            BoolGate::Input => stack.push((g, k - 1)),
            BoolGate::Or(ops) => {
                for &o in ops {
                    stack.push((o, k - 1));
                }
            }
            BoolGate::Not(op) => stack.push((*op, k - 1)),
            BoolGate::And(_) => unreachable!(),
        }
    }

    let mut layered = BoolCircuit::new();
    let mut levels: Vec<usize> = Vec::new();
    let mut copy_id: Vec<Vec<Option<usize>>> = vec![vec![None; d + 1]; ornot.len()];
    // all inputs at level 0, whether used or not, so assignments keep
    // their meaning
    for g in 0..ornot.n_inputs {
        copy_id[g][0] = Some(layered.add_gate(BoolGate::Input)?);
        levels.push(0);
    }
    for k in 1..=d {
        for g in 0..ornot.len() {
            if !needed[g][k] || k < gate_depth[g] {
                continue;
            }
            let gate = match &ornot.gates[g] {
                BoolGate::Input => {
                    BoolGate::Or(vec![copy_id[g][k - 1].expect("copy below exists")])
                }
                BoolGate::Or(ops) => BoolGate::Or(
                    ops.iter()
                        .map(|&o| copy_id[o][k - 1].expect("copy below exists"))
                        .collect(),
                ),
                BoolGate::Not(op) => {
                    BoolGate::Not(copy_id[*op][k - 1].expect("copy below exists"))
                }
                BoolGate::And(_) => unreachable!(),
            };
            copy_id[g][k] = Some(layered.add_gate(gate)?);
            levels.push(k);
        }
    }
    let out_copy = copy_id[ornot.output][d].expect("output copy exists");
    layered.set_output(out_copy)?;
    LayeredBoolCircuit::from_layered(layered, levels)
}

/// min { i : tau(i) >= n }.
pub fn log_star(n: usize) -> usize {
    let mut i = 0;
    let mut tau = 1u64;
    while (tau as usize) < n {
        i += 1;
        if tau >= 64 {
            break; // tau(i) already astronomically large
        }
        tau = 1 << tau;
    }
    i
}

/// The simulation gadget built from a layered circuit.
pub struct Gadget {
    pub circuit: PowerCircuit,
    /// one switch per input gate; flipping its edge to `top` applies a bit
    pub switches: Vec<NodeId>,
    pub top: NodeId,
    pub a: NodeId,
    pub b: NodeId,
    pub ell: usize,
    /// L after padding and D, for the size/depth bounds
    pub padded_size: usize,
    pub depth: usize,
}

impl Gadget {
    /// Applies an assignment: edge `V_i -> top` carries bit `a_i`.
    pub fn with_assignment(&self, bits: &[bool]) -> PowerCircuit {
        let mut pc = self.circuit.clone();
        for (i, &bit) in bits.iter().enumerate().take(self.switches.len()) {
            if bit {
                pc.add_edge_unchecked(self.switches[i], self.top, 1);
            }
        }
        pc
    }
}

/// Builds the gadget: a base-2 block X_0..X_L, a tower chain T with the
/// anchors, one subtractor S_k per level, and per-gate nodes wired so that
/// a gate's node value crosses the level threshold exactly when the gate
/// evaluates to 1.
pub fn build(c: &LayeredBoolCircuit) -> Result<Gadget> {
    let d = c.depth();
    let real_gates = c.len();
    let padded_size = real_gates.max(3); // the tower separation needs L >= 3
    let ell = log_star(padded_size) + 3;

    let mut pc = PowerCircuit::new();
    // X_i of value 2^i with compact successor markings
    let mut x: Vec<NodeId> = Vec::with_capacity(padded_size + 1);
    for i in 0..=padded_size {
        let digits = SignedDigitRep::from_int(&BigInt::from(i)).compact();
        let row: Vec<(NodeId, i8)> = digits
            .digits()
            .iter()
            .enumerate()
            .filter(|&(_, &d)| d != 0)
            .map(|(j, &s)| (x[j], s))
            .collect();
        x.push(pc.add_node(row)?);
    }
    // T_j of value tau(j), identified with X_tau(j-1) while that exists
    let mut t: Vec<NodeId> = Vec::with_capacity(2 * d + ell + 2);
    for j in 0..=(2 * d + ell + 1) {
        if j == 0 {
            t.push(x[0]);
            continue;
        }
        // tau(j - 1), saturating beyond the X range
        let tau_prev = {
            let mut v = 1usize;
            let mut ok = true;
            for _ in 0..j - 1 {
                if v > 20 {
                    ok = false;
                    break;
                }
                v = 1usize << v;
            }
            if ok && v <= padded_size {
                Some(v)
            } else {
                None
            }
        };
        match tau_prev {
            Some(i) => t.push(x[i]),
            None => {
                let prev = t[j - 1];
                t.push(pc.add_node([(prev, 1)])?);
            }
        }
    }
    let top = t[ell];
    // S_k with successor value tau(2k - 2 + ell) - 1
    let mut s: Vec<NodeId> = Vec::with_capacity(d + 1);
    s.push(top); // placeholder; S is 1-based
    for k in 1..=d {
        s.push(pc.add_node([(t[2 * (k - 1) + ell], 1), (x[0], -1)])?);
    }

    // per-gate nodes, by level; gate i uses X_{i+1} as its separator
    let mut p_of: Vec<Option<NodeId>> = vec![None; real_gates];
    let mut switches: Vec<NodeId> = Vec::new();
    let mut by_level: Vec<Vec<usize>> = vec![Vec::new(); d + 1];
    for (i, level) in c.levels().iter().enumerate() {
        by_level[*level].push(i);
    }
    for level in 0..=d {
        for &i in &by_level[level] {
            let sep = x[i + 1];
            let node = match &c.circuit().gates()[i] {
                BoolGate::Input => {
                    let v = pc.add_node([(sep, 1), (t[ell - 1], 1)])?;
                    switches.push(v);
                    v
                }
                BoolGate::Or(ops) => {
                    let k = level;
                    debug_assert!(k >= 1);
                    let mut q_row: Vec<(NodeId, i8)> = ops
                        .iter()
                        .map(|&o| (p_of[o].expect("lower level built"), 1))
                        .collect();
                    q_row.push((sep, 1));
                    let q = pc.add_node(q_row)?;
                    pc.add_node([(q, 1), (sep, 1)])?
                }
                BoolGate::Not(op) => {
                    let k = level;
                    debug_assert!(k >= 1);
                    pc.add_node([
                        (t[2 * k + ell], 1),
                        (s[k], 1),
                        (p_of[*op].expect("lower level built"), -1),
                        (sep, 1),
                    ])?
                }
                BoolGate::And(_) => return Err(Error::NotLayered("and-gate survived".into())),
            };
            p_of[i] = Some(node);
        }
    }
    let a = t[2 * d + 1 + ell];
    let b = p_of[c.circuit().output()].expect("output built");
    Ok(Gadget {
        circuit: pc,
        switches,
        top,
        a,
        b,
        ell,
        padded_size,
        depth: d,
    })
}
