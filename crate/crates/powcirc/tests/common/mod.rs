//! Shared generators for the integration suites.

use num_bigint::BigInt;
use num_traits::One;
use powcirc::gadget::{BoolCircuit, BoolGate, LayeredBoolCircuit};
use powcirc::{Marking, NodeId, PowerCircuit};
use rand::Rng;

/// Random dag with edge labels; not necessarily a power circuit.
pub fn random_circuit<R: Rng>(rng: &mut R, max_nodes: usize) -> (PowerCircuit, Vec<NodeId>) {
    let n = rng.gen_range(1..=max_nodes);
    let mut pc = PowerCircuit::new();
    let mut ids: Vec<NodeId> = Vec::with_capacity(n);
    for _ in 0..n {
        let mut row = Vec::new();
        for &t in &ids {
            if rng.gen_bool(0.35) {
                row.push((t, if rng.gen_bool(0.8) { 1 } else { -1 }));
            }
        }
        ids.push(pc.add_node(row).unwrap());
    }
    (pc, ids)
}

pub fn random_marking<R: Rng>(rng: &mut R, ids: &[NodeId]) -> Marking {
    let mut m = Marking::new();
    for &t in ids {
        if rng.gen_bool(0.5) {
            m.set(t, if rng.gen_bool(0.5) { 1 } else { -1 }).unwrap();
        }
    }
    m
}

/// Freely reduced word over a, A, b, B, t, T.
pub fn random_word<R: Rng>(rng: &mut R, max_len: usize) -> String {
    let letters = ['a', 'A', 'b', 'B', 't', 'T'];
    let inverse = |c: char| -> char {
        if c.is_ascii_lowercase() {
            c.to_ascii_uppercase()
        } else {
            c.to_ascii_lowercase()
        }
    };
    let len = rng.gen_range(0..=max_len);
    let mut word = String::with_capacity(len);
    let mut prev: Option<char> = None;
    for _ in 0..len {
        let c = loop {
            let c = letters[rng.gen_range(0..letters.len())];
            if prev != Some(inverse(c)) {
                break c;
            }
        };
        word.push(c);
        prev = Some(c);
    }
    word
}

/// Random layered OR/NOT circuit within the stated limits.
pub fn random_layered<R: Rng>(
    rng: &mut R,
    max_inputs: usize,
    max_depth: usize,
    max_gates: usize,
) -> LayeredBoolCircuit {
    loop {
        let n_inputs = rng.gen_range(1..=max_inputs);
        let depth = rng.gen_range(1..=max_depth);
        let mut c = BoolCircuit::new();
        let mut levels: Vec<usize> = Vec::new();
        let mut prev_level: Vec<usize> = (0..n_inputs)
            .map(|_| {
                levels.push(0);
                c.add_gate(BoolGate::Input).unwrap()
            })
            .collect();
        let mut total = n_inputs;
        let mut ok = true;
        for level in 1..=depth {
            let remaining_levels = depth - level;
            let max_here = (max_gates - total).saturating_sub(remaining_levels);
            if max_here == 0 {
                ok = false;
                break;
            }
            let width = rng.gen_range(1..=max_here.min(4));
            let mut this_level = Vec::with_capacity(width);
            for _ in 0..width {
                let gate = if rng.gen_bool(0.5) {
                    BoolGate::Not(prev_level[rng.gen_range(0..prev_level.len())])
                } else {
                    let fan = rng.gen_range(1..=prev_level.len());
                    let mut ops: Vec<usize> = Vec::with_capacity(fan);
                    for _ in 0..fan {
                        ops.push(prev_level[rng.gen_range(0..prev_level.len())]);
                    }
                    ops.sort_unstable();
                    ops.dedup();
                    BoolGate::Or(ops)
                };
                levels.push(level);
                this_level.push(c.add_gate(gate).unwrap());
            }
            total += width;
            prev_level = this_level;
        }
        if !ok {
            continue;
        }
        let out = *prev_level.last().unwrap();
        c.set_output(out).unwrap();
        return LayeredBoolCircuit::from_layered(c, levels).unwrap();
    }
}

pub fn tau_big(n: u64) -> BigInt {
    let mut v = BigInt::one();
    for _ in 0..n {
        let exp: u64 = v.clone().try_into().expect("tau stays evaluable here");
        v = BigInt::one() << exp;
    }
    v
}
