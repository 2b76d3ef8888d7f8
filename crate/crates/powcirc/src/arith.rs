//! `(0, +, -, 2^x)`-arithmetic circuits and the two translations between
//! them and power circuits.
//!
//! A marked power circuit becomes an arithmetic circuit by expanding each
//! marking into a balanced tree of additions over per-node `2^x` gates.
//! Conversely, every `+`/`-` gate of an arithmetic circuit computes a
//! linear combination of the `2^x` gates below it; materializing those
//! integer coefficients digit-wise over one doubling chain per `2^x` gate
//! yields a power-circuit-shaped graph, which is a genuine power circuit
//! exactly when no `2^x` gate reads a negative value.

use num_bigint::BigInt;
use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::pc::{Marking, NodeId, PowerCircuit};
use crate::reduce;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ArithGate {
    Zero,
    Plus(usize, usize),
    Minus(usize),
    Exp2(usize),
}

#[derive(Clone, Debug, Default)]
pub struct ArithCircuit {
    gates: Vec<ArithGate>,
    output: usize,
}

/// Exact dyadic rational `mantissa * 2^exponent`, mantissa odd or zero.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExactDyadic {
    pub mantissa: BigInt,
    pub exponent: BigInt,
}

impl ExactDyadic {
    pub fn zero() -> Self {
        Self {
            mantissa: BigInt::zero(),
            exponent: BigInt::zero(),
        }
    }

    pub fn from_int(k: &BigInt) -> Self {
        Self::normalized(k.clone(), BigInt::zero())
    }

    fn normalized(mut mantissa: BigInt, mut exponent: BigInt) -> Self {
        if mantissa.is_zero() {
            return Self::zero();
        }
        let tz = mantissa.magnitude().trailing_zeros().unwrap_or(0);
        mantissa >>= tz;
        exponent += tz;
        Self { mantissa, exponent }
    }

    pub fn is_integer(&self) -> bool {
        self.mantissa.is_zero() || !self.exponent.is_negative()
    }

    pub fn to_integer(&self) -> Option<BigInt> {
        if !self.is_integer() {
            return None;
        }
        if self.mantissa.is_zero() {
            return Some(BigInt::zero());
        }
        let shift: u64 = self.exponent.clone().try_into().ok()?;
        Some(&self.mantissa << shift)
    }
}

impl ArithCircuit {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a gate; operands must already exist, so the dag property is
    /// structural.
    pub fn add_gate(&mut self, gate: ArithGate) -> Result<usize> {
        let id = self.gates.len();
        let check = |op: usize| -> Result<()> {
            if op >= id {
                return Err(Error::Malformed(format!("operand {op} not yet defined")));
            }
            Ok(())
        };
        match gate {
            ArithGate::Zero => {}
            ArithGate::Plus(a, b) => {
                check(a)?;
                check(b)?;
            }
            ArithGate::Minus(a) | ArithGate::Exp2(a) => check(a)?,
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

    pub fn from_parts(gates: Vec<ArithGate>, output: usize) -> Result<Self> {
        let mut c = Self::new();
        for g in gates {
            c.add_gate(g)?;
        }
        c.set_output(output)?;
        Ok(c)
    }

    pub fn gates(&self) -> &[ArithGate] {
        &self.gates
    }

    pub fn output(&self) -> usize {
        self.output
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    /// Length in edges of a longest path.
    pub fn depth(&self) -> usize {
        let mut d = vec![0usize; self.gates.len()];
        let mut max = 0;
        for (i, g) in self.gates.iter().enumerate() {
            d[i] = match *g {
                ArithGate::Zero => 0,
                ArithGate::Plus(a, b) => 1 + d[a].max(d[b]),
                ArithGate::Minus(a) | ArithGate::Exp2(a) => 1 + d[a],
            };
            max = max.max(d[i]);
        }
        max
    }

    /// Maximal number of `2^x` gates on any path.
    pub fn exp2_depth(&self) -> usize {
        let mut d = vec![0usize; self.gates.len()];
        let mut max = 0;
        for (i, g) in self.gates.iter().enumerate() {
            d[i] = match *g {
                ArithGate::Zero => 0,
                ArithGate::Plus(a, b) => d[a].max(d[b]),
                ArithGate::Minus(a) => d[a],
                ArithGate::Exp2(a) => 1 + d[a],
            };
            max = max.max(d[i]);
        }
        max
    }

    /// Exact bottom-up evaluation; `2^x` of a negative integer yields an
    /// exact dyadic fraction. A fractional `2^x` input (irrational result)
    /// or an exponent beyond `budget_bits` is an error.
    pub fn eval_exact(&self, budget_bits: u64) -> Result<ExactDyadic> {
        let mut vals: Vec<ExactDyadic> = Vec::with_capacity(self.gates.len());
        for g in &self.gates {
            let v = match *g {
                ArithGate::Zero => ExactDyadic::zero(),
                ArithGate::Plus(a, b) => {
                    let (x, y) = (&vals[a], &vals[b]);
                    if x.mantissa.is_zero() {
                        y.clone()
                    } else if y.mantissa.is_zero() {
                        x.clone()
                    } else {
                        let (lo, hi) = if x.exponent <= y.exponent { (x, y) } else { (y, x) };
                        let diff = &hi.exponent - &lo.exponent;
                        if diff > BigInt::from(budget_bits) {
                            return Err(Error::BudgetExceeded(budget_bits));
                        }
                        let shift: u64 = diff.try_into().expect("bounded by budget");
                        ExactDyadic::normalized(
                            &lo.mantissa + (&hi.mantissa << shift),
                            lo.exponent.clone(),
                        )
                    }
                }
                ArithGate::Minus(a) => ExactDyadic {
                    mantissa: -&vals[a].mantissa,
                    exponent: vals[a].exponent.clone(),
                },
                ArithGate::Exp2(a) => {
                    let x = &vals[a];
                    if !x.is_integer() {
                        return Err(Error::NotInteger);
                    }
                    let e = x.to_integer().ok_or(Error::BudgetExceeded(budget_bits))?;
                    if e.magnitude().bits() > 64
                        || u64::try_from(e.magnitude().clone()).unwrap() > budget_bits
                    {
                        return Err(Error::BudgetExceeded(budget_bits));
                    }
                    ExactDyadic {
                        mantissa: BigInt::from(1),
                        exponent: e,
                    }
                }
            };
            vals.push(v);
        }
        Ok(vals[self.output].clone())
    }
}

/// Expands a marked power circuit into an equivalent arithmetic circuit:
/// one `2^x` gate per node, one balanced addition tree per marking.
pub fn from_power_circuit(pc: &PowerCircuit, m: &Marking) -> Result<ArithCircuit> {
    let order = pc.topological_order()?;
    let mut c = ArithCircuit::new();
    let zero = c.add_gate(ArithGate::Zero)?;
    let mut exp2_of: Vec<usize> = vec![usize::MAX; pc.node_count()];
    for node in order {
        let lam = pc.successor_marking(node);
        let sum = marking_tree(&mut c, zero, &lam, &exp2_of)?;
        exp2_of[node.index()] = c.add_gate(ArithGate::Exp2(sum))?;
    }
    let out = marking_tree(&mut c, zero, m, &exp2_of)?;
    c.set_output(out)?;
    Ok(c)
}

fn marking_tree(
    c: &mut ArithCircuit,
    zero: usize,
    m: &Marking,
    exp2_of: &[usize],
) -> Result<usize> {
    let mut terms: Vec<usize> = Vec::with_capacity(m.support_len());
    for (node, sign) in m.support() {
        let gate = exp2_of[node.index()];
        debug_assert_ne!(gate, usize::MAX, "successors are processed first");
        if sign > 0 {
            terms.push(gate);
        } else {
            terms.push(c.add_gate(ArithGate::Minus(gate))?);
        }
    }
    if terms.is_empty() {
        return Ok(zero);
    }
    // balanced tree keeps the depth logarithmic
    while terms.len() > 1 {
        let mut next = Vec::with_capacity(terms.len().div_ceil(2));
        for pair in terms.chunks(2) {
            next.push(match pair {
                [a, b] => c.add_gate(ArithGate::Plus(*a, *b))?,
                [a] => *a,
                _ => unreachable!(),
            });
        }
        terms = next;
    }
    Ok(terms[0])
}

/// Result of [`to_power_circuit`]: the graph is a genuine power circuit
/// exactly when `integral` holds (every `2^x` gate reads a non-negative
/// value); otherwise some node evaluates to a fraction and downstream
/// reduction would reject it.
pub struct PcFromArith {
    pub circuit: PowerCircuit,
    pub marking: Marking,
    pub integral: bool,
}

/// Rebuilds an arithmetic circuit as a power-circuit-shaped graph: one
/// doubling chain per `2^x` gate carrying its value times powers of two,
/// with linear-combination coefficients laid out in binary over the
/// chains.
pub fn to_power_circuit(c: &ArithCircuit) -> Result<PcFromArith> {
    let n = c.len();
    let exp2_gates: Vec<usize> = (0..n)
        .filter(|&i| matches!(c.gates()[i], ArithGate::Exp2(_)))
        .collect();
    let exp2_index: Vec<Option<usize>> = {
        let mut v = vec![None; n];
        for (j, &g) in exp2_gates.iter().enumerate() {
            v[g] = Some(j);
        }
        v
    };
    // coefficient vectors over the cut 2^x gates, for +/-/zero gates
    let unit = |j: usize| -> Vec<BigInt> {
        let mut v = vec![BigInt::zero(); exp2_gates.len()];
        v[j] = BigInt::from(1);
        v
    };
    let coef_of_operand = |coefs: &[Option<Vec<BigInt>>], op: usize| -> Vec<BigInt> {
        if let Some(j) = exp2_index[op] {
            unit(j)
        } else {
            coefs[op].clone().expect("topological order")
        }
    };
    let mut coefs: Vec<Option<Vec<BigInt>>> = vec![None; n];
    for (i, g) in c.gates().iter().enumerate() {
        coefs[i] = match *g {
            ArithGate::Zero => Some(vec![BigInt::zero(); exp2_gates.len()]),
            ArithGate::Plus(a, b) => {
                let mut va = coef_of_operand(&coefs, a);
                let vb = coef_of_operand(&coefs, b);
                for (x, y) in va.iter_mut().zip(vb) {
                    *x += y;
                }
                Some(va)
            }
            ArithGate::Minus(a) => {
                let mut va = coef_of_operand(&coefs, a);
                for x in va.iter_mut() {
                    *x = -&*x;
                }
                Some(va)
            }
            ArithGate::Exp2(_) => None,
        };
    }
    let coef_bound = BigInt::from(1) << n;
    for v in coefs.iter().flatten() {
        for a in v {
            debug_assert!(a.magnitude() < coef_bound.magnitude());
        }
    }

    let mut pc = PowerCircuit::new();
    let singletons: Vec<NodeId> = (0..n.max(1))
        .map(|_| pc.add_node([]).expect("fresh node"))
        .collect();
    // chains[j][l] has value eval(h_j) * 2^l
    let mut chains: Vec<Vec<NodeId>> = Vec::with_capacity(exp2_gates.len());
    let digits_row = |chains: &[Vec<NodeId>], coef: &[BigInt]| -> Vec<(NodeId, i8)> {
        let mut row = Vec::new();
        for (i, a) in coef.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            let sign = if a.is_negative() { -1i8 } else { 1 };
            for (bit, node) in chains[i].iter().enumerate() {
                if a.magnitude().bit(bit as u64) {
                    row.push((*node, sign));
                }
            }
        }
        row
    };
    for &gid in &exp2_gates {
        let input = match c.gates()[gid] {
            ArithGate::Exp2(a) => a,
            _ => unreachable!(),
        };
        let coef = coef_of_operand(&coefs, input);
        let mut chain = Vec::with_capacity(n);
        for l in 0..n.max(1) {
            let mut row = digits_row(&chains, &coef);
            row.extend(singletons[..l].iter().map(|&s| (s, 1)));
            chain.push(pc.add_node(row)?);
        }
        chains.push(chain);
    }

    let marking = if let Some(j) = exp2_index[c.output()] {
        Marking::from_pairs([(chains[j][0], 1)])?
    } else {
        let coef = coefs[c.output()].clone().expect("non-exp2 output");
        Marking::from_pairs(digits_row(&chains, &coef))?
    };

    // verdict per 2^x gate, bottom-up: the first negative input stops the
    // scan (deeper graphs are no longer power circuits)
    let mut integral = true;
    for &gid in &exp2_gates {
        let input = match c.gates()[gid] {
            ArithGate::Exp2(a) => a,
            _ => unreachable!(),
        };
        let coef = coef_of_operand(&coefs, input);
        let m = Marking::from_pairs(digits_row(&chains, &coef))?;
        match reduce::sign(&pc, &m) {
            Ok(std::cmp::Ordering::Less) | Err(Error::NotAPowerCircuit(_)) => {
                integral = false;
                break;
            }
            Ok(_) => {}
            Err(e) => return Err(e),
        }
    }

    debug_assert!(pc.node_count() <= n * n + n.max(1));
    debug_assert!(pc.depth() <= c.exp2_depth().max(1));
    Ok(PcFromArith {
        circuit: pc,
        marking,
        integral,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pc::DEFAULT_BUDGET_BITS;
    use num_traits::One;

    fn eval_int(c: &ArithCircuit) -> BigInt {
        c.eval_exact(DEFAULT_BUDGET_BITS)
            .unwrap()
            .to_integer()
            .expect("integral circuit")
    }

    #[test]
    fn eval_examples() {
        let mut c = ArithCircuit::new();
        let z = c.add_gate(ArithGate::Zero).unwrap();
        c.set_output(z).unwrap();
        assert_eq!(eval_int(&c), BigInt::zero());

        let one = c.add_gate(ArithGate::Exp2(z)).unwrap();
        c.set_output(one).unwrap();
        assert_eq!(eval_int(&c), BigInt::one());

        let minus_one = c.add_gate(ArithGate::Minus(one)).unwrap();
        let half = c.add_gate(ArithGate::Exp2(minus_one)).unwrap();
        c.set_output(half).unwrap();
        let v = c.eval_exact(DEFAULT_BUDGET_BITS).unwrap();
        assert_eq!(v.mantissa, BigInt::one());
        assert_eq!(v.exponent, BigInt::from(-1));
    }

    #[test]
    fn from_power_circuit_examples() {
        // single node, marking +P: the circuit 2^0 = 1
        let mut pc = PowerCircuit::new();
        let p = pc.add_node([]).unwrap();
        let m = Marking::from_pairs([(p, 1)]).unwrap();
        let c = from_power_circuit(&pc, &m).unwrap();
        assert_eq!(eval_int(&c), BigInt::one());
        assert_eq!(c.exp2_depth(), pc.depth() + 1);

        // tower chain n = 2, top marked: 4
        let (pc, nodes) = PowerCircuit::tower_chain(2);
        let m = Marking::from_pairs([(nodes[2], 1)]).unwrap();
        let c = from_power_circuit(&pc, &m).unwrap();
        assert_eq!(eval_int(&c), BigInt::from(4));

        // the base-2 example circuit with its 23-marking
        let (pc, m) = crate::pc::tests::binary_basis_23();
        let c = from_power_circuit(&pc, &m).unwrap();
        assert_eq!(eval_int(&c), BigInt::from(23));
        assert!(c.len() <= 2 * pc.edge_count() + 3 * pc.node_count() + 1);
        assert_eq!(c.exp2_depth(), pc.depth() + 1);
        let depth_bound =
            (pc.depth() + 2) * ((pc.node_count() as f64).log2().ceil() as usize + 2);
        assert!(c.depth() <= depth_bound);
    }

    #[test]
    fn to_power_circuit_examples() {
        // 2^(2^0) = 2
        let mut c = ArithCircuit::new();
        let z = c.add_gate(ArithGate::Zero).unwrap();
        let one = c.add_gate(ArithGate::Exp2(z)).unwrap();
        let two = c.add_gate(ArithGate::Exp2(one)).unwrap();
        c.set_output(two).unwrap();
        let out = to_power_circuit(&c).unwrap();
        assert!(out.integral);
        assert_eq!(
            out.circuit
                .eval_exact(&out.marking, DEFAULT_BUDGET_BITS)
                .unwrap(),
            BigInt::from(2)
        );
        assert!(out.circuit.node_count() <= c.len() * c.len() + c.len());
        assert!(out.circuit.depth() <= c.exp2_depth().max(1));

        // plus of three ones, then 2^x: 8
        let mut c = ArithCircuit::new();
        let z = c.add_gate(ArithGate::Zero).unwrap();
        let one = c.add_gate(ArithGate::Exp2(z)).unwrap();
        let two = c.add_gate(ArithGate::Plus(one, one)).unwrap();
        let three = c.add_gate(ArithGate::Plus(two, one)).unwrap();
        let eight = c.add_gate(ArithGate::Exp2(three)).unwrap();
        c.set_output(eight).unwrap();
        let expected = c
            .eval_exact(DEFAULT_BUDGET_BITS)
            .unwrap()
            .to_integer()
            .unwrap();
        assert_eq!(expected, BigInt::from(8));
        let out = to_power_circuit(&c).unwrap();
        assert!(out.integral);
        assert_eq!(
            out.circuit
                .eval_exact(&out.marking, DEFAULT_BUDGET_BITS)
                .unwrap(),
            expected
        );

        // 2^(-1) flags non-integrality
        let mut c = ArithCircuit::new();
        let z = c.add_gate(ArithGate::Zero).unwrap();
        let one = c.add_gate(ArithGate::Exp2(z)).unwrap();
        let m1 = c.add_gate(ArithGate::Minus(one)).unwrap();
        let half = c.add_gate(ArithGate::Exp2(m1)).unwrap();
        c.set_output(half).unwrap();
        let out = to_power_circuit(&c).unwrap();
        assert!(!out.integral);
    }

    #[test]
    fn round_trip_random_instances() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(29);
        let mut done = 0;
        while done < 150 {
            // random power circuit, then arith, then values must agree
            let n = rng.gen_range(1..=8);
            let mut pc = PowerCircuit::new();
            let mut ids: Vec<NodeId> = Vec::new();
            for _ in 0..n {
                let mut row = Vec::new();
                for &t in &ids {
                    if rng.gen_bool(0.35) {
                        row.push((t, if rng.gen_bool(0.8) { 1 } else { -1 }));
                    }
                }
                ids.push(pc.add_node(row).unwrap());
            }
            let mut m = Marking::new();
            for &t in &ids {
                if rng.gen_bool(0.5) {
                    m.set(t, if rng.gen_bool(0.5) { 1 } else { -1 }).unwrap();
                }
            }
            let Ok(expected) = pc.eval_exact(&m, 1 << 12) else {
                continue;
            };
            let c = from_power_circuit(&pc, &m).unwrap();
            assert_eq!(eval_int(&c), expected);
            assert!(c.len() <= 2 * pc.edge_count() + 3 * pc.node_count() + 1);
            assert_eq!(c.exp2_depth(), pc.depth() + 1);

            // and back again through the coefficient construction
            let out = to_power_circuit(&c).unwrap();
            assert!(out.integral);
            assert_eq!(
                out.circuit.eval_exact(&out.marking, 1 << 12).unwrap(),
                expected
            );
            done += 1;
        }
    }
}
