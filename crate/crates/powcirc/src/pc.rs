//! The power-circuit data structure: a dag with edge labels in {-1, 0, +1}
//! where a node evaluates to two raised to the signed sum of its successors.
//!
//! Circuits behave as immutable values at the public surface: operations
//! that grow a circuit return a new one extending the old, so node ids of
//! the input remain valid in the output. Markings are plain sign maps and
//! are tied to a circuit only by usage.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default evaluation budget: exponents up to 2^20 bits.
pub const DEFAULT_BUDGET_BITS: u64 = 1 << 20;

/// Stable identifier of a node within one circuit (and its extensions).
#[derive(Copy, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub(crate) u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl std::fmt::Debug for NodeId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "n{}", self.0)
    }
}

/// Sign map with finite support; absent nodes carry sign 0.
#[derive(Clone, Default, PartialEq, Eq, Debug)]
pub struct Marking {
    signs: BTreeMap<NodeId, i8>,
}

impl Marking {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<I: IntoIterator<Item = (NodeId, i8)>>(pairs: I) -> Result<Self> {
        let mut m = Self::new();
        for (node, sign) in pairs {
            m.set(node, sign)?;
        }
        Ok(m)
    }

    /// Sets the sign of `node`; sign 0 removes it from the support.
    pub fn set(&mut self, node: NodeId, sign: i8) -> Result<()> {
        match sign {
            0 => {
                self.signs.remove(&node);
            }
            -1 | 1 => {
                self.signs.insert(node, sign);
            }
            other => return Err(Error::BadLabel(other as i64)),
        }
        Ok(())
    }

    pub fn sign(&self, node: NodeId) -> i8 {
        self.signs.get(&node).copied().unwrap_or(0)
    }

    /// Nodes with nonzero sign, ascending by id.
    pub fn support(&self) -> impl DoubleEndedIterator<Item = (NodeId, i8)> + '_ {
        self.signs.iter().map(|(&n, &s)| (n, s))
    }

    pub fn support_len(&self) -> usize {
        self.signs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signs.is_empty()
    }

    pub fn negated(&self) -> Self {
        Self {
            signs: self.signs.iter().map(|(&n, &s)| (n, -s)).collect(),
        }
    }
}

/// Successor row of one node: sorted, deduplicated (target, sign) pairs.
type Row = Vec<(NodeId, i8)>;

#[derive(Clone, Default, PartialEq, Eq, Debug)]
pub struct PowerCircuit {
    rows: Vec<Row>,
}

impl PowerCircuit {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn node_count(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> {
        (0..self.rows.len() as u32).map(NodeId)
    }

    pub fn contains(&self, node: NodeId) -> bool {
        node.index() < self.rows.len()
    }

    /// Appends a node whose successor marking is given by `succ`.
    ///
    /// Targets must already exist, so circuits built this way are acyclic by
    /// construction.
    pub fn add_node<I: IntoIterator<Item = (NodeId, i8)>>(&mut self, succ: I) -> Result<NodeId> {
        let id = NodeId(self.rows.len() as u32);
        let mut row: Row = Vec::new();
        for (node, sign) in succ {
            if !self.contains(node) {
                return Err(Error::UnknownNode(node));
            }
            match sign {
                0 => {}
                -1 | 1 => row.push((node, sign)),
                other => return Err(Error::BadLabel(other as i64)),
            }
        }
        row.sort_unstable_by_key(|&(n, _)| n);
        if row.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Malformed("duplicate edge target".into()));
        }
        self.rows.push(row);
        Ok(id)
    }

    /// Builds a circuit from an explicit edge list; forward edges are
    /// permitted here, so the result must pass [`PowerCircuit::validate`].
    pub fn from_edges(node_count: usize, edges: &[(NodeId, NodeId, i8)]) -> Result<Self> {
        let mut rows = vec![Row::new(); node_count];
        for &(src, dst, sign) in edges {
            if src.index() >= node_count {
                return Err(Error::UnknownNode(src));
            }
            if dst.index() >= node_count {
                return Err(Error::UnknownNode(dst));
            }
            if sign != -1 && sign != 1 {
                return Err(Error::BadLabel(sign as i64));
            }
            rows[src.index()].push((dst, sign));
        }
        for row in &mut rows {
            row.sort_unstable_by_key(|&(n, _)| n);
            if row.windows(2).any(|w| w[0].0 == w[1].0) {
                return Err(Error::Malformed("duplicate edge".into()));
            }
        }
        Ok(Self { rows })
    }

    /// Sets one edge in place; the caller keeps the graph acyclic.
    pub(crate) fn add_edge_unchecked(&mut self, src: NodeId, dst: NodeId, sign: i8) {
        let row = &mut self.rows[src.index()];
        match row.binary_search_by_key(&dst, |&(n, _)| n) {
            Ok(i) => row[i].1 = sign,
            Err(i) => row.insert(i, (dst, sign)),
        }
    }

    pub fn label(&self, src: NodeId, dst: NodeId) -> i8 {
        self.rows[src.index()]
            .binary_search_by_key(&dst, |&(n, _)| n)
            .map(|i| self.rows[src.index()][i].1)
            .unwrap_or(0)
    }

    /// The successor marking of `node` (the row of delta at that node).
    pub fn successor_marking(&self, node: NodeId) -> Marking {
        Marking {
            signs: self.rows[node.index()].iter().copied().collect(),
        }
    }

    pub(crate) fn row(&self, node: NodeId) -> &[(NodeId, i8)] {
        &self.rows[node.index()]
    }

    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId, i8)> + '_ {
        self.rows.iter().enumerate().flat_map(|(i, row)| {
            row.iter().map(move |&(dst, sign)| (NodeId(i as u32), dst, sign))
        })
    }

    pub fn edge_count(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// Checks that the edge relation is acyclic; labels are constrained to
    /// {-1, +1} at construction time.
    pub fn validate(&self) -> Result<()> {
        self.topological_order().map(|_| ())
    }

    /// Nodes in an order where successors precede their sources.
    pub(crate) fn topological_order(&self) -> Result<Vec<NodeId>> {
        let n = self.rows.len();
        // out_deg counts unprocessed successors; a node is emitted once all
        // of its successors are out.
        let mut out_deg: Vec<usize> = self.rows.iter().map(Vec::len).collect();
        let mut preds: Vec<Vec<u32>> = vec![Vec::new(); n];
        for (i, row) in self.rows.iter().enumerate() {
            for &(dst, _) in row {
                preds[dst.index()].push(i as u32);
            }
        }
        let mut queue: Vec<u32> = (0..n as u32).filter(|&i| out_deg[i as usize] == 0).collect();
        let mut order = Vec::with_capacity(n);
        let mut head = 0;
        while head < queue.len() {
            let v = queue[head];
            head += 1;
            order.push(NodeId(v));
            for &p in &preds[v as usize] {
                out_deg[p as usize] -= 1;
                if out_deg[p as usize] == 0 {
                    queue.push(p);
                }
            }
        }
        if order.len() < n {
            let stuck: Vec<NodeId> = (0..n as u32)
                .filter(|&i| out_deg[i as usize] > 0)
                .map(NodeId)
                .collect();
            return Err(Error::CycleDetected(stuck));
        }
        Ok(order)
    }

    /// Length in edges of a longest path.
    pub fn depth(&self) -> usize {
        let order = self
            .topological_order()
            .expect("depth requires a validated circuit");
        let mut d = vec![0usize; self.rows.len()];
        let mut max = 0;
        for v in order {
            let dv = self.rows[v.index()]
                .iter()
                .map(|&(q, _)| d[q.index()] + 1)
                .max()
                .unwrap_or(0);
            d[v.index()] = dv;
            max = max.max(dv);
        }
        max
    }

    /// A path of `n + 1` nodes linked by +1 edges; node `i` evaluates to the
    /// tower value tau(i). Returns the circuit and the nodes bottom-up.
    pub fn tower_chain(n: usize) -> (Self, Vec<NodeId>) {
        let mut pc = Self::new();
        let mut nodes = Vec::with_capacity(n + 1);
        let mut prev: Option<NodeId> = None;
        for _ in 0..=n {
            let id = match prev {
                None => pc.add_node([]).unwrap(),
                Some(p) => pc.add_node([(p, 1)]).unwrap(),
            };
            nodes.push(id);
            prev = Some(id);
        }
        (pc, nodes)
    }

    /// Exact bottom-up evaluation of `marking`.
    ///
    /// Verifies the power-circuit property along the way: every successor
    /// marking must evaluate to a non-negative integer. Any intermediate
    /// exponent above `budget_bits` aborts with an error rather than
    /// approximating.
    pub fn eval_exact(&self, marking: &Marking, budget_bits: u64) -> Result<BigInt> {
        for (node, _) in marking.support() {
            if !self.contains(node) {
                return Err(Error::UnknownNode(node));
            }
        }
        let order = self.topological_order()?;
        let mut values: Vec<BigInt> = vec![BigInt::zero(); self.rows.len()];
        let budget = BigInt::from(budget_bits);
        for v in order {
            let mut exp = BigInt::zero();
            for &(q, sign) in &self.rows[v.index()] {
                if sign > 0 {
                    exp += &values[q.index()];
                } else {
                    exp -= &values[q.index()];
                }
            }
            if exp.is_negative() {
                return Err(Error::NotAPowerCircuit(v));
            }
            if exp > budget {
                return Err(Error::EvalBudgetExceeded {
                    node: v,
                    budget_bits,
                });
            }
            let exp: u64 = exp.try_into().expect("exponent fits after budget check");
            values[v.index()] = BigInt::one() << exp;
        }
        let mut acc = BigInt::zero();
        for (node, sign) in marking.support() {
            if sign > 0 {
                acc += &values[node.index()];
            } else {
                acc -= &values[node.index()];
            }
        }
        Ok(acc)
    }

    /// Clones every node in the support of `m` (same successor markings) and
    /// returns the marking transported onto the clones.
    pub fn clone_marking(&self, m: &Marking) -> (Self, Marking) {
        let mut pc = self.clone();
        let cm = pc.append_clone_marking(m);
        (pc, cm)
    }

    pub(crate) fn append_clone_marking(&mut self, m: &Marking) -> Marking {
        let mut cm = Marking::new();
        for (node, sign) in m.support() {
            let row = self.rows[node.index()].clone();
            let id = NodeId(self.rows.len() as u32);
            self.rows.push(row);
            cm.set(id, sign).unwrap();
        }
        cm
    }

    /// A marking evaluating to eps(k) + eps(l) on an extension of `self`;
    /// grows by at most |sigma(k)| nodes and leaves the depth unchanged.
    pub fn marking_add(&self, k: &Marking, l: &Marking) -> (Self, Marking) {
        let mut pc = self.clone();
        let m = pc.append_marking_add(k, l);
        debug_assert!(pc.node_count() <= 2 * self.node_count());
        (pc, m)
    }

    pub(crate) fn append_marking_add(&mut self, k: &Marking, l: &Marking) -> Marking {
        let mut m = self.append_clone_marking(k);
        for (node, sign) in l.support() {
            m.set(node, sign).unwrap();
        }
        m
    }

    /// Sign flip of every entry; no new nodes.
    pub fn marking_negate(&self, l: &Marking) -> Marking {
        l.negated()
    }

    /// A marking evaluating to eps(k) * 2^eps(l), given eps(l) >= 0.
    ///
    /// The caller asserts non-negativity of the exponent; the checked
    /// variant lives in [`crate::reduce::marking_mul_pow2`]. Grows the
    /// circuit by at most 2 |Pi| nodes and the depth by at most one.
    pub fn marking_mul_pow2_unchecked(&self, k: &Marking, l: &Marking) -> (Self, Marking) {
        let mut pc = self.clone();
        let m = pc.append_mul_pow2(k, l);
        debug_assert!(pc.node_count() <= 3 * self.node_count());
        (pc, m)
    }

    pub(crate) fn append_mul_pow2(&mut self, k: &Marking, l: &Marking) -> Marking {
        let cl = self.append_clone_marking(l);
        // Fresh clones of sigma(k) take their original row plus one edge to
        // every node of sigma(clone(l)); no incoming edges exist on either
        // clone set, so the depth grows by at most one.
        let mut ck = Marking::new();
        for (node, sign) in k.support() {
            let mut row = self.rows[node.index()].clone();
            for (q, s) in cl.support() {
                row.push((q, s));
            }
            row.sort_unstable_by_key(|&(n, _)| n);
            let id = NodeId(self.rows.len() as u32);
            self.rows.push(row);
            ck.set(id, sign).unwrap();
        }
        ck
    }

    /// Keeps exactly the nodes reachable from `keep` (downward closure) and
    /// renumbers them in ascending old-id order. Returns the old -> new map.
    pub(crate) fn retain_closure(&self, keep: &[&Marking]) -> (Self, Vec<Option<NodeId>>) {
        let n = self.rows.len();
        let mut mark = vec![false; n];
        let mut stack: Vec<usize> = Vec::new();
        for m in keep {
            for (node, _) in m.support() {
                if !mark[node.index()] {
                    mark[node.index()] = true;
                    stack.push(node.index());
                }
            }
        }
        while let Some(v) = stack.pop() {
            for &(q, _) in &self.rows[v] {
                if !mark[q.index()] {
                    mark[q.index()] = true;
                    stack.push(q.index());
                }
            }
        }
        let mut map: Vec<Option<NodeId>> = vec![None; n];
        let mut rows: Vec<Row> = Vec::new();
        for i in 0..n {
            if mark[i] {
                map[i] = Some(NodeId(rows.len() as u32));
                rows.push(Vec::new());
            }
        }
        for i in 0..n {
            if let Some(new_id) = map[i] {
                rows[new_id.index()] = self.rows[i]
                    .iter()
                    .map(|&(q, s)| (map[q.index()].expect("closure is successor-closed"), s))
                    .collect();
            }
        }
        (Self { rows }, map)
    }

    /// Sparse variant of [`PowerCircuit::retain_closure`]: costs are
    /// proportional to the closure, not the circuit. New ids ascend with
    /// old ids.
    pub(crate) fn retain_closure_sparse(
        &self,
        keep: &[&Marking],
    ) -> (Self, std::collections::BTreeMap<u32, NodeId>) {
        use std::collections::BTreeMap;
        let mut seen: std::collections::BTreeSet<u32> = std::collections::BTreeSet::new();
        let mut stack: Vec<u32> = Vec::new();
        for m in keep {
            for (node, _) in m.support() {
                if seen.insert(node.0) {
                    stack.push(node.0);
                }
            }
        }
        while let Some(v) = stack.pop() {
            for &(q, _) in &self.rows[v as usize] {
                if seen.insert(q.0) {
                    stack.push(q.0);
                }
            }
        }
        let map: BTreeMap<u32, NodeId> = seen
            .iter()
            .enumerate()
            .map(|(dense, &old)| (old, NodeId(dense as u32)))
            .collect();
        let mut rows: Vec<Row> = Vec::with_capacity(map.len());
        for &old in &seen {
            rows.push(
                self.rows[old as usize]
                    .iter()
                    .map(|&(q, s)| (map[&q.0], s))
                    .collect(),
            );
        }
        (Self { rows }, map)
    }

    pub(crate) fn remap_marking(map: &[Option<NodeId>], m: &Marking) -> Marking {
        let mut out = Marking::new();
        for (node, sign) in m.support() {
            out.set(map[node.index()].expect("marked node kept"), sign)
                .unwrap();
        }
        out
    }

    /// Disjoint union; returns the id offset applied to `other`'s nodes.
    pub fn disjoint_union(&self, other: &Self) -> (Self, u32) {
        let mut pc = self.clone();
        let offset = pc.append_disjoint(other);
        (pc, offset)
    }

    pub(crate) fn append_disjoint(&mut self, other: &Self) -> u32 {
        let offset = self.rows.len() as u32;
        for row in &other.rows {
            self.rows
                .push(row.iter().map(|&(n, s)| (NodeId(n.0 + offset), s)).collect());
        }
        offset
    }

    pub fn offset_marking(m: &Marking, offset: u32) -> Marking {
        Marking {
            signs: m.signs.iter().map(|(&n, &s)| (NodeId(n.0 + offset), s)).collect(),
        }
    }
}
