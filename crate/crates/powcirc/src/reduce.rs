//! Reduced power circuits and the reduction pipeline.
//!
//! A reduced circuit keeps its nodes as a list sorted strictly by value,
//! with every successor marking compact. On such a circuit two compact
//! markings are compared by scanning for the most significant position
//! where they differ, with no arithmetic on the (potentially
//! non-elementary) values themselves.
//!
//! Reduction moves an arbitrary circuit into this normal form by
//! iterating three steps: integrate the minimal non-reduced nodes
//! (`update_nodes`), lengthen every maximal chain enough to absorb
//! colliding markings (`extend_chains`), and rewrite all carried markings
//! chain by chain into compact form (`update_markings`). Exactly
//! depth + 1 iterations are needed.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::par;
use crate::pc::{Marking, NodeId, PowerCircuit};
use crate::sdr::SignedDigitRep;

/// Row over gamma arena ids, sorted by id, signs in {-1, +1}.
type GRow = Vec<(u32, i8)>;
/// Row resolved to sorted order positions, ascending.
type PRow = Vec<(u32, i8)>;

fn ceil_log2(n: usize) -> u32 {
    debug_assert!(n >= 1);
    usize::BITS - (n - 1).leading_zeros()
}

/// Compare two compact markings given by position rows: the most
/// significant differing position decides.
fn cmp_prows(a: &[(u32, i8)], b: &[(u32, i8)]) -> Ordering {
    let mut i = a.len();
    let mut j = b.len();
    loop {
        match (i, j) {
            (0, 0) => return Ordering::Equal,
            (0, _) => return 0.cmp(&b[j - 1].1),
            (_, 0) => return a[i - 1].1.cmp(&0),
            _ => {
                let (pa, sa) = a[i - 1];
                let (pb, sb) = b[j - 1];
                match pa.cmp(&pb) {
                    Ordering::Greater => return sa.cmp(&0),
                    Ordering::Less => return 0.cmp(&sb),
                    Ordering::Equal => {
                        if sa != sb {
                            return sa.cmp(&sb);
                        }
                        i -= 1;
                        j -= 1;
                    }
                }
            }
        }
    }
}

/// Compare restricted to positions >= cutoff.
fn cmp_prows_above(a: &[(u32, i8)], b: &[(u32, i8)], cutoff: u32) -> Ordering {
    let ta: Vec<(u32, i8)> = a.iter().copied().filter(|&(p, _)| p >= cutoff).collect();
    let tb: Vec<(u32, i8)> = b.iter().copied().filter(|&(p, _)| p >= cutoff).collect();
    cmp_prows(&ta, &tb)
}

/// Exact value of the restriction to positions < cutoff, where position `p`
/// carries weight 2^p (valid on the initial chain).
fn prefix_value(a: &[(u32, i8)], cutoff: u32) -> BigInt {
    let mut v = BigInt::zero();
    for &(p, s) in a {
        if p < cutoff {
            v += BigInt::from(s) << p;
        }
    }
    v
}

/// Compare eps(a) against eps(b) + k for compact position rows.
///
/// The k = 0 path is the plain digit scan; k > 0 splits on the initial
/// chain: outside it the values must agree exactly, inside it the small
/// prefix values are compared with exact arithmetic.
fn cmp_offset(a: &[(u32, i8)], b: &[(u32, i8)], k: u64, c0: u32) -> Result<Ordering> {
    if k == 0 {
        return Ok(cmp_prows(a, b));
    }
    // admissible offsets: k <= floor(2^(c0 + 1) / 3)
    let in_bounds = c0 >= 63 || k <= ((1u64 << (c0 + 1)) - 1) / 3;
    if !in_bounds {
        return Err(Error::OffsetTooLarge(k));
    }
    match cmp_prows(a, b) {
        Ordering::Less | Ordering::Equal => Ok(Ordering::Less),
        Ordering::Greater => {
            if cmp_prows_above(a, b, c0) != Ordering::Equal {
                return Ok(Ordering::Greater);
            }
            if c0 <= 120 {
                let va = prefix_value_i128(a, c0);
                let vb = prefix_value_i128(b, c0) + k as i128;
                Ok(va.cmp(&vb))
            } else {
                Ok(prefix_value(a, c0).cmp(&(prefix_value(b, c0) + BigInt::from(k))))
            }
        }
    }
}

fn prefix_value_i128(a: &[(u32, i8)], cutoff: u32) -> i128 {
    debug_assert!(cutoff <= 120);
    let mut v = 0i128;
    for &(p, s) in a {
        if p < cutoff {
            v += (s as i128) << p;
        }
    }
    v
}

/// The working form of a reduced circuit: an arena of successor rows keyed
/// by stable ids plus the value-sorted order.
///
/// The chain structure is carried along in `linked` rather than recomputed
/// by comparisons: every mutation knows exactly which adjacencies it
/// creates, and linkage of freshly inserted nodes is decided against the
/// pre-mutation circuit, where the initial-chain length is exact.
#[derive(Clone, Debug, Default)]
struct Gamma {
    rows: Vec<GRow>,
    order: Vec<u32>,
    pos: Vec<u32>,
    /// linked[p]: positions p - 1 and p belong to the same maximal chain
    linked: Vec<bool>,
}

impl Gamma {
    fn len(&self) -> usize {
        self.order.len()
    }

    fn prow(&self, row: &[(u32, i8)]) -> PRow {
        let mut out: PRow = row
            .iter()
            .map(|&(g, s)| (self.pos[g as usize], s))
            .collect();
        out.sort_unstable_by_key(|&(p, _)| p);
        out
    }

    fn cmp_rows(&self, a: &[(u32, i8)], b: &[(u32, i8)]) -> Ordering {
        cmp_prows(&self.prow(a), &self.prow(b))
    }

    fn rebuild_pos(&mut self) {
        self.pos = vec![0; self.rows.len()];
        for (p, &g) in self.order.iter().enumerate() {
            self.pos[g as usize] = p as u32;
        }
    }

    /// Recovers the chain cache by scanning; only used when adopting an
    /// externally validated circuit. Sound because at each step the rows
    /// compared are supported inside the already-scanned prefix.
    fn rebuild_linked_by_scan(&mut self) {
        let n = self.len();
        self.linked = vec![false; n];
        let mut c0 = 1u32;
        for p in 1..n {
            let row = self.prow(&self.rows[self.order[p] as usize]);
            let prev = self.prow(&self.rows[self.order[p - 1] as usize]);
            let eq = cmp_offset(&row, &prev, 1, c0).expect("offset 1 is always admissible")
                == Ordering::Equal;
            self.linked[p] = eq;
            if eq && p as u32 == c0 {
                c0 += 1;
            }
        }
    }

    /// Length of the initial maximal chain.
    fn c0_len(&self) -> usize {
        if self.order.is_empty() {
            return 0;
        }
        let mut len = 1;
        while len < self.order.len() && self.linked[len] {
            len += 1;
        }
        len
    }

    /// Maximal chains as (start position, length), ascending, plus the
    /// chain index of every position.
    fn chains(&self) -> (Vec<(usize, usize)>, Vec<u32>) {
        let n = self.len();
        let mut chains: Vec<(usize, usize)> = Vec::new();
        let mut chain_of = vec![0u32; n];
        for p in 0..n {
            if p == 0 || !self.linked[p] {
                chains.push((p, 1));
            } else {
                chains.last_mut().unwrap().1 += 1;
            }
            chain_of[p] = (chains.len() - 1) as u32;
        }
        (chains, chain_of)
    }

    /// Binary search for a node whose successor value equals that of `row`.
    fn find_value(&self, row: &[(u32, i8)]) -> Option<u32> {
        let target = self.prow(row);
        let mut lo = 0usize;
        let mut hi = self.len();
        while lo < hi {
            let mid = (lo + hi) / 2;
            let mid_row = self.prow(&self.rows[self.order[mid] as usize]);
            match cmp_prows(&target, &mid_row) {
                Ordering::Equal => return Some(self.order[mid]),
                Ordering::Greater => lo = mid + 1,
                Ordering::Less => hi = mid,
            }
        }
        None
    }

    /// Inserts nodes whose rows reference only existing nodes; rows must be
    /// compact, non-negative and pairwise distinct from each other and from
    /// every present value. Returns the new arena ids, aligned with input.
    fn insert(&mut self, new_rows: Vec<GRow>, check: bool) -> Result<Vec<u32>> {
        if new_rows.is_empty() {
            return Ok(Vec::new());
        }
        let old_c0 = self.c0_len() as u32;
        let base = self.rows.len() as u32;
        let gids: Vec<u32> = (0..new_rows.len() as u32).map(|i| base + i).collect();
        let prows: Vec<PRow> = new_rows.iter().map(|r| self.prow(r)).collect();
        self.rows.extend(new_rows);

        let mut ranked: Vec<usize> = (0..gids.len()).collect();
        ranked.sort_by(|&x, &y| cmp_prows(&prows[x], &prows[y]));
        if check {
            for w in ranked.windows(2) {
                if cmp_prows(&prows[w[0]], &prows[w[1]]) == Ordering::Equal {
                    return Err(Error::DuplicateValue);
                }
            }
        }
        // rank of each new node among the existing order
        let mut slots: Vec<usize> = Vec::with_capacity(ranked.len());
        for &i in &ranked {
            let target = &prows[i];
            let mut lo = 0usize;
            let mut hi = self.order.len();
            while lo < hi {
                let mid = (lo + hi) / 2;
                let mid_row = self.prow(&self.rows[self.order[mid] as usize]);
                match cmp_prows(target, &mid_row) {
                    Ordering::Equal => {
                        return if check {
                            Err(Error::DuplicateValue)
                        } else {
                            Err(Error::PreconditionViolated(
                                "inserted value already present".into(),
                            ))
                        }
                    }
                    Ordering::Greater => lo = mid + 1,
                    Ordering::Less => hi = mid,
                }
            }
            slots.push(lo);
        }
        // adjacency of values +1 apart, decided on the pre-insert circuit
        let adjacent = |hi_row: &PRow, lo_row: &PRow| -> bool {
            cmp_offset(hi_row, lo_row, 1, old_c0).expect("offset 1 is always admissible")
                == Ordering::Equal
        };
        enum Slot {
            Old(usize),
            New(usize),
        }
        let mut layout: Vec<Slot> = Vec::with_capacity(self.order.len() + ranked.len());
        let mut next = 0usize;
        for p in 0..self.order.len() {
            while next < ranked.len() && slots[next] == p {
                layout.push(Slot::New(ranked[next]));
                next += 1;
            }
            layout.push(Slot::Old(p));
        }
        while next < ranked.len() {
            layout.push(Slot::New(ranked[next]));
            next += 1;
        }
        let old_prow = |p: usize| self.prow(&self.rows[self.order[p] as usize]);
        let mut merged: Vec<u32> = Vec::with_capacity(layout.len());
        let mut linked: Vec<bool> = Vec::with_capacity(layout.len());
        for (i, slot) in layout.iter().enumerate() {
            let link = if i == 0 {
                false
            } else {
                match (&layout[i - 1], slot) {
                    (Slot::Old(_), Slot::Old(q)) => self.linked[*q],
                    (Slot::Old(p), Slot::New(x)) => adjacent(&prows[*x], &old_prow(*p)),
                    (Slot::New(x), Slot::Old(q)) => adjacent(&old_prow(*q), &prows[*x]),
                    (Slot::New(x), Slot::New(y)) => adjacent(&prows[*y], &prows[*x]),
                }
            };
            merged.push(match slot {
                Slot::Old(p) => self.order[*p],
                Slot::New(x) => gids[*x],
            });
            linked.push(link);
        }
        self.order = merged;
        self.linked = linked;
        self.rebuild_pos();
        Ok(gids)
    }

    /// Chain extension: first completes the initial chain up to a fresh top
    /// node, then grows every maximal chain so that each successor value up
    /// to `mu` above an existing one is present.
    fn extend_chains(&mut self, mu: u64) -> Result<()> {
        if self.order.is_empty() {
            return Ok(());
        }
        let c0 = self.c0_len() as u32;
        if c0 < 63 && mu > ((1u64 << (c0 + 1)) - 1) / 3 {
            return Err(Error::MuTooLarge(mu));
        }

        // Step 1: fill every gap of exactly 2 below the first gap above 2,
        // then one more node on top; the result is an initial chain with
        // successor values 0, 1, 2, ... whose last node is fresh. Gaps of 1
        // come free from the chain cache; only chain boundaries below the
        // break point need a comparison.
        let n = self.len();
        let mut i0 = n - 1;
        let mut fill: Vec<usize> = Vec::new();
        for p in 0..n {
            let gap = if p + 1 >= n {
                3
            } else if self.linked[p + 1] {
                1
            } else {
                let row = self.prow(&self.rows[self.order[p + 1] as usize]);
                let prev = self.prow(&self.rows[self.order[p] as usize]);
                if c0 >= 2 && cmp_offset(&row, &prev, 2, c0)? == Ordering::Equal {
                    2
                } else {
                    3
                }
            };
            if gap >= 2 {
                fill.push(p);
            }
            if gap == 3 {
                i0 = p;
                break;
            }
        }
        // lambda(i) = i + number of filled slots below i
        let lambda = |i: usize| -> usize { i + fill.iter().take_while(|&&f| f < i).count() };
        let tilde_len = lambda(i0) + 2;

        let base = self.rows.len() as u32;
        let q_gid: Vec<u32> = (0..fill.len() as u32).map(|i| base + i).collect();
        // gid occupying each slot of the completed initial chain
        let mut slot_gid: Vec<u32> = vec![u32::MAX; tilde_len];
        for i in 0..=i0 {
            slot_gid[lambda(i)] = self.order[i];
        }
        for (fi, &p) in fill.iter().enumerate() {
            slot_gid[lambda(p) + 1] = q_gid[fi];
        }
        debug_assert!(slot_gid.iter().all(|&g| g != u32::MAX));
        for &p in fill.iter() {
            let value = lambda(p) as u64 + 1;
            let digits = SignedDigitRep::from_int(&BigInt::from(value)).compact();
            let mut row: GRow = digits
                .digits()
                .iter()
                .enumerate()
                .filter(|&(_, &d)| d != 0)
                .map(|(j, &d)| (slot_gid[j], d))
                .collect();
            row.sort_unstable_by_key(|&(g, _)| g);
            self.rows.push(row);
        }
        let mut merged: Vec<u32> = Vec::with_capacity(n + fill.len());
        let mut linked: Vec<bool> = Vec::with_capacity(n + fill.len());
        for i in 0..n {
            merged.push(self.order[i]);
            linked.push(if i == 0 {
                false
            } else if fill.binary_search(&(i - 1)).is_ok() {
                // the inserted node below reaches this value exactly when
                // the old gap was 2, i.e. below the break point
                i - 1 < i0
            } else {
                self.linked[i]
            });
            if fill.binary_search(&i).is_ok() {
                merged.push(q_gid[fill.binary_search(&i).unwrap()]);
                linked.push(true); // successor value is one above slot i
            }
        }
        self.order = merged;
        self.linked = linked;
        self.rebuild_pos();

        // Step 2: add up to mu nodes above every chain end (one less above
        // the completed initial chain, whose fresh top already counts).
        // Interior positions are skipped via the chain cache; each chain
        // end needs at most mu + 1 offset probes to find its gap.
        let n2 = self.len();
        let tc0 = self.c0_len();
        debug_assert_eq!(tc0, tilde_len);
        let mut plan: Vec<(usize, u64, bool)> = Vec::new(); // (position, d, joins next)
        for p in 0..n2 {
            let cap = if p == tc0 - 1 {
                mu.saturating_sub(1)
            } else {
                mu
            };
            if cap == 0 {
                continue;
            }
            if p + 1 >= n2 {
                plan.push((p, cap, false));
                continue;
            }
            if self.linked[p + 1] {
                continue; // gap 1: nothing to add
            }
            let row = self.prow(&self.rows[self.order[p + 1] as usize]);
            let prev = self.prow(&self.rows[self.order[p] as usize]);
            let mut d = cap;
            let mut joins = false;
            for k in 2..=cap + 1 {
                if cmp_offset(&row, &prev, k, tc0 as u32)? == Ordering::Equal {
                    d = (k - 1).min(cap);
                    joins = d == k - 1;
                    break;
                }
            }
            if d > 0 {
                plan.push((p, d, joins));
            }
        }
        if plan.is_empty() {
            return Ok(());
        }
        let base = self.rows.len() as u32;
        let mut q_gid = base;
        let mut inserts: Vec<(usize, Vec<u32>, bool)> = Vec::new();
        for &(p, d, joins) in &plan {
            let prow = self.prow(&self.rows[self.order[p] as usize]);
            let low = if tc0 <= 120 {
                BigInt::from(prefix_value_i128(&prow, tc0 as u32))
            } else {
                prefix_value(&prow, tc0 as u32)
            };
            let off: Vec<(u32, i8)> = prow
                .iter()
                .copied()
                .filter(|&(q, _)| q as usize >= tc0)
                .collect();
            let mut created = Vec::with_capacity(d as usize);
            for h in 1..=d {
                let digits = SignedDigitRep::from_int(&(&low + h)).compact();
                if digits.digit_length() > tc0 {
                    return Err(Error::ChainOverflow);
                }
                let mut row: GRow = digits
                    .digits()
                    .iter()
                    .enumerate()
                    .filter(|&(_, &d)| d != 0)
                    .map(|(j, &d)| (self.order[j], d))
                    .collect();
                row.extend(off.iter().map(|&(q, s)| (self.order[q as usize], s)));
                row.sort_unstable_by_key(|&(g, _)| g);
                self.rows.push(row);
                created.push(q_gid);
                q_gid += 1;
            }
            inserts.push((p, created, joins));
        }
        let mut merged: Vec<u32> = Vec::with_capacity(n2 + (q_gid - base) as usize);
        let mut linked: Vec<bool> = Vec::with_capacity(n2 + (q_gid - base) as usize);
        let mut by_pos = inserts.into_iter().peekable();
        // link between the last emitted node and the next old one, when the
        // emitted node was created here
        let mut link_override: Option<bool> = None;
        for p in 0..n2 {
            let link = if p == 0 {
                false
            } else {
                link_override.take().unwrap_or(self.linked[p])
            };
            merged.push(self.order[p]);
            linked.push(link);
            if by_pos.peek().is_some_and(|&(ip, _, _)| ip == p) {
                let (_, created, joins) = by_pos.next().unwrap();
                for gid in created {
                    merged.push(gid);
                    linked.push(true); // each sits one value above the last
                }
                link_override = Some(joins);
            }
        }
        self.order = merged;
        self.linked = linked;
        self.rebuild_pos();
        Ok(())
    }

    /// Emits the sorted circuit; node ids equal sorted positions.
    fn emit(&self) -> PowerCircuit {
        let mut pc = PowerCircuit::new();
        for &g in &self.order {
            let row: Vec<(NodeId, i8)> = self.rows[g as usize]
                .iter()
                .map(|&(q, s)| (NodeId(self.pos[q as usize]), s))
                .collect();
            pc.add_node(row).expect("rows reference smaller values");
        }
        pc
    }

    fn marking_of(&self, row: &[(u32, i8)]) -> Marking {
        Marking::from_pairs(row.iter().map(|&(g, s)| (NodeId(self.pos[g as usize]), s)))
            .expect("signs are already restricted")
    }
}

/// A maximal run of nodes with consecutively doubling values, addressed by
/// positions into [`ReducedPc::order`].
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct Chain {
    pub start: usize,
    pub len: usize,
}

/// A power circuit together with its strictly value-sorted node order.
#[derive(Clone, Debug)]
pub struct ReducedPc {
    base: PowerCircuit,
    order: Vec<NodeId>,
}

impl ReducedPc {
    /// Wraps and validates a claimed reduced circuit: the order must be a
    /// topological permutation, values strictly increasing, every successor
    /// marking compact and non-negative.
    pub fn new(base: PowerCircuit, order: Vec<NodeId>) -> Result<Self> {
        if order.len() != base.node_count() {
            return Err(Error::Malformed("order must list every node".into()));
        }
        let mut id2pos = vec![u32::MAX; base.node_count()];
        for (p, &id) in order.iter().enumerate() {
            if !base.contains(id) || id2pos[id.index()] != u32::MAX {
                return Err(Error::Malformed("order is not a permutation".into()));
            }
            id2pos[id.index()] = p as u32;
        }
        // Incremental check over positions: each prefix is a valid reduced
        // circuit, which justifies the digit-scan comparisons below.
        let mut chain_of: Vec<u32> = Vec::with_capacity(order.len());
        let mut chain_count = 0u32;
        let mut c0 = 0u32;
        let mut prev: PRow = Vec::new();
        for (p, &id) in order.iter().enumerate() {
            let mut row: PRow = base
                .row(id)
                .iter()
                .map(|&(q, s)| (id2pos[q.index()], s))
                .collect();
            row.sort_unstable_by_key(|&(q, _)| q);
            if row.iter().any(|&(q, _)| q as usize >= p) {
                return Err(Error::Malformed(
                    "successor markings must point at smaller values".into(),
                ));
            }
            if let Some(&(_, s)) = row.last() {
                if s < 0 {
                    return Err(Error::NotAPowerCircuit(id));
                }
            }
            for w in row.windows(2) {
                let (q1, q2) = (w[0].0, w[1].0);
                if q2 == q1 + 1 && chain_of[q1 as usize] == chain_of[q2 as usize] {
                    return Err(Error::NonCompactSuccessor);
                }
            }
            if p == 0 {
                if !row.is_empty() {
                    return Err(Error::Malformed("smallest node must have value 1".into()));
                }
                chain_of.push(0);
                chain_count = 1;
                c0 = 1;
            } else {
                match cmp_offset(&row, &prev, 1, c0.max(1))? {
                    Ordering::Equal => {
                        let c = chain_of[p - 1];
                        chain_of.push(c);
                        if c == 0 && p as u32 == c0 {
                            c0 += 1;
                        }
                    }
                    Ordering::Greater => {
                        chain_of.push(chain_count);
                        chain_count += 1;
                    }
                    Ordering::Less => {
                        return Err(Error::Malformed(
                            "node values are not strictly increasing".into(),
                        ));
                    }
                }
            }
            prev = row;
        }
        Ok(Self { base, order })
    }

    pub fn base(&self) -> &PowerCircuit {
        &self.base
    }

    pub fn order(&self) -> &[NodeId] {
        &self.order
    }

    pub fn chain_nodes(&self, chain: &Chain) -> &[NodeId] {
        &self.order[chain.start..chain.start + chain.len]
    }

    fn to_gamma(&self) -> Gamma {
        let mut id2pos = vec![0u32; self.base.node_count()];
        for (p, &id) in self.order.iter().enumerate() {
            id2pos[id.index()] = p as u32;
        }
        let mut rows: Vec<GRow> = vec![GRow::new(); self.order.len()];
        for (p, &id) in self.order.iter().enumerate() {
            let mut row: GRow = self
                .base
                .row(id)
                .iter()
                .map(|&(q, s)| (id2pos[q.index()], s))
                .collect();
            row.sort_unstable_by_key(|&(g, _)| g);
            rows[p] = row;
        }
        let order: Vec<u32> = (0..self.order.len() as u32).collect();
        let pos = order.clone();
        let mut gamma = Gamma {
            rows,
            order,
            pos,
            linked: Vec::new(),
        };
        gamma.rebuild_linked_by_scan();
        gamma
    }

    fn marking_to_prow(&self, m: &Marking) -> Result<PRow> {
        let mut id2pos = vec![u32::MAX; self.base.node_count()];
        for (p, &id) in self.order.iter().enumerate() {
            id2pos[id.index()] = p as u32;
        }
        let mut row: PRow = Vec::with_capacity(m.support_len());
        for (node, sign) in m.support() {
            if !self.base.contains(node) {
                return Err(Error::UnknownNode(node));
            }
            row.push((id2pos[node.index()], sign));
        }
        row.sort_unstable_by_key(|&(p, _)| p);
        Ok(row)
    }

    fn check_compact(&self, row: &PRow, chain_of: &[u32]) -> Result<()> {
        for w in row.windows(2) {
            let (q1, q2) = (w[0].0, w[1].0);
            if q2 == q1 + 1 && chain_of[q1 as usize] == chain_of[q2 as usize] {
                return Err(Error::NonCompactSuccessor);
            }
        }
        Ok(())
    }

    /// The unique maximal chain containing the value-1 node.
    pub fn initial_chain(&self) -> Chain {
        Chain {
            start: 0,
            len: self.to_gamma().c0_len(),
        }
    }

    /// Partition of the order into maximal chains, ascending.
    pub fn maximal_chains(&self) -> Vec<Chain> {
        self.to_gamma()
            .chains()
            .0
            .into_iter()
            .map(|(start, len)| Chain { start, len })
            .collect()
    }

    /// Ordering of eps(l) against eps(m) + k for compact markings.
    pub fn compare_compact(&self, l: &Marking, m: &Marking, k: u64) -> Result<Ordering> {
        let lr = self.marking_to_prow(l)?;
        let mr = self.marking_to_prow(m)?;
        let gamma = self.to_gamma();
        let (_, chain_of) = gamma.chains();
        self.check_compact(&lr, &chain_of)?;
        self.check_compact(&mr, &chain_of)?;
        cmp_offset(&lr, &mr, k, gamma.c0_len() as u32)
    }

    /// Merges prospective nodes (given by their compact successor markings
    /// over this circuit) into the sorted order.
    pub fn insert_nodes(&self, prospective: &[Marking]) -> Result<InsertOutcome> {
        let mut gamma = self.to_gamma();
        let (_, chain_of) = gamma.chains();
        let mut rows: Vec<GRow> = Vec::with_capacity(prospective.len());
        for m in prospective {
            let prow = self.marking_to_prow(m)?;
            self.check_compact(&prow, &chain_of)?;
            if let Some(&(_, s)) = prow.last() {
                if s < 0 {
                    return Err(Error::PreconditionViolated(
                        "prospective node value must be non-negative".into(),
                    ));
                }
            }
            // gids equal positions in the freshly built gamma
            rows.push(prow);
        }
        let old_n = gamma.len();
        let gids = gamma.insert(rows, true)?;
        let reduced = ReducedPc {
            base: gamma.emit(),
            order: (0..gamma.len() as u32).map(NodeId).collect(),
        };
        let existing = (0..old_n).map(|g| NodeId(gamma.pos[g])).collect();
        let inserted = gids
            .into_iter()
            .map(|g| NodeId(gamma.pos[g as usize]))
            .collect();
        Ok(InsertOutcome {
            reduced,
            existing,
            inserted,
        })
    }

    /// Grows every maximal chain so that all successor values up to `mu`
    /// above an existing one are present; creates no new chains.
    pub fn extend_chains(&self, mu: u64) -> Result<ReducedPc> {
        let mut gamma = self.to_gamma();
        gamma.extend_chains(mu)?;
        Ok(ReducedPc {
            base: gamma.emit(),
            order: (0..gamma.len() as u32).map(NodeId).collect(),
        })
    }
}

/// Result of [`ReducedPc::insert_nodes`]: node ids of the new circuit for
/// the pre-existing order entries and for each prospective node.
pub struct InsertOutcome {
    pub reduced: ReducedPc,
    pub existing: Vec<NodeId>,
    pub inserted: Vec<NodeId>,
}

#[derive(Clone, Debug, Default)]
struct SplitSigns {
    gamma_part: GRow,
    xi_part: Vec<(u32, i8)>, // keyed by original node index
}

/// The reduction pipeline over one circuit, holding the already-reduced
/// part, the remaining non-reduced nodes and every carried marking.
pub struct Reduction {
    gamma: Gamma,
    xi: Vec<Option<SplitSigns>>,
    alive: usize,
    markings: Vec<SplitSigns>,
    node_map: Vec<Option<u32>>,
    iterations: usize,
    pending: Option<Pending>,
}

struct Pending {
    min_origs: Vec<u32>,
    in_min: Vec<bool>,
    mu: u64,
}

/// Output of a full reduction: the sorted circuit, every input marking in
/// compact form, and for each original node a node of equal value.
#[derive(Debug)]
pub struct ReductionResult {
    pub reduced: ReducedPc,
    pub markings: Vec<Marking>,
    pub node_map: Vec<NodeId>,
    pub iterations: usize,
}

impl Reduction {
    pub fn new(pc: &PowerCircuit, markings: &[Marking]) -> Result<Self> {
        pc.validate()?;
        let n = pc.node_count();
        for m in markings {
            for (node, _) in m.support() {
                if !pc.contains(node) {
                    return Err(Error::UnknownNode(node));
                }
            }
        }
        let mut gamma = Gamma::default();
        if n > 0 {
            let ell = ceil_log2(n) + 1;
            for i in 0..ell as u64 {
                let digits = SignedDigitRep::from_int(&BigInt::from(i)).compact();
                let row: GRow = digits
                    .digits()
                    .iter()
                    .enumerate()
                    .filter(|&(_, &d)| d != 0)
                    .map(|(j, &d)| (j as u32, d))
                    .collect();
                gamma.rows.push(row);
                gamma.order.push(i as u32);
                gamma.linked.push(i > 0); // the initial chain links throughout
            }
            gamma.rebuild_pos();
        }
        let xi: Vec<Option<SplitSigns>> = (0..n)
            .map(|i| {
                Some(SplitSigns {
                    gamma_part: GRow::new(),
                    xi_part: pc
                        .row(NodeId(i as u32))
                        .iter()
                        .map(|&(q, s)| (q.0, s))
                        .collect(),
                })
            })
            .collect();
        let markings = markings
            .iter()
            .map(|m| SplitSigns {
                gamma_part: GRow::new(),
                xi_part: m.support().map(|(q, s)| (q.0, s)).collect(),
            })
            .collect();
        Ok(Self {
            gamma,
            xi,
            alive: n,
            markings,
            node_map: vec![None; n],
            iterations: 0,
            pending: None,
        })
    }

    pub fn is_done(&self) -> bool {
        self.alive == 0
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Integrates every non-reduced node whose successors all lie in the
    /// reduced part: one representative per value class is inserted, and
    /// the node map records the class for each member.
    pub fn update_nodes(&mut self) -> Result<()> {
        if self.pending.is_some() {
            return Err(Error::PreconditionViolated(
                "update_markings must complete the previous step".into(),
            ));
        }
        let min_origs: Vec<u32> = (0..self.xi.len() as u32)
            .filter(|&i| {
                self.xi[i as usize]
                    .as_ref()
                    .is_some_and(|e| e.xi_part.is_empty())
            })
            .collect();
        if min_origs.is_empty() {
            if self.alive > 0 {
                return Err(Error::PreconditionViolated(
                    "no integrable nodes although the circuit is nonempty".into(),
                ));
            }
            return Ok(());
        }
        for &orig in &min_origs {
            let row = &self.xi[orig as usize].as_ref().unwrap().gamma_part;
            let prow = self.gamma.prow(row);
            if let Some(&(_, s)) = prow.last() {
                if s < 0 {
                    return Err(Error::NotAPowerCircuit(NodeId(orig)));
                }
            }
        }
        // value classes; representative choice: smallest original id
        let mut keyed: Vec<u32> = min_origs.clone();
        keyed.sort_by(|&a, &b| {
            let ra = &self.xi[a as usize].as_ref().unwrap().gamma_part;
            let rb = &self.xi[b as usize].as_ref().unwrap().gamma_part;
            self.gamma.cmp_rows(ra, rb).then(a.cmp(&b))
        });
        let mut classes: Vec<Vec<u32>> = Vec::new();
        for &orig in &keyed {
            let extends = classes.last().is_some_and(|c| {
                let ra = &self.xi[c[0] as usize].as_ref().unwrap().gamma_part;
                let rb = &self.xi[orig as usize].as_ref().unwrap().gamma_part;
                self.gamma.cmp_rows(ra, rb) == Ordering::Equal
            });
            if extends {
                classes.last_mut().unwrap().push(orig);
            } else {
                classes.push(vec![orig]);
            }
        }
        let mut to_insert: Vec<GRow> = Vec::new();
        let mut class_gid: Vec<Option<u32>> = Vec::with_capacity(classes.len());
        for class in &classes {
            let row = &self.xi[class[0] as usize].as_ref().unwrap().gamma_part;
            let found = self.gamma.find_value(row);
            if found.is_none() {
                to_insert.push(row.clone());
            }
            class_gid.push(found);
        }
        let new_gids = self.gamma.insert(to_insert, false)?;
        let mut next_new = 0;
        for (class, gid) in classes.iter().zip(class_gid.iter()) {
            let gid = gid.unwrap_or_else(|| {
                let g = new_gids[next_new];
                next_new += 1;
                g
            });
            for &orig in class {
                self.node_map[orig as usize] = Some(gid);
            }
        }
        let mut in_min = vec![false; self.xi.len()];
        for &orig in &min_origs {
            in_min[orig as usize] = true;
        }
        let mu = ceil_log2(min_origs.len()) as u64 + 1;
        self.pending = Some(Pending {
            min_origs,
            in_min,
            mu,
        });
        Ok(())
    }

    /// Chain extension with mu = ceil(log2 |Min|) + 1 from the last
    /// `update_nodes` call.
    pub fn extend_chains(&mut self) -> Result<()> {
        let mu = self
            .pending
            .as_ref()
            .ok_or_else(|| Error::PreconditionViolated("update_nodes must run first".into()))?
            .mu;
        self.gamma.extend_chains(mu)
    }

    /// Rewrites every carried marking and every surviving successor marking
    /// chain by chain into compact form over the grown reduced part,
    /// folding the integrated nodes into their value classes.
    pub fn update_markings(&mut self) -> Result<()> {
        let pending = self
            .pending
            .take()
            .ok_or_else(|| Error::PreconditionViolated("update_nodes must run first".into()))?;
        let (chains, chain_of) = self.gamma.chains();
        let fold = |s: &SplitSigns| -> Result<SplitSigns> {
            let mut coef: Vec<(u32, i64)> = Vec::new(); // (position, signed count)
            let mut bump = |p: u32, s: i8| match coef.binary_search_by_key(&p, |&(q, _)| q) {
                Ok(i) => coef[i].1 += s as i64,
                Err(i) => coef.insert(i, (p, s as i64)),
            };
            for &(g, sign) in &s.gamma_part {
                bump(self.gamma.pos[g as usize], sign);
            }
            let mut xi_part: Vec<(u32, i8)> = Vec::new();
            for &(orig, sign) in &s.xi_part {
                if pending.in_min[orig as usize] {
                    let gid = self.node_map[orig as usize].expect("integrated this round");
                    bump(self.gamma.pos[gid as usize], sign);
                } else {
                    xi_part.push((orig, sign));
                }
            }
            let mut gamma_part: GRow = Vec::new();
            let mut idx = 0;
            while idx < coef.len() {
                let chain = chain_of[coef[idx].0 as usize];
                let (start, len) = chains[chain as usize];
                let small = len <= 100; // i128 holds the folded value
                let mut z128 = 0i128;
                let mut z = BigInt::zero();
                while idx < coef.len() && chain_of[coef[idx].0 as usize] == chain {
                    let (p, c) = coef[idx];
                    if small {
                        z128 += (c as i128) << (p as usize - start);
                    } else {
                        z += BigInt::from(c) << (p as usize - start);
                    }
                    idx += 1;
                }
                if small {
                    z = BigInt::from(z128);
                }
                let digits = SignedDigitRep::from_int(&z).compact();
                if digits.digit_length() > len {
                    return Err(Error::ChainOverflow);
                }
                for (r, &d) in digits.digits().iter().enumerate() {
                    if d != 0 {
                        gamma_part.push((self.gamma.order[start + r], d));
                    }
                }
            }
            gamma_part.sort_unstable_by_key(|&(g, _)| g);
            Ok(SplitSigns {
                gamma_part,
                xi_part,
            })
        };

        let mut work: Vec<SplitSigns> = Vec::new();
        let mut slots: Vec<usize> = Vec::new(); // marking index, then xi entries after markings.len()
        for (i, m) in self.markings.iter().enumerate() {
            work.push(m.clone());
            slots.push(i);
        }
        for (i, e) in self.xi.iter().enumerate() {
            if let Some(e) = e {
                if !pending.in_min[i] {
                    work.push(e.clone());
                    slots.push(self.markings.len() + i);
                }
            }
        }
        let folded = par::map_vec(&work, fold);
        for (slot, res) in slots.into_iter().zip(folded) {
            let res = res?;
            if slot < self.markings.len() {
                self.markings[slot] = res;
            } else {
                self.xi[slot - self.markings.len()] = Some(res);
            }
        }
        for &orig in &pending.min_origs {
            self.xi[orig as usize] = None;
            self.alive -= 1;
        }
        self.iterations += 1;
        Ok(())
    }

    pub fn step(&mut self) -> Result<()> {
        self.update_nodes()?;
        if self.pending.is_some() {
            self.extend_chains()?;
            self.update_markings()?;
        }
        Ok(())
    }

    pub fn run(mut self) -> Result<ReductionResult> {
        while self.alive > 0 {
            self.step()?;
        }
        Ok(self.into_result())
    }

    fn into_result(self) -> ReductionResult {
        let base = self.gamma.emit();
        let order: Vec<NodeId> = (0..self.gamma.len() as u32).map(NodeId).collect();
        let markings = self
            .markings
            .iter()
            .map(|s| {
                debug_assert!(s.xi_part.is_empty());
                self.gamma.marking_of(&s.gamma_part)
            })
            .collect();
        let node_map = self
            .node_map
            .iter()
            .map(|g| NodeId(self.gamma.pos[g.expect("all nodes integrated") as usize]))
            .collect();
        ReductionResult {
            reduced: ReducedPc { base, order },
            markings,
            node_map,
            iterations: self.iterations,
        }
    }

    /// Test-only entry into a mid-pipeline state: a reduced part given by
    /// successor values per sorted position, plus non-reduced entries and
    /// carried markings already split into reduced/non-reduced parts.
    #[cfg(test)]
    #[allow(private_interfaces)]
    pub(crate) fn from_state(
        gamma_rows: Vec<GRow>,
        xi: Vec<SplitSigns>,
        markings: Vec<SplitSigns>,
    ) -> Self {
        let n = gamma_rows.len();
        let alive = xi.len();
        let node_count = xi.len();
        let mut gamma = Gamma {
            rows: gamma_rows,
            order: (0..n as u32).collect(),
            pos: Vec::new(),
            linked: Vec::new(),
        };
        gamma.rebuild_pos();
        gamma.rebuild_linked_by_scan();
        Self {
            gamma,
            xi: xi.into_iter().map(Some).collect(),
            alive,
            markings,
            node_map: vec![None; node_count],
            iterations: 0,
            pending: None,
        }
    }

    #[cfg(test)]
    pub(crate) fn gamma_values(&self) -> Vec<BigInt> {
        use crate::pc::DEFAULT_BUDGET_BITS;
        let pc = self.gamma.emit();
        pc.node_ids()
            .map(|id| {
                let m = Marking::from_pairs([(id, 1)]).unwrap();
                pc.eval_exact(&m, DEFAULT_BUDGET_BITS).unwrap()
            })
            .collect()
    }
}

/// Full reduction of `pc` carrying `markings` through; see [`Reduction`].
pub fn reduce(pc: &PowerCircuit, markings: &[Marking]) -> Result<ReductionResult> {
    Reduction::new(pc, markings)?.run()
}

/// Restricts a reduced circuit to the downward closure of the given
/// markings. Dropping unreferenced nodes keeps the reduced invariants, and
/// because compact forms are value-determined the restriction makes
/// reduction idempotent at the file level.
pub fn trim_reduced(
    reduced: &ReducedPc,
    markings: &[Marking],
) -> Result<(ReducedPc, Vec<Marking>)> {
    let keep: Vec<&Marking> = markings.iter().collect();
    let (sub, map) = reduced.base().retain_closure(&keep);
    let remapped: Vec<Marking> = markings
        .iter()
        .map(|m| PowerCircuit::remap_marking(&map, m))
        .collect();
    let order: Vec<NodeId> = reduced
        .order()
        .iter()
        .filter_map(|id| map[id.index()])
        .collect();
    Ok((ReducedPc::new(sub, order)?, remapped))
}

/// Exact ordering of eps(l) against eps(m), at any scale: the difference
/// marking is reduced on the downward closure of both supports and its
/// compact form compared against zero.
pub fn compare(pc: &PowerCircuit, l: &Marking, m: &Marking) -> Result<Ordering> {
    for (node, _) in l.support().chain(m.support()) {
        if !pc.contains(node) {
            return Err(Error::UnknownNode(node));
        }
    }
    let (mut sub, map) = pc.retain_closure(&[l, m]);
    let lc = PowerCircuit::remap_marking(&map, l);
    let mc = PowerCircuit::remap_marking(&map, m);
    let diff = sub.append_marking_add(&lc, &mc.negated());
    // small closures settle by exact evaluation; the verdicts agree since
    // both routes are exact
    match sub.eval_exact(&diff, 512) {
        Ok(v) => return Ok(v.cmp(&BigInt::zero())),
        Err(Error::EvalBudgetExceeded { .. }) => {}
        Err(Error::NotAPowerCircuit(n)) => {
            return Err(Error::NotAPowerCircuit(original_of(&map, n)))
        }
        Err(other) => return Err(other),
    }
    let result = reduce(&sub, std::slice::from_ref(&diff)).map_err(|e| match e {
        // report closure-local node ids in terms of the original circuit
        Error::NotAPowerCircuit(n) => Error::NotAPowerCircuit(original_of(&map, n)),
        other => other,
    })?;
    let top = result.markings[0].support().next_back();
    Ok(match top {
        None => Ordering::Equal,
        Some((_, s)) if s > 0 => Ordering::Greater,
        Some(_) => Ordering::Less,
    })
}

fn original_of(map: &[Option<NodeId>], sub_id: NodeId) -> NodeId {
    map.iter()
        .position(|&m| m == Some(sub_id))
        .map(|i| NodeId(i as u32))
        .unwrap_or(sub_id)
}

/// Sign of eps(m).
pub fn sign(pc: &PowerCircuit, m: &Marking) -> Result<Ordering> {
    compare(pc, m, &Marking::new())
}

/// Checked variant of `x * 2^y`: unless the caller asserts it, the
/// exponent marking is verified non-negative by reduction-based comparison
/// (the exact evaluation oracle would not scale).
pub fn marking_mul_pow2(
    pc: &PowerCircuit,
    k: &Marking,
    l: &Marking,
    exponent_known_nonneg: bool,
) -> Result<(PowerCircuit, Marking)> {
    if !exponent_known_nonneg && sign(pc, l)? == Ordering::Less {
        return Err(Error::NegativeExponent);
    }
    Ok(pc.marking_mul_pow2_unchecked(k, l))
}
