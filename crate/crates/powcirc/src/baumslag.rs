//! The Baumslag group as an HNN extension of BS(1,2) = Z[1/2] x| Z, with
//! Britton reduction over power-circuit-compressed coefficients.
//!
//! Elements of BS(1,2) are pairs (r, m) with r dyadic and m an integer,
//! multiplied by (r, m) (s, n) = (r + 2^m s, m + n). A word alternates
//! such pairs with stable letters b, b^-1; Britton's lemma decides
//! triviality once no factor b (q, 0) b^-1 or b^-1 (0, k) b remains.
//!
//! Reduction of a long word proceeds bottom-up over a balanced binary
//! merge tree. Merging two Britton-reduced words scans the seam for the
//! longest cancelling stretch; whether position i still cancels depends
//! only on letters within distance three of the seam, evaluated with the
//! dyadic marking operations.

use std::cmp::Ordering;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::dyadic::{self, PcDyadic};
use crate::error::{Error, Result};
use crate::par;
use crate::pc::{Marking, PowerCircuit};
use crate::reduce;

/// A stable letter: `b` or its inverse.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Beta {
    B,
    BInv,
}

impl Beta {
    pub fn inverse(self) -> Self {
        match self {
            Beta::B => Beta::BInv,
            Beta::BInv => Beta::B,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Beta::B => 'b',
            Beta::BInv => 'B',
        }
    }
}

/// A BS(1,2) coefficient inside a shared circuit: dyadic mantissa/exponent
/// markings for `r` plus an integer marking for `m`.
#[derive(Clone, Debug, Default)]
pub(crate) struct BsVal {
    pub(crate) u: Marking,
    pub(crate) e: Marking,
    pub(crate) m: Marking,
}

impl BsVal {
    fn identity() -> Self {
        Self::default()
    }

    fn markings(&self) -> [&Marking; 3] {
        [&self.u, &self.e, &self.m]
    }

    fn remap(&self, map: &[Option<crate::pc::NodeId>]) -> Self {
        Self {
            u: PowerCircuit::remap_marking(map, &self.u),
            e: PowerCircuit::remap_marking(map, &self.e),
            m: PowerCircuit::remap_marking(map, &self.m),
        }
    }

    fn offset(&self, by: u32) -> Self {
        Self {
            u: PowerCircuit::offset_marking(&self.u, by),
            e: PowerCircuit::offset_marking(&self.e, by),
            m: PowerCircuit::offset_marking(&self.m, by),
        }
    }
}

/// (r, m) (s, n) = (r + 2^m s, m + n), appended onto `pc`.
fn bs_mul_in(pc: &mut PowerCircuit, x: &BsVal, y: &BsVal) -> Result<BsVal> {
    let (su, se) = dyadic::shift(pc, &y.u, &y.e, &x.m);
    let (u, e) = dyadic::add(pc, (&x.u, &x.e), (&su, &se))?;
    let m = pc.append_marking_add(&x.m, &y.m);
    Ok(BsVal { u, e, m })
}

/// (r, m)^-1 = (-r * 2^-m, -m).
fn bs_inv_in(pc: &mut PowerCircuit, x: &BsVal) -> Result<BsVal> {
    let neg_m = x.m.negated();
    let (u, e) = dyadic::shift(pc, &x.u.negated(), &x.e, &neg_m);
    Ok(BsVal { u, e, m: neg_m })
}

fn is_zero_dyadic(pc: &PowerCircuit, v: &BsVal) -> Result<bool> {
    if v.u.is_empty() {
        return Ok(true);
    }
    Ok(dyadic::sign(pc, &v.u)? == Ordering::Equal)
}

fn is_integer_dyadic(pc: &mut PowerCircuit, u: &Marking, e: &Marking) -> Result<bool> {
    if u.is_empty() {
        return Ok(true);
    }
    Ok(reduce::sign(pc, e)? != Ordering::Less)
}

fn marking_is_zero(pc: &PowerCircuit, m: &Marking) -> Result<bool> {
    Ok(reduce::sign(pc, m)? == Ordering::Equal)
}

/// A BS(1,2) element owning its circuit.
#[derive(Clone, Debug)]
pub struct BsPair {
    circuit: PowerCircuit,
    val: BsVal,
}

impl BsPair {
    pub fn identity() -> Self {
        Self {
            circuit: PowerCircuit::new(),
            val: BsVal::identity(),
        }
    }

    /// The generator a = (1, 0).
    pub fn generator_a(inverse: bool) -> Self {
        let mut circuit = PowerCircuit::new();
        let one = circuit.add_node([]).unwrap();
        let sign = if inverse { -1 } else { 1 };
        let u = Marking::from_pairs([(one, sign)]).unwrap();
        Self {
            circuit,
            val: BsVal {
                u,
                e: Marking::new(),
                m: Marking::new(),
            },
        }
    }

    /// The generator t = (0, 1).
    pub fn generator_t(inverse: bool) -> Self {
        let mut circuit = PowerCircuit::new();
        let one = circuit.add_node([]).unwrap();
        let sign = if inverse { -1 } else { 1 };
        let m = Marking::from_pairs([(one, sign)]).unwrap();
        Self {
            circuit,
            val: BsVal {
                u: Marking::new(),
                e: Marking::new(),
                m,
            },
        }
    }

    pub fn circuit(&self) -> &PowerCircuit {
        &self.circuit
    }

    pub fn dyadic(&self) -> PcDyadic {
        PcDyadic::from_parts(self.circuit.clone(), self.val.u.clone(), self.val.e.clone())
    }

    pub fn integer_marking(&self) -> &Marking {
        &self.val.m
    }

    /// Exact product over the disjoint union of the operand circuits.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        let (mut circuit, offset) = self.circuit.disjoint_union(&other.circuit);
        let y = other.val.offset(offset);
        let val = bs_mul_in(&mut circuit, &self.val, &y)?;
        Ok(Self { circuit, val })
    }

    pub fn inv(&self) -> Result<Self> {
        let mut circuit = self.circuit.clone();
        let val = bs_inv_in(&mut circuit, &self.val)?;
        Ok(Self { circuit, val })
    }

    pub fn is_identity(&self) -> Result<bool> {
        Ok(is_zero_dyadic(&self.circuit, &self.val)?
            && marking_is_zero(&self.circuit, &self.val.m)?)
    }

    /// Exact ((mantissa, exponent), m) values; test and oracle use only.
    pub fn value_exact(&self, budget_bits: u64) -> Result<((BigInt, BigInt), BigInt)> {
        Ok((
            (
                self.circuit.eval_exact(&self.val.u, budget_bits)?,
                self.circuit.eval_exact(&self.val.e, budget_bits)?,
            ),
            self.circuit.eval_exact(&self.val.m, budget_bits)?,
        ))
    }
}

/// One letter of a Britton word.
#[derive(Clone, Debug)]
enum Item {
    Bs(BsVal),
    Beta(Beta),
}

/// Owned letter view used by the serialization layer.
#[derive(Clone, Debug)]
pub(crate) enum RawLetter {
    Beta(Beta),
    Bs { u: Marking, e: Marking, m: Marking },
}

/// An alternating word over BS(1,2) and the stable letters, sharing one
/// circuit. The item list always starts and ends with a BS(1,2) letter
/// (possibly the identity), so it has odd length.
#[derive(Clone, Debug)]
pub struct BrittonWord {
    circuit: PowerCircuit,
    items: Vec<Item>,
    reduced: bool,
}

impl BrittonWord {
    pub fn identity() -> Self {
        Self {
            circuit: PowerCircuit::new(),
            items: vec![Item::Bs(BsVal::identity())],
            reduced: true,
        }
    }

    fn from_beta(beta: Beta) -> Self {
        Self {
            circuit: PowerCircuit::new(),
            items: vec![
                Item::Bs(BsVal::identity()),
                Item::Beta(beta),
                Item::Bs(BsVal::identity()),
            ],
            reduced: true,
        }
    }

    pub fn circuit(&self) -> &PowerCircuit {
        &self.circuit
    }

    /// Number of stable letters.
    pub fn beta_count(&self) -> usize {
        self.items.len() / 2
    }

    pub fn is_reduced_certified(&self) -> bool {
        self.reduced
    }

    /// The j-th stable letter from the left, 1-based.
    pub fn beta_from_left(&self, j: usize) -> Beta {
        match self.items[2 * j - 1] {
            Item::Beta(b) => b,
            Item::Bs(_) => unreachable!("odd positions hold stable letters"),
        }
    }

    fn bs_at(&self, idx: usize) -> &BsVal {
        match &self.items[idx] {
            Item::Bs(v) => v,
            Item::Beta(_) => unreachable!("even positions hold BS letters"),
        }
    }

    /// The j-th BS(1,2) letter from the left, 0-based, as a value with its
    /// own circuit.
    pub fn bs_from_left(&self, j: usize) -> BsPair {
        BsPair {
            circuit: self.circuit.clone(),
            val: self.bs_at(2 * j).clone(),
        }
    }

    /// If the word has no stable letter, its BS(1,2) value.
    pub fn as_bs_pair(&self) -> Option<BsPair> {
        if self.items.len() == 1 {
            Some(self.bs_from_left(0))
        } else {
            None
        }
    }

    /// Letter-level parse with adjacent BS letters multiplied out;
    /// lowercase a, b, t are generators, uppercase their inverses, and '1'
    /// is dropped. The result is not certified Britton-reduced.
    ///
    /// Runs of generators are multiplied on their own small circuits and
    /// assembled into the shared circuit at the end, keeping the cost
    /// linear in the word length.
    pub fn parse(word: &str) -> Result<Self> {
        enum Part {
            Bs(BsPair),
            Beta(Beta),
        }
        let mut parts: Vec<Part> = Vec::new();
        let mut pending: Option<BsPair> = None;
        for ch in word.chars() {
            match ch {
                '1' => {}
                'b' | 'B' => {
                    let beta = if ch == 'b' { Beta::B } else { Beta::BInv };
                    parts.push(Part::Bs(pending.take().unwrap_or_else(BsPair::identity)));
                    parts.push(Part::Beta(beta));
                }
                'a' | 'A' | 't' | 'T' => {
                    let letter = match ch {
                        'a' => BsPair::generator_a(false),
                        'A' => BsPair::generator_a(true),
                        't' => BsPair::generator_t(false),
                        'T' => BsPair::generator_t(true),
                        _ => unreachable!(),
                    };
                    pending = Some(match pending.take() {
                        None => letter,
                        Some(acc) => acc.mul(&letter)?,
                    });
                }
                other => return Err(Error::BadLetter(other)),
            }
        }
        parts.push(Part::Bs(pending.take().unwrap_or_else(BsPair::identity)));

        let mut circuit = PowerCircuit::new();
        let mut items = Vec::with_capacity(parts.len());
        for part in parts {
            items.push(match part {
                Part::Beta(b) => Item::Beta(b),
                Part::Bs(pair) => {
                    let offset = circuit.append_disjoint(&pair.circuit);
                    Item::Bs(pair.val.offset(offset))
                }
            });
        }
        let mut out = Self {
            circuit,
            items,
            reduced: false,
        };
        out.collect_garbage();
        Ok(out)
    }

    pub(crate) fn raw_letters(&self) -> impl Iterator<Item = RawLetter> + '_ {
        self.items.iter().map(|item| match item {
            Item::Beta(b) => RawLetter::Beta(*b),
            Item::Bs(v) => RawLetter::Bs {
                u: v.u.clone(),
                e: v.e.clone(),
                m: v.m.clone(),
            },
        })
    }

    /// Rebuilds a word from serialized letters; the sequence must already
    /// alternate BS letters with stable letters and start and end with a
    /// BS letter. The result is not certified Britton-reduced.
    pub(crate) fn from_raw(circuit: PowerCircuit, letters: Vec<RawLetter>) -> Result<Self> {
        let mut items = Vec::with_capacity(letters.len());
        for (i, letter) in letters.into_iter().enumerate() {
            let item = match letter {
                RawLetter::Beta(b) => {
                    if i % 2 == 0 {
                        return Err(Error::Malformed(
                            "stable letters belong at odd positions".into(),
                        ));
                    }
                    Item::Beta(b)
                }
                RawLetter::Bs { u, e, m } => {
                    if i % 2 == 1 {
                        return Err(Error::Malformed(
                            "BS letters belong at even positions".into(),
                        ));
                    }
                    for marking in [&u, &e, &m] {
                        for (node, _) in marking.support() {
                            if !circuit.contains(node) {
                                return Err(Error::UnknownNode(node));
                            }
                        }
                    }
                    Item::Bs(BsVal { u, e, m })
                }
            };
            items.push(item);
        }
        if items.is_empty() {
            return Ok(Self::identity());
        }
        if items.len() % 2 == 0 {
            return Err(Error::Malformed(
                "words must start and end with a BS letter".into(),
            ));
        }
        Ok(Self {
            circuit,
            items,
            reduced: false,
        })
    }

    /// Drops nodes not reachable from any letter's markings and renumbers.
    fn collect_garbage(&mut self) {
        let mut keep: Vec<&Marking> = Vec::new();
        for item in &self.items {
            if let Item::Bs(v) = item {
                keep.extend(v.markings());
            }
        }
        let (circuit, map) = self.circuit.retain_closure(&keep);
        for item in &mut self.items {
            if let Item::Bs(v) = item {
                *v = v.remap(&map);
            }
        }
        self.circuit = circuit;
    }

    /// Checks the defining property directly: no factor b (q, 0) b^-1 or
    /// b^-1 (0, k) b. Certifies the flag on success.
    pub fn verify_reduced(&mut self) -> Result<bool> {
        let mut pc = self.circuit.clone();
        for j in 1..self.beta_count() {
            let left = self.beta_from_left(j);
            let right = self.beta_from_left(j + 1);
            if right != left.inverse() {
                continue;
            }
            let mid = self.bs_at(2 * j).clone();
            let pinches = match left {
                Beta::B => {
                    marking_is_zero(&pc, &mid.m)?
                        && is_integer_dyadic(&mut pc, &mid.u, &mid.e)?
                }
                Beta::BInv => is_zero_dyadic(&pc, &mid)?,
            };
            if pinches {
                return Ok(false);
            }
        }
        self.reduced = true;
        Ok(true)
    }

    /// Britton-reduced merge of two Britton-reduced words; see [`Seam`].
    pub fn merge(&self, other: &Self) -> Result<Self> {
        if !self.reduced || !other.reduced {
            return Err(Error::NotBrittonReduced);
        }
        let mut seam = Seam::new(self, other);
        let bound = seam.u_bs.len().min(seam.v_bs.len()) - 1;
        let mut i0 = 0;
        while i0 < bound && seam.pinch_test_internal(i0 + 1)? {
            i0 += 1;
        }
        let qk = seam.qk_of_level(i0)?;
        let mut circuit = seam.circuit;
        let left = bs_mul_in(&mut circuit, &seam.u_bs[i0], &qk)?;
        let middle = bs_mul_in(&mut circuit, &left, &seam.v_bs[i0])?;

        let u_items = &self.items[..self.items.len() - (2 * i0 + 1)];
        let v_items = &other.items[(2 * i0 + 1)..];
        let mut items: Vec<Item> = Vec::with_capacity(u_items.len() + v_items.len() + 1);
        items.extend_from_slice(u_items);
        let offset = seam.v_offset;
        if let Some(Item::Bs(_)) = items.last() {
            unreachable!("prefix ends with a stable letter");
        }
        items.push(Item::Bs(middle));
        for item in v_items {
            items.push(match item {
                Item::Bs(v) => Item::Bs(v.offset(offset)),
                Item::Beta(b) => Item::Beta(*b),
            });
        }
        let mut out = Self {
            circuit,
            items,
            reduced: true,
        };
        out.collect_garbage();
        Ok(out)
    }

    /// Britton reduction by balanced binary merging of the letters.
    pub fn reduce(&self) -> Result<Self> {
        let mut leaves: Vec<BrittonWord> = Vec::new();
        for item in &self.items {
            match item {
                Item::Bs(v) => {
                    if v.u.is_empty() && v.e.is_empty() && v.m.is_empty() {
                        continue; // identity letters add nothing
                    }
                    let (sub, map) = self
                        .circuit
                        .retain_closure_sparse(&[&v.u, &v.e, &v.m]);
                    let remap = |m: &Marking| -> Marking {
                        Marking::from_pairs(
                            m.support().map(|(n, s)| (map[&(n.index() as u32)], s)),
                        )
                        .expect("signs preserved")
                    };
                    leaves.push(BrittonWord {
                        circuit: sub,
                        items: vec![Item::Bs(BsVal {
                            u: remap(&v.u),
                            e: remap(&v.e),
                            m: remap(&v.m),
                        })],
                        reduced: true,
                    });
                }
                Item::Beta(b) => leaves.push(BrittonWord::from_beta(*b)),
            }
        }
        merge_balanced(&leaves)
    }
}

fn merge_balanced(leaves: &[BrittonWord]) -> Result<BrittonWord> {
    match leaves.len() {
        0 => Ok(BrittonWord::identity()),
        1 => Ok(leaves[0].clone()),
        // small subtrees stay on one thread; forking per letter costs more
        // than the merges themselves
        n if n <= 1024 => {
            let l = merge_balanced(&leaves[..n / 2])?;
            let r = merge_balanced(&leaves[n / 2..])?;
            l.merge(&r)
        }
        n => {
            let (l, r) = par::join(
                || merge_balanced(&leaves[..n / 2]),
                || merge_balanced(&leaves[n / 2..]),
            );
            l?.merge(&r?)
        }
    }
}

/// Scratch state for testing and resolving pinches at the seam of a
/// product u * v of Britton-reduced words: `u_bs[j]`/`u_beta[j]` address
/// u's letters from the right, `v_bs[j]`/`v_beta[j]` v's from the left.
pub struct Seam {
    circuit: PowerCircuit,
    v_offset: u32,
    u_bs: Vec<BsVal>,
    u_beta: Vec<Beta>, // u_beta[j] valid for j >= 1
    v_bs: Vec<BsVal>,
    v_beta: Vec<Beta>,
}

impl Seam {
    pub fn new(u: &BrittonWord, v: &BrittonWord) -> Self {
        let (circuit, v_offset) = u.circuit.disjoint_union(&v.circuit);
        let h = u.beta_count();
        let ell = v.beta_count();
        let u_bs = (0..=h)
            .map(|j| u.bs_at(u.items.len() - 1 - 2 * j).clone())
            .collect();
        let mut u_beta = vec![Beta::B];
        u_beta.extend((1..=h).map(|j| match u.items[u.items.len() - 2 * j] {
            Item::Beta(b) => b,
            Item::Bs(_) => unreachable!(),
        }));
        let v_bs = (0..=ell).map(|j| v.bs_at(2 * j).offset(v_offset)).collect();
        let mut v_beta = vec![Beta::B];
        v_beta.extend((1..=ell).map(|j| v.beta_from_left(j)));
        Self {
            circuit,
            v_offset,
            u_bs,
            u_beta,
            v_bs,
            v_beta,
        }
    }

    /// The value (q, k) of the cancelled inner word uv[i-1, i-1], which
    /// must already be certified to lie in BS(1,2).
    ///
    /// Only letters at distance at most three from the seam enter: the
    /// resolved-form column of the condition table gives the value
    /// directly except in the b, b^-1 row, which recurses exactly one
    /// more level (the nested row then starts with b^-1 and closes).
    pub fn pinch_qk(&mut self, i: usize) -> Result<BsPair> {
        let val = self.qk_of_level(i.checked_sub(1).expect("positions are 1-based"))?;
        Ok(BsPair {
            circuit: self.circuit.clone(),
            val,
        })
    }

    fn qk_of_level(&mut self, j: usize) -> Result<BsVal> {
        if j == 0 {
            return Ok(BsVal::identity());
        }
        if j == 1 {
            let p = bs_mul_in(&mut self.circuit, &self.u_bs[0].clone(), &self.v_bs[0].clone())?;
            return match self.u_beta[1] {
                Beta::B => {
                    // b (q, 0) b^-1 = (0, q)
                    let m = dyadic::to_integer_marking(&mut self.circuit, &p.u, &p.e)?;
                    Ok(BsVal {
                        u: Marking::new(),
                        e: Marking::new(),
                        m,
                    })
                }
                Beta::BInv => {
                    // b^-1 (0, k) b = (k, 0)
                    let (u, e) = dyadic::normalize(&mut self.circuit, &p.m)?;
                    Ok(BsVal {
                        u,
                        e,
                        m: Marking::new(),
                    })
                }
            };
        }
        let (r, s) = (self.u_bs[j - 1].clone(), self.v_bs[j - 1].clone());
        match (self.u_beta[j], self.u_beta[j - 1]) {
            (Beta::B, Beta::B) => {
                // (0, r + 2^-n s): the condition m + n + k = 0 folded the
                // inner exponent away
                let neg_n = s.m.negated();
                let (su, se) = dyadic::shift(&mut self.circuit, &s.u, &s.e, &neg_n);
                let (yu, ye) = dyadic::add(&mut self.circuit, (&r.u, &r.e), (&su, &se))?;
                let m = dyadic::to_integer_marking(&mut self.circuit, &yu, &ye)?;
                Ok(BsVal {
                    u: Marking::new(),
                    e: Marking::new(),
                    m,
                })
            }
            (Beta::BInv, Beta::B) => {
                // (n + log(-r / s), 0); Britton-reducedness of the inputs
                // guarantees nonzero mantissas here
                assert!(
                    !r.u.is_empty() && !s.u.is_empty(),
                    "zero mantissa in a b^-1..b pinch contradicts Britton-reducedness"
                );
                let log = dyadic::log2_quotient(
                    &mut self.circuit,
                    (&r.u.negated(), &r.e),
                    (&s.u, &s.e),
                )?;
                let q_int = self.circuit.append_marking_add(&s.m, &log);
                let (u, e) = dyadic::normalize(&mut self.circuit, &q_int)?;
                Ok(BsVal {
                    u,
                    e,
                    m: Marking::new(),
                })
            }
            (Beta::BInv, Beta::BInv) => {
                // (m + n, 0)
                let q_int = self.circuit.append_marking_add(&r.m, &s.m);
                let (u, e) = dyadic::normalize(&mut self.circuit, &q_int)?;
                Ok(BsVal {
                    u,
                    e,
                    m: Marking::new(),
                })
            }
            (Beta::B, Beta::BInv) => {
                // (0, r + 2^m (q' + s)) with q' from one more level down
                let inner = self.inner_q(j - 1)?;
                let (qu, qe) = dyadic::add(&mut self.circuit, (&inner.0, &inner.1), (&s.u, &s.e))?;
                let (su, se) = dyadic::shift(&mut self.circuit, &qu, &qe, &r.m);
                let (yu, ye) = dyadic::add(&mut self.circuit, (&r.u, &r.e), (&su, &se))?;
                let m = dyadic::to_integer_marking(&mut self.circuit, &yu, &ye)?;
                Ok(BsVal {
                    u: Marking::new(),
                    e: Marking::new(),
                    m,
                })
            }
        }
    }

    /// First component q' of the value of uv[j, j] when u_beta[j] = b^-1
    /// (so the second component is zero).
    fn inner_q(&mut self, j: usize) -> Result<(Marking, Marking)> {
        debug_assert_eq!(self.u_beta[j], Beta::BInv);
        if j == 1 {
            let p = bs_mul_in(&mut self.circuit, &self.u_bs[0].clone(), &self.v_bs[0].clone())?;
            let (u, e) = dyadic::normalize(&mut self.circuit, &p.m)?;
            return Ok((u, e));
        }
        let (r, s) = (self.u_bs[j - 1].clone(), self.v_bs[j - 1].clone());
        match self.u_beta[j - 1] {
            Beta::B => {
                assert!(
                    !r.u.is_empty() && !s.u.is_empty(),
                    "zero mantissa in a b^-1..b pinch contradicts Britton-reducedness"
                );
                let log = dyadic::log2_quotient(
                    &mut self.circuit,
                    (&r.u.negated(), &r.e),
                    (&s.u, &s.e),
                )?;
                let q_int = self.circuit.append_marking_add(&s.m, &log);
                let (u, e) = dyadic::normalize(&mut self.circuit, &q_int)?;
                Ok((u, e))
            }
            Beta::BInv => {
                let q_int = self.circuit.append_marking_add(&r.m, &s.m);
                let (u, e) = dyadic::normalize(&mut self.circuit, &q_int)?;
                Ok((u, e))
            }
        }
    }

    /// Whether uv[i, i] still lies in BS(1,2), given the level below is
    /// certified. Checked with the condition column of the pinch table.
    pub fn pinch_test(&mut self, i: usize) -> Result<bool> {
        if i == 0 || i >= self.u_bs.len() || i >= self.v_bs.len() {
            return Ok(false);
        }
        self.pinch_test_internal(i)
    }

    fn pinch_test_internal(&mut self, i: usize) -> Result<bool> {
        if self.u_beta[i] != self.v_beta[i].inverse() {
            return Ok(false);
        }
        let qk = self.qk_of_level(i - 1)?;
        let (r, s) = (self.u_bs[i - 1].clone(), self.v_bs[i - 1].clone());
        // inner value is (0, k) after a b, and (q, 0) after a b^-1 (at the
        // base both components vanish, so either shape applies)
        let inner_is_flip = i >= 2 && self.u_beta[i - 1] == Beta::B;
        let (y_u, y_e, z) = if inner_is_flip {
            // y = r + 2^(m + k) s, z = m + n + k
            let shift_by = self.circuit.append_marking_add(&r.m, &qk.m);
            let (su, se) = dyadic::shift(&mut self.circuit, &s.u, &s.e, &shift_by);
            let (yu, ye) = dyadic::add(&mut self.circuit, (&r.u, &r.e), (&su, &se))?;
            let mn = self.circuit.append_marking_add(&r.m, &s.m);
            let z = self.circuit.append_marking_add(&mn, &qk.m);
            (yu, ye, z)
        } else {
            // y = r + 2^m (q + s), z = m + n
            let (qu, qe) = dyadic::add(&mut self.circuit, (&qk.u, &qk.e), (&s.u, &s.e))?;
            let (su, se) = dyadic::shift(&mut self.circuit, &qu, &qe, &r.m);
            let (yu, ye) = dyadic::add(&mut self.circuit, (&r.u, &r.e), (&su, &se))?;
            let z = self.circuit.append_marking_add(&r.m, &s.m);
            (yu, ye, z)
        };
        match self.u_beta[i] {
            Beta::B => Ok(is_integer_dyadic(&mut self.circuit, &y_u, &y_e)?
                && marking_is_zero(&self.circuit, &z)?),
            Beta::BInv => Ok(y_u.is_empty() || reduce::sign(&self.circuit, &y_u)? == Ordering::Equal),
        }
    }
}

/// The word w_n with w_0 = t and w_(n+1) = b w_n a w_n^-1 b^-1; its length
/// is exactly 2^(n+2) - 3 while it equals t^tau(n) in the group.
pub fn tower_word(n: u64) -> Result<String> {
    if n > 24 {
        return Err(Error::TooLarge(n));
    }
    let mut w = String::from("t");
    for _ in 0..n {
        let inv: String = w
            .chars()
            .rev()
            .map(|c| {
                if c.is_ascii_lowercase() {
                    c.to_ascii_uppercase()
                } else {
                    c.to_ascii_lowercase()
                }
            })
            .collect();
        w = format!("b{w}a{inv}B");
    }
    Ok(w)
}

/// Whether `word` represents the identity of the Baumslag group.
pub fn word_problem(word: &str) -> Result<bool> {
    let reduced = BrittonWord::parse(word)?.reduce()?;
    match reduced.as_bs_pair() {
        None => Ok(false), // a stable letter survives Britton reduction
        Some(pair) => pair.is_identity(),
    }
}

// ---------------------------------------------------------------------
// Naive rewriting oracle over exact arbitrary-precision dyadics.
// ---------------------------------------------------------------------

/// Exact dyadic p * 2^e with p odd or zero.
#[derive(Clone, Debug, PartialEq, Eq)]
struct NaiveDyadic {
    p: BigInt,
    e: BigInt,
}

impl NaiveDyadic {
    fn zero() -> Self {
        Self {
            p: BigInt::zero(),
            e: BigInt::zero(),
        }
    }

    fn from_int(k: i64) -> Self {
        Self::normalized(BigInt::from(k), BigInt::zero())
    }

    fn normalized(mut p: BigInt, mut e: BigInt) -> Self {
        if p.is_zero() {
            return Self::zero();
        }
        let tz = p.magnitude().trailing_zeros().unwrap_or(0);
        p >>= tz;
        e += tz;
        Self { p, e }
    }

    fn check(self, budget_bits: u64) -> Result<Self> {
        if self.p.bits() > budget_bits || self.e.magnitude().bits() > budget_bits {
            return Err(Error::BudgetExceeded(budget_bits));
        }
        Ok(self)
    }

    fn add(&self, other: &Self, budget_bits: u64) -> Result<Self> {
        if self.p.is_zero() {
            return Ok(other.clone());
        }
        if other.p.is_zero() {
            return Ok(self.clone());
        }
        let (lo, hi) = if self.e <= other.e {
            (self, other)
        } else {
            (other, self)
        };
        let diff = &hi.e - &lo.e;
        if diff.magnitude().bits() > 64 || diff > BigInt::from(budget_bits) {
            return Err(Error::BudgetExceeded(budget_bits));
        }
        let shift: u64 = diff.try_into().expect("bounded by budget");
        let p = &lo.p + (&hi.p << shift);
        Self::normalized(p, lo.e.clone()).check(budget_bits)
    }

    fn shifted(&self, by: &BigInt, budget_bits: u64) -> Result<Self> {
        if self.p.is_zero() {
            return Ok(Self::zero());
        }
        Self {
            p: self.p.clone(),
            e: &self.e + by,
        }
        .check(budget_bits)
    }

    fn is_integer(&self) -> bool {
        self.p.is_zero() || !self.e.is_negative()
    }

    fn to_integer(&self, budget_bits: u64) -> Result<BigInt> {
        debug_assert!(self.is_integer());
        if self.p.is_zero() {
            return Ok(BigInt::zero());
        }
        if self.e.magnitude().bits() > 64 || self.e > BigInt::from(budget_bits) {
            return Err(Error::BudgetExceeded(budget_bits));
        }
        let shift: u64 = self.e.clone().try_into().expect("bounded by budget");
        Ok(&self.p << shift)
    }
}

#[derive(Clone, Debug)]
enum NaiveLetter {
    Pair(NaiveDyadic, BigInt),
    Beta(Beta),
}

/// Ground-truth word problem by sequential Britton rewriting with exact
/// dyadic arithmetic; errors out when any intermediate exponent leaves the
/// bit budget.
pub fn naive_oracle(word: &str, budget_bits: u64) -> Result<bool> {
    let mut stack: Vec<NaiveLetter> = Vec::new();
    let check_m = |m: &BigInt| -> Result<()> {
        if m.magnitude().bits() > budget_bits {
            return Err(Error::BudgetExceeded(budget_bits));
        }
        Ok(())
    };
    for ch in word.chars() {
        let mut letter = match ch {
            '1' => continue,
            'a' => NaiveLetter::Pair(NaiveDyadic::from_int(1), BigInt::zero()),
            'A' => NaiveLetter::Pair(NaiveDyadic::from_int(-1), BigInt::zero()),
            't' => NaiveLetter::Pair(NaiveDyadic::zero(), BigInt::one()),
            'T' => NaiveLetter::Pair(NaiveDyadic::zero(), -BigInt::one()),
            'b' => NaiveLetter::Beta(Beta::B),
            'B' => NaiveLetter::Beta(Beta::BInv),
            other => return Err(Error::BadLetter(other)),
        };
        loop {
            match (&letter, stack.last()) {
                (NaiveLetter::Pair(s, n), Some(NaiveLetter::Pair(r, m))) => {
                    // (r, m)(s, n) = (r + 2^m s, m + n)
                    let r2 = r.add(&s.shifted(m, budget_bits)?, budget_bits)?;
                    let m2 = m + n;
                    check_m(&m2)?;
                    stack.pop();
                    letter = NaiveLetter::Pair(r2, m2);
                }
                // adjacent stable letters carry an implicit identity pair
                (NaiveLetter::Beta(_), None | Some(NaiveLetter::Beta(_))) => {
                    stack.push(NaiveLetter::Pair(NaiveDyadic::zero(), BigInt::zero()));
                }
                (NaiveLetter::Beta(beta), Some(NaiveLetter::Pair(r, m))) => {
                    let below = stack.len().checked_sub(2).map(|i| &stack[i]);
                    let Some(NaiveLetter::Beta(opening)) = below else {
                        break;
                    };
                    if *opening != beta.inverse() {
                        break;
                    }
                    let rewritten = match beta {
                        // b (q, 0) b^-1 = (0, q)
                        Beta::BInv if m.is_zero() && r.is_integer() => {
                            let q = r.to_integer(budget_bits)?;
                            NaiveLetter::Pair(NaiveDyadic::zero(), q)
                        }
                        // b^-1 (0, k) b = (k, 0)
                        Beta::B if r.p.is_zero() => NaiveLetter::Pair(
                            NaiveDyadic::normalized(m.clone(), BigInt::zero())
                                .check(budget_bits)?,
                            BigInt::zero(),
                        ),
                        _ => break,
                    };
                    stack.pop();
                    stack.pop();
                    letter = rewritten;
                }
                _ => break,
            }
        }
        stack.push(letter);
    }
    Ok(match stack.as_slice() {
        [] => true,
        [NaiveLetter::Pair(r, m)] => r.p.is_zero() && m.is_zero(),
        _ => false,
    })
}
