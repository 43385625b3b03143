//! Constrained homomorphism search between sets of atoms.
//!
//! One backtracking engine serves CQ containment and equivalence, multiset
//! homomorphisms, and the homomorphism enumeration behind the entailment
//! test. Variables are assigned one at a time: pre-assigned and
//! image-restricted variables first, then by descending number of
//! occurrences. Candidate images are tried in lexicographic order, so the
//! first solution is deterministic.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet};
use std::ops::ControlFlow;

use crate::error::{Error, Result};
use crate::eval::MvQuery;
use crate::model::{vars_of, Atom, ConjunctiveQuery, Homomorphism, Var, VarMap};

/// Extra requirements on a homomorphism.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HomConstraint {
    /// Pre-assigned images.
    pub fixed: BTreeMap<Var, Var>,
    /// Variables that must receive pairwise distinct images.
    pub injective_on: BTreeSet<Var>,
    /// Allowed images per variable.
    pub image_in: BTreeMap<Var, BTreeSet<Var>>,
}

impl HomConstraint {
    pub fn none() -> Self {
        Self::default()
    }

    /// Pins `src[i] ↦ dst[i]` for every position; `None` when some variable
    /// would need two different images.
    pub fn pin_tuple(mut self, src: &[Var], dst: &[Var]) -> Option<Self> {
        assert_eq!(src.len(), dst.len());
        for (s, d) in src.iter().zip(dst) {
            match self.fixed.get(s) {
                Some(prev) if prev != d => return None,
                _ => {
                    self.fixed.insert(s.clone(), d.clone());
                }
            }
        }
        Some(self)
    }
}

/// Whether `h(src) ⊆ dst` with `h` defined on all of `var(src)`.
pub fn is_homomorphism(h: &VarMap, src: &BTreeSet<Atom>, dst: &BTreeSet<Atom>) -> bool {
    src.iter()
        .all(|a| a.args.iter().all(|v| h.get(v).is_some()) && dst.contains(&h.apply(a)))
}

struct Search<'a> {
    order: Vec<Var>,
    candidates: Vec<Vec<Var>>,
    injective: Vec<bool>,
    /// Atoms of the source, as slot indices into `order`.
    atoms: Vec<(&'a Atom, Vec<usize>)>,
    /// For each depth, the atoms whose last-assigned slot is that depth.
    closing: Vec<Vec<usize>>,
    /// For each depth, the atoms touched at that depth but not yet complete.
    partial: Vec<Vec<usize>>,
    dst: &'a BTreeSet<Atom>,
    dst_by_pred: BTreeMap<(&'a str, usize), Vec<&'a Atom>>,
}

impl<'a> Search<'a> {
    fn new(src: &'a BTreeSet<Atom>, dst: &'a BTreeSet<Atom>, c: &HomConstraint) -> Option<Self> {
        let mut dst_by_pred: BTreeMap<(&str, usize), Vec<&Atom>> = BTreeMap::new();
        for a in dst {
            dst_by_pred
                .entry((a.pred.as_str(), a.arity()))
                .or_default()
                .push(a);
        }

        let mut occurrences: BTreeMap<&Var, usize> = BTreeMap::new();
        let mut cands: BTreeMap<&Var, Option<BTreeSet<&Var>>> = BTreeMap::new();
        for a in src {
            let targets = dst_by_pred
                .get(&(a.pred.as_str(), a.arity()))
                .map(Vec::as_slice)
                .unwrap_or(&[]);
            for (pos, v) in a.args.iter().enumerate() {
                *occurrences.entry(v).or_default() += 1;
                let here: BTreeSet<&Var> = targets.iter().map(|t| &t.args[pos]).collect();
                let slot = cands.entry(v).or_insert(None);
                *slot = Some(match slot.take() {
                    None => here,
                    Some(prev) => prev.intersection(&here).copied().collect(),
                });
            }
        }

        let mut order: Vec<&Var> = occurrences.keys().copied().collect();
        order.sort_by_key(|v| {
            (
                !c.fixed.contains_key(*v),
                !c.image_in.contains_key(*v),
                Reverse(occurrences[*v]),
                *v,
            )
        });

        let mut candidates = Vec::with_capacity(order.len());
        for v in &order {
            let mut cs: Vec<Var> = cands[v]
                .as_ref()
                .map(|s| s.iter().map(|x| (*x).clone()).collect())
                .unwrap_or_default();
            if let Some(f) = c.fixed.get(*v) {
                cs.retain(|x| x == f);
            }
            if let Some(allowed) = c.image_in.get(*v) {
                cs.retain(|x| allowed.contains(x));
            }
            if cs.is_empty() {
                return None;
            }
            candidates.push(cs);
        }

        let slot_of: BTreeMap<&Var, usize> =
            order.iter().enumerate().map(|(i, v)| (*v, i)).collect();
        let atoms: Vec<(&Atom, Vec<usize>)> = src
            .iter()
            .map(|a| (a, a.args.iter().map(|v| slot_of[v]).collect()))
            .collect();
        let mut closing = vec![Vec::new(); order.len()];
        let mut partial = vec![Vec::new(); order.len()];
        for (i, (_, slots)) in atoms.iter().enumerate() {
            if let Some(&last) = slots.iter().max() {
                closing[last].push(i);
                let mut touched: Vec<usize> = slots.clone();
                touched.sort_unstable();
                touched.dedup();
                for &s in &touched {
                    if s != last {
                        partial[s].push(i);
                    }
                }
            }
        }
        let injective = order.iter().map(|v| c.injective_on.contains(*v)).collect();
        Some(Search {
            order: order.into_iter().cloned().collect(),
            candidates,
            injective,
            atoms,
            closing,
            partial,
            dst,
            dst_by_pred,
        })
    }

    fn atom_ok(&self, idx: usize, assigned: &[Option<Var>], complete: bool) -> bool {
        let (atom, slots) = &self.atoms[idx];
        if complete {
            let image = Atom {
                pred: atom.pred.clone(),
                args: slots
                    .iter()
                    .map(|&s| assigned[s].clone().expect("assigned"))
                    .collect(),
            };
            return self.dst.contains(&image);
        }
        self.dst_by_pred
            .get(&(atom.pred.as_str(), atom.arity()))
            .is_some_and(|targets| {
                targets.iter().any(|t| {
                    slots
                        .iter()
                        .zip(&t.args)
                        .all(|(&s, tv)| assigned[s].as_ref().is_none_or(|a| a == tv))
                })
            })
    }

    fn run(&self, visit: &mut dyn FnMut(&Homomorphism) -> ControlFlow<()>) -> ControlFlow<()> {
        let mut assigned: Vec<Option<Var>> = vec![None; self.order.len()];
        let mut used: BTreeSet<Var> = BTreeSet::new();
        self.go(0, &mut assigned, &mut used, visit)
    }

    fn go(
        &self,
        depth: usize,
        assigned: &mut Vec<Option<Var>>,
        used: &mut BTreeSet<Var>,
        visit: &mut dyn FnMut(&Homomorphism) -> ControlFlow<()>,
    ) -> ControlFlow<()> {
        if depth == self.order.len() {
            let h: VarMap = self
                .order
                .iter()
                .cloned()
                .zip(assigned.iter().map(|a| a.clone().expect("assigned")))
                .collect();
            return visit(&h);
        }
        for cand in &self.candidates[depth] {
            if self.injective[depth] && used.contains(cand) {
                continue;
            }
            assigned[depth] = Some(cand.clone());
            let ok = self.closing[depth]
                .iter()
                .all(|&i| self.atom_ok(i, assigned, true))
                && self.partial[depth]
                    .iter()
                    .all(|&i| self.atom_ok(i, assigned, false));
            if ok {
                if self.injective[depth] {
                    used.insert(cand.clone());
                }
                let flow = self.go(depth + 1, assigned, used, visit);
                if self.injective[depth] {
                    used.remove(cand);
                }
                flow?;
            }
        }
        assigned[depth] = None;
        ControlFlow::Continue(())
    }
}

/// Visits every homomorphism `src → dst` satisfying `c`, in canonical order,
/// until `visit` breaks.
pub fn for_each_homomorphism(
    src: &BTreeSet<Atom>,
    dst: &BTreeSet<Atom>,
    c: &HomConstraint,
    mut visit: impl FnMut(&Homomorphism) -> ControlFlow<()>,
) {
    let src_vars = vars_of(src);
    if c.fixed.keys().any(|v| !src_vars.contains(v)) {
        // A pinned variable outside the source cannot be honoured.
        return;
    }
    if let Some(search) = Search::new(src, dst, c) {
        let _ = search.run(&mut visit);
    }
}

/// The first homomorphism in canonical search order, if any.
pub fn find_homomorphism(
    src: &BTreeSet<Atom>,
    dst: &BTreeSet<Atom>,
    c: &HomConstraint,
) -> Option<Homomorphism> {
    let mut found = None;
    for_each_homomorphism(src, dst, c, |h| {
        found = Some(h.clone());
        ControlFlow::Break(())
    });
    found
}

fn check_heads(qa: &ConjunctiveQuery, qb: &ConjunctiveQuery) -> Result<()> {
    if qa.head().pred != qb.head().pred || qa.head().arity() != qb.head().arity() {
        return Err(Error::HeadMismatch(
            qa.head().to_string(),
            qb.head().to_string(),
        ));
    }
    Ok(())
}

/// A homomorphism `qa → qb`; one exists iff `qb` is contained in `qa`.
pub fn cq_contained(qa: &ConjunctiveQuery, qb: &ConjunctiveQuery) -> Result<Option<Homomorphism>> {
    check_heads(qa, qb)?;
    let Some(c) = HomConstraint::none().pin_tuple(&qa.head().args, &qb.head().args) else {
        return Ok(None);
    };
    Ok(find_homomorphism(qa.body(), qb.body(), &c))
}

/// Homomorphisms in both directions, if the queries are equivalent.
pub fn cq_equivalent(
    qa: &ConjunctiveQuery,
    qb: &ConjunctiveQuery,
) -> Result<Option<(Homomorphism, Homomorphism)>> {
    let Some(fwd) = cq_contained(qa, qb)? else {
        return Ok(None);
    };
    Ok(cq_contained(qb, qa)?.map(|bwd| (fwd, bwd)))
}

/// A homomorphism of the cores that is injective on the multiset variables
/// of `qa` and maps them into those of `qb`.
pub fn mv_homomorphism(qa: &MvQuery, qb: &MvQuery) -> Result<Option<Homomorphism>> {
    check_heads(qa.core(), qb.core())?;
    let Some(mut c) =
        HomConstraint::none().pin_tuple(&qa.core().head().args, &qb.core().head().args)
    else {
        return Ok(None);
    };
    c.injective_on = qa.multiset_vars().clone();
    for m in qa.multiset_vars() {
        c.image_in.insert(m.clone(), qb.multiset_vars().clone());
    }
    Ok(find_homomorphism(qa.core().body(), qb.core().body(), &c))
}
