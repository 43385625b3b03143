//! Oid-equivalence of sifo CQs.
//!
//! After normalization, two characterizations are checked: multiset
//! homomorphisms in both directions between the MV queries `(T₀(x̄) <- B,
//! Z − X)` and `(T₀(x̄) <- B', Z − X)`, and CQ-equivalence of the
//! flattenings up to a permutation of `Z − X`. The witness reported is
//! built from the multiset homomorphisms.

use std::collections::BTreeSet;

use itertools::Itertools;
use serde::{Serialize, Serializer};

use crate::error::Result;
use crate::hom::{cq_equivalent, mv_homomorphism};
use crate::model::{Homomorphism, Instance, SifoQuery, Var, VarMap};
use crate::normalize::{normalize, FailedCheck, Normalization, NormalizedPair};
use crate::oracle::{
    minimize_oid_counterexample, search_counterexample_oid, separates_oid, SearchConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EquivVerdict {
    Equivalent,
    NotEquivalent,
}

/// Where a pair was refuted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RefutationStage {
    Normalization(FailedCheck),
    /// Normalized, but no homomorphism witnesses exist.
    Characterization,
}

impl RefutationStage {
    pub fn as_str(&self) -> &'static str {
        match self {
            RefutationStage::Normalization(l) => l.as_str(),
            RefutationStage::Characterization => "no-homomorphism-witness",
        }
    }
}

impl Serialize for RefutationStage {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EquivRefutation {
    pub stage: RefutationStage,
    pub counterexample: Option<Instance>,
    pub detail: String,
}

/// Certificates for an equivalence, all over the normalized pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EquivWitness {
    /// Permutation of `Z − X` with `T̂(x̄, π(z̄)) <- B` equivalent to
    /// `T̂(x̄, z̄) <- B'`.
    pub pi: VarMap,
    pub h_forward: Homomorphism,
    pub h_backward: Homomorphism,
    pub mv_forward: Homomorphism,
    pub mv_backward: Homomorphism,
    pub normalized: NormalizedPair,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EquivDecision {
    pub verdict: EquivVerdict,
    pub witness: Option<EquivWitness>,
    pub refutation: Option<EquivRefutation>,
}

impl EquivDecision {
    pub fn equivalent(&self) -> bool {
        self.verdict == EquivVerdict::Equivalent
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EquivOptions {
    /// Permutations are enumerated only while `|Z − X|` stays within this
    /// bound.
    pub max_permutation_vars: usize,
    /// Run the permutation path next to the multiset path and assert they
    /// agree.
    pub dual_check: bool,
    /// Look for a counterexample when no witnesses exist.
    pub search: Option<SearchConfig>,
    pub minimize: bool,
}

impl Default for EquivOptions {
    fn default() -> Self {
        EquivOptions {
            max_permutation_vars: 8,
            dual_check: true,
            search: Some(SearchConfig::default()),
            minimize: true,
        }
    }
}

/// `(π, h, h')` with `h : T̂(x̄, π(z̄)) <- B → T̂(x̄, z̄) <- B'` and `h'` back,
/// trying permutations of `Z − X` in lexicographic order.
pub fn equiv_via_permutation(p: &NormalizedPair) -> Option<(VarMap, Homomorphism, Homomorphism)> {
    let free: Vec<Var> = p.free_creation().into_iter().collect();
    let target = p.flattened_q_prime();
    for perm in free.iter().cloned().permutations(free.len()) {
        let pi: VarMap = free.iter().cloned().zip(perm).collect();
        let flat = p.flattened_q(&pi);
        if let Some((f, b)) = cq_equivalent(&flat, &target).expect("same flattened head") {
            return Some((pi, f, b));
        }
    }
    None
}

/// Multiset homomorphisms in both directions between the MV queries.
pub fn equiv_via_mv(p: &NormalizedPair) -> Option<(Homomorphism, Homomorphism)> {
    let (a, b) = p.mv_queries();
    let f = mv_homomorphism(&a, &b).expect("same core head")?;
    let g = mv_homomorphism(&b, &a).expect("same core head")?;
    Some((f, g))
}

/// Builds `(π, h, h'')` from multiset homomorphisms `h` and `h'`:
/// `π = (h|_{Z−X})⁻¹` and `h'' = (h'h)^{m−1} h'` where `(h'h)^m` is the
/// identity on `Z − X`.
pub fn permutation_from_mv(
    p: &NormalizedPair,
    h: &Homomorphism,
    hp: &Homomorphism,
) -> (VarMap, Homomorphism, Homomorphism) {
    let free = p.free_creation();
    let pi = h
        .restrict(&free)
        .inverse()
        .expect("multiset homomorphisms are injective on the multiset variables");
    let cycle = hp.after(h);
    // `power` is cycle^(m-1) while `acc` is cycle^m.
    let mut power = VarMap::identity(&p.q.vars());
    let mut acc = cycle.clone();
    while free.iter().any(|v| &acc.image(v) != v) {
        power = cycle.after(&power);
        acc = cycle.after(&acc);
    }
    (pi, h.clone(), power.after(hp))
}

/// Decides oid-equivalence with default options.
pub fn decide_oid_equiv(q: &SifoQuery, qp: &SifoQuery) -> Result<EquivDecision> {
    decide_oid_equiv_with(q, qp, &EquivOptions::default())
}

pub fn decide_oid_equiv_with(
    q: &SifoQuery,
    qp: &SifoQuery,
    opts: &EquivOptions,
) -> Result<EquivDecision> {
    let pair = match normalize(q, qp)? {
        Normalization::Refuted(r) => {
            let counterexample = match r.counterexample {
                Some(i) if opts.minimize => Some(minimize_oid_counterexample(q, qp, &i)),
                other => other,
            };
            debug_assert!(counterexample
                .as_ref()
                .is_none_or(|i| separates_oid(q, qp, i)));
            return Ok(EquivDecision {
                verdict: EquivVerdict::NotEquivalent,
                witness: None,
                refutation: Some(EquivRefutation {
                    stage: RefutationStage::Normalization(r.failed_check),
                    counterexample,
                    detail: r.detail,
                }),
            });
        }
        Normalization::Normal(p) => p,
    };

    let mv = equiv_via_mv(&pair);
    if opts.dual_check && pair.free_creation().len() <= opts.max_permutation_vars {
        let perm = equiv_via_permutation(&pair);
        assert_eq!(
            mv.is_some(),
            perm.is_some(),
            "multiset and permutation characterizations disagree on {q} vs {qp}"
        );
    }

    match mv {
        Some((f, b)) => {
            let (pi, h_forward, h_backward) = permutation_from_mv(&pair, &f, &b);
            Ok(EquivDecision {
                verdict: EquivVerdict::Equivalent,
                witness: Some(EquivWitness {
                    pi,
                    h_forward,
                    h_backward,
                    mv_forward: f,
                    mv_backward: b,
                    normalized: pair,
                }),
                refutation: None,
            })
        }
        None => {
            let found = opts
                .search
                .and_then(|cfg| search_counterexample_oid(q, qp, &cfg))
                .map(|i| {
                    if opts.minimize {
                        minimize_oid_counterexample(q, qp, &i)
                    } else {
                        i
                    }
                });
            let detail = if found.is_some() {
                "no multiset homomorphisms between the normalized queries".to_string()
            } else {
                "no multiset homomorphisms between the normalized queries; no small counterexample found"
                    .to_string()
            };
            Ok(EquivDecision {
                verdict: EquivVerdict::NotEquivalent,
                witness: None,
                refutation: Some(EquivRefutation {
                    stage: RefutationStage::Characterization,
                    counterexample: found,
                    detail,
                }),
            })
        }
    }
}

/// Variables moved by `pi`.
pub fn moved(pi: &VarMap) -> BTreeSet<Var> {
    pi.iter()
        .filter(|(a, b)| a != b)
        .map(|(a, _)| a.clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hom::is_homomorphism;
    use crate::parser::parse_rule;

    fn rules_pair(a: &str, b: &str) -> (SifoQuery, SifoQuery) {
        (parse_rule(a).unwrap(), parse_rule(b).unwrap())
    }

    fn decide(q: &str, qp: &str) -> EquivDecision {
        let (q, qp) = rules_pair(q, qp);
        decide_oid_equiv(&q, &qp).unwrap()
    }

    fn check_witness(w: &EquivWitness) {
        let p = &w.normalized;
        let flat = p.flattened_q(&w.pi);
        let target = p.flattened_q_prime();
        assert!(is_homomorphism(&w.h_forward, flat.body(), target.body()));
        assert_eq!(w.h_forward.apply(flat.head()), *target.head());
        assert!(is_homomorphism(&w.h_backward, target.body(), flat.body()));
        assert_eq!(w.h_backward.apply(target.head()), *flat.head());
    }

    #[test]
    fn family_pair() {
        let d = decide(
            "Family(c,f(x,y)) <- Mother(c,x), Father(c,y).",
            "Family(c,g(x,y,x)) <- Mother(c,x), Father(c,y).",
        );
        assert!(d.equivalent());
        let w = d.witness.unwrap();
        assert!(moved(&w.pi).is_empty());
        assert_eq!(w.mv_forward, VarMap::identity(&w.normalized.q.vars()));
        check_witness(&w);
    }

    #[test]
    fn self_equivalent() {
        let d = decide("T(x,f(y)) <- R(x,y,z).", "T(x,f(y)) <- R(x,y,z).");
        let w = d.witness.unwrap();
        assert_eq!(w.h_forward, VarMap::identity(&w.normalized.q.vars()));
        assert_eq!(w.h_backward, VarMap::identity(&w.normalized.q.vars()));
    }

    #[test]
    fn swapped_roles_need_permutation() {
        let d = decide(
            "T(x,f(u,v)) <- R(x,u,v), S(u).",
            "T(x,g(u,v)) <- R(x,v,u), S(v).",
        );
        assert!(d.equivalent());
        let w = d.witness.unwrap();
        assert_eq!(moved(&w.pi).len(), 2);
        check_witness(&w);
        let p = &w.normalized;
        let (pi, _, _) = equiv_via_permutation(p).unwrap();
        assert_eq!(moved(&pi).len(), 2);
    }

    #[test]
    fn refutation_stages() {
        let d = decide("T(x,f(y)) <- R(x,y,z).", "T(x,f(x,y)) <- R(x,y,z).");
        let r = d.refutation.unwrap();
        assert_eq!(
            r.stage,
            RefutationStage::Normalization(FailedCheck::DistinguishedCreation)
        );
        assert_eq!(r.counterexample.unwrap().len(), 2);

        let d = decide("T(x,f(x)) <- R(x,y,z).", "T(x,f(x,y,z)) <- R(x,y,z).");
        let r = d.refutation.unwrap();
        assert_eq!(
            r.stage,
            RefutationStage::Normalization(FailedCheck::CreationCardinality)
        );
        assert_eq!(r.counterexample.unwrap().len(), 2);

        let d = decide("T(x,f(y)) <- R(x,y).", "T(x,f(y)) <- R(x,y), R(y,x).");
        let r = d.refutation.unwrap();
        assert_eq!(r.stage, RefutationStage::Characterization);
        let (q, qp) = rules_pair("T(x,f(y)) <- R(x,y).", "T(x,f(y)) <- R(x,y), R(y,x).");
        assert!(separates_oid(&q, &qp, &r.counterexample.unwrap()));
    }

    #[test]
    fn cyclic_witness_backward() {
        // h maps the free creation variables by a 3-cycle.
        let d = decide(
            "T(f(a,b,c)) <- E(a,b), E(b,c), E(c,a).",
            "T(f(a,b,c)) <- E(b,a), E(c,b), E(a,c).",
        );
        assert!(d.equivalent());
        check_witness(&d.witness.unwrap());
    }
}
