//! Rewrites a pair of sifo CQs into the shape `T(x̄, f(z̄)) <- B`,
//! `T(x̄, f'(z̄)) <- B'` with identical, duplicate-free tuples, or refutes
//! oid-equivalence on the way.
//!
//! Only the second query is renamed; the first is at most deduplicated.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::eval::{oid_count, MvQuery};
use crate::model::{
    fresh_symbol, frozen, tagged, Atom, ConjunctiveQuery, Instance, SifoQuery, Symbol, Var, VarMap,
};
use crate::oracle::{duplication_instance, multiplication_instance, separates_oid};

/// The check that failed when normalization refutes a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailedCheck {
    /// No bijection `σ : X → X'` with `σ(x̄) = x̄'`.
    DistinguishedPattern,
    /// `X ∩ Z ≠ X ∩ Z'`.
    DistinguishedCreation,
    /// `|Z − X| ≠ |Z' − X|`.
    CreationCardinality,
    /// The function terms sit at different head positions.
    FunctionPosition,
}

impl FailedCheck {
    pub fn as_str(&self) -> &'static str {
        match self {
            FailedCheck::DistinguishedPattern => "distinguished-pattern",
            FailedCheck::DistinguishedCreation => "distinguished-creation",
            FailedCheck::CreationCardinality => "creation-cardinality",
            FailedCheck::FunctionPosition => "function-position",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NormalizeRefutation {
    pub failed_check: FailedCheck,
    /// An instance on which the two results are not oid-isomorphic.
    pub counterexample: Option<Instance>,
    pub detail: String,
}

/// How the second query was rewritten.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct RenamingRecord {
    /// `σ : X → X'`, positional.
    pub sigma: VarMap,
    /// Variables of `Q'` moved to fresh names to avoid capture.
    pub freshened: VarMap,
    /// Non-distinguished creation variables of `Q'` renamed onto those of `Q`.
    pub creation: VarMap,
    /// The reordered `z̄'` lists the old positions `creation_order[i]`.
    pub creation_order: Vec<usize>,
}

/// A pair with `x̄ = x̄'` and `z̄ = z̄'`, `z̄` duplicate-free.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NormalizedPair {
    pub q: SifoQuery,
    pub q_prime: SifoQuery,
    pub x: BTreeSet<Var>,
    pub z: BTreeSet<Var>,
    pub renaming: RenamingRecord,
}

impl NormalizedPair {
    /// `Z − X`
    pub fn free_creation(&self) -> BTreeSet<Var> {
        self.z.difference(&self.x).cloned().collect()
    }

    fn fresh_pred(&self, base: &str) -> Symbol {
        let taken: BTreeSet<Symbol> = self
            .q
            .body()
            .iter()
            .chain(self.q_prime.body())
            .map(|a| a.pred.clone())
            .collect();
        fresh_symbol(&format!("{}_{base}", self.q.head_predicate()), &taken)
    }

    /// `T̂(x̄, π(z̄)) <- B` for a permutation `π` of `Z − X` (identity
    /// elsewhere).
    pub fn flattened_q(&self, pi: &VarMap) -> ConjunctiveQuery {
        let pred = self.fresh_pred("hat");
        let head = Atom::new(
            pred,
            self.q
                .distinguished()
                .iter()
                .cloned()
                .chain(pi.apply_tuple(self.q.creation())),
        );
        ConjunctiveQuery::new(head, self.q.body().iter().cloned()).expect("valid flattening")
    }

    /// `T̂(x̄, z̄) <- B'`
    pub fn flattened_q_prime(&self) -> ConjunctiveQuery {
        let pred = self.fresh_pred("hat");
        let head = Atom::new(
            pred,
            self.q_prime
                .distinguished()
                .iter()
                .chain(self.q_prime.creation())
                .cloned(),
        );
        ConjunctiveQuery::new(head, self.q_prime.body().iter().cloned()).expect("valid flattening")
    }

    /// `(T₀(x̄) <- B, Z − X)` and `(T₀(x̄) <- B', Z − X)`.
    pub fn mv_queries(&self) -> (MvQuery, MvQuery) {
        let pred = self.fresh_pred("0");
        let m = self.free_creation();
        let build = |q: &SifoQuery| {
            let core = ConjunctiveQuery::new(
                Atom::new(pred.clone(), q.distinguished().iter().cloned()),
                q.body().iter().cloned(),
            )
            .expect("valid core");
            MvQuery::new(core, m.clone()).expect("creation variables outside the head")
        };
        (build(&self.q), build(&self.q_prime))
    }
}

/// Outcome of the normalization pipeline.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
#[allow(clippy::large_enum_variant)]
pub enum Normalization {
    Normal(NormalizedPair),
    Refuted(NormalizeRefutation),
}

/// Hands out names `v_1`, `v_2`, … from one counter, avoiding every name
/// already in use.
struct Freshener {
    taken: BTreeSet<Var>,
    counter: usize,
    log: VarMap,
}

impl Freshener {
    fn new(q: &SifoQuery, qp: &SifoQuery) -> Self {
        Freshener {
            taken: q.vars().union(&qp.vars()).cloned().collect(),
            counter: 0,
            log: VarMap::new(),
        }
    }

    fn fresh(&mut self, v: &Var) -> Var {
        loop {
            self.counter += 1;
            let cand = Var::new(format!("{v}_{}", self.counter));
            if self.taken.insert(cand.clone()) {
                self.log.insert(v.clone(), cand.clone());
                return cand;
            }
        }
    }

    /// Applies the injective `mapping` to `q`, first moving out of the way
    /// every unmapped variable whose name is a target of `mapping`.
    fn rename_apart(&mut self, q: &SifoQuery, mapping: &VarMap) -> SifoQuery {
        let targets: BTreeSet<Var> = mapping.iter().map(|(_, t)| t.clone()).collect();
        let mut full = VarMap::new();
        for v in q.vars() {
            let image = match mapping.get(&v) {
                Some(t) => t.clone(),
                None if targets.contains(&v) => self.fresh(&v),
                None => v.clone(),
            };
            full.insert(v, image);
        }
        q.rename(&full)
            .expect("injective renaming keeps the query valid")
    }
}

fn check_heads(q: &SifoQuery, qp: &SifoQuery) -> Result<()> {
    if q.head_predicate() != qp.head_predicate() {
        return Err(Error::HeadMismatch(
            q.head_predicate().to_string(),
            qp.head_predicate().to_string(),
        ));
    }
    if q.head_arity() != qp.head_arity() {
        return Err(Error::HeadArityMismatch(q.head_arity(), qp.head_arity()));
    }
    Ok(())
}

/// Drops repeated creation variables, keeping first occurrences, and
/// renames the function symbol when anything was dropped.
pub fn dedupe_creation_vars(q: &SifoQuery) -> SifoQuery {
    let mut seen = BTreeSet::new();
    let unique: Vec<Var> = q
        .creation()
        .iter()
        .filter(|v| seen.insert((*v).clone()))
        .cloned()
        .collect();
    if unique.len() == q.creation().len() {
        return q.clone();
    }
    let mut taken: BTreeSet<Symbol> = q.body().iter().map(|a| a.pred.clone()).collect();
    taken.insert(q.head_predicate().clone());
    taken.insert(q.function().clone());
    let func = fresh_symbol(&format!("{}_{}", q.function(), unique.len()), &taken);
    q.with_function(func, unique)
        .expect("same variables, still valid")
}

/// `σ = {(x₁, x'₁), …}` when it is a bijection `X → X'`.
pub fn positional_sigma(x: &[Var], xp: &[Var]) -> Option<VarMap> {
    let mut sigma = VarMap::new();
    let mut back = VarMap::new();
    for (a, b) in x.iter().zip(xp) {
        if sigma
            .insert(a.clone(), b.clone())
            .is_some_and(|prev| &prev != b)
        {
            return None;
        }
        if back
            .insert(b.clone(), a.clone())
            .is_some_and(|prev| &prev != a)
        {
            return None;
        }
    }
    Some(sigma)
}

fn first_separating(q: &SifoQuery, qp: &SifoQuery, candidates: Vec<Instance>) -> Option<Instance> {
    candidates.into_iter().find(|i| separates_oid(q, qp, i))
}

fn align_distinguished_with(
    q: &SifoQuery,
    qp: &SifoQuery,
    fr: &mut Freshener,
) -> std::result::Result<(SifoQuery, VarMap), NormalizeRefutation> {
    let Some(sigma) = positional_sigma(q.distinguished(), qp.distinguished()) else {
        let counterexample = first_separating(
            q,
            qp,
            vec![
                crate::model::freeze(q.body()),
                crate::model::freeze(qp.body()),
            ],
        );
        return Err(NormalizeRefutation {
            failed_check: FailedCheck::DistinguishedPattern,
            counterexample,
            detail: format!(
                "no bijection maps ({}) onto ({}) position by position",
                join(q.distinguished()),
                join(qp.distinguished())
            ),
        });
    };
    let inverse = sigma.inverse().expect("checked bijective");
    let renamed = fr.rename_apart(qp, &inverse);
    Ok((renamed, sigma))
}

/// Renames the distinguished variables of `Q'` onto those of `Q`.
pub fn align_distinguished(
    q: &SifoQuery,
    qp: &SifoQuery,
) -> Result<std::result::Result<(SifoQuery, VarMap), NormalizeRefutation>> {
    check_heads(q, qp)?;
    Ok(align_distinguished_with(q, qp, &mut Freshener::new(q, qp)))
}

fn join(vs: &[Var]) -> String {
    vs.iter().map(Var::as_str).collect::<Vec<_>>().join(",")
}

/// Largest multiplication instance tried when explaining a cardinality
/// mismatch.
const MULTIPLICATION_FACTS: usize = 50_000;

/// Compares `X ∩ Z` with `X ∩ Z'` and `|Z − X|` with `|Z' − X|`; expects
/// aligned distinguished tuples and duplicate-free creation tuples.
pub fn check_creation_profile(
    q: &SifoQuery,
    qp: &SifoQuery,
) -> std::result::Result<(), NormalizeRefutation> {
    let x = q.distinguished_set();
    let z = q.creation_set();
    let zp = qp.creation_set();
    let xz: BTreeSet<Var> = x.intersection(&z).cloned().collect();
    let xzp: BTreeSet<Var> = x.intersection(&zp).cloned().collect();
    if xz != xzp {
        let v = xz
            .symmetric_difference(&xzp)
            .next()
            .expect("sets differ")
            .clone();
        // Duplicate v in the body of the query that does not create with it.
        let source = if zp.contains(&v) { q } else { qp };
        let inst = duplication_instance(source.body(), &v);
        debug_assert!(separates_oid(q, qp, &inst));
        return Err(NormalizeRefutation {
            failed_check: FailedCheck::DistinguishedCreation,
            counterexample: Some(inst),
            detail: format!(
                "distinguished creation variables differ: {{{}}} vs {{{}}}",
                join(&xz.into_iter().collect::<Vec<_>>()),
                join(&xzp.into_iter().collect::<Vec<_>>())
            ),
        });
    }
    let free: BTreeSet<Var> = z.difference(&x).cloned().collect();
    let freep: BTreeSet<Var> = zp.difference(&x).cloned().collect();
    if free.len() != freep.len() {
        let (larger, vars) = if free.len() > freep.len() {
            (q, &free)
        } else {
            (qp, &freep)
        };
        let tuple: Vec<_> = q.distinguished().iter().map(frozen).collect();
        let counterexample = (2..=6)
            .map_while(|n| multiplication_instance(larger.body(), vars, n, MULTIPLICATION_FACTS))
            .find(|i| oid_count(q, i, &tuple) != oid_count(qp, i, &tuple));
        return Err(NormalizeRefutation {
            failed_check: FailedCheck::CreationCardinality,
            counterexample,
            detail: format!(
                "{} vs {} non-distinguished creation variables",
                free.len(),
                freep.len()
            ),
        });
    }
    Ok(())
}

fn align_creation_with(
    q: &SifoQuery,
    qp: &SifoQuery,
    sigma: VarMap,
    fr: &mut Freshener,
) -> NormalizedPair {
    let x = q.distinguished_set();
    let z = q.creation();
    let zp = qp.creation();
    let mut order = Vec::with_capacity(z.len());
    let mut free_positions = (0..zp.len()).filter(|&j| !x.contains(&zp[j]));
    for v in z {
        let j = if x.contains(v) {
            zp.iter()
                .position(|w| w == v)
                .expect("same distinguished creation variables")
        } else {
            free_positions
                .next()
                .expect("same number of free creation variables")
        };
        order.push(j);
    }
    let creation: VarMap = z
        .iter()
        .zip(&order)
        .filter(|(v, _)| !x.contains(*v))
        .map(|(v, &j)| (zp[j].clone(), v.clone()))
        .collect();
    let renamed = fr.rename_apart(qp, &creation);
    let q_prime = SifoQuery::new(
        renamed.head_predicate().clone(),
        renamed.distinguished().to_vec(),
        renamed.function().clone(),
        z.to_vec(),
        renamed.function_position(),
        renamed.body().iter().cloned(),
    )
    .expect("renamed creation variables occur in the body");
    NormalizedPair {
        q: q.clone(),
        q_prime,
        x,
        z: q.creation_set(),
        renaming: RenamingRecord {
            sigma,
            freshened: fr.log.clone(),
            creation: creation
                .iter()
                .filter(|(a, b)| a != b)
                .map(|(a, b)| (a.clone(), b.clone()))
                .collect(),
            creation_order: order,
        },
    }
}

/// Reorders `z̄'` to put shared distinguished variables where `z̄` has them
/// and renames the remaining creation variables of `Q'` positionally onto
/// those of `Q`.
pub fn align_creation(q: &SifoQuery, qp: &SifoQuery) -> NormalizedPair {
    let sigma = VarMap::identity(q.distinguished());
    align_creation_with(q, qp, sigma, &mut Freshener::new(q, qp))
}

/// `freeze(B) ∪ freeze(B')` with the variables of `B'` kept apart.
pub(crate) fn disjoint_frozen_union(q: &SifoQuery, qp: &SifoQuery) -> Instance {
    let apart: VarMap = qp
        .vars()
        .into_iter()
        .map(|v| {
            let c = tagged(&v, "'");
            (v, c)
        })
        .collect();
    let mut inst = crate::model::freeze(q.body());
    for f in crate::model::freeze(&apart.apply_all(qp.body())).iter() {
        inst.insert_unchecked(f.clone());
    }
    inst
}

/// The full pipeline: deduplicate, compare function positions, align
/// distinguished variables, compare creation profiles, align creation
/// variables.
pub fn normalize(q: &SifoQuery, qp: &SifoQuery) -> Result<Normalization> {
    check_heads(q, qp)?;
    let q1 = dedupe_creation_vars(q);
    let qp1 = dedupe_creation_vars(qp);
    if q1.function_position() != qp1.function_position() {
        let inst = disjoint_frozen_union(&q1, &qp1);
        debug_assert!(separates_oid(&q1, &qp1, &inst));
        return Ok(Normalization::Refuted(NormalizeRefutation {
            failed_check: FailedCheck::FunctionPosition,
            counterexample: Some(inst),
            detail: format!(
                "function term at position {} vs {}",
                q1.function_position(),
                qp1.function_position()
            ),
        }));
    }
    let mut fr = Freshener::new(&q1, &qp1);
    let (qp2, sigma) = match align_distinguished_with(&q1, &qp1, &mut fr) {
        Ok(r) => r,
        Err(e) => return Ok(Normalization::Refuted(e)),
    };
    if let Err(e) = check_creation_profile(&q1, &qp2) {
        return Ok(Normalization::Refuted(e));
    }
    Ok(Normalization::Normal(align_creation_with(
        &q1, &qp2, sigma, &mut fr,
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::eval_ocq;
    use crate::parser::{parse_instance, parse_rule};

    fn rule(s: &str) -> SifoQuery {
        parse_rule(s).unwrap()
    }

    fn normal(q: &str, qp: &str) -> NormalizedPair {
        match normalize(&rule(q), &rule(qp)).unwrap() {
            Normalization::Normal(p) => p,
            Normalization::Refuted(r) => panic!("refuted: {r:?}"),
        }
    }

    fn refuted(q: &str, qp: &str) -> NormalizeRefutation {
        match normalize(&rule(q), &rule(qp)).unwrap() {
            Normalization::Refuted(r) => r,
            Normalization::Normal(p) => panic!("normalized: {p:?}"),
        }
    }

    #[test]
    fn dedupe() {
        let q = rule("Family(c,g(x,y,x)) <- Mother(c,x), Father(c,y).");
        let d = dedupe_creation_vars(&q);
        assert_eq!(
            d.to_string(),
            "Family(c,g_2(x,y)) <- Father(c,y), Mother(c,x)."
        );
        let i = parse_instance("Mother(a,b). Father(a,c). Mother(d,b). Father(d,b).").unwrap();
        assert!(!separates_oid(&q, &d, &i));
        let q = rule("T(x,f(x,y)) <- R(x,y).");
        assert_eq!(dedupe_creation_vars(&q), q);
        let q = rule("T(x,f(z,z,z)) <- R(x,z).");
        assert_eq!(dedupe_creation_vars(&q).creation(), &[Var::new("z")]);
    }

    #[test]
    fn sigma() {
        let v = |s: &[&str]| s.iter().map(Var::new).collect::<Vec<_>>();
        assert!(positional_sigma(&v(&["x", "x"]), &v(&["x", "y"])).is_none());
        assert!(positional_sigma(&v(&["x", "y"]), &v(&["x", "x"])).is_none());
        let s = positional_sigma(&v(&["u", "v"]), &v(&["p", "q"])).unwrap();
        assert_eq!(s.to_string(), "{u->p, v->q}");
    }

    #[test]
    fn align_renames_distinguished() {
        let (qp, sigma) = align_distinguished(
            &rule("T(u,v,f(u)) <- R(u,v)."),
            &rule("T(p,q,f(p)) <- R(p,q)."),
        )
        .unwrap()
        .unwrap();
        assert_eq!(sigma.to_string(), "{u->p, v->q}");
        assert_eq!(qp.to_string(), "T(u,v,f(u)) <- R(u,v).");
        let r = align_distinguished(
            &rule("T(x,x,f(x)) <- R(x)."),
            &rule("T(x,y,f(x)) <- S(x,y)."),
        )
        .unwrap()
        .unwrap_err();
        assert_eq!(r.failed_check, FailedCheck::DistinguishedPattern);
        assert!(r.counterexample.is_some());
    }

    #[test]
    fn capture_avoided() {
        // Q' uses `x` as a non-distinguished variable while its
        // distinguished `a` must become `x`.
        let p = normal("T(x,f(y)) <- R(x,y).", "T(a,f(x)) <- R(a,x).");
        assert_eq!(p.q_prime.to_string(), "T(x,f(y)) <- R(x,y).");
        let p = normal("T(x,f(y)) <- R(x,y), S(y).", "T(a,f(b)) <- R(a,b), S(x).");
        assert_eq!(p.q_prime.distinguished(), &[Var::new("x")]);
        assert!(!p
            .q_prime
            .body()
            .iter()
            .any(|a| a.pred.as_str() == "S" && a.args[0] == Var::new("x")));
    }

    #[test]
    fn family_profile_ok() {
        let p = normal(
            "Family(c,f(x,y)) <- Mother(c,x), Father(c,y).",
            "Family(c,g(x,y,x)) <- Mother(c,x), Father(c,y).",
        );
        assert_eq!(p.q.creation(), p.q_prime.creation());
        assert_eq!(p.free_creation().len(), 2);
    }

    #[test]
    fn distinguished_creation_refuted() {
        let r = refuted("T(x,f(y)) <- R(x,y,z).", "T(x,f(x,y)) <- R(x,y,z).");
        assert_eq!(r.failed_check, FailedCheck::DistinguishedCreation);
        let i = r.counterexample.unwrap();
        assert_eq!(i.len(), 2);
        let q = rule("T(x,f(y)) <- R(x,y,z).");
        let qp = rule("T(x,f(x,y)) <- R(x,y,z).");
        assert_eq!(eval_ocq(&q, &i).oids().len(), 1);
        assert_eq!(eval_ocq(&qp, &i).oids().len(), 2);
    }

    #[test]
    fn creation_cardinality_refuted() {
        let r = refuted("T(x,f(x)) <- R(x,y,z).", "T(x,f(x,y,z)) <- R(x,y,z).");
        assert_eq!(r.failed_check, FailedCheck::CreationCardinality);
        let i = r.counterexample.unwrap();
        assert!(separates_oid(
            &rule("T(x,f(x)) <- R(x,y,z)."),
            &rule("T(x,f(x,y,z)) <- R(x,y,z)."),
            &i
        ));
    }

    #[test]
    fn function_position_refuted() {
        let r = refuted("T(x,f(y)) <- R(x,y).", "T(f(y),x) <- R(x,y).");
        assert_eq!(r.failed_check, FailedCheck::FunctionPosition);
        assert!(separates_oid(
            &rule("T(x,f(y)) <- R(x,y)."),
            &rule("T(f(y),x) <- R(x,y)."),
            &r.counterexample.unwrap()
        ));
    }

    #[test]
    fn creation_alignment() {
        let q = rule("T(x,f(u,x)) <- R(x,u).");
        let qp = rule("T(x,g(x,w)) <- R(x,w).");
        let p = align_creation(&q, &qp);
        assert_eq!(p.renaming.creation_order, vec![1, 0]);
        assert_eq!(p.q_prime.to_string(), "T(x,g(u,x)) <- R(x,u).");
        let i = parse_instance("R(a,b). R(a,c). R(b,b).").unwrap();
        assert!(!separates_oid(&qp, &p.q_prime, &i));
    }

    #[test]
    fn head_errors() {
        assert!(matches!(
            normalize(&rule("T(x,f(y)) <- R(x,y)."), &rule("U(x,f(y)) <- R(x,y).")),
            Err(Error::HeadMismatch(..))
        ));
        assert!(matches!(
            normalize(
                &rule("T(x,f(y)) <- R(x,y)."),
                &rule("T(x,y,f(y)) <- R(x,y).")
            ),
            Err(Error::HeadArityMismatch(2, 3))
        ));
    }
}
