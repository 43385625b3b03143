//! Brute-force semantics used to validate the decision procedures and to
//! produce counterexample instances.

use std::collections::{BTreeMap, BTreeSet};

use itertools::Itertools;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::entail::canonical_colored_instance;
use crate::error::{Error, Result};
use crate::eval::{chase, eval_ocq, matchings, pick};
use crate::model::{
    freeze, tagged, Atom, Const, DataTerm, ExtFact, ExtendedInstance, Fact, Instance, SifoQuery,
    Symbol, Var, VarMap,
};

/// A bijection between the oids of two extended instances that, together
/// with the identity on constants, carries the first onto the second.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OidIsomorphism {
    pub mapping: BTreeMap<DataTerm, DataTerm>,
}

impl OidIsomorphism {
    pub fn apply(&self, j: &ExtendedInstance) -> ExtendedInstance {
        j.map_terms(&self.mapping)
    }

    pub fn inverse(&self) -> OidIsomorphism {
        OidIsomorphism {
            mapping: self
                .mapping
                .iter()
                .map(|(a, b)| (b.clone(), a.clone()))
                .collect(),
        }
    }

    /// `other ∘ self`
    pub fn then(&self, other: &OidIsomorphism) -> OidIsomorphism {
        OidIsomorphism {
            mapping: self
                .mapping
                .iter()
                .map(|(a, b)| {
                    (
                        a.clone(),
                        other.mapping.get(b).cloned().unwrap_or_else(|| b.clone()),
                    )
                })
                .collect(),
        }
    }
}

fn oid_positions(f: &ExtFact) -> Vec<usize> {
    f.args
        .iter()
        .enumerate()
        .filter(|(_, t)| t.is_oid())
        .map(|(i, _)| i)
        .collect()
}

/// Per-predicate oid column, when every fact carries at most one oid and the
/// column never varies within a predicate.
fn oid_columns(j: &ExtendedInstance) -> Option<BTreeMap<(Symbol, usize), Option<usize>>> {
    let mut cols: BTreeMap<(Symbol, usize), Option<usize>> = BTreeMap::new();
    for f in j.iter() {
        let pos = oid_positions(f);
        if pos.len() > 1 {
            return None;
        }
        let here = pos.first().copied();
        if let Some(p) = here {
            if let DataTerm::Oid(_, args) = &f.args[p] {
                if args.iter().any(DataTerm::is_oid) {
                    return None;
                }
            }
        }
        let key = (f.pred.clone(), f.arity());
        match cols.get(&key) {
            None => {
                cols.insert(key, here);
            }
            Some(prev) => match (prev, here) {
                (Some(a), Some(b)) if *a != b => return None,
                (None, Some(_)) => {
                    cols.insert(key, here);
                }
                _ => {}
            },
        }
    }
    Some(cols)
}

type Companion = BTreeSet<(Symbol, usize, Vec<DataTerm>)>;

fn split_by_oid(j: &ExtendedInstance) -> (BTreeSet<&ExtFact>, BTreeMap<DataTerm, Companion>) {
    let mut ground = BTreeSet::new();
    let mut companions: BTreeMap<DataTerm, Companion> = BTreeMap::new();
    for f in j.iter() {
        match oid_positions(f).first() {
            None => {
                ground.insert(f);
            }
            Some(&p) => {
                let mut rest = f.args.clone();
                let oid = rest.remove(p);
                companions
                    .entry(oid)
                    .or_default()
                    .insert((f.pred.clone(), p, rest));
            }
        }
    }
    (ground, companions)
}

fn fast_isomorphism(j1: &ExtendedInstance, j2: &ExtendedInstance) -> Option<OidIsomorphism> {
    let (g1, c1) = split_by_oid(j1);
    let (g2, c2) = split_by_oid(j2);
    if g1 != g2 || c1.len() != c2.len() {
        return None;
    }
    let mut by_companion: BTreeMap<&Companion, Vec<&DataTerm>> = BTreeMap::new();
    for (o, c) in &c2 {
        by_companion.entry(c).or_default().push(o);
    }
    for list in by_companion.values_mut() {
        list.reverse();
    }
    let mut mapping = BTreeMap::new();
    for (o, c) in &c1 {
        let target = by_companion.get_mut(c)?.pop()?;
        mapping.insert(o.clone(), target.clone());
    }
    Some(OidIsomorphism { mapping })
}

fn general_isomorphism(j1: &ExtendedInstance, j2: &ExtendedInstance) -> Option<OidIsomorphism> {
    let o1: Vec<DataTerm> = j1.oids().into_iter().collect();
    let o2: Vec<DataTerm> = j2.oids().into_iter().collect();
    if o1.len() != o2.len() {
        return None;
    }
    let ground = |j: &ExtendedInstance| -> BTreeSet<ExtFact> {
        j.iter()
            .filter(|f| oid_positions(f).is_empty())
            .cloned()
            .collect()
    };
    if ground(j1) != ground(j2) {
        return None;
    }

    let signature = |j: &ExtendedInstance, o: &DataTerm| -> Vec<(Symbol, usize, usize)> {
        let mut sig: Vec<_> = j
            .iter()
            .flat_map(|f| {
                f.args
                    .iter()
                    .enumerate()
                    .filter(move |(_, t)| *t == o)
                    .map(move |(i, _)| (f.pred.clone(), f.arity(), i))
            })
            .collect();
        sig.sort();
        sig
    };
    let sig2: Vec<_> = o2.iter().map(|o| signature(j2, o)).collect();
    let mut candidates: Vec<Vec<usize>> = o1
        .iter()
        .map(|o| {
            let s = signature(j1, o);
            (0..o2.len()).filter(|&k| sig2[k] == s).collect()
        })
        .collect();
    if candidates.iter().any(Vec::is_empty) {
        return None;
    }
    let mut order: Vec<usize> = (0..o1.len()).collect();
    order.sort_by_key(|&i| (candidates[i].len(), i));
    let index1: BTreeMap<&DataTerm, usize> = o1.iter().enumerate().map(|(i, o)| (o, i)).collect();
    let facts_of: Vec<Vec<&ExtFact>> = o1
        .iter()
        .map(|o| j1.iter().filter(|f| f.args.contains(o)).collect())
        .collect();
    for c in &mut candidates {
        c.sort();
    }

    struct Ctx<'a> {
        order: Vec<usize>,
        candidates: Vec<Vec<usize>>,
        index1: BTreeMap<&'a DataTerm, usize>,
        facts_of: Vec<Vec<&'a ExtFact>>,
        o2: &'a [DataTerm],
        j2: &'a ExtendedInstance,
    }

    fn go(ctx: &Ctx, depth: usize, assign: &mut Vec<Option<usize>>, used: &mut Vec<bool>) -> bool {
        if depth == ctx.order.len() {
            return true;
        }
        let i = ctx.order[depth];
        for &k in &ctx.candidates[i] {
            if used[k] {
                continue;
            }
            assign[i] = Some(k);
            let consistent = ctx.facts_of[i].iter().all(|f| {
                let mut mapped = Vec::with_capacity(f.args.len());
                for t in &f.args {
                    match ctx.index1.get(t) {
                        None => mapped.push(t.clone()),
                        Some(&idx) => match assign[idx] {
                            None => return true,
                            Some(k2) => mapped.push(ctx.o2[k2].clone()),
                        },
                    }
                }
                ctx.j2.contains(&ExtFact {
                    pred: f.pred.clone(),
                    args: mapped,
                })
            });
            if consistent {
                used[k] = true;
                if go(ctx, depth + 1, assign, used) {
                    return true;
                }
                used[k] = false;
            }
            assign[i] = None;
        }
        false
    }

    let ctx = Ctx {
        order,
        candidates,
        index1,
        facts_of,
        o2: &o2,
        j2,
    };
    let mut assign = vec![None; o1.len()];
    let mut used = vec![false; o2.len()];
    if !go(&ctx, 0, &mut assign, &mut used) {
        return None;
    }
    Some(OidIsomorphism {
        mapping: o1
            .iter()
            .zip(&assign)
            .map(|(o, k)| (o.clone(), o2[k.expect("assigned")].clone()))
            .collect(),
    })
}

fn fast_path_applies(j1: &ExtendedInstance, j2: &ExtendedInstance) -> bool {
    match (oid_columns(j1), oid_columns(j2)) {
        (Some(a), Some(b)) => a.iter().all(|(k, col)| match (col, b.get(k)) {
            (Some(x), Some(Some(y))) => x == y,
            _ => true,
        }),
        _ => false,
    }
}

/// An oid-isomorphism from `j1` to `j2`, if one exists.
pub fn oid_isomorphic(j1: &ExtendedInstance, j2: &ExtendedInstance) -> Option<OidIsomorphism> {
    if j1.len() != j2.len() || j1.consts() != j2.consts() {
        return None;
    }
    let iso = if fast_path_applies(j1, j2) {
        fast_isomorphism(j1, j2)
    } else {
        general_isomorphism(j1, j2)
    }?;
    debug_assert_eq!(&iso.apply(j1), j2);
    assert_eq!(
        j1.consts(),
        j2.consts(),
        "oid-isomorphic instances share their constants"
    );
    Some(iso)
}

/// Backtracking search only, bypassing the companion-set shortcut.
pub fn oid_isomorphic_general(
    j1: &ExtendedInstance,
    j2: &ExtendedInstance,
) -> Option<OidIsomorphism> {
    if j1.len() != j2.len() || j1.consts() != j2.consts() {
        return None;
    }
    general_isomorphism(j1, j2)
}

/// A creation tuple whose required head facts admit no common value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ViolatingGroup {
    pub key: Vec<Const>,
    /// The head facts the matchings of this group demand, with the function
    /// term left symbolic.
    pub required: Vec<ExtFact>,
    /// For each required fact, the values present in the target at the
    /// function position.
    pub candidates: Vec<BTreeSet<Const>>,
}

/// Outcome of checking `(I, J) ⊨ Q`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SatisfactionReport {
    pub satisfied: bool,
    /// The least admissible value of the function on each creation tuple
    /// that arises from a matching; present when satisfied.
    #[serde(serialize_with = "witness_rows")]
    pub witness_table: Option<BTreeMap<Vec<Const>, Const>>,
    pub violating_group: Option<ViolatingGroup>,
}

/// Rows `{args, value}`, since tuple keys have no JSON rendering.
fn witness_rows<S: serde::Serializer>(
    table: &Option<BTreeMap<Vec<Const>, Const>>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    #[derive(Serialize)]
    struct Row<'a> {
        args: &'a [Const],
        value: &'a Const,
    }
    match table {
        None => s.serialize_none(),
        Some(t) => s.collect_seq(t.iter().map(|(k, v)| Row { args: k, value: v })),
    }
}

/// Whether `(I, J)` satisfies the second-order tgd `∃f ∀(B → T(x̄, f(z̄)))`.
pub fn satisfies_sotgd(
    source: &Instance,
    target: &Instance,
    q: &SifoQuery,
) -> Result<SatisfactionReport> {
    let pos = q.function_position();
    let mut by_rest: BTreeMap<Vec<Const>, BTreeSet<Const>> = BTreeMap::new();
    for f in target.iter().filter(|f| &f.pred == q.head_predicate()) {
        if f.arity() != q.head_arity() {
            return Err(Error::ArityMismatch {
                fact: f.to_string(),
                expected: q.head_arity(),
            });
        }
        let mut rest = f.args.clone();
        let v = rest.remove(pos);
        by_rest.entry(rest).or_default().insert(v);
    }

    let m = matchings(q.body(), source);
    let xcols = m.columns(q.distinguished());
    let zcols = m.columns(q.creation());
    let mut groups: BTreeMap<Vec<Const>, BTreeSet<Vec<Const>>> = BTreeMap::new();
    for row in m.rows() {
        groups
            .entry(pick(row, &zcols))
            .or_default()
            .insert(pick(row, &xcols));
    }

    let empty = BTreeSet::new();
    let mut table = BTreeMap::new();
    for (key, xs) in &groups {
        let sets: Vec<&BTreeSet<Const>> = xs
            .iter()
            .map(|x| by_rest.get(x).unwrap_or(&empty))
            .collect();
        let common = sets.iter().skip(1).fold(sets[0].clone(), |acc, s| {
            acc.intersection(s).cloned().collect()
        });
        match common.into_iter().next() {
            Some(v) => {
                table.insert(key.clone(), v);
            }
            None => {
                let oid = DataTerm::Oid(
                    q.function().clone(),
                    key.iter().cloned().map(DataTerm::Const).collect(),
                );
                let required = xs
                    .iter()
                    .map(|x| {
                        let mut args: Vec<DataTerm> =
                            x.iter().cloned().map(DataTerm::Const).collect();
                        args.insert(pos, oid.clone());
                        ExtFact {
                            pred: q.head_predicate().clone(),
                            args,
                        }
                    })
                    .collect();
                return Ok(SatisfactionReport {
                    satisfied: false,
                    witness_table: None,
                    violating_group: Some(ViolatingGroup {
                        key: key.clone(),
                        required,
                        candidates: sets.into_iter().cloned().collect(),
                    }),
                });
            }
        }
    }
    Ok(SatisfactionReport {
        satisfied: true,
        witness_table: Some(table),
        violating_group: None,
    })
}

/// Bounds for counterexample search.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SearchConfig {
    pub max_domain: usize,
    /// Number of random instances tried after the structured candidates.
    pub budget: usize,
    pub seed: u64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig {
            max_domain: 4,
            budget: 2000,
            seed: 0,
        }
    }
}

/// `freeze(B) ∪ freeze(d(B))` where `d` sends `x` to a new copy.
pub fn duplication_instance(body: &BTreeSet<Atom>, x: &Var) -> Instance {
    let d: VarMap = [(x.clone(), tagged(x, 2))].into_iter().collect();
    let mut inst = freeze(body);
    for f in freeze(&d.apply_all(body)).iter() {
        inst.insert_unchecked(f.clone());
    }
    inst
}

/// `⋃_d d̂(B)`: every variable in `vars` is multiplied into `n` copies,
/// independently. `None` if the result would exceed `max_facts`.
pub fn multiplication_instance(
    body: &BTreeSet<Atom>,
    vars: &BTreeSet<Var>,
    n: usize,
    max_facts: usize,
) -> Option<Instance> {
    let vars: Vec<&Var> = vars.iter().collect();
    let combos = n.checked_pow(vars.len() as u32)?;
    if combos.checked_mul(body.len())? > max_facts {
        return None;
    }
    let mut inst = Instance::new();
    for choice in (0..vars.len()).map(|_| 1..=n).multi_cartesian_product() {
        let d: VarMap = vars
            .iter()
            .zip(&choice)
            .map(|(v, i)| ((*v).clone(), tagged(v, i)))
            .collect();
        for f in freeze(&d.apply_all(body)).iter() {
            inst.insert_unchecked(f.clone());
        }
    }
    if vars.is_empty() {
        inst = freeze(body);
    }
    Some(inst)
}

const MULTIPLICATION_CAP: usize = 20_000;

/// The proof-derived candidate instances for a pair: frozen bodies,
/// duplications of each distinguished variable, and multiplications of the
/// non-distinguished creation variables.
fn structured_candidates(q: &SifoQuery, qp: &SifoQuery) -> Vec<Instance> {
    let mut out = vec![freeze(q.body()), freeze(qp.body())];
    for p in [q, qp] {
        for x in p.distinguished_set() {
            out.push(duplication_instance(p.body(), &x));
        }
    }
    for p in [q, qp] {
        let free: BTreeSet<Var> = p
            .creation_set()
            .difference(&p.distinguished_set())
            .cloned()
            .collect();
        if free.is_empty() {
            continue;
        }
        for n in 2..=3 {
            if let Some(i) = multiplication_instance(p.body(), &free, n, MULTIPLICATION_CAP) {
                out.push(i);
            }
        }
    }
    let mut seen = BTreeSet::new();
    out.retain(|i| seen.insert(i.clone()));
    out
}

/// Constants `d1..dN`.
pub fn domain(size: usize) -> Vec<Const> {
    (1..=size).map(|i| Const::new(format!("d{i}"))).collect()
}

fn all_facts(schema: &BTreeMap<Symbol, usize>, dom: &[Const]) -> Vec<Fact> {
    let mut facts = Vec::new();
    for (pred, &arity) in schema {
        for args in (0..arity)
            .map(|_| dom.iter().cloned())
            .multi_cartesian_product()
        {
            facts.push(Fact::new(pred.clone(), args));
        }
        if arity == 0 {
            facts.push(Fact::new(pred.clone(), Vec::new()));
        }
    }
    facts
}

/// Every instance over constants `d1..d{domain_size}` with at most
/// `max_facts` facts, smallest first, each exactly once.
pub fn instance_enumerator(
    schema: &BTreeMap<Symbol, usize>,
    domain_size: usize,
    max_facts: usize,
) -> impl Iterator<Item = Instance> {
    assert!(domain_size >= 1, "domain size must be positive");
    let facts = all_facts(schema, &domain(domain_size));
    let top = max_facts.min(facts.len());
    (0..=top).flat_map(move |k| {
        facts
            .clone()
            .into_iter()
            .combinations(k)
            .map(|fs| {
                let mut inst = Instance::new();
                for f in fs {
                    inst.insert_unchecked(f);
                }
                inst
            })
            .collect::<Vec<_>>()
    })
}

/// A random instance over `d1..d{domain_size}` with between 1 and
/// `max_facts` facts (fewer if duplicates are drawn).
pub fn random_instance(
    schema: &BTreeMap<Symbol, usize>,
    domain_size: usize,
    max_facts: usize,
    rng: &mut impl Rng,
) -> Instance {
    let dom = domain(domain_size.max(1));
    let preds: Vec<(&Symbol, &usize)> = schema.iter().collect();
    let mut inst = Instance::new();
    if preds.is_empty() {
        return inst;
    }
    let n = rng.gen_range(1..=max_facts.max(1));
    for _ in 0..n {
        let (pred, &arity) = preds[rng.gen_range(0..preds.len())];
        let args: Vec<Const> = (0..arity)
            .map(|_| dom.choose(rng).expect("nonempty domain").clone())
            .collect();
        inst.insert_unchecked(Fact::new(pred.clone(), args));
    }
    inst
}

fn pair_schema(q: &SifoQuery, qp: &SifoQuery) -> BTreeMap<Symbol, usize> {
    let mut s = q.schema();
    s.extend(qp.schema());
    s
}

fn random_candidates<'a>(
    schema: BTreeMap<Symbol, usize>,
    cfg: &SearchConfig,
) -> impl Iterator<Item = Instance> + 'a {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let max_domain = cfg.max_domain.max(1);
    let max_facts = 2 * max_domain + 2;
    (0..cfg.budget).map(move |_| {
        let d = rng.gen_range(1..=max_domain);
        random_instance(&schema, d, max_facts, &mut rng)
    })
}

/// Whether `Q(I)` and `Q'(I)` fail to be oid-isomorphic.
pub fn separates_oid(q: &SifoQuery, qp: &SifoQuery, inst: &Instance) -> bool {
    oid_isomorphic(&eval_ocq(q, inst), &eval_ocq(qp, inst)).is_none()
}

/// The first candidate instance on which `Q` and `Q'` give results that are
/// not oid-isomorphic.
pub fn search_counterexample_oid(
    q: &SifoQuery,
    qp: &SifoQuery,
    cfg: &SearchConfig,
) -> Option<Instance> {
    structured_candidates(q, qp)
        .into_iter()
        .chain(random_candidates(pair_schema(q, qp), cfg))
        .find(|i| separates_oid(q, qp, i))
}

/// Whether `(I, chase(Q, I))` violates `Q'`; the chase result is returned
/// when it does.
pub fn entail_violation(q: &SifoQuery, qp: &SifoQuery, inst: &Instance) -> Option<Instance> {
    let target = chase(q, inst).target;
    match satisfies_sotgd(inst, &target, qp) {
        Ok(r) if !r.satisfied => Some(target),
        _ => None,
    }
}

/// A pair `(I, J)` with `(I, J) ⊨ Q` and `(I, J) ⊭ Q'`, if the candidates
/// contain one.
pub fn search_counterexample_entail(
    q: &SifoQuery,
    qp: &SifoQuery,
    cfg: &SearchConfig,
) -> Option<(Instance, Instance)> {
    let colored = canonical_colored_instance(qp, q.function_arity()).instance;
    structured_candidates(q, qp)
        .into_iter()
        .chain(std::iter::once(colored))
        .chain(random_candidates(pair_schema(q, qp), cfg))
        .find_map(|i| entail_violation(q, qp, &i).map(|j| (i, j)))
}

/// Greedily drops facts while `keep` still holds, until no single fact can
/// be removed.
pub fn minimize_instance(inst: &Instance, mut keep: impl FnMut(&Instance) -> bool) -> Instance {
    let mut current = inst.clone();
    loop {
        let mut changed = false;
        let facts: Vec<Fact> = current.iter().cloned().collect();
        for f in facts {
            let mut smaller = current.clone();
            smaller.remove(&f);
            if keep(&smaller) {
                current = smaller;
                changed = true;
            }
        }
        if !changed {
            return current;
        }
    }
}

/// Shrinks an oid counterexample while it still separates the queries.
pub fn minimize_oid_counterexample(q: &SifoQuery, qp: &SifoQuery, inst: &Instance) -> Instance {
    minimize_instance(inst, |i| separates_oid(q, qp, i))
}

/// Shrinks the source of an entailment counterexample and recomputes the
/// target by the chase.
pub fn minimize_entail_counterexample(
    q: &SifoQuery,
    qp: &SifoQuery,
    inst: &Instance,
) -> (Instance, Instance) {
    let small = minimize_instance(inst, |i| entail_violation(q, qp, i).is_some());
    let target = chase(q, &small).target;
    (small, target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_extended_instance, parse_instance, parse_rule};

    const FAMILY_FACTS: &str = "Mother(beth,anne). Mother(ben,anne). Mother(eric,claire).
        Mother(emma,diana). Mother(dave,diana). Father(beth,adam). Father(ben,adam).
        Father(eric,carl). Father(emma,carl).";

    fn family() -> SifoQuery {
        parse_rule("Family(c,f(x,y)) <- Mother(c,x), Father(c,y).").unwrap()
    }

    #[test]
    fn family_isomorphism() {
        let i = parse_instance(FAMILY_FACTS).unwrap();
        let q = family();
        let qp = parse_rule("Family(c,g(x,y,x)) <- Mother(c,x), Father(c,y).").unwrap();
        let iso = oid_isomorphic(&eval_ocq(&q, &i), &eval_ocq(&qp, &i)).unwrap();
        let rendered: Vec<(String, String)> = iso
            .mapping
            .iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();
        assert_eq!(
            rendered,
            vec![
                ("f(anne,adam)".into(), "g(anne,adam,anne)".into()),
                ("f(claire,carl)".into(), "g(claire,carl,claire)".into()),
                ("f(diana,carl)".into(), "g(diana,carl,diana)".into()),
            ]
        );
    }

    #[test]
    fn one_oid_against_two() {
        let i = parse_instance("R(a,b,c). R(d,b,e).").unwrap();
        let q = parse_rule("T(x,f(y)) <- R(x,y,z).").unwrap();
        let qp = parse_rule("T(x,f(x,y)) <- R(x,y,z).").unwrap();
        let (j, jp) = (eval_ocq(&q, &i), eval_ocq(&qp, &i));
        assert_eq!(j.oids().len(), 1);
        assert_eq!(jp.oids().len(), 2);
        assert!(oid_isomorphic(&j, &jp).is_none());
        assert!(oid_isomorphic_general(&j, &jp).is_none());
        assert!(oid_isomorphic(&j, &j)
            .unwrap()
            .mapping
            .iter()
            .all(|(a, b)| a == b));
    }

    #[test]
    fn general_path_handles_two_oids_per_fact() {
        let j1 = parse_extended_instance("E(f(a),f(b)). E(f(b),f(a)). P(f(a),c).").unwrap();
        let j2 = parse_extended_instance("E(g(p),g(q)). E(g(q),g(p)). P(g(q),c).").unwrap();
        let iso = oid_isomorphic(&j1, &j2).unwrap();
        assert_eq!(iso.apply(&j1), j2);
        let j3 = parse_extended_instance("E(g(p),g(q)). E(g(q),g(q)). P(g(q),c).").unwrap();
        assert!(oid_isomorphic(&j1, &j3).is_none());
        let j4 = parse_extended_instance("E(g(p),g(q)). E(g(q),g(p)). P(g(q),d).").unwrap();
        assert!(oid_isomorphic(&j1, &j4).is_none());
    }

    fn satisfy(target: &str) -> SatisfactionReport {
        let i = parse_instance(FAMILY_FACTS).unwrap();
        let j = parse_instance(target).unwrap();
        satisfies_sotgd(&i, &j, &family()).unwrap()
    }

    #[test]
    fn family_targets() {
        let r1 = satisfy(
            "Family(beth,jones). Family(ben,jones). Family(eric,simpson). Family(emma,smith).",
        );
        assert!(r1.satisfied);
        let table: Vec<(String, String)> = r1
            .witness_table
            .unwrap()
            .iter()
            .map(|(k, v)| (k.iter().map(|c| c.to_string()).join(","), v.to_string()))
            .collect();
        assert_eq!(
            table,
            vec![
                ("anne,adam".into(), "jones".into()),
                ("claire,carl".into(), "simpson".into()),
                ("diana,carl".into(), "smith".into()),
            ]
        );
        let r2 = satisfy(
            "Family(beth,jones). Family(ben,jones). Family(eric,jones). Family(emma,jones).",
        );
        assert!(r2.satisfied);
        let r3 = satisfy(
            "Family(beth,jones). Family(ben,murphy). Family(eric,simpson). Family(emma,smith).",
        );
        assert!(!r3.satisfied);
        let g = r3.violating_group.unwrap();
        assert_eq!(g.key, vec![Const::new("anne"), Const::new("adam")]);
        assert_eq!(
            g.required.iter().map(|f| f.to_string()).collect::<Vec<_>>(),
            vec!["Family(ben,f(anne,adam))", "Family(beth,f(anne,adam))"]
        );
    }

    #[test]
    fn satisfaction_arity_error() {
        let i = parse_instance(FAMILY_FACTS).unwrap();
        let j = parse_instance("Family(a,b,c).").unwrap();
        assert!(matches!(
            satisfies_sotgd(&i, &j, &family()),
            Err(Error::ArityMismatch { .. })
        ));
    }

    #[test]
    fn enumerator_counts() {
        let unary: BTreeMap<Symbol, usize> = [(Symbol::new("R"), 1)].into_iter().collect();
        let all: Vec<Instance> = instance_enumerator(&unary, 1, 1).collect();
        assert_eq!(all.len(), 2);
        assert!(all[0].is_empty());
        let binary: BTreeMap<Symbol, usize> = [(Symbol::new("R"), 2)].into_iter().collect();
        let all: Vec<Instance> = instance_enumerator(&binary, 2, 4).collect();
        assert_eq!(all.len(), 16);
        assert_eq!(all.iter().collect::<BTreeSet<_>>().len(), 16);
        assert_eq!(instance_enumerator(&binary, 2, 0).count(), 1);
    }

    #[test]
    fn multiplication_instance_shape() {
        let q = parse_rule("T(x,f(x,y,z)) <- R(x,y,z).").unwrap();
        let free: BTreeSet<Var> = [Var::new("y"), Var::new("z")].into_iter().collect();
        let i = multiplication_instance(q.body(), &free, 2, 100).unwrap();
        assert_eq!(i.len(), 4);
        assert!(multiplication_instance(q.body(), &free, 20, 100).is_none());
    }

    #[test]
    fn search_finds_table_shapes() {
        let cfg = SearchConfig::default();
        let q = parse_rule("T(x,f(y)) <- R(x,y,z).").unwrap();
        let qp = parse_rule("T(x,f(x,y)) <- R(x,y,z).").unwrap();
        let i = search_counterexample_oid(&q, &qp, &cfg).unwrap();
        let small = minimize_oid_counterexample(&q, &qp, &i);
        assert_eq!(small.len(), 2);
        assert!(search_counterexample_oid(&q, &q, &SearchConfig { budget: 50, ..cfg }).is_none());

        let q9 = parse_rule("T(x,f(x)) <- R(x,y,z).").unwrap();
        let q9p = parse_rule("T(x,f(x,y,z)) <- R(x,y,z).").unwrap();
        let i = search_counterexample_oid(&q9, &q9p, &cfg).unwrap();
        let small = minimize_oid_counterexample(&q9, &q9p, &i);
        assert_eq!(small.len(), 2);
        assert_eq!(eval_ocq(&q9, &small).oids().len(), 1);
        assert_eq!(eval_ocq(&q9p, &small).oids().len(), 2);

        let (i, _) = search_counterexample_entail(&qp, &q, &cfg).unwrap();
        let (i, j) = minimize_entail_counterexample(&qp, &q, &i);
        assert_eq!(i.len(), 2);
        assert_eq!(j.len(), 2);
        assert!(satisfies_sotgd(&i, &j, &qp).unwrap().satisfied);
        assert!(!satisfies_sotgd(&i, &j, &q).unwrap().satisfied);
        assert!(
            search_counterexample_entail(&q, &qp, &SearchConfig { budget: 100, ..cfg }).is_none()
        );
    }
}
