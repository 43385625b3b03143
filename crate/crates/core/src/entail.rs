//! Logical entailment between sifo CQs read as second-order tgds.
//!
//! Two independent procedures: a search for a homomorphism `h : B → B'`
//! whose preimage of the creation variables makes a join dependency hold,
//! and a semantic test that chases `Q` on a colored canonical instance of
//! `Q'` and checks the result against `Q'`.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::ControlFlow;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::eval::chase;
use crate::hom::{find_homomorphism, for_each_homomorphism, HomConstraint};
use crate::model::{
    frozen, tagged, vars_of, Atom, Const, Fact, Homomorphism, Instance, SifoQuery, Var, VarMap,
};
use crate::normalize::disjoint_frozen_union;
use crate::oracle::{entail_violation, minimize_entail_counterexample, satisfies_sotgd};

/// Certificate for an entailment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EntailWitness {
    /// `h : B → B'` with `h(x̄) = x̄'` and `h(X ∩ Z) ⊆ Z'`.
    pub h: Homomorphism,
    /// `Y_h = h⁻¹(Z')`
    pub y_h: BTreeSet<Var>,
    /// `m : B → B₀ ∪ B₁` showing the join dependency is implied.
    pub jd_certificate: Homomorphism,
}

/// Two copies of a body that share the variables of `Y`; every other
/// variable `u` becomes `u^0` in the first and `u^1` in the second.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TwoCopyBody {
    pub b0: BTreeSet<Atom>,
    pub b1: BTreeSet<Atom>,
    pub b2: BTreeSet<Atom>,
}

impl TwoCopyBody {
    pub fn new(body: &BTreeSet<Atom>, shared: &BTreeSet<Var>) -> Self {
        let copy = |l: usize| -> BTreeSet<Atom> {
            let m: VarMap = vars_of(body)
                .into_iter()
                .filter(|v| !shared.contains(v))
                .map(|v| {
                    let c = tagged(&v, l);
                    (v, c)
                })
                .collect();
            m.apply_all(body)
        };
        let (b0, b1) = (copy(0), copy(1));
        let b2 = b0.union(&b1).cloned().collect();
        TwoCopyBody { b0, b1, b2 }
    }
}

/// `⋃_{l=0}^{n} B'^l` read as an instance: variables of `Z'` stay white
/// (one shared constant `frz:u`), every other variable `u` gets one
/// constant `u#l` per color `l`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ColoredInstance {
    pub base: BTreeSet<Atom>,
    /// Highest color `n`; colors run over `0..=n`.
    pub colors: usize,
    pub instance: Instance,
    /// Removes colors: each constant back to its variable.
    pub decolor: BTreeMap<Const, Var>,
}

/// Colored canonical instance of `Q'` with colors `0..=n`.
pub fn canonical_colored_instance(qp: &SifoQuery, n: usize) -> ColoredInstance {
    let white = qp.creation_set();
    let mut decolor = BTreeMap::new();
    let mut instance = Instance::new();
    for l in 0..=n {
        let mut color = |u: &Var| -> Const {
            let c = if white.contains(u) {
                frozen(u)
            } else {
                Const::new(format!("{u}#{l}"))
            };
            decolor.insert(c.clone(), u.clone());
            c
        };
        for a in qp.body() {
            let args: Vec<Const> = a.args.iter().map(&mut color).collect();
            instance.insert_unchecked(Fact::new(a.pred.clone(), args));
        }
    }
    ColoredInstance {
        base: qp.body().clone(),
        colors: n,
        instance,
        decolor,
    }
}

/// Whether the tableau query `(B, XYZ)` implies the join dependency
/// `XY ⋈ YZ`; returns the homomorphism `m : B → B₀ ∪ B₁` that fixes
/// `X − Y` to the 0-copies, `Y` to itself and `Z − Y` to the 1-copies.
pub fn check_jd_implication(
    body: &BTreeSet<Atom>,
    x: &BTreeSet<Var>,
    y: &BTreeSet<Var>,
    z: &BTreeSet<Var>,
) -> Option<Homomorphism> {
    let two = TwoCopyBody::new(body, y);
    let mut c = HomConstraint::none();
    for u in y {
        c.fixed.insert(u.clone(), u.clone());
    }
    for u in x.difference(y) {
        c.fixed.insert(u.clone(), tagged(u, 0));
    }
    for u in z.difference(y) {
        if x.contains(u) {
            // Needs both copies at once.
            return None;
        }
        c.fixed.insert(u.clone(), tagged(u, 1));
    }
    find_homomorphism(body, &two.b2, &c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntailVerdict {
    Entails,
    NotEntails,
}

/// A source and target instance with `(I, J) ⊨ Q` and `(I, J) ⊭ Q'`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EntailCounterexample {
    pub source: Instance,
    pub target: Instance,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EntailDecision {
    pub verdict: EntailVerdict,
    pub witness: Option<EntailWitness>,
    pub counterexample: Option<EntailCounterexample>,
}

impl EntailDecision {
    pub fn entails(&self) -> bool {
        self.verdict == EntailVerdict::Entails
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EntailOptions {
    /// Cross-check the verdict against the semantic procedure.
    pub dual_check: bool,
    /// Shrink counterexamples to a minimal source instance.
    pub minimize: bool,
}

impl Default for EntailOptions {
    fn default() -> Self {
        EntailOptions {
            dual_check: true,
            minimize: true,
        }
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

/// Searches for the homomorphism-and-join-dependency certificate.
pub fn entailment_witness(q: &SifoQuery, qp: &SifoQuery) -> Option<EntailWitness> {
    if q.function_position() != qp.function_position() {
        return None;
    }
    let base = HomConstraint::none().pin_tuple(q.distinguished(), qp.distinguished())?;
    let x = q.distinguished_set();
    let z = q.creation_set();
    let zp = qp.creation_set();
    let mut c = base;
    for v in x.intersection(&z) {
        c.image_in.insert(v.clone(), zp.clone());
    }

    let mut tried: BTreeSet<BTreeSet<Var>> = BTreeSet::new();
    let mut found = None;
    for_each_homomorphism(q.body(), qp.body(), &c, |h| {
        let y_h: BTreeSet<Var> = h
            .iter()
            .filter(|(_, t)| zp.contains(*t))
            .map(|(v, _)| v.clone())
            .collect();
        if !tried.insert(y_h.clone()) {
            return ControlFlow::Continue(());
        }
        match check_jd_implication(q.body(), &x, &y_h, &z) {
            Some(m) => {
                found = Some(EntailWitness {
                    h: h.clone(),
                    y_h,
                    jd_certificate: m,
                });
                ControlFlow::Break(())
            }
            None => ControlFlow::Continue(()),
        }
    });
    found
}

/// Decides entailment by chasing `Q` on the colored canonical instance of
/// `Q'` (with one color more than the arity of `Q`'s function) and testing
/// the result against `Q'`.
pub fn decide_entails_semantic(q: &SifoQuery, qp: &SifoQuery) -> Result<EntailVerdict> {
    check_heads(q, qp)?;
    if q.function_position() != qp.function_position() {
        return Ok(EntailVerdict::NotEntails);
    }
    let colored = canonical_colored_instance(qp, q.function_arity());
    let target = chase(q, &colored.instance).target;
    let report = satisfies_sotgd(&colored.instance, &target, qp)?;
    Ok(if report.satisfied {
        EntailVerdict::Entails
    } else {
        EntailVerdict::NotEntails
    })
}

/// Whether `Q` logically entails `Q'`, with certificate or counterexample.
pub fn decide_entails(q: &SifoQuery, qp: &SifoQuery) -> Result<EntailDecision> {
    decide_entails_with(q, qp, &EntailOptions::default())
}

pub fn decide_entails_with(
    q: &SifoQuery,
    qp: &SifoQuery,
    opts: &EntailOptions,
) -> Result<EntailDecision> {
    check_heads(q, qp)?;
    let witness = entailment_witness(q, qp);
    let verdict = if witness.is_some() {
        EntailVerdict::Entails
    } else {
        EntailVerdict::NotEntails
    };
    if opts.dual_check {
        let semantic = decide_entails_semantic(q, qp)?;
        assert_eq!(
            verdict, semantic,
            "entailment procedures disagree on {q} vs {qp}"
        );
    }
    if witness.is_some() {
        return Ok(EntailDecision {
            verdict,
            witness,
            counterexample: None,
        });
    }

    let source = if q.function_position() != qp.function_position() {
        disjoint_frozen_union(q, qp)
    } else {
        canonical_colored_instance(qp, q.function_arity()).instance
    };
    let (source, target) = if opts.minimize {
        minimize_entail_counterexample(q, qp, &source)
    } else {
        let target = chase(q, &source).target;
        (source, target)
    };
    debug_assert!(entail_violation(q, qp, &source).is_some());
    Ok(EntailDecision {
        verdict,
        witness: None,
        counterexample: Some(EntailCounterexample { source, target }),
    })
}

/// Entailment in both directions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LogicalEquivalence {
    pub forward: EntailDecision,
    pub backward: EntailDecision,
    pub equivalent: bool,
}

pub fn decide_logical_equiv(q: &SifoQuery, qp: &SifoQuery) -> Result<LogicalEquivalence> {
    decide_logical_equiv_with(q, qp, &EntailOptions::default())
}

pub fn decide_logical_equiv_with(
    q: &SifoQuery,
    qp: &SifoQuery,
    opts: &EntailOptions,
) -> Result<LogicalEquivalence> {
    let forward = decide_entails_with(q, qp, opts)?;
    let backward = decide_entails_with(qp, q, opts)?;
    let equivalent = forward.entails() && backward.entails();
    Ok(LogicalEquivalence {
        forward,
        backward,
        equivalent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::parse_rule;

    fn set(vs: &[&str]) -> BTreeSet<Var> {
        vs.iter().map(Var::new).collect()
    }

    fn q12() -> (SifoQuery, SifoQuery) {
        (
            parse_rule("T(x,f(y)) <- R(x,y,z).").unwrap(),
            parse_rule("T(x,g(x,y)) <- R(x,y,z).").unwrap(),
        )
    }

    #[test]
    fn jd_examples() {
        let body: BTreeSet<Atom> = [Atom::new(
            "R",
            [Var::new("x"), Var::new("y"), Var::new("z")],
        )]
        .into_iter()
        .collect();
        assert!(
            check_jd_implication(&body, &set(&["x"]), &set(&["x", "y"]), &set(&["y"])).is_some()
        );
        assert!(check_jd_implication(&body, &set(&["x"]), &set(&[]), &set(&["y"])).is_none());
        let q14 = parse_rule("T(x,f(z1)) <- R(z1,x), R(z1,z2).").unwrap();
        assert!(check_jd_implication(
            q14.body(),
            &set(&["x"]),
            &set(&["z1", "z2"]),
            &set(&["z1", "z2"])
        )
        .is_some());
    }

    #[test]
    fn colored_instances() {
        let (q, qp) = q12();
        let c = canonical_colored_instance(&qp, 1);
        let rendered: Vec<String> = c.instance.iter().map(|f| f.to_string()).collect();
        assert_eq!(
            rendered,
            vec![
                "R(\"frz:x\",\"frz:y\",\"z#0\")",
                "R(\"frz:x\",\"frz:y\",\"z#1\")"
            ]
        );
        let c = canonical_colored_instance(&q, 2);
        assert_eq!(c.instance.len(), 3);
        assert_eq!(c.instance.adom().len(), 7);
        assert_eq!(canonical_colored_instance(&q, 0).instance.len(), 1);
        for (k, v) in &c.decolor {
            assert!(k.as_str().contains(v.as_str()));
        }
    }

    #[test]
    fn dropping_distinguished_argument() {
        let (q, qp) = q12();
        let d = decide_entails(&q, &qp).unwrap();
        assert!(d.entails());
        let w = d.witness.unwrap();
        assert_eq!(w.h, VarMap::identity(&q.vars()));
        assert_eq!(w.y_h, set(&["x", "y"]));

        let d = decide_entails(&qp, &q).unwrap();
        assert!(!d.entails());
        let ce = d.counterexample.unwrap();
        assert_eq!(ce.source.len(), 2);
        assert_eq!(ce.target.len(), 2);
        assert!(
            satisfies_sotgd(&ce.source, &ce.target, &qp)
                .unwrap()
                .satisfied
        );
        assert!(
            !satisfies_sotgd(&ce.source, &ce.target, &q)
                .unwrap()
                .satisfied
        );
    }

    #[test]
    fn mutual_entailment_pairs() {
        let q = parse_rule("T(x,f(x)) <- R(x,y,z).").unwrap();
        let qp = parse_rule("T(x,g(x,y,z)) <- R(x,y,z).").unwrap();
        assert!(decide_logical_equiv(&q, &qp).unwrap().equivalent);
        let q = parse_rule("T(x,f(z1)) <- R(z1,x), R(z1,z2).").unwrap();
        let qp = parse_rule("T(x,g(z1,z2)) <- R(z1,x), R(z1,z2).").unwrap();
        assert!(decide_logical_equiv(&q, &qp).unwrap().equivalent);
        assert_eq!(
            decide_entails_semantic(&q, &qp).unwrap(),
            EntailVerdict::Entails
        );
    }

    #[test]
    fn position_mismatch() {
        let q = parse_rule("T(x,f(y)) <- R(x,y).").unwrap();
        let qp = parse_rule("T(f(y),x) <- R(x,y).").unwrap();
        let d = decide_entails(&q, &qp).unwrap();
        assert!(!d.entails());
        let ce = d.counterexample.unwrap();
        assert!(
            satisfies_sotgd(&ce.source, &ce.target, &q)
                .unwrap()
                .satisfied
        );
        assert!(
            !satisfies_sotgd(&ce.source, &ce.target, &qp)
                .unwrap()
                .satisfied
        );
    }

    #[test]
    fn heads_must_agree() {
        let q = parse_rule("T(x,f(y)) <- R(x,y).").unwrap();
        let qp = parse_rule("U(x,f(y)) <- R(x,y).").unwrap();
        assert!(matches!(
            decide_entails(&q, &qp),
            Err(Error::HeadMismatch(..))
        ));
    }
}
