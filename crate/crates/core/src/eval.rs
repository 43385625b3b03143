//! Reference semantics: matchings, CQ and oCQ evaluation, combined (MV)
//! semantics, tableau queries, oid counts and the chase.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{
    vars_of, Atom, ConjunctiveQuery, Const, DataTerm, ExtFact, ExtendedInstance, Fact, Instance,
    SifoQuery, Symbol, Valuation, Var,
};

/// `Mat(B, I)`: every valuation `α` on `var(B)` with `α(B) ⊆ I`, stored as a
/// relation whose columns are the variables in sorted order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchingSet {
    vars: Vec<Var>,
    rows: Vec<Vec<Const>>,
}

impl MatchingSet {
    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    pub fn rows(&self) -> &[Vec<Const>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column(&self, v: &Var) -> Option<usize> {
        self.vars.binary_search(v).ok()
    }

    pub fn valuations(&self) -> impl Iterator<Item = Valuation> + '_ {
        self.rows
            .iter()
            .map(|r| self.vars.iter().cloned().zip(r.iter().cloned()).collect())
    }

    /// Column indices of `vars`; panics on a variable outside `var(B)`.
    pub fn columns(&self, vars: &[Var]) -> Vec<usize> {
        vars.iter()
            .map(|v| {
                self.column(v)
                    .unwrap_or_else(|| panic!("variable {v} is not a body variable"))
            })
            .collect()
    }
}

pub(crate) fn pick(row: &[Const], cols: &[usize]) -> Vec<Const> {
    cols.iter().map(|&i| row[i].clone()).collect()
}

/// Enumerates the matchings of `body` in `inst` by backtracking over the
/// atoms, fewest variables first and then fewest candidate facts.
pub fn matchings<'a>(body: impl IntoIterator<Item = &'a Atom>, inst: &Instance) -> MatchingSet {
    let atoms: Vec<&Atom> = body.into_iter().collect();
    let vars: Vec<Var> = vars_of(atoms.iter().copied()).into_iter().collect();
    let index: BTreeMap<&Var, usize> = vars.iter().enumerate().map(|(i, v)| (v, i)).collect();

    struct Step<'i> {
        slots: Vec<usize>,
        candidates: Vec<&'i [Const]>,
        distinct: usize,
    }
    let mut steps: Vec<Step> = atoms
        .iter()
        .map(|a| {
            let slots: Vec<usize> = a.args.iter().map(|v| index[v]).collect();
            let distinct = slots.iter().collect::<BTreeSet<_>>().len();
            let candidates = inst
                .tuples(&a.pred)
                .filter(|t| t.len() == slots.len())
                .collect();
            Step {
                slots,
                candidates,
                distinct,
            }
        })
        .collect();
    steps.sort_by_key(|s| (s.distinct, s.candidates.len()));

    fn go(
        steps: &[Step],
        depth: usize,
        binding: &mut Vec<Option<Const>>,
        rows: &mut Vec<Vec<Const>>,
    ) {
        let Some(step) = steps.get(depth) else {
            rows.push(binding.iter().map(|c| c.clone().expect("bound")).collect());
            return;
        };
        let mut newly = Vec::with_capacity(step.slots.len());
        'cand: for tuple in &step.candidates {
            for &slot in &newly {
                binding[slot] = None;
            }
            newly.clear();
            for (&slot, c) in step.slots.iter().zip(tuple.iter()) {
                match &binding[slot] {
                    Some(b) if b != c => continue 'cand,
                    Some(_) => {}
                    None => {
                        binding[slot] = Some(c.clone());
                        newly.push(slot);
                    }
                }
            }
            go(steps, depth + 1, binding, rows);
        }
        for &slot in &newly {
            binding[slot] = None;
        }
    }

    let mut rows = Vec::new();
    let mut binding = vec![None; vars.len()];
    go(&steps, 0, &mut binding, &mut rows);
    rows.sort();
    MatchingSet { vars, rows }
}

/// `Q(I) = {α(H) | α : B → I}`
pub fn eval_cq(q: &ConjunctiveQuery, inst: &Instance) -> Instance {
    let m = matchings(q.body(), inst);
    let cols = m.columns(&q.head().args);
    let mut out = Instance::new();
    for row in m.rows() {
        out.insert_unchecked(Fact {
            pred: q.head().pred.clone(),
            args: pick(row, &cols),
        });
    }
    out
}

fn head_fact(q: &SifoQuery, row: &[Const], xcols: &[usize], zcols: &[usize]) -> ExtFact {
    let mut args: Vec<DataTerm> = xcols
        .iter()
        .map(|&i| DataTerm::Const(row[i].clone()))
        .collect();
    args.insert(
        q.function_position(),
        DataTerm::Oid(
            q.function().clone(),
            zcols
                .iter()
                .map(|&i| DataTerm::Const(row[i].clone()))
                .collect(),
        ),
    );
    ExtFact {
        pred: q.head_predicate().clone(),
        args,
    }
}

/// Result of an object-creating query: one extended fact per matching, the
/// function term instantiated into an oid.
pub fn eval_ocq(q: &SifoQuery, inst: &Instance) -> ExtendedInstance {
    let m = matchings(q.body(), inst);
    let xcols = m.columns(q.distinguished());
    let zcols = m.columns(q.creation());
    let mut out = ExtendedInstance::new();
    for row in m.rows() {
        out.insert_unchecked(head_fact(q, row, &xcols, &zcols));
    }
    out
}

/// A CQ whose answers carry multiplicities: the number of distinct
/// restrictions to the multiset variables among the matchings producing it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MvQuery {
    core: ConjunctiveQuery,
    multiset_vars: BTreeSet<Var>,
}

impl MvQuery {
    pub fn new(core: ConjunctiveQuery, multiset_vars: BTreeSet<Var>) -> Result<Self> {
        let body_vars = vars_of(core.body());
        let head_vars: BTreeSet<&Var> = core.head().args.iter().collect();
        if let Some(v) = multiset_vars
            .iter()
            .find(|v| !body_vars.contains(*v) || head_vars.contains(v))
        {
            return Err(Error::MultisetVariable(v.to_string()));
        }
        Ok(MvQuery {
            core,
            multiset_vars,
        })
    }

    pub fn core(&self) -> &ConjunctiveQuery {
        &self.core
    }

    pub fn multiset_vars(&self) -> &BTreeSet<Var> {
        &self.multiset_vars
    }
}

/// Fact multiplicities; every entry is at least one.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct MultisetResult(BTreeMap<Fact, usize>);

impl MultisetResult {
    pub fn multiplicity(&self, fact: &Fact) -> usize {
        self.0.get(fact).copied().unwrap_or(0)
    }

    pub fn ground_set(&self) -> Instance {
        let mut out = Instance::new();
        for f in self.0.keys() {
            out.insert_unchecked(f.clone());
        }
        out
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Fact, usize)> {
        self.0.iter().map(|(f, n)| (f, *n))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Combined semantics.
pub fn eval_mv(q: &MvQuery, inst: &Instance) -> MultisetResult {
    let m = matchings(q.core.body(), inst);
    let hcols = m.columns(&q.core.head().args);
    let mvars: Vec<Var> = q.multiset_vars.iter().cloned().collect();
    let mcols = m.columns(&mvars);
    let mut groups: BTreeMap<Vec<Const>, BTreeSet<Vec<Const>>> = BTreeMap::new();
    for row in m.rows() {
        groups
            .entry(pick(row, &hcols))
            .or_default()
            .insert(pick(row, &mcols));
    }
    MultisetResult(
        groups
            .into_iter()
            .map(|(args, restrictions)| {
                (
                    Fact {
                        pred: q.core.head().pred.clone(),
                        args,
                    },
                    restrictions.len(),
                )
            })
            .collect(),
    )
}

/// Number of distinct oids `o` with `T(c̄, o)` in `Q(I)`.
pub fn oid_count(q: &SifoQuery, inst: &Instance, tuple: &[Const]) -> usize {
    assert_eq!(
        tuple.len(),
        q.distinguished().len(),
        "tuple length must match x̄"
    );
    let m = matchings(q.body(), inst);
    let xcols = m.columns(q.distinguished());
    let zcols = m.columns(q.creation());
    m.rows()
        .iter()
        .filter(|row| xcols.iter().zip(tuple).all(|(&i, c)| &row[i] == c))
        .map(|row| pick(row, &zcols))
        .collect::<BTreeSet<_>>()
        .len()
}

/// A relation over a set of attributes (here: variables).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Relation {
    columns: Vec<Var>,
    rows: BTreeSet<Vec<Const>>,
}

impl Relation {
    pub fn new(columns: BTreeSet<Var>, rows: BTreeSet<Vec<Const>>) -> Self {
        let columns: Vec<Var> = columns.into_iter().collect();
        assert!(rows.iter().all(|r| r.len() == columns.len()));
        Relation { columns, rows }
    }

    pub fn columns(&self) -> &[Var] {
        &self.columns
    }

    pub fn rows(&self) -> &BTreeSet<Vec<Const>> {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn cols(&self, attrs: &BTreeSet<Var>) -> Vec<usize> {
        attrs
            .iter()
            .map(|a| {
                self.columns
                    .binary_search(a)
                    .unwrap_or_else(|_| panic!("attribute {a} not in relation"))
            })
            .collect()
    }

    /// `π_attrs(r)`
    pub fn project(&self, attrs: &BTreeSet<Var>) -> Relation {
        let cols = self.cols(attrs);
        Relation {
            columns: attrs.iter().cloned().collect(),
            rows: self.rows.iter().map(|r| pick(r, &cols)).collect(),
        }
    }

    /// Natural join.
    pub fn join(&self, other: &Relation) -> Relation {
        let all: BTreeSet<Var> = self.columns.iter().chain(&other.columns).cloned().collect();
        let columns: Vec<Var> = all.into_iter().collect();
        let mut rows = BTreeSet::new();
        for l in &self.rows {
            'r: for r in &other.rows {
                let mut out = Vec::with_capacity(columns.len());
                for c in &columns {
                    let lv = self.columns.binary_search(c).ok().map(|i| &l[i]);
                    let rv = other.columns.binary_search(c).ok().map(|i| &r[i]);
                    match (lv, rv) {
                        (Some(a), Some(b)) if a != b => continue 'r,
                        (Some(a), _) | (None, Some(a)) => out.push(a.clone()),
                        (None, None) => unreachable!(),
                    }
                }
                rows.insert(out);
            }
        }
        Relation { columns, rows }
    }
}

/// `(B, U)`: answers are the projection of `Mat(B, I)` onto `U`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableauQuery {
    pub body: BTreeSet<Atom>,
    pub columns: BTreeSet<Var>,
}

impl TableauQuery {
    pub fn new(body: BTreeSet<Atom>, columns: BTreeSet<Var>) -> Result<Self> {
        let vars = vars_of(&body);
        if let Some(v) = columns.iter().find(|v| !vars.contains(*v)) {
            return Err(Error::UnsafeVariable(v.to_string()));
        }
        Ok(TableauQuery { body, columns })
    }
}

pub fn eval_tableau(t: &TableauQuery, inst: &Instance) -> Relation {
    let m = matchings(&t.body, inst);
    let cols: Vec<usize> = t
        .columns
        .iter()
        .map(|v| m.column(v).expect("column in body"))
        .collect();
    Relation {
        columns: t.columns.iter().cloned().collect(),
        rows: m.rows().iter().map(|r| pick(r, &cols)).collect(),
    }
}

/// The join dependency `U1 ⋈ U2`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct JoinDependency {
    pub left: BTreeSet<Var>,
    pub right: BTreeSet<Var>,
}

impl JoinDependency {
    /// Whether `r = π_U1(r) ⋈ π_U2(r)`; `r` must be over `U1 ∪ U2`.
    pub fn holds_on(&self, r: &Relation) -> bool {
        let scheme: BTreeSet<Var> = self.left.union(&self.right).cloned().collect();
        assert_eq!(
            r.columns.iter().cloned().collect::<BTreeSet<_>>(),
            scheme,
            "join dependency must cover the relation scheme"
        );
        let joined = r.project(&self.left).join(&r.project(&self.right));
        joined.rows.is_subset(&r.rows)
    }
}

/// Ground target instance produced by the chase, plus the table recording
/// which created value each fresh constant stands for.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Chase {
    pub target: Instance,
    pub oids: BTreeMap<Const, DataTerm>,
}

/// Evaluates `Q` and replaces every oid by a fresh constant `@k`, numbered in
/// the lexicographic order of the oids' rendering and skipping names already
/// in `adom(I)`.
pub fn chase(q: &SifoQuery, inst: &Instance) -> Chase {
    let result = eval_ocq(q, inst);
    let adom = inst.adom();
    let mut rendered: Vec<(String, DataTerm)> = result
        .oids()
        .into_iter()
        .map(|o| (o.to_string(), o))
        .collect();
    rendered.sort();
    let mut assignment: BTreeMap<DataTerm, Const> = BTreeMap::new();
    let mut oids = BTreeMap::new();
    let mut k = 0usize;
    for (_, oid) in rendered {
        let fresh = loop {
            k += 1;
            let c = Const::new(format!("@{k}"));
            if !adom.contains(&c) {
                break c;
            }
        };
        oids.insert(fresh.clone(), oid.clone());
        assignment.insert(oid, fresh);
    }
    let mut target = Instance::new();
    for f in result.iter() {
        target.insert_unchecked(Fact {
            pred: f.pred.clone(),
            args: f
                .args
                .iter()
                .map(|t| match t {
                    DataTerm::Const(c) => c.clone(),
                    oid => assignment[oid].clone(),
                })
                .collect(),
        });
    }
    Chase { target, oids }
}

/// Predicate arities mentioned by a set of atoms.
pub fn schema_of<'a>(atoms: impl IntoIterator<Item = &'a Atom>) -> BTreeMap<Symbol, usize> {
    atoms
        .into_iter()
        .map(|a| (a.pred.clone(), a.arity()))
        .collect()
}
