//! Symbolic vocabulary: variables, constants, data terms, atoms, facts,
//! instances and the single-function object-creating query type.
//!
//! Everything here is immutable once built. Names are reference counted so
//! that cloning terms while enumerating matchings stays cheap.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

/// Prefix of the constants produced by [`freeze`].
pub const FROZEN_PREFIX: &str = "frz:";

macro_rules! name_type {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(Arc<str>);

        impl $name {
            pub fn new(name: impl AsRef<str>) -> Self {
                $name(Arc::from(name.as_ref()))
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                $name::new(s)
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                $name(Arc::from(s))
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", &*self.0)
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                s.serialize_str(&self.0)
            }
        }
    };
}

name_type!(
    /// A query variable.
    Var
);
name_type!(
    /// An atomic data element.
    Const
);
name_type!(
    /// A relation name or function symbol.
    Symbol
);

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Constants that are not plain identifiers are rendered quoted so that the
/// text formats stay parseable.
impl fmt::Display for Const {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if is_identifier(&self.0) {
            f.write_str(&self.0)
        } else {
            f.write_str("\"")?;
            for c in self.0.chars() {
                if c == '"' || c == '\\' {
                    f.write_str("\\")?;
                }
                write!(f, "{c}")?;
            }
            f.write_str("\"")
        }
    }
}

/// `[a-zA-Z_][a-zA-Z0-9_]*`
pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// A syntactic term as it appears in a rule before validation.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Term {
    Var(Var),
    Const(Const),
    App(Symbol, Vec<Term>),
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => write!(f, "{v}"),
            Term::Const(c) => write!(f, "{c}"),
            Term::App(s, args) => {
                write!(f, "{s}(")?;
                write_list(f, args)?;
                f.write_str(")")
            }
        }
    }
}

/// A data term: a constant or a created object identifier.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DataTerm {
    Const(Const),
    Oid(Symbol, Vec<DataTerm>),
}

impl DataTerm {
    pub fn is_oid(&self) -> bool {
        matches!(self, DataTerm::Oid(..))
    }

    pub fn as_const(&self) -> Option<&Const> {
        match self {
            DataTerm::Const(c) => Some(c),
            DataTerm::Oid(..) => None,
        }
    }
}

impl From<Const> for DataTerm {
    fn from(c: Const) -> Self {
        DataTerm::Const(c)
    }
}

impl fmt::Display for DataTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DataTerm::Const(c) => write!(f, "{c}"),
            DataTerm::Oid(s, args) => {
                write!(f, "{s}(")?;
                write_list(f, args)?;
                f.write_str(")")
            }
        }
    }
}

impl fmt::Debug for DataTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl Serialize for DataTerm {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

fn write_list<T: fmt::Display>(f: &mut fmt::Formatter<'_>, items: &[T]) -> fmt::Result {
    write_sep(f, items, ",")
}

fn write_sep<T: fmt::Display>(f: &mut fmt::Formatter<'_>, items: &[T], sep: &str) -> fmt::Result {
    for (i, item) in items.iter().enumerate() {
        if i > 0 {
            f.write_str(sep)?;
        }
        write!(f, "{item}")?;
    }
    Ok(())
}

macro_rules! atom_like {
    ($(#[$doc:meta])* $name:ident, $arg:ty) => {
        $(#[$doc])*
        #[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name {
            pub pred: Symbol,
            pub args: Vec<$arg>,
        }

        impl $name {
            pub fn new(pred: impl Into<Symbol>, args: impl IntoIterator<Item = $arg>) -> Self {
                $name {
                    pred: pred.into(),
                    args: args.into_iter().collect(),
                }
            }

            pub fn arity(&self) -> usize {
                self.args.len()
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}(", self.pred)?;
                write_list(f, &self.args)?;
                f.write_str(")")
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                fmt::Display::fmt(self, f)
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                s.collect_str(self)
            }
        }
    };
}

atom_like!(
    /// A flat atom `R(x1,...,xk)` over variables.
    Atom,
    Var
);
atom_like!(
    /// A fact `R(a1,...,ak)` over constants.
    Fact,
    Const
);
atom_like!(
    /// A fact whose arguments may be created oids.
    ExtFact,
    DataTerm
);

impl Atom {
    pub fn vars(&self) -> impl Iterator<Item = &Var> {
        self.args.iter()
    }
}

impl ExtFact {
    pub fn ground(fact: &Fact) -> Self {
        ExtFact {
            pred: fact.pred.clone(),
            args: fact.args.iter().cloned().map(DataTerm::Const).collect(),
        }
    }
}

/// Variables of a set of atoms.
pub fn vars_of<'a>(atoms: impl IntoIterator<Item = &'a Atom>) -> BTreeSet<Var> {
    atoms
        .into_iter()
        .flat_map(|a| a.args.iter().cloned())
        .collect()
}

/// Records the arity of every name seen so far and rejects clashes.
#[derive(Debug, Clone, Default)]
pub struct Arities(BTreeMap<Symbol, usize>);

impl Arities {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn check(&mut self, name: &Symbol, arity: usize) -> Result<()> {
        match self.0.get(name) {
            Some(&expected) if expected != arity => Err(Error::ArityClash {
                name: name.to_string(),
                expected,
                found: arity,
            }),
            Some(_) => Ok(()),
            None => {
                self.0.insert(name.clone(), arity);
                Ok(())
            }
        }
    }

    pub fn get(&self, name: &Symbol) -> Option<usize> {
        self.0.get(name).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Symbol, usize)> {
        self.0.iter().map(|(s, a)| (s, *a))
    }

    pub fn into_map(self) -> BTreeMap<Symbol, usize> {
        self.0
    }
}

/// A finite set of facts.
#[derive(Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Instance {
    facts: BTreeSet<Fact>,
}

impl Instance {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds an instance, rejecting predicates used with two arities.
    pub fn try_from_facts(facts: impl IntoIterator<Item = Fact>) -> Result<Self> {
        let mut inst = Instance::new();
        for f in facts {
            inst.insert(f)?;
        }
        Ok(inst)
    }

    /// Inserts a fact; returns whether it was new.
    pub fn insert(&mut self, fact: Fact) -> Result<bool> {
        if let Some(existing) = self.tuples(&fact.pred).next() {
            if existing.len() != fact.arity() {
                return Err(Error::ArityClash {
                    name: fact.pred.to_string(),
                    expected: existing.len(),
                    found: fact.arity(),
                });
            }
        }
        Ok(self.facts.insert(fact))
    }

    pub(crate) fn insert_unchecked(&mut self, fact: Fact) {
        self.facts.insert(fact);
    }

    pub fn remove(&mut self, fact: &Fact) -> bool {
        self.facts.remove(fact)
    }

    pub fn contains(&self, fact: &Fact) -> bool {
        self.facts.contains(fact)
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Fact> {
        self.facts.iter()
    }

    /// Argument tuples of all facts with predicate `pred`.
    pub fn tuples<'a>(&'a self, pred: &'a Symbol) -> impl Iterator<Item = &'a [Const]> + 'a {
        let start = Fact {
            pred: pred.clone(),
            args: Vec::new(),
        };
        self.facts
            .range(start..)
            .take_while(move |f| &f.pred == pred)
            .map(|f| f.args.as_slice())
    }

    pub fn count(&self, pred: &Symbol) -> usize {
        self.tuples(pred).count()
    }

    pub fn adom(&self) -> BTreeSet<Const> {
        self.facts
            .iter()
            .flat_map(|f| f.args.iter().cloned())
            .collect()
    }

    pub fn arities(&self) -> BTreeMap<Symbol, usize> {
        self.facts
            .iter()
            .map(|f| (f.pred.clone(), f.arity()))
            .collect()
    }

    pub fn is_subset(&self, other: &Instance) -> bool {
        self.facts.is_subset(&other.facts)
    }

    /// Set union; arities are checked.
    pub fn union(&self, other: &Instance) -> Result<Instance> {
        let mut out = self.clone();
        for f in other.iter() {
            out.insert(f.clone())?;
        }
        Ok(out)
    }

    pub fn to_extended(&self) -> ExtendedInstance {
        ExtendedInstance {
            facts: self.facts.iter().map(ExtFact::ground).collect(),
        }
    }
}

impl fmt::Debug for Instance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.facts.iter()).finish()
    }
}

impl Serialize for Instance {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(crate::parser::sorted_lines(self.facts.iter()))
    }
}

impl<'a> IntoIterator for &'a Instance {
    type Item = &'a Fact;
    type IntoIter = std::collections::btree_set::Iter<'a, Fact>;

    fn into_iter(self) -> Self::IntoIter {
        self.facts.iter()
    }
}

/// A finite set of extended facts.
#[derive(Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ExtendedInstance {
    facts: BTreeSet<ExtFact>,
}

impl ExtendedInstance {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn try_from_facts(facts: impl IntoIterator<Item = ExtFact>) -> Result<Self> {
        let mut arities = Arities::new();
        let mut out = ExtendedInstance::new();
        for f in facts {
            arities.check(&f.pred, f.arity())?;
            out.facts.insert(f);
        }
        Ok(out)
    }

    pub(crate) fn insert_unchecked(&mut self, fact: ExtFact) {
        self.facts.insert(fact);
    }

    pub fn contains(&self, fact: &ExtFact) -> bool {
        self.facts.contains(fact)
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ExtFact> {
        self.facts.iter()
    }

    pub fn adom(&self) -> BTreeSet<DataTerm> {
        self.facts
            .iter()
            .flat_map(|f| f.args.iter().cloned())
            .collect()
    }

    /// The created values, i.e. `adom J - dom`.
    pub fn oids(&self) -> BTreeSet<DataTerm> {
        self.adom().into_iter().filter(DataTerm::is_oid).collect()
    }

    pub fn consts(&self) -> BTreeSet<Const> {
        self.facts
            .iter()
            .flat_map(|f| f.args.iter().filter_map(|t| t.as_const().cloned()))
            .collect()
    }

    /// Applies `rho` to every argument; values outside its domain stay put.
    pub fn map_terms(&self, rho: &BTreeMap<DataTerm, DataTerm>) -> ExtendedInstance {
        let facts = self
            .facts
            .iter()
            .map(|f| ExtFact {
                pred: f.pred.clone(),
                args: f
                    .args
                    .iter()
                    .map(|t| rho.get(t).cloned().unwrap_or_else(|| t.clone()))
                    .collect(),
            })
            .collect();
        ExtendedInstance { facts }
    }
}

impl fmt::Debug for ExtendedInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.facts.iter()).finish()
    }
}

impl Serialize for ExtendedInstance {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(crate::parser::sorted_lines(self.facts.iter()))
    }
}

impl<'a> IntoIterator for &'a ExtendedInstance {
    type Item = &'a ExtFact;
    type IntoIter = std::collections::btree_set::Iter<'a, ExtFact>;

    fn into_iter(self) -> Self::IntoIter {
        self.facts.iter()
    }
}

/// A valuation: variables to constants.
#[derive(Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Valuation(BTreeMap<Var, Const>);

impl Valuation {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, v: Var, c: Const) -> Option<Const> {
        self.0.insert(v, c)
    }

    pub fn get(&self, v: &Var) -> Option<&Const> {
        self.0.get(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Var, &Const)> {
        self.0.iter()
    }

    /// Panics if a variable of `atom` is unassigned.
    pub fn apply(&self, atom: &Atom) -> Fact {
        Fact {
            pred: atom.pred.clone(),
            args: atom.args.iter().map(|v| self.0[v].clone()).collect(),
        }
    }

    pub fn apply_tuple(&self, vars: &[Var]) -> Vec<Const> {
        vars.iter().map(|v| self.0[v].clone()).collect()
    }

    pub fn restrict(&self, vars: &BTreeSet<Var>) -> Valuation {
        Valuation(
            self.0
                .iter()
                .filter(|(v, _)| vars.contains(*v))
                .map(|(v, c)| (v.clone(), c.clone()))
                .collect(),
        )
    }
}

impl fmt::Debug for Valuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map().entries(self.0.iter()).finish()
    }
}

impl FromIterator<(Var, Const)> for Valuation {
    fn from_iter<I: IntoIterator<Item = (Var, Const)>>(iter: I) -> Self {
        Valuation(iter.into_iter().collect())
    }
}

/// A mapping between variables; homomorphisms are variable mappings.
#[derive(Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct VarMap(BTreeMap<Var, Var>);

/// A variable mapping `h` with `h(B) ⊆ B'`.
pub type Homomorphism = VarMap;

impl VarMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn identity<'a>(vars: impl IntoIterator<Item = &'a Var>) -> Self {
        VarMap(vars.into_iter().map(|v| (v.clone(), v.clone())).collect())
    }

    pub fn insert(&mut self, from: Var, to: Var) -> Option<Var> {
        self.0.insert(from, to)
    }

    pub fn get(&self, v: &Var) -> Option<&Var> {
        self.0.get(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Var, &Var)> {
        self.0.iter()
    }

    pub fn domain(&self) -> impl Iterator<Item = &Var> {
        self.0.keys()
    }

    /// Image of `v`; variables outside the domain are left unchanged.
    pub fn image(&self, v: &Var) -> Var {
        self.0.get(v).cloned().unwrap_or_else(|| v.clone())
    }

    pub fn apply(&self, atom: &Atom) -> Atom {
        Atom {
            pred: atom.pred.clone(),
            args: atom.args.iter().map(|v| self.image(v)).collect(),
        }
    }

    pub fn apply_all<'a>(&self, atoms: impl IntoIterator<Item = &'a Atom>) -> BTreeSet<Atom> {
        atoms.into_iter().map(|a| self.apply(a)).collect()
    }

    pub fn apply_tuple(&self, vars: &[Var]) -> Vec<Var> {
        vars.iter().map(|v| self.image(v)).collect()
    }

    /// `self ∘ inner`: first `inner`, then `self`.
    pub fn after(&self, inner: &VarMap) -> VarMap {
        VarMap(
            inner
                .0
                .iter()
                .map(|(k, v)| (k.clone(), self.image(v)))
                .collect(),
        )
    }

    pub fn is_injective_on(&self, vars: &BTreeSet<Var>) -> bool {
        let images: BTreeSet<Var> = vars.iter().map(|v| self.image(v)).collect();
        images.len() == vars.len()
    }

    /// Inverse, if the mapping is injective.
    pub fn inverse(&self) -> Option<VarMap> {
        let mut inv = BTreeMap::new();
        for (k, v) in &self.0 {
            if inv.insert(v.clone(), k.clone()).is_some() {
                return None;
            }
        }
        Some(VarMap(inv))
    }

    pub fn restrict(&self, vars: &BTreeSet<Var>) -> VarMap {
        VarMap(
            self.0
                .iter()
                .filter(|(v, _)| vars.contains(*v))
                .map(|(a, b)| (a.clone(), b.clone()))
                .collect(),
        )
    }

    pub fn as_map(&self) -> &BTreeMap<Var, Var> {
        &self.0
    }
}

impl fmt::Debug for VarMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map().entries(self.0.iter()).finish()
    }
}

impl fmt::Display for VarMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (k, v)) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{k}->{v}")?;
        }
        f.write_str("}")
    }
}

impl FromIterator<(Var, Var)> for VarMap {
    fn from_iter<I: IntoIterator<Item = (Var, Var)>>(iter: I) -> Self {
        VarMap(iter.into_iter().collect())
    }
}

/// A classical conjunctive query `H <- B`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct ConjunctiveQuery {
    head: Atom,
    body: BTreeSet<Atom>,
}

impl ConjunctiveQuery {
    pub fn new(head: Atom, body: impl IntoIterator<Item = Atom>) -> Result<Self> {
        let body: BTreeSet<Atom> = body.into_iter().collect();
        check_body(&head.pred, &body)?;
        let bvars = vars_of(&body);
        if let Some(v) = head.args.iter().find(|v| !bvars.contains(*v)) {
            return Err(Error::UnsafeVariable(v.to_string()));
        }
        Ok(ConjunctiveQuery { head, body })
    }

    pub fn head(&self) -> &Atom {
        &self.head
    }

    pub fn body(&self) -> &BTreeSet<Atom> {
        &self.body
    }
}

impl fmt::Display for ConjunctiveQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} <- ", self.head)?;
        write_sep(f, &self.body.iter().collect::<Vec<_>>(), ", ")?;
        f.write_str(".")
    }
}

impl fmt::Debug for ConjunctiveQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl Serialize for ConjunctiveQuery {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

fn check_body(head_pred: &Symbol, body: &BTreeSet<Atom>) -> Result<()> {
    if body.is_empty() {
        return Err(Error::EmptyBody);
    }
    let mut arities = Arities::new();
    for a in body {
        if &a.pred == head_pred {
            return Err(Error::HeadPredicateInBody(a.pred.to_string()));
        }
        arities.check(&a.pred, a.arity())?;
    }
    Ok(())
}

/// A sifo CQ `T(x̄, f(z̄)) <- B`, with the function term at `func_pos` among
/// the head arguments.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct SifoQuery {
    head_pred: Symbol,
    distinguished: Vec<Var>,
    func: Symbol,
    creation: Vec<Var>,
    func_pos: usize,
    body: BTreeSet<Atom>,
}

impl SifoQuery {
    pub fn new(
        head_pred: impl Into<Symbol>,
        distinguished: Vec<Var>,
        func: impl Into<Symbol>,
        creation: Vec<Var>,
        func_pos: usize,
        body: impl IntoIterator<Item = Atom>,
    ) -> Result<Self> {
        let head_pred = head_pred.into();
        let body: BTreeSet<Atom> = body.into_iter().collect();
        if func_pos > distinguished.len() {
            return Err(Error::FunctionPosition {
                position: func_pos,
                arity: distinguished.len() + 1,
            });
        }
        check_body(&head_pred, &body)?;
        let bvars = vars_of(&body);
        if let Some(v) = distinguished
            .iter()
            .chain(creation.iter())
            .find(|v| !bvars.contains(*v))
        {
            return Err(Error::UnsafeVariable(v.to_string()));
        }
        Ok(SifoQuery {
            head_pred,
            distinguished,
            func: func.into(),
            creation,
            func_pos,
            body,
        })
    }

    /// Shorthand for a query with the function term in the last position.
    pub fn with_last_function(
        head_pred: &str,
        distinguished: &[&str],
        func: &str,
        creation: &[&str],
        body: impl IntoIterator<Item = Atom>,
    ) -> Result<Self> {
        SifoQuery::new(
            head_pred,
            distinguished.iter().map(Var::new).collect(),
            func,
            creation.iter().map(Var::new).collect(),
            distinguished.len(),
            body,
        )
    }

    pub fn head_predicate(&self) -> &Symbol {
        &self.head_pred
    }

    pub fn distinguished(&self) -> &[Var] {
        &self.distinguished
    }

    pub fn function(&self) -> &Symbol {
        &self.func
    }

    pub fn function_arity(&self) -> usize {
        self.creation.len()
    }

    pub fn creation(&self) -> &[Var] {
        &self.creation
    }

    pub fn function_position(&self) -> usize {
        self.func_pos
    }

    pub fn head_arity(&self) -> usize {
        self.distinguished.len() + 1
    }

    pub fn body(&self) -> &BTreeSet<Atom> {
        &self.body
    }

    /// `var(B)`
    pub fn vars(&self) -> BTreeSet<Var> {
        vars_of(&self.body)
    }

    /// `X`
    pub fn distinguished_set(&self) -> BTreeSet<Var> {
        self.distinguished.iter().cloned().collect()
    }

    /// `Z`
    pub fn creation_set(&self) -> BTreeSet<Var> {
        self.creation.iter().cloned().collect()
    }

    /// Predicate arities used by the body.
    pub fn schema(&self) -> BTreeMap<Symbol, usize> {
        self.body
            .iter()
            .map(|a| (a.pred.clone(), a.arity()))
            .collect()
    }

    /// Head terms in positional order.
    pub fn head_terms(&self) -> Vec<Term> {
        let mut terms: Vec<Term> = self.distinguished.iter().cloned().map(Term::Var).collect();
        terms.insert(
            self.func_pos,
            Term::App(
                self.func.clone(),
                self.creation.iter().cloned().map(Term::Var).collect(),
            ),
        );
        terms
    }

    /// Same query with a different function term.
    pub fn with_function(&self, func: impl Into<Symbol>, creation: Vec<Var>) -> Result<Self> {
        SifoQuery::new(
            self.head_pred.clone(),
            self.distinguished.clone(),
            func,
            creation,
            self.func_pos,
            self.body.iter().cloned(),
        )
    }

    /// Applies a variable renaming everywhere. Non-injective renamings are
    /// allowed; the result is revalidated.
    pub fn rename(&self, map: &VarMap) -> Result<Self> {
        SifoQuery::new(
            self.head_pred.clone(),
            map.apply_tuple(&self.distinguished),
            self.func.clone(),
            map.apply_tuple(&self.creation),
            self.func_pos,
            map.apply_all(&self.body),
        )
    }
}

impl fmt::Display for SifoQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(", self.head_pred)?;
        write_list(f, &self.head_terms())?;
        f.write_str(") <- ")?;
        write_sep(f, &self.body.iter().collect::<Vec<_>>(), ", ")?;
        f.write_str(".")
    }
}

impl fmt::Debug for SifoQuery {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl Serialize for SifoQuery {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

/// A parsed but not yet validated atom.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawAtom {
    pub pred: Symbol,
    pub args: Vec<Term>,
}

/// A parsed but not yet validated rule `head <- body`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawRule {
    pub head: RawAtom,
    pub body: Vec<RawAtom>,
}

fn flat_var(t: &Term) -> Result<Var> {
    match t {
        Term::Var(v) => Ok(v.clone()),
        Term::Const(c) => Err(Error::ConstantInRule(c.to_string())),
        Term::App(..) => Err(Error::NestedTerm(t.to_string())),
    }
}

/// Validates the structure of a raw rule and builds the sifo query.
pub fn validate_sifo(raw: &RawRule) -> Result<SifoQuery> {
    let mut arities = Arities::new();
    validate_sifo_with(raw, &mut arities)
}

/// As [`validate_sifo`], checking arities against those seen in earlier rules.
pub fn validate_sifo_with(raw: &RawRule, arities: &mut Arities) -> Result<SifoQuery> {
    let mut func = None;
    let mut distinguished = Vec::new();
    for (i, t) in raw.head.args.iter().enumerate() {
        match t {
            Term::App(sym, args) => {
                if func.is_some() {
                    return Err(Error::MultipleFunctions);
                }
                let creation = args.iter().map(flat_var).collect::<Result<Vec<_>>>()?;
                func = Some((i, sym.clone(), creation));
            }
            other => distinguished.push(flat_var(other)?),
        }
    }
    let (func_pos, func, creation) = func.ok_or(Error::NoFunction)?;

    let mut body = Vec::with_capacity(raw.body.len());
    for a in &raw.body {
        let args = a.args.iter().map(flat_var).collect::<Result<Vec<_>>>()?;
        body.push(Atom::new(a.pred.clone(), args));
    }

    arities.check(&raw.head.pred, raw.head.args.len())?;
    arities.check(&func, creation.len())?;
    for a in &body {
        arities.check(&a.pred, a.arity())?;
    }
    SifoQuery::new(
        raw.head.pred.clone(),
        distinguished,
        func,
        creation,
        func_pos,
        body,
    )
}

/// Name of the constant a variable turns into when a body is read as an
/// instance.
pub fn frozen(v: &Var) -> Const {
    Const::new(format!("{FROZEN_PREFIX}{v}"))
}

/// Reads a set of atoms as an instance, each variable `v` becoming the
/// constant `frz:v`.
pub fn freeze<'a>(body: impl IntoIterator<Item = &'a Atom>) -> Instance {
    let mut inst = Instance::new();
    for a in body {
        inst.insert_unchecked(Fact {
            pred: a.pred.clone(),
            args: a.args.iter().map(frozen).collect(),
        });
    }
    inst
}

/// A copy `v^tag` of a variable. The caret keeps copies apart from any
/// variable a rule can spell.
pub(crate) fn tagged(v: &Var, tag: impl fmt::Display) -> Var {
    Var::new(format!("{v}^{tag}"))
}

/// A relation name that does not occur in `taken`, derived from `base`.
pub(crate) fn fresh_symbol(base: &str, taken: &BTreeSet<Symbol>) -> Symbol {
    let mut name = base.to_string();
    while taken.contains(&Symbol::new(&name)) {
        name.push('_');
    }
    Symbol::new(name)
}

/// The flattening `T̂(x̄, z̄) <- B` of a sifo query.
pub fn flatten(q: &SifoQuery) -> ConjunctiveQuery {
    flatten_with(q, q.creation())
}

pub(crate) fn flatten_with(q: &SifoQuery, creation: &[Var]) -> ConjunctiveQuery {
    let taken = q.body.iter().map(|a| a.pred.clone()).collect();
    let pred = fresh_symbol(&format!("{}_hat", q.head_pred), &taken);
    let head = Atom::new(pred, q.distinguished.iter().chain(creation.iter()).cloned());
    ConjunctiveQuery::new(head, q.body.iter().cloned()).expect("flattening of a valid query")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn atom(p: &str, args: &[&str]) -> Atom {
        Atom::new(p, args.iter().map(Var::new))
    }

    fn var(v: &str) -> Term {
        Term::Var(Var::new(v))
    }

    fn raw(head: (&str, Vec<Term>), body: &[(&str, &[&str])]) -> RawRule {
        RawRule {
            head: RawAtom {
                pred: head.0.into(),
                args: head.1,
            },
            body: body
                .iter()
                .map(|(p, a)| RawAtom {
                    pred: (*p).into(),
                    args: a.iter().map(|v| var(v)).collect(),
                })
                .collect(),
        }
    }

    #[test]
    fn validates_family_query() {
        let r = raw(
            (
                "Family",
                vec![var("c"), Term::App("f".into(), vec![var("x"), var("y")])],
            ),
            &[("Mother", &["c", "x"]), ("Father", &["c", "y"])],
        );
        let q = validate_sifo(&r).unwrap();
        assert_eq!(q.distinguished(), &[Var::new("c")]);
        assert_eq!(q.creation(), &[Var::new("x"), Var::new("y")]);
        assert_eq!(q.function_position(), 1);
        assert_eq!(q.head_arity(), 2);
    }

    #[test]
    fn validation_errors() {
        let f = |args: Vec<Term>| Term::App("f".into(), args);
        let cases = vec![
            (
                raw(("T", vec![var("x")]), &[("R", &["x"])]),
                Error::NoFunction,
            ),
            (
                raw(("T", vec![f(vec![var("x")]), f(vec![])]), &[("R", &["x"])]),
                Error::MultipleFunctions,
            ),
            (
                raw(("T", vec![f(vec![f(vec![var("x")])])]), &[("R", &["x"])]),
                Error::NestedTerm("f(x)".into()),
            ),
            (
                raw(
                    ("T", vec![var("w"), f(vec![var("x")])]),
                    &[("R", &["x", "y", "z"])],
                ),
                Error::UnsafeVariable("w".into()),
            ),
            (
                raw(("T", vec![f(vec![var("x")])]), &[("T", &["x"])]),
                Error::HeadPredicateInBody("T".into()),
            ),
            (
                raw(
                    ("T", vec![f(vec![var("x")])]),
                    &[("R", &["x"]), ("R", &["x", "y"])],
                ),
                Error::ArityClash {
                    name: "R".into(),
                    expected: 1,
                    found: 2,
                },
            ),
            (
                raw(
                    ("T", vec![Term::Const(Const::new("a")), f(vec![])]),
                    &[("R", &["x"])],
                ),
                Error::ConstantInRule("a".into()),
            ),
        ];
        for (r, expected) in cases {
            assert_eq!(validate_sifo(&r).unwrap_err(), expected);
        }
    }

    #[test]
    fn head_function_arity_clash_with_relation() {
        let r = raw(
            ("T", vec![var("x"), Term::App("R".into(), vec![var("x")])]),
            &[("R", &["x", "y"])],
        );
        assert!(matches!(
            validate_sifo(&r).unwrap_err(),
            Error::ArityClash { .. }
        ));
    }

    #[test]
    fn flatten_examples() {
        let q =
            SifoQuery::with_last_function("T", &["x"], "f", &["y"], [atom("R", &["x", "y", "z"])])
                .unwrap();
        assert_eq!(flatten(&q).to_string(), "T_hat(x,y) <- R(x,y,z).");
        let q = SifoQuery::with_last_function(
            "Family",
            &["c"],
            "f",
            &["x", "y"],
            [atom("Mother", &["c", "x"]), atom("Father", &["c", "y"])],
        )
        .unwrap();
        assert_eq!(
            flatten(&q).to_string(),
            "Family_hat(c,x,y) <- Father(c,y), Mother(c,x)."
        );
        let q =
            SifoQuery::with_last_function("T", &["x"], "f", &["x"], [atom("R", &["x", "y", "z"])])
                .unwrap();
        assert_eq!(flatten(&q).to_string(), "T_hat(x,x) <- R(x,y,z).");
    }

    #[test]
    fn flatten_avoids_body_predicates() {
        let q =
            SifoQuery::with_last_function("T", &["x"], "f", &[], [atom("T_hat", &["x"])]).unwrap();
        assert_eq!(flatten(&q).head().pred.as_str(), "T_hat_");
    }

    #[test]
    fn freeze_examples() {
        let i = freeze(&[atom("R", &["x", "y", "z"])]);
        assert_eq!(i.len(), 1);
        assert!(i.contains(&Fact::new("R", ["frz:x", "frz:y", "frz:z"].map(Const::new))));
        let i = freeze(&[atom("Mother", &["c", "x"]), atom("Father", &["c", "y"])]);
        assert_eq!(i.len(), 2);
        assert_eq!(i.adom().len(), 3);
        assert!(freeze(&[]).is_empty());
    }

    #[test]
    fn instance_arity_and_set_semantics() {
        let mut i = Instance::new();
        assert!(i
            .insert(Fact::new("R", ["a", "b"].map(Const::new)))
            .unwrap());
        assert!(!i
            .insert(Fact::new("R", ["a", "b"].map(Const::new)))
            .unwrap());
        assert!(i.insert(Fact::new("R", ["a"].map(Const::new))).is_err());
        assert_eq!(i.tuples(&"R".into()).count(), 1);
        assert_eq!(i.tuples(&"S".into()).count(), 0);
    }

    #[test]
    fn const_rendering_quotes_non_identifiers() {
        assert_eq!(Const::new("anne").to_string(), "anne");
        assert_eq!(Const::new("@1").to_string(), "\"@1\"");
        assert_eq!(Const::new("a\"b").to_string(), "\"a\\\"b\"");
    }
}
