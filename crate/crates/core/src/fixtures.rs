//! Query generators: the benchmark mapping primitives with their
//! skolemization strategies, and seeded random queries and query pairs for
//! property tests.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{vars_of, Atom, SifoQuery, Var, VarMap};
use crate::normalize::dedupe_creation_vars;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PrimitiveKind {
    /// Copy a relation and add a created attribute.
    Add,
    /// Copy a relation, dropping its last attribute and adding a created one.
    Adl,
    /// Merge two relations on a shared attribute and add a created one.
    Ma,
    /// A plain source relation with two copied attributes.
    GavBase,
}

impl std::str::FromStr for PrimitiveKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "add" => Ok(PrimitiveKind::Add),
            "adl" => Ok(PrimitiveKind::Adl),
            "ma" => Ok(PrimitiveKind::Ma),
            "gav" | "gavbase" | "gav-base" => Ok(PrimitiveKind::GavBase),
            other => Err(Error::InvalidParams(format!("unknown primitive `{other}`"))),
        }
    }
}

/// Which variables feed the function.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum SkolemStrategy {
    /// The primitive's native choice: the copied attributes, or every body
    /// variable for the plain GAV base.
    All,
    /// Body variables at these 1-based positions.
    Key(Vec<usize>),
    /// A uniformly random nonempty set of body variables.
    Random(u64),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PrimitiveSpec {
    pub kind: PrimitiveKind,
    pub skolem: SkolemStrategy,
    /// Source relation arities: one for ADD/ADL/GAV base, two for MA.
    pub arities: Vec<usize>,
}

/// `x, y, z, w, v5, v6, …`
pub fn var_name(i: usize) -> Var {
    const FIRST: [&str; 4] = ["x", "y", "z", "w"];
    match FIRST.get(i) {
        Some(s) => Var::new(s),
        None => Var::new(format!("v{}", i + 1)),
    }
}

fn vars(range: std::ops::Range<usize>) -> Vec<Var> {
    range.map(var_name).collect()
}

/// The sifo CQ for a mapping primitive.
pub fn gen_primitive(spec: &PrimitiveSpec) -> Result<SifoQuery> {
    let want = if spec.kind == PrimitiveKind::Ma { 2 } else { 1 };
    if spec.arities.len() != want || spec.arities.contains(&0) {
        return Err(Error::InvalidParams(format!(
            "{:?} needs {want} positive arities, got {:?}",
            spec.kind, spec.arities
        )));
    }
    let k = spec.arities[0];
    let (body, all_vars, distinguished, native): (Vec<Atom>, Vec<Var>, Vec<Var>, Vec<Var>) =
        match spec.kind {
            PrimitiveKind::GavBase => {
                let vs = vars(0..k);
                let d = vs[..k.min(2)].to_vec();
                (vec![Atom::new("B", vs.clone())], vs.clone(), d, vs)
            }
            PrimitiveKind::Add => {
                let vs = vars(0..k);
                (vec![Atom::new("B", vs.clone())], vs.clone(), vs.clone(), vs)
            }
            PrimitiveKind::Adl => {
                if k < 2 {
                    return Err(Error::InvalidParams("ADL needs arity at least 2".into()));
                }
                let vs = vars(0..k);
                let d = vs[..k - 1].to_vec();
                (vec![Atom::new("B", vs.clone())], vs, d.clone(), d)
            }
            PrimitiveKind::Ma => {
                let k2 = spec.arities[1];
                let vs = vars(0..k + k2 - 1);
                let b = Atom::new("B", vs[..k].to_vec());
                let t = Atom::new("T_src", vs[k - 1..].to_vec());
                (vec![b, t], vs.clone(), vs.clone(), vs)
            }
        };
    let creation = match &spec.skolem {
        SkolemStrategy::All => native,
        SkolemStrategy::Key(idx) => {
            if idx.is_empty() {
                return Err(Error::InvalidParams("empty key".into()));
            }
            idx.iter()
                .map(|&i| {
                    if i == 0 || i > all_vars.len() {
                        Err(Error::InvalidKeyIndex {
                            index: i,
                            arity: all_vars.len(),
                        })
                    } else {
                        Ok(all_vars[i - 1].clone())
                    }
                })
                .collect::<Result<Vec<_>>>()?
        }
        SkolemStrategy::Random(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            loop {
                let pick: Vec<Var> = all_vars
                    .iter()
                    .filter(|_| rng.gen_bool(0.5))
                    .cloned()
                    .collect();
                if !pick.is_empty() {
                    break pick;
                }
            }
        }
    };
    SifoQuery::new(
        "T",
        distinguished.clone(),
        "f",
        creation,
        distinguished.len(),
        body,
    )
}

/// Shape of random queries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RandomParams {
    pub num_atoms: usize,
    pub num_vars: usize,
    pub max_arity: usize,
    pub max_distinguished: usize,
    pub max_creation: usize,
    /// Place the function term at a random head position instead of last.
    pub random_position: bool,
}

impl Default for RandomParams {
    fn default() -> Self {
        RandomParams {
            num_atoms: 3,
            num_vars: 5,
            max_arity: 3,
            max_distinguished: 2,
            max_creation: 3,
            random_position: false,
        }
    }
}

impl RandomParams {
    fn check(&self) -> Result<()> {
        if self.num_atoms == 0 || self.num_vars == 0 || self.max_arity == 0 {
            return Err(Error::InvalidParams(
                "atoms, variables and arity must be positive".into(),
            ));
        }
        Ok(())
    }

    fn schema(&self) -> [(&'static str, usize); 2] {
        [
            ("R", self.max_arity),
            ("S", self.max_arity.saturating_sub(1).max(1)),
        ]
    }
}

fn random_atom(params: &RandomParams, pool: &[Var], rng: &mut impl Rng) -> Atom {
    let (pred, arity) = params.schema()[rng.gen_range(0..2)];
    Atom::new(
        pred,
        (0..arity).map(|_| pool.choose(rng).expect("nonempty pool").clone()),
    )
}

fn random_body(params: &RandomParams, rng: &mut impl Rng) -> BTreeSet<Atom> {
    let pool = vars(0..params.num_vars);
    let n = rng.gen_range(1..=params.num_atoms);
    (0..n).map(|_| random_atom(params, &pool, rng)).collect()
}

fn draw(from: &[Var], max_len: usize, rng: &mut impl Rng) -> Vec<Var> {
    let n = rng.gen_range(0..=max_len);
    (0..n)
        .map(|_| from.choose(rng).expect("nonempty").clone())
        .collect()
}

fn random_sifo(params: &RandomParams, rng: &mut impl Rng) -> SifoQuery {
    let body = random_body(params, rng);
    let bvars: Vec<Var> = vars_of(&body).into_iter().collect();
    let distinguished = draw(&bvars, params.max_distinguished, rng);
    let creation = draw(&bvars, params.max_creation, rng);
    let pos = if params.random_position {
        rng.gen_range(0..=distinguished.len())
    } else {
        distinguished.len()
    };
    SifoQuery::new("T", distinguished, "f", creation, pos, body).expect("drawn from body variables")
}

/// A random valid query, deterministic in `seed`.
pub fn gen_random_sifo(seed: u64, params: &RandomParams) -> Result<SifoQuery> {
    params.check()?;
    Ok(random_sifo(params, &mut ChaCha8Rng::seed_from_u64(seed)))
}

/// Renames every variable through a random bijection onto a pool that
/// overlaps the old names.
pub fn rename_randomly(q: &SifoQuery, rng: &mut impl Rng) -> SifoQuery {
    let old: Vec<Var> = q.vars().into_iter().collect();
    let mut pool: Vec<Var> = old.clone();
    pool.extend((0..old.len()).map(|i| Var::new(format!("r{i}"))));
    pool.shuffle(rng);
    let map: VarMap = old.into_iter().zip(pool).collect();
    q.rename(&map).expect("bijective renaming")
}

/// Rewrites `f(z̄)` into `g(z̄')` where `z̄'` lists the same variables in a
/// random order with random repetitions.
pub fn rewrite_creation(q: &SifoQuery, rng: &mut impl Rng) -> SifoQuery {
    let mut unique: Vec<Var> = q.creation_set().into_iter().collect();
    if unique.is_empty() {
        return q.with_function("g", Vec::new()).expect("valid");
    }
    let extra = rng.gen_range(0..=2);
    for _ in 0..extra {
        let v = unique.choose(rng).expect("nonempty").clone();
        unique.push(v);
    }
    unique.shuffle(rng);
    q.with_function("g", unique).expect("same variables")
}

/// Adds a copy of a body atom whose variables outside `X ∪ Z` are fresh.
pub fn add_redundant_atom(q: &SifoQuery, rng: &mut impl Rng) -> SifoQuery {
    let atoms: Vec<&Atom> = q.body().iter().collect();
    let a = *atoms.choose(rng).expect("nonempty body");
    let keep: BTreeSet<Var> = q
        .distinguished_set()
        .union(&q.creation_set())
        .cloned()
        .collect();
    let taken = q.vars();
    let mut counter = 0;
    let copy = Atom::new(
        a.pred.clone(),
        a.args.iter().map(|v| {
            if keep.contains(v) {
                v.clone()
            } else {
                loop {
                    counter += 1;
                    let c = Var::new(format!("e{counter}"));
                    if !taken.contains(&c) {
                        break c;
                    }
                }
            }
        }),
    );
    let mut body = q.body().clone();
    body.insert(copy);
    SifoQuery::new(
        q.head_predicate().clone(),
        q.distinguished().to_vec(),
        q.function().clone(),
        q.creation().to_vec(),
        q.function_position(),
        body,
    )
    .expect("only adds an atom")
}

/// A query oid-equivalent to `q` by construction: some combination of
/// renaming, creation-tuple rewriting and redundant atoms.
pub fn equivalent_variant(q: &SifoQuery, seed: u64) -> SifoQuery {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = q.clone();
    if rng.gen_bool(0.5) {
        out = add_redundant_atom(&out, &mut rng);
    }
    if rng.gen_bool(0.7) {
        out = rewrite_creation(&out, &mut rng);
    }
    if rng.gen_bool(0.8) {
        out = rename_randomly(&out, &mut rng);
    }
    out
}

/// A small random change to `q` that keeps it valid; the result may or may
/// not be equivalent.
pub fn mutate(q: &SifoQuery, params: &RandomParams, rng: &mut impl Rng) -> SifoQuery {
    let pool = vars(0..params.num_vars);
    for _ in 0..32 {
        let mut body: Vec<Atom> = q.body().iter().cloned().collect();
        let mut distinguished = q.distinguished().to_vec();
        let mut creation = q.creation().to_vec();
        match rng.gen_range(0..6) {
            0 => {
                body.push(random_atom(params, &pool, rng));
            }
            1 if body.len() > 1 => {
                let i = rng.gen_range(0..body.len());
                body.remove(i);
            }
            2 => {
                let i = rng.gen_range(0..body.len());
                if body[i].args.is_empty() {
                    continue;
                }
                let j = rng.gen_range(0..body[i].args.len());
                body[i].args[j] = pool.choose(rng).expect("nonempty").clone();
            }
            3 if !creation.is_empty() => {
                let i = rng.gen_range(0..creation.len());
                creation.remove(i);
            }
            4 => {
                let bvars: Vec<Var> = vars_of(&body).into_iter().collect();
                creation.push(bvars.choose(rng).expect("nonempty").clone());
            }
            5 if !distinguished.is_empty() => {
                let bvars: Vec<Var> = vars_of(&body).into_iter().collect();
                let i = rng.gen_range(0..distinguished.len());
                distinguished[i] = bvars.choose(rng).expect("nonempty").clone();
            }
            _ => continue,
        }
        if let Ok(m) = SifoQuery::new(
            q.head_predicate().clone(),
            distinguished,
            q.function().clone(),
            creation,
            q.function_position(),
            body,
        ) {
            if &m != q {
                return m;
            }
        }
    }
    q.clone()
}

/// A random pair with the same head shape: an equivalent variant, a
/// mutation, or an unrelated query.
pub fn random_pair(seed: u64, params: &RandomParams) -> Result<(SifoQuery, SifoQuery)> {
    params.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = random_sifo(params, &mut rng);
    let qp = match rng.gen_range(0..4) {
        0 => equivalent_variant(&q, rng.gen()),
        1 | 2 => {
            let m = mutate(&q, params, &mut rng);
            if rng.gen_bool(0.5) {
                equivalent_variant(&m, rng.gen())
            } else {
                m
            }
        }
        _ => loop {
            let other = random_sifo(params, &mut rng);
            if other.head_arity() == q.head_arity()
                && other.function_position() == q.function_position()
            {
                break other
                    .with_function("g", other.creation().to_vec())
                    .expect("valid");
            }
        },
    };
    Ok((q, qp))
}

/// A random pair already in normal form: identical `x̄` and duplicate-free
/// `z̄`, bodies over the same variables.
pub fn random_normalized_pair(seed: u64, params: &RandomParams) -> Result<(SifoQuery, SifoQuery)> {
    params.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = dedupe_creation_vars(&random_sifo(params, &mut rng));
    let head: BTreeSet<Var> = q
        .distinguished_set()
        .union(&q.creation_set())
        .cloned()
        .collect();
    let free: Vec<Var> = q
        .creation_set()
        .difference(&q.distinguished_set())
        .cloned()
        .collect();
    loop {
        let body: BTreeSet<Atom> = match rng.gen_range(0..3) {
            0 => {
                // Permute the free creation variables inside the body.
                let mut shuffled = free.clone();
                shuffled.shuffle(&mut rng);
                let pi: VarMap = free.iter().cloned().zip(shuffled).collect();
                pi.apply_all(q.body())
            }
            1 => {
                let m = mutate(&q, params, &mut rng);
                m.body().clone()
            }
            _ => random_body(params, &mut rng),
        };
        let mut body = body;
        if rng.gen_bool(0.3) {
            let pool: Vec<Var> = vars_of(&body).into_iter().collect();
            body.insert(random_atom(params, &pool, &mut rng));
        }
        let bvars = vars_of(&body);
        if !head.is_subset(&bvars) {
            continue;
        }
        let qp = SifoQuery::new(
            q.head_predicate().clone(),
            q.distinguished().to_vec(),
            "g",
            q.creation().to_vec(),
            q.function_position(),
            body,
        )
        .expect("head variables occur in the body");
        return Ok((q, qp));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_sifo;
    use crate::parser::{parse_raw_rules, serialize_rules};

    fn prim(kind: PrimitiveKind, skolem: SkolemStrategy, arities: &[usize]) -> Result<SifoQuery> {
        gen_primitive(&PrimitiveSpec {
            kind,
            skolem,
            arities: arities.to_vec(),
        })
    }

    #[test]
    fn primitives() {
        let s = |q: Result<SifoQuery>| q.unwrap().to_string();
        assert_eq!(
            s(prim(PrimitiveKind::GavBase, SkolemStrategy::All, &[4])),
            "T(x,y,f(x,y,z,w)) <- B(x,y,z,w)."
        );
        assert_eq!(
            s(prim(
                PrimitiveKind::GavBase,
                SkolemStrategy::Key(vec![1]),
                &[4]
            )),
            "T(x,y,f(x)) <- B(x,y,z,w)."
        );
        assert_eq!(
            s(prim(PrimitiveKind::Add, SkolemStrategy::All, &[2])),
            "T(x,y,f(x,y)) <- B(x,y)."
        );
        assert_eq!(
            s(prim(PrimitiveKind::Adl, SkolemStrategy::All, &[2])),
            "T(x,f(x)) <- B(x,y)."
        );
        assert_eq!(
            s(prim(PrimitiveKind::Ma, SkolemStrategy::All, &[2, 2])),
            "T(x,y,z,f(x,y,z)) <- B(x,y), T_src(y,z)."
        );
        assert!(matches!(
            prim(PrimitiveKind::GavBase, SkolemStrategy::Key(vec![5]), &[4]),
            Err(Error::InvalidKeyIndex { index: 5, arity: 4 })
        ));
        let r1 = prim(PrimitiveKind::GavBase, SkolemStrategy::Random(7), &[4]).unwrap();
        let r2 = prim(PrimitiveKind::GavBase, SkolemStrategy::Random(7), &[4]).unwrap();
        assert_eq!(r1, r2);
        assert!(!r1.creation().is_empty());
    }

    #[test]
    fn random_queries_validate_and_repeat() {
        let params = RandomParams::default();
        for seed in 0..200 {
            let q = gen_random_sifo(seed, &params).unwrap();
            assert_eq!(q, gen_random_sifo(seed, &params).unwrap());
            // Round trip through text and structural validation.
            let text = serialize_rules([&q]);
            let raw = parse_raw_rules(&text).unwrap();
            assert_eq!(validate_sifo(&raw[0].1).unwrap(), q);
        }
        let single = RandomParams {
            num_atoms: 1,
            max_arity: 3,
            ..params
        };
        let q = gen_random_sifo(1, &single).unwrap();
        assert_eq!(q.body().len(), 1);
    }

    #[test]
    fn pairs_share_head_shape() {
        let params = RandomParams::default();
        for seed in 0..100 {
            let (q, qp) = random_pair(seed, &params).unwrap();
            assert_eq!(q.head_arity(), qp.head_arity());
            let (q, qp) = random_normalized_pair(seed, &params).unwrap();
            assert_eq!(q.distinguished(), qp.distinguished());
            assert_eq!(q.creation(), qp.creation());
        }
    }
}
