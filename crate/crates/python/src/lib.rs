//! Python bindings: rules and instances as classes, decisions as dicts.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use serde::Serialize;

use oidcheck::entail::{decide_entails as entails, decide_logical_equiv};
use oidcheck::eval::{chase as chase_query, eval_ocq};
use oidcheck::fixtures::{
    gen_primitive as primitive, gen_random_sifo, PrimitiveSpec, RandomParams, SkolemStrategy,
};
use oidcheck::model::{flatten, Instance as CoreInstance, SifoQuery};
use oidcheck::oid_equiv::decide_oid_equiv as oid_equiv;
use oidcheck::oracle::{oid_isomorphic as isomorphic, satisfies_sotgd};
use oidcheck::parser::{
    parse_instance, parse_rule, serialize_extended_instance, serialize_instance,
};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Hands a serializable value to Python as plain dicts and lists.
fn to_python<'py>(py: Python<'py>, v: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(v).map_err(value_error)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn lines(text: String) -> Vec<String> {
    text.lines().map(str::to_string).collect()
}

/// A sifo CQ `T(x̄, f(z̄)) <- B`.
#[pyclass(frozen, module = "pyoidcheck")]
struct Query(SifoQuery);

#[pymethods]
impl Query {
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        parse_rule(text).map(Query).map_err(value_error)
    }

    #[getter]
    fn head_predicate(&self) -> String {
        self.0.head_predicate().to_string()
    }

    #[getter]
    fn distinguished(&self) -> Vec<String> {
        self.0
            .distinguished()
            .iter()
            .map(|v| v.to_string())
            .collect()
    }

    #[getter]
    fn function(&self) -> String {
        self.0.function().to_string()
    }

    #[getter]
    fn creation(&self) -> Vec<String> {
        self.0.creation().iter().map(|v| v.to_string()).collect()
    }

    #[getter]
    fn function_position(&self) -> usize {
        self.0.function_position()
    }

    #[getter]
    fn body(&self) -> Vec<String> {
        self.0.body().iter().map(|a| a.to_string()).collect()
    }

    fn flatten(&self) -> String {
        flatten(&self.0).to_string()
    }

    /// Extended facts of the result, one per line.
    fn eval(&self, instance: &Instance) -> Vec<String> {
        lines(serialize_extended_instance(&eval_ocq(&self.0, &instance.0)))
    }

    fn chase(&self, instance: &Instance) -> Instance {
        Instance(chase_query(&self.0, &instance.0).target)
    }

    fn __str__(&self) -> String {
        self.0.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Query({:?})", self.0.to_string())
    }

    fn __eq__(&self, other: &Query) -> bool {
        self.0 == other.0
    }
}

/// A set of ground facts.
#[pyclass(frozen, module = "pyoidcheck")]
struct Instance(CoreInstance);

#[pymethods]
impl Instance {
    #[new]
    #[pyo3(signature = (text = ""))]
    fn new(text: &str) -> PyResult<Self> {
        parse_instance(text).map(Instance).map_err(value_error)
    }

    fn facts(&self) -> Vec<String> {
        lines(serialize_instance(&self.0))
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn __str__(&self) -> String {
        serialize_instance(&self.0)
    }

    fn __repr__(&self) -> String {
        format!("Instance({:?})", serialize_instance(&self.0))
    }

    fn __eq__(&self, other: &Instance) -> bool {
        self.0 == other.0
    }
}

/// Oid-equivalence decision with witness or refutation.
#[pyfunction]
fn decide_oid_equiv<'py>(py: Python<'py>, q1: &Query, q2: &Query) -> PyResult<Bound<'py, PyAny>> {
    let d = oid_equiv(&q1.0, &q2.0).map_err(value_error)?;
    to_python(py, &d)
}

/// Whether `q1` logically entails `q2`, with witness or counterexample.
#[pyfunction]
fn decide_entails<'py>(py: Python<'py>, q1: &Query, q2: &Query) -> PyResult<Bound<'py, PyAny>> {
    let d = entails(&q1.0, &q2.0).map_err(value_error)?;
    to_python(py, &d)
}

#[pyfunction]
fn logically_equivalent(q1: &Query, q2: &Query) -> PyResult<bool> {
    Ok(decide_logical_equiv(&q1.0, &q2.0)
        .map_err(value_error)?
        .equivalent)
}

#[pyfunction]
fn oid_equivalent(q1: &Query, q2: &Query) -> PyResult<bool> {
    Ok(oid_equiv(&q1.0, &q2.0).map_err(value_error)?.equivalent())
}

/// Satisfaction of a rule read as an SO-tgd by a source/target pair.
#[pyfunction]
fn satisfies<'py>(
    py: Python<'py>,
    source: &Instance,
    target: &Instance,
    query: &Query,
) -> PyResult<Bound<'py, PyAny>> {
    let r = satisfies_sotgd(&source.0, &target.0, &query.0).map_err(value_error)?;
    to_python(py, &r)
}

/// Whether the two results on `instance` are oid-isomorphic.
#[pyfunction]
fn results_isomorphic(q1: &Query, q2: &Query, instance: &Instance) -> bool {
    isomorphic(&eval_ocq(&q1.0, &instance.0), &eval_ocq(&q2.0, &instance.0)).is_some()
}

#[pyfunction]
#[pyo3(signature = (kind, arities, skolem = "all", key = None, seed = 0))]
fn gen_primitive(
    kind: &str,
    arities: Vec<usize>,
    skolem: &str,
    key: Option<Vec<usize>>,
    seed: u64,
) -> PyResult<Query> {
    let skolem = match (skolem, key) {
        ("all", None) => SkolemStrategy::All,
        ("key", Some(k)) => SkolemStrategy::Key(k),
        ("random", None) => SkolemStrategy::Random(seed),
        (s, _) => return Err(value_error(format!("bad skolemization `{s}`"))),
    };
    let spec = PrimitiveSpec {
        kind: kind.parse().map_err(value_error)?,
        skolem,
        arities,
    };
    primitive(&spec).map(Query).map_err(value_error)
}

#[pyfunction]
#[pyo3(signature = (seed, atoms = 3, variables = 5, max_arity = 3))]
fn gen_random(seed: u64, atoms: usize, variables: usize, max_arity: usize) -> PyResult<Query> {
    let params = RandomParams {
        num_atoms: atoms,
        num_vars: variables,
        max_arity,
        ..RandomParams::default()
    };
    gen_random_sifo(seed, &params)
        .map(Query)
        .map_err(value_error)
}

#[pymodule]
fn pyoidcheck(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Query>()?;
    m.add_class::<Instance>()?;
    m.add_function(wrap_pyfunction!(decide_oid_equiv, m)?)?;
    m.add_function(wrap_pyfunction!(decide_entails, m)?)?;
    m.add_function(wrap_pyfunction!(logically_equivalent, m)?)?;
    m.add_function(wrap_pyfunction!(oid_equivalent, m)?)?;
    m.add_function(wrap_pyfunction!(satisfies, m)?)?;
    m.add_function(wrap_pyfunction!(results_isomorphic, m)?)?;
    m.add_function(wrap_pyfunction!(gen_primitive, m)?)?;
    m.add_function(wrap_pyfunction!(gen_random, m)?)?;
    Ok(())
}
