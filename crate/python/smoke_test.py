"""Smoke test for the pyoidcheck extension module.

Build it first, e.g. `pip install --no-build-isolation ./crates/python`
or `maturin develop -m crates/python/Cargo.toml`.
"""

import pyoidcheck as oc

FAMILY = "Family(c,f(x,y)) <- Mother(c,x), Father(c,y)."
FAMILY2 = "Family(c,g(x,y,x)) <- Mother(c,x), Father(c,y)."
TABLE = """
Mother(beth,anne). Mother(ben,anne). Mother(eric,claire).
Mother(emma,diana). Mother(dave,diana). Father(beth,adam). Father(ben,adam).
Father(eric,carl). Father(emma,carl).
"""


def main():
    q, q2 = oc.Query(FAMILY), oc.Query(FAMILY2)
    inst = oc.Instance(TABLE)
    assert q.distinguished == ["c"] and q.creation == ["x", "y"]
    assert q.eval(inst) == [
        "Family(ben,f(anne,adam)).",
        "Family(beth,f(anne,adam)).",
        "Family(emma,f(diana,carl)).",
        "Family(eric,f(claire,carl)).",
    ]
    assert len(q.chase(inst)) == 4
    assert oc.results_isomorphic(q, q2, inst)

    d = oc.decide_oid_equiv(q, q2)
    assert d["verdict"] == "equivalent", d

    a = oc.Query("T(x,f(y)) <- R(x,y,z).")
    b = oc.Query("T(x,g(x,y)) <- R(x,y,z).")
    d = oc.decide_oid_equiv(a, b)
    assert d["verdict"] == "not-equivalent"
    assert len(d["refutation"]["counterexample"]) == 2
    assert oc.decide_entails(a, b)["verdict"] == "entails"
    back = oc.decide_entails(b, a)
    assert back["verdict"] == "not-entails"
    assert len(back["counterexample"]["source"]) == 2

    narrow = oc.Query("T(x,f(x)) <- R(x,y,z).")
    wide = oc.Query("T(x,g(x,y,z)) <- R(x,y,z).")
    assert oc.logically_equivalent(narrow, wide)
    assert not oc.oid_equivalent(narrow, wide)

    j3 = oc.Instance("Family(beth,jones). Family(ben,murphy). Family(eric,simpson). Family(emma,smith).")
    r = oc.satisfies(inst, j3, q)
    assert not r["satisfied"] and r["violating_group"]["key"] == ["anne", "adam"]

    assert str(oc.gen_primitive("add", [2])) == "T(x,y,f(x,y)) <- B(x,y)."
    assert str(oc.gen_primitive("gav", [4], skolem="key", key=[1])) == "T(x,y,f(x)) <- B(x,y,z,w)."
    assert oc.gen_random(3) == oc.gen_random(3)

    try:
        oc.Query("T(x <- R(x).")
    except ValueError:
        pass
    else:
        raise AssertionError("malformed rule accepted")

    print("pyoidcheck smoke test passed")


if __name__ == "__main__":
    main()
