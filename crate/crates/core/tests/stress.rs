use std::sync::mpsc;
use std::thread;
use std::time::Duration;

use oidcheck::entail::decide_logical_equiv;
use oidcheck::oid_equiv::decide_oid_equiv;
use oidcheck::parser::parse_rule;

fn within<T: Send + 'static>(secs: u64, f: impl FnOnce() -> T + Send + 'static) -> T {
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        let _ = tx.send(f());
    });
    rx.recv_timeout(Duration::from_secs(secs))
        .expect("decision exceeded its time budget")
}

/// A directed cycle over `n` creation variables, rotated by one step in the
/// second query, so the only witnesses are full rotations.
fn cycle_pair(n: usize) -> (String, String) {
    let vs: Vec<String> = (0..n).map(|i| format!("u{i}")).collect();
    let edges = |shift: usize| {
        (0..n)
            .map(|i| format!("E({},{})", vs[(i + shift) % n], vs[(i + shift + 1) % n]))
            .collect::<Vec<_>>()
            .join(", ")
    };
    let head = |f: &str| format!("T({f}({}))", vs.join(","));
    (
        format!("{} <- {}, L({}).", head("f"), edges(0), vs[0]),
        format!("{} <- {}, L({}).", head("g"), edges(0), vs[1]),
    )
}

#[test]
fn rotated_cycles_decide_quickly() {
    for n in [4, 6, 7] {
        let (a, b) = cycle_pair(n);
        let (q, qp) = (parse_rule(&a).unwrap(), parse_rule(&b).unwrap());
        let d = within(20, move || decide_oid_equiv(&q, &qp).unwrap());
        assert!(d.equivalent(), "n = {n}");
    }
}

#[test]
fn cycle_against_path_refuted_quickly() {
    let (a, _) = cycle_pair(6);
    let path = "T(g(u0,u1,u2,u3,u4,u5)) <- E(u0,u1), E(u1,u2), E(u2,u3), E(u3,u4), E(u4,u5), E(u5,u0), L(u0), L(u3).";
    let (q, qp) = (parse_rule(&a).unwrap(), parse_rule(path).unwrap());
    let (d, le) = within(20, move || {
        (
            decide_oid_equiv(&q, &qp).unwrap(),
            decide_logical_equiv(&q, &qp).unwrap(),
        )
    });
    assert!(!d.equivalent());
    assert!(!le.equivalent);
}
