use super::*;
use crate::parser::parse_expression;

fn world(text: &str, leaves: &[(&str, f64, &[(f64, f64)])], domains: &[(&str, &[&str])]) -> World {
    let leaves: BTreeMap<String, (f64, DiscreteDist<f64>)> = leaves
        .iter()
        .map(|&(n, a, d)| (n.to_string(), (a, DiscreteDist::from_points(d.to_vec()))))
        .collect();
    let domains = DomainMap::from_groups(domains.iter().map(|&(n, m)| (n, m.iter().copied())));
    World::new(&parse_expression(text).unwrap(), &leaves, &BTreeMap::new(), &domains).unwrap()
}

const FIXED: &[(f64, f64)] = &[(10.0, 1.0)];

#[test]
fn enumeration_examples() {
    let w = world("Series(A, B)", &[("A", 0.999, FIXED), ("B", 0.995, FIXED)], &[]);
    let r = run_world(&w, &SimConfig::enumerate(Coupling::Independent)).unwrap();
    assert!((r.availability - 0.994005).abs() < 1e-15);
    assert_eq!(r.standard_error, 0.0);
    assert_eq!(r.latency, [LatencyPoint { ms: 20.0, mass: 1.0 }]);

    let w = world("Race(A, B)", &[("A", 0.99, FIXED), ("B", 0.98, FIXED)], &[("d", &["A", "B"])]);
    let r = run_world(&w, &SimConfig::enumerate(Coupling::Comonotone)).unwrap();
    assert!((r.availability - 0.99).abs() < 1e-15);
}

#[test]
fn timeout_semantics() {
    let w = world(
        "Timeout(200ms; Body, Fb)",
        &[("Body", 1.0, &[(100.0, 0.6), (300.0, 0.4)]), ("Fb", 1.0, &[(50.0, 1.0)])],
        &[],
    );
    let r = run_world(&w, &SimConfig::enumerate(Coupling::Independent)).unwrap();
    assert!((r.timeouts[0].q - 0.6).abs() < 1e-15);
    assert_eq!(
        r.latency,
        [LatencyPoint { ms: 100.0, mass: 0.6 }, LatencyPoint { ms: 250.0, mass: 0.4 }]
    );
}

#[test]
fn kofn_takes_kth_fastest_success() {
    let w = world(
        "KofN(2; A, B, C)",
        &[("A", 1.0, &[(1.0, 1.0)]), ("B", 0.5, &[(2.0, 1.0)]), ("C", 1.0, &[(3.0, 1.0)])],
        &[],
    );
    let r = run_world(&w, &SimConfig::enumerate(Coupling::Independent)).unwrap();
    assert_eq!(r.availability, 1.0);
    assert_eq!(
        r.latency,
        [LatencyPoint { ms: 2.0, mass: 0.5 }, LatencyPoint { ms: 3.0, mass: 0.5 }]
    );
}

#[test]
fn config_is_checked() {
    let w = world("A", &[("A", 0.9, FIXED)], &[]);
    let mut cfg = SimConfig::monte_carlo(0, 1, Coupling::Independent);
    assert!(matches!(run_world(&w, &cfg), Err(Error::Config(_))));
    cfg.trials = 10;
    cfg.percentiles = vec![1.0];
    assert!(matches!(run_world(&w, &cfg), Err(Error::Config(_))));
}

#[test]
fn enumeration_limit() {
    let wide: Vec<(f64, f64)> = (0..9).map(|i| (i as f64, 1.0 / 9.0)).collect();
    let names: Vec<String> = (0..8).map(|i| format!("L{i}")).collect();
    let leaves: Vec<(&str, f64, &[(f64, f64)])> = names.iter().map(|n| (n.as_str(), 0.9, &wide[..])).collect();
    let w = world(&format!("Series({})", names.join(", ")), &leaves, &[]);
    assert!(matches!(
        run_world(&w, &SimConfig::enumerate(Coupling::Independent)),
        Err(Error::Resource(_))
    ));
}

#[test]
fn monte_carlo_is_deterministic_and_partition_free() {
    let w = world(
        "Series(A, Race(B, C), Timeout(30ms; D, E))",
        &[
            ("A", 0.99, &[(5.0, 0.5), (9.0, 0.5)]),
            ("B", 0.9, &[(3.0, 0.2), (12.0, 0.8)]),
            ("C", 0.8, &[(4.0, 1.0)]),
            ("D", 0.95, &[(10.0, 0.7), (50.0, 0.3)]),
            ("E", 0.99, &[(1.0, 1.0)]),
        ],
        &[("d", &["B", "C"])],
    );
    let mut cfg = SimConfig::monte_carlo(50_000, 7, Coupling::Comonotone);
    cfg.workers = 1;
    let one = run_world(&w, &cfg).unwrap();
    cfg.workers = 4;
    let four = run_world(&w, &cfg).unwrap();
    assert_eq!(one, four);
    assert_eq!(one, run_world(&w, &cfg).unwrap());
    cfg.seed = 8;
    let other = run_world(&w, &cfg).unwrap();
    assert_ne!(one.availability, other.availability);
    let exact = run_world(&w, &SimConfig::enumerate(Coupling::Comonotone)).unwrap();
    assert!((one.availability - exact.availability).abs() <= 4.0 * one.standard_error);
    assert!((other.availability - exact.availability).abs() <= 4.0 * other.standard_error);
}
