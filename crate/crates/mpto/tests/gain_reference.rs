//! Heat-problem gain curves at n = 1e4 against the reference tables in `data/`.

use mpto::perf::gain_problem1;
use mpto::sparse::Backend;

fn table(name: &str) -> Vec<(f64, f64)> {
    let path = format!("{}/tests/data/{name}", env!("CARGO_MANIFEST_DIR"));
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let mut it = l.split_whitespace().map(|v| v.parse::<f64>().unwrap());
            (it.next().unwrap(), it.next().unwrap())
        })
        .collect()
}

fn rel(a: f64, b: f64) -> f64 {
    if b == 0.0 { a.abs() } else { (a - b).abs() / b.abs() }
}

#[test]
fn iterative_curve() {
    let rows = table("gain_iterative_n1e4.tsv");
    assert_eq!(rows.len(), 50);
    for &(m, want) in &rows {
        let got = gain_problem1(Backend::Iterative, 1e4, m);
        let tol = if m <= 100.0 { 0.01 } else { 0.10 };
        assert!(rel(got, want) <= tol, "m={m}: {got} vs {want}");
    }
    assert!((gain_problem1(Backend::Iterative, 1e4, 91.0298177991522) - 90.8855).abs() < 1e-3);
}

#[test]
fn direct_curve() {
    let rows = table("gain_direct_n1e4.tsv");
    assert_eq!(rows.len(), 50);
    for &(m, want) in &rows {
        let got = gain_problem1(Backend::Direct, 1e4, m);
        let tol = if m <= 2.0 { 0.005 } else { 0.10 };
        assert!(rel(got, want) <= tol, "m={m}: {got} vs {want}");
    }
}
