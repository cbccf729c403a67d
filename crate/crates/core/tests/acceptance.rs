use std::io::Write;

use symdyn::{suite, Budget};

#[test]
fn acceptance() {
    let results = suite::run_all(&Budget::from_env());
    // Written to the stderr handle directly so the lines survive output capture.
    let mut err = std::io::stderr().lock();
    for r in &results {
        let mark = if r.passed { "PASS" } else { "FAIL" };
        writeln!(err, "[{mark}] {:>2} {} ({} ms): {}", r.id, r.name, r.elapsed_ms, r.detail).unwrap();
    }
    let failed: Vec<usize> = results.iter().filter(|r| !r.passed).map(|r| r.id).collect();
    assert_eq!(results.len(), 12);
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
