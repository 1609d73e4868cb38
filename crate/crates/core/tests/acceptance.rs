//! Runs every acceptance criterion at full size and prints one line per criterion.

use permanental::suite::{run, Budget, COUNT};

#[test]
fn acceptance_criteria() {
    let mut failed = Vec::new();
    for id in 1..=COUNT {
        let outcome = run(id, Budget::Acceptance).unwrap();
        println!("{outcome}");
        if !outcome.passed {
            failed.push(id);
        }
    }
    println!("{} of {COUNT} criteria pass", COUNT - failed.len());
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
