use selcert::oracle::{run_grid, GridCaps};
use selcert::Exec;

#[test]
fn default_grid_passes() {
    let report = run_grid(&GridCaps::default(), false, Exec::default()).unwrap();
    for e in report
        .entries
        .iter()
        .filter(|e| !(e.delta_ok && e.pi_ok && e.tight_ok))
    {
        eprintln!(
            "{} closed={} exact={} notes={:?}",
            e.instance, e.delta_closed, e.delta_exact, e.notes
        );
    }
    assert!(report.passed());
    assert!(report.max_abs_error <= 1e-9);
}

#[test]
fn perturbed_pi_fails_grid() {
    let report = run_grid(&GridCaps::default(), true, Exec::default()).unwrap();
    assert!(report.pi_failures > 0);
}

#[test]
fn oversized_caps_are_refused() {
    let caps = GridCaps {
        max_n: 9,
        ..GridCaps::default()
    };
    assert!(run_grid(&caps, false, Exec::Sequential).is_err());
}
