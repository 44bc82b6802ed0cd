use plenumlab::cli::{run_command, THREADS_VAR};

#[test]
fn invalid_thread_cap_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m.csv").display().to_string();
    let args = ["plenumlab", "mask", "--out", out.as_str()];
    std::env::set_var(THREADS_VAR, "0");
    assert_eq!(run_command(args), 2);
    std::env::set_var(THREADS_VAR, "lots");
    assert_eq!(run_command(args), 2);
    std::env::set_var(THREADS_VAR, "4");
    assert_eq!(run_command(args), 0);
}
