use std::path::Path;
use std::process::{Command, Output};

use rbe_core::actors::FIG1_HIERARCHY;
use tempfile::TempDir;

fn rbe(state: &Path, seed: u64, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rbe"))
        .arg("--state")
        .arg(state)
        .args(args)
        .env("RBE_SEED", seed.to_string())
        .env_remove("RBE_STATE")
        .output()
        .expect("binary runs")
}

fn ok(state: &Path, args: &[&str]) -> Output {
    let out = rbe(state, 11, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Organization A with the 8-role example hierarchy; alice holds r1, bob holds r7.
fn setup(tmp: &TempDir) -> std::path::PathBuf {
    let state = tmp.path().join("state");
    let h = tmp.path().join("fig1.txt");
    std::fs::write(&h, FIG1_HIERARCHY).unwrap();
    ok(&state, &["init-org", "A"]);
    ok(&state, &["add-role", "A", "--from", h.to_str().unwrap()]);
    ok(&state, &["gen-role-params", "A"]);
    for (user, role) in [("alice", "r1"), ("bob", "r7")] {
        ok(&state, &["register-user", "A", user]);
        ok(&state, &["assign-role", "A", user, role]);
    }
    state
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn encrypt_decrypt_round_trip_is_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let state = setup(&tmp);
    let msg: Vec<u8> = (0..=255u8).cycle().take(3000).collect();
    let (m, c, out) = (tmp.path().join("m.bin"), tmp.path().join("c.rbec"), tmp.path().join("out.bin"));
    std::fs::write(&m, &msg).unwrap();
    ok(&state, &["encrypt", "A", "r8", "--in", p(&m), "--out", p(&c)]);
    ok(&state, &["decrypt", "A", "alice", "r1", "--in", p(&c), "--out", p(&out)]);
    assert_eq!(std::fs::read(&out).unwrap(), msg);
    let stdout = ok(&state, &["decrypt", "A", "bob", "r7", "--in", p(&c)]).stdout;
    assert_eq!(stdout, msg);
}

#[test]
fn unqualified_role_and_revocation_exit_2() {
    let tmp = TempDir::new().unwrap();
    let state = setup(&tmp);
    let (m, c) = (tmp.path().join("m"), tmp.path().join("c"));
    std::fs::write(&m, b"quarterly numbers").unwrap();
    ok(&state, &["encrypt", "A", "r5", "--in", p(&m), "--out", p(&c)]);

    let out = rbe(&state, 11, &["decrypt", "A", "bob", "r7", "--in", p(&c)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("UnauthorizedRole"), "{}", stderr(&out));

    ok(&state, &["revoke", "A", "alice"]);
    let out = rbe(&state, 11, &["decrypt", "A", "alice", "r1", "--in", p(&c)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("RevokedUser"), "{}", stderr(&out));
}

#[test]
fn tampered_payload_is_auth_failure() {
    let tmp = TempDir::new().unwrap();
    let state = setup(&tmp);
    let (m, c) = (tmp.path().join("m"), tmp.path().join("c"));
    std::fs::write(&m, b"payload").unwrap();
    ok(&state, &["encrypt", "A", "r8", "--in", p(&m), "--out", p(&c)]);
    let mut bytes = std::fs::read(&c).unwrap();
    let last = bytes.len() - 1;
    bytes[last] ^= 1;
    std::fs::write(&c, bytes).unwrap();
    let out = rbe(&state, 11, &["decrypt", "A", "alice", "r1", "--in", p(&c)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("AuthFailure"), "{}", stderr(&out));
}

#[test]
fn usage_errors_exit_1() {
    let tmp = TempDir::new().unwrap();
    let state = tmp.path().join("s");
    assert_eq!(rbe(&state, 1, &["frobnicate"]).status.code(), Some(1));
    assert_eq!(rbe(&state, 1, &["register-user", "A"]).status.code(), Some(1));
    // No state directory yet.
    assert_eq!(rbe(&state, 1, &["register-user", "A", "u"]).status.code(), Some(1));
    ok(&state, &["init-org", "A"]);
    assert_eq!(rbe(&state, 1, &["add-role", "A", "bad name"]).status.code(), Some(1));
    assert!(rbe(&state, 1, &["--help"]).status.success());
}

#[test]
fn add_role_builds_hierarchy_incrementally() {
    let tmp = TempDir::new().unwrap();
    let state = tmp.path().join("s");
    ok(&state, &["init-org", "A"]);
    ok(&state, &["add-role", "A", "boss"]);
    ok(&state, &["add-role", "A", "staff", "--parent", "boss"]);
    ok(&state, &["add-role", "A", "audit"]);
    let out = rbe(&state, 11, &["add-role", "A", "x", "--parent", "nobody"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("UnknownRole"));
    let out = ok(&state, &["gen-role-params", "A"]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("3 role public keys"));
    let out = rbe(&state, 11, &["add-role", "A", "late"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn multi_org_flow_and_missing_rekey() {
    let tmp = TempDir::new().unwrap();
    let state = setup(&tmp);
    let h = tmp.path().join("fig1.txt");
    for org in ["B", "C"] {
        ok(&state, &["init-org", org]);
        ok(&state, &["add-role", org, "--from", p(&h)]);
        ok(&state, &["gen-role-params", org]);
        ok(&state, &["register-user", org, "carol"]);
        ok(&state, &["assign-role", org, "carol", "r2"]);
    }
    ok(&state, &["link-orgs", "B", "A"]);
    let (m, jb, jc) = (tmp.path().join("m"), tmp.path().join("jb"), tmp.path().join("jc"));
    std::fs::write(&m, b"joint venture").unwrap();
    ok(&state, &["mencrypt", "A", "r4", "B", "r5", "--in", p(&m), "--out", p(&jb)]);
    assert_eq!(ok(&state, &["mdecrypt", "B", "carol", "r2", "--in", p(&jb)]).stdout, b"joint venture");
    assert_eq!(ok(&state, &["decrypt", "A", "alice", "r1", "--in", p(&jb)]).stdout, b"joint venture");

    ok(&state, &["mencrypt", "A", "r4", "C", "r5", "--in", p(&m), "--out", p(&jc)]);
    let out = rbe(&state, 11, &["mdecrypt", "C", "carol", "r2", "--in", p(&jc)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("MissingReKey"), "{}", stderr(&out));
}

#[test]
fn same_seed_gives_identical_ciphertexts() {
    let mut cts = Vec::new();
    for _ in 0..2 {
        let tmp = TempDir::new().unwrap();
        let state = setup(&tmp);
        let (m, c) = (tmp.path().join("m"), tmp.path().join("c"));
        std::fs::write(&m, b"same").unwrap();
        ok(&state, &["encrypt", "A", "r3", "--in", p(&m), "--out", p(&c)]);
        cts.push(std::fs::read(&c).unwrap());
    }
    assert_eq!(cts[0], cts[1]);
}

#[test]
fn cli_performs_no_group_operations_itself() {
    let tmp = TempDir::new().unwrap();
    let state = setup(&tmp);
    let (m, c) = (tmp.path().join("m"), tmp.path().join("c"));
    std::fs::write(&m, b"audit").unwrap();
    for args in [
        vec!["--audit-ops", "encrypt", "A", "r8", "--in", p(&m), "--out", p(&c)],
        vec!["--audit-ops", "decrypt", "A", "alice", "r1", "--in", p(&c)],
        vec!["--audit-ops", "register-user", "A", "dave"],
    ] {
        let out = ok(&state, &args);
        assert!(
            stderr(&out).contains("cli overhead: exp_g1=0 exp_gt=0 pairings=0 mul_g1=0 mul_gt=0 hashes=0"),
            "{args:?}: {}",
            stderr(&out)
        );
    }
}

#[test]
fn run_scenario_text_and_machine() {
    let tmp = TempDir::new().unwrap();
    let state = tmp.path().join("unused");
    let text = ok(&state, &["run-scenario", "fig1-single-org"]);
    let text = String::from_utf8_lossy(&text.stdout);
    assert!(text.contains("residency violations: 0"));
    let machine = ok(&state, &["--format", "machine", "run-scenario", "two-org-consortium"]);
    let v: serde_json::Value = serde_json::from_slice(&machine.stdout).unwrap();
    assert!(!v["steps"].as_array().unwrap().is_empty());
    assert!(v["violations"].as_array().unwrap().is_empty());

    let script = tmp.path().join("leak.rbes");
    std::fs::write(&script, "init-org A\nleak A msk public\n").unwrap();
    let out = rbe(&state, 3, &["run-scenario", p(&script)]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(rbe(&state, 3, &["run-scenario", "no-such-thing"]).status.code(), Some(1));
}

#[test]
fn bench_reads_toml_config() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("bench.toml");
    std::fs::write(&cfg, "iterations = 2\nmax_ancestors = 3\nhierarchy_sizes = [6, 9]\n").unwrap();
    let out = ok(tmp.path(), &["--format", "machine", "bench", "--config", p(&cfg)]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["config"]["iterations"], 2);
    assert_eq!(v["config"]["seed"], 11);
    assert_eq!(v["series"].as_array().unwrap().len(), 3);
    std::fs::write(&cfg, "iterations = 2\nunknown = 1\n").unwrap();
    assert_eq!(rbe(tmp.path(), 1, &["bench", "--config", p(&cfg)]).status.code(), Some(1));
}
