use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pedcoal"))
}

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("pedcoal-cli-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&d);
    d
}

fn run(args: &[&str], out: &Path) -> i32 {
    bin().args(args).arg("--out").arg(out).output().unwrap().status.code().unwrap()
}

#[test]
fn bad_parameters_exit_with_2() {
    let out = scratch("bad");
    assert_eq!(run(&["quenched", "--seed", "1", "--bigN", "10", "--n", "50"], &out), 2);
    assert_eq!(run(&["sfs", "--seed", "1", "--psi", "1.5", "--loci", "10"], &out), 2);
    assert_eq!(run(&["quenched", "--bigN", "10"], &out), 2);

    let cfg = out.join("bad.toml");
    fs::create_dir_all(&out).unwrap();
    fs::write(&cfg, "seed = 1\nno_such_key = 3\n").unwrap();
    assert_eq!(run(&["pedigree", "--config", cfg.to_str().unwrap()], &out), 2);
}

#[test]
fn selftest_passes() {
    let out = scratch("selftest");
    assert_eq!(run(&["selftest", "--seed", "1"], &out), 0);
    assert!(out.join("manifest.json").exists());
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let cases: [&[&str]; 3] = [
        &["quenched", "--seed", "5", "--bigN", "100", "--n", "5", "--loci", "150"],
        &["sfs", "--seed", "5", "--psi", "0.5", "--lambda", "1", "--n", "10", "--pedigrees", "3", "--loci", "200"],
        &["vardecomp", "--seed", "5", "--psi", "0.5", "--n", "10", "--pedigrees", "8", "--loci", "20", "--reps", "200"],
    ];
    for (k, args) in cases.iter().enumerate() {
        let a = scratch(&format!("t1-{k}"));
        let b = scratch(&format!("t3-{k}"));
        let mut one = args.to_vec();
        one.extend(["--threads", "1"]);
        let mut three = args.to_vec();
        three.extend(["--threads", "3"]);
        assert_eq!(run(&one, &a), 0);
        assert_eq!(run(&three, &b), 0);
        for f in fs::read_dir(&a).unwrap() {
            let name = f.unwrap().file_name();
            if name == "manifest.json" {
                continue;
            }
            assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap(), "{args:?} {name:?}");
        }
        let manifest = |d: &Path| -> serde_json::Value { serde_json::from_slice(&fs::read(d.join("manifest.json")).unwrap()).unwrap() };
        let (ma, mb) = (manifest(&a), manifest(&b));
        assert_eq!(ma["config_digest"], mb["config_digest"]);
        assert_eq!(ma["results"], mb["results"]);
    }
}
