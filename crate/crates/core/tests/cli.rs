use std::process::Command;

fn multiprime(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_multiprime"))
        .args(args)
        .output()
        .unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8(out.stdout).unwrap(),
    )
}

#[test]
fn eval_ten_thousand_digits_matches_reference() {
    let (code, fast) = multiprime(&[
        "eval", "--func", "exp", "--x", "sqrt2-1", "--digits", "10000", "--n", "13",
    ]);
    assert_eq!(code, 0);
    let (_, slow) = multiprime(&[
        "eval", "--func", "exp", "--x", "sqrt2-1", "--digits", "10000", "--n", "0",
    ]);
    assert_eq!(fast, slow);
    assert_eq!(fast.trim().len(), 10002);
}

#[test]
fn eval_reparse_plus_ten_digits() {
    for f in ["exp", "log", "sin", "cos", "tan", "atan"] {
        let (_, a) = multiprime(&["eval", "--func", f, "--x", "1.7", "--digits", "1200"]);
        let (_, b) = multiprime(&["eval", "--func", f, "--x", "1.7", "--digits", "1210"]);
        let (a, b) = (a.trim(), b.trim());
        let n = a.len() - 1;
        assert_eq!(a[..n], b[..n], "{f}");
    }
}

#[test]
fn exit_codes() {
    assert_eq!(multiprime(&["eval", "--func", "exp"]).0, 1);
    assert_eq!(multiprime(&["eval", "--func", "log", "--x", "0"]).0, 2);
    assert_eq!(
        multiprime(&["eval", "--func", "tan", "--x", "0", "--digits", "5"]),
        (0, "0.00000\n".into())
    );
}

#[test]
fn verify_all_builtin_rows() {
    let (code, out) = multiprime(&["verify-machin"]);
    assert_eq!(code, 0);
    assert_eq!(out.lines().filter(|l| l.contains("PASS")).count(), 47);
}

#[test]
fn find_three_primes() {
    let (code, out) = multiprime(&[
        "find-machin",
        "--kind",
        "log",
        "--primes",
        "2,3,5",
        "--x-max",
        "10000",
    ]);
    assert_eq!(code, 0);
    assert!(out.contains("X=31,49,161"));
    assert!(out.contains("mu=1.71531"));
    let (code, out) = multiprime(&[
        "find-machin",
        "--kind",
        "atan",
        "--primes",
        "2,5,13",
        "--x-max",
        "1000",
    ]);
    assert_eq!(code, 0);
    assert!(out.contains("X=18,57,239"), "{out}");
}

#[test]
fn gen_tables_worked_example() {
    let (code, out) = multiprime(&["gen-tables", "--kind", "log", "--n", "13", "--r", "100"]);
    assert_eq!(code, 0);
    assert!(out.contains("relations: 32"));
    assert!(out.contains("max r: 100"));
    let (_, out) = multiprime(&["gen-tables", "--kind", "atan", "--n", "2", "--r", "14"]);
    let eps: f64 = out
        .lines()
        .find_map(|l| l.strip_prefix("smallest eps: "))
        .unwrap()
        .split_whitespace()
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert!((1e-6..1e-4).contains(&eps.abs()), "{eps}");
}
