//! End-to-end checks of the binary: exit codes, printed values, file
//! round-trips, CSV and SDPA emission.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ranksdp"))
}

fn write(dir: &Path, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn tempdir(tag: &str) -> std::path::PathBuf {
    let d = std::env::temp_dir().join(format!("ranksdp-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}

fn grab(stdout: &str, key: &str) -> String {
    stdout
        .lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("missing key {key} in output:\n{stdout}"))
        .to_string()
}

#[test]
fn phi_identity_4x4() {
    let d = tempdir("phi");
    let f = write(&d, "eye4.mat", "4 4\n1 0 0 0\n0 1 0 0\n0 0 1 0\n0 0 0 1\n");
    let out = bin()
        .args(["phi", "--epsilon", "1"])
        .arg(&f)
        .output()
        .unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    let phi: f64 = grab(&stdout, "phi").parse().unwrap();
    assert!((phi - 2.0).abs() < 1e-9);
}

#[test]
fn phi_zero_and_diag() {
    let d = tempdir("phi2");
    let z = write(&d, "zero.mat", "2 3\n0 0 0\n0 0 0\n");
    let out = bin()
        .args(["phi", "--epsilon", "1"])
        .arg(&z)
        .output()
        .unwrap();
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(grab(&stdout, "phi").parse::<f64>().unwrap(), 0.0);

    let g = write(&d, "diag.mat", "2 2\n3 0\n0 0\n");
    let out = bin()
        .args(["phi", "--epsilon", "1"])
        .arg(&g)
        .output()
        .unwrap();
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!((grab(&stdout, "phi").parse::<f64>().unwrap() - 0.9).abs() < 1e-9);
    assert!((grab(&stdout, "gap_exact").parse::<f64>().unwrap() - 0.1).abs() < 1e-9);
}

#[test]
fn phi_bad_file_exits_2() {
    let d = tempdir("phibad");
    let f = write(&d, "bad.mat", "2 2\n1 2 3\n");
    let out = bin().args(["phi"]).arg(&f).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn rank_identity_and_zero() {
    let d = tempdir("rank");
    let f = write(
        &d,
        "eye5.mat",
        "5 5\n1 0 0 0 0\n0 1 0 0 0\n0 0 1 0 0\n0 0 0 1 0\n0 0 0 0 1\n",
    );
    let out = bin().arg("rank").arg(&f).output().unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(grab(&stdout, "rank"), "5");

    let z = write(&d, "zero.mat", "3 3\n0 0 0\n0 0 0\n0 0 0\n");
    let out = bin().arg("rank").arg(&z).output().unwrap();
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(grab(&stdout, "rank"), "0");
}

#[test]
fn rankmin_zero_forcing_with_csv() {
    let d = tempdir("rankmin");
    let mut problem = String::from("rankmat v1\nkind affine\nshape general 2 2\n");
    for i in 0..2 {
        for j in 0..2 {
            problem.push_str("constraint 0\n");
            for r in 0..2 {
                for c in 0..2 {
                    let v = if (r, c) == (i, j) { 1 } else { 0 };
                    problem.push_str(&format!("{v} "));
                }
                problem.push('\n');
            }
        }
    }
    let f = write(&d, "zero.prob", &problem);
    let csv_path = d.join("traj.csv");
    let out = bin()
        .arg("rankmin")
        .arg(&f)
        .arg("--csv")
        .arg(&csv_path)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(grab(&stdout, "rank_estimate"), "0");
    let csv = std::fs::read_to_string(&csv_path).unwrap();
    assert!(csv.starts_with("stage,epsilon,gamma,trY,trZ,rank_rounded\n"));
    assert!(csv.lines().count() >= 4);
}

#[test]
fn rankmin_nuclear_flag_adds_column() {
    let d = tempdir("rankmin2");
    let problem = "rankmat v1\nkind affine\nshape symmetric 2\npsd true\ntracebox 1 1\n";
    let f = write(&d, "unit.prob", problem);
    let out = bin()
        .arg("rankmin")
        .arg(&f)
        .arg("--nuclear-baseline")
        .output()
        .unwrap();
    let stdout = String::from_utf8(out.stdout).unwrap();
    let nuc: f64 = grab(&stdout, "nuclear_norm").parse().unwrap();
    assert!((nuc - 1.0).abs() < 1e-5);
    let header = stdout
        .lines()
        .find(|l| l.starts_with("stage,"))
        .expect("csv header");
    assert_eq!(header, "stage,epsilon,gamma,trY,trZ,rank_rounded,nuclear");
}

#[test]
fn certify_identity_and_indefinite() {
    let d = tempdir("certify");
    let ident = write(&d, "ident.sys", "3 1\n1 0 0 1 0 1\n");
    let out = bin().arg("certify").arg(&ident).output().unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(grab(&stdout, "verdict"), "certified-zero-only");

    let indef = write(&d, "indef.sys", "2 1\n1 0 -1\n");
    let out = bin().arg("certify").arg(&indef).output().unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(grab(&stdout, "verdict"), "counterexample-found");
    let res: f64 = grab(&stdout, "counterexample_residual").parse().unwrap();
    assert!(res <= 1e-9);
}

#[test]
fn certify_two_matrix_pencil_family() {
    let d = tempdir("certify2");
    // diag(1,1,-1) and diag(1,-1,2)
    let f = write(&d, "pair.sys", "3 2\n1 0 0 1 0 -1\n1 0 0 -1 0 2\n");
    let out = bin().arg("certify").arg(&f).output().unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(grab(&stdout, "verdict"), "certified-zero-only");
    assert!(stdout.contains("pencil="));
}

#[test]
fn certify_sdpa_export_writes_parseable_file() {
    let d = tempdir("sdpa");
    let f = write(&d, "sys.sys", "2 1\n1 0 -1\n");
    let sdpa = d.join("out.dat-s");
    let out = bin()
        .args(["certify", "--epsilon", "0.01"])
        .arg(&f)
        .arg("--sdpa-export")
        .arg(&sdpa)
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = std::fs::read_to_string(&sdpa).unwrap();
    let mut lines = text.lines();
    let m: usize = lines.next().unwrap().parse().unwrap();
    assert!(m > 0);
    let nblocks: usize = lines.next().unwrap().parse().unwrap();
    assert_eq!(nblocks, 2); // 10x10 SDP block + LP block for the box
    assert_eq!(lines.next().unwrap(), "10 -2");
}

#[test]
fn jobs_flag_processes_files_in_order() {
    let d = tempdir("jobs");
    let a = write(&d, "a.mat", "1 1\n1\n");
    let b = write(&d, "b.mat", "2 2\n1 0\n0 1\n");
    let out = bin()
        .args(["phi", "--epsilon", "1", "--jobs", "2"])
        .arg(&a)
        .arg(&b)
        .output()
        .unwrap();
    let stdout = String::from_utf8(out.stdout).unwrap();
    let pos_a = stdout.find("a.mat").unwrap();
    let pos_b = stdout.find("b.mat").unwrap();
    assert!(pos_a < pos_b);
}

#[test]
fn snapshot_files_reparse_bit_identical() {
    let d = tempdir("snap");
    let problem = "rankmat v1\nkind affine\nshape symmetric 2\npsd true\ntracebox 1 1\nconstraint 0\n1 0\n0 -1\n";
    let f = write(&d, "p.prob", problem);
    let snaps = d.join("snaps");
    let out = bin()
        .arg("rankmin")
        .arg(&f)
        .arg("--snapshots")
        .arg(&snaps)
        .arg("--csv")
        .arg(d.join("t.csv"))
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    let first = snaps.join("stage_0.mat");
    let text = std::fs::read_to_string(&first).unwrap();
    // round-trip: parse then re-emit identical text
    let mut toks = text.split_whitespace();
    let r: usize = toks.next().unwrap().parse().unwrap();
    let c: usize = toks.next().unwrap().parse().unwrap();
    let vals: Vec<f64> = toks.map(|t| t.parse().unwrap()).collect();
    assert_eq!(vals.len(), r * c);
    let mut re = format!("{r} {c}\n");
    for i in 0..r {
        let row: Vec<String> = (0..c).map(|j| format!("{}", vals[i * c + j])).collect();
        re.push_str(&row.join(" "));
        re.push('\n');
    }
    assert_eq!(text, re);
}

#[test]
fn certify_inconclusive_exits_1() {
    // x1^2 - x2^2 = 0 and 2 x1 x2 = 0 force x = 0, but no mu makes
    // mu1 diag(1,-1) + mu2 offdiag(1) definite (its determinant is
    // -mu1^2 - mu2^2), and the relaxation bound cannot reach the
    // threshold at the default parameters: the certifier must come back
    // inconclusive rather than guess.
    let d = tempdir("inconclusive");
    let f = write(&d, "hard.sys", "2 2\n1 0 -1\n0 1 0\n");
    let out = bin()
        .args(["certify", "--budget", "60"])
        .arg(&f)
        .output()
        .unwrap();
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(grab(&stdout, "verdict"), "inconclusive", "{stdout}");
    assert_eq!(out.status.code(), Some(1));
}
