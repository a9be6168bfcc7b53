use std::fs;
use std::process::{Command, Output};

fn csbsd(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_csbsd"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn gen_matrix_then_reconstruct() {
    let dir = tempfile::tempdir().unwrap();
    let matrix = dir.path().join("phi.txt");
    let out = csbsd(&["gen-matrix", "--n", "32", "--m", "16", "--l", "3", "--seed", "5", "-o", matrix.to_str().unwrap()]);
    assert!(out.status.success());
    let text = fs::read_to_string(&matrix).unwrap();
    assert!(text.starts_with("32 16 3 5\n"));
    assert_eq!(text.lines().count(), 1 + 32 * 3);

    // x has 4.0 at element 3, so z is column 3 scaled by 4.
    let mut z = [0.0; 16];
    for line in text.lines().skip(1) {
        let f: Vec<i64> = line.split_whitespace().map(|v| v.parse().unwrap()).collect();
        if f[1] == 3 {
            z[f[0] as usize] = 4.0 * f[2] as f64;
        }
    }
    let meas = dir.path().join("z.txt");
    fs::write(&meas, z.iter().map(|v| format!("{v}\n")).collect::<String>()).unwrap();
    let out = csbsd(&[
        "reconstruct",
        "--matrix",
        matrix.to_str().unwrap(),
        "--measurements",
        meas.to_str().unwrap(),
        "--q",
        "0.05",
        "--sigma-x",
        "5",
        "--sigma-n",
        "0.01",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = stdout(&out);
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "i,x_hat,s_hat");
    assert_eq!(rows.len(), 33);
    let row3: Vec<&str> = rows[4].split(',').collect();
    assert_eq!(row3[2], "1");
    assert!((row3[1].parse::<f64>().unwrap() - 4.0).abs() < 0.05);
}

#[test]
fn experiment_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sweep.cfg");
    fs::write(&config, "kind = mse\nn = 64\nsnr_grid_db = 20,30\ntrials = 2\nconv_mode = linear\n").unwrap();
    let out = csbsd(&["experiment", "--config", config.to_str().unwrap(), "--set", "seed=3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = stdout(&out);
    assert_eq!(csv.lines().next().unwrap(), "m_over_n,snr_db,mse,stderr,mse_star,trials");
    assert_eq!(csv.lines().count(), 3);
    assert_eq!(csv, stdout(&csbsd(&["experiment", "--config", config.to_str().unwrap(), "--set", "seed=3"])));
}

#[test]
fn selftest_passes() {
    let out = csbsd(&["selftest"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 3);
}

#[test]
fn bad_usage_exits_with_one() {
    assert_eq!(csbsd(&["gen-matrix", "--bogus"]).status.code(), Some(1));
    assert_eq!(csbsd(&["experiment", "--set", "nonsense"]).status.code(), Some(1));
    assert_eq!(csbsd(&["--help"]).status.code(), Some(0));
}
