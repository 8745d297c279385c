use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn gmdmr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gmdmr"))
        .args(args)
        .output()
        .unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_csv(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect()
}

const SPD: [&str; 5] = [
    "2,0.5,0.1\n0.5,1.5,-0.3\n0.1,-0.3,1\n",
    "1,0.2,0\n0.2,1,0.4\n0,0.4,1\n",
    "3,1,1\n1,2,0.5\n1,0.5,2\n",
    "1,-0.5,0.2\n-0.5,1,0.1\n0.2,0.1,1\n",
    "4,0,0\n0,1,0\n0,0,0.25\n",
];

#[test]
fn dist_identical_files_give_zero_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    fs::write(&a, SPD[0]).unwrap();
    fs::write(&b, SPD[0]).unwrap();
    let out = dir.path().join("d.csv");
    let o = gmdmr(&["dist", p(&a), p(&b), "--out", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(read_csv(&out), vec![vec![0.0, 0.0], vec![0.0, 0.0]]);
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(
        stdout.contains("N=2") && stdout.contains("geodesic"),
        "{stdout}"
    );
}

#[test]
fn dist_directory_output_is_symmetric() {
    let dir = tempfile::tempdir().unwrap();
    let inputs = dir.path().join("in");
    fs::create_dir(&inputs).unwrap();
    for (i, text) in SPD.iter().enumerate() {
        fs::write(inputs.join(format!("m{i}.csv")), text).unwrap();
    }
    let out = dir.path().join("d.csv");
    let o = gmdmr(&["dist", p(&inputs), "--out", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let d = read_csv(&out);
    assert_eq!(d.len(), 5);
    for (i, row) in d.iter().enumerate() {
        assert_eq!(row[i], 0.0);
        for (j, x) in row.iter().enumerate() {
            assert!((x - d[j][i]).abs() <= 1e-12 * (1.0 + x.abs()));
        }
    }
    assert!(d[0][4] > 0.0);
}

#[test]
fn dist_mixed_dimensions_exit_2_naming_both_files() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("three.csv");
    let b = dir.path().join("two.csv");
    fs::write(&a, SPD[1]).unwrap();
    fs::write(&b, "1,0.1\n0.1,1\n").unwrap();
    let o = gmdmr(&["dist", p(&a), p(&b), "--out", p(&dir.path().join("d.csv"))]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("three.csv") && e.contains("two.csv"), "{e}");
}

#[test]
fn dist_vectors_and_correlation_measures() {
    let dir = tempfile::tempdir().unwrap();
    let files: Vec<_> = ["0", "1", "3"]
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let f = dir.path().join(format!("v{i}.csv"));
            fs::write(&f, format!("{v}\n")).unwrap();
            f
        })
        .collect();
    let out = dir.path().join("d.csv");
    let mut args = vec!["dist", "--measure", "euclidean", "--out", p(&out)];
    args.extend(files.iter().map(|f| p(f)));
    let o = gmdmr(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        read_csv(&out),
        vec![
            vec![0.0, 1.0, 3.0],
            vec![1.0, 0.0, 2.0],
            vec![3.0, 2.0, 0.0]
        ]
    );

    // Correlation matrices compared through their upper triangles.
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let c = dir.path().join("c.csv");
    fs::write(&a, "1,0.2,0.1\n0.2,1,0.3\n0.1,0.3,1\n").unwrap();
    fs::write(&b, "1,-0.2,0.4\n-0.2,1,0\n0.4,0,1\n").unwrap();
    fs::write(&c, "1,0.5,0.2\n0.5,1,0.1\n0.2,0.1,1\n").unwrap();
    let o = gmdmr(&[
        "dist",
        "--measure",
        "correlation",
        "--out",
        p(&out),
        p(&a),
        p(&b),
        p(&c),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let d = read_csv(&out);
    assert!(d[0][1] > 0.0 && d[0][1] <= 2.0);
}

#[test]
fn dist_rejects_non_spd_input() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("good.csv");
    let b = dir.path().join("bad.csv");
    fs::write(&a, "1,0\n0,1\n").unwrap();
    fs::write(&b, "1,2\n2,1\n").unwrap();
    let o = gmdmr(&["dist", p(&a), p(&b), "--out", p(&dir.path().join("d.csv"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bad.csv"));
}

/// Six subjects tracking a steep covariate; see the core test suite for the
/// exhaustive check that every relabelling lowers the statistic.
fn write_fixture(dir: &Path) -> (std::path::PathBuf, std::path::PathBuf) {
    let x = [1.0, 2.0, 4.0, 8.0, 16.0, 32.0];
    let noise = [0.3, -0.2, 0.1, -0.3, 0.2, -0.1];
    let y: Vec<f64> = x.iter().zip(noise).map(|(a, e)| a + e).collect();
    let mut d = String::new();
    let mut design = String::new();
    for i in 0..6 {
        let row: Vec<String> = (0..6)
            .map(|j| format!("{:.17e}", (y[i] - y[j]).abs()))
            .collect();
        d.push_str(&row.join(","));
        d.push('\n');
        design.push_str(&format!("1,{}\n", x[i]));
    }
    let dp = dir.join("dist.csv");
    let xp = dir.join("design.csv");
    fs::write(&dp, d).unwrap();
    fs::write(&xp, design).unwrap();
    (dp, xp)
}

#[test]
fn mdmr_planted_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let (d, x) = write_fixture(dir.path());
    let out1 = dir.path().join("r1.csv");
    let out2 = dir.path().join("r2.csv");
    for out in [&out1, &out2] {
        let o = gmdmr(&[
            "mdmr",
            "--dist",
            p(&d),
            "--design",
            p(&x),
            "--perms",
            "99",
            "--seed",
            "1",
            "--out",
            p(out),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let text = fs::read_to_string(&out1).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "pseudo_f,p_value,n_permutations,seed");
    let fields: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(fields[1].parse::<f64>().unwrap(), 0.01);
    assert_eq!(fields[2], "99");
    assert_eq!(fields[3], "1");
    assert_eq!(fs::read(&out1).unwrap(), fs::read(&out2).unwrap());
}

#[test]
fn mdmr_without_intercept_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let (d, _) = write_fixture(dir.path());
    let x = dir.path().join("nointercept.csv");
    fs::write(&x, "1\n2\n4\n8\n16\n32\n").unwrap();
    let o = gmdmr(&[
        "mdmr",
        "--dist",
        p(&d),
        "--design",
        p(&x),
        "--out",
        p(&dir.path().join("r.csv")),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("intercept") && e.contains("add"), "{e}");
}

#[test]
fn mdmr_row_count_mismatch_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let (d, _) = write_fixture(dir.path());
    let x = dir.path().join("short.csv");
    fs::write(&x, "1,0\n1,1\n1,0\n").unwrap();
    let o = gmdmr(&[
        "mdmr",
        "--dist",
        p(&d),
        "--design",
        p(&x),
        "--out",
        p(&dir.path().join("r.csv")),
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn simulate_writes_subjects_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let run = |out: &Path| {
        let o = gmdmr(&[
            "simulate",
            "--n-patients",
            "3",
            "--n-controls",
            "2",
            "--b",
            "3",
            "--m",
            "-1.83",
            "--r",
            "0.5",
            "--n-base",
            "10",
            "--seed",
            "9",
            "--out",
            p(out),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
    };
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    run(&a);
    run(&b);
    let manifest = fs::read_to_string(a.join("manifest.csv")).unwrap();
    let lines: Vec<&str> = manifest.lines().collect();
    assert_eq!(lines[0], "subject_id,group,rho,df,base_id");
    assert_eq!(lines.len(), 6);
    for (k, line) in lines[1..].iter().enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[0], format!("subject_{k:03}"));
        if k < 3 {
            assert_eq!(f[1], "patient");
            assert!(f[2].parse::<f64>().unwrap() < 0.0);
        } else {
            assert_eq!(f[1], "control");
            assert_eq!(f[2], "");
        }
        let df: usize = f[3].parse().unwrap();
        assert!((39..=150).contains(&df));
        assert!(f[4].parse::<usize>().unwrap() < 10);
        let m = read_csv(&a.join(format!("{}.csv", f[0])));
        assert_eq!(m.len(), 10);
        assert!((0..10).all(|i| m[i][i] == 1.0));
    }
    for name in ["manifest.csv", "subject_000.csv", "subject_004.csv"] {
        assert_eq!(
            fs::read(a.join(name)).unwrap(),
            fs::read(b.join(name)).unwrap()
        );
    }
}

#[test]
fn simulate_from_cohort_directory() {
    let dir = tempfile::tempdir().unwrap();
    let cohort = dir.path().join("cohort");
    fs::create_dir(&cohort).unwrap();
    fs::write(cohort.join("a.csv"), "1,0.2,0.1\n0.2,1,0.3\n0.1,0.3,1\n").unwrap();
    fs::write(cohort.join("b.csv"), "1,-0.2,0.4\n-0.2,1,0\n0.4,0,1\n").unwrap();
    let out = dir.path().join("sim");
    let o = gmdmr(&[
        "simulate",
        "--cohort",
        p(&cohort),
        "--b",
        "2",
        "--n-patients",
        "2",
        "--n-controls",
        "2",
        "--out",
        p(&out),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(read_csv(&out.join("subject_000.csv")).len(), 3);

    fs::write(cohort.join("c.csv"), "2,0\n0,1\n").unwrap();
    let o = gmdmr(&[
        "simulate",
        "--cohort",
        p(&cohort),
        "--b",
        "2",
        "--out",
        p(&out),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("c.csv"));
}

const TINY_CONFIG: &str = r#"
seed = 3
[grid]
b_values = [2]
m_values = [1.83]
r_values = [0.0, 1.0]
n_patients = 6
n_controls = 6
n_replications = 4
n_permutations = 19
[cohort]
n_base = 10
"#;

#[test]
fn power_writes_table_panels_and_log() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, TINY_CONFIG).unwrap();
    let out = dir.path().join("out");
    let o = gmdmr(&[
        "power",
        "--config",
        p(&cfg),
        "--out",
        p(&out),
        "--threads",
        "2",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = fs::read_to_string(out.join("power_table.csv")).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert_eq!(lines[0], "b,m,r,method,power,n_replications,mean_p,seed");
    assert_eq!(lines.len(), 1 + 2 * 3);
    for line in &lines[1..] {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!((f[5], f[7]), ("4", "3"));
    }
    let svg = fs::read_to_string(out.join("power_b2_m1.83.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 3);
    let log = fs::read_to_string(out.join("power_log.txt")).unwrap();
    assert!(log.contains("alpha = 0.05 (default)"), "{log}");
    assert!(log.contains("seed = 3"));
    assert_eq!(log.matches("cell b=").count(), 2);
    assert!(log.contains("time="));

    let again = dir.path().join("again");
    let o = gmdmr(&[
        "power",
        "--config",
        p(&cfg),
        "--out",
        p(&again),
        "--threads",
        "1",
    ]);
    assert!(o.status.success());
    assert_eq!(
        fs::read(out.join("power_table.csv")).unwrap(),
        fs::read(again.join("power_table.csv")).unwrap()
    );
}

#[test]
fn power_config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(
        &cfg,
        TINY_CONFIG.replace("n_base = 10", "n_base = 10\nmystery = 1"),
    )
    .unwrap();
    let o = gmdmr(&["power", "--config", p(&cfg), "--out", p(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("mystery"));

    fs::write(
        &cfg,
        TINY_CONFIG.replace(
            "n_permutations = 19",
            "n_permutations = 19\nmethods = [\"riemann\"]",
        ),
    )
    .unwrap();
    let o = gmdmr(&["power", "--config", p(&cfg), "--out", p(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(
        e.contains("riemann") && e.contains("geodesic, euclidean, correlation"),
        "{e}"
    );
}

#[test]
fn power_runs_on_a_file_cohort() {
    let dir = tempfile::tempdir().unwrap();
    let cohort = dir.path().join("fc");
    fs::create_dir(&cohort).unwrap();
    fs::write(cohort.join("a.csv"), "1,0.2,0.1\n0.2,1,0.3\n0.1,0.3,1\n").unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(
        &cfg,
        TINY_CONFIG.replace("n_base = 10", "source = \"fc\"\ntarget_indices = [0, 2]"),
    )
    .unwrap();
    let out = dir.path().join("out");
    let o = gmdmr(&["power", "--config", p(&cfg), "--out", p(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(fs::read_to_string(out.join("power_log.txt"))
        .unwrap()
        .contains("fc"));
}

#[test]
fn default_config_is_printed_and_parses() {
    let o = gmdmr(&["print-default-config"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let o2 = gmdmr(&["power", "--print-default-config"]);
    assert_eq!(text.as_bytes(), &o2.stdout[..]);
    assert!(gmdmr::config::RunConfig::parse(&text).is_ok());
    assert!(text.contains("methods = [\"geodesic\", \"euclidean\", \"correlation\"]"));
}
