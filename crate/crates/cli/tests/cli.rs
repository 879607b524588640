use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn lowlight(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lowlight"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = lowlight(args);
    assert!(
        out.status.success(),
        "lowlight {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    lowlight(args).status.code().unwrap()
}

fn config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("run.toml");
    fs::write(&path, body).unwrap();
    path
}

fn small(name: &str, levels: &str, extra: &str) -> String {
    format!(
        "[dataset]\nname = \"{name}\"\nnoise_levels = {levels}\nseed = 11\nsplits = {{ train = 2, validation = 1, test = 3 }}\n{extra}\n[geometry]\npreset = \"compact\"\n"
    )
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn desk_preset_writes_570_examples() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(
        tmp.path(),
        "[dataset]\nname = \"desk\"\nnoise_levels = [3]\npreset = \"desk\"\n[geometry]\npreset = \"compact\"\n",
    );
    let stdout = ok(&["dataset", s(&cfg)]);
    assert!(stdout.contains("570 examples written"), "{stdout}");
    let manifest = fs::read_to_string(tmp.path().join("dataset/desk/manifest.toml")).unwrap();
    for (split, n) in [("train", 500), ("validation", 50), ("test", 20)] {
        assert!(manifest.contains(&format!("name = \"{split}\"")));
        assert!(stdout.contains(&format!("{split:<10} {n:>6} examples")), "{stdout}");
    }
}

#[test]
fn existing_dataset_needs_force() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(tmp.path(), &small("d", "[2]", ""));
    ok(&["dataset", s(&cfg)]);
    let manifest = tmp.path().join("dataset/d/manifest.toml");
    let before = fs::read(&manifest).unwrap();
    fs::write(tmp.path().join("dataset/d/marker"), "x").unwrap();

    assert_eq!(code(&["dataset", s(&cfg)]), 3);
    assert!(tmp.path().join("dataset/d/marker").exists(), "nothing is overwritten");

    ok(&["dataset", s(&cfg), "--force", "--threads", "2"]);
    assert!(!tmp.path().join("dataset/d/marker").exists());
    assert_eq!(fs::read(&manifest).unwrap(), before);
}

#[test]
fn config_errors_exit_2() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(tmp.path(), "[dataset]\nname = \"d\"\nnoise_levels = [3]\ncolour = 1\n");
    let out = lowlight(&["dataset", s(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("colour") && err.contains("line 4"), "{err}");
    let cfg = config(tmp.path(), &small("d", "[3]", "objects = { class = \"faces\" }"));
    assert_eq!(code(&["dataset", s(&cfg)]), 2);
}

#[test]
fn six_level_sweep() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(tmp.path(), &small("sw", "[1, 2, 3, 4, 5, 6]", ""));
    ok(&["sweep", s(&cfg)]);
    for level in 1..=6 {
        let ds = tmp.path().join(format!("dataset/sw-level{level}"));
        assert!(ds.join("manifest.toml").exists());
        for method in ["gs", "approximant"] {
            let r = tmp.path().join(format!("dataset/reconstructions/sw-level{level}/{method}"));
            assert!(r.join("reconstruction.toml").exists());
        }
    }
    let report = fs::read_to_string(tmp.path().join("dataset/sw-report.tsv")).unwrap();
    let mut lines = report.lines();
    assert_eq!(lines.next(), Some("noise_level\tmethod\tmean_pcc\tstd_pcc\tn"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split('\t').collect()).collect();
    assert_eq!(rows.len(), 12);
    for r in &rows {
        assert_eq!(r[4], "3");
        let mean: f64 = r[2].parse().unwrap();
        assert!((-1.0..=1.0).contains(&mean));
    }
    let svg = fs::read_to_string(tmp.path().join("dataset/sw-pcc.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 2);

    // reports are byte-stable
    let again = tmp.path().join("again.tsv");
    let recon = tmp.path().join("dataset/reconstructions");
    let mut args = vec!["evaluate".to_owned()];
    for level in 1..=6 {
        for method in ["gs", "approximant"] {
            args.push(format!("{}/sw-level{level}/{method}", recon.display()));
        }
    }
    args.extend(["--report".into(), again.display().to_string()]);
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    ok(&args);
    assert_eq!(fs::read_to_string(&again).unwrap(), report);
}

fn write_pgm(path: &Path, size: usize, value: u8) {
    let mut bytes = format!("P5\n{size} {size}\n255\n").into_bytes();
    bytes.extend(std::iter::repeat_n(value, size * size));
    fs::write(path, bytes).unwrap();
}

#[test]
fn flat_object_reconstructs_flat() {
    let tmp = TempDir::new().unwrap();
    let imgs = tmp.path().join("imgs");
    fs::create_dir(&imgs).unwrap();
    // gray 0 matches the phase of the surrounding beam
    write_pgm(&imgs.join("flat.pgm"), 32, 0);
    let cfg = config(
        tmp.path(),
        "[dataset]\nname = \"flat\"\nnoise_levels = [0]\nsplits = { train = 0, validation = 0, test = 1 }\n\
         objects = { class = \"custom\", image_dir = \"imgs\" }\n[geometry]\npreset = \"compact\"\n",
    );
    ok(&["dataset", s(&cfg)]);
    let ds = tmp.path().join("dataset/flat");
    for method in ["gs", "approximant"] {
        let out = tmp.path().join(method);
        ok(&["reconstruct", s(&ds), "--method", method, "--out", s(&out)]);
        let phase = read_f32(&out.join("phase.prd"));
        assert_eq!(phase.len(), 32 * 32);
        let mean = phase.iter().sum::<f32>() / phase.len() as f32;
        let spread = phase.iter().map(|p| (p - mean).abs()).fold(0.0f32, f32::max);
        assert!(spread < 0.05, "{method}: phase varies by {spread}");
    }
    // a constant reconstruction cannot be correlated
    let out = lowlight(&[
        "evaluate",
        s(&tmp.path().join("gs")),
        "--report",
        s(&tmp.path().join("r.tsv")),
    ]);
    assert_eq!(out.status.code(), Some(4));
}

/// Payload of a one-item, rank-3 f32 PRD1 file.
fn read_f32(path: &Path) -> Vec<f32> {
    let bytes = fs::read(path).unwrap();
    assert_eq!(&bytes[..4], b"PRD1");
    let rank = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let header = 4 + 4 * (rank + 2);
    bytes[header..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect()
}

#[test]
fn noiseless_gs_residual_drops_below_a_tenth() {
    // the compact geometry stalls near 15%; this needs the full detector
    let tmp = TempDir::new().unwrap();
    let cfg = config(
        tmp.path(),
        "[dataset]\nname = \"nl\"\nnoise_levels = [0]\nseed = 5\nsplits = { train = 0, validation = 0, test = 1 }\n",
    );
    ok(&["dataset", s(&cfg)]);
    let out = tmp.path().join("gs");
    ok(&["reconstruct", s(&tmp.path().join("dataset/nl")), "--method", "gs", "--out", s(&out)]);
    let tsv = fs::read_to_string(out.join("residuals.tsv")).unwrap();
    let res: Vec<f64> = tsv.lines().skip(1).map(|l| l.split('\t').nth(2).unwrap().parse().unwrap()).collect();
    assert!(res.len() > 10);
    assert!(res.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9)));
    let ratio = res.last().unwrap() / res[0];
    assert!(ratio < 0.1, "final/initial = {ratio}");
}

#[test]
fn missing_split_and_truth_self_evaluation() {
    let tmp = TempDir::new().unwrap();
    let cfg = config(
        tmp.path(),
        "[dataset]\nname = \"t\"\nnoise_levels = [4]\nsplits = { train = 2, validation = 0, test = 3 }\n[geometry]\npreset = \"compact\"\n",
    );
    ok(&["dataset", s(&cfg)]);
    let ds = tmp.path().join("dataset/t");
    let out = lowlight(&[
        "reconstruct",
        s(&ds),
        "--method",
        "approximant",
        "--split",
        "validation",
        "--out",
        s(&tmp.path().join("v")),
    ]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("validation"));

    let report = tmp.path().join("self.tsv");
    ok(&["evaluate", "--dataset", s(&ds), s(&ds), "--report", s(&report)]);
    assert_eq!(
        fs::read_to_string(&report).unwrap(),
        "noise_level\tmethod\tmean_pcc\tstd_pcc\tn\n4\ttruth\t1.000000\t0.000000\t3\n"
    );
}

#[test]
fn mismatched_examples_are_a_pairing_error() {
    let tmp = TempDir::new().unwrap();
    let a = config(tmp.path(), &small("a", "[3]", ""));
    ok(&["dataset", s(&a)]);
    let b_dir = tmp.path().join("b");
    fs::create_dir(&b_dir).unwrap();
    let b = config(
        &b_dir,
        "[dataset]\nname = \"a\"\nnoise_levels = [3]\nsplits = { train = 2, validation = 1, test = 4 }\n[geometry]\npreset = \"compact\"\n",
    );
    ok(&["dataset", s(&b)]);

    let recon = tmp.path().join("r");
    ok(&["reconstruct", s(&tmp.path().join("dataset/a")), "--method", "approximant", "--out", s(&recon)]);
    let report = tmp.path().join("x.tsv");
    let out = lowlight(&["evaluate", "--dataset", s(&b_dir.join("dataset/a")), s(&recon), "--report", s(&report)]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("do not match"));

    let out = lowlight(&["evaluate", "--dataset", s(&tmp.path().join("dataset/a")), s(&recon), "--report", s(&report)]);
    assert!(out.status.success());
    // rerunning into an existing output needs --force
    assert_eq!(
        code(&["reconstruct", s(&tmp.path().join("dataset/a")), "--method", "gs", "--out", s(&recon)]),
        3
    );
}

#[test]
fn sample_configs_parse() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut names = Vec::new();
    for entry in fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = lowlight::RunConfig::load(&path).unwrap();
            names.extend(cfg.recipes().unwrap().into_iter().map(|r| r.name));
        }
    }
    names.sort();
    assert_eq!(names.len(), 10, "{names:?}");
    assert!(names.contains(&"ic-level3".to_owned()));
}
