use optosqueeze::pipeline::*;
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

fn short(duration: f64, reps: usize) -> RunConfig {
    RunConfig {
        duration,
        repetitions: reps,
        seed: 4242,
        ..RunConfig::default()
    }
}

/// Every file under `dir`, keyed by relative path.
fn tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.insert(rel, fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn undriven_point_reads_back_as_undriven() {
    let cfg = RunConfig {
        s_target: Some(0.0),
        ..short(25.0, 1)
    };
    let out = run_single(&cfg, None).unwrap();
    let p = &out.points[0];
    let s = p.stat("s_hat").unwrap();
    assert!(s.mean.abs() < 3.0 * s.combined, "{s:?}");
    for name in ["var_x_norm", "var_y_norm"] {
        let v = p.stat(name).unwrap();
        assert!((v.mean - 1.0).abs() < 3.0 * v.combined.max(0.02), "{v:?}");
    }
    let r = p.stat("ratio").unwrap();
    assert!((r.mean - 6.8 / 5.8).abs() < 3.0 * r.combined, "{r:?}");
}

#[test]
fn empty_sweep_writes_an_empty_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_sweep_ratio_vs_s(&short(10.0, 1), &[], Some(dir.path())).unwrap();
    assert!(out.points.is_empty());
    let table = fs::read_to_string(dir.path().join("sweep_ratios.csv")).unwrap();
    let rows = table.lines().filter(|l| !l.starts_with('#')).count();
    assert_eq!(rows, 1, "header only:\n{table}");
    assert!(report(dir.path()).unwrap().pass);
}

#[test]
fn a_refused_point_leaves_the_sweep_intact() {
    let cfg = RunConfig {
        n_bar: 0.3,
        ..short(10.0, 1)
    };
    let dir = tempfile::tempdir().unwrap();
    let out = run_sweep_ratio_vs_s(&cfg, &[0.2, 0.7], Some(dir.path())).unwrap();
    assert_eq!(out.points.len(), 2);
    assert_eq!(out.points[0].status(), "ok", "{:?}", out.points[0].errors);
    assert!(out.points[0].stat("s_hat").is_some());
    assert_eq!(out.points[1].status(), "failed");
    assert!(out.points[1].errors[0].contains("quantum-squeezing regime"), "{:?}", out.points[1].errors);
    let r = report(dir.path()).unwrap();
    assert!(!r.pass);
    assert!(r.text.contains("quantum-squeezing regime"));
}

#[test]
fn artifacts_do_not_depend_on_worker_count() {
    let base = short(10.0, 2);
    let s = [0.2, 0.4];
    let mut trees = Vec::new();
    for workers in [1, 3] {
        let cfg = RunConfig {
            workers: Some(workers),
            ..base.clone()
        };
        let dir = tempfile::tempdir().unwrap();
        run_sweep_ratio_vs_s(&cfg, &s, Some(dir.path())).unwrap();
        trees.push(tree(dir.path()));
    }
    assert!(trees[0].len() > 5);
    assert_eq!(trees[0].keys().collect::<Vec<_>>(), trees[1].keys().collect::<Vec<_>>());
    for (name, bytes) in &trees[0] {
        assert!(bytes == &trees[1][name], "{name} differs");
    }
}

#[test]
fn artifacts_carry_the_config_hash() {
    let cfg = RunConfig {
        keep_raw: true,
        ..short(10.0, 1)
    };
    let dir = tempfile::tempdir().unwrap();
    let out = run_single(&cfg, Some(dir.path())).unwrap();
    let hash = cfg.hash();
    assert_eq!(out.config_hash, hash);
    assert_eq!(hash.len(), 64);
    let files = tree(dir.path());
    let mut raw = 0;
    for (name, bytes) in &files {
        if name.ends_with(".bin") {
            assert_eq!(read_raw(&dir.path().join(name)).unwrap().config_hash, hash);
            raw += 1;
        } else if name.ends_with(".csv") || name.ends_with(".json") || name.ends_with(".txt") {
            let text = String::from_utf8_lossy(bytes);
            assert!(text.contains(&hash), "{name} lacks the hash");
        }
    }
    assert!(raw >= 2, "raw records: {raw}");
    // the hash ignores where and how the run is executed
    let moved = RunConfig {
        out_dir: "elsewhere".into(),
        workers: Some(7),
        keep_raw: false,
        ..cfg.clone()
    };
    assert_eq!(moved.hash(), hash);
    assert_ne!(RunConfig { seed: 1, ..cfg }.hash(), hash);
}

#[test]
fn report_flags_missing_fit_reports() {
    let dir = tempfile::tempdir().unwrap();
    run_sweep_ratio_vs_s(&short(10.0, 1), &[0.3], Some(dir.path())).unwrap();
    let before = report(dir.path()).unwrap();
    assert!(before.gaps.is_empty());
    let fits = dir.path().join("points").join("p00_s0.300").join("fits.json");
    assert!(fits.exists());
    fs::remove_file(&fits).unwrap();
    let after = report(dir.path()).unwrap();
    assert!(!after.pass);
    assert_eq!(after.gaps.len(), 1, "{:?}", after.gaps);
    assert!(after.text.contains("fits.json"));
}

#[test]
fn quantum_squeezed_point_is_analytic_only_and_says_so() {
    let cfg = RunConfig {
        n_bar: 0.3,
        s_target: Some(0.7),
        ..short(10.0, 1)
    };
    let dir = tempfile::tempdir().unwrap();
    let out = run_single(&cfg, Some(dir.path())).unwrap();
    let p = &out.points[0];
    assert!(p.analytic_only);
    assert_eq!(p.status(), "analytic-only");
    assert!(p.repetitions.iter().all(|r| r.sideband.is_none()));
    let text = fs::read_to_string(dir.path().join("summary.txt")).unwrap();
    assert!(text.contains("QUANTUM-SQUEEZING REGIME"), "{text}");
}

#[test]
fn reruns_are_byte_identical() {
    let cfg = short(10.0, 1);
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_single(&cfg, Some(a.path())).unwrap();
    run_single(&cfg, Some(b.path())).unwrap();
    for f in ["summary.txt", "summary.json", "summary_table.csv", "config.txt"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
    // the report re-renders the stored summary unchanged
    let r = report(a.path()).unwrap();
    assert_eq!(r.text, fs::read_to_string(a.path().join("summary.txt")).unwrap());
}
