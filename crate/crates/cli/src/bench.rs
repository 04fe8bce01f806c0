use crate::CliMode;
use accelbmc_core::accel::AccelOptions;
use accelbmc_core::bmc::{check_safety, BmcConfig};
use accelbmc_core::frontend::{lower, parse, SourceProgram};
use accelbmc_core::oracle::{explore, OracleLimits};
use accelbmc_core::pipeline::{prepare, Mode};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

struct Outcome {
    file: PathBuf,
    expect: Option<String>,
    got: String,
    elapsed: Duration,
    /// True when the verdict contradicts the expectation. UNKNOWN and
    /// TIMEOUT never count as mismatches, only as inconclusive.
    mismatch: bool,
}

fn collect_files(dir: &Path, out: &mut Vec<PathBuf>) -> std::io::Result<()> {
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect_files(&path, out)?;
        } else if path.extension().is_some_and(|e| e == "imp") {
            out.push(path);
        }
    }
    Ok(())
}

fn run_one(path: &Path, mode: CliMode, timeout: u64) -> Option<Outcome> {
    let start = Instant::now();
    let outcome = |got: String, expect: Option<String>| {
        let mismatch = match (&expect, got.as_str()) {
            (Some(e), "SAFE") => !e.eq_ignore_ascii_case("safe"),
            (Some(e), "UNSAFE") => !e.eq_ignore_ascii_case("unsafe"),
            _ => false,
        };
        Outcome {
            file: path.to_path_buf(),
            expect,
            got,
            elapsed: start.elapsed(),
            mismatch,
        }
    };
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) => return Some(outcome(format!("ERROR({})", e), None)),
    };
    let src = SourceProgram::new(text, path.display().to_string());
    let expect = src.expect_header().map(str::to_string);
    if expect.is_none() {
        eprintln!(
            "warning: {} has no `// EXPECT:` header, skipped",
            path.display()
        );
        return None;
    }
    let cfa = match parse(&src).map_err(|e| e.to_string()).and_then(|ast| {
        lower(&ast)
            .map(|(cfa, _)| cfa)
            .map_err(|e| e.to_string())
    }) {
        Ok(c) => c,
        Err(e) => return Some(outcome(format!("ERROR({})", e), expect)),
    };
    if mode == CliMode::Oracle {
        let report = explore(&cfa, &OracleLimits::default());
        let got = match (&report.error, report.truncated) {
            (Some(_), _) => "UNSAFE",
            (None, true) => "UNKNOWN",
            (None, false) => "SAFE",
        };
        return Some(outcome(got.to_string(), expect));
    }
    let pmode = match mode {
        CliMode::Plain => Mode::Plain,
        CliMode::Accel => Mode::Accel,
        _ => Mode::AccelTa,
    };
    let p = match prepare(&cfa, pmode, &AccelOptions::default()) {
        Ok(p) => p,
        Err(e) => return Some(outcome(format!("ERROR({})", e), expect)),
    };
    let config = BmcConfig {
        deadline: Some(start + Duration::from_secs(timeout)),
        ..Default::default()
    };
    let unwind = if pmode == Mode::Plain { 100 } else { 3 };
    Some(match check_safety(&p.check_cfa, unwind, &config) {
        Ok(v) => outcome(v.label().to_string(), expect),
        Err(e) => outcome(format!("ERROR({})", e), expect),
    })
}

pub fn run(dir: &Path, jobs: usize, mode: CliMode, timeout: u64) -> u8 {
    let mut files = Vec::new();
    if let Err(e) = collect_files(dir, &mut files) {
        eprintln!("error: cannot read {}: {}", dir.display(), e);
        return 3;
    }
    files.sort();

    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Outcome>> = Mutex::new(Vec::new());
    let workers = jobs.max(1).min(files.len());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(path) = files.get(i) else { break };
                if let Some(out) = run_one(path, mode, timeout) {
                    results.lock().unwrap().push(out);
                }
            });
        }
    });
    let mut results = results.into_inner().unwrap();
    results.sort_by(|a, b| a.file.cmp(&b.file));

    let width = results
        .iter()
        .map(|r| r.file.display().to_string().len())
        .max()
        .unwrap_or(0);
    let mut mismatches = 0usize;
    let mut inconclusive = 0usize;
    let mut correct = 0usize;
    for r in &results {
        let status = if r.mismatch {
            mismatches += 1;
            "MISMATCH"
        } else if r.got == "SAFE" || r.got == "UNSAFE" {
            correct += 1;
            "ok"
        } else {
            inconclusive += 1;
            "inconclusive"
        };
        println!(
            "{:<w$}  expect {:<8} got {:<10} {:>7.2}s  {}",
            r.file.display(),
            r.expect.as_deref().unwrap_or("-"),
            r.got,
            r.elapsed.as_secs_f64(),
            status,
            w = width
        );
    }
    let total: f64 = results.iter().map(|r| r.elapsed.as_secs_f64()).sum();
    println!(
        "{} files: {} correct, {} mismatch(es), {} inconclusive, {:.2}s total",
        results.len(),
        correct,
        mismatches,
        inconclusive,
        total
    );
    if mismatches > 0 {
        1
    } else {
        0
    }
}
