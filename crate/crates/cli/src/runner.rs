use crate::{CheckOpts, CliMode};
use accelbmc_core::accel::AccelOptions;
use accelbmc_core::bmc::{check_safety, find_proof_bound, BmcConfig, Verdict};
use accelbmc_core::frontend::{dump_dot, lower, parse_with_width, DotStyle, SourceProgram};
use accelbmc_core::ir::{stmt_to_string, Cfa};
use accelbmc_core::oracle::{explore, OracleLimits};
use accelbmc_core::pipeline::{prepare, Mode, Prepared};
use accelbmc_core::trace_automata::{dfa_to_dot, Sym};
use serde_json::json;
use std::collections::BTreeSet;
use std::path::Path;
use std::time::{Duration, Instant};

pub const EXIT_SAFE: u8 = 0;
pub const EXIT_UNSAFE: u8 = 1;
pub const EXIT_UNKNOWN: u8 = 2;
pub const EXIT_ERROR: u8 = 3;
pub const EXIT_TIMEOUT: u8 = 4;

struct Reporter {
    json: bool,
}

impl Reporter {
    fn event(&self, v: serde_json::Value) {
        if self.json {
            println!("{}", v);
        }
    }
    fn human(&self, line: &str) {
        if !self.json {
            println!("{}", line);
        }
    }
}

pub fn run_file(path: &Path, opts: &CheckOpts) -> u8 {
    let rep = Reporter { json: opts.json };
    match run_file_inner(path, opts, &rep) {
        Ok(code) => code,
        Err(msg) => {
            rep.event(json!({"event": "error", "message": msg}));
            eprintln!("error: {}", msg);
            EXIT_ERROR
        }
    }
}

fn resolve_mode(opts: &CheckOpts) -> CliMode {
    match (opts.mode, opts.no_trace_automata) {
        (CliMode::AccelTa, true) => CliMode::Accel,
        (m, _) => m,
    }
}

fn run_file_inner(path: &Path, opts: &CheckOpts, rep: &Reporter) -> Result<u8, String> {
    let start = Instant::now();
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read {}: {}", path.display(), e))?;
    let src = SourceProgram::new(text, path.display().to_string());
    let ast = parse_with_width(&src, opts.width).map_err(|e| e.to_string())?;
    let (cfa, warnings) = lower(&ast).map_err(|e| e.to_string())?;
    for w in &warnings {
        eprintln!("warning: {:?}", w);
    }
    if opts.minimize_ta {
        eprintln!("warning: --minimize-ta is reserved and currently ignored");
    }
    rep.event(json!({
        "event": "frontend",
        "file": path.display().to_string(),
        "seed": opts.seed,
        "width": ast.width,
        "vars": cfa.vars.len(),
        "vertices": cfa.n_vertices,
        "edges": cfa.edges.len(),
    }));
    rep.human(&format!(
        "{}: {} vars at width {}, {} vertices, {} edges",
        path.display(),
        cfa.vars.len(),
        ast.width,
        cfa.n_vertices,
        cfa.edges.len()
    ));

    let mode = resolve_mode(opts);
    if mode == CliMode::Oracle {
        return run_oracle(&cfa, rep, start);
    }

    let pmode = match mode {
        CliMode::Plain => Mode::Plain,
        CliMode::Accel => Mode::Accel,
        CliMode::AccelTa => Mode::AccelTa,
        CliMode::Oracle => unreachable!(),
    };
    let accel_opts = AccelOptions {
        max_loop_paths: opts.max_loop_paths,
    };
    let prep_start = Instant::now();
    let p = prepare(&cfa, pmode, &accel_opts).map_err(|e| e.to_string())?;
    let prep_time = prep_start.elapsed().as_secs_f64();
    report_pipeline(&p, prep_time, rep);
    dump_artifacts(&p, opts)?;

    let config = BmcConfig {
        conflict_budget: opts.conflict_budget,
        deadline: Some(start + Duration::from_secs(opts.timeout)),
        external_solver: opts.external_solver.clone(),
        dimacs_path: opts.dimacs.clone(),
    };
    let default_unwind = if mode == CliMode::Plain { 100 } else { 3 };
    let verdict = match opts.kmax {
        Some(kmax) => find_proof_bound(&p.check_cfa, kmax, &config),
        None => check_safety(&p.check_cfa, opts.unwind.unwrap_or(default_unwind), &config),
    }
    .map_err(|e| e.to_string())?;
    Ok(report_verdict(&p.check_cfa, &verdict, rep, start))
}

fn report_pipeline(p: &Prepared, prep_time: f64, rep: &Reporter) {
    if let Some(a) = &p.accel {
        rep.event(json!({
            "event": "accel",
            "accelerators": a.accels.len(),
            "rejected": a.rejected.len(),
            "vertices": a.cfa.n_vertices,
            "edges": a.cfa.edges.len(),
        }));
        rep.human(&format!(
            "acceleration: {} accelerators attached, {} loop paths rejected",
            a.accels.len(),
            a.rejected.len()
        ));
        for (t, e) in &a.rejected {
            rep.human(&format!("  rejected loop at vertex {}: {}", t.head, e));
        }
    }
    if let Some(d) = &p.dfa {
        rep.event(json!({
            "event": "trace_automaton",
            "dfa_states": d.n_states,
            "alphabet": d.alphabet.len(),
        }));
        rep.human(&format!(
            "trace automaton: {} dfa states over {} symbols",
            d.n_states,
            d.alphabet.len()
        ));
    }
    if let Some(i) = &p.instrumented {
        // Edge growth relative to the accelerated CFA, the cost of inlining
        // the trace automaton.
        let base = p.accel.as_ref().map(|a| a.cfa.edges.len()).unwrap_or(0);
        let growth_pct = if base > 0 {
            100.0 * (i.cfa.edges.len() as f64 - base as f64) / base as f64
        } else {
            0.0
        };
        rep.event(json!({
            "event": "instrumented",
            "vertices": i.cfa.n_vertices,
            "edges": i.cfa.edges.len(),
            "edge_growth_pct": growth_pct,
        }));
        rep.human(&format!(
            "instrumentation: {} edges ({:+.1}% over accelerated CFA)",
            i.cfa.edges.len(),
            growth_pct
        ));
    }
    rep.event(json!({"event": "prepare_time", "elapsed_s": prep_time}));
    rep.human(&format!("preparation time: {:.2}s", prep_time));
}

fn dump_artifacts(p: &Prepared, opts: &CheckOpts) -> Result<(), String> {
    if let Some(path) = &opts.dump_cfa {
        let mut bold = BTreeSet::new();
        if let Some(i) = &p.instrumented {
            bold.extend(
                i.edge_sym
                    .iter()
                    .filter(|(_, s)| matches!(s, Sym::Accel(_)))
                    .map(|(&o, _)| o),
            );
        } else if let Some(a) = &p.accel {
            bold.extend(a.accels.iter().flat_map(|x| x.path.iter().copied()));
        }
        let style = DotStyle { name: None, bold };
        std::fs::write(path, dump_dot(&p.check_cfa, &style))
            .map_err(|e| format!("cannot write {}: {}", path.display(), e))?;
    }
    if let Some(path) = &opts.dump_ta {
        let text = match &p.dfa {
            None => "digraph ta {\n}\n".to_string(),
            Some(d) => dfa_to_dot(d),
        };
        std::fs::write(path, text)
            .map_err(|e| format!("cannot write {}: {}", path.display(), e))?;
    }
    Ok(())
}

fn report_verdict(cfa: &Cfa, verdict: &Verdict, rep: &Reporter, start: Instant) -> u8 {
    let elapsed = start.elapsed().as_secs_f64();
    match verdict {
        Verdict::Safe { k } => {
            rep.event(json!({
                "event": "verdict", "verdict": "SAFE", "k": k,
                "elapsed_s": elapsed,
            }));
            rep.human(&format!("verdict: SAFE at bound {} ({:.2}s)", k, elapsed));
            EXIT_SAFE
        }
        Verdict::Unsafe { cex } => {
            rep.event(json!({
                "event": "verdict", "verdict": "UNSAFE",
                "path": cex.path,
                "havocs": cex.havocs,
                "error_vertex": cex.error_vertex,
                "elapsed_s": elapsed,
            }));
            rep.human(&format!(
                "verdict: UNSAFE, assertion violated at vertex {} ({:.2}s)",
                cex.error_vertex, elapsed
            ));
            if !rep.json {
                for occ in &cex.path {
                    if let Some(e) = cfa.edge_by_id(*occ) {
                        rep.human(&format!("  {:>4}: {}", occ, stmt_to_string(cfa, &e.stmt)));
                    }
                }
                if !cex.havocs.is_empty() {
                    rep.human(&format!("  nondet values: {:?}", cex.havocs));
                }
            }
            EXIT_UNSAFE
        }
        Verdict::Unknown { k, live_back_edges } => {
            rep.event(json!({
                "event": "verdict", "verdict": "UNKNOWN", "k": k,
                "live_back_edges": live_back_edges,
                "elapsed_s": elapsed,
            }));
            rep.human(&format!(
                "verdict: UNKNOWN at bound {}, {} back edge(s) still live ({:.2}s)",
                k,
                live_back_edges.len(),
                elapsed
            ));
            EXIT_UNKNOWN
        }
        Verdict::Timeout => {
            rep.event(json!({
                "event": "verdict", "verdict": "TIMEOUT", "elapsed_s": elapsed,
            }));
            rep.human(&format!("verdict: TIMEOUT ({:.2}s)", elapsed));
            EXIT_TIMEOUT
        }
    }
}

fn run_oracle(cfa: &Cfa, rep: &Reporter, start: Instant) -> Result<u8, String> {
    let total_bits: u32 = cfa.vars.iter().map(|d| d.width).sum();
    if total_bits > 20 {
        return Err(format!(
            "oracle mode needs a small state space; {} total bits is too many",
            total_bits
        ));
    }
    let report = explore(cfa, &OracleLimits::default());
    let elapsed = start.elapsed().as_secs_f64();
    let verdict = match (&report.error, report.truncated) {
        (Some(_), _) => "UNSAFE",
        (None, true) => "UNKNOWN",
        (None, false) => "SAFE",
    };
    rep.event(json!({
        "event": "oracle",
        "verdict": verdict,
        "reachable": report.reachable.len(),
        "diameter": report.diameter,
        "truncated": report.truncated,
        "elapsed_s": elapsed,
    }));
    rep.human(&format!(
        "oracle: {} ({} configurations, diameter {}, {:.2}s)",
        verdict,
        report.reachable.len(),
        report.diameter,
        elapsed
    ));
    Ok(match verdict {
        "SAFE" => EXIT_SAFE,
        "UNSAFE" => EXIT_UNSAFE,
        _ => EXIT_UNKNOWN,
    })
}
