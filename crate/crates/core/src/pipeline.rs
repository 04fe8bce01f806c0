//! End-to-end composition of the transformation stages, shared by the
//! command-line driver and the integration tests.

use crate::accel::{accelerate_cfa, AccelOptions, AccelOutcome};
use crate::ir::Cfa;
use crate::trace_automata::{build_restriction_nfa, determinize, inline, Dfa, InstrumentedCfa, TaError};

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Plain bounded model checking on the lowered CFA.
    Plain,
    /// Acceleration only.
    Accel,
    /// Acceleration plus trace-automaton instrumentation.
    AccelTa,
}

#[derive(Clone, Debug)]
pub struct Prepared {
    pub accel: Option<AccelOutcome>,
    pub dfa: Option<Dfa>,
    pub instrumented: Option<InstrumentedCfa>,
    /// The CFA the model checker should run on.
    pub check_cfa: Cfa,
}

/// Apply the stages selected by `mode` to a lowered CFA.
pub fn prepare(cfa: &Cfa, mode: Mode, accel_opts: &AccelOptions) -> Result<Prepared, TaError> {
    match mode {
        Mode::Plain => Ok(Prepared {
            accel: None,
            dfa: None,
            instrumented: None,
            check_cfa: cfa.clone(),
        }),
        Mode::Accel => {
            let out = accelerate_cfa(cfa, accel_opts);
            Ok(Prepared {
                check_cfa: out.cfa.clone(),
                accel: Some(out),
                dfa: None,
                instrumented: None,
            })
        }
        Mode::AccelTa => {
            let out = accelerate_cfa(cfa, accel_opts);
            if out.accels.is_empty() {
                return Ok(Prepared {
                    check_cfa: out.cfa.clone(),
                    accel: Some(out),
                    dfa: None,
                    instrumented: None,
                });
            }
            let nfa = build_restriction_nfa(&out.cfa, &out.accels);
            let dfa = determinize(&nfa)?;
            let inst = inline(&out.cfa, &out.accels, &dfa);
            Ok(Prepared {
                check_cfa: inst.cfa.clone(),
                accel: Some(out),
                dfa: Some(dfa),
                instrumented: Some(inst),
            })
        }
    }
}
