//! Conflict-driven clause learning solver with two-watched-literal
//! propagation, activity-based branching, phase saving, geometric restarts
//! and first-UIP learning.

use super::{Cnf, Lit, Var};
use std::time::Instant;

#[derive(Clone, Debug)]
pub struct SolverConfig {
    /// Abort with [`SolveResult::BudgetExhausted`] after this many conflicts.
    pub conflict_budget: u64,
    /// Optional wall-clock deadline, checked periodically.
    pub deadline: Option<Instant>,
    pub var_decay: f64,
    pub clause_decay: f64,
    pub restart_first: u64,
    pub restart_mult: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            conflict_budget: 10_000_000,
            deadline: None,
            var_decay: 0.95,
            clause_decay: 0.999,
            restart_first: 128,
            restart_mult: 1.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SolveResult {
    Sat,
    Unsat,
    /// Conflict budget or deadline exhausted before a verdict.
    BudgetExhausted,
}

#[derive(Clone, Debug)]
struct Clause {
    lits: Vec<Lit>,
    learnt: bool,
    activity: f64,
}

#[derive(Copy, Clone)]
struct Watch {
    clause: u32,
    blocker: Lit,
}

const UNDEF_CLAUSE: u32 = u32::MAX;

/// Max-activity heap over variables, with position tracking for updates.
#[derive(Clone, Debug, Default)]
struct OrderHeap {
    heap: Vec<Var>,
    pos: Vec<i32>,
}

impl OrderHeap {
    fn grow_to(&mut self, n: usize) {
        while self.pos.len() < n {
            self.pos.push(-1);
        }
    }
    fn contains(&self, v: Var) -> bool {
        self.pos[v.0 as usize] >= 0
    }
    fn percolate_up(&mut self, mut i: usize, act: &[f64]) {
        let v = self.heap[i];
        while i > 0 {
            let p = (i - 1) / 2;
            if act[self.heap[p].0 as usize] >= act[v.0 as usize] {
                break;
            }
            self.heap[i] = self.heap[p];
            self.pos[self.heap[i].0 as usize] = i as i32;
            i = p;
        }
        self.heap[i] = v;
        self.pos[v.0 as usize] = i as i32;
    }
    fn percolate_down(&mut self, mut i: usize, act: &[f64]) {
        let v = self.heap[i];
        let n = self.heap.len();
        loop {
            let l = 2 * i + 1;
            if l >= n {
                break;
            }
            let r = l + 1;
            let c = if r < n
                && act[self.heap[r].0 as usize] > act[self.heap[l].0 as usize]
            {
                r
            } else {
                l
            };
            if act[self.heap[c].0 as usize] <= act[v.0 as usize] {
                break;
            }
            self.heap[i] = self.heap[c];
            self.pos[self.heap[i].0 as usize] = i as i32;
            i = c;
        }
        self.heap[i] = v;
        self.pos[v.0 as usize] = i as i32;
    }
    fn insert(&mut self, v: Var, act: &[f64]) {
        if self.contains(v) {
            return;
        }
        self.heap.push(v);
        self.percolate_up(self.heap.len() - 1, act);
    }
    fn pop_max(&mut self, act: &[f64]) -> Option<Var> {
        let top = *self.heap.first()?;
        self.pos[top.0 as usize] = -1;
        let last = self.heap.pop().unwrap();
        if !self.heap.is_empty() {
            self.heap[0] = last;
            self.pos[last.0 as usize] = 0;
            self.percolate_down(0, act);
        }
        Some(top)
    }
    fn bumped(&mut self, v: Var, act: &[f64]) {
        if self.contains(v) {
            self.percolate_up(self.pos[v.0 as usize] as usize, act);
        }
    }
    fn rescore(&mut self, act: &[f64]) {
        // Heap order is preserved under uniform rescaling, nothing to do;
        // kept as an explicit hook for clarity.
        let _ = act;
    }
}

pub struct Solver {
    config: SolverConfig,
    clauses: Vec<Clause>,
    watches: Vec<Vec<Watch>>,
    /// Assignment per variable: 0 undefined, 1 true, 2 false.
    assign: Vec<u8>,
    level: Vec<u32>,
    reason: Vec<u32>,
    trail: Vec<Lit>,
    trail_lim: Vec<usize>,
    qhead: usize,
    activity: Vec<f64>,
    var_inc: f64,
    cla_inc: f64,
    order: OrderHeap,
    phase: Vec<bool>,
    n_vars: u32,
    ok: bool,
    n_conflicts: u64,
    n_learnts: usize,
    max_learnts: f64,
    model: Vec<bool>,
    seen: Vec<bool>,
    original: Cnf,
}

impl Solver {
    pub fn new(config: SolverConfig) -> Solver {
        Solver {
            config,
            clauses: Vec::new(),
            watches: Vec::new(),
            assign: Vec::new(),
            level: Vec::new(),
            reason: Vec::new(),
            trail: Vec::new(),
            trail_lim: Vec::new(),
            qhead: 0,
            activity: Vec::new(),
            var_inc: 1.0,
            cla_inc: 1.0,
            order: OrderHeap::default(),
            phase: Vec::new(),
            n_vars: 0,
            ok: true,
            n_conflicts: 0,
            n_learnts: 0,
            max_learnts: 0.0,
            model: Vec::new(),
            seen: Vec::new(),
            original: Cnf::new(),
        }
    }

    pub fn from_cnf(cnf: &Cnf, config: SolverConfig) -> Solver {
        let mut s = Solver::new(config);
        while s.n_vars < cnf.n_vars {
            s.new_var();
        }
        for c in &cnf.clauses {
            s.add_clause(c);
        }
        s
    }

    pub fn n_conflicts(&self) -> u64 {
        self.n_conflicts
    }

    pub fn new_var(&mut self) -> Var {
        let v = Var(self.n_vars);
        self.n_vars += 1;
        self.watches.push(Vec::new());
        self.watches.push(Vec::new());
        self.assign.push(0);
        self.level.push(0);
        self.reason.push(UNDEF_CLAUSE);
        self.activity.push(0.0);
        self.phase.push(false);
        self.seen.push(false);
        self.order.grow_to(self.n_vars as usize);
        self.order.insert(v, &self.activity);
        self.original.n_vars = self.original.n_vars.max(self.n_vars);
        v
    }

    fn value(&self, l: Lit) -> u8 {
        let a = self.assign[l.var().0 as usize];
        if a == 0 {
            0
        } else if (a == 1) != l.is_neg() {
            1
        } else {
            2
        }
    }

    /// Add a clause; returns false if the formula became trivially unsat.
    pub fn add_clause(&mut self, lits: &[Lit]) -> bool {
        if !self.ok {
            return false;
        }
        debug_assert!(self.trail_lim.is_empty());
        self.original.clauses.push(lits.to_vec());
        let mut c: Vec<Lit> = lits.to_vec();
        c.sort();
        c.dedup();
        // Drop tautologies and false literals at level 0.
        let mut i = 0;
        while i + 1 < c.len() {
            if c[i].var() == c[i + 1].var() {
                return true;
            }
            i += 1;
        }
        c.retain(|&l| self.value(l) != 2);
        if c.iter().any(|&l| self.value(l) == 1) {
            return true;
        }
        match c.len() {
            0 => {
                self.ok = false;
                false
            }
            1 => {
                self.enqueue(c[0], UNDEF_CLAUSE);
                self.ok = self.propagate().is_none();
                self.ok
            }
            _ => {
                self.attach(c, false);
                true
            }
        }
    }

    fn attach(&mut self, lits: Vec<Lit>, learnt: bool) -> u32 {
        let id = self.clauses.len() as u32;
        self.watches[lits[0].negate().index()].push(Watch {
            clause: id,
            blocker: lits[1],
        });
        self.watches[lits[1].negate().index()].push(Watch {
            clause: id,
            blocker: lits[0],
        });
        if learnt {
            self.n_learnts += 1;
        }
        self.clauses.push(Clause {
            lits,
            learnt,
            activity: 0.0,
        });
        id
    }

    fn enqueue(&mut self, l: Lit, reason: u32) {
        debug_assert_eq!(self.value(l), 0);
        let v = l.var().0 as usize;
        self.assign[v] = if l.is_neg() { 2 } else { 1 };
        self.level[v] = self.trail_lim.len() as u32;
        self.reason[v] = reason;
        self.phase[v] = !l.is_neg();
        self.trail.push(l);
    }

    fn propagate(&mut self) -> Option<u32> {
        while self.qhead < self.trail.len() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            let mut ws = std::mem::take(&mut self.watches[p.index()]);
            let mut i = 0;
            let mut conflict = None;
            'outer: while i < ws.len() {
                let w = ws[i];
                if self.value(w.blocker) == 1 {
                    i += 1;
                    continue;
                }
                let ci = w.clause as usize;
                // Normalize so the false literal is at position 1.
                if self.clauses[ci].lits[0] == p.negate() {
                    self.clauses[ci].lits.swap(0, 1);
                }
                let first = self.clauses[ci].lits[0];
                if self.value(first) == 1 {
                    ws[i].blocker = first;
                    i += 1;
                    continue;
                }
                for k in 2..self.clauses[ci].lits.len() {
                    let l = self.clauses[ci].lits[k];
                    if self.value(l) != 2 {
                        self.clauses[ci].lits.swap(1, k);
                        self.watches[self.clauses[ci].lits[1].negate().index()].push(Watch {
                            clause: w.clause,
                            blocker: first,
                        });
                        ws.swap_remove(i);
                        continue 'outer;
                    }
                }
                // Unit or conflicting.
                if self.value(first) == 2 {
                    conflict = Some(w.clause);
                    // Keep remaining watches and bail out.
                    self.qhead = self.trail.len();
                    break;
                }
                self.enqueue(first, w.clause);
                i += 1;
            }
            let mut rest = std::mem::take(&mut self.watches[p.index()]);
            ws.append(&mut rest);
            self.watches[p.index()] = ws;
            if conflict.is_some() {
                return conflict;
            }
        }
        None
    }

    fn bump_var(&mut self, v: Var) {
        self.activity[v.0 as usize] += self.var_inc;
        if self.activity[v.0 as usize] > 1e100 {
            for a in &mut self.activity {
                *a *= 1e-100;
            }
            self.var_inc *= 1e-100;
            self.order.rescore(&self.activity);
        }
        self.order.bumped(v, &self.activity);
    }

    fn bump_clause(&mut self, ci: usize) {
        self.clauses[ci].activity += self.cla_inc;
        if self.clauses[ci].activity > 1e20 {
            for c in &mut self.clauses {
                c.activity *= 1e-20;
            }
            self.cla_inc *= 1e-20;
        }
    }

    /// First-UIP conflict analysis. Returns the learnt clause (asserting
    /// literal first) and the backtrack level.
    fn analyze(&mut self, mut confl: u32) -> (Vec<Lit>, u32) {
        let mut learnt: Vec<Lit> = vec![Lit::pos(Var(0))]; // placeholder
        let mut counter = 0usize;
        let mut p: Option<Lit> = None;
        let mut index = self.trail.len();
        let cur_level = self.trail_lim.len() as u32;
        loop {
            let ci = confl as usize;
            self.bump_clause(ci);
            let start = if p.is_some() { 1 } else { 0 };
            let lits = self.clauses[ci].lits.clone();
            for &q in &lits[start..] {
                let v = q.var().0 as usize;
                if !self.seen[v] && self.level[v] > 0 {
                    self.seen[v] = true;
                    self.bump_var(q.var());
                    if self.level[v] >= cur_level {
                        counter += 1;
                    } else {
                        learnt.push(q);
                    }
                }
            }
            // Next literal on the trail that is marked.
            loop {
                index -= 1;
                if self.seen[self.trail[index].var().0 as usize] {
                    break;
                }
            }
            let pl = self.trail[index];
            p = Some(pl);
            self.seen[pl.var().0 as usize] = false;
            counter -= 1;
            if counter == 0 {
                learnt[0] = pl.negate();
                break;
            }
            confl = self.reason[pl.var().0 as usize];
            debug_assert_ne!(confl, UNDEF_CLAUSE);
        }
        // Conflict-clause minimization: drop literals implied by the rest.
        let keep: Vec<Lit> = learnt[1..]
            .iter()
            .copied()
            .filter(|&l| !self.redundant(l))
            .collect();
        let mut out = vec![learnt[0]];
        out.extend(keep);
        for l in &learnt[1..] {
            self.seen[l.var().0 as usize] = false;
        }
        let bt = if out.len() == 1 {
            0
        } else {
            // Second-highest decision level in the clause; move that literal
            // to position 1 so it is watched.
            let mut max_i = 1;
            for i in 2..out.len() {
                if self.level[out[i].var().0 as usize] > self.level[out[max_i].var().0 as usize] {
                    max_i = i;
                }
            }
            out.swap(1, max_i);
            self.level[out[1].var().0 as usize]
        };
        (out, bt)
    }

    /// A literal is redundant if its reason clause is fully covered by
    /// literals already in the learnt clause (one-step self-subsumption).
    fn redundant(&self, l: Lit) -> bool {
        let r = self.reason[l.var().0 as usize];
        if r == UNDEF_CLAUSE {
            return false;
        }
        self.clauses[r as usize]
            .lits
            .iter()
            .all(|&q| q == l.negate() || self.seen[q.var().0 as usize] || self.level[q.var().0 as usize] == 0)
    }

    fn backtrack(&mut self, to_level: u32) {
        while self.trail_lim.len() as u32 > to_level {
            let lim = self.trail_lim.pop().unwrap();
            while self.trail.len() > lim {
                let l = self.trail.pop().unwrap();
                let v = l.var().0 as usize;
                self.assign[v] = 0;
                self.reason[v] = UNDEF_CLAUSE;
                self.order.insert(l.var(), &self.activity);
            }
        }
        self.qhead = self.trail.len();
    }

    fn reduce_db(&mut self) {
        // Delete the less active half of long learnt clauses. Watches are
        // rebuilt from scratch afterwards.
        let mut acts: Vec<f64> = self
            .clauses
            .iter()
            .filter(|c| c.learnt && c.lits.len() > 2)
            .map(|c| c.activity)
            .collect();
        if acts.is_empty() {
            return;
        }
        acts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = acts[acts.len() / 2];
        let locked: std::collections::HashSet<u32> = self
            .reason
            .iter()
            .copied()
            .filter(|&r| r != UNDEF_CLAUSE)
            .collect();
        let mut keep = Vec::with_capacity(self.clauses.len());
        let mut remap = vec![UNDEF_CLAUSE; self.clauses.len()];
        for (i, c) in self.clauses.iter().enumerate() {
            let is_locked = locked.contains(&(i as u32));
            if !c.learnt || c.lits.len() <= 2 || c.activity >= median || is_locked {
                remap[i] = keep.len() as u32;
                keep.push(c.clone());
            }
        }
        self.clauses = keep;
        self.n_learnts = self.clauses.iter().filter(|c| c.learnt).count();
        for r in &mut self.reason {
            if *r != UNDEF_CLAUSE {
                *r = remap[*r as usize];
                debug_assert_ne!(*r, UNDEF_CLAUSE);
            }
        }
        for w in &mut self.watches {
            w.clear();
        }
        for (i, c) in self.clauses.iter().enumerate() {
            self.watches[c.lits[0].negate().index()].push(Watch {
                clause: i as u32,
                blocker: c.lits[1],
            });
            self.watches[c.lits[1].negate().index()].push(Watch {
                clause: i as u32,
                blocker: c.lits[0],
            });
        }
    }

    fn decide(&mut self) -> Option<Lit> {
        while let Some(v) = self.order.pop_max(&self.activity) {
            if self.assign[v.0 as usize] == 0 {
                return Some(Lit::new(v, !self.phase[v.0 as usize]));
            }
        }
        None
    }

    pub fn solve(&mut self) -> SolveResult {
        if !self.ok {
            return SolveResult::Unsat;
        }
        if self.propagate().is_some() {
            self.ok = false;
            return SolveResult::Unsat;
        }
        let mut restart_limit = self.config.restart_first as f64;
        let mut conflicts_since_restart = 0u64;
        self.max_learnts = (self.clauses.len() as f64 / 3.0).max(1000.0);
        let budget_start = self.n_conflicts;
        loop {
            if let Some(confl) = self.propagate() {
                self.n_conflicts += 1;
                conflicts_since_restart += 1;
                if self.trail_lim.is_empty() {
                    self.ok = false;
                    return SolveResult::Unsat;
                }
                let (learnt, bt) = self.analyze(confl);
                self.backtrack(bt);
                if learnt.len() == 1 {
                    self.enqueue(learnt[0], UNDEF_CLAUSE);
                } else {
                    let id = self.attach(learnt.clone(), true);
                    self.enqueue(learnt[0], id);
                }
                self.var_inc /= self.config.var_decay;
                self.cla_inc /= self.config.clause_decay;
                if self.n_conflicts - budget_start >= self.config.conflict_budget {
                    return SolveResult::BudgetExhausted;
                }
                if self.n_conflicts % 256 == 0 {
                    if let Some(d) = self.config.deadline {
                        if Instant::now() >= d {
                            return SolveResult::BudgetExhausted;
                        }
                    }
                }
            } else {
                if conflicts_since_restart as f64 >= restart_limit {
                    restart_limit *= self.config.restart_mult;
                    conflicts_since_restart = 0;
                    self.backtrack(0);
                    continue;
                }
                if self.n_learnts as f64 > self.max_learnts {
                    self.backtrack(0);
                    self.reduce_db();
                    self.max_learnts *= 1.3;
                    continue;
                }
                match self.decide() {
                    None => {
                        self.model = self.assign.iter().map(|&a| a == 1).collect();
                        debug_assert!(self.original.eval(&self.model));
                        assert!(
                            self.original.eval(&self.model),
                            "model fails to satisfy the input formula"
                        );
                        self.backtrack(0);
                        return SolveResult::Sat;
                    }
                    Some(l) => {
                        self.trail_lim.push(self.trail.len());
                        self.enqueue(l, UNDEF_CLAUSE);
                    }
                }
            }
        }
    }

    /// Value of a variable in the most recent satisfying assignment.
    pub fn model_value(&self, v: Var) -> bool {
        self.model[v.0 as usize]
    }

    pub fn model(&self) -> &[bool] {
        &self.model
    }
}
