//! CDCL with two watched literals and first-UIP learning. Learned clauses
//! are logged as a RUP proof.

use crate::cert::RupProof;
use crate::translate::CnfProblem;

pub const DEFAULT_CONFLICT_BUDGET: u64 = 100_000;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SatResult {
    /// `model[v - 1]` is the value of variable `v`.
    Sat(Vec<bool>),
    Unsat(RupProof),
    ResourceLimit,
}

fn code(l: i32) -> usize {
    2 * (l.unsigned_abs() as usize - 1) + usize::from(l < 0)
}

struct Solver {
    clauses: Vec<Vec<i32>>,
    watches: Vec<Vec<usize>>,
    // per variable (0-based)
    value: Vec<i8>,
    level: Vec<usize>,
    reason: Vec<Option<usize>>,
    activity: Vec<f64>,
    phase: Vec<bool>,
    trail: Vec<i32>,
    trail_lim: Vec<usize>,
    qhead: usize,
    bump: f64,
    proof: Vec<Vec<i32>>,
}

impl Solver {
    fn lit_value(&self, l: i32) -> i8 {
        let v = self.value[l.unsigned_abs() as usize - 1];
        if l > 0 {
            v
        } else {
            -v
        }
    }

    fn assign(&mut self, l: i32, reason: Option<usize>) {
        let v = l.unsigned_abs() as usize - 1;
        self.value[v] = if l > 0 { 1 } else { -1 };
        self.level[v] = self.trail_lim.len();
        self.reason[v] = reason;
        self.phase[v] = l > 0;
        self.trail.push(l);
    }

    /// Adds a clause of length >= 2, watching its first two literals.
    fn attach(&mut self, c: Vec<i32>) -> usize {
        let i = self.clauses.len();
        self.watches[code(-c[0])].push(i);
        self.watches[code(-c[1])].push(i);
        self.clauses.push(c);
        i
    }

    /// Returns a conflicting clause index, if any.
    fn propagate(&mut self) -> Option<usize> {
        while self.qhead < self.trail.len() {
            let l = self.trail[self.qhead];
            self.qhead += 1;
            // clauses watching the literal that just became false (-l)
            let mut ws = std::mem::take(&mut self.watches[code(l)]);
            let mut i = 0;
            while i < ws.len() {
                let ci = ws[i];
                let falsified = -l;
                let c = &mut self.clauses[ci];
                if c[0] == falsified {
                    c.swap(0, 1);
                }
                let first = c[0];
                if self.lit_value(first) == 1 {
                    i += 1;
                    continue;
                }
                let c = &self.clauses[ci];
                let repl = (2..c.len()).find(|&k| self.lit_value(c[k]) != -1);
                if let Some(k) = repl {
                    let c = &mut self.clauses[ci];
                    c.swap(1, k);
                    let nw = c[1];
                    self.watches[code(-nw)].push(ci);
                    ws.swap_remove(i);
                    continue;
                }
                if self.lit_value(first) == -1 {
                    self.watches[code(l)] = ws;
                    self.qhead = self.trail.len();
                    return Some(ci);
                }
                self.assign(first, Some(ci));
                i += 1;
            }
            self.watches[code(l)] = ws;
        }
        None
    }

    fn analyze(&mut self, mut confl: usize) -> (Vec<i32>, usize) {
        let n = self.value.len();
        let mut seen = vec![false; n];
        let mut learnt = vec![0];
        let mut pending = 0;
        let mut idx = self.trail.len();
        let cur = self.trail_lim.len();
        let mut p: Option<i32> = None;
        loop {
            let lits: Vec<i32> = self.clauses[confl].clone();
            for &q in &lits {
                if Some(q) == p {
                    continue;
                }
                let v = q.unsigned_abs() as usize - 1;
                if !seen[v] && self.level[v] > 0 {
                    seen[v] = true;
                    self.activity[v] += self.bump;
                    if self.level[v] >= cur {
                        pending += 1;
                    } else {
                        learnt.push(q);
                    }
                }
            }
            loop {
                idx -= 1;
                if seen[self.trail[idx].unsigned_abs() as usize - 1] {
                    break;
                }
            }
            let l = self.trail[idx];
            let v = l.unsigned_abs() as usize - 1;
            seen[v] = false;
            pending -= 1;
            if pending == 0 {
                learnt[0] = -l;
                break;
            }
            p = Some(l);
            confl = self.reason[v].expect("non-decision literal has a reason");
        }
        self.bump *= 1.05;
        if self.bump > 1e100 {
            for a in &mut self.activity {
                *a *= 1e-100;
            }
            self.bump *= 1e-100;
        }
        let mut back = 0;
        if learnt.len() > 1 {
            let (k, lvl) = learnt[1..]
                .iter()
                .enumerate()
                .map(|(k, l)| (k + 1, self.level[l.unsigned_abs() as usize - 1]))
                .max_by_key(|&(_, lvl)| lvl)
                .expect("non-empty");
            learnt.swap(1, k);
            back = lvl;
        }
        (learnt, back)
    }

    fn backtrack(&mut self, lvl: usize) {
        if self.trail_lim.len() <= lvl {
            return;
        }
        let start = self.trail_lim[lvl];
        for l in self.trail.drain(start..) {
            self.value[l.unsigned_abs() as usize - 1] = 0;
        }
        self.trail_lim.truncate(lvl);
        self.qhead = self.trail.len();
    }

    fn decide(&mut self) -> Option<i32> {
        let mut best: Option<usize> = None;
        for v in 0..self.value.len() {
            if self.value[v] == 0 && best.is_none_or(|b| self.activity[v] > self.activity[b]) {
                best = Some(v);
            }
        }
        best.map(|v| {
            let l = v as i32 + 1;
            if self.phase[v] {
                l
            } else {
                -l
            }
        })
    }
}

/// Decides `p`, refuting it with a RUP proof or returning a total model.
pub fn solve_sat(p: &CnfProblem, conflict_budget: u64) -> SatResult {
    let n = p.num_vars() as usize;
    let mut s = Solver {
        clauses: Vec::new(),
        watches: vec![Vec::new(); 2 * n],
        value: vec![0; n],
        level: vec![0; n],
        reason: vec![None; n],
        activity: vec![0.0; n],
        phase: vec![false; n],
        trail: Vec::new(),
        trail_lim: Vec::new(),
        qhead: 0,
        bump: 1.0,
        proof: Vec::new(),
    };
    let unsat = |mut proof: Vec<Vec<i32>>| {
        proof.push(Vec::new());
        SatResult::Unsat(RupProof { clauses: proof })
    };
    let mut units = Vec::new();
    for c in p.clauses() {
        match c.len() {
            0 => return unsat(Vec::new()),
            1 => units.push(c[0]),
            _ => {
                s.attach(c.clone());
            }
        }
    }
    for l in units {
        match s.lit_value(l) {
            -1 => return unsat(Vec::new()),
            0 => s.assign(l, None),
            _ => {}
        }
    }
    let mut conflicts = 0u64;
    loop {
        if let Some(confl) = s.propagate() {
            if s.trail_lim.is_empty() {
                return unsat(s.proof);
            }
            conflicts += 1;
            if conflicts > conflict_budget {
                return SatResult::ResourceLimit;
            }
            let (learnt, back) = s.analyze(confl);
            s.proof.push(learnt.clone());
            s.backtrack(back);
            if learnt.len() == 1 {
                s.assign(learnt[0], None);
            } else {
                let first = learnt[0];
                let ci = s.attach(learnt);
                s.assign(first, Some(ci));
            }
        } else {
            match s.decide() {
                None => return SatResult::Sat(s.value.iter().map(|&v| v == 1).collect()),
                Some(l) => {
                    s.trail_lim.push(s.trail.len());
                    s.assign(l, None);
                }
            }
        }
    }
}
