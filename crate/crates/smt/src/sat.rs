//! Conflict-driven clause learning over a pluggable theory.

use std::fmt;
use std::ops::Not;

use crate::budget::Budget;

pub type Var = u32;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Lit(u32);

impl Lit {
    pub fn new(var: Var, positive: bool) -> Self {
        Lit(var << 1 | u32::from(!positive))
    }

    pub fn pos(var: Var) -> Self {
        Self::new(var, true)
    }

    #[inline]
    pub fn var(self) -> Var {
        self.0 >> 1
    }

    #[inline]
    pub fn is_positive(self) -> bool {
        self.0 & 1 == 0
    }

    #[inline]
    fn index(self) -> usize {
        self.0 as usize
    }
}

impl Not for Lit {
    type Output = Lit;
    #[inline]
    fn not(self) -> Lit {
        Lit(self.0 ^ 1)
    }
}

impl fmt::Debug for Lit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_positive() {
            write!(f, "{}", self.var())
        } else {
            write!(f, "-{}", self.var())
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LBool {
    True,
    False,
    Undef,
}

/// Hook for a decision procedure that checks the conjunction of assigned literals.
pub trait Theory {
    fn push_level(&mut self) {}

    /// Undo everything above `level`; the trail now has `trail_len` entries.
    fn backtrack(&mut self, _level: usize, _trail_len: usize) {}

    /// Called at every propagation fixpoint. On inconsistency returns a clause whose
    /// literals are all false under the current assignment.
    fn check(&mut self, _trail: &[Lit]) -> Result<(), Vec<Lit>> {
        Ok(())
    }
}

impl Theory for () {}

#[derive(Clone, Debug)]
pub struct SatConfig {
    pub var_decay: f64,
    pub clause_decay: f64,
    /// Conflicts in the first Luby restart interval.
    pub restart_base: u64,
    /// Initial learnt-clause limit as a fraction of the original clause count.
    pub learnt_ratio: f64,
    pub learnt_growth: f64,
    /// Seed for the initial order of equally active variables; 0 keeps index order.
    pub seed: u64,
}

impl Default for SatConfig {
    fn default() -> Self {
        Self {
            var_decay: 0.95,
            clause_decay: 0.999,
            restart_base: 100,
            learnt_ratio: 0.5,
            learnt_growth: 1.1,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SatResult {
    Sat,
    /// Subset of the assumptions that cannot hold together (empty: unsat outright).
    Unsat(Vec<Lit>),
    Unknown,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Stats {
    pub decisions: u64,
    pub propagations: u64,
    pub conflicts: u64,
    pub theory_conflicts: u64,
    pub restarts: u64,
    pub learnt: u64,
}

type CRef = u32;

struct Clause {
    lits: Vec<Lit>,
    learnt: bool,
    deleted: bool,
    activity: f64,
}

#[derive(Clone, Copy)]
struct Watcher {
    cref: CRef,
    blocker: Lit,
}

enum Conflict {
    Clause(CRef),
    Theory(Vec<Lit>),
}

enum SearchResult {
    Sat,
    Unsat(Vec<Lit>),
    Restart,
    Unknown,
}

/// Binary max-heap of variables keyed by activity. Variables marked late
/// rank below all others.
#[derive(Default)]
struct VarHeap {
    heap: Vec<Var>,
    pos: Vec<Option<usize>>,
    late: Vec<bool>,
}

impl VarHeap {
    fn better(&self, act: &[f64], a: Var, b: Var) -> bool {
        let (la, lb) = (self.late[a as usize], self.late[b as usize]);
        if la != lb {
            return lb;
        }
        let (x, y) = (act[a as usize], act[b as usize]);
        x > y || (x == y && a < b)
    }

    fn mark_late(&mut self, act: &[f64], v: Var) {
        self.late[v as usize] = true;
        if let Some(i) = self.pos[v as usize] {
            self.down(act, i);
        }
    }

    fn contains(&self, v: Var) -> bool {
        self.pos[v as usize].is_some()
    }

    fn grow(&mut self, n: usize) {
        self.pos.resize(n, None);
        self.late.resize(n, false);
    }

    fn insert(&mut self, act: &[f64], v: Var) {
        if self.contains(v) {
            return;
        }
        self.pos[v as usize] = Some(self.heap.len());
        self.heap.push(v);
        self.up(act, self.heap.len() - 1);
    }

    fn increased(&mut self, act: &[f64], v: Var) {
        if let Some(i) = self.pos[v as usize] {
            self.up(act, i);
        }
    }

    fn pop(&mut self, act: &[f64]) -> Option<Var> {
        let top = *self.heap.first()?;
        let last = self.heap.pop().expect("non-empty heap");
        self.pos[top as usize] = None;
        if !self.heap.is_empty() {
            self.heap[0] = last;
            self.pos[last as usize] = Some(0);
            self.down(act, 0);
        }
        Some(top)
    }

    fn up(&mut self, act: &[f64], mut i: usize) {
        let v = self.heap[i];
        while i > 0 {
            let parent = (i - 1) / 2;
            let p = self.heap[parent];
            if !self.better(act, v, p) {
                break;
            }
            self.heap[i] = p;
            self.pos[p as usize] = Some(i);
            i = parent;
        }
        self.heap[i] = v;
        self.pos[v as usize] = Some(i);
    }

    fn down(&mut self, act: &[f64], mut i: usize) {
        let v = self.heap[i];
        loop {
            let l = 2 * i + 1;
            if l >= self.heap.len() {
                break;
            }
            let r = l + 1;
            let c = if r < self.heap.len() && self.better(act, self.heap[r], self.heap[l]) {
                r
            } else {
                l
            };
            if !self.better(act, self.heap[c], v) {
                break;
            }
            self.heap[i] = self.heap[c];
            self.pos[self.heap[i] as usize] = Some(i);
            i = c;
        }
        self.heap[i] = v;
        self.pos[v as usize] = Some(i);
    }
}

fn luby(y: f64, mut x: u64) -> f64 {
    let mut size = 1u64;
    let mut seq = 0u32;
    while size < x + 1 {
        seq += 1;
        size = 2 * size + 1;
    }
    while size - 1 != x {
        size = (size - 1) >> 1;
        seq -= 1;
        x %= size;
    }
    y.powi(seq as i32)
}

fn splitmix(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub struct SatSolver<T: Theory> {
    pub theory: T,
    config: SatConfig,
    clauses: Vec<Clause>,
    watches: Vec<Vec<Watcher>>,
    assigns: Vec<LBool>,
    level: Vec<usize>,
    reason: Vec<Option<CRef>>,
    polarity: Vec<bool>,
    activity: Vec<f64>,
    seen: Vec<bool>,
    trail: Vec<Lit>,
    trail_lim: Vec<usize>,
    qhead: usize,
    heap: VarHeap,
    var_inc: f64,
    cla_inc: f64,
    num_original: usize,
    num_learnt: usize,
    max_learnts: f64,
    rng: u64,
    ok: bool,
    pub stats: Stats,
}

impl<T: Theory> SatSolver<T> {
    pub fn new(theory: T, config: SatConfig) -> Self {
        let rng = config.seed;
        Self {
            theory,
            config,
            clauses: Vec::new(),
            watches: Vec::new(),
            assigns: Vec::new(),
            level: Vec::new(),
            reason: Vec::new(),
            polarity: Vec::new(),
            activity: Vec::new(),
            seen: Vec::new(),
            trail: Vec::new(),
            trail_lim: Vec::new(),
            qhead: 0,
            heap: VarHeap::default(),
            var_inc: 1.0,
            cla_inc: 1.0,
            num_original: 0,
            num_learnt: 0,
            max_learnts: 0.0,
            rng,
            ok: true,
            stats: Stats::default(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.assigns.len()
    }

    pub fn num_clauses(&self) -> usize {
        self.num_original
    }

    pub fn is_ok(&self) -> bool {
        self.ok
    }

    pub fn new_var(&mut self) -> Var {
        let v = self.assigns.len() as Var;
        self.assigns.push(LBool::Undef);
        self.level.push(0);
        self.reason.push(None);
        self.polarity.push(false);
        let jitter = if self.config.seed == 0 {
            0.0
        } else {
            (splitmix(&mut self.rng) >> 11) as f64 / (1u64 << 53) as f64 * 1e-5
        };
        self.activity.push(jitter);
        self.seen.push(false);
        self.watches.push(Vec::new());
        self.watches.push(Vec::new());
        self.heap.grow(self.assigns.len());
        self.heap.insert(&self.activity, v);
        v
    }

    #[inline]
    pub fn value(&self, lit: Lit) -> LBool {
        match self.assigns[lit.var() as usize] {
            LBool::Undef => LBool::Undef,
            LBool::True if lit.is_positive() => LBool::True,
            LBool::False if !lit.is_positive() => LBool::True,
            _ => LBool::False,
        }
    }

    /// Value of a variable in the last satisfying assignment (still on the trail).
    pub fn model_value(&self, v: Var) -> bool {
        self.assigns[v as usize] == LBool::True
    }

    pub fn decision_level(&self) -> usize {
        self.trail_lim.len()
    }

    /// Adds a permanent clause. Returns false when the clause set became trivially unsat.
    pub fn add_clause(&mut self, lits: &[Lit]) -> bool {
        self.cancel_until(0);
        if !self.ok {
            return false;
        }
        let mut c: Vec<Lit> = lits.to_vec();
        c.sort_unstable();
        c.dedup();
        let mut out = Vec::with_capacity(c.len());
        for (i, &l) in c.iter().enumerate() {
            if i + 1 < c.len() && c[i + 1] == !l {
                return true;
            }
            match self.value(l) {
                LBool::True => return true,
                LBool::False => {}
                LBool::Undef => out.push(l),
            }
        }
        match out.len() {
            0 => {
                self.ok = false;
                false
            }
            1 => {
                self.enqueue(out[0], None);
                true
            }
            _ => {
                self.attach(out, false);
                self.num_original += 1;
                true
            }
        }
    }

    fn attach(&mut self, lits: Vec<Lit>, learnt: bool) -> CRef {
        let cref = self.clauses.len() as CRef;
        self.watches[lits[0].index()].push(Watcher { cref, blocker: lits[1] });
        self.watches[lits[1].index()].push(Watcher { cref, blocker: lits[0] });
        self.clauses.push(Clause { lits, learnt, deleted: false, activity: 0.0 });
        cref
    }

    fn enqueue(&mut self, lit: Lit, reason: Option<CRef>) {
        let v = lit.var() as usize;
        debug_assert_eq!(self.assigns[v], LBool::Undef);
        self.assigns[v] = if lit.is_positive() { LBool::True } else { LBool::False };
        self.level[v] = self.decision_level();
        self.reason[v] = reason;
        self.trail.push(lit);
    }

    fn new_decision_level(&mut self) {
        self.trail_lim.push(self.trail.len());
        self.theory.push_level();
    }

    fn cancel_until(&mut self, level: usize) {
        if self.decision_level() <= level {
            return;
        }
        let lim = self.trail_lim[level];
        for i in (lim..self.trail.len()).rev() {
            let l = self.trail[i];
            let v = l.var() as usize;
            self.assigns[v] = LBool::Undef;
            self.reason[v] = None;
            self.polarity[v] = l.is_positive();
            self.heap.insert(&self.activity, l.var());
        }
        self.trail.truncate(lim);
        self.trail_lim.truncate(level);
        self.qhead = self.qhead.min(lim);
        self.theory.backtrack(level, lim);
    }

    fn propagate(&mut self) -> Option<CRef> {
        while self.qhead < self.trail.len() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            self.stats.propagations += 1;
            let false_lit = !p;
            let mut ws = std::mem::take(&mut self.watches[false_lit.index()]);
            let mut i = 0;
            let mut j = 0;
            let mut conflict = None;
            while i < ws.len() {
                let w = ws[i];
                i += 1;
                if self.value(w.blocker) == LBool::True {
                    ws[j] = w;
                    j += 1;
                    continue;
                }
                let c = &mut self.clauses[w.cref as usize];
                if c.deleted {
                    continue;
                }
                if c.lits[0] == false_lit {
                    c.lits.swap(0, 1);
                }
                let first = c.lits[0];
                let nw = Watcher { cref: w.cref, blocker: first };
                if first != w.blocker && self.value(first) == LBool::True {
                    ws[j] = nw;
                    j += 1;
                    continue;
                }
                let c = &self.clauses[w.cref as usize];
                let mut moved = false;
                for k in 2..c.lits.len() {
                    if self.value(c.lits[k]) != LBool::False {
                        let c = &mut self.clauses[w.cref as usize];
                        c.lits.swap(1, k);
                        let nl = c.lits[1];
                        self.watches[nl.index()].push(nw);
                        moved = true;
                        break;
                    }
                }
                if moved {
                    continue;
                }
                ws[j] = nw;
                j += 1;
                if self.value(first) == LBool::False {
                    conflict = Some(w.cref);
                    while i < ws.len() {
                        ws[j] = ws[i];
                        j += 1;
                        i += 1;
                    }
                } else {
                    self.enqueue(first, Some(w.cref));
                }
            }
            ws.truncate(j);
            let slot = &mut self.watches[false_lit.index()];
            ws.append(slot);
            *slot = ws;
            if conflict.is_some() {
                self.qhead = self.trail.len();
                return conflict;
            }
        }
        None
    }

    /// Branch on `v` only once every other variable is assigned.
    pub fn decide_late(&mut self, v: Var) {
        self.heap.mark_late(&self.activity, v);
    }

    fn bump_var(&mut self, v: Var) {
        self.activity[v as usize] += self.var_inc;
        if self.activity[v as usize] > 1e100 {
            for a in &mut self.activity {
                *a *= 1e-100;
            }
            self.var_inc *= 1e-100;
        }
        self.heap.increased(&self.activity, v);
    }

    fn bump_clause(&mut self, cref: CRef) {
        let c = &mut self.clauses[cref as usize];
        if !c.learnt {
            return;
        }
        c.activity += self.cla_inc;
        if c.activity > 1e20 {
            for c in self.clauses.iter_mut().filter(|c| c.learnt) {
                c.activity *= 1e-20;
            }
            self.cla_inc *= 1e-20;
        }
    }

    /// First-UIP analysis. The conflict must contain a literal of the current level.
    fn analyze(&mut self, conflict: Conflict) -> (Vec<Lit>, usize) {
        let mut learnt = vec![Lit(0)];
        let mut path = 0usize;
        let mut p: Option<Lit> = None;
        let mut index = self.trail.len();
        let mut lits: Vec<Lit> = match conflict {
            Conflict::Clause(c) => {
                self.bump_clause(c);
                self.clauses[c as usize].lits.clone()
            }
            Conflict::Theory(ls) => ls,
        };
        let current = self.decision_level();
        loop {
            for &q in lits.iter().skip(usize::from(p.is_some())) {
                let v = q.var() as usize;
                if !self.seen[v] && self.level[v] > 0 {
                    self.seen[v] = true;
                    self.bump_var(q.var());
                    if self.level[v] >= current {
                        path += 1;
                    } else {
                        learnt.push(q);
                    }
                }
            }
            loop {
                index -= 1;
                if self.seen[self.trail[index].var() as usize] {
                    break;
                }
            }
            let lit = self.trail[index];
            p = Some(lit);
            self.seen[lit.var() as usize] = false;
            path -= 1;
            if path == 0 {
                break;
            }
            let r = self.reason[lit.var() as usize].expect("propagated literal has a reason");
            self.bump_clause(r);
            lits = self.clauses[r as usize].lits.clone();
        }
        learnt[0] = !p.expect("uip");

        // Drop literals implied by the rest of the clause through their reasons.
        let mut keep = vec![learnt[0]];
        for &l in &learnt[1..] {
            let redundant = match self.reason[l.var() as usize] {
                None => false,
                Some(r) => self.clauses[r as usize].lits[1..].iter().all(|q| {
                    self.seen[q.var() as usize] || self.level[q.var() as usize] == 0
                }),
            };
            if !redundant {
                keep.push(l);
            }
        }
        for l in &learnt {
            self.seen[l.var() as usize] = false;
        }
        let mut learnt = keep;

        let bt = if learnt.len() == 1 {
            0
        } else {
            let mut best = 1;
            for i in 2..learnt.len() {
                if self.level[learnt[i].var() as usize] > self.level[learnt[best].var() as usize] {
                    best = i;
                }
            }
            learnt.swap(1, best);
            self.level[learnt[1].var() as usize]
        };
        (learnt, bt)
    }

    /// Assumptions responsible for `p` being false.
    fn analyze_final(&mut self, p: Lit) -> Vec<Lit> {
        let mut out = vec![!p];
        if self.decision_level() == 0 {
            return out;
        }
        self.seen[p.var() as usize] = true;
        for i in (self.trail_lim[0]..self.trail.len()).rev() {
            let l = self.trail[i];
            let v = l.var() as usize;
            if !self.seen[v] {
                continue;
            }
            match self.reason[v] {
                None => out.push(l),
                Some(r) => {
                    for &q in &self.clauses[r as usize].lits[1..] {
                        if self.level[q.var() as usize] > 0 {
                            self.seen[q.var() as usize] = true;
                        }
                    }
                }
            }
            self.seen[v] = false;
        }
        self.seen[p.var() as usize] = false;
        out
    }

    fn locked(&self, cref: CRef) -> bool {
        let c = &self.clauses[cref as usize];
        let v = c.lits[0].var() as usize;
        self.reason[v] == Some(cref) && self.value(c.lits[0]) == LBool::True
    }

    fn reduce_db(&mut self) {
        let mut cands: Vec<CRef> = (0..self.clauses.len() as CRef)
            .filter(|&i| {
                let c = &self.clauses[i as usize];
                c.learnt && !c.deleted && c.lits.len() > 2
            })
            .collect();
        cands.sort_by(|&a, &b| {
            self.clauses[a as usize]
                .activity
                .total_cmp(&self.clauses[b as usize].activity)
                .then(a.cmp(&b))
        });
        let half = cands.len() / 2;
        for &cref in &cands[..half] {
            if !self.locked(cref) {
                let c = &mut self.clauses[cref as usize];
                c.deleted = true;
                c.lits = Vec::new();
                self.num_learnt -= 1;
            }
        }
        log::trace!("reduce_db: {} learnt clauses kept", self.num_learnt);
    }

    fn pick_branch(&mut self) -> Option<Lit> {
        while let Some(v) = self.heap.pop(&self.activity) {
            if self.assigns[v as usize] == LBool::Undef {
                return Some(Lit::new(v, self.polarity[v as usize]));
            }
        }
        None
    }

    fn handle_conflict(&mut self, conflict: Conflict) -> bool {
        self.stats.conflicts += 1;
        let conflict = match conflict {
            Conflict::Theory(lits) => {
                self.stats.theory_conflicts += 1;
                let max = lits.iter().map(|l| self.level[l.var() as usize]).max().unwrap_or(0);
                if max == 0 {
                    return false;
                }
                self.cancel_until(max);
                Conflict::Theory(lits)
            }
            c => c,
        };
        if self.decision_level() == 0 {
            return false;
        }
        let (learnt, bt) = self.analyze(conflict);
        self.cancel_until(bt);
        if learnt.len() == 1 {
            self.enqueue(learnt[0], None);
        } else {
            let first = learnt[0];
            let cref = self.attach(learnt, true);
            self.bump_clause(cref);
            self.num_learnt += 1;
            self.stats.learnt += 1;
            self.enqueue(first, Some(cref));
        }
        self.var_inc /= self.config.var_decay;
        self.cla_inc /= self.config.clause_decay;
        true
    }

    fn search(&mut self, nof_conflicts: u64, assumptions: &[Lit], budget: &Budget, start: u64) -> SearchResult {
        let mut local = 0u64;
        loop {
            let conflict = match self.propagate() {
                Some(c) => Some(Conflict::Clause(c)),
                None => self.theory.check(&self.trail).err().map(Conflict::Theory),
            };
            if let Some(c) = conflict {
                local += 1;
                if !self.handle_conflict(c) {
                    self.ok = false;
                    return SearchResult::Unsat(Vec::new());
                }
                if local.is_multiple_of(64) && budget.expired() {
                    return SearchResult::Unknown;
                }
                if let Some(limit) = budget.conflict_limit() {
                    if self.stats.conflicts - start >= limit {
                        return SearchResult::Unknown;
                    }
                }
                continue;
            }
            if local >= nof_conflicts {
                self.cancel_until(0);
                return SearchResult::Restart;
            }
            if self.num_learnt as f64 >= self.max_learnts + self.trail.len() as f64 {
                self.reduce_db();
            }
            let mut next = None;
            while self.decision_level() < assumptions.len() {
                let p = assumptions[self.decision_level()];
                match self.value(p) {
                    LBool::True => self.new_decision_level(),
                    LBool::False => return SearchResult::Unsat(self.analyze_final(!p)),
                    LBool::Undef => {
                        next = Some(p);
                        break;
                    }
                }
            }
            let next = match next {
                Some(p) => p,
                None => {
                    self.stats.decisions += 1;
                    if self.stats.decisions.is_multiple_of(1024) && budget.expired() {
                        return SearchResult::Unknown;
                    }
                    match self.pick_branch() {
                        Some(p) => p,
                        None => return SearchResult::Sat,
                    }
                }
            };
            self.new_decision_level();
            self.enqueue(next, None);
        }
    }

    /// Solves under `assumptions`. On `Sat` the assignment stays readable through
    /// [`SatSolver::model_value`] until the next mutation.
    pub fn solve(&mut self, assumptions: &[Lit], budget: &Budget) -> SatResult {
        self.cancel_until(0);
        if !self.ok {
            return SatResult::Unsat(Vec::new());
        }
        if budget.expired() {
            return SatResult::Unknown;
        }
        self.max_learnts = (self.num_original as f64 * self.config.learnt_ratio).max(1000.0);
        let start = self.stats.conflicts;
        let mut restarts = 0u64;
        loop {
            let nof = (luby(2.0, restarts) * self.config.restart_base as f64) as u64;
            match self.search(nof, assumptions, budget, start) {
                SearchResult::Sat => return SatResult::Sat,
                SearchResult::Unsat(core) => {
                    let mut core = core;
                    core.sort_unstable();
                    core.dedup();
                    return SatResult::Unsat(core);
                }
                SearchResult::Unknown => {
                    self.cancel_until(0);
                    return SatResult::Unknown;
                }
                SearchResult::Restart => {
                    restarts += 1;
                    self.stats.restarts += 1;
                    self.max_learnts *= self.config.learnt_growth;
                    log::trace!(
                        "restart {} conflicts={} learnt={}",
                        self.stats.restarts,
                        self.stats.conflicts,
                        self.num_learnt
                    );
                    if budget.expired() {
                        return SatResult::Unknown;
                    }
                }
            }
        }
    }
}
