//! Incremental bounded simplex over δ-extended values with backtrackable bounds.

use std::collections::BTreeSet;

use crate::sat::Lit;
use crate::scalar::{DeltaValue, Scalar};

#[derive(Clone, Debug)]
pub struct Bound<S> {
    pub value: DeltaValue<S>,
    pub reason: Lit,
}

#[derive(Clone, Debug)]
struct Row<S> {
    basic: usize,
    /// `basic = Σ coeff·var` over nonbasic variables, sorted by variable.
    coeffs: Vec<(usize, S)>,
}

#[derive(Clone, Debug)]
struct TrailEntry<S> {
    var: usize,
    upper: bool,
    old: Option<Bound<S>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OptResult<S> {
    Optimal(DeltaValue<S>),
    Unbounded,
}

#[derive(Clone, Debug)]
pub struct Simplex<S> {
    lower: Vec<Option<Bound<S>>>,
    upper: Vec<Option<Bound<S>>>,
    value: Vec<DeltaValue<S>>,
    row_of: Vec<Option<usize>>,
    rows: Vec<Row<S>>,
    /// Rows in which each nonbasic variable occurs.
    cols: Vec<BTreeSet<usize>>,
    trail: Vec<TrailEntry<S>>,
    marks: Vec<usize>,
    dirty: BTreeSet<usize>,
    pub pivots: u64,
}

impl<S: Scalar> Default for Simplex<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> Simplex<S> {
    pub fn new() -> Self {
        Self {
            lower: Vec::new(),
            upper: Vec::new(),
            value: Vec::new(),
            row_of: Vec::new(),
            rows: Vec::new(),
            cols: Vec::new(),
            trail: Vec::new(),
            marks: Vec::new(),
            dirty: BTreeSet::new(),
            pivots: 0,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.value.len()
    }

    pub fn new_var(&mut self) -> usize {
        let v = self.value.len();
        self.lower.push(None);
        self.upper.push(None);
        self.value.push(DeltaValue::zero());
        self.row_of.push(None);
        self.cols.push(BTreeSet::new());
        v
    }

    /// Introduces `s = Σ coeff·var` as a new basic variable and returns `s`.
    pub fn add_row(&mut self, terms: &[(usize, S)]) -> usize {
        let s = self.new_var();
        let mut acc: Vec<(usize, S)> = Vec::new();
        for (v, c) in terms {
            match self.row_of[*v] {
                Some(r) => {
                    let sub: Vec<(usize, S)> =
                        self.rows[r].coeffs.iter().map(|(x, a)| (*x, a.clone() * c.clone())).collect();
                    acc = merge(&acc, &sub);
                }
                None => acc = merge(&acc, &[(*v, c.clone())]),
            }
        }
        let r = self.rows.len();
        let mut val = DeltaValue::zero();
        for (v, c) in &acc {
            self.cols[*v].insert(r);
            val = &val + &self.value[*v].scale(c);
        }
        self.value[s] = val;
        self.rows.push(Row { basic: s, coeffs: acc });
        self.row_of[s] = Some(r);
        s
    }

    pub fn value(&self, v: usize) -> &DeltaValue<S> {
        &self.value[v]
    }

    pub fn lower(&self, v: usize) -> Option<&Bound<S>> {
        self.lower[v].as_ref()
    }

    pub fn upper(&self, v: usize) -> Option<&Bound<S>> {
        self.upper[v].as_ref()
    }

    pub fn push_level(&mut self) {
        self.marks.push(self.trail.len());
    }

    pub fn backtrack(&mut self, level: usize) {
        if level >= self.marks.len() {
            return;
        }
        let mark = self.marks[level];
        self.marks.truncate(level);
        while self.trail.len() > mark {
            let e = self.trail.pop().expect("trail entry");
            if e.upper {
                self.upper[e.var] = e.old;
            } else {
                self.lower[e.var] = e.old;
            }
        }
    }

    fn violates(&self, v: usize) -> bool {
        matches!(&self.lower[v], Some(l) if self.value[v] < l.value)
            || matches!(&self.upper[v], Some(u) if self.value[v] > u.value)
    }

    fn touch(&mut self, v: usize) {
        if self.row_of[v].is_some() && self.violates(v) {
            self.dirty.insert(v);
        }
    }

    /// Asserts `v ≤ value` (or `v ≥ value` when `upper` is false).
    pub fn assert_bound(
        &mut self,
        v: usize,
        upper: bool,
        value: DeltaValue<S>,
        reason: Lit,
    ) -> Result<(), Vec<Lit>> {
        if upper {
            if matches!(&self.upper[v], Some(u) if u.value <= value) {
                return Ok(());
            }
            if let Some(l) = &self.lower[v] {
                if value < l.value {
                    return Err(vec![reason, l.reason]);
                }
            }
        } else {
            if matches!(&self.lower[v], Some(l) if l.value >= value) {
                return Ok(());
            }
            if let Some(u) = &self.upper[v] {
                if value > u.value {
                    return Err(vec![reason, u.reason]);
                }
            }
        }
        let bound = Bound { value: value.clone(), reason };
        let old = if upper {
            self.upper[v].replace(bound)
        } else {
            self.lower[v].replace(bound)
        };
        self.trail.push(TrailEntry { var: v, upper, old });
        if self.row_of[v].is_some() {
            self.touch(v);
        } else if (upper && self.value[v] > value) || (!upper && self.value[v] < value) {
            self.update(v, value);
        }
        Ok(())
    }

    fn update(&mut self, x: usize, target: DeltaValue<S>) {
        let diff = &target - &self.value[x];
        let rows: Vec<usize> = self.cols[x].iter().copied().collect();
        for r in rows {
            let c = coeff_of(&self.rows[r].coeffs, x).expect("column index in sync");
            let b = self.rows[r].basic;
            self.value[b] = &self.value[b] + &diff.scale(&c);
            self.touch(b);
        }
        self.value[x] = target;
    }

    fn pivot_and_update(&mut self, basic: usize, entering: usize, target: DeltaValue<S>) {
        let r = self.row_of[basic].expect("basic variable");
        let a = coeff_of(&self.rows[r].coeffs, entering).expect("entering var in row");
        let theta = (&target - &self.value[basic]).div(&a);
        self.value[basic] = target;
        self.value[entering] = &self.value[entering] + &theta;
        let others: Vec<usize> = self.cols[entering].iter().copied().filter(|&o| o != r).collect();
        for o in others {
            let c = coeff_of(&self.rows[o].coeffs, entering).expect("column index in sync");
            let b = self.rows[o].basic;
            self.value[b] = &self.value[b] + &theta.scale(&c);
        }
        self.pivot(r, basic, entering);
        self.touch(entering);
        let rows: Vec<usize> = self.cols[basic].iter().copied().collect();
        for o in rows {
            let b = self.rows[o].basic;
            self.touch(b);
        }
    }

    fn pivot(&mut self, r: usize, basic: usize, entering: usize) {
        self.pivots += 1;
        let a = coeff_of(&self.rows[r].coeffs, entering).expect("entering var in row");
        let inv = S::one() / a;
        let neg_inv = -inv.clone();
        let mut coeffs: Vec<(usize, S)> = Vec::with_capacity(self.rows[r].coeffs.len());
        for (v, c) in &self.rows[r].coeffs {
            if *v != entering {
                coeffs.push((*v, c.clone() * neg_inv.clone()));
            }
        }
        let pos = coeffs.partition_point(|(v, _)| *v < basic);
        coeffs.insert(pos, (basic, inv));
        self.cols[entering].remove(&r);
        self.cols[basic].insert(r);
        self.rows[r] = Row { basic: entering, coeffs };
        self.row_of[basic] = None;
        self.row_of[entering] = Some(r);

        let others: Vec<usize> = std::mem::take(&mut self.cols[entering]).into_iter().collect();
        for o in others {
            let c = coeff_of(&self.rows[o].coeffs, entering).expect("column index in sync");
            let old = std::mem::take(&mut self.rows[o].coeffs);
            let scaled: Vec<(usize, S)> = self.rows[r]
                .coeffs
                .iter()
                .map(|(v, k)| (*v, k.clone() * c.clone()))
                .collect();
            let without: Vec<(usize, S)> = old.iter().filter(|(v, _)| *v != entering).cloned().collect();
            let merged = merge(&without, &scaled);
            for (v, _) in &without {
                if coeff_of(&merged, *v).is_none() {
                    self.cols[*v].remove(&o);
                }
            }
            for (v, _) in &merged {
                self.cols[*v].insert(o);
            }
            self.rows[o].coeffs = merged;
        }
    }

    /// Restores feasibility or returns the reasons of an infeasible row.
    pub fn check(&mut self) -> Result<(), Vec<Lit>> {
        loop {
            let Some(b) = self.dirty.pop_first() else { return Ok(()) };
            if self.row_of[b].is_none() || !self.violates(b) {
                continue;
            }
            let r = self.row_of[b].expect("basic variable");
            let below = matches!(&self.lower[b], Some(l) if self.value[b] < l.value);
            let mut entering = None;
            for (x, a) in &self.rows[r].coeffs {
                let increase = a.is_positive() == below;
                let free = if increase {
                    !matches!(&self.upper[*x], Some(u) if self.value[*x] >= u.value)
                } else {
                    !matches!(&self.lower[*x], Some(l) if self.value[*x] <= l.value)
                };
                if free {
                    entering = Some(*x);
                    break;
                }
            }
            match entering {
                Some(x) => {
                    let target = if below {
                        self.lower[b].as_ref().expect("violated lower").value.clone()
                    } else {
                        self.upper[b].as_ref().expect("violated upper").value.clone()
                    };
                    self.pivot_and_update(b, x, target);
                }
                None => {
                    self.dirty.insert(b);
                    let mut reasons = Vec::with_capacity(self.rows[r].coeffs.len() + 1);
                    if below {
                        reasons.push(self.lower[b].as_ref().expect("violated lower").reason);
                    } else {
                        reasons.push(self.upper[b].as_ref().expect("violated upper").reason);
                    }
                    for (x, a) in &self.rows[r].coeffs {
                        let use_upper = a.is_positive() == below;
                        let bound = if use_upper { &self.upper[*x] } else { &self.lower[*x] };
                        reasons.push(bound.as_ref().expect("blocking bound").reason);
                    }
                    reasons.sort_unstable();
                    reasons.dedup();
                    return Err(reasons);
                }
            }
        }
    }

    /// Moves the feasible assignment to an extremum of `v` (minimum when `minimize`).
    pub fn optimize(&mut self, v: usize, minimize: bool) -> OptResult<S> {
        debug_assert!(self.dirty.iter().all(|&b| !self.violates(b)));
        loop {
            let obj: Vec<(usize, S)> = match self.row_of[v] {
                Some(r) => self.rows[r].coeffs.clone(),
                None => vec![(v, S::one())],
            };
            // Pick the smallest improving nonbasic variable.
            let mut entering = None;
            for (x, c) in &obj {
                let increase = c.is_positive() != minimize;
                let movable = if increase {
                    !matches!(&self.upper[*x], Some(u) if self.value[*x] >= u.value)
                } else {
                    !matches!(&self.lower[*x], Some(l) if self.value[*x] <= l.value)
                };
                if movable {
                    entering = Some((*x, increase));
                    break;
                }
            }
            let Some((x, increase)) = entering else {
                return OptResult::Optimal(self.value[v].clone());
            };
            // Ratio test: limit is (step, leaving basic or None for x's own bound).
            let mut limit: Option<(DeltaValue<S>, Option<usize>)> = None;
            let own = if increase { &self.upper[x] } else { &self.lower[x] };
            if let Some(bd) = own {
                let step = if increase { &bd.value - &self.value[x] } else { &self.value[x] - &bd.value };
                limit = Some((step, None));
            }
            for &r in &self.cols[x] {
                let a = coeff_of(&self.rows[r].coeffs, x).expect("column index in sync");
                let b = self.rows[r].basic;
                let up = a.is_positive() == increase;
                let bd = if up { &self.upper[b] } else { &self.lower[b] };
                if let Some(bd) = bd {
                    let gap = if up { &bd.value - &self.value[b] } else { &self.value[b] - &bd.value };
                    let step = gap.div(&a.abs());
                    let better = match &limit {
                        None => true,
                        Some((s, who)) => {
                            step < *s || (step == *s && who.is_some_and(|w| b < w))
                        }
                    };
                    if better {
                        limit = Some((step, Some(b)));
                    }
                }
            }
            match limit {
                None => return OptResult::Unbounded,
                Some((step, None)) => {
                    let target = if increase { &self.value[x] + &step } else { &self.value[x] - &step };
                    self.update(x, target);
                }
                Some((_, Some(b))) => {
                    let r = self.row_of[b].expect("basic variable");
                    let a = coeff_of(&self.rows[r].coeffs, x).expect("entering var in row");
                    let up = a.is_positive() == increase;
                    let target = if up {
                        self.upper[b].as_ref().expect("bound").value.clone()
                    } else {
                        self.lower[b].as_ref().expect("bound").value.clone()
                    };
                    self.pivot_and_update(b, x, target);
                }
            }
        }
    }

    /// Largest δ in (0, 1] for which the current assignment satisfies every bound.
    pub fn concrete_delta(&self) -> S {
        let mut delta = S::one();
        for v in 0..self.value.len() {
            let val = &self.value[v];
            if let Some(l) = &self.lower[v] {
                if l.value.real < val.real && l.value.delta > val.delta {
                    let d = (val.real.clone() - l.value.real.clone())
                        / (l.value.delta.clone() - val.delta.clone());
                    if d < delta {
                        delta = d;
                    }
                }
            }
            if let Some(u) = &self.upper[v] {
                if val.real < u.value.real && val.delta > u.value.delta {
                    let d = (u.value.real.clone() - val.real.clone())
                        / (val.delta.clone() - u.value.delta.clone());
                    if d < delta {
                        delta = d;
                    }
                }
            }
        }
        delta
    }

    /// Tableau consistency: every basic value equals its row evaluated at the nonbasic values.
    pub fn rows_consistent(&self) -> bool {
        self.rows.iter().all(|row| {
            let mut acc = DeltaValue::zero();
            for (v, c) in &row.coeffs {
                if self.row_of[*v].is_some() {
                    return false;
                }
                acc = &acc + &self.value[*v].scale(c);
            }
            acc == self.value[row.basic]
        })
    }
}

fn coeff_of<S: Scalar>(coeffs: &[(usize, S)], v: usize) -> Option<S> {
    coeffs.binary_search_by_key(&v, |(x, _)| *x).ok().map(|i| coeffs[i].1.clone())
}

fn merge<S: Scalar>(a: &[(usize, S)], b: &[(usize, S)]) -> Vec<(usize, S)> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() || j < b.len() {
        if j == b.len() || (i < a.len() && a[i].0 < b[j].0) {
            out.push(a[i].clone());
            i += 1;
        } else if i == a.len() || b[j].0 < a[i].0 {
            out.push(b[j].clone());
            j += 1;
        } else {
            let s = a[i].1.clone() + b[j].1.clone();
            if !s.is_zero() {
                out.push((a[i].0, s));
            }
            i += 1;
            j += 1;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    fn q(n: i64) -> BigRational {
        BigRational::from_integer(n.into())
    }

    fn dv(n: i64) -> DeltaValue<BigRational> {
        DeltaValue::exact(q(n))
    }

    #[test]
    fn infeasible_row_is_explained() {
        let mut s = Simplex::new();
        let x = s.new_var();
        let y = s.new_var();
        let sum = s.add_row(&[(x, q(1)), (y, q(1))]);
        s.assert_bound(x, true, dv(2), Lit::pos(0)).unwrap();
        s.assert_bound(y, true, dv(3), Lit::pos(1)).unwrap();
        s.assert_bound(x, false, dv(-10), Lit::pos(4)).unwrap();
        s.push_level();
        s.assert_bound(sum, false, dv(6), Lit::pos(2)).unwrap();
        let mut why = s.check().unwrap_err();
        why.sort();
        assert_eq!(why, vec![Lit::pos(0), Lit::pos(1), Lit::pos(2)]);
        s.backtrack(0);
        s.assert_bound(sum, false, dv(5), Lit::pos(3)).unwrap();
        assert!(s.check().is_ok());
        assert!(s.rows_consistent());
        assert_eq!(s.value(sum), &dv(5));
    }

    #[test]
    fn optimize_reaches_vertex() {
        let mut s = Simplex::new();
        let x = s.new_var();
        let y = s.new_var();
        let a = s.add_row(&[(x, q(1)), (y, q(2))]);
        let b = s.add_row(&[(x, q(1)), (y, q(-1))]);
        s.assert_bound(a, true, dv(4), Lit::pos(0)).unwrap();
        s.assert_bound(b, true, dv(1), Lit::pos(1)).unwrap();
        s.assert_bound(x, false, dv(0), Lit::pos(2)).unwrap();
        s.assert_bound(y, false, dv(0), Lit::pos(3)).unwrap();
        s.check().unwrap();
        let obj = s.add_row(&[(x, q(-1)), (y, q(-1))]);
        assert_eq!(s.optimize(obj, true), OptResult::Optimal(dv(-3)));
        assert!(s.rows_consistent());
        assert_eq!(s.optimize(x, false), OptResult::Optimal(DeltaValue::exact(q(2))));
    }

    #[test]
    fn strict_bound_gives_infinitesimal_optimum() {
        let mut s: Simplex<BigRational> = Simplex::new();
        let x = s.new_var();
        s.assert_bound(x, false, DeltaValue::new(q(3), q(1)), Lit::pos(0)).unwrap();
        s.check().unwrap();
        assert_eq!(s.optimize(x, true), OptResult::Optimal(DeltaValue::new(q(3), q(1))));
        let y = s.new_var();
        assert_eq!(s.optimize(y, true), OptResult::Unbounded);
    }
}
