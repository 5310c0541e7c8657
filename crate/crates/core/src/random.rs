//! Small random models for differential testing against brute force.

use std::fmt::Write;

use crate::dsl::load;
use crate::model::Cgm;
use crate::rng::Stream;

#[derive(Clone, Debug)]
pub struct RandomConfig {
    /// Upper bound on elements plus refinements.
    pub max_labels: usize,
    pub assertions: bool,
    pub numeric: bool,
    /// Upper bound on encoded attribute and per-element value variables.
    pub max_numeric: usize,
}

impl Default for RandomConfig {
    fn default() -> Self {
        Self { max_labels: 16, assertions: true, numeric: true, max_numeric: 6 }
    }
}

/// DSL text of a random valid model. Goals `g0..` are layered so that each
/// refinement sources strictly later goals, which keeps the graph acyclic.
pub fn random_model_text(seed: u64, index: u64, cfg: &RandomConfig) -> String {
    let mut rng = Stream::new(seed, index);
    let max = cfg.max_labels.max(3);
    let goals = rng.range(2, 7.min(max as i64 - 1)) as usize;
    let assumptions = rng.range(0, 2.min((max - goals) as i64 - 1).max(0)) as usize;
    let refinements = rng.range(1, (max - goals - assumptions) as i64) as usize;
    let g = |i: usize| format!("g{i}");
    let a = |i: usize| format!("a{i}");
    let mut s = String::new();

    // Attributes used inside `mix` are inlined, leaving `mix` as the only
    // attribute variable; otherwise each of the three gets one.
    let mixed = rng.chance(1, 2);
    let attr_vars = if mixed { 1 } else { 3 };
    let numeric = cfg.numeric && rng.chance(3, 4) && cfg.max_numeric >= attr_vars;
    let mut budget = if numeric { cfg.max_numeric - attr_vars } else { 0 };
    let mut spend = |rng: &mut Stream, num: u64, den: u64| {
        let ok = budget > 0 && rng.chance(num, den);
        if ok {
            budget -= 1;
        }
        ok
    };
    if numeric {
        s.push_str("attr cost;\nattr Penalty;\nattr Reward;\n");
        if mixed {
            s.push_str("attr mix = (cost + 2*Penalty - Reward);\n");
        }
    }
    for i in 0..goals {
        let _ = write!(s, "goal {}", g(i));
        if spend(&mut rng, 1, 3) {
            let _ = write!(s, " penalty {}", rng.range(1, 9));
        }
        if spend(&mut rng, 1, 4) {
            let _ = write!(s, " reward {}", rng.range(1, 9));
        }
        if rng.chance(1, 8) {
            let other = g(rng.index(goals));
            let _ = write!(s, " prereq- (!{other} | {})", g(i));
        }
        if numeric && rng.chance(1, 8) {
            let _ = write!(s, " prereq+ (cost <= {})", rng.range(0, 6));
        }
        s.push_str(";\n");
    }
    for i in 0..assumptions {
        let _ = write!(s, "assumption {}", a(i));
        if spend(&mut rng, 1, 2) {
            let _ = write!(s, " penalty {}", rng.range(1, 4));
        }
        s.push_str(";\n");
    }
    if numeric {
        for i in 0..goals {
            if spend(&mut rng, 1, 3) {
                let _ = write!(s, "set {}.cost sat {}", g(i), rng.range(-2, 5));
                if rng.chance(1, 3) {
                    let _ = write!(s, " deny {}", rng.range(-2, 5));
                }
                s.push_str(";\n");
            }
        }
    }

    // Refinement r targets a goal with a later goal available as source.
    let mut refs: Vec<(usize, Vec<String>)> = Vec::new();
    for _ in 0..refinements {
        let t = rng.index(goals - 1);
        let later = goals - t - 1;
        let n = 1 + rng.index(later.min(3));
        let mut src: Vec<String> = rng.sample(later, n).into_iter().map(|j| g(t + 1 + j)).collect();
        if assumptions > 0 && rng.chance(1, 3) {
            src.push(a(rng.index(assumptions)));
        }
        refs.push((t, src));
    }
    for i in 0..assumptions {
        let name = a(i);
        if !refs.iter().any(|(_, src)| src.contains(&name)) {
            let r = rng.index(refs.len());
            refs[r].1.push(name);
        }
    }
    for (r, (t, src)) in refs.iter().enumerate() {
        let _ = writeln!(s, "refine R{r}: {} <- {};", g(*t), src.join(", "));
    }

    for _ in 0..rng.range(0, 2) {
        let (x, y) = (g(rng.index(goals)), g(rng.index(goals)));
        if x == y {
            continue;
        }
        match rng.below(3) {
            0 => writeln!(s, "contrib {x} -> {y};"),
            1 => writeln!(s, "contrib {x} <-> {y};"),
            _ => writeln!(s, "conflict {x} -- {y};"),
        }
        .expect("string write");
    }
    if refs.len() >= 2 && rng.chance(1, 3) {
        let p = rng.sample(refs.len(), 2);
        let _ = writeln!(s, "bind R{} ~ R{};", p[0], p[1]);
    }
    // Preferences between alternative refinements of one goal.
    for _ in 0..rng.range(0, 2) {
        let r = rng.index(refs.len());
        if let Some(o) = (0..refs.len()).find(|&o| o != r && refs[o].0 == refs[r].0) {
            let _ = writeln!(s, "prefer R{r} > R{o};");
        }
    }
    if rng.chance(1, 4) {
        let p = rng.sample(goals, 2.min(goals));
        let sugar = ["Alt", "Causes", "Requires", "AtMostOneOf", "AtLeastOneOf", "OneOf"];
        let kind = *rng.pick(&sugar);
        let args: Vec<String> = p.into_iter().map(g).collect();
        let _ = writeln!(s, "sugar {kind}({});", args.join(", "));
    }
    if cfg.assertions && rng.chance(2, 3) {
        let _ = writeln!(s, "assert g0 true;");
        if rng.chance(1, 4) {
            let _ = writeln!(s, "assert {} {};", g(rng.index(goals)), rng.chance(1, 2));
        }
    }
    if numeric && rng.chance(1, 2) {
        let _ = writeln!(s, "objective score max (Reward - cost);");
    }
    s
}

/// Random model, retrying with the next index of the same stream family until
/// validation passes.
pub fn random_model(seed: u64, index: u64, cfg: &RandomConfig) -> Cgm {
    let mut i = index;
    loop {
        if let Ok(m) = load(&random_model_text(seed, i, cfg)) {
            return m;
        }
        i = i.wrapping_add(1 << 32);
    }
}
