//! SMT-LIB v2 export of the encoding, for cross-checking with external OMT
//! solvers.

use std::fmt::Write;

use cgm_smt::{CmpOp, Direction};
use num_traits::{One, Signed, Zero};

use crate::encoder::{encode, EncodeError, EncodedProblem, ObjectiveSpec};
use crate::model::Cgm;
use crate::{BoolExpr, LinExpr, Q};

fn symbol(name: &str) -> String {
    let simple = !name.is_empty()
        && !name.starts_with(|c: char| c.is_ascii_digit())
        && name.chars().all(|c| c.is_ascii_alphanumeric() || "~!@$%^&*_-+=<>.?/".contains(c));
    if simple {
        name.to_string()
    } else {
        format!("|{}|", name.replace(['|', '\\'], "_"))
    }
}

fn numeral(q: &Q) -> String {
    let abs = q.abs();
    let body = if abs.is_integer() { abs.numer().to_string() } else { format!("(/ {} {})", abs.numer(), abs.denom()) };
    if q.is_negative() {
        format!("(- {body})")
    } else {
        body
    }
}

struct Printer<'a> {
    enc: &'a EncodedProblem,
}

impl Printer<'_> {
    fn linear(&self, e: &LinExpr, with_constant: bool) -> String {
        let mut parts: Vec<String> = e
            .terms()
            .iter()
            .map(|(v, k)| {
                let name = symbol(&self.enc.var_name(*v));
                if k.is_one() {
                    name
                } else {
                    format!("(* {} {name})", numeral(k))
                }
            })
            .collect();
        if with_constant && (!e.constant_term().is_zero() || parts.is_empty()) {
            parts.push(numeral(e.constant_term()));
        }
        match parts.len() {
            1 => parts.pop().expect("one part"),
            _ => format!("(+ {})", parts.join(" ")),
        }
    }

    fn bool(&self, e: &BoolExpr) -> String {
        let list = |op: &str, xs: &[BoolExpr], empty: &str| {
            if xs.is_empty() {
                empty.to_string()
            } else {
                let inner: Vec<String> = xs.iter().map(|x| self.bool(x)).collect();
                format!("({op} {})", inner.join(" "))
            }
        };
        match e {
            BoolExpr::Const(b) => b.to_string(),
            BoolExpr::Var(v) => symbol(&self.enc.labels[v.0 as usize]),
            BoolExpr::Not(x) => format!("(not {})", self.bool(x)),
            BoolExpr::And(xs) => list("and", xs, "true"),
            BoolExpr::Or(xs) => list("or", xs, "false"),
            BoolExpr::Implies(a, b) => format!("(=> {} {})", self.bool(a), self.bool(b)),
            BoolExpr::Iff(a, b) => format!("(= {} {})", self.bool(a), self.bool(b)),
            // `lhs ⋈ 0` is printed as `vars ⋈ -constant`.
            BoolExpr::Cmp(lhs, op) => {
                let op = match op {
                    CmpOp::Lt => "<",
                    CmpOp::Le => "<=",
                    CmpOp::Eq => "=",
                    CmpOp::Ge => ">=",
                    CmpOp::Gt => ">",
                };
                if lhs.terms().is_empty() {
                    return format!("({op} {} 0)", numeral(lhs.constant_term()));
                }
                format!("({op} {} {})", self.linear(lhs, false), numeral(&-lhs.constant_term().clone()))
            }
        }
    }
}

/// Script with declarations, one named assertion per constraint, the requested
/// objectives in lexicographic order, `(check-sat)` and `(get-objectives)`.
pub fn export(m: &Cgm, specs: &[ObjectiveSpec]) -> Result<String, EncodeError> {
    let enc = encode(m, specs)?;
    Ok(export_encoded(&enc))
}

pub fn export_encoded(enc: &EncodedProblem) -> String {
    let p = Printer { enc };
    let mut s = String::new();
    s.push_str("(set-logic QF_LRA)\n");
    if enc.objectives.len() > 1 {
        s.push_str("(set-option :opt.priority lex)\n");
    }
    for l in &enc.labels {
        let _ = writeln!(s, "(declare-fun {} () Bool)", symbol(l));
    }
    for i in 0..enc.problem.num_reals {
        let _ = writeln!(s, "(declare-fun {} () Real)", symbol(&enc.var_name(cgm_smt::RealVar(i))));
    }
    let mut last_group = None;
    let mut counter = 0;
    for c in &enc.problem.constraints {
        if last_group != Some(c.group) {
            let _ = writeln!(s, "; {}", enc.group_tag(c.group));
            last_group = Some(c.group);
            counter = 0;
        }
        let _ = writeln!(s, "(assert (! {} :named g{}_{counter}))", p.bool(&c.expr), c.group);
        counter += 1;
    }
    for o in &enc.objectives {
        let cmd = match o.direction {
            Direction::Minimize => "minimize",
            Direction::Maximize => "maximize",
        };
        let _ = writeln!(s, "({cmd} {} :id {})", p.linear(&o.expr, true), symbol(&o.id));
    }
    s.push_str("(check-sat)\n");
    if !enc.objectives.is_empty() {
        s.push_str("(get-objectives)\n");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::load;

    #[test]
    fn strict_atom_is_verbatim() {
        let m = load("attr cost; goal A prereq+ (cost < 100); set A.cost sat 3;").unwrap();
        let text = export(&m, &[ObjectiveSpec::min("cost")]).unwrap();
        assert!(text.contains("(< cost 100)"), "{text}");
        assert!(text.contains("(minimize cost :id cost)"), "{text}");
        assert!(text.ends_with("(check-sat)\n(get-objectives)\n"));
    }

    #[test]
    fn empty_model_is_scaffolding_only() {
        let m = load("").unwrap();
        assert_eq!(export(&m, &[]).unwrap(), "(set-logic QF_LRA)\n(check-sat)\n");
    }

    #[test]
    fn numerals() {
        assert_eq!(numeral(&Q::new((-3).into(), 2.into())), "(- (/ 3 2))");
        assert_eq!(numeral(&Q::from_integer(7.into())), "7");
        assert_eq!(symbol("a b"), "|a b|");
        assert_eq!(symbol("E.cost"), "E.cost");
    }
}
