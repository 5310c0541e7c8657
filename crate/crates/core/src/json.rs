//! Canonical JSON for models and scenarios. Keys are sorted, rationals are
//! `"num/den"` strings and formulas are embedded in their text form.

use std::collections::BTreeMap;
use std::str::FromStr;

use cgm_smt::Direction;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsl::{parse_formula, parse_term, FORMAT};
use crate::formula::{Formula, Term};
use crate::model::{
    build_model, Cgm, Decl, DeclKind, ElementKind, ObjectiveBody, Predefined, Preference, RelationEdge,
    ValidationReport,
};
use crate::Q;

/// Load failure with the JSON path of the offending value.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum JsonError {
    #[error("{path}: {message}")]
    Schema { path: String, message: String },
    #[error(transparent)]
    Invalid(#[from] ValidationReport),
}

pub fn q_to_string(q: &Q) -> String {
    format!("{}/{}", q.numer(), q.denom())
}

/// Accepts `"num/den"` and plain integers.
pub fn q_from_str(s: &str) -> Result<Q, String> {
    let bad = || format!("`{s}` is not a rational of the form \"num/den\"");
    if let Some((_, d)) = s.split_once('/') {
        if d.trim_start_matches(['+', '-']).chars().all(|c| c == '0') {
            return Err(bad());
        }
    }
    Q::from_str(s).map_err(|_| bad())
}

/// Serde adapter for a single rational.
pub mod q_str {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(q: &Q, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&q_to_string(q))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Q, D::Error> {
        let s = String::deserialize(d)?;
        q_from_str(&s).map_err(serde::de::Error::custom)
    }
}

/// Serde adapter for a list of rationals.
pub mod q_vec {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[Q], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(q_to_string))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Q>, D::Error> {
        let v = Vec::<String>::deserialize(d)?;
        v.iter().map(|s| q_from_str(s).map_err(serde::de::Error::custom)).collect()
    }
}

/// Serde adapter for a map of rationals.
pub mod q_map {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &BTreeMap<String, Q>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_map(m.iter().map(|(k, v)| (k, q_to_string(v))))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<String, Q>, D::Error> {
        let m = BTreeMap::<String, String>::deserialize(d)?;
        m.into_iter().map(|(k, v)| Ok((k, q_from_str(&v).map_err(serde::de::Error::custom)?))).collect()
    }
}

/// Serde adapter for an optional `"min"`/`"max"` direction.
pub mod opt_direction {
    use super::*;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Option<Direction>, s: S) -> Result<S::Ok, S::Error> {
        match d {
            Some(d) => s.serialize_some(direction_name(*d)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Direction>, D::Error> {
        match Option::<String>::deserialize(d)? {
            None => Ok(None),
            Some(s) => parse_direction(&s).map(Some).map_err(serde::de::Error::custom),
        }
    }
}

pub fn direction_name(d: Direction) -> &'static str {
    match d {
        Direction::Minimize => "min",
        Direction::Maximize => "max",
    }
}

pub fn parse_direction(s: &str) -> Result<Direction, String> {
    match s {
        "min" => Ok(Direction::Minimize),
        "max" => Ok(Direction::Maximize),
        other => Err(format!("expected \"min\" or \"max\", found {other:?}")),
    }
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct ElementJson {
    label: String,
    kind: ElementKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    display_name: Option<String>,
    #[serde(default = "top")]
    prereq_pos: String,
    #[serde(default = "top")]
    prereq_neg: String,
    #[serde(default, with = "q_map")]
    on_sat: BTreeMap<String, Q>,
    #[serde(default, with = "q_map")]
    on_deny: BTreeMap<String, Q>,
}

fn top() -> String {
    "true".to_string()
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct RefinementJson {
    label: String,
    target: String,
    sources: Vec<String>,
    #[serde(default = "top")]
    prereq_pos: String,
    #[serde(default = "top")]
    prereq_neg: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AttributeJson {
    label: String,
    #[serde(default)]
    def: Option<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ObjectiveJson {
    label: String,
    direction: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    term: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    predefined: Option<Predefined>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AssertionJson {
    label: String,
    value: bool,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CgmJson {
    format: String,
    #[serde(default)]
    elements: Vec<ElementJson>,
    #[serde(default)]
    refinements: Vec<RefinementJson>,
    #[serde(default)]
    edges: Vec<RelationEdge>,
    #[serde(default)]
    preferences: Vec<Preference>,
    #[serde(default)]
    attributes: Vec<AttributeJson>,
    #[serde(default)]
    objectives: Vec<ObjectiveJson>,
    #[serde(default)]
    formulas: Vec<String>,
    #[serde(default)]
    assertions: Vec<AssertionJson>,
}

/// Serializes a value with lexicographically sorted keys.
pub fn canonical<T: Serialize>(v: &T) -> String {
    let value = serde_json::to_value(v).expect("serializable");
    serde_json::to_string(&value).expect("valid JSON value")
}

/// Pretty variant of [`canonical`].
pub fn canonical_pretty<T: Serialize>(v: &T) -> String {
    let value = serde_json::to_value(v).expect("serializable");
    serde_json::to_string_pretty(&value).expect("valid JSON value")
}

pub fn model_value(m: &Cgm) -> serde_json::Value {
    let doc = CgmJson {
        format: FORMAT.to_string(),
        elements: m
            .elements
            .iter()
            .map(|e| ElementJson {
                label: e.label.clone(),
                kind: e.kind,
                display_name: e.display_name.clone(),
                prereq_pos: e.prereq_pos.to_string(),
                prereq_neg: e.prereq_neg.to_string(),
                on_sat: e.on_sat.clone(),
                on_deny: e.on_deny.clone(),
            })
            .collect(),
        refinements: m
            .refinements
            .iter()
            .map(|r| RefinementJson {
                label: r.label.clone(),
                target: r.target.clone(),
                sources: r.sources.clone(),
                prereq_pos: r.prereq_pos.to_string(),
                prereq_neg: r.prereq_neg.to_string(),
            })
            .collect(),
        edges: m.edges.clone(),
        preferences: m.preferences.clone(),
        attributes: m
            .attributes
            .iter()
            .map(|a| AttributeJson { label: a.label.clone(), def: a.def.as_ref().map(Term::to_string) })
            .collect(),
        objectives: m
            .objectives
            .iter()
            .map(|o| {
                let (term, predefined) = match &o.body {
                    ObjectiveBody::Term(t) => (Some(t.to_string()), None),
                    ObjectiveBody::Predefined(p) => (None, Some(*p)),
                };
                ObjectiveJson { label: o.label.clone(), direction: direction_name(o.direction).into(), term, predefined }
            })
            .collect(),
        formulas: m.formulas.iter().map(Formula::to_string).collect(),
        assertions: m.assertions.iter().map(|(label, value)| AssertionJson { label: label.clone(), value: *value }).collect(),
    };
    serde_json::to_value(doc).expect("serializable")
}

/// Canonical JSON text of a model.
pub fn model_to_json(m: &Cgm) -> String {
    serde_json::to_string(&model_value(m)).expect("valid JSON value")
}

fn schema(path: impl Into<String>, message: impl Into<String>) -> JsonError {
    JsonError::Schema { path: path.into(), message: message.into() }
}

/// Parses and validates a model from JSON.
pub fn model_from_json(text: &str) -> Result<Cgm, JsonError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let doc: CgmJson = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        schema(path, e.into_inner().to_string())
    })?;
    model_from_doc(doc)
}

/// Same as [`model_from_json`] for an already parsed value.
pub fn model_from_value(v: serde_json::Value) -> Result<Cgm, JsonError> {
    let doc: CgmJson = serde_path_to_error::deserialize(v).map_err(|e| {
        let path = e.path().to_string();
        schema(path, e.into_inner().to_string())
    })?;
    model_from_doc(doc)
}

fn model_from_doc(doc: CgmJson) -> Result<Cgm, JsonError> {
    if doc.format != FORMAT {
        return Err(schema("format", format!("expected \"{FORMAT}\", found {:?}", doc.format)));
    }
    let formula = |path: String, s: &str| parse_formula(s).map_err(|e| schema(path, e.to_string()));
    let opt = |f: Formula| if f == Formula::Const(true) { None } else { Some(f) };
    let mut decls = Vec::new();
    for (i, a) in doc.attributes.iter().enumerate() {
        let def = match &a.def {
            None => None,
            Some(s) => Some(parse_term(s).map_err(|e| schema(format!("attributes[{i}].def"), e.to_string()))?),
        };
        decls.push(Decl::new(DeclKind::Attr { label: a.label.clone(), def }));
    }
    for (i, e) in doc.elements.iter().enumerate() {
        decls.push(Decl::new(DeclKind::Element {
            kind: e.kind,
            label: e.label.clone(),
            display_name: e.display_name.clone(),
            reward: None,
            penalty: None,
            prereq_pos: opt(formula(format!("elements[{i}].prereqPos"), &e.prereq_pos)?),
            prereq_neg: opt(formula(format!("elements[{i}].prereqNeg"), &e.prereq_neg)?),
        }));
        let attrs: std::collections::BTreeSet<&String> = e.on_sat.keys().chain(e.on_deny.keys()).collect();
        for attr in attrs {
            decls.push(Decl::new(DeclKind::Set {
                element: e.label.clone(),
                attr: attr.clone(),
                sat: e.on_sat.get(attr).cloned().unwrap_or_default(),
                deny: e.on_deny.get(attr).cloned(),
            }));
        }
    }
    for (i, r) in doc.refinements.iter().enumerate() {
        decls.push(Decl::new(DeclKind::Refine {
            label: Some(r.label.clone()),
            target: r.target.clone(),
            sources: r.sources.clone(),
            prereq_pos: opt(formula(format!("refinements[{i}].prereqPos"), &r.prereq_pos)?),
            prereq_neg: opt(formula(format!("refinements[{i}].prereqNeg"), &r.prereq_neg)?),
        }));
    }
    decls.extend(doc.edges.into_iter().map(|e| Decl::new(DeclKind::Edge(e))));
    decls.extend(doc.preferences.into_iter().map(|p| Decl::new(DeclKind::Prefer(p))));
    for (i, f) in doc.formulas.iter().enumerate() {
        decls.push(Decl::new(DeclKind::Formula(formula(format!("formulas[{i}]"), f)?)));
    }
    for a in doc.assertions {
        decls.push(Decl::new(DeclKind::Assert { label: a.label, value: a.value }));
    }
    for (i, o) in doc.objectives.into_iter().enumerate() {
        let direction = parse_direction(&o.direction).map_err(|m| schema(format!("objectives[{i}].direction"), m))?;
        let body = match (o.term, o.predefined) {
            (Some(t), None) => ObjectiveBody::Term(
                parse_term(&t).map_err(|e| schema(format!("objectives[{i}].term"), e.to_string()))?,
            ),
            (None, Some(p)) => ObjectiveBody::Predefined(p),
            _ => return Err(schema(format!("objectives[{i}]"), "exactly one of `term` and `predefined` is required")),
        };
        decls.push(Decl::new(DeclKind::Objective { label: Some(o.label), direction, body }));
    }
    Ok(build_model(&decls)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integer_rational_has_unit_denominator() {
        assert_eq!(q_to_string(&Q::from_integer(80.into())), "80/1");
        assert_eq!(q_from_str("-3/6").unwrap(), Q::new((-1).into(), 2.into()));
        assert!(q_from_str("1/0").is_err());
        assert!(q_from_str("0.5").is_err());
    }

    #[test]
    fn errors_carry_a_path() {
        let err = model_from_json(r#"{"format":"cgm/1","elements":[{"label":"A","kind":"Goal","onSat":{"c":"x"}}]}"#)
            .unwrap_err();
        let JsonError::Schema { path, .. } = err else { panic!("{err:?}") };
        assert_eq!(path, "elements[0].onSat");
    }
}
