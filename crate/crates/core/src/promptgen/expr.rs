//! Boolean expression trees over element tags.
//!
//! On disk an expression uses prefix arrays: a leaf is a bare string and an
//! operator node is `["AND", ...]`, `["OR", ...]`, or `["NOT", child]`, e.g.
//! `["AND", "pedestrian", "moving", ["NOT", "left"]]`.

use crate::error::{Error, Result};
use serde::de::{SeqAccess, Visitor};
use serde::ser::SerializeSeq;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;

/// Maximum tree depth produced by the generator (a leaf has depth 1).
pub const MAX_DEPTH: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum PromptExpr {
    Leaf(String),
    Not(Box<PromptExpr>),
    And(Vec<PromptExpr>),
    Or(Vec<PromptExpr>),
}

impl PromptExpr {
    pub fn leaf(tag: &str) -> PromptExpr {
        PromptExpr::Leaf(tag.to_string())
    }

    pub fn not(e: PromptExpr) -> PromptExpr {
        PromptExpr::Not(Box::new(e))
    }

    pub fn and(children: Vec<PromptExpr>) -> PromptExpr {
        PromptExpr::And(children)
    }

    pub fn or(children: Vec<PromptExpr>) -> PromptExpr {
        PromptExpr::Or(children)
    }

    pub fn depth(&self) -> usize {
        match self {
            PromptExpr::Leaf(_) => 1,
            PromptExpr::Not(c) => 1 + c.depth(),
            PromptExpr::And(cs) | PromptExpr::Or(cs) => {
                1 + cs.iter().map(PromptExpr::depth).max().unwrap_or(0)
            }
        }
    }

    /// All leaf tags, with multiplicity, in tree order.
    pub fn leaf_tags(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves(&self, out: &mut Vec<String>) {
        match self {
            PromptExpr::Leaf(tag) => out.push(tag.clone()),
            PromptExpr::Not(c) => c.collect_leaves(out),
            PromptExpr::And(cs) | PromptExpr::Or(cs) => {
                for c in cs {
                    c.collect_leaves(out);
                }
            }
        }
    }

    /// Semantics-preserving cleanup used on generated combinations before
    /// rendering: double negations collapse and nested same-operator nodes
    /// flatten, which keeps the descriptions natural.
    pub fn simplified(self) -> PromptExpr {
        match self {
            PromptExpr::Leaf(tag) => PromptExpr::Leaf(tag),
            PromptExpr::Not(inner) => match inner.simplified() {
                PromptExpr::Not(e) => *e,
                other => PromptExpr::Not(Box::new(other)),
            },
            PromptExpr::And(children) => {
                let mut flat = Vec::new();
                for c in children {
                    match c.simplified() {
                        PromptExpr::And(inner) => flat.extend(inner),
                        other => flat.push(other),
                    }
                }
                if flat.len() == 1 {
                    flat.into_iter().next().unwrap()
                } else {
                    PromptExpr::And(flat)
                }
            }
            PromptExpr::Or(children) => {
                let mut flat = Vec::new();
                for c in children {
                    match c.simplified() {
                        PromptExpr::Or(inner) => flat.extend(inner),
                        other => flat.push(other),
                    }
                }
                if flat.len() == 1 {
                    flat.into_iter().next().unwrap()
                } else {
                    PromptExpr::Or(flat)
                }
            }
        }
    }

    /// Structural validity: AND/OR take at least two children and the tree
    /// respects the generation depth bound.
    pub fn validate(&self) -> Result<()> {
        self.validate_node()?;
        if self.depth() > MAX_DEPTH {
            return Err(Error::invalid(format!(
                "expression depth {} exceeds bound {MAX_DEPTH}",
                self.depth()
            )));
        }
        Ok(())
    }

    fn validate_node(&self) -> Result<()> {
        match self {
            PromptExpr::Leaf(tag) => {
                if tag.is_empty() {
                    return Err(Error::invalid("empty element tag"));
                }
                Ok(())
            }
            PromptExpr::Not(c) => c.validate_node(),
            PromptExpr::And(cs) | PromptExpr::Or(cs) => {
                if cs.len() < 2 {
                    return Err(Error::invalid("AND/OR must have at least two operands"));
                }
                cs.iter().try_for_each(PromptExpr::validate_node)
            }
        }
    }
}

impl fmt::Display for PromptExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PromptExpr::Leaf(tag) => write!(f, "{tag}"),
            PromptExpr::Not(c) => write!(f, "NOT({c})"),
            PromptExpr::And(cs) => {
                write!(f, "AND(")?;
                for (i, c) in cs.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{c}")?;
                }
                write!(f, ")")
            }
            PromptExpr::Or(cs) => {
                write!(f, "OR(")?;
                for (i, c) in cs.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{c}")?;
                }
                write!(f, ")")
            }
        }
    }
}

impl Serialize for PromptExpr {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            PromptExpr::Leaf(tag) => serializer.serialize_str(tag),
            PromptExpr::Not(c) => {
                let mut seq = serializer.serialize_seq(Some(2))?;
                seq.serialize_element("NOT")?;
                seq.serialize_element(c.as_ref())?;
                seq.end()
            }
            PromptExpr::And(cs) | PromptExpr::Or(cs) => {
                let op = if matches!(self, PromptExpr::And(_)) { "AND" } else { "OR" };
                let mut seq = serializer.serialize_seq(Some(cs.len() + 1))?;
                seq.serialize_element(op)?;
                for c in cs {
                    seq.serialize_element(c)?;
                }
                seq.end()
            }
        }
    }
}

struct ExprVisitor;

impl<'de> Visitor<'de> for ExprVisitor {
    type Value = PromptExpr;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str("an element tag or a prefix array [op, operands...]")
    }

    fn visit_str<E: serde::de::Error>(self, v: &str) -> std::result::Result<PromptExpr, E> {
        Ok(PromptExpr::Leaf(v.to_string()))
    }

    fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> std::result::Result<PromptExpr, A::Error> {
        let op: String = seq
            .next_element()?
            .ok_or_else(|| serde::de::Error::custom("empty expression array"))?;
        let mut children: Vec<PromptExpr> = Vec::new();
        while let Some(child) = seq.next_element::<PromptExpr>()? {
            children.push(child);
        }
        match op.as_str() {
            "NOT" => {
                if children.len() != 1 {
                    return Err(serde::de::Error::custom("NOT takes exactly one operand"));
                }
                Ok(PromptExpr::Not(Box::new(children.into_iter().next().unwrap())))
            }
            "AND" => {
                if children.len() < 2 {
                    return Err(serde::de::Error::custom("AND takes at least two operands"));
                }
                Ok(PromptExpr::And(children))
            }
            "OR" => {
                if children.len() < 2 {
                    return Err(serde::de::Error::custom("OR takes at least two operands"));
                }
                Ok(PromptExpr::Or(children))
            }
            other => Err(serde::de::Error::custom(format!("unknown operator `{other}`"))),
        }
    }
}

impl<'de> Deserialize<'de> for PromptExpr {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        deserializer.deserialize_any(ExprVisitor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prefix_array_roundtrip() {
        let expr = PromptExpr::and(vec![
            PromptExpr::leaf("pedestrian"),
            PromptExpr::leaf("moving"),
            PromptExpr::not(PromptExpr::leaf("left")),
        ]);
        let json = serde_json::to_string(&expr).unwrap();
        assert_eq!(json, r#"["AND","pedestrian","moving",["NOT","left"]]"#);
        let back: PromptExpr = serde_json::from_str(&json).unwrap();
        assert_eq!(back, expr);

        let leaf: PromptExpr = serde_json::from_str(r#""car""#).unwrap();
        assert_eq!(leaf, PromptExpr::leaf("car"));
    }

    #[test]
    fn deserialize_rejects_malformed() {
        assert!(serde_json::from_str::<PromptExpr>(r#"["AND","car"]"#).is_err());
        assert!(serde_json::from_str::<PromptExpr>(r#"["NOT","a","b"]"#).is_err());
        assert!(serde_json::from_str::<PromptExpr>(r#"["XOR","a","b"]"#).is_err());
        assert!(serde_json::from_str::<PromptExpr>(r#"[]"#).is_err());
        assert!(serde_json::from_str::<PromptExpr>("3").is_err());
    }

    #[test]
    fn validate_checks_arity_and_depth() {
        assert!(PromptExpr::leaf("car").validate().is_ok());
        assert!(PromptExpr::And(vec![PromptExpr::leaf("car")]).validate().is_err());
        let mut deep = PromptExpr::leaf("car");
        for _ in 0..4 {
            deep = PromptExpr::not(deep);
        }
        assert!(deep.validate().is_err());
    }

    #[test]
    fn leaf_tags_keep_multiplicity() {
        let e = PromptExpr::or(vec![PromptExpr::leaf("red"), PromptExpr::leaf("red")]);
        assert_eq!(e.leaf_tags(), vec!["red", "red"]);
    }
}
