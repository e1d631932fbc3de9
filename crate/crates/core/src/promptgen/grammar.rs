//! Deterministic template grammar: renders an expression tree into a
//! natural-language description and parses a description back to its
//! element multiset.
//!
//! Every element tag owns a small set of surface phrases per grammatical
//! role. Rendering assembles a noun phrase (adjectives, head nouns, action
//! clauses, locative clauses, negations) inside one of a few sentence
//! templates; which template and phrase variants are used is a pure function
//! of the seed. The phrase lexicon is prefix-free at the word level, so a
//! longest-match scan recovers the element multiset from any rendered
//! string.

use crate::promptgen::expr::PromptExpr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Class,
    Color,
    Motion,
    Location,
}

struct LexEntry {
    tag: &'static str,
    role: Role,
    /// Surface variants; the first is the primary one.
    phrases: &'static [&'static str],
}

pub struct Grammar {
    entries: Vec<LexEntry>,
}

impl Default for Grammar {
    fn default() -> Self {
        let entries = vec![
            LexEntry { tag: "car", role: Role::Class, phrases: &["cars"] },
            LexEntry { tag: "truck", role: Role::Class, phrases: &["trucks"] },
            LexEntry { tag: "bus", role: Role::Class, phrases: &["buses"] },
            LexEntry { tag: "trailer", role: Role::Class, phrases: &["trailers"] },
            LexEntry { tag: "motorcycle", role: Role::Class, phrases: &["motorcycles"] },
            LexEntry { tag: "bicycle", role: Role::Class, phrases: &["bicycles"] },
            LexEntry { tag: "pedestrian", role: Role::Class, phrases: &["pedestrians"] },
            LexEntry { tag: "red", role: Role::Color, phrases: &["red"] },
            LexEntry { tag: "yellow", role: Role::Color, phrases: &["yellow"] },
            LexEntry { tag: "black", role: Role::Color, phrases: &["black"] },
            LexEntry { tag: "white", role: Role::Color, phrases: &["white"] },
            LexEntry { tag: "blue", role: Role::Color, phrases: &["blue"] },
            LexEntry {
                tag: "moving",
                role: Role::Motion,
                phrases: &["currently in motion", "moving"],
            },
            LexEntry {
                tag: "stopped",
                role: Role::Motion,
                phrases: &["at a standstill", "stopped"],
            },
            LexEntry { tag: "crossing", role: Role::Motion, phrases: &["crossing the road"] },
            LexEntry {
                tag: "overtaking",
                role: Role::Motion,
                phrases: &["in the process of overtaking"],
            },
            LexEntry {
                tag: "left",
                role: Role::Location,
                phrases: &["situated on the left side", "on our left"],
            },
            LexEntry {
                tag: "right",
                role: Role::Location,
                phrases: &["situated on the right side", "on our right"],
            },
            LexEntry { tag: "front", role: Role::Location, phrases: &["ahead of us", "up front"] },
            LexEntry { tag: "back", role: Role::Location, phrases: &["behind us", "to the rear"] },
        ];
        Grammar { entries }
    }
}

impl Grammar {
    fn entry(&self, tag: &str) -> Option<&LexEntry> {
        self.entries.iter().find(|e| e.tag == tag)
    }

    fn phrase(&self, tag: &str, variant: usize) -> String {
        match self.entry(tag) {
            Some(e) => e.phrases[variant % e.phrases.len()].to_string(),
            // Unknown tags render as themselves so the output stays
            // parseable (raw tags are in the parse lexicon).
            None => tag.to_string(),
        }
    }

    fn role(&self, tag: &str) -> Role {
        self.entry(tag).map(|e| e.role).unwrap_or(Role::Motion)
    }

    /// Render the expression into a description. The sentence template and
    /// phrase variants are selected by `seed`; seed 0 uses the primary
    /// template and phrases.
    pub fn render(&self, expr: &PromptExpr, seed: u64) -> String {
        let template = seed % 3;
        let variant = (seed / 3) as usize % 2;
        let group = self.group_phrase(expr, variant);
        match template {
            0 => format!("the {group}"),
            1 => format!("there are {group} in the scene"),
            _ => format!("track the {group}"),
        }
    }

    /// Noun-phrase assembly for a node: adjectives, head nouns, action
    /// clauses, locative clauses, then negated and nested clauses.
    fn group_phrase(&self, expr: &PromptExpr, variant: usize) -> String {
        let children: Vec<&PromptExpr> = match expr {
            PromptExpr::And(cs) => cs.iter().collect(),
            PromptExpr::Or(_) => return self.sub_phrase(expr, variant),
            other => vec![other],
        };
        let mut colors: Vec<String> = Vec::new();
        let mut nouns: Vec<String> = Vec::new();
        let mut motions: Vec<String> = Vec::new();
        let mut locations: Vec<String> = Vec::new();
        let mut tails: Vec<String> = Vec::new();
        for c in children {
            match c {
                PromptExpr::Leaf(tag) => {
                    let p = self.phrase(tag, variant);
                    match self.role(tag) {
                        Role::Color => colors.push(p),
                        Role::Class => nouns.push(p),
                        Role::Motion => motions.push(p),
                        Role::Location => locations.push(p),
                    }
                }
                PromptExpr::Not(inner) => {
                    tails.push(format!("not {}", self.sub_phrase(inner, variant)));
                }
                nested => tails.push(self.sub_phrase(nested, variant)),
            }
        }
        let mut out = String::new();
        for c in &colors {
            out.push_str(c);
            out.push(' ');
        }
        if nouns.is_empty() {
            out.push_str("objects");
        } else {
            out.push_str(&nouns.join(" and "));
        }
        for m in &motions {
            out.push(' ');
            out.push_str(m);
        }
        for l in &locations {
            out.push_str(", ");
            out.push_str(l);
        }
        for t in &tails {
            out.push_str(", ");
            out.push_str(t);
        }
        out
    }

    /// Flat clause for nested nodes (inside OR or under NOT).
    fn sub_phrase(&self, expr: &PromptExpr, variant: usize) -> String {
        match expr {
            PromptExpr::Leaf(tag) => self.phrase(tag, variant),
            PromptExpr::Not(inner) => format!("not {}", self.sub_phrase(inner, variant)),
            PromptExpr::And(cs) => cs
                .iter()
                .map(|c| self.sub_phrase(c, variant))
                .collect::<Vec<_>>()
                .join(" and "),
            PromptExpr::Or(cs) => cs
                .iter()
                .map(|c| self.sub_phrase(c, variant))
                .collect::<Vec<_>>()
                .join(" or "),
        }
    }

    /// Recover the element multiset from a rendered description: greedy
    /// longest-match scan of lexicon phrases over the word sequence.
    /// Returned tags are sorted (multiset as sorted list).
    pub fn parse_elements(&self, text: &str) -> Vec<String> {
        let words: Vec<String> = text
            .split(|c: char| !c.is_alphanumeric())
            .filter(|w| !w.is_empty())
            .map(|w| w.to_lowercase())
            .collect();
        // Phrase table: word sequences plus the raw tag as fallback.
        let mut table: Vec<(Vec<&str>, &str)> = Vec::new();
        for e in &self.entries {
            for p in e.phrases {
                table.push((p.split(' ').collect(), e.tag));
            }
            table.push((vec![e.tag], e.tag));
        }
        // Longest phrases first so prefixes never shadow longer matches.
        table.sort_by_key(|(seq, _)| std::cmp::Reverse(seq.len()));

        let mut found = Vec::new();
        let mut i = 0;
        'scan: while i < words.len() {
            for (seq, tag) in &table {
                if i + seq.len() <= words.len()
                    && seq.iter().zip(&words[i..]).all(|(a, b)| *a == b)
                {
                    found.push(tag.to_string());
                    i += seq.len();
                    continue 'scan;
                }
            }
            i += 1;
        }
        found.sort();
        found
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::promptgen::expr::PromptExpr;

    #[test]
    fn renders_flagship_combination() {
        let g = Grammar::default();
        let expr = PromptExpr::and(vec![
            PromptExpr::leaf("pedestrian"),
            PromptExpr::leaf("moving"),
            PromptExpr::leaf("red"),
            PromptExpr::not(PromptExpr::leaf("left")),
        ]);
        assert_eq!(
            g.render(&expr, 0),
            "the red pedestrians currently in motion, not situated on the left side"
        );
    }

    #[test]
    fn renders_single_class_leaf() {
        let g = Grammar::default();
        assert_eq!(g.render(&PromptExpr::leaf("car"), 0), "the cars");
    }

    #[test]
    fn parse_back_recovers_multiset() {
        let g = Grammar::default();
        let expr = PromptExpr::and(vec![
            PromptExpr::leaf("pedestrian"),
            PromptExpr::leaf("moving"),
            PromptExpr::leaf("red"),
            PromptExpr::not(PromptExpr::leaf("left")),
        ]);
        for seed in 0..6 {
            let text = g.render(&expr, seed);
            let mut expected = expr.leaf_tags();
            expected.sort();
            assert_eq!(g.parse_elements(&text), expected, "seed {seed}: {text}");
        }
    }

    #[test]
    fn parse_back_on_or_and_nested() {
        let g = Grammar::default();
        let expr = PromptExpr::or(vec![
            PromptExpr::leaf("car"),
            PromptExpr::and(vec![PromptExpr::leaf("pedestrian"), PromptExpr::leaf("crossing")]),
        ]);
        let text = g.render(&expr, 0);
        let mut expected = expr.leaf_tags();
        expected.sort();
        assert_eq!(g.parse_elements(&text), expected, "{text}");
    }

    #[test]
    fn seed_varies_surface_form() {
        let g = Grammar::default();
        let expr = PromptExpr::and(vec![PromptExpr::leaf("car"), PromptExpr::leaf("moving")]);
        let a = g.render(&expr, 0);
        let b = g.render(&expr, 1);
        let c = g.render(&expr, 3);
        assert_ne!(a, b);
        assert_ne!(a, c);
    }
}
