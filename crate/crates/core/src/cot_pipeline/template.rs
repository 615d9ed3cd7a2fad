use super::CotError;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TemplateRole {
    Generation,
    Pruning,
}

impl TemplateRole {
    fn required(self) -> &'static [&'static str] {
        match self {
            TemplateRole::Generation => &["question", "answer", "paths"],
            TemplateRole::Pruning => &["question", "chain"],
        }
    }

    fn allowed(self) -> &'static [&'static str] {
        match self {
            TemplateRole::Generation => &["question", "answer", "paths", "options"],
            TemplateRole::Pruning => &["question", "chain"],
        }
    }
}

impl fmt::Display for TemplateRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TemplateRole::Generation => "generation",
            TemplateRole::Pruning => "pruning",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Segment {
    Text(String),
    Slot(String),
}

/// Plain text with `{name}` placeholders; `{{` and `}}` are literal braces.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    name: String,
    role: TemplateRole,
    body: String,
    segments: Vec<Segment>,
}

fn parse(body: &str) -> Result<Vec<Segment>, String> {
    let mut segments = Vec::new();
    let mut text = String::new();
    let mut chars = body.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '{' if chars.peek() == Some(&'{') => {
                chars.next();
                text.push('{');
            }
            '}' if chars.peek() == Some(&'}') => {
                chars.next();
                text.push('}');
            }
            '{' => {
                let mut name = String::new();
                loop {
                    match chars.next() {
                        Some('}') => break,
                        Some(c) if c.is_ascii_alphanumeric() || c == '_' => name.push(c),
                        _ => return Err(format!("unterminated or malformed placeholder after {{{name}")),
                    }
                }
                if name.is_empty() {
                    return Err("empty placeholder {}".into());
                }
                if !text.is_empty() {
                    segments.push(Segment::Text(std::mem::take(&mut text)));
                }
                segments.push(Segment::Slot(name));
            }
            '}' => return Err("unmatched }".into()),
            c => text.push(c),
        }
    }
    if !text.is_empty() {
        segments.push(Segment::Text(text));
    }
    Ok(segments)
}

impl PromptTemplate {
    pub fn new(name: impl Into<String>, role: TemplateRole, body: impl Into<String>) -> Result<Self, CotError> {
        let name = name.into();
        let body = body.into();
        let err = |m: String| CotError::Template(format!("{name} ({role}): {m}"));
        let segments = parse(&body).map_err(err)?;
        let slots: Vec<&str> = segments
            .iter()
            .filter_map(|s| match s {
                Segment::Slot(n) => Some(n.as_str()),
                Segment::Text(_) => None,
            })
            .collect();
        if let Some(unknown) = slots.iter().find(|s| !role.allowed().contains(s)) {
            return Err(err(format!("unknown placeholder {{{unknown}}}")));
        }
        if let Some(missing) = role.required().iter().find(|r| !slots.contains(r)) {
            return Err(err(format!("missing placeholder {{{missing}}}")));
        }
        Ok(Self { name, role, body, segments })
    }

    /// Reads a template file; the name is the file stem.
    pub fn load(path: &Path, role: TemplateRole) -> Result<Self, CotError> {
        let body = std::fs::read_to_string(path)
            .map_err(|e| CotError::Io { path: path.display().to_string(), message: e.to_string() })?;
        let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("template");
        Self::new(name, role, body)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn role(&self) -> TemplateRole {
        self.role
    }

    pub fn body(&self) -> &str {
        &self.body
    }

    pub fn expect_role(&self, role: TemplateRole) -> Result<(), CotError> {
        if self.role == role {
            Ok(())
        } else {
            Err(CotError::Template(format!("{} is a {} template, expected {role}", self.name, self.role)))
        }
    }

    /// Substitutes every placeholder; a placeholder without a value is an error.
    pub fn render(&self, values: &[(&str, &str)]) -> Result<String, CotError> {
        let mut out = String::with_capacity(self.body.len());
        for seg in &self.segments {
            match seg {
                Segment::Text(t) => out.push_str(t),
                Segment::Slot(n) => match values.iter().find(|(k, _)| k == n) {
                    Some((_, v)) => out.push_str(v),
                    None => return Err(CotError::Template(format!("{}: no value for {{{n}}}", self.name))),
                },
            }
        }
        Ok(out)
    }
}

pub const CHAIN_OPEN: &str = "<<<CHAIN";
pub const CHAIN_CLOSE: &str = "CHAIN>>>";

const DEFAULT_GENERATION: &str = "\
You are given a biomedical multiple-choice question, its correct answer and
reasoning paths retrieved from a biomedical knowledge graph.

Explain step by step how the answer follows. Base each step on a relation
that appears in the paths and name the entities involved. If the paths leave
a gap, you may fill it with well-established biomedical knowledge, but start
that line with \"Additional knowledge:\". End with a line stating the answer.

Question: {question}
Answer: {answer}
Knowledge graph paths:
{paths}

Reasoning:
";

const DEFAULT_PRUNING: &str = "\
Below is a question and a reasoning chain that reaches its answer.

Rewrite the chain keeping only the essential steps that lead to the answer.
Remove repeated statements, side remarks and background facts the conclusion
does not depend on. Do not add new facts and do not change the conclusion.

Question: {question}
<<<CHAIN
{chain}
CHAIN>>>

Pruned chain:
";

pub fn default_generation_template() -> PromptTemplate {
    PromptTemplate::new("default-generation", TemplateRole::Generation, DEFAULT_GENERATION).expect("valid template")
}

pub fn default_pruning_template() -> PromptTemplate {
    PromptTemplate::new("default-pruning", TemplateRole::Pruning, DEFAULT_PRUNING).expect("valid template")
}
