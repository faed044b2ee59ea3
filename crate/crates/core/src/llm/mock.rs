//! Deterministic scripted backend.

use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{first_block, Backend, BackendTag, GenerationParams, LlmError};
use crate::prompt::{self, PromptKind, PromptText};
use crate::rust::{all_items, loose_name, parse_rust, ItemKind, RustItem};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Selector {
    /// Cache key of the prompt.
    Key(String),
    /// Every string occurs in the rendered prompt.
    Contains(Vec<String>),
    Kind(PromptKind),
    /// Prompt kind plus substrings.
    KindContains(PromptKind, Vec<String>),
}

impl Selector {
    fn matches(&self, key: &str, p: &PromptText) -> bool {
        match self {
            Selector::Key(k) => k == key,
            Selector::Contains(parts) => parts.iter().all(|s| p.rendered.contains(s.as_str())),
            Selector::Kind(k) => *k == p.kind,
            Selector::KindContains(k, parts) => *k == p.kind && parts.iter().all(|s| p.rendered.contains(s.as_str())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockEntry {
    pub selector: Selector,
    pub reply: String,
    /// Number of times the entry may answer; unlimited when absent.
    #[serde(default)]
    pub limit: Option<usize>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MockFallback {
    /// Unmatched prompts fail with `MockMiss`.
    #[default]
    Miss,
    /// Unmatched prompts get the code they carry back unchanged.
    Echo,
}

/// Fixture table. Entries are tried in order; translation prompts not
/// matched by an entry are answered from the reference program when one
/// is set.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MockTable {
    #[serde(default)]
    pub entries: Vec<MockEntry>,
    #[serde(default)]
    pub fallback: MockFallback,
    #[serde(skip)]
    reference: Vec<RustItem>,
}

impl MockTable {
    pub fn echo() -> Self {
        MockTable {
            fallback: MockFallback::Echo,
            ..Default::default()
        }
    }

    /// Answer translation prompts with the matching items of a reference
    /// Rust program.
    pub fn from_reference(source: &str) -> Result<Self, crate::rust::ParseFailure> {
        let mut t = MockTable::default();
        t.set_reference(source)?;
        Ok(t)
    }

    pub fn set_reference(&mut self, source: &str) -> Result<(), crate::rust::ParseFailure> {
        let ast = parse_rust(source)?;
        let top: Vec<(usize, usize)> = crate::rust::extract_items(&ast).iter().map(|i| i.span).collect();
        self.reference = all_items(&ast)
            .into_iter()
            .filter(|i| top.contains(&i.span))
            .collect();
        Ok(())
    }

    pub fn push(&mut self, selector: Selector, reply: impl Into<String>) {
        self.entries.push(MockEntry {
            selector,
            reply: reply.into(),
            limit: None,
        });
    }

    pub fn has_reference(&self) -> bool {
        !self.reference.is_empty()
    }
}

fn fenced(code: &str) -> String {
    format!("```rust\n{}\n```\n", code.trim_end())
}

pub struct MockBackend {
    table: MockTable,
    used: Mutex<Vec<usize>>,
}

impl MockBackend {
    pub fn new(table: MockTable) -> Self {
        let n = table.entries.len();
        MockBackend {
            table,
            used: Mutex::new(vec![0; n]),
        }
    }

    fn scripted(&self, key: &str, p: &PromptText) -> Option<String> {
        let mut used = self.used.lock().unwrap();
        for (i, e) in self.table.entries.iter().enumerate() {
            if e.limit.is_some_and(|l| used[i] >= l) {
                continue;
            }
            if e.selector.matches(key, p) {
                used[i] += 1;
                return Some(e.reply.clone());
            }
        }
        None
    }

    fn from_reference(&self, p: &PromptText) -> Option<String> {
        if self.table.reference.is_empty() {
            return None;
        }
        match p.kind {
            PromptKind::Translation => {
                let body = p.section(prompt::H_C_FUNCTION)?;
                let name = body.strip_prefix("Function: ")?.split_whitespace().next()?;
                let item = self
                    .table
                    .reference
                    .iter()
                    .find(|i| i.kind == ItemKind::Function && i.name == name)
                    .or_else(|| {
                        self.table
                            .reference
                            .iter()
                            .find(|i| i.kind == ItemKind::Function && loose_name(&i.name) == loose_name(name))
                    })?;
                Some(fenced(&item.source_text))
            }
            PromptKind::GlobalsTranslation => {
                let body = p.section(prompt::H_C_GLOBALS)?;
                let names: Vec<String> = prompt::listed_symbols(body)
                    .into_iter()
                    .map(|(_, key)| loose_name(key.rsplit([' ', ':']).next().unwrap_or(&key)))
                    .collect();
                let mut matched: Vec<&RustItem> = Vec::new();
                for item in &self.table.reference {
                    let hit = match item.kind {
                        ItemKind::Use => true,
                        ItemKind::Impl => names.iter().any(|n| {
                            let ty = item.name.rsplit(' ').next().unwrap_or("");
                            loose_name(ty) == *n
                        }),
                        _ => names.contains(&loose_name(&item.name)),
                    };
                    if hit {
                        matched.push(item);
                    }
                }
                let text = matched
                    .iter()
                    .map(|i| i.source_text.as_str())
                    .collect::<Vec<_>>()
                    .join("\n\n");
                Some(fenced(&text))
            }
            _ => None,
        }
    }

    fn echo(&self, p: &PromptText) -> String {
        let code = |h: &str| p.section(h).and_then(first_block).unwrap_or_default();
        match p.kind {
            PromptKind::Translation => fenced(&code(prompt::H_C_FUNCTION)),
            PromptKind::GlobalsTranslation => fenced(""),
            PromptKind::FunctionFix => fenced(&code(prompt::H_RUST_FUNCTION)),
            PromptKind::ItemFix => {
                let item = code(prompt::H_RUST_ITEM);
                format!("{}{}", fenced(&item), fenced(&item))
            }
            PromptKind::RegionFix => fenced(&code(prompt::H_REGION)),
            PromptKind::SemanticFix => fenced(&code(prompt::H_FAILING_CODE)),
        }
    }
}

impl Backend for MockBackend {
    fn tag(&self) -> BackendTag {
        BackendTag::Mock
    }

    fn complete_raw(&self, key: &str, prompt: &PromptText, _params: &GenerationParams) -> Result<String, LlmError> {
        if let Some(r) = self.scripted(key, prompt) {
            return Ok(r);
        }
        if let Some(r) = self.from_reference(prompt) {
            return Ok(r);
        }
        match self.table.fallback {
            MockFallback::Echo => Ok(self.echo(prompt)),
            MockFallback::Miss => Err(LlmError::MockMiss { key: key.to_string() }),
        }
    }
}
