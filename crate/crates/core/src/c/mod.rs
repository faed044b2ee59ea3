//! C front end and structure extraction.

pub mod ast;
pub mod callgraph;
pub mod cfg;
pub mod ddg;
pub mod lexer;
pub mod parser;
pub mod preprocess;
pub mod project;
pub mod source;
pub mod stdlib;
pub mod structure;

use std::path::{Path, PathBuf};

use thiserror::Error;

use self::ast::TranslationUnit;
use self::parser::{ParseError, Parser};
use self::preprocess::{PreprocessError, PreprocessOutput, Preprocessor};
use self::source::{FileId, SourceFile, SourceMap};

/// A parsed translation unit together with the sources and preprocessor
/// records it was built from.
#[derive(Debug)]
pub struct CAst {
    pub sources: SourceMap,
    pub main_file: FileId,
    pub unit: TranslationUnit,
    pub pp: PreprocessOutput,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CError {
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Parse(#[from] ParseError),
}

/// Parse in-memory C text as a single file named `input.c`.
pub fn parse_c(source: &str) -> Result<CAst, CError> {
    parse_c_named("input.c", source)
}

pub fn parse_c_named(name: &str, source: &str) -> Result<CAst, CError> {
    let mut sm = SourceMap::new();
    let id = sm.add(SourceFile::new(name, PathBuf::from(name), source.to_string()));
    let pp = Preprocessor::new(&mut sm, None, Vec::new()).run(id)?;
    finish(sm, id, pp)
}

/// Parse a file on disk, expanding project headers found relative to the
/// including file, `root`, or any of `include_paths`.
pub fn parse_c_file(path: &Path, root: &Path, include_paths: &[PathBuf]) -> Result<CAst, CError> {
    let mut sm = SourceMap::new();
    let mut pre = Preprocessor::new(&mut sm, Some(root.to_path_buf()), include_paths.to_vec());
    let id = pre.load(path)?;
    let pp = pre.run(id)?;
    finish(sm, id, pp)
}

fn finish(sm: SourceMap, id: FileId, mut pp: PreprocessOutput) -> Result<CAst, CError> {
    let tokens = std::mem::take(&mut pp.tokens);
    let unit = Parser::new(tokens, &sm).parse_unit()?;
    Ok(CAst {
        sources: sm,
        main_file: id,
        unit,
        pp,
    })
}
