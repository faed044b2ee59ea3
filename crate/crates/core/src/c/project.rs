//! Whole-program structure: per-file extraction, the file graph and the
//! merged symbol table.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use walkdir::WalkDir;

use super::callgraph::{build_call_graph, dependency_first_ranks, topological_order, CallGraph};
use super::cfg::{build_cfg, Cfg};
use super::ddg::{build_ddg, Ddg};
use super::preprocess::IncludeTarget;
use super::source::normalize_ws;
use super::structure::{extract_structure, FunctionUnit, SymbolTable};
use super::{parse_c_file, parse_c_named, CAst, CError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AnalysisError {
    #[error(transparent)]
    C(#[from] CError),
    #[error("conflicting definitions of `{identifier}` in {}", files.join(", "))]
    ConflictingDefinition {
        identifier: String,
        files: Vec<String>,
    },
    #[error("no C sources under {0}")]
    NoSources(String),
    #[error("{0}")]
    Io(String),
}

/// Structure extracted from one translation unit.
#[derive(Debug, Clone)]
pub struct FileStructure {
    pub file: String,
    pub symbols: SymbolTable,
    pub functions: Vec<FunctionUnit>,
    /// `(includer, included)` pairs between project files.
    pub includes: Vec<(String, String)>,
    pub system_includes: Vec<String>,
    /// Every project file the unit read (itself and expanded headers).
    pub files: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileGraph {
    pub nodes: Vec<String>,
    /// `(from, to)`: `from` includes `to` or uses a symbol `to` defines.
    pub edges: Vec<(String, String)>,
    /// Translation order: files a file depends on come first.
    pub order: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionGraphs {
    pub cfg: Cfg,
    pub ddg: Ddg,
}

/// The program structure tuple plus the file graph.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ProgramStructure {
    pub name: String,
    pub symbols: SymbolTable,
    /// Functions in declaration order (file order, then position).
    pub functions: Vec<FunctionUnit>,
    pub call_graph: CallGraph,
    /// Callee-first translation order of function keys.
    pub order: Vec<String>,
    pub file_graph: FileGraph,
    pub graphs: BTreeMap<String, FunctionGraphs>,
    pub system_includes: Vec<String>,
}

impl ProgramStructure {
    pub fn function(&self, key: &str) -> Option<&FunctionUnit> {
        self.functions.iter().find(|f| f.key == key)
    }

    pub fn has_main(&self) -> bool {
        self.functions.iter().any(|f| f.is_main())
    }

    /// Stable JSON form.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("structure serializes")
    }

    /// Whether each C source file becomes its own module.
    pub fn is_multi_file(&self) -> bool {
        self.file_graph.nodes.iter().filter(|f| f.ends_with(".c")).count() > 1
    }
}

pub fn file_structure(ast: &CAst) -> FileStructure {
    let (symbols, functions) = extract_structure(ast);
    let name = |id| ast.sources.file(id).name.clone();
    let mut includes = Vec::new();
    let mut system = Vec::new();
    for r in &ast.pp.includes {
        match &r.target {
            IncludeTarget::Project(id) => {
                let e = (name(r.from), name(*id));
                if !includes.contains(&e) {
                    includes.push(e);
                }
            }
            IncludeTarget::System(h) => {
                if !system.contains(h) {
                    system.push(h.clone());
                }
            }
        }
    }
    FileStructure {
        file: name(ast.main_file),
        symbols,
        functions,
        includes,
        system_includes: system,
        files: ast.sources.files().map(|(_, f)| f.name.clone()).collect(),
    }
}

/// Analyze in-memory source as a single-file program.
pub fn analyze_source(name: &str, text: &str) -> Result<ProgramStructure, AnalysisError> {
    let ast = parse_c_named(name, text)?;
    let program = Path::new(name)
        .file_stem()
        .map_or_else(|| name.to_string(), |s| s.to_string_lossy().into_owned());
    finish(&program, vec![file_structure(&ast)], &[])
}

/// Analyze one C file; headers it includes from the project become part of the program.
pub fn analyze_file(path: &Path, include_paths: &[PathBuf]) -> Result<ProgramStructure, AnalysisError> {
    let root = path.parent().unwrap_or(Path::new("."));
    let ast = parse_c_file(path, root, include_paths)?;
    let program = path
        .file_stem()
        .map_or_else(String::new, |s| s.to_string_lossy().into_owned());
    finish(&program, vec![file_structure(&ast)], &[])
}

/// Analyze every `.c` file under `root` as one program.
pub fn analyze_project(root: &Path, include_paths: &[PathBuf]) -> Result<ProgramStructure, AnalysisError> {
    let mut sources = Vec::new();
    let mut headers = Vec::new();
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| AnalysisError::Io(e.to_string()))?;
        let p = entry.path();
        let rel = p.strip_prefix(root).unwrap_or(p).display().to_string();
        match p.extension().and_then(|e| e.to_str()) {
            Some("c") => sources.push(p.to_path_buf()),
            Some("h") => headers.push(rel),
            _ => {}
        }
    }
    if sources.is_empty() {
        return Err(AnalysisError::NoSources(root.display().to_string()));
    }
    let per_file: Result<Vec<FileStructure>, CError> = sources
        .par_iter()
        .map(|p| parse_c_file(p, root, include_paths).map(|ast| file_structure(&ast)))
        .collect();
    let program = root
        .file_name()
        .map_or_else(|| "project".to_string(), |s| s.to_string_lossy().into_owned());
    finish(&program, per_file?, &headers)
}

fn finish(
    name: &str,
    per_file: Vec<FileStructure>,
    extra_files: &[String],
) -> Result<ProgramStructure, AnalysisError> {
    let mut ps = unify_project_structure(per_file.clone())?;
    ps.name = name.to_string();
    ps.file_graph = build_file_graph(&per_file, &ps.symbols, &ps.functions, extra_files);
    let rank: HashMap<&str, usize> = ps
        .file_graph
        .order
        .iter()
        .enumerate()
        .map(|(i, f)| (f.as_str(), i))
        .collect();
    ps.functions
        .sort_by_key(|f| (rank.get(f.file.as_str()).copied().unwrap_or(usize::MAX), f.order));
    for (i, f) in ps.functions.iter_mut().enumerate() {
        f.order = i as u32;
    }
    ps.call_graph = build_call_graph(&ps.functions);
    ps.order = topological_order(&ps.call_graph);
    ps.graphs = ps
        .functions
        .iter()
        .map(|f| {
            (
                f.key.clone(),
                FunctionGraphs {
                    cfg: build_cfg(f),
                    ddg: build_ddg(f),
                },
            )
        })
        .collect();
    Ok(ps)
}

/// File graph over all project files seen.
pub fn build_file_graph(
    per_file: &[FileStructure],
    sigma: &SymbolTable,
    functions: &[FunctionUnit],
    extra_files: &[String],
) -> FileGraph {
    let mut nodes: BTreeSet<String> = extra_files.iter().cloned().collect();
    let mut edges: Vec<(String, String)> = Vec::new();
    let add = |edges: &mut Vec<(String, String)>, a: &str, b: &str| {
        if a != b && !edges.iter().any(|(x, y)| x == a && y == b) {
            edges.push((a.to_string(), b.to_string()));
        }
    };
    for fs in per_file {
        nodes.extend(fs.files.iter().cloned());
        for (a, b) in &fs.includes {
            add(&mut edges, a, b);
        }
    }
    for f in functions {
        for d in &f.dependencies {
            if let Some(def) = sigma.get(d) {
                add(&mut edges, &f.file, &def.file);
            }
        }
    }
    let nodes: Vec<String> = nodes.into_iter().collect();
    let index: HashMap<&str, usize> = nodes.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let pairs: Vec<(usize, usize)> = edges
        .iter()
        .filter_map(|(a, b)| Some((*index.get(a.as_str())?, *index.get(b.as_str())?)))
        .collect();
    let ranks = dependency_first_ranks(nodes.len(), &pairs);
    let mut order: Vec<(usize, usize)> = ranks.into_iter().enumerate().map(|(i, r)| (r, i)).collect();
    order.sort();
    let order = order.into_iter().map(|(_, i)| nodes[i].clone()).collect();
    edges.sort();
    FileGraph {
        nodes,
        edges,
        order,
    }
}

/// Merge per-file structures. Static symbols are qualified as `file::name`;
/// identical definitions collapse; differing definitions of one name conflict.
pub fn unify_project_structure(per_file: Vec<FileStructure>) -> Result<ProgramStructure, AnalysisError> {
    let mut sigma = SymbolTable::default();
    let mut functions: Vec<FunctionUnit> = Vec::new();
    let mut system = BTreeSet::new();
    let mut order_base = 0u32;
    for fs in per_file {
        system.extend(fs.system_includes.iter().cloned());
        let qualify = |name: &str| -> String {
            match fs.symbols.get(name) {
                Some(d) if d.is_static => format!("{}::{}", d.file, name),
                _ => name.to_string(),
            }
        };
        let mut max_order = 0;
        for (key, def) in &fs.symbols.entries {
            let key = qualify(key);
            let mut def = def.clone();
            max_order = max_order.max(def.order);
            def.order += order_base;
            match sigma.entries.get(&key) {
                Some(old) if old.is_definition && def.is_definition => {
                    if normalize_ws(&old.source_text) != normalize_ws(&def.source_text) {
                        let mut files = vec![old.file.clone(), def.file.clone()];
                        files.dedup();
                        return Err(AnalysisError::ConflictingDefinition {
                            identifier: key,
                            files,
                        });
                    }
                }
                _ => sigma.insert(key, def),
            }
        }
        for (c, e) in &fs.symbols.enum_constants {
            sigma
                .enum_constants
                .entry(c.clone())
                .or_insert_with(|| qualify(e));
        }
        for f in &fs.functions {
            let mut f = f.clone();
            f.key = qualify(&f.name);
            if functions.iter().any(|g| g.key == f.key) {
                continue;
            }
            f.dependencies = f.dependencies.iter().map(|d| qualify(d)).collect();
            f.calls = f.calls.iter().map(|d| qualify(d)).collect();
            f.globals_used = f.globals_used.iter().map(|d| qualify(d)).collect();
            f.order += order_base;
            functions.push(f);
        }
        order_base += max_order.max(fs.functions.len() as u32) + 1;
    }
    // Defined functions referenced only through a prototype in another
    // file become calls once their definition is known.
    let defined: BTreeSet<String> = functions.iter().map(|f| f.key.clone()).collect();
    for f in &mut functions {
        for d in &f.dependencies {
            if defined.contains(d) && *d != f.key && !f.calls.contains(d) {
                f.calls.push(d.clone());
            }
        }
    }
    Ok(ProgramStructure {
        symbols: sigma,
        functions,
        system_includes: system.into_iter().collect(),
        ..Default::default()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fs(name: &str, src: &str) -> FileStructure {
        file_structure(&parse_c_named(name, src).unwrap())
    }

    #[test]
    fn identical_definitions_collapse() {
        let s = "struct P { int x; };";
        let merged = unify_project_structure(vec![fs("a.c", s), fs("b.c", s), fs("c.c", s)]).unwrap();
        assert_eq!(merged.symbols.len(), 1);
    }

    #[test]
    fn differing_definitions_conflict() {
        let err = unify_project_structure(vec![
            fs("a.c", "struct Node { int v; };"),
            fs("b.c", "struct Node { double v; };"),
        ])
        .unwrap_err();
        assert!(matches!(err, AnalysisError::ConflictingDefinition { ref identifier, .. } if identifier == "struct Node"));
    }

    #[test]
    fn statics_are_file_qualified() {
        let merged = unify_project_structure(vec![
            fs("a.c", "static int helper(void){return 1;} int fa(void){return helper();}"),
            fs("b.c", "static int helper(void){return 2;} int fb(void){return helper();}"),
        ])
        .unwrap();
        assert!(merged.symbols.contains("a.c::helper"));
        assert!(merged.symbols.contains("b.c::helper"));
        let fb = merged.functions.iter().find(|f| f.key == "fb").unwrap();
        assert_eq!(fb.calls, vec!["b.c::helper"]);
    }

    #[test]
    fn single_file_program() {
        let ps = analyze_source("t.c", "int foo(void){return 1;} int main(void){return foo();}").unwrap();
        assert_eq!(ps.order, vec!["foo", "main"]);
        assert_eq!(ps.file_graph.nodes, vec!["t.c"]);
        assert!(ps.file_graph.edges.is_empty());
        assert_eq!(ps.graphs.len(), 2);
        assert_eq!(ps.to_json(), analyze_source("t.c", "int foo(void){return 1;} int main(void){return foo();}").unwrap().to_json());
    }
}
