pub mod c;
pub mod rust;
pub mod prompt;
pub mod syntax;
pub mod llm;
pub mod translate;
pub mod semantic;
pub mod report;
pub mod pipeline;
