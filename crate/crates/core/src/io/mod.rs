//! Configuration and output formats.

pub mod config;
pub mod csv;
pub mod lsys;
pub mod svg;
pub mod tree;

pub use config::{parse_config, parse_config_with, ConfigError, InitialValue, RunConfig};
pub use tree::TreeDocument;

/// Renders a tree document into one output format.
pub trait TreeEmitter: Send + Sync {
    fn name(&self) -> &'static str;
    fn extension(&self) -> &'static str;
    fn emit(&self, doc: &TreeDocument) -> String;
}

struct JsonEmitter;
struct CsvEmitter;
struct SvgEmitter;
struct LsysEmitter;

impl TreeEmitter for JsonEmitter {
    fn name(&self) -> &'static str {
        "json"
    }
    fn extension(&self) -> &'static str {
        "json"
    }
    fn emit(&self, doc: &TreeDocument) -> String {
        doc.to_json()
    }
}

impl TreeEmitter for CsvEmitter {
    fn name(&self) -> &'static str {
        "csv"
    }
    fn extension(&self) -> &'static str {
        "csv"
    }
    fn emit(&self, doc: &TreeDocument) -> String {
        csv::tree_nodes(&doc.tree)
    }
}

impl TreeEmitter for SvgEmitter {
    fn name(&self) -> &'static str {
        "svg"
    }
    fn extension(&self) -> &'static str {
        "svg"
    }
    fn emit(&self, doc: &TreeDocument) -> String {
        let o = &doc.config.output;
        svg::render(&doc.tree, o.svg_angle, o.svg_length_scale)
    }
}

impl TreeEmitter for LsysEmitter {
    fn name(&self) -> &'static str {
        "lsys"
    }
    fn extension(&self) -> &'static str {
        "lsys"
    }
    fn emit(&self, doc: &TreeDocument) -> String {
        let mut s = lsys::emit(&doc.tree, doc.config.output.svg_angle);
        s.push('\n');
        s
    }
}

/// Output formats by name.
pub struct EmitterRegistry {
    entries: Vec<Box<dyn TreeEmitter>>,
}

impl Default for EmitterRegistry {
    fn default() -> Self {
        let mut reg = Self { entries: Vec::new() };
        reg.register(Box::new(CsvEmitter));
        reg.register(Box::new(JsonEmitter));
        reg.register(Box::new(SvgEmitter));
        reg.register(Box::new(LsysEmitter));
        reg
    }
}

impl EmitterRegistry {
    /// Adds `emitter`, replacing any existing one with the same name.
    pub fn register(&mut self, emitter: Box<dyn TreeEmitter>) {
        self.entries.retain(|e| e.name() != emitter.name());
        self.entries.push(emitter);
    }

    pub fn get(&self, name: &str) -> Option<&dyn TreeEmitter> {
        self.entries.iter().find(|e| e.name() == name).map(|e| e.as_ref())
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|e| e.name()).collect()
    }
}
