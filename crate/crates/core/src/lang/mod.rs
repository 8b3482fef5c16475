//! Front end for the shading language subset: lexing, parsing, type
//! checking, pretty-printing, and a tree-walking reference interpreter.
//!
//! The grammar is documented in `docs/grammar.md` at the repository root.

pub mod ast;
pub mod corpus;
pub mod interp;
mod lexer;
mod parser;
pub mod printer;
pub mod typeck;

use std::fmt;

use thiserror::Error;

pub use ast::*;
pub use corpus::{load_corpus, CorpusError};
pub use parser::is_reserved;
pub use printer::print_shader as pretty_print;
pub use typeck::{typecheck, TypeError, TypeErrorKind, TypedAst, Warning};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub struct ParseError {
    pub pos: Pos,
    pub message: String,
}

impl ParseError {
    pub fn new(pos: Pos, message: impl Into<String>) -> ParseError {
        ParseError { pos, message: message.into() }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "parse error at {}: {}", self.pos, self.message)
    }
}

/// Parses shader text. Node identifiers are assigned in a fixed structural
/// order, so equal trees parsed from different texts get equal identifiers.
pub fn parse(src: &SourceShader) -> Result<ShaderAst, ParseError> {
    parse_text(&src.text)
}

pub fn parse_text(text: &str) -> Result<ShaderAst, ParseError> {
    parser::parse_source(text)
}

/// Errors from either front-end phase.
#[derive(Clone, Debug, Error)]
pub enum FrontendError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Type(#[from] TypeError),
}

/// Parse and type check in one step.
pub fn check_text(text: &str) -> Result<TypedAst, FrontendError> {
    let ast = parse_text(text)?;
    Ok(typecheck(&ast)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn roundtrip(src: &str) {
        let a = parse_text(src).unwrap();
        let printed = pretty_print(&a);
        let b = parse_text(&printed).unwrap_or_else(|e| panic!("{e}\n{printed}"));
        assert_eq!(a, b, "{printed}");
        assert_eq!(printed, pretty_print(&b));
    }

    #[test]
    fn minimal_program() {
        let ast = parse_text("out vec4 v_out;\nvoid main() { v_out = vec4(1.0); }").unwrap();
        assert_eq!(ast.globals.len(), 1);
        assert_eq!(ast.functions.len(), 1);
    }

    #[test]
    fn malformed_input_reports_line() {
        let err = parse_text("void main( {").unwrap_err();
        assert_eq!(err.pos.line, 1);
    }

    #[test]
    fn canonical_empty_main() {
        let ast = parse_text("void main(){}").unwrap();
        assert_eq!(pretty_print(&ast), "void main() {\n}\n");
    }

    #[test]
    fn for_is_printed_as_for() {
        let ast = parse_text("void main(){ float s = 0.0; for(int i=0;i<3;i++){s+=float(i);} }").unwrap();
        let text = pretty_print(&ast);
        assert!(text.contains("for (int i = 0; i < 3; i++) {"), "{text}");
    }

    #[test]
    fn roundtrips_tricky_constructs() {
        roundtrip(
            "in vec4 a; out vec4 o; uniform sampler2D t;
             float f(mediump float x, int k) { return k > 2 ? x : -(-x); }
             void main() {
               float s = 0.0; int k = 7;
               if (s < 1.0) s = 1.0; else if (s > 2.0) { s = 2.0; } else s = 3.0;
               switch (k % 3) { case -1: s += 1.0; case 0: { s -= 1.0; } break; default: s *= 2.0; }
               for (;;) { break; }
               do s += 0.5; while (s < 4.0);
               while (k > 0) { k--; if (k == 3) continue; }
               o = texture2D(t, a.xy) * (1.0 - (2.0 - s)) / (s * s) + vec4(f(s, k), a.zw, -a.x);
               bool b = !(s > 1.0) && (true || false);
               o.x;
               return;
             }",
        );
    }

    #[test]
    fn break_outside_loop_is_a_parse_error() {
        assert!(parse_text("void main() { break; }").is_err());
        assert!(parse_text("void main() { switch (1) { default: continue; } }").is_err());
    }

    #[test]
    fn structurally_equal_trees_get_equal_ids() {
        let a = parse_text("void main() { float x = (1.0 + 2.0); }").unwrap();
        let b = parse_text(&pretty_print(&a)).unwrap();
        assert_eq!(a.max_node_id(), b.max_node_id());
    }
}
