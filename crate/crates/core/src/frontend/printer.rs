//! Canonical pretty-printing of parse trees. Function blocks are reproduced
//! verbatim from the original text.

use std::fmt::Write;

use super::ast::{Declaration, EntityKind, SourceFile};

pub fn print_file(file: &SourceFile) -> String {
    let mut out = format!("package {}\n", file.package);
    for decl in &file.declarations {
        out.push('\n');
        print_decl(file, decl, 0, &mut out);
    }
    out
}

fn print_decl(file: &SourceFile, decl: &Declaration, depth: usize, out: &mut String) {
    let indent = "    ".repeat(depth);
    for ann in &decl.annotations {
        let _ = writeln!(out, "{indent}@{ann}");
    }
    out.push_str(&indent);
    match decl.kind {
        EntityKind::Class | EntityKind::Object => {
            if decl.is_companion {
                out.push_str("companion ");
            }
            out.push_str(if decl.kind == EntityKind::Class { "class " } else { "object " });
            out.push_str(&decl.name);
            if !decl.supertypes.is_empty() {
                let supers: Vec<_> = decl.supertypes.iter().map(|s| s.as_str()).collect();
                let _ = write!(out, " : {}", supers.join(", "));
            }
            if decl.has_body {
                if decl.children.is_empty() {
                    out.push_str(" {}\n");
                } else {
                    out.push_str(" {\n");
                    for child in &decl.children {
                        print_decl(file, child, depth + 1, out);
                    }
                    let _ = writeln!(out, "{indent}}}");
                }
            } else {
                out.push('\n');
            }
        }
        EntityKind::Function => {
            let params: Vec<_> = decl
                .params
                .iter()
                .map(|p| format!("{}: {}", p.name, p.ty))
                .collect();
            let _ = write!(out, "fun {}({})", decl.name, params.join(", "));
            if let Some(ret) = &decl.return_type {
                let _ = write!(out, ": {ret}");
            }
            let block = decl.block.as_ref().expect("functions always have a block");
            let _ = writeln!(out, " {}", &file.text[block.span.start..block.span.end]);
        }
    }
}

/// Compares two parse trees ignoring spans and layout; blocks compare by
/// their token texts.
pub fn structurally_equal(a: &SourceFile, b: &SourceFile) -> bool {
    a.package == b.package
        && a.declarations.len() == b.declarations.len()
        && a.declarations
            .iter()
            .zip(&b.declarations)
            .all(|(x, y)| decl_equal(a, x, b, y))
}

fn decl_equal(fa: &SourceFile, a: &Declaration, fb: &SourceFile, b: &Declaration) -> bool {
    let block_texts = |f: &SourceFile, d: &Declaration| -> Option<Vec<String>> {
        d.block.as_ref().map(|blk| {
            f.block_tokens(blk)
                .iter()
                .map(|t| t.text(&f.text).to_owned())
                .collect()
        })
    };
    a.kind == b.kind
        && a.name == b.name
        && a.annotations == b.annotations
        && a.supertypes == b.supertypes
        && a.params == b.params
        && a.return_type == b.return_type
        && a.is_companion == b.is_companion
        && a.enclosing == b.enclosing
        && a.has_body == b.has_body
        && block_texts(fa, a) == block_texts(fb, b)
        && a.children.len() == b.children.len()
        && a.children
            .iter()
            .zip(&b.children)
            .all(|(x, y)| decl_equal(fa, x, fb, y))
}
