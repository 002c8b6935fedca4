use std::collections::BTreeSet;
use std::ops::Range;

use crate::lexer::{self, TokenKind};
use crate::types::{ProofProposal, SourcePos, TheoremTask};

use super::ReviewError;

const PLACEHOLDERS: &[&str] = &["sorry", "admit"];

/// The full file to compile for one proposal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateFile {
    /// Assembled source, before sorry stripping.
    pub source: String,
    /// Sorry/admit tokens inside `target_span`, as positions in `source`.
    pub sorry_sites: Vec<SourcePos>,
    /// Byte range of the proposal's theorem inside `source`.
    pub target_span: Range<usize>,
}

impl CandidateFile {
    /// Removes placeholder tokens inside the target span only.
    pub fn strip_sorries(&self) -> (String, Vec<SourcePos>) {
        let spans = placeholder_tokens(&self.source, Some(&self.target_span));
        (remove_spans(&self.source, &spans), self.sorry_sites.clone())
    }
}

fn placeholder_tokens(src: &str, within: Option<&Range<usize>>) -> Vec<(Range<usize>, SourcePos)> {
    lexer::tokenize(src)
        .into_iter()
        .filter(|t| t.kind == TokenKind::Ident && PLACEHOLDERS.contains(&t.text(src)))
        .filter(|t| within.is_none_or(|w| t.span.start >= w.start && t.span.end <= w.end))
        .map(|t| {
            (
                t.span.clone(),
                SourcePos {
                    line: t.line,
                    column: t.column,
                },
            )
        })
        .collect()
}

fn remove_spans(src: &str, spans: &[(Range<usize>, SourcePos)]) -> String {
    let mut out = String::with_capacity(src.len());
    let mut last = 0;
    for (span, _) in spans {
        out.push_str(&src[last..span.start]);
        last = span.end;
    }
    out.push_str(&src[last..]);
    out
}

/// Replaces every `sorry`/`admit` tactic token with empty text and returns the
/// stripped source plus the token positions in the original. Comments, string
/// literals and identifiers that merely contain the words are left alone.
pub fn strip_sorries(source: &str) -> (String, Vec<SourcePos>) {
    let spans = placeholder_tokens(source, None);
    let sites = spans.iter().map(|(_, p)| *p).collect();
    (remove_spans(source, &spans), sites)
}

struct FileHeader {
    imports: BTreeSet<String>,
    opens: BTreeSet<String>,
    /// Byte offset just past the import block (0 when there is none).
    import_end: usize,
    /// The import block's last line lacks a trailing newline.
    needs_newline: bool,
}

fn scan_header(file: &str, before: usize) -> FileHeader {
    let toks = lexer::code_tokens(file);
    let mut imports = BTreeSet::new();
    let mut opens = BTreeSet::new();
    let mut import_end = 0;
    let mut in_imports = true;
    let mut i = 0;
    while i < toks.len() {
        let t = &toks[i];
        let text = t.text(file);
        if in_imports && text == "import" && t.kind == TokenKind::Ident {
            // `import Foo.Bar` (possibly several modules on the line)
            let line = t.line;
            let mut j = i + 1;
            while j < toks.len() && toks[j].line == line && toks[j].kind == TokenKind::Ident {
                imports.insert(toks[j].text(file).to_string());
                j += 1;
            }
            let line_end = file[t.span.start..].find('\n').map_or(file.len(), |k| t.span.start + k + 1);
            import_end = line_end;
            i = j;
            continue;
        }
        in_imports = false;
        if t.span.start >= before {
            break;
        }
        if text == "open" && t.kind == TokenKind::Ident {
            let line = t.line;
            let mut j = i + 1;
            let mut names = Vec::new();
            while j < toks.len() && toks[j].line == line && toks[j].kind == TokenKind::Ident {
                names.push(toks[j].text(file).to_string());
                j += 1;
            }
            // `open Foo in` scopes to one command only.
            if names.last().map(String::as_str) != Some("in") {
                opens.extend(names);
            }
            i = j;
            continue;
        }
        i += 1;
    }
    FileHeader {
        imports,
        opens,
        import_end,
        needs_newline: import_end > 0 && !file[..import_end].ends_with('\n'),
    }
}

/// Splices a proposal into the task's file.
///
/// New imports go after the existing import block, new `open` lines right after
/// them, and the target theorem text is replaced by the proposal's theorem.
/// Everything else is copied byte for byte.
pub fn assemble_candidate(task: &TheoremTask, proposal: &ProofProposal) -> Result<CandidateFile, ReviewError> {
    let file = &task.file_content;
    let target_start = file
        .find(&task.target_theorem)
        .filter(|_| !task.target_theorem.is_empty())
        .ok_or(ReviewError::TargetNotFound)?;
    let target_end = target_start + task.target_theorem.len();

    let header = scan_header(file, target_start);
    let mut inserted = String::new();
    if header.needs_newline {
        inserted.push('\n');
    }
    let mut proposal = proposal.clone();
    proposal.normalize();
    for imp in proposal.imports.iter().filter(|i| !header.imports.contains(*i)) {
        inserted.push_str(&format!("import {imp}\n"));
    }
    for ns in proposal.opens.iter().filter(|o| !header.opens.contains(*o)) {
        inserted.push_str(&format!("open {ns}\n"));
    }
    let insert_at = header.import_end.min(target_start);
    let updated = proposal.updated_theorem.trim_matches('\n');

    let mut source = String::with_capacity(file.len() + inserted.len() + updated.len());
    source.push_str(&file[..insert_at]);
    source.push_str(&inserted);
    source.push_str(&file[insert_at..target_start]);
    let span_start = source.len();
    source.push_str(updated);
    let target_span = span_start..source.len();
    source.push_str(&file[target_end..]);

    let sorry_sites = placeholder_tokens(&source, Some(&target_span))
        .into_iter()
        .map(|(_, p)| p)
        .collect();
    Ok(CandidateFile {
        source,
        sorry_sites,
        target_span,
    })
}
