//! Dispatches tool calls against an offline premise index and a canned web
//! search.

use std::collections::BTreeSet;
use std::sync::Arc;

use leanloop::llm::ToolCallRequest;
use leanloop::toolbox::{MockLibrarySearch, MockWebSearch, Toolbox, WebScript};
use leanloop::types::ToolKind;

fn main() {
    let toolbox = Toolbox::disabled()
        .with_library(Arc::new(MockLibrarySearch::nat_sample()))
        .with_web(Arc::new(MockWebSearch::new(WebScript::default())))
        .with_limit(3);
    let allowed: BTreeSet<ToolKind> = [ToolKind::LibrarySearch].into_iter().collect();
    let calls = [
        ToolCallRequest::new("c1", ToolKind::LibrarySearch, "n + 0 = n"),
        ToolCallRequest::new("c2", ToolKind::LibrarySearch, "commutativity of addition"),
        ToolCallRequest::new("c3", ToolKind::WebSearch, "lean 4 omega tactic"),
    ];
    for (call, out) in calls.iter().zip(toolbox.run_round(&calls, &allowed)) {
        println!("{} {} {}\n{out}\n", call.id, call.name, call.arguments["query"]);
    }
}
