//! Execution of extension scripts against recording mocks.
//!
//! Every global the sandbox does not define resolves to a mock object that
//! records property reads, calls and constructions. Functions handed to mocks
//! are queued and invoked later, and functions that nothing ever calls are
//! invoked once each, so listener bodies are reached without a browser.

mod builtins;
mod interp;
mod value;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::crx::FileTree;
use crate::js::{parse_program, ParseOutcome};
use crate::static_tracer::{to_calls, ApiCall, ModuleGraph, Origin};
use interp::{Abort, Interp};

pub use builtins::{parse_float, parse_int};

/// Interpreter stack: deep user recursion is cut off at a fixed call depth,
/// but each level of a debug build is large.
const TRACE_STACK: usize = 512 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    /// Steps per entrypoint.
    pub max_steps: u64,
    /// Iterations per loop execution.
    pub max_loop_iterations: u64,
    pub max_callback_depth: u32,
    /// Wall clock for the whole trace.
    pub wall_clock_ms: u64,
}

impl Default for Budget {
    fn default() -> Self {
        Budget { max_steps: 2_000_000, max_loop_iterations: 10_000, max_callback_depth: 3, wall_clock_ms: 5_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Get,
    Call,
    Construct,
    Eval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub seq: u64,
    pub kind: EventKind,
    pub path: String,
    pub args: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TraceLog {
    pub calls: Vec<ApiCall>,
    pub navigator_reads: Vec<ApiCall>,
    pub events: Vec<TraceEvent>,
    pub budget_exhausted: bool,
    /// Entrypoints whose execution hit a budget.
    pub exhausted_entrypoints: Vec<String>,
    pub errors: Vec<String>,
}

impl TraceLog {
    /// Writes the event log as JSON Lines.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for e in &self.events {
            serde_json::to_writer(&mut out, e)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TraceError {
    #[error("no entrypoint could be parsed")]
    NoExecutableEntrypoint,
}

/// Parses every script reachable in `graph` for execution, in graph order.
pub fn entry_sources(graph: &ModuleGraph, tree: &FileTree) -> Vec<(String, ParseOutcome)> {
    graph
        .nodes
        .iter()
        .filter_map(|path| graph.source(path, tree).map(|src| (path.clone(), parse_program(&src, true))))
        .collect()
}

/// Runs each entrypoint in order within one shared global environment.
pub fn trace_execution(entries: &[(String, ParseOutcome)], budget: &Budget) -> Result<TraceLog, TraceError> {
    if !entries.iter().any(|(_, o)| o.ast.is_some()) {
        return Err(TraceError::NoExecutableEntrypoint);
    }
    std::thread::scope(|s| {
        std::thread::Builder::new()
            .stack_size(TRACE_STACK)
            .spawn_scoped(s, || run(entries, budget))
            .expect("spawn trace thread")
            .join()
            .expect("trace thread panicked")
    })
}

fn run(entries: &[(String, ParseOutcome)], budget: &Budget) -> Result<TraceLog, TraceError> {
    let mut it = Interp::new(budget);
    let mut log = TraceLog::default();
    for (label, outcome) in entries {
        let Some(program) = &outcome.ast else { continue };
        it.reset_entry_budget();
        let r = it.run_program(label, program).and_then(|_| it.drain_callbacks(label));
        if let Err(interp::Ctrl::Abort(kind)) = r {
            log.budget_exhausted = true;
            log.exhausted_entrypoints.push(label.clone());
            it.discard_pending();
            if kind == Abort::Clock {
                it.errors.push(format!("{label}: wall clock budget exhausted"));
                break;
            }
        }
    }
    log.calls = to_calls(&it.calls, Origin::Dynamic);
    log.navigator_reads = to_calls(&it.reads, Origin::Dynamic);
    log.events = std::mem::take(&mut it.events);
    log.errors = std::mem::take(&mut it.errors);
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::static_tracer::scan_outcome;
    use std::collections::BTreeMap;

    fn trace(sources: &[&str]) -> TraceLog {
        trace_with(sources, &Budget::default())
    }

    fn trace_with(sources: &[&str], budget: &Budget) -> TraceLog {
        let entries: Vec<_> =
            sources.iter().enumerate().map(|(i, s)| (format!("e{i}.js"), parse_program(s, false))).collect();
        trace_execution(&entries, budget).unwrap()
    }

    fn paths(log: &TraceLog) -> Vec<&str> {
        log.calls.iter().map(|c| c.path.as_str()).collect()
    }

    #[test]
    fn eval_string_is_executed() {
        let log = trace(&[r#"eval("chrome.tabs.create()")"#]);
        assert_eq!(paths(&log), ["browser.tabs.create"]);
        assert!(log.events.iter().any(|e| e.kind == EventKind::Eval));
    }

    #[test]
    fn eval_of_built_string() {
        let log = trace(&[r#"var a = "chrome.tabs"; var b = ".remove(1)"; eval(a + b); new Function("browser.alarms.clear()")();"#]);
        assert_eq!(paths(&log), ["browser.alarms.clear", "browser.tabs.remove"]);
    }

    #[test]
    fn unresolved_eval_argument_is_marked() {
        let log = trace(&["eval(someGlobal)"]);
        let ev = log.events.iter().find(|e| e.kind == EventKind::Eval).unwrap();
        assert_eq!(ev.args, ["<unresolved>"]);
    }

    #[test]
    fn listener_is_forced() {
        let log = trace(&["chrome.runtime.onMessage.addListener(function(m){ chrome.storage.local.set(m) })"]);
        assert_eq!(paths(&log), ["browser.runtime.onMessage.addListener", "browser.storage.local.set"]);
    }

    #[test]
    fn false_branch_is_not_taken() {
        let log = trace(&["if (false) { chrome.history.deleteAll() }"]);
        assert!(log.calls.is_empty());
    }

    #[test]
    fn runaway_entrypoint_does_not_starve_the_next() {
        let log = trace(&["while(true){}", "chrome.tabs.query()"]);
        assert!(log.budget_exhausted);
        assert_eq!(log.exhausted_entrypoints, ["e0.js"]);
        assert_eq!(paths(&log), ["browser.tabs.query"]);
    }

    #[test]
    fn step_budget_aborts_recursion_free_loops() {
        let budget = Budget { max_steps: 1_000, ..Budget::default() };
        let log = trace_with(&["for (var i = 0; i < 5000; i++) { i = i; }", "chrome.tabs.get(1)"], &budget);
        assert!(log.budget_exhausted);
        assert_eq!(paths(&log), ["browser.tabs.get"]);
    }

    #[test]
    fn uncalled_functions_run_once() {
        let log = trace(&["function onClick(e) { chrome.tabs.create({url: e.url}); } var h = () => browser.tabs.reload();"]);
        assert_eq!(paths(&log), ["browser.tabs.create", "browser.tabs.reload"]);
        assert_eq!(log.calls.iter().map(|c| c.count).collect::<Vec<_>>(), [1, 1]);
    }

    #[test]
    fn callback_depth_is_bounded() {
        let src = "chrome.a.f(function(){ chrome.b.f(function(){ chrome.c.f(function(){ chrome.d.f(function(){ chrome.e.f() }) }) }) })";
        let budget = Budget { max_callback_depth: 2, ..Budget::default() };
        let log = trace_with(&[src], &budget);
        // Depth-3 callback is never queued; it is still force-invoked as an uncalled function.
        assert!(paths(&log).contains(&"browser.c.f"));
        let log = trace_with(&[src], &Budget { max_callback_depth: 0, ..Budget::default() });
        assert!(paths(&log).contains(&"browser.a.f"));
    }

    #[test]
    fn errors_in_callbacks_are_contained() {
        let log = trace(&["chrome.x.on(function(){ null.boom; }); chrome.x.on(function(){ chrome.y.z(); });"]);
        assert_eq!(paths(&log), ["browser.x.on", "browser.y.z"]);
        assert_eq!(log.calls[0].count, 2);
        assert!(log.errors.iter().any(|e| e.contains("Cannot read properties of null")));
    }

    #[test]
    fn mock_coercions() {
        let log = trace(&[r#"
            if (chrome.runtime) { chrome.runtime.connect(); }
            if (+chrome.x === 1) { chrome.ok.num(); }
            if ("" + chrome.tabs === "browser.tabs") { chrome.ok.str(); }
            if (chrome.tabs === chrome.tabs) { chrome.ok.same(); }
        "#]);
        assert_eq!(paths(&log), ["browser.ok.num", "browser.ok.same", "browser.ok.str", "browser.runtime.connect"]);
    }

    #[test]
    fn builtins_behave() {
        let log = trace(&[r#"
            var o = JSON.parse('{"b":[1,2,3],"a":"x"}');
            if (JSON.stringify(o.b.map(function(x){ return x * 2; })) === "[2,4,6]") chrome.ok.json();
            if ([3,1,2].sort().join("-") === "1-2-3") chrome.ok.sort();
            if ("a,b".split(",").length === 2 && "Hello".toUpperCase() === "HELLO") chrome.ok.str();
            if (Object.keys({x:1,y:2}).join() === "x,y") chrome.ok.keys();
            if (parseInt("0x10") === 16 && atob(btoa("hi")) === "hi") chrome.ok.misc();
            var r = Math.random(); if (r >= 0 && r < 1) chrome.ok.rand();
            try { throw new TypeError("t"); } catch (e) { if (e instanceof Error && e.message === "t") chrome.ok.err(); }
        "#]);
        for p in ["json", "sort", "str", "keys", "misc", "rand", "err"] {
            assert!(paths(&log).contains(&format!("browser.ok.{p}").as_str()), "missing {p}: {:?}", log.errors);
        }
    }

    #[test]
    fn closures_and_this() {
        let log = trace(&[r#"
            function Counter() { this.n = 0; }
            Counter.prototype.inc = function () { this.n++; return this; };
            var c = new Counter(); c.inc().inc();
            var api = (function () { var ns = chrome.tabs; return { go: function () { ns.update(); } }; })();
            if (c.n === 2) api.go();
        "#]);
        assert!(paths(&log).contains(&"browser.tabs.update"));
    }

    #[test]
    fn timers_and_promises_are_callbacks() {
        let log = trace(&["setTimeout(function(){ chrome.a.b(); }, 100); chrome.tabs.query({}).then(t => chrome.c.d(t));"]);
        assert_eq!(paths(&log), ["browser.a.b", "browser.c.d", "browser.tabs.query"]);
    }

    #[test]
    fn navigator_reads_are_separate() {
        let log = trace(&["var ua = navigator.userAgent; navigator.clipboard.writeText('x');"]);
        assert_eq!(paths(&log), ["navigator.clipboard.writeText"]);
        let reads: Vec<_> = log.navigator_reads.iter().map(|c| c.path.as_str()).collect();
        assert_eq!(reads, ["navigator.clipboard", "navigator.userAgent"]);
    }

    #[test]
    fn deterministic_and_stable_identity() {
        let src = "var a = chrome.tabs; var b = chrome.tabs; if (a === b) chrome.same.id(Math.random());";
        let one = trace(&[src]);
        let two = trace(&[src]);
        assert_eq!(one, two);
        let mut a = Vec::new();
        let mut b = Vec::new();
        one.write_jsonl(&mut a).unwrap();
        two.write_jsonl(&mut b).unwrap();
        assert_eq!(a, b);
        assert!(paths(&one).contains(&"browser.same.id"));
        let first = String::from_utf8(a).unwrap();
        let line: serde_json::Value = serde_json::from_str(first.lines().next().unwrap()).unwrap();
        assert_eq!(line["kind"], "get");
        assert_eq!(line["seq"], 0);
    }

    #[test]
    fn deep_recursion_is_an_error_not_a_crash() {
        let log = trace(&["function f(n) { return f(n + 1); } f(0); chrome.after.x();"]);
        assert!(log.errors.iter().any(|e| e.contains("Maximum call stack")));
    }

    #[test]
    fn requires_a_parseable_entrypoint() {
        let bad = ParseOutcome { ast: None, errors: Vec::new(), coverage: 0.0, skipped: Vec::new() };
        assert_eq!(trace_execution(&[("x.js".into(), bad)], &Budget::default()), Err(TraceError::NoExecutableEntrypoint));
    }

    #[test]
    fn static_calls_are_a_subset_on_straight_line_code() {
        let src = "chrome.tabs.query({}); var s = chrome.storage.local; s.get('k'); browser.alarms['create']('a');";
        let outcome = parse_program(src, false);
        let (mut calls, mut reads) = (BTreeMap::new(), BTreeMap::new());
        scan_outcome(&outcome, &mut calls, &mut reads);
        let log = trace(&[src]);
        for p in calls.keys() {
            assert!(paths(&log).contains(&p.as_str()), "{p} missing");
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        const SNIPPETS: &[&str] = &[
            "chrome.tabs.query({}, function(t){ x = t; });",
            "var x = chrome.storage.local;",
            "x.get('k');",
            "while (x) { x = x.next; }",
            "for (var i = 0; i < 3; i++) { eval('chrome.a.b' + i + '()'); }",
            "function f(n) { return n ? f(n - 1) : chrome.runtime.id; }",
            "f(5);",
            "if (Math.random() > 0.5) { browser.c.d(); }",
            "try { null.x } catch (e) { chrome.e.f(e) }",
            "setTimeout(() => chrome.g.h(), 0);",
            "navigator.userAgent;",
            "throw 1;",
        ];

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]

            #[test]
            fn terminates_deterministically(picks in proptest::collection::vec(0..SNIPPETS.len(), 0..12)) {
                let src: String = picks.iter().map(|&i| SNIPPETS[i]).collect::<Vec<_>>().join("\n");
                let budget = Budget { max_steps: 20_000, ..Budget::default() };
                let a = trace_with(&[&src], &budget);
                let b = trace_with(&[&src], &budget);
                prop_assert_eq!(&a, &b);
                for c in &a.calls {
                    prop_assert!(c.path.starts_with("browser.") || c.path.starts_with("navigator."));
                }
            }
        }
    }
}
