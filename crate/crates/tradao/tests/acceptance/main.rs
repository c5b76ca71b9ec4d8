//! One PASS/FAIL line per acceptance criterion; exits non-zero on any failure.

#[path = "../common/mod.rs"]
mod common;

mod accounting;
mod correlation;
mod normalization;
mod scenario;
mod service;
mod tree;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

/// `Ok(detail)` or `Err(reason)`; panics count as failures too.
pub type Outcome = Result<String, String>;

fn run(name: &str, budget: Option<Duration>, check: fn() -> Outcome) -> bool {
    let start = Instant::now();
    let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into());
        Err(msg)
    });
    let elapsed = start.elapsed();
    let result = match (result, budget) {
        (Ok(_), Some(b)) if elapsed > b => Err(format!("took {elapsed:.1?}, budget {b:?}")),
        (r, _) => r,
    };
    match &result {
        Ok(detail) => println!("PASS  {name}  [{detail}; {elapsed:.2?}]"),
        Err(reason) => println!("FAIL  {name}  [{reason}; {elapsed:.2?}]"),
    }
    result.is_ok()
}

fn main() -> ExitCode {
    let secs = |s| Some(Duration::from_secs(s));
    let results = [
        run("metric oracle suite", secs(30), metric_oracle::check),
        run("accounting suite", secs(30), accounting::check),
        run("normalization suite", None, normalization::check),
        run("correlation/residual suite", None, correlation::check),
        run("tree suite", None, tree::check),
        run("sell-off scenario reconstruction", None, scenario::check),
        run("service contract suite", None, service::check),
    ];
    let failed = results.iter().filter(|ok| !**ok).count();
    println!("{} passed, {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
