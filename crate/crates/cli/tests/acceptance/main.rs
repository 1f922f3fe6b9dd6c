//! Acceptance run: one line per criterion, non-zero exit if any fails.

mod errors;
mod examples;
mod figure3;
mod mixed;
mod properties;
mod support;

use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

type Outcome = Result<String, String>;

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

const CRITERIA: &[Criterion] = &[
    Criterion {
        id: 1,
        name: "worked cases",
        budget: Duration::from_secs(1),
        run: examples::ledger,
    },
    Criterion {
        id: 2,
        name: "pairwise substitution against a linear solve",
        budget: Duration::from_secs(5),
        run: examples::linear_solve,
    },
    Criterion {
        id: 3,
        name: "mixed distribution of X",
        budget: Duration::from_secs(5),
        run: mixed::criterion,
    },
    Criterion {
        id: 4,
        name: "message trace under X2=1",
        budget: Duration::from_secs(30),
        run: trace::criterion,
    },
    Criterion {
        id: 5,
        name: "prior means",
        budget: Duration::from_secs(60),
        run: figure3::prior_means,
    },
    Criterion {
        id: 6,
        name: "posteriors under X2=1 against quadrature",
        budget: Duration::from_secs(60),
        run: figure3::posteriors,
    },
    Criterion {
        id: 7,
        name: "property suites",
        budget: Duration::from_secs(600),
        run: properties::criterion,
    },
    Criterion {
        id: 8,
        name: "error paths",
        budget: Duration::from_secs(30),
        run: errors::criterion,
    },
    Criterion {
        id: 9,
        name: "normal template",
        budget: Duration::from_secs(5),
        run: template::criterion,
    },
];

fn main() -> ExitCode {
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for c in CRITERIA.iter().filter(|c| only.is_empty() || only.contains(&c.id)) {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(format!("panic: {msg}"))
        });
        let took = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if took > c.budget => Err(format!("{detail}; over the {:?} budget", c.budget)),
            other => other,
        };
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {} {tag} [{:.2?}] {}: {detail}", c.id, took, c.name);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    }
}
