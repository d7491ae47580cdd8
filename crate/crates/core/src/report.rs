//! Machine-readable suite reports.

use std::fmt::Display;
use std::time::Instant;

use serde::Serialize;

use crate::error::Error;
use crate::fault::Fault;
use crate::mindex::LevelContext;

/// Failures kept per report; the count is always exact.
pub const MAX_RECORDED_FAILURES: usize = 25;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct ReportCtx {
    pub p: u32,
    pub m: u32,
    pub r: usize,
}

impl From<&LevelContext> for ReportCtx {
    fn from(c: &LevelContext) -> Self {
        ReportCtx { p: c.p(), m: c.m(), r: c.r() }
    }
}

/// Parameters of one suite run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SuiteParams {
    #[serde(rename = "N")]
    pub n: u32,
    pub seed: u64,
    pub deg: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fault: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sign: Option<i32>,
}

impl SuiteParams {
    /// Defaults N = 2, seed = 42, deg = 2·p^{m+1}.
    pub fn defaults(ctx: &LevelContext) -> Self {
        SuiteParams { n: 2, seed: 42, deg: 2 * ctx.period(), fault: None, sign: None }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Failure {
    pub input: String,
    pub expected: String,
    pub got: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub ctx: ReportCtx,
    pub params: SuiteParams,
    pub cases_total: u64,
    pub cases_failed: u64,
    pub failures: Vec<Failure>,
    pub elapsed_ms: u64,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.cases_failed == 0 && self.cases_total > 0
    }

    /// Same report with the timing field zeroed.
    pub fn without_timing(&self) -> SuiteReport {
        SuiteReport { elapsed_ms: 0, ..self.clone() }
    }
}

/// Accumulates pass/fail cases for one suite run.
pub struct Cases {
    total: u64,
    failed: u64,
    failures: Vec<Failure>,
    start: Instant,
}

impl Default for Cases {
    fn default() -> Self {
        Self::new()
    }
}

impl Cases {
    pub fn new() -> Self {
        Cases { total: 0, failed: 0, failures: Vec::new(), start: Instant::now() }
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn failed(&self) -> u64 {
        self.failed
    }

    pub fn fail(&mut self, input: impl Display, expected: impl Display, got: impl Display) {
        self.total += 1;
        self.failed += 1;
        if self.failures.len() < MAX_RECORDED_FAILURES {
            self.failures.push(Failure {
                input: input.to_string(),
                expected: expected.to_string(),
                got: got.to_string(),
            });
        }
    }

    pub fn pass(&mut self) {
        self.total += 1;
    }

    /// Records a pass iff `ok`.
    pub fn check(&mut self, ok: bool, input: impl Display, expected: impl Display, got: impl Display) -> bool {
        if ok {
            self.pass();
        } else {
            self.fail(input, expected, got);
        }
        ok
    }

    /// Records equality of two displayable values.
    pub fn eq<T: PartialEq + Display>(&mut self, input: impl Display, expected: &T, got: &T) -> bool {
        if expected == got {
            self.pass();
            true
        } else {
            self.fail(input, expected, got);
            false
        }
    }

    /// Like [`Cases::eq`] for `Debug` values, formatting the input only on failure.
    pub fn same<T: PartialEq + std::fmt::Debug>(&mut self, expected: T, got: T, input: impl FnOnce() -> String) -> bool {
        if expected == got {
            self.pass();
            true
        } else {
            self.fail(input(), format!("{expected:?}"), format!("{got:?}"));
            false
        }
    }

    /// Records `Ok` as a pass and any error as a failure.
    pub fn ok<T>(&mut self, input: impl Display, r: Result<T, Error>) -> Option<T> {
        match r {
            Ok(v) => {
                self.pass();
                Some(v)
            }
            Err(e) => {
                self.fail(input, "ok", e);
                None
            }
        }
    }

    pub fn finish(self, suite: &str, ctx: &LevelContext, mut params: SuiteParams) -> SuiteReport {
        if ctx.fault() != Fault::None {
            params.fault = Some(ctx.fault().name().to_string());
        }
        SuiteReport {
            suite: suite.to_string(),
            ctx: ctx.into(),
            params,
            cases_total: self.total,
            cases_failed: self.failed,
            failures: self.failures,
            elapsed_ms: self.start.elapsed().as_millis() as u64,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_and_cap() {
        let ctx = LevelContext::new(2, 0, 1).unwrap();
        let mut c = Cases::new();
        c.pass();
        for i in 0..40 {
            c.fail(i, 0, 1);
        }
        let r = c.finish("x", &ctx, SuiteParams::defaults(&ctx));
        assert_eq!((r.cases_total, r.cases_failed, r.failures.len()), (41, 40, 25));
        assert!(!r.passed());
        let json = serde_json::to_string(&r.without_timing()).unwrap();
        assert!(json.starts_with("{\"suite\":\"x\",\"ctx\":{\"p\":2,\"m\":0,\"r\":1},\"params\":{\"N\":2,\"seed\":42,\"deg\":4}"));
    }
}
