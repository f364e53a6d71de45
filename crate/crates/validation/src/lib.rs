//! Reference implementations used to check the simulator, plus the
//! acceptance report format.

pub mod oracle;

use std::io::Write;
use std::time::Duration;

/// Outcome of one acceptance criterion.
#[derive(Debug, Clone)]
pub struct Verdict {
    pub id: u8,
    pub title: &'static str,
    pub pass: bool,
    pub detail: String,
    pub elapsed: Duration,
    pub budget: Duration,
}

impl Verdict {
    pub fn ok(&self) -> bool {
        self.pass && self.elapsed < self.budget
    }

    pub fn line(&self) -> String {
        let timing = if self.elapsed < self.budget { "" } else { " OVER BUDGET" };
        format!(
            "[{}] {:02} {}: {} ({:.3} s of {:.0} s{timing})",
            if self.ok() { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.detail,
            self.elapsed.as_secs_f64(),
            self.budget.as_secs_f64(),
        )
    }

    /// Writes the line straight to stderr so it shows without `--nocapture`.
    pub fn emit(&self) {
        let mut line = self.line();
        line.push('\n');
        let _ = std::io::stderr().lock().write_all(line.as_bytes());
    }
}
