//! Consolidation of finished runs.

use serde::Serialize;
use shrinkerlab::audit::{AuditReport, AuditStatus};
use shrinkerlab::io::Manifest;
use shrinkerlab::{Error, Result};

use crate::commands::Run;
use crate::config::ReportParams;

#[derive(Debug, Serialize)]
struct AuditLine {
    name: String,
    status: AuditStatus,
    failing: Vec<String>,
}

#[derive(Debug, Serialize)]
struct RunEntry {
    dir: String,
    command: String,
    version: String,
    config_digest: String,
    passed: bool,
    audits: Vec<AuditLine>,
}

#[derive(Debug, Serialize)]
struct Consolidated {
    passed: bool,
    /// `dir: audit/check` for every failing inequality.
    failing: Vec<String>,
    runs: Vec<RunEntry>,
}

pub fn report(p: &ReportParams, run: &mut Run) -> Result<()> {
    if p.dirs.is_empty() {
        return Err(Error::Validation("report needs at least one run directory".into()));
    }
    let mut runs = Vec::new();
    let mut failing = Vec::new();
    let mut merged = AuditReport::new("report");
    for dir in &p.dirs {
        let m = Manifest::read(dir)?;
        let name = dir.display().to_string();
        let audits: Vec<AuditLine> = m
            .audits
            .iter()
            .map(|a| AuditLine {
                name: a.name.clone(),
                status: a.status,
                failing: a.failures().iter().map(|s| s.to_string()).collect(),
            })
            .collect();
        for a in &audits {
            if a.status == AuditStatus::Fail {
                failing.extend(a.failing.iter().map(|c| format!("{name}: {}/{c}", a.name)));
            }
            merged.check_flag(format!("{name}: {}", a.name), a.status != AuditStatus::Fail, a.failing.join(", "));
        }
        let passed = m.passed && audits.iter().all(|a| a.status != AuditStatus::Fail);
        runs.push(RunEntry { dir: name, command: m.command, version: m.version, config_digest: m.config_digest, passed, audits });
    }
    let out = Consolidated { passed: runs.iter().all(|r| r.passed), failing, runs };

    println!("{:<32} {:<28} {:<15} failing", "run", "audit", "status");
    for r in &out.runs {
        for a in &r.audits {
            println!("{:<32} {:<28} {:<15} {}", r.dir, a.name, status_word(a.status), a.failing.join(", "));
        }
    }
    println!("overall: {}", if out.passed { "PASS" } else { "FAIL" });

    run.json_always("report.json", &out)?;
    run.audit(merged);
    Ok(())
}

pub fn status_word(s: AuditStatus) -> &'static str {
    match s {
        AuditStatus::Pass => "pass",
        AuditStatus::Fail => "FAIL",
        AuditStatus::NotApplicable => "not_applicable",
    }
}
