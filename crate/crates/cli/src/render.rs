//! Plain-text reports.

use std::fmt::Write;

use altgen_core::audit::AuditReport;
use altgen_core::pipeline::{AuditRun, FileStatus, RepairRun, ValidateRun};

fn issues(out: &mut String, report: &AuditReport) {
    for i in &report.issues {
        let at = match i.location.element_index {
            Some(n) => format!("{}#{n}", i.location.doc_path),
            None => i.location.doc_path.clone(),
        };
        let _ = writeln!(out, "    {:?} {:?} {at}: {}", i.severity, i.code, i.message);
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"))
}

pub fn audit(run: &AuditRun) -> String {
    let mut out = String::new();
    for f in &run.files {
        match (&f.report, &f.error) {
            (Some(r), _) => {
                let _ = writeln!(out, "{}: {} error(s), {} warning(s)", f.input_path, r.error_count, r.warning_count);
                issues(&mut out, r);
            }
            (None, e) => {
                let _ = writeln!(out, "{}: failed: {}", f.input_path, e.as_deref().unwrap_or("unknown"));
            }
        }
    }
    let a = &run.aggregate;
    let _ = writeln!(
        out,
        "{} file(s), {} error(s), {} warning(s), {} failed",
        a.n_files, a.error_count, a.warning_count, a.failed_files
    );
    out
}

pub fn repair(run: &RepairRun) -> String {
    let mut out = String::new();
    for f in &run.files {
        let status = match &f.status {
            FileStatus::Repaired => "repaired".to_string(),
            FileStatus::CleanSkipped => "clean, copied".to_string(),
            FileStatus::Failed(reason) => format!("failed: {reason}"),
        };
        let pre = f.pre_report.as_ref().map(|r| r.error_count);
        let _ = writeln!(
            out,
            "{}: {status} (errors {} -> {}, alts written {}, skipped {}, {:.3}s)",
            f.input_path,
            pre.map_or("?".into(), |n| n.to_string()),
            f.residual_errors(),
            f.alts_written,
            f.alts_skipped,
            f.elapsed_seconds
        );
        for s in &f.skipped {
            let _ = writeln!(out, "    skipped {}#{} ({}): {}", s.doc, s.index, s.src, s.reason);
        }
        for fix in &f.fixes {
            let _ = writeln!(
                out,
                "    {} {:?} -> {:?} ({:?}{})",
                fix.field,
                fix.old,
                fix.new,
                fix.reason,
                if fix.warning { ", review" } else { "" }
            );
        }
    }
    let a = &run.aggregate;
    let _ = writeln!(
        out,
        "{} file(s): {} repaired, {} clean, {} failed; errors {} -> {}; error reduction {:.1}%{}; {:.3}s per file",
        a.n_files,
        a.repaired,
        a.clean_skipped,
        a.failed,
        a.pre_errors,
        a.post_errors,
        a.err_percent,
        if a.no_baseline { " (no baseline)" } else { "" },
        a.seconds_per_file
    );
    out
}

pub fn validate(run: &ValidateRun) -> String {
    let mut out = String::new();
    for p in &run.pairs {
        let _ = writeln!(
            out,
            "{} {}#{}: cosine {} bleu {}",
            p.epub,
            p.doc,
            p.index,
            opt(p.cosine),
            opt(p.bleu)
        );
    }
    for m in &run.missing {
        let _ = writeln!(out, "{} {}#{}: missing: {}", m.epub, m.doc, m.index, m.reason);
    }
    let r = &run.metrics;
    let _ = writeln!(out, "pairs scored: {} (excluded {}, missing {})", r.n_pairs, r.excluded_pairs, run.missing_references);
    let _ = writeln!(out, "mean cosine similarity: {}", opt(r.cosine));
    let _ = writeln!(out, "mean BLEU: {}", opt(r.bleu));
    let _ = writeln!(out, "error reduction rate: {}%", opt(r.err_percent));
    let _ = writeln!(out, "seconds per file: {}", opt(r.seconds_per_file));
    out
}
