use std::fmt::Write;

use super::format::fmt_num;
use super::trace::{DerivationTrace, Status};

/// Plain-text rendering of a trace for terminals.
pub fn render_trace_text(trace: &DerivationTrace) -> String {
    let mut out = String::new();
    let w = &mut out;
    let _ = writeln!(w, "journey {}", trace.journey);
    let _ = writeln!(w, "  expression  {}", trace.expression);
    let i = &trace.interval;
    let _ = writeln!(
        w,
        "  availability [{}, {}]  lo: {}  hi: {}",
        fmt_num(i.lo),
        fmt_num(i.hi),
        i.lo_assumption.as_str(),
        i.hi_assumption.as_str()
    );
    let l = &trace.latency;
    let _ = writeln!(
        w,
        "  latency {}  point {}ms  conservative upper {}ms",
        super::rules::percentile_tag(l.percentile),
        fmt_num(l.point.point_ms),
        fmt_num(l.conservative.upper_ms)
    );
    for q in &trace.timeouts {
        let _ = writeln!(
            w,
            "  timeout {} at {}ms  q in [{}, {}]",
            q.path,
            fmt_num(q.t_ms),
            fmt_num(q.lo),
            fmt_num(q.hi)
        );
    }
    let v = &trace.verdict;
    let status = match v.status {
        Status::Pass => "PASS",
        Status::Fail => "FAIL",
    };
    let _ = writeln!(w, "  verdict {status} ({} bound)", v.bound_mode.as_str());
    if let Some(a) = &v.availability {
        let _ = writeln!(
            w,
            "    availability {} vs target {}  {}",
            fmt_num(a.bound),
            a.target.normalize(),
            if a.pass { "ok" } else { "below target" }
        );
    }
    if let Some(l) = &v.latency {
        let _ = writeln!(
            w,
            "    latency upper {}ms vs {}ms  {}",
            fmt_num(l.upper_ms),
            fmt_num(l.threshold_ms),
            if l.pass { "ok" } else { "over threshold" }
        );
    }
    let _ = writeln!(w, "  sensitivity ({}):", trace.sensitivity.mode.as_str());
    for e in &trace.sensitivity.entries {
        let _ = writeln!(w, "    {:>2}. {:<16} +{}", e.rank, e.name, fmt_num(e.delta));
    }
    let _ = writeln!(w, "  nodes:");
    for r in &trace.records {
        let name = r.name.as_deref().unwrap_or("");
        match (&r.availability, &r.branch) {
            (Some(a), _) => {
                let _ = writeln!(
                    w,
                    "    {:<10} {:<8} {:<10} [{}, {}]",
                    r.path.to_string(),
                    r.operator,
                    name,
                    fmt_num(a.lo),
                    fmt_num(a.hi)
                );
            }
            (None, Some(b)) => {
                let _ = writeln!(
                    w,
                    "    {:<10} {:<8} {:<10} p={} in [{}, {}]",
                    r.path.to_string(),
                    r.operator,
                    name,
                    fmt_num(b.value),
                    fmt_num(b.lo),
                    fmt_num(b.hi)
                );
            }
            _ => {}
        }
    }
    if !trace.flags.is_empty() {
        let _ = writeln!(w, "  flags:");
        for f in &trace.flags {
            let at = f.path.as_ref().map(|p| format!(" at {p}")).unwrap_or_default();
            let _ = writeln!(w, "    {}{at}: {}", f.code, f.message);
        }
    }
    out
}
