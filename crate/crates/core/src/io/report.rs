use std::collections::BTreeMap;
use std::fmt::Write;

use crate::eqcheck::{CheckReport, CheckStatus};
use crate::expr::Sort;
use crate::ts::split_step;
use crate::value::Value;

/// Line-oriented text of one report. Counterexample values are grouped by
/// time step (`name@t` is listed as `name` on the `step t` line); function
/// entries are listed as `uf name (args...) result`. No timings are
/// included, so reports are reproducible byte for byte.
///
/// ```text
/// obligation MRET:refine
/// status counterexample
/// engine solver
/// queries 1
/// detail MRET commits at step 5: ...
/// step 0 (impl:pc (bv 4 3)) (spec:mie (bv 1 0)) ...
/// end
/// ```
pub fn serialize_report(r: &CheckReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "obligation {}", r.id);
    let _ = writeln!(out, "status {}", r.status.name());
    let _ = writeln!(out, "engine {}", r.engine);
    let _ = writeln!(out, "queries {}", r.queries);
    match &r.status {
        CheckStatus::Proved => {}
        CheckStatus::Unknown(why) => {
            let _ = writeln!(out, "reason {}", one_line(why));
        }
        CheckStatus::Counterexample(c) => {
            let _ = writeln!(out, "detail {}", one_line(&c.detail));
            let mut plain: Vec<String> = Vec::new();
            let mut steps: BTreeMap<usize, Vec<String>> = BTreeMap::new();
            for (v, x) in c.values.iter() {
                match split_step(v.name()) {
                    Some((base, t)) => steps.entry(t).or_default().push(format!("({base} {x})")),
                    None => plain.push(format!("({} {x})", v.name())),
                }
            }
            if !plain.is_empty() {
                let _ = writeln!(out, "values {}", plain.join(" "));
            }
            for (t, vals) in steps {
                let _ = writeln!(out, "step {t} {}", vals.join(" "));
            }
            let mut ufs: Vec<String> = c
                .ufs
                .entries()
                .map(|(f, args, res)| {
                    let a: Vec<String> = f.args().iter().zip(args).map(|(s, x)| Value::from_bits(*s, *x).to_string()).collect();
                    let ret = if f.ret() == Sort::Bool { Value::Bool(res & 1 == 1) } else { Value::from_bits(f.ret(), res) };
                    format!("uf {} ({}) {ret}", f.name(), a.join(" "))
                })
                .collect();
            ufs.sort();
            for u in ufs {
                let _ = writeln!(out, "{u}");
            }
        }
    }
    out.push_str("end\n");
    out
}

pub fn serialize_reports(rs: &[CheckReport]) -> String {
    rs.iter().map(serialize_report).collect()
}

fn one_line(s: &str) -> String {
    s.replace('\n', " ")
}
