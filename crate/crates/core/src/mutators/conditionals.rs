//! CO, SW and CB.

use std::collections::BTreeSet;

use super::{Draft, MutatorId, Site};
use crate::ir::{Instruction, Relation};
use crate::verify::VType;

fn check_kind(prev: Option<&Instruction>) -> &'static str {
    match prev {
        Some(Instruction::Cmp(Relation::Ne)) => "inequality check",
        Some(Instruction::Cmp(Relation::Eq)) | None => "equality check",
        Some(Instruction::Cmp(_)) => "comparison check",
        Some(_) => "equality check",
    }
}

pub(super) fn conditional(site: &Site<'_>, i: usize, out: &mut Vec<Draft>) {
    let body = &site.method.body;
    match &body[i] {
        Instruction::JmpIf(l) => {
            let kind = check_kind(i.checked_sub(1).map(|p| &body[p]));
            let co = |code, desc: String| Draft::new(MutatorId::CO, i..i + 1, code, desc);
            out.push(co(
                vec![Instruction::Pop, Instruction::Jmp(l.clone())],
                format!("removed conditional - replaced {kind} with true"),
            ));
            out.push(co(
                vec![Instruction::Pop],
                format!("removed conditional - replaced {kind} with false"),
            ));
            out.push(co(
                vec![Instruction::Not, Instruction::JmpIf(l.clone())],
                "negated conditional".into(),
            ));
        }
        Instruction::Cmp(r) => {
            let stack = site.stack(i);
            let ints = stack.len() >= 2 && stack[stack.len() - 2..] == [VType::Int, VType::Int];
            for other in Relation::ALL {
                if other == *r {
                    continue;
                }
                let allowed = ints
                    || matches!(
                        (r, other),
                        (Relation::Eq, Relation::Ne) | (Relation::Ne, Relation::Eq)
                    );
                if allowed {
                    out.push(Draft::new(
                        MutatorId::CO,
                        i..i + 1,
                        vec![Instruction::Cmp(other)],
                        format!("replaced comparison {} with {}", r.symbol(), other.symbol()),
                    ));
                }
            }
        }
        _ => {}
    }
}

pub(super) fn switch(site: &Site<'_>, i: usize, out: &mut Vec<Draft>) {
    let Instruction::Switch { cases, default } = &site.method.body[i] else {
        return;
    };
    let Some((_, first)) = cases.first() else {
        return;
    };
    let original = &site.method.body[i];
    let mut emitted: Vec<Instruction> = Vec::new();
    let mut emit = |ins: Instruction, desc: String| {
        if &ins != original && !emitted.contains(&ins) {
            emitted.push(ins.clone());
            out.push(Draft::new(MutatorId::SW, i..i + 1, vec![ins], desc));
        }
    };
    emit(
        Instruction::Switch {
            cases: cases.iter().map(|(k, _)| (*k, default.clone())).collect(),
            default: first.clone(),
        },
        format!(
            "replaced every case target with the default target, and the default target with case {}",
            cases[0].0
        ),
    );
    for (j, (k, l)) in cases.iter().enumerate() {
        if l == default {
            continue;
        }
        let mut redirected = cases.clone();
        redirected[j].1 = default.clone();
        emit(
            Instruction::Switch {
                cases: redirected,
                default: default.clone(),
            },
            format!("replaced case {k} target with the default target"),
        );
    }
}

pub(super) fn case_breaker(site: &Site<'_>, j: usize, out: &mut Vec<Draft>) {
    let m = site.method;
    let last = &m.body[j];
    if matches!(last, Instruction::Return(_) | Instruction::Fail) {
        return;
    }
    let mut done = BTreeSet::new();
    for (w, ins) in m.body.iter().enumerate() {
        let Instruction::Switch { cases, default } = ins else {
            continue;
        };
        if !site.frames.is_reachable(w) {
            continue;
        }
        let mut bounds: BTreeSet<usize> = cases.iter().filter_map(|(_, l)| m.label_index(l)).collect();
        bounds.extend(m.label_index(default));
        for (k, l) in cases {
            let Some(start) = m.label_index(l) else {
                continue;
            };
            let Some(&next) = bounds.range(start + 1..).next() else {
                continue;
            };
            if next != j + 1 || !done.insert(start) {
                continue;
            }
            for (ret, desc) in site.early_returns(j) {
                let code = if matches!(last, Instruction::Jmp(_)) {
                    ret
                } else {
                    std::iter::once(last.clone()).chain(ret).collect()
                };
                out.push(Draft::new(
                    MutatorId::CB,
                    j..j + 1,
                    code,
                    format!("inserted {desc} at the end of case {k}"),
                ));
            }
        }
    }
}
