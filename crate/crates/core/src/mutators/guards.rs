//! DG, MG and PC.

use super::{Draft, Fit, MutatorId, Site};
use crate::ir::{Constant, Instruction, Relation, TypeTag, INIT};

fn null_test(rel: Relation, target: String) -> Vec<Instruction> {
    vec![
        Instruction::Dup,
        Instruction::Const(Constant::Null),
        Instruction::Cmp(rel),
        Instruction::JmpIf(target),
    ]
}

pub(super) fn dereference_guard(site: &Site<'_>, i: usize, out: &mut Vec<Draft>) {
    let Instruction::GetField(f) = &site.method.body[i] else {
        return;
    };
    let get = site.method.body[i].clone();
    let esc = site.label(0);
    for (ret, desc) in site.early_returns(i) {
        let mut code = null_test(Relation::Ne, esc.clone());
        code.extend(ret);
        let at = code.len();
        code.push(get.clone());
        out.push(
            Draft::new(
                MutatorId::DG,
                i..i + 1,
                code,
                format!(
                    "guarded dereference of {}: {desc} when the receiver is null",
                    f.name
                ),
            )
            .with_labels(vec![(esc.clone(), at)]),
        );
    }
    let (is_null, done) = (site.label(0), site.label(1));
    for v in site.values(i, &f.ty, Fit::Subtype) {
        let mut code = null_test(Relation::Eq, is_null.clone());
        code.push(get.clone());
        code.push(Instruction::Jmp(done.clone()));
        let at = code.len();
        code.push(Instruction::Pop);
        code.extend(v.push());
        let end = code.len();
        out.push(
            Draft::new(
                MutatorId::DG,
                i..i + 1,
                code,
                format!(
                    "guarded dereference of {}: use {} when the receiver is null",
                    f.name,
                    v.describe()
                ),
            )
            .with_labels(vec![(is_null.clone(), at), (done.clone(), end)]),
        );
    }
}

pub(super) fn method_guard(site: &Site<'_>, i: usize, out: &mut Vec<Draft>) {
    let Instruction::Invoke(m) = &site.method.body[i] else {
        return;
    };
    if m.name == INIT {
        return;
    }
    let invoke = site.method.body[i].clone();
    let params = &m.descriptor.params;
    let base = site.temp_base();
    let spill: Vec<Instruction> = (0..params.len())
        .rev()
        .map(|k| Instruction::Store(base + k))
        .collect();
    let reload: Vec<Instruction> = (0..params.len()).map(|k| Instruction::Load(base + k)).collect();
    let temps = params.clone();
    let draft = |code: Vec<Instruction>, labels: Vec<(String, usize)>, desc: String| {
        Draft::new(MutatorId::MG, i..i + 1, code, desc)
            .with_labels(labels)
            .with_temps(temps.clone())
    };

    let esc = site.label(0);
    for (ret, desc) in site.early_returns(i) {
        let mut code = spill.clone();
        code.extend(null_test(Relation::Ne, esc.clone()));
        code.extend(ret);
        let at = code.len();
        code.extend(reload.iter().cloned());
        code.push(invoke.clone());
        out.push(draft(
            code,
            vec![(esc.clone(), at)],
            format!(
                "guarded call to {}::{}: {desc} when the receiver is null",
                m.class, m.name
            ),
        ));
    }

    let (is_null, done) = (site.label(0), site.label(1));
    let in_place = |push: Vec<Instruction>| {
        let mut code = spill.clone();
        code.extend(null_test(Relation::Eq, is_null.clone()));
        code.extend(reload.iter().cloned());
        code.push(invoke.clone());
        code.push(Instruction::Jmp(done.clone()));
        let at = code.len();
        code.push(Instruction::Pop);
        code.extend(push);
        let end = code.len();
        (code, vec![(is_null.clone(), at), (done.clone(), end)])
    };
    if m.descriptor.ret == TypeTag::Void {
        let (code, labels) = in_place(Vec::new());
        out.push(draft(
            code,
            labels,
            format!(
                "guarded call to {}::{}: skip it when the receiver is null",
                m.class, m.name
            ),
        ));
    } else {
        for v in site.values(i, &m.descriptor.ret, Fit::Subtype) {
            let (code, labels) = in_place(v.push());
            out.push(draft(
                code,
                labels,
                format!(
                    "guarded call to {}::{}: use {} when the receiver is null",
                    m.class,
                    m.name,
                    v.describe()
                ),
            ));
        }
    }
}

pub(super) fn pre_post_condition(site: &Site<'_>, i: usize, out: &mut Vec<Draft>) {
    let m = site.method;
    if i == 0 {
        let offset = usize::from(!m.is_static);
        let guarded: Vec<(usize, &str)> = m
            .descriptor
            .params
            .iter()
            .enumerate()
            .filter(|(_, t)| t.is_ref())
            .map(|(k, _)| {
                let slot = k + offset;
                (slot, m.locals.get(slot).map_or("?", |l| l.name.as_str()))
            })
            .collect();
        if !guarded.is_empty() {
            let (bail, body) = (site.label(0), site.label(1));
            let mut code = Vec::new();
            for &(slot, _) in &guarded {
                code.push(Instruction::Load(slot));
                code.push(Instruction::Const(Constant::Null));
                code.push(Instruction::Cmp(Relation::Eq));
                code.push(Instruction::JmpIf(bail.clone()));
            }
            code.push(Instruction::Jmp(body.clone()));
            let at = code.len();
            if let Some(c) = Constant::default_for(site.ret()) {
                code.push(Instruction::Const(c));
            }
            code.push(Instruction::Return(site.ret().clone()));
            let end = code.len();
            let names: Vec<&str> = guarded.iter().map(|&(_, n)| n).collect();
            let what = match Constant::default_for(site.ret()) {
                Some(c) => format!("return {c}"),
                None => "return".into(),
            };
            out.push(
                Draft::new(
                    MutatorId::PC,
                    0..0,
                    code,
                    format!(
                        "added precondition: {what} when any of {} is null",
                        names.join(", ")
                    ),
                )
                .with_labels(vec![(bail, at), (body, end)]),
            );
        }
    }
    let (callee, call) = match &m.body[i] {
        Instruction::Invoke(c) | Instruction::InvokeStatic(c) => (c, m.body[i].clone()),
        _ => return,
    };
    if !callee.descriptor.ret.is_ref() {
        return;
    }
    let esc = site.label(0);
    for (ret, desc) in site.early_returns(i) {
        let mut code = vec![call.clone()];
        code.extend(null_test(Relation::Ne, esc.clone()));
        code.extend(ret);
        let at = code.len();
        out.push(
            Draft::new(
                MutatorId::PC,
                i..i + 1,
                code,
                format!(
                    "added postcondition on {}::{}: {desc} when the result is null",
                    callee.class, callee.name
                ),
            )
            .with_labels(vec![(esc.clone(), at)]),
        );
    }
}
