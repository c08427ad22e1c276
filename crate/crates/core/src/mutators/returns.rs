//! RV, MC, AP, CC and MV.

use super::{Draft, MutatorId, Site};
use crate::ir::{Constant, Instruction, MethodRef, Relation, TypeTag, INIT};

fn call(ins: &Instruction) -> Option<(&MethodRef, bool)> {
    match ins {
        Instruction::Invoke(m) => Some((m, true)),
        Instruction::InvokeStatic(m) => Some((m, false)),
        _ => None,
    }
}

pub(super) fn return_value(site: &Site<'_>, i: usize, out: &mut Vec<Draft>) {
    let Instruction::Return(t) = &site.method.body[i] else {
        return;
    };
    let ret = |t: &TypeTag| Instruction::Return(t.clone());
    let rv = |code: Vec<Instruction>, desc: String| Draft::new(MutatorId::RV, i..i + 1, code, desc);
    match t {
        TypeTag::Bool => {
            let shown = match i
                .checked_sub(1)
                .map(|p| (&site.method.body[p], site.method.line_map[p]))
            {
                Some((Instruction::Const(Constant::Bool(b)), line)) if line == site.location.line => {
                    b.to_string()
                }
                _ => "e".to_string(),
            };
            out.push(rv(
                vec![
                    Instruction::Const(Constant::Bool(false)),
                    Instruction::Cmp(Relation::Eq),
                    ret(t),
                ],
                format!("replaced boolean return with ({shown} == false ? true : false)"),
            ));
        }
        TypeTag::Int => {
            out.push(rv(
                vec![Instruction::Pop, Instruction::Const(Constant::Int(0)), ret(t)],
                "replaced int return value with 0".into(),
            ));
            out.push(rv(
                vec![
                    Instruction::Const(Constant::Int(1)),
                    Instruction::Arith(crate::ir::ArithOp::Add),
                    ret(t),
                ],
                "replaced int return value e with e + 1".into(),
            ));
            let one = site.label(0);
            out.push(
                rv(
                    vec![
                        Instruction::Const(Constant::Int(0)),
                        Instruction::Cmp(Relation::Eq),
                        Instruction::JmpIf(one.clone()),
                        Instruction::Const(Constant::Int(0)),
                        ret(t),
                        Instruction::Const(Constant::Int(1)),
                        ret(t),
                    ],
                    "replaced int return value e with (e == 0 ? 1 : 0)".into(),
                )
                .with_labels(vec![(one, 5)]),
            );
        }
        TypeTag::Ref(_) => {
            out.push(rv(
                vec![Instruction::Pop, Instruction::Const(Constant::Null), ret(t)],
                "replaced object return value with null".into(),
            ));
            let fail = site.label(0);
            out.push(
                rv(
                    vec![
                        Instruction::Dup,
                        Instruction::Const(Constant::Null),
                        Instruction::Cmp(Relation::Eq),
                        Instruction::JmpIf(fail.clone()),
                        ret(t),
                        Instruction::Fail,
                    ],
                    "replaced object return value e with (e == null ? fail : e)".into(),
                )
                .with_labels(vec![(fail, 5)]),
            );
        }
        TypeTag::Void => {}
    }
}

pub(super) fn method_call(site: &Site<'_>, i: usize, out: &mut Vec<Draft>) {
    let Some((m, virt)) = call(&site.method.body[i]) else {
        return;
    };
    if m.name == INIT {
        return;
    }
    let pops = m.descriptor.params.len() + usize::from(virt);
    let mut code = vec![Instruction::Pop; pops];
    let desc = match Constant::default_for(&m.descriptor.ret) {
        Some(c) => {
            code.push(Instruction::Const(c));
            format!(
                "removed call to {}::{}, and supplied default return value {c}",
                m.class, m.name
            )
        }
        None => format!("removed call to {}::{}", m.class, m.name),
    };
    out.push(Draft::new(MutatorId::MC, i..i + 1, code, desc));
}

pub(super) fn argument_propagation(site: &Site<'_>, i: usize, out: &mut Vec<Draft>) {
    let Some((m, virt)) = call(&site.method.body[i]) else {
        return;
    };
    if m.descriptor.ret == TypeTag::Void {
        return;
    }
    let n = m.descriptor.params.len() + usize::from(virt);
    let stack = site.stack(i);
    if stack.len() < n {
        return;
    }
    let args = &stack[stack.len() - n..];
    for (k, arg) in args.iter().enumerate() {
        if !arg.assignable_to(&m.descriptor.ret, site.program) {
            continue;
        }
        let mut code = vec![Instruction::Pop; n - 1 - k];
        for _ in 0..k {
            code.push(Instruction::Swap);
            code.push(Instruction::Pop);
        }
        let which = if virt && k == 0 {
            "receiver".to_string()
        } else {
            format!("argument {}", k + usize::from(!virt))
        };
        out.push(Draft::new(
            MutatorId::AP,
            i..i + 1,
            code,
            format!("replaced call to {}::{} with {which}", m.class, m.name),
        ));
    }
}

pub(super) fn constructor_call(site: &Site<'_>, i: usize, out: &mut Vec<Draft>) {
    let body = &site.method.body;
    let Instruction::New(c) = &body[i] else {
        return;
    };
    let init_follows = i + 2 < body.len()
        && body[i + 1] == Instruction::Dup
        && matches!(&body[i + 2], Instruction::Invoke(m)
            if m.name == INIT && m.class == *c && m.descriptor.params.is_empty())
        && site.span_ok(i, i + 3);
    let end = if init_follows { i + 3 } else { i + 1 };
    out.push(Draft::new(
        MutatorId::CC,
        i..end,
        vec![Instruction::Const(Constant::Null)],
        format!("removed call to {c} constructor, and supplied null"),
    ));
}

pub(super) fn member_variable(site: &Site<'_>, i: usize, out: &mut Vec<Draft>) {
    let body = &site.method.body;
    let (f, put) = match &body[i] {
        Instruction::PutField(f) | Instruction::PutStatic(f) => (f, body[i].clone()),
        _ => return,
    };
    let Some(c) = Constant::default_for(&f.ty) else {
        return;
    };
    let desc = format!("removed assignment to member variable {}", f.name);
    let pure_push = i > 0
        && matches!(
            body[i - 1],
            Instruction::Const(_) | Instruction::Load(_) | Instruction::GetStatic(_)
        )
        && site.span_ok(i - 1, i + 1);
    if pure_push {
        if body[i - 1] == Instruction::Const(c) {
            return;
        }
        out.push(Draft::new(
            MutatorId::MV,
            i - 1..i + 1,
            vec![Instruction::Const(c), put],
            desc,
        ));
    } else {
        out.push(Draft::new(
            MutatorId::MV,
            i..i + 1,
            vec![Instruction::Pop, Instruction::Const(c), put],
            desc,
        ));
    }
}
