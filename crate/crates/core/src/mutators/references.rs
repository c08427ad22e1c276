//! FN, MN, AL, LV and AM.

use super::edit::{adapt, EditOp};
use super::{Draft, Fit, MutatorId, Site, Source};
use crate::ir::{ClassDef, Constant, FieldRef, Instruction, MethodDef, MethodRef, TypeTag, Visibility, INIT};

fn field_of(ins: &Instruction) -> Option<&FieldRef> {
    match ins {
        Instruction::GetField(f)
        | Instruction::PutField(f)
        | Instruction::GetStatic(f)
        | Instruction::PutStatic(f) => Some(f),
        _ => None,
    }
}

fn with_field(ins: &Instruction, f: FieldRef) -> Instruction {
    match ins {
        Instruction::GetField(_) => Instruction::GetField(f),
        Instruction::PutField(_) => Instruction::PutField(f),
        Instruction::GetStatic(_) => Instruction::GetStatic(f),
        _ => Instruction::PutStatic(f),
    }
}

fn call_of(ins: &Instruction) -> Option<&MethodRef> {
    match ins {
        Instruction::Invoke(m) | Instruction::InvokeStatic(m) => Some(m),
        _ => None,
    }
}

fn with_method(ins: &Instruction, m: MethodRef) -> Instruction {
    match ins {
        Instruction::Invoke(_) => Instruction::Invoke(m),
        _ => Instruction::InvokeStatic(m),
    }
}

fn invoke(is_static: bool, m: MethodRef) -> Instruction {
    if is_static {
        Instruction::InvokeStatic(m)
    } else {
        Instruction::Invoke(m)
    }
}

/// Methods of `owner` a patch may call, sorted by name then descriptor.
fn targets<'a>(
    site: &Site<'_>,
    owner: &'a ClassDef,
    keep: impl Fn(&MethodDef) -> bool,
) -> Vec<&'a MethodDef> {
    let mut out: Vec<&MethodDef> = owner
        .methods
        .iter()
        .filter(|d| d.name != INIT && site.callable(&d.key(&owner.name)) && keep(d))
        .collect();
    out.sort_by(|a, b| (&a.name, a.descriptor.to_string()).cmp(&(&b.name, b.descriptor.to_string())));
    out
}

pub(super) fn field_name(site: &Site<'_>, i: usize, out: &mut Vec<Draft>) {
    let ins = &site.method.body[i];
    let Some(f) = field_of(ins) else {
        return;
    };
    let Some((owner, def)) = site.program.resolve_field(&f.class, &f.name) else {
        return;
    };
    let mut others: Vec<_> = owner
        .fields
        .iter()
        .filter(|g| {
            g.name != def.name
                && g.ty == def.ty
                && g.is_static == def.is_static
                && (g.visibility == Visibility::Public || owner.name == site.class.name)
        })
        .collect();
    others.sort_by(|a, b| a.name.cmp(&b.name));
    for g in others {
        let replacement = with_field(
            ins,
            FieldRef {
                class: owner.name.clone(),
                name: g.name.clone(),
                ty: g.ty.clone(),
            },
        );
        out.push(Draft::new(
            MutatorId::FN,
            i..i + 1,
            vec![replacement],
            format!("replaced field {} with {}", f.name, g.name),
        ));
    }
}

pub(super) fn method_name(site: &Site<'_>, i: usize, out: &mut Vec<Draft>) {
    let ins = &site.method.body[i];
    let Some(m) = call_of(ins) else {
        return;
    };
    if m.name == INIT {
        return;
    }
    let Some((owner, def)) = site.program.resolve_method(&m.class, &m.name, &m.descriptor) else {
        return;
    };
    for cand in targets(site, owner, |d| {
        d.name != m.name && d.descriptor == m.descriptor && d.is_static == def.is_static
    }) {
        out.push(Draft::new(
            MutatorId::MN,
            i..i + 1,
            vec![with_method(ins, cand.key(&owner.name))],
            format!(
                "replaced call to {}::{} with {}::{}",
                m.class, m.name, owner.name, cand.name
            ),
        ));
    }
}

pub(super) fn argument_list(site: &Site<'_>, i: usize, out: &mut Vec<Draft>) {
    let ins = &site.method.body[i];
    let Some(m) = call_of(ins) else {
        return;
    };
    if m.name == INIT {
        return;
    }
    let Some((owner, def)) = site.program.resolve_method(&m.class, &m.name, &m.descriptor) else {
        return;
    };
    let old = &m.descriptor.params;
    let base = site.temp_base();
    for cand in targets(site, owner, |d| {
        d.name == m.name
            && d.is_static == def.is_static
            && &d.descriptor.params != old
            && site.subtype(&d.descriptor.ret, &m.descriptor.ret)
    }) {
        let new = &cand.descriptor.params;
        let (_, ops) = adapt(old, new, |o, n| site.subtype(o, n));
        let mut code: Vec<Instruction> = (0..old.len())
            .rev()
            .map(|k| Instruction::Store(base + k))
            .collect();
        for op in ops {
            match op {
                EditOp::Copy { from } => code.push(Instruction::Load(base + from)),
                EditOp::Delete { .. } => {}
                EditOp::Insert { param } => code.extend(insert_value(site, i, &new[param]).push()),
            }
        }
        code.push(with_method(ins, cand.key(&owner.name)));
        out.push(
            Draft::new(
                MutatorId::AL,
                i..i + 1,
                code,
                format!(
                    "changed argument list of call to {}::{} from {} to {}",
                    m.class,
                    m.name,
                    param_list(old),
                    param_list(new)
                ),
            )
            .with_temps(old.clone()),
        );
    }
}

fn param_list(ps: &[TypeTag]) -> String {
    let names: Vec<String> = ps.iter().map(ToString::to_string).collect();
    format!("({})", names.join(","))
}

/// Value for an inserted argument: a visible local, else a field, else the
/// default.
fn insert_value(site: &Site<'_>, i: usize, ty: &TypeTag) -> Source {
    if let Some(l) = site.locals_fitting(i, ty, Fit::Subtype).first() {
        return Source::Local {
            slot: l.index,
            name: l.name.clone(),
        };
    }
    if let Some(f) = site.fields_fitting(ty, Fit::Subtype).into_iter().next() {
        return f;
    }
    Source::Default(Constant::default_for(ty).unwrap_or(Constant::Null))
}

pub(super) fn local_variable(site: &Site<'_>, i: usize, out: &mut Vec<Draft>) {
    let m = site.method;
    let (slot, store) = match m.body[i] {
        Instruction::Load(s) => (s, false),
        Instruction::Store(s) => (s, true),
        _ => return,
    };
    let Some(current) = m.locals.get(slot) else {
        return;
    };
    for l in site.locals_fitting(i, &current.ty, Fit::Identical) {
        if l.index == slot || (store && !m.is_static && l.index == 0) {
            continue;
        }
        let ins = if store {
            Instruction::Store(l.index)
        } else {
            Instruction::Load(l.index)
        };
        out.push(Draft::new(
            MutatorId::LV,
            i..i + 1,
            vec![ins],
            format!("replaced local {} with {}", current.name, l.name),
        ));
    }
    for f in site.fields_fitting(&current.ty, Fit::Identical) {
        let code = match (&f, store) {
            (_, false) => f.push(),
            (
                Source::Field {
                    field,
                    is_static: true,
                },
                true,
            ) => vec![Instruction::PutStatic(field.clone())],
            (Source::Field { field, .. }, true) => vec![
                Instruction::Load(0),
                Instruction::Swap,
                Instruction::PutField(field.clone()),
            ],
            _ => continue,
        };
        out.push(Draft::new(
            MutatorId::LV,
            i..i + 1,
            code,
            format!("replaced local {} with field {}", current.name, f.describe()),
        ));
    }
}

pub(super) fn accessor(site: &Site<'_>, i: usize, out: &mut Vec<Draft>) {
    let ins = &site.method.body[i];
    let (f, read) = match ins {
        Instruction::GetField(f) | Instruction::GetStatic(f) => (f, true),
        Instruction::PutField(f) | Instruction::PutStatic(f) => (f, false),
        _ => return,
    };
    let Some((owner, def)) = site.program.resolve_field(&f.class, &f.name) else {
        return;
    };
    let is_static = def.is_static;
    if read {
        for g in targets(site, owner, |d| {
            d.is_static == is_static
                && d.descriptor.params.is_empty()
                && d.descriptor.ret != TypeTag::Void
                && site.subtype(&d.descriptor.ret, &f.ty)
        }) {
            out.push(Draft::new(
                MutatorId::AM,
                i..i + 1,
                vec![invoke(is_static, g.key(&owner.name))],
                format!(
                    "replaced read of field {} with call to {}::{}",
                    f.name, owner.name, g.name
                ),
            ));
        }
        for l in site.locals_fitting(i, &f.ty, Fit::Subtype) {
            let mut code = if is_static { vec![] } else { vec![Instruction::Pop] };
            code.push(Instruction::Load(l.index));
            out.push(Draft::new(
                MutatorId::AM,
                i..i + 1,
                code,
                format!("replaced read of field {} with local {}", f.name, l.name),
            ));
        }
    } else {
        for s in targets(site, owner, |d| {
            d.is_static == is_static
                && d.descriptor.params.len() == 1
                && site.subtype(&f.ty, &d.descriptor.params[0])
        }) {
            let mut code = vec![invoke(is_static, s.key(&owner.name))];
            if s.descriptor.ret != TypeTag::Void {
                code.push(Instruction::Pop);
            }
            out.push(Draft::new(
                MutatorId::AM,
                i..i + 1,
                code,
                format!(
                    "replaced write to field {} with call to {}::{}",
                    f.name, owner.name, s.name
                ),
            ));
        }
    }
}
