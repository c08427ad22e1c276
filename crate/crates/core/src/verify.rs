//! Static stack-type checker.
//!
//! Every method body is abstractly interpreted over operand-stack types until
//! a fixpoint is reached at each control-flow join. The per-instruction entry
//! frames are kept so mutators can ask what is on the stack at a site.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;

use thiserror::Error;

use crate::ir::{
    ClassDef, Constant, FieldRef, Instruction, Location, MethodDef, MethodRef, Program, Relation, Scope,
    TypeTag, Visibility, INIT, OBJECT,
};

/// Static type of an operand-stack entry. `Null` is the type of the null
/// constant and is a subtype of every reference type.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum VType {
    Int,
    Bool,
    Ref(String),
    Null,
}

impl VType {
    pub fn of(t: &TypeTag) -> Option<VType> {
        match t {
            TypeTag::Int => Some(VType::Int),
            TypeTag::Bool => Some(VType::Bool),
            TypeTag::Ref(c) => Some(VType::Ref(c.clone())),
            TypeTag::Void => None,
        }
    }

    pub fn is_reference(&self) -> bool {
        matches!(self, VType::Ref(_) | VType::Null)
    }

    /// Whether a value of this static type may be stored where `t` is expected.
    pub fn assignable_to(&self, t: &TypeTag, program: &Program) -> bool {
        match (self, t) {
            (VType::Int, TypeTag::Int) | (VType::Bool, TypeTag::Bool) => true,
            (VType::Null, TypeTag::Ref(_)) => true,
            (VType::Ref(a), TypeTag::Ref(b)) => program.is_subclass(a, b),
            _ => false,
        }
    }
}

impl fmt::Display for VType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VType::Int => f.write_str("int"),
            VType::Bool => f.write_str("bool"),
            VType::Ref(c) => f.write_str(c),
            VType::Null => f.write_str("null"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct VerifyError {
    /// Class or method the violation was found in.
    pub scope: String,
    pub location: Option<Box<Location>>,
    pub reason: String,
}

impl fmt::Display for VerifyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.location {
            Some(loc) => write!(f, "{loc}: {}", self.reason),
            None => write!(f, "{}: {}", self.scope, self.reason),
        }
    }
}

/// Operand-stack types on entry to each instruction; `None` for
/// unreachable instructions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MethodFrames {
    pub entry: Vec<Option<Vec<VType>>>,
}

impl MethodFrames {
    pub fn stack_at(&self, index: usize) -> Option<&[VType]> {
        self.entry.get(index)?.as_deref()
    }

    pub fn is_reachable(&self, index: usize) -> bool {
        matches!(self.entry.get(index), Some(Some(_)))
    }
}

/// Checks a whole program: class table, hierarchy, members and every body.
pub fn verify(program: &Program) -> Result<(), VerifyError> {
    check_classes(program)?;
    for class in &program.classes {
        for method in &class.methods {
            verify_method(program, class, method)?;
        }
    }
    Ok(())
}

fn class_error(class: &str, reason: impl Into<String>) -> VerifyError {
    VerifyError {
        scope: format!("class {class}"),
        location: None,
        reason: reason.into(),
    }
}

fn check_classes(program: &Program) -> Result<(), VerifyError> {
    let mut names = HashSet::new();
    for class in &program.classes {
        if class.name == OBJECT {
            return Err(class_error(&class.name, "redefines the root class"));
        }
        if !names.insert(class.name.as_str()) {
            return Err(class_error(&class.name, "duplicate class definition"));
        }
    }
    for class in &program.classes {
        let sup = class.superclass();
        if !program.has_class(sup) {
            return Err(class_error(&class.name, format!("unresolved superclass `{sup}`")));
        }
        if program.ancestors(&class.name).last().map(String::as_str) != Some(OBJECT) {
            return Err(class_error(&class.name, "cyclic inheritance"));
        }
        let mut fields = HashSet::new();
        for f in &class.fields {
            if !fields.insert(f.name.as_str()) {
                return Err(class_error(&class.name, format!("duplicate field `{}`", f.name)));
            }
            if f.ty == TypeTag::Void {
                return Err(class_error(
                    &class.name,
                    format!("field `{}` has type void", f.name),
                ));
            }
            program
                .check_type(&f.ty)
                .map_err(|e| class_error(&class.name, e.to_string()))?;
        }
        let mut methods = HashSet::new();
        for m in &class.methods {
            if !methods.insert((m.name.as_str(), &m.descriptor)) {
                return Err(class_error(
                    &class.name,
                    format!("duplicate method `{}{}`", m.name, m.descriptor),
                ));
            }
        }
    }
    Ok(())
}

struct Checker<'a> {
    program: &'a Program,
    class: &'a ClassDef,
    method: &'a MethodDef,
    labels: HashMap<&'a str, usize>,
}

/// Type-checks one method body and returns its entry frames.
pub fn verify_method(
    program: &Program,
    class: &ClassDef,
    method: &MethodDef,
) -> Result<MethodFrames, VerifyError> {
    let checker = Checker {
        program,
        class,
        method,
        labels: method.labels.iter().map(|l| (l.name.as_str(), l.index)).collect(),
    };
    checker.check_shape()?;
    checker.check_flow()
}

impl<'a> Checker<'a> {
    fn err(&self, index: Option<usize>, reason: impl Into<String>) -> VerifyError {
        let location = index.and_then(|i| self.method.line_map.get(i)).map(|&line| {
            Box::new(Location {
                class: self.class.name.clone(),
                method: self.method.name.clone(),
                descriptor: self.method.descriptor.clone(),
                line,
            })
        });
        VerifyError {
            scope: format!(
                "{}.{}{}",
                self.class.name, self.method.name, self.method.descriptor
            ),
            location,
            reason: reason.into(),
        }
    }

    fn check_type(&self, index: Option<usize>, t: &TypeTag) -> Result<(), VerifyError> {
        self.program
            .check_type(t)
            .map_err(|e| self.err(index, e.to_string()))
    }

    fn label(&self, index: usize, name: &str) -> Result<usize, VerifyError> {
        self.labels
            .get(name)
            .copied()
            .ok_or_else(|| self.err(Some(index), format!("undefined label `{name}`")))
    }

    fn check_shape(&self) -> Result<(), VerifyError> {
        let m = self.method;
        if m.body.is_empty() {
            return Err(self.err(None, "empty method body"));
        }
        if m.line_map.len() != m.body.len() {
            return Err(self.err(None, "line map does not cover the body"));
        }
        if let Some(i) = m.line_map.iter().position(|&l| l == 0) {
            return Err(self.err(None, format!("instruction {i} has line number 0")));
        }
        if m.name == INIT && (m.is_static || m.descriptor.ret != TypeTag::Void) {
            return Err(self.err(None, "initializer must be an instance method returning void"));
        }
        for p in &m.descriptor.params {
            if *p == TypeTag::Void {
                return Err(self.err(None, "void parameter"));
            }
            self.check_type(None, p)?;
        }
        self.check_type(None, &m.descriptor.ret)?;

        let mut seen = HashSet::new();
        for l in &m.labels {
            if !seen.insert(l.name.as_str()) {
                return Err(self.err(None, format!("duplicate label `{}`", l.name)));
            }
            if l.index > m.body.len() {
                return Err(self.err(None, format!("label `{}` out of range", l.name)));
            }
        }
        if m.labels.windows(2).any(|w| w[0].index > w[1].index) {
            return Err(self.err(None, "label table is not sorted"));
        }

        for (pos, slot) in m.locals.iter().enumerate() {
            if slot.index != pos {
                return Err(self.err(None, format!("local slots not dense at `{}`", slot.name)));
            }
            if slot.ty == TypeTag::Void {
                return Err(self.err(None, format!("local `{}` has type void", slot.name)));
            }
            self.check_type(None, &slot.ty)?;
            if let Scope::Labels { start, end } = &slot.scope {
                let (s, e) = match (self.labels.get(start.as_str()), self.labels.get(end.as_str())) {
                    (Some(&s), Some(&e)) => (s, e),
                    _ => {
                        return Err(self.err(None, format!("scope label of local `{}` undefined", slot.name)))
                    }
                };
                if s > e {
                    return Err(self.err(None, format!("inverted scope for local `{}`", slot.name)));
                }
            }
        }
        let mut expected = Vec::new();
        if !m.is_static {
            expected.push(TypeTag::Ref(self.class.name.clone()));
        }
        expected.extend(m.descriptor.params.iter().cloned());
        if m.locals.len() < expected.len() {
            return Err(self.err(None, "missing local declarations for parameters"));
        }
        for (slot, ty) in m.locals.iter().zip(&expected) {
            if &slot.ty != ty {
                return Err(self.err(
                    None,
                    format!(
                        "parameter slot {} declared {} but descriptor says {}",
                        slot.index, slot.ty, ty
                    ),
                ));
            }
        }
        for (i, ins) in m.body.iter().enumerate() {
            for target in ins.jump_targets() {
                self.label(i, target)?;
            }
        }
        Ok(())
    }

    fn check_flow(&self) -> Result<MethodFrames, VerifyError> {
        let body = &self.method.body;
        let mut entry: Vec<Option<Vec<VType>>> = vec![None; body.len()];
        entry[0] = Some(Vec::new());
        let mut work = VecDeque::from([0usize]);
        let mut queued = vec![false; body.len()];
        queued[0] = true;

        while let Some(i) = work.pop_front() {
            queued[i] = false;
            let mut stack = entry[i].clone().expect("queued instructions have frames");
            let ins = &body[i];
            self.step(i, ins, &mut stack)?;
            let mut succ = Vec::new();
            for t in ins.jump_targets() {
                succ.push(self.label(i, t)?);
            }
            if !ins.is_terminator() {
                succ.push(i + 1);
            }
            for s in succ {
                if s >= body.len() {
                    return Err(self.err(Some(i), "control falls off the end of the method"));
                }
                let merged = match &entry[s] {
                    None => Some(stack.clone()),
                    Some(old) => {
                        let joined = self.join(old, &stack).ok_or_else(|| {
                            self.err(
                                Some(s),
                                format!(
                                    "inconsistent stack at join: [{}] vs [{}]",
                                    fmt_stack(old),
                                    fmt_stack(&stack)
                                ),
                            )
                        })?;
                        (&joined != old).then_some(joined)
                    }
                };
                if let Some(frame) = merged {
                    entry[s] = Some(frame);
                    if !queued[s] {
                        queued[s] = true;
                        work.push_back(s);
                    }
                }
            }
        }
        Ok(MethodFrames { entry })
    }

    fn join(&self, a: &[VType], b: &[VType]) -> Option<Vec<VType>> {
        if a.len() != b.len() {
            return None;
        }
        a.iter()
            .zip(b)
            .map(|(x, y)| match (x, y) {
                _ if x == y => Some(x.clone()),
                (VType::Null, VType::Ref(c)) | (VType::Ref(c), VType::Null) => Some(VType::Ref(c.clone())),
                (VType::Ref(p), VType::Ref(q)) => Some(VType::Ref(self.program.common_superclass(p, q))),
                _ => None,
            })
            .collect()
    }

    fn pop(&self, i: usize, stack: &mut Vec<VType>) -> Result<VType, VerifyError> {
        stack
            .pop()
            .ok_or_else(|| self.err(Some(i), "operand stack underflow"))
    }

    fn pop_expect(
        &self,
        i: usize,
        stack: &mut Vec<VType>,
        t: &TypeTag,
        what: &str,
    ) -> Result<(), VerifyError> {
        let v = self.pop(i, stack)?;
        if v.assignable_to(t, self.program) {
            Ok(())
        } else {
            Err(self.err(Some(i), format!("{what}: expected {t}, found {v}")))
        }
    }

    fn local(&self, i: usize, slot: usize) -> Result<&TypeTag, VerifyError> {
        self.method
            .locals
            .get(slot)
            .map(|l| &l.ty)
            .ok_or_else(|| self.err(Some(i), format!("undeclared local slot {slot}")))
    }

    fn field(&self, i: usize, f: &FieldRef, want_static: bool) -> Result<(), VerifyError> {
        if !self.program.has_class(&f.class) {
            return Err(self.err(Some(i), format!("unresolved class `{}`", f.class)));
        }
        let (owner, def) = self
            .program
            .resolve_field(&f.class, &f.name)
            .ok_or_else(|| self.err(Some(i), format!("unresolved field `{}.{}`", f.class, f.name)))?;
        if def.is_static != want_static {
            return Err(self.err(Some(i), format!("field `{}` static-ness mismatch", f.name)));
        }
        if def.ty != f.ty {
            return Err(self.err(
                Some(i),
                format!("field `{}` has type {}, referenced as {}", f.name, def.ty, f.ty),
            ));
        }
        if def.visibility == Visibility::Private && owner.name != self.class.name {
            return Err(self.err(
                Some(i),
                format!("field `{}` is private to {}", f.name, owner.name),
            ));
        }
        Ok(())
    }

    fn invoke(
        &self,
        i: usize,
        m: &MethodRef,
        want_static: bool,
        stack: &mut Vec<VType>,
    ) -> Result<(), VerifyError> {
        let (_, def) = self
            .program
            .resolve_method(&m.class, &m.name, &m.descriptor)
            .ok_or_else(|| self.err(Some(i), format!("unresolved method `{m}`")))?;
        if def.is_static != want_static {
            return Err(self.err(Some(i), format!("method `{m}` static-ness mismatch")));
        }
        for p in m.descriptor.params.iter().rev() {
            self.pop_expect(i, stack, p, "argument")?;
        }
        if !want_static {
            self.pop_expect(i, stack, &TypeTag::Ref(m.class.clone()), "receiver")?;
        }
        if let Some(v) = VType::of(&m.descriptor.ret) {
            stack.push(v);
        }
        Ok(())
    }

    fn step(&self, i: usize, ins: &Instruction, stack: &mut Vec<VType>) -> Result<(), VerifyError> {
        use Instruction as I;
        match ins {
            I::Const(c) => stack.push(match c {
                Constant::Int(_) => VType::Int,
                Constant::Bool(_) => VType::Bool,
                Constant::Null => VType::Null,
            }),
            I::Load(s) => {
                let t = self.local(i, *s)?;
                stack.push(VType::of(t).expect("locals are never void"));
            }
            I::Store(s) => {
                let t = self.local(i, *s)?.clone();
                self.pop_expect(i, stack, &t, "store")?;
            }
            I::Inc(s, _) => {
                if self.local(i, *s)? != &TypeTag::Int {
                    return Err(self.err(Some(i), format!("inc on non-int local {s}")));
                }
            }
            I::Arith(op) => {
                self.pop_expect(i, stack, &TypeTag::Int, op.mnemonic())?;
                self.pop_expect(i, stack, &TypeTag::Int, op.mnemonic())?;
                stack.push(VType::Int);
            }
            I::Neg => {
                self.pop_expect(i, stack, &TypeTag::Int, "neg")?;
                stack.push(VType::Int);
            }
            I::Not => {
                self.pop_expect(i, stack, &TypeTag::Bool, "not")?;
                stack.push(VType::Bool);
            }
            I::Cmp(rel) => {
                let b = self.pop(i, stack)?;
                let a = self.pop(i, stack)?;
                let ok = match (&a, &b) {
                    (VType::Int, VType::Int) => true,
                    (VType::Bool, VType::Bool) => matches!(rel, Relation::Eq | Relation::Ne),
                    _ if a.is_reference() && b.is_reference() => {
                        matches!(rel, Relation::Eq | Relation::Ne)
                    }
                    _ => false,
                };
                if !ok {
                    return Err(self.err(Some(i), format!("cmp {} on operands {a} and {b}", rel.mnemonic())));
                }
                stack.push(VType::Bool);
            }
            I::Jmp(_) => {}
            I::JmpIf(_) => self.pop_expect(i, stack, &TypeTag::Bool, "jmpif")?,
            I::Switch { .. } => self.pop_expect(i, stack, &TypeTag::Int, "switch")?,
            I::New(c) => {
                if !self.program.has_class(c) {
                    return Err(self.err(Some(i), format!("unresolved class `{c}`")));
                }
                stack.push(VType::Ref(c.clone()));
            }
            I::GetField(f) => {
                self.field(i, f, false)?;
                self.pop_expect(i, stack, &TypeTag::Ref(f.class.clone()), "getfield receiver")?;
                stack.push(VType::of(&f.ty).expect("fields are never void"));
            }
            I::PutField(f) => {
                self.field(i, f, false)?;
                self.pop_expect(i, stack, &f.ty, "putfield value")?;
                self.pop_expect(i, stack, &TypeTag::Ref(f.class.clone()), "putfield receiver")?;
            }
            I::GetStatic(f) => {
                self.field(i, f, true)?;
                stack.push(VType::of(&f.ty).expect("fields are never void"));
            }
            I::PutStatic(f) => {
                self.field(i, f, true)?;
                self.pop_expect(i, stack, &f.ty, "putstatic value")?;
            }
            I::Invoke(m) => self.invoke(i, m, false, stack)?,
            I::InvokeStatic(m) => self.invoke(i, m, true, stack)?,
            I::Return(t) => {
                if t != &self.method.descriptor.ret {
                    return Err(self.err(
                        Some(i),
                        format!("return {t} in method returning {}", self.method.descriptor.ret),
                    ));
                }
                if *t != TypeTag::Void {
                    self.pop_expect(i, stack, t, "return value")?;
                }
            }
            I::Pop => {
                self.pop(i, stack)?;
            }
            I::Swap => {
                let b = self.pop(i, stack)?;
                let a = self.pop(i, stack)?;
                stack.push(b);
                stack.push(a);
            }
            I::Dup => {
                let a = self.pop(i, stack)?;
                stack.push(a.clone());
                stack.push(a);
            }
            I::Fail => {}
        }
        Ok(())
    }
}

fn fmt_stack(s: &[VType]) -> String {
    s.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asm::parse_syntax as parse;

    fn check(src: &str) -> Result<(), VerifyError> {
        let unit = parse(src).map_err(|e| panic!("{e}")).unwrap();
        verify(&unit.program)
    }

    #[test]
    fn accepts_fixture() {
        check(".class Main\n.method static int main()\n  const int 0\n  return int\n.end\n").unwrap();
    }

    #[test]
    fn rejects_add_on_bool() {
        let err = check(
            ".class Main\n.method static int main()\n  line 12\n  const int 1\n  const bool true\n  add\n  return int\n.end\n",
        )
        .unwrap_err();
        assert_eq!(err.location.as_ref().unwrap().line, 12);
        assert!(err.reason.contains("add"), "{err}");
    }

    #[test]
    fn rejects_wrong_arity_call() {
        let err = check(
            ".class Main\n.method static int id(int)\n  .local 0 x int\n  load 0\n  return int\n.end\n\
             .method static int main()\n  const int 1\n  const int 2\n  invokestatic Main.id(int,int)int\n  return int\n.end\n",
        )
        .unwrap_err();
        assert!(err.reason.contains("unresolved method"), "{err}");
    }

    #[test]
    fn rejects_join_mismatch() {
        let err = check(
            ".class Main\n.method static int main()\n  const bool true\n  jmpif A\n  const int 1\n  jmp B\nA:\n  const bool false\nB:\n  return int\n.end\n",
        )
        .unwrap_err();
        assert!(
            err.reason.contains("join") || err.reason.contains("return"),
            "{err}"
        );
    }

    #[test]
    fn rejects_fall_off_end() {
        let err = check(".class Main\n.method static void main()\n  const int 1\n.end\n").unwrap_err();
        assert!(err.reason.contains("falls off"), "{err}");
    }

    #[test]
    fn rejects_private_access_from_other_class() {
        let err = check(
            ".class A\n.field private int x\n.class B\n.method static int f(A)\n  .local 0 a A\n  load 0\n  getfield A.x int\n  return int\n.end\n",
        )
        .unwrap_err();
        assert!(err.reason.contains("private"), "{err}");
    }

    #[test]
    fn null_joins_with_reference() {
        check(
            ".class Main\n.method static Main pick(bool)\n  .local 0 b bool\n  load 0\n  jmpif A\n  const null\n  jmp B\nA:\n  new Main\nB:\n  return Main\n.end\n",
        )
        .unwrap();
    }

    #[test]
    fn rejects_cyclic_hierarchy() {
        let err = check(".class A extends B\n.class B extends A\n").unwrap_err();
        assert!(err.reason.contains("cyclic"), "{err}");
    }
}
