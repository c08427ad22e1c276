//! Fuel-bounded interpreter.
//!
//! A [`Vm`] links a program once (jump targets, field slots, dispatch tables)
//! and can then run any number of entry points over it.

use std::collections::HashMap;
use std::fmt;

use thiserror::Error;

use crate::ir::{
    default_value, ArithOp, ClassDef, Descriptor, Instruction, Location, MethodRef, ObjectId, Program,
    Relation, TypeTag, Value, INIT, OBJECT,
};

/// Maximum depth of nested calls before a run fails with stack overflow.
pub const MAX_CALL_DEPTH: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FailReason {
    NullDereference,
    DivisionByZero,
    /// A `fail` instruction was executed.
    Explicit,
    StackOverflow,
    /// A value of the wrong kind reached an instruction. Verified programs
    /// never produce this.
    TypeConfusion,
}

impl fmt::Display for FailReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FailReason::NullDereference => "null-dereference",
            FailReason::DivisionByZero => "division-by-zero",
            FailReason::Explicit => "explicit-fail",
            FailReason::StackOverflow => "stack-overflow",
            FailReason::TypeConfusion => "type-confusion",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Status {
    /// `None` for void entry points.
    Returned(Option<Value>),
    Failed(FailReason),
    FuelExhausted,
}

/// An executed instruction: global method number and body index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CodePoint {
    pub method: u32,
    pub index: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecOutcome {
    pub status: Status,
    pub instructions_executed: u64,
    pub trace: Option<Vec<CodePoint>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("unresolved entry method `{0}`")]
    UnresolvedEntry(String),
    #[error("entry `{0}` must be a static method without parameters")]
    BadEntry(String),
    #[error("cannot link `{0}`")]
    Link(String),
}

#[derive(Debug, Clone)]
enum Op {
    Push(Value),
    Load(usize),
    Store(usize),
    Inc(usize, i64),
    Arith(ArithOp),
    Neg,
    Not,
    Cmp(Relation),
    Jmp(usize),
    JmpIf(usize),
    Switch(Box<(Vec<(i64, usize)>, usize)>),
    New(usize),
    GetField(usize),
    PutField(usize),
    GetStatic(usize),
    PutStatic(usize),
    InvokeVirtual {
        selector: usize,
        args: usize,
    },
    /// Constructor call: bound at link time, still null-checked.
    InvokeSpecial {
        target: usize,
        args: usize,
    },
    InvokeStatic(usize),
    Return(bool),
    Pop,
    Swap,
    Dup,
    Fail,
}

#[derive(Debug, Clone)]
struct LinkedMethod {
    class: usize,
    method: usize,
    ops: Vec<Op>,
    arg_slots: usize,
    local_defaults: Vec<Value>,
    returns_value: bool,
}

#[derive(Debug, Clone)]
struct LinkedClass {
    field_defaults: Vec<Value>,
    /// `vtable[selector]` gives the method a virtual call dispatches to.
    vtable: Vec<Option<usize>>,
}

/// A program linked for execution.
#[derive(Debug, Clone)]
pub struct Vm<'p> {
    program: &'p Program,
    methods: Vec<LinkedMethod>,
    method_ids: HashMap<MethodRef, usize>,
    classes: Vec<LinkedClass>,
    static_defaults: Vec<Value>,
}

struct Linker<'p> {
    program: &'p Program,
    class_ids: HashMap<&'p str, usize>,
    method_ids: HashMap<MethodRef, usize>,
    /// Instance field layout per class, inherited fields first.
    layouts: Vec<Vec<(&'p str, &'p str)>>,
    statics: HashMap<(&'p str, &'p str), usize>,
    selectors: HashMap<(String, Descriptor), usize>,
}

impl<'p> Linker<'p> {
    fn layout(&mut self, ci: usize) -> Vec<(&'p str, &'p str)> {
        if !self.layouts[ci].is_empty() {
            return self.layouts[ci].clone();
        }
        let class = &self.program.classes[ci];
        let mut out = match self.class_ids.get(class.superclass()) {
            Some(&sup) if class.superclass() != class.name => self.layout(sup),
            _ => Vec::new(),
        };
        out.extend(
            class
                .fields
                .iter()
                .filter(|f| !f.is_static)
                .map(|f| (class.name.as_str(), f.name.as_str())),
        );
        self.layouts[ci] = out.clone();
        out
    }

    fn field_slot(&self, class: &str, name: &str, want_static: bool) -> Result<usize, ConfigError> {
        let (owner, def) = self
            .program
            .resolve_field(class, name)
            .ok_or_else(|| ConfigError::Link(format!("{class}.{name}")))?;
        if def.is_static != want_static {
            return Err(ConfigError::Link(format!("{class}.{name}")));
        }
        if want_static {
            Ok(self.statics[&(owner.name.as_str(), def.name.as_str())])
        } else {
            let ci = self.class_ids[class];
            self.layouts[ci]
                .iter()
                .position(|&(c, f)| c == owner.name && f == def.name)
                .ok_or_else(|| ConfigError::Link(format!("{class}.{name}")))
        }
    }

    fn resolved(&self, m: &MethodRef) -> Result<usize, ConfigError> {
        let (owner, def) = self
            .program
            .resolve_method(&m.class, &m.name, &m.descriptor)
            .ok_or_else(|| ConfigError::Link(m.to_string()))?;
        Ok(self.method_ids[&def.key(&owner.name)])
    }

    fn selector(&mut self, m: &MethodRef) -> usize {
        let n = self.selectors.len();
        *self
            .selectors
            .entry((m.name.clone(), m.descriptor.clone()))
            .or_insert(n)
    }

    fn target(&self, method: &crate::ir::MethodDef, label: &str) -> Result<usize, ConfigError> {
        method
            .label_index(label)
            .ok_or_else(|| ConfigError::Link(format!("label {label}")))
    }

    fn link_op(&mut self, method: &crate::ir::MethodDef, ins: &Instruction) -> Result<Op, ConfigError> {
        use Instruction as I;
        Ok(match ins {
            I::Const(c) => Op::Push(Value::from(*c)),
            I::Load(s) => Op::Load(*s),
            I::Store(s) => Op::Store(*s),
            I::Inc(s, d) => Op::Inc(*s, *d),
            I::Arith(a) => Op::Arith(*a),
            I::Neg => Op::Neg,
            I::Not => Op::Not,
            I::Cmp(r) => Op::Cmp(*r),
            I::Jmp(l) => Op::Jmp(self.target(method, l)?),
            I::JmpIf(l) => Op::JmpIf(self.target(method, l)?),
            I::Switch { cases, default } => {
                let mut arms = Vec::with_capacity(cases.len());
                for (k, l) in cases {
                    arms.push((*k, self.target(method, l)?));
                }
                Op::Switch(Box::new((arms, self.target(method, default)?)))
            }
            I::New(c) => Op::New(
                *self
                    .class_ids
                    .get(c.as_str())
                    .ok_or_else(|| ConfigError::Link(format!("class {c}")))?,
            ),
            I::GetField(f) => Op::GetField(self.field_slot(&f.class, &f.name, false)?),
            I::PutField(f) => Op::PutField(self.field_slot(&f.class, &f.name, false)?),
            I::GetStatic(f) => Op::GetStatic(self.field_slot(&f.class, &f.name, true)?),
            I::PutStatic(f) => Op::PutStatic(self.field_slot(&f.class, &f.name, true)?),
            I::Invoke(m) if m.name == INIT => Op::InvokeSpecial {
                target: self.resolved(m)?,
                args: m.descriptor.params.len() + 1,
            },
            I::Invoke(m) => Op::InvokeVirtual {
                selector: self.selector(m),
                args: m.descriptor.params.len() + 1,
            },
            I::InvokeStatic(m) => Op::InvokeStatic(self.resolved(m)?),
            I::Return(t) => Op::Return(*t != TypeTag::Void),
            I::Pop => Op::Pop,
            I::Swap => Op::Swap,
            I::Dup => Op::Dup,
            I::Fail => Op::Fail,
        })
    }
}

fn defaults(types: impl Iterator<Item = TypeTag>) -> Vec<Value> {
    types.map(|t| default_value(&t).unwrap_or(Value::NULL)).collect()
}

impl<'p> Vm<'p> {
    pub fn new(program: &'p Program) -> Result<Self, ConfigError> {
        let class_ids: HashMap<&str, usize> = program
            .classes
            .iter()
            .enumerate()
            .map(|(i, c)| (c.name.as_str(), i))
            .collect();
        let mut method_ids = HashMap::new();
        let mut positions = Vec::new();
        for (ci, c) in program.classes.iter().enumerate() {
            for (mi, m) in c.methods.iter().enumerate() {
                method_ids.insert(m.key(&c.name), positions.len());
                positions.push((ci, mi));
            }
        }
        let mut statics = HashMap::new();
        let mut static_types = Vec::new();
        for c in &program.classes {
            for f in c.fields.iter().filter(|f| f.is_static) {
                statics.insert((c.name.as_str(), f.name.as_str()), static_types.len());
                static_types.push(f.ty.clone());
            }
        }
        let mut linker = Linker {
            program,
            class_ids,
            method_ids,
            layouts: vec![Vec::new(); program.classes.len()],
            statics,
            selectors: HashMap::new(),
        };
        for ci in 0..program.classes.len() {
            linker.layout(ci);
        }

        let mut methods = Vec::with_capacity(positions.len());
        for &(ci, mi) in &positions {
            let m = &program.classes[ci].methods[mi];
            let ops = m
                .body
                .iter()
                .map(|ins| linker.link_op(m, ins))
                .collect::<Result<Vec<_>, _>>()?;
            methods.push(LinkedMethod {
                class: ci,
                method: mi,
                ops,
                arg_slots: m.arg_slots(),
                local_defaults: defaults(m.locals.iter().map(|l| l.ty.clone())),
                returns_value: m.descriptor.ret != TypeTag::Void,
            });
        }

        let mut selectors: Vec<(&(String, Descriptor), usize)> =
            linker.selectors.iter().map(|(k, &v)| (k, v)).collect();
        selectors.sort_by_key(|&(_, v)| v);
        let classes = program
            .classes
            .iter()
            .enumerate()
            .map(|(ci, c)| LinkedClass {
                field_defaults: defaults(
                    linker.layouts[ci]
                        .iter()
                        .map(|&(owner, f)| field_type(program, owner, f)),
                ),
                vtable: selectors
                    .iter()
                    .map(|((name, desc), _)| {
                        program
                            .resolve_method(&c.name, name, desc)
                            .filter(|(_, m)| !m.is_static)
                            .map(|(owner, m)| linker.method_ids[&m.key(&owner.name)])
                    })
                    .collect(),
            })
            .collect();

        Ok(Vm {
            program,
            method_ids: linker.method_ids,
            methods,
            classes,
            static_defaults: defaults(static_types.into_iter()),
        })
    }

    pub fn program(&self) -> &'p Program {
        self.program
    }

    /// Global number of a method, as used in [`CodePoint`]s.
    pub fn method_id(&self, m: &MethodRef) -> Option<u32> {
        self.method_ids.get(m).map(|&i| i as u32)
    }

    /// Source location of an executed instruction.
    pub fn location(&self, cp: CodePoint) -> Location {
        let lm = &self.methods[cp.method as usize];
        let class: &ClassDef = &self.program.classes[lm.class];
        let m = &class.methods[lm.method];
        Location {
            class: class.name.clone(),
            method: m.name.clone(),
            descriptor: m.descriptor.clone(),
            line: m.line_map[cp.index as usize],
        }
    }

    /// Runs a static zero-argument entry method for at most `fuel`
    /// instructions.
    pub fn run(&self, entry: &MethodRef, fuel: u64, trace: bool) -> Result<ExecOutcome, ConfigError> {
        let id = *self
            .method_ids
            .get(entry)
            .ok_or_else(|| ConfigError::UnresolvedEntry(entry.to_string()))?;
        let def = &self.program.classes[self.methods[id].class].methods[self.methods[id].method];
        if !def.is_static || !def.descriptor.params.is_empty() {
            return Err(ConfigError::BadEntry(entry.to_string()));
        }
        let mut m = Machine {
            vm: self,
            stack: Vec::new(),
            locals: Vec::new(),
            frames: Vec::new(),
            heap: Vec::new(),
            statics: self.static_defaults.clone(),
            executed: 0,
            trace: trace.then(Vec::new),
        };
        let status = m.run(id, fuel);
        Ok(ExecOutcome {
            status,
            instructions_executed: m.executed,
            trace: m.trace,
        })
    }
}

fn field_type(program: &Program, owner: &str, name: &str) -> TypeTag {
    program
        .class(owner)
        .and_then(|c| c.field(name))
        .map(|f| f.ty.clone())
        .unwrap_or_else(|| TypeTag::Ref(OBJECT.into()))
}

/// Links `program` and runs `entry` once.
pub fn execute(
    program: &Program,
    entry: &MethodRef,
    fuel: u64,
    trace: bool,
) -> Result<ExecOutcome, ConfigError> {
    Vm::new(program)?.run(entry, fuel, trace)
}

struct Object {
    class: usize,
    fields: Vec<Value>,
}

struct Frame {
    method: usize,
    pc: usize,
    locals_base: usize,
    stack_base: usize,
}

struct Machine<'v, 'p> {
    vm: &'v Vm<'p>,
    stack: Vec<Value>,
    locals: Vec<Value>,
    frames: Vec<Frame>,
    heap: Vec<Object>,
    statics: Vec<Value>,
    executed: u64,
    trace: Option<Vec<CodePoint>>,
}

type Step<T> = Result<T, FailReason>;

impl Machine<'_, '_> {
    fn pop(&mut self) -> Step<Value> {
        let base = self.frames.last().map_or(0, |f| f.stack_base);
        if self.stack.len() <= base {
            return Err(FailReason::TypeConfusion);
        }
        Ok(self.stack.pop().expect("checked length"))
    }

    fn pop_int(&mut self) -> Step<i64> {
        match self.pop()? {
            Value::Int(n) => Ok(n),
            _ => Err(FailReason::TypeConfusion),
        }
    }

    fn pop_bool(&mut self) -> Step<bool> {
        match self.pop()? {
            Value::Bool(b) => Ok(b),
            _ => Err(FailReason::TypeConfusion),
        }
    }

    fn pop_object(&mut self) -> Step<usize> {
        match self.pop()? {
            Value::Ref(Some(ObjectId(o))) => Ok(o),
            Value::Ref(None) => Err(FailReason::NullDereference),
            _ => Err(FailReason::TypeConfusion),
        }
    }

    fn push_frame(&mut self, method: usize) -> Step<()> {
        if self.frames.len() >= MAX_CALL_DEPTH {
            return Err(FailReason::StackOverflow);
        }
        let lm = &self.vm.methods[method];
        let args = lm.arg_slots;
        if self.stack.len() < args {
            return Err(FailReason::TypeConfusion);
        }
        let locals_base = self.locals.len();
        let first_arg = self.stack.len() - args;
        self.locals.extend(self.stack.drain(first_arg..));
        self.locals
            .extend_from_slice(lm.local_defaults.get(args..).unwrap_or(&[]));
        self.frames.push(Frame {
            method,
            pc: 0,
            locals_base,
            stack_base: self.stack.len(),
        });
        Ok(())
    }

    fn run(&mut self, entry: usize, fuel: u64) -> Status {
        if let Err(r) = self.push_frame(entry) {
            return Status::Failed(r);
        }
        loop {
            if self.executed >= fuel {
                return Status::FuelExhausted;
            }
            match self.step() {
                Ok(None) => {}
                Ok(Some(v)) => return Status::Returned(v),
                Err(r) => return Status::Failed(r),
            }
        }
    }

    /// Executes one instruction; yields the entry's result when it returns.
    fn step(&mut self) -> Step<Option<Option<Value>>> {
        let frame = self.frames.last_mut().expect("running frame");
        let method = frame.method;
        let pc = frame.pc;
        let lbase = frame.locals_base;
        frame.pc += 1;
        self.executed += 1;
        if let Some(t) = &mut self.trace {
            t.push(CodePoint {
                method: method as u32,
                index: pc as u32,
            });
        }
        let vm = self.vm;
        let lm = &vm.methods[method];
        let op = lm.ops.get(pc).ok_or(FailReason::TypeConfusion)?;
        match op {
            Op::Push(v) => self.stack.push(*v),
            Op::Load(s) => {
                let v = *self.locals.get(lbase + s).ok_or(FailReason::TypeConfusion)?;
                self.stack.push(v);
            }
            Op::Store(s) => {
                let v = self.pop()?;
                *self.locals.get_mut(lbase + s).ok_or(FailReason::TypeConfusion)? = v;
            }
            Op::Inc(s, d) => match self.locals.get_mut(lbase + s) {
                Some(Value::Int(n)) => *n = n.wrapping_add(*d),
                _ => return Err(FailReason::TypeConfusion),
            },
            Op::Arith(a) => {
                let b = self.pop_int()?;
                let x = self.pop_int()?;
                self.stack.push(Value::Int(arith(*a, x, b)?));
            }
            Op::Neg => {
                let x = self.pop_int()?;
                self.stack.push(Value::Int(x.wrapping_neg()));
            }
            Op::Not => {
                let b = self.pop_bool()?;
                self.stack.push(Value::Bool(!b));
            }
            Op::Cmp(r) => {
                let b = self.pop()?;
                let a = self.pop()?;
                let res = match (a, b) {
                    (Value::Int(x), Value::Int(y)) => r.holds(x, y),
                    (Value::Bool(x), Value::Bool(y)) if matches!(r, Relation::Eq | Relation::Ne) => {
                        r.holds(x, y)
                    }
                    (Value::Ref(x), Value::Ref(y)) if matches!(r, Relation::Eq | Relation::Ne) => {
                        (x == y) == (*r == Relation::Eq)
                    }
                    _ => return Err(FailReason::TypeConfusion),
                };
                self.stack.push(Value::Bool(res));
            }
            Op::Jmp(t) => self.jump(*t),
            Op::JmpIf(t) => {
                if self.pop_bool()? {
                    self.jump(*t);
                }
            }
            Op::Switch(arms) => {
                let k = self.pop_int()?;
                let (cases, default) = &**arms;
                let t = cases.iter().find(|(c, _)| *c == k).map_or(*default, |&(_, t)| t);
                self.jump(t);
            }
            Op::New(c) => {
                let id = self.heap.len();
                self.heap.push(Object {
                    class: *c,
                    fields: vm.classes[*c].field_defaults.clone(),
                });
                self.stack.push(Value::Ref(Some(ObjectId(id))));
            }
            Op::GetField(slot) => {
                let o = self.pop_object()?;
                let v = *self.heap[o].fields.get(*slot).ok_or(FailReason::TypeConfusion)?;
                self.stack.push(v);
            }
            Op::PutField(slot) => {
                let v = self.pop()?;
                let o = self.pop_object()?;
                *self.heap[o]
                    .fields
                    .get_mut(*slot)
                    .ok_or(FailReason::TypeConfusion)? = v;
            }
            Op::GetStatic(slot) => self.stack.push(self.statics[*slot]),
            Op::PutStatic(slot) => {
                let v = self.pop()?;
                self.statics[*slot] = v;
            }
            Op::InvokeVirtual { selector, args } => {
                let recv_at = self
                    .stack
                    .len()
                    .checked_sub(*args)
                    .ok_or(FailReason::TypeConfusion)?;
                let target = match self.stack[recv_at] {
                    Value::Ref(Some(ObjectId(o))) => {
                        let class = self.heap[o].class;
                        vm.classes[class].vtable[*selector].ok_or(FailReason::TypeConfusion)?
                    }
                    Value::Ref(None) => return Err(FailReason::NullDereference),
                    _ => return Err(FailReason::TypeConfusion),
                };
                self.push_frame(target)?;
            }
            Op::InvokeSpecial { target, args } => {
                let recv_at = self
                    .stack
                    .len()
                    .checked_sub(*args)
                    .ok_or(FailReason::TypeConfusion)?;
                match self.stack[recv_at] {
                    Value::Ref(Some(_)) => {}
                    Value::Ref(None) => return Err(FailReason::NullDereference),
                    _ => return Err(FailReason::TypeConfusion),
                }
                self.push_frame(*target)?;
            }
            Op::InvokeStatic(target) => self.push_frame(*target)?,
            Op::Return(has_value) => {
                let v = if *has_value { Some(self.pop()?) } else { None };
                if *has_value != lm.returns_value {
                    return Err(FailReason::TypeConfusion);
                }
                let frame = self.frames.pop().expect("running frame");
                self.locals.truncate(frame.locals_base);
                self.stack.truncate(frame.stack_base);
                if self.frames.is_empty() {
                    return Ok(Some(v));
                }
                if let Some(v) = v {
                    self.stack.push(v);
                }
            }
            Op::Pop => {
                self.pop()?;
            }
            Op::Swap => {
                let b = self.pop()?;
                let a = self.pop()?;
                self.stack.push(b);
                self.stack.push(a);
            }
            Op::Dup => {
                let a = self.pop()?;
                self.stack.push(a);
                self.stack.push(a);
            }
            Op::Fail => return Err(FailReason::Explicit),
        }
        Ok(None)
    }

    fn jump(&mut self, target: usize) {
        self.frames.last_mut().expect("running frame").pc = target;
    }
}

/// Integer arithmetic with wrapping overflow and masked shift distances.
pub fn arith(op: ArithOp, a: i64, b: i64) -> Result<i64, FailReason> {
    Ok(match op {
        ArithOp::Add => a.wrapping_add(b),
        ArithOp::Sub => a.wrapping_sub(b),
        ArithOp::Mul => a.wrapping_mul(b),
        ArithOp::Div if b == 0 => return Err(FailReason::DivisionByZero),
        ArithOp::Div => a.wrapping_div(b),
        ArithOp::Rem if b == 0 => return Err(FailReason::DivisionByZero),
        ArithOp::Rem => a.wrapping_rem(b),
        ArithOp::Shl => a.wrapping_shl((b & 63) as u32),
        ArithOp::Shr => a.wrapping_shr((b & 63) as u32),
        ArithOp::Ushr => ((a as u64) >> (b & 63)) as i64,
        ArithOp::And => a & b,
        ArithOp::Or => a | b,
        ArithOp::Xor => a ^ b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asm::parse;

    fn entry(class: &str, name: &str, ret: TypeTag) -> MethodRef {
        MethodRef {
            class: class.into(),
            name: name.into(),
            descriptor: Descriptor::new(vec![], ret),
        }
    }

    fn run(src: &str, fuel: u64) -> ExecOutcome {
        let unit = parse(src).unwrap_or_else(|e| panic!("{e}"));
        execute(&unit.program, &entry("Main", "main", TypeTag::Int), fuel, true).unwrap()
    }

    #[test]
    fn super_constructor_binds_statically() {
        let src = "\
.class A
.field public int v
.method void <init>()
  .local 0 this A
  load 0
  const int 4
  putfield A.v int
  return void
.end
.class B extends A
.method void <init>()
  .local 0 this B
  load 0
  invoke A.<init>()void
  load 0
  load 0
  getfield A.v int
  const int 1
  add
  putfield A.v int
  return void
.end
.class Main
.method static int main()
  new B
  dup
  invoke B.<init>()void
  getfield A.v int
  return int
.end
";
        assert_eq!(run(src, 1_000).status, Status::Returned(Some(Value::Int(5))));
        let null_init = ".class A\n.method void <init>()\n  .local 0 this A\n  return void\n.end\n.class Main\n.method static int main()\n  const null\n  invoke A.<init>()void\n  const int 0\n  return int\n.end\n";
        assert_eq!(
            run(null_init, 100).status,
            Status::Failed(FailReason::NullDereference)
        );
    }

    #[test]
    fn returns_constant() {
        let out = run(
            ".class Main\n.method static int main()\n  const int 7\n  return int\n.end\n",
            100,
        );
        assert_eq!(out.status, Status::Returned(Some(Value::Int(7))));
        assert_eq!(out.instructions_executed, 2);
        assert_eq!(out.trace.unwrap().len(), 2);
    }

    #[test]
    fn null_field_receiver_fails() {
        let out = run(
            ".class Box\n.field int v\n.class Main\n.field static Box b\n.method static int main()\n  getstatic Main.b Box\n  getfield Box.v int\n  return int\n.end\n",
            100,
        );
        assert_eq!(out.status, Status::Failed(FailReason::NullDereference));
    }

    #[test]
    fn self_loop_exhausts_exactly() {
        let out = run(
            ".class Main\n.method static int main()\nL:\n  jmp L\n.end\n",
            1000,
        );
        assert_eq!(out.status, Status::FuelExhausted);
        assert_eq!(out.instructions_executed, 1000);
        assert_eq!(out.trace.unwrap().len(), 1000);
    }

    #[test]
    fn division_by_zero_fails() {
        let out = run(
            ".class Main\n.method static int main()\n  const int 1\n  const int 0\n  div\n  return int\n.end\n",
            100,
        );
        assert_eq!(out.status, Status::Failed(FailReason::DivisionByZero));
    }

    #[test]
    fn unresolved_entry_is_config_error() {
        let unit =
            parse(".class Main\n.method static int main()\n  const int 7\n  return int\n.end\n").unwrap();
        let err = execute(&unit.program, &entry("Main", "nope", TypeTag::Int), 10, false).unwrap_err();
        assert!(matches!(err, ConfigError::UnresolvedEntry(_)));
    }

    #[test]
    fn virtual_dispatch_and_inherited_fields() {
        let src = "\
.class Shape
.field int sides
.method int area()
  .local 0 this Shape
  const int 0
  return int
.end
.class Square extends Shape
.field int side
.method int area()
  .local 0 this Square
  load 0
  getfield Square.side int
  load 0
  getfield Square.side int
  mul
  load 0
  getfield Shape.sides int
  add
  return int
.end
.class Main
.method static int main()
  .local 0 s Shape
  new Square
  dup
  const int 3
  putfield Square.side int
  dup
  const int 4
  putfield Shape.sides int
  store 0
  load 0
  invoke Shape.area()int
  return int
.end
";
        assert_eq!(run(src, 1000).status, Status::Returned(Some(Value::Int(13))));
    }

    #[test]
    fn recursion_and_loops() {
        let src = "\
.class Main
.method static int fact(int)
  .local 0 n int
  load 0
  const int 1
  cmp le
  jmpif BASE
  load 0
  load 0
  const int 1
  sub
  invokestatic Main.fact(int)int
  mul
  return int
BASE:
  const int 1
  return int
.end
.method static int main()
  .local 0 i int
  .local 1 acc int
TOP:
  load 0
  const int 5
  cmp ge
  jmpif DONE
  load 1
  load 0
  invokestatic Main.fact(int)int
  add
  store 1
  inc 0 1
  jmp TOP
DONE:
  load 1
  return int
.end
";
        // 0!+1!+2!+3!+4! = 34
        assert_eq!(run(src, 10_000).status, Status::Returned(Some(Value::Int(34))));
    }

    #[test]
    fn unbounded_recursion_overflows() {
        let src =
            ".class Main\n.method static int main()\n  invokestatic Main.main()int\n  return int\n.end\n";
        assert_eq!(
            run(src, 1_000_000).status,
            Status::Failed(FailReason::StackOverflow)
        );
    }

    #[test]
    fn arithmetic_edges() {
        assert_eq!(arith(ArithOp::Add, i64::MAX, 1), Ok(i64::MIN));
        assert_eq!(arith(ArithOp::Div, i64::MIN, -1), Ok(i64::MIN));
        assert_eq!(arith(ArithOp::Shl, 1, 65), Ok(2));
        assert_eq!(arith(ArithOp::Ushr, -1, 60), Ok(15));
        assert_eq!(arith(ArithOp::Shr, -16, 2), Ok(-4));
        assert_eq!(arith(ArithOp::Rem, -7, 2), Ok(-1));
        assert_eq!(arith(ArithOp::Rem, 1, 0), Err(FailReason::DivisionByZero));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        const COUNTDOWN: &str = "\
.class Main
.field static int n
.method static int main()
TOP:
  getstatic Main.n int
  const int 0
  cmp le
  jmpif DONE
  getstatic Main.n int
  const int 1
  sub
  putstatic Main.n int
  jmp TOP
DONE:
  const int 99
  return int
.end
";

        fn program_with(n: i64) -> Program {
            let src = COUNTDOWN.replace(
                ".method static int main()\n",
                &format!(".method static int main()\n  const int {n}\n  putstatic Main.n int\n"),
            );
            parse(&src).unwrap().program
        }

        proptest! {
            #[test]
            fn fuel_monotone_and_deterministic(n in 0i64..40, fuel in 1u64..400, extra in 0u64..400) {
                let p = program_with(n);
                let e = entry("Main", "main", TypeTag::Int);
                let a = execute(&p, &e, fuel, true).unwrap();
                let b = execute(&p, &e, fuel, true).unwrap();
                prop_assert_eq!(&a, &b);
                prop_assert!(a.instructions_executed <= fuel);
                if let Status::Returned(_) = a.status {
                    let c = execute(&p, &e, fuel + extra, false).unwrap();
                    prop_assert_eq!(c.status, a.status);
                    prop_assert_eq!(c.instructions_executed, a.instructions_executed);
                }
                let vm = Vm::new(&p).unwrap();
                for cp in a.trace.unwrap() {
                    let loc = vm.location(cp);
                    prop_assert!(p.method(&loc.method_ref()).is_some());
                }
            }
        }
    }
}
