//! In-memory representation of subject programs.
//!
//! A [`Program`] is a flat list of classes rooted at the built-in `Object`
//! class. Methods carry a linear instruction body, a label table, typed
//! local slots and a total instruction-to-source-line map.

use std::collections::HashSet;
use std::fmt;

use thiserror::Error;

/// Name of the implicit root class.
pub const OBJECT: &str = "Object";

/// Name reserved for constructor-style initializer methods.
pub const INIT: &str = "<init>";

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TypeTag {
    Int,
    Bool,
    Ref(String),
    Void,
}

impl TypeTag {
    pub fn object() -> Self {
        TypeTag::Ref(OBJECT.to_string())
    }

    pub fn is_ref(&self) -> bool {
        matches!(self, TypeTag::Ref(_))
    }
}

impl fmt::Display for TypeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeTag::Int => f.write_str("int"),
            TypeTag::Bool => f.write_str("bool"),
            TypeTag::Void => f.write_str("void"),
            TypeTag::Ref(c) => f.write_str(c),
        }
    }
}

/// Parameter and return types of a method.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Descriptor {
    pub params: Vec<TypeTag>,
    pub ret: TypeTag,
}

impl Descriptor {
    pub fn new(params: Vec<TypeTag>, ret: TypeTag) -> Self {
        Self { params, ret }
    }
}

impl fmt::Display for Descriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, p) in self.params.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{p}")?;
        }
        write!(f, "){}", self.ret)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Visibility {
    Public,
    Private,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldDef {
    pub name: String,
    pub ty: TypeTag,
    pub is_static: bool,
    pub visibility: Visibility,
}

/// Declared scope of a local slot. `Whole` covers the entire body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Scope {
    Whole,
    Labels { start: String, end: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalSlot {
    pub index: usize,
    pub name: String,
    pub ty: TypeTag,
    pub scope: Scope,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Label {
    pub name: String,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MethodDef {
    pub name: String,
    pub descriptor: Descriptor,
    pub is_static: bool,
    pub locals: Vec<LocalSlot>,
    pub body: Vec<Instruction>,
    /// Labels sorted by instruction index; an index equal to `body.len()`
    /// marks the end of the body.
    pub labels: Vec<Label>,
    /// Source line of every instruction, parallel to `body`.
    pub line_map: Vec<u32>,
}

impl MethodDef {
    pub fn label_index(&self, name: &str) -> Option<usize> {
        self.labels.iter().find(|l| l.name == name).map(|l| l.index)
    }

    /// Instruction indices attributed to `line`, ascending.
    pub fn indices_at_line(&self, line: u32) -> Vec<usize> {
        (0..self.body.len())
            .filter(|&i| self.line_map[i] == line)
            .collect()
    }

    /// Whether any label points at `index`.
    pub fn is_label_target(&self, index: usize) -> bool {
        self.labels.iter().any(|l| l.index == index)
    }

    /// Number of parameter slots, including `this` for instance methods.
    pub fn arg_slots(&self) -> usize {
        self.descriptor.params.len() + usize::from(!self.is_static)
    }

    /// Half-open instruction interval a local's scope covers.
    pub fn scope_range(&self, slot: &LocalSlot) -> Option<(usize, usize)> {
        match &slot.scope {
            Scope::Whole => Some((0, self.body.len())),
            Scope::Labels { start, end } => Some((self.label_index(start)?, self.label_index(end)?)),
        }
    }

    pub fn key(&self, class: &str) -> MethodRef {
        MethodRef {
            class: class.to_string(),
            name: self.name.clone(),
            descriptor: self.descriptor.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassDef {
    pub name: String,
    pub super_name: Option<String>,
    pub fields: Vec<FieldDef>,
    pub methods: Vec<MethodDef>,
}

impl ClassDef {
    pub fn superclass(&self) -> &str {
        self.super_name.as_deref().unwrap_or(OBJECT)
    }

    pub fn field(&self, name: &str) -> Option<&FieldDef> {
        self.fields.iter().find(|f| f.name == name)
    }

    pub fn method(&self, name: &str, descriptor: &Descriptor) -> Option<&MethodDef> {
        self.methods
            .iter()
            .find(|m| m.name == name && &m.descriptor == descriptor)
    }
}

/// Literal operand of a `const` instruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Constant {
    Int(i64),
    Bool(bool),
    Null,
}

impl Constant {
    /// The constant equal to the default value of `t`.
    pub fn default_for(t: &TypeTag) -> Option<Constant> {
        match t {
            TypeTag::Int => Some(Constant::Int(0)),
            TypeTag::Bool => Some(Constant::Bool(false)),
            TypeTag::Ref(_) => Some(Constant::Null),
            TypeTag::Void => None,
        }
    }
}

impl fmt::Display for Constant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Constant::Int(n) => write!(f, "{n}"),
            Constant::Bool(b) => write!(f, "{b}"),
            Constant::Null => f.write_str("null"),
        }
    }
}

/// Opaque heap address.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ObjectId(pub usize);

/// Runtime value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Value {
    Int(i64),
    Bool(bool),
    Ref(Option<ObjectId>),
}

impl Value {
    pub const NULL: Value = Value::Ref(None);
}

impl From<Constant> for Value {
    fn from(c: Constant) -> Self {
        match c {
            Constant::Int(n) => Value::Int(n),
            Constant::Bool(b) => Value::Bool(b),
            Constant::Null => Value::NULL,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(n) => write!(f, "{n}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Ref(None) => f.write_str("null"),
            Value::Ref(Some(id)) => write!(f, "@{}", id.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ArithOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Shl,
    Shr,
    Ushr,
    And,
    Or,
    Xor,
}

impl ArithOp {
    pub const ALL: [ArithOp; 11] = [
        ArithOp::Add,
        ArithOp::Sub,
        ArithOp::Mul,
        ArithOp::Div,
        ArithOp::Rem,
        ArithOp::Shl,
        ArithOp::Shr,
        ArithOp::Ushr,
        ArithOp::And,
        ArithOp::Or,
        ArithOp::Xor,
    ];

    pub fn mnemonic(self) -> &'static str {
        match self {
            ArithOp::Add => "add",
            ArithOp::Sub => "sub",
            ArithOp::Mul => "mul",
            ArithOp::Div => "div",
            ArithOp::Rem => "rem",
            ArithOp::Shl => "shl",
            ArithOp::Shr => "shr",
            ArithOp::Ushr => "ushr",
            ArithOp::And => "and",
            ArithOp::Or => "or",
            ArithOp::Xor => "xor",
        }
    }

    pub fn from_mnemonic(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|op| op.mnemonic() == s)
    }

    pub fn symbol(self) -> &'static str {
        match self {
            ArithOp::Add => "+",
            ArithOp::Sub => "-",
            ArithOp::Mul => "*",
            ArithOp::Div => "/",
            ArithOp::Rem => "%",
            ArithOp::Shl => "<<",
            ArithOp::Shr => ">>",
            ArithOp::Ushr => ">>>",
            ArithOp::And => "&",
            ArithOp::Or => "|",
            ArithOp::Xor => "^",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Relation {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl Relation {
    pub const ALL: [Relation; 6] = [
        Relation::Eq,
        Relation::Ne,
        Relation::Lt,
        Relation::Le,
        Relation::Gt,
        Relation::Ge,
    ];

    pub fn mnemonic(self) -> &'static str {
        match self {
            Relation::Eq => "eq",
            Relation::Ne => "ne",
            Relation::Lt => "lt",
            Relation::Le => "le",
            Relation::Gt => "gt",
            Relation::Ge => "ge",
        }
    }

    pub fn from_mnemonic(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.mnemonic() == s)
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Eq => "==",
            Relation::Ne => "!=",
            Relation::Lt => "<",
            Relation::Le => "<=",
            Relation::Gt => ">",
            Relation::Ge => ">=",
        }
    }

    pub fn holds<T: Ord>(self, a: T, b: T) -> bool {
        match self {
            Relation::Eq => a == b,
            Relation::Ne => a != b,
            Relation::Lt => a < b,
            Relation::Le => a <= b,
            Relation::Gt => a > b,
            Relation::Ge => a >= b,
        }
    }
}

/// Symbolic reference to a field as written at an access site.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FieldRef {
    pub class: String,
    pub name: String,
    pub ty: TypeTag,
}

impl fmt::Display for FieldRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{} {}", self.class, self.name, self.ty)
    }
}

/// Symbolic reference to a method as written at a call site.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MethodRef {
    pub class: String,
    pub name: String,
    pub descriptor: Descriptor,
}

impl fmt::Display for MethodRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}{}", self.class, self.name, self.descriptor)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Instruction {
    Const(Constant),
    Load(usize),
    Store(usize),
    Inc(usize, i64),
    Arith(ArithOp),
    Neg,
    Not,
    Cmp(Relation),
    Jmp(String),
    JmpIf(String),
    Switch {
        cases: Vec<(i64, String)>,
        default: String,
    },
    New(String),
    GetField(FieldRef),
    PutField(FieldRef),
    GetStatic(FieldRef),
    PutStatic(FieldRef),
    Invoke(MethodRef),
    InvokeStatic(MethodRef),
    Return(TypeTag),
    Pop,
    Swap,
    Dup,
    Fail,
}

impl Instruction {
    /// Labels this instruction may transfer control to.
    pub fn jump_targets(&self) -> Vec<&str> {
        match self {
            Instruction::Jmp(l) | Instruction::JmpIf(l) => vec![l.as_str()],
            Instruction::Switch { cases, default } => cases
                .iter()
                .map(|(_, l)| l.as_str())
                .chain(std::iter::once(default.as_str()))
                .collect(),
            _ => Vec::new(),
        }
    }

    /// Whether control never falls through to the next instruction.
    pub fn is_terminator(&self) -> bool {
        matches!(
            self,
            Instruction::Jmp(_) | Instruction::Switch { .. } | Instruction::Return(_) | Instruction::Fail
        )
    }
}

/// A source location: one line of one method.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Location {
    pub class: String,
    pub method: String,
    pub descriptor: Descriptor,
    pub line: u32,
}

impl Location {
    pub fn method_ref(&self) -> MethodRef {
        MethodRef {
            class: self.class.clone(),
            name: self.method.clone(),
            descriptor: self.descriptor.clone(),
        }
    }
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}.{}{}:{}",
            self.class, self.method, self.descriptor, self.line
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IrError {
    #[error("unresolved class `{0}`")]
    UnresolvedClass(String),
    #[error("void has no default value")]
    VoidValue,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Program {
    pub classes: Vec<ClassDef>,
}

impl Program {
    pub fn class(&self, name: &str) -> Option<&ClassDef> {
        self.classes.iter().find(|c| c.name == name)
    }

    pub fn class_mut(&mut self, name: &str) -> Option<&mut ClassDef> {
        self.classes.iter_mut().find(|c| c.name == name)
    }

    pub fn has_class(&self, name: &str) -> bool {
        name == OBJECT || self.class(name).is_some()
    }

    pub fn method(&self, m: &MethodRef) -> Option<&MethodDef> {
        self.class(&m.class)?.method(&m.name, &m.descriptor)
    }

    pub fn method_mut(&mut self, m: &MethodRef) -> Option<&mut MethodDef> {
        self.class_mut(&m.class)?
            .methods
            .iter_mut()
            .find(|d| d.name == m.name && d.descriptor == m.descriptor)
    }

    /// `name` followed by its superclasses up to and including `Object`.
    /// Stops early on unresolved names or cycles.
    pub fn ancestors(&self, name: &str) -> Vec<String> {
        let mut out = Vec::new();
        let mut seen = HashSet::new();
        let mut cur = Some(name.to_string());
        while let Some(c) = cur {
            if !seen.insert(c.clone()) {
                break;
            }
            cur = if c == OBJECT {
                None
            } else {
                self.class(&c).map(|d| d.superclass().to_string())
            };
            out.push(c);
        }
        out
    }

    /// Whether class `a` reaches class `b` through super links.
    pub fn is_subclass(&self, a: &str, b: &str) -> bool {
        b == OBJECT || self.ancestors(a).iter().any(|c| c == b)
    }

    /// Nearest common superclass of two classes.
    pub fn common_superclass(&self, a: &str, b: &str) -> String {
        let left = self.ancestors(a);
        self.ancestors(b)
            .into_iter()
            .find(|c| left.contains(c))
            .unwrap_or_else(|| OBJECT.to_string())
    }

    /// Looks up a field starting at `class` and walking super links.
    pub fn resolve_field(&self, class: &str, name: &str) -> Option<(&ClassDef, &FieldDef)> {
        self.ancestors(class).iter().find_map(|c| {
            let def = self.class(c)?;
            def.field(name).map(|f| (def, f))
        })
    }

    /// Looks up a method starting at `class` and walking super links.
    pub fn resolve_method(
        &self,
        class: &str,
        name: &str,
        descriptor: &Descriptor,
    ) -> Option<(&ClassDef, &MethodDef)> {
        self.ancestors(class).iter().find_map(|c| {
            let def = self.class(c)?;
            def.method(name, descriptor).map(|m| (def, m))
        })
    }

    pub fn check_type(&self, t: &TypeTag) -> Result<(), IrError> {
        match t {
            TypeTag::Ref(c) if !self.has_class(c) => Err(IrError::UnresolvedClass(c.clone())),
            _ => Ok(()),
        }
    }
}

/// Subtype relation over type tags: reflexive, and `Ref(a) ⪯ Ref(b)` when
/// `a` reaches `b` through super links.
pub fn subtype_of(a: &TypeTag, b: &TypeTag, program: &Program) -> Result<bool, IrError> {
    program.check_type(a)?;
    program.check_type(b)?;
    Ok(match (a, b) {
        (TypeTag::Ref(x), TypeTag::Ref(y)) => program.is_subclass(x, y),
        _ => a == b,
    })
}

pub fn default_value(t: &TypeTag) -> Result<Value, IrError> {
    Constant::default_for(t)
        .map(Value::from)
        .ok_or(IrError::VoidValue)
}
