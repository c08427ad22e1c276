//! Mutator catalog and candidate-patch generation.
//!
//! Every mutator rewrites one contiguous instruction span of one method at a
//! single source line. Patches are type preserving: applying any emitted patch
//! yields a program that verifies.

mod arith;
mod conditionals;
pub mod edit;
mod guards;
mod references;
mod returns;
pub mod visible;

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use thiserror::Error;

use crate::ir::{
    subtype_of, ClassDef, Constant, FieldRef, Instruction, Label, LocalSlot, Location, MethodDef, MethodRef,
    Program, Scope, TypeTag,
};
use crate::verify::{verify_method, MethodFrames, VType};
pub use visible::{visible_locals, VisibleLocals};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MutatorId {
    AP,
    RV,
    CC,
    IS,
    IC,
    MV,
    SW,
    MC,
    IN,
    AO,
    CO,
    DG,
    MG,
    PC,
    FN,
    MN,
    AL,
    LV,
    AM,
    CB,
}

impl MutatorId {
    pub const ALL: [MutatorId; 20] = [
        MutatorId::AP,
        MutatorId::RV,
        MutatorId::CC,
        MutatorId::IS,
        MutatorId::IC,
        MutatorId::MV,
        MutatorId::SW,
        MutatorId::MC,
        MutatorId::IN,
        MutatorId::AO,
        MutatorId::CO,
        MutatorId::DG,
        MutatorId::MG,
        MutatorId::PC,
        MutatorId::FN,
        MutatorId::MN,
        MutatorId::AL,
        MutatorId::LV,
        MutatorId::AM,
        MutatorId::CB,
    ];

    pub const ORIGINAL: [MutatorId; 11] = [
        MutatorId::AP,
        MutatorId::RV,
        MutatorId::CC,
        MutatorId::IS,
        MutatorId::IC,
        MutatorId::MV,
        MutatorId::SW,
        MutatorId::MC,
        MutatorId::IN,
        MutatorId::AO,
        MutatorId::CO,
    ];

    pub fn code(self) -> &'static str {
        match self {
            MutatorId::AP => "AP",
            MutatorId::RV => "RV",
            MutatorId::CC => "CC",
            MutatorId::IS => "IS",
            MutatorId::IC => "IC",
            MutatorId::MV => "MV",
            MutatorId::SW => "SW",
            MutatorId::MC => "MC",
            MutatorId::IN => "IN",
            MutatorId::AO => "AO",
            MutatorId::CO => "CO",
            MutatorId::DG => "DG",
            MutatorId::MG => "MG",
            MutatorId::PC => "PC",
            MutatorId::FN => "FN",
            MutatorId::MN => "MN",
            MutatorId::AL => "AL",
            MutatorId::LV => "LV",
            MutatorId::AM => "AM",
            MutatorId::CB => "CB",
        }
    }

    /// Display name used in reports.
    pub fn name(self) -> &'static str {
        match self {
            MutatorId::AP => "ARGUMENT PROPAGATION",
            MutatorId::RV => "RETURN VALUE",
            MutatorId::CC => "CONSTRUCTOR CALL",
            MutatorId::IS => "INCREMENTS",
            MutatorId::IC => "INLINE CONSTANTS",
            MutatorId::MV => "MEMBER VARIABLE",
            MutatorId::SW => "SWITCH",
            MutatorId::MC => "METHOD CALL",
            MutatorId::IN => "INVERT NEGATIVES",
            MutatorId::AO => "ARITHMETIC OPERATOR",
            MutatorId::CO => "CONDITIONAL",
            MutatorId::DG => "DEREFERENCE GUARD",
            MutatorId::MG => "METHOD GUARD",
            MutatorId::PC => "PRE/POST- CONDITION",
            MutatorId::FN => "FIELD NAME",
            MutatorId::MN => "METHOD NAME",
            MutatorId::AL => "ARGUMENT LIST",
            MutatorId::LV => "LOCAL VARIABLE",
            MutatorId::AM => "ACCESSOR",
            MutatorId::CB => "CASE BREAKER",
        }
    }

    pub fn from_code(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.code() == s)
    }
}

impl fmt::Display for MutatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// Family emission order within a location.
const FAMILIES: [&[MutatorId]; 5] = [
    &[MutatorId::AO, MutatorId::IN, MutatorId::IS, MutatorId::IC],
    &[
        MutatorId::RV,
        MutatorId::MC,
        MutatorId::AP,
        MutatorId::CC,
        MutatorId::MV,
    ],
    &[MutatorId::CO, MutatorId::SW, MutatorId::CB],
    &[MutatorId::DG, MutatorId::MG, MutatorId::PC],
    &[
        MutatorId::FN,
        MutatorId::MN,
        MutatorId::AL,
        MutatorId::LV,
        MutatorId::AM,
    ],
];

/// A set of enabled mutators.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Mask(BTreeSet<MutatorId>);

impl Mask {
    pub fn all() -> Self {
        Mask(MutatorId::ALL.into_iter().collect())
    }

    pub fn original() -> Self {
        Mask(MutatorId::ORIGINAL.into_iter().collect())
    }

    pub fn only(ids: impl IntoIterator<Item = MutatorId>) -> Self {
        Mask(ids.into_iter().collect())
    }

    pub fn contains(&self, id: MutatorId) -> bool {
        self.0.contains(&id)
    }

    pub fn ids(&self) -> impl Iterator<Item = MutatorId> + '_ {
        self.0.iter().copied()
    }
}

impl Default for Mask {
    fn default() -> Self {
        Mask::all()
    }
}

impl fmt::Display for Mask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if *self == Mask::all() {
            return f.write_str("all");
        }
        if *self == Mask::original() {
            return f.write_str("original");
        }
        let codes: Vec<&str> = MutatorId::ALL
            .iter()
            .filter(|m| self.contains(**m))
            .map(|m| m.code())
            .collect();
        f.write_str(&codes.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown mutator `{0}` (expected `all`, `original` or a comma list of mutator ids)")]
pub struct MaskError(pub String);

impl FromStr for Mask {
    type Err = MaskError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "all" => Ok(Mask::all()),
            "original" => Ok(Mask::original()),
            list => {
                let mut ids = BTreeSet::new();
                for part in list.split(',') {
                    let code = part.trim().to_ascii_uppercase();
                    ids.insert(MutatorId::from_code(&code).ok_or_else(|| MaskError(part.to_string()))?);
                }
                Ok(Mask(ids))
            }
        }
    }
}

/// A single-point rewrite of one method.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidatePatch {
    pub mutator: MutatorId,
    pub location: Location,
    /// Replaced instruction indices of the original body.
    pub span: Range<usize>,
    pub replacement: Vec<Instruction>,
    /// Labels introduced by the replacement, as offsets into it
    /// (`replacement.len()` marks the instruction following it).
    pub labels: Vec<(String, usize)>,
    /// Types of fresh local slots appended to the method.
    pub temps: Vec<TypeTag>,
    pub description: String,
    /// Position among the patches of this mutator at this location.
    pub ordinal: usize,
}

impl CandidatePatch {
    /// Stable identifier, e.g. `Main.add(int,int)int:12:AO:3`.
    pub fn key(&self) -> String {
        format!("{}:{}:{}", self.location, self.mutator.code(), self.ordinal)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PatchError {
    #[error("patch targets unknown method `{0}`")]
    UnknownMethod(String),
    #[error("patch span {0:?} is out of range")]
    BadSpan(Range<usize>),
    #[error("label `{0}` points into the replaced span")]
    LabelInsideSpan(String),
    #[error("label `{0}` already exists")]
    DuplicateLabel(String),
}

/// Applies a patch, producing a new program.
pub fn apply(program: &Program, patch: &CandidatePatch) -> Result<Program, PatchError> {
    let mut out = program.clone();
    let key = patch.location.method_ref();
    let method = out
        .method_mut(&key)
        .ok_or_else(|| PatchError::UnknownMethod(key.to_string()))?;
    apply_to_method(method, patch)?;
    Ok(out)
}

pub fn apply_to_method(method: &mut MethodDef, patch: &CandidatePatch) -> Result<(), PatchError> {
    let Range { start: s, end: e } = patch.span.clone();
    if s > e || e > method.body.len() {
        return Err(PatchError::BadSpan(patch.span.clone()));
    }
    let len = patch.replacement.len();
    let mut labels = Vec::with_capacity(method.labels.len() + patch.labels.len());
    for l in &method.labels {
        let index = if l.index < s || (l.index == s && s < e) {
            l.index
        } else if l.index < e {
            return Err(PatchError::LabelInsideSpan(l.name.clone()));
        } else {
            l.index + len - (e - s)
        };
        labels.push(Label {
            name: l.name.clone(),
            index,
        });
    }
    for (name, off) in &patch.labels {
        if labels.iter().any(|l| &l.name == name) {
            return Err(PatchError::DuplicateLabel(name.clone()));
        }
        labels.push(Label {
            name: name.clone(),
            index: s + off,
        });
    }
    labels.sort_by_key(|l| l.index);
    method.labels = labels;
    method.body.splice(s..e, patch.replacement.iter().cloned());
    method
        .line_map
        .splice(s..e, std::iter::repeat_n(patch.location.line, len));
    for t in &patch.temps {
        let index = method.locals.len();
        method.locals.push(LocalSlot {
            index,
            name: format!("$t{index}"),
            ty: t.clone(),
            scope: Scope::Whole,
        });
    }
    Ok(())
}

/// A value a mutator can materialize on the stack.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Source {
    Default(Constant),
    Local { slot: usize, name: String },
    Field { field: FieldRef, is_static: bool },
}

impl Source {
    pub(crate) fn push(&self) -> Vec<Instruction> {
        match self {
            Source::Default(c) => vec![Instruction::Const(*c)],
            Source::Local { slot, .. } => vec![Instruction::Load(*slot)],
            Source::Field {
                field,
                is_static: true,
            } => vec![Instruction::GetStatic(field.clone())],
            Source::Field { field, .. } => {
                vec![Instruction::Load(0), Instruction::GetField(field.clone())]
            }
        }
    }

    pub(crate) fn describe(&self) -> String {
        match self {
            Source::Default(c) => c.to_string(),
            Source::Local { name, .. } => name.clone(),
            Source::Field {
                field,
                is_static: true,
            } => format!("{}.{}", field.class, field.name),
            Source::Field { field, .. } => format!("this.{}", field.name),
        }
    }
}

/// How a candidate value's type must relate to the target type.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Fit {
    Subtype,
    Identical,
}

/// Per-method facts shared by all mutators.
pub(crate) struct MethodFacts {
    frames: MethodFrames,
    visible: VisibleLocals,
}

/// Everything a mutator needs to rewrite one instruction.
pub(crate) struct Site<'a> {
    pub program: &'a Program,
    pub class: &'a ClassDef,
    pub method: &'a MethodDef,
    pub frames: &'a MethodFrames,
    pub visible: &'a VisibleLocals,
    pub location: &'a Location,
    pub excluded: &'a HashSet<MethodRef>,
    label_prefix: String,
}

/// A patch before its location and ordinal are attached.
pub(crate) struct Draft {
    pub mutator: MutatorId,
    pub span: Range<usize>,
    pub replacement: Vec<Instruction>,
    pub labels: Vec<(String, usize)>,
    pub temps: Vec<TypeTag>,
    pub description: String,
}

impl Draft {
    pub(crate) fn new(
        mutator: MutatorId,
        span: Range<usize>,
        replacement: Vec<Instruction>,
        description: impl Into<String>,
    ) -> Self {
        Draft {
            mutator,
            span,
            replacement,
            labels: Vec::new(),
            temps: Vec::new(),
            description: description.into(),
        }
    }

    pub(crate) fn with_labels(mut self, labels: Vec<(String, usize)>) -> Self {
        self.labels = labels;
        self
    }

    pub(crate) fn with_temps(mut self, temps: Vec<TypeTag>) -> Self {
        self.temps = temps;
        self
    }
}

impl<'a> Site<'a> {
    pub(crate) fn label(&self, k: usize) -> String {
        format!("{}{k}", self.label_prefix)
    }

    pub(crate) fn stack(&self, i: usize) -> &[VType] {
        self.frames.stack_at(i).unwrap_or(&[])
    }

    pub(crate) fn ret(&self) -> &TypeTag {
        &self.method.descriptor.ret
    }

    /// First fresh local slot index.
    pub(crate) fn temp_base(&self) -> usize {
        self.method.locals.len()
    }

    pub(crate) fn subtype(&self, a: &TypeTag, b: &TypeTag) -> bool {
        subtype_of(a, b, self.program).unwrap_or(false)
    }

    fn fits(&self, have: &TypeTag, want: &TypeTag, fit: Fit) -> bool {
        match fit {
            Fit::Subtype => self.subtype(have, want),
            Fit::Identical => have == want,
        }
    }

    /// Whether `[s, e)` can be replaced as a unit: all reachable, on the
    /// location's line, with no label pointing strictly inside.
    pub(crate) fn span_ok(&self, s: usize, e: usize) -> bool {
        e <= self.method.body.len()
            && (s..e).all(|k| self.frames.is_reachable(k) && self.method.line_map[k] == self.location.line)
            && !self.method.labels.iter().any(|l| s < l.index && l.index < e)
    }

    /// Visible local slots at `i` whose type fits `want`, sorted by name.
    pub(crate) fn locals_fitting(&self, i: usize, want: &TypeTag, fit: Fit) -> Vec<&'a LocalSlot> {
        let mut out: Vec<&LocalSlot> = self
            .visible
            .at(i)
            .filter_map(|slot| self.method.locals.get(slot))
            .filter(|l| self.fits(&l.ty, want, fit))
            .collect();
        out.sort_by(|a, b| (&a.name, a.index).cmp(&(&b.name, b.index)));
        out
    }

    /// Fields of the enclosing class readable here whose type fits `want`,
    /// sorted by name. Instance fields need a `this`.
    pub(crate) fn fields_fitting(&self, want: &TypeTag, fit: Fit) -> Vec<Source> {
        let mut fields: Vec<_> = self
            .class
            .fields
            .iter()
            .filter(|f| f.is_static || !self.method.is_static)
            .filter(|f| self.fits(&f.ty, want, fit))
            .collect();
        fields.sort_by(|a, b| a.name.cmp(&b.name));
        fields
            .into_iter()
            .map(|f| Source::Field {
                field: FieldRef {
                    class: self.class.name.clone(),
                    name: f.name.clone(),
                    ty: f.ty.clone(),
                },
                is_static: f.is_static,
            })
            .collect()
    }

    /// Default value, then visible locals, then fields, each fitting `want`.
    pub(crate) fn values(&self, i: usize, want: &TypeTag, fit: Fit) -> Vec<Source> {
        let mut out = Vec::new();
        if let Some(c) = Constant::default_for(want) {
            out.push(Source::Default(c));
        }
        out.extend(
            self.locals_fitting(i, want, fit)
                .into_iter()
                .map(|l| Source::Local {
                    slot: l.index,
                    name: l.name.clone(),
                }),
        );
        out.extend(self.fields_fitting(want, fit));
        out
    }

    /// Instructions that leave the method early with `v`, or a plain return
    /// in void methods.
    pub(crate) fn early_returns(&self, i: usize) -> Vec<(Vec<Instruction>, String)> {
        let ret = self.ret().clone();
        if ret == TypeTag::Void {
            return vec![(vec![Instruction::Return(TypeTag::Void)], "return".into())];
        }
        self.values(i, &ret, Fit::Subtype)
            .into_iter()
            .map(|v| {
                let mut code = v.push();
                code.push(Instruction::Return(ret.clone()));
                (code, format!("return {}", v.describe()))
            })
            .collect()
    }

    pub(crate) fn callable(&self, m: &MethodRef) -> bool {
        !self.excluded.contains(m)
    }
}

fn label_prefix(method: &MethodDef) -> String {
    let mut p = String::from("_m");
    while method.labels.iter().any(|l| l.name.starts_with(&p)) {
        p.push('m');
    }
    p
}

type Rule = fn(&Site<'_>, usize, &mut Vec<Draft>);

fn rule(id: MutatorId) -> Rule {
    match id {
        MutatorId::AO => arith::ao,
        MutatorId::IN => arith::invert_negatives,
        MutatorId::IS => arith::increments,
        MutatorId::IC => arith::inline_constants,
        MutatorId::RV => returns::return_value,
        MutatorId::MC => returns::method_call,
        MutatorId::AP => returns::argument_propagation,
        MutatorId::CC => returns::constructor_call,
        MutatorId::MV => returns::member_variable,
        MutatorId::CO => conditionals::conditional,
        MutatorId::SW => conditionals::switch,
        MutatorId::CB => conditionals::case_breaker,
        MutatorId::DG => guards::dereference_guard,
        MutatorId::MG => guards::method_guard,
        MutatorId::PC => guards::pre_post_condition,
        MutatorId::FN => references::field_name,
        MutatorId::MN => references::method_name,
        MutatorId::AL => references::argument_list,
        MutatorId::LV => references::local_variable,
        MutatorId::AM => references::accessor,
    }
}

/// Candidate generator with per-method analysis caching.
pub struct Generator<'a> {
    program: &'a Program,
    mask: Mask,
    excluded: HashSet<MethodRef>,
    facts: HashMap<MethodRef, Option<MethodFacts>>,
}

impl<'a> Generator<'a> {
    /// `excluded` methods are never mutated nor introduced as call targets.
    pub fn new(program: &'a Program, mask: Mask, excluded: HashSet<MethodRef>) -> Self {
        Generator {
            program,
            mask,
            excluded,
            facts: HashMap::new(),
        }
    }

    /// All patches at one location in family, index, rule, target order.
    pub fn at(&mut self, location: &Location) -> Vec<CandidatePatch> {
        let key = location.method_ref();
        if self.excluded.contains(&key) {
            return Vec::new();
        }
        let program = self.program;
        let Some(class) = program.class(&location.class) else {
            return Vec::new();
        };
        let Some(method) = class.method(&location.method, &location.descriptor) else {
            return Vec::new();
        };
        let facts = self.facts.entry(key).or_insert_with(|| {
            let frames = verify_method(program, class, method).ok()?;
            let visible = visible_locals(method, &frames);
            Some(MethodFacts { frames, visible })
        });
        let Some(facts) = facts.as_ref() else {
            return Vec::new();
        };
        let site = Site {
            program,
            class,
            method,
            frames: &facts.frames,
            visible: &facts.visible,
            location,
            excluded: &self.excluded,
            label_prefix: label_prefix(method),
        };
        let indices: Vec<usize> = method
            .indices_at_line(location.line)
            .into_iter()
            .filter(|&i| facts.frames.is_reachable(i))
            .collect();
        let mut drafts = Vec::new();
        for family in FAMILIES {
            for &i in &indices {
                for &id in family {
                    if self.mask.contains(id) {
                        rule(id)(&site, i, &mut drafts);
                    }
                }
            }
        }
        let mut counts: HashMap<MutatorId, usize> = HashMap::new();
        drafts
            .into_iter()
            .map(|d| {
                let n = counts.entry(d.mutator).or_default();
                let ordinal = *n;
                *n += 1;
                CandidatePatch {
                    mutator: d.mutator,
                    location: location.clone(),
                    span: d.span,
                    replacement: d.replacement,
                    labels: d.labels,
                    temps: d.temps,
                    description: d.description,
                    ordinal,
                }
            })
            .collect()
    }
}

/// Concatenates the patches of every location, in the given order.
pub fn generate_candidates<'l>(
    program: &Program,
    locations: impl IntoIterator<Item = &'l Location>,
    mask: &Mask,
    excluded: &HashSet<MethodRef>,
) -> Vec<CandidatePatch> {
    let mut g = Generator::new(program, mask.clone(), excluded.clone());
    locations.into_iter().flat_map(|l| g.at(l)).collect()
}

/// Every location of every method outside `excluded`, in program order.
pub fn all_locations(program: &Program, excluded: &HashSet<MethodRef>) -> Vec<Location> {
    let mut out = Vec::new();
    for c in &program.classes {
        for m in &c.methods {
            if excluded.contains(&m.key(&c.name)) {
                continue;
            }
            let lines: BTreeSet<u32> = m.line_map.iter().copied().collect();
            out.extend(lines.into_iter().map(|line| Location {
                class: c.name.clone(),
                method: m.name.clone(),
                descriptor: m.descriptor.clone(),
                line,
            }));
        }
    }
    out
}
