//! Visible-locals analysis.
//!
//! A forward gen/kill dataflow pass: a label-scoped slot is generated at its
//! scope-start instruction and killed wherever control leaves its declared
//! interval. Parameters, `this`, and whole-body slots are visible everywhere.

use std::collections::{BTreeSet, VecDeque};

use crate::ir::{MethodDef, Scope};
use crate::verify::MethodFrames;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VisibleLocals {
    per_index: Vec<BTreeSet<usize>>,
}

impl VisibleLocals {
    /// Visible slot indices at instruction `i`, ascending.
    pub fn at(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.per_index.get(i).into_iter().flatten().copied()
    }

    pub fn contains(&self, i: usize, slot: usize) -> bool {
        self.per_index.get(i).is_some_and(|s| s.contains(&slot))
    }
}

pub fn visible_locals(method: &MethodDef, frames: &MethodFrames) -> VisibleLocals {
    let n = method.body.len();
    let mut always = BTreeSet::new();
    let mut scoped = Vec::new();
    for slot in &method.locals {
        match (&slot.scope, slot.index < method.arg_slots()) {
            (Scope::Whole, _) | (_, true) => {
                always.insert(slot.index);
            }
            (Scope::Labels { .. }, false) => {
                if let Some((s, e)) = method.scope_range(slot) {
                    scoped.push((slot.index, s, e));
                }
            }
        }
    }
    let inside = |i: usize, s: usize, e: usize| s <= i && i < e;

    let mut flow: Vec<Option<BTreeSet<usize>>> = vec![None; n];
    let mut work = VecDeque::new();
    if n > 0 {
        work.push_back((0usize, BTreeSet::new()));
    }
    while let Some((i, incoming)) = work.pop_front() {
        let mut vis: BTreeSet<usize> = incoming;
        for &(slot, s, _) in &scoped {
            if s == i {
                vis.insert(slot);
            }
        }
        vis.retain(|slot| scoped.iter().any(|&(x, s, e)| x == *slot && inside(i, s, e)));
        let changed = match &mut flow[i] {
            Some(old) => {
                let before = old.len();
                old.extend(vis.iter().copied());
                old.len() != before
            }
            slot @ None => {
                *slot = Some(vis);
                true
            }
        };
        if !changed {
            continue;
        }
        let out = flow[i].clone().unwrap_or_default();
        let ins = &method.body[i];
        for t in ins.jump_targets() {
            if let Some(j) = method.label_index(t).filter(|&j| j < n) {
                work.push_back((j, out.clone()));
            }
        }
        if !ins.is_terminator() && i + 1 < n {
            work.push_back((i + 1, out));
        }
    }

    let per_index = (0..n)
        .map(|i| {
            let mut v = always.clone();
            if frames.is_reachable(i) {
                v.extend(flow[i].iter().flatten().copied());
            }
            v
        })
        .collect();
    VisibleLocals { per_index }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::asm::parse;
    use crate::verify::verify_method;

    const SRC: &str = "\
.class Main
.method int pick(int)
  .local 0 this Main
  .local 1 k int
  .local 2 t int THEN ENDT
  .local 3 e int ELSE END
  .local 4 w int
  load 1
  const int 0
  cmp gt
  jmpif THEN
ELSE:
  const int 2
  store 3
  load 3
  return int
END:
THEN:
  const int 1
  store 2
  load 2
ENDT:
  return int
.end
";

    fn analyse() -> (MethodDef, VisibleLocals) {
        let u = parse(SRC).unwrap();
        let c = &u.program.classes[0];
        let m = &c.methods[0];
        let frames = verify_method(&u.program, c, m).unwrap();
        (m.clone(), visible_locals(m, &frames))
    }

    #[test]
    fn params_and_whole_scopes_everywhere() {
        let (m, v) = analyse();
        for i in 0..m.body.len() {
            assert!(v.contains(i, 0) && v.contains(i, 1) && v.contains(i, 4));
        }
    }

    #[test]
    fn matches_interval_oracle() {
        let (m, v) = analyse();
        for slot in m.locals.iter().skip(m.arg_slots()) {
            let (s, e) = m.scope_range(slot).unwrap();
            for i in 0..m.body.len() {
                assert_eq!(
                    v.contains(i, slot.index),
                    s <= i && i < e,
                    "slot {} at {i}",
                    slot.name
                );
            }
        }
    }
}
