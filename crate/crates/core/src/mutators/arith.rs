//! AO, IN, IS and IC.

use super::{Draft, MutatorId, Site};
use crate::ir::{ArithOp, Constant, Instruction};

fn op_name(op: ArithOp) -> &'static str {
    match op {
        ArithOp::Add => "addition",
        ArithOp::Sub => "subtraction",
        ArithOp::Mul => "multiplication",
        ArithOp::Div => "division",
        ArithOp::Rem => "modulus",
        ArithOp::Shl => "shift left",
        ArithOp::Shr => "shift right",
        ArithOp::Ushr => "unsigned shift right",
        ArithOp::And => "bitwise AND",
        ArithOp::Or => "bitwise OR",
        ArithOp::Xor => "bitwise XOR",
    }
}

pub(super) fn ao(site: &Site<'_>, i: usize, out: &mut Vec<Draft>) {
    let Instruction::Arith(op) = site.method.body[i] else {
        return;
    };
    for other in ArithOp::ALL.into_iter().filter(|&o| o != op) {
        out.push(Draft::new(
            MutatorId::AO,
            i..i + 1,
            vec![Instruction::Arith(other)],
            format!("replaced integer {} with {}", op_name(op), op_name(other)),
        ));
    }
    out.push(Draft::new(
        MutatorId::AO,
        i..i + 1,
        vec![Instruction::Pop],
        format!("deleted second operand of integer {}", op_name(op)),
    ));
    out.push(Draft::new(
        MutatorId::AO,
        i..i + 1,
        vec![Instruction::Swap, Instruction::Pop],
        format!("deleted first operand of integer {}", op_name(op)),
    ));
}

pub(super) fn invert_negatives(site: &Site<'_>, i: usize, out: &mut Vec<Draft>) {
    if site.method.body[i] == Instruction::Neg {
        out.push(Draft::new(
            MutatorId::IN,
            i..i + 1,
            vec![],
            "removed integer negation",
        ));
    }
}

pub(super) fn increments(site: &Site<'_>, i: usize, out: &mut Vec<Draft>) {
    let Instruction::Inc(slot, d) = site.method.body[i] else {
        return;
    };
    let flipped = d.wrapping_neg();
    if flipped != d {
        out.push(Draft::new(
            MutatorId::IS,
            i..i + 1,
            vec![Instruction::Inc(slot, flipped)],
            format!("changed increment from {d} to {flipped}"),
        ));
    }
    out.push(Draft::new(MutatorId::IS, i..i + 1, vec![], "removed increment"));
}

pub(super) fn inline_constants(site: &Site<'_>, i: usize, out: &mut Vec<Draft>) {
    let Instruction::Const(Constant::Int(n)) = site.method.body[i] else {
        return;
    };
    let mut seen = vec![n];
    for m in [0, 1, -1, n.wrapping_add(1), n.wrapping_sub(1), n.wrapping_neg()] {
        if seen.contains(&m) {
            continue;
        }
        seen.push(m);
        out.push(Draft::new(
            MutatorId::IC,
            i..i + 1,
            vec![Instruction::Const(Constant::Int(m))],
            format!("replaced inline constant {n} with {m}"),
        ));
    }
}
