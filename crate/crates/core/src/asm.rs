// SPDX-License-Identifier: Apache-2.0

//! Two-pass assembler for the RV32IM subset the cores execute.
//!
//! Accepted syntax: one statement per line, `label:` prefixes, `#` comments,
//! the `.org` and `.word` directives, all real mnemonics, and the common
//! pseudo-instructions (`li`, `la`, `mv`, `j`, `ret`, `beqz`, `csrr`, ...).
//! Numeric branch and jump operands are pc-relative byte offsets.

use std::collections::HashMap;

use thiserror::Error;

use crate::cpu::Csr;
use crate::isa::{self, AluOp, BranchOp, CsrOp, CsrSrc, Instr, LoadOp, MulOp, Reg, StoreOp};
use crate::map::IMEM_BASE;
use crate::program::ProgramImage;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AsmErrorKind {
    #[error("unknown mnemonic `{0}`")]
    UnknownMnemonic(String),
    #[error("undefined label `{0}`")]
    UndefinedLabel(String),
    #[error("value {value} out of range for {what}")]
    RangeError { what: &'static str, value: i64 },
    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),
    #[error("{0}")]
    Syntax(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}: {kind}")]
pub struct AsmError {
    pub line: usize,
    pub kind: AsmErrorKind,
}

type Result<T> = std::result::Result<T, AsmErrorKind>;

fn syntax<T>(msg: impl Into<String>) -> Result<T> {
    Err(AsmErrorKind::Syntax(msg.into()))
}

#[derive(Debug)]
enum Stmt {
    Org(u32),
    Word(Vec<String>),
    Instr { mnemonic: String, operands: Vec<String> },
}

struct Line {
    number: usize,
    addr: u32,
    stmt: Stmt,
}

/// Assembles `source` into an image loaded at the first `.org` (or the start
/// of instruction memory). The entry point is `_start` when defined.
pub fn assemble(source: &str) -> std::result::Result<ProgramImage, AsmError> {
    let mut labels: HashMap<String, u32> = HashMap::new();
    let mut order: Vec<(String, u32)> = Vec::new();
    let mut lines = Vec::new();
    let mut load_addr: Option<u32> = None;
    let mut pc = IMEM_BASE;

    for (i, raw) in source.lines().enumerate() {
        let number = i + 1;
        let err = |kind| AsmError { line: number, kind };
        let mut text = raw.split('#').next().unwrap().trim();
        while let Some(colon) = label_prefix(text) {
            let name = text[..colon].trim();
            if labels.insert(name.to_string(), pc).is_some() {
                return Err(err(AsmErrorKind::DuplicateLabel(name.to_string())));
            }
            order.push((name.to_string(), pc));
            text = text[colon + 1..].trim();
        }
        if text.is_empty() {
            continue;
        }
        let stmt = parse_stmt(text).map_err(err)?;
        let size = match &stmt {
            Stmt::Org(addr) => {
                if load_addr.is_none() && lines.is_empty() {
                    load_addr = Some(*addr);
                } else if *addr < pc {
                    return Err(err(AsmErrorKind::Syntax(format!(
                        ".org {addr:#x} moves backwards from {pc:#x}"
                    ))));
                }
                // labels on the .org line refer to the new location
                for (name, at) in order.iter_mut().rev() {
                    if *at != pc {
                        break;
                    }
                    *at = *addr;
                    labels.insert(name.clone(), *addr);
                }
                pc = *addr;
                0
            }
            Stmt::Word(values) => 4 * values.len() as u32,
            Stmt::Instr { mnemonic, operands } => 4 * instr_size(mnemonic, operands).map_err(err)?,
        };
        lines.push(Line { number, addr: pc, stmt });
        pc += size;
    }

    let load_addr = load_addr.unwrap_or(IMEM_BASE);
    let mut words: Vec<u32> = Vec::new();
    for line in &lines {
        let err = |kind| AsmError { line: line.number, kind };
        let emit_at = |words: &mut Vec<u32>, addr: u32| {
            let index = ((addr - load_addr) / 4) as usize;
            if words.len() < index {
                words.resize(index, 0);
            }
        };
        match &line.stmt {
            Stmt::Org(addr) => emit_at(&mut words, *addr),
            Stmt::Word(values) => {
                emit_at(&mut words, line.addr);
                for v in values {
                    words.push(value(v, &labels).map_err(err)? as u32);
                }
            }
            Stmt::Instr { mnemonic, operands } => {
                emit_at(&mut words, line.addr);
                let ctx = Ctx { pc: line.addr, labels: &labels };
                for instr in expand(mnemonic, operands, &ctx).map_err(err)? {
                    words.push(isa::encode(&instr));
                }
            }
        }
    }

    let entry = labels.get("_start").copied().unwrap_or(load_addr);
    Ok(ProgramImage { words, load_addr, entry, symbols: order, ..Default::default() })
}

fn label_prefix(text: &str) -> Option<usize> {
    let colon = text.find(':')?;
    let name = &text[..colon];
    let valid = !name.is_empty()
        && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
        && !name.starts_with(|c: char| c.is_ascii_digit());
    valid.then_some(colon)
}

fn parse_stmt(text: &str) -> Result<Stmt> {
    let (head, rest) = match text.find(char::is_whitespace) {
        Some(i) => (&text[..i], text[i..].trim()),
        None => (text, ""),
    };
    let operands: Vec<String> = if rest.is_empty() {
        Vec::new()
    } else {
        rest.split(',').map(|s| s.trim().to_string()).collect()
    };
    match head {
        ".org" => match operands.as_slice() {
            [addr] => Ok(Stmt::Org(parse_int(addr)? as u32)),
            _ => syntax(".org takes one address"),
        },
        ".word" if !operands.is_empty() => Ok(Stmt::Word(operands)),
        ".word" => syntax(".word needs at least one value"),
        d if d.starts_with('.') => syntax(format!("unsupported directive `{d}`")),
        m => Ok(Stmt::Instr { mnemonic: m.to_ascii_lowercase(), operands }),
    }
}

fn parse_int(text: &str) -> Result<i64> {
    let t = text.trim();
    let (neg, body) = match t.strip_prefix('-') {
        Some(b) => (true, b),
        None => (false, t.strip_prefix('+').unwrap_or(t)),
    };
    let parsed = if let Some(hex) = body.strip_prefix("0x").or_else(|| body.strip_prefix("0X")) {
        i64::from_str_radix(&hex.replace('_', ""), 16)
    } else if let Some(bin) = body.strip_prefix("0b") {
        i64::from_str_radix(&bin.replace('_', ""), 2)
    } else {
        body.replace('_', "").parse::<i64>()
    };
    match parsed {
        Ok(v) => Ok(if neg { -v } else { v }),
        Err(_) => syntax(format!("expected a number, found `{t}`")),
    }
}

fn is_number(text: &str) -> bool {
    text.trim().trim_start_matches(['-', '+']).starts_with(|c: char| c.is_ascii_digit())
}

fn value(text: &str, labels: &HashMap<String, u32>) -> Result<i64> {
    if is_number(text) {
        parse_int(text)
    } else {
        labels
            .get(text.trim())
            .map(|a| *a as i64)
            .ok_or_else(|| AsmErrorKind::UndefinedLabel(text.trim().to_string()))
    }
}

fn fits_signed(v: i64, bits: u32) -> bool {
    let lim = 1i64 << (bits - 1);
    (-lim..lim).contains(&v)
}

/// Number of machine instructions a statement expands to; must agree with
/// [`expand`].
fn instr_size(mnemonic: &str, operands: &[String]) -> Result<u32> {
    match mnemonic {
        "li" => {
            let [_, imm] = operands else { return syntax("li takes rd, imm") };
            if !is_number(imm) {
                return syntax("li needs a numeric immediate; use la for labels");
            }
            let v = parse_int(imm)?;
            if !(i32::MIN as i64..=u32::MAX as i64).contains(&v) {
                return Err(AsmErrorKind::RangeError { what: "li immediate", value: v });
            }
            let v = v as u32 as i32 as i64;
            Ok(if fits_signed(v, 12) || v & 0xfff == 0 { 1 } else { 2 })
        }
        "la" => Ok(2),
        _ => Ok(1),
    }
}

struct Ctx<'a> {
    pc: u32,
    labels: &'a HashMap<String, u32>,
}

impl Ctx<'_> {
    /// Branch or jump operand: a label, or a numeric pc-relative offset.
    fn target(&self, text: &str, bits: u32, what: &'static str) -> Result<i32> {
        let offset = if is_number(text) {
            parse_int(text)?
        } else {
            value(text, self.labels)? - self.pc as i64
        };
        if offset % 2 != 0 || !fits_signed(offset, bits) {
            return Err(AsmErrorKind::RangeError { what, value: offset });
        }
        Ok(offset as i32)
    }
}

fn reg(text: &str) -> Result<Reg> {
    Reg::parse(text).ok_or_else(|| AsmErrorKind::Syntax(format!("bad register `{text}`")))
}

fn imm12(text: &str, labels: &HashMap<String, u32>) -> Result<i32> {
    let v = value(text, labels)?;
    if !fits_signed(v, 12) {
        return Err(AsmErrorKind::RangeError { what: "12-bit immediate", value: v });
    }
    Ok(v as i32)
}

fn shamt(text: &str) -> Result<i32> {
    let v = parse_int(text)?;
    if !(0..32).contains(&v) {
        return Err(AsmErrorKind::RangeError { what: "shift amount", value: v });
    }
    Ok(v as i32)
}

/// `offset(base)` memory operand.
fn mem_operand(text: &str, labels: &HashMap<String, u32>) -> Result<(i32, Reg)> {
    let open = text.find('(').ok_or_else(|| AsmErrorKind::Syntax(format!("expected offset(reg), found `{text}`")))?;
    let close = text.rfind(')').ok_or_else(|| AsmErrorKind::Syntax(format!("unclosed `(` in `{text}`")))?;
    let offset_text = text[..open].trim();
    let offset = if offset_text.is_empty() { 0 } else { imm12(offset_text, labels)? };
    Ok((offset, reg(&text[open + 1..close])?))
}

fn csr_number(text: &str) -> Result<u16> {
    if let Some(csr) = Csr::from_name(text.trim()) {
        return Ok(csr.number());
    }
    let v = parse_int(text)?;
    if !(0..4096).contains(&v) {
        return Err(AsmErrorKind::RangeError { what: "CSR number", value: v });
    }
    Ok(v as u16)
}

fn csr_imm(text: &str) -> Result<u8> {
    let v = parse_int(text)?;
    if !(0..32).contains(&v) {
        return Err(AsmErrorKind::RangeError { what: "CSR immediate", value: v });
    }
    Ok(v as u8)
}

fn upper(text: &str, labels: &HashMap<String, u32>) -> Result<u32> {
    let v = value(text, labels)?;
    if !(0..=0xfffff).contains(&v) {
        return Err(AsmErrorKind::RangeError { what: "20-bit upper immediate", value: v });
    }
    Ok((v as u32) << 12)
}

/// Splits a 32-bit constant into `lui`/`addi` parts.
fn hi_lo(v: u32) -> (u32, i32) {
    let lo = ((v & 0xfff) as i32) << 20 >> 20;
    let hi = v.wrapping_sub(lo as u32) & 0xffff_f000;
    (hi, lo)
}

fn alu_op(m: &str) -> Option<(AluOp, bool)> {
    Some(match m {
        "add" => (AluOp::Add, false),
        "sub" => (AluOp::Sub, false),
        "sll" => (AluOp::Sll, false),
        "slt" => (AluOp::Slt, false),
        "sltu" => (AluOp::Sltu, false),
        "xor" => (AluOp::Xor, false),
        "srl" => (AluOp::Srl, false),
        "sra" => (AluOp::Sra, false),
        "or" => (AluOp::Or, false),
        "and" => (AluOp::And, false),
        "addi" => (AluOp::Add, true),
        "slti" => (AluOp::Slt, true),
        "sltiu" => (AluOp::Sltu, true),
        "xori" => (AluOp::Xor, true),
        "ori" => (AluOp::Or, true),
        "andi" => (AluOp::And, true),
        "slli" => (AluOp::Sll, true),
        "srli" => (AluOp::Srl, true),
        "srai" => (AluOp::Sra, true),
        _ => return None,
    })
}

fn mul_op(m: &str) -> Option<MulOp> {
    Some(match m {
        "mul" => MulOp::Mul,
        "mulh" => MulOp::Mulh,
        "mulhsu" => MulOp::Mulhsu,
        "mulhu" => MulOp::Mulhu,
        "div" => MulOp::Div,
        "divu" => MulOp::Divu,
        "rem" => MulOp::Rem,
        "remu" => MulOp::Remu,
        _ => return None,
    })
}

fn branch_op(m: &str) -> Option<BranchOp> {
    Some(match m {
        "beq" => BranchOp::Beq,
        "bne" => BranchOp::Bne,
        "blt" => BranchOp::Blt,
        "bge" => BranchOp::Bge,
        "bltu" => BranchOp::Bltu,
        "bgeu" => BranchOp::Bgeu,
        _ => return None,
    })
}

fn load_op(m: &str) -> Option<LoadOp> {
    Some(match m {
        "lb" => LoadOp::Lb,
        "lh" => LoadOp::Lh,
        "lw" => LoadOp::Lw,
        "lbu" => LoadOp::Lbu,
        "lhu" => LoadOp::Lhu,
        _ => return None,
    })
}

fn store_op(m: &str) -> Option<StoreOp> {
    Some(match m {
        "sb" => StoreOp::Sb,
        "sh" => StoreOp::Sh,
        "sw" => StoreOp::Sw,
        _ => return None,
    })
}

fn csr_op(m: &str) -> Option<(CsrOp, bool)> {
    Some(match m {
        "csrrw" => (CsrOp::Rw, false),
        "csrrs" => (CsrOp::Rs, false),
        "csrrc" => (CsrOp::Rc, false),
        "csrrwi" => (CsrOp::Rw, true),
        "csrrsi" => (CsrOp::Rs, true),
        "csrrci" => (CsrOp::Rc, true),
        _ => return None,
    })
}

fn expect_n<'a>(ops: &'a [String], n: usize, m: &str) -> Result<&'a [String]> {
    if ops.len() != n {
        return syntax(format!("`{m}` takes {n} operand(s), found {}", ops.len()));
    }
    Ok(ops)
}

fn expand(m: &str, ops: &[String], ctx: &Ctx) -> Result<Vec<Instr>> {
    let labels = ctx.labels;
    let addi = |rd, rs1, imm| Instr::OpImm { op: AluOp::Add, rd, rs1, imm };
    let jal = |rd, offset| Instr::Jal { rd, offset };
    let branch = |op, rs1, rs2, t: &str| -> Result<Instr> {
        Ok(Instr::Branch { op, rs1, rs2, offset: ctx.target(t, 13, "branch offset")? })
    };

    if let Some((op, imm)) = alu_op(m) {
        let o = expect_n(ops, 3, m)?;
        let (rd, rs1) = (reg(&o[0])?, reg(&o[1])?);
        return Ok(vec![if imm {
            let imm = match op {
                AluOp::Sll | AluOp::Srl | AluOp::Sra => shamt(&o[2])?,
                _ => imm12(&o[2], labels)?,
            };
            Instr::OpImm { op, rd, rs1, imm }
        } else {
            Instr::Op { op, rd, rs1, rs2: reg(&o[2])? }
        }]);
    }
    if let Some(op) = mul_op(m) {
        let o = expect_n(ops, 3, m)?;
        return Ok(vec![Instr::MulDiv { op, rd: reg(&o[0])?, rs1: reg(&o[1])?, rs2: reg(&o[2])? }]);
    }
    if let Some(op) = branch_op(m) {
        let o = expect_n(ops, 3, m)?;
        return Ok(vec![branch(op, reg(&o[0])?, reg(&o[1])?, &o[2])?]);
    }
    if let Some(op) = load_op(m) {
        let o = expect_n(ops, 2, m)?;
        let (offset, rs1) = mem_operand(&o[1], labels)?;
        return Ok(vec![Instr::Load { op, rd: reg(&o[0])?, rs1, offset }]);
    }
    if let Some(op) = store_op(m) {
        let o = expect_n(ops, 2, m)?;
        let (offset, rs1) = mem_operand(&o[1], labels)?;
        return Ok(vec![Instr::Store { op, rs1, rs2: reg(&o[0])?, offset }]);
    }
    if let Some((op, imm)) = csr_op(m) {
        let o = expect_n(ops, 3, m)?;
        let src = if imm { CsrSrc::Imm(csr_imm(&o[2])?) } else { CsrSrc::Reg(reg(&o[2])?) };
        return Ok(vec![Instr::Csr { op, rd: reg(&o[0])?, src, csr: csr_number(&o[1])? }]);
    }

    let one = |i: Instr| Ok(vec![i]);
    match m {
        "lui" | "auipc" => {
            let o = expect_n(ops, 2, m)?;
            let (rd, imm) = (reg(&o[0])?, upper(&o[1], labels)?);
            one(if m == "lui" { Instr::Lui { rd, imm } } else { Instr::Auipc { rd, imm } })
        }
        "jal" => match ops {
            [t] => one(jal(Reg::RA, ctx.target(t, 21, "jump offset")?)),
            [rd, t] => one(jal(reg(rd)?, ctx.target(t, 21, "jump offset")?)),
            _ => syntax("jal takes [rd,] target"),
        },
        "jalr" => match ops {
            [rs1] => one(Instr::Jalr { rd: Reg::RA, rs1: reg(rs1)?, offset: 0 }),
            [rd, mem] if mem.contains('(') => {
                let (offset, rs1) = mem_operand(mem, labels)?;
                one(Instr::Jalr { rd: reg(rd)?, rs1, offset })
            }
            [rd, rs1, off] => {
                one(Instr::Jalr { rd: reg(rd)?, rs1: reg(rs1)?, offset: imm12(off, labels)? })
            }
            _ => syntax("jalr takes rd, offset(rs1)"),
        },
        "fence" => one(Instr::Fence),
        "ecall" => one(Instr::Ecall),
        "ebreak" => one(Instr::Ebreak),
        "mret" => one(Instr::Mret),
        "wfi" => one(Instr::Wfi),
        "nop" => one(addi(Reg::ZERO, Reg::ZERO, 0)),
        "li" => {
            let o = expect_n(ops, 2, m)?;
            let rd = reg(&o[0])?;
            let v = parse_int(&o[1])? as u32;
            let (hi, lo) = hi_lo(v);
            if fits_signed(v as i32 as i64, 12) {
                one(addi(rd, Reg::ZERO, v as i32))
            } else if lo == 0 {
                one(Instr::Lui { rd, imm: hi })
            } else {
                Ok(vec![Instr::Lui { rd, imm: hi }, addi(rd, rd, lo)])
            }
        }
        "la" => {
            let o = expect_n(ops, 2, m)?;
            let rd = reg(&o[0])?;
            let (hi, lo) = hi_lo(value(&o[1], labels)? as u32);
            Ok(vec![Instr::Lui { rd, imm: hi }, addi(rd, rd, lo)])
        }
        "mv" => {
            let o = expect_n(ops, 2, m)?;
            one(addi(reg(&o[0])?, reg(&o[1])?, 0))
        }
        "not" => {
            let o = expect_n(ops, 2, m)?;
            one(Instr::OpImm { op: AluOp::Xor, rd: reg(&o[0])?, rs1: reg(&o[1])?, imm: -1 })
        }
        "neg" => {
            let o = expect_n(ops, 2, m)?;
            one(Instr::Op { op: AluOp::Sub, rd: reg(&o[0])?, rs1: Reg::ZERO, rs2: reg(&o[1])? })
        }
        "seqz" => {
            let o = expect_n(ops, 2, m)?;
            one(Instr::OpImm { op: AluOp::Sltu, rd: reg(&o[0])?, rs1: reg(&o[1])?, imm: 1 })
        }
        "snez" => {
            let o = expect_n(ops, 2, m)?;
            one(Instr::Op { op: AluOp::Sltu, rd: reg(&o[0])?, rs1: Reg::ZERO, rs2: reg(&o[1])? })
        }
        "j" => {
            let o = expect_n(ops, 1, m)?;
            one(jal(Reg::ZERO, ctx.target(&o[0], 21, "jump offset")?))
        }
        "call" => {
            let o = expect_n(ops, 1, m)?;
            one(jal(Reg::RA, ctx.target(&o[0], 21, "jump offset")?))
        }
        "jr" => {
            let o = expect_n(ops, 1, m)?;
            one(Instr::Jalr { rd: Reg::ZERO, rs1: reg(&o[0])?, offset: 0 })
        }
        "ret" => one(Instr::Jalr { rd: Reg::ZERO, rs1: Reg::RA, offset: 0 }),
        "beqz" | "bnez" | "bltz" | "bgez" => {
            let o = expect_n(ops, 2, m)?;
            let op = match m {
                "beqz" => BranchOp::Beq,
                "bnez" => BranchOp::Bne,
                "bltz" => BranchOp::Blt,
                _ => BranchOp::Bge,
            };
            one(branch(op, reg(&o[0])?, Reg::ZERO, &o[1])?)
        }
        "blez" | "bgtz" => {
            let o = expect_n(ops, 2, m)?;
            let op = if m == "blez" { BranchOp::Bge } else { BranchOp::Blt };
            one(branch(op, Reg::ZERO, reg(&o[0])?, &o[1])?)
        }
        "bgt" | "ble" | "bgtu" | "bleu" => {
            let o = expect_n(ops, 3, m)?;
            let op = match m {
                "bgt" => BranchOp::Blt,
                "ble" => BranchOp::Bge,
                "bgtu" => BranchOp::Bltu,
                _ => BranchOp::Bgeu,
            };
            one(branch(op, reg(&o[1])?, reg(&o[0])?, &o[2])?)
        }
        "csrr" => {
            let o = expect_n(ops, 2, m)?;
            one(Instr::Csr {
                op: CsrOp::Rs,
                rd: reg(&o[0])?,
                src: CsrSrc::Reg(Reg::ZERO),
                csr: csr_number(&o[1])?,
            })
        }
        "csrw" | "csrs" | "csrc" => {
            let o = expect_n(ops, 2, m)?;
            let op = match m {
                "csrw" => CsrOp::Rw,
                "csrs" => CsrOp::Rs,
                _ => CsrOp::Rc,
            };
            one(Instr::Csr { op, rd: Reg::ZERO, src: CsrSrc::Reg(reg(&o[1])?), csr: csr_number(&o[0])? })
        }
        "csrwi" => {
            let o = expect_n(ops, 2, m)?;
            one(Instr::Csr {
                op: CsrOp::Rw,
                rd: Reg::ZERO,
                src: CsrSrc::Imm(csr_imm(&o[1])?),
                csr: csr_number(&o[0])?,
            })
        }
        other => Err(AsmErrorKind::UnknownMnemonic(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(src: &str) -> Vec<u32> {
        assemble(src).unwrap().words
    }

    #[test]
    fn addi_encoding() {
        assert_eq!(words("addi x1, x0, 5"), vec![0x0050_0093]);
    }

    #[test]
    fn jump_to_self_has_zero_offset() {
        let w = words("loop: jal x0, loop");
        assert_eq!(isa::decode(w[0]), Instr::Jal { rd: Reg::ZERO, offset: 0 });
    }

    #[test]
    fn forward_labels_resolve() {
        let w = words("  beq x0, x0, done\n  nop\ndone: nop");
        assert!(matches!(isa::decode(w[0]), Instr::Branch { offset: 8, .. }));
    }

    #[test]
    fn far_branch_is_range_error() {
        let src = "beq x0, x0, far\n.org 0x3004\nfar: nop";
        let err = assemble(src).unwrap_err();
        assert_eq!(err.line, 1);
        assert!(matches!(err.kind, AsmErrorKind::RangeError { .. }), "{err}");
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = assemble("nop\n\nfrobnicate x1").unwrap_err();
        assert_eq!(err, AsmError { line: 3, kind: AsmErrorKind::UnknownMnemonic("frobnicate".into()) });
        let err = assemble("nop\nj nowhere").unwrap_err();
        assert_eq!(err.kind, AsmErrorKind::UndefinedLabel("nowhere".into()));
        assert_eq!(err.line, 2);
        assert!(matches!(
            assemble("a: nop\na: nop").unwrap_err().kind,
            AsmErrorKind::DuplicateLabel(_)
        ));
        assert!(matches!(
            assemble("addi x1, x0, 4096").unwrap_err().kind,
            AsmErrorKind::RangeError { .. }
        ));
    }

    #[test]
    fn li_expansions() {
        assert_eq!(words("li a0, -1").len(), 1);
        assert_eq!(words("li a0, 0x10200000").len(), 1);
        let w = words("li a0, 0x10200ff0");
        assert_eq!(w.len(), 2);
        // lui 0x10201, addi -16
        assert_eq!(isa::decode(w[0]), Instr::Lui { rd: Reg::new(10).unwrap(), imm: 0x1020_1000 });
        assert!(matches!(isa::decode(w[1]), Instr::OpImm { imm: -16, .. }));
    }

    #[test]
    fn org_and_word_place_data() {
        let image = assemble(".org 0x2000\n_start: nop\n.word 0xdeadbeef, _start\n.org 0x2010\nend: .word 1").unwrap();
        assert_eq!(image.load_addr, 0x2000);
        assert_eq!(image.entry, 0x2000);
        assert_eq!(image.words, vec![0x13, 0xdead_beef, 0x2000, 0, 1]);
        assert_eq!(image.symbol("end"), Some(0x2010));
    }

    #[test]
    fn csr_names_and_pseudos() {
        let w = words("csrr t0, mhartid\ncsrw mtvec, t1\ncsrrwi x0, 0x340, 5");
        assert_eq!(w[0], 0xf140_22f3);
        assert_eq!(w[1], 0x3053_1073);
        assert_eq!(w[2], 0x3402_d073);
    }
}
