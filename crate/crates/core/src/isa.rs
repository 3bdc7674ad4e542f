// SPDX-License-Identifier: Apache-2.0

//! RV32IM instruction decoding, encoding and disassembly.
//!
//! Only the subset executed by the cluster cores is modeled: the RV32I base,
//! the M extension, Zicsr, `mret`, `wfi`, `ecall` and `ebreak`. Every other
//! encoding decodes to [`Instr::Illegal`].

use std::fmt;

/// A general purpose register index, `x0..=x31`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Reg(u8);

impl Reg {
    pub const ZERO: Reg = Reg(0);
    pub const RA: Reg = Reg(1);
    pub const SP: Reg = Reg(2);

    pub fn new(index: u8) -> Option<Reg> {
        (index < 32).then_some(Reg(index))
    }

    fn from_field(bits: u32) -> Reg {
        Reg((bits & 0x1f) as u8)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    /// Parses `x0`..`x31` as well as the standard ABI names.
    pub fn parse(name: &str) -> Option<Reg> {
        const ABI: [&str; 32] = [
            "zero", "ra", "sp", "gp", "tp", "t0", "t1", "t2", "s0", "s1", "a0", "a1", "a2", "a3",
            "a4", "a5", "a6", "a7", "s2", "s3", "s4", "s5", "s6", "s7", "s8", "s9", "s10", "s11",
            "t3", "t4", "t5", "t6",
        ];
        let name = name.trim();
        if let Some(num) = name.strip_prefix('x') {
            if let Ok(n) = num.parse::<u8>() {
                return Reg::new(n);
            }
        }
        if name == "fp" {
            return Some(Reg(8));
        }
        ABI.iter().position(|abi| *abi == name).map(|i| Reg(i as u8))
    }
}

impl fmt::Display for Reg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "x{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BranchOp {
    Beq,
    Bne,
    Blt,
    Bge,
    Bltu,
    Bgeu,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LoadOp {
    Lb,
    Lh,
    Lw,
    Lbu,
    Lhu,
}

impl LoadOp {
    pub fn width(self) -> u32 {
        match self {
            LoadOp::Lb | LoadOp::Lbu => 1,
            LoadOp::Lh | LoadOp::Lhu => 2,
            LoadOp::Lw => 4,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StoreOp {
    Sb,
    Sh,
    Sw,
}

impl StoreOp {
    pub fn width(self) -> u32 {
        match self {
            StoreOp::Sb => 1,
            StoreOp::Sh => 2,
            StoreOp::Sw => 4,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AluOp {
    Add,
    Sub,
    Sll,
    Slt,
    Sltu,
    Xor,
    Srl,
    Sra,
    Or,
    And,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MulOp {
    Mul,
    Mulh,
    Mulhsu,
    Mulhu,
    Div,
    Divu,
    Rem,
    Remu,
}

impl MulOp {
    pub fn is_divide(self) -> bool {
        matches!(self, MulOp::Div | MulOp::Divu | MulOp::Rem | MulOp::Remu)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CsrOp {
    Rw,
    Rs,
    Rc,
}

/// Source operand of a CSR instruction: a register or a 5-bit immediate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CsrSrc {
    Reg(Reg),
    Imm(u8),
}

/// A decoded instruction. Immediates are stored sign-extended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Instr {
    Lui { rd: Reg, imm: u32 },
    Auipc { rd: Reg, imm: u32 },
    Jal { rd: Reg, offset: i32 },
    Jalr { rd: Reg, rs1: Reg, offset: i32 },
    Branch { op: BranchOp, rs1: Reg, rs2: Reg, offset: i32 },
    Load { op: LoadOp, rd: Reg, rs1: Reg, offset: i32 },
    Store { op: StoreOp, rs1: Reg, rs2: Reg, offset: i32 },
    OpImm { op: AluOp, rd: Reg, rs1: Reg, imm: i32 },
    Op { op: AluOp, rd: Reg, rs1: Reg, rs2: Reg },
    MulDiv { op: MulOp, rd: Reg, rs1: Reg, rs2: Reg },
    Csr { op: CsrOp, rd: Reg, src: CsrSrc, csr: u16 },
    Fence,
    Ecall,
    Ebreak,
    Mret,
    Wfi,
    Illegal(u32),
}

fn sext(value: u32, bits: u32) -> i32 {
    let shift = 32 - bits;
    ((value << shift) as i32) >> shift
}

/// Decodes one 32-bit instruction word.
pub fn decode(word: u32) -> Instr {
    let opcode = word & 0x7f;
    let rd = Reg::from_field(word >> 7);
    let funct3 = (word >> 12) & 0x7;
    let rs1 = Reg::from_field(word >> 15);
    let rs2 = Reg::from_field(word >> 20);
    let funct7 = word >> 25;
    let imm_i = sext(word >> 20, 12);
    let imm_s = sext(((word >> 25) << 5) | ((word >> 7) & 0x1f), 12);
    let imm_b = sext(
        ((word >> 31) << 12)
            | (((word >> 7) & 1) << 11)
            | (((word >> 25) & 0x3f) << 5)
            | (((word >> 8) & 0xf) << 1),
        13,
    );
    let imm_j = sext(
        ((word >> 31) << 20)
            | (((word >> 12) & 0xff) << 12)
            | (((word >> 20) & 1) << 11)
            | (((word >> 21) & 0x3ff) << 1),
        21,
    );
    let illegal = Instr::Illegal(word);

    match opcode {
        0x37 => Instr::Lui { rd, imm: word & 0xffff_f000 },
        0x17 => Instr::Auipc { rd, imm: word & 0xffff_f000 },
        0x6f => Instr::Jal { rd, offset: imm_j },
        0x67 if funct3 == 0 => Instr::Jalr { rd, rs1, offset: imm_i },
        0x63 => {
            let op = match funct3 {
                0 => BranchOp::Beq,
                1 => BranchOp::Bne,
                4 => BranchOp::Blt,
                5 => BranchOp::Bge,
                6 => BranchOp::Bltu,
                7 => BranchOp::Bgeu,
                _ => return illegal,
            };
            Instr::Branch { op, rs1, rs2, offset: imm_b }
        }
        0x03 => {
            let op = match funct3 {
                0 => LoadOp::Lb,
                1 => LoadOp::Lh,
                2 => LoadOp::Lw,
                4 => LoadOp::Lbu,
                5 => LoadOp::Lhu,
                _ => return illegal,
            };
            Instr::Load { op, rd, rs1, offset: imm_i }
        }
        0x23 => {
            let op = match funct3 {
                0 => StoreOp::Sb,
                1 => StoreOp::Sh,
                2 => StoreOp::Sw,
                _ => return illegal,
            };
            Instr::Store { op, rs1, rs2, offset: imm_s }
        }
        0x13 => {
            let op = match (funct3, funct7) {
                (0, _) => AluOp::Add,
                (2, _) => AluOp::Slt,
                (3, _) => AluOp::Sltu,
                (4, _) => AluOp::Xor,
                (6, _) => AluOp::Or,
                (7, _) => AluOp::And,
                (1, 0x00) => AluOp::Sll,
                (5, 0x00) => AluOp::Srl,
                (5, 0x20) => AluOp::Sra,
                _ => return illegal,
            };
            let imm = match op {
                AluOp::Sll | AluOp::Srl | AluOp::Sra => ((word >> 20) & 0x1f) as i32,
                _ => imm_i,
            };
            Instr::OpImm { op, rd, rs1, imm }
        }
        0x33 if funct7 == 0x01 => {
            let op = match funct3 {
                0 => MulOp::Mul,
                1 => MulOp::Mulh,
                2 => MulOp::Mulhsu,
                3 => MulOp::Mulhu,
                4 => MulOp::Div,
                5 => MulOp::Divu,
                6 => MulOp::Rem,
                _ => MulOp::Remu,
            };
            Instr::MulDiv { op, rd, rs1, rs2 }
        }
        0x33 => {
            let op = match (funct3, funct7) {
                (0, 0x00) => AluOp::Add,
                (0, 0x20) => AluOp::Sub,
                (1, 0x00) => AluOp::Sll,
                (2, 0x00) => AluOp::Slt,
                (3, 0x00) => AluOp::Sltu,
                (4, 0x00) => AluOp::Xor,
                (5, 0x00) => AluOp::Srl,
                (5, 0x20) => AluOp::Sra,
                (6, 0x00) => AluOp::Or,
                (7, 0x00) => AluOp::And,
                _ => return illegal,
            };
            Instr::Op { op, rd, rs1, rs2 }
        }
        0x0f if funct3 == 0 => Instr::Fence,
        0x73 => {
            let csr = (word >> 20) as u16;
            match funct3 {
                0 if rd == Reg::ZERO && rs1 == Reg::ZERO => match word >> 20 {
                    0x000 => Instr::Ecall,
                    0x001 => Instr::Ebreak,
                    0x302 => Instr::Mret,
                    0x105 => Instr::Wfi,
                    _ => illegal,
                },
                1 | 2 | 3 => Instr::Csr {
                    op: csr_op(funct3),
                    rd,
                    src: CsrSrc::Reg(rs1),
                    csr,
                },
                5 | 6 | 7 => Instr::Csr {
                    op: csr_op(funct3 - 4),
                    rd,
                    src: CsrSrc::Imm(((word >> 15) & 0x1f) as u8),
                    csr,
                },
                _ => illegal,
            }
        }
        _ => illegal,
    }
}

fn csr_op(funct3: u32) -> CsrOp {
    match funct3 {
        1 => CsrOp::Rw,
        2 => CsrOp::Rs,
        _ => CsrOp::Rc,
    }
}

fn r_type(funct7: u32, rs2: Reg, rs1: Reg, funct3: u32, rd: Reg, opcode: u32) -> u32 {
    (funct7 << 25)
        | ((rs2.0 as u32) << 20)
        | ((rs1.0 as u32) << 15)
        | (funct3 << 12)
        | ((rd.0 as u32) << 7)
        | opcode
}

fn i_type(imm: i32, rs1: Reg, funct3: u32, rd: Reg, opcode: u32) -> u32 {
    (((imm as u32) & 0xfff) << 20)
        | ((rs1.0 as u32) << 15)
        | (funct3 << 12)
        | ((rd.0 as u32) << 7)
        | opcode
}

fn s_type(imm: i32, rs2: Reg, rs1: Reg, funct3: u32, opcode: u32) -> u32 {
    let imm = imm as u32;
    (((imm >> 5) & 0x7f) << 25)
        | ((rs2.0 as u32) << 20)
        | ((rs1.0 as u32) << 15)
        | (funct3 << 12)
        | ((imm & 0x1f) << 7)
        | opcode
}

fn b_type(offset: i32, rs2: Reg, rs1: Reg, funct3: u32) -> u32 {
    let imm = offset as u32;
    (((imm >> 12) & 1) << 31)
        | (((imm >> 5) & 0x3f) << 25)
        | ((rs2.0 as u32) << 20)
        | ((rs1.0 as u32) << 15)
        | (funct3 << 12)
        | (((imm >> 1) & 0xf) << 8)
        | (((imm >> 11) & 1) << 7)
        | 0x63
}

fn j_type(offset: i32, rd: Reg) -> u32 {
    let imm = offset as u32;
    (((imm >> 20) & 1) << 31)
        | (((imm >> 1) & 0x3ff) << 21)
        | (((imm >> 11) & 1) << 20)
        | (((imm >> 12) & 0xff) << 12)
        | ((rd.0 as u32) << 7)
        | 0x6f
}

/// Encodes an instruction. Immediates must already be in range; out-of-range
/// bits are truncated, which the assembler checks for beforehand.
pub fn encode(instr: &Instr) -> u32 {
    match *instr {
        Instr::Lui { rd, imm } => (imm & 0xffff_f000) | ((rd.0 as u32) << 7) | 0x37,
        Instr::Auipc { rd, imm } => (imm & 0xffff_f000) | ((rd.0 as u32) << 7) | 0x17,
        Instr::Jal { rd, offset } => j_type(offset, rd),
        Instr::Jalr { rd, rs1, offset } => i_type(offset, rs1, 0, rd, 0x67),
        Instr::Branch { op, rs1, rs2, offset } => {
            let funct3 = match op {
                BranchOp::Beq => 0,
                BranchOp::Bne => 1,
                BranchOp::Blt => 4,
                BranchOp::Bge => 5,
                BranchOp::Bltu => 6,
                BranchOp::Bgeu => 7,
            };
            b_type(offset, rs2, rs1, funct3)
        }
        Instr::Load { op, rd, rs1, offset } => {
            let funct3 = match op {
                LoadOp::Lb => 0,
                LoadOp::Lh => 1,
                LoadOp::Lw => 2,
                LoadOp::Lbu => 4,
                LoadOp::Lhu => 5,
            };
            i_type(offset, rs1, funct3, rd, 0x03)
        }
        Instr::Store { op, rs1, rs2, offset } => {
            let funct3 = match op {
                StoreOp::Sb => 0,
                StoreOp::Sh => 1,
                StoreOp::Sw => 2,
            };
            s_type(offset, rs2, rs1, funct3, 0x23)
        }
        Instr::OpImm { op, rd, rs1, imm } => {
            let (funct3, imm) = match op {
                AluOp::Add | AluOp::Sub => (0, imm),
                AluOp::Slt => (2, imm),
                AluOp::Sltu => (3, imm),
                AluOp::Xor => (4, imm),
                AluOp::Or => (6, imm),
                AluOp::And => (7, imm),
                AluOp::Sll => (1, imm & 0x1f),
                AluOp::Srl => (5, imm & 0x1f),
                AluOp::Sra => (5, (imm & 0x1f) | 0x400),
            };
            i_type(imm, rs1, funct3, rd, 0x13)
        }
        Instr::Op { op, rd, rs1, rs2 } => {
            let (funct7, funct3) = match op {
                AluOp::Add => (0x00, 0),
                AluOp::Sub => (0x20, 0),
                AluOp::Sll => (0x00, 1),
                AluOp::Slt => (0x00, 2),
                AluOp::Sltu => (0x00, 3),
                AluOp::Xor => (0x00, 4),
                AluOp::Srl => (0x00, 5),
                AluOp::Sra => (0x20, 5),
                AluOp::Or => (0x00, 6),
                AluOp::And => (0x00, 7),
            };
            r_type(funct7, rs2, rs1, funct3, rd, 0x33)
        }
        Instr::MulDiv { op, rd, rs1, rs2 } => {
            let funct3 = match op {
                MulOp::Mul => 0,
                MulOp::Mulh => 1,
                MulOp::Mulhsu => 2,
                MulOp::Mulhu => 3,
                MulOp::Div => 4,
                MulOp::Divu => 5,
                MulOp::Rem => 6,
                MulOp::Remu => 7,
            };
            r_type(0x01, rs2, rs1, funct3, rd, 0x33)
        }
        Instr::Csr { op, rd, src, csr } => {
            let base = match op {
                CsrOp::Rw => 1,
                CsrOp::Rs => 2,
                CsrOp::Rc => 3,
            };
            let (funct3, field) = match src {
                CsrSrc::Reg(r) => (base, r.0 as u32),
                CsrSrc::Imm(v) => (base + 4, (v & 0x1f) as u32),
            };
            ((csr as u32) << 20) | (field << 15) | (funct3 << 12) | ((rd.0 as u32) << 7) | 0x73
        }
        Instr::Fence => 0x0ff0_000f,
        Instr::Ecall => 0x0000_0073,
        Instr::Ebreak => 0x0010_0073,
        Instr::Mret => 0x3020_0073,
        Instr::Wfi => 0x1050_0073,
        Instr::Illegal(word) => word,
    }
}

/// Name of a CSR number, if it is one the cores model.
pub fn csr_name(number: u16) -> Option<&'static str> {
    crate::cpu::Csr::from_number(number).map(|c| c.name())
}

fn alu_mnemonic(op: AluOp, imm: bool) -> &'static str {
    match (op, imm) {
        (AluOp::Add, false) => "add",
        (AluOp::Add, true) => "addi",
        (AluOp::Sub, _) => "sub",
        (AluOp::Sll, false) => "sll",
        (AluOp::Sll, true) => "slli",
        (AluOp::Slt, false) => "slt",
        (AluOp::Slt, true) => "slti",
        (AluOp::Sltu, false) => "sltu",
        (AluOp::Sltu, true) => "sltiu",
        (AluOp::Xor, false) => "xor",
        (AluOp::Xor, true) => "xori",
        (AluOp::Srl, false) => "srl",
        (AluOp::Srl, true) => "srli",
        (AluOp::Sra, false) => "sra",
        (AluOp::Sra, true) => "srai",
        (AluOp::Or, false) => "or",
        (AluOp::Or, true) => "ori",
        (AluOp::And, false) => "and",
        (AluOp::And, true) => "andi",
    }
}

impl BranchOp {
    pub fn mnemonic(self) -> &'static str {
        match self {
            BranchOp::Beq => "beq",
            BranchOp::Bne => "bne",
            BranchOp::Blt => "blt",
            BranchOp::Bge => "bge",
            BranchOp::Bltu => "bltu",
            BranchOp::Bgeu => "bgeu",
        }
    }
}

impl LoadOp {
    pub fn mnemonic(self) -> &'static str {
        match self {
            LoadOp::Lb => "lb",
            LoadOp::Lh => "lh",
            LoadOp::Lw => "lw",
            LoadOp::Lbu => "lbu",
            LoadOp::Lhu => "lhu",
        }
    }
}

impl StoreOp {
    pub fn mnemonic(self) -> &'static str {
        match self {
            StoreOp::Sb => "sb",
            StoreOp::Sh => "sh",
            StoreOp::Sw => "sw",
        }
    }
}

impl MulOp {
    pub fn mnemonic(self) -> &'static str {
        match self {
            MulOp::Mul => "mul",
            MulOp::Mulh => "mulh",
            MulOp::Mulhsu => "mulhsu",
            MulOp::Mulhu => "mulhu",
            MulOp::Div => "div",
            MulOp::Divu => "divu",
            MulOp::Rem => "rem",
            MulOp::Remu => "remu",
        }
    }
}

/// Disassembly in the syntax accepted by [`crate::asm::assemble`]. Branch and
/// jump targets are printed as signed pc-relative byte offsets.
impl fmt::Display for Instr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Instr::Lui { rd, imm } => write!(f, "lui {rd}, {:#x}", imm >> 12),
            Instr::Auipc { rd, imm } => write!(f, "auipc {rd}, {:#x}", imm >> 12),
            Instr::Jal { rd, offset } => write!(f, "jal {rd}, {offset}"),
            Instr::Jalr { rd, rs1, offset } => write!(f, "jalr {rd}, {offset}({rs1})"),
            Instr::Branch { op, rs1, rs2, offset } => {
                write!(f, "{} {rs1}, {rs2}, {offset}", op.mnemonic())
            }
            Instr::Load { op, rd, rs1, offset } => {
                write!(f, "{} {rd}, {offset}({rs1})", op.mnemonic())
            }
            Instr::Store { op, rs1, rs2, offset } => {
                write!(f, "{} {rs2}, {offset}({rs1})", op.mnemonic())
            }
            Instr::OpImm { op, rd, rs1, imm } => {
                write!(f, "{} {rd}, {rs1}, {imm}", alu_mnemonic(op, true))
            }
            Instr::Op { op, rd, rs1, rs2 } => {
                write!(f, "{} {rd}, {rs1}, {rs2}", alu_mnemonic(op, false))
            }
            Instr::MulDiv { op, rd, rs1, rs2 } => {
                write!(f, "{} {rd}, {rs1}, {rs2}", op.mnemonic())
            }
            Instr::Csr { op, rd, src, csr } => {
                let base = match op {
                    CsrOp::Rw => "csrrw",
                    CsrOp::Rs => "csrrs",
                    CsrOp::Rc => "csrrc",
                };
                let csr_text = match csr_name(csr) {
                    Some(name) => name.to_string(),
                    None => format!("{csr:#x}"),
                };
                match src {
                    CsrSrc::Reg(rs1) => write!(f, "{base} {rd}, {csr_text}, {rs1}"),
                    CsrSrc::Imm(v) => write!(f, "{base}i {rd}, {csr_text}, {v}"),
                }
            }
            Instr::Fence => write!(f, "fence"),
            Instr::Ecall => write!(f, "ecall"),
            Instr::Ebreak => write!(f, "ebreak"),
            Instr::Mret => write!(f, "mret"),
            Instr::Wfi => write!(f, "wfi"),
            Instr::Illegal(word) => write!(f, ".word {word:#010x}"),
        }
    }
}
