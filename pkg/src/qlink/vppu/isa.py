"""VPPU instruction set: 8-byte fixed encoding, assembler and disassembler.

Byte 0 holds the opcode; operands follow little-endian in declaration order
and any unused bytes must be zero.  Assembly is one instruction per line,
``;`` starts a comment and ``name:`` defines a label.
"""
from __future__ import annotations

import enum
import re
import struct
from typing import Dict, List, NamedTuple, Sequence, Tuple

from ..errors import AssemblyError, DecodeError

INSTRUCTION_SIZE = 8
N_REGS = 16


class Op(enum.IntEnum):
    NOP = 0x00
    DELAY = 0x01
    PULSE = 0x02
    MEASURE = 0x03
    XORR = 0x04
    LOADI = 0x05
    SENDCB = 0x06
    RECVCB = 0x07
    BRNZ = 0x08
    JMP = 0x09
    HALT = 0x0A


# (field, width in bytes, role); role is "reg", "target" or "imm".
LAYOUT: Dict[Op, Tuple[Tuple[str, int, str], ...]] = {
    Op.NOP: (),
    Op.DELAY: (("ticks", 4, "imm"),),
    Op.PULSE: (("channel", 1, "imm"), ("waveform", 2, "imm"), ("duration", 4, "imm")),
    Op.MEASURE: (("channel", 1, "imm"), ("dest", 1, "reg")),
    Op.XORR: (("dst", 1, "reg"), ("a", 1, "reg"), ("b", 1, "reg")),
    Op.LOADI: (("dst", 1, "reg"), ("imm", 4, "imm")),
    Op.SENDCB: (("device", 2, "imm"), ("callback", 2, "imm"), ("arg", 1, "reg")),
    Op.RECVCB: (("dest", 1, "reg"),),
    Op.BRNZ: (("reg", 1, "reg"), ("target", 2, "target")),
    Op.JMP: (("target", 2, "target"),),
    Op.HALT: (),
}


class Instruction(NamedTuple):
    op: Op
    operands: Tuple[int, ...] = ()

    def __str__(self):
        return format_instruction(self)


def _check_operands(op: Op, operands: Sequence[int], n_instructions: int, err):
    layout = LAYOUT[op]
    if len(operands) != len(layout):
        raise err(f"{op.name} takes {len(layout)} operands, got {len(operands)}")
    for (name, width, role), value in zip(layout, operands):
        if not 0 <= value < (1 << (8 * width)):
            raise err(f"{op.name} {name}={value} does not fit in {8 * width} bits")
        if role == "reg" and value >= N_REGS:
            raise err(f"{op.name} {name}: register r{value} out of range")
        if role == "target" and value >= n_instructions:
            raise err(f"{op.name} target {value} outside program of {n_instructions} instructions")


def encode_instruction(ins: Instruction) -> bytes:
    out = bytearray(INSTRUCTION_SIZE)
    out[0] = int(ins.op)
    pos = 1
    for (_, width, _), value in zip(LAYOUT[ins.op], ins.operands):
        out[pos:pos + width] = int(value).to_bytes(width, "little")
        pos += width
    return bytes(out)


def encode_program(instructions: Sequence[Instruction]) -> bytes:
    n = len(instructions)
    for ins in instructions:
        _check_operands(ins.op, ins.operands, n, DecodeError)
    return b"".join(encode_instruction(i) for i in instructions)


_WIDTH_CODES = {1: "B", 2: "H", 4: "I"}
# per opcode: operand unpacker, first unused byte, register/target operand positions
_DECODERS = {}
for _op, _layout in LAYOUT.items():
    _used = 1 + sum(w for _, w, _ in _layout)
    _DECODERS[int(_op)] = (
        _op,
        struct.Struct("<x" + "".join(_WIDTH_CODES[w] for _, w, _ in _layout)),
        _used,
        tuple(i for i, (_, _, role) in enumerate(_layout) if role == "reg"),
        tuple(i for i, (_, _, role) in enumerate(_layout) if role == "target"),
    )


def decode_program(binary: bytes) -> List[Instruction]:
    if not binary:
        raise DecodeError("empty program")
    if len(binary) % INSTRUCTION_SIZE:
        raise DecodeError(f"program length {len(binary)} is not a multiple of {INSTRUCTION_SIZE}")
    binary = bytes(binary)
    n = len(binary) // INSTRUCTION_SIZE
    program = []
    for idx in range(n):
        off = idx * INSTRUCTION_SIZE
        try:
            op, unpacker, used, regs, targets = _DECODERS[binary[off]]
        except KeyError:
            raise DecodeError(f"illegal opcode 0x{binary[off]:02x} at instruction {idx}") from None
        operands = unpacker.unpack_from(binary, off)
        if any(binary[off + used:off + INSTRUCTION_SIZE]):
            raise DecodeError(f"nonzero unused operand bytes at instruction {idx}")
        for i in regs:
            if operands[i] >= N_REGS:
                raise DecodeError(f"instruction {idx}: {op.name} register r{operands[i]} out of range")
        for i in targets:
            if operands[i] >= n:
                raise DecodeError(f"instruction {idx}: {op.name} target {operands[i]} outside program "
                                  f"of {n} instructions")
        program.append(Instruction(op, operands))
    return program


# -- text form -------------------------------------------------------------

_LABEL_RE = re.compile(r"^([A-Za-z_.$][\w.$]*)\s*:")
_REG_RE = re.compile(r"^[rR](\d+)$")


def _parse_int(token: str, line: int) -> int:
    try:
        return int(token, 0)
    except ValueError:
        raise AssemblyError(f"expected an integer, got {token!r}", line) from None


def _tokenize(source: str):
    """Yield (line number, labels, mnemonic, operand tokens)."""
    pending_labels: List[str] = []
    for lineno, raw in enumerate(source.splitlines(), start=1):
        text = raw.split(";", 1)[0].strip()
        while True:
            m = _LABEL_RE.match(text)
            if not m:
                break
            pending_labels.append(m.group(1))
            text = text[m.end():].strip()
        if not text:
            continue
        parts = text.split(None, 1)
        ops = [t.strip() for t in parts[1].split(",")] if len(parts) > 1 else []
        if any(not t for t in ops):
            raise AssemblyError("empty operand", lineno)
        yield lineno, pending_labels, parts[0].upper(), ops
        pending_labels = []
    if pending_labels:
        yield None, pending_labels, None, []


def assemble_instructions(source: str) -> List[Instruction]:
    lines = list(_tokenize(source))
    labels: Dict[str, int] = {}
    count = 0
    for lineno, lbls, mnemonic, _ in lines:
        for name in lbls:
            if name in labels:
                raise AssemblyError(f"label {name!r} defined twice", lineno)
            labels[name] = count
        if mnemonic is not None:
            count += 1
    program = []
    for lineno, _, mnemonic, tokens in lines:
        if mnemonic is None:
            continue
        try:
            op = Op[mnemonic]
        except KeyError:
            raise AssemblyError(f"unknown mnemonic {mnemonic!r}", lineno) from None
        layout = LAYOUT[op]
        if len(tokens) != len(layout):
            raise AssemblyError(f"{op.name} takes {len(layout)} operands, got {len(tokens)}", lineno)
        operands = []
        for (name, _, role), tok in zip(layout, tokens):
            if role == "reg":
                m = _REG_RE.match(tok)
                if not m:
                    raise AssemblyError(f"{op.name} {name} expects a register, got {tok!r}", lineno)
                operands.append(int(m.group(1)))
            elif role == "target":
                if tok in labels:
                    operands.append(labels[tok])
                elif tok[0].isdigit():
                    operands.append(_parse_int(tok, lineno))
                else:
                    raise AssemblyError(f"unresolved label {tok!r}", lineno)
            else:
                operands.append(_parse_int(tok, lineno))
        try:
            _check_operands(op, operands, count, AssemblyError)
        except AssemblyError as exc:
            raise AssemblyError(str(exc), lineno) from None
        program.append(Instruction(op, tuple(operands)))
    if not program:
        raise AssemblyError("program has no instructions")
    return program


def assemble(source: str) -> bytes:
    return encode_program(assemble_instructions(source))


def format_instruction(ins: Instruction, labels: Dict[int, str] = None) -> str:
    parts = []
    for (_, _, role), value in zip(LAYOUT[ins.op], ins.operands):
        if role == "reg":
            parts.append(f"r{value}")
        elif role == "target":
            parts.append(labels[value] if labels and value in labels else str(value))
        else:
            parts.append(str(value))
    return f"{ins.op.name} {', '.join(parts)}".rstrip()


def disassemble(binary: bytes) -> str:
    program = decode_program(binary)
    targets = sorted({ins.operands[-1] for ins in program if ins.op in (Op.BRNZ, Op.JMP)})
    labels = {t: f"L{t}" for t in targets}
    lines = []
    for idx, ins in enumerate(program):
        if idx in labels:
            lines.append(f"{labels[idx]}:")
        lines.append(f"    {format_instruction(ins, labels)}")
    return "\n".join(lines) + "\n"
