"""Virtual pulse processing unit: ISA, physical backends, interpreter and device."""
from .backend import ConstantBackend, PhysicalBackend, RepetitionBackend, inject_error
from .device import ARG_BASE_REG, VppuCompiler, VppuDevice
from .interp import HAVE_COMPILED, TraceEvent, VppuState, execute
from .isa import Instruction, Op, assemble, assemble_instructions, decode_program, disassemble, encode_program

__all__ = [
    "ARG_BASE_REG", "ConstantBackend", "HAVE_COMPILED", "Instruction", "Op", "PhysicalBackend",
    "RepetitionBackend", "TraceEvent", "VppuCompiler", "VppuDevice", "VppuState", "assemble",
    "assemble_instructions", "decode_program", "disassemble", "encode_program", "execute",
    "inject_error",
]
